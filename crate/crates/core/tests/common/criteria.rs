//! Acceptance criteria as size-parameterised checks, shared by the
//! acceptance target and the lighter integration tests.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand_distr::{Binomial, Distribution};
use svc_sched::buffer::{
    apply_delivery, transition_distribution, ActionMode, BufferConfig, BufferState, Phase, SystemState, View,
};
use svc_sched::channel::{build_fsmc, ChannelConfig};
use svc_sched::distortion::dmos_from_msssim;
use svc_sched::exec::{task_rng, Exec};
use svc_sched::mdp::{enumerate_states, SpaceConfig, StateSpace};
use svc_sched::toy;

use super::stats::{cell_scores, chi2_z, pearson};

#[derive(Debug)]
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Outcome {
    pub fn line(&self, n: usize, title: &str) -> String {
        format!(
            "criterion {n} [{}] {title}: {} ({:.1} s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Times `f`, which reports `(pass, detail)`.
pub fn timed(budget: Option<Duration>, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let t = Instant::now();
    let (mut pass, mut detail) = f();
    let elapsed = t.elapsed();
    if let Some(b) = budget {
        if elapsed > b {
            pass = false;
            detail.push_str(&format!("; over the {:.0} s budget", b.as_secs_f64()));
        }
    }
    Outcome { pass, detail, elapsed }
}

pub fn toy_space(cap: u32) -> StateSpace {
    let p = toy::profile();
    let buf = BufferConfig { post_cap: Some(cap), ..toy::buffer_config() };
    let start = SystemState::new(0, BufferState::empty(&p, &buf, 0));
    enumerate_states(&p, &toy::channel(), &SpaceConfig::new(buf), &start, Exec::default()).unwrap()
}

/// Tridiagonal, stochastic rows and a uniform stationary law, the latter
/// recovered by detailed balance along the birth–death chain.
pub fn fsmc(doppler: &[f64]) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for &fd in doppler {
        let ch = build_fsmc(&ChannelConfig { f_d_hz: fd, ..Default::default() }).unwrap();
        let n = ch.num_states();
        let p = &ch.transition;
        let tridiagonal = (0..n).all(|i| (0..n).all(|j| i.abs_diff(j) <= 1 || p[i][j] == 0.0));
        let row_err = p.iter().map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
        let nonneg = p.iter().flatten().all(|&x| x >= 0.0);
        let mut pi = vec![1.0];
        for i in 0..n - 1 {
            pi.push(pi[i] * p[i][i + 1] / p[i + 1][i]);
        }
        let total: f64 = pi.iter().sum();
        let pi_err = pi.iter().map(|x| (x / total - 1.0 / n as f64).abs()).fold(0.0, f64::max);
        let lib_err = ch.stationary().iter().map(|x| (x - 1.0 / n as f64).abs()).fold(0.0, f64::max);
        let ok = tridiagonal && nonneg && row_err <= 1e-12 && pi_err <= 1e-6 && lib_err <= 1e-6;
        pass &= ok;
        parts.push(format!("f_d={fd}: row err {row_err:.1e}, |π−1/4| {pi_err:.1e} (library {lib_err:.1e})"));
    }
    (pass, parts.join("; "))
}

/// Sampled `(state, action)` pairs on the toy space: exact kernel mass and
/// a Pearson fit of `samples` draws of `apply_delivery` plus a channel step.
pub fn kernel(pairs: usize, samples: u64, seed: u64) -> (bool, String) {
    let p = toy::profile();
    let ch = toy::channel();
    let cfg = BufferConfig { post_cap: Some(8), ..toy::buffer_config() };
    let space = toy_space(8);
    let mut rng = task_rng(seed, 0);
    let mut worst_mass: f64 = 0.0;
    let mut worst_z = f64::NEG_INFINITY;
    let (mut worst_cell, mut cells_over, mut cells) = (0.0f64, 0usize, 0usize);
    let mut fails = 0;
    let binomials: Vec<Binomial> = ch
        .states
        .iter()
        .map(|c| Binomial::new(c.packets_per_slot as u64, 1.0 - c.packet_error).unwrap())
        .collect();
    for pair in 0..pairs {
        let s = space.index.states().choose(&mut rng).unwrap().clone();
        let advanced = s.buffer.advance(&p);
        let c = &ch.states[s.channel];
        let view = View::new(&p, &advanced, &cfg, Phase::Steady, c.capacity_bits(c.packets_per_slot));
        let actions = view.feasible(ActionMode::Exhaustive { cap: 100_000 }).unwrap();
        let action = actions.choose(&mut rng).unwrap();
        let dist = transition_distribution(&s, action, &p, &cfg, &ch, Phase::Steady).unwrap();
        let mass: f64 = dist.iter().map(|x| x.1).sum();
        worst_mass = worst_mass.max((mass - 1.0).abs());

        let index: HashMap<&SystemState, usize> = dist.iter().enumerate().map(|(i, x)| (&x.0, i)).collect();
        let by_n: Vec<BufferState> = (0..=c.packets_per_slot)
            .map(|n| apply_delivery(&view, action, n, c.packet_bits).unwrap())
            .collect();
        let mut counts = vec![0u64; dist.len()];
        let mut stray = 0u64;
        let mut local = task_rng(seed, 1 + pair as u64);
        for _ in 0..samples {
            let n = binomials[s.channel].sample(&mut local) as usize;
            let next = ch.sample_next(s.channel, &mut local);
            let key = SystemState::new(next, by_n[n].clone());
            match index.get(&key) {
                Some(&i) => counts[i] += 1,
                None => stray += 1,
            }
        }
        let probs: Vec<f64> = dist.iter().map(|x| x.1).collect();
        let (x2, df) = pearson(&counts, &probs, samples);
        let z = if stray > 0 { f64::INFINITY } else { chi2_z(x2, df) };
        let (wc, over) = cell_scores(&counts, &probs, samples);
        worst_z = worst_z.max(z);
        worst_cell = worst_cell.max(wc);
        cells_over += over;
        cells += probs.len();
        if z > 3.0 || (mass - 1.0).abs() > 1e-10 {
            fails += 1;
        }
    }
    let detail = format!(
        "{pairs} pairs × {samples} draws: max |Σp−1| {worst_mass:.1e}, max fit z {worst_z:.2}; per-cell max |z| {worst_cell:.2}, {cells_over}/{cells} cells over 3σ (≈{:.1} expected by chance)",
        cells as f64 * 0.0027
    );
    (fails == 0, detail)
}

/// Value and strict decrease of the MS-SSIM to DMOS map.
pub fn dmos() -> (bool, String) {
    let v = dmos_from_msssim(0.9).unwrap();
    let grid: Vec<f64> = (1..=1000).map(|i| dmos_from_msssim(i as f64 / 1001.0).unwrap()).collect();
    let monotone = grid.windows(2).all(|w| w[1] < w[0]);
    ((v - 46.648).abs() <= 1e-3 && monotone, format!("dmos(0.9) = {v:.6}, strictly decreasing on 1000 points: {monotone}"))
}

/// Monte Carlo boundary dynamics against the exact truncated solve: sojourn
/// within 3 standard errors and a Pearson fit of the re-entry law, per state.
pub fn boundary(samples: usize, seed: u64) -> (bool, String) {
    use svc_sched::mdp::{boundary_dynamics, BoundaryMethod};
    let space = toy_space(8);
    let ch = toy::channel();
    let exact = boundary_dynamics(&space, &ch, BoundaryMethod::TruncatedSolve, Exec::default()).unwrap();
    let mc = boundary_dynamics(&space, &ch, BoundaryMethod::monte_carlo(samples, seed), Exec::default()).unwrap();
    let (mut worst_t, mut worst_fit, mut worst_cell) = (0.0f64, f64::NEG_INFINITY, 0.0f64);
    let (mut fails, mut cells, mut over) = (0, 0, 0);
    for b in 0..exact.states.len() {
        let diff = (mc.sojourn[b] - exact.sojourn[b]).abs();
        let z_t = if mc.sojourn_se[b] > 0.0 {
            diff / mc.sojourn_se[b]
        } else if diff <= 1e-12 * exact.sojourn[b] {
            0.0
        } else {
            f64::INFINITY
        };
        worst_t = worst_t.max(z_t);
        let probs: Vec<f64> = exact.reentry[b].iter().map(|x| x.1).collect();
        let mut counts = vec![0u64; probs.len()];
        let mut stray = false;
        for &(i, q) in &mc.reentry[b] {
            match exact.reentry[b].binary_search_by_key(&i, |x| x.0) {
                Ok(k) => counts[k] = (q * samples as f64).round() as u64,
                Err(_) => stray = true,
            }
        }
        let (x2, df) = pearson(&counts, &probs, samples as u64);
        let z = if stray { f64::INFINITY } else { chi2_z(x2, df) };
        let (wc, o) = cell_scores(&counts, &probs, samples as u64);
        worst_fit = worst_fit.max(z);
        worst_cell = worst_cell.max(wc);
        cells += probs.len();
        over += o;
        if z_t > 3.0 || z > 3.0 {
            fails += 1;
        }
    }
    let detail = format!(
        "{} boundary states, {samples} samples: max sojourn |Δ|/SE {worst_t:.2}, max re-entry fit z {worst_fit:.2}; per-cell max |z| {worst_cell:.2}, {over}/{cells} cells over 3σ (≈{:.1} expected)",
        exact.states.len(),
        cells as f64 * 0.0027
    );
    (fails == 0, detail)
}

/// Solver λ against policy iteration and exhaustive enumeration of every
/// joint choice on random subsets of decision states.
pub fn optimality(subsets: usize, k: usize, seed: u64) -> (bool, String) {
    use super::mdp::{decision_states, enumerate_subset, policy_iteration};
    use rand::seq::index::sample;
    use svc_sched::mdp::{boundary_dynamics, solve_average_cost, BoundaryMethod, SolveOptions};
    let space = toy_space(8);
    let bd = boundary_dynamics(&space, &toy::channel(), BoundaryMethod::TruncatedSolve, Exec::default()).unwrap();
    let opts = SolveOptions { epsilon: 1e-11, ..SolveOptions::default() };
    let sol = solve_average_cost(&space, &bd, &space.cost, &opts).unwrap();
    let (g, pi_choice, rounds) = policy_iteration(&space, &bd);
    let mut pass = (sol.lambda - g).abs() <= 1e-6;
    let decisions = decision_states(&space);
    let mut rng = task_rng(seed, 0);
    let mut gaps = Vec::new();
    let mut evaluated = 0;
    for _ in 0..subsets {
        let subset: Vec<usize> = sample(&mut rng, decisions.len(), k.min(decisions.len())).into_iter().map(|i| decisions[i]).collect();
        let (best, n) = enumerate_subset(&space, &bd, &pi_choice, &subset);
        evaluated += n;
        gaps.push(best - sol.lambda);
        pass &= (best - sol.lambda).abs() <= 1e-6;
    }
    let worst = gaps.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    (
        pass,
        format!(
            "λ = {:.9}, policy iteration {g:.9} ({rounds} rounds), |Δ| {:.1e}; {evaluated} policies over {subsets} subsets of {k} of the {} decision states, max |min − λ| {worst:.1e}",
            sol.lambda,
            (sol.lambda - g).abs(),
            decisions.len()
        ),
    )
}

/// Greedy bound against the LP and lattice oracles on every bundled profile.
pub fn bound() -> (bool, String) {
    use super::oracles::{lattice_bound, lp_bound};
    use svc_sched::bound::distortion_lower_bound;
    use svc_sched::stream::StreamProfile;
    let (mut lp_err, mut grid_err) = (0.0f64, 0.0f64);
    for name in StreamProfile::BUNDLED {
        let p = StreamProfile::bundled(name).unwrap();
        for level in 1..=10 {
            let r = p.full_rate() * level as f64 / 10.0;
            let g = distortion_lower_bound(&p, r).unwrap().lower_bound;
            lp_err = lp_err.max((g - lp_bound(&p, r)).abs());
            grid_err = grid_err.max((g - lattice_bound(&p, r)).abs());
        }
    }
    (lp_err <= 1e-9 && grid_err <= 1e-6, format!("5 profiles × 10 budgets: max |greedy − LP| {lp_err:.1e}, max |greedy − grid| {grid_err:.1e}"))
}

/// Solved toy policy simulated on the uncapped system against λ.
pub fn average_cost_consistency(replications: usize) -> (bool, String) {
    use svc_sched::harness::{run_simulation, MdpScheduler, Scheduler, SimConfig};
    use svc_sched::mdp::{boundary_dynamics, solve_average_cost, BoundaryMethod, PolicyFile, SolveOptions};
    let p = toy::profile();
    let ch = toy::channel();
    let space = toy_space(8);
    let bd = boundary_dynamics(&space, &ch, BoundaryMethod::TruncatedSolve, Exec::default()).unwrap();
    let sol = solve_average_cost(&space, &bd, &space.cost, &SolveOptions::default()).unwrap();
    let pf = PolicyFile::from_solution(&space, &sol).unwrap();
    let sched = Scheduler::Mdp(MdpScheduler::from_policy(&pf, &p, &ch).unwrap());
    let cfg = SimConfig { replications, buffer: BufferConfig::uncapped(toy::buffer_config().window), ..Default::default() };
    let out = run_simulation(&p, &ch, &sched, &cfg, Exec::default()).unwrap();
    let s = &out.summary;
    let ok = (s.mean_mse - sol.lambda).abs() <= s.ci_half_width && s.fallbacks == 0;
    (
        ok,
        format!(
            "λ = {:.4}, simulated {:.4} ± {:.4} over {replications} × {} slots, {} fallbacks",
            sol.lambda, s.mean_mse, s.ci_half_width, cfg.run_length, s.fallbacks
        ),
    )
}

pub struct ForemanRun {
    pub lambda: f64,
    pub states: usize,
    pub summaries: Vec<svc_sched::harness::RunSummary>,
}

/// Foreman at f_d = 5 Hz: MDP solved at `window`, all four schedulers simulated.
pub fn foreman_run(window: usize, cap: u32, replications: usize) -> ForemanRun {
    use svc_sched::channel::ar1_from_model;
    use svc_sched::harness::{run_simulation, MdpScheduler, Scheduler, SimConfig};
    use svc_sched::mdp::{boundary_dynamics, solve_average_cost, BoundaryMethod, PolicyFile, SolveOptions};
    use svc_sched::online::OnlineParams;
    use svc_sched::stream::StreamProfile;
    let p = StreamProfile::bundled("foreman").unwrap();
    let ch = build_fsmc(&ChannelConfig { f_d_hz: 5.0, ..Default::default() }).unwrap();
    let buf = BufferConfig { window, post_cap: Some(cap) };
    let start = SystemState::new(0, BufferState::empty(&p, &buf, 0));
    let space = enumerate_states(&p, &ch, &SpaceConfig::new(buf), &start, Exec::default()).unwrap();
    let bd = boundary_dynamics(&space, &ch, BoundaryMethod::TruncatedSolve, Exec::default()).unwrap();
    let sol = solve_average_cost(&space, &bd, &space.cost, &SolveOptions::default()).unwrap();
    let pf = PolicyFile::from_solution(&space, &sol).unwrap();
    let ar1 = ar1_from_model(&ch);
    let scheds = [
        Scheduler::Mdp(MdpScheduler::from_policy(&pf, &p, &ch).unwrap()),
        Scheduler::Online(OnlineParams { ar1, i_preemption: true }),
        Scheduler::Online(OnlineParams { ar1, i_preemption: false }),
        Scheduler::Sequential,
    ];
    let cfg = SimConfig { replications, buffer: BufferConfig::uncapped(window), ..Default::default() };
    let summaries = scheds
        .iter()
        .map(|s| run_simulation(&p, &ch, s, &cfg, Exec::default()).unwrap().summary)
        .collect();
    ForemanRun { lambda: sol.lambda, states: space.len(), summaries }
}

/// (a) every scheduler within 2% of the bound or above it, (b) the
/// online/MDP ratio (reported only), (c) the I split helping at 95%.
pub fn foreman(run: &ForemanRun) -> (bool, String) {
    use super::stats::paired;
    let s = &run.summaries;
    let a = s.iter().all(|x| x.mean_mse >= 0.98 * x.bound);
    let means: Vec<String> = s.iter().map(|x| format!("{} {:.3}±{:.3}", x.scheduler.name(), x.mean_mse, x.ci_half_width)).collect();
    let ratio = s[1].mean_mse / s[0].mean_mse;
    let (d, hw) = paired(&s[2].rep_means, &s[1].rep_means);
    let c = d - hw > 0.0;
    (
        a && c,
        format!(
            "MDP λ {:.3} on {} states; {}; bound {:.3}; (a) {}; (b) online/MDP {ratio:.3} (target ≤ 1.2, reported); (c) no-split − online {d:.5} ± {hw:.5} paired, {}",
            run.lambda,
            run.states,
            means.join(", "),
            s[0].bound,
            if a { "ok" } else { "violated" },
            if c { "ok" } else { "not significant" }
        ),
    )
}

/// Two runs with one config and seed produce the same trace bytes, also
/// across execution modes.
pub fn reproducibility(replications: usize, run_length: usize) -> (bool, String) {
    use svc_sched::channel::ar1_from_model;
    use svc_sched::harness::{run_simulation, write_trace, Scheduler, SimConfig};
    use svc_sched::online::OnlineParams;
    use svc_sched::stream::StreamProfile;
    let p = StreamProfile::bundled("foreman").unwrap();
    let ch = build_fsmc(&ChannelConfig::default()).unwrap();
    let sched = Scheduler::Online(OnlineParams { ar1: ar1_from_model(&ch), i_preemption: true });
    let cfg = SimConfig { replications, run_length, seed: 20, ..Default::default() };
    let bytes = |exec| {
        let mut buf = Vec::new();
        write_trace(&mut buf, &run_simulation(&p, &ch, &sched, &cfg, exec).unwrap().trace).unwrap();
        buf
    };
    let first = bytes(Exec::default());
    let second = bytes(Exec::default());
    let seq = bytes(Exec::Sequential);
    let other = {
        let cfg = SimConfig { seed: 21, ..cfg };
        let mut buf = Vec::new();
        write_trace(&mut buf, &run_simulation(&p, &ch, &sched, &cfg, Exec::default()).unwrap().trace).unwrap();
        buf
    };
    let ok = first == second && first == seq && first != other;
    (
        ok,
        format!(
            "{} trace bytes; rerun identical: {}; sequential identical: {}; other seed differs: {}",
            first.len(),
            first == second,
            first == seq,
            first != other
        ),
    )
}
