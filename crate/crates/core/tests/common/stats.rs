//! Goodness-of-fit helpers for Monte Carlo comparisons.

/// Pearson statistic of `counts` against probabilities `p` over `m` draws,
/// pooling cells with expected count below 5. Returns `(x2, df)`.
pub fn pearson(counts: &[u64], p: &[f64], m: u64) -> (f64, usize) {
    let mf = m as f64;
    let (mut x2, mut cells) = (0.0, 0usize);
    let (mut pool_obs, mut pool_exp) = (0.0, 0.0);
    for (&c, &q) in counts.iter().zip(p) {
        let e = q * mf;
        if e < 5.0 {
            pool_obs += c as f64;
            pool_exp += e;
        } else {
            x2 += (c as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    if pool_exp > 0.0 {
        x2 += (pool_obs - pool_exp).powi(2) / pool_exp;
        cells += 1;
    } else if pool_obs > 0.0 {
        return (f64::INFINITY, cells.max(1));
    }
    (x2, cells.saturating_sub(1))
}

/// Wilson–Hilferty normal score of a chi-square statistic.
pub fn chi2_z(x2: f64, df: usize) -> f64 {
    if df == 0 {
        return if x2 == 0.0 { 0.0 } else { f64::INFINITY };
    }
    let k = df as f64;
    let v = 2.0 / (9.0 * k);
    ((x2 / k).cbrt() - (1.0 - v)) / v.sqrt()
}

/// Largest per-cell |z| of binomial frequencies, and how many cells exceed 3.
pub fn cell_scores(counts: &[u64], p: &[f64], m: u64) -> (f64, usize) {
    let mf = m as f64;
    let mut worst: f64 = 0.0;
    let mut over = 0;
    for (&c, &q) in counts.iter().zip(p) {
        let se = (q * (1.0 - q) / mf).sqrt();
        let z = if se > 0.0 {
            (c as f64 / mf - q).abs() / se
        } else if c as f64 == q * mf {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(z);
        if z > 3.0 {
            over += 1;
        }
    }
    (worst, over)
}

/// Mean and 95% half-width of paired differences `a − b`.
pub fn paired(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}
