//! Scalable video stream model.
//!
//! An intra period of `f_intra` frames starts with an I frame and is split into
//! GOPs of `f_gop` frames. Each GOP ends in a key picture (I or P); the frames
//! in between form a dyadic hierarchy of B frames. Every frame carries a base
//! layer plus `num_layers` MGS enhancement layers whose mean sizes depend only
//! on the frame type, and whose distortion depends only on the layer count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frame type: I, P, or a B frame at temporal level `τ ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FrameType {
    I,
    P,
    B(u8),
}

impl FrameType {
    pub fn is_key(self) -> bool {
        matches!(self, FrameType::I | FrameType::P)
    }

    /// Temporal level: 0 for key pictures.
    pub fn temporal_level(self) -> u8 {
        match self {
            FrameType::I | FrameType::P => 0,
            FrameType::B(t) => t,
        }
    }

    /// Dense index: I = 0, P = 1, B^τ = 1 + τ.
    pub fn index(self) -> usize {
        match self {
            FrameType::I => 0,
            FrameType::P => 1,
            FrameType::B(t) => 1 + t as usize,
        }
    }

    pub fn from_index(idx: usize) -> FrameType {
        match idx {
            0 => FrameType::I,
            1 => FrameType::P,
            t => FrameType::B((t - 1) as u8),
        }
    }
}

impl std::fmt::Display for FrameType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FrameType::I => write!(f, "I"),
            FrameType::P => write!(f, "P"),
            FrameType::B(t) => write!(f, "B{t}"),
        }
    }
}

/// Config-file form of a profile. Sizes are in bytes, one row per layer with
/// one column per frame type (I, P, B^1, …, B^T).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    #[serde(default)]
    pub name: String,
    pub f_intra: usize,
    pub f_gop: usize,
    pub num_layers: usize,
    pub frame_rate: f64,
    /// Concealment distortion; defaults to four times the base-layer distortion.
    #[serde(default)]
    pub d_loss: Option<f64>,
    pub layer_sizes_bytes: Vec<Vec<f64>>,
    pub layer_distortions: Vec<f64>,
}

/// Immutable stream description. Sizes are stored in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamProfile {
    pub name: String,
    pub f_intra: usize,
    pub f_gop: usize,
    pub num_layers: usize,
    pub temporal_depth: usize,
    /// `layer_sizes[k][l]`: bits in layer `l` of a frame with type index `k`.
    pub layer_sizes: Vec<Vec<u64>>,
    /// `layer_distortions[l]`: MSE with layers `0..=l` received.
    pub layer_distortions: Vec<f64>,
    pub d_loss: f64,
    pub frame_rate: f64,
}

fn is_power_of_two(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

impl StreamProfile {
    /// Build from sizes already expressed in bits.
    pub fn new(
        name: impl Into<String>,
        f_intra: usize,
        f_gop: usize,
        layer_sizes: Vec<Vec<u64>>,
        layer_distortions: Vec<f64>,
        d_loss: Option<f64>,
        frame_rate: f64,
    ) -> Result<Self> {
        if f_gop == 0 || !is_power_of_two(f_gop) {
            return Err(Error::InvalidProfile(format!("f_gop = {f_gop} is not a power of two")));
        }
        if f_intra == 0 || f_intra % f_gop != 0 {
            return Err(Error::InvalidProfile(format!(
                "f_gop = {f_gop} does not divide f_intra = {f_intra}"
            )));
        }
        if layer_distortions.is_empty() {
            return Err(Error::InvalidProfile("no layers".into()));
        }
        let num_layers = layer_distortions.len() - 1;
        let temporal_depth = f_gop.trailing_zeros() as usize;
        let num_types = 2 + temporal_depth;
        if layer_sizes.len() != num_types {
            return Err(Error::InvalidProfile(format!(
                "expected {num_types} frame-type size rows, got {}",
                layer_sizes.len()
            )));
        }
        for (k, row) in layer_sizes.iter().enumerate() {
            if row.len() != num_layers + 1 {
                return Err(Error::InvalidProfile(format!(
                    "frame type {} has {} layer sizes, expected {}",
                    FrameType::from_index(k),
                    row.len(),
                    num_layers + 1
                )));
            }
            if row.iter().any(|&s| s == 0) {
                return Err(Error::InvalidProfile(format!(
                    "frame type {} has a zero-size layer",
                    FrameType::from_index(k)
                )));
            }
        }
        if layer_distortions.windows(2).any(|w| !(w[0] > w[1])) || layer_distortions[num_layers] <= 0.0 {
            return Err(Error::InvalidProfile(
                "layer distortions must be strictly decreasing and positive".into(),
            ));
        }
        let d_loss = d_loss.unwrap_or(4.0 * layer_distortions[0]);
        if d_loss < layer_distortions[0] {
            return Err(Error::InvalidProfile(format!(
                "d_loss = {d_loss} below base-layer distortion {}",
                layer_distortions[0]
            )));
        }
        if !(frame_rate > 0.0) {
            return Err(Error::InvalidProfile("frame_rate must be positive".into()));
        }
        Ok(Self {
            name: name.into(),
            f_intra,
            f_gop,
            num_layers,
            temporal_depth,
            layer_sizes,
            layer_distortions,
            d_loss,
            frame_rate,
        })
    }

    pub fn from_config(cfg: &ProfileConfig) -> Result<Self> {
        let temporal_depth = if is_power_of_two(cfg.f_gop) { cfg.f_gop.trailing_zeros() as usize } else { 0 };
        let num_types = 2 + temporal_depth;
        if cfg.layer_sizes_bytes.len() != cfg.num_layers + 1 {
            return Err(Error::InvalidProfile(format!(
                "expected {} layer rows, got {}",
                cfg.num_layers + 1,
                cfg.layer_sizes_bytes.len()
            )));
        }
        if cfg.layer_distortions.len() != cfg.num_layers + 1 {
            return Err(Error::InvalidProfile(format!(
                "expected {} layer distortions, got {}",
                cfg.num_layers + 1,
                cfg.layer_distortions.len()
            )));
        }
        let mut sizes = vec![Vec::with_capacity(cfg.num_layers + 1); num_types];
        for row in &cfg.layer_sizes_bytes {
            if row.len() != num_types {
                return Err(Error::InvalidProfile(format!(
                    "each layer row needs {num_types} frame-type columns, got {}",
                    row.len()
                )));
            }
            for (k, &bytes) in row.iter().enumerate() {
                sizes[k].push((bytes * 8.0).round() as u64);
            }
        }
        Self::new(
            cfg.name.clone(),
            cfg.f_intra,
            cfg.f_gop,
            sizes,
            cfg.layer_distortions.clone(),
            cfg.d_loss,
            cfg.frame_rate,
        )
    }

    pub fn to_config(&self) -> ProfileConfig {
        let layer_sizes_bytes = (0..=self.num_layers)
            .map(|l| self.layer_sizes.iter().map(|row| row[l] as f64 / 8.0).collect())
            .collect();
        ProfileConfig {
            name: self.name.clone(),
            f_intra: self.f_intra,
            f_gop: self.f_gop,
            num_layers: self.num_layers,
            frame_rate: self.frame_rate,
            d_loss: Some(self.d_loss),
            layer_sizes_bytes,
            layer_distortions: self.layer_distortions.clone(),
        }
    }

    /// Number of quality layers (base + enhancement).
    pub fn quality_layers(&self) -> usize {
        self.num_layers + 1
    }

    pub fn num_frame_types(&self) -> usize {
        self.layer_sizes.len()
    }

    pub fn slot_length(&self) -> f64 {
        1.0 / self.frame_rate
    }

    /// Distortion with every layer received.
    pub fn d_full(&self) -> f64 {
        self.layer_distortions[self.num_layers]
    }

    pub fn frame_type_at(&self, position: usize) -> Result<FrameType> {
        if position >= self.f_intra {
            return Err(Error::PositionOutOfRange { position, f_intra: self.f_intra });
        }
        Ok(self.type_at_wrapped(position as i64))
    }

    /// Frame type at any (possibly negative) absolute position; wraps modulo `f_intra`.
    pub fn type_at_wrapped(&self, position: i64) -> FrameType {
        let p = position.rem_euclid(self.f_intra as i64) as usize;
        if p == 0 {
            return FrameType::I;
        }
        let g = p % self.f_gop;
        if g == 0 {
            FrameType::P
        } else {
            FrameType::B((self.temporal_depth - g.trailing_zeros() as usize) as u8)
        }
    }

    /// Absolute positions of the reference frames of the frame at `position`.
    pub fn references(&self, position: i64) -> Vec<i64> {
        match self.type_at_wrapped(position) {
            FrameType::I => vec![],
            FrameType::P => vec![position - self.f_gop as i64],
            FrameType::B(_) => {
                let g = position.rem_euclid(self.f_gop as i64);
                let step = 1i64 << g.trailing_zeros();
                vec![position - step, position + step]
            }
        }
    }

    /// GOP id of an absolute position: GOPs end at multiples of `f_gop`.
    pub fn gop_of(&self, position: i64) -> i64 {
        let f = self.f_gop as i64;
        (position + f - 1).div_euclid(f)
    }

    /// Sort key giving decoding order: GOP, then temporal level, then position.
    pub fn decode_key(&self, position: i64) -> (i64, u8, i64) {
        (self.gop_of(position), self.type_at_wrapped(position).temporal_level(), position)
    }

    pub fn unit_size(&self, k: FrameType, layer: usize) -> u64 {
        self.layer_sizes[k.index()][layer]
    }

    /// Bits in the first `layers` layers of a type-`k` frame.
    pub fn cumulative_size(&self, k: FrameType, layers: usize) -> u64 {
        self.layer_sizes[k.index()][..layers].iter().sum()
    }

    /// Distortion of a frame with `layers` quality layers received and intact references.
    pub fn distortion_for_layers(&self, layers: usize) -> f64 {
        if layers == 0 {
            self.d_loss
        } else {
            self.layer_distortions[layers.min(self.num_layers + 1) - 1]
        }
    }

    /// Step rate-distortion function of a type-`k` frame.
    pub fn rd_distortion(&self, k: FrameType, z: f64) -> f64 {
        let mut cum = 0.0;
        let mut d = self.d_loss;
        for (l, &size) in self.layer_sizes[k.index()].iter().enumerate() {
            cum += size as f64;
            if z >= cum {
                d = self.layer_distortions[l];
            } else {
                break;
            }
        }
        d
    }

    pub fn convex_envelope(&self, k: FrameType) -> PiecewiseLinearEnvelope {
        let mut points = vec![(0.0, self.d_loss)];
        let mut cum = 0.0;
        for (l, &size) in self.layer_sizes[k.index()].iter().enumerate() {
            cum += size as f64;
            points.push((cum, self.layer_distortions[l]));
        }
        PiecewiseLinearEnvelope::lower_hull(&points)
    }

    /// Number of frames of each type in one intra period.
    pub fn type_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_frame_types()];
        for p in 0..self.f_intra {
            counts[self.type_at_wrapped(p as i64).index()] += 1;
        }
        counts
    }

    /// Mean bits per frame needed to deliver every layer of every frame.
    pub fn full_rate(&self) -> f64 {
        let counts = self.type_counts();
        counts
            .iter()
            .enumerate()
            .map(|(k, &c)| c as f64 * self.layer_sizes[k].iter().sum::<u64>() as f64)
            .sum::<f64>()
            / self.f_intra as f64
    }

    /// Mean bits per frame for base layers only.
    pub fn base_rate(&self) -> f64 {
        let counts = self.type_counts();
        counts
            .iter()
            .enumerate()
            .map(|(k, &c)| c as f64 * self.layer_sizes[k][0] as f64)
            .sum::<f64>()
            / self.f_intra as f64
    }

    /// Bundled sequences encoded with F^intra = 16, F^GOP = 4 and two MGS layers.
    pub fn bundled(name: &str) -> Option<StreamProfile> {
        let (sizes, d): ([[f64; 4]; 3], [f64; 3]) = match name.to_ascii_lowercase().as_str() {
            "foreman" => (
                [[6712., 2499., 928., 520.], [8302., 8293., 3373., 2775.], [5844., 5773., 2177., 1893.]],
                [16.27, 5.491, 4.124],
            ),
            "bus" => (
                [[5920., 2417., 889., 568.], [7837., 8003., 3390., 2925.], [4636., 4412., 1577., 1339.]],
                [100.8, 41.35, 21.65],
            ),
            "flower" => (
                [[8261., 2076., 548., 324.], [6786., 6900., 1951., 1611.], [6633., 6610., 2008., 1545.]],
                [172.1, 96.66, 30.85],
            ),
            "mobile" => (
                [[9648., 1556., 510., 262.], [9090., 9193., 2541., 2171.], [7627., 6894., 1973., 1701.]],
                [186.0, 89.90, 37.35],
            ),
            "paris" => (
                [[12353., 2640., 865., 463.], [9850., 9457., 2103., 1571.], [8091., 7987., 2024., 1555.]],
                [32.33, 18.59, 5.420],
            ),
            _ => return None,
        };
        let cfg = ProfileConfig {
            name: name.to_ascii_lowercase(),
            f_intra: 16,
            f_gop: 4,
            num_layers: 2,
            frame_rate: 30.0,
            d_loss: None,
            layer_sizes_bytes: sizes.iter().map(|r| r.to_vec()).collect(),
            layer_distortions: d.to_vec(),
        };
        StreamProfile::from_config(&cfg).ok()
    }

    pub const BUNDLED: [&'static str; 5] = ["foreman", "bus", "flower", "mobile", "paris"];
}

/// Convex, non-increasing piecewise-linear function given by its knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearEnvelope {
    pub knots: Vec<(f64, f64)>,
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

impl PiecewiseLinearEnvelope {
    /// Lower convex hull of points sorted by abscissa (monotone chain).
    pub fn lower_hull(points: &[(f64, f64)]) -> Self {
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
        for p in pts {
            if let Some(last) = hull.last() {
                if last.0 == p.0 {
                    continue;
                }
            }
            while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        Self { knots: hull }
    }

    pub fn eval(&self, z: f64) -> f64 {
        let k = &self.knots;
        if z <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            let (a, b) = (w[0], w[1]);
            if z <= b.0 {
                return a.1 + (b.1 - a.1) * (z - a.0) / (b.0 - a.0);
            }
        }
        k[k.len() - 1].1
    }

    /// Segment slopes in order (non-decreasing for a convex envelope).
    pub fn slopes(&self) -> Vec<f64> {
        self.knots.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2() -> StreamProfile {
        StreamProfile::new(
            "fig2",
            8,
            4,
            vec![vec![10, 10], vec![10, 10], vec![10, 10], vec![10, 10]],
            vec![10.0, 5.0],
            None,
            30.0,
        )
        .unwrap()
    }

    #[test]
    fn frame_types_follow_dyadic_hierarchy() {
        let p = fig2();
        assert_eq!(p.frame_type_at(0).unwrap(), FrameType::I);
        assert_eq!(p.frame_type_at(4).unwrap(), FrameType::P);
        assert_eq!(p.frame_type_at(2).unwrap(), FrameType::B(1));
        assert_eq!(p.frame_type_at(1).unwrap(), FrameType::B(2));
        assert_eq!(p.frame_type_at(3).unwrap(), FrameType::B(2));
        assert!(matches!(p.frame_type_at(8), Err(Error::PositionOutOfRange { .. })));
    }

    #[test]
    fn key_pictures_per_intra_period() {
        let p = StreamProfile::bundled("foreman").unwrap();
        let types: Vec<_> = (0..p.f_intra).map(|i| p.frame_type_at(i).unwrap()).collect();
        assert_eq!(types.iter().filter(|t| t.is_key()).count(), p.f_intra / p.f_gop);
        assert_eq!(types.iter().filter(|&&t| t == FrameType::I).count(), 1);
        assert_eq!(p.type_counts(), vec![1, 3, 4, 8]);
    }

    #[test]
    fn rejects_non_dyadic_gop() {
        let r = StreamProfile::new("x", 6, 3, vec![vec![1]; 3], vec![1.0], None, 30.0);
        assert!(r.is_err());
        let r = StreamProfile::new("x", 6, 4, vec![vec![1]; 4], vec![1.0], None, 30.0);
        assert!(r.is_err());
    }

    #[test]
    fn b_frame_references() {
        let p = fig2();
        assert_eq!(p.references(2), vec![0, 4]);
        assert_eq!(p.references(1), vec![0, 2]);
        assert_eq!(p.references(7), vec![6, 8]);
        assert_eq!(p.references(4), vec![0]);
        assert!(p.references(8).is_empty());
    }

    #[test]
    fn decode_order_puts_key_first() {
        let p = fig2();
        let mut pos: Vec<i64> = (1..=8).collect();
        pos.sort_by_key(|&x| p.decode_key(x));
        assert_eq!(pos, vec![4, 2, 1, 3, 8, 6, 5, 7]);
    }

    #[test]
    fn foreman_rd_points() {
        let p = StreamProfile::bundled("foreman").unwrap();
        assert_eq!(p.rd_distortion(FrameType::I, 6712.0 * 8.0), 16.27);
        assert_eq!(p.rd_distortion(FrameType::I, (6712.0 + 8302.0 + 5844.0) * 8.0), 4.124);
        assert_eq!(p.rd_distortion(FrameType::I, 0.0), p.d_loss);
        assert_eq!(p.d_loss, 4.0 * 16.27);
        // right-continuity at a knot
        let knot = (6712.0 + 8302.0) * 8.0;
        assert_eq!(p.rd_distortion(FrameType::I, knot), 5.491);
        assert_eq!(p.rd_distortion(FrameType::I, knot - 1e-6), 16.27);
    }

    #[test]
    fn single_segment_midpoint() {
        let e = PiecewiseLinearEnvelope::lower_hull(&[(0.0, 100.0), (1000.0, 10.0)]);
        assert!((e.eval(500.0) - 55.0).abs() < 1e-12);
        assert_eq!(e.eval(5000.0), 10.0);
    }

    /// All-pairs oracle: a point is a hull vertex iff no segment between two
    /// other points passes strictly below it.
    fn brute_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
        points
            .iter()
            .copied()
            .filter(|&p| {
                !points.iter().any(|&a| {
                    points.iter().any(|&b| {
                        a.0 < p.0 && p.0 < b.0 && {
                            let t = (p.0 - a.0) / (b.0 - a.0);
                            a.1 + t * (b.1 - a.1) <= p.1 + 1e-12
                        }
                    })
                })
            })
            .collect()
    }

    #[test]
    fn envelope_matches_brute_force_hull() {
        for name in StreamProfile::BUNDLED {
            let p = StreamProfile::bundled(name).unwrap();
            for k in 0..p.num_frame_types() {
                let ft = FrameType::from_index(k);
                let mut pts = vec![(0.0, p.d_loss)];
                for m in 0..=p.num_layers {
                    pts.push((p.cumulative_size(ft, m + 1) as f64, p.layer_distortions[m]));
                }
                let env = p.convex_envelope(ft);
                assert_eq!(env.knots, brute_hull(&pts), "{name} {ft}");
                let last = *env.knots.last().unwrap();
                assert_eq!(last.1, p.d_full());
            }
        }
    }

    #[test]
    fn envelope_below_step_and_convex() {
        for name in StreamProfile::BUNDLED {
            let p = StreamProfile::bundled(name).unwrap();
            for k in 0..p.num_frame_types() {
                let ft = FrameType::from_index(k);
                let env = p.convex_envelope(ft);
                let total = p.cumulative_size(ft, p.quality_layers()) as f64;
                for i in 0..=2000 {
                    let z = total * 1.2 * i as f64 / 2000.0;
                    assert!(env.eval(z) <= p.rd_distortion(ft, z) + 1e-9);
                }
                let s = env.slopes();
                assert!(s.windows(2).all(|w| w[0] <= w[1] + 1e-15));
                assert!(s.iter().all(|&x| x <= 0.0));
            }
        }
    }

    #[test]
    fn config_roundtrip() {
        let p = StreamProfile::bundled("paris").unwrap();
        let cfg = p.to_config();
        let text = toml::to_string(&cfg).unwrap();
        let back: ProfileConfig = toml::from_str(&text).unwrap();
        assert_eq!(StreamProfile::from_config(&back).unwrap(), p);
    }
}
