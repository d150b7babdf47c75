//! Two-sided Wiener paths on a uniform grid, the noise shift, and the
//! stationary Ornstein-Uhlenbeck process `dz + z dt = dw` driven by the same
//! increments.
//!
//! Each grid interval `[t_k, t_{k+1}]` carries the pair
//! `(w(t_{k+1}) - w(t_k), int_{t_k}^{t_{k+1}} e^{-(t_{k+1}-s)} dw(s))`, drawn
//! from its exact joint Gaussian law with a counter keyed by `(seed, k)`.
//! The Ornstein-Uhlenbeck values then follow from the exact recursion
//! `z_{k+1} = e^{-dt} z_k + I_k`, so `w` and `z` are pathwise consistent.

use rayon::prelude::*;
use thiserror::Error;

use crate::seeds::{sub_seed, CounterRng, Stream, NORMAL_PAIR_WORDS};

/// Relative tolerance for "lies on the grid".
pub const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("time {t} is not a multiple of the grid step {dt}")]
    OffGrid { t: f64, dt: f64 },
    #[error("time {t} outside path window [{t_min}, {t_max}]; regenerate with a window covering {required_min}..{required_max}")]
    Window {
        t: f64,
        t_min: f64,
        t_max: f64,
        required_min: f64,
        required_max: f64,
    },
}

/// Uniform grid `t_k = k dt`, `k_min <= k <= k_max`, always containing 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    k_min: i64,
    k_max: i64,
}

fn grid_index(t: f64, dt: f64) -> Result<i64, NoiseError> {
    let x = t / dt;
    let k = x.round();
    if (x - k).abs() > GRID_TOL * x.abs().max(1.0) || !k.is_finite() {
        return Err(NoiseError::OffGrid { t, dt });
    }
    Ok(k as i64)
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, dt: f64) -> Result<Self, NoiseError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(NoiseError::Grid(format!("dt must be positive, got {dt}")));
        }
        if !(t_min.is_finite() && t_max.is_finite()) || !(t_min < 0.0 && 0.0 <= t_max) {
            return Err(NoiseError::Grid(format!(
                "window must satisfy t_min < 0 <= t_max, got [{t_min}, {t_max}]"
            )));
        }
        let k_min = grid_index(t_min, dt)?;
        let k_max = grid_index(t_max, dt)?;
        Ok(Self { dt, k_min, k_max })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn k_min(&self) -> i64 {
        self.k_min
    }

    pub fn k_max(&self) -> i64 {
        self.k_max
    }

    pub fn t_min(&self) -> f64 {
        self.time(self.k_min)
    }

    pub fn t_max(&self) -> f64 {
        self.time(self.k_max)
    }

    pub fn len(&self) -> usize {
        (self.k_max - self.k_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: i64) -> f64 {
        k as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (self.k_min..=self.k_max).map(|k| self.time(k))
    }

    /// Grid index of `t`, which must be a node inside the window.
    pub fn index_of(&self, t: f64) -> Result<i64, NoiseError> {
        let k = grid_index(t, self.dt)?;
        if k < self.k_min || k > self.k_max {
            return Err(self.window_error(t));
        }
        Ok(k)
    }

    /// Fractional position of `t` relative to `k_min`, or a window error.
    fn position(&self, t: f64) -> Result<f64, NoiseError> {
        let mut x = t / self.dt;
        let k = x.round();
        if (x - k).abs() <= GRID_TOL * x.abs().max(1.0) {
            x = k;
        }
        if x < self.k_min as f64 || x > self.k_max as f64 {
            return Err(self.window_error(t));
        }
        Ok(x - self.k_min as f64)
    }

    fn window_error(&self, t: f64) -> NoiseError {
        NoiseError::Window {
            t,
            t_min: self.t_min(),
            t_max: self.t_max(),
            required_min: self.t_min().min(t),
            required_max: self.t_max().max(t),
        }
    }

    fn shifted(&self, m: i64) -> Self {
        Self {
            dt: self.dt,
            k_min: self.k_min - m,
            k_max: self.k_max - m,
        }
    }

    pub fn covers(&self, t_lo: f64, t_hi: f64) -> bool {
        let eps = GRID_TOL * self.dt;
        self.t_min() <= t_lo + eps && t_hi - eps <= self.t_max()
    }
}

/// Discretized two-sided Brownian path with `w(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    seed: u64,
    grid: TimeGrid,
    values: Vec<f64>,
    /// `I_k` for interval `[t_k, t_{k+1}]`, stored from `k_min`.
    ou_increments: Vec<f64>,
    /// `z(t_min)`.
    z_left: f64,
}

/// Stationary Ornstein-Uhlenbeck functional `z(theta_t omega)` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OuPath {
    grid: TimeGrid,
    z_values: Vec<f64>,
    increments: Vec<f64>,
    left_init: f64,
}

/// Exact joint law of `(dw, I)` over one step of length `dt`.
#[derive(Debug, Clone, Copy)]
struct IncrementLaw {
    sd_w: f64,
    /// `Cov(dw, I) / sd_w`.
    loading: f64,
    /// Conditional standard deviation of `I` given `dw`.
    sd_resid: f64,
}

impl IncrementLaw {
    fn new(dt: f64) -> Self {
        let var_i = -(-2.0 * dt).exp_m1() / 2.0;
        let cov = -(-dt).exp_m1();
        let loading = cov / dt.sqrt();
        let resid = (var_i - loading * loading).max(0.0);
        Self {
            sd_w: dt.sqrt(),
            loading,
            sd_resid: resid.sqrt(),
        }
    }

    fn draw(&self, rng: &mut CounterRng) -> (f64, f64) {
        let (a, b) = rng.normal_pair();
        (self.sd_w * a, self.loading * a + self.sd_resid * b)
    }
}

/// Stationary standard deviation of `z`.
pub const STATIONARY_SD: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Samples the path on `[t_min, t_max]` with step `dt`.
pub fn sample_wiener(seed: u64, t_min: f64, t_max: f64, dt: f64) -> Result<WienerPath, NoiseError> {
    let grid = TimeGrid::new(t_min, t_max, dt)?;
    let law = IncrementLaw::new(dt);
    let steps = grid.len() - 1;
    let mut dw = Vec::with_capacity(steps);
    let mut ou_increments = Vec::with_capacity(steps);
    let mut rng = CounterRng::new(seed, Stream::Increments, grid.k_min, NORMAL_PAIR_WORDS);
    for _ in 0..steps {
        let (a, b) = law.draw(&mut rng);
        dw.push(a);
        ou_increments.push(b);
    }

    let zero = (-grid.k_min) as usize;
    let mut values = vec![0.0; grid.len()];
    for p in zero..steps {
        values[p + 1] = values[p] + dw[p];
    }
    for p in (0..zero).rev() {
        values[p] = values[p + 1] - dw[p];
    }

    let mut left = CounterRng::new(seed, Stream::LeftInit, grid.k_min, NORMAL_PAIR_WORDS);
    let z_left = STATIONARY_SD * left.normal_pair().0;
    Ok(WienerPath {
        seed,
        grid,
        values,
        ou_increments,
        z_left,
    })
}

impl WienerPath {
    /// Path with all increments zero and `z(t_min) = 0`.
    pub fn degenerate(grid: TimeGrid) -> Self {
        Self {
            seed: 0,
            grid,
            values: vec![0.0; grid.len()],
            ou_increments: vec![0.0; grid.len() - 1],
            z_left: 0.0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn ou_increments(&self) -> &[f64] {
        &self.ou_increments
    }

    pub fn z_left(&self) -> f64 {
        self.z_left
    }

    /// `w(t)` at a grid node.
    pub fn value_at(&self, t: f64) -> Result<f64, NoiseError> {
        let k = self.grid.index_of(t)?;
        Ok(self.values[(k - self.grid.k_min) as usize])
    }
}

/// `theta_s omega = omega(. + s) - omega(s)` on the translated window.
///
/// The Ornstein-Uhlenbeck data travel with the increments, so the shifted
/// process satisfies `z_{theta_s omega}(r) = z_omega(r + s)` exactly.
pub fn shift_path(path: &WienerPath, s: f64) -> Result<WienerPath, NoiseError> {
    let m = path.grid.index_of(s)?;
    if m == 0 {
        return Ok(path.clone());
    }
    let base = path.values[(m - path.grid.k_min) as usize];
    let grid = path.grid.shifted(m);
    if !(grid.k_min < 0 && grid.k_max >= 0) {
        return Err(path.grid.window_error(s));
    }
    Ok(WienerPath {
        seed: path.seed,
        grid,
        values: path.values.iter().map(|w| w - base).collect(),
        ou_increments: path.ou_increments.clone(),
        z_left: path.z_left,
    })
}

/// One step of the exact Ornstein-Uhlenbeck recursion.
#[inline]
pub fn ou_step(decay: f64, z: f64, increment: f64) -> f64 {
    decay * z + increment
}

pub fn ou_from_wiener(path: &WienerPath) -> OuPath {
    let decay = (-path.grid.dt).exp();
    let mut z_values = Vec::with_capacity(path.grid.len());
    let mut z = path.z_left;
    z_values.push(z);
    for &inc in &path.ou_increments {
        z = ou_step(decay, z, inc);
        z_values.push(z);
    }
    OuPath {
        grid: path.grid,
        z_values,
        increments: path.ou_increments.clone(),
        left_init: path.z_left,
    }
}

impl OuPath {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn z_values(&self) -> &[f64] {
        &self.z_values
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn left_init(&self) -> f64 {
        self.left_init
    }

    /// `z` at a grid node.
    pub fn node(&self, t: f64) -> Result<f64, NoiseError> {
        let k = self.grid.index_of(t)?;
        Ok(self.z_values[(k - self.grid.k_min) as usize])
    }

    /// `z(t)`, linearly interpolated between nodes.
    pub fn z_at(&self, t: f64) -> Result<f64, NoiseError> {
        let x = self.grid.position(t)?;
        let p = x.floor() as usize;
        let frac = x - p as f64;
        if frac == 0.0 || p + 1 >= self.z_values.len() {
            return Ok(self.z_values[p.min(self.z_values.len() - 1)]);
        }
        Ok(self.z_values[p] + frac * (self.z_values[p + 1] - self.z_values[p]))
    }

    /// Largest `|z|` over grid nodes in `[t_lo, t_hi]`.
    pub fn sup_abs(&self, t_lo: f64, t_hi: f64) -> Result<f64, NoiseError> {
        let a = self.grid.index_of(t_lo)? - self.grid.k_min;
        let b = self.grid.index_of(t_hi)? - self.grid.k_min;
        Ok(self.z_values[a as usize..=b as usize]
            .iter()
            .fold(0.0, |m, z| m.max(z.abs())))
    }

    /// Trapezoid rule for `int_a^b h(z(s)) ds` over grid nodes, `a <= b`.
    pub fn integrate(&self, a: f64, b: f64, h: impl Fn(f64) -> f64) -> Result<f64, NoiseError> {
        let ia = (self.grid.index_of(a)? - self.grid.k_min) as usize;
        let ib = (self.grid.index_of(b)? - self.grid.k_min) as usize;
        if ib <= ia {
            return Ok(0.0);
        }
        let zs = &self.z_values[ia..=ib];
        let interior: f64 = zs[1..zs.len() - 1].iter().map(|&z| h(z)).sum();
        Ok(self.grid.dt * (interior + 0.5 * (h(zs[0]) + h(zs[zs.len() - 1]))))
    }
}

/// Direction of a temperedness horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperednessRow {
    pub horizon: f64,
    pub direction: Direction,
    /// `|z(theta_{+-T} omega)| / T`.
    pub z_ratio: f64,
    /// `(1/T) int z` over `[0, T]` or `[-T, 0]`.
    pub mean_z: f64,
    /// `(1/T) int |z|` over the same interval.
    pub mean_abs_z: f64,
}

pub fn temperedness_report(ou: &OuPath, horizons: &[f64]) -> Result<Vec<TemperednessRow>, NoiseError> {
    let mut rows = Vec::with_capacity(2 * horizons.len());
    for &horizon in horizons {
        if horizon.is_nan() || horizon <= 0.0 {
            return Err(NoiseError::Grid(format!("horizon must be positive, got {horizon}")));
        }
        for direction in [Direction::Forward, Direction::Backward] {
            let (a, b, end) = match direction {
                Direction::Forward => (0.0, horizon, horizon),
                Direction::Backward => (-horizon, 0.0, -horizon),
            };
            rows.push(TemperednessRow {
                horizon,
                direction,
                z_ratio: ou.node(end)?.abs() / horizon,
                mean_z: ou.integrate(a, b, |z| z)? / horizon,
                mean_abs_z: ou.integrate(a, b, f64::abs)? / horizon,
            });
        }
    }
    Ok(rows)
}

/// Sample moments used by the distributional checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub mean_abs: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

pub fn moments(samples: &[f64]) -> Moments {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    Moments {
        count: samples.len(),
        mean,
        variance: m2 * n / (n - 1.0),
        mean_abs: samples.iter().map(|x| x.abs()).sum::<f64>() / n,
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2),
    }
}

/// `z(t_obs)` from `count` independent paths on `[t_min, t_max]`, path `j`
/// seeded with `sub_seed(seed, Split, j)`.
pub fn stationary_ensemble(
    seed: u64,
    count: usize,
    (t_min, t_max): (f64, f64),
    dt: f64,
    t_obs: f64,
) -> Result<Vec<f64>, NoiseError> {
    TimeGrid::new(t_min, t_max, dt)?.index_of(t_obs)?;
    (0..count)
        .into_par_iter()
        .map(|j| {
            let path = sample_wiener(sub_seed(seed, Stream::Split as u64, j as u64), t_min, t_max, dt)?;
            ou_from_wiener(&path).node(t_obs)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_shape_and_origin() {
        let p = sample_wiener(1, -1.0, 1.0, 0.5).unwrap();
        assert_eq!(p.values().len(), 5);
        assert_eq!(p.value_at(0.0).unwrap(), 0.0);
        assert_eq!(p.grid().times().collect::<Vec<_>>(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn invalid_windows_are_rejected() {
        assert!(sample_wiener(1, 0.0, 1.0, 0.1).is_err());
        assert!(sample_wiener(1, -1.0, 1.0, -0.1).is_err());
        assert!(matches!(
            sample_wiener(1, -1.0, 1.0, 0.3),
            Err(NoiseError::OffGrid { .. })
        ));
    }

    #[test]
    fn sampling_is_deterministic_and_extension_stable() {
        let a = sample_wiener(7, -2.0, 3.0, 0.01).unwrap();
        let b = sample_wiener(7, -2.0, 3.0, 0.01).unwrap();
        assert_eq!(a, b);
        // Extending the right end leaves earlier values untouched.
        let c = sample_wiener(7, -2.0, 5.0, 0.01).unwrap();
        assert_eq!(&c.values()[..a.values().len()], a.values());
        assert_eq!(&c.ou_increments()[..a.ou_increments().len()], a.ou_increments());
        // Extending the left end keeps the increments of shared intervals.
        let d = sample_wiener(7, -4.0, 3.0, 0.01).unwrap();
        assert_eq!(&d.ou_increments()[200..], a.ou_increments());
    }

    #[test]
    fn shift_by_zero_is_identity_and_fixes_origin() {
        let p = sample_wiener(3, -5.0, 5.0, 0.01).unwrap();
        assert_eq!(shift_path(&p, 0.0).unwrap(), p);
        for s in [-3.0, -0.01, 0.5, 4.99] {
            let q = shift_path(&p, s).unwrap();
            assert_eq!(q.value_at(0.0).unwrap(), 0.0);
            let back = shift_path(&q, -s).unwrap();
            assert_eq!(back.grid(), p.grid());
            for (a, b) in back.values().iter().zip(p.values()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn shift_outside_window_names_required_extension() {
        let p = sample_wiener(3, -1.0, 1.0, 0.1).unwrap();
        match shift_path(&p, 2.0) {
            Err(NoiseError::Window { required_max, .. }) => assert_eq!(required_max, 2.0),
            other => panic!("expected window error, got {other:?}"),
        }
    }

    #[test]
    fn shifted_ou_matches_original_exactly() {
        let p = sample_wiener(11, -10.0, 10.0, 0.01).unwrap();
        let z = ou_from_wiener(&p);
        let s = 2.5;
        let zs = ou_from_wiener(&shift_path(&p, s).unwrap());
        for r in [-12.5, -3.0, 0.0, 1.27, 7.5] {
            assert_eq!(zs.node(r).unwrap(), z.node(r + s).unwrap());
        }
    }

    #[test]
    fn recursion_replays_exactly() {
        let p = sample_wiener(5, -3.0, 3.0, 0.001).unwrap();
        let ou = ou_from_wiener(&p);
        let decay = (-0.001f64).exp();
        let z = ou.z_values();
        for (k, &inc) in ou.increments().iter().enumerate() {
            assert_eq!(z[k + 1], ou_step(decay, z[k], inc));
            // The stored increment is recovered up to one rounding of z.
            let resid = z[k + 1] - decay * z[k] - inc;
            assert!(resid.abs() <= f64::EPSILON * z[k + 1].abs().max(inc.abs()));
        }
        assert_eq!(ou.left_init(), p.z_left());
    }

    #[test]
    fn null_path_gives_null_process() {
        let grid = TimeGrid::new(-1.0, 1.0, 0.01).unwrap();
        let ou = ou_from_wiener(&WienerPath::degenerate(grid));
        assert!(ou.z_values().iter().all(|&z| z == 0.0));
        let rows = temperedness_report(&ou, &[0.5, 1.0]).unwrap();
        assert_eq!(rows.len(), 4);
        for r in rows {
            assert_eq!((r.z_ratio, r.mean_z, r.mean_abs_z), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn interpolation_hits_nodes_and_midpoints() {
        let p = sample_wiener(2, -1.0, 1.0, 0.1).unwrap();
        let ou = ou_from_wiener(&p);
        let a = ou.node(0.2).unwrap();
        let b = ou.node(0.3).unwrap();
        assert_eq!(ou.z_at(0.2).unwrap(), a);
        assert!((ou.z_at(0.25).unwrap() - 0.5 * (a + b)).abs() < 1e-15);
        assert!(ou.z_at(1.5).is_err());
    }

    #[test]
    fn increment_law_matches_exact_covariances() {
        for dt in [1e-4, 1e-3, 0.1] {
            let law = IncrementLaw::new(dt);
            let var_i = (1.0 - (-2.0 * dt).exp()) / 2.0;
            let got = law.loading * law.loading + law.sd_resid * law.sd_resid;
            assert!((got - var_i).abs() <= 1e-12 * var_i);
            assert!((law.loading * law.sd_w - (1.0 - (-dt).exp())).abs() <= 1e-15);
        }
    }

    #[test]
    fn wiener_variance_at_unit_time() {
        // Var(w(1)) = 1; 10^4 paths give a relative standard error of 1.4%.
        let samples: Vec<f64> = (0..10_000u64)
            .map(|j| sample_wiener(sub_seed(42, 0, j), -0.01, 1.0, 0.01).unwrap().value_at(1.0).unwrap())
            .collect();
        let m = moments(&samples);
        assert!((m.variance - 1.0).abs() < 0.05, "{m:?}");
        assert!(m.mean.abs() < 0.05);
    }

    proptest! {
        #[test]
        fn shift_composition_is_additive(a in -300i64..300, b in -300i64..300, seed in 0u64..50) {
            let p = sample_wiener(seed, -4.0, 4.0, 0.01).unwrap();
            let (sa, sb) = (a as f64 * 0.01, b as f64 * 0.01);
            let ab = shift_path(&shift_path(&p, sa).unwrap(), sb);
            let direct = shift_path(&p, sa + sb);
            if let (Ok(ab), Ok(direct)) = (ab, direct) {
                prop_assert_eq!(ab.grid(), direct.grid());
                for (x, y) in ab.values().iter().zip(direct.values()) {
                    prop_assert!((x - y).abs() <= 1e-12);
                }
                let (za, zd) = (ou_from_wiener(&ab), ou_from_wiener(&direct));
                prop_assert_eq!(za.z_values(), zd.z_values());
            }
        }
    }
}
