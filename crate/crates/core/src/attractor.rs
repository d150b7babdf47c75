//! Absorbing radius, tail estimates, pullback-attractor clouds and their
//! covering numbers.
//!
//! All attractor "sets" are finite point clouds of pullback images
//! `Phi(t, tau - t, theta_{-t} omega, u_j)`.

use thiserror::Error;

use crate::cocycle::{evolve_batch, pullback_images, CocycleError, Representation, Trajectory};
use crate::model::{derive_constants, distance_sq, LatticeVector, ModelError, ProblemSpec};
use crate::noise::{ou_from_wiener, shift_path, NoiseError, OuPath, WienerPath, GRID_TOL};
use crate::seeds::{CounterRng, Stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttractorError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Cocycle(#[from] CocycleError),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("radius integral truncated at S = {s}: remainder bound {remainder:e} exceeds 1% of the integral {integral:e}; increase S")]
    TruncationTooShort { s: f64, remainder: f64, integral: f64 },
    #[error("tail level epsilon = {epsilon} is only reached at the truncation boundary N_lat = {radius}; increase the truncation radius")]
    TruncationTooSmall { epsilon: f64, radius: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Relative slack on `||Phi|| <= R(omega)`.
pub const ABSORPTION_SLACK: f64 = 1e-6;
/// Largest remainder of the truncated radius integral, relative to its value.
pub const MAX_RADIUS_REMAINDER: f64 = 0.01;

/// Pathwise absorbing radius and, when produced by a pullback run, the
/// per-member norms and entry times.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorbingEstimate {
    pub radius: f64,
    pub radius_sq: f64,
    /// `int_{-S}^0 e^{lambda_hat s - 2 z(s) + 2 int_s^0 z} ds`.
    pub integral: f64,
    pub remainder_bound: f64,
    pub integral_truncation: f64,
    pub quadrature_step: f64,
    /// `(t, bound on ||Phi(t, tau - t, theta_{-t} omega, .)||^2)`.
    pub envelope: Vec<(f64, f64)>,
    pub t_list: Vec<f64>,
    /// `norms[k][j]` is member `j` at pullback time `t_list[k]`.
    pub norms: Vec<Vec<f64>>,
    /// First listed time after which member `j` stays inside the ball.
    pub entry_times: Vec<Option<f64>>,
    /// First listed time after which every member stays inside.
    pub t_b: Option<f64>,
}

impl AbsorbingEstimate {
    pub fn inside(&self, norm: f64) -> bool {
        norm <= self.radius * (1.0 + ABSORPTION_SLACK)
    }

    /// Every member inside the ball at the largest pullback time.
    pub fn absorbed_at_end(&self) -> bool {
        self.norms.last().is_some_and(|row| row.iter().all(|&n| self.inside(n)))
    }
}

fn integer_ratio(num: f64, den: f64) -> Option<usize> {
    let x = num / den;
    let k = x.round();
    ((x - k).abs() <= GRID_TOL * x.max(1.0) && k >= 0.0).then_some(k as usize)
}

/// Integrand of the radius formula tabulated on `s_j = -j dq`.
struct RadiusQuadrature {
    dq: f64,
    /// `int_{s_j}^0 z`.
    inner: Vec<f64>,
    /// `int_{s_j}^0 e^{lambda_hat s - 2 z(s) + 2 int_s^0 z} ds`.
    outer: Vec<f64>,
}

impl RadiusQuadrature {
    fn new(ou: &OuPath, lambda_hat: f64, span: f64, dq: f64) -> Result<Self, AttractorError> {
        let noise_dt = ou.grid().dt();
        if integer_ratio(dq, noise_dt).is_none_or(|m| m == 0) {
            return Err(AttractorError::Invalid(format!(
                "quadrature step {dq} must be a positive multiple of the noise step {noise_dt}"
            )));
        }
        let nodes = integer_ratio(span, dq)
            .ok_or_else(|| AttractorError::Invalid(format!("S = {span} is not a multiple of dq = {dq}")))?;
        let z = (0..=nodes)
            .map(|j| ou.node(-(j as f64) * dq))
            .collect::<Result<Vec<_>, _>>()?;
        let mut inner = vec![0.0; nodes + 1];
        for j in 1..=nodes {
            inner[j] = inner[j - 1] + 0.5 * dq * (z[j] + z[j - 1]);
        }
        let h: Vec<f64> = (0..=nodes)
            .map(|j| (-lambda_hat * j as f64 * dq - 2.0 * z[j] + 2.0 * inner[j]).exp())
            .collect();
        let mut outer = vec![0.0; nodes + 1];
        for j in 1..=nodes {
            outer[j] = outer[j - 1] + 0.5 * dq * (h[j] + h[j - 1]);
        }
        Ok(Self { dq, inner, outer })
    }

    fn index(&self, t: f64) -> Result<usize, AttractorError> {
        integer_ratio(t, self.dq)
            .filter(|&j| j < self.outer.len())
            .ok_or_else(|| AttractorError::Invalid(format!("time {t} is not a quadrature node")))
    }
}

/// `R^2(omega) = 1 + (2|||alpha|||^2 + |||g|||^2 / lambda_0) int_{-inf}^0 ...`,
/// with the outer integral truncated at `-S`.
///
/// The neglected part is bounded by `e^{-lambda_hat S + 2 int_{-S}^0 z + 2 Z} / lambda_tilde`
/// with `Z = sup |z|` over `[-S, 0]`.
pub fn absorbing_radius(spec: &ProblemSpec, ou: &OuPath, s: f64, dq: f64) -> Result<AbsorbingEstimate, AttractorError> {
    let consts = derive_constants(spec)?;
    if s.is_nan() || s <= 0.0 {
        return Err(AttractorError::Invalid(format!("S must be positive, got {s}")));
    }
    let weight = consts.forcing_weight(spec.coefficients.lambda0);
    let quad = RadiusQuadrature::new(ou, consts.lambda_hat, s, dq)?;
    let last = quad.outer.len() - 1;
    let integral = quad.outer[last];
    let z_sup = ou.sup_abs(-s, 0.0)?;
    let remainder_bound =
        (-consts.lambda_hat * s + 2.0 * quad.inner[last] + 2.0 * z_sup).exp() / consts.lambda_tilde;
    if weight > 0.0 && remainder_bound > MAX_RADIUS_REMAINDER * integral {
        return Err(AttractorError::TruncationTooShort {
            s,
            remainder: remainder_bound,
            integral,
        });
    }
    let radius_sq = 1.0 + weight * integral;
    Ok(AbsorbingEstimate {
        radius: radius_sq.sqrt(),
        radius_sq,
        integral,
        remainder_bound,
        integral_truncation: s,
        quadrature_step: dq,
        envelope: Vec::new(),
        t_list: Vec::new(),
        norms: Vec::new(),
        entry_times: Vec::new(),
        t_b: None,
    })
}

/// Finite family of initial states, tagged with the exponential growth rate
/// its norms are allowed under pullback.
#[derive(Debug, Clone)]
pub struct InitialFamily {
    pub members: Vec<LatticeVector>,
    pub growth_rate: f64,
}

fn random_direction(rng: &mut CounterRng, radius: usize) -> LatticeVector {
    let n = 2 * radius + 1;
    let mut values = Vec::with_capacity(n + 1);
    while values.len() < n {
        let (a, b) = rng.normal_pair();
        values.push(a);
        values.push(b);
    }
    values.truncate(n);
    let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
    LatticeVector::from_fn(radius, |i| values[(i + radius as i64) as usize] / norm)
}

impl InitialFamily {
    /// `size` members in uniformly random directions with norms
    /// `max_norm (j+1)/size`, so the largest member sits on the sphere.
    pub fn bounded(seed: u64, size: usize, max_norm: f64, radius: usize) -> Self {
        let members = (0..size)
            .map(|j| {
                let mut rng = CounterRng::new(seed, Stream::Ensemble, j as i64, 1 << 12);
                random_direction(&mut rng, radius).scaled(max_norm * (j + 1) as f64 / size as f64)
            })
            .collect();
        Self {
            members,
            growth_rate: 0.0,
        }
    }

    /// Uniform random directions with radii uniform in `[0, ball_radius]`;
    /// member 0 lies on the sphere.
    pub fn ball(seed: u64, size: usize, ball_radius: f64, radius: usize) -> Self {
        let members = (0..size)
            .map(|j| {
                let mut rng = CounterRng::new(seed, Stream::Ensemble, j as i64, 1 << 12);
                let dir = random_direction(&mut rng, radius);
                let r = if j == 0 { 1.0 } else { rng.unit() };
                dir.scaled(ball_radius * r)
            })
            .collect();
        Self {
            members,
            growth_rate: 0.0,
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.members.iter().map(LatticeVector::norm).fold(0.0, f64::max)
    }

    /// `e^{-gamma t} sup ||D||^2 -> 0`; finite families are bounded, so this
    /// holds for any non-negative tag.
    pub fn is_tempered(&self) -> bool {
        self.growth_rate >= 0.0 && self.max_norm().is_finite()
    }
}

/// Pullback images of `family` at every time in `t_list`, compared against
/// the absorbing radius of the same path.
pub fn pullback_absorption_test(
    spec: &ProblemSpec,
    ou: &OuPath,
    tau: f64,
    t_list: &[f64],
    family: &InitialFamily,
    dt_ode: f64,
    s: f64,
) -> Result<AbsorbingEstimate, AttractorError> {
    check_times(t_list)?;
    if !family.is_tempered() {
        return Err(AttractorError::Invalid("initial family is not tempered".into()));
    }
    let dq = ou.grid().dt();
    let mut est = absorbing_radius(spec, ou, s, dq)?;
    let consts = derive_constants(spec)?;
    let weight = consts.forcing_weight(spec.coefficients.lambda0);
    let t_max = t_list.last().copied().unwrap_or(0.0);
    let quad = RadiusQuadrature::new(ou, consts.lambda_hat, t_max.max(dq), dq)?;
    let start_sq = family.max_norm().powi(2);

    for &t in t_list {
        let j = quad.index(t)?;
        let bound = (-consts.lambda_hat * t + 2.0 * quad.inner[j]).exp() * start_sq + weight * quad.outer[j];
        est.envelope.push((t, bound));
        let images = pullback_images(spec, ou, tau, t, &family.members, dt_ode)?;
        est.norms.push(images.iter().map(LatticeVector::norm).collect());
    }
    est.t_list = t_list.to_vec();

    let members = family.members.len();
    est.entry_times = (0..members)
        .map(|m| {
            let mut entry = None;
            for (k, row) in est.norms.iter().enumerate().rev() {
                if !est.inside(row[m]) {
                    break;
                }
                entry = Some(t_list[k]);
            }
            entry
        })
        .collect();
    est.t_b = if est.entry_times.iter().all(Option::is_some) {
        est.entry_times.iter().flatten().copied().reduce(f64::max)
    } else {
        None
    };
    Ok(est)
}

fn check_times(t_list: &[f64]) -> Result<(), AttractorError> {
    if t_list.is_empty() || t_list.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(AttractorError::Invalid("t_list must be non-empty and non-negative".into()));
    }
    if t_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AttractorError::Invalid("t_list must be strictly increasing".into()));
    }
    Ok(())
}

/// Outcome of comparing `||v||^2` with the scalar Gronwall envelopes.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeCheck {
    /// `max (||v||^2 - E) / E` for `E' = (-lambda_0 + 2 beta + 2z) E + c e^{-2z}`.
    pub max_violation: f64,
    /// Same with decay rate `lambda_hat = lambda_0 - beta`.
    pub max_violation_lambda_hat: f64,
    pub envelope: Vec<f64>,
}

pub fn gronwall_envelope_check(
    trajectory: &Trajectory,
    spec: &ProblemSpec,
    ou: &OuPath,
) -> Result<EnvelopeCheck, AttractorError> {
    if trajectory.representation != Representation::Transformed {
        return Err(AttractorError::Invalid(
            "envelope check needs a trajectory of the conjugated state".into(),
        ));
    }
    let consts = derive_constants(spec)?;
    let lambda0 = spec.coefficients.lambda0;
    let weight = consts.forcing_weight(lambda0);
    let beta = spec.nonlinearity.beta;
    let h = trajectory.step;

    let run = |decay: f64| -> Result<Vec<f64>, AttractorError> {
        let rhs = |r: f64, e: f64| -> Result<f64, NoiseError> {
            let z = ou.z_at(r)?;
            Ok((-decay + 2.0 * z) * e + weight * (-2.0 * z).exp())
        };
        let mut e = trajectory.states[0].norm_sq();
        let mut out = Vec::with_capacity(trajectory.states.len());
        out.push(e);
        for k in 0..trajectory.states.len() - 1 {
            let r = trajectory.noise_time(k);
            let k1 = rhs(r, e)?;
            let k2 = rhs(r + 0.5 * h, e + 0.5 * h * k1)?;
            let k3 = rhs(r + 0.5 * h, e + 0.5 * h * k2)?;
            let k4 = rhs(r + h, e + h * k3)?;
            e += h / 6.0 * (k1 + 2.0 * (k2 + k3) + k4);
            out.push(e);
        }
        Ok(out)
    };
    let violation = |env: &[f64]| {
        trajectory
            .states
            .iter()
            .zip(env)
            .map(|(s, &e)| (s.norm_sq() - e) / e.max(f64::MIN_POSITIVE))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let envelope = run(lambda0 - 2.0 * beta)?;
    let hat = run(consts.lambda_hat)?;
    Ok(EnvelopeCheck {
        max_violation: violation(&envelope),
        max_violation_lambda_hat: violation(&hat),
        envelope,
    })
}

/// Smooth step: 0 on `[0, 1]`, `q(s - 1)` with `q(x) = x^2 (3 - 2x)` on
/// `(1, 2)`, 1 from 2 on.
pub fn rho(s: f64) -> f64 {
    if s <= 1.0 {
        0.0
    } else if s >= 2.0 {
        1.0
    } else {
        let x = s - 1.0;
        x * x * (3.0 - 2.0 * x)
    }
}

/// `sup |rho'| = q'(1/2)`.
pub const RHO_LIPSCHITZ: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct TailProfile {
    pub cutoff: usize,
    /// `rho(|i| / N)` for `i = -N_lat..=N_lat`.
    pub weights: Vec<f64>,
    pub c0: f64,
    /// `2N <= N_lat`, so the weight reaches 1 inside the window.
    pub within_window: bool,
}

pub fn cutoff_weights(cutoff: usize, radius: usize) -> TailProfile {
    let n = cutoff.max(1) as f64;
    let r = radius as i64;
    let within_window = cutoff >= 1 && 2 * cutoff <= radius;
    if !within_window {
        log::warn!("cut-off N = {cutoff} with N_lat = {radius}: weight does not reach 1 inside the window");
    }
    TailProfile {
        cutoff,
        weights: (-r..=r).map(|i| rho(i.unsigned_abs() as f64 / n)).collect(),
        c0: RHO_LIPSCHITZ,
        within_window,
    }
}

/// Smallest `N` with `sum_{|i| > N} |v_i|^2 <= eps^2` for every member.
pub fn tail_index(cloud: &[LatticeVector], epsilon: f64) -> usize {
    let radius = cloud.iter().map(LatticeVector::radius).max().unwrap_or(0);
    let target = epsilon * epsilon;
    (0..=radius)
        .find(|&n| cloud.iter().all(|v| v.tail_mass(n) <= target))
        .unwrap_or(radius)
}

fn weighted_mass(v: &LatticeVector, profile: &TailProfile) -> f64 {
    v.values().iter().zip(&profile.weights).map(|(x, w)| w * x * x).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailRow {
    pub epsilon: f64,
    pub i0: usize,
    /// Largest member tail mass beyond `i0`.
    pub tail_mass: f64,
    /// Smallest cut-off with `max sum rho(|i|/N) |v_i|^2 <= eps^2`.
    pub weighted_cutoff: usize,
    pub weighted_mass: f64,
    /// `max sum_{|i| >= 2N} |v_i|^2` at the weighted cut-off.
    pub sharp_mass: f64,
    /// `sum_{|i| >= 2N} |v_i|^2 <= sum rho |v_i|^2 <= eps^2` for every member.
    pub weighted_bound_holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    pub rows: Vec<TailRow>,
    /// Least-squares slope of `I_0` against `log2(1/eps)`.
    pub slope: f64,
}

impl TailReport {
    /// `I_0` non-increasing in `eps`.
    pub fn monotone(&self) -> bool {
        let mut rows: Vec<&TailRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
        rows.windows(2).all(|w| w[1].i0 <= w[0].i0)
    }

    pub fn weighted_bound_holds(&self) -> bool {
        self.rows.iter().all(|r| r.weighted_bound_holds)
    }
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Tail indices and cut-off bounds of a cloud for each level in `epsilons`.
pub fn tail_report(cloud: &[LatticeVector], epsilons: &[f64]) -> Result<TailReport, AttractorError> {
    let first = cloud.first().ok_or(AttractorError::EmptyCloud)?;
    let radius = first.radius();
    let mut rows = Vec::with_capacity(epsilons.len());
    for &epsilon in epsilons {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(AttractorError::Invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        let target = epsilon * epsilon;
        let i0 = tail_index(cloud, epsilon);
        let tail_mass = cloud.iter().map(|v| v.tail_mass(i0)).fold(0.0, f64::max);
        if radius > 0 && i0 >= radius && cloud.iter().any(|v| v.norm_sq() > target) {
            return Err(AttractorError::TruncationTooSmall { epsilon, radius });
        }
        let (weighted_cutoff, profile) = (1..=radius.max(1))
            .map(|n| (n, cutoff_weights_quiet(n, radius)))
            .find(|(_, p)| cloud.iter().all(|v| weighted_mass(v, p) <= target))
            .unwrap_or_else(|| (radius.max(1), cutoff_weights_quiet(radius.max(1), radius)));
        let mut weighted_max: f64 = 0.0;
        let mut sharp_max: f64 = 0.0;
        let mut holds = true;
        for v in cloud {
            let w = weighted_mass(v, &profile);
            let sharp = v.tail_mass((2 * weighted_cutoff).saturating_sub(1));
            holds &= sharp <= w && w <= target;
            weighted_max = weighted_max.max(w);
            sharp_max = sharp_max.max(sharp);
        }
        rows.push(TailRow {
            epsilon,
            i0,
            tail_mass,
            weighted_cutoff,
            weighted_mass: weighted_max,
            sharp_mass: sharp_max,
            weighted_bound_holds: holds,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| (1.0 / r.epsilon).log2()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.i0 as f64).collect();
    let slope = if rows.len() >= 2 { least_squares_slope(&xs, &ys) } else { f64::NAN };
    Ok(TailReport { rows, slope })
}

fn cutoff_weights_quiet(cutoff: usize, radius: usize) -> TailProfile {
    let n = cutoff as f64;
    let r = radius as i64;
    TailProfile {
        cutoff,
        weights: (-r..=r).map(|i| rho(i.unsigned_abs() as f64 / n)).collect(),
        c0: RHO_LIPSCHITZ,
        within_window: 2 * cutoff <= radius,
    }
}

/// Pulls `family` back over time `t` and measures its tails at `(tau, omega)`.
#[allow(clippy::too_many_arguments)]
pub fn tail_decay_test(
    spec: &ProblemSpec,
    ou: &OuPath,
    tau: f64,
    t: f64,
    epsilons: &[f64],
    family: &InitialFamily,
    dt_ode: f64,
) -> Result<TailReport, AttractorError> {
    let images = pullback_images(spec, ou, tau, t, &family.members, dt_ode)?;
    tail_report(&images, epsilons)
}

/// Pullback clouds at increasing times and the gaps between them.
#[derive(Debug, Clone)]
pub struct AttractorEstimate {
    pub tau: f64,
    pub t_list: Vec<f64>,
    pub clouds: Vec<Vec<LatticeVector>>,
    /// `cauchy_gaps[k]` is the Hausdorff distance between clouds `k` and `k+1`.
    pub cauchy_gaps: Vec<f64>,
    /// Pullback time at which two consecutive gaps fell below `tol`.
    pub converged_at: Option<f64>,
    pub final_cloud: Vec<LatticeVector>,
}

impl AttractorEstimate {
    pub fn final_radius(&self) -> f64 {
        self.final_cloud.iter().map(LatticeVector::norm).fold(0.0, f64::max)
    }

    /// Each gap at most `1 + jitter` times the previous one, ignoring gaps
    /// already below `floor`.
    pub fn gaps_decrease(&self, jitter: f64, floor: f64) -> bool {
        self.cauchy_gaps
            .windows(2)
            .all(|w| w[1] <= floor || w[1] <= (1.0 + jitter) * w[0])
    }
}

pub fn pullback_attractor_sample(
    spec: &ProblemSpec,
    ou: &OuPath,
    tau: f64,
    t_list: &[f64],
    family: &InitialFamily,
    dt_ode: f64,
    tol: f64,
) -> Result<AttractorEstimate, AttractorError> {
    check_times(t_list)?;
    if family.members.is_empty() {
        return Err(AttractorError::EmptyCloud);
    }
    let clouds = t_list
        .iter()
        .map(|&t| pullback_images(spec, ou, tau, t, &family.members, dt_ode))
        .collect::<Result<Vec<_>, _>>()?;
    let cauchy_gaps = clouds
        .windows(2)
        .map(|w| hausdorff_distance(&w[0], &w[1]))
        .collect::<Result<Vec<_>, _>>()?;
    let converged_at = cauchy_gaps
        .windows(2)
        .position(|w| w[0] < tol && w[1] < tol)
        .map(|k| t_list[k + 2]);
    let final_cloud = clouds.last().cloned().unwrap_or_default();
    Ok(AttractorEstimate {
        tau,
        t_list: t_list.to_vec(),
        clouds,
        cauchy_gaps,
        converged_at,
        final_cloud,
    })
}

/// Semidistance from `Phi(delta, tau, omega, A(tau, omega))` to the cloud
/// sampled directly at `(tau + delta, theta_delta omega)` from the same family
/// and pullback times as `here`.
pub fn invariance_gap(
    spec: &ProblemSpec,
    path: &WienerPath,
    here: &AttractorEstimate,
    delta: f64,
    family: &InitialFamily,
    dt_ode: f64,
) -> Result<f64, AttractorError> {
    let ou = ou_from_wiener(path);
    let pushed = evolve_batch(spec, &ou, (here.tau, 0.0), delta, &here.final_cloud, dt_ode)?;
    let shifted = ou_from_wiener(&shift_path(path, delta)?);
    let t = here.t_list.last().copied().unwrap_or(0.0);
    let there = pullback_images(spec, &shifted, here.tau + delta, t, &family.members, dt_ode)?;
    hausdorff_semidistance(&pushed, &there)
}

/// `sup_{a in A} inf_{b in B} ||a - b||`.
pub fn hausdorff_semidistance(a: &[LatticeVector], b: &[LatticeVector]) -> Result<f64, AttractorError> {
    if a.is_empty() || b.is_empty() {
        return Err(AttractorError::EmptyCloud);
    }
    let mut worst_sq: f64 = 0.0;
    for x in a {
        let mut best = f64::INFINITY;
        for y in b {
            best = best.min(distance_sq(x.values(), y.values()));
            if best <= worst_sq {
                break;
            }
        }
        worst_sq = worst_sq.max(best);
    }
    Ok(worst_sq.sqrt())
}

/// Symmetric Hausdorff distance.
pub fn hausdorff_distance(a: &[LatticeVector], b: &[LatticeVector]) -> Result<f64, AttractorError> {
    Ok(hausdorff_semidistance(a, b)?.max(hausdorff_semidistance(b, a)?))
}

/// Greedy farthest-point covering of `cloud` by `epsilon`-balls centred at
/// cloud points. The first center is point 0; ties go to the lowest index.
pub fn covering_number(cloud: &[LatticeVector], epsilon: f64) -> usize {
    if cloud.is_empty() {
        return 0;
    }
    let target = epsilon * epsilon;
    let mut gap = vec![f64::INFINITY; cloud.len()];
    let mut center = 0;
    let mut count = 0;
    loop {
        count += 1;
        for (g, x) in gap.iter_mut().zip(cloud) {
            *g = g.min(distance_sq(x.values(), cloud[center].values()));
        }
        let (far, &worst) = gap
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |acc, (j, g)| if *g > *acc.1 { (j, g) } else { acc });
        if worst <= target {
            return count;
        }
        center = far;
    }
}

/// `(2 I_0 + 1) ln(floor(2 r_0 sqrt(2 I_0 + 1) / eps) + 1)`.
pub fn entropy_bound(i0: usize, r0: f64, epsilon: f64) -> f64 {
    let dim = (2 * i0 + 1) as f64;
    dim * ((2.0 * r0 * dim.sqrt() / epsilon).floor() + 1.0).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyRow {
    pub epsilon: f64,
    /// Tail index at `epsilon / 2`.
    pub i0: usize,
    pub r0: f64,
    pub n_eps: usize,
    /// Bound evaluated at `epsilon / 2`.
    pub bound: f64,
}

impl EntropyRow {
    pub fn holds(&self) -> bool {
        (self.n_eps as f64).ln() <= self.bound
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport {
    pub rows: Vec<EntropyRow>,
}

impl EntropyReport {
    pub fn holds(&self) -> bool {
        self.rows.iter().all(EntropyRow::holds)
    }
}

/// Compares `ln n_eps` of the cloud with the entropy bound at `eps / 2`, using
/// the cloud's own tail index and largest norm.
pub fn entropy_report(cloud: &[LatticeVector], epsilons: &[f64]) -> Result<EntropyReport, AttractorError> {
    if cloud.is_empty() {
        return Err(AttractorError::EmptyCloud);
    }
    let r0 = cloud.iter().map(LatticeVector::norm).fold(0.0, f64::max);
    let rows = epsilons
        .iter()
        .map(|&epsilon| {
            let half = 0.5 * epsilon;
            let i0 = tail_index(cloud, half);
            EntropyRow {
                epsilon,
                i0,
                r0,
                n_eps: covering_number(cloud, epsilon),
                bound: entropy_bound(i0, r0, half),
            }
        })
        .collect();
    Ok(EntropyReport { rows })
}

/// `e^{-gamma t} R^2(theta_{-t} omega)` for each `t` and `gamma`.
pub fn radius_temperedness(
    spec: &ProblemSpec,
    path: &WienerPath,
    s: f64,
    dq: f64,
    times: &[f64],
    gammas: &[f64],
) -> Result<Vec<(f64, f64, f64)>, AttractorError> {
    let mut out = Vec::with_capacity(times.len() * gammas.len());
    for &t in times {
        let ou = ou_from_wiener(&shift_path(path, -t)?);
        let r_sq = absorbing_radius(spec, &ou, s, dq)?.radius_sq;
        for &gamma in gammas {
            out.push((t, gamma, (-gamma * t).exp() * r_sq));
        }
    }
    Ok(out)
}
