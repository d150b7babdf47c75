//! Pathwise solution operators.
//!
//! The conjugated equation `dv/dt = G(v, t, z(theta_t omega))` is a classical
//! ODE once the Ornstein-Uhlenbeck path is fixed and is integrated with RK4.
//! The original Stratonovich equation is integrated with the Heun scheme for
//! cross-validation. Times are tracked on two clocks: the coefficient time
//! `t` at which `nu, lambda, f, g` are evaluated, and the noise time `r` at
//! which `z` is read. For `Phi(t, tau, omega, .)` the noise clock starts at
//! `0` while the coefficient clock starts at `tau`.

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{
    conjugation_factors, drift_original_into, drift_transformed_into, CoefficientSnapshot, LatticeVector,
    ModelError, ProblemSpec,
};
use crate::noise::{ou_from_wiener, shift_path, NoiseError, OuPath, WienerPath, GRID_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CocycleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("invalid step: {0}")]
    Step(String),
    #[error("solution blew up at t = {time}")]
    BlowUp { time: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    /// `v = u e^{-z}`.
    Transformed,
    /// `u`.
    Original,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conjugation {
    /// `u -> v = u e^{-z}`.
    ToTransformed,
    /// `v -> u = v e^{z}`.
    ToOriginal,
}

pub fn transform_state(x: &LatticeVector, z: f64, direction: Conjugation) -> Result<LatticeVector, ModelError> {
    let (e_pos, e_neg) = conjugation_factors(z)?;
    let factor = match direction {
        Conjugation::ToTransformed => e_neg,
        Conjugation::ToOriginal => e_pos,
    };
    let out = x.scaled(factor);
    out.check_finite()?;
    Ok(out)
}

/// Solution sampled on a uniform grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Noise time of the first node; node `k` reads `z` at `noise_start + k dt`.
    pub noise_start: f64,
    pub states: Vec<LatticeVector>,
    /// `z` at each node.
    pub z: Vec<f64>,
    pub representation: Representation,
    pub step: f64,
}

impl Trajectory {
    pub fn last(&self) -> &LatticeVector {
        self.states.last().expect("trajectory has at least its initial state")
    }

    pub fn noise_time(&self, k: usize) -> f64 {
        self.noise_start + k as f64 * self.step
    }
}

fn integer_ratio(num: f64, den: f64) -> Option<usize> {
    let x = num / den;
    let k = x.round();
    ((x - k).abs() <= GRID_TOL * x.max(1.0) && k >= 1.0).then_some(k as usize)
}

/// Number of steps of size `dt` covering `duration`, with `dt` commensurate
/// with the noise grid step.
fn step_count(duration: f64, dt: f64, noise_dt: f64) -> Result<usize, CocycleError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(CocycleError::Step(format!("dt_ode must be positive, got {dt}")));
    }
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(CocycleError::Step(format!("duration must be >= 0, got {duration}")));
    }
    if integer_ratio(dt, noise_dt).is_none() && integer_ratio(noise_dt, dt).is_none() {
        return Err(CocycleError::Step(format!(
            "dt_ode = {dt} is neither a multiple nor a divisor of the noise step {noise_dt}"
        )));
    }
    if duration == 0.0 {
        return Ok(0);
    }
    integer_ratio(duration, dt)
        .ok_or_else(|| CocycleError::Step(format!("duration {duration} is not a multiple of dt_ode = {dt}")))
}

struct Rk4Stage {
    snap: CoefficientSnapshot,
    z: f64,
    e_pos: f64,
    e_neg: f64,
}

impl Rk4Stage {
    fn new(radius: usize) -> Self {
        Self {
            snap: CoefficientSnapshot::empty(radius),
            z: 0.0,
            e_pos: 1.0,
            e_neg: 1.0,
        }
    }

    fn load(&mut self, spec: &ProblemSpec, ou: &OuPath, t: f64, r: f64) -> Result<(), CocycleError> {
        spec.snapshot_into(t, &mut self.snap);
        self.z = ou.z_at(r)?;
        (self.e_pos, self.e_neg) = conjugation_factors(self.z)?;
        Ok(())
    }

    fn drift(&self, spec: &ProblemSpec, v: &[f64], out: &mut [f64]) {
        drift_transformed_into(spec, &self.snap, self.z, self.e_pos, self.e_neg, v, out);
    }
}

/// RK4 on the conjugated equation for a batch of states sharing one clock.
///
/// `observe(k, states)` is called after every completed step `k >= 1`.
fn rk4_batch(
    spec: &ProblemSpec,
    ou: &OuPath,
    (t_start, r_start): (f64, f64),
    steps: usize,
    dt: f64,
    states: &mut [Vec<f64>],
    mut observe: impl FnMut(usize, &[Vec<f64>]),
) -> Result<(), CocycleError> {
    let n = 2 * spec.truncation_radius + 1;
    let mut begin = Rk4Stage::new(spec.truncation_radius);
    let mut mid = Rk4Stage::new(spec.truncation_radius);
    let mut end = Rk4Stage::new(spec.truncation_radius);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    begin.load(spec, ou, t_start, r_start)?;
    for k in 0..steps {
        let t0 = t_start + k as f64 * dt;
        let r0 = r_start + k as f64 * dt;
        mid.load(spec, ou, t0 + 0.5 * dt, r0 + 0.5 * dt)?;
        end.load(spec, ou, t_start + (k + 1) as f64 * dt, r_start + (k + 1) as f64 * dt)?;
        for v in states.iter_mut() {
            begin.drift(spec, v, &mut k1);
            for p in 0..n {
                tmp[p] = v[p] + 0.5 * dt * k1[p];
            }
            mid.drift(spec, &tmp, &mut k2);
            for p in 0..n {
                tmp[p] = v[p] + 0.5 * dt * k2[p];
            }
            mid.drift(spec, &tmp, &mut k3);
            for p in 0..n {
                tmp[p] = v[p] + dt * k3[p];
            }
            end.drift(spec, &tmp, &mut k4);
            let mut acc = 0.0;
            for p in 0..n {
                v[p] += dt / 6.0 * (k1[p] + 2.0 * (k2[p] + k3[p]) + k4[p]);
                acc += v[p];
            }
            if !acc.is_finite() {
                return Err(CocycleError::BlowUp {
                    time: t_start + (k + 1) as f64 * dt,
                });
            }
        }
        std::mem::swap(&mut begin, &mut end);
        observe(k + 1, states);
    }
    Ok(())
}

fn check_state(spec: &ProblemSpec, x: &LatticeVector) -> Result<(), CocycleError> {
    if x.radius() != spec.truncation_radius {
        return Err(ModelError::Length {
            radius: spec.truncation_radius,
            expected: 2 * spec.truncation_radius + 1,
            got: x.len(),
        }
        .into());
    }
    Ok(x.check_finite()?)
}

/// RK4 trajectory of the conjugated equation on `[t_start, t_start + duration]`
/// reading `z` from noise time `r_start` onward.
pub fn integrate_clocked(
    spec: &ProblemSpec,
    ou: &OuPath,
    (t_start, r_start): (f64, f64),
    duration: f64,
    v0: &LatticeVector,
    dt_ode: f64,
) -> Result<Trajectory, CocycleError> {
    check_state(spec, v0)?;
    let steps = step_count(duration, dt_ode, ou.grid().dt())?;
    let radius = spec.truncation_radius;
    let mut states = Vec::with_capacity(steps + 1);
    let mut z = Vec::with_capacity(steps + 1);
    states.push(v0.clone());
    z.push(ou.z_at(r_start)?);
    let mut batch = vec![v0.values().to_vec()];
    rk4_batch(spec, ou, (t_start, r_start), steps, dt_ode, &mut batch, |_, s| {
        states.push(LatticeVector::from_fn(radius, |i| s[0][(i + radius as i64) as usize]));
    })?;
    for k in 1..=steps {
        z.push(ou.z_at(r_start + k as f64 * dt_ode)?);
    }
    Ok(Trajectory {
        times: (0..=steps).map(|k| t_start + k as f64 * dt_ode).collect(),
        noise_start: r_start,
        states,
        z,
        representation: Representation::Transformed,
        step: dt_ode,
    })
}

/// `v(., tau; omega, v0)` on `[tau, tau + duration]`, with `z(theta_t omega)`
/// read at the same time as the coefficients.
pub fn integrate_transformed(
    spec: &ProblemSpec,
    ou: &OuPath,
    tau: f64,
    duration: f64,
    v0: &LatticeVector,
    dt_ode: f64,
) -> Result<Trajectory, CocycleError> {
    integrate_clocked(spec, ou, (tau, tau), duration, v0, dt_ode)
}

/// Final states of a batch evolved on `[t_start, t_start + duration]` with the
/// noise clock starting at `r_start`. Members are integrated in parallel
/// chunks and returned in input order.
pub fn evolve_batch(
    spec: &ProblemSpec,
    ou: &OuPath,
    (t_start, r_start): (f64, f64),
    duration: f64,
    family: &[LatticeVector],
    dt_ode: f64,
) -> Result<Vec<LatticeVector>, CocycleError> {
    for x in family {
        check_state(spec, x)?;
    }
    let steps = step_count(duration, dt_ode, ou.grid().dt())?;
    let radius = spec.truncation_radius;
    let chunk = family.len().div_ceil(rayon::current_num_threads().max(1)).max(1);
    let chunks: Vec<Vec<Vec<f64>>> = family
        .par_chunks(chunk)
        .map(|members| {
            let mut batch: Vec<Vec<f64>> = members.iter().map(|m| m.values().to_vec()).collect();
            rk4_batch(spec, ou, (t_start, r_start), steps, dt_ode, &mut batch, |_, _| {})?;
            Ok(batch)
        })
        .collect::<Result<_, CocycleError>>()?;
    Ok(chunks
        .into_iter()
        .flatten()
        .map(|values| LatticeVector::from_values(radius, values))
        .collect::<Result<_, _>>()?)
}

/// `Phi(t, tau - t, theta_{-t} omega, .)` applied to every member: the noise
/// clock runs over `[-t, 0]` while the coefficients run over `[tau - t, tau]`.
pub fn pullback_images(
    spec: &ProblemSpec,
    ou: &OuPath,
    tau: f64,
    t: f64,
    family: &[LatticeVector],
    dt_ode: f64,
) -> Result<Vec<LatticeVector>, CocycleError> {
    evolve_batch(spec, ou, (tau - t, -t), t, family, dt_ode)
}

/// Heun (Stratonovich) trajectory of the original equation driven by `w`.
pub fn integrate_original(
    spec: &ProblemSpec,
    wiener: &WienerPath,
    tau: f64,
    duration: f64,
    u0: &LatticeVector,
    dt_ode: f64,
) -> Result<Trajectory, CocycleError> {
    check_state(spec, u0)?;
    let noise_dt = wiener.grid().dt();
    if integer_ratio(dt_ode, noise_dt).is_none() {
        return Err(CocycleError::Step(format!(
            "Heun step {dt_ode} must be a multiple of the Wiener grid step {noise_dt}"
        )));
    }
    let steps = step_count(duration, dt_ode, noise_dt)?;
    let n = u0.len();
    let radius = spec.truncation_radius;
    let mut snap0 = spec.snapshot(tau);
    let mut snap1 = CoefficientSnapshot::empty(radius);
    let (mut a0, mut a1, mut pred) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut u = u0.values().to_vec();
    let mut w_prev = wiener.value_at(tau)?;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(u0.clone());
    for k in 0..steps {
        let t1 = tau + (k + 1) as f64 * dt_ode;
        let w_next = wiener.value_at(t1)?;
        let dw = w_next - w_prev;
        spec.snapshot_into(t1, &mut snap1);
        drift_original_into(spec, &snap0, &u, &mut a0);
        for p in 0..n {
            pred[p] = u[p] + a0[p] * dt_ode + u[p] * dw;
        }
        drift_original_into(spec, &snap1, &pred, &mut a1);
        for p in 0..n {
            u[p] += 0.5 * (a0[p] + a1[p]) * dt_ode + 0.5 * (u[p] + pred[p]) * dw;
        }
        if !u.iter().all(|x| x.is_finite()) {
            return Err(CocycleError::BlowUp { time: t1 });
        }
        states.push(LatticeVector::from_values(radius, u.clone())?);
        std::mem::swap(&mut snap0, &mut snap1);
        w_prev = w_next;
    }
    Ok(Trajectory {
        times: (0..=steps).map(|k| tau + k as f64 * dt_ode).collect(),
        noise_start: tau,
        states,
        z: Vec::new(),
        representation: Representation::Original,
        step: dt_ode,
    })
}

/// `Phi(t, tau, omega, v_tau)` on the conjugated state.
pub fn cocycle_transformed(
    spec: &ProblemSpec,
    ou: &OuPath,
    t: f64,
    tau: f64,
    v_tau: &LatticeVector,
    dt_ode: f64,
) -> Result<LatticeVector, CocycleError> {
    if t == 0.0 {
        check_state(spec, v_tau)?;
        return Ok(v_tau.clone());
    }
    let out = evolve_batch(spec, ou, (tau, 0.0), t, std::slice::from_ref(v_tau), dt_ode)?;
    Ok(out.into_iter().next().expect("one member in, one out"))
}

/// One evaluation of the cocycle, recorded in both representations.
#[derive(Debug, Clone)]
pub struct CocycleRun {
    pub t: f64,
    pub tau: f64,
    pub path_seed: u64,
    pub initial_u: LatticeVector,
    pub initial_v: LatticeVector,
    pub final_v: LatticeVector,
    pub final_u: LatticeVector,
    pub step: f64,
}

/// `Phi(t, tau, omega, .)` applied to `u_tau`: conjugate with the noise value
/// at the start of the run, integrate, and conjugate back with the value at
/// the end.
pub fn cocycle_map(
    spec: &ProblemSpec,
    base_path: &WienerPath,
    t: f64,
    tau: f64,
    u_tau: &LatticeVector,
    dt_ode: f64,
) -> Result<CocycleRun, CocycleError> {
    let ou = ou_from_wiener(base_path);
    let z0 = ou.z_at(0.0)?;
    let initial_v = transform_state(u_tau, z0, Conjugation::ToTransformed)?;
    let (final_v, final_u) = if t == 0.0 {
        (initial_v.clone(), u_tau.clone())
    } else {
        let v = cocycle_transformed(spec, &ou, t, tau, &initial_v, dt_ode)?;
        let u = transform_state(&v, ou.z_at(t)?, Conjugation::ToOriginal)?;
        (v, u)
    };
    Ok(CocycleRun {
        t,
        tau,
        path_seed: base_path.seed(),
        initial_u: u_tau.clone(),
        initial_v,
        final_v,
        final_u,
        step: dt_ode,
    })
}

fn relative_gap(a: &LatticeVector, b: &LatticeVector) -> f64 {
    a.distance(b) / (1.0 + a.norm())
}

/// `||Phi(t+s, tau, omega, v) - Phi(t, tau+s, theta_s omega, Phi(s, tau, omega, v))|| / (1 + ||.||)`.
pub fn cocycle_property_check(
    spec: &ProblemSpec,
    path: &WienerPath,
    t: f64,
    s: f64,
    tau: f64,
    v_tau: &LatticeVector,
    dt_ode: f64,
) -> Result<f64, CocycleError> {
    let ou = ou_from_wiener(path);
    let direct = cocycle_transformed(spec, &ou, t + s, tau, v_tau, dt_ode)?;
    let first = cocycle_transformed(spec, &ou, s, tau, v_tau, dt_ode)?;
    let shifted = ou_from_wiener(&shift_path(path, s)?);
    let composed = cocycle_transformed(spec, &shifted, t, tau + s, &first, dt_ode)?;
    Ok(relative_gap(&direct, &composed))
}

/// Step-halving study of `Phi(t, tau, omega, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub steps: Vec<f64>,
    /// `||Phi_h - Phi_{h/2}||` for consecutive step sizes.
    pub differences: Vec<f64>,
    /// `log2` of consecutive difference ratios.
    pub orders: Vec<f64>,
}

impl ConvergenceStudy {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `differences[k] / differences[k+1]`.
    pub fn reduction_factors(&self) -> Vec<f64> {
        self.differences.windows(2).map(|w| w[0] / w[1]).collect()
    }
}

pub fn cocycle_convergence(
    spec: &ProblemSpec,
    ou: &OuPath,
    t: f64,
    tau: f64,
    v_tau: &LatticeVector,
    dt_ode: f64,
    halvings: usize,
) -> Result<ConvergenceStudy, CocycleError> {
    let steps: Vec<f64> = (0..=halvings + 1).map(|k| dt_ode / f64::powi(2.0, k as i32)).collect();
    let finals = steps
        .iter()
        .map(|&h| cocycle_transformed(spec, ou, t, tau, v_tau, h))
        .collect::<Result<Vec<_>, _>>()?;
    let differences: Vec<f64> = finals.windows(2).map(|w| w[0].distance(&w[1])).collect();
    let orders = differences.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(ConvergenceStudy {
        steps,
        differences,
        orders,
    })
}

/// Discrepancy between the Heun solution of the original equation and the
/// back-transformed RK4 solution of the conjugated one.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub max_rel_error: f64,
    /// Relative error at each grid node.
    pub errors: Vec<f64>,
}

pub fn crossval_transform(
    spec: &ProblemSpec,
    wiener: &WienerPath,
    tau: f64,
    duration: f64,
    u0: &LatticeVector,
    dt_ode: f64,
) -> Result<CrossValidation, CocycleError> {
    let direct = integrate_original(spec, wiener, tau, duration, u0, dt_ode)?;
    let ou = ou_from_wiener(wiener);
    let v0 = transform_state(u0, ou.z_at(tau)?, Conjugation::ToTransformed)?;
    let conj = integrate_transformed(spec, &ou, tau, duration, &v0, dt_ode)?;
    let errors = direct
        .states
        .iter()
        .zip(&conj.states)
        .zip(&conj.z)
        .map(|((u, v), &z)| {
            let back = transform_state(v, z, Conjugation::ToOriginal)?;
            let scale = back.norm();
            let gap = u.distance(&back);
            Ok(if scale > 0.0 { gap / scale } else { gap })
        })
        .collect::<Result<Vec<f64>, CocycleError>>()?;
    Ok(CrossValidation {
        max_rel_error: errors.iter().copied().fold(0.0, f64::max),
        errors,
    })
}
