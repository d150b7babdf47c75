//! Truncated lattice state space, the discrete Laplacian, time-dependent
//! coefficients and the reaction term, together with numerical checks of the
//! dissipativity hypotheses the attractor estimates rely on.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// `2/sqrt(pi)`, twice the stationary mean of `|z|`.
pub const TWO_OVER_SQRT_PI: f64 = 2.0 / 1.772_453_850_905_516;

/// Largest exponent accepted by the state conjugation before `exp` overflows.
pub const MAX_EXPONENT: f64 = 700.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("lattice vector of radius {radius} needs {expected} entries, got {got}")]
    Length {
        radius: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value at lattice site {site}")]
    NonFinite { site: i64 },
    #[error("invalid coefficient bounds: {0}")]
    Bounds(String),
    #[error("conjugation factor overflows: |z| = {z} exceeds {MAX_EXPONENT}")]
    Overflow { z: f64 },
    #[error("dissipativity margin lambda_tilde = {0} is not positive")]
    LambdaTilde(f64),
    #[error("invalid model parameter: {0}")]
    Parameter(String),
}

/// Finite window `{-N, ..., N}` of an `l^2(Z)` sequence, zero outside.
#[derive(Clone, PartialEq)]
pub struct LatticeVector {
    radius: usize,
    values: Vec<f64>,
}

impl fmt::Debug for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LatticeVector")
            .field("radius", &self.radius)
            .field("norm", &self.norm())
            .finish()
    }
}

impl LatticeVector {
    pub fn zeros(radius: usize) -> Self {
        Self {
            radius,
            values: vec![0.0; 2 * radius + 1],
        }
    }

    pub fn from_values(radius: usize, values: Vec<f64>) -> Result<Self, ModelError> {
        let expected = 2 * radius + 1;
        if values.len() != expected {
            return Err(ModelError::Length {
                radius,
                expected,
                got: values.len(),
            });
        }
        let v = Self { radius, values };
        v.check_finite()?;
        Ok(v)
    }

    /// Builds a vector from a site function `i -> u_i`.
    pub fn from_fn(radius: usize, mut f: impl FnMut(i64) -> f64) -> Self {
        let r = radius as i64;
        Self {
            radius,
            values: (-r..=r).map(&mut f).collect(),
        }
    }

    /// Unit vector `e_site`.
    pub fn unit(radius: usize, site: i64) -> Self {
        let mut v = Self::zeros(radius);
        v.set(site, 1.0);
        v
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Lattice index of storage position `pos`.
    pub fn site(&self, pos: usize) -> i64 {
        pos as i64 - self.radius as i64
    }

    /// `u_i`, zero outside the truncation window.
    pub fn get(&self, site: i64) -> f64 {
        let r = self.radius as i64;
        if site < -r || site > r {
            0.0
        } else {
            self.values[(site + r) as usize]
        }
    }

    /// Sets `u_i`; sites outside the window are ignored.
    pub fn set(&mut self, site: i64, value: f64) {
        let r = self.radius as i64;
        if (-r..=r).contains(&site) {
            self.values[(site + r) as usize] = value;
        }
    }

    pub fn sites(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let r = self.radius as i64;
        self.values.iter().enumerate().map(move |(p, &x)| (p as i64 - r, x))
    }

    pub fn check_finite(&self) -> Result<(), ModelError> {
        match self.values.iter().position(|x| !x.is_finite()) {
            Some(p) => Err(ModelError::NonFinite { site: self.site(p) }),
            None => Ok(()),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.radius, other.radius);
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    /// `||self - other||`.
    pub fn distance(&self, other: &Self) -> f64 {
        distance_sq(&self.values, &other.values).sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            radius: self.radius,
            values: self.values.iter().map(|x| x * factor).collect(),
        }
    }

    /// `sum_{|i| > cutoff} u_i^2`.
    pub fn tail_mass(&self, cutoff: usize) -> f64 {
        let r = self.radius;
        if cutoff >= r {
            return 0.0;
        }
        let inner = r - cutoff;
        let (left, rest) = self.values.split_at(inner);
        let right = &rest[2 * cutoff + 1..];
        left.iter().chain(right).map(|x| x * x).sum()
    }
}

pub(crate) fn distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Writes `(Au)_i = -u_{i-1} + 2u_i - u_{i+1}` into `out`, zero padding outside.
pub(crate) fn laplacian_into(u: &[f64], out: &mut [f64]) {
    let n = u.len();
    for p in 0..n {
        let left = if p > 0 { u[p - 1] } else { 0.0 };
        let right = if p + 1 < n { u[p + 1] } else { 0.0 };
        out[p] = 2.0 * u[p] - left - right;
    }
}

/// Discrete Laplacian `A` on the truncated lattice.
pub fn laplacian_apply(u: &LatticeVector) -> LatticeVector {
    let mut out = LatticeVector::zeros(u.radius);
    laplacian_into(&u.values, &mut out.values);
    out
}

/// Site coefficient `(i, t) -> value`.
pub type SiteFn = Arc<dyn Fn(i64, f64) -> f64 + Send + Sync>;
/// Reaction term `(i, x, t) -> f_i(x, t)`.
pub type ReactionFn = Arc<dyn Fn(i64, f64, f64) -> f64 + Send + Sync>;
/// Derivative modulus `(iota, t) -> zeta(iota, t)`.
pub type ModulusFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Diffusion `nu_i(t)` and damping `lambda_i(t)` with their declared bounds.
#[derive(Clone)]
pub struct CoefficientField {
    pub nu: SiteFn,
    pub lambda: SiteFn,
    pub nu0: f64,
    pub nu_sup: f64,
    pub lambda0: f64,
    pub lambda_sup: f64,
}

impl CoefficientField {
    pub fn new(
        nu: SiteFn,
        lambda: SiteFn,
        (nu0, nu_sup): (f64, f64),
        (lambda0, lambda_sup): (f64, f64),
    ) -> Result<Self, ModelError> {
        for (name, lo, hi) in [("nu", nu0, nu_sup), ("lambda", lambda0, lambda_sup)] {
            if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 || hi < lo {
                return Err(ModelError::Bounds(format!(
                    "{name} bounds must satisfy 0 < lower <= upper < inf, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self {
            nu,
            lambda,
            nu0,
            nu_sup,
            lambda0,
            lambda_sup,
        })
    }
}

/// Reaction term with its one-sided and local Lipschitz data.
#[derive(Clone)]
pub struct NonlinearitySpec {
    pub f: ReactionFn,
    pub alpha: SiteFn,
    pub beta: f64,
    pub zeta: ModulusFn,
    /// `sup_t ||alpha(t)||` when known in closed form.
    pub alpha_sup_norm: Option<f64>,
}

#[derive(Clone)]
pub struct ForcingSpec {
    pub g: SiteFn,
    /// `sup_t ||g(t)||` when known in closed form.
    pub g_sup_norm: Option<f64>,
}

/// Parameters of the builtin model family
///
/// `nu_i(t) = nu0 + nu_amp sin t`, `lambda_i(t) = lambda_base + lambda_amp cos t`,
/// `f_i(x, t) = x^3 - beta 2^{-|i|} x`, `g_i(t) = forcing_scale 2^{-|i|} cos t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub nu0: f64,
    pub nu_amp: f64,
    pub lambda_base: f64,
    pub lambda_amp: f64,
    pub beta: f64,
    pub forcing_scale: f64,
}

impl ModelParams {
    pub const CANONICAL: Self = Self {
        nu0: 1.0,
        nu_amp: 0.5,
        lambda_base: 3.0,
        lambda_amp: 0.5,
        beta: 0.5,
        forcing_scale: 1.0,
    };

    /// Canonical coefficients with no forcing and no negative reaction part,
    /// so the origin is a global fixed point.
    pub const ZERO_FORCING: Self = Self {
        beta: 0.0,
        forcing_scale: 0.0,
        ..Self::CANONICAL
    };

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "canonical" => Some(Self::CANONICAL),
            "zero-forcing" => Some(Self::ZERO_FORCING),
            _ => None,
        }
    }
}

/// `sum_{i in Z} 4^{-|i|}`.
const GEOMETRIC_QUARTER_SUM: f64 = 5.0 / 3.0;

/// Full model: coefficients, reaction, forcing and the truncation radius.
#[derive(Clone)]
pub struct ProblemSpec {
    pub coefficients: CoefficientField,
    pub nonlinearity: NonlinearitySpec,
    pub forcing: ForcingSpec,
    pub truncation_radius: usize,
    /// Time period used when sup-norms must be found numerically.
    pub period: f64,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("truncation_radius", &self.truncation_radius)
            .field("nu", &(self.coefficients.nu0, self.coefficients.nu_sup))
            .field(
                "lambda",
                &(self.coefficients.lambda0, self.coefficients.lambda_sup),
            )
            .field("beta", &self.nonlinearity.beta)
            .finish()
    }
}

impl ProblemSpec {
    pub fn from_params(params: ModelParams, truncation_radius: usize) -> Result<Self, ModelError> {
        let ModelParams {
            nu0,
            nu_amp,
            lambda_base,
            lambda_amp,
            beta,
            forcing_scale,
        } = params;
        let all = [nu0, nu_amp, lambda_base, lambda_amp, beta, forcing_scale];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::Parameter("all model constants must be finite".into()));
        }
        if beta < 0.0 {
            return Err(ModelError::Parameter(format!("beta must be >= 0, got {beta}")));
        }
        let coefficients = CoefficientField::new(
            Arc::new(move |_, t: f64| nu0 + nu_amp * t.sin()),
            Arc::new(move |_, t: f64| lambda_base + lambda_amp * t.cos()),
            (nu0 - nu_amp.abs(), nu0 + nu_amp.abs()),
            (lambda_base - lambda_amp.abs(), lambda_base + lambda_amp.abs()),
        )?;

        let r = truncation_radius as i64;
        let decay: Arc<[f64]> = (-r..=r).map(|i| 0.5f64.powi(i.abs() as i32)).collect();
        let profile = move |i: i64| -> f64 {
            let p = i + r;
            if (0..decay.len() as i64).contains(&p) {
                decay[p as usize]
            } else {
                0.5f64.powi(i.abs() as i32)
            }
        };
        let prof_f = profile.clone();
        let prof_a = profile.clone();
        let nonlinearity = NonlinearitySpec {
            f: Arc::new(move |i, x: f64, _| x * x * x - beta * prof_f(i) * x),
            alpha: Arc::new(move |i, _| 0.5 * beta * prof_a(i)),
            beta,
            zeta: Arc::new(move |iota, _| 3.0 * iota * iota + beta),
            alpha_sup_norm: Some(0.5 * beta * GEOMETRIC_QUARTER_SUM.sqrt()),
        };
        let forcing = ForcingSpec {
            g: Arc::new(move |i, t: f64| forcing_scale * profile(i) * t.cos()),
            g_sup_norm: Some(forcing_scale.abs() * GEOMETRIC_QUARTER_SUM.sqrt()),
        };
        Ok(Self {
            coefficients,
            nonlinearity,
            forcing,
            truncation_radius,
            period: 2.0 * PI,
        })
    }

    pub fn canonical(truncation_radius: usize) -> Self {
        Self::from_params(ModelParams::CANONICAL, truncation_radius)
            .expect("canonical constants are valid")
    }

    pub fn zeros(&self) -> LatticeVector {
        LatticeVector::zeros(self.truncation_radius)
    }

    pub fn lambda_hat(&self) -> f64 {
        self.coefficients.lambda0 - self.nonlinearity.beta
    }

    pub fn lambda_tilde(&self) -> f64 {
        self.lambda_hat() - TWO_OVER_SQRT_PI
    }

    /// State-independent coefficients at time `t`.
    pub(crate) fn snapshot(&self, t: f64) -> CoefficientSnapshot {
        let mut snap = CoefficientSnapshot::empty(self.truncation_radius);
        self.snapshot_into(t, &mut snap);
        snap
    }

    pub(crate) fn snapshot_into(&self, t: f64, snap: &mut CoefficientSnapshot) {
        let r = self.truncation_radius as i64;
        snap.t = t;
        for (p, i) in (-r..=r).enumerate() {
            snap.nu[p] = (self.coefficients.nu)(i, t);
            snap.lambda[p] = (self.coefficients.lambda)(i, t);
            snap.g[p] = (self.forcing.g)(i, t);
        }
    }
}

/// `nu(i, t)`, `lambda(i, t)`, `g(i, t)` tabulated over the window at one `t`.
#[derive(Debug, Clone)]
pub(crate) struct CoefficientSnapshot {
    pub t: f64,
    pub nu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub g: Vec<f64>,
}

impl CoefficientSnapshot {
    pub fn empty(radius: usize) -> Self {
        let n = 2 * radius + 1;
        Self {
            t: f64::NAN,
            nu: vec![0.0; n],
            lambda: vec![0.0; n],
            g: vec![0.0; n],
        }
    }
}

/// Deterministic drift of the original equation, written into `out`.
pub(crate) fn drift_original_into(
    spec: &ProblemSpec,
    snap: &CoefficientSnapshot,
    u: &[f64],
    out: &mut [f64],
) {
    let r = spec.truncation_radius as i64;
    let f = &spec.nonlinearity.f;
    let t = snap.t;
    let n = u.len();
    for p in 0..n {
        let left = if p > 0 { u[p - 1] } else { 0.0 };
        let right = if p + 1 < n { u[p + 1] } else { 0.0 };
        let au = 2.0 * u[p] - left - right;
        out[p] = -snap.nu[p] * au - snap.lambda[p] * u[p] - f(p as i64 - r, u[p], t) + snap.g[p];
    }
}

/// Drift of the conjugated random ODE, written into `out`.
///
/// `e_pos = e^z`, `e_neg = e^{-z}` are passed in so batches share them.
pub(crate) fn drift_transformed_into(
    spec: &ProblemSpec,
    snap: &CoefficientSnapshot,
    z: f64,
    e_pos: f64,
    e_neg: f64,
    v: &[f64],
    out: &mut [f64],
) {
    let r = spec.truncation_radius as i64;
    let f = &spec.nonlinearity.f;
    let t = snap.t;
    let n = v.len();
    for p in 0..n {
        let left = if p > 0 { v[p - 1] } else { 0.0 };
        let right = if p + 1 < n { v[p + 1] } else { 0.0 };
        let av = 2.0 * v[p] - left - right;
        out[p] = -snap.nu[p] * av - snap.lambda[p] * v[p] - e_neg * f(p as i64 - r, e_pos * v[p], t)
            + e_neg * snap.g[p]
            + z * v[p];
    }
}

pub(crate) fn conjugation_factors(z: f64) -> Result<(f64, f64), ModelError> {
    if !z.is_finite() || z.abs() > MAX_EXPONENT {
        return Err(ModelError::Overflow { z: z.abs() });
    }
    Ok((z.exp(), (-z).exp()))
}

/// `-nu(t) A u - lambda(t) u - f(u, t) + g(t)`.
pub fn drift_original(spec: &ProblemSpec, u: &LatticeVector, t: f64) -> Result<LatticeVector, ModelError> {
    check_radius(spec, u)?;
    let snap = spec.snapshot(t);
    let mut out = spec.zeros();
    drift_original_into(spec, &snap, &u.values, &mut out.values);
    out.check_finite()?;
    Ok(out)
}

/// `-nu(t) A v - lambda(t) v - e^{-z} f(e^z v, t) + e^{-z} g(t) + z v`.
pub fn drift_transformed(
    spec: &ProblemSpec,
    v: &LatticeVector,
    t: f64,
    z: f64,
) -> Result<LatticeVector, ModelError> {
    check_radius(spec, v)?;
    let (e_pos, e_neg) = conjugation_factors(z)?;
    let snap = spec.snapshot(t);
    let mut out = spec.zeros();
    drift_transformed_into(spec, &snap, z, e_pos, e_neg, &v.values, &mut out.values);
    out.check_finite()?;
    Ok(out)
}

fn check_radius(spec: &ProblemSpec, u: &LatticeVector) -> Result<(), ModelError> {
    if u.radius != spec.truncation_radius {
        return Err(ModelError::Length {
            radius: spec.truncation_radius,
            expected: 2 * spec.truncation_radius + 1,
            got: u.len(),
        });
    }
    Ok(())
}

/// Finite-difference step for `d f / d x`.
pub const FD_STEP: f64 = 1e-5;
/// Slack allowed on finite-difference derivative checks.
pub const FD_SLACK: f64 = 1e-6;
/// Slack allowed on pointwise value checks.
const VALUE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// Bounds on `nu` and `lambda`.
    Coefficients,
    /// `f(0) = 0`, `x f >= -alpha^2`, `f' >= -beta`.
    Dissipativity,
    /// `|f'| <= zeta(iota, t)` on `[-iota, iota]`.
    LocalLipschitz,
    /// `||g(t)|| <= |||g|||`.
    Forcing,
    /// `lambda_tilde > 0`.
    Margin,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Coefficients => "A1",
            Self::Dissipativity => "A2",
            Self::LocalLipschitz => "A3",
            Self::Forcing => "A4",
            Self::Margin => "lambda_tilde",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub assumption: Assumption,
    pub site: Option<i64>,
    pub x: Option<f64>,
    pub t: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub nu_min: f64,
    pub nu_max: f64,
    /// `min (x f + alpha^2)`; non-negative when the dissipativity bound holds.
    pub worst_dissipativity: f64,
    /// `min (f' + beta)`.
    pub worst_monotonicity: f64,
    /// `max (|f'| - zeta(|x|, t))`.
    pub worst_modulus: f64,
    /// `max (||g(t)|| - |||g|||)`.
    pub worst_forcing: f64,
    pub lambda_tilde: f64,
    pub violations: Vec<Violation>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violated(&self, which: Assumption) -> bool {
        self.violations.iter().any(|v| v.assumption == which)
    }
}

fn central_difference(f: &ReactionFn, i: i64, x: f64, t: f64) -> f64 {
    (f(i, x + FD_STEP, t) - f(i, x - FD_STEP, t)) / (2.0 * FD_STEP)
}

/// Samples every lattice site against `t_grid x x_grid` and reports the
/// tightest margin of each hypothesis. Only the first witness per hypothesis
/// is recorded.
pub fn assumptions_check(spec: &ProblemSpec, t_grid: &[f64], x_grid: &[f64]) -> AssumptionReport {
    let c = &spec.coefficients;
    let nl = &spec.nonlinearity;
    let r = spec.truncation_radius as i64;
    let mut rep = AssumptionReport {
        lambda_min: f64::INFINITY,
        lambda_max: f64::NEG_INFINITY,
        nu_min: f64::INFINITY,
        nu_max: f64::NEG_INFINITY,
        worst_dissipativity: f64::INFINITY,
        worst_monotonicity: f64::INFINITY,
        worst_modulus: f64::NEG_INFINITY,
        worst_forcing: f64::NEG_INFINITY,
        lambda_tilde: spec.lambda_tilde(),
        violations: Vec::new(),
    };
    let flag = |rep: &mut AssumptionReport, v: Violation| {
        if !rep.violated(v.assumption) {
            rep.violations.push(v);
        }
    };
    let g_bound = derive_sup_norms(spec).1;

    for &t in t_grid {
        let mut g_sq = 0.0;
        for i in -r..=r {
            let nu = (c.nu)(i, t);
            let lambda = (c.lambda)(i, t);
            rep.nu_min = rep.nu_min.min(nu);
            rep.nu_max = rep.nu_max.max(nu);
            rep.lambda_min = rep.lambda_min.min(lambda);
            rep.lambda_max = rep.lambda_max.max(lambda);
            if !(c.nu0 - VALUE_SLACK..=c.nu_sup + VALUE_SLACK).contains(&nu)
                || !(c.lambda0 - VALUE_SLACK..=c.lambda_sup + VALUE_SLACK).contains(&lambda)
            {
                flag(
                    &mut rep,
                    Violation {
                        assumption: Assumption::Coefficients,
                        site: Some(i),
                        x: None,
                        t: Some(t),
                        detail: format!("nu = {nu}, lambda = {lambda} outside declared bounds"),
                    },
                );
            }
            let g = (spec.forcing.g)(i, t);
            g_sq += g * g;

            let f0 = (nl.f)(i, 0.0, t);
            if f0.abs() > VALUE_SLACK {
                flag(
                    &mut rep,
                    Violation {
                        assumption: Assumption::Dissipativity,
                        site: Some(i),
                        x: Some(0.0),
                        t: Some(t),
                        detail: format!("f(0) = {f0}"),
                    },
                );
            }
            let alpha = (nl.alpha)(i, t);
            for &x in x_grid {
                let fx = (nl.f)(i, x, t);
                let diss = x * fx + alpha * alpha;
                rep.worst_dissipativity = rep.worst_dissipativity.min(diss);
                if diss < -VALUE_SLACK {
                    flag(
                        &mut rep,
                        Violation {
                            assumption: Assumption::Dissipativity,
                            site: Some(i),
                            x: Some(x),
                            t: Some(t),
                            detail: format!("x f + alpha^2 = {diss}"),
                        },
                    );
                }
                let df = central_difference(&nl.f, i, x, t);
                let mono = df + nl.beta;
                rep.worst_monotonicity = rep.worst_monotonicity.min(mono);
                if mono < -FD_SLACK {
                    flag(
                        &mut rep,
                        Violation {
                            assumption: Assumption::Dissipativity,
                            site: Some(i),
                            x: Some(x),
                            t: Some(t),
                            detail: format!("f' + beta = {mono}"),
                        },
                    );
                }
                let excess = df.abs() - (nl.zeta)(x.abs(), t);
                rep.worst_modulus = rep.worst_modulus.max(excess);
                if excess > FD_SLACK {
                    flag(
                        &mut rep,
                        Violation {
                            assumption: Assumption::LocalLipschitz,
                            site: Some(i),
                            x: Some(x),
                            t: Some(t),
                            detail: format!("|f'| exceeds zeta(|x|, t) by {excess}"),
                        },
                    );
                }
            }
        }
        let excess = g_sq.sqrt() - g_bound.value;
        rep.worst_forcing = rep.worst_forcing.max(excess);
        if excess > VALUE_SLACK * (1.0 + g_bound.value) {
            flag(
                &mut rep,
                Violation {
                    assumption: Assumption::Forcing,
                    site: None,
                    x: None,
                    t: Some(t),
                    detail: format!("||g(t)|| exceeds |||g||| = {} by {excess}", g_bound.value),
                },
            );
        }
    }
    if rep.lambda_tilde <= 0.0 {
        let lambda_tilde = rep.lambda_tilde;
        flag(
            &mut rep,
            Violation {
                assumption: Assumption::Margin,
                site: None,
                x: None,
                t: None,
                detail: format!("lambda_tilde = {lambda_tilde} <= 0"),
            },
        );
    }
    rep
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMethod {
    ClosedForm,
    /// Maximized over a uniform grid of one period, then inflated by 1%.
    GridMaximized { points: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupNorm {
    pub value: f64,
    pub method: NormMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    pub lambda_hat: f64,
    pub lambda_tilde: f64,
    pub alpha_sup_norm: SupNorm,
    pub g_sup_norm: SupNorm,
}

impl DerivedConstants {
    /// `2 |||alpha|||^2 + |||g|||^2 / lambda_0`, the forcing weight of the
    /// energy estimates.
    pub fn forcing_weight(&self, lambda0: f64) -> f64 {
        2.0 * self.alpha_sup_norm.value.powi(2) + self.g_sup_norm.value.powi(2) / lambda0
    }
}

pub const SUP_GRID_POINTS: usize = 10_000;
pub const SUP_INFLATION: f64 = 1.01;

fn grid_sup(spec: &ProblemSpec, field: &SiteFn) -> SupNorm {
    let r = spec.truncation_radius as i64;
    let max = (0..SUP_GRID_POINTS)
        .map(|k| {
            let t = spec.period * k as f64 / SUP_GRID_POINTS as f64;
            (-r..=r).map(|i| field(i, t).powi(2)).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max);
    SupNorm {
        value: max * SUP_INFLATION,
        method: NormMethod::GridMaximized {
            points: SUP_GRID_POINTS,
        },
    }
}

fn derive_sup_norms(spec: &ProblemSpec) -> (SupNorm, SupNorm) {
    let alpha = match spec.nonlinearity.alpha_sup_norm {
        Some(value) => SupNorm {
            value,
            method: NormMethod::ClosedForm,
        },
        None => grid_sup(spec, &spec.nonlinearity.alpha),
    };
    let g = match spec.forcing.g_sup_norm {
        Some(value) => SupNorm {
            value,
            method: NormMethod::ClosedForm,
        },
        None => grid_sup(spec, &spec.forcing.g),
    };
    (alpha, g)
}

pub fn derive_constants(spec: &ProblemSpec) -> Result<DerivedConstants, ModelError> {
    let lambda_tilde = spec.lambda_tilde();
    if lambda_tilde <= 0.0 {
        return Err(ModelError::LambdaTilde(lambda_tilde));
    }
    let (alpha_sup_norm, g_sup_norm) = derive_sup_norms(spec);
    Ok(DerivedConstants {
        lambda_hat: spec.lambda_hat(),
        lambda_tilde,
        alpha_sup_norm,
        g_sup_norm,
    })
}
