//! Dispatches a parsed configuration to one experiment and writes its CSVs.
//!
//! Tables are built in memory and written at the end in a fixed order, so the
//! output bytes depend only on the configuration.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::attractor::{
    absorbing_radius, entropy_report, gronwall_envelope_check, pullback_absorption_test, pullback_attractor_sample,
    invariance_gap, tail_decay_test, AttractorError, InitialFamily,
};
use crate::cocycle::{
    cocycle_convergence, cocycle_property_check, cocycle_transformed, crossval_transform, integrate_clocked,
    CocycleError,
};
use crate::config::{Experiment, ExperimentConfig, INVARIANCE_DELTA};
use crate::model::{assumptions_check, derive_constants, LatticeVector, ModelError, ProblemSpec};
use crate::noise::{
    moments, ou_from_wiener, sample_wiener, stationary_ensemble, temperedness_report, Direction, NoiseError,
    STATIONARY_SD,
};
use crate::seeds::{sub_seed, Stream};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Cocycle(#[from] CocycleError),
    #[error(transparent)]
    Attractor(#[from] AttractorError),
    #[error("output {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("output {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("two tables would be written to {0}")]
    Collision(String),
}

/// Stationary samples behind the OU law check.
pub const OU_LAW_SAMPLES: usize = 100_000;
/// Band for the long-time average of `|z|` around `1/sqrt(pi)`.
pub const MEAN_ABS_BAND: (f64, f64) = (0.536, 0.593);
pub const ENDPOINT_RATIO_MAX: f64 = 0.01;
pub const MEAN_Z_MAX: f64 = 0.02;
pub const MIN_ORDER: f64 = 3.0;
/// Relative change of `R` between `S` and `4S/3`.
pub const RADIUS_STABILITY: f64 = 1e-3;
pub const TAIL_SLOPE_BAND: (f64, f64) = (0.8, 1.2);
pub const ZERO_FORCING_RADIUS: f64 = 1e-4;
pub const INVARIANCE_FACTOR: f64 = 3.0;
/// Largest initial norm of the bounded families.
pub const FAMILY_NORM: f64 = 10.0;
/// Members whose forward trajectories are checked against the envelope.
pub const ENVELOPE_MEMBERS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_owned(),
            passed,
            detail,
        }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// 17 significant digits.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone)]
struct Table {
    name: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|h| (*h).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

fn state_header(first: &str, radius: usize) -> Vec<String> {
    let r = radius as i64;
    std::iter::once(first.to_owned()).chain((-r..=r).map(|i| format!("v_{i}"))).collect()
}

fn state_row(key: String, v: &LatticeVector) -> Vec<String> {
    std::iter::once(key).chain(v.values().iter().map(|&x| real(x))).collect()
}

/// `cloud_<t>.csv`, with `t` in its shortest round-trip form.
pub fn cloud_file_name(t: f64) -> String {
    format!("cloud_{t}.csv")
}

fn write_tables(dir: &Path, tables: &[Table]) -> Result<Vec<PathBuf>, RunError> {
    let mut seen = BTreeSet::new();
    for t in tables {
        if !seen.insert(t.name.as_str()) {
            return Err(RunError::Collision(t.name.clone()));
        }
    }
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.to_owned(),
        source,
    })?;
    let mut files = Vec::with_capacity(tables.len());
    for table in tables {
        let path = dir.join(&table.name);
        let csv_err = |source| RunError::Csv {
            path: path.clone(),
            source,
        };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(&table.header).map_err(csv_err)?;
        for row in &table.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush().map_err(|source| RunError::Io {
            path: path.clone(),
            source,
        })?;
        files.push(path);
    }
    Ok(files)
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    spec: ProblemSpec,
    tables: Vec<Table>,
    checks: Vec<Check>,
}

impl Context<'_> {
    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check::new(name, passed, detail));
    }

    fn seed(&self) -> u64 {
        self.config.noise.seed
    }

    fn base_path(&self) -> Result<crate::noise::WienerPath, NoiseError> {
        let n = &self.config.noise;
        sample_wiener(n.seed, n.t_min, n.t_max, n.dt)
    }
}

/// Runs the configured experiment, writes its tables under `config.output_dir`
/// and returns the PASS/FAIL checks.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Outcome, RunError> {
    let spec = ProblemSpec::from_params(config.model.params, config.model.truncation_radius)?;
    let mut ctx = Context {
        config,
        spec,
        tables: Vec::new(),
        checks: Vec::new(),
    };
    log::info!("running {} with seed {}", config.run.experiment, config.noise.seed);
    match config.run.experiment {
        Experiment::CheckAssumptions => check_assumptions(&mut ctx),
        Experiment::OuDiagnostics => ou_diagnostics(&mut ctx)?,
        Experiment::CocycleCheck => cocycle_check(&mut ctx)?,
        Experiment::Crossval => crossval(&mut ctx)?,
        Experiment::Absorb => absorb(&mut ctx)?,
        Experiment::Tail => tail(&mut ctx)?,
        Experiment::Pullback => pullback(&mut ctx)?,
        Experiment::Entropy => entropy(&mut ctx)?,
    }
    let files = write_tables(&config.output_dir, &ctx.tables)?;
    Ok(Outcome {
        checks: ctx.checks,
        files,
    })
}

fn check_assumptions(ctx: &mut Context) {
    let period = ctx.spec.period;
    let t_grid: Vec<f64> = (0..=200).map(|k| period * k as f64 / 200.0).collect();
    let x_grid: Vec<f64> = (0..=120).map(|k| -3.0 + 6.0 * k as f64 / 120.0).collect();
    let rep = assumptions_check(&ctx.spec, &t_grid, &x_grid);
    let consts = derive_constants(&ctx.spec);

    let mut summary = Table::new("assumptions.csv", &["quantity", "value"]);
    let mut quantities = vec![
        ("nu_min", rep.nu_min),
        ("nu_max", rep.nu_max),
        ("lambda_min", rep.lambda_min),
        ("lambda_max", rep.lambda_max),
        ("worst_dissipativity", rep.worst_dissipativity),
        ("worst_monotonicity", rep.worst_monotonicity),
        ("worst_modulus", rep.worst_modulus),
        ("worst_forcing", rep.worst_forcing),
        ("lambda_tilde", rep.lambda_tilde),
    ];
    if let Ok(c) = &consts {
        quantities.extend([
            ("lambda_hat", c.lambda_hat),
            ("alpha_norm", c.alpha_sup_norm.value),
            ("g_norm", c.g_sup_norm.value),
            ("forcing_weight", c.forcing_weight(ctx.spec.coefficients.lambda0)),
        ]);
    }
    for (q, v) in quantities {
        summary.push(vec![q.to_owned(), real(v)]);
    }
    let mut violations = Table::new("violations.csv", &["assumption", "site", "x", "t", "detail"]);
    let opt = |x: Option<f64>| x.map(real).unwrap_or_default();
    for v in &rep.violations {
        violations.push(vec![
            v.assumption.to_string(),
            v.site.map(|s| s.to_string()).unwrap_or_default(),
            opt(v.x),
            opt(v.t),
            v.detail.clone(),
        ]);
    }
    let detail = if rep.passed() {
        format!("lambda_tilde = {:.6}", rep.lambda_tilde)
    } else {
        rep.violations.iter().map(|v| format!("{}: {}", v.assumption, v.detail)).collect::<Vec<_>>().join("; ")
    };
    ctx.check("assumptions", rep.passed() && consts.is_ok(), detail);
    ctx.tables.push(summary);
    ctx.tables.push(violations);
}

fn ou_diagnostics(ctx: &mut Context) -> Result<(), RunError> {
    let run = &ctx.config.run;
    let dt = ctx.config.noise.dt;
    let tol = run.tol;
    let window = (-(100.0 * dt).max(dt), 0.0);
    let samples = stationary_ensemble(ctx.seed(), OU_LAW_SAMPLES, window, dt, 0.0)?;
    let m = moments(&samples);
    let mut law = Table::new("ou_moments.csv", &["count", "mean", "variance", "mean_abs", "skewness", "kurtosis"]);
    law.push(vec![
        m.count.to_string(),
        real(m.mean),
        real(m.variance),
        real(m.mean_abs),
        real(m.skewness),
        real(m.kurtosis),
    ]);
    let var_target = STATIONARY_SD * STATIONARY_SD;
    let abs_target = 1.0 / std::f64::consts::PI.sqrt();
    let var_err = (m.variance - var_target).abs() / var_target;
    let abs_err = (m.mean_abs - abs_target).abs() / abs_target;

    let horizon = run.horizon;
    let mut tempered = Table::new(
        "temperedness.csv",
        &["path", "direction", "horizon", "z_ratio", "mean_z", "mean_abs_z"],
    );
    let (mut sum_z, mut sum_abs, mut max_ratio, mut rows) = (0.0, 0.0, 0.0f64, 0usize);
    let n = &ctx.config.noise;
    for j in 0..run.ensemble_size {
        let path = sample_wiener(sub_seed(n.seed, Stream::Split as u64, j as u64), n.t_min, n.t_max, dt)?;
        for row in temperedness_report(&ou_from_wiener(&path), &[horizon])? {
            let dir = match row.direction {
                Direction::Forward => "forward",
                Direction::Backward => "backward",
            };
            tempered.push(vec![
                j.to_string(),
                dir.to_owned(),
                real(row.horizon),
                real(row.z_ratio),
                real(row.mean_z),
                real(row.mean_abs_z),
            ]);
            sum_z += row.mean_z;
            sum_abs += row.mean_abs_z;
            max_ratio = max_ratio.max(row.z_ratio);
            rows += 1;
        }
    }
    let mean_z = sum_z / rows as f64;
    let mean_abs = sum_abs / rows as f64;

    ctx.check("ou-variance", var_err <= tol, format!("Var z = {:.5} (target 0.5, rel err {var_err:.4})", m.variance));
    ctx.check(
        "ou-mean-abs",
        abs_err <= tol,
        format!("E|z| = {:.5} (target {abs_target:.5}, rel err {abs_err:.4})", m.mean_abs),
    );
    ctx.check(
        "tempered-mean-abs",
        (MEAN_ABS_BAND.0..=MEAN_ABS_BAND.1).contains(&mean_abs),
        format!("mean (1/T) int |z| = {mean_abs:.5} over {rows} path halves, T = {horizon}"),
    );
    ctx.check(
        "tempered-endpoint",
        max_ratio <= ENDPOINT_RATIO_MAX,
        format!("max |z(theta_T omega)| / T = {max_ratio:.3e}"),
    );
    ctx.check(
        "tempered-mean",
        mean_z.abs() <= MEAN_Z_MAX,
        format!("mean (1/T) int z = {mean_z:.3e}"),
    );
    ctx.tables.push(law);
    ctx.tables.push(tempered);
    Ok(())
}

fn cocycle_check(ctx: &mut Context) -> Result<(), RunError> {
    let run = &ctx.config.run;
    let (t, tau, dt_ode, tol) = (run.horizon, run.tau, run.dt_ode, run.tol);
    let path = ctx.base_path()?;
    let ou = ou_from_wiener(&path);
    let radius = ctx.spec.truncation_radius;
    let v = InitialFamily::bounded(ctx.seed(), 1, 2.0, radius).members.remove(0);

    let identity = cocycle_transformed(&ctx.spec, &ou, 0.0, tau, &v, dt_ode)?;
    let identity_exact = identity.values() == v.values();
    let residual = cocycle_property_check(&ctx.spec, &path, t, t, tau, &v, dt_ode)?;
    let study = cocycle_convergence(&ctx.spec, &ou, 2.0 * t, tau, &v, dt_ode, 2)?;

    let mut conv = Table::new("convergence.csv", &["dt_ode", "difference", "order"]);
    for (k, d) in study.differences.iter().enumerate() {
        let order = if k == 0 { String::new() } else { real(study.orders[k - 1]) };
        conv.push(vec![real(study.steps[k]), real(*d), order]);
    }
    let mut summary = Table::new("cocycle.csv", &["quantity", "value"]);
    summary.push(vec!["identity_gap".into(), real(identity.distance(&v))]);
    summary.push(vec!["composition_residual".into(), real(residual)]);
    summary.push(vec!["min_order".into(), real(study.min_order())]);

    let traj = integrate_clocked(&ctx.spec, &ou, (tau, 0.0), t, &v, dt_ode)?;
    let mut states = Table::new("trajectory.csv", &[]);
    states.header = state_header("t", radius);
    for (time, s) in traj.times.iter().zip(&traj.states) {
        states.push(state_row(real(*time), s));
    }
    let mut noise = Table::new("noise_path.csv", &["t", "w", "z"]);
    for ((time, w), z) in path.grid().times().zip(path.values()).zip(ou.z_values()) {
        noise.push(vec![real(time), real(*w), real(*z)]);
    }

    ctx.check("cocycle-identity", identity_exact, "Phi(0, tau, omega) returns its argument bit for bit".into());
    ctx.check(
        "cocycle-composition",
        residual <= tol,
        format!("relative residual {residual:.3e} at t = s = {t}"),
    );
    ctx.check(
        "cocycle-order",
        study.min_order() >= MIN_ORDER,
        format!(
            "observed orders {:?} from steps {:?}",
            study.orders.iter().map(|o| (o * 100.0).round() / 100.0).collect::<Vec<_>>(),
            study.steps
        ),
    );
    ctx.tables.extend([summary, conv, states, noise]);
    Ok(())
}

fn crossval(ctx: &mut Context) -> Result<(), RunError> {
    let run = &ctx.config.run;
    let n = &ctx.config.noise;
    let radius = ctx.spec.truncation_radius;
    let family = InitialFamily::bounded(n.seed, run.ensemble_size, 2.0, radius);
    let mut table = Table::new("crossval.csv", &["path", "max_rel_error"]);
    let mut worst: f64 = 0.0;
    for (j, u0) in family.members.iter().enumerate() {
        let path = sample_wiener(sub_seed(n.seed, Stream::Split as u64, j as u64), n.t_min, n.t_max, n.dt)?;
        let cv = crossval_transform(&ctx.spec, &path, run.tau, run.horizon, u0, run.dt_ode)?;
        worst = worst.max(cv.max_rel_error);
        table.push(vec![j.to_string(), real(cv.max_rel_error)]);
    }
    ctx.check(
        "crossval",
        worst <= run.tol,
        format!("max relative error {worst:.3e} over {} paths, dt = {}", run.ensemble_size, run.dt_ode),
    );
    ctx.tables.push(table);
    Ok(())
}

fn bounded_family(ctx: &Context) -> InitialFamily {
    InitialFamily::bounded(
        ctx.seed(),
        ctx.config.run.ensemble_size,
        FAMILY_NORM,
        ctx.spec.truncation_radius,
    )
}

fn absorb(ctx: &mut Context) -> Result<(), RunError> {
    let run = &ctx.config.run;
    let dt = ctx.config.noise.dt;
    let path = ctx.base_path()?;
    let ou = ou_from_wiener(&path);
    let family = bounded_family(ctx);
    let est = pullback_absorption_test(&ctx.spec, &ou, run.tau, &run.t_list, &family, run.dt_ode, run.truncation)?;
    let longer = absorbing_radius(&ctx.spec, &ou, 4.0 * run.truncation / 3.0, dt)?;
    let drift = (est.radius - longer.radius).abs() / longer.radius;

    let mut table = Table::new("absorb.csv", &["t", "member", "norm", "R", "entry_time"]);
    for (k, &t) in est.t_list.iter().enumerate() {
        for (m, &norm) in est.norms[k].iter().enumerate() {
            let entry = est.entry_times[m].map(real).unwrap_or_else(|| "inf".into());
            table.push(vec![real(t), m.to_string(), real(norm), real(est.radius), entry]);
        }
    }
    let mut envelope = Table::new("absorb_envelope.csv", &["t", "bound_sq"]);
    for &(t, b) in &est.envelope {
        envelope.push(vec![real(t), real(b)]);
    }

    let mut gronwall = Table::new("gronwall.csv", &["member", "max_violation", "max_violation_lambda_hat"]);
    let mut worst = f64::NEG_INFINITY;
    for (m, v0) in family.members.iter().take(ENVELOPE_MEMBERS).enumerate() {
        let traj = integrate_clocked(&ctx.spec, &ou, (run.tau, 0.0), run.horizon, v0, run.dt_ode)?;
        let check = gronwall_envelope_check(&traj, &ctx.spec, &ou)?;
        worst = worst.max(check.max_violation);
        gronwall.push(vec![m.to_string(), real(check.max_violation), real(check.max_violation_lambda_hat)]);
    }

    let t_max = run.max_pullback_time();
    let last = est.norms.last().map(|r| r.iter().copied().fold(0.0, f64::max)).unwrap_or(0.0);
    ctx.check(
        "absorbed",
        est.absorbed_at_end(),
        format!(
            "max norm {last:.4} vs R = {:.6} at t = {t_max}; T_B = {}",
            est.radius,
            est.t_b.map_or("none".into(), |t| t.to_string())
        ),
    );
    ctx.check(
        "radius-stable",
        drift < RADIUS_STABILITY,
        format!("R(S = {}) = {:.8}, R(S = {}) = {:.8}", run.truncation, est.radius, longer.integral_truncation, longer.radius),
    );
    ctx.check(
        "gronwall-envelope",
        worst <= run.tol,
        format!("max relative violation {worst:.3e} over {} members, T = {}", gronwall.rows.len(), run.horizon),
    );
    ctx.tables.extend([table, envelope, gronwall]);
    Ok(())
}

fn tail(ctx: &mut Context) -> Result<(), RunError> {
    let run = &ctx.config.run;
    let ou = ou_from_wiener(&ctx.base_path()?);
    let family = bounded_family(ctx);
    let rep = tail_decay_test(&ctx.spec, &ou, run.tau, run.max_pullback_time(), &run.epsilons, &family, run.dt_ode)?;
    let mut table = Table::new("tail.csv", &["epsilon", "I0"]);
    let mut weighted = Table::new(
        "tail_weighted.csv",
        &["epsilon", "I0", "tail_mass", "cutoff", "weighted_mass", "sharp_mass"],
    );
    for r in &rep.rows {
        table.push(vec![real(r.epsilon), r.i0.to_string()]);
        weighted.push(vec![
            real(r.epsilon),
            r.i0.to_string(),
            real(r.tail_mass),
            r.weighted_cutoff.to_string(),
            real(r.weighted_mass),
            real(r.sharp_mass),
        ]);
    }
    ctx.check("tail-monotone", rep.monotone(), "I0 non-increasing in epsilon".into());
    ctx.check(
        "tail-slope",
        (TAIL_SLOPE_BAND.0..=TAIL_SLOPE_BAND.1).contains(&rep.slope),
        format!("slope of I0 against log2(1/epsilon) = {:.4}", rep.slope),
    );
    ctx.check(
        "tail-weighted-bound",
        rep.weighted_bound_holds(),
        "sum_{|i|>=2N} v_i^2 <= sum rho(|i|/N) v_i^2 <= epsilon^2 at every epsilon".into(),
    );
    ctx.tables.extend([table, weighted]);
    Ok(())
}

fn is_zero_forcing(ctx: &Context) -> bool {
    let p = ctx.config.model.params;
    p.forcing_scale == 0.0 && p.beta == 0.0
}

fn pullback(ctx: &mut Context) -> Result<(), RunError> {
    let run = &ctx.config.run;
    let dt = ctx.config.noise.dt;
    let path = ctx.base_path()?;
    let ou = ou_from_wiener(&path);
    let radius = absorbing_radius(&ctx.spec, &ou, run.truncation, dt)?.radius;
    let family = InitialFamily::ball(ctx.seed(), run.ensemble_size, radius, ctx.spec.truncation_radius);
    let est = pullback_attractor_sample(&ctx.spec, &ou, run.tau, &run.t_list, &family, run.dt_ode, run.tol)?;
    let inv = invariance_gap(&ctx.spec, &path, &est, INVARIANCE_DELTA, &family, run.dt_ode)?;

    let mut gaps = Table::new("pullback.csv", &["t", "gap"]);
    for (k, g) in est.cauchy_gaps.iter().enumerate() {
        gaps.push(vec![real(est.t_list[k + 1]), real(*g)]);
    }
    ctx.tables.push(gaps);
    for (t, cloud) in est.t_list.iter().zip(&est.clouds) {
        let mut table = Table::new(cloud_file_name(*t), &[]);
        table.header = state_header("member", ctx.spec.truncation_radius);
        for (m, v) in cloud.iter().enumerate() {
            table.push(state_row(m.to_string(), v));
        }
        ctx.tables.push(table);
    }

    let last_gap = est.cauchy_gaps.last().copied().unwrap_or(f64::INFINITY);
    ctx.check(
        "pullback-gap",
        last_gap < run.tol,
        format!(
            "final Hausdorff gap {last_gap:.3e} at t = {}; converged at {}; gaps decreasing: {}",
            run.max_pullback_time(),
            est.converged_at.map_or("none".into(), |t| t.to_string()),
            est.gaps_decrease(0.1, 1e-12)
        ),
    );
    if is_zero_forcing(ctx) {
        let r = est.final_radius();
        ctx.check("attractor-radius", r <= ZERO_FORCING_RADIUS, format!("final cloud radius {r:.3e}"));
    }
    ctx.check(
        "invariance",
        inv <= INVARIANCE_FACTOR * run.tol,
        format!("dist(Phi(1) A(tau), A(tau + 1)) = {inv:.3e}"),
    );
    Ok(())
}

fn entropy(ctx: &mut Context) -> Result<(), RunError> {
    let run = &ctx.config.run;
    let dt = ctx.config.noise.dt;
    let ou = ou_from_wiener(&ctx.base_path()?);
    let radius = absorbing_radius(&ctx.spec, &ou, run.truncation, dt)?.radius;
    let family = InitialFamily::ball(ctx.seed(), run.ensemble_size, radius, ctx.spec.truncation_radius);
    let t = run.max_pullback_time();
    let cloud = crate::cocycle::pullback_images(&ctx.spec, &ou, run.tau, t, &family.members, run.dt_ode)?;
    let rep = entropy_report(&cloud, &run.epsilons)?;
    let mut table = Table::new("entropy.csv", &["epsilon", "I0", "r0", "n_eps", "bound"]);
    for r in &rep.rows {
        table.push(vec![real(r.epsilon), r.i0.to_string(), real(r.r0), r.n_eps.to_string(), real(r.bound)]);
    }
    let detail = rep
        .rows
        .iter()
        .map(|r| format!("eps {}: ln n = {:.4} <= {:.4}", r.epsilon, (r.n_eps as f64).ln(), r.bound))
        .collect::<Vec<_>>()
        .join("; ");
    ctx.check("entropy-bound", rep.holds(), detail);
    ctx.tables.push(table);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_carry_seventeen_digits() {
        assert_eq!(real(1.4375), "1.4375000000000000e0");
        assert_eq!(real(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(real(-2.0 / 3.0).parse::<f64>().unwrap(), -2.0 / 3.0);
    }

    #[test]
    fn cloud_names() {
        assert_eq!(cloud_file_name(40.0), "cloud_40.csv");
        assert_eq!(cloud_file_name(2.5), "cloud_2.5.csv");
    }

    #[test]
    fn duplicate_tables_are_rejected() {
        let dir = std::env::temp_dir().join("pullback-lattice-collision");
        let t = Table::new("a.csv", &["x"]);
        assert!(matches!(write_tables(&dir, &[t.clone(), t]), Err(RunError::Collision(_))));
    }
}
