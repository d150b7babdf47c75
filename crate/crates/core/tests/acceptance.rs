//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::sync::Arc;

use pullback_lattice::attractor::{
    absorbing_radius, covering_number, entropy_bound, entropy_report, gronwall_envelope_check, invariance_gap,
    pullback_absorption_test, pullback_attractor_sample, tail_decay_test, InitialFamily,
};
use pullback_lattice::cocycle::{
    cocycle_convergence, cocycle_property_check, cocycle_transformed, crossval_transform, integrate_clocked,
};
use pullback_lattice::model::{LatticeVector, ModelParams, ProblemSpec};
use pullback_lattice::noise::{
    moments, ou_from_wiener, sample_wiener, stationary_ensemble, temperedness_report, TimeGrid, WienerPath,
};
use pullback_lattice::seeds::sub_seed;

const N_LAT: usize = 64;
const DT: f64 = 1e-3;
const T_LIST: [f64; 4] = [5.0, 10.0, 20.0, 40.0];

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn canonical() -> ProblemSpec {
    ProblemSpec::canonical(N_LAT)
}

fn ou_law() -> Verdict {
    let samples = stationary_ensemble(11, 100_000, (-0.1, 0.0), DT, 0.0).map_err(|e| e.to_string())?;
    let m = moments(&samples);
    let abs_target = 1.0 / PI.sqrt();
    let var_err = (m.variance - 0.5).abs() / 0.5;
    let abs_err = (m.mean_abs - abs_target).abs() / abs_target;
    verdict(
        m.count >= 10_000 && var_err <= 0.03 && abs_err <= 0.03,
        format!(
            "{} samples: Var z = {:.5} (rel err {var_err:.4}), E|z| = {:.5} vs 1/sqrt(pi) = {abs_target:.5} (rel err {abs_err:.4})",
            m.count, m.variance, m.mean_abs
        ),
    )
}

fn temperedness() -> Verdict {
    let horizon = 2000.0;
    let (mut sum_abs, mut sum_z, mut worst_ratio, mut n) = (0.0, 0.0, 0.0f64, 0.0);
    for j in 0..20u64 {
        let path = sample_wiener(sub_seed(21, 4, j), -2001.0, 2001.0, DT).map_err(|e| e.to_string())?;
        for row in temperedness_report(&ou_from_wiener(&path), &[horizon]).map_err(|e| e.to_string())? {
            sum_abs += row.mean_abs_z;
            sum_z += row.mean_z;
            worst_ratio = worst_ratio.max(row.z_ratio);
            n += 1.0;
        }
    }
    let (mean_abs, mean_z) = (sum_abs / n, sum_z / n);
    verdict(
        (0.536..=0.593).contains(&mean_abs) && worst_ratio <= 0.01 && mean_z.abs() <= 0.02,
        format!("20 paths, T = 2000: mean (1/T) int |z| = {mean_abs:.5}, max |z(theta_T)|/T = {worst_ratio:.2e}, mean (1/T) int z = {mean_z:.2e}"),
    )
}

fn cocycle_axioms() -> Verdict {
    let spec = canonical();
    let path = sample_wiener(31, -1.0, 3.0, DT).map_err(|e| e.to_string())?;
    let ou = ou_from_wiener(&path);
    let v = InitialFamily::bounded(31, 1, 2.0, N_LAT).members.remove(0);
    let id = cocycle_transformed(&spec, &ou, 0.0, 0.3, &v, DT).map_err(|e| e.to_string())?;
    let identity = id.values() == v.values();
    let residual = cocycle_property_check(&spec, &path, 1.0, 1.0, 0.3, &v, DT).map_err(|e| e.to_string())?;
    let study = cocycle_convergence(&spec, &ou, 2.0, 0.3, &v, DT, 2).map_err(|e| e.to_string())?;
    verdict(
        identity && residual <= 1e-6 && study.min_order() >= 3.0,
        format!(
            "Phi(0) = id bitwise: {identity}; composition residual {residual:.2e} at t = s = 1; orders {:.3?}",
            study.orders
        ),
    )
}

fn conjugation_consistency() -> Verdict {
    let spec = canonical();
    let family = InitialFamily::bounded(41, 10, 2.0, N_LAT);
    let mut worst: f64 = 0.0;
    for (j, u0) in family.members.iter().enumerate() {
        let path = sample_wiener(sub_seed(41, 4, j as u64), -1.0, 1.0, 1e-4).map_err(|e| e.to_string())?;
        let cv = crossval_transform(&spec, &path, 0.0, 1.0, u0, 1e-4).map_err(|e| e.to_string())?;
        worst = worst.max(cv.max_rel_error);
    }
    verdict(worst <= 1e-2, format!("10 paths on [0, 1], dt = 1e-4: max relative l2 error {worst:.3e}"))
}

fn gronwall_envelope() -> Verdict {
    let spec = canonical();
    let mut worst = f64::NEG_INFINITY;
    for j in 0..10u64 {
        let path = sample_wiener(sub_seed(51, 4, j), -1.0, 10.0, DT).map_err(|e| e.to_string())?;
        let ou = ou_from_wiener(&path);
        let v0 = InitialFamily::bounded(51 + j, 1, 10.0, N_LAT).members.remove(0);
        let traj = integrate_clocked(&spec, &ou, (0.0, 0.0), 10.0, &v0, DT).map_err(|e| e.to_string())?;
        let check = gronwall_envelope_check(&traj, &spec, &ou).map_err(|e| e.to_string())?;
        worst = worst.max(check.max_violation);
    }
    // Reaction with x f(x) unbounded below pumps energy faster than the envelope allows.
    let mut mutant = ProblemSpec::canonical(8);
    mutant.nonlinearity.f = Arc::new(|_, x: f64, _| -x * x * x);
    let path = sample_wiener(52, -1.0, 1.0, DT).map_err(|e| e.to_string())?;
    let ou = ou_from_wiener(&path);
    let v0 = LatticeVector::unit(8, 0).scaled(5.0);
    let traj = integrate_clocked(&mutant, &ou, (0.0, 0.0), 0.005, &v0, 1e-4).map_err(|e| e.to_string())?;
    let mutant_violation = gronwall_envelope_check(&traj, &mutant, &ou).map_err(|e| e.to_string())?.max_violation;
    verdict(
        worst <= 1e-6 && mutant_violation > 0.0,
        format!("max violation {worst:.2e} over 10 paths, T = 10; f = -x^3 mutant violation {mutant_violation:.3e}"),
    )
}

fn pullback_absorption() -> Verdict {
    let spec = canonical();
    let mut notes = Vec::new();
    let mut ok = true;
    for seed in 0..5u64 {
        let path = sample_wiener(61 + seed, -101.0, 1.0, DT).map_err(|e| e.to_string())?;
        let ou = ou_from_wiener(&path);
        let family = InitialFamily::bounded(61 + seed, 64, 10.0, N_LAT);
        let est =
            pullback_absorption_test(&spec, &ou, 0.0, &T_LIST, &family, DT, 60.0).map_err(|e| e.to_string())?;
        let longer = absorbing_radius(&spec, &ou, 80.0, DT).map_err(|e| e.to_string())?;
        let drift = (est.radius - longer.radius).abs() / longer.radius;
        let inside = est.norms[3].iter().filter(|&&n| est.inside(n)).count();
        ok &= inside == 64 && drift < 1e-3 && family.max_norm() <= 10.0 + 1e-12;
        notes.push(format!("seed {seed}: {inside}/64 inside R = {:.4}, S drift {drift:.1e}", est.radius));
    }
    verdict(ok, notes.join("; "))
}

fn radius_pin() -> Verdict {
    // Oracle: R^2 = 1 + (2 |||alpha|||^2 + |||g|||^2 / lambda_0) / lambda_hat for z = 0,
    // with the norms summed over the whole lattice.
    let g_sq: f64 = (-200i32..=200).map(|i| 4f64.powi(-i.abs())).sum();
    let alpha_sq: f64 = (-200i32..=200).map(|i| (0.25 * 2f64.powi(-i.abs())).powi(2)).sum();
    let weight = 2.0 * alpha_sq + g_sq / 2.5;
    let oracle = 1.0 + weight / 2.0;
    let ou = ou_from_wiener(&WienerPath::degenerate(TimeGrid::new(-61.0, 1.0, DT).map_err(|e| e.to_string())?));
    let est = absorbing_radius(&canonical(), &ou, 60.0, DT).map_err(|e| e.to_string())?;
    verdict(
        (oracle - 1.4375).abs() < 1e-12 && (est.radius_sq - 1.4375).abs() <= 1e-3,
        format!("quadrature R^2 = {:.10}, closed form {oracle}", est.radius_sq),
    )
}

fn tail_nullness() -> Verdict {
    let spec = canonical();
    let path = sample_wiener(71, -101.0, 1.0, DT).map_err(|e| e.to_string())?;
    let ou = ou_from_wiener(&path);
    let family = InitialFamily::bounded(71, 64, 10.0, N_LAT);
    let eps: Vec<f64> = (1..=20).map(|k| 0.5f64.powi(k)).collect();
    let rep = tail_decay_test(&spec, &ou, 0.0, 40.0, &eps, &family, DT).map_err(|e| e.to_string())?;
    let i0: Vec<usize> = rep.rows.iter().map(|r| r.i0).collect();
    verdict(
        rep.monotone() && (0.8..=1.2).contains(&rep.slope) && rep.weighted_bound_holds(),
        format!(
            "I0 over eps = 2^-1..2^-20: {i0:?}; slope {:.4}; weighted bound holds: {}",
            rep.slope,
            rep.weighted_bound_holds()
        ),
    )
}

fn attractor_convergence() -> Verdict {
    let tol = 1e-3;
    let spec = canonical();
    let path = sample_wiener(81, -101.0, 2.0, DT).map_err(|e| e.to_string())?;
    let ou = ou_from_wiener(&path);
    let radius = absorbing_radius(&spec, &ou, 60.0, DT).map_err(|e| e.to_string())?.radius;
    let family = InitialFamily::ball(81, 64, radius, N_LAT);
    let est = pullback_attractor_sample(&spec, &ou, 0.0, &T_LIST, &family, DT, tol).map_err(|e| e.to_string())?;
    let last_gap = *est.cauchy_gaps.last().unwrap();
    let inv = invariance_gap(&spec, &path, &est, 1.0, &family, DT).map_err(|e| e.to_string())?;

    let zero = ProblemSpec::from_params(ModelParams::ZERO_FORCING, N_LAT).map_err(|e| e.to_string())?;
    let zf_family = InitialFamily::ball(82, 64, 10.0, N_LAT);
    let zf = pullback_attractor_sample(&zero, &ou, 0.0, &T_LIST, &zf_family, DT, tol).map_err(|e| e.to_string())?;
    let zf_radius = zf.final_radius();
    verdict(
        last_gap < tol && zf_radius <= 1e-4 && inv <= 3.0 * tol,
        format!(
            "gaps [{}]; zero-forcing cloud radius {zf_radius:.2e}; invariance {inv:.2e}",
            est.cauchy_gaps.iter().map(|g| format!("{g:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn entropy() -> Verdict {
    let pins = entropy_bound(0, 1.0, 2.0) == 2f64.ln() && entropy_bound(1, 1.0, 1.0) == 3.0 * 4f64.ln();
    let spec = canonical();
    let path = sample_wiener(91, -101.0, 1.0, DT).map_err(|e| e.to_string())?;
    let ou = ou_from_wiener(&path);
    let radius = absorbing_radius(&spec, &ou, 60.0, DT).map_err(|e| e.to_string())?.radius;
    let family = InitialFamily::ball(91, 64, radius, N_LAT);
    let cloud = pullback_lattice::cocycle::pullback_images(&spec, &ou, 0.0, 40.0, &family.members, DT)
        .map_err(|e| e.to_string())?;
    let rep = entropy_report(&cloud, &[0.5, 0.25, 0.1]).map_err(|e| e.to_string())?;
    // Independent count: the covering number is at most the cloud size and at least 1.
    let sane = rep.rows.iter().all(|r| r.n_eps >= 1 && r.n_eps == covering_number(&cloud, r.epsilon));
    let rows: Vec<String> = rep
        .rows
        .iter()
        .map(|r| format!("eps {}: ln n = {:.3} <= {:.3}", r.epsilon, (r.n_eps as f64).ln(), r.bound))
        .collect();
    verdict(
        pins && sane && rep.holds(),
        format!("pins ln 2, 3 ln 4 exact: {pins}; {}", rows.join(", ")),
    )
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = tmp.path().join("config.json");
    fs::write(
        &cfg,
        r#"{"model": {"name": "canonical"}, "noise": {"seed": 7}, "run": {"experiment": "pullback", "t_list": [1, 2, 4], "ensemble_size": 8}}"#,
    )
    .map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_pullback-lattice"))
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out-dir")
            .arg(&dir)
            .output()
            .map_err(|e| e.to_string())?
            .status;
        if status.code() == Some(1) {
            return Err(format!("run {name} failed"));
        }
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
            .map_err(|e| e.to_string())?
            .map(|e| {
                let p = e.unwrap().path();
                (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
            })
            .collect();
        files.sort();
        outputs.push(files);
    }
    let count = outputs[0].len();
    verdict(
        count > 0 && outputs[0] == outputs[1],
        format!("{count} CSVs compared byte for byte across two invocations"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("ou-law", ou_law),
        ("temperedness", temperedness),
        ("cocycle-axioms", cocycle_axioms),
        ("conjugation-consistency", conjugation_consistency),
        ("gronwall-envelope", gronwall_envelope),
        ("pullback-absorption", pullback_absorption),
        ("radius-pin", radius_pin),
        ("tail-nullness", tail_nullness),
        ("attractor-convergence", attractor_convergence),
        ("entropy", entropy),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
