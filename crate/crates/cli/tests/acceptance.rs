//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use frgrav::dynamics::RhsOptions;
use frgrav::experiments::{
    kappa_sweep, kg_dispersion, linear_energy_drift, mixed_linear_data, nonlinear_energy_growth, picard_experiment,
    propagation, DispersionConfig, Levels, SweepConfig,
};
use frgrav::fields::{Grid, GridFunction};
use frgrav::identities::{run_suite, IdentityOptions};
use frgrav::initialdata::{build, DataSpec};
use frgrav::norms::{comparison_distance, e_minus1, x_norm};
use frgrav::solver::EvolveConfig;
use frgrav::FRModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), frgrav::Error>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn identities() -> Outcome {
    let report = run_suite(&IdentityOptions::default())?;
    let detail = report
        .results
        .iter()
        .map(|r| match r.rate {
            Some(rate) => format!("{}={:.2e} (rate {rate:.2})", r.name, r.residual),
            None => format!("{}={:.2e}", r.name, r.residual),
        })
        .collect::<Vec<_>>()
        .join(", ");
    Ok((report.all_passed(), detail))
}

fn dispersion() -> Outcome {
    let r = kg_dispersion(&DispersionConfig::default())?;
    let expected = 2f64.sqrt();
    let rel = (r.omega / expected - 1.0).abs();
    Ok((rel <= 0.01, format!("omega={:.6} expected={expected:.6} rel={rel:.2e}", r.omega)))
}

fn propagation_criterion() -> Outcome {
    let model = FRModel::new(0.1)?;
    let spec = DataSpec::closed_bump(1e-3, 1.0);
    let run = |n: usize| {
        let grid = Grid::one_d(n, -10.0, 10.0)?;
        propagation(&model, &spec, grid, 1.0, n / 64, RhsOptions::default())
    };
    let fine = run(1024)?;
    let coarse = run(512)?;
    let lo = 16.0 * 0.75;
    let hi = 16.0 * 1.25;
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, name) in Levels::NAMES.iter().enumerate() {
        let (init, sup) = (fine.initial.values()[k], fine.sup.values()[k]);
        let growth = sup / init;
        let ratio = coarse.sup.values()[k] / sup;
        ok &= growth <= 10.0 && (lo..=hi).contains(&ratio);
        parts.push(format!("{name}: sup/init={growth:.2} refine={ratio:.2}"));
    }
    Ok((ok, parts.join(", ")))
}

fn sweep() -> Outcome {
    let cfg = SweepConfig {
        kappas: vec![1e-1, 1e-2, 1e-3],
        data: DataSpec::closed_bump(1e-3, 1.0),
        grid: Grid::one_d(1024, -10.0, 10.0)?,
        t_end: 1.0,
        stride: 1,
        order: 1,
        ablate_kappa_terms: false,
    };
    let r = kappa_sweep(&cfg)?;
    let slope = r.slope.unwrap_or(f64::NAN);
    let table = r.rows.iter().map(|row| format!("D({:.0e})={:.3e}", row.kappa, row.sup_distance)).collect::<Vec<_>>();
    Ok((slope >= 0.45, format!("slope={slope:.3}, {}", table.join(", "))))
}

fn picard() -> Outcome {
    let model = FRModel::new(0.1)?;
    let grid = Grid::one_d(1024, -10.0, 10.0)?;
    let s0 = build(&DataSpec::scalar_bump(1e-3, 1.0), grid, &model)?;
    let cfg = EvolveConfig { t_end: 0.25, ..EvolveConfig::default() };
    let r = picard_experiment(&model, &cfg, &s0)?;
    let bound = 5.0 * cfg.tolerance;
    let ok = r.result.converged && r.max_ratio <= 0.6 && r.rk4_distance <= bound;
    Ok((
        ok,
        format!(
            "iterations={} max_lambda={:.3} |picard-rk4|={:.2e} (bound {bound:.1e})",
            r.result.iterations, r.max_ratio, r.rk4_distance
        ),
    ))
}

fn energy() -> Outcome {
    let model = FRModel::new(0.1)?;
    let grid = Grid::one_d(512, -10.0, 10.0)?;
    let linear = mixed_linear_data(&model, grid, 1e-3, 1.0)?;
    let drift = linear_energy_drift(&model, &linear, 10.0, 16)?;
    let s0 = build(&DataSpec::scalar_bump(1e-3, 1.0), grid, &model)?;
    let cfg = EvolveConfig { t_end: 10.0, stride: 16, ..EvolveConfig::default() };
    let growth = nonlinear_energy_growth(&model, &cfg, &s0)?;
    let ok = drift.max_relative_drift <= 1e-6 && growth.envelope_rate <= 0.1;
    Ok((ok, format!("linear drift={:.2e}, nonlinear C*eps={:.2e}", drift.max_relative_drift, growth.envelope_rate)))
}

fn random_field(rng: &mut ChaCha8Rng, grid: Grid) -> GridFunction {
    let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
    GridFunction { grid, values: (0..grid.len()).map(|_| scale * rng.gen_range(-1.0..1.0)).collect() }
}

fn norm_layer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = Grid::three_d(8, -1.0, 1.0)?;
    let mut failures = 0usize;
    for _ in 0..1000 {
        let u = random_field(&mut rng, grid);
        let v = random_field(&mut rng, grid);
        let lambda = rng.gen_range(-5.0..5.0);
        let scaled = u.map(|x| lambda * x);
        let sum = u.zip_with(&v, |a, b| a + b)?;
        for d in 0..=2 {
            let (nu, nv) = (x_norm(&u, d), x_norm(&v, d));
            let homogeneous = (x_norm(&scaled, d) - lambda.abs() * nu).abs() <= 1e-12 * lambda.abs() * nu;
            let triangle = x_norm(&sum, d) <= (nu + nv) * (1.0 + 1e-12);
            failures += usize::from(!homogeneous) + usize::from(!triangle);
        }
        let (eu, ev) = (e_minus1(&u), e_minus1(&v));
        failures += usize::from((e_minus1(&scaled) - lambda.abs() * eu).abs() > 1e-12 * lambda.abs() * eu);
        failures += usize::from(e_minus1(&sum) > (eu + ev) * (1.0 + 1e-12));
    }

    let g = Grid::three_d(48, -6.0, 6.0)?;
    let gauss = g.sample(|x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp());
    let l2 = x_norm(&gauss, 0);
    let expected = (PI / 2.0).powf(0.75);
    let gauss_ok = (l2 - expected).abs() <= 1e-10;

    let ratio = |n: usize| -> Result<f64, frgrav::Error> {
        let g = Grid::three_d(n, -8.0, 8.0)?;
        let u = g.sample(|x| {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            (1.0 + r) * (-r * r / 4.0).exp()
        });
        Ok(e_minus1(&u) / x_norm(&u, 2))
    };
    let (r32, r64) = (ratio(32)?, ratio(64)?);
    let sobolev = (r32 / r64 - 1.0).abs();

    // the comparison distance is a metric on states
    let model = FRModel::new(0.1)?;
    let g1 = Grid::one_d(256, -10.0, 10.0)?;
    let a = build(&DataSpec::scalar_bump(1e-3, 2.0), g1, &model)?;
    let b = build(&DataSpec::scalar_bump(5e-4, 1.0), g1, &model)?;
    let dist_ok = comparison_distance(&a, &a, 1)? == 0.0
        && (comparison_distance(&a, &b, 1)? - comparison_distance(&b, &a, 1)?).abs() <= 1e-15;

    let ok = failures == 0 && gauss_ok && sobolev <= 0.01 && dist_ok;
    Ok((
        ok,
        format!(
            "property failures={failures}/1000 fields, gaussian L2={l2:.10} (expected {expected:.10}), \
             sobolev ratio N32/N64 deviation={sobolev:.2e}"
        ),
    ))
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "identity suite", budget: Duration::from_secs(60), run: identities },
        Criterion { id: 2, name: "Klein-Gordon dispersion", budget: Duration::from_secs(30), run: dispersion },
        Criterion { id: 3, name: "residual propagation", budget: Duration::from_secs(120), run: propagation_criterion },
        Criterion { id: 4, name: "kappa-sweep scaling", budget: Duration::from_secs(300), run: sweep },
        Criterion { id: 5, name: "Picard contraction", budget: Duration::from_secs(180), run: picard },
        Criterion { id: 6, name: "energy behavior", budget: Duration::from_secs(120), run: energy },
        Criterion { id: 7, name: "norm layer", budget: Duration::from_secs(60), run: norm_layer },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= c.budget;
        let (passed, detail) = match outcome {
            Ok((ok, detail)) => (ok && in_budget, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failed += 1;
        }
        println!(
            "{} criterion {} ({}): {detail}; runtime {:.1}s (limit {}s)",
            if passed { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            elapsed.as_secs_f64(),
            c.budget.as_secs()
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
