//! Experiment drivers shared by the command-line tool and the acceptance suite.

use rayon::prelude::*;

use crate::dynamics::{ResidualReport, RhsOptions};
use crate::error::{Error, Result};
use crate::fields::{slot, sum, FieldState, Grid};
use crate::frmodel::FRModel;
use crate::initialdata::{build, DataSpec, Family};
use crate::norms::{comparison_distance, energy, energy_c};
use crate::solver::{evolve, evolve_frozen, picard_solve, EvolveConfig, PicardResult, Trajectory};

/// Linear dispersion of the conformal-factor sector.
#[derive(Clone, Copy, Debug)]
pub struct DispersionConfig {
    pub kappa: f64,
    pub amplitude: f64,
    pub n: usize,
    pub mode: usize,
    pub t_end: f64,
}

impl Default for DispersionConfig {
    fn default() -> Self {
        Self { kappa: 1.0 / 3.0, amplitude: 1e-6, n: 1024, mode: 1, t_end: 1.0 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DispersionResult {
    pub omega: f64,
    pub expected: f64,
    pub relative_error: f64,
}

/// Evolves ϱ = A cos(kx) on [0, 2π) and reads ω off the projections of ϱ
/// and ∂_tϱ onto cos(kx): for a harmonic mode a = A cos ωt, b = −Aω sin ωt,
/// so ω² = b²/(A² − a²).
pub fn kg_dispersion(cfg: &DispersionConfig) -> Result<DispersionResult> {
    let model = FRModel::new(cfg.kappa)?;
    let grid = Grid::one_d(cfg.n, 0.0, std::f64::consts::TAU)?;
    let spec = DataSpec { family: Family::RhoWave, amplitude: cfg.amplitude, mode: cfg.mode, ..DataSpec::default() };
    let s0 = build(&spec, grid, &model)?;
    let ecfg = EvolveConfig { t_end: cfg.t_end, stride: usize::MAX, ..EvolveConfig::default() };
    let traj = evolve(&model, &ecfg, &s0)?.into_result()?;
    let k = cfg.mode as f64;
    let basis: Vec<f64> = (0..grid.len()).map(|i| (k * grid.coords(i)[0]).cos()).collect();
    let norm = sum(&basis.iter().map(|c| c * c).collect::<Vec<_>>());
    let project = |v: &[f64]| sum(&v.iter().zip(&basis).map(|(a, c)| a * c).collect::<Vec<_>>()) / norm;
    let a0 = project(s0.field(slot::RHO));
    let a = project(traj.last.field(slot::RHO));
    let b = project(traj.last.field(slot::RHOT));
    let omega = (b * b / (a0 * a0 - a * a)).sqrt();
    let expected = (k * k + model.mass_squared()).sqrt();
    Ok(DispersionResult { omega, expected, relative_error: (omega / expected - 1.0).abs() })
}

/// Residual levels compared across a run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Levels {
    pub gauge: f64,
    pub augmentation: f64,
    pub hamiltonian: f64,
    pub momentum: f64,
    pub matter: f64,
}

impl Levels {
    pub const NAMES: [&'static str; 5] = ["gauge", "augmentation", "hamiltonian", "momentum", "matter"];

    pub fn of(r: &ResidualReport) -> Self {
        Self {
            gauge: r.gauge_l2(),
            augmentation: r.augmentation.l2,
            hamiltonian: r.hamiltonian.l2,
            momentum: r.momentum_l2(),
            matter: r.matter.l2,
        }
    }

    pub fn values(&self) -> [f64; 5] {
        [self.gauge, self.augmentation, self.hamiltonian, self.momentum, self.matter]
    }

    pub fn max(&self, o: &Self) -> Self {
        Self {
            gauge: self.gauge.max(o.gauge),
            augmentation: self.augmentation.max(o.augmentation),
            hamiltonian: self.hamiltonian.max(o.hamiltonian),
            momentum: self.momentum.max(o.momentum),
            matter: self.matter.max(o.matter),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PropagationResult {
    pub initial: Levels,
    pub sup: Levels,
    pub series: Vec<ResidualReport>,
}

/// Evolves `spec` and tracks the L² residual levels at every `stride` steps.
pub fn propagation(
    model: &FRModel,
    spec: &DataSpec,
    grid: Grid,
    t_end: f64,
    stride: usize,
    rhs: RhsOptions,
) -> Result<PropagationResult> {
    let s0 = build(spec, grid, model)?;
    let cfg = EvolveConfig { t_end, stride, residuals: true, rhs, ..EvolveConfig::default() };
    let traj = evolve(model, &cfg, &s0)?.into_result()?;
    let series: Vec<ResidualReport> = traj.samples.iter().filter_map(|s| s.residuals).collect();
    let initial = Levels::of(&series[0]);
    let sup = series.iter().fold(Levels::default(), |m, r| m.max(&Levels::of(r)));
    Ok(PropagationResult { initial, sup, series })
}

/// Sweep over κ comparing the augmented and Einstein evolutions of the same data.
#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub kappas: Vec<f64>,
    pub data: DataSpec,
    pub grid: Grid,
    pub t_end: f64,
    pub stride: usize,
    pub order: usize,
    /// Drop the κ-dependent terms from the augmented run (negative control).
    pub ablate_kappa_terms: bool,
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub kappa: f64,
    pub sup_distance: f64,
    /// (t, D(t)) at the sampled times.
    pub series: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of log D against log κ; `None` for fewer than two κ.
    pub slope: Option<f64>,
}

fn einstein_reference(cfg: &SweepConfig, s0: &FieldState) -> Result<Trajectory> {
    // κ only enters the step-size check, which the Einstein system skips
    let model = FRModel::new(1.0)?;
    let ecfg = EvolveConfig {
        t_end: cfg.t_end,
        stride: cfg.stride,
        keep_states: true,
        rhs: RhsOptions::einstein(),
        ..EvolveConfig::default()
    };
    evolve(&model, &ecfg, s0)?.into_result()
}

pub fn kappa_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.kappas.is_empty() {
        return Err(Error::InvalidConfig("empty kappa list".into()));
    }
    let model0 = FRModel::new(cfg.kappas[0])?;
    let s0 = build(&cfg.data, cfg.grid, &model0)?;
    if s0.field(slot::RHO).iter().chain(s0.field(slot::RHOT)).any(|&v| v != 0.0) {
        return Err(Error::InvalidConfig("the sweep needs data with vanishing conformal factor".into()));
    }
    let reference = einstein_reference(cfg, &s0)?;
    let rows: Vec<SweepRow> = cfg
        .kappas
        .par_iter()
        .map(|&kappa| {
            let model = FRModel::new(kappa)?;
            let rhs = RhsOptions { kappa_terms: !cfg.ablate_kappa_terms, ..RhsOptions::default() };
            let ecfg = EvolveConfig {
                t_end: cfg.t_end,
                stride: cfg.stride,
                keep_states: true,
                rhs,
                ..EvolveConfig::default()
            };
            let traj = evolve(&model, &ecfg, &s0)?.into_result()?;
            let mut series = Vec::with_capacity(traj.samples.len());
            for (a, b) in traj.samples.iter().zip(&reference.samples) {
                let (Some(sa), Some(sb)) = (&a.state, &b.state) else { continue };
                series.push((a.t, comparison_distance(sa, sb, cfg.order)?));
            }
            let sup = series.iter().fold(0.0f64, |m, p| m.max(p.1));
            Ok(SweepRow { kappa, sup_distance: sup, series })
        })
        .collect::<Result<_>>()?;
    let slope = fit_slope(&rows);
    Ok(SweepResult { rows, slope })
}

/// Least-squares slope of log D against log κ.
pub fn fit_slope(rows: &[SweepRow]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.kappa.ln(), r.sup_distance.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Picard iteration and its distance to the direct RK4 solution.
#[derive(Clone, Debug)]
pub struct PicardReport {
    pub result: PicardResult,
    pub max_ratio: f64,
    pub rk4_distance: f64,
}

pub fn picard_experiment(model: &FRModel, cfg: &EvolveConfig, s0: &FieldState) -> Result<PicardReport> {
    let result = picard_solve(model, cfg, s0)?;
    let direct_cfg = EvolveConfig { keep_states: true, stride: 1, residuals: false, norm_order: None, ..*cfg };
    let direct = evolve(model, &direct_cfg, s0)?.into_result()?;
    let mut rk4_distance = 0.0f64;
    for (a, b) in result.states.iter().zip(direct.samples.iter().filter_map(|s| s.state.as_ref())) {
        rk4_distance = rk4_distance.max(comparison_distance(a, b, 1)?);
    }
    let max_ratio = result.ratios.iter().fold(0.0f64, |m, &r| m.max(r));
    Ok(PicardReport { result, max_ratio, rk4_distance })
}

/// Free-field energy Σ_ab E(h_ab)² + E(φ)² + E_m(ϱ)² with the Klein-Gordon mass m.
pub fn linear_energy(model: &FRModel, s: &FieldState) -> Result<f64> {
    let g = s.grid;
    let mut e2 = 0.0;
    for k in 0..10 {
        e2 += energy(&g, None, s.field(slot::H + k), s.field(slot::HT + k))?.powi(2);
    }
    e2 += energy(&g, None, s.field(slot::PHI), s.field(slot::PHIT))?.powi(2);
    e2 += energy_c(&g, None, s.field(slot::RHO), s.field(slot::RHOT), model.mass_squared().sqrt())?.powi(2);
    Ok(e2.sqrt())
}

/// Data exciting every sector: a gauge wave, a scalar bump and a ϱ bump.
pub fn mixed_linear_data(model: &FRModel, grid: Grid, eps: f64, width: f64) -> Result<FieldState> {
    let gw = build(&DataSpec { family: Family::GaugeWave, amplitude: eps, width, ..DataSpec::default() }, grid, model)?;
    let sb = build(&DataSpec::scalar_bump(eps, width), grid, model)?;
    let mut s = gw.axpy(1.0, &sb);
    let c = grid.center();
    for i in 0..grid.len() {
        let x = grid.coords(i);
        let r2: f64 = (0..grid.dims).map(|a| (x[a] - c[a]).powi(2)).sum();
        s.field_mut(slot::RHO)[i] = eps * (-r2 / (width * width)).exp();
    }
    Ok(s)
}

#[derive(Clone, Debug)]
pub struct EnergyDrift {
    pub initial: f64,
    pub max_relative_drift: f64,
}

/// Relative drift of the free-field energy under the linear evolution.
pub fn linear_energy_drift(model: &FRModel, s0: &FieldState, t_end: f64, stride: usize) -> Result<EnergyDrift> {
    let cfg = EvolveConfig { t_end, stride, keep_states: true, ..EvolveConfig::default() };
    let zero = FieldState::zeros(s0.grid);
    let traj = evolve_frozen(model, &cfg, s0, &zero)?.into_result()?;
    let e0 = linear_energy(model, s0)?;
    let mut drift = 0.0f64;
    for smp in &traj.samples {
        if let Some(s) = &smp.state {
            drift = drift.max((linear_energy(model, s)? / e0 - 1.0).abs());
        }
    }
    Ok(EnergyDrift { initial: e0, max_relative_drift: drift })
}

#[derive(Clone, Debug)]
pub struct EnergyGrowth {
    pub series: Vec<(f64, f64)>,
    /// Smallest γ with E(t) ≤ E(0)e^{γt} on the sampled times.
    pub envelope_rate: f64,
}

/// Energy E = E(φ) + E_c(ϱ) + Σ E(h_ab) on the evolving metric along a nonlinear run.
pub fn nonlinear_energy_growth(model: &FRModel, cfg: &EvolveConfig, s0: &FieldState) -> Result<EnergyGrowth> {
    let cfg = EvolveConfig { norm_order: Some(0), ..*cfg };
    let traj = evolve(model, &cfg, s0)?.into_result()?;
    let series: Vec<(f64, f64)> =
        traj.samples.iter().filter_map(|s| s.norms.map(|n| (s.t, n.energy_phi + n.energy_rho + n.energy_h))).collect();
    let e0 = series[0].1;
    let envelope_rate =
        series.iter().skip(1).map(|&(t, e)| (e / e0).ln() / t).fold(f64::NEG_INFINITY, f64::max).max(0.0);
    Ok(EnergyGrowth { series, envelope_rate })
}
