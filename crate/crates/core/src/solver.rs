//! Method-of-lines RK4 time integration and the Picard iteration.
//!
//! The Picard iteration freezes coefficients and sources at the RK4 stage
//! states of the previous iterate, so each iterate is a linear evolution and
//! the fixed point coincides with the nonlinear RK4 solution on the same
//! time grid.

use crate::dynamics::{residual_report, rhs_split, Derivs, ResidualReport, RhsOptions, System};
use crate::error::{Error, Result};
use crate::fields::FieldState;
use crate::frmodel::FRModel;
use crate::norms::{norm_report, state_distance, NormReport};

pub const DEFAULT_CFL: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Integrator {
    #[default]
    Rk4,
    Picard,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveConfig {
    /// Explicit time step; `cfl · h` when `None`.
    pub dt: Option<f64>,
    pub cfl: f64,
    pub t_end: f64,
    /// Diagnostics are recorded every `stride` steps.
    pub stride: usize,
    /// Keep the state at every diagnostic sample.
    pub keep_states: bool,
    /// Compute residual reports at the samples.
    pub residuals: bool,
    /// Compute norm reports at the samples, with this derivative count.
    pub norm_order: Option<usize>,
    pub integrator: Integrator,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub rhs: RhsOptions,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            dt: None,
            cfl: DEFAULT_CFL,
            t_end: 1.0,
            stride: 1,
            keep_states: false,
            residuals: false,
            norm_order: None,
            integrator: Integrator::Rk4,
            tolerance: 1e-12,
            max_iterations: 30,
            rhs: RhsOptions::default(),
        }
    }
}

impl EvolveConfig {
    /// Step size and step count; the step is shrunk so that T is hit exactly.
    pub fn schedule(&self, model: &FRModel, h: f64) -> Result<(f64, usize)> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidConfig(format!("T must be positive, got {}", self.t_end)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidConfig(format!("CFL factor must lie in (0, 1], got {}", self.cfl)));
        }
        if self.stride == 0 {
            return Err(Error::InvalidConfig("sampling stride must be positive".into()));
        }
        let limit = self.cfl * h;
        let dt = self.dt.unwrap_or(limit);
        if !(dt > 0.0 && dt <= limit * (1.0 + 1e-12)) {
            return Err(Error::InvalidConfig(format!("dt = {dt} exceeds CFL·h = {limit}")));
        }
        let stiff = 0.5 * (3.0 * model.kappa).sqrt();
        if self.rhs.system == System::Augmented && self.rhs.kappa_terms && dt > stiff {
            return Err(Error::InvalidConfig(format!(
                "dt = {dt} exceeds the stiff bound 0.5·sqrt(3κ) = {stiff}; refine the grid or raise κ"
            )));
        }
        let steps = ((self.t_end / dt) - 1e-9).ceil().max(1.0) as usize;
        Ok((self.t_end / steps as f64, steps))
    }
}

fn derivative(model: &FRModel, opts: &RhsOptions, frozen: &FieldState, unknown: &FieldState) -> Result<FieldState> {
    let df = Derivs::new(frozen);
    let rhs = if std::ptr::eq(frozen, unknown) {
        rhs_split(model, opts, &df, &df)?
    } else {
        let du = Derivs::new(unknown);
        rhs_split(model, opts, &df, &du)?
    };
    Ok(rhs.time_derivative(unknown, opts.system))
}

/// One classical RK4 step; `frozen(k)` supplies the coefficient state of stage
/// k or `None` for the nonlinear step. Returns the new state and the stage states.
fn rk4_generic(
    model: &FRModel,
    opts: &RhsOptions,
    s: &FieldState,
    dt: f64,
    frozen: Option<&[FieldState]>,
) -> Result<(FieldState, [FieldState; 4])> {
    let f = |k: usize, u: &FieldState| -> Result<FieldState> {
        match frozen {
            Some(fr) => derivative(model, opts, &fr[k], u),
            None => derivative(model, opts, u, u),
        }
    };
    let s1 = s.clone();
    let k1 = f(0, &s1)?;
    let mut s2 = s.axpy(0.5 * dt, &k1);
    s2.t = s.t + 0.5 * dt;
    let k2 = f(1, &s2)?;
    let mut s3 = s.axpy(0.5 * dt, &k2);
    s3.t = s.t + 0.5 * dt;
    let k3 = f(2, &s3)?;
    let mut s4 = s.axpy(dt, &k3);
    s4.t = s.t + dt;
    let k4 = f(3, &s4)?;
    let mut out = s.clone();
    for (i, v) in out.data.iter_mut().enumerate() {
        *v += dt / 6.0 * (k1.data[i] + 2.0 * k2.data[i] + 2.0 * k3.data[i] + k4.data[i]);
    }
    out.t = s.t + dt;
    if out.check_finite().is_err() {
        return Err(Error::StepRejected { t: out.t, reason: "non-finite values after RK4 step".into() });
    }
    Ok((out, [s1, s2, s3, s4]))
}

pub fn step_rk4_with(model: &FRModel, opts: &RhsOptions, s: &FieldState, dt: f64) -> Result<FieldState> {
    Ok(rk4_generic(model, opts, s, dt, None)?.0)
}

pub fn step_rk4(model: &FRModel, s: &FieldState, dt: f64) -> Result<FieldState> {
    step_rk4_with(model, &RhsOptions::default(), s, dt)
}

/// Diagnostics at one sampled time.
#[derive(Clone, Debug)]
pub struct Sample {
    pub t: f64,
    pub residuals: Option<ResidualReport>,
    pub norms: Option<NormReport>,
    pub state: Option<FieldState>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dt: f64,
    pub steps: usize,
    pub samples: Vec<Sample>,
    /// Last state reached.
    pub last: FieldState,
    /// Why the run stopped before T, if it did.
    pub failure: Option<Error>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn into_result(self) -> Result<Self> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

fn sample(model: &FRModel, cfg: &EvolveConfig, s: &FieldState) -> Result<Sample> {
    Ok(Sample {
        t: s.t,
        residuals: if cfg.residuals { Some(residual_report(model, &cfg.rhs, s)?) } else { None },
        norms: match cfg.norm_order {
            Some(d) => Some(norm_report(s, d, model.kappa)?),
            None => None,
        },
        state: cfg.keep_states.then(|| s.clone()),
    })
}

/// Evolves `s0` to T with RK4. Coercivity loss or non-finite values stop the
/// run early; the partial trajectory is returned with `failure` set.
pub fn evolve(model: &FRModel, cfg: &EvolveConfig, s0: &FieldState) -> Result<Trajectory> {
    evolve_inner(model, cfg, s0, None)
}

/// Evolves the linear problem whose coefficients and sources are frozen at
/// `frozen` for all times; with the zero state this is the free
/// wave–Klein-Gordon system on Minkowski space.
pub fn evolve_frozen(model: &FRModel, cfg: &EvolveConfig, s0: &FieldState, frozen: &FieldState) -> Result<Trajectory> {
    s0.grid.check_same(&frozen.grid)?;
    evolve_inner(model, cfg, s0, Some(frozen))
}

fn evolve_inner(
    model: &FRModel,
    cfg: &EvolveConfig,
    s0: &FieldState,
    frozen: Option<&FieldState>,
) -> Result<Trajectory> {
    let (dt, steps) = cfg.schedule(model, s0.grid.min_spacing())?;
    let frozen_stages: Option<[FieldState; 4]> = frozen.map(|f| std::array::from_fn(|_| f.clone()));
    s0.check_finite()?;
    let mut samples = vec![sample(model, cfg, s0)?];
    let mut s = s0.clone();
    let mut failure = None;
    for n in 1..=steps {
        match rk4_generic(model, &cfg.rhs, &s, dt, frozen_stages.as_ref().map(|f| &f[..])) {
            Ok((next, _)) => s = next,
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
        if n % cfg.stride == 0 || n == steps {
            match sample(model, cfg, &s) {
                Ok(smp) => samples.push(smp),
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
    }
    Ok(Trajectory { dt, steps, samples, last: s, failure })
}

/// Outcome of the Picard iteration.
#[derive(Clone, Debug)]
pub struct PicardResult {
    /// End-of-step states of the final iterate, starting with the data.
    pub states: Vec<FieldState>,
    pub dt: f64,
    /// sup-in-time distances between successive iterates.
    pub distances: Vec<f64>,
    /// λ_n = d_{n+1}/d_n.
    pub ratios: Vec<f64>,
    /// Number of iterates computed after S₀.
    pub iterations: usize,
    pub converged: bool,
}

/// Stage and step states of one iterate.
struct Iterate {
    stages: Vec<[FieldState; 4]>,
    states: Vec<FieldState>,
}

fn picard_iterate(
    model: &FRModel,
    opts: &RhsOptions,
    s0: &FieldState,
    dt: f64,
    steps: usize,
    prev: Option<&Iterate>,
) -> Result<Iterate> {
    let zero = FieldState::zeros(s0.grid);
    let zeros: [FieldState; 4] = std::array::from_fn(|_| zero.clone());
    let mut s = s0.clone();
    let mut states = vec![s.clone()];
    let mut stages = Vec::with_capacity(steps);
    for j in 0..steps {
        let frozen = match prev {
            Some(p) => &p.stages[j],
            None => &zeros,
        };
        let (next, st) = rk4_generic(model, opts, &s, dt, Some(frozen))?;
        s = next;
        states.push(s.clone());
        stages.push(st);
    }
    Ok(Iterate { stages, states })
}

/// Picard iteration on [0, T]. Iterate 0 solves the homogeneous linear
/// problem (flat coefficients, no sources); iterate n+1 solves the linear
/// problem with coefficients and sources from iterate n.
pub fn picard_solve(model: &FRModel, cfg: &EvolveConfig, s0: &FieldState) -> Result<PicardResult> {
    let (dt, steps) = cfg.schedule(model, s0.grid.min_spacing())?;
    s0.check_finite()?;
    let c = model.kappa.powf(-0.5);
    let mut prev = picard_iterate(model, &cfg.rhs, s0, dt, steps, None)?;
    let mut distances = Vec::new();
    let mut ratios = Vec::new();
    let mut growth = 0;
    for it in 1..=cfg.max_iterations {
        let next = picard_iterate(model, &cfg.rhs, s0, dt, steps, Some(&prev))?;
        let mut dist = 0.0f64;
        for (a, b) in next.states.iter().zip(&prev.states) {
            dist = dist.max(state_distance(a, b, 1, c)?);
        }
        if let Some(&last) = distances.last() {
            let r: f64 = if last > 0.0 { dist / last } else { 0.0 };
            ratios.push(r);
            growth = if r >= 1.0 { growth + 1 } else { 0 };
        }
        distances.push(dist);
        prev = next;
        if dist < cfg.tolerance {
            return Ok(PicardResult { states: prev.states, dt, distances, ratios, iterations: it, converged: true });
        }
        if growth >= 3 {
            return Err(Error::NoContraction { ratios });
        }
    }
    Ok(PicardResult { states: prev.states, dt, distances, ratios, iterations: cfg.max_iterations, converged: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{slot, Grid};
    use crate::initialdata::{build, DataSpec, Family};
    use crate::norms::comparison_distance;
    use std::f64::consts::TAU;

    fn model() -> FRModel {
        FRModel::new(0.1).unwrap()
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = Grid::one_d(32, 0.0, 1.0).unwrap();
        let s = FieldState::zeros(g);
        let next = step_rk4(&model(), &s, 0.01).unwrap();
        assert!(next.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vacuum_stays_flat_for_long_times() {
        let g = Grid::one_d(64, 0.0, 10.0).unwrap();
        let cfg = EvolveConfig { t_end: 10.0, ..EvolveConfig::default() };
        let t = evolve(&model(), &cfg, &FieldState::zeros(g)).unwrap();
        assert!(t.completed());
        assert!(t.last.data.iter().all(|&v| v == 0.0));
    }

    fn free_wave_error(n: usize) -> f64 {
        let g = Grid::one_d(n, 0.0, TAU).unwrap();
        let spec =
            DataSpec { family: Family::ScalarWave, amplitude: 1e-6, center: Some([0.0; 3]), ..DataSpec::default() };
        let s0 = build(&spec, g, &model()).unwrap();
        let cfg = EvolveConfig { t_end: 1.0, stride: 1000, ..EvolveConfig::default() };
        let t = evolve(&model(), &cfg, &s0).unwrap();
        let s = &t.last;
        (0..g.len()).map(|i| (s.field(slot::PHI)[i] - 1e-6 * (g.coords(i)[0] - 1.0).sin()).abs()).fold(0.0, f64::max)
            / 1e-6
    }

    #[test]
    fn free_wave_translates() {
        // leading spatial error of the phase: t k⁵h⁴/30
        let (a, b) = (free_wave_error(64), free_wave_error(128));
        let h = TAU / 64.0;
        assert!(a < 1.2 * h.powi(4) / 30.0, "{a}");
        assert!(((a / b).log2() - 4.0).abs() < 0.2, "{a} {b}");
    }

    #[test]
    fn temporal_error_is_fourth_order() {
        // spatial error cancels in the difference against a much finer time step
        let reference = |dt: f64| {
            let g = Grid::one_d(32, 0.0, TAU).unwrap();
            let spec =
                DataSpec { family: Family::ScalarWave, amplitude: 1e-6, center: Some([0.0; 3]), ..DataSpec::default() };
            let s0 = build(&spec, g, &model()).unwrap();
            let cfg = EvolveConfig { t_end: 2.0, dt: Some(dt), cfl: 1.0, stride: 10_000, ..EvolveConfig::default() };
            evolve(&model(), &cfg, &s0).unwrap().last
        };
        let fine = reference(0.0125);
        let e = |dt: f64| {
            let s = reference(dt);
            s.field(slot::PHI).iter().zip(fine.field(slot::PHI)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let ratio = e(0.1) / e(0.05);
        assert!((ratio / 16.0 - 1.0).abs() < 0.15, "{ratio}");
    }

    #[test]
    fn stiff_time_step_is_rejected() {
        let m = FRModel::new(1e-4).unwrap();
        let cfg = EvolveConfig { t_end: 1.0, ..EvolveConfig::default() };
        assert!(matches!(cfg.schedule(&m, 0.5), Err(Error::InvalidConfig(_))));
        assert!(cfg.schedule(&m, 0.01).is_ok());
    }

    #[test]
    fn coercivity_loss_stops_early() {
        let g = Grid::one_d(16, 0.0, 1.0).unwrap();
        let mut s = FieldState::zeros(g);
        s.field_mut(slot::HT).fill(20.0);
        let cfg = EvolveConfig { t_end: 1.0, ..EvolveConfig::default() };
        let t = evolve(&model(), &cfg, &s).unwrap();
        assert!(matches!(t.failure, Some(Error::CoercivityLost { .. })));
        assert!(t.last.t < 1.0);
    }

    #[test]
    fn runs_are_bitwise_reproducible() {
        let g = Grid::one_d(128, -10.0, 10.0).unwrap();
        let s0 = build(&DataSpec::scalar_bump(1e-2, 1.0), g, &model()).unwrap();
        let cfg = EvolveConfig { t_end: 0.5, ..EvolveConfig::default() };
        let a = evolve(&model(), &cfg, &s0).unwrap();
        let b = evolve(&model(), &cfg, &s0).unwrap();
        assert_eq!(a.last, b.last);
    }

    #[test]
    fn picard_zero_data_converges_at_once() {
        let g = Grid::one_d(32, -5.0, 5.0).unwrap();
        let cfg = EvolveConfig { t_end: 0.25, ..EvolveConfig::default() };
        let r = picard_solve(&model(), &cfg, &FieldState::zeros(g)).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert!(r.states.iter().all(|s| s.data.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn picard_fixed_point_is_the_rk4_solution() {
        let m = model();
        let g = Grid::one_d(128, -10.0, 10.0).unwrap();
        let s0 = build(&DataSpec::scalar_bump(1e-2, 1.0), g, &m).unwrap();
        let cfg = EvolveConfig { t_end: 0.25, tolerance: 1e-13, ..EvolveConfig::default() };
        let r = picard_solve(&m, &cfg, &s0).unwrap();
        assert!(r.converged, "{:?}", r.distances);
        assert!(r.ratios.iter().all(|&l| l < 0.6), "{:?}", r.ratios);
        let direct = evolve(&m, &cfg, &s0).unwrap();
        let d = comparison_distance(r.states.last().unwrap(), &direct.last, 1).unwrap();
        assert!(d <= 5.0 * cfg.tolerance, "{d}");
    }
}
