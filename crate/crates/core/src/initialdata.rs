//! Initial-data families.
//!
//! All families except `Manufactured` have ϱ₀ = ϱ₁ = 0 unless they are a pure
//! conformal-factor wave. `ClosedBump` is the planar scalar bump with the
//! extrinsic curvature and gauge velocities chosen so that the Hamiltonian,
//! momentum and gauge conditions hold exactly in the continuum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::RhsBundle;
use crate::error::{Error, Result};
use crate::fields::{slot, FieldState, Grid};
use crate::frmodel::FRModel;
use crate::taylor::Taylor;
use crate::tensor::{ricci_taylor, Convention, SymTaylor, EPS0, ETA, SYM_PAIRS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Family {
    #[default]
    Vacuum,
    /// φ₀ = ε exp(−r²/w²), φ₁ = 0, h = ϱ = 0.
    ScalarBump,
    /// Planar bump with constraint- and gauge-consistent metric data (1D only).
    ClosedBump,
    /// h_ab = ∂_aξ_b + ∂_bξ_a with ξ_b = ε δ_b^pol w F((x¹ − c − t)/w), F Gaussian.
    GaugeWave,
    /// Analytic metric perturbation with ϱ = ½ ln f′(R_g) and an analytic φ.
    Manufactured,
    /// φ = ε sin(k(x¹ − t)), a right-moving free wave.
    ScalarWave,
    /// ϱ = ε cos(k x¹), ∂_tϱ = 0, a standing conformal-factor wave.
    RhoWave,
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "vacuum" => Family::Vacuum,
            "scalar_bump" => Family::ScalarBump,
            "closed_bump" => Family::ClosedBump,
            "gauge_wave" => Family::GaugeWave,
            "manufactured" => Family::Manufactured,
            "scalar_wave" => Family::ScalarWave,
            "rho_wave" => Family::RhoWave,
            _ => return Err(Error::InvalidConfig(format!("unknown data family '{s}'"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DataSpec {
    pub family: Family,
    /// ε
    pub amplitude: f64,
    pub width: f64,
    /// Absolute center; the box center when `None`.
    pub center: Option<[f64; 3]>,
    /// Index 0..4 of the gauge-vector component for `GaugeWave`.
    pub polarization: usize,
    /// Wave number in units of 2π/L for the plane-wave families.
    pub mode: usize,
    /// Coordinate-warp amplitude relative to ε for `ClosedBump`.
    pub warp: f64,
    pub seed: u64,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self {
            family: Family::Vacuum,
            amplitude: 1e-3,
            width: 1.0,
            center: None,
            polarization: 0,
            mode: 1,
            warp: 1.0,
            seed: 0,
        }
    }
}

impl DataSpec {
    pub fn scalar_bump(amplitude: f64, width: f64) -> Self {
        Self { family: Family::ScalarBump, amplitude, width, ..Self::default() }
    }

    pub fn closed_bump(amplitude: f64, width: f64) -> Self {
        Self { family: Family::ClosedBump, amplitude, width, ..Self::default() }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.amplitude.abs() <= EPS0) {
            return Err(Error::PerturbationTooLarge { norm: self.amplitude.abs(), limit: EPS0 });
        }
        let uses_width = matches!(self.family, Family::ScalarBump | Family::ClosedBump | Family::GaugeWave);
        let min = 4.0 * grid.min_spacing();
        if uses_width && !(self.width >= min) {
            return Err(Error::UnresolvedData { width: self.width, min });
        }
        if self.polarization > 3 {
            return Err(Error::InvalidConfig(format!("polarization must be 0..3, got {}", self.polarization)));
        }
        if self.family == Family::ClosedBump && grid.dims != 1 {
            return Err(Error::DimensionMismatch("closed_bump is a planar (1D) family".into()));
        }
        Ok(())
    }

    fn center(&self, grid: &Grid) -> [f64; 3] {
        self.center.unwrap_or_else(|| grid.center())
    }

    fn wavenumber(&self, grid: &Grid) -> f64 {
        std::f64::consts::TAU * self.mode as f64 / (grid.hi[0] - grid.lo[0])
    }
}

/// Builds the initial state for `spec` on `grid`.
pub fn build(spec: &DataSpec, grid: Grid, model: &FRModel) -> Result<FieldState> {
    spec.validate(&grid)?;
    let eps = spec.amplitude;
    let c = spec.center(&grid);
    let mut s = FieldState::zeros(grid);
    let n = grid.len();
    match spec.family {
        Family::Vacuum => {}
        Family::ScalarBump => {
            let w2 = spec.width * spec.width;
            for i in 0..n {
                let x = grid.coords(i);
                let r2: f64 = (0..grid.dims).map(|a| (x[a] - c[a]).powi(2)).sum();
                s.field_mut(slot::PHI)[i] = eps * (-r2 / w2).exp();
            }
        }
        Family::ClosedBump => closed_bump(spec, &mut s, c[0]),
        Family::GaugeWave => {
            let w = spec.width;
            let p = spec.polarization;
            for i in 0..n {
                let z = (grid.coords(i)[0] - c[0]) / w;
                let g = (-z * z).exp();
                // ξ = ε w F(z), F = e^{−z²}, z = (x − c − t)/w
                let f1 = eps * (-2.0 * z * g);
                let f2 = eps * (4.0 * z * z - 2.0) * g / w;
                // ∂_t ξ = −F′, ∂_x ξ = F′; ∂_t of those carry F″
                let dxi = |a: usize| {
                    if a == 0 {
                        -f1
                    } else if a == 1 {
                        f1
                    } else {
                        0.0
                    }
                };
                let dtdxi = |a: usize| {
                    if a == 0 {
                        f2
                    } else if a == 1 {
                        -f2
                    } else {
                        0.0
                    }
                };
                for (k, &(a, b)) in SYM_PAIRS.iter().enumerate() {
                    let mut h = 0.0;
                    let mut ht = 0.0;
                    if b == p {
                        h += dxi(a);
                        ht += dtdxi(a);
                    }
                    if a == p {
                        h += dxi(b);
                        ht += dtdxi(b);
                    }
                    s.field_mut(slot::H + k)[i] = h;
                    s.field_mut(slot::HT + k)[i] = ht;
                }
            }
        }
        Family::ScalarWave => {
            let k = spec.wavenumber(&grid);
            for i in 0..n {
                let x = grid.coords(i)[0] - c[0];
                s.field_mut(slot::PHI)[i] = eps * (k * x).sin();
                s.field_mut(slot::PHIT)[i] = -eps * k * (k * x).cos();
            }
        }
        Family::RhoWave => {
            let k = spec.wavenumber(&grid);
            for i in 0..n {
                let x = grid.coords(i)[0] - grid.lo[0];
                s.field_mut(slot::RHO)[i] = eps * (k * x).cos();
            }
        }
        Family::Manufactured => return Ok(manufactured(spec, grid, model)?.0),
    }
    Ok(s)
}

/// Planar scalar bump in warped coordinates X = x + ζ(x), ζ = δ w e^{−(x−c)²/w²}.
///
/// With Φ(X) = ε e^{−(X−c)²/w²} and ∂_tφ = Φ/w, the slice is flat in X with
/// K = diag(a, b, b), b = β + 2π Φ²/w and
/// a = (8π(Φ²/w² + Φ′²) − 2b²)/(4b), β = √(4π) max|Φ′|. This solves the
/// Hamiltonian constraint, and ∂_X(2b) = 8π φ_n Φ′ solves the momentum
/// constraint. The gauge velocities ∂_t g_{0μ} make Γ^λ vanish at t = 0.
fn closed_bump(spec: &DataSpec, s: &mut FieldState, c: f64) {
    let grid = s.grid;
    let eps = spec.amplitude;
    let w = spec.width;
    let delta = spec.warp * eps;
    let cm = crate::dynamics::DEFAULT_COUPLING;
    // max|Φ′| = ε√2 e^{−1/2}/w
    let max_dphi = eps * std::f64::consts::SQRT_2 * (-0.5f64).exp() / w;
    let beta = (cm / 2.0).sqrt() * max_dphi;
    for i in 0..grid.len() {
        let x = grid.coords(i)[0];
        let z = (x - c) / w;
        let g = (-z * z).exp();
        let xp = 1.0 - 2.0 * delta * z * g;
        let xpp = delta * (4.0 * z * z - 2.0) * g / w;
        let zz = (x + delta * w * g - c) / w;
        let phi = eps * (-zz * zz).exp();
        let dphi = -2.0 * zz / w * phi;
        let phin = phi / w;
        let (a, b) = if eps == 0.0 {
            (0.0, 0.0)
        } else {
            let b = beta + cm / 4.0 * phi * phi / w;
            (cm * (phin * phin + dphi * dphi) / (4.0 * b) - 0.5 * b, b)
        };
        let trk = a + 2.0 * b;
        s.field_mut(slot::PHI)[i] = phi;
        s.field_mut(slot::PHIT)[i] = phin;
        // h₀: γ_xx = X′²
        s.field_mut(slot::H + 4)[i] = xp * xp - 1.0;
        // h₁_ij = −2K_ij with unit lapse and zero shift
        s.field_mut(slot::HT + 4)[i] = -2.0 * a * xp * xp;
        s.field_mut(slot::HT + 7)[i] = -2.0 * b;
        s.field_mut(slot::HT + 9)[i] = -2.0 * b;
        // Γ^0 = 0 ⇒ ∂_t g_00 = 2 tr K; Γ^x = 0 ⇒ ∂_t g_0x = X″/X′
        s.field_mut(slot::HT)[i] = 2.0 * trk;
        s.field_mut(slot::HT + 1)[i] = xpp / xp;
    }
}

/// Analytic manufactured state and its exact second time derivatives.
///
/// g_ab = η_ab + ε A_ab sin(k·x + ω_ab t + p_ab) with random coefficients,
/// ϱ = ½ ln(1 + κR_g), g† = e^{2ϱ} g and φ = ε sin(k x¹ + ωt + p).
pub fn manufactured(spec: &DataSpec, grid: Grid, model: &FRModel) -> Result<(FieldState, RhsBundle)> {
    let eps = spec.amplitude;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let kbase = spec.wavenumber(&grid);
    let mut coef = [[0.0; 6]; 11];
    for row in coef.iter_mut() {
        row[0] = rng.gen_range(-1.0..1.0);
        for v in row.iter_mut().skip(1).take(grid.dims) {
            *v = kbase * rng.gen_range(1..3) as f64 * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        }
        row[4] = rng.gen_range(-1.0..1.0);
        row[5] = rng.gen_range(0.0..std::f64::consts::TAU);
    }
    let order = 4;
    let conv = Convention::default();
    let n = grid.len();
    let pts: Vec<[f64; 36]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = grid.coords(i);
            let xt: [Taylor; 4] = std::array::from_fn(|m| Taylor::var(m, if m == 0 { 0.0 } else { x[m - 1] }, order));
            let wave = |r: &[f64; 6]| -> Taylor {
                let mut arg = xt[0] * r[4] + r[5];
                for a in 0..3 {
                    arg += xt[a + 1] * r[a + 1];
                }
                arg.sin()
            };
            let g: SymTaylor = std::array::from_fn(|k| {
                let (a, b) = SYM_PAIRS[k];
                let eta = if a == b { ETA[a] } else { 0.0 };
                wave(&coef[k]) * (eps * coef[k][0]) + eta
            });
            let curv = ricci_taylor(&g, conv)?;
            let fp = curv.scalar * model.kappa + 1.0;
            if fp.value() <= 0.0 {
                return Err(Error::NonPositiveConformalFactor(fp.value()));
            }
            let rho = fp.ln() * 0.5;
            let e2 = (rho * 2.0).exp();
            let phi = wave(&coef[10]) * eps;
            let mut out = [0.0; 36];
            for (k, gk) in g.iter().enumerate() {
                let (a, b) = SYM_PAIRS[k];
                let eta = if a == b { ETA[a] } else { 0.0 };
                let gd = e2 * gk.truncate(2);
                out[k] = gd.value() - eta;
                out[10 + k] = gd.d(&[0]);
                out[24 + k] = gd.d(&[0, 0]);
            }
            out[20] = phi.value();
            out[21] = phi.d(&[0]);
            out[22] = rho.value();
            out[23] = rho.d(&[0]);
            out[34] = phi.d(&[0, 0]);
            out[35] = rho.d(&[0, 0]);
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut s = FieldState::zeros(grid);
    let mut tt = vec![0.0; 12 * n];
    for (i, p) in pts.iter().enumerate() {
        for b in 0..slot::COUNT {
            s.data[b * n + i] = p[b];
        }
        for k in 0..12 {
            tt[k * n + i] = p[24 + k];
        }
    }
    Ok((s, RhsBundle { grid, data: tt }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{augmentation_residual, residual_report, RhsOptions};

    fn model() -> FRModel {
        FRModel::new(0.1).unwrap()
    }

    #[test]
    fn vacuum_is_zero() {
        let g = Grid::three_d(8, -1.0, 1.0).unwrap();
        let s = build(&DataSpec::default(), g, &model()).unwrap();
        assert!(s.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unresolved_width_is_rejected() {
        let g = Grid::one_d(64, -10.0, 10.0).unwrap();
        let spec = DataSpec::scalar_bump(1e-3, 0.5);
        assert!(matches!(build(&spec, g, &model()), Err(Error::UnresolvedData { .. })));
    }

    #[test]
    fn linear_families_scale_linearly() {
        let g = Grid::three_d(32, -6.0, 6.0).unwrap();
        for family in [Family::ScalarBump, Family::GaugeWave] {
            let a = DataSpec { family, amplitude: 1e-3, width: 1.5, polarization: 2, ..DataSpec::default() };
            let b = DataSpec { amplitude: 2e-3, ..a };
            let sa = build(&a, g, &model()).unwrap();
            let sb = build(&b, g, &model()).unwrap();
            for (x, y) in sa.data.iter().zip(&sb.data) {
                assert!((2.0 * x - y).abs() <= 1e-18 + 1e-15 * y.abs());
            }
        }
    }

    #[test]
    fn compact_support_near_boundary() {
        let g = Grid::one_d(256, -10.0, 10.0).unwrap();
        let s = build(&DataSpec::scalar_bump(1e-3, 1.0), g, &model()).unwrap();
        for i in [0, 1, g.n - 2, g.n - 1] {
            assert!(s.field(slot::PHI)[i].abs() <= 1e-14);
        }
    }

    #[test]
    fn plain_bump_violates_hamiltonian_at_second_order() {
        let opts = RhsOptions::default();
        let g = Grid::one_d(512, -10.0, 10.0).unwrap();
        let h = |eps: f64| {
            let s = build(&DataSpec::scalar_bump(eps, 1.0), g, &model()).unwrap();
            residual_report(&model(), &opts, &s).unwrap().hamiltonian.sup
        };
        let (a, b) = (h(1e-3), h(2e-3));
        assert!(a > 1e-6);
        assert!(((b / a) - 4.0).abs() < 1e-6, "{}", b / a);
        // equals 8π φ_x² at its maximum: 8π ε² 2/(e w²)
        let expect = 8.0 * std::f64::consts::PI * 1e-6 * 2.0 * (-1.0f64).exp();
        assert!((a - expect).abs() < 1e-3 * expect, "{a} vs {expect}");
    }

    #[test]
    fn closed_bump_residuals_converge() {
        let opts = RhsOptions::default();
        let levels = |n: usize| {
            let g = Grid::one_d(n, -10.0, 10.0).unwrap();
            let s = build(&DataSpec::closed_bump(1e-3, 1.0), g, &model()).unwrap();
            let r = residual_report(&model(), &opts, &s).unwrap();
            [r.hamiltonian.l2, r.momentum[0].l2, r.gauge_l2(), r.augmentation.l2, r.matter.l2]
        };
        let (a, b) = (levels(256), levels(512));
        for k in 0..5 {
            let rate = (a[k] / b[k]).log2();
            assert!(a[k] > 0.0 && (rate - 4.0).abs() < 1.0, "residual {k}: {} -> {} rate {rate}", a[k], b[k]);
        }
    }

    #[test]
    fn manufactured_augmentation_at_truncation_level() {
        let m = model();
        let spec = DataSpec { family: Family::Manufactured, amplitude: 0.02, seed: 7, ..DataSpec::default() };
        let err = |n: usize| {
            let g = Grid::one_d(n, 0.0, std::f64::consts::TAU).unwrap();
            let (s, tt) = manufactured(&spec, g, &m).unwrap();
            let r = augmentation_residual(&m, &s, &tt).unwrap();
            r.iter().fold(0.0f64, |a, v| a.max(v.abs()))
        };
        let (a, b) = (err(32), err(64));
        assert!(b < 1e-6, "{b}");
        assert!((a / b).log2() > 3.5, "{a} {b}");
    }
}
