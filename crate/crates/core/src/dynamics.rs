//! Right-hand sides of the augmented conformal system and its Einstein limit,
//! and the monitored residuals (gauge, augmentation, constraints, matter).
//!
//! Every second-order equation has the form g†^{ab}∂_a∂_b u = S_u and is solved
//! for the second time derivative:
//! ∂_t²u = (g†^{ij}∂_i∂_j u + 2g†^{0i}∂_i∂_t u − S_u)/(−g†^{00}).
//!
//! Sources, with c the matter coupling and V_h, V_ρ from [`FRModel`]:
//! - S_h = F(g†;∂g†,∂g†) − 12∂ϱ∂ϱ − κ⁻¹V_h(ϱ)g† − 2c e^{−2ϱ}∂φ∂φ
//! - S_φ = 2g†^{ab}∂_aφ∂_bϱ
//! - S_ϱ = ϱ/(3κ) + κ⁻¹V_ρ(ϱ) − (c/6)e^{−2ϱ}g†^{ab}∂_aφ∂_bφ

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{slot, sum_squares, FieldState, Grid};
use crate::frmodel::FRModel;
use crate::tensor::kernels::{self, Mat, T3, T4};
use crate::tensor::{SYM_INDEX, SYM_PAIRS};

/// Matter coupling c = 8π (16π in the h equation, 4π/3 in the ϱ equation).
pub const DEFAULT_COUPLING: f64 = 8.0 * std::f64::consts::PI;

/// Which system is assembled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum System {
    /// The full augmented system in (h, φ, ϱ).
    #[default]
    Augmented,
    /// ϱ replaced by 0 everywhere; the ϱ slots are left untouched.
    Einstein,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RhsOptions {
    pub system: System,
    pub coupling: f64,
    /// Keep the 2g†(∂φ,∂ϱ) source of the φ equation.
    pub rho_phi_coupling: bool,
    /// Keep the κ-dependent terms. When false the V_h term is dropped and the
    /// whole ϱ source vanishes, so ϱ data that start at zero stay at zero.
    pub kappa_terms: bool,
}

impl Default for RhsOptions {
    fn default() -> Self {
        Self { system: System::Augmented, coupling: DEFAULT_COUPLING, rho_phi_coupling: true, kappa_terms: true }
    }
}

impl RhsOptions {
    pub fn einstein() -> Self {
        Self { system: System::Einstein, ..Self::default() }
    }
}

/// Spatial derivatives of every field of a state, computed once per RHS call.
pub struct Derivs<'a> {
    pub state: &'a FieldState,
    n: usize,
    dims: usize,
    /// [slot][axis] blocks
    d1: Vec<f64>,
    /// [k][pair] blocks, k over h components, φ, ϱ
    d2: Vec<f64>,
}

fn pairs(dims: usize) -> &'static [(usize, usize)] {
    if dims == 1 {
        &[(0, 0)]
    } else {
        &[(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
    }
}

fn pair_index(dims: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    if dims == 1 {
        0
    } else {
        [[0, 1, 2], [1, 3, 4], [2, 4, 5]][a][b]
    }
}

/// Second-derivative slot index: h components 0..10, φ 10, ϱ 11.
fn k_of_slot(s: usize) -> usize {
    match s {
        slot::PHI => 10,
        slot::RHO => 11,
        _ => s,
    }
}

fn slot_of_k(k: usize) -> usize {
    match k {
        10 => slot::PHI,
        11 => slot::RHO,
        _ => k,
    }
}

impl<'a> Derivs<'a> {
    pub fn new(state: &'a FieldState) -> Self {
        let g = state.grid;
        let n = g.len();
        let dims = g.dims;
        let jobs1: Vec<(usize, usize)> = (0..slot::COUNT).flat_map(|s| (0..dims).map(move |a| (s, a))).collect();
        let d1: Vec<f64> = jobs1
            .par_iter()
            .map(|&(s, a)| {
                let mut out = vec![0.0; n];
                g.d1_into(state.field(s), a, &mut out);
                out
            })
            .collect::<Vec<_>>()
            .concat();
        let ps = pairs(dims);
        let jobs2: Vec<(usize, usize, usize)> = (0..12).flat_map(|k| ps.iter().map(move |&(a, b)| (k, a, b))).collect();
        let d2: Vec<f64> = jobs2
            .par_iter()
            .map(|&(k, a, b)| {
                let mut out = vec![0.0; n];
                g.d2_into(state.field(slot_of_k(k)), a, b, &mut out);
                out
            })
            .collect::<Vec<_>>()
            .concat();
        Self { state, n, dims, d1, d2 }
    }

    pub fn grid(&self) -> Grid {
        self.state.grid
    }

    /// ∂_axis of a slot at point i (spatial axis 0..3).
    #[inline]
    pub fn d1(&self, s: usize, axis: usize, i: usize) -> f64 {
        if axis >= self.dims {
            0.0
        } else {
            self.d1[(s * self.dims + axis) * self.n + i]
        }
    }

    /// ∂_a∂_b of h components, φ or ϱ at point i.
    #[inline]
    pub fn d2(&self, s: usize, a: usize, b: usize, i: usize) -> f64 {
        if a >= self.dims || b >= self.dims {
            0.0
        } else {
            let np = pairs(self.dims).len();
            self.d2[(k_of_slot(s) * np + pair_index(self.dims, a, b)) * self.n + i]
        }
    }

    #[inline]
    pub fn value(&self, s: usize, i: usize) -> f64 {
        self.state.data[s * self.n + i]
    }

    /// First-order spacetime data at point i.
    pub fn jet(&self, i: usize, system: System) -> PointJet {
        let mut g = [[0.0; 4]; 4];
        let mut dg = kernels::zeros3::<4>();
        for (k, &(a, b)) in SYM_PAIRS.iter().enumerate() {
            let eta = if a == b { crate::tensor::ETA[a] } else { 0.0 };
            let v = eta + self.value(slot::H + k, i);
            g[a][b] = v;
            g[b][a] = v;
            let dt = self.value(slot::HT + k, i);
            dg[0][a][b] = dt;
            dg[0][b][a] = dt;
            for ax in 0..3 {
                let d = self.d1(slot::H + k, ax, i);
                dg[ax + 1][a][b] = d;
                dg[ax + 1][b][a] = d;
            }
        }
        let grad = |s: usize, st: usize| -> [f64; 4] {
            [self.value(st, i), self.d1(s, 0, i), self.d1(s, 1, i), self.d1(s, 2, i)]
        };
        let (rho, drho) = match system {
            System::Augmented => (self.value(slot::RHO, i), grad(slot::RHO, slot::RHOT)),
            System::Einstein => (0.0, [0.0; 4]),
        };
        PointJet { g, dg, phi: self.value(slot::PHI, i), dphi: grad(slot::PHI, slot::PHIT), rho, drho }
    }
}

/// Metric, scalar fields and their first spacetime derivatives at one point.
#[derive(Clone, Copy, Debug)]
pub struct PointJet {
    pub g: Mat<4>,
    pub dg: T3<4>,
    pub phi: f64,
    pub dphi: [f64; 4],
    pub rho: f64,
    pub drho: [f64; 4],
}

fn quad(ginv: &Mat<4>, u: &[f64; 4], v: &[f64; 4]) -> f64 {
    let mut s = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            s += ginv[a][b] * u[a] * v[b];
        }
    }
    s
}

/// Inverse metric with the coercivity check |H^{00}| ≤ ½.
fn coercive_inverse(g: &Mat<4>, t: f64) -> Result<Mat<4>> {
    let ginv = kernels::invert(g)?;
    let h00 = ginv[0][0] + 1.0;
    if !(h00.abs() <= 0.5) {
        return Err(Error::CoercivityLost { t, h00: h00.abs() });
    }
    Ok(ginv)
}

/// Sources (S_h[10], S_φ, S_ϱ without the mass term) of the frozen state at one point.
fn sources(model: &FRModel, opts: &RhsOptions, jet: &PointJet, ginv: &Mat<4>) -> ([f64; 10], f64, f64) {
    let (f, _) = kernels::f_first_order(&jet.g, *ginv, &jet.dg);
    let c = opts.coupling;
    let aug = opts.system == System::Augmented;
    let e = if aug { (-2.0 * jet.rho).exp() } else { 1.0 };
    let vh = if aug && opts.kappa_terms { model.v_h(jet.rho) / model.kappa } else { 0.0 };
    let sh = std::array::from_fn(|k| {
        let (a, b) = SYM_PAIRS[k];
        let mut s = f[a][b] - 2.0 * c * e * jet.dphi[a] * jet.dphi[b];
        if aug {
            s -= 12.0 * jet.drho[a] * jet.drho[b] + vh * jet.g[a][b];
        }
        s
    });
    let sphi = if aug && opts.rho_phi_coupling { 2.0 * quad(ginv, &jet.dphi, &jet.drho) } else { 0.0 };
    let srho = if aug && opts.kappa_terms {
        model.v_rho(jet.rho) / model.kappa - c / 6.0 * e * quad(ginv, &jet.dphi, &jet.dphi)
    } else {
        0.0
    };
    (sh, sphi, srho)
}

/// ∂_t²u at point i from the unknown's derivatives, the frozen inverse metric and a source.
#[inline]
fn solve_tt(u: &Derivs, s: usize, st: usize, i: usize, ginv: &Mat<4>, source: f64) -> f64 {
    let mut lap = 0.0;
    for a in 0..u.dims {
        for b in 0..u.dims {
            lap += ginv[a + 1][b + 1] * u.d2(s, a, b, i);
        }
    }
    let mut mixed = 0.0;
    for a in 0..u.dims {
        mixed += ginv[0][a + 1] * u.d1(st, a, i);
    }
    (lap + 2.0 * mixed - source) / (-ginv[0][0])
}

/// Second time derivatives of h (10 blocks), φ and ϱ.
#[derive(Clone, Debug, PartialEq)]
pub struct RhsBundle {
    pub grid: Grid,
    /// 12 blocks: h_tt in upper-triangle order, φ_tt, ϱ_tt.
    pub data: Vec<f64>,
}

impl RhsBundle {
    pub fn h_tt(&self, k: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn phi_tt(&self) -> &[f64] {
        self.h_tt(10)
    }

    pub fn rho_tt(&self) -> &[f64] {
        self.h_tt(11)
    }

    /// ∂_t of the full state: (∂_t h, ∂_t²h, ∂_t φ, ∂_t²φ, ∂_t ϱ, ∂_t²ϱ).
    pub fn time_derivative(&self, state: &FieldState, system: System) -> FieldState {
        let n = self.grid.len();
        let mut out = FieldState::zeros(self.grid);
        out.t = state.t;
        out.data[..10 * n].copy_from_slice(&state.data[slot::HT * n..(slot::HT + 10) * n]);
        out.data[slot::HT * n..(slot::HT + 10) * n].copy_from_slice(&self.data[..10 * n]);
        out.field_mut(slot::PHI).copy_from_slice(state.field(slot::PHIT));
        out.field_mut(slot::PHIT).copy_from_slice(self.phi_tt());
        if system == System::Augmented {
            out.field_mut(slot::RHO).copy_from_slice(state.field(slot::RHOT));
            out.field_mut(slot::RHOT).copy_from_slice(self.rho_tt());
        }
        out
    }
}

/// Linear solve step with coefficients and sources frozen at `frozen` and
/// principal parts and the mass term taken from `unknown`.
///
/// With `frozen` and `unknown` the same state this is the nonlinear RHS.
pub fn rhs_split(model: &FRModel, opts: &RhsOptions, frozen: &Derivs, unknown: &Derivs) -> Result<RhsBundle> {
    let grid = frozen.grid();
    grid.check_same(&unknown.grid())?;
    frozen.state.check_finite()?;
    unknown.state.check_finite()?;
    let t = unknown.state.t;
    let n = grid.len();
    let aug = opts.system == System::Augmented;
    let points: Vec<[f64; 12]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let jet = frozen.jet(i, opts.system);
            let ginv = coercive_inverse(&jet.g, t)?;
            let (sh, sphi, mut srho) = sources(model, opts, &jet, &ginv);
            let mut out = [0.0; 12];
            for k in 0..10 {
                out[k] = solve_tt(unknown, slot::H + k, slot::HT + k, i, &ginv, sh[k]);
            }
            out[10] = solve_tt(unknown, slot::PHI, slot::PHIT, i, &ginv, sphi);
            if aug {
                if opts.kappa_terms {
                    srho += model.mass_squared() * unknown.value(slot::RHO, i);
                }
                out[11] = solve_tt(unknown, slot::RHO, slot::RHOT, i, &ginv, srho);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut data = vec![0.0; 12 * n];
    for (i, p) in points.iter().enumerate() {
        for (k, &v) in p.iter().enumerate() {
            data[k * n + i] = v;
        }
    }
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        let name = ["h_tt", "phi_tt", "rho_tt"][(pos / n).saturating_sub(9).min(2)];
        return Err(Error::NaNDetected { t, field: name.to_string() });
    }
    Ok(RhsBundle { grid, data })
}

pub fn rhs_with(model: &FRModel, opts: &RhsOptions, state: &FieldState) -> Result<RhsBundle> {
    let d = Derivs::new(state);
    rhs_split(model, opts, &d, &d)
}

pub fn rhs_augmented(model: &FRModel, state: &FieldState) -> Result<RhsBundle> {
    rhs_with(model, &RhsOptions::default(), state)
}

/// The Einstein-limit RHS; ϱ slots of the state are ignored and ϱ_tt = 0.
pub fn rhs_einstein(state: &FieldState) -> Result<RhsBundle> {
    // κ does not enter the Einstein system
    let model = FRModel::new(1.0)?;
    rhs_with(&model, &RhsOptions::einstein(), state)
}

/// Full second-order spacetime jet of a slot, using ∂_t² from the RHS.
fn second_jet(d: &Derivs, s: usize, st: usize, tt: f64, i: usize) -> Mat<4> {
    let mut m = [[0.0; 4]; 4];
    m[0][0] = tt;
    for a in 0..3 {
        let v = d.d1(st, a, i);
        m[0][a + 1] = v;
        m[a + 1][0] = v;
        for b in 0..3 {
            m[a + 1][b + 1] = d.d2(s, a, b, i);
        }
    }
    m
}

/// L² and sup norms of a grid function.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NormPair {
    pub l2: f64,
    pub sup: f64,
}

impl NormPair {
    pub fn of(grid: &Grid, v: &[f64]) -> Self {
        Self { l2: (sum_squares(v) * grid.cell_volume()).sqrt(), sup: v.iter().fold(0.0, |m, x| m.max(x.abs())) }
    }
}

/// Residual fields on the grid.
#[derive(Clone, Debug)]
pub struct Residuals {
    pub grid: Grid,
    pub t: f64,
    /// Γ†^λ, λ = 0..3
    pub gauge: [Vec<f64>; 4],
    /// e^{2ϱ} − f′(R_g)
    pub augmentation: Vec<f64>,
    pub hamiltonian: Vec<f64>,
    pub momentum: [Vec<f64>; 3],
    /// □†φ − 2g†(∂φ,∂ϱ)
    pub matter: Vec<f64>,
}

/// Norms of all monitored residuals at one time.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ResidualReport {
    pub t: f64,
    pub gauge: [NormPair; 4],
    pub augmentation: NormPair,
    pub hamiltonian: NormPair,
    pub momentum: [NormPair; 3],
    pub matter: NormPair,
}

impl ResidualReport {
    pub const CSV_HEADER: &'static str = "t,gauge0_l2,gauge0_sup,gauge1_l2,gauge1_sup,gauge2_l2,gauge2_sup,\
gauge3_l2,gauge3_sup,aug_l2,aug_sup,ham_l2,ham_sup,mom1_l2,mom1_sup,mom2_l2,mom2_sup,mom3_l2,mom3_sup,\
matter_l2,matter_sup";

    pub fn csv_row(&self) -> String {
        let mut v = vec![self.t];
        for p in self.gauge.iter().chain([&self.augmentation, &self.hamiltonian]).chain(&self.momentum) {
            v.extend([p.l2, p.sup]);
        }
        v.extend([self.matter.l2, self.matter.sup]);
        v.iter().map(|x| format!("{x:.12e}")).collect::<Vec<_>>().join(",")
    }

    /// Max over λ of the gauge L² norms.
    pub fn gauge_l2(&self) -> f64 {
        self.gauge.iter().fold(0.0, |m, p| m.max(p.l2))
    }

    /// Max over components of the momentum L² norms.
    pub fn momentum_l2(&self) -> f64 {
        self.momentum.iter().fold(0.0, |m, p| m.max(p.l2))
    }
}

impl Residuals {
    pub fn report(&self) -> ResidualReport {
        let np = |v: &Vec<f64>| NormPair::of(&self.grid, v);
        ResidualReport {
            t: self.t,
            gauge: std::array::from_fn(|l| np(&self.gauge[l])),
            augmentation: np(&self.augmentation),
            hamiltonian: np(&self.hamiltonian),
            momentum: std::array::from_fn(|j| np(&self.momentum[j])),
            matter: np(&self.matter),
        }
    }
}

/// Contracted Christoffels Γ†^λ = g†^{ab}Γ†^λ_ab from stored time derivatives.
pub fn gauge_residual(state: &FieldState) -> Result<[Vec<f64>; 4]> {
    let d = Derivs::new(state);
    gauge_from(&d)
}

fn gauge_from(d: &Derivs) -> Result<[Vec<f64>; 4]> {
    let n = d.grid().len();
    let pts: Vec<[f64; 4]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let jet = d.jet(i, System::Augmented);
            let ginv = kernels::invert(&jet.g)?;
            let gam = kernels::christoffel(&ginv, &jet.dg, 1.0);
            Ok(kernels::contract(&ginv, &gam))
        })
        .collect::<Result<_>>()?;
    Ok(std::array::from_fn(|l| pts.iter().map(|p| p[l]).collect()))
}

/// e^{2ϱ} − (1 + κR_g) with g = e^{−2ϱ}g†; second time derivatives from `rhs`.
pub fn augmentation_residual(model: &FRModel, state: &FieldState, rhs: &RhsBundle) -> Result<Vec<f64>> {
    let d = Derivs::new(state);
    augmentation_from(model, &d, rhs)
}

fn augmentation_from(model: &FRModel, d: &Derivs, rhs: &RhsBundle) -> Result<Vec<f64>> {
    let n = d.grid().len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let jet = d.jet(i, System::Augmented);
            let rho2 = second_jet(d, slot::RHO, slot::RHOT, rhs.rho_tt()[i], i);
            let mut h2: [Mat<4>; 10] = [[[0.0; 4]; 4]; 10];
            for (k, m) in h2.iter_mut().enumerate() {
                *m = second_jet(d, slot::H + k, slot::HT + k, rhs.h_tt(k)[i], i);
            }
            let e = (-2.0 * jet.rho).exp();
            let de: [f64; 4] = std::array::from_fn(|m| -2.0 * e * jet.drho[m]);
            let mut g = [[0.0; 4]; 4];
            let mut dg = kernels::zeros3::<4>();
            let mut ddg = kernels::zeros4::<4>();
            for a in 0..4 {
                for b in 0..4 {
                    let k = SYM_INDEX[a][b];
                    let gd = jet.g[a][b];
                    g[a][b] = e * gd;
                    for m in 0..4 {
                        dg[m][a][b] = de[m] * gd + e * jet.dg[m][a][b];
                        for l in 0..4 {
                            let dde = e * (4.0 * jet.drho[m] * jet.drho[l] - 2.0 * rho2[m][l]);
                            ddg[m][l][a][b] =
                                dde * gd + de[m] * jet.dg[l][a][b] + de[l] * jet.dg[m][a][b] + e * h2[k][m][l];
                        }
                    }
                }
            }
            let c = kernels::Curvature::new(&g, &dg, &ddg, 1.0)?;
            Ok((2.0 * jet.rho).exp() - model.f_prime(c.scalar()))
        })
        .collect()
}

/// □†φ − 2g†(∂φ,∂ϱ) with ∂_t²φ from `rhs`.
pub fn matter_wave_residual(state: &FieldState, rhs: &RhsBundle) -> Result<Vec<f64>> {
    let d = Derivs::new(state);
    matter_from(&d, rhs)
}

fn matter_from(d: &Derivs, rhs: &RhsBundle) -> Result<Vec<f64>> {
    let n = d.grid().len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let jet = d.jet(i, System::Augmented);
            let ginv = kernels::invert(&jet.g)?;
            let gam = kernels::christoffel(&ginv, &jet.dg, 1.0);
            let phi2 = second_jet(d, slot::PHI, slot::PHIT, rhs.phi_tt()[i], i);
            let mut boxed = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    let mut v = phi2[a][b];
                    for l in 0..4 {
                        v -= gam[l][a][b] * jet.dphi[l];
                    }
                    boxed += ginv[a][b] * v;
                }
            }
            Ok(boxed - 2.0 * quad(&ginv, &jet.dphi, &jet.drho))
        })
        .collect()
}

/// ADM quantities of the t = const slice of g† at one point.
struct Slice {
    lapse: f64,
    /// shift with raised index
    beta_up: [f64; 3],
    gamma_inv: [[f64; 3]; 3],
    /// spatial Christoffels Γ̄^l_ij
    chris: T3<3>,
}

fn slice_at(d: &Derivs, i: usize) -> Result<(Slice, PointJet)> {
    let jet = d.jet(i, System::Augmented);
    let ginv = kernels::invert(&jet.g)?;
    if !(ginv[0][0] < 0.0) {
        return Err(Error::NonSpacelikeSlice);
    }
    let gamma: Mat<3> = std::array::from_fn(|a| std::array::from_fn(|b| jet.g[a + 1][b + 1]));
    if !(gamma[0][0] > 0.0 && gamma[0][0] * gamma[1][1] - gamma[0][1] * gamma[1][0] > 0.0 && det3(&gamma) > 0.0) {
        return Err(Error::NonSpacelikeSlice);
    }
    let gamma_inv = kernels::invert(&gamma).map_err(|_| Error::NonSpacelikeSlice)?;
    let beta: [f64; 3] = std::array::from_fn(|a| jet.g[0][a + 1]);
    let beta_up = std::array::from_fn(|a| (0..3).map(|b| gamma_inv[a][b] * beta[b]).sum());
    let dgam: T3<3> =
        std::array::from_fn(|m| std::array::from_fn(|a| std::array::from_fn(|b| jet.dg[m + 1][a + 1][b + 1])));
    let chris = kernels::christoffel(&gamma_inv, &dgam, 1.0);
    Ok((Slice { lapse: (-1.0 / ginv[0][0]).sqrt(), beta_up, gamma_inv, chris }, jet))
}

fn det3(m: &Mat<3>) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Extrinsic curvature K_ij = −(∂_tγ_ij − D_iβ_j − D_jβ_i)/(2N), 6 blocks in
/// (11, 12, 13, 22, 23, 33) order.
fn extrinsic_curvature(d: &Derivs) -> Result<Vec<[f64; 6]>> {
    let n = d.grid().len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let (sl, jet) = slice_at(d, i)?;
            let beta: [f64; 3] = std::array::from_fn(|a| jet.g[0][a + 1]);
            let dbeta = |a: usize, b: usize| -> f64 {
                let mut v = jet.dg[a + 1][0][b + 1];
                for l in 0..3 {
                    v -= sl.chris[l][a][b] * beta[l];
                }
                v
            };
            let mut k = [0.0; 6];
            let mut idx = 0;
            for a in 0..3 {
                for b in a..3 {
                    k[idx] = -(jet.dg[0][a + 1][b + 1] - dbeta(a, b) - dbeta(b, a)) / (2.0 * sl.lapse);
                    idx += 1;
                }
            }
            Ok(k)
        })
        .collect()
}

const SYM3: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];

/// Hamiltonian and momentum constraint residuals, LHS − RHS.
///
/// Hamiltonian: R̄ + K² − K_ijK^ij − [6ϱ_n² + 6|∇ϱ|² + c e^{−2ϱ}(φ_n² + |∇φ|²) − e^{−2ϱ}W₂(ϱ)].
/// Momentum: ∂_jK − D_iK^i_j − [6ϱ_nϱ_j + c e^{−2ϱ}φ_nφ_j].
/// Here u_n = (∂_t u − β^i∂_i u)/N and W₂ carries its 1/κ.
pub fn constraint_residuals(
    model: &FRModel,
    opts: &RhsOptions,
    state: &FieldState,
) -> Result<(Vec<f64>, [Vec<f64>; 3])> {
    let d = Derivs::new(state);
    constraints_from(model, opts, &d)
}

fn constraints_from(model: &FRModel, opts: &RhsOptions, d: &Derivs) -> Result<(Vec<f64>, [Vec<f64>; 3])> {
    let grid = d.grid();
    let n = grid.len();
    let kij = extrinsic_curvature(d)?;
    // spatial derivatives of K_ij
    let mut dk = vec![[[0.0; 3]; 6]; n];
    let mut buf_in = vec![0.0; n];
    let mut buf_out = vec![0.0; n];
    for c in 0..6 {
        for (v, k) in buf_in.iter_mut().zip(&kij) {
            *v = k[c];
        }
        for ax in 0..grid.dims {
            grid.d1_into(&buf_in, ax, &mut buf_out);
            for (p, &v) in dk.iter_mut().zip(&buf_out) {
                p[c][ax] = v;
            }
        }
    }
    let c = opts.coupling;
    let aug = opts.system == System::Augmented;
    let pts: Vec<(f64, [f64; 3])> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (sl, jet) = slice_at(d, i)?;
            let gi = &sl.gamma_inv;
            let k = |a: usize, b: usize| kij[i][SYM3[a][b]];
            let dkk = |m: usize, a: usize, b: usize| dk[i][SYM3[a][b]][m];
            // 3-Ricci scalar of γ from its first and second spatial derivatives
            let gamma: Mat<3> = std::array::from_fn(|a| std::array::from_fn(|b| jet.g[a + 1][b + 1]));
            let dgam: T3<3> =
                std::array::from_fn(|m| std::array::from_fn(|a| std::array::from_fn(|b| jet.dg[m + 1][a + 1][b + 1])));
            let mut ddgam: T4<3> = kernels::zeros4::<3>();
            for m in 0..3 {
                for l in 0..3 {
                    for a in 0..3 {
                        for b in 0..3 {
                            ddgam[m][l][a][b] = d.d2(slot::H + SYM_INDEX[a + 1][b + 1], m, l, i);
                        }
                    }
                }
            }
            let rbar = kernels::Curvature::with_inverse(&gamma, *gi, &dgam, &ddgam, 1.0).scalar();
            let mut trk = 0.0;
            let mut kk = 0.0;
            let mut kup = [[0.0; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    trk += gi[a][b] * k(a, b);
                    for p in 0..3 {
                        for q in 0..3 {
                            kup[a][b] += gi[a][p] * gi[b][q] * k(p, q);
                        }
                    }
                }
            }
            for a in 0..3 {
                for b in 0..3 {
                    kk += kup[a][b] * k(a, b);
                }
            }
            let normal = |du: &[f64; 4]| -> f64 {
                let adv: f64 = (0..3).map(|a| sl.beta_up[a] * du[a + 1]).sum();
                (du[0] - adv) / sl.lapse
            };
            let grad2 = |du: &[f64; 4]| -> f64 {
                let mut s = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        s += gi[a][b] * du[a + 1] * du[b + 1];
                    }
                }
                s
            };
            let e = if aug { (-2.0 * jet.rho).exp() } else { 1.0 };
            let phin = normal(&jet.dphi);
            let rhon = normal(&jet.drho);
            let mut energy = c * e * (phin * phin + grad2(&jet.dphi));
            if aug {
                energy += 6.0 * rhon * rhon + 6.0 * grad2(&jet.drho) - e * model.w2(jet.rho);
            }
            let ham = rbar + trk * trk - kk - energy;
            // ∂_j K with K = γ^{ab}K_ab, ∂_jγ^{ab} = −γ^{ap}γ^{bq}∂_jγ_pq
            let mut mom = [0.0; 3];
            for (j, mj) in mom.iter_mut().enumerate() {
                let mut dtrk = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        let mut dginv = 0.0;
                        for p in 0..3 {
                            for q in 0..3 {
                                dginv -= gi[a][p] * gi[b][q] * dgam[j][p][q];
                            }
                        }
                        dtrk += dginv * k(a, b) + gi[a][b] * dkk(j, a, b);
                    }
                }
                // D_iK^i_j = γ^{ik}(∂_iK_kj − Γ̄^l_ik K_lj − Γ̄^l_ij K_kl)
                let mut div = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        let mut v = dkk(a, b, j);
                        for l in 0..3 {
                            v -= sl.chris[l][a][b] * k(l, j) + sl.chris[l][a][j] * k(b, l);
                        }
                        div += gi[a][b] * v;
                    }
                }
                let mut flux = c * e * phin * jet.dphi[j + 1];
                if aug {
                    flux += 6.0 * rhon * jet.drho[j + 1];
                }
                *mj = dtrk - div - flux;
            }
            Ok((ham, mom))
        })
        .collect::<Result<_>>()?;
    let ham = pts.iter().map(|p| p.0).collect();
    let mom = std::array::from_fn(|j| pts.iter().map(|p| p.1[j]).collect());
    Ok((ham, mom))
}

/// All residual fields of a state; second time derivatives come from the RHS
/// assembled with `opts`, so ablated runs are measured against their own scheme.
pub fn residuals(model: &FRModel, opts: &RhsOptions, state: &FieldState) -> Result<Residuals> {
    let d = Derivs::new(state);
    let rhs = rhs_split(model, opts, &d, &d)?;
    let gauge = gauge_from(&d)?;
    let augmentation = if opts.system == System::Augmented {
        augmentation_from(model, &d, &rhs)?
    } else {
        vec![0.0; state.grid.len()]
    };
    let (hamiltonian, momentum) = constraints_from(model, opts, &d)?;
    let matter = matter_from(&d, &rhs)?;
    Ok(Residuals { grid: state.grid, t: state.t, gauge, augmentation, hamiltonian, momentum, matter })
}

pub fn residual_report(model: &FRModel, opts: &RhsOptions, state: &FieldState) -> Result<ResidualReport> {
    Ok(residuals(model, opts, state)?.report())
}
