//! Structural identity suite on analytic metric jets.
//!
//! Each check compares two independently assembled sides of a geometric
//! identity. Jets come from random trigonometric metric families expanded in
//! Taylor arithmetic, so formula errors are isolated from discretization
//! error; only the divergence checks difference in space and report a
//! measured convergence rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fields::Stencil;
use crate::frmodel::FRModel;
use crate::taylor::Taylor;
use crate::tensor::{
    self, conformal_taylor, kernels, modified_gravity_tensor_with, ricci_taylor, Convention, MetricJet, SymMatrix4,
    SymTaylor, ETA, SYM_PAIRS,
};

/// Random smooth metric m + Σ a·sin(k·x + φ) with small amplitudes.
#[derive(Clone, Debug)]
pub struct TrigMetric {
    terms: Vec<[(f64, [f64; 4], f64); 2]>,
}

impl TrigMetric {
    pub fn random(rng: &mut impl Rng, amplitude: f64) -> Self {
        let terms = (0..10)
            .map(|_| {
                std::array::from_fn(|_| {
                    let a = amplitude * rng.gen_range(-1.0..1.0);
                    let k = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
                    (a, k, rng.gen_range(0.0..std::f64::consts::TAU))
                })
            })
            .collect();
        Self { terms }
    }

    pub fn eval(&self, x: &[Taylor; 4]) -> SymTaylor {
        let order = x[0].order();
        std::array::from_fn(|c| {
            let (a, b) = SYM_PAIRS[c];
            let mut v = Taylor::constant(if a == b { ETA[a] } else { 0.0 }, order);
            for &(amp, k, ph) in &self.terms[c] {
                let mut arg = Taylor::constant(ph, order);
                for m in 0..4 {
                    arg += x[m] * k[m];
                }
                v += arg.sin() * amp;
            }
            v
        })
    }

    pub fn taylor_at(&self, x0: [f64; 4], order: usize) -> SymTaylor {
        let x: [Taylor; 4] = std::array::from_fn(|m| Taylor::var(m, x0[m], order));
        self.eval(&x)
    }

    pub fn jet_at(&self, x0: [f64; 4], order: usize) -> MetricJet {
        MetricJet::from_taylor(&self.taylor_at(x0, order), order)
    }
}

/// Random scalar ψ = Σ a·sin(k·x + φ).
#[derive(Clone, Debug)]
pub struct TrigScalar {
    terms: Vec<(f64, [f64; 4], f64)>,
}

impl TrigScalar {
    pub fn random(rng: &mut impl Rng, amplitude: f64) -> Self {
        let terms = (0..3)
            .map(|_| {
                let a = amplitude * rng.gen_range(-1.0..1.0);
                let k = std::array::from_fn(|_| rng.gen_range(-1.5..1.5));
                (a, k, rng.gen_range(0.0..std::f64::consts::TAU))
            })
            .collect();
        Self { terms }
    }

    pub fn eval(&self, x: &[Taylor; 4]) -> Taylor {
        let order = x[0].order();
        let mut v = Taylor::zero(order);
        for &(amp, k, ph) in &self.terms {
            let mut arg = Taylor::constant(ph, order);
            for m in 0..4 {
                arg += x[m] * k[m];
            }
            v += arg.sin() * amp;
        }
        v
    }
}

#[derive(Clone, Debug)]
pub struct IdentityOptions {
    pub seed: u64,
    pub samples: usize,
    pub kappa: f64,
    pub stencil: Stencil,
    /// Coarsest finite-difference step for the divergence checks; halved twice.
    pub fd_step: f64,
    pub convention: Convention,
}

impl Default for IdentityOptions {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            samples: 4,
            kappa: 0.1,
            stencil: Stencil::Order4,
            fd_step: 0.2,
            convention: Convention::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityResult {
    pub name: &'static str,
    /// Largest residual over samples (finest step for divergence checks).
    pub residual: f64,
    pub threshold: f64,
    /// Measured convergence rate between the two finest steps.
    pub rate: Option<f64>,
    pub expected_rate: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport {
    pub results: Vec<IdentityResult>,
}

impl IdentityReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }
}

fn random_point(rng: &mut impl Rng) -> [f64; 4] {
    std::array::from_fn(|_| rng.gen_range(-1.0..1.0))
}

fn max_diff(a: &SymMatrix4, b: &SymMatrix4) -> f64 {
    a.sub(b).max_abs()
}

/// Largest deviation of Ricci(e^{2ψ}m) from −2(∂∂ψ − ∂ψ∂ψ) − (□_mψ + 2|∂ψ|²_m)m.
pub fn conformal_ricci_residual(psi: &TrigScalar, x0: [f64; 4], conv: Convention) -> Result<f64> {
    let x: [Taylor; 4] = std::array::from_fn(|m| Taylor::var(m, x0[m], 2));
    let p = psi.eval(&x);
    let e = (p * 2.0).exp();
    let g: SymTaylor = std::array::from_fn(|c| {
        let (a, b) = SYM_PAIRS[c];
        if a == b {
            e * ETA[a]
        } else {
            Taylor::zero(2)
        }
    });
    let jet = MetricJet::from_taylor(&g, 2);
    let ricci = tensor::ricci_full_with(&jet, conv)?;
    let dpsi: [f64; 4] = std::array::from_fn(|m| p.d(&[m]));
    let box_m: f64 = (0..4).map(|m| ETA[m] * p.d(&[m, m])).sum();
    let grad2: f64 = (0..4).map(|m| ETA[m] * dpsi[m] * dpsi[m]).sum();
    let expected = SymMatrix4::from_fn(|a, b| {
        let mab = if a == b { ETA[a] } else { 0.0 };
        -2.0 * (p.d(&[a, b]) - dpsi[a] * dpsi[b]) - (box_m + 2.0 * grad2) * mab
    });
    Ok(max_diff(&ricci, &expected))
}

/// Both sides of e^{2ρ}R†_ab − 6e^{2ρ}∂ρ∂ρ + ½g†W₂(ρ) = N_g − ½g tr N_g with ρ = ½ ln f′(R_g).
pub fn conformal_field_equation_sides(
    model: &FRModel,
    metric: &TrigMetric,
    x0: [f64; 4],
    conv: Convention,
) -> Result<(SymMatrix4, SymMatrix4)> {
    let g = metric.taylor_at(x0, 4);
    let jet = MetricJet::from_taylor(&g, 4);
    let n = modified_gravity_tensor_with(model, &jet, conv)?;
    let ginv = tensor::invert_metric(&jet.value)?;
    let tr_n = ginv.contract(&n);
    let rhs = n.sub(&jet.value.scale(0.5 * tr_n));

    let r = ricci_taylor(&g, conv)?.scalar;
    model.rho_of_r(r.value())?;
    let rho = (r * model.kappa + 1.0).ln() * 0.5;
    let g2: SymTaylor = std::array::from_fn(|c| g[c].truncate(2));
    let gd = conformal_taylor(&g2, &rho);
    let ricci_d = ricci_taylor(&gd, conv)?.ricci;
    let e2 = (2.0 * rho.value()).exp();
    let w2 = model.w2(rho.value());
    let lhs = SymMatrix4::from_fn(|a, b| {
        e2 * ricci_d[a][b].value() - 6.0 * e2 * rho.d(&[a]) * rho.d(&[b])
            + 0.5 * gd[crate::tensor::SYM_INDEX[a][b]].value() * w2
    });
    Ok((lhs, rhs))
}

/// tr N_g and f′(R)R − 2f(R) + 3□f′(R), the latter with □ from the array kernels.
pub fn trace_identity_sides(model: &FRModel, metric: &TrigMetric, x0: [f64; 4]) -> Result<(f64, f64)> {
    let g = metric.taylor_at(x0, 4);
    let jet = MetricJet::from_taylor(&g, 4);
    let n = tensor::modified_gravity_tensor(model, &jet)?;
    let ginv = tensor::invert_metric(&jet.value)?;
    let lhs = ginv.contract(&n);
    let r = tensor::scalar_curvature_taylor(&g, Convention::default())?;
    let fp = r * model.kappa + 1.0;
    let u = tensor::ScalarJet {
        value: fp.value(),
        d1: std::array::from_fn(|a| fp.d(&[a])),
        d2: std::array::from_fn(|a| std::array::from_fn(|b| fp.d(&[a, b]))),
    };
    let box_fp = tensor::box_scalar(&jet, &u)?;
    let rv = tensor::scalar_curvature(&jet)?;
    Ok((lhs, model.f_prime(rv) * rv - 2.0 * model.f_eval(rv) + 3.0 * box_fp))
}

fn shifted(x0: [f64; 4], axis: usize, dx: f64) -> [f64; 4] {
    let mut x = x0;
    x[axis] += dx;
    x
}

/// Finite-difference ∂_μ N_ab at x0 for every μ.
fn fd_gradient_n(
    model: &FRModel,
    metric: &TrigMetric,
    x0: [f64; 4],
    h: f64,
    stencil: Stencil,
    conv: Convention,
) -> Result<[SymMatrix4; 4]> {
    let (offsets, weights) = stencil.first_derivative_weights();
    let mut out = [SymMatrix4::zero(); 4];
    for (mu, slot) in out.iter_mut().enumerate() {
        let mut acc = SymMatrix4::zero();
        for (&o, &w) in offsets.iter().zip(weights.iter()) {
            let jet = metric.jet_at(shifted(x0, mu, o as f64 * h), 4);
            let n = modified_gravity_tensor_with(model, &jet, conv)?;
            acc = acc.add(&n.scale(w / h));
        }
        *slot = acc;
    }
    Ok(out)
}

/// Divergence residuals (Jordan-frame Bianchi, conformal-frame identity) at one step size.
pub fn divergence_residuals(
    model: &FRModel,
    metric: &TrigMetric,
    x0: [f64; 4],
    h: f64,
    stencil: Stencil,
    conv: Convention,
) -> Result<(f64, f64)> {
    let dn = fd_gradient_n(model, metric, x0, h, stencil, conv)?;
    let g = metric.taylor_at(x0, 4);
    let jet = MetricJet::from_taylor(&g, 4);
    let n = modified_gravity_tensor_with(model, &jet, conv)?.to_full();
    let tc = ricci_taylor(&g, conv)?;
    let ginv: [[f64; 4]; 4] = std::array::from_fn(|a| std::array::from_fn(|b| tc.ginv[a][b].value()));
    let gam: [[[f64; 4]; 4]; 4] =
        std::array::from_fn(|l| std::array::from_fn(|a| std::array::from_fn(|b| tc.gam[l][a][b].value())));

    // conformal connection of g† = e^{2ρ} g with ρ = ½ ln f′(R)
    let rho = (tc.scalar * model.kappa + 1.0).ln() * 0.5;
    let g1: SymTaylor = std::array::from_fn(|c| g[c].truncate(1));
    let gd = conformal_taylor(&g1, &rho.truncate(1));
    let gd_jet = MetricJet::from_taylor(&gd, 1);
    let gd_inv = kernels::invert(&gd_jet.value.to_full())?;
    let gam_d = kernels::christoffel(&gd_inv, &gd_jet.dg(), conv.christoffel_sign);
    let drho: [f64; 4] = std::array::from_fn(|m| rho.d(&[m]));
    let tr_n = kernels::trace(&ginv, &n);

    let div = |inv: &[[f64; 4]; 4], gm: &[[[f64; 4]; 4]; 4], b: usize| {
        let mut s = 0.0;
        for a in 0..4 {
            for c in 0..4 {
                let mut cov = dn[c].get(a, b);
                for d in 0..4 {
                    cov -= gm[d][c][a] * n[d][b] + gm[d][c][b] * n[a][d];
                }
                s += inv[a][c] * cov;
            }
        }
        s
    };
    let mut jordan = 0.0f64;
    let mut conformal = 0.0f64;
    let e = (-2.0 * rho.value()).exp();
    for b in 0..4 {
        jordan = jordan.max(div(&ginv, &gam, b).abs());
        let mut expect = -tr_n * drho[b];
        for c in 0..4 {
            for d in 0..4 {
                expect += 2.0 * ginv[c][d] * drho[c] * n[d][b];
            }
        }
        conformal = conformal.max((div(&gd_inv, &gam_d, b) - e * expect).abs());
    }
    Ok((jordan, conformal))
}

/// Largest change of F_ab when only second derivatives of the jet are perturbed.
pub fn f_invariance_residual(metric: &TrigMetric, x0: [f64; 4], rng: &mut impl Rng, conv: Convention) -> Result<f64> {
    let jet = metric.jet_at(x0, 2);
    let f0 = split_f(&jet, conv)?;
    let mut pert = jet.clone();
    for m in 0..4 {
        for n in m..4 {
            let delta = SymMatrix4(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
            pert.d2[m][n] = pert.d2[m][n].add(&delta);
            pert.d2[n][m] = pert.d2[m][n];
        }
    }
    let f1 = split_f(&pert, conv)?;
    Ok(max_diff(&f0, &f1))
}

fn split_f(jet: &MetricJet, conv: Convention) -> Result<SymMatrix4> {
    let c = kernels::Curvature::new(&jet.value.to_full(), &jet.dg(), &jet.ddg(), conv.christoffel_sign)?;
    Ok(SymMatrix4::from_full(&c.f_term()))
}

fn rate(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

pub fn run_suite(opts: &IdentityOptions) -> Result<IdentityReport> {
    let model = FRModel::new(opts.kappa)?;
    let conv = opts.convention;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut results = Vec::new();

    let mut worst = 0.0f64;
    for _ in 0..opts.samples {
        let psi = TrigScalar::random(&mut rng, 0.3);
        let x0 = random_point(&mut rng);
        worst = worst.max(conformal_ricci_residual(&psi, x0, conv)?);
    }
    results.push(IdentityResult {
        name: "conformal_ricci",
        residual: worst,
        threshold: 1e-9,
        rate: None,
        expected_rate: None,
        passed: worst <= 1e-9,
    });

    let mut worst = 0.0f64;
    for _ in 0..opts.samples {
        let metric = TrigMetric::random(&mut rng, 0.1);
        let x0 = random_point(&mut rng);
        let (lhs, rhs) = conformal_field_equation_sides(&model, &metric, x0, conv)?;
        worst = worst.max(max_diff(&lhs, &rhs));
    }
    results.push(IdentityResult {
        name: "conformal_field_equation",
        residual: worst,
        threshold: 1e-8,
        rate: None,
        expected_rate: None,
        passed: worst <= 1e-8,
    });

    let p = opts.stencil.order() as f64;
    let steps = [opts.fd_step, opts.fd_step / 2.0, opts.fd_step / 4.0];
    let mut jordan = [0.0f64; 3];
    let mut conformal = [0.0f64; 3];
    for _ in 0..opts.samples {
        let metric = TrigMetric::random(&mut rng, 0.1);
        let x0 = random_point(&mut rng);
        for (i, &h) in steps.iter().enumerate() {
            let (j, c) = divergence_residuals(&model, &metric, x0, h, opts.stencil, conv)?;
            jordan[i] = jordan[i].max(j);
            conformal[i] = conformal[i].max(c);
        }
    }
    for (name, errs) in [("bianchi_divergence", jordan), ("conformal_divergence", conformal)] {
        let r = rate(errs[1], errs[2]);
        let within = (r - p).abs() <= 0.15 * p;
        results.push(IdentityResult {
            name,
            residual: errs[2],
            threshold: f64::NAN,
            rate: Some(r),
            expected_rate: Some(p),
            passed: within && errs[2] < errs[0],
        });
    }

    let mut worst = 0.0f64;
    for _ in 0..opts.samples {
        let metric = TrigMetric::random(&mut rng, 0.1);
        let x0 = random_point(&mut rng);
        worst = worst.max(f_invariance_residual(&metric, x0, &mut rng, conv)?);
    }
    results.push(IdentityResult {
        name: "f_first_order",
        residual: worst,
        threshold: 1e-10,
        rate: None,
        expected_rate: None,
        passed: worst <= 1e-10,
    });

    Ok(IdentityReport { results })
}
