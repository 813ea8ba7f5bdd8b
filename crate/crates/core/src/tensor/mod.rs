//! Pointwise Lorentzian tensor algebra on metric jets.
//!
//! Signature is (−,+,+,+) and index 0 is time. Symmetric tensors are stored
//! as their upper triangle in the order 00,01,02,03,11,12,13,22,23,33.

pub mod kernels;
mod taylor_curvature;

pub use taylor_curvature::{
    conformal_taylor, inverse_taylor, lift_metric, modified_gravity_tensor_with, ricci_taylor, scalar_curvature_taylor,
    SymTaylor,
};

use crate::error::{Error, Result};
use crate::frmodel::FRModel;
use kernels::{Curvature, Mat, T3, T4};

/// Flat index of (a, b) in the upper-triangle storage.
pub const SYM_INDEX: [[usize; 4]; 4] = [[0, 1, 2, 3], [1, 4, 5, 6], [2, 5, 7, 8], [3, 6, 8, 9]];
/// (a, b) pair for each storage slot.
pub const SYM_PAIRS: [(usize, usize); 10] =
    [(0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)];

/// Diagonal of the Minkowski metric.
pub const ETA: [f64; 4] = [-1.0, 1.0, 1.0, 1.0];

/// Default bound ε₀ on ‖h‖∞ for the perturbative regime.
pub const EPS0: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct SymMatrix4(pub [f64; 10]);

impl SymMatrix4 {
    pub fn zero() -> Self {
        Self([0.0; 10])
    }

    pub fn minkowski() -> Self {
        Self::diag([-1.0, 1.0, 1.0, 1.0])
    }

    pub fn diag(d: [f64; 4]) -> Self {
        let mut m = Self::zero();
        for (a, v) in d.iter().enumerate() {
            m.set(a, a, *v);
        }
        m
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.0[SYM_INDEX[a][b]]
    }

    pub fn set(&mut self, a: usize, b: usize, v: f64) {
        self.0[SYM_INDEX[a][b]] = v;
    }

    pub fn from_full(m: &Mat<4>) -> Self {
        Self(std::array::from_fn(|k| {
            let (a, b) = SYM_PAIRS[k];
            0.5 * (m[a][b] + m[b][a])
        }))
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> f64) -> Self {
        Self(std::array::from_fn(|k| {
            let (a, b) = SYM_PAIRS[k];
            f(a, b)
        }))
    }

    pub fn to_full(&self) -> Mat<4> {
        std::array::from_fn(|a| std::array::from_fn(|b| self.get(a, b)))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn add(&self, o: &Self) -> Self {
        Self(std::array::from_fn(|k| self.0[k] + o.0[k]))
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self(std::array::from_fn(|k| self.0[k] - o.0[k]))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.map(|v| v * s))
    }

    /// Contraction g^{ab} T_ab with `self` as the inverse metric.
    pub fn contract(&self, t: &SymMatrix4) -> f64 {
        kernels::trace(&self.to_full(), &t.to_full())
    }

    /// g^{00} < 0 after inversion.
    pub fn is_lorentzian(&self) -> Result<bool> {
        Ok(invert_metric(self)?.get(0, 0) < 0.0)
    }
}

/// Pointwise metric with partial derivatives up to `order`.
///
/// `d3` and `d4` are flattened over coordinate indices (μ·16 + ν·4 + λ and
/// μ·64 + ν·16 + λ·4 + σ) and are empty below the corresponding order.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricJet {
    pub order: usize,
    pub value: SymMatrix4,
    pub d1: [SymMatrix4; 4],
    pub d2: [[SymMatrix4; 4]; 4],
    pub d3: Vec<SymMatrix4>,
    pub d4: Vec<SymMatrix4>,
}

impl MetricJet {
    pub fn constant(value: SymMatrix4, order: usize) -> Self {
        Self {
            order,
            value,
            d1: [SymMatrix4::zero(); 4],
            d2: [[SymMatrix4::zero(); 4]; 4],
            d3: if order >= 3 { vec![SymMatrix4::zero(); 64] } else { Vec::new() },
            d4: if order >= 4 { vec![SymMatrix4::zero(); 256] } else { Vec::new() },
        }
    }

    pub fn minkowski(order: usize) -> Self {
        Self::constant(SymMatrix4::minkowski(), order)
    }

    /// Reads partial derivatives from Taylor-expanded components.
    pub fn from_taylor(g: &SymTaylor, order: usize) -> Self {
        let order = order.min(g.iter().map(|t| t.order()).min().unwrap_or(0));
        let comp = |idx: &[usize]| SymMatrix4(std::array::from_fn(|k| g[k].d(idx)));
        let mut jet = Self::constant(comp(&[]), order);
        for m in 0..4 {
            if order >= 1 {
                jet.d1[m] = comp(&[m]);
            }
            for n in 0..4 {
                if order >= 2 {
                    jet.d2[m][n] = comp(&[m, n]);
                }
                for l in 0..4 {
                    if order >= 3 {
                        jet.d3[m * 16 + n * 4 + l] = comp(&[m, n, l]);
                    }
                    for s in 0..4 {
                        if order >= 4 {
                            jet.d4[m * 64 + n * 16 + l * 4 + s] = comp(&[m, n, l, s]);
                        }
                    }
                }
            }
        }
        jet
    }

    pub fn d3(&self, m: usize, n: usize, l: usize) -> &SymMatrix4 {
        &self.d3[m * 16 + n * 4 + l]
    }

    pub fn d4(&self, m: usize, n: usize, l: usize, s: usize) -> &SymMatrix4 {
        &self.d4[m * 64 + n * 16 + l * 4 + s]
    }

    fn require(&self, order: usize) -> Result<()> {
        if self.order < order {
            return Err(Error::DimensionMismatch(format!(
                "metric jet of order {} where order {} is required",
                self.order, order
            )));
        }
        Ok(())
    }

    pub fn dg(&self) -> T3<4> {
        std::array::from_fn(|m| self.d1[m].to_full())
    }

    pub fn ddg(&self) -> T4<4> {
        std::array::from_fn(|m| std::array::from_fn(|n| self.d2[m][n].to_full()))
    }
}

/// Scalar field with first and second partial derivatives at a point.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ScalarJet {
    pub value: f64,
    pub d1: [f64; 4],
    pub d2: [[f64; 4]; 4],
}

/// Connection convention; `christoffel_sign = -1` is a deliberately wrong connection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Convention {
    pub christoffel_sign: f64,
}

impl Default for Convention {
    fn default() -> Self {
        Self { christoffel_sign: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Christoffel(pub [[[f64; 4]; 4]; 4]);

impl Christoffel {
    /// Γ^c_ab
    pub fn get(&self, c: usize, a: usize, b: usize) -> f64 {
        self.0[c][a][b]
    }
}

/// Contracted Christoffel symbols with both index positions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaVector {
    pub upper: [f64; 4],
    pub lower: [f64; 4],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveSplit {
    pub principal: SymMatrix4,
    pub gauge: SymMatrix4,
    pub f: SymMatrix4,
}

pub fn invert_metric(g: &SymMatrix4) -> Result<SymMatrix4> {
    Ok(SymMatrix4::from_full(&kernels::invert(&g.to_full())?))
}

/// H^{ab} = (m + h)^{-1} − m.
pub fn h_to_upper_h(h: &SymMatrix4) -> Result<SymMatrix4> {
    h_to_upper_h_bounded(h, EPS0)
}

pub fn h_to_upper_h_bounded(h: &SymMatrix4, eps0: f64) -> Result<SymMatrix4> {
    let norm = h.max_abs();
    if !(norm <= eps0) {
        return Err(Error::PerturbationTooLarge { norm, limit: eps0 });
    }
    let inv = invert_metric(&SymMatrix4::minkowski().add(h))?;
    Ok(inv.sub(&SymMatrix4::minkowski()))
}

/// h with both indices raised by m.
pub fn raise_with_minkowski(h: &SymMatrix4) -> SymMatrix4 {
    SymMatrix4::from_fn(|a, b| ETA[a] * ETA[b] * h.get(a, b))
}

pub fn christoffel(jet: &MetricJet) -> Result<Christoffel> {
    christoffel_with(jet, Convention::default())
}

pub fn christoffel_with(jet: &MetricJet, conv: Convention) -> Result<Christoffel> {
    jet.require(1)?;
    let ginv = kernels::invert(&jet.value.to_full())?;
    Ok(Christoffel(kernels::christoffel(&ginv, &jet.dg(), conv.christoffel_sign)))
}

pub fn gamma_contracted(jet: &MetricJet) -> Result<GammaVector> {
    jet.require(1)?;
    let g = jet.value.to_full();
    let ginv = kernels::invert(&g)?;
    let gam = kernels::christoffel(&ginv, &jet.dg(), 1.0);
    let upper = kernels::contract(&ginv, &gam);
    let lower = std::array::from_fn(|l| (0..4).map(|b| g[l][b] * upper[b]).sum());
    Ok(GammaVector { upper, lower })
}

fn curvature(jet: &MetricJet, conv: Convention) -> Result<Curvature<4>> {
    jet.require(2)?;
    Curvature::new(&jet.value.to_full(), &jet.dg(), &jet.ddg(), conv.christoffel_sign)
}

pub fn ricci_full(jet: &MetricJet) -> Result<SymMatrix4> {
    ricci_full_with(jet, Convention::default())
}

pub fn ricci_full_with(jet: &MetricJet, conv: Convention) -> Result<SymMatrix4> {
    Ok(SymMatrix4::from_full(&curvature(jet, conv)?.ricci))
}

pub fn scalar_curvature(jet: &MetricJet) -> Result<f64> {
    Ok(curvature(jet, Convention::default())?.scalar())
}

pub fn ricci_wave_split(jet: &MetricJet) -> Result<WaveSplit> {
    let c = curvature(jet, Convention::default())?;
    Ok(WaveSplit {
        principal: SymMatrix4::from_full(&c.principal),
        gauge: SymMatrix4::from_full(&c.gauge),
        f: SymMatrix4::from_full(&c.f_term()),
    })
}

/// N_g = f′(R)G − ½(f − Rf′)g + (g□ − ∇∇)f′(R) from a fourth-order jet.
pub fn modified_gravity_tensor(model: &FRModel, jet: &MetricJet) -> Result<SymMatrix4> {
    modified_gravity_tensor_with(model, jet, Convention::default())
}

/// □_g u = g^{ab}(∂_a∂_b u − Γ^λ_ab ∂_λ u).
pub fn box_scalar(jet: &MetricJet, u: &ScalarJet) -> Result<f64> {
    jet.require(1)?;
    let ginv = kernels::invert(&jet.value.to_full())?;
    let gam = kernels::christoffel(&ginv, &jet.dg(), 1.0);
    let mut out = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            let mut v = u.d2[a][b];
            for l in 0..4 {
                v -= gam[l][a][b] * u.d1[l];
            }
            out += ginv[a][b] * v;
        }
    }
    Ok(out)
}

/// T_ab = ∂_a φ ∂_b φ − ½ g_ab g^{cd} ∂_c φ ∂_d φ.
pub fn stress_energy_jordan(g: &SymMatrix4, dphi: &[f64; 4]) -> Result<SymMatrix4> {
    let ginv = invert_metric(g)?;
    let norm2 = quadratic_form(&ginv, dphi, dphi);
    Ok(SymMatrix4::from_fn(|a, b| dphi[a] * dphi[b] - 0.5 * g.get(a, b) * norm2))
}

/// m^{ab} u_a v_b for a symmetric `m`.
pub fn quadratic_form(m: &SymMatrix4, u: &[f64; 4], v: &[f64; 4]) -> f64 {
    let mut s = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            s += m.get(a, b) * u[a] * v[b];
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taylor::Taylor;

    fn conformal_flat_jet(x0: [f64; 4], psi: impl Fn(&[Taylor; 4]) -> Taylor) -> (MetricJet, Taylor) {
        let x: [Taylor; 4] = std::array::from_fn(|m| Taylor::var(m, x0[m], 4));
        let p = psi(&x);
        let e = (p * 2.0).exp();
        let g: SymTaylor = std::array::from_fn(|k| {
            let (a, b) = SYM_PAIRS[k];
            if a == b {
                e * ETA[a]
            } else {
                Taylor::zero(4)
            }
        });
        (MetricJet::from_taylor(&g, 4), p)
    }

    #[test]
    fn minkowski_is_flat() {
        let j = MetricJet::minkowski(2);
        assert_eq!(ricci_full(&j).unwrap(), SymMatrix4::zero());
        assert_eq!(gamma_contracted(&j).unwrap().upper, [0.0; 4]);
        let s = ricci_wave_split(&j).unwrap();
        assert_eq!(s.f, SymMatrix4::zero());
        assert_eq!(invert_metric(&SymMatrix4::minkowski()).unwrap(), SymMatrix4::minkowski());
    }

    #[test]
    fn inverse_of_diagonal() {
        let g = SymMatrix4::diag([-4.0, 1.0, 1.0, 1.0]);
        let gi = invert_metric(&g).unwrap();
        assert!((gi.get(0, 0) + 0.25).abs() < 1e-16);
    }

    #[test]
    fn upper_h_of_time_perturbation() {
        let h = SymMatrix4::diag([0.1, 0.0, 0.0, 0.0]);
        let big = h_to_upper_h(&h).unwrap();
        assert!((big.get(0, 0) - (1.0 / -0.9 + 1.0)).abs() < 1e-15);
        assert!((big.get(0, 0) + 0.111_111_111_111_111_1).abs() < 1e-15);
        assert_eq!(h_to_upper_h(&SymMatrix4::zero()).unwrap(), SymMatrix4::zero());
        let big_h = SymMatrix4::diag([0.3, 0.0, 0.0, 0.0]);
        assert!(matches!(h_to_upper_h(&big_h), Err(Error::PerturbationTooLarge { .. })));
    }

    #[test]
    fn conformal_christoffel_of_linear_factor() {
        let a = 0.3;
        let (jet, _) = conformal_flat_jet([0.1, 0.2, -0.1, 0.4], |x| x[1] * a);
        let gam = christoffel(&jet).unwrap();
        let dpsi = [0.0, a, 0.0, 0.0];
        for c in 0..4 {
            for al in 0..4 {
                for be in 0..4 {
                    let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
                    let m_ab = if al == be { ETA[al] } else { 0.0 };
                    let expect = d(c, al) * dpsi[be] + d(c, be) * dpsi[al] - m_ab * ETA[c] * dpsi[c];
                    assert!((gam.get(c, al, be) - expect).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn conformal_contracted_symbols() {
        let (jet, p) =
            conformal_flat_jet([0.1, 0.2, -0.1, 0.4], |x| (x[0] * 0.5 + x[2] * 0.3).sin() * 0.2 + x[1] * x[3] * 0.1);
        let gv = gamma_contracted(&jet).unwrap();
        let e = (-2.0 * p.value()).exp();
        for l in 0..4 {
            let expect = -2.0 * e * ETA[l] * p.d(&[l]);
            assert!((gv.upper[l] - expect).abs() < 1e-13);
            let low: f64 = (0..4).map(|b| jet.value.get(l, b) * gv.upper[b]).sum();
            assert!((gv.lower[l] - low).abs() < 1e-12);
        }
    }

    #[test]
    fn box_scalar_examples() {
        let j = MetricJet::minkowski(1);
        let mut u = ScalarJet::default();
        u.d2[0][0] = 2.0;
        assert!((box_scalar(&j, &u).unwrap() + 2.0).abs() < 1e-15);
        let mut u = ScalarJet::default();
        for i in 1..4 {
            u.d2[i][i] = 2.0;
        }
        assert!((box_scalar(&j, &u).unwrap() - 6.0).abs() < 1e-15);
    }

    #[test]
    fn stress_energy_examples() {
        let m = SymMatrix4::minkowski();
        assert_eq!(stress_energy_jordan(&m, &[0.0; 4]).unwrap(), SymMatrix4::zero());
        let t = stress_energy_jordan(&m, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(t, SymMatrix4::diag([0.5; 4]));
    }

    #[test]
    fn ricci_is_scale_invariant() {
        let (jet, _) = conformal_flat_jet([0.0, 0.1, 0.2, 0.3], |x| (x[1] * x[2]).sin() * 0.3);
        let mut scaled = jet.clone();
        let c2 = 2.5;
        scaled.value = scaled.value.scale(c2);
        for m in 0..4 {
            scaled.d1[m] = scaled.d1[m].scale(c2);
            for n in 0..4 {
                scaled.d2[m][n] = scaled.d2[m][n].scale(c2);
            }
        }
        let r1 = ricci_full(&jet).unwrap();
        let r2 = ricci_full(&scaled).unwrap();
        assert!(r1.sub(&r2).max_abs() < 1e-13);
    }
}
