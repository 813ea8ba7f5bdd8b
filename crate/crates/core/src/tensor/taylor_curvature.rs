//! Curvature computed in truncated Taylor arithmetic.
//!
//! Carrying whole expansions instead of values gives the curvature together
//! with its own derivatives, which the modified gravity tensor needs
//! (∇∇f′(R) involves four derivatives of the metric).

use super::{kernels, Convention, MetricJet, SymMatrix4, SYM_INDEX, SYM_PAIRS};
use crate::error::{Error, Result};
use crate::frmodel::FRModel;
use crate::taylor::Taylor;

/// Symmetric tensor with Taylor-expanded components in upper-triangle order.
pub type SymTaylor = [Taylor; 10];

type TMat = [[Taylor; 4]; 4];

fn full(g: &SymTaylor) -> TMat {
    std::array::from_fn(|a| std::array::from_fn(|b| g[SYM_INDEX[a][b]]))
}

fn matmul(a: &TMat, b: &TMat, order: usize) -> TMat {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let mut s = Taylor::zero(order);
            for k in 0..4 {
                s += a[i][k] * b[k][j];
            }
            s
        })
    })
}

/// Expands a jet into Taylor components of the jet's order.
pub fn lift_metric(jet: &MetricJet) -> SymTaylor {
    std::array::from_fn(|k| {
        Taylor::from_partials(jet.order, |e| {
            let mut idx = Vec::with_capacity(4);
            for (m, &n) in e.iter().enumerate() {
                for _ in 0..n {
                    idx.push(m);
                }
            }
            match idx.len() {
                0 => jet.value.0[k],
                1 => jet.d1[idx[0]].0[k],
                2 => jet.d2[idx[0]][idx[1]].0[k],
                3 => jet.d3(idx[0], idx[1], idx[2]).0[k],
                _ => jet.d4(idx[0], idx[1], idx[2], idx[3]).0[k],
            }
        })
    })
}

/// g^{-1} as a Neumann series about the value at the expansion point.
pub fn inverse_taylor(g: &SymTaylor) -> Result<TMat> {
    let order = g.iter().map(|t| t.order()).min().unwrap_or(0);
    let g0 = SymMatrix4(std::array::from_fn(|k| g[k].value())).to_full();
    let inv0 = kernels::invert(&g0)?;
    let gf = full(g);
    let inv0_t: TMat = std::array::from_fn(|a| std::array::from_fn(|b| Taylor::constant(inv0[a][b], order)));
    // E = g0^{-1}(g − g0), nilpotent beyond `order`
    let mut dg = gf;
    for a in 0..4 {
        for b in 0..4 {
            dg[a][b] = dg[a][b] + (-g0[a][b]);
        }
    }
    let e = matmul(&inv0_t, &dg, order);
    let mut term = inv0_t;
    let mut sum = inv0_t;
    for _ in 0..order {
        let next = matmul(&e, &term, order);
        term = std::array::from_fn(|a| std::array::from_fn(|b| -next[a][b]));
        for a in 0..4 {
            for b in 0..4 {
                sum[a][b] += term[a][b];
            }
        }
    }
    Ok(sum)
}

/// e^{2ρ} g.
pub fn conformal_taylor(g: &SymTaylor, rho: &Taylor) -> SymTaylor {
    let e = (*rho * 2.0).exp();
    std::array::from_fn(|k| e * g[k])
}

pub struct TaylorCurvature {
    pub ginv: TMat,
    /// Γ^λ_ab, one order below the metric.
    pub gam: [TMat; 4],
    /// R_ab, two orders below the metric.
    pub ricci: TMat,
    /// R, two orders below the metric.
    pub scalar: Taylor,
}

pub fn ricci_taylor(g: &SymTaylor, conv: Convention) -> Result<TaylorCurvature> {
    let order = g.iter().map(|t| t.order()).min().unwrap_or(0);
    if order < 2 {
        return Err(Error::DimensionMismatch("curvature needs a metric of order >= 2".into()));
    }
    let ginv = inverse_taylor(g)?;
    let gf = full(g);
    let dg: [TMat; 4] = std::array::from_fn(|m| std::array::from_fn(|a| std::array::from_fn(|b| gf[a][b].deriv(m))));
    let z1 = Taylor::zero(order - 1);
    let mut lower = [[[z1; 4]; 4]; 4];
    for s in 0..4 {
        for a in 0..4 {
            for b in a..4 {
                let v = (dg[a][b][s] + dg[b][a][s] - dg[s][a][b]) * 0.5;
                lower[s][a][b] = v;
                lower[s][b][a] = v;
            }
        }
    }
    let mut gam = [[[z1; 4]; 4]; 4];
    for l in 0..4 {
        for a in 0..4 {
            for b in a..4 {
                let mut v = z1;
                for s in 0..4 {
                    v += ginv[l][s] * lower[s][a][b];
                }
                let v = v * conv.christoffel_sign;
                gam[l][a][b] = v;
                gam[l][b][a] = v;
            }
        }
    }
    let z2 = Taylor::zero(order - 2);
    let mut trace = [z2; 4];
    for (l, t) in trace.iter_mut().enumerate() {
        for d in 0..4 {
            *t += gam[d][l][d];
        }
    }
    let mut ricci = [[z2; 4]; 4];
    for a in 0..4 {
        for b in a..4 {
            let mut v = z2;
            for l in 0..4 {
                v += gam[l][a][b].deriv(l) - gam[l][a][l].deriv(b) + gam[l][a][b] * trace[l];
                for d in 0..4 {
                    v = v - gam[l][a][d] * gam[d][b][l];
                }
            }
            ricci[a][b] = v;
            ricci[b][a] = v;
        }
    }
    let mut scalar = z2;
    for a in 0..4 {
        for b in 0..4 {
            scalar += ginv[a][b] * ricci[a][b];
        }
    }
    Ok(TaylorCurvature { ginv, gam, ricci, scalar })
}

pub fn scalar_curvature_taylor(g: &SymTaylor, conv: Convention) -> Result<Taylor> {
    Ok(ricci_taylor(g, conv)?.scalar)
}

/// N_g = f′(R)G − ½(f − Rf′)g + g□f′ − ∇∇f′ at the jet's base point.
pub fn modified_gravity_tensor_with(model: &FRModel, jet: &MetricJet, conv: Convention) -> Result<SymMatrix4> {
    if jet.order < 4 {
        return Err(Error::DimensionMismatch("modified gravity tensor needs a fourth-order jet".into()));
    }
    let g = lift_metric(jet);
    let c = ricci_taylor(&g, conv)?;
    let r = c.scalar.value();
    let fp_val = model.f_prime(r);
    if fp_val <= 0.0 {
        return Err(Error::NonPositiveConformalFactor(fp_val));
    }
    let fp = c.scalar * model.kappa + 1.0;
    let gv = jet.value;
    let ginv: [[f64; 4]; 4] = std::array::from_fn(|a| std::array::from_fn(|b| c.ginv[a][b].value()));
    let mut hess = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            let mut v = fp.d(&[a, b]);
            for l in 0..4 {
                v -= c.gam[l][a][b].value() * fp.d(&[l]);
            }
            hess[a][b] = v;
        }
    }
    let box_fp = kernels::trace(&ginv, &hess);
    let f = model.f_eval(r);
    Ok(SymMatrix4(std::array::from_fn(|k| {
        let (a, b) = SYM_PAIRS[k];
        let gab = gv.get(a, b);
        let einstein = c.ricci[a][b].value() - 0.5 * gab * r;
        fp_val * einstein - 0.5 * (f - r * fp_val) * gab + gab * box_fp - hess[a][b]
    })))
}
