//! Dimension-generic curvature kernels on dense arrays.
//!
//! Conventions: `dg[μ][a][b] = ∂_μ g_ab`, `ddg[μ][ν][a][b] = ∂_μ∂_ν g_ab`,
//! `gam[λ][a][b] = Γ^λ_ab`, `dgam[μ][λ][a][b] = ∂_μ Γ^λ_ab`.
//! `sign` multiplies every Christoffel symbol; it is 1 except in negative
//! controls that deliberately corrupt the connection.

use crate::error::{Error, Result};

pub type Mat<const D: usize> = [[f64; D]; D];
pub type T3<const D: usize> = [[[f64; D]; D]; D];
pub type T4<const D: usize> = [[[[f64; D]; D]; D]; D];

pub fn zeros3<const D: usize>() -> T3<D> {
    [[[0.0; D]; D]; D]
}

pub fn zeros4<const D: usize>() -> T4<D> {
    [[[[0.0; D]; D]; D]; D]
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
///
/// Fails with `SingularMetric` when |det| ≤ 1e-14·scale^D.
pub fn invert<const D: usize>(g: &Mat<D>) -> Result<Mat<D>> {
    let scale = g.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if !scale.is_finite() || scale == 0.0 {
        return Err(Error::SingularMetric { det: 0.0 });
    }
    let mut a = *g;
    let mut inv = [[0.0; D]; D];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut det = 1.0;
    for col in 0..D {
        let piv = (col..D).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        if piv != col {
            a.swap(piv, col);
            inv.swap(piv, col);
            det = -det;
        }
        let p = a[col][col];
        det *= p;
        if p == 0.0 {
            return Err(Error::SingularMetric { det: 0.0 });
        }
        for k in 0..D {
            a[col][k] /= p;
            inv[col][k] /= p;
        }
        for r in 0..D {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for k in 0..D {
                        a[r][k] -= f * a[col][k];
                        inv[r][k] -= f * inv[col][k];
                    }
                }
            }
        }
    }
    if det.abs() <= 1e-14 * scale.powi(D as i32) {
        return Err(Error::SingularMetric { det });
    }
    Ok(inv)
}

/// Γ^λ_ab = ½ g^{λσ}(∂_a g_bσ + ∂_b g_aσ − ∂_σ g_ab).
pub fn christoffel<const D: usize>(ginv: &Mat<D>, dg: &T3<D>, sign: f64) -> T3<D> {
    let mut lower = zeros3::<D>();
    for s in 0..D {
        for a in 0..D {
            for b in a..D {
                let v = 0.5 * (dg[a][b][s] + dg[b][a][s] - dg[s][a][b]);
                lower[s][a][b] = v;
                lower[s][b][a] = v;
            }
        }
    }
    let mut gam = zeros3::<D>();
    for l in 0..D {
        for a in 0..D {
            for b in a..D {
                let mut v = 0.0;
                for s in 0..D {
                    v += ginv[l][s] * lower[s][a][b];
                }
                gam[l][a][b] = sign * v;
                gam[l][b][a] = sign * v;
            }
        }
    }
    gam
}

/// ∂_μ g^{ab} = −g^{ac} ∂_μ g_cd g^{db}.
pub fn d_inverse<const D: usize>(ginv: &Mat<D>, dg: &T3<D>) -> T3<D> {
    let mut out = zeros3::<D>();
    for m in 0..D {
        let mut tmp = [[0.0; D]; D];
        for a in 0..D {
            for d in 0..D {
                let mut v = 0.0;
                for c in 0..D {
                    v += ginv[a][c] * dg[m][c][d];
                }
                tmp[a][d] = v;
            }
        }
        for a in 0..D {
            for b in 0..D {
                let mut v = 0.0;
                for d in 0..D {
                    v += tmp[a][d] * ginv[d][b];
                }
                out[m][a][b] = -v;
            }
        }
    }
    out
}

/// ∂_μ Γ^λ_ab from the metric, its inverse and two derivatives.
pub fn d_christoffel<const D: usize>(ginv: &Mat<D>, dginv: &T3<D>, dg: &T3<D>, ddg: &T4<D>, sign: f64) -> T4<D> {
    let mut out = zeros4::<D>();
    for m in 0..D {
        for l in 0..D {
            for a in 0..D {
                for b in a..D {
                    let mut v = 0.0;
                    for s in 0..D {
                        let first = dg[a][b][s] + dg[b][a][s] - dg[s][a][b];
                        let second = ddg[m][a][b][s] + ddg[m][b][a][s] - ddg[m][s][a][b];
                        v += dginv[m][l][s] * first + ginv[l][s] * second;
                    }
                    out[m][l][a][b] = sign * 0.5 * v;
                    out[m][l][b][a] = sign * 0.5 * v;
                }
            }
        }
    }
    out
}

/// R_ab = ∂_λ Γ^λ_ab − ∂_b Γ^λ_aλ + Γ^λ_ab Γ^δ_λδ − Γ^λ_aδ Γ^δ_bλ.
pub fn ricci<const D: usize>(gam: &T3<D>, dgam: &T4<D>) -> Mat<D> {
    let mut trace = [0.0; D];
    for (l, t) in trace.iter_mut().enumerate() {
        for d in 0..D {
            *t += gam[d][l][d];
        }
    }
    let mut r = [[0.0; D]; D];
    for a in 0..D {
        for b in a..D {
            let mut v = 0.0;
            for l in 0..D {
                v += dgam[l][l][a][b] - dgam[b][l][a][l] + gam[l][a][b] * trace[l];
                for d in 0..D {
                    v -= gam[l][a][d] * gam[d][b][l];
                }
            }
            r[a][b] = v;
            r[b][a] = v;
        }
    }
    r
}

pub fn trace<const D: usize>(ginv: &Mat<D>, t: &Mat<D>) -> f64 {
    let mut s = 0.0;
    for a in 0..D {
        for b in 0..D {
            s += ginv[a][b] * t[a][b];
        }
    }
    s
}

/// Contracted symbols Γ^λ = g^{ab} Γ^λ_ab.
pub fn contract<const D: usize>(ginv: &Mat<D>, gam: &T3<D>) -> [f64; D] {
    std::array::from_fn(|l| trace(ginv, &gam[l]))
}

/// ∂_μ Γ_λ for Γ_λ = g_λβ Γ^β.
pub fn d_contracted_lower<const D: usize>(
    g: &Mat<D>,
    ginv: &Mat<D>,
    dg: &T3<D>,
    dginv: &T3<D>,
    gam: &T3<D>,
    dgam: &T4<D>,
) -> Mat<D> {
    let up = contract(ginv, gam);
    let mut dup = [[0.0; D]; D];
    for m in 0..D {
        for l in 0..D {
            dup[m][l] = trace(&dginv[m], &gam[l]) + trace(ginv, &dgam[m][l]);
        }
    }
    let mut out = [[0.0; D]; D];
    for m in 0..D {
        for l in 0..D {
            let mut v = 0.0;
            for b in 0..D {
                v += dg[m][l][b] * up[b] + g[l][b] * dup[m][b];
            }
            out[m][l] = v;
        }
    }
    out
}

/// Everything derived from a second-order metric jet at one point.
pub struct Curvature<const D: usize> {
    pub ginv: Mat<D>,
    pub gam: T3<D>,
    pub ricci: Mat<D>,
    /// ½(∂_a Γ_b + ∂_b Γ_a)
    pub gauge: Mat<D>,
    /// −½ g^{μν} ∂_μ∂_ν g_ab
    pub principal: Mat<D>,
}

impl<const D: usize> Curvature<D> {
    pub fn new(g: &Mat<D>, dg: &T3<D>, ddg: &T4<D>, sign: f64) -> Result<Self> {
        let ginv = invert(g)?;
        Ok(Self::with_inverse(g, ginv, dg, ddg, sign))
    }

    pub fn with_inverse(g: &Mat<D>, ginv: Mat<D>, dg: &T3<D>, ddg: &T4<D>, sign: f64) -> Self {
        let gam = christoffel(&ginv, dg, sign);
        let dginv = d_inverse(&ginv, dg);
        let dgam = d_christoffel(&ginv, &dginv, dg, ddg, sign);
        let ricci = ricci(&gam, &dgam);
        let dl = d_contracted_lower(g, &ginv, dg, &dginv, &gam, &dgam);
        let mut gauge = [[0.0; D]; D];
        let mut principal = [[0.0; D]; D];
        for a in 0..D {
            for b in 0..D {
                gauge[a][b] = 0.5 * (dl[a][b] + dl[b][a]);
                let mut p = 0.0;
                for m in 0..D {
                    for n in 0..D {
                        p += ginv[m][n] * ddg[m][n][a][b];
                    }
                }
                principal[a][b] = -0.5 * p;
            }
        }
        Self { ginv, gam, ricci, gauge, principal }
    }

    pub fn scalar(&self) -> f64 {
        trace(&self.ginv, &self.ricci)
    }

    /// F_ab := 2 R_ab − 2 principal − 2 gauge.
    pub fn f_term(&self) -> Mat<D> {
        let mut f = [[0.0; D]; D];
        for a in 0..D {
            for b in 0..D {
                f[a][b] = 2.0 * (self.ricci[a][b] - self.principal[a][b] - self.gauge[a][b]);
            }
        }
        f
    }
}

/// The first-order quadratic remainder F_ab(g; ∂g, ∂g) of the wave-gauge Ricci split.
///
/// Evaluated as the split remainder of a jet whose second derivatives vanish.
pub fn f_first_order<const D: usize>(g: &Mat<D>, ginv: Mat<D>, dg: &T3<D>) -> (Mat<D>, T3<D>) {
    let c = Curvature::with_inverse(g, ginv, dg, &zeros4::<D>(), 1.0);
    (c.f_term(), c.gam)
}
