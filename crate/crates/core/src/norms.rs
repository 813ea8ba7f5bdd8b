//! Discrete weighted Sobolev norms, energy functionals and the comparison
//! distance between an Einstein and an f(R) state.
//!
//! Quadrature is the periodic rectangle rule with cell volume h^dims. The
//! derivative families use ordered sequences of spatial derivatives ∂_a and
//! (in 3D) rotations Ω_ab; in 1D only ∂_x is available.

use crate::error::{Error, Result};
use crate::fields::{omega_apply, slot, sum_squares, FieldState, Grid, GridFunction};
use crate::tensor::{kernels, ETA, SYM_PAIRS};

const ROTATIONS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

fn l2(grid: &Grid, v: &[f64]) -> f64 {
    (sum_squares(v) * grid.cell_volume()).sqrt()
}

fn derivative(u: &GridFunction, axis: usize) -> GridFunction {
    let mut out = GridFunction::zeros(u.grid);
    u.grid.d1_into(&u.values, axis, &mut out.values);
    out
}

/// Every Ω^{I₂}u with |I₂| ≤ k, grouped by length.
fn rotation_family(u: &GridFunction, k: usize) -> Result<Vec<Vec<GridFunction>>> {
    let mut levels = vec![vec![u.clone()]];
    if u.grid.dims == 1 {
        return Ok(levels);
    }
    for _ in 0..k {
        let mut next = Vec::new();
        for v in levels.last().unwrap() {
            for &(a, b) in &ROTATIONS {
                next.push(omega_apply(v, a, b)?);
            }
        }
        levels.push(next);
    }
    Ok(levels)
}

/// Σ over |I₁|+|I₂| ≤ d of ‖∂^{I₁}Ω^{I₂}u‖_{L²}.
pub fn x_norm(u: &GridFunction, d: usize) -> f64 {
    let grid = u.grid;
    let rot = rotation_family(u, d).expect("rotations are defined on 3D grids");
    let mut total = 0.0;
    for (l, level) in rot.iter().enumerate() {
        for v in level {
            let mut frontier = vec![v.clone()];
            total += l2(&grid, &v.values);
            for _ in l..d {
                let mut next = Vec::with_capacity(frontier.len() * grid.dims);
                for w in &frontier {
                    for a in 0..grid.dims {
                        let dw = derivative(w, a);
                        total += l2(&grid, &dw.values);
                        next.push(dw);
                    }
                }
                frontier = next;
            }
        }
    }
    total
}

/// Σ_a ‖∂_a u‖_{X^d}, the X_P^{d+1} norm.
pub fn x_p_norm(u: &GridFunction, d: usize) -> f64 {
    (0..u.grid.dims).map(|a| x_norm(&derivative(u, a), d)).sum()
}

/// max (1 + r)|u| with r measured from the box center.
pub fn e_minus1(u: &GridFunction) -> f64 {
    let g = u.grid;
    u.values.iter().enumerate().fold(0.0, |m, (i, v)| m.max((1.0 + g.radius(i)) * v.abs()))
}

/// E_P^d: ‖∂_t u‖_{X^{d−1}} + Σ_a ‖∂_a u‖_{X^{d−1}}; zero for d = 0.
pub fn e_p(u: &GridFunction, ut: &GridFunction, d: usize) -> Result<f64> {
    u.grid.check_same(&ut.grid)?;
    if d == 0 {
        return Ok(0.0);
    }
    Ok(x_norm(ut, d - 1) + x_p_norm(u, d - 1))
}

/// E_H^d = E_{−1} + E_P^d.
pub fn e_h(u: &GridFunction, ut: &GridFunction, d: usize) -> Result<f64> {
    Ok(e_minus1(u) + e_p(u, ut, d)?)
}

fn slice_inverse(h: Option<&FieldState>, i: usize) -> Result<[[f64; 4]; 4]> {
    let Some(s) = h else {
        return Ok(std::array::from_fn(|a| std::array::from_fn(|b| if a == b { ETA[a] } else { 0.0 })));
    };
    let mut g = [[0.0; 4]; 4];
    for (k, &(a, b)) in SYM_PAIRS.iter().enumerate() {
        let v = if a == b { ETA[a] } else { 0.0 } + s.field(slot::H + k)[i];
        g[a][b] = v;
        g[b][a] = v;
    }
    kernels::invert(&g)
}

/// √∫(−g^{00}u_t² + g^{ab}∂_a u ∂_b u + c²u²); flat metric when `h` is `None`.
///
/// The integrand must be a positive definite form in (u_t, ∇u) at every point.
pub fn energy_c(grid: &Grid, h: Option<&FieldState>, u: &[f64], ut: &[f64], c: f64) -> Result<f64> {
    let n = grid.len();
    if u.len() != n || ut.len() != n {
        return Err(Error::DimensionMismatch("energy fields do not match the grid".into()));
    }
    if let Some(s) = h {
        grid.check_same(&s.grid)?;
    }
    let mut du = vec![vec![0.0; n]; grid.dims];
    for (a, d) in du.iter_mut().enumerate() {
        grid.d1_into(u, a, d);
    }
    let t = h.map_or(0.0, |s| s.t);
    let mut dens = vec![0.0; n];
    for i in 0..n {
        let gi = slice_inverse(h, i)?;
        let m: [[f64; 3]; 3] = std::array::from_fn(|a| std::array::from_fn(|b| gi[a + 1][b + 1]));
        let pd = m[0][0] > 0.0
            && m[0][0] * m[1][1] - m[0][1] * m[1][0] > 0.0
            && m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
                > 0.0;
        if !(gi[0][0] < 0.0 && pd) {
            return Err(Error::CoercivityLost { t, h00: (gi[0][0] + 1.0).abs() });
        }
        let mut q = -gi[0][0] * ut[i] * ut[i] + c * c * u[i] * u[i];
        for a in 0..grid.dims {
            for b in 0..grid.dims {
                q += gi[a + 1][b + 1] * du[a][i] * du[b][i];
            }
        }
        dens[i] = q;
    }
    Ok((crate::fields::sum(&dens) * grid.cell_volume()).max(0.0).sqrt())
}

pub fn energy(grid: &Grid, h: Option<&FieldState>, u: &[f64], ut: &[f64]) -> Result<f64> {
    energy_c(grid, h, u, ut, 0.0)
}

fn diff(a: &FieldState, b: &FieldState, s: usize) -> GridFunction {
    GridFunction { grid: a.grid, values: a.field(s).iter().zip(b.field(s)).map(|(x, y)| x - y).collect() }
}

/// D^d = Σ_ab ‖Δh_ab‖_{E_H^d} + ‖Δφ‖_{E_P^d}.
pub fn comparison_distance(a: &FieldState, b: &FieldState, d: usize) -> Result<f64> {
    a.grid.check_same(&b.grid)?;
    let mut total = 0.0;
    for k in 0..10 {
        total += e_h(&diff(a, b, slot::H + k), &diff(a, b, slot::HT + k), d)?;
    }
    total += e_p(&diff(a, b, slot::PHI), &diff(a, b, slot::PHIT), d)?;
    Ok(total)
}

/// D^d plus ‖Δϱ‖_{E_P^d} + c‖Δϱ‖_{L²}; the distance between Picard iterates.
pub fn state_distance(a: &FieldState, b: &FieldState, d: usize, c: f64) -> Result<f64> {
    let base = comparison_distance(a, b, d)?;
    let dr = diff(a, b, slot::RHO);
    Ok(base + e_p(&dr, &diff(a, b, slot::RHOT), d)? + c * l2(&a.grid, &dr.values))
}

/// Norms of one state.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NormReport {
    pub t: f64,
    pub x_phi: f64,
    pub xp_phi: f64,
    /// max over components of E_{−1}(h_ab)
    pub e_minus1_h: f64,
    pub energy_phi: f64,
    /// E_{g,c}(ϱ) with c = κ^{−1/2}
    pub energy_rho: f64,
    /// Σ_ab E_g(h_ab)
    pub energy_h: f64,
}

impl NormReport {
    pub const CSV_HEADER: &'static str = "t,x_phi,xp_phi,e_minus1_h,energy_phi,energy_rho,energy_h";

    pub fn csv_row(&self) -> String {
        [self.t, self.x_phi, self.xp_phi, self.e_minus1_h, self.energy_phi, self.energy_rho, self.energy_h]
            .iter()
            .map(|x| format!("{x:.12e}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

pub fn norm_report(state: &FieldState, d: usize, kappa: f64) -> Result<NormReport> {
    let g = state.grid;
    let phi = state.grid_function(slot::PHI);
    let mut energy_h = 0.0;
    let mut e_minus1_h = 0.0f64;
    for k in 0..10 {
        energy_h += energy(&g, Some(state), state.field(slot::H + k), state.field(slot::HT + k))?;
        e_minus1_h = e_minus1_h.max(e_minus1(&state.grid_function(slot::H + k)));
    }
    Ok(NormReport {
        t: state.t,
        x_phi: x_norm(&phi, d),
        xp_phi: x_p_norm(&phi, d),
        e_minus1_h,
        energy_phi: energy(&g, Some(state), state.field(slot::PHI), state.field(slot::PHIT))?,
        energy_rho: energy_c(&g, Some(state), state.field(slot::RHO), state.field(slot::RHOT), kappa.powf(-0.5))?,
        energy_h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn zero_field_has_zero_norms() {
        let g = Grid::three_d(8, -1.0, 1.0).unwrap();
        let u = GridFunction::zeros(g);
        assert_eq!(x_norm(&u, 2), 0.0);
        assert_eq!(e_minus1(&u), 0.0);
        assert_eq!(energy(&g, None, &u.values, &u.values).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_l2_value() {
        let g = Grid::three_d(48, -6.0, 6.0).unwrap();
        let u = g.sample(|x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp());
        let expect = (PI / 2.0).powf(0.75);
        assert!((x_norm(&u, 0) - expect).abs() < 1e-10, "{}", x_norm(&u, 0));
    }

    #[test]
    fn weight_cancels_for_inverse_radius() {
        let g = Grid::three_d(10, -2.0, 2.0).unwrap();
        let u = GridFunction { grid: g, values: (0..g.len()).map(|i| 1.0 / (1.0 + g.radius(i))).collect() };
        assert!((e_minus1(&u) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn flat_energy_of_sine() {
        let g = Grid::three_d(48, 0.0, TAU).unwrap();
        let u = g.sample(|x| x[0].sin());
        let zero = vec![0.0; g.len()];
        let e = energy(&g, None, &u.values, &zero).unwrap();
        assert!((e - (PI * TAU * TAU).sqrt()).abs() < 5e-4, "{e}");
        let ones = vec![1.0; g.len()];
        let g1 = Grid::three_d(8, 0.0, 1.0).unwrap();
        assert!((energy_c(&g1, None, &ones[..g1.len()], &zero[..g1.len()], 1.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sobolev_ratio_is_resolution_independent() {
        let ratio = |n: usize| {
            let g = Grid::three_d(n, -8.0, 8.0).unwrap();
            let u = g.sample(|x| {
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                (1.0 + r) * (-r * r / 4.0).exp()
            });
            e_minus1(&u) / x_norm(&u, 2)
        };
        let (a, b) = (ratio(32), ratio(64));
        assert!((a / b - 1.0).abs() < 0.01, "{a} {b}");
    }

    #[test]
    fn energy_coercivity_constant() {
        // E_g against the flat gradient norm for |h| ≤ 0.1
        let g = Grid::three_d(12, 0.0, TAU).unwrap();
        let mut s = FieldState::zeros(g);
        for i in 0..g.len() {
            let x = g.coords(i);
            for k in 0..10 {
                s.field_mut(slot::H + k)[i] = 0.1 * ((k as f64 + 1.0) * 0.7 + x[0] + 2.0 * x[1] - x[2]).sin();
            }
        }
        let u = g.sample(|x| x[0].sin() * x[1].cos() + 0.5 * x[2].sin());
        let ut = g.sample(|x| (x[0] + x[1]).cos());
        let e = energy(&g, Some(&s), &u.values, &ut.values).unwrap();
        let flat = energy(&g, None, &u.values, &ut.values).unwrap();
        let c = (e / flat).max(flat / e);
        assert!(c <= 1.2, "{c}");
    }

    #[test]
    fn monotone_in_derivative_count() {
        let g = Grid::three_d(10, -3.0, 3.0).unwrap();
        let u = g.sample(|x| (-(x[0] * x[0] + 2.0 * x[1] * x[1] + 0.5 * x[2] * x[2])).exp());
        assert!(x_norm(&u, 1) >= x_norm(&u, 0));
        assert!(x_norm(&u, 2) >= x_norm(&u, 1));
    }

    fn field(dims: usize, n: usize) -> impl Strategy<Value = GridFunction> {
        let grid = Grid::new(dims, n, -2.0, 2.0, crate::fields::Stencil::Order4).unwrap();
        prop::collection::vec(-1.0f64..1.0, grid.len()).prop_map(move |v| GridFunction { grid, values: v })
    }

    fn scaled(u: &GridFunction, c: f64) -> GridFunction {
        u.map(|v| c * v)
    }

    fn sum(a: &GridFunction, b: &GridFunction) -> GridFunction {
        a.zip_with(b, |x, y| x + y).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn norms_are_homogeneous_and_subadditive(u in field(1, 16), v in field(1, 16), c in -3.0f64..3.0) {
            let tol = 1e-12;
            for d in 0..3 {
                let nu = x_norm(&u, d);
                prop_assert!((x_norm(&scaled(&u, c), d) - c.abs() * nu).abs() <= tol * (1.0 + nu));
                prop_assert!(x_norm(&sum(&u, &v), d) <= nu + x_norm(&v, d) + tol);
                let pu = x_p_norm(&u, d);
                prop_assert!((x_p_norm(&scaled(&u, c), d) - c.abs() * pu).abs() <= tol * (1.0 + pu));
                prop_assert!(x_p_norm(&sum(&u, &v), d) <= pu + x_p_norm(&v, d) + tol);
            }
            let e = e_minus1(&u);
            prop_assert!((e_minus1(&scaled(&u, c)) - c.abs() * e).abs() <= tol * (1.0 + e));
            prop_assert!(e_minus1(&sum(&u, &v)) <= e + e_minus1(&v) + tol);
            let g = u.grid;
            let en = energy_c(&g, None, &u.values, &v.values, 0.7).unwrap();
            let su = scaled(&u, c);
            let sv = scaled(&v, c);
            prop_assert!((energy_c(&g, None, &su.values, &sv.values, 0.7).unwrap() - c.abs() * en).abs() <= tol * (1.0 + en));
        }

        #[test]
        fn three_d_norms_are_homogeneous_and_subadditive(u in field(3, 5), v in field(3, 5), c in -3.0f64..3.0) {
            let tol = 1e-12;
            for d in 0..2 {
                let nu = x_norm(&u, d);
                prop_assert!((x_norm(&scaled(&u, c), d) - c.abs() * nu).abs() <= tol * (1.0 + nu));
                prop_assert!(x_norm(&sum(&u, &v), d) <= nu + x_norm(&v, d) + tol);
            }
        }
    }

    fn random_state(grid: Grid) -> impl Strategy<Value = FieldState> {
        prop::collection::vec(-0.05f64..0.05, slot::COUNT * grid.len()).prop_map(move |data| FieldState {
            t: 0.0,
            grid,
            data,
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn comparison_distance_is_a_metric(
            a in random_state(Grid::one_d(12, 0.0, 1.0).unwrap()),
            b in random_state(Grid::one_d(12, 0.0, 1.0).unwrap()),
            c in random_state(Grid::one_d(12, 0.0, 1.0).unwrap()),
        ) {
            prop_assert_eq!(comparison_distance(&a, &a, 1).unwrap(), 0.0);
            let ab = comparison_distance(&a, &b, 1).unwrap();
            let ba = comparison_distance(&b, &a, 1).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-14 * ab);
            let ac = comparison_distance(&a, &c, 1).unwrap();
            let cb = comparison_distance(&c, &b, 1).unwrap();
            prop_assert!(ab <= ac + cb + 1e-14);
        }
    }

    #[test]
    fn distance_rejects_grid_mismatch() {
        let a = FieldState::zeros(Grid::one_d(8, 0.0, 1.0).unwrap());
        let b = FieldState::zeros(Grid::one_d(16, 0.0, 1.0).unwrap());
        assert!(matches!(comparison_distance(&a, &b, 1), Err(Error::GridMismatch(_))));
    }
}
