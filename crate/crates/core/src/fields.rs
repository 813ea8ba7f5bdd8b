//! Periodic structured grids, grid functions, centered finite differences,
//! rotation generators and the evolution state.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Centered finite-difference stencil order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Stencil {
    Order2,
    #[default]
    Order4,
}

const D1_O2: ([i32; 2], [f64; 2]) = ([-1, 1], [-0.5, 0.5]);
const D1_O4: ([i32; 4], [f64; 4]) = ([-2, -1, 1, 2], [1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0]);
const D2_O2: ([i32; 3], [f64; 3]) = ([-1, 0, 1], [1.0, -2.0, 1.0]);
const D2_O4: ([i32; 5], [f64; 5]) =
    ([-2, -1, 0, 1, 2], [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0]);

impl Stencil {
    pub fn from_order(p: usize) -> Result<Self> {
        match p {
            2 => Ok(Stencil::Order2),
            4 => Ok(Stencil::Order4),
            _ => Err(Error::InvalidConfig(format!("stencil order must be 2 or 4, got {p}"))),
        }
    }

    pub fn order(self) -> usize {
        match self {
            Stencil::Order2 => 2,
            Stencil::Order4 => 4,
        }
    }

    /// Offsets and weights of the first derivative (divide by h).
    pub fn first_derivative_weights(self) -> (&'static [i32], &'static [f64]) {
        match self {
            Stencil::Order2 => (&D1_O2.0, &D1_O2.1),
            Stencil::Order4 => (&D1_O4.0, &D1_O4.1),
        }
    }

    /// Offsets and weights of the second derivative (divide by h²).
    pub fn second_derivative_weights(self) -> (&'static [i32], &'static [f64]) {
        match self {
            Stencil::Order2 => (&D2_O2.0, &D2_O2.1),
            Stencil::Order4 => (&D2_O4.0, &D2_O4.1),
        }
    }
}

/// Periodic grid in 1 or 3 spatial dimensions with N points per axis.
///
/// In 1D mode fields depend on x¹ only; derivatives along the other axes are
/// identically zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub dims: usize,
    pub n: usize,
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub stencil: Stencil,
}

impl Grid {
    pub fn new(dims: usize, n: usize, lo: f64, hi: f64, stencil: Stencil) -> Result<Self> {
        if dims != 1 && dims != 3 {
            return Err(Error::DimensionMismatch(format!("spatial_dims must be 1 or 3, got {dims}")));
        }
        if n < 5 {
            return Err(Error::InvalidConfig(format!("need at least 5 points per axis, got {n}")));
        }
        if !(hi > lo) {
            return Err(Error::InvalidConfig(format!("empty extent [{lo}, {hi})")));
        }
        Ok(Self { dims, n, lo: [lo; 3], hi: [hi; 3], stencil })
    }

    pub fn one_d(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(1, n, lo, hi, Stencil::Order4)
    }

    pub fn three_d(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(3, n, lo, hi, Stencil::Order4)
    }

    pub fn with_stencil(mut self, stencil: Stencil) -> Self {
        self.stencil = stencil;
        self
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dims as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.n as f64
    }

    /// Smallest spacing over active axes.
    pub fn min_spacing(&self) -> f64 {
        (0..self.dims).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    /// Volume of one cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dims).map(|a| self.spacing(a)).product()
    }

    pub fn center(&self) -> [f64; 3] {
        std::array::from_fn(|a| if a < self.dims { 0.5 * (self.lo[a] + self.hi[a]) } else { 0.0 })
    }

    /// Integer coordinates of a flat index (x fastest).
    pub fn unflatten(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        match self.dims {
            1 => [idx, 0, 0],
            _ => [idx % n, (idx / n) % n, idx / (n * n)],
        }
    }

    pub fn flatten(&self, ijk: [usize; 3]) -> usize {
        match self.dims {
            1 => ijk[0],
            _ => ijk[0] + self.n * (ijk[1] + self.n * ijk[2]),
        }
    }

    /// Physical coordinates of a point; inactive axes are 0.
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let ijk = self.unflatten(idx);
        std::array::from_fn(|a| if a < self.dims { self.lo[a] + ijk[a] as f64 * self.spacing(a) } else { 0.0 })
    }

    /// Coordinates relative to the box center.
    pub fn centered_coords(&self, idx: usize) -> [f64; 3] {
        let x = self.coords(idx);
        let c = self.center();
        std::array::from_fn(|a| x[a] - c[a])
    }

    pub fn radius(&self, idx: usize) -> f64 {
        let x = self.centered_coords(idx);
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    }

    fn stride(&self, axis: usize) -> usize {
        self.n.pow(axis as u32)
    }

    /// Neighbour of `idx` shifted by `off` along `axis` with periodic wrap.
    #[inline]
    fn neighbour(&self, idx: usize, axis: usize, off: i32) -> usize {
        let n = self.n as i64;
        let stride = self.stride(axis);
        let i = ((idx / stride) % self.n) as i64;
        let j = (i + off as i64).rem_euclid(n) as usize;
        idx + j * stride - (i as usize) * stride
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }

    #[inline]
    fn at(&self, u: &[f64], i: usize, axis: usize, off: i32) -> f64 {
        if self.dims == 1 {
            u[(i as i64 + off as i64).rem_euclid(self.n as i64) as usize]
        } else {
            u[self.neighbour(i, axis, off)]
        }
    }

    /// ∂_axis u into `out`; zero along inactive axes.
    ///
    /// Antisymmetric pairs are differenced first so constants map to exactly 0.
    pub fn d1_into(&self, u: &[f64], axis: usize, out: &mut [f64]) {
        if axis >= self.dims {
            out.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let (offs, ws) = self.stencil.first_derivative_weights();
        let inv_h = 1.0 / self.spacing(axis);
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for (&off, &w) in offs.iter().zip(ws).filter(|(&off, _)| off > 0) {
                s += w * (self.at(u, i, axis, off) - self.at(u, i, axis, -off));
            }
            *o = s * inv_h;
        }
    }

    /// ∂_a ∂_b u into `out`; mixed derivatives compose first-derivative stencils.
    pub fn d2_into(&self, u: &[f64], a: usize, b: usize, out: &mut [f64]) {
        if a >= self.dims || b >= self.dims {
            out.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        if a != b {
            let mut tmp = vec![0.0; u.len()];
            self.d1_into(u, a, &mut tmp);
            self.d1_into(&tmp, b, out);
            return;
        }
        let (offs, ws) = self.stencil.second_derivative_weights();
        let h = self.spacing(a);
        let inv_h2 = 1.0 / (h * h);
        for (i, o) in out.iter_mut().enumerate() {
            let c = u[i];
            let mut s = 0.0;
            for (&off, &w) in offs.iter().zip(ws).filter(|(&off, _)| off > 0) {
                s += w * ((self.at(u, i, a, off) - c) + (self.at(u, i, a, -off) - c));
            }
            *o = s * inv_h2;
        }
    }

    pub fn sample(&self, f: impl Fn([f64; 3]) -> f64) -> GridFunction {
        GridFunction { grid: *self, values: (0..self.len()).map(|i| f(self.coords(i))).collect() }
    }
}

/// Real values on every grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self { grid: self.grid, values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect() })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete L² norm with cell-volume quadrature.
    pub fn l2(&self) -> f64 {
        (sum_squares(&self.values) * self.grid.cell_volume()).sqrt()
    }
}

/// Σ v² in a fixed pairwise order.
pub fn sum_squares(v: &[f64]) -> f64 {
    pairwise_sum(v, &|x| x * x)
}

fn pairwise_sum(v: &[f64], f: &dyn Fn(f64) -> f64) -> f64 {
    if v.len() <= 64 {
        return v.iter().map(|&x| f(x)).sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid], f) + pairwise_sum(&v[mid..], f)
}

/// Σ v in a fixed pairwise order.
pub fn sum(v: &[f64]) -> f64 {
    pairwise_sum(v, &|x| x)
}

pub fn d1(u: &GridFunction, axis: usize) -> Result<GridFunction> {
    if axis >= 3 {
        return Err(Error::DimensionMismatch(format!("axis {axis} out of range")));
    }
    let mut out = GridFunction::zeros(u.grid);
    u.grid.d1_into(&u.values, axis, &mut out.values);
    Ok(out)
}

pub fn d2(u: &GridFunction, a: usize, b: usize) -> Result<GridFunction> {
    if a >= 3 || b >= 3 {
        return Err(Error::DimensionMismatch(format!("axes ({a}, {b}) out of range")));
    }
    let mut out = GridFunction::zeros(u.grid);
    u.grid.d2_into(&u.values, a, b, &mut out.values);
    Ok(out)
}

/// Ω_ab u = x_a ∂_b u − x_b ∂_a u about the box center (axes 0-based).
pub fn omega_apply(u: &GridFunction, a: usize, b: usize) -> Result<GridFunction> {
    let grid = u.grid;
    if grid.dims != 3 {
        return Err(Error::DimensionMismatch("rotation generators need a 3D grid".into()));
    }
    let da = d1(u, a)?;
    let db = d1(u, b)?;
    let values = (0..grid.len())
        .map(|i| {
            let x = grid.centered_coords(i);
            x[a] * db.values[i] - x[b] * da.values[i]
        })
        .collect();
    Ok(GridFunction { grid, values })
}

/// Layout of the evolution state: ten h_ab, ten ∂_t h_ab, φ, ∂_tφ, ϱ, ∂_tϱ.
pub mod slot {
    pub const H: usize = 0;
    pub const HT: usize = 10;
    pub const PHI: usize = 20;
    pub const PHIT: usize = 21;
    pub const RHO: usize = 22;
    pub const RHOT: usize = 23;
    pub const COUNT: usize = 24;

    pub const NAMES: [&str; COUNT] = [
        "h00", "h01", "h02", "h03", "h11", "h12", "h13", "h22", "h23", "h33", "dt_h00", "dt_h01", "dt_h02", "dt_h03",
        "dt_h11", "dt_h12", "dt_h13", "dt_h22", "dt_h23", "dt_h33", "phi", "dt_phi", "rho", "dt_rho",
    ];
}

/// Full evolution state S = (h, ∂_t h, φ, ∂_t φ, ϱ, ∂_t ϱ) at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub grid: Grid,
    /// `slot::COUNT` blocks of `grid.len()` values.
    pub data: Vec<f64>,
}

impl FieldState {
    pub fn zeros(grid: Grid) -> Self {
        Self { t: 0.0, grid, data: vec![0.0; slot::COUNT * grid.len()] }
    }

    pub fn field(&self, s: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[s * n..(s + 1) * n]
    }

    pub fn field_mut(&mut self, s: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.data[s * n..(s + 1) * n]
    }

    pub fn grid_function(&self, s: usize) -> GridFunction {
        GridFunction { grid: self.grid, values: self.field(s).to_vec() }
    }

    /// ‖h‖∞ over all components and points.
    pub fn h_max(&self) -> f64 {
        let n = self.grid.len();
        self.data[..10 * n].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn check_finite(&self) -> Result<()> {
        let n = self.grid.len();
        if let Some(pos) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NaNDetected { t: self.t, field: slot::NAMES[pos / n].to_string() });
        }
        Ok(())
    }

    /// self + a·other (time taken from self).
    pub fn axpy(&self, a: f64, other: &FieldState) -> FieldState {
        let data = self.data.iter().zip(&other.data).map(|(x, y)| x + a * y).collect();
        FieldState { t: self.t, grid: self.grid, data }
    }

    /// Bitwise-identical state shifted by `k` cells along x¹.
    pub fn shift_x(&self, k: usize) -> FieldState {
        let mut out = self.clone();
        let n = self.grid.len();
        for s in 0..slot::COUNT {
            for i in 0..n {
                let mut ijk = self.grid.unflatten(i);
                ijk[0] = (ijk[0] + k) % self.grid.n;
                out.data[s * n + self.grid.flatten(ijk)] = self.data[s * n + i];
            }
        }
        out
    }
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"FRGSNAP1";

/// Writes a snapshot: magic, dims, N, h, time, box bounds, stencil order, then
/// the state's blocks as little-endian f64 in slot order.
pub fn write_snapshot(state: &FieldState, mut w: impl Write) -> std::io::Result<()> {
    let g = &state.grid;
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&(g.dims as u32).to_le_bytes())?;
    w.write_all(&(g.n as u64).to_le_bytes())?;
    w.write_all(&g.spacing(0).to_le_bytes())?;
    w.write_all(&state.t.to_le_bytes())?;
    for a in 0..3 {
        w.write_all(&g.lo[a].to_le_bytes())?;
        w.write_all(&g.hi[a].to_le_bytes())?;
    }
    w.write_all(&(g.stencil.order() as u32).to_le_bytes())?;
    w.write_all(&(slot::COUNT as u32).to_le_bytes())?;
    for v in &state.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot(mut r: impl Read) -> std::io::Result<FieldState> {
    use std::io::{Error as IoError, ErrorKind};
    let bad = |m: &str| IoError::new(ErrorKind::InvalidData, m.to_string());
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(bad("not a snapshot file"));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    let mut f64v = |r: &mut dyn Read| -> std::io::Result<f64> {
        r.read_exact(&mut b8)?;
        Ok(f64::from_le_bytes(b8))
    };
    r.read_exact(&mut b4)?;
    let dims = u32::from_le_bytes(b4) as usize;
    let mut n8 = [0u8; 8];
    r.read_exact(&mut n8)?;
    let n = u64::from_le_bytes(n8) as usize;
    let _h = f64v(&mut r)?;
    let t = f64v(&mut r)?;
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    for a in 0..3 {
        lo[a] = f64v(&mut r)?;
        hi[a] = f64v(&mut r)?;
    }
    r.read_exact(&mut b4)?;
    let stencil = Stencil::from_order(u32::from_le_bytes(b4) as usize).map_err(|e| bad(&e.to_string()))?;
    r.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) as usize != slot::COUNT {
        return Err(bad("unexpected block count"));
    }
    let grid = Grid { dims, n, lo, hi, stencil };
    let mut data = vec![0.0; slot::COUNT * grid.len()];
    for v in data.iter_mut() {
        *v = f64v(&mut r)?;
    }
    Ok(FieldState { t, grid, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn err_d1(n: usize, stencil: Stencil) -> f64 {
        let g = Grid::new(1, n, 0.0, TAU, stencil).unwrap();
        let u = g.sample(|x| x[0].sin());
        let du = d1(&u, 0).unwrap();
        (0..g.len()).map(|i| (du.values[i] - g.coords(i)[0].cos()).abs()).fold(0.0, f64::max)
    }

    fn err_d2(n: usize, stencil: Stencil) -> f64 {
        let g = Grid::new(1, n, -8.0, 8.0, stencil).unwrap();
        let u = g.sample(|x| (-x[0] * x[0]).exp());
        let du = d2(&u, 0, 0).unwrap();
        (0..g.len())
            .map(|i| {
                let x = g.coords(i)[0];
                (du.values[i] - (4.0 * x * x - 2.0) * (-x * x).exp()).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn sine_derivative_accuracy() {
        // leading truncation term of the five-point stencil is h⁴/30·max|u⁽⁵⁾|
        for n in [256, 512] {
            let h = TAU / n as f64;
            let bound = h.powi(4) / 30.0;
            let e = err_d1(n, Stencil::Order4);
            assert!((e - bound).abs() <= 0.01 * bound, "N={n}: {e} vs {bound}");
        }
        assert!(err_d1(512, Stencil::Order4) <= 1e-8);
    }

    #[test]
    fn constant_has_zero_derivative() {
        let g = Grid::one_d(32, 0.0, 1.0).unwrap();
        let u = g.sample(|_| 3.5);
        assert!(d1(&u, 0).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(d2(&u, 0, 0).unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn convergence_rates_match_stencil_order() {
        for st in [Stencil::Order2, Stencil::Order4] {
            let p = st.order() as f64;
            let r1 = (err_d1(64, st) / err_d1(128, st)).log2();
            let r2 = (err_d2(128, st) / err_d2(256, st)).log2();
            assert!((r1 - p).abs() <= 0.1 * p, "d1 rate {r1}");
            assert!((r2 - p).abs() <= 0.1 * p, "d2 rate {r2}");
        }
    }

    #[test]
    fn inactive_axes_vanish_in_one_d() {
        let g = Grid::one_d(16, 0.0, 1.0).unwrap();
        let u = g.sample(|x| x[0].sin());
        assert!(d1(&u, 1).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(d2(&u, 0, 2).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(omega_apply(&u, 0, 1).is_err());
    }

    #[test]
    fn rotations_kill_radial_functions() {
        let g = Grid::three_d(32, -6.0, 6.0).unwrap();
        let u = g.sample(|x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp());
        let coarse = omega_apply(&u, 0, 1).unwrap().max_abs();
        let g2 = Grid::three_d(64, -6.0, 6.0).unwrap();
        let u2 = g2.sample(|x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp());
        let fine = omega_apply(&u2, 0, 1).unwrap().max_abs();
        assert!(coarse < 1e-2 && (coarse / fine).log2() > 3.6, "{coarse} {fine}");
        // Ω_12 x¹ = −x², away from the periodic seam of the linear function
        let lin = g.sample(|x| x[0]);
        let w = omega_apply(&lin, 0, 1).unwrap();
        for i in 0..g.len() {
            let ijk = g.unflatten(i);
            if ijk[0] < 2 || ijk[0] + 2 >= g.n {
                continue;
            }
            let x = g.centered_coords(i);
            assert!((w.values[i] + x[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_commutator_converges() {
        // [∂_1, Ω_12] u = ∂_2 u
        let err = |n: usize| {
            let g = Grid::three_d(n, -4.0, 4.0).unwrap();
            let u = g.sample(|x| (-(x[0] * x[0] + 2.0 * x[1] * x[1] + x[2] * x[2]) + 0.3 * x[0]).exp());
            let a = d1(&omega_apply(&u, 0, 1).unwrap(), 0).unwrap();
            let b = omega_apply(&d1(&u, 0).unwrap(), 0, 1).unwrap();
            let c = d1(&u, 1).unwrap();
            (0..g.len()).map(|i| (a.values[i] - b.values[i] - c.values[i]).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(24), err(48));
        let rate = (e1 / e2).log2();
        assert!((rate - 4.0).abs() < 0.6, "rate {rate} ({e1}, {e2})");
    }

    #[test]
    fn periodic_shift_by_full_period_is_identity() {
        let g = Grid::three_d(8, 0.0, 1.0).unwrap();
        let mut s = FieldState::zeros(g);
        for (i, v) in s.data.iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin();
        }
        assert_eq!(s.shift_x(8), s);
        assert_ne!(s.shift_x(3), s);
    }

    #[test]
    fn snapshot_roundtrip() {
        let g = Grid::one_d(16, -1.0, 1.0).unwrap();
        let mut s = FieldState::zeros(g);
        s.t = 0.75;
        for (i, v) in s.data.iter_mut().enumerate() {
            *v = i as f64 * 1e-3;
        }
        let mut buf = Vec::new();
        write_snapshot(&s, &mut buf).unwrap();
        let back = read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }
}
