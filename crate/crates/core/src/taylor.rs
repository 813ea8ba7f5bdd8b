//! Truncated multivariate Taylor polynomials in the four spacetime coordinates.
//!
//! A [`Taylor`] holds the coefficients of a function's expansion about a
//! point up to total degree `order ≤ 4`. Arithmetic truncates consistently, so
//! composing closed-form expressions yields exact partial derivatives up to
//! that order (forward-mode jet arithmetic).

use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::OnceLock;

pub const NVAR: usize = 4;
pub const MAX_ORDER: usize = 4;
/// Number of monomials of degree ≤ 4 in four variables.
pub const NMONO: usize = 70;

struct Tables {
    exps: [[u8; NVAR]; NMONO],
    deg: [usize; NMONO],
    /// `deg_end[d]` = number of monomials of degree ≤ d.
    deg_end: [usize; MAX_ORDER + 1],
    lookup: [u8; 625],
    /// (i, j, k): monomial i times monomial j is monomial k; sorted by deg k.
    mul: Vec<(u8, u8, u8)>,
    mul_end: [usize; MAX_ORDER + 1],
    /// For each variable: (source, target, factor) of ∂_μ x^e = e_μ x^{e-1_μ}.
    deriv: [Vec<(u8, u8, f64)>; NVAR],
    /// Product of factorials e! per monomial.
    fact: [f64; NMONO],
}

fn key(e: &[u8; NVAR]) -> usize {
    e.iter().fold(0, |acc, &x| acc * 5 + x as usize)
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let mut list: Vec<[u8; NVAR]> = Vec::with_capacity(NMONO);
        for d in 0..=MAX_ORDER as u8 {
            for a in (0..=d).rev() {
                for b in (0..=d - a).rev() {
                    for c in (0..=d - a - b).rev() {
                        list.push([a, b, c, d - a - b - c]);
                    }
                }
            }
        }
        assert_eq!(list.len(), NMONO);
        let mut exps = [[0u8; NVAR]; NMONO];
        let mut deg = [0usize; NMONO];
        let mut lookup = [u8::MAX; 625];
        let mut fact = [1.0; NMONO];
        let mut deg_end = [0usize; MAX_ORDER + 1];
        for (i, e) in list.iter().enumerate() {
            exps[i] = *e;
            deg[i] = e.iter().map(|&x| x as usize).sum();
            lookup[key(e)] = i as u8;
            fact[i] = e.iter().map(|&x| (1..=x as u32).product::<u32>() as f64).product();
            deg_end[deg[i]] = i + 1;
        }
        let mut mul = Vec::new();
        for i in 0..NMONO {
            for j in 0..NMONO {
                if deg[i] + deg[j] <= MAX_ORDER {
                    let mut e = [0u8; NVAR];
                    for v in 0..NVAR {
                        e[v] = exps[i][v] + exps[j][v];
                    }
                    mul.push((i as u8, j as u8, lookup[key(&e)]));
                }
            }
        }
        mul.sort_by_key(|&(_, _, k)| deg[k as usize]);
        let mut mul_end = [0usize; MAX_ORDER + 1];
        for (n, &(_, _, k)) in mul.iter().enumerate() {
            mul_end[deg[k as usize]] = n + 1;
        }
        let deriv = std::array::from_fn(|v| {
            let mut out = Vec::new();
            for i in 0..NMONO {
                if exps[i][v] > 0 {
                    let mut e = exps[i];
                    e[v] -= 1;
                    out.push((i as u8, lookup[key(&e)], exps[i][v] as f64));
                }
            }
            out
        });
        Tables { exps, deg, deg_end, lookup, mul, mul_end, deriv, fact }
    })
}

/// Index of the monomial with exponent vector `e`.
pub fn monomial_index(e: [u8; NVAR]) -> usize {
    let t = tables();
    let idx = t.lookup[key(&e)];
    assert!(idx != u8::MAX, "monomial degree exceeds {MAX_ORDER}");
    idx as usize
}

/// Exponent vector of multi-index derivative ∂_{μ1}…∂_{μn}.
pub fn exponents_of(indices: &[usize]) -> [u8; NVAR] {
    let mut e = [0u8; NVAR];
    for &m in indices {
        e[m] += 1;
    }
    e
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Taylor {
    c: [f64; NMONO],
    order: usize,
}

impl Taylor {
    pub fn constant(v: f64, order: usize) -> Self {
        assert!(order <= MAX_ORDER);
        let mut c = [0.0; NMONO];
        c[0] = v;
        Self { c, order }
    }

    pub fn zero(order: usize) -> Self {
        Self::constant(0.0, order)
    }

    /// The coordinate function x^μ expanded about x0.
    pub fn var(mu: usize, x0: f64, order: usize) -> Self {
        let mut t = Self::constant(x0, order);
        if order >= 1 {
            t.c[1 + mu] = 1.0;
        }
        t
    }

    /// Builds a polynomial from partial derivatives: `partial(e)` returns ∂^e f at the point.
    pub fn from_partials(order: usize, mut partial: impl FnMut([u8; NVAR]) -> f64) -> Self {
        let t = tables();
        let mut out = Self::zero(order);
        for i in 0..t.deg_end[order] {
            out.c[i] = partial(t.exps[i]) / t.fact[i];
        }
        out
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Partial derivative ∂^e at the expansion point.
    pub fn partial(&self, e: [u8; NVAR]) -> f64 {
        let t = tables();
        let i = monomial_index(e);
        if t.deg[i] > self.order {
            return f64::NAN;
        }
        self.c[i] * t.fact[i]
    }

    /// ∂_{μ1}…∂_{μn} at the expansion point.
    pub fn d(&self, indices: &[usize]) -> f64 {
        self.partial(exponents_of(indices))
    }

    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order);
        let end = tables().deg_end[order];
        let mut out = Self::zero(order);
        out.c[..end].copy_from_slice(&self.c[..end]);
        out
    }

    /// ∂_μ of the polynomial; the result has order reduced by one.
    pub fn deriv(&self, mu: usize) -> Self {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let t = tables();
        let mut out = Self::zero(self.order - 1);
        for &(src, dst, f) in &t.deriv[mu] {
            let (src, dst) = (src as usize, dst as usize);
            if t.deg[src] <= self.order {
                out.c[dst] += f * self.c[src];
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for v in out.c.iter_mut() {
            *v *= s;
        }
        out
    }

    /// f(a) given f and its first `order` derivatives at a(x0).
    fn compose(&self, derivs: &[f64]) -> Self {
        let mut u = *self;
        u.c[0] = 0.0;
        let mut out = Self::constant(derivs[0], self.order);
        let mut pow = Self::constant(1.0, self.order);
        let mut fact = 1.0;
        for (n, &dn) in derivs.iter().enumerate().take(self.order + 1).skip(1) {
            pow = pow * u;
            fact *= n as f64;
            out += pow.scale(dn / fact);
        }
        out
    }

    pub fn recip(&self) -> Self {
        let a = self.c[0];
        let mut d = [0.0; MAX_ORDER + 1];
        let mut v = 1.0 / a;
        for (n, dn) in d.iter_mut().enumerate() {
            *dn = v;
            v *= -((n + 1) as f64) / a;
        }
        self.compose(&d)
    }

    pub fn exp(&self) -> Self {
        let e = self.c[0].exp();
        self.compose(&[e; MAX_ORDER + 1])
    }

    pub fn ln(&self) -> Self {
        let a = self.c[0];
        let mut d = [a.ln(), 0.0, 0.0, 0.0, 0.0];
        let mut v = 1.0 / a;
        for n in 1..=MAX_ORDER {
            d[n] = v;
            v *= -(n as f64) / a;
        }
        self.compose(&d)
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        self.compose(&[s, c, -s, -c, s])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        self.compose(&[c, -s, -c, s, c])
    }
}

impl Add for Taylor {
    type Output = Taylor;
    fn add(self, rhs: Taylor) -> Taylor {
        let order = self.order.min(rhs.order);
        let mut out = Taylor::zero(order);
        for i in 0..tables().deg_end[order] {
            out.c[i] = self.c[i] + rhs.c[i];
        }
        out
    }
}

impl AddAssign for Taylor {
    fn add_assign(&mut self, rhs: Taylor) {
        *self = *self + rhs;
    }
}

impl Sub for Taylor {
    type Output = Taylor;
    fn sub(self, rhs: Taylor) -> Taylor {
        self + (-rhs)
    }
}

impl Neg for Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        self.scale(-1.0)
    }
}

impl Mul for Taylor {
    type Output = Taylor;
    fn mul(self, rhs: Taylor) -> Taylor {
        let t = tables();
        let order = self.order.min(rhs.order);
        let mut out = Taylor::zero(order);
        for &(i, j, k) in &t.mul[..t.mul_end[order]] {
            out.c[k as usize] += self.c[i as usize] * rhs.c[j as usize];
        }
        out
    }
}

impl Add<f64> for Taylor {
    type Output = Taylor;
    fn add(mut self, rhs: f64) -> Taylor {
        self.c[0] += rhs;
        self
    }
}

impl Mul<f64> for Taylor {
    type Output = Taylor;
    fn mul(self, rhs: f64) -> Taylor {
        self.scale(rhs)
    }
}
