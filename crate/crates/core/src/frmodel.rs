//! Quadratic f(R) = R + (κ/2)R² and the scalar functions derived from it.
//!
//! The conformal factor ρ is tied to the curvature by e^{2ρ} = f′(R).
//! Near ρ = 0 the potentials cancel to second order, so a truncated Taylor
//! series replaces the closed forms below `series_threshold`.

use crate::error::{Error, Result};

/// Default |s| below which series expansions are used.
pub const DEFAULT_SERIES_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FRModel {
    pub kappa: f64,
    pub series_threshold: f64,
}

/// Evaluates Σ c_k s^k for k = 0..c.len() by Horner's rule.
fn poly(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * s + ck)
}

// Taylor coefficients (index = power of s) through s^8.
const W2K_SERIES: [f64; 9] = [0.0, 0.0, -2.0, 0.0, -2.0 / 3.0, 0.0, -4.0 / 45.0, 0.0, -2.0 / 315.0];
const VH_SERIES: [f64; 9] = [0.0, 0.0, 2.0, -4.0, 14.0 / 3.0, -4.0, 124.0 / 45.0, -8.0 / 5.0, 254.0 / 315.0];
const VRHO_SERIES: [f64; 9] =
    [0.0, 0.0, -1.0, 14.0 / 9.0, -5.0 / 3.0, 62.0 / 45.0, -14.0 / 15.0, 508.0 / 945.0, -17.0 / 63.0];

impl FRModel {
    pub fn new(kappa: f64) -> Result<Self> {
        Self::with_threshold(kappa, DEFAULT_SERIES_THRESHOLD)
    }

    pub fn with_threshold(kappa: f64, series_threshold: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidConfig(format!("kappa must be positive, got {kappa}")));
        }
        if !(series_threshold > 0.0) {
            return Err(Error::InvalidConfig(format!("series_threshold must be positive, got {series_threshold}")));
        }
        Ok(Self { kappa, series_threshold })
    }

    /// Klein-Gordon mass squared of the conformal factor, 1/(3κ).
    pub fn mass_squared(&self) -> f64 {
        1.0 / (3.0 * self.kappa)
    }

    pub fn f_eval(&self, r: f64) -> f64 {
        r + 0.5 * self.kappa * r * r
    }

    pub fn f_prime(&self, r: f64) -> f64 {
        1.0 + self.kappa * r
    }

    /// ρ = ½ ln f′(R).
    pub fn rho_of_r(&self, r: f64) -> Result<f64> {
        let fp = self.f_prime(r);
        if fp <= 0.0 {
            return Err(Error::NonPositiveConformalFactor(fp));
        }
        Ok(0.5 * (self.kappa * r).ln_1p())
    }

    /// Inverse of [`rho_of_r`](Self::rho_of_r): (e^{2s} − 1)/κ.
    pub fn r_of_rho(&self, s: f64) -> f64 {
        (2.0 * s).exp_m1() / self.kappa
    }

    /// W₁(r) = (f − r f′)/f′.
    pub fn w1(&self, r: f64) -> Result<f64> {
        let fp = self.f_prime(r);
        if fp == 0.0 {
            return Err(Error::DivisionByZero("W1: f'(r) = 0"));
        }
        Ok(-0.5 * self.kappa * r * r / fp)
    }

    /// W₂(s) = −(e^{2s} − 1)²/(2κ e^{2s}).
    pub fn w2(&self, s: f64) -> f64 {
        if s.abs() < self.series_threshold {
            self.w2_series(s)
        } else {
            self.w2_exact(s)
        }
    }

    pub fn w2_exact(&self, s: f64) -> f64 {
        let q = (2.0 * s).exp_m1();
        -q * q / (2.0 * self.kappa * (2.0 * s).exp())
    }

    pub fn w2_series(&self, s: f64) -> f64 {
        poly(&W2K_SERIES, s) / self.kappa
    }

    /// W₃(s) = f(θ(s)).
    pub fn w3(&self, s: f64) -> f64 {
        self.f_eval(self.r_of_rho(s))
    }

    /// V_h(s) = (e^{2s} − 1)²/(2 e^{4s}).
    pub fn v_h(&self, s: f64) -> f64 {
        if s.abs() < self.series_threshold {
            Self::v_h_series(s)
        } else {
            Self::v_h_exact(s)
        }
    }

    pub fn v_h_exact(s: f64) -> f64 {
        let q = (2.0 * s).exp_m1();
        q * q / (2.0 * (4.0 * s).exp())
    }

    pub fn v_h_series(s: f64) -> f64 {
        poly(&VH_SERIES, s)
    }

    /// V_ρ(s) = (e^{2s} − 1)/(6 e^{4s}) − s/3.
    pub fn v_rho(&self, s: f64) -> f64 {
        if s.abs() < self.series_threshold {
            Self::v_rho_series(s)
        } else {
            Self::v_rho_exact(s)
        }
    }

    pub fn v_rho_exact(s: f64) -> f64 {
        (2.0 * s).exp_m1() / (6.0 * (4.0 * s).exp()) - s / 3.0
    }

    pub fn v_rho_series(s: f64) -> f64 {
        poly(&VRHO_SERIES, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(kappa: f64) -> FRModel {
        FRModel::new(kappa).unwrap()
    }

    #[test]
    fn f_and_derivative_values() {
        assert_eq!(m(0.1).f_eval(0.0), 0.0);
        assert!((m(0.1).f_eval(1.0) - 1.05).abs() < 1e-15);
        assert!((m(0.5).f_eval(2.0) - 3.0).abs() < 1e-15);
        assert_eq!(m(0.1).f_prime(0.0), 1.0);
        assert!((m(0.1).f_prime(1.0) - 1.1).abs() < 1e-15);
        assert!((m(0.2).f_prime(-1.0) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn conformal_factor_and_inverse() {
        let md = m(0.1);
        assert_eq!(md.rho_of_r(0.0).unwrap(), 0.0);
        // ½ ln 1.1
        assert!((md.rho_of_r(1.0).unwrap() - 0.047_655_089_902_162_43).abs() < 1e-15);
        assert!(matches!(md.rho_of_r(-10.0), Err(Error::NonPositiveConformalFactor(_))));
        assert!((md.r_of_rho(0.047_655_089_902_162_43) - 1.0).abs() < 1e-13);
        assert!((m(1.0).r_of_rho(0.5) - (1f64.exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn w_functions() {
        let md = m(0.1);
        assert_eq!(md.w1(0.0).unwrap(), 0.0);
        assert!((md.w1(1.0).unwrap() + 0.05 / 1.1).abs() < 1e-15);
        assert!(matches!(md.w1(-10.0), Err(Error::DivisionByZero(_))));
        let s = 0.5 * 1.1f64.ln();
        assert!((md.w2(s) + 0.01 / (0.2 * 1.1)).abs() < 1e-14);
        assert_eq!(md.w2(0.0), 0.0);
        assert!((md.w3(s) - 1.05).abs() < 1e-13);
        let e1 = 1f64.exp() - 1.0;
        assert!((m(1.0).w3(0.5) - (e1 + 0.5 * e1 * e1)).abs() < 1e-14);
        let w1 = md.w1(md.r_of_rho(0.3)).unwrap();
        assert!((w1 - md.w2(0.3)).abs() < 1e-12);
    }

    #[test]
    fn potentials_at_reference_point() {
        let s = 0.5 * 1.1f64.ln();
        assert!((FRModel::v_h_exact(s) - 0.1f64 * 0.1 / (2.0 * 1.21)).abs() < 1e-16);
        // (0.1)/(6·1.21) − s/3
        let v = 0.1 / (6.0 * 1.21) - s / 3.0;
        assert!((m(0.1).v_rho(s) - v).abs() < 1e-16);
        assert!((m(0.1).v_rho(s) + 0.002_110_925_284_191_884).abs() < 1e-15);
        assert_eq!(m(0.1).v_h(0.0), 0.0);
        assert_eq!(m(0.1).v_rho(0.0), 0.0);
    }

    #[test]
    fn branches_agree_at_threshold() {
        let md = m(0.1);
        for s in [md.series_threshold, -md.series_threshold] {
            assert!((md.w2_exact(s) - md.w2_series(s)).abs() <= 1e-12);
            assert!((FRModel::v_h_exact(s) - FRModel::v_h_series(s)).abs() <= 1e-12);
            assert!((FRModel::v_rho_exact(s) - FRModel::v_rho_series(s)).abs() <= 1e-12);
        }
    }

    #[test]
    fn quadratic_smallness() {
        let md = m(0.1);
        for s in [1e-2, 1e-4, 1e-6] {
            assert!((md.v_h(s) / (s * s) - 2.0).abs() / 2.0 <= 10.0 * s);
            assert!((md.v_rho(s) / (s * s) + 1.0).abs() <= 10.0 * s);
        }
    }

    #[test]
    fn rejects_non_positive_kappa() {
        assert!(FRModel::new(0.0).is_err());
        assert!(FRModel::new(-1.0).is_err());
    }
}
