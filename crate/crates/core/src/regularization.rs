//! Transition profiles and the regularized field
//! `Z_eps = (X+ + X-)/2 + phi(y/eps) (X+ - X-)/2`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{FilippovSystem, PlanarField};

/// Monotone odd transition function equal to -1 below -1 and +1 above +1.
///
/// On `(-1, 1)` the profile is the polynomial
/// `N_p * integral_0^v (1 - s^2)^(p-1) ds`, so it is `C^(p-1)` across `v = +-1`.
/// `p = 1` is the clamp `phi(v) = v`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizationProfile {
    p: u32,
    coeffs: Vec<f64>,
    phi_p_at_1: f64,
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Piecewise linear profile `clamp(v, -1, 1)`.
pub fn phi_linear() -> RegularizationProfile {
    RegularizationProfile { p: 1, coeffs: vec![0.0, 1.0], phi_p_at_1: 1.0 }
}

/// Integrated-Beta polynomial profile of smoothness index `p >= 2`.
pub fn phi_polynomial(p: u32) -> Result<RegularizationProfile> {
    if p < 2 {
        return Err(Error::InvalidP(p));
    }
    let n = p - 1;
    // integral_0^1 (1-s^2)^n ds = 4^n (n!)^2 / (2n+1)!
    let norm = factorial(2 * n + 1) / (4f64.powi(n as i32) * factorial(n).powi(2));
    let mut coeffs = vec![0.0; 2 * n as usize + 2];
    for j in 0..=n {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        coeffs[2 * j as usize + 1] = norm * sign * binomial(n, j) / (2 * j + 1) as f64;
    }
    // Near s = 1, (1-s^2)^(p-1) ~ 2^(p-1) (1-s)^(p-1), hence
    // phi(v) - 1 ~ -N_p 2^(p-1) (1-v)^p / p.
    let parity = if p % 2 == 0 { 1.0 } else { -1.0 };
    let phi_p_at_1 = -norm * 2f64.powi(n as i32) * parity * factorial(n);
    Ok(RegularizationProfile { p, coeffs, phi_p_at_1 })
}

impl RegularizationProfile {
    pub fn p(&self) -> u32 {
        self.p
    }

    /// Left limit of the p-th derivative at `v = 1`.
    pub fn phi_p_at_1(&self) -> f64 {
        self.phi_p_at_1
    }

    /// `c_p = phi^(p)(1-) / p!`.
    pub fn c_p(&self) -> f64 {
        self.phi_p_at_1 / factorial(self.p)
    }

    fn poly_deriv(&self, v: f64, k: u32) -> f64 {
        let k = k as usize;
        let mut acc = 0.0;
        for i in (k..self.coeffs.len()).rev() {
            let fall = ((i - k + 1)..=i).fold(1.0, |a, m| a * m as f64);
            acc = acc * v + self.coeffs[i] * fall;
        }
        acc
    }

    pub fn eval(&self, v: f64) -> f64 {
        if v >= 1.0 {
            1.0
        } else if v <= -1.0 {
            -1.0
        } else {
            self.poly_deriv(v, 0)
        }
    }

    /// k-th derivative; outside `(-1, 1)` every derivative is zero.
    pub fn deriv(&self, v: f64, k: u32) -> f64 {
        if k == 0 {
            return self.eval(v);
        }
        if v.abs() >= 1.0 {
            0.0
        } else {
            self.poly_deriv(v, k)
        }
    }

    /// Left limit at `v = 1` of the k-th derivative, any order.
    pub fn left_deriv_at_1(&self, k: u32) -> f64 {
        self.poly_deriv(1.0, k)
    }

    /// Inverse on `(-1, 1)`; `w` must lie strictly inside.
    pub fn inverse(&self, w: f64) -> f64 {
        if w >= 1.0 {
            return 1.0;
        }
        if w <= -1.0 {
            return -1.0;
        }
        if self.p == 1 {
            return w;
        }
        let (mut lo, mut hi) = (-1.0, 1.0);
        let mut v = w.clamp(-0.999, 0.999);
        for _ in 0..200 {
            let r = self.eval(v) - w;
            if r > 0.0 {
                hi = v;
            } else {
                lo = v;
            }
            let d = self.deriv(v, 1);
            let mut next = v - r / d;
            if !(next > lo && next < hi) || d <= 0.0 {
                next = 0.5 * (lo + hi);
            }
            if (next - v).abs() <= 1e-16 * v.abs().max(1e-300) || hi - lo < 1e-16 {
                return next;
            }
            v = next;
        }
        v
    }
}

impl fmt::Display for RegularizationProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.p == 1 {
            write!(f, "linear")
        } else {
            write!(f, "poly({})", self.p)
        }
    }
}

impl FromStr for RegularizationProfile {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s == "linear" {
            return Ok(phi_linear());
        }
        let inner = s
            .strip_prefix("poly(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| format!("profile must be `linear` or `poly(p)`, got `{s}`"))?;
        let p: u32 = inner.trim().parse().map_err(|_| format!("bad smoothness index `{inner}`"))?;
        phi_polynomial(p).map_err(|e| e.to_string())
    }
}

/// A Filippov system together with a profile and strip half-width.
#[derive(Clone)]
pub struct RegularizedSystem {
    pub base: FilippovSystem,
    pub profile: Arc<RegularizationProfile>,
    pub epsilon: f64,
}

impl RegularizedSystem {
    pub fn new(base: FilippovSystem, profile: RegularizationProfile, epsilon: f64) -> Self {
        assert!(epsilon > 0.0, "epsilon must be positive");
        RegularizedSystem { base, profile: Arc::new(profile), epsilon }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        RegularizedSystem { base: self.base.clone(), profile: self.profile.clone(), epsilon }
    }

    /// The regularized vector field as a plain planar field.
    pub fn regularized_field(&self) -> &dyn PlanarField {
        self
    }

    pub fn slow_fast_forms(&self) -> (SlowForm<'_>, FastForm<'_>) {
        (SlowForm(self), FastForm(self))
    }
}

impl PlanarField for RegularizedSystem {
    fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        let eps = self.epsilon;
        if y >= eps {
            return self.base.x_plus.eval(x, y);
        }
        if y <= -eps {
            return self.base.x_minus.eval(x, y);
        }
        let p = self.base.x_plus.eval(x, y);
        let m = self.base.x_minus.eval(x, y);
        let phi = self.profile.eval(y / eps);
        [
            0.5 * (p[0] + m[0]) + 0.5 * phi * (p[0] - m[0]),
            0.5 * (p[1] + m[1]) + 0.5 * phi * (p[1] - m[1]),
        ]
    }
}

/// Slow form in `(x, v)` with `y = eps v`: `x' = Z1`, `v' = Z2 / eps`.
pub struct SlowForm<'a>(&'a RegularizedSystem);

/// Fast form in `(x, v)` with time `tau = t / eps`: `x' = eps Z1`, `v' = Z2`.
pub struct FastForm<'a>(&'a RegularizedSystem);

impl PlanarField for SlowForm<'_> {
    fn eval(&self, x: f64, v: f64) -> [f64; 2] {
        let eps = self.0.epsilon;
        let z = self.0.eval(x, eps * v);
        [z[0], z[1] / eps]
    }
}

impl PlanarField for FastForm<'_> {
    fn eval(&self, x: f64, v: f64) -> [f64; 2] {
        let eps = self.0.epsilon;
        let z = self.0.eval(x, eps * v);
        [eps * z[0], z[1]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::shared;

    fn normal_form() -> FilippovSystem {
        FilippovSystem::new(shared(|x, _| [1.0, 2.0 * x]), shared(|_, _| [0.0, 1.0]))
    }

    #[test]
    fn linear_values() {
        let phi = phi_linear();
        assert_eq!(phi.eval(0.0), 0.0);
        assert_eq!(phi.eval(0.5), 0.5);
        assert_eq!(phi.eval(2.0), 1.0);
        assert_eq!(phi.p(), 1);
    }

    #[test]
    fn cubic_profile_by_hand() {
        let phi = phi_polynomial(2).unwrap();
        for &v in &[-0.9, -0.3, 0.0, 0.4, 0.95] {
            assert!((phi.eval(v) - (3.0 * v - v * v * v) / 2.0).abs() < 1e-15);
        }
        assert_eq!(phi.eval(1.0), 1.0);
        assert!((phi.left_deriv_at_1(0) - 1.0).abs() < 1e-15);
        assert!((phi.phi_p_at_1() + 3.0).abs() < 1e-14);
        assert!((phi.left_deriv_at_1(2) + 3.0).abs() < 1e-14);
    }

    #[test]
    fn quintic_contact() {
        let phi = phi_polynomial(3).unwrap();
        for k in 1..3 {
            assert!(phi.left_deriv_at_1(k).abs() < 1e-13);
            assert!(phi.poly_deriv(-1.0, k).abs() < 1e-13);
        }
    }

    #[test]
    fn closed_form_matches_polynomial_derivative() {
        for p in 2..=8 {
            let phi = phi_polynomial(p).unwrap();
            let poly = phi.left_deriv_at_1(p);
            assert!((phi.phi_p_at_1() - poly).abs() <= 1e-9 * poly.abs(), "p = {p}");
        }
    }

    #[test]
    fn invalid_p() {
        assert_eq!(phi_polynomial(1), Err(Error::InvalidP(1)));
    }

    #[test]
    fn inverse_round_trip() {
        let phi = phi_polynomial(3).unwrap();
        for i in 1..200 {
            let v = -1.0 + i as f64 / 100.0;
            assert!((phi.inverse(phi.eval(v)) - v).abs() < 1e-9, "v = {v}");
        }
    }

    #[test]
    fn parse_profiles() {
        assert_eq!("linear".parse::<RegularizationProfile>().unwrap().p(), 1);
        assert_eq!("poly(4)".parse::<RegularizationProfile>().unwrap().p(), 4);
        assert!("poly(1)".parse::<RegularizationProfile>().is_err());
        assert!("tanh".parse::<RegularizationProfile>().is_err());
    }

    #[test]
    fn blend_and_outside_values() {
        let r = RegularizedSystem::new(normal_form(), phi_linear(), 0.1);
        assert_eq!(r.eval(0.0, 0.0), [0.5, 0.5]);
        assert_eq!(r.eval(0.3, 0.2), [1.0, 0.6]);
        assert_eq!(r.eval(0.3, -0.2), [0.0, 1.0]);
    }

    #[test]
    fn slow_form_value() {
        let r = RegularizedSystem::new(normal_form(), phi_linear(), 0.1);
        let (slow, fast) = r.slow_fast_forms();
        let s = slow.eval(-0.25, 0.0);
        assert!((s[0] - 0.5).abs() < 1e-15);
        assert!((0.1 * s[1] - 0.25).abs() < 1e-15);
        let f = fast.eval(-0.25, 0.0);
        assert!((f[0] - 0.05).abs() < 1e-15 && (f[1] - 0.25).abs() < 1e-15);
    }
}
