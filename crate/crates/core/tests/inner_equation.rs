use slidekick::inner_equation::{self, normalization, StepControl};
use slidekick::regularization::phi_polynomial;

/// Ai and Ai' from the Maclaurin series of w'' = z w.
fn airy(z: f64) -> (f64, f64) {
    let (c1, c2) = (0.355_028_053_887_817_2, 0.258_819_403_792_806_8);
    let mut a = vec![0.0; 120];
    a[0] = c1;
    a[1] = -c2;
    for n in 0..117 {
        a[n + 3] = a[n] / ((n + 3) as f64 * (n + 2) as f64);
    }
    let w = a.iter().enumerate().map(|(n, c)| c * z.powi(n as i32)).sum();
    let dw = a.iter().enumerate().skip(1).map(|(n, c)| n as f64 * c * z.powi(n as i32 - 1)).sum();
    (w, dw)
}

fn root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (f(lo) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// With u as the dependent variable, d eta/du = 1/(eta + u^2) is the Riccati equation
// du/d eta = u^2 + eta, linearized by u = -w'/w with w(eta) = Ai(-eta).
#[test]
fn p2_normalized_value_is_first_airy_derivative_zero() {
    let a1p = root(|z| airy(z).1, -1.5, -0.5);
    let (eta0, _) = inner_equation::normalized_solution(2, -40.0, 0.0, &[], 0.0).unwrap();
    assert!((eta0 + a1p).abs() < 1e-8, "{eta0} vs {}", -a1p);
}

#[test]
fn p2_forward_asymptote_is_first_airy_zero() {
    let a1 = root(|z| airy(z).0, -3.0, -2.0);
    let om = inner_equation::omega0().unwrap();
    assert!((om + a1).abs() < 1e-6, "{om} vs {}", -a1);
}

#[test]
fn unscaled_value_follows_normalization() {
    let (bar, _) = inner_equation::normalized_solution(2, -40.0, 0.0, &[], 0.0).unwrap();
    for c in [-1.5, -4.0] {
        let sol = inner_equation::distinguished_solution(2, c, -30.0, StepControl::default()).unwrap();
        let n = normalization(2, c);
        assert!((sol.eta_at_0 - bar / n.alpha).abs() < 1e-8, "c = {c}");
    }
}

#[test]
fn stable_under_seed_position() {
    let c = phi_polynomial(2).unwrap().c_p();
    let a = inner_equation::distinguished_solution(2, c, -20.0, StepControl::default()).unwrap();
    let b = inner_equation::distinguished_solution(2, c, -40.0, StepControl::default()).unwrap();
    assert!((a.eta_at_0 - b.eta_at_0).abs() < 1e-8);
    assert!(a.eta_at_0 > 0.0);
}

#[test]
fn odd_p_uses_positive_coefficient() {
    let c3 = phi_polynomial(3).unwrap().c_p();
    assert!(c3 > 0.0);
    let sol = inner_equation::distinguished_solution(3, c3, -20.0, StepControl::default()).unwrap();
    assert!(sol.eta_at_0.is_finite() && sol.estimated_error < 1e-8);
}

#[test]
fn sandwich_at_minus_one() {
    let (_, s) = inner_equation::normalized_solution(2, -40.0, -1.0, &[-1.0], 0.0).unwrap();
    let e = s[0].1;
    // Null-cline -1, first correction 1/2.
    assert!(e > -1.0 && e < -1.0 + 2.0 * 0.5, "{e}");
}

#[test]
fn first_order_correction_power_law() {
    for (p, expected) in [(2u32, 3.0), (3, 4.0)] {
        let phi = phi_polynomial(p).unwrap();
        let d = phi.left_deriv_at_1(p + 1) / (1..=p + 1).product::<u32>() as f64;
        let rep = inner_equation::eta1_check(p, phi.c_p(), d, 0.0).unwrap();
        assert!((rep.slope - expected).abs() <= 0.05, "p = {p}: {}", rep.slope);
    }
    let quiet = inner_equation::eta1_check(2, -1.5, 0.0, 1e-3).unwrap();
    assert!(quiet.max_abs <= 1e-3);
}
