use slidekick::fields::{shared, FilippovSystem};
use slidekick::inner_equation::{self, StepControl};
use slidekick::regularization::{phi_linear, phi_polynomial, RegularizedSystem};
use slidekick::slow_manifold::{self, expansion_terms, SandwichKind};

fn system(p: u32, eps: f64) -> RegularizedSystem {
    let z = FilippovSystem::new(shared(|x, _| [1.0, 2.0 * x]), shared(|_, _| [0.0, 1.0]));
    let phi = if p == 1 { phi_linear() } else { phi_polynomial(p).unwrap() };
    RegularizedSystem::new(z, phi, eps)
}

#[test]
fn linear_exit_near_two_eps() {
    let t = slow_manifold::trace_manifold(&system(1, 1e-3), -1.0, 1.0).unwrap();
    assert!((0.0019..=0.0021).contains(&t.end_x), "{}", t.end_x);
}

#[test]
fn linear_confinement() {
    let r = system(1, 1e-3);
    let t = slow_manifold::trace_manifold(&r, -1.0, 1.0).unwrap();
    let rep = slow_manifold::verify_sandwich(&r, &t, SandwichKind::LinearConf { k: 10.0, x_min: -1.0, x_max: 0.25 });
    assert!(rep.count > 10);
    assert_eq!(rep.fraction, 1.0);
}

#[test]
fn outer_block_for_p2() {
    let r = system(2, 1e-4);
    let t = slow_manifold::trace_manifold(&r, -1.0, 1.0).unwrap();
    let rep = slow_manifold::verify_sandwich(&r, &t, SandwichKind::OuterBlock { m: 50.0, delta: 0.2, lambda1: 0.2 });
    assert!(rep.count > 10);
    assert_eq!(rep.fraction, 1.0);
}

#[test]
fn p2_exit_matches_inner_value() {
    let eps: f64 = 1e-6;
    let phi = phi_polynomial(2).unwrap();
    let eta0 = inner_equation::distinguished_solution(2, phi.c_p(), -30.0, StepControl::default()).unwrap().eta_at_0;
    let t = slow_manifold::trace_manifold(&system(2, eps), -1.0, 1.0).unwrap();
    let predicted = eps.powf(2.0 / 3.0) * eta0;
    assert!((t.end_x - predicted).abs() <= 0.2 * predicted, "{} vs {predicted}", t.end_x);
}

#[test]
fn second_order_coefficient_of_linear_exit() {
    // x1 = 2 eps + n2(1) eps^2 + ..., with n2 = n0''/(4 n0'^4) = -16 for the linear profile.
    let n2 = expansion_terms(&phi_linear()).n2(1.0 - 1e-9);
    assert!((n2 + 16.0).abs() < 1e-6);
    let eps = 1e-4;
    let t = slow_manifold::trace_manifold(&system(1, eps), -1.0, 1.0).unwrap();
    let measured = (t.end_x - 2.0 * eps) / (eps * eps);
    assert!((measured - n2).abs() < 0.05 * n2.abs(), "{measured}");
}

#[test]
fn first_order_terms_match_expansion() {
    let ex = expansion_terms(&phi_linear());
    // Linear profile closed forms: n0 = (v - 1)/(2(v + 1)), n1 = (v + 1)^2 / 2.
    for v in [-0.5, 0.0, 0.6] {
        assert!((ex.n0(v) - (v - 1.0) / (2.0 * (v + 1.0))).abs() < 1e-14);
        assert!((ex.n1(v) - 0.5 * (v + 1.0) * (v + 1.0)).abs() < 1e-12);
    }
}
