use proptest::prelude::*;

use slidekick::fields::{filippov_flow, shared, FilippovSystem, PlanarField, RegionClass};
use slidekick::integrator::{EventKind, Half, Options, Section, Until};
use slidekick::models;
use slidekick::regularization::{phi_linear, phi_polynomial, RegularizedSystem};

fn normal_form() -> FilippovSystem {
    FilippovSystem::new(shared(|x, _| [1.0, 2.0 * x]), shared(|_, _| [0.0, 1.0]))
}

proptest! {
    #[test]
    fn regularized_field_matches_sides_outside_strip(x in -2.0f64..2.0, y in 0.0f64..1.0, p in 1u32..5) {
        let eps = 0.05;
        let phi = if p == 1 { phi_linear() } else { phi_polynomial(p).unwrap() };
        let r = RegularizedSystem::new(normal_form(), phi, eps);
        let above = r.eval(x, eps + y);
        prop_assert_eq!(above, [1.0, 2.0 * x]);
        prop_assert_eq!(r.eval(x, -eps - y), [0.0, 1.0]);
    }

    #[test]
    fn profiles_are_odd_and_increasing(v in -0.999f64..0.999, p in 2u32..6) {
        let phi = phi_polynomial(p).unwrap();
        prop_assert!((phi.eval(v) + phi.eval(-v)).abs() < 1e-13);
        prop_assert!(phi.deriv(v, 1) > 0.0);
        prop_assert!(phi.eval(v).abs() < 1.0);
    }

    #[test]
    fn normal_form_sliding_drift(x in -5.0f64..-1e-6) {
        let z = normal_form();
        prop_assert_eq!(z.classify_point(x), RegionClass::Sliding);
        let v = z.sliding_field(x).unwrap();
        prop_assert!((v - 1.0 / (1.0 - 2.0 * x)).abs() < 1e-14);
    }
}

#[test]
fn coulomb_sliding_is_unit_speed() {
    let m = models::model("coulomb", &[]).unwrap();
    for x in [-0.9, 0.0, 0.6] {
        assert!((m.system.sliding_field(x).unwrap() - 1.0).abs() < 1e-14);
    }
}

#[test]
fn filippov_orbit_returns_through_fold() {
    let to = Section::new("back", 0.25, Half::Pos).split_at(0.0);
    let tr = filippov_flow(&normal_form(), [-0.5, 0.25], Until::Section(to), &Options::default()).unwrap();
    let (t, x, y) = tr.last().unwrap();
    assert!((x - 0.5).abs() < 1e-9 && (y - 0.25).abs() < 1e-12);
    assert!(tr.events.iter().any(|e| e.1 == EventKind::FoldExit && e.2.abs() < 1e-9));
    // The start lies on y = x^2, which reaches the fold at t = 0.5 and the section at t = 1.
    assert!((t - 1.0).abs() < 1e-8, "{t}");
}

#[test]
fn regularized_orbit_reaches_far_side() {
    let r = RegularizedSystem::new(normal_form(), phi_linear(), 1e-3);
    let to = Section::new("back", 1e-3, Half::Pos).split_at(0.0);
    let tr = slidekick::integrator::integrate(&r, [-0.5, 1e-3], Until::Section(to), &Options::default().with_strip(1e-3)).unwrap();
    let (_, x, _) = tr.last().unwrap();
    assert!(x > 0.0 && x < 0.01, "{x}");
}
