use slidekick::fields::{shared, FilippovSystem};
use slidekick::integrator::{self, Options};
use slidekick::models::{self, coulomb_integral, flowbox_reduce};
use slidekick::Error;

fn tight() -> Options {
    Options { rtol: 1e-12, atol: 1e-14, ..Options::default() }
}

#[test]
fn stribeck_lyapunov_growth_below_switching_line() {
    let m = models::model("stribeck", &[]).unwrap();
    let (fs, fd, delta) = (m.param("fs"), m.param("fd"), m.param("delta"));
    let xc = (fs - fd) / (1.0 + delta) + fd;
    // Physical velocity is 1 - s in the model frame.
    let v = |x: f64, s: f64| (x - xc).powi(2) + (1.0 - s).powi(2);
    for i in 0..20 {
        for j in 0..20 {
            let (x, s) = (-2.0 + 0.2 * i as f64 + 0.013, -5.0 + 0.55 * j as f64 + 0.007);
            let f = m.system.x_plus.eval(x, s);
            let dv = 2.0 * (x - xc) * f[0] - 2.0 * (1.0 - s) * f[1];
            assert!(dv > 0.0, "dV/dt = {dv} at ({x}, {s})");
        }
    }
    let run = integrator::solve(m.system.x_plus.as_ref(), 0.0, [xc + 0.1, 1.0], Some(10.0), &[], &tight()).unwrap();
    let vals: Vec<f64> = run.samples.iter().map(|(_, p)| v(p[0], p[1])).collect();
    assert!(vals.windows(2).all(|w| w[1] >= w[0]));
    assert!(vals.last().unwrap() > &vals[0]);
}

#[test]
fn stribeck_facts() {
    let m = models::model("stribeck", &[]).unwrap();
    assert!((m.fold.x_f - 1.0).abs() < 1e-12);
    let focus = m.facts.iter().find(|f| f.0 == "repelling focus").unwrap();
    assert!(focus.1.starts_with("(0.976190476190"), "{}", focus.1);
    assert!(matches!(models::model("stribeck", &[("fd", 1.5)]), Err(Error::BadParams(_))));
}

#[test]
fn coulomb_arcs_are_circles() {
    let m = models::model("coulomb", &[("fs", 0.7)]).unwrap();
    for (x, s) in [(0.2, 0.1), (0.7, -0.3), (1.4, 0.5)] {
        let run = integrator::solve(m.system.x_plus.as_ref(), 0.0, [x, s], Some(6.0), &[], &tight()).unwrap();
        let h0 = coulomb_integral(0.7, x, s);
        for (_, p) in &run.samples {
            assert!((coulomb_integral(0.7, p[0], p[1]) - h0).abs() < 1e-9);
        }
        // Period 2 pi about the centre.
        let end = run.y;
        let back = integrator::solve(m.system.x_plus.as_ref(), 0.0, end, Some(2.0 * std::f64::consts::PI - 6.0), &[], &tight()).unwrap().y;
        assert!((back[0] - x).abs() < 1e-8 && (back[1] - s).abs() < 1e-8);
    }
    let (px, py) = m.frame.to_physical(0.7, 1.0);
    assert_eq!((px, py), (0.7, 0.0));
}

#[test]
fn general_fold_constants_match_fields() {
    let m = models::model("general-fold", &[("b", 0.3), ("a1", 0.0), ("a2", 0.0), ("a3", 0.0)]).unwrap();
    assert!(!m.closed_form);
    assert!(m.constants.signs_ok());
    assert!(m.fold.x_f.abs() < 1e-12);
}

#[test]
fn flowbox_identity_on_normal_form() {
    let z = FilippovSystem::new(shared(|x, _| [1.0, 2.0 * x]), shared(|_, _| [0.0, 1.0]));
    let r = flowbox_reduce(&z, -0.5, 0.5).unwrap();
    assert!((r.a - 2.0).abs() < 1e-6 && (r.c - 1.0).abs() < 1e-6);
    for (x, y) in [(-0.2, 0.1), (0.0, 0.0), (0.15, 0.05)] {
        let f = r.system.x_plus.eval(x, y);
        assert!((f[0] - 1.0).abs() < 1e-5 && (f[1] - 2.0 * x).abs() < 1e-5, "{f:?}");
    }
}

#[test]
fn flowbox_straightens_tilted_minus_field() {
    let z = FilippovSystem::new(shared(|x, y| [1.0 + 0.1 * y, 2.0 * x + 0.5 * y]), shared(|x, _| [0.2, 1.0 + 0.1 * x]));
    let r = flowbox_reduce(&z, -0.5, 0.5).unwrap();
    assert!(r.minus_error <= 1e-8, "{}", r.minus_error);
    for (x, y) in [(-0.1, 0.0), (0.0, 0.1), (0.1, -0.1)] {
        assert_eq!(r.system.x_minus.eval(x, y), [0.0, 1.0]);
    }
    // Tangency at the origin, still visible, with the normal-form slope along the line.
    let f0 = r.system.x_plus.eval(0.0, 0.0);
    assert!(f0[1].abs() < 1e-7 && (f0[0] - 1.0).abs() < 1e-5);
    for x in [-0.08, -0.03, 0.04, 0.09] {
        let f = r.system.x_plus.eval(x, 0.0);
        assert!((f[1] - 2.0 * x).abs() < 1e-6, "{x}: {f:?}");
    }
}

#[test]
fn flowbox_rejects_tangent_minus_field() {
    let z = FilippovSystem::new(shared(|x, _| [1.0, 2.0 * x]), shared(|_, _| [1.0, 0.0]));
    assert!(matches!(flowbox_reduce(&z, -0.5, 0.5), Err(Error::TransversalityLost(..))));
}

#[test]
fn grazing_ode_cycle_is_invariant() {
    let m = models::model("grazing-family-ode", &[("mu", -0.05)]).unwrap();
    let run = integrator::solve(m.system.x_plus.as_ref(), 0.0, [1.0, 0.95], Some(7.0), &[], &tight()).unwrap();
    for (_, p) in &run.samples {
        assert!((p[0].hypot(p[1] - 0.95) - 1.0).abs() < 1e-9);
    }
}
