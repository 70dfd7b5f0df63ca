use slidekick::fields::{shared, FilippovSystem};
use slidekick::integrator::Options;
use slidekick::models;
use slidekick::poincare::{self, TangencyConstants};
use slidekick::regularization::{phi_linear, phi_polynomial, RegularizedSystem};

fn normal_form() -> FilippovSystem {
    FilippovSystem::new(shared(|x, _| [1.0, 2.0 * x]), shared(|_, _| [0.0, 1.0]))
}

#[test]
fn p2_image_is_nearly_constant() {
    let r = RegularizedSystem::new(normal_form(), phi_polynomial(2).unwrap(), 1e-3);
    let opts = Options::default();
    let a = poincare::fold_transit(&r, 0.0, 0.25, -0.8, &opts).unwrap().result.x_out;
    let b = poincare::fold_transit(&r, 0.0, 0.25, -0.6, &opts).unwrap().result.x_out;
    assert!((a - b).abs() <= 1e-5, "{a} {b}");
}

#[test]
fn linear_exit_law_has_unit_slope() {
    let k = TangencyConstants::normal_form(0.25);
    let s = poincare::landing_scan(&normal_form(), &phi_linear(), &k, &[1e-5, 3e-5, 1e-4, 3e-4, 1e-3], -0.8, &Options::default()).unwrap();
    assert!((s.exit_fit.slope - 1.0).abs() <= 0.02, "{}", s.exit_fit.slope);
    // The exit abscissa itself sits at 2 eps.
    for row in &s.rows {
        assert!((row.x_exit / row.eps - 2.0).abs() < 0.05, "{row:?}");
    }
}

#[test]
fn plus_map_closed_form() {
    // Orbits of (1, 2x) are parabolas y - x^2 = const.
    let xp = shared(|x, _| [1.0, 2.0 * x]);
    for x in [-0.9, -0.7, -0.55] {
        let out = poincare::plus_map(xp.as_ref(), 0.0, 0.25, x).unwrap();
        assert!((out + x).abs() < 1e-9);
    }
}

#[test]
fn centre_exterior_inverts_plus_map() {
    let m = models::model("coulomb", &[]).unwrap();
    let ext = m.exterior.clone().unwrap();
    for x in [0.2, 0.3, 0.4] {
        let up = poincare::plus_map(m.x_plus().as_ref(), m.fold.x_f, m.y0, x).unwrap();
        assert!((ext.apply(up).unwrap() - x).abs() < 1e-8);
    }
}

#[test]
fn grazing_germ_meets_tangent_orbit_at_zero() {
    let m = models::model("grazing-family", &[("mu", 0.0)]).unwrap();
    let ext = m.exterior.clone().unwrap();
    assert!((ext.apply(m.constants.x0_plus).unwrap() - m.constants.x0_minus).abs() < 1e-15);
}

#[test]
fn composed_pieces_reproduce_transit() {
    let k = TangencyConstants::normal_form(0.25);
    let r = RegularizedSystem::new(normal_form(), phi_linear(), 1e-3);
    let (_, _, c) = poincare::composed_pieces(&r, &k, -0.8, &Options::default()).unwrap();
    let whole = poincare::map_p_epsilon(&r, &k, -0.8, 0.45).unwrap().result.x_out;
    assert!((c - whole).abs() < 1e-8, "{c} vs {whole}");
}
