use slidekick::bifurcation::{self, grazing_family, grazing_sliding_scan, ReturnMap, ScanPoint, Stability};
use slidekick::models;
use slidekick::regularization::phi_linear;

const EPS: f64 = 1e-3;

#[test]
fn attracting_germ_fixed_point_follows_mu() {
    // Flat landing map: R(x) = x0- + mu + c alpha+ eps up to O(eps^2).
    let fam = grazing_family(false);
    let mus = [-0.004, 0.0, 0.0004];
    let pts = grazing_sliding_scan(&fam, &phi_linear(), EPS, &mus).unwrap();
    for p in &pts {
        assert_eq!(p.fixed_points.len(), 1);
        let f = p.fixed_points[0];
        let alpha_plus = -1.0;
        let predicted = -0.5 + p.mu + p.c * alpha_plus * EPS;
        assert!((f.x - predicted).abs() <= 10.0 * EPS * EPS, "{} vs {predicted}", f.x);
        assert_eq!(f.stability, Stability::Attracting);
        assert!((p.delta - 0.5).abs() < 1e-6);
    }
    // Well above 2 Delta eps the orbit clears the strip and P+ = -x takes over.
    let far = grazing_sliding_scan(&fam, &phi_linear(), EPS, &[0.003]).unwrap();
    assert!((far[0].fixed_points[0].x - (-0.5 + 2.0 * 0.003)).abs() < 1e-9);
}

#[test]
fn repelling_germ_saddle_node() {
    let fam = grazing_family(true);
    let pts = grazing_sliding_scan(&fam, &phi_linear(), EPS, &[0.5e-3, 1.5e-3]).unwrap();
    assert!(pts[0].fixed_points.is_empty());
    let fp = &pts[1].fixed_points;
    assert_eq!(fp.len(), 2);
    let kinds: Vec<Stability> = fp.iter().map(|f| f.stability).collect();
    assert!(kinds.contains(&Stability::Attracting) && kinds.contains(&Stability::Repelling));
    // The repelling orbit misses the strip, so its slope is the germ's composed with P+ = -x.
    let rep = fp.iter().find(|f| f.stability == Stability::Repelling).unwrap();
    assert!((rep.slope - 2.0).abs() < 1e-3, "{}", rep.slope);
}

#[test]
fn delta_identity_on_flow_exterior() {
    for id in ["stribeck", "grazing-family-ode"] {
        let m = models::model(id, &[]).unwrap();
        let map = ReturnMap::new(&m, phi_linear(), EPS).unwrap();
        let (lhs, rhs) = bifurcation::delta_identity(&map).unwrap();
        assert!((lhs - rhs).abs() <= 1e-4 * lhs.abs().max(1.0), "{id}: {lhs} vs {rhs}");
    }
}

#[test]
fn stribeck_orbit_is_strongly_attracting() {
    let m = models::model("stribeck", &[]).unwrap();
    let map = ReturnMap::new(&m, phi_linear(), 1e-2).unwrap();
    let out = bifurcation::find_periodic_orbit(&map, map.window(), bifurcation::default_start(&map)).unwrap();
    let p = out.fixed_point().unwrap();
    assert!(p.residual < 1e-10);
    assert!(p.slope.abs() < 1e-2);
}

#[test]
fn coulomb_tangent_orbit_is_fixed() {
    let m = models::model("coulomb", &[]).unwrap();
    let map = ReturnMap::new(&m, phi_linear(), EPS).unwrap();
    let r = bifurcation::centre_semistability(&map, &[], &[]).unwrap();
    assert!(r.tangent_fixed(1e-9));
    // Tangent to y = eps in the model frame: the circle of radius 1 - eps about (fs, 1).
    let expected = 1.0 - ((1.0 - EPS).powi(2) - 0.75f64.powi(2)).sqrt();
    assert!((r.x_bar - expected).abs() < 1e-9, "{} vs {expected}", r.x_bar);
}

#[test]
fn passage_time_tracks_unstable_eigenvalue() {
    let (slope, predicted) = bifurcation::passage_time_slope(0.1, &[1e-4, 1e-5, 1e-6, 1e-7]).unwrap();
    assert!((slope - predicted).abs() < 0.01 * predicted, "{slope} vs {predicted}");
}

#[test]
fn scan_csv_marks_missing_orbits() {
    let pts = vec![ScanPoint { mu: 0.001, fixed_points: vec![], gamma: -0.001, c: -2.0, delta: -1.0, no_return: false }];
    let mut buf = vec![];
    bifurcation::write_scan_csv(&pts, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert_eq!(row.split(',').count(), 5);
    assert!(row.contains(",,absent,"), "{row}");
}
