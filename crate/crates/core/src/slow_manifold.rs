//! Slow manifold of the regularized normal form: closed-form expansion terms,
//! numerical continuation of the attracting branch through the strip, and
//! checks of the bounds that confine it.
//!
//! Inside the strip the slow coordinates are `(x, v)` with `y = eps v`.
//! Written as a graph `x = n(v)` the manifold satisfies
//! `(1 + 2n + phi(v)(2n - 1)) n' = eps (1 + phi(v))`.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::integrator::{self, fmt17, Direction, EventKind, EventSpec, Options, Stop};
use crate::regularization::{RegularizationProfile, RegularizedSystem};

/// Expansion terms `m0, m1` (graph over `x`) and `n0, n1, n2` (graph over `v`).
#[derive(Debug, Clone)]
pub struct SlowManifoldExpansion {
    profile: Arc<RegularizationProfile>,
}

pub fn expansion_terms(profile: &RegularizationProfile) -> SlowManifoldExpansion {
    SlowManifoldExpansion { profile: Arc::new(profile.clone()) }
}

impl SlowManifoldExpansion {
    pub fn profile(&self) -> &RegularizationProfile {
        &self.profile
    }

    /// `n0 = (phi - 1) / (2 (phi + 1))`, valid on `(-1, 1]`.
    pub fn n0(&self, v: f64) -> f64 {
        let f = self.profile.eval(v);
        0.5 * (f - 1.0) / (f + 1.0)
    }

    pub fn n0_prime(&self, v: f64) -> f64 {
        let f = self.profile.eval(v);
        self.profile.deriv(v, 1) / ((f + 1.0) * (f + 1.0))
    }

    pub fn n0_second(&self, v: f64) -> f64 {
        let f = self.profile.eval(v) + 1.0;
        let d1 = self.profile.deriv(v, 1);
        let d2 = self.profile.deriv(v, 2);
        (d2 * f - 2.0 * d1 * d1) / (f * f * f)
    }

    /// `n1 = 1 / (2 n0')`, valid on `(-1, 1)`.
    pub fn n1(&self, v: f64) -> f64 {
        0.5 / self.n0_prime(v)
    }

    pub fn n1_prime(&self, v: f64) -> f64 {
        let d = self.n0_prime(v);
        -0.5 * self.n0_second(v) / (d * d)
    }

    /// `n2 = -n1 n1' / n0' = n0'' / (4 n0'^4)`.
    pub fn n2(&self, v: f64) -> f64 {
        self.n0_second(v) / (4.0 * self.n0_prime(v).powi(4))
    }

    /// Critical manifold `phi(m0) = (1 + 2x) / (1 - 2x)`, valid for `x < 0`.
    pub fn m0(&self, x: f64) -> f64 {
        self.profile.inverse((1.0 + 2.0 * x) / (1.0 - 2.0 * x))
    }

    pub fn m0_prime(&self, x: f64) -> f64 {
        let w = 4.0 / ((1.0 - 2.0 * x) * (1.0 - 2.0 * x));
        w / self.profile.deriv(self.m0(x), 1)
    }

    /// `m1 = -m0'^2 / 2`.
    pub fn m1(&self, x: f64) -> f64 {
        -0.5 * self.m0_prime(x).powi(2)
    }

    /// Residual of the invariance equation for `n = n0 + eps n1`.
    pub fn invariance_residual(&self, v: f64, eps: f64) -> f64 {
        let f = self.profile.eval(v);
        let n = self.n0(v) + eps * self.n1(v);
        let dn = self.n0_prime(v) + eps * self.n1_prime(v);
        ((1.0 - f) + 2.0 * n * (1.0 + f)) * dn - eps * (1.0 + f)
    }
}

/// Numerically continued attracting manifold, sampled along one orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldTrace {
    pub epsilon: f64,
    pub profile: String,
    pub points: Vec<(f64, f64)>,
    /// Abscissa where the trace reached `v = to_v`.
    pub end_x: f64,
}

fn slow_orbit(r: &RegularizedSystem, start: [f64; 2], to_v: f64, opts: &Options, marks: &[f64]) -> Result<(integrator::Run<2>, Vec<(f64, f64)>)> {
    let (slow, _) = r.slow_fast_forms();
    let mut events = vec![EventSpec::new(move |_, s: &[f64; 2]| s[1] - to_v, Direction::Rising, EventKind::Stop).terminal()];
    for &m in marks {
        events.push(EventSpec::new(move |_, s: &[f64; 2]| s[0] - m, Direction::Rising, EventKind::CrossSection("x".into())));
    }
    let mut o = opts.clone();
    o.strip = None;
    if o.bounds.is_none() {
        o.bounds = Some([-10.0, 10.0, -2.0, 2.0]);
    }
    let run = integrator::solve(&slow, 0.0, start, None, &events, &o)?;
    if run.stop != Stop::Event(0) {
        return Err(Error::NoArrival(format!("slow orbit from ({}, {}) stopped by {:?}", start[0], start[1], run.stop)));
    }
    let hits = run.events.iter().filter(|e| e.index > 0).map(|e| (e.y[0], e.y[1])).collect();
    Ok((run, hits))
}

/// Follow the attracting manifold from `x = from_x` (seeded with `m0 + eps m1`) until `v = to_v`.
pub fn trace_manifold(r: &RegularizedSystem, from_x: f64, to_v: f64) -> Result<ManifoldTrace> {
    trace_manifold_with(r, from_x, to_v, &Options::default())
}

pub fn trace_manifold_with(r: &RegularizedSystem, from_x: f64, to_v: f64, opts: &Options) -> Result<ManifoldTrace> {
    let ex = expansion_terms(&r.profile);
    if !(from_x < 0.0) {
        return Err(Error::HyperbolicityLost(from_x));
    }
    let v0 = ex.m0(from_x) + r.epsilon * ex.m1(from_x);
    // Attracting iff d(Z2)/dv = phi'(v) (2x - 1) / 2 < 0.
    if !(r.profile.deriv(v0, 1) * (2.0 * from_x - 1.0) < 0.0) || v0.abs() >= 1.0 {
        return Err(Error::HyperbolicityLost(from_x));
    }
    let (run, _) = slow_orbit(r, [from_x, v0], to_v, opts, &[])?;
    Ok(ManifoldTrace {
        epsilon: r.epsilon,
        profile: r.profile.to_string(),
        points: run.samples.iter().map(|&(_, s)| (s[0], s[1])).collect(),
        end_x: run.y[0],
    })
}

/// Which confining inequality to check along a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SandwichKind {
    /// `m0(x) - eps K <= v <= m0(x)` for `x` in `[x_min, x_max]`, linear profile.
    LinearConf { k: f64, x_min: f64, x_max: f64 },
    /// `n0(v) < x < n0(v) + M eps / (1 - v)` for `-delta < v - 1 < -eps^lambda1`.
    OuterBlock { m: f64, delta: f64, lambda1: f64 },
    /// `m0(x) - eps K / |x|^((2p-2)/p) <= v <= m0(x)` for `x_min <= x <= -eps^lambda`.
    GraphOverX { k: f64, x_min: f64, lambda: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    /// `(x, v, lower margin, upper margin)`; both margins positive when the point is inside.
    pub margins: Vec<(f64, f64, f64, f64)>,
    pub count: usize,
    pub fraction: f64,
}

impl SandwichReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,v,margin_lower,margin_upper")?;
        for &(x, v, lo, hi) in &self.margins {
            writeln!(w, "{},{},{},{}", fmt17(x), fmt17(v), fmt17(lo), fmt17(hi))?;
        }
        Ok(())
    }
}

pub fn verify_sandwich(r: &RegularizedSystem, trace: &ManifoldTrace, which: SandwichKind) -> SandwichReport {
    let ex = expansion_terms(&r.profile);
    let eps = r.epsilon;
    let p = r.profile.p() as f64;
    let mut margins = Vec::new();
    for &(x, v) in &trace.points {
        let m = match which {
            SandwichKind::LinearConf { k, x_min, x_max } => {
                // Only the part of the trace inside the strip is a graph over x.
                if x < x_min || x > x_max || v > 1.0 {
                    continue;
                }
                // Past the fold the critical curve is continued by its formula.
                let m0 = if x < 0.0 { ex.m0(x) } else { (1.0 + 2.0 * x) / (1.0 - 2.0 * x) };
                (v - (m0 - eps * k), m0 - v)
            }
            SandwichKind::OuterBlock { m, delta, lambda1 } => {
                let w = v - 1.0;
                if !(w > -delta && w < -eps.powf(lambda1)) {
                    continue;
                }
                let n0 = ex.n0(v);
                (x - n0, n0 + m * eps / (1.0 - v) - x)
            }
            SandwichKind::GraphOverX { k, x_min, lambda } => {
                if x < x_min || x > -eps.powf(lambda) {
                    continue;
                }
                let m0 = ex.m0(x);
                (v - (m0 - eps * k / x.abs().powf((2.0 * p - 2.0) / p)), m0 - v)
            }
        };
        margins.push((x, v, m.0, m.1));
    }
    let count = margins.len();
    let inside = margins.iter().filter(|m| m.2 >= 0.0 && m.3 >= 0.0).count();
    let fraction = if count == 0 { 1.0 } else { inside as f64 / count as f64 };
    SandwichReport { margins, count, fraction }
}

/// Separations `|v_i(x) - v_j(x)|` of orbits started on `v = 1`, at the requested abscissae.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub starts: Vec<f64>,
    pub milestones: Vec<f64>,
    /// `v[i][k]`: value of orbit `i` at milestone `k`.
    pub values: Vec<Vec<f64>>,
    /// Abscissa where each orbit leaves the strip through `v = 1`.
    pub exits: Vec<f64>,
}

impl ContractionReport {
    pub fn separation(&self, i: usize, j: usize, k: usize) -> f64 {
        (self.values[i][k] - self.values[j][k]).abs()
    }

    pub fn exit_spread(&self) -> f64 {
        let lo = self.exits.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.exits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }
}

pub fn contraction_probe(r: &RegularizedSystem, starts: &[f64], milestones: &[f64], opts: &Options) -> Result<ContractionReport> {
    let mut values = Vec::new();
    let mut exits = Vec::new();
    for &x0 in starts {
        let marks: Vec<f64> = milestones.iter().copied().filter(|&m| m > x0).collect();
        let (run, hits) = slow_orbit(r, [x0, 1.0], 1.0, opts, &marks)?;
        let row = milestones
            .iter()
            .map(|&m| {
                if m == x0 {
                    1.0
                } else {
                    hits.iter().find(|h| h.0 == m || (h.0 - m).abs() <= 1e-12 * m.abs().max(1.0)).map_or(f64::NAN, |h| h.1)
                }
            })
            .collect();
        values.push(row);
        exits.push(run.y[0]);
    }
    Ok(ContractionReport { starts: starts.to_vec(), milestones: milestones.to_vec(), values, exits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{shared, FilippovSystem};
    use crate::regularization::{phi_linear, phi_polynomial};

    fn normal_form() -> FilippovSystem {
        FilippovSystem::new(shared(|x, _| [1.0, 2.0 * x]), shared(|_, _| [0.0, 1.0]))
    }

    #[test]
    fn linear_terms_in_closed_form() {
        let ex = expansion_terms(&phi_linear());
        for &x in &[-1.0, -0.5, -0.1] {
            assert!((ex.m0(x) - (1.0 + 2.0 * x) / (1.0 - 2.0 * x)).abs() < 1e-14);
            assert!((ex.m1(x) + 8.0 / (1.0 - 2.0 * x).powi(4)).abs() < 1e-12);
        }
        assert!(ex.m0(-0.5).abs() < 1e-15);
        assert!((ex.m1(-0.5) + 0.5).abs() < 1e-14);
    }

    #[test]
    fn m0_and_n0_are_inverse() {
        for p in [1, 2, 3] {
            let phi = if p == 1 { phi_linear() } else { phi_polynomial(p).unwrap() };
            let ex = expansion_terms(&phi);
            for i in 1..100 {
                let x = -2.0 + 1.99 * i as f64 / 100.0;
                assert!((ex.n0(ex.m0(x)) - x).abs() < 1e-10, "p = {p}, x = {x}");
            }
        }
    }

    #[test]
    fn n2_two_ways() {
        let ex = expansion_terms(&phi_polynomial(2).unwrap());
        for &v in &[-0.5, 0.0, 0.3, 0.7] {
            let a = ex.n2(v);
            let b = -2.0 * ex.n1(v).powi(2) * ex.n1_prime(v);
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn m1_solves_first_order_invariance() {
        // Differentiate phi(m0 + eps m1) numerically along x and compare with the expansion.
        let phi = phi_polynomial(2).unwrap();
        let ex = expansion_terms(&phi);
        let x = -0.4;
        let h = 1e-5;
        let dm0 = (ex.m0(x + h) - ex.m0(x - h)) / (2.0 * h);
        assert!((dm0 - ex.m0_prime(x)).abs() < 1e-8);
    }

    #[test]
    fn n0_contact_order_at_one() {
        let phi = phi_polynomial(2).unwrap();
        let ex = expansion_terms(&phi);
        let w = 1e-3;
        let model = phi.phi_p_at_1() / (4.0 * 2.0) * w * w;
        assert!((ex.n0(1.0 - w) / model - 1.0).abs() < 1e-2);
    }

    #[test]
    fn n1_positive() {
        for p in [1, 2, 4] {
            let phi = if p == 1 { phi_linear() } else { phi_polynomial(p).unwrap() };
            let ex = expansion_terms(&phi);
            for i in 1..200 {
                let v = -1.0 + i as f64 / 100.0;
                assert!(ex.n1(v) > 0.0, "p = {p}, v = {v}");
            }
        }
    }

    #[test]
    fn empty_range_passes_vacuously() {
        let r = RegularizedSystem::new(normal_form(), phi_linear(), 1e-3);
        let trace = ManifoldTrace { epsilon: 1e-3, profile: "linear".into(), points: vec![(-0.5, 0.0)], end_x: 0.0 };
        let rep = verify_sandwich(&r, &trace, SandwichKind::LinearConf { k: 10.0, x_min: 0.0, x_max: 0.1 });
        assert_eq!(rep.count, 0);
        assert_eq!(rep.fraction, 1.0);
    }

    #[test]
    fn seeding_past_the_fold_is_rejected() {
        let r = RegularizedSystem::new(normal_form(), phi_linear(), 1e-3);
        assert!(matches!(trace_manifold(&r, 0.1, 1.0), Err(Error::HyperbolicityLost(_))));
    }

    #[test]
    fn identical_starts_do_not_separate() {
        let r = RegularizedSystem::new(normal_form(), phi_linear(), 1e-2);
        let rep = contraction_probe(&r, &[-0.1, -0.1], &[-0.05, 0.0], &Options::default()).unwrap();
        assert_eq!(rep.separation(0, 1, 1), 0.0);
    }
}
