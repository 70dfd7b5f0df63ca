//! Fixed points of the full return map `P^e o P_eps` and the parameter scans built on it.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::filippov_flow;
use crate::integrator::{self, fmt17, Direction, Half, Options, Section, Until};
use crate::models::{self, ModelDescriptor};
use crate::poincare::{self, linear_fit, FoldMapDecomposition, SharedExterior, TangencyConstants};
use crate::regularization::{RegularizationProfile, RegularizedSystem};

/// `x -> P^e(P_eps(x))` on `{y = y0, x < x_f}`.
#[derive(Clone)]
pub struct ReturnMap {
    pub r: RegularizedSystem,
    pub consts: TangencyConstants,
    pub exterior: SharedExterior,
    pub opts: Options,
}

impl ReturnMap {
    pub fn new(m: &ModelDescriptor, profile: RegularizationProfile, eps: f64) -> Result<Self> {
        let exterior = m.exterior.clone().ok_or_else(|| Error::BadParams(format!("model {} has no exterior map", m.id)))?;
        Ok(ReturnMap { r: m.regularized(profile, eps), consts: m.constants, exterior, opts: Options::default() })
    }

    pub fn inner(&self, x: f64) -> Result<FoldMapDecomposition> {
        poincare::fold_transit(&self.r, self.consts.x_f, self.consts.y0, x, &self.opts)
    }

    pub fn apply(&self, x: f64) -> Result<f64> {
        self.exterior.apply(self.inner(x)?.result.x_out)
    }

    /// Two-sided difference slope.
    pub fn slope(&self, x: f64) -> Result<f64> {
        let h = 1e-6 * x.abs().max(1.0);
        Ok((self.apply(x + h)? - self.apply(x - h)?) / (2.0 * h))
    }

    /// Default search window on the entry section, to the left of the fold.
    pub fn window(&self) -> (f64, f64) {
        let w = self.consts.x_f - self.consts.x0_minus;
        (self.consts.x0_minus - 0.5 * w, self.consts.x_f - 0.05 * w)
    }

    /// Exterior germ at `x0+`: `(gamma, c)` with `P^e(x0+) = x0- + gamma` and `c` its slope.
    pub fn germ(&self) -> (f64, f64) {
        let x0 = self.consts.x0_plus;
        let gamma = self.exterior.apply(x0).map(|v| v - self.consts.x0_minus).unwrap_or(f64::NAN);
        let c = self.exterior.derivative(x0).unwrap_or(f64::NAN);
        (gamma, c)
    }

    /// `Delta = alpha- - c alpha+`.
    pub fn delta(&self, c: f64) -> f64 {
        self.consts.alpha_minus - c * self.consts.alpha_plus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Attracting,
    Repelling,
    Neutral,
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stability::Attracting => "attracting",
            Stability::Repelling => "repelling",
            Stability::Neutral => "neutral",
        })
    }
}

pub fn classify(slope: f64) -> Stability {
    if slope.abs() < 1.0 - 1e-3 {
        Stability::Attracting
    } else if slope.abs() > 1.0 + 1e-3 {
        Stability::Repelling
    } else {
        Stability::Neutral
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub x: f64,
    pub residual: f64,
    pub slope: f64,
    pub stability: Stability,
    /// Iterations used; zero when found by bisection.
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Absence {
    /// The exterior map is undefined on the image of the window.
    NoReturn,
    NoFixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Found(FixedPoint),
    Absent(Absence),
}

impl Outcome {
    pub fn fixed_point(&self) -> Option<FixedPoint> {
        match self {
            Outcome::Found(p) => Some(*p),
            Outcome::Absent(_) => None,
        }
    }
}

fn finish(map: &ReturnMap, x: f64, iterations: usize) -> Result<FixedPoint> {
    let residual = (map.apply(x)? - x).abs();
    let slope = map.slope(x)?;
    Ok(FixedPoint { x, residual, slope, stability: classify(slope), iterations })
}

fn bisect(map: &ReturnMap, mut lo: f64, mut hi: f64, mut flo: f64) -> Result<f64> {
    while hi - lo > 1e-13 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        let fm = map.apply(mid)? - mid;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Every sign change of `R(x) - x` on a uniform grid over `window`, refined by bisection.
/// Returns `None` when the map is undefined at every grid point.
pub fn all_fixed_points(map: &ReturnMap, window: (f64, f64), n: usize) -> Result<Option<Vec<FixedPoint>>> {
    let xs: Vec<f64> = (0..=n).map(|i| window.0 + (window.1 - window.0) * i as f64 / n as f64).collect();
    fixed_points_on(map, &xs)
}

/// Uniform grid over `window` merged with a fine grid of spacing `eps/20` within `5 eps` of the
/// tangent start, where the strip branch and the `X+` branch of the map meet.
pub fn scan_grid(map: &ReturnMap, window: (f64, f64), n: usize) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..=n).map(|i| window.0 + (window.1 - window.0) * i as f64 / n as f64).collect();
    let c = &map.consts;
    let eps = map.r.epsilon;
    if let Ok(xb) = poincare::tangent_start(map.r.base.x_plus.as_ref(), c.x_f, c.y0, eps) {
        xs.extend((-100..=100).map(|k| xb + eps * k as f64 / 20.0).filter(|x| *x > window.0 && *x < window.1));
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// Sign changes of `R(x) - x` between consecutive points of the sorted grid `xs`.
pub fn fixed_points_on(map: &ReturnMap, xs: &[f64]) -> Result<Option<Vec<FixedPoint>>> {
    let n = xs.len() - 1;
    let vals: Vec<Option<f64>> = xs.par_iter().map(|&x| map.apply(x).ok().map(|v| v - x)).collect();
    if vals.iter().all(Option::is_none) {
        return Ok(None);
    }
    let mut brackets = vec![];
    for i in 0..n {
        if let (Some(a), Some(b)) = (vals[i], vals[i + 1]) {
            if a == 0.0 {
                brackets.push((xs[i], xs[i], a));
            } else if (a < 0.0) != (b < 0.0) && b != 0.0 {
                brackets.push((xs[i], xs[i + 1], a));
            }
        }
    }
    let pts: Vec<Result<FixedPoint>> = brackets
        .par_iter()
        .map(|&(lo, hi, flo)| {
            let x = if lo == hi { lo } else { bisect(map, lo, hi, flo)? };
            finish(map, x, 0)
        })
        .collect();
    pts.into_iter().collect::<Result<Vec<_>>>().map(Some)
}

/// Fixed point by direct iteration from `start`, with a bisection fallback over `window`.
pub fn find_periodic_orbit(map: &ReturnMap, window: (f64, f64), start: f64) -> Result<Outcome> {
    let mut x = start;
    let mut incs: Vec<f64> = vec![];
    for n in 1..=200 {
        let next = match map.apply(x) {
            Ok(v) => v,
            Err(_) => break,
        };
        let inc = (next - x).abs();
        x = next;
        if !(x > window.0 && x < window.1) {
            break;
        }
        // Contraction certificate: after the second step increments at least halve.
        if incs.len() >= 2 && inc > 0.5 * incs.last().unwrap() && inc > 1e-12 {
            break;
        }
        incs.push(inc);
        if inc <= 1e-10 {
            let p = finish(map, x, n)?;
            if p.residual <= 1e-8 {
                return Ok(Outcome::Found(p));
            }
            break;
        }
    }
    match fixed_points_on(map, &scan_grid(map, window, 64))? {
        None => Ok(Outcome::Absent(Absence::NoReturn)),
        Some(v) => match v.into_iter().filter(|p| p.residual <= 1e-8).min_by(|a, b| a.slope.abs().total_cmp(&b.slope.abs())) {
            Some(p) => Ok(Outcome::Found(p)),
            None => Ok(Outcome::Absent(Absence::NoFixedPoint)),
        },
    }
}

/// Default iteration start: the image of the far end of the window.
pub fn default_start(map: &ReturnMap) -> f64 {
    let w = map.window();
    map.apply(w.0).unwrap_or(map.consts.x0_minus)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub mu: f64,
    pub fixed_points: Vec<FixedPoint>,
    pub gamma: f64,
    pub c: f64,
    pub delta: f64,
    pub no_return: bool,
}

/// Branch diagram of a one-parameter family over `mus`, each point searched globally.
pub fn grazing_sliding_scan(
    family: &(dyn Fn(f64) -> Result<ModelDescriptor> + Sync),
    profile: &RegularizationProfile,
    eps: f64,
    mus: &[f64],
) -> Result<Vec<ScanPoint>> {
    let pts: Vec<Result<ScanPoint>> = mus
        .par_iter()
        .map(|&mu| {
            let m = family(mu)?;
            let map = ReturnMap::new(&m, profile.clone(), eps)?;
            let (gamma, c) = map.germ();
            let found = fixed_points_on(&map, &scan_grid(&map, map.window(), 96))?;
            let no_return = found.is_none();
            let mut fixed_points: Vec<FixedPoint> = found.unwrap_or_default().into_iter().filter(|p| p.residual <= 1e-8).collect();
            fixed_points.sort_by(|a, b| a.x.total_cmp(&b.x));
            Ok(ScanPoint { mu, fixed_points, gamma, c, delta: map.delta(c), no_return })
        })
        .collect();
    pts.into_iter().collect()
}

/// The grazing family with the attracting or repelling germ.
pub fn grazing_family(repelling: bool) -> impl Fn(f64) -> Result<ModelDescriptor> + Sync {
    move |mu| models::model("grazing-family", &[("mu", mu), ("repelling", if repelling { 1.0 } else { 0.0 })])
}

pub fn write_scan_csv<W: Write>(pts: &[ScanPoint], mut w: W) -> std::io::Result<()> {
    writeln!(w, "mu,fixed_point,stability,gamma,delta")?;
    for p in pts {
        if p.fixed_points.is_empty() {
            let why = if p.no_return { "no-return" } else { "absent" };
            writeln!(w, "{},,{},{},{}", fmt17(p.mu), why, fmt17(p.gamma), fmt17(p.delta))?;
        }
        for f in &p.fixed_points {
            writeln!(w, "{},{},{},{},{}", fmt17(p.mu), fmt17(f.x), f.stability, fmt17(p.gamma), fmt17(p.delta))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExteriorRun {
    pub start: f64,
    pub iterates: Vec<f64>,
    pub increasing: bool,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentreReport {
    pub x_bar: f64,
    /// `|R(x_bar) - x_bar|`.
    pub tangent_residual: f64,
    pub exterior: Vec<ExteriorRun>,
    /// `(start, |R(x) - x|)`.
    pub interior: Vec<(f64, f64)>,
}

impl CentreReport {
    pub fn tangent_fixed(&self, tol: f64) -> bool {
        self.tangent_residual <= tol
    }

    pub fn exterior_converges(&self, tol: f64) -> bool {
        self.exterior.iter().all(|r| r.increasing && r.gap <= tol)
    }

    pub fn interior_identity(&self, tol: f64) -> bool {
        self.interior.iter().all(|r| r.1 <= tol)
    }
}

/// Semistability of the orbit of a centre of `X+` tangent to `y = eps`.
pub fn centre_semistability(map: &ReturnMap, exterior_starts: &[f64], interior_starts: &[f64]) -> Result<CentreReport> {
    let c = &map.consts;
    let xp = map.r.base.x_plus.as_ref();
    let x_bar = poincare::tangent_start(xp, c.x_f, c.y0, map.r.epsilon)?;
    let tangent_residual = (map.apply(x_bar)? - x_bar).abs();
    let exterior: Vec<Result<ExteriorRun>> = exterior_starts
        .par_iter()
        .map(|&x| {
            let mut its = vec![x];
            let mut cur = x;
            for _ in 0..100 {
                cur = map.apply(cur)?;
                its.push(cur);
                if (cur - x_bar).abs() <= 1e-7 {
                    break;
                }
            }
            let increasing = its.windows(2).all(|w| w[1] > w[0]);
            Ok(ExteriorRun { start: x, gap: (cur - x_bar).abs(), iterates: its, increasing })
        })
        .collect();
    let interior: Vec<Result<(f64, f64)>> =
        interior_starts.par_iter().map(|&x| Ok((x, (map.apply(x)? - x).abs()))).collect();
    Ok(CentreReport {
        x_bar,
        tangent_residual,
        exterior: exterior.into_iter().collect::<Result<_>>()?,
        interior: interior.into_iter().collect::<Result<_>>()?,
    })
}

/// Starts on `{s = y0}` of the Coulomb circles of the given radii about `(fs, 1)`.
pub fn coulomb_starts(fs: f64, y0: f64, radii: &[f64]) -> Vec<f64> {
    radii.iter().map(|r| fs - (r * r - (1.0 - y0).powi(2)).sqrt()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomoclinicReport {
    pub epsilon: f64,
    pub alpha_plus: f64,
    pub lambda1: f64,
    /// `(mu_tilde, outcome)` in scan order.
    pub rows: Vec<(f64, Outcome)>,
    pub mu_star: f64,
}

fn saddle_map(d: f64, mu: f64, profile: &RegularizationProfile, eps: f64) -> Result<(ModelDescriptor, ReturnMap)> {
    let m = models::model("saddle-homoclinic", &[("mu", mu), ("d", d)])?;
    let map = ReturnMap::new(&m, profile.clone(), eps)?;
    Ok((m, map))
}

/// Exterior map defined at the landing of the pseudo-separatrix.
fn returns(d: f64, mu_t: f64, profile: &RegularizationProfile, eps: f64) -> Result<bool> {
    let (m, map) = saddle_map(d, mu_t * eps, profile, eps)?;
    Ok(map.apply(m.constants.x0_minus).is_ok())
}

/// Fixed points over the `mu_tilde` grid (`mu = mu_tilde eps`) and the bisected homoclinic parameter.
pub fn homoclinic_scan(d: f64, profile: &RegularizationProfile, eps: f64, mu_tildes: &[f64]) -> Result<HomoclinicReport> {
    let (m0, _) = saddle_map(d, 0.0, profile, eps)?;
    let s = m0.saddle.ok_or_else(|| Error::SaddleNotResolved("model carries no saddle data".into()))?;
    let rows: Vec<Result<(f64, Outcome)>> = mu_tildes
        .par_iter()
        .map(|&mt| {
            let (m, map) = saddle_map(d, mt * eps, profile, eps)?;
            if map.apply(m.constants.x0_minus).is_err() {
                return Ok((mt, Outcome::Absent(Absence::NoReturn)));
            }
            let start = map.apply(m.constants.x0_minus)?;
            Ok((mt, find_periodic_orbit(&map, map.window(), start)?))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let (mut lo, mut hi) = (0.0, -2.0 * s.alpha_plus_ref);
    if !returns(d, lo, profile, eps)? || returns(d, hi, profile, eps)? {
        return Err(Error::NoArrival("homoclinic bracket does not change state".into()));
    }
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if returns(d, mid, profile, eps)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(HomoclinicReport {
        epsilon: eps,
        alpha_plus: s.alpha_plus_ref,
        lambda1: s.lambda1,
        rows,
        mu_star: 0.5 * (lo + hi),
    })
}

/// Slope of exterior transit time against `ln(1/delta)` for starts `delta` inside `W^s`.
/// A linear saddle predicts `1/lambda1`.
pub fn passage_time_slope(d: f64, deltas: &[f64]) -> Result<(f64, f64)> {
    let m = models::model("saddle-homoclinic", &[("d", d)])?;
    let s = m.saddle.unwrap();
    let ext = poincare::FlowExterior::new(m.system.x_plus.clone(), m.fold.x_f, m.y0);
    let pts: Vec<Result<(f64, f64)>> =
        deltas.par_iter().map(|&dl| Ok(((1.0 / dl).ln(), ext.transit(m.constants.x0_plus - dl)?.transit_time))).collect();
    let pts = pts.into_iter().collect::<Result<Vec<_>>>()?;
    let (slope, _, _) = linear_fit(&pts);
    Ok((slope, 1.0 / s.lambda1))
}

/// Hausdorff distance between the regularized orbit through `(x_star, y0)` and the sliding
/// cycle through the fold, measured from the points of either curve lying in `{y > eps}`.
pub fn upper_arc_distance(map: &ReturnMap, x_star: f64) -> Result<f64> {
    let (c, eps) = (&map.consts, map.r.epsilon);
    let opts = Options { h_max: 0.005, ..Options::default() };
    let back = Section::new("sigma_minus_y0", c.y0, Half::Neg).split_at(c.x_f).heading(Direction::Falling);
    let orbit = integrator::integrate(&map.r, [x_star, c.y0], Until::Section(back), &opts.clone().with_strip(eps))?;
    let land = Section::new("sigma", 0.0, Half::Neg).split_at(c.x_f).heading(Direction::Falling);
    let cycle = filippov_flow(&map.r.base, [c.x_f, 0.0], Until::Section(land), &opts)?;
    let a: Vec<[f64; 2]> = orbit.samples.iter().map(|p| [p.1, p.2]).collect();
    // Closing the arc back to the fold adds the sliding segment.
    let mut b: Vec<[f64; 2]> = cycle.samples.iter().map(|p| [p.1, p.2]).collect();
    b.push([c.x_f, 0.0]);
    let upper = |v: &[[f64; 2]]| -> Vec<[f64; 2]> { v.iter().copied().filter(|p| p[1] > eps).collect() };
    let (au, bu) = (upper(&a), upper(&b));
    if au.len() < 2 || bu.len() < 2 {
        return Err(Error::NoArrival("upper arc has too few samples".into()));
    }
    Ok(directed(&au, &b).max(directed(&bu, &a)))
}

fn seg_dist(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let l2 = dx * dx + dy * dy;
    let t = if l2 == 0.0 { 0.0 } else { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / l2).clamp(0.0, 1.0) };
    ((p[0] - a[0] - t * dx).powi(2) + (p[1] - a[1] - t * dy).powi(2)).sqrt()
}

/// Largest distance from a point of `a` to the polyline `b`.
fn directed(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    a.par_iter()
        .map(|&p| b.windows(2).map(|w| seg_dist(p, w[0], w[1])).fold(f64::INFINITY, f64::min))
        .reduce(|| 0.0, f64::max)
}

/// `(c alpha+, (pi+)'(x0-) alpha-)`, where `pi+ = P^e o P+` is the return map of `X+` alone.
pub fn delta_identity(map: &ReturnMap) -> Result<(f64, f64)> {
    let c = &map.consts;
    let xp = map.r.base.x_plus.as_ref();
    let h = 1e-5;
    let pi = |x: f64| -> Result<f64> { map.exterior.apply(poincare::plus_map(xp, c.x_f, c.y0, x)?) };
    let dpi = (pi(c.x0_minus + h)? - pi(c.x0_minus - h)?) / (2.0 * h);
    let slope = map.exterior.derivative(c.x0_plus)?;
    Ok((slope * c.alpha_plus, dpi * c.alpha_minus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularization::phi_linear;

    #[test]
    fn labels() {
        assert_eq!(classify(0.3), Stability::Attracting);
        assert_eq!(classify(-1.5), Stability::Repelling);
        assert_eq!(classify(1.0005), Stability::Neutral);
    }

    #[test]
    fn attracting_germ_below_grazing() {
        let m = models::model("grazing-family", &[("mu", -0.002)]).unwrap();
        let map = ReturnMap::new(&m, phi_linear(), 1e-3).unwrap();
        let out = find_periodic_orbit(&map, map.window(), default_start(&map)).unwrap();
        let p = out.fixed_point().unwrap();
        assert!(p.residual <= 1e-8 && p.stability == Stability::Attracting);
        // x* = x0- + gamma + c (P_eps(x*) - x0+) with P_eps ~ x0+ - eps.
        assert!((p.x - (-0.5 - 0.002 + 0.5e-3)).abs() < 1e-5, "{}", p.x);
    }

    #[test]
    fn repelling_germ_absent_when_gamma_positive() {
        let m = models::model("grazing-family", &[("mu", -0.002), ("repelling", 1.0)]).unwrap();
        let map = ReturnMap::new(&m, phi_linear(), 1e-3).unwrap();
        let out = find_periodic_orbit(&map, map.window(), default_start(&map)).unwrap();
        assert_eq!(out, Outcome::Absent(Absence::NoFixedPoint));
    }

    #[test]
    fn delta_identity_on_germ() {
        let m = models::model("grazing-family", &[]).unwrap();
        let map = ReturnMap::new(&m, phi_linear(), 1e-3).unwrap();
        let (a, b) = delta_identity(&map).unwrap();
        assert!((a - b).abs() <= 0.05 * a.abs());
    }
}
