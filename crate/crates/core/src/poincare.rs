//! The fold Poincaré map `P_eps` from `{y = y0, x < x_f}` to `{y = y0, x > x_f}`,
//! its pieces, the exterior return map and exponent fits of the landing laws.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{FnField, PlanarField, SharedField};
use crate::integrator::{self, fmt17, Direction, EventKind, Flag, Half, Options, PoincareResult, Section, Until};
use crate::regularization::{RegularizationProfile, RegularizedSystem};

/// Least-squares line through `(x, y)` points: `(slope, intercept, r_squared)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

/// Landing constants of the fold's pseudo-separatrices on `y = y0`:
/// orbits of `X+` through `(x_f + x, y)` land at `x0 + alpha y + beta x^2 + ...`.
/// The `plus` constants belong to the forward flow, the `minus` ones to the backward flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangencyConstants {
    pub x_f: f64,
    pub y0: f64,
    pub x0_minus: f64,
    pub x0_plus: f64,
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    pub beta_minus: f64,
    pub beta_plus: f64,
}

impl TangencyConstants {
    /// Closed form for `X+ = (1, 2x)`: orbits are `y - x^2 = const`.
    pub fn normal_form(y0: f64) -> Self {
        let s = y0.sqrt();
        TangencyConstants {
            x_f: 0.0,
            y0,
            x0_minus: -s,
            x0_plus: s,
            alpha_minus: 0.5 / s,
            alpha_plus: -0.5 / s,
            beta_minus: -0.5 / s,
            beta_plus: 0.5 / s,
        }
    }

    /// Right end `x0- + alpha- eps + beta- eps^(2 lambda)` of the interval where the landing law holds.
    pub fn scaling_edge(&self, eps: f64, lambda: f64) -> f64 {
        self.x0_minus + self.alpha_minus * eps + self.beta_minus * eps.powf(2.0 * lambda)
    }

    pub fn signs_ok(&self) -> bool {
        self.alpha_plus < 0.0 && self.beta_plus > 0.0 && self.alpha_minus > 0.0 && self.beta_minus < 0.0
    }
}

fn reversed(field: &dyn PlanarField) -> FnField<impl Fn(f64, f64) -> [f64; 2] + Send + Sync + '_> {
    FnField::new(move |x, y| {
        let f = field.eval(x, y);
        [-f[0], -f[1]]
    })
}

fn tight() -> Options {
    Options { rtol: 1e-12, atol: 1e-14, ..Options::default() }.quiet()
}

fn land(field: &dyn PlanarField, start: [f64; 2], target: &Section, opts: &Options) -> Result<f64> {
    let tr = integrator::integrate(field, start, Until::Section(target.clone()), opts)?;
    match tr.events.last() {
        Some((_, EventKind::CrossSection(id), x, _)) if *id == target.id => Ok(*x),
        _ => Err(Error::NoArrival(format!("from ({}, {}) to {}", start[0], start[1], target.id))),
    }
}

/// Locate `x0+-` by flowing from the fold and fit `alpha+-`, `beta+-` by least squares.
pub fn fit_tangency_constants(xp: &dyn PlanarField, x_f: f64, y0: f64) -> Result<TangencyConstants> {
    let opts = tight().with_bounds_of(x_f, y0);
    let back = reversed(xp);
    let up = Section::new("sigma_plus_y0", y0, Half::Pos).split_at(x_f).heading(Direction::Rising);
    let up_back = Section::new("sigma_minus_y0", y0, Half::Neg).split_at(x_f).heading(Direction::Rising);
    let x0_plus = land(xp, [x_f, 0.0], &up, &opts)?;
    let x0_minus = land(&back, [x_f, 0.0], &up_back, &opts)?;
    for x0 in [x0_plus, x0_minus] {
        let f = xp.eval(x0, y0);
        if f[1].abs() <= 1e-8 * f[0].abs().max(1.0) {
            return Err(Error::TangentialCrossing(x0));
        }
    }
    let h = 0.02;
    let mut pts = Vec::new();
    for i in -4..=4 {
        for j in -2..=2 {
            pts.push((h * i as f64 / 4.0, h * h * j as f64 / 2.0));
        }
    }
    let basis = |x: f64, y: f64| [y, x * x, x * y, y * y, x * x * x, x * x * y, x.powi(4)];
    let fit = |field: &dyn PlanarField, target: &Section, x0: f64| -> Result<(f64, f64)> {
        let rows: Vec<Result<(f64, f64, f64)>> =
            pts.par_iter().map(|&(x, y)| land(field, [x_f + x, y], target, &opts).map(|l| (x, y, l - x0))).collect();
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        let a = DMatrix::from_fn(rows.len(), 7, |r, c| basis(rows[r].0, rows[r].1)[c]);
        let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.2));
        let sol = a.svd(true, true).solve(&b, 1e-14).map_err(|e| Error::NoArrival(e.to_string()))?;
        Ok((sol[0], sol[1]))
    };
    let (alpha_plus, beta_plus) = fit(xp, &up, x0_plus)?;
    let (alpha_minus, beta_minus) = fit(&back, &up_back, x0_minus)?;
    Ok(TangencyConstants { x_f, y0, x0_minus, x0_plus, alpha_minus, alpha_plus, beta_minus, beta_plus })
}

trait BoundsExt {
    fn with_bounds_of(self, x_f: f64, y0: f64) -> Self;
}

impl BoundsExt for Options {
    fn with_bounds_of(mut self, x_f: f64, y0: f64) -> Self {
        if self.bounds.is_none() {
            let r = 20.0 * (1.0 + y0.abs());
            self.bounds = Some([x_f - r, x_f + r, -r, r]);
        }
        self
    }
}

/// One transit `{y = y0, x < x_f}` to `{y = y0, x > x_f}` with its strip crossings.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldMapDecomposition {
    pub y0: f64,
    pub epsilon: f64,
    pub x_start: f64,
    /// Where the orbit first crossed `y = eps` downwards (the map `P`).
    pub x_enter: Option<f64>,
    /// Where it last crossed `y = eps` upwards (the map `P_mid`).
    pub x_exit: Option<f64>,
    pub result: PoincareResult,
}

/// Transit of the regularized field through the fold region, without domain checks.
pub fn fold_transit(r: &RegularizedSystem, x_f: f64, y0: f64, x: f64, opts: &Options) -> Result<FoldMapDecomposition> {
    let eps = r.epsilon;
    let from = Section::new("sigma_minus_y0", y0, Half::Neg).split_at(x_f);
    let to = Section::new("sigma_plus_y0", y0, Half::Pos).split_at(x_f).heading(Direction::Rising);
    if !from.contains_x(x) {
        return Err(Error::OutOfDomain(x));
    }
    let o = opts.clone().quiet().with_strip(eps).with_bounds_of(x_f, y0);
    let tr = integrator::integrate(r, [x, y0], Until::Section(to.clone()), &o)?;
    let (t_end, x_out) = match tr.events.last() {
        Some((t, EventKind::CrossSection(id), xo, _)) if *id == to.id => (*t, *xo),
        _ => return Err(Error::NoArrival(format!("fold transit from x = {x} did not reach {}", to.id))),
    };
    let top = |e: &&(f64, EventKind, f64, f64)| e.3 > 0.0;
    let x_enter = tr.events.iter().filter(top).find(|e| e.1 == EventKind::EnterStrip).map(|e| e.2);
    let x_exit = tr.events.iter().filter(top).filter(|e| e.1 == EventKind::ExitStrip).last().map(|e| e.2);
    let mut flags = vec![];
    if x_enter.is_none() {
        flags.push(Flag::MissedStrip);
    }
    let result = PoincareResult { x_out, transit_time: t_end, min_step: 0.0, steps: 0, flags };
    Ok(FoldMapDecomposition { y0, epsilon: eps, x_start: x, x_enter, x_exit, result })
}

/// Regularized fold map on the interval covered by the landing law.
///
/// Starts beyond `scaling_edge(eps, lambda)` are flagged; starts whose orbit misses
/// the strip altogether are rejected with `OutOfDomain` (there `P_eps` is just the flow of `X+`).
pub fn map_p_epsilon(r: &RegularizedSystem, consts: &TangencyConstants, x: f64, lambda: f64) -> Result<FoldMapDecomposition> {
    let mut d = fold_transit(r, consts.x_f, consts.y0, x, &Options::default())?;
    if d.result.flags.contains(&Flag::MissedStrip) {
        return Err(Error::OutOfDomain(x));
    }
    if x > consts.scaling_edge(r.epsilon, lambda) {
        d.result.flags.push(Flag::OutsideScalingInterval);
    }
    Ok(d)
}

/// The pieces `P`, `P_mid`, `P_bar` evaluated as separate section-to-section maps.
pub fn composed_pieces(r: &RegularizedSystem, consts: &TangencyConstants, x: f64, opts: &Options) -> Result<(f64, f64, f64)> {
    let (x_f, y0, eps) = (consts.x_f, consts.y0, r.epsilon);
    let o = opts.clone().with_bounds_of(x_f, y0);
    let s_from = Section::new("sigma_minus_y0", y0, Half::Neg).split_at(x_f);
    let s_in = Section::new("sigma_minus_eps", eps, Half::Neg).split_at(x_f).heading(Direction::Falling);
    let s_out = Section::new("sigma_plus_eps", eps, Half::Pos).split_at(x_f).heading(Direction::Rising);
    let s_to = Section::new("sigma_plus_y0", y0, Half::Pos).split_at(x_f).heading(Direction::Rising);
    let a = integrator::flow_map(r, &s_from, &s_in, x, &o)?.x_out;
    let b = integrator::flow_map(r, &s_in, &s_out, a, &o.clone().with_strip(eps))?.x_out;
    let c = integrator::flow_map(r, &s_out, &s_to, b, &o)?.x_out;
    Ok((a, b, c))
}

/// Map of `X+` alone from `{y = y0, x < x_f}` to `{y = y0, x > x_f}`, ignoring the switching line.
pub fn plus_map(xp: &dyn PlanarField, x_f: f64, y0: f64, x: f64) -> Result<f64> {
    let from = Section::new("sigma_minus_y0", y0, Half::Neg).split_at(x_f);
    let to = Section::new("sigma_plus_y0", y0, Half::Pos).split_at(x_f).heading(Direction::Rising);
    Ok(integrator::flow_map(xp, &from, &to, x, &tight().with_bounds_of(x_f, y0))?.x_out)
}

/// Start on `{y = y0, x < x_f}` of the `X+` orbit tangent to `y = eps`.
pub fn tangent_start(xp: &dyn PlanarField, x_f: f64, y0: f64, eps: f64) -> Result<f64> {
    // Tangency point of X+ with y = eps: bisection on X2+ near the fold.
    let g = |x: f64| xp.eval(x, eps)[1];
    let (mut lo, mut hi) = (x_f - 0.5, x_f + 0.5);
    if g(lo) * g(hi) > 0.0 {
        return Err(Error::NoSignChange(lo, hi));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (g(mid) < 0.0) == (g(lo) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x_eps = 0.5 * (lo + hi);
    let back = reversed(xp);
    let target = Section::new("sigma_minus_y0", y0, Half::Neg).split_at(x_f).heading(Direction::Rising);
    land(&back, [x_eps, eps], &target, &tight().with_bounds_of(x_f, y0))
}

/// Log-log fit `log|value| = slope log(eps) + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    pub epsilons: Vec<f64>,
    pub landings: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// The largest eps was dropped as outside the asymptotic regime.
    pub dropped_largest: bool,
}

pub fn fit_exponent(eps: &[f64], values: &[f64]) -> Result<ExponentFit> {
    let mut pairs: Vec<(f64, f64)> = eps.iter().zip(values).map(|(&e, &v)| (e, v)).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let logs = |p: &[(f64, f64)]| p.iter().map(|&(e, v)| (e.ln(), v.abs().ln())).collect::<Vec<_>>();
    let mut pts = logs(&pairs);
    let (mut s, mut i, mut r2) = linear_fit(&pts);
    let mut dropped = false;
    if pts.len() > 3 {
        let res: Vec<f64> = pts.iter().map(|&(a, b)| b - (s * a + i)).collect();
        let rms = (res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64).sqrt();
        if res.last().unwrap().abs() > 3.0 * rms {
            pairs.pop();
            pts = logs(&pairs);
            (s, i, r2) = linear_fit(&pts);
            dropped = true;
        }
    }
    if !(r2 >= 0.999) {
        return Err(Error::FitRejected(r2));
    }
    Ok(ExponentFit {
        epsilons: pairs.iter().map(|p| p.0).collect(),
        landings: pairs.iter().map(|p| p.1).collect(),
        slope: s,
        intercept: i,
        r_squared: r2,
        dropped_largest: dropped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub eps: f64,
    pub x_in: f64,
    pub x_exit: f64,
    pub x_out: f64,
    pub transit_time: f64,
}

pub fn write_scan_csv<W: Write>(rows: &[ScanRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "eps,x_in,x_out,transit_time")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", fmt17(r.eps), fmt17(r.x_in), fmt17(r.x_out), fmt17(r.transit_time))?;
    }
    Ok(())
}

/// Strip-exit abscissa and `y0`-deviation laws over a family of eps.
#[derive(Debug, Clone, PartialEq)]
pub struct LandingScan {
    pub rows: Vec<ScanRow>,
    /// `x_exit - x_f` against eps; slope `p/(2p-1)`.
    pub exit_fit: ExponentFit,
    /// `P_eps - x0+ - alpha+ eps` against eps; slope `2p/(2p-1)`.
    pub deviation_fit: ExponentFit,
}

pub fn landing_scan(
    base: &crate::fields::FilippovSystem,
    profile: &RegularizationProfile,
    consts: &TangencyConstants,
    eps_list: &[f64],
    probe_x: f64,
    opts: &Options,
) -> Result<LandingScan> {
    let lo = eps_list.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eps_list.iter().copied().fold(0.0, f64::max);
    if eps_list.len() < 5 || hi / lo < 99.99 {
        return Err(Error::BadParams("a landing scan needs at least 5 eps values spanning 2 decades".into()));
    }
    let r0 = RegularizedSystem::new(base.clone(), profile.clone(), hi);
    let rows: Vec<Result<ScanRow>> = eps_list
        .par_iter()
        .map(|&eps| {
            let r = r0.with_epsilon(eps);
            let d = fold_transit(&r, consts.x_f, consts.y0, probe_x, opts)?;
            let (x_in, x_exit) = match (d.x_enter, d.x_exit) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::OutOfDomain(probe_x)),
            };
            Ok(ScanRow { eps, x_in, x_exit, x_out: d.result.x_out, transit_time: d.result.transit_time })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let e: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let exit: Vec<f64> = rows.iter().map(|r| r.x_exit - consts.x_f).collect();
    let dev: Vec<f64> = rows.iter().map(|r| r.x_out - consts.x0_plus - consts.alpha_plus * r.eps).collect();
    Ok(LandingScan { exit_fit: fit_exponent(&e, &exit)?, deviation_fit: fit_exponent(&e, &dev)?, rows })
}

/// Return map of `X+` from `{y = y0, x > x_f}` back to `{y = y0, x < x_f}`.
pub trait ExteriorMap: Send + Sync {
    fn apply(&self, x: f64) -> Result<f64>;

    /// Slope by central differences.
    fn derivative(&self, x: f64) -> Result<f64> {
        let h = 1e-6 * x.abs().max(1.0);
        Ok((self.apply(x + h)? - self.apply(x - h)?) / (2.0 * h))
    }
}

/// Affine germ `x0- + gamma + c (x - x0+)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GermExterior {
    pub x0_minus: f64,
    pub x0_plus: f64,
    pub gamma: f64,
    pub c: f64,
}

impl ExteriorMap for GermExterior {
    fn apply(&self, x: f64) -> Result<f64> {
        Ok(self.x0_minus + self.gamma + self.c * (x - self.x0_plus))
    }

    fn derivative(&self, _x: f64) -> Result<f64> {
        Ok(self.c)
    }
}

/// Exterior map realized by integrating `X+`.
#[derive(Clone)]
pub struct FlowExterior {
    pub field: SharedField,
    pub x_f: f64,
    pub y0: f64,
    pub opts: Options,
}

impl FlowExterior {
    pub fn new(field: SharedField, x_f: f64, y0: f64) -> Self {
        let opts = Options { t_max: 1e3, ..tight() }.with_bounds_of(x_f, y0);
        FlowExterior { field, x_f, y0, opts }
    }

    pub fn transit(&self, x: f64) -> Result<PoincareResult> {
        let from = Section::new("sigma_plus_y0", self.y0, Half::Pos).split_at(self.x_f);
        let to = Section::new("sigma_minus_y0", self.y0, Half::Neg).split_at(self.x_f).heading(Direction::Falling);
        if !from.contains_x(x) {
            return Err(Error::OutOfDomain(x));
        }
        integrator::flow_map(self.field.as_ref(), &from, &to, x, &self.opts)
    }
}

impl ExteriorMap for FlowExterior {
    fn apply(&self, x: f64) -> Result<f64> {
        Ok(self.transit(x)?.x_out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExteriorResult {
    pub x_out: f64,
    pub transit_time: f64,
    pub c: f64,
}

pub fn exterior_map(xp: SharedField, x_f: f64, y0: f64, x: f64) -> Result<ExteriorResult> {
    let ext = FlowExterior::new(xp, x_f, y0);
    let r = ext.transit(x)?;
    Ok(ExteriorResult { x_out: r.x_out, transit_time: r.transit_time, c: ext.derivative(x)? })
}

pub type SharedExterior = Arc<dyn ExteriorMap>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{shared, FilippovSystem};
    use crate::regularization::phi_linear;

    fn normal_form() -> FilippovSystem {
        FilippovSystem::new(shared(|x, _| [1.0, 2.0 * x]), shared(|_, _| [0.0, 1.0]))
    }

    #[test]
    fn fit_recovers_closed_form() {
        let z = normal_form();
        let c = fit_tangency_constants(z.x_plus.as_ref(), 0.0, 0.25).unwrap();
        let k = TangencyConstants::normal_form(0.25);
        assert!((c.x0_plus - 0.5).abs() < 1e-10 && (c.x0_minus + 0.5).abs() < 1e-10);
        for (a, b) in [(c.alpha_plus, k.alpha_plus), (c.alpha_minus, k.alpha_minus), (c.beta_plus, k.beta_plus), (c.beta_minus, k.beta_minus)] {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
        assert!(c.signs_ok());
    }

    #[test]
    fn shifted_fold_same_constants() {
        let xp = shared(|x, _| [1.0, 2.0 * (x - 0.3)]);
        let c = fit_tangency_constants(xp.as_ref(), 0.3, 0.25).unwrap();
        assert!((c.x0_plus - 0.8).abs() < 1e-10);
        assert!((c.alpha_plus + 1.0).abs() < 1e-4 && (c.beta_plus - 1.0).abs() < 1e-4);
    }

    #[test]
    fn exponent_fit_of_power_law() {
        let e = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2];
        let v: Vec<f64> = e.iter().map(|x: &f64| 3.0 * x.powf(2.0 / 3.0)).collect();
        let f = fit_exponent(&e, &v).unwrap();
        assert!((f.slope - 2.0 / 3.0).abs() < 1e-12);
        assert!(matches!(fit_exponent(&e, &[1.0, 5.0, 0.1, 3.0, 0.01]), Err(Error::FitRejected(_))));
    }

    #[test]
    fn linear_profile_landing() {
        let r = RegularizedSystem::new(normal_form(), phi_linear(), 1e-3);
        let k = TangencyConstants::normal_form(0.25);
        let d = map_p_epsilon(&r, &k, -0.8, 0.45).unwrap();
        assert!((d.result.x_out - 0.499).abs() < 1e-5);
        assert!(d.result.flags.is_empty());
    }

    #[test]
    fn orbit_above_the_strip_is_out_of_domain() {
        let r = RegularizedSystem::new(normal_form(), phi_linear(), 1e-3);
        let k = TangencyConstants::normal_form(0.25);
        assert!(matches!(map_p_epsilon(&r, &k, -0.45, 0.45), Err(Error::OutOfDomain(_))));
        let d = fold_transit(&r, 0.0, 0.25, -0.45, &Options::default()).unwrap();
        assert!((d.result.x_out - 0.45).abs() < 1e-9);
    }

    #[test]
    fn germ_at_zero_gamma() {
        let g = GermExterior { x0_minus: -0.5, x0_plus: 0.5, gamma: 0.0, c: -0.5 };
        assert_eq!(g.apply(0.5).unwrap(), -0.5);
    }
}
