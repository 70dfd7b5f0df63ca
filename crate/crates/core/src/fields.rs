//! Smooth planar fields, the Filippov pair across `y = 0`, region classification,
//! the sliding field, fold location and the Filippov flow.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::integrator::{self, Direction, EventKind, EventSpec, OdeSystem, Options, Stop, Trajectory, Until};

/// A smooth planar vector field.
pub trait PlanarField: Send + Sync {
    fn eval(&self, x: f64, y: f64) -> [f64; 2];

    /// Jacobian `[[dF1/dx, dF1/dy], [dF2/dx, dF2/dy]]`; central differences unless overridden.
    fn jacobian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let h = 1e-6 * 1f64.max(x.abs()).max(y.abs());
        let (fxp, fxm) = (self.eval(x + h, y), self.eval(x - h, y));
        let (fyp, fym) = (self.eval(x, y + h), self.eval(x, y - h));
        [
            [(fxp[0] - fxm[0]) / (2.0 * h), (fyp[0] - fym[0]) / (2.0 * h)],
            [(fxp[1] - fxm[1]) / (2.0 * h), (fyp[1] - fym[1]) / (2.0 * h)],
        ]
    }
}

/// Field backed by a closure.
pub struct FnField<F>(pub F);

impl<F: Fn(f64, f64) -> [f64; 2] + Send + Sync> FnField<F> {
    pub fn new(f: F) -> Self {
        FnField(f)
    }
}

impl<F: Fn(f64, f64) -> [f64; 2] + Send + Sync> PlanarField for FnField<F> {
    fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        (self.0)(x, y)
    }
}

pub type SharedField = Arc<dyn PlanarField>;

/// Wrap a closure as a shareable field.
pub fn shared(f: impl Fn(f64, f64) -> [f64; 2] + Send + Sync + 'static) -> SharedField {
    Arc::new(FnField(f))
}

/// Classification of a point of the switching line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionClass {
    Crossing,
    Sliding,
    Escaping,
    TangencyPlus,
    TangencyMinus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visibility {
    Visible,
    Invisible,
}

/// Tangency of `X+` with the switching line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldPoint {
    pub x_f: f64,
    pub visibility: Visibility,
    /// Sign of `X1+` at the fold.
    pub direction: f64,
}

/// The pair `(X+, X-)` with switching line `y = 0`.
#[derive(Clone)]
pub struct FilippovSystem {
    pub x_plus: SharedField,
    pub x_minus: SharedField,
}

impl FilippovSystem {
    pub fn new(x_plus: SharedField, x_minus: SharedField) -> Self {
        FilippovSystem { x_plus, x_minus }
    }

    /// Tangency tolerance scaled by the local field magnitude.
    pub fn tol_tangency(&self, x: f64) -> f64 {
        let p = self.x_plus.eval(x, 0.0);
        let m = self.x_minus.eval(x, 0.0);
        let scale = [1.0, p[0].abs(), p[1].abs(), m[0].abs(), m[1].abs()].into_iter().fold(0.0, f64::max);
        1e-10 * scale
    }

    pub fn classify_point(&self, x: f64) -> RegionClass {
        let a = self.x_plus.eval(x, 0.0)[1];
        let b = self.x_minus.eval(x, 0.0)[1];
        let tol = self.tol_tangency(x);
        if a.abs() <= tol {
            RegionClass::TangencyPlus
        } else if b.abs() <= tol {
            RegionClass::TangencyMinus
        } else if a < 0.0 && b > 0.0 {
            RegionClass::Sliding
        } else if a > 0.0 && b < 0.0 {
            RegionClass::Escaping
        } else {
            RegionClass::Crossing
        }
    }

    /// Filippov drift on the sliding region.
    pub fn sliding_field(&self, x: f64) -> Result<f64> {
        if self.classify_point(x) != RegionClass::Sliding {
            return Err(Error::NotSliding(x));
        }
        Ok(self.sliding_drift(x))
    }

    fn sliding_drift(&self, x: f64) -> f64 {
        let p = self.x_plus.eval(x, 0.0);
        let m = self.x_minus.eval(x, 0.0);
        (p[0] * m[1] - m[0] * p[1]) / (m[1] - p[1])
    }

    /// Locate the unique fold of `X+` inside `[a, b]`.
    pub fn find_fold(&self, a: f64, b: f64) -> Result<FoldPoint> {
        let g = |x: f64| self.x_plus.eval(x, 0.0)[1];
        let n = 1000;
        let mut brackets = Vec::new();
        let mut prev = (a, g(a));
        for i in 1..=n {
            let x = a + (b - a) * i as f64 / n as f64;
            let gx = g(x);
            if prev.1 == 0.0 {
                brackets.push((prev.0, prev.0));
            } else if (prev.1 < 0.0) != (gx < 0.0) && gx != 0.0 {
                brackets.push((prev.0, x));
            }
            prev = (x, gx);
        }
        if prev.1 == 0.0 {
            brackets.push((b, b));
        }
        match brackets.len() {
            0 => return Err(Error::NoSignChange(a, b)),
            1 => {}
            _ => return Err(Error::MultipleRoots(a, b)),
        }
        let (mut lo, mut hi) = brackets[0];
        let mut glo = g(lo);
        while hi - lo > 1e-15 * hi.abs().max(1.0) {
            let mid = 0.5 * (lo + hi);
            let gm = g(mid);
            if gm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if (gm < 0.0) == (glo < 0.0) {
                lo = mid;
                glo = gm;
            } else {
                hi = mid;
            }
        }
        let x_f = 0.5 * (lo + hi);
        let d = self.x_plus.jacobian(x_f, 0.0)[1][0];
        let x1 = self.x_plus.eval(x_f, 0.0)[0];
        let visibility = if d * x1 > 0.0 { Visibility::Visible } else { Visibility::Invisible };
        Ok(FoldPoint { x_f, visibility, direction: x1.signum() })
    }
}

struct Slide<'a>(&'a FilippovSystem);

impl OdeSystem<2> for Slide<'_> {
    fn rhs(&self, _t: f64, s: &[f64; 2]) -> [f64; 2] {
        [self.0.sliding_drift(s[0]), 0.0]
    }
}

enum Phase {
    Plus,
    Minus,
    Slide,
}

/// Flow of the Filippov system: concatenated X+/X- arcs, sliding segments and fold exits.
pub fn filippov_flow(z: &FilippovSystem, start: [f64; 2], stop: Until<'_>, opts: &Options) -> Result<Trajectory> {
    if start[1] == 0.0 && z.classify_point(start[0]) == RegionClass::Escaping {
        return Err(Error::EscapeRegion(start[0]));
    }
    let touch = 1e-9;
    let mut out = Trajectory::default();
    let mut t0 = 0.0;
    let mut s = start;
    let mut steps = 0usize;
    let mut from_sigma = start[1] == 0.0;

    for _ in 0..10_000 {
        let phase = if s[1] > 0.0 {
            Phase::Plus
        } else if s[1] < 0.0 {
            Phase::Minus
        } else {
            match z.classify_point(s[0]) {
                RegionClass::Sliding => Phase::Slide,
                RegionClass::Escaping => return Err(Error::EscapeRegion(s[0])),
                RegionClass::Crossing => {
                    if z.x_plus.eval(s[0], 0.0)[1] > 0.0 {
                        Phase::Plus
                    } else {
                        Phase::Minus
                    }
                }
                RegionClass::TangencyPlus => {
                    if z.x_minus.eval(s[0], 0.0)[1] > 0.0 {
                        out.events.push((t0, EventKind::FoldExit, s[0], 0.0));
                        Phase::Plus
                    } else {
                        Phase::Minus
                    }
                }
                RegionClass::TangencyMinus => Phase::Plus,
            }
        };

        let mut events: Vec<EventSpec<'_, 2>> = Vec::new();
        let mut t_end = None;
        match &stop {
            Until::Section(sec) => {
                if !matches!(phase, Phase::Slide) || sec.y0 == 0.0 {
                    events.push(sec.event());
                }
            }
            Until::Time(t) => t_end = Some(t - t0),
            Until::Predicate(g) => {
                let g = g.as_ref();
                events.push(
                    EventSpec::new(move |t, y: &[f64; 2]| g(t + t0, y), Direction::Any, EventKind::Stop).terminal(),
                );
            }
        }
        let n_user = events.len();
        let mut local_opts = opts.clone();
        local_opts.max_steps = opts.max_steps.saturating_sub(steps);
        local_opts.t_max = opts.t_max - t0;

        let run = match phase {
            Phase::Plus | Phase::Minus => {
                let (field, dir) = match phase {
                    Phase::Plus => (&z.x_plus, Direction::Falling),
                    _ => (&z.x_minus, Direction::Rising),
                };
                events.push(EventSpec::new(|_, y: &[f64; 2]| y[1], dir, EventKind::CrossSection("sigma".into())).terminal());
                if matches!(phase, Phase::Plus) && !from_sigma {
                    let f = field.clone();
                    events.push(
                        EventSpec::new(move |_, y: &[f64; 2]| f.eval(y[0], y[1])[1], Direction::Rising, EventKind::Tangency)
                            .with_filter(move |y| y[1] <= touch)
                            .terminal(),
                    );
                }
                integrator::solve(field.as_ref(), 0.0, s, t_end, &events, &local_opts)?
            }
            Phase::Slide => {
                out.events.push((t0, EventKind::SlideStart, s[0], 0.0));
                let xp = z.x_plus.clone();
                let xm = z.x_minus.clone();
                events.push(EventSpec::new(move |_, y: &[f64; 2]| xp.eval(y[0], 0.0)[1], Direction::Rising, EventKind::SlideEnd).terminal());
                events.push(EventSpec::new(move |_, y: &[f64; 2]| xm.eval(y[0], 0.0)[1], Direction::Falling, EventKind::SlideEnd).terminal());
                let mut o = local_opts.clone();
                o.strip = None;
                integrator::solve(&Slide(z), 0.0, s, t_end, &events, &o)?
            }
        };
        steps += run.steps;
        let shifted = Trajectory {
            samples: run.samples.iter().map(|&(t, y)| (t + t0, y[0], y[1])).collect(),
            events: run
                .events
                .iter()
                .filter(|e| !matches!(&e.kind, EventKind::CrossSection(id) if id == "sigma"))
                .map(|e| (e.t + t0, e.kind.clone(), e.y[0], e.y[1]))
                .collect(),
        };
        out.extend_from(shifted);
        t0 += run.t;
        s = run.y;
        match run.stop {
            Stop::Event(i) if i < n_user => return Ok(out),
            Stop::Event(_) => {
                s[1] = 0.0;
                from_sigma = true;
            }
            Stop::Time => return Ok(out),
            Stop::Bounds | Stop::TimeBudget => return Ok(out),
        }
    }
    Err(Error::StepLimitExceeded(opts.max_steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{Half, Section};

    fn normal_form() -> FilippovSystem {
        FilippovSystem::new(shared(|x, _| [1.0, 2.0 * x]), shared(|_, _| [0.0, 1.0]))
    }

    #[test]
    fn classification_of_normal_form() {
        let z = normal_form();
        assert_eq!(z.classify_point(-0.3), RegionClass::Sliding);
        assert_eq!(z.classify_point(0.3), RegionClass::Crossing);
        assert_eq!(z.classify_point(0.0), RegionClass::TangencyPlus);
    }

    #[test]
    fn sliding_drift_values() {
        let z = normal_form();
        assert!((z.sliding_field(-0.25).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((z.sliding_field(-1e-9).unwrap() - 1.0).abs() < 1e-8);
        assert!(matches!(z.sliding_field(0.2), Err(Error::NotSliding(_))));
    }

    #[test]
    fn fold_of_normal_form() {
        let z = normal_form();
        let f = z.find_fold(-1.0, 1.0).unwrap();
        assert!(f.x_f.abs() < 1e-14);
        assert_eq!(f.visibility, Visibility::Visible);
        assert_eq!(f.direction, 1.0);
        assert!(matches!(z.find_fold(0.5, 1.0), Err(Error::NoSignChange(..))));
    }

    #[test]
    fn two_folds_are_reported() {
        let z = FilippovSystem::new(shared(|x, _| [1.0, x * x - 0.25]), shared(|_, _| [0.0, 1.0]));
        assert!(matches!(z.find_fold(-1.0, 1.0), Err(Error::MultipleRoots(..))));
    }

    #[test]
    fn jacobian_default_matches_analytic() {
        let f = FnField::new(|x: f64, y: f64| [x.sin() * y, x * x + y.exp()]);
        let j = f.jacobian(0.3, -0.2);
        let exact = [[0.3f64.cos() * -0.2, 0.3f64.sin()], [0.6, (-0.2f64).exp()]];
        for i in 0..2 {
            for k in 0..2 {
                assert!((j[i][k] - exact[i][k]).abs() <= 1e-5 * exact[i][k].abs().max(1e-3));
            }
        }
    }

    #[test]
    fn slide_then_fold_exit() {
        let z = normal_form();
        // Start below the sliding region so the orbit hits Sigma transversally at x = -0.5.
        let sec = Section::new("up", 0.25, Half::Pos);
        let tr = filippov_flow(&z, [-0.5, -0.3], Until::Section(sec), &Options::default()).unwrap();
        let (_, x, y) = tr.last().unwrap();
        assert!((x - 0.5).abs() < 1e-9, "x = {x}");
        assert!((y - 0.25).abs() < 1e-12);
        let kinds: Vec<_> = tr.events.iter().map(|e| e.1.clone()).collect();
        assert!(kinds.contains(&EventKind::SlideStart));
        assert!(kinds.contains(&EventKind::FoldExit));
    }

    #[test]
    fn x_plus_only_landing() {
        let xp = FnField::new(|x: f64, _y: f64| [1.0, 2.0 * x]);
        let sec = Section::new("sigma", 0.0, Half::Neg);
        let tr = integrator::integrate(&xp, [-0.8, 0.25], Until::Section(sec), &Options::default()).unwrap();
        assert!((tr.last().unwrap().1 + 0.39f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn escaping_start_rejected() {
        let z = FilippovSystem::new(shared(|_, _| [1.0, 1.0]), shared(|_, _| [0.0, -1.0]));
        assert!(matches!(
            filippov_flow(&z, [0.0, 0.0], Until::Time(1.0), &Options::default()),
            Err(Error::EscapeRegion(_))
        ));
    }
}
