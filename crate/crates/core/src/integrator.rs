//! Adaptive Dormand–Prince 5(4) integration with dense output and event location.
//!
//! The core stepper is generic over the state dimension so the same code drives
//! planar flows, variational systems and the sliding phase of Filippov flows.
//! Planar helpers (`integrate`, `flow_map`) sit on top.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::fields::PlanarField;

/// Right-hand side of an autonomous or non-autonomous ODE in `N` dimensions.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N];
}

/// Any planar field is a 2D ODE.
impl<F: PlanarField + ?Sized> OdeSystem<2> for F {
    fn rhs(&self, _t: f64, y: &[f64; 2]) -> [f64; 2] {
        self.eval(y[0], y[1])
    }
}

/// Time-reversed view of a system, for backward integration.
pub struct Reversed<'a, S: ?Sized>(pub &'a S);

impl<'a, const N: usize, S: OdeSystem<N> + ?Sized> OdeSystem<N> for Reversed<'a, S> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N] {
        let mut f = self.0.rhs(-t, y);
        for v in f.iter_mut() {
            *v = -*v;
        }
        f
    }
}

/// Sign-change direction accepted by an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Any,
    Rising,
    Falling,
}

impl Direction {
    fn matches(self, ga: f64, gb: f64) -> bool {
        let rising = ga < 0.0 && gb >= 0.0;
        let falling = ga > 0.0 && gb <= 0.0;
        match self {
            Direction::Any => rising || falling,
            Direction::Rising => rising,
            Direction::Falling => falling,
        }
    }
}

/// Annotation attached to a located event.
#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    EnterStrip,
    ExitStrip,
    CrossSection(String),
    SlideStart,
    SlideEnd,
    FoldExit,
    Tangency,
    Stop,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKind::EnterStrip => write!(f, "enter_strip"),
            EventKind::ExitStrip => write!(f, "exit_strip"),
            EventKind::CrossSection(id) => write!(f, "cross_section({id})"),
            EventKind::SlideStart => write!(f, "slide_start"),
            EventKind::SlideEnd => write!(f, "slide_end"),
            EventKind::FoldExit => write!(f, "fold_exit"),
            EventKind::Tangency => write!(f, "tangency"),
            EventKind::Stop => write!(f, "stop"),
        }
    }
}

type EventFn<'a, const N: usize> = Box<dyn Fn(f64, &[f64; N]) -> f64 + 'a>;
type FilterFn<'a, const N: usize> = Box<dyn Fn(&[f64; N]) -> bool + 'a>;

/// A scalar event function `g(t, y)` whose zero crossings are located on dense output.
pub struct EventSpec<'a, const N: usize> {
    pub g: EventFn<'a, N>,
    pub direction: Direction,
    pub accept: Option<FilterFn<'a, N>>,
    pub terminal: bool,
    pub kind: EventKind,
}

impl<'a, const N: usize> EventSpec<'a, N> {
    pub fn new(g: impl Fn(f64, &[f64; N]) -> f64 + 'a, direction: Direction, kind: EventKind) -> Self {
        EventSpec { g: Box::new(g), direction, accept: None, terminal: false, kind }
    }

    pub fn terminal(mut self) -> Self {
        self.terminal = true;
        self
    }

    pub fn with_filter(mut self, accept: impl Fn(&[f64; N]) -> bool + 'a) -> Self {
        self.accept = Some(Box::new(accept));
        self
    }
}

/// Integrator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
    /// Half-width of the regularization strip around component 1; caps the step at eps/4 inside it.
    pub strip: Option<f64>,
    /// Keep every accepted step in the returned samples.
    pub record: bool,
    /// Box `[xmin, xmax, ymin, ymax]` on components 0 and 1; leaving it stops the run.
    pub bounds: Option<[f64; 4]>,
    /// Elapsed-time budget; exceeding it stops the run.
    pub t_max: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            rtol: 1e-10,
            atol: 1e-12,
            h_max: f64::INFINITY,
            max_steps: 10_000_000,
            strip: None,
            record: true,
            bounds: None,
            t_max: f64::INFINITY,
        }
    }
}

impl Options {
    pub fn with_strip(mut self, eps: f64) -> Self {
        self.strip = Some(eps);
        self
    }

    pub fn quiet(mut self) -> Self {
        self.record = false;
        self
    }
}

/// Why a run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Stop {
    Event(usize),
    Time,
    Bounds,
    TimeBudget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub kind: EventKind,
    pub index: usize,
}

/// Result of one call to [`solve`].
#[derive(Debug, Clone)]
pub struct Run<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub stop: Stop,
    pub samples: Vec<(f64, [f64; N])>,
    pub events: Vec<EventRecord<N>>,
    pub steps: usize,
    pub min_step: f64,
}

// Dormand–Prince coefficients.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Quartic dense-output polynomial over one accepted step.
struct Dense<const N: usize> {
    t0: f64,
    h: f64,
    r: [[f64; N]; 5],
}

impl<const N: usize> Dense<N> {
    fn eval(&self, theta: f64) -> [f64; N] {
        let th1 = 1.0 - theta;
        let mut out = [0.0; N];
        for i in 0..N {
            let r = &self.r;
            out[i] = r[0][i] + theta * (r[1][i] + th1 * (r[2][i] + theta * (r[3][i] + th1 * r[4][i])));
        }
        out
    }

    fn t_at(&self, theta: f64) -> f64 {
        self.t0 + theta * self.h
    }
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        out[i] += h * s;
    }
    out
}

fn initial_step<const N: usize, S: OdeSystem<N> + ?Sized>(
    sys: &S,
    t: f64,
    y: &[f64; N],
    f0: &[f64; N],
    opts: &Options,
) -> f64 {
    let sc = |i: usize| opts.atol + opts.rtol * y[i].abs();
    let d0 = (0..N).map(|i| (y[i] / sc(i)).powi(2)).sum::<f64>().sqrt() / (N as f64).sqrt();
    let d1 = (0..N).map(|i| (f0[i] / sc(i)).powi(2)).sum::<f64>().sqrt() / (N as f64).sqrt();
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(opts.h_max);
    let y1 = axpy(y, h0, &[(1.0, f0)]);
    let f1 = sys.rhs(t + h0, &y1);
    let d2 = (0..N).map(|i| ((f1[i] - f0[i]) / sc(i)).powi(2)).sum::<f64>().sqrt() / (N as f64).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(opts.h_max)
}

fn strip_cap<const N: usize>(eps: f64, y: &[f64; N], f: &[f64; N]) -> f64 {
    if N < 2 {
        return f64::INFINITY;
    }
    let (pos, vel) = (y[1], f[1]);
    if pos.abs() <= 2.0 * eps {
        eps / 4.0
    } else if pos * vel < 0.0 {
        (pos.abs() - eps) / vel.abs() + eps / 4.0
    } else {
        f64::INFINITY
    }
}

fn out_of_bounds<const N: usize>(b: &Option<[f64; 4]>, y: &[f64; N]) -> bool {
    match b {
        Some(b) if N >= 2 => !(y[0] >= b[0] && y[0] <= b[1] && y[1] >= b[2] && y[1] <= b[3]),
        _ => false,
    }
}

/// Locate a root of `g` on the dense output inside `[ta, tb]` (in units of theta).
fn locate<const N: usize>(
    dense: &Dense<N>,
    spec: &EventSpec<'_, N>,
    mut ta: f64,
    mut tb: f64,
    mut ga: f64,
    mut gb: f64,
) -> f64 {
    for _ in 0..200 {
        if (tb - ta) <= 4.0 * f64::EPSILON * tb.abs().max(1.0) {
            break;
        }
        let tm = 0.5 * (ta + tb);
        let gm = (spec.g)(dense.t_at(tm), &dense.eval(tm));
        if gm == 0.0 {
            return tm;
        }
        if (ga < 0.0) == (gm < 0.0) {
            ta = tm;
            ga = gm;
        } else {
            tb = tm;
            gb = gm;
        }
    }
    // Secant polish inside the final bracket.
    if gb != ga {
        let ts = ta - ga * (tb - ta) / (gb - ga);
        if ts >= ta && ts <= tb {
            let gs = (spec.g)(dense.t_at(ts), &dense.eval(ts));
            if gs.abs() < ga.abs().min(gb.abs()) {
                return ts;
            }
        }
    }
    if ga.abs() < gb.abs() {
        ta
    } else {
        tb
    }
}

/// Integrate `sys` from `(t0, y0)` until `t_end`, a terminal event, the box or the time budget.
pub fn solve<const N: usize, S: OdeSystem<N> + ?Sized>(
    sys: &S,
    t0: f64,
    y0: [f64; N],
    t_end: Option<f64>,
    events: &[EventSpec<'_, N>],
    opts: &Options,
) -> Result<Run<N>> {
    let mut t = t0;
    let mut y = y0;
    let mut k1 = sys.rhs(t, &y);
    let mut samples = Vec::new();
    if opts.record {
        samples.push((t, y));
    }
    let mut records = Vec::new();
    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.g)(t, &y)).collect();
    let mut h = initial_step(sys, t, &y, &k1, opts);
    let mut steps = 0usize;
    let mut min_step = f64::INFINITY;
    let mut rejected = false;

    if let Some(te) = t_end {
        if te <= t0 {
            return Ok(Run { t, y, stop: Stop::Time, samples, events: records, steps, min_step: 0.0 });
        }
    }

    loop {
        if steps >= opts.max_steps {
            return Err(Error::StepLimitExceeded(opts.max_steps));
        }
        h = h.min(opts.h_max);
        if let Some(eps) = opts.strip {
            h = h.min(strip_cap(eps, &y, &k1));
        }
        let mut last = false;
        if let Some(te) = t_end {
            if t + h >= te - 1e-14 * te.abs().max(1.0) {
                h = te - t;
                last = true;
            }
        }
        if h <= 1e-15 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow(t));
        }

        let k2 = sys.rhs(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = sys.rhs(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = sys.rhs(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = sys.rhs(t + C5 * h, &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = sys.rhs(t + h, &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y_new = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = sys.rhs(t + h, &y_new);

        let mut err = 0.0;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sc).powi(2);
        }
        err = (err / N as f64).sqrt();

        if !err.is_finite() || err > 1.0 {
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).max(0.2) } else { 0.2 };
            h *= fac;
            rejected = true;
            continue;
        }

        steps += 1;
        min_step = min_step.min(h);
        let mut r = [[0.0; N]; 5];
        for i in 0..N {
            let ydiff = y_new[i] - y[i];
            let bspl = h * k1[i] - ydiff;
            r[0][i] = y[i];
            r[1][i] = ydiff;
            r[2][i] = bspl;
            r[3][i] = ydiff - h * k7[i] - bspl;
            r[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        let dense = Dense { t0: t, h, r };

        // Candidate roots of every event in this step.
        let mut hits: Vec<(f64, usize)> = Vec::new();
        let mut g_new = Vec::with_capacity(events.len());
        for (idx, spec) in events.iter().enumerate() {
            let gb_end = (spec.g)(t + h, &y_new);
            g_new.push(gb_end);
            let probes: &[f64] = if spec.terminal { &[1.0 / 3.0, 2.0 / 3.0, 1.0] } else { &[1.0] };
            let mut ta = 0.0;
            let mut ga = g_prev[idx];
            for &tb in probes {
                let gb = if tb == 1.0 { gb_end } else { (spec.g)(dense.t_at(tb), &dense.eval(tb)) };
                if spec.direction.matches(ga, gb) {
                    let th = locate(&dense, spec, ta, tb, ga, gb);
                    let ok = spec.accept.as_ref().map_or(true, |f| f(&dense.eval(th)));
                    if ok {
                        hits.push((th, idx));
                        break;
                    }
                }
                ta = tb;
                ga = gb;
            }
        }
        hits.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for (th, idx) in hits {
            let te = dense.t_at(th);
            let ye = dense.eval(th);
            records.push(EventRecord { t: te, y: ye, kind: events[idx].kind.clone(), index: idx });
            if events[idx].terminal {
                if opts.record {
                    samples.push((te, ye));
                }
                return Ok(Run { t: te, y: ye, stop: Stop::Event(idx), samples, events: records, steps, min_step });
            }
        }

        t += h;
        y = y_new;
        k1 = k7;
        g_prev = g_new;
        if opts.record {
            samples.push((t, y));
        }
        if last {
            return Ok(Run { t, y, stop: Stop::Time, samples, events: records, steps, min_step });
        }
        if out_of_bounds(&opts.bounds, &y) {
            return Ok(Run { t, y, stop: Stop::Bounds, samples, events: records, steps, min_step });
        }
        if t - t0 > opts.t_max {
            return Ok(Run { t, y, stop: Stop::TimeBudget, samples, events: records, steps, min_step });
        }

        let mut fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
        if rejected {
            fac = fac.min(1.0);
        }
        rejected = false;
        h *= fac;
    }
}

/// Which side of the split abscissa a section accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Half {
    Neg,
    Pos,
    All,
}

/// Horizontal section `y = y0`, optionally restricted to one side of `x = split`.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub y0: f64,
    pub half: Half,
    pub split: f64,
    pub direction: Direction,
    pub id: String,
}

impl Section {
    pub fn new(id: &str, y0: f64, half: Half) -> Self {
        Section { y0, half, split: 0.0, direction: Direction::Any, id: id.to_string() }
    }

    pub fn split_at(mut self, split: f64) -> Self {
        self.split = split;
        self
    }

    pub fn heading(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn contains_x(&self, x: f64) -> bool {
        match self.half {
            Half::Neg => x < self.split,
            Half::Pos => x > self.split,
            Half::All => true,
        }
    }

    /// Terminal event spec for this section in the planar phase space.
    pub fn event<'a>(&'a self) -> EventSpec<'a, 2> {
        let y0 = self.y0;
        EventSpec::new(move |_, s: &[f64; 2]| s[1] - y0, self.direction, EventKind::CrossSection(self.id.clone()))
            .with_filter(move |s| self.contains_x(s[0]))
            .terminal()
    }
}

/// Stop condition for planar integration.
pub enum Until<'a> {
    Section(Section),
    Time(f64),
    /// Stop at the first zero crossing of the scalar function.
    Predicate(Box<dyn Fn(f64, &[f64; 2]) -> f64 + 'a>),
}

/// Planar trajectory with event annotations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<(f64, f64, f64)>,
    pub events: Vec<(f64, EventKind, f64, f64)>,
}

impl Trajectory {
    pub fn last(&self) -> Option<(f64, f64, f64)> {
        self.samples.last().copied()
    }

    /// Append another trajectory whose first sample repeats our last one.
    pub fn extend_from(&mut self, other: Trajectory) {
        let skip = usize::from(!self.samples.is_empty() && !other.samples.is_empty());
        self.samples.extend(other.samples.into_iter().skip(skip));
        self.events.extend(other.events);
    }

    /// Write `t,x,y,event` rows; event rows repeat the located state.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x,y,event")?;
        let mut ev = self.events.iter().peekable();
        for &(t, x, y) in &self.samples {
            while let Some((te, kind, xe, ye)) = ev.peek() {
                if *te <= t {
                    writeln!(w, "{},{},{},{}", fmt17(*te), fmt17(*xe), fmt17(*ye), kind)?;
                    ev.next();
                } else {
                    break;
                }
            }
            writeln!(w, "{},{},{},", fmt17(t), fmt17(x), fmt17(y))?;
        }
        for (te, kind, xe, ye) in ev {
            writeln!(w, "{},{},{},{}", fmt17(*te), fmt17(*xe), fmt17(*ye), kind)?;
        }
        Ok(())
    }
}

/// Format a float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{:.16e}", v)
}

fn strip_events<'a>(eps: f64) -> Vec<EventSpec<'a, 2>> {
    vec![
        EventSpec::new(move |_, s: &[f64; 2]| s[1] - eps, Direction::Falling, EventKind::EnterStrip),
        EventSpec::new(move |_, s: &[f64; 2]| s[1] - eps, Direction::Rising, EventKind::ExitStrip),
        EventSpec::new(move |_, s: &[f64; 2]| s[1] + eps, Direction::Rising, EventKind::EnterStrip),
        EventSpec::new(move |_, s: &[f64; 2]| s[1] + eps, Direction::Falling, EventKind::ExitStrip),
    ]
}

fn to_trajectory(run: &Run<2>) -> Trajectory {
    Trajectory {
        samples: run.samples.iter().map(|&(t, s)| (t, s[0], s[1])).collect(),
        events: run.events.iter().map(|e| (e.t, e.kind.clone(), e.y[0], e.y[1])).collect(),
    }
}

/// Integrate a planar field from `start` until the stop condition holds.
pub fn integrate(field: &dyn PlanarField, start: [f64; 2], until: Until<'_>, opts: &Options) -> Result<Trajectory> {
    let (run, _) = integrate_run(field, start, until, opts)?;
    Ok(to_trajectory(&run))
}

fn integrate_run(
    field: &dyn PlanarField,
    start: [f64; 2],
    until: Until<'_>,
    opts: &Options,
) -> Result<(Run<2>, bool)> {
    if !(start[0].is_finite() && start[1].is_finite()) {
        return Err(Error::EventNotBracketed("non-finite start".into()));
    }
    let section;
    let mut events: Vec<EventSpec<'_, 2>> = opts.strip.map(strip_events).unwrap_or_default();
    let mut t_end = None;
    match until {
        Until::Section(s) => {
            let f = field.eval(start[0], start[1]);
            if start[1] == s.y0 && f[1] == 0.0 {
                return Err(Error::EventNotBracketed(format!("start on section {} with zero normal velocity", s.id)));
            }
            section = s;
            events.push(section.event());
        }
        Until::Time(t) => t_end = Some(t),
        Until::Predicate(g) => {
            events.push(EventSpec { g: Box::new(move |t, s| g(t, s)), direction: Direction::Any, accept: None, terminal: true, kind: EventKind::Stop });
        }
    }
    let run = solve(field, 0.0, start, t_end, &events, opts)?;
    let hit = matches!(run.stop, Stop::Event(_));
    Ok((run, hit))
}

/// Diagnostic flags attached to a section-to-section map evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flag {
    /// The orbit never entered the regularization strip.
    MissedStrip,
    /// The start lies outside the interval where the landing law holds.
    OutsideScalingInterval,
}

/// One application of a section-to-section map.
#[derive(Debug, Clone, PartialEq)]
pub struct PoincareResult {
    pub x_out: f64,
    pub transit_time: f64,
    pub min_step: f64,
    pub steps: usize,
    pub flags: Vec<Flag>,
}

/// Transport `x` on `from` along the field until it reaches `to`.
pub fn flow_map(field: &dyn PlanarField, from: &Section, to: &Section, x: f64, opts: &Options) -> Result<PoincareResult> {
    if from == to {
        return Ok(PoincareResult { x_out: x, transit_time: 0.0, min_step: 0.0, steps: 0, flags: vec![] });
    }
    let (run, hit) = integrate_run(field, [x, from.y0], Until::Section(to.clone()), &opts.clone().quiet())?;
    if !hit {
        return Err(Error::NoArrival(format!("from x = {x} on {}: stopped by {:?} at ({}, {})", from.id, run.stop, run.y[0], run.y[1])));
    }
    let mut flags = vec![];
    if opts.strip.is_some() && !run.events.iter().any(|e| e.kind == EventKind::EnterStrip) {
        flags.push(Flag::MissedStrip);
    }
    Ok(PoincareResult { x_out: run.y[0], transit_time: run.t, min_step: run.min_step, steps: run.steps, flags })
}
