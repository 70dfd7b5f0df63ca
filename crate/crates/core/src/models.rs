//! Built-in models addressable by string id, each with facts checked against its fields at load.
//!
//! Friction models are stated in the fold frame `s = 1 - y`, so their switching line is
//! `s = 0` and the field that folds visibly is the one on `s > 0`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{shared, FilippovSystem, FnField, FoldPoint, PlanarField, SharedField, Visibility};
use crate::integrator::{self, Direction, EventKind, Half, Options, Reversed, Section, Until};
use crate::poincare::{self, FlowExterior, GermExterior, SharedExterior, TangencyConstants};
use crate::regularization::{RegularizationProfile, RegularizedSystem};

pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    pub doc: &'static str,
}

pub struct ModelInfo {
    pub id: &'static str,
    pub summary: &'static str,
    pub params: &'static [ParamSpec],
}

const Y0: ParamSpec = ParamSpec { name: "y0", default: 0.25, doc: "height of the transversal sections" };

static CATALOG: &[ModelInfo] = &[
    ModelInfo { id: "normal-fold", summary: "X+ = (1, 2x), X- = (0, 1)", params: &[Y0] },
    ModelInfo {
        id: "general-fold",
        summary: "X+ = (1 + a1 x + a2 y, 2x + b y + a3 x y), X- = (0, 1)",
        params: &[
            ParamSpec { name: "b", default: 0.5, doc: "linear y coefficient of X2+" },
            ParamSpec { name: "a1", default: 0.1, doc: "x coefficient of f1" },
            ParamSpec { name: "a2", default: 0.2, doc: "y coefficient of f1" },
            ParamSpec { name: "a3", default: 0.3, doc: "xy coefficient of f2" },
            Y0,
        ],
    },
    ModelInfo {
        id: "stribeck",
        summary: "slip system with Stribeck friction, fold frame s = 1 - y",
        params: &[
            ParamSpec { name: "fs", default: 1.0, doc: "static friction" },
            ParamSpec { name: "fd", default: 0.5, doc: "dynamic friction" },
            ParamSpec { name: "delta", default: 0.05, doc: "Stribeck decay rate" },
            Y0,
        ],
    },
    ModelInfo {
        id: "coulomb",
        summary: "slip system with Coulomb friction, fold frame s = 1 - y",
        params: &[ParamSpec { name: "fs", default: 1.0, doc: "static friction" }, Y0],
    },
    ModelInfo {
        id: "grazing-family",
        summary: "normal fold with affine exterior germ x0- + gamma + c (x - x0+)",
        params: &[
            ParamSpec { name: "mu", default: 0.0, doc: "unfolding parameter" },
            ParamSpec { name: "repelling", default: 0.0, doc: "0: gamma = mu, c = -0.5; 1: gamma = -mu, c = -2" },
            Y0,
        ],
    },
    ModelInfo {
        id: "grazing-family-ode",
        summary: "limit cycle of radius 1 centred at (0, 1 + mu), X- = (0, 1)",
        params: &[
            ParamSpec { name: "mu", default: 0.0, doc: "vertical offset of the cycle" },
            ParamSpec { name: "k", default: 1.0, doc: "radial attraction rate" },
            Y0,
        ],
    },
    ModelInfo {
        id: "saddle-homoclinic",
        summary: "X+ = (V'(y), x - d V'(y)) shifted so W^s touches y = -mu/alpha+, X- = (0, 1)",
        params: &[
            ParamSpec { name: "mu", default: 0.0, doc: "offset of the stable separatrix" },
            ParamSpec { name: "d", default: 0.1, doc: "damping; W^u leaves the loop for d > 0" },
            ParamSpec { name: "hamiltonian", default: 0.0, doc: "1 forces d = 0" },
            Y0,
        ],
    },
];

pub fn catalog() -> &'static [ModelInfo] {
    CATALOG
}

/// Placement of the model's coordinates in the physical plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub offset: f64,
    pub flip: bool,
}

impl Frame {
    pub const IDENTITY: Frame = Frame { offset: 0.0, flip: false };

    pub fn to_physical(&self, x: f64, y: f64) -> (f64, f64) {
        if self.flip {
            (x, self.offset - y)
        } else {
            (x, self.offset + y)
        }
    }
}

/// Saddle data of the homoclinic family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleData {
    pub x_h: f64,
    pub y_h: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// `alpha+` of the unshifted family, used to scale `mu`.
    pub alpha_plus_ref: f64,
    /// Height of the bottom of `W^s` above the switching line.
    pub stable_bottom: f64,
    pub d: f64,
}

pub struct ModelDescriptor {
    pub id: String,
    pub params: Vec<(String, f64)>,
    pub system: FilippovSystem,
    pub frame: Frame,
    pub fold: FoldPoint,
    pub y0: f64,
    pub constants: TangencyConstants,
    /// Constants came from a closed form rather than a fit.
    pub closed_form: bool,
    pub exterior: Option<SharedExterior>,
    pub saddle: Option<SaddleData>,
    pub facts: Vec<(String, String)>,
}

impl fmt::Debug for ModelDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelDescriptor")
            .field("id", &self.id)
            .field("params", &self.params)
            .field("fold", &self.fold)
            .field("constants", &self.constants)
            .finish_non_exhaustive()
    }
}

impl ModelDescriptor {
    pub fn param(&self, name: &str) -> f64 {
        self.params.iter().find(|p| p.0 == name).map(|p| p.1).unwrap_or(f64::NAN)
    }

    pub fn regularized(&self, profile: RegularizationProfile, eps: f64) -> RegularizedSystem {
        RegularizedSystem::new(self.system.clone(), profile, eps)
    }

    pub fn x_plus(&self) -> &SharedField {
        &self.system.x_plus
    }
}

fn resolve(info: &ModelInfo, given: &[(&str, f64)]) -> Result<Vec<(String, f64)>> {
    let mut vals: Vec<(String, f64)> = info.params.iter().map(|p| (p.name.to_string(), p.default)).collect();
    for &(k, v) in given {
        match vals.iter_mut().find(|p| p.0 == k) {
            Some(slot) => {
                if !v.is_finite() {
                    return Err(Error::BadParams(format!("{k} = {v} is not finite")));
                }
                slot.1 = v;
            }
            None => return Err(Error::BadParams(format!("model {} has no parameter `{k}`", info.id))),
        }
    }
    Ok(vals)
}

fn get(vals: &[(String, f64)], k: &str) -> f64 {
    vals.iter().find(|p| p.0 == k).map(|p| p.1).unwrap()
}

fn tight() -> Options {
    Options { rtol: 1e-12, atol: 1e-14, ..Options::default() }.quiet()
}

fn check(cond: bool, what: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::BadParams(what.into()))
    }
}

/// Build a model by id. Unknown ids and parameters are rejected, and every descriptor
/// re-derives its declared facts from the fields before being returned.
pub fn model(id: &str, params: &[(&str, f64)]) -> Result<ModelDescriptor> {
    let info = CATALOG.iter().find(|m| m.id == id).ok_or_else(|| Error::UnknownModel(id.to_string()))?;
    let vals = resolve(info, params)?;
    let y0 = get(&vals, "y0");
    check(y0 > 0.0, "y0 must be positive")?;
    match id {
        "normal-fold" => normal_fold(vals, y0),
        "general-fold" => general_fold(vals, y0),
        "stribeck" => stribeck(vals, y0),
        "coulomb" => coulomb(vals, y0),
        "grazing-family" => grazing_family(vals, y0),
        "grazing-family-ode" => grazing_ode(vals, y0),
        "saddle-homoclinic" => saddle_homoclinic(vals, y0),
        _ => unreachable!(),
    }
}

fn unit_minus() -> SharedField {
    shared(|_, _| [0.0, 1.0])
}

/// Locate the fold in `[a, b]` and insist it is visible with the residual small.
fn fold_in(system: &FilippovSystem, a: f64, b: f64) -> Result<FoldPoint> {
    let fold = system.find_fold(a, b)?;
    let f = system.x_plus.eval(fold.x_f, 0.0);
    check(f[1].abs() <= 1e-12 * f[0].abs().max(1.0), format!("fold residual {} too large", f[1]))?;
    check(fold.visibility == Visibility::Visible, "fold is not visible")?;
    check(system.x_minus.eval(fold.x_f, 0.0)[1] > 0.0, "X- does not point into y > 0 at the fold")?;
    Ok(fold)
}

fn descriptor(
    id: &str,
    params: Vec<(String, f64)>,
    system: FilippovSystem,
    fold: FoldPoint,
    y0: f64,
    closed: Option<TangencyConstants>,
) -> Result<ModelDescriptor> {
    let constants = match closed {
        Some(c) => c,
        None => poincare::fit_tangency_constants(system.x_plus.as_ref(), fold.x_f, y0)?,
    };
    check(constants.signs_ok(), "landing constants have the wrong signs for a visible fold")?;
    let facts = vec![
        ("fold".to_string(), format!("x_f = {:.12}, visible", fold.x_f)),
        ("sliding".to_string(), format!("x < {:.12}", fold.x_f)),
        ("x0-".to_string(), format!("{:.12}", constants.x0_minus)),
        ("x0+".to_string(), format!("{:.12}", constants.x0_plus)),
        ("alpha+-".to_string(), format!("{:.8}, {:.8}", constants.alpha_plus, constants.alpha_minus)),
        ("beta+-".to_string(), format!("{:.8}, {:.8}", constants.beta_plus, constants.beta_minus)),
    ];
    Ok(ModelDescriptor {
        id: id.to_string(),
        params,
        system,
        frame: Frame::IDENTITY,
        fold,
        y0,
        constants,
        closed_form: closed.is_some(),
        exterior: None,
        saddle: None,
        facts,
    })
}

fn normal_fold(vals: Vec<(String, f64)>, y0: f64) -> Result<ModelDescriptor> {
    let system = FilippovSystem::new(shared(|x, _| [1.0, 2.0 * x]), unit_minus());
    let fold = fold_in(&system, -1.0, 1.0)?;
    // Orbits of X+ are y - x^2 = const, so the plus map is x -> -x.
    for x in [-0.7, -0.6, -0.55] {
        let p = poincare::plus_map(system.x_plus.as_ref(), 0.0, y0, x)?;
        check((p + x).abs() <= 1e-9, format!("plus map at {x} gave {p}"))?;
    }
    descriptor("normal-fold", vals, system, fold, y0, Some(TangencyConstants::normal_form(y0)))
}

fn general_fold(vals: Vec<(String, f64)>, y0: f64) -> Result<ModelDescriptor> {
    let (b, a1, a2, a3) = (get(&vals, "b"), get(&vals, "a1"), get(&vals, "a2"), get(&vals, "a3"));
    let system = FilippovSystem::new(
        shared(move |x, y| [1.0 + a1 * x + a2 * y, 2.0 * x + b * y + a3 * x * y]),
        unit_minus(),
    );
    let fold = fold_in(&system, -1.0, 1.0)?;
    check(fold.x_f.abs() <= 1e-12, "general fold must sit at the origin")?;
    descriptor("general-fold", vals, system, fold, y0, None)
}

fn friction_frame(mut d: ModelDescriptor) -> ModelDescriptor {
    d.frame = Frame { offset: 1.0, flip: true };
    d.exterior = Some(Arc::new(FlowExterior::new(d.system.x_plus.clone(), d.fold.x_f, d.y0)));
    d
}

fn stribeck(vals: Vec<(String, f64)>, y0: f64) -> Result<ModelDescriptor> {
    let (fs, fd, delta) = (get(&vals, "fs"), get(&vals, "fd"), get(&vals, "delta"));
    check(fs > fd && fd > 0.0, "need fs > fd > 0")?;
    check(delta > 0.0 && delta < 1.0, "need 0 < delta < 1")?;
    let a = fs - fd;
    let system = FilippovSystem::new(
        shared(move |x, s| [1.0 - s, x - a / (1.0 + delta * s) - fd]),
        shared(move |x, s| [1.0 - s, x + a / (1.0 - delta * s) + fd]),
    );
    let fold = fold_in(&system, 0.0, 2.0 * fs)?;
    check((fold.x_f - fs).abs() <= 1e-12, "visible fold must be at x = fs")?;
    // The other field folds invisibly at -fs.
    let g = system.x_minus.eval(-fs, 0.0);
    check(g[1].abs() <= 1e-12, "X- fold is not at -fs")?;
    // Unstable focus of the sliding-side field.
    let xc = a / (1.0 + delta) + fd;
    let j = system.x_plus.jacobian(xc, 1.0);
    let (tr, det) = (j[0][0] + j[1][1], j[0][0] * j[1][1] - j[0][1] * j[1][0]);
    check(tr > 0.0 && tr * tr < 4.0 * det, "expected a repelling focus")?;
    // The pseudo-separatrix from the fold must come back inside the sliding segment.
    let tr_u = integrator::integrate(
        system.x_plus.as_ref(),
        [fs, 1e-12],
        Until::Section(Section::new("sigma", 0.0, Half::All).heading(Direction::Falling)),
        &Options { bounds: Some([-10.0, 10.0, -10.0, 10.0]), ..tight() },
    )?;
    let x_star = match tr_u.events.last() {
        Some((_, EventKind::CrossSection(_), x, _)) => *x,
        _ => return Err(Error::NoArrival("Stribeck pseudo-separatrix".into())),
    };
    check(x_star > -fs && x_star < fs, format!("pseudo-separatrix lands at {x_star}, outside the sliding segment"))?;
    let mut d = friction_frame(descriptor("stribeck", vals, system, fold, y0, None)?);
    d.facts.push(("invisible fold".into(), format!("({}, 1) physical", -fs)));
    d.facts.push(("visible fold".into(), format!("({fs}, 1) physical")));
    d.facts.push(("repelling focus".into(), format!("({xc:.12}, 0) physical, trace {tr:.6e}")));
    d.facts.push(("separatrix landing".into(), format!("x* = {x_star:.12}")));
    Ok(d)
}

/// First integral of the Coulomb slip field below the switching line (model frame).
pub fn coulomb_integral(fs: f64, x: f64, s: f64) -> f64 {
    (x - fs).powi(2) + (1.0 - s).powi(2)
}

fn coulomb(vals: Vec<(String, f64)>, y0: f64) -> Result<ModelDescriptor> {
    let fs = get(&vals, "fs");
    check(fs > 0.0, "need fs > 0")?;
    check(y0 < 1.0, "y0 must lie below the centre height 1")?;
    let system = FilippovSystem::new(shared(move |x, s| [1.0 - s, x - fs]), shared(move |x, s| [1.0 - s, x + fs]));
    let fold = fold_in(&system, 0.0, 2.0 * fs)?;
    for (x, s) in [(fs - 0.5, 0.3), (fs + 0.2, 0.6), (fs - 0.9, 0.9)] {
        let h0 = coulomb_integral(fs, x, s);
        let [xe, se] = integrator::solve(system.x_plus.as_ref(), 0.0, [x, s], Some(2.0), &[], &tight())?.y;
        check((coulomb_integral(fs, xe, se) - h0).abs() <= 1e-10, "first integral not conserved")?;
    }
    let mut d = friction_frame(descriptor("coulomb", vals, system, fold, y0, None)?);
    d.facts.push(("centre".into(), format!("({fs}, 0) physical; arcs below the switching line are circles")));
    d.facts.push(("visible fold".into(), format!("({fs}, 1) physical")));
    Ok(d)
}

fn grazing_family(vals: Vec<(String, f64)>, y0: f64) -> Result<ModelDescriptor> {
    let mu = get(&vals, "mu");
    let rep = get(&vals, "repelling");
    check(rep == 0.0 || rep == 1.0, "repelling must be 0 or 1")?;
    let mut d = normal_fold(vec![("y0".into(), y0)], y0)?;
    d.id = "grazing-family".into();
    d.params = vals;
    let k = d.constants;
    let (gamma, c) = if rep == 0.0 { (mu, -0.5) } else { (-mu, -2.0) };
    let germ = GermExterior { x0_minus: k.x0_minus, x0_plus: k.x0_plus, gamma, c };
    d.exterior = Some(Arc::new(germ));
    let delta = k.alpha_minus - c * k.alpha_plus;
    d.facts.push(("germ".into(), format!("gamma = {gamma}, c = {c}, Delta = {delta}")));
    Ok(d)
}

fn grazing_ode(vals: Vec<(String, f64)>, y0: f64) -> Result<ModelDescriptor> {
    let (mu, k) = (get(&vals, "mu"), get(&vals, "k"));
    check(k > 0.0, "need k > 0")?;
    check(mu.abs() < 0.2, "need |mu| < 0.2")?;
    let c = 1.0 + mu;
    let system = FilippovSystem::new(
        shared(move |x, y| {
            let w = y - c;
            let g = k * (1.0 - x * x - w * w);
            [-w + x * g, x + w * g]
        }),
        unit_minus(),
    );
    let fold = fold_in(&system, -0.5, 0.5)?;
    let mut d = descriptor("grazing-family-ode", vals, system, fold, y0, None)?;
    d.exterior = Some(Arc::new(FlowExterior::new(d.system.x_plus.clone(), fold.x_f, y0)));
    d.facts.push(("limit cycle".into(), format!("radius 1 about (0, {c}), attracting")));
    Ok(d)
}

fn v1(y: f64) -> f64 {
    (y - 1.0) * (y - 3.0) / 3.0
}


/// Unshifted saddle field `(V'(y), x - d V'(y))` with saddle at `(0, 3)` and focus at `(0, 1)`.
pub fn saddle_field(d: f64) -> impl Fn(f64, f64) -> [f64; 2] + Send + Sync + Copy {
    move |x, y| [v1(y), x - d * v1(y)]
}

/// Bottom `(x, y)` of the branch of `W^s(0, 3)` that arrives from `x > 0`.
fn stable_bottom(d: f64) -> Result<(f64, f64)> {
    let lam2 = -d / 3.0 - (d * d / 9.0 + 2.0 / 3.0).sqrt();
    let n = (4.0 / 9.0 + lam2 * lam2).sqrt();
    let start = [1e-8 * (2.0 / 3.0) / n, 3.0 + 1e-8 * lam2 / n];
    let f = FnField::new(saddle_field(d));
    let back = FnField::new(move |x: f64, y: f64| {
        let v = f.eval(x, y);
        [-v[0], -v[1]]
    });
    let tr = integrator::integrate(
        &back,
        start,
        Until::Predicate(Box::new(move |_, s: &[f64; 2]| s[0] - d * v1(s[1]))),
        &Options { bounds: Some([-10.0, 10.0, -10.0, 10.0]), t_max: 500.0, ..tight() },
    )?;
    match tr.events.last() {
        Some((_, EventKind::Stop, x, y)) => Ok((*x, *y)),
        _ => Err(Error::SaddleNotResolved("stable separatrix has no lowest point".into())),
    }
}

fn saddle_homoclinic(vals: Vec<(String, f64)>, y0: f64) -> Result<ModelDescriptor> {
    let mu = get(&vals, "mu");
    let ham = get(&vals, "hamiltonian");
    check(ham == 0.0 || ham == 1.0, "hamiltonian must be 0 or 1")?;
    let d = if ham == 1.0 { 0.0 } else { get(&vals, "d") };
    check((0.0..0.5).contains(&d), "need 0 <= d < 0.5")?;
    let (_, y_min) = stable_bottom(d)?;
    check(y_min > 0.0 && y_min < 1.0, format!("W^s bottom at y = {y_min} is not below the focus"))?;
    let base = saddle_field(d);
    // Reference constants with W^s tangent to the switching line.
    let ref_field = shared(move |x, y| base(x, y + y_min));
    let ref_fold = d * v1(y_min);
    let ref_consts = poincare::fit_tangency_constants(ref_field.as_ref(), ref_fold, y0)?;
    let alpha_ref = ref_consts.alpha_plus;
    let lift = y_min + mu / alpha_ref;
    let system = FilippovSystem::new(shared(move |x, y| base(x, y + lift)), unit_minus());
    let x_fold = d * v1(lift);
    let fold = fold_in(&system, x_fold - 0.5, x_fold + 0.5)?;
    let y_h = 3.0 - lift;
    let j = system.x_plus.jacobian(0.0, y_h);
    let (tr, det) = (j[0][0] + j[1][1], j[0][0] * j[1][1] - j[0][1] * j[1][0]);
    let disc = (tr * tr - 4.0 * det).sqrt();
    let (l1, l2) = (0.5 * (tr + disc), 0.5 * (tr - disc));
    let (e1, e2) = (-d / 3.0 + (d * d / 9.0 + 2.0 / 3.0).sqrt(), -d / 3.0 - (d * d / 9.0 + 2.0 / 3.0).sqrt());
    if !((l1 - e1).abs() <= 1e-8 && (l2 - e2).abs() <= 1e-8) {
        return Err(Error::SaddleNotResolved(format!("Jacobian eigenvalues {l1}, {l2} vs {e1}, {e2}")));
    }
    let mut desc = descriptor("saddle-homoclinic", vals, system, fold, y0, None)?;
    desc.exterior = Some(Arc::new(FlowExterior::new(desc.system.x_plus.clone(), fold.x_f, y0)));
    desc.saddle = Some(SaddleData {
        x_h: 0.0,
        y_h,
        lambda1: l1,
        lambda2: l2,
        alpha_plus_ref: alpha_ref,
        stable_bottom: -mu / alpha_ref,
        d,
    });
    desc.facts.push(("saddle".into(), format!("(0, {y_h:.12}), lambda = {l1:.12}, {l2:.12}")));
    desc.facts.push(("W^s bottom".into(), format!("y = {:.12}", -mu / alpha_ref)));
    desc.facts.push(("alpha+ (mu = 0)".into(), format!("{alpha_ref:.10}")));
    Ok(desc)
}

/// Result of straightening `X-` near a fold and rescaling to the normal form.
pub struct FlowboxReduction {
    /// `d/dx X2+` along the switching line at the fold, in flow-box coordinates.
    pub a: f64,
    /// `X1+` at the fold, in flow-box coordinates.
    pub c: f64,
    pub x_f: f64,
    /// Largest deviation of the transformed `X-` from `(0, 1)` on the check grid.
    pub minus_error: f64,
    pub system: FilippovSystem,
}

struct Straightened {
    x_minus: SharedField,
    x_plus: SharedField,
    x_f: f64,
}

impl Straightened {
    /// Point reached by flowing `X-` for time `t` from `(x_f + u, 0)`.
    fn psi(&self, u: f64, t: f64) -> [f64; 2] {
        if t == 0.0 {
            return [self.x_f + u, 0.0];
        }
        let opts = Options { rtol: 1e-13, atol: 1e-15, ..Options::default() }.quiet();
        let start = [self.x_f + u, 0.0];
        let run = if t > 0.0 {
            integrator::solve(self.x_minus.as_ref(), 0.0, start, Some(t), &[], &opts)
        } else {
            integrator::solve(&Reversed(self.x_minus.as_ref()), 0.0, start, Some(-t), &[], &opts)
        };
        run.map(|r| r.y).unwrap_or([f64::NAN, f64::NAN])
    }

    /// Pull a field at `psi(u, t)` back to flow-box coordinates.
    fn pull(&self, field: &dyn PlanarField, u: f64, t: f64) -> [f64; 2] {
        let h = 1e-5;
        let (pu, mu) = (self.psi(u + h, t), self.psi(u - h, t));
        let (pt, mt) = (self.psi(u, t + h), self.psi(u, t - h));
        let ju = [(pu[0] - mu[0]) / (2.0 * h), (pu[1] - mu[1]) / (2.0 * h)];
        let jt = [(pt[0] - mt[0]) / (2.0 * h), (pt[1] - mt[1]) / (2.0 * h)];
        let p = self.psi(u, t);
        let f = field.eval(p[0], p[1]);
        let det = ju[0] * jt[1] - jt[0] * ju[1];
        [(jt[1] * f[0] - jt[0] * f[1]) / det, (-ju[1] * f[0] + ju[0] * f[1]) / det]
    }
}

/// Straighten `X-` by time-to-section coordinates around the fold in `[a, b]`, then scale
/// and shift so that `X- = (0, 1)`, `X+ = (1, 2x) + ...` and `X2+(x, 0) = 2x`.
pub fn flowbox_reduce(z: &FilippovSystem, a: f64, b: f64) -> Result<FlowboxReduction> {
    let fold = z.find_fold(a, b)?;
    let m = z.x_minus.eval(fold.x_f, 0.0);
    if m[1] <= 1e-6 * m[0].abs().max(1.0) {
        return Err(Error::TransversalityLost(fold.x_f, m[1]));
    }
    let st = Arc::new(Straightened { x_minus: z.x_minus.clone(), x_plus: z.x_plus.clone(), x_f: fold.x_f });
    let mut minus_error: f64 = 0.0;
    for i in -2..=2 {
        for j in -2..=2 {
            let (u, t) = (0.05 * i as f64, 0.05 * j as f64);
            let w = st.pull(st.x_minus.as_ref(), u, t);
            minus_error = minus_error.max((w[0]).abs().max((w[1] - 1.0).abs()));
        }
    }
    if !(minus_error <= 1e-8) {
        return Err(Error::TransversalityLost(fold.x_f, minus_error));
    }
    let h = 1e-4;
    let g = |u: f64| st.pull(st.x_plus.as_ref(), u, 0.0)[1];
    let a_coef = (g(h) - g(-h)) / (2.0 * h);
    let c_coef = st.pull(st.x_plus.as_ref(), 0.0, 0.0)[0];
    if !(a_coef > 0.0 && c_coef > 0.0) {
        return Err(Error::BadParams(format!("fold not visible after straightening: a = {a_coef}, c = {c_coef}")));
    }
    let (sx, sy, st_) = (0.5 * a_coef, 0.5 * a_coef * c_coef, 0.5 * a_coef * c_coef);
    // Scaled field: x = sx u, y = sy t, time scaled by st_.
    let scaled = {
        let st = st.clone();
        move |x: f64, y: f64| {
            let w = st.pull(st.x_plus.as_ref(), x / sx, y / sy);
            [sx * w[0] / st_, sy * w[1] / st_]
        }
    };
    let scaled = Arc::new(scaled);
    // Shift x_hat = X2(x, 0)/2 so the new second component is exactly 2 x_hat on y = 0.
    let shift = {
        let f = scaled.clone();
        move |x: f64| 0.5 * f(x, 0.0)[1]
    };
    let shift = Arc::new(shift);
    let x_plus = {
        let f = scaled.clone();
        let k = shift.clone();
        shared(move |xh: f64, y: f64| {
            // Invert the shift by secant iteration; it is the identity to first order.
            let mut x = xh;
            let mut prev = (xh * 1.01 + 1e-6, k(xh * 1.01 + 1e-6) - xh);
            for _ in 0..30 {
                let r = k(x) - xh;
                if r.abs() <= 1e-14 {
                    break;
                }
                let slope = (r - prev.1) / (x - prev.0);
                prev = (x, r);
                x -= r / slope;
            }
            let dk = (k(x + 1e-5) - k(x - 1e-5)) / 2e-5;
            let w = f(x, y);
            [dk * w[0], w[1]]
        })
    };
    Ok(FlowboxReduction {
        a: a_coef,
        c: c_coef,
        x_f: fold.x_f,
        minus_error,
        system: FilippovSystem::new(x_plus, unit_minus()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_ids_build() {
        for m in catalog() {
            let d = model(m.id, &[]).unwrap_or_else(|e| panic!("{}: {e}", m.id));
            assert!(!d.facts.is_empty());
        }
    }

    #[test]
    fn unknown_inputs() {
        assert!(matches!(model("pendulum", &[]), Err(Error::UnknownModel(_))));
        assert!(matches!(model("coulomb", &[("fd", 0.3)]), Err(Error::BadParams(_))));
        assert!(matches!(model("stribeck", &[("fd", 2.0)]), Err(Error::BadParams(_))));
    }

    #[test]
    fn saddle_eigenvalues_closed_form() {
        let m = model("saddle-homoclinic", &[("d", 0.2)]).unwrap();
        let s = m.saddle.unwrap();
        // lambda^2 + (2d/3) lambda - 2/3 = 0
        for l in [s.lambda1, s.lambda2] {
            assert!((l * l + 0.4 / 3.0 * l - 2.0 / 3.0).abs() < 1e-8);
        }
        assert!(s.lambda1 > 0.0 && s.lambda2 < 0.0);
    }

    #[test]
    fn hamiltonian_loop_touches_line() {
        let (_, y) = stable_bottom(0.0).unwrap();
        assert!(y.abs() < 1e-6, "{y}");
    }
}
