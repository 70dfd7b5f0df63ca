mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, ExperimentConfig, Range};
use slidekick::bifurcation::{self, ReturnMap};
use slidekick::fields::filippov_flow;
use slidekick::inner_equation::{self, StepControl};
use slidekick::integrator::{fmt17, integrate, Options, Until};
use slidekick::models::{self, ModelDescriptor};
use slidekick::poincare;
use slidekick::regularization::{phi_polynomial, RegularizationProfile};
use slidekick::slow_manifold::{self, SandwichKind};
use slidekick::{acceptance, Error};

#[derive(Parser)]
#[command(name = "slidekick", version, about = "Regularized Filippov folds: maps, exponents, inner equation and bifurcations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// `key = value` file; flags given on the command line win.
    #[arg(long)]
    config: Option<String>,
    /// Write the effective configuration here before running.
    #[arg(long)]
    save_config: Option<String>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Model parameter, repeatable.
    #[arg(long = "param", value_name = "K=V")]
    params: Vec<String>,
    /// `linear` or `poly(p)`.
    #[arg(long)]
    profile: Option<String>,
    /// One value or a comma-separated list.
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    y0: Option<String>,
    #[arg(long)]
    rtol: Option<String>,
    #[arg(long)]
    atol: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one orbit, Filippov when no eps is given and regularized otherwise.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Initial point `x,y`.
        #[arg(long, allow_hyphen_values = true)]
        start: Option<String>,
        #[arg(long)]
        t_end: Option<String>,
    },
    /// Section-to-section fold map at the given probes.
    Poincare {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        probe: Option<String>,
    },
    /// Strip-exit and landing-deviation power laws over eps.
    Exponent {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        probe: Option<String>,
    },
    /// Distinguished solution of the inner equation.
    Inner {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        p: Option<String>,
        /// Left p-th derivative of the profile at 1; defaults to the polynomial profile's value.
        #[arg(long, allow_hyphen_values = true)]
        phi_p: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        u_start: Option<String>,
    },
    /// Attracting slow manifold of the normal form, with its confinement margins.
    Manifold {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        from_x: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        to_v: Option<String>,
    },
    /// Periodic orbits of the regularized return map over a parameter grid.
    Bifurcate {
        #[command(flatten)]
        common: Common,
        /// `grazing-attracting`, `grazing-repelling` or `homoclinic`.
        #[arg(long)]
        family: Option<String>,
        /// `start:stop:count`; for `homoclinic` these are multiples of eps.
        #[arg(long, allow_hyphen_values = true)]
        mu: Option<String>,
    },
    /// Periodic orbit of a friction oscillator (`stribeck` or `coulomb`).
    Friction {
        #[command(flatten)]
        common: Common,
    },
    /// Run the acceptance suite and print one line per criterion.
    Accept {
        #[command(flatten)]
        common: Common,
        /// Comma-separated criterion numbers.
        #[arg(long)]
        only: Option<String>,
    },
    /// Model catalog.
    Models {
        #[command(subcommand)]
        action: ModelsAction,
    },
}

#[derive(Subcommand)]
enum ModelsAction {
    /// Print every model with its parameters and verified facts.
    List,
}

enum Fail {
    Config(String),
    Numeric(String),
    /// The command ran but reported a negative result.
    Verdict,
}

impl From<ConfigError> for Fail {
    fn from(e: ConfigError) -> Self {
        Fail::Config(e.0)
    }
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownModel(_) | Error::BadParams(_) | Error::InvalidP(_) => Fail::Config(e.to_string()),
            e => Fail::Numeric(e.to_string()),
        }
    }
}

impl From<io::Error> for Fail {
    fn from(e: io::Error) -> Self {
        Fail::Numeric(format!("i/o: {e}"))
    }
}

type Out<T> = std::result::Result<T, Fail>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Config(m)) => {
            eprintln!("configuration error: {m}");
            ExitCode::from(2)
        }
        Err(Fail::Numeric(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(1)
        }
        Err(Fail::Verdict) => ExitCode::from(1),
    }
}

fn flag(pairs: &mut Vec<(String, String)>, key: &str, v: &Option<String>) {
    if let Some(v) = v {
        pairs.push((key.to_string(), v.clone()));
    }
}

fn load(name: &str, common: &Common, extra: &[(&str, &Option<String>)]) -> Out<ExperimentConfig> {
    let mut pairs = vec![];
    flag(&mut pairs, "output", &common.output);
    flag(&mut pairs, "model", &common.model);
    flag(&mut pairs, "profile", &common.profile);
    flag(&mut pairs, "eps", &common.eps);
    flag(&mut pairs, "y0", &common.y0);
    flag(&mut pairs, "rtol", &common.rtol);
    flag(&mut pairs, "atol", &common.atol);
    for (k, v) in extra {
        flag(&mut pairs, k, v);
    }
    for p in &common.params {
        let (k, v) = p.split_once('=').ok_or_else(|| Fail::Config(format!("--param `{p}` is not k=v")))?;
        pairs.push((format!("param.{}", k.trim()), v.trim().to_string()));
    }
    let mut flags = ExperimentConfig::default();
    for (k, v) in &pairs {
        flags.set(k, v)?;
    }
    let base = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Fail::Config(format!("{path}: {e}")))?;
            ExperimentConfig::parse(&text).map_err(|e| Fail::Config(format!("{path}: {e}")))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(c) = &base.command {
        if c != name {
            return Err(Fail::Config(format!("config is for `{c}`, not `{name}`")));
        }
    }
    let mut cfg = base.overlay(flags);
    cfg.command = Some(name.to_string());
    if let Some(path) = &common.save_config {
        std::fs::write(path, cfg.emit()).map_err(|e| Fail::Config(format!("{path}: {e}")))?;
    }
    Ok(cfg)
}

fn sink(cfg: &ExperimentConfig) -> Out<Box<dyn Write>> {
    Ok(match &cfg.output {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn options(cfg: &ExperimentConfig) -> Options {
    let d = Options::default();
    Options { rtol: cfg.rtol.unwrap_or(d.rtol), atol: cfg.atol.unwrap_or(d.atol), ..d }
}

fn profile(cfg: &ExperimentConfig, default: &str) -> Out<RegularizationProfile> {
    RegularizationProfile::from_str(cfg.profile.as_deref().unwrap_or(default)).map_err(Fail::Config)
}

fn build(cfg: &ExperimentConfig, default: &str) -> Out<ModelDescriptor> {
    let mut params: Vec<(&str, f64)> = cfg.params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    if let Some(y0) = cfg.y0 {
        params.push(("y0", y0));
    }
    Ok(models::model(cfg.model.as_deref().unwrap_or(default), &params)?)
}

fn run(cmd: Command) -> Out<()> {
    match cmd {
        Command::Simulate { common, start, t_end } => {
            simulate(&load("simulate", &common, &[("start", &start), ("t_end", &t_end)])?)
        }
        Command::Poincare { common, probe } => poincare_cmd(&load("poincare", &common, &[("probe", &probe)])?),
        Command::Exponent { common, probe } => exponent(&load("exponent", &common, &[("probe", &probe)])?),
        Command::Inner { common, p, phi_p, u_start } => {
            inner(&load("inner", &common, &[("p", &p), ("phi_p", &phi_p), ("u_start", &u_start)])?)
        }
        Command::Manifold { common, from_x, to_v } => {
            manifold(&load("manifold", &common, &[("from_x", &from_x), ("to_v", &to_v)])?)
        }
        Command::Bifurcate { common, family, mu } => bifurcate(&load("bifurcate", &common, &[("family", &family), ("mu", &mu)])?),
        Command::Friction { common } => friction(&load("friction", &common, &[])?),
        Command::Accept { common, only } => accept(&load("accept", &common, &[("only", &only)])?),
        Command::Models { action: ModelsAction::List } => list_models(),
    }
}

fn simulate(cfg: &ExperimentConfig) -> Out<()> {
    let m = build(cfg, "normal-fold")?;
    let start = cfg.start.unwrap_or([m.constants.x0_minus - 0.3, m.y0]);
    let until = Until::Time(cfg.t_end.unwrap_or(5.0));
    let tr = match cfg.eps.as_deref() {
        Some(&[eps, ..]) => {
            let r = m.regularized(profile(cfg, "linear")?, eps);
            integrate(r.regularized_field(), start, until, &options(cfg).with_strip(eps))?
        }
        _ => filippov_flow(&m.system, start, until, &options(cfg))?,
    };
    let mut w = sink(cfg)?;
    tr.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn poincare_cmd(cfg: &ExperimentConfig) -> Out<()> {
    let m = build(cfg, "normal-fold")?;
    let phi = profile(cfg, "linear")?;
    let k = m.constants;
    let probes = cfg.probe.clone().unwrap_or_else(|| vec![k.x0_minus - 0.3 * (k.x_f - k.x0_minus).abs()]);
    let mut w = sink(cfg)?;
    writeln!(w, "eps,x_in,x_out,transit_time")?;
    for &eps in cfg.eps.as_deref().unwrap_or(&[1e-3]) {
        let r = m.regularized(phi.clone(), eps);
        for &x in &probes {
            let d = poincare::fold_transit(&r, k.x_f, k.y0, x, &options(cfg))?;
            writeln!(w, "{},{},{},{}", fmt17(eps), fmt17(x), fmt17(d.result.x_out), fmt17(d.result.transit_time))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn exponent(cfg: &ExperimentConfig) -> Out<()> {
    let m = build(cfg, "normal-fold")?;
    let phi = profile(cfg, "poly(2)")?;
    let eps = cfg.eps.clone().unwrap_or_else(|| vec![1e-6, 3e-6, 1e-5, 3e-5, 1e-4]);
    let probe = cfg.probe.as_ref().map(|p| p[0]).unwrap_or(m.constants.x0_minus - 0.3 * (m.constants.x_f - m.constants.x0_minus).abs());
    let s = poincare::landing_scan(&m.system, &phi, &m.constants, &eps, probe, &options(cfg))?;
    let mut w = sink(cfg)?;
    poincare::write_scan_csv(&s.rows, &mut w)?;
    w.flush()?;
    let p = phi.p() as f64;
    eprintln!(
        "exit_slope={} exit_r2={} deviation_slope={} deviation_r2={} predicted_exit={} predicted_deviation={}",
        s.exit_fit.slope,
        s.exit_fit.r_squared,
        s.deviation_fit.slope,
        s.deviation_fit.r_squared,
        p / (2.0 * p - 1.0),
        2.0 * p / (2.0 * p - 1.0)
    );
    Ok(())
}

fn inner(cfg: &ExperimentConfig) -> Out<()> {
    let p = cfg.p.unwrap_or(2);
    let c_p = match cfg.phi_p {
        Some(d) => d / (1..=p).product::<u32>() as f64,
        None => phi_polynomial(p)?.c_p(),
    };
    let sol = inner_equation::distinguished_solution(p, c_p, cfg.u_start.unwrap_or(-30.0), StepControl::default())?;
    let mut w = sink(cfg)?;
    writeln!(w, "u,eta")?;
    for &(u, eta) in &sol.grid {
        writeln!(w, "{},{}", fmt17(u), fmt17(eta))?;
    }
    w.flush()?;
    eprintln!("eta0_at_0={} err={}", fmt17(sol.eta_at_0), fmt17(sol.estimated_error));
    Ok(())
}

fn manifold(cfg: &ExperimentConfig) -> Out<()> {
    let m = build(cfg, "normal-fold")?;
    if m.id != "normal-fold" {
        return Err(Fail::Config("the manifold expansion is written for the normal-fold model".into()));
    }
    let phi = profile(cfg, "linear")?;
    let eps = cfg.eps.as_ref().map(|e| e[0]).unwrap_or(1e-3);
    let from_x = cfg.from_x.unwrap_or(-1.0);
    let r = m.regularized(phi.clone(), eps);
    let trace = slow_manifold::trace_manifold_with(&r, from_x, cfg.to_v.unwrap_or(1.0), &options(cfg))?;
    let kind = if phi.p() == 1 {
        SandwichKind::LinearConf { k: 10.0, x_min: from_x, x_max: -eps.powf(0.45) }
    } else {
        SandwichKind::GraphOverX { k: 1.0, x_min: from_x, lambda: 0.45 }
    };
    let rep = slow_manifold::verify_sandwich(&r, &trace, kind);
    let mut w = sink(cfg)?;
    rep.write_csv(&mut w)?;
    w.flush()?;
    eprintln!("end_x={} checked={} inside_fraction={}", fmt17(trace.end_x), rep.count, rep.fraction);
    Ok(())
}

fn bifurcate(cfg: &ExperimentConfig) -> Out<()> {
    let phi = profile(cfg, "linear")?;
    let eps = cfg.eps.as_ref().map(|e| e[0]).unwrap_or(1e-3);
    let family = cfg.family.as_deref().unwrap_or("grazing-attracting");
    let mut w = sink(cfg)?;
    match family {
        "grazing-attracting" | "grazing-repelling" => {
            let mus = cfg.mu.unwrap_or(Range { start: -0.01, stop: 0.01, count: 41 }).values();
            let fam = bifurcation::grazing_family(family == "grazing-repelling");
            let pts = bifurcation::grazing_sliding_scan(&fam, &phi, eps, &mus)?;
            bifurcation::write_scan_csv(&pts, &mut w)?;
        }
        "homoclinic" => {
            let d = cfg.params.get("d").copied().unwrap_or(0.1);
            let mus = cfg.mu.unwrap_or(Range { start: 0.0, stop: 3.0, count: 13 }).values();
            let rep = bifurcation::homoclinic_scan(d, &phi, eps, &mus)?;
            writeln!(w, "mu_tilde,fixed_point,stability")?;
            for (mt, o) in &rep.rows {
                match o.fixed_point() {
                    Some(p) => writeln!(w, "{},{},{}", fmt17(*mt), fmt17(p.x), p.stability)?,
                    None => writeln!(w, "{},,{}", fmt17(*mt), if *o == bifurcation::Outcome::Absent(bifurcation::Absence::NoReturn) { "no-return" } else { "absent" })?,
                }
            }
            eprintln!("alpha_plus={} mu_tilde_star={}", fmt17(rep.alpha_plus), fmt17(rep.mu_star));
        }
        other => return Err(Fail::Config(format!("unknown family `{other}`"))),
    }
    w.flush()?;
    Ok(())
}

fn friction(cfg: &ExperimentConfig) -> Out<()> {
    let m = build(cfg, "stribeck")?;
    if m.id != "stribeck" && m.id != "coulomb" {
        return Err(Fail::Config(format!("`{}` is not a friction model", m.id)));
    }
    let phi = profile(cfg, "linear")?;
    let mut w = sink(cfg)?;
    writeln!(w, "eps,x_star,slope,stability,arc_distance")?;
    for &eps in cfg.eps.as_deref().unwrap_or(&[1e-2, 1e-3]) {
        let map = ReturnMap::new(&m, phi.clone(), eps)?;
        if m.id == "coulomb" {
            let rep = bifurcation::centre_semistability(&map, &[], &[])?;
            // Identity inside, contracting outside: the central slope averages the two sides.
            let slope = map.slope(rep.x_bar)?;
            writeln!(w, "{},{},{},semistable,", fmt17(eps), fmt17(rep.x_bar), fmt17(slope))?;
            continue;
        }
        let found = bifurcation::find_periodic_orbit(&map, map.window(), bifurcation::default_start(&map))?;
        match found.fixed_point() {
            Some(p) => {
                let d = bifurcation::upper_arc_distance(&map, p.x)?;
                writeln!(w, "{},{},{},{},{}", fmt17(eps), fmt17(p.x), fmt17(p.slope), p.stability, fmt17(d))?;
            }
            None => writeln!(w, "{},,,absent,", fmt17(eps))?,
        }
    }
    w.flush()?;
    Ok(())
}

fn accept(cfg: &ExperimentConfig) -> Out<()> {
    let ids: Vec<u32> = cfg.only.clone().unwrap_or_else(|| (1..=acceptance::COUNT).collect());
    if let Some(bad) = ids.iter().find(|&&i| i == 0 || i > acceptance::COUNT) {
        return Err(Fail::Config(format!("no criterion {bad}")));
    }
    let mut w = sink(cfg)?;
    let mut all = true;
    for id in ids {
        let v = acceptance::run(id);
        writeln!(w, "{v}")?;
        for n in &v.notes {
            writeln!(w, "    note: {n}")?;
        }
        all &= v.pass;
    }
    w.flush()?;
    if all {
        Ok(())
    } else {
        Err(Fail::Verdict)
    }
}

fn list_models() -> Out<()> {
    let mut w = BufWriter::new(io::stdout().lock());
    for info in models::catalog() {
        writeln!(w, "{}: {}", info.id, info.summary)?;
        for p in info.params {
            writeln!(w, "    --param {}={} ({})", p.name, p.default, p.doc)?;
        }
        match models::model(info.id, &[]) {
            Ok(m) => {
                for (k, v) in &m.facts {
                    writeln!(w, "    {k}: {v}")?;
                }
            }
            Err(e) => writeln!(w, "    facts unavailable: {e}")?,
        }
    }
    w.flush()?;
    Ok(())
}
