use std::process::{Command, Output};

fn slidekick(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slidekick")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn tmp(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("slidekick-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn help_exits_zero() {
    let o = slidekick(&["--help"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("bifurcate"));
}

#[test]
fn poincare_linear_landing() {
    let o = slidekick(&["poincare", "--model", "normal-fold", "--profile", "linear", "--eps", "1e-3", "--y0", "0.25", "--probe", "-0.8"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("eps,x_in,x_out,transit_time"));
    let x_out: f64 = lines.next().unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((x_out - 0.499).abs() < 1e-5, "{x_out}");
}

fn eta_summary(o: &Output) -> f64 {
    let err = String::from_utf8(o.stderr.clone()).unwrap();
    let line = err.lines().find(|l| l.starts_with("eta0_at_0=")).unwrap();
    line.split_whitespace().next().unwrap().trim_start_matches("eta0_at_0=").parse().unwrap()
}

#[test]
fn inner_stable_under_longer_seed_run() {
    let a = slidekick(&["inner", "--p", "2", "--phi-p", "-3"]);
    let b = slidekick(&["inner", "--p", "2", "--phi-p", "-3", "--u-start", "-60"]);
    assert!(a.status.success() && b.status.success());
    assert!(stdout(&a).starts_with("u,eta\n"));
    let (ea, eb) = (eta_summary(&a), eta_summary(&b));
    assert!((ea - eb).abs() < 1e-8, "{ea} {eb}");
}

#[test]
fn config_errors_exit_two() {
    assert_eq!(slidekick(&["poincare", "--model", "no-such-model"]).status.code(), Some(2));
    assert_eq!(slidekick(&["poincare", "--param", "q=1"]).status.code(), Some(2));
    assert_eq!(slidekick(&["poincare", "--profile", "cubic"]).status.code(), Some(2));
    let path = tmp("unknown.cfg");
    std::fs::write(&path, "epsilon = 0.1\n").unwrap();
    assert_eq!(slidekick(&["poincare", "--config", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_one() {
    // The asymptotic seed is not valid this close to the fold.
    let o = slidekick(&["inner", "--p", "2", "--u-start", "-2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn flags_override_file_and_output_repeats() {
    let path = tmp("run.cfg");
    std::fs::write(&path, "command = poincare\neps = 0.01\nprobe = -0.8\n").unwrap();
    let p = path.to_str().unwrap();
    let a = slidekick(&["poincare", "--config", p, "--eps", "1e-3"]);
    let b = slidekick(&["poincare", "--config", p, "--eps", "1e-3"]);
    assert!(stdout(&a).contains("1.0000000000000000e-3,"));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(slidekick(&["exponent", "--config", p]).status.code(), Some(2));
}

#[test]
fn saved_config_reproduces_run() {
    let saved = tmp("saved.cfg");
    let s = saved.to_str().unwrap();
    let a = slidekick(&["poincare", "--eps", "1e-3,1e-2", "--probe", "-0.7,-0.6", "--save-config", s]);
    let b = slidekick(&["poincare", "--config", s]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn bifurcate_writes_branch() {
    let o = slidekick(&["bifurcate", "--family", "grazing-attracting", "--eps", "1e-3", "--mu", "-0.001:0.002:4"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("mu,fixed_point,stability,gamma,delta\n"));
    assert_eq!(text.lines().filter(|l| l.contains(",attracting,")).count(), 4);
}

#[test]
fn models_list_shows_catalog() {
    let o = slidekick(&["models", "list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for id in ["normal-fold", "general-fold", "stribeck", "coulomb", "grazing-family", "grazing-family-ode", "saddle-homoclinic"] {
        assert!(text.contains(&format!("{id}:")), "{id}");
    }
}

#[test]
fn accept_single_criterion() {
    let o = slidekick(&["accept", "--only", "1"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("criterion  1 PASS"));
}
