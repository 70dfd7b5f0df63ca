//! Distinguished solution of the inner equation `d eta/du = 2 / (4 eta - c_p u^p)`.
//!
//! Along the distinguished branch the equation is extremely stiff as `u -> -inf`
//! (the Jacobian grows like `u^(2p-2)`), so it is integrated with a 3-stage
//! Radau IIA scheme rather than the explicit stepper used for planar flows.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

mod radau {
    use super::*;

    const S6: f64 = 2.449_489_742_783_178;

    fn tableau() -> ([f64; 3], [[f64; 3]; 3]) {
        let c = [(4.0 - S6) / 10.0, (4.0 + S6) / 10.0, 1.0];
        let a = [
            [(88.0 - 7.0 * S6) / 360.0, (296.0 - 169.0 * S6) / 1800.0, (-2.0 + 3.0 * S6) / 225.0],
            [(296.0 + 169.0 * S6) / 1800.0, (88.0 + 7.0 * S6) / 360.0, (-2.0 - 3.0 * S6) / 225.0],
            [(16.0 - S6) / 36.0, (16.0 + S6) / 36.0, 1.0 / 9.0],
        ];
        (c, a)
    }

    pub struct Problem<'a> {
        pub f: &'a dyn Fn(f64, &[f64]) -> Vec<f64>,
        pub jac: &'a dyn Fn(f64, &[f64]) -> DMatrix<f64>,
        /// Rejects a state (e.g. the denominator changed sign).
        pub guard: &'a dyn Fn(f64, &[f64]) -> bool,
    }

    /// One Radau IIA step solved with full Newton; `None` if Newton fails.
    fn step(pb: &Problem<'_>, u: f64, y: &[f64], h: f64) -> Option<Vec<f64>> {
        let (c, a) = tableau();
        let n = y.len();
        // Explicit predictor: along the stiff branch it keeps the stages admissible.
        let f0 = (pb.f)(u, y);
        let mut z: Vec<f64> = (0..3 * n).map(|k| c[k / n] * h * f0[k % n]).collect();
        if !(0..3).all(|j| (pb.guard)(u + c[j] * h, &(0..n).map(|i| y[i] + z[j * n + i]).collect::<Vec<_>>())) {
            return None;
        }
        let mut prev = f64::INFINITY;
        for it in 0..30 {
            let stages: Vec<Vec<f64>> = (0..3).map(|j| (0..n).map(|i| y[i] + z[j * n + i]).collect()).collect();
            let fs: Vec<Vec<f64>> = (0..3).map(|j| (pb.f)(u + c[j] * h, &stages[j])).collect();
            let js: Vec<DMatrix<f64>> = (0..3).map(|j| (pb.jac)(u + c[j] * h, &stages[j])).collect();
            let mut res = DVector::zeros(3 * n);
            let mut m = DMatrix::identity(3 * n, 3 * n);
            for i in 0..3 {
                for k in 0..n {
                    let mut acc = z[i * n + k];
                    for j in 0..3 {
                        acc -= h * a[i][j] * fs[j][k];
                    }
                    res[i * n + k] = -acc;
                }
                for j in 0..3 {
                    for r in 0..n {
                        for q in 0..n {
                            m[(i * n + r, j * n + q)] -= h * a[i][j] * js[j][(r, q)];
                        }
                    }
                }
            }
            let dz = m.lu().solve(&res)?;
            // Damp the Newton update until every stage stays on the admissible side.
            let mut lam = 1.0;
            loop {
                let ok = (0..3).all(|j| {
                    let st: Vec<f64> = (0..n).map(|i| y[i] + z[j * n + i] + lam * dz[j * n + i]).collect();
                    (pb.guard)(u + c[j] * h, &st)
                });
                if ok {
                    break;
                }
                lam *= 0.5;
                if lam < 1e-6 {
                    return None;
                }
            }
            let mut size = 0.0f64;
            for i in 0..3 * n {
                z[i] += lam * dz[i];
                size = size.max(lam * dz[i].abs() / (1e-9 + z[i].abs() + y[i % n].abs()));
            }
            if !size.is_finite() {
                return None;
            }
            // Converged, or stalled at the rounding floor.
            if size < 1e-15 || (it >= 2 && size < 1e-10 && size >= 0.5 * prev) {
                let out: Vec<f64> = (0..n).map(|i| y[i] + z[2 * n + i]).collect();
                return (pb.guard)(u + h, &out).then_some(out);
            }
            prev = size;
        }
        None
    }

    /// Integrate from `u0` to `u1 > u0`, landing exactly on every point of `outputs`.
    pub fn solve(
        pb: &Problem<'_>,
        u0: f64,
        y0: &[f64],
        u1: f64,
        outputs: &[f64],
        tol: f64,
    ) -> Result<(Vec<f64>, Vec<(f64, Vec<f64>)>)> {
        let mut u = u0;
        let mut y = y0.to_vec();
        let mut h = 1e-3 * (u1 - u0).abs().max(1.0);
        let mut hits = Vec::new();
        let mut next = outputs.iter().copied().filter(|&o| o > u0 && o <= u1).peekable();
        let mut guard_failures = 0;
        let mut attempts = 0usize;
        while u < u1 {
            attempts += 1;
            if attempts > 2_000_000 {
                return Err(Error::StepLimitExceeded(2_000_000));
            }
            let target = next.peek().copied().unwrap_or(u1);
            let mut hh = h.min(target - u);
            let clipped = hh == target - u;
            if hh < 1e-14 * u.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow(u));
            }
            let one = step(pb, u, &y, hh);
            let two = one.as_ref().and_then(|_| step(pb, u, &y, 0.5 * hh)).and_then(|m| step(pb, u + 0.5 * hh, &m, 0.5 * hh));
            let (Some(y1), Some(y2)) = (one, two) else {
                guard_failures += 1;
                if guard_failures > 200 {
                    return Err(Error::BlowUp(u));
                }
                h = 0.25 * hh;
                continue;
            };
            let mut err = 0.0f64;
            for i in 0..y.len() {
                let sc = tol * (1.0 + y2[i].abs());
                err = err.max((y2[i] - y1[i]).abs() / 31.0 / sc);
            }
            if err <= 1.0 {
                u = if clipped { target } else { u + hh };
                y = y2;
                guard_failures = 0;
                if clipped && next.peek().is_some() {
                    hits.push((u, y.clone()));
                    next.next();
                }
                hh *= (0.9 * err.max(1e-12).powf(-1.0 / 6.0)).min(4.0);
                h = if clipped { h.max(hh) } else { hh };
            } else {
                h = hh * (0.9 * err.powf(-1.0 / 6.0)).max(0.2);
            }
        }
        Ok((y, hits))
    }
}

/// Two-term asymptotic series of the distinguished solution as `u -> -inf`.
pub fn asymptotic_seed(p: u32, c_p: f64, u: f64) -> Result<f64> {
    if u.abs() < 5.0 {
        return Err(Error::SeriesOutOfRange(u.abs()));
    }
    let phi_p = c_p * factorial(p);
    Ok(0.25 * c_p * u.powi(p as i32) + 2.0 * factorial(p - 1) / phi_p * u.powi(1 - p as i32))
}

/// Scalings `eta_bar = alpha eta`, `u_bar = beta u` onto `d eta_bar/d u_bar = 1/(eta_bar + sigma u_bar^p)`.
///
/// `sigma = +1` for even `p` (`c_p < 0`), `-1` for odd `p` (`c_p > 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
}

pub fn normalization(p: u32, c_p: f64) -> Normalization {
    let q = (2 * p - 1) as f64;
    let m = c_p.abs();
    Normalization {
        alpha: 2f64.powf((p as f64 - 2.0) / q) * m.powf(1.0 / q),
        beta: 2f64.powf(-3.0 / q) * m.powf(2.0 / q),
        sigma: if p % 2 == 0 { 1.0 } else { -1.0 },
    }
}

fn check_sign(p: u32, c_p: f64) -> Result<()> {
    let ok = if p % 2 == 0 { c_p < 0.0 } else { c_p > 0.0 };
    if ok {
        Ok(())
    } else {
        Err(Error::SeedInconsistent(format!("p = {p} needs c_p {} 0, got {c_p}", if p % 2 == 0 { "<" } else { ">" })))
    }
}

/// Three-term series of the normalized distinguished solution.
pub fn normalized_seed(p: u32, ub: f64) -> f64 {
    let s = if p % 2 == 0 { 1.0 } else { -1.0 };
    let pf = p as f64;
    -s * ub.powi(p as i32) - s / (pf * ub.powi(p as i32 - 1)) - s * (pf - 1.0) / (pf.powi(3) * ub.powi(3 * p as i32 - 2))
}

/// Distinguished solution of the inner equation on `[u_start, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub p: u32,
    pub c_p: f64,
    pub grid: Vec<(f64, f64)>,
    pub eta_at_0: f64,
    pub u_start: f64,
    pub estimated_error: f64,
}

/// Relative tolerance of the stiff solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub tol: f64,
    pub grid_points: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { tol: 1e-12, grid_points: 201 }
    }
}

// The state is the denominator `D = 4 eta - c_p u^p`, which stays small along the
// distinguished branch; working with `eta` itself loses every digit of `D` to cancellation.
fn den_problem(p: u32, c_p: f64) -> (impl Fn(f64, &[f64]) -> Vec<f64>, impl Fn(f64, &[f64]) -> DMatrix<f64>) {
    let pi = p as i32;
    let pf = p as f64;
    let f = move |u: f64, y: &[f64]| vec![8.0 / y[0] - pf * c_p * u.powi(pi - 1)];
    let jac = move |_: f64, y: &[f64]| DMatrix::from_element(1, 1, -8.0 / (y[0] * y[0]));
    (f, jac)
}

fn seed_den(p: u32, c_p: f64, u: f64) -> f64 {
    8.0 * factorial(p - 1) / (c_p * factorial(p)) * u.powi(1 - p as i32)
}

fn solve_unscaled(p: u32, c_p: f64, u_start: f64, seed_den: f64, outputs: &[f64], tol: f64) -> Result<(f64, Vec<(f64, f64)>)> {
    let pi = p as i32;
    let (f, jac) = den_problem(p, c_p);
    let guard = |_: f64, y: &[f64]| y[0] > 0.0;
    let pb = radau::Problem { f: &f, jac: &jac, guard: &guard };
    let (y, hits) = radau::solve(&pb, u_start, &[seed_den], 0.0, outputs, tol)?;
    let eta = move |u: f64, d: f64| 0.25 * (d + c_p * u.powi(pi));
    Ok((eta(0.0, y[0]), hits.into_iter().map(|(u, v)| (u, eta(u, v[0]))).collect()))
}

/// Integrate from the two-term seed at `u_start` to `u = 0`; the error estimate
/// compares against a run started at `2 u_start`.
pub fn distinguished_solution(p: u32, c_p: f64, u_start: f64, ctl: StepControl) -> Result<InnerSolution> {
    check_sign(p, c_p)?;
    if u_start > -10.0 {
        return Err(Error::SeriesOutOfRange(u_start.abs()));
    }
    let n = ctl.grid_points.max(2);
    let outputs: Vec<f64> = (0..n).map(|i| u_start * (1.0 - i as f64 / (n - 1) as f64)).collect();
    let (eta_at_0, mut grid) = solve_unscaled(p, c_p, u_start, seed_den(p, c_p, u_start), &outputs, ctl.tol)?;
    grid.insert(0, (u_start, asymptotic_seed(p, c_p, u_start)?));
    let (far, _) = solve_unscaled(p, c_p, 2.0 * u_start, seed_den(p, c_p, 2.0 * u_start), &[], ctl.tol)?;
    Ok(InnerSolution { p, c_p, grid, eta_at_0, u_start, estimated_error: (far - eta_at_0).abs() })
}

/// Value at `u = 0` when the seed at `u_start` is moved by `rel * |seed|` away from the null-cline.
pub fn perturbed_eta_at_0(p: u32, c_p: f64, u_start: f64, rel: f64) -> Result<f64> {
    check_sign(p, c_p)?;
    let seed = asymptotic_seed(p, c_p, u_start)?;
    // Shift eta by rel |eta|, i.e. D by 4 rel |eta|.
    let d = seed_den(p, c_p, u_start) + 4.0 * rel * seed.abs();
    Ok(solve_unscaled(p, c_p, u_start, d, &[], 1e-12)?.0)
}

/// Solve the normalized equation from `ub_start` up to `ub_end`, sampling at `outputs`.
pub fn normalized_solution(p: u32, ub_start: f64, ub_end: f64, outputs: &[f64], seed_rel: f64) -> Result<(f64, Vec<(f64, f64)>)> {
    let s = if p % 2 == 0 { 1.0 } else { -1.0 };
    let pi = p as i32;
    let pf = p as f64;
    // State w = eta_bar + sigma u^p, the distance to the null-cline.
    let f = move |u: f64, y: &[f64]| vec![1.0 / y[0] + s * pf * u.powi(pi - 1)];
    let jac = |_: f64, y: &[f64]| DMatrix::from_element(1, 1, -1.0 / (y[0] * y[0]));
    let guard = |_: f64, y: &[f64]| y[0] > 0.0;
    let pb = radau::Problem { f: &f, jac: &jac, guard: &guard };
    let seed = normalized_seed(p, ub_start);
    let w0 = -s / (pf * ub_start.powi(pi - 1)) - s * (pf - 1.0) / (pf.powi(3) * ub_start.powi(3 * pi - 2)) + seed_rel * seed.abs();
    let (y, hits) = radau::solve(&pb, ub_start, &[w0], ub_end, outputs, 1e-12)?;
    let eta = move |u: f64, w: f64| w - s * u.powi(pi);
    Ok((eta(ub_end, y[0]), hits.into_iter().map(|(u, v)| (u, eta(u, v[0]))).collect()))
}

/// Margins of the normalized sandwich `N < eta_bar < N + (1 + margin) C`, with
/// `N = -sigma u^p` the null-cline and `C = -sigma / (p u^(p-1))` the first correction.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    pub points: usize,
    pub satisfied: usize,
    /// Smallest `(eta_bar - N) / C`; must stay positive.
    pub min_ratio: f64,
    /// Largest `(eta_bar - N) / C`; must stay below `1 + margin`.
    pub max_ratio: f64,
}

pub fn sandwich(p: u32, samples: &[(f64, f64)], margin: f64) -> SandwichReport {
    let s = if p % 2 == 0 { 1.0 } else { -1.0 };
    let pf = p as f64;
    let mut rep = SandwichReport { points: samples.len(), satisfied: 0, min_ratio: f64::INFINITY, max_ratio: f64::NEG_INFINITY };
    for &(u, e) in samples {
        let null = -s * u.powi(p as i32);
        let corr = -s / (pf * u.powi(p as i32 - 1));
        let ratio = (e - null) / corr;
        rep.min_ratio = rep.min_ratio.min(ratio);
        rep.max_ratio = rep.max_ratio.max(ratio);
        if ratio > 0.0 && ratio < 1.0 + margin {
            rep.satisfied += 1;
        }
    }
    rep
}

/// Forward-asymptote constant of the normalized `p = 2` solution,
/// `eta_bar(u) = Omega_0 - 1/u + Omega_0/(3u^3) + ...` as `u -> +inf`.
pub fn omega0() -> Result<f64> {
    let big = 400.0;
    let (e, _) = normalized_solution(2, -30.0, big, &[], 0.0)?;
    let mut om = e + 1.0 / big;
    for _ in 0..3 {
        om = e + 1.0 / big - om / (3.0 * big.powi(3));
    }
    Ok(om)
}

/// Power-law fit of the first-order correction `eta_1` along the distinguished solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Eta1Report {
    pub slope: f64,
    pub r_squared: f64,
    /// `eta_1 / (d u^(p+1) / 4)` at the right end of the fit window.
    pub prefactor_ratio: f64,
    pub max_abs: f64,
}

/// Integrate `eta_1' = (-8 eta_1 + 2 d u^(p+1)) / (4 eta_0 - c_p u^p)^2` jointly with `eta_0`
/// from `u = -80`, starting `eta_1` at `eta1_seed`, and fit `log|eta_1|` against `log|u|` on `[-40, -15]`.
/// `d = phi^(p+1)(1) / (p+1)!`.
pub fn eta1_check(p: u32, c_p: f64, d: f64, eta1_seed: f64) -> Result<Eta1Report> {
    check_sign(p, c_p)?;
    let pi = p as i32;
    let pf = p as f64;
    let u0 = -80.0;
    let f = move |u: f64, y: &[f64]| {
        let dd = y[0];
        vec![8.0 / dd - pf * c_p * u.powi(pi - 1), (-8.0 * y[1] + 2.0 * d * u.powi(pi + 1)) / (dd * dd)]
    };
    let jac = move |u: f64, y: &[f64]| {
        let dd = y[0];
        let forcing = -8.0 * y[1] + 2.0 * d * u.powi(pi + 1);
        DMatrix::from_row_slice(2, 2, &[-8.0 / (dd * dd), 0.0, -2.0 * forcing / dd.powi(3), -8.0 / (dd * dd)])
    };
    let guard = |_: f64, y: &[f64]| y[0] > 0.0;
    let pb = radau::Problem { f: &f, jac: &jac, guard: &guard };
    let outputs: Vec<f64> = (0..=25).map(|i| -40.0 + i as f64).collect();
    let (_, hits) = radau::solve(&pb, u0, &[seed_den(p, c_p, u0), eta1_seed], -15.0, &outputs, 1e-12)?;
    let pts: Vec<(f64, f64)> = hits.iter().map(|(u, y)| (u.abs().ln(), y[1].abs().max(1e-300).ln())).collect();
    let fit = crate::poincare::linear_fit(&pts);
    let max_abs = hits.iter().map(|(_, y)| y[1].abs()).fold(0.0, f64::max);
    let last = hits.last().map(|(_, y)| y[1]).unwrap_or(f64::NAN);
    let model = 0.25 * d * (-15f64).powi(pi + 1);
    Ok(Eta1Report { slope: fit.0, r_squared: fit.2, prefactor_ratio: last / model, max_abs })
}
