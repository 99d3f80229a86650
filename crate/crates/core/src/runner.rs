//! Command dispatch: config in, certificate out.

use std::time::Instant;

use crate::ba::{ba_problem, ba_small_radius, best_checks, check_subset, pair_checks, solve_best_approx, solve_prox_pair};
use crate::catalog::{ba_payoff, vi_payoff, Payoff, SmoothMap};
use crate::certificate::{BaSummary, Certificate, Details, Solution, Verification, ViSummary};
use crate::check::{CheckOutcome, CheckReport, RunMode};
use crate::config::{Application, Command, RunConfig};
use crate::constants::{estimate_eta, estimate_gamma, estimate_theta, ConstantsReport};
use crate::error::{Error, Result};
use crate::hilbert::{ConvexSet, Vector};
use crate::saddle::{check_saddle, solve_saddle, Residuals, SaddleConfig, SaddlePoint, SolveOptions};
use crate::vi::{probe, small_radius, solve_vi, vi_point_checks, vi_problem, PROBE_TOL};

const FD_POINTS: usize = 100;
const FD_TOL: f64 = 1e-5;
const DECLARED_SLACK: f64 = 1e-8;

/// What a command solves, with everything derived from the config.
enum Problem {
    /// Constants only.
    Constants { payoff: Option<Payoff> },
    Saddle { payoff: Payoff, t_set: ConvexSet },
    Vi { map: SmoothMap },
    Pair { map: SmoothMap, y_set: ConvexSet, t_set: ConvexSet },
    Best { map: SmoothMap },
}

struct Prepared {
    theorem: &'static str,
    report: ConstantsReport,
    problem: Problem,
    /// The map as given in the config, for integrity checks.
    source_map: Option<SmoothMap>,
    default_r: f64,
    shift: Option<crate::vi::ShiftCondition>,
    r_star: Option<f64>,
}

fn command_of(cfg: &RunConfig) -> Result<Command> {
    cfg.command
        .ok_or_else(|| Error::config("command", "missing command"))
}

fn y_set_of(cfg: &RunConfig) -> Result<ConvexSet> {
    match &cfg.y_set {
        Some(s) => s.build(),
        None => ConvexSet::ball(cfg.problem.rho),
    }
}

fn prepare(cfg: &RunConfig, command: Command) -> Result<Prepared> {
    let est = cfg.estimate_options();
    let rho = cfg.problem.rho;
    let app = cfg.payoff.unwrap_or(Application::Vi);
    let bilinear = cfg.problem.is_bilinear();
    if bilinear && !matches!(command, Command::Constants | Command::Saddle) {
        return Err(Error::config(
            "problem.kind",
            format!("bilinear problems support `constants` and `saddle`, not `{}`", command.name()),
        ));
    }
    let source_map = if bilinear { None } else { Some(cfg.problem.smooth_map()?) };
    let map = || source_map.clone().expect("map problems have a map");
    let prepared = |theorem, report: ConstantsReport, problem| {
        let default_r = report.r_max;
        Prepared {
            theorem,
            report,
            problem,
            source_map: source_map.clone(),
            default_r,
            shift: None,
            r_star: None,
        }
    };
    Ok(match command {
        Command::Constants | Command::Saddle => {
            let y_set = y_set_of(cfg)?;
            let payoff = if bilinear {
                cfg.problem.bilinear_payoff(&y_set)?
            } else {
                match app {
                    Application::Vi => vi_payoff(&map())?,
                    Application::Ba => ba_payoff(&map(), &y_set)?,
                }
            };
            if command == Command::Saddle {
                let t_set = match &cfg.t_set {
                    Some(s) => s.build()?,
                    None => payoff.y_set().clone(),
                };
                check_subset(&t_set, payoff.y_set(), payoff.dimension(), cfg.seed)?;
                let report = ConstantsReport::saddle(&payoff, est)?;
                prepared("1", report, Problem::Saddle { payoff, t_set })
            } else if bilinear {
                let report = ConstantsReport::saddle(&payoff, est)?;
                prepared("1", report, Problem::Constants { payoff: Some(payoff) })
            } else {
                let (theorem, report) = match app {
                    Application::Vi => ("2", ConstantsReport::vi(&map(), est)?),
                    Application::Ba => ("5", ConstantsReport::ba(&map(), &y_set, est)?),
                };
                prepared(theorem, report, Problem::Constants { payoff: Some(payoff) })
            }
        }
        Command::Vi => {
            let report = ConstantsReport::vi(&map(), est)?;
            prepared("2", report, Problem::Vi { map: map() })
        }
        Command::ViShifted => {
            let w = cfg
                .w
                .as_ref()
                .ok_or_else(|| Error::config("w", "vi-shifted needs the shift `w`"))?;
            let w = Vector::from_column_slice(w);
            let cond = crate::vi::shift_condition(&map(), &w, est)?;
            if !cond.holds() {
                return Err(Error::hypothesis(format!(
                    "shift condition ‖w−Ψ(0)‖ ≥ 2M₁ρ violated: ‖w−Ψ(0)‖ = {}, 2M₁ρ = {}, deficit {}",
                    cond.distance, cond.required, cond.deficit
                )));
            }
            let phi = map().shifted(&w)?;
            let report = ConstantsReport::vi(&phi, est)?;
            let mut p = prepared("4", report, Problem::Vi { map: phi });
            p.default_r = rho;
            p.shift = Some(cond);
            p
        }
        Command::BestApprox => {
            let report = ConstantsReport::ba(&map(), &ConvexSet::ball(rho)?, est)?;
            prepared("6", report, Problem::Best { map: map() })
        }
        Command::ProxPair => {
            let y_set = y_set_of(cfg)?;
            let t_set = match &cfg.t_set {
                Some(s) => s.build()?,
                None => y_set.clone(),
            };
            let report = ConstantsReport::ba(&map(), &y_set, est)?;
            prepared("5", report, Problem::Pair { map: map(), y_set, t_set })
        }
        Command::SmallRadius => {
            let (theorem, sr) = match app {
                Application::Vi => ("3", small_radius(&map(), cfg.epsilon, est)?),
                Application::Ba => ("7", ba_small_radius(&map(), cfg.epsilon, est)?),
            };
            let problem = match app {
                Application::Vi => Problem::Vi { map: sr.map },
                Application::Ba => Problem::Best { map: sr.map },
            };
            let mut p = prepared(theorem, sr.report, problem);
            p.r_star = Some(sr.r_star);
            p
        }
        Command::Verify => {
            return Err(Error::config("command", "verify takes a certificate; call verify()"));
        }
    })
}

/// Integrity checks of the inputs: Jacobian and payoff gradients against
/// finite differences, declared constants against sampled lower bounds.
fn integrity_checks(cfg: &RunConfig, prepared: &Prepared, payoff: Option<&Payoff>) -> Result<CheckReport> {
    let mut report = CheckReport::default();
    let seed = cfg.seed;
    if let Some(map) = &prepared.source_map {
        let err = map.jacobian_fd_error(FD_POINTS, seed)?;
        report.push(CheckOutcome::scalar("map.jacobian_fd", err, FD_TOL));
        if let Some(k) = cfg.problem.analytic_constants {
            let bare = map.clone().with_analytic(None);
            let n = cfg.tolerances.constant_samples;
            let theta = estimate_theta(&bare, n, seed)?.value;
            report.push(CheckOutcome::scalar("map.declared_theta", theta - k.theta, DECLARED_SLACK));
            let gamma = estimate_gamma(&bare, n, seed)?.value;
            report.push(CheckOutcome::scalar("map.declared_gamma", gamma - k.gamma, DECLARED_SLACK));
            if let Some(eta) = k.eta {
                let est = estimate_eta(&bare, n, seed)?.value;
                report.push(CheckOutcome::scalar("map.declared_eta", est - eta, DECLARED_SLACK));
            }
        }
    }
    if let Some(p) = payoff {
        let g = p.gradient_fd_error(FD_POINTS, seed)?;
        report.push(CheckOutcome::scalar("payoff.grad_x_fd", g.grad_x, FD_TOL));
        report.push(CheckOutcome::scalar("payoff.grad_y_fd", g.grad_y, FD_TOL));
    }
    Ok(report)
}

fn vector(v: &[f64]) -> Vector {
    Vector::from_column_slice(v)
}

/// Execute a configured command and build its certificate.
pub fn run(cfg: &RunConfig) -> Result<Certificate> {
    let start = Instant::now();
    cfg.validate()?;
    let command = command_of(cfg)?;
    let p = prepare(cfg, command)?;
    let opts = cfg.solve_options();
    let r = cfg.r.unwrap_or(p.default_r);
    let report = &p.report;

    let mut details = None;
    let mut residuals = None;
    let (mode, solution, mut checks) = match &p.problem {
        Problem::Constants { payoff } => {
            let mode = if report.is_certified() {
                RunMode::Certified
            } else {
                RunMode::Heuristic
            };
            (mode, None, integrity_checks(cfg, &p, payoff.as_ref())?)
        }
        Problem::Saddle { payoff, t_set } => {
            let l = report.l.unwrap_or(0.0);
            let mode = opts.run_mode(report.is_certified(), r, report.r_max)?;
            let scfg = opts.saddle_config(payoff, r, t_set.clone(), l, Some(report.r_max))?;
            let sp = solve_saddle(payoff, &scfg)?;
            let mut checks = integrity_checks(cfg, &p, Some(payoff))?;
            checks.extend(check_saddle(payoff, &sp, &scfg, opts.samples, opts.seed)?);
            if let Some(u) = probe(payoff, &scfg, &opts)? {
                checks.push(CheckOutcome::scalar("saddle.uniqueness", u.max_pairwise, PROBE_TOL));
            }
            residuals = Some(Residuals::from(&sp));
            let sol = Solution {
                r,
                x_star: sp.x_star.iter().copied().collect(),
                y_star: Some(sp.y_star.iter().copied().collect()),
                y_star_unique: Some(!payoff.is_y_independent()),
                r_star: None,
            };
            (mode, Some(sol), checks)
        }
        Problem::Vi { map } => {
            let cert = solve_vi(map, r, report, &opts)?;
            let mut checks = integrity_checks(cfg, &p, None)?;
            checks.extend(cert.checks.clone());
            let mut summary = ViSummary::from(&cert);
            summary.shift = p.shift;
            details = Some(Details::Vi(summary));
            residuals = Some(cert.residuals);
            let sol = Solution {
                r,
                x_star: cert.x_star.clone(),
                y_star: Some(cert.y_star.clone()),
                y_star_unique: Some(true),
                r_star: p.r_star,
            };
            (cert.mode, Some(sol), checks)
        }
        Problem::Pair { map, y_set, t_set } => {
            let cert = solve_prox_pair(map, y_set, t_set, r, report, &opts)?;
            let mut checks = integrity_checks(cfg, &p, None)?;
            checks.extend(cert.checks.clone());
            details = Some(Details::Ba(BaSummary::from(&cert)));
            residuals = Some(cert.residuals);
            let sol = Solution {
                r,
                x_star: cert.x_star.clone(),
                y_star: Some(cert.y_star.clone()),
                y_star_unique: None,
                r_star: None,
            };
            (cert.mode, Some(sol), checks)
        }
        Problem::Best { map } => {
            let cert = solve_best_approx(map, r, report, &opts)?;
            let mut checks = integrity_checks(cfg, &p, None)?;
            checks.extend(cert.checks.clone());
            details = Some(Details::Ba(BaSummary::from(&cert)));
            residuals = Some(cert.residuals);
            let sol = Solution {
                r,
                x_star: cert.x_star.clone(),
                y_star: Some(cert.y_star.clone()),
                y_star_unique: Some(true),
                r_star: p.r_star,
            };
            (cert.mode, Some(sol), checks)
        }
    };
    let passed = checks.passed();
    let mut echo = cfg.clone();
    echo.command = Some(command);
    Ok(Certificate {
        theorem: p.theorem.to_string(),
        command,
        mode,
        passed,
        config: echo,
        constants: p.report,
        solution,
        details,
        checks: std::mem::take(&mut checks.checks),
        residuals,
        seed: cfg.seed,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Largest relative difference between two reports' numeric fields; `∞` if
/// they disagree on which constants are present or on their flags.
fn report_distance(a: &ConstantsReport, b: &ConstantsReport) -> f64 {
    if a.mode != b.mode || a.certified != b.certified {
        return f64::INFINITY;
    }
    let rel = |x: f64, y: f64| {
        if x == y {
            0.0
        } else {
            (x - y).abs() / x.abs().max(y.abs()).max(1.0)
        }
    };
    let opt = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => rel(x, y),
        (None, None) => 0.0,
        _ => f64::INFINITY,
    };
    [
        rel(a.rho, b.rho),
        rel(a.theta, b.theta),
        rel(a.gamma, b.gamma),
        rel(a.r_max, b.r_max),
        opt(a.eta, b.eta),
        opt(a.delta, b.delta),
        opt(a.m, b.m),
        opt(a.l, b.l),
        opt(a.sigma, b.sigma),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Audit a certificate: recompute the constants from the embedded config and
/// re-run every check at the embedded solution, without solving again.
pub fn verify(cert: &Certificate) -> Result<Verification> {
    let start = Instant::now();
    let cfg = &cert.config;
    cfg.validate()?;
    let command = cert.command;
    let p = prepare(cfg, command)?;
    let opts: SolveOptions = cfg.solve_options();
    let mut checks = CheckReport::default();
    checks.push(CheckOutcome::scalar(
        "verify.constants",
        report_distance(&p.report, &cert.constants),
        1e-9,
    ));
    let consistent_mode = match cert.mode {
        RunMode::Certified => {
            let r = cert.solution.as_ref().map_or(0.0, |s| s.r);
            p.report.is_certified() && r <= p.report.r_max * (1.0 + 1e-12)
        }
        RunMode::Heuristic => true,
    };
    checks.push(CheckOutcome::scalar(
        "verify.mode",
        if consistent_mode { 0.0 } else { 1.0 },
        0.0,
    ));

    let payoff_for_fd = match &p.problem {
        Problem::Constants { payoff } => payoff.clone(),
        Problem::Saddle { payoff, .. } => Some(payoff.clone()),
        _ => None,
    };
    checks.extend(integrity_checks(cfg, &p, payoff_for_fd.as_ref())?);

    if let Some(sol) = &cert.solution {
        let n = cfg.problem.dimension;
        let x = vector(&sol.x_star);
        let y = sol
            .y_star
            .as_ref()
            .map(|y| vector(y))
            .ok_or_else(|| Error::config("solution.y_star", "missing"))?;
        if x.len() != n || y.len() != n {
            return Err(Error::config("solution", format!("dimension mismatch: expected {n}")));
        }
        let res = cert
            .residuals
            .ok_or_else(|| Error::config("residuals", "missing"))?;
        let sp = SaddlePoint {
            x_star: x,
            y_star: y,
            residual: res.extragradient,
            iterations: res.iterations,
            step: res.step,
        };
        let with_step = |mut c: SaddleConfig| {
            c.step = res.step;
            c
        };
        let r = sol.r;
        let report = &p.report;
        match &p.problem {
            Problem::Constants { .. } => {}
            Problem::Saddle { payoff, t_set } => {
                let l = report.l.unwrap_or(0.0);
                let scfg = with_step(opts.saddle_config(payoff, r, t_set.clone(), l, Some(report.r_max))?);
                checks.extend(check_saddle(payoff, &sp, &scfg, opts.samples, opts.seed)?);
            }
            Problem::Vi { map } => {
                let (payoff, scfg) = vi_problem(map, r, report, &opts)?;
                checks.extend(vi_point_checks(map, &payoff, &with_step(scfg), &sp, &opts)?.checks);
            }
            Problem::Pair { map, y_set, t_set } => {
                let (payoff, scfg) = ba_problem(map, y_set, t_set, r, report, &opts)?;
                checks.extend(pair_checks(map, &payoff, &with_step(scfg), &sp, &opts)?.checks);
            }
            Problem::Best { map } => {
                let (payoff, scfg) =
                    ba_problem(map, &ConvexSet::ball(map.rho())?, &ConvexSet::ball(r)?, r, report, &opts)?;
                let mut c = pair_checks(map, &payoff, &with_step(scfg), &sp, &opts)?.checks;
                best_checks(map, r, &sp, &opts, &mut c)?;
                checks.extend(c);
            }
        }
    }
    Ok(Verification {
        command: Command::Verify,
        theorem: cert.theorem.clone(),
        source_command: command,
        passed: checks.passed(),
        checks: checks.checks,
        seed: cert.seed,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn run_json(text: &str) -> Result<Certificate> {
        run(&parse_config(text)?)
    }

    const QUICK: &str = r#""tolerances":{"samples":1000,"starts":4}"#;

    #[test]
    fn minimal_vi_runs_at_rho() {
        let cert = run_json(&format!(
            r#"{{"command":"vi","problem":{{"kind":"constant","c":[1,0],"rho":1.0}},{QUICK}}}"#
        ))
        .unwrap();
        assert!(cert.passed, "{:?}", cert.first_failure());
        let sol = cert.solution.as_ref().unwrap();
        assert_eq!(sol.r, 1.0);
        assert!((sol.x_star[0] + 1.0).abs() < 1e-6);
        assert_eq!(cert.theorem, "2");
        assert_eq!(cert.exit_code(), 0);
    }

    #[test]
    fn shift_deficit_is_a_hypothesis_error() {
        let err = run_json(
            r#"{"command":"vi-shifted","w":[15.9,0],
                "problem":{"kind":"quadratic","Q":[[[1,0],[0,1]],[[0,0],[0,0]]],"rho":1.0}}"#,
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("‖w−Ψ(0)‖ ≥ 2M₁ρ"), "{err}");
    }

    #[test]
    fn round_trip_and_tamper() {
        let cert = run_json(&format!(
            r#"{{"command":"best-approx","problem":{{"kind":"affine","A":[[1,0],[0,1]],"b":[2,0],"rho":1.0}},{QUICK}}}"#
        ))
        .unwrap();
        assert!(cert.passed, "{:?}", cert.first_failure());
        let parsed = Certificate::from_json(&cert.to_json().unwrap()).unwrap();
        assert_eq!(parsed, cert);
        let v = verify(&parsed).unwrap();
        assert!(v.passed, "{:?}", v.checks.iter().find(|c| !c.passed));

        let mut bad = parsed.clone();
        let sol = bad.solution.as_mut().unwrap();
        let (a, b) = (sol.x_star[0], sol.x_star[1]);
        let t: f64 = 0.05;
        sol.x_star = vec![a * t.cos() - b * t.sin(), a * t.sin() + b * t.cos()];
        let v = verify(&bad).unwrap();
        assert!(!v.passed);
        assert_eq!(v.exit_code(), 3);
        assert!(v.checks.iter().any(|c| !c.passed && c.witness.is_some()));
    }

    #[test]
    fn constants_only() {
        let cert = run_json(r#"{"command":"constants","problem":{"kind":"affine","A":[[1,0],[0,1]],"b":[2,0],"rho":1.0}}"#)
            .unwrap();
        assert!(cert.passed);
        assert_eq!(cert.constants.m, Some(2.0));
        assert_eq!(cert.constants.r_max, 0.25);
        assert!(cert.solution.is_none());
        assert!(verify(&cert).unwrap().passed);
    }
}
