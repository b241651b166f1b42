//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs;

use bstable::{
    build_kernel, check_fk_identity, classify_regime, critical_sandwich, default_phi_grid,
    envelope_checks, estimate_plateau_constant, estimate_survival, estimate_tail, fit_tail,
    geometric_grid, phi_functionals, solve_u, uniform_grid, verify_small_lambda_limits,
    MonotoneCurve, PairKernel, PhiEnsemble, PhiStart, Regime, RegimePrediction, SimConfig,
    SolveOptions, SolveReport, Streams, TailEstimate, TailKind, TailModel,
};
use serde::Serialize;

use crate::config::{Model, RunConfig, USource};
use crate::fail::CliError;
use crate::output::{num, Check, OutDir, Verdict};

/// Everything a subcommand needs.
pub struct Ctx {
    pub cfg: RunConfig,
    pub model: Model,
    pub streams: Streams,
    pub out: OutDir,
}

/// Result of a subcommand: a verdict, plus an error to raise once outputs are written.
pub struct Outcome {
    pub verdict: Verdict,
    pub deferred: Option<CliError>,
}

impl Outcome {
    fn done(verdict: Verdict) -> Self {
        Self {
            verdict,
            deferred: None,
        }
    }
}

fn predict(model: &Model) -> Result<RegimePrediction, CliError> {
    Ok(classify_regime(&model.motion, &model.dist)?)
}

/// Prediction when one exists; critical laws without attraction data get none.
fn predict_opt(model: &Model) -> Option<RegimePrediction> {
    classify_regime(&model.motion, &model.dist).ok()
}

pub fn cmd_predict(ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let pred = predict(&ctx.model)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&pred).expect("prediction serializes")
    );
    ctx.out.write_json("prediction.json", &pred)?;
    Ok(Outcome::done(Verdict::new(vec![])))
}

fn sim_config(cfg: &RunConfig, model: &Model, x_max: f64) -> SimConfig {
    let max_time = cfg.sim.max_time.unwrap_or_else(|| {
        if model.dist.is_critical() {
            SimConfig::critical_horizon(model.motion.alpha, model.dist.gamma, x_max)
        } else {
            f64::INFINITY
        }
    });
    SimConfig {
        step: cfg.sim.step,
        max_particles: cfg.sim.max_particles,
        max_time,
        record_population_at: Vec::new(),
        stop_above: cfg.sim.stop_above,
    }
}

const PILOT_LO: f64 = 0.0625;
const PILOT_HI: f64 = 16_777_216.0;
const PILOT_CRITICAL_X: f64 = 1024.0;
const FAR_HITS: u64 = 20;
const TARGET_HITS: f64 = 100.0;

/// Grid from `x₁` (pilot `û ≈ 0.5`) to the point where `û·n_reps ≈ 100`,
/// extrapolated from the farthest pilot point with enough hits.
pub fn auto_grid(
    cfg: &RunConfig,
    model: &Model,
    pred: Option<&RegimePrediction>,
    streams: &Streams,
) -> Result<Vec<f64>, CliError> {
    let kind = pred.and_then(|p| p.kind).unwrap_or(TailKind::Power);
    let per_oct = cfg.sim.points_per_octave;
    if model.motion.is_degenerate() || pred.is_some_and(|p| p.regime == Regime::Degenerate) {
        return Ok(geometric_grid(1.0, 16.0, 4 * per_oct + 1));
    }
    let pilot_grid = geometric_grid(PILOT_LO, PILOT_HI, 57);
    let mut sim = sim_config(cfg, model, PILOT_CRITICAL_X);
    sim.stop_above = Some(PILOT_HI);
    let n_pilot = cfg.sim.pilot_reps.min(cfg.sim.n_reps);
    let est = estimate_tail(
        &model.motion,
        &model.dist,
        &pilot_grid,
        n_pilot,
        &sim,
        &streams.domain("pilot"),
    )?;

    let i1 = (0..est.len())
        .find(|&i| est.u_mid(i) <= 0.5)
        .unwrap_or(est.len() - 1);
    let x1 = est.xs[i1];
    let far = (i1..est.len()).rev().find(|&i| est.hits[i] >= FAR_HITS);
    let x_max = match far {
        None => x1 * 8.0,
        Some(j) => {
            let u_far = est.u_mid(j);
            let shape = pred.and_then(|p| p.exponent_or_rate).or_else(|| {
                fit_tail(&est, kind, &cfg.analysis.policy(kind))
                    .ok()
                    .map(|f| f.value)
                    .filter(|v| *v > 0.0)
            });
            let excess = u_far * cfg.sim.n_reps as f64 / TARGET_HITS;
            let x = if excess <= 1.0 {
                est.xs[j]
            } else {
                match kind {
                    TailKind::Power => est.xs[j] * excess.powf(1.0 / shape.unwrap_or(1.0)),
                    TailKind::Exponential => est.xs[j] + excess.ln() / shape.unwrap_or(1.0),
                }
            };
            x.clamp(x1 * 2.0, PILOT_HI)
        }
    };
    let grid = match kind {
        TailKind::Power => {
            let n = ((x_max / x1).log2() * per_oct as f64).ceil() as usize + 1;
            geometric_grid(x1, x_max, n.max(8))
        }
        TailKind::Exponential => uniform_grid(0.0, x_max, 8 * per_oct + 1),
    };
    log::info!(
        "auto grid: {} points from {} to {}",
        grid.len(),
        grid[0],
        x_max
    );
    Ok(grid)
}

fn x_grid(ctx: &Ctx, pred: Option<&RegimePrediction>) -> Result<Vec<f64>, CliError> {
    match (&ctx.cfg.sim.x_grid, &ctx.cfg.sim.grid) {
        (Some(g), _) => Ok(g.clone()),
        (None, Some(spec)) => Ok(spec.points()),
        (None, None) => auto_grid(&ctx.cfg, &ctx.model, pred, &ctx.streams),
    }
}

fn run_tail(ctx: &Ctx, grid: &[f64]) -> Result<(TailEstimate, SimConfig), CliError> {
    let x_max = grid[grid.len() - 1];
    let sim = sim_config(&ctx.cfg, &ctx.model, x_max);
    let est = estimate_tail(
        &ctx.model.motion,
        &ctx.model.dist,
        grid,
        ctx.cfg.sim.n_reps,
        &sim,
        &ctx.streams,
    )?;
    Ok((est, sim))
}

fn tail_rows(est: &TailEstimate, policy: &bstable::WindowPolicy) -> Vec<Vec<String>> {
    (0..est.len())
        .map(|i| {
            let (lo, hi) = est.ci(i);
            vec![
                num(est.xs[i]),
                est.hits[i].to_string(),
                est.unknown[i].to_string(),
                est.n.to_string(),
                num(est.u_mid(i)),
                num(est.u_pessimistic(i)),
                num(est.u_optimistic(i)),
                num(lo),
                num(hi),
                num(est.rel_halfwidth(i)),
                bstable::tail::is_reliable(est, i, policy).to_string(),
            ]
        })
        .collect()
}

const TAIL_HEADER: [&str; 11] = [
    "x",
    "hits",
    "unknown",
    "n",
    "u",
    "u_pessimistic",
    "u_optimistic",
    "ci_lo",
    "ci_hi",
    "rel_halfwidth",
    "reliable",
];

#[derive(Serialize)]
struct FitOut {
    kind: TailKind,
    value: f64,
    stderr: f64,
    amplitude: f64,
    x_lo: f64,
    x_hi: f64,
}

#[derive(Serialize)]
struct TailReport {
    prediction: Option<RegimePrediction>,
    n_reps: u64,
    step: f64,
    max_time: f64,
    stop_above: Option<f64>,
    grid_points: usize,
    n_truncated: u64,
    n_stopped: u64,
    total_particles: u64,
    fit: Option<FitOut>,
    fit_error: Option<String>,
    plateau: Option<bstable::Plateau>,
    verdict: Verdict,
}

pub fn cmd_tail(ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let pred = predict_opt(&ctx.model);
    let grid = x_grid(ctx, pred.as_ref())?;
    let (est, sim) = run_tail(ctx, &grid)?;
    let kind = pred
        .as_ref()
        .and_then(|p| p.kind)
        .unwrap_or(TailKind::Power);
    let policy = ctx.cfg.analysis.policy(kind);
    ctx.out
        .write_csv("tail.csv", &TAIL_HEADER, &tail_rows(&est, &policy))?;

    let a = &ctx.cfg.analysis;
    let mut checks = Vec::new();
    let mut plateau = None;
    let (fit, fit_error) = match fit_tail(&est, kind, &policy) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    match (&pred, &fit) {
        (Some(p), _) if p.regime == Regime::Degenerate => {
            let positive_hits: u64 = (0..est.len())
                .filter(|&i| est.xs[i] > 0.0)
                .map(|i| est.hits[i])
                .sum();
            checks.push(Check::new(
                "no_positive_maximum",
                positive_hits as f64,
                positive_hits == 0,
            ));
        }
        (_, None) => checks
            .push(Check::new("fit", f64::NAN, false).note(fit_error.clone().unwrap_or_default())),
        (Some(p), Some(f)) => {
            let target = p
                .exponent_or_rate
                .expect("non-degenerate prediction has a shape");
            match kind {
                TailKind::Power => checks.push(Check::abs(
                    "exponent",
                    f.value,
                    target,
                    a.exponent_tolerance,
                )),
                TailKind::Exponential => {
                    checks.push(Check::rel("rate", f.value, target, a.rate_tolerance))
                }
            }
            if let Some(c) = p.constant {
                checks.push(Check::rel(
                    "amplitude",
                    f.amplitude,
                    c,
                    a.amplitude_tolerance,
                ));
            }
            if p.regime == Regime::CriticalSpectrallyNegative {
                let pl = estimate_plateau_constant(&est, target, TailKind::Power, &policy)?;
                checks.push(Check::at_most("plateau_cv", pl.cv, a.plateau_cv_max));
                checks.push(Check::new(
                    "plateau_positive",
                    pl.constant,
                    pl.constant > 0.0,
                ));
                plateau = Some(pl);
            }
            if kind == TailKind::Exponential {
                let pl = estimate_plateau_constant(&est, target, TailKind::Exponential, &policy)?;
                let mono = pl.is_nonincreasing();
                checks.push(Check::new(
                    "normalized_nonincreasing",
                    pl.values.len() as f64,
                    mono,
                ));
                plateau = Some(pl);
            }
        }
        (None, Some(f)) => {
            checks.push(Check::new("fit", f.value, true).note("no prediction for this law"))
        }
    }
    let verdict = Verdict::new(checks);
    let report = TailReport {
        prediction: pred,
        n_reps: est.n,
        step: sim.step,
        max_time: sim.max_time,
        stop_above: sim.stop_above,
        grid_points: est.len(),
        n_truncated: est.n_truncated,
        n_stopped: est.n_stopped,
        total_particles: est.total_particles,
        fit: fit.map(|f| FitOut {
            kind: f.kind,
            value: f.value,
            stderr: f.stderr,
            amplitude: f.amplitude,
            x_lo: f.x_lo,
            x_hi: f.x_hi,
        }),
        fit_error,
        plateau,
        verdict: verdict.clone(),
    };
    ctx.out.write_json("tail_report.json", &report)?;
    Ok(Outcome::done(verdict))
}

#[derive(Serialize)]
struct SurvivalReport {
    gamma: f64,
    c2: f64,
    normalization_exponent: f64,
    n_reps: u64,
    capped: u64,
    normalized: Vec<f64>,
    conjectured_plateau: f64,
    verdict: Verdict,
}

pub fn cmd_survival(ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let dist = &ctx.model.dist;
    if !dist.is_critical() {
        return Err(CliError::config(format!(
            "survival needs a critical offspring law, m = {}",
            dist.m
        )));
    }
    let s = &ctx.cfg.survival;
    let curve = estimate_survival(dist, &s.times, s.n_reps, s.pop_cap, &ctx.streams)?;
    let e = 1.0 / (dist.gamma - 1.0);
    let normalized: Vec<f64> = (0..curve.ts.len())
        .map(|i| curve.ts[i].powf(e) * curve.q_hat(i))
        .collect();
    let rows: Vec<Vec<String>> = (0..curve.ts.len())
        .map(|i| {
            let (lo, hi) = curve.ci(i);
            vec![
                num(curve.ts[i]),
                curve.alive[i].to_string(),
                curve.n.to_string(),
                num(curve.q_hat(i)),
                num(lo),
                num(hi),
                num(normalized[i]),
            ]
        })
        .collect();
    ctx.out.write_csv(
        "survival.csv",
        &["t", "alive", "n", "q", "ci_lo", "ci_hi", "normalized"],
        &rows,
    )?;

    let mut checks = Vec::new();
    let hi = normalized.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = normalized.iter().cloned().fold(f64::INFINITY, f64::min);
    checks.push(Check::at_most(
        "plateau_spread",
        (hi - lo) / hi,
        s.plateau_tolerance,
    ));
    let conjectured = (dist.c2 * (dist.gamma - 1.0)).powf(-e);
    if (dist.gamma - 2.0).abs() < 1e-12 {
        for (i, &t) in curve.ts.iter().enumerate() {
            let k = t * curve.q_hat(i) * dist.c2;
            checks.push(Check::abs(
                &format!("kolmogorov_t{}", num(t)),
                k,
                1.0,
                s.kolmogorov_tolerance,
            ));
        }
    } else {
        let mean = normalized.iter().sum::<f64>() / normalized.len() as f64;
        checks.push(
            Check::rel(
                "conjectured_constant",
                mean,
                conjectured,
                s.conjecture_tolerance,
            )
            .informational()
            .note("survival constant C2(gamma) is a conjecture for gamma < 2"),
        );
    }
    let verdict = Verdict::new(checks);
    let report = SurvivalReport {
        gamma: dist.gamma,
        c2: dist.c2,
        normalization_exponent: e,
        n_reps: curve.n,
        capped: curve.capped,
        normalized,
        conjectured_plateau: conjectured,
        verdict: verdict.clone(),
    };
    ctx.out.write_json("survival_report.json", &report)?;
    Ok(Outcome::done(verdict))
}

fn tail_model(pred: &RegimePrediction) -> TailModel {
    match (pred.kind, pred.exponent_or_rate) {
        (Some(TailKind::Power), Some(p)) => TailModel::Power { exponent: p },
        (Some(TailKind::Exponential), Some(r)) => TailModel::Exponential { rate: r },
        _ => TailModel::Flat,
    }
}

fn solver_grid(grid: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = grid.iter().copied().filter(|&x| x > 0.0).collect();
    g.insert(0, 0.0);
    g
}

fn solve_integral(
    ctx: &Ctx,
    pred: &RegimePrediction,
    grid: &[f64],
) -> Result<(PairKernel, SolveReport), CliError> {
    let i = &ctx.cfg.integral;
    let step = i.step.unwrap_or(ctx.cfg.sim.step);
    let kernel = build_kernel(&ctx.model.motion, step, i.kernel_size, &ctx.streams)?;
    let mut options = SolveOptions::for_regime(pred.is_critical(), tail_model(pred));
    if let Some(d) = i.damping {
        options.damping = d;
    }
    options.tol = i.tol;
    options.max_iter = i.max_iter;
    let report = solve_u(&kernel, &ctx.model.dist, &solver_grid(grid), &options, None)?;
    Ok((kernel, report))
}

#[derive(Serialize)]
struct Comparison {
    sup_norm: f64,
    worst_x: f64,
    worst_allowed: f64,
    points: usize,
}

#[derive(Serialize)]
struct RemainderPoint {
    x: f64,
    phi_0: f64,
    phi_r: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct IntegralReport {
    prediction: RegimePrediction,
    kernel_pairs: usize,
    kernel_step: f64,
    iterations: usize,
    converged: bool,
    residual_sup: f64,
    tail: TailModel,
    comparison: Option<Comparison>,
    remainder: Vec<RemainderPoint>,
    sandwich: Vec<bstable::tail::Sandwich>,
    verdict: Verdict,
}

pub fn cmd_solve_integral(ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let pred = predict(&ctx.model)?;
    if pred.regime == Regime::Degenerate {
        return Err(CliError::config(
            "the integral equation is trivial for a degenerate motion".into(),
        ));
    }
    let grid = x_grid(ctx, Some(&pred))?;
    let (kernel, sol) = solve_integral(ctx, &pred, &grid)?;
    let u = sol.curve();
    let icfg = ctx.cfg.integral.clone();
    let mut checks = vec![Check::at_most(
        "residual",
        sol.residual_sup,
        icfg.residual_max,
    )];

    let mut comparison = None;
    let mut rows: Vec<Vec<String>> = sol
        .xs
        .iter()
        .zip(&sol.u_grid)
        .map(|(x, v)| vec![num(*x), num(*v)])
        .collect();
    let mut header = vec!["x", "u"];
    if icfg.compare_tail {
        let (est, _) = run_tail(ctx, &grid)?;
        let mut cmp = Comparison {
            sup_norm: 0.0,
            worst_x: f64::NAN,
            worst_allowed: f64::NAN,
            points: 0,
        };
        let mut all_within = true;
        for (row, &x) in rows.iter_mut().zip(&sol.xs) {
            match est.xs.iter().position(|&g| g == x) {
                Some(i) => {
                    let diff = (u.eval(x) - est.u_mid(i)).abs();
                    let allowed = (icfg.ci_multiple * est.stat_halfwidth(i)).max(icfg.sup_floor);
                    all_within &= diff <= allowed;
                    if cmp.points == 0 || diff > cmp.sup_norm {
                        cmp.sup_norm = diff;
                        cmp.worst_x = x;
                        cmp.worst_allowed = allowed;
                    }
                    cmp.points += 1;
                    row.push(num(est.u_mid(i)));
                    row.push(num(est.stat_halfwidth(i)));
                }
                None => {
                    row.push(String::new());
                    row.push(String::new());
                }
            }
        }
        header.extend(["u_mc", "mc_halfwidth"]);
        checks.push(
            Check::new("sup_norm_vs_monte_carlo", cmp.sup_norm, all_within).note(format!(
                "pointwise bound max({} CI half-widths, {})",
                icfg.ci_multiple, icfg.sup_floor
            )),
        );
        comparison = Some(cmp);
    }
    ctx.out.write_csv("integral.csv", &header, &rows)?;

    let dist = &ctx.model.dist;
    let mut remainder = Vec::new();
    let mut sandwich = Vec::new();
    let positive: Vec<f64> = sol.xs.iter().copied().filter(|&x| x > 0.0).collect();
    if dist.is_subcritical() && positive.len() >= 3 {
        for &x in &positive[positive.len() - 3..] {
            let (phi_0, phi_r) = phi_functionals(&u, &kernel, dist, x)?;
            remainder.push(RemainderPoint {
                x,
                phi_0,
                phi_r,
                ratio: phi_r / phi_0,
            });
        }
        let decreasing = remainder.windows(2).all(|w| w[1].ratio < w[0].ratio);
        checks.push(Check::new(
            "remainder_decreasing",
            remainder[2].ratio,
            decreasing,
        ));
        checks.push(Check::at_most(
            "remainder_final",
            remainder[2].ratio,
            icfg.remainder_max,
        ));
    }
    if dist.is_critical() {
        if let Some(delta) = dist.attraction_delta(icfg.sandwich_eps) {
            for &x in &positive {
                sandwich.push(critical_sandwich(
                    &u,
                    &kernel,
                    dist,
                    x,
                    icfg.sandwich_eps,
                    delta,
                )?);
            }
            let held = sandwich.iter().filter(|s| s.holds()).count();
            checks.push(Check::new("sandwich", held as f64, held == sandwich.len()));
        }
    }

    let verdict = Verdict::new(checks);
    let deferred = (!sol.converged).then(|| {
        CliError::convergence(format!(
            "integral iteration stopped after {} sweeps (residual {:.3e})",
            sol.iterations, sol.residual_sup
        ))
    });
    let report = IntegralReport {
        prediction: pred,
        kernel_pairs: kernel.n,
        kernel_step: kernel.step,
        iterations: sol.iterations,
        converged: sol.converged,
        residual_sup: sol.residual_sup,
        tail: sol.tail,
        comparison,
        remainder,
        sandwich,
        verdict: verdict.clone(),
    };
    ctx.out.write_json("integral_report.json", &report)?;
    Ok(Outcome { verdict, deferred })
}

#[derive(Serialize)]
struct PhiRun {
    iterations: usize,
    converged: bool,
    last_change: f64,
    monotone_repairs: usize,
    invariant_violations: usize,
}

impl From<&bstable::PhiGrid> for PhiRun {
    fn from(g: &bstable::PhiGrid) -> Self {
        Self {
            iterations: g.iterations,
            converged: g.converged,
            last_change: g.last_change,
            monotone_repairs: g.monotone_repairs,
            invariant_violations: g.invariant_violations,
        }
    }
}

#[derive(Serialize)]
struct PhiReport {
    gamma: f64,
    c2: f64,
    envelope_rate: f64,
    n_paths: u64,
    step: f64,
    truncated_paths: u64,
    from_ones: PhiRun,
    from_envelope: PhiRun,
    max_disagreement: f64,
    envelope_pairs: usize,
    verdict: Verdict,
}

pub fn cmd_solve_phi(ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let (motion, dist) = (&ctx.model.motion, &ctx.model.dist);
    let p = ctx.cfg.phi.clone();
    let options = p.options();
    let ys = default_phi_grid(motion, dist, p.dy)?;
    let ensemble = PhiEnsemble::build(motion, dist, &ys, &options, &ctx.streams)?;
    let a = ensemble.solve(PhiStart::Ones, &options)?;
    let b = ensemble.solve(PhiStart::Envelope, &options)?;
    let rows: Vec<Vec<String>> = (0..a.ys.len())
        .map(|i| {
            vec![
                num(a.ys[i]),
                num(a.phi[i]),
                num(b.phi[i]),
                num(a.halfwidth[i]),
            ]
        })
        .collect();
    ctx.out.write_csv(
        "phi.csv",
        &["y", "phi", "phi_from_envelope", "halfwidth"],
        &rows,
    )?;

    let mut disagreement = 0.0f64;
    let mut agree = true;
    for i in 0..a.ys.len() {
        let d = (a.phi[i] - b.phi[i]).abs();
        disagreement = disagreement.max(d);
        agree &= d <= p.agreement_multiple * a.halfwidth[i].max(b.halfwidth[i]) + 1e-12;
    }
    let env = envelope_checks(&a, motion)?;
    let held = env.iter().filter(|c| c.holds).count();
    let checks = vec![
        Check::new(
            "invariants",
            (a.invariant_violations + b.invariant_violations) as f64,
            a.invariants_hold() && b.invariants_hold(),
        ),
        Check::new("two_start_agreement", disagreement, agree).note(format!(
            "pointwise bound {} Monte Carlo half-widths",
            p.agreement_multiple
        )),
        Check::new("envelope", held as f64, held == env.len()),
    ];
    let verdict = Verdict::new(checks);
    let deferred = (!a.converged || !b.converged).then(|| {
        CliError::convergence(format!(
            "phi iteration did not converge (changes {:.3e} and {:.3e})",
            a.last_change, b.last_change
        ))
    });
    let report = PhiReport {
        gamma: a.gamma,
        c2: a.c2,
        envelope_rate: a.envelope_rate,
        n_paths: a.n_paths,
        step: a.step,
        truncated_paths: a.truncated_paths,
        from_ones: (&a).into(),
        from_envelope: (&b).into(),
        max_disagreement: disagreement,
        envelope_pairs: env.len(),
        verdict: verdict.clone(),
    };
    ctx.out.write_json("phi_report.json", &report)?;
    Ok(Outcome { verdict, deferred })
}

#[derive(Serialize)]
struct LimitsReport {
    report: bstable::LimitReport,
    verdict: Verdict,
}

pub fn cmd_verify_limits(ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let l = ctx.cfg.limits.clone();
    if !(ctx.model.motion.c_plus > 0.0) {
        return Err(CliError::config("verify-limits needs c_plus > 0".into()));
    }
    let mut lambdas = l.lambdas.clone();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let rep =
        verify_small_lambda_limits(&ctx.model.motion, l.step, l.n_reps, &lambdas, &ctx.streams)?;
    let rows: Vec<Vec<String>> = rep
        .points
        .iter()
        .map(|p| {
            vec![
                num(p.lambda),
                num(p.ratio),
                num(p.stderr),
                num(rep.limit),
                num(p.rel_error),
            ]
        })
        .collect();
    ctx.out.write_csv(
        "limits.csv",
        &["lambda", "ratio", "stderr", "limit", "rel_error"],
        &rows,
    )?;
    let last = rep.points.last().expect("nonempty lambda grid");
    let checks = vec![
        Check::rel(
            "ratio_at_smallest_lambda",
            last.ratio,
            rep.limit,
            l.tolerance,
        ),
        Check::new("error_shrinks", last.rel_error, rep.trend_decreasing).informational(),
    ];
    let verdict = Verdict::new(checks);
    ctx.out.write_json(
        "limits_report.json",
        &LimitsReport {
            report: rep,
            verdict: verdict.clone(),
        },
    )?;
    Ok(Outcome::done(verdict))
}

#[derive(Serialize)]
struct FkReport {
    u_source: USource,
    check: bstable::FkCheck,
    verdict: Verdict,
}

pub fn cmd_fk_check(ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let pred = predict(&ctx.model)?;
    if pred.regime != Regime::SubcriticalSpectrallyNegative {
        return Err(CliError::config(format!(
            "fk-check needs a subcritical law with a spectrally negative motion, got {:?}",
            pred.regime
        )));
    }
    let f = ctx.cfg.fk.clone();
    let grid = x_grid(ctx, Some(&pred))?;
    let u = match f.u_source {
        USource::Tail => {
            let (est, _) = run_tail(ctx, &grid)?;
            let ys: Vec<f64> = (0..est.len()).map(|i| est.u_mid(i)).collect();
            let left = if est.xs[0] <= 0.0 { ys[0] } else { 1.0 };
            let mut c = MonotoneCurve::new(est.xs.clone(), ys, left, tail_model(&pred))?;
            c.make_nonincreasing();
            c
        }
        USource::Integral => {
            let (_, sol) = solve_integral(ctx, &pred, &grid)?;
            if !sol.converged {
                return Err(CliError::convergence(
                    "integral iteration for u did not converge".into(),
                ));
            }
            sol.curve()
        }
    };
    let chk = check_fk_identity(
        &ctx.model.motion,
        &ctx.model.dist,
        &u,
        f.x,
        f.y,
        f.n_paths,
        f.step,
        f.max_time,
        &ctx.streams,
    )?;
    let checks = vec![
        Check::at_most("relative_error", chk.rel_error, f.tolerance),
        Check::new("passage_bound", chk.u_x, chk.bound_holds(f.bound_slack)).note(format!(
            "u(x) <= e^(-a0 (x - y)) u(y) (1 + {})",
            f.bound_slack
        )),
    ];
    let verdict = Verdict::new(checks);
    ctx.out.write_json(
        "fk_report.json",
        &FkReport {
            u_source: f.u_source,
            check: chk,
            verdict: verdict.clone(),
        },
    )?;
    Ok(Outcome::done(verdict))
}

#[derive(Serialize)]
struct ReportEntry {
    pass: bool,
    failed: Vec<String>,
}

#[derive(Serialize)]
struct Summary {
    pass: bool,
    reports: BTreeMap<String, ReportEntry>,
}

/// Collects the verdicts of every `*_report.json` in the output directory.
pub fn cmd_report(ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let dir = ctx.out.path().to_path_buf();
    let mut names: Vec<String> = fs::read_dir(&dir)
        .map_err(|e| CliError::io(e, "cannot list output directory"))?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .filter(|n| n.ends_with("_report.json"))
        .collect();
    names.sort();
    let mut reports = BTreeMap::new();
    let mut checks = Vec::new();
    for name in names {
        let text = fs::read_to_string(dir.join(&name)).map_err(|e| CliError::io(e, &name))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::runtime(format!("{name}: {e}")))?;
        let verdict = &value["verdict"];
        let pass = verdict["pass"].as_bool().unwrap_or(false);
        let failed: Vec<String> = verdict["checks"]
            .as_array()
            .map(|cs| {
                cs.iter()
                    .filter(|c| c["pass"] == false && c["informational"] == false)
                    .filter_map(|c| c["name"].as_str().map(String::from))
                    .collect()
            })
            .unwrap_or_default();
        let key = name.trim_end_matches("_report.json").to_string();
        println!(
            "{:<10} {}{}",
            key,
            if pass { "PASS" } else { "FAIL" },
            if failed.is_empty() {
                String::new()
            } else {
                format!("  ({})", failed.join(", "))
            }
        );
        checks.push(Check::new(&key, failed.len() as f64, pass));
        reports.insert(key, ReportEntry { pass, failed });
    }
    if reports.is_empty() {
        return Err(CliError::runtime(format!(
            "no reports found in {}",
            dir.display()
        )));
    }
    let verdict = Verdict::new(checks);
    ctx.out.write_json(
        "summary.json",
        &Summary {
            pass: verdict.pass,
            reports,
        },
    )?;
    Ok(Outcome::done(verdict))
}
