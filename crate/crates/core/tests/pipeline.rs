use bstable::{
    build_kernel, check_fk_identity, classify_regime, critical_sandwich, estimate_tail, fit_tail,
    geometric_grid, make_explicit, solve_u, uniform_grid, SimConfig, SolveOptions, StableParams,
    Streams, TailKind, TailModel, WindowPolicy,
};

fn with_threads<T: Send>(n: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn critical_solution_sits_inside_the_sandwich() {
    let motion = StableParams::new(1.2, 1.0, 0.0, 0.0).unwrap();
    let dist = make_explicit(&[0.5, 0.0, 0.5]).unwrap();
    let pred = classify_regime(&motion, &dist).unwrap();
    let p = pred.exponent_or_rate.unwrap();
    let kernel = build_kernel(&motion, 0.02, 50_000, &Streams::new(21)).unwrap();
    let mut grid = vec![0.0];
    grid.extend(geometric_grid(1.0, 256.0, 25));
    let opts = SolveOptions::for_regime(true, TailModel::Power { exponent: p });
    let sol = solve_u(&kernel, &dist, &grid, &opts, None).unwrap();
    assert!(
        sol.converged,
        "{} sweeps, residual {}",
        sol.iterations, sol.residual_sup
    );
    assert!(sol.u_grid.windows(2).all(|w| w[1] <= w[0]));

    let u = sol.curve();
    let delta = dist.attraction_delta(0.1).unwrap();
    for &x in &grid[1..] {
        let s = critical_sandwich(&u, &kernel, &dist, x, 0.1, delta).unwrap();
        assert!(s.holds(), "{s:?}");
    }
    // local slope over the last two octaves
    let n = grid.len();
    let slope = -(sol.u_grid[n - 1] / sol.u_grid[n - 9]).ln() / (grid[n - 1] / grid[n - 9]).ln();
    assert!((slope - p).abs() < 0.15, "slope {slope} vs {p}");
}

#[test]
fn subcritical_solution_matches_monte_carlo() {
    let motion = StableParams::new(1.2, 1.0, 0.0, 0.0).unwrap();
    let dist = make_explicit(&[0.6, 0.0, 0.4]).unwrap();
    let xs = geometric_grid(1.0, 64.0, 13);
    let est = estimate_tail(
        &motion,
        &dist,
        &xs,
        40_000,
        &SimConfig::default(),
        &Streams::new(22),
    )
    .unwrap();
    let kernel = build_kernel(&motion, 0.02, 40_000, &Streams::new(23)).unwrap();
    let mut grid = vec![0.0];
    grid.extend(&xs);
    let sol = solve_u(
        &kernel,
        &dist,
        &grid,
        &SolveOptions::for_regime(false, TailModel::Power { exponent: 1.2 }),
        None,
    )
    .unwrap();
    assert!(sol.residual_sup < 1e-6);
    for (i, x) in xs.iter().enumerate() {
        let d = (sol.u_grid[i + 1] - est.u_mid(i)).abs();
        assert!(
            d <= (3.0 * est.stat_halfwidth(i)).max(0.02),
            "x = {x}: {} vs {}",
            sol.u_grid[i + 1],
            est.u_mid(i)
        );
    }
}

#[test]
fn tail_estimate_does_not_depend_on_thread_count() {
    let motion = StableParams::new(1.5, 1.0, 1.0, 0.0).unwrap();
    let dist = make_explicit(&[0.5, 0.0, 0.5]).unwrap();
    let xs = geometric_grid(1.0, 32.0, 6);
    let cfg = SimConfig {
        step: 0.05,
        max_time: 50.0,
        stop_above: Some(32.0),
        ..Default::default()
    };
    let run = || estimate_tail(&motion, &dist, &xs, 5000, &cfg, &Streams::new(24)).unwrap();
    let one = with_threads(1, run);
    let four = with_threads(4, run);
    assert_eq!(one, four);
    assert!(one.n_stopped > 0);
}

#[test]
fn spectrally_negative_subcritical_rate_is_recovered() {
    let motion = StableParams::new(1.5, 0.0, 1.0, 0.0).unwrap();
    let dist = make_explicit(&[0.75, 0.0, 0.25]).unwrap();
    let pred = classify_regime(&motion, &dist).unwrap();
    assert_eq!(pred.kind, Some(TailKind::Exponential));
    let a0 = pred.exponent_or_rate.unwrap();
    let xs = uniform_grid(0.0, 16.0, 17);
    let est = estimate_tail(
        &motion,
        &dist,
        &xs,
        200_000,
        &SimConfig::default(),
        &Streams::new(25),
    )
    .unwrap();
    let fit = fit_tail(
        &est,
        TailKind::Exponential,
        &WindowPolicy::for_kind(TailKind::Exponential),
    )
    .unwrap();
    assert!(
        (fit.value / a0 - 1.0).abs() < 0.15,
        "rate {} vs {a0}",
        fit.value
    );
}

#[test]
fn representation_identity_holds_for_the_solver_profile() {
    let motion = StableParams::new(1.5, 0.0, 1.0, 0.0).unwrap();
    let dist = make_explicit(&[0.75, 0.0, 0.25]).unwrap();
    let a0 = motion.first_passage_rate(0.5).unwrap();
    let kernel = build_kernel(&motion, 0.02, 40_000, &Streams::new(26)).unwrap();
    let grid = uniform_grid(0.0, 16.0, 33);
    let sol = solve_u(
        &kernel,
        &dist,
        &grid,
        &SolveOptions::for_regime(false, TailModel::Exponential { rate: a0 }),
        None,
    )
    .unwrap();
    assert!(sol.converged);
    let chk = check_fk_identity(
        &motion,
        &dist,
        &sol.curve(),
        6.0,
        3.0,
        20_000,
        0.02,
        200.0,
        &Streams::new(27),
    )
    .unwrap();
    assert!(chk.rel_error < 0.05, "{chk:?}");
    assert!(chk.bound_holds(0.02), "{chk:?}");
}
