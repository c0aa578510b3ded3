//! Surrogate-based counterfactuals against the finite-difference oracle.
//!
//! Trains the discovery pipeline on the logistic-reaction benchmark, then
//! re-optimizes the surrogate under interventions and checks the resulting
//! deviations against independent solves of the intervened models.

use cpde_core::*;

/// Benchmark-scale training settings (mirrors the CLI's tuned defaults).
fn bench_cfg(seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::default();
    cfg.lambda_r = 1e-3;
    cfg.lambda_s = 1e-7;
    cfg.lr = 3e-3;
    cfg.omega0 = 8.0;
    cfg.alpha_update_period = 10;
    cfg.epochs = 1500;
    cfg.polish_iters = 2400;
    cfg.final_sweep = true;
    cfg.seed = seed;
    cfg
}

#[test]
fn reaction_retraining_tracks_the_fd_counterfactual() {
    let spec = BenchmarkSpec::by_name(BenchmarkName::Reaction1d);
    let (samples, _truth) = generate_benchmark(&spec, 1).unwrap();
    let cfg = bench_cfg(1);
    let out = train(&samples, &spec.library, &spec.domain, &cfg).unwrap();
    let fitted = StructuralModel::new(spec.library.clone(), out.estimate.alpha_hat.clone())
        .unwrap();
    let mut support = fitted.support_keys(cfg.prune_tol);
    support.sort();
    assert_eq!(support, vec!["U", "U2"], "training failed to recover support");

    // Surrogate counterfactual: zero the saturation term and re-optimize.
    let mut cf_cfg = cfg.clone();
    cf_cfg.epochs = 600;
    cf_cfg.polish_iters = 600;
    let (_, delta_surrogate) = retrain_counterfactual(
        &out.net,
        &fitted,
        &Intervention::zero("U2"),
        &samples,
        &spec.domain,
        &cf_cfg,
    )
    .unwrap();

    // Finite-difference oracle on the same intervened model.
    let factual = solve_fd(&fitted, &spec.ic, &spec.domain).unwrap();
    let cf = solve_counterfactual(&fitted, &Intervention::zero("U2"), &spec.ic, &spec.domain)
        .unwrap();
    let delta_fd = counterfactual_deviation(&factual, &cf).unwrap();

    let rel = (delta_surrogate - delta_fd).abs() / delta_fd;
    assert!(
        rel < 0.2,
        "surrogate vs fd deviation: {delta_surrogate} vs {delta_fd} (rel {rel:.3})"
    );

    // Removing the saturation term is causally relevant: the deviation
    // clears the relevance threshold by a wide margin.
    let grid = &samples.colloc;
    let field_vals: Vec<f64> = grid.points().iter().map(|&p| out.net.eval_value(p)).collect();
    let field_norm = l2_norm(&field_vals, grid).unwrap();
    let eta = DiagThresholds::default().eta;
    assert!(
        delta_surrogate > eta * field_norm,
        "{delta_surrogate} vs threshold {}",
        eta * field_norm
    );
}

#[test]
fn orthogonal_forcing_retraining_leaves_mode_one_alone() {
    // Contaminated decay model: the forcing only ever excites the second
    // mode, so zeroing it and re-optimizing must not move the first mode.
    let spec = BenchmarkSpec::by_name(BenchmarkName::Orthogonal1d);
    let (samples, _truth) = generate_benchmark(&spec, 1).unwrap();
    let mut cfg = bench_cfg(1);
    cfg.epochs = 1200;
    cfg.polish_iters = 600;
    let out = train(&samples, &spec.library, &spec.domain, &cfg).unwrap();

    let j_source = 1usize;
    assert_eq!(spec.library[j_source].key(), "SOURCE(sin_2pi_x)");
    let mut contaminated_alpha = out.estimate.alpha_hat.clone();
    contaminated_alpha[j_source] = 0.1;
    let contaminated = StructuralModel::new(spec.library.clone(), contaminated_alpha).unwrap();

    let mut cf_cfg = cfg.clone();
    cf_cfg.epochs = 400;
    cf_cfg.polish_iters = 300;
    let (cf_net, _delta) = retrain_counterfactual(
        &out.net,
        &contaminated,
        &Intervention::zero("SOURCE(sin_2pi_x)"),
        &samples,
        &spec.domain,
        &cf_cfg,
    )
    .unwrap();

    // Project both surrogate fields onto sin(pi x) and compare trajectories.
    let d = &spec.domain;
    let eval_grid = SpaceTimeDomain::dim1(0.0, 1.0, d.t_end, 121, 41).unwrap();
    let project = |net: &SurrogateNet| -> Vec<f64> {
        let xs = eval_grid.xs(0);
        let h = eval_grid.dx(0);
        eval_grid
            .ts()
            .iter()
            .map(|&t| {
                let mut acc = 0.0;
                for (i, &x) in xs.iter().enumerate() {
                    let w = if i == 0 || i == xs.len() - 1 { 0.5 * h } else { h };
                    acc += w
                        * net.eval_value(Point::xt(x, t))
                        * (std::f64::consts::PI * x).sin();
                }
                2.0 * acc
            })
            .collect()
    };
    let m1_factual = project(&out.net);
    let m1_cf = project(&cf_net);
    // L2-in-time of the first-mode gap, normalized like the projected norm
    let dt = eval_grid.dt();
    let mut acc = 0.0;
    for (i, (a, b)) in m1_factual.iter().zip(&m1_cf).enumerate() {
        let w = if i == 0 || i == eval_grid.nt - 1 { 0.5 } else { 1.0 };
        acc += w * dt * (a - b) * (a - b);
    }
    let mode1_gap = (acc * 0.5).sqrt();
    assert!(mode1_gap < 1e-3, "mode-1 projected deviation {mode1_gap}");
}

#[test]
fn baseline_data_fit_is_comparable_to_the_causal_fit() {
    let spec = BenchmarkSpec::by_name(BenchmarkName::Reaction1d);
    let (samples, _truth) = generate_benchmark(&spec, 2).unwrap();
    let mut cfg = bench_cfg(2);
    cfg.epochs = 1000;
    cfg.polish_iters = 800;
    let causal = train(&samples, &spec.library, &spec.domain, &cfg).unwrap();
    let causal_mse = causal.trace.records.last().unwrap().data;

    // Frozen all-ones coefficients: the baseline keeps every term (DXX
    // included) by construction, and still fits the data.
    let ones = StructuralModel::new(spec.library.clone(), vec![1.0; spec.library.len()]).unwrap();
    let (_, trace) = train_baseline_pinn(&samples, &ones, &spec.domain, &cfg).unwrap();
    let baseline_mse = trace.records.last().unwrap().data;
    assert_eq!(
        ones.support_keys(cfg.prune_tol),
        vec!["U", "U2", "DXX"],
        "baseline support is frozen"
    );
    assert!(
        baseline_mse <= 2.0 * causal_mse.max(1e-9),
        "baseline {baseline_mse} vs causal {causal_mse}"
    );
}
