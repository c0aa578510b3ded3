// Temporary development probe; removed before release.
use cpde_core::*;
use cpde_core::{AnalyticField, StructuralModel};
use std::time::Instant;

fn analytic_design_check(spec: &BenchmarkSpec) {
    // perfect-fit limit: exact jets of the closed-form logistic field
    let field = AnalyticField::logistic_1d(1.0, 0.5, 0.4);
    let grid = spec.colloc_grid();
    let pts: Vec<_> = (0..grid.len()).map(|i| grid.node(i)).collect();
    let zero = StructuralModel::new(spec.library.clone(), vec![0.0; spec.library.len()]).unwrap();
    let dm = assemble_design(&zero, &field, &pts, &spec.domain).unwrap();
    let mut a = dm.a.clone();
    let mut b = dm.b.clone();
    for i in 0..dm.n {
        let s = grid.weight(i).sqrt();
        for j in 0..dm.m {
            a[i * dm.m + j] *= s;
        }
        b[i] *= s;
    }
    let ls = cpde_core::linalg::least_squares(&a, dm.n, dm.m, &b).unwrap();
    let mu = cpde_core::mutual_coherence(&a, dm.n, dm.m).unwrap();
    println!("  analytic design: ls_alpha={ls:?} mu={mu:.4}");
}

fn run(name: BenchmarkName, seed: u64, cfg: &TrainConfig) {
    let mut spec = BenchmarkSpec::by_name(name);
    if name == BenchmarkName::Reaction1d {
        if let Ok(t) = std::env::var("PROBE_T") {
            let t: f64 = t.parse().unwrap();
            let nt = (t * 2000.0) as usize + 1;
            spec.domain =
                cpde_core::SpaceTimeDomain::dim1(0.0, 1.0, t, 101, nt).unwrap();
        }
        if let Ok(c) = std::env::var("PROBE_COLLOC") {
            let c: usize = c.parse().unwrap();
            spec.colloc_nx = c;
            spec.colloc_nt = c;
        }
        analytic_design_check(&spec);
    }
    let t0 = Instant::now();
    let (samples, _truth) = generate_benchmark(&spec, seed).unwrap();
    let gen_s = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let out = train(&samples, &spec.library, &spec.domain, cfg).unwrap();
    let train_s = t1.elapsed().as_secs_f64();
    // post-train sweep over the weighted design
    {
        let grid = &samples.colloc;
        let pts: Vec<_> = (0..grid.len()).map(|i| grid.node(i)).collect();
        let zero = StructuralModel::new(spec.library.clone(), vec![0.0; spec.library.len()]).unwrap();
        let dm = assemble_design(&zero, &out.net, &pts, &spec.domain).unwrap();
        let mut a = dm.a.clone();
        let mut b = dm.b.clone();
        for i in 0..dm.n {
            let s = grid.weight(i).sqrt();
            for j in 0..dm.m {
                a[i * dm.m + j] *= s;
            }
            b[i] *= s;
        }
        let sweep = lambda_sweep(&a, &b, dm.n, dm.m).unwrap();
        println!(
            "  sweep chose lambda={:.3e} support={:?}",
            sweep.chosen_lambda,
            sweep.support.iter().map(|&j| spec.library[j].key()).collect::<Vec<_>>()
        );
        for (lam, sup, res) in &sweep.candidates {
            println!("    lam={lam:.3e} sup={sup:?} refit_res={res:.4e}");
        }
        // normalized-column sweep
        let mut norms = vec![0.0; dm.m];
        for i in 0..dm.n {
            for j in 0..dm.m {
                norms[j] += a[i * dm.m + j] * a[i * dm.m + j];
            }
        }
        for n in &mut norms {
            *n = n.sqrt();
        }
        let mut an = a.clone();
        for i in 0..dm.n {
            for j in 0..dm.m {
                an[i * dm.m + j] /= norms[j];
            }
        }
        let sweep_n = lambda_sweep(&an, &b, dm.n, dm.m).unwrap();
        println!(
            "  NORMALIZED sweep chose lambda={:.3e} support={:?}",
            sweep_n.chosen_lambda,
            sweep_n.support.iter().map(|&j| spec.library[j].key()).collect::<Vec<_>>()
        );
        for (lam, sup, res) in &sweep_n.candidates {
            println!("    lam={lam:.3e} sup={sup:?} refit_res={res:.4e}");
        }
    }
    let last = out.trace.records.last().unwrap();
    let mut support = out
        .estimate
        .support
        .iter()
        .map(|&j| spec.library[j].key())
        .collect::<Vec<_>>();
    support.sort();
    let mut expect = spec.expected_support();
    expect.sort();
    println!(
        "{} seed={} gen={:.1}s train={:.1}s epochs={} data={:.3e} res={:.3e} alpha={:?} support={:?} expect={:?} ok={}",
        name.as_str(),
        seed,
        gen_s,
        train_s,
        out.trace.records.len(),
        last.data,
        last.residual,
        out.estimate
            .alpha_hat
            .iter()
            .map(|a| (a * 1e4).round() / 1e4)
            .collect::<Vec<_>>(),
        support,
        expect,
        support == expect,
    );
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(|s| s.as_str()).unwrap_or("reaction1d");
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let epochs: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(2500);
    let lambda_s: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.01);
    let lr: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let lambda_r: f64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let period: usize = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(50);
    let omega0: f64 = args.get(8).and_then(|s| s.parse().ok()).unwrap_or(3.0);
    let polish: usize = args.get(9).and_then(|s| s.parse().ok()).unwrap_or(0);
    let sweep: bool = args.get(10).map(|s| s == "sweep").unwrap_or(false);
    let mut cfg = TrainConfig::default();
    cfg.epochs = epochs;
    cfg.seed = seed;
    cfg.lambda_s = lambda_s;
    cfg.lr = lr;
    cfg.lambda_r = lambda_r;
    cfg.alpha_update_period = period;
    cfg.omega0 = omega0;
    cfg.polish_iters = polish;
    cfg.final_sweep = sweep;
    run(BenchmarkName::parse(which).unwrap(), seed, &cfg);
}
