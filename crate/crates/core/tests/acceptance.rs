//! Acceptance gate: ten end-to-end checks of the library's contracts, each
//! with a pinned tolerance and a wall-clock budget. The single test below
//! runs them in order and prints one PASS/FAIL line per check; any failure
//! (including a budget overrun) fails the gate with the collected reasons.

use std::time::Instant;

use ndarray::{s, Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use manigap_core::graph::{
    build_graph, epsilon_weight, gaussian_weight, unit_ball_volume, EpsilonRule, KernelGraph,
    KernelKind, KernelSpec,
};
use manigap_core::harness::{
    eig_convergence_run, graph_sweep, node_sweep, regularizer_sweep, GraphTask, GraphTaskItem,
    NodeTask, WeightMode,
};
use manigap_core::manifold::{
    quadrature_grid, sample_points, synthesize_signal, BandlimitedSignal, ManifoldSpec, PointSet,
};
use manigap_core::neural::{
    default_grid_size, default_m_proj, gnn_forward, gnn_forward_spectral, grad_node, graph_readout,
    init_params, loss_value, mnn_forward_at, total_continuity, Activation, Architecture, LossKind,
    ParamSet, Target, TrainConfig,
};
use manigap_core::spectral::{
    eig_sym, eigvals_sym, graph_freq_response, lambda_max, poly_filter_apply, FilterCoeffs,
    ResponseKind,
};

type Check = fn() -> Result<String, String>;

#[test]
fn acceptance_criteria() {
    let checks: &[(&str, f64, Check)] = &[
        ("01 spectral filter equivalence", 10.0, c01_spectral_equivalence),
        ("02 eigenvalue-ratio convergence", 180.0, c02_eig_ratio_convergence),
        ("03 node-level gap decay", 600.0, c03_node_gap_decay),
        ("04 continuity-regularizer effect", 900.0, c04_regularizer_effect),
        ("05 graph-level readout transfer", 600.0, c05_readout_transfer),
        ("06 gradient correctness", 30.0, c06_gradient_check),
        ("07 permutation symmetry", 10.0, c07_permutation_symmetry),
        ("08 kernel formula conformance", 5.0, c08_kernel_conformance),
        ("09 nonexpansive forward bound", 10.0, c09_nonexpansive_bound),
        ("10 manifold-graph consistency", 300.0, c10_mnn_gnn_consistency),
    ];
    let mut failures = Vec::new();
    for (name, budget, check) in checks {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed().as_secs_f64();
        let (mut pass, mut detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        if elapsed > *budget {
            pass = false;
            detail = format!("{detail}; runtime {elapsed:.1}s exceeds the {budget:.0}s budget");
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("[{verdict}] {name}: {detail} ({elapsed:.1}s)");
        if !pass {
            failures.push(format!("{name}: {detail} ({elapsed:.1}s)"));
        }
    }
    assert!(
        failures.is_empty(),
        "{} acceptance check(s) failed:\n{}",
        failures.len(),
        failures.join("\n")
    );
}

fn estr(e: manigap_core::Error) -> String {
    e.to_string()
}

fn kernel_name(kind: KernelKind) -> &'static str {
    match kind {
        KernelKind::Gaussian => "gaussian",
        KernelKind::Epsilon => "epsilon",
    }
}

/// A schedule-bandwidth kernel graph over points sampled from the unit
/// circle.
fn circle_graph(n: usize, seed: u64, kind: KernelKind) -> Result<(PointSet, KernelGraph), String> {
    let spec = ManifoldSpec::unit_circle();
    let pts = sample_points(&spec, n, seed).map_err(estr)?;
    let dim = spec.intrinsic_dim();
    let eps = EpsilonRule::default_schedule()
        .resolve(kind, n, dim)
        .map_err(estr)?;
    let graph = build_graph(&pts, KernelSpec::new(kind, eps, dim).map_err(estr)?).map_err(estr)?;
    Ok((pts, graph))
}

fn norm2(x: ndarray::ArrayView1<f64>) -> f64 {
    x.dot(&x).sqrt()
}

/// Random taps bounded away from zero (uniform magnitude in [0.2, 1.0] with
/// a random sign), keeping |h_k| kinks of the continuity term far from
/// finite-difference steps.
fn random_taps(rng: &mut ChaCha12Rng, k: usize) -> Vec<f64> {
    (0..k)
        .map(|_| {
            let mag = rng.gen_range(0.2..1.0);
            if rng.gen_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

/// Hand-built parameter tensors for an architecture, taps via
/// [`random_taps`].
fn random_params(rng: &mut ChaCha12Rng, arch: &Architecture) -> ParamSet {
    let k = arch.taps();
    let layers = arch
        .features()
        .windows(2)
        .map(|w| {
            let (flm1, fl) = (w[0], w[1]);
            let mut t = Array3::zeros((fl, flm1, k));
            for p in 0..fl {
                for q in 0..flm1 {
                    for (i, tap) in random_taps(rng, k).into_iter().enumerate() {
                        t[[p, q, i]] = tap;
                    }
                }
            }
            t
        })
        .collect();
    ParamSet::new(layers).expect("validated shapes")
}

/// Check 1 — polynomial filtering agrees with its spectral form
/// `V ĥ(Λ) Vᵀ x` to 1e-8·‖x‖ on 50 random graphs (N ≤ 64, K ≤ 6).
fn c01_spectral_equivalence() -> Result<String, String> {
    let mut rng = ChaCha12Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for case in 0..50u64 {
        let n = rng.gen_range(8..=64);
        let k = rng.gen_range(1..=6);
        let kind = if case % 2 == 0 {
            KernelKind::Gaussian
        } else {
            KernelKind::Epsilon
        };
        let (_, graph) = circle_graph(n, 1000 + case, kind)?;
        let h = FilterCoeffs::new((0..k).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .map_err(estr)?;
        let x = Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0));
        let direct = poly_filter_apply(&h, &graph, x.view()).map_err(estr)?;
        let decomp = eig_sym(&graph.lap_dense(), n).map_err(estr)?;
        let mut coeff = decomp.eigenvectors.t().dot(&x);
        for (c, lam) in coeff.iter_mut().zip(decomp.eigenvalues.iter()) {
            *c *= graph_freq_response(&h, *lam);
        }
        let spectral = decomp.eigenvectors.dot(&coeff);
        let err = norm2((&direct - &spectral).view()) / norm2(x.view());
        worst = worst.max(err);
    }
    if worst <= 1e-8 {
        Ok(format!("max relative deviation {worst:.2e} ≤ 1e-8 over 50 graphs"))
    } else {
        Err(format!("max relative deviation {worst:.2e} exceeds 1e-8"))
    }
}

/// Check 2 — Laplacian eigenvalue ratios on the unit circle converge with
/// n for both kernels (error at n=2000 below n=250 for i ∈ {3..6}), and the
/// Gaussian-kernel ratio errors at n=2000 are below 5% absolute.
fn c02_eig_ratio_convergence() -> Result<String, String> {
    let ns = [250usize, 500, 1000, 2000];
    let spec = ManifoldSpec::unit_circle();
    let mut problems = Vec::new();
    let mut gauss_errors = String::new();
    for kind in [KernelKind::Gaussian, KernelKind::Epsilon] {
        let rep = eig_convergence_run(&spec, kind, EpsilonRule::default_schedule(), &ns, 10, 6, 2026)
            .map_err(estr)?;
        for i in 3..=6 {
            let at = |n: usize| {
                rep.error_at(n, i)
                    .ok_or_else(|| format!("missing convergence row n={n}, i={i}"))
            };
            let (e250, e2000) = (at(250)?, at(2000)?);
            // Negations kept via booleans so a NaN error counts as a failure.
            let decayed = e2000 < e250;
            if !decayed {
                problems.push(format!(
                    "{} i={i}: mean ratio error at n=2000 ({e2000:.4}) not below n=250 ({e250:.4})",
                    kernel_name(kind)
                ));
            }
            if kind == KernelKind::Gaussian {
                gauss_errors.push_str(&format!(" i{i}={e2000:.4}"));
                let small = e2000 < 0.05;
                if !small {
                    problems.push(format!(
                        "gaussian i={i}: mean ratio error {e2000:.4} at n=2000 not below 0.05"
                    ));
                }
            }
        }
    }
    if problems.is_empty() {
        Ok(format!(
            "ratio errors shrink from n=250 to n=2000 for both kernels; gaussian at n=2000:{gauss_errors}"
        ))
    } else {
        Err(format!(
            "{} (gaussian errors at n=2000:{gauss_errors})",
            problems.join("; ")
        ))
    }
}

fn default_node_task() -> Result<NodeTask, String> {
    let spec = ManifoldSpec::unit_circle();
    let input = BandlimitedSignal::new(vec![1.0, 0.5, 0.25], spec.clone()).map_err(estr)?;
    let target = BandlimitedSignal::new(vec![0.0, 1.0], spec).map_err(estr)?;
    NodeTask::new(input, target).map_err(estr)
}

fn train_config(epochs: usize, reg_weight: f64, seed: u64) -> TrainConfig {
    TrainConfig {
        lr: 0.005,
        beta1: 0.9,
        beta2: 0.999,
        epochs,
        batch_size: 10,
        reg_weight,
        loss: LossKind::AbsError,
        seed,
    }
}

/// Check 3 — node-level generalization gaps decay with graph size: log-log
/// slope negative with Pearson r ≤ −0.85 over n ∈ {32..1024}, 10 trials.
fn c03_node_gap_decay() -> Result<String, String> {
    let task = default_node_task()?;
    let arch = Architecture::new(vec![1, 4, 1], 4, Activation::Tanh).map_err(estr)?;
    let report = node_sweep(
        &task,
        &arch,
        KernelKind::Epsilon,
        EpsilonRule::default_schedule(),
        &[32, 64, 128, 256, 512, 1024],
        10,
        &train_config(40, 0.0, 7),
        WeightMode::FixedRandom,
    )
    .map_err(estr)?;
    let fit = &report.fit;
    let detail = format!(
        "slope {:.3}, pearson {:.3}, {} excluded",
        fit.slope, fit.pearson, fit.excluded
    );
    if fit.degenerate {
        Err(format!("log-log fit degenerate ({detail})"))
    } else if fit.slope < 0.0 && fit.pearson <= -0.85 {
        Ok(format!("{detail} (thresholds: slope < 0, pearson ≤ −0.85)"))
    } else {
        Err(format!("{detail} violates slope < 0 or pearson ≤ −0.85"))
    }
}

/// Check 4 — the continuity regularizer works: trained continuity sums
/// strictly decrease in μ at every n, and the μ=1e-2 gap is below the μ=0
/// gap at ≥ 2 of 3 sizes (n ∈ {128, 256, 512}, 10 trials).
fn c04_regularizer_effect() -> Result<String, String> {
    let task = default_node_task()?;
    let arch = Architecture::new(vec![1, 4, 1], 4, Activation::Tanh).map_err(estr)?;
    let n_values = [128usize, 256, 512];
    let mus = [0.0, 1e-3, 1e-2];
    let reports = regularizer_sweep(
        &task,
        &arch,
        KernelKind::Epsilon,
        EpsilonRule::default_schedule(),
        &n_values,
        &mus,
        10,
        &train_config(150, 0.0, 11),
    )
    .map_err(estr)?;
    // Trial-mean trained continuity per (μ, n), and gap means per (μ, n).
    let reg_mean = |cells: &[manigap_core::harness::CellRecord], n: usize| {
        let vals: Vec<f64> = cells
            .iter()
            .filter(|c| c.n == n)
            .map(|c| c.reg_value)
            .collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    let gap_mean = |report: &manigap_core::harness::GapReport, n: usize| {
        report
            .stats
            .iter()
            .find(|s| s.n == n)
            .map(|s| s.mean)
            .expect("stat for every swept n")
    };
    let mut problems = Vec::new();
    let mut reg_lines = Vec::new();
    for &n in &n_values {
        let regs: Vec<f64> = reports.iter().map(|(_, r)| reg_mean(&r.cells, n)).collect();
        reg_lines.push(format!(
            "n={n}: R̄ {:.2}/{:.2}/{:.2}",
            regs[0], regs[1], regs[2]
        ));
        if !(regs[0] > regs[1] && regs[1] > regs[2]) {
            problems.push(format!(
                "trained continuity not strictly decreasing in μ at n={n} ({:.3} → {:.3} → {:.3})",
                regs[0], regs[1], regs[2]
            ));
        }
    }
    let improved = n_values
        .iter()
        .filter(|&&n| gap_mean(&reports[2].1, n) < gap_mean(&reports[0].1, n))
        .count();
    if improved < 2 {
        problems.push(format!(
            "gap at μ=1e-2 below μ=0 at only {improved} of 3 sizes"
        ));
    }
    let detail = format!("{}; gap improved at {improved}/3 sizes", reg_lines.join(", "));
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{} ({detail})", problems.join("; ")))
    }
}

/// Check 5 — graph-level transfer: mean |training readout − evaluation
/// readout| non-increasing in n for ≥ 3 of 4 consecutive size pairs on a
/// two-class circle task (radius 1 constant vs radius 1.5 first harmonic).
fn c05_readout_transfer() -> Result<String, String> {
    let class = |radius: f64, coeffs: Vec<f64>, label: f64| -> Result<GraphTaskItem, String> {
        let spec = ManifoldSpec::circle(radius).map_err(estr)?;
        Ok(GraphTaskItem {
            input: BandlimitedSignal::new(coeffs, spec.clone()).map_err(estr)?,
            spec,
            label,
        })
    };
    let task = GraphTask::new(vec![
        class(1.0, vec![1.0], 0.0)?,
        class(1.5, vec![0.0, 1.0], 1.0)?,
    ])
    .map_err(estr)?;
    let arch = Architecture::new(vec![1, 4, 1], 4, Activation::Tanh).map_err(estr)?;
    // Ten epochs: long enough for the two classes to separate, short enough
    // that the readouts retain their dependence on the sampled nodes (long
    // training drives the tanh network into saturation, where the readout
    // difference collapses to float noise with no size trend).
    let mut cfg = train_config(10, 0.0, 5);
    cfg.batch_size = 2;
    let report = graph_sweep(
        &task,
        &arch,
        KernelKind::Gaussian,
        EpsilonRule::default_schedule(),
        &[20, 40, 60, 80, 100],
        10,
        &cfg,
        100,
    )
    .map_err(estr)?;
    let means: Vec<f64> = report.readout_stats.iter().map(|s| s.mean).collect();
    let non_increasing = means.windows(2).filter(|w| w[1] <= w[0]).count();
    let shown: Vec<String> = means.iter().map(|m| format!("{m:.2e}")).collect();
    let detail = format!(
        "mean readout differences [{}], non-increasing on {non_increasing}/4 pairs",
        shown.join(", ")
    );
    if non_increasing >= 3 {
        Ok(detail)
    } else {
        Err(format!("{detail} (needs ≥ 3)"))
    }
}

/// Check 6 — reverse-mode gradients match central finite differences
/// (step 1e-5) per coordinate to 1e-4 relative error on 20 random Tanh
/// networks, regularizer term included.
fn c06_gradient_check() -> Result<String, String> {
    let mut rng = ChaCha12Rng::seed_from_u64(606);
    let mu = 0.25;
    let step = 1e-5;
    let mut worst = 0.0f64;
    let mut coords = 0usize;
    for case in 0..20u64 {
        let n = rng.gen_range(8..=16);
        let (_, graph) = circle_graph(n, 600 + case, KernelKind::Gaussian)?;
        let lam_max = lambda_max(&graph);
        let widths = match rng.gen_range(0..3) {
            0 => vec![1, rng.gen_range(1..=3)],
            1 => vec![1, rng.gen_range(1..=3), 1],
            _ => vec![1, 2, rng.gen_range(1..=2)],
        };
        let arch =
            Architecture::new(widths, rng.gen_range(1..=4), Activation::Tanh).map_err(estr)?;
        let params = random_params(&mut rng, &arch);
        let x = Array2::from_shape_fn((n, 1), |_| rng.gen_range(-1.0..1.0));
        // Targets offset from the current predictions by ±0.7 per node:
        // residuals stay one-signed under 1e-5 parameter perturbations, so
        // the absolute-error loss is smooth on the whole FD stencil.
        let base = gnn_forward(&arch, &params, &graph, x.view()).map_err(estr)?;
        let mut y = base.clone();
        for (j, v) in y.iter_mut().enumerate() {
            *v -= if j % 2 == 0 { 0.7 } else { -0.7 };
        }
        let target = Target::Values(y);
        let objective = |p: &ParamSet| -> Result<f64, String> {
            let out = gnn_forward(&arch, p, &graph, x.view()).map_err(estr)?;
            let loss = loss_value(LossKind::AbsError, out.view(), &target).map_err(estr)?;
            Ok(loss + mu * total_continuity(p, lam_max))
        };
        let analytic = grad_node(
            &arch,
            &params,
            &graph,
            x.view(),
            &target,
            LossKind::AbsError,
            mu,
            lam_max,
        )
        .map_err(estr)?;
        for l in 0..params.layers().len() {
            let dims = params.layers()[l].dim();
            for p in 0..dims.0 {
                for q in 0..dims.1 {
                    for k in 0..dims.2 {
                        let fd = {
                            let perturb = |delta: f64| -> Result<f64, String> {
                                let mut layers = params.layers().to_vec();
                                layers[l][[p, q, k]] += delta;
                                objective(&ParamSet::new(layers).map_err(estr)?)
                            };
                            (perturb(step)? - perturb(-step)?) / (2.0 * step)
                        };
                        let an = analytic.layers()[l][[p, q, k]];
                        let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-3);
                        worst = worst.max(rel);
                        coords += 1;
                    }
                }
            }
        }
    }
    if worst < 1e-4 {
        Ok(format!(
            "max per-coordinate relative error {worst:.2e} over {coords} coordinates < 1e-4"
        ))
    } else {
        Err(format!(
            "max per-coordinate relative error {worst:.2e} over {coords} coordinates ≥ 1e-4"
        ))
    }
}

/// Check 7 — node relabeling: forward outputs permute with the nodes and
/// graph readouts are invariant, both to 1e-10, on 20 random pairs.
fn c07_permutation_symmetry() -> Result<String, String> {
    let mut rng = ChaCha12Rng::seed_from_u64(707);
    let mut worst_equi = 0.0f64;
    let mut worst_inv = 0.0f64;
    for case in 0..20u64 {
        let n = rng.gen_range(8..=40);
        let (pts, graph) = circle_graph(n, 700 + case, KernelKind::Gaussian)?;
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        // Relabeled point set: row i of the new cloud is row perm[i] of the
        // old one, so the rebuilt graph is exactly the relabeled graph.
        let permuted = PointSet {
            points: ndarray::stack(
                ndarray::Axis(0),
                &perm.iter().map(|&j| pts.points.row(j)).collect::<Vec<_>>(),
            )
            .map_err(|e| e.to_string())?,
            intrinsic: match &pts.intrinsic {
                Some(intr) => Some(
                    ndarray::stack(
                        ndarray::Axis(0),
                        &perm.iter().map(|&j| intr.row(j)).collect::<Vec<_>>(),
                    )
                    .map_err(|e| e.to_string())?,
                ),
                None => None,
            },
            seed: pts.seed,
            spec: pts.spec.clone(),
        };
        let eps = EpsilonRule::default_schedule()
            .resolve(KernelKind::Gaussian, n, 1)
            .map_err(estr)?;
        let graph_p = build_graph(
            &permuted,
            KernelSpec::new(KernelKind::Gaussian, eps, 1).map_err(estr)?,
        )
        .map_err(estr)?;
        let arch = Architecture::new(
            vec![1, rng.gen_range(1..=3), 1],
            rng.gen_range(1..=4),
            Activation::Tanh,
        )
        .map_err(estr)?;
        let params = init_params(&arch, 7000 + case);
        let x = Array2::from_shape_fn((n, 1), |_| rng.gen_range(-1.0..1.0));
        let mut x_p = Array2::zeros((n, 1));
        for (i, &j) in perm.iter().enumerate() {
            x_p[[i, 0]] = x[[j, 0]];
        }
        let out = gnn_forward(&arch, &params, &graph, x.view()).map_err(estr)?;
        let out_p = gnn_forward(&arch, &params, &graph_p, x_p.view()).map_err(estr)?;
        for (i, &j) in perm.iter().enumerate() {
            worst_equi = worst_equi.max((out_p[[i, 0]] - out[[j, 0]]).abs());
        }
        let r = graph_readout(out.view());
        let r_p = graph_readout(out_p.view());
        worst_inv = worst_inv.max((r[0] - r_p[0]).abs());
    }
    if worst_equi <= 1e-10 && worst_inv <= 1e-10 {
        Ok(format!(
            "equivariance deviation {worst_equi:.2e}, readout-invariance deviation {worst_inv:.2e}, both ≤ 1e-10"
        ))
    } else {
        Err(format!(
            "equivariance deviation {worst_equi:.2e} / readout deviation {worst_inv:.2e} exceed 1e-10"
        ))
    }
}

/// ε^{d/2+1} through integer powers and a square root only.
fn eps_power_ref(eps: f64, d: usize) -> f64 {
    match d {
        1 => eps * eps.sqrt(),
        2 => eps * eps,
        3 => eps * eps * eps.sqrt(),
        _ => unreachable!("reference covers d ∈ {{1,2,3}}"),
    }
}

/// Check 8 — kernel weights match an independently arranged re-evaluation
/// to 1e-15 relative error on 10³ random inputs; unit-ball volumes match
/// their closed forms for d ∈ {1, 2, 3}.
fn c08_kernel_conformance() -> Result<String, String> {
    use std::f64::consts::PI;
    let closed = [2.0, PI, 4.0 * PI / 3.0];
    for (d, want) in (1..=3).zip(closed) {
        let got = unit_ball_volume(d);
        if ((got - want) / want).abs() > 1e-15 {
            return Err(format!(
                "unit ball volume d={d}: {got:.17} vs closed form {want:.17}"
            ));
        }
    }
    let four_pi_ref = |d: usize| -> f64 {
        let root = (4.0 * PI).sqrt();
        match d {
            1 => root,
            2 => 4.0 * PI,
            _ => 4.0 * PI * root,
        }
    };
    let mut rng = ChaCha12Rng::seed_from_u64(808);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let d = rng.gen_range(1..=3usize);
        let eps: f64 = rng.gen_range(0.05..2.0);
        let n = rng.gen_range(1..=4096usize);
        // A third of the cases sit exactly on or beyond the indicator
        // boundary to exercise both branches.
        let q = match case % 3 {
            0 => rng.gen_range(0.0..eps),
            1 => eps,
            _ => rng.gen_range(eps..4.0 * eps),
        };
        let g_ref = (-q / (4.0 * eps)).exp() / (eps_power_ref(eps, d) * four_pi_ref(d) * n as f64);
        let g = gaussian_weight(q, eps, d, n);
        let g_rel = ((g - g_ref) / g_ref).abs();
        let e_ref = if q > eps {
            0.0
        } else {
            (d as f64 + 2.0) / (eps_power_ref(eps, d) * closed[d - 1] * n as f64)
        };
        let e = epsilon_weight(q, eps, d, n);
        let e_rel = if e_ref == 0.0 {
            if e == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            ((e - e_ref) / e_ref).abs()
        };
        worst = worst.max(g_rel).max(e_rel);
    }
    if worst <= 1e-15 {
        Ok(format!(
            "max relative deviation {worst:.2e} ≤ 1e-15 over 1000 inputs; ball volumes exact for d ∈ {{1,2,3}}"
        ))
    } else {
        Err(format!("max relative deviation {worst:.2e} exceeds 1e-15"))
    }
}

/// Check 9 — with every filter rescaled to unit peak response on the
/// graph's spectrum, output column norms stay within F^{L−1}·‖x‖₂ on 20
/// random networks.
fn c09_nonexpansive_bound() -> Result<String, String> {
    let mut rng = ChaCha12Rng::seed_from_u64(909);
    let mut worst_ratio = 0.0f64;
    for case in 0..20u64 {
        let n = rng.gen_range(16..=48);
        let (_, graph) = circle_graph(n, 900 + case, KernelKind::Gaussian)?;
        let lambdas = eigvals_sym(&graph.lap_dense()).map_err(estr)?;
        let layers_n = rng.gen_range(2..=3usize);
        let f = rng.gen_range(2..=4usize);
        let mut widths = vec![1usize];
        widths.extend(std::iter::repeat_n(f, layers_n));
        let arch =
            Architecture::new(widths, rng.gen_range(1..=5), Activation::Tanh).map_err(estr)?;
        let raw = random_params(&mut rng, &arch);
        // Rescale each filter to max_i |ĥ(λ_i)| = 1 over the realized
        // spectrum.
        let layers = raw
            .layers()
            .iter()
            .map(|t| {
                let mut t = t.clone();
                let (fl, flm1, _) = t.dim();
                for p in 0..fl {
                    for q in 0..flm1 {
                        let h = FilterCoeffs::new(t.slice(s![p, q, ..]).to_vec())
                            .expect("nonempty taps");
                        let peak = lambdas
                            .iter()
                            .map(|&lam| graph_freq_response(&h, lam).abs())
                            .fold(0.0f64, f64::max);
                        if peak > 0.0 {
                            t.slice_mut(s![p, q, ..]).mapv_inplace(|v| v / peak);
                        }
                    }
                }
                t
            })
            .collect();
        let params = ParamSet::new(layers).map_err(estr)?;
        let x = Array2::from_shape_fn((n, 1), |_| rng.gen_range(-1.0..1.0));
        let out = gnn_forward(&arch, &params, &graph, x.view()).map_err(estr)?;
        let bound = (f as f64).powi(layers_n as i32 - 1) * norm2(x.column(0));
        for p in 0..out.ncols() {
            worst_ratio = worst_ratio.max(norm2(out.column(p)) / bound);
        }
    }
    if worst_ratio <= 1.0 + 1e-9 {
        Ok(format!(
            "max column-norm to bound ratio {worst_ratio:.4} ≤ 1 across 20 networks"
        ))
    } else {
        Err(format!(
            "column norm exceeds F^(L−1)·‖x‖ (worst ratio {worst_ratio:.4})"
        ))
    }
}

/// Check 10 — a graph network driven spectrally by the exponential response
/// converges to the manifold network sharing its taps: mean node-wise
/// discrepancy over n ∈ {128..1024}, averaged over 10 seeds, decreases
/// monotonically up to at most one inversion.
fn c10_mnn_gnn_consistency() -> Result<String, String> {
    let spec = ManifoldSpec::unit_circle();
    let arch = Architecture::new(vec![1, 4, 1], 4, Activation::Tanh).map_err(estr)?;
    let m_band = 5;
    let m_proj = default_m_proj(m_band);
    let grid = quadrature_grid(&spec, default_grid_size(m_proj)).map_err(estr)?;
    let ns = [128usize, 256, 512, 1024];
    let mut means = Vec::with_capacity(ns.len());
    for (ni, &n) in ns.iter().enumerate() {
        let mut total = 0.0;
        for seed in 0..10u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(10_000 + seed);
            let coeffs: Vec<f64> = (0..m_band).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let input = BandlimitedSignal::new(coeffs, spec.clone()).map_err(estr)?;
            let params = init_params(&arch, 20_000 + seed);
            let pts = sample_points(&spec, n, 30_000 + 97 * seed + ni as u64).map_err(estr)?;
            let eps = EpsilonRule::default_schedule()
                .resolve(KernelKind::Epsilon, n, 1)
                .map_err(estr)?;
            let graph = build_graph(
                &pts,
                KernelSpec::new(KernelKind::Epsilon, eps, 1).map_err(estr)?,
            )
            .map_err(estr)?;
            let decomp = eig_sym(&graph.lap_dense(), n).map_err(estr)?;
            let x = synthesize_signal(&input, &pts)
                .map_err(estr)?
                .insert_axis(ndarray::Axis(1));
            let g_out =
                gnn_forward_spectral(&arch, &params, &decomp, x.view(), ResponseKind::Exponential)
                    .map_err(estr)?;
            let m_out =
                mnn_forward_at(&arch, &params, &spec, &input, m_proj, &grid, &pts).map_err(estr)?;
            total += (&g_out - &m_out).mapv(f64::abs).mean().expect("nonempty");
        }
        means.push(total / 10.0);
    }
    let inversions = means.windows(2).filter(|w| w[1] >= w[0]).count();
    let detail = format!(
        "mean discrepancies {:?} over n ∈ {ns:?}, {inversions} inversion(s)",
        means.iter().map(|m| (m * 1e4).round() / 1e4).collect::<Vec<_>>()
    );
    if inversions <= 1 {
        Ok(detail)
    } else {
        Err(format!("{detail} (allowed at most one)"))
    }
}
