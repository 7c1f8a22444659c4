//! The experiment harness: empirical and statistical risks, generalization
//! gaps, node- and graph-level sweeps over sample size and regularizer
//! weight, the eigenvalue-convergence experiment, and log-log trend fits.
//!
//! Everything here is a pure function of (task, configuration, master seed).
//! Per-cell randomness — one sample draw, parameter init, or evaluation
//! graph per (n, trial) — comes from [`derive_seed`] with a fixed stream
//! tag, so sweep cells can run concurrently and are aggregated in key order.
//! The training config's `seed` doubles as the sweep's master seed.
//!
//! Two estimators approximate the statistical risk (an integral over the
//! manifold): `ExactMnn` evaluates the manifold network on a quadrature
//! grid, `FreshGraph` is the Monte-Carlo estimate on a newly sampled
//! evaluation graph. Node sweeps default to `FreshGraph` with
//! [`DEFAULT_EVAL_N`] nodes, the evaluation graph being shared across the
//! n-axis within a trial so gaps at different n are paired.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{build_graph, EpsilonRule, KernelGraph, KernelKind, KernelSpec};
use crate::manifold::{
    analytic_spectrum, quadrature_grid, sample_points, synthesize_signal, BandlimitedSignal,
    ManifoldSpec,
};
use crate::neural::{
    default_m_proj, gnn_forward, graph_readout, init_params, loss_value, loss_value_weighted,
    mnn_forward, total_continuity, train_graphs, train_node, Architecture, LossKind, ParamSet,
    Target, TrainConfig,
};
use crate::seed::derive_seed;
use crate::spectral::{eig_graph, eigvals_sym, lambda_max, DENSE_EIG_LIMIT};

/// Seed stream tags: the first derivation tag names the random stream.
const STREAM_SAMPLE: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_EVAL: u64 = 3;
const STREAM_SHUFFLE: u64 = 4;

/// Default evaluation-graph size for Monte-Carlo statistical risks.
pub const DEFAULT_EVAL_N: usize = 4096;

/// A node-level regression task: learn to map one manifold signal to
/// another, supervised at the sampled nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTask {
    spec: ManifoldSpec,
    input: BandlimitedSignal,
    target: BandlimitedSignal,
}

impl NodeTask {
    pub fn new(input: BandlimitedSignal, target: BandlimitedSignal) -> Result<Self> {
        if input.spec() != target.spec() {
            return Err(Error::invalid_argument(
                "input and target signals live on different manifolds".to_string(),
            ));
        }
        let spec = input.spec().clone();
        Ok(NodeTask {
            spec,
            input,
            target,
        })
    }

    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    pub fn input(&self) -> &BandlimitedSignal {
        &self.input
    }

    pub fn target(&self) -> &BandlimitedSignal {
        &self.target
    }
}

/// One manifold of a graph-level task: where to sample, what signal the
/// nodes carry, and the graph's label.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTaskItem {
    pub spec: ManifoldSpec,
    pub input: BandlimitedSignal,
    pub label: f64,
}

/// A graph-level task: a family of labeled manifolds, each contributing one
/// sampled graph per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTask {
    items: Vec<GraphTaskItem>,
}

impl GraphTask {
    pub fn new(items: Vec<GraphTaskItem>) -> Result<Self> {
        if items.len() < 2 {
            return Err(Error::invalid_argument(format!(
                "a graph task needs at least two manifolds, got {}",
                items.len()
            )));
        }
        for (k, item) in items.iter().enumerate() {
            if !item.label.is_finite() {
                return Err(Error::invalid_argument(format!(
                    "label of manifold {k} is not finite"
                )));
            }
            if item.input.spec() != &item.spec {
                return Err(Error::invalid_argument(format!(
                    "input signal of manifold {k} lives on a different manifold"
                )));
            }
        }
        Ok(GraphTask { items })
    }

    pub fn items(&self) -> &[GraphTaskItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.items.iter().map(|i| i.label).collect()
    }
}

/// Whether sweep cells train the network or evaluate it at its random
/// initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    Trained,
    FixedRandom,
}

/// What the `gap` column of a report measures: loss gaps, or accuracy gaps
/// in percentage points (classification only).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapMode {
    Loss,
    Accuracy,
}

/// Statistical-risk estimator.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    /// Quadrature evaluation of the manifold network on `grid` nodes.
    /// Requires an analytic manifold.
    ExactMnn { grid: usize },
    /// Monte-Carlo estimate on a freshly sampled evaluation graph.
    FreshGraph {
        n_eval: usize,
        kernel: KernelKind,
        rule: EpsilonRule,
        seed: u64,
    },
}

fn values_to_classes(y: ArrayView1<f64>) -> Result<Vec<usize>> {
    y.iter()
        .map(|&v| {
            if v.is_finite() && v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::invalid_argument(format!(
                    "cross-entropy labels must be nonnegative integers, got {v}"
                )))
            }
        })
        .collect()
}

/// Builds the loss target from scalar labels: a value column for absolute
/// error, class indices for cross-entropy.
fn label_target(labels: &[f64], kind: LossKind) -> Result<Target> {
    if let Some(bad) = labels.iter().find(|l| !l.is_finite()) {
        return Err(Error::invalid_argument(format!(
            "labels must be finite, got {bad}"
        )));
    }
    let col = Array1::from_iter(labels.iter().copied());
    match kind {
        LossKind::AbsError => Ok(Target::Values(col.insert_axis(Axis(1)))),
        LossKind::CrossEntropy => Ok(Target::Classes(values_to_classes(col.view())?)),
    }
}

/// Fraction of rows whose largest logit sits at the labeled class; ties
/// resolve to the lowest index for determinism.
pub(crate) fn accuracy(readouts: ArrayView2<f64>, classes: &[usize]) -> f64 {
    let correct = readouts
        .rows()
        .into_iter()
        .zip(classes.iter())
        .filter(|(row, &class)| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best == class
        })
        .count();
    correct as f64 / classes.len() as f64
}

/// Mean training loss over the nodes of one sampled graph,
/// `(1/N) Σ_i ℓ([Φ(H, L_N, x)]_i, y_i)`.
///
/// For cross-entropy the label vector holds class indices (as reals).
pub fn empirical_risk_node(
    arch: &Architecture,
    params: &ParamSet,
    graph: &KernelGraph,
    x: ArrayView1<f64>,
    y: ArrayView1<f64>,
    kind: LossKind,
) -> Result<f64> {
    let n = graph.n();
    if x.len() != n || y.len() != n {
        return Err(Error::invalid_argument(format!(
            "graph has {n} nodes but input has {} and labels {}",
            x.len(),
            y.len()
        )));
    }
    let xm = x.insert_axis(Axis(1));
    let out = gnn_forward(arch, params, graph, xm)?;
    let target = match kind {
        LossKind::AbsError => Target::Values(y.to_owned().insert_axis(Axis(1))),
        LossKind::CrossEntropy => Target::Classes(values_to_classes(y)?),
    };
    loss_value(kind, out.view(), &target)
}

/// Statistical risk of a node task, `∫ ℓ(Φ(H, L_ρ, f)(x), g(x)) dμ(x)`,
/// under the chosen estimator.
///
/// Node tasks supervise with value signals, so only the absolute-error loss
/// applies here.
pub fn statistical_risk_node(
    arch: &Architecture,
    params: &ParamSet,
    task: &NodeTask,
    estimator: &Estimator,
    kind: LossKind,
) -> Result<f64> {
    if kind == LossKind::CrossEntropy {
        return Err(Error::invalid_argument(
            "node tasks supervise with value signals; cross-entropy does not apply".to_string(),
        ));
    }
    match *estimator {
        Estimator::ExactMnn { grid } => {
            let m_proj =
                default_m_proj(task.input.bandlimit().max(task.target.bandlimit()));
            let grid = quadrature_grid(&task.spec, grid)?;
            let out = mnn_forward(arch, params, &task.spec, &task.input, m_proj, &grid)?;
            let y = synthesize_signal(&task.target, &grid.nodes)?;
            let target = Target::Values(y.insert_axis(Axis(1)));
            loss_value_weighted(kind, out.view(), &target, grid.weights.view())
        }
        Estimator::FreshGraph {
            n_eval,
            kernel,
            rule,
            seed,
        } => {
            let dim = task.spec.intrinsic_dim();
            let pts = sample_points(&task.spec, n_eval, seed)?;
            let eps = rule.resolve(kernel, n_eval, dim)?;
            let graph = build_graph(&pts, KernelSpec::new(kernel, eps, dim)?)?;
            let x = synthesize_signal(&task.input, &pts)?;
            let y = synthesize_signal(&task.target, &pts)?;
            empirical_risk_node(arch, params, &graph, x.view(), y.view(), kind)
        }
    }
}

/// The generalization gap `|R_M − R_G|` at one parameter set.
pub fn generalization_gap(empirical: f64, statistical: f64) -> Result<f64> {
    if !(empirical.is_finite() && statistical.is_finite()) {
        return Err(Error::invalid_argument(format!(
            "risks must be finite, got empirical {empirical} and statistical {statistical}"
        )));
    }
    Ok((statistical - empirical).abs())
}

/// Sum of per-graph losses over node-mean readouts: the target is built
/// from `labels` according to the loss kind (see [`label_target`]).
fn risk_from_readouts(readouts: &Array2<f64>, labels: &[f64], kind: LossKind) -> Result<f64> {
    let target = label_target(labels, kind)?;
    Ok(readouts.nrows() as f64 * loss_value(kind, readouts.view(), &target)?)
}

/// Training loss of a graph-level model,
/// `Σ_k ℓ((1/N_k) Σ_i [Φ(H, L_{N,k}, x_k)]_i, y_k)` — a sum over graphs,
/// not a mean.
pub fn empirical_risk_graph(
    arch: &Architecture,
    params: &ParamSet,
    graphs: &[KernelGraph],
    inputs: &[Array2<f64>],
    labels: &[f64],
    kind: LossKind,
) -> Result<f64> {
    if graphs.is_empty() || graphs.len() != inputs.len() || graphs.len() != labels.len() {
        return Err(Error::invalid_argument(format!(
            "got {} graphs, {} inputs, {} labels",
            graphs.len(),
            inputs.len(),
            labels.len()
        )));
    }
    let f_out = *arch.features().last().expect("validated architecture");
    let mut readouts = Array2::zeros((graphs.len(), f_out));
    for (k, (graph, x)) in graphs.iter().zip(inputs.iter()).enumerate() {
        let out = gnn_forward(arch, params, graph, x.view())?;
        readouts.row_mut(k).assign(&graph_readout(out.view()));
    }
    risk_from_readouts(&readouts, labels, kind)
}

/// Manifold-mean readout of every task manifold under the chosen estimator:
/// quadrature-weighted means for `ExactMnn`, node means of freshly sampled
/// graphs for `FreshGraph` (per-manifold seeds derived from the estimator
/// seed).
fn statistical_readouts(
    arch: &Architecture,
    params: &ParamSet,
    task: &GraphTask,
    estimator: &Estimator,
) -> Result<Array2<f64>> {
    let f_out = *arch.features().last().expect("validated architecture");
    let mut readouts = Array2::zeros((task.len(), f_out));
    for (k, item) in task.items().iter().enumerate() {
        match *estimator {
            Estimator::ExactMnn { grid } => {
                let m_proj = default_m_proj(item.input.bandlimit());
                let grid = quadrature_grid(&item.spec, grid)?;
                let out = mnn_forward(arch, params, &item.spec, &item.input, m_proj, &grid)?;
                for p in 0..f_out {
                    readouts[[k, p]] = grid.weights.dot(&out.column(p));
                }
            }
            Estimator::FreshGraph {
                n_eval,
                kernel,
                rule,
                seed,
            } => {
                let dim = item.spec.intrinsic_dim();
                let pts = sample_points(&item.spec, n_eval, derive_seed(seed, &[k as u64]))?;
                let eps = rule.resolve(kernel, n_eval, dim)?;
                let graph = build_graph(&pts, KernelSpec::new(kernel, eps, dim)?)?;
                let x = synthesize_signal(&item.input, &pts)?.insert_axis(Axis(1));
                let out = gnn_forward(arch, params, &graph, x.view())?;
                readouts.row_mut(k).assign(&graph_readout(out.view()));
            }
        }
    }
    Ok(readouts)
}

/// Statistical risk of a graph task,
/// `Σ_k ℓ(∫ Φ(H, L_{ρ,k}, f_k) dμ_k, y_k)`, with the readout integral
/// approximated by the chosen estimator.
pub fn statistical_risk_graph(
    arch: &Architecture,
    params: &ParamSet,
    task: &GraphTask,
    estimator: &Estimator,
    kind: LossKind,
) -> Result<f64> {
    let readouts = statistical_readouts(arch, params, task, estimator)?;
    risk_from_readouts(&readouts, &task.labels(), kind)
}

/// One sweep cell's record. Accuracies are present only for cross-entropy
/// tasks; `flag_overfit` marks cells whose training accuracy exceeds 95%.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub n: usize,
    pub trial: usize,
    pub empirical_risk: f64,
    pub statistical_risk: f64,
    pub gap: f64,
    pub train_acc: Option<f64>,
    pub eval_acc: Option<f64>,
    pub reg_value: f64,
    pub flag_overfit: bool,
}

/// Per-n gap statistics over trials (standard deviation with one delta
/// degree of freedom; zero for a single trial).
#[derive(Debug, Clone, PartialEq)]
pub struct GapStat {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

/// Least-squares fit of `ln(gap)` on `ln(n)` with its Pearson correlation.
/// `excluded` counts points dropped for nonpositive (or non-finite) gaps;
/// `degenerate` marks fits with fewer than 3 usable points (all
/// coefficients zero) or a collapsed abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub pearson: f64,
    pub excluded: usize,
    pub degenerate: bool,
}

/// A sweep's full output: per-cell records, per-n gap statistics, and
/// log-log fits on trial-mean gaps (`fit` over all cells, `fit_unflagged`
/// recomputed without overfitting-flagged cells).
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub mode: GapMode,
    pub cells: Vec<CellRecord>,
    pub stats: Vec<GapStat>,
    pub fit: LogLogFit,
    pub fit_unflagged: LogLogFit,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

impl GapReport {
    /// The distinct sample sizes, ascending.
    pub fn n_values(&self) -> Vec<usize> {
        self.stats.iter().map(|s| s.n).collect()
    }

    /// Per-cell CSV. Booleans are 0/1; accuracy fields are empty for
    /// regression tasks.
    pub fn cells_csv(&self) -> String {
        let mut out =
            String::from("n,trial,empirical_risk,statistical_risk,gap,train_acc,eval_acc,reg_value,flag_overfit\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{:.16e},{:.16e},{:.16e},{},{},{:.16e},{}\n",
                c.n,
                c.trial,
                c.empirical_risk,
                c.statistical_risk,
                c.gap,
                fmt_opt(c.train_acc),
                fmt_opt(c.eval_acc),
                c.reg_value,
                u8::from(c.flag_overfit)
            ));
        }
        out
    }

    /// Summary CSV `n,gap_mean,gap_std` with two footer records carrying
    /// the fits: `fit,slope,intercept,pearson,excluded,degenerate` and the
    /// same under `fit_unflagged`.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("n,gap_mean,gap_std\n");
        for s in &self.stats {
            out.push_str(&format!("{},{:.16e},{:.16e}\n", s.n, s.mean, s.std));
        }
        for (name, f) in [("fit", &self.fit), ("fit_unflagged", &self.fit_unflagged)] {
            out.push_str(&format!(
                "{name},{:.16e},{:.16e},{:.16e},{},{}\n",
                f.slope,
                f.intercept,
                f.pearson,
                f.excluded,
                u8::from(f.degenerate)
            ));
        }
        out
    }

    /// Rebuilds the report with accuracy gaps `|train − eval|` in
    /// percentage points; `None` unless every cell carries accuracies.
    pub fn accuracy_mode(&self) -> Option<GapReport> {
        let cells: Option<Vec<CellRecord>> = self
            .cells
            .iter()
            .map(|c| {
                let (ta, ea) = (c.train_acc?, c.eval_acc?);
                Some(CellRecord {
                    gap: (ta - ea).abs() * 100.0,
                    ..c.clone()
                })
            })
            .collect();
        Some(build_report(GapMode::Accuracy, cells?).expect("aggregation of existing cells"))
    }
}

/// Sample mean and standard deviation (one delta degree of freedom).
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Least-squares fit of `ln(gap)` on `ln(n)` (natural logarithms) plus the
/// Pearson correlation of the same pairs. Points with nonpositive or
/// non-finite gaps are excluded and counted; fewer than 3 surviving points
/// (or a constant abscissa) produce an all-zero degenerate fit. Constant
/// gaps give slope 0 and, by convention, correlation 0.
pub fn loglog_fit(n_values: &[usize], gap_means: &[f64]) -> Result<LogLogFit> {
    if n_values.len() != gap_means.len() {
        return Err(Error::invalid_argument(format!(
            "{} sample sizes against {} gap means",
            n_values.len(),
            gap_means.len()
        )));
    }
    let pts: Vec<(f64, f64)> = n_values
        .iter()
        .zip(gap_means.iter())
        .filter(|&(&n, &g)| n > 0 && g.is_finite() && g > 0.0)
        .map(|(&n, &g)| ((n as f64).ln(), g.ln()))
        .collect();
    let excluded = n_values.len() - pts.len();
    let degenerate = LogLogFit {
        slope: 0.0,
        intercept: 0.0,
        pearson: 0.0,
        excluded,
        degenerate: true,
    };
    if pts.len() < 3 {
        return Ok(degenerate);
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Ok(degenerate);
    }
    let slope = sxy / sxx;
    let pearson = if syy == 0.0 {
        0.0
    } else {
        (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
    };
    Ok(LogLogFit {
        slope,
        intercept: my - slope * mx,
        pearson,
        excluded,
        degenerate: false,
    })
}

/// Sorts cells by (n, trial), computes per-n statistics, and fits the
/// trends (once over everything, once without overfitting-flagged cells).
fn build_report(mode: GapMode, mut cells: Vec<CellRecord>) -> Result<GapReport> {
    cells.sort_by_key(|c| (c.n, c.trial));
    let mut stats: Vec<GapStat> = Vec::new();
    let mut un_ns: Vec<usize> = Vec::new();
    let mut un_means: Vec<f64> = Vec::new();
    let mut i = 0;
    while i < cells.len() {
        let n = cells[i].n;
        let mut gaps = Vec::new();
        let mut unflagged = Vec::new();
        while i < cells.len() && cells[i].n == n {
            gaps.push(cells[i].gap);
            if !cells[i].flag_overfit {
                unflagged.push(cells[i].gap);
            }
            i += 1;
        }
        let (mean, std) = mean_std(&gaps);
        stats.push(GapStat { n, mean, std });
        if !unflagged.is_empty() {
            un_ns.push(n);
            un_means.push(mean_std(&unflagged).0);
        }
    }
    let ns: Vec<usize> = stats.iter().map(|s| s.n).collect();
    let means: Vec<f64> = stats.iter().map(|s| s.mean).collect();
    let fit = loglog_fit(&ns, &means)?;
    let fit_unflagged = loglog_fit(&un_ns, &un_means)?;
    Ok(GapReport {
        mode,
        cells,
        stats,
        fit,
        fit_unflagged,
    })
}

fn validate_sweep_axes(n_values: &[usize], trials: usize) -> Result<()> {
    if n_values.is_empty() {
        return Err(Error::invalid_argument(
            "a sweep needs at least one sample size".to_string(),
        ));
    }
    if n_values[0] == 0 {
        return Err(Error::invalid_argument(
            "sample sizes must be positive".to_string(),
        ));
    }
    if n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid_argument(
            "sample sizes must be strictly ascending".to_string(),
        ));
    }
    if trials == 0 {
        return Err(Error::invalid_argument(
            "a sweep needs at least one trial".to_string(),
        ));
    }
    Ok(())
}

/// Prefixes string-carrying errors with the failing cell's coordinates.
fn cell_context(err: Error, n: usize, trial: usize) -> Error {
    let tag = format!("n={n}, trial={trial}");
    match err {
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("[{tag}] {m}")),
        Error::InvalidSpec(m) => Error::InvalidSpec(format!("[{tag}] {m}")),
        Error::Unsupported(m) => Error::Unsupported(format!("[{tag}] {m}")),
        Error::Numeric(m) => Error::Numeric(format!("[{tag}] {m}")),
        Error::InvalidMesh(m) => Error::InvalidMesh(format!("[{tag}] {m}")),
        other => other,
    }
}

fn sweep_jobs(n_values: &[usize], trials: usize) -> Vec<(usize, usize)> {
    n_values
        .iter()
        .flat_map(|&n| (0..trials).map(move |t| (n, t)))
        .collect()
}

#[allow(clippy::too_many_arguments)] // one cell is defined by exactly these knobs
fn node_cell(
    task: &NodeTask,
    arch: &Architecture,
    kernel: KernelKind,
    rule: EpsilonRule,
    n: usize,
    trial: usize,
    cfg: &TrainConfig,
    mode: WeightMode,
) -> Result<CellRecord> {
    let master = cfg.seed;
    let dim = task.spec.intrinsic_dim();
    let sample_seed = derive_seed(master, &[STREAM_SAMPLE, n as u64, trial as u64]);
    // Weights and the evaluation graph depend on the trial only, so gaps
    // along the n-axis are paired comparisons.
    let init_seed = derive_seed(master, &[STREAM_INIT, trial as u64]);
    let eval_seed = derive_seed(master, &[STREAM_EVAL, trial as u64]);
    let pts = sample_points(&task.spec, n, sample_seed)?;
    let eps = rule.resolve(kernel, n, dim)?;
    let graph = build_graph(&pts, KernelSpec::new(kernel, eps, dim)?)?;
    let x = synthesize_signal(&task.input, &pts)?;
    let y = synthesize_signal(&task.target, &pts)?;
    let params = match mode {
        WeightMode::FixedRandom => init_params(arch, init_seed),
        WeightMode::Trained => {
            let target = Target::Values(y.clone().insert_axis(Axis(1)));
            let xm = x.view().insert_axis(Axis(1));
            train_node(arch, init_seed, &graph, xm, &target, cfg)?.0
        }
    };
    let empirical_risk = empirical_risk_node(arch, &params, &graph, x.view(), y.view(), cfg.loss)?;
    let estimator = Estimator::FreshGraph {
        n_eval: DEFAULT_EVAL_N,
        kernel,
        rule,
        seed: eval_seed,
    };
    let statistical_risk = statistical_risk_node(arch, &params, task, &estimator, cfg.loss)?;
    let gap = generalization_gap(empirical_risk, statistical_risk)?;
    let reg_value = total_continuity(&params, lambda_max(&graph));
    Ok(CellRecord {
        n,
        trial,
        empirical_risk,
        statistical_risk,
        gap,
        train_acc: None,
        eval_acc: None,
        reg_value,
        flag_overfit: false,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_node_cells(
    task: &NodeTask,
    arch: &Architecture,
    kernel: KernelKind,
    rule: EpsilonRule,
    n_values: &[usize],
    trials: usize,
    cfg: &TrainConfig,
    mode: WeightMode,
) -> Result<Vec<CellRecord>> {
    sweep_jobs(n_values, trials)
        .into_par_iter()
        .map(|(n, trial)| {
            node_cell(task, arch, kernel, rule, n, trial, cfg, mode)
                .map_err(|e| cell_context(e, n, trial))
        })
        .collect()
}

/// Node-level gap sweep: per (n, trial) sample a graph, optionally train,
/// and record both risks and their gap; statistical risk uses the default
/// fresh-graph estimator ([`DEFAULT_EVAL_N`] nodes, same kernel and rule).
///
/// The training config's `seed` is the sweep master seed; n values must be
/// strictly ascending.
#[allow(clippy::too_many_arguments)]
pub fn node_sweep(
    task: &NodeTask,
    arch: &Architecture,
    kernel: KernelKind,
    rule: EpsilonRule,
    n_values: &[usize],
    trials: usize,
    cfg: &TrainConfig,
    mode: WeightMode,
) -> Result<GapReport> {
    validate_sweep_axes(n_values, trials)?;
    cfg.validate()?;
    if cfg.loss == LossKind::CrossEntropy {
        return Err(Error::invalid_argument(
            "node sweeps supervise with value signals; use the absolute-error loss".to_string(),
        ));
    }
    let cells = run_node_cells(task, arch, kernel, rule, n_values, trials, cfg, mode)?;
    build_report(GapMode::Loss, cells)
}

/// Regularizer sweep: one trained node sweep per μ value, sharing all seeds
/// across μ so reports differ only through the regularizer (μ = 0
/// reproduces [`node_sweep`] in `Trained` mode exactly). Returns the
/// reports keyed by μ; repeated μ entries yield identical reports.
#[allow(clippy::too_many_arguments)]
pub fn regularizer_sweep(
    task: &NodeTask,
    arch: &Architecture,
    kernel: KernelKind,
    rule: EpsilonRule,
    n_values: &[usize],
    mu_values: &[f64],
    trials: usize,
    cfg: &TrainConfig,
) -> Result<Vec<(f64, GapReport)>> {
    validate_sweep_axes(n_values, trials)?;
    if mu_values.is_empty() {
        return Err(Error::invalid_argument(
            "a regularizer sweep needs at least one μ value".to_string(),
        ));
    }
    if mu_values.iter().any(|m| !m.is_finite() || *m < 0.0) {
        return Err(Error::invalid_argument(
            "regularizer weights must be finite and nonnegative".to_string(),
        ));
    }
    if cfg.loss == LossKind::CrossEntropy {
        return Err(Error::invalid_argument(
            "node sweeps supervise with value signals; use the absolute-error loss".to_string(),
        ));
    }
    mu_values
        .iter()
        .map(|&mu| {
            let mu_cfg = TrainConfig {
                reg_weight: mu,
                ..cfg.clone()
            };
            mu_cfg.validate()?;
            let cells = run_node_cells(
                task,
                arch,
                kernel,
                rule,
                n_values,
                trials,
                &mu_cfg,
                WeightMode::Trained,
            )?;
            Ok((mu, build_report(GapMode::Loss, cells)?))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn graph_cell(
    task: &GraphTask,
    arch: &Architecture,
    kernel: KernelKind,
    rule: EpsilonRule,
    n: usize,
    trial: usize,
    cfg: &TrainConfig,
    eval_n: usize,
) -> Result<(CellRecord, f64)> {
    let master = cfg.seed;
    let labels = task.labels();
    let f_out = *arch.features().last().expect("validated architecture");

    let build_at = |size: usize, stream: &[u64], k: usize| -> Result<(KernelGraph, Array2<f64>)> {
        let item = &task.items()[k];
        let dim = item.spec.intrinsic_dim();
        let pts = sample_points(&item.spec, size, derive_seed(master, stream))?;
        let eps = rule.resolve(kernel, size, dim)?;
        let graph = build_graph(&pts, KernelSpec::new(kernel, eps, dim)?)?;
        let x = synthesize_signal(&item.input, &pts)?.insert_axis(Axis(1));
        Ok((graph, x))
    };

    let mut train_set = Vec::with_capacity(task.len());
    for k in 0..task.len() {
        train_set.push(build_at(
            n,
            &[STREAM_SAMPLE, n as u64, trial as u64, k as u64],
            k,
        )?);
    }
    let targets = label_target(&labels, cfg.loss)?;
    let init_seed = derive_seed(master, &[STREAM_INIT, trial as u64]);
    let cell_cfg = TrainConfig {
        seed: derive_seed(master, &[STREAM_SHUFFLE, n as u64, trial as u64]),
        ..cfg.clone()
    };
    let samples: Vec<(&KernelGraph, Array2<f64>)> =
        train_set.iter().map(|(g, x)| (g, x.clone())).collect();
    let (params, _) = train_graphs(arch, init_seed, &samples, &targets, &cell_cfg)?;

    let mut train_readouts = Array2::zeros((task.len(), f_out));
    for (k, (graph, x)) in train_set.iter().enumerate() {
        let out = gnn_forward(arch, &params, graph, x.view())?;
        train_readouts.row_mut(k).assign(&graph_readout(out.view()));
    }
    // The evaluation graphs depend on (trial, manifold) only, so readout
    // differences along the n-axis are paired.
    let mut eval_readouts = Array2::zeros((task.len(), f_out));
    for k in 0..task.len() {
        let (graph, x) = build_at(eval_n, &[STREAM_EVAL, trial as u64, k as u64], k)?;
        let out = gnn_forward(arch, &params, &graph, x.view())?;
        eval_readouts.row_mut(k).assign(&graph_readout(out.view()));
    }

    let empirical_risk = risk_from_readouts(&train_readouts, &labels, cfg.loss)?;
    let statistical_risk = risk_from_readouts(&eval_readouts, &labels, cfg.loss)?;
    let gap = generalization_gap(empirical_risk, statistical_risk)?;
    let readout_diff = (&train_readouts - &eval_readouts)
        .mapv(f64::abs)
        .mean()
        .expect("nonempty readouts");
    let (train_acc, eval_acc) = match cfg.loss {
        LossKind::CrossEntropy => {
            let classes = values_to_classes(Array1::from_iter(labels.iter().copied()).view())?;
            (
                Some(accuracy(train_readouts.view(), &classes)),
                Some(accuracy(eval_readouts.view(), &classes)),
            )
        }
        LossKind::AbsError => (None, None),
    };
    let lam = train_set
        .iter()
        .map(|(g, _)| lambda_max(g))
        .fold(0.0f64, f64::max);
    let reg_value = total_continuity(&params, lam);
    Ok((
        CellRecord {
            n,
            trial,
            empirical_risk,
            statistical_risk,
            gap,
            train_acc,
            eval_acc,
            reg_value,
            flag_overfit: train_acc.is_some_and(|a| a > 0.95),
        },
        readout_diff,
    ))
}

/// One (n, trial) readout-transfer record of a graph sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutRecord {
    pub n: usize,
    pub trial: usize,
    pub diff: f64,
}

/// A graph sweep's output: the risk-gap report plus the readout-transfer
/// measurements (mean absolute difference between training-graph and
/// evaluation-graph readouts, averaged over manifolds).
#[derive(Debug, Clone, PartialEq)]
pub struct GraphGapReport {
    pub gaps: GapReport,
    pub readouts: Vec<ReadoutRecord>,
    pub readout_stats: Vec<GapStat>,
}

impl GraphGapReport {
    /// Per-cell CSV `n,trial,readout_diff`.
    pub fn readout_csv(&self) -> String {
        let mut out = String::from("n,trial,readout_diff\n");
        for r in &self.readouts {
            out.push_str(&format!("{},{},{:.16e}\n", r.n, r.trial, r.diff));
        }
        out
    }

    /// Summary CSV `n,readout_mean,readout_std`.
    pub fn readout_summary_csv(&self) -> String {
        let mut out = String::from("n,readout_mean,readout_std\n");
        for s in &self.readout_stats {
            out.push_str(&format!("{},{:.16e},{:.16e}\n", s.n, s.mean, s.std));
        }
        out
    }
}

/// Graph-level transfer sweep: per (n, trial) train on size-n graphs (one
/// per manifold), then compare against freshly sampled size-`eval_n` graphs
/// — both as a risk gap and as the paper-style readout difference.
#[allow(clippy::too_many_arguments)]
pub fn graph_sweep(
    task: &GraphTask,
    arch: &Architecture,
    kernel: KernelKind,
    rule: EpsilonRule,
    n_values: &[usize],
    trials: usize,
    cfg: &TrainConfig,
    eval_n: usize,
) -> Result<GraphGapReport> {
    validate_sweep_axes(n_values, trials)?;
    cfg.validate()?;
    let n_max = *n_values.last().expect("validated nonempty");
    if eval_n < n_max {
        return Err(Error::invalid_argument(format!(
            "evaluation size {eval_n} is below the largest training size {n_max}"
        )));
    }
    let results: Result<Vec<(CellRecord, f64)>> = sweep_jobs(n_values, trials)
        .into_par_iter()
        .map(|(n, trial)| {
            graph_cell(task, arch, kernel, rule, n, trial, cfg, eval_n)
                .map_err(|e| cell_context(e, n, trial))
        })
        .collect();
    let mut results = results?;
    results.sort_by_key(|r| (r.0.n, r.0.trial));
    let readouts: Vec<ReadoutRecord> = results
        .iter()
        .map(|(c, d)| ReadoutRecord {
            n: c.n,
            trial: c.trial,
            diff: *d,
        })
        .collect();
    let mut readout_stats = Vec::new();
    let mut i = 0;
    while i < readouts.len() {
        let n = readouts[i].n;
        let mut diffs = Vec::new();
        while i < readouts.len() && readouts[i].n == n {
            diffs.push(readouts[i].diff);
            i += 1;
        }
        let (mean, std) = mean_std(&diffs);
        readout_stats.push(GapStat { n, mean, std });
    }
    let gaps = build_report(GapMode::Loss, results.into_iter().map(|(c, _)| c).collect())?;
    Ok(GraphGapReport {
        gaps,
        readouts,
        readout_stats,
    })
}

/// One row of the eigenvalue-convergence table: the i-th analytic ratio
/// `λ_i/λ_2`, the trial-mean absolute error of the graph ratio
/// `λ_{i,N}/λ_{2,N}` against it, and how many trials were dropped for a
/// near-zero spectral gap (disconnected evaluation graph).
#[derive(Debug, Clone, PartialEq)]
pub struct EigRow {
    pub n: usize,
    pub i: usize,
    pub analytic_ratio: f64,
    pub mean_error: f64,
    pub excluded_trials: usize,
}

/// The eigenvalue-convergence experiment's table.
#[derive(Debug, Clone, PartialEq)]
pub struct EigConvReport {
    pub rows: Vec<EigRow>,
}

impl EigConvReport {
    /// CSV `n,i,analytic_ratio,mean_error,excluded_trials`.
    pub fn csv(&self) -> String {
        let mut out = String::from("n,i,analytic_ratio,mean_error,excluded_trials\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.16e},{:.16e},{}\n",
                r.n, r.i, r.analytic_ratio, r.mean_error, r.excluded_trials
            ));
        }
        out
    }

    /// The mean error of one (n, i) cell.
    pub fn error_at(&self, n: usize, i: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.n == n && r.i == i)
            .map(|r| r.mean_error)
    }
}

/// Smallest `k` Laplacian eigenvalues of a sampled graph (values only).
fn smallest_eigenvalues(graph: &KernelGraph, k: usize) -> Result<Array1<f64>> {
    if graph.n() <= DENSE_EIG_LIMIT {
        let all = eigvals_sym(&graph.lap_dense())?;
        Ok(all.slice(ndarray::s![..k.min(all.len())]).to_owned())
    } else {
        Ok(eig_graph(graph, k)?.eigenvalues)
    }
}

/// Eigenvalue-ratio convergence experiment: for each (n, trial), build a
/// graph with the scheduled bandwidth and measure
/// `|λ_{i,N}/λ_{2,N} − λ_i/λ_2|` for `2 ≤ i ≤ i_max` (the ratio removes the
/// unknown constant-density scaling). Trials whose spectral gap `λ_{2,N}`
/// falls below 1e-12 are excluded and counted; a cell with no surviving
/// trials reports a NaN mean error.
pub fn eig_convergence_run(
    spec: &ManifoldSpec,
    kernel: KernelKind,
    rule: EpsilonRule,
    n_values: &[usize],
    trials: usize,
    i_max: usize,
    master: u64,
) -> Result<EigConvReport> {
    validate_sweep_axes(n_values, trials)?;
    if !spec.is_analytic() {
        return Err(Error::invalid_argument(
            "eigenvalue convergence needs an analytic reference spectrum".to_string(),
        ));
    }
    if i_max < 2 {
        return Err(Error::invalid_argument(
            "ratio errors need at least the second eigenvalue (i_max ≥ 2)".to_string(),
        ));
    }
    let pairs = analytic_spectrum(spec, i_max)?;
    let lam2 = pairs[1].eigenvalue;
    if lam2 <= 0.0 {
        return Err(Error::invalid_argument(
            "the analytic spectral gap must be positive".to_string(),
        ));
    }
    let analytic: Vec<f64> = pairs.iter().map(|p| p.eigenvalue / lam2).collect();
    let dim = spec.intrinsic_dim();

    // Per (n, trial): either the per-i ratio errors or an exclusion marker.
    let trials_out: Result<Vec<(usize, Option<Vec<f64>>)>> = sweep_jobs(n_values, trials)
        .into_par_iter()
        .map(|(n, trial)| {
            let run = || -> Result<Option<Vec<f64>>> {
                let seed = derive_seed(master, &[STREAM_SAMPLE, n as u64, trial as u64]);
                let pts = sample_points(spec, n, seed)?;
                let eps = rule.resolve(kernel, n, dim)?;
                let graph = build_graph(&pts, KernelSpec::new(kernel, eps, dim)?)?;
                let vals = smallest_eigenvalues(&graph, i_max)?;
                if vals.len() < i_max {
                    return Err(Error::invalid_argument(format!(
                        "graph of {n} nodes cannot provide {i_max} eigenvalues"
                    )));
                }
                if vals[1].abs() < 1e-12 {
                    return Ok(None);
                }
                Ok(Some(
                    (2..=i_max)
                        .map(|i| (vals[i - 1] / vals[1] - analytic[i - 1]).abs())
                        .collect(),
                ))
            };
            run().map(|r| (n, r)).map_err(|e| cell_context(e, n, trial))
        })
        .collect();
    let trials_out = trials_out?;

    let mut rows = Vec::new();
    for &n in n_values {
        let cell: Vec<&Option<Vec<f64>>> = trials_out
            .iter()
            .filter(|(cn, _)| *cn == n)
            .map(|(_, r)| r)
            .collect();
        let excluded = cell.iter().filter(|r| r.is_none()).count();
        for i in 2..=i_max {
            let errs: Vec<f64> = cell
                .iter()
                .filter_map(|r| r.as_ref().map(|v| v[i - 2]))
                .collect();
            let mean_error = if errs.is_empty() {
                f64::NAN
            } else {
                mean_std(&errs).0
            };
            rows.push(EigRow {
                n,
                i,
                analytic_ratio: analytic[i - 1],
                mean_error,
                excluded_trials: excluded,
            });
        }
    }
    Ok(EigConvReport { rows })
}
