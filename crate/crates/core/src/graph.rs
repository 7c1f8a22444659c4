//! Kernel graphs over sampled point clouds and their Laplacians.
//!
//! Given points `x_1 … x_N` on a manifold of intrinsic dimension `d`, the
//! graph weights are kernel evaluations of squared ambient distances with a
//! density-estimation normalization chosen so the graph Laplacian
//! `L = diag(W·1) − W` converges to a weighted Laplace operator as N grows
//! and the bandwidth ε shrinks on the right schedule:
//!
//! * Gaussian kernel (dense):
//!   `W_ij = (1/N) · ε^{−(d/2+1)} (4π)^{−d/2} · exp(−‖x_i−x_j‖²/(4ε))`;
//! * indicator kernel (sparse):
//!   `W_ij = (1/N) · (d+2)/(ε^{d/2+1} α_d) · 1{‖x_i−x_j‖² ≤ ε}`,
//!   with `α_d` the volume of the d-dimensional unit ball and the boundary
//!   included.
//!
//! Diagonal entries are identically zero, so the Laplacian is self-loop
//! independent. Bandwidths come either fixed or from the connectivity
//! schedules `ε(n) = (ln(c/δ)/n)^{1/(d+4)}` (Gaussian) and
//! `ε(n) = (ln(c·n/δ)/n)^{1/(d+4)}` (indicator).

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::manifold::PointSet;

/// Graph-construction kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Dense Gaussian weights.
    Gaussian,
    /// Sparse indicator ("ε-graph") weights.
    Epsilon,
}

/// A kernel family with its bandwidth and the intrinsic dimension used in
/// the normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    kind: KernelKind,
    epsilon: f64,
    dim: usize,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, epsilon: f64, dim: usize) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::invalid_argument(format!(
                "kernel bandwidth must be positive and finite, got {epsilon}"
            )));
        }
        if dim == 0 {
            return Err(Error::invalid_argument(
                "kernel dimension must be at least 1".to_string(),
            ));
        }
        Ok(KernelSpec { kind, epsilon, dim })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// How the bandwidth is chosen when a graph is built for a given sample
/// size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonRule {
    /// Use this bandwidth verbatim.
    Fixed(f64),
    /// Use the kernel's connectivity schedule with constants `c`, `δ`.
    Schedule { c: f64, delta: f64 },
}

impl EpsilonRule {
    /// The schedule with the default constants c = 1, δ = 0.1.
    pub fn default_schedule() -> Self {
        EpsilonRule::Schedule { c: 1.0, delta: 0.1 }
    }

    /// Resolves the rule to a concrete bandwidth for `n` points in
    /// intrinsic dimension `dim`.
    pub fn resolve(&self, kind: KernelKind, n: usize, dim: usize) -> Result<f64> {
        match *self {
            EpsilonRule::Fixed(eps) => {
                if !(eps.is_finite() && eps > 0.0) {
                    return Err(Error::invalid_argument(format!(
                        "fixed bandwidth must be positive and finite, got {eps}"
                    )));
                }
                Ok(eps)
            }
            EpsilonRule::Schedule { c, delta } => epsilon_schedule(kind, n, dim, c, delta),
        }
    }
}

/// Symmetric weight matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightMatrix {
    /// Full N×N matrix (Gaussian kernel).
    Dense(Array2<f64>),
    /// Upper-triangle entries `(i, j, w)` with `i < j`, sorted
    /// lexicographically (indicator kernel).
    Sparse {
        n: usize,
        entries: Vec<(usize, usize, f64)>,
    },
}

impl WeightMatrix {
    pub fn n(&self) -> usize {
        match self {
            WeightMatrix::Dense(w) => w.nrows(),
            WeightMatrix::Sparse { n, .. } => *n,
        }
    }

    /// Number of undirected edges with nonzero weight.
    pub fn edge_count(&self) -> usize {
        match self {
            WeightMatrix::Dense(w) => {
                let n = w.nrows();
                (0..n)
                    .map(|i| ((i + 1)..n).filter(|&j| w[[i, j]] != 0.0).count())
                    .sum()
            }
            WeightMatrix::Sparse { entries, .. } => entries.len(),
        }
    }
}

/// A point cloud with its kernel weight matrix and node degrees.
#[derive(Debug, Clone)]
pub struct KernelGraph {
    points: PointSet,
    weights: WeightMatrix,
    degrees: Array1<f64>,
    kernel: KernelSpec,
}

impl KernelGraph {
    /// Number of nodes.
    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn degrees(&self) -> &Array1<f64> {
        &self.degrees
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// The weight W_ij (zero on the diagonal).
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        match &self.weights {
            WeightMatrix::Dense(w) => w[[a, b]],
            WeightMatrix::Sparse { entries, .. } => entries
                .binary_search_by(|&(ei, ej, _)| (ei, ej).cmp(&(a, b)))
                .map(|pos| entries[pos].2)
                .unwrap_or(0.0),
        }
    }

    /// Applies the unnormalized Laplacian: `(Lx)_i = deg_i·x_i − Σ_j W_ij·x_j`.
    pub fn lap_apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let n = self.n();
        assert_eq!(x.len(), n, "vector length must match the node count");
        match &self.weights {
            WeightMatrix::Dense(w) => &self.degrees * &x - w.dot(&x),
            WeightMatrix::Sparse { entries, .. } => {
                let mut y = &self.degrees * &x;
                for &(i, j, w) in entries {
                    y[i] -= w * x[j];
                    y[j] -= w * x[i];
                }
                y
            }
        }
    }

    /// Materializes the Laplacian as a dense matrix.
    pub fn lap_dense(&self) -> Array2<f64> {
        let n = self.n();
        let mut l = Array2::zeros((n, n));
        match &self.weights {
            WeightMatrix::Dense(w) => {
                l.assign(w);
                l.mapv_inplace(|v| -v);
            }
            WeightMatrix::Sparse { entries, .. } => {
                for &(i, j, w) in entries {
                    l[[i, j]] = -w;
                    l[[j, i]] = -w;
                }
            }
        }
        for i in 0..n {
            l[[i, i]] = self.degrees[i];
        }
        l
    }

    /// Serializes the edge list as CSV (`i,j,weight`, each undirected edge
    /// once with i < j, 0-based indices, 17 significant digits).
    pub fn edge_list_csv(&self) -> String {
        let mut out = String::from("i,j,weight\n");
        let mut push = |i: usize, j: usize, w: f64| {
            out.push_str(&format!("{i},{j},{w:.16e}\n"));
        };
        match &self.weights {
            WeightMatrix::Dense(w) => {
                let n = w.nrows();
                for i in 0..n {
                    for j in (i + 1)..n {
                        if w[[i, j]] != 0.0 {
                            push(i, j, w[[i, j]]);
                        }
                    }
                }
            }
            WeightMatrix::Sparse { entries, .. } => {
                for &(i, j, w) in entries {
                    push(i, j, w);
                }
            }
        }
        out
    }

    /// Serializes the dense Laplacian as CSV rows (17 significant digits).
    /// Refused above 2048 nodes: the quadratic dump stops being a sensible
    /// artifact.
    pub fn laplacian_csv(&self) -> Result<String> {
        const MAX_DUMP: usize = 2048;
        let n = self.n();
        if n > MAX_DUMP {
            return Err(Error::invalid_argument(format!(
                "refusing to materialize a {n}×{n} Laplacian as CSV (limit {MAX_DUMP})"
            )));
        }
        let l = self.lap_dense();
        let mut out = String::new();
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| format!("{:.16e}", l[[i, j]])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        Ok(out)
    }
}

/// Volume of the unit ball in ℝ^d, via the recurrence
/// `α_d = (2π/d)·α_{d−2}` with α_0 = 1, α_1 = 2.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => (2.0 * std::f64::consts::PI / d as f64) * unit_ball_volume(d - 2),
    }
}

/// Gaussian kernel weight for one point pair at squared distance `sq_dist`.
pub fn gaussian_weight(sq_dist: f64, epsilon: f64, dim: usize, n: usize) -> f64 {
    let norm = epsilon.powf(dim as f64 / 2.0 + 1.0)
        * (4.0 * std::f64::consts::PI).powf(dim as f64 / 2.0);
    (-sq_dist / (4.0 * epsilon)).exp() / (norm * n as f64)
}

/// Indicator kernel weight for one point pair at squared distance
/// `sq_dist`; the connectivity boundary `sq_dist = ε` is included.
pub fn epsilon_weight(sq_dist: f64, epsilon: f64, dim: usize, n: usize) -> f64 {
    if sq_dist > epsilon {
        return 0.0;
    }
    let norm = epsilon.powf(dim as f64 / 2.0 + 1.0) * unit_ball_volume(dim);
    (dim as f64 + 2.0) / (norm * n as f64)
}

/// Bandwidth schedule guaranteeing connectivity-regime decay,
/// `ε(n) = (ln(c/δ)/n)^{1/(d+4)}` for the Gaussian kernel and
/// `ε(n) = (ln(c·n/δ)/n)^{1/(d+4)}` for the indicator kernel.
///
/// The logarithm's argument must exceed 1, otherwise the schedule is
/// meaningless and an error is returned.
pub fn epsilon_schedule(kind: KernelKind, n: usize, dim: usize, c: f64, delta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid_argument(
            "the schedule needs at least one sample".to_string(),
        ));
    }
    if !(c.is_finite() && c > 0.0) || !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid_argument(format!(
            "schedule constants must be positive and finite, got c = {c}, delta = {delta}"
        )));
    }
    let arg = match kind {
        KernelKind::Gaussian => c / delta,
        KernelKind::Epsilon => c * n as f64 / delta,
    };
    if arg <= 1.0 {
        return Err(Error::invalid_argument(format!(
            "schedule logarithm argument must exceed 1, got {arg} \
             (c = {c}, delta = {delta}, n = {n})"
        )));
    }
    Ok((arg.ln() / n as f64).powf(1.0 / (dim as f64 + 4.0)))
}

fn sq_dist(points: &Array2<f64>, i: usize, j: usize) -> f64 {
    let (a, b) = (points.row(i), points.row(j));
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Builds the kernel graph over a point cloud.
///
/// The kernel's dimension must match the manifold's intrinsic dimension —
/// the normalization is what makes the Laplacian converge, so a mismatch is
/// rejected rather than silently producing the wrong operator. Gaussian
/// graphs are dense, indicator graphs sparse; both are exactly symmetric
/// with zero diagonal, and construction is deterministic.
pub fn build_graph(points: &PointSet, kernel: KernelSpec) -> Result<KernelGraph> {
    let d = points.spec.intrinsic_dim();
    if kernel.dim != d {
        return Err(Error::invalid_argument(format!(
            "kernel dimension {} does not match the manifold's intrinsic dimension {d}",
            kernel.dim
        )));
    }
    let n = points.len();
    let p = &points.points;
    let (weights, degrees) = match kernel.kind {
        KernelKind::Gaussian => {
            let mut w = Array2::zeros((n, n));
            w.axis_iter_mut(Axis(0))
                .into_par_iter()
                .enumerate()
                .for_each(|(i, mut row)| {
                    for j in (i + 1)..n {
                        row[j] = gaussian_weight(sq_dist(p, i, j), kernel.epsilon, d, n);
                    }
                });
            for i in 0..n {
                for j in (i + 1)..n {
                    w[[j, i]] = w[[i, j]];
                }
            }
            let degrees = w.sum_axis(Axis(1));
            (WeightMatrix::Dense(w), degrees)
        }
        KernelKind::Epsilon => {
            let rows: Vec<Vec<(usize, usize, f64)>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    ((i + 1)..n)
                        .filter_map(|j| {
                            let w = epsilon_weight(sq_dist(p, i, j), kernel.epsilon, d, n);
                            (w != 0.0).then_some((i, j, w))
                        })
                        .collect()
                })
                .collect();
            let entries: Vec<(usize, usize, f64)> = rows.into_iter().flatten().collect();
            let mut degrees = Array1::zeros(n);
            for &(i, j, w) in &entries {
                degrees[i] += w;
                degrees[j] += w;
            }
            (WeightMatrix::Sparse { n, entries }, degrees)
        }
    };
    Ok(KernelGraph {
        points: points.clone(),
        weights,
        degrees,
        kernel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{sample_points, ManifoldSpec, PointSet};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use ndarray::array;
    use rand::Rng;

    /// Wraps explicit 2-D coordinates as a unit-circle point set so kernel
    /// geometry can be dictated directly (d = 1 normalization).
    fn planar_points(coords: Array2<f64>) -> PointSet {
        PointSet {
            points: coords,
            intrinsic: None,
            seed: 0,
            spec: ManifoldSpec::unit_circle(),
        }
    }

    #[test]
    fn unit_ball_volumes_match_gamma_oracle() {
        use statrs::function::gamma::gamma;
        assert_eq!(unit_ball_volume(0), 1.0);
        assert_eq!(unit_ball_volume(1), 2.0);
        assert_relative_eq!(unit_ball_volume(2), std::f64::consts::PI, max_relative = 1e-15);
        for d in 1..=10usize {
            let want = std::f64::consts::PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0 + 1.0);
            assert_relative_eq!(unit_ball_volume(d), want, max_relative = 1e-13);
        }
    }

    #[test]
    // Expected values are frozen verbatim from the oracle computation (some
    // happen to be recognizable constants).
    #[allow(clippy::approx_constant, clippy::excessive_precision)]
    fn kernel_weights_frozen_values() {
        // 1/(40π): zero distance, ε = 1, d = 2, N = 10.
        assert_relative_eq!(
            gaussian_weight(0.0, 1.0, 2, 10),
            0.0079577471545947668,
            max_relative = 1e-15
        );
        // e^{-1}/√(4π): squared distance 4, ε = 1, d = 1, N = 1.
        assert_relative_eq!(
            gaussian_weight(4.0, 1.0, 1, 1),
            0.10377687435514868,
            max_relative = 1e-15
        );
        // 1/π: inside the ball, ε = 1, d = 2, N = 4.
        assert_relative_eq!(
            epsilon_weight(0.5, 1.0, 2, 4),
            0.31830988618379067,
            max_relative = 1e-15
        );
    }

    #[test]
    fn indicator_boundary_is_inclusive() {
        let at = epsilon_weight(0.25, 0.25, 1, 2);
        assert!(at > 0.0);
        assert_eq!(epsilon_weight(0.25 + 1e-12, 0.25, 1, 2), 0.0);
        // Inside the ball the weight does not depend on the distance.
        assert_eq!(epsilon_weight(0.1, 0.25, 1, 2), at);
    }

    #[test]
    fn weights_scale_inversely_with_n() {
        let g1 = gaussian_weight(0.3, 0.5, 2, 100);
        let g2 = gaussian_weight(0.3, 0.5, 2, 200);
        assert_relative_eq!(g1, 2.0 * g2, max_relative = 1e-15);
        let e1 = epsilon_weight(0.3, 0.5, 2, 100);
        let e2 = epsilon_weight(0.3, 0.5, 2, 200);
        assert_relative_eq!(e1, 2.0 * e2, max_relative = 1e-15);
    }

    #[test]
    fn collinear_points_connect_only_within_the_ball() {
        // Three collinear points. At spacing 0.9·√ε adjacent pairs sit at
        // squared distance 0.81·ε ≤ ε and connect, while the outer pair at
        // 3.24·ε does not; at spacing 1.1·√ε even adjacent pairs are at
        // 1.21·ε > ε and the graph has no edges.
        let eps = 0.16;
        let kernel = KernelSpec::new(KernelKind::Epsilon, eps, 1).unwrap();
        let spaced = |s: f64| {
            planar_points(array![[0.0, 0.0], [s, 0.0], [2.0 * s, 0.0]])
        };
        let near = build_graph(&spaced(0.9 * eps.sqrt()), kernel).unwrap();
        assert_eq!(near.weights().edge_count(), 2);
        assert!(near.weight(0, 1) > 0.0);
        assert!(near.weight(1, 2) > 0.0);
        assert_eq!(near.weight(0, 2), 0.0);
        let far = build_graph(&spaced(1.1 * eps.sqrt()), kernel).unwrap();
        assert_eq!(far.weights().edge_count(), 0);
        assert_eq!(far.degrees().sum(), 0.0);
    }

    #[test]
    #[allow(clippy::excessive_precision)] // frozen oracle digits kept verbatim
    fn schedule_frozen_values_and_monotonicity() {
        let g = epsilon_schedule(KernelKind::Gaussian, 1000, 2, 1.0, 0.1).unwrap();
        assert_relative_eq!(g, 0.36338691204468072, max_relative = 1e-15);
        let e = epsilon_schedule(KernelKind::Epsilon, 1000, 2, 1.0, 0.1).unwrap();
        assert_relative_eq!(e, 0.45783881974139006, max_relative = 1e-15);
        // Decreasing in n for both kernels.
        for kind in [KernelKind::Gaussian, KernelKind::Epsilon] {
            let mut last = f64::MAX;
            for n in [100usize, 1000, 10_000, 100_000] {
                let eps = epsilon_schedule(kind, n, 1, 1.0, 0.1).unwrap();
                assert!(eps < last, "schedule must decrease in n");
                last = eps;
            }
        }
    }

    #[test]
    fn schedule_rejects_degenerate_logs() {
        // c/δ = 1 makes the Gaussian schedule collapse.
        assert!(epsilon_schedule(KernelKind::Gaussian, 100, 1, 0.1, 0.1).is_err());
        assert!(epsilon_schedule(KernelKind::Gaussian, 100, 1, 0.05, 0.1).is_err());
        // The indicator schedule sees c·n/δ, so the same constants pass.
        assert!(epsilon_schedule(KernelKind::Epsilon, 100, 1, 0.1, 0.1).is_ok());
        assert!(epsilon_schedule(KernelKind::Epsilon, 1, 1, 0.05, 0.1).is_err());
        assert!(epsilon_schedule(KernelKind::Gaussian, 0, 1, 1.0, 0.1).is_err());
        assert!(epsilon_schedule(KernelKind::Gaussian, 100, 1, -1.0, 0.1).is_err());
        assert!(epsilon_schedule(KernelKind::Gaussian, 100, 1, 1.0, 0.0).is_err());
    }

    #[test]
    fn epsilon_rule_resolution() {
        assert_eq!(
            EpsilonRule::Fixed(0.25)
                .resolve(KernelKind::Gaussian, 10, 1)
                .unwrap(),
            0.25
        );
        assert!(EpsilonRule::Fixed(-0.25)
            .resolve(KernelKind::Gaussian, 10, 1)
            .is_err());
        assert!(EpsilonRule::Fixed(f64::NAN)
            .resolve(KernelKind::Gaussian, 10, 1)
            .is_err());
        let by_rule = EpsilonRule::default_schedule()
            .resolve(KernelKind::Epsilon, 1000, 2)
            .unwrap();
        assert_relative_eq!(by_rule, 0.45783881974139006, max_relative = 1e-15);
    }

    #[test]
    fn kernel_spec_validates() {
        assert!(KernelSpec::new(KernelKind::Gaussian, 0.0, 1).is_err());
        assert!(KernelSpec::new(KernelKind::Gaussian, f64::INFINITY, 1).is_err());
        assert!(KernelSpec::new(KernelKind::Gaussian, 0.5, 0).is_err());
        assert!(KernelSpec::new(KernelKind::Epsilon, 0.5, 3).is_ok());
    }

    #[test]
    fn build_rejects_dimension_mismatch() {
        let pts = sample_points(&ManifoldSpec::unit_circle(), 8, 1).unwrap();
        let kernel = KernelSpec::new(KernelKind::Gaussian, 0.5, 2).unwrap();
        assert!(build_graph(&pts, kernel).is_err());
    }

    fn circle_graph(kind: KernelKind, n: usize, seed: u64) -> KernelGraph {
        let pts = sample_points(&ManifoldSpec::unit_circle(), n, seed).unwrap();
        let eps = EpsilonRule::default_schedule().resolve(kind, n, 1).unwrap();
        build_graph(&pts, KernelSpec::new(kind, eps, 1).unwrap()).unwrap()
    }

    #[test]
    fn graphs_are_symmetric_with_zero_diagonal() {
        for kind in [KernelKind::Gaussian, KernelKind::Epsilon] {
            let g = circle_graph(kind, 40, 4);
            for i in 0..g.n() {
                assert_eq!(g.weight(i, i), 0.0);
                for j in 0..g.n() {
                    assert_eq!(g.weight(i, j), g.weight(j, i), "asymmetry at ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn sparse_entries_are_sorted_upper_triangle() {
        let g = circle_graph(KernelKind::Epsilon, 60, 7);
        match g.weights() {
            WeightMatrix::Sparse { entries, .. } => {
                assert!(!entries.is_empty());
                for w in entries.windows(2) {
                    assert!((w[0].0, w[0].1) < (w[1].0, w[1].1), "entries out of order");
                }
                for &(i, j, w) in entries {
                    assert!(i < j);
                    assert!(w > 0.0);
                }
            }
            WeightMatrix::Dense(_) => panic!("indicator graphs must be sparse"),
        }
    }

    #[test]
    fn laplacian_annihilates_constants_and_is_psd() {
        let mut rng = crate::seed::rng_from_seed(99);
        for kind in [KernelKind::Gaussian, KernelKind::Epsilon] {
            let g = circle_graph(kind, 50, 12);
            let ones = Array1::ones(g.n());
            let zero = g.lap_apply(ones.view());
            let scale = g.degrees().iter().cloned().fold(0.0, f64::max);
            for v in zero.iter() {
                assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-12 * scale.max(1.0));
            }
            for _ in 0..5 {
                let x = Array1::from_iter((0..g.n()).map(|_| rng.gen::<f64>() - 0.5));
                let quad = x.dot(&g.lap_apply(x.view()));
                assert!(quad >= -1e-12 * scale, "Laplacian must be PSD, got {quad}");
            }
        }
    }

    #[test]
    fn lap_apply_matches_dense_materialization() {
        let mut rng = crate::seed::rng_from_seed(3);
        for kind in [KernelKind::Gaussian, KernelKind::Epsilon] {
            let g = circle_graph(kind, 35, 21);
            let l = g.lap_dense();
            for _ in 0..3 {
                let x = Array1::from_iter((0..g.n()).map(|_| rng.gen::<f64>() - 0.5));
                let via_apply = g.lap_apply(x.view());
                let via_dense = l.dot(&x);
                for (a, b) in via_apply.iter().zip(via_dense.iter()) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn degrees_exclude_the_diagonal() {
        // Two coincident points plus a distant third: the Gaussian weight at
        // distance zero is large, but only the off-diagonal pair may
        // contribute to the degree.
        let pts = planar_points(array![[0.0, 0.0], [0.0, 0.0], [10.0, 0.0]]);
        let kernel = KernelSpec::new(KernelKind::Gaussian, 0.1, 1).unwrap();
        let g = build_graph(&pts, kernel).unwrap();
        let w01 = gaussian_weight(0.0, 0.1, 1, 3);
        let w02 = gaussian_weight(100.0, 0.1, 1, 3);
        assert_relative_eq!(g.degrees()[0], w01 + w02, max_relative = 1e-15);
        assert_relative_eq!(g.degrees()[2], 2.0 * w02, max_relative = 1e-12);
    }

    #[test]
    fn build_is_deterministic() {
        for kind in [KernelKind::Gaussian, KernelKind::Epsilon] {
            let a = circle_graph(kind, 64, 5);
            let b = circle_graph(kind, 64, 5);
            assert_eq!(a.weights(), b.weights());
            assert_eq!(a.degrees(), b.degrees());
        }
    }

    #[test]
    fn edge_list_csv_format() {
        let pts = planar_points(array![[0.0, 0.0], [0.1, 0.0], [5.0, 0.0]]);
        let kernel = KernelSpec::new(KernelKind::Epsilon, 0.25, 1).unwrap();
        let g = build_graph(&pts, kernel).unwrap();
        let csv = g.edge_list_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "i,j,weight");
        assert_eq!(lines.len(), 2, "exactly one edge expected");
        assert!(lines[1].starts_with("0,1,"));
        let w: f64 = lines[1].rsplit(',').next().unwrap().parse().unwrap();
        assert_relative_eq!(w, epsilon_weight(0.01, 0.25, 1, 3), max_relative = 1e-15);
    }

    #[test]
    fn laplacian_csv_round_trips_and_caps_size() {
        let g = circle_graph(KernelKind::Gaussian, 6, 2);
        let csv = g.laplacian_csv().unwrap();
        let l = g.lap_dense();
        for (i, line) in csv.lines().enumerate() {
            for (j, tok) in line.split(',').enumerate() {
                let v: f64 = tok.parse().unwrap();
                assert_eq!(v, l[[i, j]], "entry ({i},{j}) must round-trip exactly");
            }
        }
        let big = circle_graph(KernelKind::Epsilon, 2049, 2);
        assert!(big.laplacian_csv().is_err());
    }
}
