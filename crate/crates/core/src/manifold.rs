//! Manifold models, density-aware sampling, analytic spectra, and
//! bandlimited signals.
//!
//! The central operator is the weighted Laplace operator
//! `L_ρ f = −(1/2ρ) div(ρ² ∇f)` of a probability density ρ on a compact
//! manifold. For the uniform density ρ is constant and `L_ρ` reduces to
//! `(ρ/2)` times the negative Laplace–Beltrami operator, which gives the
//! circle and the flat torus closed-form eigenpairs:
//!
//! * circle of radius `r` (arclength coordinate θ, ρ = 1/(2πr)):
//!   eigenvalues `k²/(4πr³)` with the pair `√2·cos kθ`, `√2·sin kθ`;
//! * flat torus with radii `r1`, `r2` (ρ = 1/(4π²·r1·r2)): eigenvalues
//!   `(m²/r1² + n²/r2²)/(8π²·r1·r2)` with products of per-factor harmonics.
//!
//! Eigenfunctions are orthonormal under the μ-weighted inner product
//! `⟨f, g⟩ = ∫ f·g dμ`. Within a degenerate multiplet the cosine branch
//! precedes the sine branch, and every eigenfunction's first nonzero sample
//! on the canonical quadrature grid is positive; both conventions keep
//! eigenpair indices stable across runs.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::{self, TriangleMesh};
use crate::seed::rng_from_seed;

/// Geometry of a manifold model.
#[derive(Debug, Clone, PartialEq)]
pub enum ManifoldKind {
    /// Circle of the given radius embedded in ℝ²; radius 1 is the unit
    /// circle.
    Circle { radius: f64 },
    /// Product of two circles with the given radii, embedded in ℝ⁴.
    FlatTorus { r1: f64, r2: f64 },
    /// Point cloud backed by a triangle mesh surface in ℝ³. No analytic
    /// spectrum is available; sampling is area-uniform over the surface.
    MeshCloud(Arc<TriangleMesh>),
}

/// Probability density on the manifold.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    /// The uniform (volume) probability measure.
    Uniform,
    /// Von Mises angular density `e^{κ·cos(θ−μ)} / (2π·I₀(κ))`. Only valid
    /// on the unit circle.
    VonMises { location: f64, concentration: f64 },
}

/// A manifold together with the sampling density that generates graph nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldSpec {
    kind: ManifoldKind,
    density: Density,
}

impl ManifoldSpec {
    /// The unit circle with the uniform density.
    pub fn unit_circle() -> Self {
        ManifoldSpec {
            kind: ManifoldKind::Circle { radius: 1.0 },
            density: Density::Uniform,
        }
    }

    /// A circle of arbitrary positive radius with the uniform density.
    pub fn circle(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid_spec(format!(
                "circle radius must be positive and finite, got {radius}"
            )));
        }
        Ok(ManifoldSpec {
            kind: ManifoldKind::Circle { radius },
            density: Density::Uniform,
        })
    }

    /// A flat torus (product of circles with radii `r1`, `r2`) with the
    /// uniform density.
    pub fn flat_torus(r1: f64, r2: f64) -> Result<Self> {
        if !(r1.is_finite() && r1 > 0.0 && r2.is_finite() && r2 > 0.0) {
            return Err(Error::invalid_spec(format!(
                "torus radii must be positive and finite, got ({r1}, {r2})"
            )));
        }
        Ok(ManifoldSpec {
            kind: ManifoldKind::FlatTorus { r1, r2 },
            density: Density::Uniform,
        })
    }

    /// A mesh-backed point cloud with the (area-)uniform density.
    pub fn mesh_cloud(mesh: Arc<TriangleMesh>) -> Self {
        ManifoldSpec {
            kind: ManifoldKind::MeshCloud(mesh),
            density: Density::Uniform,
        }
    }

    /// Replaces the density, validating compatibility with the geometry.
    pub fn with_density(self, density: Density) -> Result<Self> {
        if let Density::VonMises {
            location,
            concentration,
        } = density
        {
            let on_unit_circle =
                matches!(self.kind, ManifoldKind::Circle { radius } if radius == 1.0);
            if !on_unit_circle {
                return Err(Error::invalid_spec(
                    "von Mises density is only valid on the unit circle".to_string(),
                ));
            }
            if !location.is_finite() {
                return Err(Error::invalid_spec(format!(
                    "von Mises location must be finite, got {location}"
                )));
            }
            if !(concentration.is_finite() && concentration >= 0.0) {
                return Err(Error::invalid_spec(format!(
                    "von Mises concentration must be nonnegative and finite, got {concentration}"
                )));
            }
        }
        Ok(ManifoldSpec { density, ..self })
    }

    pub fn kind(&self) -> &ManifoldKind {
        &self.kind
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    /// Intrinsic dimension d of the manifold.
    pub fn intrinsic_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Circle { .. } => 1,
            ManifoldKind::FlatTorus { .. } => 2,
            ManifoldKind::MeshCloud(_) => 2,
        }
    }

    /// Dimension M of the ambient Euclidean space the manifold is embedded
    /// in.
    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Circle { .. } => 2,
            ManifoldKind::FlatTorus { .. } => 4,
            ManifoldKind::MeshCloud(_) => 3,
        }
    }

    /// Whether closed-form spectra are available (circle or torus with the
    /// uniform density).
    pub fn is_analytic(&self) -> bool {
        !matches!(self.kind, ManifoldKind::MeshCloud(_))
    }

    /// Density of the angular coordinate(s), i.e. dμ/dθ on the circle and
    /// dμ/(dθ dφ) on the torus. Integrating it over the angle domain gives 1.
    ///
    /// Only defined for analytic kinds; the mesh density lives on the
    /// surface, not on a coordinate chart.
    pub fn angle_density(&self, angles: &[f64]) -> Result<f64> {
        match (&self.kind, &self.density) {
            (ManifoldKind::Circle { .. }, Density::Uniform) => Ok(1.0 / TAU),
            (
                ManifoldKind::Circle { .. },
                Density::VonMises {
                    location,
                    concentration,
                },
            ) => {
                let theta = angles
                    .first()
                    .ok_or_else(|| Error::invalid_argument("missing angle".to_string()))?;
                Ok(((theta - location).cos() * concentration).exp()
                    / (TAU * bessel_i0(*concentration)))
            }
            (ManifoldKind::FlatTorus { .. }, Density::Uniform) => Ok(1.0 / (TAU * TAU)),
            (ManifoldKind::FlatTorus { .. }, Density::VonMises { .. }) => Err(
                Error::invalid_spec("von Mises density is only valid on the unit circle"),
            ),
            (ManifoldKind::MeshCloud(_), _) => Err(Error::unsupported(
                "angle density is undefined for mesh point clouds".to_string(),
            )),
        }
    }
}

/// Points sampled from (or placed on) a manifold.
#[derive(Debug, Clone)]
pub struct PointSet {
    /// Ambient coordinates, one row per point (N × M).
    pub points: Array2<f64>,
    /// Intrinsic angular coordinates for analytic manifolds (N × d);
    /// `None` for mesh clouds.
    pub intrinsic: Option<Array2<f64>>,
    /// The seed the points were drawn with (0 for deterministic grids).
    pub seed: u64,
    /// The manifold the points live on.
    pub spec: ManifoldSpec,
}

impl PointSet {
    /// Number of points.
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }
}

/// Deterministic quadrature nodes with weights for approximating
/// `∫ f dμ` on an analytic manifold.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    /// The grid nodes (equispaced angles on the circle, a product grid on
    /// the torus).
    pub nodes: PointSet,
    /// Nonnegative weights summing to 1, proportional to the density at the
    /// nodes.
    pub weights: Array1<f64>,
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// A manifold signal with finitely many spectral coefficients:
/// `f = Σ_{i ≤ M_band} c_i φ_i` in the eigenbasis of `L_ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandlimitedSignal {
    coeffs: Vec<f64>,
    spec: ManifoldSpec,
}

impl BandlimitedSignal {
    /// Builds a signal from spectral coefficients `c_1 … c_{M_band}`.
    /// Requires an analytic manifold (coefficients refer to its eigenbasis).
    pub fn new(coeffs: Vec<f64>, spec: ManifoldSpec) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid_argument(
                "bandlimited signal needs at least one coefficient".to_string(),
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid_argument(
                "bandlimited signal coefficients must be finite".to_string(),
            ));
        }
        if !spec.is_analytic() {
            return Err(Error::invalid_spec(
                "bandlimited signals require an analytic manifold spectrum".to_string(),
            ));
        }
        Ok(BandlimitedSignal { coeffs, spec })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    /// The bandlimit index M_band (number of retained eigenpairs).
    pub fn bandlimit(&self) -> usize {
        self.coeffs.len()
    }

    /// Rescales the coefficients to unit Euclidean norm, i.e. unit L²(μ)
    /// norm of the signal (by orthonormality of the eigenbasis).
    pub fn normalized(self) -> Result<Self> {
        let norm = self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm <= 0.0 {
            return Err(Error::invalid_argument(
                "cannot normalize the zero signal".to_string(),
            ));
        }
        Ok(BandlimitedSignal {
            coeffs: self.coeffs.into_iter().map(|c| c / norm).collect(),
            spec: self.spec,
        })
    }
}

/// One factor of a separable harmonic: 1, √2·cos(kθ), or √2·sin(kθ).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Factor {
    Const,
    Cos(u32),
    Sin(u32),
}

impl Factor {
    #[inline]
    fn eval(self, theta: f64) -> f64 {
        match self {
            Factor::Const => 1.0,
            Factor::Cos(k) => std::f64::consts::SQRT_2 * (k as f64 * theta).cos(),
            Factor::Sin(k) => std::f64::consts::SQRT_2 * (k as f64 * theta).sin(),
        }
    }

    /// Order within a degenerate multiplet: cosine before sine.
    fn rank(self) -> u8 {
        match self {
            Factor::Const => 0,
            Factor::Cos(_) => 1,
            Factor::Sin(_) => 2,
        }
    }
}

/// Closed-form eigenfunction of `L_ρ` on an analytic manifold.
#[derive(Debug, Clone, PartialEq)]
enum EigenFn {
    Circle(Factor),
    Torus(Factor, Factor),
}

/// One eigenpair of the weighted Laplace operator, with an evaluable
/// eigenfunction.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticEigenpair {
    /// 1-based position in the ascending spectrum (index 1 is the constant).
    pub index: usize,
    /// Eigenvalue of `L_ρ`.
    pub eigenvalue: f64,
    func: EigenFn,
}

impl AnalyticEigenpair {
    /// Evaluates the eigenfunction at intrinsic angular coordinates
    /// (`[θ]` on the circle, `[θ, φ]` on the torus).
    pub fn eval_intrinsic(&self, angles: &[f64]) -> f64 {
        match &self.func {
            EigenFn::Circle(f) => f.eval(angles[0]),
            EigenFn::Torus(a, b) => a.eval(angles[0]) * b.eval(angles[1]),
        }
    }

    /// Evaluates the eigenfunction at a point given in ambient coordinates.
    pub fn eval_ambient(&self, point: &[f64]) -> f64 {
        match &self.func {
            EigenFn::Circle(f) => f.eval(point[1].atan2(point[0])),
            EigenFn::Torus(a, b) => {
                a.eval(point[1].atan2(point[0])) * b.eval(point[3].atan2(point[2]))
            }
        }
    }
}

/// Draws `n` i.i.d. points from the spec's density.
///
/// Deterministic given `seed`. Intrinsic angles are populated for analytic
/// manifolds; mesh clouds carry ambient coordinates only.
pub fn sample_points(spec: &ManifoldSpec, n: usize, seed: u64) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::invalid_argument(
            "cannot sample zero points".to_string(),
        ));
    }
    let mut rng = rng_from_seed(seed);
    match (&spec.kind, &spec.density) {
        (ManifoldKind::Circle { radius }, density) => {
            let mut points = Array2::zeros((n, 2));
            let mut intrinsic = Array2::zeros((n, 1));
            for i in 0..n {
                let theta = match density {
                    Density::Uniform => rng.gen::<f64>() * TAU,
                    Density::VonMises {
                        location,
                        concentration,
                    } => sample_von_mises(&mut rng, *location, *concentration),
                };
                intrinsic[[i, 0]] = theta;
                points[[i, 0]] = radius * theta.cos();
                points[[i, 1]] = radius * theta.sin();
            }
            Ok(PointSet {
                points,
                intrinsic: Some(intrinsic),
                seed,
                spec: spec.clone(),
            })
        }
        (ManifoldKind::FlatTorus { r1, r2 }, Density::Uniform) => {
            let mut points = Array2::zeros((n, 4));
            let mut intrinsic = Array2::zeros((n, 2));
            for i in 0..n {
                let theta = rng.gen::<f64>() * TAU;
                let phi = rng.gen::<f64>() * TAU;
                intrinsic[[i, 0]] = theta;
                intrinsic[[i, 1]] = phi;
                points[[i, 0]] = r1 * theta.cos();
                points[[i, 1]] = r1 * theta.sin();
                points[[i, 2]] = r2 * phi.cos();
                points[[i, 3]] = r2 * phi.sin();
            }
            Ok(PointSet {
                points,
                intrinsic: Some(intrinsic),
                seed,
                spec: spec.clone(),
            })
        }
        (ManifoldKind::FlatTorus { .. }, Density::VonMises { .. }) => Err(Error::invalid_spec(
            "von Mises density is only valid on the unit circle".to_string(),
        )),
        (ManifoldKind::MeshCloud(mesh), Density::Uniform) => {
            mesh::sample_mesh_points(mesh, n, seed)
        }
        (ManifoldKind::MeshCloud(_), Density::VonMises { .. }) => Err(Error::invalid_spec(
            "von Mises density is only valid on the unit circle".to_string(),
        )),
    }
}

/// Returns the first `k_max` eigenpairs of `L_ρ` in ascending order.
///
/// Only circle and torus specs with the uniform density have closed forms;
/// anything else is unsupported. Within a degenerate multiplet the ordering
/// is cosine before sine (and on the torus, lexicographic in the frequency
/// pair), so individual indices are stable.
pub fn analytic_spectrum(spec: &ManifoldSpec, k_max: usize) -> Result<Vec<AnalyticEigenpair>> {
    if k_max == 0 {
        return Err(Error::invalid_argument(
            "k_max must be at least 1".to_string(),
        ));
    }
    if !matches!(spec.density, Density::Uniform) {
        return Err(Error::unsupported(
            "analytic spectra are only available for the uniform density".to_string(),
        ));
    }
    match spec.kind {
        ManifoldKind::Circle { radius } => Ok(circle_spectrum(radius, k_max)),
        ManifoldKind::FlatTorus { r1, r2 } => Ok(torus_spectrum(r1, r2, k_max)),
        ManifoldKind::MeshCloud(_) => Err(Error::unsupported(
            "mesh point clouds have no analytic spectrum".to_string(),
        )),
    }
}

fn circle_spectrum(radius: f64, k_max: usize) -> Vec<AnalyticEigenpair> {
    // L_ρ = −(ρ/2)·d²/ds² with ρ = 1/(2πr) and s the arclength; the k-th
    // harmonic cos(ks/r) has −d²/ds² eigenvalue (k/r)², hence
    // λ_k = k² / (4π r³).
    let mut pairs = Vec::with_capacity(k_max + 1);
    pairs.push(AnalyticEigenpair {
        index: 1,
        eigenvalue: 0.0,
        func: EigenFn::Circle(Factor::Const),
    });
    let mut k = 1u32;
    while pairs.len() < k_max {
        let lambda = (k as f64).powi(2) / (4.0 * PI * radius.powi(3));
        pairs.push(AnalyticEigenpair {
            index: pairs.len() + 1,
            eigenvalue: lambda,
            func: EigenFn::Circle(Factor::Cos(k)),
        });
        if pairs.len() < k_max {
            pairs.push(AnalyticEigenpair {
                index: pairs.len() + 1,
                eigenvalue: lambda,
                func: EigenFn::Circle(Factor::Sin(k)),
            });
        }
        k += 1;
    }
    pairs.truncate(k_max);
    pairs
}

fn torus_factors(freq: u32) -> Vec<Factor> {
    if freq == 0 {
        vec![Factor::Const]
    } else {
        vec![Factor::Cos(freq), Factor::Sin(freq)]
    }
}

fn torus_spectrum(r1: f64, r2: f64, k_max: usize) -> Vec<AnalyticEigenpair> {
    // λ(m, n) = (ρ/2)·(m²/r1² + n²/r2²) with ρ = 1/(4π²·r1·r2).
    let half_rho = 0.5 / (4.0 * PI * PI * r1 * r2);
    let lambda = |m: u32, n: u32| {
        half_rho * ((m as f64 / r1).powi(2) + (n as f64 / r2).powi(2))
    };

    // Enumerate frequency pairs up to a cap that provably contains the
    // k_max smallest eigenvalues: any excluded pair has m > cap or n > cap,
    // so its eigenvalue is at least `excluded_floor` below.
    let mut cap = (k_max as f64).sqrt().ceil() as u32 + 1;
    loop {
        let mut candidates: Vec<(f64, u32, u32, Factor, Factor)> = Vec::new();
        for m in 0..=cap {
            for n in 0..=cap {
                let lam = lambda(m, n);
                for fa in torus_factors(m) {
                    for fb in torus_factors(n) {
                        candidates.push((lam, m, n, fa, fb));
                    }
                }
            }
        }
        candidates.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
                .then((a.3.rank(), a.4.rank()).cmp(&(b.3.rank(), b.4.rank())))
        });
        let excluded_floor = half_rho
            * ((cap + 1) as f64).powi(2)
            * (1.0 / (r1 * r1)).min(1.0 / (r2 * r2));
        if candidates.len() >= k_max && candidates[k_max - 1].0 <= excluded_floor {
            return candidates
                .into_iter()
                .take(k_max)
                .enumerate()
                .map(|(i, (lam, _, _, fa, fb))| AnalyticEigenpair {
                    index: i + 1,
                    eigenvalue: lam,
                    func: EigenFn::Torus(fa, fb),
                })
                .collect();
        }
        cap *= 2;
    }
}

/// Samples the signal at every point: `f(x_i) = Σ_i c_i φ_i(x_i)`.
///
/// This is the sampling operator that turns a manifold signal into a graph
/// signal.
pub fn synthesize_signal(sig: &BandlimitedSignal, pts: &PointSet) -> Result<Array1<f64>> {
    if sig.spec != pts.spec {
        return Err(Error::invalid_argument(
            "signal and point set live on different manifolds".to_string(),
        ));
    }
    let pairs = analytic_spectrum(&sig.spec, sig.bandlimit())?;
    let n = pts.len();
    let mut out = Array1::zeros(n);
    match &pts.intrinsic {
        Some(angles) => {
            for i in 0..n {
                let row = angles.row(i);
                let coords = row.as_slice().expect("contiguous row");
                out[i] = sig
                    .coeffs
                    .iter()
                    .zip(&pairs)
                    .map(|(c, p)| c * p.eval_intrinsic(coords))
                    .sum();
            }
        }
        None => {
            for i in 0..n {
                let row = pts.points.row(i);
                let coords = row.as_slice().expect("contiguous row");
                out[i] = sig
                    .coeffs
                    .iter()
                    .zip(&pairs)
                    .map(|(c, p)| c * p.eval_ambient(coords))
                    .sum();
            }
        }
    }
    Ok(out)
}

/// Builds a deterministic quadrature grid of (at least) `q` nodes whose
/// weighted sums approximate `∫ f dμ`.
///
/// On the circle the grid is `q` equispaced angles. On the torus it is the
/// smallest `s × s` product grid with `s² ≥ q` (the node count is rounded up
/// to a square so both angles are resolved equally). Weights are
/// proportional to the density at the nodes and sum to 1 exactly; for the
/// uniform density they are all equal.
pub fn quadrature_grid(spec: &ManifoldSpec, q: usize) -> Result<QuadratureGrid> {
    if q == 0 {
        return Err(Error::invalid_argument(
            "quadrature grid needs at least one node".to_string(),
        ));
    }
    match &spec.kind {
        ManifoldKind::Circle { radius } => {
            let mut points = Array2::zeros((q, 2));
            let mut intrinsic = Array2::zeros((q, 1));
            let mut weights = Array1::zeros(q);
            for j in 0..q {
                let theta = TAU * j as f64 / q as f64;
                intrinsic[[j, 0]] = theta;
                points[[j, 0]] = radius * theta.cos();
                points[[j, 1]] = radius * theta.sin();
                weights[j] = spec.angle_density(&[theta])?;
            }
            let total = weights.sum();
            weights.mapv_inplace(|w| w / total);
            Ok(QuadratureGrid {
                nodes: PointSet {
                    points,
                    intrinsic: Some(intrinsic),
                    seed: 0,
                    spec: spec.clone(),
                },
                weights,
            })
        }
        ManifoldKind::FlatTorus { r1, r2 } => {
            let side = (q as f64).sqrt().ceil() as usize;
            let total_nodes = side * side;
            let mut points = Array2::zeros((total_nodes, 4));
            let mut intrinsic = Array2::zeros((total_nodes, 2));
            let mut weights = Array1::zeros(total_nodes);
            for i in 0..side {
                let theta = TAU * i as f64 / side as f64;
                for j in 0..side {
                    let phi = TAU * j as f64 / side as f64;
                    let idx = i * side + j;
                    intrinsic[[idx, 0]] = theta;
                    intrinsic[[idx, 1]] = phi;
                    points[[idx, 0]] = r1 * theta.cos();
                    points[[idx, 1]] = r1 * theta.sin();
                    points[[idx, 2]] = r2 * phi.cos();
                    points[[idx, 3]] = r2 * phi.sin();
                    weights[idx] = spec.angle_density(&[theta, phi])?;
                }
            }
            let total = weights.sum();
            weights.mapv_inplace(|w| w / total);
            Ok(QuadratureGrid {
                nodes: PointSet {
                    points,
                    intrinsic: Some(intrinsic),
                    seed: 0,
                    spec: spec.clone(),
                },
                weights,
            })
        }
        ManifoldKind::MeshCloud(_) => Err(Error::unsupported(
            "quadrature grids require an analytic manifold".to_string(),
        )),
    }
}

/// Modified Bessel function of the first kind, order zero, by its power
/// series. Accurate to full double precision for the concentrations used
/// here (the series converges for all κ; terms are added until they stop
/// contributing).
pub(crate) fn bessel_i0(kappa: f64) -> f64 {
    let x = kappa / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        term *= (x / k as f64) * (x / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Draws one angle from the von Mises distribution by the Best–Fisher
/// rejection method (wrapped Cauchy envelope).
fn sample_von_mises(rng: &mut ChaCha8Rng, location: f64, concentration: f64) -> f64 {
    if concentration < 1e-12 {
        return rng.gen::<f64>() * TAU;
    }
    let tau = 1.0 + (1.0 + 4.0 * concentration * concentration).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * concentration);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.gen();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = concentration * (r - f);
        let u2: f64 = rng.gen();
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let u3: f64 = rng.gen();
            let angle = if u3 > 0.5 { f.acos() } else { -f.acos() };
            return (location + angle).rem_euclid(TAU);
        }
    }
}
