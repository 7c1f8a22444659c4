//! Triangle meshes: OFF parsing, serialization, and area-uniform surface
//! sampling.
//!
//! Meshes stand in for manifolds with no closed-form spectrum. A mesh is a
//! vertex table plus triangle list; polygonal OFF faces are fan-triangulated
//! on load and degenerate (zero-area) triangles are dropped up front so the
//! sampler never has to special-case them.
//!
//! Sampled clouds are normalized per draw: the axis-aligned bounding box is
//! centered at the origin and the cloud is scaled so its bounding-sphere
//! radius is exactly 1. That pins the length scale of downstream kernel
//! graphs regardless of the units the mesh file used.

use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::manifold::{ManifoldSpec, PointSet};
use crate::seed::rng_from_seed;

/// An indexed triangle mesh in ℝ³.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Array2<f64>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh, validating indices and removing zero-area triangles.
    ///
    /// A triangle counts as zero-area when its area is at most
    /// `1e-14 · diag²`, with `diag` the bounding-box diagonal; this scales
    /// the cutoff with the mesh's units. A mesh whose every face is
    /// degenerate is rejected.
    pub fn new(vertices: Array2<f64>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.ncols() != 3 {
            return Err(Error::InvalidMesh(format!(
                "vertices must have 3 coordinates, got {}",
                vertices.ncols()
            )));
        }
        if vertices.nrows() == 0 {
            return Err(Error::InvalidMesh("mesh has no vertices".to_string()));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMesh(
                "vertex coordinates must be finite".to_string(),
            ));
        }
        let v_count = vertices.nrows();
        for (f, idx) in faces.iter().enumerate() {
            for &i in idx {
                if i >= v_count {
                    return Err(Error::InvalidMesh(format!(
                        "face {f} references vertex {i} but the mesh has only {v_count} vertices"
                    )));
                }
            }
        }

        let mut diag_sq = 0.0;
        for j in 0..3 {
            let col = vertices.column(j);
            let min = col.iter().cloned().fold(f64::MAX, f64::min);
            let max = col.iter().cloned().fold(f64::MIN, f64::max);
            diag_sq += (max - min).powi(2);
        }
        let tol = 1e-14 * diag_sq;
        let kept: Vec<[usize; 3]> = faces
            .into_iter()
            .filter(|&[a, b, c]| triangle_area(&vertices, a, b, c) > tol)
            .collect();
        if kept.is_empty() {
            return Err(Error::InvalidMesh(
                "mesh has no positive-area faces".to_string(),
            ));
        }
        Ok(TriangleMesh {
            vertices,
            faces: kept,
        })
    }

    pub fn vertices(&self) -> &Array2<f64> {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.nrows()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Areas of the triangles, in face order.
    pub fn face_areas(&self) -> Vec<f64> {
        self.faces
            .iter()
            .map(|&[a, b, c]| triangle_area(&self.vertices, a, b, c))
            .collect()
    }

    /// Total surface area.
    pub fn surface_area(&self) -> f64 {
        self.face_areas().iter().sum()
    }
}

fn triangle_area(vertices: &Array2<f64>, a: usize, b: usize, c: usize) -> f64 {
    let u = [
        vertices[[b, 0]] - vertices[[a, 0]],
        vertices[[b, 1]] - vertices[[a, 1]],
        vertices[[b, 2]] - vertices[[a, 2]],
    ];
    let v = [
        vertices[[c, 0]] - vertices[[a, 0]],
        vertices[[c, 1]] - vertices[[a, 1]],
        vertices[[c, 2]] - vertices[[a, 2]],
    ];
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    0.5 * (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt()
}

/// Parses an OFF document.
///
/// The accepted grammar is strict: an `OFF` header line, a counts line
/// `V F E`, exactly `V` vertex lines of three coordinates each, then exactly
/// `F` face lines `k i_1 … i_k` with `k ≥ 3`. Blank lines and `#` comments
/// are ignored everywhere. Errors cite the first offending line (1-based).
/// Polygons are fan-triangulated around their first vertex.
pub fn parse_off(text: &str) -> Result<TriangleMesh> {
    let mut last_line = 0usize;
    let mut lines = text.lines().enumerate().filter_map(|(i, raw)| {
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let trimmed = content.trim();
        if trimmed.is_empty() {
            None
        } else {
            Some((i + 1, trimmed))
        }
    });

    let mut next_line = |last: &mut usize, what: &str| -> Result<(usize, &str)> {
        match lines.next() {
            Some((line, text)) => {
                *last = line;
                Ok((line, text))
            }
            None => Err(Error::Parse {
                line: *last + 1,
                msg: format!("file ended early, expected {what}"),
            }),
        }
    };

    let (line, header) = next_line(&mut last_line, "the OFF header")?;
    if header != "OFF" {
        return Err(Error::Parse {
            line,
            msg: format!("expected OFF header, found {header:?}"),
        });
    }

    let (line, counts) = next_line(&mut last_line, "the counts line")?;
    let tokens: Vec<&str> = counts.split_whitespace().collect();
    if tokens.len() != 3 {
        return Err(Error::Parse {
            line,
            msg: format!(
                "counts line must contain 3 integers (vertices, faces, edges), found {}",
                tokens.len()
            ),
        });
    }
    let parse_count = |tok: &str| -> Result<usize> {
        tok.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("invalid count {tok:?}"),
        })
    };
    let v_count = parse_count(tokens[0])?;
    let f_count = parse_count(tokens[1])?;
    parse_count(tokens[2])?; // edge count, present but unused

    let mut vertices = Array2::zeros((v_count, 3));
    for i in 0..v_count {
        let (line, text) = next_line(&mut last_line, "a vertex line")?;
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: format!(
                    "vertex line must contain exactly 3 coordinates, found {}",
                    tokens.len()
                ),
            });
        }
        for (j, tok) in tokens.iter().enumerate() {
            vertices[[i, j]] = tok.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid coordinate {tok:?}"),
            })?;
        }
    }

    let mut faces = Vec::with_capacity(f_count);
    for _ in 0..f_count {
        let (line, text) = next_line(&mut last_line, "a face line")?;
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let k: usize = tokens
            .first()
            .ok_or(Error::Parse {
                line,
                msg: "empty face line".to_string(),
            })?
            .parse()
            .map_err(|_| Error::Parse {
                line,
                msg: format!("invalid face vertex count {:?}", tokens[0]),
            })?;
        if k < 3 {
            return Err(Error::Parse {
                line,
                msg: format!("a face needs at least 3 vertices, got {k}"),
            });
        }
        if tokens.len() != k + 1 {
            return Err(Error::Parse {
                line,
                msg: format!(
                    "face declares {k} vertices but the line has {} indices",
                    tokens.len() - 1
                ),
            });
        }
        let mut idx = Vec::with_capacity(k);
        for tok in &tokens[1..] {
            let i: usize = tok.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid vertex index {tok:?}"),
            })?;
            if i >= v_count {
                return Err(Error::Parse {
                    line,
                    msg: format!("vertex index {i} out of range (mesh has {v_count} vertices)"),
                });
            }
            idx.push(i);
        }
        for w in 1..k - 1 {
            faces.push([idx[0], idx[w], idx[w + 1]]);
        }
    }

    if let Some((line, _)) = lines.next() {
        return Err(Error::Parse {
            line,
            msg: "unexpected content after the declared faces".to_string(),
        });
    }

    TriangleMesh::new(vertices, faces)
}

/// Reads and parses an OFF file from disk.
pub fn load_off_mesh(path: &std::path::Path) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_off(&text)
}

/// Serializes a mesh to OFF text. Coordinates are written with 17
/// significant digits so a parse of the output reproduces the mesh bit for
/// bit.
pub fn to_off_string(mesh: &TriangleMesh) -> String {
    let mut out = String::from("OFF\n");
    out.push_str(&format!(
        "{} {} 0\n",
        mesh.vertex_count(),
        mesh.face_count()
    ));
    for i in 0..mesh.vertex_count() {
        out.push_str(&format!(
            "{:.16e} {:.16e} {:.16e}\n",
            mesh.vertices[[i, 0]],
            mesh.vertices[[i, 1]],
            mesh.vertices[[i, 2]]
        ));
    }
    for [a, b, c] in &mesh.faces {
        out.push_str(&format!("3 {a} {b} {c}\n"));
    }
    out
}

/// Draws `n` points area-uniformly from the mesh surface and normalizes the
/// cloud: the bounding box is centered at the origin and the points scaled
/// so the bounding-sphere radius is 1 (a single point degenerates to the
/// origin).
///
/// Triangles are chosen with probability proportional to area; positions
/// within a triangle are uniform via the reflected-barycentric trick.
pub fn sample_mesh_points(mesh: &Arc<TriangleMesh>, n: usize, seed: u64) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::invalid_argument(
            "cannot sample zero points".to_string(),
        ));
    }
    let mut points = sample_raw(mesh, n, seed);
    normalize_cloud(&mut points);
    Ok(PointSet {
        points,
        intrinsic: None,
        seed,
        spec: ManifoldSpec::mesh_cloud(Arc::clone(mesh)),
    })
}

/// Area-uniform sampling without the normalization step.
fn sample_raw(mesh: &TriangleMesh, n: usize, seed: u64) -> Array2<f64> {
    let mut rng = rng_from_seed(seed);
    let areas = mesh.face_areas();
    let mut cumulative = Vec::with_capacity(areas.len());
    let mut total = 0.0;
    for a in &areas {
        total += a;
        cumulative.push(total);
    }

    let mut points = Array2::zeros((n, 3));
    for i in 0..n {
        let u = rng.gen::<f64>() * total;
        let f = cumulative
            .partition_point(|&c| c <= u)
            .min(mesh.faces.len() - 1);
        let [a, b, c] = mesh.faces[f];
        let (mut r1, mut r2) = (rng.gen::<f64>(), rng.gen::<f64>());
        if r1 + r2 > 1.0 {
            r1 = 1.0 - r1;
            r2 = 1.0 - r2;
        }
        for j in 0..3 {
            let va = mesh.vertices[[a, j]];
            points[[i, j]] = va
                + r1 * (mesh.vertices[[b, j]] - va)
                + r2 * (mesh.vertices[[c, j]] - va);
        }
    }
    points
}

/// Centers the bounding box at the origin and scales the cloud to
/// bounding-sphere radius 1 (no-op scale for a degenerate cloud).
fn normalize_cloud(points: &mut Array2<f64>) {
    for j in 0..points.ncols() {
        let col = points.column(j);
        let min = col.iter().cloned().fold(f64::MAX, f64::min);
        let max = col.iter().cloned().fold(f64::MIN, f64::max);
        let mid = 0.5 * (min + max);
        points.column_mut(j).mapv_inplace(|x| x - mid);
    }
    let radius = points
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    if radius > 0.0 {
        points.mapv_inplace(|x| x / radius);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use ndarray::array;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn tetra_text() -> &'static str {
        "OFF\n4 4 6\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 2\n3 0 1 3\n3 0 2 3\n3 1 2 3\n"
    }

    fn square_mesh() -> TriangleMesh {
        parse_off("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n").unwrap()
    }

    #[test]
    fn parses_tetrahedron() {
        let mesh = parse_off(tetra_text()).unwrap();
        assert_eq!(mesh.vertex_count(), 4);
        assert_eq!(mesh.face_count(), 4);
        // Three unit right triangles plus the slanted face of area sqrt(3)/2.
        assert_relative_eq!(
            mesh.surface_area(),
            1.5 + 0.75f64.sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn fan_triangulates_polygons() {
        let mesh = square_mesh();
        assert_eq!(mesh.face_count(), 2);
        assert_eq!(mesh.faces()[0], [0, 1, 2]);
        assert_eq!(mesh.faces()[1], [0, 2, 3]);
        assert_abs_diff_eq!(mesh.surface_area(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn skips_comments_and_blank_lines() {
        let text = "# a comment\n\nOFF # trailing comment\n3 1 0\n0 0 0\n# interior\n1 0 0\n0 1 0\n\n3 0 1 2\n";
        let mesh = parse_off(text).unwrap();
        assert_eq!(mesh.vertex_count(), 3);
        assert_eq!(mesh.face_count(), 1);
    }

    fn expect_parse_error(text: &str, want_line: usize, needle: &str) {
        match parse_off(text) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, want_line, "wrong line for {msg:?}");
                assert!(
                    msg.contains(needle),
                    "message {msg:?} does not mention {needle:?}"
                );
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn errors_cite_the_first_bad_line() {
        expect_parse_error("NOFF\n1 0 0\n0 0 0\n", 1, "OFF header");
        expect_parse_error("OFF\n4 4\n", 2, "counts");
        expect_parse_error("OFF\n3 1 0\n0 0\n1 0 0\n0 1 0\n3 0 1 2\n", 3, "3 coordinates");
        expect_parse_error(
            "OFF\n3 1 0\n0 0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n",
            3,
            "3 coordinates",
        );
        expect_parse_error("OFF\n3 1 0\n0 0 x\n1 0 0\n0 1 0\n3 0 1 2\n", 3, "coordinate");
        expect_parse_error(
            "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 9\n",
            6,
            "out of range",
        );
        expect_parse_error("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n2 0 1\n", 6, "at least 3");
        expect_parse_error(
            "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1\n",
            6,
            "declares 3 vertices",
        );
        // Declared 4 vertices but only 3 present: the face line is consumed
        // as a vertex and the file then ends early.
        expect_parse_error("OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n", 6, "3 coordinates");
        expect_parse_error(
            "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\nstray\n",
            7,
            "unexpected content",
        );
        expect_parse_error("OFF\n3 1 0\n0 0 0\n1 0 0\n", 5, "ended early");
        expect_parse_error("", 1, "ended early");
    }

    #[test]
    fn new_validates_and_cleans() {
        // An out-of-range index is rejected.
        let verts = array![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        assert!(TriangleMesh::new(verts.clone(), vec![[0, 1, 5]]).is_err());
        // A repeated-vertex face has zero area and is dropped.
        let mesh = TriangleMesh::new(verts.clone(), vec![[0, 1, 2], [0, 0, 1]]).unwrap();
        assert_eq!(mesh.face_count(), 1);
        // A mesh with only degenerate faces is rejected.
        assert!(TriangleMesh::new(verts.clone(), vec![[0, 0, 1]]).is_err());
        assert!(TriangleMesh::new(verts, vec![]).is_err());
        // Non-finite coordinates are rejected.
        let bad = array![[0.0, 0.0, f64::NAN], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        assert!(TriangleMesh::new(bad, vec![[0, 1, 2]]).is_err());
    }

    #[test]
    fn off_round_trip_is_bit_exact() {
        let verts = array![
            [std::f64::consts::PI, -1.0 / 3.0, 0.1],
            [2f64.sqrt(), 1e-17, -7.25],
            [0.0, 1.0, 3f64.sqrt()],
            [-4.0, 0.5, 2.0 / 7.0]
        ];
        let mesh = TriangleMesh::new(verts, vec![[0, 1, 2], [1, 2, 3]]).unwrap();
        let text = to_off_string(&mesh);
        let back = parse_off(&text).unwrap();
        assert_eq!(back.vertices(), mesh.vertices());
        assert_eq!(back.faces(), mesh.faces());
    }

    #[test]
    fn load_reports_missing_files_with_path() {
        let err = load_off_mesh(std::path::Path::new("/nonexistent/mesh.off")).unwrap_err();
        match err {
            Error::Io { path, .. } => assert!(path.contains("nonexistent")),
            other => panic!("expected an I/O error, got {other:?}"),
        }
    }

    #[test]
    fn load_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tetra.off");
        std::fs::write(&path, tetra_text()).unwrap();
        let mesh = load_off_mesh(&path).unwrap();
        assert_eq!(mesh.vertex_count(), 4);
    }

    #[test]
    fn raw_samples_stay_inside_their_triangle() {
        // A single triangle: barycentric containment catches a missing
        // reflection step, which would spill a quarter of the mass outside.
        let verts = array![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let mesh = TriangleMesh::new(verts, vec![[0, 1, 2]]).unwrap();
        let pts = sample_raw(&mesh, 5000, 11);
        for i in 0..pts.nrows() {
            let (x, y, z) = (pts[[i, 0]], pts[[i, 1]], pts[[i, 2]]);
            assert!(x >= -1e-12 && y >= -1e-12 && x + y <= 1.0 + 1e-12);
            assert_abs_diff_eq!(z, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn sampling_weights_faces_by_area() {
        // Two parallel triangles with a 3:1 area ratio, separated in z.
        let verts = array![
            [0.0, 0.0, 0.0],
            [2.0, 0.0, 0.0],
            [0.0, 2.0, 0.0],
            [0.0, 0.0, 1.0],
            [2.0, 0.0, 1.0],
            [0.0, 2.0 / 3.0, 1.0]
        ];
        let mesh = TriangleMesh::new(verts, vec![[0, 1, 2], [3, 4, 5]]).unwrap();
        let n = 20_000;
        let pts = sample_raw(&mesh, n, 2024);
        let in_big = (0..n).filter(|&i| pts[[i, 2]] < 0.5).count();
        let frac = in_big as f64 / n as f64;
        assert!(
            (frac - 0.75).abs() < 0.01,
            "big-triangle fraction {frac} should be 0.75 +- 0.01"
        );
    }

    #[test]
    fn within_face_positions_are_uniform() {
        // Quadrants of the unit square get equal mass.
        let mesh = Arc::new(square_mesh());
        let pts = sample_raw(&mesh, 20_000, 5);
        let mut counts = [0usize; 4];
        for i in 0..pts.nrows() {
            let q = (pts[[i, 0]] > 0.5) as usize * 2 + (pts[[i, 1]] > 0.5) as usize;
            counts[q] += 1;
        }
        let expect = pts.nrows() as f64 / 4.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expect).powi(2) / expect)
            .sum();
        let cutoff = ChiSquared::new(3.0).unwrap().inverse_cdf(0.999);
        assert!(chi2 < cutoff, "chi-squared {chi2:.2} vs cutoff {cutoff:.2}");
    }

    #[test]
    fn sampled_clouds_are_normalized() {
        let mesh = Arc::new(parse_off(tetra_text()).unwrap());
        let pts = sample_mesh_points(&mesh, 500, 9).unwrap();
        assert!(pts.intrinsic.is_none());
        let radius = pts
            .points
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        assert_abs_diff_eq!(radius, 1.0, epsilon = 1e-9);
        for j in 0..3 {
            let col = pts.points.column(j);
            let min = col.iter().cloned().fold(f64::MAX, f64::min);
            let max = col.iter().cloned().fold(f64::MIN, f64::max);
            assert_abs_diff_eq!(0.5 * (min + max), 0.0, epsilon = 1e-12);
        }
        // Determinism.
        let again = sample_mesh_points(&mesh, 500, 9).unwrap();
        assert_eq!(pts.points, again.points);
        let other = sample_mesh_points(&mesh, 500, 10).unwrap();
        assert_ne!(pts.points, other.points);
    }

    #[test]
    fn single_point_cloud_degenerates_to_origin() {
        let mesh = Arc::new(parse_off(tetra_text()).unwrap());
        let pts = sample_mesh_points(&mesh, 1, 3).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(pts.points[[0, j]], 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn sampling_through_the_manifold_spec_works() {
        let mesh = Arc::new(parse_off(tetra_text()).unwrap());
        let spec = ManifoldSpec::mesh_cloud(Arc::clone(&mesh));
        let pts = crate::manifold::sample_points(&spec, 64, 17).unwrap();
        assert_eq!(pts.points.nrows(), 64);
        assert_eq!(pts.points.ncols(), 3);
        assert_eq!(pts.spec, spec);
        assert!(crate::manifold::analytic_spectrum(&spec, 3).is_err());
        assert!(crate::manifold::quadrature_grid(&spec, 16).is_err());
        assert!(spec.angle_density(&[0.0]).is_err());
    }
}
