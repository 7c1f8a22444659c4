//! Dense symmetric eigensolver: Householder tridiagonalization followed by
//! implicit-shift QL iteration, the classical EISPACK `tred2`/`tql2` pair.
//!
//! Written in-tree because the experiments depend on eigenvalue/eigenvector
//! association being exactly right, and the pair of routines below is small
//! enough to verify exhaustively against an independent Jacobi-rotation
//! solver and against matrices with synthetically planted spectra. The
//! values-only variant skips the orthogonal-transform accumulation and the
//! rotation replay, which roughly halves the work.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Full eigendecomposition of a symmetric matrix: ascending eigenvalues and
/// the matching orthonormal eigenvector columns. No sign convention is
/// applied here; callers normalize signs at the public boundary.
pub(crate) fn sym_eig_full(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let (vals, vecs) = sym_eig(a, true)?;
    Ok((vals, vecs.expect("vectors requested")))
}

/// Ascending eigenvalues of a symmetric matrix, without eigenvectors.
pub(crate) fn sym_eig_values(a: &Array2<f64>) -> Result<Array1<f64>> {
    Ok(sym_eig(a, false)?.0)
}

fn sym_eig(a: &Array2<f64>, want_vectors: bool) -> Result<(Array1<f64>, Option<Array2<f64>>)> {
    let n = a.nrows();
    debug_assert_eq!(a.ncols(), n);
    if n == 0 {
        return Ok((
            Array1::zeros(0),
            want_vectors.then(|| Array2::zeros((0, 0))),
        ));
    }
    // Row-major working copy; overwritten with the accumulated transform.
    let mut z: Vec<f64> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            z.push(a[[i, j]]);
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    householder_tridiag(&mut z, n, &mut d, &mut e, want_vectors);
    tridiag_ql(
        &mut d,
        &mut e,
        if want_vectors { Some(&mut z[..]) } else { None },
        n,
    )?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[x].total_cmp(&d[y]));
    let vals = Array1::from_iter(order.iter().map(|&i| d[i]));
    let vecs = want_vectors.then(|| {
        let mut v = Array2::zeros((n, n));
        for (out, &src) in order.iter().enumerate() {
            for r in 0..n {
                v[[r, out]] = z[r * n + src];
            }
        }
        v
    });
    Ok((vals, vecs))
}

/// Householder reduction of a symmetric matrix to tridiagonal form.
///
/// On exit `d` holds the tridiagonal's diagonal and `e` its subdiagonal
/// (`e[0] = 0`). With `accumulate`, `z` is overwritten with the orthogonal
/// matrix Q such that the input equals `Q T Qᵀ`; otherwise `z` is scratch.
fn householder_tridiag(z: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64], accumulate: bool) {
    let mut wi = vec![0.0; n];
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = z[i * n..i * n + l + 1].iter().map(|v| v.abs()).sum();
            if scale == 0.0 {
                e[i] = z[i * n + l];
            } else {
                for v in &mut z[i * n..i * n + l + 1] {
                    *v /= scale;
                    h += *v * *v;
                }
                let f = z[i * n + l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z[i * n + l] = f - g;
                wi[..=l].copy_from_slice(&z[i * n..i * n + l + 1]);
                if accumulate {
                    for j in 0..=l {
                        z[j * n + i] = wi[j] / h;
                    }
                }
                // e[0..=l] := (T·w)/h with T the trailing submatrix.
                let mut f_acc = 0.0;
                for j in 0..=l {
                    let mut g2: f64 = z[j * n..j * n + j + 1]
                        .iter()
                        .zip(&wi[..=j])
                        .map(|(a, b)| a * b)
                        .sum();
                    for k in (j + 1)..=l {
                        g2 += z[k * n + j] * wi[k];
                    }
                    e[j] = g2 / h;
                    f_acc += e[j] * wi[j];
                }
                // Rank-two update of the trailing submatrix.
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let f2 = wi[j];
                    let g2 = e[j] - hh * f2;
                    e[j] = g2;
                    for (k, v) in z[j * n..j * n + j + 1].iter_mut().enumerate() {
                        *v -= f2 * e[k] + g2 * wi[k];
                    }
                }
            }
        } else {
            e[i] = z[i * n + l];
        }
        d[i] = h;
    }
    e[0] = 0.0;
    if accumulate {
        // Accumulate the product of the Householder reflectors.
        d[0] = 0.0;
        for i in 0..n {
            if d[i] != 0.0 {
                for j in 0..i {
                    let mut g = 0.0;
                    for k in 0..i {
                        g += z[i * n + k] * z[k * n + j];
                    }
                    for k in 0..i {
                        z[k * n + j] -= g * z[k * n + i];
                    }
                }
            }
            d[i] = z[i * n + i];
            z[i * n + i] = 1.0;
            for j in 0..i {
                z[j * n + i] = 0.0;
                z[i * n + j] = 0.0;
            }
        }
    } else {
        for i in 0..n {
            d[i] = z[i * n + i];
        }
    }
}

/// Implicit-shift QL iteration on a tridiagonal matrix.
///
/// `d`/`e` are the diagonal and subdiagonal (`e[0]` unused); on success `d`
/// holds the eigenvalues (unsorted). When `z` is given, its columns are
/// rotated along, turning a tridiagonalizing transform into the full
/// eigenvector matrix.
fn tridiag_ql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut [f64]>, n: usize) -> Result<()> {
    if n <= 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            // Look for a negligible subdiagonal element to split at.
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::numeric(format!(
                    "symmetric QL iteration failed to converge for eigenvalue {l} \
                     after 50 implicit-shift sweeps (matrix dimension {n})"
                )));
            }
            // Wilkinson-style shift from the leading 2×2 block.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let denom = g + if g >= 0.0 { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / denom;
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // Rotation annihilated prematurely; deflate and rescan.
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for row in z.chunks_exact_mut(n) {
                        let f2 = row[i + 1];
                        row[i + 1] = s * row[i] + c * f2;
                        row[i] = c * row[i] - s * f2;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
