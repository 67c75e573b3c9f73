//! Dense kernels for the small symmetric problems in this crate (n ≲ 20).
//! Matrices are row-major `n × n` slices.

use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum LinalgError {
    /// Cholesky pivot `pivot` at row `row` fell below the relative tolerance.
    #[error("matrix not numerically positive definite (row {row}, relative pivot {pivot:e})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("eigen iteration did not converge")]
    NoConvergence,
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factorizes `a`. A pivot `d_i` is rejected when `d_i ≤ rel_tol · a_ii`
    /// (relative loss of the diagonal to cancellation) or is not finite.
    pub fn new(a: &[f64], n: usize, rel_tol: f64) -> Result<Self, LinalgError> {
        let mut ch = Self { n, l: vec![0.0; n * n] };
        ch.refactor(a, rel_tol)?;
        Ok(ch)
    }

    /// Factorizes `a` (same dimension) into the existing storage. On error
    /// the factor is left in an unspecified state.
    pub fn refactor(&mut self, a: &[f64], rel_tol: f64) -> Result<(), LinalgError> {
        let n = self.n;
        debug_assert_eq!(a.len(), n * n);
        let l = &mut self.l;
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    let diag = a[i * n + i];
                    if !(s.is_finite() && diag > 0.0 && s > rel_tol * diag) {
                        return Err(LinalgError::NotPositiveDefinite {
                            row: i,
                            pivot: if diag > 0.0 { s / diag } else { s },
                        });
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor(&self) -> &[f64] {
        &self.l
    }

    /// Solves `L y = b` in place.
    pub fn forward(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn backward(&self, y: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        self.forward(b);
        self.backward(b);
    }

    /// `L⁻¹ M L⁻ᵀ` for symmetric `m`.
    pub fn congruence(&self, m: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        self.congruence_into(m, &mut out);
        out
    }

    /// [`Cholesky::congruence`] into `out` (`n ≤ MAX_DIM`).
    pub fn congruence_into(&self, m: &[f64], out: &mut [f64]) {
        let n = self.n;
        assert!(n <= MAX_DIM);
        // W = L⁻¹ M by forward substitution on whole rows, then each row
        // of A = W L⁻ᵀ is L⁻¹ applied to the same row of W.
        out[..n * n].copy_from_slice(&m[..n * n]);
        let l = &self.l;
        for i in 0..n {
            for k in 0..i {
                let f = l[i * n + k];
                let (head, tail) = out.split_at_mut(i * n);
                let src = &head[k * n..k * n + n];
                for (x, y) in tail[..n].iter_mut().zip(src) {
                    *x -= f * y;
                }
            }
            let d = 1.0 / l[i * n + i];
            out[i * n..i * n + n].iter_mut().for_each(|x| *x *= d);
        }
        for r in 0..n {
            let row = &mut out[r * n..r * n + n];
            for i in 0..n {
                let mut s = row[i];
                for k in 0..i {
                    s -= l[i * n + k] * row[k];
                }
                row[i] = s / l[i * n + i];
            }
        }
        for i in 0..n {
            for j in 0..i {
                let s = 0.5 * (out[i * n + j] + out[j * n + i]);
                out[i * n + j] = s;
                out[j * n + i] = s;
            }
        }
    }
}

/// Eigenvalues (ascending) and column eigenvectors of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Row-major; column `k` is the eigenvector of `values[k]`.
    pub vectors: Vec<f64>,
}

/// Cyclic Jacobi rotations. Accurate to working precision for the small
/// matrices used here.
pub fn jacobi_eigen(a: &[f64], n: usize) -> Result<SymEigen, LinalgError> {
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let mut converged = n < 2;
    for sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| a[p * n + q].abs())
            .sum();
        if off == 0.0 {
            converged = true;
            break;
        }
        let thresh = if sweep < 3 { 0.2 * off / (n * n) as f64 } else { 0.0 };
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let g = 100.0 * apq.abs();
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                if apq.abs() <= thresh {
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[k * n + dst] = v[k * n + src];
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Solution of `M ψ = λ G ψ` with `G` positive definite.
#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    pub values: Vec<f64>,
    /// Row-major; columns are `G`-orthonormal eigenvectors `ψ_k`.
    pub vectors: Vec<f64>,
}

pub fn generalized_eigen(
    m: &[f64],
    g: &Cholesky,
) -> Result<GeneralizedEigen, LinalgError> {
    let n = g.dim();
    let reduced = g.congruence(m);
    let SymEigen { values, vectors } = jacobi_eigen(&reduced, n)?;
    // ψ = L⁻ᵀ z
    let mut psi = vec![0.0; n * n];
    let mut col = vec![0.0; n];
    for k in 0..n {
        for i in 0..n {
            col[i] = vectors[i * n + k];
        }
        g.backward(&mut col);
        for i in 0..n {
            psi[i * n + k] = col[i];
        }
    }
    Ok(GeneralizedEigen {
        values,
        vectors: psi,
    })
}

/// Largest dimension accepted by the allocation-free kernels.
pub const MAX_DIM: usize = 32;

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `diag` and
/// off-diagonal `off` (`off[i]` couples rows `i` and `i+1`), together with
/// the first component of each normalized eigenvector. Implicit QL with
/// Wilkinson shifts; the first-row tracking is the Golub–Welsch shortcut.
pub fn tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<f64>), LinalgError> {
    let mut w = vec![0.0; diag.len()];
    if let Some(first) = w.first_mut() {
        *first = 1.0;
    }
    tridiagonal_eigen_projected(diag, off, &w)
}

/// Eigenvalues of a symmetric tridiagonal matrix together with the
/// projections `v_kᵀ w` of `w` on each normalized eigenvector.
pub fn tridiagonal_eigen_projected(diag: &[f64], off: &[f64], w: &[f64]) -> Result<(Vec<f64>, Vec<f64>), LinalgError> {
    let n = diag.len();
    debug_assert!(off.len() + 1 >= n);
    debug_assert_eq!(w.len(), n);
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    let mut z = w.to_vec();
    tql_projected(&mut d, &mut e, &mut z)?;
    sort_pairs(&mut d, &mut z);
    Ok((d, z))
}

/// Implicit QL on `(d, e)` in place; `e[i]` couples rows `i` and `i+1` and
/// `e[n-1]` is scratch. `z` is replaced by `zᵀV`. Eigenvalues are left
/// unsorted.
fn tql_projected(d: &mut [f64], e: &mut [f64], z: &mut [f64]) -> Result<(), LinalgError> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    // Deflate against the matrix scale; a relative test would chase
    // eigenvalues near zero to full relative precision.
    let norm = d.iter().zip(e.iter()).map(|(x, y)| x.abs() + y.abs()).fold(0.0, f64::max);
    let tol = f64::EPSILON * norm;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                if e[m].abs() <= tol {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(LinalgError::NoConvergence);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = (g * g + 1.0).sqrt();
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = (f * f + g * g).sqrt();
                e[i + 1] = r;
                if r == 0.0 {
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
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
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

/// Sorts `keys` ascending and permutes `values` alongside.
fn sort_pairs(keys: &mut [f64], values: &mut [f64]) {
    for i in 1..keys.len() {
        let mut j = i;
        while j > 0 && keys[j - 1] > keys[j] {
            keys.swap(j - 1, j);
            values.swap(j - 1, j);
            j -= 1;
        }
    }
}

/// Eigenvalues (ascending) of the symmetric matrix `a` and the projections
/// `q_kᵀ w` of `w` on its normalized eigenvectors. Householder reduction to
/// tridiagonal form (with `w` carried along) followed by implicit QL; the
/// eigenvectors themselves are never formed.
pub fn sym_eigen_projected(a: &[f64], n: usize, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>), LinalgError> {
    let mut a = a.to_vec();
    let mut w = w.to_vec();
    let mut values = vec![0.0; n];
    sym_eigen_projected_in_place(&mut a, n, &mut w, &mut values)?;
    Ok((values, w))
}

/// Allocation-free form of [`sym_eigen_projected`] for `n ≤ MAX_DIM`. `a` is
/// destroyed, `w` is overwritten with the projections and `values` receives
/// the eigenvalues.
pub fn sym_eigen_projected_in_place(a: &mut [f64], n: usize, w: &mut [f64], values: &mut [f64]) -> Result<(), LinalgError> {
    assert!(n <= MAX_DIM, "dimension {n} exceeds {MAX_DIM}");
    debug_assert_eq!(a.len(), n * n);
    let mut v = [0.0; MAX_DIM];
    let mut p = [0.0; MAX_DIM];
    let mut e = [0.0; MAX_DIM];
    for k in 0..n.saturating_sub(2) {
        let lo = k + 1;
        let mut alpha2 = 0.0;
        for i in lo..n {
            let x = a[i * n + k];
            v[i] = x;
            alpha2 += x * x;
        }
        let alpha = alpha2.sqrt();
        if alpha == 0.0 {
            continue;
        }
        let r = if v[lo] >= 0.0 { -alpha } else { alpha };
        v[lo] -= r;
        let vv = alpha2 - 2.0 * r * (v[lo] + r) + r * r;
        if vv <= 0.0 {
            continue;
        }
        let beta = 2.0 / vv;
        // Trailing block: A ← A − v qᵀ − q vᵀ with p = βAv, q = p − (βvᵀp/2) v.
        let mut vp = 0.0;
        for i in lo..n {
            let row = &a[i * n + lo..i * n + n];
            let s: f64 = row.iter().zip(&v[lo..n]).map(|(x, y)| x * y).sum();
            p[i] = beta * s;
            vp += v[i] * p[i];
        }
        let kk = 0.5 * beta * vp;
        for i in lo..n {
            p[i] -= kk * v[i];
        }
        for i in lo..n {
            let (vi, pi) = (v[i], p[i]);
            let row = &mut a[i * n + lo..i * n + n];
            for ((x, vj), pj) in row.iter_mut().zip(&v[lo..n]).zip(&p[lo..n]) {
                *x -= vi * pj + pi * vj;
            }
        }
        a[lo * n + k] = r;
        let c = beta * w[lo..n].iter().zip(&v[lo..n]).map(|(x, y)| x * y).sum::<f64>();
        for i in lo..n {
            w[i] -= c * v[i];
        }
    }
    for i in 0..n {
        values[i] = a[i * n + i];
        if i + 1 < n {
            e[i] = a[(i + 1) * n + i];
        }
    }
    tql_projected(&mut values[..n], &mut e[..n], &mut w[..n])?;
    sort_pairs(&mut values[..n], &mut w[..n]);
    Ok(())
}
