//! Dense complex linear algebra kernel.
//!
//! Everything here is a pure function on [`CMat`] values: thin SVD,
//! Hermitian eigendecomposition with PSD clamping, polar decomposition,
//! and partial traces over tensor factors. Index convention for
//! multi-site operators: site 0 is the *highest-order* factor, i.e. a
//! basis index decomposes as `idx = x_0 * d_1*d_2*... + x_1 * d_2*... + ...`,
//! matching `kron(a, b)` with `a` on the earlier site.

use ndarray as nd;
use ndarray_linalg::{Eigh, JobSvd, QRInto, SVDDCInto, UPLO};

use crate::error::{Error, Result};
use crate::{C64, CMat, CVec};

/// Relative threshold below which singular/eigen values count as exact
/// zeros for rank purposes.
pub const RANK_EPS: f64 = 1e-12;

/// Thin singular value decomposition `a = u · diag(s) · vdag`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// Left isometry, shape (rows, r) with r = min(rows, cols).
    pub u: CMat,
    /// Singular values, nonincreasing and nonnegative.
    pub s: Vec<f64>,
    /// Right isometry (already daggered), shape (r, cols).
    pub vdag: CMat,
}

impl SvdResult {
    /// Numerical rank: number of singular values above `RANK_EPS` times
    /// the largest.
    pub fn rank(&self) -> usize {
        rank_from_values(&self.s)
    }
}

/// Number of entries of `vals` exceeding `RANK_EPS * max`.
pub fn rank_from_values(vals: &[f64]) -> usize {
    let max = vals.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    vals.iter().filter(|&&v| v.abs() > RANK_EPS * max).count()
}

/// Conjugate transpose.
pub fn dagger(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

/// Identity matrix of dimension `n`.
pub fn identity(n: usize) -> CMat {
    CMat::eye(n)
}

/// Kronecker product with `a` as the high-order factor.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = CMat::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Trace of a square matrix.
pub fn trace(a: &CMat) -> C64 {
    a.diag().sum()
}

/// Max-abs deviation from Hermiticity.
pub fn hermiticity_defect(a: &CMat) -> f64 {
    let ad = dagger(a);
    (a - &ad).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Thin SVD with singular values sorted nonincreasing.
pub fn svd(a: &CMat) -> Result<SvdResult> {
    let (rows, cols) = a.dim();
    let (u, s, vt) = a
        .clone()
        .svddc_into(JobSvd::Some)
        .map_err(|e| Error::Decomposition {
            rows,
            cols,
            detail: e.to_string(),
        })?;
    let u = u.expect("requested U");
    let vt = vt.expect("requested V^H");
    Ok(SvdResult {
        u,
        s: s.to_vec(),
        vdag: vt,
    })
}

/// Thin QR factorization (Q has orthonormal columns).
pub fn qr_thin(a: &CMat) -> Result<(CMat, CMat)> {
    let (rows, cols) = a.dim();
    a.clone().qr_into().map_err(|e| Error::Decomposition {
        rows,
        cols,
        detail: e.to_string(),
    })
}

/// Hermitian eigendecomposition with eigenvalues ascending.
///
/// Intended for (near-)PSD inputs: eigenvalues in (−1e-10, 0) are
/// clamped to 0; genuinely negative spectra pass through unchanged.
/// Rejects inputs whose Hermiticity defect exceeds 1e-10 times the
/// largest entry magnitude (absolute 1e-10 for small-entry matrices).
pub fn eigh_psd(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    let scale = a.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
    if hermiticity_defect(a) > 1e-10 * scale {
        return Err(Error::Contract(format!(
            "eigh_psd requires a Hermitian matrix (defect {:.3e})",
            hermiticity_defect(a)
        )));
    }
    let (rows, cols) = a.dim();
    // Symmetrize to scrub roundoff before handing to LAPACK.
    let h = (a + &dagger(a)).mapv(|z| z * 0.5);
    let (vals, vecs) = h.eigh(UPLO::Lower).map_err(|e| Error::Decomposition {
        rows,
        cols,
        detail: e.to_string(),
    })?;
    // The backend hands back conjugated eigenvectors for complex input
    // (row-major round trip through LAPACK); undo that so a = V Λ V†.
    let vecs = vecs.mapv(|z| z.conj());
    let vals: Vec<f64> = vals
        .iter()
        .map(|&v| if v < 0.0 && v > -1e-10 { 0.0 } else { v })
        .collect();
    Ok((vals, vecs))
}

/// Polar (unitary) factor of a square matrix.
///
/// With `a = v · diag(s) · wdag`, returns `w · v†`, the unitary that
/// maximizes `Re Tr(U · a)` over all unitaries `U`.
pub fn polar_unitary(a: &CMat) -> Result<CMat> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(Error::Shape(format!(
            "polar_unitary requires a square matrix, got {rows}x{cols}"
        )));
    }
    let f = svd(a)?;
    Ok(dagger(&f.vdag).dot(&dagger(&f.u)))
}

/// Partial trace of `rho` over the tensor factors not in `keep`.
///
/// `dims[i]` is the local dimension of factor `i`; `keep` lists the
/// factors to retain (order within the output follows their order in
/// `dims`, duplicates ignored).
pub fn partial_trace(rho: &CMat, dims: &[usize], keep: &[usize]) -> Result<CMat> {
    let total: usize = dims.iter().product();
    if rho.dim() != (total, total) {
        return Err(Error::Shape(format!(
            "partial_trace: matrix is {:?} but dims product is {}",
            rho.dim(),
            total
        )));
    }
    let n = dims.len();
    let keep_mask: Vec<bool> = (0..n).map(|i| keep.contains(&i)).collect();
    // Row-major strides: factor i has stride prod(dims[i+1..]).
    let mut stride = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        stride[i] = stride[i + 1] * dims[i + 1];
    }
    let kept: Vec<usize> = (0..n).filter(|&i| keep_mask[i]).collect();
    let traced: Vec<usize> = (0..n).filter(|&i| !keep_mask[i]).collect();
    let dim_keep: usize = kept.iter().map(|&i| dims[i]).product();
    let dim_tr: usize = traced.iter().map(|&i| dims[i]).product();

    // Map a linear index over the kept (resp. traced) factors to its
    // contribution to the full row index.
    let offset = |factors: &[usize], mut lin: usize| -> usize {
        let mut off = 0;
        for &f in factors.iter().rev() {
            off += (lin % dims[f]) * stride[f];
            lin /= dims[f];
        }
        off
    };

    let mut out = CMat::zeros((dim_keep, dim_keep));
    for t in 0..dim_tr {
        let toff = offset(&traced, t);
        for rk in 0..dim_keep {
            let roff = offset(&kept, rk) + toff;
            for ck in 0..dim_keep {
                let coff = offset(&kept, ck) + toff;
                out[(rk, ck)] += rho[(roff, coff)];
            }
        }
    }
    Ok(out)
}

/// PSD square root via eigendecomposition (negative roundoff clamped).
pub fn psd_sqrt(a: &CMat) -> Result<CMat> {
    let (vals, vecs) = eigh_psd(a)?;
    // Eigenvalues at the roundoff floor are pure noise; square-rooting
    // them would amplify ~1e-16 to ~1e-8, so zero them first.
    let floor = vals.iter().fold(0.0_f64, |m, &v| m.max(v.abs())) * 1e-14;
    let roots: Vec<f64> = vals
        .iter()
        .map(|&v| if v > floor { v.sqrt() } else { 0.0 })
        .collect();
    let mut scaled = vecs.clone();
    for (j, &r) in roots.iter().enumerate() {
        scaled.column_mut(j).mapv_inplace(|z| z * r);
    }
    Ok(scaled.dot(&dagger(&vecs)))
}

/// Numerical rank of a general matrix (singular values vs `RANK_EPS`).
pub fn matrix_rank(a: &CMat) -> Result<usize> {
    Ok(svd(a)?.rank())
}

/// Trace norm ‖a‖₁ = Σ singular values.
pub fn trace_norm(a: &CMat) -> Result<f64> {
    Ok(svd(a)?.s.iter().sum())
}

/// Operator (spectral) norm.
pub fn spectral_norm(a: &CMat) -> Result<f64> {
    Ok(svd(a)?.s.first().copied().unwrap_or(0.0))
}

/// Outer product |v⟩⟨w|.
pub fn outer(v: &CVec, w: &CVec) -> CMat {
    let n = v.len();
    let m = w.len();
    let mut out = CMat::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            out[(i, j)] = v[i] * w[j].conj();
        }
    }
    out
}

/// Frobenius distance between two matrices.
pub fn fro_dist(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Gram–Schmidt orthonormalization of the columns of `a`, dropping
/// columns that fall below `RANK_EPS` of the largest original norm.
pub fn orthonormal_columns(a: &CMat) -> CMat {
    let (rows, cols) = a.dim();
    let mut basis: Vec<CVec> = Vec::new();
    let max_norm = (0..cols)
        .map(|j| a.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0_f64, f64::max)
        .max(1.0);
    for j in 0..cols {
        let mut v: CVec = a.column(j).to_owned();
        for _ in 0..2 {
            // Twice for numerical stability.
            for b in &basis {
                let overlap: C64 = b.iter().zip(v.iter()).map(|(x, y)| x.conj() * y).sum();
                v = &v - &b.mapv(|z| z * overlap);
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-10 * max_norm {
            basis.push(v.mapv(|z| z / norm));
        }
    }
    let mut out = CMat::zeros((rows, basis.len()));
    for (j, b) in basis.iter().enumerate() {
        out.column_mut(j).assign(b);
    }
    out
}

/// Reshape helper: dense column vector from matrix column.
pub fn to_cvec(v: nd::ArrayView1<C64>) -> CVec {
    v.to_owned()
}
