//! Open-boundary matrix product states.
//!
//! A state on `N` sites of uniform physical dimension `d` is stored as a
//! list of rank-3 tensors with index order **(left bond, physical, right
//! bond)** and boundary bond dimension 1:
//!
//! ```text
//!  1 - T[0] - χ1 - T[1] - χ2 - ... - χ(N-1) - T[N-1] - 1
//!       |           |                           |
//!       d           d                           d
//! ```
//!
//! The physical state is `exp(log_norm)` times the contraction of the
//! tensor network; the `log_norm` field lets norms shrink multiplicatively
//! (e.g. under rank-1 projections) without underflow. All operations
//! return new values; `Mps` is immutable in spirit and cheap to clone at
//! desk scale.

use ndarray as nd;

use crate::error::{Error, Result};
use crate::numerics::{self, rank_from_values, svd};
use crate::{C64, CMat, CVec};

/// Rank-3 site tensor (left bond, physical, right bond).
pub type SiteTensor = nd::Array3<C64>;

/// Which canonical gauge the tensors are currently in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CanonicalForm {
    /// No gauge guarantee.
    None,
    /// Mixed-canonical with orthogonality center at the given site:
    /// tensors left of it are left-isometries, tensors right of it are
    /// right-isometries.
    Mixed(usize),
}

/// Dense density matrix on a contiguous site window.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    /// First site of the window.
    pub start: usize,
    /// Number of sites in the window.
    pub len: usize,
    /// Local dimension of each site in the window.
    pub site_dim: usize,
    /// Hermitian, unit-trace matrix of dimension `site_dim^len`.
    pub matrix: CMat,
}

impl DensityMatrix {
    /// Wrap a matrix as a density matrix, checking Hermiticity, unit
    /// trace, and positivity (to the documented tolerances).
    pub fn new(start: usize, len: usize, site_dim: usize, matrix: CMat) -> Result<Self> {
        let dim = site_dim.pow(len as u32);
        if matrix.dim() != (dim, dim) {
            return Err(Error::Shape(format!(
                "density matrix for {len} sites of dim {site_dim} must be {dim}x{dim}, got {:?}",
                matrix.dim()
            )));
        }
        if numerics::hermiticity_defect(&matrix) > 1e-10 {
            return Err(Error::Contract(
                "density matrix not Hermitian to 1e-10".into(),
            ));
        }
        let tr = numerics::trace(&matrix);
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::Contract(format!(
                "density matrix trace {tr} is not 1 to 1e-10"
            )));
        }
        Ok(Self {
            start,
            len,
            site_dim,
            matrix,
        })
    }

    /// Matrix dimension `site_dim^len`.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Numerical rank at the global zero threshold.
    pub fn rank(&self) -> Result<usize> {
        let (vals, _) = numerics::eigh_psd(&self.matrix)?;
        Ok(rank_from_values(&vals))
    }
}

/// Schmidt coefficients across one bond.
#[derive(Debug, Clone)]
pub struct SchmidtSpectrum {
    /// Bond index: the cut between sites `cut` and `cut + 1`.
    pub cut: usize,
    /// Nonincreasing, nonnegative coefficients of the physical state.
    pub coefficients: Vec<f64>,
}

/// Byte budget for dense intermediates, overridable via the
/// `LOCALMPS_CAP_BYTES` environment variable. All dense caps derive
/// from this: a full statevector may hold `cap/16` complex entries
/// (default 2^24), an RDM may have dimension `sqrt(cap/16)` (default
/// 4096), and a local operator dimension `cap/2^18` (default 1024,
/// i.e. width 10 at d = 2).
pub fn cap_bytes() -> usize {
    std::env::var("LOCALMPS_CAP_BYTES")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1usize << 28)
}

/// Maximum number of amplitudes a dense statevector may hold.
pub fn dense_entry_cap() -> usize {
    cap_bytes() / 16
}

/// Maximum dimension of a dense reduced density matrix.
pub fn rdm_dim_cap() -> usize {
    ((dense_entry_cap() as f64).sqrt()) as usize
}

/// Maximum dimension of a dense local operator.
pub fn op_dim_cap() -> usize {
    (cap_bytes() >> 18).max(4)
}

/// Open-boundary matrix product state.
#[derive(Debug, Clone)]
pub struct Mps {
    // Uniform physical dimension per site.
    pub(crate) site_dim: usize,
    // One rank-3 tensor per site, index order (left, physical, right).
    pub(crate) tensors: Vec<SiteTensor>,
    // The physical state is exp(log_norm) times the network contraction.
    pub(crate) log_norm: f64,
    pub(crate) canonical_form: CanonicalForm,
}

impl Mps {
    /// Number of sites.
    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    /// Physical dimension per site.
    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    /// Accumulated log-norm factor.
    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    /// Current gauge.
    pub fn canonical_form(&self) -> CanonicalForm {
        self.canonical_form
    }

    /// Site tensor (left, physical, right).
    pub fn tensor(&self, site: usize) -> &SiteTensor {
        &self.tensors[site]
    }

    /// Build from raw tensors; validates bond consistency.
    pub fn from_tensors(site_dim: usize, tensors: Vec<SiteTensor>, log_norm: f64) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::Shape("MPS needs at least one site".into()));
        }
        if tensors[0].dim().0 != 1 || tensors.last().unwrap().dim().2 != 1 {
            return Err(Error::Shape("boundary bonds must have dimension 1".into()));
        }
        for (i, t) in tensors.iter().enumerate() {
            if t.dim().1 != site_dim {
                return Err(Error::Shape(format!(
                    "site {i} has physical dimension {} but expected {site_dim}",
                    t.dim().1
                )));
            }
            if i + 1 < tensors.len() && t.dim().2 != tensors[i + 1].dim().0 {
                return Err(Error::Shape(format!(
                    "bond between sites {i} and {} disagrees: {} vs {}",
                    i + 1,
                    t.dim().2,
                    tensors[i + 1].dim().0
                )));
            }
        }
        Ok(Self {
            site_dim,
            tensors,
            log_norm,
            canonical_form: CanonicalForm::None,
        })
    }

    /// Product state from per-site local vectors (each of length `d`,
    /// not necessarily normalized).
    pub fn product_state(site_dim: usize, locals: &[CVec]) -> Result<Self> {
        let mut log_norm = 0.0;
        let mut tensors = Vec::with_capacity(locals.len());
        for v in locals {
            if v.len() != site_dim {
                return Err(Error::Shape(format!(
                    "local vector length {} != site dimension {site_dim}",
                    v.len()
                )));
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::Domain("zero local vector in product state".into()));
            }
            log_norm += norm.ln();
            let t = SiteTensor::from_shape_fn((1, site_dim, 1), |(_, p, _)| v[p] / norm);
            tensors.push(t);
        }
        let mut m = Self::from_tensors(site_dim, tensors, log_norm)?;
        m.canonical_form = CanonicalForm::Mixed(0);
        Ok(m)
    }

    /// Computational basis state |x_0 x_1 ... x_{N-1}⟩.
    pub fn basis_state(site_dim: usize, indices: &[usize]) -> Result<Self> {
        let locals: Vec<CVec> = indices
            .iter()
            .map(|&x| {
                let mut v = CVec::zeros(site_dim);
                v[x] = C64::new(1.0, 0.0);
                v
            })
            .collect();
        Self::product_state(site_dim, &locals)
    }

    /// Exact MPS factorization of a dense amplitude vector.
    pub fn from_dense(amplitudes: &CVec, d: usize, n: usize) -> Result<Self> {
        let len = d.checked_pow(n as u32).ok_or_else(|| {
            Error::Resource(format!("d^n overflows for d={d}, n={n}"))
        })?;
        if amplitudes.len() != len {
            return Err(Error::Shape(format!(
                "amplitude vector length {} != d^n = {len}",
                amplitudes.len()
            )));
        }
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Domain("cannot factor the zero vector".into()));
        }
        let log_norm = norm.ln();
        // Successive left-to-right SVDs of the reshaped amplitude tensor.
        let mut rest = CMat::from_shape_fn((1, len), |(_, j)| amplitudes[j] / norm);
        let mut tensors = Vec::with_capacity(n);
        for _site in 0..n - 1 {
            let (l, cols) = rest.dim();
            let m = rest
                .into_shape((l * d, cols / d))
                .expect("reshape (l*d, cols/d)");
            let f = svd(&m)?;
            let r = f.rank().max(1);
            let u = f.u.slice(nd::s![.., ..r]).to_owned();
            tensors.push(u.into_shape((l, d, r)).expect("reshape site tensor"));
            let mut sv = f.vdag.slice(nd::s![..r, ..]).to_owned();
            for (i, &s) in f.s[..r].iter().enumerate() {
                sv.row_mut(i).mapv_inplace(|z| z * s);
            }
            rest = sv;
        }
        let (l, _) = rest.dim();
        tensors.push(rest.into_shape((l, d, 1)).expect("reshape last tensor"));
        let mut m = Self::from_tensors(d, tensors, log_norm)?;
        m.canonical_form = CanonicalForm::Mixed(n - 1);
        Ok(m)
    }

    /// Dense amplitude vector (includes the `log_norm` factor).
    pub fn to_dense(&self) -> Result<CVec> {
        let d = self.site_dim;
        let n = self.n_sites();
        let total = d.checked_pow(n as u32).filter(|&t| t <= dense_entry_cap());
        let total = total.ok_or_else(|| {
            Error::Resource(format!(
                "dense vector of d^N = {d}^{n} entries exceeds the configured cap"
            ))
        })?;
        // Fold left to right: acc has shape (phys_so_far, right_bond).
        let mut acc = CMat::from_elem((1, 1), C64::new(1.0, 0.0));
        for t in &self.tensors {
            let (l, _, r) = t.dim();
            let p = acc.nrows();
            let tm = t.to_owned().into_shape((l, d * r)).expect("reshape");
            let prod = acc.dot(&tm); // (p, d*r)
            acc = prod.into_shape((p * d, r)).expect("reshape fold");
        }
        let scale = C64::new(self.log_norm.exp(), 0.0);
        let v = acc.into_shape(total).expect("final reshape");
        Ok(v.mapv(|z| z * scale))
    }

    /// Physical norm ‖ψ‖ (includes `log_norm`).
    pub fn norm(&self) -> f64 {
        let raw: f64 = contraction_norm(&self.tensors);
        raw * self.log_norm.exp()
    }

    /// Rescale so the physical norm is 1 (norm absorbed into `log_norm`
    /// is discarded).
    pub fn normalized(&self) -> Result<Self> {
        let mut out = self.clone();
        let raw = contraction_norm(&out.tensors);
        if raw <= 0.0 {
            return Err(Error::Domain("cannot normalize a zero state".into()));
        }
        out.log_norm = -raw.ln();
        Ok(out)
    }

    /// Bring to mixed-canonical form with orthogonality center at
    /// `center`; the physical state is unchanged. Singular values below
    /// the global zero threshold are dropped, so bonds shrink to the
    /// true Schmidt rank.
    pub fn canonicalize(&self, center: usize) -> Result<Self> {
        let n = self.n_sites();
        if center >= n {
            return Err(Error::Index(format!(
                "canonical center {center} out of range for {n} sites"
            )));
        }
        let d = self.site_dim;
        let mut t: Vec<SiteTensor> = self.tensors.clone();
        // Left-to-right sweep up to the center.
        for i in 0..center {
            let (l, _, r) = t[i].dim();
            let m = t[i].clone().into_shape((l * d, r)).expect("reshape");
            let f = svd(&m)?;
            let keep = f.rank().max(1);
            let u = f.u.slice(nd::s![.., ..keep]).to_owned();
            t[i] = u.into_shape((l, d, keep)).expect("reshape");
            let mut sv = f.vdag.slice(nd::s![..keep, ..]).to_owned();
            for (j, &s) in f.s[..keep].iter().enumerate() {
                sv.row_mut(j).mapv_inplace(|z| z * s);
            }
            // Absorb into the next tensor over its left bond.
            let (ln, _, rn) = t[i + 1].dim();
            let next = t[i + 1].clone().into_shape((ln, d * rn)).expect("reshape");
            t[i + 1] = sv
                .dot(&next)
                .into_shape((keep, d, rn))
                .expect("reshape next");
        }
        // Right-to-left sweep down to the center.
        for i in (center + 1..n).rev() {
            let (l, _, r) = t[i].dim();
            let m = t[i].clone().into_shape((l, d * r)).expect("reshape");
            let f = svd(&m)?;
            let keep = f.rank().max(1);
            let vd = f.vdag.slice(nd::s![..keep, ..]).to_owned();
            t[i] = vd.into_shape((keep, d, r)).expect("reshape");
            let mut us = f.u.slice(nd::s![.., ..keep]).to_owned();
            for (j, &s) in f.s[..keep].iter().enumerate() {
                us.column_mut(j).mapv_inplace(|z| z * s);
            }
            let (lp, _, _) = t[i - 1].dim();
            let prev = t[i - 1].clone().into_shape((lp * d, l)).expect("reshape");
            t[i - 1] = prev
                .dot(&us)
                .into_shape((lp, d, keep))
                .expect("reshape prev");
        }
        Ok(Self {
            site_dim: d,
            tensors: t,
            log_norm: self.log_norm,
            canonical_form: CanonicalForm::Mixed(center),
        })
    }

    /// Schmidt coefficients of the physical state across the bond
    /// between sites `cut` and `cut + 1`.
    pub fn schmidt_spectrum(&self, cut: usize) -> Result<SchmidtSpectrum> {
        if cut + 1 >= self.n_sites() {
            return Err(Error::Index(format!(
                "cut {cut} out of range for {} sites",
                self.n_sites()
            )));
        }
        let c = self.canonicalize(cut)?;
        let (l, d, r) = c.tensors[cut].dim();
        let m = c.tensors[cut]
            .clone()
            .into_shape((l * d, r))
            .expect("reshape");
        let f = svd(&m)?;
        let scale = self.log_norm.exp();
        let keep = f.rank().max(1);
        Ok(SchmidtSpectrum {
            cut,
            coefficients: f.s[..keep].iter().map(|&s| s * scale).collect(),
        })
    }

    /// Bond dimensions (true Schmidt ranks) at all `N − 1` cuts.
    pub fn bond_profile(&self) -> Vec<usize> {
        // Canonicalization drops zero singular values, so a full sweep to
        // the rightmost site followed by a read-off of bond sizes after a
        // sweep back reports minimal ranks.
        let n = self.n_sites();
        if n == 1 {
            return Vec::new();
        }
        let c = self
            .canonicalize(n - 1)
            .and_then(|m| m.canonicalize(0))
            .unwrap_or_else(|_| self.clone());
        (0..n - 1).map(|i| c.tensors[i].dim().2).collect()
    }

    /// Truncate to bond dimension at most `chi_p` at each listed cut.
    ///
    /// Returns the truncated, renormalized state and the discarded
    /// Schmidt weight `Σ_tail λ_i²` (λ normalized) per cut, in the order
    /// of `cuts`.
    pub fn truncate_at_cuts(&self, cuts: &[usize], chi_p: usize) -> Result<(Self, Vec<f64>)> {
        if chi_p == 0 {
            return Err(Error::Parameter("chi_p must be at least 1".into()));
        }
        let mut state = self.clone();
        let mut weights = vec![0.0; cuts.len()];
        // Process cuts in ascending site order for an efficient sweep, but
        // report weights in the caller's order.
        let mut order: Vec<usize> = (0..cuts.len()).collect();
        order.sort_by_key(|&i| cuts[i]);
        for &oi in &order {
            let cut = cuts[oi];
            if cut + 1 >= state.n_sites() {
                return Err(Error::Index(format!(
                    "cut {cut} out of range for {} sites",
                    state.n_sites()
                )));
            }
            state = state.canonicalize(cut)?;
            let d = state.site_dim;
            let (l, _, r) = state.tensors[cut].dim();
            let m = state.tensors[cut]
                .clone()
                .into_shape((l * d, r))
                .expect("reshape");
            let f = svd(&m)?;
            let total: f64 = f.s.iter().map(|s| s * s).sum();
            let keep = chi_p.min(f.rank().max(1));
            let kept: f64 = f.s[..keep].iter().map(|s| s * s).sum();
            weights[oi] = ((total - kept) / total).max(0.0);
            // Renormalize the kept coefficients so the state norm is
            // unchanged, fold U·diag(s') back as the center and the right
            // isometry into the next site.
            let rescale = (total / kept).sqrt();
            let mut us = f.u.slice(nd::s![.., ..keep]).to_owned();
            for (j, &s) in f.s[..keep].iter().enumerate() {
                us.column_mut(j).mapv_inplace(|z| z * s * rescale);
            }
            state.tensors[cut] = us.into_shape((l, d, keep)).expect("reshape");
            let vd = f.vdag.slice(nd::s![..keep, ..]).to_owned();
            let (_, _, rn) = state.tensors[cut + 1].dim();
            let next = state.tensors[cut + 1]
                .clone()
                .into_shape((r, d * rn))
                .expect("reshape");
            state.tensors[cut + 1] = vd
                .dot(&next)
                .into_shape((keep, d, rn))
                .expect("reshape next");
            state.canonical_form = CanonicalForm::Mixed(cut);
        }
        Ok((state, weights))
    }

    /// Exact superposition `ca·a + cb·b` as a direct-sum MPS; bond
    /// profile is the sum of the input profiles (no compression).
    pub fn add(a: &Self, b: &Self, ca: C64, cb: C64) -> Result<Self> {
        if a.n_sites() != b.n_sites() || a.site_dim != b.site_dim {
            return Err(Error::Shape(format!(
                "cannot add MPS of shapes (N={}, d={}) and (N={}, d={})",
                a.n_sites(),
                a.site_dim,
                b.n_sites(),
                b.site_dim
            )));
        }
        let n = a.n_sites();
        let d = a.site_dim;
        let wa = ca * C64::new(a.log_norm.exp(), 0.0);
        let wb = cb * C64::new(b.log_norm.exp(), 0.0);
        if n == 1 {
            let t = a.tensors[0].mapv(|z| z * wa) + b.tensors[0].mapv(|z| z * wb);
            return Self::from_tensors(d, vec![t], 0.0);
        }
        let mut tensors = Vec::with_capacity(n);
        for i in 0..n {
            let ta = &a.tensors[i];
            let tb = &b.tensors[i];
            let (la, _, ra) = ta.dim();
            let (lb, _, rb) = tb.dim();
            let t = if i == 0 {
                // Row block [wa·A | wb·B].
                let mut t = SiteTensor::zeros((1, d, ra + rb));
                for p in 0..d {
                    for r in 0..ra {
                        t[(0, p, r)] = wa * ta[(0, p, r)];
                    }
                    for r in 0..rb {
                        t[(0, p, ra + r)] = wb * tb[(0, p, r)];
                    }
                }
                t
            } else if i == n - 1 {
                // Column block [A; B].
                let mut t = SiteTensor::zeros((la + lb, d, 1));
                for p in 0..d {
                    for l in 0..la {
                        t[(l, p, 0)] = ta[(l, p, 0)];
                    }
                    for l in 0..lb {
                        t[(la + l, p, 0)] = tb[(l, p, 0)];
                    }
                }
                t
            } else {
                // Block-diagonal in the bond indices.
                let mut t = SiteTensor::zeros((la + lb, d, ra + rb));
                for p in 0..d {
                    for l in 0..la {
                        for r in 0..ra {
                            t[(l, p, r)] = ta[(l, p, r)];
                        }
                    }
                    for l in 0..lb {
                        for r in 0..rb {
                            t[(la + l, p, ra + r)] = tb[(l, p, r)];
                        }
                    }
                }
                t
            };
            tensors.push(t);
        }
        Self::from_tensors(d, tensors, 0.0)
    }

    /// Inner product ⟨a|b⟩ including `log_norm` factors.
    pub fn inner(a: &Self, b: &Self) -> Result<C64> {
        if a.n_sites() != b.n_sites() || a.site_dim != b.site_dim {
            return Err(Error::Shape("inner product of mismatched MPS".into()));
        }
        let d = a.site_dim;
        // Transfer-matrix contraction left to right.
        let mut env = CMat::from_elem((1, 1), C64::new(1.0, 0.0));
        for (ta, tb) in a.tensors.iter().zip(b.tensors.iter()) {
            let (la, _, ra) = ta.dim();
            let (lb, _, rb) = tb.dim();
            // tmp[la, p, rb] = Σ_lb env[la, lb]·tb[lb, p, rb]
            let tbm = tb.to_owned().into_shape((lb, d * rb)).expect("reshape");
            let tmp = env.dot(&tbm); // (la, d*rb)
            // env'[ra, rb] = Σ_{la,p} conj(ta[la,p,ra])·tmp[la,p,rb]
            let tam = ta.to_owned().into_shape((la * d, ra)).expect("reshape");
            let tmp = tmp.into_shape((la * d, rb)).expect("reshape");
            env = numerics::dagger(&tam).dot(&tmp);
        }
        let scale = (a.log_norm + b.log_norm).exp();
        Ok(env[(0, 0)] * scale)
    }

    /// Normalized reduced density matrix on the window `[start, start + k)`.
    pub fn rdm(&self, start: usize, k: usize) -> Result<DensityMatrix> {
        let n = self.n_sites();
        let d = self.site_dim;
        if k == 0 || start + k > n {
            return Err(Error::Index(format!(
                "window ({start}, {k}) out of range for {n} sites"
            )));
        }
        let dim = d.checked_pow(k as u32).filter(|&x| x <= rdm_dim_cap());
        let dim = dim.ok_or_else(|| {
            Error::Resource(format!(
                "RDM dimension {d}^{k} exceeds the configured cap {}",
                rdm_dim_cap()
            ))
        })?;
        let c = self.canonicalize(start)?;
        // Contract the window tensors into Θ (left, d^k, right); with the
        // center at `start`, environments on both sides are identities.
        let mut theta = c.tensors[start].clone();
        for i in start + 1..start + k {
            let (l, p, r) = theta.dim();
            let (rl, _, rr) = c.tensors[i].dim();
            let a = theta.into_shape((l * p, r)).expect("reshape");
            let b = c.tensors[i]
                .clone()
                .into_shape((rl, d * rr))
                .expect("reshape");
            theta = a
                .dot(&b)
                .into_shape((l, p * d, rr))
                .expect("reshape theta");
        }
        let (l, p, r) = theta.dim();
        debug_assert_eq!(p, dim);
        // rdm[P, P'] = Σ_{l,r} Θ[l,P,r]·conj(Θ[l,P',r]).
        let mut m = CMat::zeros((p, l * r));
        for li in 0..l {
            for pi in 0..p {
                for ri in 0..r {
                    m[(pi, li * r + ri)] = theta[(li, pi, ri)];
                }
            }
        }
        let mut rho = m.dot(&numerics::dagger(&m));
        let tr = numerics::trace(&rho).re;
        if tr <= 0.0 {
            return Err(Error::Domain("RDM of a zero state".into()));
        }
        rho.mapv_inplace(|z| z / tr);
        DensityMatrix::new(start, k, d, rho)
    }

    /// Normalized reduced density matrices on every contiguous `k`-site
    /// window, computed in a single canonical sweep.
    ///
    /// Equivalent to calling [`Mps::rdm`] for each start, but the
    /// orthogonality center is moved one site at a time instead of
    /// re-canonicalizing per window.
    pub fn rdm_sweep(&self, k: usize) -> Result<Vec<DensityMatrix>> {
        let n = self.n_sites();
        let d = self.site_dim;
        if k == 0 || k > n {
            return Err(Error::Index(format!(
                "window length {k} out of range for {n} sites"
            )));
        }
        let dim = d.checked_pow(k as u32).filter(|&x| x <= rdm_dim_cap());
        let dim = dim.ok_or_else(|| {
            Error::Resource(format!(
                "RDM dimension {d}^{k} exceeds the configured cap {}",
                rdm_dim_cap()
            ))
        })?;
        let mut t = self.canonicalize(0)?.tensors;
        let mut out = Vec::with_capacity(n - k + 1);
        for start in 0..=n - k {
            // Contract the window tensors into Θ (left, d^k, right); the
            // center sits at `start`, so both environments are identities.
            let mut theta = t[start].clone();
            for tensor in t.iter().take(start + k).skip(start + 1) {
                let (l, p, r) = theta.dim();
                let (rl, _, rr) = tensor.dim();
                let a = theta.into_shape((l * p, r)).expect("reshape");
                let b = tensor.clone().into_shape((rl, d * rr)).expect("reshape");
                theta = a.dot(&b).into_shape((l, p * d, rr)).expect("reshape");
            }
            let (l, p, r) = theta.dim();
            debug_assert_eq!(p, dim);
            let mut m = CMat::zeros((p, l * r));
            for li in 0..l {
                for pi in 0..p {
                    for ri in 0..r {
                        m[(pi, li * r + ri)] = theta[(li, pi, ri)];
                    }
                }
            }
            let mut rho = m.dot(&numerics::dagger(&m));
            let tr = numerics::trace(&rho).re;
            if tr <= 0.0 {
                return Err(Error::Domain("RDM of a zero state".into()));
            }
            rho.mapv_inplace(|z| z / tr);
            out.push(DensityMatrix::new(start, k, d, rho)?);
            // Move the center from `start` to `start + 1`; a thin QR
            // suffices because no truncation happens here.
            if start + 1 <= n - k {
                let (l, _, r) = t[start].dim();
                let m = t[start].clone().into_shape((l * d, r)).expect("reshape");
                let (q, rm) = numerics::qr_thin(&m)?;
                let keep = q.ncols();
                t[start] = q.into_shape((l, d, keep)).expect("reshape");
                let (ln, _, rn) = t[start + 1].dim();
                let next = t[start + 1]
                    .clone()
                    .into_shape((ln, d * rn))
                    .expect("reshape");
                t[start + 1] = rm.dot(&next).into_shape((keep, d, rn)).expect("reshape");
            }
        }
        Ok(out)
    }

    /// Compress to true Schmidt ranks (singular values below the global
    /// zero threshold dropped at every cut) via two canonical sweeps.
    pub fn compressed(&self) -> Result<Self> {
        let n = self.n_sites();
        if n == 1 {
            return Ok(self.clone());
        }
        self.canonicalize(n - 1)?.canonicalize(0)
    }

    /// Normalized joint reduced density matrix of two disjoint windows
    /// `[sa, sa + ka)` and `[sc, sc + kc)` with `sa + ka ≤ sc`. The
    /// result lives on `site_dim^(ka + kc)` with the A-window as the
    /// high-order factor; its recorded window is `(sa, ka + kc)`.
    pub fn rdm_two_windows(
        &self,
        (sa, ka): (usize, usize),
        (sc, kc): (usize, usize),
    ) -> Result<DensityMatrix> {
        let n = self.n_sites();
        let d = self.site_dim;
        if ka == 0 || kc == 0 || sa + ka > sc || sc + kc > n {
            return Err(Error::Domain(format!(
                "windows ({sa},{ka}) and ({sc},{kc}) must be disjoint, ordered, and in range"
            )));
        }
        let dim = d
            .checked_pow((ka + kc) as u32)
            .filter(|&x| x <= rdm_dim_cap())
            .ok_or_else(|| {
                Error::Resource(format!(
                    "joint RDM dimension {d}^{} exceeds the configured cap",
                    ka + kc
                ))
            })?;
        let c = self.canonicalize(sa)?;
        let da = d.pow(ka as u32);
        // Contract the A window: Θ (l, da, m); left environment is the
        // identity because the center sits at sa.
        let mut theta = c.tensors[sa].clone();
        for i in sa + 1..sa + ka {
            let (l, p, r) = theta.dim();
            let (rl, _, rr) = c.tensors[i].dim();
            let a = theta.into_shape((l * p, r)).expect("reshape");
            let b = c.tensors[i]
                .clone()
                .into_shape((rl, d * rr))
                .expect("reshape");
            theta = a.dot(&b).into_shape((l, p * d, rr)).expect("reshape");
        }
        let (l, _, m) = theta.dim();
        // X[(pa, pa'), (m, m')] = Σ_l Θ[l,pa,m]·conj(Θ[l,pa',m']).
        let flat = theta.into_shape((l, da * m)).expect("reshape");
        let mut x = CMat::zeros((da * da, m * m));
        for li in 0..l {
            for pa in 0..da {
                for mi in 0..m {
                    let v = flat[(li, pa * m + mi)];
                    if v == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for pap in 0..da {
                        for mp in 0..m {
                            x[(pa * da + pap, mi * m + mp)] +=
                                v * flat[(li, pap * m + mp)].conj();
                        }
                    }
                }
            }
        }
        // Transfer through the middle sites: X ← Σ_p (t ⊗ conj t).
        let mut bond = m;
        for i in sa + ka..sc {
            let t = &c.tensors[i];
            let (bl, _, br) = t.dim();
            debug_assert_eq!(bl, bond);
            let mut xn = CMat::zeros((da * da, br * br));
            for row in 0..da * da {
                for mi in 0..bl {
                    for mp in 0..bl {
                        let v = x[(row, mi * bl + mp)];
                        if v == C64::new(0.0, 0.0) {
                            continue;
                        }
                        for p in 0..d {
                            for ri in 0..br {
                                let tv = t[(mi, p, ri)];
                                if tv == C64::new(0.0, 0.0) {
                                    continue;
                                }
                                for rp in 0..br {
                                    xn[(row, ri * br + rp)] +=
                                        v * tv * t[(mp, p, rp)].conj();
                                }
                            }
                        }
                    }
                }
            }
            x = xn;
            bond = br;
        }
        // Grow the C window physical indices, then close with the right
        // identity (everything right of the center is right-canonical).
        let dc = d.pow(kc as u32);
        // y[(pa,pa'), (pc, pc'), (r, r')] stored as (da², dc², bond²).
        let mut y = nd::Array3::<C64>::zeros((da * da, 1, bond * bond));
        for (row, mut slab) in y.outer_iter_mut().enumerate() {
            for b2 in 0..bond * bond {
                slab[(0, b2)] = x[(row, b2)];
            }
        }
        let mut pc_dim = 1usize;
        for i in sc..sc + kc {
            let t = &c.tensors[i];
            let (bl, _, br) = t.dim();
            let mut yn = nd::Array3::<C64>::zeros((da * da, pc_dim * d * pc_dim * d, br * br));
            for row in 0..da * da {
                for pc in 0..pc_dim {
                    for pcp in 0..pc_dim {
                        for mi in 0..bl {
                            for mp in 0..bl {
                                let v = y[(row, (pc * pc_dim + pcp), mi * bl + mp)];
                                if v == C64::new(0.0, 0.0) {
                                    continue;
                                }
                                for p in 0..d {
                                    for ri in 0..br {
                                        let tv = t[(mi, p, ri)];
                                        if tv == C64::new(0.0, 0.0) {
                                            continue;
                                        }
                                        for pp in 0..d {
                                            for rp in 0..br {
                                                let w = tv * t[(mp, pp, rp)].conj();
                                                yn[(
                                                    row,
                                                    (pc * d + p) * pc_dim * d + (pcp * d + pp),
                                                    ri * br + rp,
                                                )] += v * w;
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            y = yn;
            pc_dim *= d;
            bond = br;
        }
        let mut rho = CMat::zeros((dim, dim));
        for pa in 0..da {
            for pap in 0..da {
                for pc in 0..dc {
                    for pcp in 0..dc {
                        let mut acc = C64::new(0.0, 0.0);
                        for r in 0..bond {
                            acc += y[(pa * da + pap, pc * dc + pcp, r * bond + r)];
                        }
                        rho[(pa * dc + pc, pap * dc + pcp)] = acc;
                    }
                }
            }
        }
        let tr = numerics::trace(&rho).re;
        if tr <= 0.0 {
            return Err(Error::Domain("joint RDM of a zero state".into()));
        }
        rho.mapv_inplace(|z| z / tr);
        // Scrub the tiny Hermiticity roundoff from the chained loops.
        let rho = (&rho + &numerics::dagger(&rho)).mapv(|z| z * 0.5);
        DensityMatrix::new(sa, ka + kc, d, rho)
    }

    /// Apply a dense operator on `width` contiguous sites starting at
    /// `start`. Exact: the dense state transforms as `(I ⊗ op ⊗ I)·ψ`.
    pub fn apply_local_operator(&self, op: &CMat, start: usize, width: usize) -> Result<Self> {
        let n = self.n_sites();
        let d = self.site_dim;
        if width == 0 || start + width > n {
            return Err(Error::Index(format!(
                "operator range ({start}, {width}) out of range for {n} sites"
            )));
        }
        let dim = d
            .checked_pow(width as u32)
            .filter(|&x| x <= op_dim_cap())
            .ok_or_else(|| {
                Error::Resource(format!(
                    "operator dimension {d}^{width} exceeds the configured cap {}",
                    op_dim_cap()
                ))
            })?;
        if op.dim() != (dim, dim) {
            return Err(Error::Shape(format!(
                "operator must be {dim}x{dim}, got {:?}",
                op.dim()
            )));
        }
        // Contract the window into Θ, apply, and re-split by SVD.
        let mut theta = self.tensors[start].clone();
        for i in start + 1..start + width {
            let (l, p, r) = theta.dim();
            let (rl, _, rr) = self.tensors[i].dim();
            let a = theta.into_shape((l * p, r)).expect("reshape");
            let b = self.tensors[i]
                .clone()
                .into_shape((rl, d * rr))
                .expect("reshape");
            theta = a.dot(&b).into_shape((l, p * d, rr)).expect("reshape");
        }
        let (l, p, r) = theta.dim();
        // Θ'[l, Q, r] = Σ_P op[Q, P]·Θ[l, P, r]: move phys to the front.
        let perm = theta.permuted_axes([1, 0, 2]); // (p, l, r)
        let pm = perm
            .as_standard_layout()
            .to_owned()
            .into_shape((p, l * r))
            .expect("reshape");
        let applied = op.dot(&pm).into_shape((p, l, r)).expect("reshape");
        let theta = applied
            .permuted_axes([1, 0, 2])
            .as_standard_layout()
            .to_owned(); // (l, p, r)

        let mut tensors = self.tensors.clone();
        let mut rest = theta.into_shape((l, p * r)).expect("reshape flat");
        let mut left = l;
        for (step, site) in (start..start + width - 1).enumerate() {
            let remaining_phys = d.pow((width - 1 - step) as u32);
            let m = rest
                .into_shape((left * d, remaining_phys * r))
                .expect("reshape split");
            let f = svd(&m)?;
            let keep = f.rank().max(1);
            let u = f.u.slice(nd::s![.., ..keep]).to_owned();
            tensors[site] = u.into_shape((left, d, keep)).expect("reshape site");
            let mut sv = f.vdag.slice(nd::s![..keep, ..]).to_owned();
            for (j, &s) in f.s[..keep].iter().enumerate() {
                sv.row_mut(j).mapv_inplace(|z| z * s);
            }
            rest = sv;
            left = keep;
        }
        tensors[start + width - 1] = rest.into_shape((left, d, r)).expect("reshape last");
        let mut out = Self::from_tensors(d, tensors, self.log_norm)?;
        out.canonical_form = CanonicalForm::None;
        Ok(out)
    }

    /// Contract the window `[start, start + bra.n_sites())` against the
    /// bra of the given state, returning the (unnormalized) state left
    /// on the remaining sites.
    ///
    /// This evaluates `(I ⊗ ⟨bra| ⊗ I)|ψ⟩`, so the squared norm of the
    /// result is the expectation of the rank-one window projector
    /// `|bra⟩⟨bra|` when `bra` is normalized.  The window's boundary
    /// bonds are bridged by folding the contracted transfer matrix into
    /// the nearest surviving tensor.
    pub fn project_window(&self, start: usize, bra: &Self) -> Result<Self> {
        let n = self.n_sites();
        let d = self.site_dim;
        let w = bra.n_sites();
        if bra.site_dim != d {
            return Err(Error::Shape(format!(
                "bra site dimension {} does not match {d}",
                bra.site_dim
            )));
        }
        if w == 0 || start + w > n {
            return Err(Error::Index(format!(
                "window ({start}, {w}) out of range for {n} sites"
            )));
        }
        if w == n {
            return Err(Error::Domain(
                "window covers the whole chain; use `inner` for full overlaps".into(),
            ));
        }
        // C[a, (r, v)]: open left bond `a` of the window against the
        // running right bonds of state (`r`) and bra (`v`).
        let pl = self.tensors[start].dim().0;
        let mut cur = CMat::zeros((pl, pl));
        for a in 0..pl {
            cur[(a, a)] = C64::new(1.0, 0.0);
        }
        let mut rb = 1usize; // current bra right-bond dimension
        for (offset, bt) in bra.tensors.iter().enumerate() {
            let st = &self.tensors[start + offset];
            let (r_in, _, r_out) = st.dim();
            let (v_in, _, v_out) = bt.dim();
            if cur.ncols() != r_in * v_in {
                return Err(Error::Internal("window transfer bond mismatch".into()));
            }
            let mut next = CMat::zeros((pl, r_out * v_out));
            for a in 0..pl {
                for r in 0..r_in {
                    for v in 0..v_in {
                        let c = cur[(a, r * v_in + v)];
                        if c == C64::new(0.0, 0.0) {
                            continue;
                        }
                        for p in 0..d {
                            for rp in 0..r_out {
                                let sval = st[(r, p, rp)];
                                if sval == C64::new(0.0, 0.0) {
                                    continue;
                                }
                                for vp in 0..v_out {
                                    next[(a, rp * v_out + vp)] +=
                                        c * sval * bt[(v, p, vp)].conj();
                                }
                            }
                        }
                    }
                }
            }
            cur = next;
            rb = v_out;
        }
        if rb != 1 {
            return Err(Error::Shape(
                "bra boundary bonds must have dimension 1".into(),
            ));
        }
        // `cur` is now the bridge matrix S[a, b] between the window's
        // outer bonds.
        let bridge = cur;
        let mut tensors: Vec<SiteTensor> = Vec::with_capacity(n - w);
        if start > 0 {
            for i in 0..start - 1 {
                tensors.push(self.tensors[i].clone());
            }
            let t = &self.tensors[start - 1];
            let (l, p, r) = t.dim();
            let flat = t.clone().into_shape((l * p, r)).expect("reshape");
            let folded = flat.dot(&bridge);
            let rnew = folded.ncols();
            tensors.push(folded.into_shape((l, p, rnew)).expect("reshape"));
            for i in start + w..n {
                tensors.push(self.tensors[i].clone());
            }
        } else {
            let t = &self.tensors[w];
            let (l, p, r) = t.dim();
            let flat = t.clone().into_shape((l, p * r)).expect("reshape");
            let folded = bridge.dot(&flat);
            tensors.push(folded.into_shape((1, p, r)).expect("reshape"));
            for i in w + 1..n {
                tensors.push(self.tensors[i].clone());
            }
        }
        Self::from_tensors(d, tensors, self.log_norm + bra.log_norm)
    }

    /// Merge consecutive groups of `factor` sites into single sites of
    /// dimension `d^factor`. Requires `factor` to divide `N`.
    pub fn coarse_grain(&self, factor: usize) -> Result<Self> {
        let n = self.n_sites();
        let d = self.site_dim;
        if factor == 0 || n % factor != 0 {
            return Err(Error::Parameter(format!(
                "coarse-graining factor {factor} must divide N = {n}"
            )));
        }
        let dd = d.pow(factor as u32);
        let mut tensors = Vec::with_capacity(n / factor);
        for g in 0..n / factor {
            let base = g * factor;
            let mut theta = self.tensors[base].clone();
            for i in base + 1..base + factor {
                let (l, p, r) = theta.dim();
                let (rl, _, rr) = self.tensors[i].dim();
                let a = theta.into_shape((l * p, r)).expect("reshape");
                let b = self.tensors[i]
                    .clone()
                    .into_shape((rl, d * rr))
                    .expect("reshape");
                theta = a.dot(&b).into_shape((l, p * d, rr)).expect("reshape");
            }
            tensors.push(theta);
        }
        let mut out = Self::from_tensors(dd, tensors, self.log_norm)?;
        out.canonical_form = CanonicalForm::None;
        Ok(out)
    }

    /// Random normalized MPS with bond dimension at most `chi`.
    pub fn random(
        rng: &mut impl rand::Rng,
        n: usize,
        d: usize,
        chi: usize,
    ) -> Result<Self> {
        let mut tensors = Vec::with_capacity(n);
        let mut left = 1usize;
        for i in 0..n {
            let right = if i == n - 1 {
                1
            } else {

                let tail = d
                    .checked_pow((n - 1 - i) as u32)
                    .unwrap_or(usize::MAX);
                (left * d).min(chi).min(tail)
            };
            let t = SiteTensor::from_shape_fn((left, d, right), |_| {
                C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            tensors.push(t);
            left = right;
        }
        Self::from_tensors(d, tensors, 0.0)?.normalized()
    }
}

// Frobenius-style norm of the raw tensor-network contraction (no
// log_norm factor).
fn contraction_norm(tensors: &[SiteTensor]) -> f64 {
    let d = tensors[0].dim().1;
    let mut env = CMat::from_elem((1, 1), C64::new(1.0, 0.0));
    for t in tensors {
        let (l, _, r) = t.dim();
        let tm = t.to_owned().into_shape((l, d * r)).expect("reshape");
        let tmp = env.dot(&tm).into_shape((l * d, r)).expect("reshape");
        let tam = t.to_owned().into_shape((l * d, r)).expect("reshape");
        env = numerics::dagger(&tam).dot(&tmp);
    }
    env[(0, 0)].re.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{dagger, fro_dist, identity};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn ghz(n: usize) -> Mps {
        let dim = 1 << n;
        let mut v = CVec::zeros(dim);
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        v[0] = s;
        v[dim - 1] = s;
        Mps::from_dense(&v, 2, n).unwrap()
    }

    fn random_dense(rng: &mut impl Rng, n: usize) -> CVec {
        let mut v = CVec::from_shape_fn(1 << n, |_| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.mapv_inplace(|z| z / norm);
        v
    }

    #[test]
    fn from_dense_product_state_bond_one() {
        let mut v = CVec::zeros(8);
        v[0] = C64::new(1.0, 0.0);
        let m = Mps::from_dense(&v, 2, 3).unwrap();
        assert_eq!(m.bond_profile(), vec![1, 1]);
    }

    #[test]
    fn from_dense_ghz_bond_two() {
        let m = ghz(3);
        assert_eq!(m.bond_profile(), vec![2, 2]);
    }

    #[test]
    fn from_dense_random_max_bond() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = random_dense(&mut rng, 10);
        let m = Mps::from_dense(&v, 2, 10).unwrap();
        assert_eq!(*m.bond_profile().iter().max().unwrap(), 32);
    }

    #[test]
    fn to_dense_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let v = random_dense(&mut rng, 8);
        let m = Mps::from_dense(&v, 2, 8).unwrap();
        let w = m.to_dense().unwrap();
        let err: f64 = v
            .iter()
            .zip(w.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-10);
    }

    #[test]
    fn to_dense_of_basis_state() {
        let m = Mps::basis_state(2, &[0, 1]).unwrap();
        let v = m.to_dense().unwrap();
        assert!((v[1] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(v.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0 < 1e-12);
    }

    #[test]
    fn ghz_to_dense() {
        let v = ghz(3).to_dense().unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[0].re - s).abs() < 1e-12 && (v[7].re - s).abs() < 1e-12);
        assert!(v.iter().skip(1).take(6).all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn canonicalize_preserves_state_and_isometries() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let m = Mps::random(&mut rng, 7, 2, 5).unwrap();
        for center in [0, 3, 6] {
            let c = m.canonicalize(center).unwrap();
            let ov = Mps::inner(&m, &c).unwrap();
            assert!((ov.norm() - 1.0).abs() < 1e-10, "overlap {ov}");
            // Isometry checks.
            for i in 0..center {
                let (l, d, r) = c.tensors[i].dim();
                let t = c.tensors[i].clone().into_shape((l * d, r)).unwrap();
                assert!(fro_dist(&dagger(&t).dot(&t), &identity(r)) < 1e-10);
            }
            for i in center + 1..7 {
                let (l, d, r) = c.tensors[i].dim();
                let t = c.tensors[i].clone().into_shape((l, d * r)).unwrap();
                assert!(fro_dist(&t.dot(&dagger(&t)), &identity(l)) < 1e-10);
            }
        }
    }

    #[test]
    fn product_state_bonds_stay_one() {
        let plus = CVec::from_vec(vec![
            C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            2
        ]);
        let m = Mps::product_state(2, &[plus.clone(), plus.clone(), plus]).unwrap();
        let c = m.canonicalize(0).unwrap();
        assert_eq!(c.bond_profile(), vec![1, 1]);
    }

    #[test]
    fn schmidt_ghz_and_product() {
        let s = ghz(3).schmidt_spectrum(1).unwrap();
        assert_eq!(s.coefficients.len(), 2);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.coefficients[0] - r).abs() < 1e-10);
        assert!((s.coefficients[1] - r).abs() < 1e-10);

        let p = Mps::basis_state(2, &[0, 0, 0]).unwrap();
        let sp = p.schmidt_spectrum(1).unwrap();
        assert_eq!(sp.coefficients.len(), 1);
        assert!((sp.coefficients[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn schmidt_w_state() {
        let mut v = CVec::zeros(8);
        let a = C64::new(1.0 / 3f64.sqrt(), 0.0);
        v[1] = a;
        v[2] = a;
        v[4] = a;
        let m = Mps::from_dense(&v, 2, 3).unwrap();
        let s = m.schmidt_spectrum(1).unwrap();
        assert!((s.coefficients[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-10);
        assert!((s.coefficients[1] - (1.0f64 / 3.0).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn truncate_noop_when_chi_large() {
        let m = ghz(4);
        let (t, w) = m.truncate_at_cuts(&[0, 1, 2], 5).unwrap();
        assert!(w.iter().all(|&x| x == 0.0));
        let ov = Mps::inner(&m, &t).unwrap();
        assert!((ov.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn truncate_ghz_to_product() {
        let m = ghz(3);
        let (t, w) = m.truncate_at_cuts(&[1], 1).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-10);
        assert_eq!(t.bond_profile(), vec![1, 1]);
        assert!((t.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn truncate_error_law_matches_discarded_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let v = random_dense(&mut rng, 8);
        let m = Mps::from_dense(&v, 2, 8).unwrap();
        let spec = m.schmidt_spectrum(3).unwrap();
        let (t, w) = m.truncate_at_cuts(&[3], 4).unwrap();
        let expected_w: f64 = spec.coefficients[4..].iter().map(|l| l * l).sum();
        assert!((w[0] - expected_w).abs() < 1e-10);
        // Purified distance of normalized states: D = sqrt(1 - |<in|out>|^2)
        // should equal sqrt(discarded weight).
        let f = Mps::inner(&m, &t).unwrap().norm();
        let dist = (1.0 - f * f).max(0.0).sqrt();
        assert!((dist - w[0].sqrt()).abs() < 1e-8);
    }

    #[test]
    fn add_zero_coefficient_recovers_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let a = Mps::random(&mut rng, 5, 2, 3).unwrap();
        let b = Mps::random(&mut rng, 5, 2, 3).unwrap();
        let sum = Mps::add(&a, &b, C64::new(1.0, 0.0), C64::new(0.0, 0.0)).unwrap();
        let ov = Mps::inner(&a, &sum).unwrap();
        assert!((ov.re - 1.0).abs() < 1e-10 && ov.im.abs() < 1e-10);
    }

    #[test]
    fn add_builds_ghz() {
        let z = Mps::basis_state(2, &[0, 0, 0]).unwrap();
        let o = Mps::basis_state(2, &[1, 1, 1]).unwrap();
        let c = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let g = Mps::add(&z, &o, c, c).unwrap();
        let ov = Mps::inner(&g, &ghz(3)).unwrap();
        assert!((ov.norm() - 1.0).abs() < 1e-10);
        assert_eq!(g.bond_profile(), vec![2, 2]);
    }

    #[test]
    fn add_direct_sum_bond_counting() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let mut acc = Mps::random(&mut rng, 6, 2, 1).unwrap();
        for _ in 0..3 {
            let p = Mps::random(&mut rng, 6, 2, 1).unwrap();
            acc = Mps::add(&acc, &p, C64::new(1.0, 0.0), C64::new(0.5, 0.0)).unwrap();
        }
        // Raw (uncompressed) bond profile is the direct sum: all 4.
        let raw: Vec<usize> = (0..5).map(|i| acc.tensors[i].dim().2).collect();
        assert_eq!(raw, vec![4, 4, 4, 4, 4]);
    }

    #[test]
    fn add_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = Mps::random(&mut rng, 6, 2, 4).unwrap();
        let b = Mps::random(&mut rng, 6, 2, 4).unwrap();
        let ca = C64::new(0.3, 0.4);
        let cb = C64::new(-0.2, 0.9);
        let sum = Mps::add(&a, &b, ca, cb).unwrap();
        let dense_sum = sum.to_dense().unwrap();
        let da = a.to_dense().unwrap();
        let db = b.to_dense().unwrap();
        let err: f64 = dense_sum
            .iter()
            .enumerate()
            .map(|(i, z)| (z - (ca * da[i] + cb * db[i])).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-10);
    }

    #[test]
    fn inner_basics() {
        let g = ghz(3);
        assert!((Mps::inner(&g, &g).unwrap().re - 1.0).abs() < 1e-10);
        let z = Mps::basis_state(2, &[0, 0, 0]).unwrap();
        let o = Mps::basis_state(2, &[1, 1, 1]).unwrap();
        assert!(Mps::inner(&z, &o).unwrap().norm() < 1e-12);
    }

    #[test]
    fn inner_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let a = Mps::random(&mut rng, 8, 2, 4).unwrap();
        let b = Mps::random(&mut rng, 8, 2, 4).unwrap();
        let got = Mps::inner(&a, &b).unwrap();
        let da = a.to_dense().unwrap();
        let db = b.to_dense().unwrap();
        let want: C64 = da.iter().zip(db.iter()).map(|(x, y)| x.conj() * y).sum();
        assert!((got - want).norm() < 1e-10);
    }

    #[test]
    fn rdm_ghz_window() {
        let g = ghz(3);
        let rho = g.rdm(0, 2).unwrap();
        let mut expect = CMat::zeros((4, 4));
        expect[(0, 0)] = C64::new(0.5, 0.0);
        expect[(3, 3)] = C64::new(0.5, 0.0);
        assert!(fro_dist(&rho.matrix, &expect) < 1e-10);
    }

    #[test]
    fn rdm_matches_dense_partial_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let m = Mps::random(&mut rng, 10, 2, 6).unwrap();
        let rho = m.rdm(3, 3).unwrap();
        let v = m.to_dense().unwrap();
        let full = numerics::outer(&v, &v);
        let dims = vec![2usize; 10];
        let red = numerics::partial_trace(&full, &dims, &[3, 4, 5]).unwrap();
        assert!(fro_dist(&rho.matrix, &red) < 1e-10);
    }

    #[test]
    fn apply_identity_and_flip() {
        let m = Mps::basis_state(2, &[0, 0, 0]).unwrap();
        let id = identity(2);
        let same = m.apply_local_operator(&id, 0, 1).unwrap();
        assert!((Mps::inner(&m, &same).unwrap().re - 1.0).abs() < 1e-10);
        let x = CMat::from_shape_vec(
            (2, 2),
            vec![
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        )
        .unwrap();
        let flipped = m.apply_local_operator(&x, 0, 1).unwrap();
        let want = Mps::basis_state(2, &[1, 0, 0]).unwrap();
        assert!((Mps::inner(&want, &flipped).unwrap().re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn apply_local_operator_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let m = Mps::random(&mut rng, 7, 2, 4).unwrap();
        let a = CMat::from_shape_fn((4, 4), |_| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let u = numerics::polar_unitary(&a).unwrap();
        let out = m.apply_local_operator(&u, 2, 2).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-10);
        let dense_out = out.to_dense().unwrap();
        let big = numerics::kron(
            &identity(4),
            &numerics::kron(&u, &identity(8)),
        );
        let v = m.to_dense().unwrap();
        let want = big.dot(&v.insert_axis(nd::Axis(1)));
        let err: f64 = dense_out
            .iter()
            .enumerate()
            .map(|(i, z)| (z - want[(i, 0)]).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-10);
    }

    #[test]
    fn bond_profile_neighbor_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let m = Mps::random(&mut rng, 9, 2, 8).unwrap();
            let bp = m.bond_profile();
            for w in bp.windows(2) {
                assert!(w[1] <= 2 * w[0] && w[0] <= 2 * w[1]);
            }
        }
    }

    #[test]
    fn coarse_grain_preserves_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let m = Mps::random(&mut rng, 8, 2, 4).unwrap();
        let c = m.coarse_grain(2).unwrap();
        assert_eq!(c.n_sites(), 4);
        assert_eq!(c.site_dim(), 4);
        let dm = m.to_dense().unwrap();
        let dc = c.to_dense().unwrap();
        let err: f64 = dm
            .iter()
            .zip(dc.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-10);
    }

    #[test]
    fn rdm_two_windows_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let m = Mps::random(&mut rng, 9, 2, 5).unwrap();
        let rho = m.rdm_two_windows((1, 2), (6, 1)).unwrap();
        let v = m.to_dense().unwrap();
        let full = numerics::outer(&v, &v);
        let dims = vec![2usize; 9];
        let red = numerics::partial_trace(&full, &dims, &[1, 2, 6]).unwrap();
        assert!(fro_dist(&rho.matrix, &red) < 1e-10);
    }

    #[test]
    fn rdm_two_windows_ghz_ends() {
        let g = ghz(5);
        let rho = g.rdm_two_windows((0, 1), (4, 1)).unwrap();
        let mut expect = CMat::zeros((4, 4));
        expect[(0, 0)] = C64::new(0.5, 0.0);
        expect[(3, 3)] = C64::new(0.5, 0.0);
        assert!(fro_dist(&rho.matrix, &expect) < 1e-10);
    }

    #[test]
    fn project_window_matches_the_dense_projector() {
        // ‖(I ⊗ ⟨q| ⊗ I)|ψ⟩‖² must equal ⟨q|ρ_window|q⟩ for any
        // normalized window bra.
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for start in [0usize, 2, 5] {
            let psi = Mps::random(&mut rng, 8, 2, 4).unwrap();
            let q = Mps::random(&mut rng, 3, 2, 2).unwrap();
            let projected = psi.project_window(start, &q).unwrap();
            assert_eq!(projected.n_sites(), 5);
            let p = projected.norm().powi(2);
            let rho = psi.rdm(start, 3).unwrap();
            let qv = q.to_dense().unwrap();
            let expect = qv
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    qv.iter()
                        .enumerate()
                        .map(|(j, b)| (a.conj() * rho.matrix[(i, j)] * *b).re)
                        .sum::<f64>()
                })
                .sum::<f64>();
            assert!((p - expect).abs() < 1e-10, "start {start}: {p} vs {expect}");
        }
    }

    #[test]
    fn project_window_on_a_product_state_factorizes() {
        let psi = Mps::basis_state(2, &[0, 1, 1, 0, 1]).unwrap();
        let hit = Mps::basis_state(2, &[1, 1]).unwrap();
        let miss = Mps::basis_state(2, &[1, 0]).unwrap();
        assert!((psi.project_window(1, &hit).unwrap().norm() - 1.0).abs() < 1e-12);
        assert!(psi.project_window(1, &miss).unwrap().norm() < 1e-12);
        assert!(psi.project_window(0, &psi).is_err());
    }

    #[test]
    fn log_norm_carries_scale() {
        let mut m = Mps::basis_state(2, &[0, 1]).unwrap();
        m.log_norm = (2.0f64).ln();
        let v = m.to_dense().unwrap();
        assert!((v[1].re - 2.0).abs() < 1e-12);
        assert!((m.norm() - 2.0).abs() < 1e-12);
        let n = m.normalized().unwrap();
        assert!((n.norm() - 1.0).abs() < 1e-12);
    }
}
