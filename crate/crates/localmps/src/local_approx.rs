//! Locality-preserving state approximations with chain-length-independent
//! bond dimension.
//!
//! Both builders replace a state `ψ` on an open chain by a superposition
//!
//! ```text
//!     ψ̃ = (1/√l) · Σ_{j=0..l-1} φ_j ,
//! ```
//!
//! where each branch `φ_j` reproduces the reduced density matrices of `ψ`
//! on most short windows while carrying only short-range entanglement.
//! The chain is tiled by `n` blocks of length `l`, shifted by the branch
//! offset `j` (the first block rolls over the chain ends):
//!
//! ```text
//!   offset j:   [..S0..|--M_1--|--M_2--| ... |--M_j M_j+1--| ... |..Send..]
//!               '------'                      '-----------'      '-------'
//!             rolled-over block 0            purifier blocks    rolled-over
//!                                              (carry |Q_j>)      block 0
//! ```
//!
//! * `build_part1` absorbs the block marginals one at a time into a joint
//!   low-rank state (see [`crate::absorb`]), purifies the result onto the
//!   two blocks following the offset, and pins designated marker sites to
//!   `|0⟩`/`|1⟩` so that distinct branches are exactly orthogonal.  All
//!   spectral bookkeeping runs in coefficient space: each block
//!   contributes a small eigenbasis, the absorption step couples two
//!   diagonal weight vectors, and the resulting three-leg cores are only
//!   materialized as physical tensors during the final assembly.
//! * `build_part2` truncates `ψ` to bond dimension `χ′` on the cuts
//!   around each block, splits every block into a marginal-carrying part
//!   and a `t`-site purifier, and purifies the truncated block marginal
//!   with orthonormal purifier states confined to a basis-split subspace
//!   (low half-basis on the left purifier half, high half-basis on the
//!   right).
//!
//! Branch states for the rolled-over block couple the two chain ends; the
//! coupling index is enumerated explicitly ("seam slices") and the slices
//! are summed as MPS, which keeps every intermediate tensor small.

use std::collections::BTreeMap;

use ndarray::s;
use rayon::prelude::*;
use serde::Serialize;

use crate::absorb;
use crate::error::{Error, Result};
use crate::metrics::{self, LocalDistanceReport};
use crate::mps::{DensityMatrix, Mps, SiteTensor};
use crate::numerics::{self, dagger, eigh_psd, identity, kron, svd, RANK_EPS};
use crate::{C64, CMat, CVec};

/// A contiguous run of sites `[start, end)`.
pub type Run = (usize, usize);

/// One marker site: branch `zero_offset` pins it to `|0⟩`, branch
/// `one_offset` pins it to `|1⟩`.
#[derive(Debug, Clone, Serialize)]
pub struct Marker {
    /// Chain site carrying the marker.
    pub site: usize,
    /// Branch offset that places `|0⟩` here.
    pub zero_offset: usize,
    /// Branch offset that places `|1⟩` here.
    pub one_offset: usize,
}

/// Per-block split into the marginal-carrying part and the purifier part
/// (second construction only).
#[derive(Debug, Clone, Serialize)]
pub struct BlockSplit {
    /// Runs whose marginal is reproduced from the truncated state.
    pub kept_runs: Vec<Run>,
    /// Runs holding the purifier states.  One contiguous run, except for
    /// the rolled-over block at offsets `0 < j < t`, where the purifier
    /// occupies the last `t` cyclic sites of the block and therefore
    /// splits across the two chain ends.
    pub purifier_runs: Vec<Run>,
}

/// Partition of the chain into blocks for one branch offset, plus the
/// marker or purifier geometry.
#[derive(Debug, Clone, Serialize)]
pub struct BlockLayout {
    /// Total chain length.
    pub n_sites: usize,
    /// Branch offset `j`.
    pub offset: usize,
    /// Block length `l`.
    pub block_length: usize,
    /// Number of blocks `n = ⌊n_sites/l⌋`; block 0 rolls over the ends.
    pub n_blocks: usize,
    /// Per-block runs, ascending; `blocks[0]` may hold two runs.
    pub blocks: Vec<Vec<Run>>,
    /// Marker sites (first construction only).
    pub markers: Vec<Marker>,
    /// Whether the compacted marker packing was used (`false` means the
    /// wide analytic placement fit on this chain).
    pub compacted: bool,
    /// Kept/purifier split per block (second construction only).
    pub splits: Option<Vec<BlockSplit>>,
}

/// Measured certificate for a constructed approximation.
#[derive(Debug, Clone, Serialize)]
pub struct ApproxReport {
    /// Window length the approximation targets.
    pub k: usize,
    /// Requested accuracy.
    pub eps: f64,
    /// Block length `l`.
    pub block_length: usize,
    /// Purifier length `t` (second construction only).
    pub purifier_length: Option<usize>,
    /// Truncation bond dimension `χ′` (second construction only).
    pub chi_p: Option<usize>,
    /// Marker packing used (first construction only).
    pub compacted: Option<bool>,
    /// Largest measured per-block truncation purified distance.
    pub w_max: f64,
    /// Measured `max_X D(ρ_X, ρ̃_X)` over all `k`-site windows
    /// (purified distance).
    pub max_window_error: f64,
    /// Per-window trace distances.
    pub measured_local_error: LocalDistanceReport,
    /// Bond profile of the returned state as built.
    pub bond_profile: Vec<usize>,
    /// `max |⟨φ_j|φ_{j'}⟩ − δ_{jj'}|` over all branch pairs.
    pub orthogonality_residual: f64,
}

/// Full output of the first construction, including the branch states.
#[derive(Debug, Clone)]
pub struct Part1Build {
    /// The superposition `ψ̃` (exact direct-sum of the branches).
    pub psi_tilde: Mps,
    /// Measured certificate.
    pub report: ApproxReport,
    /// The `l` branch states, individually compressed.
    pub phis: Vec<Mps>,
    /// Block layouts, one per branch offset.
    pub layouts: Vec<BlockLayout>,
}

/// Full output of the second construction.
#[derive(Debug, Clone)]
pub struct Part2Build {
    /// The superposition `ψ̃` on the working (possibly coarse-grained)
    /// chain.
    pub psi_tilde: Mps,
    /// Measured certificate.
    pub report: ApproxReport,
    /// The `l` branch states.
    pub phis: Vec<Mps>,
    /// The normalized working state `ψ̃` is compared against.
    pub psi_coarse: Mps,
    /// Sites merged per working site (1 if no coarse-graining happened).
    pub coarse_factor: usize,
    /// Layout for offset 0 with the kept/purifier splits filled in.
    pub layout: BlockLayout,
    /// Standalone per-block branch states where the block is contiguous
    /// (`block_states[j][i]`); used as correlation witnesses.
    pub block_states: Vec<Vec<Option<Mps>>>,
}

// ---------------------------------------------------------------------------
// Layout planning
// ---------------------------------------------------------------------------

fn part1_block_length(k: usize, eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Parameter(format!("eps = {eps} must be positive")));
    }
    let l = ((k as f64 + 3.0) / eps).ceil() as usize;
    if l <= k {
        return Err(Error::Parameter(format!(
            "block length l = ceil((k+3)/eps) = {l} must exceed the window \
             length k = {k}; decrease eps"
        )));
    }
    Ok(l)
}

/// Marker placement: the wide analytic formula when the chain is long
/// enough, otherwise a compacted packing with the same guarantees
/// (pairwise separation ≥ l, markers clear of every purifier block and
/// of the rolled-over block pieces).
fn plan_markers(n_sites: usize, l: usize) -> Result<(Vec<Marker>, bool)> {
    let min_sites = l * (l * l + 2);
    if n_sites < min_sites {
        return Err(Error::Resource(format!(
            "chain of {n_sites} sites cannot host {}-spaced markers for \
             block length {l}; need at least {min_sites} sites",
            l
        )));
    }
    let n = n_sites / l;
    let limit = l * (n - 1);
    let floor = l * l + l; // first site past every purifier block
    let mut wide = Vec::new();
    let mut wide_ok = true;
    for j in 0..l {
        for jp in 0..l {
            if j == jp {
                continue;
            }
            let site = 3 * (l * l) as isize * (j + jp) as isize
                + l as isize * (j as isize - jp as isize)
                + 2 * (l * l) as isize;
            if site < floor as isize || site >= limit as isize {
                wide_ok = false;
            }
            wide.push(Marker {
                site: site.max(0) as usize,
                zero_offset: j,
                one_offset: jp,
            });
        }
    }
    if wide_ok && markers_separated(&wide, l) {
        return Ok((wide, false));
    }
    let mut packed = Vec::new();
    let mut idx = 0usize;
    for j in 0..l {
        for jp in 0..l {
            if j == jp {
                continue;
            }
            packed.push(Marker {
                site: floor + idx * l,
                zero_offset: j,
                one_offset: jp,
            });
            idx += 1;
        }
    }
    debug_assert!(packed.iter().all(|m| m.site < limit));
    Ok((packed, true))
}

fn markers_separated(markers: &[Marker], l: usize) -> bool {
    let mut sites: Vec<usize> = markers.iter().map(|m| m.site).collect();
    sites.sort_unstable();
    sites.windows(2).all(|w| w[1] - w[0] >= l)
}

fn blocks_for_offset(n_sites: usize, l: usize, j: usize) -> Vec<Vec<Run>> {
    let n = n_sites / l;
    let mut blocks = Vec::with_capacity(n);
    let mut roll = Vec::new();
    if j > 0 {
        roll.push((0, j));
    }
    roll.push((j + l * (n - 1), n_sites));
    blocks.push(roll);
    for i in 1..n {
        blocks.push(vec![(j + l * (i - 1), j + l * i)]);
    }
    blocks
}

fn layout_with_offset(
    n_sites: usize,
    l: usize,
    offset: usize,
    markers: Vec<Marker>,
    compacted: bool,
) -> BlockLayout {
    BlockLayout {
        n_sites,
        offset,
        block_length: l,
        n_blocks: n_sites / l,
        blocks: blocks_for_offset(n_sites, l, offset),
        markers,
        compacted,
        splits: None,
    }
}

/// Plan the marker-based block layout (offset 0) for the first
/// construction.
pub fn plan_layout_part1(n_sites: usize, k: usize, eps: f64) -> Result<BlockLayout> {
    let l = part1_block_length(k, eps)?;
    let (markers, compacted) = plan_markers(n_sites, l)?;
    Ok(layout_with_offset(n_sites, l, 0, markers, compacted))
}

// ---------------------------------------------------------------------------
// Segment utilities
// ---------------------------------------------------------------------------

/// A consecutive stretch of site tensors with arbitrary boundary bonds.
type Seg = Vec<SiteTensor>;

/// `δ ⊗ |state⟩` tensor: passes a bond of dimension `bond` through an
/// inert site pinned to the given basis state.
fn pinned_tensor(bond: usize, d: usize, state: usize) -> SiteTensor {
    let mut t = SiteTensor::zeros((bond, d, bond));
    for b in 0..bond {
        t[[b, state, b]] = C64::new(1.0, 0.0);
    }
    t
}

/// Direct sum of two segments sharing boundary bond dimensions.
fn seg_add(a: &Seg, b: &Seg) -> Result<Seg> {
    if a.len() != b.len() {
        return Err(Error::Shape("segment lengths differ".into()));
    }
    let n = a.len();
    if n == 1 {
        if a[0].dim() != b[0].dim() {
            return Err(Error::Shape("single-site segment dims differ".into()));
        }
        return Ok(vec![&a[0] + &b[0]]);
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (la, d, ra) = a[i].dim();
        let (lb, _, rb) = b[i].dim();
        let (first, last) = (i == 0, i + 1 == n);
        if (first && la != lb) || (last && ra != rb) {
            return Err(Error::Shape("segment boundary bonds differ".into()));
        }
        let l = if first { la } else { la + lb };
        let r = if last { ra } else { ra + rb };
        let mut t = SiteTensor::zeros((l, d, r));
        t.slice_mut(s![..la, .., ..ra]).assign(&a[i]);
        let l0 = if first { 0 } else { la };
        let r0 = if last { 0 } else { ra };
        t.slice_mut(s![l0..l0 + lb, .., r0..r0 + rb]).assign(&b[i]);
        out.push(t);
    }
    Ok(out)
}

/// SVD-compress a segment's internal bonds to their numerical rank,
/// leaving the boundary bonds untouched.
fn seg_compress(mut seg: Seg) -> Result<Seg> {
    let n = seg.len();
    if n < 2 {
        return Ok(seg);
    }
    // Left-to-right sweep.
    for i in 0..n - 1 {
        let (l, d, r) = seg[i].dim();
        let m = seg[i]
            .clone()
            .into_shape((l * d, r))
            .expect("segment reshape");
        let f = svd(&m)?;
        let keep = f.rank().max(1);
        seg[i] = f
            .u
            .slice(s![.., ..keep])
            .to_owned()
            .into_shape((l, d, keep))
            .expect("segment reshape");
        let mut sv = f.vdag.slice(s![..keep, ..]).to_owned();
        for (row, &sval) in f.s[..keep].iter().enumerate() {
            sv.row_mut(row).mapv_inplace(|z| z * sval);
        }
        let (_, dn, rn) = seg[i + 1].dim();
        let next = seg[i + 1]
            .clone()
            .into_shape((r, dn * rn))
            .expect("segment reshape");
        seg[i + 1] = sv
            .dot(&next)
            .into_shape((keep, dn, rn))
            .expect("segment reshape");
    }
    // Right-to-left sweep.
    for i in (1..n).rev() {
        let (l, d, r) = seg[i].dim();
        let m = seg[i]
            .clone()
            .into_shape((l, d * r))
            .expect("segment reshape");
        let f = svd(&m)?;
        let keep = f.rank().max(1);
        seg[i] = f
            .vdag
            .slice(s![..keep, ..])
            .to_owned()
            .into_shape((keep, d, r))
            .expect("segment reshape");
        let mut us = f.u.slice(s![.., ..keep]).to_owned();
        for (col, &sval) in f.s[..keep].iter().enumerate() {
            us.column_mut(col).mapv_inplace(|z| z * sval);
        }
        let (lp, dp, _) = seg[i - 1].dim();
        let prev = seg[i - 1]
            .clone()
            .into_shape((lp * dp, l))
            .expect("segment reshape");
        seg[i - 1] = prev
            .dot(&us)
            .into_shape((lp, dp, keep))
            .expect("segment reshape");
    }
    Ok(seg)
}

/// Sum a list of segments, compressing after each addition.
fn seg_sum(parts: Vec<Seg>) -> Result<Seg> {
    let mut iter = parts.into_iter();
    let mut acc = iter
        .next()
        .ok_or_else(|| Error::Internal("empty segment sum".into()))?;
    for p in iter {
        acc = seg_compress(seg_add(&acc, &p)?)?;
    }
    Ok(acc)
}

/// Multiply a segment by a real scalar (folded into the last tensor).
fn seg_scale(mut seg: Seg, scale: f64) -> Seg {
    if let Some(t) = seg.last_mut() {
        t.mapv_inplace(|z| z * scale);
    }
    seg
}

/// Contract a coefficient vector into the rightmost bond of a segment.
fn fold_right_vector(tensors: &[SiteTensor], q: &CVec) -> Result<Seg> {
    let mut seg: Seg = tensors.to_vec();
    let last = seg
        .last_mut()
        .ok_or_else(|| Error::Internal("empty segment for bond fold".into()))?;
    let (l, d, r) = last.dim();
    if r != q.len() {
        return Err(Error::Shape(format!(
            "bond fold vector length {} != bond {r}",
            q.len()
        )));
    }
    let mut out = SiteTensor::zeros((l, d, 1));
    for x in 0..l {
        for p in 0..d {
            let mut z = C64::new(0.0, 0.0);
            for b in 0..r {
                z += last[[x, p, b]] * q[b];
            }
            out[[x, p, 0]] = z;
        }
    }
    *last = out;
    Ok(seg)
}

/// Contract a coefficient vector into the leftmost bond of a segment.
fn fold_left_vector(tensors: &[SiteTensor], q: &CVec) -> Result<Seg> {
    let mut seg: Seg = tensors.to_vec();
    let first = seg
        .first_mut()
        .ok_or_else(|| Error::Internal("empty segment for bond fold".into()))?;
    let (l, d, r) = first.dim();
    if l != q.len() {
        return Err(Error::Shape(format!(
            "bond fold vector length {} != bond {l}",
            q.len()
        )));
    }
    let mut out = SiteTensor::zeros((1, d, r));
    for p in 0..d {
        for y in 0..r {
            let mut z = C64::new(0.0, 0.0);
            for x in 0..l {
                z += q[x] * first[[x, p, y]];
            }
            out[[0, p, y]] = z;
        }
    }
    *first = out;
    Ok(seg)
}

// ---------------------------------------------------------------------------
// Window ensembles (Gram-matrix spectral data of a window marginal)
// ---------------------------------------------------------------------------

/// Spectral data of a window marginal, kept in coefficient space.
///
/// Columns enumerate the orthonormal environment basis `(a [, μ], b)`:
/// left bond, optional traced-out "hole" site, right bond.  `coeffs`
/// column `y` holds the Gram eigenvector `g_y`; the physical eigenvector
/// is the window network applied to `g_y` and rescaled by `scales[y]`.
struct WindowEnsemble {
    /// Eigenvalues of the marginal, normalized to sum 1, ascending.
    weights: Vec<f64>,
    /// Gram eigenvectors as columns, shape (cols, n_kept).
    coeffs: CMat,
    /// `exp(log_norm)/√λ_y` per kept eigenvector.
    scales: Vec<f64>,
}

/// Gram matrix of the window `[ws, we)` of `psi`, with the columns
/// running over (left bond, hole physical index if any, right bond).
fn window_gram(c: &Mps, ws: usize, we: usize, hole: Option<usize>) -> Result<CMat> {
    let d = c.site_dim();
    let la = c.tensor(ws).dim().0;
    let mut cc = la;
    let mut e = CMat::zeros((la * la, la * la));
    for a in 0..la {
        for ap in 0..la {
            e[[a * la + a, ap * la + ap]] = C64::new(1.0, 0.0);
        }
    }
    for site in ws..we {
        let t = c.tensor(site);
        let (_, _, xr) = t.dim();
        let tp: Vec<CMat> = (0..d).map(|p| t.slice(s![.., p, ..]).to_owned()).collect();
        let eye = identity(cc);
        if hole == Some(site) {
            let mut e2 = CMat::zeros((cc * d * xr, cc * d * xr));
            for p in 0..d {
                for pp in 0..d {
                    let mp = kron(&eye, &tp[p]);
                    let mpp = kron(&eye, &tp[pp]);
                    let blk = dagger(&mp).dot(&e).dot(&mpp);
                    for col in 0..cc {
                        for y in 0..xr {
                            for colp in 0..cc {
                                for yp in 0..xr {
                                    e2[[
                                        (col * d + p) * xr + y,
                                        (colp * d + pp) * xr + yp,
                                    ]] = blk[[col * xr + y, colp * xr + yp]];
                                }
                            }
                        }
                    }
                }
            }
            cc *= d;
            e = e2;
        } else {
            let mut e2 = CMat::zeros((cc * xr, cc * xr));
            for p in 0..d {
                let mp = kron(&eye, &tp[p]);
                e2 = e2 + dagger(&mp).dot(&e).dot(&mp);
            }
            e = e2;
        }
    }
    Ok(e)
}

fn window_ensemble(psi: &Mps, ws: usize, we: usize, hole: Option<usize>) -> Result<WindowEnsemble> {
    if we <= ws {
        return Err(Error::Index(format!("empty window [{ws}, {we})")));
    }
    let c = psi.canonicalize(ws)?;
    let raw = window_gram(&c, ws, we, hole)?;
    let scale = (2.0 * c.log_norm()).exp();
    let g = (&raw + &dagger(&raw)).mapv(|z| z * 0.5 * scale);
    let (vals, vecs) = eigh_psd(&g)?;
    let vmax = vals.iter().cloned().fold(0.0_f64, f64::max);
    let tol = RANK_EPS * vmax;
    let mut weights = Vec::new();
    let mut cols = Vec::new();
    let mut scales = Vec::new();
    for (idx, &v) in vals.iter().enumerate() {
        if v > tol {
            weights.push(v);
            scales.push(c.log_norm().exp() / v.sqrt());
            cols.push(idx);
        }
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Internal(format!(
            "window [{ws}, {we}) marginal trace {total} deviates from 1"
        )));
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
    let mut coeffs = CMat::zeros((g.nrows(), cols.len()));
    for (to, &from) in cols.iter().enumerate() {
        coeffs.column_mut(to).assign(&vecs.column(from));
    }
    Ok(WindowEnsemble {
        weights,
        coeffs,
        scales,
    })
}

// ---------------------------------------------------------------------------
// Coefficient-space entropy absorption
// ---------------------------------------------------------------------------

fn diag_dm(weights: &[f64]) -> Result<DensityMatrix> {
    let r = weights.len();
    let mut m = CMat::zeros((r, r));
    for (i, &w) in weights.iter().enumerate() {
        m[[i, i]] = C64::new(w, 0.0);
    }
    DensityMatrix::new(0, 1, r, m)
}

/// One absorption step in coefficient space: couple the accumulated
/// weight vector with the next window's weights, returning the
/// three-leg core `C[x, y, m]` and the new weights.
fn absorb_step(acc: &[f64], next: &[f64]) -> Result<(ndarray::Array3<C64>, Vec<f64>)> {
    let ra = acc.len();
    let rb = next.len();
    let res = absorb::absorb_entropy(&diag_dm(acc)?, &diag_dm(next)?)?;
    let comps = &res.pure_components;
    let r = comps.len();
    if r == 0 {
        return Err(Error::Internal("absorption produced no components".into()));
    }
    let mut gm = CMat::zeros((r, r));
    for i in 0..r {
        for jj in 0..r {
            let mut z = C64::new(0.0, 0.0);
            for x in 0..ra * rb {
                z += comps[i][x].conj() * comps[jj][x];
            }
            gm[[i, jj]] = z;
        }
    }
    let gm = (&gm + &dagger(&gm)).mapv(|z| z * 0.5);
    let (vals, vecs) = eigh_psd(&gm)?;
    let vmax = vals.iter().cloned().fold(0.0_f64, f64::max);
    let tol = RANK_EPS * vmax;
    let kept: Vec<usize> = (0..r).filter(|&m| vals[m] > tol).collect();
    let mut core = ndarray::Array3::<C64>::zeros((ra, rb, kept.len()));
    let mut weights = Vec::with_capacity(kept.len());
    for (slot, &m) in kept.iter().enumerate() {
        let lam = vals[m];
        weights.push(lam);
        let inv = 1.0 / lam.sqrt();
        for x in 0..ra {
            for y in 0..rb {
                let mut z = C64::new(0.0, 0.0);
                for i in 0..r {
                    z += vecs[[i, m]] * comps[i][x * rb + y];
                }
                core[[x, y, slot]] = z * inv;
            }
        }
    }
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    Ok((core, weights))
}

// ---------------------------------------------------------------------------
// Physical segment construction from coefficient data
// ---------------------------------------------------------------------------

/// Materialize the window `[ws, we)` as a segment with boundary bonds
/// `(xi, xo)`, closing the window's environment columns against `kmat`
/// (shape (cols, xi·xo)).  A marker hole inside the window is emitted as
/// a pinned site; its traced physical index joins the columns.
fn window_segment(
    psi: &Mps,
    ws: usize,
    we: usize,
    hole: Option<(usize, usize)>,
    kmat: &CMat,
    xi: usize,
    xo: usize,
) -> Result<Seg> {
    let c = psi.canonicalize(ws)?;
    let d = c.site_dim();
    let la = c.tensor(ws).dim().0;
    let lb = c.tensor(we - 1).dim().2;
    let mut seg: Seg = Vec::with_capacity(we - ws);
    let mut carry = xi * la;
    for site in ws..we {
        let t = c.tensor(site);
        let (xl, _, xr) = t.dim();
        let first = site == ws;
        let last = site + 1 == we;
        if hole.map(|h| h.0) == Some(site) {
            if first || last {
                return Err(Error::Internal(
                    "window hole must be interior to the window".into(),
                ));
            }
            let state = hole.unwrap().1;
            let mut out = SiteTensor::zeros((carry * xl, d, carry * d * xr));
            for cc in 0..carry {
                for x in 0..xl {
                    for mu in 0..d {
                        for y in 0..xr {
                            out[[cc * xl + x, state, (cc * d + mu) * xr + y]] = t[[x, mu, y]];
                        }
                    }
                }
            }
            carry *= d;
            seg.push(out);
        } else if first && last {
            let mut out = SiteTensor::zeros((xi, d, xo));
            for i in 0..xi {
                for p in 0..d {
                    for o in 0..xo {
                        let mut z = C64::new(0.0, 0.0);
                        for a in 0..la {
                            for b in 0..lb {
                                z += t[[a, p, b]] * kmat[[a * lb + b, i * xo + o]];
                            }
                        }
                        out[[i, p, o]] = z;
                    }
                }
            }
            seg.push(out);
        } else if first {
            let mut out = SiteTensor::zeros((xi, d, xi * la * xr));
            for i in 0..xi {
                for a in 0..la {
                    for p in 0..d {
                        for y in 0..xr {
                            out[[i, p, (i * la + a) * xr + y]] = t[[a, p, y]];
                        }
                    }
                }
            }
            seg.push(out);
        } else if last {
            let rest = carry / xi;
            let mut out = SiteTensor::zeros((carry * xl, d, xo));
            for cc in 0..carry {
                let i = cc / rest;
                let rem = cc % rest;
                for x in 0..xl {
                    for p in 0..d {
                        for o in 0..xo {
                            let mut z = C64::new(0.0, 0.0);
                            for b in 0..xr {
                                z += t[[x, p, b]] * kmat[[rem * lb + b, i * xo + o]];
                            }
                            out[[cc * xl + x, p, o]] = z;
                        }
                    }
                }
            }
            seg.push(out);
        } else {
            let mut out = SiteTensor::zeros((carry * xl, d, carry * xr));
            for cc in 0..carry {
                for x in 0..xl {
                    for p in 0..d {
                        for y in 0..xr {
                            out[[cc * xl + x, p, cc * xr + y]] = t[[x, p, y]];
                        }
                    }
                }
            }
            seg.push(out);
        }
    }
    seg_compress(seg)
}

/// One fold region of the first construction: a contiguous span with at
/// most one marker hole.
#[derive(Debug, Clone)]
struct RegionSpec {
    start: usize,
    end: usize,
    hole: Option<(usize, usize)>,
}

impl RegionSpec {
    /// Window bounds after peeling edge holes, plus the peeled edges.
    fn window(&self) -> (usize, usize, Option<(usize, usize)>, Vec<(usize, usize, bool)>) {
        let (mut ws, mut we) = (self.start, self.end);
        let mut interior = None;
        let mut edges = Vec::new();
        if let Some((hs, st)) = self.hole {
            if hs == ws {
                edges.push((hs, st, true));
                ws += 1;
            } else if hs + 1 == we {
                edges.push((hs, st, false));
                we -= 1;
            } else {
                interior = Some((hs, st));
            }
        }
        (ws, we, interior, edges)
    }
}

/// Materialize one fold region with its absorption core.
fn region_segment(
    psi: &Mps,
    region: &RegionSpec,
    core: &ndarray::Array3<C64>,
    ens: &WindowEnsemble,
) -> Result<Seg> {
    let d = psi.site_dim();
    let (xi, ny, xo) = core.dim();
    if ny != ens.weights.len() {
        return Err(Error::Internal("core/ensemble rank mismatch".into()));
    }
    let cols = ens.coeffs.nrows();
    let mut kmat = CMat::zeros((cols, xi * xo));
    for ccol in 0..cols {
        for i in 0..xi {
            for o in 0..xo {
                let mut z = C64::new(0.0, 0.0);
                for y in 0..ny {
                    z += core[[i, y, o]] * ens.coeffs[[ccol, y]] * ens.scales[y];
                }
                kmat[[ccol, i * xo + o]] = z;
            }
        }
    }
    let (ws, we, interior, edges) = region.window();
    let mut seg = window_segment(psi, ws, we, interior, &kmat, xi, xo)?;
    for &(_, state, at_front) in &edges {
        if at_front {
            seg.insert(0, pinned_tensor(xi, d, state));
        } else {
            seg.push(pinned_tensor(xo, d, state));
        }
    }
    Ok(seg)
}

// ---------------------------------------------------------------------------
// Purifier segments
// ---------------------------------------------------------------------------

/// Base-`d` digits (most significant first) of each `m < m_dim` over
/// `count` positions; errors out if the capacity is insufficient.
fn purifier_digits(m_dim: usize, d: usize, count: usize) -> Result<Vec<Vec<usize>>> {
    let mut cap = 1usize;
    for _ in 0..count {
        cap = cap.saturating_mul(d);
        if cap >= m_dim {
            break;
        }
    }
    if cap < m_dim {
        return Err(Error::Resource(format!(
            "purifier of {count} sites (dim {d}) cannot index {m_dim} states"
        )));
    }
    let mut digits = Vec::with_capacity(m_dim);
    for m in 0..m_dim {
        let mut v = vec![0usize; count];
        let mut mm = m;
        for pos in (0..count).rev() {
            v[pos] = mm % d;
            mm /= d;
        }
        digits.push(v);
    }
    Ok(digits)
}

/// Purifier segment carrying the fold index `m` through `count` sites
/// and closing it with the branch weights.
fn purifier_segment(count: usize, d: usize, weights: &[f64]) -> Result<Seg> {
    let m_dim = weights.len();
    let digits = purifier_digits(m_dim, d, count)?;
    let mut seg = Vec::with_capacity(count);
    for pos in 0..count {
        let last = pos + 1 == count;
        let rdim = if last { 1 } else { m_dim };
        let mut t = SiteTensor::zeros((m_dim, d, rdim));
        for m in 0..m_dim {
            let amp = if last {
                C64::new(weights[m].sqrt(), 0.0)
            } else {
                C64::new(1.0, 0.0)
            };
            t[[m, digits[m][pos], if last { 0 } else { m }]] = amp;
        }
        seg.push(t);
    }
    Ok(seg)
}

/// Product-state tensors realizing one digit string.
fn digit_product(digits: &[usize], d: usize) -> Seg {
    digits
        .iter()
        .map(|&s| {
            let mut t = SiteTensor::zeros((1, d, 1));
            t[[0, s, 0]] = C64::new(1.0, 0.0);
            t
        })
        .collect()
}

// ---------------------------------------------------------------------------
// First construction
// ---------------------------------------------------------------------------

fn hole_for(span: Run, holes: &[(usize, usize)]) -> Result<Option<(usize, usize)>> {
    let mut found = None;
    for &(site, state) in holes {
        if site >= span.0 && site < span.1 {
            if found.is_some() {
                return Err(Error::Internal(format!(
                    "two markers inside block [{}, {})",
                    span.0, span.1
                )));
            }
            found = Some((site, state));
        }
    }
    Ok(found)
}

fn part1_phi(
    psi: &Mps,
    l: usize,
    n: usize,
    n_sites: usize,
    j: usize,
    markers: &[Marker],
) -> Result<Mps> {
    let d = psi.site_dim();
    let holes: Vec<(usize, usize)> = markers
        .iter()
        .filter_map(|m| {
            if m.zero_offset == j {
                Some((m.site, 0))
            } else if m.one_offset == j {
                Some((m.site, 1))
            } else {
                None
            }
        })
        .collect();
    let block_span = |i: usize| -> Run { (j + l * (i - 1), j + l * i) };
    let region = |span: Run| -> Result<RegionSpec> {
        Ok(RegionSpec {
            start: span.0,
            end: span.1,
            hole: hole_for(span, &holes)?,
        })
    };

    // Fold order: blocks past the purifier, the rolled-over block (end
    // piece, then start piece), then the blocks before the purifier.
    let mut fold: Vec<RegionSpec> = Vec::new();
    let mut block_region_idx = vec![usize::MAX; n + 1];
    for i in (j + 2)..n {
        block_region_idx[i] = fold.len();
        fold.push(region(block_span(i))?);
    }
    let (send_idx, s0_idx) = if j > 0 {
        let send = (j + l * (n - 1), n_sites);
        let s0 = (0, j);
        let se = fold.len();
        fold.push(region(send)?);
        let sz = fold.len();
        fold.push(region(s0)?);
        for i in 1..j {
            block_region_idx[i] = fold.len();
            fold.push(region(block_span(i))?);
        }
        (Some(se), Some(sz))
    } else {
        (None, None)
    };
    if fold.is_empty() {
        return Err(Error::Internal("no fold regions".into()));
    }
    for (idx, r) in fold.iter().enumerate() {
        if (Some(idx) == send_idx || Some(idx) == s0_idx) && r.hole.is_some() {
            return Err(Error::Internal(
                "marker inside a rolled-over block piece".into(),
            ));
        }
    }

    // Pass A: per-region spectral data, then the absorption fold.
    let mut ensembles = Vec::with_capacity(fold.len());
    for r in &fold {
        let (ws, we, interior, _) = r.window();
        ensembles.push(window_ensemble(psi, ws, we, interior.map(|h| h.0))?);
    }
    let mut cores: Vec<ndarray::Array3<C64>> = Vec::with_capacity(fold.len());
    let r0 = ensembles[0].weights.len();
    let mut first_core = ndarray::Array3::<C64>::zeros((1, r0, r0));
    for y in 0..r0 {
        first_core[[0, y, y]] = C64::new(1.0, 0.0);
    }
    cores.push(first_core);
    let mut acc = ensembles[0].weights.clone();
    for ridx in 1..fold.len() {
        let (core, w) = absorb_step(&acc, &ensembles[ridx].weights)?;
        cores.push(core);
        acc = w;
    }
    let m_dim = acc.len();

    // Pass B: physical segments.  Regions not touching the seam are
    // built once and shared across slices.
    let mut shared: Vec<Option<Seg>> = vec![None; fold.len()];
    for idx in 0..fold.len() {
        if Some(idx) == send_idx || Some(idx) == s0_idx {
            continue;
        }
        shared[idx] = Some(region_segment(psi, &fold[idx], &cores[idx], &ensembles[idx])?);
    }

    let slices: Vec<Mps> = if j > 0 {
        let se = send_idx.unwrap();
        let sz = s0_idx.unwrap();
        let seam_dim = cores[sz].dim().0;
        let p_seg = purifier_segment(2 * l, d, &acc)?;
        let mut out = Vec::with_capacity(seam_dim);
        for a in 0..seam_dim {
            let send_core = cores[se].slice(s![.., .., a..a + 1]).to_owned();
            let s0_core = cores[sz].slice(s![a..a + 1, .., ..]).to_owned();
            let send_seg = region_segment(psi, &fold[se], &send_core, &ensembles[se])?;
            let s0_seg = region_segment(psi, &fold[sz], &s0_core, &ensembles[sz])?;
            let mut tensors: Vec<SiteTensor> = Vec::with_capacity(n_sites);
            tensors.extend(s0_seg);
            for i in 1..j {
                tensors.extend(shared[block_region_idx[i]].clone().unwrap());
            }
            tensors.extend(p_seg.clone());
            for i in (j + 2)..n {
                tensors.extend(shared[block_region_idx[i]].clone().unwrap());
            }
            tensors.extend(send_seg);
            out.push(Mps::from_tensors(d, tensors, 0.0)?);
        }
        out
    } else {
        // Offset 0: the purifier splits into the chain-start block and
        // the rolled-over end piece; the fold index itself is the slice.
        let end_start = l * (n - 1);
        let end_len = n_sites - end_start;
        let digits = purifier_digits(m_dim, d, end_len + l)?;
        let last_idx = fold.len() - 1;
        let mut out = Vec::with_capacity(m_dim);
        for m in 0..m_dim {
            let last_core = cores[last_idx].slice(s![.., .., m..m + 1]).to_owned();
            let last_seg =
                region_segment(psi, &fold[last_idx], &last_core, &ensembles[last_idx])?;
            let p_end = seg_scale(
                digit_product(&digits[m][..end_len], d),
                acc[m].sqrt(),
            );
            let p_start = digit_product(&digits[m][end_len..], d);
            let mut tensors: Vec<SiteTensor> = Vec::with_capacity(n_sites);
            tensors.extend(p_start);
            for i in 2..n {
                if block_region_idx[i] == last_idx {
                    tensors.extend(last_seg.clone());
                } else {
                    tensors.extend(shared[block_region_idx[i]].clone().unwrap());
                }
            }
            tensors.extend(p_end);
            out.push(Mps::from_tensors(d, tensors, 0.0)?);
        }
        out
    };

    // Direct-sum all slices first; the shared middle segments bound the
    // true rank, so a single final compression is cheap.
    let mut phi = slices[0].clone();
    for sl in &slices[1..] {
        phi = Mps::add(&phi, sl, C64::new(1.0, 0.0), C64::new(1.0, 0.0))?;
    }
    let out = phi.compressed();
    out
}

/// Window errors of the uniform branch mixture against `psi`.
///
/// Cross-branch contributions to any window shorter than the block
/// length vanish identically: every branch pair disagrees on two marker
/// sites at distance ≥ l, so at least one of them is traced out, and the
/// pinned marker states are orthogonal.  The mixture marginal is
/// therefore the average of the branch marginals.
fn mixture_local_error(
    psi: &Mps,
    phis: &[Mps],
    k: usize,
) -> Result<(LocalDistanceReport, f64)> {
    let n = psi.n_sites();
    let d = psi.site_dim();
    let windows = n - k + 1;
    let dim = d.pow(k as u32);
    let rdms_psi = psi.rdm_sweep(k)?;
    let share = 1.0 / phis.len() as f64;
    let sweeps: Vec<Vec<DensityMatrix>> = phis
        .par_iter()
        .map(|phi| phi.rdm_sweep(k))
        .collect::<Result<Vec<_>>>()?;
    let mut acc: Vec<CMat> = vec![CMat::zeros((dim, dim)); windows];
    for rdms in &sweeps {
        for (slot, dm) in acc.iter_mut().zip(rdms.iter()) {
            *slot = &*slot + &dm.matrix.mapv(|z| z * share);
        }
    }
    let mut per_window = Vec::with_capacity(windows);
    let mut max_trace = 0.0f64;
    let mut argmax = 0usize;
    let mut max_pure = 0.0f64;
    for (start, m) in acc.into_iter().enumerate() {
        let h = (&m + &dagger(&m)).mapv(|z| z * 0.5);
        let tr = numerics::trace(&h).re;
        let h = h.mapv(|z| z / tr);
        let dm = DensityMatrix::new(start, k, d, h)?;
        let td = metrics::trace_distance(&rdms_psi[start], &dm)?;
        let pd = metrics::purified_distance(&rdms_psi[start], &dm)?;
        if td > max_trace {
            max_trace = td;
            argmax = start;
        }
        max_pure = max_pure.max(pd);
        per_window.push((start, td));
    }
    Ok((
        LocalDistanceReport {
            k,
            per_window,
            max_value: max_trace,
            argmax_window: argmax,
        },
        max_pure,
    ))
}

/// First construction, returning the branch states and layouts as well.
pub fn build_part1_detailed(psi: &Mps, k: usize, eps: f64) -> Result<Part1Build> {
    let d = psi.site_dim();
    if d < 2 {
        return Err(Error::Parameter("site dimension must be at least 2".into()));
    }
    let n_sites = psi.n_sites();
    if k == 0 || k > n_sites {
        return Err(Error::Parameter(format!("window length {k} out of range")));
    }
    let base = plan_layout_part1(n_sites, k, eps)?;
    let l = base.block_length;
    let n = base.n_blocks;
    let psi_n = psi.normalized()?;
    let phis: Vec<Mps> = (0..l)
        .into_par_iter()
        .map(|j| part1_phi(&psi_n, l, n, n_sites, j, &base.markers))
        .collect::<Result<Vec<_>>>()?;

    let pairs: Vec<(usize, usize)> = (0..l)
        .flat_map(|j| (j..l).map(move |jp| (j, jp)))
        .collect();
    let resid = pairs
        .par_iter()
        .map(|&(j, jp)| {
            let ip = Mps::inner(&phis[j], &phis[jp])?;
            let target = if j == jp { 1.0 } else { 0.0 };
            Ok((ip - C64::new(target, 0.0)).norm())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0f64, f64::max);

    let one = C64::new(1.0, 0.0);
    let mut tilde = phis[0].clone();
    for phi in &phis[1..] {
        tilde = Mps::add(&tilde, phi, one, one)?;
    }
    tilde.log_norm -= 0.5 * (l as f64).ln();

    let (trace_report, max_pure) = mixture_local_error(&psi_n, &phis, k)?;
    let bond_profile: Vec<usize> = (0..n_sites.saturating_sub(1))
        .map(|c| phis.iter().map(|p| p.tensor(c).dim().2).sum())
        .collect();

    let report = ApproxReport {
        k,
        eps,
        block_length: l,
        purifier_length: None,
        chi_p: None,
        compacted: Some(base.compacted),
        w_max: 0.0,
        max_window_error: max_pure,
        measured_local_error: trace_report,
        bond_profile,
        orthogonality_residual: resid,
    };
    let layouts = (0..l)
        .map(|j| layout_with_offset(n_sites, l, j, base.markers.clone(), base.compacted))
        .collect();
    Ok(Part1Build {
        psi_tilde: tilde,
        report,
        phis,
        layouts,
    })
}

/// First construction: marker-pinned branches with exact interior
/// marginals.  The returned state is the exact (uncompressed)
/// superposition of the branches.
pub fn build_part1(psi: &Mps, k: usize, eps: f64) -> Result<(Mps, ApproxReport)> {
    let b = build_part1_detailed(psi, k, eps)?;
    Ok((b.psi_tilde, b.report))
}

// ---------------------------------------------------------------------------
// Second construction
// ---------------------------------------------------------------------------

fn part2_params(d: usize, k: usize, eps: f64, chi: usize) -> Result<(usize, usize)> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Parameter(format!("eps = {eps} must be positive")));
    }
    if chi == 0 {
        return Err(Error::Parameter("truncation bond must be at least 1".into()));
    }
    let hd = d / 2;
    if hd < 2 {
        return Err(Error::Parameter(format!(
            "site dimension {d} too small for a half-basis purifier; need ≥ 4"
        )));
    }
    let target = 2 * chi * chi;
    let mut t = 0usize;
    let mut cap = 1usize;
    while cap < target {
        cap = cap.saturating_mul(hd);
        t += 1;
    }
    t = t.max(1);
    if t % 2 == 1 {
        t += 1;
    }
    let l = (((2 * (k + t)) as f64 / eps).ceil() as usize)
        .max(2 * k)
        .max(2 * t);
    Ok((t, l))
}

fn part2_split(n_sites: usize, l: usize, n: usize, j: usize, i: usize, t: usize) -> BlockSplit {
    if i >= 1 {
        let bs = j + l * (i - 1);
        let be = j + l * i;
        return BlockSplit {
            kept_runs: vec![(bs, be - t)],
            purifier_runs: vec![(be - t, be)],
        };
    }
    let es = j + l * (n - 1);
    if j == 0 {
        BlockSplit {
            kept_runs: vec![(es, n_sites - t)],
            purifier_runs: vec![(n_sites - t, n_sites)],
        }
    } else if j >= t {
        let mut kept = vec![(es, n_sites)];
        if j > t {
            kept.push((0, j - t));
        }
        BlockSplit {
            kept_runs: kept,
            purifier_runs: vec![(j - t, j)],
        }
    } else {
        // 0 < j < t: the purifier fills the last `t` cyclic sites of the
        // rolled-over block, so its position relative to the block edge
        // matches every other block and the per-window count of branches
        // whose purifier meets the window stays at `t + k - 1`.  Those
        // sites wrap around the chain ends.
        let ke = n_sites - (t - j);
        BlockSplit {
            kept_runs: vec![(es, ke)],
            purifier_runs: vec![(ke, n_sites), (0, j)],
        }
    }
}

fn cuts_for_runs(runs: &[Run], n_sites: usize) -> Vec<usize> {
    let mut cuts = Vec::new();
    for &(s, e) in runs {
        let lo = s.saturating_sub(1);
        let hi = (e.saturating_sub(1)).min(n_sites.saturating_sub(2));
        for c in lo..=hi {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    cuts.dedup();
    cuts
}

/// Purifier digit string for index `z`: low half-basis on the left half
/// of the purifier, high half-basis on the right half.
fn purifier_halfbasis_digits(z: usize, hd: usize, t: usize) -> Vec<usize> {
    let mut digits = vec![0usize; t];
    let mut zz = z;
    for pos in (0..t).rev() {
        digits[pos] = zz % hd;
        zz /= hd;
    }
    for (pos, dig) in digits.iter_mut().enumerate() {
        if pos >= t / 2 {
            *dig += hd;
        }
    }
    digits
}

/// Embed a restricted purifier index into the full `d^t` basis index.
fn embed_restricted(z: usize, hd: usize, d: usize, t: usize) -> usize {
    let digits = purifier_halfbasis_digits(z, hd, t);
    let mut idx = 0usize;
    for dig in digits {
        idx = idx * d + dig;
    }
    idx
}

/// Orthonormal purifier vectors for one block, as segments over the `t`
/// purifier sites.  When the support-avoidance condition applies (the
/// purifier must be orthogonal to a previously built branch on these
/// sites), the vectors are drawn from the orthogonal complement of that
/// support within the half-basis subspace.
fn purifier_vectors(
    count: usize,
    hd: usize,
    d: usize,
    t: usize,
    avoid: Option<(&Mps, usize)>,
) -> Result<Vec<Seg>> {
    let rdim = hd.pow(t as u32);
    if count > rdim {
        return Err(Error::Parameter(format!(
            "need {count} purifier states but the half-basis subspace has \
             dimension {rdim}"
        )));
    }
    match avoid {
        None => Ok((0..count)
            .map(|z| digit_product(&purifier_halfbasis_digits(z, hd, t), d))
            .collect()),
        Some((phi_prev, start)) => {
            let rho = phi_prev.rdm(start, t)?;
            let mut m = CMat::zeros((rdim, rdim));
            for r in 0..rdim {
                let er = embed_restricted(r, hd, d, t);
                for c2 in 0..rdim {
                    let ec = embed_restricted(c2, hd, d, t);
                    m[[r, c2]] = rho.matrix[[er, ec]];
                }
            }
            let m = (&m + &dagger(&m)).mapv(|z| z * 0.5);
            let (vals, vecs) = eigh_psd(&m)?;
            let vmax = vals.iter().cloned().fold(0.0_f64, f64::max);
            let tol = RANK_EPS * vmax.max(1e-300);
            let support: Vec<usize> = (0..rdim).filter(|&idx| vals[idx] > tol).collect();
            let mut proj = CMat::zeros((rdim, rdim));
            for &idx in &support {
                let col = vecs.column(idx);
                for r in 0..rdim {
                    for c2 in 0..rdim {
                        proj[[r, c2]] += col[r] * col[c2].conj();
                    }
                }
            }
            let complement = identity(rdim) - &proj;
            let basis = numerics::orthonormal_columns(&complement);
            if basis.ncols() < count {
                return Err(Error::Construction(format!(
                    "purifier space exhausted: need {count} states orthogonal \
                     to a support of dimension {}, but only {} remain",
                    support.len(),
                    basis.ncols()
                )));
            }
            let mut out = Vec::with_capacity(count);
            for z in 0..count {
                let mut dense = CVec::zeros(d.pow(t as u32));
                for r in 0..rdim {
                    dense[embed_restricted(r, hd, d, t)] = basis[[r, z]];
                }
                let frag = Mps::from_dense(&dense, d, t)?;
                out.push((0..t).map(|s| frag.tensor(s).clone()).collect());
            }
            Ok(out)
        }
    }
}

/// Bond-basis density matrix of the region complementary to the window
/// `[cs, ce)` of `c` (which must be canonical with center inside the
/// window): eigenvectors live on the left/right environment product
/// basis `L_a ⊗ R_b`.
fn complement_ensemble(c: &Mps, cs: usize, ce: usize) -> Result<(Vec<f64>, CMat, usize, usize)> {
    let d = c.site_dim();
    let la = c.tensor(cs).dim().0;
    let lb = c.tensor(ce - 1).dim().2;
    let mut e = identity(la * la);
    for site in cs..ce {
        let t = c.tensor(site);
        let (xl, _, xr) = t.dim();
        let mut tm = CMat::zeros((xl * xl, xr * xr));
        for p in 0..d {
            let tp = t.slice(s![.., p, ..]).to_owned();
            let tpc = tp.mapv(|z| z.conj());
            tm = tm + kron(&tp, &tpc);
        }
        e = e.dot(&tm);
    }
    let scale = (2.0 * c.log_norm()).exp();
    let mut m = CMat::zeros((la * lb, la * lb));
    for a in 0..la {
        for ap in 0..la {
            for b in 0..lb {
                for bp in 0..lb {
                    m[[a * lb + b, ap * lb + bp]] = e[[a * la + ap, b * lb + bp]] * scale;
                }
            }
        }
    }
    let m = (&m + &dagger(&m)).mapv(|z| z * 0.5);
    let (vals, vecs) = eigh_psd(&m)?;
    let vmax = vals.iter().cloned().fold(0.0_f64, f64::max);
    let tol = RANK_EPS * vmax;
    let mut weights = Vec::new();
    let mut cols = Vec::new();
    for (idx, &v) in vals.iter().enumerate() {
        if v > tol {
            weights.push(v);
            cols.push(idx);
        }
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Internal(format!(
            "complement marginal trace {total} deviates from 1"
        )));
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
    let mut coeffs = CMat::zeros((la * lb, cols.len()));
    for (to, &from) in cols.iter().enumerate() {
        coeffs.column_mut(to).assign(&vecs.column(from));
    }
    Ok((weights, coeffs, la, lb))
}

/// Branch segment for one contiguous block of the second construction.
fn part2_block_segment(
    st: &Mps,
    kept: Run,
    purifier: Run,
    rvecs: &[Seg],
    weights: &[f64],
    coeffs: &CMat,
    scales: &[f64],
) -> Result<Seg> {
    let mut branches = Vec::with_capacity(weights.len());
    for z in 0..weights.len() {
        let mut kz = CMat::zeros((coeffs.nrows(), 1));
        for ccol in 0..coeffs.nrows() {
            kz[[ccol, 0]] = coeffs[[ccol, z]] * scales[z];
        }
        let aseg = window_segment(st, kept.0, kept.1, None, &kz, 1, 1)?;
        let mut branch: Seg;
        if purifier.0 < kept.0 {
            branch = rvecs[z].clone();
            branch.extend(aseg);
        } else {
            branch = aseg;
            branch.extend(rvecs[z].clone());
        }
        branches.push(seg_scale(branch, weights[z].sqrt()));
    }
    seg_sum(branches)
}

struct Part2BlockData {
    seg: Option<Seg>,
    standalone: Option<Mps>,
}

fn part2_phi(
    psi2: &Mps,
    truncs: &[(Mps, f64)],
    layout_splits: &[BlockSplit],
    l: usize,
    n: usize,
    t: usize,
    hd: usize,
    j: usize,
    built: &[Mps],
) -> Result<(Mps, Vec<Option<Mps>>)> {
    let d = psi2.site_dim();
    let n_sites = psi2.n_sites();
    let mut blocks: Vec<Part2BlockData> = Vec::with_capacity(n);
    for i in 0..n {
        let split = &layout_splits[i];
        if i == 0 && j > 0 {
            blocks.push(Part2BlockData {
                seg: None,
                standalone: None,
            });
            continue;
        }
        let kept = split.kept_runs[0];
        let purifier = split.purifier_runs[0];
        let st = &truncs[i].0;
        let ens = window_ensemble(st, kept.0, kept.1, None)?;
        let zcount = ens.weights.len();
        let jp = (j + i) % l;
        let i0 = i % l;
        let avoid = if i0 >= t && i0 + t <= l && jp < j {
            Some((&built[jp], purifier.0))
        } else {
            None
        };
        let rvecs = purifier_vectors(zcount, hd, d, t, avoid)?;
        let seg = part2_block_segment(
            st,
            kept,
            purifier,
            &rvecs,
            &ens.weights,
            &ens.coeffs,
            &ens.scales,
        )?;
        let span = split
            .kept_runs
            .iter()
            .chain(split.purifier_runs.iter())
            .fold((usize::MAX, 0usize), |acc, &(s, e)| {
                (acc.0.min(s), acc.1.max(e))
            });
        let standalone = Mps::from_tensors(d, seg.clone(), 0.0).ok().map(|m| {
            debug_assert_eq!(span.1 - span.0, m.n_sites());
            m
        });
        blocks.push(Part2BlockData {
            seg: Some(seg),
            standalone,
        });
    }

    let phi = if j == 0 {
        // All blocks contiguous: plain concatenation in physical order
        // (block 0 sits at the chain end).
        let mut tensors: Vec<SiteTensor> = Vec::with_capacity(n_sites);
        for i in 1..n {
            tensors.extend(blocks[i].seg.clone().unwrap());
        }
        tensors.extend(blocks[0].seg.clone().unwrap());
        Mps::from_tensors(d, tensors, 0.0)?.compressed()?
    } else {
        // The rolled-over block couples the chain ends; enumerate the
        // coupling index and sum the resulting product slices.
        let split = &layout_splits[0];
        let st = &truncs[0].0;
        let es = j + l * (n - 1);

        let mut middle: Vec<SiteTensor> = Vec::new();
        for i in 1..n {
            middle.extend(blocks[i].seg.clone().unwrap());
        }

        let mut slices: Vec<Mps> = Vec::new();
        if j >= t {
            // Purifier sits between the left environment and the middle.
            let (cs, ce) = (j - t, es);
            let c = st.canonicalize(j)?;
            let (weights, coeffs, la, lb) = complement_ensemble(&c, cs, ce)?;
            let zcount = weights.len();
            let rdigits: Vec<Vec<usize>> = (0..zcount)
                .map(|z| purifier_halfbasis_digits(z, hd, t))
                .collect();
            if zcount > hd.pow(t as u32) {
                return Err(Error::Parameter(format!(
                    "need {zcount} purifier states but the half-basis \
                     subspace has dimension {}",
                    hd.pow(t as u32)
                )));
            }
            let l_tensors: Vec<SiteTensor> = (0..cs).map(|s2| c.tensor(s2).clone()).collect();
            let r_tensors: Vec<SiteTensor> =
                (ce..n_sites).map(|s2| c.tensor(s2).clone()).collect();
            let purifier = split.purifier_runs[0];
            let mut w = CMat::zeros((la * zcount, lb));
            for a in 0..la {
                for z in 0..zcount {
                    for b in 0..lb {
                        w[[a * zcount + z, b]] =
                            coeffs[[a * lb + b, z]] * weights[z].sqrt();
                    }
                }
            }
            let f = svd(&w)?;
            let rank = f.rank().max(1);
            for wi in 0..rank {
                let mut start_branches = Vec::with_capacity(zcount);
                for z in 0..zcount {
                    let mut q = CVec::zeros(la);
                    for a in 0..la {
                        q[a] = f.u[[a * zcount + z, wi]] * f.s[wi];
                    }
                    let mut branch: Seg = digit_product(&rdigits[z], d);
                    if l_tensors.is_empty() {
                        branch[0].mapv_inplace(|v| v * q[0]);
                    } else {
                        let mut b2 = fold_right_vector(&l_tensors, &q)?;
                        b2.extend(branch);
                        branch = b2;
                    }
                    debug_assert_eq!(branch.len(), purifier.1 - purifier.0 + cs);
                    start_branches.push(branch);
                }
                let start_seg = seg_sum(start_branches)?;
                let mut rq = CVec::zeros(lb);
                for b in 0..lb {
                    rq[b] = f.vdag[[wi, b]];
                }
                let end_seg = fold_left_vector(&r_tensors, &rq)?;
                let mut tensors: Vec<SiteTensor> = Vec::with_capacity(n_sites);
                tensors.extend(start_seg);
                tensors.extend(middle.clone());
                tensors.extend(end_seg);
                slices.push(Mps::from_tensors(d, tensors, 0.0)?);
            }
        } else {
            // 0 < j < t: the purifier fills the last `t` cyclic sites of
            // the block, so the kept run `[es, ke)` is contiguous and its
            // marginal purifies exactly as for a regular block, while the
            // purifier digit string splits into a head on `[ke, n_sites)`
            // and a tail on `[0, j)`.  The tail couples the chain start
            // to the rest only through the purifier index, so grouping
            // the indices by tail pattern yields slices that are products
            // across the `[0, j)` cut.
            let ke = n_sites - (t - j);
            let ens = window_ensemble(st, es, ke, None)?;
            let zcount = ens.weights.len();
            if zcount > hd.pow(t as u32) {
                return Err(Error::Parameter(format!(
                    "need {zcount} purifier states but the half-basis \
                     subspace has dimension {}",
                    hd.pow(t as u32)
                )));
            }
            let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
            for z in 0..zcount {
                let digits = purifier_halfbasis_digits(z, hd, t);
                groups.entry(digits[t - j..].to_vec()).or_default().push(z);
            }
            for (tail, zs) in &groups {
                let mut end_branches = Vec::with_capacity(zs.len());
                for &z in zs {
                    let mut kz = CMat::zeros((ens.coeffs.nrows(), 1));
                    for ccol in 0..ens.coeffs.nrows() {
                        kz[[ccol, 0]] = ens.coeffs[[ccol, z]] * ens.scales[z];
                    }
                    let mut branch = window_segment(st, es, ke, None, &kz, 1, 1)?;
                    let digits = purifier_halfbasis_digits(z, hd, t);
                    branch.extend(digit_product(&digits[..t - j], d));
                    end_branches.push(seg_scale(branch, ens.weights[z].sqrt()));
                }
                let end_seg = seg_sum(end_branches)?;
                let mut tensors: Vec<SiteTensor> = Vec::with_capacity(n_sites);
                tensors.extend(digit_product(tail, d));
                tensors.extend(middle.clone());
                tensors.extend(end_seg);
                slices.push(Mps::from_tensors(d, tensors, 0.0)?);
            }
        }
        let one = C64::new(1.0, 0.0);
        let mut phi = slices[0].clone();
        for (si, sl) in slices[1..].iter().enumerate() {
            phi = Mps::add(&phi, sl, one, one)?;
            if (si + 1) % 8 == 0 {
                phi = phi.compressed()?;
            }
        }
        phi.compressed()?
    };
    let standalones = blocks.into_iter().map(|b| b.standalone).collect();
    Ok((phi, standalones))
}

/// Second construction, returning branch and block states as well.
pub fn build_part2_detailed(
    psi: &Mps,
    k: usize,
    eps: f64,
    chi_p: Option<usize>,
) -> Result<Part2Build> {
    let d0 = psi.site_dim();
    let (psi2, coarse_factor) = if d0 < 4 {
        (psi.coarse_grain(2)?, 2)
    } else {
        (psi.clone(), 1)
    };
    let psi2 = psi2.normalized()?;
    let d = psi2.site_dim();
    let n_sites = psi2.n_sites();
    let hd = d / 2;

    let truncation_pass = |chi: usize| -> Result<(usize, usize, Vec<Vec<(Mps, f64)>>, f64)> {
        let (t, l) = part2_params(d, k, eps, chi)?;
        let n = n_sites / l;
        if n < 2 {
            return Err(Error::Resource(format!(
                "chain of {n_sites} working sites too short for block length \
                 {l}; need at least {}",
                2 * l
            )));
        }
        let mut per_offset = Vec::with_capacity(l);
        let mut w_max = 0.0f64;
        for j in 0..l {
            let mut per_block = Vec::with_capacity(n);
            for i in 0..n {
                let split = part2_split(n_sites, l, n, j, i, t);
                let cuts = cuts_for_runs(&split.kept_runs, n_sites);
                let (st, _) = psi2.truncate_at_cuts(&cuts, chi)?;
                let ovl = Mps::inner(&psi2, &st)?.norm();
                let dist = (1.0 - (ovl * ovl).min(1.0)).max(0.0).sqrt();
                w_max = w_max.max(dist);
                per_block.push((st, dist));
            }
            per_offset.push(per_block);
        }
        Ok((t, l, per_offset, w_max))
    };

    let (chi, t, l, truncs, w_max) = match chi_p {
        Some(chi) => {
            let (t, l, truncs, w_max) = truncation_pass(chi)?;
            (chi, t, l, truncs, w_max)
        }
        None => {
            let mut found = None;
            for chi in 1..=64usize {
                let (t, l, truncs, w_max) = truncation_pass(chi)?;
                if (2.0 * l as f64).sqrt() * w_max <= eps / 2.0 {
                    found = Some((chi, t, l, truncs, w_max));
                    break;
                }
            }
            found.ok_or_else(|| {
                Error::Parameter(
                    "no truncation bond up to 64 meets half the accuracy \
                     budget; increase eps"
                        .into(),
                )
            })?
        }
    };
    let n = n_sites / l;
    if hd.pow(t as u32) < 2 * chi * chi {
        return Err(Error::Parameter(format!(
            "purifier too small: ⌊d/2⌋^t = {} < 2χ′² = {}",
            hd.pow(t as u32),
            2 * chi * chi
        )));
    }

    let splits_per_offset: Vec<Vec<BlockSplit>> = (0..l)
        .map(|j| (0..n).map(|i| part2_split(n_sites, l, n, j, i, t)).collect())
        .collect();

    let mut phis: Vec<Mps> = Vec::with_capacity(l);
    let mut block_states: Vec<Vec<Option<Mps>>> = Vec::with_capacity(l);
    for j in 0..l {
        let (phi, standalones) = part2_phi(
            &psi2,
            &truncs[j],
            &splits_per_offset[j],
            l,
            n,
            t,
            hd,
            j,
            &phis,
        )?;
        phis.push(phi);
        block_states.push(standalones);
    }

    let mut resid = 0.0f64;
    for j in 0..l {
        for jp in j..l {
            let ip = Mps::inner(&phis[j], &phis[jp])?;
            let target = if j == jp { 1.0 } else { 0.0 };
            resid = resid.max((ip - C64::new(target, 0.0)).norm());
        }
    }

    let one = C64::new(1.0, 0.0);
    let mut tilde = phis[0].clone();
    for phi in &phis[1..] {
        tilde = Mps::add(&tilde, phi, one, one)?;
    }
    let tilde = tilde.compressed()?;
    // Branches of this construction are only approximately orthogonal
    // when few blocks fit the chain, so normalize the superposition
    // explicitly; the residual stays visible in the report.
    let tilde = tilde.normalized()?;

    let trace_report = metrics::local_trace_distance(&psi2, &tilde, k)?;
    let max_pure = metrics::local_purified_distance(&psi2, &tilde, k)?;
    let bond_profile = tilde.bond_profile();

    let mut layout = layout_with_offset(n_sites, l, 0, Vec::new(), false);
    layout.splits = Some(splits_per_offset[0].clone());

    let report = ApproxReport {
        k,
        eps,
        block_length: l,
        purifier_length: Some(t),
        chi_p: Some(chi),
        compacted: None,
        w_max,
        max_window_error: max_pure,
        measured_local_error: trace_report,
        bond_profile,
        orthogonality_residual: resid,
    };
    Ok(Part2Build {
        psi_tilde: tilde,
        report,
        phis,
        psi_coarse: psi2,
        coarse_factor,
        layout,
        block_states,
    })
}

/// Second construction: truncate-and-purify blocks.  The input is
/// coarse-grained (pairwise) first if its site dimension is below 4; the
/// output lives on the working chain.
pub fn build_part2(
    psi: &Mps,
    k: usize,
    eps: f64,
    chi_p: Option<usize>,
) -> Result<(Mps, ApproxReport)> {
    let b = build_part2_detailed(psi, k, eps, chi_p)?;
    Ok((b.psi_tilde, b.report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_state(seed: u64, n: usize, d: usize, chi: usize) -> Mps {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mps::random(&mut rng, n, d, chi).unwrap().normalized().unwrap()
    }

    #[test]
    fn layout_rejects_short_chains_and_large_eps() {
        let err = plan_layout_part1(100, 2, 0.5).unwrap_err();
        assert!(matches!(err, Error::Resource(_)));
        assert!(err.to_string().contains("1020"));
        let err = plan_layout_part1(2000, 2, 3.0).unwrap_err();
        assert!(matches!(err, Error::Parameter(_)));
    }

    #[test]
    fn layout_markers_are_spaced() {
        // k = 2, eps = 0.5 gives block length 10; the minimal chain uses
        // the packed marker placement.
        let layout = plan_layout_part1(1020, 2, 0.5).unwrap();
        assert_eq!(layout.block_length, 10);
        assert!(layout.compacted);
        assert_eq!(layout.markers.len(), 10 * 9);
        let mut sites: Vec<usize> = layout.markers.iter().map(|m| m.site).collect();
        sites.sort_unstable();
        for w in sites.windows(2) {
            assert!(w[1] - w[0] >= 10);
        }
        let limit = 10 * (layout.n_blocks - 1);
        assert!(sites.iter().all(|&s| s >= 110 && s < limit));
    }

    #[test]
    fn layout_uses_wide_placement_on_long_chains() {
        // Block length 6; a chain of 5 l^3 sites fits the analytic
        // marker formula.
        let layout = plan_layout_part1(1080, 2, 0.84).unwrap();
        assert_eq!(layout.block_length, 6);
        assert!(!layout.compacted);
        let m01 = layout
            .markers
            .iter()
            .find(|m| m.zero_offset == 0 && m.one_offset == 1)
            .unwrap();
        assert_eq!(m01.site, 5 * 36 - 6);
        assert!(markers_separated(&layout.markers, 6));
    }

    #[test]
    fn segment_sum_matches_dense_addition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = Mps::random(&mut rng, 5, 2, 3).unwrap();
        let b = Mps::random(&mut rng, 5, 2, 3).unwrap();
        let seg_a: Seg = seg_scale(
            (0..5).map(|s| a.tensor(s).clone()).collect(),
            a.log_norm().exp(),
        );
        let seg_b: Seg = seg_scale(
            (0..5).map(|s| b.tensor(s).clone()).collect(),
            b.log_norm().exp(),
        );
        let sum = seg_sum(vec![seg_a, seg_b]).unwrap();
        let m = Mps::from_tensors(2, sum, 0.0).unwrap();
        let expect = Mps::add(&a, &b, C64::new(1.0, 0.0), C64::new(1.0, 0.0)).unwrap();
        let dm = m.to_dense().unwrap();
        let de = expect.to_dense().unwrap();
        let dist: f64 = dm
            .iter()
            .zip(de.iter())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(dist < 1e-10, "segment sum deviates by {dist}");
    }

    #[test]
    fn window_ensemble_reconstructs_the_marginal() {
        let psi = random_state(11, 8, 2, 3);
        let (ws, we) = (2, 5);
        let ens = window_ensemble(&psi, ws, we, None).unwrap();
        // Materialize each eigenvector as an MPS fragment and check
        // orthonormality plus the spectral reconstruction of the
        // marginal.
        let frags: Vec<Mps> = (0..ens.weights.len())
            .map(|y| {
                let mut kz = CMat::zeros((ens.coeffs.nrows(), 1));
                for c in 0..ens.coeffs.nrows() {
                    kz[[c, 0]] = ens.coeffs[[c, y]] * ens.scales[y];
                }
                let seg = window_segment(&psi, ws, we, None, &kz, 1, 1).unwrap();
                Mps::from_tensors(2, seg, 0.0).unwrap()
            })
            .collect();
        for (y, fy) in frags.iter().enumerate() {
            for (yp, fyp) in frags.iter().enumerate() {
                let ip = Mps::inner(fy, fyp).unwrap();
                let target = if y == yp { 1.0 } else { 0.0 };
                assert!(
                    (ip - C64::new(target, 0.0)).norm() < 1e-9,
                    "fragment overlap ({y},{yp}) = {ip}"
                );
            }
        }
        let dim = 1usize << (we - ws);
        let mut rec = CMat::zeros((dim, dim));
        for (y, fy) in frags.iter().enumerate() {
            let v = fy.to_dense().unwrap();
            for r in 0..dim {
                for c in 0..dim {
                    rec[[r, c]] += v[r] * v[c].conj() * ens.weights[y];
                }
            }
        }
        let rho = psi.rdm(ws, we - ws).unwrap();
        let defect: f64 = rec
            .iter()
            .zip(rho.matrix.iter())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(defect < 1e-9, "marginal reconstruction off by {defect}");
    }

    #[test]
    fn absorb_step_core_is_isometric() {
        let (core, weights) = absorb_step(&[0.6, 0.4], &[0.5, 0.3, 0.2]).unwrap();
        let (ra, rb, m) = core.dim();
        assert_eq!((ra, rb), (2, 3));
        assert!(m <= 3);
        assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..m {
            for j in 0..m {
                let mut z = C64::new(0.0, 0.0);
                for x in 0..ra {
                    for y in 0..rb {
                        z += core[[x, y, i]].conj() * core[[x, y, j]];
                    }
                }
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((z - C64::new(target, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn first_construction_on_a_product_state() {
        // Block length 5 on the minimal chain of 135 sites.
        let plus = CVec::from(vec![
            C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        ]);
        let states: Vec<CVec> = (0..135).map(|_| plus.clone()).collect();
        let psi = Mps::product_state(2, &states).unwrap();
        let build = build_part1_detailed(&psi, 1, 0.8).unwrap();
        assert_eq!(build.report.block_length, 5);
        assert!(build.report.orthogonality_residual < 1e-8);
        let norm = build.psi_tilde.norm();
        assert!((norm - 1.0).abs() < 1e-8, "norm = {norm}");
        assert!(build.report.max_window_error <= 4.0 / 5.0 + 1e-6);
        // Windows past every marker and purifier are reproduced exactly.
        let best = build
            .report
            .measured_local_error
            .per_window
            .iter()
            .map(|&(_, v)| v)
            .fold(f64::INFINITY, f64::min);
        assert!(best < 1e-8, "best window error {best}");
    }

    #[test]
    fn first_construction_on_a_random_state() {
        let psi = random_state(23, 135, 2, 2);
        let build = build_part1_detailed(&psi, 1, 0.8).unwrap();
        assert!(build.report.orthogonality_residual < 1e-8);
        let norm = build.psi_tilde.norm();
        assert!((norm - 1.0).abs() < 1e-8, "norm = {norm}");
        assert!(build.report.max_window_error <= 4.0 / 5.0 + 1e-6);
        assert_eq!(build.phis.len(), 5);
        assert_eq!(build.layouts.len(), 5);
    }

    #[test]
    fn second_construction_is_lossless_below_the_truncation_bond() {
        // chi = 2 state: every coarse-grained cut already fits chi' = 2,
        // so the only error left is the purifier budget (k + t)/l.
        let psi = random_state(31, 32, 2, 2);
        let build = build_part2_detailed(&psi, 1, 1.5, Some(2)).unwrap();
        assert_eq!(build.coarse_factor, 2);
        assert_eq!(build.report.purifier_length, Some(4));
        assert_eq!(build.report.block_length, 8);
        assert!(build.report.w_max < 1e-6, "w_max = {}", build.report.w_max);
        let norm = build.psi_tilde.norm();
        assert!((norm - 1.0).abs() < 1e-8, "norm = {norm}");
        let budget = (1.0 + 4.0) / 8.0 + 1e-6;
        assert!(
            build.report.max_window_error <= budget,
            "window error {} > {budget}",
            build.report.max_window_error
        );
    }

    #[test]
    fn second_construction_support_avoidance_path() {
        // chi' = 1 on a 12-site working chain: block length 4 with a
        // 2-site purifier, so the third branch must orthogonalize its
        // purifier against the support of an earlier branch.
        let psi = random_state(37, 24, 2, 2);
        let build = build_part2_detailed(&psi, 1, 1.5, Some(1)).unwrap();
        assert_eq!(build.report.purifier_length, Some(2));
        assert_eq!(build.report.block_length, 4);
        let norm = build.psi_tilde.norm();
        assert!((norm - 1.0).abs() < 1e-8, "norm = {norm}");
    }

    #[test]
    fn purifier_vectors_avoid_a_given_support() {
        // phi_prev pins the purifier sites to a half-basis product
        // state; the avoidance path must return orthonormal vectors
        // orthogonal to it.
        let states: Vec<usize> = vec![0, 1, 0, 3];
        let phi_prev = Mps::basis_state(4, &states).unwrap();
        let vecs = purifier_vectors(2, 2, 4, 2, Some((&phi_prev, 1))).unwrap();
        assert_eq!(vecs.len(), 2);
        let support = Mps::basis_state(4, &[1, 0]).unwrap();
        let frags: Vec<Mps> = vecs
            .iter()
            .map(|seg| Mps::from_tensors(4, seg.clone(), 0.0).unwrap())
            .collect();
        for (a, fa) in frags.iter().enumerate() {
            let ovl = Mps::inner(fa, &support).unwrap().norm();
            assert!(ovl < 1e-10, "vector {a} overlaps the support: {ovl}");
            for (b, fb) in frags.iter().enumerate() {
                let ip = Mps::inner(fa, fb).unwrap();
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((ip - C64::new(target, 0.0)).norm() < 1e-10);
            }
        }
    }
}
