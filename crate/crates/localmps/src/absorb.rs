//! Joint states with prescribed marginals and no rank blow-up.
//!
//! Given marginals τ_A and τ_B of equal trace, an iterative pairing
//! procedure builds a joint state σ_AB with σ_A = τ_A, σ_B = τ_B and
//!
//! ```text
//!   rank(σ_AB) ≤ max(rank τ_A, rank τ_B).
//! ```
//!
//! Each round eigendecomposes the two residual operators, pairs their
//! eigenvalues smallest-first, and emits an unnormalized pure component
//!
//! ```text
//!   |u_j⟩ = Σ_i √min(λ_{j,i}, μ_{j,i}) |s_{j,i}⟩_A ⊗ |r_{j,i}⟩_B ,
//! ```
//!
//! then subtracts its marginals from the residuals. Taking the minimum
//! guarantees that every paired term fully exhausts at least one side,
//! so the combined residual rank drops below max(a_j, b_j) each round
//! and the loop terminates after at most max(rank τ_A, rank τ_B)
//! rounds. The joint state is σ_AB = Σ_j |u_j⟩⟨u_j|.
//!
//! `absorb_chain` left-folds this over a list of marginals, producing a
//! joint state on the full tensor product whose rank stays below the
//! largest single-marginal rank.

use crate::error::{Error, Result};
use crate::mps::DensityMatrix;
use crate::numerics::{self, eigh_psd, outer};
use crate::{C64, CMat, CVec};

/// Eigenvalues below this fraction of the initial trace count as zero.
const ABSORB_RANK_EPS: f64 = 1e-12;

/// Output of the entropy-absorption procedure.
#[derive(Debug, Clone)]
pub struct AbsorbResult {
    /// The joint density matrix σ_AB = Σ_j |u_j⟩⟨u_j|.
    pub joint: CMat,
    /// Dimension of the A factor (high-order factor of `joint`).
    pub dim_a: usize,
    /// Dimension of the B factor.
    pub dim_b: usize,
    /// Number of rounds m; also an upper bound on rank(joint).
    pub rounds: usize,
    /// The unnormalized pure components |u_j⟩, one per round.
    pub pure_components: Vec<CVec>,
    /// Combined residual rank a_j + b_j after each round (for auditing
    /// the per-round descent).
    pub rank_history: Vec<usize>,
}

// Eigenpairs above the rank threshold, ascending by eigenvalue.
fn thresholded_spectrum(m: &CMat, tol: f64) -> Result<Vec<(f64, CVec)>> {
    let (vals, vecs) = eigh_psd(m)?;
    let mut pairs: Vec<(f64, CVec)> = vals
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v > tol)
        .map(|(j, &v)| (v, vecs.column(j).to_owned()))
        .collect();
    // eigh_psd returns ascending order already, but make it explicit.
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs)
}

/// Build a joint state on A⊗B with marginals `tau_a`, `tau_b` and rank
/// at most `max(rank τ_A, rank τ_B)`.
///
/// A is the high-order tensor factor of the returned joint matrix.
pub fn absorb_entropy(tau_a: &DensityMatrix, tau_b: &DensityMatrix) -> Result<AbsorbResult> {
    let tr_a = numerics::trace(&tau_a.matrix).re;
    let tr_b = numerics::trace(&tau_b.matrix).re;
    if (tr_a - tr_b).abs() > 1e-10 {
        return Err(Error::Domain(format!(
            "marginal traces differ: {tr_a} vs {tr_b}"
        )));
    }
    let (vals_a, _) = eigh_psd(&tau_a.matrix)?;
    let (vals_b, _) = eigh_psd(&tau_b.matrix)?;
    if vals_a.iter().any(|&v| v < -1e-10) || vals_b.iter().any(|&v| v < -1e-10) {
        return Err(Error::Contract("marginals must be positive semidefinite".into()));
    }

    let da = tau_a.dim();
    let db = tau_b.dim();
    let tol = ABSORB_RANK_EPS * tr_a.max(1e-300);
    let mut alpha = tau_a.matrix.clone();
    let mut beta = tau_b.matrix.clone();
    let spec_a = thresholded_spectrum(&alpha, tol)?;
    let spec_b = thresholded_spectrum(&beta, tol)?;
    let max_rank = spec_a.len().max(spec_b.len());

    let mut joint = CMat::zeros((da * db, da * db));
    let mut components = Vec::new();
    let mut rank_history = Vec::new();
    // No descent constraint applies before the first round.
    let mut prev_max = usize::MAX;

    for _round in 0..max_rank + 2 {
        let spec_a = thresholded_spectrum(&alpha, tol)?;
        let spec_b = thresholded_spectrum(&beta, tol)?;
        let (a_j, b_j) = (spec_a.len(), spec_b.len());
        if a_j == 0 && b_j == 0 {
            return Ok(AbsorbResult {
                joint,
                dim_a: da,
                dim_b: db,
                rounds: components.len(),
                pure_components: components,
                rank_history,
            });
        }
        if a_j + b_j > prev_max {
            return Err(Error::Internal(format!(
                "residual rank {a_j}+{b_j} failed to descend below {prev_max}"
            )));
        }
        prev_max = a_j.max(b_j);
        rank_history.push(a_j + b_j);
        if a_j == 0 || b_j == 0 {
            return Err(Error::Internal(
                "one residual vanished before the other; trace bookkeeping broke".into(),
            ));
        }
        let n = a_j.min(b_j);
        let mut u = CVec::zeros(da * db);
        for i in 0..n {
            let (lam, s) = &spec_a[i];
            let (mu, r) = &spec_b[i];
            let w = C64::new(lam.min(*mu).sqrt(), 0.0);
            for x in 0..da {
                if s[x] == C64::new(0.0, 0.0) {
                    continue;
                }
                for y in 0..db {
                    u[x * db + y] += w * s[x] * r[y];
                }
            }
            // Subtract the component's marginals from the residuals.
            let m = lam.min(*mu);
            alpha = &alpha - &outer(s, s).mapv(|z| z * m);
            beta = &beta - &outer(r, r).mapv(|z| z * m);
        }
        joint = &joint + &outer(&u, &u);
        components.push(u);
    }
    Err(Error::Internal(format!(
        "absorption failed to terminate within {} rounds",
        max_rank + 2
    )))
}

/// Left-fold `absorb_entropy` over a list of marginals.
///
/// The result lives on the tensor product of all inputs, with the first
/// input as the highest-order factor; its rank stays at or below the
/// largest single input rank.
pub fn absorb_chain(states: &[DensityMatrix]) -> Result<AbsorbResult> {
    let first = states
        .first()
        .ok_or_else(|| Error::Parameter("absorb_chain needs at least one state".into()))?;
    let mut acc = AbsorbResult {
        joint: first.matrix.clone(),
        dim_a: 1,
        dim_b: first.dim(),
        rounds: 1,
        pure_components: Vec::new(),
        rank_history: Vec::new(),
    };
    for next in &states[1..] {
        let left = DensityMatrix::new(0, 1, acc.dim_a * acc.dim_b, acc.joint)?;
        acc = absorb_entropy(&left, next)?;
    }
    Ok(acc)
}
