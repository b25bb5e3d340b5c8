//! Desk-scale acceptance runs for every headline guarantee of the crate.
//!
//! Each test covers one criterion, prints a single `PASS`/`FAIL` line
//! (visible with `--nocapture`), and enforces the stated numerical
//! tolerances and wall-clock budget.  A failing clause panics with the
//! full clause list so the offending quantity is visible in the harness
//! output.

use std::time::Instant;

use ndarray::Array1;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use localmps::absorb::absorb_entropy;
use localmps::circuit_approx::{build_theorem2_detailed, markov_violation, uhlmann_unitary};
use localmps::hamiltonian::{
    build_hz, build_tfim, build_tfim_ti, combine_k, dense_matrix, dmrg_ground_state,
    ed_ground_state, NnHamiltonian,
};
use localmps::local_approx::{build_part1_detailed, build_part2_detailed};
use localmps::metrics;
use localmps::mps::{DensityMatrix, Mps};
use localmps::numerics::{eigh_psd, outer, partial_trace, trace_norm};
use localmps::reduction::{estimate_energy_density, AdversarialFlip, EdLocalOracle};
use localmps::{C64, CMat, CVec};

// ---------------------------------------------------------------------------
// Clause bookkeeping
// ---------------------------------------------------------------------------

struct Criterion {
    name: &'static str,
    started: Instant,
    clauses: Vec<(String, bool)>,
}

impl Criterion {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            started: Instant::now(),
            clauses: Vec::new(),
        }
    }

    fn check(&mut self, label: impl Into<String>, ok: bool) {
        self.clauses.push((label.into(), ok));
    }

    /// Record the runtime clause and emit the one-line verdict.
    fn finish(mut self, budget_secs: f64) {
        let elapsed = self.started.elapsed().as_secs_f64();
        self.check(
            format!("runtime {elapsed:.1} s within {budget_secs:.0} s budget"),
            elapsed <= budget_secs,
        );
        let failed: Vec<&(String, bool)> = self.clauses.iter().filter(|c| !c.1).collect();
        if failed.is_empty() {
            println!("PASS {} ({elapsed:.1} s)", self.name);
        } else {
            println!("FAIL {} ({elapsed:.1} s)", self.name);
            let detail: Vec<String> = failed.iter().map(|c| c.0.clone()).collect();
            panic!(
                "FAIL {}: {} of {} clauses failed:\n  {}",
                self.name,
                failed.len(),
                self.clauses.len(),
                detail.join("\n  ")
            );
        }
    }
}

// ---------------------------------------------------------------------------
// Random-object helpers
// ---------------------------------------------------------------------------

fn random_complex(rng: &mut StdRng) -> C64 {
    C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
}

fn random_pure(rng: &mut StdRng, dim: usize) -> CVec {
    let mut v = CVec::zeros(dim);
    for x in v.iter_mut() {
        *x = random_complex(rng);
    }
    let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.mapv(|z| z / nrm)
}

/// Random rank-`rank` density matrix of unit trace.
fn random_density(rng: &mut StdRng, dim: usize, rank: usize) -> CMat {
    let mut m = CMat::zeros((dim, dim));
    for _ in 0..rank {
        let v = random_pure(rng, dim);
        let w = rng.gen::<f64>() + 0.1;
        m = m + outer(&v, &v).mapv(|z| z * w);
    }
    let tr: f64 = (0..dim).map(|i| m[(i, i)].re).sum();
    m.mapv(|z| z / tr)
}

/// Eigenvalue count above an absolute threshold.
fn rank_at(m: &CMat, tol: f64) -> usize {
    let h = m.mapv(|z| z) * C64::new(0.5, 0.0)
        + m.t().mapv(|z| z.conj()) * C64::new(0.5, 0.0);
    let (vals, _) = eigh_psd(&h).unwrap();
    vals.iter().filter(|&&v| v > tol).count()
}

fn dm1(dim: usize, m: CMat) -> DensityMatrix {
    DensityMatrix::new(0, 1, dim, m).unwrap()
}

fn ghz(n: usize, sign: f64) -> Mps {
    let dim = 1usize << n;
    let mut v = CVec::zeros(dim);
    let amp = C64::new(1.0 / 2.0_f64.sqrt(), 0.0);
    v[0] = amp;
    v[dim - 1] = amp * sign;
    Mps::from_dense(&v, 2, n).unwrap()
}

/// Neighbor-bond ratio check: adjacent true Schmidt ranks (with the
/// implicit boundary bonds of 1) never jump by more than a factor `d`.
fn bond_ratio_ok(psi: &Mps) -> bool {
    let d = psi.site_dim();
    let mut profile = vec![1usize];
    profile.extend(psi.bond_profile());
    profile.push(1);
    profile
        .windows(2)
        .all(|w| w[1] <= d * w[0] && w[0] <= d * w[1])
}

// ---------------------------------------------------------------------------
// 1. Entropy absorption
// ---------------------------------------------------------------------------

#[test]
fn absorption_reproduces_marginals_with_bounded_descending_rank() {
    let mut c = Criterion::new("entropy absorption (500 marginal pairs)");
    let mut rng = StdRng::seed_from_u64(41);
    let mut worst_dist = 0.0f64;
    let mut rank_ok = true;
    let mut descent_ok = true;
    for _ in 0..500 {
        let da: usize = rng.gen_range(2..=6);
        let db: usize = rng.gen_range(2..=6);
        let ra = rng.gen_range(1..=da);
        let rb = rng.gen_range(1..=db);
        let tau_a = random_density(&mut rng, da, ra);
        let tau_b = random_density(&mut rng, db, rb);
        let res = absorb_entropy(&dm1(da, tau_a.clone()), &dm1(db, tau_b.clone())).unwrap();
        let marg_a = partial_trace(&res.joint, &[da, db], &[0]).unwrap();
        let marg_b = partial_trace(&res.joint, &[da, db], &[1]).unwrap();
        let dist_a = 0.5 * trace_norm(&(&marg_a - &tau_a)).unwrap();
        let dist_b = 0.5 * trace_norm(&(&marg_b - &tau_b)).unwrap();
        worst_dist = worst_dist.max(dist_a).max(dist_b);
        let bound = rank_at(&tau_a, 1e-12).max(rank_at(&tau_b, 1e-12));
        rank_ok &= rank_at(&res.joint, 1e-12) <= bound;
        descent_ok &= res.rank_history.windows(2).all(|w| w[1] < w[0]);
    }
    c.check(
        format!("marginals reproduced: worst trace distance {worst_dist:.2e} ≤ 1e-9"),
        worst_dist <= 1e-9,
    );
    c.check("rank(joint) ≤ max marginal rank at threshold 1e-12", rank_ok);
    c.check("residual rank strictly decreases every round", descent_ok);
    c.finish(30.0);
}

// ---------------------------------------------------------------------------
// 2. Tripartite rank inequalities and neighbor-bond ratios
// ---------------------------------------------------------------------------

#[test]
fn tripartite_rank_inequalities_and_bond_ratios_hold() {
    let mut c = Criterion::new("rank inequalities (100 tripartite states)");
    let mut rng = StdRng::seed_from_u64(43);
    let mut rank_ok = true;
    for _ in 0..100 {
        let da = rng.gen_range(2..=4);
        let db = rng.gen_range(2..=4);
        let dc = rng.gen_range(2..=4);
        let v = random_pure(&mut rng, da * db * dc);
        let proj = outer(&v, &v);
        let dims = [da, db, dc];
        let r = |keep: &[usize]| -> usize {
            rank_at(&partial_trace(&proj, &dims, keep).unwrap(), 1e-12)
        };
        // rank(σ_XY)·rank(σ_Y) ≥ rank(σ_X) for the three cyclic labelings.
        rank_ok &= r(&[0, 1]) * r(&[1]) >= r(&[0]);
        rank_ok &= r(&[1, 2]) * r(&[2]) >= r(&[1]);
        rank_ok &= r(&[0, 2]) * r(&[0]) >= r(&[2]);
    }
    c.check("all three cyclic rank inequalities", rank_ok);

    let mut ratio_ok = true;
    for (n, d, chi) in [(10usize, 2usize, 5usize), (8, 3, 4), (6, 4, 3)] {
        let psi = Mps::random(&mut rng, n, d, chi).unwrap().compressed().unwrap();
        ratio_ok &= bond_ratio_ok(&psi);
    }
    ratio_ok &= bond_ratio_ok(&ghz(8, 1.0));
    ratio_ok &= bond_ratio_ok(&ghz(8, -1.0));
    c.check("neighbor-bond ratio ≤ d on assorted states", ratio_ok);
    c.finish(10.0);
}

// ---------------------------------------------------------------------------
// 3. Distance-metric sandwich and the locally identical pair
// ---------------------------------------------------------------------------

#[test]
fn metric_sandwich_and_locally_indistinguishable_pair() {
    let mut c = Criterion::new("metric sandwich + GHZ pair");
    let mut rng = StdRng::seed_from_u64(47);
    let mut sandwich_ok = true;
    for _ in 0..200 {
        let dim: usize = rng.gen_range(2..=6);
        let ra = rng.gen_range(1..=dim);
        let rb = rng.gen_range(1..=dim);
        let a = dm1(dim, random_density(&mut rng, dim, ra));
        let b = dm1(dim, random_density(&mut rng, dim, rb));
        let t = metrics::trace_distance(&a, &b).unwrap();
        let p = metrics::purified_distance(&a, &b).unwrap();
        sandwich_ok &= t <= p + 1e-9 && p <= (2.0 * t).sqrt() + 1e-9;
    }
    c.check("trace ≤ purified ≤ √(2·trace) on 200 pairs", sandwich_ok);

    let mut pure_ok = true;
    for _ in 0..50 {
        let dim = rng.gen_range(2..=6);
        let va = random_pure(&mut rng, dim);
        let vb = random_pure(&mut rng, dim);
        let a = dm1(dim, outer(&va, &va));
        let b = dm1(dim, outer(&vb, &vb));
        let t = metrics::trace_distance(&a, &b).unwrap();
        let p = metrics::purified_distance(&a, &b).unwrap();
        pure_ok &= (t - p).abs() <= 1e-9;
    }
    c.check("pure-state equality of the two distances", pure_ok);

    let plus = ghz(8, 1.0);
    let minus = ghz(8, -1.0);
    let local = metrics::local_trace_distance(&plus, &minus, 2).unwrap();
    c.check(
        format!(
            "two-site distance {:.2e} ≤ 1e-10 on the sign-flipped pair",
            local.max_value
        ),
        local.max_value <= 1e-10,
    );
    let g = metrics::trace_distance(&plus.rdm(0, 8).unwrap(), &minus.rdm(0, 8).unwrap()).unwrap();
    c.check(format!("global trace distance {g:.9} = 1 ± 1e-9"), (g - 1.0).abs() <= 1e-9);
    c.finish(10.0);
}

// ---------------------------------------------------------------------------
// 4. First superposition construction, desk scale
// ---------------------------------------------------------------------------

#[test]
fn marker_construction_desk_experiment() {
    let mut c = Criterion::new("marker construction (l = 6, 8, 10)");
    let mut rng = StdRng::seed_from_u64(53);
    let k = 2usize;
    for l in [6usize, 8, 10] {
        let eps = 5.0 / l as f64;
        let n_sites = l * (l * l + 2);
        let psi = Mps::random(&mut rng, n_sites, 2, 4)
            .unwrap()
            .normalized()
            .unwrap();
        let b = build_part1_detailed(&psi, k, eps).unwrap();
        assert_eq!(b.report.block_length, l, "planned block length");
        c.check(
            format!(
                "l={l}: orthogonality residual {:.2e} ≤ 1e-8",
                b.report.orthogonality_residual
            ),
            b.report.orthogonality_residual <= 1e-8,
        );
        let bound = (k as f64 + 3.0) / l as f64 + 1e-6;
        let d1 = b.report.measured_local_error.max_value;
        c.check(
            format!("l={l}: window error {d1:.4} ≤ (k+3)/l = {bound:.4}"),
            d1 <= bound,
        );

        // Interior windows away from the purifier blocks and marker
        // sites carry the exact marginal of ψ.
        let markers: Vec<usize> = b.layouts[0].markers.iter().map(|m| m.site).collect();
        let n_blocks = b.layouts[0].n_blocks;
        let mut exact_ok = true;
        let mut checked = 0usize;
        for &j in &[0usize, l / 2] {
            for i in 1..n_blocks {
                if i == j || i == j + 1 || checked >= 6 {
                    continue;
                }
                let (bs, be) = (j + l * (i - 1), j + l * i);
                let start = (bs..be - k).find(|&s| {
                    (s..s + k).all(|site| !markers.contains(&site))
                });
                if let Some(s) = start {
                    let got = b.phis[j].rdm(s, k).unwrap();
                    let want = psi.rdm(s, k).unwrap();
                    let dist = metrics::trace_distance(&got, &want).unwrap();
                    exact_ok &= dist <= 1e-8;
                    checked += 1;
                }
            }
        }
        c.check(
            format!("l={l}: {checked} interior windows exact to 1e-8"),
            exact_ok && checked > 0,
        );
    }
    c.finish(300.0);
}

// ---------------------------------------------------------------------------
// 5. Truncate-and-purify construction on a DMRG ground state
// ---------------------------------------------------------------------------

#[test]
fn purifier_construction_desk_experiment() {
    let mut c = Criterion::new("purifier construction on TFIM N=64");
    let h = build_tfim(64, 1.0, 2.0).unwrap();
    let res = dmrg_ground_state(&h, 32, 12).unwrap();
    let gs = res.state.normalized().unwrap();
    let k = 2usize;

    // Per-χ′ accuracy targets: the block length must stay within the
    // 32-site working chain (two blocks minimum), which pins the
    // smallest meaningful eps for each purifier length.
    let mut errors = Vec::new();
    for (chi_p, eps) in [(2usize, 0.75f64), (4, 1.0), (8, 1.25)] {
        let b = build_part2_detailed(&gs, k, eps, Some(chi_p)).unwrap();
        let l = b.report.block_length;
        let t = b.report.purifier_length.unwrap();
        let d1 = b.report.measured_local_error.max_value;
        let bound = (2.0 * l as f64).sqrt() * b.report.w_max + (k + t) as f64 / l as f64 + 1e-6;
        c.check(
            format!("χ′={chi_p}: window error {d1:.4} ≤ √(2l)·w_max + (k+t)/l = {bound:.4}"),
            d1 <= bound,
        );
        let max_bond = *b.report.bond_profile.iter().max().unwrap();
        let cap = 4 * l * chi_p * chi_p;
        c.check(
            format!("χ′={chi_p}: bond {max_bond} ≤ 4lχ′² = {cap}"),
            max_bond <= cap,
        );
        errors.push((chi_p, d1));
    }
    let mono = errors.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9);
    c.check(
        format!(
            "error nonincreasing in χ′: {}",
            errors
                .iter()
                .map(|(cp, e)| format!("χ′={cp}: {e:.4}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        mono,
    );

    // Long-range correlation witness: project two block states of the
    // same branch, separated by ≥ l working sites, out of ψ̃ and
    // evaluate the sign observables 2|q⟩⟨q| − 1 on both regions.
    let b = build_part2_detailed(&gs, k, 1.5, Some(2)).unwrap();
    let l = b.report.block_length;
    let n_work = b.psi_tilde.n_sites();
    let q_first = b.block_states[0][1].clone().unwrap().normalized().unwrap();
    let q_last = b.block_states[0][0].clone().unwrap().normalized().unwrap();
    let last_start = n_work - q_last.n_sites();
    assert!(last_start - q_first.n_sites() >= l, "regions separated by ≥ l");
    let p_first = b
        .psi_tilde
        .project_window(0, &q_first)
        .unwrap()
        .norm()
        .powi(2);
    let reduced = b.psi_tilde.project_window(last_start, &q_last).unwrap();
    let p_last = reduced.norm().powi(2);
    let p_both = reduced.project_window(0, &q_first).unwrap().norm().powi(2);
    let witness = 4.0 * (p_both - p_first * p_last);
    let bound = 1.0 / l as f64 - 1.0 / (l * l) as f64 - 1e-6;
    c.check(
        format!("correlation witness {witness:.4} ≥ 1/l − 1/l² = {bound:.4}"),
        witness >= bound,
    );
    c.finish(600.0);
}

// ---------------------------------------------------------------------------
// 6. Disentangle-project-reentangle sweep
// ---------------------------------------------------------------------------

#[test]
fn disentangling_sweep_desk_experiment() {
    let mut c = Criterion::new("disentangling sweep on TFIM N=12");
    let h = build_tfim(12, 1.0, 2.0).unwrap();
    let spectrum = ed_ground_state(&h).unwrap();
    let psi = spectrum.ground_mps(2, 12).unwrap().normalized().unwrap();

    let mut points = Vec::new();
    for l in [2usize, 4, 6] {
        let b = build_theorem2_detailed(&psi, l).unwrap();
        let nrm = b.psi_tilde.norm();
        c.check(
            format!("l={l}: output norm {nrm:.10} = 1 ± 1e-8"),
            (nrm - 1.0).abs() <= 1e-8,
        );
        let max_bond = *b.psi_tilde.bond_profile().iter().max().unwrap();
        c.check(
            format!("l={l}: bond {max_bond} ≤ d^l = {}", 1usize << l),
            max_bond <= 1usize << l,
        );
        let mut product_ok = true;
        for cut in (l..12).step_by(l) {
            let spec = b.phi_tilde.schmidt_spectrum(cut - 1).unwrap();
            let tail: f64 = spec.coefficients[1..]
                .iter()
                .map(|s| s * s)
                .sum::<f64>()
                .sqrt();
            product_ok &= tail <= 1e-8;
        }
        c.check(format!("l={l}: block-product intermediate (rank-1 cuts)"), product_ok);
        let budget: f64 = b
            .steps
            .iter()
            .map(|s| s.defect * s.defect)
            .sum::<f64>()
            .sqrt();
        c.check(
            format!(
                "l={l}: per-window error {:.2e} ≤ defect budget {:.2e}",
                b.window_errors.max_value,
                budget + 1e-7
            ),
            b.window_errors.max_value <= budget + 1e-7,
        );
        let replay = b
            .circuit
            .apply(&Mps::basis_state(2, &vec![0; 12]).unwrap())
            .unwrap();
        let overlap = Mps::inner(&replay, &b.psi_tilde).unwrap().norm();
        c.check(
            format!("l={l}: circuit replay overlap {overlap:.10} ≥ 1 − 1e-7"),
            overlap >= 1.0 - 1e-7,
        );
        points.push((
            l as f64,
            b.report.measured_local_error.max_value.max(1e-16).ln(),
        ));
    }
    let mean_x: f64 = points.iter().map(|p| p.0).sum::<f64>() / points.len() as f64;
    let mean_y: f64 = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let slope: f64 = points
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum::<f64>()
        / points.iter().map(|p| (p.0 - mean_x).powi(2)).sum::<f64>();
    c.check(format!("log-error slope {slope:.3} < 0"), slope < 0.0);

    let mut rng = StdRng::seed_from_u64(59);
    let locals: Vec<CVec> = (0..12).map(|_| random_pure(&mut rng, 2)).collect();
    let product = Mps::product_state(2, &locals).unwrap();
    let b = build_theorem2_detailed(&product, 4).unwrap();
    c.check(
        format!(
            "product input: window error {:.2e} ≤ 1e-7",
            b.report.measured_local_error.max_value
        ),
        b.report.measured_local_error.max_value <= 1e-7,
    );
    c.finish(300.0);
}

// ---------------------------------------------------------------------------
// 7. Disentangler optimality against a dense oracle
// ---------------------------------------------------------------------------

/// Dense re-derivation of the optimal disentangling overlap: truncate
/// both outer marginals to rank d^(l/2) and take the fidelity with the
/// joint two-region marginal.
fn dense_overlap_oracle(psi: &Mps, start: usize, l: usize) -> f64 {
    let n = psi.n_sites();
    let d = psi.site_dim();
    let amps = psi.normalized().unwrap().to_dense().unwrap();
    let proj = outer(&amps, &amps);
    let dims: Vec<usize> = vec![d; n];
    let keep_l: Vec<usize> = (0..start).collect();
    let keep_r: Vec<usize> = (start + l..n).collect();
    let keep_lr: Vec<usize> = keep_l.iter().chain(keep_r.iter()).copied().collect();
    let rho_l = partial_trace(&proj, &dims, &keep_l).unwrap();
    let rho_r = partial_trace(&proj, &dims, &keep_r).unwrap();
    let rho_lr = partial_trace(&proj, &dims, &keep_lr).unwrap();
    let cap = d.pow((l / 2) as u32);
    let truncate = |rho: &CMat| -> CMat {
        let (vals, vecs) = eigh_psd(rho).unwrap();
        let m = vals.len();
        let take = cap.min(m);
        let total: f64 = (0..take).map(|j| vals[m - 1 - j].max(0.0)).sum();
        let mut out = CMat::zeros((m, m));
        for j in 0..take {
            let col = vecs.column(m - 1 - j).to_owned();
            let w = vals[m - 1 - j].max(0.0) / total;
            out = out + outer(&col, &col).mapv(|z| z * w);
        }
        out
    };
    let product = localmps::numerics::kron(&truncate(&rho_l), &truncate(&rho_r));
    let a = DensityMatrix::new(0, n - l, d, product).unwrap();
    let b = DensityMatrix::new(0, n - l, d, rho_lr).unwrap();
    metrics::fidelity(&a, &b).unwrap()
}

#[test]
fn disentangler_matches_dense_fidelity_oracle() {
    let mut c = Criterion::new("disentangler optimality (100 states)");
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = StdRng::seed_from_u64(1000 + seed);
        let psi = Mps::random(&mut rng, 8, 2, 4)
            .unwrap()
            .normalized()
            .unwrap();
        let start = 1 + (seed as usize % 5);
        let step = uhlmann_unitary(&psi, (start, 2)).unwrap();
        let f = dense_overlap_oracle(&psi, start, 2);
        worst = worst.max((step.overlap - f).abs());
    }
    c.check(
        format!("achieved overlap matches dense fidelity: worst gap {worst:.2e} ≤ 1e-8"),
        worst <= 1e-8,
    );
    c.finish(30.0);
}

// ---------------------------------------------------------------------------
// 8. Combined Hamiltonian spectrum and the partial-chain energy bound
// ---------------------------------------------------------------------------

/// Ancilla-sector weight of a dense eigenvector: probability of the
/// all-zero plus the all-one ancilla pattern (ancilla is the high-order
/// factor of each 2d-dimensional site).
fn uniform_ancilla_weight(v: &ndarray::ArrayView1<C64>, n: usize, d: usize) -> f64 {
    let mut total = 0.0;
    for pattern in [0usize, 1] {
        // Sum |v|² over indices whose every site digit has ancilla bit
        // equal to `pattern`.
        let mut acc = 0.0;
        for (idx, z) in v.iter().enumerate() {
            let mut rest = idx;
            let mut matches = true;
            for _ in 0..n {
                let digit = rest % (2 * d);
                rest /= 2 * d;
                if digit / d != pattern {
                    matches = false;
                    break;
                }
            }
            if matches {
                acc += z.norm_sqr();
            }
        }
        total += acc;
    }
    total
}

#[test]
fn combined_hamiltonian_spectrum_and_window_energy_bound() {
    let mut c = Criterion::new("combined Hamiltonian + window energies");
    let pairs: Vec<(&str, NnHamiltonian, NnHamiltonian)> = vec![
        (
            "Z-family pair",
            build_hz(0.1, 5).unwrap(),
            build_hz(0.3, 5).unwrap(),
        ),
        (
            "Z-family close pair",
            build_hz(0.2, 4).unwrap(),
            build_hz(0.45, 4).unwrap(),
        ),
        (
            "Z-family vs TFIM",
            build_hz(0.25, 5).unwrap(),
            build_tfim_ti(5, 1.0, 2.0).unwrap(),
        ),
    ];
    for (label, h0, h1) in &pairs {
        let n = h0.n_sites;
        let d = h0.site_dim;
        let s0 = ed_ground_state(h0).unwrap();
        let s1 = ed_ground_state(h1).unwrap();
        let kh = combine_k(h0, h1).unwrap();
        let dense = dense_matrix(&kh).unwrap();
        let (vals, vecs) = eigh_psd(&dense).unwrap();
        let e0k = vals[0];
        let expected = s0.ground_energy.min(s1.ground_energy) / 3.0;
        c.check(
            format!("{label}: E₀ᴷ {e0k:.9} = min/3 ± 1e-9"),
            (e0k - expected).abs() <= 1e-9,
        );
        let gap = vals
            .iter()
            .find(|&&v| v > e0k + 1e-10)
            .map(|&v| v - e0k)
            .unwrap_or(0.0);
        let (winner_gap, de) = if s0.ground_energy <= s1.ground_energy {
            (s0.gap, s1.ground_energy - s0.ground_energy)
        } else {
            (s1.gap, s0.ground_energy - s1.ground_energy)
        };
        let gap_bound = winner_gap.min(de).min(1.0) / 3.0;
        c.check(
            format!("{label}: gap {gap:.6} ≥ min(Δ, |ΔE|, 1)/3 = {gap_bound:.6} − 1e-9"),
            gap >= gap_bound - 1e-9,
        );
        let mut sector_ok = true;
        for (idx, &val) in vals.iter().enumerate() {
            if uniform_ancilla_weight(&vecs.column(idx), n, d) < 1.0 - 1e-8 {
                sector_ok &= val >= e0k + 1.0 / 3.0 - 1e-9;
            }
        }
        c.check(
            format!("{label}: mixed-ancilla eigenstates cost ≥ 1/3 extra"),
            sector_ok,
        );
    }

    // Same ground-energy identity where only an iterative solve fits.
    let h0 = build_hz(0.37, 6).unwrap();
    let h1 = build_tfim_ti(6, 1.0, 2.0).unwrap();
    let e00 = ed_ground_state(&h0).unwrap().ground_energy;
    let e01 = ed_ground_state(&h1).unwrap().ground_energy;
    let kh = combine_k(&h0, &h1).unwrap();
    let e0k = ed_ground_state(&kh).unwrap().ground_energy;
    c.check(
        format!("N=6 iterative: E₀ᴷ {e0k:.9} = min/3 ± 1e-9"),
        (e0k - e00.min(e01) / 3.0).abs() <= 1e-9,
    );

    // Any state pays at least the proportional share of the ground
    // energy on any window, up to one unit.
    let mut rng = StdRng::seed_from_u64(61);
    let n = 6usize;
    for h in [build_hz(0.3, n).unwrap(), build_tfim_ti(n, 1.0, 2.0).unwrap()] {
        let spectrum = ed_ground_state(&h).unwrap();
        let e0 = spectrum.ground_energy;
        let mut states: Vec<CVec> = (0..50)
            .map(|_| random_pure(&mut rng, h.dim().unwrap()))
            .collect();
        states.push(Array1::from(spectrum.ground_state.to_vec()));
        let mut window_ok = true;
        for v in &states {
            for a in 0..n {
                for b in a + 2..=n {
                    let w = h.window_energy(v, a, b);
                    let floor = (b - a) as f64 / (n - 1) as f64 * e0 - 1.0;
                    window_ok &= w >= floor - 1e-9;
                }
            }
        }
        c.check("window energy ≥ (b−a)/(N−1)·E₀ − 1 on 51 states", window_ok);
    }
    c.finish(120.0);
}

// ---------------------------------------------------------------------------
// 9. Energy-density estimation end to end
// ---------------------------------------------------------------------------

#[test]
fn energy_density_search_meets_accuracy_and_call_budget() {
    let mut c = Criterion::new("energy-density search");
    let n = 6usize;
    let mut cases: Vec<(String, NnHamiltonian, f64)> = [0.1, 0.37, 0.45]
        .iter()
        .map(|&u| (format!("Z-family u={u}"), build_hz(u, n).unwrap(), u))
        .collect();
    let tfim = build_tfim_ti(n, 1.0, 2.0).unwrap();
    let u_tfim = ed_ground_state(&tfim).unwrap().ground_energy / (n - 1) as f64;
    cases.push(("TFIM".into(), tfim, u_tfim));

    for (label, h, u) in &cases {
        for eps in [1e-2f64, 1e-3] {
            let call_cap = (1.0 / eps).log2().ceil() as usize + 2;
            let mut oracle = EdLocalOracle;
            let (est, trace) = estimate_energy_density(h, eps, &mut oracle).unwrap();
            c.check(
                format!("{label} eps={eps}: |ũ − u| = {:.2e} ≤ eps", (est - u).abs()),
                (est - u).abs() <= eps,
            );
            c.check(
                format!(
                    "{label} eps={eps}: {} calls ≤ ⌈log₂(1/eps)⌉ + 2 = {call_cap}",
                    trace.oracle_calls
                ),
                trace.oracle_calls <= call_cap,
            );

            // Adversarial mode: negate the first near-tie probe (if
            // any); the estimate must stay within eps.
            if let Some(first) = trace
                .iterations
                .iter()
                .position(|it| (it.s - u).abs() <= eps / 2.0)
            {
                let mut flipped = AdversarialFlip::new(EdLocalOracle, first + 1);
                let (est2, _) = estimate_energy_density(h, eps, &mut flipped).unwrap();
                c.check(
                    format!(
                        "{label} eps={eps}: adversarial flip still within eps ({:.2e})",
                        (est2 - u).abs()
                    ),
                    (est2 - u).abs() <= eps,
                );
            }
        }
    }
    c.finish(120.0);
}

// ---------------------------------------------------------------------------
// 10. Markov-violation decay with separation
// ---------------------------------------------------------------------------

#[test]
fn markov_violation_decays_with_separation() {
    let mut c = Criterion::new("Markov-violation decay on TFIM N=14");
    let h = build_tfim(14, 1.0, 2.0).unwrap();
    let psi = ed_ground_state(&h)
        .unwrap()
        .ground_mps(2, 14)
        .unwrap()
        .normalized()
        .unwrap();
    let values: Vec<f64> = [2usize, 4, 6, 8]
        .iter()
        .map(|&s| markov_violation(&psi, (0, 3), (3 + s, 3)).unwrap())
        .collect();
    let mono = values.windows(2).all(|w| w[1] <= 1.1 * w[0]);
    c.check(
        format!(
            "violations {} decrease within 10% per step",
            values
                .iter()
                .map(|v| format!("{v:.3e}"))
                .collect::<Vec<_>>()
                .join(" → ")
        ),
        mono,
    );
    c.finish(120.0);
}
