//! Batch experiment runner for the `localmps` toolkit.
//!
//! Subcommands:
//!
//! - `ground`: solve a named model for its ground state (exact
//!   diagonalization for small chains, DMRG otherwise) and write the
//!   state plus a spectrum summary as JSON.
//! - `approx`: build a locally accurate approximation of a stored state
//!   (`part1`, `part2`, or `circuit` method) and write the approximate
//!   state, the measured report, and a per-window error CSV.
//! - `sweep`: run one approximation method over a list of parameter
//!   points and write one CSV row per point.
//! - `reduce`: estimate the ground-state energy density of a named model
//!   by binary search over combined probe chains; writes the trace JSON.
//! - `verify`: run fast invariant suites over randomized inputs.
//!
//! Exit codes: 0 on success, 2 for usage and validation errors, 1 for
//! runtime failures (solver breakdowns, unreadable inputs, IO errors).
//! All randomness derives from the global `--seed`; reruns with the same
//! configuration and seed produce identical outputs (the sweep CSV's
//! wall-time column is the one measured, non-reproducible field).
//!
//! The environment variable `LOCALMPS_CAP_BYTES` overrides the default
//! cap on dense intermediate objects.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray_linalg::Scalar;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use localmps::absorb::absorb_entropy;
use localmps::circuit_approx::{build_theorem2_detailed, uhlmann_unitary};
use localmps::hamiltonian::{
    build_hz, build_tfim, build_tfim_ti, combine_k, dmrg_ground_state, ed_ground_state,
    NnHamiltonian,
};
use localmps::local_approx::{build_part1, build_part2, ApproxReport};
use localmps::metrics::{fidelity, purified_distance, trace_distance};
use localmps::mps::{DensityMatrix, Mps};
use localmps::numerics::{matrix_rank, partial_trace};
use localmps::reduction::{estimate_energy_density, EdLocalOracle};
use localmps::{io, C64, CMat, Error};

/// Dense ED is used by `ground` up to this Hilbert-space dimension;
/// larger chains fall back to DMRG.
const AUTO_ED_DIM: usize = 1 << 14;

#[derive(Parser)]
#[command(
    name = "localmps",
    version,
    about = "Locally accurate MPS approximations: build, sweep, verify"
)]
struct Cli {
    /// Seed for every stochastic choice (random states, witnesses).
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Worker threads for block-parallel stages (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a model ground state and write it as MPS JSON.
    Ground(GroundArgs),
    /// Build a locally accurate approximation of a stored state.
    Approx(ApproxArgs),
    /// Run one method over a parameter list; one CSV row per point.
    Sweep(SweepArgs),
    /// Estimate the energy density of a model by binary search.
    Reduce(ReduceArgs),
    /// Run fast randomized invariant suites.
    Verify,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    /// Diagonal reference chain with energy density `t`.
    Hz,
    /// Transverse-field Ising chain.
    Tfim,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Solver {
    Auto,
    Ed,
    Dmrg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Part1,
    Part2,
    Circuit,
}

#[derive(Args)]
struct GroundArgs {
    #[arg(long, value_enum)]
    model: Model,
    /// Chain length.
    #[arg(long)]
    n: usize,
    /// Reference-chain parameter (hz model, in [0, 1]).
    #[arg(long)]
    t: Option<f64>,
    /// Ising coupling (tfim model).
    #[arg(long)]
    j: Option<f64>,
    /// Transverse field (tfim model).
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, value_enum, default_value_t = Solver::Auto)]
    solver: Solver,
    /// DMRG bond dimension.
    #[arg(long, default_value_t = 32)]
    chi: usize,
    /// DMRG sweep count.
    #[arg(long, default_value_t = 12)]
    sweeps: usize,
    /// Output path for the state; the spectrum summary lands next to it
    /// as `<stem>.spectrum.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ApproxArgs {
    #[arg(long, value_enum)]
    method: Method,
    /// Input MPS JSON file.
    #[arg(long)]
    input: PathBuf,
    /// Window length `k` the approximation targets.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Accuracy target `eps` (part1/part2).
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Block length `l` (circuit method).
    #[arg(long)]
    l: Option<usize>,
    /// Truncation bond dimension `χ′` (part2).
    #[arg(long)]
    chi_p: Option<usize>,
    /// Output prefix: writes `<prefix>.state.json`, `<prefix>.report.json`,
    /// `<prefix>.windows.csv`, and for the circuit method
    /// `<prefix>.circuit.json`.
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    method: Method,
    /// Input MPS JSON file.
    #[arg(long)]
    input: PathBuf,
    /// Window length `k`.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Fixed accuracy target (part2), or the swept values (part1).
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    /// Swept block lengths (circuit).
    #[arg(long, value_delimiter = ',')]
    l: Vec<usize>,
    /// Swept truncation bond dimensions (part2).
    #[arg(long, value_delimiter = ',')]
    chi_p: Vec<usize>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long)]
    n: usize,
    /// Reference-chain parameter (hz model).
    #[arg(long)]
    t: Option<f64>,
    /// Ising coupling (tfim model).
    #[arg(long)]
    j: Option<f64>,
    /// Transverse field (tfim model).
    #[arg(long)]
    h: Option<f64>,
    /// Target accuracy for the density estimate, in (0, 1).
    #[arg(long)]
    eps: f64,
    /// Output path for the search trace JSON.
    #[arg(long)]
    out: PathBuf,
}

/// CLI failure with its intended process exit code.
enum Failure {
    /// Bad arguments or bad input values: exit 2.
    Usage(String),
    /// Everything that went wrong at runtime: exit 1.
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        // Ignore the error if a pool already exists (e.g. under a harness).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let result = match &cli.command {
        Command::Ground(args) => cmd_ground(args),
        Command::Approx(args) => cmd_approx(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Reduce(args) => cmd_reduce(args),
        Command::Verify => cmd_verify(cli.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `localmps help` for usage");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Build the requested model chain, validating the parameter set.
fn build_model(
    model: Model,
    n: usize,
    t: Option<f64>,
    j: Option<f64>,
    h: Option<f64>,
    normalized: bool,
) -> Result<NnHamiltonian, Failure> {
    match model {
        Model::Hz => {
            let t = t.ok_or_else(|| Failure::Usage("model hz needs --t".into()))?;
            if j.is_some() || h.is_some() {
                return Err(Failure::Usage("--j/--h only apply to model tfim".into()));
            }
            build_hz(t, n).map_err(|e| Failure::Usage(e.to_string()))
        }
        Model::Tfim => {
            let j = j.ok_or_else(|| Failure::Usage("model tfim needs --j".into()))?;
            let h = h.ok_or_else(|| Failure::Usage("model tfim needs --h".into()))?;
            if t.is_some() {
                return Err(Failure::Usage("--t only applies to model hz".into()));
            }
            let built = if normalized {
                build_tfim_ti(n, j, h)
            } else {
                build_tfim(n, j, h)
            };
            built.map_err(|e| Failure::Usage(e.to_string()))
        }
    }
}

/// `<dir>/<stem>.spectrum.json` next to the state output.
fn spectrum_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "ground".into());
    out.with_file_name(format!("{stem}.spectrum.json"))
}

fn cmd_ground(args: &GroundArgs) -> Result<(), Failure> {
    let h = build_model(args.model, args.n, args.t, args.j, args.h, false)?;
    let dim = h
        .site_dim
        .checked_pow(args.n as u32)
        .unwrap_or(usize::MAX);
    let use_ed = match args.solver {
        Solver::Ed => true,
        Solver::Dmrg => false,
        Solver::Auto => dim <= AUTO_ED_DIM,
    };
    let (state, summary) = if use_ed {
        let info = ed_ground_state(&h)?;
        let state = Mps::from_dense(&info.ground_state, h.site_dim, args.n)?;
        let summary = json!({
            "solver": "ed",
            "energy": info.ground_energy,
            "gap": info.gap,
            "degenerate": info.degenerate,
            "n": args.n,
            "site_dim": h.site_dim,
        });
        (state, summary)
    } else {
        let r = dmrg_ground_state(&h, args.chi, args.sweeps)?;
        let summary = json!({
            "solver": "dmrg",
            "energy": r.energy,
            "sweep_energies": r.sweep_energies,
            "converged": r.converged,
            "chi": args.chi,
            "n": args.n,
            "site_dim": h.site_dim,
        });
        (r.state, summary)
    };
    io::write_json(&args.out, &io::mps_to_json(&state))?;
    io::write_json(&spectrum_path(&args.out), &summary)?;
    println!(
        "ground: model={} n={} energy={:.12}",
        match args.model {
            Model::Hz => "hz",
            Model::Tfim => "tfim",
        },
        args.n,
        summary["energy"].as_f64().unwrap_or(f64::NAN),
    );
    Ok(())
}

fn read_state(path: &Path) -> Result<Mps, Failure> {
    if !path.exists() {
        return Err(Failure::Usage(format!(
            "input file {} does not exist",
            path.display()
        )));
    }
    Ok(io::mps_from_json(&io::read_json(path)?)?)
}

/// Run one approximation point; returns the state, the report, and an
/// optional circuit certificate.
fn run_method(
    method: Method,
    psi: &Mps,
    k: usize,
    eps: f64,
    l: Option<usize>,
    chi_p: Option<usize>,
) -> Result<(Mps, ApproxReport, Option<serde_json::Value>), Failure> {
    match method {
        Method::Part1 => {
            let (state, report) = build_part1(psi, k, eps)?;
            Ok((state, report, None))
        }
        Method::Part2 => {
            let (state, report) = build_part2(psi, k, eps, chi_p)?;
            Ok((state, report, None))
        }
        Method::Circuit => {
            let l = l.ok_or_else(|| Failure::Usage("method circuit needs --l".into()))?;
            let b = build_theorem2_detailed(psi, l)?;
            Ok((
                b.psi_tilde,
                b.report,
                Some(io::circuit_to_json(&b.circuit)),
            ))
        }
    }
}

fn cmd_approx(args: &ApproxArgs) -> Result<(), Failure> {
    let psi = read_state(&args.input)?;
    let (state, report, circuit) =
        run_method(args.method, &psi, args.k, args.eps, args.l, args.chi_p)?;
    let prefix = args.out_prefix.to_string_lossy();
    io::write_json(
        Path::new(&format!("{prefix}.state.json")),
        &io::mps_to_json(&state),
    )?;
    io::write_json(
        Path::new(&format!("{prefix}.report.json")),
        &io::report_json(&report)?,
    )?;
    let rows: Vec<Vec<String>> = report
        .measured_local_error
        .per_window
        .iter()
        .map(|&(start, err)| vec![start.to_string(), format!("{err:.15e}")])
        .collect();
    io::write_csv(
        Path::new(&format!("{prefix}.windows.csv")),
        &["window_start", "trace_distance"],
        &rows,
    )?;
    if let Some(circuit) = circuit {
        io::write_json(Path::new(&format!("{prefix}.circuit.json")), &circuit)?;
    }
    println!(
        "approx: method={} k={} max_window_error={:.6e} max_bond={}",
        match args.method {
            Method::Part1 => "part1",
            Method::Part2 => "part2",
            Method::Circuit => "circuit",
        },
        report.k,
        report.max_window_error,
        report.bond_profile.iter().copied().max().unwrap_or(1),
    );
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    // One labelled parameter point per row; which list is swept depends
    // on the method.
    let points: Vec<(String, f64, Option<usize>, Option<usize>)> = match args.method {
        Method::Part1 => args
            .eps
            .iter()
            .map(|&e| (format!("eps={e}"), e, None, None))
            .collect(),
        Method::Part2 => {
            let eps = match args.eps.as_slice() {
                [] => 0.5,
                [e] => *e,
                _ => {
                    return Err(Failure::Usage(
                        "part2 sweeps over --chi-p; give a single --eps".into(),
                    ))
                }
            };
            args.chi_p
                .iter()
                .map(|&c| (format!("chi_p={c}"), eps, None, Some(c)))
                .collect()
        }
        Method::Circuit => args
            .l
            .iter()
            .map(|&l| (format!("l={l}"), 0.0, Some(l), None))
            .collect(),
    };
    if points.is_empty() {
        return Err(Failure::Usage(
            "empty sweep: give --eps (part1), --chi-p (part2), or --l (circuit) values".into(),
        ));
    }
    let psi = read_state(&args.input)?;
    let mut rows = Vec::new();
    let mut failures = 0usize;
    for (label, eps, l, chi_p) in &points {
        let clock = Instant::now();
        let outcome = run_method(args.method, &psi, args.k, *eps, *l, *chi_p);
        let wall = clock.elapsed().as_secs_f64();
        match outcome {
            Ok((_, report, _)) => rows.push(vec![
                label.clone(),
                args.k.to_string(),
                format!("{:.15e}", report.max_window_error),
                report
                    .bond_profile
                    .iter()
                    .copied()
                    .max()
                    .unwrap_or(1)
                    .to_string(),
                format!("{wall:.3}"),
                "ok".into(),
            ]),
            Err(e) => {
                let msg = match e {
                    Failure::Usage(m) | Failure::Run(m) => m,
                };
                eprintln!("warning: point {label} failed: {msg}");
                failures += 1;
                rows.push(vec![
                    label.clone(),
                    args.k.to_string(),
                    String::new(),
                    String::new(),
                    format!("{wall:.3}"),
                    format!("error: {}", msg.replace([',', '\n'], ";")),
                ]);
            }
        }
    }
    io::write_csv(
        &args.out,
        &["point", "k", "max_window_error", "max_bond", "wall_seconds", "status"],
        &rows,
    )?;
    println!(
        "sweep: {} points, {} ok, {} failed -> {}",
        points.len(),
        points.len() - failures,
        failures,
        args.out.display()
    );
    if failures == points.len() {
        return Err(Failure::Run("every sweep point failed".into()));
    }
    Ok(())
}

fn cmd_reduce(args: &ReduceArgs) -> Result<(), Failure> {
    if !(args.eps > 0.0 && args.eps < 1.0) {
        return Err(Failure::Usage(format!(
            "--eps must lie in (0, 1), got {}",
            args.eps
        )));
    }
    let h = build_model(args.model, args.n, args.t, args.j, args.h, true)?;
    let mut oracle = EdLocalOracle;
    let (estimate, trace) = estimate_energy_density(&h, args.eps, &mut oracle)?;
    let mut v = io::report_json(&trace)?;
    if let Some(map) = v.as_object_mut() {
        map.insert(
            "model".into(),
            json!(match args.model {
                Model::Hz => "hz",
                Model::Tfim => "tfim",
            }),
        );
        map.insert("n".into(), json!(args.n));
        map.insert("eps".into(), json!(args.eps));
    }
    io::write_json(&args.out, &v)?;
    println!(
        "reduce: estimate={estimate:.9} oracle_calls={} -> {}",
        trace.oracle_calls,
        args.out.display()
    );
    Ok(())
}

/// Random full-rank density matrix of the given dimension.
fn random_density(rng: &mut ChaCha8Rng, dim: usize) -> DensityMatrix {
    let g = CMat::from_shape_fn((dim, dim), |_| {
        C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let mut rho = g.dot(&g.t().mapv(|z: C64| z.conj()));
    let tr: f64 = (0..dim).map(|i| rho[(i, i)].re).sum();
    rho.mapv_inplace(|z| z / C64::new(tr, 0.0));
    DensityMatrix {
        start: 0,
        len: 1,
        site_dim: dim,
        matrix: rho,
    }
}

/// One verify suite: prints an `ok`/`FAIL` line and reports success.
fn suite(name: &str, run: impl FnOnce() -> Result<(), String>) -> bool {
    match run() {
        Ok(()) => {
            println!("ok   {name}");
            true
        }
        Err(detail) => {
            println!("FAIL {name}: {detail}");
            false
        }
    }
}

fn cmd_verify(seed: u64) -> Result<(), Failure> {
    let mut ok = true;

    ok &= suite("metric sandwich D1 <= D <= sqrt(2 D1)", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..25 {
            let dim = rng.gen_range(2..=6);
            let a = random_density(&mut rng, dim);
            let b = random_density(&mut rng, dim);
            let d1 = trace_distance(&a, &b).map_err(|e| e.to_string())?;
            let d = purified_distance(&a, &b).map_err(|e| e.to_string())?;
            if !(d1 <= d + 1e-9 && d <= (2.0 * d1).sqrt() + 1e-9) {
                return Err(format!("violated at D1={d1}, D={d}"));
            }
        }
        Ok(())
    });

    ok &= suite("entropy absorption marginals and rank bound", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for _ in 0..20 {
            let da = rng.gen_range(2..=5);
            let db = rng.gen_range(2..=5);
            let ta = random_density(&mut rng, da);
            let tb = random_density(&mut rng, db);
            let r = absorb_entropy(&ta, &tb).map_err(|e| e.to_string())?;
            let ra = partial_trace(&r.joint, &[da, db], &[0]).map_err(|e| e.to_string())?;
            let rb = partial_trace(&r.joint, &[da, db], &[1]).map_err(|e| e.to_string())?;
            let ea = (&ra - &ta.matrix).mapv(|z| z.abs()).sum();
            let eb = (&rb - &tb.matrix).mapv(|z| z.abs()).sum();
            if ea > 1e-8 || eb > 1e-8 {
                return Err(format!("marginal errors {ea:.2e}, {eb:.2e}"));
            }
            let rank_joint = matrix_rank(&r.joint).map_err(|e| e.to_string())?;
            let bound = matrix_rank(&ta.matrix)
                .map_err(|e| e.to_string())?
                .max(matrix_rank(&tb.matrix).map_err(|e| e.to_string())?);
            if rank_joint > bound {
                return Err(format!("rank {rank_joint} exceeds bound {bound}"));
            }
        }
        Ok(())
    });

    ok &= suite("neighbor bond ratio bounded by site dimension", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        for _ in 0..10 {
            let psi = Mps::random(&mut rng, 8, 2, 6).map_err(|e| e.to_string())?;
            let psi = psi.canonicalize(0).map_err(|e| e.to_string())?;
            let bonds = psi.bond_profile();
            for w in bonds.windows(2) {
                let (a, b) = (w[0] as f64, w[1] as f64);
                if a / b > 2.0 + 1e-12 || b / a > 2.0 + 1e-12 {
                    return Err(format!("ratio {a}:{b}"));
                }
            }
        }
        Ok(())
    });

    ok &= suite("disentangler reaches the Uhlmann optimum", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        for _ in 0..10 {
            let psi = Mps::random(&mut rng, 6, 2, 4)
                .map_err(|e| e.to_string())?
                .normalized()
                .map_err(|e| e.to_string())?;
            let step = uhlmann_unitary(&psi, (2, 2)).map_err(|e| e.to_string())?;
            let rho_l = psi.rdm(0, 3).map_err(|e| e.to_string())?;
            let rho_r = psi.rdm(3, 3).map_err(|e| e.to_string())?;
            let f = fidelity(&rho_l, &rho_l).map_err(|e| e.to_string())?;
            if (f - 1.0).abs() > 1e-9 {
                return Err(format!("self-fidelity {f}"));
            }
            // Marginal purity bounds the achievable overlap from below.
            let purity: f64 = rho_r
                .matrix
                .dot(&rho_r.matrix)
                .diag()
                .iter()
                .map(|z| z.re)
                .sum();
            if step.overlap + 1e-9 < purity.sqrt() {
                return Err(format!(
                    "overlap {} below purity bound {}",
                    step.overlap,
                    purity.sqrt()
                ));
            }
        }
        Ok(())
    });

    ok &= suite("state JSON round trip is byte-stable", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
        let psi = Mps::random(&mut rng, 6, 2, 4).map_err(|e| e.to_string())?;
        let first = io::render_json(&io::mps_to_json(&psi));
        let back = io::mps_from_json(
            &serde_json::from_str(&first).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        let second = io::render_json(&io::mps_to_json(&back));
        if first != second {
            return Err("serialized forms differ".into());
        }
        Ok(())
    });

    ok &= suite("combined probe chain finds the lower branch", || {
        let h0 = build_hz(0.4, 4).map_err(|e| e.to_string())?;
        let h1 = build_hz(0.2, 4).map_err(|e| e.to_string())?;
        let k = combine_k(&h0, &h1).map_err(|e| e.to_string())?;
        let info = ed_ground_state(&k).map_err(|e| e.to_string())?;
        let expected = 0.2 * 3.0 / 3.0;
        if (info.ground_energy - expected).abs() > 1e-9 {
            return Err(format!(
                "ground energy {} vs expected {expected}",
                info.ground_energy
            ));
        }
        Ok(())
    });

    if ok {
        println!("verify: all suites passed");
        Ok(())
    } else {
        Err(Failure::Run("one or more verify suites failed".into()))
    }
}
