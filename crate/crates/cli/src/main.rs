use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gsprep_core::costmodel::{
    fit_alpha, fit_erf_fidelity, fit_gamma, optimal_m, resolve_beta, CostParams, ErfFidelityModel, ScalingFits,
};
use gsprep_core::filter::{apply_filter, evaluate_outcome, Rounds};
use gsprep_core::peps::{init_peps, itebd_evolve, EvolutionSchedule};
use gsprep_core::sampler::{extract_trial_state, run_chains, ChainOptions, MoveKind, PepsAmplitudes};
use gsprep_core::{build_hamiltonian, shift_spectrum, structure_factor};
use gsprep_cli::config::{load_model, ModelConfig, PipelineConfig};
use gsprep_cli::io::{read_json, read_peps, read_statevector, write_json, write_peps, write_statevector, Table, TrialFile};
use gsprep_cli::pipeline::{cumulative_weights, exact_reference, StructureFactors};
use gsprep_cli::{emit_histogram, exit, run_pipeline, scan_transition, CliError, CliResult};
use serde::Serialize;

/// Ground-state preparation from a sampled PEPS trial state and a cosine
/// filter, simulated at the statevector level.
#[derive(Parser)]
#[command(name = "gsprep", version, about)]
struct Cli {
    /// Log level (error, warn, info, debug).
    #[arg(long, global = true, default_value = "warn")]
    log: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact ground state, top eigenvalue and gap.
    Ed(EdArgs),
    /// Simple-update imaginary-time evolution of a PEPS.
    Itebd(ItebdArgs),
    /// Metropolis sampling of a PEPS into a trial state.
    Sample(SampleArgs),
    /// Cosine filter on a trial state.
    Fgsp(FgspArgs),
    /// Cost curve and optimal number of trial components.
    ScanM(ScanMArgs),
    /// Scaling fits of fidelity, trial size or overlap tables.
    Fit(FitArgs),
    /// Magnetic structure factors, or a scan over J2/J1.
    StructureFactor(StructureFactorArgs),
    /// Histogram of |amplitude|^2.
    Histogram(HistogramArgs),
    /// Every stage end to end.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct EdArgs {
    /// Model JSON ({rows, cols, j1, j2}) or a pipeline config.
    #[arg(long)]
    config: PathBuf,
    /// Write the ground vector here.
    #[arg(long)]
    vector: Option<PathBuf>,
    /// Write the JSON summary here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ItebdArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 6)]
    bond_dim: usize,
    /// Stages as tau:steps pairs, taus strictly decreasing.
    #[arg(long, default_value = "0.1:300,0.01:300,0.001:300,0.0001:300,0.00001:300")]
    schedule: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// PEPS checkpoint to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MoveArg {
    Flip,
    Exchange,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    peps: PathBuf,
    /// Recorded sweeps per chain; size-dependent when absent.
    #[arg(long)]
    sweeps: Option<usize>,
    /// Discarded sweeps; a tenth of the recorded sweeps when absent.
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long, default_value_t = 4)]
    chains: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Components kept in the trial state.
    #[arg(long)]
    top_m: usize,
    #[arg(long = "move", value_enum, default_value = "flip")]
    move_kind: MoveArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FgspArgs {
    #[arg(long)]
    trial: PathBuf,
    #[arg(long)]
    config: PathBuf,
    /// Filter degree (even).
    #[arg(long, default_value_t = 100)]
    m: usize,
    /// Truncation radius; the full sum when absent.
    #[arg(long)]
    m0: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    chi: f64,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Shift by the exact ground energy.
    #[arg(long)]
    exact_shift: bool,
    /// PEPS checkpoint whose energy sets the shift (without --exact-shift).
    #[arg(long)]
    peps: Option<PathBuf>,
    /// Per-site energy estimate for the shift (without --exact-shift).
    #[arg(long)]
    e0: Option<f64>,
    /// Amplification rounds: auto or a count.
    #[arg(long, default_value = "auto")]
    rounds: Rounds,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the filtered state here.
    #[arg(long)]
    psi0: Option<PathBuf>,
}

#[derive(Args)]
struct ScanMArgs {
    /// CSV with columns M, f1.
    #[arg(long)]
    input: PathBuf,
    /// Number of sites.
    #[arg(long)]
    sites: usize,
    #[arg(long, default_value_t = 6)]
    bond_dim: usize,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    gap: f64,
    #[arg(long, default_value_t = 1.0)]
    classical_weight: f64,
    /// Largest M scanned; the table's largest M when absent.
    #[arg(long)]
    m_max: Option<usize>,
    /// Cost curve CSV to write.
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitKind {
    /// Columns M, f1 and optionally L.
    Erf,
    /// Columns L, M.
    Gamma,
    /// Columns L, f2.
    Alpha,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_enum)]
    kind: FitKind,
    #[arg(long)]
    input: PathBuf,
    /// beta for the gamma fit's speedup verdict.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StructureFactorArgs {
    /// Model JSON, or a pipeline config when scanning.
    #[arg(long)]
    config: PathBuf,
    /// State to measure; the exact ground state when absent.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Comma-separated J2/J1 ratios to run the pipeline at.
    #[arg(long, value_delimiter = ',')]
    scan: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HistogramArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    state: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-5)]
    width: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the heaviest-M cumulative weight curve.
    #[arg(long)]
    cumulative: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> CliResult<()> {
    match out {
        Some(p) => write_json(p, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn parse_schedule(s: &str) -> CliResult<EvolutionSchedule> {
    let stages = s
        .split(',')
        .map(|part| {
            let (tau, steps) = part
                .split_once(':')
                .ok_or_else(|| CliError::config(format!("schedule stage {part:?} is not tau:steps")))?;
            let tau = tau.trim().parse().map_err(|_| CliError::config(format!("bad tau {tau:?}")))?;
            let steps = steps.trim().parse().map_err(|_| CliError::config(format!("bad steps {steps:?}")))?;
            Ok((tau, steps))
        })
        .collect::<CliResult<Vec<_>>>()?;
    EvolutionSchedule::new(stages).map_err(|e| CliError::config(e.to_string()))
}

fn ed(a: EdArgs) -> CliResult<()> {
    let spec = load_model(&a.config)?.spec()?;
    let ed = exact_reference(&build_hamiltonian(&spec)?)?;
    if let Some(p) = &a.vector {
        write_statevector(p, &ed.ground_vector)?;
    }
    emit(a.out.as_deref(), &ed.summary())
}

#[derive(Serialize)]
struct ItebdReport {
    e0: f64,
    stage_energies: Vec<f64>,
    regularizations: usize,
    monotone: bool,
}

fn itebd(a: ItebdArgs) -> CliResult<()> {
    let spec = load_model(&a.config)?.spec()?;
    let schedule = parse_schedule(&a.schedule)?;
    let mut peps = init_peps(&spec.geometry, a.bond_dim, a.seed)?;
    let r = itebd_evolve(&mut peps, &spec, &schedule)?;
    write_peps(&a.out, &peps)?;
    emit(
        None,
        &ItebdReport {
            e0: r.e0,
            monotone: r.is_monotone(1e-6),
            stage_energies: r.stage_energies,
            regularizations: r.regularizations,
        },
    )
}

fn sample(a: SampleArgs) -> CliResult<()> {
    let peps = read_peps(&a.peps)?;
    let wf = PepsAmplitudes::new(&peps);
    let l = peps.num_sites();
    let mut opts = ChainOptions::new(a.sweeps.unwrap_or_else(|| gsprep_core::sampler::default_sweeps(l)), a.seed);
    if let Some(b) = a.burn_in {
        opts.burn_in = b;
    }
    opts.move_kind = match a.move_kind {
        MoveArg::Flip => MoveKind::Flip,
        MoveArg::Exchange => MoveKind::Exchange,
    };
    let run = run_chains(&wf, &opts, a.chains)?;
    let trial = extract_trial_state(&run.records, &wf, a.top_m)?;
    write_json(&a.out, &TrialFile::new(&trial, opts.sweeps, run.acceptance_rate()))
}

fn fgsp(a: FgspArgs) -> CliResult<()> {
    let model = load_model(&a.config)?;
    let spec = model.spec()?;
    let h = build_hamiltonian(&spec)?;
    let ed = exact_reference(&h)?;
    let trial = read_json::<TrialFile>(&a.trial)?.to_trial()?;
    let lower = if a.exact_shift {
        ed.lambda0
    } else if let Some(p) = &a.peps {
        read_peps(p)?.energy_per_site(&h)? * spec.num_sites() as f64
    } else if let Some(e0) = a.e0 {
        e0 * spec.num_sites() as f64
    } else {
        return Err(CliError::config("fgsp needs --exact-shift, --peps or --e0"));
    };
    let hs = shift_spectrum(&h, lower, ed.lambda_max)?;
    let mut params = gsprep_core::filter::FilterParams::new(a.m)?;
    params.chi = a.chi;
    params.eps = a.eps;
    params.rounds = a.rounds;
    if let Some(m0) = a.m0 {
        params.m0 = m0;
    }
    let outcome = evaluate_outcome(apply_filter(&trial, &hs, &params)?, &h, &ed)?;
    if let Some(p) = &a.psi0 {
        write_statevector(p, &outcome.psi0)?;
    }
    emit(a.out.as_deref(), &outcome)
}

#[derive(Serialize)]
struct ScanReport {
    m_opt: usize,
    cost: f64,
    model: ErfFidelityModel,
    fit_rms: f64,
    stationarity: Vec<gsprep_core::costmodel::Stationarity>,
}

fn scan_m(a: ScanMArgs) -> CliResult<()> {
    let pts = Table::read(&a.input)?.pairs("M", "f1")?;
    let (model, fit) = fit_erf_fidelity(&pts)?;
    let mut params = CostParams::new(a.bond_dim, a.lambda, a.gap);
    params.classical_weight = a.classical_weight;
    let m_max = a.m_max.unwrap_or_else(|| pts.iter().map(|p| p.0 as usize).max().unwrap_or(1));
    let scan = optimal_m(a.sites, &model, &params, m_max)?;
    if let Some(p) = &a.curve {
        let mut t = Table::new(["M", "f1_model", "classical", "preparation", "filter", "total"]);
        for c in &scan.curve {
            t.rows.push(vec![c.m as f64, c.f1, c.classical, c.preparation, c.filter, c.total()]);
        }
        t.write(p)?;
    }
    emit(
        a.out.as_deref(),
        &ScanReport {
            m_opt: scan.m_opt,
            cost: scan.cost(),
            model,
            fit_rms: fit.rms,
            stationarity: scan.stationarity,
        },
    )
}

#[derive(Serialize)]
struct ErfFitReport {
    sizes: Vec<(usize, ErfFidelityModel, f64)>,
    beta: Option<gsprep_core::costmodel::BetaResolution>,
}

fn fit(a: FitArgs) -> CliResult<()> {
    let table = Table::read(&a.input)?;
    match a.kind {
        FitKind::Erf => {
            let mut groups: std::collections::BTreeMap<usize, Vec<(f64, f64)>> = Default::default();
            let lcol = table.column("L");
            let (mi, fi) = match (table.column("M"), table.column("f1")) {
                (Some(m), Some(f)) => (m, f),
                _ => return Err(CliError::config("erf fit needs columns M and f1")),
            };
            for r in &table.rows {
                let l = lcol.map_or(0, |i| r[i] as usize);
                groups.entry(l).or_default().push((r[mi], r[fi]));
            }
            let mut sizes = Vec::new();
            for (l, pts) in groups {
                let (m, rep) = fit_erf_fidelity(&pts)?;
                sizes.push((l, m, rep.rms));
            }
            let beta = if sizes.len() >= 2 {
                let fits: Vec<_> = sizes.iter().map(|s| (s.0, s.1)).collect();
                Some(resolve_beta(&fits)?)
            } else {
                None
            };
            emit(a.out.as_deref(), &ErfFitReport { sizes, beta })
        }
        FitKind::Gamma => {
            let g = fit_gamma(&table.pairs("L", "M")?)?;
            match a.beta {
                Some(beta) => emit(a.out.as_deref(), &ScalingFits::new(g, None, beta)),
                None => emit(a.out.as_deref(), &g),
            }
        }
        FitKind::Alpha => emit(a.out.as_deref(), &fit_alpha(&table.pairs("L", "f2")?)?),
    }
}

fn structure(a: StructureFactorArgs) -> CliResult<()> {
    if let Some(ratios) = &a.scan {
        let cfg = PipelineConfig::load(&a.config)?;
        let scan = scan_transition(&cfg, ratios)?;
        let out = a.out.unwrap_or_else(|| cfg.output_dir.join("transition.csv"));
        scan.table().write(&out)?;
        #[derive(Serialize)]
        struct Crossings {
            ed_crossing: Option<f64>,
            pipeline_crossing: Option<f64>,
        }
        return emit(
            None,
            &Crossings {
                ed_crossing: scan.ed_crossing,
                pipeline_crossing: scan.pipeline_crossing,
            },
        );
    }
    let model: ModelConfig = load_model(&a.config)?;
    let spec = model.spec()?;
    let state = match &a.state {
        Some(p) => read_statevector(p)?,
        None => exact_reference(&build_hamiltonian(&spec)?)?.ground_vector,
    };
    let sf = StructureFactors {
        pi_pi: structure_factor(&state, &spec.geometry, (std::f64::consts::PI, std::f64::consts::PI))?,
        pi_0: structure_factor(&state, &spec.geometry, (std::f64::consts::PI, 0.0))?,
    };
    emit(a.out.as_deref(), &sf)
}

fn histogram(a: HistogramArgs) -> CliResult<()> {
    let spec = load_model(&a.config)?.spec()?;
    let state = match &a.state {
        Some(p) => read_statevector(p)?,
        None => exact_reference(&build_hamiltonian(&spec)?)?.ground_vector,
    };
    emit_histogram(&state, a.width)?.write(&a.out)?;
    if let Some(p) = &a.cumulative {
        let mut t = Table::new(["M", "weight"]);
        t.rows = cumulative_weights(&state)
            .into_iter()
            .enumerate()
            .map(|(i, w)| vec![(i + 1) as f64, w])
            .collect();
        t.write(p)?;
    }
    Ok(())
}

fn pipeline(a: PipelineArgs) -> CliResult<()> {
    let mut cfg = PipelineConfig::load(&a.config)?;
    if let Some(d) = a.out_dir {
        cfg.output_dir = d;
    }
    let report = run_pipeline(&cfg)?;
    emit(None, &report)
}

fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("GSPREP_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::config(format!("GSPREP_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Ed(a) => ed(a),
        Command::Itebd(a) => itebd(a),
        Command::Sample(a) => sample(a),
        Command::Fgsp(a) => fgsp(a),
        Command::ScanM(a) => scan_m(a),
        Command::Fit(a) => fit(a),
        Command::StructureFactor(a) => structure(a),
        Command::Histogram(a) => histogram(a),
        Command::Pipeline(a) => pipeline(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).init();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::SUCCESS as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
