//! `gsp` command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 configuration error, 4 I/O error,
//! 5 malformed input file, 6 invalid parameter or numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gsp::ansatz::{build_feedforward_variant_with, build_gsp_circuit_with, Circuit, ParamSet, RpKind};
use gsp::qcore::uhlmann_fidelity;
use gsp::rng;
use gsp::runner::{load_records, report, run_grid, write_atomic, ExperimentConfig};
use gsp::sim::{execute_reduced, profile_by_name, sample_local, Basis, NoiseProfile, Register};
use gsp::thermo::{exact_gibbs, partition_function, GibbsTarget, TfimParams};
use gsp::transpile::{gate_counts, lower, verify_equivalence, NativeGateSet};
use gsp::verify::{
    beta_sweep, default_sweep_grid, parity_even_fraction, reconstruct, tomography_collect, TomographyData,
};
use gsp::vqa::{train, CostMode, Selection, ShotsPlan, SpsaConfig, TrainConfig};
use gsp::{Error, Result};

#[derive(Parser)]
#[command(name = "gsp", version, about = "Variational Gibbs-state preparation for the transverse-field Ising model")]
struct Cli {
    /// Experiment config (TOML) for `run`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Device noise profile: noiseless, aria1, forte1, forte-ent1.
    #[arg(long, global = true, default_value = "noiseless")]
    profile: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Model {
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    h: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
}

impl Model {
    fn target(&self) -> Result<GibbsTarget> {
        GibbsTarget::new(TfimParams::new(self.n, self.h)?, self.beta)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Shots,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectArg {
    Cost,
    Fidelity,
}

#[derive(Subcommand)]
enum Command {
    /// Print the spectrum, partition function and Gibbs diagonal.
    ExactGibbs {
        #[command(flatten)]
        model: Model,
    },
    /// Train the ansatz; writes params.json and trace.csv to --out when given.
    Train {
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Shots)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = SelectArg::Cost)]
        select: SelectArg,
        #[arg(long, default_value_t = 1)]
        ancilla_layers: usize,
        #[arg(long, default_value_t = 1)]
        system_layers: usize,
        #[arg(long, default_value = "xy-yx")]
        rp: RpKind,
    },
    /// Build the circuit for trained parameters, execute it and sample counts.
    Prepare {
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value = "xy-yx")]
        rp: RpKind,
        /// Use mid-circuit measurement with classically controlled X.
        #[arg(long)]
        feedforward: bool,
        #[arg(long, default_value_t = 8192)]
        shots: u64,
    },
    /// Local-Pauli tomography of the prepared system state.
    Tomo {
        #[arg(long)]
        params: PathBuf,
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value = "xy-yx")]
        rp: RpKind,
        #[arg(long, default_value_t = 1024)]
        shots: u64,
    },
    /// Fidelity against Gibbs states over a β grid.
    BetaSweep {
        #[command(flatten)]
        model: Model,
        /// Trained parameters to prepare and tomograph.
        #[arg(long, conflicts_with = "tomo_dir")]
        params: Option<PathBuf>,
        /// Directory of existing tomo_<setting>.txt files.
        #[arg(long)]
        tomo_dir: Option<PathBuf>,
        #[arg(long, default_value = "xy-yx")]
        rp: RpKind,
        #[arg(long, default_value_t = 1024)]
        shots: u64,
    },
    /// Lower a circuit to native gates and print category counts.
    GateCount {
        /// Circuit text file.
        #[arg(long, conflicts_with = "params")]
        circuit: Option<PathBuf>,
        /// Trained parameters (GSP circuit is built from them).
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value = "xy-yx")]
        rp: RpKind,
        /// ms or zz; defaults to the profile's entangler.
        #[arg(long)]
        gate_set: Option<NativeGateSet>,
    },
    /// Run the full experiment grid from --config.
    Run,
    /// Regenerate results.csv, sweeps and delta_beta.csv from records in --out.
    Report,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 3,
        Error::Io(_) => 4,
        Error::Parse { .. } | Error::Json(_) => 5,
        _ => 6,
    }
}

fn read_params(path: &Path) -> Result<ParamSet> {
    let p: ParamSet = serde_json::from_str(&fs::read_to_string(path)?)?;
    p.validate()?;
    Ok(p)
}

fn write_out(out: Option<&Path>, name: &str, text: &str) -> Result<()> {
    if let Some(dir) = out {
        write_atomic(&dir.join(name), text.as_bytes())?;
        eprintln!("wrote {}", dir.join(name).display());
    }
    Ok(())
}

fn prepared_tomography(
    params: &ParamSet,
    rp: RpKind,
    noise: &NoiseProfile,
    shots: u64,
    seed: u64,
) -> Result<TomographyData> {
    let system = execute_reduced(&build_gsp_circuit_with(params, rp)?, noise)?.system;
    tomography_collect(&system, shots, noise.p_spam, &mut rng::from_seed(seed))
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out.as_deref();
    let noise = profile_by_name(&cli.profile)?;
    if let Some(w) = cli.workers {
        // Ignore the error if a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    match cli.command {
        Command::ExactGibbs { model } => {
            let t = model.target()?;
            println!("eigenvalues");
            for e in &t.spectrum().eigenvalues {
                println!("{e:.16e}");
            }
            println!("Z={:.16e}", partition_function(&t));
            println!("gibbs_diagonal");
            for p in exact_gibbs(&t).diagonal_probabilities() {
                println!("{p:.16e}");
            }
        }
        Command::Train { model, restarts, max_iter, mode, select, ancilla_layers, system_layers, rp } => {
            let t = model.target()?;
            let cfg = TrainConfig {
                restarts,
                ancilla_layers,
                system_layers,
                rp,
                mode: match mode {
                    ModeArg::Shots => CostMode::Shots(ShotsPlan::default()),
                    ModeArg::Exact => CostMode::Exact,
                },
                selection: match select {
                    SelectArg::Cost => Selection::Cost,
                    SelectArg::Fidelity => Selection::Fidelity,
                },
                spsa: SpsaConfig { max_iter, ..Default::default() },
            };
            let res = train(&t, &noise, &cfg, cli.seed)?;
            let best = res.best();
            println!(
                "best_restart={} best_cost={:.16e} fidelity={:.16e}",
                best.restart, best.result.best_cost, best.fidelity
            );
            write_out(out, "params.json", &serde_json::to_string_pretty(&best.result.best_params)?)?;
            write_out(out, "trace.csv", &best.result.trace_csv())?;
            if out.is_none() {
                println!("{}", serde_json::to_string(&best.result.best_params)?);
            }
        }
        Command::Prepare { params, rp, feedforward, shots } => {
            let p = read_params(&params)?;
            let c = if feedforward {
                build_feedforward_variant_with(&p, rp)?
            } else {
                build_gsp_circuit_with(&p, rp)?
            };
            write_out(out, "circuit.txt", &c.to_text())?;
            let states = execute_reduced(&c, &noise)?;
            let mut r = rng::from_seed(cli.seed);
            let sets = [
                ("counts_S_Z.txt", &states.system, Basis::Z, Register::S),
                ("counts_S_X.txt", &states.system, Basis::X, Register::S),
                ("counts_A_Z.txt", &states.ancilla, Basis::Z, Register::A),
            ];
            for (name, rho, basis, reg) in sets {
                let counts = sample_local(rho, basis, reg, shots, noise.p_spam, &mut r)?;
                if out.is_some() {
                    write_out(out, name, &counts.to_text())?;
                } else {
                    print!("{}", counts.to_text());
                }
            }
        }
        Command::Tomo { params, model, rp, shots } => {
            let p = read_params(&params)?;
            let t = GibbsTarget::new(TfimParams::new(p.n, model.h)?, model.beta)?;
            let data = prepared_tomography(&p, rp, &noise, shots, cli.seed)?;
            if let Some(dir) = out {
                data.write_dir(dir)?;
            }
            let rho = reconstruct(&data)?;
            let parity = parity_even_fraction(data.counts.last().expect("all-Z setting"))?;
            println!("fidelity={:.16e}", uhlmann_fidelity(&rho, &exact_gibbs(&t))?);
            println!("even_parity_fraction={parity:.16e}");
        }
        Command::BetaSweep { model, params, tomo_dir, rp, shots } => {
            let data = match (params, tomo_dir) {
                (Some(p), _) => prepared_tomography(&read_params(&p)?, rp, &noise, shots, cli.seed)?,
                (None, Some(dir)) => TomographyData::read_dir(&dir, model.n)?,
                (None, None) => return Err(Error::InvalidParameter("pass --params or --tomo-dir".into())),
            };
            let rho = reconstruct(&data)?;
            let sweep = beta_sweep(&rho, &TfimParams::new(data.n, model.h)?, model.beta, &default_sweep_grid())?;
            let csv = sweep.to_csv();
            if out.is_some() {
                write_out(out, "sweep.csv", &csv)?;
            }
            print!("{csv}");
        }
        Command::GateCount { circuit, params, rp, gate_set } => {
            let c = match (circuit, params) {
                (Some(path), _) => Circuit::from_text(&fs::read_to_string(path)?)?,
                (None, Some(p)) => build_gsp_circuit_with(&read_params(&p)?, rp)?,
                (None, None) => return Err(Error::InvalidParameter("pass --circuit or --params".into())),
            };
            let gs = match gate_set {
                Some(g) => g,
                None => match noise.metadata.as_ref().map(|m| m.entangler.as_str()) {
                    Some("ZZ") => NativeGateSet::Zz,
                    _ => NativeGateSet::Ms,
                },
            };
            let nc = lower(&c, gs)?;
            if c.num_qubits() <= 10 {
                eprintln!("equivalence_distance={:.3e}", verify_equivalence(&c, &nc)?);
            }
            write_out(out, "native.txt", &nc.to_text())?;
            print!("{}", gate_counts(&nc).to_csv());
        }
        Command::Run => {
            let path = cli.config.ok_or_else(|| Error::Config("`run` needs --config".into()))?;
            let mut cfg = ExperimentConfig::load(&path)?;
            if let Some(dir) = cli.out {
                cfg.output_directory = dir;
            }
            if let Some(w) = cli.workers {
                cfg.workers = w;
            }
            let records = run_grid(&cfg)?;
            let failed = records.iter().filter(|r| r.failure.is_some()).count();
            let files = report(&records, &cfg.output_directory)?;
            println!("{} records ({failed} failed), {} report files in {}", records.len(), files.len(), cfg.output_directory.display());
        }
        Command::Report => {
            let dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("out"));
            let records = load_records(&dir)?;
            let files = report(&records, &dir)?;
            for f in files {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
