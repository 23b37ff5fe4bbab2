//! `dqlab` — command-line front end for the digital quantum simulation lab.
//!
//! Subcommands: `run` executes an experiment config end to end and writes
//! CSV / manifest / plot-script outputs; `calibrate` resolves a config's
//! calibration and prints only its readout confusion matrix; `parse`
//! lowers an OpenQASM 2 file and reports gate counts; `list-experiments`
//! shows the bundled, ready-to-run configs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use dqlab::experiment::{
    self, bundled_config, bundled_experiments, load_config, ExperimentConfig,
};
use dqlab::qasm;
use dqlab::qcore;

#[derive(Parser)]
#[command(
    name = "dqlab",
    version,
    about = "Desk-scale digital quantum simulation: driven spins, fermion quenches, \
             calibrated noise, and error mitigation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write results.csv, manifest.json, and a plot script.
    Run(RunArgs),
    /// Print the readout confusion matrix a config resolves to, as CSV.
    Calibrate(CalibrateArgs),
    /// Parse an OpenQASM 2 file and report qubit and gate counts.
    Parse(ParseArgs),
    /// List the bundled, ready-to-run experiment configs.
    ListExperiments,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Bundled experiment name (see `list-experiments`) or path to a config file.
    config: String,
    /// Override the master random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of measurement samples per histogram.
    #[arg(long)]
    shots: Option<u64>,
    /// Replace the configured calibration with the noise-free model.
    #[arg(long)]
    no_noise: bool,
    /// Override the ZNE noise-amplification stretch factor (odd, > 1).
    #[arg(long)]
    stretch: Option<usize>,
    /// Quench state preparation: "exact" (inject reference amplitudes) or
    /// "qasm" (run the bundled preparation circuit under noise).
    #[arg(long)]
    prep: Option<String>,
    /// Output directory (default: the config's output_dir, else runs/<experiment>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct CalibrateArgs {
    /// Bundled experiment name or path to a config file.
    config: String,
}

#[derive(clap::Args)]
struct ParseArgs {
    /// Path to an OpenQASM 2 file (defaults to the bundled ground-state
    /// preparation listing).
    file: Option<PathBuf>,
    /// Also print the circuit re-serialized in canonical form.
    #[arg(long)]
    emit: bool,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Parse(args) => cmd_parse(args),
        Command::ListExperiments => cmd_list(),
    };
    if let Err(message) = result {
        eprintln!("error: {message}");
        std::process::exit(1);
    }
}

/// Bundled name first, then filesystem path.
fn resolve_config(name_or_path: &str) -> Result<ExperimentConfig, String> {
    if bundled_experiments().iter().any(|&(n, _)| n == name_or_path) {
        return bundled_config(name_or_path).map_err(|e| e.to_string());
    }
    let path = Path::new(name_or_path);
    if !path.exists() {
        let names: Vec<&str> = bundled_experiments().iter().map(|&(n, _)| n).collect();
        return Err(format!(
            "unknown experiment {name_or_path:?}: not a bundled name ({}) and not a file",
            names.join(", ")
        ));
    }
    load_config(path).map_err(|e| e.to_string())
}

fn cmd_run(args: RunArgs) -> Result<(), String> {
    let mut cfg = resolve_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(shots) = args.shots {
        cfg.shots = shots;
    }
    if args.no_noise {
        cfg.calibration = experiment::IDEAL_CALIBRATION.to_string();
    }
    if let Some(stretch) = args.stretch {
        cfg.zne_stretch = stretch;
    }
    if let Some(prep) = args.prep {
        cfg.model.preparation = Some(prep);
    }
    let out_dir: PathBuf = args
        .out
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs").join(cfg.experiment.label()));

    let (table, info) = experiment::run_experiment_with_info(&cfg).map_err(|e| e.to_string())?;
    let paths =
        experiment::emit_outputs(&table, &cfg, &info, &out_dir).map_err(|e| e.to_string())?;

    println!("experiment: {}", cfg.experiment);
    println!("calibration: {} (device {})", info.source, info.device);
    println!(
        "time points: {}  observables: {}  rows: {}",
        table.rows().len() / table.observables().len().max(1),
        table.observables().len(),
        table.rows().len()
    );
    for warning in table.warnings() {
        println!("warning: {warning}");
    }
    if !table.failures().is_empty() {
        println!("lane failures: {}", table.failures().len());
        for f in table.failures() {
            println!("  t={} lane={}: {}", f.t, f.lane, f.message);
        }
    }
    println!("wrote {}", paths.csv.display());
    println!("wrote {}", paths.manifest.display());
    println!("wrote {}", paths.plot.display());
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<(), String> {
    let cfg = resolve_config(&args.config)?;
    let (nm, info) = experiment::resolve_noise(&cfg).map_err(|e| e.to_string())?;
    let lambda = nm.confusion();
    let n = experiment::model_qubit_count(&cfg);
    let dim = 1usize << n;
    println!(
        "# readout confusion matrix, device {}, source {}",
        info.device, info.source
    );
    println!("# rows: observed outcome; columns: prepared basis state; columns sum to 1");
    let labels: Vec<String> = (0..dim).map(|i| qcore::bitstring(i, n)).collect();
    println!("observed\\prepared,{}", labels.join(","));
    // Column j of the matrix is the outcome distribution for prepared
    // basis state j, recovered by pushing the indicator through.
    let mut columns = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut e = vec![0.0; dim];
        e[j] = 1.0;
        columns.push(lambda.apply(&e).map_err(|e| e.to_string())?);
    }
    for (i, label) in labels.iter().enumerate() {
        let row: Vec<String> = (0..dim).map(|j| format!("{}", columns[j][i])).collect();
        println!("{label},{}", row.join(","));
    }
    Ok(())
}

fn cmd_parse(args: ParseArgs) -> Result<(), String> {
    let (source, origin) = match &args.file {
        Some(path) => (
            std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?,
            path.display().to_string(),
        ),
        None => (
            qasm::GROUND_STATE_PREP_QASM.to_string(),
            "<bundled ground-state preparation>".to_string(),
        ),
    };
    let circuit = qasm::parse_circuit(&source).map_err(|e| e.to_string())?;
    let counts = circuit.count_gates();
    let mut by_kind: BTreeMap<&'static str, usize> = BTreeMap::new();
    for gate in circuit.gates() {
        use dqlab::circuit::Gate;
        let kind = match gate {
            Gate::U3 { .. } => "u3",
            Gate::U1 { .. } => "u1",
            Gate::Ry { .. } => "ry",
            Gate::Cx { .. } => "cx",
        };
        *by_kind.entry(kind).or_default() += 1;
    }
    println!("source: {origin}");
    println!("qubits: {}", circuit.n_qubits());
    println!(
        "gates: {} (single-qubit {}, two-qubit {})",
        counts.single_qubit + counts.two_qubit,
        counts.single_qubit,
        counts.two_qubit
    );
    for (kind, count) in &by_kind {
        println!("  {kind}: {count}");
    }
    if args.emit {
        print!("{}", qasm::serialize(&circuit));
    }
    Ok(())
}

fn cmd_list() -> Result<(), String> {
    let entries = bundled_experiments();
    let width = entries.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    for (name, description) in entries {
        println!("{name:width$}  {description}");
    }
    Ok(())
}
