//! Argument parsing, config-file loading, and option resolution.
//!
//! Every subcommand takes its options from three layers with fixed
//! precedence: command-line flags override config-file fields, which
//! override built-in defaults.  Config files are strict JSON mirrors of the
//! flags (unknown keys are rejected), and resolution also rejects flags
//! that the selected protocol or task does not consume, so an artifact's
//! embedded configuration never carries silently-ignored settings.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::{config_err, CliError};

/// Seed used by simulations when none is given.  Optimization runs never
/// fall back to this: they refuse to start unseeded.
pub(crate) const DEFAULT_SEED: u64 = 2024;

#[derive(Parser)]
#[command(
    name = "qpm",
    version,
    about = "Prepare-and-measure scenarios with quantum inputs: exact simulation, \
             see-saw optimization, reference designs, and bound tables",
    propagate_version = true
)]
pub(crate) struct Cli {
    /// Upper bound on solver worker threads (the exact solvers are
    /// currently single-threaded; the cap is validated and recorded).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub(crate) enum Command {
    /// Exact simulation of an analytic protocol, composition, or sweep.
    Simulate(SimulateArgs),
    /// See-saw optimization of measurements and decoders (needs --seed).
    Optimize(OptimizeArgs),
    /// Emit a symmetric 2-design (SIC) with its verification metrics.
    Designs(DesignsArgs),
    /// Tabulate optimal code rates and fidelity bounds over an (N, d) grid.
    Bounds(BoundsArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub(crate) enum ProtocolOpt {
    /// Standard teleportation relay on a single input.
    Teleport,
    /// Universal two-qubit protocol on the SIC product grid.
    #[value(name = "universal2q")]
    #[serde(rename = "universal2q")]
    Universal2q,
    /// Random access code composed with the exact teleportation layer.
    RacCompose,
    /// No-signaling box behind the code layer, as a probability table.
    NsBox,
    /// Universal protocol under isotropic resource noise.
    NoisySweep,
    /// Universal protocol on mixed inputs of varying purity.
    MixedSweep,
    /// Universal protocol swapping entanglement with external references.
    SwapSweep,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub(crate) enum RacOpt {
    /// Optimal no-signaling box code.
    #[value(name = "box")]
    #[serde(rename = "box")]
    NsBox,
    /// Deterministic classical code that transmits the first slot.
    Classical,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub(crate) enum FormatOpt {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub(crate) enum TaskOpt {
    /// Optimize a protocol's input-state fidelity.
    Fidelity,
    /// Optimize the entanglement-assisted random access code itself.
    Rac,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub(crate) enum MessageOpt {
    Classical,
    Quantum,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub(crate) enum ObjectiveOpt {
    /// Catalogue-average fidelity.
    Average,
    /// Worst fidelity over the catalogue.
    Worst,
}

/// Output options shared by every subcommand.
#[derive(Args)]
pub(crate) struct OutputArgs {
    /// Output format (default: csv for tables, json for optimize).
    #[arg(long, value_enum)]
    pub format: Option<FormatOpt>,
    /// Output path; stdout when omitted.  Relative paths resolve against
    /// $QPM_OUT_DIR when that variable is set.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON config file supplying any of this subcommand's options;
    /// explicit flags take precedence over its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub(crate) struct SimulateArgs {
    /// Which construction to run.
    #[arg(long, value_enum)]
    pub protocol: Option<ProtocolOpt>,
    /// Number of input slots N.
    #[arg(long = "N", value_name = "N")]
    pub n: Option<usize>,
    /// Local input dimension d.
    #[arg(long)]
    pub d: Option<usize>,
    /// RNG seed for spot-check inputs and random bases.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Extra seeded spot-check inputs beyond the design grid.
    #[arg(long)]
    pub extra: Option<usize>,
    /// Number of sweep grid points.
    #[arg(long)]
    pub points: Option<usize>,
    /// Code layer for rac-compose.
    #[arg(long, value_enum)]
    pub rac: Option<RacOpt>,
    /// Average the composed output over encoding relabelings (rac-compose).
    #[arg(long)]
    pub symmetrize: Option<bool>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args)]
pub(crate) struct OptimizeArgs {
    /// What to optimize.
    #[arg(long, value_enum)]
    pub task: Option<TaskOpt>,
    /// Number of input slots N.
    #[arg(long = "N", value_name = "N")]
    pub n: Option<usize>,
    /// Local input dimension d.
    #[arg(long)]
    pub d: Option<usize>,
    /// Classical message alphabet size d_C (fidelity task; default d²).
    #[arg(long = "d-c")]
    pub d_c: Option<usize>,
    /// Local dimension of the shared maximally entangled resource
    /// (default: d for the fidelity task, d² for the rac task).
    #[arg(long)]
    pub resource_dim: Option<usize>,
    /// Message type for the fidelity task.
    #[arg(long, value_enum)]
    pub message: Option<MessageOpt>,
    /// Figure of merit for the fidelity task.
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveOpt>,
    /// Message alphabet size for the rac task (default d²).
    #[arg(long)]
    pub messages: Option<usize>,
    /// RNG seed (required: optimization runs must be reproducible).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent random restarts.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Maximum see-saw cycles per restart.
    #[arg(long)]
    pub max_outer: Option<usize>,
    /// Also optimize the shared resource state (fidelity task).
    #[arg(long)]
    pub optimize_state: Option<bool>,
    /// Extra seeded spot-check inputs in the scenario (fidelity task).
    #[arg(long)]
    pub extra: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args)]
pub(crate) struct DesignsArgs {
    /// Hilbert-space dimension of the design (2, 3, or 4).
    #[arg(long)]
    pub d: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args)]
pub(crate) struct BoundsArgs {
    /// Largest slot count N to tabulate.
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Largest input dimension d to tabulate.
    #[arg(long)]
    pub d_max: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

// ---------------------------------------------------------------------------
// Config-file mirrors.  Strict: unknown keys are configuration errors.
// ---------------------------------------------------------------------------

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub(crate) struct SimulateFile {
    pub protocol: Option<ProtocolOpt>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub seed: Option<u64>,
    pub extra: Option<usize>,
    pub points: Option<usize>,
    pub rac: Option<RacOpt>,
    pub symmetrize: Option<bool>,
    pub format: Option<FormatOpt>,
    pub threads: Option<usize>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub(crate) struct OptimizeFile {
    pub task: Option<TaskOpt>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub d_c: Option<usize>,
    pub resource_dim: Option<usize>,
    pub message: Option<MessageOpt>,
    pub objective: Option<ObjectiveOpt>,
    pub messages: Option<usize>,
    pub seed: Option<u64>,
    pub restarts: Option<usize>,
    pub max_outer: Option<usize>,
    pub optimize_state: Option<bool>,
    pub extra: Option<usize>,
    pub format: Option<FormatOpt>,
    pub threads: Option<usize>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub(crate) struct DesignsFile {
    pub d: Option<usize>,
    pub format: Option<FormatOpt>,
    pub threads: Option<usize>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub(crate) struct BoundsFile {
    pub n_max: Option<usize>,
    pub d_max: Option<usize>,
    pub format: Option<FormatOpt>,
    pub threads: Option<usize>,
}

fn load_file<T: serde::de::DeserializeOwned + Default>(
    path: &Option<PathBuf>,
) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
}

fn resolve_threads(flag: Option<usize>, file: Option<usize>) -> Result<usize, CliError> {
    let threads = flag.or(file).unwrap_or(1);
    if threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    Ok(threads)
}

/// Rejects a flag the selected mode does not consume, naming both.
fn forbid<T>(value: &Option<T>, flag: &str, mode: &str) -> Result<(), CliError> {
    if value.is_some() {
        return Err(CliError::Config(format!("{flag} does not apply to {mode}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Resolved configurations: exactly what a run used, embedded in its output.
// ---------------------------------------------------------------------------

#[derive(Serialize, Clone)]
pub(crate) struct ResolvedSimulate {
    pub protocol: ProtocolOpt,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rac: Option<RacOpt>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symmetrize: Option<bool>,
    pub format: FormatOpt,
    pub threads: usize,
}

#[derive(Serialize, Clone)]
pub(crate) struct ResolvedOptimize {
    pub task: TaskOpt,
    pub n: usize,
    pub d: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_c: Option<usize>,
    pub resource_dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<MessageOpt>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveOpt>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub messages: Option<usize>,
    pub seed: u64,
    pub restarts: usize,
    pub max_outer: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimize_state: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra: Option<usize>,
    pub format: FormatOpt,
    pub threads: usize,
}

#[derive(Serialize, Clone)]
pub(crate) struct ResolvedDesigns {
    pub d: usize,
    pub format: FormatOpt,
    pub threads: usize,
}

#[derive(Serialize, Clone)]
pub(crate) struct ResolvedBounds {
    pub n_max: usize,
    pub d_max: usize,
    pub format: FormatOpt,
    pub threads: usize,
}

pub(crate) fn resolve_simulate(
    args: SimulateArgs,
    threads: Option<usize>,
) -> Result<(ResolvedSimulate, Option<PathBuf>), CliError> {
    let file: SimulateFile = load_file(&args.output.config)?;
    let protocol = args.protocol.or(file.protocol).ok_or_else(|| {
        CliError::Config("simulate needs --protocol (or a config file that sets it)".into())
    })?;
    let threads = resolve_threads(threads, file.threads)?;
    let format = args.output.format.or(file.format).unwrap_or(FormatOpt::Csv);
    let n = args.n.or(file.n);
    let d = args.d.or(file.d);
    let seed = args.seed.or(file.seed);
    let extra = args.extra.or(file.extra);
    let points = args.points.or(file.points);
    let rac = args.rac.or(file.rac);
    let symmetrize = args.symmetrize.or(file.symmetrize);

    let base = ResolvedSimulate {
        protocol,
        n: None,
        d: None,
        seed: None,
        extra: None,
        points: None,
        rac: None,
        symmetrize: None,
        format,
        threads,
    };
    use ProtocolOpt::*;
    let resolved = match protocol {
        Teleport => {
            forbid(&points, "--points", "teleport")?;
            forbid(&rac, "--rac", "teleport")?;
            forbid(&symmetrize, "--symmetrize", "teleport")?;
            if n.is_some_and(|v| v != 1) {
                return Err(CliError::Config(
                    "teleport runs a single input slot; use rac-compose for N > 1".into(),
                ));
            }
            ResolvedSimulate {
                n: Some(1),
                d: Some(d.unwrap_or(2)),
                seed: Some(seed.unwrap_or(DEFAULT_SEED)),
                extra: Some(extra.unwrap_or(0)),
                ..base
            }
        }
        Universal2q => {
            forbid(&points, "--points", "universal2q")?;
            forbid(&rac, "--rac", "universal2q")?;
            forbid(&symmetrize, "--symmetrize", "universal2q")?;
            if d.is_some_and(|v| v != 2) || n.is_some_and(|v| v != 2) {
                return Err(CliError::Config(
                    "universal2q is the two-qubit protocol on two slots (d = 2, N = 2)".into(),
                ));
            }
            ResolvedSimulate {
                n: Some(2),
                d: Some(2),
                seed: Some(seed.unwrap_or(DEFAULT_SEED)),
                extra: Some(extra.unwrap_or(0)),
                ..base
            }
        }
        RacCompose => {
            forbid(&points, "--points", "rac-compose")?;
            ResolvedSimulate {
                n: Some(n.unwrap_or(2)),
                d: Some(d.unwrap_or(2)),
                seed: Some(seed.unwrap_or(DEFAULT_SEED)),
                extra: Some(extra.unwrap_or(0)),
                rac: Some(rac.unwrap_or(RacOpt::NsBox)),
                symmetrize: Some(symmetrize.unwrap_or(true)),
                ..base
            }
        }
        NsBox => {
            forbid(&seed, "--seed", "ns-box (the table is deterministic)")?;
            forbid(&extra, "--extra", "ns-box")?;
            forbid(&points, "--points", "ns-box")?;
            forbid(&rac, "--rac", "ns-box")?;
            forbid(&symmetrize, "--symmetrize", "ns-box")?;
            ResolvedSimulate {
                n: Some(n.unwrap_or(2)),
                d: Some(d.unwrap_or(2)),
                ..base
            }
        }
        NoisySweep | SwapSweep => {
            let mode = if protocol == NoisySweep { "noisy-sweep" } else { "swap-sweep" };
            forbid(&n, "--N", mode)?;
            forbid(&d, "--d", mode)?;
            forbid(&seed, "--seed", mode)?;
            forbid(&extra, "--extra", mode)?;
            forbid(&rac, "--rac", mode)?;
            forbid(&symmetrize, "--symmetrize", mode)?;
            let points = points.unwrap_or(if protocol == NoisySweep { 11 } else { 9 });
            check_points(points)?;
            ResolvedSimulate { points: Some(points), ..base }
        }
        MixedSweep => {
            forbid(&n, "--N", "mixed-sweep")?;
            forbid(&d, "--d", "mixed-sweep")?;
            forbid(&extra, "--extra", "mixed-sweep")?;
            forbid(&rac, "--rac", "mixed-sweep")?;
            forbid(&symmetrize, "--symmetrize", "mixed-sweep")?;
            let points = points.unwrap_or(11);
            check_points(points)?;
            ResolvedSimulate {
                points: Some(points),
                seed: Some(seed.unwrap_or(DEFAULT_SEED)),
                ..base
            }
        }
    };
    Ok((resolved, args.output.out))
}

fn check_points(points: usize) -> Result<(), CliError> {
    if points < 2 {
        return Err(CliError::Config(
            "--points must be at least 2 (both sweep endpoints are included)".into(),
        ));
    }
    Ok(())
}

pub(crate) fn resolve_optimize(
    args: OptimizeArgs,
    threads: Option<usize>,
) -> Result<(ResolvedOptimize, Option<PathBuf>), CliError> {
    let file: OptimizeFile = load_file(&args.output.config)?;
    let task = args.task.or(file.task).unwrap_or(TaskOpt::Fidelity);
    let seed = args.seed.or(file.seed).ok_or_else(|| {
        CliError::Config("optimize requires --seed so the run is reproducible".into())
    })?;
    let threads = resolve_threads(threads, file.threads)?;
    let format = args.output.format.or(file.format).unwrap_or(FormatOpt::Json);
    let n = args.n.or(file.n).unwrap_or(2);
    let d = args.d.or(file.d).unwrap_or(2);
    if n == 0 || d < 2 {
        return Err(CliError::Config("need N ≥ 1 and d ≥ 2".into()));
    }
    let restarts = args.restarts.or(file.restarts).unwrap_or(20);
    let max_outer = args.max_outer.or(file.max_outer).unwrap_or(500);
    if restarts == 0 || max_outer == 0 {
        return Err(CliError::Config("--restarts and --max-outer must be at least 1".into()));
    }
    let d_c = args.d_c.or(file.d_c);
    let resource_dim = args.resource_dim.or(file.resource_dim);
    let message = args.message.or(file.message);
    let objective = args.objective.or(file.objective);
    let messages = args.messages.or(file.messages);
    let optimize_state = args.optimize_state.or(file.optimize_state);
    let extra = args.extra.or(file.extra);

    let resolved = match task {
        TaskOpt::Fidelity => {
            forbid(&messages, "--messages", "the fidelity task (use --d-c)")?;
            ResolvedOptimize {
                task,
                n,
                d,
                d_c: Some(d_c.unwrap_or(d * d)),
                resource_dim: resource_dim.unwrap_or(d),
                message: Some(message.unwrap_or(MessageOpt::Classical)),
                objective: Some(objective.unwrap_or(ObjectiveOpt::Average)),
                messages: None,
                seed,
                restarts,
                max_outer,
                optimize_state: Some(optimize_state.unwrap_or(false)),
                extra: Some(extra.unwrap_or(0)),
                format,
                threads,
            }
        }
        TaskOpt::Rac => {
            forbid(&d_c, "--d-c", "the rac task (use --messages)")?;
            forbid(&message, "--message", "the rac task")?;
            forbid(&objective, "--objective", "the rac task")?;
            forbid(&optimize_state, "--optimize-state", "the rac task")?;
            forbid(&extra, "--extra", "the rac task")?;
            check_rac_capacity(n, d)?;
            ResolvedOptimize {
                task,
                n,
                d,
                d_c: None,
                resource_dim: resource_dim.unwrap_or(d * d),
                message: None,
                objective: None,
                messages: Some(messages.unwrap_or(d * d)),
                seed,
                restarts,
                max_outer,
                optimize_state: None,
                extra: None,
                format,
                threads,
            }
        }
    };
    if resolved.resource_dim == 0 {
        return Err(CliError::Config("--resource-dim must be at least 1".into()));
    }
    Ok((resolved, args.output.out))
}

/// The rac task enumerates all d^(2N) data tuples; keep that alphabet
/// within the same capacity the protocol layer enforces.
fn check_rac_capacity(n: usize, d: usize) -> Result<(), CliError> {
    let mut count = 1usize;
    for _ in 0..n {
        count = count
            .checked_mul(d * d)
            .filter(|&c| c <= 1 << 16)
            .ok_or_else(|| config_err("data alphabet d^(2N) exceeds the 2^16 capacity"))?;
    }
    Ok(())
}

pub(crate) fn resolve_designs(
    args: DesignsArgs,
    threads: Option<usize>,
) -> Result<(ResolvedDesigns, Option<PathBuf>), CliError> {
    let file: DesignsFile = load_file(&args.output.config)?;
    Ok((
        ResolvedDesigns {
            d: args.d.or(file.d).unwrap_or(2),
            format: args.output.format.or(file.format).unwrap_or(FormatOpt::Csv),
            threads: resolve_threads(threads, file.threads)?,
        },
        args.output.out,
    ))
}

pub(crate) fn resolve_bounds(
    args: BoundsArgs,
    threads: Option<usize>,
) -> Result<(ResolvedBounds, Option<PathBuf>), CliError> {
    let file: BoundsFile = load_file(&args.output.config)?;
    let n_max = args.n_max.or(file.n_max).unwrap_or(4);
    let d_max = args.d_max.or(file.d_max).unwrap_or(4);
    if n_max == 0 || d_max < 2 {
        return Err(CliError::Config("need --n-max ≥ 1 and --d-max ≥ 2".into()));
    }
    Ok((
        ResolvedBounds {
            n_max,
            d_max,
            format: args.output.format.or(file.format).unwrap_or(FormatOpt::Csv),
            threads: resolve_threads(threads, file.threads)?,
        },
        args.output.out,
    ))
}
