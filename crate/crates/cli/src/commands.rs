//! Subcommand implementations: build the configured objects, run them, and
//! emit CSV or JSON artifacts with the resolved configuration embedded.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;

use qpm_core::optimizer::measurement_adaptivity;
use qpm_core::protocols::{
    compose_stochastic_teleport, mixed_input_fidelity, noisy_resource_sweep, ns_box, rac_bound,
    rac_from_box, standard_teleport_protocol, swap_fidelity, universal_mixed_simulation,
    universal_protocol_2qubit, universal_scenario, universal_swap_simulation, ClassicalRac,
    Rational, StochasticTeleportSpec,
};
use qpm_core::quantum::max_entangled;
use qpm_core::scenario::{
    avg_fidelity, fidelity_table, indep_spread, is_universal, worst_fidelity,
};
use qpm_core::serialize::{pack_protocol, pack_rac, ProtocolJson, RacJson};
use qpm_core::{
    rac_seesaw, seesaw_run, CorrelationTable, Design2, FidelityObjective, InputSet, MessageKind,
    Protocol, RacStrategy, ResourceSpec, ScenarioSpec, SeesawConfig,
};

use crate::opts::{
    resolve_bounds, resolve_designs, resolve_optimize, resolve_simulate, Cli, Command, FormatOpt,
    MessageOpt, ObjectiveOpt, ProtocolOpt, RacOpt, ResolvedBounds, ResolvedDesigns,
    ResolvedOptimize, ResolvedSimulate, TaskOpt,
};
use crate::{config_err, emit, sig, CliError};

pub(crate) fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => {
            let (resolved, out) = resolve_simulate(args, cli.threads)?;
            simulate(&resolved, &out, stdout)
        }
        Command::Optimize(args) => {
            let (resolved, out) = resolve_optimize(args, cli.threads)?;
            optimize(&resolved, &out, stdout)
        }
        Command::Designs(args) => {
            let (resolved, out) = resolve_designs(args, cli.threads)?;
            designs(&resolved, &out, stdout)
        }
        Command::Bounds(args) => {
            let (resolved, out) = resolve_bounds(args, cli.threads)?;
            bounds(&resolved, &out, stdout)
        }
    }
}

fn config_line<T: Serialize>(resolved: &T) -> String {
    serde_json::to_string(resolved).expect("resolved configuration serializes")
}

/// CSV artifact under construction: `#`-prefixed metadata lines first, then
/// the header and data rows, so the file parses with any comment-aware
/// reader.
struct Csv(String);

impl Csv {
    fn new(command: &str, config: &str) -> Self {
        let mut body = String::new();
        let _ = writeln!(body, "# command: {command}");
        let _ = writeln!(body, "# config: {config}");
        Csv(body)
    }

    fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.0, "# {key}: {value}");
    }

    fn line(&mut self, row: impl std::fmt::Display) {
        let _ = writeln!(self.0, "{row}");
    }

    fn raw(&mut self, chunk: &str) {
        self.0.push_str(chunk);
    }

    fn done(self) -> String {
        self.0
    }
}

fn to_json_body<T: Serialize>(value: &T) -> String {
    let mut body = serde_json::to_string_pretty(value).expect("report serializes");
    body.push('\n');
    body
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/// Per-input fidelities plus the aggregates every fidelity table reports.
struct FidelityReport {
    rows: Vec<(usize, usize, f64)>,
    grid_inputs: usize,
    f_avg: f64,
    f_worst: f64,
    spread: f64,
    universal: bool,
}

fn fidelity_report(
    table: &CorrelationTable,
    scenario: &ScenarioSpec,
) -> Result<FidelityReport, CliError> {
    let fids = fidelity_table(table, scenario)?;
    let mut rows = Vec::new();
    for (k, per_input) in fids.iter().enumerate() {
        for (y, &f) in per_input.iter().enumerate() {
            rows.push((k, y, f));
        }
    }
    Ok(FidelityReport {
        rows,
        grid_inputs: scenario.avg_count(),
        f_avg: avg_fidelity(table, scenario)?,
        f_worst: worst_fidelity(table, scenario)?,
        spread: indep_spread(table, scenario)?,
        universal: is_universal(table, scenario)?,
    })
}

/// Extra aggregates for the composed random access code run.
struct ComposeExtras {
    p_rac: f64,
    f_formula: f64,
    formula_gap: f64,
}

#[derive(Serialize)]
struct FidelityRowJson {
    input: usize,
    y: usize,
    fidelity: f64,
}

#[derive(Serialize)]
struct FidelityJson<'a> {
    command: &'a str,
    config: &'a ResolvedSimulate,
    grid_inputs: usize,
    f_avg: f64,
    f_worst: f64,
    spread: f64,
    universal: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_rac: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    f_formula: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    formula_gap: Option<f64>,
    rows: Vec<FidelityRowJson>,
}

fn emit_fidelity(
    label: &str,
    resolved: &ResolvedSimulate,
    report: &FidelityReport,
    extras: Option<&ComposeExtras>,
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let summary = format!(
        "{label}: f_avg = {}, f_worst = {}, spread = {}",
        sig(report.f_avg),
        sig(report.f_worst),
        sig(report.spread)
    );
    let body = match resolved.format {
        FormatOpt::Csv => {
            let mut csv = Csv::new("simulate", &config_line(resolved));
            csv.note("grid_inputs", report.grid_inputs);
            csv.note("f_avg", sig(report.f_avg));
            csv.note("f_worst", sig(report.f_worst));
            csv.note("spread", sig(report.spread));
            csv.note("universal", report.universal);
            if let Some(e) = extras {
                csv.note("p_rac", sig(e.p_rac));
                csv.note("f_formula", sig(e.f_formula));
                csv.note("formula_gap", sig(e.formula_gap));
            }
            csv.line("input,y,fidelity");
            for &(k, y, f) in &report.rows {
                csv.line(format_args!("{k},{y},{}", sig(f)));
            }
            csv.done()
        }
        FormatOpt::Json => to_json_body(&FidelityJson {
            command: "simulate",
            config: resolved,
            grid_inputs: report.grid_inputs,
            f_avg: report.f_avg,
            f_worst: report.f_worst,
            spread: report.spread,
            universal: report.universal,
            p_rac: extras.map(|e| e.p_rac),
            f_formula: extras.map(|e| e.f_formula),
            formula_gap: extras.map(|e| e.formula_gap),
            rows: report
                .rows
                .iter()
                .map(|&(input, y, fidelity)| FidelityRowJson { input, y, fidelity })
                .collect(),
        }),
    };
    emit(out, &body, &summary, stdout)
}

fn simulate(
    resolved: &ResolvedSimulate,
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    match resolved.protocol {
        ProtocolOpt::Teleport => {
            let d = resolved.d.expect("resolved");
            let spec = StochasticTeleportSpec::new(1, d).map_err(config_err)?;
            let protocol =
                Protocol::Classical(standard_teleport_protocol(d).map_err(config_err)?);
            let scenario = spec
                .scenario(resolved.extra.expect("resolved"), resolved.seed.expect("resolved"))
                .map_err(config_err)?;
            let table = protocol.correlations(&scenario)?;
            let report = fidelity_report(&table, &scenario)?;
            emit_fidelity(
                &format!("teleport (d = {d})"),
                resolved,
                &report,
                None,
                out,
                stdout,
            )
        }
        ProtocolOpt::Universal2q => {
            let extra = resolved.extra.expect("resolved");
            let input_set = if extra == 0 {
                InputSet::DesignGrid
            } else {
                InputSet::DesignGridAugmented { extra, seed: resolved.seed.expect("resolved") }
            };
            let scenario = universal_scenario(input_set).map_err(config_err)?;
            let protocol = Protocol::Classical(universal_protocol_2qubit()?);
            let table = protocol.correlations(&scenario)?;
            let report = fidelity_report(&table, &scenario)?;
            emit_fidelity("universal2q", resolved, &report, None, out, stdout)
        }
        ProtocolOpt::RacCompose => {
            let n = resolved.n.expect("resolved");
            let d = resolved.d.expect("resolved");
            let spec = StochasticTeleportSpec::new(n, d).map_err(config_err)?;
            let strategy = match resolved.rac.expect("resolved") {
                RacOpt::NsBox => rac_from_box(ns_box(n, d).map_err(config_err)?),
                RacOpt::Classical => first_slot_code(n, d)?,
            };
            let composed = compose_stochastic_teleport(strategy, spec).map_err(config_err)?;
            let (scenario, table) = composed.evaluate(
                resolved.extra.expect("resolved"),
                resolved.seed.expect("resolved"),
                resolved.symmetrize.expect("resolved"),
            )?;
            let report = fidelity_report(&table, &scenario)?;
            let f_formula = composed.formula_fidelity()?;
            let extras = ComposeExtras {
                p_rac: composed.rac().p_rac()?,
                f_formula,
                formula_gap: (report.f_avg - f_formula).abs(),
            };
            emit_fidelity(
                &format!("rac-compose (N = {n}, d = {d})"),
                resolved,
                &report,
                Some(&extras),
                out,
                stdout,
            )
        }
        ProtocolOpt::NsBox => simulate_ns_box(resolved, out, stdout),
        ProtocolOpt::NoisySweep => simulate_noisy_sweep(resolved, out, stdout),
        ProtocolOpt::MixedSweep => simulate_mixed_sweep(resolved, out, stdout),
        ProtocolOpt::SwapSweep => simulate_swap_sweep(resolved, out, stdout),
    }
}

/// The deterministic one-message code: transmit slot 0, guess the message.
fn first_slot_code(n: usize, d: usize) -> Result<RacStrategy, CliError> {
    let k = d * d;
    let x_count = k.pow(n as u32);
    let msb = k.pow((n - 1) as u32);
    let encoder: Vec<usize> = (0..x_count).map(|x| x / msb).collect();
    let decoders: Vec<Vec<usize>> = (0..n).map(|_| (0..k).collect()).collect();
    Ok(RacStrategy::Classical(
        ClassicalRac::new(n, d, encoder, decoders).map_err(config_err)?,
    ))
}

#[derive(Serialize)]
struct RationalJson {
    num: u64,
    den: u64,
}

impl From<Rational> for RationalJson {
    fn from(r: Rational) -> Self {
        RationalJson { num: *r.numer(), den: *r.denom() }
    }
}

#[derive(Serialize)]
struct BoxEntryJson {
    a: usize,
    b: usize,
    x: usize,
    y: usize,
    p: RationalJson,
}

#[derive(Serialize)]
struct BoxJson<'a> {
    command: &'a str,
    config: &'a ResolvedSimulate,
    bell_parameter: RationalJson,
    bell_parameter_float: f64,
    composed_fidelity: RationalJson,
    composed_fidelity_float: f64,
    table: Vec<BoxEntryJson>,
}

fn ratio_float(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn simulate_ns_box(
    resolved: &ResolvedSimulate,
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let n = resolved.n.expect("resolved");
    let d = resolved.d.expect("resolved");
    let bx = ns_box(n, d).map_err(config_err)?;
    let bell = bx.bell_parameter();
    // Composing the box with exact teleportation yields (d·P + 1)/(d + 1).
    let fidelity = (Rational::new(d as u64, 1) * bell + Rational::new(1, 1))
        / Rational::new(d as u64 + 1, 1);
    let summary = format!(
        "ns-box (N = {n}, d = {d}): bell_parameter = {bell}, composed_fidelity = {fidelity}"
    );
    let body = match resolved.format {
        FormatOpt::Csv => {
            let mut csv = Csv::new("simulate", &config_line(resolved));
            csv.note("bell_parameter", bell);
            csv.note("bell_parameter_float", sig(ratio_float(&bell)));
            csv.note("composed_fidelity", fidelity);
            csv.note("composed_fidelity_float", sig(ratio_float(&fidelity)));
            let mut table = Vec::new();
            bx.write_csv(&mut table)
                .map_err(|e| CliError::Numeric(format!("cannot render table: {e}")))?;
            csv.raw(&String::from_utf8(table).expect("CSV table is UTF-8"));
            csv.done()
        }
        FormatOpt::Json => {
            let k = bx.outcome_count();
            let mut table = Vec::new();
            for y in 0..bx.n() {
                for x in 0..bx.x_count() {
                    for a in 0..k {
                        for b in 0..k {
                            table.push(BoxEntryJson {
                                a,
                                b,
                                x,
                                y,
                                p: bx.p(a, b, x, y).into(),
                            });
                        }
                    }
                }
            }
            to_json_body(&BoxJson {
                command: "simulate",
                config: resolved,
                bell_parameter: bell.into(),
                bell_parameter_float: ratio_float(&bell),
                composed_fidelity: fidelity.into(),
                composed_fidelity_float: ratio_float(&fidelity),
                table,
            })
        }
    };
    emit(out, &body, &summary, stdout)
}

#[derive(Serialize)]
struct NoisyRowJson {
    visibility: f64,
    f_avg: f64,
    f_law: f64,
}

#[derive(Serialize)]
struct SweepJson<'a, R: Serialize> {
    command: &'a str,
    config: &'a ResolvedSimulate,
    max_law_gap: f64,
    rows: Vec<R>,
}

fn simulate_noisy_sweep(
    resolved: &ResolvedSimulate,
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let points = resolved.points.expect("resolved");
    let grid: Vec<f64> = (0..points)
        .map(|i| i as f64 / (points - 1) as f64)
        .collect();
    let sweep = noisy_resource_sweep(&grid)?;
    let law = |v: f64| v * (5.0 / 6.0) + (1.0 - v) * 0.5;
    let rows: Vec<NoisyRowJson> = sweep
        .iter()
        .map(|&(v, f)| NoisyRowJson { visibility: v, f_avg: f, f_law: law(v) })
        .collect();
    let max_gap = rows
        .iter()
        .map(|r| (r.f_avg - r.f_law).abs())
        .fold(0.0f64, f64::max);
    let summary = format!("noisy-sweep: {points} points, max deviation from the visibility law = {}", sig(max_gap));
    let body = match resolved.format {
        FormatOpt::Csv => {
            let mut csv = Csv::new("simulate", &config_line(resolved));
            csv.note("max_law_gap", sig(max_gap));
            csv.line("visibility,f_avg,f_law");
            for r in &rows {
                csv.line(format_args!(
                    "{},{},{}",
                    sig(r.visibility),
                    sig(r.f_avg),
                    sig(r.f_law)
                ));
            }
            csv.done()
        }
        FormatOpt::Json => to_json_body(&SweepJson {
            command: "simulate",
            config: resolved,
            max_law_gap: max_gap,
            rows,
        }),
    };
    emit(out, &body, &summary, stdout)
}

#[derive(Serialize)]
struct MixedRowJson {
    lambda: f64,
    purity: f64,
    f_first: f64,
    f_second: f64,
    f_formula: f64,
}

fn simulate_mixed_sweep(
    resolved: &ResolvedSimulate,
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let points = resolved.points.expect("resolved");
    let seed = resolved.seed.expect("resolved");
    let mut rows = Vec::with_capacity(points);
    for i in 0..points {
        let lambda = 0.5 + 0.5 * i as f64 / (points - 1) as f64;
        // One seed for the whole sweep: the random input bases stay fixed
        // while the mixing weight varies, so the curve is smooth.
        let (f_first, f_second) = universal_mixed_simulation(lambda, seed)?;
        let purity = lambda * lambda + (1.0 - lambda) * (1.0 - lambda);
        rows.push(MixedRowJson {
            lambda,
            purity,
            f_first,
            f_second,
            f_formula: mixed_input_fidelity(purity)?,
        });
    }
    let max_gap = rows
        .iter()
        .map(|r| (r.f_first - r.f_formula).abs().max((r.f_second - r.f_formula).abs()))
        .fold(0.0f64, f64::max);
    let summary = format!(
        "mixed-sweep: {points} points, max deviation from the purity formula = {}",
        sig(max_gap)
    );
    let body = match resolved.format {
        FormatOpt::Csv => {
            let mut csv = Csv::new("simulate", &config_line(resolved));
            csv.note("max_formula_gap", sig(max_gap));
            csv.line("lambda,purity,f_first,f_second,f_formula");
            for r in &rows {
                csv.line(format_args!(
                    "{},{},{},{},{}",
                    sig(r.lambda),
                    sig(r.purity),
                    sig(r.f_first),
                    sig(r.f_second),
                    sig(r.f_formula)
                ));
            }
            csv.done()
        }
        FormatOpt::Json => to_json_body(&SweepJson {
            command: "simulate",
            config: resolved,
            max_law_gap: max_gap,
            rows,
        }),
    };
    emit(out, &body, &summary, stdout)
}

#[derive(Serialize)]
struct SwapRowJson {
    theta: f64,
    f_first: f64,
    f_second: f64,
    f_formula: f64,
}

fn simulate_swap_sweep(
    resolved: &ResolvedSimulate,
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let points = resolved.points.expect("resolved");
    let mut rows = Vec::with_capacity(points);
    for i in 0..points {
        let theta = std::f64::consts::FRAC_PI_4 * i as f64 / (points - 1) as f64;
        let (f_first, f_second) = universal_swap_simulation(theta)?;
        rows.push(SwapRowJson {
            theta,
            f_first,
            f_second,
            f_formula: swap_fidelity(theta)?,
        });
    }
    let max_gap = rows
        .iter()
        .map(|r| (r.f_first - r.f_formula).abs().max((r.f_second - r.f_formula).abs()))
        .fold(0.0f64, f64::max);
    let summary = format!(
        "swap-sweep: {points} points, max deviation from the angle formula = {}",
        sig(max_gap)
    );
    let body = match resolved.format {
        FormatOpt::Csv => {
            let mut csv = Csv::new("simulate", &config_line(resolved));
            csv.note("max_formula_gap", sig(max_gap));
            csv.line("theta,f_first,f_second,f_formula");
            for r in &rows {
                csv.line(format_args!(
                    "{},{},{},{}",
                    sig(r.theta),
                    sig(r.f_first),
                    sig(r.f_second),
                    sig(r.f_formula)
                ));
            }
            csv.done()
        }
        FormatOpt::Json => to_json_body(&SweepJson {
            command: "simulate",
            config: resolved,
            max_law_gap: max_gap,
            rows,
        }),
    };
    emit(out, &body, &summary, stdout)
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct OptimizeJson<'a> {
    command: &'a str,
    config: &'a ResolvedOptimize,
    best_value: f64,
    best_seed: u64,
    restart_values: Vec<f64>,
    trace: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    adaptivity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    protocol: Option<ProtocolJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    strategy: Option<RacJson>,
}

struct OptimizeOutcome {
    best_value: f64,
    best_seed: u64,
    restart_values: Vec<f64>,
    trace: Vec<f64>,
    adaptivity: Option<f64>,
    protocol: Option<ProtocolJson>,
    strategy: Option<RacJson>,
}

fn optimize(
    resolved: &ResolvedOptimize,
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let mut cfg = SeesawConfig::new(resolved.seed);
    cfg.restarts = resolved.restarts;
    cfg.max_outer = resolved.max_outer;

    let outcome = match resolved.task {
        TaskOpt::Fidelity => {
            cfg.optimize_state = resolved.optimize_state.expect("resolved");
            cfg.objective = match resolved.objective.expect("resolved") {
                ObjectiveOpt::Average => FidelityObjective::Average,
                ObjectiveOpt::Worst => FidelityObjective::Worst,
            };
            let spec =
                StochasticTeleportSpec::new(resolved.n, resolved.d).map_err(config_err)?;
            let scenario = spec
                .scenario(resolved.extra.expect("resolved"), resolved.seed)
                .map_err(config_err)?;
            let state = max_entangled(resolved.resource_dim)
                .map_err(config_err)?
                .projector();
            let kind = match resolved.message.expect("resolved") {
                MessageOpt::Classical => MessageKind::Classical,
                MessageOpt::Quantum => MessageKind::Quantum,
            };
            let resource = ResourceSpec::new(resolved.d_c.expect("resolved"), state, 1, kind)
                .map_err(config_err)?;
            let report = seesaw_run(&scenario, &resource, &cfg)?;
            OptimizeOutcome {
                best_value: report.best_value,
                best_seed: report.best_seed,
                restart_values: report.restart_values,
                trace: report.trace,
                adaptivity: None,
                protocol: Some(pack_protocol(&report.best)),
                strategy: None,
            }
        }
        TaskOpt::Rac => {
            let shared = max_entangled(resolved.resource_dim)
                .map_err(config_err)?
                .projector();
            let report = rac_seesaw(
                resolved.n,
                resolved.d,
                &shared,
                resolved.messages.expect("resolved"),
                &cfg,
            )?;
            let (adaptivity, strategy) = match &report.best {
                RacStrategy::Quantum(q) => (Some(measurement_adaptivity(q)), Some(pack_rac(q))),
                _ => (None, None),
            };
            OptimizeOutcome {
                best_value: report.best_value,
                best_seed: report.best_seed,
                restart_values: report.restart_values,
                trace: report.trace,
                adaptivity,
                protocol: None,
                strategy,
            }
        }
    };

    let task_label = match resolved.task {
        TaskOpt::Fidelity => "fidelity",
        TaskOpt::Rac => "rac",
    };
    let summary = format!(
        "optimize {task_label} (N = {}, d = {}): best = {} from restart seed {}",
        resolved.n,
        resolved.d,
        sig(outcome.best_value),
        outcome.best_seed
    );
    let body = match resolved.format {
        FormatOpt::Json => to_json_body(&OptimizeJson {
            command: "optimize",
            config: resolved,
            best_value: outcome.best_value,
            best_seed: outcome.best_seed,
            restart_values: outcome.restart_values,
            trace: outcome.trace,
            adaptivity: outcome.adaptivity,
            protocol: outcome.protocol,
            strategy: outcome.strategy,
        }),
        FormatOpt::Csv => {
            let mut csv = Csv::new("optimize", &config_line(resolved));
            csv.note("best_value", sig(outcome.best_value));
            csv.note("best_seed", outcome.best_seed);
            let restarts = outcome
                .restart_values
                .iter()
                .map(|&v| sig(v))
                .collect::<Vec<_>>()
                .join(" ");
            csv.note("restart_values", restarts);
            if let Some(a) = outcome.adaptivity {
                csv.note("adaptivity", sig(a));
            }
            csv.note("solution", "omitted in csv; rerun with --format json");
            csv.line("step,objective");
            for (i, &v) in outcome.trace.iter().enumerate() {
                csv.line(format_args!("{i},{}", sig(v)));
            }
            csv.done()
        }
    };
    emit(out, &body, &summary, stdout)
}

// ---------------------------------------------------------------------------
// designs
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct DesignsJson<'a> {
    command: &'a str,
    config: &'a ResolvedDesigns,
    dim: usize,
    size: usize,
    equiangularity_deviation: f64,
    second_moment_residual: f64,
    states: Vec<Vec<[f64; 2]>>,
}

fn designs(
    resolved: &ResolvedDesigns,
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let design = Design2::sic(resolved.d).map_err(config_err)?;
    let states = design.states();
    let residual = design.second_moment_residual()?;
    // SIC sets are equiangular: |⟨φ_j|φ_k⟩|² = 1/(d+1) for all j ≠ k.
    let target = 1.0 / (resolved.d as f64 + 1.0);
    let mut deviation = 0.0f64;
    for j in 0..states.len() {
        for k in (j + 1)..states.len() {
            let overlap = states[j].vector().dotc(states[k].vector()).norm_sqr();
            deviation = deviation.max((overlap - target).abs());
        }
    }
    let summary = format!(
        "designs (d = {}): {} states, equiangularity deviation = {}, second-moment residual = {}",
        resolved.d,
        states.len(),
        sig(deviation),
        sig(residual)
    );
    let body = match resolved.format {
        FormatOpt::Csv => {
            let mut csv = Csv::new("designs", &config_line(resolved));
            csv.note("dim", resolved.d);
            csv.note("size", states.len());
            csv.note("equiangularity_deviation", sig(deviation));
            csv.note("second_moment_residual", sig(residual));
            csv.line("state,component,re,im");
            for (s, state) in states.iter().enumerate() {
                for (c, amp) in state.vector().iter().enumerate() {
                    csv.line(format_args!("{s},{c},{},{}", sig(amp.re), sig(amp.im)));
                }
            }
            csv.done()
        }
        FormatOpt::Json => to_json_body(&DesignsJson {
            command: "designs",
            config: resolved,
            dim: resolved.d,
            size: states.len(),
            equiangularity_deviation: deviation,
            second_moment_residual: residual,
            states: states
                .iter()
                .map(|s| s.vector().iter().map(|a| [a.re, a.im]).collect())
                .collect(),
        }),
    };
    emit(out, &body, &summary, stdout)
}

// ---------------------------------------------------------------------------
// bounds
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct BoundRowJson {
    n: usize,
    d: usize,
    p_bound: f64,
    f_bound: f64,
    p_exact: String,
    f_exact: String,
}

#[derive(Serialize)]
struct BoundsJson<'a> {
    command: &'a str,
    config: &'a ResolvedBounds,
    rows: Vec<BoundRowJson>,
}

fn bounds(
    resolved: &ResolvedBounds,
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for n in 1..=resolved.n_max {
        for d in 2..=resolved.d_max {
            let (p, f) = rac_bound(n, d);
            let (n64, d64) = (n as u64, d as u64);
            let p_exact = Rational::new(d64 + n64 - 1, n64 * d64);
            let f_exact = Rational::new(2 * n64 + d64 - 1, n64 * (d64 + 1));
            rows.push(BoundRowJson {
                n,
                d,
                p_bound: p,
                f_bound: f,
                p_exact: p_exact.to_string(),
                f_exact: f_exact.to_string(),
            });
        }
    }
    let summary = format!(
        "bounds: {} rows over N ≤ {}, d ≤ {}",
        rows.len(),
        resolved.n_max,
        resolved.d_max
    );
    let body = match resolved.format {
        FormatOpt::Csv => {
            let mut csv = Csv::new("bounds", &config_line(resolved));
            csv.line("n,d,p_bound,f_bound,p_exact,f_exact");
            for r in &rows {
                csv.line(format_args!(
                    "{},{},{},{},{},{}",
                    r.n,
                    r.d,
                    sig(r.p_bound),
                    sig(r.f_bound),
                    r.p_exact,
                    r.f_exact
                ));
            }
            csv.done()
        }
        FormatOpt::Json => to_json_body(&BoundsJson {
            command: "bounds",
            config: resolved,
            rows,
        }),
    };
    emit(out, &body, &summary, stdout)
}
