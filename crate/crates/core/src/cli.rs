//! Command-line front end. Commands render into a [`CommandOutput`] so they
//! can be driven from tests without a process boundary.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::channel::EavesdropperModel;
use crate::config::{parse_attack, AttackParams, RunConfig};
use crate::error::{Error, Result};
use crate::metrics::{efficiency_closed_form, efficiency_from_transcript};
use crate::operator::Operator;
use crate::protocol::{run_fixture, run_protocol, share_keys, Fixture, ProtocolParams, RunOutcome, RunTrace};
use crate::qudit::DimensionParams;
use crate::rng::SeedStream;
use crate::security::{
    attack_experiment, entangle_measure_audit, format_sig9, theorem_scan, UnitaryFamily, CSV_HEADER, STEALTH_TOL,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ABORTED: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "mqpc", version, about = "Multi-party quantum private comparison simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write output here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the pinned four-user example and check every intermediate value.
    Demo {
        #[arg(long = "L", default_value_t = 2)]
        decoys: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the protocol from a JSON configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the configuration.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the attack in the configuration.
        #[arg(long)]
        attack: Option<String>,
    },
    /// Monte Carlo detection experiment against the closed-form rate.
    Attack(AttackArgs),
    /// Audit entangle-measure attacks exactly.
    Audit {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long = "probe-dim", default_value_t = 2)]
        probe_dim: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Qudit efficiency, closed form against a counted run.
    Efficiency {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 11)]
        d: usize,
        #[arg(long = "L", default_value_t = 2)]
        decoys: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long)]
    pub attack: String,
    /// One or more dimensions, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "11")]
    pub d: Vec<usize>,
    /// One or more decoy counts, comma separated.
    #[arg(long = "L", value_delimiter = ',', default_value = "1")]
    pub decoys: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "probe-dim", default_value_t = 2)]
    pub probe_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutput {
    pub text: String,
    pub code: i32,
}

impl CommandOutput {
    fn ok(text: String) -> Self {
        Self { text, code: EXIT_OK }
    }
}

/// Maps library errors to exit codes: bad input is a usage error.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::IncompleteRun => EXIT_ABORTED,
        _ => EXIT_USAGE,
    }
}

pub fn execute(cli: &Cli) -> Result<CommandOutput> {
    match &cli.command {
        Command::Demo { decoys, seed } => cmd_demo(*decoys, *seed, cli.format.unwrap_or(Format::Text)),
        Command::Run { config, seed, attack } => {
            let mut config = RunConfig::load(config)?;
            if let Some(seed) = seed {
                config.seed = *seed;
            }
            if let Some(attack) = attack {
                config.attack = attack.clone();
                config.validate()?;
            }
            cmd_run(&config, cli.format.unwrap_or(Format::Text))
        }
        Command::Attack(args) => cmd_attack(args, cli.format.unwrap_or(Format::Csv)),
        Command::Audit { d, probe_dim, samples, seed } => cmd_audit(*d, *probe_dim, *samples, *seed),
        Command::Efficiency { n, d, decoys, seed } => cmd_efficiency(*n, *d, *decoys, *seed),
    }
}

/// Expected intermediates of the reference example.
struct Expected {
    r2: [usize; 4],
    r1: [usize; 4],
    r: [usize; 4],
    m_values: [usize; 4],
    ordering: &'static str,
}

const EXPECTED: Expected =
    Expected { r2: [9, 2, 9, 5], r1: [8, 1, 9, 0], r: [10, 10, 0, 6], m_values: [8, 7, 5, 9], ordering: "P4>P1>P2>P3" };

fn list(values: &[usize]) -> String {
    let parts: Vec<String> = values.iter().map(usize::to_string).collect();
    format!("({})", parts.join(","))
}

fn demo_mismatches(trace: &RunTrace, ordering: &str) -> Vec<String> {
    let mut diffs = Vec::new();
    for (name, got, want) in [
        ("r2", &trace.r2, &EXPECTED.r2),
        ("r1", &trace.r1, &EXPECTED.r1),
        ("r", &trace.r, &EXPECTED.r),
        ("M", &trace.m_values, &EXPECTED.m_values),
    ] {
        if got.as_slice() != want.as_slice() {
            diffs.push(format!("{name}: expected {}, got {}", list(want), list(got)));
        }
    }
    if ordering != EXPECTED.ordering {
        diffs.push(format!("ordering: expected {}, got {ordering}", EXPECTED.ordering));
    }
    diffs
}

pub fn cmd_demo(decoys: usize, seed: u64, format: Format) -> Result<CommandOutput> {
    let fixture = Fixture::reference();
    let record = run_fixture(&fixture, decoys, seed)?;
    let ordering = match &record.outcome {
        RunOutcome::Completed(a) => a.to_string(),
        RunOutcome::Aborted { .. } => return Err(Error::IncompleteRun),
    };
    let t = &record.trace;
    let diffs = demo_mismatches(t, &ordering);
    let text = match format {
        Format::Json => {
            let v =
                json!({ "trace": t, "announcement": ordering, "matches_reference": diffs.is_empty(), "diff": diffs });
            format!("{v}\n")
        }
        Format::Text | Format::Csv => {
            let mut out = String::new();
            out.push_str(&format!("d  = {}\n", t.d));
            out.push_str(&format!("p  = {}\n", list(&t.p)));
            for (name, values) in [("v", &t.v), ("k", &t.k), ("m1", &t.m1), ("m2", &t.m2)] {
                out.push_str(&format!("{name:<2} = {}\n", list(values)));
            }
            out.push_str(&format!("q  = {}\n", t.q.map(|q| q.to_string()).unwrap_or_default()));
            for (name, values) in [("r2", &t.r2), ("r1", &t.r1), ("r", &t.r), ("M", &t.m_values)] {
                out.push_str(&format!("{name:<2} = {}\n", list(values)));
            }
            out.push_str(&format!("announcement: {ordering}\n"));
            if diffs.is_empty() {
                out.push_str("all intermediates match the reference\n");
            } else {
                for diff in &diffs {
                    out.push_str(&format!("MISMATCH {diff}\n"));
                }
            }
            out
        }
    };
    Ok(CommandOutput { text, code: if diffs.is_empty() { EXIT_OK } else { EXIT_MISMATCH } })
}

pub fn cmd_run(config: &RunConfig, format: Format) -> Result<CommandOutput> {
    let params = ProtocolParams::new(config.d, config.n, config.decoys, config.seed)?;
    let secrets = share_keys(&params, &config.p)?;
    let record = run_protocol(&params, &secrets, &config.model()?)?;
    let mut text = record.transcript.to_jsonl();
    let (outcome, code) = match &record.outcome {
        RunOutcome::Completed(a) => {
            (json!({ "record": "outcome", "status": "completed", "announcement": a.to_string() }), EXIT_OK)
        }
        RunOutcome::Aborted { step, channel, report } => (
            json!({
                "record": "outcome",
                "status": "aborted",
                "step": step,
                "channel": channel,
                "checked": report.checked,
                "mismatches": report.mismatches,
            }),
            EXIT_ABORTED,
        ),
    };
    match format {
        Format::Json | Format::Csv => text.push_str(&format!("{outcome}\n")),
        Format::Text => match &record.outcome {
            RunOutcome::Completed(a) => text.push_str(&format!("{a}\n")),
            RunOutcome::Aborted { step, channel, report } => text.push_str(&format!(
                "aborted at step {step}: {} of {} decoys on {channel} failed\n",
                report.mismatches, report.checked
            )),
        },
    }
    Ok(CommandOutput { text, code })
}

pub fn cmd_attack(args: &AttackArgs, format: Format) -> Result<CommandOutput> {
    let root = SeedStream::new(args.seed);
    let mut results = Vec::new();
    for &d in &args.d {
        DimensionParams::new(d)?;
        let params = AttackParams { probe_dim: args.probe_dim, ..AttackParams::default() };
        let model = parse_attack(&args.attack, d, &params)?;
        for &decoys in &args.decoys {
            let stream = root.derive(&format!("attack/{}/{d}/{decoys}", model.name()));
            results.push(attack_experiment(&model, d, decoys, args.trials, &stream)?);
        }
    }
    let text = match format {
        Format::Csv => {
            let mut out = format!("{CSV_HEADER}\n");
            for r in &results {
                out.push_str(&r.to_csv_row());
                out.push('\n');
            }
            out
        }
        Format::Json => {
            let rows: Vec<Value> = results
                .iter()
                .map(|r| {
                    json!({
                        "model": r.model, "d": r.d, "L": r.decoys, "trials": r.trials, "detections": r.detections,
                        "empirical_rate": round9(r.empirical_rate),
                        "theoretical_rate": r.theoretical_rate.map(round9),
                        "std_error": round9(r.std_error),
                    })
                })
                .collect();
            format!("{}\n", Value::Array(rows))
        }
        Format::Text => results
            .iter()
            .map(|r| {
                format!(
                    "{} d={} L={}: {}/{} detected, empirical {}, theoretical {}\n",
                    r.model,
                    r.d,
                    r.decoys,
                    r.detections,
                    r.trials,
                    format_sig9(r.empirical_rate),
                    r.theoretical_rate.map(format_sig9).unwrap_or_else(|| "n/a".into()),
                )
            })
            .collect(),
    };
    Ok(CommandOutput::ok(text))
}

fn round9(x: f64) -> f64 {
    format_sig9(x).parse().unwrap_or(x)
}

fn verdict_json(v: &crate::security::EntangleMeasureVerdict) -> Value {
    json!({
        "max_error_T1": round9(v.max_error_t1),
        "max_error_T2": round9(v.max_error_t2),
        "stealthy": v.stealthy,
        "probe_independence": v.probe_independence.map(round9),
    })
}

pub fn cmd_audit(d: usize, probe_dim: usize, samples: usize, seed: u64) -> Result<CommandOutput> {
    DimensionParams::new(d)?;
    if probe_dim < 2 {
        return Err(Error::InvalidConfig(format!("probe dimension must be at least 2, got {probe_dim}")));
    }
    if d * probe_dim > 64 {
        return Err(Error::InvalidConfig(format!("d·probe_dim = {} exceeds 64", d * probe_dim)));
    }
    let root = SeedStream::new(seed);
    let stealth_example =
        Operator::identity(d).kron(&Operator::haar_random(probe_dim, &mut root.derive("stealth").rng()));
    let identity = entangle_measure_audit(&stealth_example, d, probe_dim, STEALTH_TOL)?;
    let shift = entangle_measure_audit(&Operator::controlled_shift(d, probe_dim), d, probe_dim, STEALTH_TOL)?;
    let haar = theorem_scan(d, probe_dim, samples, STEALTH_TOL, UnitaryFamily::Haar, &root.derive("scan/haar"))?;
    let product =
        theorem_scan(d, probe_dim, samples, STEALTH_TOL, UnitaryFamily::ProbeOnly, &root.derive("scan/probe"))?;
    let violations = haar.violating + product.violating;
    let scan = |s: &crate::security::ScanSummary| json!({ "family": s.family, "samples": s.samples, "stealthy": s.stealthy, "violating": s.violating, "min_error": round9(s.min_error) });
    let report = json!({
        "d": d,
        "probe_dim": probe_dim,
        "identity_on_system": verdict_json(&identity),
        "controlled_shift": verdict_json(&shift),
        "scans": [scan(&haar), scan(&product)],
        "violations": violations,
    });
    let text = format!("{}\n", serde_json::to_string_pretty(&report)?);
    Ok(CommandOutput { text, code: if violations == 0 { EXIT_OK } else { EXIT_MISMATCH } })
}

pub fn cmd_efficiency(n: usize, d: usize, decoys: usize, seed: u64) -> Result<CommandOutput> {
    let closed = efficiency_closed_form(n)?;
    let params = ProtocolParams::new(d, n, decoys, seed)?;
    let inputs =
        crate::protocol::simulated_qkd(n, params.dims.h() + 1, &mut SeedStream::new(seed).derive("inputs").rng())?;
    let record = run_protocol(&params, &share_keys(&params, &inputs)?, &EavesdropperModel::Honest)?;
    let counted = efficiency_from_transcript(&record.transcript)?;
    let report = json!({
        "n": n,
        "closed_form": closed,
        "counted": counted,
        "eta_decimal": format_sig9(counted.eta_f64()),
        "match": closed == counted,
    });
    Ok(CommandOutput { text: format!("{report}\n"), code: if closed == counted { EXIT_OK } else { EXIT_MISMATCH } })
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_args<I, T>(args: I) -> CommandOutput
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            return CommandOutput { text: e.render().to_string(), code };
        }
    };
    match execute(&cli) {
        Ok(out) => match &cli.out {
            Some(path) => match std::fs::write(path, &out.text) {
                Ok(()) => CommandOutput { text: String::new(), code: out.code },
                Err(e) => {
                    CommandOutput { text: format!("error: cannot write {}: {e}\n", path.display()), code: EXIT_USAGE }
                }
            },
            None => out,
        },
        Err(e) => CommandOutput { text: format!("error: {e}\n"), code: exit_code_for(&e) },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_matches_reference() {
        let out = cmd_demo(2, 0, Format::Text).unwrap();
        assert_eq!(out.code, EXIT_OK, "{}", out.text);
        assert!(out.text.contains("M  = (8,7,5,9)"));
        assert!(out.text.contains("r  = (10,10,0,6)"));
        assert!(out.text.contains("announcement: P4>P1>P2>P3"));
    }

    #[test]
    fn demo_diff_reports_mismatch() {
        let mut trace = run_fixture(&Fixture::reference(), 1, 0).unwrap().trace;
        trace.r[2] = 1;
        let diffs = demo_mismatches(&trace, "P1>P2");
        assert_eq!(diffs.len(), 2);
        assert!(diffs[0].starts_with("r: expected (10,10,0,6)"));
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run_args(["mqpc"]).code, EXIT_USAGE);
        assert_eq!(run_args(["mqpc", "bogus"]).code, EXIT_USAGE);
        assert_eq!(run_args(["mqpc", "attack", "--attack", "nope"]).code, EXIT_USAGE);
        assert_eq!(run_args(["mqpc", "audit", "--d", "11", "--probe-dim", "8"]).code, EXIT_USAGE);
        assert_eq!(run_args(["mqpc", "efficiency", "--n", "1"]).code, EXIT_USAGE);
        assert_eq!(run_args(["mqpc", "--help"]).code, EXIT_OK);
    }

    #[test]
    fn attack_csv() {
        let out =
            run_args(["mqpc", "attack", "--attack", "measure_resend", "--d", "2", "--L", "1", "--trials", "1000"]);
        assert_eq!(out.code, EXIT_OK);
        let lines: Vec<&str> = out.text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1].split(',').nth(6), Some("0.250000000"));
    }

    #[test]
    fn attack_grid_rows() {
        let out = run_args(["mqpc", "attack", "--attack", "honest", "--d", "2,3", "--L", "1,2,4", "--trials", "50"]);
        assert_eq!(out.text.lines().count(), 7);
        assert!(out.text.lines().skip(1).all(|l| l.split(',').nth(4) == Some("0")));
    }

    #[test]
    fn audit_small() {
        let out = cmd_audit(2, 2, 10, 0).unwrap();
        assert_eq!(out.code, EXIT_OK);
        let v: Value = serde_json::from_str(&out.text).unwrap();
        assert_eq!(v["controlled_shift"]["max_error_T2"], json!(0.5));
        assert_eq!(v["identity_on_system"]["stealthy"], json!(true));
    }

    #[test]
    fn efficiency_report() {
        let out = cmd_efficiency(4, 11, 2, 0).unwrap();
        assert_eq!(out.code, EXIT_OK);
        assert!(out.text.contains(r#""eta":"1/16""#));
    }
}
