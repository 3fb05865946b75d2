//! Command-line driver wiring the library into reproducible experiments:
//! obfuscation generation, consensus runs, adversary schedule construction,
//! attacks against the obfuscation, schedule verification, and the cost
//! benchmark comparing process, adversary, and attacker meters.
//!
//! Every subcommand prints one JSON report to stdout (`--csv` switches the
//! tabular commands to CSV) and is byte-for-byte deterministic for fixed
//! flags. Randomness fans out from `--seed` through fixed labels ("gen",
//! "oracle", "schedule", "attack:<i>", "rep:<i>"), so each sub-experiment
//! can be reproduced in isolation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::rc::Rc;

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use serde::Serialize;

use obfcon::adversary::{extract_threshold_via_adversary, AdversaryTrace};
use obfcon::attacker::{
    binary_search_attack, run_obfuscation_experiment, AttackMethod, ExperimentParams,
};
use obfcon::memory::{run_schedule, ProcessOutcome, RunOptions, Schedule};
use obfcon::protocol::{consensus_programs, register_count, DecisionFunction};
use obfcon::seeds;
use obfcon::threshold::{preprocess, ObfuscationFile, ThresholdParams};
use obfcon::{Error, OracleKind, RandomOracle};

const SPEC_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "obfcon", version, about = "Obfuscated consensus experiments")]
struct Cli {
    /// Master seed; all randomness derives from it through fixed labels.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Emit JSON (the default).
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    /// Emit CSV instead of JSON (attack and bench only).
    #[arg(long, global = true)]
    csv: bool,
    /// Suppress the human-readable summary on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an obfuscated threshold table and write it to a file.
    Gen(GenArgs),
    /// Recover one table entry from an obfuscation file.
    Probe(ProbeArgs),
    /// Run the consensus protocol under a schedule.
    Run(RunArgs),
    /// Compute an agreement-violating schedule.
    Adversary(AdversaryArgs),
    /// Attack fresh obfuscation instances and aggregate the query costs.
    Attack(AttackArgs),
    /// Simulate a schedule and classify the outcome.
    Verify(VerifyArgs),
    /// Generate, run honestly, run the adversary, attack, and compare costs.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    ell: u64,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    k: usize,
    /// Oracle backend: "ideal" (seeded) or "sha".
    #[arg(long, default_value = "ideal")]
    mode: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    i: u64,
}

#[derive(Args)]
struct RunArgs {
    /// Comma-separated consensus inputs, e.g. "0,1".
    #[arg(long)]
    inputs: String,
    #[arg(long)]
    s: u32,
    /// Decision function: "plain:T" or "obf:FILE".
    #[arg(long)]
    f: String,
    /// Schedule source: a JSON file path, "random:SEED", or "solo:PID".
    #[arg(long)]
    schedule: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AdversaryArgs {
    #[arg(long)]
    s: u32,
    /// Decision function: "plain:T" or "obf:FILE".
    #[arg(long)]
    f: String,
    /// Where to write the disagreement schedule (JSON array).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the iteration trace.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    /// Obfuscation file supplying the parameters under attack.
    #[arg(long = "in")]
    input: PathBuf,
    /// "binary" or "bounded:q".
    #[arg(long)]
    method: String,
    /// Number of seeded experiment instances.
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    schedule: PathBuf,
    #[arg(long)]
    inputs: String,
    #[arg(long)]
    s: u32,
    #[arg(long)]
    f: String,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    s: u32,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "ideal")]
    mode: String,
    #[arg(long, default_value_t = 1)]
    reps: u64,
    #[arg(long)]
    report: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InputWidth { .. }
            | Error::Domain { .. }
            | Error::InvalidParams(_)
            | Error::NotPreprocessOutput
            | Error::UnknownProcess { .. }
            | Error::Encoding(_) => 2,
            Error::AlreadyDone { .. }
            | Error::WaitFreedomViolation { .. }
            | Error::NoDecision { .. }
            | Error::RegisterRange { .. }
            | Error::ModelViolation(_) => 3,
            Error::AttackInconclusive(_) => 4,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::validation(format!("io error: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::validation(format!("json error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    if cli.csv && !matches!(cli.command, Command::Attack(_) | Command::Bench(_)) {
        return Err(Failure::validation(
            "--csv is only supported for attack and bench",
        ));
    }
    match &cli.command {
        Command::Gen(args) => cmd_gen(cli, args),
        Command::Probe(args) => cmd_probe(cli, args),
        Command::Run(args) => cmd_run(cli, args),
        Command::Adversary(args) => cmd_adversary(cli, args),
        Command::Attack(args) => cmd_attack(cli, args),
        Command::Verify(args) => cmd_verify(cli, args),
        Command::Bench(args) => cmd_bench(cli, args),
    }
}

fn emit_json<T: Serialize>(report: &T) -> Result<(), Failure> {
    println!("{}", serde_json::to_string_pretty(report)?);
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn read_obfuscation(path: &Path) -> Result<ObfuscationFile, Failure> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn parse_oracle_kind(mode: &str) -> Result<OracleKind, Failure> {
    Ok(mode.parse::<OracleKind>()?)
}

fn parse_inputs(text: &str) -> Result<Vec<u8>, Failure> {
    let inputs: Vec<u8> = text
        .split(',')
        .map(|tok| match tok.trim() {
            "0" => Ok(0),
            "1" => Ok(1),
            other => Err(Failure::validation(format!("input {other:?} is not a bit"))),
        })
        .collect::<Result<_, _>>()?;
    if inputs.is_empty() {
        return Err(Failure::validation("no inputs given"));
    }
    Ok(inputs)
}

/// "plain:T" or "obf:FILE" into a decision function over 0..=2^s.
fn parse_decision_fn(spec: &str, s: u32) -> Result<Rc<DecisionFunction>, Failure> {
    let ell = 1u64
        .checked_shl(s)
        .ok_or_else(|| Failure::validation(format!("s = {s} too large")))?;
    if let Some(t) = spec.strip_prefix("plain:") {
        let t: u64 = t
            .parse()
            .map_err(|_| Failure::validation(format!("bad threshold {t:?}")))?;
        return Ok(Rc::new(DecisionFunction::plain(t, ell)?));
    }
    if let Some(path) = spec.strip_prefix("obf:") {
        let file = read_obfuscation(Path::new(path))?;
        let (obf, oracle) = file.into_parts()?;
        if obf.ell != ell {
            return Err(Failure::validation(format!(
                "obfuscation domain {} does not match 2^{s}",
                obf.ell
            )));
        }
        return Ok(Rc::new(DecisionFunction::obfuscated(obf, oracle)?));
    }
    Err(Failure::validation(format!(
        "decision function {spec:?} must be plain:T or obf:FILE"
    )))
}

/// A schedule file path, "random:SEED", or "solo:PID".
fn parse_schedule(spec: &str, n: usize, slots_each: u64) -> Result<Schedule, Failure> {
    if let Some(seed) = spec.strip_prefix("random:") {
        let seed: u64 = seed
            .parse()
            .map_err(|_| Failure::validation(format!("bad schedule seed {seed:?}")))?;
        let bounds = vec![slots_each; n];
        let mut rng = seeds::stream(seed, "schedule");
        return Ok(Schedule::random_full(&bounds, &mut rng));
    }
    if let Some(pid) = spec.strip_prefix("solo:") {
        let pid: usize = pid
            .parse()
            .map_err(|_| Failure::validation(format!("bad pid {pid:?}")))?;
        if pid >= n {
            return Err(Error::UnknownProcess { pid }.into());
        }
        return Ok(Schedule::solo(pid, slots_each));
    }
    let text = std::fs::read_to_string(spec)?;
    Ok(serde_json::from_str(&text)?)
}

fn outcome_map(outcomes: &[ProcessOutcome]) -> BTreeMap<String, &ProcessOutcome> {
    outcomes
        .iter()
        .enumerate()
        .map(|(pid, o)| (pid.to_string(), o))
        .collect()
}

#[derive(Serialize)]
struct GenReport<'a> {
    spec_version: u32,
    command: &'a str,
    ell: u64,
    m: usize,
    k: usize,
    oracle_mode: OracleKind,
    out: String,
}

fn cmd_gen(cli: &Cli, args: &GenArgs) -> Result<(), Failure> {
    let kind = parse_oracle_kind(&args.mode)?;
    if args.ell < 2 {
        return Err(Failure::validation("ell must be at least 2"));
    }
    let mut gen = seeds::stream(cli.seed, "gen");
    let threshold = gen.gen_range(1..args.ell);
    let params = ThresholdParams {
        ell: args.ell,
        threshold,
        m: args.m,
        k: args.k,
    };
    let oracle_seed = seeds::derive_seed(cli.seed, "oracle");
    let mut oracle = RandomOracle::from_kind(kind, args.m, Some(oracle_seed))?;
    let obf = preprocess(&params, &mut oracle, &mut gen)?;
    let stored_seed = match kind {
        OracleKind::Ideal => Some(oracle_seed),
        OracleKind::Sha => None,
    };
    let file = ObfuscationFile::new(&obf, kind, stored_seed);
    write_json(&args.out, &file)?;
    if !cli.quiet {
        eprintln!(
            "wrote obfuscation (ell={}, m={}, k={}) to {}",
            args.ell,
            args.m,
            args.k,
            args.out.display()
        );
    }
    emit_json(&GenReport {
        spec_version: SPEC_VERSION,
        command: "gen",
        ell: args.ell,
        m: args.m,
        k: args.k,
        oracle_mode: kind,
        out: args.out.display().to_string(),
    })
}

#[derive(Serialize)]
struct ProbeReport<'a> {
    spec_version: u32,
    command: &'a str,
    i: u64,
    bit: u8,
    oracle_queries: u64,
}

fn cmd_probe(cli: &Cli, args: &ProbeArgs) -> Result<(), Failure> {
    let file = read_obfuscation(&args.input)?;
    let (obf, mut oracle) = file.into_parts()?;
    let bit = obfcon::threshold::probe(&obf, args.i, &mut oracle)?;
    if !cli.quiet {
        eprintln!("entry {} = {bit} ({} queries)", args.i, oracle.query_count());
    }
    emit_json(&ProbeReport {
        spec_version: SPEC_VERSION,
        command: "probe",
        i: args.i,
        bit,
        oracle_queries: oracle.query_count(),
    })
}

#[derive(Serialize)]
struct RunReportOut<'a> {
    spec_version: u32,
    command: &'a str,
    outcomes: BTreeMap<String, &'a ProcessOutcome>,
    skipped_steps: u64,
}

fn cmd_run(cli: &Cli, args: &RunArgs) -> Result<(), Failure> {
    let inputs = parse_inputs(&args.inputs)?;
    let f = parse_decision_fn(&args.f, args.s)?;
    let programs = consensus_programs(&inputs, &f, args.s)?;
    let slots_each = 2 * u64::from(args.s) + 1;
    let schedule = parse_schedule(&args.schedule, inputs.len(), slots_each)?;
    let (report, _) = run_schedule(
        programs,
        register_count(args.s),
        &schedule,
        RunOptions::default(),
    )?;
    let out = RunReportOut {
        spec_version: SPEC_VERSION,
        command: "run",
        outcomes: outcome_map(&report.outcomes),
        skipped_steps: report.skipped_steps,
    };
    if let Some(path) = &args.out {
        write_json(path, &out)?;
    }
    if !cli.quiet {
        let decided: Vec<String> = report
            .outcomes
            .iter()
            .enumerate()
            .map(|(pid, o)| match o.value {
                Some(v) => format!("p{pid}={v}"),
                None => format!("p{pid}=?"),
            })
            .collect();
        eprintln!("run finished: {}", decided.join(" "));
    }
    emit_json(&out)
}

#[derive(Serialize)]
struct AdversaryReport<'a> {
    spec_version: u32,
    command: &'a str,
    schedule_len: usize,
    decisions: [u8; 2],
    crossing: u64,
    simulated_transitions: u64,
    oracle_queries: u64,
    max_solo_cost: u64,
    iterations: usize,
}

fn cmd_adversary(cli: &Cli, args: &AdversaryArgs) -> Result<(), Failure> {
    let f = parse_decision_fn(&args.f, args.s)?;
    let extraction = extract_threshold_via_adversary(f, args.s)?;
    let trace: &AdversaryTrace = &extraction.trace;
    if let Some(path) = &args.out {
        write_json(path, &trace.schedule)?;
    }
    if let Some(path) = &args.trace {
        write_json(path, trace)?;
    }
    if !cli.quiet {
        eprintln!(
            "disagreement schedule of {} steps, crossing at {}",
            trace.schedule.len(),
            extraction.crossing
        );
    }
    emit_json(&AdversaryReport {
        spec_version: SPEC_VERSION,
        command: "adversary",
        schedule_len: trace.schedule.len(),
        decisions: trace.decisions,
        crossing: extraction.crossing,
        simulated_transitions: trace.simulated_transitions,
        oracle_queries: trace.oracle_queries,
        max_solo_cost: trace.max_solo_cost,
        iterations: trace.iterations.len(),
    })
}

fn parse_attack_method(spec: &str) -> Result<AttackMethod, Failure> {
    if spec == "binary" {
        return Ok(AttackMethod::BinarySearch);
    }
    if let Some(q) = spec.strip_prefix("bounded:") {
        let q: u64 = q
            .parse()
            .map_err(|_| Failure::validation(format!("bad budget {q:?}")))?;
        return Ok(AttackMethod::BoundedQuery(q));
    }
    Err(Failure::validation(format!(
        "attack method {spec:?} must be binary or bounded:q"
    )))
}

#[derive(Serialize)]
struct AttackReportOut<'a> {
    spec_version: u32,
    command: &'a str,
    #[serde(flatten)]
    aggregate: obfcon::attacker::ExperimentAggregate,
}

fn cmd_attack(cli: &Cli, args: &AttackArgs) -> Result<(), Failure> {
    let file = read_obfuscation(&args.input)?;
    let method = parse_attack_method(&args.method)?;
    if args.seeds == 0 {
        return Err(Failure::validation("need at least one seed"));
    }
    let params = ExperimentParams {
        ell: file.ell,
        m: file.m,
        k: file.k,
        oracle_kind: file.oracle_mode,
    };
    let seed_list: Vec<u64> = (0..args.seeds)
        .map(|i| seeds::derive_seed(cli.seed, &format!("attack:{i}")))
        .collect();
    let aggregate = run_obfuscation_experiment(&params, &seed_list, method)?;
    if !cli.quiet {
        eprintln!(
            "{} runs: success {:.3}, mean tau {:.1}",
            aggregate.runs, aggregate.success_rate, aggregate.tau_mean
        );
    }
    let out = AttackReportOut {
        spec_version: SPEC_VERSION,
        command: "attack",
        aggregate,
    };
    if let Some(path) = &args.report {
        write_json(path, &out)?;
    }
    if cli.csv {
        let a = &out.aggregate;
        println!("method,ell,m,k,runs,success_rate,failures,tau_mean,tau_std,tau_ci95_lo,tau_ci95_hi,tau_p10,tau_p50,tau_p90,probe_mean");
        println!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            a.method,
            a.ell,
            a.m,
            a.k,
            a.runs,
            a.success_rate,
            a.failures,
            a.tau_mean,
            a.tau_std,
            a.tau_ci95[0],
            a.tau_ci95[1],
            a.tau_p10,
            a.tau_p50,
            a.tau_p90,
            a.probe_mean
        );
        return Ok(());
    }
    emit_json(&out)
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    spec_version: u32,
    command: &'a str,
    verdict: &'a str,
    decisions: BTreeMap<String, Option<u8>>,
    unfinished: Vec<usize>,
    skipped_steps: u64,
}

fn cmd_verify(cli: &Cli, args: &VerifyArgs) -> Result<(), Failure> {
    let inputs = parse_inputs(&args.inputs)?;
    let f = parse_decision_fn(&args.f, args.s)?;
    let programs = consensus_programs(&inputs, &f, args.s)?;
    let text = std::fs::read_to_string(&args.schedule)?;
    let schedule: Schedule = serde_json::from_str(&text)?;
    let (report, _) = run_schedule(
        programs,
        register_count(args.s),
        &schedule,
        RunOptions { lenient: true },
    )?;

    let decided: Vec<(usize, u8)> = report
        .outcomes
        .iter()
        .enumerate()
        .filter_map(|(pid, o)| o.value.map(|v| (pid, v)))
        .collect();
    // Undecided after taking at least one step: the schedule cut it off.
    let unfinished: Vec<usize> = report
        .outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| !o.decided && o.steps > 0)
        .map(|(pid, _)| pid)
        .collect();
    let disagreement = decided
        .iter()
        .any(|&(_, v)| decided.iter().any(|&(_, w)| v != w));
    let invalid = decided.iter().any(|&(_, v)| !inputs.contains(&v));

    let verdict = if disagreement {
        "disagreement"
    } else if invalid {
        "validity-violation"
    } else if !unfinished.is_empty() {
        "nontermination"
    } else {
        "agreement"
    };

    if !cli.quiet {
        eprintln!("verdict: {verdict}");
    }
    emit_json(&VerifyReport {
        spec_version: SPEC_VERSION,
        command: "verify",
        verdict,
        decisions: report
            .outcomes
            .iter()
            .enumerate()
            .map(|(pid, o)| (pid.to_string(), o.value))
            .collect(),
        unfinished,
        skipped_steps: report.skipped_steps,
    })
}

#[derive(Serialize)]
struct BenchRep {
    rep: u64,
    threshold: u64,
    crossing: u64,
    process_oracle_queries: Vec<u64>,
    process_transitions: Vec<u64>,
    decisions: Vec<Option<u8>>,
    adversary_oracle_queries: u64,
    adversary_transitions: u64,
    attacker_tau: u64,
    attacker_probes: u64,
    attacker_success: bool,
    ratio_adversary_vs_max_process: f64,
    ratio_attacker_vs_max_process: f64,
}

#[derive(Serialize)]
struct BenchAggregate {
    reps: u64,
    adversary_ratio_min: f64,
    adversary_ratio_mean: f64,
    attacker_ratio_min: f64,
    attacker_ratio_mean: f64,
}

#[derive(Serialize)]
struct BenchReport<'a> {
    spec_version: u32,
    command: &'a str,
    s: u32,
    ell: u64,
    m: usize,
    k: usize,
    oracle_mode: OracleKind,
    master_seed: u64,
    runs: Vec<BenchRep>,
    aggregate: BenchAggregate,
}

fn bench_one(
    rep: u64,
    master: u64,
    s: u32,
    m: usize,
    k: usize,
    kind: OracleKind,
) -> Result<BenchRep, Failure> {
    let rep_master = seeds::derive_seed(master, &format!("rep:{rep}"));
    let ell = 1u64 << s;
    let mut gen = seeds::stream(rep_master, "gen");
    let threshold = gen.gen_range(1..ell);
    let oracle_seed = seeds::derive_seed(rep_master, "oracle");
    let params = ThresholdParams {
        ell,
        threshold,
        m,
        k,
    };
    let mut oracle = RandomOracle::from_kind(kind, m, Some(oracle_seed))?;
    let obf = preprocess(&params, &mut oracle, &mut gen)?;

    // Honest run under a random full schedule, on a fresh oracle instance.
    let honest_oracle = RandomOracle::from_kind(kind, m, Some(oracle_seed))?;
    let f = Rc::new(DecisionFunction::obfuscated(obf.clone(), honest_oracle)?);
    let programs = consensus_programs(&[0, 1], &f, s)?;
    let bounds = vec![2 * u64::from(s) + 1; 2];
    let mut sched_rng = seeds::stream(rep_master, "schedule");
    let schedule = Schedule::random_full(&bounds, &mut sched_rng);
    let (honest, _) = run_schedule(programs, register_count(s), &schedule, RunOptions::default())?;
    let process_oracle_queries: Vec<u64> =
        honest.outcomes.iter().map(|o| o.oracle_queries).collect();
    let max_process = process_oracle_queries.iter().copied().max().unwrap_or(0);

    // Scheduling adversary with its own oracle instance.
    let adv_oracle = RandomOracle::from_kind(kind, m, Some(oracle_seed))?;
    let adv_f = Rc::new(DecisionFunction::obfuscated(obf.clone(), adv_oracle)?);
    let extraction = extract_threshold_via_adversary(adv_f, s)?;

    // Binary-search attacker with its own oracle instance.
    let mut attack_oracle = RandomOracle::from_kind(kind, m, Some(oracle_seed))?;
    let attack = binary_search_attack(&obf, &mut attack_oracle)?.judged_against(threshold);

    let ratio = |cost: u64| -> f64 {
        if max_process == 0 {
            f64::INFINITY
        } else {
            cost as f64 / max_process as f64
        }
    };
    Ok(BenchRep {
        rep,
        threshold,
        crossing: extraction.crossing,
        ratio_adversary_vs_max_process: ratio(extraction.trace.oracle_queries),
        ratio_attacker_vs_max_process: ratio(attack.tau),
        process_oracle_queries,
        process_transitions: honest.outcomes.iter().map(|o| o.transitions).collect(),
        decisions: honest.outcomes.iter().map(|o| o.value).collect(),
        adversary_oracle_queries: extraction.trace.oracle_queries,
        adversary_transitions: extraction.trace.simulated_transitions,
        attacker_tau: attack.tau,
        attacker_probes: attack.probes,
        attacker_success: attack.success,
    })
}

fn cmd_bench(cli: &Cli, args: &BenchArgs) -> Result<(), Failure> {
    let kind = parse_oracle_kind(&args.mode)?;
    if args.reps == 0 {
        return Err(Failure::validation("need at least one repetition"));
    }
    let mut runs = Vec::with_capacity(args.reps as usize);
    for rep in 0..args.reps {
        runs.push(bench_one(rep, cli.seed, args.s, args.m, args.k, kind)?);
    }
    let mean = |values: Vec<f64>| -> f64 { values.iter().sum::<f64>() / values.len() as f64 };
    let aggregate = BenchAggregate {
        reps: args.reps,
        adversary_ratio_min: runs
            .iter()
            .map(|r| r.ratio_adversary_vs_max_process)
            .fold(f64::MAX, f64::min),
        adversary_ratio_mean: mean(
            runs.iter()
                .map(|r| r.ratio_adversary_vs_max_process)
                .collect(),
        ),
        attacker_ratio_min: runs
            .iter()
            .map(|r| r.ratio_attacker_vs_max_process)
            .fold(f64::MAX, f64::min),
        attacker_ratio_mean: mean(
            runs.iter()
                .map(|r| r.ratio_attacker_vs_max_process)
                .collect(),
        ),
    };
    if !cli.quiet {
        eprintln!(
            "{} reps: adversary/process ratio mean {:.2} (min {:.2})",
            args.reps, aggregate.adversary_ratio_mean, aggregate.adversary_ratio_min
        );
    }
    let out = BenchReport {
        spec_version: SPEC_VERSION,
        command: "bench",
        s: args.s,
        ell: 1u64 << args.s,
        m: args.m,
        k: args.k,
        oracle_mode: kind,
        master_seed: cli.seed,
        runs,
        aggregate,
    };
    if let Some(path) = &args.report {
        write_json(path, &out)?;
    }
    if cli.csv {
        println!("rep,threshold,crossing,max_process_queries,adversary_queries,attacker_tau,ratio_adversary,ratio_attacker");
        for r in &out.runs {
            println!(
                "{},{},{},{},{},{},{},{}",
                r.rep,
                r.threshold,
                r.crossing,
                r.process_oracle_queries.iter().max().unwrap_or(&0),
                r.adversary_oracle_queries,
                r.attacker_tau,
                r.ratio_adversary_vs_max_process,
                r.ratio_attacker_vs_max_process
            );
        }
        return Ok(());
    }
    emit_json(&out)
}
