//! End-to-end runs, parameter sweeps and result export.

use std::fmt;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coalition::{
    self, default_visit_order, exhaustive_optimum, form_coalitions, is_nash_stable, CoalitionError,
    FlowId, Partition, RateTable, Side, EXHAUSTIVE_CAP,
};
use crate::config::ConfigError;
use crate::link_model::{db_to_linear, dbm_to_watts};
use crate::scenario::{
    associate_with_rates, generate_scenario, initial_partition, Association, Policy, RelayMode,
    Scenario, ScenarioConfig, ScenarioError,
};
use crate::scheduler::{
    objective_value, schedule_greedy, schedule_oracle, schedule_with, slot_demand, Schedule,
    ScheduleError, ScheduleOptions, SlotDemand,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("resource cap: {0}")]
    ResourceCap(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("export failed: {0}")]
    Export(String),
}

impl ExperimentError {
    /// Process exit code: 2 for resource-cap refusals, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::ResourceCap(_) => 2,
            ExperimentError::Scenario(ScenarioError::Coalition(CoalitionError::TooManyFlows { .. })) => 2,
            ExperimentError::Schedule(ScheduleError::TooManyFlows { .. }) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub policy: Policy,
    pub parameter: String,
    pub value: f64,
    pub seed: u64,
    pub sum_rate_bps: f64,
    pub satisfied: usize,
    pub expected_satisfied: f64,
    pub switch_count: usize,
    pub wall_time_s: f64,
}

/// Association followed by slot demands and the superframe schedule.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub association: Association,
    pub demands: Vec<SlotDemand>,
    pub schedule: Schedule,
    pub expected_satisfied: f64,
}

pub fn evaluate(
    association: Association,
    qos: &[f64],
    slots_per_frame: u64,
    blockage_prob: f64,
    opts: ScheduleOptions,
) -> Result<Evaluation, ExperimentError> {
    let rates = association.assigned_rates();
    let demands = rates
        .iter()
        .zip(qos)
        .enumerate()
        .map(|(i, (&r, &q))| slot_demand(FlowId(i), q, r, slots_per_frame))
        .collect::<Result<Vec<_>, _>>()?;
    let schedule = schedule_with(&demands, slots_per_frame, opts);
    let expected_satisfied = objective_value(&schedule, blockage_prob)?;
    Ok(Evaluation { association, demands, schedule, expected_satisfied })
}

fn check_oracle_cap(policy: Policy, n: usize) -> Result<(), ExperimentError> {
    if policy == Policy::Oracle && n > EXHAUSTIVE_CAP {
        return Err(ExperimentError::ResourceCap(format!(
            "ORACLE needs 2^{n} evaluations; at most {EXHAUSTIVE_CAP} flows are allowed"
        )));
    }
    Ok(())
}

/// Rate tables and starting partition shared by every policy on one scenario.
struct Prepared {
    scenario: Scenario,
    fd: RateTable,
    hd: RateTable,
    initial: Partition,
}

impl Prepared {
    fn new(config: &ScenarioConfig, seed: u64) -> Result<Self, ExperimentError> {
        let scenario = generate_scenario(config, seed)?;
        let fd = scenario.flow_rates(RelayMode::FullDuplex)?;
        let hd = scenario.flow_rates(RelayMode::HalfDuplex)?;
        let initial = initial_partition(&scenario);
        Ok(Self { scenario, fd, hd, initial })
    }

    fn run(&self, policy: Policy, opts: ScheduleOptions) -> Result<(Evaluation, f64), ExperimentError> {
        let start = Instant::now();
        let table = match policy.relay_mode() {
            RelayMode::FullDuplex => self.fd.clone(),
            RelayMode::HalfDuplex => self.hd.clone(),
        };
        let association = associate_with_rates(table, policy, self.initial.clone())?;
        let s = &self.scenario;
        let eval = evaluate(association, &s.qos(), s.slots_per_frame, s.blockage_prob, opts)?;
        Ok((eval, start.elapsed().as_secs_f64()))
    }

    fn record(&self, policy: Policy, parameter: &str, value: f64, opts: ScheduleOptions) -> Result<RunRecord, ExperimentError> {
        let (eval, wall) = self.run(policy, opts)?;
        Ok(RunRecord {
            policy,
            parameter: parameter.to_string(),
            value,
            seed: self.scenario.seed,
            sum_rate_bps: eval.association.sum_rate,
            satisfied: eval.schedule.satisfied_count(),
            expected_satisfied: eval.expected_satisfied,
            switch_count: eval.association.switch_count(),
            wall_time_s: wall,
        })
    }
}

/// Generate, associate, schedule and score one scenario.
pub fn run_single(
    config: &ScenarioConfig,
    policy: Policy,
    seed: u64,
    opts: ScheduleOptions,
) -> Result<RunRecord, ExperimentError> {
    check_oracle_cap(policy, config.flow_count)?;
    Prepared::new(config, seed)?.record(policy, "none", 0.0, opts)
}

/// Like [`run_single`] but returns the full evaluation (partition, demands,
/// schedule) instead of a summary record.
pub fn run_detailed(
    config: &ScenarioConfig,
    policy: Policy,
    seed: u64,
    opts: ScheduleOptions,
) -> Result<(Scenario, Evaluation), ExperimentError> {
    check_oracle_cap(policy, config.flow_count)?;
    let prepared = Prepared::new(config, seed)?;
    let (eval, _) = prepared.run(policy, opts)?;
    Ok((prepared.scenario, eval))
}

/// Per-flow association and the schedule document for one evaluated run.
pub fn run_report(scenario: &Scenario, eval: &Evaluation) -> serde_json::Value {
    let assigned = eval.association.assigned_rates();
    let flows: Vec<serde_json::Value> = scenario
        .flows
        .iter()
        .zip(&eval.demands)
        .zip(eval.association.partition.assignments())
        .zip(assigned)
        .map(|(((flow, demand), side), rate)| {
            let user = scenario.user_positions[flow.user_index];
            serde_json::json!({
                "flow_id": flow.id,
                "x_m": user.x,
                "y_m": user.y,
                "qos_bps": flow.qos_bps,
                "side": side,
                "rate_bps": rate,
                "required_slots": demand.required.slots(),
            })
        })
        .collect();
    serde_json::json!({
        "policy": eval.association.policy,
        "seed": scenario.seed,
        "sum_rate_bps": eval.association.sum_rate,
        "switch_count": eval.association.switch_count(),
        "satisfied": eval.schedule.satisfied_count(),
        "expected_satisfied": eval.expected_satisfied,
        "flows": flows,
        "schedule": eval.schedule.to_json(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Residual self-interference level, values in dB.
    SiLevel,
    BsShare,
    /// Distance of the relay along the track from the BS, in meters.
    MrDisplacement,
    /// Transmit power, values in dBm.
    TxPower,
    FlowCount,
    Slots,
}

impl SweepParam {
    pub const ALL: [SweepParam; 6] = [
        SweepParam::SiLevel,
        SweepParam::BsShare,
        SweepParam::MrDisplacement,
        SweepParam::TxPower,
        SweepParam::FlowCount,
        SweepParam::Slots,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::SiLevel => "si_level_db",
            SweepParam::BsShare => "bs_share",
            SweepParam::MrDisplacement => "mr_displacement_m",
            SweepParam::TxPower => "tx_power_dbm",
            SweepParam::FlowCount => "flow_count",
            SweepParam::Slots => "slots",
        }
    }

    /// Default x-axis for the parameter.
    pub fn default_values(self) -> Vec<f64> {
        let steps = |lo: f64, hi: f64, step: f64| -> Vec<f64> {
            let n = ((hi - lo) / step).round() as usize;
            (0..=n).map(|k| lo + step * k as f64).collect()
        };
        match self {
            SweepParam::SiLevel => steps(-150.0, -110.0, 5.0),
            SweepParam::BsShare => (1..=9).map(|k| k as f64 / 10.0).collect(),
            SweepParam::MrDisplacement => steps(0.0, 300.0, 25.0),
            SweepParam::TxPower => steps(10.0, 40.0, 5.0),
            SweepParam::FlowCount => steps(20.0, 55.0, 5.0),
            SweepParam::Slots => vec![128.0, 256.0, 512.0, 1024.0, 2048.0, 4096.0, 8192.0],
        }
    }

    /// Copy of `base` with this parameter set to `value`.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig, ExperimentError> {
        let mut cfg = base.clone();
        let as_count = |v: f64| -> Result<u64, ExperimentError> {
            if v >= 0.0 && v.fract() == 0.0 && v.is_finite() {
                Ok(v as u64)
            } else {
                Err(ExperimentError::InvalidSpec(format!("{} needs whole numbers, got {v}", self.as_str())))
            }
        };
        match self {
            SweepParam::SiLevel => cfg.radio.si_level = db_to_linear(value),
            SweepParam::BsShare => cfg.radio = cfg.radio.with_bs_share(value),
            SweepParam::MrDisplacement => cfg = cfg.with_mr_displacement(value),
            SweepParam::TxPower => cfg.radio.tx_power_w = dbm_to_watts(value),
            SweepParam::FlowCount => cfg.flow_count = as_count(value)? as usize,
            SweepParam::Slots => cfg.slots_per_frame = as_count(value)?,
        }
        Ok(cfg)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        let found = match key.as_str() {
            "si_level" | "si_level_db" | "beta" => SweepParam::SiLevel,
            "bs_share" | "a" => SweepParam::BsShare,
            "mr_displacement" | "mr_displacement_m" | "displacement" => SweepParam::MrDisplacement,
            "tx_power" | "tx_power_dbm" | "pt" => SweepParam::TxPower,
            "flow_count" | "flows" | "n" => SweepParam::FlowCount,
            "slots" | "slots_per_frame" | "m" => SweepParam::Slots,
            _ => return Err(format!("unknown sweep parameter '{s}'")),
        };
        Ok(found)
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    pub parameter: SweepParam,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub policies: Vec<Policy>,
    pub schedule: ScheduleOptions,
}

impl SweepSpec {
    pub fn new(base: ScenarioConfig, parameter: SweepParam, seeds: usize) -> Self {
        Self {
            base,
            parameter,
            values: parameter.default_values(),
            seeds: (0..seeds as u64).collect(),
            policies: vec![Policy::CgFd, Policy::CgHd, Policy::Fbsc, Policy::Fmrc],
            schedule: ScheduleOptions::default(),
        }
    }

    /// Checks the spec and builds one config per value, before any run.
    fn configs(&self) -> Result<Vec<(f64, ScenarioConfig)>, ExperimentError> {
        if self.values.is_empty() || self.seeds.is_empty() || self.policies.is_empty() {
            return Err(ExperimentError::InvalidSpec("values, seeds and policies must all be non-empty".into()));
        }
        let configs = self
            .values
            .iter()
            .map(|&v| Ok((v, self.parameter.apply(&self.base, v)?)))
            .collect::<Result<Vec<_>, ExperimentError>>()?;
        let max_n = configs.iter().map(|(_, c)| c.flow_count).max().unwrap_or(0);
        if self.policies.contains(&Policy::Oracle) {
            check_oracle_cap(Policy::Oracle, max_n)?;
        }
        for (_, c) in &configs {
            c.validate()?;
        }
        Ok(configs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub policy: Policy,
    pub parameter: String,
    pub value: f64,
    pub runs: usize,
    pub mean_sum_rate_bps: f64,
    pub mean_satisfied: f64,
    pub mean_expected_satisfied: f64,
    pub mean_switch_count: f64,
    pub mean_wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub raw: Vec<RunRecord>,
    pub summary: Vec<Summary>,
}

impl SweepResult {
    pub fn mean(&self, policy: Policy, value: f64) -> Option<&Summary> {
        self.summary.iter().find(|s| s.policy == policy && s.value == value)
    }

    /// Mean sum rate per value for one policy, in sweep order.
    pub fn curve(&self, policy: Policy) -> Vec<(f64, f64)> {
        self.summary
            .iter()
            .filter(|s| s.policy == policy)
            .map(|s| (s.value, s.mean_sum_rate_bps))
            .collect()
    }
}

fn record_order(a: &RunRecord, b: &RunRecord) -> std::cmp::Ordering {
    a.policy
        .cmp(&b.policy)
        .then(a.value.total_cmp(&b.value))
        .then(a.seed.cmp(&b.seed))
}

/// Full factorial over values × seeds × policies. Every policy sees the same
/// scenario for a given (value, seed).
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, ExperimentError> {
    let configs = spec.configs()?;
    let jobs: Vec<(f64, &ScenarioConfig, u64)> = configs
        .iter()
        .flat_map(|(v, c)| spec.seeds.iter().map(move |&s| (*v, c, s)))
        .collect();
    let name = spec.parameter.as_str();
    let nested: Vec<Vec<RunRecord>> = jobs
        .par_iter()
        .map(|&(value, cfg, seed)| {
            let prepared = Prepared::new(cfg, seed)?;
            spec.policies
                .iter()
                .map(|&p| prepared.record(p, name, value, spec.schedule))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, ExperimentError>>()?;
    let mut raw: Vec<RunRecord> = nested.into_iter().flatten().collect();
    raw.sort_by(record_order);
    let summary = summarize(&raw);
    Ok(SweepResult { raw, summary })
}

/// Arithmetic mean of each metric per (policy, value).
pub fn summarize(records: &[RunRecord]) -> Vec<Summary> {
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by(|a, b| record_order(a, b));
    let mut out: Vec<Summary> = Vec::new();
    for group in sorted.chunk_by(|a, b| a.policy == b.policy && a.value.total_cmp(&b.value).is_eq()) {
        let n = group.len() as f64;
        let mean = |f: &dyn Fn(&RunRecord) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
        out.push(Summary {
            policy: group[0].policy,
            parameter: group[0].parameter.clone(),
            value: group[0].value,
            runs: group.len(),
            mean_sum_rate_bps: mean(&|r| r.sum_rate_bps),
            mean_satisfied: mean(&|r| r.satisfied as f64),
            mean_expected_satisfied: mean(&|r| r.expected_satisfied),
            mean_switch_count: mean(&|r| r.switch_count as f64),
            mean_wall_time_s: mean(&|r| r.wall_time_s),
        });
    }
    out
}

/// Relative gain (reference − other) / other of mean sum rates, per value.
pub fn relative_gain(result: &SweepResult, reference: Policy, other: Policy) -> Vec<(f64, f64)> {
    result
        .curve(reference)
        .into_iter()
        .filter_map(|(v, r)| result.mean(other, v).map(|o| (v, (r - o.mean_sum_rate_bps) / o.mean_sum_rate_bps)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format '{s}' (expected csv or json)")),
        }
    }
}

pub const RECORD_COLUMNS: [&str; 9] = [
    "policy",
    "parameter",
    "value",
    "seed",
    "sum_rate_bps",
    "satisfied",
    "expected_satisfied",
    "switch_count",
    "wall_time_s",
];

pub const SUMMARY_COLUMNS: [&str; 9] = [
    "policy",
    "parameter",
    "value",
    "runs",
    "mean_sum_rate_bps",
    "mean_satisfied",
    "mean_expected_satisfied",
    "mean_switch_count",
    "mean_wall_time_s",
];

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct SigDigits;

impl serde_json::ser::Formatter for SigDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }
}

fn write_json<T: Serialize, W: Write>(rows: &[T], writer: W) -> Result<(), ExperimentError> {
    let mut ser = serde_json::Serializer::with_formatter(writer, SigDigits);
    rows.serialize(&mut ser).map_err(|e| ExperimentError::Export(e.to_string()))?;
    let mut w = ser.into_inner();
    w.write_all(b"\n").map_err(|e| ExperimentError::Export(e.to_string()))
}

fn write_csv<W: Write>(header: &[&str], rows: impl Iterator<Item = Vec<String>>, writer: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| ExperimentError::Export(e.to_string());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| ExperimentError::Export(e.to_string()))
}

pub fn write_records<W: Write>(records: &[RunRecord], format: Format, writer: W) -> Result<(), ExperimentError> {
    if records.is_empty() {
        return Err(ExperimentError::Export("no records to export".into()));
    }
    match format {
        Format::Json => write_json(records, writer),
        Format::Csv => write_csv(
            &RECORD_COLUMNS,
            records.iter().map(|r| {
                vec![
                    r.policy.to_string(),
                    r.parameter.clone(),
                    fmt_f64(r.value),
                    r.seed.to_string(),
                    fmt_f64(r.sum_rate_bps),
                    r.satisfied.to_string(),
                    fmt_f64(r.expected_satisfied),
                    r.switch_count.to_string(),
                    fmt_f64(r.wall_time_s),
                ]
            }),
            writer,
        ),
    }
}

pub fn write_summary<W: Write>(summary: &[Summary], format: Format, writer: W) -> Result<(), ExperimentError> {
    if summary.is_empty() {
        return Err(ExperimentError::Export("no summary rows to export".into()));
    }
    match format {
        Format::Json => write_json(summary, writer),
        Format::Csv => write_csv(
            &SUMMARY_COLUMNS,
            summary.iter().map(|s| {
                vec![
                    s.policy.to_string(),
                    s.parameter.clone(),
                    fmt_f64(s.value),
                    s.runs.to_string(),
                    fmt_f64(s.mean_sum_rate_bps),
                    fmt_f64(s.mean_satisfied),
                    fmt_f64(s.mean_expected_satisfied),
                    fmt_f64(s.mean_switch_count),
                    fmt_f64(s.mean_wall_time_s),
                ]
            }),
            writer,
        ),
    }
}

fn create(path: &Path) -> Result<io::BufWriter<std::fs::File>, ExperimentError> {
    std::fs::File::create(path)
        .map(io::BufWriter::new)
        .map_err(|source| ExperimentError::Io { path: path.display().to_string(), source })
}

pub fn export(records: &[RunRecord], format: Format, path: &Path) -> Result<(), ExperimentError> {
    write_records(records, format, create(path)?)
}

pub fn export_summary(summary: &[Summary], format: Format, path: &Path) -> Result<(), ExperimentError> {
    write_summary(summary, format, create(path)?)
}

/// Parses records written by [`write_records`] in JSON form.
pub fn read_records_json(text: &str) -> Result<Vec<RunRecord>, ExperimentError> {
    serde_json::from_str(text).map_err(|e| ExperimentError::Export(e.to_string()))
}

/// Five flows A..E needing 8, 3, 1, 2 and 4 of 10 slots.
pub const WORKED_EXAMPLE_SLOTS: [u64; 5] = [8, 3, 1, 2, 4];
pub const WORKED_EXAMPLE_NAMES: [&str; 5] = ["A", "B", "C", "D", "E"];

#[derive(Debug, Clone)]
pub struct FixtureReport {
    pub sorted: Evaluation,
    pub unsorted: Evaluation,
}

/// Runs the worked example through the regular pipeline: every flow gets a
/// 1 Gb/s direct link and no relay path, and its QoS is set so the slot
/// demand comes out at the listed value.
pub fn worked_example() -> Result<FixtureReport, ExperimentError> {
    const M: u64 = 10;
    let n = WORKED_EXAMPLE_SLOTS.len();
    let rate = 1e9;
    let qos: Vec<f64> = WORKED_EXAMPLE_SLOTS.iter().map(|&d| rate * d as f64 / M as f64).collect();
    let table = RateTable::new(vec![rate; n], vec![0.0; n]).map_err(ScenarioError::from)?;
    let run = |opts| -> Result<Evaluation, ExperimentError> {
        let assoc = associate_with_rates(table.clone(), Policy::CgFd, Partition::all_on(Side::Mr, n))?;
        evaluate(assoc, &qos, M, 0.0, opts)
    };
    Ok(FixtureReport {
        sorted: run(ScheduleOptions::default())?,
        unsorted: run(ScheduleOptions { sort: false, top_up: false })?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Quick oracle and property checks on random instances: greedy scheduling
/// against subset enumeration, and the coalition game against exhaustive
/// search and the Nash-stability test.
pub fn verify_suite(instances: usize, base_seed: u64) -> Result<Vec<Check>, ExperimentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    let mut checks = Vec::new();

    let mut mismatches = 0;
    for _ in 0..instances {
        let n = rng.random_range(1..=16usize);
        let m = rng.random_range(1..=64u64);
        let demands: Vec<SlotDemand> = (0..n)
            .map(|i| {
                let rate = rng.random_range(1e8..5e9);
                let qos = rng.random_range(0.0..rate);
                slot_demand(FlowId(i), qos, rate, m)
            })
            .collect::<Result<_, _>>()?;
        if schedule_greedy(&demands, m).satisfied_count() != schedule_oracle(&demands, m)? {
            mismatches += 1;
        }
    }
    checks.push(Check {
        name: "greedy schedule matches subset oracle",
        passed: mismatches == 0,
        detail: format!("{mismatches} mismatches over {instances} instances"),
    });

    let (mut above, mut unstable, mut not_increasing) = (0, 0, 0);
    for k in 0..instances {
        let cfg = ScenarioConfig { flow_count: 1 + k % 8, ..Default::default() };
        let seed = base_seed.wrapping_add(k as u64);
        let prepared = Prepared::new(&cfg, seed)?;
        let n = prepared.fd.len();
        let game = form_coalitions(&prepared.fd, prepared.initial.clone(), &default_visit_order(n))
            .map_err(ScenarioError::from)?;
        let (_, best) = exhaustive_optimum(&prepared.fd).map_err(ScenarioError::from)?;
        if game.sum_rate > best {
            above += 1;
        }
        if !is_nash_stable(&game.final_partition, &prepared.fd).map_err(ScenarioError::from)? {
            unstable += 1;
        }
        if game.trajectory.windows(2).any(|w| w[1] <= w[0]) {
            not_increasing += 1;
        }
    }
    checks.push(Check {
        name: "coalition game never beats exhaustive optimum",
        passed: above == 0,
        detail: format!("{above} violations over {instances} scenarios"),
    });
    checks.push(Check {
        name: "coalition game ends Nash-stable",
        passed: unstable == 0,
        detail: format!("{unstable} unstable outcomes over {instances} scenarios"),
    });
    checks.push(Check {
        name: "system rate strictly increases per switch",
        passed: not_increasing == 0,
        detail: format!("{not_increasing} non-monotone trajectories"),
    });

    let cfg = ScenarioConfig::default();
    let a = run_single(&cfg, Policy::CgFd, base_seed, ScheduleOptions::default())?;
    let b = run_single(&cfg, Policy::CgFd, base_seed, ScheduleOptions::default())?;
    let same = a.sum_rate_bps == b.sum_rate_bps && a.satisfied == b.satisfied && a.switch_count == b.switch_count;
    checks.push(Check {
        name: "runs are deterministic per seed",
        passed: same,
        detail: format!("sum rate {} vs {}", a.sum_rate_bps, b.sum_rate_bps),
    });
    Ok(checks)
}

/// Total rate of `partition`; re-exported for callers that only hold an
/// [`Association`].
pub fn partition_rate(partition: &Partition, rates: &RateTable) -> Result<f64, ExperimentError> {
    coalition::total_rate(partition, rates).map_err(|e| ExperimentError::Scenario(e.into()))
}
