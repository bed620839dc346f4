//! Monte Carlo experiment engine behind the `qsslab` command line: single
//! seeded executions, repeated attack trials with Wilson intervals, parameter
//! sweeps and code search.

pub mod cli;
mod stats;
mod sweep;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use stats::{fit_line, wilson, Estimate, LineFit};
pub use sweep::{code_pool, default_weight, rows_to_csv, sweep, SweepParameter, SweepRow, SweepSpec};

use crate::adversary::{audit, build_roster, check_pairing, CheaterLog, Placement, StrategySpec};
use crate::codes::{CodeError, CodeParams};
use crate::protocol::{run_protocol, ProtocolConfig, ProtocolError, SecureCode, Transcript, ValueOrder, Variant};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Process exit status: 2 when a code search came up empty, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Code(CodeError::SearchExhausted { .. })
            | HarnessError::Protocol(ProtocolError::Code(CodeError::SearchExhausted { .. })) => 2,
            _ => 1,
        }
    }
}

/// Random stream of one trial: the base seed selects the key and the trial
/// index the stream, so trials never share state.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// One attack experiment: a protocol configuration, who cheats and where,
/// and how many independent executions to run.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub protocol: ProtocolConfig,
    pub strategy: StrategySpec,
    pub placement: Placement,
    pub trials: usize,
    /// Codes drawn in the agreement phase; trial `t` uses entry
    /// `t mod len`. Empty means the protocol's own code.
    pub code_pool: Vec<SecureCode>,
    /// Record wall-clock time in the report.
    pub timing: bool,
}

impl Experiment {
    pub fn new(protocol: ProtocolConfig, strategy: StrategySpec, trials: usize) -> Self {
        let placement = Placement::default_for(strategy, None, protocol.participants);
        Experiment { protocol, strategy, placement, trials, code_pool: Vec::new(), timing: false }
    }

    pub fn with_cheater(mut self, cheater: usize) -> Self {
        self.placement = Placement::default_for(self.strategy, Some(cheater), self.protocol.participants);
        self
    }

    pub fn with_honest(mut self, a: usize, b: usize) -> Self {
        self.placement.honest = (a, b);
        self
    }

    /// Protocol configuration of trial `trial`.
    pub fn protocol_for(&self, trial: usize) -> ProtocolConfig {
        let mut protocol = self.protocol.clone();
        if !self.code_pool.is_empty() {
            let code = self.code_pool[trial % self.code_pool.len()].clone();
            protocol.runs = code.code.n();
            protocol.code = Some(code);
        }
        protocol
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.code_pool.is_empty() {
            self.protocol.validate()?;
        }
        for trial in 0..self.code_pool.len() {
            self.protocol_for(trial).validate()?;
        }
        check_pairing(self.strategy, &self.protocol, &self.placement)?;
        if self.trials == 0 {
            return Err(HarnessError::Config("need at least one trial".into()));
        }
        Ok(())
    }
}

/// Everything one trial leaves behind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub transcript: Transcript,
    pub log: Option<CheaterLog>,
}

/// Runs trial `trial` of `exp`.
pub fn run_trial(exp: &Experiment, trial: usize) -> Result<TrialRecord, HarnessError> {
    let protocol = exp.protocol_for(trial);
    let mut rng = trial_rng(protocol.seed, trial as u64);
    let mut roster = build_roster(exp.strategy, &protocol, &exp.placement)?;
    let transcript = run_protocol(&protocol, &mut roster.strategies, &mut roster.taps, &mut rng)?;
    let log = roster.cheater_log().cloned();
    Ok(TrialRecord { trial, transcript, log })
}

/// Event counts of one or more trials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub trials: u64,
    pub passed: u64,
    pub runs: u64,
    pub valid: u64,
    pub checked_valid: u64,
    pub detected_valid: u64,
    pub audited: u64,
    pub recovered: u64,
    pub upstream: u64,
    pub downstream: u64,
    pub case_two: u64,
    pub guessed: u64,
    pub guessed_detected: u64,
    pub both_z: u64,
    pub both_z_detected: u64,
    pub bit_turns: u64,
    pub safe_turns: u64,
}

impl std::ops::AddAssign for Tally {
    fn add_assign(&mut self, o: Tally) {
        self.trials += o.trials;
        self.passed += o.passed;
        self.runs += o.runs;
        self.valid += o.valid;
        self.checked_valid += o.checked_valid;
        self.detected_valid += o.detected_valid;
        self.audited += o.audited;
        self.recovered += o.recovered;
        self.upstream += o.upstream;
        self.downstream += o.downstream;
        self.case_two += o.case_two;
        self.guessed += o.guessed;
        self.guessed_detected += o.guessed_detected;
        self.both_z += o.both_z;
        self.both_z_detected += o.both_z_detected;
        self.bit_turns += o.bit_turns;
        self.safe_turns += o.safe_turns;
    }
}

impl Tally {
    /// Counts the events of one trial. Only the transcript and the cheater's
    /// own log are consulted.
    pub fn of(record: &TrialRecord, placement: &Placement) -> Tally {
        let t = &record.transcript;
        let failing: &[usize] = t.verdict(2).map(|v| v.failing_runs.as_slice()).unwrap_or(&[]);
        let mut tally = Tally { trials: 1, passed: u64::from(t.passed()), ..Default::default() };
        for run in &t.runs {
            tally.runs += 1;
            let detected = failing.contains(&run.idx);
            if run.valid {
                tally.valid += 1;
                if run.checked {
                    tally.checked_valid += 1;
                    tally.detected_valid += u64::from(detected);
                }
            }
            let (a, b) = placement.honest;
            if t.config.variant == Variant::Secure
                && a != b
                && run.announced_bit(a) == Some(true)
                && run.announced_bit(b) == Some(true)
            {
                tally.both_z += 1;
                tally.both_z_detected += u64::from(detected);
            }
        }
        if let Some(log) = &record.log {
            let report = audit(log, t);
            tally.audited = report.valid_runs as u64;
            tally.recovered = report.recovered as u64;
            tally.upstream = report.upstream_recovered as u64;
            tally.downstream = report.downstream_recovered as u64;
            tally.case_two = report.case_two_runs as u64;
            tally.guessed = report.guessed_runs as u64;
            tally.guessed_detected = report.guessed_detected as u64;
            tally.bit_turns = log.bit_decisions.len() as u64;
            tally.safe_turns = log.bit_decisions.iter().filter(|d| d.safe).count() as u64;
        }
        tally
    }
}

fn estimate_if(successes: u64, total: u64, present: bool) -> Option<Estimate> {
    (present && total > 0).then(|| Estimate::new(successes, total))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub variant: Variant,
    pub participants: usize,
    pub runs: usize,
    pub check_fraction: f64,
    pub seed: u64,
    pub value_order: ValueOrder,
    pub strategy: String,
    pub cheater: usize,
    pub honest: (usize, usize),
    pub trials: usize,
    /// Checked valid runs failing a check, per checked valid run.
    pub detection_rate: Estimate,
    pub valid_run_rate: Estimate,
    /// Executions in which every check passed.
    pub pass_probability: Estimate,
    /// Valid runs in which the adversary knew both neighbouring phases.
    pub secret_recovery_rate: Option<Estimate>,
    pub upstream_recovery_rate: Option<Estimate>,
    pub downstream_recovery_rate: Option<Estimate>,
    /// Runs where every upstream class was known at the cheater's class turn.
    pub case_two_rate: Option<Estimate>,
    /// Detected runs per forced guess.
    pub epsilon_estimate: Option<Estimate>,
    /// Detected runs per run where both honest parties acted with class Z.
    pub both_z_detection_rate: Option<Estimate>,
    /// Bit turns at which an honest party was known to act X or Y.
    pub safe_turn_rate: Option<Estimate>,
    pub elapsed_ms: Option<f64>,
}

impl AttackReport {
    pub fn from_tally(exp: &Experiment, tally: &Tally) -> Self {
        let p = &exp.protocol;
        let logged = exp.strategy != StrategySpec::Honest;
        let secure = p.variant == Variant::Secure;
        AttackReport {
            variant: p.variant,
            participants: p.participants,
            runs: p.runs,
            check_fraction: p.check_fraction,
            seed: p.seed,
            value_order: p.value_order,
            strategy: exp.strategy.to_string(),
            cheater: exp.placement.cheater,
            honest: exp.placement.honest,
            trials: exp.trials,
            detection_rate: Estimate::new(tally.detected_valid, tally.checked_valid),
            valid_run_rate: Estimate::new(tally.valid, tally.runs),
            pass_probability: Estimate::new(tally.passed, tally.trials),
            secret_recovery_rate: estimate_if(tally.recovered, tally.audited, logged),
            upstream_recovery_rate: estimate_if(tally.upstream, tally.audited, logged),
            downstream_recovery_rate: estimate_if(tally.downstream, tally.audited, logged),
            case_two_rate: estimate_if(tally.case_two, tally.runs, logged),
            epsilon_estimate: estimate_if(tally.guessed_detected, tally.guessed, secure),
            both_z_detection_rate: estimate_if(tally.both_z_detected, tally.both_z, secure),
            safe_turn_rate: estimate_if(tally.safe_turns, tally.bit_turns, secure),
            elapsed_ms: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Runs every trial of `exp` and reports. Trials run in parallel and are
/// reduced in trial order.
pub fn attack(exp: &Experiment) -> Result<AttackReport, HarnessError> {
    exp.validate()?;
    let start = Instant::now();
    let tallies: Vec<Tally> = (0..exp.trials)
        .into_par_iter()
        .map(|trial| run_trial(exp, trial).map(|r| Tally::of(&r, &exp.placement)))
        .collect::<Result<_, _>>()?;
    let mut total = Tally::default();
    for t in tallies {
        total += t;
    }
    let mut report = AttackReport::from_tally(exp, &total);
    if exp.timing {
        report.elapsed_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(report)
}

/// Rebuilds a report from stored trial records.
pub fn report_from_records(exp: &Experiment, records: &[TrialRecord]) -> AttackReport {
    let mut total = Tally::default();
    for r in records {
        total += Tally::of(r, &exp.placement);
    }
    AttackReport::from_tally(exp, &total)
}

/// Headline numbers of a single execution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub runs: usize,
    pub valid_runs: usize,
    pub checked_runs: usize,
    pub passed: bool,
    pub verdicts: Vec<(u8, bool)>,
    /// `(run, target, recovered, truth)` of the reconstruction demo.
    pub reconstruction: Option<(usize, usize, String, Option<String>)>,
}

impl SimulationSummary {
    pub fn of(t: &Transcript) -> Self {
        SimulationSummary {
            runs: t.runs.len(),
            valid_runs: t.runs.iter().filter(|r| r.valid).count(),
            checked_runs: t.runs.iter().filter(|r| r.checked).count(),
            passed: t.passed(),
            verdicts: t.verdicts.iter().map(|v| (v.check, v.pass)).collect(),
            reconstruction: t
                .reconstructions
                .first()
                .map(|r| (r.run, r.target, r.recovered.to_string(), r.truth.map(|p| p.to_string()))),
        }
    }
}

impl std::fmt::Display for SimulationSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "runs: {}", self.runs)?;
        writeln!(f, "valid runs: {} ({:.4})", self.valid_runs, self.valid_runs as f64 / self.runs as f64)?;
        writeln!(f, "checked runs: {}", self.checked_runs)?;
        for (check, pass) in &self.verdicts {
            writeln!(f, "check {check}: {}", if *pass { "pass" } else { "FAIL" })?;
        }
        match &self.reconstruction {
            Some((run, target, recovered, truth)) => writeln!(
                f,
                "reconstruction: run {run}, target R{target}, recovered {recovered}, truth {}",
                truth.as_deref().unwrap_or("-")
            ),
            None => writeln!(f, "reconstruction: no eligible run"),
        }
    }
}

/// One execution of `exp` under its base seed.
pub fn simulate(exp: &Experiment) -> Result<(Transcript, SimulationSummary), HarnessError> {
    exp.validate()?;
    let record = run_trial(exp, 0)?;
    let summary = SimulationSummary::of(&record.transcript);
    Ok((record.transcript, summary))
}

/// Parameters of a code choice, printable and serialisable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeReport {
    pub n: usize,
    pub w: usize,
    pub k: Option<usize>,
    pub d: Option<usize>,
    pub d_lower: String,
    pub d_upper: String,
    pub p1: String,
    pub p2: String,
    pub n_prime: Option<String>,
    pub d_exceeds_n_prime: Option<bool>,
    pub w_recommended: bool,
}

impl CodeReport {
    pub fn new(n: usize, w: usize, k: Option<usize>, d: Option<usize>) -> Self {
        use crate::codes::{distance_lower_bound, distance_upper_bound, p1, p2};
        let params = d.map(|d| CodeParams::new(n, w, d));
        CodeReport {
            n,
            w,
            k,
            d,
            d_lower: distance_lower_bound(n, w).to_string(),
            d_upper: distance_upper_bound(n, w).to_string(),
            p1: p1(n, w).to_string(),
            p2: p2(n, w).to_string(),
            n_prime: params.as_ref().map(|p| p.n_prime.to_string()),
            d_exceeds_n_prime: params.as_ref().map(|p| p.distance_exceeds_n_prime()),
            w_recommended: 5 * w > 3 * n,
        }
    }
}

impl std::fmt::Display for CodeReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        use crate::codes::to_f64;
        let show = |o: Option<usize>| o.map_or("-".to_string(), |v| v.to_string());
        writeln!(f, "n = {}, w = {}, k = {}, d = {}", self.n, self.w, show(self.k), show(self.d))?;
        writeln!(f, "d range: ({}, {})", self.d_lower, self.d_upper)?;
        let frac = |s: &str| s.parse().map(to_f64).unwrap_or(f64::NAN);
        writeln!(f, "p1 = {} ({})", self.p1, frac(&self.p1))?;
        writeln!(f, "p2 = {} ({})", self.p2, frac(&self.p2))?;
        if let Some(np) = &self.n_prime {
            writeln!(f, "n' = {} ({})", np, frac(np))?;
        }
        if let Some(ok) = self.d_exceeds_n_prime {
            writeln!(f, "d > n': {ok}")?;
        }
        if !self.w_recommended {
            writeln!(f, "warning: w <= 0.6 n")?;
        }
        Ok(())
    }
}
