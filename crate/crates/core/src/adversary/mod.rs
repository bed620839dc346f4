//! Participant strategies: the honest baseline, intercept-resend and link
//! eavesdropping, the EPR-substitution cheaters A and B, collusion against
//! the reordered variants, and the coherent cheater against the secure
//! variant. Every cheater keeps a [`CheaterLog`] that [`audit`] checks
//! against the ground truth recorded in the transcript.

mod epr;
mod honest;
mod intercept;
mod secure;

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use epr::{DeferredB, ParityRelay, StrategyA, StrategyB};
pub use honest::{Honest, Sharing};
pub use intercept::{Intercept, InterceptTap};
pub use secure::SecureCheater;

use crate::protocol::{
    ActionClass, ActionRecord, LinkTap, ProtocolConfig, ProtocolError, Strategy, Transcript, Variant,
};
use crate::quantum::{Basis, PhaseAngle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// Phase of the qubit arriving at the cheater.
    Upstream,
    /// Phase of the qubit leaving the cheater.
    Downstream,
}

/// When an inference became available.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceStage {
    Receive,
    Bit,
    Class,
    Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inference {
    pub run: usize,
    pub quantity: Quantity,
    pub value: PhaseAngle,
    pub stage: InferenceStage,
}

/// One bit-stage decision of the secure cheater.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitDecision {
    pub run: usize,
    /// An honest party was known to apply X or Y in this run.
    pub safe: bool,
    /// That knowledge came from an announcement earlier in the run.
    pub seen: bool,
    pub announced: bool,
    /// Only one bit kept the announced string completable.
    pub forced: bool,
}

/// Private record of a cheater or eavesdropper.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheaterLog {
    pub position: usize,
    pub inferences: Vec<Inference>,
    /// Runs in which every upstream class was known at the class turn.
    pub case_two_runs: Vec<usize>,
    /// Runs whose announced phase was a guess.
    pub guessed_runs: Vec<usize>,
    pub bit_decisions: Vec<BitDecision>,
}

impl CheaterLog {
    pub fn new(position: usize) -> Self {
        CheaterLog { position, ..Default::default() }
    }

    pub fn infer(&mut self, run: usize, quantity: Quantity, value: PhaseAngle, stage: InferenceStage) {
        self.inferences.push(Inference { run, quantity, value, stage });
    }

    /// Latest inference of `quantity` in `run` available by `stage`.
    pub fn claim(&self, run: usize, quantity: Quantity, stage: InferenceStage) -> Option<PhaseAngle> {
        self.inferences
            .iter()
            .rev()
            .find(|i| i.run == run && i.quantity == quantity && i.stage <= stage)
            .map(|i| i.value)
    }
}

/// Shared private board of a coalition: each colluder posts what it did.
#[derive(Debug, Default)]
pub struct PrivateChannel {
    actions: HashMap<(usize, usize), ActionRecord>,
    deferred: HashMap<usize, Deferred>,
    resolved: HashMap<usize, Resolved>,
}

/// A cheater's open commitment in one run, awaiting the partner.
#[derive(Clone, Copy, Debug)]
pub struct Deferred {
    pub cheater: usize,
    pub committed: ActionClass,
    pub before: PhaseAngle,
}

/// Partner's answer: the forwarded phase it steered, and the quarter turn it
/// took over from the cheater's announced phase.
#[derive(Clone, Copy, Debug)]
pub struct Resolved {
    pub after: PhaseAngle,
    pub shift: PhaseAngle,
}

impl PrivateChannel {
    pub fn post(&mut self, run: usize, action: ActionRecord) {
        self.actions.insert((run, action.participant), action);
    }

    pub fn action(&self, run: usize, participant: usize) -> Option<&ActionRecord> {
        self.actions.get(&(run, participant))
    }

    pub fn class(&self, run: usize, participant: usize) -> Option<ActionClass> {
        self.action(run, participant).and_then(|a| a.class)
    }

    pub fn defer(&mut self, run: usize, deferred: Deferred) {
        self.deferred.insert(run, deferred);
    }

    pub fn deferred(&self, run: usize) -> Option<Deferred> {
        self.deferred.get(&run).copied()
    }

    pub fn resolve(&mut self, run: usize, resolved: Resolved) {
        self.resolved.insert(run, resolved);
    }

    pub fn resolved(&self, run: usize) -> Option<Resolved> {
        self.resolved.get(&run).copied()
    }
}

pub type SharedChannel = Rc<RefCell<PrivateChannel>>;

pub(crate) fn parity_basis<I: IntoIterator<Item = ActionClass>>(classes: I) -> Basis {
    let odd = classes.into_iter().filter(|c| *c == ActionClass::Y).count() % 2 == 1;
    if odd {
        Basis::Y
    } else {
        Basis::X
    }
}

/// Run-by-run verdict of [`audit`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunAudit {
    pub run: usize,
    pub valid: bool,
    pub checked: bool,
    pub detected: bool,
    /// `Some(correct)` when the cheater claimed the incoming phase.
    pub upstream: Option<bool>,
    /// `Some(correct)` when the cheater claimed the outgoing phase.
    pub downstream: Option<bool>,
}

impl RunAudit {
    pub fn recovered(&self) -> bool {
        self.upstream == Some(true) && self.downstream == Some(true)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub position: usize,
    pub runs: Vec<RunAudit>,
    pub valid_runs: usize,
    pub upstream_recovered: usize,
    pub downstream_recovered: usize,
    /// Valid runs in which both phases were known exactly.
    pub recovered: usize,
    pub case_two_runs: usize,
    pub guessed_runs: usize,
    pub guessed_detected: usize,
}

impl InferenceReport {
    pub fn recovery_rate(&self) -> Option<f64> {
        (self.valid_runs > 0).then(|| self.recovered as f64 / self.valid_runs as f64)
    }
}

/// Phase of the qubit arriving at `position`, from the recorded actions.
pub fn upstream_truth(transcript: &Transcript, run: usize, position: usize) -> Option<PhaseAngle> {
    let record = &transcript.runs[run];
    let mut theta = PhaseAngle::ZERO;
    for p in 1..position {
        let action = record.action(p);
        match action.class? {
            ActionClass::Z => theta = action.z_outcome?.phase() + *action.phases.get(1)?,
            _ => theta += action.phases[0],
        }
    }
    Some(theta)
}

/// Phase the qubit leaving `position` must have had for the measured outcome,
/// given the recorded downstream actions. Defined for runs without class Z.
pub fn downstream_truth(transcript: &Transcript, run: usize, position: usize) -> Option<PhaseAngle> {
    let record = &transcript.runs[run];
    let n = transcript.config.participants;
    let mut theta = record.rn_outcome.phase();
    for p in position + 1..=n {
        theta = theta - record.action(p).single_phase()?;
    }
    Some(theta)
}

/// Compares every claim made by the close of the class stage with the truth.
pub fn audit(log: &CheaterLog, transcript: &Transcript) -> InferenceReport {
    let k = log.position;
    let failing: Vec<usize> = transcript.verdict(2).map(|v| v.failing_runs.clone()).unwrap_or_default();
    let mut runs = Vec::with_capacity(transcript.runs.len());
    for record in &transcript.runs {
        let r = record.idx;
        let check =
            |q: Quantity, truth: Option<PhaseAngle>| log.claim(r, q, InferenceStage::Class).map(|c| Some(c) == truth);
        runs.push(RunAudit {
            run: r,
            valid: record.valid,
            checked: record.announcements.value_stage.is_some(),
            detected: failing.contains(&r),
            upstream: check(Quantity::Upstream, upstream_truth(transcript, r, k)),
            downstream: check(Quantity::Downstream, downstream_truth(transcript, r, k)),
        });
    }
    let valid: Vec<&RunAudit> = runs.iter().filter(|a| a.valid).collect();
    InferenceReport {
        position: k,
        valid_runs: valid.len(),
        upstream_recovered: valid.iter().filter(|a| a.upstream == Some(true)).count(),
        downstream_recovered: valid.iter().filter(|a| a.downstream == Some(true)).count(),
        recovered: valid.iter().filter(|a| a.recovered()).count(),
        case_two_runs: log.case_two_runs.len(),
        guessed_runs: log.guessed_runs.len(),
        guessed_detected: log.guessed_runs.iter().filter(|r| failing.contains(r)).count(),
        runs,
    }
}

/// Strategy selector as accepted on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategySpec {
    Honest,
    Intercept,
    Eavesdrop,
    StrategyA,
    StrategyB,
    /// Cheater plus a partner at R1 (strategy A logic) or RN (deferred
    /// strategy B logic); `true` selects RN.
    Collude {
        last: bool,
    },
    SecureCheat,
}

impl FromStr for StrategySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "honest" => Ok(StrategySpec::Honest),
            "intercept" => Ok(StrategySpec::Intercept),
            "eavesdrop" => Ok(StrategySpec::Eavesdrop),
            "strategyA" => Ok(StrategySpec::StrategyA),
            "strategyB" => Ok(StrategySpec::StrategyB),
            "secureCheat" => Ok(StrategySpec::SecureCheat),
            "collude:1" | "collude:R1" => Ok(StrategySpec::Collude { last: false }),
            "collude:N" | "collude:RN" => Ok(StrategySpec::Collude { last: true }),
            _ => Err(format!(
                "unknown strategy {s:?} (honest|intercept|eavesdrop|strategyA|strategyB|collude:1|collude:N|secureCheat)"
            )),
        }
    }
}

impl std::fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StrategySpec::Honest => "honest",
            StrategySpec::Intercept => "intercept",
            StrategySpec::Eavesdrop => "eavesdrop",
            StrategySpec::StrategyA => "strategyA",
            StrategySpec::StrategyB => "strategyB",
            StrategySpec::Collude { last: false } => "collude:1",
            StrategySpec::Collude { last: true } => "collude:N",
            StrategySpec::SecureCheat => "secureCheat",
        };
        f.write_str(s)
    }
}

/// Where the adversary sits. `honest` names the two honest parties of the
/// secure-variant experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub cheater: usize,
    pub honest: (usize, usize),
}

impl Placement {
    /// Defaults: cheater at R2; honest parties around it (secure cheater) or
    /// ending at it (eavesdropper on the link into the cheater position).
    pub fn default_for(spec: StrategySpec, cheater: Option<usize>, participants: usize) -> Self {
        let k = cheater.unwrap_or(match spec {
            StrategySpec::SecureCheat | StrategySpec::Eavesdrop => 3.min(participants - 1),
            StrategySpec::Collude { last: true } => participants - 1,
            _ => 2,
        });
        let honest = match spec {
            StrategySpec::Eavesdrop => (k - 1, k),
            _ => (k.saturating_sub(1).max(1), (k + 1).min(participants)),
        };
        Placement { cheater: k, honest }
    }
}

pub struct Roster {
    pub strategies: Vec<Box<dyn Strategy>>,
    pub taps: Vec<(usize, Box<dyn LinkTap>)>,
}

impl Roster {
    /// The adversary's log, wherever it sits.
    pub fn cheater_log(&self) -> Option<&CheaterLog> {
        self.strategies
            .iter()
            .find_map(|s| s.cheater_log())
            .or_else(|| self.taps.iter().find_map(|(_, t)| t.cheater_log()))
    }
}

fn misconfig(message: String) -> ProtocolError {
    ProtocolError::Config(message)
}

/// Checks that `spec` can be run against `config` with `placement`.
pub fn check_pairing(spec: StrategySpec, config: &ProtocolConfig, placement: &Placement) -> Result<(), ProtocolError> {
    let n = config.participants;
    let k = placement.cheater;
    let secure = config.variant == Variant::Secure;
    match spec {
        StrategySpec::Honest => Ok(()),
        StrategySpec::Intercept if (1..=n).contains(&k) => Ok(()),
        StrategySpec::Eavesdrop if (2..=n).contains(&k) => Ok(()),
        StrategySpec::StrategyA | StrategySpec::StrategyB | StrategySpec::Collude { .. } if secure => {
            Err(misconfig(format!("{spec} does not apply to the secure variant")))
        }
        StrategySpec::StrategyA | StrategySpec::StrategyB | StrategySpec::Collude { .. } if (2..n).contains(&k) => {
            Ok(())
        }
        StrategySpec::SecureCheat if !secure => Err(misconfig("secureCheat requires the secure variant".into())),
        StrategySpec::SecureCheat => {
            let (a, b) = placement.honest;
            if a < k && k < b && b <= n && a >= 1 {
                Ok(())
            } else {
                Err(misconfig(format!("secureCheat needs honest a < cheater < b, got a={a}, k={k}, b={b}")))
            }
        }
        _ => Err(misconfig(format!("{spec} cannot sit at position {k} of {n}"))),
    }
}

/// Builds one fresh set of participants for a single protocol execution.
pub fn build_roster(
    spec: StrategySpec,
    config: &ProtocolConfig,
    placement: &Placement,
) -> Result<Roster, ProtocolError> {
    check_pairing(spec, config, placement)?;
    let n = config.participants;
    let k = placement.cheater;
    let mut strategies: Vec<Box<dyn Strategy>> = Vec::with_capacity(n);
    let mut taps: Vec<(usize, Box<dyn LinkTap>)> = Vec::new();
    match spec {
        StrategySpec::Honest => strategies.extend((1..=n).map(|_| Box::new(Honest::new()) as Box<dyn Strategy>)),
        StrategySpec::Intercept => {
            for p in 1..=n {
                strategies.push(if p == k { Box::new(Intercept::new()) } else { Box::new(Honest::new()) });
            }
        }
        StrategySpec::Eavesdrop => {
            strategies.extend((1..=n).map(|_| Box::new(Honest::new()) as Box<dyn Strategy>));
            taps.push((k, Box::new(InterceptTap::new(k))));
        }
        StrategySpec::StrategyA | StrategySpec::StrategyB => {
            for p in 1..=n {
                strategies.push(match (p == k, spec) {
                    (true, StrategySpec::StrategyA) => Box::new(StrategyA::new(None)),
                    (true, _) => Box::new(StrategyB::new(None)),
                    (false, _) => Box::new(Honest::new()),
                });
            }
        }
        StrategySpec::Collude { last } => {
            let channel = SharedChannel::default();
            let partner = if last { n } else { 1 };
            for p in 1..=n {
                strategies.push(if p == k && last {
                    Box::new(DeferredB::new(channel.clone()))
                } else if p == k {
                    Box::new(StrategyA::new(Some(channel.clone())))
                } else if p == partner && last {
                    Box::new(ParityRelay::new(channel.clone()))
                } else if p == partner {
                    Box::new(Sharing::new(channel.clone()))
                } else {
                    Box::new(Honest::new())
                });
            }
        }
        StrategySpec::SecureCheat => {
            let channel = SharedChannel::default();
            let (a, b) = placement.honest;
            for p in 1..=n {
                strategies.push(if p == k {
                    Box::new(SecureCheater::new(a, b, channel.clone()))
                } else if p == a || p == b {
                    Box::new(Honest::new())
                } else {
                    Box::new(Sharing::new(channel.clone()))
                });
            }
        }
    }
    Ok(Roster { strategies, taps })
}
