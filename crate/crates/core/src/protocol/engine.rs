use rand::seq::SliceRandom;
use rand::RngCore;

use super::checks::{choose_check_subset, compute_verdicts, reconstruct_secret, valid_runs_from};
use super::transcript::{
    ActionRecord, AnnouncementEvent, Announcements, ConfigEcho, Content, Reconstruction, RunRecord, Stage, Transcript,
};
use super::{ActionClass, ProtocolConfig, ProtocolError, SecureCode, ValueOrder, Variant};
use crate::adversary::CheaterLog;
use crate::quantum::{self, Basis, JointState, Outcome, PhaseAngle, Sign};

/// The register of one run together with the index of the travelling qubit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Register {
    pub state: JointState,
    pub travel: usize,
}

impl Register {
    /// A fresh `|+x>`.
    pub fn fresh() -> Self {
        Register { state: quantum::plus_x_state(), travel: 0 }
    }

    pub fn apply_phase(&mut self, phase: PhaseAngle) -> Result<(), ProtocolError> {
        self.state = quantum::apply_phase(&self.state, self.travel, phase)?;
        Ok(())
    }

    pub fn measure_travel(&mut self, basis: Basis, rng: &mut dyn RngCore) -> Result<Outcome, ProtocolError> {
        let (outcome, post) = quantum::measure(&self.state, self.travel, basis, rng)?;
        self.state = post;
        Ok(outcome)
    }

    /// Phase of the travelling qubit when it is an unentangled equatorial state.
    pub fn travel_phase(&self) -> Option<PhaseAngle> {
        let q = quantum::extract_qubit(&self.state, self.travel).ok()?;
        quantum::equatorial_phase(&q).ok()
    }
}

pub struct StartContext<'a> {
    pub variant: Variant,
    pub participants: usize,
    pub runs: usize,
    pub position: usize,
    pub code: Option<&'a SecureCode>,
}

#[derive(Clone, Copy, Debug)]
pub struct RunContext {
    pub variant: Variant,
    pub participants: usize,
    pub run: usize,
    pub position: usize,
}

pub struct BitContext<'a> {
    pub run: usize,
    pub position: usize,
    pub participants: usize,
    /// Bits announced so far, indexed `[run][participant - 1]`; earlier runs
    /// are complete.
    pub board: &'a [Vec<Option<bool>>],
}

impl BitContext<'_> {
    pub fn bit(&self, run: usize, participant: usize) -> Option<bool> {
        self.board.get(run).and_then(|r| r[participant - 1])
    }
}

pub struct ClassContext<'a> {
    pub variant: Variant,
    pub run: usize,
    pub position: usize,
    pub participants: usize,
    /// Class announcements of this run made before this turn.
    pub announced: &'a [AnnouncementEvent],
    /// This run's announced bits (secure variant).
    pub bits: Option<&'a [Option<bool>]>,
}

impl ClassContext<'_> {
    pub fn class_of(&self, participant: usize) -> Option<ActionClass> {
        class_in(self.announced, participant)
    }

    pub fn has_announced(&self, participant: usize) -> bool {
        self.announced.iter().any(|e| e.participant == participant)
    }
}

pub(crate) fn class_in(events: &[AnnouncementEvent], participant: usize) -> Option<ActionClass> {
    events.iter().find_map(|e| match e.content {
        Content::Class(c) if e.participant == participant => Some(c),
        _ => None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueRequest {
    /// Announce the single phase (the measurer adds its outcome).
    Phase,
    /// Announce the pre-measurement phase and the measurement outcome.
    ZMeasure,
    /// Announce the re-send phase.
    ZResend,
}

pub struct ValueContext<'a> {
    pub variant: Variant,
    pub run: usize,
    pub position: usize,
    pub participants: usize,
    pub request: ValueRequest,
    /// Complete class stage of this run.
    pub classes: &'a [AnnouncementEvent],
    pub bits: Option<&'a [Option<bool>]>,
    /// Value announcements of this run made before this turn.
    pub announced: &'a [AnnouncementEvent],
    /// The measurer's own outcome; `None` for everyone else.
    pub own_outcome: Option<Sign>,
}

impl ValueContext<'_> {
    pub fn class_of(&self, participant: usize) -> Option<ActionClass> {
        class_in(self.classes, participant)
    }
}

/// Participant behaviour. Honest participants and every adversary implement
/// the same hooks; the engine calls them in protocol order.
pub trait Strategy {
    fn on_start(&mut self, _ctx: &StartContext<'_>, _rng: &mut dyn RngCore) -> Result<(), ProtocolError> {
        Ok(())
    }

    /// Acts on the travelling qubit and reports what was physically done.
    fn on_receive(
        &mut self,
        ctx: &RunContext,
        reg: &mut Register,
        rng: &mut dyn RngCore,
    ) -> Result<ActionRecord, ProtocolError>;

    /// Secure variant only: the announced bit of this run.
    fn on_bit_turn(&mut self, ctx: &BitContext<'_>, rng: &mut dyn RngCore) -> Result<bool, ProtocolError>;

    fn on_class_turn(
        &mut self,
        ctx: &ClassContext<'_>,
        reg: &mut Register,
        rng: &mut dyn RngCore,
    ) -> Result<ActionClass, ProtocolError>;

    fn on_value_turn(
        &mut self,
        ctx: &ValueContext<'_>,
        reg: &mut Register,
        rng: &mut dyn RngCore,
    ) -> Result<Content, ProtocolError>;

    /// Called once with the finished transcript.
    fn on_finish(&mut self, _transcript: &Transcript) {}

    fn cheater_log(&self) -> Option<&CheaterLog> {
        None
    }
}

/// A third party sitting on the link into a participant.
pub trait LinkTap {
    fn on_link(&mut self, ctx: &RunContext, reg: &mut Register, rng: &mut dyn RngCore) -> Result<(), ProtocolError>;

    fn on_finish(&mut self, _transcript: &Transcript) {}

    fn cheater_log(&self) -> Option<&CheaterLog> {
        None
    }
}

fn strategy_err(position: usize, message: impl Into<String>) -> ProtocolError {
    ProtocolError::Strategy { position, message: message.into() }
}

fn shuffled(mut v: Vec<usize>, rng: &mut dyn RngCore) -> Vec<usize> {
    v.shuffle(rng);
    v
}

/// Class-stage order for one run.
fn class_order(config: &ProtocolConfig, bits: Option<&[Option<bool>]>, rng: &mut dyn RngCore) -> Vec<usize> {
    let n = config.participants;
    match config.variant {
        Variant::Original => shuffled((1..=n).collect(), rng),
        Variant::Modified1 => (1..=n).rev().collect(),
        Variant::Modified2 => {
            let mut order = shuffled(config.middle().collect(), rng);
            order.extend(shuffled(vec![1, n], rng));
            order
        }
        Variant::Secure => {
            let bits = bits.expect("secure runs carry bits");
            let speakers = (1..=n).filter(|p| !bits[p - 1].unwrap_or(false)).collect();
            shuffled(speakers, rng)
        }
    }
}

fn value_order(order: ValueOrder, n: usize, rng: &mut dyn RngCore) -> Vec<usize> {
    match order {
        ValueOrder::Random => shuffled((1..=n).collect(), rng),
        ValueOrder::First(p) => {
            let mut v = vec![p];
            v.extend(shuffled((1..=n).filter(|q| *q != p).collect(), rng));
            v
        }
        ValueOrder::Last(p) => {
            let mut v = shuffled((1..=n).filter(|q| *q != p).collect(), rng);
            v.push(p);
            v
        }
    }
}

/// Executes one full protocol: `config.runs` physical runs followed by the
/// announcement stages of the variant, the checks and a reconstruction demo.
/// Detection of cheating is reported through the verdicts, never as an error.
pub fn run_protocol(
    config: &ProtocolConfig,
    strategies: &mut [Box<dyn Strategy>],
    taps: &mut [(usize, Box<dyn LinkTap>)],
    rng: &mut dyn RngCore,
) -> Result<Transcript, ProtocolError> {
    config.validate()?;
    let n = config.participants;
    if strategies.len() != n {
        return Err(ProtocolError::StrategyCount { expected: n, found: strategies.len() });
    }
    let secure = config.variant == Variant::Secure;

    for (i, s) in strategies.iter_mut().enumerate() {
        let ctx = StartContext {
            variant: config.variant,
            participants: n,
            runs: config.runs,
            position: i + 1,
            code: config.code.as_ref(),
        };
        s.on_start(&ctx, rng)?;
    }

    // Qubit transmission.
    let mut registers = Vec::with_capacity(config.runs);
    let mut runs = Vec::with_capacity(config.runs);
    for run in 0..config.runs {
        let mut reg = Register::fresh();
        let mut actions = Vec::with_capacity(n);
        let mut theta = vec![Some(PhaseAngle::ZERO)];
        for pos in 1..=n {
            let ctx = RunContext { variant: config.variant, participants: n, run, position: pos };
            for (_, tap) in taps.iter_mut().filter(|(at, _)| *at == pos) {
                tap.on_link(&ctx, &mut reg, rng)?;
            }
            let mut action = strategies[pos - 1].on_receive(&ctx, &mut reg, rng)?;
            action.participant = pos;
            actions.push(action);
            theta.push(reg.travel_phase());
        }
        let rn_outcome = reg.measure_travel(Basis::X, rng)?.sign;
        registers.push(reg);
        runs.push(RunRecord {
            idx: run,
            actions,
            rn_outcome,
            theta,
            announcements: Announcements::default(),
            valid: false,
            checked: false,
        });
    }

    // Bit stage.
    let mut board: Vec<Vec<Option<bool>>> = Vec::new();
    if secure {
        for run in 0..config.runs {
            board.push(vec![None; n]);
            let order = shuffled(config.middle().collect(), rng);
            let mut events = Vec::with_capacity(order.len());
            for (i, &p) in order.iter().enumerate() {
                let ctx = BitContext { run, position: p, participants: n, board: &board };
                let bit = strategies[p - 1].on_bit_turn(&ctx, rng)?;
                board[run][p - 1] = Some(bit);
                events.push(AnnouncementEvent {
                    stage: Stage::BitStage,
                    position: i,
                    participant: p,
                    content: Content::Bit(bit),
                });
            }
            runs[run].announcements.bit_stage = Some(events);
        }
    }

    // Class stage.
    for run in 0..config.runs {
        let bits = if secure { Some(board[run].as_slice()) } else { None };
        let order = class_order(config, bits, rng);
        let mut events: Vec<AnnouncementEvent> = Vec::with_capacity(order.len());
        for (i, &p) in order.iter().enumerate() {
            let ctx =
                ClassContext { variant: config.variant, run, position: p, participants: n, announced: &events, bits };
            let class = strategies[p - 1].on_class_turn(&ctx, &mut registers[run], rng)?;
            if class == ActionClass::Z {
                return Err(strategy_err(p, "class Z cannot be announced in the class stage"));
            }
            events.push(AnnouncementEvent {
                stage: Stage::ClassStage,
                position: i,
                participant: p,
                content: Content::Class(class),
            });
        }
        runs[run].announcements.class_stage = events;
    }

    let valid = valid_runs_from(&runs, config.variant, n);
    for &r in &valid {
        runs[r].valid = true;
    }
    let checked = choose_check_subset(&valid, config.check_fraction, rng);
    for &r in &checked {
        runs[r].checked = true;
    }

    // Value stage.
    for run in 0..config.runs {
        let is_z_run = secure && runs[run].has_z();
        if !runs[run].checked && !is_z_run {
            continue;
        }
        let bits = if secure { Some(board[run].clone()) } else { None };
        let classes = runs[run].announcements.class_stage.clone();
        let rn_outcome = runs[run].rn_outcome;
        let rounds: Vec<(ValueRequest, Vec<usize>)> = if is_z_run {
            let b = bits.as_ref().expect("secure");
            let xy: Vec<usize> = config.middle().filter(|p| b[p - 1] == Some(false)).collect();
            let z: Vec<usize> = config.middle().filter(|p| b[p - 1] == Some(true)).collect();
            let mut measure = z.clone();
            measure.push(n);
            let mut resend = z;
            resend.push(1);
            vec![
                (ValueRequest::Phase, shuffled(xy, rng)),
                (ValueRequest::ZMeasure, shuffled(measure, rng)),
                (ValueRequest::ZResend, shuffled(resend, rng)),
            ]
        } else {
            vec![(ValueRequest::Phase, value_order(config.value_order, n, rng))]
        };
        let mut events: Vec<AnnouncementEvent> = Vec::new();
        for (request, order) in rounds {
            for p in order {
                let ctx = ValueContext {
                    variant: config.variant,
                    run,
                    position: p,
                    participants: n,
                    request,
                    classes: &classes,
                    bits: bits.as_deref(),
                    announced: &events,
                    own_outcome: (p == n).then_some(rn_outcome),
                };
                let content = strategies[p - 1].on_value_turn(&ctx, &mut registers[run], rng)?;
                let well_formed = match (request, content) {
                    (ValueRequest::Phase, Content::Value { outcome, .. }) => outcome.is_some() == (p == n),
                    (ValueRequest::ZMeasure, Content::ZMeasure { .. }) => true,
                    (ValueRequest::ZResend, Content::ZResend { .. }) => true,
                    _ => false,
                };
                if !well_formed {
                    return Err(strategy_err(p, format!("malformed {request:?} announcement {content:?}")));
                }
                let position = events.len();
                events.push(AnnouncementEvent { stage: Stage::ValueStage, position, participant: p, content });
            }
        }
        runs[run].announcements.value_stage = Some(events);
    }

    let mut transcript =
        Transcript { config: ConfigEcho::from(config), runs, verdicts: Vec::new(), reconstructions: Vec::new() };
    transcript.verdicts = compute_verdicts(&transcript, config.code.as_ref());

    // Reconstruction demo on the first secret-carrying run.
    if let Some(run) = transcript.runs.iter().find(|r| r.valid && !r.checked).map(|r| r.idx) {
        let record = &transcript.runs[run];
        let all_phases = record.actions.iter().all(|a| a.single_phase().is_some());
        if all_phases {
            let mut demo = Vec::new();
            for target in 1..=n {
                let coalition: Vec<usize> = (1..=n).filter(|p| *p != target).collect();
                let recovered = reconstruct_secret(&transcript, run, &coalition, target)?;
                let truth = record.action(target).single_phase().map(|phi| {
                    if target == n {
                        phi - record.rn_outcome.phase()
                    } else {
                        phi
                    }
                });
                demo.push(Reconstruction { run, target, recovered, truth });
            }
            transcript.reconstructions = demo;
        }
    }

    for s in strategies.iter_mut() {
        s.on_finish(&transcript);
    }
    for (_, t) in taps.iter_mut() {
        t.on_finish(&transcript);
    }
    Ok(transcript)
}
