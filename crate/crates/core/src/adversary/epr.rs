use rand::{Rng, RngCore};

use super::honest::Honest;
use super::{parity_basis, CheaterLog, Deferred, InferenceStage, Quantity, Resolved, SharedChannel};
use crate::protocol::{
    class_of, ActionClass, ActionRecord, BitContext, ClassContext, Content, ProtocolError, Register, RunContext,
    StartContext, Strategy, Transcript, ValueContext, ValueRequest,
};
use crate::quantum::{self, Basis, BellOutcome, PhaseAngle};

// Register layout after substitution: retained input, retained EPR half,
// forwarded EPR half.
const INPUT: usize = 0;
const KEPT: usize = 1;
const SENT: usize = 2;

fn refuse(position: usize, message: impl Into<String>) -> ProtocolError {
    ProtocolError::Strategy { position, message: message.into() }
}

/// Keeps the incoming qubit and forwards half of a fresh EPR pair.
pub(crate) fn substitute(reg: &mut Register, twist: PhaseAngle, position: usize) -> Result<(), ProtocolError> {
    if reg.state.num_qubits() != 1 || reg.travel != 0 {
        return Err(refuse(position, "expected a single incoming qubit"));
    }
    reg.state = quantum::tensor(&reg.state, &quantum::prepare_epr(twist))?;
    reg.travel = SENT;
    Ok(())
}

/// Measures the retained input and returns its phase.
pub(crate) fn read_input(reg: &mut Register, basis: Basis, rng: &mut dyn RngCore) -> Result<PhaseAngle, ProtocolError> {
    let (outcome, post) = quantum::measure(&reg.state, INPUT, basis, rng)?;
    reg.state = post;
    Ok(outcome.phase())
}

/// Measures the retained EPR half, fixing the forwarded qubit's phase.
pub(crate) fn steer(
    reg: &mut Register,
    basis: Basis,
    twist: PhaseAngle,
    rng: &mut dyn RngCore,
) -> Result<PhaseAngle, ProtocolError> {
    let (outcome, post) = quantum::measure(&reg.state, KEPT, basis, rng)?;
    reg.state = post;
    Ok(twist - outcome.phase())
}

pub(crate) fn teleport(reg: &mut Register, rng: &mut dyn RngCore) -> Result<BellOutcome, ProtocolError> {
    let (outcome, post) = quantum::bell_measure(&reg.state, INPUT, KEPT, rng)?;
    reg.state = post;
    Ok(outcome)
}

pub(crate) fn twist_for_balance(rng: &mut dyn RngCore) -> PhaseAngle {
    if rng.gen() {
        PhaseAngle::HALF_PI
    } else {
        PhaseAngle::ZERO
    }
}

/// Class of `participant`'s action as known to the cheater: announced, or
/// posted by a coalition partner.
fn known_class(
    announced: Option<ActionClass>,
    channel: Option<&SharedChannel>,
    run: usize,
    participant: usize,
) -> Option<ActionClass> {
    announced.or_else(|| channel.and_then(|c| c.borrow().class(run, participant)))
}

#[derive(Clone, Copy, Debug)]
enum AState {
    Held { twist: PhaseAngle },
    Measured { phase: PhaseAngle },
    Teleported { twist: PhaseAngle, outcome: BellOutcome },
}

/// Holds the incoming qubit until its class turn. If every upstream class is
/// known by then it reads both neighbouring phases exactly; otherwise it
/// teleports the input onto the forwarded qubit.
pub struct StrategyA {
    channel: Option<SharedChannel>,
    runs: Vec<Option<AState>>,
    log: CheaterLog,
}

impl StrategyA {
    pub fn new(channel: Option<SharedChannel>) -> Self {
        StrategyA { channel, runs: Vec::new(), log: CheaterLog::default() }
    }

    fn state(&self, run: usize) -> Result<AState, ProtocolError> {
        self.runs.get(run).copied().flatten().ok_or_else(|| refuse(self.log.position, "run not received"))
    }
}

impl Strategy for StrategyA {
    fn on_start(&mut self, ctx: &StartContext<'_>, _rng: &mut dyn RngCore) -> Result<(), ProtocolError> {
        self.log = CheaterLog::new(ctx.position);
        self.runs = vec![None; ctx.runs];
        Ok(())
    }

    fn on_receive(
        &mut self,
        ctx: &RunContext,
        reg: &mut Register,
        rng: &mut dyn RngCore,
    ) -> Result<ActionRecord, ProtocolError> {
        let twist = twist_for_balance(rng);
        substitute(reg, twist, ctx.position)?;
        self.runs[ctx.run] = Some(AState::Held { twist });
        Ok(ActionRecord::opaque(ctx.position))
    }

    fn on_bit_turn(&mut self, ctx: &BitContext<'_>, _rng: &mut dyn RngCore) -> Result<bool, ProtocolError> {
        Err(refuse(ctx.position, "strategy A has no bit stage"))
    }

    fn on_class_turn(
        &mut self,
        ctx: &ClassContext<'_>,
        reg: &mut Register,
        rng: &mut dyn RngCore,
    ) -> Result<ActionClass, ProtocolError> {
        let AState::Held { twist } = self.state(ctx.run)? else {
            return Err(refuse(ctx.position, "class already announced"));
        };
        let upstream: Option<Vec<ActionClass>> =
            (1..ctx.position).map(|j| known_class(ctx.class_of(j), self.channel.as_ref(), ctx.run, j)).collect();
        match upstream {
            Some(classes) => {
                let before = read_input(reg, parity_basis(classes), rng)?;
                let after = steer(reg, Basis::X, twist, rng)?;
                let phase = after - before;
                self.log.infer(ctx.run, Quantity::Upstream, before, InferenceStage::Class);
                self.log.infer(ctx.run, Quantity::Downstream, after, InferenceStage::Class);
                self.log.case_two_runs.push(ctx.run);
                self.runs[ctx.run] = Some(AState::Measured { phase });
                Ok(class_of(phase))
            }
            None => {
                let outcome = teleport(reg, rng)?;
                self.runs[ctx.run] = Some(AState::Teleported { twist, outcome });
                Ok(class_of(twist))
            }
        }
    }

    fn on_value_turn(
        &mut self,
        ctx: &ValueContext<'_>,
        _reg: &mut Register,
        rng: &mut dyn RngCore,
    ) -> Result<Content, ProtocolError> {
        if ctx.request != ValueRequest::Phase {
            return Err(refuse(ctx.position, "strategy A only announces single phases"));
        }
        let phase = match self.state(ctx.run)? {
            AState::Measured { phase } => phase,
            AState::Teleported { twist, outcome } => {
                let upstream: Option<Vec<ActionClass>> = (1..ctx.position)
                    .map(|j| known_class(ctx.class_of(j), self.channel.as_ref(), ctx.run, j))
                    .collect();
                match upstream {
                    // Only the class of the input enters the effective phase.
                    Some(classes) => {
                        let representative = parity_basis(classes).offset();
                        quantum::effective_phase_after_bell(outcome, twist, representative)
                    }
                    None => {
                        self.log.guessed_runs.push(ctx.run);
                        twist + if rng.gen() { PhaseAngle::PI } else { PhaseAngle::ZERO }
                    }
                }
            }
            AState::Held { .. } => return Err(refuse(ctx.position, "value requested before class")),
        };
        Ok(Content::Value { phase, outcome: None })
    }

    fn cheater_log(&self) -> Option<&CheaterLog> {
        Some(&self.log)
    }
}

#[derive(Clone, Copy, Debug)]
struct BState {
    before: PhaseAngle,
    phase: Option<PhaseAngle>,
}

/// Measures the incoming qubit at once in a random basis, forwards an EPR
/// half, and at its class turn steers the forwarded qubit into the basis
/// matching the downstream class parity.
pub struct StrategyB {
    channel: Option<SharedChannel>,
    fixed_basis: Option<Basis>,
    runs: Vec<Option<BState>>,
    log: CheaterLog,
}

impl StrategyB {
    pub fn new(channel: Option<SharedChannel>) -> Self {
        StrategyB { channel, fixed_basis: None, runs: Vec::new(), log: CheaterLog::default() }
    }

    /// Always measures the incoming qubit in `basis`.
    pub fn with_fixed_basis(mut self, basis: Basis) -> Self {
        self.fixed_basis = Some(basis);
        self
    }

    fn state(&self, run: usize) -> Result<BState, ProtocolError> {
        self.runs.get(run).copied().flatten().ok_or_else(|| refuse(self.log.position, "run not received"))
    }
}

impl Strategy for StrategyB {
    fn on_start(&mut self, ctx: &StartContext<'_>, _rng: &mut dyn RngCore) -> Result<(), ProtocolError> {
        self.log = CheaterLog::new(ctx.position);
        self.runs = vec![None; ctx.runs];
        Ok(())
    }

    fn on_receive(
        &mut self,
        ctx: &RunContext,
        reg: &mut Register,
        rng: &mut dyn RngCore,
    ) -> Result<ActionRecord, ProtocolError> {
        let basis = self.fixed_basis.unwrap_or_else(|| Basis::random(rng));
        substitute(reg, PhaseAngle::ZERO, ctx.position)?;
        let before = read_input(reg, basis, rng)?;
        self.log.infer(ctx.run, Quantity::Upstream, before, InferenceStage::Receive);
        self.runs[ctx.run] = Some(BState { before, phase: None });
        Ok(ActionRecord::opaque(ctx.position))
    }

    fn on_bit_turn(&mut self, ctx: &BitContext<'_>, _rng: &mut dyn RngCore) -> Result<bool, ProtocolError> {
        Err(refuse(ctx.position, "strategy B has no bit stage"))
    }

    fn on_class_turn(
        &mut self,
        ctx: &ClassContext<'_>,
        reg: &mut Register,
        rng: &mut dyn RngCore,
    ) -> Result<ActionClass, ProtocolError> {
        let mut st = self.state(ctx.run)?;
        // Unannounced downstream classes are simply left out of the parity.
        let downstream = (ctx.position + 1..=ctx.participants)
            .filter_map(|j| known_class(ctx.class_of(j), self.channel.as_ref(), ctx.run, j));
        let after = steer(reg, parity_basis(downstream), PhaseAngle::ZERO, rng)?;
        self.log.infer(ctx.run, Quantity::Downstream, after, InferenceStage::Class);
        let phase = after - st.before;
        st.phase = Some(phase);
        self.runs[ctx.run] = Some(st);
        Ok(class_of(phase))
    }

    fn on_value_turn(
        &mut self,
        ctx: &ValueContext<'_>,
        _reg: &mut Register,
        _rng: &mut dyn RngCore,
    ) -> Result<Content, ProtocolError> {
        if ctx.request != ValueRequest::Phase {
            return Err(refuse(ctx.position, "strategy B only announces single phases"));
        }
        let phase = self.state(ctx.run)?.phase.ok_or_else(|| refuse(ctx.position, "value requested before class"))?;
        Ok(Content::Value { phase, outcome: None })
    }

    fn cheater_log(&self) -> Option<&CheaterLog> {
        Some(&self.log)
    }
}

/// Strategy B with the forwarded qubit left unsteered past the class turn.
/// It announces a random class and leaves the steering to a partner at R_N,
/// which announces after every participant in between.
pub struct DeferredB {
    channel: SharedChannel,
    log: CheaterLog,
}

impl DeferredB {
    pub fn new(channel: SharedChannel) -> Self {
        DeferredB { channel, log: CheaterLog::default() }
    }
}

impl Strategy for DeferredB {
    fn on_start(&mut self, ctx: &StartContext<'_>, _rng: &mut dyn RngCore) -> Result<(), ProtocolError> {
        self.log = CheaterLog::new(ctx.position);
        Ok(())
    }

    fn on_receive(
        &mut self,
        ctx: &RunContext,
        reg: &mut Register,
        rng: &mut dyn RngCore,
    ) -> Result<ActionRecord, ProtocolError> {
        let basis = Basis::random(rng);
        substitute(reg, PhaseAngle::ZERO, ctx.position)?;
        let before = read_input(reg, basis, rng)?;
        self.log.infer(ctx.run, Quantity::Upstream, before, InferenceStage::Receive);
        let committed = if rng.gen() { ActionClass::X } else { ActionClass::Y };
        self.channel.borrow_mut().defer(ctx.run, Deferred { cheater: ctx.position, committed, before });
        Ok(ActionRecord::opaque(ctx.position))
    }

    fn on_bit_turn(&mut self, ctx: &BitContext<'_>, _rng: &mut dyn RngCore) -> Result<bool, ProtocolError> {
        Err(refuse(ctx.position, "strategy B has no bit stage"))
    }

    fn on_class_turn(
        &mut self,
        ctx: &ClassContext<'_>,
        _reg: &mut Register,
        _rng: &mut dyn RngCore,
    ) -> Result<ActionClass, ProtocolError> {
        let deferred = self.channel.borrow().deferred(ctx.run);
        deferred.map(|d| d.committed).ok_or_else(|| refuse(ctx.position, "run not received"))
    }

    fn on_value_turn(
        &mut self,
        ctx: &ValueContext<'_>,
        _reg: &mut Register,
        _rng: &mut dyn RngCore,
    ) -> Result<Content, ProtocolError> {
        if ctx.request != ValueRequest::Phase {
            return Err(refuse(ctx.position, "strategy B only announces single phases"));
        }
        let channel = self.channel.borrow();
        let (Some(d), Some(r)) = (channel.deferred(ctx.run), channel.resolved(ctx.run)) else {
            return Err(refuse(ctx.position, "partner did not resolve the run"));
        };
        Ok(Content::Value { phase: r.after - d.before - r.shift, outcome: None })
    }

    fn on_finish(&mut self, _transcript: &Transcript) {
        let channel = self.channel.borrow();
        let mut runs: Vec<(usize, Resolved)> = channel.resolved.iter().map(|(r, v)| (*r, *v)).collect();
        runs.sort_by_key(|(r, _)| *r);
        for (run, r) in runs {
            self.log.infer(run, Quantity::Downstream, r.after, InferenceStage::Class);
        }
    }

    fn cheater_log(&self) -> Option<&CheaterLog> {
        Some(&self.log)
    }
}

/// Honest R_N that, at its class turn, steers the partner's retained EPR half
/// in the basis of the actual downstream parity and takes over any quarter
/// turn needed to match the partner's committed class.
pub struct ParityRelay {
    inner: Honest,
    channel: SharedChannel,
    shifts: Vec<PhaseAngle>,
}

impl ParityRelay {
    pub fn new(channel: SharedChannel) -> Self {
        ParityRelay { inner: Honest::new(), channel, shifts: Vec::new() }
    }
}

impl Strategy for ParityRelay {
    fn on_start(&mut self, ctx: &StartContext<'_>, rng: &mut dyn RngCore) -> Result<(), ProtocolError> {
        self.shifts = vec![PhaseAngle::ZERO; ctx.runs];
        self.inner.start(ctx, rng)
    }

    fn on_receive(
        &mut self,
        ctx: &RunContext,
        reg: &mut Register,
        rng: &mut dyn RngCore,
    ) -> Result<ActionRecord, ProtocolError> {
        let action = self.inner.act(ctx, reg, rng)?;
        self.channel.borrow_mut().post(ctx.run, action.clone());
        Ok(action)
    }

    fn on_bit_turn(&mut self, ctx: &BitContext<'_>, rng: &mut dyn RngCore) -> Result<bool, ProtocolError> {
        self.inner.on_bit_turn(ctx, rng)
    }

    fn on_class_turn(
        &mut self,
        ctx: &ClassContext<'_>,
        reg: &mut Register,
        rng: &mut dyn RngCore,
    ) -> Result<ActionClass, ProtocolError> {
        let own = self.inner.action(ctx.run).and_then(ActionRecord::single_phase);
        let own = own.ok_or_else(|| refuse(ctx.position, "no single-phase action"))?;
        let Some(d) = self.channel.borrow().deferred(ctx.run) else {
            return Ok(class_of(own));
        };
        // Participants still unannounced are left out of the parity.
        let between = (d.cheater + 1..ctx.position).filter_map(|j| ctx.class_of(j));
        let after = steer(reg, parity_basis(between.chain([class_of(own)])), PhaseAngle::ZERO, rng)?;
        let shift = if class_of(after - d.before) == d.committed { PhaseAngle::ZERO } else { PhaseAngle::HALF_PI };
        self.channel.borrow_mut().resolve(ctx.run, Resolved { after, shift });
        self.shifts[ctx.run] = shift;
        Ok(class_of(own + shift))
    }

    fn on_value_turn(
        &mut self,
        ctx: &ValueContext<'_>,
        reg: &mut Register,
        rng: &mut dyn RngCore,
    ) -> Result<Content, ProtocolError> {
        Ok(match self.inner.on_value_turn(ctx, reg, rng)? {
            Content::Value { phase, outcome } => Content::Value { phase: phase + self.shifts[ctx.run], outcome },
            other => other,
        })
    }
}
