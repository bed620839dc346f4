use rand::{Rng, RngCore};

use super::epr::{read_input, steer, substitute, teleport, twist_for_balance};
use super::{BitDecision, CheaterLog, InferenceStage, Quantity, SharedChannel};
use crate::codes::Codeword;
use crate::protocol::{
    class_of, ActionClass, ActionRecord, BitContext, ClassContext, Content, ProtocolError, Register, RunContext,
    SecureCode, StartContext, Strategy, ValueContext, ValueRequest,
};
use crate::quantum::{self, Basis, BellOutcome, PhaseAngle};

#[derive(Clone, Copy, Debug)]
enum Mode {
    Held,
    Measured { phase: PhaseAngle },
    Teleported { outcome: BellOutcome },
    Emulated { post: PhaseAngle },
}

#[derive(Clone, Copy, Debug)]
struct RunState {
    twist: PhaseAngle,
    mode: Mode,
}

fn refuse(position: usize, message: impl Into<String>) -> ProtocolError {
    ProtocolError::Strategy { position, message: message.into() }
}

fn combine(a: ActionClass, b: ActionClass) -> ActionClass {
    if a == b {
        ActionClass::X
    } else {
        ActionClass::Y
    }
}

fn basis_of(class: ActionClass) -> Basis {
    if class == ActionClass::Y {
        Basis::Y
    } else {
        Basis::X
    }
}

/// Packs the first `len` announced bits of a participant like
/// [`Codeword::prefix`].
fn packed(bits: impl Iterator<Item = bool>) -> u64 {
    bits.fold(0, |acc, b| (acc << 1) | u64::from(b))
}

/// Substitutes an EPR half in every run of the secure variant and shapes its
/// announced bit string greedily towards a weight-`w` codeword, announcing
/// X/Y preferably in runs where an honest party is known to act X/Y.
pub struct SecureCheater {
    honest: (usize, usize),
    channel: SharedChannel,
    code: Option<SecureCode>,
    participants: usize,
    announced: Vec<bool>,
    runs: Vec<Option<RunState>>,
    log: CheaterLog,
}

impl SecureCheater {
    pub fn new(a: usize, b: usize, channel: SharedChannel) -> Self {
        SecureCheater {
            honest: (a, b),
            channel,
            code: None,
            participants: 0,
            announced: Vec::new(),
            runs: Vec::new(),
            log: CheaterLog::default(),
        }
    }

    fn words(&self) -> &[Codeword] {
        self.code.as_ref().map(|c| c.weight_w_words()).unwrap_or(&[])
    }

    fn state(&self, run: usize) -> Result<RunState, ProtocolError> {
        self.runs.get(run).copied().flatten().ok_or_else(|| refuse(self.log.position, "run not received"))
    }

    /// Bit of honest `h` in `run`: announced earlier in this run, or the same
    /// in every weight-`w` codeword matching its announced prefix.
    fn honest_bit(&self, ctx: &BitContext<'_>, h: usize) -> (Option<bool>, bool) {
        if h == 1 || h == self.participants {
            return (Some(false), false);
        }
        if let Some(bit) = ctx.bit(ctx.run, h) {
            return (Some(bit), false);
        }
        let prefix = packed((0..ctx.run).map(|r| ctx.bit(r, h).unwrap_or(false)));
        let mut bits = self.words().iter().filter(|w| w.prefix(ctx.run) == prefix).map(|w| w.bit(ctx.run));
        let first = bits.next();
        match first {
            Some(bit) if bits.all(|b| b == bit) => (Some(bit), true),
            _ => (None, false),
        }
    }

    /// Class of the phase arriving at the cheater, when the announcements and
    /// the coalition's private posts determine it.
    fn upstream_class(
        &self,
        run: usize,
        bits: Option<&[Option<bool>]>,
        announced_class: impl Fn(usize) -> Option<ActionClass>,
    ) -> Option<ActionClass> {
        let channel = self.channel.borrow();
        let mut class = Some(ActionClass::X);
        for j in 1..self.log.position {
            if let Some(action) = channel.action(run, j) {
                class = match action.class? {
                    ActionClass::Z => Some(class_of(action.z_outcome?.phase() + action.phases[1])),
                    c => class.map(|acc| combine(acc, c)),
                };
                continue;
            }
            let z = bits.and_then(|b| b.get(j - 1).copied().flatten()) == Some(true);
            class = if z { None } else { class.zip(announced_class(j)).map(|(acc, c)| combine(acc, c)) };
        }
        class
    }
}

impl Strategy for SecureCheater {
    fn on_start(&mut self, ctx: &StartContext<'_>, _rng: &mut dyn RngCore) -> Result<(), ProtocolError> {
        self.log = CheaterLog::new(ctx.position);
        self.code = Some(ctx.code.ok_or(ProtocolError::MissingCode)?.clone());
        self.participants = ctx.participants;
        self.announced = Vec::with_capacity(ctx.runs);
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
        self.runs[ctx.run] = Some(RunState { twist, mode: Mode::Held });
        Ok(ActionRecord::opaque(ctx.position))
    }

    fn on_bit_turn(&mut self, ctx: &BitContext<'_>, _rng: &mut dyn RngCore) -> Result<bool, ProtocolError> {
        let (a, b) = self.honest;
        let (bit_a, revealed_a) = self.honest_bit(ctx, a);
        let (bit_b, revealed_b) = self.honest_bit(ctx, b);
        let zero_a = bit_a == Some(false);
        let zero_b = bit_b == Some(false);
        let safe = zero_a || zero_b;
        let seen = (zero_a && !revealed_a) || (zero_b && !revealed_b);

        let prefix = packed(self.announced.iter().copied());
        let (mut zeros, mut ones) = (0usize, 0usize);
        for w in self.words().iter().filter(|w| w.prefix(ctx.run) == prefix) {
            if w.bit(ctx.run) {
                ones += 1;
            } else {
                zeros += 1;
            }
        }
        let forced = zeros == 0 || ones == 0;
        let bit = match (zeros, ones) {
            (0, 0) => true,
            (0, _) => true,
            (_, 0) => false,
            _ if safe => ones > zeros,
            _ => true,
        };
        self.announced.push(bit);
        self.log.bit_decisions.push(BitDecision { run: ctx.run, safe, seen, announced: bit, forced });
        Ok(bit)
    }

    fn on_class_turn(
        &mut self,
        ctx: &ClassContext<'_>,
        reg: &mut Register,
        rng: &mut dyn RngCore,
    ) -> Result<ActionClass, ProtocolError> {
        let st = self.state(ctx.run)?;
        let upstream = self.upstream_class(ctx.run, ctx.bits, |j| ctx.class_of(j));
        let (mode, class) = match upstream {
            Some(class) => {
                let before = read_input(reg, basis_of(class), rng)?;
                let after = steer(reg, Basis::X, st.twist, rng)?;
                self.log.infer(ctx.run, Quantity::Upstream, before, InferenceStage::Class);
                self.log.infer(ctx.run, Quantity::Downstream, after, InferenceStage::Class);
                self.log.case_two_runs.push(ctx.run);
                let phase = after - before;
                (Mode::Measured { phase }, class_of(phase))
            }
            None => (Mode::Teleported { outcome: teleport(reg, rng)? }, class_of(st.twist)),
        };
        self.runs[ctx.run] = Some(RunState { mode, ..st });
        Ok(class)
    }

    fn on_value_turn(
        &mut self,
        ctx: &ValueContext<'_>,
        reg: &mut Register,
        rng: &mut dyn RngCore,
    ) -> Result<Content, ProtocolError> {
        let st = self.state(ctx.run)?;
        match (ctx.request, st.mode) {
            (ValueRequest::Phase, Mode::Measured { phase }) => Ok(Content::Value { phase, outcome: None }),
            (ValueRequest::Phase, Mode::Teleported { outcome }) => {
                let upstream = self.upstream_class(ctx.run, ctx.bits, |j| ctx.class_of(j));
                let phase = match (upstream, outcome) {
                    (Some(class), _) => {
                        quantum::effective_phase_after_bell(outcome, st.twist, basis_of(class).offset())
                    }
                    (None, BellOutcome::PhiPlus | BellOutcome::PhiMinus) => {
                        quantum::effective_phase_after_bell(outcome, st.twist, PhaseAngle::ZERO)
                    }
                    (None, _) => {
                        self.log.guessed_runs.push(ctx.run);
                        st.twist + if rng.gen() { PhaseAngle::PI } else { PhaseAngle::ZERO }
                    }
                };
                Ok(Content::Value { phase, outcome: None })
            }
            (ValueRequest::ZMeasure, Mode::Held) => {
                // A genuine class Z action on the retained input; the
                // forwarded qubit is steered to a known phase.
                let pre = if rng.gen() { PhaseAngle::HALF_PI } else { PhaseAngle::ZERO };
                reg.state = quantum::apply_phase(&reg.state, 0, pre)?;
                let (outcome, post_state) = quantum::measure(&reg.state, 0, Basis::X, rng)?;
                reg.state = post_state;
                let after = steer(reg, Basis::random(rng), st.twist, rng)?;
                let post = after - outcome.phase();
                self.runs[ctx.run] = Some(RunState { mode: Mode::Emulated { post }, ..st });
                Ok(Content::ZMeasure { pre, outcome: outcome.sign })
            }
            (ValueRequest::ZResend, Mode::Emulated { post }) => Ok(Content::ZResend { post }),
            (request, mode) => Err(refuse(ctx.position, format!("cannot answer {request:?} in state {mode:?}"))),
        }
    }

    fn cheater_log(&self) -> Option<&CheaterLog> {
        Some(&self.log)
    }
}
