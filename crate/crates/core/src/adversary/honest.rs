use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use super::SharedChannel;
use crate::codes::Codeword;
use crate::protocol::{
    class_of, ActionClass, ActionRecord, BitContext, ClassContext, Content, ProtocolError, Register, RunContext,
    StartContext, Strategy, ValueContext, ValueRequest, Variant,
};
use crate::quantum::{Basis, PhaseAngle};

/// Follows the protocol: uniform phases, codeword-driven Z actions in the
/// secure variant, truthful announcements.
#[derive(Debug, Default)]
pub struct Honest {
    position: usize,
    codeword: Option<Codeword>,
    actions: Vec<Option<ActionRecord>>,
}

impl Honest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn codeword(&self) -> Option<Codeword> {
        self.codeword
    }

    pub fn action(&self, run: usize) -> Option<&ActionRecord> {
        self.actions.get(run).and_then(|a| a.as_ref())
    }

    fn bit(&self, run: usize) -> Option<bool> {
        self.codeword.map(|c| c.bit(run))
    }

    pub(crate) fn start(&mut self, ctx: &StartContext<'_>, rng: &mut dyn RngCore) -> Result<(), ProtocolError> {
        self.position = ctx.position;
        self.actions = vec![None; ctx.runs];
        let middle = ctx.position > 1 && ctx.position < ctx.participants;
        if ctx.variant == Variant::Secure && middle {
            let code = ctx.code.ok_or(ProtocolError::MissingCode)?;
            let word = code.weight_w_words().choose(rng).copied().ok_or_else(|| ProtocolError::Strategy {
                position: ctx.position,
                message: format!("no codeword of weight {}", code.w),
            })?;
            self.codeword = Some(word);
        }
        Ok(())
    }

    pub(crate) fn act(
        &mut self,
        ctx: &RunContext,
        reg: &mut Register,
        rng: &mut dyn RngCore,
    ) -> Result<ActionRecord, ProtocolError> {
        let bit = self.bit(ctx.run);
        let mut action = if bit == Some(true) {
            let pre = if rng.gen() { PhaseAngle::HALF_PI } else { PhaseAngle::ZERO };
            reg.apply_phase(pre)?;
            let outcome = reg.measure_travel(Basis::X, rng)?;
            let post = PhaseAngle::random(rng);
            reg.apply_phase(post)?;
            ActionRecord::z(ctx.position, pre, outcome.sign, post)
        } else {
            let phase = PhaseAngle::random(rng);
            reg.apply_phase(phase)?;
            ActionRecord::phase(ctx.position, phase)
        };
        action.bit = bit;
        self.actions[ctx.run] = Some(action.clone());
        Ok(action)
    }

    fn recorded(&self, run: usize) -> Result<&ActionRecord, ProtocolError> {
        self.action(run).ok_or_else(|| ProtocolError::Strategy {
            position: self.position,
            message: format!("no action recorded for run {run}"),
        })
    }
}

/// Truthful disclosure of `action` for the requested announcement.
pub(crate) fn disclose(action: &ActionRecord, ctx: &ValueContext<'_>) -> Result<Content, ProtocolError> {
    let missing = || ProtocolError::Strategy { position: ctx.position, message: "nothing to disclose".into() };
    let is_z = action.class == Some(ActionClass::Z);
    Ok(match ctx.request {
        ValueRequest::Phase => {
            Content::Value { phase: action.single_phase().ok_or_else(missing)?, outcome: ctx.own_outcome }
        }
        ValueRequest::ZMeasure if is_z => {
            Content::ZMeasure { pre: action.phases[0], outcome: action.z_outcome.ok_or_else(missing)? }
        }
        ValueRequest::ZMeasure => Content::ZMeasure {
            pre: action.single_phase().ok_or_else(missing)?,
            outcome: ctx.own_outcome.ok_or_else(missing)?,
        },
        ValueRequest::ZResend if is_z => Content::ZResend { post: action.phases[1] },
        ValueRequest::ZResend => Content::ZResend { post: action.single_phase().ok_or_else(missing)? },
    })
}

impl Strategy for Honest {
    fn on_start(&mut self, ctx: &StartContext<'_>, rng: &mut dyn RngCore) -> Result<(), ProtocolError> {
        self.start(ctx, rng)
    }

    fn on_receive(
        &mut self,
        ctx: &RunContext,
        reg: &mut Register,
        rng: &mut dyn RngCore,
    ) -> Result<ActionRecord, ProtocolError> {
        self.act(ctx, reg, rng)
    }

    fn on_bit_turn(&mut self, ctx: &BitContext<'_>, _rng: &mut dyn RngCore) -> Result<bool, ProtocolError> {
        self.bit(ctx.run)
            .ok_or_else(|| ProtocolError::Strategy { position: ctx.position, message: "no codeword held".into() })
    }

    fn on_class_turn(
        &mut self,
        ctx: &ClassContext<'_>,
        _reg: &mut Register,
        _rng: &mut dyn RngCore,
    ) -> Result<ActionClass, ProtocolError> {
        let action = self.recorded(ctx.run)?;
        action.single_phase().map(class_of).ok_or_else(|| ProtocolError::Strategy {
            position: ctx.position,
            message: "class Z action has no class to announce".into(),
        })
    }

    fn on_value_turn(
        &mut self,
        ctx: &ValueContext<'_>,
        _reg: &mut Register,
        _rng: &mut dyn RngCore,
    ) -> Result<Content, ProtocolError> {
        disclose(self.recorded(ctx.run)?, ctx)
    }
}

/// An honest participant that also posts each action to its coalition.
pub struct Sharing {
    inner: Honest,
    channel: SharedChannel,
}

impl Sharing {
    pub fn new(channel: SharedChannel) -> Self {
        Sharing { inner: Honest::new(), channel }
    }
}

impl Strategy for Sharing {
    fn on_start(&mut self, ctx: &StartContext<'_>, rng: &mut dyn RngCore) -> Result<(), ProtocolError> {
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
        self.inner.on_class_turn(ctx, reg, rng)
    }

    fn on_value_turn(
        &mut self,
        ctx: &ValueContext<'_>,
        reg: &mut Register,
        rng: &mut dyn RngCore,
    ) -> Result<Content, ProtocolError> {
        self.inner.on_value_turn(ctx, reg, rng)
    }
}
