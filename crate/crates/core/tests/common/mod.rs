#![allow(dead_code)]

pub mod oracles;

use qsslab::adversary::Honest;
use qsslab::protocol::{
    class_of, ActionClass, ActionRecord, BitContext, ClassContext, Content, ProtocolError, Register, RunContext,
    Strategy, ValueContext, ValueRequest,
};
use qsslab::quantum::{Basis, PhaseAngle};
use rand::RngCore;

/// A prescribed action for one run.
#[derive(Clone, Copy, Debug)]
pub enum Act {
    Phase(PhaseAngle),
    /// Phase, X measurement, phase.
    Z(PhaseAngle, PhaseAngle),
}

/// Honest participant whose actions are fixed in advance.
pub struct Scripted {
    acts: Vec<Act>,
    done: Vec<Option<ActionRecord>>,
}

impl Scripted {
    pub fn new(acts: Vec<Act>) -> Self {
        let done = vec![None; acts.len()];
        Scripted { acts, done }
    }

    fn record(&self, run: usize, position: usize) -> Result<&ActionRecord, ProtocolError> {
        self.done[run].as_ref().ok_or(ProtocolError::Strategy { position, message: "no action".into() })
    }
}

impl Strategy for Scripted {
    fn on_receive(
        &mut self,
        ctx: &RunContext,
        reg: &mut Register,
        rng: &mut dyn RngCore,
    ) -> Result<ActionRecord, ProtocolError> {
        let record = match self.acts[ctx.run] {
            Act::Phase(p) => {
                reg.apply_phase(p)?;
                ActionRecord::phase(ctx.position, p)
            }
            Act::Z(pre, post) => {
                reg.apply_phase(pre)?;
                let outcome = reg.measure_travel(Basis::X, rng)?;
                reg.apply_phase(post)?;
                ActionRecord::z(ctx.position, pre, outcome.sign, post)
            }
        };
        self.done[ctx.run] = Some(record.clone());
        Ok(record)
    }

    fn on_bit_turn(&mut self, ctx: &BitContext<'_>, _rng: &mut dyn RngCore) -> Result<bool, ProtocolError> {
        Ok(matches!(self.acts[ctx.run], Act::Z(..)))
    }

    fn on_class_turn(
        &mut self,
        ctx: &ClassContext<'_>,
        _reg: &mut Register,
        _rng: &mut dyn RngCore,
    ) -> Result<ActionClass, ProtocolError> {
        match self.acts[ctx.run] {
            Act::Phase(p) => Ok(class_of(p)),
            Act::Z(..) => Err(ProtocolError::Strategy { position: ctx.position, message: "Z has no class".into() }),
        }
    }

    fn on_value_turn(
        &mut self,
        ctx: &ValueContext<'_>,
        _reg: &mut Register,
        _rng: &mut dyn RngCore,
    ) -> Result<Content, ProtocolError> {
        let record = self.record(ctx.run, ctx.position)?;
        let missing = || ProtocolError::Strategy { position: ctx.position, message: "no outcome".into() };
        Ok(match (ctx.request, self.acts[ctx.run]) {
            (ValueRequest::Phase, Act::Phase(p)) => Content::Value { phase: p, outcome: ctx.own_outcome },
            (ValueRequest::ZMeasure, Act::Z(pre, _)) => {
                Content::ZMeasure { pre, outcome: record.z_outcome.ok_or_else(missing)? }
            }
            (ValueRequest::ZMeasure, Act::Phase(p)) => {
                Content::ZMeasure { pre: p, outcome: ctx.own_outcome.ok_or_else(missing)? }
            }
            (ValueRequest::ZResend, Act::Z(_, post)) => Content::ZResend { post },
            (ValueRequest::ZResend, Act::Phase(p)) => Content::ZResend { post: p },
            (request, act) => {
                return Err(ProtocolError::Strategy {
                    position: ctx.position,
                    message: format!("{request:?} for {act:?}"),
                })
            }
        })
    }
}

pub fn honest(n: usize) -> Vec<Box<dyn Strategy>> {
    (0..n).map(|_| Box::new(Honest::new()) as Box<dyn Strategy>).collect()
}

/// Every tuple of `n` quarter-turn phases, first participant slowest.
pub fn all_tuples(n: usize) -> Vec<Vec<PhaseAngle>> {
    (0..4usize.pow(n as u32))
        .map(|mut i| {
            let mut t = vec![PhaseAngle::ZERO; n];
            for slot in t.iter_mut().rev() {
                *slot = PhaseAngle::from_quarter_turns((i % 4) as i64);
                i /= 4;
            }
            t
        })
        .collect()
}

/// Scripted participants running `tuples[r]` in run `r`.
pub fn scripted_from_tuples(tuples: &[Vec<PhaseAngle>]) -> Vec<Box<dyn Strategy>> {
    let n = tuples[0].len();
    (0..n)
        .map(|p| Box::new(Scripted::new(tuples.iter().map(|t| Act::Phase(t[p])).collect())) as Box<dyn Strategy>)
        .collect()
}
