use rand::RngCore;

use super::{CheaterLog, Honest, InferenceStage, Quantity};
use crate::protocol::{
    ActionClass, ActionRecord, BitContext, ClassContext, Content, LinkTap, ProtocolError, Register, RunContext,
    StartContext, Strategy, ValueContext,
};
use crate::quantum::Basis;

/// Measures the incoming qubit in a random basis, then behaves honestly.
pub struct Intercept {
    inner: Honest,
    log: CheaterLog,
}

impl Intercept {
    pub fn new() -> Self {
        Intercept { inner: Honest::new(), log: CheaterLog::default() }
    }
}

impl Default for Intercept {
    fn default() -> Self {
        Self::new()
    }
}

fn intercept(
    ctx: &RunContext,
    reg: &mut Register,
    log: &mut CheaterLog,
    rng: &mut dyn RngCore,
) -> Result<(), ProtocolError> {
    let outcome = reg.measure_travel(Basis::random(rng), rng)?;
    log.infer(ctx.run, Quantity::Upstream, outcome.phase(), InferenceStage::Receive);
    Ok(())
}

impl Strategy for Intercept {
    fn on_start(&mut self, ctx: &StartContext<'_>, rng: &mut dyn RngCore) -> Result<(), ProtocolError> {
        self.log = CheaterLog::new(ctx.position);
        self.inner.start(ctx, rng)
    }

    fn on_receive(
        &mut self,
        ctx: &RunContext,
        reg: &mut Register,
        rng: &mut dyn RngCore,
    ) -> Result<ActionRecord, ProtocolError> {
        intercept(ctx, reg, &mut self.log, rng)?;
        self.inner.act(ctx, reg, rng)
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

    fn cheater_log(&self) -> Option<&CheaterLog> {
        Some(&self.log)
    }
}

/// Eavesdropper on the link into `position`: measures the passing qubit in
/// a random basis and lets the collapsed state through.
pub struct InterceptTap {
    log: CheaterLog,
}

impl InterceptTap {
    pub fn new(position: usize) -> Self {
        InterceptTap { log: CheaterLog::new(position) }
    }
}

impl LinkTap for InterceptTap {
    fn on_link(&mut self, ctx: &RunContext, reg: &mut Register, rng: &mut dyn RngCore) -> Result<(), ProtocolError> {
        intercept(ctx, reg, &mut self.log, rng)
    }

    fn cheater_log(&self) -> Option<&CheaterLog> {
        Some(&self.log)
    }
}
