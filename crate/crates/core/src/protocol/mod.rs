//! Protocol state machines: qubit-passing rounds, announcement stages,
//! valid-run selection, both consistency checks and secret reconstruction.
//!
//! Participants are numbered from 1 (`R1`, the preparer) to `N` (`RN`, the
//! measurer) everywhere in this module.

mod checks;
mod engine;
mod transcript;

pub use checks::{choose_check_subset, recheck, reconstruct_secret, security_check_1, security_check_2, valid_runs};
pub use engine::{
    run_protocol, BitContext, ClassContext, LinkTap, Register, RunContext, StartContext, Strategy, ValueContext,
    ValueRequest,
};
pub use transcript::{
    ActionRecord, AnnouncementEvent, CheckVerdict, ConfigEcho, Content, Reconstruction, RunRecord, Stage, Transcript,
};

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codes::{validate_params, CodeError, Codeword, LinearCode};
use crate::quantum::{PhaseAngle, QuantumError, Sign};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("config: {0}")]
    Config(String),
    #[error("secure variant requires a code file")]
    MissingCode,
    #[error("expected {expected} strategies, got {found}")]
    StrategyCount { expected: usize, found: usize },
    #[error("strategy at R{position}: {message}")]
    Strategy { position: usize, message: String },
    #[error("run {0} is not a valid run")]
    RunNotValid(usize),
    #[error("coalition must have exactly {expected} members excluding the target")]
    CoalitionWrongSize { expected: usize },
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Code(#[from] CodeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Original,
    #[serde(rename = "mod1")]
    Modified1,
    #[serde(rename = "mod2")]
    Modified2,
    Secure,
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(Variant::Original),
            "mod1" | "modified1" => Ok(Variant::Modified1),
            "mod2" | "modified2" => Ok(Variant::Modified2),
            "secure" => Ok(Variant::Secure),
            _ => Err(format!("unknown variant {s:?} (original|mod1|mod2|secure)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionClass {
    X,
    Y,
    Z,
}

/// X for phases 0 and pi, Y for pi/2 and 3pi/2.
pub fn class_of(phase: PhaseAngle) -> ActionClass {
    if phase.is_class_x() {
        ActionClass::X
    } else {
        ActionClass::Y
    }
}

/// Outcome of an X measurement on `|+x>` after the given phases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Prediction {
    Deterministic(Sign),
    Random,
}

pub fn predict_outcome(phases: &[PhaseAngle]) -> Prediction {
    predict_from_total(phases.iter().copied().sum())
}

pub(crate) fn predict_from_total(total: PhaseAngle) -> Prediction {
    match total {
        PhaseAngle::ZERO => Prediction::Deterministic(Sign::Plus),
        PhaseAngle::PI => Prediction::Deterministic(Sign::Minus),
        _ => Prediction::Random,
    }
}

/// Order in which the value stage is run for checked valid runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueOrder {
    Random,
    /// The given participant announces first, the rest in random order.
    First(usize),
    /// The given participant announces last, the rest in random order.
    Last(usize),
}

/// Code and weight agreed on for the secure variant, with its weight-`w`
/// codewords cached.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecureCode {
    pub code: LinearCode,
    pub w: usize,
    words: Arc<Vec<Codeword>>,
}

impl SecureCode {
    pub fn new(code: LinearCode, w: usize) -> Self {
        let words = Arc::new(code.codewords_of_weight(w));
        SecureCode { code, w, words }
    }

    /// Sorted codewords of weight `w`.
    pub fn weight_w_words(&self) -> &[Codeword] {
        &self.words
    }
}

#[derive(Clone, Debug)]
pub struct ProtocolConfig {
    pub variant: Variant,
    pub participants: usize,
    pub runs: usize,
    pub check_fraction: f64,
    pub code: Option<SecureCode>,
    pub seed: u64,
    pub value_order: ValueOrder,
}

impl ProtocolConfig {
    pub fn new(variant: Variant, participants: usize, runs: usize, seed: u64) -> Self {
        ProtocolConfig {
            variant,
            participants,
            runs,
            check_fraction: 0.5,
            code: None,
            seed,
            value_order: ValueOrder::Random,
        }
    }

    pub fn with_code(mut self, code: LinearCode, w: usize) -> Self {
        self.runs = code.n();
        self.code = Some(SecureCode::new(code, w));
        self
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.participants < 3 {
            return Err(ProtocolError::Config(format!("need at least 3 participants, got {}", self.participants)));
        }
        if self.runs == 0 {
            return Err(ProtocolError::Config("need at least one run".into()));
        }
        if !(self.check_fraction > 0.0 && self.check_fraction < 1.0) {
            return Err(ProtocolError::Config(format!(
                "check fraction must lie in (0, 1), got {}",
                self.check_fraction
            )));
        }
        if let ValueOrder::First(p) | ValueOrder::Last(p) = self.value_order {
            if p == 0 || p > self.participants {
                return Err(ProtocolError::Config(format!("value-order override names unknown R{p}")));
            }
        }
        if self.variant == Variant::Secure {
            let sc = self.code.as_ref().ok_or(ProtocolError::MissingCode)?;
            if sc.code.n() != self.runs {
                return Err(ProtocolError::Config(format!(
                    "code length {} differs from run count {}",
                    sc.code.n(),
                    self.runs
                )));
            }
            if !validate_params(sc.code.n(), sc.w, sc.code.min_distance()) {
                return Err(ProtocolError::Config(format!(
                    "code (n={}, d={}) violates the distance bounds for w={}",
                    sc.code.n(),
                    sc.code.min_distance(),
                    sc.w
                )));
            }
            if sc.weight_w_words().is_empty() {
                return Err(ProtocolError::Config(format!("code has no codeword of weight {}", sc.w)));
            }
        }
        Ok(())
    }

    /// Middle participants, the ones holding codewords in the secure variant.
    pub fn middle(&self) -> std::ops::RangeInclusive<usize> {
        2..=self.participants - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes() {
        assert_eq!(class_of(PhaseAngle::ZERO), ActionClass::X);
        assert_eq!(class_of(PhaseAngle::THREE_HALVES_PI), ActionClass::Y);
        assert_eq!(class_of(PhaseAngle::PI), ActionClass::X);
    }

    #[test]
    fn predictions() {
        use PhaseAngle as P;
        assert_eq!(predict_outcome(&[P::HALF_PI, P::HALF_PI, P::PI]), Prediction::Deterministic(Sign::Plus));
        assert_eq!(predict_outcome(&[P::HALF_PI, P::ZERO, P::ZERO]), Prediction::Random);
        assert_eq!(predict_outcome(&[P::PI, P::ZERO, P::ZERO]), Prediction::Deterministic(Sign::Minus));
    }

    #[test]
    fn config_validation() {
        assert!(ProtocolConfig::new(Variant::Original, 2, 10, 0).validate().is_err());
        let mut c = ProtocolConfig::new(Variant::Original, 3, 10, 0);
        c.check_fraction = 1.0;
        assert!(c.validate().is_err());
        let c = ProtocolConfig::new(Variant::Secure, 4, 16, 0);
        assert!(matches!(c.validate(), Err(ProtocolError::MissingCode)));
        let c = c.with_code(crate::codes::catalog::n16_w10(), 10);
        c.validate().unwrap();
    }
}
