use serde::{Deserialize, Serialize};

use super::{ActionClass, ProtocolConfig, ValueOrder, Variant};
use crate::codes::CodeFile;
use crate::quantum::{PhaseAngle, Sign};

/// Configuration as recorded in a transcript.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub variant: Variant,
    pub participants: usize,
    pub runs: usize,
    pub check_fraction: f64,
    pub seed: u64,
    pub value_order: ValueOrder,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<CodeFile>,
}

impl From<&ProtocolConfig> for ConfigEcho {
    fn from(c: &ProtocolConfig) -> Self {
        ConfigEcho {
            variant: c.variant,
            participants: c.participants,
            runs: c.runs,
            check_fraction: c.check_fraction,
            seed: c.seed,
            value_order: c.value_order,
            code: c.code.as_ref().map(|sc| CodeFile::from_code(&sc.code, sc.w)),
        }
    }
}

/// What a participant physically did in one run. `class` is `None` when the
/// participant substituted the register and no single phase describes it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub participant: usize,
    pub class: Option<ActionClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bit: Option<bool>,
    pub phases: Vec<PhaseAngle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_outcome: Option<Sign>,
}

impl ActionRecord {
    pub fn phase(participant: usize, phase: PhaseAngle) -> Self {
        ActionRecord {
            participant,
            class: Some(super::class_of(phase)),
            bit: None,
            phases: vec![phase],
            z_outcome: None,
        }
    }

    pub fn z(participant: usize, pre: PhaseAngle, outcome: Sign, post: PhaseAngle) -> Self {
        ActionRecord {
            participant,
            class: Some(ActionClass::Z),
            bit: None,
            phases: vec![pre, post],
            z_outcome: Some(outcome),
        }
    }

    pub fn opaque(participant: usize) -> Self {
        ActionRecord { participant, class: None, bit: None, phases: Vec::new(), z_outcome: None }
    }

    /// The single phase of an X/Y action.
    pub fn single_phase(&self) -> Option<PhaseAngle> {
        match self.class {
            Some(ActionClass::X | ActionClass::Y) => self.phases.first().copied(),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    BitStage,
    ClassStage,
    ValueStage,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Content {
    Bit(bool),
    Class(ActionClass),
    /// A single phase; the measurer also reveals its outcome.
    Value {
        phase: PhaseAngle,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        outcome: Option<Sign>,
    },
    /// First half of a class Z disclosure: pre-measurement phase and outcome.
    ZMeasure {
        pre: PhaseAngle,
        outcome: Sign,
    },
    /// Second half of a class Z disclosure: the re-send phase.
    ZResend {
        post: PhaseAngle,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnouncementEvent {
    pub stage: Stage,
    pub position: usize,
    pub participant: usize,
    pub content: Content,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Announcements {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bit_stage: Option<Vec<AnnouncementEvent>>,
    pub class_stage: Vec<AnnouncementEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_stage: Option<Vec<AnnouncementEvent>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub idx: usize,
    pub actions: Vec<ActionRecord>,
    pub rn_outcome: Sign,
    /// Phase of the travelling qubit after each participant, when it is a
    /// single equatorial qubit; entry 0 is the prepared `|+x>`.
    pub theta: Vec<Option<PhaseAngle>>,
    pub announcements: Announcements,
    pub valid: bool,
    pub checked: bool,
}

impl RunRecord {
    pub fn action(&self, participant: usize) -> &ActionRecord {
        &self.actions[participant - 1]
    }

    /// Announced bit of `participant`, if it took part in the bit stage.
    pub fn announced_bit(&self, participant: usize) -> Option<bool> {
        self.announcements.bit_stage.as_ref()?.iter().find_map(|e| match e.content {
            Content::Bit(b) if e.participant == participant => Some(b),
            _ => None,
        })
    }

    pub fn announced_class(&self, participant: usize) -> Option<ActionClass> {
        self.announcements.class_stage.iter().find_map(|e| match e.content {
            Content::Class(c) if e.participant == participant => Some(c),
            _ => None,
        })
    }

    /// True iff any middle participant announced bit 1.
    pub fn has_z(&self) -> bool {
        self.announcements.bit_stage.as_ref().is_some_and(|evs| evs.iter().any(|e| e.content == Content::Bit(true)))
    }

    pub fn value_events(&self) -> &[AnnouncementEvent] {
        self.announcements.value_stage.as_deref().unwrap_or(&[])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckVerdict {
    pub check: u8,
    pub pass: bool,
    pub failing_runs: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failing_participants: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub run: usize,
    pub target: usize,
    pub recovered: PhaseAngle,
    pub truth: Option<PhaseAngle>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub config: ConfigEcho,
    pub runs: Vec<RunRecord>,
    pub verdicts: Vec<CheckVerdict>,
    #[serde(default)]
    pub reconstructions: Vec<Reconstruction>,
}

impl Transcript {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn verdict(&self, check: u8) -> Option<&CheckVerdict> {
        self.verdicts.iter().find(|v| v.check == check)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transcript serialises")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}
