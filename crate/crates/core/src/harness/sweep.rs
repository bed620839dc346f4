use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{attack, AttackReport, Experiment, HarnessError};
use crate::adversary::Placement;
use crate::codes::find_code;
use crate::protocol::{SecureCode, Variant};

/// Code search attempts per dimension when a sweep draws fresh codes.
const CODE_TRIES: usize = 300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Number of runs; the secure variant draws a pool of codes with
    /// `w = ceil(0.7 n)` for every value.
    Runs,
    Participants,
}

impl std::str::FromStr for SweepParameter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "n" | "runs" => Ok(SweepParameter::Runs),
            "N" | "participants" => Ok(SweepParameter::Participants),
            _ => Err(format!("unknown sweep parameter {s:?} (n|N)")),
        }
    }
}

impl std::fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepParameter::Runs => "n",
            SweepParameter::Participants => "N",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub base: Experiment,
    pub parameter: SweepParameter,
    pub values: Vec<usize>,
    /// Cheater position to keep across cells; the default placement otherwise.
    pub cheater: Option<usize>,
    /// Honest pair to keep across cells.
    pub honest: Option<(usize, usize)>,
    /// Codes drawn per value of `n` in secure sweeps.
    pub code_pool: usize,
}

/// One cell of a sweep. Failed cells carry the error and no rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: usize,
    pub trials: usize,
    pub codes: usize,
    pub code_d_min: Option<usize>,
    pub code_d_max: Option<usize>,
    pub detection_rate: Option<f64>,
    pub detection_ci_low: Option<f64>,
    pub detection_ci_high: Option<f64>,
    pub valid_run_rate: Option<f64>,
    pub pass_probability: Option<f64>,
    pub pass_ci_low: Option<f64>,
    pub pass_ci_high: Option<f64>,
    pub secret_recovery_rate: Option<f64>,
    pub epsilon_estimate: Option<f64>,
    pub epsilon_ci_low: Option<f64>,
    pub epsilon_ci_high: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(parameter: SweepParameter, value: usize, trials: usize, error: &HarnessError) -> Self {
        SweepRow {
            parameter: parameter.to_string(),
            value,
            trials,
            codes: 0,
            code_d_min: None,
            code_d_max: None,
            detection_rate: None,
            detection_ci_low: None,
            detection_ci_high: None,
            valid_run_rate: None,
            pass_probability: None,
            pass_ci_low: None,
            pass_ci_high: None,
            secret_recovery_rate: None,
            epsilon_estimate: None,
            epsilon_ci_low: None,
            epsilon_ci_high: None,
            error: Some(error.to_string()),
        }
    }

    fn from_report(parameter: SweepParameter, value: usize, exp: &Experiment, r: &AttackReport) -> Self {
        let distances: Vec<usize> = match exp.code_pool.is_empty() {
            true => exp.protocol.code.iter().map(|c| c.code.min_distance()).collect(),
            false => exp.code_pool.iter().map(|c| c.code.min_distance()).collect(),
        };
        SweepRow {
            parameter: parameter.to_string(),
            value,
            trials: r.trials,
            codes: distances.len(),
            code_d_min: distances.iter().min().copied(),
            code_d_max: distances.iter().max().copied(),
            detection_rate: Some(r.detection_rate.rate),
            detection_ci_low: Some(r.detection_rate.ci_low),
            detection_ci_high: Some(r.detection_rate.ci_high),
            valid_run_rate: Some(r.valid_run_rate.rate),
            pass_probability: Some(r.pass_probability.rate),
            pass_ci_low: Some(r.pass_probability.ci_low),
            pass_ci_high: Some(r.pass_probability.ci_high),
            secret_recovery_rate: r.secret_recovery_rate.map(|e| e.rate),
            epsilon_estimate: r.epsilon_estimate.map(|e| e.rate),
            epsilon_ci_low: r.epsilon_estimate.map(|e| e.ci_low),
            epsilon_ci_high: r.epsilon_estimate.map(|e| e.ci_high),
            error: None,
        }
    }
}

/// `ceil(0.7 n)`.
pub fn default_weight(n: usize) -> usize {
    (7 * n).div_ceil(10)
}

/// `count` codes of length `n` and weight `ceil(0.7 n)`, each from its own
/// random stream.
pub fn code_pool(seed: u64, n: usize, count: usize) -> Result<Vec<SecureCode>, HarnessError> {
    let w = default_weight(n);
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1 << 63 | (n as u64) << 32 | i as u64);
            let (code, _) = find_code(n, w, 2, &mut rng, CODE_TRIES)?;
            Ok(SecureCode::new(code, w))
        })
        .collect()
}

fn cell(spec: &SweepSpec, value: usize) -> Result<Experiment, HarnessError> {
    let mut exp = spec.base.clone();
    match spec.parameter {
        SweepParameter::Runs => {
            exp.protocol.runs = value;
            if exp.protocol.variant == Variant::Secure {
                exp.code_pool = code_pool(exp.protocol.seed, value, spec.code_pool.max(1))?;
                exp.protocol = exp.protocol.with_code(exp.code_pool[0].code.clone(), exp.code_pool[0].w);
            }
        }
        SweepParameter::Participants => exp.protocol.participants = value,
    }
    exp.placement = Placement::default_for(exp.strategy, spec.cheater, exp.protocol.participants);
    if let Some((a, b)) = spec.honest {
        exp.placement.honest = (a, b);
    }
    Ok(exp)
}

/// One report per value, in ascending order. A failing cell is recorded and
/// the sweep goes on.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, HarnessError> {
    if spec.values.is_empty() {
        return Err(HarnessError::Config("sweep needs at least one value".into()));
    }
    if spec.values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HarnessError::Config("sweep values must be strictly ascending".into()));
    }
    Ok(spec
        .values
        .iter()
        .map(|&value| {
            let result = cell(spec, value).and_then(|exp| attack(&exp).map(|r| (exp, r)));
            match result {
                Ok((exp, report)) => SweepRow::from_report(spec.parameter, value, &exp, &report),
                Err(e) => SweepRow::failed(spec.parameter, value, spec.base.trials, &e),
            }
        })
        .collect())
}

pub fn rows_to_csv(rows: &[SweepRow]) -> Result<String, HarnessError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    let bytes = writer.into_inner().map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
