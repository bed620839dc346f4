use rand::Rng;

use super::transcript::{AnnouncementEvent, CheckVerdict, Content, RunRecord, Transcript};
use super::{class_of, predict_from_total, ActionClass, Prediction, ProtocolError, SecureCode, Variant};
use crate::codes::Codeword;
use crate::quantum::{PhaseAngle, Sign};

/// Runs whose announced classes contain an even number of Y and, in the
/// secure variant, whose middle participants all announced bit 0.
pub fn valid_runs(transcript: &Transcript) -> Vec<usize> {
    valid_runs_from(&transcript.runs, transcript.config.variant, transcript.config.participants)
}

pub(crate) fn valid_runs_from(runs: &[RunRecord], variant: Variant, n: usize) -> Vec<usize> {
    runs.iter()
        .filter(|r| {
            if variant == Variant::Secure && (2..n).any(|p| r.announced_bit(p) != Some(false)) {
                return false;
            }
            let classes: Vec<Option<ActionClass>> = (1..=n).map(|p| r.announced_class(p)).collect();
            if classes.iter().any(|c| c.is_none()) {
                return false;
            }
            classes.iter().filter(|c| **c == Some(ActionClass::Y)).count() % 2 == 0
        })
        .map(|r| r.idx)
        .collect()
}

/// Uniformly chosen `round(fraction * |valid|)` runs, sorted.
pub fn choose_check_subset<R: Rng + ?Sized>(valid: &[usize], fraction: f64, rng: &mut R) -> Vec<usize> {
    let m = ((fraction * valid.len() as f64).round() as usize).min(valid.len());
    let mut picked: Vec<usize> = rand::seq::index::sample(rng, valid.len(), m).into_iter().map(|i| valid[i]).collect();
    picked.sort_unstable();
    picked
}

/// Every middle participant's announced bit string must be a codeword of
/// weight `w`.
pub fn security_check_1(transcript: &Transcript, code: &SecureCode) -> CheckVerdict {
    let n = transcript.config.participants;
    let mut failing = Vec::new();
    for p in 2..n {
        let bits: Option<Vec<bool>> = transcript.runs.iter().map(|r| r.announced_bit(p)).collect();
        let ok = bits
            .and_then(|b| Codeword::from_bools(&b).ok())
            .is_some_and(|word| word.len() == code.code.n() && word.weight() == code.w && code.code.contains(&word));
        if !ok {
            failing.push(p);
        }
    }
    CheckVerdict {
        check: 1,
        pass: failing.is_empty(),
        failing_runs: Vec::new(),
        failing_participants: failing,
        interval: None,
    }
}

fn value_of(events: &[AnnouncementEvent], p: usize) -> Option<(PhaseAngle, Option<Sign>)> {
    events.iter().find_map(|e| match e.content {
        Content::Value { phase, outcome } if e.participant == p => Some((phase, outcome)),
        _ => None,
    })
}

fn z_measure_of(events: &[AnnouncementEvent], p: usize) -> Option<(PhaseAngle, Sign)> {
    events.iter().find_map(|e| match e.content {
        Content::ZMeasure { pre, outcome } if e.participant == p => Some((pre, outcome)),
        _ => None,
    })
}

fn z_resend_of(events: &[AnnouncementEvent], p: usize) -> Option<PhaseAngle> {
    events.iter().find_map(|e| match e.content {
        Content::ZResend { post } if e.participant == p => Some(post),
        _ => None,
    })
}

/// A class announcement contradicted by the later value announcement.
fn class_mismatch(run: &RunRecord, p: usize, phase: PhaseAngle) -> bool {
    run.announced_class(p).is_some_and(|c| c != class_of(phase))
}

/// Sign forced by a class-X cumulative phase before an X measurement.
fn forced(total: PhaseAngle) -> Option<Sign> {
    match predict_from_total(total) {
        Prediction::Deterministic(s) => Some(s),
        Prediction::Random => None,
    }
}

/// Failure interval of a run without class Z, `None` if consistent.
fn evaluate_plain(run: &RunRecord, n: usize) -> Option<(usize, usize)> {
    let events = run.value_events();
    let mut total = PhaseAngle::ZERO;
    let mut rn_outcome = None;
    for p in 1..=n {
        let Some((phase, outcome)) = value_of(events, p) else {
            return Some((1, n));
        };
        if class_mismatch(run, p, phase) {
            return Some((p, p));
        }
        total += phase;
        if p == n {
            rn_outcome = outcome;
        }
    }
    match (forced(total), rn_outcome) {
        (Some(expected), Some(seen)) if expected == seen => None,
        _ => Some((1, n)),
    }
}

/// Walks the segments between consecutive X measurements of a run
/// containing class Z actions.
fn evaluate_chain(run: &RunRecord, n: usize) -> Option<(usize, usize)> {
    let events = run.value_events();
    let Some(first) = z_resend_of(events, 1) else {
        return Some((1, n));
    };
    if class_mismatch(run, 1, first) {
        return Some((1, 1));
    }
    let mut cumulative = first;
    let mut segment_start = 1;
    for p in 2..=n {
        let z_actor = p == n || run.announced_bit(p) == Some(true);
        if !z_actor {
            let Some((phase, _)) = value_of(events, p) else {
                return Some((segment_start, n));
            };
            if class_mismatch(run, p, phase) {
                return Some((p, p));
            }
            cumulative += phase;
            continue;
        }
        let Some((pre, outcome)) = z_measure_of(events, p) else {
            return Some((segment_start, n));
        };
        if p == n && class_mismatch(run, p, pre) {
            return Some((p, p));
        }
        cumulative += pre;
        if forced(cumulative).is_some_and(|s| s != outcome) {
            return Some((segment_start, p));
        }
        if p == n {
            break;
        }
        let Some(post) = z_resend_of(events, p) else {
            return Some((p, n));
        };
        cumulative = outcome.phase() + post;
        segment_start = p;
    }
    None
}

fn combine(intervals: &[(usize, usize)]) -> Option<(usize, usize)> {
    let lo = intervals.iter().map(|i| i.0).max()?;
    let hi = intervals.iter().map(|i| i.1).min()?;
    if lo <= hi {
        Some((lo, hi))
    } else {
        let lo = intervals.iter().map(|i| i.0).min()?;
        let hi = intervals.iter().map(|i| i.1).max()?;
        Some((lo, hi))
    }
}

/// Announced values must reproduce the measured outcomes wherever they are
/// deterministic. Failing runs are localised to the shortest participant
/// interval consistent with all failures.
pub fn security_check_2(transcript: &Transcript) -> CheckVerdict {
    let n = transcript.config.participants;
    let mut failing_runs = Vec::new();
    let mut intervals = Vec::new();
    for run in transcript.runs.iter().filter(|r| r.announcements.value_stage.is_some()) {
        let result = if run.has_z() { evaluate_chain(run, n) } else { evaluate_plain(run, n) };
        if let Some(interval) = result {
            failing_runs.push(run.idx);
            intervals.push(interval);
        }
    }
    let interval = combine(&intervals);
    CheckVerdict { check: 2, pass: failing_runs.is_empty(), failing_runs, failing_participants: Vec::new(), interval }
}

pub(crate) fn compute_verdicts(transcript: &Transcript, code: Option<&SecureCode>) -> Vec<CheckVerdict> {
    let mut verdicts = Vec::with_capacity(2);
    if let Some(code) = code.filter(|_| transcript.config.variant == Variant::Secure) {
        verdicts.push(security_check_1(transcript, code));
    }
    verdicts.push(security_check_2(transcript));
    verdicts
}

/// Recomputes the verdicts of a recorded transcript from its announcements.
pub fn recheck(transcript: &Transcript) -> Result<Vec<CheckVerdict>, ProtocolError> {
    let code = match &transcript.config.code {
        Some(file) => Some(SecureCode::new(file.to_code()?, file.w)),
        None if transcript.config.variant == Variant::Secure => return Err(ProtocolError::MissingCode),
        None => None,
    };
    Ok(compute_verdicts(transcript, code.as_ref()))
}

/// Phase of `target` as computed by every other participant pooling their
/// phases (and the measurer's outcome). When the measurer is the target its
/// outcome is withheld, so the result equals its phase minus its outcome.
pub fn reconstruct_secret(
    transcript: &Transcript,
    run: usize,
    coalition: &[usize],
    target: usize,
) -> Result<PhaseAngle, ProtocolError> {
    let n = transcript.config.participants;
    let record = transcript.runs.get(run).filter(|r| r.valid).ok_or(ProtocolError::RunNotValid(run))?;
    let mut members = coalition.to_vec();
    members.sort_unstable();
    members.dedup();
    let expected: Vec<usize> = (1..=n).filter(|p| *p != target).collect();
    if members != expected {
        return Err(ProtocolError::CoalitionWrongSize { expected: n - 1 });
    }
    let mut sum = PhaseAngle::ZERO;
    for &p in &members {
        let phase = record
            .action(p)
            .single_phase()
            .ok_or_else(|| ProtocolError::Strategy { position: p, message: "no single phase recorded".into() })?;
        sum += phase;
    }
    let total = if members.contains(&n) { record.rn_outcome.phase() } else { PhaseAngle::ZERO };
    Ok(total - sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_intersection_then_hull() {
        assert_eq!(combine(&[(1, 5), (2, 4)]), Some((2, 4)));
        assert_eq!(combine(&[(1, 2), (4, 5)]), Some((1, 5)));
        assert_eq!(combine(&[]), None);
    }

    #[test]
    fn subset_size() {
        let mut rng = rand::thread_rng();
        let valid: Vec<usize> = (0..9).collect();
        assert_eq!(choose_check_subset(&valid, 0.5, &mut rng).len(), 5);
        assert!(choose_check_subset(&[], 0.5, &mut rng).is_empty());
    }
}
