//! Exact detection probabilities by enumeration over quarter-turn phases.

use qsslab::quantum::PhaseAngle;

/// Probability that an equatorial qubit at `theta` is found at `beta`.
pub fn overlap(theta: PhaseAngle, beta: PhaseAngle) -> f64 {
    (1.0 + (theta - beta).radians().cos()) / 2.0
}

pub fn eigenphases() -> Vec<PhaseAngle> {
    PhaseAngle::ALL.to_vec()
}

/// Intercept-resend on the original protocol: exact detection probability
/// per checked valid run, by enumeration of the incoming phase, the basis,
/// the collapse and the downstream phase sum.
pub fn intercept_oracle() -> f64 {
    let (mut detected, mut valid) = (0.0, 0.0);
    for theta in eigenphases() {
        for downstream in eigenphases() {
            let total = theta + downstream;
            if !total.is_class_x() {
                continue;
            }
            valid += 1.0;
            for basis_offset in [PhaseAngle::ZERO, PhaseAngle::HALF_PI] {
                for sign in [PhaseAngle::ZERO, PhaseAngle::PI] {
                    let beta = basis_offset + sign;
                    let p_collapse = overlap(theta, beta) / 2.0;
                    // R_N measures X on beta + downstream; the announced sum
                    // predicts total.
                    let p_wrong = 1.0 - overlap(beta + downstream, total);
                    detected += p_collapse * p_wrong;
                }
            }
        }
    }
    detected / valid
}

/// Eavesdropper between two honest class Z actors: exact probability that
/// the second actor's announced outcome contradicts the announced chain.
pub fn both_z_oracle() -> f64 {
    let mut detected = 0.0;
    let mut weight = 0.0;
    for anchor in [PhaseAngle::ZERO, PhaseAngle::PI] {
        for post in eigenphases() {
            for pre in [PhaseAngle::ZERO, PhaseAngle::HALF_PI] {
                weight += 1.0;
                let sent = anchor + post;
                let cumulative = sent + pre;
                if !cumulative.is_class_x() {
                    continue;
                }
                for basis_offset in [PhaseAngle::ZERO, PhaseAngle::HALF_PI] {
                    for sign in [PhaseAngle::ZERO, PhaseAngle::PI] {
                        let beta = basis_offset + sign;
                        let p_collapse = overlap(sent, beta) / 2.0;
                        detected += p_collapse * (1.0 - overlap(beta + pre, cumulative));
                    }
                }
            }
        }
    }
    detected / weight
}
