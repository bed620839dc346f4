//! The exact simulator against a plain floating-point state-vector model.

use proptest::prelude::*;
use qsslab::quantum::{
    self, apply_phase, effective_phase_after_bell, equatorial_phase, extract_qubit, prepare_epr, tensor, Basis,
    BellOutcome, JointState, Outcome, PhaseAngle, Sign,
};

type C = (f64, f64);

const TOL: f64 = 1e-9;

fn mul(a: C, b: C) -> C {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn add(a: C, b: C) -> C {
    (a.0 + b.0, a.1 + b.1)
}

fn conj(a: C) -> C {
    (a.0, -a.1)
}

fn cis(phase: PhaseAngle) -> C {
    let t = phase.radians();
    (t.cos(), t.sin())
}

fn norm2(a: C) -> f64 {
    a.0 * a.0 + a.1 * a.1
}

/// Oracle model of an n-qubit register, qubit 0 most significant.
#[derive(Clone, Debug)]
struct Model {
    qubits: usize,
    amps: Vec<C>,
}

impl Model {
    fn of(state: &JointState) -> Model {
        Model { qubits: state.num_qubits(), amps: state.amplitudes() }
    }

    fn equatorial(theta: PhaseAngle) -> Model {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let e = cis(theta);
        Model { qubits: 1, amps: vec![(h, 0.0), (h * e.0, h * e.1)] }
    }

    fn kron(&self, other: &Model) -> Model {
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(mul(*a, *b));
            }
        }
        Model { qubits: self.qubits + other.qubits, amps }
    }

    fn bit(&self, index: usize, qubit: usize) -> usize {
        (index >> (self.qubits - 1 - qubit)) & 1
    }

    fn phase(&self, qubit: usize, phase: PhaseAngle) -> Model {
        let e = cis(phase);
        let amps =
            self.amps.iter().enumerate().map(|(i, a)| if self.bit(i, qubit) == 1 { mul(*a, e) } else { *a }).collect();
        Model { qubits: self.qubits, amps }
    }

    /// Probability and normalised post state of projecting `qubit` onto
    /// `(|0> + e^(i beta)|1>)/sqrt 2`.
    fn project(&self, qubit: usize, beta: PhaseAngle) -> (f64, Model) {
        let e = cis(beta);
        let m = 1 << (self.qubits - 1 - qubit);
        let mut amps = vec![(0.0, 0.0); self.amps.len()];
        let mut p = 0.0;
        for i in (0..self.amps.len()).filter(|i| i & m == 0) {
            let h = add(self.amps[i], mul(conj(e), self.amps[i | m]));
            let h = (h.0 / 2.0, h.1 / 2.0);
            p += 2.0 * norm2(h);
            amps[i] = h;
            amps[i | m] = mul(e, h);
        }
        (p, Model { qubits: self.qubits, amps }.normalised())
    }

    fn project_bell(&self, q1: usize, q2: usize, outcome: BellOutcome) -> (f64, Model) {
        let m1 = 1 << (self.qubits - 1 - q1);
        let m2 = 1 << (self.qubits - 1 - q2);
        let (a, b, s) = match outcome {
            BellOutcome::PhiPlus => (0, m1 | m2, 1.0),
            BellOutcome::PhiMinus => (0, m1 | m2, -1.0),
            BellOutcome::PsiPlus => (m2, m1, 1.0),
            BellOutcome::PsiMinus => (m2, m1, -1.0),
        };
        let mut amps = vec![(0.0, 0.0); self.amps.len()];
        let mut p = 0.0;
        for i in (0..self.amps.len()).filter(|i| i & (m1 | m2) == 0) {
            let x = self.amps[i | a];
            let y = self.amps[i | b];
            let h = ((x.0 + s * y.0) / 2.0, (x.1 + s * y.1) / 2.0);
            p += 2.0 * norm2(h);
            amps[i | a] = h;
            amps[i | b] = (s * h.0, s * h.1);
        }
        (p, Model { qubits: self.qubits, amps }.normalised())
    }

    fn normalised(mut self) -> Model {
        let n: f64 = self.amps.iter().map(|a| norm2(*a)).sum::<f64>().sqrt();
        if n > 0.0 {
            for a in &mut self.amps {
                *a = (a.0 / n, a.1 / n);
            }
        }
        self
    }

    fn fidelity(&self, other: &Model) -> f64 {
        let inner = self.amps.iter().zip(&other.amps).fold((0.0, 0.0), |acc, (a, b)| add(acc, mul(conj(*a), *b)));
        norm2(inner)
    }
}

fn assert_same(model: &Model, state: &JointState) {
    assert_eq!(model.qubits, state.num_qubits());
    for (i, (m, s)) in model.amps.iter().zip(state.amplitudes()).enumerate() {
        assert!((m.0 - s.0).abs() < TOL && (m.1 - s.1).abs() < TOL, "amplitude {i}: {m:?} vs {s:?}");
    }
}

fn phase_strategy() -> impl Strategy<Value = PhaseAngle> {
    (0u8..4).prop_map(|q| PhaseAngle::from_quarter_turns(q as i64))
}

/// Registers the protocol can produce: equatorial qubits and EPR pairs,
/// followed by phase kicks.
fn state_strategy() -> impl Strategy<Value = JointState> {
    let pieces = prop_oneof![
        phase_strategy().prop_map(|t| vec![JointState::equatorial(t)]),
        phase_strategy().prop_map(|t| vec![prepare_epr(t)]),
        (phase_strategy(), phase_strategy()).prop_map(|(a, b)| vec![JointState::equatorial(a), prepare_epr(b)]),
        (phase_strategy(), phase_strategy(), phase_strategy()).prop_map(|(a, b, c)| vec![
            JointState::equatorial(a),
            JointState::equatorial(b),
            JointState::equatorial(c)
        ]),
    ];
    (pieces, prop::collection::vec((0usize..3, phase_strategy()), 0..4)).prop_map(|(parts, kicks)| {
        let mut state = parts[0].clone();
        for p in &parts[1..] {
            state = tensor(&state, p).unwrap();
        }
        for (q, phase) in kicks {
            let q = q % state.num_qubits();
            state = apply_phase(&state, q, phase).unwrap();
        }
        state
    })
}

#[test]
fn single_qubit_eigenstates() {
    for theta in PhaseAngle::ALL {
        assert_same(&Model::equatorial(theta), &JointState::equatorial(theta));
        assert_eq!(equatorial_phase(&JointState::equatorial(theta)).unwrap(), theta);
    }
    // pi on |+x> gives |-x>, which measures - in X with certainty.
    let minus = apply_phase(&quantum::plus_x_state(), 0, PhaseAngle::PI).unwrap();
    let ((num, den), _) = minus.project_qubit(0, Outcome::new(Sign::Minus, Basis::X)).unwrap();
    assert_eq!(num, 1 << den);
}

#[test]
fn epr_matches_model() {
    for twist in PhaseAngle::ALL {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let e = cis(twist);
        let model = Model { qubits: 2, amps: vec![(h, 0.0), (0.0, 0.0), (0.0, 0.0), (h * e.0, h * e.1)] };
        assert_same(&model, &prepare_epr(twist));
    }
}

/// Teleporting `|theta>` through a twisted pair shifts it by the tabulated
/// effective phase, for every Bell outcome.
#[test]
fn teleportation_table() {
    for theta in PhaseAngle::ALL {
        for twist in PhaseAngle::ALL {
            let model = Model::equatorial(theta).kron(&Model::of(&prepare_epr(twist)));
            let state = tensor(&JointState::equatorial(theta), &prepare_epr(twist)).unwrap();
            for outcome in BellOutcome::ALL {
                let (p, post) = model.project_bell(0, 1, outcome);
                assert!((p - 0.25).abs() < TOL);
                let expected = theta + effective_phase_after_bell(outcome, twist, theta);
                // The post state is (Bell pair) x (far qubit).
                let far = reduce_last(&post);
                assert!((far.fidelity(&Model::equatorial(expected)) - 1.0).abs() < TOL);
                let ((num, den), exact) = state.project_bell(0, 1, outcome).unwrap();
                assert_eq!(num * 4, 1 << den);
                let far_exact = extract_qubit(&exact.unwrap(), 2).unwrap();
                assert_eq!(equatorial_phase(&far_exact).unwrap(), expected);
            }
        }
    }
}

/// State of the last qubit of a register in which it is unentangled.
fn reduce_last(model: &Model) -> Model {
    let lead = (0..model.amps.len() / 2)
        .max_by(|a, b| {
            let na = norm2(model.amps[2 * a]) + norm2(model.amps[2 * a + 1]);
            let nb = norm2(model.amps[2 * b]) + norm2(model.amps[2 * b + 1]);
            na.partial_cmp(&nb).unwrap()
        })
        .unwrap();
    Model { qubits: 1, amps: vec![model.amps[2 * lead], model.amps[2 * lead + 1]] }.normalised()
}

proptest! {
    #[test]
    fn phase_matches_model(state in state_strategy(), q in 0usize..3, phase in phase_strategy()) {
        let q = q % state.num_qubits();
        let exact = apply_phase(&state, q, phase).unwrap();
        assert_same(&Model::of(&state).phase(q, phase), &exact);
        prop_assert!((exact.norm_sqr() - 1.0).abs() < TOL);
    }

    #[test]
    fn projections_match_model(state in state_strategy(), q in 0usize..3) {
        let q = q % state.num_qubits();
        let model = Model::of(&state);
        for basis in [Basis::X, Basis::Y] {
            let mut total = 0.0;
            for sign in [Sign::Plus, Sign::Minus] {
                let outcome = Outcome::new(sign, basis);
                let ((num, den), post) = state.project_qubit(q, outcome).unwrap();
                let p = num as f64 / (1u64 << den) as f64;
                let (p_model, post_model) = model.project(q, outcome.phase());
                prop_assert!((p - p_model).abs() < TOL);
                if let Some(post) = post {
                    prop_assert!((Model::of(&post).fidelity(&post_model) - 1.0).abs() < TOL);
                }
                total += p;
            }
            prop_assert!((total - 1.0).abs() < TOL);
        }
    }

    #[test]
    fn bell_projections_match_model(state in state_strategy(), q1 in 0usize..3, q2 in 0usize..3) {
        prop_assume!(state.num_qubits() >= 2);
        let (q1, q2) = (q1 % state.num_qubits(), q2 % state.num_qubits());
        prop_assume!(q1 != q2);
        let model = Model::of(&state);
        let mut total = 0.0;
        for outcome in BellOutcome::ALL {
            let ((num, den), post) = state.project_bell(q1, q2, outcome).unwrap();
            let p = num as f64 / (1u64 << den) as f64;
            let (p_model, post_model) = model.project_bell(q1, q2, outcome);
            prop_assert!((p - p_model).abs() < TOL);
            if let Some(post) = post {
                prop_assert!((Model::of(&post).fidelity(&post_model) - 1.0).abs() < TOL);
            }
            total += p;
        }
        prop_assert!((total - 1.0).abs() < TOL);
    }

    #[test]
    fn global_phase_equality(state in state_strategy(), phase in phase_strategy()) {
        // A phase on every basis state is global: kick each qubit's |1> and
        // compensate on |0> through the complementary kick.
        let n = state.num_qubits();
        let mut shifted = state.clone();
        for q in 0..n {
            shifted = apply_phase(&shifted, q, phase).unwrap();
        }
        let model_same = Model::of(&state).fidelity(&Model::of(&shifted)) > 1.0 - TOL;
        prop_assert_eq!(state.same_ray(&shifted), model_same);
        prop_assert!(state.same_ray(&state.canonical()));
    }

    #[test]
    fn phase_group_laws(a in phase_strategy(), b in phase_strategy(), c in phase_strategy()) {
        prop_assert_eq!((a + b) + c, a + (b + c));
        prop_assert_eq!(a + b, b + a);
        prop_assert_eq!(a - a, PhaseAngle::ZERO);
        prop_assert_eq!(a + (-a), PhaseAngle::ZERO);
        prop_assert_eq!(Outcome::from_phase(a).phase(), a);
    }
}
