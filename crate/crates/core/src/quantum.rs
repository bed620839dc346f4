//! Exact state-vector simulation of 1–3 qubit registers.
//!
//! Every state the protocols can reach has amplitudes of the form
//! `(a + bi) / sqrt(2)^m` with integer `a`, `b`. A [`JointState`] stores the
//! Gaussian-integer numerators together with the shared exponent `m`, so
//! phase operations, projections and state comparisons are exact.
//!
//! Qubit 0 is the most significant bit of a basis index. Measured qubits stay
//! in the register in their collapsed state so indices are stable for the
//! whole life of a run.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QuantumError {
    #[error("qubit index {index} out of range for a {num_qubits}-qubit register")]
    IndexOutOfRange { index: usize, num_qubits: usize },
    #[error("register of {0} qubits exceeds the {MAX_QUBITS}-qubit limit")]
    RegisterOverflow(usize),
    #[error("bell measurement needs two distinct qubits")]
    SameQubit,
    #[error("state is not of the form (|0> + e^(i theta)|1>)/sqrt(2) with a quarter-turn theta")]
    NotEquatorial,
    #[error("qubit {0} is entangled with the rest of the register")]
    Entangled(usize),
    #[error("amplitudes are not normalised over the dyadic ring")]
    NotNormalised,
}

/// A phase that is a whole number of quarter turns, `quarter_turns * pi/2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PhaseAngle(u8);

impl PhaseAngle {
    pub const ZERO: PhaseAngle = PhaseAngle(0);
    pub const HALF_PI: PhaseAngle = PhaseAngle(1);
    pub const PI: PhaseAngle = PhaseAngle(2);
    pub const THREE_HALVES_PI: PhaseAngle = PhaseAngle(3);
    pub const ALL: [PhaseAngle; 4] = [Self::ZERO, Self::HALF_PI, Self::PI, Self::THREE_HALVES_PI];

    /// Reduces any integer number of quarter turns modulo a full turn.
    pub fn from_quarter_turns(q: i64) -> Self {
        PhaseAngle(q.rem_euclid(4) as u8)
    }

    pub fn quarter_turns(self) -> u8 {
        self.0
    }

    pub fn radians(self) -> f64 {
        f64::from(self.0) * std::f64::consts::FRAC_PI_2
    }

    /// True for 0 and pi, the phases whose equatorial states are X eigenstates.
    pub fn is_class_x(self) -> bool {
        self.0.is_multiple_of(2)
    }

    /// Uniformly random quarter-turn phase.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        PhaseAngle(rng.gen_range(0..4))
    }

    /// The unit `i^q` as a Gaussian integer.
    fn unit(self) -> Gaussian {
        match self.0 {
            0 => Gaussian::new(1, 0),
            1 => Gaussian::new(0, 1),
            2 => Gaussian::new(-1, 0),
            _ => Gaussian::new(0, -1),
        }
    }
}

impl TryFrom<u8> for PhaseAngle {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        if value < 4 {
            Ok(PhaseAngle(value))
        } else {
            Err(format!("phase must be 0..=3 quarter turns, got {value}"))
        }
    }
}

impl From<PhaseAngle> for u8 {
    fn from(p: PhaseAngle) -> u8 {
        p.0
    }
}

impl Add for PhaseAngle {
    type Output = PhaseAngle;
    fn add(self, rhs: PhaseAngle) -> PhaseAngle {
        PhaseAngle((self.0 + rhs.0) % 4)
    }
}

impl AddAssign for PhaseAngle {
    fn add_assign(&mut self, rhs: PhaseAngle) {
        *self = *self + rhs;
    }
}

impl Sub for PhaseAngle {
    type Output = PhaseAngle;
    fn sub(self, rhs: PhaseAngle) -> PhaseAngle {
        PhaseAngle((self.0 + 4 - rhs.0) % 4)
    }
}

impl Neg for PhaseAngle {
    type Output = PhaseAngle;
    fn neg(self) -> PhaseAngle {
        PhaseAngle((4 - self.0) % 4)
    }
}

impl std::iter::Sum for PhaseAngle {
    fn sum<I: Iterator<Item = PhaseAngle>>(iter: I) -> PhaseAngle {
        iter.fold(PhaseAngle::ZERO, Add::add)
    }
}

impl fmt::Display for PhaseAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            0 => write!(f, "0"),
            1 => write!(f, "pi/2"),
            2 => write!(f, "pi"),
            _ => write!(f, "3pi/2"),
        }
    }
}

/// Single-qubit measurement axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
}

impl Basis {
    /// Phase of the `+` eigenstate: 0 for X, pi/2 for Y.
    pub fn offset(self) -> PhaseAngle {
        match self {
            Basis::X => PhaseAngle::ZERO,
            Basis::Y => PhaseAngle::HALF_PI,
        }
    }

    /// The basis whose eigenstates have equatorial phase `phase`.
    pub fn of_phase(phase: PhaseAngle) -> Basis {
        if phase.is_class_x() {
            Basis::X
        } else {
            Basis::Y
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.gen::<bool>() {
            Basis::X
        } else {
            Basis::Y
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "−")]
    Minus,
}

impl Sign {
    pub fn phase(self) -> PhaseAngle {
        match self {
            Sign::Plus => PhaseAngle::ZERO,
            Sign::Minus => PhaseAngle::PI,
        }
    }
}

/// Result of a single-qubit measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Outcome {
    pub sign: Sign,
    pub basis: Basis,
}

impl Outcome {
    pub fn new(sign: Sign, basis: Basis) -> Self {
        Outcome { sign, basis }
    }

    /// Equatorial phase of the eigenstate this outcome collapses to.
    pub fn phase(self) -> PhaseAngle {
        self.basis.offset() + self.sign.phase()
    }

    /// Inverse of [`Outcome::phase`].
    pub fn from_phase(phase: PhaseAngle) -> Self {
        let basis = Basis::of_phase(phase);
        let sign = if phase - basis.offset() == PhaseAngle::ZERO { Sign::Plus } else { Sign::Minus };
        Outcome { sign, basis }
    }
}

/// The four Bell projectors on a qubit pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellOutcome {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] =
        [BellOutcome::PhiPlus, BellOutcome::PhiMinus, BellOutcome::PsiPlus, BellOutcome::PsiMinus];
}

/// Gaussian integer `re + i*im`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Gaussian {
    pub re: i64,
    pub im: i64,
}

impl Gaussian {
    pub const fn new(re: i64, im: i64) -> Self {
        Gaussian { re, im }
    }

    pub fn conj(self) -> Self {
        Gaussian::new(self.re, -self.im)
    }

    /// Squared modulus.
    pub fn norm(self) -> i64 {
        self.re * self.re + self.im * self.im
    }

    pub fn is_zero(self) -> bool {
        self.re == 0 && self.im == 0
    }
}

impl Add for Gaussian {
    type Output = Gaussian;
    fn add(self, rhs: Gaussian) -> Gaussian {
        Gaussian::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl Sub for Gaussian {
    type Output = Gaussian;
    fn sub(self, rhs: Gaussian) -> Gaussian {
        Gaussian::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl Mul for Gaussian {
    type Output = Gaussian;
    fn mul(self, rhs: Gaussian) -> Gaussian {
        Gaussian::new(self.re * rhs.re - self.im * rhs.im, self.re * rhs.im + self.im * rhs.re)
    }
}

/// Pure state of a 1–3 qubit register with exact amplitudes
/// `amps[i] / sqrt(2)^scale`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct JointState {
    num_qubits: usize,
    scale: u32,
    amps: Vec<Gaussian>,
}

impl JointState {
    /// Builds a state from raw numerators; rejects anything not of unit norm.
    pub fn from_raw(num_qubits: usize, scale: u32, amps: Vec<Gaussian>) -> Result<Self, QuantumError> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(QuantumError::RegisterOverflow(num_qubits));
        }
        if amps.len() != 1 << num_qubits {
            return Err(QuantumError::NotNormalised);
        }
        let total: i64 = amps.iter().map(|g| g.norm()).sum();
        if scale > 60 || total != 1i64 << scale {
            return Err(QuantumError::NotNormalised);
        }
        Ok(JointState { num_qubits, scale, amps }.reduced())
    }

    /// Computational basis state `|index>`.
    pub fn basis_state(num_qubits: usize, index: usize) -> Result<Self, QuantumError> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(QuantumError::RegisterOverflow(num_qubits));
        }
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(QuantumError::IndexOutOfRange { index, num_qubits });
        }
        let mut amps = vec![Gaussian::default(); dim];
        amps[index] = Gaussian::new(1, 0);
        Ok(JointState { num_qubits, scale: 0, amps })
    }

    /// `(|0> + e^(i theta)|1>)/sqrt(2)`.
    pub fn equatorial(theta: PhaseAngle) -> Self {
        JointState { num_qubits: 1, scale: 1, amps: vec![Gaussian::new(1, 0), theta.unit()] }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    /// Floating-point view of amplitude `index`, as `(re, im)`.
    pub fn amplitude(&self, index: usize) -> (f64, f64) {
        let g = self.amps[index];
        let s = std::f64::consts::SQRT_2.powi(self.scale as i32);
        (g.re as f64 / s, g.im as f64 / s)
    }

    pub fn amplitudes(&self) -> Vec<(f64, f64)> {
        (0..self.dim()).map(|i| self.amplitude(i)).collect()
    }

    /// Exact squared norm as a `(numerator, log2 denominator)` pair.
    pub fn norm_sqr_exact(&self) -> (i64, u32) {
        (self.amps.iter().map(|g| g.norm()).sum(), self.scale)
    }

    pub fn norm_sqr(&self) -> f64 {
        let (num, den) = self.norm_sqr_exact();
        num as f64 / (1u64 << den) as f64
    }

    fn mask(&self, qubit: usize) -> usize {
        1 << (self.num_qubits - 1 - qubit)
    }

    fn check_index(&self, qubit: usize) -> Result<(), QuantumError> {
        if qubit >= self.num_qubits {
            Err(QuantumError::IndexOutOfRange { index: qubit, num_qubits: self.num_qubits })
        } else {
            Ok(())
        }
    }

    /// Removes common factors of 2 from the numerators.
    fn reduced(mut self) -> Self {
        while self.scale >= 2 && self.amps.iter().all(|g| g.re % 2 == 0 && g.im % 2 == 0) {
            for g in &mut self.amps {
                g.re /= 2;
                g.im /= 2;
            }
            self.scale -= 2;
        }
        self
    }

    /// Representative of the global-phase class: the first nonzero amplitude
    /// becomes positive real.
    pub fn canonical(&self) -> JointState {
        let lead = match self.amps.iter().find(|g| !g.is_zero()) {
            Some(g) => *g,
            None => return self.clone(),
        };
        // lead has norm 2^t for every normalised state the simulator produces;
        // multiplying by conj(lead) scales the vector by sqrt(2)^t.
        let t = lead.norm().trailing_zeros();
        let amps = self.amps.iter().map(|g| *g * lead.conj()).collect();
        JointState { num_qubits: self.num_qubits, scale: self.scale + t, amps }.reduced()
    }

    /// Equality up to global phase, decided exactly via `|<a|b>|^2 == 1`.
    pub fn same_ray(&self, other: &JointState) -> bool {
        if self.num_qubits != other.num_qubits {
            return false;
        }
        let inner = self.amps.iter().zip(&other.amps).fold(Gaussian::default(), |acc, (a, b)| acc + a.conj() * *b);
        let exp = self.scale + other.scale;
        exp < 62 && inner.norm() == 1i64 << exp
    }

    /// Projects onto `(|a> + u|b>)/sqrt(2)` on the qubits in `mask`, where `a`
    /// and `b` are bit patterns inside `mask`. Returns the probability
    /// numerator over `2^(scale+1)` and the normalised post-measurement state.
    fn project(&self, mask: usize, pat_a: usize, pat_b: usize, u: PhaseAngle) -> (u64, Option<JointState>) {
        let ubar = u.unit().conj();
        let mut amps = vec![Gaussian::default(); self.dim()];
        let mut weight: i64 = 0;
        for base in (0..self.dim()).filter(|i| i & mask == 0) {
            let h = self.amps[base | pat_a] + ubar * self.amps[base | pat_b];
            weight += h.norm();
            amps[base | pat_a] = h;
            amps[base | pat_b] = u.unit() * h;
        }
        if weight == 0 {
            return (0, None);
        }
        // Unnormalised numerators carry 2*weight in total; normalise to a
        // power of two.
        let total = 2 * weight;
        let post = if total.count_ones() == 1 {
            JointState::from_raw(self.num_qubits, total.trailing_zeros(), amps).ok()
        } else {
            None
        };
        (weight as u64, post)
    }

    fn outcome_branch(&self, qubit: usize, outcome: Outcome) -> (u64, Option<JointState>) {
        let m = self.mask(qubit);
        self.project(m, 0, m, outcome.phase())
    }

    fn bell_branch(&self, q1: usize, q2: usize, outcome: BellOutcome) -> (u64, Option<JointState>) {
        let (m1, m2) = (self.mask(q1), self.mask(q2));
        let mask = m1 | m2;
        match outcome {
            BellOutcome::PhiPlus => self.project(mask, 0, mask, PhaseAngle::ZERO),
            BellOutcome::PhiMinus => self.project(mask, 0, mask, PhaseAngle::PI),
            BellOutcome::PsiPlus => self.project(mask, m2, m1, PhaseAngle::ZERO),
            BellOutcome::PsiMinus => self.project(mask, m2, m1, PhaseAngle::PI),
        }
    }

    /// Exact probability of `outcome` as `(numerator, log2 denominator)` and
    /// the conditional post-measurement state, if the branch is possible.
    pub fn project_qubit(
        &self,
        qubit: usize,
        outcome: Outcome,
    ) -> Result<((u64, u32), Option<JointState>), QuantumError> {
        self.check_index(qubit)?;
        let (w, post) = self.outcome_branch(qubit, outcome);
        Ok(((w, self.scale + 1), post))
    }

    /// Bell-basis counterpart of [`JointState::project_qubit`].
    pub fn project_bell(
        &self,
        q1: usize,
        q2: usize,
        outcome: BellOutcome,
    ) -> Result<((u64, u32), Option<JointState>), QuantumError> {
        self.check_index(q1)?;
        self.check_index(q2)?;
        if q1 == q2 {
            return Err(QuantumError::SameQubit);
        }
        let (w, post) = self.bell_branch(q1, q2, outcome);
        Ok(((w, self.scale + 1), post))
    }
}

impl fmt::Display for JointState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, g) in self.amps.iter().enumerate() {
            if g.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({}{:+}i)|{:0width$b}>", g.re, g.im, i, width = self.num_qubits)?;
        }
        write!(f, " / sqrt2^{}", self.scale)
    }
}

/// Picks branch `i` with probability `weights[i] / 2^den`.
fn sample_branch<R: Rng + ?Sized>(rng: &mut R, weights: &[u64], den: u32) -> usize {
    let draw = rng.gen_range(0..1u64 << den);
    let mut acc = 0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if draw < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// `|+x>`, the state the first participant prepares.
pub fn plus_x_state() -> JointState {
    JointState::equatorial(PhaseAngle::ZERO)
}

/// Applies the phase operator `|0> -> |0>, |1> -> e^(i phase)|1>` to `qubit`.
pub fn apply_phase(state: &JointState, qubit: usize, phase: PhaseAngle) -> Result<JointState, QuantumError> {
    state.check_index(qubit)?;
    let m = state.mask(qubit);
    let u = phase.unit();
    let amps = state.amps.iter().enumerate().map(|(i, g)| if i & m != 0 { *g * u } else { *g }).collect();
    Ok(JointState { num_qubits: state.num_qubits, scale: state.scale, amps })
}

/// Measures `qubit` in `basis`. The qubit stays in the register, collapsed
/// onto the observed eigenstate.
pub fn measure<R: Rng + ?Sized>(
    state: &JointState,
    qubit: usize,
    basis: Basis,
    rng: &mut R,
) -> Result<(Outcome, JointState), QuantumError> {
    state.check_index(qubit)?;
    let outcomes = [Outcome::new(Sign::Plus, basis), Outcome::new(Sign::Minus, basis)];
    let branches: Vec<_> = outcomes.iter().map(|o| state.outcome_branch(qubit, *o)).collect();
    let weights: Vec<u64> = branches.iter().map(|b| b.0).collect();
    let pick = sample_branch(rng, &weights, state.scale + 1);
    let post = branches[pick].1.clone().ok_or(QuantumError::NotNormalised)?;
    Ok((outcomes[pick], post))
}

/// `(|00> + e^(i twist)|11>)/sqrt(2)`.
pub fn prepare_epr(twist: PhaseAngle) -> JointState {
    JointState {
        num_qubits: 2,
        scale: 1,
        amps: vec![Gaussian::new(1, 0), Gaussian::default(), Gaussian::default(), twist.unit()],
    }
}

/// Kronecker product; `b`'s qubits are numbered after `a`'s.
pub fn tensor(a: &JointState, b: &JointState) -> Result<JointState, QuantumError> {
    let n = a.num_qubits + b.num_qubits;
    if n > MAX_QUBITS {
        return Err(QuantumError::RegisterOverflow(n));
    }
    let amps = a.amps.iter().flat_map(|x| b.amps.iter().map(move |y| *x * *y)).collect();
    Ok(JointState { num_qubits: n, scale: a.scale + b.scale, amps }.reduced())
}

/// Projective measurement of `(q1, q2)` onto the Bell basis. The pair stays in
/// the register in the observed Bell state.
pub fn bell_measure<R: Rng + ?Sized>(
    state: &JointState,
    q1: usize,
    q2: usize,
    rng: &mut R,
) -> Result<(BellOutcome, JointState), QuantumError> {
    state.check_index(q1)?;
    state.check_index(q2)?;
    if q1 == q2 {
        return Err(QuantumError::SameQubit);
    }
    let branches: Vec<_> = BellOutcome::ALL.iter().map(|o| state.bell_branch(q1, q2, *o)).collect();
    let weights: Vec<u64> = branches.iter().map(|b| b.0).collect();
    let pick = sample_branch(rng, &weights, state.scale + 1);
    let post = branches[pick].1.clone().ok_or(QuantumError::NotNormalised)?;
    Ok((BellOutcome::ALL[pick], post))
}

/// Single-qubit state of `qubit`, provided it is in a product state with the
/// rest of the register.
pub fn extract_qubit(state: &JointState, qubit: usize) -> Result<JointState, QuantumError> {
    state.check_index(qubit)?;
    let m = state.mask(qubit);
    let pairs: Vec<(Gaussian, Gaussian)> =
        (0..state.dim()).filter(|i| i & m == 0).map(|i| (state.amps[i], state.amps[i | m])).collect();
    let (c0, c1) = *pairs.iter().find(|(a, b)| !a.is_zero() || !b.is_zero()).ok_or(QuantumError::NotNormalised)?;
    // Every other slice of the register must be proportional to (c0, c1).
    if pairs.iter().any(|(a, b)| c0 * *b != c1 * *a) {
        return Err(QuantumError::Entangled(qubit));
    }
    let total = c0.norm() + c1.norm();
    if total.count_ones() != 1 {
        return Err(QuantumError::NotNormalised);
    }
    JointState::from_raw(1, total.trailing_zeros(), vec![c0, c1])
}

/// Reads `theta` from a single-qubit state equal to
/// `(|0> + e^(i theta)|1>)/sqrt(2)` up to global phase.
pub fn equatorial_phase(state: &JointState) -> Result<PhaseAngle, QuantumError> {
    if state.num_qubits != 1 {
        return Err(QuantumError::NotEquatorial);
    }
    let (c0, c1) = (state.amps[0], state.amps[1]);
    if c0.is_zero() || c0.norm() != c1.norm() {
        return Err(QuantumError::NotEquatorial);
    }
    let ratio = c1 * c0.conj();
    let n = c0.norm();
    match (ratio.re, ratio.im) {
        (r, 0) if r == n => Ok(PhaseAngle::ZERO),
        (0, i) if i == n => Ok(PhaseAngle::HALF_PI),
        (r, 0) if r == -n => Ok(PhaseAngle::PI),
        (0, i) if i == -n => Ok(PhaseAngle::THREE_HALVES_PI),
        _ => Err(QuantumError::NotEquatorial),
    }
}

/// Phase that a Bell measurement of (input qubit, first EPR half) effectively
/// applies when teleporting an equatorial state with phase `theta` through a
/// pair prepared by [`prepare_epr`] with `twist`.
///
/// The Psi outcomes conjugate the input, which is where the `-2 theta` term
/// comes from; `2 theta` only depends on the class of `theta`.
pub fn effective_phase_after_bell(outcome: BellOutcome, twist: PhaseAngle, theta: PhaseAngle) -> PhaseAngle {
    match outcome {
        BellOutcome::PhiPlus => twist,
        BellOutcome::PhiMinus => twist + PhaseAngle::PI,
        BellOutcome::PsiPlus => twist - theta - theta,
        BellOutcome::PsiMinus => twist - theta - theta + PhaseAngle::PI,
    }
}
