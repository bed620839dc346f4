//! Binary linear codes and the parameter arithmetic of the secure protocol.
//!
//! Codewords are at most 64 bits long and stored in a `u64` with coordinate 0
//! (the first run) in the most significant used bit, so a codeword prints in
//! run order.

use std::collections::BTreeSet;
use std::fmt;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact rational used for every bound and formula.
pub type Rational = Ratio<i128>;

/// Largest dimension that is enumerated exhaustively.
pub const MAX_DIMENSION: usize = 24;
/// Longest supported block length.
pub const MAX_LENGTH: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodeError {
    #[error("dimension {0} exceeds the enumeration limit of {MAX_DIMENSION}")]
    DimensionTooLarge(usize),
    #[error("length {0} is outside 1..={MAX_LENGTH}")]
    BadLength(usize),
    #[error("word of length {found} does not match code length {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("generator rows are linearly dependent")]
    RankDeficient,
    #[error("generator needs at least one row")]
    EmptyGenerator,
    #[error("no codeword of weight {0}")]
    NoSuchCodeword(usize),
    #[error("no code found for n={n}, w={w} within the search budget")]
    SearchExhausted { n: usize, w: usize },
    #[error("invalid bit string {0:?}")]
    BadBitString(String),
    #[error("code file: {0}")]
    File(String),
}

/// An n-bit word.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Codeword {
    bits: u64,
    len: usize,
}

impl Codeword {
    pub fn new(bits: u64, len: usize) -> Result<Self, CodeError> {
        if len == 0 || len > MAX_LENGTH {
            return Err(CodeError::BadLength(len));
        }
        Ok(Codeword { bits: bits & low_mask(len), len })
    }

    pub fn zero(len: usize) -> Self {
        Codeword { bits: 0, len }
    }

    pub fn from_bools(bits: &[bool]) -> Result<Self, CodeError> {
        let packed = bits.iter().fold(0u64, |acc, b| (acc << 1) | u64::from(*b));
        Codeword::new(packed, bits.len())
    }

    /// Parses a string of `0`/`1`, first character = coordinate 1.
    pub fn parse(s: &str) -> Result<Self, CodeError> {
        let bools = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(CodeError::BadBitString(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Codeword::from_bools(&bools)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn raw(&self) -> u64 {
        self.bits
    }

    /// Bit at coordinate `i` (0-based, run order).
    pub fn bit(&self, i: usize) -> bool {
        (self.bits >> (self.len - 1 - i)) & 1 == 1
    }

    pub fn weight(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn xor(&self, other: &Codeword) -> Codeword {
        Codeword { bits: self.bits ^ other.bits, len: self.len }
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.bit(i)).collect()
    }

    /// First `m` coordinates packed the same way.
    pub fn prefix(&self, m: usize) -> u64 {
        if m == 0 {
            0
        } else {
            self.bits >> (self.len - m)
        }
    }
}

impl fmt::Display for Codeword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

fn low_mask(len: usize) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

/// Number of ones in `word`.
pub fn weight(word: &Codeword) -> usize {
    word.weight()
}

/// A binary linear (n, k, d) code given by a full-rank generator matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearCode {
    n: usize,
    generator: Vec<u64>,
    /// Row-reduced copy of the generator, keyed by pivot bit, for membership.
    echelon: Vec<u64>,
    min_distance: usize,
}

impl LinearCode {
    pub fn new(n: usize, rows: &[Codeword]) -> Result<Self, CodeError> {
        if n == 0 || n > MAX_LENGTH {
            return Err(CodeError::BadLength(n));
        }
        if rows.is_empty() {
            return Err(CodeError::EmptyGenerator);
        }
        if rows.len() > MAX_DIMENSION {
            return Err(CodeError::DimensionTooLarge(rows.len()));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(CodeError::LengthMismatch { expected: n, found: r.len() });
        }
        let generator: Vec<u64> = rows.iter().map(|r| r.raw()).collect();
        let echelon = echelon_form(&generator).ok_or(CodeError::RankDeficient)?;
        let min_distance = span(&generator).skip(1).map(|c| c.count_ones() as usize).min().unwrap_or(0);
        Ok(LinearCode { n, generator, echelon, min_distance })
    }

    pub fn from_strings<S: AsRef<str>>(rows: &[S]) -> Result<Self, CodeError> {
        let rows = rows.iter().map(|s| Codeword::parse(s.as_ref())).collect::<Result<Vec<_>, _>>()?;
        let n = rows.first().map(|r| r.len()).ok_or(CodeError::EmptyGenerator)?;
        LinearCode::new(n, &rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.generator.len()
    }

    pub fn min_distance(&self) -> usize {
        self.min_distance
    }

    pub fn generator_rows(&self) -> Vec<Codeword> {
        self.generator.iter().map(|r| Codeword { bits: *r, len: self.n }).collect()
    }

    /// All 2^k codewords, zero word first.
    pub fn codewords(&self) -> Vec<Codeword> {
        span(&self.generator).map(|bits| Codeword { bits, len: self.n }).collect()
    }

    /// Codewords of weight exactly `w`, in increasing numeric order.
    pub fn codewords_of_weight(&self, w: usize) -> Vec<Codeword> {
        let mut out: Vec<Codeword> = self.codewords().into_iter().filter(|c| c.weight() == w).collect();
        out.sort();
        out
    }

    pub fn contains(&self, word: &Codeword) -> bool {
        word.len() == self.n && reduce(&self.echelon, word.raw()) == 0
    }
}

/// Gray-code walk over the row span.
fn span(rows: &[u64]) -> impl Iterator<Item = u64> + '_ {
    let total = 1u64 << rows.len();
    (0..total).scan(0u64, move |acc, i| {
        if i > 0 {
            *acc ^= rows[i.trailing_zeros() as usize];
        }
        Some(*acc)
    })
}

/// Row echelon form with distinct leading bits, or `None` on rank deficiency.
fn echelon_form(rows: &[u64]) -> Option<Vec<u64>> {
    let mut basis: Vec<u64> = Vec::with_capacity(rows.len());
    for &row in rows {
        let r = reduce(&basis, row);
        if r == 0 {
            return None;
        }
        basis.push(r);
        basis.sort_unstable_by(|a, b| b.cmp(a));
    }
    Some(basis)
}

fn reduce(basis: &[u64], mut v: u64) -> u64 {
    for &b in basis {
        let lead = 63 - b.leading_zeros();
        if (v >> lead) & 1 == 1 {
            v ^= b;
        }
    }
    v
}

/// Every codeword of `code`. Fails above the dimension guard.
pub fn enumerate_codewords(code: &LinearCode) -> Result<Vec<Codeword>, CodeError> {
    if code.k() > MAX_DIMENSION {
        return Err(CodeError::DimensionTooLarge(code.k()));
    }
    Ok(code.codewords())
}

/// Minimum nonzero codeword weight.
pub fn min_distance(code: &LinearCode) -> Result<usize, CodeError> {
    if code.k() > MAX_DIMENSION {
        return Err(CodeError::DimensionTooLarge(code.k()));
    }
    Ok(code.min_distance())
}

pub fn is_codeword(code: &LinearCode, word: &Codeword) -> Result<bool, CodeError> {
    if word.len() != code.n() {
        return Err(CodeError::LengthMismatch { expected: code.n(), found: word.len() });
    }
    Ok(code.contains(word))
}

/// Uniform draw among the weight-`w` codewords.
pub fn sample_weight_w_codeword<R: Rng + ?Sized>(
    code: &LinearCode,
    w: usize,
    rng: &mut R,
) -> Result<Codeword, CodeError> {
    code.codewords_of_weight(w).choose(rng).copied().ok_or(CodeError::NoSuchCodeword(w))
}

/// All codewords whose first `prefix.len()` coordinates equal `prefix`.
pub fn complete_codeword(code: &LinearCode, prefix: &[bool]) -> Vec<Codeword> {
    let m = prefix.len().min(code.n());
    let want = prefix[..m].iter().fold(0u64, |acc, b| (acc << 1) | u64::from(*b));
    let mut out: Vec<Codeword> = code.codewords().into_iter().filter(|c| c.prefix(m) == want).collect();
    out.sort();
    out
}

fn q(num: i128, den: i128) -> Rational {
    Rational::new(num, den)
}

fn one() -> Rational {
    Rational::from_integer(1)
}

/// `n (1 - 4w^2 / (3n^2 - 2nw + 3w^2))`, the exclusive lower bound on d.
pub fn distance_lower_bound(n: usize, w: usize) -> Rational {
    let (n, w) = (n as i128, w as i128);
    let den = 3 * n * n - 2 * n * w + 3 * w * w;
    Rational::from_integer(n) * (one() - q(4 * w * w, den))
}

/// `2 (n - w)`, the exclusive upper bound on d.
pub fn distance_upper_bound(n: usize, w: usize) -> Rational {
    Rational::from_integer(2 * (n as i128 - w as i128))
}

/// True iff `lower(n, w) < d < 2(n - w)` holds exactly.
pub fn validate_params(n: usize, w: usize, d: usize) -> bool {
    if n == 0 || w > n {
        return false;
    }
    let d = Rational::from_integer(d as i128);
    distance_lower_bound(n, w) < d && d < distance_upper_bound(n, w)
}

/// Probability that an early run lets the cheater announce a class X/Y
/// action safely: `(1 - w^2/n^2)/4 + (1 - w/n)/2`.
pub fn p1(n: usize, w: usize) -> Rational {
    let (n, w) = (n as i128, w as i128);
    (one() - q(w * w, n * n)) / 4 + (one() - q(w, n)) / 2
}

/// Same probability for the last d runs: `1 - w^2/n^2`.
pub fn p2(n: usize, w: usize) -> Rational {
    let (n, w) = (n as i128, w as i128);
    one() - q(w * w, n * n)
}

/// Maximum expected number of safely alterable announcements,
/// `(n - d) p1 + d p2`.
pub fn n_prime(n: usize, w: usize, d: usize) -> Rational {
    Rational::from_integer(n as i128 - d as i128) * p1(n, w) + Rational::from_integer(d as i128) * p2(n, w)
}

pub fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Parameter record of a code chosen for the secure protocol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeParams {
    pub n: usize,
    pub w: usize,
    pub d: usize,
    pub p1: Rational,
    pub p2: Rational,
    pub n_prime: Rational,
}

impl CodeParams {
    pub fn new(n: usize, w: usize, d: usize) -> Self {
        CodeParams { n, w, d, p1: p1(n, w), p2: p2(n, w), n_prime: n_prime(n, w, d) }
    }

    pub fn is_valid(&self) -> bool {
        validate_params(self.n, self.w, self.d)
    }

    /// `w > 0.6 n` is advisory only.
    pub fn w_recommended(&self) -> bool {
        5 * self.w > 3 * self.n
    }

    pub fn distance_exceeds_n_prime(&self) -> bool {
        Rational::from_integer(self.d as i128) > self.n_prime
    }
}

/// Random search for a code usable by the secure protocol: rows are drawn
/// from the weight-`w` words, the dimension is swept down from `n/2`, and
/// `max_tries` matrices are tried per dimension.
pub fn find_code<R: Rng + ?Sized>(
    n: usize,
    w: usize,
    min_weight_w_words: usize,
    rng: &mut R,
    max_tries: usize,
) -> Result<(LinearCode, CodeParams), CodeError> {
    if n == 0 || n > 32 {
        return Err(CodeError::BadLength(n));
    }
    let exhausted = CodeError::SearchExhausted { n, w };
    if w == 0 || w > n || distance_upper_bound(n, w) <= distance_lower_bound(n, w) {
        return Err(exhausted);
    }
    let positions: Vec<usize> = (0..n).collect();
    for k in (1..=(n / 2).max(1)).rev() {
        for _ in 0..max_tries {
            let rows: Vec<Codeword> = (0..k)
                .map(|_| {
                    let bits = positions.choose_multiple(rng, w).fold(0u64, |acc, p| acc | (1u64 << p));
                    Codeword { bits, len: n }
                })
                .collect();
            let code = match LinearCode::new(n, &rows) {
                Ok(c) => c,
                Err(_) => continue,
            };
            if !validate_params(n, w, code.min_distance()) {
                continue;
            }
            if code.codewords_of_weight(w).len() < min_weight_w_words {
                continue;
            }
            let params = CodeParams::new(n, w, code.min_distance());
            return Ok((code, params));
        }
    }
    Err(exhausted)
}

/// On-disk code description.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeFile {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub w: usize,
    pub generator: Vec<String>,
}

impl CodeFile {
    pub fn from_code(code: &LinearCode, w: usize) -> Self {
        CodeFile {
            n: code.n(),
            k: code.k(),
            d: code.min_distance(),
            w,
            generator: code.generator_rows().iter().map(|r| r.to_string()).collect(),
        }
    }

    /// Rebuilds the code and checks the recorded n, k, d against it.
    pub fn to_code(&self) -> Result<LinearCode, CodeError> {
        let code = LinearCode::from_strings(&self.generator)?;
        if code.n() != self.n || code.k() != self.k || code.min_distance() != self.d {
            return Err(CodeError::File(format!(
                "header says (n={}, k={}, d={}) but generator gives (n={}, k={}, d={})",
                self.n,
                self.k,
                self.d,
                code.n(),
                code.k(),
                code.min_distance()
            )));
        }
        Ok(code)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("code file serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, CodeError> {
        serde_json::from_str(s).map_err(|e| CodeError::File(e.to_string()))
    }
}

/// Small hand-checked codes used by tests and examples.
pub mod catalog {
    use super::LinearCode;

    /// `[111]`, d = 3.
    pub fn repetition3() -> LinearCode {
        LinearCode::from_strings(&["111"]).expect("valid")
    }

    /// `[[1100],[0011]]`, d = 2.
    pub fn pairs4() -> LinearCode {
        LinearCode::from_strings(&["1100", "0011"]).expect("valid")
    }

    /// A (16, 3, 8) code with four weight-10 codewords; valid for w = 10.
    pub fn n16_w10() -> LinearCode {
        LinearCode::from_strings(&["1101110111100001", "1000010011111111", "1110101001011101"]).expect("valid")
    }
}

/// Set of distinct codewords, for tests that compare enumerations.
pub fn as_set(words: &[Codeword]) -> BTreeSet<Codeword> {
    words.iter().copied().collect()
}
