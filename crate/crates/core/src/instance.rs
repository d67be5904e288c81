//! QAP and cardinality-BQOP instances: parsing, generation, and exact
//! objective evaluation.
//!
//! All objective arithmetic is 64-bit integer; values of the instances this
//! toolkit targets (`n <= 256`, entries below 1e6) stay far from overflow.

use crate::error::Error;
use crate::matrix::SymMatrix;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// A quadratic assignment instance: symmetric flow matrix `A` and distance
/// matrix `B`, both with zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QapInstance {
    n: usize,
    a: SymMatrix,
    b: SymMatrix,
}

impl QapInstance {
    pub fn new(a: SymMatrix, b: SymMatrix) -> Result<Self> {
        if a.n() != b.n() {
            return Err(Error::DimensionMismatch {
                expected: a.n(),
                found: b.n(),
            });
        }
        for m in [&a, &b] {
            if let Some(i) = (0..m.n()).find(|&i| m.get(i, i) != 0) {
                return Err(Error::NonzeroDiagonal {
                    index: i + 1,
                    value: m.get(i, i),
                });
            }
        }
        Ok(Self { n: a.n(), a, b })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn flows(&self) -> &SymMatrix {
        &self.a
    }

    pub fn distances(&self) -> &SymMatrix {
        &self.b
    }
}

/// A permutation of `{0, .., n-1}`; `image[i] = pi(i)` maps facility `i` to
/// location `pi(i)`. Printed output uses 1-based values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permutation {
    image: Vec<u32>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            image: (0..n as u32).collect(),
        }
    }

    /// Validating constructor; `image` must be a bijection of `0..n`.
    pub fn new(image: Vec<u32>) -> Result<Self> {
        let n = image.len();
        let mut seen = vec![false; n];
        for &v in &image {
            if v as usize >= n || seen[v as usize] {
                return Err(Error::UnrecognizedSolution(format!(
                    "values do not form a permutation of 1..{n}"
                )));
            }
            seen[v as usize] = true;
        }
        Ok(Self { image })
    }

    pub fn n(&self) -> usize {
        self.image.len()
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.image[i] as usize
    }

    pub fn image(&self) -> &[u32] {
        &self.image
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0u32; self.image.len()];
        for (i, &v) in self.image.iter().enumerate() {
            inv[v as usize] = i as u32;
        }
        Self { image: inv }
    }

    /// Composition acting left to right: `(self.then(g))(i) = g(self(i))`.
    pub fn then(&self, g: &Self) -> Self {
        assert_eq!(self.n(), g.n());
        Self {
            image: self.image.iter().map(|&v| g.image[v as usize]).collect(),
        }
    }

    /// One line of 1-based images, the on-disk format for permutations.
    pub fn to_line(&self) -> String {
        let mut s = String::new();
        for (k, &v) in self.image.iter().enumerate() {
            if k > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{}", v + 1);
        }
        s
    }
}

/// A 0/1 vector of dimension `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BinaryVector {
    bits: Vec<bool>,
}

impl BinaryVector {
    pub fn zeros(n: usize) -> Self {
        Self {
            bits: vec![false; n],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn from_support(n: usize, support: impl IntoIterator<Item = usize>) -> Self {
        let mut v = Self::zeros(n);
        for i in support {
            v.bits[i] = true;
        }
        v
    }

    pub fn n(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn cardinality(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.bits[i]).collect()
    }

    /// The permuted vector `x_pi` with `(x_pi)[i] = x[pi(i)]`.
    pub fn permute(&self, pi: &Permutation) -> Self {
        assert_eq!(self.n(), pi.n());
        Self {
            bits: (0..self.n()).map(|i| self.bits[pi.apply(i)]).collect(),
        }
    }

    pub fn to_line(&self) -> String {
        let mut s = String::new();
        for (k, &b) in self.bits.iter().enumerate() {
            if k > 0 {
                s.push(' ');
            }
            s.push(if b { '1' } else { '0' });
        }
        s
    }
}

/// Where a [`CardBqop`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BqopSource {
    Raw,
    ReducedFromQap,
}

/// A binary quadratic problem with a single cardinality constraint:
/// minimize `scale * x^T B x` over 0/1 vectors `x` with exactly `m` ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CardBqop {
    n: usize,
    b: SymMatrix,
    m: usize,
    scale: i64,
    source: BqopSource,
}

impl CardBqop {
    pub fn new(b: SymMatrix, m: usize, scale: i64, source: BqopSource) -> Result<Self> {
        if m > b.n() {
            return Err(Error::InvalidConfig(format!(
                "cardinality {m} exceeds dimension {}",
                b.n()
            )));
        }
        if scale <= 0 {
            return Err(Error::InvalidConfig(format!(
                "scale must be positive, got {scale}"
            )));
        }
        Ok(Self {
            n: b.n(),
            b,
            m,
            scale,
            source,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.b
    }

    pub fn cardinality(&self) -> usize {
        self.m
    }

    pub fn scale(&self) -> i64 {
        self.scale
    }

    pub fn source(&self) -> BqopSource {
        self.source
    }
}

/// Tokenize a whitespace-separated integer stream.
fn parse_tokens(text: &str) -> Result<Vec<i64>> {
    let mut out = Vec::new();
    for (pos, tok) in text.split_whitespace().enumerate() {
        let v = tok.parse::<i64>().map_err(|_| Error::MalformedToken {
            token: tok.to_string(),
            position: pos,
        })?;
        out.push(v);
    }
    Ok(out)
}

/// Parse a QAPLIB `.dat` stream: first token `n`, then `n^2` entries of the
/// flow matrix `A`, then `n^2` entries of the distance matrix `B`. Arbitrary
/// whitespace and line layout are accepted. Asymmetric or nonzero-diagonal
/// matrices are rejected.
pub fn parse_qaplib(text: &str) -> Result<QapInstance> {
    let tokens = parse_tokens(text)?;
    if tokens.is_empty() {
        return Err(Error::CountMismatch {
            expected: 1,
            found: 0,
        });
    }
    let n = usize::try_from(tokens[0]).map_err(|_| Error::MalformedToken {
        token: tokens[0].to_string(),
        position: 0,
    })?;
    let expected = 1 + 2 * n * n;
    if tokens.len() != expected {
        return Err(Error::CountMismatch {
            expected,
            found: tokens.len(),
        });
    }
    let a = SymMatrix::new(n, tokens[1..1 + n * n].to_vec(), true)?;
    let b = SymMatrix::new(n, tokens[1 + n * n..].to_vec(), true)?;
    QapInstance::new(a, b)
}

/// Serialize back to QAPLIB layout. `parse_qaplib(&serialize_qaplib(i)) == i`.
pub fn serialize_qaplib(inst: &QapInstance) -> String {
    let mut s = format!("{}\n", inst.n());
    for m in [inst.flows(), inst.distances()] {
        s.push('\n');
        for i in 0..inst.n() {
            let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
    }
    s
}

/// The flow matrix of the tai256c instance: ones exactly on the off-diagonal
/// of the top-left 92 x 92 block, zero elsewhere.
pub fn generate_tai256c_a() -> SymMatrix {
    SymMatrix::from_fn(256, |i, j| if i != j && i < 92 && j < 92 { 1 } else { 0 })
}

/// The exact QAP objective `sum_{i,k} a[i][k] * b[pi(i)][pi(k)]`.
pub fn qap_objective(inst: &QapInstance, perm: &Permutation) -> Result<i64> {
    if perm.n() != inst.n() {
        return Err(Error::DimensionMismatch {
            expected: inst.n(),
            found: perm.n(),
        });
    }
    let n = inst.n();
    let mut acc = 0i64;
    for i in 0..n {
        let arow = inst.flows().row(i);
        let brow = inst.distances().row(perm.apply(i));
        for k in 0..n {
            let a = arow[k];
            if a != 0 {
                acc += a * brow[perm.apply(k)];
            }
        }
    }
    Ok(acc)
}

/// The exact BQOP objective `scale * x^T B x`, checked against the
/// cardinality constraint.
pub fn bqop_objective(bqop: &CardBqop, x: &BinaryVector) -> Result<i64> {
    if x.n() != bqop.n() {
        return Err(Error::DimensionMismatch {
            expected: bqop.n(),
            found: x.n(),
        });
    }
    let card = x.cardinality();
    if card != bqop.cardinality() {
        return Err(Error::CardinalityViolation {
            expected: bqop.cardinality(),
            found: card,
        });
    }
    Ok(bqop.scale() * bqop.matrix().quad_form_support(&x.support()))
}

/// Serialize a [`CardBqop`] to its text format: a `bqop 1` magic line,
/// `n`/`m`/`scale`/`source` headers, then the matrix rows.
pub fn serialize_bqop(bqop: &CardBqop) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "bqop 1");
    let _ = writeln!(s, "n {}", bqop.n());
    let _ = writeln!(s, "m {}", bqop.cardinality());
    let _ = writeln!(s, "scale {}", bqop.scale());
    let source = match bqop.source() {
        BqopSource::Raw => "raw",
        BqopSource::ReducedFromQap => "reduced-from-qap",
    };
    let _ = writeln!(s, "source {source}");
    let _ = writeln!(s, "b");
    for i in 0..bqop.n() {
        let row: Vec<String> = bqop.matrix().row(i).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

/// Parse the text format written by [`serialize_bqop`].
pub fn parse_bqop(text: &str) -> Result<CardBqop> {
    let bad = |what: &str| Error::UnrecognizedSolution(format!("bqop file: {what}"));
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    if lines.next() != Some("bqop 1") {
        return Err(bad("bad magic"));
    }
    let mut field = |name: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| bad("truncated header"))?;
        line.strip_prefix(name)
            .and_then(|r| r.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| bad(&format!("expected {name} line")))
    };
    let n: usize = field("n")?.parse().map_err(|_| bad("bad n"))?;
    let m: usize = field("m")?.parse().map_err(|_| bad("bad m"))?;
    let scale: i64 = field("scale")?.parse().map_err(|_| bad("bad scale"))?;
    let source = match field("source")?.as_str() {
        "raw" => BqopSource::Raw,
        "reduced-from-qap" => BqopSource::ReducedFromQap,
        other => return Err(bad(&format!("unknown source {other:?}"))),
    };
    if lines.next() != Some("b") {
        return Err(bad("missing b section"));
    }
    let mut entries = Vec::with_capacity(n * n);
    for line in lines {
        for (pos, tok) in line.split_whitespace().enumerate() {
            entries.push(tok.parse::<i64>().map_err(|_| Error::MalformedToken {
                token: tok.to_string(),
                position: pos,
            })?);
        }
    }
    let b = SymMatrix::new(n, entries, true)?;
    CardBqop::new(b, m, scale, source)
}

/// A parsed solution file: either a permutation or a 0/1 vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Solution {
    Permutation(Permutation),
    Binary(BinaryVector),
}

/// Parse a solution file holding `n` whitespace-separated tokens: a
/// permutation of `1..n` or a 0/1 vector, auto-detected by value range
/// (any value above 1 means permutation).
pub fn parse_solution(text: &str, n: usize) -> Result<Solution> {
    let tokens = parse_tokens(text)?;
    if tokens.len() != n {
        return Err(Error::CountMismatch {
            expected: n,
            found: tokens.len(),
        });
    }
    if tokens.iter().all(|&v| v == 0 || v == 1) {
        return Ok(Solution::Binary(BinaryVector::from_bits(
            tokens.iter().map(|&v| v == 1).collect(),
        )));
    }
    if tokens.iter().any(|&v| v < 1 || v > n as i64) {
        return Err(Error::UnrecognizedSolution(format!(
            "values outside 1..{n} and not a 0/1 vector"
        )));
    }
    let perm = Permutation::new(tokens.iter().map(|&v| (v - 1) as u32).collect())?;
    Ok(Solution::Permutation(perm))
}
