//! Lower bounders behind an interval-bracketing contract.
//!
//! A bounder attached to a node emits a sequence of intervals `[a_p, b_p]`
//! closing monotonically around its relaxation value `nu`, itself a valid
//! lower bound on the node optimum. Against a target `t` the search only
//! needs the first decisive step: `t <= a_p` proves the node optimum is at
//! least `t` (prune), `b_p < t` proves the relaxation cannot reach `t`
//! (branch). Neither needs `nu` to converge, which is what makes the
//! contract cheap to satisfy.
//!
//! Two bounders ship: `exact`, an enumeration oracle for small free sets,
//! and `spectral`, a one-shot projected eigenvalue relaxation. Both emit a
//! single step with `a == b`. Richer iterative bounders plug in through the
//! same [`Bounder`] trait and registry.

use crate::error::Error;
use crate::subproblem::ReducedBqop;
use crate::Result;
use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Default combination budget for the exact enumeration oracle.
pub const DEFAULT_ENUM_BUDGET: u128 = 2_000_000;

/// Relative guard subtracted from eigenvalues (and added to norms) so
/// floating-point rounding can never produce an optimistic bound.
pub const EIGEN_TOL: f64 = 1e-9;

/// One bracketing step: iteration index and interval endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketStep {
    pub p: usize,
    pub a: f64,
    pub b: f64,
}

/// Outcome of bounding a node against a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictKind {
    /// The node optimum is at least the target; drop the node.
    Pruned,
    /// The relaxation value is below the target; the node must be branched.
    Active,
}

/// The decision for a node, the terminal endpoint certifying it (`a_q` when
/// pruned, `b_q` when active), and the bracket trace that led there.
///
/// A bounder failure degrades to `Active` with an infinite certificate and
/// whatever trace was emitted before the failure; it never degrades to an
/// unsound `Pruned`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub certificate: f64,
    pub trace: Vec<BracketStep>,
}

impl Verdict {
    pub fn is_pruned(&self) -> bool {
        self.kind == VerdictKind::Pruned
    }
}

/// A bound provider emitting a monotone bracket sequence for a node.
pub trait Bounder: Send + Sync {
    fn name(&self) -> &str;

    /// The bracket sequence for a feasible reduced node. Implementations
    /// may fail upfront (for example a budget check); per-step failures are
    /// reported through the iterator items.
    fn bracket(
        &self,
        r: &ReducedBqop,
    ) -> Result<Box<dyn Iterator<Item = Result<BracketStep>> + '_>>;
}

/// Drive a bounder against a target: stop at the first decisive step.
///
/// The values emitted before termination never depend on the target; the
/// target only decides where the trace stops. Any failure degrades to
/// `Active` with certificate `+inf`.
pub fn bound_node(r: &ReducedBqop, target: f64, bounder: &dyn Bounder) -> Verdict {
    let mut trace = Vec::new();
    let steps = match bounder.bracket(r) {
        Ok(steps) => steps,
        Err(_) => {
            return Verdict {
                kind: VerdictKind::Active,
                certificate: f64::INFINITY,
                trace,
            }
        }
    };
    for step in steps {
        let step = match step {
            Ok(s) => s,
            Err(_) => {
                return Verdict {
                    kind: VerdictKind::Active,
                    certificate: f64::INFINITY,
                    trace,
                }
            }
        };
        debug_assert!(step.a <= step.b, "bracket step with a > b");
        if let Some(prev) = trace.last() {
            let prev: &BracketStep = prev;
            debug_assert!(
                step.a >= prev.a && step.b <= prev.b,
                "bracket endpoints not monotone"
            );
        }
        trace.push(step);
        if target <= step.a {
            return Verdict {
                kind: VerdictKind::Pruned,
                certificate: step.a,
                trace,
            };
        }
        if step.b < target {
            return Verdict {
                kind: VerdictKind::Active,
                certificate: step.b,
                trace,
            };
        }
    }
    // Exhausted without a decision: the relaxation value may still reach the
    // target, so branching is the only sound answer.
    let cert = trace.last().map_or(f64::INFINITY, |s| s.b);
    Verdict {
        kind: VerdictKind::Active,
        certificate: cert,
        trace,
    }
}

/// Exact node optimum by enumerating all cardinality-`m'` supports.
/// Fails when the combination count exceeds `budget`.
pub fn exact_bound_with(r: &ReducedBqop, budget: u128) -> Result<i64> {
    let combos = binomial(r.dim() as u128, r.residual_cardinality() as u128);
    if combos > budget {
        return Err(Error::EnumerationBudget {
            combinations: combos,
            budget,
        });
    }
    Ok((0..r.dim())
        .combinations(r.residual_cardinality())
        .map(|s| r.value_of_support(&s))
        .min()
        .expect("at least one feasible support"))
}

/// [`exact_bound_with`] under the default budget.
pub fn exact_bound(r: &ReducedBqop) -> Result<i64> {
    exact_bound_with(r, DEFAULT_ENUM_BUDGET)
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// One-shot projected spectral lower bound.
///
/// Every feasible `y` satisfies `e^T y = m'` and `||y||^2 = m'`, so it lies
/// on the sphere slice `{y : e^T y = m', ||y - (m'/f) e||^2 = rho^2}` with
/// `rho^2 = m'(f - m')/f`. Writing `y = (m'/f) e + z` with `e^T z = 0`
/// splits the quadratic into three terms minimized independently:
///
/// ```text
/// (m'/f)^2 e^T Q e  -  2 (m'/f) ||l|| rho  +  lambda_min(Q~) rho^2
/// ```
///
/// where `l` is the component of `Qe` orthogonal to `e` and `Q~` is `Q`
/// restricted to the hyperplane `e^T z = 0`. The computed smallest
/// eigenvalue is shifted down (and `||l||` up) by a relative guard so
/// rounding cannot make the bound optimistic. Degenerate cardinalities are
/// exact: `m' = 0` gives the offset, `m' = f` the full matrix sum.
pub fn spectral_bound(r: &ReducedBqop) -> Result<f64> {
    let f = r.dim();
    let mp = r.residual_cardinality();
    let scale = r.scale() as f64;
    let base = scale * r.offset() as f64;
    if mp == 0 {
        return Ok(base);
    }
    if mp == f {
        return Ok(base + scale * r.matrix_total() as f64);
    }
    let q = DMatrix::from_fn(f, f, |i, j| scale * r.entry(i, j) as f64);
    let guard = EIGEN_TOL * q.norm().max(1.0);

    let fl = f as f64;
    let mu = mp as f64 / fl;
    let rho2 = (mp * (f - mp)) as f64 / fl;
    let qe: DVector<f64> = &q * DVector::from_element(f, 1.0);
    let total: f64 = qe.sum();
    let term_mean = mu * mu * total;

    // l = Qe minus its component along e
    let l = &qe - DVector::from_element(f, total / fl);
    let l_norm = l.norm() * (1.0 + EIGEN_TOL) + guard;

    // restrict Q to the hyperplane via a Householder reflection taking
    // e/sqrt(f) to the first axis; rows/cols 2.. of HQH span it
    let mut v = DVector::from_element(f, 1.0 / fl.sqrt());
    v[0] -= 1.0;
    let vn = v.norm();
    let qt = if vn > 0.0 {
        let v = v / vn;
        let h = DMatrix::identity(f, f) - 2.0 * &v * v.transpose();
        let hqh = &h * q * &h;
        hqh.view((1, 1), (f - 1, f - 1)).into_owned()
    } else {
        q.view((1, 1), (f - 1, f - 1)).into_owned()
    };
    let eigen = qt.symmetric_eigenvalues();
    let lam_min = eigen.iter().copied().fold(f64::INFINITY, f64::min);
    if !lam_min.is_finite() {
        return Err(Error::InvalidConfig(
            "eigensolver returned a non-finite value".into(),
        ));
    }
    let lam_safe = lam_min - guard;

    Ok(base + term_mean - 2.0 * mu * l_norm * rho2.sqrt() + lam_safe * rho2)
}

/// Enumeration oracle behind the bracket contract: one step, `a == b`.
#[derive(Debug, Clone)]
pub struct ExactBounder {
    pub budget: u128,
}

impl Default for ExactBounder {
    fn default() -> Self {
        Self {
            budget: DEFAULT_ENUM_BUDGET,
        }
    }
}

impl Bounder for ExactBounder {
    fn name(&self) -> &str {
        "exact"
    }

    fn bracket(
        &self,
        r: &ReducedBqop,
    ) -> Result<Box<dyn Iterator<Item = Result<BracketStep>> + '_>> {
        let v = exact_bound_with(r, self.budget)? as f64;
        Ok(Box::new(std::iter::once(Ok(BracketStep {
            p: 1,
            a: v,
            b: v,
        }))))
    }
}

/// Projected spectral relaxation behind the bracket contract: one step,
/// `a == b`.
#[derive(Debug, Clone, Default)]
pub struct SpectralBounder;

impl Bounder for SpectralBounder {
    fn name(&self) -> &str {
        "spectral"
    }

    fn bracket(
        &self,
        r: &ReducedBqop,
    ) -> Result<Box<dyn Iterator<Item = Result<BracketStep>> + '_>> {
        let v = spectral_bound(r)?;
        Ok(Box::new(std::iter::once(Ok(BracketStep {
            p: 1,
            a: v,
            b: v,
        }))))
    }
}

/// A named bounder with free-form parameters, resolved through
/// [`make_bounder`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BounderSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, String>,
}

impl BounderSpec {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_string(),
            parameters: BTreeMap::new(),
        }
    }
}

/// Resolve a [`BounderSpec`] against the registry. Known names: `exact`
/// (parameter `budget`) and `spectral`.
pub fn make_bounder(spec: &BounderSpec) -> Result<Box<dyn Bounder>> {
    match spec.name.as_str() {
        "exact" => {
            let budget = match spec.parameters.get("budget") {
                Some(s) => s
                    .parse::<u128>()
                    .map_err(|_| Error::InvalidConfig(format!("bad exact budget {s:?}")))?,
                None => DEFAULT_ENUM_BUDGET,
            };
            Ok(Box::new(ExactBounder { budget }))
        }
        "spectral" => Ok(Box::new(SpectralBounder)),
        other => Err(Error::UnknownBounder {
            name: other.to_string(),
        }),
    }
}
