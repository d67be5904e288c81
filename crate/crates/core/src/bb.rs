//! Breadth-first branch and bound against a fixed target lower bound.
//!
//! There is no incumbent search: the target plays the role of the incumbent,
//! and the run either certifies that every feasible solution has value at
//! least the target, refutes the target with a concrete witness, or runs out
//! of budget. Branching is by orbit: a node's free set is partitioned into
//! orbits of the node's stabilizer, one orbit `o` is chosen, and the node
//! splits into "every variable of `o` is zero" and "the representative
//! `min(o)` is one". The two children cover the parent because fixing any
//! other member of `o` to one gives a subproblem with the same optimal
//! value.
//!
//! Orbits are scored by the objective value at the fractional completion
//! `x_k = m'/|F|` of the candidate child, the average objective over
//! feasible solutions under an independence approximation; the orbit with
//! the largest score is branched. Scores are compared in exact integer
//! arithmetic so ties (which occur in practice) break deterministically
//! toward the smallest representative.
//!
//! Nodes of one depth level are processed by a worker pool in chunks;
//! results are folded in frontier order, so every count, the outcome, and
//! the report bytes are independent of the worker count. The frontier
//! spills to a temporary file beyond a configurable size, preserving
//! breadth-first order.

use crate::bounding::{bound_node, make_bounder, Bounder, BounderSpec, VerdictKind};
use crate::error::Error;
use crate::instance::{BinaryVector, CardBqop};
use crate::subproblem::{reduce, NodeKey};
use crate::symmetry::{orbits, point_stabilizer, OrbitSet, PermutationGroup};
use crate::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Seek, SeekFrom, Write};
use std::sync::Arc;

/// Chunk size for parallel level processing.
const CHUNK: usize = 1024;

/// How candidate children are scored for orbit selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ScoreRule {
    /// Objective at the fractional completion `x_k = m'/|F|`: pair weight
    /// `(m'/f)^2`, an independence approximation of the feasible average.
    #[default]
    IndependenceSurrogate,
    /// True mean objective over all feasible completions: pair weight
    /// `m'(m'-1) / (f(f-1))`.
    ExactAverage,
}

/// Configuration for [`certify`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BbConfig {
    /// The target lower bound to certify.
    pub target: f64,
    pub bounder: BounderSpec,
    /// Budget on processed nodes.
    pub max_nodes: usize,
    /// Budget on tree depth.
    pub max_depth: usize,
    /// Worker threads; 0 picks the library default.
    pub parallelism: usize,
    /// Frontier nodes kept in memory per level before spilling to disk.
    pub spill_threshold: usize,
    /// Orbit scoring rule; the fractional surrogate is the default.
    #[serde(default)]
    pub score_rule: ScoreRule,
}

impl BbConfig {
    pub fn new(target: f64, bounder: BounderSpec) -> Self {
        Self {
            target,
            bounder,
            max_nodes: 10_000_000,
            max_depth: 100_000,
            parallelism: 1,
            spill_threshold: 1_000_000,
            score_rule: ScoreRule::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.target.is_finite() {
            return Err(Error::InvalidConfig("target must be finite".into()));
        }
        if self.max_nodes == 0 || self.max_depth == 0 || self.spill_threshold == 0 {
            return Err(Error::InvalidConfig("budgets must be positive".into()));
        }
        Ok(())
    }
}

/// Final outcome of a certification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BbOutcome {
    /// Every feasible solution has objective value at least the target.
    Certified,
    /// A feasible solution below the target, with its value.
    Refuted { witness: BinaryVector, value: i64 },
    /// A budget stopped the search before a conclusion; never reported as
    /// certified.
    BudgetExhausted,
}

/// Aggregate statistics of a run. All fields are deterministic for a fixed
/// configuration, independent of worker count and scheduling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BbReport {
    pub outcome: BbOutcome,
    pub target: f64,
    /// Number of tree nodes at each depth, root included.
    pub nodes_per_depth: Vec<usize>,
    /// Per depth, a histogram `orbit size -> branched-node count`.
    pub orbit_size_counts: Vec<BTreeMap<usize, usize>>,
    pub pruned: usize,
    pub branched: usize,
    pub infeasible: usize,
    pub leaves: usize,
    pub bounded_nodes: usize,
    /// Total bracket steps over all bounded nodes.
    pub bracket_steps: usize,
    pub processed_nodes: usize,
}

/// A frontier node: its fixing, depth, and the subgroup known to stabilize
/// it. Stabilizers shrink monotonically down any path and are shared when
/// a child keeps its parent's group.
#[derive(Debug, Clone)]
pub struct BbNode {
    pub key: NodeKey,
    pub depth: usize,
    pub stab: Arc<PermutationGroup>,
}

/// The objective value at the fractional completion of a node: fixed
/// variables keep their values and every free variable is set to
/// `m'/|F|`. With an empty free set this is the exact value of the fully
/// fixed solution.
pub fn score_node_average(bqop: &CardBqop, key: &NodeKey) -> Result<f64> {
    if key.n() != bqop.n() {
        return Err(Error::DimensionMismatch {
            expected: bqop.n(),
            found: key.n(),
        });
    }
    let agg = NodeAggregates::compute(bqop, key);
    let f = agg.free.len() as i128;
    let mp = (bqop.cardinality() - key.i1().len()) as i128;
    let scale = bqop.scale() as f64;
    if f == 0 {
        return Ok(scale * agg.w as f64);
    }
    // exact integer numerator over f^2, the same route orbit scoring uses,
    // so printed scores and branching scores agree to the last bit
    let num = agg.w as i128 * f * f + 2 * mp * f * agg.u as i128 + mp * mp * agg.t as i128;
    Ok(scale * num as f64 / (f * f) as f64)
}

/// The true mean objective over all feasible completions of a node:
/// fixed pairs count fully, fixed-free pairs with weight `m'/|F|`, and
/// distinct free pairs with weight `m'(m'-1) / (|F|(|F|-1))`. Assumes the
/// cost matrix has zero diagonal.
pub fn score_node_exact_average(bqop: &CardBqop, key: &NodeKey) -> Result<f64> {
    if key.n() != bqop.n() {
        return Err(Error::DimensionMismatch {
            expected: bqop.n(),
            found: key.n(),
        });
    }
    let agg = NodeAggregates::compute(bqop, key);
    let f = agg.free.len() as i128;
    let mp = (bqop.cardinality() - key.i1().len()) as i128;
    let scale = bqop.scale() as f64;
    if f == 0 {
        return Ok(scale * agg.w as f64);
    }
    if f == 1 {
        let num = agg.w as i128 + 2 * mp * agg.u as i128;
        return Ok(scale * num as f64);
    }
    let num = agg.w as i128 * f * (f - 1)
        + 2 * mp * (f - 1) * agg.u as i128
        + mp * (mp - 1) * agg.t as i128;
    Ok(scale * num as f64 / (f * (f - 1)) as f64)
}

/// Sums of `B` over the blocks induced by a node's fixing, plus per-free-
/// variable cross sums; everything orbit scoring needs in O(1) per
/// candidate.
struct NodeAggregates {
    free: Vec<usize>,
    /// `sum_{I1 x I1} B`
    w: i64,
    /// `sum_{I1 x F} B`
    u: i64,
    /// `sum_{F x F} B`
    t: i64,
    /// per free variable `j`: `sum_{k in I1} B[k][j]`, indexed like `free`
    l: Vec<i64>,
    /// per free variable `j`: `sum_{k in F} B[j][k]`, indexed like `free`
    r: Vec<i64>,
}

impl NodeAggregates {
    fn compute(bqop: &CardBqop, key: &NodeKey) -> Self {
        let b = bqop.matrix();
        let free: Vec<usize> = key.free().to_vec();
        let i1: Vec<usize> = key.i1().to_vec();
        let mut w = 0i64;
        for &j in &i1 {
            for &k in &i1 {
                w += b.get(j, k);
            }
        }
        let mut l = vec![0i64; free.len()];
        let mut r = vec![0i64; free.len()];
        for (lj, &j) in free.iter().enumerate() {
            let row = b.row(j);
            l[lj] = i1.iter().map(|&k| row[k]).sum();
            r[lj] = free.iter().map(|&k| row[k]).sum();
        }
        let u: i64 = l.iter().sum();
        let t: i64 = r.iter().sum();
        Self {
            free,
            w,
            u,
            t,
            l,
            r,
        }
    }

    /// Exact integer score numerator of the child fixing `j` to one, over
    /// a denominator shared by all candidates of the node (`q^2` for the
    /// surrogate rule, `q(q-1)` for the exact average, `q = |F| - 1`).
    fn child_score_num(&self, local_j: usize, mp_child: usize, rule: ScoreRule) -> (i128, i128) {
        let q = (self.free.len() - 1) as i128;
        let p = mp_child as i128;
        let w1 = self.w as i128 + 2 * self.l[local_j] as i128;
        let u1 = self.u as i128 - self.l[local_j] as i128 + self.r[local_j] as i128;
        let t1 = self.t as i128 - 2 * self.r[local_j] as i128;
        if q == 0 {
            // fully fixed child: exact value
            return (w1, 1);
        }
        match rule {
            ScoreRule::IndependenceSurrogate => (w1 * q * q + 2 * p * q * u1 + p * p * t1, q * q),
            ScoreRule::ExactAverage => {
                if q == 1 {
                    // a single free variable leaves no distinct pair
                    (w1 + 2 * p * u1, 1)
                } else {
                    (
                        w1 * q * (q - 1) + 2 * p * (q - 1) * u1 + p * (p - 1) * t1,
                        q * (q - 1),
                    )
                }
            }
        }
    }
}

/// One row of the branching table of a node: an orbit of the stabilizer on
/// the free set and the score of the child that fixes its representative.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitRow {
    /// Orbit members, ascending, 0-based.
    pub orbit: Vec<usize>,
    /// Fractional-completion score of fixing `min(orbit)` to one.
    pub score: f64,
}

/// All orbits of the node's free set, scored and sorted by decreasing score
/// with ties broken toward the smallest representative.
pub fn orbit_table(
    bqop: &CardBqop,
    key: &NodeKey,
    stab: &PermutationGroup,
) -> Result<Vec<OrbitRow>> {
    orbit_table_with(bqop, key, stab, ScoreRule::default())
}

/// [`orbit_table`] under an explicit scoring rule.
pub fn orbit_table_with(
    bqop: &CardBqop,
    key: &NodeKey,
    stab: &PermutationGroup,
    rule: ScoreRule,
) -> Result<Vec<OrbitRow>> {
    let free = key.free();
    if free.is_empty() {
        return Err(Error::InvalidConfig(
            "orbit table of a node with no free variables".into(),
        ));
    }
    let orbit_set: OrbitSet = orbits(stab, &free);
    Ok(scored_rows(bqop, key, &orbit_set, rule))
}

fn scored_rows(
    bqop: &CardBqop,
    key: &NodeKey,
    orbit_set: &OrbitSet,
    rule: ScoreRule,
) -> Vec<OrbitRow> {
    let agg = NodeAggregates::compute(bqop, key);
    let local_of: BTreeMap<usize, usize> =
        agg.free.iter().enumerate().map(|(l, &g)| (g, l)).collect();
    let mp_child = bqop.cardinality() - key.i1().len() - 1;
    let scale = bqop.scale() as f64;
    let mut rows: Vec<(i128, OrbitRow)> = orbit_set
        .orbits()
        .iter()
        .map(|o| {
            let (num, den) = agg.child_score_num(local_of[&o[0]], mp_child, rule);
            let score = scale * num as f64 / den as f64;
            (
                num,
                OrbitRow {
                    orbit: o.clone(),
                    score,
                },
            )
        })
        .collect();
    // stable sort: equal scores stay ordered by smallest representative
    rows.sort_by_key(|(num, _)| std::cmp::Reverse(*num));
    rows.into_iter().map(|(_, row)| row).collect()
}

/// The orbit branched at this node: the one whose representative child has
/// the largest score under the default rule.
pub fn select_orbit(bqop: &CardBqop, key: &NodeKey, stab: &PermutationGroup) -> Result<Vec<usize>> {
    Ok(orbit_table(bqop, key, stab)?.swap_remove(0).orbit)
}

/// Split a node on an orbit: the zero child fixes every orbit member to
/// zero, the one child fixes the representative to one.
pub fn branch(key: &NodeKey, orbit: &[usize]) -> (NodeKey, NodeKey) {
    let rep = orbit[0];
    (key.with_zeroed(orbit), key.with_fixed_one(rep))
}

/// What processing a single node produced.
pub(crate) enum NodeFate {
    Infeasible,
    /// Forced completion evaluated exactly; support kept for witnesses.
    Leaf {
        value: i64,
        support: Vec<usize>,
    },
    Pruned {
        steps: usize,
    },
    Branched {
        zero: BbNode,
        one: BbNode,
        orbit_size: usize,
        steps: usize,
    },
}

/// Process one node: feasibility, forced-leaf evaluation, bounding against
/// the target, then orbit selection and branching. Shared between the
/// certifier and the tree-size estimator so both walk the same tree.
pub(crate) fn expand_node(
    bqop: &CardBqop,
    target: f64,
    bounder: &dyn Bounder,
    rule: ScoreRule,
    node: &BbNode,
) -> NodeFate {
    let r = match reduce(bqop, &node.key) {
        Ok(r) => r,
        Err(Error::InfeasibleNode { .. }) => return NodeFate::Infeasible,
        Err(e) => unreachable!("node reduction cannot fail otherwise: {e}"),
    };
    let mp = r.residual_cardinality();
    let f = r.dim();
    if mp == 0 || mp == f {
        let mut support: Vec<usize> = node.key.i1().to_vec();
        let value = if mp == 0 {
            r.value_of_support(&[])
        } else {
            support.extend(r.free());
            r.value_of_support(&(0..f).collect::<Vec<_>>())
        };
        return NodeFate::Leaf { value, support };
    }
    let verdict = bound_node(&r, target, bounder);
    let steps = verdict.trace.len();
    if verdict.kind == VerdictKind::Pruned {
        return NodeFate::Pruned { steps };
    }
    let orbit_set = orbits(&node.stab, &node.key.free());
    let rows = scored_rows(bqop, &node.key, &orbit_set, rule);
    let orbit = &rows[0].orbit;
    let (zero_key, one_key) = branch(&node.key, orbit);
    let rep = orbit[0];
    let one_stab = if node.stab.is_trivial() {
        Arc::clone(&node.stab)
    } else {
        Arc::new(point_stabilizer(&node.stab, rep))
    };
    NodeFate::Branched {
        // the orbit is a stabilizer orbit, so the zero child keeps the group
        zero: BbNode {
            key: zero_key,
            depth: node.depth + 1,
            stab: Arc::clone(&node.stab),
        },
        one: BbNode {
            key: one_key,
            depth: node.depth + 1,
            stab: one_stab,
        },
        orbit_size: orbit.len(),
        steps,
    }
}

/// On-disk form of a spilled frontier node.
#[derive(Serialize, Deserialize)]
struct SpillNode {
    key: NodeKey,
    depth: usize,
    stab: Vec<crate::instance::Permutation>,
}

/// One breadth-first level: an in-memory prefix and an optional spill file
/// holding the overflow, in generation order.
pub(crate) struct LevelQueue {
    threshold: usize,
    in_mem: Vec<BbNode>,
    spilled: usize,
    spill: Option<BufWriter<std::fs::File>>,
}

impl LevelQueue {
    pub(crate) fn new(threshold: usize) -> Self {
        Self {
            threshold,
            in_mem: Vec::new(),
            spilled: 0,
            spill: None,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.in_mem.len() + self.spilled
    }

    pub(crate) fn push(&mut self, node: BbNode) -> Result<()> {
        if self.in_mem.len() < self.threshold {
            self.in_mem.push(node);
            return Ok(());
        }
        let writer = match self.spill.as_mut() {
            Some(w) => w,
            None => {
                let file = tempfile::tempfile()?;
                self.spill = Some(BufWriter::new(file));
                self.spill.as_mut().unwrap()
            }
        };
        let record = SpillNode {
            key: node.key,
            depth: node.depth,
            stab: node.stab.elements().to_vec(),
        };
        serde_json::to_writer(&mut *writer, &record)
            .map_err(|e| Error::InvalidConfig(format!("spill serialization failed: {e}")))?;
        writer.write_all(b"\n")?;
        self.spilled += 1;
        Ok(())
    }

    /// Stream the level back out in generation order, in chunks of at most
    /// `chunk` nodes. Consumes the queue.
    pub(crate) fn drain_chunks(mut self, chunk: usize) -> Result<LevelChunks> {
        let reader = match self.spill.take() {
            Some(mut w) => {
                w.flush()?;
                let mut file = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
                file.seek(SeekFrom::Start(0))?;
                Some(BufReader::new(file))
            }
            None => None,
        };
        Ok(LevelChunks {
            in_mem: self.in_mem.into_iter(),
            reader,
            chunk,
        })
    }
}

pub(crate) struct LevelChunks {
    in_mem: std::vec::IntoIter<BbNode>,
    reader: Option<BufReader<std::fs::File>>,
    chunk: usize,
}

impl Iterator for LevelChunks {
    type Item = Result<Vec<BbNode>>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut out = Vec::with_capacity(self.chunk);
        while out.len() < self.chunk {
            if let Some(node) = self.in_mem.next() {
                out.push(node);
                continue;
            }
            let Some(reader) = self.reader.as_mut() else {
                break;
            };
            let mut line = String::new();
            match reader.read_line(&mut line) {
                Ok(0) => break,
                Ok(_) => {
                    let record: SpillNode = match serde_json::from_str(line.trim_end()) {
                        Ok(r) => r,
                        Err(e) => {
                            return Some(Err(Error::InvalidConfig(format!(
                                "spill deserialization failed: {e}"
                            ))))
                        }
                    };
                    let n = record.key.n();
                    out.push(BbNode {
                        key: record.key,
                        depth: record.depth,
                        stab: Arc::new(PermutationGroup::from_elements(n, record.stab)),
                    });
                }
                Err(e) => return Some(Err(Error::Io(e))),
            }
        }
        if out.is_empty() {
            None
        } else {
            Some(Ok(out))
        }
    }
}

/// Certify that the BQOP optimum is at least `config.target`, refute it
/// with a witness, or stop on budget.
///
/// `group` must be (a subgroup of) the automorphism group of the cost
/// matrix; passing the trivial group degrades orbit branching to plain
/// best-score variable branching.
pub fn certify(bqop: &CardBqop, config: &BbConfig, group: &PermutationGroup) -> Result<BbReport> {
    config.validate()?;
    if group.n() != bqop.n() {
        return Err(Error::DimensionMismatch {
            expected: bqop.n(),
            found: group.n(),
        });
    }
    let bounder = make_bounder(&config.bounder)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;

    let mut report = BbReport {
        outcome: BbOutcome::Certified,
        target: config.target,
        nodes_per_depth: Vec::new(),
        orbit_size_counts: Vec::new(),
        pruned: 0,
        branched: 0,
        infeasible: 0,
        leaves: 0,
        bounded_nodes: 0,
        bracket_steps: 0,
        processed_nodes: 0,
    };

    let mut level = LevelQueue::new(config.spill_threshold);
    level.push(BbNode {
        key: NodeKey::root(bqop.n()),
        depth: 0,
        stab: Arc::new(group.clone()),
    })?;

    let mut depth = 0usize;
    while level.len() > 0 {
        let width = level.len();
        if report.processed_nodes + width > config.max_nodes || depth > config.max_depth {
            report.outcome = BbOutcome::BudgetExhausted;
            return Ok(report);
        }
        report.nodes_per_depth.push(width);
        report.orbit_size_counts.push(BTreeMap::new());
        let mut next = LevelQueue::new(config.spill_threshold);
        let mut refutation: Option<(BinaryVector, i64)> = None;

        for chunk in level.drain_chunks(CHUNK)? {
            let chunk = chunk?;
            let fates: Vec<NodeFate> = pool.install(|| {
                chunk
                    .par_iter()
                    .map(|node| {
                        expand_node(
                            bqop,
                            config.target,
                            bounder.as_ref(),
                            config.score_rule,
                            node,
                        )
                    })
                    .collect()
            });
            report.processed_nodes += chunk.len();
            for fate in fates {
                match fate {
                    NodeFate::Infeasible => report.infeasible += 1,
                    NodeFate::Leaf { value, support } => {
                        report.leaves += 1;
                        if (value as f64) < config.target && refutation.is_none() {
                            refutation =
                                Some((BinaryVector::from_support(bqop.n(), support), value));
                        }
                    }
                    NodeFate::Pruned { steps } => {
                        report.pruned += 1;
                        report.bounded_nodes += 1;
                        report.bracket_steps += steps;
                    }
                    NodeFate::Branched {
                        zero,
                        one,
                        orbit_size,
                        steps,
                    } => {
                        report.branched += 1;
                        report.bounded_nodes += 1;
                        report.bracket_steps += steps;
                        *report.orbit_size_counts[depth]
                            .entry(orbit_size)
                            .or_insert(0) += 1;
                        next.push(zero)?;
                        next.push(one)?;
                    }
                }
            }
        }
        if let Some((witness, value)) = refutation {
            report.outcome = BbOutcome::Refuted { witness, value };
            return Ok(report);
        }
        level = next;
        depth += 1;
    }
    Ok(report)
}
