//! Enumeration-tree size estimation by per-depth random sampling.
//!
//! Levels are expanded in full while they stay narrow, recording exact
//! widths `t_0, t_1, ..`. Once a level reaches the full-width threshold,
//! expansion switches to sampling: at each depth a fixed-size subset of the
//! carried nodes is bounded and branched, the fraction of active nodes
//! extrapolates the next width through the growth rate `2 r_k / s_k`, and
//! the run stops when a sampled level produces no active node. The total
//! node count estimate is the sum of the exact widths plus the extrapolated
//! widths below the switch depth.
//!
//! Sampling uses a seeded counter-based generator (ChaCha8) and a partial
//! Fisher-Yates shuffle, so a report is reproducible from its seed on any
//! platform. Selection is sequential; only the bounding of the selected
//! nodes runs on the worker pool, and results are folded in frontier order,
//! so reports are identical across worker counts.

use crate::bb::{expand_node, BbNode, NodeFate, ScoreRule};
use crate::bounding::{make_bounder, Bounder, BounderSpec};
use crate::error::Error;
use crate::instance::CardBqop;
use crate::subproblem::NodeKey;
use crate::symmetry::PermutationGroup;
use crate::Result;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Configuration for [`estimate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Expand levels in full while they are narrower than this.
    pub full_width_threshold: usize,
    /// Nodes sampled per depth once the carried width reaches the cutoff.
    pub sample_size: usize,
    /// Carried widths below this are processed in full instead of sampled.
    pub sample_cutoff: usize,
    pub seed: u64,
    pub bounder: BounderSpec,
    pub target: f64,
    /// Worker threads; 0 picks the library default.
    pub parallelism: usize,
    /// Budget on tree depth.
    pub max_levels: usize,
    /// Orbit scoring rule; must match the certification run it is
    /// compared against.
    #[serde(default)]
    pub score_rule: ScoreRule,
}

impl EstimatorConfig {
    pub fn new(target: f64, bounder: BounderSpec, seed: u64) -> Self {
        Self {
            full_width_threshold: 1000,
            sample_size: 100,
            sample_cutoff: 500,
            seed,
            bounder,
            target,
            parallelism: 1,
            max_levels: 100_000,
            score_rule: ScoreRule::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.full_width_threshold == 0 || self.sample_size == 0 || self.sample_cutoff == 0 {
            return Err(Error::InvalidConfig(
                "estimator thresholds must be positive".into(),
            ));
        }
        if self.sample_size > self.full_width_threshold {
            return Err(Error::InvalidConfig(
                "sample size must not exceed the full-width threshold".into(),
            ));
        }
        if !self.target.is_finite() {
            return Err(Error::InvalidConfig("target must be finite".into()));
        }
        if self.max_levels == 0 {
            return Err(Error::InvalidConfig("level budget must be positive".into()));
        }
        Ok(())
    }
}

/// One sampled depth: carried width, sample size, active count, and the
/// extrapolated width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSample {
    pub depth: usize,
    /// Carried nodes at this depth (`t-bar_k`).
    pub carried: usize,
    /// Sampled nodes (`s_k`).
    pub sampled: usize,
    /// Active (branched) nodes among the sample (`r_k`).
    pub active: usize,
    /// Extrapolated width of the full tree at this depth (`t-hat_k`).
    pub estimate: f64,
}

/// The estimate and everything needed to reproduce and plot it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    /// First depth handled by sampling; `None` when the tree died while
    /// still narrow and the count is exact.
    pub switch_depth: Option<usize>,
    /// Exactly known level widths `t_0 ..= t_switch`.
    pub exact_counts: Vec<usize>,
    /// One row per sampled depth, starting at the switch depth.
    pub sampled: Vec<DepthSample>,
    /// Per-depth growth rates `2 r_k / s_k`, aligned with `sampled`.
    pub rates: Vec<f64>,
    /// Exact widths plus extrapolated widths below the switch depth.
    pub total_estimate: f64,
}

/// Estimate the total node count of the enumeration tree for the target.
pub fn estimate(
    bqop: &CardBqop,
    group: &PermutationGroup,
    cfg: &EstimatorConfig,
) -> Result<EstimatorReport> {
    cfg.validate()?;
    if group.n() != bqop.n() {
        return Err(Error::DimensionMismatch {
            expected: bqop.n(),
            found: group.n(),
        });
    }
    let bounder = make_bounder(&cfg.bounder)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;

    let mut report = EstimatorReport {
        switch_depth: None,
        exact_counts: Vec::new(),
        sampled: Vec::new(),
        rates: Vec::new(),
        total_estimate: 0.0,
    };

    let mut level: Vec<BbNode> = vec![BbNode {
        key: NodeKey::root(bqop.n()),
        depth: 0,
        stab: Arc::new(group.clone()),
    }];
    let mut depth = 0usize;

    // full expansion while levels stay narrow
    while !level.is_empty() && level.len() < cfg.full_width_threshold {
        if depth >= cfg.max_levels {
            return Err(Error::LevelBudget {
                levels: cfg.max_levels,
            });
        }
        report.exact_counts.push(level.len());
        level = expand_all(
            bqop,
            cfg.target,
            bounder.as_ref(),
            cfg.score_rule,
            &pool,
            &level,
        );
        depth += 1;
    }

    if level.is_empty() {
        // the whole tree was expanded: the "estimate" is the exact count
        report.total_estimate = report.exact_counts.iter().sum::<usize>() as f64;
        return Ok(report);
    }

    // sampling phase
    report.switch_depth = Some(depth);
    report.exact_counts.push(level.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut carried = level;
    let mut width_estimate = carried.len() as f64;
    let mut first_row = true;
    loop {
        if depth >= cfg.max_levels {
            return Err(Error::LevelBudget {
                levels: cfg.max_levels,
            });
        }
        let width = carried.len();
        if width == 0 {
            break;
        }
        let s_k = if width >= cfg.sample_cutoff {
            cfg.sample_size.min(width)
        } else {
            width
        };
        let picked = sample_indices(&mut rng, width, s_k);
        let sample: Vec<&BbNode> = picked.iter().map(|&i| &carried[i]).collect();
        let fates: Vec<NodeFate> = pool.install(|| {
            sample
                .par_iter()
                .map(|node| expand_node(bqop, cfg.target, bounder.as_ref(), cfg.score_rule, node))
                .collect()
        });
        let mut children = Vec::new();
        let mut active = 0usize;
        for fate in fates {
            if let NodeFate::Branched { zero, one, .. } = fate {
                active += 1;
                children.push(zero);
                children.push(one);
            }
        }
        report.sampled.push(DepthSample {
            depth,
            carried: width,
            sampled: s_k,
            active,
            estimate: width_estimate,
        });
        let rate = 2.0 * active as f64 / s_k as f64;
        report.rates.push(rate);
        if !first_row {
            report.total_estimate += width_estimate;
        }
        first_row = false;
        width_estimate *= rate;
        carried = children;
        depth += 1;
        if active == 0 {
            break;
        }
    }
    report.total_estimate += report.exact_counts.iter().sum::<usize>() as f64;
    Ok(report)
}

fn expand_all(
    bqop: &CardBqop,
    target: f64,
    bounder: &dyn Bounder,
    rule: ScoreRule,
    pool: &rayon::ThreadPool,
    level: &[BbNode],
) -> Vec<BbNode> {
    let fates: Vec<NodeFate> = pool.install(|| {
        level
            .par_iter()
            .map(|n| expand_node(bqop, target, bounder, rule, n))
            .collect()
    });
    let mut next = Vec::new();
    for fate in fates {
        if let NodeFate::Branched { zero, one, .. } = fate {
            next.push(zero);
            next.push(one);
        }
    }
    next
}

/// `count` distinct indices out of `0..width`, drawn uniformly without
/// replacement by partial Fisher-Yates, returned ascending.
fn sample_indices(rng: &mut ChaCha8Rng, width: usize, count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..width).collect();
    for i in 0..count {
        let j = rng.gen_range(i..width);
        idx.swap(i, j);
    }
    let mut picked = idx[..count].to_vec();
    picked.sort_unstable();
    picked
}
