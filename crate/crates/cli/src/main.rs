//! Command-line front end: convert clone-structured QAPs, inspect symmetry,
//! certify target lower bounds, estimate tree sizes, and evaluate solutions.
//!
//! Exit codes: 0 success (certified / OK), 1 target refuted, 2 budget
//! exhausted, 3 and up for usage, input, or runtime errors.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qorbit_core::bb::{certify, orbit_table, BbConfig, BbOutcome};
use qorbit_core::bounding::{bound_node, make_bounder, BounderSpec, VerdictKind};
use qorbit_core::estimator::{estimate, EstimatorConfig};
use qorbit_core::index_set::IndexSet;
use qorbit_core::instance::{
    bqop_objective, parse_bqop, parse_qaplib, parse_solution, qap_objective, serialize_bqop,
    CardBqop, QapInstance, Solution,
};
use qorbit_core::reduction::{
    binary_to_permutation, emit_general_model, find_clones, permutation_to_binary,
    reduce_to_bqop_with,
};
use qorbit_core::subproblem::{default_lambda, reduce, to_qubo, NodeKey};
use qorbit_core::symmetry::{
    discover_automorphisms_with_cap, expand_solution, orbits, setwise_stabilizer, PermutationGroup,
    DEFAULT_GROUP_CAP,
};
use serde::Serialize;
use serde_json::json;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "qorbit",
    version,
    about = "Cardinality-constrained binary quadratic \
optimization from clone-structured QAPs: reduction, symmetry, certification, estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a QAP to a cardinality-constrained BQOP (or emit the general
    /// grid model when the flow matrix is not a selector)
    Convert(ConvertArgs),
    /// Discover the automorphism group of the cost matrix; print orbit
    /// tables and solution expansions
    Symmetry(SymmetryArgs),
    /// Prove that the optimum is at least a target lower bound
    Certify(CertifyArgs),
    /// Estimate the enumeration-tree size for a target by sampling
    Estimate(EstimateArgs),
    /// Evaluate a permutation or 0/1 solution file against an instance
    Evaluate(EvaluateArgs),
    /// Bound a single subproblem node and dump its bracket trace
    Bound(BoundArgs),
}

#[derive(Args)]
struct ConvertArgs {
    /// QAPLIB-format instance file
    instance: PathBuf,
    /// Output directory (defaults to the instance's directory)
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Also export the root-node penalty QUBO to this path
    #[arg(long)]
    emit_qubo: Option<PathBuf>,
    /// Penalty parameter for --emit-qubo (default: 1e8 / ||B||_F)
    #[arg(long)]
    lambda: Option<f64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct SymmetryArgs {
    /// Instance file (QAPLIB .dat or bqop text)
    instance: PathBuf,
    /// Indices fixed to one (1-based, comma separated) for stabilizer orbits
    #[arg(long, value_delimiter = ',')]
    fix: Vec<usize>,
    /// Indices fixed to zero (1-based, comma separated)
    #[arg(long, value_delimiter = ',')]
    fix_zero: Vec<usize>,
    /// Abort if the group grows beyond this many elements
    #[arg(long, default_value_t = DEFAULT_GROUP_CAP)]
    cap: usize,
    /// Write group elements as permutation lines to this path
    #[arg(long)]
    dump_elements: Option<PathBuf>,
    /// Expand a solution file along the group and report the image count
    #[arg(long)]
    expand: Option<PathBuf>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct CertifyArgs {
    /// Instance file (QAPLIB .dat or bqop text)
    instance: PathBuf,
    /// Target lower bound to certify
    #[arg(long, allow_negative_numbers = true)]
    target: f64,
    #[command(flatten)]
    bounder: BounderArgs,
    /// Worker threads (0 = library default)
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 10_000_000)]
    max_nodes: usize,
    #[arg(long, default_value_t = 100_000)]
    max_depth: usize,
    /// Frontier nodes kept in memory per level before spilling to disk
    #[arg(long, default_value_t = 1_000_000)]
    spill: usize,
    /// Cap for automorphism discovery
    #[arg(long, default_value_t = DEFAULT_GROUP_CAP)]
    cap: usize,
    /// Skip symmetry discovery and branch on single variables
    #[arg(long)]
    no_symmetry: bool,
    /// Score orbits by the exact feasible average instead of the
    /// fractional surrogate
    #[arg(long)]
    exact_average: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct EstimateArgs {
    /// Instance file (QAPLIB .dat or bqop text)
    instance: PathBuf,
    /// Target lower bound driving the tree
    #[arg(long, allow_negative_numbers = true)]
    target: f64,
    #[command(flatten)]
    bounder: BounderArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Expand levels in full while narrower than this
    #[arg(long, default_value_t = 1000)]
    full_width: usize,
    /// Nodes sampled per depth
    #[arg(long, default_value_t = 100)]
    sample_size: usize,
    /// Sample only when the carried width reaches this
    #[arg(long, default_value_t = 500)]
    sample_cutoff: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 100_000)]
    max_levels: usize,
    #[arg(long, default_value_t = DEFAULT_GROUP_CAP)]
    cap: usize,
    #[arg(long)]
    no_symmetry: bool,
    /// Score orbits by the exact feasible average instead of the
    /// fractional surrogate
    #[arg(long)]
    exact_average: bool,
    /// Write the per-depth series as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Instance file (QAPLIB .dat or bqop text)
    instance: PathBuf,
    /// Solution file: a permutation of 1..n or a 0/1 vector
    solution: PathBuf,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct BoundArgs {
    /// Instance file (QAPLIB .dat or bqop text)
    instance: PathBuf,
    /// Target lower bound
    #[arg(long, allow_negative_numbers = true)]
    target: f64,
    #[command(flatten)]
    bounder: BounderArgs,
    /// Indices fixed to one (1-based, comma separated)
    #[arg(long, value_delimiter = ',')]
    fix: Vec<usize>,
    /// Indices fixed to zero (1-based, comma separated)
    #[arg(long, value_delimiter = ',')]
    fix_zero: Vec<usize>,
    /// Write the bracket trace as CSV rows `p,a,b`
    #[arg(long)]
    trace_csv: Option<PathBuf>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct BounderArgs {
    /// Bounder name: spectral | exact
    #[arg(long, default_value = "spectral")]
    bounder: String,
    /// Bounder parameter as key=value (repeatable)
    #[arg(long = "bounder-param", value_parser = parse_key_value)]
    params: Vec<(String, String)>,
}

impl BounderArgs {
    fn spec(&self) -> BounderSpec {
        let mut spec = BounderSpec::named(&self.bounder);
        for (k, v) in &self.params {
            spec.parameters.insert(k.clone(), v.clone());
        }
        spec
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Write the machine-readable result here
    #[arg(long)]
    report: Option<PathBuf>,
    /// stdout format: text | json | csv
    #[arg(long, default_value = "text")]
    format: String,
}

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| format!("expected key=value, got {s:?}"))
}

/// What certify/estimate/evaluate operate on, however the instance arrived.
struct LoadedInstance {
    bqop: CardBqop,
    /// Present when the input was a QAP file.
    qap: Option<QapInstance>,
}

fn load_instance(path: &Path) -> Result<LoadedInstance> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let first = text.split_whitespace().next().unwrap_or_default();
    if first == "bqop" {
        let bqop = parse_bqop(&text)?;
        return Ok(LoadedInstance { bqop, qap: None });
    }
    let qap = parse_qaplib(&text)?;
    let clones = find_clones(qap.flows())?;
    let bqop = reduce_to_bqop_with(&qap, &clones).with_context(|| {
        "instance does not reduce to a cardinality BQOP; run `convert` for the general model"
    })?;
    Ok(LoadedInstance {
        bqop,
        qap: Some(qap),
    })
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    instance: Vec<String>,
    config: serde_json::Value,
    tool_version: String,
    wall_time_ms: u128,
    report: Option<String>,
}

/// Emit the deterministic result (report file or stdout per --format) and
/// the manifest describing the run.
fn finish(
    out: &OutputArgs,
    manifest: RunManifest,
    result: &serde_json::Value,
    text_summary: &str,
    csv: Option<&str>,
) -> Result<()> {
    if let Some(path) = &out.report {
        std::fs::write(path, serde_json::to_string_pretty(result)?)
            .with_context(|| format!("writing {}", path.display()))?;
        let mpath = path.with_extension("manifest.json");
        std::fs::write(&mpath, serde_json::to_string_pretty(&manifest)?)
            .with_context(|| format!("writing {}", mpath.display()))?;
    }
    match out.format.as_str() {
        "json" => println!("{}", serde_json::to_string_pretty(result)?),
        "csv" => match csv {
            Some(body) => print!("{body}"),
            None => bail!("this subcommand has no CSV form"),
        },
        "text" => {
            print!("{text_summary}");
            if out.report.is_none() {
                println!("manifest: {}", serde_json::to_string(&manifest)?);
            }
        }
        other => bail!("unknown format {other:?}"),
    }
    Ok(())
}

fn manifest_for(
    command: &str,
    instances: &[&Path],
    config: serde_json::Value,
    started: Instant,
    out: &OutputArgs,
) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        instance: instances.iter().map(|p| p.display().to_string()).collect(),
        config,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_ms: started.elapsed().as_millis(),
        report: out.report.as_ref().map(|p| p.display().to_string()),
    }
}

fn index_set(n: usize, one_based: &[usize]) -> Result<IndexSet> {
    for &i in one_based {
        if i == 0 || i > n {
            bail!("index {i} outside 1..{n}");
        }
    }
    Ok(IndexSet::from_one_based(n, one_based.iter().copied()))
}

fn score_rule(exact_average: bool) -> qorbit_core::ScoreRule {
    if exact_average {
        qorbit_core::ScoreRule::ExactAverage
    } else {
        qorbit_core::ScoreRule::IndependenceSurrogate
    }
}

fn discover_group(bqop: &CardBqop, cap: usize, skip: bool) -> Result<PermutationGroup> {
    if skip {
        return Ok(PermutationGroup::trivial(bqop.n()));
    }
    Ok(discover_automorphisms_with_cap(bqop.matrix(), cap)?)
}

fn run_convert(args: &ConvertArgs, started: Instant) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&args.instance)
        .with_context(|| format!("reading {}", args.instance.display()))?;
    let qap = parse_qaplib(&text)?;
    let clones = find_clones(qap.flows())?;
    let out_dir = args.out_dir.clone().unwrap_or_else(|| {
        args.instance
            .parent()
            .unwrap_or(Path::new("."))
            .to_path_buf()
    });
    std::fs::create_dir_all(&out_dir)?;
    let stem = args
        .instance
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("instance");

    let mut summary = String::new();
    let _ = writeln!(summary, "instance: n = {}", qap.n());
    let _ = writeln!(summary, "clone classes: {}", clones.num_classes());
    for (u, class) in clones.classes().iter().enumerate() {
        let members = if class.len() <= 12 {
            format!("{:?}", class.iter().map(|i| i + 1).collect::<Vec<_>>())
        } else {
            format!(
                "[{}..{}] ({} members)",
                class[0] + 1,
                class[class.len() - 1] + 1,
                class.len()
            )
        };
        let _ = writeln!(summary, "  class {}: {}", u + 1, members);
    }
    let _ = writeln!(summary, "reduced flows: {:?}", clones.reduced_a());

    let clones_json = json!({
        "classes": clones.classes().iter()
            .map(|c| c.iter().map(|i| i + 1).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "sizes": (0..clones.num_classes()).map(|u| clones.size(u)).collect::<Vec<_>>(),
        "reducedA": clones.reduced_a(),
    });

    let result = match reduce_to_bqop_with(&qap, &clones) {
        Ok(bqop) => {
            let path = out_dir.join(format!("{stem}.bqop.txt"));
            std::fs::write(&path, serialize_bqop(&bqop))?;
            let _ = writeln!(
                summary,
                "selector structure: m = {}, scale = {}\nwrote {}",
                bqop.cardinality(),
                bqop.scale(),
                path.display()
            );
            if let Some(qpath) = &args.emit_qubo {
                let r = reduce(&bqop, &NodeKey::root(bqop.n()))?;
                let lambda = match args.lambda {
                    Some(l) => l,
                    None => default_lambda(&r)?,
                };
                let qubo = to_qubo(&r, lambda);
                std::fs::write(qpath, qubo.export_triplets())?;
                let _ = writeln!(
                    summary,
                    "wrote QUBO (lambda = {lambda}) to {}",
                    qpath.display()
                );
            }
            json!({
                "kind": "convert",
                "selector": true,
                "clones": clones_json,
                "bqop": { "n": bqop.n(), "m": bqop.cardinality(), "scale": bqop.scale(),
                          "path": out_dir.join(format!("{stem}.bqop.txt")).display().to_string() },
            })
        }
        Err(qorbit_core::Error::NotSelectorStructure { reason }) => {
            let model = emit_general_model(&qap)?;
            let path = out_dir.join(format!("{stem}.genmodel.txt"));
            std::fs::write(&path, model.serialize())?;
            let _ = writeln!(summary, "not selector structure: {reason}");
            let _ = writeln!(
                summary,
                "wrote general model ({} variables, {} size rows, {} assignment rows) to {}",
                model.num_variables(),
                model.num_size_rows(),
                model.num_assignment_rows(),
                path.display()
            );
            json!({
                "kind": "convert",
                "selector": false,
                "clones": clones_json,
                "genmodel": { "path": path.display().to_string(),
                              "variables": model.num_variables() },
            })
        }
        Err(e) => return Err(e.into()),
    };

    let manifest = manifest_for(
        "convert",
        &[&args.instance],
        json!({ "out_dir": out_dir.display().to_string(), "lambda": args.lambda }),
        started,
        &args.out,
    );
    finish(&args.out, manifest, &result, &summary, None)?;
    Ok(ExitCode::SUCCESS)
}

fn run_symmetry(args: &SymmetryArgs, started: Instant) -> Result<ExitCode> {
    // symmetry inspection works even when the instance has no selector
    // structure; orbit scores then have no cardinality and are omitted
    let text = std::fs::read_to_string(&args.instance)
        .with_context(|| format!("reading {}", args.instance.display()))?;
    let first = text.split_whitespace().next().unwrap_or_default();
    let (matrix, bqop, qap) = if first == "bqop" {
        let bqop = parse_bqop(&text)?;
        (bqop.matrix().clone(), Some(bqop), None)
    } else {
        let qap = parse_qaplib(&text)?;
        let clones = find_clones(qap.flows())?;
        let bqop = reduce_to_bqop_with(&qap, &clones).ok();
        (qap.distances().clone(), bqop, Some(qap))
    };
    let n = matrix.n();
    let group = discover_automorphisms_with_cap(&matrix, args.cap)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "|G| = {}", group.order());

    if let Some(path) = &args.dump_elements {
        let mut body = String::new();
        for p in group.elements() {
            let _ = writeln!(body, "{}", p.to_line());
        }
        std::fs::write(path, body)?;
        let _ = writeln!(
            summary,
            "wrote {} elements to {}",
            group.order(),
            path.display()
        );
    }

    let i1 = index_set(n, &args.fix)?;
    let i0 = index_set(n, &args.fix_zero)?;
    let key = NodeKey::new(i0.clone(), i1.clone());
    let mut orbits_json = serde_json::Value::Null;
    if !args.fix.is_empty() || !args.fix_zero.is_empty() {
        let stab = setwise_stabilizer(&group, &i0, &i1);
        let _ = writeln!(
            summary,
            "stabilizer of (I0 = {i0}, I1 = {i1}): order {}",
            stab.order()
        );
        if let Some(bqop) = &bqop {
            let rows = orbit_table(bqop, &key, &stab)?;
            let _ = writeln!(summary, "{} orbits of the free set:", rows.len());
            let _ = writeln!(
                summary,
                "{:>5}  {:>4}  {:>18}  orbit",
                "rank", "size", "score"
            );
            for (k, row) in rows.iter().enumerate() {
                let members: Vec<String> = row.orbit.iter().map(|i| (i + 1).to_string()).collect();
                let _ = writeln!(
                    summary,
                    "{:>5}  {:>4}  {:>18.1}  {}",
                    k + 1,
                    row.orbit.len(),
                    row.score,
                    members.join(" ")
                );
            }
            orbits_json = json!(rows
                .iter()
                .map(|r| json!({
                    "orbit": r.orbit.iter().map(|i| i + 1).collect::<Vec<_>>(),
                    "size": r.orbit.len(),
                    "score": r.score,
                }))
                .collect::<Vec<_>>());
        } else {
            let free = key.free();
            let os = orbits(&stab, &free);
            let _ = writeln!(
                summary,
                "{} orbits of the free set (no cardinality, scores omitted):",
                os.len()
            );
            for (k, o) in os.orbits().iter().enumerate() {
                let members: Vec<String> = o.iter().map(|i| (i + 1).to_string()).collect();
                let _ = writeln!(
                    summary,
                    "{:>5}  {:>4}  {}",
                    k + 1,
                    o.len(),
                    members.join(" ")
                );
            }
            orbits_json = json!(os
                .orbits()
                .iter()
                .map(|o| json!({
                    "orbit": o.iter().map(|i| i + 1).collect::<Vec<_>>(),
                    "size": o.len(),
                    "score": 0.0,
                }))
                .collect::<Vec<_>>());
        }
    } else {
        let root = orbits(&group, &IndexSet::full(n));
        let _ = writeln!(summary, "orbits of the full index set: {}", root.len());
    }

    let mut expansion_json = serde_json::Value::Null;
    if let Some(solpath) = &args.expand {
        let soltext = std::fs::read_to_string(solpath)?;
        let x = match parse_solution(&soltext, n)? {
            Solution::Binary(x) => x,
            Solution::Permutation(p) => {
                let qap = qap.as_ref().ok_or_else(|| {
                    anyhow!("permutation solutions need the original QAP instance file")
                })?;
                let clones = find_clones(qap.flows())?;
                let (u, _) = clones
                    .selector_class()
                    .ok_or_else(|| anyhow!("permutation expansion needs selector structure"))?;
                permutation_to_binary(&p, &clones, u)?
            }
        };
        let images = expand_solution(&group, &x)?;
        let _ = writeln!(
            summary,
            "expansion: {} distinct images of the solution",
            images.len()
        );
        if n == 256 && (images.len() == 1024 || images.len() == 1028) {
            let _ = writeln!(
                summary,
                "note: conflicting counts (1024 and 1028) circulate for this expansion; \
the computed value above is what this tool certifies"
            );
        }
        let bqop_for_values = bqop.as_ref().ok_or_else(|| {
            anyhow!("expansion needs a cardinality problem to evaluate image objectives")
        })?;
        let values: std::collections::BTreeSet<i64> = images
            .iter()
            .map(|y| bqop_objective(bqop_for_values, y))
            .collect::<qorbit_core::Result<_>>()?;
        if values.len() == 1 {
            let _ = writeln!(
                summary,
                "all images share objective {}",
                values.iter().next().unwrap()
            );
        } else {
            bail!("group images disagree on the objective; the group is not an automorphism group");
        }
        expansion_json = json!({
            "images": images.len(),
            "objective": values.iter().next().unwrap(),
        });
    }

    let result = json!({
        "kind": "symmetry",
        "group_order": group.order(),
        "fixed_one": args.fix,
        "fixed_zero": args.fix_zero,
        "orbits": orbits_json,
        "expansion": expansion_json,
    });
    let manifest = manifest_for(
        "symmetry",
        &[&args.instance],
        json!({ "fix": args.fix, "fix_zero": args.fix_zero, "cap": args.cap }),
        started,
        &args.out,
    );
    finish(&args.out, manifest, &result, &summary, None)?;
    Ok(ExitCode::SUCCESS)
}

fn run_certify(args: &CertifyArgs, started: Instant) -> Result<ExitCode> {
    let loaded = load_instance(&args.instance)?;
    let bqop = &loaded.bqop;
    let group = discover_group(bqop, args.cap, args.no_symmetry)?;
    let config = BbConfig {
        target: args.target,
        bounder: args.bounder.spec(),
        max_nodes: args.max_nodes,
        max_depth: args.max_depth,
        parallelism: args.workers,
        spill_threshold: args.spill,
        score_rule: score_rule(args.exact_average),
    };
    let report = certify(bqop, &config, &group)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "target: {}", args.target);
    let _ = writeln!(summary, "group order: {}", group.order());
    let outcome_line = match &report.outcome {
        BbOutcome::Certified => "CERTIFIED: optimum >= target".to_string(),
        BbOutcome::Refuted { value, .. } => {
            format!("REFUTED: witness with objective {value} < target")
        }
        BbOutcome::BudgetExhausted => "BUDGET EXHAUSTED: no conclusion".to_string(),
    };
    let _ = writeln!(summary, "{outcome_line}");
    let _ = writeln!(
        summary,
        "nodes: {} processed ({} pruned, {} branched, {} leaves, {} infeasible)",
        report.processed_nodes, report.pruned, report.branched, report.leaves, report.infeasible
    );
    let _ = writeln!(summary, "nodes per depth: {:?}", report.nodes_per_depth);
    let _ = writeln!(
        summary,
        "bracket steps: {} over {} bounded nodes",
        report.bracket_steps, report.bounded_nodes
    );
    if let BbOutcome::Refuted { witness, .. } = &report.outcome {
        let _ = writeln!(summary, "witness: {}", witness.to_line());
    }

    let depth_csv = {
        let mut s = String::from("depth,nodes\n");
        for (k, t) in report.nodes_per_depth.iter().enumerate() {
            let _ = writeln!(s, "{k},{t}");
        }
        s
    };
    let result = json!({ "kind": "certify", "report": report });
    let manifest = manifest_for(
        "certify",
        &[&args.instance],
        serde_json::to_value(&config)?,
        started,
        &args.out,
    );
    finish(&args.out, manifest, &result, &summary, Some(&depth_csv))?;
    Ok(match report.outcome {
        BbOutcome::Certified => ExitCode::SUCCESS,
        BbOutcome::Refuted { .. } => ExitCode::from(1),
        BbOutcome::BudgetExhausted => ExitCode::from(2),
    })
}

fn run_estimate(args: &EstimateArgs, started: Instant) -> Result<ExitCode> {
    let loaded = load_instance(&args.instance)?;
    let bqop = &loaded.bqop;
    let group = discover_group(bqop, args.cap, args.no_symmetry)?;
    let config = EstimatorConfig {
        full_width_threshold: args.full_width,
        sample_size: args.sample_size,
        sample_cutoff: args.sample_cutoff,
        seed: args.seed,
        bounder: args.bounder.spec(),
        target: args.target,
        parallelism: args.workers,
        max_levels: args.max_levels,
        score_rule: score_rule(args.exact_average),
    };
    let report = match estimate(bqop, &group, &config) {
        Ok(r) => r,
        Err(qorbit_core::Error::LevelBudget { levels }) => {
            eprintln!("level budget exhausted after {levels} levels");
            return Ok(ExitCode::from(2));
        }
        Err(e) => return Err(e.into()),
    };

    let mut summary = String::new();
    let _ = writeln!(summary, "target: {}", args.target);
    match report.switch_depth {
        Some(l) => {
            let _ = writeln!(summary, "full expansion to depth {l}; sampling below");
        }
        None => {
            let _ = writeln!(summary, "tree stayed narrow: count is exact, no sampling");
        }
    }
    let _ = writeln!(summary, "exact level widths: {:?}", report.exact_counts);
    let _ = writeln!(
        summary,
        "{:>5} {:>10} {:>8} {:>8} {:>16} {:>10}",
        "depth", "carried", "sampled", "active", "width-estimate", "rate"
    );
    for (row, rate) in report.sampled.iter().zip(&report.rates) {
        let _ = writeln!(
            summary,
            "{:>5} {:>10} {:>8} {:>8} {:>16.2} {:>10.4}",
            row.depth, row.carried, row.sampled, row.active, row.estimate, rate
        );
    }
    let _ = writeln!(summary, "total node estimate: {}", report.total_estimate);

    let csv = {
        let mut s = String::from("depth,carried,sampled,active,width_estimate,rate\n");
        for (row, rate) in report.sampled.iter().zip(&report.rates) {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                row.depth, row.carried, row.sampled, row.active, row.estimate, rate
            );
        }
        s
    };
    if let Some(path) = &args.csv {
        std::fs::write(path, &csv)?;
    }
    let result = json!({ "kind": "estimate", "report": report });
    let manifest = manifest_for(
        "estimate",
        &[&args.instance],
        serde_json::to_value(&config)?,
        started,
        &args.out,
    );
    finish(&args.out, manifest, &result, &summary, Some(&csv))?;
    Ok(ExitCode::SUCCESS)
}

fn run_evaluate(args: &EvaluateArgs, started: Instant) -> Result<ExitCode> {
    let loaded = load_instance(&args.instance)?;
    let soltext = std::fs::read_to_string(&args.solution)?;
    let n = loaded.bqop.n();
    let solution = parse_solution(&soltext, n)?;

    let mut summary = String::new();
    let (objective, kind) = match &solution {
        Solution::Permutation(p) => {
            let qap = loaded
                .qap
                .as_ref()
                .ok_or_else(|| anyhow!("permutation solutions need the original QAP file"))?;
            let v = qap_objective(qap, p)?;
            // cross-check through the reduction
            let clones = find_clones(qap.flows())?;
            if let Some((u, _)) = clones.selector_class() {
                let x = permutation_to_binary(p, &clones, u)?;
                let via_bqop = bqop_objective(&loaded.bqop, &x)?;
                let _ = writeln!(summary, "objective via reduction: {via_bqop}");
                if via_bqop != v {
                    bail!("reduction produced a different objective ({via_bqop} vs {v})");
                }
            }
            (v, "permutation")
        }
        Solution::Binary(x) => {
            let v = bqop_objective(&loaded.bqop, x)?;
            if let Some(qap) = &loaded.qap {
                let clones = find_clones(qap.flows())?;
                let p = binary_to_permutation(x, &clones)?;
                let via_qap = qap_objective(qap, &p)?;
                let _ = writeln!(summary, "objective via lifted permutation: {via_qap}");
                if via_qap != v {
                    bail!("lifting produced a different objective ({via_qap} vs {v})");
                }
            }
            (v, "binary")
        }
    };
    let _ = writeln!(summary, "objective: {objective}");

    let result = json!({ "kind": "evaluate", "solution_type": kind, "objective": objective });
    let manifest = manifest_for(
        "evaluate",
        &[&args.instance, &args.solution],
        serde_json::Value::Null,
        started,
        &args.out,
    );
    finish(&args.out, manifest, &result, &summary, None)?;
    Ok(ExitCode::SUCCESS)
}

fn run_bound(args: &BoundArgs, started: Instant) -> Result<ExitCode> {
    let loaded = load_instance(&args.instance)?;
    let bqop = &loaded.bqop;
    let n = bqop.n();
    let key = NodeKey::new(index_set(n, &args.fix_zero)?, index_set(n, &args.fix)?);
    let r = reduce(bqop, &key)?;
    let bounder = make_bounder(&args.bounder.spec())?;
    let verdict = bound_node(&r, args.target, bounder.as_ref());

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "node: |I0| = {}, |I1| = {}, |F| = {}, residual cardinality {}",
        key.i0().len(),
        key.i1().len(),
        r.dim(),
        r.residual_cardinality()
    );
    let kind = match verdict.kind {
        VerdictKind::Pruned => "PRUNED",
        VerdictKind::Active => "ACTIVE",
    };
    let _ = writeln!(
        summary,
        "{kind} against target {} (certificate {}, {} steps)",
        args.target,
        verdict.certificate,
        verdict.trace.len()
    );

    let csv = {
        let mut s = String::from("p,a,b\n");
        for step in &verdict.trace {
            let _ = writeln!(s, "{},{},{}", step.p, step.a, step.b);
        }
        s
    };
    if let Some(path) = &args.trace_csv {
        std::fs::write(path, &csv)?;
    }
    let result = json!({ "kind": "bound", "verdict": verdict });
    let manifest = manifest_for(
        "bound",
        &[&args.instance],
        json!({ "target": args.target, "fix": args.fix, "fix_zero": args.fix_zero }),
        started,
        &args.out,
    );
    finish(&args.out, manifest, &result, &summary, Some(&csv))?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors must not collide with the budget exit code
            return ExitCode::from(3);
        }
    };
    let started = Instant::now();
    let outcome = match &cli.command {
        Command::Convert(a) => run_convert(a, started),
        Command::Symmetry(a) => run_symmetry(a, started),
        Command::Certify(a) => run_certify(a, started),
        Command::Estimate(a) => run_estimate(a, started),
        Command::Evaluate(a) => run_evaluate(a, started),
        Command::Bound(a) => run_bound(a, started),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(4)
        }
    }
}
