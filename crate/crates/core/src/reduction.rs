//! Clone detection on the flow matrix and the reduction of a clone-structured
//! QAP to a cardinality-constrained BQOP.
//!
//! Two facilities `i`, `k` are clones when their flow rows agree everywhere
//! outside `{i, k}`. The clone relation is an equivalence relation for
//! symmetric flows; its classes collapse the QAP to a grid model over
//! locations x classes. When the collapsed flow matrix has exactly one
//! nonzero entry, positive and on the diagonal (the selector case), the grid
//! model degenerates further to `min scale * x^T B x` subject to a single
//! cardinality constraint.

use crate::error::Error;
use crate::instance::{BinaryVector, BqopSource, CardBqop, Permutation, QapInstance};
use crate::matrix::SymMatrix;
use crate::Result;
use std::fmt::Write as _;

/// The clone-class partition of the facility set, the class sizes, and the
/// collapsed flow matrix over classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CloneClasses {
    n: usize,
    /// Disjoint, each sorted ascending, listed by smallest member.
    classes: Vec<Vec<usize>>,
    /// `class_of[i]` = index into `classes`.
    class_of: Vec<usize>,
    /// Collapsed flows; `reduced_a[u][v]` equals `a[i][k]` for any
    /// representatives `i` of `u`, `k` of `v` with `i != k`. Diagonal entries
    /// of singleton classes are 0 (no within-class pair exists).
    reduced_a: Vec<Vec<i64>>,
}

impl CloneClasses {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn class_of(&self, facility: usize) -> usize {
        self.class_of[facility]
    }

    pub fn size(&self, u: usize) -> usize {
        self.classes[u].len()
    }

    pub fn reduced_a(&self) -> &[Vec<i64>] {
        &self.reduced_a
    }

    /// The selector class, if the collapsed flows have exactly one nonzero
    /// entry, positive and on the diagonal. Returns `(class index, weight)`.
    pub fn selector_class(&self) -> Option<(usize, i64)> {
        let mut found = None;
        for u in 0..self.num_classes() {
            for v in 0..self.num_classes() {
                let c = self.reduced_a[u][v];
                if c != 0 {
                    if u != v || c < 0 || found.is_some() {
                        return None;
                    }
                    found = Some((u, c));
                }
            }
        }
        found
    }
}

/// Partition the facilities of a symmetric zero-diagonal flow matrix into
/// clone classes and collapse the flows over them.
///
/// Well-definedness of the collapsed entries is verified over every
/// representative pair rather than assumed; a violation means the input was
/// corrupted upstream and surfaces as [`Error::IllDefinedReduction`].
pub fn find_clones(a: &SymMatrix) -> Result<CloneClasses> {
    let n = a.n();
    let mut class_of = vec![usize::MAX; n];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (i, slot) in class_of.iter_mut().enumerate() {
        let found = classes
            .iter_mut()
            .enumerate()
            .find(|(_, c)| are_clones(a, c[0], i));
        match found {
            Some((u, class)) => {
                class.push(i);
                *slot = u;
            }
            None => {
                *slot = classes.len();
                classes.push(vec![i]);
            }
        }
    }
    // Collapse flows, checking agreement across all representative pairs.
    let m = classes.len();
    let mut reduced_a = vec![vec![0i64; m]; m];
    for u in 0..m {
        for v in u..m {
            let mut value: Option<(i64, (usize, usize))> = None;
            for &i in &classes[u] {
                for &k in &classes[v] {
                    if i == k {
                        continue;
                    }
                    let entry = a.get(i, k);
                    match value {
                        None => value = Some((entry, (i, k))),
                        Some((first, (i0, k0))) if first != entry => {
                            return Err(Error::IllDefinedReduction {
                                i: i0 + 1,
                                k: k0 + 1,
                                a: first,
                                i2: i + 1,
                                k2: k + 1,
                                b: entry,
                            });
                        }
                        Some(_) => {}
                    }
                }
            }
            // singleton diagonal: no within-class pair, defined as 0
            let val = value.map_or(0, |(v, _)| v);
            reduced_a[u][v] = val;
            reduced_a[v][u] = val;
        }
    }
    Ok(CloneClasses {
        n,
        classes,
        class_of,
        reduced_a,
    })
}

fn are_clones(a: &SymMatrix, i: usize, k: usize) -> bool {
    if i == k {
        return true;
    }
    let (ri, rk) = (a.row(i), a.row(k));
    (0..a.n()).all(|h| h == i || h == k || ri[h] == rk[h])
}

/// Reduce a selector-structured QAP to a cardinality-constrained BQOP over
/// its distance matrix. The selected class has `m` members and contributes
/// flow weight `scale` on every ordered within-class pair.
pub fn reduce_to_bqop(inst: &QapInstance) -> Result<CardBqop> {
    let clones = find_clones(inst.flows())?;
    reduce_to_bqop_with(inst, &clones)
}

/// Same as [`reduce_to_bqop`] with the clone partition precomputed.
pub fn reduce_to_bqop_with(inst: &QapInstance, clones: &CloneClasses) -> Result<CardBqop> {
    let (u, c) = clones.selector_class().ok_or_else(|| Error::NotSelectorStructure {
        reason: format!(
            "collapsed flow matrix over {} classes must have exactly one nonzero entry, positive and on the diagonal",
            clones.num_classes()
        ),
    })?;
    CardBqop::new(
        inst.distances().clone(),
        clones.size(u),
        c,
        BqopSource::ReducedFromQap,
    )
}

/// The grid model over locations x classes that any clone-structured QAP
/// collapses to: objective coefficients `reduced_a[u][v] * b[i][j]` on the
/// variable pairs `x[i,u] * x[j,v]`, one class-size row per class, and one
/// assignment row per location. Emitted for external solvers; never solved
/// here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneralReducedModel {
    n: usize,
    b: SymMatrix,
    clones: CloneClasses,
}

/// One combined objective entry: `coef * x[loc_i, class_u] * x[loc_j, class_v]`,
/// listed once per unordered variable pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjectiveTriple {
    pub loc_i: usize,
    pub class_u: usize,
    pub loc_j: usize,
    pub class_v: usize,
    pub coef: i64,
}

pub fn emit_general_model(inst: &QapInstance) -> Result<GeneralReducedModel> {
    let clones = find_clones(inst.flows())?;
    Ok(GeneralReducedModel {
        n: inst.n(),
        b: inst.distances().clone(),
        clones,
    })
}

impl GeneralReducedModel {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_classes(&self) -> usize {
        self.clones.num_classes()
    }

    pub fn clone_classes(&self) -> &CloneClasses {
        &self.clones
    }

    pub fn num_variables(&self) -> usize {
        self.n * self.clones.num_classes()
    }

    pub fn num_size_rows(&self) -> usize {
        self.clones.num_classes()
    }

    pub fn num_assignment_rows(&self) -> usize {
        self.n
    }

    /// Nonzero objective entries, one per unordered variable pair with both
    /// orderings folded in.
    pub fn objective_triples(&self) -> Vec<ObjectiveTriple> {
        let m = self.clones.num_classes();
        let mut out = Vec::new();
        let var = |i: usize, u: usize| i * m + u;
        for i in 0..self.n {
            for u in 0..m {
                for j in 0..self.n {
                    for v in 0..m {
                        if var(i, u) >= var(j, v) {
                            continue;
                        }
                        let coef = 2 * self.clones.reduced_a[u][v] * self.b.get(i, j);
                        if coef != 0 {
                            out.push(ObjectiveTriple {
                                loc_i: i,
                                class_u: u,
                                loc_j: j,
                                class_v: v,
                                coef,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Model objective of a complete assignment `class_at[location] = class`.
    /// Multiplicities must match the class sizes.
    pub fn objective_of_assignment(&self, class_at: &[usize]) -> Result<i64> {
        if class_at.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: class_at.len(),
            });
        }
        let m = self.clones.num_classes();
        let mut counts = vec![0usize; m];
        for &u in class_at {
            counts[u] += 1;
        }
        for (u, &found) in counts.iter().enumerate() {
            if found != self.clones.size(u) {
                return Err(Error::CardinalityViolation {
                    expected: self.clones.size(u),
                    found,
                });
            }
        }
        let mut acc = 0i64;
        for i in 0..self.n {
            for j in 0..self.n {
                acc += self.clones.reduced_a[class_at[i]][class_at[j]] * self.b.get(i, j);
            }
        }
        Ok(acc)
    }

    /// Sparse text serialization: header, class rows, objective triples, and
    /// explicit constraint rows. Indices are 1-based on disk. Round-trips
    /// through [`parse_general_model`].
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "genmodel 1");
        let _ = writeln!(s, "vars {} {}", self.n, self.clones.num_classes());
        for (u, class) in self.clones.classes.iter().enumerate() {
            let members: Vec<String> = class.iter().map(|&i| (i + 1).to_string()).collect();
            let _ = writeln!(
                s,
                "class {} size {} : {}",
                u + 1,
                class.len(),
                members.join(" ")
            );
        }
        let triples = self.objective_triples();
        let _ = writeln!(s, "obj {}", triples.len());
        for t in &triples {
            let _ = writeln!(
                s,
                "{} {} {} {} {}",
                t.loc_i + 1,
                t.class_u + 1,
                t.loc_j + 1,
                t.class_v + 1,
                t.coef
            );
        }
        let _ = writeln!(s, "constraints {}", self.clones.num_classes() + self.n);
        for u in 0..self.clones.num_classes() {
            let _ = writeln!(s, "sizerow {} {}", u + 1, self.clones.size(u));
        }
        for i in 0..self.n {
            let _ = writeln!(s, "assignrow {}", i + 1);
        }
        // the distance matrix is carried so the file stands alone
        let _ = writeln!(s, "b");
        for i in 0..self.n {
            let row: Vec<String> = self.b.row(i).iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        let _ = writeln!(s, "end");
        s
    }
}

/// Parse the sparse text format written by [`GeneralReducedModel::serialize`].
pub fn parse_general_model(text: &str) -> Result<GeneralReducedModel> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let bad = |what: &str| Error::UnrecognizedSolution(format!("general model: {what}"));
    let header = lines.next().ok_or_else(|| bad("missing header"))?;
    if header != "genmodel 1" {
        return Err(bad("bad magic"));
    }
    let vars = lines.next().ok_or_else(|| bad("missing vars line"))?;
    let mut it = vars.split_whitespace();
    if it.next() != Some("vars") {
        return Err(bad("expected vars line"));
    }
    let n: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad n"))?;
    let m: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad class count"))?;
    let mut classes: Vec<Vec<usize>> = Vec::with_capacity(m);
    let mut class_of = vec![usize::MAX; n];
    for u in 0..m {
        let line = lines.next().ok_or_else(|| bad("missing class line"))?;
        let (head, members) = line
            .split_once(':')
            .ok_or_else(|| bad("class line without ':'"))?;
        let head: Vec<&str> = head.split_whitespace().collect();
        if head.len() != 4 || head[0] != "class" || head[2] != "size" {
            return Err(bad("malformed class line"));
        }
        let size: usize = head[3].parse().map_err(|_| bad("bad class size"))?;
        let mut ms = Vec::with_capacity(size);
        for tok in members.split_whitespace() {
            let i: usize = tok.parse().map_err(|_| bad("bad class member"))?;
            ms.push(i - 1);
            class_of[i - 1] = u;
        }
        if ms.len() != size {
            return Err(bad("class size disagrees with member list"));
        }
        classes.push(ms);
    }
    let obj = lines.next().ok_or_else(|| bad("missing obj line"))?;
    let count: usize = obj
        .strip_prefix("obj ")
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad obj header"))?;
    let mut reduced_a = vec![vec![0i64; m]; m];
    let mut seen_pairs: Vec<ObjectiveTriple> = Vec::with_capacity(count);
    for _ in 0..count {
        let line = lines.next().ok_or_else(|| bad("missing obj triple"))?;
        let f: Vec<i64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("bad obj entry")))
            .collect::<Result<_>>()?;
        if f.len() != 5 {
            return Err(bad("obj triple arity"));
        }
        seen_pairs.push(ObjectiveTriple {
            loc_i: f[0] as usize - 1,
            class_u: f[1] as usize - 1,
            loc_j: f[2] as usize - 1,
            class_v: f[3] as usize - 1,
            coef: f[4],
        });
    }
    let cons = lines
        .next()
        .ok_or_else(|| bad("missing constraints line"))?;
    let ccount: usize = cons
        .strip_prefix("constraints ")
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad constraints header"))?;
    for _ in 0..ccount {
        lines.next().ok_or_else(|| bad("missing constraint row"))?;
    }
    if lines.next() != Some("b") {
        return Err(bad("missing b section"));
    }
    let mut entries = Vec::with_capacity(n * n);
    for _ in 0..n {
        let line = lines.next().ok_or_else(|| bad("missing b row"))?;
        for tok in line.split_whitespace() {
            entries.push(tok.parse::<i64>().map_err(|_| bad("bad b entry"))?);
        }
    }
    if lines.next() != Some("end") {
        return Err(bad("missing end"));
    }
    let b = SymMatrix::new(n, entries, true)?;
    // reconstruct collapsed flows from the triples: coef = 2 * a~[u][v] * b[i][j]
    for t in &seen_pairs {
        let bij = b.get(t.loc_i, t.loc_j);
        if bij != 0 {
            let a = t.coef / (2 * bij);
            reduced_a[t.class_u][t.class_v] = a;
            reduced_a[t.class_v][t.class_u] = a;
        }
    }
    Ok(GeneralReducedModel {
        n,
        b,
        clones: CloneClasses {
            n,
            classes,
            class_of,
            reduced_a,
        },
    })
}

/// Project a QAP solution onto the selected class: `x[j] = 1` iff location
/// `j` hosts a class-`u` facility.
pub fn permutation_to_binary(
    perm: &Permutation,
    classes: &CloneClasses,
    u: usize,
) -> Result<BinaryVector> {
    if perm.n() != classes.n() {
        return Err(Error::DimensionMismatch {
            expected: classes.n(),
            found: perm.n(),
        });
    }
    Ok(BinaryVector::from_support(
        classes.n(),
        classes.classes()[u].iter().map(|&i| perm.apply(i)),
    ))
}

/// Lift a BQOP solution back to a QAP permutation: ascending selected-class
/// facilities go to ascending support locations, all remaining facilities to
/// the remaining locations in ascending order. Requires selector structure;
/// the QAP objective of the result equals the BQOP objective of `x`.
pub fn binary_to_permutation(x: &BinaryVector, classes: &CloneClasses) -> Result<Permutation> {
    if x.n() != classes.n() {
        return Err(Error::DimensionMismatch {
            expected: classes.n(),
            found: x.n(),
        });
    }
    let (u, _) = classes
        .selector_class()
        .ok_or_else(|| Error::NotSelectorStructure {
            reason: "lifting a binary solution needs a selector class".into(),
        })?;
    let mu = classes.size(u);
    if x.cardinality() != mu {
        return Err(Error::CardinalityViolation {
            expected: mu,
            found: x.cardinality(),
        });
    }
    let n = classes.n();
    let mut image = vec![u32::MAX; n];
    let support = x.support();
    for (&facility, &location) in classes.classes()[u].iter().zip(&support) {
        image[facility] = location as u32;
    }
    let mut rest_locs = (0..n).filter(|j| !x.get(*j));
    for slot in image.iter_mut() {
        if *slot == u32::MAX {
            *slot = rest_locs.next().expect("location counts match") as u32;
        }
    }
    Permutation::new(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{bqop_objective, generate_tai256c_a, qap_objective};
    use crate::synth;
    use itertools::Itertools;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn selector_pair_instance() -> QapInstance {
        // clone pair {1,2} with weight 3, facilities 3,4 isolated
        let a = SymMatrix::new(
            4,
            vec![0, 3, 0, 0, 3, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
            true,
        )
        .unwrap();
        let b = SymMatrix::from_fn(4, |i, j| if i == j { 0 } else { (i + j + 1) as i64 });
        QapInstance::new(a, b).unwrap()
    }

    #[test]
    fn tai256c_clone_classes() {
        let a = generate_tai256c_a();
        let clones = find_clones(&a).unwrap();
        assert_eq!(clones.num_classes(), 2);
        assert_eq!(clones.classes()[0], (0..92).collect::<Vec<_>>());
        assert_eq!(clones.classes()[1], (92..256).collect::<Vec<_>>());
        assert_eq!(clones.reduced_a(), &[vec![1, 0], vec![0, 0]]);
        assert_eq!(clones.selector_class(), Some((0, 1)));
    }

    #[test]
    fn distinct_rows_give_singletons() {
        let a = SymMatrix::from_fn(5, |i, j| if i == j { 0 } else { (i * 5 + j + 1) as i64 });
        let clones = find_clones(&a).unwrap();
        assert_eq!(clones.num_classes(), 5);
        for u in 0..5 {
            for v in 0..5 {
                assert_eq!(clones.reduced_a()[u][v], a.get(u, v));
            }
        }
        assert_eq!(clones.selector_class(), None);
    }

    #[test]
    fn selector_pair_reduces() {
        let inst = selector_pair_instance();
        let bqop = reduce_to_bqop(&inst).unwrap();
        assert_eq!(bqop.cardinality(), 2);
        assert_eq!(bqop.scale(), 3);
        assert_eq!(bqop.n(), 4);
    }

    #[test]
    fn two_nonzero_classes_rejected() {
        // two separate clone pairs with different weights
        let a = SymMatrix::new(
            4,
            vec![0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 2, 0, 0, 2, 0],
            true,
        )
        .unwrap();
        let b = SymMatrix::zeros(4);
        let inst = QapInstance::new(a, b).unwrap();
        assert!(matches!(
            reduce_to_bqop(&inst).unwrap_err(),
            Error::NotSelectorStructure { .. }
        ));
    }

    #[test]
    fn tai256c_reduction() {
        let a = generate_tai256c_a();
        // any zero-diagonal symmetric B works for the structure checks
        let b = SymMatrix::from_fn(256, |i, j| {
            if i == j {
                0
            } else {
                ((i * 31 + j * 17) % 100) as i64
            }
        });
        let inst = QapInstance::new(a, b).unwrap();
        let bqop = reduce_to_bqop(&inst).unwrap();
        assert_eq!(bqop.n(), 256);
        assert_eq!(bqop.cardinality(), 92);
        assert_eq!(bqop.scale(), 1);
    }

    #[test]
    fn general_model_shape() {
        let a = generate_tai256c_a();
        let b = SymMatrix::from_fn(256, |i, j| if i == j { 0 } else { 1 });
        let inst = QapInstance::new(a, b).unwrap();
        let model = emit_general_model(&inst).unwrap();
        assert_eq!(model.num_variables(), 256 * 2);
        assert_eq!(model.num_size_rows(), 2);
        assert_eq!(model.num_assignment_rows(), 256);
    }

    #[test]
    fn general_model_grid_sizes() {
        // any two facilities of a symmetric 2x2 flow matrix are clones (the
        // "agree outside {i,k}" condition is vacuous), so the n=2 case
        // collapses to a single class and a 2x1 grid
        let inst = crate::instance::parse_qaplib("2\n0 1\n1 0\n0 3\n3 0").unwrap();
        let model = emit_general_model(&inst).unwrap();
        assert_eq!(model.num_variables(), 2);
        assert_eq!(model.num_size_rows(), 1);
        // a clone-free instance keeps the full locations x classes grid
        let a = SymMatrix::from_fn(3, |i, j| if i == j { 0 } else { (i + j) as i64 });
        let b = SymMatrix::from_fn(3, |i, j| if i == j { 0 } else { 1 });
        let inst3 = QapInstance::new(a, b).unwrap();
        let model3 = emit_general_model(&inst3).unwrap();
        assert_eq!(model3.num_variables(), 9);
        assert_eq!(model3.num_size_rows(), 3);
        assert_eq!(model3.num_assignment_rows(), 3);
    }

    #[test]
    fn general_model_round_trip() {
        let inst = selector_pair_instance();
        let model = emit_general_model(&inst).unwrap();
        let parsed = parse_general_model(&model.serialize()).unwrap();
        assert_eq!(parsed, model);
    }

    /// Brute-force QAP optimum over all permutations.
    fn qap_min(inst: &QapInstance) -> i64 {
        (0..inst.n() as u32)
            .permutations(inst.n())
            .map(|img| qap_objective(inst, &Permutation::new(img).unwrap()).unwrap())
            .min()
            .unwrap()
    }

    /// Brute-force model optimum over all feasible class assignments.
    fn model_min(model: &GeneralReducedModel) -> i64 {
        let n = model.n();
        let sizes: Vec<usize> = (0..model.num_classes())
            .map(|u| model.clone_classes().size(u))
            .collect();
        let mut best = i64::MAX;
        let mut assign = vec![0usize; n];
        fn rec(
            model: &GeneralReducedModel,
            assign: &mut Vec<usize>,
            remaining: &mut Vec<usize>,
            pos: usize,
            best: &mut i64,
        ) {
            if pos == assign.len() {
                *best = (*best).min(model.objective_of_assignment(assign).unwrap());
                return;
            }
            for u in 0..remaining.len() {
                if remaining[u] > 0 {
                    remaining[u] -= 1;
                    assign[pos] = u;
                    rec(model, assign, remaining, pos + 1, best);
                    remaining[u] += 1;
                }
            }
        }
        let mut remaining = sizes;
        rec(model, &mut assign, &mut remaining, 0, &mut best);
        best
    }

    /// Brute-force BQOP optimum over all cardinality-m supports.
    fn bqop_min(bqop: &CardBqop) -> i64 {
        (0..bqop.n())
            .combinations(bqop.cardinality())
            .map(|s| bqop.scale() * bqop.matrix().quad_form_support(&s))
            .min()
            .unwrap()
    }

    #[test]
    fn model_equals_qap_and_bqop_on_small_instances() {
        let mut rng = StdRng::seed_from_u64(7);
        for trial in 0..12 {
            let inst = synth::random_selector_qap(&mut rng, 5 + trial % 2, 2, 4);
            let model = emit_general_model(&inst).unwrap();
            let q = qap_min(&inst);
            assert_eq!(model_min(&model), q, "model vs QAP optimum");
            let bqop = reduce_to_bqop(&inst).unwrap();
            assert_eq!(bqop_min(&bqop), q, "BQOP vs QAP optimum");
        }
        // also exercise the no-clone grid: model optimum == QAP optimum
        for seed in 0..4 {
            let inst = synth::random_qap(&mut StdRng::seed_from_u64(seed), 4, 6);
            let model = emit_general_model(&inst).unwrap();
            assert_eq!(model_min(&model), qap_min(&inst));
        }
    }

    #[test]
    fn exhaustive_double_enumeration_n8() {
        let mut rng = StdRng::seed_from_u64(99);
        for _ in 0..6 {
            let n = rng.gen_range(5..=8);
            let m = rng.gen_range(2..=4.min(n - 1));
            let inst = synth::random_selector_qap(&mut rng, n, m, 5);
            let bqop = reduce_to_bqop(&inst).unwrap();
            assert_eq!(qap_min(&inst), bqop_min(&bqop));
        }
    }

    #[test]
    fn conversion_preserves_objective() {
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..10 {
            let n = rng.gen_range(4..=10);
            let m = rng.gen_range(2..=4.min(n - 1));
            let inst = synth::random_selector_qap(&mut rng, n, m, 6);
            let clones = find_clones(inst.flows()).unwrap();
            let (u, _) = clones.selector_class().unwrap();
            let bqop = reduce_to_bqop(&inst).unwrap();
            for _ in 0..100 {
                let perm = synth::random_permutation(&mut rng, n);
                let x = permutation_to_binary(&perm, &clones, u).unwrap();
                assert_eq!(x.cardinality(), m);
                assert_eq!(
                    qap_objective(&inst, &perm).unwrap(),
                    bqop_objective(&bqop, &x).unwrap()
                );
            }
        }
    }

    #[test]
    fn identity_projects_to_prefix() {
        let a = generate_tai256c_a();
        let b = SymMatrix::zeros(256);
        let inst = QapInstance::new(a, b).unwrap();
        let clones = find_clones(inst.flows()).unwrap();
        let x = permutation_to_binary(&Permutation::identity(256), &clones, 0).unwrap();
        assert_eq!(x.support(), (0..92).collect::<Vec<_>>());
        assert_eq!(x.cardinality(), 92);
    }

    #[test]
    fn binary_round_trip_and_lift() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..10 {
            let inst = synth::random_selector_qap(&mut rng, 8, 3, 5);
            let clones = find_clones(inst.flows()).unwrap();
            let bqop = reduce_to_bqop(&inst).unwrap();
            let support: Vec<usize> = rand::seq::index::sample(&mut rng, 8, 3).into_vec();
            let x = BinaryVector::from_support(8, support);
            let perm = binary_to_permutation(&x, &clones).unwrap();
            // lifting preserves the objective
            assert_eq!(
                qap_objective(&inst, &perm).unwrap(),
                bqop_objective(&bqop, &x).unwrap()
            );
            // projecting back is the identity on x
            let (u, _) = clones.selector_class().unwrap();
            assert_eq!(permutation_to_binary(&perm, &clones, u).unwrap(), x);
        }
    }

    #[test]
    fn binary_to_permutation_cardinality_error() {
        let inst = selector_pair_instance();
        let clones = find_clones(inst.flows()).unwrap();
        let x = BinaryVector::from_support(4, [0]);
        assert!(matches!(
            binary_to_permutation(&x, &clones).unwrap_err(),
            Error::CardinalityViolation {
                expected: 2,
                found: 1
            }
        ));
    }

    proptest! {
        /// The clone relation is an equivalence relation.
        #[test]
        fn clone_relation_is_equivalence(seed in 0u64..500, n in 2usize..9) {
            let mut rng = StdRng::seed_from_u64(seed);
            // small value range so clones actually occur
            let a = synth::random_symmetric(&mut rng, n, 1);
            for i in 0..n {
                prop_assert!(are_clones(&a, i, i));
                for k in 0..n {
                    prop_assert_eq!(are_clones(&a, i, k), are_clones(&a, k, i));
                    for l in 0..n {
                        if are_clones(&a, i, k) && are_clones(&a, k, l) {
                            prop_assert!(are_clones(&a, i, l));
                        }
                    }
                }
            }
        }

        /// Relabeling the matrix relabels the classes.
        #[test]
        fn find_clones_relabeling_invariant(seed in 0u64..200, n in 2usize..9) {
            let mut rng = StdRng::seed_from_u64(seed);
            let a = synth::random_symmetric(&mut rng, n, 1);
            let sigma = synth::random_permutation(&mut rng, n);
            let relabeled = a.relabel(&sigma.image().iter().map(|&v| v as usize).collect::<Vec<_>>());
            let orig: std::collections::BTreeSet<Vec<usize>> = find_clones(&a)
                .unwrap()
                .classes()
                .iter()
                .map(|c| {
                    let mut v: Vec<usize> = c.iter().map(|&i| sigma.apply(i)).collect();
                    v.sort_unstable();
                    v
                })
                .collect();
            let relab: std::collections::BTreeSet<Vec<usize>> =
                find_clones(&relabeled).unwrap().classes().iter().cloned().collect();
            prop_assert_eq!(orig, relab);
        }
    }
}
