//! Reduced subproblems for search-tree nodes.
//!
//! A node fixes the variables in `I0` to zero and those in `I1` to one; the
//! rest stay free. Substituting the fixings into `scale * x^T B x` leaves a
//! quadratic form over the free set,
//!
//! ```text
//! B(I0,I1) = B_FF + 2 * diag(sum_{k in I1} B_kF)
//! ```
//!
//! plus the constant `sum_{j,k in I1} B_jk`, which is carried explicitly so
//! node bounds and leaf values stay comparable to the global objective. The
//! residual cardinality is `m' = m - |I1|`. A penalty parameter turns the
//! node into an unconstrained QUBO whose minimum converges monotonically to
//! the constrained one from below as the parameter grows.

use crate::error::Error;
use crate::index_set::IndexSet;
use crate::instance::CardBqop;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// The `(I0, I1)` fixing of a search-tree node; the free set is derived.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeKey {
    i0: IndexSet,
    i1: IndexSet,
}

impl NodeKey {
    pub fn new(i0: IndexSet, i1: IndexSet) -> Self {
        assert_eq!(
            i0.universe(),
            i1.universe(),
            "index sets over different ground sets"
        );
        assert!(i0.is_disjoint(&i1), "I0 and I1 must be disjoint");
        Self { i0, i1 }
    }

    pub fn root(n: usize) -> Self {
        Self {
            i0: IndexSet::empty(n),
            i1: IndexSet::empty(n),
        }
    }

    pub fn n(&self) -> usize {
        self.i0.universe()
    }

    pub fn i0(&self) -> &IndexSet {
        &self.i0
    }

    pub fn i1(&self) -> &IndexSet {
        &self.i1
    }

    pub fn free(&self) -> IndexSet {
        self.i0.union(&self.i1).complement()
    }

    /// Child fixing every index of `orbit` to zero.
    pub fn with_zeroed(&self, orbit: &[usize]) -> Self {
        let mut i0 = self.i0.clone();
        for &j in orbit {
            i0.insert(j);
        }
        Self {
            i0,
            i1: self.i1.clone(),
        }
    }

    /// Child fixing index `j` to one.
    pub fn with_fixed_one(&self, j: usize) -> Self {
        let mut i1 = self.i1.clone();
        i1.insert(j);
        Self {
            i0: self.i0.clone(),
            i1,
        }
    }
}

/// The reduced quadratic form over the free set of a node.
///
/// `value_of_support` returns values in global-objective units:
/// `scale * (offset + y^T matrix y)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedBqop {
    /// Sorted global indices of the free variables; position in this list is
    /// the local index of the rows and columns of `matrix`.
    free: Vec<usize>,
    /// `|F| x |F|`, row-major. Diagonal holds the `I1` interaction terms.
    matrix: Vec<i64>,
    /// `sum_{j,k in I1} B_jk`, in unscaled units.
    offset: i64,
    /// `m - |I1|`.
    residual_cardinality: usize,
    /// Positive multiplier inherited from the instance.
    scale: i64,
}

impl ReducedBqop {
    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn dim(&self) -> usize {
        self.free.len()
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> i64 {
        self.matrix[i * self.free.len() + j]
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn residual_cardinality(&self) -> usize {
        self.residual_cardinality
    }

    pub fn scale(&self) -> i64 {
        self.scale
    }

    /// Frobenius norm of the reduced matrix (unscaled).
    pub fn frobenius(&self) -> f64 {
        self.matrix
            .iter()
            .map(|&v| (v as f64) * (v as f64))
            .sum::<f64>()
            .sqrt()
    }

    /// Objective of a free-set assignment given by local support indices,
    /// in global units. The constant and the scale are included.
    pub fn value_of_support(&self, support: &[usize]) -> i64 {
        let f = self.free.len();
        let mut acc = 0i64;
        for &i in support {
            let row = &self.matrix[i * f..(i + 1) * f];
            for &j in support {
                acc += row[j];
            }
        }
        self.scale * (self.offset + acc)
    }

    /// Sum of all matrix entries; the forced value when `m' == |F|`.
    pub fn matrix_total(&self) -> i64 {
        self.matrix.iter().sum()
    }
}

/// Build the reduced form for a node.
///
/// Fails with [`Error::InfeasibleNode`] when the fixing cannot be completed:
/// more ones fixed than the cardinality, or fewer free variables than the
/// residual cardinality needs.
pub fn reduce(bqop: &CardBqop, key: &NodeKey) -> Result<ReducedBqop> {
    if key.n() != bqop.n() {
        return Err(Error::DimensionMismatch {
            expected: bqop.n(),
            found: key.n(),
        });
    }
    let ones = key.i1().len();
    let free: Vec<usize> = key.free().to_vec();
    let m = bqop.cardinality();
    if ones > m || m - ones > free.len() {
        return Err(Error::InfeasibleNode {
            fixed_ones: ones,
            free: free.len(),
            cardinality: m,
        });
    }
    let b = bqop.matrix();
    let f = free.len();
    let mut matrix = vec![0i64; f * f];
    for (li, &gi) in free.iter().enumerate() {
        let row = b.row(gi);
        for (lj, &gj) in free.iter().enumerate() {
            matrix[li * f + lj] = row[gj];
        }
        let cross: i64 = key.i1().iter().map(|k| b.get(k, gi)).sum();
        matrix[li * f + li] += 2 * cross;
    }
    let mut offset = 0i64;
    for j in key.i1().iter() {
        for k in key.i1().iter() {
            offset += b.get(j, k);
        }
    }
    Ok(ReducedBqop {
        free,
        matrix,
        offset,
        residual_cardinality: m - ones,
        scale: bqop.scale(),
    })
}

/// The penalty form of a reduced node: an unconstrained quadratic over the
/// free set whose value at any feasible `y` (cardinality `m'`) equals the
/// reduced value, and which under-estimates it elsewhere for every positive
/// `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboInstance {
    free: Vec<usize>,
    /// `|F| x |F|` symmetric, row-major; includes the penalty expansion and
    /// the instance scale.
    q: Vec<f64>,
    offset: f64,
    lambda: f64,
}

impl QuboInstance {
    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn dim(&self) -> usize {
        self.free.len()
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.free.len() + j]
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Objective `offset + y^T Q y` of a 0/1 assignment over the free set.
    pub fn value(&self, bits: &[bool]) -> f64 {
        let f = self.free.len();
        assert_eq!(bits.len(), f);
        let mut acc = 0.0;
        for i in 0..f {
            if bits[i] {
                let row = &self.q[i * f..(i + 1) * f];
                for j in 0..f {
                    if bits[j] {
                        acc += row[j];
                    }
                }
            }
        }
        self.offset + acc
    }

    /// Sparse symmetric triplet export: a header line
    /// `qubo <|F|> <lambda> <offset>` followed by one `i j q` line per
    /// nonzero upper-triangle entry, 1-based local indices, full-precision
    /// floats. A comment line maps local indices back to global ones.
    pub fn export_triplets(&self) -> String {
        let f = self.free.len();
        let mut s = String::new();
        let _ = writeln!(s, "qubo {} {} {}", f, self.lambda, self.offset);
        let globals: Vec<String> = self.free.iter().map(|&g| (g + 1).to_string()).collect();
        let _ = writeln!(s, "# free {}", globals.join(" "));
        for i in 0..f {
            for j in i..f {
                let v = self.entry(i, j);
                if v != 0.0 {
                    let _ = writeln!(s, "{} {} {}", i + 1, j + 1, v);
                }
            }
        }
        s
    }
}

/// Expand the cardinality penalty `lambda * (sum y - m')^2` into the
/// quadratic form, using `y_i^2 = y_i`: off-diagonals gain `lambda`, the
/// diagonal gains `lambda * (1 - 2 m')`, and the constant gains
/// `lambda * m'^2`.
pub fn to_qubo(r: &ReducedBqop, lambda: f64) -> QuboInstance {
    assert!(lambda > 0.0, "penalty parameter must be positive");
    let f = r.dim();
    let mp = r.residual_cardinality as f64;
    let scale = r.scale as f64;
    let mut q = vec![0.0f64; f * f];
    for i in 0..f {
        for j in 0..f {
            let base = scale * r.entry(i, j) as f64;
            q[i * f + j] = if i == j {
                base + lambda * (1.0 - 2.0 * mp)
            } else {
                base + lambda
            };
        }
    }
    QuboInstance {
        free: r.free.clone(),
        q,
        offset: scale * r.offset as f64 + lambda * mp * mp,
        lambda,
    }
}

/// The penalty parameter rule `1e8 / ||B(I0,I1)||_F`, applied to the scaled
/// reduced matrix. Undefined (an error) on an all-zero matrix.
pub fn default_lambda(r: &ReducedBqop) -> Result<f64> {
    let norm = r.scale as f64 * r.frobenius();
    if norm == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(1.0e8 / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{bqop_objective, BinaryVector, BqopSource};
    use crate::matrix::SymMatrix;
    use crate::synth;
    use itertools::Itertools;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn bqop_from(b: SymMatrix, m: usize, scale: i64) -> CardBqop {
        CardBqop::new(b, m, scale, BqopSource::Raw).unwrap()
    }

    #[test]
    fn empty_fixing_is_identity() {
        let mut rng = StdRng::seed_from_u64(1);
        let b = synth::random_symmetric(&mut rng, 6, 9);
        let bqop = bqop_from(b.clone(), 3, 1);
        let r = reduce(&bqop, &NodeKey::root(6)).unwrap();
        assert_eq!(r.offset(), 0);
        assert_eq!(r.residual_cardinality(), 3);
        assert_eq!(r.free(), (0..6).collect::<Vec<_>>().as_slice());
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(r.entry(i, j), b.get(i, j));
            }
        }
    }

    #[test]
    fn fixing_one_adds_diagonal_cross_terms() {
        let b = synth::toroidal_grid_b(4, 4, 1000);
        let bqop = bqop_from(b.clone(), 5, 1);
        let key = NodeKey::new(IndexSet::empty(16), IndexSet::from_indices(16, [0]));
        let r = reduce(&bqop, &key).unwrap();
        assert_eq!(r.free(), (1..16).collect::<Vec<_>>().as_slice());
        for (li, &gj) in r.free().iter().enumerate() {
            assert_eq!(r.entry(li, li), 2 * b.get(0, gj));
            for (lj, &gk) in r.free().iter().enumerate() {
                if li != lj {
                    assert_eq!(r.entry(li, lj), b.get(gj, gk));
                }
            }
        }
        assert_eq!(r.offset(), 0); // single fixed one, zero diagonal
    }

    #[test]
    fn infeasible_nodes_are_rejected() {
        let b = SymMatrix::zeros(4);
        let bqop = bqop_from(b, 2, 1);
        let too_many_ones = NodeKey::new(IndexSet::empty(4), IndexSet::from_indices(4, [0, 1, 2]));
        assert!(matches!(
            reduce(&bqop, &too_many_ones).unwrap_err(),
            Error::InfeasibleNode { fixed_ones: 3, .. }
        ));
        let too_few_free = NodeKey::new(IndexSet::from_indices(4, [0, 1, 2]), IndexSet::empty(4));
        assert!(matches!(
            reduce(&bqop, &too_few_free).unwrap_err(),
            Error::InfeasibleNode { free: 1, .. }
        ));
    }

    /// Exhaustive lifted-objective identity: for every key with |I1| <= 2
    /// and every feasible completion, the reduced value equals the direct
    /// objective of the lifted vector.
    #[test]
    fn lifted_objective_identity_exhaustive() {
        let mut rng = StdRng::seed_from_u64(23);
        for scale in [1i64, 3] {
            let b = synth::random_symmetric_signed(&mut rng, 5, 7);
            let bqop = bqop_from(b, 3, scale);
            for i1_size in 0..=2usize {
                for i1 in (0..5).combinations(i1_size) {
                    for i0 in (0..5).filter(|i| !i1.contains(i)).combinations(1) {
                        let key = NodeKey::new(
                            IndexSet::from_indices(5, i0.iter().copied()),
                            IndexSet::from_indices(5, i1.iter().copied()),
                        );
                        let r = match reduce(&bqop, &key) {
                            Ok(r) => r,
                            Err(Error::InfeasibleNode { .. }) => continue,
                            Err(e) => panic!("unexpected: {e}"),
                        };
                        let mp = r.residual_cardinality();
                        for local in (0..r.dim()).combinations(mp) {
                            let mut support: Vec<usize> =
                                local.iter().map(|&l| r.free()[l]).collect();
                            support.extend(key.i1().iter());
                            support.sort_unstable();
                            let x = BinaryVector::from_support(5, support);
                            assert_eq!(
                                r.value_of_support(&local),
                                bqop_objective(&bqop, &x).unwrap()
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn penalty_vanishes_on_feasible_points() {
        let mut rng = StdRng::seed_from_u64(4);
        let b = synth::random_symmetric(&mut rng, 6, 5);
        let bqop = bqop_from(b, 3, 2);
        let key = NodeKey::new(IndexSet::empty(6), IndexSet::from_indices(6, [1]));
        let r = reduce(&bqop, &key).unwrap();
        let qubo = to_qubo(&r, 1234.5);
        assert_eq!(qubo.lambda(), 1234.5);

        // m' = 2 over 5 free vars: every cardinality-2 assignment matches
        for support in (0..5).combinations(2) {
            let mut bits = vec![false; 5];
            for &i in &support {
                bits[i] = true;
            }
            let direct = r.value_of_support(&support) as f64;
            assert!((qubo.value(&bits) - direct).abs() < 1e-6);
        }
        // and m' = 0 with y = 0 contributes nothing
        let key0 = NodeKey::new(IndexSet::empty(6), IndexSet::from_indices(6, [1, 2, 4]));
        let r0 = reduce(&bqop, &key0).unwrap();
        let qubo0 = to_qubo(&r0, 999.0);
        let zero = vec![false; 3];
        assert!((qubo0.value(&zero) - r0.value_of_support(&[]) as f64).abs() < 1e-9);
    }

    /// At the root the penalty form is dense with constant lambda * m^2.
    #[test]
    fn root_qubo_structure() {
        let b = synth::toroidal_grid_b(3, 3, 900);
        let bqop = bqop_from(b, 4, 1);
        let r = reduce(&bqop, &NodeKey::root(9)).unwrap();
        let lambda = 77.0;
        let qubo = to_qubo(&r, lambda);
        assert_eq!(qubo.offset(), lambda * 16.0);
        for i in 0..9 {
            for j in 0..9 {
                if i != j {
                    assert!(qubo.entry(i, j) != 0.0, "dense off-diagonal expected");
                }
            }
        }
    }

    /// Exhaustive penalty bound: the unconstrained QUBO minimum never
    /// exceeds the constrained minimum and is nondecreasing in lambda.
    #[test]
    fn penalty_minima_monotone_and_below() {
        let mut rng = StdRng::seed_from_u64(77);
        for _ in 0..10 {
            let n = rng.gen_range(5..=10);
            let m = rng.gen_range(1..n);
            let b = synth::random_symmetric_signed(&mut rng, n, 9);
            let bqop = bqop_from(b, m, 1);
            let r = reduce(&bqop, &NodeKey::root(n)).unwrap();
            let f = r.dim();
            let constrained = (0..f)
                .combinations(r.residual_cardinality())
                .map(|s| r.value_of_support(&s))
                .min()
                .unwrap() as f64;
            let mut prev = f64::NEG_INFINITY;
            for lambda in [1.0, 10.0, 100.0, 1000.0, 10000.0] {
                let qubo = to_qubo(&r, lambda);
                let min = (0..1u32 << f)
                    .map(|mask| {
                        let bits: Vec<bool> = (0..f).map(|i| mask >> i & 1 == 1).collect();
                        qubo.value(&bits)
                    })
                    .fold(f64::INFINITY, f64::min);
                assert!(
                    min <= constrained + 1e-6,
                    "penalty minimum exceeded constrained one"
                );
                assert!(
                    min >= prev - 1e-6,
                    "penalty minima must be nondecreasing in lambda"
                );
                prev = min;
            }
            // entries are small integers, so the largest lambda attains the bound
            assert!((prev - constrained).abs() < 1e-6);
        }
    }

    #[test]
    fn default_lambda_rule() {
        // hypothetical identity matrix, |F| = 4: Frobenius norm 2
        let r = ReducedBqop {
            free: vec![0, 1, 2, 3],
            matrix: vec![1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1],
            offset: 0,
            residual_cardinality: 2,
            scale: 1,
        };
        assert!((default_lambda(&r).unwrap() - 5.0e7).abs() < 1e-3);

        // homogeneity: scaling the matrix by 10 scales lambda by 1/10
        let r10 = ReducedBqop {
            matrix: r.matrix.iter().map(|v| v * 10).collect(),
            ..r.clone()
        };
        assert!((default_lambda(&r10).unwrap() - 5.0e6).abs() < 1e-4);

        let zero = ReducedBqop {
            matrix: vec![0; 16],
            ..r
        };
        assert!(matches!(
            default_lambda(&zero).unwrap_err(),
            Error::ZeroMatrix
        ));
    }

    /// Frozen regression value of the penalty rule at the root of the
    /// synthetic 256-facility instance; guards the norm choice and the
    /// determinism of the computation.
    #[test]
    fn default_lambda_regression_at_full_scale() {
        let b = synth::toroidal_grid_b(16, 16, 400_000);
        let bqop = bqop_from(b, 92, 1);
        let r = reduce(&bqop, &NodeKey::root(256)).unwrap();
        let lambda = default_lambda(&r).unwrap();
        assert!(
            (lambda - 6.3861807363268515).abs() < 1e-6,
            "penalty rule drifted: {lambda}"
        );
        assert_eq!(lambda, default_lambda(&r).unwrap());
    }

    #[test]
    fn qubo_export_format() {
        let b = synth::toroidal_grid_b(3, 3, 900);
        let bqop = bqop_from(b, 4, 1);
        let key = NodeKey::new(
            IndexSet::from_indices(9, [2]),
            IndexSet::from_indices(9, [0]),
        );
        let r = reduce(&bqop, &key).unwrap();
        let qubo = to_qubo(&r, 64.0);
        let text = qubo.export_triplets();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert_eq!(header, format!("qubo 7 64 {}", qubo.offset()));
        assert!(lines.next().unwrap().starts_with("# free "));
        for line in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            assert_eq!(parts.len(), 3);
            let i: usize = parts[0].parse().unwrap();
            let j: usize = parts[1].parse().unwrap();
            let v: f64 = parts[2].parse().unwrap();
            assert!(i >= 1 && j >= i && j <= 7);
            assert_eq!(v, qubo.entry(i - 1, j - 1), "round-trips at full precision");
        }
    }

    /// The reduced form inherits the symmetry of the instance: invariant
    /// under the setwise stabilizer of the fixing.
    #[test]
    fn reduced_matrix_invariant_under_stabilizer() {
        let b = synth::toroidal_grid_b(4, 4, 40_000);
        let g = crate::symmetry::discover_automorphisms(&b).unwrap();
        let bqop = bqop_from(b, 5, 1);
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..20 {
            let i1 = IndexSet::from_indices(16, [rng.gen_range(0..16)]);
            let i0_pick = loop {
                let c = rng.gen_range(0..16);
                if !i1.contains(c) {
                    break c;
                }
            };
            let i0 = IndexSet::from_indices(16, [i0_pick]);
            let key = NodeKey::new(i0.clone(), i1.clone());
            let stab = crate::symmetry::setwise_stabilizer(&g, &i0, &i1);
            let r = reduce(&bqop, &key).unwrap();
            let qubo = to_qubo(&r, 17.0);
            let local_of: std::collections::HashMap<usize, usize> =
                r.free().iter().enumerate().map(|(l, &g)| (g, l)).collect();
            for _ in 0..50 {
                let pi = &stab.elements()[rng.gen_range(0..stab.order())];
                let bits: Vec<bool> = (0..r.dim()).map(|_| rng.gen_bool(0.5)).collect();
                // (y_pi)[u] = y[pi(u)] in global terms
                let permuted: Vec<bool> = r
                    .free()
                    .iter()
                    .map(|&gu| bits[local_of[&pi.apply(gu)]])
                    .collect();
                let direct: Vec<usize> = (0..r.dim()).filter(|&i| bits[i]).collect();
                let moved: Vec<usize> = (0..r.dim()).filter(|&i| permuted[i]).collect();
                assert_eq!(r.value_of_support(&direct), r.value_of_support(&moved));
                assert!((qubo.value(&bits) - qubo.value(&permuted)).abs() < 1e-9);
            }
        }
    }
}
