//! Automorphism discovery for symmetric cost matrices, setwise stabilizers,
//! and orbit partitions.
//!
//! The group of a matrix `B` is the set of index permutations `pi` with
//! `B[pi(i)][pi(j)] == B[i][j]` for all `i, j`; equivalently `x_pi^T B x_pi =
//! x^T B x` for every 0/1 vector. Discovery is a depth-first implicit
//! enumeration over partial assignments `pi(0), pi(1), ..` with two sound
//! prunes: a candidate must share the row signature (diagonal entry plus
//! sorted off-diagonal multiset) of the index it hosts, and must be
//! consistent with every previously assigned pair. Groups are kept as
//! explicit element lists; the groups this toolkit meets are small
//! (thousands of elements), so no generator machinery is needed.

use crate::error::Error;
use crate::index_set::IndexSet;
use crate::instance::{BinaryVector, Permutation};
use crate::matrix::SymMatrix;
use crate::Result;
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

/// Default cap on discovered group elements.
pub const DEFAULT_GROUP_CAP: usize = 1_000_000;

/// An explicit permutation group: closed under composition and inverse,
/// identity included. Elements are kept sorted by image for canonical,
/// schedule-independent output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationGroup {
    n: usize,
    elements: Vec<Permutation>,
}

impl PermutationGroup {
    /// Wrap an element list; sorts and deduplicates. The caller is
    /// responsible for closure (discovery and filtering both preserve it).
    pub fn from_elements(n: usize, mut elements: Vec<Permutation>) -> Self {
        elements.sort_unstable_by(|a, b| a.image().cmp(b.image()));
        elements.dedup();
        debug_assert!(elements.iter().any(|p| p
            .image()
            .iter()
            .enumerate()
            .all(|(i, &v)| v as usize == i)));
        Self { n, elements }
    }

    pub fn trivial(n: usize) -> Self {
        Self {
            n,
            elements: vec![Permutation::identity(n)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[Permutation] {
        &self.elements
    }

    pub fn contains(&self, p: &Permutation) -> bool {
        self.elements
            .binary_search_by(|e| e.image().cmp(p.image()))
            .is_ok()
    }

    pub fn is_trivial(&self) -> bool {
        self.elements.len() == 1
    }
}

/// Row signature used as a necessary condition for `pi(i) = j`.
fn row_signatures(b: &SymMatrix) -> Vec<usize> {
    let n = b.n();
    let mut sigs: Vec<(i64, Vec<i64>)> = Vec::with_capacity(n);
    for i in 0..n {
        let mut off: Vec<i64> = (0..n).filter(|&j| j != i).map(|j| b.get(i, j)).collect();
        off.sort_unstable();
        sigs.push((b.get(i, i), off));
    }
    let mut sorted: Vec<&(i64, Vec<i64>)> = sigs.iter().collect();
    sorted.sort_unstable();
    sorted.dedup();
    sigs.iter()
        .map(|s| sorted.binary_search(&s).unwrap())
        .collect()
}

struct Search<'a> {
    b: &'a SymMatrix,
    sig: Vec<usize>,
    cap: usize,
    found: AtomicUsize,
    abort: AtomicBool,
}

impl Search<'_> {
    /// Extend the partial assignment `perm[0..depth]`; collect completions.
    fn dfs(&self, perm: &mut Vec<u32>, used: &mut Vec<bool>, out: &mut Vec<Permutation>) {
        if self.abort.load(Ordering::Relaxed) {
            return;
        }
        let n = self.b.n();
        let depth = perm.len();
        if depth == n {
            if self.found.fetch_add(1, Ordering::Relaxed) + 1 > self.cap {
                self.abort.store(true, Ordering::Relaxed);
                return;
            }
            out.push(Permutation::new(perm.clone()).expect("assignment is a bijection"));
            return;
        }
        let row_i = self.b.row(depth);
        'cand: for j in 0..n {
            if used[j] || self.sig[j] != self.sig[depth] {
                continue;
            }
            let row_j = self.b.row(j);
            for h in 0..depth {
                if row_j[perm[h] as usize] != row_i[h] {
                    continue 'cand;
                }
            }
            perm.push(j as u32);
            used[j] = true;
            self.dfs(perm, used, out);
            used[j] = false;
            perm.pop();
        }
    }
}

/// All permutations leaving `B` invariant, canonically sorted.
///
/// Aborts with [`Error::GroupCapExceeded`] instead of exhausting memory when
/// a degenerate input has more than `cap` automorphisms.
pub fn discover_automorphisms_with_cap(b: &SymMatrix, cap: usize) -> Result<PermutationGroup> {
    let n = b.n();
    if n == 0 {
        return Ok(PermutationGroup {
            n,
            elements: vec![Permutation::identity(0)],
        });
    }
    let search = Search {
        b,
        sig: row_signatures(b),
        cap,
        found: AtomicUsize::new(0),
        abort: AtomicBool::new(false),
    };
    // Disjoint subtrees under each choice of pi(0) explore in parallel; the
    // final sort makes the output independent of scheduling.
    let branches: Vec<Vec<Permutation>> = (0..n)
        .into_par_iter()
        .map(|j0| {
            let mut out = Vec::new();
            if search.sig[j0] == search.sig[0] {
                let mut perm = Vec::with_capacity(n);
                let mut used = vec![false; n];
                perm.push(j0 as u32);
                used[j0] = true;
                search.dfs(&mut perm, &mut used, &mut out);
            }
            out
        })
        .collect();
    if search.abort.load(Ordering::Relaxed) {
        return Err(Error::GroupCapExceeded { cap });
    }
    let elements: Vec<Permutation> = branches.into_iter().flatten().collect();
    Ok(PermutationGroup::from_elements(n, elements))
}

/// [`discover_automorphisms_with_cap`] with the default cap.
pub fn discover_automorphisms(b: &SymMatrix) -> Result<PermutationGroup> {
    discover_automorphisms_with_cap(b, DEFAULT_GROUP_CAP)
}

/// The subgroup `{pi in G : pi(I0) = I0 and pi(I1) = I1}` (setwise).
/// The free set `F = N \ (I0 u I1)` is then fixed setwise as well.
pub fn setwise_stabilizer(g: &PermutationGroup, i0: &IndexSet, i1: &IndexSet) -> PermutationGroup {
    let keep = |p: &Permutation| {
        i0.iter().all(|i| i0.contains(p.apply(i))) && i1.iter().all(|i| i1.contains(p.apply(i)))
    };
    PermutationGroup {
        n: g.n(),
        elements: g.elements.iter().filter(|p| keep(p)).cloned().collect(),
    }
}

/// The subgroup fixing the single point `j`.
pub fn point_stabilizer(g: &PermutationGroup, j: usize) -> PermutationGroup {
    PermutationGroup {
        n: g.n(),
        elements: g
            .elements
            .iter()
            .filter(|p| p.apply(j) == j)
            .cloned()
            .collect(),
    }
}

/// The orbit partition of a ground set under a group that maps it onto
/// itself. Orbits are sorted ascending and listed by smallest member, which
/// doubles as the representative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitSet {
    ground: IndexSet,
    orbits: Vec<Vec<usize>>,
}

impl OrbitSet {
    pub fn ground(&self) -> &IndexSet {
        &self.ground
    }

    pub fn orbits(&self) -> &[Vec<usize>] {
        &self.orbits
    }

    pub fn len(&self) -> usize {
        self.orbits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbits.is_empty()
    }

    pub fn representative(&self, k: usize) -> usize {
        self.orbits[k][0]
    }

    pub fn orbit_containing(&self, i: usize) -> Option<&[usize]> {
        self.orbits
            .iter()
            .find(|o| o.binary_search(&i).is_ok())
            .map(|o| o.as_slice())
    }

    /// Histogram of orbit sizes: `(size, count)` pairs, ascending by size.
    pub fn size_profile(&self) -> Vec<(usize, usize)> {
        let mut map = std::collections::BTreeMap::new();
        for o in &self.orbits {
            *map.entry(o.len()).or_insert(0usize) += 1;
        }
        map.into_iter().collect()
    }
}

/// Orbit partition of `F` under the restriction of `G` to `F`.
///
/// Every element of `G` must map `F` onto itself (checked in debug builds);
/// stabilizers produced by [`setwise_stabilizer`] satisfy this by
/// construction.
pub fn orbits(g: &PermutationGroup, f: &IndexSet) -> OrbitSet {
    debug_assert!(
        g.elements
            .iter()
            .all(|p| f.iter().all(|i| f.contains(p.apply(i)))),
        "group does not stabilize the ground set"
    );
    let n = g.n();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for p in &g.elements {
        for i in f.iter() {
            let (a, b) = (find(&mut parent, i), find(&mut parent, p.apply(i)));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut by_root: std::collections::BTreeMap<usize, Vec<usize>> =
        std::collections::BTreeMap::new();
    for i in f.iter() {
        by_root.entry(find(&mut parent, i)).or_default().push(i);
    }
    OrbitSet {
        ground: f.clone(),
        orbits: by_root.into_values().collect(),
    }
}

/// The distinct images `{x_pi : pi in G}` of a 0/1 vector under the group.
/// When `G` is the automorphism group of the cost matrix, every image shares
/// the objective value of `x`.
pub fn expand_solution(g: &PermutationGroup, x: &BinaryVector) -> Result<BTreeSet<BinaryVector>> {
    if x.n() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            found: x.n(),
        });
    }
    Ok(g.elements.iter().map(|p| x.permute(p)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn complete_graph(n: usize) -> SymMatrix {
        SymMatrix::from_fn(n, |i, j| if i == j { 0 } else { 7 })
    }

    fn rigid_matrix(n: usize) -> SymMatrix {
        SymMatrix::from_fn(n, |i, j| if i == j { 0 } else { (i * n + j) as i64 })
    }

    #[test]
    fn complete_graph_has_full_symmetric_group() {
        let g = discover_automorphisms(&complete_graph(4)).unwrap();
        assert_eq!(g.order(), 24);
    }

    #[test]
    fn rigid_matrix_has_identity_only() {
        let g = discover_automorphisms(&rigid_matrix(6)).unwrap();
        assert_eq!(g.order(), 1);
        assert!(g.is_trivial());
    }

    #[test]
    fn cap_aborts_large_groups() {
        let e = discover_automorphisms_with_cap(&complete_graph(6), 100).unwrap_err();
        assert!(matches!(e, Error::GroupCapExceeded { cap: 100 }));
    }

    #[test]
    fn torus_group_orders() {
        // k x k torus with injective radial profile: order 8 k^2
        for k in [3usize, 5] {
            let b = synth::toroidal_grid_b(k, k, 400_000);
            let g = discover_automorphisms(&b).unwrap();
            assert_eq!(g.order(), 8 * k * k, "k = {k}");
        }
    }

    #[test]
    fn torus_8x8_structure() {
        let b = synth::toroidal_grid_b(8, 8, 400_000);
        let g = discover_automorphisms(&b).unwrap();
        assert_eq!(g.order(), 512);

        // root: transitive, single orbit
        let all = IndexSet::full(64);
        let root_orbits = orbits(&g, &all);
        assert_eq!(root_orbits.len(), 1);
        assert_eq!(root_orbits.orbits()[0].len(), 64);

        // stabilizer of cell 1 (index 0): the point group of order 8
        let stab = setwise_stabilizer(&g, &IndexSet::empty(64), &IndexSet::from_indices(64, [0]));
        assert_eq!(stab.order(), 8);
        let f = IndexSet::from_indices(64, 1..64);
        let os = orbits(&stab, &f);
        assert_eq!(os.len(), 14);
        assert_eq!(os.size_profile(), vec![(1, 1), (2, 1), (4, 9), (8, 3)]);
        // orbit of the cell at offset (0,1): {(0,1),(0,7),(1,0),(7,0)}
        assert_eq!(os.orbit_containing(1).unwrap(), &[1, 7, 8, 56]);
    }

    #[test]
    fn group_axioms_hold_on_samples() {
        let b = synth::toroidal_grid_b(5, 5, 400_000);
        let g = discover_automorphisms(&b).unwrap();
        let mut rng = StdRng::seed_from_u64(3);
        assert!(g.contains(&Permutation::identity(25)));
        for _ in 0..200 {
            let p1 = &g.elements()[rng.gen_range(0..g.order())];
            let p2 = &g.elements()[rng.gen_range(0..g.order())];
            assert!(g.contains(&p1.then(p2)));
            assert!(g.contains(&p1.inverse()));
        }
    }

    #[test]
    fn objective_invariance_under_group() {
        let b = synth::toroidal_grid_b(5, 5, 400_000);
        let g = discover_automorphisms(&b).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..1000 {
            let x = BinaryVector::from_bits((0..25).map(|_| rng.gen_bool(0.4)).collect());
            let p = &g.elements()[rng.gen_range(0..g.order())];
            let xp = x.permute(p);
            assert_eq!(
                b.quad_form_support(&xp.support()),
                b.quad_form_support(&x.support())
            );
        }
    }

    #[test]
    fn stabilizer_is_subgroup_and_refines_orbits() {
        let b = synth::toroidal_grid_b(4, 4, 400_000);
        let g = discover_automorphisms(&b).unwrap();
        let i0 = IndexSet::from_indices(16, [3]);
        let i1 = IndexSet::from_indices(16, [0, 5]);
        let stab = setwise_stabilizer(&g, &i0, &i1);
        assert!(stab.order() >= 1 && g.order().is_multiple_of(stab.order()));
        for p in stab.elements() {
            assert!(i0.iter().all(|i| i0.contains(p.apply(i))));
            assert!(i1.iter().all(|i| i1.contains(p.apply(i))));
        }
        // orbits of the stabilizer refine orbits of the full group on F
        let f = i0.union(&i1).complement();
        let fine = orbits(&stab, &f);
        let coarse = orbits(&g, &IndexSet::full(16));
        for o in fine.orbits() {
            let container = coarse.orbit_containing(o[0]).unwrap();
            assert!(o.iter().all(|i| container.contains(i)));
        }
    }

    #[test]
    fn stabilizer_extremes() {
        let b = synth::toroidal_grid_b(4, 4, 400_000);
        let g = discover_automorphisms(&b).unwrap();
        let empty = IndexSet::empty(16);
        assert_eq!(setwise_stabilizer(&g, &empty, &empty), g);
        let all = IndexSet::full(16);
        let stab = setwise_stabilizer(&g, &empty, &all);
        // stabilizing every index setwise still allows permutations within N;
        // fixing each singleton is what forces identity
        assert_eq!(stab, g);
        let mut pointwise = g.clone();
        for i in 0..16 {
            pointwise = point_stabilizer(&pointwise, i);
        }
        assert!(pointwise.is_trivial());
    }

    #[test]
    fn identity_only_group_gives_singleton_orbits() {
        let g = PermutationGroup::trivial(6);
        let os = orbits(&g, &IndexSet::full(6));
        assert_eq!(os.len(), 6);
        assert!(os.orbits().iter().all(|o| o.len() == 1));
    }

    #[test]
    fn expansion_counts() {
        let trivial = PermutationGroup::trivial(4);
        let x = BinaryVector::from_support(4, [0, 2]);
        assert_eq!(expand_solution(&trivial, &x).unwrap().len(), 1);

        let sym = discover_automorphisms(&complete_graph(4)).unwrap();
        let images = expand_solution(&sym, &x).unwrap();
        assert_eq!(images.len(), 6); // C(4,2)
        assert!(images.iter().all(|y| y.cardinality() == 2));
    }

    #[test]
    fn expansion_dimension_check() {
        let g = PermutationGroup::trivial(4);
        let x = BinaryVector::zeros(5);
        assert!(matches!(
            expand_solution(&g, &x).unwrap_err(),
            Error::DimensionMismatch {
                expected: 4,
                found: 5
            }
        ));
    }

    #[test]
    fn parallel_discovery_is_deterministic() {
        let b = synth::toroidal_grid_b(4, 4, 400_000);
        let g1 = discover_automorphisms(&b).unwrap();
        let g2 = discover_automorphisms(&b).unwrap();
        assert_eq!(g1, g2);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let g3 = pool.install(|| discover_automorphisms(&b)).unwrap();
        assert_eq!(g1, g3);
    }
}
