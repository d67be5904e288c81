//! Shared test oracles: brute-force reference computations kept independent
//! of the library's own evaluation paths, plus loaders for the optional
//! external benchmark files.

use qorbit_core::instance::{parse_qaplib, parse_solution, CardBqop, QapInstance, Solution};
use qorbit_core::matrix::SymMatrix;
use qorbit_core::subproblem::QuboInstance;
use qorbit_core::synth;

/// Exhaustive BQOP optimum over all cardinality-m supports, summing entries
/// directly rather than through the library's objective helpers.
pub fn brute_bqop_min(bqop: &CardBqop) -> i64 {
    let n = bqop.n();
    let m = bqop.cardinality();
    let b = bqop.matrix();
    let mut best = i64::MAX;
    let mut support = Vec::with_capacity(m);
    fn rec(
        b: &SymMatrix,
        n: usize,
        m: usize,
        start: usize,
        support: &mut Vec<usize>,
        best: &mut i64,
        scale: i64,
    ) {
        if support.len() == m {
            let mut acc = 0i64;
            for &i in support.iter() {
                for &j in support.iter() {
                    acc += b.get(i, j);
                }
            }
            *best = (*best).min(scale * acc);
            return;
        }
        let needed = m - support.len();
        for i in start..=(n - needed) {
            support.push(i);
            rec(b, n, m, i + 1, support, best, scale);
            support.pop();
        }
    }
    rec(b, n, m, 0, &mut support, &mut best, bqop.scale());
    best
}

/// Exhaustive QAP optimum over all permutations (small n only).
pub fn brute_qap_min(inst: &QapInstance) -> i64 {
    let n = inst.n();
    assert!(n <= 9, "factorial enumeration");
    let mut image: Vec<usize> = (0..n).collect();
    let mut best = i64::MAX;
    permute(&mut image, 0, &mut |perm| {
        let mut acc = 0i64;
        for i in 0..n {
            for k in 0..n {
                acc += inst.flows().get(i, k) * inst.distances().get(perm[i], perm[k]);
            }
        }
        best = best.min(acc);
    });
    best
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Exhaustive unconstrained QUBO minimum over all 0/1 assignments.
pub fn qubo_exhaustive_min(qubo: &QuboInstance) -> f64 {
    let f = qubo.dim();
    assert!(f <= 20, "2^F enumeration");
    let mut best = f64::INFINITY;
    for mask in 0..(1u64 << f) {
        let bits: Vec<bool> = (0..f).map(|i| mask >> i & 1 == 1).collect();
        best = best.min(qubo.value(&bits));
    }
    best
}

/// The external benchmark instance, when the user supplied it through the
/// `TAI256C_DAT` environment variable.
pub fn load_tai256c() -> Option<QapInstance> {
    let path = std::env::var("TAI256C_DAT").ok()?;
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("TAI256C_DAT={path} could not be read: {e}"));
    Some(parse_qaplib(&text).unwrap_or_else(|e| panic!("TAI256C_DAT={path} failed to parse: {e}")))
}

/// The user-supplied best-known solution (`TAI256C_SOL`), parsed against
/// dimension 256.
pub fn load_tai256c_solution() -> Option<Solution> {
    let path = std::env::var("TAI256C_SOL").ok()?;
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("TAI256C_SOL={path} could not be read: {e}"));
    Some(parse_solution(&text, 256).unwrap_or_else(|e| panic!("TAI256C_SOL={path}: {e}")))
}

/// The real benchmark distance matrix when supplied, otherwise the
/// structure-equivalent synthetic torus matrix. The boolean reports which
/// one was returned.
pub fn tai256c_b_or_synthetic() -> (SymMatrix, bool) {
    match load_tai256c() {
        Some(inst) => (inst.distances().clone(), true),
        None => (synth::toroidal_grid_b(16, 16, 400_000), false),
    }
}
