//! Deterministic instance generators for tests, benchmarks, and demos.
//!
//! None of these reproduce published benchmark data; they build instances
//! with the same *structure* (planted clone classes, toroidal grid
//! distances) so the full pipeline can be exercised without external files.

use crate::instance::{Permutation, QapInstance};
use crate::matrix::SymMatrix;
use rand::seq::index::sample;
use rand::Rng;

/// Random symmetric zero-diagonal matrix with entries drawn uniformly from
/// `0..=max_entry`.
pub fn random_symmetric(rng: &mut impl Rng, n: usize, max_entry: i64) -> SymMatrix {
    SymMatrix::from_fn(n, |i, j| {
        if i == j {
            0
        } else {
            rng.gen_range(0..=max_entry)
        }
    })
}

/// Random symmetric zero-diagonal matrix with entries in `-max_abs..=max_abs`.
pub fn random_symmetric_signed(rng: &mut impl Rng, n: usize, max_abs: i64) -> SymMatrix {
    SymMatrix::from_fn(n, |i, j| {
        if i == j {
            0
        } else {
            rng.gen_range(-max_abs..=max_abs)
        }
    })
}

/// Uniformly random permutation of `0..n` (Fisher-Yates).
pub fn random_permutation(rng: &mut impl Rng, n: usize) -> Permutation {
    let mut image: Vec<u32> = (0..n as u32).collect();
    for i in (1..n).rev() {
        image.swap(i, rng.gen_range(0..=i));
    }
    Permutation::new(image).expect("shuffle produces a permutation")
}

/// Random QAP with independent random flow and distance matrices.
pub fn random_qap(rng: &mut impl Rng, n: usize, max_entry: i64) -> QapInstance {
    let a = random_symmetric(rng, n, max_entry);
    let b = random_symmetric(rng, n, max_entry);
    QapInstance::new(a, b).expect("generated matrices are valid")
}

/// Random QAP with selector clone structure: a clique of weight `c` (drawn
/// from `1..=3`) planted on a random `m`-subset of the facilities, all other
/// flows zero. Reduces to a cardinality-`m` BQOP with scale `c`.
/// Requires `2 <= m <= n`.
pub fn random_selector_qap(rng: &mut impl Rng, n: usize, m: usize, max_b: i64) -> QapInstance {
    assert!((2..=n).contains(&m), "selector class needs 2 <= m <= n");
    let c = rng.gen_range(1..=3);
    let members = sample(rng, n, m).into_vec();
    let mut in_class = vec![false; n];
    for &i in &members {
        in_class[i] = true;
    }
    let a = SymMatrix::from_fn(n, |i, j| {
        if i != j && in_class[i] && in_class[j] {
            c
        } else {
            0
        }
    });
    let b = random_symmetric(rng, n, max_b);
    QapInstance::new(a, b).expect("generated matrices are valid")
}

/// Grey-pattern-style distance matrix on a `rows x cols` torus: cells are
/// indexed row-major, and the entry for a pair at toroidal offset
/// `(dr, dc)` is `round(numerator / (dr^2 + dc^2))`. The automorphism group
/// of any such matrix (with an injective radial profile) is the full torus
/// group of order `rows * cols * 8` for `rows == cols`: translations,
/// per-axis reflections, and the axis swap.
pub fn toroidal_grid_b(rows: usize, cols: usize, numerator: i64) -> SymMatrix {
    let n = rows * cols;
    SymMatrix::from_fn(n, |p, q| {
        if p == q {
            return 0;
        }
        let (r1, c1) = (p / cols, p % cols);
        let (r2, c2) = (q / cols, q % cols);
        let dr = r1.abs_diff(r2).min(rows - r1.abs_diff(r2));
        let dc = c1.abs_diff(c2).min(cols - c1.abs_diff(c2));
        let d2 = (dr * dr + dc * dc) as f64;
        ((numerator as f64) / d2).round() as i64
    })
}

/// A 256-facility instance with the same clone and symmetry structure as the
/// grey-pattern instance this toolkit targets: the 92-clique flow matrix
/// paired with a 16 x 16 toroidal grid distance matrix. Structure-exact,
/// data-synthetic.
pub fn tai256c_like() -> QapInstance {
    let a = crate::instance::generate_tai256c_a();
    let b = toroidal_grid_b(16, 16, 400_000);
    QapInstance::new(a, b).expect("generated matrices are valid")
}
