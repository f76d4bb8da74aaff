use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::memory::{MemoryError, Pattern};

/// `count` disjoint patterns of `size` over `n` neurons. Without a seed the
/// patterns are consecutive blocks starting at 0; with one, indices come from a
/// seeded shuffle.
pub fn generate_orthogonal_patterns(
    n: usize,
    size: usize,
    count: usize,
    seed: Option<u64>,
) -> Result<Vec<Pattern>, MemoryError> {
    if size == 0 || count == 0 {
        return Err(MemoryError::Pattern("size and count must be positive".into()));
    }
    if size.checked_mul(count).is_none_or(|c| c > n) {
        return Err(MemoryError::Pattern(format!("{} patterns of size {} do not fit in {} neurons", count, size, n)));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(s) = seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(s));
    }
    order.chunks(size).take(count).map(|c| Pattern::new(c.iter().copied(), n)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapMatrix {
    /// Pairwise intersection sizes, zero on the diagonal.
    pub pairs: Vec<Vec<usize>>,
    /// Pattern sizes (what the diagonal would hold).
    pub self_overlap: Vec<usize>,
}

impl OverlapMatrix {
    pub fn is_orthogonal(&self) -> bool {
        self.pairs.iter().all(|row| row.iter().all(|&v| v == 0))
    }
}

pub fn overlap_matrix(patterns: &[Pattern]) -> OverlapMatrix {
    let k = patterns.len();
    let mut pairs = vec![vec![0; k]; k];
    for i in 0..k {
        for j in 0..k {
            if i != j {
                pairs[i][j] = patterns[i].active().intersection(patterns[j].active()).count();
            }
        }
    }
    OverlapMatrix { pairs, self_overlap: patterns.iter().map(Pattern::len).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contiguous_blocks() {
        let ps = generate_orthogonal_patterns(15, 5, 3, None).unwrap();
        let got: Vec<Vec<usize>> = ps.iter().map(Pattern::indices).collect();
        assert_eq!(got, vec![vec![0, 1, 2, 3, 4], vec![5, 6, 7, 8, 9], vec![10, 11, 12, 13, 14]]);
        let full = generate_orthogonal_patterns(4, 4, 1, None).unwrap();
        assert_eq!(full[0].indices(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn seeded_patterns_are_disjoint_and_stable() {
        let a = generate_orthogonal_patterns(20, 4, 5, Some(9)).unwrap();
        assert_eq!(a, generate_orthogonal_patterns(20, 4, 5, Some(9)).unwrap());
        assert!(overlap_matrix(&a).is_orthogonal());
        assert!(a.iter().all(|p| p.len() == 4));
    }

    #[test]
    fn infeasible_request() {
        assert!(generate_orthogonal_patterns(15, 5, 4, None).is_err());
    }

    #[test]
    fn overlaps() {
        let p1 = Pattern::new((1..13).chain([14]), 15).unwrap();
        let p2 = Pattern::new(0..14, 15).unwrap();
        let m = overlap_matrix(&[p1, p2]);
        assert_eq!(m.pairs, vec![vec![0, 12], vec![12, 0]]);
        assert_eq!(m.self_overlap, vec![13, 14]);
        assert!(!m.is_orthogonal());
    }
}
