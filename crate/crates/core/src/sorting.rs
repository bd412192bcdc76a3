//! Colorings from node orderings.
//!
//! Permuting the adjacency matrix by an ordering `P` and covering its
//! diagonal with the fewest all-zero diagonal blocks gives a proper coloring
//! with one color per block. The minimum over all orderings is the chromatic
//! number.

use itertools::Itertools;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{chromatic_number_bruteforce, Coloring, Graph};
use crate::phase::CyclicOrder;

/// Largest graph accepted by [`min_color_sorting_bruteforce`].
pub const SORTING_BRUTEFORCE_LIMIT: usize = 8;

/// Partition of an ordering into contiguous independent blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockCover {
    pub ordering: Vec<usize>,
    /// Positions in `ordering` where a block starts; always begins with 0
    /// for a non-empty ordering.
    pub boundaries: Vec<usize>,
    pub num_blocks: usize,
}

impl BlockCover {
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut ends = self.boundaries[1.min(self.boundaries.len())..].to_vec();
        ends.push(self.ordering.len());
        self.boundaries
            .iter()
            .zip(ends)
            .map(|(&a, b)| self.ordering[a..b].to_vec())
            .collect()
    }
}

fn check_permutation(n: usize, order: &[usize]) -> Result<()> {
    if order.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: order.len(),
        });
    }
    let mut seen = vec![false; n];
    for &v in order {
        if v >= n || seen[v] {
            return Err(Error::InvalidParams(format!(
                "ordering is not a permutation (node {v})"
            )));
        }
        seen[v] = true;
    }
    Ok(())
}

fn greedy_boundaries(g: &Graph, order: &[usize]) -> Vec<usize> {
    let mut boundaries = Vec::new();
    let mut block: Vec<usize> = Vec::new();
    for (i, &v) in order.iter().enumerate() {
        if i == 0 || block.iter().any(|&u| g.has_edge(u, v)) {
            boundaries.push(i);
            block.clear();
        }
        block.push(v);
    }
    boundaries
}

/// Greedy left-to-right cover: a block grows until the next node has a
/// neighbor inside it. Optimal for the fixed sequence.
pub fn block_cover_linear(g: &Graph, order: &[usize]) -> Result<BlockCover> {
    check_permutation(g.n(), order)?;
    let boundaries = greedy_boundaries(g, order);
    Ok(BlockCover {
        ordering: order.to_vec(),
        num_blocks: boundaries.len(),
        boundaries,
    })
}

/// Best linear cover over all rotations of a cyclic sequence. Ties go to
/// the rotation starting earliest in `order`.
pub fn block_cover_cyclic(g: &Graph, order: &[usize]) -> Result<BlockCover> {
    check_permutation(g.n(), order)?;
    let n = order.len();
    let mut best: Option<(usize, Vec<usize>)> = None;
    let mut rotated = Vec::with_capacity(n);
    for start in 0..n.max(1) {
        rotated.clear();
        rotated.extend(order[start..].iter().chain(&order[..start]));
        let b = greedy_boundaries(g, &rotated);
        if best.as_ref().is_none_or(|(_, bb)| b.len() < bb.len()) {
            best = Some((start, b));
        }
    }
    let (start, boundaries) = best.unwrap_or((0, Vec::new()));
    let ordering: Vec<usize> = order[start.min(n)..]
        .iter()
        .chain(&order[..start.min(n)])
        .copied()
        .collect();
    Ok(BlockCover {
        ordering,
        num_blocks: boundaries.len(),
        boundaries,
    })
}

/// [`block_cover_cyclic`] on the sequence of a [`CyclicOrder`].
pub fn block_cover_of(g: &Graph, co: &CyclicOrder) -> Result<BlockCover> {
    block_cover_cyclic(g, &co.order)
}

/// Color `i` for every node of block `i`.
pub fn cover_to_coloring(bc: &BlockCover) -> Coloring {
    let mut assignment = vec![0; bc.ordering.len()];
    for (color, block) in bc.blocks().into_iter().enumerate() {
        for v in block {
            assignment[v] = color;
        }
    }
    let mut c = Coloring::from_assignment(assignment);
    c.num_colors = bc.num_blocks;
    c.order_certificate = Some(bc.ordering.clone());
    c
}

/// Exhaustive minimum of the block count over all `n!` orderings. Returns a
/// minimizing ordering (lexicographically first) and the minimum.
pub fn min_color_sorting_bruteforce(g: &Graph) -> Result<(Vec<usize>, usize)> {
    let n = g.n();
    if n > SORTING_BRUTEFORCE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: SORTING_BRUTEFORCE_LIMIT,
        });
    }
    if n == 0 {
        return Ok((Vec::new(), 0));
    }
    let mut best = (Vec::new(), usize::MAX);
    for perm in (0..n).permutations(n) {
        let k = greedy_boundaries(g, &perm).len();
        if k < best.1 {
            best = (perm, k);
        }
    }
    debug_assert_eq!(best.1, chromatic_number_bruteforce(g)?);
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete, complete_partite, cycle, path, validate_coloring};

    #[test]
    fn path_linear_examples() {
        let g = path(3).unwrap();
        let bc = block_cover_linear(&g, &[0, 2, 1]).unwrap();
        assert_eq!(bc.blocks(), vec![vec![0, 2], vec![1]]);
        assert_eq!(bc.num_blocks, 2);
        let bc = block_cover_linear(&g, &[0, 1, 2]).unwrap();
        assert_eq!(bc.blocks(), vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn planted_order_of_k22() {
        let g = complete_partite(&[2, 2]).unwrap();
        assert_eq!(block_cover_linear(&g, &[0, 1, 2, 3]).unwrap().num_blocks, 2);
    }

    #[test]
    fn cyclic_path_picks_rotation() {
        let g = path(3).unwrap();
        let bc = block_cover_cyclic(&g, &[0, 1, 2]).unwrap();
        assert_eq!(bc.ordering, vec![1, 2, 0]);
        assert_eq!(bc.blocks(), vec![vec![1], vec![2, 0]]);
    }

    #[test]
    fn triangle_needs_three() {
        let g = complete(3).unwrap();
        for order in (0..3).permutations(3) {
            assert_eq!(block_cover_cyclic(&g, &order).unwrap().num_blocks, 3);
        }
    }

    #[test]
    fn k555_planted_cyclic() {
        let g = complete_partite(&[5, 5, 5]).unwrap();
        let order: Vec<usize> = (0..15).collect();
        let bc = block_cover_cyclic(&g, &order).unwrap();
        assert_eq!(bc.num_blocks, 3);
        // any rotation of the planted order works too
        let rot: Vec<usize> = (3..15).chain(0..3).collect();
        assert_eq!(block_cover_cyclic(&g, &rot).unwrap().num_blocks, 3);
        assert_eq!(block_cover_linear(&g, &rot).unwrap().num_blocks, 4);
    }

    #[test]
    fn coloring_is_proper() {
        let g = complete_partite(&[2, 2]).unwrap();
        let c = cover_to_coloring(&block_cover_linear(&g, &[0, 1, 2, 3]).unwrap());
        assert_eq!(c.num_colors, 2);
        assert!(validate_coloring(&g, &c).unwrap());
        let g = cycle(5).unwrap();
        let bc = block_cover_linear(&g, &[0, 1, 2, 3, 4]).unwrap();
        let c = cover_to_coloring(&bc);
        assert!(validate_coloring(&g, &c).unwrap());
    }

    #[test]
    fn bruteforce_examples() {
        assert_eq!(
            min_color_sorting_bruteforce(&path(3).unwrap()).unwrap().1,
            2
        );
        assert_eq!(
            min_color_sorting_bruteforce(&complete(3).unwrap())
                .unwrap()
                .1,
            3
        );
        assert_eq!(
            min_color_sorting_bruteforce(&cycle(5).unwrap()).unwrap().1,
            3
        );
        assert!(matches!(
            min_color_sorting_bruteforce(&path(9).unwrap()),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn rejects_non_permutations() {
        let g = path(3).unwrap();
        assert!(block_cover_linear(&g, &[0, 0, 1]).is_err());
        assert!(block_cover_cyclic(&g, &[0, 1]).is_err());
    }
}
