use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::grid::BaseGrid;

#[derive(PartialEq)]
struct Item {
    dist: f64,
    idx: usize,
}

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Nearest marked sample for every sample, by Dijkstra over the 8-neighbour
/// graph propagating sources and measuring true distance to the source.
/// Ties go to the lower source index.
pub(crate) fn nearest_sources(grid: &BaseGrid, marked: &[bool]) -> Vec<usize> {
    let len = grid.len();
    let mut dist = vec![f64::INFINITY; len];
    let mut src = vec![usize::MAX; len];
    let mut heap = BinaryHeap::new();
    for i in (0..len).filter(|&i| marked[i]) {
        dist[i] = 0.0;
        src[i] = i;
        heap.push(Item { dist: 0.0, idx: i });
    }
    while let Some(Item { dist: d, idx }) = heap.pop() {
        if d > dist[idx] {
            continue;
        }
        let s = src[idx];
        let xs = grid.coords(s);
        for j in grid.neighbors8(idx) {
            let dj = grid.distance(grid.coords(j), xs);
            if dj < dist[j] || (dj == dist[j] && s < src[j]) {
                let improved = dj < dist[j];
                dist[j] = dj;
                src[j] = s;
                if improved {
                    heap.push(Item { dist: dj, idx: j });
                }
            }
        }
    }
    src
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Topology;

    #[test]
    fn sources_are_nearest_on_a_half_plane() {
        let g = BaseGrid::square(Topology::Bounded, -1.0, 1.0, 21).unwrap();
        let marked = g.sample(|x| x[0] < 0.0);
        let src = nearest_sources(&g, &marked);
        for i in 0..g.len() {
            let x = g.coords(i);
            let s = g.coords(src[i]);
            assert!(marked[src[i]]);
            if x[0] >= 0.0 {
                assert!((s[1] - x[1]).abs() < 1e-12);
                assert!(s[0] < 0.0 && s[0] > -0.11);
            } else {
                assert_eq!(src[i], i);
            }
        }
    }
}
