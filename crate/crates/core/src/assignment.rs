//! Minimum-cost perfect assignment on a sparse bipartite graph with
//! non-negative costs: successive shortest augmenting paths, Dijkstra over
//! reduced costs. O(n · (n + E log n)).

use std::cmp::Reverse;
use std::collections::BinaryHeap;

const UNMATCHED: usize = usize::MAX;

/// `edges[row]` lists `(column, cost)`; rows and columns are `0..edges.len()`.
/// Returns `(total cost, column assigned to each row)`, or `None` when no
/// perfect assignment exists. Heap ties break on the lower column index, so
/// the result is deterministic.
pub fn min_cost_assignment(edges: &[Vec<(usize, i64)>]) -> Option<(i64, Vec<usize>)> {
    let n = edges.len();
    debug_assert!(edges.iter().flatten().all(|&(c, w)| c < n && w >= 0));
    let mut row_pot = vec![0i64; n];
    let mut col_pot = vec![0i64; n];
    let mut col_of = vec![UNMATCHED; n];
    let mut row_of = vec![UNMATCHED; n];

    let mut dist = vec![i64::MAX; n];
    let mut via = vec![UNMATCHED; n];
    let mut settled: Vec<usize> = Vec::new();
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();

    for root in 0..n {
        for &c in &settled {
            done[c] = false;
        }
        settled.clear();
        dist.fill(i64::MAX);
        heap.clear();

        let relax = |row: usize,
                     base: i64,
                     dist: &mut [i64],
                     via: &mut [usize],
                     heap: &mut BinaryHeap<_>| {
            for &(c, w) in &edges[row] {
                let d = base + w - row_pot[row] - col_pot[c];
                if d < dist[c] {
                    dist[c] = d;
                    via[c] = row;
                    heap.push(Reverse((d, c)));
                }
            }
        };
        relax(root, 0, &mut dist, &mut via, &mut heap);

        let mut free_col = UNMATCHED;
        while let Some(Reverse((d, c))) = heap.pop() {
            if done[c] || d > dist[c] {
                continue;
            }
            done[c] = true;
            settled.push(c);
            match row_of[c] {
                UNMATCHED => {
                    free_col = c;
                    break;
                }
                r => relax(r, d, &mut dist, &mut via, &mut heap),
            }
        }
        if free_col == UNMATCHED {
            return None;
        }

        // Re-price so that the augmenting path has zero reduced cost.
        let total = dist[free_col];
        row_pot[root] += total;
        for &c in &settled {
            if c == free_col {
                continue;
            }
            let slack = total - dist[c];
            col_pot[c] -= slack;
            row_pot[row_of[c]] += slack;
        }

        let mut c = free_col;
        loop {
            let r = via[c];
            let prev = col_of[r];
            col_of[r] = c;
            row_of[c] = r;
            if r == root {
                break;
            }
            c = prev;
        }
    }

    let total = (0..n)
        .map(|r| {
            edges[r]
                .iter()
                .filter(|&&(c, _)| c == col_of[r])
                .map(|&(_, w)| w)
                .min()
                .expect("assigned column is an edge")
        })
        .sum();
    Some((total, col_of))
}
