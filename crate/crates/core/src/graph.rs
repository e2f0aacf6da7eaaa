//! Connectivity, bridges, separating cutsets and line-graph neighbourhoods.
//!
//! Branch subsets are passed as a `closed` mask indexed by branch id.

use std::collections::VecDeque;

use crate::grid::Grid;

/// Buses connected to the reference bus and the rest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnergizedSet {
    mask: Vec<bool>,
}

impl EnergizedSet {
    pub fn from_mask(mask: Vec<bool>) -> Self {
        Self { mask }
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_energized(&self, bus: usize) -> bool {
        self.mask[bus]
    }

    pub fn energized(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| self.mask[i]).collect()
    }

    pub fn de_energized(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| !self.mask[i]).collect()
    }

    pub fn all_energized(&self) -> bool {
        self.mask.iter().all(|&b| b)
    }
}

fn reach(grid: &Grid, closed: &[bool], root: usize, mark: &mut [usize], label: usize) {
    let mut stack = vec![root];
    mark[root] = label;
    while let Some(i) = stack.pop() {
        for e in grid.incident(i) {
            if !closed[e] {
                continue;
            }
            let j = grid.branch(e).other_end(i);
            if mark[j] == usize::MAX {
                mark[j] = label;
                stack.push(j);
            }
        }
    }
}

/// Component label of every bus in the subgraph of closed branches.
/// Labels are assigned in order of the lowest bus index of each component.
pub fn component_labels(grid: &Grid, closed: &[bool]) -> (Vec<usize>, usize) {
    let n = grid.num_buses();
    let mut mark = vec![usize::MAX; n];
    let mut count = 0;
    for i in 0..n {
        if mark[i] == usize::MAX {
            reach(grid, closed, i, &mut mark, count);
            count += 1;
        }
    }
    (mark, count)
}

pub fn component_count(grid: &Grid, closed: &[bool]) -> usize {
    component_labels(grid, closed).1
}

pub fn is_connected(grid: &Grid, closed: &[bool]) -> bool {
    component_count(grid, closed) == 1
}

/// Component of the reference bus in the subgraph of closed branches.
pub fn energized_component(grid: &Grid, closed: &[bool]) -> EnergizedSet {
    let mut mark = vec![usize::MAX; grid.num_buses()];
    reach(grid, closed, grid.reference(), &mut mark, 0);
    EnergizedSet::from_mask(mark.into_iter().map(|m| m == 0).collect())
}

/// Closed branches whose removal splits their component. Sorted by id.
///
/// Iterative lowlink traversal; parallel branches are never bridges because
/// only the exact tree branch is skipped when returning to the parent.
pub fn find_bridges(grid: &Grid, closed: &[bool]) -> Vec<usize> {
    let n = grid.num_buses();
    let mut order = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut bridges = Vec::new();
    let mut timer = 0;
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| grid.incident(i).filter(|&e| closed[e]).collect())
        .collect();

    for root in 0..n {
        if order[root] != usize::MAX {
            continue;
        }
        order[root] = timer;
        low[root] = timer;
        timer += 1;
        // (bus, branch used to enter, next adjacency position)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        while let Some(top) = stack.last_mut() {
            let (u, via, pos) = *top;
            if pos < adj[u].len() {
                top.2 += 1;
                let e = adj[u][pos];
                if e == via {
                    continue;
                }
                let w = grid.branch(e).other_end(u);
                if order[w] == usize::MAX {
                    order[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push((w, e, 0));
                } else {
                    low[u] = low[u].min(order[w]);
                }
            } else {
                stack.pop();
                if let Some(&(parent, _, _)) = stack.last() {
                    low[parent] = low[parent].min(low[u]);
                    if low[u] > order[parent] {
                        bridges.push(via);
                    }
                }
            }
        }
    }
    bridges.sort_unstable();
    bridges
}

/// Branch set separating a bus from the reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cutset {
    pub branches: Vec<usize>,
    pub separated_bus: usize,
}

/// Frontier of the closed-subgraph component containing `bus`, or `None` when
/// `bus` is connected to the reference. Every returned branch is open.
pub fn separating_cutset(grid: &Grid, closed: &[bool], bus: usize) -> Option<Cutset> {
    let mut mark = vec![usize::MAX; grid.num_buses()];
    reach(grid, closed, bus, &mut mark, 0);
    if mark[grid.reference()] == 0 {
        return None;
    }
    let branches = grid
        .branches()
        .iter()
        .filter(|br| (mark[br.origin] == 0) != (mark[br.destination] == 0))
        .map(|br| br.id)
        .collect();
    Some(Cutset {
        branches,
        separated_bus: bus,
    })
}

fn line_neighbours(grid: &Grid, e: usize) -> impl Iterator<Item = usize> + '_ {
    let br = grid.branch(e);
    grid.incident(br.origin).chain(grid.incident(br.destination))
}

/// Line-graph distances from branch `e`, stopping after `limit` hops.
fn line_distances(grid: &Grid, e: usize, limit: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; grid.num_branches()];
    dist[e] = 0;
    let mut queue = VecDeque::from([e]);
    while let Some(a) = queue.pop_front() {
        if dist[a] == limit {
            continue;
        }
        for b in line_neighbours(grid, a) {
            if dist[b] == usize::MAX {
                dist[b] = dist[a] + 1;
                queue.push_back(b);
            }
        }
    }
    dist
}

/// Branches within line-graph distance `l` of branch `e` (sorted, includes `e`).
pub fn hop(grid: &Grid, e: usize, l: usize) -> Vec<usize> {
    line_distances(grid, e, l)
        .iter()
        .enumerate()
        .filter(|(_, d)| **d != usize::MAX)
        .map(|(b, _)| b)
        .collect()
}

/// Largest line-graph eccentricity over all branches of the full grid.
pub fn line_graph_diameter(grid: &Grid) -> usize {
    (0..grid.num_branches())
        .map(|e| {
            line_distances(grid, e, usize::MAX)
                .into_iter()
                .filter(|d| *d != usize::MAX)
                .max()
                .unwrap_or(0)
        })
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Branch, Bus};

    pub(crate) fn grid_from_edges(n: usize, edges: &[(usize, usize)]) -> Grid {
        let buses = (0..n)
            .map(|i| Bus {
                id: i + 1,
                pg_ref: 0.0,
                pd_ref: 0.0,
            })
            .collect();
        let branches = edges
            .iter()
            .enumerate()
            .map(|(id, &(o, d))| Branch {
                id,
                origin: o,
                destination: d,
                susceptance: 1.0,
                thermal_limit: 1.0,
            })
            .collect();
        Grid::new("t", buses, branches, 0, 100.0).unwrap()
    }

    #[test]
    fn tree_all_bridges_cycle_none() {
        let tree = grid_from_edges(5, &[(0, 1), (1, 2), (1, 3), (3, 4)]);
        assert_eq!(find_bridges(&tree, &[true; 4]), vec![0, 1, 2, 3]);
        let ring = grid_from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        assert!(find_bridges(&ring, &[true; 5]).is_empty());
    }

    #[test]
    fn parallel_branches_are_not_bridges() {
        let g = grid_from_edges(3, &[(0, 1), (0, 1), (1, 2)]);
        assert_eq!(find_bridges(&g, &[true; 3]), vec![2]);
        assert_eq!(find_bridges(&g, &[true, false, true]), vec![0, 2]);
    }

    #[test]
    fn energized_after_isolation() {
        let g = grid_from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (1, 3)]);
        let all = energized_component(&g, &[true; 5]);
        assert!(all.all_energized());
        let iso = energized_component(&g, &[true, false, false, true, true]);
        assert_eq!(iso.de_energized(), vec![2]);
    }

    #[test]
    fn cutset_is_frontier() {
        let g = grid_from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (1, 3)]);
        assert_eq!(separating_cutset(&g, &[true; 5], 2), None);
        let cut = separating_cutset(&g, &[true, false, false, true, true], 2).unwrap();
        assert_eq!(cut.branches, vec![1, 2]);
        assert_eq!(cut.separated_bus, 2);
    }

    #[test]
    fn hop_rings() {
        // path 0-1-2-3-4 as branches 0..4
        let g = grid_from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        assert_eq!(hop(&g, 0, 0), vec![0]);
        assert_eq!(hop(&g, 1, 1), vec![0, 1, 2]);
        assert_eq!(hop(&g, 0, 2), vec![0, 1, 2]);
        assert_eq!(line_graph_diameter(&g), 3);
        assert_eq!(hop(&g, 0, 3), vec![0, 1, 2, 3]);
    }
}
