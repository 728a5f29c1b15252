//! Color/row multigraphs, perfect-matching decomposition and bottleneck assignment.

use num_traits::PrimInt;

use crate::error::{Error, Result};
use crate::flow::Network;

const NIL: u32 = u32::MAX;

/// Maximum bipartite matching with Hopcroft-Karp. `adj[l]` lists `(right, edge)`
/// pairs; the result maps each left node to the matched `(right, edge)`.
pub fn hopcroft_karp(n_right: usize, adj: &[Vec<(u32, u32)>]) -> (usize, Vec<Option<(u32, u32)>>) {
    let n_left = adj.len();
    let mut match_l: Vec<(u32, u32)> = vec![(NIL, NIL); n_left];
    let mut match_r: Vec<u32> = vec![NIL; n_right];
    let mut dist = vec![u32::MAX; n_left];
    let mut it = vec![0usize; n_left];
    let mut queue = Vec::with_capacity(n_left);
    let mut stack: Vec<u32> = Vec::new();
    let mut size = 0;

    // cheap greedy start
    for (u, nb) in adj.iter().enumerate() {
        for &(v, e) in nb {
            if match_r[v as usize] == NIL {
                match_r[v as usize] = u as u32;
                match_l[u] = (v, e);
                size += 1;
                break;
            }
        }
    }

    loop {
        queue.clear();
        for u in 0..n_left {
            if match_l[u].0 == NIL {
                dist[u] = 0;
                queue.push(u as u32);
            } else {
                dist[u] = u32::MAX;
            }
        }
        let mut found = false;
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head] as usize;
            head += 1;
            for &(v, _) in &adj[u] {
                let w = match_r[v as usize];
                if w == NIL {
                    found = true;
                } else if dist[w as usize] == u32::MAX {
                    dist[w as usize] = dist[u] + 1;
                    queue.push(w);
                }
            }
        }
        if !found {
            break;
        }
        it.iter_mut().for_each(|x| *x = 0);
        for root in 0..n_left {
            if match_l[root].0 != NIL || dist[root] != 0 {
                continue;
            }
            stack.clear();
            stack.push(root as u32);
            while let Some(&u) = stack.last() {
                let u = u as usize;
                if it[u] == adj[u].len() {
                    dist[u] = u32::MAX;
                    stack.pop();
                    if let Some(&p) = stack.last() {
                        it[p as usize] += 1;
                    }
                    continue;
                }
                let (v, _) = adj[u][it[u]];
                let w = match_r[v as usize];
                if w == NIL {
                    for &x in &stack {
                        let x = x as usize;
                        let (v, e) = adj[x][it[x]];
                        match_l[x] = (v, e);
                        match_r[v as usize] = x as u32;
                    }
                    size += 1;
                    break;
                } else if dist[w as usize] == dist[u].wrapping_add(1) && dist[w as usize] != u32::MAX {
                    stack.push(w);
                } else {
                    it[u] += 1;
                }
            }
        }
    }
    let out = match_l.into_iter().map(|(v, e)| (v != NIL).then_some((v, e))).collect();
    (size, out)
}

/// One edge of the color/row multigraph: a robot of color `color` in row `row`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub color: usize,
    pub row: usize,
    pub robot: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColorRowMultigraph {
    pub side: usize,
    pub degree: usize,
    pub edges: Vec<Edge>,
}

impl ColorRowMultigraph {
    /// Checks that every color and every row has the same degree.
    pub fn new(side: usize, mut edges: Vec<Edge>) -> Result<Self> {
        if side == 0 {
            return Err(Error::Regularity("empty table".into()));
        }
        let mut deg_c = vec![0usize; side];
        let mut deg_r = vec![0usize; side];
        for e in &edges {
            if e.color >= side || e.row >= side {
                return Err(Error::Regularity(format!("edge {e:?} outside {side} nodes")));
            }
            deg_c[e.color] += 1;
            deg_r[e.row] += 1;
        }
        let d = deg_r[0];
        if deg_c.iter().chain(&deg_r).any(|&x| x != d) || d == 0 {
            return Err(Error::Regularity("color and row degrees differ".into()));
        }
        edges.sort_by_key(|e| (e.robot, e.row));
        if edges.windows(2).any(|w| w[0].robot == w[1].robot) {
            return Err(Error::Regularity("robot listed twice".into()));
        }
        Ok(ColorRowMultigraph { side, degree: d, edges })
    }
}

/// Builds the multigraph from a fully occupied table: `table[row][col] = (robot, color)`.
pub fn build_color_row_graph(table: &[Vec<(usize, usize)>]) -> Result<ColorRowMultigraph> {
    let m = table.len();
    let w = table.first().map_or(0, |r| r.len());
    if table.iter().any(|r| r.len() != w) {
        return Err(Error::Regularity("ragged table".into()));
    }
    let edges = table
        .iter()
        .enumerate()
        .flat_map(|(row, cells)| cells.iter().map(move |&(robot, color)| Edge { color, row, robot }))
        .collect();
    ColorRowMultigraph::new(m, edges)
}

/// `matchings[c]` is a perfect matching, listed by row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchingSet {
    pub matchings: Vec<Vec<Edge>>,
}

impl MatchingSet {
    /// Checks perfection of each matching and exact coverage of `g`.
    pub fn verify(&self, g: &ColorRowMultigraph) -> bool {
        if self.matchings.len() != g.degree {
            return false;
        }
        for m in &self.matchings {
            if m.len() != g.side {
                return false;
            }
            let mut rows = vec![false; g.side];
            let mut cols = vec![false; g.side];
            for e in m {
                if rows[e.row] || cols[e.color] {
                    return false;
                }
                rows[e.row] = true;
                cols[e.color] = true;
            }
        }
        let mut all: Vec<Edge> = self.matchings.iter().flatten().copied().collect();
        all.sort_by_key(|e| (e.robot, e.row));
        all == g.edges
    }

    /// Column index of each robot, indexed by robot id.
    pub fn column_of(&self, n_robots: usize) -> Vec<usize> {
        let mut out = vec![usize::MAX; n_robots];
        for (c, m) in self.matchings.iter().enumerate() {
            for e in m {
                out[e.robot] = c;
            }
        }
        out
    }
}

fn perfect_on(side: usize, edges: &[Edge], alive: &[bool]) -> Option<Vec<usize>> {
    let mut adj: Vec<Vec<(u32, u32)>> = vec![Vec::new(); side];
    for (k, e) in edges.iter().enumerate() {
        if alive[k] {
            adj[e.row].push((e.color as u32, k as u32));
        }
    }
    let (size, m) = hopcroft_karp(side, &adj);
    (size == side).then(|| m.into_iter().map(|x| x.expect("perfect").1 as usize).collect())
}

/// Splits a d-regular multigraph into d perfect matchings by repeated
/// maximum matching on the residual graph.
pub fn decompose_into_matchings(g: &ColorRowMultigraph) -> Result<MatchingSet> {
    let mut alive = vec![true; g.edges.len()];
    let mut matchings = Vec::with_capacity(g.degree);
    for _ in 0..g.degree {
        let picked = perfect_on(g.side, &g.edges, &alive)
            .ok_or_else(|| Error::Regularity("residual graph has no perfect matching".into()))?;
        let mut m: Vec<Edge> = picked.iter().map(|&k| g.edges[k]).collect();
        for &k in &picked {
            alive[k] = false;
        }
        m.sort_by_key(|e| e.row);
        matchings.push(m);
    }
    Ok(MatchingSet { matchings })
}

/// Square cost matrix in row-major order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostMatrix<T> {
    pub n: usize,
    pub costs: Vec<T>,
}

impl<T: PrimInt> CostMatrix<T> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut costs = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                costs.push(f(r, c));
            }
        }
        CostMatrix { n, costs }
    }

    pub fn at(&self, r: usize, c: usize) -> T {
        self.costs[r * self.n + c]
    }
}

/// Bottleneck assignment over a sparse edge list `(left, right, cost)`.
/// Returns the left-to-right assignment and its bottleneck, or `None`
/// when no perfect matching exists.
pub fn bottleneck_sparse<T: PrimInt>(n: usize, edges: &[(usize, usize, T)]) -> Option<(Vec<usize>, T)> {
    if n == 0 {
        return Some((Vec::new(), T::zero()));
    }
    let mut values: Vec<T> = edges.iter().map(|e| e.2).collect();
    values.sort_unstable();
    values.dedup();
    let attempt = |th: T| -> Option<Vec<usize>> {
        let mut adj: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
        for (k, &(l, r, c)) in edges.iter().enumerate() {
            if c <= th {
                adj[l].push((r as u32, k as u32));
            }
        }
        let (size, m) = hopcroft_karp(n, &adj);
        (size == n).then(|| m.into_iter().map(|x| x.expect("perfect").0 as usize).collect())
    };
    let top = *values.last()?;
    attempt(top)?;
    let (mut lo, mut hi) = (0usize, values.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if attempt(values[mid]).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    attempt(values[lo]).map(|a| (a, values[lo]))
}

/// Edge subset in which every node on both sides has degree `q`, minimizing
/// the largest selected cost. Edges are `(left, right, cost)`; both sides
/// have `n` nodes. Returns the chosen edge indices and the bottleneck.
pub fn bottleneck_factor(n: usize, edges: &[(usize, usize, u32)], q: usize) -> Option<(Vec<usize>, u32)> {
    if n == 0 || q == 0 {
        return Some((Vec::new(), 0));
    }
    let mut values: Vec<u32> = edges.iter().map(|e| e.2).collect();
    values.sort_unstable();
    values.dedup();
    // nodes: source 0, sink 1, left 2.., right 2+n..
    let attempt = |th: u32| -> Option<Vec<usize>> {
        let mut arcs: Vec<(u32, u32)> = Vec::with_capacity(2 * n * q + edges.len());
        let mut used = Vec::new();
        for (k, &(l, r, c)) in edges.iter().enumerate() {
            if c <= th {
                arcs.push(((2 + l) as u32, (2 + n + r) as u32));
                used.push(k);
            }
        }
        for v in 0..n {
            for _ in 0..q {
                arcs.push((0, (2 + v) as u32));
                arcs.push(((2 + n + v) as u32, 1));
            }
        }
        let mut net = Network::build(2 + 2 * n, &arcs);
        if net.dinic(0, 1, n * q) < n * q {
            return None;
        }
        Some(used.iter().enumerate().filter(|&(i, _)| net.cap[net.slot[i] as usize] == 0).map(|(_, &k)| k).collect())
    };
    let top = *values.last()?;
    attempt(top)?;
    let (mut lo, mut hi) = (0usize, values.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if attempt(values[mid]).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    attempt(values[lo]).map(|a| (a, values[lo]))
}

/// Row-to-column bijection minimizing the largest selected cost.
pub fn bottleneck_perfect_matching<T: PrimInt>(m: &CostMatrix<T>) -> (Vec<usize>, T) {
    let edges: Vec<(usize, usize, T)> =
        (0..m.n).flat_map(|r| (0..m.n).map(move |c| (r, c))).map(|(r, c)| (r, c, m.at(r, c))).collect();
    bottleneck_sparse(m.n, &edges).expect("complete bipartite graph has a perfect matching")
}

/// Cost weighting `λ|c - cur| + (1-λ)|c - goal|` for placing a robot in a column.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lambda {
    /// λ = 0: distance from the column to the robot's goal column.
    Goal,
    /// λ = 1: distance from the column to the robot's current column.
    Current,
}

pub type LbaCost = u32;

fn lba_cost(lambda: Lambda, c: usize, cur: usize, goal: usize) -> LbaCost {
    (match lambda {
        Lambda::Goal => c.abs_diff(goal),
        Lambda::Current => c.abs_diff(cur),
    }) as LbaCost
}

/// Greedy per-column bottleneck matchings followed by a bottleneck
/// reassignment of matchings to columns. `cur_col` and `goal_col` are
/// indexed by robot id.
pub fn lba_assign(
    g: &ColorRowMultigraph,
    cur_col: &[usize],
    goal_col: &[usize],
    lambda: Lambda,
) -> Result<MatchingSet> {
    let m = g.side;
    let d = g.degree;
    let mut alive = vec![true; g.edges.len()];
    let mut raw: Vec<Vec<Edge>> = Vec::with_capacity(d);
    let mut best: Vec<Option<(LbaCost, usize)>> = vec![None; m * m];
    for c in 0..d {
        best.iter_mut().for_each(|b| *b = None);
        // edges are sorted by robot id, so the first minimum wins ties
        for (k, e) in g.edges.iter().enumerate() {
            if !alive[k] {
                continue;
            }
            let cost = lba_cost(lambda, c, cur_col[e.robot], goal_col[e.robot]);
            let slot = &mut best[e.row * m + e.color];
            if slot.is_none_or(|(bc, _)| cost < bc) {
                *slot = Some((cost, k));
            }
        }
        let sparse: Vec<(usize, usize, LbaCost)> = (0..m * m)
            .filter_map(|i| best[i].map(|(cost, _)| (i / m, i % m, cost)))
            .collect();
        let (assign, _) = bottleneck_sparse(m, &sparse)
            .ok_or_else(|| Error::Regularity("per-column bottleneck matching is infeasible".into()))?;
        let mut mt = Vec::with_capacity(m);
        for (row, &color) in assign.iter().enumerate() {
            let (_, k) = best[row * m + color].expect("edge exists");
            alive[k] = false;
            mt.push(g.edges[k]);
        }
        raw.push(mt);
    }
    let cm = CostMatrix::from_fn(d, |k, c| {
        raw[k].iter().map(|e| lba_cost(lambda, c, cur_col[e.robot], goal_col[e.robot])).max().unwrap_or(0)
    });
    let (to_col, _) = bottleneck_perfect_matching(&cm);
    let mut matchings = vec![Vec::new(); d];
    for (k, mt) in raw.into_iter().enumerate() {
        matchings[to_col[k]] = mt;
    }
    Ok(MatchingSet { matchings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_bottleneck(m: &CostMatrix<u32>) -> u32 {
        fn rec(m: &CostMatrix<u32>, r: usize, used: &mut Vec<bool>, cur: u32, best: &mut u32) {
            if cur >= *best {
                return;
            }
            if r == m.n {
                *best = cur;
                return;
            }
            for c in 0..m.n {
                if !used[c] {
                    used[c] = true;
                    rec(m, r + 1, used, cur.max(m.at(r, c)), best);
                    used[c] = false;
                }
            }
        }
        let mut best = u32::MAX;
        rec(m, 0, &mut vec![false; m.n], 0, &mut best);
        best
    }

    #[test]
    fn hk_finds_perfect_matching_requiring_augmentation() {
        let adj = vec![vec![(0, 0), (1, 1)], vec![(0, 2)], vec![(1, 3), (2, 4)]];
        let (size, m) = hopcroft_karp(3, &adj);
        assert_eq!(size, 3);
        assert_eq!(m[1], Some((0, 2)));
    }

    #[test]
    fn one_regular_is_itself() {
        let edges = vec![Edge { color: 1, row: 0, robot: 0 }, Edge { color: 0, row: 1, robot: 1 }];
        let g = ColorRowMultigraph::new(2, edges.clone()).unwrap();
        let ms = decompose_into_matchings(&g).unwrap();
        assert_eq!(ms.matchings.len(), 1);
        assert!(ms.verify(&g));
    }

    #[test]
    fn sorted_table_gives_parallel_edges() {
        let table: Vec<Vec<(usize, usize)>> = (0..3).map(|r| (0..4).map(|c| (r * 4 + c, r)).collect()).collect();
        let g = build_color_row_graph(&table).unwrap();
        assert_eq!(g.degree, 4);
        assert!(g.edges.iter().all(|e| e.color == e.row));
        let ms = decompose_into_matchings(&g).unwrap();
        assert!(ms.verify(&g));
    }

    #[test]
    fn irregular_rejected() {
        let table = vec![vec![(0, 0), (1, 0)], vec![(2, 0), (3, 1)]];
        assert!(build_color_row_graph(&table).is_err());
    }

    #[test]
    fn bottleneck_identity_and_constant() {
        let m = CostMatrix::from_fn(4, |r, c| u32::from(r != c));
        let (a, b) = bottleneck_perfect_matching(&m);
        assert_eq!(a, vec![0, 1, 2, 3]);
        assert_eq!(b, 0);
        let m = CostMatrix::from_fn(4, |_, _| 9u32);
        assert_eq!(bottleneck_perfect_matching(&m).1, 9);
    }

    #[test]
    fn bottleneck_matches_enumeration_small() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for n in 1..=6 {
            for _ in 0..20 {
                let m = CostMatrix::from_fn(n, |_, _| rng.gen_range(0..30u32));
                let (a, b) = bottleneck_perfect_matching(&m);
                let got = (0..n).map(|r| m.at(r, a[r])).max().unwrap();
                assert_eq!(got, b);
                assert_eq!(b, brute_bottleneck(&m));
            }
        }
    }

    #[test]
    fn two_factor_with_small_bottleneck() {
        // 3 nodes per side; the cheap edges form a 2-regular subgraph
        let mut edges = Vec::new();
        for l in 0..3 {
            edges.push((l, l, 1));
            edges.push((l, (l + 1) % 3, 2));
            edges.push((l, (l + 2) % 3, 9));
        }
        let (picked, b) = bottleneck_factor(3, &edges, 2).unwrap();
        assert_eq!(b, 2);
        assert_eq!(picked.len(), 6);
        let mut deg = [0; 6];
        for &k in &picked {
            deg[edges[k].0] += 1;
            deg[3 + edges[k].1] += 1;
        }
        assert!(deg.iter().all(|&d| d == 2));
        assert!(bottleneck_factor(2, &[(0, 0, 1), (1, 1, 1)], 2).is_none());
    }

    #[test]
    fn lba_sorted_table_has_zero_bottleneck() {
        // robot r*3+c sits in row r, column c, and its goal column is c
        let table: Vec<Vec<(usize, usize)>> = (0..3).map(|r| (0..3).map(|c| (r * 3 + c, r)).collect()).collect();
        let g = build_color_row_graph(&table).unwrap();
        let cols: Vec<usize> = (0..9).map(|i| i % 3).collect();
        let ms = lba_assign(&g, &cols, &cols, Lambda::Goal).unwrap();
        assert!(ms.verify(&g));
        for (c, m) in ms.matchings.iter().enumerate() {
            assert!(m.iter().all(|e| cols[e.robot] == c));
        }
    }
}
