//! Makespan-optimal unlabeled routing by max-flow over a time-expanded graph.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::grid::GridSpace;
use crate::flow::Network;
use crate::matching::{bottleneck_sparse, hopcroft_karp};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UnlabeledOptions {
    /// Build edge gadgets that forbid swaps inside the network instead of
    /// removing them afterwards.
    pub gadget: bool,
    /// Largest horizon tried. Defaults to four times the dimension sum.
    pub max_horizon: Option<usize>,
}

/// Collision-free paths (cell indices) from every start to a distinct goal,
/// all of length `horizon + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnlabeledSolution {
    pub horizon: usize,
    pub paths: Vec<Vec<usize>>,
}

impl UnlabeledSolution {
    pub fn end(&self, i: usize) -> usize {
        *self.paths[i].last().expect("non-empty path")
    }
}

fn bounded_bfs(space: &GridSpace, src: usize, limit: u32, dist: &mut [u32], touched: &mut Vec<usize>, out: &mut Vec<(usize, u32)>) {
    let mut q = VecDeque::new();
    dist[src] = 0;
    touched.push(src);
    q.push_back(src);
    let mut nb = [0usize; 6];
    while let Some(u) = q.pop_front() {
        out.push((u, dist[u]));
        if dist[u] == limit {
            continue;
        }
        let k = space.neighbors(u, &mut nb);
        for &v in &nb[..k] {
            if dist[v] == u32::MAX {
                dist[v] = dist[u] + 1;
                touched.push(v);
                q.push_back(v);
            }
        }
    }
}

/// Bijection from starts to goals minimizing the largest shortest-path
/// distance. Returns `assignment[start] = goal index` and the bottleneck.
pub fn assign_targets(space: &GridSpace, starts: &[usize], goals: &[usize]) -> Result<(Vec<usize>, u32)> {
    let n = starts.len();
    if goals.len() != n {
        return Err(Error::Contract("unlabeled routing needs as many goals as starts".into()));
    }
    if n == 0 {
        return Ok((Vec::new(), 0));
    }
    let mut goal_of = vec![u32::MAX; space.num_cells()];
    for (k, &g) in goals.iter().enumerate() {
        goal_of[g] = k as u32;
    }
    let mut dist = vec![u32::MAX; space.num_cells()];
    let mut touched = Vec::new();
    let mut reach = Vec::new();
    let cap = space.num_cells() as u32;
    let mut limit = 0u32;
    loop {
        let mut edges: Vec<(usize, usize, u32)> = Vec::new();
        for (s, &c) in starts.iter().enumerate() {
            reach.clear();
            bounded_bfs(space, c, limit, &mut dist, &mut touched, &mut reach);
            for &(v, d) in &reach {
                if goal_of[v] != u32::MAX {
                    edges.push((s, goal_of[v] as usize, d));
                }
            }
            for &v in &touched {
                dist[v] = u32::MAX;
            }
            touched.clear();
        }
        let mut adj: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
        for &(s, g, _) in &edges {
            adj[s].push((g as u32, 0));
        }
        if hopcroft_karp(n, &adj).0 == n {
            return bottleneck_sparse(n, &edges).ok_or_else(|| Error::Infeasible("no perfect assignment".into()));
        }
        if limit >= cap {
            return Err(Error::Infeasible("goals unreachable from starts".into()));
        }
        limit = if limit == 0 { 1 } else { (limit * 2).min(cap) };
    }
}

/// Time-expanded network for one horizon.
struct Expanded {
    horizon: usize,
    cells: usize,
    id: Vec<u32>,
    count: u32,
    net: Network,
    source: u32,
    sink: u32,
}

impl Expanded {
    fn node(&self, v: usize, t: usize) -> u32 {
        self.id[t * self.cells + v]
    }

    fn build(space: &GridSpace, starts: &[usize], goals: &[usize], ds: &[u32], dg: &[u32], horizon: usize, gadget: bool) -> Expanded {
        let cells = space.num_cells();
        let h = horizon as u32;
        let mut id = vec![u32::MAX; (horizon + 1) * cells];
        let mut count = 0u32;
        for t in 0..=horizon {
            for v in space.free_cells() {
                if ds[v] <= t as u32 && dg[v] != u32::MAX && dg[v] + t as u32 <= h {
                    id[t * cells + v] = count;
                    count += 1;
                }
            }
        }
        // node k splits into in = 2k and out = 2k + 1
        let mut nodes = 2 * count;
        let source = nodes;
        let sink = nodes + 1;
        nodes += 2;
        let mut arcs: Vec<(u32, u32)> = Vec::with_capacity(count as usize * 5);
        for k in 0..count {
            arcs.push((2 * k, 2 * k + 1));
        }
        for &s in starts {
            arcs.push((source, 2 * id[s]));
        }
        for &g in goals {
            arcs.push((2 * id[horizon * cells + g] + 1, sink));
        }
        let mut nb = [0usize; 6];
        let mut gadget_dirs: Vec<(usize, usize, u32, u32)> = Vec::new();
        for t in 0..horizon {
            for v in space.free_cells() {
                let a = id[t * cells + v];
                if a == u32::MAX {
                    continue;
                }
                let stay = id[(t + 1) * cells + v];
                if stay != u32::MAX {
                    arcs.push((2 * a + 1, 2 * stay));
                }
                let k = space.neighbors(v, &mut nb);
                for &u in &nb[..k] {
                    let b = id[(t + 1) * cells + u];
                    if b == u32::MAX {
                        continue;
                    }
                    if !gadget {
                        arcs.push((2 * a + 1, 2 * b));
                    } else {
                        gadget_dirs.push((v.min(u), v.max(u), a, b));
                    }
                }
                // the reverse direction of an edge whose forward copy is pruned still needs a gadget
            }
            gadget_dirs.sort_unstable();
            let mut k = 0;
            while k < gadget_dirs.len() {
                let mut e = k;
                while e < gadget_dirs.len() && gadget_dirs[e].0 == gadget_dirs[k].0 && gadget_dirs[e].1 == gadget_dirs[k].1 {
                    e += 1;
                }
                // one shared unit for both directions of the edge
                let (gi, go) = (nodes, nodes + 1);
                nodes += 2;
                arcs.push((gi, go));
                for &(_, _, a, b) in &gadget_dirs[k..e] {
                    arcs.push((2 * a + 1, gi));
                    arcs.push((go, 2 * b));
                }
                k = e;
            }
            gadget_dirs.clear();
        }
        let net = Network::build(nodes as usize, &arcs);
        Expanded { horizon, cells, id, count, net, source, sink }
    }

    /// Pushes one unit along an existing path given as cells per time.
    fn seed(&mut self, path: &[usize]) -> bool {
        let s = self.node(path[0], 0);
        let mut hops: Vec<(u32, u32)> = vec![(self.source, 2 * s)];
        for t in 0..self.horizon {
            let (a, b) = (self.node(path[t], t), self.node(path[t + 1], t + 1));
            if a == u32::MAX || b == u32::MAX {
                return false;
            }
            hops.push((2 * a, 2 * a + 1));
            hops.push((2 * a + 1, 2 * b));
        }
        let g = self.node(path[self.horizon], self.horizon);
        hops.push((2 * g, 2 * g + 1));
        hops.push((2 * g + 1, self.sink));
        let mut arcs = Vec::with_capacity(hops.len());
        for (u, v) in hops {
            if let Some(a) = self.net.find(u, v).filter(|&a| self.net.cap[a] > 0) {
                arcs.push(a);
                continue;
            }
            // through an edge gadget
            let via = self.net.arcs(u).find_map(|a1| {
                let x = self.net.to[a1];
                if !self.net.forward[a1] || self.net.cap[a1] == 0 || x < 2 * self.count {
                    return None;
                }
                let a2 = self.net.arcs(x).find(|&a2| self.net.forward[a2] && self.net.cap[a2] > 0)?;
                let a3 = self.net.find(self.net.to[a2], v).filter(|&a3| self.net.cap[a3] > 0)?;
                Some([a1, a2, a3])
            });
            match via {
                Some(v3) => arcs.extend(v3),
                None => return false,
            }
        }
        for a in arcs {
            self.net.push(a);
        }
        true
    }

    fn paths(&self, n: usize) -> Vec<Vec<usize>> {
        let mut node_cell = vec![(u32::MAX, 0u32); self.count as usize];
        for t in 0..=self.horizon {
            for v in 0..self.cells {
                let k = self.id[t * self.cells + v];
                if k != u32::MAX {
                    node_cell[k as usize] = (v as u32, t as u32);
                }
            }
        }
        let real_nodes = 2 * self.count;
        let mut out = Vec::with_capacity(n);
        for a in self.net.arcs(self.source) {
            if !self.net.forward[a] || self.net.cap[a] > 0 {
                continue;
            }
            let mut u = self.net.to[a];
            let mut path = Vec::with_capacity(self.horizon + 1);
            loop {
                if u < real_nodes && u % 2 == 0 {
                    path.push(node_cell[(u / 2) as usize].0 as usize);
                }
                let next = self.net.arcs(u).find(|&b| self.net.forward[b] && self.net.cap[b] == 0);
                match next {
                    Some(b) if self.net.to[b] != self.sink => u = self.net.to[b],
                    _ => break,
                }
            }
            out.push(path);
        }
        out
    }
}

/// Exchanges path suffixes wherever two paths swap across an edge, so
/// both robots wait instead. One forward pass removes every swap.
pub fn uncross_swaps(paths: &mut [Vec<usize>]) {
    let Some(len) = paths.first().map(Vec::len) else { return };
    let mut at: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    for t in 0..len.saturating_sub(1) {
        at.clear();
        for (i, p) in paths.iter().enumerate() {
            at.insert(p[t], i);
        }
        for i in 0..paths.len() {
            let (u, v) = (paths[i][t], paths[i][t + 1]);
            if u == v {
                continue;
            }
            if let Some(&j) = at.get(&v) {
                if paths[j][t + 1] == u {
                    let (a, b) = if i < j { paths.split_at_mut(j) } else { paths.split_at_mut(i) };
                    let (pi, pj) = if i < j { (&mut a[i], &mut b[0]) } else { (&mut b[0], &mut a[j]) };
                    pi[t + 1..].swap_with_slice(&mut pj[t + 1..]);
                }
            }
        }
    }
}

/// Minimum-horizon collision-free routing of indistinguishable robots from
/// `starts` onto `goals`. Paths are returned in start order.
pub fn solve_unlabeled(space: &GridSpace, starts: &[usize], goals: &[usize], opts: UnlabeledOptions) -> Result<UnlabeledSolution> {
    let n = starts.len();
    let (_, lb) = assign_targets(space, starts, goals)?;
    if n == 0 {
        return Ok(UnlabeledSolution { horizon: 0, paths: Vec::new() });
    }
    let cap = opts.max_horizon.unwrap_or(4 * (space.m1() + space.m2() + space.m3()));
    let ds = space.bfs(starts.iter().copied());
    let dg = space.bfs(goals.iter().copied());
    let mut prev: Vec<Vec<usize>> = Vec::new();
    let mut horizon = lb as usize;
    loop {
        if horizon > cap {
            return Err(Error::Infeasible(format!("no unlabeled routing within {cap} steps")));
        }
        let mut ex = Expanded::build(space, starts, goals, &ds, &dg, horizon, opts.gadget);
        let mut seeded = 0;
        for p in &mut prev {
            p.push(*p.last().expect("non-empty"));
            if ex.seed(p) {
                seeded += 1;
            }
        }
        let (s, t) = (ex.source, ex.sink);
        let flow = seeded + ex.net.dinic(s, t, n - seeded);
        let paths = ex.paths(n);
        if flow == n {
            let mut by_start: Vec<Vec<usize>> = vec![Vec::new(); n];
            let mut idx = vec![u32::MAX; space.num_cells()];
            for (i, &c) in starts.iter().enumerate() {
                idx[c] = i as u32;
            }
            for p in paths {
                let i = idx[p[0]] as usize;
                by_start[i] = p;
            }
            if !opts.gadget {
                uncross_swaps(&mut by_start);
            }
            return Ok(UnlabeledSolution { horizon, paths: by_start });
        }
        prev = paths;
        horizon += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::{Executor, Fragment};
    use crate::grid::Cell;
    use std::collections::{BTreeSet, HashSet};

    fn replay(space: &GridSpace, sol: &UnlabeledSolution, starts: &[usize], goals: &[usize]) {
        let mut f = Fragment::default();
        for p in &sol.paths {
            assert_eq!(p.len(), sol.horizon + 1);
            for (t, w) in p.windows(2).enumerate() {
                if w[0] != w[1] {
                    f.push(t, w[0], w[1]);
                }
            }
        }
        let mut ex = Executor::new(space, starts).unwrap();
        ex.apply(&f).unwrap();
        let end: BTreeSet<usize> = ex.pos().iter().map(|&c| c as usize).collect();
        assert_eq!(end, goals.iter().copied().collect());
    }

    /// Joint-state BFS over unlabeled configurations, for tiny grids.
    fn brute_force(space: &GridSpace, starts: &[usize], goals: &[usize]) -> usize {
        let goal: BTreeSet<usize> = goals.iter().copied().collect();
        let mut seen = HashSet::new();
        let mut frontier = vec![starts.to_vec()];
        seen.insert(starts.iter().copied().collect::<BTreeSet<_>>());
        for t in 0.. {
            let mut next = Vec::new();
            for cfg in &frontier {
                if cfg.iter().copied().collect::<BTreeSet<_>>() == goal {
                    return t;
                }
                let opts: Vec<Vec<usize>> = cfg
                    .iter()
                    .map(|&c| {
                        let mut nb = [0usize; 6];
                        let k = space.neighbors(c, &mut nb);
                        std::iter::once(c).chain(nb[..k].iter().copied()).collect()
                    })
                    .collect();
                let mut choice = vec![0usize; cfg.len()];
                loop {
                    let to: Vec<usize> = choice.iter().zip(&opts).map(|(&k, o)| o[k]).collect();
                    let distinct = to.iter().collect::<HashSet<_>>().len() == to.len();
                    let swap = (0..cfg.len()).any(|i| (0..cfg.len()).any(|j| i != j && to[i] == cfg[j] && to[j] == cfg[i]));
                    if distinct && !swap {
                        let key: BTreeSet<usize> = to.iter().copied().collect();
                        if seen.insert(key) {
                            next.push(to);
                        }
                    }
                    let mut k = 0;
                    while k < choice.len() {
                        choice[k] += 1;
                        if choice[k] < opts[k].len() {
                            break;
                        }
                        choice[k] = 0;
                        k += 1;
                    }
                    if k == choice.len() {
                        break;
                    }
                }
            }
            frontier = next;
        }
        unreachable!()
    }

    #[test]
    fn assign_targets_bottleneck() {
        let g = GridSpace::new_2d(1, 6, &[]).unwrap();
        let (a, b) = assign_targets(&g, &[0, 1], &[4, 5]).unwrap();
        assert_eq!(b, 4);
        assert_eq!(a, vec![0, 1]);
    }

    #[test]
    fn line_shift_and_oracle() {
        let g = GridSpace::new_2d(1, 5, &[]).unwrap();
        let sol = solve_unlabeled(&g, &[0, 1], &[3, 4], UnlabeledOptions::default()).unwrap();
        assert_eq!(sol.horizon, 3);
        replay(&g, &sol, &[0, 1], &[3, 4]);
    }

    #[test]
    fn matches_joint_bfs_on_small_grids() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for (m1, m2, obs) in [(2, 3, vec![]), (3, 3, vec![Cell::new(1, 1)]), (2, 4, vec![])] {
            let g = GridSpace::new_2d(m1, m2, &obs).unwrap();
            let free: Vec<usize> = g.free_cells().collect();
            for n in 1..=3 {
                for _ in 0..6 {
                    let s: Vec<usize> = free.choose_multiple(&mut rng, n).copied().collect();
                    let t: Vec<usize> = free.choose_multiple(&mut rng, n).copied().collect();
                    let opt = brute_force(&g, &s, &t);
                    for gadget in [false, true] {
                        let sol = solve_unlabeled(&g, &s, &t, UnlabeledOptions { gadget, max_horizon: None }).unwrap();
                        assert_eq!(sol.horizon, opt, "{m1}x{m2} {s:?} -> {t:?} gadget={gadget}");
                        replay(&g, &sol, &s, &t);
                    }
                }
            }
        }
    }

    #[test]
    fn uncrossing_removes_swaps() {
        let mut p = vec![vec![0, 1, 2], vec![1, 0, 0]];
        uncross_swaps(&mut p);
        assert_eq!(p, vec![vec![0, 0, 0], vec![1, 1, 2]]);
    }
}
