//! Unit-capacity max-flow shared by the matching and routing modules.

use std::collections::VecDeque;

/// Unit-capacity residual graph in CSR form.
pub(crate) struct Network {
    pub head: Vec<u32>,
    pub to: Vec<u32>,
    pub rev: Vec<u32>,
    pub cap: Vec<u8>,
    pub forward: Vec<bool>,
    /// Forward slot of each input arc.
    pub slot: Vec<u32>,
}

impl Network {
    pub fn build(nodes: usize, arcs: &[(u32, u32)]) -> Network {
        let mut deg = vec![0u32; nodes + 1];
        for &(a, b) in arcs {
            deg[a as usize + 1] += 1;
            deg[b as usize + 1] += 1;
        }
        for i in 0..nodes {
            deg[i + 1] += deg[i];
        }
        let head = deg.clone();
        let mut fill = deg;
        let m = arcs.len() * 2;
        let mut to = vec![0u32; m];
        let mut rev = vec![0u32; m];
        let mut cap = vec![0u8; m];
        let mut forward = vec![false; m];
        let mut slot = Vec::with_capacity(arcs.len());
        for &(a, b) in arcs {
            let i = fill[a as usize];
            fill[a as usize] += 1;
            let j = fill[b as usize];
            fill[b as usize] += 1;
            to[i as usize] = b;
            to[j as usize] = a;
            rev[i as usize] = j;
            rev[j as usize] = i;
            cap[i as usize] = 1;
            forward[i as usize] = true;
            slot.push(i);
        }
        Network { head, to, rev, cap, forward, slot }
    }

    pub fn arcs(&self, u: u32) -> std::ops::Range<usize> {
        self.head[u as usize] as usize..self.head[u as usize + 1] as usize
    }

    pub fn find(&self, u: u32, v: u32) -> Option<usize> {
        self.arcs(u).find(|&a| self.forward[a] && self.to[a] == v)
    }

    pub fn push(&mut self, a: usize) {
        self.cap[a] -= 1;
        let r = self.rev[a] as usize;
        self.cap[r] += 1;
    }

    pub fn dinic(&mut self, s: u32, t: u32, want: usize) -> usize {
        let n = self.head.len() - 1;
        let mut level = vec![u32::MAX; n];
        let mut it = vec![0usize; n];
        let mut total = 0;
        let mut q = VecDeque::new();
        let mut stack: Vec<usize> = Vec::new();
        while total < want {
            level.fill(u32::MAX);
            level[s as usize] = 0;
            q.clear();
            q.push_back(s);
            while let Some(u) = q.pop_front() {
                for a in self.arcs(u) {
                    let v = self.to[a];
                    if self.cap[a] > 0 && level[v as usize] == u32::MAX {
                        level[v as usize] = level[u as usize] + 1;
                        q.push_back(v);
                    }
                }
            }
            if level[t as usize] == u32::MAX {
                break;
            }
            for (u, x) in it.iter_mut().enumerate() {
                *x = self.head[u] as usize;
            }
            // iterative blocking flow; `stack` holds the arcs of the current path
            loop {
                let u = stack.last().map_or(s, |&a| self.to[a]);
                if u == t {
                    for &a in &stack {
                        self.push(a);
                    }
                    total += 1;
                    stack.clear();
                    if total == want {
                        break;
                    }
                    continue;
                }
                let end = self.head[u as usize + 1] as usize;
                let mut advanced = false;
                while it[u as usize] < end {
                    let a = it[u as usize];
                    let v = self.to[a];
                    if self.cap[a] > 0 && level[v as usize] == level[u as usize] + 1 {
                        stack.push(a);
                        advanced = true;
                        break;
                    }
                    it[u as usize] += 1;
                }
                if !advanced {
                    if u == s {
                        break;
                    }
                    level[u as usize] = u32::MAX;
                    let a = stack.pop().expect("non-source node has an entry arc");
                    let p = self.to[self.rev[a] as usize];
                    it[p as usize] += 1;
                }
            }
        }
        total
    }
}
