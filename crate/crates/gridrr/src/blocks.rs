//! Optimal parallel-move sequences that permute the rows of tiny, fully
//! occupied blocks. Under full occupancy the only legal parallel moves are
//! rotations of vertex-disjoint cycles, so a breadth-first search over block
//! arrangements yields makespan-optimal solutions for every row pattern.

use std::collections::VecDeque;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{OnceLock, RwLock};

use crate::error::{Error, Result};

pub const CACHE_ENV: &str = "GRIDRR_CACHE_DIR";
const MAGIC: &[u8; 4] = b"GRRB";
const VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockShape {
    pub rows: usize,
    pub cols: usize,
}

impl BlockShape {
    pub const fn new(rows: usize, cols: usize) -> Self {
        BlockShape { rows, cols }
    }

    pub fn cells(self) -> usize {
        self.rows * self.cols
    }

    fn tabulated(self) -> bool {
        (2..=4).contains(&self.rows) && (2..=4).contains(&self.cols) && self.cells() <= 9
    }
}

/// A parallel move: the occupant of block cell `p` ends on `to[p]`.
pub type BlockMove = Vec<u8>;

/// `rows[r][c]` is the destination column of the robot in row `r`, column `c`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SwapPattern {
    pub rows: Vec<Vec<u8>>,
}

impl SwapPattern {
    pub fn identity(shape: BlockShape) -> Self {
        SwapPattern { rows: vec![(0..shape.cols as u8).collect(); shape.rows] }
    }

    pub fn is_identity(&self) -> bool {
        self.rows.iter().all(|r| r.iter().enumerate().all(|(c, &d)| d as usize == c))
    }

    fn check(&self, shape: BlockShape) -> Result<()> {
        if self.rows.len() != shape.rows {
            return Err(Error::Contract("pattern row count differs from block".into()));
        }
        for r in &self.rows {
            let mut seen = vec![false; shape.cols];
            if r.len() != shape.cols {
                return Err(Error::Contract("pattern row length differs from block".into()));
            }
            for &d in r {
                if d as usize >= shape.cols || seen[d as usize] {
                    return Err(Error::Contract("pattern row is not a permutation".into()));
                }
                seen[d as usize] = true;
            }
        }
        Ok(())
    }

    /// The arrangement (cell -> robot) reached from the identity arrangement.
    fn target(&self, shape: BlockShape) -> Vec<u8> {
        let mut a = vec![0u8; shape.cells()];
        for (r, row) in self.rows.iter().enumerate() {
            for (c, &d) in row.iter().enumerate() {
                a[r * shape.cols + d as usize] = (r * shape.cols + c) as u8;
            }
        }
        a
    }

    fn id(&self, shape: BlockShape) -> usize {
        let f = factorial(shape.cols);
        self.rows.iter().fold(0, |acc, r| acc * f + rank(r))
    }

    fn from_id(shape: BlockShape, mut id: usize) -> Self {
        let f = factorial(shape.cols);
        let mut rows = vec![Vec::new(); shape.rows];
        for r in (0..shape.rows).rev() {
            rows[r] = unrank(id % f, shape.cols);
            id /= f;
        }
        SwapPattern { rows }
    }

    /// Applies `self` after `first`.
    pub fn after(&self, first: &SwapPattern) -> SwapPattern {
        SwapPattern {
            rows: first
                .rows
                .iter()
                .zip(&self.rows)
                .map(|(a, b)| a.iter().map(|&d| b[d as usize]).collect())
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockSolution {
    pub shape: BlockShape,
    pub steps: Vec<BlockMove>,
}

impl BlockSolution {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Arrangement (cell -> robot) after running the steps from identity.
    pub fn replay(&self) -> Vec<u8> {
        let mut a: Vec<u8> = (0..self.shape.cells() as u8).collect();
        for m in &self.steps {
            a = apply(&a, m);
        }
        a
    }
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

fn rank(p: &[u8]) -> usize {
    let n = p.len();
    let mut used = 0u32;
    let mut r = 0;
    for (i, &v) in p.iter().enumerate() {
        let smaller_unused = v as u32 - (used & ((1u32 << v) - 1)).count_ones();
        r = r * (n - i) + smaller_unused as usize;
        used |= 1 << v;
    }
    r
}

fn unrank(mut r: usize, n: usize) -> Vec<u8> {
    let mut digits = vec![0usize; n];
    for i in (0..n).rev() {
        let base = n - i;
        digits[i] = r % base;
        r /= base;
    }
    let mut pool: Vec<u8> = (0..n as u8).collect();
    digits.iter().map(|&d| pool.remove(d)).collect()
}

fn apply(a: &[u8], m: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; a.len()];
    for (p, &t) in m.iter().enumerate() {
        out[t as usize] = a[p];
    }
    out
}

fn block_neighbors(shape: BlockShape, p: usize) -> Vec<usize> {
    let (r, c) = (p / shape.cols, p % shape.cols);
    let mut v = Vec::with_capacity(4);
    if r > 0 {
        v.push(p - shape.cols);
    }
    if r + 1 < shape.rows {
        v.push(p + shape.cols);
    }
    if c > 0 {
        v.push(p - 1);
    }
    if c + 1 < shape.cols {
        v.push(p + 1);
    }
    v
}

/// Directed simple cycles of length at least 4, each listed once.
fn directed_cycles(shape: BlockShape) -> Vec<Vec<usize>> {
    fn dfs(shape: BlockShape, s: usize, path: &mut Vec<usize>, on: &mut [bool], out: &mut Vec<Vec<usize>>) {
        let u = *path.last().unwrap();
        for v in block_neighbors(shape, u) {
            if v == s && path.len() >= 3 {
                out.push(path.clone());
            } else if v > s && !on[v] {
                on[v] = true;
                path.push(v);
                dfs(shape, s, path, on, out);
                path.pop();
                on[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    for s in 0..shape.cells() {
        let mut on = vec![false; shape.cells()];
        on[s] = true;
        dfs(shape, s, &mut vec![s], &mut on, &mut out);
    }
    out.sort();
    out
}

/// Every union of vertex-disjoint directed cycle rotations on the block.
pub fn legal_parallel_moves(shape: BlockShape) -> Vec<BlockMove> {
    let cycles = directed_cycles(shape);
    let masks: Vec<u32> = cycles.iter().map(|c| c.iter().fold(0u32, |m, &v| m | 1 << v)).collect();
    let mut out = Vec::new();
    fn rec(k: usize, used: u32, chosen: &mut Vec<usize>, masks: &[u32], cycles: &[Vec<usize>], n: usize, out: &mut Vec<BlockMove>) {
        for j in k..cycles.len() {
            if used & masks[j] != 0 {
                continue;
            }
            chosen.push(j);
            let mut to: Vec<u8> = (0..n as u8).collect();
            for &ci in chosen.iter() {
                let cyc = &cycles[ci];
                for i in 0..cyc.len() {
                    to[cyc[i]] = cyc[(i + 1) % cyc.len()] as u8;
                }
            }
            out.push(to);
            rec(j + 1, used | masks[j], chosen, masks, cycles, n, out);
            chosen.pop();
        }
    }
    rec(0, 0, &mut Vec::new(), &masks, &cycles, shape.cells(), &mut out);
    out
}

/// Optimal solutions for every row pattern of one block shape.
#[derive(Clone, Debug)]
pub struct PatternTable {
    pub shape: BlockShape,
    pub moves: Vec<BlockMove>,
    /// Indexed by pattern id; each entry lists move indices in execution order.
    pub solutions: Vec<Vec<u16>>,
}

impl PatternTable {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.solutions.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn solution(&self, pattern: &SwapPattern) -> BlockSolution {
        BlockSolution {
            shape: self.shape,
            steps: self.solutions[pattern.id(self.shape)].iter().map(|&m| self.moves[m as usize].clone()).collect(),
        }
    }

    pub fn patterns(&self) -> impl Iterator<Item = SwapPattern> + '_ {
        (0..self.solutions.len()).map(|id| SwapPattern::from_id(self.shape, id))
    }

    /// BFS over all block arrangements from the identity.
    pub fn compute(shape: BlockShape) -> Result<PatternTable> {
        if !shape.tabulated() {
            return Err(Error::Contract(format!("{}x{} blocks are not tabulated", shape.rows, shape.cols)));
        }
        let n = shape.cells();
        let moves = legal_parallel_moves(shape);
        let inverse: Vec<usize> = moves
            .iter()
            .map(|m| {
                let mut inv = vec![0u8; n];
                for (p, &t) in m.iter().enumerate() {
                    inv[t as usize] = p as u8;
                }
                moves.iter().position(|x| *x == inv).expect("reverse rotation is a move")
            })
            .collect();
        let total = factorial(n);
        let mut parent = vec![u16::MAX; total];
        let start: Vec<u8> = (0..n as u8).collect();
        let root = rank(&start);
        parent[root] = u16::MAX - 1;
        let mut q = VecDeque::from([start]);
        while let Some(a) = q.pop_front() {
            for (mi, m) in moves.iter().enumerate() {
                let b = apply(&a, m);
                let rb = rank(&b);
                if parent[rb] == u16::MAX {
                    parent[rb] = mi as u16;
                    q.push_back(b);
                }
            }
        }
        let count = factorial(shape.cols).pow(shape.rows as u32);
        let mut solutions = Vec::with_capacity(count);
        for id in 0..count {
            let mut a = SwapPattern::from_id(shape, id).target(shape);
            let mut seq = Vec::new();
            loop {
                let r = rank(&a);
                let p = parent[r];
                if r == root {
                    break;
                }
                if p == u16::MAX {
                    return Err(Error::Infeasible("pattern unreachable on this block".into()));
                }
                seq.push(p);
                a = apply(&a, &moves[inverse[p as usize]]);
            }
            seq.reverse();
            solutions.push(seq);
        }
        Ok(PatternTable { shape, moves, solutions })
    }

    fn encode(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.push(self.shape.rows as u8);
        b.push(self.shape.cols as u8);
        b.extend_from_slice(&(self.moves.len() as u16).to_le_bytes());
        b.extend_from_slice(&(self.solutions.len() as u32).to_le_bytes());
        for (id, s) in self.solutions.iter().enumerate() {
            b.extend_from_slice(&(id as u32).to_le_bytes());
            b.push(s.len() as u8);
            b.extend(s.iter().map(|&m| m as u8));
        }
        b
    }

    fn decode(shape: BlockShape, b: &[u8]) -> Option<PatternTable> {
        let moves = legal_parallel_moves(shape);
        let mut cur = b;
        let mut take = |k: usize| -> Option<&[u8]> {
            if cur.len() < k {
                return None;
            }
            let (h, t) = cur.split_at(k);
            cur = t;
            Some(h)
        };
        if take(4)? != MAGIC
            || u16::from_le_bytes(take(2)?.try_into().ok()?) != VERSION
            || take(1)?[0] as usize != shape.rows
            || take(1)?[0] as usize != shape.cols
            || u16::from_le_bytes(take(2)?.try_into().ok()?) as usize != moves.len()
        {
            return None;
        }
        let count = u32::from_le_bytes(take(4)?.try_into().ok()?) as usize;
        if count != factorial(shape.cols).pow(shape.rows as u32) {
            return None;
        }
        let mut solutions = Vec::with_capacity(count);
        for id in 0..count {
            if u32::from_le_bytes(take(4)?.try_into().ok()?) as usize != id {
                return None;
            }
            let len = take(1)?[0] as usize;
            let seq: Vec<u16> = take(len)?.iter().map(|&m| m as u16).collect();
            if seq.iter().any(|&m| m as usize >= moves.len()) {
                return None;
            }
            solutions.push(seq);
        }
        if take(1).is_some() {
            return None;
        }
        let t = PatternTable { shape, moves, solutions };
        // reject tables whose entries do not realize their patterns
        let ok = t.patterns().all(|p| t.solution(&p).replay() == p.target(shape));
        ok.then_some(t)
    }

    /// Loads the table from `dir`, recomputing and rewriting it when absent or corrupt.
    pub fn load_or_compute(shape: BlockShape, dir: &Path) -> Result<PatternTable> {
        let file = dir.join(format!("block_{}x{}.bin", shape.rows, shape.cols));
        if let Ok(bytes) = fs::read(&file) {
            if let Some(t) = Self::decode(shape, &bytes) {
                return Ok(t);
            }
        }
        let t = Self::compute(shape)?;
        fs::create_dir_all(dir)?;
        let tmp = file.with_extension("tmp");
        fs::File::create(&tmp)?.write_all(&t.encode())?;
        fs::rename(&tmp, &file)?;
        Ok(t)
    }
}

static CACHE_DIR: RwLock<Option<PathBuf>> = RwLock::new(None);
static TABLES: [OnceLock<PatternTable>; 9] = [const { OnceLock::new() }; 9];

/// Directory for the on-disk table cache; overrides the environment variable.
pub fn set_cache_dir(dir: Option<PathBuf>) {
    *CACHE_DIR.write().expect("cache dir lock") = dir;
}

fn cache_dir() -> Option<PathBuf> {
    CACHE_DIR
        .read()
        .expect("cache dir lock")
        .clone()
        .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from))
}

/// Shared, lazily computed table for a tabulated shape.
pub fn pattern_table(shape: BlockShape) -> Result<&'static PatternTable> {
    if !shape.tabulated() {
        return Err(Error::Contract(format!("{}x{} blocks are not tabulated", shape.rows, shape.cols)));
    }
    let slot = &TABLES[(shape.rows - 2) * 3 + (shape.cols - 2)];
    if let Some(t) = slot.get() {
        return Ok(t);
    }
    let t = match cache_dir() {
        Some(dir) => PatternTable::load_or_compute(shape, &dir).or_else(|_| PatternTable::compute(shape))?,
        None => PatternTable::compute(shape)?,
    };
    Ok(slot.get_or_init(|| t))
}

/// Column permutations on 4 columns realized by 3-column windows, as
/// `(window start, row permutations)` in execution order.
fn split_four(rows: &[Vec<u8>]) -> Vec<(usize, Vec<Vec<u8>>)> {
    // p[c] = destination of the robot at column c
    let window = |start: usize, perms: Vec<[u8; 4]>| -> (usize, Vec<Vec<u8>>) {
        (start, perms.iter().map(|p| (start..start + 3).map(|c| p[c] - start as u8).collect()).collect())
    };
    let inv = |p: &[u8; 4]| {
        let mut q = [0u8; 4];
        for c in 0..4 {
            q[p[c] as usize] = c as u8;
        }
        q
    };
    let compose = |first: &[u8; 4], second: &[u8; 4]| -> [u8; 4] { std::array::from_fn(|c| second[first[c] as usize]) };
    // moves the robot at `from` to column `to` inside a window, others keep order
    let place = |from: usize, to: usize, start: usize| -> [u8; 4] {
        let mut order: Vec<usize> = (start..start + 3).filter(|&c| c != from).collect();
        order.insert(to - start, from);
        let mut p = [0u8, 1, 2, 3];
        for (k, &c) in order.iter().enumerate() {
            p[c] = (start + k) as u8;
        }
        p
    };
    let perms: Vec<[u8; 4]> = rows.iter().map(|r| [r[0], r[1], r[2], r[3]]).collect();
    let fixes = |c: usize| perms.iter().all(|p| p[c] as usize == c);
    if fixes(3) {
        return vec![window(0, perms)];
    }
    if fixes(0) {
        return vec![window(1, perms)];
    }
    if perms.iter().all(|p| inv(p)[3] != 0) {
        let s2: Vec<[u8; 4]> = perms.iter().map(|p| place(inv(p)[3] as usize, 3, 1)).collect();
        let s3: Vec<[u8; 4]> = perms.iter().zip(&s2).map(|(p, a)| compose(&inv(a), p)).collect();
        return vec![window(1, s2), window(0, s3)];
    }
    if perms.iter().all(|p| inv(p)[0] != 3) {
        let s1: Vec<[u8; 4]> = perms.iter().map(|p| place(inv(p)[0] as usize, 0, 0)).collect();
        let s2: Vec<[u8; 4]> = perms.iter().zip(&s1).map(|(p, a)| compose(&inv(a), p)).collect();
        return vec![window(0, s1), window(1, s2)];
    }
    let s1: Vec<[u8; 4]> = perms.iter().map(|p| if inv(p)[3] == 0 { [1, 0, 2, 3] } else { [0, 1, 2, 3] }).collect();
    let rest: Vec<Vec<u8>> = perms.iter().zip(&s1).map(|(p, a)| compose(&inv(a), p).to_vec()).collect();
    let mut out = vec![window(0, s1)];
    out.extend(split_four(&rest));
    out
}

/// A solution for `pattern`. Optimal for tabulated shapes; 3x4 blocks are
/// solved by composing 3x3 windows.
pub fn solve_pattern(shape: BlockShape, pattern: &SwapPattern) -> Result<BlockSolution> {
    pattern.check(shape)?;
    if pattern.is_identity() {
        return Ok(BlockSolution { shape, steps: Vec::new() });
    }
    if shape.tabulated() {
        return Ok(pattern_table(shape)?.solution(pattern));
    }
    if shape != BlockShape::new(3, 4) {
        return Err(Error::Contract(format!("{}x{} blocks are not supported", shape.rows, shape.cols)));
    }
    let sub = BlockShape::new(3, 3);
    let mut steps = Vec::new();
    for (start, rows) in split_four(&pattern.rows) {
        let part = solve_pattern(sub, &SwapPattern { rows })?;
        for m in part.steps {
            let mut to: Vec<u8> = (0..shape.cells() as u8).collect();
            for (p, &t) in m.iter().enumerate() {
                let (r, c) = (p / 3, p % 3);
                let (tr, tc) = (t as usize / 3, t as usize % 3);
                to[r * 4 + c + start] = (tr * 4 + tc + start) as u8;
            }
            steps.push(to);
        }
    }
    Ok(BlockSolution { shape, steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_unrank_roundtrip() {
        for r in 0..24 {
            assert_eq!(rank(&unrank(r, 4)), r);
        }
    }

    #[test]
    fn move_counts() {
        assert_eq!(legal_parallel_moves(BlockShape::new(3, 2)).len(), 6);
        assert_eq!(legal_parallel_moves(BlockShape::new(2, 2)).len(), 2);
        assert_eq!(legal_parallel_moves(BlockShape::new(2, 4)).len(), 16);
        assert_eq!(legal_parallel_moves(BlockShape::new(3, 3)).len(), 26);
    }

    #[test]
    fn two_by_four_has_disjoint_square_pairs() {
        let moves = legal_parallel_moves(BlockShape::new(2, 4));
        let pairs = moves.iter().filter(|m| m.iter().enumerate().filter(|&(p, &t)| p != t as usize).count() == 8).count();
        // the two end squares in 4 orientation combinations, plus the 8-cycle in 2 orientations
        assert_eq!(pairs, 6);
    }

    #[test]
    fn identity_is_empty() {
        let s = BlockShape::new(3, 2);
        assert!(solve_pattern(s, &SwapPattern::identity(s)).unwrap().is_empty());
    }

    #[test]
    fn all_swaps_on_three_by_two_takes_seven() {
        let s = BlockShape::new(3, 2);
        let p = SwapPattern { rows: vec![vec![1, 0]; 3] };
        let sol = solve_pattern(s, &p).unwrap();
        assert_eq!(sol.len(), 7);
        assert_eq!(sol.replay(), p.target(s));
    }

    #[test]
    fn three_by_four_composition_realizes_patterns() {
        let s = BlockShape::new(3, 4);
        for a in (0..24).step_by(5) {
            for b in (0..24).step_by(7) {
                let p = SwapPattern { rows: vec![unrank(a, 4), unrank(b, 4), unrank(23 - a, 4)] };
                let sol = solve_pattern(s, &p).unwrap();
                assert_eq!(sol.replay(), p.target(s));
                assert!(sol.len() <= 21);
            }
        }
    }

    #[test]
    fn encode_decode_roundtrip() {
        let t = PatternTable::compute(BlockShape::new(2, 3)).unwrap();
        let back = PatternTable::decode(t.shape, &t.encode()).unwrap();
        assert_eq!(back.solutions, t.solutions);
        let mut bad = t.encode();
        bad[0] ^= 1;
        assert!(PatternTable::decode(t.shape, &bad).is_none());
    }
}
