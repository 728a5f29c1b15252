//! Full-density line shuffles by parallel odd-even sorting over tiny blocks.

use crate::blocks::{solve_pattern, BlockShape, SwapPattern};
use crate::error::{Error, Result};
use crate::exec::Fragment;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ShuffleMode {
    /// Pairs of positions on 3- or 4-line groups (3x2 and 4x2 blocks).
    #[default]
    Fast,
    /// Pairs of pairs on 2-line groups (2x4 and 2x3 blocks).
    Faster,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum GroupKind {
    Pairs,
    Quads,
}

fn groups(lines: usize, mode: ShuffleMode) -> Result<Vec<(usize, usize, GroupKind)>> {
    let mut sizes: Vec<(usize, GroupKind)> = Vec::new();
    match mode {
        ShuffleMode::Fast => match (lines, lines % 3) {
            (0, _) => {}
            (1, _) => return Err(Error::Regime("a single fully occupied line cannot be permuted".into())),
            (2, _) => sizes.push((2, GroupKind::Quads)),
            (5, _) => sizes.extend([(3, GroupKind::Pairs), (2, GroupKind::Quads)]),
            (m, 0) => sizes.extend(std::iter::repeat_n((3, GroupKind::Pairs), m / 3)),
            (m, 1) => {
                sizes.extend(std::iter::repeat_n((3, GroupKind::Pairs), (m - 4) / 3));
                sizes.push((4, GroupKind::Pairs));
            }
            (m, _) => {
                sizes.extend(std::iter::repeat_n((3, GroupKind::Pairs), (m - 8) / 3));
                sizes.extend([(4, GroupKind::Pairs), (4, GroupKind::Pairs)]);
            }
        },
        ShuffleMode::Faster => match lines {
            0 => {}
            1 => return Err(Error::Regime("a single fully occupied line cannot be permuted".into())),
            m if m % 2 == 0 => sizes.extend(std::iter::repeat_n((2, GroupKind::Quads), m / 2)),
            m => {
                sizes.extend(std::iter::repeat_n((2, GroupKind::Quads), (m - 3) / 2));
                sizes.push((3, GroupKind::Pairs));
            }
        },
    }
    let mut out = Vec::with_capacity(sizes.len());
    let mut at = 0;
    for (s, k) in sizes {
        out.push((at, s, k));
        at += s;
    }
    Ok(out)
}

/// Windows `(start, width)` compared in a round of the given parity.
fn windows(len: usize, kind: GroupKind, parity: usize) -> Vec<(usize, usize)> {
    // positions are grouped into units of 1 (pairs) or 2 (quads); a window merges two adjacent units
    let unit = match kind {
        GroupKind::Pairs => 1,
        GroupKind::Quads => 2,
    };
    let units: Vec<(usize, usize)> = (0..len).step_by(unit).map(|s| (s, unit.min(len - s))).collect();
    let mut out = Vec::new();
    let mut u = parity;
    while u + 1 < units.len() {
        let (s, w1) = units[u];
        out.push((s, w1 + units[u + 1].1));
        u += 2;
    }
    out
}

/// Permutes every line simultaneously. `lines[k]` lists the cells of line
/// `k` in order; consecutive lines must be grid-adjacent. `targets[k][p]` is
/// the destination position of the robot at position `p` of line `k`.
pub fn odd_even_shuffle(lines: &[Vec<usize>], targets: &[Vec<usize>], mode: ShuffleMode) -> Result<Fragment> {
    if lines.len() != targets.len() {
        return Err(Error::Contract("one target permutation per line is required".into()));
    }
    let len = lines.first().map_or(0, Vec::len);
    for (l, t) in lines.iter().zip(targets) {
        if l.len() != len || t.len() != len {
            return Err(Error::Contract("lines must share one length".into()));
        }
        let mut seen = vec![false; len];
        for &d in t {
            if d >= len || seen[d] {
                return Err(Error::Contract("line targets must stay on the line and be a permutation".into()));
            }
            seen[d] = true;
        }
    }
    if len == 2 && lines.len() > 2 {
        return short_lines(lines, targets);
    }
    let mut frag = Fragment::default();
    for (first, count, kind) in groups(lines.len(), mode)? {
        let g = shuffle_group(&lines[first..first + count], &targets[first..first + count], kind)?;
        frag.merge_parallel(g);
    }
    Ok(frag)
}

/// Lines of length 2 cannot use 2-line groups, where a 2x2 block only rotates.
fn short_lines(lines: &[Vec<usize>], targets: &[Vec<usize>]) -> Result<Fragment> {
    let n = lines.len();
    if n != 5 {
        let mut frag = Fragment::default();
        for (first, count, kind) in groups(n, ShuffleMode::Fast)? {
            frag.merge_parallel(shuffle_group(&lines[first..first + count], &targets[first..first + count], kind)?);
        }
        return Ok(frag);
    }
    // two overlapping 3-line passes; the shared line is already in place for the second
    let mut frag = shuffle_group(&lines[..3], &targets[..3], GroupKind::Pairs)?;
    let rest = [(0..lines[0].len()).collect(), targets[3].clone(), targets[4].clone()];
    frag.append(shuffle_group(&lines[2..], &rest, GroupKind::Pairs)?);
    Ok(frag)
}

fn shuffle_group(lines: &[Vec<usize>], targets: &[Vec<usize>], kind: GroupKind) -> Result<Fragment> {
    let rows = lines.len();
    let len = lines[0].len();
    let mut key: Vec<Vec<usize>> = targets.to_vec();
    let sorted = |key: &Vec<Vec<usize>>| key.iter().all(|k| k.iter().enumerate().all(|(p, &d)| p == d));
    let mut frag = Fragment::default();
    let mut t0 = 0;
    let units = match kind {
        GroupKind::Pairs => len,
        GroupKind::Quads => len.div_ceil(2),
    };
    let cap = units + 3;
    let mut round = 0;
    while !sorted(&key) {
        if round >= cap {
            return Err(Error::Infeasible(format!("{rows}-line group of length {len} did not sort")));
        }
        let mut dur = 0;
        for (s, w) in windows(len, kind, round % 2) {
            let mut pattern = SwapPattern { rows: Vec::with_capacity(rows) };
            for k in &key {
                let mut order: Vec<usize> = (0..w).collect();
                order.sort_by_key(|&c| k[s + c]);
                let mut dest = vec![0u8; w];
                for (rnk, &c) in order.iter().enumerate() {
                    dest[c] = rnk as u8;
                }
                pattern.rows.push(dest);
            }
            if pattern.is_identity() {
                continue;
            }
            let shape = BlockShape::new(rows, w);
            let sol = solve_pattern(shape, &pattern)?;
            for (t, m) in sol.steps.iter().enumerate() {
                for (p, &to) in m.iter().enumerate() {
                    let to = to as usize;
                    if p != to {
                        let from_cell = lines[p / w][s + p % w];
                        let to_cell = lines[to / w][s + to % w];
                        frag.push(t0 + t, from_cell, to_cell);
                    }
                }
            }
            dur = dur.max(sol.len());
            for (k, dest) in key.iter_mut().zip(&pattern.rows) {
                let old: Vec<usize> = k[s..s + w].to_vec();
                for c in 0..w {
                    k[s + dest[c] as usize] = old[c];
                }
            }
        }
        if dur == 0 && !windows(len, kind, (round + 1) % 2).is_empty() && round > 0 {
            // both parities idle means the lines cannot be sorted by this block family
            let next_idle = windows(len, kind, (round + 1) % 2).iter().all(|&(s, w)| {
                key.iter().all(|k| k[s..s + w].windows(2).all(|p| p[0] < p[1]))
            });
            if next_idle {
                return Err(Error::Infeasible("block family cannot realize this permutation".into()));
            }
        }
        t0 += dur;
        round += 1;
    }
    Ok(frag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Executor;
    use crate::grid::{Cell, GridSpace};

    fn run(m1: usize, m2: usize, targets: Vec<Vec<usize>>, mode: ShuffleMode) -> usize {
        let g = GridSpace::new_2d(m1, m2, &[]).unwrap();
        let lines: Vec<Vec<usize>> = (0..m1).map(|x| (0..m2).map(|y| g.index(Cell::new(x, y))).collect()).collect();
        let starts: Vec<usize> = (0..g.num_cells()).collect();
        let frag = odd_even_shuffle(&lines, &targets, mode).unwrap();
        let mut ex = Executor::new(&g, &starts).unwrap();
        ex.apply(&frag).unwrap();
        for x in 0..m1 {
            for y in 0..m2 {
                let r = x * m2 + y;
                assert_eq!(ex.pos()[r] as usize, lines[x][targets[x][y]]);
            }
        }
        frag.len()
    }

    #[test]
    fn windows_follow_unit_pairs() {
        assert_eq!(windows(11, GroupKind::Quads, 0), vec![(0, 4), (4, 4), (8, 3)]);
        assert_eq!(windows(11, GroupKind::Quads, 1), vec![(2, 4), (6, 4)]);
        assert_eq!(windows(5, GroupKind::Pairs, 1), vec![(1, 2), (3, 2)]);
    }

    #[test]
    fn identity_is_free() {
        let t = vec![(0..5).collect(); 3];
        assert_eq!(run(3, 5, t, ShuffleMode::Fast), 0);
    }

    #[test]
    fn reversal_fast_within_bound() {
        let t: Vec<Vec<usize>> = vec![(0..8).rev().collect(); 6];
        assert!(run(6, 8, t, ShuffleMode::Fast) <= 56);
    }

    #[test]
    fn reversal_faster_even_rows() {
        let t: Vec<Vec<usize>> = vec![(0..8).rev().collect(); 4];
        assert!(run(4, 8, t, ShuffleMode::Faster) <= 4 * 8 + 8);
    }

    #[test]
    fn length_two_lines() {
        for lines in [3, 4, 5, 6, 7] {
            for mode in [ShuffleMode::Fast, ShuffleMode::Faster] {
                let t: Vec<Vec<usize>> = (0..lines).map(|k| if k % 2 == 0 { vec![1, 0] } else { vec![0, 1] }).collect();
                run(lines, 2, t, mode);
            }
        }
        let g = GridSpace::new_2d(2, 2, &[]).unwrap();
        let lines: Vec<Vec<usize>> = (0..2).map(|x| (0..2).map(|y| g.index(Cell::new(x, y))).collect()).collect();
        // a full 2x2 grid only rotates
        assert!(odd_even_shuffle(&lines, &[vec![1, 0], vec![0, 1]], ShuffleMode::Fast).is_err());
    }

    #[test]
    fn odd_line_counts() {
        for lines in [2, 3, 4, 5, 7, 8] {
            for mode in [ShuffleMode::Fast, ShuffleMode::Faster] {
                let t: Vec<Vec<usize>> = (0..lines).map(|k| (0..6).map(|p| (p + k + 1) % 6).collect()).collect();
                run(lines, 6, t, mode);
            }
        }
    }
}
