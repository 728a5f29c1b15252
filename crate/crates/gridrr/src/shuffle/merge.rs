//! Half-density line shuffle: a merge sort whose merges run physically on a
//! primary line, using a parallel secondary line as a bypass.

use crate::error::{Error, Result};
use crate::exec::Fragment;

fn collect_merges(lo: usize, hi: usize, depth: usize, out: &mut Vec<Vec<(usize, usize, usize)>>) {
    if hi - lo < 2 {
        return;
    }
    let mid = lo + (hi - lo) / 2;
    if out.len() <= depth {
        out.resize_with(depth + 1, Vec::new);
    }
    out[depth].push((lo, mid, hi));
    collect_merges(lo, mid, depth + 1, out);
    collect_merges(mid, hi, depth + 1, out);
}

/// Permutes a fully occupied primary line. `targets[p]` is the destination
/// position of the robot at position `p`. The secondary line must be empty;
/// its cell `k` is adjacent to primary cell `k`.
pub fn linear_merge_shuffle(primary: &[usize], secondary: &[usize], targets: &[usize]) -> Result<Fragment> {
    let len = primary.len();
    if secondary.len() != len || targets.len() != len {
        return Err(Error::Contract("merge lines and targets must share one length".into()));
    }
    let mut seen = vec![false; len];
    for &d in targets {
        if d >= len || seen[d] {
            return Err(Error::Contract("merge targets must be a permutation".into()));
        }
        seen[d] = true;
    }
    let mut levels = Vec::new();
    collect_merges(0, len, 0, &mut levels);
    let mut key = targets.to_vec();
    let mut frag = Fragment::default();
    let mut t0 = 0;
    for level in levels.iter().rev() {
        let mut dur = 0;
        for &(lo, mid, hi) in level {
            let nl = mid - lo;
            let left = &key[lo..mid];
            let right = &key[mid..hi];
            let mut next = vec![0; hi - lo];
            for (i, &k) in left.iter().enumerate() {
                let q = lo + i + right.partition_point(|&r| r < k);
                next[q - lo] = k;
                let d = q - (lo + i);
                if d == 0 {
                    continue;
                }
                let p = lo + i;
                frag.push(t0, primary[p], secondary[p]);
                for s in 0..d {
                    frag.push(t0 + 1 + s, secondary[p + s], secondary[p + s + 1]);
                }
                let e = (2 + d).max(nl - i);
                frag.push(t0 + e - 1, secondary[q], primary[q]);
                dur = dur.max(e);
            }
            for (j, &k) in right.iter().enumerate() {
                let q = lo + j + left.partition_point(|&l| l < k);
                next[q - lo] = k;
                let p = mid + j;
                for s in 0..p - q {
                    frag.push(t0 + s, primary[p - s], primary[p - s - 1]);
                }
                dur = dur.max(p - q);
            }
            key[lo..hi].copy_from_slice(&next);
        }
        t0 += dur;
    }
    frag.trim();
    Ok(frag)
}

/// Step bound of [`linear_merge_shuffle`] on a line of `len` positions.
pub fn merge_bound(len: usize) -> usize {
    let mut levels = Vec::new();
    collect_merges(0, len, 0, &mut levels);
    levels
        .iter()
        .map(|l| l.iter().map(|&(lo, mid, hi)| (hi - mid + 2).max(mid - lo)).max().unwrap_or(0))
        .sum()
}
