//! Sparse line shuffles: movers leave the center line into a side lane,
//! travel in lockstep and re-enter at their destination.

use crate::error::{Error, Result};
use crate::exec::Fragment;

/// A center line with two parallel lanes. Lane cell `k` is adjacent to center cell `k`.
#[derive(Clone, Copy, Debug)]
pub struct Highway<'a> {
    pub center: &'a [usize],
    /// Lane used by robots moving toward lower positions.
    pub lane_dec: &'a [usize],
    /// Lane used by robots moving toward higher positions.
    pub lane_inc: &'a [usize],
}

/// Moves each robot from center position `from` to center position `to`.
/// Robots not listed stay put and must not sit on a destination.
/// Lanes must be empty. Takes `max |to - from| + 2` steps.
pub fn highway_shuffle(hw: Highway<'_>, moves: &[(usize, usize)]) -> Result<Fragment> {
    let len = hw.center.len();
    if hw.lane_dec.len() != len || hw.lane_inc.len() != len {
        return Err(Error::Contract("highway lanes must match the center length".into()));
    }
    let mut src = vec![false; len];
    let mut dst = vec![false; len];
    for &(a, b) in moves {
        if a >= len || b >= len || src[a] || dst[b] {
            return Err(Error::Contract("highway moves must be distinct in-range positions".into()));
        }
        src[a] = true;
        dst[b] = true;
    }
    let mut frag = Fragment::default();
    for &(a, b) in moves {
        if a == b {
            continue;
        }
        let lane = if b < a { hw.lane_dec } else { hw.lane_inc };
        frag.push(0, hw.center[a], lane[a]);
        let mut p = a;
        let mut t = 1;
        while p != b {
            let q = if b < a { p - 1 } else { p + 1 };
            frag.push(t, lane[p], lane[q]);
            p = q;
            t += 1;
        }
        frag.push(t, lane[b], hw.center[b]);
    }
    Ok(frag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Executor;
    use crate::grid::{Cell, GridSpace};

    #[test]
    fn movers_cross_without_conflict() {
        let g = GridSpace::new_2d(3, 9, &[]).unwrap();
        let row = |x: usize| -> Vec<usize> { (0..9).map(|y| g.index(Cell::new(x, y))).collect() };
        let (l0, c, l2) = (row(0), row(1), row(2));
        let hw = Highway { center: &c, lane_dec: &l0, lane_inc: &l2 };
        // permutation of the whole center line
        let perm = [8, 3, 0, 1, 2, 7, 6, 5, 4];
        let moves: Vec<(usize, usize)> = perm.iter().enumerate().map(|(a, &b)| (a, b)).collect();
        let f = highway_shuffle(hw, &moves).unwrap();
        assert_eq!(f.len(), 8 + 2);
        let mut ex = Executor::new(&g, &c).unwrap();
        ex.apply(&f).unwrap();
        for (a, &b) in perm.iter().enumerate() {
            assert_eq!(ex.pos()[a] as usize, c[b]);
        }
    }

    #[test]
    fn rejects_duplicate_destinations() {
        let c = [0, 1, 2];
        let hw = Highway { center: &c, lane_dec: &c, lane_inc: &c };
        assert!(highway_shuffle(hw, &[(0, 2), (1, 2)]).is_err());
    }
}
