//! Short local reshuffles that move robots between slot layouts.

use crate::error::{Error, Result};
use crate::exec::Fragment;

/// Moves robots along fixed cell paths, one cell per step, all starting at
/// step 0. Paths may have different lengths; a path of one cell is a no-op.
pub fn follow_paths(paths: &[Vec<usize>]) -> Result<Fragment> {
    let mut frag = Fragment::default();
    for path in paths {
        if path.is_empty() {
            return Err(Error::Contract("conversion path is empty".into()));
        }
        for (t, w) in path.windows(2).enumerate() {
            frag.push(t, w[0], w[1]);
        }
    }
    Ok(frag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Executor;
    use crate::grid::{Cell, GridSpace};

    #[test]
    fn column_to_row_in_a_cell() {
        let g = GridSpace::new_2d(3, 3, &[]).unwrap();
        let i = |x, y| g.index(Cell::new(x, y));
        let starts = [i(0, 1), i(1, 1), i(2, 1)];
        let paths = vec![vec![i(0, 1), i(0, 0), i(1, 0)], vec![i(1, 1)], vec![i(2, 1), i(2, 2), i(1, 2)]];
        let f = follow_paths(&paths).unwrap();
        let mut ex = Executor::new(&g, &starts).unwrap();
        ex.apply(&f).unwrap();
        assert_eq!(ex.pos(), &[i(1, 0) as u32, i(1, 1) as u32, i(1, 2) as u32]);
        ex.apply(&f.reversed()).unwrap();
        assert_eq!(ex.pos().iter().map(|&c| c as usize).collect::<Vec<_>>(), starts);
    }
}
