use alloc::vec::Vec;

use crate::geometry::Vec2;

#[inline]
pub(crate) fn cell_of(p: Vec2, cell: f64) -> (i64, i64) {
    (libm::floor(p.x / cell) as i64, libm::floor(p.y / cell) as i64)
}

/// Uniform-grid index for exact fixed-radius queries.
///
/// Entries are sorted by cell so that each 3-cell column of a 3×3
/// neighbourhood is a single contiguous range.
pub(crate) struct PointGrid {
    cell: f64,
    entries: Vec<Entry>,
}

struct Entry {
    key: (i64, i64),
    pos: Vec2,
    index: usize,
}

impl PointGrid {
    /// `cell` must be at least the largest query radius.
    pub(crate) fn new(points: impl IntoIterator<Item = Vec2>, cell: f64) -> Self {
        let mut entries: Vec<Entry> = points
            .into_iter()
            .enumerate()
            .map(|(index, pos)| Entry {
                key: cell_of(pos, cell),
                pos,
                index,
            })
            .collect();
        entries.sort_by(|a, b| a.key.cmp(&b.key).then(a.index.cmp(&b.index)));
        Self { cell, entries }
    }

    /// Calls `f(index, squared_distance)` for every point within `radius` of `center`.
    pub(crate) fn for_each_within(&self, center: Vec2, radius: f64, mut f: impl FnMut(usize, f64)) {
        debug_assert!(radius <= self.cell * (1.0 + 1e-12));
        let r2 = radius * radius;
        let (cx, cy) = cell_of(center, self.cell);
        for ix in cx - 1..=cx + 1 {
            let lo = self.entries.partition_point(|e| e.key < (ix, cy - 1));
            let hi = self.entries.partition_point(|e| e.key <= (ix, cy + 1));
            for e in &self.entries[lo..hi] {
                let d2 = (e.pos - center).norm_squared();
                if d2 <= r2 {
                    f(e.index, d2);
                }
            }
        }
    }

    /// Index of the closest point within `radius`, ties to the lower index.
    pub(crate) fn nearest_within(&self, center: Vec2, radius: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        self.for_each_within(center, radius, |i, d2| match best {
            Some((bi, bd)) if d2 > bd || (d2 == bd && i > bi) => {}
            _ => best = Some((i, d2)),
        });
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn matches_brute_force() {
        let mut pts = Vec::new();
        let mut s = 12345u64;
        for _ in 0..500 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let x = (s >> 11) as f64 / (1u64 << 53) as f64 * 40.0 - 20.0;
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let y = (s >> 11) as f64 / (1u64 << 53) as f64 * 40.0 - 20.0;
            pts.push(Vec2::new(x, y));
        }
        let grid = PointGrid::new(pts.iter().copied(), 3.5);
        for c in [Vec2::new(0.0, 0.0), Vec2::new(-7.1, 3.3), Vec2::new(19.0, -19.0)] {
            let mut got = vec![];
            grid.for_each_within(c, 3.5, |i, _| got.push(i));
            got.sort();
            let want: Vec<usize> = (0..pts.len()).filter(|&i| (pts[i] - c).norm() <= 3.5).collect();
            assert_eq!(got, want);
            let nearest = (0..pts.len())
                .filter(|&i| (pts[i] - c).norm() <= 3.5)
                .min_by(|&a, &b| (pts[a] - c).norm().partial_cmp(&(pts[b] - c).norm()).unwrap());
            assert_eq!(grid.nearest_within(c, 3.5).map(|x| x.0), nearest);
        }
    }
}
