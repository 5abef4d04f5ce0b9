use std::collections::BTreeMap;

use crate::deck::WellSpec;
use crate::grid::Grid;

use super::DomainError;

/// Largest allowed relative deviation of a part size from the mean.
pub const MAX_IMBALANCE: f64 = 0.2;

/// Assigns every active cell to a worker: recursive coordinate bisection of
/// cell centers, then each well's cells are moved to one rank.
pub fn partition(grid: &Grid, wells: &[WellSpec], n_workers: usize) -> Result<Vec<usize>, DomainError> {
    let n = grid.n_active;
    if n_workers == 0 || n_workers > n {
        return Err(DomainError::WorkerCount { workers: n_workers, cells: n });
    }
    let mut owner = vec![0usize; n];
    rcb(grid, (0..n).collect(), 0, n_workers, &mut owner);
    repair_wells(grid, wells, &mut owner);
    let mut sizes = vec![0usize; n_workers];
    for &r in &owner {
        sizes[r] += 1;
    }
    let mean = n as f64 / n_workers as f64;
    if let Some((rank, &size)) = sizes
        .iter()
        .enumerate()
        .find(|(_, &s)| (s as f64 - mean).abs() > MAX_IMBALANCE * mean)
    {
        return Err(DomainError::PartitionImbalance { rank, size, mean });
    }
    Ok(owner)
}

fn rcb(grid: &Grid, mut cells: Vec<usize>, first: usize, count: usize, owner: &mut [usize]) {
    if count == 1 {
        for c in cells {
            owner[c] = first;
        }
        return;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &c in &cells {
        for d in 0..3 {
            lo[d] = lo[d].min(grid.center[c][d]);
            hi[d] = hi[d].max(grid.center[c][d]);
        }
    }
    let mut axis = 0;
    for d in 1..3 {
        if hi[d] - lo[d] > hi[axis] - lo[axis] {
            axis = d;
        }
    }
    cells.sort_by(|&a, &b| {
        grid.center[a][axis]
            .total_cmp(&grid.center[b][axis])
            .then(grid.global_index[a].cmp(&grid.global_index[b]))
    });
    let left = count / 2;
    let split = (cells.len() * left + count / 2) / count;
    let right = cells.split_off(split);
    rcb(grid, cells, first, left, owner);
    rcb(grid, right, first + left, count - left, owner);
}

/// Moves each well's perforated cells to the rank owning most of them
/// (ties to the lower rank). Wells sharing a cell are treated as one unit;
/// units are processed in order of their first well name.
fn repair_wells(grid: &Grid, wells: &[WellSpec], owner: &mut [usize]) {
    let mut order: Vec<usize> = (0..wells.len()).collect();
    order.sort_by(|&a, &b| wells[a].name.cmp(&wells[b].name));
    let cells_of = |w: &WellSpec| -> Vec<usize> {
        w.perforations
            .iter()
            .filter_map(|&(i, j, k)| grid.active_at(i, j, k))
            .collect()
    };
    // union wells sharing a perforated cell
    let mut parent: Vec<usize> = (0..wells.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    let mut first_well: BTreeMap<usize, usize> = BTreeMap::new();
    for &w in &order {
        for c in cells_of(&wells[w]) {
            match first_well.get(&c) {
                Some(&o) => {
                    let (a, b) = (find(&mut parent, o), find(&mut parent, w));
                    if a != b {
                        parent[b.max(a)] = a.min(b);
                    }
                }
                None => {
                    first_well.insert(c, w);
                }
            }
        }
    }
    let mut units: Vec<(usize, Vec<usize>)> = Vec::new();
    for &w in &order {
        let root = find(&mut parent, w);
        match units.iter_mut().find(|u| u.0 == root) {
            Some(u) => u.1.extend(cells_of(&wells[w])),
            None => units.push((root, cells_of(&wells[w]))),
        }
    }
    for (_, mut cells) in units {
        cells.sort_unstable();
        cells.dedup();
        let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
        for &c in &cells {
            *votes.entry(owner[c]).or_default() += 1;
        }
        let Some(best) = votes
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(&r, _)| r)
        else {
            continue;
        };
        for c in cells {
            owner[c] = best;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::box_grid;

    #[test]
    fn single_worker() {
        let g = box_grid(3, 2, 2);
        assert_eq!(partition(&g, &[], 1).unwrap(), vec![0; 12]);
    }

    #[test]
    fn quadrants() {
        let g = box_grid(4, 4, 1);
        let p = partition(&g, &[], 4).unwrap();
        #[rustfmt::skip]
        let expect = vec![
            0, 0, 2, 2,
            0, 0, 2, 2,
            1, 1, 3, 3,
            1, 1, 3, 3,
        ];
        assert_eq!(p, expect);
    }

    #[test]
    fn well_cells_share_a_rank() {
        let g = box_grid(4, 1, 2);
        let well = WellSpec {
            name: "W".into(),
            kind: crate::deck::WellKind::Producer,
            perforations: vec![(1, 0, 0), (2, 0, 0)],
            radius: 0.1,
        };
        let p = partition(&g, &[well], 2).unwrap_err();
        // moving a whole row of cells breaks balance on this tiny grid
        assert!(matches!(p, DomainError::PartitionImbalance { .. }));
        let g = box_grid(8, 2, 1);
        let well = WellSpec {
            name: "W".into(),
            kind: crate::deck::WellKind::Producer,
            perforations: vec![(3, 0, 0), (4, 0, 0)],
            radius: 0.1,
        };
        let p = partition(&g, &[well], 2).unwrap();
        assert_eq!(p[3], p[4]);
    }

    #[test]
    fn too_many_workers() {
        let g = box_grid(2, 1, 1);
        assert!(matches!(partition(&g, &[], 3), Err(DomainError::WorkerCount { .. })));
    }
}
