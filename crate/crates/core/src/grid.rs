//! Structured cell geometry, inactive-cell filtering and two-point
//! transmissibilities.

use serde::Serialize;
use thiserror::Error;

use crate::deck::DeckModel;

/// Standard gravity (m/s²). Depth increases downward.
pub const GRAVITY: f64 = 9.80665;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("grid has no active cells")]
    EmptyGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Active cells of a structured grid, stored in ascending natural order.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dimens: (usize, usize, usize),
    pub n_active: usize,
    /// Natural (i fastest) index of each active cell.
    pub global_index: Vec<usize>,
    pub ijk: Vec<(usize, usize, usize)>,
    /// `[dx, dy, dz]` in metres.
    pub size: Vec<[f64; 3]>,
    /// Cell-centre coordinates; `center[c][2]` is depth.
    pub center: Vec<[f64; 3]>,
    pub volume: Vec<f64>,
    pub depth: Vec<f64>,
    pub poro0: Vec<f64>,
    /// Permeability per axis (m²).
    pub perm: Vec<[f64; 3]>,
    pub neighbors: Vec<Vec<usize>>,
    /// Natural index → active index.
    active_of: Vec<Option<usize>>,
}

impl Grid {
    pub fn active_index(&self, natural: usize) -> Option<usize> {
        self.active_of.get(natural).copied().flatten()
    }

    pub fn active_at(&self, i: usize, j: usize, k: usize) -> Option<usize> {
        let (nx, ny, nz) = self.dimens;
        if i >= nx || j >= ny || k >= nz {
            return None;
        }
        self.active_index(i + nx * (j + ny * k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Connection {
    pub a: usize,
    pub b: usize,
    /// Static transmissibility (m³).
    pub trans: f64,
    pub axis: Axis,
    /// `depth[b] - depth[a]`.
    pub dz: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConnectionList {
    pub conns: Vec<Connection>,
}

impl ConnectionList {
    pub fn len(&self) -> usize {
        self.conns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conns.is_empty()
    }
}

/// Builds the active-cell geometry. A cell is inactive when `ACTNUM = 0` or
/// its porosity is not positive.
pub fn build_grid(model: &DeckModel) -> Result<Grid, GridError> {
    let (nx, ny, nz) = model.dimens;
    let sizes = &model.cell_sizes;
    let offsets = |d: &[f64]| -> Vec<f64> {
        let mut acc = 0.0;
        d.iter()
            .map(|&w| {
                let c = acc + 0.5 * w;
                acc += w;
                c
            })
            .collect()
    };
    let xc = offsets(&sizes.dx);
    let yc = offsets(&sizes.dy);
    let zc = offsets(&sizes.dz);

    let mut g = Grid {
        dimens: model.dimens,
        n_active: 0,
        global_index: Vec::new(),
        ijk: Vec::new(),
        size: Vec::new(),
        center: Vec::new(),
        volume: Vec::new(),
        depth: Vec::new(),
        poro0: Vec::new(),
        perm: Vec::new(),
        neighbors: Vec::new(),
        active_of: vec![None; nx * ny * nz],
    };
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let n = model.flat_index(i, j, k);
                if model.actnum[n] == 0 || !(model.poro[n] > 0.0) {
                    continue;
                }
                let (dx, dy, dz) = (sizes.dx[i], sizes.dy[j], sizes.dz[k]);
                let depth = model.depth_top + zc[k];
                g.active_of[n] = Some(g.global_index.len());
                g.global_index.push(n);
                g.ijk.push((i, j, k));
                g.size.push([dx, dy, dz]);
                g.center.push([xc[i], yc[j], depth]);
                g.volume.push(dx * dy * dz);
                g.depth.push(depth);
                g.poro0.push(model.poro[n]);
                g.perm.push([model.permx[n], model.permy[n], model.permz[n]]);
            }
        }
    }
    g.n_active = g.global_index.len();
    if g.n_active == 0 {
        return Err(GridError::EmptyGrid);
    }
    g.neighbors = vec![Vec::new(); g.n_active];
    for c in 0..g.n_active {
        let (i, j, k) = g.ijk[c];
        let candidates = [
            i.checked_sub(1).map(|i| (i, j, k)),
            Some((i + 1, j, k)),
            j.checked_sub(1).map(|j| (i, j, k)),
            Some((i, j + 1, k)),
            k.checked_sub(1).map(|k| (i, j, k)),
            Some((i, j, k + 1)),
        ];
        let mut nb: Vec<usize> = candidates
            .into_iter()
            .flatten()
            .filter_map(|(i, j, k)| g.active_at(i, j, k))
            .collect();
        nb.sort_unstable();
        g.neighbors[c] = nb;
    }
    Ok(g)
}

fn half_trans(grid: &Grid, c: usize, axis: usize) -> f64 {
    let s = grid.size[c];
    let area = match axis {
        0 => s[1] * s[2],
        1 => s[0] * s[2],
        _ => s[0] * s[1],
    };
    grid.perm[c][axis] * area / (0.5 * s[axis])
}

/// Two-point transmissibility between cells `a` and `b` along `axis`:
/// half-cell transmissibilities combined in series.
pub fn transmissibility(grid: &Grid, a: usize, b: usize, axis: Axis) -> f64 {
    let ax = axis as usize;
    let ta = half_trans(grid, a, ax);
    let tb = half_trans(grid, b, ax);
    1.0 / (1.0 / ta + 1.0 / tb)
}

/// One connection per face shared by two active cells, `a < b`.
pub fn build_connections(grid: &Grid) -> ConnectionList {
    let mut conns = Vec::new();
    for a in 0..grid.n_active {
        let (i, j, k) = grid.ijk[a];
        for (axis, (ni, nj, nk)) in [
            (Axis::X, (i + 1, j, k)),
            (Axis::Y, (i, j + 1, k)),
            (Axis::Z, (i, j, k + 1)),
        ] {
            if let Some(b) = grid.active_at(ni, nj, nk) {
                conns.push(Connection {
                    a,
                    b,
                    trans: transmissibility(grid, a, b, axis),
                    axis,
                    dz: grid.depth[b] - grid.depth[a],
                });
            }
        }
    }
    ConnectionList { conns }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deck::{parse_deck, MILLIDARCY};
    use crate::testing::TWO_CELL_DECK;

    fn two_cell() -> DeckModel {
        parse_deck(TWO_CELL_DECK).unwrap()
    }

    #[test]
    fn all_active() {
        let g = build_grid(&two_cell()).unwrap();
        assert_eq!(g.n_active, 2);
        assert_eq!(g.volume, vec![1000.0, 1000.0]);
    }

    #[test]
    fn inactive_cell_dropped() {
        let mut m = two_cell();
        m.actnum = vec![1, 0];
        let g = build_grid(&m).unwrap();
        assert_eq!(g.n_active, 1);
        assert_eq!(g.global_index, vec![0]);
        assert!(build_connections(&g).is_empty());
    }

    #[test]
    fn zero_porosity_is_inactive() {
        let mut m = two_cell();
        m.poro = vec![0.0, 0.2];
        let g = build_grid(&m).unwrap();
        assert_eq!(g.global_index, vec![1]);
    }

    #[test]
    fn empty_grid() {
        let mut m = two_cell();
        m.actnum = vec![0, 0];
        assert_eq!(build_grid(&m), Err(GridError::EmptyGrid));
    }

    #[test]
    fn layer_center_depths() {
        let mut m = two_cell();
        m.dimens = (1, 1, 2);
        m.cell_sizes.dx = vec![10.0];
        m.cell_sizes.dz = vec![10.0, 10.0];
        let g = build_grid(&m).unwrap();
        assert_eq!(g.depth, vec![1005.0, 1015.0]);
        let conns = build_connections(&g);
        assert_eq!(conns.conns[0].dz, 10.0);
        assert_eq!(conns.conns[0].axis, Axis::Z);
    }

    #[test]
    fn harmonic_transmissibility_hand_value() {
        // two 10 m cubes, 100 mD: t = k * 100 m² / 5 m, T = t / 2
        let g = build_grid(&two_cell()).unwrap();
        let conns = build_connections(&g);
        assert_eq!(conns.len(), 1);
        let t = 100.0 * MILLIDARCY * 100.0 / 5.0;
        approx::assert_relative_eq!(conns.conns[0].trans, t / 2.0, max_relative = 1e-15);
        assert!(conns.conns[0].trans > 0.0);
    }

    #[test]
    fn single_cell_has_no_connections() {
        let mut m = two_cell();
        m.dimens = (1, 1, 1);
        m.cell_sizes.dx = vec![10.0];
        m.poro.truncate(1);
        m.permx.truncate(1);
        m.permy.truncate(1);
        m.permz.truncate(1);
        m.actnum.truncate(1);
        let g = build_grid(&m).unwrap();
        assert!(build_connections(&g).is_empty());
    }
}
