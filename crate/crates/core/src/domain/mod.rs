//! Distribution of cells over workers: partitioning, local ordering,
//! point-to-point maps, ghost exchange and adaptive coupling groups.

mod coupling;
mod partition;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Range;

use serde::Serialize;
use thiserror::Error;

use crate::grid::{Connection, ConnectionList, Grid};
use crate::linsys::Comm;

pub use coupling::{
    build_coupling_graph, build_group_indexing, connected_components, mark_cells, CouplingGraph, GroupInfo,
};
pub use partition::{partition, MAX_IMBALANCE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("cannot split {cells} active cells over {workers} workers")]
    WorkerCount { workers: usize, cells: usize },
    #[error("rank {rank} holds {size} cells, more than 20% away from the mean {mean:.1}")]
    PartitionImbalance { rank: usize, size: usize, mean: f64 },
    #[error("rank {rank} couples to rank {other} through a flagged ghost, but rank {other} does not couple back")]
    AsymmetryDetected { rank: usize, other: usize },
}

/// One worker's view of the distributed grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Domain {
    pub rank: usize,
    pub n_workers: usize,
    /// Active-cell indices of interior cells, ascending.
    pub interior: Vec<usize>,
    /// Active-cell indices of ghost cells, grouped by owner rank.
    pub ghosts: Vec<usize>,
    pub ghost_owner: Vec<usize>,
    /// Local index of each ghost on its owner.
    pub ghost_owner_local: Vec<usize>,
    /// Neighbor rank → local interior indices to send, ascending.
    pub send_element_loc: BTreeMap<usize, BTreeSet<usize>>,
    /// Neighbor rank → local index range receiving its cells.
    pub recv_element_loc: BTreeMap<usize, Range<usize>>,
    /// Connections with at least one interior end, in local indices.
    #[serde(skip)]
    pub conns: Vec<Connection>,
    #[serde(skip)]
    local: HashMap<usize, usize>,
}

impl Domain {
    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn n_local(&self) -> usize {
        self.interior.len() + self.ghosts.len()
    }

    pub fn local_of(&self, cell: usize) -> Option<usize> {
        self.local.get(&cell).copied()
    }

    pub fn global_of(&self, local: usize) -> usize {
        let ni = self.interior.len();
        if local < ni {
            self.interior[local]
        } else {
            self.ghosts[local - ni]
        }
    }

    pub fn neighbors(&self) -> impl Iterator<Item = usize> + '_ {
        self.recv_element_loc.keys().copied()
    }
}

/// Builds every rank's local ordering, maps and connections.
pub fn build_domains(grid: &Grid, conns: &ConnectionList, owner: &[usize], n_workers: usize) -> Vec<Domain> {
    let mut interior: Vec<Vec<usize>> = vec![Vec::new(); n_workers];
    for c in 0..grid.n_active {
        interior[owner[c]].push(c);
    }
    let mut ghost_sets: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); n_workers];
    for cn in &conns.conns {
        let (ra, rb) = (owner[cn.a], owner[cn.b]);
        if ra != rb {
            ghost_sets[ra].insert((rb, cn.b));
            ghost_sets[rb].insert((ra, cn.a));
        }
    }
    let position: Vec<usize> = {
        let mut pos = vec![0; grid.n_active];
        for list in &interior {
            for (k, &c) in list.iter().enumerate() {
                pos[c] = k;
            }
        }
        pos
    };
    let mut domains: Vec<Domain> = (0..n_workers)
        .map(|r| {
            let ni = interior[r].len();
            let ghosts: Vec<usize> = ghost_sets[r].iter().map(|&(_, c)| c).collect();
            let ghost_owner: Vec<usize> = ghost_sets[r].iter().map(|&(o, _)| o).collect();
            let ghost_owner_local = ghosts.iter().map(|&c| position[c]).collect();
            let mut recv: BTreeMap<usize, Range<usize>> = BTreeMap::new();
            for (k, &o) in ghost_owner.iter().enumerate() {
                let e = recv.entry(o).or_insert(ni + k..ni + k);
                e.end = ni + k + 1;
            }
            let mut local = HashMap::with_capacity(ni + ghosts.len());
            for (k, &c) in interior[r].iter().chain(&ghosts).enumerate() {
                local.insert(c, k);
            }
            Domain {
                rank: r,
                n_workers,
                interior: interior[r].clone(),
                ghosts,
                ghost_owner,
                ghost_owner_local,
                send_element_loc: BTreeMap::new(),
                recv_element_loc: recv,
                conns: Vec::new(),
                local,
            }
        })
        .collect();
    for r in 0..n_workers {
        for (k, &o) in domains[r].ghost_owner.clone().iter().enumerate() {
            let loc = domains[r].ghost_owner_local[k];
            domains[o].send_element_loc.entry(r).or_default().insert(loc);
        }
    }
    for cn in &conns.conns {
        let (ra, rb) = (owner[cn.a], owner[cn.b]);
        let ranks: &[usize] = if ra == rb { &[ra] } else { &[ra, rb] };
        for &r in ranks {
            let d = &mut domains[r];
            let local = Connection {
                a: d.local[&cn.a],
                b: d.local[&cn.b],
                ..*cn
            };
            d.conns.push(local);
        }
    }
    domains
}

/// Copies owner values into ghost slots. `data[p]` holds rank `p`'s local
/// field with `stride` values per cell. With `members`, only pairs inside
/// the group exchange.
pub fn exchange<T: Copy>(domains: &[Domain], members: Option<&[usize]>, data: &mut [&mut [T]], stride: usize) {
    let inside = |r: usize| members.is_none_or(|m| m.contains(&r));
    // pack every message first, then deliver
    let mut mail: Vec<(usize, Range<usize>, Vec<T>)> = Vec::new();
    for d in domains.iter().filter(|d| inside(d.rank)) {
        for (&to, locs) in &d.send_element_loc {
            if !inside(to) {
                continue;
            }
            let buf: Vec<T> = locs
                .iter()
                .flat_map(|&l| data[d.rank][l * stride..(l + 1) * stride].iter().copied())
                .collect();
            let range = domains[to].recv_element_loc[&d.rank].clone();
            mail.push((to, range, buf));
        }
    }
    for (to, range, buf) in mail {
        data[to][range.start * stride..range.end * stride].copy_from_slice(&buf);
    }
}

/// Ghost exchange and rank-ordered reductions restricted to one group, for
/// the distributed linear solver.
pub struct GroupComm<'a> {
    pub domains: &'a [Domain],
    pub members: &'a [usize],
}

impl Comm for GroupComm<'_> {
    fn n_parts(&self) -> usize {
        self.members.len()
    }

    fn exchange(&self, x: &mut [Vec<f64>], nb: usize) {
        let mut mail: Vec<(usize, Range<usize>, Vec<f64>)> = Vec::new();
        for (pi, &p) in self.members.iter().enumerate() {
            for (&to, locs) in &self.domains[p].send_element_loc {
                let Some(ti) = self.members.iter().position(|&m| m == to) else {
                    continue;
                };
                let buf: Vec<f64> = locs
                    .iter()
                    .flat_map(|&l| x[pi][l * nb..(l + 1) * nb].iter().copied())
                    .collect();
                mail.push((ti, self.domains[to].recv_element_loc[&p].clone(), buf));
            }
        }
        for (ti, range, buf) in mail {
            x[ti][range.start * nb..range.end * nb].copy_from_slice(&buf);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_connections;
    use crate::testing::box_grid;

    /// The 4×4 layout of the paper's ordering example: rank 1 owns cells
    /// 1, 2, 3 and 5.
    fn fig14() -> Vec<Domain> {
        let g = box_grid(4, 4, 1);
        #[rustfmt::skip]
        let owner = vec![
            0, 1, 1, 1,
            0, 1, 2, 2,
            0, 3, 2, 2,
            0, 3, 3, 3,
        ];
        build_domains(&g, &build_connections(&g), &owner, 4)
    }

    #[test]
    fn fig14_ordering() {
        let d = fig14();
        assert_eq!(d[1].interior, vec![1, 2, 3, 5]);
        assert_eq!(d[1].ghosts, vec![0, 4, 6, 7, 9]);
        assert_eq!(d[1].ghost_owner, vec![0, 0, 2, 2, 3]);
        assert_eq!(d[1].send_element_loc[&0], BTreeSet::from([0, 3]));
        assert_eq!(d[0].recv_element_loc[&1], 4..6);
        assert_eq!(d[0].ghosts[..2], [1, 5]);
    }

    #[test]
    fn single_worker_has_empty_maps() {
        let g = box_grid(3, 3, 1);
        let d = build_domains(&g, &build_connections(&g), &[0; 9], 1);
        assert!(d[0].send_element_loc.is_empty());
        assert!(d[0].recv_element_loc.is_empty());
        assert_eq!(d[0].conns.len(), 12);
    }

    #[test]
    fn exchange_fills_ghosts() {
        let d = fig14();
        let mut data: Vec<Vec<f64>> = d
            .iter()
            .map(|dom| (0..dom.n_local()).map(|l| if l < dom.n_interior() { dom.global_of(l) as f64 } else { -1.0 }).collect())
            .collect();
        let mut refs: Vec<&mut [f64]> = data.iter_mut().map(|v| v.as_mut_slice()).collect();
        exchange(&d, None, &mut refs, 1);
        for (dom, v) in d.iter().zip(&data) {
            for l in 0..dom.n_local() {
                assert_eq!(v[l], dom.global_of(l) as f64);
            }
        }
        let before = data.clone();
        let mut refs: Vec<&mut [f64]> = data.iter_mut().map(|v| v.as_mut_slice()).collect();
        exchange(&d, None, &mut refs, 1);
        assert_eq!(before, data);
    }
}
