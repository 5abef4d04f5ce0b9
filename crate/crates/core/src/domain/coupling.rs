use std::collections::BTreeSet;

use serde::Serialize;

use crate::reservoir::BulkVarSet;

use super::{Domain, DomainError};

/// Flags interior cells whose saturation moved more than `threshold` over
/// the last accepted step. Without a step history nothing is flagged.
pub fn mark_cells(vars: &BulkVarSet, n_interior: usize, threshold: f64) -> Vec<bool> {
    let np = vars.np;
    (0..n_interior)
        .map(|c| {
            vars.has_hist
                && (0..np).any(|j| (vars.s_last[c * np + j] - vars.s_hist[c * np + j]).abs() > threshold)
        })
        .collect()
}

/// Undirected graph over worker ranks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CouplingGraph {
    pub n: usize,
    pub edges: BTreeSet<(usize, usize)>,
}

impl CouplingGraph {
    pub fn new(n: usize) -> CouplingGraph {
        CouplingGraph {
            n,
            edges: BTreeSet::new(),
        }
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a != b {
            self.edges.insert((a.min(b), a.max(b)));
        }
    }
}

/// Applies the two coupling rules to per-rank flags covering interior and
/// ghost cells: a rank with a flagged interior cell couples to all its
/// neighbors; a rank with a flagged ghost couples to that ghost's owner.
/// Every ghost-side assertion must be matched by the owner's interior-side
/// assertion.
pub fn build_coupling_graph(domains: &[Domain], flags: &[Vec<bool>]) -> Result<CouplingGraph, DomainError> {
    let n = domains.len();
    let mut g = CouplingGraph::new(n);
    let mut by_interior: BTreeSet<(usize, usize)> = BTreeSet::new();
    for d in domains {
        let f = &flags[d.rank];
        if f[..d.n_interior()].iter().any(|&x| x) {
            for q in d.neighbors() {
                by_interior.insert((d.rank, q));
                g.add_edge(d.rank, q);
            }
        }
    }
    for d in domains {
        let f = &flags[d.rank];
        let ni = d.n_interior();
        for (k, &owner) in d.ghost_owner.iter().enumerate() {
            if f[ni + k] {
                if !by_interior.contains(&(owner, d.rank)) {
                    return Err(DomainError::AsymmetryDetected {
                        rank: d.rank,
                        other: owner,
                    });
                }
                g.add_edge(d.rank, owner);
            }
        }
    }
    Ok(g)
}

/// Connected components by union-find, each sorted, ordered by smallest
/// member.
pub fn connected_components(g: &CouplingGraph) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..g.n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(a, b) in &g.edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; g.n];
    for v in 0..g.n {
        let r = find(&mut parent, v);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(v);
    }
    groups
}

/// Coupled-solve indexing of one group member.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupInfo {
    pub rank: usize,
    pub members: Vec<usize>,
    /// First group row of each member, in member order.
    pub row_offset: Vec<usize>,
    pub n_rows: usize,
    /// Per ghost: owned inside the group (a degree of freedom) or outside
    /// (a frozen boundary).
    pub ghost_dof: Vec<bool>,
    /// Group row of each degree-of-freedom ghost.
    pub ghost_row: Vec<Option<usize>>,
}

impl GroupInfo {
    pub fn n_boundary(&self) -> usize {
        self.ghost_dof.iter().filter(|&&d| !d).count()
    }
}

/// Contiguous rank-ordered row blocks for the members of `group`.
pub fn build_group_indexing(domains: &[Domain], group: &[usize]) -> Vec<GroupInfo> {
    let mut members = group.to_vec();
    members.sort_unstable();
    let mut row_offset = Vec::with_capacity(members.len());
    let mut n_rows = 0;
    for &m in &members {
        row_offset.push(n_rows);
        n_rows += domains[m].n_interior();
    }
    members
        .iter()
        .map(|&m| {
            let d = &domains[m];
            let ghost_row: Vec<Option<usize>> = d
                .ghost_owner
                .iter()
                .zip(&d.ghost_owner_local)
                .map(|(o, &l)| members.iter().position(|x| x == o).map(|k| row_offset[k] + l))
                .collect();
            GroupInfo {
                rank: m,
                members: members.clone(),
                row_offset: row_offset.clone(),
                n_rows,
                ghost_dof: ghost_row.iter().map(Option::is_some).collect(),
                ghost_row,
            }
        })
        .collect()
}
