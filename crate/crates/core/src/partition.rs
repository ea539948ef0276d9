//! Interface/interior index sets of the non-overlapping decomposition.
//!
//! Free dofs are numbered interface first (lexicographic node order), then
//! interiors grouped by subdomain.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::mesh::StructuredMesh;

const NONE: usize = usize::MAX;

#[derive(Clone, Debug)]
pub struct SubdomainDofs {
    /// Global dof ids of Γ_i, ascending. They are also indices into Γ.
    pub gamma: Vec<usize>,
    /// Global dof ids of the interior, a contiguous block.
    pub interior: Range<usize>,
    /// Number of lattice nodes on ∂Ω_i, Dirichlet ones included.
    pub boundary_nodes: usize,
}

#[derive(Clone, Debug)]
pub struct DofPartition {
    mesh: StructuredMesh,
    node_dof: Vec<usize>,
    dof_node: Vec<usize>,
    n_gamma: usize,
    subs: Vec<SubdomainDofs>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Gamma,
    Interior,
}

/// Position of a Γ_i node on the boundary of its subdomain square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeLabel {
    Corner(usize),
    Left,
    Right,
    Bottom,
    Top,
}

pub fn build_partition(mesh: &StructuredMesh) -> DofPartition {
    let m = mesh.cells_per_subdomain_side();
    let ns = mesh.subdomains_per_side();
    let nn = mesh.nodes_per_side();
    let mut node_dof = vec![NONE; mesh.node_count()];
    let mut dof_node = Vec::new();

    let on_interface = |v: usize| {
        let (i, j) = mesh.node_ij(v);
        i % m == 0 || j % m == 0
    };
    for v in 0..mesh.node_count() {
        if !mesh.is_dirichlet(v) && on_interface(v) {
            node_dof[v] = dof_node.len();
            dof_node.push(v);
        }
    }
    let n_gamma = dof_node.len();

    let mut subs = Vec::with_capacity(ns * ns);
    for k in 0..ns * ns {
        let (si, sj) = mesh.subdomain_position(k);
        let start = dof_node.len();
        for j in sj * m + 1..(sj + 1) * m {
            for i in si * m + 1..(si + 1) * m {
                let v = j * nn + i;
                node_dof[v] = dof_node.len();
                dof_node.push(v);
            }
        }
        let interior = start..dof_node.len();
        let mut gamma = Vec::new();
        for j in sj * m..=(sj + 1) * m {
            for i in si * m..=(si + 1) * m {
                let v = j * nn + i;
                let on_edge = i == si * m || i == (si + 1) * m || j == sj * m || j == (sj + 1) * m;
                if on_edge && node_dof[v] != NONE {
                    gamma.push(node_dof[v]);
                }
            }
        }
        gamma.sort_unstable();
        subs.push(SubdomainDofs { gamma, interior, boundary_nodes: 4 * m });
    }
    DofPartition { mesh: *mesh, node_dof, dof_node, n_gamma, subs }
}

impl DofPartition {
    pub fn mesh(&self) -> &StructuredMesh {
        &self.mesh
    }

    pub fn free_dofs(&self) -> usize {
        self.dof_node.len()
    }

    pub fn gamma_len(&self) -> usize {
        self.n_gamma
    }

    pub fn subdomain_count(&self) -> usize {
        self.subs.len()
    }

    pub fn subdomain(&self, i: usize) -> &SubdomainDofs {
        &self.subs[i]
    }

    pub fn subdomains(&self) -> &[SubdomainDofs] {
        &self.subs
    }

    /// Dof of a node, or `None` for Dirichlet nodes.
    pub fn node_dof(&self, node: usize) -> Option<usize> {
        let d = self.node_dof[node];
        (d != NONE).then_some(d)
    }

    pub fn dof_node(&self, dof: usize) -> usize {
        self.dof_node[dof]
    }

    pub fn is_floating(&self, i: usize) -> bool {
        self.mesh.subdomain_class(i) == crate::mesh::SubdomainClass::Floating
    }

    /// Number of subdomains whose closure contains interface dof `g`.
    pub fn multiplicity(&self, g: usize) -> usize {
        let (i, j) = self.mesh.node_ij(self.dof_node[g]);
        let m = self.mesh.cells_per_subdomain_side();
        let a = if i % m == 0 { 2 } else { 1 };
        let b = if j % m == 0 { 2 } else { 1 };
        a * b
    }

    /// Edge labels of the Γ_i nodes, in Γ_i order.
    pub fn gamma_edge_labels(&self, i: usize) -> Vec<EdgeLabel> {
        let m = self.mesh.cells_per_subdomain_side();
        let (si, sj) = self.mesh.subdomain_position(i);
        let (x0, y0) = (si * m, sj * m);
        self.subs[i]
            .gamma
            .iter()
            .map(|&g| {
                let v = self.dof_node[g];
                let (x, y) = self.mesh.node_ij(v);
                let vert = x == x0 || x == x0 + m;
                let horiz = y == y0 || y == y0 + m;
                match (vert, horiz) {
                    (true, true) => EdgeLabel::Corner(v),
                    (true, false) if x == x0 => EdgeLabel::Left,
                    (true, false) => EdgeLabel::Right,
                    _ if y == y0 => EdgeLabel::Bottom,
                    _ => EdgeLabel::Top,
                }
            })
            .collect()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.free_dofs() {
            return Err(Error::Shape { expected: self.free_dofs(), got: len });
        }
        Ok(())
    }

    /// Restriction of a global free-dof vector to Γ_i or to the interior of `i`.
    pub fn gather(&self, i: usize, v: &[f64], which: Which) -> Result<Vec<f64>> {
        self.check_len(v.len())?;
        let s = &self.subs[i];
        Ok(match which {
            Which::Gamma => s.gamma.iter().map(|&g| v[g]).collect(),
            Which::Interior => v[s.interior.clone()].to_vec(),
        })
    }

    /// Adds `local` into `out` at the positions of Γ_i or the interior of `i`.
    pub fn scatter_add(&self, i: usize, local: &[f64], which: Which, out: &mut [f64]) -> Result<()> {
        self.check_len(out.len())?;
        let s = &self.subs[i];
        match which {
            Which::Gamma => {
                if local.len() != s.gamma.len() {
                    return Err(Error::Shape { expected: s.gamma.len(), got: local.len() });
                }
                for (&g, x) in s.gamma.iter().zip(local) {
                    out[g] += x;
                }
            }
            Which::Interior => {
                if local.len() != s.interior.len() {
                    return Err(Error::Shape { expected: s.interior.len(), got: local.len() });
                }
                for (o, x) in out[s.interior.clone()].iter_mut().zip(local) {
                    *o += x;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;

    #[test]
    fn two_by_two() {
        let p = build_partition(&build_mesh(2, 2).unwrap());
        assert_eq!(p.subdomain_count(), 4);
        assert_eq!(p.gamma_len(), 5);
        for s in p.subdomains() {
            assert_eq!(s.gamma.len(), 3);
            assert_eq!(s.interior.len(), 1);
        }
        // centre node is a cross point
        let centre = p.node_dof(12).unwrap();
        assert_eq!(p.multiplicity(centre), 4);
    }

    #[test]
    fn single_subdomain() {
        let p = build_partition(&build_mesh(1, 4).unwrap());
        assert_eq!(p.gamma_len(), 0);
        assert_eq!(p.subdomain(0).interior.len(), 9);
        let v = vec![1.0; 9];
        assert!(p.gather(0, &v, Which::Gamma).unwrap().is_empty());
    }

    #[test]
    fn floating_gamma_size() {
        let mesh = build_mesh(4, 8).unwrap();
        let p = build_partition(&mesh);
        for k in 0..16 {
            if p.is_floating(k) {
                assert_eq!(p.subdomain(k).gamma.len(), 32);
            }
        }
    }

    #[test]
    fn shape_errors() {
        let p = build_partition(&build_mesh(2, 2).unwrap());
        assert!(matches!(p.gather(0, &[0.0; 3], Which::Gamma), Err(Error::Shape { expected: 9, got: 3 })));
        let mut out = vec![0.0; 9];
        assert!(p.scatter_add(0, &[1.0; 2], Which::Gamma, &mut out).is_err());
    }

    #[test]
    fn edge_labels_of_floating() {
        let mesh = build_mesh(3, 4).unwrap();
        let p = build_partition(&mesh);
        let labels = p.gamma_edge_labels(4);
        assert_eq!(labels.iter().filter(|l| matches!(l, EdgeLabel::Corner(_))).count(), 4);
        assert_eq!(labels.iter().filter(|l| **l == EdgeLabel::Left).count(), 3);
    }
}
