//! High-coefficient islands and the small-eigenvalue count they predict.

use serde::{Deserialize, Serialize};

use crate::assembly::assemble_subdomain;
use crate::error::{Error, Result};
use crate::linalg::{dense_schur, generalized_symmetric_eigen};
use crate::mesh::{CoefficientField, StructuredMesh};
use crate::partition::DofPartition;

/// One connected union of high elements (node sharing counts as contact).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Island {
    pub elements: Vec<usize>,
    pub touches_gamma: bool,
    pub touches_dirichlet: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IslandReport {
    pub subdomain: usize,
    pub floating: bool,
    pub islands: Vec<Island>,
    /// Islands touching Γ_i but not ∂Ω. A floating subdomain always has
    /// at least one small eigenvalue (the constants), so there the count is
    /// raised to one when no island qualifies.
    pub predicted_small: usize,
    pub observed_small: Option<usize>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Components of the elements of subdomain `i` with `ρ ≥ high_cut`.
pub fn find_islands(
    mesh: &StructuredMesh,
    coeffs: &CoefficientField,
    partition: &DofPartition,
    i: usize,
    high_cut: f64,
) -> Result<IslandReport> {
    if i >= partition.subdomain_count() {
        return Err(Error::InvalidParameter(format!("subdomain {i} out of range")));
    }
    let high: Vec<usize> = mesh.subdomain_elements(i).into_iter().filter(|&e| coeffs.rho(e) >= high_cut).collect();
    let mut parent: Vec<usize> = (0..high.len()).collect();
    // first high element seen at each node
    let mut owner = std::collections::HashMap::new();
    for (k, &e) in high.iter().enumerate() {
        for v in mesh.element_nodes(e) {
            match owner.get(&v) {
                None => {
                    owner.insert(v, k);
                }
                Some(&o) => {
                    let (a, b) = (find(&mut parent, o), find(&mut parent, k));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let sub = partition.subdomain(i);
    let mut roots: Vec<usize> = Vec::new();
    let mut islands: Vec<Island> = Vec::new();
    for (k, &e) in high.iter().enumerate() {
        let r = find(&mut parent, k);
        let idx = match roots.iter().position(|x| *x == r) {
            Some(p) => p,
            None => {
                roots.push(r);
                islands.push(Island { elements: Vec::new(), touches_gamma: false, touches_dirichlet: false });
                roots.len() - 1
            }
        };
        let isl = &mut islands[idx];
        isl.elements.push(e);
        for v in mesh.element_nodes(e) {
            if mesh.is_dirichlet(v) {
                isl.touches_dirichlet = true;
            } else if let Some(d) = partition.node_dof(v) {
                if sub.gamma.binary_search(&d).is_ok() {
                    isl.touches_gamma = true;
                }
            }
        }
    }
    let floating = partition.is_floating(i);
    let count = islands.iter().filter(|s| s.touches_gamma && !s.touches_dirichlet).count();
    let predicted_small = if floating { count.max(1) } else { count };
    Ok(IslandReport { subdomain: i, floating, islands, predicted_small, observed_small: None })
}

/// Eigenvalues below `√(ρ₂/ρ₁)`, zeros included.
pub fn observed_small_count(eigenvalues: &[f64], rho1: f64, rho2: f64) -> Result<usize> {
    if !(rho2 > 0.0 && rho1 > rho2) {
        return Err(Error::InvalidParameter(format!("need rho1 > rho2 > 0, got rho1 = {rho1}, rho2 = {rho2}")));
    }
    let cut = (rho2 / rho1).sqrt();
    Ok(eigenvalues.iter().filter(|l| **l < cut).count())
}

/// Island report for subdomain `i` with `observed_small` taken from the
/// exact generalized spectrum. `ρ₁`, `ρ₂` are the field extremes; the high
/// cut defaults to their geometric mean.
pub fn island_check(
    mesh: &StructuredMesh,
    coeffs: &CoefficientField,
    partition: &DofPartition,
    i: usize,
    high_cut: Option<f64>,
) -> Result<IslandReport> {
    let (rho1, rho2) = (coeffs.max(), coeffs.min());
    let mut rep = find_islands(mesh, coeffs, partition, i, high_cut.unwrap_or((rho1 * rho2).sqrt()))?;
    let sm = assemble_subdomain(mesh, coeffs, partition, i)?;
    let s = dense_schur(&sm).map_err(|e| e.in_subdomain(i))?;
    let ev = generalized_symmetric_eigen(&s, &sm.a_gg).map_err(|e| e.in_subdomain(i))?;
    rep.observed_small = Some(observed_small_count(&ev.values, rho1, rho2)?);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;
    use crate::partition::build_partition;

    #[test]
    fn cut_counts() {
        assert_eq!(observed_small_count(&[0.0, 1.24e-11, 1.51e-11, 0.3072, 0.5], 1e12, 1.0).unwrap(), 3);
        assert_eq!(observed_small_count(&[2.14e-7, 1.68e-6, 0.0907], 1e6, 1.0).unwrap(), 2);
        assert!(observed_small_count(&[0.1], 1.0, 1.0).is_err());
    }

    #[test]
    fn diagonal_contact_joins() {
        // two cells touching only at a corner form one island
        let mesh = build_mesh(1, 4).unwrap();
        let part = build_partition(&mesh);
        let c = CoefficientField::from_cells(&mesh, "t", |i, j| if (i, j) == (1, 1) || (i, j) == (2, 2) { 1e6 } else { 1.0 })
            .unwrap();
        let rep = find_islands(&mesh, &c, &part, 0, 1e3).unwrap();
        assert_eq!(rep.islands.len(), 1);
        assert_eq!(rep.islands[0].elements.len(), 4);
        assert!(!rep.islands[0].touches_gamma);
    }

    #[test]
    fn flags() {
        let mesh = build_mesh(2, 4).unwrap();
        let part = build_partition(&mesh);
        // sub 0 spans cells 0..4; an island at cell (3,1) touches Γ at x = 4
        let c = CoefficientField::from_cells(&mesh, "t", |i, j| if (i, j) == (3, 1) || (i, j) == (0, 2) { 1e6 } else { 1.0 })
            .unwrap();
        let rep = find_islands(&mesh, &c, &part, 0, 1e3).unwrap();
        assert_eq!(rep.islands.len(), 2);
        assert_eq!(rep.predicted_small, 1);
        assert!(rep.islands.iter().any(|s| s.touches_dirichlet));
    }
}
