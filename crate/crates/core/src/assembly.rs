//! P1 stiffness assembly: element matrices, per-subdomain Neumann blocks and
//! the global system with Dirichlet nodes eliminated. Load is `f = 1`.

use nalgebra::DMatrix;
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};
use crate::mesh::{CoefficientField, StructuredMesh};
use crate::partition::DofPartition;

/// Stiffness matrix of `rho * grad u . grad v` on one triangle.
pub fn element_stiffness(vertices: [[f64; 2]; 3], rho_k: f64) -> Result<[[f64; 3]; 3]> {
    let [a, b, c] = vertices;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let scale = [a, b, c]
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0_f64, |s, x| s.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    if !(det.abs() > 1e-14 * scale * scale) {
        return Err(Error::DegenerateGeometry(det / 2.0));
    }
    let gx = [b[1] - c[1], c[1] - a[1], a[1] - b[1]];
    let gy = [c[0] - b[0], a[0] - c[0], b[0] - a[0]];
    let f = rho_k / (2.0 * det.abs());
    let mut k = [[0.0; 3]; 3];
    for r in 0..3 {
        for s in 0..3 {
            k[r][s] = f * (gx[r] * gx[s] + gy[r] * gy[s]);
        }
    }
    Ok(k)
}

/// Neumann matrix of one subdomain in (Γ_i, interior) block form.
#[derive(Clone, Debug)]
pub struct SubdomainMatrices {
    pub a_gg: DMatrix<f64>,
    pub a_gi: CsrMatrix<f64>,
    pub a_ii: CsrMatrix<f64>,
    pub b_g: Vec<f64>,
    pub b_i: Vec<f64>,
}

impl SubdomainMatrices {
    pub fn gamma_len(&self) -> usize {
        self.a_gg.nrows()
    }

    pub fn interior_len(&self) -> usize {
        self.a_ii.nrows()
    }

    /// `A_ΓI * 1`, the row sums of the coupling block.
    pub fn a_gi_row_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.gamma_len()];
        for (r, _, v) in self.a_gi.triplet_iter() {
            out[r] += v;
        }
        out
    }

    /// Dense copy of the full Neumann matrix, Γ_i first.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let (ng, ni) = (self.gamma_len(), self.interior_len());
        let mut a = DMatrix::zeros(ng + ni, ng + ni);
        a.view_mut((0, 0), (ng, ng)).copy_from(&self.a_gg);
        for (r, c, v) in self.a_gi.triplet_iter() {
            a[(r, ng + c)] = *v;
            a[(ng + c, r)] = *v;
        }
        for (r, c, v) in self.a_ii.triplet_iter() {
            a[(ng + r, ng + c)] = *v;
        }
        a
    }
}

/// Global stiffness matrix over free dofs and the load vector.
#[derive(Clone, Debug)]
pub struct GlobalSystem {
    pub a: CsrMatrix<f64>,
    pub b: Vec<f64>,
}

#[derive(Clone, Copy)]
enum Slot {
    Gamma(usize),
    Interior(usize),
    Fixed,
}

pub fn assemble_subdomain(
    mesh: &StructuredMesh,
    coeffs: &CoefficientField,
    partition: &DofPartition,
    i: usize,
) -> Result<SubdomainMatrices> {
    if i >= partition.subdomain_count() {
        return Err(Error::InvalidParameter(format!("subdomain {i} out of range")));
    }
    let sub = partition.subdomain(i);
    let (ng, ni) = (sub.gamma.len(), sub.interior.len());
    let slot = |node: usize| match partition.node_dof(node) {
        None => Slot::Fixed,
        Some(d) if sub.interior.contains(&d) => Slot::Interior(d - sub.interior.start),
        Some(d) => Slot::Gamma(sub.gamma.binary_search(&d).expect("closure node outside Γ_i")),
    };
    let area = mesh.h() * mesh.h() / 2.0;

    let mut a_gg = DMatrix::zeros(ng, ng);
    let mut a_gi = CooMatrix::new(ng, ni);
    let mut a_ii = CooMatrix::new(ni, ni);
    let mut b_g = vec![0.0; ng];
    let mut b_i = vec![0.0; ni];
    for e in mesh.subdomain_elements(i) {
        let k = element_stiffness(mesh.element_vertices(e), coeffs.rho(e))?;
        let slots = mesh.element_nodes(e).map(slot);
        for r in 0..3 {
            match slots[r] {
                Slot::Gamma(p) => b_g[p] += area / 3.0,
                Slot::Interior(p) => b_i[p] += area / 3.0,
                Slot::Fixed => {}
            }
            for s in 0..3 {
                let v = k[r][s];
                match (slots[r], slots[s]) {
                    (Slot::Gamma(p), Slot::Gamma(q)) => a_gg[(p, q)] += v,
                    (Slot::Gamma(p), Slot::Interior(q)) => a_gi.push(p, q, v),
                    (Slot::Interior(p), Slot::Interior(q)) => a_ii.push(p, q, v),
                    _ => {}
                }
            }
        }
    }
    Ok(SubdomainMatrices {
        a_gg,
        a_gi: CsrMatrix::from(&a_gi),
        a_ii: CsrMatrix::from(&a_ii),
        b_g,
        b_i,
    })
}

pub fn assemble_global(mesh: &StructuredMesh, coeffs: &CoefficientField, partition: &DofPartition) -> Result<GlobalSystem> {
    let n = partition.free_dofs();
    let area = mesh.h() * mesh.h() / 2.0;
    let mut a = CooMatrix::new(n, n);
    let mut b = vec![0.0; n];
    for e in 0..mesh.element_count() {
        let k = element_stiffness(mesh.element_vertices(e), coeffs.rho(e))?;
        let dofs = mesh.element_nodes(e).map(|v| partition.node_dof(v));
        for r in 0..3 {
            let Some(p) = dofs[r] else { continue };
            b[p] += area / 3.0;
            for s in 0..3 {
                if let Some(q) = dofs[s] {
                    a.push(p, q, k[r][s]);
                }
            }
        }
    }
    Ok(GlobalSystem { a: CsrMatrix::from(&a), b })
}

/// `sum_K rho_K |grad u|^2 |K|` with `u` given on free dofs (zero on ∂Ω).
pub fn energy(mesh: &StructuredMesh, coeffs: &CoefficientField, partition: &DofPartition, u: &[f64]) -> f64 {
    let mut total = 0.0;
    for e in 0..mesh.element_count() {
        let k = element_stiffness(mesh.element_vertices(e), coeffs.rho(e)).expect("structured mesh is non-degenerate");
        let vals = mesh.element_nodes(e).map(|v| partition.node_dof(v).map_or(0.0, |d| u[d]));
        for r in 0..3 {
            for s in 0..3 {
                total += vals[r] * k[r][s] * vals[s];
            }
        }
    }
    total
}
