//! Non-overlapping additive Schwarz preconditioner
//! `M⁻¹ = R₀ᵀ A₀⁻¹ R₀ + Σ R_iᵀ A_II^(i)⁻¹ R_i`.

use std::sync::Arc;

use nalgebra::DMatrix;
use nalgebra_sparse::CsrMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_subdomain, SubdomainMatrices};
use crate::coarse::{
    aas_basis, assemble_coarse, assemble_harmonic, mes_basis, nosas_basis_from_schur, threshold, CoarseKind,
    CoarseOperator, SpectralCoarseBasis,
};
use crate::error::{Error, Result};
use crate::linalg::cholesky::dense_cholesky;
use crate::linalg::{factor_spd, interior_solve_of_coupling, schur_from_extension, symmetric_eigenvalues, SpdFactorization};
use crate::mesh::{CoefficientField, StructuredMesh};
use crate::partition::DofPartition;

/// Free dofs up to which `verify_spectrum` materializes `M⁻¹A`.
pub const VERIFY_LIMIT: usize = 2000;

pub struct Preconditioner {
    kind: CoarseKind,
    partition: Arc<DofPartition>,
    locals: Vec<Option<Arc<SpdFactorization>>>,
    bases: Vec<SpectralCoarseBasis>,
    coarse: CoarseOperator,
    warnings: Vec<String>,
}

/// Per-subdomain data produced during the build.
struct LocalBuild {
    sm: SubdomainMatrices,
    factor: Option<Arc<SpdFactorization>>,
    x: Option<Arc<DMatrix<f64>>>,
}

fn build_local(mesh: &StructuredMesh, coeffs: &CoefficientField, partition: &DofPartition, i: usize, need_x: bool) -> Result<LocalBuild> {
    let sm = assemble_subdomain(mesh, coeffs, partition, i)?;
    let factor = if sm.interior_len() > 0 { Some(Arc::new(factor_spd(&sm.a_ii)?)) } else { None };
    let x = if need_x {
        Some(Arc::new(match &factor {
            Some(f) => interior_solve_of_coupling(&sm, f),
            None => DMatrix::zeros(0, sm.gamma_len()),
        }))
    } else {
        None
    };
    Ok(LocalBuild { sm, factor, x })
}

/// Performs all local factorizations and eigensolves, then assembles the
/// coarse problem.
pub fn build_preconditioner(
    mesh: &StructuredMesh,
    coeffs: &CoefficientField,
    partition: Arc<DofPartition>,
    kind: CoarseKind,
) -> Result<Preconditioner> {
    kind.validate()?;
    let n_sub = partition.subdomain_count();
    let need_x = !matches!(kind, CoarseKind::Aas | CoarseKind::Mes);
    let eta = kind.threshold_constant().map(|c| threshold(c, mesh.cells_per_subdomain_side()));
    let built: Vec<(LocalBuild, Option<SpectralCoarseBasis>, Option<DMatrix<f64>>)> = (0..n_sub)
        .into_par_iter()
        .map(|i| {
            let run = || -> Result<_> {
                let lb = build_local(mesh, coeffs, &partition, i, need_x)?;
                let (basis, schur) = match kind {
                    CoarseKind::Harmonic => {
                        let x = lb.x.as_ref().expect("extension computed");
                        (None, Some(schur_from_extension(&lb.sm, x)))
                    }
                    CoarseKind::Aas => (Some(aas_basis(&lb.sm, partition.subdomain(i).boundary_nodes)), None),
                    CoarseKind::Mes => (Some(mes_basis(&lb.sm)), None),
                    _ => {
                        let x = lb.x.as_ref().expect("extension computed");
                        let s = schur_from_extension(&lb.sm, x);
                        let labels = partition.gamma_edge_labels(i);
                        let variant = kind.rhs_variant().expect("nosas kind");
                        (Some(nosas_basis_from_schur(&lb.sm, &s, x, &labels, variant, eta.unwrap())?), None)
                    }
                };
                Ok((lb, basis, schur))
            };
            run().map_err(|e| e.in_subdomain(i))
        })
        .collect::<Result<_>>()?;

    let mut locals = Vec::with_capacity(n_sub);
    let mut bases = Vec::with_capacity(n_sub);
    let mut schurs = Vec::new();
    let mut exts = Vec::new();
    let mut warnings = Vec::new();
    for (i, (lb, basis, schur)) in built.into_iter().enumerate() {
        locals.push(lb.factor);
        if let Some(b) = basis {
            if let Some(w) = &b.warning {
                warnings.push(format!("subdomain {i}: {w}"));
            }
            bases.push(b);
        }
        if let Some(s) = schur {
            schurs.push(s);
            exts.push(lb.x.expect("extension computed"));
        }
    }
    let coarse = match kind {
        CoarseKind::Harmonic => assemble_harmonic(&schurs, exts, &partition)?,
        _ => assemble_coarse(&bases, &partition, kind)?,
    };
    Ok(Preconditioner { kind, partition, locals, bases, coarse, warnings })
}

/// Bounds from the condition-number theorems next to a measured value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// `min_i λ_{k_i+1}^(i)`; absent for non-spectral kinds or when every
    /// eigenvalue was kept.
    pub lambda_min_eta: Option<f64>,
    pub theoretical_upper: Option<f64>,
    /// Upper bound on `λ_max(M⁻¹A)`.
    pub lambda_max_bound: f64,
    pub measured_cond: Option<f64>,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        match (self.measured_cond, self.theoretical_upper) {
            (Some(m), Some(t)) => m <= t * 1.01,
            _ => true,
        }
    }
}

impl Preconditioner {
    pub fn kind(&self) -> CoarseKind {
        self.kind
    }

    pub fn partition(&self) -> &DofPartition {
        &self.partition
    }

    pub fn coarse(&self) -> &CoarseOperator {
        &self.coarse
    }

    /// Coarse bases (empty for the harmonic kind).
    pub fn bases(&self) -> &[SpectralCoarseBasis] {
        &self.bases
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn n_e(&self) -> usize {
        self.coarse.n_e()
    }

    /// `z = M⁻¹ r`.
    pub fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        let p = &self.partition;
        if r.len() != p.free_dofs() {
            return Err(Error::Shape { expected: p.free_dofs(), got: r.len() });
        }
        let rc = self.coarse.restrict(p, r)?;
        let xc = self.coarse.apply_coarse_inverse(&rc)?;
        let mut z = self.coarse.prolong(p, &xc)?;
        let local: Vec<(usize, Vec<f64>)> = self
            .locals
            .par_iter()
            .enumerate()
            .filter_map(|(i, f)| f.as_ref().map(|f| (i, f.solve(&r[p.subdomain(i).interior.clone()]))))
            .collect();
        for (i, sol) in local {
            let range = p.subdomain(i).interior.clone();
            for (zi, s) in z[range].iter_mut().zip(sol) {
                *zi += s;
            }
        }
        Ok(z)
    }

    /// Spectral bound data; `measured_cond` is filled in by the caller.
    pub fn bound_report(&self, measured_cond: Option<f64>) -> BoundReport {
        let lambda_min_eta = self.bases.iter().filter_map(SpectralCoarseBasis::first_excluded).reduce(f64::min);
        let inexact = self.kind.is_inexact();
        let theoretical_upper = match self.kind.rhs_variant() {
            None => None,
            Some(_) => lambda_min_eta.map(|l| {
                if inexact {
                    4.0 * (2.0 + 7.0 * (1.0f64).max(1.0 / l))
                } else {
                    2.0 * (2.0 + 3.0 / l)
                }
            }),
        };
        BoundReport { lambda_min_eta, theoretical_upper, lambda_max_bound: if inexact { 4.0 } else { 2.0 }, measured_cond }
    }

    /// Dense `M⁻¹` built column by column (`n ≤ VERIFY_LIMIT`).
    pub fn dense_inverse(&self) -> Result<DMatrix<f64>> {
        let n = self.partition.free_dofs();
        if n > VERIFY_LIMIT {
            return Err(Error::InvalidParameter(format!("verify mode is limited to {VERIFY_LIMIT} dofs, got {n}")));
        }
        let cols: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                self.apply(&e)
            })
            .collect::<Result<_>>()?;
        let m = DMatrix::from_fn(n, n, |r, c| cols[c][r]);
        Ok(0.5 * (&m + m.transpose()))
    }
}

/// Eigenvalues of `M⁻¹A`, ascending, computed as those of `Lᵀ M⁻¹ L`
/// with `A = L Lᵀ`.
pub fn verify_spectrum(a: &CsrMatrix<f64>, precond: &Preconditioner) -> Result<Vec<f64>> {
    let minv = precond.dense_inverse()?;
    let l = dense_cholesky(&crate::linalg::sparse::dense(a))?;
    let t = l.transpose() * minv * &l;
    let t = 0.5 * (&t + t.transpose());
    symmetric_eigenvalues(&t)
}
