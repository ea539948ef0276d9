//! Numerical kernels: sparse SPD factorization, dense Schur complements,
//! the dense generalized eigensolver and PCG.

pub mod cholesky;
pub mod eigen;
pub mod pcg;
pub mod sparse;

use nalgebra::DMatrix;

pub use cholesky::{factor_spd, SpdFactorization};
pub use eigen::{generalized_symmetric_eigen, symmetric_eigen, symmetric_eigenvalues, EigenPairs};
pub use pcg::{pcg, PcgReport};

use crate::assembly::SubdomainMatrices;
use crate::error::Result;

/// `A_II⁻¹ A_IΓ`, dense `|I| x |Γ_i|`.
pub fn interior_solve_of_coupling(sm: &SubdomainMatrices, a_ii: &SpdFactorization) -> DMatrix<f64> {
    let (ng, ni) = (sm.gamma_len(), sm.interior_len());
    let mut rhs = DMatrix::zeros(ni, ng);
    for (r, c, v) in sm.a_gi.triplet_iter() {
        rhs[(c, r)] += *v;
    }
    a_ii.solve_matrix(&rhs)
}

/// `A_ΓΓ - A_ΓI X` for `X = A_II⁻¹ A_IΓ`, symmetrized.
pub fn schur_from_extension(sm: &SubdomainMatrices, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = sm.a_gg.clone();
    for (r, c, v) in sm.a_gi.triplet_iter() {
        for k in 0..s.ncols() {
            s[(r, k)] -= v * x[(c, k)];
        }
    }
    0.5 * (&s + s.transpose())
}

/// Schur complement `S = A_ΓΓ - A_ΓI A_II⁻¹ A_IΓ` of one subdomain.
pub fn dense_schur(sm: &SubdomainMatrices) -> Result<DMatrix<f64>> {
    if sm.interior_len() == 0 {
        return Ok(sm.a_gg.clone());
    }
    let f = factor_spd(&sm.a_ii)?;
    Ok(schur_from_extension(sm, &interior_solve_of_coupling(sm, &f)))
}
