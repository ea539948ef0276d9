//! Preconditioned conjugate gradients with a Lanczos condition estimate.

use serde::{Deserialize, Serialize};

use super::eigen::tridiagonal_eigenvalues;
use super::sparse::{dot, norm};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcgReport {
    pub iterations: usize,
    pub converged: bool,
    /// `‖r_k‖ / ‖b‖` for `k = 0..=iterations`.
    pub residuals: Vec<f64>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub cond_estimate: f64,
}

/// Extreme Ritz values of the Lanczos matrix implied by the CG coefficients.
pub fn lanczos_extremes(alphas: &[f64], betas: &[f64]) -> Result<(f64, f64)> {
    let k = alphas.len();
    if k == 0 {
        return Ok((1.0, 1.0));
    }
    let mut diag = vec![0.0; k];
    let mut off = vec![0.0; k - 1];
    for i in 0..k {
        diag[i] = 1.0 / alphas[i];
        if i > 0 {
            diag[i] += betas[i - 1] / alphas[i - 1];
        }
        if i + 1 < k {
            off[i] = betas[i].sqrt() / alphas[i];
        }
    }
    let ev = tridiagonal_eigenvalues(&diag, &off)?;
    Ok((ev[0], ev[k - 1]))
}

/// Solves `A x = b` from `x = 0`, stopping when `‖r‖/‖b‖ ≤ rtol`.
pub fn pcg<A, M>(apply_operator: A, apply_preconditioner: M, b: &[f64], rtol: f64, max_iter: usize) -> Result<(Vec<f64>, PcgReport)>
where
    A: Fn(&[f64]) -> Result<Vec<f64>>,
    M: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let nb = norm(b);
    if !nb.is_finite() {
        return Err(Error::Divergence { iteration: 0, msg: "right-hand side is not finite".into() });
    }
    let mut report = PcgReport {
        iterations: 0,
        converged: true,
        residuals: vec![if nb == 0.0 { 0.0 } else { 1.0 }],
        alphas: Vec::new(),
        betas: Vec::new(),
        lambda_min: 1.0,
        lambda_max: 1.0,
        cond_estimate: 1.0,
    };
    if nb == 0.0 {
        return Ok((x, report));
    }
    let mut r = b.to_vec();
    let mut z = apply_preconditioner(&r)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    report.converged = false;
    for it in 1..=max_iter {
        let q = apply_operator(&p)?;
        let pq = dot(&p, &q);
        if !(pq > 0.0) || !pq.is_finite() || !(rz > 0.0) {
            return Err(Error::Divergence { iteration: it, msg: format!("curvature p·Ap = {pq:e}, r·z = {rz:e}") });
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        report.alphas.push(alpha);
        report.iterations = it;
        let res = norm(&r) / nb;
        if !res.is_finite() {
            return Err(Error::Divergence { iteration: it, msg: "residual is not finite".into() });
        }
        report.residuals.push(res);
        if res <= rtol {
            report.converged = true;
            break;
        }
        if it == max_iter {
            break;
        }
        z = apply_preconditioner(&r)?;
        let rz_new = dot(&r, &z);
        if !rz_new.is_finite() || rz_new < 0.0 {
            return Err(Error::Divergence { iteration: it, msg: "preconditioner is not positive definite".into() });
        }
        let beta = rz_new / rz;
        report.betas.push(beta);
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let (lo, hi) = lanczos_extremes(&report.alphas, &report.betas)?;
    report.lambda_min = lo;
    report.lambda_max = hi;
    report.cond_estimate = hi / lo;
    Ok((x, report))
}
