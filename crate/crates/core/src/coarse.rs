//! Coarse spaces: AAS, MES, exact and inexact NOSAS, and the harmonic
//! (direct solver) space.
//!
//! Every low-rank variant stores, per subdomain, an interior extension
//! `u_I = P G u_Γi` and a local coarse matrix written as `Ã + V K Vᵀ`:
//!
//! | kind  | `P`                  | `G`                  | `V`            | `K`                      |
//! |-------|----------------------|----------------------|----------------|--------------------------|
//! | NOSAS | `-A_II⁻¹ A_IΓ Q`     | `(QᵀÃQ)⁻¹ QᵀÃ`       | `ÃQ`           | `-D (QᵀÃQ)⁻¹`            |
//! | MES   | `1`                  | `-1ᵀA_IΓ / 1ᵀA_II1`  | `A_ΓI 1`       | `-1 / 1ᵀA_II1`           |
//! | AAS   | `1`                  | `1ᵀ / m_i`           | `[Gᵀ, A_ΓI 1]` | `[[1ᵀA_II1, 1], [1, 0]]` |
//!
//! `Ã` is `A_ΓΓ` except for the inexact NOSAS variants. The global coarse
//! matrix `Ã_ΓΓ + V K Vᵀ` is inverted with the Woodbury identity
//! `(Ã + VKVᵀ)⁻¹ = Ã⁻¹ - Ã⁻¹V (K⁻¹ + VᵀÃ⁻¹V)⁻¹ VᵀÃ⁻¹`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use serde::{Deserialize, Serialize};

use crate::assembly::SubdomainMatrices;
use crate::error::{Error, Result};
use crate::linalg::cholesky::dense_cholesky;
use crate::linalg::{factor_spd, generalized_symmetric_eigen, schur_from_extension, SpdFactorization};
use crate::partition::{DofPartition, EdgeLabel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoarseKind {
    Harmonic,
    Aas,
    Mes,
    NosasExact { c: f64 },
    NosasBlockDiagonal { c: f64 },
    NosasDiagonal { c: f64 },
}

/// Right-hand-side matrix of the local eigenproblem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsVariant {
    Exact,
    BlockDiagonal,
    Diagonal,
}

impl RhsVariant {
    pub const ALL: [RhsVariant; 3] = [RhsVariant::Exact, RhsVariant::BlockDiagonal, RhsVariant::Diagonal];

    pub fn as_str(&self) -> &'static str {
        match self {
            RhsVariant::Exact => "exact",
            RhsVariant::BlockDiagonal => "block_diagonal",
            RhsVariant::Diagonal => "diagonal",
        }
    }
}

impl CoarseKind {
    pub fn validate(&self) -> Result<()> {
        match self.threshold_constant() {
            Some(c) if !(c > 0.0 && c.is_finite()) => {
                Err(Error::InvalidParameter(format!("threshold constant c must be positive, got {c}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CoarseKind::Harmonic => "harmonic",
            CoarseKind::Aas => "aas",
            CoarseKind::Mes => "mes",
            CoarseKind::NosasExact { .. } => "nosas_exact",
            CoarseKind::NosasBlockDiagonal { .. } => "nosas_block_diagonal",
            CoarseKind::NosasDiagonal { .. } => "nosas_diagonal",
        }
    }

    /// Builds a kind from its name; `c` is used by the NOSAS variants.
    pub fn from_name(name: &str, c: f64) -> Result<CoarseKind> {
        let kind = match name {
            "harmonic" => CoarseKind::Harmonic,
            "aas" => CoarseKind::Aas,
            "mes" => CoarseKind::Mes,
            "nosas_exact" | "exact" => CoarseKind::NosasExact { c },
            "nosas_block_diagonal" | "block_diagonal" | "block" => CoarseKind::NosasBlockDiagonal { c },
            "nosas_diagonal" | "diagonal" | "diag" => CoarseKind::NosasDiagonal { c },
            other => return Err(Error::InvalidParameter(format!("unknown coarse kind {other:?}"))),
        };
        kind.validate()?;
        Ok(kind)
    }

    pub fn threshold_constant(&self) -> Option<f64> {
        match *self {
            CoarseKind::NosasExact { c } | CoarseKind::NosasBlockDiagonal { c } | CoarseKind::NosasDiagonal { c } => Some(c),
            _ => None,
        }
    }

    pub fn rhs_variant(&self) -> Option<RhsVariant> {
        match self {
            CoarseKind::NosasExact { .. } => Some(RhsVariant::Exact),
            CoarseKind::NosasBlockDiagonal { .. } => Some(RhsVariant::BlockDiagonal),
            CoarseKind::NosasDiagonal { .. } => Some(RhsVariant::Diagonal),
            _ => None,
        }
    }

    pub fn is_inexact(&self) -> bool {
        matches!(self.rhs_variant(), Some(RhsVariant::BlockDiagonal | RhsVariant::Diagonal))
    }
}

/// `η = c h / H`.
pub fn threshold(c: f64, cells_per_subdomain_side: usize) -> f64 {
    c / cells_per_subdomain_side as f64
}

/// `A_ΓΓ^(i)` with couplings outside each open edge removed (block variant)
/// or all off-diagonals removed (diagonal variant).
pub fn rhs_matrix(a_gg: &DMatrix<f64>, labels: &[EdgeLabel], variant: RhsVariant) -> DMatrix<f64> {
    match variant {
        RhsVariant::Exact => a_gg.clone(),
        RhsVariant::Diagonal => DMatrix::from_diagonal(&a_gg.diagonal()),
        RhsVariant::BlockDiagonal => {
            DMatrix::from_fn(a_gg.nrows(), a_gg.ncols(), |r, c| if labels[r] == labels[c] { a_gg[(r, c)] } else { 0.0 })
        }
    }
}

/// Per-subdomain coarse data. For AAS and MES `q`, `d` and `qaq` are empty.
#[derive(Clone, Debug)]
pub struct SpectralCoarseBasis {
    /// Full generalized spectrum (NOSAS only), ascending.
    pub eigenvalues: Vec<f64>,
    /// `k_i`, the coarse rank contributed by this subdomain.
    pub kept: usize,
    pub q: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub d: Vec<f64>,
    pub qaq: DMatrix<f64>,
    /// Maps Γ_i data to the coarse coefficients of the interior extension.
    pub g: DMatrix<f64>,
    /// Local right-hand-side matrix `Ã^(i)`.
    pub a_tilde: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub core: DMatrix<f64>,
    /// Set when every eigenvalue fell below the threshold.
    pub warning: Option<String>,
}

impl SpectralCoarseBasis {
    /// First eigenvalue not kept, if any.
    pub fn first_excluded(&self) -> Option<f64> {
        self.eigenvalues.get(self.kept).copied()
    }

    /// Interior values `P G w` for Γ_i data `w`.
    pub fn extend(&self, w: &[f64]) -> Vec<f64> {
        let t = &self.g * DVector::from_column_slice(w);
        (&self.p * t).as_slice().to_vec()
    }

    /// Adjoint of `extend`: `Gᵀ Pᵀ r`.
    pub fn extend_adjoint(&self, r: &[f64]) -> Vec<f64> {
        let t = self.p.tr_mul(&DVector::from_column_slice(r));
        self.g.tr_mul(&t).as_slice().to_vec()
    }

    /// Local coarse matrix `Ã + V K Vᵀ`.
    pub fn local_matrix(&self) -> DMatrix<f64> {
        &self.a_tilde + &self.v * &self.core * self.v.transpose()
    }
}

fn ones_products(sm: &SubdomainMatrices) -> (f64, Vec<f64>) {
    let s: f64 = sm.a_ii.values().iter().sum();
    (s, sm.a_gi_row_sums())
}

/// AAS: interior set to the average of the data over all `m_i` nodes of
/// ∂Ω_i, Dirichlet nodes counting as zeros.
pub fn aas_basis(sm: &SubdomainMatrices, boundary_nodes: usize) -> SpectralCoarseBasis {
    let (ng, ni) = (sm.gamma_len(), sm.interior_len());
    let mut b = empty_basis(sm.a_gg.clone(), ni);
    if ni == 0 || ng == 0 {
        return b;
    }
    let (s, v) = ones_products(sm);
    let avg = 1.0 / boundary_nodes as f64;
    b.kept = 1;
    b.p = DMatrix::from_element(ni, 1, 1.0);
    b.g = DMatrix::from_element(1, ng, avg);
    b.v = DMatrix::from_fn(ng, 2, |r, c| if c == 0 { avg } else { v[r] });
    b.core = DMatrix::from_row_slice(2, 2, &[s, 1.0, 1.0, 0.0]);
    b
}

/// MES: the constant interior value of least energy.
pub fn mes_basis(sm: &SubdomainMatrices) -> SpectralCoarseBasis {
    let (ng, ni) = (sm.gamma_len(), sm.interior_len());
    let mut b = empty_basis(sm.a_gg.clone(), ni);
    if ni == 0 || ng == 0 {
        return b;
    }
    let (s, v) = ones_products(sm);
    b.kept = 1;
    b.p = DMatrix::from_element(ni, 1, 1.0);
    b.g = DMatrix::from_fn(1, ng, |_, c| -v[c] / s);
    b.v = DMatrix::from_column_slice(ng, 1, &v);
    b.core = DMatrix::from_element(1, 1, -1.0 / s);
    b
}

fn empty_basis(a_tilde: DMatrix<f64>, ni: usize) -> SpectralCoarseBasis {
    let ng = a_tilde.nrows();
    SpectralCoarseBasis {
        eigenvalues: Vec::new(),
        kept: 0,
        q: DMatrix::zeros(ng, 0),
        p: DMatrix::zeros(ni, 0),
        d: Vec::new(),
        qaq: DMatrix::zeros(0, 0),
        g: DMatrix::zeros(0, ng),
        a_tilde,
        v: DMatrix::zeros(ng, 0),
        core: DMatrix::zeros(0, 0),
        warning: None,
    }
}

/// NOSAS basis from the local eigenproblem `S ξ = λ Ã ξ`, keeping `λ < eta`.
/// `x` is `A_II⁻¹ A_IΓ`.
pub fn nosas_basis(
    sm: &SubdomainMatrices,
    x: &DMatrix<f64>,
    labels: &[EdgeLabel],
    variant: RhsVariant,
    eta: f64,
) -> Result<SpectralCoarseBasis> {
    let s = schur_from_extension(sm, x);
    nosas_basis_from_schur(sm, &s, x, labels, variant, eta)
}

pub fn nosas_basis_from_schur(
    sm: &SubdomainMatrices,
    s: &DMatrix<f64>,
    x: &DMatrix<f64>,
    labels: &[EdgeLabel],
    variant: RhsVariant,
    eta: f64,
) -> Result<SpectralCoarseBasis> {
    let ng = sm.gamma_len();
    let a_tilde = rhs_matrix(&sm.a_gg, labels, variant);
    let ep = generalized_symmetric_eigen(s, &a_tilde)?;
    let k = ep.values.iter().take_while(|l| **l < eta).count();
    let mut b = empty_basis(a_tilde, sm.interior_len());
    b.eigenvalues = ep.values;
    if ng > 0 && k == ng {
        b.warning = Some(format!("all {ng} eigenvalues lie below the threshold; the coarse space is the whole interface"));
    }
    if k == 0 {
        return Ok(b);
    }
    let q = ep.vectors.columns(0, k).into_owned();
    let p = -(x * &q);
    let d: Vec<f64> = b.eigenvalues[..k].iter().map(|l| 1.0 - l).collect();
    let aq = &b.a_tilde * &q;
    let qaq = q.tr_mul(&aq);
    let qaq = 0.5 * (&qaq + qaq.transpose());
    let c = qaq.clone().cholesky().ok_or_else(|| Error::Breakdown("QᵀÃQ is not positive definite".into()))?.inverse();
    let dm = DMatrix::from_diagonal(&DVector::from_column_slice(&d));
    let core = -0.5 * (&dm * &c + &c * &dm);
    b.g = &c * aq.transpose();
    b.v = aq;
    b.core = core;
    b.kept = k;
    b.q = q;
    b.p = p;
    b.d = d;
    b.qaq = qaq;
    Ok(b)
}

/// Relative residuals of the three spectral identities
///
/// 1. `-(A_ΓΓ Q - Ã Q Λ) = A_ΓI P`
/// 2. `-(Qᵀ A_ΓΓ - Λ Qᵀ Ã) = Pᵀ A_IΓ`
/// 3. `Qᵀ A_ΓΓ Q - Λ Qᵀ Ã Q = Pᵀ A_II P`, and `D QᵀÃQ = QᵀÃQ D`
///
/// With `Ã = A_ΓΓ` these read `-A_ΓΓ Q D = A_ΓI P` and so on.
pub fn identity_residuals(sm: &SubdomainMatrices, b: &SpectralCoarseBasis) -> [f64; 3] {
    let k = b.kept;
    if k == 0 || b.q.ncols() == 0 {
        return [0.0; 3];
    }
    let lam = DMatrix::from_diagonal(&DVector::from_iterator(k, b.eigenvalues[..k].iter().copied()));
    let aq = &sm.a_gg * &b.q;
    let tq = &b.a_tilde * &b.q;
    let lhs1 = -(&aq - &tq * &lam);
    let mut rhs1 = DMatrix::zeros(sm.gamma_len(), k);
    for (r, c, v) in sm.a_gi.triplet_iter() {
        for j in 0..k {
            rhs1[(r, j)] += v * b.p[(c, j)];
        }
    }
    let rel = |a: &DMatrix<f64>, b: &DMatrix<f64>| {
        let scale = a.norm().max(b.norm()).max(f64::MIN_POSITIVE);
        (a - b).norm() / scale
    };
    let r1 = rel(&lhs1, &rhs1);
    let r2 = rel(&lhs1.transpose(), &rhs1.transpose());
    let lhs3 = b.q.tr_mul(&aq) - &lam * b.q.tr_mul(&tq);
    let mut aiip = DMatrix::zeros(b.p.nrows(), k);
    for (r, c, v) in sm.a_ii.triplet_iter() {
        for j in 0..k {
            aiip[(r, j)] += v * b.p[(c, j)];
        }
    }
    let rhs3 = b.p.tr_mul(&aiip);
    let dm = DMatrix::from_diagonal(&DVector::from_column_slice(&b.d));
    let comm = rel(&(&dm * &b.qaq), &(&b.qaq * &dm));
    let r3 = rel(&(0.5 * (&lhs3 + lhs3.transpose())), &rhs3).max(comm);
    [r1, r2, r3]
}

#[derive(Clone, Debug)]
enum CoreFactor {
    /// Lower Cholesky factor of `-M`.
    Negative(DMatrix<f64>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

#[derive(Clone, Debug)]
struct Woodbury {
    /// `(subdomain, first column, rank)` for each block of `V`.
    blocks: Vec<(usize, usize, usize)>,
    /// `Ã⁻¹ V`, `|Γ| x R`.
    w: DMatrix<f64>,
    core: CoreFactor,
}

#[derive(Clone, Debug)]
enum Extension {
    LowRank { p: DMatrix<f64>, g: DMatrix<f64> },
    /// `A_II⁻¹ A_IΓ`; the interior is `-X w`.
    Harmonic { x: Arc<DMatrix<f64>> },
}

/// Assembled coarse problem with its prolongation.
#[derive(Clone, Debug)]
pub struct CoarseOperator {
    kind: CoarseKind,
    n_gamma: usize,
    n_free: usize,
    interface_matrix: CsrMatrix<f64>,
    interface: SpdFactorization,
    woodbury: Option<Woodbury>,
    /// Local `V_i` and `K_i`, kept to rebuild the coarse matrix densely.
    low_rank: Vec<(DMatrix<f64>, DMatrix<f64>)>,
    ext: Vec<Extension>,
    ranks: Vec<usize>,
    gamma_lists: Vec<Vec<usize>>,
}

fn gamma_lists(partition: &DofPartition) -> Vec<Vec<usize>> {
    partition.subdomains().iter().map(|s| s.gamma.clone()).collect()
}

fn assemble_interface(partition: &DofPartition, blocks: &[&DMatrix<f64>]) -> CsrMatrix<f64> {
    let n = partition.gamma_len();
    let mut coo = CooMatrix::new(n, n);
    for (i, blk) in blocks.iter().enumerate() {
        let gi = &partition.subdomain(i).gamma;
        for r in 0..gi.len() {
            for c in 0..gi.len() {
                let v = blk[(r, c)];
                if v != 0.0 {
                    coo.push(gi[r], gi[c], v);
                }
            }
        }
    }
    CsrMatrix::from(&coo)
}

/// Coarse operator for the low-rank kinds (AAS, MES, NOSAS).
pub fn assemble_coarse(bases: &[SpectralCoarseBasis], partition: &DofPartition, kind: CoarseKind) -> Result<CoarseOperator> {
    if kind == CoarseKind::Harmonic {
        return Err(Error::InvalidParameter("the harmonic coarse space is built by assemble_harmonic".into()));
    }
    if bases.len() != partition.subdomain_count() {
        return Err(Error::Shape { expected: partition.subdomain_count(), got: bases.len() });
    }
    let n = partition.gamma_len();
    let a_tilde: Vec<&DMatrix<f64>> = bases.iter().map(|b| &b.a_tilde).collect();
    let interface_matrix = assemble_interface(partition, &a_tilde);
    let interface = factor_spd(&interface_matrix)?;

    let mut blocks = Vec::new();
    let mut total = 0;
    for (i, b) in bases.iter().enumerate() {
        if b.v.ncols() > 0 {
            blocks.push((i, total, b.v.ncols()));
            total += b.v.ncols();
        }
    }
    let woodbury = if total == 0 {
        None
    } else {
        let mut w = DMatrix::zeros(n, total);
        let mut kinv = DMatrix::zeros(total, total);
        for &(i, c0, r) in &blocks {
            let b = &bases[i];
            let gi = &partition.subdomain(i).gamma;
            for j in 0..r {
                let mut col = vec![0.0; n];
                for (t, &g) in gi.iter().enumerate() {
                    col[g] = b.v[(t, j)];
                }
                let sol = interface.solve(&col);
                w.column_mut(c0 + j).copy_from_slice(&sol);
            }
            let inv = b
                .core
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Breakdown("local coarse core is singular".into()).in_subdomain(i))?;
            kinv.view_mut((c0, c0), (r, r)).copy_from(&inv);
        }
        // M = K⁻¹ + Vᵀ W
        let mut m = kinv;
        for &(i, c0, r) in &blocks {
            let gi = &partition.subdomain(i).gamma;
            for j in 0..r {
                for col in 0..total {
                    let mut s = 0.0;
                    for (t, &g) in gi.iter().enumerate() {
                        s += bases[i].v[(t, j)] * w[(g, col)];
                    }
                    m[(c0 + j, col)] += s;
                }
            }
        }
        let m = 0.5 * (&m + m.transpose());
        let core = match kind {
            CoarseKind::Aas => {
                let lu = m.lu();
                if !lu.is_invertible() {
                    return Err(Error::Breakdown("Woodbury core is singular".into()));
                }
                CoreFactor::Lu(lu)
            }
            _ => CoreFactor::Negative(dense_cholesky(&-m).map_err(|_| {
                Error::Breakdown("Woodbury core is not definite; the threshold is too aggressive".into())
            })?),
        };
        Some(Woodbury { blocks, w, core })
    };
    Ok(CoarseOperator {
        kind,
        n_gamma: n,
        n_free: partition.free_dofs(),
        interface_matrix,
        interface,
        woodbury,
        low_rank: bases.iter().map(|b| (b.v.clone(), b.core.clone())).collect(),
        ext: bases.iter().map(|b| Extension::LowRank { p: b.p.clone(), g: b.g.clone() }).collect(),
        ranks: bases.iter().map(|b| b.kept).collect(),
        gamma_lists: gamma_lists(partition),
    })
}

/// Exact coarse space: the whole interface with discrete harmonic
/// extensions. `schurs[i]` is `S^(i)` and `extensions[i]` is `A_II⁻¹ A_IΓ`.
pub fn assemble_harmonic(
    schurs: &[DMatrix<f64>],
    extensions: Vec<Arc<DMatrix<f64>>>,
    partition: &DofPartition,
) -> Result<CoarseOperator> {
    let blocks: Vec<&DMatrix<f64>> = schurs.iter().collect();
    let interface_matrix = assemble_interface(partition, &blocks);
    let interface = factor_spd(&interface_matrix)?;
    Ok(CoarseOperator {
        kind: CoarseKind::Harmonic,
        n_gamma: partition.gamma_len(),
        n_free: partition.free_dofs(),
        interface_matrix,
        interface,
        woodbury: None,
        low_rank: Vec::new(),
        ext: extensions.into_iter().map(|x| Extension::Harmonic { x }).collect(),
        ranks: partition.subdomains().iter().map(|s| s.gamma.len()).collect(),
        gamma_lists: gamma_lists(partition),
    })
}

impl CoarseOperator {
    pub fn kind(&self) -> CoarseKind {
        self.kind
    }

    /// `k_i` per subdomain (`|Γ_i|` for the harmonic space).
    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    /// `N_E = Σ k_i`. For the harmonic space this is `|Γ|`.
    pub fn n_e(&self) -> usize {
        if self.kind == CoarseKind::Harmonic {
            self.n_gamma
        } else {
            self.ranks.iter().sum()
        }
    }

    pub fn gamma_len(&self) -> usize {
        self.n_gamma
    }

    /// `Ã_ΓΓ` (or the global Schur complement for the harmonic space).
    pub fn interface_matrix(&self) -> &CsrMatrix<f64> {
        &self.interface_matrix
    }

    /// Solves `(Ã_ΓΓ + V K Vᵀ) x = r`.
    pub fn apply_coarse_inverse(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.n_gamma {
            return Err(Error::Shape { expected: self.n_gamma, got: r.len() });
        }
        if self.n_gamma == 0 {
            return Ok(Vec::new());
        }
        let mut y = self.interface.solve(r);
        if let Some(wb) = &self.woodbury {
            let total = wb.w.ncols();
            let mut t = DVector::zeros(total);
            for &(i, c0, rank) in &wb.blocks {
                let (v, _) = &self.low_rank[i];
                let gi = &self.gamma_lists[i];
                for j in 0..rank {
                    t[c0 + j] = gi.iter().enumerate().map(|(row, &g)| v[(row, j)] * y[g]).sum();
                }
            }
            let s = match &wb.core {
                CoreFactor::Negative(l) => {
                    let z = l.solve_lower_triangular(&t).expect("non-singular factor");
                    -l.transpose().solve_upper_triangular(&z).expect("non-singular factor")
                }
                CoreFactor::Lu(lu) => lu.solve(&t).ok_or_else(|| Error::Breakdown("Woodbury core is singular".into()))?,
            };
            let ws = &wb.w * s;
            for (yi, wi) in y.iter_mut().zip(ws.iter()) {
                *yi -= wi;
            }
        }
        Ok(y)
    }

    /// `R₀ᵀ w`: interface values kept, interiors extended.
    pub fn prolong(&self, partition: &DofPartition, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.n_gamma {
            return Err(Error::Shape { expected: self.n_gamma, got: w.len() });
        }
        let mut out = vec![0.0; self.n_free];
        out[..self.n_gamma].copy_from_slice(w);
        for (i, ext) in self.ext.iter().enumerate() {
            let sub = partition.subdomain(i);
            let wi: Vec<f64> = sub.gamma.iter().map(|&g| w[g]).collect();
            let vals = match ext {
                Extension::LowRank { p, g } => {
                    if p.ncols() == 0 {
                        continue;
                    }
                    p * (g * DVector::from_column_slice(&wi))
                }
                Extension::Harmonic { x } => -(x.as_ref() * DVector::from_column_slice(&wi)),
            };
            out[sub.interior.clone()].copy_from_slice(vals.as_slice());
        }
        Ok(out)
    }

    /// `R₀ r`, the adjoint of `prolong`.
    pub fn restrict(&self, partition: &DofPartition, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.n_free {
            return Err(Error::Shape { expected: self.n_free, got: r.len() });
        }
        let mut out = r[..self.n_gamma].to_vec();
        for (i, ext) in self.ext.iter().enumerate() {
            let sub = partition.subdomain(i);
            let ri = DVector::from_column_slice(&r[sub.interior.clone()]);
            let vals = match ext {
                Extension::LowRank { p, g } => {
                    if p.ncols() == 0 {
                        continue;
                    }
                    g.tr_mul(&p.tr_mul(&ri))
                }
                Extension::Harmonic { x } => -x.tr_mul(&ri),
            };
            for (&gidx, v) in sub.gamma.iter().zip(vals.iter()) {
                out[gidx] += v;
            }
        }
        Ok(out)
    }

    /// Dense coarse matrix `Ã_ΓΓ + Σ Rᵀ V K Vᵀ R`, for checks on small meshes.
    pub fn coarse_matrix_dense(&self, partition: &DofPartition) -> DMatrix<f64> {
        let mut a = crate::linalg::sparse::dense(&self.interface_matrix);
        for (i, (v, k)) in self.low_rank.iter().enumerate() {
            if v.ncols() == 0 {
                continue;
            }
            let loc = v * k * v.transpose();
            let gi = &partition.subdomain(i).gamma;
            for r in 0..gi.len() {
                for c in 0..gi.len() {
                    a[(gi[r], gi[c])] += loc[(r, c)];
                }
            }
        }
        a
    }
}
