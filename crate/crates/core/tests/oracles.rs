mod common;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use common::{lognormal, pattern, piecewise_constant, random_vec, rel_diff, rng, test_meshes};
use nosas::bench::{run_experiment, ExperimentConfig, Problem};
use nosas::coarse::{aas_basis, mes_basis, nosas_basis, threshold, CoarseKind, RhsVariant};
use nosas::linalg::sparse::{dense, dot, mul};
use nosas::mesh::PatternSpec;
use nosas::precond::{build_preconditioner, verify_spectrum, Preconditioner};

const LOW_RANK_KINDS: [CoarseKind; 5] = [
    CoarseKind::NosasExact { c: 0.25 },
    CoarseKind::NosasBlockDiagonal { c: 0.64 },
    CoarseKind::NosasDiagonal { c: 0.64 },
    CoarseKind::Mes,
    CoarseKind::Aas,
];

fn precond(p: &Problem, kind: CoarseKind) -> Preconditioner {
    build_preconditioner(&p.mesh, &p.coeffs, p.partition.clone(), kind).unwrap()
}

/// Columns `R₀ᵀ e_j` for every interface dof.
fn prolongation(p: &Problem, pc: &Preconditioner) -> DMatrix<f64> {
    let (ng, n) = (p.partition.gamma_len(), p.partition.free_dofs());
    let mut phi = DMatrix::zeros(n, ng);
    for j in 0..ng {
        let mut e = vec![0.0; ng];
        e[j] = 1.0;
        phi.column_mut(j).copy_from_slice(&pc.coarse().prolong(&p.partition, &e).unwrap());
    }
    phi
}

fn energy(p: &Problem, u: &[f64]) -> f64 {
    dot(u, &mul(&p.system.a, u))
}

fn rel_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

#[test]
fn woodbury_solve_matches_dense_coarse_matrix() {
    let mut r = rng(1);
    for (name, p) in test_meshes() {
        for kind in LOW_RANK_KINDS {
            let pc = precond(&p, kind);
            let a0 = pc.coarse().coarse_matrix_dense(&p.partition);
            let rhs = random_vec(&mut r, p.partition.gamma_len());
            let got = DVector::from_vec(pc.coarse().apply_coarse_inverse(&rhs).unwrap());
            let b = DVector::from_column_slice(&rhs);
            // normwise backward error; the string mesh makes A₀ too ill
            // conditioned for a forward comparison
            let d = (&a0 * &got - &b).norm() / (a0.norm() * got.norm() + b.norm());
            assert!(d < 1e-12, "{name} {}: {d}", kind.name());
            if name.starts_with("constant") || name.starts_with("lognormal") {
                let want = a0.clone().lu().solve(&b).unwrap();
                assert!(rel_diff(got.as_slice(), want.as_slice()) < 1e-9);
            }
        }
    }
}

#[test]
fn coarse_matrix_is_galerkin_for_energy_extensions() {
    // exact NOSAS, MES and AAS: A₀ = R₀ A R₀ᵀ
    for (name, p) in test_meshes() {
        let a = dense(&p.system.a);
        for kind in [CoarseKind::NosasExact { c: 0.25 }, CoarseKind::NosasExact { c: 1.3 }, CoarseKind::Mes, CoarseKind::Aas] {
            let pc = precond(&p, kind);
            let phi = prolongation(&p, &pc);
            let galerkin = phi.transpose() * &a * &phi;
            let a0 = pc.coarse().coarse_matrix_dense(&p.partition);
            let d = rel_matrix(&galerkin, &a0);
            assert!(d < 1e-9, "{name} {}: {d}", kind.name());
        }
    }
}

#[test]
fn exact_coarse_matrix_matches_minimum_energy_formula() {
    // Σ Rᵀ (A_ΓΓ - A_ΓI P (Pᵀ A_II P)⁻¹ Pᵀ A_IΓ) R
    for (name, p) in test_meshes() {
        let eta = threshold(0.25, p.mesh.cells_per_subdomain_side());
        let pc = precond(&p, CoarseKind::NosasExact { c: 0.25 });
        let ng = p.partition.gamma_len();
        let mut want = DMatrix::zeros(ng, ng);
        for i in 0..p.partition.subdomain_count() {
            let l = common::local(&p, i);
            let b = nosas_basis(&l.sm, &l.x, &p.partition.gamma_edge_labels(i), RhsVariant::Exact, eta).unwrap();
            let mut local = l.sm.a_gg.clone();
            if b.kept > 0 {
                let aii = dense(&l.sm.a_ii);
                let agi = dense(&l.sm.a_gi);
                let pap = b.p.transpose() * &aii * &b.p;
                let cross = &agi * &b.p;
                local -= &cross * pap.clone().lu().try_inverse().unwrap() * cross.transpose();
            }
            let gi = &p.partition.subdomain(i).gamma;
            for r in 0..gi.len() {
                for c in 0..gi.len() {
                    want[(gi[r], gi[c])] += local[(r, c)];
                }
            }
        }
        let got = pc.coarse().coarse_matrix_dense(&p.partition);
        let d = rel_matrix(&want, &got);
        assert!(d < 1e-9, "{name}: {d}");
    }
}

#[test]
fn local_matrix_is_invariant_under_eigenvector_scaling() {
    let mut r = rng(5);
    let p = pattern(4, 8, PatternSpec::InclusionGrid { high: 1e6, low: 1.0 });
    let eta = threshold(0.25, 8);
    for i in [0, 1, 5] {
        let l = common::local(&p, i);
        for variant in RhsVariant::ALL {
            let b = nosas_basis(&l.sm, &l.x, &p.partition.gamma_edge_labels(i), variant, eta).unwrap();
            assert!(b.kept > 0);
            let sigma = DMatrix::from_diagonal(&DVector::from_iterator(b.kept, (0..b.kept).map(|_| 10f64.powf(r.gen_range(-3.0..3.0)))));
            let q = &b.q * &sigma;
            let aq = &b.a_tilde * &q;
            let c = q.tr_mul(&aq).try_inverse().unwrap();
            let dm = DMatrix::from_diagonal(&DVector::from_column_slice(&b.d));
            let scaled = &b.a_tilde - &aq * (0.5 * (&dm * &c + &c * &dm)) * aq.transpose();
            let d = rel_matrix(&scaled, &b.local_matrix());
            assert!(d < 1e-9, "subdomain {i} {}: {d}", variant.as_str());
            // the extension P G w depends only on span(Q)
            let w = random_vec(&mut r, l.sm.gamma_len());
            let ext = -(&l.x * &q) * (&c * aq.transpose() * DVector::from_column_slice(&w));
            assert!(rel_diff(ext.as_slice(), &b.extend(&w)) < 1e-9);
        }
    }
}

#[test]
fn empty_coarse_space_reduces_to_interface_solve() {
    let p = pattern(2, 4, PatternSpec::Constant { value: 1.0 });
    let pc = precond(&p, CoarseKind::NosasExact { c: 1e-6 });
    assert_eq!(pc.n_e(), 0);
    let mut r = rng(3);
    let rhs = random_vec(&mut r, p.partition.gamma_len());
    let at = dense(pc.coarse().interface_matrix());
    let want = at.lu().solve(&DVector::from_column_slice(&rhs)).unwrap();
    assert!(rel_diff(&pc.coarse().apply_coarse_inverse(&rhs).unwrap(), want.as_slice()) < 1e-12);
}

#[test]
fn mes_constant_is_stationary_in_energy() {
    let p = lognormal(3, 6, 11, 1.5);
    let pc = precond(&p, CoarseKind::Mes);
    let mut r = rng(4);
    let eps = 1e-4;
    for i in 0..p.partition.subdomain_count() {
        let sub = p.partition.subdomain(i).clone();
        let mut w = vec![0.0; p.partition.gamma_len()];
        for &g in &sub.gamma {
            w[g] = r.gen_range(-1.0..1.0);
        }
        let u = pc.coarse().prolong(&p.partition, &w).unwrap();
        let shifted = |t: f64| {
            let mut v = u.clone();
            for k in sub.interior.clone() {
                v[k] += t;
            }
            energy(&p, &v)
        };
        let (e0, ep, em) = (shifted(0.0), shifted(eps), shifted(-eps));
        assert!(ep >= e0 && em >= e0, "subdomain {i}");
        let slope = (ep - em) / (2.0 * eps);
        assert!(slope.abs() < 1e-6 * e0.max(1.0), "subdomain {i}: slope {slope}");
    }
}

#[test]
fn mes_extension_never_costs_more_than_aas() {
    let mut r = rng(6);
    for seed in 0..5 {
        let p = piecewise_constant(3, 6, seed);
        let mes = precond(&p, CoarseKind::Mes);
        let aas = precond(&p, CoarseKind::Aas);
        for _ in 0..10 {
            let w = random_vec(&mut r, p.partition.gamma_len());
            let em = energy(&p, &mes.coarse().prolong(&p.partition, &w).unwrap());
            let ea = energy(&p, &aas.coarse().prolong(&p.partition, &w).unwrap());
            assert!(em <= ea * (1.0 + 1e-12), "{em} > {ea}");
        }
    }
}

#[test]
fn aas_extends_ones_to_interface_fraction() {
    let p = pattern(3, 4, PatternSpec::Constant { value: 1.0 });
    for i in 0..p.partition.subdomain_count() {
        let l = common::local(&p, i);
        let sub = p.partition.subdomain(i);
        let b = aas_basis(&l.sm, sub.boundary_nodes);
        let got = b.extend(&vec![1.0; sub.gamma.len()]);
        let want = sub.gamma.len() as f64 / sub.boundary_nodes as f64;
        assert!(got.iter().all(|v| (v - want).abs() < 1e-14), "subdomain {i}");
        if p.partition.is_floating(i) {
            assert_eq!(want, 1.0);
        }
    }
}

#[test]
fn mes_extension_of_constants_is_constant() {
    // A 1 = 0 on a floating subdomain, so the least-energy constant is 1
    let p = lognormal(3, 4, 2, 1.0);
    let l = common::local(&p, 4);
    let b = mes_basis(&l.sm);
    assert!(b.extend(&vec![1.0; l.sm.gamma_len()]).iter().all(|v| (v - 1.0).abs() < 1e-12));
}

#[test]
fn harmonic_prolongation_is_discrete_harmonic() {
    let p = lognormal(3, 6, 9, 2.0);
    let pc = precond(&p, CoarseKind::Harmonic);
    let mut r = rng(8);
    let ng = p.partition.gamma_len();
    let u = pc.coarse().prolong(&p.partition, &random_vec(&mut r, ng)).unwrap();
    let au = mul(&p.system.a, &u);
    let interior = au[ng..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = au.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(interior < 1e-10 * scale, "{interior} vs {scale}");
}

#[test]
fn lanczos_estimate_tracks_exact_spectrum() {
    for (pattern, kind) in [
        (PatternSpec::InclusionGrid { high: 1e6, low: 1.0 }, CoarseKind::NosasExact { c: 0.25 }),
        (PatternSpec::DualStripe { high: 1e6, low: 1.0 }, CoarseKind::NosasDiagonal { c: 0.25 }),
        (PatternSpec::Channel { high: 1e6, low: 1.0, offset: Some(3), width: 1 }, CoarseKind::Mes),
    ] {
        let cfg = ExperimentConfig { subdomains_per_side: 4, cells_per_subdomain_side: 8, pattern, kind, verify: true, ..Default::default() };
        let rep = run_experiment(&cfg).unwrap();
        let exact = rep.verify.unwrap().cond;
        let d = (rep.cond_estimate - exact).abs() / exact;
        assert!(d < 0.05, "{}: estimate {} exact {exact}", kind.name(), rep.cond_estimate);
    }
}

#[test]
fn mes_conditions_no_worse_than_aas() {
    for seed in 0..10 {
        let p = piecewise_constant(3, 4, 100 + seed);
        let cond = |kind| {
            let ev = verify_spectrum(&p.system.a, &precond(&p, kind)).unwrap();
            ev[ev.len() - 1] / ev[0]
        };
        let (m, a) = (cond(CoarseKind::Mes), cond(CoarseKind::Aas));
        assert!(m <= a * (1.0 + 1e-9), "seed {seed}: MES {m} AAS {a}");
    }
}

#[test]
fn unique_decomposition_is_stable() {
    // Γ is covered by the coarse space alone, so u = R₀ᵀu_Γ + Σ R_iᵀu_i is
    // forced; its energy must stay within (2 + 3/λ) a(u, u).
    let mut r = rng(12);
    for (name, p) in test_meshes() {
        let pc = precond(&p, CoarseKind::NosasExact { c: 0.25 });
        let Some(lmin) = pc.bound_report(None).lambda_min_eta else { continue };
        let c0 = 2.0 + 3.0 / lmin;
        let ng = p.partition.gamma_len();
        let a0 = pc.coarse().coarse_matrix_dense(&p.partition);
        for _ in 0..20 {
            let u = random_vec(&mut r, p.partition.free_dofs());
            let ug = DVector::from_column_slice(&u[..ng]);
            let coarse = ug.dot(&(&a0 * &ug));
            let ext = pc.coarse().prolong(&p.partition, &u[..ng]).unwrap();
            let rest: Vec<f64> = u.iter().zip(&ext).map(|(a, b)| a - b).collect();
            // rest vanishes on Γ, and interiors of different subdomains do not couple
            let local = energy(&p, &rest);
            let total = coarse + local;
            assert!(total <= c0 * energy(&p, &u) * (1.0 + 1e-9), "{name}: {total} vs {}", c0 * energy(&p, &u));
        }
    }
}
