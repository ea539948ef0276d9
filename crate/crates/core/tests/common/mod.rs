#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use nosas::assembly::{assemble_subdomain, SubdomainMatrices};
use nosas::bench::Problem;
use nosas::linalg::{factor_spd, interior_solve_of_coupling};
use nosas::mesh::{build_mesh, generate_coefficients, CoefficientField, PatternSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `ρ = exp(σ g)` per element, `g` standard normal.
pub fn lognormal(ns: usize, m: usize, seed: u64, sigma: f64) -> Problem {
    let mesh = build_mesh(ns, m).unwrap();
    let mut r = rng(seed);
    let normal = Normal::new(0.0, sigma).unwrap();
    let rho = (0..mesh.element_count()).map(|_| normal.sample(&mut r).exp()).collect();
    let coeffs = CoefficientField::new(&mesh, rho, format!("lognormal {seed}")).unwrap();
    Problem::new(mesh, coeffs).unwrap()
}

/// Constant value per subdomain, drawn log-uniformly in `[1e-3, 1e3]`.
pub fn piecewise_constant(ns: usize, m: usize, seed: u64) -> Problem {
    let mesh = build_mesh(ns, m).unwrap();
    let mut r = rng(seed);
    let vals: Vec<f64> = (0..ns * ns).map(|_| 10f64.powf(r.gen_range(-3.0..3.0))).collect();
    let coeffs = CoefficientField::from_cells(&mesh, "piecewise", |i, j| vals[(j / m) * ns + i / m]).unwrap();
    Problem::new(mesh, coeffs).unwrap()
}

pub fn pattern(ns: usize, m: usize, spec: PatternSpec) -> Problem {
    let mesh = build_mesh(ns, m).unwrap();
    let coeffs = generate_coefficients(&mesh, &spec).unwrap();
    Problem::new(mesh, coeffs).unwrap()
}

/// The meshes used by the per-subdomain checks.
pub fn test_meshes() -> Vec<(&'static str, Problem)> {
    vec![
        ("constant 3x3/4", pattern(3, 4, PatternSpec::Constant { value: 1.0 })),
        ("channel 4x4/8", pattern(4, 8, PatternSpec::Channel { high: 1e6, low: 1.0, offset: None, width: 1 })),
        ("comb 2x2/16", pattern(2, 16, PatternSpec::Comb { high: 1e6, low: 1.0 })),
        ("string 4x4/8", pattern(4, 8, PatternSpec::String { high: 1e12, low: 1.0 })),
        ("inclusions 4x4/8", pattern(4, 8, PatternSpec::InclusionGrid { high: 1e6, low: 1.0 })),
        ("dual stripe 4x4/8", pattern(4, 8, PatternSpec::DualStripe { high: 1e6, low: 1.0 })),
        ("lognormal 3x3/6", lognormal(3, 6, 7, 2.0)),
    ]
}

pub struct Local {
    pub sm: SubdomainMatrices,
    pub x: DMatrix<f64>,
}

/// Subdomain matrices and `A_II⁻¹ A_IΓ`.
pub fn local(p: &Problem, i: usize) -> Local {
    let sm = assemble_subdomain(&p.mesh, &p.coeffs, &p.partition, i).unwrap();
    let x = if sm.interior_len() > 0 {
        interior_solve_of_coupling(&sm, &factor_spd(&sm.a_ii).unwrap())
    } else {
        DMatrix::zeros(0, sm.gamma_len())
    };
    Local { sm, x }
}

pub fn random_vec(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let s = dot(a, a).sqrt().max(dot(b, b).sqrt()).max(f64::MIN_POSITIVE);
    d / s
}
