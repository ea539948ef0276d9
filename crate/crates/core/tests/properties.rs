mod common;

use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;

use nosas::assembly::{assemble_global, element_stiffness};
use nosas::bench::{parse_config, ExperimentConfig, Problem};
use nosas::coarse::{threshold, CoarseKind, RhsVariant};
use nosas::linalg::symmetric_eigenvalues;
use nosas::linalg::sparse::{dense, dot, mul};
use nosas::mesh::{build_mesh, parse_raster, CoefficientField, PatternSpec};
use nosas::partition::build_partition;
use nosas::precond::build_preconditioner;

fn kind_strategy() -> impl Strategy<Value = CoarseKind> {
    prop_oneof![
        (0.05f64..1.5).prop_map(|c| CoarseKind::NosasExact { c }),
        (0.05f64..1.5).prop_map(|c| CoarseKind::NosasBlockDiagonal { c }),
        (0.05f64..1.5).prop_map(|c| CoarseKind::NosasDiagonal { c }),
        Just(CoarseKind::Mes),
        Just(CoarseKind::Aas),
        Just(CoarseKind::Harmonic),
    ]
}

/// Small mesh with a log-uniform per-cell coefficient.
fn problem_strategy() -> impl Strategy<Value = Problem> {
    (1usize..=3, 2usize..=5)
        .prop_flat_map(|(ns, m)| (Just(ns), Just(m), prop::collection::vec(-4.0f64..4.0, (ns * m) * (ns * m))))
        .prop_map(|(ns, m, logs)| {
            let mesh = build_mesh(ns, m).unwrap();
            let n = ns * m;
            let coeffs = CoefficientField::from_cells(&mesh, "random", |i, j| 10f64.powf(logs[j * n + i])).unwrap();
            Problem::new(mesh, coeffs).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn mesh_counts(ns in 1usize..6, m in 1usize..8) {
        let mesh = build_mesh(ns, m).unwrap();
        let n = ns * m;
        prop_assert_eq!(mesh.node_count(), (n + 1) * (n + 1));
        prop_assert_eq!(mesh.element_count(), 2 * n * n);
        let part = build_partition(&mesh);
        let free = (n - 1) * (n - 1);
        prop_assert_eq!(part.free_dofs(), free);
        let gamma = if ns == 1 { 0 } else { 2 * (ns - 1) * (n - 1) - (ns - 1) * (ns - 1) };
        prop_assert_eq!(part.gamma_len(), gamma);
        let interiors: usize = part.subdomains().iter().map(|s| s.interior.len()).sum();
        prop_assert_eq!(gamma + interiors, free);
        let area: f64 = (0..mesh.element_count())
            .map(|e| {
                let [a, b, c] = mesh.element_vertices(e);
                0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
            })
            .sum();
        prop_assert!((area - 1.0).abs() < 1e-12);
        for g in 0..gamma {
            let k = part.multiplicity(g);
            prop_assert!(k == 2 || k == 4);
        }
    }

    #[test]
    fn element_stiffness_is_symmetric_with_zero_row_sums(
        x in prop::array::uniform6(-2.0f64..2.0),
        rho in 1e-3f64..1e3,
    ) {
        let v = [[x[0], x[1]], [x[2], x[3]], [x[4], x[5]]];
        let area = 0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]));
        prop_assume!(area.abs() > 1e-3);
        let k = element_stiffness(v, rho).unwrap();
        for r in 0..3 {
            prop_assert!(k[r].iter().sum::<f64>().abs() < 1e-9 * rho * k[r][r].abs().max(1.0));
            for c in 0..3 {
                prop_assert!((k[r][c] - k[c][r]).abs() <= 1e-12 * k[r][r].abs().max(1.0));
            }
            prop_assert!(k[r][r] >= 0.0);
        }
    }

    #[test]
    fn restriction_is_adjoint_of_prolongation(p in problem_strategy(), kind in kind_strategy(), seed in any::<u64>()) {
        let pc = build_preconditioner(&p.mesh, &p.coeffs, p.partition.clone(), kind).unwrap();
        let mut r = common::rng(seed);
        let w = common::random_vec(&mut r, p.partition.gamma_len());
        let u = common::random_vec(&mut r, p.partition.free_dofs());
        let lhs = dot(&pc.coarse().prolong(&p.partition, &w).unwrap(), &u);
        let rhs = dot(&w, &pc.coarse().restrict(&p.partition, &u).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn preconditioner_is_linear(p in problem_strategy(), kind in kind_strategy(), a in -3.0f64..3.0, seed in any::<u64>()) {
        let pc = build_preconditioner(&p.mesh, &p.coeffs, p.partition.clone(), kind).unwrap();
        let mut r = common::rng(seed);
        let n = p.partition.free_dofs();
        let (x, y) = (common::random_vec(&mut r, n), common::random_vec(&mut r, n));
        let combo: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + v).collect();
        let (mx, my) = (pc.apply(&x).unwrap(), pc.apply(&y).unwrap());
        let want: Vec<f64> = mx.iter().zip(&my).map(|(u, v)| a * u + v).collect();
        prop_assert!(common::rel_diff(&pc.apply(&combo).unwrap(), &want) < 1e-9);
    }

    #[test]
    fn inverse_is_symmetric_positive_definite(p in problem_strategy(), kind in kind_strategy()) {
        let pc = build_preconditioner(&p.mesh, &p.coeffs, p.partition.clone(), kind).unwrap();
        let minv = pc.dense_inverse().unwrap();
        // dense_inverse symmetrizes, so check against raw columns too
        let n = minv.nrows();
        let raw = DMatrix::from_fn(n, n, |r, c| {
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            pc.apply(&e).unwrap()[r]
        });
        prop_assert!((&raw - raw.transpose()).norm() <= 1e-9 * raw.norm());
        let ev = symmetric_eigenvalues(&minv).unwrap();
        prop_assert!(ev[0] > 0.0, "smallest eigenvalue {}", ev[0]);
    }

    #[test]
    fn kept_modes_respect_threshold(p in problem_strategy(), c in 0.05f64..1.5, variant_ix in 0usize..3) {
        let variant = RhsVariant::ALL[variant_ix];
        let eta = threshold(c, p.mesh.cells_per_subdomain_side());
        for i in 0..p.partition.subdomain_count() {
            let l = common::local(&p, i);
            let b = nosas::coarse::nosas_basis(&l.sm, &l.x, &p.partition.gamma_edge_labels(i), variant, eta).unwrap();
            prop_assert!(b.eigenvalues[..b.kept].iter().all(|l| *l < eta));
            if let Some(first) = b.first_excluded() {
                prop_assert!(first >= eta);
            }
            let top = if variant == RhsVariant::Exact { 1.0 } else { 2.0 };
            prop_assert!(b.eigenvalues.iter().all(|l| *l >= -1e-12 && *l <= top + 1e-9));
        }
    }

    #[test]
    fn scaling_coefficients_keeps_the_spectrum(p in problem_strategy(), scale in -6.0f64..6.0, kind in kind_strategy()) {
        let factor = 10f64.powf(scale);
        let scaled = Problem::new(p.mesh, p.coeffs.scaled(factor)).unwrap();
        let spec = |q: &Problem| {
            let pc = build_preconditioner(&q.mesh, &q.coeffs, q.partition.clone(), kind).unwrap();
            nosas::precond::verify_spectrum(&q.system.a, &pc).unwrap()
        };
        let (a, b) = (spec(&p), spec(&scaled));
        prop_assert!(common::rel_diff(&a, &b) < 1e-7);
    }

    #[test]
    fn global_matrix_is_symmetric_positive_definite(p in problem_strategy(), seed in any::<u64>()) {
        let a = dense(&p.system.a);
        prop_assert!((&a - a.transpose()).norm() <= 1e-12 * a.norm());
        let mut r = common::rng(seed);
        let u = common::random_vec(&mut r, a.nrows());
        prop_assert!(dot(&u, &mul(&p.system.a, &u)) > 0.0);
    }

    #[test]
    fn raster_round_trip(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        use rand::Rng;
        let values: Vec<f64> = (0..rows * cols).map(|_| 10f64.powf(r.gen_range(-12.0..12.0))).collect();
        let text: String = values
            .chunks(cols)
            .map(|row| row.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(", "))
            .collect::<Vec<_>>()
            .join("\n");
        let parsed = parse_raster(text.as_bytes()).unwrap();
        prop_assert_eq!(parsed.rows, rows);
        prop_assert_eq!(parsed.cols, cols);
        prop_assert_eq!(parsed.values, values);
    }

    #[test]
    fn config_round_trip(
        ns in 1usize..20,
        m in 1usize..40,
        kind in kind_strategy(),
        rtol in 1e-12f64..0.5,
        max_iter in 1usize..5000,
        verify in any::<bool>(),
        high in 1.0f64..1e12,
    ) {
        let cfg = ExperimentConfig {
            subdomains_per_side: ns,
            cells_per_subdomain_side: m,
            pattern: PatternSpec::InclusionGrid { high, low: 1.0 },
            kind,
            rtol,
            max_iter,
            verify,
            ..Default::default()
        };
        let json = serde_json::to_string(&cfg).unwrap();
        prop_assert_eq!(parse_config(&json).unwrap(), cfg.clone());
        let mut kv = format!(
            "subdomains = {ns}\ncells = {m}\npattern = inclusion_grid\nhigh = {high:e}\nkind = {}\nrtol = {rtol:e}\nmax_iter = {max_iter}\nverify = {verify}\n",
            kind.name()
        );
        if let Some(c) = kind.threshold_constant() {
            kv.push_str(&format!("c = {c:e}\n"));
        }
        prop_assert_eq!(parse_config(&kv).unwrap(), cfg);
    }
}

#[test]
fn global_assembly_is_partition_independent() {
    // the same fine mesh split 1x1, 2x2 and 4x4 gives one operator up to ordering
    let base = build_mesh(1, 8).unwrap();
    let coeffs = CoefficientField::from_cells(&base, "x", |i, j| 1.0 + (i * 7 + j * 3) as f64 % 5.0).unwrap();
    let reference = {
        let part = Arc::new(build_partition(&base));
        energy_quadratic(&base, &coeffs, &part)
    };
    for ns in [2, 4] {
        let mesh = build_mesh(ns, 8 / ns).unwrap();
        let c = CoefficientField::from_cells(&mesh, "x", |i, j| 1.0 + (i * 7 + j * 3) as f64 % 5.0).unwrap();
        let part = Arc::new(build_partition(&mesh));
        assert!((energy_quadratic(&mesh, &c, &part) - reference).abs() < 1e-10 * reference);
    }
}

/// Energy of the nodal function `x² + y` in whatever dof order the partition uses.
fn energy_quadratic(mesh: &nosas::mesh::StructuredMesh, coeffs: &CoefficientField, part: &nosas::partition::DofPartition) -> f64 {
    let sys = assemble_global(mesh, coeffs, part).unwrap();
    let u: Vec<f64> = (0..part.free_dofs())
        .map(|d| {
            let [x, y] = mesh.node_coords(part.dof_node(d));
            x * x + y
        })
        .collect();
    dot(&u, &mul(&sys.a, &u))
}
