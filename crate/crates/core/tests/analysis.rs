use std::f64::consts::PI;

use mcf_core::analysis::{
    convergence_study, diagnostics, discrete_norms, implicit_initial_data,
    implicit_normal_curvature, neck_radius, sphere_errors, sphere_exact, AnalysisError, EocTable,
    Protocol, SphereSolution, StudyConfig,
};
use mcf_core::flow::normalize_normals;
use mcf_core::mesh::{build_dumbbell, build_sphere, node, Dumbbell, Order, Sphere};
use mcf_core::Vec3;
use rand::{Rng, SeedableRng};

#[test]
fn sphere_exact_examples() {
    let (r, h, s) = sphere_exact(2.0, 0.0).unwrap();
    assert_eq!((r, h, s), (2.0, 1.0, 1.0));
    let (r, h, _) = sphere_exact(2.0, 0.6).unwrap();
    assert!((r - 1.264911).abs() < 1e-6);
    assert!((h - 1.581139).abs() < 1e-6);
    assert!(matches!(
        sphere_exact(2.0, 1.0),
        Err(AnalysisError::PastExtinction { .. })
    ));
    assert_eq!(SphereSolution::new(2.0).extinction_time(), 1.0);
}

#[test]
fn sphere_initial_data_is_exact_at_nodes() {
    let r = 1.5;
    let mesh = build_sphere(2, r, Order::Quadratic).unwrap();
    let x = mesh.nodal_vector();
    let s = implicit_initial_data(&Sphere::new(r), &mesh, &x).unwrap();
    let n = mesh.num_nodes();
    for j in 0..n {
        let p = node(&x, n, j);
        let nu = node(s.nu(), n, j);
        assert!((nu - p / r).norm() < 1e-14);
        assert!((s.curvature()[j] - 2.0 / r).abs() < 1e-14);
        assert!((node(&s.v, n, j) + nu * (2.0 / r)).norm() < 1e-14);
    }
    let (nu, h) = implicit_normal_curvature(&Sphere::new(r), &Vec3::new(r, 0.0, 0.0)).unwrap();
    assert_eq!(nu, Vec3::new(1.0, 0.0, 0.0));
    assert!((h - 2.0 / r).abs() < 1e-15);
}

#[test]
fn dumbbell_neck_is_saddle_shaped() {
    let d = Dumbbell::default();
    let (nu, h) = implicit_normal_curvature(&d, &Vec3::new(0.2, 0.0, 0.0)).unwrap();
    assert!((nu - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
    // 1/0.2 around the axis, -2·199/200/0.2 along it
    assert!((h - (5.0 - 9.95)).abs() < 1e-12, "{h}");
}

#[test]
fn vanishing_gradient_is_reported() {
    let mesh = build_sphere(0, 1.0, Order::Linear).unwrap();
    let mut x = mesh.nodal_vector();
    let n = mesh.num_nodes();
    for l in 0..3 {
        x[l * n + 4] = 0.0;
    }
    assert_eq!(
        implicit_initial_data(&Sphere::new(1.0), &mesh, &x),
        Err(AnalysisError::VanishingGradient(4))
    );
}

#[test]
fn discrete_norm_examples() {
    let mesh = build_sphere(2, 2.0, Order::Quadratic).unwrap();
    let x = mesh.nodal_vector();
    let n = mesh.num_nodes();
    let z = discrete_norms(&mesh, &x, &vec![0.0; n]).unwrap();
    assert_eq!((z.mass, z.stiffness, z.energy), (0.0, 0.0, 0.0));

    let c = -0.3;
    let nrm = discrete_norms(&mesh, &x, &vec![c; n]).unwrap();
    let area = discrete_norms(&mesh, &x, &vec![1.0; n])
        .unwrap()
        .mass
        .powi(2);
    assert!(nrm.stiffness < 1e-7);
    assert!((nrm.mass - c.abs() * area.sqrt()).abs() < 1e-12);
    assert!((area / (16.0 * PI) - 1.0).abs() < 1e-3);

    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    for _ in 0..20 {
        let e: Vec<f64> = (0..3 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let k = discrete_norms(&mesh, &x, &e).unwrap();
        let lhs = k.energy * k.energy;
        let rhs = k.mass * k.mass + k.stiffness * k.stiffness;
        assert!((lhs - rhs).abs() <= 1e-12 * lhs);
    }
    assert!(discrete_norms(&mesh, &x, &vec![0.0; n + 1]).is_err());
}

#[test]
fn exact_reference_has_zero_error() {
    let mesh = build_sphere(2, 2.0, Order::Quadratic).unwrap();
    let x0 = mesh.nodal_vector();
    let sol = SphereSolution::new(2.0);
    for i in 0..10 {
        let t = 0.095 * i as f64;
        let state = sol.reference_state(&x0, t).unwrap();
        let e = sphere_errors(&mesh, &x0, &state, &sol).unwrap();
        assert!(e.values().iter().all(|&v| v <= 1e-12), "{e:?}");
    }
}

#[test]
fn single_node_normal_perturbation_is_bracketed() {
    let mesh = build_sphere(2, 2.0, Order::Quadratic).unwrap();
    let x0 = mesh.nodal_vector();
    let n = mesh.num_nodes();
    let sol = SphereSolution::new(2.0);
    let mut state = sol.reference_state(&x0, 0.1).unwrap();
    let (j, eps) = (17, 1e-3);
    state.u[j] += eps;
    let e = sphere_errors(&mesh, &x0, &state, &sol).unwrap();
    let mut unit = vec![0.0; n];
    unit[j] = 1.0;
    let local = discrete_norms(&mesh, &state.x, &unit).unwrap();
    assert!((e.nu - eps * local.energy).abs() <= 1e-12);
    assert!(e.nu >= eps * local.mass && e.nu <= eps * local.energy * (1.0 + 1e-12));
    assert_eq!((e.x, e.v, e.curvature), (0.0, 0.0, 0.0));
}

#[test]
fn sphere_diagnostics() {
    let mesh = build_sphere(3, 2.0, Order::Quadratic).unwrap();
    let s = SphereSolution::new(2.0)
        .reference_state(&mesh.nodal_vector(), 0.0)
        .unwrap();
    let d = diagnostics(&mesh, &s).unwrap();
    assert!((d.step.area / (16.0 * PI) - 1.0).abs() < 1e-5);
    assert!((d.step.max_curvature - 1.0).abs() < 1e-14);
    let s = normalize_normals(&s).unwrap();
    let d = diagnostics(&mesh, &s).unwrap();
    assert!((d.step.min_normal_length - 1.0).abs() < 1e-15);
    assert!((d.step.max_normal_length - 1.0).abs() < 1e-15);
}

#[test]
fn dumbbell_neck_radius() {
    let d = Dumbbell::default();
    let mesh = build_dumbbell(&d, 3, Order::Quadratic, 1e-12).unwrap();
    let r = neck_radius(&mesh, &mesh.nodal_vector()).unwrap().unwrap();
    assert!((r - 0.2).abs() < 1e-6, "{r}");
    let s = implicit_initial_data(&d, &mesh, &mesh.nodal_vector()).unwrap();
    assert_eq!(diagnostics(&mesh, &s).unwrap().neck_radius, Some(r));
}

#[test]
fn single_run_study_has_no_orders() {
    let cfg = StudyConfig {
        protocol: Protocol::Temporal {
            subdivisions: 1,
            taus: vec![0.1],
        },
        order: 2,
        t_end: 0.2,
        ..StudyConfig::default()
    };
    let table = convergence_study(&cfg).unwrap();
    assert_eq!(table.rows.len(), 1);
    assert!(table.rows[0].eoc.is_none());
    assert!(table.failure.is_none());
}

#[test]
fn study_past_extinction_is_truncated() {
    let cfg = StudyConfig {
        protocol: Protocol::Spatial {
            subdivisions: vec![0, 1],
            tau: 0.1,
        },
        radius: 1.0,
        order: 1,
        t_end: 0.3,
        ..StudyConfig::default()
    };
    let table = convergence_study(&cfg).unwrap();
    assert!(table.rows.is_empty());
    assert!(table.failure.unwrap().contains("extinction"));
}

#[test]
fn temporal_study_writes_tables() {
    let cfg = StudyConfig {
        protocol: Protocol::Temporal {
            subdivisions: 2,
            taus: vec![0.1, 0.05],
        },
        order: 2,
        t_end: 0.2,
        ..StudyConfig::default()
    };
    let table: EocTable = convergence_study(&cfg).unwrap();
    assert_eq!(table.rows.len(), 2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eoc.csv");
    table
        .write_csv(std::fs::File::create(&path).unwrap())
        .unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 3);
    let mut dat = Vec::new();
    table.write_dat(&mut dat).unwrap();
    assert!(String::from_utf8(dat).unwrap().starts_with("# tau h"));
}
