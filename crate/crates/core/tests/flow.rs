use mcf_core::analysis::SphereSolution;
use mcf_core::fem::{Assembler, SurfaceGeometry};
use mcf_core::flow::{
    bdf_coefficients, bdf_coefficients_exact, bootstrap_start, dziuk_step, esfem_step, run_flow,
    state_diagnostics, FlowConfig, FlowError, FlowHistory, Integrator, NodalState, SchemeKind,
    StartPolicy, StopCriteria, StopReason,
};
use mcf_core::linalg::{cg_solve, CgConfig};
use mcf_core::mesh::{build_sphere, node, Order, SurfaceMesh};
use num_rational::Rational64;

const R0: f64 = 2.0;

fn sphere(subdivisions: u32) -> SurfaceMesh {
    build_sphere(subdivisions, R0, Order::Quadratic).unwrap()
}

fn exact(mesh: &SurfaceMesh, t: f64) -> NodalState {
    SphereSolution::new(R0)
        .reference_state(&mesh.nodal_vector(), t)
        .unwrap()
}

fn history(mesh: &SurfaceMesh, q: usize, tau: f64) -> FlowHistory {
    let mut h = FlowHistory::new(q, tau);
    for j in 0..q {
        h.push(exact(mesh, j as f64 * tau)).unwrap();
    }
    h
}

fn radii(x: &[f64]) -> Vec<f64> {
    let n = x.len() / 3;
    (0..n).map(|j| node(x, n, j).norm()).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn r(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

#[test]
fn bdf_examples() {
    let (d, g) = bdf_coefficients_exact(1).unwrap();
    assert_eq!(d, vec![r(1, 1), r(-1, 1)]);
    assert_eq!(g, vec![r(1, 1)]);
    let (d, g) = bdf_coefficients_exact(2).unwrap();
    assert_eq!(d, vec![r(3, 2), r(-2, 1), r(1, 2)]);
    assert_eq!(g, vec![r(2, 1), r(-1, 1)]);
    let (d, g) = bdf_coefficients_exact(3).unwrap();
    assert_eq!(d, vec![r(11, 6), r(-3, 1), r(3, 2), r(-1, 3)]);
    assert_eq!(g, vec![r(3, 1), r(-3, 1), r(1, 1)]);
    assert!(bdf_coefficients(0).is_err());
    assert!(bdf_coefficients(6).is_err());
}

#[test]
fn derivative_and_extrapolation_reproduce_polynomials() {
    let (t_n, tau) = (0.7, 0.05);
    for q in 1..=5 {
        let s = bdf_coefficients(q).unwrap();
        for m in 0..=q {
            let p = |t: f64| vec![t.powi(m as i32), 2.0 * t.powi(m as i32) - 1.0];
            let values: Vec<Vec<f64>> = (0..=q).map(|j| p(t_n - j as f64 * tau)).collect();
            let refs: Vec<&[f64]> = values.iter().map(|v| v.as_slice()).collect();
            let d = s.derivative(tau, &refs);
            let exact = m as f64 * t_n.powi(m as i32 - 1);
            let scale = exact.abs().max(1.0);
            assert!((d[0] - exact).abs() <= 1e-11 * scale, "q={q} m={m}");
            assert!((d[1] - 2.0 * exact).abs() <= 2e-11 * scale, "q={q} m={m}");
            if m < q {
                let e = s.extrapolate(&refs[1..]);
                assert!((e[0] - t_n.powi(m as i32)).abs() <= 1e-12, "q={q} m={m}");
            }
        }
    }
}

#[test]
fn history_extrapolation_of_quadratic_data() {
    let s = bdf_coefficients(3).unwrap();
    let tau = 0.1;
    let f = |t: f64| 1.0 + 2.0 * t - 3.0 * t * t;
    let mut h = FlowHistory::new(3, tau);
    for j in 0..3 {
        let t = j as f64 * tau;
        h.push(NodalState::new(t, vec![f(t); 3], vec![0.0; 3], vec![f(t); 4]).unwrap())
            .unwrap();
    }
    let (x, u) = mcf_core::flow::extrapolate(&h, &s).unwrap();
    assert!((x[0] - f(0.3)).abs() < 1e-12);
    assert!((u[3] - f(0.3)).abs() < 1e-12);
}

#[test]
fn flat_curvature_history_leaves_positions_fixed() {
    let mesh = sphere(1);
    let mut h = FlowHistory::new(2, 0.01);
    let mut s = exact(&mesh, 0.0);
    let n = mesh.num_nodes();
    s.u[3 * n..].iter_mut().for_each(|v| *v = 0.0);
    s.v.iter_mut().for_each(|v| *v = 0.0);
    h.push(s.clone()).unwrap();
    let mut s1 = s.clone();
    s1.t = 0.01;
    h.push(s1).unwrap();
    let out = esfem_step(&mesh, &h, &bdf_coefficients(2).unwrap(), 0.01, 0.0).unwrap();
    let dx = out
        .state
        .x
        .iter()
        .zip(&s.x)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(dx < 1e-12, "{dx}");
    assert!(out.state.v.iter().all(|v| v.abs() < 1e-12));
    assert!(out.state.curvature().iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn unforced_parabolic_step_dissipates() {
    let mesh = sphere(2);
    let x = mesh.nodal_vector();
    let geom = SurfaceGeometry::new(&mesh, &x).unwrap();
    let (m, a) = Assembler::new(&mesh).mass_stiffness(&geom).unwrap();
    let s = bdf_coefficients(1).unwrap();
    let tau = 0.05;
    let shifted = m.linear_combination(s.delta()[0] / tau, &a, 1.0).unwrap();
    let n = mesh.num_nodes();
    let prev: Vec<f64> = (0..n)
        .map(|j| node(&x, n, j).x * node(&x, n, j).z)
        .collect();
    let rhs: Vec<f64> = m.mul_vec(&prev).iter().map(|v| v / tau).collect();
    let next = cg_solve(&shifted, &rhs, &CgConfig::default()).unwrap().x;
    assert!(m.quadratic_form(&next) < m.quadratic_form(&prev));
}

#[test]
fn one_step_matches_two_half_steps() {
    let mesh = sphere(3);
    let tau = 1e-3;
    let s = bdf_coefficients(2).unwrap();
    let one = esfem_step(&mesh, &history(&mesh, 2, tau), &s, tau, 0.0).unwrap();
    let mut h = history(&mesh, 2, tau / 2.0);
    for _ in 0..3 {
        let out = esfem_step(&mesh, &h, &s, tau / 2.0, 0.0).unwrap();
        h.push(out.state).unwrap();
    }
    let two = h.latest().unwrap();
    let target = (R0 * R0 - 8.0 * tau).sqrt();
    let (r1, r2) = (mean(&radii(&one.state.x)), mean(&radii(&two.x)));
    assert!((r1 - target).abs() / target < 1e-4, "{r1} vs {target}");
    assert!((r2 - target).abs() / target < 1e-4, "{r2} vs {target}");
    assert!((r1 - r2).abs() < tau * tau, "{}", (r1 - r2).abs());
}

#[test]
fn operation_counts_per_step() {
    let mesh = sphere(1);
    let s = bdf_coefficients(2).unwrap();
    let h = history(&mesh, 2, 0.01);
    let integrator = Integrator::new(&mesh, CgConfig::default());
    let out = integrator.esfem_step(&h, &s, 0.01, 0.0).unwrap();
    assert_eq!(
        (
            out.stats.assemblies,
            out.stats.velocity_solves,
            out.stats.shifted_solves
        ),
        (1, 3, 4)
    );
    let out = integrator.dziuk_step(&h, &s, 0.01).unwrap();
    assert_eq!(
        (
            out.stats.assemblies,
            out.stats.velocity_solves,
            out.stats.shifted_solves
        ),
        (1, 0, 3)
    );
}

#[test]
fn dziuk_euler_step_shrinks_sphere() {
    let mesh = sphere(3);
    let tau = 1e-3;
    let s = bdf_coefficients(1).unwrap();
    let start = exact(&mesh, 0.0);
    let out = dziuk_step(&mesh, &history(&mesh, 1, tau), &s, tau).unwrap();
    let shrink = R0 - mean(&radii(&out.state.x));
    assert!((shrink / (2.0 * tau / R0) - 1.0).abs() < 0.02, "{shrink}");

    let area = |x: &[f64]| SurfaceGeometry::new(&mesh, x).unwrap().area();
    let rate = (area(&out.state.x) - area(&start.x)) / tau;
    let expected = -16.0 * std::f64::consts::PI;
    assert!((rate / expected - 1.0).abs() < 0.05, "{rate}");
}

#[test]
fn esfem_and_dziuk_trajectories_agree() {
    let mesh = sphere(3);
    let base = FlowConfig {
        order: 2,
        tau: 1e-3,
        t_end: 0.01,
        ..FlowConfig::default()
    };
    let a = run_flow(&mesh, exact(&mesh, 0.0), &base).unwrap();
    let dziuk = FlowConfig {
        scheme: SchemeKind::Dziuk,
        ..base
    };
    let b = run_flow(&mesh, exact(&mesh, 0.0), &dziuk).unwrap();
    let (xa, xb) = (&a.final_state().x, &b.final_state().x);
    let n = mesh.num_nodes();
    let gap = (0..n)
        .map(|j| (node(xa, n, j) - node(xb, n, j)).norm())
        .fold(0.0, f64::max);
    assert!(gap < 1e-3, "{gap}");
}

#[test]
fn bootstrap_state_counts() {
    let mesh = sphere(1);
    let integrator = Integrator::new(&mesh, CgConfig::default());
    let init = exact(&mesh, 0.0);
    let tau = 0.05;
    let (states, stats) = bootstrap_start(
        &integrator,
        SchemeKind::Esfem,
        &init,
        (1, tau),
        0.0,
        StartPolicy::Matched,
    )
    .unwrap();
    assert_eq!(states.len(), 1);
    assert_eq!(stats.assemblies, 0);

    let (states, stats) = bootstrap_start(
        &integrator,
        SchemeKind::Esfem,
        &init,
        (2, tau),
        0.0,
        StartPolicy::Matched,
    )
    .unwrap();
    assert_eq!(states.len(), 2);
    assert_eq!(stats.assemblies, 1);
    assert!((states[1].t - tau).abs() < 1e-15);

    let (states, stats) = bootstrap_start(
        &integrator,
        SchemeKind::Esfem,
        &init,
        (3, tau),
        0.0,
        StartPolicy::Halving,
    )
    .unwrap();
    assert_eq!(states.len(), 3);
    // two Euler steps of τ/4, then two-step steps of τ/2 from τ/2 to 2τ
    assert_eq!(stats.assemblies, 2 + 3);
    for (i, s) in states.iter().enumerate() {
        assert!((s.t - i as f64 * tau).abs() < 1e-15);
    }
}

#[test]
fn matched_ratios_refine_with_tau() {
    assert_eq!(StartPolicy::Halving.ratios(3, 0.1), vec![2, 2]);
    assert_eq!(StartPolicy::Matched.ratios(2, 0.1), vec![1]);
    let coarse = StartPolicy::Matched.ratios(3, 0.1);
    let fine = StartPolicy::Matched.ratios(3, 0.0125);
    let total = |r: &[usize]| r.iter().product::<usize>();
    assert!(total(&fine) > total(&coarse));
}

/// Error of the start values against a fine-step solution on the same mesh,
/// which removes the spatial error from the comparison.
#[test]
fn third_order_start_values_converge() {
    let mesh = sphere(2);
    let integrator = Integrator::new(&mesh, CgConfig::default());
    let init = exact(&mesh, 0.0);
    let reference = run_flow(
        &mesh,
        init.clone(),
        &FlowConfig {
            order: 3,
            tau: 0.2 / 128.0,
            t_end: 0.2,
            snapshot_every: 32,
            ..FlowConfig::default()
        },
    )
    .unwrap();
    let errors: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&tau| {
            let (states, _) = bootstrap_start(
                &integrator,
                SchemeKind::Esfem,
                &init,
                (3, tau),
                0.0,
                StartPolicy::Matched,
            )
            .unwrap();
            let target = reference
                .snapshots
                .iter()
                .find(|s| (s.t - 2.0 * tau).abs() < 1e-9)
                .unwrap();
            states[2]
                .x
                .iter()
                .zip(&target.x)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        })
        .collect();
    for w in errors.windows(2) {
        let eoc = (w[0] / w[1]).log2();
        assert!(eoc >= 2.5, "{errors:?} eoc {eoc}");
    }
}

#[test]
fn final_time_shorter_than_start_is_rejected() {
    let mesh = sphere(0);
    let cfg = FlowConfig {
        order: 3,
        tau: 0.1,
        t_end: 0.2,
        ..FlowConfig::default()
    };
    assert!(matches!(
        run_flow(&mesh, exact(&mesh, 0.0), &cfg),
        Err(FlowError::InvalidConfig(_))
    ));
}

#[test]
fn sphere_reaches_final_radius() {
    let mesh = sphere(3);
    let cfg = FlowConfig {
        order: 2,
        tau: 0.0125,
        t_end: 0.6,
        ..FlowConfig::default()
    };
    let run = run_flow(&mesh, exact(&mesh, 0.0), &cfg).unwrap();
    assert!(run.report.stop.is_completed());
    let final_state = run.final_state();
    assert!((final_state.t - 0.6).abs() < 1e-12);
    let rs = radii(&final_state.x);
    assert!((mean(&rs) - 1.6f64.sqrt()).abs() < 1e-3, "{}", mean(&rs));
    let spread = rs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - rs.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(spread < 1e-3, "{spread}");
    for w in run.report.rows.windows(2) {
        assert!(w[1].area < w[0].area + 1e-10);
    }
}

#[test]
fn snapshots_follow_cadence() {
    let mesh = sphere(1);
    let cfg = FlowConfig {
        tau: 0.01,
        t_end: 0.1,
        snapshot_every: 4,
        ..FlowConfig::default()
    };
    let run = run_flow(&mesh, exact(&mesh, 0.0), &cfg).unwrap();
    let times: Vec<f64> = run
        .snapshots
        .iter()
        .map(|s| (s.t * 100.0).round())
        .collect();
    assert_eq!(times, vec![0.0, 4.0, 8.0, 10.0]);
    assert_eq!(run.report.rows.len(), 11);
}

#[test]
fn stop_criteria_halt_the_run() {
    let mesh = sphere(1);
    let base = FlowConfig {
        tau: 0.01,
        t_end: 0.1,
        ..FlowConfig::default()
    };
    let cfg = FlowConfig {
        stop: StopCriteria {
            min_area_element: 1e3,
            ..StopCriteria::default()
        },
        ..base.clone()
    };
    let run = run_flow(&mesh, exact(&mesh, 0.0), &cfg).unwrap();
    assert!(matches!(run.report.stop, StopReason::DegenerateMesh { .. }));
    assert_eq!(run.report.rows.len(), 2);
    assert_eq!(run.final_state().t, run.report.stop.time().unwrap());

    let cfg = FlowConfig {
        stop: StopCriteria {
            max_normal_length: 0.5,
            ..StopCriteria::default()
        },
        ..base.clone()
    };
    let run = run_flow(&mesh, exact(&mesh, 0.0), &cfg).unwrap();
    assert!(matches!(run.report.stop, StopReason::NormalBlowUp { .. }));

    let cfg = FlowConfig {
        stop: StopCriteria {
            min_normal_alignment: 1.0,
            ..StopCriteria::default()
        },
        ..base
    };
    let run = run_flow(&mesh, exact(&mesh, 0.0), &cfg).unwrap();
    assert!(matches!(run.report.stop, StopReason::Inversion { .. }));
}

#[test]
fn reversed_normals_have_negative_alignment() {
    let mesh = sphere(1);
    let mut s = exact(&mesh, 0.0);
    let d = state_diagnostics(&mesh, &s, 0).unwrap();
    assert!(d.min_normal_alignment > 0.99);
    let n = mesh.num_nodes();
    s.u[..3 * n].iter_mut().for_each(|v| *v = -*v);
    let d = state_diagnostics(&mesh, &s, 0).unwrap();
    assert!(d.min_normal_alignment < -0.99);
}

#[test]
fn normalized_scheme_keeps_unit_normals() {
    let mesh = sphere(1);
    let cfg = FlowConfig {
        scheme: SchemeKind::EsfemNormalized,
        tau: 0.02,
        t_end: 0.2,
        ..FlowConfig::default()
    };
    let run = run_flow(&mesh, exact(&mesh, 0.0), &cfg).unwrap();
    for row in &run.report.rows {
        assert!((row.min_normal_length - 1.0).abs() < 1e-15);
        assert!((row.max_normal_length - 1.0).abs() < 1e-15);
    }
}
