//! Execution of the four commands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mcf_core::analysis::{
    convergence_study, implicit_initial_data, neck_radius, sphere_errors, EocTable, Protocol,
    SphereSolution, StudyConfig,
};
use mcf_core::flow::{run_flow_with, FlowConfig, NodalState, StepDiagnostics, StopReason};
use mcf_core::linalg::CgConfig;
use mcf_core::mesh::io::{write_obj, write_vtk, PointField};
use mcf_core::mesh::{build_dumbbell, build_sphere, Dumbbell, Order, Sphere, SurfaceMesh};

use crate::config::{Command, RunConfig, StudyKind, SurfaceKind};
use crate::CliError;

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub messages: Vec<String>,
    /// Why a flow run ended; `None` for commands without a flow run.
    pub stop: Option<StopReason>,
}

const PROJECTION_TOL: f64 = 1e-12;

/// Runs `config`, writing results below `config.output`.
pub fn execute(config: &RunConfig) -> Result<RunSummary, CliError> {
    config.validate()?;
    let dir = &config.output;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut summary = RunSummary {
        files: Vec::new(),
        messages: Vec::new(),
        stop: None,
    };
    let path = dir.join("config.txt");
    fs::write(&path, config.render()).map_err(|e| CliError::io(&path, e))?;
    summary.files.push(path);
    match config.command {
        Command::MeshGen => mesh_gen(config, &mut summary)?,
        Command::SingleRun | Command::Dumbbell => flow_run(config, &mut summary)?,
        Command::SphereConvergence => sphere_convergence(config, &mut summary)?,
    }
    Ok(summary)
}

fn order(config: &RunConfig) -> Order {
    Order::from_degree(config.k).expect("degree validated")
}

fn build_mesh(config: &RunConfig, order: Order) -> Result<SurfaceMesh, CliError> {
    Ok(match config.surface {
        SurfaceKind::Sphere => build_sphere(config.subdivisions, config.radius, order)?,
        SurfaceKind::Dumbbell => build_dumbbell(
            &Dumbbell::default(),
            config.subdivisions,
            order,
            PROJECTION_TOL,
        )?,
    })
}

fn initial_state(config: &RunConfig, mesh: &SurfaceMesh) -> Result<NodalState, CliError> {
    let x = mesh.nodal_vector();
    Ok(match config.surface {
        SurfaceKind::Sphere => implicit_initial_data(&Sphere::new(config.radius), mesh, &x)?,
        SurfaceKind::Dumbbell => implicit_initial_data(&Dumbbell::default(), mesh, &x)?,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn cg_config(config: &RunConfig) -> CgConfig {
    CgConfig {
        rel_tol: config.tol,
        max_iterations: config.max_iterations,
        ..CgConfig::default()
    }
}

fn mesh_gen(config: &RunConfig, summary: &mut RunSummary) -> Result<(), CliError> {
    // OBJ holds the flat vertex triangulation; VTK holds every node.
    let flat = build_mesh(config, Order::Linear)?;
    let path = config.output.join("mesh.obj");
    let mut out = create(&path)?;
    write_obj(&mut out, &flat, &flat.nodal_vector())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(&path, e))?;
    summary.files.push(path);

    let mesh = build_mesh(config, order(config))?;
    let state = initial_state(config, &mesh)?;
    let path = config.output.join("mesh.vtk");
    write_snapshot(&path, &mesh, &state)?;
    summary.files.push(path);
    summary.messages.push(format!(
        "{} vertices, {} nodes, {} elements",
        flat.num_vertices(),
        mesh.num_nodes(),
        mesh.num_elements()
    ));
    Ok(())
}

fn write_snapshot(path: &Path, mesh: &SurfaceMesh, state: &NodalState) -> Result<(), CliError> {
    let lengths = state.normal_lengths();
    let fields = [
        PointField::Vector("nu", state.nu()),
        PointField::Scalar("H", state.curvature()),
        PointField::Scalar("nu_norm", &lengths),
        PointField::Vector("v", &state.v),
    ];
    let mut out = create(path)?;
    write_vtk(
        &mut out,
        &format!("t = {}", state.t),
        mesh,
        &state.x,
        &fields,
    )
    .and_then(|_| out.flush())
    .map_err(|e| CliError::io(path, e))
}

const DIAGNOSTIC_HEADER: [&str; 7] = [
    "t",
    "area",
    "h",
    "min_area_element",
    "min_nu_norm",
    "max_nu_norm",
    "max_H",
];

fn diagnostic_record(d: &StepDiagnostics) -> [String; 7] {
    [
        d.t,
        d.area,
        d.mesh_width,
        d.min_area_element,
        d.min_normal_length,
        d.max_normal_length,
        d.max_curvature,
    ]
    .map(|v| v.to_string())
}

/// Writes snapshots and diagnostic rows while the flow runs.
struct Recorder<'a> {
    dir: &'a Path,
    mesh: &'a SurfaceMesh,
    every: usize,
    diagnostics: csv::Writer<BufWriter<File>>,
    necks: Option<csv::Writer<BufWriter<File>>>,
    files: Vec<PathBuf>,
    last_snapshot: Option<usize>,
    error: Option<CliError>,
}

impl Recorder<'_> {
    fn snapshot(&mut self, state: &NodalState, step: usize) -> Result<(), CliError> {
        let path = self.dir.join(format!("snapshot_{step:06}.vtk"));
        write_snapshot(&path, self.mesh, state)?;
        self.files.push(path);
        self.last_snapshot = Some(step);
        Ok(())
    }

    fn record(&mut self, state: &NodalState, d: &StepDiagnostics) -> Result<(), CliError> {
        let csv_err = |e: csv::Error| CliError::Io {
            path: "diagnostics".into(),
            source: std::io::Error::other(e),
        };
        self.diagnostics
            .write_record(diagnostic_record(d))
            .map_err(csv_err)?;
        self.diagnostics
            .flush()
            .map_err(|e| CliError::io(self.dir, e))?;
        if let Some(w) = &mut self.necks {
            let r = neck_radius(self.mesh, &state.x)?;
            let r = r.map_or(String::new(), |r| r.to_string());
            w.write_record([d.t.to_string(), r]).map_err(csv_err)?;
            w.flush().map_err(|e| CliError::io(self.dir, e))?;
        }
        if d.step == 0 || (self.every > 0 && d.step % self.every == 0) {
            self.snapshot(state, d.step)?;
        }
        Ok(())
    }
}

fn csv_writer(path: &Path, header: &[&str]) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header)
        .map_err(|e| CliError::io(path, std::io::Error::other(e)))?;
    Ok(w)
}

fn flow_run(config: &RunConfig, summary: &mut RunSummary) -> Result<(), CliError> {
    let mesh = build_mesh(config, order(config))?;
    let initial = initial_state(config, &mesh)?;
    let flow = FlowConfig {
        scheme: config.scheme,
        order: config.q,
        tau: config.tau,
        t_end: config.t_end,
        alpha: config.alpha,
        snapshot_every: 0,
        cg: cg_config(config),
        start: config.start,
        ..FlowConfig::default()
    };
    let dir = config.output.as_path();
    let diag_path = dir.join("diagnostics.csv");
    let neck_path = dir.join("neck.csv");
    let dumbbell = config.surface == SurfaceKind::Dumbbell;
    let mut rec = Recorder {
        dir,
        mesh: &mesh,
        every: config.snapshot_every,
        diagnostics: csv_writer(&diag_path, &DIAGNOSTIC_HEADER)?,
        necks: if dumbbell {
            Some(csv_writer(&neck_path, &["t", "neck_radius"])?)
        } else {
            None
        },
        files: Vec::new(),
        last_snapshot: None,
        error: None,
    };
    summary.files.push(diag_path);
    if dumbbell {
        summary.files.push(neck_path);
    }

    let result = run_flow_with(&mesh, initial.clone(), &flow, |state, d| {
        if rec.error.is_none() {
            if let Err(e) = rec.record(state, d) {
                rec.error = Some(e);
            }
        }
    });
    summary.files.append(&mut rec.files);
    if let Some(e) = rec.error.take() {
        return Err(e);
    }
    let run = result?;
    let last = run.report.rows.last().expect("initial row is always kept");
    if rec.last_snapshot != Some(last.step) {
        rec.snapshot(run.final_state(), last.step)?;
        summary.files.append(&mut rec.files);
    }

    summary.messages.push(format!(
        "{} on {} nodes: {} steps to t = {}, {}",
        config.scheme,
        mesh.num_nodes(),
        last.step,
        last.t,
        run.report.stop
    ));
    if config.surface == SurfaceKind::Sphere && run.report.stop.is_completed() {
        let e = sphere_errors(
            &mesh,
            &initial.x,
            run.final_state(),
            &SphereSolution::new(config.radius),
        )?;
        summary.messages.push(format!(
            "errors at t = {}: x {:e}, v {:e}, nu {:e}, H {:e}",
            e.t, e.x, e.v, e.nu, e.curvature
        ));
    }
    summary.stop = Some(run.report.stop);
    Ok(())
}

fn write_table(
    table: &EocTable,
    dir: &Path,
    stem: &str,
    summary: &mut RunSummary,
) -> Result<(), CliError> {
    let csv_path = dir.join(format!("{stem}.csv"));
    table.write_csv(create(&csv_path)?)?;
    summary.files.push(csv_path);
    let dat_path = dir.join(format!("{stem}.dat"));
    table.write_dat(create(&dat_path)?)?;
    summary.files.push(dat_path);
    for row in &table.rows {
        let e = &row.errors;
        let orders = row.eoc.map_or(String::new(), |o| {
            format!(" eoc {:.2} {:.2} {:.2} {:.2}", o[0], o[1], o[2], o[3])
        });
        summary.messages.push(format!(
            "{stem}: tau {} h {:.4} err {:.3e} {:.3e} {:.3e} {:.3e}{orders}",
            e.tau, e.h, e.x, e.v, e.nu, e.curvature
        ));
    }
    Ok(())
}

fn sphere_convergence(config: &RunConfig, summary: &mut RunSummary) -> Result<(), CliError> {
    let base = StudyConfig {
        protocol: Protocol::Temporal {
            subdivisions: config.subdivisions,
            taus: config.taus.clone(),
        },
        scheme: config.scheme,
        order: config.q,
        degree: config.k,
        radius: config.radius,
        t_end: config.t_end,
        alpha: config.alpha,
        cg: cg_config(config),
        start: config.start,
    };
    let mut studies = Vec::new();
    if matches!(config.study, StudyKind::Temporal | StudyKind::Both) {
        studies.push(("eoc_temporal", base.clone()));
    }
    if matches!(config.study, StudyKind::Spatial | StudyKind::Both) {
        let spatial = StudyConfig {
            protocol: Protocol::Spatial {
                subdivisions: config.spatial_subdivisions.clone(),
                tau: config.spatial_tau,
            },
            ..base
        };
        studies.push(("eoc_spatial", spatial));
    }
    for (stem, study) in studies {
        let table = convergence_study(&study)?;
        write_table(&table, &config.output, stem, summary)?;
        if let Some(failure) = table.failure {
            return Err(CliError::Study(failure));
        }
    }
    Ok(())
}

/// Caps the global rayon pool at `MCF_THREADS` threads when set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("MCF_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Invalid {
            key: "MCF_THREADS".into(),
            message: format!("expected a positive integer, found {value:?}"),
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Invalid {
            key: "MCF_THREADS".into(),
            message: e.to_string(),
        })
}
