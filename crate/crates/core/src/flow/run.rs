use std::fmt;
use std::str::FromStr;

use super::{
    bdf_coefficients, geometric_normals, normalize_normals, FlowError, FlowHistory, Integrator,
    NodalState, StepOutcome, StepStats,
};
use crate::fem::SurfaceGeometry;
use crate::linalg::CgConfig;
use crate::mesh::{mesh_width, SurfaceMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// Coupled velocity, normal and curvature system.
    Esfem,
    /// As [`SchemeKind::Esfem`], with nodal normals rescaled to unit length
    /// after every step.
    EsfemNormalized,
    /// Position-only scheme with stiffness matrix on the extrapolated surface.
    Dziuk,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [
        SchemeKind::Esfem,
        SchemeKind::EsfemNormalized,
        SchemeKind::Dziuk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Esfem => "esfem",
            SchemeKind::EsfemNormalized => "esfem-normalized",
            SchemeKind::Dziuk => "dziuk",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                format!("unknown scheme {s:?} (expected esfem, esfem-normalized or dziuk)")
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCriteria {
    /// Stop once the smallest area element drops below this value.
    pub min_area_element: f64,
    /// Stop once some nodal normal grows longer than this.
    pub max_normal_length: f64,
    /// Stop once `min_j ν_j·n_j/|ν_j|` falls below this, with `n_j` the
    /// normal of the discrete surface. Negative values flag an inverted
    /// surface.
    pub min_normal_alignment: f64,
}

impl Default for StopCriteria {
    fn default() -> Self {
        StopCriteria {
            min_area_element: 1e-10,
            max_normal_length: 10.0,
            min_normal_alignment: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub scheme: SchemeKind,
    /// BDF order `q`.
    pub order: usize,
    pub tau: f64,
    pub t_end: f64,
    /// Normal-vector stabilization parameter.
    pub alpha: f64,
    pub stop: StopCriteria,
    /// Keep every `n`-th state; `0` keeps only the first and last.
    pub snapshot_every: usize,
    pub cg: CgConfig,
    pub start: StartPolicy,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            scheme: SchemeKind::Esfem,
            order: 2,
            tau: 0.0125,
            t_end: 0.6,
            alpha: 0.0,
            stop: StopCriteria::default(),
            snapshot_every: 0,
            cg: CgConfig::default(),
            start: StartPolicy::Matched,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |msg: String| Err(FlowError::InvalidConfig(msg));
        if !(1..=5).contains(&self.order) {
            return bad(format!("BDF order must be in 1..=5, got {}", self.order));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("step size must be positive, got {}", self.tau));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.order as f64 * self.tau * (1.0 - 1e-12)) {
            return bad(format!(
                "final time {} is shorter than q·τ = {}",
                self.t_end,
                self.order as f64 * self.tau
            ));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!(
                "stabilization parameter must be non-negative, got {}",
                self.alpha
            ));
        }
        let st = &self.stop;
        if !(st.min_area_element >= 0.0)
            || !(st.max_normal_length > 0.0)
            || !(-1.0..=1.0).contains(&st.min_normal_alignment)
        {
            return bad("stop thresholds out of range".into());
        }
        self.cg.validate()?;
        Ok(())
    }

    /// `round(T/τ)`.
    pub fn num_steps(&self) -> usize {
        (self.t_end / self.tau).round() as usize
    }
}

/// Geometric and field diagnostics of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub area: f64,
    pub mesh_width: f64,
    pub min_area_element: f64,
    pub min_normal_length: f64,
    pub max_normal_length: f64,
    pub max_curvature: f64,
    pub max_abs_curvature: f64,
    /// `min_j ν_j·n_j/|ν_j|` against the discrete surface normals.
    pub min_normal_alignment: f64,
}

/// Diagnostics of `state` on `mesh`.
pub fn state_diagnostics(
    mesh: &SurfaceMesh,
    state: &NodalState,
    step: usize,
) -> Result<StepDiagnostics, FlowError> {
    let geom = SurfaceGeometry::new(mesh, &state.x)?;
    let lengths = state.normal_lengths();
    let h = state.curvature();
    let n = state.num_nodes();
    let geometric = geometric_normals(mesh, &state.x)?;
    let nu = state.nu();
    let alignment = (0..n)
        .map(|j| {
            let dot: f64 = (0..3).map(|l| nu[l * n + j] * geometric[l * n + j]).sum();
            dot / lengths[j]
        })
        .fold(f64::INFINITY, f64::min);
    Ok(StepDiagnostics {
        step,
        t: state.t,
        area: geom.area(),
        mesh_width: mesh_width(mesh, &state.x)?,
        min_area_element: geom.min_area_element(),
        min_normal_length: lengths.iter().copied().fold(f64::INFINITY, f64::min),
        max_normal_length: lengths.iter().copied().fold(0.0, f64::max),
        max_curvature: h.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        max_abs_curvature: h.iter().fold(0.0, |m, v| m.max(v.abs())),
        min_normal_alignment: alignment,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    Completed,
    /// The smallest area element fell below the threshold.
    DegenerateMesh {
        t: f64,
        min_area_element: f64,
    },
    /// A nodal normal grew beyond the threshold.
    NormalBlowUp {
        t: f64,
        max_normal_length: f64,
    },
    /// Nodal normals turned against the discrete surface.
    Inversion {
        t: f64,
        min_normal_alignment: f64,
    },
    /// A step failed because the discrete surface broke down.
    Breakdown {
        t: f64,
        error: FlowError,
    },
}

impl StopReason {
    pub fn is_completed(&self) -> bool {
        matches!(self, StopReason::Completed)
    }

    pub fn time(&self) -> Option<f64> {
        match self {
            StopReason::Completed => None,
            StopReason::DegenerateMesh { t, .. }
            | StopReason::NormalBlowUp { t, .. }
            | StopReason::Inversion { t, .. }
            | StopReason::Breakdown { t, .. } => Some(*t),
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopReason::Completed => write!(f, "completed"),
            StopReason::DegenerateMesh {
                t,
                min_area_element,
            } => write!(
                f,
                "degenerate mesh at t = {t} (min area element {min_area_element:e})"
            ),
            StopReason::NormalBlowUp {
                t,
                max_normal_length,
            } => write!(
                f,
                "normal blow-up at t = {t} (max |ν| = {max_normal_length})"
            ),
            StopReason::Inversion {
                t,
                min_normal_alignment,
            } => write!(
                f,
                "surface inversion at t = {t} (min ν·n = {min_normal_alignment})"
            ),
            StopReason::Breakdown { t, error } => write!(f, "breakdown after t = {t}: {error}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowReport {
    /// One row per accepted state, starting with the initial state.
    pub rows: Vec<StepDiagnostics>,
    pub stop: StopReason,
    pub stats: StepStats,
}

impl FlowReport {
    pub fn final_time(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowRun {
    pub snapshots: Vec<NodalState>,
    pub report: FlowReport,
}

impl FlowRun {
    pub fn final_state(&self) -> &NodalState {
        self.snapshots.last().expect("initial state is always kept")
    }
}

fn add_stats(total: &mut StepStats, s: StepStats) {
    total.assemblies += s.assemblies;
    total.velocity_solves += s.velocity_solves;
    total.shifted_solves += s.shifted_solves;
    total.cg_iterations += s.cg_iterations;
}

fn advance(
    integrator: &Integrator<'_>,
    kind: SchemeKind,
    history: &FlowHistory,
    q: usize,
    alpha: f64,
) -> Result<StepOutcome, FlowError> {
    let scheme = bdf_coefficients(q)?;
    let tau = history.tau();
    match kind {
        SchemeKind::Esfem => integrator.esfem_step(history, &scheme, tau, alpha),
        SchemeKind::EsfemNormalized => {
            let mut out = integrator.esfem_step(history, &scheme, tau, alpha)?;
            out.state = normalize_normals(&out.state)?;
            Ok(out)
        }
        SchemeKind::Dziuk => integrator.dziuk_step(history, &scheme, tau),
    }
}

/// How starting values for `q ≥ 3` are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StartPolicy {
    /// Stage `ℓ` runs with step `τ/2^{q-ℓ}`.
    Halving,
    /// Stage steps are chosen so that each stage's error stays below
    /// `τ^{q+1/2}`.
    Matched,
}

impl StartPolicy {
    pub fn name(self) -> &'static str {
        match self {
            StartPolicy::Halving => "halving",
            StartPolicy::Matched => "matched",
        }
    }

    /// Integer step ratios `[τ/h_{q-1}, h_{q-1}/h_{q-2}, …, h_2/h_1]`,
    /// where `h_p` is the step of the `p`-step starting stage.
    pub fn ratios(self, q: usize, tau: f64) -> Vec<usize> {
        if q <= 2 {
            return vec![1; q.saturating_sub(1)];
        }
        match self {
            StartPolicy::Halving => vec![2; q - 1],
            StartPolicy::Matched => {
                let eps = tau.powf(q as f64 + 0.5);
                let mut next = tau;
                (1..q)
                    .rev()
                    .map(|p| {
                        let span = p as f64 * next;
                        let h_max = (eps / span).powf(1.0 / p as f64);
                        let r = (next / h_max).ceil().max(1.0) as usize;
                        next /= r as f64;
                        r
                    })
                    .collect()
            }
        }
    }
}

impl fmt::Display for StartPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StartPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "halving" => Ok(StartPolicy::Halving),
            "matched" => Ok(StartPolicy::Matched),
            _ => Err(format!(
                "unknown start policy {s:?} (expected halving or matched)"
            )),
        }
    }
}

/// States at `t₀, t₀ + h, …, t₀ + m·h` computed with the `p`-step method.
/// Its starting values come from the `(p-1)`-step method run with step
/// `h / ratios[0]`, and so on down to backward Euler.
fn trajectory(
    integrator: &Integrator<'_>,
    kind: SchemeKind,
    initial: &NodalState,
    (p, h, m): (usize, f64, usize),
    alpha: f64,
    ratios: &[usize],
    stats: &mut StepStats,
) -> Result<Vec<NodalState>, FlowError> {
    let mut states = if p == 1 {
        vec![initial.clone()]
    } else {
        let r = ratios[0];
        let fine = trajectory(
            integrator,
            kind,
            initial,
            (p - 1, h / r as f64, (p - 1) * r),
            alpha,
            &ratios[1..],
            stats,
        )?;
        fine.into_iter().step_by(r).collect()
    };
    for (i, s) in states.iter_mut().enumerate() {
        s.t = initial.t + i as f64 * h;
    }
    states.truncate(m + 1);
    let mut history = FlowHistory::new(p, h);
    for s in &states {
        history.push(s.clone())?;
    }
    while states.len() <= m {
        let out = advance(integrator, kind, &history, p, alpha)?;
        add_stats(stats, out.stats);
        let mut next = out.state;
        next.t = initial.t + states.len() as f64 * h;
        history.push(next.clone())?;
        states.push(next);
    }
    Ok(states)
}

/// Starting values at `t₀, …, t₀ + (q-1)τ` for the `q`-step method.
///
/// For `q = 2` this is one backward Euler step of size `τ`. For larger `q`
/// the value at `t_i` comes from a cascade of lower order methods with
/// substeps set by `policy`.
pub fn bootstrap_start(
    integrator: &Integrator<'_>,
    kind: SchemeKind,
    initial: &NodalState,
    (q, tau): (usize, f64),
    alpha: f64,
    policy: StartPolicy,
) -> Result<(Vec<NodalState>, StepStats), FlowError> {
    let mut stats = StepStats::default();
    if q <= 1 {
        return Ok((vec![initial.clone()], stats));
    }
    let ratios = policy.ratios(q, tau);
    let top = ratios[0];
    let fine = trajectory(
        integrator,
        kind,
        initial,
        (q - 1, tau / top as f64, (q - 1) * top),
        alpha,
        &ratios[1..],
        &mut stats,
    )?;
    let mut states: Vec<NodalState> = fine.into_iter().step_by(top).collect();
    for (i, s) in states.iter_mut().enumerate() {
        s.t = initial.t + i as f64 * tau;
    }
    Ok((states, stats))
}

/// Runs the flow from `initial` until `t_end` or a singularity.
pub fn run_flow(
    mesh: &SurfaceMesh,
    initial: NodalState,
    config: &FlowConfig,
) -> Result<FlowRun, FlowError> {
    run_flow_with(mesh, initial, config, |_, _| {})
}

/// As [`run_flow`], calling `observer` on every accepted state.
pub fn run_flow_with<F>(
    mesh: &SurfaceMesh,
    initial: NodalState,
    config: &FlowConfig,
    mut observer: F,
) -> Result<FlowRun, FlowError>
where
    F: FnMut(&NodalState, &StepDiagnostics),
{
    config.validate()?;
    initial.validate()?;
    if initial.x.len() != 3 * mesh.num_nodes() {
        return Err(FlowError::Dimension(format!(
            "mesh has {} nodes, state has {}",
            mesh.num_nodes(),
            initial.num_nodes()
        )));
    }
    let q = config.order;
    let integrator = Integrator::new(mesh, config.cg);
    let first = state_diagnostics(mesh, &initial, 0)?;
    observer(&initial, &first);

    let mut rows = vec![first];
    let mut snapshots = vec![initial.clone()];
    let mut stats = StepStats::default();
    let num_steps = config.num_steps();
    let t0 = initial.t;

    let keep = |step: usize| config.snapshot_every > 0 && step % config.snapshot_every == 0;
    let mut history = FlowHistory::new(q, config.tau);
    let mut last = initial.clone();

    // Returns Some(stop) when the new state violates a stop criterion.
    let check = |d: &StepDiagnostics| {
        if d.min_area_element < config.stop.min_area_element {
            Some(StopReason::DegenerateMesh {
                t: d.t,
                min_area_element: d.min_area_element,
            })
        } else if d.max_normal_length > config.stop.max_normal_length {
            Some(StopReason::NormalBlowUp {
                t: d.t,
                max_normal_length: d.max_normal_length,
            })
        } else if d.min_normal_alignment < config.stop.min_normal_alignment {
            Some(StopReason::Inversion {
                t: d.t,
                min_normal_alignment: d.min_normal_alignment,
            })
        } else {
            None
        }
    };

    let mut stop = None;
    let start = match bootstrap_start(
        &integrator,
        config.scheme,
        &initial,
        (q, config.tau),
        config.alpha,
        config.start,
    ) {
        Ok((states, s)) => {
            add_stats(&mut stats, s);
            Some(states)
        }
        Err(e) if e.is_breakdown() => {
            stop = Some(StopReason::Breakdown { t: t0, error: e });
            None
        }
        Err(e) => return Err(e),
    };

    let mut accept = |state: NodalState,
                      step: usize,
                      rows: &mut Vec<StepDiagnostics>,
                      snapshots: &mut Vec<NodalState>|
     -> Result<Option<StopReason>, FlowError> {
        let d = match state_diagnostics(mesh, &state, step) {
            Ok(d) => d,
            Err(e) if e.is_breakdown() => {
                return Ok(Some(StopReason::Breakdown {
                    t: state.t,
                    error: e,
                }))
            }
            Err(e) => return Err(e),
        };
        observer(&state, &d);
        rows.push(d);
        let s = check(&d);
        if s.is_some() || step == num_steps || keep(step) {
            snapshots.push(state);
        }
        Ok(s)
    };

    if let Some(states) = start {
        for (i, s) in states.into_iter().enumerate() {
            history.push(s.clone())?;
            last = s.clone();
            if i > 0 {
                if let Some(s) = accept(s, i, &mut rows, &mut snapshots)? {
                    stop = Some(s);
                    break;
                }
            }
        }
        if stop.is_none() {
            for step in q..=num_steps {
                let out = match advance(&integrator, config.scheme, &history, q, config.alpha) {
                    Ok(out) => out,
                    Err(e) if e.is_breakdown() => {
                        stop = Some(StopReason::Breakdown {
                            t: last.t,
                            error: e,
                        });
                        break;
                    }
                    Err(e) => return Err(e),
                };
                add_stats(&mut stats, out.stats);
                let mut state = out.state;
                state.t = t0 + step as f64 * config.tau;
                history.push(state.clone())?;
                last = state.clone();
                if let Some(s) = accept(state, step, &mut rows, &mut snapshots)? {
                    stop = Some(s);
                    break;
                }
            }
        }
    }

    if let Some(StopReason::Breakdown { .. }) = stop {
        if snapshots.last().map(|s| s.t) != Some(last.t) {
            snapshots.push(last);
        }
    }
    Ok(FlowRun {
        snapshots,
        report: FlowReport {
            rows,
            stop: stop.unwrap_or(StopReason::Completed),
            stats,
        },
    })
}
