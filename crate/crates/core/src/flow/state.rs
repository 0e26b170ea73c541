use std::collections::VecDeque;

use super::{BdfScheme, FlowError};

/// Positions, velocity, normal and mean curvature at one time level.
///
/// All vectors are component-major: `x = (x₁…x_N, y₁…y_N, z₁…z_N)` and
/// `u = (ν_x, ν_y, ν_z, H)`, each block of length `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalState {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
}

impl NodalState {
    pub fn new(t: f64, x: Vec<f64>, v: Vec<f64>, u: Vec<f64>) -> Result<Self, FlowError> {
        let s = NodalState { t, x, v, u };
        s.validate()?;
        Ok(s)
    }

    pub fn num_nodes(&self) -> usize {
        self.x.len() / 3
    }

    pub fn nu(&self) -> &[f64] {
        &self.u[..3 * self.num_nodes()]
    }

    pub fn curvature(&self) -> &[f64] {
        &self.u[3 * self.num_nodes()..]
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let n = self.num_nodes();
        if self.x.len() != 3 * n || self.v.len() != 3 * n || self.u.len() != 4 * n {
            return Err(FlowError::Dimension(format!(
                "state sizes x={}, v={}, u={} are inconsistent",
                self.x.len(),
                self.v.len(),
                self.u.len()
            )));
        }
        let finite = |v: &[f64]| v.iter().all(|a| a.is_finite());
        if !(self.t.is_finite() && finite(&self.x) && finite(&self.v) && finite(&self.u)) {
            return Err(FlowError::NonFinite(self.t));
        }
        Ok(())
    }

    /// `|ν_j|` for every node.
    pub fn normal_lengths(&self) -> Vec<f64> {
        let n = self.num_nodes();
        let nu = self.nu();
        (0..n)
            .map(|j| (nu[j].powi(2) + nu[n + j].powi(2) + nu[2 * n + j].powi(2)).sqrt())
            .collect()
    }
}

/// Rescales every nodal normal to unit length; `x`, `v` and `H` are untouched.
pub fn normalize_normals(state: &NodalState) -> Result<NodalState, FlowError> {
    let n = state.num_nodes();
    let mut out = state.clone();
    for (j, len) in state.normal_lengths().into_iter().enumerate() {
        if !(len > 0.0) {
            return Err(FlowError::ZeroNormal(j));
        }
        for l in 0..3 {
            out.u[l * n + j] /= len;
        }
    }
    Ok(out)
}

/// The most recent states, oldest first, spaced by the step size.
#[derive(Debug, Clone)]
pub struct FlowHistory {
    tau: f64,
    capacity: usize,
    states: VecDeque<NodalState>,
}

impl FlowHistory {
    /// Keeps up to `q + 1` states.
    pub fn new(q: usize, tau: f64) -> Self {
        FlowHistory {
            tau,
            capacity: q + 1,
            states: VecDeque::with_capacity(q + 1),
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn latest(&self) -> Option<&NodalState> {
        self.states.back()
    }

    /// `j`-th most recent state (`0` = latest).
    pub fn back(&self, j: usize) -> Option<&NodalState> {
        self.states
            .len()
            .checked_sub(j + 1)
            .map(|i| &self.states[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &NodalState> {
        self.states.iter()
    }

    pub fn push(&mut self, state: NodalState) -> Result<(), FlowError> {
        if let Some(last) = self.states.back() {
            let gap = state.t - last.t;
            if !(gap > 0.0) || (gap - self.tau).abs() > 1e-9 * self.tau.max(1.0) {
                return Err(FlowError::History(format!(
                    "state at t={} does not follow t={} by τ={}",
                    state.t, last.t, self.tau
                )));
            }
            if state.x.len() != last.x.len() {
                return Err(FlowError::Dimension("node count changed".into()));
            }
        }
        if self.states.len() == self.capacity {
            self.states.pop_front();
        }
        self.states.push_back(state);
        Ok(())
    }

    fn require(&self, q: usize) -> Result<(), FlowError> {
        if self.states.len() < q {
            return Err(FlowError::InsufficientHistory {
                needed: q,
                available: self.states.len(),
            });
        }
        Ok(())
    }

    /// `q` most recent vectors selected by `field`, newest first.
    pub(crate) fn recent<'a, F>(&'a self, q: usize, field: F) -> Result<Vec<&'a [f64]>, FlowError>
    where
        F: Fn(&'a NodalState) -> &'a [f64],
    {
        self.require(q)?;
        Ok((0..q).map(|j| field(self.back(j).unwrap())).collect())
    }
}

/// Extrapolated `(x̃ⁿ, ũⁿ) = Σ_{j<q} γ_j (x, u)^{n-1-j}`.
pub fn extrapolate(
    history: &FlowHistory,
    scheme: &BdfScheme,
) -> Result<(Vec<f64>, Vec<f64>), FlowError> {
    let q = scheme.order();
    let xs = history.recent(q, |s| &s.x)?;
    let us = history.recent(q, |s| &s.u)?;
    Ok((scheme.extrapolate(&xs), scheme.extrapolate(&us)))
}
