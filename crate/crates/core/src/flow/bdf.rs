use num_rational::Rational64;

use super::FlowError;

/// Coefficients of the `q`-step backward difference formula and of its
/// extrapolation polynomial:
///
/// `δ(ζ) = Σ_{j=0}^q δ_j ζ^j = Σ_{ℓ=1}^q (1 - ζ)^ℓ / ℓ`,
/// `γ(ζ) = Σ_{j=0}^{q-1} γ_j ζ^j = (1 - (1 - ζ)^q) / ζ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BdfScheme {
    order: usize,
    delta: Vec<f64>,
    gamma: Vec<f64>,
}

fn binomial(n: usize, k: usize) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i as i64 + 1))
}

fn to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Exact δ and γ for `1 ≤ q ≤ 5`.
pub fn bdf_coefficients_exact(q: usize) -> Result<(Vec<Rational64>, Vec<Rational64>), FlowError> {
    if !(1..=5).contains(&q) {
        return Err(FlowError::InvalidConfig(format!(
            "BDF order must be in 1..=5, got {q}"
        )));
    }
    let mut delta = vec![Rational64::from_integer(0); q + 1];
    for l in 1..=q {
        // (1 - ζ)^ℓ / ℓ
        for (j, d) in delta.iter_mut().enumerate().take(l + 1) {
            let sign = if j % 2 == 0 { 1 } else { -1 };
            *d += Rational64::new(sign * binomial(l, j), l as i64);
        }
    }
    // (1 - (1 - ζ)^q) / ζ = Σ_{j=0}^{q-1} (-1)^j C(q, j+1) ζ^j
    let gamma = (0..q)
        .map(|j| {
            let sign = if j % 2 == 0 { 1 } else { -1 };
            Rational64::from_integer(sign * binomial(q, j + 1))
        })
        .collect();
    Ok((delta, gamma))
}

pub fn bdf_coefficients(q: usize) -> Result<BdfScheme, FlowError> {
    let (delta, gamma) = bdf_coefficients_exact(q)?;
    Ok(BdfScheme {
        order: q,
        delta: delta.into_iter().map(to_f64).collect(),
        gamma: gamma.into_iter().map(to_f64).collect(),
    })
}

impl BdfScheme {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// `(1/τ) Σ_j δ_j y^{n-j}` with `newest_first[j] = y^{n-j}`.
    pub fn derivative(&self, tau: f64, newest_first: &[&[f64]]) -> Vec<f64> {
        assert_eq!(newest_first.len(), self.order + 1);
        combine(&self.delta, newest_first, 1.0 / tau)
    }

    /// `Σ_j γ_j y^{n-1-j}` with `previous_newest_first[j] = y^{n-1-j}`.
    pub fn extrapolate(&self, previous_newest_first: &[&[f64]]) -> Vec<f64> {
        assert_eq!(previous_newest_first.len(), self.order);
        combine(&self.gamma, previous_newest_first, 1.0)
    }

    /// `Σ_{j=1}^q δ_j y^{n-j}`, the history part of the difference quotient.
    pub fn history_sum(&self, previous_newest_first: &[&[f64]]) -> Vec<f64> {
        assert_eq!(previous_newest_first.len(), self.order);
        combine(&self.delta[1..], previous_newest_first, 1.0)
    }
}

fn combine(coeffs: &[f64], vectors: &[&[f64]], scale: f64) -> Vec<f64> {
    let len = vectors[0].len();
    let mut out = vec![0.0; len];
    for (c, v) in coeffs.iter().zip(vectors) {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += c * x;
        }
    }
    if scale != 1.0 {
        out.iter_mut().for_each(|o| *o *= scale);
    }
    out
}
