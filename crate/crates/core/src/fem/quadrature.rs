use super::FemError;

/// Symmetric quadrature on the reference triangle `{ξ, η ≥ 0, ξ + η ≤ 1}`.
///
/// Points are stored as `(ξ, η)`; weights sum to 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub degree: usize,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Barycentric coordinates `(1 - ξ - η, ξ, η)` of point `q`.
    pub fn barycentric(&self, q: usize) -> [f64; 3] {
        let [xi, eta] = self.points[q];
        [1.0 - xi - eta, xi, eta]
    }
}

struct Builder {
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            points: Vec::new(),
            weights: Vec::new(),
        }
    }

    // weights below are normalized to the unit-area convention
    fn centroid(mut self, w: f64) -> Self {
        self.points.push([1.0 / 3.0, 1.0 / 3.0]);
        self.weights.push(0.5 * w);
        self
    }

    /// The three points with barycentric coordinates `(a, a, 1 - 2a)`.
    fn orbit3(mut self, a: f64, w: f64) -> Self {
        let b = 1.0 - 2.0 * a;
        for [l1, l2] in [[a, a], [b, a], [a, b]] {
            self.points.push([l1, l2]);
            self.weights.push(0.5 * w);
        }
        self
    }

    /// The six points with barycentric coordinates `(a, b, 1 - a - b)`.
    fn orbit6(mut self, a: f64, b: f64, w: f64) -> Self {
        let c = 1.0 - a - b;
        for [l1, l2] in [[a, b], [b, a], [a, c], [c, a], [b, c], [c, b]] {
            self.points.push([l1, l2]);
            self.weights.push(0.5 * w);
        }
        self
    }

    fn build(self, degree: usize) -> QuadratureRule {
        QuadratureRule {
            degree,
            points: self.points,
            weights: self.weights,
        }
    }
}

/// A rule integrating all polynomials of total degree `≤ degree` exactly.
/// Degrees 1 through 6 are supported; degree 3 uses the degree-4 rule.
pub fn quadrature(degree: usize) -> Result<QuadratureRule, FemError> {
    let rule = match degree {
        0 | 1 => Builder::new().centroid(1.0).build(1),
        2 => Builder::new().orbit3(1.0 / 6.0, 1.0 / 3.0).build(2),
        3 | 4 => Builder::new()
            .orbit3(0.445_948_490_915_965, 0.223_381_589_678_011)
            .orbit3(0.091_576_213_509_771, 0.109_951_743_655_322)
            .build(4),
        5 => {
            let s = 15f64.sqrt();
            Builder::new()
                .centroid(9.0 / 40.0)
                .orbit3((6.0 - s) / 21.0, (155.0 - s) / 1200.0)
                .orbit3((6.0 + s) / 21.0, (155.0 + s) / 1200.0)
                .build(5)
        }
        6 => Builder::new()
            .orbit3(0.249_286_745_170_910, 0.116_786_275_726_379)
            .orbit3(0.063_089_014_491_502, 0.050_844_906_370_207)
            .orbit6(
                0.053_145_049_844_817,
                0.310_352_451_033_784,
                0.082_851_075_618_374,
            )
            .build(6),
        d => return Err(FemError::UnsupportedQuadrature(d)),
    };
    Ok(rule)
}
