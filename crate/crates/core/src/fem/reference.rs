use super::FemError;
use crate::mesh::Order;

pub const MAX_LOCAL_NODES: usize = 6;

/// Lagrange shape functions of degree 1 or 2 on the reference triangle.
///
/// Local node order: vertices `(0,0)`, `(1,0)`, `(0,1)`, then the midpoints of
/// the edges opposite each vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceElement {
    pub order: Order,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeValues {
    pub len: usize,
    pub values: [f64; MAX_LOCAL_NODES],
    /// `(∂/∂ξ, ∂/∂η)` per local node.
    pub gradients: [[f64; 2]; MAX_LOCAL_NODES],
}

impl ShapeValues {
    pub fn values(&self) -> &[f64] {
        &self.values[..self.len]
    }

    pub fn gradients(&self) -> &[[f64; 2]] {
        &self.gradients[..self.len]
    }
}

const INSIDE_TOL: f64 = 1e-12;

impl ReferenceElement {
    pub fn new(order: Order) -> Self {
        ReferenceElement { order }
    }

    pub fn num_nodes(&self) -> usize {
        self.order.nodes_per_element()
    }

    /// Reference coordinates of local node `i`.
    pub fn node(&self, i: usize) -> [f64; 2] {
        [
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [0.5, 0.5],
            [0.0, 0.5],
            [0.5, 0.0],
        ][i]
    }

    /// Shape values and reference gradients at `(ξ, η)`.
    pub fn eval(&self, xi: f64, eta: f64) -> Result<ShapeValues, FemError> {
        let l0 = 1.0 - xi - eta;
        if !(xi >= -INSIDE_TOL && eta >= -INSIDE_TOL && l0 >= -INSIDE_TOL) {
            return Err(FemError::OutsideReference(xi, eta));
        }
        Ok(self.eval_unchecked(xi, eta))
    }

    pub(crate) fn eval_unchecked(&self, xi: f64, eta: f64) -> ShapeValues {
        let mut s = ShapeValues {
            len: self.num_nodes(),
            values: [0.0; MAX_LOCAL_NODES],
            gradients: [[0.0; 2]; MAX_LOCAL_NODES],
        };
        let l = [1.0 - xi - eta, xi, eta];
        // ∇λ in (ξ, η)
        let dl = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
        match self.order {
            Order::Linear => {
                s.values[..3].copy_from_slice(&l);
                s.gradients[..3].copy_from_slice(&dl);
            }
            Order::Quadratic => {
                for i in 0..3 {
                    s.values[i] = l[i] * (2.0 * l[i] - 1.0);
                    let f = 4.0 * l[i] - 1.0;
                    s.gradients[i] = [f * dl[i][0], f * dl[i][1]];
                }
                for (slot, (a, b)) in [(1, 2), (2, 0), (0, 1)].into_iter().enumerate() {
                    s.values[3 + slot] = 4.0 * l[a] * l[b];
                    s.gradients[3 + slot] = [
                        4.0 * (dl[a][0] * l[b] + l[a] * dl[b][0]),
                        4.0 * (dl[a][1] * l[b] + l[a] * dl[b][1]),
                    ];
                }
            }
        }
        s
    }
}

/// Shape values at a point given in barycentric coordinates `(λ₀, λ₁, λ₂)`.
pub fn shape_eval(elem: &ReferenceElement, bary: [f64; 3]) -> Result<ShapeValues, FemError> {
    let sum = bary[0] + bary[1] + bary[2];
    if (sum - 1.0).abs() > INSIDE_TOL || bary.iter().any(|&l| l < -INSIDE_TOL) {
        return Err(FemError::OutsideReference(bary[1], bary[2]));
    }
    elem.eval(bary[1], bary[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_vertex_values() {
        let e = ReferenceElement::new(Order::Linear);
        let s = shape_eval(&e, [0.0, 1.0, 0.0]).unwrap();
        assert_eq!(s.values(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn quadratic_vertex_function_at_centroid() {
        let e = ReferenceElement::new(Order::Quadratic);
        let s = shape_eval(&e, [1.0 / 3.0; 3]).unwrap();
        for i in 0..3 {
            assert!((s.values[i] + 1.0 / 9.0).abs() < 1e-15);
        }
        for i in 3..6 {
            assert!((s.values[i] - 4.0 / 9.0).abs() < 1e-15);
        }
    }

    #[test]
    fn lagrange_property() {
        for order in [Order::Linear, Order::Quadratic] {
            let e = ReferenceElement::new(order);
            for j in 0..e.num_nodes() {
                let [xi, eta] = e.node(j);
                let s = e.eval(xi, eta).unwrap();
                for i in 0..e.num_nodes() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((s.values[i] - expect).abs() < 1e-15, "{order:?} {i} at {j}");
                }
            }
        }
    }

    #[test]
    fn partition_of_unity_and_zero_gradient_sum() {
        for order in [Order::Linear, Order::Quadratic] {
            let e = ReferenceElement::new(order);
            for &(xi, eta) in &[(0.1, 0.2), (0.7, 0.05), (0.3, 0.3), (0.0, 1.0)] {
                let s = e.eval(xi, eta).unwrap();
                let sum: f64 = s.values().iter().sum();
                assert!((sum - 1.0).abs() < 1e-14);
                let g = s
                    .gradients()
                    .iter()
                    .fold([0.0, 0.0], |a, g| [a[0] + g[0], a[1] + g[1]]);
                assert!(g[0].abs() < 1e-13 && g[1].abs() < 1e-13);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let e = ReferenceElement::new(Order::Quadratic);
        let (xi, eta, h) = (0.23, 0.41, 1e-6);
        let s = e.eval(xi, eta).unwrap();
        let sx = e.eval(xi + h, eta).unwrap();
        let sxm = e.eval(xi - h, eta).unwrap();
        let sy = e.eval(xi, eta + h).unwrap();
        let sym = e.eval(xi, eta - h).unwrap();
        for i in 0..6 {
            let gx = (sx.values[i] - sxm.values[i]) / (2.0 * h);
            let gy = (sy.values[i] - sym.values[i]) / (2.0 * h);
            assert!((gx - s.gradients[i][0]).abs() < 1e-8);
            assert!((gy - s.gradients[i][1]).abs() < 1e-8);
        }
    }

    #[test]
    fn outside_points_rejected() {
        let e = ReferenceElement::new(Order::Linear);
        assert!(e.eval(0.8, 0.8).is_err());
        assert!(e.eval(-0.1, 0.5).is_err());
        assert!(shape_eval(&e, [0.5, 0.5, 0.5]).is_err());
    }
}
