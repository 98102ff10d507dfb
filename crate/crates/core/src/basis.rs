//! Cubic trial spaces on a periodic mesh.
//!
//! Both spaces have exactly four basis functions supported on each element,
//! so everything downstream works with `[f64; 4]` local blocks.

use crate::error::{check_len, Error, Result};
use crate::mesh::Mesh1D;

/// Polynomial degree of both bases.
pub const DEGREE: usize = 3;

/// Basis functions supported on one element.
pub const LOCAL_DOFS: usize = DEGREE + 1;

/// Highest derivative order that can be evaluated.
pub const MAX_DERIVATIVE: usize = DEGREE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BasisKind {
    /// C0 nodal cubics with equispaced interior nodes; `3M` dofs.
    CubicLagrange,
    /// C2 cubic B-splines with the mesh nodes as simple knots; `M` dofs.
    PeriodicCubicBSpline,
}

/// Monomial coefficients of the nodal cubics on `[0, 1]` with nodes
/// `0, 1/3, 2/3, 1`.
const LAGRANGE: [[f64; 4]; 4] = [
    [1.0, -5.5, 9.0, -4.5],
    [0.0, 9.0, -22.5, 13.5],
    [0.0, -4.5, 18.0, -13.5],
    [0.0, 1.0, -4.5, 4.5],
];

#[derive(Clone, Debug, PartialEq)]
pub struct BasisSet {
    kind: BasisKind,
    mesh: Mesh1D,
}

impl BasisSet {
    pub fn new(kind: BasisKind, mesh: Mesh1D) -> Self {
        Self { kind, mesh }
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn elements(&self) -> usize {
        self.mesh.elements()
    }

    pub fn dof_count(&self) -> usize {
        match self.kind {
            BasisKind::CubicLagrange => 3 * self.elements(),
            BasisKind::PeriodicCubicBSpline => self.elements(),
        }
    }

    /// Global dofs of the four functions supported on element `e`, in the
    /// order used by [`BasisSet::eval_basis`].
    pub fn supported_dofs(&self, e: usize) -> Result<[usize; 4]> {
        let m = self.elements();
        if e >= m {
            return Err(Error::IndexOutOfRange { index: e, limit: m });
        }
        Ok(self.dofs_unchecked(e))
    }

    pub(crate) fn dofs_unchecked(&self, e: usize) -> [usize; 4] {
        let m = self.elements();
        match self.kind {
            BasisKind::CubicLagrange => {
                let n = 3 * m;
                [3 * e, 3 * e + 1, 3 * e + 2, (3 * e + 3) % n]
            }
            BasisKind::PeriodicCubicBSpline => {
                [(e + m - 3) % m, (e + m - 2) % m, (e + m - 1) % m, e]
            }
        }
    }

    /// Values (`deriv = 0`) or physical-coordinate derivatives of the four
    /// supported functions at `x_e + xi * h_e`.
    pub fn eval_basis(&self, e: usize, xi: f64, deriv: usize) -> Result<[f64; 4]> {
        if e >= self.elements() {
            return Err(Error::IndexOutOfRange {
                index: e,
                limit: self.elements(),
            });
        }
        if deriv > MAX_DERIVATIVE {
            return Err(Error::UnsupportedDerivative(deriv));
        }
        Ok(self.eval_all(e, xi)[deriv])
    }

    /// All derivatives `0..=3` of the supported functions; `out[d][a]`.
    pub fn eval_all(&self, e: usize, xi: f64) -> [[f64; 4]; 4] {
        match self.kind {
            BasisKind::CubicLagrange => self.lagrange_all(e, xi),
            BasisKind::PeriodicCubicBSpline => self.bspline_all(e, xi),
        }
    }

    fn lagrange_all(&self, e: usize, xi: f64) -> [[f64; 4]; 4] {
        let inv_h = 1.0 / self.mesh.element_width(e);
        let mut out = [[0.0; 4]; 4];
        for (a, c) in LAGRANGE.iter().enumerate() {
            out[0][a] = c[0] + xi * (c[1] + xi * (c[2] + xi * c[3]));
            out[1][a] = (c[1] + xi * (2.0 * c[2] + xi * 3.0 * c[3])) * inv_h;
            out[2][a] = (2.0 * c[2] + 6.0 * c[3] * xi) * inv_h * inv_h;
            out[3][a] = 6.0 * c[3] * inv_h * inv_h * inv_h;
        }
        out
    }

    /// Periodically extended knot `t_j`.
    fn knot(&self, j: isize) -> f64 {
        let m = self.elements() as isize;
        let q = j.div_euclid(m);
        let r = j.rem_euclid(m) as usize;
        self.mesh.nodes()[r] + self.mesh.length() * q as f64
    }

    /// Cox–de Boor basis functions and derivatives (de Boor's triangular
    /// scheme with derivative recurrences) on the local knots
    /// `t_{e-3} .. t_{e+4}`.
    fn bspline_all(&self, e: usize, xi: f64) -> [[f64; 4]; 4] {
        const P: usize = DEGREE;
        let mut knots = [0.0; 2 * P + 2];
        for (r, k) in knots.iter_mut().enumerate() {
            *k = self.knot(e as isize - P as isize + r as isize);
        }
        let (a, b) = self.mesh.element_bounds(e);
        let u = a + xi * (b - a);
        let span = P;

        let mut ndu = [[0.0; P + 1]; P + 1];
        let mut left = [0.0; P + 1];
        let mut right = [0.0; P + 1];
        ndu[0][0] = 1.0;
        for j in 1..=P {
            left[j] = u - knots[span + 1 - j];
            right[j] = knots[span + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let mut ders = [[0.0; P + 1]; P + 1];
        for j in 0..=P {
            ders[0][j] = ndu[j][P];
        }
        let mut a = [[0.0; P + 1]; 2];
        for r in 0..=P {
            let (mut s1, mut s2) = (0, 1);
            a[0][0] = 1.0;
            for k in 1..=P {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = P - k;
                if r >= k {
                    let rk = rk as usize;
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                    d = a[s2][0] * ndu[rk][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { P - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = P as f64;
        for (k, row) in ders.iter_mut().enumerate().skip(1) {
            for v in row.iter_mut() {
                *v *= factor;
            }
            factor *= (P - k) as f64;
        }
        ders
    }

    /// `sum_i coeffs_i phi_i^{(deriv)}(x)`.
    pub fn eval_field_deriv(&self, coeffs: &[f64], x: f64, deriv: usize) -> Result<f64> {
        check_len(coeffs.len(), self.dof_count())?;
        if deriv > MAX_DERIVATIVE {
            return Err(Error::UnsupportedDerivative(deriv));
        }
        let (e, xi) = self.mesh.locate(x)?;
        let phi = self.eval_all(e, xi);
        let dofs = self.dofs_unchecked(e);
        Ok((0..4).map(|a| coeffs[dofs[a]] * phi[deriv][a]).sum())
    }

    pub fn eval_field(&self, coeffs: &[f64], x: f64) -> Result<f64> {
        self.eval_field_deriv(coeffs, x, 0)
    }

    /// Field values at the mesh nodes, including the duplicated seam node.
    pub fn nodal_values(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        check_len(coeffs.len(), self.dof_count())?;
        let m = self.elements();
        match self.kind {
            BasisKind::CubicLagrange => {
                let mut v: Vec<f64> = (0..m).map(|e| coeffs[3 * e]).collect();
                v.push(coeffs[0]);
                Ok(v)
            }
            BasisKind::PeriodicCubicBSpline => {
                let mut v = Vec::with_capacity(m + 1);
                for e in 0..m {
                    let phi = self.eval_all(e, 0.0);
                    let dofs = self.dofs_unchecked(e);
                    v.push((0..4).map(|a| coeffs[dofs[a]] * phi[0][a]).sum());
                }
                v.push(v[0]);
                Ok(v)
            }
        }
    }

    /// Positions of the nodal dofs (cubic Lagrange only).
    pub fn dof_positions(&self) -> Result<Vec<f64>> {
        if self.kind != BasisKind::CubicLagrange {
            return Err(Error::UnsupportedBasis(
                "B-spline coefficients are not nodal values".into(),
            ));
        }
        let m = self.elements();
        let mut pos = Vec::with_capacity(3 * m);
        for e in 0..m {
            let (a, b) = self.mesh.element_bounds(e);
            let h = b - a;
            pos.extend_from_slice(&[a, a + h / 3.0, a + 2.0 * h / 3.0]);
        }
        Ok(pos)
    }
}
