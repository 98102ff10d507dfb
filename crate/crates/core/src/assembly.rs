//! Mesh/basis dependent matrices and tensors.
//!
//! All integrands are piecewise polynomials of degree at most 9, so the
//! element loops use the 5-point Gauss rule and are exact up to rounding.

use crate::basis::{BasisKind, BasisSet, LOCAL_DOFS};
use crate::error::{check_len, Error, Result};
use crate::linalg::{CyclicBandLu, PeriodicBandMatrix};
use crate::quadrature::{gauss_rule, DEFAULT_POINTS};

const NQ: usize = DEFAULT_POINTS;

/// Half bandwidth of every assembled operator.
pub const BAND: usize = LOCAL_DOFS - 1;

/// Basis values at the quadrature points of every element.
#[derive(Clone, Debug)]
pub struct ElementQuadrature {
    pub dofs: Vec<[usize; 4]>,
    /// Physical weights `w_q * h_e`.
    pub weights: Vec<[f64; NQ]>,
    /// `phi[e][q][deriv][a]`
    pub phi: Vec<[[[f64; 4]; 4]; NQ]>,
}

impl ElementQuadrature {
    pub fn new(basis: &BasisSet) -> Self {
        let (pts, wts) = gauss_rule(NQ).expect("default rule").unit_interval();
        let m = basis.elements();
        let mut dofs = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        let mut phi = Vec::with_capacity(m);
        for e in 0..m {
            let h = basis.mesh().element_width(e);
            dofs.push(basis.dofs_unchecked(e));
            let mut w = [0.0; NQ];
            let mut p = [[[0.0; 4]; 4]; NQ];
            for q in 0..NQ {
                w[q] = wts[q] * h;
                p[q] = basis.eval_all(e, pts[q]);
            }
            weights.push(w);
            phi.push(p);
        }
        Self { dofs, weights, phi }
    }

    pub fn elements(&self) -> usize {
        self.dofs.len()
    }

    /// Field value and first derivative at each quadrature point of `e`.
    pub fn field_at(&self, e: usize, coeffs: &[f64]) -> [(f64, f64); NQ] {
        let dofs = &self.dofs[e];
        let mut out = [(0.0, 0.0); NQ];
        for (q, o) in out.iter_mut().enumerate() {
            let p = &self.phi[e][q];
            for a in 0..4 {
                let c = coeffs[dofs[a]];
                o.0 += c * p[0][a];
                o.1 += c * p[1][a];
            }
        }
        out
    }
}

fn bilinear(
    quad: &ElementQuadrature,
    n: usize,
    di: usize,
    dj: usize,
) -> PeriodicBandMatrix {
    let mut mat = PeriodicBandMatrix::zeros(n, BAND);
    for e in 0..quad.elements() {
        let dofs = &quad.dofs[e];
        let mut local = [[0.0; 4]; 4];
        for q in 0..NQ {
            let w = quad.weights[e][q];
            let p = &quad.phi[e][q];
            for a in 0..4 {
                for b in 0..4 {
                    local[a][b] += w * p[di][a] * p[dj][b];
                }
            }
        }
        for a in 0..4 {
            for b in 0..4 {
                mat.add(dofs[a], dofs[b], local[a][b]);
            }
        }
    }
    mat
}

/// Mass matrix `A_ij = int phi_i phi_j`.
pub fn assemble_mass(basis: &BasisSet) -> Result<PeriodicBandMatrix> {
    Ok(mass_from(&ElementQuadrature::new(basis), basis.dof_count()))
}

/// Stiffness matrix `E_ij = int phi_i' phi_j'`.
pub fn assemble_stiffness(basis: &BasisSet) -> Result<PeriodicBandMatrix> {
    Ok(stiffness_from(&ElementQuadrature::new(basis), basis.dof_count()))
}

pub(crate) fn mass_from(quad: &ElementQuadrature, n: usize) -> PeriodicBandMatrix {
    bilinear(quad, n, 0, 0)
}

pub(crate) fn stiffness_from(quad: &ElementQuadrature, n: usize) -> PeriodicBandMatrix {
    bilinear(quad, n, 1, 1)
}

/// Skew matrix of the H1 pairing; row `j`, column `i` holds
/// `-(2/3) int u phi_i phi_j' - int phi_i phi_j' - (1/3) int u' phi_i phi_j`.
pub fn assemble_b1(basis: &BasisSet, u: &[f64]) -> Result<PeriodicBandMatrix> {
    check_len(u.len(), basis.dof_count())?;
    let quad = ElementQuadrature::new(basis);
    Ok(b1_from(&quad, basis.dof_count(), u, false).0)
}

/// `B1(v)` and, if requested, the Jacobian of `v -> B1(v) v`.
pub(crate) fn b1_from(
    quad: &ElementQuadrature,
    n: usize,
    v: &[f64],
    with_tangent: bool,
) -> (PeriodicBandMatrix, Option<PeriodicBandMatrix>) {
    let mut b1 = PeriodicBandMatrix::zeros(n, BAND);
    let mut tangent = with_tangent.then(|| PeriodicBandMatrix::zeros(n, BAND));
    for e in 0..quad.elements() {
        let dofs = &quad.dofs[e];
        let vals = quad.field_at(e, v);
        let mut local = [[0.0; 4]; 4];
        let mut extra = [[0.0; 4]; 4];
        for q in 0..NQ {
            let w = quad.weights[e][q];
            let (vh, vx) = vals[q];
            let p = &quad.phi[e][q];
            // local[j][i]
            for j in 0..4 {
                for i in 0..4 {
                    local[j][i] += w
                        * (-(2.0 / 3.0) * vh * p[0][i] * p[1][j]
                            - p[0][i] * p[1][j]
                            - (1.0 / 3.0) * vx * p[0][i] * p[0][j]);
                    if with_tangent {
                        extra[j][i] += w
                            * (-(2.0 / 3.0) * vh * p[1][j] * p[0][i]
                                - (1.0 / 3.0) * vh * p[0][j] * p[1][i]);
                    }
                }
            }
        }
        for j in 0..4 {
            for i in 0..4 {
                b1.add(dofs[j], dofs[i], local[j][i]);
                if let Some(t) = tangent.as_mut() {
                    t.add(dofs[j], dofs[i], local[j][i] + extra[j][i]);
                }
            }
        }
    }
    // exact antisymmetry keeps v^T B1(v) v free of a rounding bias
    (b1.skew_part(), tangent)
}

/// Skew matrix of the H2 pairing, `(B2)_ji = -int phi_i phi_j' + int phi_i phi_j'''`.
/// Needs the C2 spline basis.
pub fn assemble_b2(basis: &BasisSet) -> Result<PeriodicBandMatrix> {
    if basis.kind() != BasisKind::PeriodicCubicBSpline {
        return Err(Error::UnsupportedBasis(
            "B2 needs a C2 basis (periodic cubic B-splines)".into(),
        ));
    }
    let quad = ElementQuadrature::new(basis);
    Ok(b2_from(&quad, basis.dof_count()))
}

fn b2_from(quad: &ElementQuadrature, n: usize) -> PeriodicBandMatrix {
    let mut b2 = PeriodicBandMatrix::zeros(n, BAND);
    for e in 0..quad.elements() {
        let dofs = &quad.dofs[e];
        let mut local = [[0.0; 4]; 4];
        for q in 0..NQ {
            let w = quad.weights[e][q];
            let p = &quad.phi[e][q];
            for j in 0..4 {
                for i in 0..4 {
                    local[j][i] += w * p[0][i] * (p[3][j] - p[1][j]);
                }
            }
        }
        for j in 0..4 {
            for i in 0..4 {
                b2.add(dofs[j], dofs[i], local[j][i]);
            }
        }
    }
    b2.skew_part()
}

/// Symmetric 3-tensor `D_ijk = int phi_i phi_j phi_k`, stored as one dense
/// `4x4x4` block per element.
#[derive(Clone, Debug)]
pub struct TripleTensor {
    n: usize,
    blocks: Vec<([usize; 4], [[[f64; 4]; 4]; 4])>,
}

impl TripleTensor {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        let mut s = 0.0;
        for (dofs, blk) in &self.blocks {
            for a in 0..4 {
                if dofs[a] != i {
                    continue;
                }
                for b in 0..4 {
                    if dofs[b] != j {
                        continue;
                    }
                    for c in 0..4 {
                        if dofs[c] == k {
                            s += blk[a][b][c];
                        }
                    }
                }
            }
        }
        s
    }

    /// All nonzero `(i, j, k, value)` entries, summed over elements.
    pub fn entries(&self) -> Vec<((usize, usize, usize), f64)> {
        let mut map = std::collections::BTreeMap::new();
        for (dofs, blk) in &self.blocks {
            for a in 0..4 {
                for b in 0..4 {
                    for c in 0..4 {
                        *map.entry((dofs[a], dofs[b], dofs[c])).or_insert(0.0) += blk[a][b][c];
                    }
                }
            }
        }
        map.into_iter().collect()
    }

    /// `sum_ijk D_ijk u_i u_j u_k`
    pub fn contract3(&self, u: &[f64]) -> f64 {
        let mut s = 0.0;
        for (dofs, blk) in &self.blocks {
            let ul = dofs.map(|d| u[d]);
            for a in 0..4 {
                for b in 0..4 {
                    for c in 0..4 {
                        s += blk[a][b][c] * ul[a] * ul[b] * ul[c];
                    }
                }
            }
        }
        s
    }

    /// `w_i = sum_jk D_ijk u_j v_k`
    pub fn contract2(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.n];
        for (dofs, blk) in &self.blocks {
            let ul = dofs.map(|d| u[d]);
            let vl = dofs.map(|d| v[d]);
            for a in 0..4 {
                let mut s = 0.0;
                for b in 0..4 {
                    for c in 0..4 {
                        s += blk[a][b][c] * ul[b] * vl[c];
                    }
                }
                w[dofs[a]] += s;
            }
        }
        w
    }

    /// `M_ij = sum_k D_ijk u_k`
    pub fn contract1(&self, u: &[f64]) -> PeriodicBandMatrix {
        let mut m = PeriodicBandMatrix::zeros(self.n, BAND);
        for (dofs, blk) in &self.blocks {
            let ul = dofs.map(|d| u[d]);
            for a in 0..4 {
                for b in 0..4 {
                    let s: f64 = (0..4).map(|c| blk[a][b][c] * ul[c]).sum();
                    m.add(dofs[a], dofs[b], s);
                }
            }
        }
        m
    }
}

pub fn assemble_d(basis: &BasisSet) -> Result<TripleTensor> {
    Ok(d_from(&ElementQuadrature::new(basis), basis.dof_count()))
}

pub(crate) fn d_from(quad: &ElementQuadrature, n: usize) -> TripleTensor {
    let mut blocks = Vec::with_capacity(quad.elements());
    for e in 0..quad.elements() {
        let mut blk = [[[0.0; 4]; 4]; 4];
        // sorted triples only, then copied, so every permutation is bitwise equal
        for a in 0..4 {
            for b in a..4 {
                for c in b..4 {
                    let mut s = 0.0;
                    for q in 0..NQ {
                        let p = &quad.phi[e][q][0];
                        s += quad.weights[e][q] * p[a] * p[b] * p[c];
                    }
                    for (x, y, z) in [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                        blk[x][y][z] = s;
                    }
                }
            }
        }
        blocks.push((quad.dofs[e], blk));
    }
    TripleTensor { n, blocks }
}

/// Row-compressed sparse matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    ncols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            ncols,
            rows: vec![Vec::new(); nrows],
        }
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let row = &mut self.rows[i];
        match row.iter_mut().find(|(c, _)| *c == j) {
            Some(entry) => entry.1 += v,
            None => row.push((j, v)),
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .iter()
            .find(|(c, _)| *c == j)
            .map_or(0.0, |(_, v)| *v)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|(j, v)| v * x[*j]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows(), self.ncols);
        for (i, row) in self.rows.iter().enumerate() {
            for (j, v) in row {
                m[(i, *j)] += v;
            }
        }
        m
    }
}

/// Cross-mesh mass matrix `C_ij = int phi_new_i phi_old_j`, integrated over
/// the union of both meshes' breakpoints so each panel sees polynomials only.
pub fn assemble_cross_mass(basis_old: &BasisSet, basis_new: &BasisSet) -> Result<SparseMatrix> {
    let (mo, mn) = (basis_old.mesh(), basis_new.mesh());
    if (mo.half_length() - mn.half_length()).abs() > 1e-14 * mo.half_length() {
        return Err(Error::DomainMismatch(format!(
            "half lengths {} and {}",
            mo.half_length(),
            mn.half_length()
        )));
    }
    if basis_old.kind() != basis_new.kind() {
        return Err(Error::DomainMismatch("bases of different kinds".into()));
    }
    let mut breaks: Vec<f64> = mo.nodes().iter().chain(mn.nodes()).copied().collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let (pts, wts) = gauss_rule(NQ)?.unit_interval();
    let mut c = SparseMatrix::new(basis_new.dof_count(), basis_old.dof_count());
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = b - a;
        if h <= 0.0 {
            continue;
        }
        let mid = 0.5 * (a + b);
        let (eo, _) = mo.locate(mid)?;
        let (en, _) = mn.locate(mid)?;
        let (oa, ob) = mo.element_bounds(eo);
        let (na, nb) = mn.element_bounds(en);
        let dofs_o = basis_old.dofs_unchecked(eo);
        let dofs_n = basis_new.dofs_unchecked(en);
        let mut local = [[0.0; 4]; 4];
        for q in 0..NQ {
            let x = a + pts[q] * h;
            let po = basis_old.eval_all(eo, (x - oa) / (ob - oa))[0];
            let pn = basis_new.eval_all(en, (x - na) / (nb - na))[0];
            for i in 0..4 {
                for j in 0..4 {
                    local[i][j] += wts[q] * h * pn[i] * po[j];
                }
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                c.add(dofs_n[i], dofs_o[j], local[i][j]);
            }
        }
    }
    Ok(c)
}

/// Everything the steppers need for one (mesh, basis) pair, with a cached
/// factorization of `A + E`.
pub struct AssemblyCache {
    basis: BasisSet,
    quad: ElementQuadrature,
    mass: PeriodicBandMatrix,
    stiffness: PeriodicBandMatrix,
    mass_plus_stiffness: PeriodicBandMatrix,
    k_lu: CyclicBandLu,
    mass_lu: CyclicBandLu,
    b2: Option<PeriodicBandMatrix>,
    d: TripleTensor,
}

impl AssemblyCache {
    pub fn new(basis: BasisSet) -> Result<Self> {
        let n = basis.dof_count();
        let quad = ElementQuadrature::new(&basis);
        let mass = mass_from(&quad, n);
        let stiffness = stiffness_from(&quad, n);
        let mut k = mass.clone();
        k.add_scaled(1.0, &stiffness);
        let k_lu = k.factor()?;
        let mass_lu = mass.factor()?;
        let b2 = (basis.kind() == BasisKind::PeriodicCubicBSpline).then(|| b2_from(&quad, n));
        let d = d_from(&quad, n);
        Ok(Self {
            basis,
            quad,
            mass,
            stiffness,
            mass_plus_stiffness: k,
            k_lu,
            mass_lu,
            b2,
            d,
        })
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn dof_count(&self) -> usize {
        self.basis.dof_count()
    }

    pub fn quadrature(&self) -> &ElementQuadrature {
        &self.quad
    }

    pub fn mass(&self) -> &PeriodicBandMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &PeriodicBandMatrix {
        &self.stiffness
    }

    /// `A + E`
    pub fn k(&self) -> &PeriodicBandMatrix {
        &self.mass_plus_stiffness
    }

    pub fn k_solver(&self) -> &CyclicBandLu {
        &self.k_lu
    }

    pub fn mass_solver(&self) -> &CyclicBandLu {
        &self.mass_lu
    }

    pub fn b2(&self) -> Result<&PeriodicBandMatrix> {
        self.b2.as_ref().ok_or_else(|| {
            Error::UnsupportedBasis("B2 needs a C2 basis (periodic cubic B-splines)".into())
        })
    }

    pub fn d(&self) -> &TripleTensor {
        &self.d
    }

    pub fn b1(&self, u: &[f64]) -> Result<PeriodicBandMatrix> {
        check_len(u.len(), self.dof_count())?;
        Ok(b1_from(&self.quad, self.dof_count(), u, false).0)
    }

    /// `(B1(v), d/dv [B1(v) v])`
    pub fn b1_with_tangent(&self, v: &[f64]) -> (PeriodicBandMatrix, PeriodicBandMatrix) {
        let (b, t) = b1_from(&self.quad, self.dof_count(), v, true);
        (b, t.expect("tangent requested"))
    }
}
