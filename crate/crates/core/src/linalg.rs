//! Periodic banded matrices and the direct solvers built on them.
//!
//! Every operator in this crate couples only degrees of freedom that share an
//! element, so with the natural periodic numbering a matrix has entries only
//! at cyclic offsets `|j - i| mod n <= p`. [`PeriodicBandMatrix`] stores
//! exactly those offsets and [`CyclicBandLu`] factors it in `O(n p^2)` by
//! eliminating a banded interior block and closing the wrap-around through a
//! small dense Schur complement.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Anything that can apply the inverse of a square matrix.
pub trait LinearSolver {
    fn dim(&self) -> usize;

    fn solve_in_place(&self, rhs: &mut [f64]);

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Square matrix whose nonzeros lie within cyclic distance `p` of the diagonal.
///
/// Each stored entry has a unique canonical offset, so small matrices where
/// `n <= 2p` (and the band wraps onto itself) are represented correctly; the
/// slots for non-canonical offsets simply stay zero.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicBandMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl PeriodicBandMatrix {
    pub fn zeros(n: usize, p: usize) -> Self {
        Self {
            n,
            p,
            data: vec![0.0; n * (2 * p + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.p
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let d0 = (j + self.n - i % self.n) % self.n;
        let d = if d0 <= self.p {
            d0 as isize
        } else if self.n - d0 <= self.p {
            -((self.n - d0) as isize)
        } else {
            return None;
        };
        Some(i * (2 * self.p + 1) + (d + self.p as isize) as usize)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` at `(i, j)`.
    ///
    /// # Panics
    /// If `(i, j)` is outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside periodic band"));
        self.data[s] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside periodic band"));
        self.data[s] = v;
    }

    pub fn add_diagonal(&mut self, v: f64) {
        for i in 0..self.n {
            self.add(i, i, v);
        }
    }

    /// `self += alpha * other`, both with the same shape.
    pub fn add_scaled(&mut self, alpha: f64, other: &PeriodicBandMatrix) {
        assert_eq!(self.n, other.n);
        assert_eq!(self.p, other.p);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let w = 2 * self.p + 1;
        let mut y = vec![0.0; self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &self.data[i * w..(i + 1) * w];
            let mut s = 0.0;
            for (k, a) in row.iter().enumerate() {
                if *a != 0.0 {
                    let j = (i + self.n * (self.p / self.n + 1) + k - self.p) % self.n;
                    s += a * x[j];
                }
            }
            *yi = s;
        }
        y
    }

    /// Transposed product `A^T x`.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let w = 2 * self.p + 1;
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let row = &self.data[i * w..(i + 1) * w];
            for (k, a) in row.iter().enumerate() {
                if *a != 0.0 {
                    let j = (i + self.n * (self.p / self.n + 1) + k - self.p) % self.n;
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    pub fn max_abs(&self) -> f64 {
        inf_norm(&self.data)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        let w = 2 * self.p + 1;
        for i in 0..self.n {
            for k in 0..w {
                let v = self.data[i * w + k];
                if v != 0.0 {
                    let j = (i + self.n * (self.p / self.n + 1) + k - self.p) % self.n;
                    m[(i, j)] += v;
                }
            }
        }
        m
    }

    /// `(A - A^T) / 2`, which is exactly antisymmetric in floating point.
    pub fn skew_part(&self) -> Self {
        let mut out = Self::zeros(self.n, self.p);
        let w = 2 * self.p + 1;
        for i in 0..self.n {
            for k in 0..w {
                let j = (i + self.n * (self.p / self.n + 1) + k - self.p) % self.n;
                if self.slot(i, j) == Some(i * w + k) {
                    out.data[i * w + k] = 0.5 * (self.get(i, j) - self.get(j, i));
                }
            }
        }
        out
    }

    /// Copies this matrix into a wider band (used when interleaving blocks).
    pub fn with_half_bandwidth(&self, p: usize) -> Self {
        assert!(p >= self.p);
        let mut out = Self::zeros(self.n, p);
        let w = 2 * self.p + 1;
        for i in 0..self.n {
            for k in 0..w {
                let v = self.data[i * w + k];
                if v != 0.0 {
                    let j = (i + self.n * (self.p / self.n + 1) + k - self.p) % self.n;
                    out.add(i, j, v);
                }
            }
        }
        out
    }

    pub fn factor(&self) -> Result<CyclicBandLu> {
        CyclicBandLu::new(self)
    }
}

/// LU factorization with partial pivoting of an (acyclic) band matrix with
/// `kl` sub- and `ku` super-diagonals.
#[derive(Clone, Debug)]
struct BandLu {
    m: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    multipliers: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    fn new(m: usize, kl: usize, ku: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            m,
            kl,
            ku,
            width,
            data: vec![0.0; m * width],
            multipliers: vec![0.0; m * kl],
            pivots: vec![0; m],
        };
        for i in 0..m {
            let lo = i.saturating_sub(kl);
            let hi = (i + ku).min(m - 1);
            for j in lo..=hi {
                let s = lu.idx(i, j);
                lu.data[s] = entry(i, j);
            }
        }
        lu.factorize()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn factorize(&mut self) -> Result<()> {
        let (m, kl, ku) = (self.m, self.kl, self.ku);
        for k in 0..m {
            let last = (k + kl).min(m - 1);
            let mut r = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for i in k + 1..=last {
                let v = self.data[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    r = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular(format!("zero pivot in band LU at column {k}")));
            }
            self.pivots[k] = r;
            let jmax = (k + kl + ku).min(m - 1);
            if r != k {
                for j in k..=jmax {
                    let (a, b) = (self.idx(k, j), self.idx(r, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for i in k + 1..=last {
                let s = self.idx(i, k);
                let l = self.data[s] / pivot;
                self.data[s] = 0.0;
                self.multipliers[k * kl + (i - k - 1)] = l;
                if l != 0.0 {
                    for j in k + 1..=jmax {
                        let kj = self.data[self.idx(k, j)];
                        let ij = self.idx(i, j);
                        self.data[ij] -= l * kj;
                    }
                }
            }
        }
        Ok(())
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let (m, kl, ku) = (self.m, self.kl, self.ku);
        for k in 0..m {
            let r = self.pivots[k];
            if r != k {
                b.swap(k, r);
            }
            let bk = b[k];
            for i in k + 1..=(k + kl).min(m - 1) {
                b[i] -= self.multipliers[k * kl + (i - k - 1)] * bk;
            }
        }
        for k in (0..m).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + kl + ku).min(m - 1) {
                s -= self.data[self.idx(k, j)] * b[j];
            }
            b[k] = s / self.data[self.idx(k, k)];
        }
    }
}

/// Dense LU wrapper used for small or unstructured systems.
pub struct DenseLu {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl DenseLu {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let lu = m.lu();
        if !lu.is_invertible() {
            return Err(Error::Singular("dense LU".into()));
        }
        let u = lu.u();
        if u.diagonal().iter().any(|d| !d.is_finite() || *d == 0.0) {
            return Err(Error::Singular("dense LU".into()));
        }
        Ok(Self { lu })
    }
}

impl LinearSolver for DenseLu {
    fn dim(&self) -> usize {
        self.lu.l().nrows()
    }

    fn solve_in_place(&self, rhs: &mut [f64]) {
        let mut b = nalgebra::DVector::from_column_slice(rhs);
        self.lu.solve_mut(&mut b);
        rhs.copy_from_slice(b.as_slice());
    }
}

enum CyclicFactor {
    Dense(DenseLu),
    Bordered {
        interior: BandLu,
        /// interior^{-1} * C, column-major `m x q`
        spikes: Vec<f64>,
        /// bottom rows R, row-major `q x m`
        bottom: Vec<f64>,
        schur: DenseLu,
    },
}

/// Direct solver for a [`PeriodicBandMatrix`].
pub struct CyclicBandLu {
    n: usize,
    factor: CyclicFactor,
}

impl CyclicBandLu {
    pub fn new(a: &PeriodicBandMatrix) -> Result<Self> {
        let n = a.dim();
        let p = a.half_bandwidth();
        if n < 3 * p + 2 {
            return Ok(Self {
                n,
                factor: CyclicFactor::Dense(DenseLu::new(a.to_dense())?),
            });
        }
        // With the last q = p unknowns as a border, the leading block has no
        // wrap-around couplings and is an ordinary band matrix.
        let q = p;
        let m = n - q;
        let interior = BandLu::new(m, p, p, |i, j| a.get(i, j))?;

        let mut spikes = vec![0.0; m * q];
        for c in 0..q {
            let col = &mut spikes[c * m..(c + 1) * m];
            for (i, v) in col.iter_mut().enumerate() {
                *v = a.get(i, m + c);
            }
            interior.solve_in_place(col);
        }
        let mut bottom = vec![0.0; q * m];
        for r in 0..q {
            for j in 0..m {
                bottom[r * m + j] = a.get(m + r, j);
            }
        }
        let mut schur = DMatrix::zeros(q, q);
        for r in 0..q {
            for c in 0..q {
                let ry = dot(&bottom[r * m..(r + 1) * m], &spikes[c * m..(c + 1) * m]);
                schur[(r, c)] = a.get(m + r, m + c) - ry;
            }
        }
        Ok(Self {
            n,
            factor: CyclicFactor::Bordered {
                interior,
                spikes,
                bottom,
                schur: DenseLu::new(schur)?,
            },
        })
    }
}

impl LinearSolver for CyclicBandLu {
    fn dim(&self) -> usize {
        self.n
    }

    fn solve_in_place(&self, rhs: &mut [f64]) {
        match &self.factor {
            CyclicFactor::Dense(lu) => lu.solve_in_place(rhs),
            CyclicFactor::Bordered {
                interior,
                spikes,
                bottom,
                schur,
            } => {
                let m = interior.m;
                let q = self.n - m;
                let (b1, b2) = rhs.split_at_mut(m);
                interior.solve_in_place(b1);
                for (r, t) in b2.iter_mut().enumerate() {
                    *t -= dot(&bottom[r * m..(r + 1) * m], b1);
                }
                schur.solve_in_place(b2);
                for c in 0..q {
                    axpy(-b2[c], &spikes[c * m..(c + 1) * m], b1);
                }
            }
        }
    }
}

/// Solver for `J + a b^T` given a solver for `J` (Sherman–Morrison).
pub struct RankOneUpdate<S> {
    base: S,
    w: Vec<f64>,
    b: Vec<f64>,
    denom: f64,
}

impl<S: LinearSolver> RankOneUpdate<S> {
    pub fn new(base: S, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let w = base.solve(&a);
        let denom = 1.0 + dot(&b, &w);
        if denom.abs() < 1e-14 || !denom.is_finite() {
            return Err(Error::Singular(format!(
                "rank-one update denominator {denom:e}"
            )));
        }
        Ok(Self { base, w, b, denom })
    }
}

impl<S: LinearSolver> LinearSolver for RankOneUpdate<S> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn solve_in_place(&self, rhs: &mut [f64]) {
        self.base.solve_in_place(rhs);
        let s = dot(&self.b, rhs) / self.denom;
        axpy(-s, &self.w, rhs);
    }
}

/// Solver for the bordered matrix `[[J, col], [row^T, corner]]` of size `n + 1`.
pub struct BorderedSolver<S> {
    base: S,
    z: Vec<f64>,
    row: Vec<f64>,
    schur: f64,
}

impl<S: LinearSolver> BorderedSolver<S> {
    pub fn new(base: S, col: &[f64], row: Vec<f64>, corner: f64) -> Result<Self> {
        let z = base.solve(col);
        let schur = corner - dot(&row, &z);
        if schur == 0.0 || !schur.is_finite() {
            return Err(Error::Singular("bordered system Schur complement".into()));
        }
        Ok(Self { base, z, row, schur })
    }
}

impl<S: LinearSolver> LinearSolver for BorderedSolver<S> {
    fn dim(&self) -> usize {
        self.base.dim() + 1
    }

    fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.base.dim();
        let (top, last) = rhs.split_at_mut(n);
        self.base.solve_in_place(top);
        let mu = (last[0] - dot(&self.row, top)) / self.schur;
        axpy(-mu, &self.z, top);
        last[0] = mu;
    }
}

impl LinearSolver for Box<dyn LinearSolver> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn solve_in_place(&self, rhs: &mut [f64]) {
        (**self).solve_in_place(rhs)
    }
}
