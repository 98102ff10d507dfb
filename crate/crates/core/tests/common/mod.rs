//! Independent reference implementations used by the integration and
//! acceptance tests: global basis functions from first principles and
//! adaptive Gauss quadrature.

#![allow(dead_code)]

use bbm_ep::basis::BasisKind;
use bbm_ep::mesh::Mesh1D;
use rand::Rng;

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                x[i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                break;
            }
        }
    }
    (x, w)
}

pub struct Adaptive {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl Adaptive {
    pub fn new() -> Self {
        let (x, w) = gauss_legendre(10);
        Self { x, w }
    }

    fn rule(&self, a: f64, b: f64, f: &dyn Fn(f64) -> f64) -> f64 {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        self.x.iter().zip(&self.w).map(|(x, w)| w * r * f(c + r * x)).sum()
    }

    /// Bisects until the halves agree with the whole to `tol` times the
    /// integral of `|f|` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, tol: f64, f: &dyn Fn(f64) -> f64) -> f64 {
        let scale = self.rule(a, b, &|x| f(x).abs());
        if scale == 0.0 {
            return 0.0;
        }
        self.recurse(a, b, tol * scale, f, self.rule(a, b, f), 0)
    }

    fn recurse(&self, a: f64, b: f64, tol: f64, f: &dyn Fn(f64) -> f64, whole: f64, depth: usize) -> f64 {
        let m = 0.5 * (a + b);
        let (l, r) = (self.rule(a, m, f), self.rule(m, b, f));
        if (l + r - whole).abs() <= tol || depth >= 20 {
            return l + r;
        }
        self.recurse(a, m, tol, f, l, depth + 1) + self.recurse(m, b, tol, f, r, depth + 1)
    }
}

/// Global basis functions evaluated without the library's local tables.
pub struct OracleBasis {
    pub kind: BasisKind,
    pub nodes: Vec<f64>,
    pub length: f64,
}

impl OracleBasis {
    pub fn new(kind: BasisKind, mesh: &Mesh1D) -> Self {
        Self {
            kind,
            nodes: mesh.nodes().to_vec(),
            length: mesh.length(),
        }
    }

    pub fn elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn dofs(&self) -> usize {
        match self.kind {
            BasisKind::CubicLagrange => 3 * self.elements(),
            BasisKind::PeriodicCubicBSpline => self.elements(),
        }
    }

    /// `d`-th derivative of `phi_i` restricted to the interior of element `e`.
    pub fn eval(&self, i: usize, e: usize, x: f64, d: usize) -> f64 {
        match self.kind {
            BasisKind::CubicLagrange => self.lagrange(i, e, x, d),
            BasisKind::PeriodicCubicBSpline => self.bspline(i, e, x, d),
        }
    }

    fn lagrange(&self, i: usize, e: usize, x: f64, d: usize) -> f64 {
        let m = self.elements();
        let r = if i / 3 == e {
            i % 3
        } else if i % 3 == 0 && i / 3 == (e + 1) % m {
            3
        } else {
            return 0.0;
        };
        let (a, b) = (self.nodes[e], self.nodes[e + 1]);
        let y: Vec<f64> = (0..4).map(|s| (b - a) * s as f64 / 3.0).collect();
        // expand prod_{s != r} (t - y_s) / (y_r - y_s) in powers of t = x - a
        let mut poly = vec![1.0];
        for s in (0..4).filter(|&s| s != r) {
            let denom = y[r] - y[s];
            let mut next = vec![0.0; poly.len() + 1];
            for (k, c) in poly.iter().enumerate() {
                next[k + 1] += c / denom;
                next[k] -= c * y[s] / denom;
            }
            poly = next;
        }
        let t = x - a;
        let mut sum = 0.0;
        for (k, c) in poly.iter().enumerate().skip(d) {
            let falling: f64 = (0..d).map(|j| (k - j) as f64).product();
            sum += c * falling * t.powi((k - d) as i32);
        }
        sum
    }

    fn knot(&self, j: isize) -> f64 {
        let m = self.elements() as isize;
        self.nodes[j.rem_euclid(m) as usize] + self.length * j.div_euclid(m) as f64
    }

    fn bspline(&self, i: usize, e: usize, x: f64, d: usize) -> f64 {
        let m = self.elements();
        let k = (e + m - i) % m;
        if k > 3 {
            return 0.0;
        }
        let t: Vec<f64> = (0..5).map(|r| self.knot(i as isize + r as isize)).collect();
        let xs = x - self.nodes[e] + t[k];
        cox_de_boor(&t, 0, 3, d, xs)
    }

    pub fn supports(&self, i: usize, e: usize) -> bool {
        let m = self.elements();
        match self.kind {
            BasisKind::CubicLagrange => i / 3 == e || (i % 3 == 0 && i / 3 == (e + 1) % m),
            BasisKind::PeriodicCubicBSpline => (e + m - i) % m <= 3,
        }
    }

    pub fn field(&self, u: &[f64], e: usize, x: f64, d: usize) -> f64 {
        (0..self.dofs()).map(|i| u[i] * self.eval(i, e, x, d)).sum()
    }

    pub fn element_bounds(&self, e: usize) -> (f64, f64) {
        (self.nodes[e], self.nodes[e + 1])
    }

    pub fn locate(&self, x: f64) -> usize {
        let m = self.elements();
        (0..m).find(|&e| x < self.nodes[e + 1]).unwrap_or(m - 1)
    }
}

/// `d`-th derivative of `N_{j,p}` on the knots `t`, half-open spans.
fn cox_de_boor(t: &[f64], j: usize, p: usize, d: usize, x: f64) -> f64 {
    if d > p {
        return 0.0;
    }
    if p == 0 {
        return if t[j] <= x && x < t[j + 1] { 1.0 } else { 0.0 };
    }
    let (l, r) = (t[j + p] - t[j], t[j + p + 1] - t[j + 1]);
    if d == 0 {
        let a = if l > 0.0 { (x - t[j]) / l * cox_de_boor(t, j, p - 1, 0, x) } else { 0.0 };
        let b = if r > 0.0 { (t[j + p + 1] - x) / r * cox_de_boor(t, j + 1, p - 1, 0, x) } else { 0.0 };
        return a + b;
    }
    let a = if l > 0.0 { cox_de_boor(t, j, p - 1, d - 1, x) / l } else { 0.0 };
    let b = if r > 0.0 { cox_de_boor(t, j + 1, p - 1, d - 1, x) / r } else { 0.0 };
    p as f64 * (a - b)
}

/// Sum over elements of adaptive integrals of `f(e, x)`.
pub fn integrate_elements(q: &Adaptive, basis: &OracleBasis, f: &dyn Fn(usize, f64) -> f64) -> f64 {
    integrate_support(q, basis, &[], f)
}

/// As [`integrate_elements`], skipping elements where any of `dofs` vanishes.
pub fn integrate_support(q: &Adaptive, basis: &OracleBasis, dofs: &[usize], f: &dyn Fn(usize, f64) -> f64) -> f64 {
    (0..basis.elements())
        .filter(|&e| dofs.iter().all(|&i| basis.supports(i, e)))
        .map(|e| {
            let (a, b) = basis.element_bounds(e);
            q.integrate(a, b, 1e-14, &|x| f(e, x))
        })
        .sum()
}

/// Periodic mesh with nodes jittered by up to `jitter` of the uniform width.
pub fn random_mesh(rng: &mut impl Rng, half_length: f64, m: usize, jitter: f64) -> Mesh1D {
    let h = 2.0 * half_length / m as f64;
    let nodes = (0..=m)
        .map(|i| {
            let x = -half_length + h * i as f64;
            if i == 0 || i == m {
                x
            } else {
                x + jitter * h * rng.gen_range(-0.5..0.5)
            }
        })
        .collect();
    Mesh1D::new(nodes, half_length).expect("valid random mesh")
}

pub fn random_vec(rng: &mut impl Rng, n: usize, amplitude: f64) -> Vec<f64> {
    (0..n).map(|_| amplitude * rng.gen_range(-1.0..1.0)).collect()
}
