//! Isotropic compliance, the stress-strain law and the manufactured solutions
//! used in the convergence studies.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense symmetric `n x n` tensor stored in full row-major form.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> SymTensor<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            t.set(i, i, T::one());
        }
        t
    }

    /// Symmetrizes a general row-major matrix.
    pub fn from_full(dim: usize, m: &[T]) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                t.data[i * dim + j] = (m[i * dim + j] + m[j * dim + i]) / T::lit(2.0);
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn trace(&self) -> T {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius inner product.
    pub fn ddot(&self, other: &Self) -> T {
        crate::scalar::dot(&self.data, &other.data)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicMaterial<T> {
    pub lambda: T,
    pub mu: T,
    pub dim: usize,
}

impl<T: Real> IsotropicMaterial<T> {
    pub fn new(lambda: T, mu: T, dim: usize) -> Result<Self> {
        if !(lambda > T::zero() && mu > T::zero() && lambda.is_finite() && mu.is_finite()) {
            return Err(Error::InvalidMaterial {
                lambda: lambda.to_f64_lossy(),
                mu: mu.to_f64_lossy(),
            });
        }
        if dim == 0 {
            return Err(Error::InvalidGrid("material dimension must be at least 1".into()));
        }
        Ok(Self { lambda, mu, dim })
    }

    /// The defaults of the reference experiments: `lambda = 1`, `mu = 1/2`.
    pub fn standard(dim: usize) -> Self {
        Self {
            lambda: T::one(),
            mu: T::lit(0.5),
            dim,
        }
    }

    fn trace_factor(&self) -> T {
        self.lambda / (T::lit(2.0) * self.mu + T::from_usize_lossy(self.dim) * self.lambda)
    }

    /// `A s = (s - lambda/(2 mu + n lambda) tr(s) I) / (2 mu)`
    pub fn compliance_apply(&self, s: &SymTensor<T>) -> SymTensor<T> {
        let n = s.dim();
        let t = self.trace_factor() * s.trace();
        let inv = T::one() / (T::lit(2.0) * self.mu);
        let mut out = SymTensor::zeros(n);
        for i in 0..n {
            for j in i..n {
                let d = if i == j { t } else { T::zero() };
                out.set(i, j, (s.get(i, j) - d) * inv);
            }
        }
        out
    }

    /// `A^{-1} e = 2 mu e + lambda tr(e) I`
    pub fn stiffness_apply(&self, e: &SymTensor<T>) -> SymTensor<T> {
        let n = e.dim();
        let t = self.lambda * e.trace();
        let mut out = SymTensor::zeros(n);
        for i in 0..n {
            for j in i..n {
                let d = if i == j { t } else { T::zero() };
                out.set(i, j, T::lit(2.0) * self.mu * e.get(i, j) + d);
            }
        }
        out
    }

    /// `(A E_a) : E_b` for the unit shape tensors of two stress slots.
    ///
    /// A slot is `(i, i)` for a normal component or `(i, j)`, `i < j`, for a
    /// shear pair whose shape tensor is `e_i (x) e_j + e_j (x) e_i`.
    pub fn slot_coupling(&self, a: (usize, usize), b: (usize, usize)) -> T {
        let inv = T::one() / (T::lit(2.0) * self.mu);
        let (na, nb) = (a.0 == a.1, b.0 == b.1);
        let frob = if a == b {
            if na {
                T::one()
            } else {
                T::lit(2.0)
            }
        } else {
            T::zero()
        };
        let tr = if na && nb { self.trace_factor() } else { T::zero() };
        (frob - tr) * inv
    }

    /// Extreme eigenvalues of `A` on symmetric tensors.
    pub fn compliance_bounds(&self) -> (T, T) {
        let two_mu = T::lit(2.0) * self.mu;
        (
            T::one() / (two_mu + T::from_usize_lossy(self.dim) * self.lambda),
            T::one() / two_mu,
        )
    }
}

/// Univariate factor of a separable displacement term, with its first two
/// derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Factor {
    One,
    /// `t (1 - t)`
    Bubble,
    /// `t^2 (1 - t)^2`
    BubbleSq,
    /// `exp(s t) t (1 - t)`
    ExpBubble(f64),
    /// `sin(pi t)`
    SinPi,
}

impl Factor {
    pub fn eval<T: Real>(self, t: T) -> [T; 3] {
        let b = t - t * t;
        let db = T::one() - T::lit(2.0) * t;
        let ddb = -T::lit(2.0);
        match self {
            Factor::One => [T::one(), T::zero(), T::zero()],
            Factor::Bubble => [b, db, ddb],
            Factor::BubbleSq => [
                b * b,
                T::lit(2.0) * b * db,
                T::lit(2.0) * db * db - T::lit(4.0) * b,
            ],
            Factor::ExpBubble(s) => {
                let s = T::lit(s);
                let e = (s * t).exp();
                [
                    e * b,
                    e * (s * b + db),
                    e * (s * s * b + T::lit(2.0) * s * db + ddb),
                ]
            }
            Factor::SinPi => {
                let p = T::PI();
                let (sn, cs) = (p * t).sin_cos();
                [sn, p * cs, -p * p * sn]
            }
        }
    }
}

/// `coeff * prod_a factor_a(x_a)`
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coeff: f64,
    pub factors: Vec<Factor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Problem {
    /// Polynomial bubble, pure displacement, 2D.
    E1,
    /// Exponential and trigonometric, pure displacement, 2D.
    E2,
    /// Polynomial bubble, pure displacement, 3D.
    E3,
    /// Pure traction, 2D.
    Traction,
}

impl Problem {
    pub const ALL: [Problem; 4] = [Problem::E1, Problem::E2, Problem::E3, Problem::Traction];

    pub fn dim(self) -> usize {
        match self {
            Problem::E3 => 3,
            _ => 2,
        }
    }

    pub fn is_traction(self) -> bool {
        self == Problem::Traction
    }

    pub fn tag(self) -> &'static str {
        match self {
            Problem::E1 => "e1",
            Problem::E2 => "e2",
            Problem::E3 => "e3",
            Problem::Traction => "traction",
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Problem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "e1" => Ok(Problem::E1),
            "e2" => Ok(Problem::E2),
            "e3" => Ok(Problem::E3),
            "traction" | "tr" => Ok(Problem::Traction),
            _ => Err(Error::UnknownSolution(s.to_string())),
        }
    }
}

/// Closed-form displacement with derived stress and load.
#[derive(Debug, Clone)]
pub struct ManufacturedSolution<T> {
    pub problem: Option<Problem>,
    pub material: IsotropicMaterial<T>,
    components: Vec<Vec<Term>>,
}

fn term(coeff: f64, factors: &[Factor]) -> Term {
    Term {
        coeff,
        factors: factors.to_vec(),
    }
}

impl<T: Real> ManufacturedSolution<T> {
    /// Builds a solution from per-component separable terms.
    pub fn from_terms(material: IsotropicMaterial<T>, components: Vec<Vec<Term>>) -> Result<Self> {
        let n = material.dim;
        if components.len() != n || components.iter().flatten().any(|t| t.factors.len() != n) {
            return Err(Error::Unsupported(format!(
                "separable terms must have {n} components of {n} factors"
            )));
        }
        Ok(Self {
            problem: None,
            material,
            components,
        })
    }

    pub fn new(problem: Problem, material: IsotropicMaterial<T>) -> Result<Self> {
        use Factor::*;
        if material.dim != problem.dim() {
            return Err(Error::Unsupported(format!(
                "problem {problem} is {}-dimensional, material is {}-dimensional",
                problem.dim(),
                material.dim
            )));
        }
        let components = match problem {
            Problem::E1 => vec![
                vec![term(4.0, &[Bubble, Bubble])],
                vec![term(-4.0, &[Bubble, Bubble])],
            ],
            Problem::E2 => vec![
                vec![term(1.0, &[ExpBubble(1.0), ExpBubble(-1.0)])],
                vec![term(1.0, &[SinPi, SinPi])],
            ],
            Problem::E3 => [16.0, 32.0, 64.0]
                .iter()
                .map(|&c| vec![term(c, &[Bubble, Bubble, Bubble])])
                .collect(),
            Problem::Traction => vec![
                vec![term(100.0, &[BubbleSq, BubbleSq]), term(-1.0 / 9.0, &[One, One])],
                vec![term(-100.0, &[BubbleSq, BubbleSq]), term(1.0 / 9.0, &[One, One])],
            ],
        };
        let mut s = Self::from_terms(material, components)?;
        s.problem = Some(problem);
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.material.dim
    }

    /// Values of every factor of every term: `[component][term][axis]`.
    fn factor_table(&self, x: &[T]) -> Vec<Vec<Vec<[T; 3]>>> {
        self.components
            .iter()
            .map(|terms| {
                terms
                    .iter()
                    .map(|t| t.factors.iter().zip(x).map(|(f, &xa)| f.eval(xa)).collect())
                    .collect()
            })
            .collect()
    }

    /// Mixed derivative of component `c` with derivative orders per axis.
    fn derivative(&self, table: &[Vec<Vec<[T; 3]>>], c: usize, orders: &[usize]) -> T {
        self.components[c]
            .iter()
            .zip(&table[c])
            .map(|(t, vals)| {
                vals.iter()
                    .zip(orders)
                    .fold(T::lit(t.coeff), |p, (v, &o)| p * v[o])
            })
            .sum()
    }

    pub fn displacement(&self, x: &[T]) -> Vec<T> {
        let n = self.dim();
        let tab = self.factor_table(x);
        let zero = vec![0; n];
        (0..n).map(|c| self.derivative(&tab, c, &zero)).collect()
    }

    /// Row-major `du_c / dx_b`.
    pub fn gradient(&self, x: &[T]) -> Vec<T> {
        let n = self.dim();
        let tab = self.factor_table(x);
        let mut g = Vec::with_capacity(n * n);
        for c in 0..n {
            for b in 0..n {
                let mut o = vec![0; n];
                o[b] = 1;
                g.push(self.derivative(&tab, c, &o));
            }
        }
        g
    }

    /// `d^2 u_c / dx_a dx_b`, indexed `[c][a * n + b]`.
    pub fn hessian(&self, x: &[T]) -> Vec<Vec<T>> {
        let n = self.dim();
        let tab = self.factor_table(x);
        (0..n)
            .map(|c| {
                let mut h = Vec::with_capacity(n * n);
                for a in 0..n {
                    for b in 0..n {
                        let mut o = vec![0; n];
                        o[a] += 1;
                        o[b] += 1;
                        h.push(self.derivative(&tab, c, &o));
                    }
                }
                h
            })
            .collect()
    }

    pub fn strain(&self, x: &[T]) -> SymTensor<T> {
        SymTensor::from_full(self.dim(), &self.gradient(x))
    }

    pub fn stress(&self, x: &[T]) -> SymTensor<T> {
        self.material.stiffness_apply(&self.strain(x))
    }

    /// `f = div sigma = mu lap u + (lambda + mu) grad div u`
    pub fn load(&self, x: &[T]) -> Vec<T> {
        let n = self.dim();
        let h = self.hessian(x);
        let (lam, mu) = (self.material.lambda, self.material.mu);
        (0..n)
            .map(|a| {
                let lap: T = (0..n).map(|b| h[a][b * n + b]).sum();
                let graddiv: T = (0..n).map(|b| h[b][a * n + b]).sum();
                mu * lap + (lam + mu) * graddiv
            })
            .collect()
    }
}

/// Rigid motions of the plane: `(1, 0)`, `(0, 1)`, `(y, -x)`.
pub fn rigid_motion<T: Real>(m: usize, x: &[T]) -> [T; 2] {
    match m {
        0 => [T::one(), T::zero()],
        1 => [T::zero(), T::one()],
        2 => [x[1], -x[0]],
        _ => panic!("rigid motion index {m} out of 0..3"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdReport {
    pub samples: usize,
    pub max_gradient_error: f64,
    pub max_load_error: f64,
    pub threshold: f64,
}

impl FdReport {
    pub fn passed(&self) -> bool {
        self.max_gradient_error <= self.threshold && self.max_load_error <= self.threshold
    }
}

/// Compares the closed-form gradient and load with central differences at
/// random interior points.
pub fn validate_solution(sol: &ManufacturedSolution<f64>, samples: usize, h_fd: f64, seed: u64) -> FdReport {
    let n = sol.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut eg, mut ef) = (0.0f64, 0.0f64);
    let shifted = |x: &[f64], a: usize, d: f64| {
        let mut y = x.to_vec();
        y[a] += d;
        y
    };
    for _ in 0..samples {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.95)).collect();
        let g = sol.gradient(&x);
        for b in 0..n {
            let up = sol.displacement(&shifted(&x, b, h_fd));
            let dn = sol.displacement(&shifted(&x, b, -h_fd));
            for c in 0..n {
                let fd = (up[c] - dn[c]) / (2.0 * h_fd);
                eg = eg.max((fd - g[c * n + b]).abs());
            }
        }
        let f = sol.load(&x);
        let mut fd = vec![0.0; n];
        for b in 0..n {
            let up = sol.stress(&shifted(&x, b, h_fd));
            let dn = sol.stress(&shifted(&x, b, -h_fd));
            for (a, v) in fd.iter_mut().enumerate() {
                *v += (up.get(a, b) - dn.get(a, b)) / (2.0 * h_fd);
            }
        }
        for a in 0..n {
            ef = ef.max((fd[a] - f[a]).abs());
        }
    }
    FdReport {
        samples,
        max_gradient_error: eg,
        max_load_error: ef,
        threshold: 100.0 * h_fd * h_fd,
    }
}
