//! Dense linear-algebra and frequency-domain toolkit for real state-space
//! systems: frequency response, spectral radius, observability rank, and
//! Hermitian eigenvalue extraction.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Real state-space quadruple (A, B, C, D).
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl StateSpace {
    /// Builds a state-space system, checking dimension consistency.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "StateSpace::new",
                expected: format!("square A ({n}x{n})"),
                got: format!("{}x{}", a.nrows(), a.ncols()),
            });
        }
        if b.nrows() != n || c.ncols() != n || d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::DimensionMismatch {
                context: "StateSpace::new",
                expected: format!("B {n}xm, C px{n}, D pxm"),
                got: format!(
                    "B {}x{}, C {}x{}, D {}x{}",
                    b.nrows(),
                    b.ncols(),
                    c.nrows(),
                    c.ncols(),
                    d.nrows(),
                    d.ncols()
                ),
            });
        }
        Ok(Self { a, b, c, d })
    }

    /// Builds a strictly proper system (D = 0).
    pub fn strictly_proper(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let d = DMatrix::zeros(c.nrows(), b.ncols());
        Self::new(a, b, c, d)
    }

    /// State dimension n.
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension m.
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    /// Output dimension p.
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    /// True iff D = 0.
    pub fn is_strictly_proper(&self) -> bool {
        self.d.iter().all(|&x| x == 0.0)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
}

/// Uniform grid of frequencies over [0, pi], inclusive at both ends.
#[derive(Debug, Clone)]
pub struct FrequencyGrid {
    points: Vec<f64>,
}

impl FrequencyGrid {
    /// Default number of grid points used by the certificate sweeps.
    pub const DEFAULT_COUNT: usize = 4096;

    /// Builds a uniform grid with `count >= 2` points from 0 to pi.
    pub fn uniform(count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidConfig(format!(
                "frequency grid needs at least 2 points, got {count}"
            )));
        }
        let step = std::f64::consts::PI / (count - 1) as f64;
        let mut points: Vec<f64> = (0..count).map(|i| i as f64 * step).collect();
        // Pin the endpoints exactly.
        points[0] = 0.0;
        *points.last_mut().unwrap() = std::f64::consts::PI;
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self::uniform(Self::DEFAULT_COUNT).unwrap()
    }
}

/// Reusable frequency-response evaluator.
///
/// Reduces A to upper Hessenberg form once (A = Q H Q') so each evaluation of
/// C (zI - A)^{-1} B + D costs O(n^2) instead of O(n^3), which makes the
/// per-step certificate sweeps cheap.
#[derive(Debug, Clone)]
pub struct FreqSweep {
    h: DMatrix<f64>,
    cq: DMatrix<f64>,
    qtb: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl FreqSweep {
    pub fn new(sys: &StateSpace) -> Self {
        let n = sys.order();
        if n <= 1 {
            // Trivially Hessenberg already.
            return Self {
                h: sys.a.clone(),
                cq: sys.c.clone(),
                qtb: sys.b.clone(),
                d: sys.d.clone(),
            };
        }
        let hess = sys.a.clone().hessenberg();
        let (q, h) = (hess.q(), hess.h());
        Self {
            h,
            cq: &sys.c * &q,
            qtb: q.transpose() * &sys.b,
            d: sys.d.clone(),
        }
    }

    /// Evaluates the transfer matrix at z = e^{j psi}.
    pub fn eval(&self, psi: f64) -> Result<DMatrix<Complex64>> {
        let z = Complex64::from_polar(1.0, psi);
        let n = self.h.nrows();
        let p = self.cq.nrows();
        let m = self.qtb.ncols();
        let mut out = DMatrix::<Complex64>::zeros(p, m);
        for col in 0..m {
            let rhs: DVector<Complex64> =
                DVector::from_iterator(n, self.qtb.column(col).iter().map(|&x| Complex64::new(x, 0.0)));
            let x = solve_shifted_hessenberg(&self.h, z, rhs)
                .ok_or(Error::NearSingularResolvent { psi })?;
            for row in 0..p {
                let mut acc = Complex64::new(self.d[(row, col)], 0.0);
                for i in 0..n {
                    acc += Complex64::new(self.cq[(row, i)], 0.0) * x[i];
                }
                out[(row, col)] = acc;
            }
        }
        Ok(out)
    }

    /// Scalar shortcut for single-input single-output systems.
    pub fn eval_scalar(&self, psi: f64) -> Result<Complex64> {
        debug_assert!(self.cq.nrows() == 1 && self.qtb.ncols() == 1);
        Ok(self.eval(psi)?[(0, 0)])
    }
}

/// Solves (zI - H) x = b for upper Hessenberg H using Gaussian elimination
/// with partial pivoting over the two-row band. Returns `None` when a pivot
/// underflows, which signals a pole at (or numerically at) z.
fn solve_shifted_hessenberg(
    h: &DMatrix<f64>,
    z: Complex64,
    mut b: DVector<Complex64>,
) -> Option<DVector<Complex64>> {
    let n = h.nrows();
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        for i in 0..=(j + 1).min(n - 1) {
            m[(i, j)] = -Complex64::new(h[(i, j)], 0.0);
        }
        m[(j, j)] += z;
    }
    let tiny = 1e-300;
    for i in 0..n - 1 {
        if m[(i + 1, i)].norm_sqr() > m[(i, i)].norm_sqr() {
            m.swap_rows(i, i + 1);
            b.swap_rows(i, i + 1);
        }
        let pivot = m[(i, i)];
        if pivot.norm() < tiny {
            return None;
        }
        let factor = m[(i + 1, i)] / pivot;
        if factor != Complex64::new(0.0, 0.0) {
            for j in i..n {
                let mij = m[(i, j)];
                m[(i + 1, j)] -= factor * mij;
            }
            let bi = b[i];
            b[i + 1] -= factor * bi;
        }
    }
    if m[(n - 1, n - 1)].norm() < tiny {
        return None;
    }
    // Back substitution.
    for i in (0..n).rev() {
        let mut acc = b[i];
        for j in i + 1..n {
            acc -= m[(i, j)] * b[j];
        }
        b[i] = acc / m[(i, i)];
    }
    Some(b)
}

/// Evaluates C (e^{j psi} I - A)^{-1} B + D.
pub fn freq_response(sys: &StateSpace, psi: f64) -> Result<DMatrix<Complex64>> {
    FreqSweep::new(sys).eval(psi)
}

/// Maximum absolute value of the eigenvalues of a real square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            context: "spectral_radius",
            expected: "square matrix".into(),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    // Triangular matrices (including zero and nilpotent ones) defeat the QR
    // iteration's convergence test; their spectrum is the diagonal.
    let lower_zero = (0..m.ncols()).all(|j| (j + 1..m.nrows()).all(|i| m[(i, j)] == 0.0));
    let upper_zero = (0..m.ncols()).all(|j| (0..j.min(m.nrows())).all(|i| m[(i, j)] == 0.0));
    if lower_zero || upper_zero {
        return Ok(m.diagonal().iter().fold(0.0, |acc, d| d.abs().max(acc)));
    }
    // A bounded iteration count with a fallback tolerance: the unbounded
    // QR iteration can fail to terminate at machine epsilon.
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .or_else(|| nalgebra::linalg::Schur::try_new(m.clone(), 1e-12, 10_000))
        .ok_or(Error::EigenFailure)?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|e| e.norm())
        .fold(0.0, f64::max))
}

/// Smallest eigenvalue of a (numerically) Hermitian complex matrix.
///
/// The input is symmetrized as (X + X^H)/2 before the decomposition; an
/// asymmetry beyond `1e-8 * ||X||` signals an upstream construction bug.
pub fn hermitian_min_eig(x: &DMatrix<Complex64>) -> Result<f64> {
    if x.nrows() != x.ncols() {
        return Err(Error::DimensionMismatch {
            context: "hermitian_min_eig",
            expected: "square matrix".into(),
            got: format!("{}x{}", x.nrows(), x.ncols()),
        });
    }
    let xh = x.adjoint();
    let sym = (x + &xh) * Complex64::new(0.5, 0.0);
    let asym = (x - &xh).norm() * 0.5;
    let tolerance = 1e-8 * x.norm().max(f64::MIN_POSITIVE);
    if asym > tolerance {
        return Err(Error::NotHermitian {
            asymmetry: asym,
            tolerance,
        });
    }
    let eig = sym.symmetric_eigen();
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Numerical rank of the observability matrix [C; CA; ...; CA^{n-1}].
///
/// Counts singular values above `tol * sigma_max`.
pub fn observability_rank(a: &DMatrix<f64>, cobs: &DMatrix<f64>, tol: f64) -> Result<usize> {
    let n = a.nrows();
    if a.ncols() != n || cobs.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "observability_rank",
            expected: format!("A {n}x{n}, Cobs px{n}"),
            got: format!(
                "A {}x{}, Cobs {}x{}",
                a.nrows(),
                a.ncols(),
                cobs.nrows(),
                cobs.ncols()
            ),
        });
    }
    if tol <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "observability rank tolerance must be positive, got {tol}"
        )));
    }
    let p = cobs.nrows();
    let mut stacked = DMatrix::<f64>::zeros(p * n, n);
    let mut block = cobs.clone();
    for i in 0..n {
        stacked.view_mut((i * p, 0), (p, n)).copy_from(&block);
        if i + 1 < n {
            block = &block * a;
        }
    }
    let sv = stacked.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > tol * smax).count())
}

/// Conventional default tolerance for [`observability_rank`]: 1e-9 times the
/// larger matrix dimension.
pub fn default_rank_tol(a: &DMatrix<f64>, cobs: &DMatrix<f64>) -> f64 {
    1e-9 * a.nrows().max(cobs.nrows()) as f64
}
