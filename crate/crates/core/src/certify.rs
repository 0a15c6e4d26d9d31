//! Instantaneous absolute-stability certificates for a closed-loop
//! realization: the discrete-time circle criterion and the Tsypkin
//! criterion, each evaluated by a spectral-radius test plus a frequency-domain
//! positivity sweep.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lure::SectorBound;
use crate::sslin::{
    default_rank_tol, hermitian_min_eig, observability_rank, spectral_radius, FreqSweep,
    FrequencyGrid, StateSpace,
};

/// Circle-criterion verdict for one realization.
#[derive(Debug, Clone)]
pub struct CircleReport {
    /// Spectral radius of the loop-transformed dynamics matrix.
    pub alpha_cc: f64,
    /// Minimum over frequency of the smallest eigenvalue of H + H*.
    pub beta_cc: f64,
    /// Frequency attaining the reported minimum.
    pub argmin_psi: f64,
    pub cc1_pass: bool,
    pub cc2_pass: bool,
    /// True when a near-singular resolvent forced a -inf contribution.
    pub flagged: bool,
}

impl CircleReport {
    /// Both conditions hold.
    pub fn passes(&self) -> bool {
        self.cc1_pass && self.cc2_pass
    }
}

/// Tsypkin-criterion verdict for one realization.
#[derive(Debug, Clone)]
pub struct TsypkinReport {
    /// det of the dc-coupling matrix C A^{-1} B.
    pub zeta1: f64,
    /// Observability rank of the modified output map.
    pub zeta2: usize,
    /// Smallest eigenvalue of M^{-1} + M^{-T}.
    pub zeta3_min_eig: f64,
    /// Spectral radius of the augmented realization.
    pub alpha_tc: f64,
    /// Minimum over frequency of the smallest eigenvalue of L + L*.
    pub beta_tc: f64,
    /// Frequency attaining the reported minimum.
    pub argmin_psi: f64,
    pub tc1_pass: bool,
    pub tc2_pass: bool,
    pub tc3_pass: bool,
    /// Multiplier diagonal used in the evaluation.
    pub n_used: DMatrix<f64>,
    /// True when the dynamics matrix was singular or a sweep point failed.
    pub flagged: bool,
}

impl TsypkinReport {
    /// All three conditions hold.
    pub fn passes(&self) -> bool {
        self.tc1_pass && self.tc2_pass && self.tc3_pass
    }
}

const GOLDEN_ITERS: usize = 30;

/// Grid sweep of a real-valued frequency function followed by a
/// golden-section refinement around the grid argmin. `eval` returns `None`
/// where the resolvent is numerically singular; such a point contributes
/// -inf and flags the result.
fn sweep_min<F>(grid: &FrequencyGrid, eval: F) -> (f64, f64, bool)
where
    F: Fn(f64) -> Option<f64>,
{
    let pts = grid.points();
    let mut best = f64::INFINITY;
    let mut best_idx = 0usize;
    let mut flagged = false;
    for (i, &psi) in pts.iter().enumerate() {
        match eval(psi) {
            Some(v) => {
                if v < best {
                    best = v;
                    best_idx = i;
                }
            }
            None => {
                flagged = true;
                if f64::NEG_INFINITY < best {
                    best = f64::NEG_INFINITY;
                    best_idx = i;
                }
            }
        }
    }
    if !best.is_finite() {
        return (best, pts[best_idx], flagged);
    }
    // Refine inside the bracket formed by the neighbors of the argmin.
    let lo = pts[best_idx.saturating_sub(1)];
    let hi = pts[(best_idx + 1).min(pts.len() - 1)];
    let mut best_psi = pts[best_idx];
    if hi > lo {
        let invphi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (lo, hi);
        let mut x1 = b - invphi * (b - a);
        let mut x2 = a + invphi * (b - a);
        let mut f1 = eval(x1);
        let mut f2 = eval(x2);
        for _ in 0..GOLDEN_ITERS {
            let (v1, v2) = match (f1, f2) {
                (Some(v1), Some(v2)) => (v1, v2),
                _ => {
                    flagged = true;
                    return (f64::NEG_INFINITY, best_psi, flagged);
                }
            };
            if v1 < best {
                best = v1;
                best_psi = x1;
            }
            if v2 < best {
                best = v2;
                best_psi = x2;
            }
            if v1 < v2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - invphi * (b - a);
                f1 = eval(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + invphi * (b - a);
                f2 = eval(x2);
            }
        }
    }
    (best, best_psi, flagged)
}

fn validate_square_nonlinearity(sys: &StateSpace, rows: usize, context: &'static str) -> Result<()> {
    if !sys.is_strictly_proper() {
        return Err(Error::InvalidConfig(format!(
            "{context}: realization must be strictly proper"
        )));
    }
    if sys.outputs() != sys.inputs() || rows != sys.inputs() {
        return Err(Error::DimensionMismatch {
            context: "certificate evaluation",
            expected: format!("square {0}x{0} loop matching the multiplier", sys.inputs()),
            got: format!(
                "sys {}x{}, multiplier {rows}x{rows}",
                sys.outputs(),
                sys.inputs()
            ),
        });
    }
    Ok(())
}

/// Pointwise value of the circle positivity function at one frequency, for
/// the multivariable case: lambda_min(H + H*) with
/// H = I + (M1 - M2) G (I - M1 G)^{-1}.
fn circle_value_mimo(
    g: &DMatrix<Complex64>,
    m1: &DMatrix<f64>,
    m2: &DMatrix<f64>,
) -> Option<f64> {
    let mm = g.nrows();
    let m1c = m1.map(|x| Complex64::new(x, 0.0));
    let m2c = m2.map(|x| Complex64::new(x, 0.0));
    let inner = DMatrix::<Complex64>::identity(mm, mm) - &m1c * g;
    let solved = inner.lu().solve(&g.clone())?;
    let h = DMatrix::<Complex64>::identity(mm, mm) + (&m1c - &m2c) * solved;
    let sym = &h + h.adjoint();
    hermitian_min_eig(&sym).ok()
}

/// Pointwise value of the Tsypkin positivity function at one frequency:
/// lambda_min(L + L*) with L = M^{-1} - (I + (1 - e^{-j psi}) N) G.
fn tsypkin_value_mimo(
    g: &DMatrix<Complex64>,
    m_inv: &DMatrix<f64>,
    n: &DMatrix<f64>,
    psi: f64,
) -> Option<f64> {
    let mm = g.nrows();
    let w = Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -psi);
    let mult = DMatrix::<Complex64>::identity(mm, mm) + n.map(|x| Complex64::new(x, 0.0)) * w;
    let l = m_inv.map(|x| Complex64::new(x, 0.0)) - mult * g;
    let sym = &l + l.adjoint();
    hermitian_min_eig(&sym).ok()
}

fn circle_report(alpha_cc: f64, beta: (f64, f64, bool), margin: f64) -> CircleReport {
    let (beta_cc, argmin_psi, flagged) = beta;
    CircleReport {
        alpha_cc,
        beta_cc,
        argmin_psi,
        cc1_pass: alpha_cc < 1.0 - margin,
        cc2_pass: beta_cc > margin,
        flagged,
    }
}

/// Evaluates the circle criterion on a strictly proper realization against a
/// sector bound, with a pass margin `delta` (alpha < 1 - delta,
/// beta > delta).
pub fn circle_certificate_with_margin(
    sys: &StateSpace,
    bound: &SectorBound,
    grid: &FrequencyGrid,
    delta: f64,
) -> Result<CircleReport> {
    validate_square_nonlinearity(sys, bound.m1().nrows(), "circle_certificate")?;
    let a_h = sys.a() + sys.b() * bound.m1() * sys.c();
    let alpha_cc = spectral_radius(&a_h)?;
    let sweep = FreqSweep::new(sys);
    let siso = sys.inputs() == 1;
    let (m1s, m2s) = (bound.m1()[(0, 0)], bound.m2()[(0, 0)]);
    let beta = sweep_min(grid, |psi| {
        if siso {
            let g = sweep.eval_scalar(psi).ok()?;
            let denom = Complex64::new(1.0, 0.0) - m1s * g;
            if denom.norm() < 1e-14 * (1.0 + g.norm()) {
                return None;
            }
            let h = (Complex64::new(1.0, 0.0) - m2s * g) / denom;
            Some(2.0 * h.re)
        } else {
            let g = sweep.eval(psi).ok()?;
            circle_value_mimo(&g, bound.m1(), bound.m2())
        }
    });
    Ok(circle_report(alpha_cc, beta, delta))
}

/// Circle criterion with the default zero margin.
pub fn circle_certificate(
    sys: &StateSpace,
    bound: &SectorBound,
    grid: &FrequencyGrid,
) -> Result<CircleReport> {
    circle_certificate_with_margin(sys, bound, grid, 0.0)
}

fn validate_multipliers(m: &DMatrix<f64>, n: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() || n.shape() != m.shape() {
        return Err(Error::InvalidConfig(
            "Tsypkin multipliers M and N must be square with matching size".into(),
        ));
    }
    for i in 0..n.nrows() {
        for j in 0..n.ncols() {
            if i == j {
                if n[(i, j)] <= 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "N must have positive diagonal entries, got N[{i},{i}] = {}",
                        n[(i, j)]
                    )));
                }
            } else if n[(i, j)] != 0.0 {
                return Err(Error::InvalidConfig(
                    "N must be diagonal".into(),
                ));
            }
        }
    }
    Ok(())
}

struct TsypkinStatics {
    zeta1: f64,
    zeta1_nonzero: bool,
    zeta2: usize,
    singular: bool,
}

/// zeta1 and zeta2, which both need the inverse of the dynamics matrix.
fn tsypkin_statics(sys: &StateSpace, n: &DMatrix<f64>) -> TsypkinStatics {
    let a_inv = match sys.a().clone().lu().try_inverse() {
        Some(inv) => inv,
        None => {
            return TsypkinStatics {
                zeta1: 0.0,
                zeta1_nonzero: false,
                zeta2: 0,
                singular: true,
            }
        }
    };
    let coupling = sys.c() * &a_inv * sys.b();
    let zeta1 = coupling.determinant();
    // Scale-aware nonzero test: the determinant of an m x m product scales
    // like (|C||B| / sigma_min(A))^m.
    let sigma_min = sys
        .a()
        .clone()
        .singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        .max(f64::MIN_POSITIVE);
    let scale = (sys.c().norm() * sys.b().norm() / sigma_min).powi(sys.inputs() as i32);
    let zeta1_nonzero = zeta1.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE);

    let cobs = sys.c() + n * sys.c() - n * sys.c() * &a_inv;
    let tol = default_rank_tol(sys.a(), &cobs);
    let zeta2 = observability_rank(sys.a(), &cobs, tol).unwrap_or(0);
    TsypkinStatics {
        zeta1,
        zeta1_nonzero,
        zeta2,
        singular: false,
    }
}

fn zeta3_min_eig(m: &DMatrix<f64>) -> Result<f64> {
    let m_inv = m
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::InvalidConfig("Tsypkin M must be invertible".into()))?;
    let sym = &m_inv + m_inv.transpose();
    Ok(sym
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min))
}

/// Evaluates the Tsypkin criterion on a strictly proper realization with
/// multipliers M (positive definite) and N (positive diagonal), with pass
/// margin `delta`.
pub fn tsypkin_certificate_with_margin(
    sys: &StateSpace,
    m: &DMatrix<f64>,
    n: &DMatrix<f64>,
    grid: &FrequencyGrid,
    delta: f64,
) -> Result<TsypkinReport> {
    validate_square_nonlinearity(sys, m.nrows(), "tsypkin_certificate")?;
    validate_multipliers(m, n)?;
    let statics = tsypkin_statics(sys, n);
    let z3 = zeta3_min_eig(m)?;
    // The augmented realization [[A, 0], [C, 0]] is block lower triangular,
    // so its spectrum is the spectrum of A plus a zero eigenvalue.
    let alpha_tc = spectral_radius(sys.a())?.max(0.0);

    let m_inv = m.clone().lu().try_inverse().unwrap();
    let sweep = FreqSweep::new(sys);
    let siso = sys.inputs() == 1;
    let (m_inv_s, n_s) = (m_inv[(0, 0)], n[(0, 0)]);
    let (beta_tc, argmin_psi, sweep_flagged) = sweep_min(grid, |psi| {
        if siso {
            let g = sweep.eval_scalar(psi).ok()?;
            let w = Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -psi);
            let l = Complex64::new(m_inv_s, 0.0) - (Complex64::new(1.0, 0.0) + w * n_s) * g;
            Some(2.0 * l.re)
        } else {
            let g = sweep.eval(psi).ok()?;
            tsypkin_value_mimo(&g, &m_inv, n, psi)
        }
    });

    let full = sys.order();
    Ok(TsypkinReport {
        zeta1: statics.zeta1,
        zeta2: statics.zeta2,
        zeta3_min_eig: z3,
        alpha_tc,
        beta_tc,
        argmin_psi,
        tc1_pass: statics.zeta1_nonzero && statics.zeta2 == full && z3 > 0.0,
        tc2_pass: alpha_tc < 1.0 - delta,
        tc3_pass: beta_tc > delta,
        n_used: n.clone(),
        flagged: statics.singular || sweep_flagged,
    })
}

/// Tsypkin criterion with the default zero margin.
pub fn tsypkin_certificate(
    sys: &StateSpace,
    m: &DMatrix<f64>,
    n: &DMatrix<f64>,
    grid: &FrequencyGrid,
) -> Result<TsypkinReport> {
    tsypkin_certificate_with_margin(sys, m, n, grid, 0.0)
}

/// Both certificates from a single frequency sweep. In the common scalar
/// case with M1 = 0 the loop transform is the identity, so one Hessenberg
/// sweep and one eigenvalue pass serve both criteria.
pub fn evaluate_certificates(
    sys: &StateSpace,
    bound: &SectorBound,
    m: &DMatrix<f64>,
    n: &DMatrix<f64>,
    grid: &FrequencyGrid,
) -> Result<(CircleReport, TsypkinReport)> {
    let siso = sys.inputs() == 1 && sys.outputs() == 1;
    if !(siso && bound.m1()[(0, 0)] == 0.0) {
        return Ok((
            circle_certificate(sys, bound, grid)?,
            tsypkin_certificate(sys, m, n, grid)?,
        ));
    }
    validate_square_nonlinearity(sys, m.nrows(), "evaluate_certificates")?;
    validate_multipliers(m, n)?;

    let spr_a = spectral_radius(sys.a())?;
    let statics = tsypkin_statics(sys, n);
    let z3 = zeta3_min_eig(m)?;
    let m_inv_s = 1.0 / m[(0, 0)];
    let n_s = n[(0, 0)];
    let m2s = bound.m2()[(0, 0)];

    let sweep = FreqSweep::new(sys);
    // One pass fills both grids of values; the refinement then reuses the
    // same evaluator per criterion.
    let circle_eval = |psi: f64| -> Option<f64> {
        let g = sweep.eval_scalar(psi).ok()?;
        Some(2.0 * (1.0 - m2s * g.re))
    };
    let tsypkin_eval = |psi: f64| -> Option<f64> {
        let g = sweep.eval_scalar(psi).ok()?;
        let w = Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -psi);
        let l = Complex64::new(m_inv_s, 0.0) - (Complex64::new(1.0, 0.0) + w * n_s) * g;
        Some(2.0 * l.re)
    };

    let pts = grid.points();
    let mut cc_best = (f64::INFINITY, 0usize);
    let mut tc_best = (f64::INFINITY, 0usize);
    let mut flagged = false;
    for (i, &psi) in pts.iter().enumerate() {
        match sweep.eval_scalar(psi) {
            Ok(g) => {
                let cc = 2.0 * (1.0 - m2s * g.re);
                let w = Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -psi);
                let l = Complex64::new(m_inv_s, 0.0) - (Complex64::new(1.0, 0.0) + w * n_s) * g;
                let tc = 2.0 * l.re;
                if cc < cc_best.0 {
                    cc_best = (cc, i);
                }
                if tc < tc_best.0 {
                    tc_best = (tc, i);
                }
            }
            Err(_) => {
                flagged = true;
                cc_best = (f64::NEG_INFINITY, i);
                tc_best = (f64::NEG_INFINITY, i);
            }
        }
    }
    let refine = |best: (f64, usize), eval: &dyn Fn(f64) -> Option<f64>| -> (f64, f64, bool) {
        if !best.0.is_finite() {
            return (best.0, pts[best.1], true);
        }
        let lo = pts[best.1.saturating_sub(1)];
        let hi = pts[(best.1 + 1).min(pts.len() - 1)];
        let mut value = best.0;
        let mut arg = pts[best.1];
        if hi > lo {
            let invphi = (5f64.sqrt() - 1.0) / 2.0;
            let (mut a, mut b) = (lo, hi);
            let mut x1 = b - invphi * (b - a);
            let mut x2 = a + invphi * (b - a);
            let mut f1 = eval(x1);
            let mut f2 = eval(x2);
            for _ in 0..GOLDEN_ITERS {
                let (v1, v2) = match (f1, f2) {
                    (Some(v1), Some(v2)) => (v1, v2),
                    _ => return (f64::NEG_INFINITY, arg, true),
                };
                if v1 < value {
                    value = v1;
                    arg = x1;
                }
                if v2 < value {
                    value = v2;
                    arg = x2;
                }
                if v1 < v2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - invphi * (b - a);
                    f1 = eval(x1);
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + invphi * (b - a);
                    f2 = eval(x2);
                }
            }
        }
        (value, arg, false)
    };
    let (cc_val, cc_arg, cc_flag) = refine(cc_best, &circle_eval);
    let (tc_val, tc_arg, tc_flag) = refine(tc_best, &tsypkin_eval);
    flagged |= cc_flag || tc_flag;

    let circle = circle_report(spr_a, (cc_val, cc_arg, flagged), 0.0);
    let full = sys.order();
    let tsypkin = TsypkinReport {
        zeta1: statics.zeta1,
        zeta2: statics.zeta2,
        zeta3_min_eig: z3,
        alpha_tc: spr_a.max(0.0),
        beta_tc: tc_val,
        argmin_psi: tc_arg,
        tc1_pass: statics.zeta1_nonzero && statics.zeta2 == full && z3 > 0.0,
        tc2_pass: spr_a.max(0.0) < 1.0,
        tc3_pass: tc_val > 0.0,
        n_used: n.clone(),
        flagged: statics.singular || flagged,
    };
    Ok((circle, tsypkin))
}

/// Evaluates both certificates on a sequence of realization snapshots.
/// Per-step failures are recorded in place and never abort the trace.
pub fn certificate_trace(
    systems: &[StateSpace],
    bound: &SectorBound,
    m: &DMatrix<f64>,
    n: &DMatrix<f64>,
    grid: &FrequencyGrid,
) -> Vec<Result<(CircleReport, TsypkinReport)>> {
    systems
        .iter()
        .map(|sys| evaluate_certificates(sys, bound, m, n, grid))
        .collect()
}

/// Scans a list of N values (scalar loops) and returns the one maximizing
/// the Tsypkin frequency margin, together with its report.
pub fn scan_tsypkin_n(
    sys: &StateSpace,
    m: &DMatrix<f64>,
    n_values: &[f64],
    grid: &FrequencyGrid,
) -> Result<(f64, TsypkinReport)> {
    let mut best: Option<(f64, TsypkinReport)> = None;
    for &nv in n_values {
        let n = DMatrix::from_element(1, 1, nv);
        let report = tsypkin_certificate(sys, m, &n, grid)?;
        if best.as_ref().map_or(true, |(_, b)| report.beta_tc > b.beta_tc) {
            best = Some((nv, report));
        }
    }
    best.ok_or_else(|| Error::InvalidConfig("empty N scan list".into()))
}
