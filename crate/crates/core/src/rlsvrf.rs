//! Recursive least squares with variable-rate forgetting driven by an F-test
//! on short- versus long-window identification-error statistics.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fdist::f_quantile;

/// Hyperparameters of the identifier.
#[derive(Debug, Clone)]
pub struct RlsConfig {
    /// Model order n̂.
    pub nhat: usize,
    /// Output dimension p.
    pub p: usize,
    /// Input dimension m.
    pub m: usize,
    /// Initial coefficient vector, length n̂·p·(m+p).
    pub theta0: DVector<f64>,
    /// Initial covariance, positive definite, n̂·p·(m+p) square.
    pub psi0: DMatrix<f64>,
    /// Short window length.
    pub tau_n: usize,
    /// Long window length.
    pub tau_d: usize,
    /// Forgetting intensity.
    pub eta: f64,
    /// Significance level of the F-test.
    pub alpha: f64,
    f_crit: f64,
}

impl RlsConfig {
    pub fn new(
        nhat: usize,
        p: usize,
        m: usize,
        theta0: DVector<f64>,
        psi0: DMatrix<f64>,
        tau_n: usize,
        tau_d: usize,
        eta: f64,
        alpha: f64,
    ) -> Result<Self> {
        let dim = nhat * p * (m + p);
        if theta0.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "RlsConfig::new",
                expected: format!("theta0 length {dim}"),
                got: format!("{}", theta0.len()),
            });
        }
        if psi0.nrows() != dim || psi0.ncols() != dim {
            return Err(Error::DimensionMismatch {
                context: "RlsConfig::new",
                expected: format!("psi0 {dim}x{dim}"),
                got: format!("{}x{}", psi0.nrows(), psi0.ncols()),
            });
        }
        if !(p <= tau_n && tau_n < tau_d) {
            return Err(Error::InvalidConfig(format!(
                "windows must satisfy p <= tau_n < tau_d, got p = {p}, tau_n = {tau_n}, tau_d = {tau_d}"
            )));
        }
        if eta <= 0.0 || !(0.0 < alpha && alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "need eta > 0 and alpha in (0, 1], got eta = {eta}, alpha = {alpha}"
            )));
        }
        let f_crit = f_quantile(1.0 - alpha, tau_n as f64, tau_d as f64)?;
        Ok(Self {
            nhat,
            p,
            m,
            theta0,
            psi0,
            tau_n,
            tau_d,
            eta,
            alpha,
            f_crit,
        })
    }

    /// Coefficient-vector dimension n̂·p·(m+p).
    pub fn dim(&self) -> usize {
        self.nhat * self.p * (self.m + self.p)
    }

    /// Critical value of the F(tau_n, tau_d) distribution at 1 - alpha.
    pub fn f_crit(&self) -> f64 {
        self.f_crit
    }
}

/// Mutable identifier state: coefficients, covariance, and the bounded
/// history needed by the regressor and the forgetting statistic.
#[derive(Debug, Clone)]
pub struct RlsState {
    theta: DVector<f64>,
    psi: DMatrix<f64>,
    /// Front = most recent past output y_{k-1}.
    y_hist: VecDeque<DVector<f64>>,
    /// Front = most recent past input u_{k-1}.
    u_hist: VecDeque<DVector<f64>>,
    /// Squared identification errors e_i' e_i, oldest first, capacity tau_d.
    err_sq: VecDeque<f64>,
    k: usize,
}

impl RlsState {
    pub fn new(cfg: &RlsConfig) -> Self {
        Self {
            theta: cfg.theta0.clone(),
            psi: cfg.psi0.clone(),
            y_hist: VecDeque::with_capacity(cfg.nhat),
            u_hist: VecDeque::with_capacity(cfg.nhat),
            err_sq: VecDeque::with_capacity(cfg.tau_d),
            k: 0,
        }
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    pub fn step(&self) -> usize {
        self.k
    }

    /// Past outputs y_{k-1}, ..., y_{k-j} (most recent first).
    pub fn past_outputs(&self) -> impl Iterator<Item = &DVector<f64>> {
        self.y_hist.iter()
    }

    /// Past inputs u_{k-1}, ..., u_{k-j} (most recent first).
    pub fn past_inputs(&self) -> impl Iterator<Item = &DVector<f64>> {
        self.u_hist.iter()
    }
}

/// Builds the regressor matrix
/// `phi_k = [-y_{k-1}' ... -y_{k-nhat}' u_{k-1}' ... u_{k-nhat}'] (x) I_p`
/// from the buffered history, zero-padded before step 0.
pub fn regressor(state: &RlsState, cfg: &RlsConfig) -> DMatrix<f64> {
    let row_len = cfg.nhat * (cfg.p + cfg.m);
    let mut row = DVector::<f64>::zeros(row_len);
    for (i, y) in state.y_hist.iter().take(cfg.nhat).enumerate() {
        for c in 0..cfg.p {
            row[i * cfg.p + c] = -y[c];
        }
    }
    let off = cfg.nhat * cfg.p;
    for (i, u) in state.u_hist.iter().take(cfg.nhat).enumerate() {
        for c in 0..cfg.m {
            row[off + i * cfg.m + c] = u[c];
        }
    }
    // Kronecker product row (x) I_p.
    let mut phi = DMatrix::<f64>::zeros(cfg.p, row_len * cfg.p);
    for j in 0..row_len {
        for r in 0..cfg.p {
            phi[(r, j * cfg.p + r)] = row[j];
        }
    }
    phi
}

/// Forgetting factor beta_j >= 1 from the error history.
///
/// Returns 1 for `j < tau_d`; otherwise `1 + eta * max(g, 0)` with
/// `g = F_hat / F_crit - 1`, where `F_hat` is the ratio of the mean squared
/// error over the most recent `tau_n` steps to the mean over the most recent
/// `tau_d` steps. A long-window energy at the machine floor degenerates to
/// beta = 1.
pub fn vrf_beta(err_sq: &VecDeque<f64>, cfg: &RlsConfig, j: usize) -> Result<f64> {
    if cfg.p != 1 {
        return Err(Error::UnsupportedDimension {
            context: "vrf_beta",
            detail: format!("F-test forgetting implemented for p = 1, got p = {}", cfg.p),
        });
    }
    if j < cfg.tau_d || err_sq.len() < cfg.tau_d {
        return Ok(1.0);
    }
    let n = err_sq.len();
    let long: f64 = err_sq.iter().skip(n - cfg.tau_d).sum::<f64>() / cfg.tau_d as f64;
    if long < 1e-300 {
        // Degenerate variance: no evidence for forgetting.
        return Ok(1.0);
    }
    let short: f64 = err_sq.iter().skip(n - cfg.tau_n).sum::<f64>() / cfg.tau_n as f64;
    let f_hat = short / long;
    let g = f_hat / cfg.f_crit() - 1.0;
    Ok(1.0 + cfg.eta * g.max(0.0))
}

/// Outcome of one identifier step.
#[derive(Debug, Clone)]
pub struct RlsStepInfo {
    /// Identification error e_k(theta_k) = y_k - phi_k theta_k.
    pub error: DVector<f64>,
    /// Forgetting factor beta_k applied at this step.
    pub beta: f64,
    /// Whether theta and Psi were updated (false during a frozen warm-up).
    pub adapted: bool,
}

fn step_inner(
    state: &mut RlsState,
    y: &DVector<f64>,
    u_prev: &DVector<f64>,
    cfg: &RlsConfig,
    adapt: bool,
) -> Result<RlsStepInfo> {
    if y.len() != cfg.p || u_prev.len() != cfg.m {
        return Err(Error::DimensionMismatch {
            context: "rls_update",
            expected: format!("y len {}, u len {}", cfg.p, cfg.m),
            got: format!("y len {}, u len {}", y.len(), u_prev.len()),
        });
    }
    let phi = regressor(state, cfg);
    let e = y - &phi * &state.theta;

    // The forgetting window includes the current error.
    if state.err_sq.len() == cfg.tau_d {
        state.err_sq.pop_front();
    }
    state.err_sq.push_back(e.norm_squared());
    let beta = vrf_beta(&state.err_sq, cfg, state.k)?;

    if adapt {
        // Psi_{k+1} = beta Psi - beta Psi phi' (I/beta + phi Psi phi')^{-1} phi Psi.
        let psi_phit = &state.psi * phi.transpose();
        let inner = DMatrix::<f64>::identity(cfg.p, cfg.p) / beta + &phi * &psi_phit;
        let lu = inner.lu();
        let solved = lu
            .solve(&psi_phit.transpose())
            .ok_or(Error::InnovationSolveFailure)?;
        let mut psi_next = (&state.psi - &psi_phit * solved) * beta;
        // Enforce symmetry against roundoff.
        psi_next = (&psi_next + psi_next.transpose()) * 0.5;
        state.theta += &psi_next * phi.transpose() * &e;
        state.psi = psi_next;
    }

    // Advance the regressor history: y_k, u_k become y_{k-1}, u_{k-1}.
    if state.y_hist.len() == cfg.nhat {
        state.y_hist.pop_back();
    }
    state.y_hist.push_front(y.clone());
    if state.u_hist.len() == cfg.nhat {
        state.u_hist.pop_back();
    }
    state.u_hist.push_front(u_prev.clone());
    state.k += 1;

    Ok(RlsStepInfo {
        error: e,
        beta,
        adapted: adapt,
    })
}

/// One full identifier step: regressor, forgetting factor, covariance and
/// coefficient update, history advance.
pub fn rls_update(
    state: &mut RlsState,
    y: &DVector<f64>,
    u_prev: &DVector<f64>,
    cfg: &RlsConfig,
) -> Result<RlsStepInfo> {
    step_inner(state, y, u_prev, cfg, true)
}

/// Records the measurement and advances the history without adapting theta
/// or Psi (used while identification is frozen during warm-up).
pub fn rls_observe(
    state: &mut RlsState,
    y: &DVector<f64>,
    u_prev: &DVector<f64>,
    cfg: &RlsConfig,
) -> Result<RlsStepInfo> {
    step_inner(state, y, u_prev, cfg, false)
}

/// Direct minimizer of the cumulative regularized cost after steps
/// 0..=k: weighted normal equations with per-step weights
/// `w_i = prod_{j=i+1..k} lambda_j` and prior weight `prod_{j=0..k} lambda_j`,
/// where `lambda_j = 1/beta_j`.
///
/// `ys[i]`/`us[i]` are the output measured and input applied at step i;
/// `betas[i]` is the forgetting factor used at step i.
pub fn batch_oracle(
    cfg: &RlsConfig,
    ys: &[DVector<f64>],
    us: &[DVector<f64>],
    betas: &[f64],
) -> Result<DVector<f64>> {
    let k = ys.len();
    if us.len() != k || betas.len() != k {
        return Err(Error::DimensionMismatch {
            context: "batch_oracle",
            expected: format!("{k} inputs and betas"),
            got: format!("{} inputs, {} betas", us.len(), betas.len()),
        });
    }
    let dim = cfg.dim();
    // Suffix products of lambda give the data weights.
    let lambdas: Vec<f64> = betas.iter().map(|b| 1.0 / b).collect();
    let mut weights = vec![0.0; k];
    let mut acc = 1.0;
    for i in (0..k).rev() {
        weights[i] = acc;
        acc *= lambdas[i];
    }
    let prior_weight = acc; // prod over all steps

    let psi0_inv = cfg
        .psi0
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::SingularNormalEquations)?;
    let mut lhs = &psi0_inv * prior_weight;
    let mut rhs = &psi0_inv * &cfg.theta0 * prior_weight;

    // Rebuild each regressor from the raw sequences with zero padding.
    for i in 0..k {
        let row_len = cfg.nhat * (cfg.p + cfg.m);
        let mut row = DVector::<f64>::zeros(row_len);
        for lag in 1..=cfg.nhat {
            if i >= lag {
                let y = &ys[i - lag];
                for c in 0..cfg.p {
                    row[(lag - 1) * cfg.p + c] = -y[c];
                }
                let u = &us[i - lag];
                for c in 0..cfg.m {
                    row[cfg.nhat * cfg.p + (lag - 1) * cfg.m + c] = u[c];
                }
            }
        }
        let mut phi = DMatrix::<f64>::zeros(cfg.p, dim);
        for j in 0..row_len {
            for r in 0..cfg.p {
                phi[(r, j * cfg.p + r)] = row[j];
            }
        }
        lhs += phi.transpose() * &phi * weights[i];
        rhs += phi.transpose() * &ys[i] * weights[i];
    }
    lhs.lu().solve(&rhs).ok_or(Error::SingularNormalEquations)
}
