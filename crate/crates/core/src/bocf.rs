//! Block observable canonical form: builds a state-space realization of the
//! identified input-output model and reconstructs its state from measured
//! data.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dimensions of the identified model.
#[derive(Debug, Clone, Copy)]
pub struct ModelDims {
    /// Model order (number of lags).
    pub nhat: usize,
    /// Output dimension.
    pub p: usize,
    /// Input dimension.
    pub m: usize,
}

impl ModelDims {
    /// Length of the coefficient vector: nhat * p * (m + p).
    pub fn theta_len(&self) -> usize {
        self.nhat * self.p * (self.m + self.p)
    }

    /// Order of the realization: nhat * p.
    pub fn state_dim(&self) -> usize {
        self.nhat * self.p
    }
}

/// Output-coefficient block F_i (p x p) extracted from theta. The coefficient
/// layout matches the regressor `[-y' ... u' ...] (x) I_p`: entry (r, c) of
/// F_i sits at theta[((i-1)p + c) p + r].
fn f_block(theta: &DVector<f64>, dims: &ModelDims, i: usize) -> DMatrix<f64> {
    let p = dims.p;
    let mut f = DMatrix::<f64>::zeros(p, p);
    for c in 0..p {
        for r in 0..p {
            f[(r, c)] = theta[((i - 1) * p + c) * p + r];
        }
    }
    f
}

/// Input-coefficient block G_i (p x m) extracted from theta.
fn g_block(theta: &DVector<f64>, dims: &ModelDims, i: usize) -> DMatrix<f64> {
    let (p, m) = (dims.p, dims.m);
    let off = dims.nhat * p;
    let mut g = DMatrix::<f64>::zeros(p, m);
    for c in 0..m {
        for r in 0..p {
            g[(r, c)] = theta[(off + (i - 1) * m + c) * p + r];
        }
    }
    g
}

/// Assembles the block observable canonical realization (A_m, B_m, C_m)
/// from the coefficient vector: the first block column of A_m stacks -F_i,
/// the block superdiagonal is identity, B_m stacks G_i, and
/// C_m = [I_p 0 ... 0].
pub fn assemble_model(
    theta: &DVector<f64>,
    dims: &ModelDims,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    if theta.len() != dims.theta_len() {
        return Err(Error::DimensionMismatch {
            context: "assemble_model",
            expected: format!("theta length {}", dims.theta_len()),
            got: format!("{}", theta.len()),
        });
    }
    let (nhat, p, m) = (dims.nhat, dims.p, dims.m);
    let n = dims.state_dim();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DMatrix::<f64>::zeros(n, m);
    for i in 1..=nhat {
        let fi = f_block(theta, dims, i);
        let gi = g_block(theta, dims, i);
        a.view_mut(((i - 1) * p, 0), (p, p)).copy_from(&(-fi));
        if i < nhat {
            a.view_mut(((i - 1) * p, i * p), (p, p))
                .copy_from(&DMatrix::identity(p, p));
        }
        b.view_mut(((i - 1) * p, 0), (p, m)).copy_from(&gi);
    }
    let mut c = DMatrix::<f64>::zeros(p, n);
    c.view_mut((0, 0), (p, p))
        .copy_from(&DMatrix::identity(p, p));
    Ok((a, b, c))
}

/// Reconstructs the realization state x_{m,k} from measured data: block 1 is
/// y_k exactly, and block j (j >= 2) is
/// `sum_{i=1}^{nhat-j+1} (-F_{i+j-1} y_{k-i} + G_{i+j-1} u_{k-i})`.
///
/// `y` is the current output y_k; `y_past[i-1]` = y_{k-i} and
/// `u_past[i-1]` = u_{k-i}, each zero-padded implicitly if shorter than nhat.
pub fn assemble_state(
    theta: &DVector<f64>,
    dims: &ModelDims,
    y: &DVector<f64>,
    y_past: &[DVector<f64>],
    u_past: &[DVector<f64>],
) -> Result<DVector<f64>> {
    if theta.len() != dims.theta_len() || y.len() != dims.p {
        return Err(Error::DimensionMismatch {
            context: "assemble_state",
            expected: format!("theta length {}, y length {}", dims.theta_len(), dims.p),
            got: format!("{} and {}", theta.len(), y.len()),
        });
    }
    let (nhat, p) = (dims.nhat, dims.p);
    let mut x = DVector::<f64>::zeros(dims.state_dim());
    x.rows_mut(0, p).copy_from(y);
    for j in 2..=nhat {
        let mut block = DVector::<f64>::zeros(p);
        for i in 1..=(nhat - j + 1) {
            let idx = i + j - 1;
            if let Some(yi) = y_past.get(i - 1) {
                block -= f_block(theta, dims, idx) * yi;
            }
            if let Some(ui) = u_past.get(i - 1) {
                block += g_block(theta, dims, idx) * ui;
            }
        }
        x.rows_mut((j - 1) * p, p).copy_from(&block);
    }
    Ok(x)
}

/// First `count` Markov parameters H_1, ..., H_count of a strictly proper
/// realization: H_j = C A^{j-1} B.
pub fn markov_parameters(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    count: usize,
) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut akb = b.clone();
    for _ in 0..count {
        out.push(c * &akb);
        akb = a * akb;
    }
    out
}
