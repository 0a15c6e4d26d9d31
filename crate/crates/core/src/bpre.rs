//! Backward-propagating Riccati equation: the receding-horizon state-feedback
//! gain applied to the identified realization at every step.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Weights and horizon of the receding-horizon regulator.
#[derive(Debug, Clone)]
pub struct BpreConfig {
    /// Horizon length (number of predicted steps), at least 2.
    pub ell: usize,
    /// Terminal cost weight, n x n positive semidefinite.
    pub pterm: DMatrix<f64>,
    /// State weight, n x n positive semidefinite.
    pub r1: DMatrix<f64>,
    /// Control weight, m x m positive definite.
    pub r2: DMatrix<f64>,
}

impl BpreConfig {
    pub fn new(ell: usize, pterm: DMatrix<f64>, r1: DMatrix<f64>, r2: DMatrix<f64>) -> Result<Self> {
        if ell < 2 {
            return Err(Error::InvalidConfig(format!(
                "Riccati horizon must be at least 2, got {ell}"
            )));
        }
        if pterm.nrows() != pterm.ncols()
            || r1.shape() != pterm.shape()
            || r2.nrows() != r2.ncols()
        {
            return Err(Error::InvalidConfig(
                "Riccati weights must be square with matching state dimensions".into(),
            ));
        }
        Ok(Self { ell, pterm, r1, r2 })
    }
}

/// Runs the backward Riccati recursion over the horizon and returns the
/// receding-horizon gain K, so that the applied control is u = K x.
///
/// Starting from P = Pterm, each of the ell - 1 backward sweeps computes
/// `Gamma = (R2 + B' P B)^{-1} B' P A` and
/// `P <- A' P (A - B Gamma) + R1` (symmetrized), and the gain is
/// `K = -(R2 + B' P B)^{-1} B' P A` from the final P.
pub fn bpre_gain(a: &DMatrix<f64>, b: &DMatrix<f64>, cfg: &BpreConfig) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || cfg.pterm.nrows() != n || cfg.r2.nrows() != m {
        return Err(Error::DimensionMismatch {
            context: "bpre_gain",
            expected: format!("A {n}x{n}, B {n}x{m}, Pterm {n}x{n}, R2 {m}x{m}"),
            got: format!(
                "A {}x{}, B {}x{}, Pterm {}x{}, R2 {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                cfg.pterm.nrows(),
                cfg.pterm.ncols(),
                cfg.r2.nrows(),
                cfg.r2.ncols()
            ),
        });
    }
    let mut p = cfg.pterm.clone();
    for _ in 0..cfg.ell - 1 {
        let btp = b.transpose() * &p;
        let inner = &cfg.r2 + &btp * b;
        let gamma = inner
            .clone()
            .lu()
            .solve(&(&btp * a))
            .ok_or(Error::InnerSolveSingular)?;
        p = a.transpose() * &p * (a - b * &gamma) + &cfg.r1;
        p = (&p + p.transpose()) * 0.5;
    }
    let btp = b.transpose() * &p;
    let inner = &cfg.r2 + &btp * b;
    let k = inner
        .lu()
        .solve(&(&btp * a))
        .ok_or(Error::InnerSolveSingular)?;
    Ok(-k)
}

/// Dense oracle for the same finite-horizon problem: minimizes
/// `sum_{i=0}^{ell-1} u_i' R2 u_i + sum_{i=1}^{ell-1} x_i' R1 x_i
///  + x_ell' Pterm x_ell`
/// over the stacked control sequence by solving one block least-squares
/// system, and returns the map from x_0 to the optimal first control u_0.
pub fn oracle_lqr_gain(a: &DMatrix<f64>, b: &DMatrix<f64>, cfg: &BpreConfig) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let m = b.ncols();
    let ell = cfg.ell;

    // Prediction matrices: x_stack = phi x0 + gamma u_stack over i = 1..ell.
    let mut phi = DMatrix::<f64>::zeros(ell * n, n);
    let mut apow = a.clone();
    for i in 0..ell {
        phi.view_mut((i * n, 0), (n, n)).copy_from(&apow);
        apow = a * apow;
    }
    let mut gamma = DMatrix::<f64>::zeros(ell * n, ell * m);
    for i in 0..ell {
        // Block row i holds A^{i-j} B for j <= i.
        let mut blk = b.clone();
        for j in (0..=i).rev() {
            gamma.view_mut((i * n, j * m), (n, m)).copy_from(&blk);
            blk = a * blk;
        }
    }

    // Block-diagonal state weight: R1 on steps 1..ell-1, Pterm at step ell.
    let mut qbar = DMatrix::<f64>::zeros(ell * n, ell * n);
    for i in 0..ell - 1 {
        qbar.view_mut((i * n, i * n), (n, n)).copy_from(&cfg.r1);
    }
    qbar.view_mut(((ell - 1) * n, (ell - 1) * n), (n, n))
        .copy_from(&cfg.pterm);
    let mut rbar = DMatrix::<f64>::zeros(ell * m, ell * m);
    for i in 0..ell {
        rbar.view_mut((i * m, i * m), (m, m)).copy_from(&cfg.r2);
    }

    // Normal equations: (Rbar + gamma' Qbar gamma) U = -gamma' Qbar phi x0.
    let lhs = rbar + gamma.transpose() * &qbar * &gamma;
    let rhs = gamma.transpose() * &qbar * &phi;
    let u_map = lhs
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularNormalEquations)?;
    Ok(-u_map.view((0, 0), (m, n)).clone_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_unit_problem_gives_known_gain() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let cfg = BpreConfig::new(2, one.clone(), one.clone(), one.clone()).unwrap();
        let k = bpre_gain(&one, &one, &cfg).unwrap();
        assert_relative_eq!(k[(0, 0)], -0.6, epsilon = 1e-12);
        let k_oracle = oracle_lqr_gain(&one, &one, &cfg).unwrap();
        assert_relative_eq!(k_oracle[(0, 0)], -0.6, epsilon = 1e-12);
    }

    #[test]
    fn recursion_matches_dense_oracle_on_random_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.gen_range(2..5usize);
            let m = rng.gen_range(1..3usize);
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let b = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
            let ell = rng.gen_range(2..8usize);
            // Random PSD weights plus a small ridge on R2.
            let q = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let r1 = &q * q.transpose();
            let qt = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let pterm = &qt * qt.transpose();
            let rm = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
            let r2 = &rm * rm.transpose() + DMatrix::identity(m, m) * 0.1;
            let cfg = BpreConfig::new(ell, pterm, r1, r2).unwrap();
            let k = bpre_gain(&a, &b, &cfg).unwrap();
            let k_oracle = oracle_lqr_gain(&a, &b, &cfg).unwrap();
            let rel = (&k - &k_oracle).norm() / k_oracle.norm().max(1e-12);
            assert!(rel < 1e-8, "gain mismatch {rel}");
        }
    }

    #[test]
    fn long_horizon_stabilizes_unstable_pair() {
        // Double integrator-like unstable system; the receding-horizon gain
        // with a long horizon should place the closed loop inside the disk.
        let a = DMatrix::from_row_slice(2, 2, &[1.2, 1.0, 0.0, 1.1]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let eye = DMatrix::identity(2, 2);
        let cfg = BpreConfig::new(
            50,
            eye.clone(),
            eye.clone(),
            DMatrix::from_element(1, 1, 0.1),
        )
        .unwrap();
        let k = bpre_gain(&a, &b, &cfg).unwrap();
        let acl = &a + &b * &k;
        let spr = crate::sslin::spectral_radius(&acl).unwrap();
        assert!(spr < 1.0, "closed-loop spectral radius {spr}");
    }

    #[test]
    fn rejects_short_horizon() {
        let one = DMatrix::from_element(1, 1, 1.0);
        assert!(BpreConfig::new(1, one.clone(), one.clone(), one).is_err());
    }
}
