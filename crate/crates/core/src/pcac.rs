//! Per-step predictive cost adaptive control: identification, realization,
//! receding-horizon gain, and the requested control, plus assembly of the
//! instantaneous controller and closed-loop realizations.

use nalgebra::{DMatrix, DVector};

use crate::bocf::{assemble_model, assemble_state, ModelDims};
use crate::bpre::{bpre_gain, BpreConfig};
use crate::error::{Error, Result};
use crate::rlsvrf::{rls_observe, rls_update, RlsConfig, RlsState};
use crate::sslin::StateSpace;

/// Full controller configuration.
#[derive(Debug, Clone)]
pub struct PcacConfig {
    pub rls: RlsConfig,
    pub bpre: BpreConfig,
    /// First step at which the computed control is applied; before it the
    /// requested control is zero while identification runs.
    pub kc: usize,
    /// First step at which the identifier adapts; before it measurements are
    /// buffered but theta and Psi stay at their priors.
    pub id_start: usize,
}

impl PcacConfig {
    pub fn new(rls: RlsConfig, bpre: BpreConfig, kc: usize, id_start: usize) -> Result<Self> {
        let n = rls.nhat * rls.p;
        if bpre.pterm.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "PcacConfig::new",
                expected: format!("Riccati weights of size {n}"),
                got: format!("{}", bpre.pterm.nrows()),
            });
        }
        Ok(Self {
            rls,
            bpre,
            kc,
            id_start,
        })
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            nhat: self.rls.nhat,
            p: self.rls.p,
            m: self.rls.m,
        }
    }
}

/// Identified-model realization in block observable canonical form.
#[derive(Debug, Clone)]
pub struct BocfModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl BocfModel {
    fn from_theta(theta: &DVector<f64>, dims: &ModelDims) -> Result<Self> {
        let (a, b, c) = assemble_model(theta, dims)?;
        Ok(Self { a, b, c })
    }

    /// Stacked coefficient column F = [-F_1' ... -F_nhat']' (the first block
    /// column of A_m), which doubles as the controller input matrix.
    pub fn f_stack(&self) -> DMatrix<f64> {
        let p = self.c.nrows();
        self.a.columns(0, p).clone_owned()
    }
}

/// Controller state between steps: everything computed at step k that shapes
/// the control applied at step k+1.
#[derive(Debug, Clone)]
pub struct PcacState {
    rls: RlsState,
    model: BocfModel,
    gain: DMatrix<f64>,
    x_m: DVector<f64>,
    u_next: DVector<f64>,
    k: usize,
}

impl PcacState {
    pub fn new(cfg: &PcacConfig) -> Result<Self> {
        let dims = cfg.dims();
        let model = BocfModel::from_theta(&cfg.rls.theta0, &dims)?;
        Ok(Self {
            rls: RlsState::new(&cfg.rls),
            model,
            gain: DMatrix::zeros(cfg.rls.m, dims.state_dim()),
            x_m: DVector::zeros(dims.state_dim()),
            u_next: DVector::zeros(cfg.rls.m),
            k: 0,
        })
    }

    pub fn rls(&self) -> &RlsState {
        &self.rls
    }

    /// Model computed at the most recent step.
    pub fn model(&self) -> &BocfModel {
        &self.model
    }

    /// Gain computed at the most recent step (the one shaping `u_next`).
    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    /// One-step-ahead model state the pending control acts on.
    pub fn x_m(&self) -> &DVector<f64> {
        &self.x_m
    }

    /// Pending requested control.
    pub fn u_next(&self) -> &DVector<f64> {
        &self.u_next
    }

    pub fn step(&self) -> usize {
        self.k
    }
}

/// What one controller step produced, for logging.
#[derive(Debug, Clone)]
pub struct PcacStepInfo {
    /// Identification error at this step.
    pub ident_error: DVector<f64>,
    /// Forgetting factor used.
    pub beta: f64,
    /// True when a numerical failure forced the fail-safe zero control.
    pub flagged: bool,
}

/// Executes one controller step after measuring `y` (the output that
/// resulted from applying `u`): identifier update, model and gain refresh,
/// one-step state propagation, and the next requested control.
///
/// On any numerical failure the requested control is zero and the step is
/// flagged; the identifier history still advances so the loop stays causal.
pub fn pcac_step(
    state: &mut PcacState,
    y: &DVector<f64>,
    u: &DVector<f64>,
    cfg: &PcacConfig,
) -> Result<PcacStepInfo> {
    let dims = cfg.dims();
    let info = if state.k >= cfg.id_start {
        rls_update(&mut state.rls, y, u, &cfg.rls)?
    } else {
        rls_observe(&mut state.rls, y, u, &cfg.rls)?
    };

    let mut flagged = false;
    // After the identifier advance the history front is (y_k, u_k); the
    // reconstruction needs lags 1..nhat-1, i.e. everything behind the front.
    let y_past: Vec<DVector<f64>> = state.rls.past_outputs().skip(1).cloned().collect();
    let u_past: Vec<DVector<f64>> = state.rls.past_inputs().skip(1).cloned().collect();

    let refreshed = (|| -> Result<(BocfModel, DMatrix<f64>, DVector<f64>, DVector<f64>)> {
        let model = BocfModel::from_theta(state.rls.theta(), &dims)?;
        let x_m_now = assemble_state(state.rls.theta(), &dims, y, &y_past, &u_past)?;
        let x_m_next = &model.a * &x_m_now + &model.b * u;
        let gain = bpre_gain(&model.a, &model.b, &cfg.bpre)?;
        let u_next = if state.k + 1 >= cfg.kc {
            &gain * &x_m_next
        } else {
            DVector::zeros(cfg.rls.m)
        };
        Ok((model, gain, x_m_next, u_next))
    })();

    match refreshed {
        Ok((model, gain, x_m_next, u_next)) if u_next.iter().all(|v| v.is_finite()) => {
            state.model = model;
            state.gain = gain;
            state.x_m = x_m_next;
            state.u_next = u_next;
        }
        _ => {
            // Fail-safe: keep the previous model snapshot, request zero.
            flagged = true;
            state.u_next = DVector::zeros(cfg.rls.m);
        }
    }
    state.k += 1;

    Ok(PcacStepInfo {
        ident_error: info.error,
        beta: info.beta,
        flagged,
    })
}

/// Controller realization built from a model snapshot and gain:
/// `A_c = A_m - F C_m + B_m K`, `B_c = F`, `C_c = K`, with F the stacked
/// coefficient column read from the model.
#[derive(Debug, Clone)]
pub struct ControllerRealization {
    pub a_c: DMatrix<f64>,
    pub b_c: DMatrix<f64>,
    pub c_c: DMatrix<f64>,
}

pub fn controller_realization(model: &BocfModel, gain: &DMatrix<f64>) -> Result<ControllerRealization> {
    let n = model.a.nrows();
    if gain.ncols() != n || gain.nrows() != model.b.ncols() {
        return Err(Error::DimensionMismatch {
            context: "controller_realization",
            expected: format!("gain {}x{n}", model.b.ncols()),
            got: format!("{}x{}", gain.nrows(), gain.ncols()),
        });
    }
    let f = model.f_stack();
    let a_c = &model.a - &f * &model.c + &model.b * gain;
    Ok(ControllerRealization {
        a_c,
        b_c: f,
        c_c: gain.clone(),
    })
}

/// Positive-feedback interconnection of the plant's linear part with the
/// controller realization:
/// `A~ = [[A, B C_c], [B_c C, A_c]]`, `B~ = [B; 0]`, `C~ = [C 0]`.
pub fn closed_loop_realization(
    plant: &StateSpace,
    ctrl: &ControllerRealization,
) -> Result<StateSpace> {
    let n = plant.a().nrows();
    let nc = ctrl.a_c.nrows();
    let m = plant.b().ncols();
    let p = plant.c().nrows();
    if ctrl.c_c.nrows() != m || ctrl.b_c.ncols() != p {
        return Err(Error::DimensionMismatch {
            context: "closed_loop_realization",
            expected: format!("controller with {m} outputs and {p} inputs"),
            got: format!("{} outputs, {} inputs", ctrl.c_c.nrows(), ctrl.b_c.ncols()),
        });
    }
    let dim = n + nc;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    a.view_mut((0, 0), (n, n)).copy_from(plant.a());
    a.view_mut((0, n), (n, nc))
        .copy_from(&(plant.b() * &ctrl.c_c));
    a.view_mut((n, 0), (nc, n))
        .copy_from(&(&ctrl.b_c * plant.c()));
    a.view_mut((n, n), (nc, nc)).copy_from(&ctrl.a_c);
    let mut b = DMatrix::<f64>::zeros(dim, m);
    b.view_mut((0, 0), (n, m)).copy_from(plant.b());
    let mut c = DMatrix::<f64>::zeros(p, dim);
    c.view_mut((0, 0), (p, n)).copy_from(plant.c());
    StateSpace::strictly_proper(a, b, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sslin::{freq_response, spectral_radius, FrequencyGrid};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn test_cfg(nhat: usize, kc: usize) -> PcacConfig {
        let dim = 2 * nhat;
        let rls = RlsConfig::new(
            nhat,
            1,
            1,
            DVector::from_element(dim, 1e-10),
            DMatrix::identity(dim, dim) * 0.1,
            4,
            20,
            0.1,
            0.001,
        )
        .unwrap();
        let mut pterm = DMatrix::zeros(nhat, nhat);
        pterm[(0, 0)] = 1.0;
        let bpre = BpreConfig::new(
            8,
            pterm.clone(),
            pterm,
            DMatrix::from_element(1, 1, 1e-4),
        )
        .unwrap();
        PcacConfig::new(rls, bpre, kc, 0).unwrap()
    }

    fn random_model(seed: u64, nhat: usize) -> BocfModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = DVector::from_fn(2 * nhat, |_, _| rng.gen_range(-0.5..0.5));
        let dims = ModelDims { nhat, p: 1, m: 1 };
        BocfModel::from_theta(&theta, &dims).unwrap()
    }

    #[test]
    fn first_step_with_zero_history_keeps_prior() {
        let cfg = test_cfg(4, 1000);
        let mut state = PcacState::new(&cfg).unwrap();
        let info = pcac_step(
            &mut state,
            &DVector::from_element(1, 3.0),
            &DVector::zeros(1),
            &cfg,
        )
        .unwrap();
        assert!(!info.flagged);
        assert_relative_eq!(info.ident_error[0], 3.0, epsilon = 1e-9);
        // Zero regressor leaves theta at the prior; control is inactive.
        assert_relative_eq!(
            (state.rls().theta() - &cfg.rls.theta0).norm(),
            0.0,
            epsilon = 1e-15
        );
        assert_eq!(state.u_next()[0], 0.0);
        // Model state block 1 carries the measurement.
        // x_m here is the one-step propagation A_m x + B_m u of that state.
        assert!(state.x_m().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn frozen_identifier_gives_constant_gain() {
        let cfg = {
            let mut c = test_cfg(3, 0);
            c.id_start = usize::MAX;
            c
        };
        let mut state = PcacState::new(&cfg).unwrap();
        let mut gains = Vec::new();
        for k in 0..6 {
            pcac_step(
                &mut state,
                &DVector::from_element(1, (k as f64).sin()),
                &DVector::from_element(1, 0.1),
                &cfg,
            )
            .unwrap();
            gains.push(state.gain().clone());
        }
        for g in &gains[1..] {
            assert_relative_eq!((g - &gains[0]).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn active_control_matches_gain_times_state() {
        let cfg = test_cfg(3, 0);
        let mut state = PcacState::new(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            pcac_step(
                &mut state,
                &DVector::from_element(1, rng.gen_range(-1.0..1.0)),
                &DVector::from_element(1, rng.gen_range(-1.0..1.0)),
                &cfg,
            )
            .unwrap();
            let expect = state.gain() * state.x_m();
            assert_relative_eq!((state.u_next() - expect).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_gain_controller_matrix_is_nilpotent() {
        let model = random_model(9, 5);
        let zero_gain = DMatrix::zeros(1, 5);
        let ctrl = controller_realization(&model, &zero_gain).unwrap();
        // A_m - F C_m wipes the companion column, leaving the shift matrix.
        assert_relative_eq!(ctrl.a_c.column(0).norm(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(spectral_radius(&ctrl.a_c).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn decoupled_interconnection_reduces_to_plant() {
        let plant = StateSpace::strictly_proper(
            DMatrix::from_row_slice(2, 2, &[1.0, -0.5, 1.0, 0.0]),
            DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
        )
        .unwrap();
        let model = random_model(4, 4);
        let ctrl = ControllerRealization {
            a_c: model.a.clone(),
            b_c: DMatrix::zeros(4, 1),
            c_c: DMatrix::zeros(1, 4),
        };
        let closed = closed_loop_realization(&plant, &ctrl).unwrap();
        assert_eq!(closed.order(), 6);
        for &psi in &[0.0, 0.7, 2.2, std::f64::consts::PI] {
            let g_cl = freq_response(&closed, psi).unwrap()[(0, 0)];
            let g = freq_response(&plant, psi).unwrap()[(0, 0)];
            assert_relative_eq!((g_cl - g).norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn closed_loop_transfer_matches_feedback_formula() {
        // G~ = G (1 - G_c G)^{-1} with G_c from the controller realization.
        let plant = StateSpace::strictly_proper(
            DMatrix::from_row_slice(2, 2, &[1.0, -0.5, 1.0, 0.0]),
            DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
        )
        .unwrap();
        let model = random_model(13, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let gain = DMatrix::from_fn(1, 4, |_, _| rng.gen_range(-0.2..0.2));
        let ctrl = controller_realization(&model, &gain).unwrap();
        let gc_sys = StateSpace::strictly_proper(ctrl.a_c.clone(), ctrl.b_c.clone(), ctrl.c_c.clone())
            .unwrap();
        let closed = closed_loop_realization(&plant, &ctrl).unwrap();

        let grid = FrequencyGrid::uniform(64).unwrap();
        for &psi in grid.points() {
            let g = freq_response(&plant, psi).unwrap()[(0, 0)];
            let gc = freq_response(&gc_sys, psi).unwrap()[(0, 0)];
            let denom = num_complex::Complex64::new(1.0, 0.0) - gc * g;
            if denom.norm() < 1e-6 {
                continue;
            }
            let expect = g / denom;
            let got = freq_response(&closed, psi).unwrap()[(0, 0)];
            assert!(
                (got - expect).norm() < 1e-8 * expect.norm().max(1.0),
                "mismatch at psi = {psi}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn interconnection_has_expected_dimensions() {
        let plant = StateSpace::strictly_proper(
            DMatrix::from_row_slice(2, 2, &[1.0, -0.5, 1.0, 0.0]),
            DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
        )
        .unwrap();
        let model = random_model(1, 10);
        let gain = DMatrix::zeros(1, 10);
        let ctrl = controller_realization(&model, &gain).unwrap();
        let closed = closed_loop_realization(&plant, &ctrl).unwrap();
        assert_eq!(closed.order(), 12);
        assert!(closed.is_strictly_proper());
    }
}
