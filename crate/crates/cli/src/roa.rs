//! Region-of-attraction sweeps: classify convergence of the Lur'e loop from
//! a square grid of plant initial conditions, either in open loop or with
//! the linear dynamics frozen at a snapshot of the adaptive closed loop.

use std::io::Write as _;
use std::path::PathBuf;

use nalgebra::DVector;

use pcac_core::lure::{step_plant, LurePlant};
use pcac_core::sslin::StateSpace;

use crate::config::ScenarioConfig;
use crate::scenario::run_scenario;
use crate::CliError;

/// Outcome for one grid initial condition.
#[derive(Debug, Clone)]
pub struct RoaPoint {
    pub x1: f64,
    pub x2: f64,
    pub converged: bool,
    /// Largest |y| over the final window (infinite if the state blew up).
    pub tail_max: f64,
}

/// Simulates the loop from one initial condition and classifies it.
/// Controller states (when present in `linear`) start at zero.
fn classify(
    linear: &StateSpace,
    gamma: &pcac_core::lure::Nonlinearity,
    x0_plant: &[f64],
    horizon: usize,
    window: usize,
    tol: f64,
) -> Result<RoaPoint, CliError> {
    let plant = LurePlant::new(linear.clone(), gamma.clone())
        .map_err(|e| CliError::Config(format!("roa plant: {e}")))?;
    let n = linear.order();
    let mut x = DVector::<f64>::zeros(n);
    for (i, &v) in x0_plant.iter().enumerate().take(n) {
        x[i] = v;
    }
    let u = DVector::<f64>::zeros(linear.inputs());
    let v = DVector::<f64>::zeros(linear.inputs());
    let mut tail_max = 0.0f64;
    let tail_start = horizon.saturating_sub(window);
    for k in 0..horizon {
        let (x_next, y) = step_plant(&plant, &x, &u, &v).map_err(CliError::Numerical)?;
        if x_next.iter().any(|c| !c.is_finite()) {
            return Ok(RoaPoint {
                x1: x0_plant[0],
                x2: x0_plant.get(1).copied().unwrap_or(0.0),
                converged: false,
                tail_max: f64::INFINITY,
            });
        }
        if k >= tail_start {
            tail_max = tail_max.max(y.abs().max());
        }
        x = x_next;
    }
    Ok(RoaPoint {
        x1: x0_plant[0],
        x2: x0_plant.get(1).copied().unwrap_or(0.0),
        converged: tail_max < tol,
        tail_max,
    })
}

/// Runs the sweep over the configured grid. For the frozen source the
/// scenario is executed once (without certificate evaluation) up to the
/// freeze step to capture the closed-loop realization; per grid point the
/// controller state restarts at zero.
pub fn roa_sweep(cfg: &ScenarioConfig) -> Result<Vec<RoaPoint>, CliError> {
    let linear = if cfg.roa.frozen {
        let mut warm = cfg.clone();
        warm.steps = cfg.roa.freeze_at;
        // The warm-up run only needs the snapshot, not certificates.
        warm.cert_every = usize::MAX;
        warm.cert_start = usize::MAX;
        let artifacts = run_scenario(&warm)?;
        artifacts.frozen_loop.ok_or_else(|| {
            CliError::Config(format!(
                "freeze step {} not reached in {} steps",
                cfg.roa.freeze_at, warm.steps
            ))
        })?
    } else {
        cfg.linear.clone()
    };

    let ppa = cfg.roa.points_per_axis.max(2);
    let step = 2.0 * cfg.roa.extent / (ppa - 1) as f64;
    let mut points = Vec::with_capacity(ppa * ppa);
    for i in 0..ppa {
        for j in 0..ppa {
            let x1 = -cfg.roa.extent + i as f64 * step;
            let x2 = -cfg.roa.extent + j as f64 * step;
            points.push(classify(
                &linear,
                &cfg.gamma,
                &[x1, x2],
                cfg.roa.horizon,
                cfg.roa.window,
                cfg.roa.tol,
            )?);
        }
    }
    Ok(points)
}

/// Writes the sweep result as `roa.csv` in the output directory.
pub fn write_roa(cfg: &ScenarioConfig, points: &[RoaPoint]) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", cfg.out.display())))?;
    let path = cfg.out.join("roa.csv");
    let mut file = std::io::BufWriter::new(
        std::fs::File::create(&path)
            .map_err(|e| CliError::Io(format!("creating {}: {e}", path.display())))?,
    );
    writeln!(file, "x1,x2,converged,tail_max").map_err(|e| CliError::Io(e.to_string()))?;
    for p in points {
        writeln!(
            file,
            "{:.16e},{:.16e},{},{:.16e}",
            p.x1, p.x2, p.converged as u8, p.tail_max
        )
        .map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(path)
}
