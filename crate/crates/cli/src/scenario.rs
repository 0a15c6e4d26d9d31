//! Scenario execution: the full simulate-identify-control loop with
//! per-step certificate evaluation and artifact serialization.

use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DVector;

use pcac_core::certify::{evaluate_certificates, CircleReport, TsypkinReport};
use pcac_core::lure::{step_plant, LurePlant};
use pcac_core::pcac::{closed_loop_realization, controller_realization, pcac_step, PcacState};
use pcac_core::sslin::StateSpace;

use crate::config::ScenarioConfig;
use crate::CliError;

/// Certificate columns of one table row.
#[derive(Debug, Clone)]
pub struct CertRow {
    pub alpha_cc: f64,
    pub beta_cc: f64,
    pub cc1_pass: bool,
    pub cc2_pass: bool,
    pub zeta1: f64,
    pub zeta2: usize,
    pub zeta3_min_eig: f64,
    pub alpha_tc: f64,
    pub beta_tc: f64,
    pub tc1_pass: bool,
    pub tc2_pass: bool,
    pub tc3_pass: bool,
    pub flagged: bool,
}

impl CertRow {
    pub fn all_pass(&self) -> bool {
        self.cc1_pass
            && self.cc2_pass
            && self.tc1_pass
            && self.tc2_pass
            && self.tc3_pass
    }

    fn from_reports(cc: &CircleReport, tc: &TsypkinReport) -> Self {
        Self {
            alpha_cc: cc.alpha_cc,
            beta_cc: cc.beta_cc,
            cc1_pass: cc.cc1_pass,
            cc2_pass: cc.cc2_pass,
            zeta1: tc.zeta1,
            zeta2: tc.zeta2,
            zeta3_min_eig: tc.zeta3_min_eig,
            alpha_tc: tc.alpha_tc,
            beta_tc: tc.beta_tc,
            tc1_pass: tc.tc1_pass,
            tc2_pass: tc.tc2_pass,
            tc3_pass: tc.tc3_pass,
            flagged: cc.flagged || tc.flagged,
        }
    }
}

/// One row of the per-step table.
#[derive(Debug, Clone)]
pub struct StepRow {
    pub k: usize,
    pub y: f64,
    pub u: f64,
    pub v: f64,
    pub beta: f64,
    pub step_flagged: bool,
    pub theta: Vec<f64>,
    pub cert: Option<CertRow>,
}

/// Run summary serialized alongside the table.
#[derive(Debug, Clone)]
pub struct Summary {
    /// First certified step: earliest k whose evaluated certificates all
    /// pass.
    pub first_all_pass: Option<usize>,
    /// Earliest k from which every later evaluated step passes.
    pub certified_from: Option<usize>,
    pub final_abs_y: f64,
    pub wall_ms: u128,
    pub config_hash: String,
    pub seed: u64,
    pub steps: usize,
    pub kc: usize,
    pub flagged_steps: usize,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub rows: Vec<StepRow>,
    pub summary: Summary,
    /// Closed-loop realization snapshot at the configured freeze step, when
    /// the run reached it (used by the region-of-attraction sweep).
    pub frozen_loop: Option<StateSpace>,
}

/// Executes the scenario loop for `cfg.steps` steps (recording steps
/// 0..=steps) and evaluates certificates on the configured cadence.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunArtifacts, CliError> {
    let start = Instant::now();
    let plant = LurePlant::new(cfg.linear.clone(), cfg.gamma.clone())
        .map_err(|e| CliError::Config(format!("plant: {e}")))?;
    let grid = cfg.grid()?;
    let v_seq = cfg.dither.sequence(cfg.steps, cfg.seed);

    let mut state = PcacState::new(&cfg.pcac).map_err(CliError::Numerical)?;
    let mut x = cfg.x0.clone();
    let mut u = DVector::<f64>::zeros(cfg.linear.inputs());
    let mut rows = Vec::with_capacity(cfg.steps + 1);
    let mut frozen_loop = None;
    let mut flagged_steps = 0usize;

    for k in 0..=cfg.steps {
        let y_vec = cfg.linear.c() * &x;
        let y = y_vec[0];

        // Certificates use the model and gain that produced the control
        // applied at this step (computed on the previous pass).
        let cert = if k >= cfg.cert_start && k % cfg.cert_every == 0 {
            let ctrl = controller_realization(state.model(), state.gain())
                .map_err(CliError::Numerical)?;
            let closed =
                closed_loop_realization(&cfg.linear, &ctrl).map_err(CliError::Numerical)?;
            if cfg.roa.frozen && k == cfg.roa.freeze_at {
                frozen_loop = Some(closed.clone());
            }
            match evaluate_certificates(&closed, &cfg.sector, &cfg.m_mult, &cfg.n_mult, &grid) {
                Ok((cc, tc)) => Some(CertRow::from_reports(&cc, &tc)),
                Err(_) => Some(CertRow {
                    alpha_cc: f64::INFINITY,
                    beta_cc: f64::NEG_INFINITY,
                    cc1_pass: false,
                    cc2_pass: false,
                    zeta1: 0.0,
                    zeta2: 0,
                    zeta3_min_eig: 0.0,
                    alpha_tc: f64::INFINITY,
                    beta_tc: f64::NEG_INFINITY,
                    tc1_pass: false,
                    tc2_pass: false,
                    tc3_pass: false,
                    flagged: true,
                }),
            }
        } else {
            if cfg.roa.frozen && k == cfg.roa.freeze_at {
                let ctrl = controller_realization(state.model(), state.gain())
                    .map_err(CliError::Numerical)?;
                frozen_loop = Some(
                    closed_loop_realization(&cfg.linear, &ctrl).map_err(CliError::Numerical)?,
                );
            }
            None
        };

        let info = pcac_step(&mut state, &y_vec, &u, &cfg.pcac).map_err(CliError::Numerical)?;
        if info.flagged {
            flagged_steps += 1;
        }

        rows.push(StepRow {
            k,
            y,
            u: u[0],
            v: v_seq[k],
            beta: info.beta,
            step_flagged: info.flagged,
            theta: state.rls().theta().iter().copied().collect(),
            cert,
        });

        let v = DVector::from_element(cfg.linear.inputs(), v_seq[k]);
        let (x_next, _) = step_plant(&plant, &x, &u, &v).map_err(CliError::Numerical)?;
        x = x_next;
        u = state.u_next().clone();
        if x.iter().any(|c| !c.is_finite()) {
            return Err(CliError::Diverged { step: k });
        }
    }

    let evaluated: Vec<(usize, bool)> = rows
        .iter()
        .filter_map(|r| r.cert.as_ref().map(|c| (r.k, c.all_pass())))
        .collect();
    let first_all_pass = evaluated.iter().find(|(_, p)| *p).map(|(k, _)| *k);
    let certified_from = {
        // Last evaluated failure, if any, bounds the certified suffix.
        let last_fail = evaluated.iter().rev().find(|(_, p)| !*p).map(|(k, _)| *k);
        match last_fail {
            None => evaluated.first().map(|(k, _)| *k),
            Some(kf) => evaluated
                .iter()
                .find(|(k, p)| *p && *k > kf)
                .map(|(k, _)| *k),
        }
    };

    let summary = Summary {
        first_all_pass,
        certified_from,
        final_abs_y: rows.last().map(|r| r.y.abs()).unwrap_or(0.0),
        wall_ms: start.elapsed().as_millis(),
        config_hash: cfg.config_hash.clone(),
        seed: cfg.seed,
        steps: cfg.steps,
        kc: cfg.pcac.kc,
        flagged_steps,
    };

    Ok(RunArtifacts {
        rows,
        summary,
        frozen_loop,
    })
}

fn fmt(v: f64) -> String {
    // 17 significant digits round-trips f64 exactly.
    format!("{v:.16e}")
}

/// Writes `run.csv` and `summary.json` into the output directory and
/// returns their paths.
pub fn write_artifacts(
    cfg: &ScenarioConfig,
    artifacts: &RunArtifacts,
) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", cfg.out.display())))?;
    let csv_path = cfg.out.join("run.csv");
    let mut file = std::io::BufWriter::new(
        std::fs::File::create(&csv_path)
            .map_err(|e| CliError::Io(format!("creating {}: {e}", csv_path.display())))?,
    );

    let theta_len = artifacts.rows.first().map_or(0, |r| r.theta.len());
    let mut header: Vec<String> = ["k", "y", "u", "v", "beta", "step_flagged"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..theta_len).map(|i| format!("theta_{i}")));
    header.extend(
        [
            "alpha_cc",
            "beta_cc",
            "cc1_pass",
            "cc2_pass",
            "zeta1",
            "zeta2",
            "zeta3_min_eig",
            "alpha_tc",
            "beta_tc",
            "tc1_pass",
            "tc2_pass",
            "tc3_pass",
            "cert_flagged",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    writeln!(file, "{}", header.join(",")).map_err(|e| CliError::Io(e.to_string()))?;

    for row in &artifacts.rows {
        let mut fields = vec![
            row.k.to_string(),
            fmt(row.y),
            fmt(row.u),
            fmt(row.v),
            fmt(row.beta),
            (row.step_flagged as u8).to_string(),
        ];
        fields.extend(row.theta.iter().map(|&t| fmt(t)));
        match &row.cert {
            Some(c) => {
                fields.push(fmt(c.alpha_cc));
                fields.push(fmt(c.beta_cc));
                fields.push((c.cc1_pass as u8).to_string());
                fields.push((c.cc2_pass as u8).to_string());
                fields.push(fmt(c.zeta1));
                fields.push(c.zeta2.to_string());
                fields.push(fmt(c.zeta3_min_eig));
                fields.push(fmt(c.alpha_tc));
                fields.push(fmt(c.beta_tc));
                fields.push((c.tc1_pass as u8).to_string());
                fields.push((c.tc2_pass as u8).to_string());
                fields.push((c.tc3_pass as u8).to_string());
                fields.push((c.flagged as u8).to_string());
            }
            None => fields.extend(std::iter::repeat(String::new()).take(13)),
        }
        writeln!(file, "{}", fields.join(",")).map_err(|e| CliError::Io(e.to_string()))?;
    }
    drop(file);

    let s = &artifacts.summary;
    let summary = serde_json::json!({
        "first_all_pass": s.first_all_pass,
        "certified_from": s.certified_from,
        "final_abs_y": s.final_abs_y,
        "wall_ms": s.wall_ms,
        "config_hash": s.config_hash,
        "seed": s.seed,
        "steps": s.steps,
        "kc": s.kc,
        "flagged_steps": s.flagged_steps,
    });
    let json_path = cfg.out.join("summary.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&summary).unwrap())
        .map_err(|e| CliError::Io(format!("writing {}: {e}", json_path.display())))?;

    Ok(vec![csv_path, json_path])
}
