//! Lur'e plant model — a strictly proper LTI system in positive feedback with
//! a memoryless nonlinearity — plus its step simulator and sector-bound
//! verification utilities.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sslin::StateSpace;

/// Memoryless, componentwise nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    Tanh,
    Saturation { limit: f64 },
    LinearGain { gain: f64 },
    DeadZone { width: f64 },
}

impl Nonlinearity {
    fn eval_scalar(&self, y: f64) -> f64 {
        match *self {
            Nonlinearity::Tanh => y.tanh(),
            Nonlinearity::Saturation { limit } => y.clamp(-limit, limit),
            Nonlinearity::LinearGain { gain } => gain * y,
            Nonlinearity::DeadZone { width } => {
                if y > width {
                    y - width
                } else if y < -width {
                    y + width
                } else {
                    0.0
                }
            }
        }
    }

    /// Applies the nonlinearity componentwise.
    pub fn eval(&self, y: &DVector<f64>) -> DVector<f64> {
        y.map(|v| self.eval_scalar(v))
    }

    /// Analytically known scalar sector bound [m1, m2], when one exists.
    pub fn known_sector(&self) -> Option<(f64, f64)> {
        match *self {
            Nonlinearity::Tanh => Some((0.0, 1.0)),
            Nonlinearity::Saturation { .. } => Some((0.0, 1.0)),
            Nonlinearity::LinearGain { gain } => Some((gain, gain)),
            Nonlinearity::DeadZone { .. } => Some((0.0, 1.0)),
        }
    }
}

/// Sector bound [M1, M2] for a nonlinearity, with M2 - M1 positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorBound {
    m1: DMatrix<f64>,
    m2: DMatrix<f64>,
}

impl SectorBound {
    pub fn new(m1: DMatrix<f64>, m2: DMatrix<f64>) -> Result<Self> {
        if m1.shape() != m2.shape() {
            return Err(Error::DimensionMismatch {
                context: "SectorBound::new",
                expected: format!("{}x{}", m1.nrows(), m1.ncols()),
                got: format!("{}x{}", m2.nrows(), m2.ncols()),
            });
        }
        if m1.nrows() == m1.ncols() {
            let diff = &m2 - &m1;
            let sym = (&diff + diff.transpose()) * 0.5;
            let min_eig = sym
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            if min_eig <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "sector bound requires M2 - M1 positive definite (min eig {min_eig})"
                )));
            }
        }
        Ok(Self { m1, m2 })
    }

    /// Scalar sector [m1, m2].
    pub fn scalar(m1: f64, m2: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, m1),
            DMatrix::from_element(1, 1, m2),
        )
    }

    pub fn m1(&self) -> &DMatrix<f64> {
        &self.m1
    }

    pub fn m2(&self) -> &DMatrix<f64> {
        &self.m2
    }
}

/// Strictly proper LTI system in positive feedback with a memoryless
/// nonlinearity acting on the output.
#[derive(Debug, Clone)]
pub struct LurePlant {
    linear: StateSpace,
    gamma: Nonlinearity,
}

impl LurePlant {
    pub fn new(linear: StateSpace, gamma: Nonlinearity) -> Result<Self> {
        if !linear.is_strictly_proper() {
            return Err(Error::InvalidConfig(
                "Lur'e plant requires a strictly proper linear part (D = 0)".into(),
            ));
        }
        if linear.outputs() != linear.inputs() {
            return Err(Error::InvalidConfig(format!(
                "componentwise feedback needs p = m, got p = {}, m = {}",
                linear.outputs(),
                linear.inputs()
            )));
        }
        Ok(Self { linear, gamma })
    }

    pub fn linear(&self) -> &StateSpace {
        &self.linear
    }

    pub fn gamma(&self) -> &Nonlinearity {
        &self.gamma
    }

    pub fn order(&self) -> usize {
        self.linear.order()
    }
}

/// One step of the plant: y = C x, x+ = A x + B (gamma(y) + u + v).
pub fn step_plant(
    plant: &LurePlant,
    x: &DVector<f64>,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let sys = plant.linear();
    if x.len() != sys.order() || u.len() != sys.inputs() || v.len() != sys.inputs() {
        return Err(Error::DimensionMismatch {
            context: "step_plant",
            expected: format!("x len {}, u/v len {}", sys.order(), sys.inputs()),
            got: format!("x len {}, u len {}, v len {}", x.len(), u.len(), v.len()),
        });
    }
    let y = sys.c() * x;
    let drive = plant.gamma().eval(&y) + u + v;
    let x_next = sys.a() * x + sys.b() * drive;
    Ok((x_next, y))
}

/// Trajectory produced by [`simulate`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
}

/// Iterates [`step_plant`] for `steps` steps. Input sequences shorter than
/// `steps` are treated as zero beyond their length; the returned trajectory
/// has `steps + 1` entries.
pub fn simulate(
    plant: &LurePlant,
    x0: &DVector<f64>,
    u_seq: &[DVector<f64>],
    v_seq: &[DVector<f64>],
    steps: usize,
) -> Result<Trajectory> {
    let m = plant.linear().inputs();
    let zero = DVector::zeros(m);
    let mut x = x0.clone();
    let mut states = Vec::with_capacity(steps + 1);
    let mut outputs = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let y = plant.linear().c() * &x;
        states.push(x.clone());
        outputs.push(y);
        if k == steps {
            break;
        }
        let u = u_seq.get(k).unwrap_or(&zero);
        let v = v_seq.get(k).unwrap_or(&zero);
        let (x_next, _) = step_plant(plant, &x, u, v)?;
        x = x_next;
    }
    Ok(Trajectory { states, outputs })
}

/// Sample-based check of the sector inequality
/// `[gamma(y) - M1 y]' [gamma(y) - M2 y] <= 0` over the given samples.
///
/// Returns whether every sample satisfies the inequality together with the
/// worst (largest) value of the quadratic form.
pub fn verify_sector(
    gamma: &Nonlinearity,
    bound: &SectorBound,
    samples: &[DVector<f64>],
) -> (bool, f64) {
    let mut worst = f64::NEG_INFINITY;
    for y in samples {
        let g = gamma.eval(y);
        let lhs = &g - bound.m1() * y;
        let rhs = &g - bound.m2() * y;
        let q = lhs.dot(&rhs);
        worst = worst.max(q);
    }
    (worst <= 0.0, worst)
}

/// Sample-based check that the nonlinearity is diagonal, strictly increasing,
/// and sector-bounded in [0, M]: componentwise decoupling, the inequality
/// `gamma(y)' [gamma(y) - M y] <= 0`, and strict monotonicity of each
/// component over all ordered sample pairs.
pub fn verify_disb(gamma: &Nonlinearity, m: &DMatrix<f64>, samples: &[DVector<f64>]) -> bool {
    if samples.is_empty() {
        return false;
    }
    let dim = samples[0].len();
    // Sector part with M1 = 0.
    for y in samples {
        let g = gamma.eval(y);
        if g.dot(&(&g - m * y)) > 0.0 {
            return false;
        }
    }
    // Strict monotonicity componentwise over sample pairs. The built-in
    // kinds are componentwise by construction, so decoupling needs no check.
    for c in 0..dim {
        for i in 0..samples.len() {
            for j in 0..samples.len() {
                let (yi, yj) = (samples[i][c], samples[j][c]);
                if yi < yj {
                    let gi = gamma.eval(&samples[i])[c];
                    let gj = gamma.eval(&samples[j])[c];
                    if gi >= gj {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Default verification samples: `count` uniform points per component over
/// [-extent, extent] (scalar case).
pub fn default_samples(count: usize, extent: f64) -> Vec<DVector<f64>> {
    (0..count)
        .map(|i| {
            let t = if count == 1 {
                0.0
            } else {
                -extent + 2.0 * extent * i as f64 / (count - 1) as f64
            };
            DVector::from_element(1, t)
        })
        .collect()
}
