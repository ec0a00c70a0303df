//! The five loss terms and their weighted total.
//!
//! For a target batch pushed through both task pipelines:
//!
//! - regression: MSE between labels and the target head's predictions;
//! - autoencoder: MSE between the transfer round-trip `f_i(f_t(z))` and `z`;
//! - mapping: MSE between labels and the target head applied to the inverse-
//!   transferred source representation `f_h(f_i(m_s))`;
//! - consistency: pins the two tasks' transfer outputs together, including
//!   the perturbation copies;
//! - distance: matches pivot-to-perturbation displacements across tasks.
//!
//! Weights bind by name: `alpha` scales the autoencoder term, `beta` the
//! mapping term, `gamma` the consistency term, `delta` the distance term.
//! All weights default to 1.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Value};
use crate::error::{GateError, Result};
use crate::scalar::{lit, Scalar};

/// Nonnegative weights of the four auxiliary losses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { alpha: 1.0, beta: 1.0, gamma: 1.0, delta: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let ws = [self.alpha, self.beta, self.gamma, self.delta];
        if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(GateError::Parameter(format!("loss weights must be finite and >= 0: {self:?}")));
        }
        Ok(())
    }
}

/// Consistency-loss form.
///
/// `Paired` (default) compares pivots with pivots and the j-th perturbation
/// with its counterpart: `MSE(m_t, m_s) + mean_j MSE(mbar_t[j], mbar_s[j])`.
/// `PerturbedVsPivot` keeps the asymmetric form `mean_j MSE(mbar_t[j], m_s)`
/// for fidelity experiments.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConsistencyMode {
    #[default]
    Paired,
    PerturbedVsPivot,
}

/// Distance-loss form.
///
/// `Vector` (default) penalizes differences of displacement vectors:
/// `mean_j MSE(m_t - mbar_t[j], m_s - mbar_s[j])`. `Scalar` compares
/// per-row displacement lengths: `mean_j mean_i (|d_t,ij| - |d_s,ij|)^2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMode {
    #[default]
    Vector,
    Scalar,
}

/// The five loss scalars plus the weighted total for one batch.
#[derive(Clone, Copy, Debug)]
pub struct LossBundle {
    pub reg: Value,
    pub auto: Value,
    pub map: Value,
    pub cons: Value,
    pub dist: Value,
    pub total: Value,
}

/// Regression loss: mean squared error over a batch of labels.
pub fn loss_reg<T: Scalar>(tape: &mut Tape<T>, y: Value, y_hat: Value) -> Result<Value> {
    tape.mse(y_hat, y)
}

/// Autoencoder loss: `MSE(f_i(f_t(z)), z)`.
pub fn loss_auto<T: Scalar>(tape: &mut Tape<T>, z: Value, z_roundtrip: Value) -> Result<Value> {
    tape.mse(z_roundtrip, z)
}

/// Mapping loss: MSE between target labels and the cross-task prediction.
pub fn loss_map<T: Scalar>(tape: &mut Tape<T>, y: Value, y_cross: Value) -> Result<Value> {
    tape.mse(y_cross, y)
}

fn check_same_count(ctx: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(GateError::dimension(ctx, format!("{a} perturbations"), format!("{b} perturbations")));
    }
    Ok(())
}

/// Consistency loss between the two tasks' transfer outputs.
pub fn loss_cons<T: Scalar>(
    tape: &mut Tape<T>,
    m_t: Value,
    m_s: Value,
    mbar_t: &[Value],
    mbar_s: &[Value],
    mode: ConsistencyMode,
) -> Result<Value> {
    check_same_count("consistency perturbation sets", mbar_t.len(), mbar_s.len())?;
    match mode {
        ConsistencyMode::Paired => {
            let mut acc = tape.mse(m_t, m_s)?;
            if !mbar_t.is_empty() {
                let mut per = tape.mse(mbar_t[0], mbar_s[0])?;
                for j in 1..mbar_t.len() {
                    let term = tape.mse(mbar_t[j], mbar_s[j])?;
                    per = tape.add(per, term)?;
                }
                let mean = tape.scale(per, lit::<T>(1.0 / mbar_t.len() as f64));
                acc = tape.add(acc, mean)?;
            }
            Ok(acc)
        }
        ConsistencyMode::PerturbedVsPivot => {
            if mbar_t.is_empty() {
                return Err(GateError::Parameter(
                    "perturbed-vs-pivot consistency needs at least one perturbation".into(),
                ));
            }
            let mut acc = tape.mse(mbar_t[0], m_s)?;
            for &m in &mbar_t[1..] {
                let term = tape.mse(m, m_s)?;
                acc = tape.add(acc, term)?;
            }
            Ok(tape.scale(acc, lit::<T>(1.0 / mbar_t.len() as f64)))
        }
    }
}

/// Distance loss between pivot-to-perturbation displacement fields.
pub fn loss_dist<T: Scalar>(
    tape: &mut Tape<T>,
    m_t: Value,
    mbar_t: &[Value],
    m_s: Value,
    mbar_s: &[Value],
    mode: DistanceMode,
) -> Result<Value> {
    check_same_count("distance perturbation sets", mbar_t.len(), mbar_s.len())?;
    if mbar_t.is_empty() {
        return Err(GateError::Parameter("distance loss needs at least one perturbation".into()));
    }
    let mut acc: Option<Value> = None;
    for j in 0..mbar_t.len() {
        let dt = tape.sub(m_t, mbar_t[j])?;
        let ds = tape.sub(m_s, mbar_s[j])?;
        let term = match mode {
            DistanceMode::Vector => tape.mse(dt, ds)?,
            DistanceMode::Scalar => {
                let nt = tape.row_norms(dt)?;
                let ns = tape.row_norms(ds)?;
                tape.mse(nt, ns)?
            }
        };
        acc = Some(match acc {
            Some(a) => tape.add(a, term)?,
            None => term,
        });
    }
    Ok(tape.scale(acc.unwrap(), lit::<T>(1.0 / mbar_t.len() as f64)))
}

/// Weighted sum `reg + alpha*auto + beta*map + gamma*cons + delta*dist`.
pub fn loss_total<T: Scalar>(
    tape: &mut Tape<T>,
    reg: Value,
    auto: Value,
    map: Value,
    cons: Value,
    dist: Value,
    w: &LossWeights,
) -> Result<LossBundle> {
    w.validate()?;
    let mut total = reg;
    for (value, weight) in [(auto, w.alpha), (map, w.beta), (cons, w.gamma), (dist, w.delta)] {
        let scaled = tape.scale(value, lit::<T>(weight));
        total = tape.add(total, scaled)?;
    }
    Ok(LossBundle { reg, auto, map, cons, dist, total })
}
