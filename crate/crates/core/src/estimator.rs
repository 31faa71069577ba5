//! Multi-restart maximum-likelihood estimation of a point configuration.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointSet;
use crate::lbfgs::{self, LbfgsSettings, Minimum};
use crate::likelihood::{LikelihoodSpec, MeasurementSet, NllObjective, Objective};

const MAX_INIT_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub max_iterations: usize,
    pub grad_tolerance: f64,
    pub step_tolerance: f64,
    pub history_size: usize,
    pub restarts: usize,
    /// Standard deviation of the random initialization, in units of the
    /// mean measured edge length.
    pub init_scale: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            grad_tolerance: 1e-8,
            step_tolerance: 1e-12,
            history_size: 10,
            restarts: 5,
            init_scale: 1.0,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("max_iterations", self.max_iterations),
            ("history_size", self.history_size),
            ("restarts", self.restarts),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("optimizer {name} must be at least 1")));
        }
        let reals = [
            ("grad_tolerance", self.grad_tolerance),
            ("step_tolerance", self.step_tolerance),
            ("init_scale", self.init_scale),
        ];
        if let Some((name, v)) = reals.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid(format!("optimizer {name} must be positive, got {v}")));
        }
        Ok(())
    }

    pub fn lbfgs(&self) -> LbfgsSettings {
        LbfgsSettings {
            max_iterations: self.max_iterations,
            grad_tolerance: self.grad_tolerance,
            step_tolerance: self.step_tolerance,
            history_size: self.history_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub estimate: PointSet,
    pub final_nll: f64,
    pub converged: bool,
    pub iterations_used: usize,
    pub restart_index: usize,
}

/// `n_points * dim` coordinates drawn i.i.d. from `N(0, scale^2)`.
pub fn random_init<R: Rng + ?Sized>(n_points: usize, dim: usize, scale: f64, rng: &mut R) -> Result<PointSet> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::invalid(format!("initialization scale must be positive, got {scale}")));
    }
    let normal = Normal::new(0.0, scale).expect("positive finite scale");
    let coords = (0..n_points * dim).map(|_| normal.sample(rng)).collect();
    PointSet::new("init", dim, coords)
}

/// Typical edge length implied by the data, used to size initializations.
fn length_scale(meas: &MeasurementSet) -> f64 {
    let s = meas.mean_value().abs();
    if s.is_finite() && s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Draws one starting point per restart, redrawing any with a non-finite objective.
pub fn initializations<O, R>(
    objective: &O,
    n_points: usize,
    dim: usize,
    scale: f64,
    restarts: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    (0..restarts)
        .map(|r| {
            for _ in 0..MAX_INIT_REDRAWS {
                let x = random_init(n_points, dim, scale, rng)?.into_coords();
                if objective.value(&x).is_finite() {
                    return Ok(x);
                }
            }
            Err(Error::DegenerateInput(format!(
                "objective not finite at {MAX_INIT_REDRAWS} initializations of restart {r}"
            )))
        })
        .collect()
}

/// Runs L-BFGS from every start and keeps the lowest objective (first on ties).
pub fn best_of<O: Objective + ?Sized>(
    objective: &O,
    starts: Vec<Vec<f64>>,
    settings: &OptimizerSettings,
) -> (usize, Minimum) {
    let lb = settings.lbfgs();
    let mut best: Option<(usize, Minimum)> = None;
    for (r, x0) in starts.into_iter().enumerate() {
        let m = lbfgs::minimize(objective, x0, &lb);
        let better = match &best {
            None => true,
            Some((_, b)) => m.value < b.value || (b.value.is_nan() && !m.value.is_nan()),
        };
        if better {
            best = Some((r, m));
        }
    }
    best.expect("at least one restart")
}

/// Maximum-likelihood estimate of an `n_points` x `dim` configuration.
pub fn estimate<R: Rng + ?Sized>(
    meas: &MeasurementSet,
    spec: &LikelihoodSpec,
    n_points: usize,
    dim: usize,
    settings: &OptimizerSettings,
    rng: &mut R,
) -> Result<EstimateResult> {
    settings.validate()?;
    if n_points != meas.n_points() {
        return Err(Error::invalid(format!(
            "asked for {n_points} points but measurements cover {}",
            meas.n_points()
        )));
    }
    let objective = NllObjective::new(meas, spec, dim)?;
    let scale = settings.init_scale * length_scale(meas);
    let starts = initializations(&objective, n_points, dim, scale, settings.restarts, rng)?;
    let (restart_index, best) = best_of(&objective, starts, settings);
    Ok(EstimateResult {
        estimate: PointSet::new(meas.structure_id(), dim, best.x)?,
        final_nll: best.value,
        converged: best.termination.converged(),
        iterations_used: best.iterations,
        restart_index,
    })
}
