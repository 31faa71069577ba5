//! Negative log-likelihood of a candidate configuration given repeated noisy
//! edge-length measurements, with its analytic gradient.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{edge_lengths, edge_set, n_edges, PointSet};
use crate::noise::{NoiseFamily, NoiseModel};

/// `M` measurements for every edge of the complete graph on `n_points`.
///
/// Values are stored edge-major in lexicographic edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    structure_id: String,
    n_points: usize,
    m_per_edge: usize,
    values: Vec<f64>,
}

impl MeasurementSet {
    pub fn new(
        structure_id: impl Into<String>,
        n_points: usize,
        m_per_edge: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::invalid("measurements need at least 2 points"));
        }
        if m_per_edge == 0 {
            return Err(Error::invalid("at least one measurement per edge is required"));
        }
        let expected = n_edges(n_points) * m_per_edge;
        if values.len() != expected {
            return Err(Error::invalid(format!(
                "expected {expected} measurement values, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite measurement {v}")));
        }
        Ok(Self {
            structure_id: structure_id.into(),
            n_points,
            m_per_edge,
            values,
        })
    }

    /// Draws `m` independent measurements of every edge of `truth`.
    pub fn simulate<R: Rng + ?Sized>(
        truth: &PointSet,
        model: &NoiseModel,
        m: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let lengths = edge_lengths(truth);
        let values = lengths
            .lengths()
            .iter()
            .flat_map(|&d| (0..m).map(move |_| d))
            .map(|d| model.sample(d, rng))
            .collect();
        Self::new(truth.id(), truth.n_points(), m, values)
    }

    pub fn structure_id(&self) -> &str {
        &self.structure_id
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn m_per_edge(&self) -> usize {
        self.m_per_edge
    }

    pub fn n_edges(&self) -> usize {
        n_edges(self.n_points)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The `M` values of the `e`-th edge in lexicographic order.
    pub fn edge_values(&self, e: usize) -> &[f64] {
        &self.values[e * self.m_per_edge..(e + 1) * self.m_per_edge]
    }

    pub fn mean_value(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn to_json(&self) -> Result<String> {
        let edges = edge_set(self.n_points)?
            .iter()
            .enumerate()
            .map(|(e, (i, j))| EdgeRecord {
                i,
                j,
                values: self.edge_values(e).to_vec(),
            })
            .collect();
        let file = MeasurementFile {
            structure_id: self.structure_id.clone(),
            m: self.m_per_edge,
            edges,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MeasurementFile = serde_json::from_str(text)?;
        // Solve n(n-1)/2 = |edges| for n.
        let n_points = (1..)
            .find(|&n| n_edges(n) >= file.edges.len())
            .filter(|&n| n_edges(n) == file.edges.len())
            .ok_or_else(|| {
                Error::invalid(format!("{} edges do not form a complete graph", file.edges.len()))
            })?;
        let expected = edge_set(n_points)?;
        let mut values = Vec::with_capacity(file.edges.len() * file.m);
        for (rec, (i, j)) in file.edges.iter().zip(expected.iter()) {
            if (rec.i, rec.j) != (i, j) {
                return Err(Error::invalid(format!(
                    "edge ({}, {}) found where ({i}, {j}) was expected",
                    rec.i, rec.j
                )));
            }
            if rec.values.len() != file.m {
                return Err(Error::invalid(format!(
                    "edge ({i}, {j}) has {} values, expected {}",
                    rec.values.len(),
                    file.m
                )));
            }
            values.extend_from_slice(&rec.values);
        }
        Self::new(file.structure_id, n_points, file.m, values)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasurementFile {
    structure_id: String,
    m: usize,
    edges: Vec<EdgeRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    i: usize,
    j: usize,
    values: Vec<f64>,
}

/// The density assumed for every measurement when forming the likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodSpec {
    model: NoiseModel,
}

impl LikelihoodSpec {
    pub fn new(model: NoiseModel) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    pub fn family(&self) -> NoiseFamily {
        self.model.family()
    }
}

/// A differentiable objective over a flat parameter vector.
pub trait Objective {
    fn n_params(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Writes the gradient into `grad` and returns the value.
    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

fn check_shape(candidate: &PointSet, meas: &MeasurementSet) -> Result<()> {
    if candidate.n_points() != meas.n_points() {
        return Err(Error::invalid(format!(
            "candidate has {} points but measurements cover {}",
            candidate.n_points(),
            meas.n_points()
        )));
    }
    Ok(())
}

/// Shared edge loop: `term(y, d)` returns (cost, d cost / d d).
fn edge_objective<F>(
    meas: &MeasurementSet,
    dim: usize,
    x: &[f64],
    mut grad: Option<&mut [f64]>,
    term: F,
) -> f64
where
    F: Fn(f64, f64) -> (f64, f64),
{
    let n = meas.n_points;
    if let Some(g) = grad.as_deref_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    let mut total = 0.0;
    let mut e = 0;
    let mut diff = vec![0.0; dim];
    for i in 0..n {
        for j in i + 1..n {
            let (xi, xj) = (&x[i * dim..(i + 1) * dim], &x[j * dim..(j + 1) * dim]);
            for ((dk, a), b) in diff.iter_mut().zip(xi).zip(xj) {
                *dk = a - b;
            }
            let d = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut edge_cost = 0.0;
            let mut edge_slope = 0.0;
            for &y in meas.edge_values(e) {
                let (c, s) = term(y, d);
                edge_cost += c;
                edge_slope += s;
            }
            total += edge_cost;
            if let Some(g) = grad.as_deref_mut() {
                // Coincident points contribute no direction.
                if d > 0.0 {
                    let scale = edge_slope / d;
                    for k in 0..dim {
                        g[i * dim + k] += scale * diff[k];
                        g[j * dim + k] -= scale * diff[k];
                    }
                }
            }
            e += 1;
        }
    }
    total
}

/// Negative log-likelihood bound to one measurement set.
#[derive(Debug, Clone, Copy)]
pub struct NllObjective<'a> {
    meas: &'a MeasurementSet,
    model: NoiseModel,
    dim: usize,
}

impl<'a> NllObjective<'a> {
    pub fn new(meas: &'a MeasurementSet, spec: &LikelihoodSpec, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        Ok(Self {
            meas,
            model: spec.model,
            dim,
        })
    }
}

impl Objective for NllObjective<'_> {
    fn n_params(&self) -> usize {
        self.meas.n_points * self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        let m = self.model;
        edge_objective(self.meas, self.dim, x, None, |y, d| (-m.log_pdf(y, d), 0.0))
    }

    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let m = self.model;
        edge_objective(self.meas, self.dim, x, Some(grad), |y, d| {
            (-m.log_pdf(y, d), -m.dlogpdf_dd(y, d))
        })
    }
}

/// Sum of squared residuals bound to one measurement set.
#[derive(Debug, Clone, Copy)]
pub struct SseObjective<'a> {
    meas: &'a MeasurementSet,
    dim: usize,
}

impl<'a> SseObjective<'a> {
    pub fn new(meas: &'a MeasurementSet, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        Ok(Self { meas, dim })
    }
}

impl Objective for SseObjective<'_> {
    fn n_params(&self) -> usize {
        self.meas.n_points * self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        edge_objective(self.meas, self.dim, x, None, |y, d| ((y - d) * (y - d), 0.0))
    }

    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        edge_objective(self.meas, self.dim, x, Some(grad), |y, d| {
            ((y - d) * (y - d), -2.0 * (y - d))
        })
    }
}

/// `-sum_e sum_m log f(y_e^m | d_e(candidate))`.
pub fn nll(candidate: &PointSet, meas: &MeasurementSet, spec: &LikelihoodSpec) -> Result<f64> {
    check_shape(candidate, meas)?;
    Ok(NllObjective::new(meas, spec, candidate.dim())?.value(candidate.coords()))
}

/// Gradient of [`nll`] with respect to the flattened coordinates.
pub fn nll_grad(
    candidate: &PointSet,
    meas: &MeasurementSet,
    spec: &LikelihoodSpec,
) -> Result<Vec<f64>> {
    check_shape(candidate, meas)?;
    let obj = NllObjective::new(meas, spec, candidate.dim())?;
    let mut g = vec![0.0; candidate.coords().len()];
    obj.value_and_gradient(candidate.coords(), &mut g);
    Ok(g)
}

pub fn sse(candidate: &PointSet, meas: &MeasurementSet) -> Result<f64> {
    check_shape(candidate, meas)?;
    Ok(SseObjective::new(meas, candidate.dim())?.value(candidate.coords()))
}

pub fn sse_grad(candidate: &PointSet, meas: &MeasurementSet) -> Result<Vec<f64>> {
    check_shape(candidate, meas)?;
    let obj = SseObjective::new(meas, candidate.dim())?;
    let mut g = vec![0.0; candidate.coords().len()];
    obj.value_and_gradient(candidate.coords(), &mut g);
    Ok(g)
}
