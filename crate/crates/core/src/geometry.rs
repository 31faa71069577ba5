//! Point configurations, the complete edge set and edge lengths.
//!
//! Coordinates are stored row-major in one flat buffer (`coords[n * dim + k]`),
//! which is also the parameter vector the optimizer works on. Point indices are
//! zero-based everywhere, including the on-disk formats.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A set of `N >= 2` points in `R^K`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    id: String,
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(id: impl Into<String>, dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("point dimension must be at least 1"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} coordinates do not form points of dimension {dim}",
                coords.len()
            )));
        }
        if coords.len() / dim < 2 {
            return Err(Error::invalid("a point set needs at least 2 points"));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("non-finite coordinate {bad}")));
        }
        Ok(Self {
            id: id.into(),
            dim,
            coords,
        })
    }

    /// Builds a point set from one coordinate vector per point.
    pub fn from_points<P: AsRef<[f64]>>(id: impl Into<String>, points: &[P]) -> Result<Self> {
        let dim = points.first().map_or(0, |p| p.as_ref().len());
        if let Some(p) = points.iter().find(|p| p.as_ref().len() != dim) {
            return Err(Error::invalid(format!(
                "mixed point dimensions {dim} and {}",
                p.as_ref().len()
            )));
        }
        let coords = points.iter().flat_map(|p| p.as_ref().iter().copied()).collect();
        Self::new(id, dim, coords)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_points(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn point(&self, n: usize) -> &[f64] {
        &self.coords[n * self.dim..(n + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Same shape and id, new coordinates.
    pub fn with_coords(&self, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != self.coords.len() {
            return Err(Error::invalid(format!(
                "expected {} coordinates, got {}",
                self.coords.len(),
                coords.len()
            )));
        }
        Self::new(self.id.clone(), self.dim, coords)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Multiplies every coordinate by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        self.with_coords(self.coords.iter().map(|c| c * factor).collect())
    }
}

/// Index pairs `(i, j)`, `i < j`, of the complete graph in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSet {
    n_points: usize,
    edges: Vec<(usize, usize)>,
}

impl EdgeSet {
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    /// Position of edge `(i, j)` in the lexicographic order.
    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        if i == j || j >= self.n_points {
            return None;
        }
        Some(edge_index(self.n_points, i, j))
    }
}

/// Lexicographic position of `(i, j)`, `i < j < n`.
pub(crate) fn edge_index(n: usize, i: usize, j: usize) -> usize {
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

pub fn n_edges(n_points: usize) -> usize {
    n_points * n_points.saturating_sub(1) / 2
}

pub fn edge_set(n_points: usize) -> Result<EdgeSet> {
    if n_points < 2 {
        return Err(Error::invalid(format!(
            "edge set needs at least 2 points, got {n_points}"
        )));
    }
    let edges = (0..n_points)
        .flat_map(|i| (i + 1..n_points).map(move |j| (i, j)))
        .collect();
    Ok(EdgeSet { n_points, edges })
}

/// Euclidean lengths of every edge, aligned with [`edge_set`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeLengths {
    edges: EdgeSet,
    lengths: Vec<f64>,
}

impl EdgeLengths {
    pub fn edges(&self) -> &EdgeSet {
        &self.edges
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.edges.index_of(i, j).map(|e| self.lengths[e])
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn edge_lengths(ps: &PointSet) -> EdgeLengths {
    let edges = edge_set(ps.n_points()).expect("point sets hold at least 2 points");
    let lengths = edges
        .iter()
        .map(|(i, j)| distance(ps.point(i), ps.point(j)))
        .collect();
    EdgeLengths { edges, lengths }
}

/// Average edge length over the complete graph.
pub fn mean_edge_length(ps: &PointSet) -> f64 {
    let lengths = edge_lengths(ps);
    lengths.lengths.iter().sum::<f64>() / lengths.lengths.len() as f64
}

pub fn centroid(ps: &PointSet) -> Vec<f64> {
    let mut c = vec![0.0; ps.dim()];
    for p in ps.points() {
        for (acc, x) in c.iter_mut().zip(p) {
            *acc += x;
        }
    }
    let n = ps.n_points() as f64;
    c.iter_mut().for_each(|x| *x /= n);
    c
}

/// Translates the points so their centroid is the origin.
pub fn center(ps: &PointSet) -> PointSet {
    let c = centroid(ps);
    let coords = ps
        .points()
        .flat_map(|p| p.iter().zip(&c).map(|(x, m)| x - m))
        .collect();
    ps.with_coords(coords).expect("centering preserves shape")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StructureRecord {
    id: String,
    dim: usize,
    points: Vec<Vec<f64>>,
}

/// Parses a structures file: a JSON array of `{ "id", "dim", "points" }`.
pub fn structures_from_json(text: &str) -> Result<Vec<PointSet>> {
    let records: Vec<StructureRecord> = serde_json::from_str(text)?;
    records
        .into_iter()
        .map(|r| {
            if let Some(p) = r.points.iter().find(|p| p.len() != r.dim) {
                return Err(Error::invalid(format!(
                    "structure {}: point of dimension {} but dim is {}",
                    r.id,
                    p.len(),
                    r.dim
                )));
            }
            PointSet::from_points(r.id, &r.points)
        })
        .collect()
}

pub fn structures_to_json(structures: &[PointSet]) -> Result<String> {
    let records: Vec<StructureRecord> = structures
        .iter()
        .map(|ps| StructureRecord {
            id: ps.id().to_owned(),
            dim: ps.dim(),
            points: ps.points().map(<[f64]>::to_vec).collect(),
        })
        .collect();
    Ok(serde_json::to_string_pretty(&records)?)
}

pub fn read_structures(path: &Path) -> Result<Vec<PointSet>> {
    structures_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_structures(path: &Path, structures: &[PointSet]) -> Result<()> {
    std::fs::write(path, structures_to_json(structures)? + "\n")?;
    Ok(())
}
