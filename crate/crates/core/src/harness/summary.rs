//! Percentile summaries and matched/mismatched pairwise differences.

use std::collections::HashMap;

use indexmap::IndexMap;

use super::{SweepRecord, SweepResult};
use crate::noise::NoiseFamily;

/// Structure id used for rows pooled over every structure.
pub const AGGREGATE_ID: &str = "*";

/// Percentile of sorted data with linear interpolation between order
/// statistics at position `p * (n - 1)`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Percentiles {
    pub p10: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p90: f64,
}

impl Percentiles {
    pub fn of(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            p10: percentile(&sorted, 0.10),
            p25: percentile(&sorted, 0.25),
            p50: percentile(&sorted, 0.50),
            p75: percentile(&sorted, 0.75),
            p90: percentile(&sorted, 0.90),
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.p10, self.p25, self.p50, self.p75, self.p90]
    }
}

/// OPP-loss distribution of one (structure, noise, SNR, M, likelihood) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub structure_id: String,
    pub noise_family: NoiseFamily,
    pub snr_db: f64,
    pub m: usize,
    pub likelihood_family: NoiseFamily,
    pub count: usize,
    pub percentiles: Percentiles,
}

/// Distribution of `mismatched - matched` OPP loss over repeat-paired records.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseRow {
    pub structure_id: String,
    pub noise_family: NoiseFamily,
    pub snr_db: f64,
    pub m: usize,
    pub n_pairs: usize,
    pub percentiles: Percentiles,
}

impl PairwiseRow {
    pub fn median(&self) -> f64 {
        self.percentiles.p50
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SummaryTable {
    /// Per-structure rows first, then rows pooled over structures ([`AGGREGATE_ID`]).
    pub rows: Vec<SummaryRow>,
    pub pairwise: Vec<PairwiseRow>,
}

impl SummaryTable {
    pub fn row(&self, structure_id: &str, noise: NoiseFamily, snr_db: f64, m: usize, likelihood: NoiseFamily) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| {
            r.structure_id == structure_id
                && r.noise_family == noise
                && r.snr_db == snr_db
                && r.m == m
                && r.likelihood_family == likelihood
        })
    }

    pub fn pairwise_row(&self, structure_id: &str, noise: NoiseFamily, snr_db: f64, m: usize) -> Option<&PairwiseRow> {
        self.pairwise
            .iter()
            .find(|r| r.structure_id == structure_id && r.noise_family == noise && r.snr_db == snr_db && r.m == m)
    }
}

type CellKey = (String, NoiseFamily, u64, usize);

fn cell_key(structure_id: &str, r: &SweepRecord) -> CellKey {
    (structure_id.to_owned(), r.noise_family, r.snr_db.to_bits(), r.m)
}

fn summarize_scope(records: &[SweepRecord], pooled: bool, table: &mut SummaryTable) {
    let id = |r: &SweepRecord| if pooled { AGGREGATE_ID.to_owned() } else { r.structure_id.clone() };

    let mut losses: IndexMap<(CellKey, NoiseFamily), Vec<f64>> = IndexMap::new();
    for r in records {
        losses
            .entry((cell_key(&id(r), r), r.likelihood_family))
            .or_default()
            .push(r.opp_loss);
    }
    for (((structure_id, noise_family, snr, m), likelihood_family), values) in losses {
        table.rows.push(SummaryRow {
            structure_id,
            noise_family,
            snr_db: f64::from_bits(snr),
            m,
            likelihood_family,
            count: values.len(),
            percentiles: Percentiles::of(&values),
        });
    }

    // Pair on the full (structure, noise, snr, m, repeat) identity.
    let mut mismatched: HashMap<(String, NoiseFamily, u64, usize, usize), f64> = HashMap::new();
    for r in records.iter().filter(|r| !r.is_matched()) {
        mismatched.insert(
            (r.structure_id.clone(), r.noise_family, r.snr_db.to_bits(), r.m, r.repeat),
            r.opp_loss,
        );
    }
    let mut diffs: IndexMap<CellKey, Vec<f64>> = IndexMap::new();
    for r in records.iter().filter(|r| r.is_matched()) {
        let key = (r.structure_id.clone(), r.noise_family, r.snr_db.to_bits(), r.m, r.repeat);
        if let Some(other) = mismatched.get(&key) {
            diffs.entry(cell_key(&id(r), r)).or_default().push(other - r.opp_loss);
        }
    }
    for ((structure_id, noise_family, snr, m), values) in diffs {
        table.pairwise.push(PairwiseRow {
            structure_id,
            noise_family,
            snr_db: f64::from_bits(snr),
            m,
            n_pairs: values.len(),
            percentiles: Percentiles::of(&values),
        });
    }
}

/// Percentiles per cell and likelihood, plus pairwise differences, both per
/// structure and, when there is more than one structure, pooled over them.
pub fn summarize(result: &SweepResult) -> SummaryTable {
    let mut table = SummaryTable::default();
    summarize_scope(&result.records, false, &mut table);
    let first = result.records.first().map(|r| &r.structure_id);
    if result.records.iter().any(|r| Some(&r.structure_id) != first) {
        summarize_scope(&result.records, true, &mut table);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(structure: &str, lik: NoiseFamily, repeat: usize, loss: f64) -> SweepRecord {
        SweepRecord {
            structure_id: structure.into(),
            noise_family: NoiseFamily::Laplace,
            likelihood_family: lik,
            snr_db: 5.0,
            m: 10,
            repeat,
            opp_loss: loss,
            final_nll: 0.0,
            converged: true,
            restart_index: 0,
        }
    }

    #[test]
    fn percentile_examples() {
        let p = Percentiles::of(&[5.0, 3.0, 1.0, 2.0, 4.0]);
        assert_eq!(p.p50, 3.0);
        assert!((p.p10 - 1.4).abs() < 1e-12);
        assert_eq!(p.p25, 2.0);
        assert!((p.p90 - 4.6).abs() < 1e-12);
        let single = Percentiles::of(&[0.7]);
        assert_eq!(single.as_array(), [0.7; 5]);
    }

    #[test]
    fn matched_better_gives_positive_difference() {
        let mut records = Vec::new();
        for k in 0..5 {
            records.push(record("a", NoiseFamily::Laplace, k, 0.1 * k as f64));
            records.push(record("a", NoiseFamily::Gaussian, k, 1.0 + 0.1 * k as f64));
        }
        let t = summarize(&SweepResult { records });
        let per = t.pairwise_row("a", NoiseFamily::Laplace, 5.0, 10).unwrap();
        assert!(per.median() > 0.0);
        assert_eq!(per.n_pairs, 5);
        assert!((per.median() - 1.0).abs() < 1e-12);
        // A single structure gets no pooled rows.
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[0].likelihood_family, NoiseFamily::Laplace);
        assert_eq!(t.pairwise.len(), 1);
    }

    #[test]
    fn pooled_rows_cover_all_structures() {
        let mut records = Vec::new();
        for (s, base) in [("a", 0.0), ("b", 10.0)] {
            for k in 0..3 {
                records.push(record(s, NoiseFamily::Laplace, k, base + k as f64));
                records.push(record(s, NoiseFamily::Gaussian, k, base + k as f64 + 2.0));
            }
        }
        let t = summarize(&SweepResult { records });
        assert_eq!(t.rows[2].structure_id, "b");
        assert_eq!(t.rows[4].structure_id, AGGREGATE_ID);
        let pooled = t.row(AGGREGATE_ID, NoiseFamily::Laplace, 5.0, 10, NoiseFamily::Laplace).unwrap();
        assert_eq!(pooled.count, 6);
        assert_eq!(pooled.percentiles.p50, 6.0);
        let pair = t.pairwise_row(AGGREGATE_ID, NoiseFamily::Laplace, 5.0, 10).unwrap();
        assert_eq!(pair.n_pairs, 6);
        assert_eq!(pair.median(), 2.0);
    }

    proptest! {
        #[test]
        fn percentiles_are_ordered(values in prop::collection::vec(-1e3f64..1e3, 1..60)) {
            let p = Percentiles::of(&values).as_array();
            for w in p.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
        }
    }
}
