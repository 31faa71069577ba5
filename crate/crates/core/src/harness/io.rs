//! CSV and TSV serialization of sweep results and summaries.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use indexmap::IndexSet;

use super::summary::{SummaryTable, AGGREGATE_ID};
use super::{SweepRecord, SweepResult};
use crate::error::{Error, Result};
use crate::noise::NoiseFamily;

pub const RESULTS_HEADER: [&str; 10] = [
    "structure_id",
    "noise_family",
    "likelihood_family",
    "snr_db",
    "m",
    "repeat",
    "opp_loss",
    "final_nll",
    "converged",
    "restart_index",
];

const SUMMARY_HEADER: [&str; 10] = [
    "structure_id",
    "noise_family",
    "snr_db",
    "m",
    "p10",
    "p25",
    "p50",
    "p75",
    "p90",
    "likelihood_family",
];

const PAIRWISE_HEADER: [&str; 10] = [
    "structure_id",
    "noise_family",
    "snr_db",
    "m",
    "n_pairs",
    "p10",
    "p25",
    "p50",
    "p75",
    "p90",
];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn results_to_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in &result.records {
        w.write_record([
            r.structure_id.clone(),
            r.noise_family.to_string(),
            r.likelihood_family.to_string(),
            format_float(r.snr_db),
            r.m.to_string(),
            r.repeat.to_string(),
            format_float(r.opp_loss),
            format_float(r.final_nll),
            r.converged.to_string(),
            r.restart_index.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, idx: usize, line: u64) -> Result<T> {
    let raw = record.get(idx).unwrap_or_default();
    raw.trim().parse().map_err(|_| {
        Error::parse(
            format!("line {line}"),
            format!("bad {} value `{raw}`", RESULTS_HEADER[idx]),
        )
    })
}

/// Parses a results CSV and checks that every repeat has exactly one matched
/// and one mismatched record.
pub fn results_from_csv<R: Read>(input: R) -> Result<SweepResult> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(RESULTS_HEADER) {
        return Err(Error::parse("line 1", format!("expected header {}", RESULTS_HEADER.join(","))));
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(format!("line {line}"), e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let family = |idx: usize| -> Result<NoiseFamily> { field(&row, idx, line) };
        records.push(SweepRecord {
            structure_id: row.get(0).unwrap_or_default().to_owned(),
            noise_family: family(1)?,
            likelihood_family: family(2)?,
            snr_db: field(&row, 3, line)?,
            m: field(&row, 4, line)?,
            repeat: field(&row, 5, line)?,
            opp_loss: field(&row, 6, line)?,
            final_nll: field(&row, 7, line)?,
            converged: field(&row, 8, line)?,
            restart_index: field(&row, 9, line)?,
        });
    }
    check_pairing(&records)?;
    Ok(SweepResult { records })
}

fn check_pairing(records: &[SweepRecord]) -> Result<()> {
    let mut seen: HashMap<(&str, NoiseFamily, u64, usize, usize), [usize; 2]> = HashMap::new();
    for r in records {
        if r.likelihood_family != r.noise_family && r.likelihood_family != NoiseFamily::Gaussian {
            return Err(Error::invalid(format!(
                "record for {} has likelihood {} that is neither matched nor gaussian",
                r.structure_id, r.likelihood_family
            )));
        }
        let key = (r.structure_id.as_str(), r.noise_family, r.snr_db.to_bits(), r.m, r.repeat);
        seen.entry(key).or_default()[usize::from(!r.is_matched())] += 1;
    }
    if let Some(((id, fam, snr, m, rep), _)) = seen.iter().find(|(_, c)| **c != [1, 1]) {
        return Err(Error::invalid(format!(
            "repeat {rep} of {id}/{fam}/snr {}/m {m} lacks a matched/mismatched pair",
            f64::from_bits(*snr)
        )));
    }
    Ok(())
}

pub fn write_results(path: &Path, result: &SweepResult) -> Result<()> {
    let file = std::fs::File::create(path)?;
    results_to_csv(result, std::io::BufWriter::new(file))
}

pub fn read_results(path: &Path) -> Result<SweepResult> {
    results_from_csv(std::fs::File::open(path)?)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("summary");
    path.with_file_name(format!("{stem}{suffix}"))
}

/// Companion path holding pairwise differences: `<stem>_pairwise.csv`.
pub fn pairwise_path(summary_path: &Path) -> PathBuf {
    sibling(summary_path, "_pairwise.csv")
}

/// Companion path holding plot data: `<stem>_plot.tsv`.
pub fn plot_path(summary_path: &Path) -> PathBuf {
    sibling(summary_path, "_plot.tsv")
}

pub fn summary_to_csv<W: Write>(table: &SummaryTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in &table.rows {
        let mut rec = vec![r.structure_id.clone(), r.noise_family.to_string(), format_float(r.snr_db), r.m.to_string()];
        rec.extend(r.percentiles.as_array().map(format_float));
        rec.push(r.likelihood_family.to_string());
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn pairwise_to_csv<W: Write>(table: &SummaryTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PAIRWISE_HEADER)?;
    for r in &table.pairwise {
        let mut rec = vec![
            r.structure_id.clone(),
            r.noise_family.to_string(),
            format_float(r.snr_db),
            r.m.to_string(),
            r.n_pairs.to_string(),
        ];
        rec.extend(r.percentiles.as_array().map(format_float));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Box-plot data pooled over structures (or for the only structure), as
/// tab-separated blocks: OPP-loss percentiles per (noise, M), pairwise
/// differences per M, and median OPP loss against M per noise family.
pub fn plot_data_tsv(table: &SummaryTable) -> String {
    let has_pooled = table.rows.iter().any(|r| r.structure_id == AGGREGATE_ID);
    let keep = |id: &str| !has_pooled || id == AGGREGATE_ID;
    let pooled: Vec<_> = table.rows.iter().filter(|r| keep(&r.structure_id)).collect();
    let pairs: Vec<_> = table.pairwise.iter().filter(|r| keep(&r.structure_id)).collect();
    let families: IndexSet<NoiseFamily> = pooled.iter().map(|r| r.noise_family).collect();
    let ms: IndexSet<usize> = pooled.iter().map(|r| r.m).collect();
    let mut out = String::new();

    for &fam in &families {
        for &m in &ms {
            let _ = writeln!(out, "# opp_loss noise={fam} m={m}");
            out.push_str("snr_db\tlikelihood\tp10\tp25\tp50\tp75\tp90\n");
            for r in pooled.iter().filter(|r| r.noise_family == fam && r.m == m) {
                let p = r.percentiles.as_array().map(format_float).join("\t");
                let _ = writeln!(out, "{}\t{}\t{p}", format_float(r.snr_db), r.likelihood_family);
            }
            out.push('\n');
        }
    }
    for &m in &ms {
        let _ = writeln!(out, "# pairwise_difference m={m}");
        out.push_str("snr_db\tnoise\tp10\tp25\tp50\tp75\tp90\n");
        for r in pairs.iter().filter(|r| r.m == m) {
            let p = r.percentiles.as_array().map(format_float).join("\t");
            let _ = writeln!(out, "{}\t{}\t{p}", format_float(r.snr_db), r.noise_family);
        }
        out.push('\n');
    }
    for &fam in &families {
        let _ = writeln!(out, "# median_opp_loss_by_m noise={fam}");
        out.push_str("snr_db\tm\tlikelihood\tp50\n");
        for r in pooled.iter().filter(|r| r.noise_family == fam) {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                format_float(r.snr_db),
                r.m,
                r.likelihood_family,
                format_float(r.percentiles.p50)
            );
        }
        out.push('\n');
    }
    out
}

/// Writes `path`, its `_pairwise.csv` companion and its `_plot.tsv` companion.
pub fn write_summary(path: &Path, table: &SummaryTable) -> Result<()> {
    summary_to_csv(table, std::io::BufWriter::new(std::fs::File::create(path)?))?;
    pairwise_to_csv(table, std::io::BufWriter::new(std::fs::File::create(pairwise_path(path))?))?;
    write_plot_data(&plot_path(path), table)
}

pub fn write_plot_data(path: &Path, table: &SummaryTable) -> Result<()> {
    std::fs::write(path, plot_data_tsv(table))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::summarize;
    use proptest::prelude::*;

    fn sample() -> SweepResult {
        let mut records = Vec::new();
        for (snr, k) in [(-5.0, 0usize), (0.0, 1), (0.0, 2)] {
            for lik in [NoiseFamily::Nsst, NoiseFamily::Gaussian] {
                records.push(SweepRecord {
                    structure_id: "tri-00".into(),
                    noise_family: NoiseFamily::Nsst,
                    likelihood_family: lik,
                    snr_db: snr,
                    m: 10,
                    repeat: k,
                    opp_loss: 0.1 / 3.0 * (k + 1) as f64,
                    final_nll: -12.345678901234567,
                    converged: k != 2,
                    restart_index: k,
                });
            }
        }
        SweepResult { records }
    }

    fn to_string(result: &SweepResult) -> String {
        let mut buf = Vec::new();
        results_to_csv(result, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn results_roundtrip() {
        let r = sample();
        let text = to_string(&r);
        assert!(text.starts_with("structure_id,noise_family,likelihood_family,snr_db,m,repeat,opp_loss,final_nll,converged,restart_index\n"));
        assert_eq!(results_from_csv(text.as_bytes()).unwrap(), r);
    }

    #[test]
    fn malformed_rows_report_line() {
        let text = to_string(&sample());
        let broken = text.replacen("nsst,gaussian", "nsst,cauchy", 1);
        let err = results_from_csv(broken.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");

        let truncated = &text[..text.len() - 20];
        let err = results_from_csv(truncated.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 7"), "{err}");
    }

    #[test]
    fn unpaired_records_are_rejected() {
        let mut r = sample();
        r.records.pop();
        let text = to_string(&r);
        assert!(results_from_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(results_from_csv("a,b,c\n1,2,3\n".as_bytes()).is_err());
    }

    #[test]
    fn summary_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        write_summary(&path, &summarize(&sample())).unwrap();
        let summary = std::fs::read_to_string(&path).unwrap();
        assert!(summary.starts_with("structure_id,noise_family,snr_db,m,p10,p25,p50,p75,p90,likelihood_family\n"));
        let pairwise = std::fs::read_to_string(dir.path().join("summary_pairwise.csv")).unwrap();
        assert!(pairwise.starts_with("structure_id,noise_family,snr_db,m,n_pairs,"));
        let plot = std::fs::read_to_string(dir.path().join("summary_plot.tsv")).unwrap();
        assert!(plot.contains("# opp_loss noise=nsst m=10"));
        assert!(plot.contains("# pairwise_difference m=10"));
        assert!(plot.contains("# median_opp_loss_by_m noise=nsst"));
    }

    proptest! {
        #[test]
        fn float_format_roundtrips(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            let back: f64 = format_float(v).parse().unwrap();
            if v.is_nan() {
                prop_assert!(back.is_nan());
            } else {
                prop_assert_eq!(back.to_bits(), v.to_bits());
            }
        }
    }
}
