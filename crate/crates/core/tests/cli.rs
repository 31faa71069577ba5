use std::path::Path;
use std::process::{Command, Output};

use dgp_core::geometry::read_structures;
use tempfile::TempDir;

fn dgp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dgp")).args(args).output().expect("run dgp")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_owned()
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> String {
    let p = path(dir, name);
    std::fs::write(&p, body).unwrap();
    p
}

const SMALL_SWEEP: &str = r#"{
  "structures": { "triangles": { "count": 2, "seed": 5 } },
  "noise_families": ["laplace", "nsst"],
  "nsst_nu": 3,
  "snr_grid_db": [0, 10],
  "m_values": [10],
  "repeats": 4,
  "seed": 1,
  "optimizer": { "restarts": 3 }
}"#;

#[test]
fn help_documents_every_flag() {
    let cases: [(&str, &[&str]); 4] = [
        ("gen", &["--kind", "--count", "--n-points", "--seed", "--out"]),
        (
            "estimate",
            &["--structures", "--noise", "--likelihood", "--snr-db", "--m", "--nu", "--seed", "--restarts", "--measurements-dir", "--out"],
        ),
        ("sweep", &["--config", "--out-dir", "--workers", "--seed", "--repeats"]),
        ("report", &["--results", "--out"]),
    ];
    for (sub, flags) in cases {
        let out = dgp(&[sub, "--help"]);
        assert_eq!(code(&out), 0, "{sub}");
        let text = String::from_utf8_lossy(&out.stdout);
        for flag in flags {
            assert!(text.contains(flag), "{sub} --help lacks {flag}");
        }
    }
    assert_eq!(code(&dgp(&["--help"])), 0);
    assert_eq!(code(&dgp(&[])), 1);
    assert_eq!(code(&dgp(&["frobnicate"])), 1);
}

#[test]
fn gen_writes_structures() {
    let dir = TempDir::new().unwrap();
    let tris = path(&dir, "tris.json");
    let out = dgp(&["gen", "--kind", "triangle", "--count", "8", "--seed", "1", "--out", &tris]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 1);
    let s = read_structures(Path::new(&tris)).unwrap();
    assert_eq!(s.len(), 8);
    assert!(s.iter().all(|p| p.n_points() == 3 && p.dim() == 2));

    let first = std::fs::read(&tris).unwrap();
    assert_eq!(code(&dgp(&["gen", "--kind", "triangle", "--count", "8", "--seed", "1", "--out", &tris])), 0);
    assert_eq!(first, std::fs::read(&tris).unwrap());

    let clouds = path(&dir, "clouds.json");
    assert_eq!(code(&dgp(&["gen", "--kind", "cloud", "--count", "30", "--n-points", "10", "--out", &clouds])), 0);
    let c = read_structures(Path::new(&clouds)).unwrap();
    assert_eq!(c.len(), 30);
    assert!(c.iter().all(|p| p.n_points() == 10));
}

#[test]
fn gen_errors() {
    let dir = TempDir::new().unwrap();
    let out = dgp(&["gen", "--kind", "triangle"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("--out"));
    let missing = path(&dir, "no/such/dir/x.json");
    let out = dgp(&["gen", "--kind", "triangle", "--out", &missing]);
    assert_eq!(code(&out), 2);
    assert!(!stderr(&out).is_empty());
}

#[test]
fn estimate_single_cell() {
    let dir = TempDir::new().unwrap();
    let tris = path(&dir, "tris.json");
    assert_eq!(code(&dgp(&["gen", "--kind", "triangle", "--count", "3", "--out", &tris])), 0);

    let out_csv = path(&dir, "mis.csv");
    let meas_dir = path(&dir, "meas");
    let args = [
        "estimate", "--structures", &tris, "--noise", "laplace", "--likelihood", "gaussian", "--snr-db", "10", "--m", "10",
        "--measurements-dir", &meas_dir, "--out", &out_csv,
    ];
    let out = dgp(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&out_csv).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("structure_id,noise_family,likelihood_family,snr_db,m,opp_loss"));
    assert!(lines[1..].iter().all(|l| l.contains(",laplace,gaussian,")));
    assert_eq!(std::fs::read_dir(&meas_dir).unwrap().count(), 3);

    let matched = path(&dir, "matched.csv");
    let out = dgp(&["estimate", "--structures", &tris, "--noise", "nsst:nu=5", "--likelihood", "matched", "--snr-db", "-5", "--out", &matched]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&matched).unwrap();
    assert!(text.lines().skip(1).all(|l| l.contains(",nsst,nsst,")));

    let explicit = path(&dir, "explicit.csv");
    let out = dgp(&["estimate", "--structures", &tris, "--noise", "laplace:theta=0.05", "--likelihood", "laplace:theta=0.05", "--out", &explicit]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn estimate_rejects_bad_arguments() {
    let dir = TempDir::new().unwrap();
    let tris = path(&dir, "tris.json");
    assert_eq!(code(&dgp(&["gen", "--kind", "triangle", "--count", "1", "--out", &tris])), 0);
    let out_csv = path(&dir, "x.csv");
    let base = ["estimate", "--structures", tris.as_str(), "--out", out_csv.as_str()];

    let out = dgp(&[&base[..], &["--noise", "laplace", "--snr-db", "abc"]].concat());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("abc"));

    let out = dgp(&[&base[..], &["--noise", "cauchy", "--snr-db", "0"]].concat());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("cauchy"));

    let out = dgp(&[&base[..], &["--noise", "laplace:theta=zz"]].concat());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("zz"));

    let out = dgp(&[&base[..], &["--noise", "laplace"]].concat());
    assert_eq!(code(&out), 1, "family noise without --snr-db");

    let missing = path(&dir, "missing.json");
    let out = dgp(&["estimate", "--structures", &missing, "--noise", "laplace", "--snr-db", "0", "--out", &out_csv]);
    assert_eq!(code(&out), 2);
}

#[test]
fn sweep_and_report_agree() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "sweep.json", SMALL_SWEEP);
    let one = path(&dir, "one");
    let out = dgp(&["sweep", "--config", &config, "--out-dir", &one, "--workers", "1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("cells complete"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("64 records"));

    let results = Path::new(&one).join("results.csv");
    let lines = std::fs::read_to_string(&results).unwrap().lines().count();
    assert_eq!(lines, 1 + 2 * 2 * 2 * 4 * 2);
    for f in ["summary.csv", "summary_pairwise.csv", "summary_plot.tsv"] {
        assert!(Path::new(&one).join(f).exists(), "{f}");
    }

    let eight = path(&dir, "eight");
    assert_eq!(code(&dgp(&["sweep", "--config", &config, "--out-dir", &eight, "--workers", "8"])), 0);
    for f in ["results.csv", "summary.csv", "summary_pairwise.csv", "summary_plot.tsv"] {
        let a = std::fs::read(Path::new(&one).join(f)).unwrap();
        let b = std::fs::read(Path::new(&eight).join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between worker counts");
    }

    let report = path(&dir, "report.csv");
    let out = dgp(&["report", "--results", results.to_str().unwrap(), "--out", &report]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let pairs = [
        ("summary.csv", "report.csv"),
        ("summary_pairwise.csv", "report_pairwise.csv"),
        ("summary_plot.tsv", "report_plot.tsv"),
    ];
    for (sweep_file, report_file) in pairs {
        let a = std::fs::read(Path::new(&one).join(sweep_file)).unwrap();
        let b = std::fs::read(dir.path().join(report_file)).unwrap();
        assert_eq!(a, b, "{sweep_file} vs {report_file}");
    }
}

#[test]
fn sweep_flags_override_config() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "sweep.json", SMALL_SWEEP);
    let out_dir = path(&dir, "o");
    let out = dgp(&["sweep", "--config", &config, "--out-dir", &out_dir, "--repeats", "1", "--seed", "9"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let lines = std::fs::read_to_string(Path::new(&out_dir).join("results.csv")).unwrap().lines().count();
    assert_eq!(lines, 1 + 2 * 2 * 2 * 2);
}

#[test]
fn sweep_config_errors() {
    let dir = TempDir::new().unwrap();
    let out_dir = path(&dir, "o");

    let empty = write_config(&dir, "empty.json", &SMALL_SWEEP.replace("[0, 10]", "[]"));
    let out = dgp(&["sweep", "--config", &empty, "--out-dir", &out_dir]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("snr_grid_db"));

    let unknown = write_config(&dir, "unknown.json", &SMALL_SWEEP.replace("\"repeats\"", "\"repeets\""));
    let out = dgp(&["sweep", "--config", &unknown, "--out-dir", &out_dir]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("repeets"));

    let gaussian = write_config(&dir, "gaussian.json", &SMALL_SWEEP.replace("\"laplace\", \"nsst\"", "\"gaussian\""));
    assert_eq!(code(&dgp(&["sweep", "--config", &gaussian, "--out-dir", &out_dir])), 1);

    let missing = path(&dir, "missing.json");
    assert_eq!(code(&dgp(&["sweep", "--config", &missing, "--out-dir", &out_dir])), 2);
}

#[test]
fn sweep_reads_structure_files() {
    let dir = TempDir::new().unwrap();
    let tris = path(&dir, "tris.json");
    assert_eq!(code(&dgp(&["gen", "--kind", "triangle", "--count", "1", "--out", &tris])), 0);
    let config = write_config(
        &dir,
        "file.json",
        r#"{ "structures": { "file": "tris.json" }, "noise_families": ["laplace"], "snr_grid_db": [5], "m_values": [10], "repeats": 1 }"#,
    );
    let out_dir = path(&dir, "o");
    let out = dgp(&["sweep", "--config", &config, "--out-dir", &out_dir]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = std::fs::read_to_string(Path::new(&out_dir).join("summary.csv")).unwrap();
    // One cell: one row per likelihood family.
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn report_rejects_malformed_results() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "sweep.json", SMALL_SWEEP);
    let out_dir = path(&dir, "o");
    assert_eq!(code(&dgp(&["sweep", "--config", &config, "--out-dir", &out_dir, "--repeats", "1"])), 0);
    let results = Path::new(&out_dir).join("results.csv");
    let text = std::fs::read_to_string(&results).unwrap();

    let truncated = path(&dir, "truncated.csv");
    let cut: String = text.lines().take(4).collect::<Vec<_>>().join("\n") + "\ntri-00,laplace,lap";
    std::fs::write(&truncated, cut).unwrap();
    let out = dgp(&["report", "--results", &truncated, "--out", &path(&dir, "r.csv")]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 5"), "{}", stderr(&out));

    let bad = path(&dir, "bad.csv");
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let mut fields: Vec<&str> = lines[3].split(',').collect();
    fields[6] = "x1.5";
    lines[3] = fields.join(",");
    std::fs::write(&bad, lines.join("\n")).unwrap();
    let out = dgp(&["report", "--results", &bad, "--out", &path(&dir, "r.csv")]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));

    let out = dgp(&["report", "--results", &path(&dir, "none.csv"), "--out", &path(&dir, "r.csv")]);
    assert_eq!(code(&out), 2);
}
