use std::path::{Path, PathBuf};
use std::process::Command;

use pelcov::copula::{self, CopulaParams};
use pelcov::marginals::{jarque_bera, ljung_box, spearman};
use pelcov::monitor::{self, ConfigFile, MissingPolicy, MonitorConfig, Report};
use pelcov::{Error, Execution};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn config() -> MonitorConfig {
    MonitorConfig::new(fixture("EXUSEU.csv"), fixture("EXUSUK.csv"))
}

fn csv_bytes(report: &Report) -> Vec<u8> {
    let mut buf = Vec::new();
    monitor::write_csv(report, &mut buf).unwrap();
    buf
}

#[test]
fn fixture_report_is_internally_consistent() {
    let report = monitor::run(&config()).unwrap();
    let fits = report.fits.as_ref().unwrap();
    let n = fits.static_copula.params.n();
    assert_eq!(report.rows.len(), 303);
    assert_eq!(report.summary.n_obs, 303);
    assert!(report.summary.min_l0 > 0.99);

    let ix = fits.x.0.innovation().unwrap();
    let sx = &fits.x.1;
    for (t, row) in report.rows.iter().enumerate() {
        assert!(row.rho.abs() < 1.0);
        let p = CopulaParams::new(row.rho, n).unwrap();
        assert_eq!(row.l0, copula::lower_limit(p));
        for l in &row.levels {
            assert_eq!(l.root_count, 1);
            assert!(l.u_v > 0.5 && l.u_v < 1.0);
            let h = copula::h(l.u_v, l.v, p).unwrap();
            assert!((h - l.v).abs() <= 1e-8, "{}: h = {h}", row.date);
            assert_eq!(l.alert, row.x > l.x_threshold);
            // The threshold is the conditional u_v-quantile of X, so an
            // alert is the same event as a PIT above u_v.
            let pit = ix.cdf((row.x - sx.cond_mean[t]) / sx.cond_sigma[t]);
            if (pit - l.u_v).abs() > 1e-9 {
                assert_eq!(l.alert, pit > l.u_v);
            }
        }
    }
    for s in &report.summary.levels {
        assert_eq!(s.root_counts, [0, 303, 0]);
        assert!(s.u_min <= s.u_max);
    }
    let lines = report.summary_lines();
    assert!(lines.iter().any(|l| l.starts_with("static_copula=")));
}

#[test]
fn fixture_marginal_diagnostics() {
    let report = monitor::run(&config()).unwrap();
    let fits = report.fits.unwrap();
    let ix = fits.x.0.innovation().unwrap();
    let iy = fits.y.0.innovation().unwrap();
    let u = pelcov::marginals::pit(&fits.x.1, |z| ix.cdf(z));
    let v = pelcov::marginals::pit(&fits.y.1, |z| iy.cdf(z));
    assert!(spearman(&u, &v) > 0.5);

    let z = &fits.x.1.std_residuals;
    let sq: Vec<f64> = z.iter().map(|e| e * e).collect();
    assert!(ljung_box(&sq, 20).unwrap().p_value > 0.05);
    let raw: Vec<f64> = report.rows.iter().map(|r| r.y).collect();
    assert!(jarque_bera(&raw).unwrap().p_value < 1e-3);
}

#[test]
fn csv_output_is_deterministic_and_roundtrips() {
    let a = monitor::run(&config()).unwrap();
    let mut seq = config();
    seq.exec = Execution::Sequential;
    let b = monitor::run(&seq).unwrap();
    let bytes = csv_bytes(&a);
    assert_eq!(bytes, csv_bytes(&b));

    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, monitor::csv_header(&a.v_levels));
    let records: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), a.rows.len());
    for (rec, row) in records.iter().zip(&a.rows) {
        assert_eq!(&rec[0], row.date.to_string());
        let rho: f64 = rec[3].parse().unwrap();
        assert!((rho - row.rho).abs() <= 1e-14);
        for (k, l) in row.levels.iter().enumerate() {
            let u: f64 = rec[5 + 4 * k].parse().unwrap();
            assert!((u - l.u_v).abs() <= 1e-14);
            assert_eq!(&rec[8 + 4 * k], l.alert.to_string());
        }
    }
}

#[test]
fn empty_report_has_header_only() {
    let text = String::from_utf8(csv_bytes(&Report::empty(vec![0.95]))).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("date,x,y,rho,L0,u_0.95,"));
}

#[test]
fn fixed_degrees_of_freedom_are_respected() {
    let mut cfg = config();
    cfg.fix_innovation_df = Some((10.0, 12.0));
    let report = monitor::run(&cfg).unwrap();
    let fits = report.fits.unwrap();
    assert_eq!(fits.x.0.m1, 10.0);
    assert_eq!(fits.y.0.skew.m, 12.0);
    assert_eq!(fits.x.1.std_errors[4], 0.0);
    assert_eq!(fits.y.1.std_errors[4], 0.0);
}

#[test]
fn two_levels_on_a_date_abort_the_run() {
    let mut cfg = config();
    cfg.v_levels = vec![0.999];
    match monitor::run(&cfg) {
        Err(Error::Stage { stage, source }) => {
            assert_eq!(stage, "pelcov");
            assert!(matches!(*source, Error::Multiplicity { .. }), "{source}");
        }
        other => panic!("expected a multiplicity abort, got {other:?}"),
    }
}

fn with_missing_row(dir: &Path) -> PathBuf {
    let text = std::fs::read_to_string(fixture("EXUSEU.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let date = lines[100].split(',').next().unwrap().to_string();
    lines[100] = format!("{date},.");
    let path = dir.join("EXUSEU_missing.csv");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    path
}

#[test]
fn missing_values_follow_the_policy() {
    let dir = tempfile::tempdir().unwrap();
    let x = with_missing_row(dir.path());
    let mut cfg = MonitorConfig::new(&x, fixture("EXUSUK.csv"));
    match monitor::run(&cfg) {
        Err(Error::Stage { stage, source }) => {
            assert_eq!(stage, "ingest");
            assert!(source.to_string().contains("row 101"), "{source}");
        }
        other => panic!("expected an ingest failure, got {other:?}"),
    }
    cfg.missing = MissingPolicy::Drop;
    let report = monitor::run(&cfg).unwrap();
    assert_eq!(report.rows.len(), 302);
    assert_eq!(report.fits.unwrap().dropped, (1, 0));
}

#[test]
fn config_file_and_flags_merge() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("monitor.conf");
    std::fs::write(
        &path,
        format!(
            "x = {}\ny = {}\nv = 0.9, 0.95\nseed = 3\ndrop-missing = yes\n",
            fixture("EXUSEU.csv").display(),
            fixture("EXUSUK.csv").display()
        ),
    )
    .unwrap();
    let file = ConfigFile::load(&path).unwrap();
    let flags = ConfigFile {
        v: vec![0.99],
        out: Some(dir.path().join("out.csv")),
        ..Default::default()
    };
    let cfg = file.merge(flags).into_config().unwrap();
    assert_eq!(cfg.v_levels, vec![0.99]);
    assert_eq!(cfg.seed, 3);
    assert_eq!(cfg.missing, MissingPolicy::Drop);
    assert_eq!(cfg.output_path, Some(dir.path().join("out.csv")));
    cfg.validate().unwrap();
}

#[test]
fn invalid_configuration_is_reported() {
    let mut cfg = config();
    cfg.v_levels.clear();
    assert!(matches!(monitor::run(&cfg), Err(Error::Config(_))));
    let cfg = MonitorConfig::new("/does/not/exist.csv", fixture("EXUSUK.csv"));
    assert!(matches!(monitor::run(&cfg), Err(Error::Config(_))));
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_monitor"))
}

#[test]
fn cli_run_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.csv");
    let status = cli()
        .args(["run", "--v", "0.95", "--out"])
        .arg(&out)
        .arg("--x")
        .arg(fixture("EXUSEU.csv"))
        .arg("--y")
        .arg(fixture("EXUSUK.csv"))
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let stdout = String::from_utf8(status.stdout).unwrap();
    assert!(stdout.contains("n_obs=303"), "{stdout}");
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 304);
}

#[test]
fn cli_pelcov_and_failure_exit() {
    let out = cli()
        .args(["pelcov", "--rho", "0.2", "--n", "3", "--v", "0.99"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("roots=0.06510777"), "{text}");
    assert!(text.contains("secondary=0.06510777"), "{text}");

    let bad = cli()
        .args(["run", "--x", "/nonexistent.csv", "--y"])
        .arg(fixture("EXUSUK.csv"))
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("error:"));
}
