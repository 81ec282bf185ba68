//! End-to-end monitoring pipeline.
//!
//! prices → negative log-returns → marginal fits → PIT → static copula →
//! dynamic copula → per-date PELCoV levels, X-thresholds and Y VaR.
//!
//! The X-threshold at level `v` on date `t` is the conditional quantile of
//! `X_t` at `u_v(t)`: `μ_{x,t} + σ_{x,t} · F⁻¹(u_v(t))` with `F` the
//! standardized innovation law. An alert is raised when `x_t` strictly
//! exceeds it.

mod config;
mod ingest;

use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;

use crate::copula::CopulaParams;
use crate::dyncopula::{self, DynamicFit, StaticFit};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::marginals::{
    self, ArGarchParams, FilteredState, FitOptions, MaGarchSkewParams, PriceSeries,
};
use crate::pelcov::{self, PelcovQuery, PelcovSolution};

pub use config::{parse_df_pair, ConfigFile, MonitorConfig, DEFAULT_LEVELS};
pub use ingest::{load_fred_csv, LoadedPrices, MissingPolicy};

/// Per-level entries of a [`MonitorRow`].
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRow {
    pub v: f64,
    pub u_v: f64,
    pub x_threshold: f64,
    pub var_y: f64,
    pub alert: bool,
    pub root_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorRow {
    pub date: NaiveDate,
    pub x: f64,
    pub y: f64,
    pub rho: f64,
    pub l0: f64,
    /// One entry per configured level, in configuration order.
    pub levels: Vec<LevelRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSummary {
    pub v: f64,
    /// Number of dates with 0, 1 and 2 PELCoV levels.
    pub root_counts: [usize; 3],
    pub u_min: f64,
    pub u_max: f64,
    pub alerts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub n_obs: usize,
    pub min_l0: f64,
    pub levels: Vec<LevelSummary>,
}

/// Fitted models behind a report.
#[derive(Debug, Clone)]
pub struct Fits {
    pub x: (ArGarchParams, FilteredState),
    pub y: (MaGarchSkewParams, FilteredState),
    pub static_copula: StaticFit,
    pub dynamic_copula: DynamicFit,
    /// Dates dropped as missing from the x and y files.
    pub dropped: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct Report {
    pub v_levels: Vec<f64>,
    pub rows: Vec<MonitorRow>,
    pub summary: Summary,
    pub fits: Option<Fits>,
}

impl Report {
    /// A report with no dates.
    pub fn empty(v_levels: Vec<f64>) -> Self {
        let summary = summarize(&v_levels, &[]);
        Self {
            v_levels,
            rows: Vec::new(),
            summary,
            fits: None,
        }
    }

    /// Summary as `key=value` lines.
    pub fn summary_lines(&self) -> Vec<String> {
        let s = &self.summary;
        let mut out = vec![
            format!("n_obs={}", s.n_obs),
            format!("min_L0={}", fmt_num(s.min_l0)),
        ];
        if let Some(f) = &self.fits {
            let (px, py) = (&f.x.0, &f.y.0);
            out.push(format!(
                "x_model=phi1:{} omega:{} alpha:{} beta:{} m1:{}",
                fmt_num(px.phi1),
                fmt_num(px.omega),
                fmt_num(px.alpha),
                fmt_num(px.beta),
                fmt_num(px.m1)
            ));
            out.push(format!(
                "y_model=theta1:{} omega:{} alpha:{} beta:{} m2:{} xi:{}",
                fmt_num(py.theta1),
                fmt_num(py.omega),
                fmt_num(py.alpha),
                fmt_num(py.beta),
                fmt_num(py.skew.m),
                fmt_num(py.skew.xi)
            ));
            let sc = &f.static_copula;
            out.push(format!(
                "static_copula=rho:{} n:{} loglik:{}",
                fmt_num(sc.params.rho()),
                fmt_num(sc.params.n()),
                fmt_num(sc.loglik)
            ));
            let dc = &f.dynamic_copula;
            out.push(format!(
                "dynamic_copula=nu0:{} nu1:{} nu2:{} loglik:{}",
                fmt_num(dc.params.nu0),
                fmt_num(dc.params.nu1),
                fmt_num(dc.params.nu2),
                fmt_num(dc.loglik)
            ));
            out.push(format!("dropped_missing={},{}", f.dropped.0, f.dropped.1));
        }
        for l in &s.levels {
            let v = fmt_num(l.v);
            out.push(format!(
                "v={v} root_counts={},{},{} u_min={} u_max={} alerts={}",
                l.root_counts[0],
                l.root_counts[1],
                l.root_counts[2],
                fmt_num(l.u_min),
                fmt_num(l.u_max),
                l.alerts
            ));
        }
        out
    }
}

fn summarize(v_levels: &[f64], rows: &[MonitorRow]) -> Summary {
    let levels = v_levels
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let mut root_counts = [0; 3];
            let (mut u_min, mut u_max, mut alerts) = (f64::INFINITY, f64::NEG_INFINITY, 0);
            for r in rows {
                let l = &r.levels[k];
                root_counts[l.root_count.min(2)] += 1;
                u_min = u_min.min(l.u_v);
                u_max = u_max.max(l.u_v);
                alerts += usize::from(l.alert);
            }
            LevelSummary {
                v,
                root_counts,
                u_min,
                u_max,
                alerts,
            }
        })
        .collect();
    Summary {
        n_obs: rows.len(),
        min_l0: rows.iter().map(|r| r.l0).fold(f64::INFINITY, f64::min),
        levels,
    }
}

/// Formats with 15 significant digits in plain decimal notation.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (14 - exponent).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding may carry into a new digit (9.99… → 10.0…); that only adds
    // a significant digit.
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Inner join of two price series on date.
fn align(x: &PriceSeries, y: &PriceSeries) -> Result<(PriceSeries, PriceSeries)> {
    let (mut i, mut j) = (0, 0);
    let (mut dates, mut xv, mut yv) = (Vec::new(), Vec::new(), Vec::new());
    while i < x.len() && j < y.len() {
        let (dx, dy) = (x.dates()[i], y.dates()[j]);
        match dx.cmp(&dy) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dates.push(dx);
                xv.push(x.values()[i]);
                yv.push(y.values()[j]);
                i += 1;
                j += 1;
            }
        }
    }
    Ok((
        PriceSeries::new(dates.clone(), xv)?,
        PriceSeries::new(dates, yv)?,
    ))
}

/// Solves `h(u) = v` on every date of a correlation path.
pub fn pelcov_along_path(
    rho: &[f64],
    n: f64,
    v: f64,
    exec: Execution,
) -> Result<Vec<PelcovSolution>> {
    exec::map_slice(exec, rho, |&r| {
        let q = PelcovQuery::new(v, CopulaParams::new(r, n)?)?;
        Ok(pelcov::solve(&q))
    })
    .into_iter()
    .collect()
}

/// Runs the full pipeline. Fails with [`Error::Stage`] naming the stage
/// that failed; a date with two PELCoV levels aborts the run with
/// [`Error::Multiplicity`].
pub fn run(config: &MonitorConfig) -> Result<Report> {
    config.validate()?;
    let exec = config.exec;
    let lx = load_fred_csv(&config.x_csv_path, config.missing).map_err(|e| e.in_stage("ingest"))?;
    let ly = load_fred_csv(&config.y_csv_path, config.missing).map_err(|e| e.in_stage("ingest"))?;
    let (px, py) = align(&lx.series, &ly.series).map_err(|e| e.in_stage("align"))?;
    let rx = marginals::neg_log_returns(&px).map_err(|e| e.in_stage("returns"))?;
    let ry = marginals::neg_log_returns(&py).map_err(|e| e.in_stage("returns"))?;

    let opts = |df: Option<f64>| FitOptions {
        fixed_df: df,
        seed: config.seed ^ 0x6d61_7267,
        exec,
        ..FitOptions::default()
    };
    let (m1, m2) = config.fix_innovation_df.unzip();
    let fx = marginals::fit_ar_garch_with(&rx, &opts(m1)).map_err(|e| e.in_stage("marginal-x"))?;
    let fy =
        marginals::fit_ma_garch_skew_with(&ry, &opts(m2)).map_err(|e| e.in_stage("marginal-y"))?;
    let ix = fx.0.innovation()?;
    let iy = fy.0.innovation()?;
    let u = marginals::pit(&fx.1, |z| ix.cdf(z));
    let v = marginals::pit(&fy.1, |z| iy.cdf(z));
    let pairs: Vec<(f64, f64)> = u.iter().copied().zip(v.iter().copied()).collect();

    let sfit = dyncopula::static_fit_with(&pairs, exec).map_err(|e| e.in_stage("static-copula"))?;
    let dfit = dyncopula::fit_dynamic_with(&pairs, sfit.params.dof(), sfit.params.rho(), exec)
        .map_err(|e| e.in_stage("dynamic-copula"))?;
    let n = sfit.params.n();
    let path = &dfit.path;

    let mut per_level = Vec::with_capacity(config.v_levels.len());
    for &lv in &config.v_levels {
        let sols = pelcov_along_path(&path.rho, n, lv, exec).map_err(|e| e.in_stage("pelcov"))?;
        let multiple: Vec<usize> = (0..sols.len())
            .filter(|&t| sols[t].roots.len() > 1)
            .collect();
        if let Some(&first) = multiple.first() {
            return Err(Error::Multiplicity {
                v: lv,
                count: multiple.len(),
                first_date: rx.dates()[first].to_string(),
            }
            .in_stage("pelcov"));
        }
        per_level.push(sols);
    }

    let (sx, sy) = (&fx.1, &fy.1);
    let rows: Vec<MonitorRow> = (0..rx.len())
        .map(|t| {
            let x = rx.values()[t];
            let levels = config
                .v_levels
                .iter()
                .zip(&per_level)
                .map(|(&lv, sols)| {
                    let sol = &sols[t];
                    let u_v = sol.principal;
                    let x_threshold = sx.cond_mean[t] + sx.cond_sigma[t] * ix.quantile(u_v);
                    LevelRow {
                        v: lv,
                        u_v,
                        x_threshold,
                        var_y: sy.cond_mean[t] + sy.cond_sigma[t] * iy.quantile(lv),
                        alert: x > x_threshold,
                        root_count: sol.roots.len(),
                    }
                })
                .collect();
            MonitorRow {
                date: rx.dates()[t],
                x,
                y: ry.values()[t],
                rho: path.rho[t],
                l0: path.l0[t],
                levels,
            }
        })
        .collect();

    let summary = summarize(&config.v_levels, &rows);
    Ok(Report {
        v_levels: config.v_levels.clone(),
        rows,
        summary,
        fits: Some(Fits {
            x: fx,
            y: fy,
            static_copula: sfit,
            dynamic_copula: dfit,
            dropped: (lx.dropped, ly.dropped),
        }),
    })
}

/// CSV header for the given levels.
pub fn csv_header(v_levels: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = ["date", "x", "y", "rho", "L0"].map(String::from).to_vec();
    for &v in v_levels {
        let v = fmt_num(v);
        h.extend([
            format!("u_{v}"),
            format!("x_threshold_{v}"),
            format!("var_y_{v}"),
            format!("alert_{v}"),
        ]);
    }
    h
}

/// Writes the report as CSV.
pub fn write_csv(report: &Report, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_io = |e: csv::Error| Error::Io(e.into());
    w.write_record(csv_header(&report.v_levels))
        .map_err(to_io)?;
    for r in &report.rows {
        let mut rec = vec![
            r.date.to_string(),
            fmt_num(r.x),
            fmt_num(r.y),
            fmt_num(r.rho),
            fmt_num(r.l0),
        ];
        for l in &r.levels {
            rec.extend([
                fmt_num(l.u_v),
                fmt_num(l.x_threshold),
                fmt_num(l.var_y),
                l.alert.to_string(),
            ]);
        }
        w.write_record(&rec).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(report: &Report, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_csv(report, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(
            fmt_num(-0.000_123_456_789_012_345_67),
            "-0.000123456789012346"
        );
        assert_eq!(fmt_num(1234.5), "1234.5");
        assert_eq!(fmt_num(0.0), "0");
        let x = 0.123_456_789_012_345_67;
        assert_eq!(fmt_num(x).parse::<f64>().unwrap(), 0.123_456_789_012_346);
    }

    #[test]
    fn empty_report_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&Report::empty(vec![0.95, 0.99]), &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "date,x,y,rho,L0,u_0.95,x_threshold_0.95,var_y_0.95,alert_0.95,\
             u_0.99,x_threshold_0.99,var_y_0.99,alert_0.99\n"
        );
    }

    #[test]
    fn constant_path_gives_constant_levels() {
        let rho = vec![0.6; 25];
        let sols = pelcov_along_path(&rho, 8.0, 0.99, Execution::Sequential).unwrap();
        assert!(sols.iter().all(|s| s.principal == sols[0].principal));
        assert!(pelcov_along_path(&[0.5, -0.1], 8.0, 0.99, Execution::Sequential).is_err());
    }

    #[test]
    fn join_on_dates() {
        let d = |m| NaiveDate::from_ymd_opt(2020, m, 1).unwrap();
        let x = PriceSeries::new(vec![d(1), d(2), d(3), d(5)], vec![1.0, 2.0, 3.0, 5.0]).unwrap();
        let y =
            PriceSeries::new(vec![d(2), d(3), d(4), d(5)], vec![20.0, 30.0, 40.0, 50.0]).unwrap();
        let (ax, ay) = align(&x, &y).unwrap();
        assert_eq!(ax.dates(), &[d(2), d(3), d(5)]);
        assert_eq!(ax.values(), &[2.0, 3.0, 5.0]);
        assert_eq!(ay.values(), &[20.0, 30.0, 50.0]);
    }
}
