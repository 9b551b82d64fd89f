//! Convergence-study harness: run the replicated estimator over a grid of
//! budgets `n = 2^k`, emit schema-stable CSV, fit log-log slopes, and
//! optionally render an SVG of the error decay.
//!
//! Reproducibility contract: rows are deterministic functions of
//! `(seed, parameters)` alone. The study for `n = 2^k` derives its replicate
//! streams from `stream_id = k << 32`, so rows are independent of each other
//! and of thread scheduling, and a re-run with the same seed produces a
//! byte-identical CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimator::replicate;
use crate::rng::RngStream;
use crate::rules::{CutoffMode, CutoffStrategy, RuleConfig};
use crate::test_functions::Registry;

/// Exact CSV column set, in order.
pub const CSV_HEADER: &str = "seed,function_id,cutoff_mode,alpha,epsilon,n,T,r,mean_estimate,mse_estimate,reference,squared_error,evaluations_total";

/// Points with an estimated MSE at or below this floor carry no slope
/// information in 64-bit arithmetic and are excluded from fits.
pub const MSE_FLOOR: f64 = 8.077935669463161e-28; // 2^-90

/// One convergence-study row.
#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub seed: u64,
    pub function_id: String,
    pub cutoff_mode: String,
    pub alpha: Option<u32>,
    pub epsilon: f64,
    pub n: u64,
    pub t: f64,
    pub r: u32,
    pub mean_estimate: f64,
    pub mse_estimate: f64,
    pub reference: f64,
    pub squared_error: f64,
    pub evaluations_total: u64,
}

/// 17-significant-digit float formatting; round-trips exactly through
/// `str::parse::<f64>()`.
fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl ExperimentRecord {
    pub fn csv_row(&self) -> String {
        let alpha = self.alpha.map(|a| a.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.function_id,
            self.cutoff_mode,
            alpha,
            fmt_float(self.epsilon),
            self.n,
            fmt_float(self.t),
            self.r,
            fmt_float(self.mean_estimate),
            fmt_float(self.mse_estimate),
            fmt_float(self.reference),
            fmt_float(self.squared_error),
            self.evaluations_total,
        )
    }
}

/// Serialize records under the fixed header.
pub fn records_to_csv(records: &[ExperimentRecord]) -> String {
    let mut out = String::with_capacity(128 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for rec in records {
        out.push_str(&rec.csv_row());
        out.push('\n');
    }
    out
}

pub fn write_csv(records: &[ExperimentRecord], path: &Path) -> Result<()> {
    fs::write(path, records_to_csv(records))?;
    Ok(())
}

/// Which cut-off rule a study uses; `Alpha` requires the smoothness order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyCutoff {
    Alpha(u32),
    AlphaFree,
}

impl StudyCutoff {
    fn strategy(&self, epsilon: f64) -> Result<CutoffStrategy> {
        match *self {
            StudyCutoff::Alpha(a) => CutoffStrategy::smoothness_aware(a, epsilon),
            StudyCutoff::AlphaFree => CutoffStrategy::smoothness_free(epsilon),
        }
    }

    fn mode_name(&self) -> &'static str {
        match self {
            StudyCutoff::Alpha(_) => "alpha",
            StudyCutoff::AlphaFree => "alpha-free",
        }
    }
}

/// Run one convergence study: one record per `n = 2^k`,
/// `k = n_min_pow ..= n_max_pow`, in ascending order.
#[allow(clippy::too_many_arguments)]
pub fn run_convergence_study(
    registry: &Registry,
    function_id: &str,
    cutoff: StudyCutoff,
    epsilon: f64,
    n_min_pow: u32,
    n_max_pow: u32,
    r: u32,
    seed: u64,
) -> Result<Vec<ExperimentRecord>> {
    if n_min_pow > n_max_pow {
        return Err(Error::EmptyRange {
            lo: n_min_pow as i64,
            hi: n_max_pow as i64,
        });
    }
    if n_min_pow < 2 {
        // 2^n_min_pow must be a valid budget (>= 4)
        return Err(Error::BudgetTooSmall {
            min: 4,
            got: 1 << n_min_pow,
        });
    }
    let f = registry.lookup(function_id)?;
    let reference = f
        .reference()
        .ok_or_else(|| Error::MissingReference(function_id.to_string()))?
        .value;
    let strategy = cutoff.strategy(epsilon)?;
    let mut records = Vec::with_capacity((n_max_pow - n_min_pow + 1) as usize);
    for k in n_min_pow..=n_max_pow {
        let n = 1u64 << k;
        let config = RuleConfig::new(n, strategy)?;
        let stream = RngStream::new(seed, (k as u64) << 32);
        let est = replicate(f, &config, r, &stream)?;
        records.push(ExperimentRecord {
            seed,
            function_id: function_id.to_string(),
            cutoff_mode: cutoff.mode_name().to_string(),
            alpha: match strategy.mode() {
                CutoffMode::SmoothnessAware { alpha } => Some(alpha),
                CutoffMode::SmoothnessFree => None,
            },
            epsilon,
            n,
            t: config.cutoff_t(),
            r,
            mean_estimate: est.mean(),
            mse_estimate: est.mse_estimate(),
            reference,
            squared_error: (est.mean() - reference).powi(2),
            evaluations_total: est.evaluations_total(),
        });
    }
    Ok(records)
}

/// An ordinary-least-squares fit of `log2(mse_estimate)` against `log2(n)`.
#[derive(Debug, Clone, Copy)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub n_range: (u64, u64),
    pub points_used: usize,
}

/// Fit the error-decay slope. Rows with `mse_estimate <= 0` or below the
/// 2^-90 floor are excluded; at least 3 usable points are required.
pub fn fit_slope(records: &[ExperimentRecord]) -> Result<SlopeFit> {
    let usable: Vec<(f64, f64, u64)> = records
        .iter()
        .filter(|rec| rec.mse_estimate > MSE_FLOOR && rec.mse_estimate.is_finite())
        .map(|rec| ((rec.n as f64).log2(), rec.mse_estimate.log2(), rec.n))
        .collect();
    if usable.len() < 3 {
        return Err(Error::InsufficientPoints(usable.len()));
    }
    let m = usable.len() as f64;
    let mean_x = usable.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = usable.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    Ok(SlopeFit {
        slope,
        intercept: mean_y - slope * mean_x,
        n_range: (
            usable.iter().map(|p| p.2).min().expect("nonempty"),
            usable.iter().map(|p| p.2).max().expect("nonempty"),
        ),
        points_used: usable.len(),
    })
}

/// Render a minimal log2-log2 SVG line chart of `mse_estimate` against `n`.
pub fn write_svg_plot(records: &[ExperimentRecord], path: &Path) -> Result<()> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|rec| rec.mse_estimate > 0.0 && rec.mse_estimate.is_finite())
        .map(|rec| ((rec.n as f64).log2(), rec.mse_estimate.log2()))
        .collect();
    if pts.is_empty() {
        return Err(Error::InsufficientPoints(0));
    }
    let (width, height, ml, mb, mt, mr) = (640.0, 480.0, 70.0, 50.0, 30.0, 20.0);
    let x_min = pts
        .iter()
        .map(|p| p.0)
        .fold(f64::INFINITY, f64::min)
        .floor();
    let x_max = pts
        .iter()
        .map(|p| p.0)
        .fold(f64::NEG_INFINITY, f64::max)
        .ceil();
    let y_min = pts
        .iter()
        .map(|p| p.1)
        .fold(f64::INFINITY, f64::min)
        .floor();
    let y_max = pts
        .iter()
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max)
        .ceil();
    let x_span = (x_max - x_min).max(1.0);
    let y_span = (y_max - y_min).max(1.0);
    let sx = |x: f64| ml + (x - x_min) / x_span * (width - ml - mr);
    let sy = |y: f64| height - mb - (y - y_min) / y_span * (height - mb - mt);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let title = records
        .first()
        .map(|r| format!("{} ({})", r.function_id, r.cutoff_mode))
        .unwrap_or_default();
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"20\" font-family=\"monospace\" font-size=\"13\">{title}</text>",
        ml
    );
    // axes
    let _ = writeln!(
        svg,
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        height - mb,
        width - mr,
        height - mb
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>",
        height - mb
    );
    // x ticks at integer log2 n
    let mut k = x_min;
    while k <= x_max {
        let x = sx(k);
        let _ = writeln!(
            svg,
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"black\"/>",
            height - mb,
            height - mb + 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{x}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\">2^{k:.0}</text>",
            height - mb + 18.0
        );
        k += 1.0;
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\">n</text>",
        (ml + width - mr) / 2.0,
        height - 8.0
    );
    // y ticks, about six
    let y_step = (y_span / 6.0).ceil().max(1.0);
    let mut y = y_min;
    while y <= y_max {
        let yy = sy(y);
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{yy}\" x2=\"{ml}\" y2=\"{yy}\" stroke=\"black\"/>",
            ml - 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">2^{y:.0}</text>",
            ml - 8.0,
            yy + 4.0
        );
        y += y_step;
    }
    let _ = writeln!(
        svg,
        "<text x=\"14\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" transform=\"rotate(-90 14 {})\">mse</text>",
        (mt + height - mb) / 2.0,
        (mt + height - mb) / 2.0
    );
    // data
    let path_d: Vec<String> = pts
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
        .collect();
    let _ = writeln!(
        svg,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\"/>",
        path_d.join(" ")
    );
    for &(x, y) in &pts {
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"steelblue\"/>",
            sx(x),
            sy(y)
        );
    }
    svg.push_str("</svg>\n");
    fs::write(path, svg)?;
    Ok(())
}

/// Run `job` under a rayon pool with the given thread count, or on the
/// ambient pool when `threads` is `None`.
pub fn run_with_threads<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> T {
    match threads {
        None => job(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .expect("thread pool construction cannot fail for positive counts")
            .install(job),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry() -> Registry {
        Registry::new().unwrap()
    }

    fn synthetic(n: u64, mse: f64) -> ExperimentRecord {
        ExperimentRecord {
            seed: 0,
            function_id: "x".into(),
            cutoff_mode: "alpha".into(),
            alpha: Some(1),
            epsilon: 0.51,
            n,
            t: 1.0,
            r: 2,
            mean_estimate: 0.0,
            mse_estimate: mse,
            reference: 0.0,
            squared_error: 0.0,
            evaluations_total: 0,
        }
    }

    #[test]
    fn slope_of_exact_line() {
        let recs: Vec<_> = [(2u64, -3.0f64), (4, -6.0), (8, -9.0)]
            .iter()
            .map(|&(n, l)| synthetic(n, l.exp2()))
            .collect();
        let fit = fit_slope(&recs).unwrap();
        assert!((fit.slope + 3.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
        assert_eq!(fit.points_used, 3);
        assert_eq!(fit.n_range, (2, 8));
    }

    #[test]
    fn slope_needs_three_points() {
        let recs = vec![synthetic(2, 0.5)];
        assert!(matches!(
            fit_slope(&recs),
            Err(Error::InsufficientPoints(1))
        ));
        // floor exclusion can push a fit below the minimum
        let recs = vec![synthetic(2, 0.5), synthetic(4, 0.25), synthetic(8, 1e-40)];
        assert!(matches!(
            fit_slope(&recs),
            Err(Error::InsufficientPoints(2))
        ));
    }

    #[test]
    fn csv_header_is_frozen() {
        assert_eq!(
            CSV_HEADER,
            "seed,function_id,cutoff_mode,alpha,epsilon,n,T,r,mean_estimate,mse_estimate,reference,squared_error,evaluations_total"
        );
    }

    #[test]
    fn csv_floats_roundtrip() {
        let reg = registry();
        let recs =
            run_convergence_study(&reg, "f1p1", StudyCutoff::Alpha(1), 0.51, 3, 5, 5, 11).unwrap();
        let csv = records_to_csv(&recs);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        for (line, rec) in lines.zip(&recs) {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols.len(), 13);
            assert_eq!(cols[0].parse::<u64>().unwrap(), rec.seed);
            assert_eq!(cols[6].parse::<f64>().unwrap().to_bits(), rec.t.to_bits());
            assert_eq!(
                cols[8].parse::<f64>().unwrap().to_bits(),
                rec.mean_estimate.to_bits()
            );
            assert_eq!(
                cols[9].parse::<f64>().unwrap().to_bits(),
                rec.mse_estimate.to_bits()
            );
        }
    }

    #[test]
    fn study_is_reproducible_and_ordered() {
        let reg = registry();
        let a =
            run_convergence_study(&reg, "f1p2", StudyCutoff::Alpha(2), 0.51, 4, 7, 10, 3).unwrap();
        let b =
            run_convergence_study(&reg, "f1p2", StudyCutoff::Alpha(2), 0.51, 4, 7, 10, 3).unwrap();
        assert_eq!(records_to_csv(&a), records_to_csv(&b));
        let ns: Vec<u64> = a.iter().map(|r| r.n).collect();
        assert_eq!(ns, vec![16, 32, 64, 128]);
    }

    #[test]
    fn study_rows_satisfy_budget_and_recompute_t() {
        let reg = registry();
        let recs =
            run_convergence_study(&reg, "f3", StudyCutoff::AlphaFree, 0.51, 4, 8, 12, 5).unwrap();
        for rec in &recs {
            assert!(rec.evaluations_total <= rec.r as u64 * rec.n);
            let strategy = CutoffStrategy::smoothness_free(rec.epsilon).unwrap();
            let t = crate::rules::cutoff_t(&strategy, rec.n).unwrap();
            assert_eq!(t.to_bits(), rec.t.to_bits());
            assert_eq!(
                rec.squared_error.to_bits(),
                ((rec.mean_estimate - rec.reference).powi(2)).to_bits()
            );
        }
    }

    #[test]
    fn zero_function_study_has_zero_mse() {
        let reg = registry();
        let recs =
            run_convergence_study(&reg, "zero", StudyCutoff::Alpha(1), 0.51, 3, 6, 8, 0).unwrap();
        assert!(recs.iter().all(|r| r.mse_estimate == 0.0));
        assert!(recs.iter().all(|r| r.mean_estimate == 0.0));
    }

    #[test]
    fn unknown_function_and_bad_grid() {
        let reg = registry();
        assert!(matches!(
            run_convergence_study(&reg, "nope", StudyCutoff::Alpha(1), 0.51, 3, 5, 5, 0),
            Err(Error::UnknownFunction(_))
        ));
        assert!(
            run_convergence_study(&reg, "f2", StudyCutoff::AlphaFree, 0.51, 5, 4, 5, 0).is_err()
        );
        assert!(
            run_convergence_study(&reg, "f2", StudyCutoff::AlphaFree, 0.51, 1, 4, 5, 0).is_err()
        );
    }

    #[test]
    fn error_consistency_of_default_study() {
        // |mean - reference| <= 6 sqrt(mse_estimate) for at least 95% of rows
        let reg = registry();
        let recs =
            run_convergence_study(&reg, "f1p1", StudyCutoff::Alpha(1), 0.51, 6, 14, 50, 0).unwrap();
        let ok = recs
            .iter()
            .filter(|r| (r.mean_estimate - r.reference).abs() <= 6.0 * r.mse_estimate.sqrt())
            .count();
        assert!(
            ok as f64 >= 0.95 * recs.len() as f64,
            "{ok}/{} rows within 6 sigma",
            recs.len()
        );
    }

    #[test]
    fn svg_plot_is_written() {
        let reg = registry();
        let recs =
            run_convergence_study(&reg, "f1p1", StudyCutoff::Alpha(1), 0.51, 3, 6, 5, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.svg");
        write_svg_plot(&recs, &path).unwrap();
        let content = fs::read_to_string(&path).unwrap();
        assert!(content.starts_with("<svg"));
        assert!(content.contains("polyline"));
    }

    #[test]
    fn thread_pool_helper_is_transparent() {
        let reg = registry();
        let run = |threads| {
            run_with_threads(threads, || {
                records_to_csv(
                    &run_convergence_study(&reg, "f1p3", StudyCutoff::Alpha(3), 0.51, 4, 8, 16, 9)
                        .unwrap(),
                )
            })
        };
        let a = run(Some(1));
        let b = run(Some(3));
        let c = run(None);
        assert_eq!(a, b);
        assert_eq!(a, c);
    }
}
