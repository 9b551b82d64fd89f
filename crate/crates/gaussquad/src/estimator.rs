//! Replicated estimation and the sample-variance MSE estimator.
//!
//! `r` independent realizations of the randomized rule give the mean
//! estimate and the unbiased estimator of its mean-squared error
//! `(1/(r(r-1))) Σ (A_i - mean)²`. Replicate i always runs on the stream
//! `(seed, base_stream_id + i)`, so results are bit-identical no matter how
//! many threads execute them, and the aggregation is a fixed-order
//! reduction.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::rules::{draw_realization, evaluate_realization, RuleConfig};
use crate::test_functions::TestFunction;

/// Replicated rule values with their mean and MSE estimate.
#[derive(Debug, Clone)]
pub struct ReplicatedEstimate {
    replicate_values: Vec<f64>,
    mean: f64,
    mse_estimate: f64,
    evaluations_total: u64,
}

impl ReplicatedEstimate {
    /// Aggregate raw replicate values. Welford's single-pass recurrence is
    /// used for the centered second moment; replicate values can agree to
    /// many digits at large budgets, where the textbook
    /// `Σx² - (Σx)²/r` form cancels catastrophically.
    pub fn from_values(replicate_values: Vec<f64>, evaluations_total: u64) -> Result<Self> {
        let r = replicate_values.len();
        if r < 2 {
            return Err(Error::TooFewReplicates(r as u32));
        }
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for (i, &x) in replicate_values.iter().enumerate() {
            let delta = x - mean;
            mean += delta / (i + 1) as f64;
            m2 += delta * (x - mean);
        }
        let rf = r as f64;
        let mse_estimate = m2 / (rf * (rf - 1.0));
        #[cfg(debug_assertions)]
        {
            // two-pass verification of the single-pass moment
            let mean2: f64 = replicate_values.iter().sum::<f64>() / rf;
            let ss: f64 = replicate_values.iter().map(|x| (x - mean2).powi(2)).sum();
            let mse2 = ss / (rf * (rf - 1.0));
            let scale = mse_estimate
                .abs()
                .max(mean.abs() * f64::EPSILON)
                .max(f64::MIN_POSITIVE);
            debug_assert!(
                (mse_estimate - mse2).abs() <= 1e-6 * scale + 1e-300,
                "welford {mse_estimate} vs two-pass {mse2}"
            );
        }
        Ok(Self {
            replicate_values,
            mean,
            mse_estimate,
            evaluations_total,
        })
    }

    pub fn replicate_values(&self) -> &[f64] {
        &self.replicate_values
    }

    pub fn r(&self) -> u32 {
        self.replicate_values.len() as u32
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased estimate of `E[(mean - I(f))²]`.
    pub fn mse_estimate(&self) -> f64 {
        self.mse_estimate
    }

    /// Total integrand evaluations across replicates: `Σ (m_i + 2)`.
    pub fn evaluations_total(&self) -> u64 {
        self.evaluations_total
    }
}

/// Run `r` independent realizations and aggregate them.
///
/// Replicate i draws from the stream `(stream.seed, stream.stream_id + i)`;
/// the passed stream is only an identity, its draw position is not used.
/// Replicates execute in parallel under the ambient rayon pool.
pub fn replicate(
    f: &TestFunction,
    config: &RuleConfig,
    r: u32,
    stream: &RngStream,
) -> Result<ReplicatedEstimate> {
    if r < 2 {
        return Err(Error::TooFewReplicates(r));
    }
    let seed = stream.seed();
    let base = stream.stream_id();
    let per_replicate: Vec<(f64, u64)> = (0..r)
        .into_par_iter()
        .map(|i| {
            let mut s = RngStream::new(seed, base.wrapping_add(i as u64));
            let real = draw_realization(config, &mut s)?;
            let e = evaluate_realization(f, &real)?;
            Ok((e.value, e.evaluations))
        })
        .collect::<Result<_>>()?;
    let evaluations_total = per_replicate.iter().map(|&(_, c)| c).sum();
    let values = per_replicate.into_iter().map(|(v, _)| v).collect();
    ReplicatedEstimate::from_values(values, evaluations_total)
}

/// Nested Monte Carlo calibration of the MSE estimator.
#[derive(Debug, Clone, Copy)]
pub struct MseCalibration {
    /// Mean of the sample-variance MSE estimates over the outer runs.
    pub mean_mse_estimate: f64,
    /// Empirical mean squared error of the outer means against `I(f)`.
    pub empirical_mse: f64,
    /// Monte Carlo standard error of `mean_mse_estimate`.
    pub mse_estimate_stderr: f64,
    /// Monte Carlo standard error of `empirical_mse`.
    pub empirical_mse_stderr: f64,
}

impl MseCalibration {
    /// The two calibrated quantities: (mean of mse_estimate, empirical MSE).
    pub fn pair(&self) -> (f64, f64) {
        (self.mean_mse_estimate, self.empirical_mse)
    }

    /// Do the two quantities agree within `k` combined standard errors?
    pub fn agrees_within(&self, k: f64) -> bool {
        let sigma = (self.mse_estimate_stderr.powi(2) + self.empirical_mse_stderr.powi(2)).sqrt();
        (self.mean_mse_estimate - self.empirical_mse).abs() <= k * sigma
    }
}

/// Run `outer` independent replicated estimates and compare the average
/// reported MSE estimate with the empirically realized MSE of the means.
/// The estimator is unbiased, so the two agree up to Monte Carlo noise
/// (within a few combined standard errors).
pub fn mse_estimator_unbiasedness_check(
    f: &TestFunction,
    config: &RuleConfig,
    r: u32,
    outer: u32,
    stream: &RngStream,
) -> Result<MseCalibration> {
    if outer < 100 {
        return Err(Error::TooFewOuterRuns(outer));
    }
    let reference = f
        .reference()
        .ok_or_else(|| Error::MissingReference(f.id().to_string()))?
        .value;
    let seed = stream.seed();
    let base = stream.stream_id();
    let mut mse_estimates = Vec::with_capacity(outer as usize);
    let mut squared_errors = Vec::with_capacity(outer as usize);
    for o in 0..outer {
        let run_stream = RngStream::new(seed, base.wrapping_add(o as u64 * r as u64));
        let est = replicate(f, config, r, &run_stream)?;
        mse_estimates.push(est.mse_estimate());
        squared_errors.push((est.mean() - reference).powi(2));
    }
    let mean_of = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let stderr_of = |xs: &[f64], mean: f64| {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        (var / xs.len() as f64).sqrt()
    };
    let mean_mse_estimate = mean_of(&mse_estimates);
    let empirical_mse = mean_of(&squared_errors);
    Ok(MseCalibration {
        mean_mse_estimate,
        empirical_mse,
        mse_estimate_stderr: stderr_of(&mse_estimates, mean_mse_estimate),
        empirical_mse_stderr: stderr_of(&squared_errors, empirical_mse),
    })
}
