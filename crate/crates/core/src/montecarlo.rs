//! Finite-sample experiments: simulated critical values of `D_{n,κ}`,
//! power against alternatives and decision rules for H1.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ecf::{test_statistic, Hypothesis};
use crate::error::{Error, Result};
use crate::estimators::{eise_fit, eise_fit_fixed_alpha, mle_fit, mle_fit_fixed_alpha, FitOptions, FitReport, WeightSpec};
use crate::stable::{check_alpha, rand_stable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Mle,
    Eise,
}

/// Distribution the data are drawn from when it differs from the null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Alternative {
    /// Standard symmetric stable law.
    Stable { alpha: f64 },
    /// Student t; an infinite `dof` is the standard normal.
    StudentT { dof: f64 },
    Normal { variance: f64 },
}

impl Alternative {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Alternative::Stable { alpha } => check_alpha(alpha),
            Alternative::StudentT { dof } if dof > 0.0 => Ok(()),
            Alternative::Normal { variance } if variance > 0.0 && variance.is_finite() => Ok(()),
            _ => Err(Error::InvalidParameter(format!("invalid alternative {self:?}"))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        match *self {
            Alternative::Stable { alpha } => (0..n).map(|_| rand_stable(alpha, rng)).collect(),
            Alternative::StudentT { dof } if dof.is_infinite() => (0..n).map(|_| rng.sample(StandardNormal)).collect(),
            Alternative::StudentT { dof } => {
                let d = StudentT::new(dof).expect("validated degrees of freedom");
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Alternative::Normal { variance } => {
                let s = variance.sqrt();
                (0..n).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect()
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Alternative::Stable { alpha } => format!("stable({alpha})"),
            Alternative::StudentT { dof } if dof.is_infinite() => "t(inf)".into(),
            Alternative::StudentT { dof } => format!("t({dof})"),
            Alternative::Normal { variance } => format!("N(0,{variance})"),
        }
    }
}

fn default_fit() -> FitOptions {
    FitOptions::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    /// Null characteristic exponent; the α₀ of H2.
    pub alpha: f64,
    pub kappas: Vec<f64>,
    pub hypothesis: Hypothesis,
    pub estimator: EstimatorKind,
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub alternative: Option<Alternative>,
    /// EISE weight; defaults to `exp_power` with `ν` the first κ and `ᾱ = α`.
    #[serde(default)]
    pub weight: Option<WeightSpec>,
    #[serde(default = "default_fit")]
    pub fit: FitOptions,
}

pub const MIN_REPLICATIONS: usize = 100;
pub const MIN_SAMPLE: usize = 20;
/// Largest tolerated fraction of failed fits.
pub const MAX_FAILURE_RATE: f64 = 0.01;

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::InvalidParameter(format!("replications must be at least {MIN_REPLICATIONS}, got {}", self.replications)));
        }
        if self.n < MIN_SAMPLE {
            return Err(Error::InvalidParameter(format!("n must be at least {MIN_SAMPLE}, got {}", self.n)));
        }
        check_alpha(self.alpha)?;
        if self.kappas.is_empty() || self.kappas.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            return Err(Error::InvalidParameter("kappas must be a nonempty list of positive values".into()));
        }
        if let Some(a) = &self.alternative {
            a.validate()?;
        }
        if let Some(w) = &self.weight {
            w.validate()?;
        }
        Ok(())
    }

    fn eise_weight(&self) -> Result<WeightSpec> {
        match self.weight {
            Some(w) => Ok(w),
            None => WeightSpec::exp_power(self.kappas[0], self.alpha),
        }
    }

    fn data_law(&self) -> Alternative {
        self.alternative.unwrap_or(Alternative::Stable { alpha: self.alpha })
    }
}

/// Fits under the configured hypothesis.
pub fn fit_null(data: &[f64], cfg: &ExperimentConfig) -> Result<FitReport> {
    match (cfg.estimator, cfg.hypothesis) {
        (EstimatorKind::Mle, Hypothesis::H1) => mle_fit(data, &cfg.fit),
        (EstimatorKind::Mle, Hypothesis::H2) => mle_fit_fixed_alpha(data, cfg.alpha, &cfg.fit),
        (EstimatorKind::Eise, Hypothesis::H1) => eise_fit(data, cfg.eise_weight()?, &cfg.fit),
        (EstimatorKind::Eise, Hypothesis::H2) => eise_fit_fixed_alpha(data, cfg.alpha, cfg.eise_weight()?, &cfg.fit),
    }
}

/// `D_{n,κ}` for every κ of the configuration, per replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSet {
    /// `statistics[i][r]`: κ index `i`, replication `r`.
    pub statistics: Vec<Vec<f64>>,
    /// Fits that failed and were redrawn.
    pub failures: usize,
}

const MAX_ATTEMPTS: usize = 20;

fn replicate(cfg: &ExperimentConfig, r: usize) -> Result<(Vec<f64>, usize)> {
    // one independent ChaCha stream per replication
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(r as u64);
    let law = cfg.data_law();
    let mut failures = 0;
    let mut last = None;
    for _ in 0..MAX_ATTEMPTS {
        let data = law.sample(cfg.n, &mut rng);
        let outcome = fit_null(&data, cfg).and_then(|fit| {
            cfg.kappas
                .iter()
                .map(|&k| test_statistic(&data, &fit.params, k, cfg.hypothesis).map(|o| o.statistic))
                .collect::<Result<Vec<_>>>()
        });
        match outcome {
            Ok(d) => return Ok((d, failures)),
            Err(e) => {
                failures += 1;
                last = Some(e);
            }
        }
    }
    Err(Error::Experiment(format!(
        "replication {r} failed {MAX_ATTEMPTS} times, last error: {}",
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// Draws the configured number of samples and computes `D_{n,κ}`.
///
/// Deterministic given the seed, independent of the number of threads.
pub fn run_replications(cfg: &ExperimentConfig) -> Result<ReplicationSet> {
    cfg.validate()?;
    let rows: Vec<(Vec<f64>, usize)> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| replicate(cfg, r))
        .collect::<Result<_>>()?;
    let failures: usize = rows.iter().map(|r| r.1).sum();
    let rate = failures as f64 / (cfg.replications + failures) as f64;
    if rate > MAX_FAILURE_RATE {
        return Err(Error::Experiment(format!("{failures} failed fits ({:.2}%) exceed the tolerated rate", 100.0 * rate)));
    }
    let statistics = (0..cfg.kappas.len()).map(|i| rows.iter().map(|r| r.0[i]).collect()).collect();
    Ok(ReplicationSet { statistics, failures })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub kappa: f64,
    pub xi: f64,
    pub value: f64,
    /// Half the spread of the order statistics one binomial standard
    /// deviation either side of the quantile.
    pub se: f64,
}

fn interpolate_sorted(sorted: &[f64], h: f64) -> f64 {
    let h = h.clamp(0.0, (sorted.len() - 1) as f64);
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Upper-`ξ` point of a sample with its standard error.
pub fn upper_quantile(sample: &[f64], xi: f64) -> QuantileEstimate {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let r = s.len() as f64;
    let p = 1.0 - xi;
    let h = (r - 1.0) * p;
    let spread = (r * p * (1.0 - p)).sqrt();
    QuantileEstimate {
        kappa: f64::NAN,
        xi,
        value: interpolate_sorted(&s, h),
        se: 0.5 * (interpolate_sorted(&s, h + spread) - interpolate_sorted(&s, h - spread)),
    }
}

pub const LEVELS: [f64; 2] = [0.10, 0.05];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalResult {
    pub config: ExperimentConfig,
    pub quantiles: Vec<QuantileEstimate>,
    pub failures: usize,
}

/// Simulated upper 10% and 5% points of `D_{n,κ}` under the null.
pub fn simulate_critical(cfg: &ExperimentConfig) -> Result<CriticalResult> {
    if cfg.alternative.is_some() {
        return Err(Error::InvalidParameter("critical values are simulated under the null; remove the alternative".into()));
    }
    let set = run_replications(cfg)?;
    let mut quantiles = Vec::new();
    for (i, &kappa) in cfg.kappas.iter().enumerate() {
        for &xi in &LEVELS {
            let mut q = upper_quantile(&set.statistics[i], xi);
            q.kappa = kappa;
            quantiles.push(q);
        }
    }
    Ok(CriticalResult {
        config: cfg.clone(),
        quantiles,
        failures: set.failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub kappa: f64,
    pub xi: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub kappa: f64,
    pub xi: f64,
    pub critical_value: f64,
    pub power: f64,
    /// Binomial standard error `√(p(1−p)/R)`.
    pub se: f64,
}

/// Rejection rates of `D_{n,κ} > c` for each supplied critical value.
pub fn power_study(cfg: &ExperimentConfig, critical: &[CriticalValue]) -> Result<Vec<PowerEstimate>> {
    if cfg.alternative.is_none() {
        return Err(Error::InvalidParameter("power study needs an alternative".into()));
    }
    let kidx = |k: f64| {
        cfg.kappas
            .iter()
            .position(|&c| (c - k).abs() < 1e-12)
            .ok_or_else(|| Error::InvalidParameter(format!("critical value for κ={k} not in the experiment")))
    };
    for c in critical {
        kidx(c.kappa)?;
    }
    let set = run_replications(cfg)?;
    critical
        .iter()
        .map(|c| {
            let sample = &set.statistics[kidx(c.kappa)?];
            let r = sample.len() as f64;
            let p = sample.iter().filter(|&&d| d > c.value).count() as f64 / r;
            Ok(PowerEstimate {
                kappa: c.kappa,
                xi: c.xi,
                critical_value: c.value,
                power: p,
                se: (p * (1.0 - p) / r).sqrt(),
            })
        })
        .collect()
}

/// Critical values of one `(κ, ξ)` as a function of α, on an increasing grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalCurve {
    pub alphas: Vec<f64>,
    pub values: Vec<f64>,
}

impl CriticalCurve {
    pub fn new(alphas: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() || alphas.len() != values.len() || alphas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("critical curve needs matching, strictly increasing α values".into()));
        }
        Ok(Self { alphas, values })
    }

    /// Linear interpolation in α; exact at the knots.
    pub fn at(&self, alpha: f64) -> Result<f64> {
        let (a0, a1) = (self.alphas[0], *self.alphas.last().unwrap());
        if !(alpha >= a0 - 1e-12 && alpha <= a1 + 1e-12) {
            return Err(Error::MissingTable(format!("α={alpha} outside the tabulated range [{a0}, {a1}]")));
        }
        if let Some(i) = self.alphas.iter().position(|&a| (a - alpha).abs() <= 1e-12) {
            return Ok(self.values[i]);
        }
        let i = self.alphas.partition_point(|&a| a < alpha);
        let (xa, xb) = (self.alphas[i - 1], self.alphas[i]);
        let w = (alpha - xa) / (xb - xa);
        Ok(self.values[i - 1] + w * (self.values[i] - self.values[i - 1]))
    }

    fn sup_on(&self, a: f64, b: f64) -> Result<f64> {
        let mut m = self.at(a)?.max(self.at(b)?);
        for (x, v) in self.alphas.iter().zip(&self.values) {
            if *x >= a && *x <= b {
                m = m.max(*v);
            }
        }
        Ok(m)
    }
}

/// Decision procedures for H1, whose null distribution depends on α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum H1Method {
    /// Supremum of the critical values over all tabulated α.
    SupAll,
    /// Supremum over `α ∈ [a, b]`.
    SupRange { a: f64, b: f64 },
    /// Critical value at the estimated α.
    Plugin,
}

/// Critical value used by `method`.
pub fn h1_threshold(alpha_hat: f64, method: H1Method, curve: &CriticalCurve) -> Result<f64> {
    match method {
        H1Method::SupAll => Ok(curve.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        H1Method::SupRange { a, b } => {
            if !(a < b) {
                return Err(Error::InvalidParameter(format!("empty α range [{a}, {b}]")));
            }
            curve.sup_on(a, b)
        }
        H1Method::Plugin => curve.at(alpha_hat),
    }
}

/// `true` when H1 is rejected: `D_obs ≥` the critical value of `method`.
pub fn h1_decision(d_obs: f64, alpha_hat: f64, method: H1Method, curve: &CriticalCurve) -> Result<bool> {
    Ok(d_obs >= h1_threshold(alpha_hat, method, curve)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve() -> CriticalCurve {
        // Table of 10% points at κ = 10 for α = 0.5, 1.0, 1.5, 1.8
        CriticalCurve::new(vec![0.5, 1.0, 1.5, 1.8], vec![0.083189, 0.031846, 0.008650, 0.002283]).unwrap()
    }

    #[test]
    fn plugin_is_exact_at_knots() {
        let c = curve();
        assert_eq!(h1_threshold(1.5, H1Method::Plugin, &c).unwrap(), 0.008650);
        assert!(h1_threshold(1.9, H1Method::Plugin, &c).is_err());
    }

    #[test]
    fn sup_all_is_table_max() {
        let c = curve();
        assert_eq!(h1_threshold(1.2, H1Method::SupAll, &c).unwrap(), 0.083189);
        let r = h1_threshold(1.2, H1Method::SupRange { a: 1.2, b: 1.8 }, &c).unwrap();
        assert!((r - (0.031846 + 0.4 * (0.008650 - 0.031846))).abs() < 1e-15);
    }

    #[test]
    fn small_statistic_accepted_by_all() {
        let c = curve();
        for m in [H1Method::SupAll, H1Method::SupRange { a: 1.0, b: 1.8 }, H1Method::Plugin] {
            assert!(!h1_decision(0.001, 1.5, m, &c).unwrap());
        }
    }

    #[test]
    fn quantile_of_uniform_grid() {
        let s: Vec<f64> = (0..1001).map(|i| i as f64 / 1000.0).collect();
        let q = upper_quantile(&s, 0.1);
        assert!((q.value - 0.9).abs() < 1e-12);
        assert!((q.se - (1001.0 * 0.09f64).sqrt() / 1000.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_small_experiments() {
        let cfg = ExperimentConfig {
            n: 50,
            alpha: 1.5,
            kappas: vec![2.5],
            hypothesis: Hypothesis::H2,
            estimator: EstimatorKind::Mle,
            replications: 0,
            seed: 1,
            alternative: None,
            weight: None,
            fit: FitOptions::default(),
        };
        assert!(cfg.validate().is_err());
    }
}
