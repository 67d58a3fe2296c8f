use std::sync::Arc;

use crate::error::Result;
use crate::estimators::profile::{fit, Criterion, CriterionEval, FitOptions, FitReport};
use crate::stable::{cached_table, check_alpha, DensityTable};

/// Negative mean log-likelihood `−(1/n) Σ log f((x_j − μ)/σ; α) + log σ`.
pub struct NegLogLik<'a> {
    data: &'a [f64],
}

impl<'a> NegLogLik<'a> {
    pub fn new(data: &'a [f64]) -> Self {
        Self { data }
    }
}

impl Criterion for NegLogLik<'_> {
    type Table = DensityTable;

    fn table(&self, alpha: f64, recurring: bool) -> Result<Arc<DensityTable>> {
        if recurring {
            cached_table(alpha)
        } else {
            Ok(Arc::new(DensityTable::new(alpha)?))
        }
    }

    fn eval(&self, table: &DensityTable, mu: f64, sigma: f64, gradient: bool, alpha_derivative: bool) -> Result<CriterionEval> {
        let n = self.data.len() as f64;
        let mut sum_lf = 0.0;
        let mut sum_d = 0.0;
        let mut sum_yd = 0.0;
        let mut sum_ha = 0.0;
        for &x in self.data {
            let y = (x - mu) / sigma;
            let [lf, dlf, ha] = table.log_eval(y)?;
            sum_lf += lf;
            if gradient {
                sum_d += dlf;
                sum_yd += y * dlf;
                sum_ha += ha;
            }
        }
        let mut e = CriterionEval {
            value: -sum_lf / n + sigma.ln(),
            ..Default::default()
        };
        if gradient {
            e.d_mu = sum_d / (n * sigma);
            e.d_log_sigma = sum_yd / n + 1.0;
            if alpha_derivative {
                e.d_alpha = -sum_ha / n;
            }
        }
        Ok(e)
    }
}

/// Maximum likelihood fit of `(μ, σ, α)`.
///
/// Starts from the sample median and the best point of a coarse (α, σ) grid;
/// a fit that ends with α on the upper bound 2 is flagged as a boundary
/// solution.
pub fn mle_fit(data: &[f64], opts: &FitOptions) -> Result<FitReport> {
    fit(&NegLogLik::new(data), data, None, opts)
}

/// Maximum likelihood fit of `(μ, σ)` with α held at `alpha0`.
pub fn mle_fit_fixed_alpha(data: &[f64], alpha0: f64, opts: &FitOptions) -> Result<FitReport> {
    check_alpha(alpha0)?;
    fit(&NegLogLik::new(data), data, Some(alpha0), opts)
}

/// Log-likelihood `Σ log f((x_j − μ)/σ; α) − n log σ`.
pub fn log_likelihood(data: &[f64], params: &crate::StableParams) -> Result<f64> {
    params.validate()?;
    let table = DensityTable::new(params.alpha)?;
    let e = NegLogLik::new(data).eval(&table, params.mu, params.sigma, false, false)?;
    Ok(-e.value * data.len() as f64)
}
