//! Piecewise Chebyshev interpolation of vector-valued functions.

use std::f64::consts::PI;

use crate::error::Result;

/// Interpolant on `[breaks[0], breaks[last]]` made of one Chebyshev
/// expansion per panel.
#[derive(Debug, Clone)]
pub struct PiecewiseChebyshev<const M: usize> {
    breaks: Vec<f64>,
    // coeffs[panel][k][component]
    coeffs: Vec<Vec<[f64; M]>>,
}

impl<const M: usize> PiecewiseChebyshev<M> {
    /// Samples `f` at `points` Chebyshev (first-kind) nodes of every panel.
    pub fn build<F>(breaks: &[f64], points: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(f64) -> Result<[f64; M]>,
    {
        assert!(breaks.len() >= 2 && points >= 2);
        let mut coeffs = Vec::with_capacity(breaks.len() - 1);
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            let mut samples = Vec::with_capacity(points);
            for j in 0..points {
                let theta = PI * (j as f64 + 0.5) / points as f64;
                samples.push(f(mid + half * theta.cos())?);
            }
            let mut c = vec![[0.0; M]; points];
            for (k, ck) in c.iter_mut().enumerate() {
                for (j, s) in samples.iter().enumerate() {
                    let w = (PI * k as f64 * (j as f64 + 0.5) / points as f64).cos();
                    for m in 0..M {
                        ck[m] += s[m] * w;
                    }
                }
                let norm = if k == 0 { 1.0 } else { 2.0 } / points as f64;
                for v in ck.iter_mut() {
                    *v *= norm;
                }
            }
            coeffs.push(c);
        }
        Ok(Self {
            breaks: breaks.to_vec(),
            coeffs,
        })
    }

    pub fn lower(&self) -> f64 {
        self.breaks[0]
    }

    pub fn upper(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    fn panel(&self, x: f64) -> usize {
        let n = self.breaks.len() - 1;
        match self.breaks[1..n].iter().position(|&b| x < b) {
            Some(i) => i,
            None => n - 1,
        }
    }

    /// Value and x-derivative of every component at `x`.
    pub fn eval_with_derivative(&self, x: f64) -> ([f64; M], [f64; M]) {
        let p = self.panel(x);
        let (a, b) = (self.breaks[p], self.breaks[p + 1]);
        let half = 0.5 * (b - a);
        let z = (x - 0.5 * (a + b)) / half;
        let c = &self.coeffs[p];
        let n = c.len();
        // Clenshaw for the series and for its derivative, using
        // T_k' = k U_{k-1}.
        let mut b1 = [0.0; M];
        let mut b2 = [0.0; M];
        let mut d1 = [0.0; M];
        let mut d2 = [0.0; M];
        for k in (1..n).rev() {
            for m in 0..M {
                let bk = 2.0 * z * b1[m] - b2[m] + c[k][m];
                b2[m] = b1[m];
                b1[m] = bk;
                // derivative series: Σ k c_k U_{k-1}(z)
                let dk = 2.0 * z * d1[m] - d2[m] + k as f64 * c[k][m];
                d2[m] = d1[m];
                d1[m] = dk;
            }
        }
        let mut val = [0.0; M];
        let mut der = [0.0; M];
        for m in 0..M {
            val[m] = z * b1[m] - b2[m] + c[0][m];
            // Σ_{k≥1} k c_k U_{k-1}(z), Clenshaw with U recurrence: result is d1.
            der[m] = d1[m] / half;
        }
        (val, der)
    }

    pub fn eval(&self, x: f64) -> [f64; M] {
        self.eval_with_derivative(x).0
    }
}
