//! Small optimizers used by the estimators: BFGS with backtracking for
//! smooth unconstrained problems and Brent's method for bracketed roots.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-10,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsResult<const D: usize> {
    pub x: [f64; D],
    pub value: f64,
    pub grad: [f64; D],
    pub iterations: usize,
    pub converged: bool,
}

fn norm<const D: usize>(v: &[f64; D]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const FLAT_TOL: f64 = 1e-13;

/// Minimizes `f`, which returns the value and gradient, starting at `x0`.
///
/// A non-finite value is treated as infeasible and shortens the step.
pub fn bfgs<const D: usize, F>(mut f: F, x0: [f64; D], opts: &BfgsOptions) -> Result<BfgsResult<D>>
where
    F: FnMut(&[f64; D]) -> Result<(f64, [f64; D])>,
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() {
        return Err(Error::InvalidParameter("objective not finite at the starting point".into()));
    }
    // inverse Hessian approximation
    let mut h = [[0.0; D]; D];
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut iterations = 0;
    let mut stalled = 0;
    while iterations < opts.max_iter {
        if norm(&g) <= opts.grad_tol {
            return Ok(BfgsResult {
                x,
                value: fx,
                grad: g,
                iterations,
                converged: true,
            });
        }
        iterations += 1;
        let mut p = [0.0; D];
        for i in 0..D {
            p[i] = -dot(&h[i], &g);
        }
        let mut slope = dot(&p, &g);
        if slope >= 0.0 {
            // lost descent direction: restart from steepest descent
            for (i, row) in h.iter_mut().enumerate() {
                *row = [0.0; D];
                row[i] = 1.0;
            }
            p = g.map(|v| -v);
            slope = dot(&p, &g);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut xn = x;
            for i in 0..D {
                xn[i] += step * p[i];
            }
            let (fn_, gn) = f(&xn)?;
            // Near the optimum value changes drop below roundoff (objectives
            // formed as differences of O(1) sums); a smaller gradient at an
            // equal value is then accepted as progress.
            let flat = fn_ - fx <= FLAT_TOL * (1.0 + fx.abs()) && norm(&gn) < norm(&g);
            if fn_.is_finite() && (fn_ <= fx + 1e-4 * step * slope || flat) {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            // no decrease representable in floating point
            return Ok(BfgsResult {
                x,
                value: fx,
                grad: g,
                iterations,
                converged: false,
            });
        };
        stalled = if fn_ < fx || norm(&gn) < 0.5 * norm(&g) { 0 } else { stalled + 1 };
        if stalled >= 5 {
            // the gradient is resolved only down to its noise floor
            return Ok(BfgsResult {
                x: xn,
                value: fn_,
                grad: gn,
                iterations,
                converged: norm(&gn) <= opts.grad_tol,
            });
        }
        let mut s = [0.0; D];
        let mut y = [0.0; D];
        for i in 0..D {
            s[i] = xn[i] - x[i];
            y[i] = gn[i] - g[i];
        }
        let sy = dot(&s, &y);
        if sy > 1e-14 * norm(&s) * norm(&y) {
            if iterations == 1 {
                let scale = sy / dot(&y, &y);
                for (i, row) in h.iter_mut().enumerate() {
                    *row = [0.0; D];
                    row[i] = scale;
                }
            }
            let rho = 1.0 / sy;
            let mut hy = [0.0; D];
            for i in 0..D {
                hy[i] = dot(&h[i], &y);
            }
            let yhy = dot(&y, &hy);
            for i in 0..D {
                for j in 0..D {
                    h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        x = xn;
        fx = fn_;
        g = gn;
    }
    Ok(BfgsResult {
        x,
        value: fx,
        grad: g,
        iterations,
        converged: norm(&g) <= opts.grad_tol,
    })
}

/// Root of `f` in `[a, b]` where `fa` and `fb` have opposite signs.
///
/// Stops when `|f| ≤ f_tol` or the bracket is narrower than `x_tol`;
/// returns the abscissa with the smallest `|f|` seen.
pub fn brent_root<F>(mut f: F, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, x_tol: f64, f_tol: f64, max_iter: usize) -> Result<(f64, f64, usize)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if fa * fb > 0.0 {
        return Err(Error::Bracket(format!("f({a})={fa:e} and f({b})={fb:e} have the same sign")));
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for it in 0..max_iter {
        if fb.abs() <= f_tol {
            return Ok((b, fb, it));
        }
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * x_tol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol {
            return Ok((b, fb, it));
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Ok((b, fb, max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bfgs_rosenbrock() {
        let r = bfgs(
            |x: &[f64; 2]| {
                let (a, b) = (x[0], x[1]);
                let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
                let g = [-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
                Ok((v, g))
            },
            [-1.2, 1.0],
            &BfgsOptions::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-8 && (r.x[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn brent_finds_cos_root() {
        let (x, _, _) = brent_root(|x| Ok(x.cos()), 1.0, 2.0, 1f64.cos(), 2f64.cos(), 1e-14, 0.0, 100).unwrap();
        assert!((x - std::f64::consts::FRAC_PI_2).abs() < 1e-13);
    }

    #[test]
    fn brent_rejects_unbracketed() {
        assert!(brent_root(|x| Ok(x * x + 1.0), -1.0, 1.0, 2.0, 2.0, 1e-12, 0.0, 50).is_err());
    }
}
