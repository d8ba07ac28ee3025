use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::SparseMat;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerResult {
    pub rho: f64,
    /// Positive, `max = 1`.
    pub vector: Vec<f64>,
    /// Collatz-Wielandt bounds on the spectral radius.
    pub cw: Interval,
    pub iterations: usize,
    /// Enclosure after every iteration, for diagnostics and tests.
    pub history: Vec<Interval>,
}

/// Perron root of an entrywise nonnegative irreducible matrix.
///
/// Starts from the all-ones vector and stops once the Collatz-Wielandt
/// width is at most `tol * (1 + rho)`.
///
/// Iterates with `B + αI`, `α = ‖B‖∞`, so eigenvalues near `-ρ` (bipartite
/// stencils) cannot stall convergence. Enclosures are measured on `B`.
pub fn power_iteration(b: &SparseMat, tol: f64, max_iter: usize) -> Result<PowerResult> {
    power_iteration_until(b, max_iter, |cw, rho| cw.width() <= tol * (1.0 + rho.abs()))
}

/// Power iteration with a caller-supplied stopping rule on (enclosure, estimate).
pub fn power_iteration_until<F>(b: &SparseMat, max_iter: usize, done: F) -> Result<PowerResult>
where
    F: Fn(&Interval, f64) -> bool,
{
    if !b.is_square() {
        return Err(Error::DimMismatch {
            expected: b.n_rows(),
            got: b.n_cols(),
        });
    }
    if let Some((row, col, value)) = b.triplets().find(|(_, _, v)| *v < 0.0) {
        return Err(Error::NotNonnegative { row, col, value });
    }
    let n = b.n_rows();
    let alpha = (0..n)
        .map(|i| b.row(i).1.iter().sum::<f64>())
        .fold(0.0f64, f64::max);
    let mut v = vec![1.0; n];
    let mut bv = vec![0.0; n];
    let mut history = Vec::new();
    let mut last = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
    };
    for it in 1..=max_iter.max(1) {
        b.matvec_into(&v, &mut bv);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            let r = bv[i] / v[i];
            lo = lo.min(r);
            hi = hi.max(r);
            num += v[i] * bv[i];
            den += v[i] * v[i];
        }
        // Monotone by theory; keep the tightest enclosure seen so far.
        let cw = Interval {
            lo: lo.max(last.lo),
            hi: hi.min(last.hi),
        };
        let rho = (num / den).clamp(cw.lo, cw.hi);
        history.push(cw);
        last = cw;
        let scale = bv
            .iter()
            .zip(&v)
            .fold(0.0f64, |m, (x, y)| m.max(x + alpha * y));
        if scale <= 0.0 || !scale.is_finite() {
            return Err(Error::NoConvergence {
                iterations: it,
                width: f64::INFINITY,
            });
        }
        let converged = done(&cw, rho);
        if converged {
            return Ok(PowerResult {
                rho,
                vector: v,
                cw,
                iterations: it,
                history,
            });
        }
        for i in 0..n {
            v[i] = (bv[i] + alpha * v[i]) / scale;
        }
        if v.iter().any(|x| !(*x > 0.0)) {
            // lost positivity to underflow: reducible or badly scaled input
            return Err(Error::NoConvergence {
                iterations: it,
                width: cw.width(),
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        width: last.width(),
    })
}
