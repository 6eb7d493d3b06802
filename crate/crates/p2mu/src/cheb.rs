//! Chebyshev–Lobatto interpolation with spectral antiderivatives.
//!
//! The integral-equation seed in `connection` needs cumulative integrals
//! `x -> int_x^X w(t) dt` of smooth integrands at every grid point per Picard
//! sweep. Fitting the integrand once on a Lobatto grid and integrating the
//! Chebyshev series termwise gives all of them simultaneously with spectral
//! accuracy, instead of one adaptive quadrature per grid point.

/// A finite Chebyshev series `sum_k c[k] T_k(t)` on `[lo, hi]`,
/// `t = (2x - lo - hi)/(hi - lo)`.
#[derive(Debug, Clone)]
pub struct ChebSeries {
    pub lo: f64,
    pub hi: f64,
    pub c: Vec<f64>,
}

/// The n+1 Chebyshev–Lobatto abscissae on `[lo, hi]`, ordered from `hi`
/// down to `lo` (j = 0 maps to t = +1).
pub fn lobatto_nodes(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    (0..=n)
        .map(|j| mid + half * (std::f64::consts::PI * j as f64 / n as f64).cos())
        .collect()
}

/// Interpolates values sampled on `lobatto_nodes(n, lo, hi)` (same order).
pub fn fit(lo: f64, hi: f64, values: &[f64]) -> ChebSeries {
    let n = values.len() - 1;
    assert!(n >= 1);
    let nf = n as f64;
    let mut c = vec![0.0; n + 1];
    for (k, ck) in c.iter_mut().enumerate() {
        let kf = k as f64;
        let mut acc = 0.5 * (values[0] + if k % 2 == 0 { values[n] } else { -values[n] });
        for (j, vj) in values.iter().enumerate().take(n).skip(1) {
            acc += vj * (std::f64::consts::PI * kf * j as f64 / nf).cos();
        }
        *ck = 2.0 * acc / nf;
    }
    // Fold the trapezoidal halving into the stored coefficients so that
    // eval() is a plain Clenshaw sum.
    c[0] *= 0.5;
    c[n] *= 0.5;
    ChebSeries { lo, hi, c }
}

impl ChebSeries {
    pub fn eval(&self, x: f64) -> f64 {
        let t = (2.0 * x - self.lo - self.hi) / (self.hi - self.lo);
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &ck in self.c.iter().rev() {
            let b0 = 2.0 * t * b1 - b2 + ck;
            b2 = b1;
            b1 = b0;
        }
        // Clenshaw with the k=0 term folded into the loop: S = b0 - t*b1.
        b1 - t * b2
    }

    /// The series of `x -> int_x^hi self(t) dt` (spectral cumulative
    /// integral anchored at the right endpoint).
    pub fn cumulative_from_right(&self) -> ChebSeries {
        let n = self.c.len() - 1;
        let half = 0.5 * (self.hi - self.lo);
        let get = |k: usize| -> f64 { if k <= n { self.c[k] } else { 0.0 } };
        let mut b = vec![0.0; n + 2];
        for k in 1..=n + 1 {
            let prev = if k == 1 { 2.0 * get(0) } else { get(k - 1) };
            b[k] = half * (prev - get(k + 1)) / (2.0 * k as f64);
        }
        // Negate (we integrate from x to hi, not hi to x) and pin C(hi) = 0.
        for bk in b.iter_mut() {
            *bk = -*bk;
        }
        let at_one: f64 = b.iter().sum();
        b[0] -= at_one;
        ChebSeries { lo: self.lo, hi: self.hi, c: b }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_eval_round_trip() {
        let (lo, hi) = (0.0, 3.0);
        let xs = lobatto_nodes(48, lo, hi);
        let vals: Vec<f64> = xs.iter().map(|&x| (x).exp() * (2.0 * x).sin()).collect();
        let s = fit(lo, hi, &vals);
        for i in 0..=60 {
            let x = lo + (hi - lo) * i as f64 / 60.0;
            let want = x.exp() * (2.0 * x).sin();
            assert!((s.eval(x) - want).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn cumulative_integral_of_exponential() {
        let (lo, hi) = (0.5, 4.0);
        let xs = lobatto_nodes(40, lo, hi);
        let vals: Vec<f64> = xs.iter().map(|&x| (-x).exp()).collect();
        let cum = fit(lo, hi, &vals).cumulative_from_right();
        assert!(cum.eval(hi).abs() < 1e-14);
        for i in 0..=20 {
            let x = lo + (hi - lo) * i as f64 / 20.0;
            let want = (-x).exp() - (-hi).exp();
            assert!((cum.eval(x) - want).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn cumulative_integral_of_polynomial_is_exact() {
        let (lo, hi) = (-1.0, 2.0);
        let xs = lobatto_nodes(8, lo, hi);
        let vals: Vec<f64> = xs.iter().map(|&x| 3.0 * x * x - x + 1.0).collect();
        let cum = fit(lo, hi, &vals).cumulative_from_right();
        let anti = |x: f64| x.powi(3) - 0.5 * x * x + x;
        for i in 0..=10 {
            let x = lo + (hi - lo) * i as f64 / 10.0;
            let want = anti(hi) - anti(x);
            assert!((cum.eval(x) - want).abs() < 1e-13 * want.abs().max(1.0), "x={x}");
        }
    }
}
