//! Formal asymptotic series of the equation for large |x|, in exact rational
//! arithmetic, plus its numerical evaluation and the slow-variable change.
//!
//! Writing y = x^{mu/2} u(z) with z = x^alpha/alpha turns the equation into
//!
//! ```text
//!   u'' + 3mu/(mu+2) u'/z + mu(mu-2)/(mu+2)^2 u/z^2 - u - 2u^3 = 0,
//! ```
//!
//! whose formal solution u = (i/sqrt 2) sum c_n z^{-2n} has real rational
//! coefficients c_n (c_0 = 1). Undoing the substitution,
//!
//! ```text
//!   y_f(x) = sqrt(x^mu) sum_n a_n alpha^{2n} x^{-(mu+2)n},   a_n = (i/sqrt 2) c_n,
//! ```
//!
//! so every a_n is purely imaginary. Two independent computations of c_n are
//! provided: the closed recurrence [`series_coefficients`] and direct power
//! matching in the u-equation [`power_matching_coefficients`]; they must (and
//! do) agree term by term as exact rationals.
//!
//! On the negative real axis (odd mu only) the same coefficients give the
//! real positive branch
//!
//! ```text
//!   y_real(x) = sqrt(|x|^mu / 2) sum_n c_n alpha^{2n} (-1)^n |x|^{-(mu+2)n},
//! ```
//!
//! which is the far-field shape of the bounded connection solution. All
//! evaluators truncate optimally (stop before the first growing term) and
//! report the first omitted term as the error estimate.

use num::bigint::Sign;
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use num_complex::Complex64;

use crate::{Error, ProblemSpec};

/// Hard cap on the coefficient table: beyond this the terms exceed f64 range
/// and no optimal truncation ever reaches that deep anyway.
pub const MAX_COEFFS: usize = 64;

fn big(n: i64) -> BigInt {
    BigInt::from(n)
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(big(n), big(d))
}

/// sigma(n) = -(2n-1)(n-1) + 3 mu (n-1)/(mu+2) - mu(mu-2)/(2(mu+2)^2).
fn sigma(mu: u32, n: usize) -> BigRational {
    let m = mu as i64;
    let n = n as i64;
    rat(-(2 * n - 1) * (n - 1), 1) + rat(3 * m * (n - 1), m + 2)
        - rat(m * (m - 2), 2 * (m + 2) * (m + 2))
}

/// Closed recurrence for the c_n:
/// c_n = sigma(n) c_{n-1} - 1/2 [ sum_{k=1}^{n-1} c_k c_{n-k}
///        + sum_{j=1}^{n-1} sum_{k=0}^{n-j} c_j c_k c_{n-j-k} ].
fn recurrence_coefficients(mu: u32, n_max: usize) -> Vec<BigRational> {
    let mut c = vec![BigRational::one()];
    for n in 1..=n_max {
        let mut pair = BigRational::zero();
        for k in 1..n {
            pair += &c[k] * &c[n - k];
        }
        let mut triple = BigRational::zero();
        for j in 1..n {
            for k in 0..=(n - j) {
                triple += &c[j] * &c[k] * &c[n - j - k];
            }
        }
        let cn = sigma(mu, n) * &c[n - 1] - (pair + triple) / rat(2, 1);
        c.push(cn);
    }
    c
}

/// Independent route: substitute u = (i/sqrt2) sum c_m z^{-2m} into the
/// slow-variable equation and match powers of z^{-2m} directly. The triple
/// convolution is taken over the table padded with c_m = 0, which isolates
/// the unknown into the exact linear term 2 c_m.
pub fn power_matching_coefficients(mu: u32, n_max: usize) -> Vec<BigRational> {
    let m_i = mu as i64;
    let mut c = vec![BigRational::one()];
    for m in 1..=n_max {
        let mm = m as i64;
        // coefficient multiplying c_{m-1} after differentiating z^{-2(m-1)}
        let b = rat((2 * mm - 2) * (2 * mm - 1), 1) - rat(3 * m_i * (2 * mm - 2), m_i + 2)
            + rat(m_i * (m_i - 2), (m_i + 2) * (m_i + 2));
        let mut padded = c.clone();
        padded.push(BigRational::zero());
        let mut conv3 = BigRational::zero();
        for j in 0..=m {
            for k in 0..=(m - j) {
                conv3 += &padded[j] * &padded[k] * &padded[m - j - k];
            }
        }
        let cm = -(b * &c[m - 1] + conv3) / rat(2, 1);
        c.push(cm);
    }
    c
}

/// Leading 60 bits of |i| as f64, plus the discarded shift.
fn shifted_f64(i: &BigInt) -> (f64, i64) {
    let mag = i.abs();
    let bits = mag.bits();
    if bits <= 60 {
        (i.to_f64().unwrap(), 0)
    } else {
        let shift = bits - 60;
        let head = (mag >> shift).to_f64().unwrap();
        let signed = if i.sign() == Sign::Minus { -head } else { head };
        (signed, shift as i64)
    }
}

fn ldexp(x: f64, e: i64) -> f64 {
    let mut x = x;
    let mut e = e;
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
        if !x.is_finite() {
            return x;
        }
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * 2f64.powi(e as i32)
}

/// Correctly scaled conversion, good to ~1 ulp even when numerator and
/// denominator individually overflow f64.
pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let (mn, sn) = shifted_f64(r.numer());
    let (md, sd) = shifted_f64(r.denom());
    ldexp(mn / md, sn - sd)
}

/// ln |r| for nonzero rationals of any size.
pub(crate) fn ln_abs_rational(r: &BigRational) -> f64 {
    if r.is_zero() {
        return f64::NEG_INFINITY;
    }
    let (mn, sn) = shifted_f64(r.numer());
    let (md, sd) = shifted_f64(r.denom());
    mn.abs().ln() - md.abs().ln() + (sn - sd) as f64 * std::f64::consts::LN_2
}

/// The coefficient table for one mu, exact and in f64.
pub struct SeriesCoeffs {
    pub mu: u32,
    /// c_0..c_n as exact rationals.
    pub exact: Vec<BigRational>,
    /// The same, rounded to f64.
    pub c: Vec<f64>,
    alpha2: f64,
}

/// One evaluation of the formal series at complex x.
#[derive(Debug, Clone, Copy)]
pub struct FormalEval {
    pub value: Complex64,
    pub derivative: Complex64,
    pub second_derivative: Complex64,
    pub terms_used: usize,
    /// Magnitude of the first omitted term.
    pub error_estimate: f64,
    /// Whether the leading correction has started to decay: |a_1/z^2| < 1.
    pub in_domain: bool,
}

/// Evaluation of the real branch on the negative axis (odd mu).
#[derive(Debug, Clone, Copy)]
pub struct RealEval {
    pub value: f64,
    pub derivative: f64,
    pub second_derivative: f64,
    pub terms_used: usize,
    pub error_estimate: f64,
    pub in_domain: bool,
}

pub fn series_coefficients(mu: u32, n_max: usize) -> Result<SeriesCoeffs, Error> {
    if mu < 1 {
        return Err(Error::Domain("mu must be a positive integer".into()));
    }
    if n_max > MAX_COEFFS {
        return Err(Error::Domain(format!(
            "coefficient table capped at {MAX_COEFFS} (requested {n_max})"
        )));
    }
    let exact = recurrence_coefficients(mu, n_max);
    let c: Vec<f64> = exact.iter().map(rational_to_f64).collect();
    let alpha = (mu as f64 + 2.0) / 2.0;
    Ok(SeriesCoeffs { mu, exact, c, alpha2: alpha * alpha })
}

impl SeriesCoeffs {
    /// c_n / sqrt 2, i.e. the imaginary part of a_n (a_n = i * a_imag(n)).
    pub fn a_imag(&self, n: usize) -> f64 {
        self.c[n] / std::f64::consts::SQRT_2
    }

    /// Evaluates y_f at x = r e^{i theta} with the angle taken literally
    /// (not reduced mod 2 pi), so distinct sheets of x^{mu/2} are reachable.
    pub fn eval_polar(&self, r: f64, theta: f64, n_cap: usize) -> Result<FormalEval, Error> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("series evaluation needs |x| > 0, got {r}")));
        }
        let mu = self.mu as f64;
        let p = mu + 2.0;
        let x = Complex64::from_polar(r, theta);
        let w = Complex64::from_polar(self.alpha2 * r.powf(-p), -p * theta);
        let pref = Complex64::from_polar(r.powf(0.5 * mu), 0.5 * mu * theta)
            * Complex64::new(0.0, 1.0 / std::f64::consts::SQRT_2);

        let cap = n_cap.min(self.c.len() - 1);
        let mut value = Complex64::new(0.0, 0.0);
        let mut deriv = Complex64::new(0.0, 0.0);
        let mut second = Complex64::new(0.0, 0.0);
        let mut wn = Complex64::new(1.0, 0.0);
        let mut prev_abs = f64::INFINITY;
        let mut terms_used = 0;
        let mut error_estimate = 0.0;
        for n in 0..=cap {
            let term = pref * self.c[n] * wn;
            let t_abs = term.norm();
            if t_abs > 0.0 && t_abs >= prev_abs {
                error_estimate = t_abs; // asymptotic tail reached: stop before it
                break;
            }
            let e = 0.5 * mu - p * n as f64;
            value += term;
            deriv += term * e / x;
            second += term * e * (e - 1.0) / (x * x);
            terms_used = n + 1;
            if t_abs > 0.0 {
                prev_abs = t_abs;
            }
            wn *= w;
            if n == cap {
                error_estimate = if n + 1 < self.c.len() {
                    (pref * self.c[n + 1] * wn).norm()
                } else {
                    t_abs
                };
            }
            if t_abs < 1e-18 * value.norm() && n >= 1 {
                error_estimate = t_abs;
                break;
            }
        }
        let in_domain = self.c[1].abs() / std::f64::consts::SQRT_2 * w.norm() < 1.0
            || self.c.iter().skip(1).all(|&ci| ci == 0.0);
        Ok(FormalEval { value, derivative: deriv, second_derivative: second, terms_used, error_estimate, in_domain })
    }

    /// Evaluates y_f at complex x on the principal sheet.
    pub fn eval_complex(&self, x: Complex64, n_cap: usize) -> Result<FormalEval, Error> {
        self.eval_polar(x.norm(), x.arg(), n_cap)
    }

    /// The angle (+-pi) at which [`Self::eval_polar`] reproduces the real
    /// positive branch of [`Self::eval_real_negative`]. Odd mu only.
    pub fn real_branch_angle(&self) -> f64 {
        if self.mu % 4 == 1 {
            -std::f64::consts::PI
        } else {
            std::f64::consts::PI
        }
    }

    /// Real positive branch on the negative axis, odd mu.
    pub fn eval_real_negative(&self, x: f64, n_cap: usize) -> Result<RealEval, Error> {
        if self.mu % 2 == 0 {
            return Err(Error::Domain(format!(
                "no real formal branch on the negative axis for even mu = {}",
                self.mu
            )));
        }
        if !(x < 0.0) {
            return Err(Error::Domain(format!("real branch lives on x < 0, got {x}")));
        }
        let t = -x;
        let mu = self.mu as f64;
        let p = mu + 2.0;
        let w = -self.alpha2 * t.powf(-p);
        let pref = t.powf(0.5 * mu) / std::f64::consts::SQRT_2;

        let cap = n_cap.min(self.c.len() - 1);
        let mut value = 0.0;
        let mut d_dt = 0.0;
        let mut d2_dt2 = 0.0;
        let mut wn = 1.0;
        let mut prev_abs = f64::INFINITY;
        let mut terms_used = 0;
        let mut error_estimate = 0.0;
        for n in 0..=cap {
            let term = pref * self.c[n] * wn;
            let t_abs = term.abs();
            if t_abs > 0.0 && t_abs >= prev_abs {
                error_estimate = t_abs;
                break;
            }
            let e = 0.5 * mu - p * n as f64;
            value += term;
            d_dt += term * e / t;
            d2_dt2 += term * e * (e - 1.0) / (t * t);
            terms_used = n + 1;
            if t_abs > 0.0 {
                prev_abs = t_abs;
            }
            wn *= w;
            if n == cap {
                error_estimate = if n + 1 < self.c.len() {
                    (pref * self.c[n + 1] * wn).abs()
                } else {
                    t_abs
                };
            }
            if t_abs < 1e-18 * value.abs() && n >= 1 {
                error_estimate = t_abs;
                break;
            }
        }
        let in_domain = self.c[1].abs() / std::f64::consts::SQRT_2 * w.abs() < 1.0
            || self.c.iter().skip(1).all(|&ci| ci == 0.0);
        Ok(RealEval {
            value,
            derivative: -d_dt,       // d/dx = -d/dt
            second_derivative: d2_dt2,
            terms_used,
            error_estimate,
            in_domain,
        })
    }

    /// ln of the exact truncation gap sqrt(t^mu/2) |S_N(t) - S_ref(t)| on the
    /// negative axis at integer distance t, evaluated in rational arithmetic
    /// so gaps far below f64 resolution keep full relative accuracy.
    pub fn truncation_gap_ln(&self, n_trunc: usize, n_ref: usize, t: i64) -> f64 {
        assert!(n_ref < self.exact.len() && n_trunc < n_ref && t > 0);
        let m2 = self.mu as i64 + 2;
        // w = -alpha^2 t^{-(mu+2)} = -(mu+2)^2 / (4 t^{mu+2})
        let w = BigRational::new(big(-m2 * m2), big(4) * big(t).pow(m2 as u32));
        let mut wn = BigRational::one();
        let mut gap = BigRational::zero();
        for n in 0..=n_ref {
            if n > n_trunc {
                gap += &self.exact[n] * &wn;
            }
            wn *= &w;
        }
        let mu = self.mu as f64;
        ln_abs_rational(&gap) + 0.5 * (mu * (t as f64).ln() - std::f64::consts::LN_2)
    }
}

/// Slow ("Boutroux") variables of a real phase-space point, x > 0:
/// z = x^alpha/alpha, u = y x^{-mu/2}, du/dz as stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoutrouxState {
    pub z: f64,
    pub u: f64,
    pub du: f64,
}

pub fn boutroux_forward(spec: &ProblemSpec, x: f64, y: f64, yp: f64) -> Result<BoutrouxState, Error> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!(
            "slow-variable transform is singular at x <= 0 (got {x})"
        )));
    }
    let mu = spec.mu as f64;
    Ok(BoutrouxState {
        z: spec.z_of_x(x),
        u: y * x.powf(-0.5 * mu),
        du: yp * x.powf(-mu) - 0.5 * mu * x.powf(-mu - 1.0) * y,
    })
}

pub fn boutroux_inverse(spec: &ProblemSpec, b: &BoutrouxState) -> Result<(f64, f64, f64), Error> {
    if !(b.z > 0.0) {
        return Err(Error::Domain(format!("slow variable must satisfy z > 0 (got {})", b.z)));
    }
    let mu = spec.mu as f64;
    let x = (spec.alpha * b.z).powf(1.0 / spec.alpha);
    let y = x.powf(0.5 * mu) * b.u;
    let yp = 0.5 * mu * x.powf(0.5 * mu - 1.0) * b.u + x.powf(mu) * b.du;
    Ok((x, y, yp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit;

    #[test]
    fn hand_verified_low_orders() {
        let s = series_coefficients(1, 3).unwrap();
        assert_eq!(s.exact[0], BigRational::one());
        assert_eq!(s.exact[1], rat(1, 18));
        assert_eq!(s.exact[2], rat(-73, 648));
        assert_eq!(s.exact[3], rat(10657, 11664));
        // The classical normalization: the n=1,2 terms of the real branch are
        // -(1/8) t^{-3} and -(73/128) t^{-6}.
        let a1 = rational_to_f64(&s.exact[1]) * 2.25;
        assert!((a1 - 0.125).abs() < 1e-15);
        let a2 = rational_to_f64(&s.exact[2]) * 2.25 * 2.25;
        assert!((a2 + 73.0 / 128.0).abs() < 1e-15);
    }

    #[test]
    fn recurrence_and_power_matching_agree_exactly() {
        for mu in 1..=5u32 {
            let a = recurrence_coefficients(mu, 8);
            let b = power_matching_coefficients(mu, 8);
            for n in 0..=8 {
                assert_eq!(a[n], b[n], "mu={mu} n={n}");
            }
        }
    }

    #[test]
    fn mu_two_series_terminates() {
        let s = series_coefficients(2, 10).unwrap();
        for n in 1..=10 {
            assert!(s.exact[n].is_zero(), "c_{n} nonzero for mu=2");
        }
        // y_f = i x / sqrt 2 solves the equation exactly for mu = 2.
        let x = Complex64::new(1.7, 0.4);
        let e = s.eval_complex(x, 10).unwrap();
        let want = Complex64::new(0.0, 1.0 / std::f64::consts::SQRT_2) * x;
        assert!((e.value - want).norm() < 1e-15 * want.norm());
        assert!(e.error_estimate == 0.0);
        assert!(e.in_domain);
    }

    #[test]
    fn branch_coherence_on_negative_axis() {
        for &mu in &[1u32, 3] {
            let s = series_coefficients(mu, 12).unwrap();
            let r = s.eval_real_negative(-12.0, 12).unwrap();
            let at = |theta: f64| s.eval_polar(12.0, theta, 12).unwrap();
            let own = at(s.real_branch_angle());
            assert!((own.value.re - r.value).abs() < 1e-12 * r.value.abs(), "mu={mu}");
            assert!(own.value.im.abs() < 1e-12 * r.value.abs());
            assert!((own.derivative.re - r.derivative).abs() < 1e-12 * r.derivative.abs());
            // The opposite sheet flips the sign of x^{mu/2} for odd mu.
            let other = at(-s.real_branch_angle());
            assert!((other.value.re + r.value).abs() < 1e-12 * r.value.abs());
        }
    }

    #[test]
    fn real_branch_rejects_even_mu_and_positive_x() {
        let s = series_coefficients(2, 4).unwrap();
        assert!(s.eval_real_negative(-5.0, 4).is_err());
        let s = series_coefficients(1, 4).unwrap();
        assert!(s.eval_real_negative(5.0, 4).is_err());
    }

    #[test]
    fn optimal_truncation_error_estimate_is_honest() {
        let s = series_coefficients(1, 20).unwrap();
        let coarse = s.eval_real_negative(-8.0, 3).unwrap();
        let fine = s.eval_real_negative(-8.0, 20).unwrap();
        let diff = (coarse.value - fine.value).abs();
        assert!(coarse.terms_used == 4);
        assert!(
            (diff - coarse.error_estimate).abs() < 0.4 * coarse.error_estimate,
            "diff={diff:e} est={:e}",
            coarse.error_estimate
        );
    }

    #[test]
    fn domain_flag_tracks_leading_correction() {
        let s = series_coefficients(1, 8).unwrap();
        // |a_1| alpha^2 r^{-3} = 1 at r ~ 0.445
        assert!(!s.eval_polar(0.40, 0.0, 8).unwrap().in_domain);
        assert!(s.eval_polar(0.50, 0.0, 8).unwrap().in_domain);
        assert!(s.eval_polar(10.0, 2.0, 8).unwrap().in_domain);
    }

    #[test]
    fn exact_gap_matches_f64_where_f64_still_resolves() {
        let s = series_coefficients(1, 12).unwrap();
        let y1 = s.eval_real_negative(-10.0, 1).unwrap().value;
        let y12 = s.eval_real_negative(-10.0, 12).unwrap().value;
        let ln_f64 = (y1 - y12).abs().ln();
        let ln_exact = s.truncation_gap_ln(1, 12, 10);
        assert!((ln_f64 - ln_exact).abs() < 1e-9, "{ln_f64} vs {ln_exact}");
    }

    #[test]
    fn ode_residual_slope_of_first_truncation() {
        // Residual of y_1 in y'' - 2y^3 - x y decays like t^{3mu/2-(mu+2)(N+1)}
        // = t^{-4.5} for mu=1, N=1.
        let s = series_coefficients(1, 2).unwrap();
        let mut lt = Vec::new();
        let mut lr = Vec::new();
        for i in 0..12 {
            let t = 10.0 * (10.0f64).powf(i as f64 / 11.0);
            let e = s.eval_real_negative(-t, 1).unwrap();
            let r = e.second_derivative - 2.0 * e.value.powi(3) - (-t) * e.value;
            lt.push(t.ln());
            lr.push(r.abs().ln());
        }
        let (slope, _) = fit::line(&lt, &lr);
        assert!((slope + 4.5).abs() < 0.05 * 4.5, "slope {slope}");
    }

    #[test]
    fn boutroux_round_trip() {
        let spec = ProblemSpec::new(3).unwrap();
        let (x, y, yp) = (2.3, 0.7, -0.2);
        let b = boutroux_forward(&spec, x, y, yp).unwrap();
        let (x2, y2, yp2) = boutroux_inverse(&spec, &b).unwrap();
        assert!((x - x2).abs() < 1e-12 && (y - y2).abs() < 1e-12 && (yp - yp2).abs() < 1e-12);
        assert!(boutroux_forward(&spec, 0.0, 1.0, 1.0).is_err());
        assert!(boutroux_forward(&spec, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn big_rational_conversions() {
        let huge = BigRational::new(big(10).pow(250u32), big(1));
        assert!((rational_to_f64(&huge) - 1e250).abs() < 1e236);
        let tiny = BigRational::new(big(1), big(10).pow(250u32));
        assert!((rational_to_f64(&tiny) - 1e-250).abs() < 1e-264);
        let mixed = BigRational::new(big(2).pow(200u32), big(3).pow(126u32));
        let want = 200.0 * std::f64::consts::LN_2 - 126.0 * 3f64.ln();
        assert!((ln_abs_rational(&mixed) - want).abs() < 1e-10);
        assert!((rational_to_f64(&mixed) - want.exp()).abs() < 1e-13 * want.exp());
        let neg = rat(-7, 4);
        assert_eq!(rational_to_f64(&neg), -1.75);
        assert!((ln_abs_rational(&neg) - 1.75f64.ln()).abs() < 1e-14);
    }
}
