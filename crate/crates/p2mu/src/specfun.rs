//! Fractional-order modified Bessel functions and the generalized Airy pair.
//!
//! The linearization of the equation, `phi'' = x^mu phi`, is solved by
//!
//! ```text
//!   f(x) = sqrt(2x/(pi a)) K_nu(z),   g(x) = sqrt(2 pi x / a) I_nu(z),
//!   z = x^a / a,   a = (mu+2)/2,   nu = 1/(2a),
//! ```
//!
//! normalized so that the Wronskian f g' - f' g is exactly 2. `f` decays
//! like `x^{-mu/4} e^{-z}` and `g` grows like the reciprocal, so for large
//! `x` the pair is only representable in scaled form: [`GenAiryValue`]
//! stores `f e^{+z}` and `g e^{-z}` together with `ln_scale = z`, and the
//! unscaled accessors simply underflow/overflow where f64 must.
//!
//! Evaluation strategy per kernel (all branches meet in overlap bands that
//! the tests pin to ~1e-12 agreement):
//!
//! * `I`: ascending series for z <= 30, large-z asymptotics beyond.
//! * `K`: reflection through `I_{±nu}` only for z <= 2 — the subtraction
//!   loses a factor e^{2z} of precision, so pushing it further would quietly
//!   shed digits — then the defining Laplace integral on 2 < z < 30 by
//!   adaptive quadrature, and asymptotics from 30 up.
//!
//! Derivatives use the analytic recurrences `K_nu' = -K_{1-nu} - (nu/z) K_nu`
//! and `I_nu' = I_{nu-1} - (nu/z) I_nu`, never finite differences.

use crate::{quad, Error, ProblemSpec};

/// Lanczos approximation (g = 7, 9 terms), good to ~1e-14 relative for the
/// small positive arguments used here; pinned against an independent
/// arbitrary-precision table in the tests.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
];

pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection keeps the rational part of Lanczos in its sweet spot.
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        let xr = x - 1.0;
        let mut acc = LANCZOS[0];
        for (i, c) in LANCZOS.iter().enumerate().skip(1) {
            acc += c / (xr + i as f64);
        }
        let t = xr + LANCZOS_G + 0.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(xr + 0.5) * (-t).exp() * acc
    }
}

// Crossovers between evaluation branches.
const K_REFLECT_MAX: f64 = 2.0;
const ASYMPT_MIN: f64 = 30.0;

/// Ascending series for I_s(z), any s > -1. Unscaled (safe for z <= ~700;
/// only called for z <= ASYMPT_MIN).
fn bessel_i_series(s: f64, z: f64) -> f64 {
    let q = 0.25 * z * z;
    let mut term = (0.5 * z).powf(s) / gamma(1.0 + s);
    let mut sum = term;
    for k in 1..400 {
        let kf = k as f64;
        term *= q / (kf * (kf + s));
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

/// Truncated asymptotic sums S∓(s, z) = sum_k (∓1)^k a_k(s) / z^k with
/// a_k = a_{k-1} (4s^2 - (2k-1)^2) / (8k). Truncation at the smallest term.
fn asymptotic_sums(s: f64, z: f64) -> (f64, f64) {
    let fs = 4.0 * s * s;
    let mut term = 1.0;
    let mut s_minus = 1.0; // alternating
    let mut s_plus = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        term *= (fs - (2.0 * kf - 1.0).powi(2)) / (8.0 * kf * z);
        if term.abs() >= prev {
            break; // divergent tail reached
        }
        prev = term.abs();
        s_plus += term;
        s_minus += if k % 2 == 0 { term } else { -term };
        if term.abs() < 1e-19 {
            break;
        }
    }
    (s_minus, s_plus)
}

/// I_s(z) e^{-z} for s > -1, z > 0.
pub(crate) fn bessel_i_scaled(s: f64, z: f64) -> f64 {
    if z <= ASYMPT_MIN {
        bessel_i_series(s, z) * (-z).exp()
    } else {
        let (s_minus, s_plus) = asymptotic_sums(s, z);
        (s_minus - (s * std::f64::consts::PI).sin() * (-2.0 * z).exp() * s_plus)
            / (2.0 * std::f64::consts::PI * z).sqrt()
    }
}

/// K_s(z) e^{+z} for |s| < 2, z > 0.
pub(crate) fn bessel_k_scaled(s: f64, z: f64) -> f64 {
    let s = s.abs(); // K is even in the order
    if z <= K_REFLECT_MAX {
        let spi = (s * std::f64::consts::PI).sin();
        let k = std::f64::consts::PI * (bessel_i_series(-s, z) - bessel_i_series(s, z))
            / (2.0 * spi);
        k * z.exp()
    } else if z < ASYMPT_MIN {
        // K_s(z) e^z = int_0^T exp(-2 z sinh^2(t/2)) cosh(s t) dt with the
        // tail beyond exp(-50) dropped.
        let t_max = (1.0 + 50.0 / z).acosh();
        let r = quad::integrate(
            |t| {
                let sh = (0.5 * t).sinh();
                (-2.0 * z * sh * sh).exp() * (s * t).cosh()
            },
            0.0,
            t_max,
            1e-14,
            1e-18,
        );
        r.value
    } else {
        let (_, s_plus) = asymptotic_sums(s, z);
        (std::f64::consts::PI / (2.0 * z)).sqrt() * s_plus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselKind {
    I,
    K,
}

/// Unscaled modified Bessel function of fractional order `nu in (0,1)`.
///
/// For very large `z` the unscaled values saturate f64 (I overflows, K
/// underflows); the generalized Airy layer works in scaled form throughout
/// and does not have this restriction.
pub fn modified_bessel(kind: BesselKind, nu: f64, z: f64) -> Result<f64, Error> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("bessel argument must be positive, got {z}")));
    }
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::Domain(format!("bessel order must lie in (0,1), got {nu}")));
    }
    Ok(match kind {
        BesselKind::I => bessel_i_scaled(nu, z) * z.exp(),
        BesselKind::K => bessel_k_scaled(nu, z) * (-z).exp(),
    })
}

/// The basis pair at one abscissa, in scaled form.
///
/// `f_scaled = f e^{+z}`, `fp_scaled = f' e^{+z}`, `g_scaled = g e^{-z}`,
/// `gp_scaled = g' e^{-z}` with `ln_scale = z = x^alpha/alpha`. Note the
/// cancellation `f g' - f' g = f_scaled*gp_scaled - fp_scaled*g_scaled`:
/// the Wronskian is directly computable from scaled parts at any x.
#[derive(Debug, Clone, Copy)]
pub struct GenAiryValue {
    pub x: f64,
    pub ln_scale: f64,
    pub f_scaled: f64,
    pub fp_scaled: f64,
    pub g_scaled: f64,
    pub gp_scaled: f64,
}

impl GenAiryValue {
    pub fn f(&self) -> f64 {
        self.f_scaled * (-self.ln_scale).exp()
    }
    pub fn fp(&self) -> f64 {
        self.fp_scaled * (-self.ln_scale).exp()
    }
    pub fn g(&self) -> f64 {
        self.g_scaled * self.ln_scale.exp()
    }
    pub fn gp(&self) -> f64 {
        self.gp_scaled * self.ln_scale.exp()
    }
    /// f g' - f' g, which the normalization fixes at exactly 2.
    pub fn wronskian(&self) -> f64 {
        self.f_scaled * self.gp_scaled - self.fp_scaled * self.g_scaled
    }
    pub fn ln_f(&self) -> f64 {
        self.f_scaled.ln() - self.ln_scale
    }
    pub fn ln_g(&self) -> f64 {
        self.g_scaled.ln() + self.ln_scale
    }
}

/// Evaluates the pair and its analytic derivatives at `x > 0`.
pub fn gen_airy(spec: &ProblemSpec, x: f64) -> Result<GenAiryValue, Error> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!(
            "gen_airy needs x > 0 (got {x}); the negative axis is reached by integration"
        )));
    }
    let nu = spec.nu;
    let alpha = spec.alpha;
    let z = spec.z_of_x(x);
    let zp = x.powf(alpha - 1.0); // dz/dx

    let k_nu = bessel_k_scaled(nu, z);
    let k_num1 = bessel_k_scaled(1.0 - nu, z); // = K_{nu-1} by evenness
    let i_nu = bessel_i_scaled(nu, z);
    let i_num1 = bessel_i_scaled(nu - 1.0, z);

    let pref_f = (2.0 * x / (std::f64::consts::PI * alpha)).sqrt();
    let pref_g = (2.0 * std::f64::consts::PI * x / alpha).sqrt();

    // d/dx [pref(x) * W(z(x))] with W' from the Bessel recurrences.
    let kp = -k_num1 - (nu / z) * k_nu;
    let ip = i_num1 - (nu / z) * i_nu;

    Ok(GenAiryValue {
        x,
        ln_scale: z,
        f_scaled: pref_f * k_nu,
        fp_scaled: pref_f * (k_nu / (2.0 * x) + zp * kp),
        g_scaled: pref_g * i_nu,
        gp_scaled: pref_g * (i_nu / (2.0 * x) + zp * ip),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ProblemSpec;

    // Frozen oracle values (arbitrary-precision evaluation, 40 digits
    // internally, computed before this module was written).
    const GAMMA_ORACLE: [(f64, f64); 8] = [
        (0.05, 19.470085311255513),
        (0.33333333333333333, 2.6789385347077476),
        (0.5, 1.7724538509055160),
        (0.66666666666666667, 1.3541179394264004),
        (0.95, 1.0314533171290322),
        (1.25, 0.90640247705547708),
        (1.8, 0.93138377098024270),
        (2.5, 1.3293403881791370),
    ];

    // (order, z, I, K) spanning the series/integral/asymptotic branches and
    // sitting on both sides of each crossover.
    const BESSEL_IK_ORACLE: [(f64, f64, f64, f64); 12] = [
        (0.33333333333333333, 0.5, 0.73897315642511932, 0.98903107424672429),
        (0.33333333333333333, 1.9, 2.0038208046953498, 0.13198019660027830),
        (0.33333333333333333, 2.1, 2.3278511007020476, 0.10303290398593388),
        (0.25, 7.0, 167.77825239592717, 0.00042657748660774813),
        (0.2, 14.9, 307946.92907045498, 1.0902215956490587e-7),
        (0.2, 15.1, 373590.53894558771, 8.8674474772622334e-8),
        (0.33333333333333333, 25.0, 5761474759.6213647, 3.4717201424907064e-12),
        (0.45, 3.0, 4.6621647200685858, 0.035778194523107435),
        (0.05, 9.0, 1093.4267778017041, 5.0888027970084000e-5),
        (0.9, 4.0, 10.031116782331592, 0.012221094352070209),
        (0.9, 0.3, 0.19078546801325943, 2.6465344452414208),
        (0.16666666666666667, 12.0, 18925.998102161525, 2.2032763245060411e-6),
    ];

    // (mu, x, f, f', g, g')
    const GEN_AIRY_ORACLE: [(u32, f64, f64, f64, f64, f64); 5] = [
        (1, 1.0, 0.47959912858415784, -0.56416299037652136, 1.7247575715616384, 2.1412791424057677),
        (2, 4.0, 0.00016588541752686422, -0.00068340800104725992, 1509.3341567789948, 5838.4213358987443),
        (3, 2.0, 0.059506435320581727, -0.18812305572839622, 6.0610231270242704, 14.448551721704941),
        (5, 1.3, 0.31632735237783029, -0.84665950905175977, 1.5729114504235540, 2.1126202289465327),
        (3, 0.35, 1.2259549364672314, -1.0596441802606787, 0.43807402161499496, 1.2527356159582055),
    ];

    #[test]
    fn gamma_against_oracle() {
        for &(x, want) in GAMMA_ORACLE.iter() {
            let got = gamma(x);
            assert!((got - want).abs() < 2e-14 * want, "gamma({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn half_integer_closed_forms() {
        let k = modified_bessel(BesselKind::K, 0.5, 1.0).unwrap();
        let want_k = (std::f64::consts::PI / 2.0f64).sqrt() * (-1.0f64).exp();
        assert!((k - want_k).abs() < 1e-14);
        let i = modified_bessel(BesselKind::I, 0.5, 1.0).unwrap();
        let want_i = (2.0 / std::f64::consts::PI).sqrt() * 1.0f64.sinh();
        assert!((i - want_i).abs() < 1e-14);
    }

    #[test]
    fn bessel_against_oracle() {
        for &(s, z, i_want, k_want) in BESSEL_IK_ORACLE.iter() {
            let i_got = modified_bessel(BesselKind::I, s, z).unwrap();
            let k_got = modified_bessel(BesselKind::K, s, z).unwrap();
            assert!(
                (i_got - i_want).abs() < 1e-13 * i_want,
                "I_{s}({z}) = {i_got:e}, want {i_want:e}"
            );
            assert!(
                (k_got - k_want).abs() < 1e-13 * k_want,
                "K_{s}({z}) = {k_got:e}, want {k_want:e}"
            );
        }
    }

    #[test]
    fn branch_overlap_agreement() {
        // Reflection vs Laplace integral around the z=2 crossover.
        for &z in &[1.6, 1.8, 2.0, 2.3, 2.6] {
            for &s in &[0.2, 1.0 / 3.0, 0.45, 0.8] {
                let spi = (s * std::f64::consts::PI).sin();
                let refl = std::f64::consts::PI
                    * (bessel_i_series(-s, z) - bessel_i_series(s, z))
                    / (2.0 * spi)
                    * z.exp();
                let t_max = (1.0f64 + 50.0 / z).acosh();
                let integ = quad::integrate(
                    |t| {
                        let sh = (0.5 * t).sinh();
                        (-2.0 * z * sh * sh).exp() * (s * t).cosh()
                    },
                    0.0,
                    t_max,
                    1e-14,
                    1e-18,
                )
                .value;
                assert!((refl - integ).abs() < 1e-11 * integ, "K s={s} z={z}");
            }
        }
        // Integral/series vs asymptotics around z=30.
        for &z in &[27.0, 30.0, 33.0] {
            for &s in &[0.25, 1.0 / 3.0, -0.6] {
                let series = bessel_i_series(s, z) * (-z).exp();
                let (s_minus, s_plus) = asymptotic_sums(s, z);
                let asym = (s_minus
                    - (s * std::f64::consts::PI).sin() * (-2.0 * z).exp() * s_plus)
                    / (2.0 * std::f64::consts::PI * z).sqrt();
                assert!((series - asym).abs() < 1e-11 * series.abs(), "I s={s} z={z}");
            }
            let s = 1.0 / 3.0;
            let t_max = (1.0f64 + 50.0 / z).acosh();
            let integ = quad::integrate(
                |t| {
                    let sh = (0.5 * t).sinh();
                    (-2.0 * z * sh * sh).exp() * (s * t).cosh()
                },
                0.0,
                t_max,
                1e-14,
                1e-18,
            )
            .value;
            let (_, s_plus) = asymptotic_sums(s, z);
            let asym = (std::f64::consts::PI / (2.0 * z)).sqrt() * s_plus;
            assert!((integ - asym).abs() < 1e-12 * asym, "K s={s} z={z}");
        }
    }

    #[test]
    fn gen_airy_against_oracle() {
        for &(mu, x, f, fp, g, gp) in GEN_AIRY_ORACLE.iter() {
            let spec = ProblemSpec::new(mu).unwrap();
            let v = gen_airy(&spec, x).unwrap();
            assert!((v.f() - f).abs() < 1e-12 * f.abs(), "mu={mu} x={x} f");
            assert!((v.fp() - fp).abs() < 1e-12 * fp.abs(), "mu={mu} x={x} fp");
            assert!((v.g() - g).abs() < 1e-12 * g.abs(), "mu={mu} x={x} g");
            assert!((v.gp() - gp).abs() < 1e-12 * gp.abs(), "mu={mu} x={x} gp");
        }
    }

    #[test]
    fn wronskian_identity_scaled() {
        // Includes x large enough that unscaled g overflows (mu=5, x=20).
        for &mu in &[1u32, 2, 3, 5] {
            let spec = ProblemSpec::new(mu).unwrap();
            for i in 0..50 {
                let x = 0.1 * (200.0f64).powf(i as f64 / 49.0);
                let v = gen_airy(&spec, x).unwrap();
                let w = v.wronskian();
                let scale = (v.f_scaled * v.gp_scaled).abs().max(1.0);
                assert!((w - 2.0).abs() <= 1e-10 * scale, "mu={mu} x={x} w={w}");
            }
        }
    }

    #[test]
    fn monotone_f_down_g_up() {
        for &mu in &[1u32, 3] {
            let spec = ProblemSpec::new(mu).unwrap();
            let mut prev_lnf = f64::INFINITY;
            let mut prev_lng = f64::NEG_INFINITY;
            for i in 0..=40 {
                let x = 1.0 + 19.0 * i as f64 / 40.0;
                let v = gen_airy(&spec, x).unwrap();
                assert!(v.ln_f() < prev_lnf, "f not decreasing at x={x} mu={mu}");
                assert!(v.ln_g() > prev_lng, "g not increasing at x={x} mu={mu}");
                prev_lnf = v.ln_f();
                prev_lng = v.ln_g();
            }
        }
    }

    #[test]
    fn decay_normalization() {
        // f(x) x^{mu/4} e^{z} -> 1, error ~ |a1(nu)|/z.
        let spec = ProblemSpec::new(3).unwrap();
        let mut prev = f64::INFINITY;
        for &x in &[6.0, 9.0, 14.0] {
            let v = gen_airy(&spec, x).unwrap();
            let dev = (v.f_scaled * x.powf(spec.mu as f64 / 4.0) - 1.0).abs();
            assert!(dev < prev && dev < 5e-3, "x={x} dev={dev}");
            prev = dev;
        }
    }

    #[test]
    fn f_has_finite_positive_limit_at_origin() {
        // For mu=1 the limit is 2 sqrt(pi) Ai(0) = 2 sqrt(pi) 3^{-2/3}/Gamma(2/3).
        let spec = ProblemSpec::new(1).unwrap();
        let want = 2.0 * std::f64::consts::PI.sqrt()
            / (3.0f64.powf(2.0 / 3.0) * gamma(2.0 / 3.0));
        for &x in &[1e-5, 1e-7] {
            let v = gen_airy(&spec, x).unwrap();
            assert!((v.f() - want).abs() < 1e-4 * want, "x={x} f={}", v.f());
        }
        assert!(gen_airy(&spec, 0.0).is_err());
        assert!(gen_airy(&spec, -1.0).is_err());
    }

    #[test]
    fn satisfies_linear_ode_via_second_derivative_identities() {
        // phi'' = x^mu phi checked with phi'' assembled from the Bessel ODE
        // w'' = ((z^2+s^2) w - z w') / z^2 and the chain rule — independent
        // of how the first-derivative recurrences were coded.
        for &mu in &[1u32, 3, 5] {
            let spec = ProblemSpec::new(mu).unwrap();
            for &x in &[0.5, 1.0, 2.0, 5.0, 10.0] {
                let nu = spec.nu;
                let alpha = spec.alpha;
                let z = spec.z_of_x(x);
                let zp = x.powf(alpha - 1.0);
                let zpp = (alpha - 1.0) * x.powf(alpha - 2.0);
                let p = (2.0 * x / (std::f64::consts::PI * alpha)).sqrt();
                let pp = p / (2.0 * x);
                let ppp = -p / (4.0 * x * x);

                let w = bessel_k_scaled(nu, z);
                let wp = -bessel_k_scaled(1.0 - nu, z) - (nu / z) * w;
                let wpp = ((z * z + nu * nu) * w - z * wp) / (z * z);
                let fpp = ppp * w + 2.0 * pp * wp * zp + p * (wpp * zp * zp + wp * zpp);
                let f = p * w;
                let resid = (fpp - x.powf(mu as f64) * f).abs() / (x.powf(mu as f64) * f).abs();
                assert!(resid < 1e-8, "f: mu={mu} x={x} resid={resid:e}");

                let w = bessel_i_scaled(nu, z);
                let wp = bessel_i_scaled(nu - 1.0, z) - (nu / z) * w;
                let wpp = ((z * z + nu * nu) * w - z * wp) / (z * z);
                let gpp = ppp * w + 2.0 * pp * wp * zp + p * (wpp * zp * zp + wp * zpp);
                let g = p * w;
                let resid = (gpp - x.powf(mu as f64) * g).abs() / (x.powf(mu as f64) * g).abs();
                assert!(resid < 1e-8, "g: mu={mu} x={x} resid={resid:e}");
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(modified_bessel(BesselKind::K, 0.5, 0.0).is_err());
        assert!(modified_bessel(BesselKind::K, 0.5, -1.0).is_err());
        assert!(modified_bessel(BesselKind::K, 1.5, 1.0).is_err());
        assert!(modified_bessel(BesselKind::I, 0.0, 1.0).is_err());
    }
}
