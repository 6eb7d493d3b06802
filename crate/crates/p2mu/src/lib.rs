//! Distinguished solutions of the perturbed second Painlevé equation
//!
//! ```text
//!     y''(x) = 2 y(x)^3 + x^mu y(x),        mu = 1, 2, 3, ...
//! ```
//!
//! The crate constructs and cross-validates the objects that organize the
//! global behaviour of this equation:
//!
//! * [`specfun`] — the generalized Airy pair `f`, `g` (recessive/dominant
//!   solutions of the linearization `phi'' = x^mu phi`) built from
//!   fractional-order modified Bessel functions, with analytic derivatives.
//! * [`series`] — the formal large-`x` series `y_f` in Boutroux variables:
//!   exact rational coefficient recurrence, optimal truncation, and the
//!   real-valued reorganization on the negative axis for odd `mu`.
//! * [`ode`] — adaptive Dormand–Prince integration of the equation along
//!   straight segments in the complex plane, with movable-pole detection.
//! * [`connection`] — the Hastings–McLeod-type connection problem: decaying
//!   solutions `y ~ k f` seeded through a Picard-iterated integral equation,
//!   shooting classification, and double-double bisection for `k*`.
//! * [`tritronquee`] — the pole-free solution in the maximal sector
//!   `|arg x| <= 2pi/(mu+2)`: a fan of rays seeded from the series, the
//!   discrete rotation symmetry, and the exponentially small Stokes gap.
//! * [`electrodiffusion`] — the two-ion transport model whose induced
//!   electric field reduces to this equation with `mu = 2`.
//!
//! Every major capability has a runnable example:
//!
//! ```text
//! cargo run --release -p p2mu --example gen_airy
//! cargo run --release -p p2mu --example formal_series
//! cargo run --release -p p2mu --example hastings_mcleod
//! cargo run --release -p p2mu --example oscillatory
//! cargo run --release -p p2mu --example tritronquee_fan
//! cargo run --release -p p2mu --example stokes_gap
//! cargo run --release -p p2mu --example electrodiffusion
//! ```
//!
//! The same operations are exposed as a thin command-line tool (`p2mu`) with
//! deterministic CSV/JSON outputs; see `p2mu --help`.

pub mod cheb;
pub mod cli;
pub mod connection;
pub mod dd;
pub mod electrodiffusion;
pub(crate) mod fit;
pub mod ode;
pub mod quad;
pub mod rk;
pub mod series;
pub mod specfun;
pub mod tritronquee;

pub use num_complex::Complex64;

use serde::{Deserialize, Serialize};

/// The equation parameter `mu` together with the derived constants that
/// appear everywhere downstream: `alpha = (mu+2)/2` and the Bessel order
/// `nu = 1/(2 alpha) = 1/(mu+2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub mu: u32,
    pub alpha: f64,
    pub nu: f64,
}

impl ProblemSpec {
    pub fn new(mu: u32) -> Result<Self, Error> {
        if mu < 1 {
            return Err(Error::Domain("mu must be a positive integer".into()));
        }
        let alpha = (mu as f64 + 2.0) / 2.0;
        Ok(ProblemSpec { mu, alpha, nu: 0.5 / alpha })
    }

    /// `z(x) = x^alpha / alpha`, the argument shared by the Bessel kernels
    /// and the Boutroux variable `z = (2/(mu+2)) x^{(mu+2)/2}`.
    pub fn z_of_x(&self, x: f64) -> f64 {
        x.powf(self.alpha) / self.alpha
    }

    /// Complex branch of `z(x)` evaluated from polar data `x = r e^{i theta}`
    /// with the angle taken literally (no reduction mod 2 pi), so callers can
    /// track analytic continuation across the principal branch cut.
    pub fn z_of_polar(&self, r: f64, theta: f64) -> Complex64 {
        Complex64::from_polar(r.powf(self.alpha) / self.alpha, self.alpha * theta)
    }

    /// Principal-branch complex `z(x)`.
    pub fn z_of_complex(&self, x: Complex64) -> Complex64 {
        self.z_of_polar(x.norm(), x.arg())
    }
}

/// Coarse error taxonomy shared by the library and the CLI exit-code
/// contract: bad inputs, proven nonexistence, and numerical breakdown.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// CLI contract: 2 domain error, 3 nonexistence, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) => 2,
            Error::NoSolution(_) => 3,
            Error::Numerical(_) => 4,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_constants() {
        let s = ProblemSpec::new(1).unwrap();
        assert_eq!(s.alpha, 1.5);
        assert!((s.nu - 1.0 / 3.0).abs() < 1e-16);
        let s = ProblemSpec::new(2).unwrap();
        assert_eq!(s.alpha, 2.0);
        assert_eq!(s.nu, 0.25);
        assert!(ProblemSpec::new(0).is_err());
    }

    #[test]
    fn z_matches_boutroux_form() {
        // z = (2/(mu+2)) x^{(mu+2)/2} is the same thing as x^alpha/alpha.
        let s = ProblemSpec::new(3).unwrap();
        let x: f64 = 2.7;
        let direct = 2.0 / 5.0 * x.powf(2.5);
        assert!((s.z_of_x(x) - direct).abs() < 1e-14 * direct);
    }

    #[test]
    fn polar_branch_is_unreduced() {
        let s = ProblemSpec::new(1).unwrap();
        // A full turn in x is NOT the identity for z when tracked continuously.
        let a = s.z_of_polar(2.0, 0.1);
        let b = s.z_of_polar(2.0, 0.1 + 2.0 * std::f64::consts::PI);
        assert!((a - b).norm() > 1.0);
    }
}
