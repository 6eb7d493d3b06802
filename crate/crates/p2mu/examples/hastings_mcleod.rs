//! The Hastings-McLeod-type connection problem: among the solutions decaying
//! like k f(x) as x -> +inf, exactly one (odd mu) stays positive and bounded
//! on the whole real line; its coefficient k* is found by bisection between
//! blow-up (k too large) and a sign crossing (k too small).
//!
//!     cargo run --release -p p2mu --example hastings_mcleod

use p2mu::connection::{classify_k, find_kstar, ShootingOutcome};
use p2mu::series::series_coefficients;
use p2mu::ProblemSpec;

fn main() {
    for mu in [1u32, 3] {
        let spec = ProblemSpec::new(mu).expect("mu >= 1");
        let t0 = std::time::Instant::now();
        let r = find_kstar(&spec, (0.05, 1.0), 1e-8).expect("odd mu has a connection constant");
        println!("mu = {mu}: k* = {:.12} ({} shots, {:.2?})", r.k_star, r.history.len(), t0.elapsed());
        println!(
            "  final bracket [{:.12}, {:.12}], width {:.1e}",
            r.bracket.0,
            r.bracket.1,
            r.bracket.1 - r.bracket.0
        );

        if mu == 1 {
            // Classical anchor: f = 2 sqrt(pi) Ai, so k* = 1/(2 sqrt(pi)) from
            // the Hastings-McLeod normalization y ~ Ai.
            let k_ref = 0.5 / std::f64::consts::PI.sqrt();
            println!("  1/(2 sqrt(pi)) = {k_ref:.12}, deviation {:+.2e}", r.k_star - k_ref);
        }

        // The accepted trajectory runs from the seed anchor down to x_left and
        // lands on the real branch of the formal series.
        let c = series_coefficients(mu, 48).unwrap();
        let y_series = c.eval_real_negative(r.x_left, 48).unwrap().value;
        let left = r
            .hm_trajectory
            .samples
            .iter()
            .min_by(|a, b| a.x.re.total_cmp(&b.x.re))
            .unwrap();
        println!(
            "  y({:.4}) = {:.8}, series branch {:.8} (rel dev {:.1e})",
            r.x_left,
            left.y.re,
            y_series,
            ((left.y.re - y_series) / y_series).abs()
        );
        let y_min = r.hm_trajectory.samples.iter().map(|s| s.y.re).fold(f64::INFINITY, f64::min);
        println!("  positivity: min y on [{:.4}, {:.4}] = {:.3e}", r.x_left, r.x_start, y_min);
        println!();
    }

    // Even mu: no such solution exists. Every k > 0 ends at a movable pole.
    let spec = ProblemSpec::new(2).unwrap();
    println!("mu = 2: every decaying seed blows up");
    for k in [0.01, 0.3, 10.0] {
        match classify_k(&spec, k, -6.0).unwrap() {
            ShootingOutcome::Blowup { x0 } => println!("  k = {k:<5}: pole at x = {x0:.6}"),
            other => println!("  k = {k:<5}: unexpected {other:?}"),
        }
    }
    let err = find_kstar(&spec, (0.05, 1.0), 1e-6).unwrap_err();
    println!("  find_kstar: {err}");
}
