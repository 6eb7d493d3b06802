//! The formal large-x series y_f in Boutroux variables: exact rational
//! coefficients, optimal truncation, and the real-valued branch on the
//! negative axis for odd mu.
//!
//!     cargo run --release -p p2mu --example formal_series

use p2mu::series::series_coefficients;

fn main() {
    // a_n = i q_n / sqrt(2); the recurrence is exact in rational arithmetic.
    for mu in [1u32, 2, 3] {
        let c = series_coefficients(mu, 6).expect("small n");
        println!("mu = {mu}: a_n = i q_n / sqrt(2)");
        for n in 0..=6 {
            println!("  q_{n} = {:>24}   Im a_{n} = {:+.12e}", c.exact[n].to_string(), c.a_imag(n));
        }
        println!();
    }

    // Optimal truncation: the terms of the divergent series shrink down to
    // an exponentially small floor and then grow again. eval_polar stops at
    // the smallest term and reports its size as the error estimate.
    let c = series_coefficients(1, 64).unwrap();
    println!("optimal truncation along arg x = 0.3 (mu = 1):");
    println!("{:>6}  {:>10}  {:>13}  {:>21}", "r", "terms", "est. error", "y_f");
    for r in [3.0, 5.0, 8.0, 12.0, 20.0] {
        let e = c.eval_polar(r, 0.3, 64).expect("in asymptotic domain");
        println!(
            "{r:>6.1}  {:>10}  {:>13.3e}  {:>9.6} {:+.6}i",
            e.terms_used, e.error_estimate, e.value.re, e.value.im
        );
    }
    println!();

    // Real branch on the negative axis (odd mu only): all-imaginary a_n
    // against z^2 < 0 reorganizes into a real series with leading term
    // sqrt(|x|^mu / 2). The truncated series nearly satisfies the equation;
    // the defect shrinks with each extra term until the divergent tail bites.
    let c3 = series_coefficients(3, 48).unwrap();
    let x = -4.0;
    println!("real branch at x = {x} (mu = 3), leading term sqrt(|x|^3/2) = {:.6}:", (32.0f64).sqrt());
    println!("{:>6}  {:>18}  {:>13}", "N", "y_f(x)", "ODE residual");
    for n_cap in [0usize, 2, 4, 8, 16] {
        let e = c3.eval_real_negative(x, n_cap).expect("odd mu, x < 0");
        let resid = e.second_derivative - 2.0 * e.value.powi(3) - x.powi(3) * e.value;
        println!("{n_cap:>6}  {:>18.12}  {:>13.3e}", e.value, resid.abs());
    }

    // The same number is reachable through the complex evaluation on the
    // principal branch: Re y_f(r e^{i pi}) equals the real branch.
    let e_complex = c3.eval_polar(4.0, std::f64::consts::PI, 12).unwrap();
    let e_real = c3.eval_real_negative(x, 12).unwrap();
    println!(
        "branch coherence: complex eval {:.12} {:+.1e}i vs real branch {:.12}",
        e_complex.value.re, e_complex.value.im, e_real.value
    );
}
