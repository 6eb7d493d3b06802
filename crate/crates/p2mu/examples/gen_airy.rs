//! The generalized Airy pair `f`, `g`: recessive/dominant solutions of the
//! linearization `phi'' = x^mu phi`, normalized so that `f g' - f' g = 2`.
//!
//!     cargo run --release -p p2mu --example gen_airy

use p2mu::specfun::gen_airy;
use p2mu::ProblemSpec;

fn main() {
    for mu in [1u32, 2, 3, 5] {
        let spec = ProblemSpec::new(mu).expect("mu >= 1");
        println!("mu = {mu} (alpha = {}, nu = {:.6})", spec.alpha, spec.nu);
        println!(
            "{:>8}  {:>13}  {:>13}  {:>13}  {:>13}  {:>9}",
            "x", "f", "f'", "g", "g'", "W/2 - 1"
        );
        for x in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let v = gen_airy(&spec, x).expect("x > 0");
            println!(
                "{x:>8.3}  {:>13.6e}  {:>13.6e}  {:>13.6e}  {:>13.6e}  {:>9.1e}",
                v.f(),
                v.fp(),
                v.g(),
                v.gp(),
                0.5 * v.wronskian() - 1.0
            );
        }

        // Both members approach the same WKB envelope as z = x^alpha/alpha
        // grows: f ~ sqrt(x/(alpha z)) e^{-z}, g ~ sqrt(x/(alpha z)) e^{+z}.
        // The scaled fields carry f e^{+z} and g e^{-z} directly, so the
        // envelope is visible even where e^z overflows (see ln_f/ln_g).
        let x = 12.0;
        let v = gen_airy(&spec, x).expect("x > 0");
        let z = spec.z_of_x(x);
        let wkb = (x / (spec.alpha * z)).sqrt();
        println!(
            "  WKB at x = {x} (z = {z:.2}): f e^z / sqrt(x/(a z)) - 1 = {:+.1e},  g e^-z / sqrt(x/(a z)) - 1 = {:+.1e}",
            v.f_scaled / wkb - 1.0,
            v.g_scaled / wkb - 1.0
        );
        if !v.g().is_finite() || v.f() == 0.0 {
            println!("  (raw f/g out of f64 range here: ln f = {:.3}, ln g = {:.3})", v.ln_f(), v.ln_g());
        }
        println!();
    }

    // mu = 1 is the classical case: f(x) = 2 sqrt(pi) Ai(x).
    let spec = ProblemSpec::new(1).unwrap();
    let ai_1 = 0.135_292_416_312_881_42; // Ai(1)
    let f_1 = gen_airy(&spec, 1.0).unwrap().f();
    println!(
        "Airy reduction at mu = 1: f(1) = {f_1:.15e}, 2 sqrt(pi) Ai(1) = {:.15e} (rel dev {:.1e})",
        2.0 * std::f64::consts::PI.sqrt() * ai_1,
        (f_1 / (2.0 * std::f64::consts::PI.sqrt() * ai_1) - 1.0).abs()
    );
}
