//! Below the connection constant the decaying solutions cross zero and then
//! oscillate: y ~ c1 |x|^{-mu/4} sin(z(|x|) - c2) as x -> -inf, with
//! z = |x|^alpha / alpha. The example traces one such solution, fits the
//! asymptote, and checks the energy identity V' = -mu x^{mu-1} y^2 along it.
//!
//!     cargo run --release -p p2mu --example oscillatory

use p2mu::connection::{energy_residual, energy_series, fit_oscillatory, trace_k, ShootingOutcome};
use p2mu::ode::Trajectory;
use p2mu::ProblemSpec;

fn main() {
    let spec = ProblemSpec::new(1).expect("mu = 1");
    let k = 0.1; // well below k* = 0.2821: oscillatory regime

    let (outcome, traj) = trace_k(&spec, k, -60.0, 0.02).expect("trace to x = -60");
    match outcome {
        ShootingOutcome::SignCross { x_zero } => {
            println!("k = {k}: first zero at x = {x_zero:.6} (oscillatory branch)")
        }
        other => println!("k = {k}: unexpected outcome {other:?}"),
    }

    // Fit the asymptotic form on the tail |x| >= 10.
    let tail = Trajectory {
        samples: traj.samples.iter().filter(|s| s.x.re <= -10.0).cloned().collect(),
    };
    let (c1, c2, residual) = fit_oscillatory(&spec, &tail).expect("oscillatory tail");
    println!("asymptote y ~ c1 |x|^(-1/4) sin(z - c2):");
    println!("  c1 = {c1:.8}, c2 = {c2:.8}, relative fit residual = {residual:.2e}");

    // Envelope exponent, measured independently from the peaks: at a local
    // extremum |y| ~ c1 |x|^p with p = -mu/4.
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    let s = &tail.samples;
    for w in s.windows(3) {
        let (a, b, c) = (w[0].y.re.abs(), w[1].y.re.abs(), w[2].y.re.abs());
        if b > a && b > c {
            peaks.push(((-w[1].x.re).ln(), b.ln()));
        }
    }
    let n = peaks.len() as f64;
    let (sx, sy) = peaks.iter().fold((0.0, 0.0), |(p, q), &(x, y)| (p + x, q + y));
    let (sxx, sxy) = peaks
        .iter()
        .fold((0.0, 0.0), |(p, q), &(x, y)| (p + x * x, q + x * y));
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    println!(
        "  envelope exponent from {} peaks: {slope:.4} (predicted -mu/4 = {:.4})",
        peaks.len(),
        -0.25 * spec.mu as f64
    );

    // Zero spacing is pi in the phase variable z = |x|^alpha / alpha.
    let mut zeros = Vec::new();
    for w in s.windows(2) {
        let (y0, y1) = (w[0].y.re, w[1].y.re);
        if y0 * y1 < 0.0 {
            let t = y0 / (y0 - y1);
            let x = w[0].x.re + t * (w[1].x.re - w[0].x.re);
            zeros.push(spec.z_of_x(-x));
        }
    }
    let gaps: Vec<f64> = zeros.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    let worst = gaps
        .iter()
        .map(|g| (g / std::f64::consts::PI - 1.0).abs())
        .fold(0.0, f64::max);
    println!(
        "  {} zeros on the tail; z-spacing in [{:.6}, {:.6}], worst |gap/pi - 1| = {:.2e}",
        zeros.len(),
        gaps.iter().cloned().fold(f64::INFINITY, f64::min),
        gaps.iter().cloned().fold(0.0, f64::max),
        worst
    );

    // Energy identity: V = y'^2 - x^mu y^2 - y^4 obeys V' = -mu x^{mu-1} y^2
    // exactly along solutions; the residual is pure integration error.
    let records = energy_series(&spec, &traj).expect("real trajectory");
    let (worst_resid, scale) = energy_residual(&records);
    println!(
        "energy identity: max |dV/dx + mu x^(mu-1) y^2| = {:.2e} (scale max|V'| = {:.2e}, ratio {:.1e})",
        worst_resid,
        scale,
        worst_resid / scale
    );
}
