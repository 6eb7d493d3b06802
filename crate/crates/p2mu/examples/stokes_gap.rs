//! The Stokes gap: on a ray arg x = theta inside the sector, the
//! tritronquée-type solution differs from its lateral rotated branch
//! -Y1(x) = -w Y0(w x), w = e^{-2 pi i/(mu+2)}, by an exponentially small
//! amount invisible to the formal series (the two branches share it to all
//! orders). The gap |Y0 - w conj(Y0)| rides the linearized mode e^{i sqrt(2) z},
//! so it decays like e^{-sqrt(2) sin(alpha theta) |z|} with z = r^alpha/alpha:
//! the slope of ln(gap) against r^alpha is -2 sqrt(2) sin(alpha theta)/(mu+2).
//!
//!     cargo run --release -p p2mu --example stokes_gap

use p2mu::tritronquee::stokes_gap;
use p2mu::ProblemSpec;

fn main() {
    for mu in [1u32, 3] {
        let spec = ProblemSpec::new(mu).expect("mu >= 1");
        // Window fixed in z so every mu spans the same exponential decade;
        // for mu = 1 this is r in [4, 9].
        let r_of_z = |z: f64| (spec.alpha * z).powf(1.0 / spec.alpha);
        let (r_lo, r_hi) = (r_of_z(16.0 / 3.0), r_of_z(18.0));

        let t0 = std::time::Instant::now();
        let fit = stokes_gap(&spec, None, r_lo, r_hi).expect("gap measurable on the default ray");
        println!(
            "mu = {mu}: ray theta = {:.6}, r in [{r_lo:.3}, {r_hi:.3}] ({:.2?})",
            fit.ray_angle,
            t0.elapsed()
        );
        println!("{:>8} {:>9} {:>13} {:>13}  {}", "r", "z", "gap", "noise floor", "used");
        for p in &fit.points {
            println!(
                "{:>8.3} {:>9.3} {:>13.4e} {:>13.1e}  {}",
                p.r,
                spec.z_of_x(p.r),
                p.gap,
                p.noise_floor,
                if p.used { "yes" } else { "no (below 100x floor)" }
            );
        }
        println!(
            "  ln(gap) ~ slope * r^alpha: fitted {:.6}, predicted -2 sqrt(2) sin(alpha theta)/(mu+2) = {:.6} ({:+.2}%)",
            fit.slope,
            fit.expected_slope,
            (fit.slope / fit.expected_slope - 1.0) * 100.0
        );
        println!(
            "  prefactor exponent p (gap ~ r^p e^(slope r^alpha)): {:.3}, fit residual {:.1e}",
            fit.prefactor_exponent, fit.fit_residual
        );
        println!();
    }
}
