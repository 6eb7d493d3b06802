//! The tritronquée-type solution: pole-free in the maximal sector
//! |arg x| <= 2pi/(mu+2). A fan of rays is seeded from the formal series at
//! r_far and integrated inward; adjacent rays are cross-checked against each
//! other, and the discrete rotation symmetry Y_n(x) = w Y(w x) is exact.
//!
//!     cargo run --release -p p2mu --example tritronquee_fan

use p2mu::tritronquee::{build_tritronquee, rotate_solution, SectorSpec};
use p2mu::ProblemSpec;
use std::f64::consts::PI;

fn main() {
    for mu in [1u32, 3] {
        let spec = ProblemSpec::new(mu).expect("mu >= 1");
        let sector = SectorSpec::default_for(&spec);
        let t0 = std::time::Instant::now();
        let fan = build_tritronquee(&spec, &sector, 9).expect("default fan");
        println!(
            "mu = {mu}: fan of {} rays over |theta| <= {:.4}, r in [{}, {}] ({:.2?})",
            fan.rays.len(),
            sector.half_width,
            sector.r_in,
            sector.r_far,
            t0.elapsed()
        );
        for ray in &fan.rays {
            let inner = ray
                .trajectory
                .samples
                .iter()
                .min_by(|a, b| a.x.norm().total_cmp(&b.x.norm()))
                .expect("nonempty ray");
            println!(
                "  theta = {:+.4}: {} samples, y({:.1} e^(i theta)) = {:+.6} {:+.6}i",
                ray.theta,
                ray.trajectory.samples.len(),
                inner.x.norm(),
                inner.y.re,
                inner.y.im
            );
        }
        println!(
            "  pole events: {}, worst adjacent-ray cross-check: {:.2e}",
            fan.pole_events.len(),
            fan.worst_cross_check()
        );

        // Rotation symmetry: n = mu+2 returns every ray to itself.
        let back = rotate_solution(&spec, &fan, (mu + 2) as i32);
        let mut worst = 0.0f64;
        for (a, b) in fan.rays.iter().zip(back.rays.iter()) {
            for (sa, sb) in a.trajectory.samples.iter().zip(b.trajectory.samples.iter()) {
                worst = worst.max((sa.y - sb.y).norm() / sa.y.norm().max(1e-300));
            }
        }
        println!("  rotation by n = mu+2 = {}: max sample deviation {:.2e}", mu + 2, worst);
        println!();
    }

    // Push the fan past the guaranteed sector and the movable poles appear;
    // each is localized by a Newton hunt on 1/y and reported with its
    // residue sign. The pair is symmetric under complex conjugation.
    let spec = ProblemSpec::new(1).unwrap();
    let mut sector = SectorSpec::default_for(&spec);
    sector.margin = -0.5;
    sector.half_width = 2.0 * PI / 3.0 + 0.5;
    let fan = build_tritronquee(&spec, &sector, 9).expect("fan still completes");
    println!("oversized sector (margin -0.5, mu = 1): {} pole events", fan.pole_events.len());
    for p in &fan.pole_events {
        println!(
            "  ray theta = {:+.4}: pole at x0 = {:.6} {:+.6}i, residue sign {:+.0}, fit quality {:.1e}",
            p.ray_theta, p.event.x0.re, p.event.x0.im, p.event.residue_sign, p.event.quality
        );
    }
}
