//! The wave smoothing inequality (1_R * G_r)(y) <= r 1_{R+r}(y) on random
//! configurations in d = 1 and d = 2.

use pamham::covariance::wave_smoothing_bound;
use rand::{Rng, SeedableRng};

fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    for dim in [1usize, 2] {
        let mut worst_margin = f64::INFINITY;
        let mut violations = 0usize;
        let trials = 1000;
        for _ in 0..trials {
            let r_ball = rng.random_range(0.2..4.0);
            let r_time = rng.random_range(0.05..1.5);
            let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-6.0..6.0)).collect();
            let (lhs, rhs, holds) = wave_smoothing_bound(dim, r_ball, r_time, &y);
            if !holds {
                violations += 1;
            }
            if rhs > 0.0 {
                worst_margin = worst_margin.min(rhs - lhs);
            }
        }
        println!(
            "d = {dim}: {violations}/{trials} violations, smallest slack {worst_margin:.3e}"
        );
    }

    // The saturation case: full overlap gives lhs = r exactly.
    let (lhs, rhs, _) = wave_smoothing_bound(1, 3.0, 0.8, &[0.0]);
    println!("full overlap d=1: lhs = {lhs}, rhs = {rhs} (equality)");
    let (lhs2, rhs2, _) = wave_smoothing_bound(2, 5.0, 0.6, &[0.0, 0.0]);
    println!("full overlap d=2: lhs = {lhs2:.6}, rhs = {rhs2} (equality up to quadrature)");
}
