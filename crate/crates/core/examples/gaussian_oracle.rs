//! Closed-form Gaussian criteria next to a small Monte Carlo check.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use regret_rules::gauss::{expected_min_zero, f_obj, g_sup_s};

fn main() -> regret_rules::Result<()> {
    let sd = 1.0;
    println!("{:>5} {:>10} {:>10}", "w", "regret", "sq-error");
    for i in 0..=8 {
        let w = -2.0 + 0.5 * i as f64;
        println!("{w:>5} {:>10.5} {:>10.5}", f_obj(w, 0.0, sd)?.max(0.0), g_sup_s(w, sd)?);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let normal = Normal::new(0.3, 1.2).unwrap();
    let draws = 200_000;
    let mc = (0..draws).map(|_| f64::min(normal.sample(&mut rng), 0.0)).sum::<f64>() / draws as f64;
    println!("\nE[min(X, 0)], X ~ N(0.3, 1.44): closed {:.5}, simulated {mc:.5}", expected_min_zero(0.3, 1.2)?);
    Ok(())
}
