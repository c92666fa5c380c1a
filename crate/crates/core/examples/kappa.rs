//! The minimax-regret treatment probability and its directional derivative.

use regret_rules::{kappa, kappa_prime, DirectionalDerivative, KappaMode, KappaSpec};

fn main() -> regret_rules::Result<()> {
    for (lo, hi) in [(-1.0, 1.0), (-0.2, 0.6), (0.1, 0.4), (-0.5, -0.1), (0.0, 0.5)] {
        println!("kappa({lo:>5}, {hi:>4}) = {:.4}", kappa(lo, hi)?.get());
    }

    // at tau_L = 0 the derivative is one-sided: a kink in the direction
    let dl = DirectionalDerivative::linear(vec![1.0, 0.0]);
    let du = DirectionalDerivative::linear(vec![1.0, 0.0]);
    let exact = KappaSpec::new(0.0, 0.5, dl.clone(), du.clone(), KappaMode::Exact)?;
    let smooth = KappaSpec::new(0.0, 0.5, dl, du, KappaMode::Estimated { eps: 0.15 })?;
    println!("\n{:>6} {:>10} {:>10}", "b", "exact", "eps=0.15");
    for b in [-1.0, -0.25, -0.05, 0.0, 0.05, 0.25, 1.0] {
        let dir = [b, 0.0];
        println!("{b:>6} {:>10.4} {:>10.4}", kappa_prime(&exact, &dir)?, kappa_prime(&smooth, &dir)?);
    }
    println!("Lipschitz constant {:.4}", exact.lipschitz());
    Ok(())
}
