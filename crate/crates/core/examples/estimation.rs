//! Draw a participation sample, estimate the cell means and their covariance,
//! and compare with the bootstrap.

use regret_rules::estimate::{boot_g, ex2_sample, ex2_theta_hat, theta_path};
use regret_rules::SeededStream;

fn main() -> regret_rules::Result<()> {
    let n = 2_000;
    let theta = theta_path(0.5, n)?;
    let sample = ex2_sample(&theta, 0.5, n, SeededStream::new(3, 0))?;
    let est = ex2_theta_hat(&sample)?;
    println!("truth     {:?}", theta.values());
    println!("estimate  {:?}", est.theta_hat.values());
    println!("cells     {:?}", est.counts);

    let boot = boot_g(&sample, SeededStream::new(3, 1), 500)?;
    for i in 0..3 {
        let m = boot.iter().map(|b| b[i]).sum::<f64>() / boot.len() as f64;
        let v = boot.iter().map(|b| (b[i] - m).powi(2)).sum::<f64>() / (boot.len() - 1) as f64;
        println!("component {i}: plug-in variance {:.4}, bootstrap {v:.4}", est.sigma_hat[(i, i)]);
    }

    let mut csv = Vec::new();
    sample.write_csv(&mut csv)?;
    println!("\n{}", String::from_utf8_lossy(&csv).lines().take(4).collect::<Vec<_>>().join("\n"));
    Ok(())
}
