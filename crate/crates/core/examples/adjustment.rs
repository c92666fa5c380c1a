//! Solve the regret adjustment at an estimate near the kink and compare the
//! adjusted rule with the plug-in rule.

use regret_rules::estimate::PATH_BASE;
use regret_rules::{lam_str, plug_in_str, AdjustSettings, GaussianLaw, IdModel, ModelKind, SeededStream, Theta};

fn main() -> regret_rules::Result<()> {
    let n = 300;
    let model = IdModel::new(ModelKind::Ex2);
    let theta_hat = Theta::unit(PATH_BASE.to_vec())?;
    let sigma = GaussianLaw::diagonal(&[16.0 / 27.0, 16.0 / 27.0, 3.0 / 16.0])?;

    let mut settings = AdjustSettings::default();
    settings.grid.support_points = 9;
    settings.grid.search_points = 7;
    let problem = settings.build_problem(&model, &theta_hat, &sigma, n, SeededStream::new(5, 0))?;
    let r = problem.solve_adjustment();

    println!("w_hat      {:?}", r.w_hat.iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>());
    println!("objective  {:.5} after {} evaluations", r.objective, r.evaluations);
    println!("at w = 0   {:.5}", problem.sup_over_support(&vec![0.0; 3])?.value);
    println!("plug-in    {:.4}", plug_in_str(&theta_hat, &model)?.get());
    println!("adjusted   {:.4}", lam_str(&theta_hat, &r.w_hat, n, &model)?.get());
    Ok(())
}
