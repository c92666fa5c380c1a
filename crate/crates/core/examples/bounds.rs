//! Identified sets and their directional derivatives for the three designs.
//!
//! ```text
//! cargo run --example bounds
//! ```

use regret_rules::{IdModel, ModelKind, Theta};

fn main() -> regret_rules::Result<()> {
    let cases = [
        (ModelKind::Ex1, vec![0.7, 0.4, 0.5]),
        (ModelKind::Ex2, vec![2.0 / 3.0, 1.0 / 3.0, 0.75]),
        (ModelKind::Ex3, vec![0.6, 0.5, 0.3, 0.2, 0.4, 0.6]),
    ];
    for (kind, values) in cases {
        let model = IdModel::new(kind);
        let theta = Theta::unit(values)?;
        let b = model.bounds(&theta)?;
        println!("{kind:?}: [{:.4}, {:.4}], width {:.4}", b.lo, b.hi, b.width());

        // push every component up by the same small amount
        let dir = vec![1.0; model.dim()];
        let (dl, du) = model.dtau(&theta, &dir)?;
        println!("  derivative along (1, .., 1): lower {dl:.4}, upper {du:.4}");
    }

    // wider outcome support widens the set proportionally
    let wide = Theta::new(vec![1.0, -0.5, 0.5], -2.0, 2.0)?;
    let b = IdModel::new(ModelKind::Ex1).bounds(&wide)?;
    println!("Ex1 on [-2, 2]: [{:.4}, {:.4}]", b.lo, b.hi);
    Ok(())
}
