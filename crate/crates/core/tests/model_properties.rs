//! Property tests for the bound maps and their directional derivatives.

use proptest::prelude::*;
use regret_rules::model::{ex1_bounds, ex2_bounds, ex3_bounds, ex3_psi};
use regret_rules::{Error, IdModel, ModelKind, Theta};

fn range() -> impl Strategy<Value = (f64, f64)> {
    (-5.0..5.0f64, 0.1..5.0f64).prop_map(|(lo, w)| (lo, lo + w))
}

/// Interior parameter for `kind` on `[lo, hi]`.
fn interior(kind: ModelKind) -> impl Strategy<Value = Theta> {
    let k = IdModel::new(kind).dim();
    let means = IdModel::new(kind).mean_components();
    (range(), prop::collection::vec(0.02..0.98f64, k)).prop_map(move |((lo, hi), u)| {
        let values = u
            .iter()
            .enumerate()
            .map(|(i, &x)| if i < means { lo + x * (hi - lo) } else { x })
            .collect();
        Theta::new(values, lo, hi).unwrap()
    })
}

fn unit_direction(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, k)
        .prop_filter("nonzero", |b| b.iter().map(|x| x * x).sum::<f64>() > 1e-4)
        .prop_map(|b| {
            let norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            b.into_iter().map(|x| x / norm).collect()
        })
}

fn shifted(theta: &Theta, b: &[f64], t: f64) -> Theta {
    theta
        .with_values(theta.values().iter().zip(b).map(|(x, d)| x + t * d).collect())
        .unwrap()
}

fn finite_difference(model: &IdModel, theta: &Theta, b: &[f64], t: f64) -> (f64, f64) {
    let base = model.bounds(theta).unwrap();
    let moved = model.bounds(&shifted(theta, b, t)).unwrap();
    ((moved.lo - base.lo) / t, (moved.hi - base.hi) / t)
}

/// Gap between the largest and second-largest entries.
fn top_gap(xs: &[f64; 4]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v[0] - v[1]
}

fn close(fd: f64, exact: f64) -> bool {
    (fd - exact).abs() <= 1e-4 * exact.abs() + 1e-6
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn ex1_width_is_outcome_range(theta in interior(ModelKind::Ex1)) {
        let b = ex1_bounds(&theta).unwrap();
        prop_assert!((b.width() - theta.y_width()).abs() < 1e-12);
    }

    #[test]
    fn ex2_width_shrinks_with_participation(theta in interior(ModelKind::Ex2)) {
        let b = ex2_bounds(&theta).unwrap();
        let p = theta.values()[2];
        prop_assert!((b.width() - 2.0 * theta.y_width() * (1.0 - p)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn smooth_models_match_finite_differences(
        kind in prop_oneof![Just(ModelKind::Ex1), Just(ModelKind::Ex2)],
        seed_theta in interior(ModelKind::Ex1),
        b in unit_direction(3),
    ) {
        let model = IdModel::new(kind);
        let (dl, du) = model.dtau(&seed_theta, &b).unwrap();
        let (fl, fu) = finite_difference(&model, &seed_theta, &b, 1e-6);
        prop_assert!(close(fl, dl), "lower: fd {fl} vs {dl}");
        prop_assert!(close(fu, du), "upper: fd {fu} vs {du}");
    }

    #[test]
    fn ex3_matches_finite_differences_away_from_ties(theta in interior(ModelKind::Ex3), b in unit_direction(6)) {
        let (psi_l, psi_u) = ex3_psi(&theta).unwrap();
        let neg_u = psi_u.map(|x| -x);
        prop_assume!(top_gap(&psi_l) > 1e-3 && top_gap(&neg_u) > 1e-3);
        let model = IdModel::new(ModelKind::Ex3);
        let (dl, du) = model.dtau(&theta, &b).unwrap();
        let (fl, fu) = finite_difference(&model, &theta, &b, 1e-6);
        prop_assert!(close(fl, dl), "lower: fd {fl} vs {dl}");
        prop_assert!(close(fu, du), "upper: fd {fu} vs {du}");
    }

    #[test]
    fn derivatives_are_positively_homogeneous(
        kind in prop_oneof![Just(ModelKind::Ex1), Just(ModelKind::Ex2), Just(ModelKind::Ex3)],
        u in prop::collection::vec(0.05..0.95f64, 6),
        b in prop::collection::vec(-3.0..3.0f64, 6),
        c in 0.01..50.0f64,
    ) {
        let model = IdModel::new(kind);
        let k = model.dim();
        let theta = Theta::unit(u[..k].to_vec()).unwrap();
        let (dl, du) = model.dtau(&theta, &b[..k]).unwrap();
        let scaled: Vec<f64> = b[..k].iter().map(|x| c * x).collect();
        let (sl, su) = model.dtau(&theta, &scaled).unwrap();
        prop_assert!((sl - c * dl).abs() <= 1e-12 * (1.0 + c * dl.abs()));
        prop_assert!((su - c * du).abs() <= 1e-12 * (1.0 + c * du.abs()));
    }

    #[test]
    fn derivatives_obey_lipschitz_bound(
        kind in prop_oneof![Just(ModelKind::Ex1), Just(ModelKind::Ex2), Just(ModelKind::Ex3)],
        theta6 in interior(ModelKind::Ex3),
        b1 in prop::collection::vec(-3.0..3.0f64, 6),
        b2 in prop::collection::vec(-3.0..3.0f64, 6),
    ) {
        let model = IdModel::new(kind);
        let k = model.dim();
        let theta = Theta::new(theta6.values()[..k].to_vec(), theta6.y_lo(), theta6.y_hi()).unwrap();
        // Ex1/Ex2 take (mu1, mu0, p): the third coordinate must be a probability
        let theta = if k == 3 {
            let v = theta.values();
            let p = theta6.values()[4];
            theta.with_values(vec![v[0], v[1], p]).unwrap()
        } else {
            theta
        };
        let c = model.lipschitz(theta.y_width());
        let dist = b1[..k].iter().zip(&b2[..k]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let (l1, u1) = model.dtau(&theta, &b1[..k]).unwrap();
        let (l2, u2) = model.dtau(&theta, &b2[..k]).unwrap();
        prop_assert!((l1 - l2).abs() <= c * dist + 1e-12);
        prop_assert!((u1 - u2).abs() <= c * dist + 1e-12);
    }

    #[test]
    fn instrument_bounds_sit_inside_pooled_bounds(theta in interior(ModelKind::Ex3), q in 0.0..1.0f64) {
        let v = theta.values();
        let (m11, m10, m01, m00, p1, p0) = (v[0], v[1], v[2], v[3], v[4], v[5]);
        // pool the two instrument arms with weights q and 1 - q
        let p = q * p1 + (1.0 - q) * p0;
        let mu1 = (q * p1 * m11 + (1.0 - q) * p0 * m10) / p;
        let mu0 = (q * (1.0 - p1) * m01 + (1.0 - q) * (1.0 - p0) * m00) / (1.0 - p);
        let pooled = ex1_bounds(&theta.with_values(vec![mu1, mu0, p]).unwrap()).unwrap();
        let sharp = ex3_bounds(&theta).unwrap();
        prop_assert!(sharp.lo >= pooled.lo - 1e-12);
        prop_assert!(sharp.hi <= pooled.hi + 1e-12);
    }
}

#[test]
fn ex3_ties_converge_along_shrinking_steps() {
    let model = IdModel::new(ModelKind::Ex3);
    // identical instrument arms: every candidate bound ties
    let theta = Theta::unit(vec![0.6, 0.6, 0.3, 0.3, 0.4, 0.4]).unwrap();
    let directions = [
        vec![1.0, -1.0, 0.5, 0.2, 0.3, -0.3],
        vec![-0.2, 0.4, -1.0, 1.0, 0.0, 0.7],
        vec![0.0, 0.0, 0.0, 0.0, 1.0, -1.0],
    ];
    for b in &directions {
        let (dl, du) = model.dtau(&theta, b).unwrap();
        let errs: Vec<(f64, f64)> = [1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&t| {
                let (fl, fu) = finite_difference(&model, &theta, b, t);
                ((fl - dl).abs(), (fu - du).abs())
            })
            .collect();
        for w in errs.windows(2) {
            assert!(w[1].0 <= w[0].0 + 1e-9 && w[1].1 <= w[0].1 + 1e-9, "{errs:?}");
        }
        assert!(errs[2].0 < 1e-4 && errs[2].1 < 1e-4, "{errs:?}");
    }
}

#[test]
fn boundary_points_are_rejected() {
    for (kind, v) in [
        (ModelKind::Ex1, vec![0.5, 0.5, 1.0]),
        (ModelKind::Ex2, vec![0.0, 0.5, 0.5]),
        (ModelKind::Ex3, vec![0.5, 0.5, 0.5, 0.5, 0.0, 0.5]),
    ] {
        let theta = Theta::unit(v).unwrap();
        assert!(matches!(IdModel::new(kind).derivative(&theta), Err(Error::BoundaryPoint(_))));
    }
}
