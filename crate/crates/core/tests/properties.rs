use meanfield_core::analytics::{
    build_generator, gaussian_tail_exact, matrix_exponential, variance_closed_form_k2,
    variance_quadrature, DEFAULT_QUADRATURE_TOL,
};
use meanfield_core::model::expansion_coefficients;
use meanfield_core::{validate_and_expand, Composition, GroupSpec, SystemConfig};
use proptest::prelude::*;

fn groups() -> impl Strategy<Value = Vec<GroupSpec>> {
    prop::collection::vec(
        (0.0f64..100.0, 0.1f64..5.0, 1usize..20).prop_map(|(a, s, c)| GroupSpec::new(a, s, c)),
        1..6,
    )
}

fn composition(max_k: usize) -> impl Strategy<Value = Composition> {
    prop::collection::vec((0.1f64..100.0, 0.1f64..5.0, 0.05f64..1.0), 1..=max_k).prop_map(|g| {
        let total: f64 = g.iter().map(|x| x.2).sum();
        let mut rho: Vec<f64> = g.iter().map(|x| x.2 / total).collect();
        // absorb rounding so the weights sum to one within the model's tolerance
        let last = 1.0 - rho[..rho.len() - 1].iter().sum::<f64>();
        *rho.last_mut().unwrap() = last;
        Composition::new(
            g.iter().map(|x| x.0).collect(),
            g.iter().map(|x| x.1).collect(),
            rho,
        )
        .unwrap()
    })
}

fn distinct(groups: &[GroupSpec]) -> bool {
    groups.iter().enumerate().all(|(i, a)| {
        groups[..i]
            .iter()
            .all(|b| a.alpha != b.alpha || a.sigma != b.sigma)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn layout_weights_are_normalized(groups in groups()) {
        prop_assume!(distinct(&groups));
        let cfg = SystemConfig::new(groups, 1.0, -0.7);
        let layout = validate_and_expand(&cfg).unwrap();
        prop_assert!((layout.rho().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(layout.n_agents(), cfg.n_agents());
        if let Ok(coeffs) = expansion_coefficients(layout.composition()) {
            prop_assert!(coeffs.weighted_sum(layout.rho()).abs() < 1e-12);
        }
    }

    #[test]
    fn transition_matrix_is_stochastic(comp in composition(5), s in 0.0f64..2.0) {
        let g = build_generator(&comp);
        let p = matrix_exponential(&g.m, s).unwrap();
        for row in p.row_iter() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&x| x > -1e-14));
        }
    }

    #[test]
    fn two_group_quadrature_matches_closed_form(comp in composition(2), t in 0.1f64..2.0) {
        prop_assume!(comp.n_groups() == 2);
        let quad = variance_quadrature(&comp, t, DEFAULT_QUADRATURE_TOL).unwrap().value;
        let exact = variance_closed_form_k2(&comp, t).unwrap();
        prop_assert!((quad - exact).abs() <= 1e-8 * exact.max(1.0));
    }

    #[test]
    fn common_alpha_collapses(
        alpha in 0.1f64..100.0,
        sigma in prop::collection::vec(0.1f64..5.0, 1..5),
        t in 0.1f64..2.0,
    ) {
        let k = sigma.len();
        let rho = vec![1.0 / k as f64; k];
        let comp = Composition::new(vec![alpha; k], sigma, rho).unwrap();
        let quad = variance_quadrature(&comp, t, DEFAULT_QUADRATURE_TOL).unwrap().value;
        let want = t * comp.effective_sigma_sq();
        prop_assert!((quad - want).abs() <= 1e-10 * want.max(1.0));
    }

    #[test]
    fn variance_grows_with_noise_and_horizon(
        comp in composition(4),
        t in 0.1f64..2.0,
        which in 0usize..4,
        factor in 1.01f64..3.0,
    ) {
        let base = variance_quadrature(&comp, t, DEFAULT_QUADRATURE_TOL).unwrap().value;
        let longer = variance_quadrature(&comp, t * factor, DEFAULT_QUADRATURE_TOL).unwrap().value;
        prop_assert!(longer > base);

        let k = which % comp.n_groups();
        let mut sigma = comp.sigma().to_vec();
        sigma[k] *= factor;
        let louder = Composition::new(comp.alpha().to_vec(), sigma, comp.rho().to_vec()).unwrap();
        let noisier = variance_quadrature(&louder, t, DEFAULT_QUADRATURE_TOL).unwrap().value;
        prop_assert!(noisier > base);
    }

    #[test]
    fn tail_is_monotone(v in 0.1f64..5.0, n in 1usize..200, eta in -3.0f64..-0.01) {
        let p = gaussian_tail_exact(v, n, eta).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(gaussian_tail_exact(v * 1.1, n, eta).unwrap() >= p);
        prop_assert!(gaussian_tail_exact(v, n + 1, eta).unwrap() <= p);
        prop_assert!(gaussian_tail_exact(v, n, eta * 1.1).unwrap() <= p);
    }
}
