use std::f64::consts::PI;

use cass_core::clustering::masks::mask_weights;
use cass_core::clustering::{
    approx_kappa_inverse, bessel_ratio, em_fit, fit_mixture, mixture_loglik, soft_masks, vm_pdf, EmConfig,
    VonMisesMixture,
};
use cass_core::selftest::kappa_by_bisection;
use proptest::prelude::*;

fn mixture(max_c: usize) -> impl Strategy<Value = VonMisesMixture> {
    (1..=max_c).prop_flat_map(|c| {
        (
            prop::collection::vec(0.05f64..1.0, c),
            prop::collection::vec(-PI..PI, c),
            prop::collection::vec(-3.0f64..4.0, c),
        )
            .prop_map(|(w, m, lk)| {
                let total: f64 = w.iter().sum();
                VonMisesMixture::new(
                    w.iter().map(|x| x / total).collect(),
                    m,
                    lk.iter().map(|l| 10f64.powf(*l)).collect(),
                )
                .unwrap()
            })
    })
}

proptest! {
    #[test]
    fn mask_rows_are_distributions(mix in mixture(4), phi in -PI..PI) {
        let mut out = vec![0.0; mix.components()];
        mask_weights(phi, &mix, &mut out);
        prop_assert!(out.iter().all(|&b| (0.0..=1.0).contains(&b)));
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn mask_grid_covers_every_unit(mix in mixture(3), obs in prop::collection::vec(-PI..PI, 0..20)) {
        let positions: Vec<(usize, usize)> = (0..obs.len()).map(|i| (i / 5, i % 5)).collect();
        let masks = soft_masks(4, 5, &obs, &positions, &mix);
        for k in 0..4 {
            for l in 0..5 {
                prop_assert!((masks.unit(k, l).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn density_is_positive_and_periodic(mu in -PI..PI, lk in -3.0f64..4.0, phi in -PI..PI) {
        let k = 10f64.powf(lk);
        let p = vm_pdf(phi, mu, k);
        prop_assert!(p >= 0.0 && p.is_finite());
        prop_assert!((p - vm_pdf(phi + 2.0 * PI, mu, k)).abs() <= 1e-9 * p.max(1.0));
    }

    #[test]
    fn kappa_inverse_agrees_with_bisection(r in 0.01f64..0.95) {
        let approx = approx_kappa_inverse(r);
        let exact = kappa_by_bisection(r);
        prop_assert!((bessel_ratio(approx) - bessel_ratio(exact)).abs() <= 5e-3);
    }

    #[test]
    fn em_never_decreases_the_likelihood(
        obs in prop::collection::vec(-PI..PI, 20..120),
        c in 1usize..4,
        seed in any::<u64>(),
    ) {
        let fit = fit_mixture(&obs, c, seed, &EmConfig::default()).unwrap();
        for w in fit.loglik_history.windows(2) {
            prop_assert!(w[1] - w[0] >= -1e-9, "{:?}", fit.loglik_history);
        }
        prop_assert!((fit.loglik() - mixture_loglik(&obs, &fit.mixture)).abs() <= 1e-6 * fit.loglik().abs().max(1.0));
    }

    #[test]
    fn em_from_any_start_is_monotone(obs in prop::collection::vec(-PI..PI, 10..60), init in mixture(3)) {
        let fit = em_fit(&obs, &init, &EmConfig::default()).unwrap();
        for w in fit.loglik_history.windows(2) {
            prop_assert!(w[1] - w[0] >= -1e-9);
        }
        prop_assert!(fit.mixture.weights.iter().all(|w| w.is_finite() && *w >= 0.0));
    }
}
