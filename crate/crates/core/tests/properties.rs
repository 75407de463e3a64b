
use proptest::prelude::*;
use ssgl::latent::{LatentProposal, LatentState, LayerLatent};
use ssgl::params::{LayerKind, Layout, ParamVector};
use ssgl::prior::{sa_blend, update_delta, update_kappa, update_rho, PriorConfig};
use ssgl::pruning::{prune_bottom, pruned_count, sparsity, PruneSchedule};
use ssgl::{BetaShape, Schedule};

fn cfg(v0: f64, v1: f64) -> PriorConfig<f64> {
    PriorConfig { v0, v1, a: 1.0, b: BetaShape::Fixed(10.0), nu: 1.0, lambda: 1.0, sigma0: 1.0 }
}

fn layer(rho: Vec<f64>, delta: f64, c: &PriorConfig<f64>) -> LayerLatent<f64> {
    let (kappa0, kappa1) = update_kappa(&rho, c).unwrap();
    LayerLatent { rho, kappa0, kappa1, delta }
}

proptest! {
    #[test]
    fn rho_is_a_probability(
        beta in prop::collection::vec(-1e3f64..1e3, 1..20),
        sigma in 1e-3f64..1e2,
        delta in 1e-6f64..(1.0 - 1e-6),
        v0 in 1e-3f64..1.0,
        v1 in 1.0f64..100.0,
    ) {
        for r in update_rho(&beta, sigma, delta, &cfg(v0, v1)).unwrap() {
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn rho_is_monotone_in_delta(
        beta in -5.0f64..5.0,
        d1 in 0.01f64..0.98,
        gap in 0.001f64..0.01,
        sigma in 0.1f64..5.0,
    ) {
        let c = cfg(0.1, 10.0);
        let lo = update_rho(&[beta], sigma, d1, &c).unwrap()[0];
        let hi = update_rho(&[beta], sigma, d1 + gap, &c).unwrap()[0];
        prop_assert!(hi >= lo);
    }

    #[test]
    fn kappas_partition_unity(rho in prop::collection::vec(0.0f64..=1.0, 1..50), v0 in 1e-3f64..1.0, v1 in 1.0f64..50.0) {
        let c = cfg(v0, v1);
        let (k0, k1) = update_kappa(&rho, &c).unwrap();
        for (a, b) in k0.iter().zip(&k1) {
            prop_assert!((a * v0 + b * v1 - 1.0).abs() < 1e-12);
            prop_assert!(*a >= 0.0 && *a <= 1.0 / v0 && *b >= 0.0 && *b <= 1.0 / v1);
        }
    }

    #[test]
    fn delta_stays_clamped(rho in prop::collection::vec(0.0f64..=1.0, 1..50), a in 0.5f64..5.0, b in 0.5f64..100.0) {
        let c = PriorConfig { a, b: BetaShape::Fixed(b), ..cfg(0.1, 10.0) };
        if let Ok(d) = update_delta(&rho, &c) {
            prop_assert!((1e-6..=1.0 - 1e-6).contains(&d));
        }
    }

    #[test]
    fn blend_stays_between_endpoints(
        cur in prop::collection::vec(0.0f64..=1.0, 1..20),
        prop_rho in prop::collection::vec(0.0f64..=1.0, 1..20),
        s1 in 0.1f64..10.0, s2 in 0.1f64..10.0,
        d1 in 1e-6f64..0.5, d2 in 1e-6f64..0.5,
        omega in 1e-9f64..=1.0,
    ) {
        let n = cur.len().min(prop_rho.len());
        let c = cfg(0.1, 10.0);
        let state = LatentState { layers: vec![layer(cur[..n].to_vec(), d1, &c)], sigma: s1 };
        let proposal = LatentProposal { layers: vec![layer(prop_rho[..n].to_vec(), d2, &c)], sigma: s2 };
        let out = sa_blend(&state, &proposal, omega).unwrap();
        let within = |x: f64, a: f64, b: f64| x >= a.min(b) && x <= a.max(b);
        prop_assert!(within(out.sigma, s1, s2));
        prop_assert!(within(out.layers[0].delta, d1, d2));
        for j in 0..n {
            prop_assert!(within(out.layers[0].rho[j], cur[j], prop_rho[j]));
            prop_assert!(within(out.layers[0].kappa0[j], state.layers[0].kappa0[j], proposal.layers[0].kappa0[j]));
        }
        out.check_bounds(&c).unwrap();
    }

    #[test]
    fn mask_application_is_idempotent(values in prop::collection::vec(-10.0f64..10.0, 1..40), seed in any::<u64>()) {
        let n = values.len();
        let mut p = ParamVector::from_values(Layout::single_sparse(n).unwrap(), values).unwrap();
        let mask: Vec<bool> = (0..n).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
        p.set_mask(mask).unwrap();
        let once = p.clone();
        p.apply_mask();
        prop_assert_eq!(&p, &once);
        for (v, m) in p.values().iter().zip(p.mask()) {
            prop_assert!(*m || *v == 0.0);
        }
    }

    #[test]
    fn sa_step_is_nonincreasing(scale in 0.1f64..10.0, shift in 0.0f64..1e4, exponent in 0.01f64..=1.0, k in 1u64..1_000_000) {
        let s = Schedule::ShiftedPowerLaw { scale, shift, exponent };
        prop_assert!(s.eval(k + 1).unwrap() <= s.eval(k).unwrap());
    }

    #[test]
    fn prune_rate_is_monotone_and_bounded(target in 0.0f64..0.99, decay in 0.5f64..0.999, every in 1u64..200, k in 0u64..100_000) {
        let s = PruneSchedule::new(target, decay, every).unwrap();
        let (a, b) = (s.sparse_rate(k), s.sparse_rate(k + 1));
        prop_assert!(a <= b && b <= target && a >= 0.0);
    }

    #[test]
    fn prune_hits_exact_sparsity(
        values in prop::collection::vec(-10.0f64..10.0, 2..200),
        dense in 0usize..5,
        rate in 0.0f64..0.99,
    ) {
        let n = values.len();
        let layout = Layout::contiguous([("w", n, LayerKind::Sparse), ("b", dense + 1, LayerKind::NonSparse)]).unwrap();
        let mut all = values.clone();
        all.extend(std::iter::repeat_n(1e-9, dense + 1));
        let mut p = ParamVector::from_values(layout, all).unwrap();
        prune_bottom(&mut p, rate, false).unwrap();
        prop_assert_eq!(sparsity(&p), pruned_count(rate, n) as f64 / n as f64);
        prop_assert!(p.mask()[n..].iter().all(|&m| m));
        let kept_min = p.values()[..n].iter().zip(p.mask()).filter(|(_, m)| **m).map(|(v, _)| v.abs()).fold(f64::INFINITY, f64::min);
        let dropped_max = values.iter().zip(p.mask()).filter(|(_, m)| !**m).map(|(v, _)| v.abs()).fold(0.0, f64::max);
        prop_assert!(dropped_max <= kept_min);
    }
}
