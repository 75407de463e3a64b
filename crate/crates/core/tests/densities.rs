use ssgl::prior::{laplace_log_density, normal_log_density, update_kappa, update_rho, PriorConfig};
use ssgl::pruning::PruneSchedule;
use ssgl::{BetaShape, Schedule};

// Reference values evaluated at 40 significant digits.
const RHO_AT_ZERO: f64 = 0.443_790_762_876_656_066_9;
const LAPLACE_0_3_SCALE_0_05: f64 = -3.697_414_907_005_954_316;
const NORMAL_1_7_VAR_2_5: f64 = -1.955_083_899_141_750_274;
const RHO_MIXED: f64 = 0.039_372_375_399_013_843_10;
const PRUNE_RATE_K5000: f64 = 0.570_570_892_854_093_445_6;
const OMEGA_AT_1: f64 = 0.079_377_267_716_030_448_73;

fn cfg(v0: f64, v1: f64) -> PriorConfig<f64> {
    PriorConfig { v0, v1, a: 1.0, b: BetaShape::Fixed(1.0), nu: 1.0, lambda: 1.0, sigma0: 1.0 }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-14 * b.abs().max(1.0)
}

#[test]
fn component_log_densities() {
    assert!(close(laplace_log_density(0.3, 0.05).unwrap(), LAPLACE_0_3_SCALE_0_05));
    assert!(close(laplace_log_density(-0.3, 0.05).unwrap(), LAPLACE_0_3_SCALE_0_05));
    assert!(close(normal_log_density(1.7, 2.5).unwrap(), NORMAL_1_7_VAR_2_5));
    assert!(laplace_log_density(1.0, 0.0).is_err());
    assert!(normal_log_density(1.0, -1.0).is_err());
}

#[test]
fn rho_matches_density_ratio() {
    let r = update_rho(&[0.0], 1.0, 0.5, &cfg(1.0, 1.0)).unwrap();
    assert!(close(r[0], RHO_AT_ZERO));
    let r = update_rho(&[0.2, -0.2], 1.5, 0.3, &cfg(0.1, 10.0)).unwrap();
    assert!(close(r[0], RHO_MIXED) && close(r[1], RHO_MIXED));
}

#[test]
fn rho_prefers_slab_far_out() {
    let c = cfg(0.1, 10.0);
    let log_a = normal_log_density(10.0, 10.0).unwrap();
    let log_b = laplace_log_density(10.0, 0.1).unwrap();
    // the rescaled Laplace tail at 10 spike scales is far lighter than the slab
    assert!(log_a - log_b > 30.0);
    assert!(update_rho(&[10.0], 1.0, 0.5, &c).unwrap()[0] > 0.999_999);
}

#[test]
fn kappas_from_rho() {
    let (k0, k1) = update_kappa(&[0.0, 1.0, 0.25], &cfg(0.5, 2.0)).unwrap();
    assert_eq!(k0, vec![2.0, 0.0, 1.5]);
    assert_eq!(k1, vec![0.0, 0.5, 0.125]);
}

#[test]
fn schedule_reference_values() {
    let s = PruneSchedule::new(0.9, 0.99, 50).unwrap();
    assert!(close(s.sparse_rate(5000), PRUNE_RATE_K5000));
    let omega = Schedule::ShiftedPowerLaw { scale: 10.0, shift: 1000.0, exponent: 0.7 };
    assert!(close(omega.eval(1).unwrap(), OMEGA_AT_1));
    let lr = Schedule::PowerLaw { scale: 1e-3, exponent: 1.0 / 3.0 };
    assert!(close(lr.eval(8).unwrap(), 5e-4));
    assert!(lr.eval(0).is_err());
}
