mod common;

use doa_bcs::array_model::{steering_vector, ArrayConfig, ArrayGeometry, CouplingSpec};
use proptest::prelude::*;

proptest! {
    #[test]
    fn steering_entries_are_unit_modulus(m in 1usize..64, spacing in 0.05f64..1.0, theta in 0.0f64..=180.0) {
        prop_assert!(common::steering_violation(m, spacing, theta) <= 1e-12);
    }

    #[test]
    fn coupling_is_symmetric_banded_toeplitz(
        m in 1usize..40,
        seed_bands in prop::collection::vec((0.0f64..1.0, -3.2f64..3.2), 0..39),
    ) {
        let reach = (seed_bands.len() + 1).min(m);
        let spec = CouplingSpec {
            reach,
            rho: seed_bands.iter().take(reach - 1).map(|b| b.0).collect(),
            phi: seed_bands.iter().take(reach - 1).map(|b| b.1).collect(),
        };
        prop_assert!(common::coupling_violation(&spec, m) == 0.0);
    }

    #[test]
    fn realification_is_a_homomorphism(seed in any::<u64>(), rows in 1usize..12, cols in 1usize..12) {
        let mut rng = common::rng(seed);
        let (gap, exact) = common::homomorphism_gap(&mut rng, rows, cols);
        prop_assert!(gap <= 1e-12, "relative gap {gap:e}");
        prop_assert!(exact);
    }
}

#[test]
fn reference_grids_have_ones_first_row() {
    for cfg in [ArrayConfig::standard(), ArrayConfig::quarter_wavelength()] {
        let grid = cfg.build().unwrap();
        assert!(common::grid_violation(&grid) <= 1e-12);
    }
}

#[test]
fn quarter_wavelength_spread_bands() {
    let spec = ArrayConfig::quarter_wavelength().coupling;
    assert_eq!(spec.reach, 9);
    assert!(common::coupling_violation(&spec, 39) == 0.0);
    let bands = spec.band_values();
    assert!((bands[0].norm() - 0.65).abs() < 1e-12);
    assert!((bands[7].norm() - 0.25).abs() < 1e-12);
}

#[test]
fn sixty_degrees_quarter_turns() {
    let geom = ArrayGeometry::half_wavelength(4);
    let v = steering_vector(&geom, 60.0).unwrap();
    for (m, z) in v.iter().enumerate() {
        let phase = -std::f64::consts::FRAC_PI_2 * m as f64;
        assert!((z.re - phase.cos()).abs() < 1e-12 && (z.im - phase.sin()).abs() < 1e-12);
    }
}

#[test]
fn synthesized_noise_is_calibrated() {
    // 5000 snapshots × 40 components = 2·10⁵ samples
    let z = common::noise_calibration_z(0.4, 5000, 41);
    assert!(z.abs() <= 5.0, "z = {z}");
}
