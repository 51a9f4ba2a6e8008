use ionladder::linalg::max_abs_diff;
use ionladder::phonons::hessian;
use ionladder::{find_equilibrium, normal_modes, Branch, TrapConfig};
use nalgebra::DMatrix;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spectra_are_orthonormal_and_reconstruct_the_hessian(
        n in 2usize..=12,
        ax in 1.2..5.0f64,
        extra in 1.0..40.0f64,
        seed in 0u64..100,
    ) {
        let crystal = find_equilibrium(&TrapConfig::new(n, ax, ax + extra).unwrap(), seed).unwrap();
        let spectrum = normal_modes(&crystal).unwrap();
        let a = &spectrum.amplitudes;
        let identity = DMatrix::identity(3 * n, 3 * n);
        prop_assert!(max_abs_diff(&(a.transpose() * a), &identity) <= 1e-10);
        prop_assert!(max_abs_diff(&(a * a.transpose()), &identity) <= 1e-10);

        let h = hessian(&crystal).unwrap();
        prop_assert!(max_abs_diff(&spectrum.reconstruct_hessian(), &h) <= 1e-8);
        prop_assert!(max_abs_diff(&h, &h.transpose()) == 0.0);

        prop_assert!(crystal.is_planar());
        for j in 0..n {
            for k in 0..n {
                prop_assert!(h[(3 * j + 1, 3 * k)].abs() < 1e-12);
                prop_assert!(h[(3 * j + 1, 3 * k + 2)].abs() < 1e-12);
            }
        }
        prop_assert_eq!(spectrum.modes_of(Branch::Transverse).count(), n);
        prop_assert_eq!(spectrum.modes_of(Branch::Planar).count(), 2 * n);
        prop_assert!(spectrum.frequencies.iter().all(|w| *w > 0.0));
    }
}

#[test]
fn centre_of_mass_modes_sit_at_the_trap_frequencies() {
    let crystal = find_equilibrium(&TrapConfig::new(30, 6.1, 100.0).unwrap(), 0).unwrap();
    let spectrum = normal_modes(&crystal).unwrap();
    for w in [1.0, 6.1, 100.0] {
        let nearest = spectrum.frequencies.iter().map(|f| (f - w).abs()).fold(f64::INFINITY, f64::min);
        assert!(nearest < 1e-8, "no mode at {w}");
    }
    let transverse = spectrum.frequencies_of(Branch::Transverse);
    assert!(transverse.windows(2).all(|p| p[0] <= p[1]));
    assert!((transverse.last().unwrap() - 100.0).abs() < 1e-8);
}
