//! Property tests for the model invariants: nonnegativity, projection
//! idempotence, and the phase invariances of the sum rate.

use lagd::linalg::CMatrix;
use lagd::model::{power_feasible, project_power, sinr, wsr, ChannelSet, Precoder, SystemConfig};
use num_complex::Complex64;
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Instance {
    config: SystemConfig,
    channels: ChannelSet,
    precoder: Precoder,
}

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), len).prop_map(|v| {
        v.into_iter()
            .map(|(re, im)| Complex64::new(re, im))
            .collect()
    })
}

fn instance() -> impl Strategy<Value = Instance> {
    (1usize..=4, 1usize..=4, 0.1f64..4.0, 0.2f64..8.0).prop_flat_map(|(n, m, noise, power)| {
        (
            proptest::collection::vec(complex_vec(m), n),
            proptest::collection::vec(complex_vec(m), n),
            Just((n, m, noise, power)),
        )
            .prop_map(|(hs, vs, (n, m, noise, power))| {
                let config = SystemConfig::uniform(n, m, noise, power).unwrap();
                let channels = ChannelSet::new(hs).unwrap();
                let precoder = Precoder::from_matrix(CMatrix::from_rows(&vs));
                Instance {
                    config,
                    channels,
                    precoder,
                }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sinr_nonnegative_and_wsr_nonnegative(inst in instance()) {
        let s = sinr(&inst.config, &inst.channels, &inst.precoder).unwrap();
        prop_assert!(s.iter().all(|&x| x >= 0.0));
        let f = wsr(&inst.config, &inst.channels, &inst.precoder).unwrap();
        prop_assert!(f >= 0.0);
    }

    #[test]
    fn projection_is_idempotent(inst in instance()) {
        let once = project_power(&inst.config, &inst.precoder);
        let twice = project_power(&inst.config, &once);
        prop_assert_eq!(&twice, &once);
        prop_assert!(power_feasible(&inst.config, once.power()));
        if inst.precoder.power() <= inst.config.total_power() {
            prop_assert_eq!(&once, &inst.precoder);
        } else {
            let p = inst.config.total_power();
            prop_assert!((once.power() - p).abs() <= 1e-12 * p);
        }
    }

    #[test]
    fn common_channel_phase_leaves_rates_unchanged(inst in instance(), phase in 0.0f64..std::f64::consts::TAU) {
        let rot = Complex64::from_polar(1.0, phase);
        let rotated = ChannelSet::new(
            inst.channels
                .users()
                .iter()
                .map(|h| h.iter().map(|z| z * rot).collect())
                .collect(),
        )
        .unwrap();
        let base = sinr(&inst.config, &inst.channels, &inst.precoder).unwrap();
        let moved = sinr(&inst.config, &rotated, &inst.precoder).unwrap();
        for (a, b) in base.iter().zip(&moved) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
        let f0 = wsr(&inst.config, &inst.channels, &inst.precoder).unwrap();
        let f1 = wsr(&inst.config, &rotated, &inst.precoder).unwrap();
        prop_assert!((f0 - f1).abs() <= 1e-9 * (1.0 + f0.abs()));
    }

    #[test]
    fn common_precoder_phase_leaves_wsr_unchanged(inst in instance(), phase in 0.0f64..std::f64::consts::TAU) {
        let rot = Complex64::from_polar(1.0, phase);
        let mut mat = CMatrix::zeros(inst.precoder.num_users(), inst.precoder.num_antennas());
        for i in 0..mat.rows() {
            for j in 0..mat.cols() {
                mat.set(i, j, inst.precoder.matrix().get(i, j) * rot);
            }
        }
        let rotated = Precoder::from_matrix(mat);
        let f0 = wsr(&inst.config, &inst.channels, &inst.precoder).unwrap();
        let f1 = wsr(&inst.config, &inst.channels, &rotated).unwrap();
        prop_assert!((f0 - f1).abs() <= 1e-9 * (1.0 + f0.abs()));
    }
}
