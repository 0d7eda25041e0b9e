use proptest::prelude::*;
use twave_core::profile::{default_z_grid, reconstruct_with, TravelMap};
use twave_core::{solve_trajectory, ModelParams};

const THETA_MAX: f64 = 1e6;
const TOL: f64 = 1e-10;
const QTOL: f64 = 1e-10;

/// Valid parameters kept away from the critical balance.
fn params() -> impl Strategy<Value = ModelParams> {
    (1.1f64..3.0, 0.7f64..2.5, 0.1f64..0.9, 0.5f64..2.0, -1.5f64..1.5)
        .prop_filter("away from critical balance", |&(m, p, beta, _, _)| {
            (p * (m + beta) - (1.0 + p)).abs() > 0.05
        })
        .prop_filter_map("valid", |(m, p, beta, b, k)| ModelParams::new(m, p, beta, b, k).ok())
}

fn thetas(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    let n = 60;
    (0..=n).map(move |i| lo * (hi / lo).powf(i as f64 / n as f64))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn trajectory_is_positive_and_rises_for_nonnegative_speed(pr in params()) {
        let traj = solve_trajectory(&pr, THETA_MAX, TOL).unwrap();
        let mut prev = 0.0;
        for theta in thetas(traj.theta_min(), traj.theta_max()) {
            let y = traj.eval(theta.min(traj.theta_max())).unwrap();
            prop_assert!(y > 0.0 && y.is_finite());
            if pr.k() >= 0.0 {
                prop_assert!(y > prev, "theta {theta}");
            }
            prev = y;
        }
    }

    #[test]
    fn profile_increases_and_inverts_the_travel_map(pr in params()) {
        let traj = solve_trajectory(&pr, THETA_MAX, TOL).unwrap();
        let map = TravelMap::new(&traj, QTOL).unwrap();
        let grid = default_z_grid(&map, 80);
        let prof = reconstruct_with(&map, &grid).unwrap();
        prop_assert!(prof.phis().windows(2).all(|w| w[1] > w[0]));
        for (&z, &phi) in prof.zs().iter().zip(prof.phis()).step_by(7) {
            let back = map.z_at(phi).unwrap();
            prop_assert!((back / z - 1.0).abs() <= 10.0 * QTOL, "z {z}: {back}");
        }
    }

    #[test]
    fn zero_speed_is_the_power_law(
        m in 1.1f64..3.0, p in 0.7f64..2.5, beta in 0.1f64..0.9, b in 0.5f64..2.0,
    ) {
        prop_assume!((p * (m + beta) - (1.0 + p)).abs() > 0.05);
        let Ok(pr) = ModelParams::new(m, p, beta, b, 0.0) else {
            return Ok(());
        };
        let s = p * (m + beta) / (1.0 + p);
        let a = (b * m / s).powf(p / (1.0 + p));
        let traj = solve_trajectory(&pr, THETA_MAX, TOL).unwrap();
        for theta in thetas(traj.theta_min(), traj.theta_max()) {
            let y = traj.eval(theta.min(traj.theta_max())).unwrap();
            prop_assert!((y / (a * theta.powf(s)) - 1.0).abs() <= 1e-8, "theta {theta}");
        }
    }
}
