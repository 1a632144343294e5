use std::f64::consts::PI;

use proptest::prelude::*;

use relmcl::data_io::{VelocityDeriver, DT_MIN};
use relmcl::geometry::Pose2D;
use relmcl::models::integrate;

proptest! {
    // poses sampled from a differential-drive trajectory
    #[test]
    fn derived_velocities_reintegrate_to_the_trajectory(
        start in (-50.0f64..50.0, -50.0f64..50.0, -PI..PI),
        steps in prop::collection::vec((-1.5f64..1.5, -2.0f64..2.0, 0.02f64..0.3), 1..60),
    ) {
        let mut truth = vec![Pose2D::new(start.0, start.1, start.2)];
        let mut t = vec![0.0];
        for &(v, w, dt) in &steps {
            let p = integrate(truth.last().unwrap(), v, 0.0, w, dt);
            truth.push(p);
            t.push(t.last().unwrap() + dt);
        }
        let mut der = VelocityDeriver::new(DT_MIN);
        prop_assert!(der.push(truth[0], t[0]).is_none());
        let mut p = truth[0];
        for k in 1..truth.len() {
            let u = der.push(truth[k], t[k]).unwrap();
            p = integrate(&p, u.v, u.v_y, u.omega, u.dt);
            prop_assert!(p.distance(&truth[k]) < 1e-6, "k {} off by {}", k, p.distance(&truth[k]));
            prop_assert!(p.angular_distance(&truth[k]) < 1e-6);
        }
    }
}
