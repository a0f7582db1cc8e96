use rand::Rng;
use serde::{Deserialize, Serialize};

use super::env::{EnvModel, Geometry};
use super::geometry as g;
use super::{SimError, SystemState};

/// Distances reported by the virtual proximity sensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProximityReading {
    pub d: Vec<f64>,
}

/// Sensor distances between robot and object anchor points. Anchors sit on
/// the facing surfaces, so each reading is the non-negative surface gap.
pub fn proximity(env: &EnvModel, s: &SystemState) -> ProximityReading {
    let d = match &env.geometry {
        Geometry::Push1d {
            pusher_half,
            object_half,
        } => vec![((s.q_o()[0] - s.q_r()[0]).abs() - pusher_half - object_half).max(0.0)],
        Geometry::Push2d {
            pusher_half,
            object_half,
        } => {
            let sep = g::aabb_separation(s.q_r(), pusher_half, s.q_o(), object_half);
            vec![sep[0].max(0.0).hypot(sep[1].max(0.0))]
        }
        Geometry::Hand {
            finger_bases,
            link_length,
            tip_radius,
            box_half,
            ..
        } => {
            let q = s.q_r();
            let center = [s.q_o()[0], s.q_o()[1]];
            finger_bases
                .iter()
                .enumerate()
                .map(|(k, base)| {
                    let f = g::finger_fk(*base, *link_length, q[2 * k], q[2 * k + 1]);
                    g::circle_box(f.tip, *tip_radius, center, s.q_o()[2], *box_half)
                        .signed_gap
                        .max(0.0)
                })
                .collect()
        }
    };
    ProximityReading { d }
}

/// Deepest penetration over all contact pairs (0 when nothing overlaps).
pub fn penetration_depth(env: &EnvModel, s: &SystemState) -> f64 {
    match &env.geometry {
        Geometry::Push1d {
            pusher_half,
            object_half,
        } => (pusher_half + object_half - (s.q_o()[0] - s.q_r()[0]).abs()).max(0.0),
        Geometry::Push2d {
            pusher_half,
            object_half,
        } => {
            let sep = g::aabb_separation(s.q_r(), pusher_half, s.q_o(), object_half);
            if sep[0] < 0.0 && sep[1] < 0.0 {
                (-sep[0]).min(-sep[1])
            } else {
                0.0
            }
        }
        Geometry::Hand {
            finger_bases,
            link_length,
            tip_radius,
            link_circles,
            box_half,
        } => {
            let q = s.q_r();
            let center = [s.q_o()[0], s.q_o()[1]];
            let angle = s.q_o()[2];
            let mut depth: f64 = 0.0;
            for corner in g::box_corners(center, angle, *box_half) {
                depth = depth.max(-corner[1]);
            }
            for (k, base) in finger_bases.iter().enumerate() {
                let f = g::finger_fk(*base, *link_length, q[2 * k], q[2 * k + 1]);
                for pt in g::finger_points(&f, *link_circles) {
                    depth = depth.max(g::circle_box(pt.pos, *tip_radius, center, angle, *box_half).depth);
                    depth = depth.max(tip_radius - pt.pos[1]);
                }
            }
            depth.max(0.0)
        }
    }
}

pub fn is_penetrating(env: &EnvModel, s: &SystemState) -> bool {
    penetration_depth(env, s) > env.penetration_tol
}

/// Uniform sample from the state box, resampled while penetrating.
pub fn sample_feasible_state<R: Rng + ?Sized>(env: &EnvModel, rng: &mut R) -> Result<SystemState, SimError> {
    for _ in 0..env.sample_retries {
        let data: Vec<f64> = env
            .state_min
            .iter()
            .zip(&env.state_max)
            .map(|(lo, hi)| if lo < hi { rng.gen_range(*lo..*hi) } else { *lo })
            .collect();
        let s = SystemState::from_flat(env.n_r, env.n_o, data)?;
        if !is_penetrating(env, &s) {
            return Ok(s);
        }
    }
    Err(SimError::RetryExhausted {
        retries: env.sample_retries,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::sim::{make_env, ParamValue, TaskId};

    fn env(task: TaskId) -> EnvModel {
        make_env(task, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn push_1d_gap() {
        let env = env(TaskId::BoxPush1d);
        for (xr, xo) in [(-0.5, 0.0), (0.7, 0.1), (0.0, 0.15), (0.3, 0.3)] {
            let s = SystemState::from_flat(1, 1, vec![xr, 0.0, xo, 0.0]).unwrap();
            let expected = ((xo - xr) as f64).abs() - 0.2;
            assert!((proximity(&env, &s).d[0] - expected.max(0.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn touching_anchors_read_zero() {
        let env = env(TaskId::BoxPush2d);
        let s = SystemState::from_flat(2, 2, vec![-0.2, 0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(proximity(&env, &s).d, vec![0.0]);
        assert!(!is_penetrating(&env, &s));
    }

    #[test]
    fn translation_invariance() {
        let env = env(TaskId::BoxPush2d);
        let base = vec![0.6, 0.2, 0.0, 0.0, 0.1, -0.1, 0.0, 0.0];
        let shifted: Vec<f64> = base
            .iter()
            .enumerate()
            .map(|(i, v)| match i {
                0 | 4 => v + 0.13,
                1 | 5 => v - 0.07,
                _ => *v,
            })
            .collect();
        let a = proximity(&env, &SystemState::from_flat(2, 2, base).unwrap());
        let b = proximity(&env, &SystemState::from_flat(2, 2, shifted).unwrap());
        assert!((a.d[0] - b.d[0]).abs() < 1e-12);
    }

    #[test]
    fn penetration_conventions() {
        let env = env(TaskId::BoxPush1d);
        let far = SystemState::from_flat(1, 1, vec![-1.0 + 0.5, 0.0, 1.5, 0.0]).unwrap();
        assert!(!is_penetrating(&env, &far));
        let inside = SystemState::from_flat(1, 1, vec![0.2, 0.0, 0.2, 0.0]).unwrap();
        assert!(is_penetrating(&env, &inside));
        let touching = SystemState::from_flat(1, 1, vec![0.0, 0.0, 0.2, 0.0]).unwrap();
        assert!(!is_penetrating(&env, &touching));
    }

    #[test]
    fn hand_start_is_feasible_and_sensors_nonnegative() {
        let env = env(TaskId::PlanarHand);
        assert!(!is_penetrating(&env, &env.start));
        let d = proximity(&env, &env.start).d;
        assert_eq!(d.len(), 2);
        assert!(d.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn collapsed_bounds_return_the_point() {
        let mut env = env(TaskId::BoxPush1d);
        let point = vec![-0.4, 0.0, 0.5, 0.0];
        env.state_min = point.clone();
        env.state_max = point.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_feasible_state(&env, &mut rng).unwrap().as_slice(), &point[..]);
    }

    #[test]
    fn infeasible_bounds_exhaust_retries() {
        let mut o = BTreeMap::new();
        o.insert("state_min".into(), ParamValue::List(vec![0.0, 0.0, 0.0, 0.0]));
        o.insert("state_max".into(), ParamValue::List(vec![0.05, 0.0, 0.05, 0.0]));
        o.insert("sample_retries".into(), ParamValue::Num(50.0));
        let env = make_env(TaskId::BoxPush1d, &o).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(
            sample_feasible_state(&env, &mut rng).unwrap_err(),
            SimError::RetryExhausted { retries: 50 }
        );
    }

    #[test]
    fn samples_are_centered_in_the_box() {
        let env = env(TaskId::BoxPush2d);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_000;
        let dim = env.n_s();
        let mut sum = vec![0.0; dim];
        for _ in 0..n {
            let s = sample_feasible_state(&env, &mut rng).unwrap();
            for (acc, v) in sum.iter_mut().zip(s.as_slice()) {
                *acc += v;
            }
        }
        // Velocity coordinates are untouched by rejection, so they must sit
        // within 3 sigma of the box center. Positions are checked loosely
        // since rejection removes overlapping configurations.
        for i in 0..dim {
            let (lo, hi) = (env.state_min[i], env.state_max[i]);
            let mean = sum[i] / n as f64;
            let sigma = (hi - lo) / 12f64.sqrt() / (n as f64).sqrt();
            let center = 0.5 * (lo + hi);
            let is_velocity = matches!(i, 2 | 3 | 6 | 7);
            let tol = if is_velocity { 3.0 * sigma } else { 0.05 * (hi - lo) };
            assert!((mean - center).abs() <= tol, "coord {i}: mean {mean} center {center}");
        }
    }
}
