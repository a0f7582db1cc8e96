use serde::{Deserialize, Serialize};

use super::env::{ContactParams, EnvModel, Geometry};
use super::geometry::{self as g, Vec2};
use super::{SimError, SystemState};

/// One active contact during a force evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactRecord {
    pub depth: f64,
    pub normal_force: f64,
    pub tangential_force: f64,
}

/// Substates and applied references of one rollout segment, including the
/// initial state (so `substates.len() == substeps + 1`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RolloutTrace {
    pub substates: Vec<SystemState>,
    pub applied_reference: Vec<Vec<f64>>,
}

#[inline]
fn normal_force(c: &ContactParams, depth: f64, depth_rate: f64) -> f64 {
    (c.stiffness * depth + c.damping * depth_rate).max(0.0)
}

/// Coulomb-capped viscous friction opposing `v_t`.
#[inline]
fn friction(mu: f64, f_n: f64, c_t: f64, v_t: f64) -> f64 {
    let mag = (mu * f_n).min(c_t * v_t.abs());
    if v_t > 0.0 {
        -mag
    } else if v_t < 0.0 {
        mag
    } else {
        0.0
    }
}

/// Accumulates contact, gravity and ground forces. `tau_r` receives
/// generalized robot forces, `f_o` generalized object forces.
fn accumulate_forces(
    env: &EnvModel,
    s: &SystemState,
    tau_r: &mut [f64],
    f_o: &mut [f64],
    mut log: Option<&mut Vec<ContactRecord>>,
) {
    let c = &env.contact;
    let mut record = |depth: f64, f_n: f64, f_t: f64| {
        if let Some(log) = log.as_deref_mut() {
            log.push(ContactRecord {
                depth,
                normal_force: f_n,
                tangential_force: f_t,
            });
        }
    };
    match &env.geometry {
        Geometry::Push1d {
            pusher_half,
            object_half,
        } => {
            let (xr, vr) = (s.q_r()[0], s.qd_r()[0]);
            let (xo, vo) = (s.q_o()[0], s.qd_o()[0]);
            let dx = xo - xr;
            let n = if dx >= 0.0 { 1.0 } else { -1.0 };
            let depth = pusher_half + object_half - dx.abs();
            if depth > 0.0 {
                let f_n = normal_force(c, depth, -(vo - vr) * n);
                f_o[0] += f_n * n;
                tau_r[0] -= f_n * n;
                record(depth, f_n, 0.0);
            }
            let cap = c.ground_friction * env.object_mass * env.gravity;
            f_o[0] += friction(1.0, cap, c.ground_damping, vo);
        }
        Geometry::Push2d {
            pusher_half,
            object_half,
        } => {
            let (pr, vr) = (s.q_r(), s.qd_r());
            let (po, vo) = (s.q_o(), s.qd_o());
            let sep = g::aabb_separation(pr, pusher_half, po, object_half);
            if sep[0] < 0.0 && sep[1] < 0.0 {
                // Resolve along the axis of least overlap.
                let axis = if sep[0] >= sep[1] { 0 } else { 1 };
                let other = 1 - axis;
                let n = if po[axis] - pr[axis] >= 0.0 { 1.0 } else { -1.0 };
                let depth = -sep[axis];
                let f_n = normal_force(c, depth, -(vo[axis] - vr[axis]) * n);
                let v_t = vo[other] - vr[other];
                let f_t = friction(c.friction, f_n, c.tangential_damping, v_t);
                f_o[axis] += f_n * n;
                tau_r[axis] -= f_n * n;
                f_o[other] += f_t;
                tau_r[other] -= f_t;
                record(depth, f_n, f_t);
            }
            let speed = vo[0].hypot(vo[1]);
            if speed > 0.0 {
                let cap = c.ground_friction * env.object_mass * env.gravity;
                let mag = cap.min(c.ground_damping * speed);
                f_o[0] -= mag * vo[0] / speed;
                f_o[1] -= mag * vo[1] / speed;
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
            let qd = s.qd_r();
            let center: Vec2 = [s.q_o()[0], s.q_o()[1]];
            let angle = s.q_o()[2];
            let v_center: Vec2 = [s.qd_o()[0], s.qd_o()[1]];
            let omega = s.qd_o()[2];
            let box_point_velocity = |p: Vec2| g::add(v_center, g::scale(g::perp(g::sub(p, center)), omega));
            let apply_to_box = |f_o: &mut [f64], force: Vec2, at: Vec2| {
                f_o[0] += force[0];
                f_o[1] += force[1];
                f_o[2] += g::cross(g::sub(at, center), force);
            };

            f_o[1] -= env.object_mass * env.gravity;

            // Box corners against the palm surface (y = 0).
            for corner in g::box_corners(center, angle, *box_half) {
                let depth = -corner[1];
                if depth > 0.0 {
                    let v = box_point_velocity(corner);
                    let f_n = normal_force(c, depth, -v[1]);
                    let f_t = friction(c.ground_friction, f_n, c.ground_damping, v[0]);
                    apply_to_box(f_o, [f_t, f_n], corner);
                    record(depth, f_n, f_t);
                }
            }

            for (k, base) in finger_bases.iter().enumerate() {
                let (q1, q2) = (q[2 * k], q[2 * k + 1]);
                let (w1, w2) = (qd[2 * k], qd[2 * k + 1]);
                let finger = g::finger_fk(*base, *link_length, q1, q2);
                for pt in g::finger_points(&finger, *link_circles) {
                    let v_pt = g::add(g::scale(pt.d_q1, w1), g::scale(pt.d_q2, w2));
                    let push_finger = |tau_r: &mut [f64], force: Vec2| {
                        tau_r[2 * k] += g::dot(pt.d_q1, force);
                        tau_r[2 * k + 1] += g::dot(pt.d_q2, force);
                    };

                    let hit = g::circle_box(pt.pos, *tip_radius, center, angle, *box_half);
                    if hit.depth > 0.0 {
                        let v_rel = g::sub(v_pt, box_point_velocity(hit.point));
                        let n = hit.normal;
                        let t = g::perp(n);
                        let f_n = normal_force(c, hit.depth, -g::dot(v_rel, n));
                        let f_t = friction(c.friction, f_n, c.tangential_damping, g::dot(v_rel, t));
                        let force = g::add(g::scale(n, f_n), g::scale(t, f_t));
                        push_finger(tau_r, force);
                        apply_to_box(f_o, g::scale(force, -1.0), hit.point);
                        record(hit.depth, f_n, f_t);
                    }

                    let depth = tip_radius - pt.pos[1];
                    if depth > 0.0 {
                        let f_n = normal_force(c, depth, -v_pt[1]);
                        let f_t = friction(c.ground_friction, f_n, c.ground_damping, v_pt[0]);
                        push_finger(tau_r, [f_t, f_n]);
                        record(depth, f_n, f_t);
                    }
                }
            }
        }
    }
}

/// Active contacts of `s`, for inspection and invariant checks.
pub fn contact_forces(env: &EnvModel, s: &SystemState) -> Vec<ContactRecord> {
    let mut tau = vec![0.0; env.n_r];
    let mut f = vec![0.0; env.n_o];
    let mut log = Vec::new();
    accumulate_forces(env, s, &mut tau, &mut f, Some(&mut log));
    log
}

/// Advances `s` by one control substep in place.
pub(crate) fn step_in_place(env: &EnvModel, s: &mut SystemState, a_ref: &[f64], tau: &mut [f64], f_o: &mut [f64]) -> Result<(), SimError> {
    let (n_r, n_o) = (env.n_r, env.n_o);
    tau.iter_mut().for_each(|v| *v = 0.0);
    f_o.iter_mut().for_each(|v| *v = 0.0);
    accumulate_forces(env, s, tau, f_o, None);
    let dt = env.dt_c;
    let data = s.as_mut_slice();
    for j in 0..n_r {
        let (q, qd) = (data[j], data[n_r + j]);
        let u = -env.kp[j] * (q - a_ref[j]) - env.kd[j] * qd;
        let qdd = (u + tau[j]) / env.robot_inertia[j];
        let qd_new = qd + dt * qdd;
        data[n_r + j] = qd_new;
        data[j] = q + dt * qd_new;
    }
    let off = 2 * n_r;
    for j in 0..n_o {
        let inertia = match env.geometry {
            Geometry::Hand { .. } if j == 2 => env.object_inertia,
            _ => env.object_mass,
        };
        let qd_new = data[off + n_o + j] + dt * f_o[j] / inertia;
        data[off + n_o + j] = qd_new;
        data[off + j] += dt * qd_new;
    }
    clamp_to_bounds(env, s);
    if let Some(coordinate) = s.first_non_finite() {
        return Err(SimError::Divergence { coordinate });
    }
    Ok(())
}

/// Clamps positions to the state box (zeroing the matching velocity when a
/// position bound is hit) and velocities to their own bounds.
fn clamp_to_bounds(env: &EnvModel, s: &mut SystemState) {
    let (lo, hi) = (&env.state_min, &env.state_max);
    let data = s.as_mut_slice();
    for (pos_off, n) in [(0, env.n_r), (2 * env.n_r, env.n_o)] {
        for j in 0..n {
            let (p, v) = (pos_off + j, pos_off + n + j);
            if data[p] < lo[p] {
                data[p] = lo[p];
                data[v] = 0.0;
            } else if data[p] > hi[p] {
                data[p] = hi[p];
                data[v] = 0.0;
            }
            data[v] = data[v].clamp(lo[v], hi[v]);
        }
    }
}

/// One semi-implicit Euler step of length `dt_c` tracking the absolute joint
/// reference `a_ref` with the PD controller.
pub fn substep(env: &EnvModel, s: &SystemState, a_ref: &[f64]) -> Result<SystemState, SimError> {
    check_dims(env, s, a_ref)?;
    let mut out = s.clone();
    let mut tau = vec![0.0; env.n_r];
    let mut f_o = vec![0.0; env.n_o];
    step_in_place(env, &mut out, a_ref, &mut tau, &mut f_o)?;
    Ok(out)
}

fn check_dims(env: &EnvModel, s: &SystemState, cmd: &[f64]) -> Result<(), SimError> {
    if s.n_r() != env.n_r || s.n_o() != env.n_o {
        return Err(SimError::Dimension {
            what: "state",
            expected: env.n_s(),
            actual: s.dim(),
        });
    }
    if cmd.len() != env.n_r {
        return Err(SimError::Dimension {
            what: "joint command",
            expected: env.n_r,
            actual: cmd.len(),
        });
    }
    Ok(())
}

/// Number of substeps for a segment of `dt_total` seconds, which must be a
/// positive integer multiple of `dt_a`.
pub(crate) fn segment_substeps(env: &EnvModel, dt_total: f64) -> Result<usize, SimError> {
    let k = dt_total / env.dt_a;
    if !(k >= 1.0 - 1e-9) || (k - k.round()).abs() > 1e-9 * k.max(1.0) {
        return Err(SimError::BadDuration {
            dt_total,
            dt_a: env.dt_a,
        });
    }
    Ok(k.round() as usize * env.substeps_per_action())
}

/// Reference at substep `t` of `n`: linear blend from `prev` to `new`,
/// equal to `new` exactly at `t == n`.
#[inline]
pub(crate) fn blend_reference(prev: &[f64], new: &[f64], t: usize, n: usize, out: &mut [f64]) {
    let w = t as f64 / n as f64;
    for ((o, p), q) in out.iter_mut().zip(prev).zip(new) {
        *o = if t >= n { *q } else { p + (q - p) * w };
    }
}

/// Rollout without recording the trace.
pub(crate) fn rollout_final(
    env: &EnvModel,
    s: &SystemState,
    prev_cmd: &[f64],
    new_cmd: &[f64],
    dt_total: f64,
) -> Result<SystemState, SimError> {
    check_dims(env, s, prev_cmd)?;
    check_dims(env, s, new_cmd)?;
    let n = segment_substeps(env, dt_total)?;
    let mut state = s.clone();
    let mut reference = vec![0.0; env.n_r];
    let mut tau = vec![0.0; env.n_r];
    let mut f_o = vec![0.0; env.n_o];
    for t in 1..=n {
        blend_reference(prev_cmd, new_cmd, t, n, &mut reference);
        step_in_place(env, &mut state, &reference, &mut tau, &mut f_o)?;
    }
    Ok(state)
}

/// Tracks a reference that moves linearly from `prev_cmd` to `new_cmd` over
/// `dt_total` seconds.
pub fn rollout_segment(
    env: &EnvModel,
    s: &SystemState,
    prev_cmd: &[f64],
    new_cmd: &[f64],
    dt_total: f64,
) -> Result<(SystemState, RolloutTrace), SimError> {
    check_dims(env, s, prev_cmd)?;
    check_dims(env, s, new_cmd)?;
    let n = segment_substeps(env, dt_total)?;
    let mut state = s.clone();
    let mut trace = RolloutTrace {
        substates: Vec::with_capacity(n + 1),
        applied_reference: Vec::with_capacity(n + 1),
    };
    trace.substates.push(state.clone());
    trace.applied_reference.push(prev_cmd.to_vec());
    let mut reference = vec![0.0; env.n_r];
    let mut tau = vec![0.0; env.n_r];
    let mut f_o = vec![0.0; env.n_o];
    for t in 1..=n {
        blend_reference(prev_cmd, new_cmd, t, n, &mut reference);
        step_in_place(env, &mut state, &reference, &mut tau, &mut f_o)?;
        trace.substates.push(state.clone());
        trace.applied_reference.push(reference.clone());
    }
    Ok((state, trace))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::sim::{make_env, ParamValue, TaskId};

    fn env_with(task: TaskId, pairs: &[(&str, f64)]) -> EnvModel {
        let o: BTreeMap<String, ParamValue> = pairs.iter().map(|(k, v)| (k.to_string(), ParamValue::Num(*v))).collect();
        make_env(task, &o).unwrap()
    }

    #[test]
    fn force_free_drift() {
        let env = env_with(TaskId::BoxPush1d, &[("gravity", 0.0), ("ground_friction", 0.0)]);
        let s = SystemState::from_flat(1, 1, vec![-0.5, 0.0, 0.5, 0.3]).unwrap();
        let next = substep(&env, &s, &[-0.5]).unwrap();
        assert_eq!(next.q_o()[0], 0.5 + env.dt_c * 0.3);
        assert_eq!(next.qd_o()[0], 0.3);
    }

    #[test]
    fn pd_equilibrium_is_fixed_point() {
        let env = make_env(TaskId::BoxPush2d, &BTreeMap::new()).unwrap();
        let s = env.start.clone();
        let next = substep(&env, &s, s.q_r()).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn contact_is_repulsive() {
        let env = env_with(TaskId::BoxPush1d, &[("ground_friction", 0.0)]);
        // Pusher overlapping the object from the left by 5 mm.
        let s = SystemState::from_flat(1, 1, vec![-0.195, 0.0, 0.0, 0.0]).unwrap();
        let next = substep(&env, &s, s.q_r()).unwrap();
        assert!(next.qd_o()[0] > 0.0);
        assert!(next.qd_r()[0] < 0.0);
        // Separating fast: damping would pull, clamp keeps it non-adhesive.
        let s = SystemState::from_flat(1, 1, vec![-0.1999, -5.0, 0.0, 0.0]).unwrap();
        let next = substep(&env, &s, s.q_r()).unwrap();
        assert!(next.qd_o()[0] >= 0.0);
        for rec in contact_forces(&env, &s) {
            assert!(rec.normal_force >= 0.0);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let env = make_env(TaskId::BoxPush1d, &BTreeMap::new()).unwrap();
        let s = env.start.clone();
        let err = substep(&env, &s, &[f64::NAN]).unwrap_err();
        assert!(matches!(err, SimError::Divergence { coordinate: 0 }));
    }

    #[test]
    fn trace_length_and_reference_endpoints() {
        let env = make_env(TaskId::BoxPush1d, &BTreeMap::new()).unwrap();
        let s = env.start.clone();
        let (end, trace) = rollout_segment(&env, &s, &[-0.3], &[0.1], 2.0 * env.dt_a).unwrap();
        assert_eq!(trace.substates.len(), 81);
        assert_eq!(trace.applied_reference.len(), 81);
        assert_eq!(trace.applied_reference[0], vec![-0.3]);
        assert_eq!(trace.applied_reference[80], vec![0.1]);
        assert_eq!(trace.substates[80], end);
    }

    #[test]
    fn static_hold_is_unchanged() {
        let env = make_env(TaskId::BoxPush1d, &BTreeMap::new()).unwrap();
        let s = env.start.clone();
        let (end, _) = rollout_segment(&env, &s, s.q_r(), s.q_r(), env.dt_a).unwrap();
        assert_eq!(end, s);
    }

    #[test]
    fn bad_durations_rejected() {
        let env = make_env(TaskId::BoxPush1d, &BTreeMap::new()).unwrap();
        let s = env.start.clone();
        assert!(rollout_segment(&env, &s, &[0.0], &[0.0], 0.5).is_err());
        assert!(rollout_segment(&env, &s, &[0.0], &[0.0], 0.0).is_err());
    }

    #[test]
    fn position_bounds_clamp_and_zero_velocity() {
        let env = make_env(TaskId::BoxPush1d, &BTreeMap::new()).unwrap();
        let s = SystemState::from_flat(1, 1, vec![-0.3, 0.0, 1.499, 1.0]).unwrap();
        let next = substep(&env, &s, &[-0.3]).unwrap();
        assert_eq!(next.q_o()[0], 1.5);
        assert_eq!(next.qd_o()[0], 0.0);
    }

    #[test]
    fn hand_box_rests_on_palm() {
        let env = make_env(TaskId::PlanarHand, &BTreeMap::new()).unwrap();
        let s = env.start.clone();
        let (end, _) = rollout_segment(&env, &s, s.q_r(), s.q_r(), 5.0 * env.dt_a).unwrap();
        // Settles with millimetre compliance and stays upright.
        assert!((end.q_o()[1] - 0.1).abs() < 0.01, "{:?}", end.q_o());
        assert!(end.q_o()[2].abs() < 1e-3);
        assert!(end.qd_o().iter().all(|v| v.abs() < 0.05));
    }
}
