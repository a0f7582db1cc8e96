//! Closest-point queries for the handful of feature pairs the planar tasks need.

pub(crate) type Vec2 = [f64; 2];

#[inline]
pub(crate) fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub(crate) fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn scale(a: Vec2, s: f64) -> Vec2 {
    [a[0] * s, a[1] * s]
}

#[inline]
pub(crate) fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

/// Counter-clockwise perpendicular.
#[inline]
pub(crate) fn perp(a: Vec2) -> Vec2 {
    [-a[1], a[0]]
}

/// z-component of the planar cross product.
#[inline]
pub(crate) fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub(crate) fn rotate(a: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    [c * a[0] - s * a[1], s * a[0] + c * a[1]]
}

/// Overlap of a circle with an oriented box.
pub(crate) struct CircleBoxHit {
    /// Penetration depth (positive when overlapping).
    pub depth: f64,
    /// Unit normal pointing from the box towards the circle.
    pub normal: Vec2,
    /// Contact point on the box surface.
    pub point: Vec2,
    /// Surface gap `max(0, distance - radius)` style signed distance.
    pub signed_gap: f64,
}

/// Signed query between a circle and a box with center `center`, rotation
/// `angle` and half extents `half`.
pub(crate) fn circle_box(circle: Vec2, radius: f64, center: Vec2, angle: f64, half: Vec2) -> CircleBoxHit {
    let local = rotate(sub(circle, center), -angle);
    let clamped = [local[0].clamp(-half[0], half[0]), local[1].clamp(-half[1], half[1])];
    let diff = sub(local, clamped);
    let dist = norm(diff);
    let (normal_local, point_local, signed_gap) = if dist > 0.0 {
        (scale(diff, 1.0 / dist), clamped, dist - radius)
    } else {
        // Center inside: push out through the nearest face.
        let gx = half[0] - local[0].abs();
        let gy = half[1] - local[1].abs();
        if gx <= gy {
            let s = if local[0] >= 0.0 { 1.0 } else { -1.0 };
            ([s, 0.0], [s * half[0], local[1]], -gx - radius)
        } else {
            let s = if local[1] >= 0.0 { 1.0 } else { -1.0 };
            ([0.0, s], [local[0], s * half[1]], -gy - radius)
        }
    };
    CircleBoxHit {
        depth: -signed_gap,
        normal: rotate(normal_local, angle),
        point: add(center, rotate(point_local, angle)),
        signed_gap,
    }
}

/// Box corners in world coordinates, counter-clockwise from bottom-left.
pub(crate) fn box_corners(center: Vec2, angle: f64, half: Vec2) -> [Vec2; 4] {
    let local = [
        [-half[0], -half[1]],
        [half[0], -half[1]],
        [half[0], half[1]],
        [-half[0], half[1]],
    ];
    local.map(|l| add(center, rotate(l, angle)))
}

/// Kinematics of one two-link finger.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Finger {
    pub base: Vec2,
    pub joint: Vec2,
    pub tip: Vec2,
}

pub(crate) fn finger_fk(base: Vec2, link: f64, q1: f64, q2: f64) -> Finger {
    let joint = add(base, [link * q1.cos(), link * q1.sin()]);
    let tip = add(joint, [link * (q1 + q2).cos(), link * (q1 + q2).sin()]);
    Finger { base, joint, tip }
}

/// A contact circle along a finger: position plus the partial derivatives of
/// its position with respect to the two joint angles.
#[derive(Clone, Copy, Debug)]
pub(crate) struct FingerPoint {
    pub pos: Vec2,
    pub d_q1: Vec2,
    pub d_q2: Vec2,
}

/// Contact circles at fractions `j / n` (j = 1..=n) along both links; the last
/// one is the fingertip.
pub(crate) fn finger_points(f: &Finger, n: usize) -> impl Iterator<Item = FingerPoint> + '_ {
    let proximal = (1..=n).map(move |j| {
        let t = j as f64 / n as f64;
        let pos = add(f.base, scale(sub(f.joint, f.base), t));
        FingerPoint {
            pos,
            d_q1: perp(sub(pos, f.base)),
            d_q2: [0.0, 0.0],
        }
    });
    let distal = (1..=n).map(move |j| {
        let t = j as f64 / n as f64;
        let pos = add(f.joint, scale(sub(f.tip, f.joint), t));
        FingerPoint {
            pos,
            d_q1: perp(sub(pos, f.base)),
            d_q2: perp(sub(pos, f.joint)),
        }
    });
    proximal.chain(distal)
}

/// Gap between two axis-aligned boxes: per-axis separations (negative when
/// overlapping along that axis).
pub(crate) fn aabb_separation(ca: &[f64], ha: &[f64], cb: &[f64], hb: &[f64]) -> Vec<f64> {
    ca.iter()
        .zip(cb)
        .zip(ha.iter().zip(hb))
        .map(|((a, b), (x, y))| (b - a).abs() - (x + y))
        .collect()
}
