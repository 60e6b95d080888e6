//! Keypoint smoothing of joint-rotation trajectories.
//!
//! Angles are in degrees. A 3-DOF group `[a, b, c]` is the intrinsic x-y-z
//! rotation `R = Rx(a) * Ry(b) * Rz(c)`: pitch about x, then yaw about the new
//! y, then roll about the new z. 2-DOF groups are padded with a zero roll.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::features::{Region, MODEL_FRAME_RATE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Slerp,
    Squad,
}

impl std::str::FromStr for Interpolation {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slerp" => Ok(Self::Slerp),
            "squad" => Ok(Self::Squad),
            _ => Err(invalid(format!("unknown interpolation `{s}` (expected slerp or squad)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeypointPlan {
    rate: f64,
    frame_rate: f64,
    interpolation: Interpolation,
}

impl KeypointPlan {
    pub fn new(rate: f64, frame_rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !(frame_rate > 0.0) || rate > frame_rate {
            return Err(invalid(format!(
                "keypoint rate must lie in (0, frame rate]; got {rate} at {frame_rate} Hz"
            )));
        }
        Ok(Self { rate, frame_rate, interpolation: Interpolation::Slerp })
    }

    /// Default plan for a region at the model frame rate.
    pub fn for_region(region: Region) -> Self {
        Self::new(region.keypoint_rate(), MODEL_FRAME_RATE).expect("region rates are valid")
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    /// Keypoint frame indices for a trajectory of `n` frames: every
    /// `frame_rate / rate` frames, rounded, plus the last frame.
    pub fn keypoints(&self, n: usize) -> Vec<usize> {
        if n == 0 {
            return Vec::new();
        }
        let step = self.frame_rate / self.rate;
        let mut out = Vec::new();
        let mut k = 0usize;
        loop {
            let idx = (k as f64 * step).round() as usize;
            if idx >= n - 1 {
                break;
            }
            if out.last() != Some(&idx) {
                out.push(idx);
            }
            k += 1;
        }
        out.push(n - 1);
        out
    }
}

pub fn euler_to_quat(deg: [f64; 3]) -> UnitQuaternion<f64> {
    let [a, b, c] = deg.map(f64::to_radians);
    UnitQuaternion::from_axis_angle(&Vector3::x_axis(), a)
        * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), b)
        * UnitQuaternion::from_axis_angle(&Vector3::z_axis(), c)
}

/// Inverse of [`euler_to_quat`] with the middle angle in [-90, 90].
pub fn quat_to_euler(q: &UnitQuaternion<f64>) -> [f64; 3] {
    let r = q.to_rotation_matrix();
    let m = r.matrix();
    let b = m[(0, 2)].clamp(-1.0, 1.0).asin();
    let (a, c) = if m[(0, 2)].abs() < 1.0 - 1e-12 {
        ((-m[(1, 2)]).atan2(m[(2, 2)]), (-m[(0, 1)]).atan2(m[(0, 0)]))
    } else {
        // gimbal lock: only a +/- c is defined; put it all on the first angle
        (m[(2, 1)].atan2(m[(1, 1)]), 0.0)
    };
    [a.to_degrees(), b.to_degrees(), c.to_degrees()]
}

/// Rotation angle between two orientations, in degrees.
pub fn angular_distance(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let r = a.inverse() * b;
    (2.0 * r.imag().norm().atan2(r.w.abs())).to_degrees()
}

/// Spherical linear interpolation along the shorter arc.
pub fn slerp(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>, t: f64) -> UnitQuaternion<f64> {
    let qa = a.into_inner();
    let mut qb = b.into_inner();
    let mut d = qa.coords.dot(&qb.coords);
    if d < 0.0 {
        qb = -qb;
        d = -d;
    }
    let q = if d > 1.0 - 1e-12 {
        qa * (1.0 - t) + qb * t
    } else {
        let th = d.min(1.0).acos();
        let s = th.sin();
        qa * (((1.0 - t) * th).sin() / s) + qb * ((t * th).sin() / s)
    };
    UnitQuaternion::new_normalize(q)
}

fn qlog(q: &Quaternion<f64>) -> Quaternion<f64> {
    let v = q.imag();
    let n = v.norm();
    if n < 1e-15 {
        return Quaternion::new(0.0, 0.0, 0.0, 0.0);
    }
    let th = n.atan2(q.w);
    let v = v * (th / n);
    Quaternion::new(0.0, v.x, v.y, v.z)
}

fn qexp(q: &Quaternion<f64>) -> Quaternion<f64> {
    let v = q.imag();
    let n = v.norm();
    if n < 1e-15 {
        return Quaternion::new(1.0, 0.0, 0.0, 0.0);
    }
    let v = v * (n.sin() / n);
    Quaternion::new(n.cos(), v.x, v.y, v.z)
}

fn squad_control(prev: &UnitQuaternion<f64>, cur: &UnitQuaternion<f64>, next: &UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    let inv = cur.inverse();
    let l1 = qlog(&(inv * next).into_inner());
    let l2 = qlog(&(inv * prev).into_inner());
    let e = qexp(&((l1 + l2) * -0.25));
    UnitQuaternion::new_normalize(cur.into_inner() * e)
}

/// Flips every quaternion onto the hemisphere of its predecessor.
fn align_hemispheres(qs: &mut [UnitQuaternion<f64>]) {
    for i in 1..qs.len() {
        if qs[i - 1].coords.dot(&qs[i].coords) < 0.0 {
            qs[i] = UnitQuaternion::new_unchecked(-qs[i].into_inner());
        }
    }
}

/// Shifts each angle by multiples of 360 to land closest to `reference`.
fn unwrap_to(angles: [f64; 3], reference: [f64; 3]) -> [f64; 3] {
    let mut out = angles;
    for (o, r) in out.iter_mut().zip(reference) {
        *o += 360.0 * ((r - *o) / 360.0).round();
    }
    out
}

fn group_angles(frame: &[f64], (start, len): (usize, usize)) -> [f64; 3] {
    let mut a = [0.0; 3];
    a[..len].copy_from_slice(&frame[start..start + len]);
    a
}

fn check_groups(groups: &[(usize, usize)], dim: usize) -> Result<()> {
    let mut used = vec![false; dim];
    for &(start, len) in groups {
        if !(2..=3).contains(&len) || start + len > dim {
            return Err(invalid(format!("rotation group ({start}, {len}) does not fit a {dim}-D frame")));
        }
        for u in &mut used[start..start + len] {
            if *u {
                return Err(invalid("rotation groups overlap"));
            }
            *u = true;
        }
    }
    Ok(())
}

/// Smooths a trajectory by interpolating its keypoints in quaternion space.
///
/// Keypoint frames are copied unchanged. Dimensions outside `groups` are
/// linearly interpolated between keypoints.
pub fn smooth_trajectory(traj: &[Vec<f64>], groups: &[(usize, usize)], plan: &KeypointPlan) -> Result<Vec<Vec<f64>>> {
    if traj.len() < 2 {
        return Err(invalid(format!("smoothing needs at least 2 frames, got {}", traj.len())));
    }
    let dim = traj[0].len();
    if traj.iter().any(|f| f.len() != dim) {
        return Err(invalid("trajectory frames have different widths"));
    }
    if traj.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid("trajectory contains non-finite angles"));
    }
    check_groups(groups, dim)?;
    let keys = plan.keypoints(traj.len());

    let mut out = traj.to_vec();
    for w in keys.windows(2) {
        let (k0, k1) = (w[0], w[1]);
        for (t, frame) in out.iter_mut().enumerate().take(k1).skip(k0 + 1) {
            let u = (t - k0) as f64 / (k1 - k0) as f64;
            for (v, (a, b)) in frame.iter_mut().zip(traj[k0].iter().zip(&traj[k1])) {
                *v = a + u * (b - a);
            }
        }
    }

    for &g in groups {
        let mut qs: Vec<UnitQuaternion<f64>> = keys.iter().map(|&k| euler_to_quat(group_angles(&traj[k], g))).collect();
        align_hemispheres(&mut qs);
        let controls: Vec<UnitQuaternion<f64>> = match plan.interpolation {
            Interpolation::Slerp => Vec::new(),
            Interpolation::Squad => (0..qs.len())
                .map(|i| {
                    if i == 0 || i + 1 == qs.len() {
                        qs[i]
                    } else {
                        squad_control(&qs[i - 1], &qs[i], &qs[i + 1])
                    }
                })
                .collect(),
        };
        for (s, w) in keys.windows(2).enumerate() {
            let (k0, k1) = (w[0], w[1]);
            for t in k0 + 1..k1 {
                let u = (t - k0) as f64 / (k1 - k0) as f64;
                let q = match plan.interpolation {
                    Interpolation::Slerp => slerp(&qs[s], &qs[s + 1], u),
                    Interpolation::Squad => {
                        let a = slerp_long(&qs[s], &qs[s + 1], u);
                        let b = slerp_long(&controls[s], &controls[s + 1], u);
                        slerp_long(&a, &b, 2.0 * u * (1.0 - u))
                    }
                };
                let reference = group_angles(&out[t], g);
                let e = unwrap_to(quat_to_euler(&q), reference);
                out[t][g.0..g.0 + g.1].copy_from_slice(&e[..g.1]);
            }
        }
    }
    Ok(out)
}

// squad's inner interpolations must not flip hemispheres
fn slerp_long(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>, t: f64) -> UnitQuaternion<f64> {
    let qa = a.into_inner();
    let qb = b.into_inner();
    let d = qa.coords.dot(&qb.coords).clamp(-1.0, 1.0);
    let q = if d.abs() > 1.0 - 1e-12 {
        qa * (1.0 - t) + qb * t
    } else {
        let th = d.acos();
        let s = th.sin();
        qa * (((1.0 - t) * th).sin() / s) + qb * ((t * th).sin() / s)
    };
    UnitQuaternion::new_normalize(q)
}

/// [`smooth_trajectory`] with the region's rotation groups.
pub fn smooth_region(traj: &[Vec<f64>], region: Region, plan: &KeypointPlan) -> Result<Vec<Vec<f64>>> {
    if traj.first().is_some_and(|f| f.len() != region.motion_dim()) {
        return Err(invalid(format!("{region} frames must be {}-D", region.motion_dim())));
    }
    smooth_trajectory(traj, region.rotation_groups(), plan)
}

/// Largest rotation between consecutive frames of one group, in degrees.
pub fn max_angular_speed(traj: &[Vec<f64>], group: (usize, usize)) -> f64 {
    traj.windows(2)
        .map(|w| angular_distance(&euler_to_quat(group_angles(&w[0], group)), &euler_to_quat(group_angles(&w[1], group))))
        .fold(0.0, f64::max)
}
