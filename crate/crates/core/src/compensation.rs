//! Tilt compensation: tray attitude that keeps the apparent gravity normal to
//! the tray, and the transform chain from the center of rotation to the
//! robot flange.

use nalgebra::{Matrix3, Matrix4, Rotation3, Vector3};
use std::f64::consts::PI;
use thiserror::Error;

use crate::smoothers::Jet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompensationError {
    #[error("free fall: g + az = {0} <= 0, tilt compensation undefined")]
    FreeFall(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid mounting transform: {0}")]
    Mount(String),
}

/// Filtered Cartesian acceleration of the center of rotation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartesianAccel {
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

impl CartesianAccel {
    pub fn new(ax: f64, ay: f64, az: f64) -> Self {
        CartesianAccel { ax, ay, az }
    }
}

/// Compensating attitude for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltPose {
    pub beta: f64,
    pub phi: f64,
    pub rotation: Matrix3<f64>,
    pub t_0_cor: Matrix4<f64>,
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

fn support_denominator(az: f64, g: f64) -> Result<f64, CompensationError> {
    let d = g + az;
    if d > 0.0 {
        Ok(d)
    } else {
        Err(CompensationError::FreeFall(d))
    }
}

/// Tilt `beta` and azimuth `phi` of the compensating rotation.
///
/// `phi` is meaningless when there is no lateral acceleration; it is then
/// reported as `pi` and the rotation degenerates to the identity anyway.
pub fn tilt_angles(a: CartesianAccel, g: f64) -> Result<(f64, f64), CompensationError> {
    let d = support_denominator(a.az, g)?;
    let lateral = a.ax.hypot(a.ay);
    let beta = -(lateral / d).atan();
    let phi = if a.ax == 0.0 && a.ay == 0.0 {
        PI
    } else {
        wrap_angle(PI + a.ay.atan2(a.ax))
    };
    Ok((beta, phi))
}

/// `Rz(phi) * Ry(beta) * Rz(-phi)`.
pub fn rotation_matrix(beta: f64, phi: f64) -> Matrix3<f64> {
    let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), phi);
    let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), beta);
    (rz * ry * rz.inverse()).into_inner()
}

/// Tilt for motion restricted to the x-z plane.
///
/// Sign convention: this is the pendulum-frame angle, so the corresponding
/// tray attitude is a rotation of `-beta` about the world y axis, which is
/// what [`rotation_matrix`] produces from [`tilt_angles`] with `ay = 0`.
pub fn planar_tilt(ax: f64, az: f64, g: f64) -> Result<f64, CompensationError> {
    let d = support_denominator(az, g)?;
    Ok(-(ax / d).atan())
}

/// Planar tilt and its first two time derivatives, computed analytically
/// from acceleration, jerk and snap of the horizontal and vertical motion.
pub fn planar_tilt_rates(x: &Jet, z: &Jet, g: f64) -> Result<[f64; 3], CompensationError> {
    let d = support_denominator(z.acc(), g)?;
    let (dd, ddd) = (z.jerk(), z.snap());
    let q = x.acc() / d;
    let num = x.jerk() * d - x.acc() * dd;
    let q_dot = num / (d * d);
    let q_ddot = (x.snap() * d - x.acc() * ddd) / (d * d) - 2.0 * dd * num / (d * d * d);
    let s = 1.0 + q * q;
    let beta = -q.atan();
    let beta_dot = -q_dot / s;
    let beta_ddot = -(q_ddot * s - 2.0 * q * q_dot * q_dot) / (s * s);
    Ok([beta, beta_dot, beta_ddot])
}

/// Related-work compensator that leaves a residual tilt of `atan(mu)`; kept
/// only for comparison.
pub fn baseline_friction_tilt(a_y: f64, mu: f64, g: f64) -> Result<f64, CompensationError> {
    let den = g + mu * a_y;
    if den <= 0.0 {
        return Err(CompensationError::Domain(format!("g + mu*a_y = {den} <= 0")));
    }
    Ok(((mu * g - a_y) / den).atan())
}

/// Equivalent pendulum length of a slosh mode with natural frequency `omega_n`.
pub fn pendulum_length_from_frequency(omega_n: f64, g: f64) -> Result<f64, CompensationError> {
    if !(omega_n.is_finite() && omega_n > 0.0) {
        return Err(CompensationError::Domain(format!("omega_n must be positive, got {omega_n}")));
    }
    Ok(g / (omega_n * omega_n))
}

pub fn homogeneous(rotation: &Matrix3<f64>, p: &Vector3<f64>) -> Matrix4<f64> {
    let mut t = Matrix4::identity();
    t.fixed_view_mut::<3, 3>(0, 0).copy_from(rotation);
    t.fixed_view_mut::<3, 1>(0, 3).copy_from(p);
    t
}

/// Builds the full compensating pose for an acceleration sample at CoR position `p`.
pub fn tilt_pose(a: CartesianAccel, p: &Vector3<f64>, g: f64) -> Result<TiltPose, CompensationError> {
    let (beta, phi) = tilt_angles(a, g)?;
    let rotation = rotation_matrix(beta, phi);
    let t_0_cor = homogeneous(&rotation, p);
    Ok(TiltPose { beta, phi, rotation, t_0_cor })
}

/// Constant flange-to-CoR transform.
#[derive(Debug, Clone, PartialEq)]
pub struct MountingTransform {
    t_f_cor: Matrix4<f64>,
}

impl MountingTransform {
    pub fn identity() -> Self {
        MountingTransform { t_f_cor: Matrix4::identity() }
    }

    /// `rotation` is the object (or container) orientation in the flange
    /// frame, `cor` the CoR position in the flange frame.
    pub fn new(rotation: Matrix3<f64>, cor: Vector3<f64>) -> Result<Self, CompensationError> {
        let err = (rotation * rotation.transpose() - Matrix3::identity()).amax();
        if !(err < 1e-9) || (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(CompensationError::Mount(format!(
                "rotation block is not a proper rotation (orthonormality error {err:e})"
            )));
        }
        if !cor.iter().all(|v| v.is_finite()) {
            return Err(CompensationError::Mount("non-finite CoR position".into()));
        }
        Ok(MountingTransform { t_f_cor: homogeneous(&rotation, &cor) })
    }

    /// Solid object: rotate about its center of mass.
    pub fn solid(object_rotation: Matrix3<f64>, p_com: Vector3<f64>) -> Result<Self, CompensationError> {
        Self::new(object_rotation, p_com)
    }

    /// Liquid: rotate about the equivalent pendulum bob, which sits a
    /// pendulum length below the free surface along the container axis.
    pub fn liquid(
        container_rotation: Matrix3<f64>,
        p_surface: Vector3<f64>,
        pendulum_length: f64,
    ) -> Result<Self, CompensationError> {
        let axis = container_rotation * Vector3::z();
        Self::new(container_rotation, p_surface - pendulum_length * axis)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.t_f_cor
    }
}

/// Flange pose `0T_F = 0T_CoR * (FT_CoR)^-1`.
pub fn compose_flange_pose(
    p: &Vector3<f64>,
    rotation: &Matrix3<f64>,
    mount: &MountingTransform,
) -> Result<Matrix4<f64>, CompensationError> {
    let inv = mount
        .t_f_cor
        .try_inverse()
        .ok_or_else(|| CompensationError::Mount("singular mounting transform".into()))?;
    Ok(homogeneous(rotation, p) * inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::GRAVITY as G;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tilt_angle_examples() {
        assert_eq!(tilt_angles(CartesianAccel::new(0.0, 0.0, 0.0), G).unwrap(), (0.0, PI));

        let (b, p) = tilt_angles(CartesianAccel::new(G, 0.0, 0.0), G).unwrap();
        assert_abs_diff_eq!(b, -PI / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p, PI, epsilon = 1e-15);

        let (b, p) = tilt_angles(CartesianAccel::new(0.0, G, -G / 2.0), G).unwrap();
        assert_abs_diff_eq!(b, -1.10714871779409, epsilon = 1e-13);
        assert_abs_diff_eq!(p, -PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn free_fall_is_an_error() {
        assert!(matches!(
            tilt_angles(CartesianAccel::new(1.0, 0.0, -G), G),
            Err(CompensationError::FreeFall(_))
        ));
        assert!(planar_tilt(1.0, -20.0, G).is_err());
    }

    #[test]
    fn rotation_examples() {
        assert_abs_diff_eq!(rotation_matrix(0.0, 2.1), Matrix3::identity(), epsilon = 1e-15);
        let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), 0.4).into_inner();
        assert_abs_diff_eq!(rotation_matrix(0.4, 0.0), ry, epsilon = 1e-15);
        let r = rotation_matrix(0.3, 1.2);
        assert_abs_diff_eq!(r * r.transpose(), Matrix3::identity(), epsilon = 1e-14);
        assert_abs_diff_eq!(r.determinant(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn planar_examples() {
        assert_eq!(planar_tilt(0.0, 0.0, G).unwrap(), 0.0);
        assert_abs_diff_eq!(planar_tilt(G, G, G).unwrap(), -(0.5f64).atan(), epsilon = 1e-15);
        assert_abs_diff_eq!(planar_tilt(G, 0.0, G).unwrap(), -PI / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(planar_tilt(2.0, -4.0, 9.81).unwrap(), -0.331528935468941, epsilon = 1e-13);
    }

    #[test]
    fn planar_matches_spatial_attitude() {
        for ax in [-7.0, -0.3, 0.0, 0.2, 4.5] {
            for az in [-3.0, 0.0, 2.0] {
                let (b, p) = tilt_angles(CartesianAccel::new(ax, 0.0, az), G).unwrap();
                let beta = planar_tilt(ax, az, G).unwrap();
                let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), -beta).into_inner();
                assert_abs_diff_eq!(rotation_matrix(b, p), ry, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn tilt_rates_match_finite_differences() {
        // x acceleration a(t) = sin(2t), z acceleration c(t) = 0.5 cos(3t)
        let g = G;
        let jets = |t: f64| {
            let x = Jet([0.0, 0.0, (2.0 * t).sin(), 2.0 * (2.0 * t).cos(), -4.0 * (2.0 * t).sin()]);
            let z = Jet([0.0, 0.0, 0.5 * (3.0 * t).cos(), -1.5 * (3.0 * t).sin(), -4.5 * (3.0 * t).cos()]);
            (x, z)
        };
        let h = 1e-4;
        for t in [0.1, 0.7, 1.9] {
            let f = |t: f64| {
                let (x, z) = jets(t);
                planar_tilt_rates(&x, &z, g).unwrap()
            };
            let c = f(t);
            let (x, z) = jets(t);
            assert_eq!(c[0], planar_tilt(x.acc(), z.acc(), g).unwrap());
            let d1 = (f(t + h)[0] - f(t - h)[0]) / (2.0 * h);
            let d2 = (f(t + h)[1] - f(t - h)[1]) / (2.0 * h);
            assert_abs_diff_eq!(c[1], d1, epsilon = 1e-7);
            assert_abs_diff_eq!(c[2], d2, epsilon = 1e-7);
        }
    }

    #[test]
    fn baseline_examples() {
        assert_abs_diff_eq!(baseline_friction_tilt(0.0, 0.5, G).unwrap(), 0.463647609000806, epsilon = 1e-14);
        assert_abs_diff_eq!(baseline_friction_tilt(0.3 * G, 0.3, G).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(baseline_friction_tilt(-G, 0.0, G).unwrap(), PI / 4.0, epsilon = 1e-15);
        assert!(baseline_friction_tilt(-10.0, 1.0, G).is_err());
        // the baseline leaves a residual tilt where the optimal one is zero
        assert!(baseline_friction_tilt(0.0, 0.4, G).unwrap() != planar_tilt(0.0, 0.0, G).unwrap());
    }

    #[test]
    fn pendulum_length_examples() {
        assert_abs_diff_eq!(pendulum_length_from_frequency((G / 0.05).sqrt(), G).unwrap(), 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(pendulum_length_from_frequency(G.sqrt(), G).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pendulum_length_from_frequency(7.0, 9.81).unwrap(), 0.200204081632653, epsilon = 1e-14);
        assert!(pendulum_length_from_frequency(0.0, G).is_err());
    }

    #[test]
    fn flange_pose_examples() {
        let p = Vector3::new(0.3, -1.0, 2.0);
        let t = compose_flange_pose(&p, &Matrix3::identity(), &MountingTransform::identity()).unwrap();
        assert_eq!(t, homogeneous(&Matrix3::identity(), &p));

        let d = Vector3::new(0.0, 0.05, 0.12);
        let mount = MountingTransform::new(Matrix3::identity(), d).unwrap();
        let t = compose_flange_pose(&p, &Matrix3::identity(), &mount).unwrap();
        assert_abs_diff_eq!(t.fixed_view::<3, 1>(0, 3).into_owned(), p - d, epsilon = 1e-15);
    }

    #[test]
    fn flange_pose_round_trip() {
        let r_obj = Rotation3::from_euler_angles(0.2, -0.4, 1.1).into_inner();
        let mount = MountingTransform::solid(r_obj, Vector3::new(0.01, -0.02, 0.15)).unwrap();
        let r = rotation_matrix(-0.35, 2.4);
        let p = Vector3::new(0.5, 0.25, 0.8);
        let flange = compose_flange_pose(&p, &r, &mount).unwrap();
        let cor = flange * mount.matrix();
        assert_abs_diff_eq!(cor, homogeneous(&r, &p), epsilon = 1e-12);
    }

    #[test]
    fn liquid_mount_places_cor_at_bob() {
        let m = MountingTransform::liquid(Matrix3::identity(), Vector3::new(0.0, 0.0, 0.2), 0.05).unwrap();
        assert_abs_diff_eq!(m.matrix()[(2, 3)], 0.15, epsilon = 1e-15);
    }

    #[test]
    fn improper_mount_rejected() {
        let mut r = Matrix3::identity();
        r[(0, 0)] = -1.0;
        assert!(MountingTransform::new(r, Vector3::zeros()).is_err());
        assert!(MountingTransform::new(Matrix3::identity() * 2.0, Vector3::zeros()).is_err());
    }

    #[test]
    fn wrapping() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert_abs_diff_eq!(wrap_angle(1.5 * PI), -0.5 * PI, epsilon = 1e-15);
        assert_eq!(wrap_angle(0.0), 0.0);
    }
}
