//! Small fixed-size vector helpers and the intrinsic XYZ Euler convention.

use std::f64::consts::TAU;

pub type Vec3 = [f64; 3];

pub const WORLD_UP: Vec3 = [0.0, 1.0, 0.0];
pub const LOCAL_X: Vec3 = [1.0, 0.0, 0.0];
pub const LOCAL_Y: Vec3 = [0.0, 1.0, 0.0];

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Rotation matrix for intrinsic X-then-Y-then-Z Euler angles, `R = Rx(a) Ry(b) Rz(c)`.
pub fn rotation_matrix(euler: Vec3) -> [[f64; 3]; 3] {
    let (sa, ca) = euler[0].sin_cos();
    let (sb, cb) = euler[1].sin_cos();
    let (sc, cc) = euler[2].sin_cos();
    [
        [cb * cc, -cb * sc, sb],
        [ca * sc + sa * sb * cc, ca * cc - sa * sb * sc, -sa * cb],
        [sa * sc - ca * sb * cc, sa * cc + ca * sb * sc, ca * cb],
    ]
}

/// Maps a body-frame vector into the world frame.
pub fn rotate(euler: Vec3, v: Vec3) -> Vec3 {
    let m = rotation_matrix(euler);
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

/// Angle in radians between world +Y and the body's +Y axis, in `[0, π]`.
pub fn up_offset(euler: Vec3) -> f64 {
    rotate(euler, LOCAL_Y)[1].clamp(-1.0, 1.0).acos()
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

pub fn wrap_euler(e: Vec3) -> Vec3 {
    [wrap_angle(e[0]), wrap_angle(e[1]), wrap_angle(e[2])]
}

/// Shortest signed-free distance between two angles on the circle.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

pub fn angles_close(a: f64, b: f64, tol: f64) -> bool {
    angle_distance(a, b) <= tol
}


#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn identity_rotation() {
        assert_eq!(rotate([0.0; 3], [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0]);
        assert_eq!(up_offset([0.0; 3]), 0.0);
    }

    #[test]
    fn quarter_turn_about_z_lays_y_along_minus_x() {
        let y = rotate([0.0, 0.0, FRAC_PI_2], LOCAL_Y);
        assert_abs_diff_eq!(y[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(up_offset([0.0, 0.0, FRAC_PI_2]), FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn cone_side_rest_is_two_thirds_pi() {
        let e = [0.0, 0.0, 2.0 * PI / 3.0];
        assert_abs_diff_eq!(up_offset(e), 2.0 * PI / 3.0, epsilon = 1e-12);
        let e = [0.0, 0.0, 4.0 * PI / 3.0];
        assert_abs_diff_eq!(up_offset(e), 2.0 * PI / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn rotation_is_orthonormal() {
        let m = rotation_matrix([0.3, -1.2, 2.5]);
        for i in 0..3 {
            for j in 0..3 {
                let cij: f64 = (0..3).map(|k| m[k][i] * m[k][j]).sum();
                assert_abs_diff_eq!(cij, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn wrap_stays_in_range() {
        for a in [-7.0, -TAU, -0.0, 0.0, 1.0, TAU, 13.0] {
            let w = wrap_angle(a);
            assert!((0.0..TAU).contains(&w), "{a} -> {w}");
        }
        assert!(angles_close(0.0, TAU - 1e-9, 1e-6));
    }
}
