// SPDX-License-Identifier: Apache-2.0

//! Overhauser-field compensation: keep the electron's mean splitting
//! `omega_S(t) + g <A^z>(t)` pinned at a target `omega_0`.

use crate::scalar::Real;

/// `omega_S(t) = omega_0 - g <A^z>(t)`.
#[inline]
pub fn compensated_omega<T: Real>(a_z_now: T, target: T, g: T) -> T {
    target - g * a_z_now
}

/// Mean splitting seen by the electron.
#[inline]
pub fn effective_splitting<T: Real>(omega_s: T, a_z: T, g: T) -> T {
    omega_s + g * a_z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conventions::z_value;
    use crate::model::homogeneous_couplings;

    #[test]
    fn zero_field_returns_target() {
        assert_eq!(compensated_omega(0.0, 0.5, 0.3), 0.5);
    }

    #[test]
    fn polarized_start_values() {
        let p = homogeneous_couplings::<f64>(16).unwrap();
        let gi = p.couplings();
        // Nuclei up: <A^z> = +sum g_i / 2; nuclei down: the negative.
        let up: f64 = gi.iter().map(|g| g * z_value(true)).sum();
        let down: f64 = gi.iter().map(|g| g * z_value(false)).sum();
        assert!((compensated_omega(up, 0.5, p.g()) - (0.5 - 0.5 * p.a_scale())).abs() < 1e-14);
        assert!((compensated_omega(down, 0.5, p.g()) - (0.5 + 0.5 * p.a_scale())).abs() < 1e-14);
        assert!((effective_splitting(compensated_omega(up, 0.5, p.g()), up, p.g()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_precision() {
        assert_eq!(compensated_omega(1.0f32, 0.5, 0.25), 0.25);
    }
}
