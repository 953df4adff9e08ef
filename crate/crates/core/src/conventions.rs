// SPDX-License-Identifier: Apache-2.0

//! Spin conventions shared by every solver.
//!
//! * A set bit means "up": `sigma^+ sigma^- = 1`, `sigma^z = +1/2`.
//! * The electron's up state is `|m_S = 1>`, the optically bright level that
//!   decays via `S^-` into `|m_S = 0>` (down).
//! * Superradiant runs start with nuclei up (`<A^z> = +sum_i g_i / 2`) and
//!   the electron down. The fully down nuclear state lies in the kernel of
//!   `A^-` and is dark.
//! * Product-basis index: bit 0 is the electron, bit `i + 1` is nucleus `i`.

pub const ELECTRON_BIT: usize = 0;

#[inline]
pub const fn nucleus_bit(i: usize) -> usize {
    i + 1
}

/// `sigma^z` eigenvalue of a single spin.
#[inline]
pub fn z_value(up: bool) -> f64 {
    if up {
        0.5
    } else {
        -0.5
    }
}

#[inline]
pub fn electron_up(state: usize) -> bool {
    state & (1 << ELECTRON_BIT) != 0
}

#[inline]
pub fn nucleus_up(state: usize, i: usize) -> bool {
    state & (1 << nucleus_bit(i)) != 0
}

/// Product-basis index of the electron-down, all-nuclei-up start state.
#[inline]
pub fn polarized_start_state(n: usize) -> usize {
    ((1usize << n) - 1) << 1
}

/// Product-basis index of the dark electron-down, all-nuclei-down state.
pub const DARK_STATE: usize = 0;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn start_state_bits() {
        let s = polarized_start_state(3);
        assert!(!electron_up(s));
        assert!((0..3).all(|i| nucleus_up(s, i)));
        assert!(!nucleus_up(DARK_STATE, 0));
        assert_eq!(z_value(true), 0.5);
    }
}
