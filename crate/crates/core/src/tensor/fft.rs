//! Radix-2 discrete Fourier transform along the leading index of a stack
//! of equally sized blocks (scalars or flattened matrices).

use alloc::format;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `Y_i = Σ_l X_l ω^{il}`, `ω = exp(-2πi/K)`.
    Forward,
    /// `X_l = (1/K) Σ_i Y_i ω^{-il}`.
    Inverse,
}

/// In-place DFT over `K = values.len() / block_len` blocks. `K` must be a
/// power of two.
pub fn dft_batch(values: &mut [Complex64], block_len: usize, dir: Direction) -> Result<()> {
    if block_len == 0 || values.len() % block_len != 0 {
        return Err(Error::Shape(format!(
            "{} values do not split into blocks of {block_len}",
            values.len()
        )));
    }
    let k = values.len() / block_len;
    if !k.is_power_of_two() {
        return Err(Error::Shape(format!("transform length {k} is not a power of two")));
    }
    if k == 1 {
        return Ok(());
    }
    let bits = k.trailing_zeros();
    for i in 0..k {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            for e in 0..block_len {
                values.swap(i * block_len + e, j * block_len + e);
            }
        }
    }
    let sign = match dir {
        Direction::Forward => -1.0,
        Direction::Inverse => 1.0,
    };
    let mut len = 2;
    while len <= k {
        let ang = sign * 2.0 * core::f64::consts::PI / len as f64;
        let half = len / 2;
        for start in (0..k).step_by(len) {
            for j in 0..half {
                let tw = Complex64::new(libm::cos(ang * j as f64), libm::sin(ang * j as f64));
                let (a, b) = ((start + j) * block_len, (start + j + half) * block_len);
                for e in 0..block_len {
                    let u = values[a + e];
                    let t = values[b + e] * tw;
                    values[a + e] = u + t;
                    values[b + e] = u - t;
                }
            }
        }
        len <<= 1;
    }
    if dir == Direction::Inverse {
        let s = 1.0 / k as f64;
        values.iter_mut().for_each(|v| *v *= s);
    }
    Ok(())
}
