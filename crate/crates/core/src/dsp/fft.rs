//! Discrete Fourier transform for arbitrary lengths: iterative radix-2 for
//! powers of two, Bluestein's chirp-z convolution otherwise.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

fn twiddle(k: usize, n: usize, sign: f64) -> Complex64 {
    let theta = sign * 2.0 * PI * k as f64 / n as f64;
    Complex64::new(libm::cos(theta), libm::sin(theta))
}

/// In-place radix-2 transform. `buf.len()` must be a power of two.
fn radix2(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let table: Vec<Complex64> = (0..n / 2).map(|k| twiddle(k, n, sign)).collect();
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = table[k * stride];
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

fn bluestein(input: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = input.len();
    let m = (2 * n - 1).next_power_of_two();
    let sign = if inverse { 1.0 } else { -1.0 };
    // exp(sign·iπk²/n), with k² reduced mod 2n to keep the phase accurate
    let chirp: Vec<Complex64> = (0..n)
        .map(|k| {
            let k2 = ((k as u128 * k as u128) % (2 * n as u128)) as f64;
            let theta = sign * PI * k2 / n as f64;
            Complex64::new(libm::cos(theta), libm::sin(theta))
        })
        .collect();
    let mut a = vec![Complex64::new(0.0, 0.0); m];
    for k in 0..n {
        a[k] = input[k] * chirp[k];
    }
    let mut b = vec![Complex64::new(0.0, 0.0); m];
    b[0] = chirp[0].conj();
    for k in 1..n {
        b[k] = chirp[k].conj();
        b[m - k] = chirp[k].conj();
    }
    radix2(&mut a, false);
    radix2(&mut b, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    radix2(&mut a, true);
    let scale = 1.0 / m as f64;
    (0..n).map(|k| a[k] * scale * chirp[k]).collect()
}

/// Unnormalized forward DFT, X_k = Σ x_j e^{−2πijk/N}.
pub fn forward(input: &[Complex64]) -> Vec<Complex64> {
    transform(input, false)
}

/// Inverse DFT including the 1/N factor.
pub fn inverse(input: &[Complex64]) -> Vec<Complex64> {
    let n = input.len() as f64;
    let mut out = transform(input, true);
    for v in &mut out {
        *v /= n;
    }
    out
}

fn transform(input: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = input.len();
    if n <= 1 {
        return input.to_vec();
    }
    if n.is_power_of_two() {
        let mut buf = input.to_vec();
        radix2(&mut buf, inverse);
        buf
    } else {
        bluestein(input, inverse)
    }
}

/// Forward DFT of a real sequence.
pub fn forward_real(input: &[f64]) -> Vec<Complex64> {
    let buf: Vec<Complex64> = input.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, &v)| v * twiddle((j * k) % n, n, -1.0))
                    .sum()
            })
            .collect()
    }

    fn signal(n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|i| {
                let t = i as f64;
                Complex64::new(libm::sin(0.37 * t) + 0.1 * t, libm::cos(1.3 * t * t))
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        for n in [1, 2, 3, 5, 8, 12, 16, 100, 127, 128, 250] {
            let x = signal(n);
            let fast = forward(&x);
            let slow = naive(&x);
            let scale = slow.iter().map(|v| v.norm()).fold(1.0, f64::max);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() < 1e-10 * scale, "n={n}");
            }
        }
    }

    #[test]
    fn inverse_round_trip() {
        for n in [7, 64, 2000] {
            let x = signal(n);
            let y = inverse(&forward(&x));
            for (a, b) in x.iter().zip(&y) {
                assert!((a - b).norm() < 1e-9);
            }
        }
    }
}
