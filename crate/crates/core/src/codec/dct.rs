//! Orthonormal 8×8 type-II DCT.

use std::sync::OnceLock;

pub const N: usize = 8;

fn basis() -> &'static [[f64; N]; N] {
    static BASIS: OnceLock<[[f64; N]; N]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut c = [[0.0; N]; N];
        for (k, row) in c.iter_mut().enumerate() {
            let alpha = if k == 0 { (1.0 / N as f64).sqrt() } else { (2.0 / N as f64).sqrt() };
            for (n, v) in row.iter_mut().enumerate() {
                *v = alpha * (std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / (2 * N) as f64).cos();
            }
        }
        c
    })
}

/// `C · block · Cᵀ`.
pub fn forward(block: &[f64; N * N]) -> [f64; N * N] {
    let c = basis();
    let mut tmp = [0.0; N * N];
    for k in 0..N {
        for x in 0..N {
            tmp[k * N + x] = (0..N).map(|y| c[k][y] * block[y * N + x]).sum();
        }
    }
    let mut out = [0.0; N * N];
    for k in 0..N {
        for l in 0..N {
            out[k * N + l] = (0..N).map(|x| tmp[k * N + x] * c[l][x]).sum();
        }
    }
    out
}

/// `Cᵀ · coeffs · C`.
pub fn inverse(coeffs: &[f64; N * N]) -> [f64; N * N] {
    let c = basis();
    let mut tmp = [0.0; N * N];
    for y in 0..N {
        for l in 0..N {
            tmp[y * N + l] = (0..N).map(|k| c[k][y] * coeffs[k * N + l]).sum();
        }
    }
    let mut out = [0.0; N * N];
    for y in 0..N {
        for x in 0..N {
            out[y * N + x] = (0..N).map(|l| tmp[y * N + l] * c[l][x]).sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inverse_undoes_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let block: [f64; 64] = std::array::from_fn(|_| rng.random());
        let back = inverse(&forward(&block));
        for (a, b) in block.iter().zip(back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_block_is_dc_only() {
        let coeffs = forward(&[0.5; 64]);
        assert!((coeffs[0] - 4.0).abs() < 1e-12);
        assert!(coeffs[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn energy_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let block: [f64; 64] = std::array::from_fn(|_| rng.random());
        let e1: f64 = block.iter().map(|v| v * v).sum();
        let e2: f64 = forward(&block).iter().map(|v| v * v).sum();
        assert!((e1 - e2).abs() < 1e-10);
    }
}
