//! Walsh–Hadamard transform: the Fourier transform of `(Z/2Z)^p`.
//!
//! Group convolution (the distribution of an XOR of independent symbols)
//! becomes a pointwise product in the transform domain.

/// In-place unnormalized transform. Applying it twice multiplies by `len`.
pub fn wht_in_place(x: &mut [f64]) {
    let n = x.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in x.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        h *= 2;
    }
}

/// Inverse transform (forward transform scaled by `1/len`).
pub fn iwht_in_place(x: &mut [f64]) {
    wht_in_place(x);
    let s = 1.0 / x.len() as f64;
    x.iter_mut().for_each(|v| *v *= s);
}

/// Distribution of `a XOR b` for independent `a ~ x`, `b ~ y`.
pub fn xor_convolve(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut fx = x.to_vec();
    let mut fy = y.to_vec();
    wht_in_place(&mut fx);
    wht_in_place(&mut fy);
    fx.iter_mut().zip(&fy).for_each(|(a, b)| *a *= b);
    iwht_in_place(&mut fx);
    fx
}
