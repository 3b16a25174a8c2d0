//! Counter-based random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream keyed by
//! a 64-bit seed and selected by a 64-bit stream index. Draw `j` of a sampler
//! uses stream `j` only, so the output never depends on how work is split
//! across threads.
//!
//! The conversions from raw words to uniforms, bounded integers and normal
//! variates are written out here instead of delegating to `rand`'s
//! distributions, so golden seeds stay portable across `rand` releases:
//!
//! * uniform `[0, 1)`: top 53 bits of one `u64`, times `2^-53`;
//! * bounded integers: rejection sampling on whole words (no modulo bias);
//! * standard normal: Box–Muller on two uniforms, both outputs used.

use num_bigint::BigUint;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream `index` of the generator keyed by `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives a child seed; used to give independent sub-experiments their own key.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    stream(seed, index).next_u64()
}

pub fn uniform01<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in `0..n`. `n` must be positive.
pub fn below_u64<R: RngCore>(rng: &mut R, n: u64) -> u64 {
    debug_assert!(n > 0);
    let zone = u64::MAX - (u64::MAX % n + 1) % n;
    loop {
        let x = rng.next_u64();
        if x <= zone {
            return x % n;
        }
    }
}

/// Uniform integer in `0..n` for 128-bit ranges.
pub fn below_u128<R: RngCore>(rng: &mut R, n: u128) -> u128 {
    debug_assert!(n > 0);
    if n <= u64::MAX as u128 {
        return below_u64(rng, n as u64) as u128;
    }
    let zone = u128::MAX - (u128::MAX % n + 1) % n;
    loop {
        let x = ((rng.next_u64() as u128) << 64) | rng.next_u64() as u128;
        if x <= zone {
            return x % n;
        }
    }
}

/// Uniform big integer in `0..n` by masked rejection.
pub fn below_big<R: RngCore>(rng: &mut R, n: &BigUint) -> BigUint {
    let bits = n.bits();
    let words = bits.div_ceil(64) as usize;
    let top_bits = bits - 64 * (words as u64 - 1);
    let mask = if top_bits == 64 {
        u64::MAX
    } else {
        (1u64 << top_bits) - 1
    };
    loop {
        let mut digits: Vec<u64> = (0..words).map(|_| rng.next_u64()).collect();
        if let Some(last) = digits.last_mut() {
            *last &= mask;
        }
        let candidate = BigUint::from_slice(
            &digits
                .iter()
                .flat_map(|d| [*d as u32, (*d >> 32) as u32])
                .collect::<Vec<u32>>(),
        );
        if &candidate < n {
            return candidate;
        }
    }
}

/// Box–Muller pair of independent standard normals.
pub fn normal_pair<R: RngCore>(rng: &mut R) -> (f64, f64) {
    let u1 = 1.0 - uniform01(rng);
    let u2 = uniform01(rng);
    let radius = (-2.0 * u1.ln()).sqrt();
    let angle = std::f64::consts::TAU * u2;
    (radius * angle.cos(), radius * angle.sin())
}

/// Fills `out` with standard normals.
pub fn fill_normal<R: RngCore>(rng: &mut R, out: &mut [f64]) {
    let mut chunks = out.chunks_exact_mut(2);
    for pair in &mut chunks {
        let (a, b) = normal_pair(rng);
        pair[0] = a;
        pair[1] = b;
    }
    if let [last] = chunks.into_remainder() {
        *last = normal_pair(rng).0;
    }
}
