//! Deterministic counter-based random number generation.
//!
//! Synthetic scenes must be bit-reproducible from a `(seed, stream, counter)`
//! triple alone, on any platform and in any language, so no stateful generator
//! from a third-party crate is used. The generator is the SplitMix64 finalizer
//! applied to a counter, which is trivial to re-implement elsewhere:
//!
//! ```text
//! mix(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//!         z ^= z >> 27; z *= 0x94D049BB133111EB;
//!         z ^= z >> 31; return z              (all on u64, wrapping)
//!
//! stream_seed(seed, stream) = mix(seed + mix(stream))
//! raw(seed, stream, i)      = mix(stream_seed + (i + 1) * 0x9E3779B97F4A7C15)
//! uniform(seed, stream, i)  = (raw >> 11) * 2^-53            in [0, 1)
//! ```
//!
//! Gaussian variates come from the Box-Muller transform on counters `2i` and
//! `2i + 1`. Streams keep independent draws (per-band noise, phantom texture,
//! band gains) from overlapping while sharing one user-facing seed.

/// SplitMix64 finalizer. Bijective on `u64`, so distinct counters never collide.
#[inline]
pub fn mix(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Raw 64-bit draw for a `(seed, stream, counter)` triple.
#[inline]
pub fn raw(seed: u64, stream: u64, counter: u64) -> u64 {
    let stream_seed = mix(seed.wrapping_add(mix(stream)));
    mix(stream_seed.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Uniform draw in `[0, 1)` with 53 bits of mantissa.
#[inline]
pub fn uniform(seed: u64, stream: u64, counter: u64) -> f64 {
    (raw(seed, stream, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw (Box-Muller on counters `2i` and `2i + 1`).
#[inline]
pub fn normal(seed: u64, stream: u64, counter: u64) -> f64 {
    // 1 - uniform is in (0, 1], keeping the logarithm finite.
    let u1 = 1.0 - uniform(seed, stream, 2 * counter);
    let u2 = uniform(seed, stream, 2 * counter + 1);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Convenience cursor over one stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream, counter: 0 }
    }

    pub fn next_uniform(&mut self) -> f64 {
        let v = uniform(self.seed, self.stream, self.counter);
        self.counter += 1;
        v
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_uniform()
    }

    pub fn next_normal(&mut self) -> f64 {
        // Box-Muller consumes a dedicated counter pair, so interleaving
        // uniform and normal draws on one stream stays well defined.
        let v = normal(self.seed, self.stream, self.counter);
        self.counter += 1;
        v
    }
}
