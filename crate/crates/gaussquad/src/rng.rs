//! Seedable, splittable random streams.
//!
//! A [`RngStream`] supplies exactly the draws the randomized rule needs: a
//! uniform integer on a closed range, a uniform real on the open interval
//! (0,1), and truncated-normal tail variates. The backing generator is
//! ChaCha12, a counter-based stream cipher: identical `(seed, stream_id)`
//! reproduce identical sequences on every platform, and distinct stream ids
//! select provably disjoint keystreams, so streams can be handed to threads
//! without any coordination.
//!
//! Tail sampling: for thresholds T >= 1 a rejection sampler with an
//! exponential proposal is used (uniformly efficient as T grows, exact
//! support), and for T < 1 inversion through the stable quantile. Naive
//! inversion for large T would push the quantile into a regime where the
//! CDF argument is not representable.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::special::{gaussian_quantile, upper_tail_mass};

/// Which tail of the normal distribution to sample from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailSide {
    /// `(-inf, -T]`
    Left,
    /// `[T, inf)`
    Right,
}

/// A deterministic random stream identified by `(seed, stream_id)`.
///
/// Streams are single-owner; the sanctioned way to parallelize is to derive
/// independent streams, either by constructing one per task with distinct
/// ids or by calling [`RngStream::split`].
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    splits: u64,
    inner: ChaCha12Rng,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            splits: 0,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Derive a fresh independent sub-stream. The child id is a hash of the
    /// parent id and a per-parent split counter; collisions between derived
    /// ids and explicitly allocated ones are possible only at the 2^-64
    /// birthday level, which we accept.
    pub fn split(&mut self) -> RngStream {
        self.splits += 1;
        let child = splitmix(self.stream_id ^ splitmix(self.splits));
        RngStream::new(self.seed, child)
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer on the closed range `{lo, ..., hi}`, each value with
    /// probability exactly 1/(hi-lo+1). Bitmask rejection, so there is no
    /// modulo bias.
    pub fn uniform_int(&mut self, lo: i64, hi: i64) -> Result<i64> {
        if lo > hi {
            return Err(Error::EmptyRange { lo, hi });
        }
        let span_minus_one = hi.wrapping_sub(lo) as u64;
        if span_minus_one == 0 {
            return Ok(lo);
        }
        if span_minus_one == u64::MAX {
            return Ok(lo.wrapping_add(self.next_u64() as i64));
        }
        let span = span_minus_one + 1;
        let mask = if span > (1u64 << 63) {
            u64::MAX
        } else {
            span.next_power_of_two() - 1
        };
        loop {
            let v = self.next_u64() & mask;
            if v < span {
                return Ok(lo.wrapping_add(v as i64));
            }
        }
    }

    /// Uniform real strictly inside (0,1), on the 53-bit lattice
    /// `{1, ..., 2^53-1} / 2^53`.
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let v = self.next_u64() >> 11;
            if v != 0 {
                return v as f64 * (1.0 / (1u64 << 53) as f64);
            }
        }
    }

    /// Standard exponential via inversion of an open uniform.
    #[inline]
    fn exponential(&mut self) -> f64 {
        -self.uniform_open().ln()
    }

    /// Sample the standard normal conditioned on one tail.
    ///
    /// Right side returns x >= T, left side the mirror image x <= -T. Valid
    /// for any T >= 0 (tested up to T = 40).
    pub fn truncated_normal_tail(&mut self, t: f64, side: TailSide) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::NegativeThreshold(t));
        }
        let x = if t >= 1.0 {
            // Exponential-proposal rejection: y ~ Exp(t), accept with
            // probability exp(-y^2/2). Acceptance >= 0.65 for all t >= 1.
            loop {
                let y = self.exponential() / t;
                if 2.0 * self.exponential() >= y * y {
                    break t + y;
                }
            }
        } else {
            // Inversion on the upper-tail mass: solve Q(x) = v * Q(t). The
            // argument stays in (0, 1/2], where the quantile keeps full
            // relative accuracy.
            let v = self.uniform_open();
            let p = v * upper_tail_mass(t);
            let x = -gaussian_quantile(p).expect("p in (0,1/2] by construction");
            // guard the one-ulp rounding case at v -> 1
            x.max(t)
        };
        Ok(match side {
            TailSide::Right => x,
            TailSide::Left => -x,
        })
    }
}
