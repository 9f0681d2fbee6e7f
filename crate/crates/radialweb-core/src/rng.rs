//! Seeded sampling of the random primitives: homogeneous Poisson marks on an
//! interval, the nearest-to-origin mark of a two-sided process, and fair
//! tie-break coins.
//!
//! Randomness is organized as counter-based streams. A stream is addressed by
//! `(master_seed, trial_index, substream_label)` plus optional extra indices
//! (level, tile, ...), and the k-th draw of a stream is a pure function of the
//! address and k. Distinct addresses give statistically independent streams,
//! so trials and levels can be sampled in any order, on any number of
//! workers, with identical results.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A counter-based random stream.
///
/// The stream key is derived by hashing the address tuple; draws are SplitMix64
/// outputs at successive counter values, so draw `i` of a given address is
/// always the same value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub trial_index: u64,
    pub substream_label: u32,
    key: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, trial_index: u64, substream_label: u32) -> Self {
        let key = derive_key(master_seed, &[trial_index, substream_label as u64]);
        RngStream {
            master_seed,
            trial_index,
            substream_label,
            key,
            counter: 0,
        }
    }

    /// Derive an independent stream keyed by two extra indices (level, tile).
    /// Derivation folds into the current key, so substreams compose.
    pub fn substream(&self, a: u64, b: u64) -> Self {
        let key = derive_key(self.key, &[a, b]);
        RngStream { key, counter: 0, ..*self }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let c = self.counter;
        self.counter = c.wrapping_add(1);
        mix64(self.key.wrapping_add(c.wrapping_mul(GOLDEN)))
    }

    /// Uniform draw in (0, 1].
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        (((self.next_u64() >> 11) + 1) as f64) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Exponential draw with the given rate.
    #[inline]
    pub fn next_exp(&mut self, rate: f64) -> f64 {
        -self.next_unit().ln() / rate
    }
}

fn derive_key(master_seed: u64, parts: &[u64]) -> u64 {
    let mut h = mix64(master_seed ^ GOLDEN);
    for &p in parts {
        h = mix64(h ^ mix64(p.wrapping_add(GOLDEN)));
    }
    h
}

/// Stream labels, one per purpose. Keeping them in one place avoids collisions.
pub mod labels {
    pub const POISSON_MARKS: u32 = 1;
    pub const NEAREST_MARK: u32 = 2;
    pub const COIN: u32 = 3;
    pub const LEVEL_MARKS: u32 = 4;
    pub const LEVEL_TIE: u32 = 5;
    pub const GRID_TIE: u32 = 6;
    pub const CIRCLE_MARKS: u32 = 7;
    pub const CIRCLE_TIE: u32 = 8;
    pub const PATH_OMEGA: u32 = 9;
    pub const OMEGA_MOMENT: u32 = 10;
}

/// A sorted finite realization of a Poisson process on a window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarkSequence {
    pub marks: Vec<f64>,
    pub rate: f64,
    pub window: (f64, f64),
}

impl MarkSequence {
    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }
}

/// Sample a rate-`rate` Poisson process on `window` by exponential-gap
/// accumulation from the left endpoint.
pub fn sample_poisson_marks(rate: f64, window: (f64, f64), stream: RngStream) -> Result<MarkSequence> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::InvalidParameter(format!("poisson rate must be positive, got {rate}")));
    }
    if !(window.0 <= window.1) {
        return Err(Error::InvalidParameter(format!(
            "inverted window [{}, {}]",
            window.0, window.1
        )));
    }
    let mut s = stream;
    let mut marks = Vec::new();
    let mut x = window.0;
    loop {
        x += s.next_exp(rate);
        if x > window.1 {
            break;
        }
        marks.push(x);
    }
    Ok(MarkSequence { marks, rate, window })
}

/// The mark of a two-sided rate-`rate` Poisson process nearest to the origin:
/// |value| is Exp(2·rate) and the sign is an independent fair coin.
pub fn sample_nearest_mark(rate: f64, stream: &mut RngStream) -> Result<f64> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::InvalidParameter(format!("poisson rate must be positive, got {rate}")));
    }
    let magnitude = stream.next_exp(2.0 * rate);
    let sign = if stream.next_u64() >> 63 == 1 { 1.0 } else { -1.0 };
    Ok(sign * magnitude)
}

/// Fair coin: 1 with probability 1/2.
pub fn flip_fair_coin(stream: &mut RngStream) -> u8 {
    (stream.next_u64() >> 63) as u8
}
