//! Counter-based deterministic random numbers.
//!
//! Every random draw in the simulator is a pure function of
//! `(master seed, stream id, counter)`. Disjoint counter ranges can be
//! generated in any order, or in parallel, and still produce bit-identical
//! output. The mixer is the SplitMix64 finalizer applied twice over the
//! combined key, which is statistically sufficient for Monte-Carlo use and
//! fast enough to call per photon. Not cryptographically secure.

use std::f64::consts::TAU;

/// Named sub-streams so that unrelated parts of the pipeline never share
/// random draws even when they run over the same counter range.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Emission,
    Channel,
    Interferometer,
    Detection,
    DarkCounts,
    Background,
    Protocol,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Emission => 1,
            Stream::Channel => 2,
            Stream::Interferometer => 3,
            Stream::Detection => 4,
            Stream::DarkCounts => 5,
            Stream::Background => 6,
            Stream::Protocol => 7,
        }
    }
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A keyed random stream; cheap to copy, no heap state.
#[derive(Clone, Copy, Debug)]
pub struct StreamRng {
    key: u64,
}

impl StreamRng {
    pub fn new(master_seed: u64, stream: Stream) -> Self {
        let key = splitmix(master_seed ^ stream.id().wrapping_mul(GOLDEN_GAMMA));
        StreamRng { key }
    }

    /// Stateful generator for the event at `counter` (pulse index, round
    /// index, ...). Successive draws walk a private SplitMix64 sequence
    /// seeded from `(key, counter)`.
    pub fn at(&self, counter: u64) -> EventRng {
        EventRng {
            state: splitmix(self.key ^ splitmix(counter.wrapping_mul(GOLDEN_GAMMA).wrapping_add(1))),
        }
    }
}

/// Per-event generator. All draws for one event come from here so the
/// number of draws spent on event `i` never shifts the randomness of
/// event `i+1`.
#[derive(Clone, Debug)]
pub struct EventRng {
    state: u64,
}

impl EventRng {
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        splitmix(self.state)
    }

    /// Uniform in [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        // 53 mantissa bits
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard normal via Box-Muller.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = loop {
            let u = self.uniform();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    }

    /// Poisson sample; exponential-gap counting for small means, normal
    /// approximation above 1000 where the relative error is < 1e-3.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        if mean <= 0.0 {
            return 0;
        }
        if mean > 1000.0 {
            let n = mean + mean.sqrt() * self.gaussian();
            return n.max(0.0).round() as u64;
        }
        let limit = (-mean).exp();
        let mut product = 1.0;
        let mut count = 0u64;
        loop {
            product *= self.uniform();
            if product <= limit {
                return count;
            }
            count += 1;
        }
    }
}


#[cfg(test)]
impl EventRng {
    fn uniform_once(mut self) -> f64 {
        self.uniform()
    }
}
