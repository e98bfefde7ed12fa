//! Seeded random streams.
//!
//! Every functional area of a run draws from its own named stream, all
//! derived from the scenario seed. Changing how one consumer draws (say,
//! optimizer tuning) therefore never perturbs another (say, mobility
//! trajectories). The generator is SplitMix64: a 64-bit counter-based
//! design that is trivially splittable and bit-identical on every
//! platform.

/// Independent stream identities, one per consumer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamId {
    Mobility,
    Traffic,
    Abc,
    Ann,
    Loss,
}

impl StreamId {
    fn tag(self) -> u64 {
        match self {
            StreamId::Mobility => 0x6d6f_6269_6c69_7479, // "mobility"
            StreamId::Traffic => 0x7472_6166_6669_6363,
            StreamId::Abc => 0x6162_635f_7374_7265,
            StreamId::Ann => 0x616e_6e5f_7374_7265,
            StreamId::Loss => 0x6c6f_7373_5f73_7472,
        }
    }
}

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One deterministic draw sequence. `(seed, stream)` fully determines it.
#[derive(Clone, Debug)]
pub struct RandomStream {
    state: u64,
}

impl RandomStream {
    pub fn new(seed: u64, stream: StreamId) -> Self {
        // One mix round decorrelates streams that share a seed.
        RandomStream {
            state: mix(seed ^ stream.tag().wrapping_mul(GAMMA)),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn range_f64(&mut self, lo: f64, hi: f64) -> f64 {
        debug_assert!(lo <= hi);
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`. `n` must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_f64() * n as f64) as usize % n
    }

    /// Bernoulli draw with success probability `p`.
    pub fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Multiplicative jitter in `[1 - spread, 1 + spread]`.
    pub fn jitter(&mut self, spread: f64) -> f64 {
        1.0 + spread * (2.0 * self.next_f64() - 1.0)
    }
}

/// The five streams a single run owns.
#[derive(Clone, Debug)]
pub struct Streams {
    pub mobility: RandomStream,
    pub traffic: RandomStream,
    pub abc: RandomStream,
    pub ann: RandomStream,
    pub loss: RandomStream,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams {
            mobility: RandomStream::new(seed, StreamId::Mobility),
            traffic: RandomStream::new(seed, StreamId::Traffic),
            abc: RandomStream::new(seed, StreamId::Abc),
            ann: RandomStream::new(seed, StreamId::Ann),
            loss: RandomStream::new(seed, StreamId::Loss),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_seed_reproduces_draws() {
        let mut a = RandomStream::new(42, StreamId::Abc);
        let mut b = RandomStream::new(42, StreamId::Abc);
        assert_eq!(a.next_f64(), b.next_f64());
        assert_eq!(a.next_f64(), b.next_f64());
    }

    #[test]
    fn streams_with_same_seed_differ() {
        let mut a = RandomStream::new(7, StreamId::Mobility);
        let mut b = RandomStream::new(7, StreamId::Loss);
        let av: Vec<u64> = (0..4).map(|_| a.next_u64()).collect();
        let bv: Vec<u64> = (0..4).map(|_| b.next_u64()).collect();
        assert_ne!(av, bv);
    }

    #[test]
    fn draws_stay_in_unit_interval() {
        let mut s = RandomStream::new(123, StreamId::Traffic);
        for _ in 0..100_000 {
            let x = s.next_f64();
            assert!((0.0..1.0).contains(&x));
        }
    }

    // Law-of-large-numbers check: the sample mean of 1e5 uniform draws
    // must sit within 0.5 +/- 0.01 (ten sigma for this sample size).
    #[test]
    fn draw_mean_near_half() {
        let mut s = RandomStream::new(9, StreamId::Ann);
        let n = 100_000;
        let mean = (0..n).map(|_| s.next_f64()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn below_covers_range() {
        let mut s = RandomStream::new(5, StreamId::Abc);
        let mut seen = [false; 7];
        for _ in 0..1000 {
            seen[s.below(7)] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }
}
