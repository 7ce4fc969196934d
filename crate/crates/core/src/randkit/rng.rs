use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

/// A seedable random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha20 with the stream id mapped onto the cipher's 64-bit
/// stream counter, so distinct ids address disjoint keystreams.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self { seed, stream_id, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream with the same seed whose id is derived from this
    /// stream's id and `child`. Does not advance `self`.
    pub fn derive(&self, child: u64) -> Self {
        Self::new(self.seed, mix_ids(self.stream_id, child))
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        loop {
            let u: f64 = self.inner.random();
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Standard exponential (rate 1).
    pub fn exp1(&mut self) -> f64 {
        Exp1.sample(&mut self.inner)
    }

    /// Gamma with the given shape and rate.
    pub fn gamma(&mut self, shape: f64, rate: f64) -> f64 {
        let g = rand_distr::Gamma::new(shape, 1.0 / rate).expect("gamma parameters checked by caller");
        g.sample(&mut self.inner)
    }

    pub fn beta(&mut self, a: f64, b: f64) -> f64 {
        let d = rand_distr::Beta::new(a, b).expect("beta parameters checked by caller");
        d.sample(&mut self.inner)
    }

    /// Index drawn uniformly from `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Draw from a categorical distribution given unnormalized log weights.
    pub fn categorical_log(&mut self, log_w: &[f64]) -> usize {
        let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        let mut u = self.uniform() * total;
        for (k, wk) in w.iter().enumerate() {
            if u < *wk {
                return k;
            }
            u -= wk;
        }
        w.iter().rposition(|x| *x > 0.0).unwrap_or(0)
    }

    /// Uniformly random permutation of `0..n` (Fisher-Yates).
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.inner.random_range(0..=i);
            p.swap(i, j);
        }
        p
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

// splitmix64 finalizer over the pair
fn mix_ids(a: u64, b: u64) -> u64 {
    let mut z = a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
