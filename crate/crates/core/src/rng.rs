//! Counter-based random streams for reproducible parallel Monte Carlo.
//!
//! A draw is a pure function of (seed, path_index, counter), so per-path
//! streams are independent of worker count and execution order. The mixer is
//! three chained splitmix64 finalizers, one per key word.

/// One reproducible stream of a path worker.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    path_index: u64,
    counter: u64,
    spare_normal: Option<f64>,
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, path_index: u64) -> Self {
        Self {
            seed,
            path_index,
            counter: 0,
            spare_normal: None,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let c = self.counter;
        self.counter += 1;
        splitmix(self.seed ^ splitmix(self.path_index ^ splitmix(c)))
    }

    /// Uniform draw in (0, 1], using the top 53 bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        const DEN: f64 = (1u64 << 53) as f64;
        ((self.next_u64() >> 11) + 1) as f64 / DEN
    }

    /// Standard normal draw via Box-Muller, caching the paired value.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let mag = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
        self.spare_normal = Some(mag * s);
        mag * c
    }
}
