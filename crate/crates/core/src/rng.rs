/// Marsaglia xorshift64 (13, 7, 17). Shared by the sampling pattern and
/// RANSAC so both are reproducible across implementations.
#[derive(Debug, Clone)]
pub struct XorShift64 {
    state: u64,
}

impl XorShift64 {
    /// Returns `None` for the degenerate zero seed.
    pub fn new(seed: u64) -> Option<Self> {
        (seed != 0).then_some(Self { state: seed })
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.state = x;
        x
    }

    /// `next_u64() % n`; slightly biased, kept for cross-implementation parity.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}
