use rand::Rng;

use super::DistError;

/// Picks index `a` with probability (w_a + 1) / Σ(w + 1).
pub fn weighted_pick<R: Rng + ?Sized>(weights: &[u64], rng: &mut R) -> Result<usize, DistError> {
    if weights.is_empty() {
        return Err(DistError::EmptySample);
    }
    let total: u128 = weights.iter().map(|&w| w as u128 + 1).sum();
    let mut r = rng.random_range(0..total);
    for (i, &w) in weights.iter().enumerate() {
        let w = w as u128 + 1;
        if r < w {
            return Ok(i);
        }
        r -= w;
    }
    unreachable!("r < total")
}

/// Fenwick tree over non-negative integer weights supporting point updates
/// and proportional sampling in O(log n). Zero-weight slots are never drawn.
#[derive(Debug, Clone, Default)]
pub struct DynamicWeights {
    tree: Vec<u64>,
    values: Vec<u64>,
    total: u64,
}

impl DynamicWeights {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, i: usize) -> u64 {
        self.values[i]
    }

    fn add(&mut self, i: usize, delta: i128) {
        let mut k = i + 1;
        while k <= self.values.len() {
            self.tree[k - 1] = (self.tree[k - 1] as i128 + delta) as u64;
            k += k & k.wrapping_neg();
        }
    }

    pub fn push(&mut self, weight: u64) -> usize {
        let i = self.values.len();
        self.values.push(0);
        // New node covers the range (i+1 - lowbit, i+1]; seed it from its children.
        let k = i + 1;
        let low = k & k.wrapping_neg();
        let mut node = 0u64;
        let mut j = k - 1;
        let stop = k - low;
        while j > stop {
            node += self.tree[j - 1];
            j -= j & j.wrapping_neg();
        }
        self.tree.push(node);
        self.set(i, weight);
        i
    }

    pub fn set(&mut self, i: usize, weight: u64) {
        let old = self.values[i];
        if old == weight {
            return;
        }
        self.values[i] = weight;
        self.total = self.total - old + weight;
        self.add(i, weight as i128 - old as i128);
    }

    /// Index whose cumulative weight range contains `target` (< total).
    fn find(&self, mut target: u64) -> usize {
        let n = self.values.len();
        let mut pos = 0usize;
        let mut mask = if n == 0 { 0 } else { 1usize << (usize::BITS - 1 - n.leading_zeros()) };
        while mask > 0 {
            let next = pos + mask;
            if next <= n && self.tree[next - 1] <= target {
                target -= self.tree[next - 1];
                pos = next;
            }
            mask >>= 1;
        }
        pos
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        if self.total == 0 {
            return None;
        }
        Some(self.find(rng.random_range(0..self.total)))
    }
}
