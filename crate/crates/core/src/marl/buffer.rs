use rand::Rng;
use serde::{Deserialize, Serialize};

/// One closed decision epoch of an agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s2: Vec<f64>,
    /// Mean action of the other agents acting at `s` (joint critic only).
    pub co: Vec<f64>,
    /// Same, at `s2`.
    pub co2: Vec<f64>,
}

/// Fixed-capacity FIFO ring shared by all agents.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Experience>,
    head: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer { capacity: capacity.max(1), items: Vec::new(), head: 0, inserted: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Total insertions since creation, evicted ones included.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, e: Experience) {
        if self.items.len() < self.capacity {
            self.items.push(e);
        } else {
            self.items[self.head] = e;
            self.head = (self.head + 1) % self.capacity;
        }
        self.inserted += 1;
    }

    /// `i`-th oldest stored experience.
    pub fn get(&self, i: usize) -> &Experience {
        &self.items[(self.head + i) % self.items.len()]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        (0..self.len()).map(|i| self.get(i))
    }

    /// Draws `n` experiences with replacement from the newest `window` ones.
    pub fn sample_recent(&self, n: usize, window: usize, rng: &mut impl Rng) -> Vec<&Experience> {
        let len = self.len();
        let w = window.clamp(1, len.max(1));
        (0..n).map(|_| self.get(len - 1 - rng.random_range(0..w))).collect()
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<&Experience> {
        let len = self.len();
        (0..n).map(|_| self.get(rng.random_range(0..len))).collect()
    }
}
