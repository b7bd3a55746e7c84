use rand::Rng;

/// One environment step as stored on the trainer side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    /// Window-mean (OR, OE) in volts.
    pub obs: [f64; 2],
    pub action: f64,
    pub reward: f64,
    pub next_obs: [f64; 2],
    pub done: bool,
}

/// Fixed-capacity FIFO replay memory.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    data: Vec<Transition>,
    capacity: usize,
    next: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            data: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            next: 0,
            inserted: 0,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        self.inserted += 1;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Oldest to newest.
    pub fn iter_ordered(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.data.len() < self.capacity { 0 } else { self.next };
        self.data[split..].iter().chain(&self.data[..split])
    }

    /// Uniform sample of distinct indices.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<Transition> {
        let n = batch.min(self.data.len());
        rand::seq::index::sample(rng, self.data.len(), n)
            .into_iter()
            .map(|i| self.data[i])
            .collect()
    }
}
