use rand::Rng;

use crate::env::State;

/// One stored environment step with margins cached at insertion.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: State,
    pub action: usize,
    pub next_state: State,
    /// The episode ended at this step; the successor value is not bootstrapped.
    pub terminal: bool,
    pub l: f64,
    pub g: f64,
    pub l_next: f64,
    pub g_next: f64,
}

impl Transition {
    pub fn margins(&self) -> crate::bellman::TransitionMargins {
        crate::bellman::TransitionMargins {
            l: self.l,
            g: self.g,
            l_next: self.l_next,
            g_next: self.g_next,
            terminal: self.terminal,
        }
    }
}

/// Fixed-capacity ring buffer; the oldest transition is overwritten first.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::with_capacity(capacity.min(1 << 16)), head: 0 }
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

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
        }
        self.head = (self.head + 1) % self.capacity;
    }

    pub fn get(&self, index: usize) -> &Transition {
        &self.items[index]
    }

    /// `batch` distinct indices drawn uniformly.
    pub fn sample_indices<R: Rng + ?Sized>(&self, rng: &mut R, batch: usize) -> Vec<usize> {
        rand::seq::index::sample(rng, self.items.len(), batch.min(self.items.len())).into_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn transition(i: usize) -> Transition {
        Transition {
            state: State::new(&[i as f64]),
            action: 0,
            next_state: State::new(&[i as f64 + 1.0]),
            terminal: false,
            l: 0.0,
            g: 0.0,
            l_next: 0.0,
            g_next: 0.0,
        }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(transition(i));
        }
        assert_eq!(buf.len(), 3);
        let mut firsts: Vec<f64> = (0..3).map(|i| buf.get(i).state[0]).collect();
        firsts.sort_by(f64::total_cmp);
        assert_eq!(firsts, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn batch_has_no_repeats() {
        let mut buf = ReplayBuffer::new(100);
        for i in 0..100 {
            buf.push(transition(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let mut idx = buf.sample_indices(&mut rng, 64);
            idx.sort_unstable();
            idx.dedup();
            assert_eq!(idx.len(), 64);
        }
    }
}
