//! Ring replay storage with n-step return assembly.
//!
//! Transitions are stored in insertion order; when full, the oldest is
//! evicted. Sampling draws base indices uniformly without replacement and
//! walks each chain forward up to `n_step` transitions, accumulating
//! discounted rewards. A chain stops early at `done` (true environment
//! termination — no bootstrap), at `stage_end` (control moved to the next
//! stage, possibly through a motion-planner jump — bootstrap kept, but the
//! chain must not credit rewards across the jump), or at the newest stored
//! transition.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

use crate::error::LearnError;

/// Default ring capacity.
pub const DEFAULT_CAPACITY: usize = 100_000;

/// One environment step in policy coordinates (actions in [−1, 1]).
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f32>,
    pub action: Vec<f32>,
    pub reward: f32,
    pub next_obs: Vec<f32>,
    /// True environment termination only — never a stage switch.
    pub done: bool,
    /// Last policy step of its stage; n-step chains stop here.
    pub stage_end: bool,
}

impl Transition {
    fn is_finite(&self) -> bool {
        self.reward.is_finite()
            && self.obs.iter().all(|v| v.is_finite())
            && self.action.iter().all(|v| v.is_finite())
            && self.next_obs.iter().all(|v| v.is_finite())
    }
}

/// A sampled batch. `reward` holds the n-step discounted sum and
/// `bootstrap` the matching discount γᵐ for the value at `next_obs`
/// (zero when the chain ended in termination), so the TD target is
/// `reward + bootstrap · V(next_obs)` with no further case analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub obs: Array2<f32>,
    pub action: Array2<f32>,
    pub reward: Array1<f32>,
    pub next_obs: Array2<f32>,
    pub bootstrap: Array1<f32>,
}

/// FIFO ring of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    data: Vec<Transition>,
    /// Physical position of the oldest (logical 0) transition.
    start: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        assert!(capacity > 0, "a replay buffer needs room for at least one transition");
        ReplayBuffer { capacity, data: Vec::new(), start: 0 }
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

    /// Append a transition, evicting the oldest at capacity.
    pub fn push(&mut self, t: Transition) {
        debug_assert!(t.is_finite(), "transitions must be finite");
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.start] = t;
            self.start = (self.start + 1) % self.capacity;
        }
    }

    /// Transition at logical index (0 = oldest).
    fn get(&self, logical: usize) -> &Transition {
        &self.data[(self.start + logical) % self.data.len().max(1)]
    }

    /// Draw `batch` base transitions uniformly without replacement and
    /// assemble their n-step returns.
    pub fn sample(
        &self,
        batch: usize,
        n_step: usize,
        gamma: f64,
        seed: u64,
    ) -> Result<Batch, LearnError> {
        let size = self.len();
        if size < batch {
            return Err(LearnError::NotReady { have: size, need: batch });
        }
        assert!(n_step >= 1, "n-step returns need n ≥ 1");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bases = draw_without_replacement(size, batch, &mut rng);

        let obs_dim = self.get(0).obs.len();
        let act_dim = self.get(0).action.len();
        let mut obs = Array2::zeros((batch, obs_dim));
        let mut action = Array2::zeros((batch, act_dim));
        let mut reward = Array1::zeros(batch);
        let mut next_obs = Array2::zeros((batch, obs_dim));
        let mut bootstrap = Array1::zeros(batch);

        for (row, &base) in bases.iter().enumerate() {
            let first = self.get(base);
            obs.row_mut(row).assign(&Array1::from_vec(first.obs.clone()));
            action.row_mut(row).assign(&Array1::from_vec(first.action.clone()));

            let mut acc = 0.0f64;
            let mut disc = 1.0f64;
            let mut k = base;
            loop {
                let t = self.get(k);
                acc += disc * t.reward as f64;
                disc *= gamma;
                let chain_full = k - base + 1 == n_step;
                if t.done || t.stage_end || chain_full || k + 1 == size {
                    reward[row] = acc as f32;
                    bootstrap[row] = if t.done { 0.0 } else { disc as f32 };
                    next_obs.row_mut(row).assign(&Array1::from_vec(t.next_obs.clone()));
                    break;
                }
                k += 1;
            }
        }
        Ok(Batch { obs, action, reward, next_obs, bootstrap })
    }
}

/// Uniform sample of `k` distinct indices from `0..n`.
fn draw_without_replacement(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    assert!(k <= n);
    if k * 3 >= n {
        // Dense draw: partial Fisher–Yates.
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = rng.gen_range(i..n);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    } else {
        // Sparse draw: rejection against a seen-set.
        let mut seen = HashSet::with_capacity(k * 2);
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            let i = rng.gen_range(0..n);
            if seen.insert(i) {
                out.push(i);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A transition tagged by `id` in its observation so sampled rows can
    /// be traced back to what was pushed.
    fn tagged(id: u32, reward: f32, done: bool, stage_end: bool) -> Transition {
        Transition {
            obs: vec![id as f32, 0.5],
            action: vec![0.1, -0.2],
            reward,
            next_obs: vec![id as f32 + 0.25, 0.5],
            done,
            stage_end,
        }
    }

    #[test]
    fn pushes_grow_until_capacity_then_evict_the_oldest() {
        let mut b = ReplayBuffer::new(2);
        assert!(b.is_empty());
        b.push(tagged(1, 0.0, false, false));
        assert_eq!(b.len(), 1);
        b.push(tagged(2, 0.0, false, false));
        b.push(tagged(3, 0.0, false, false));
        assert_eq!(b.len(), 2);
        // Ask for everything: tag 1 must be gone, 2 and 3 present.
        let batch = b.sample(2, 1, 0.99, 0).unwrap();
        let mut tags: Vec<f32> = (0..2).map(|r| batch.obs[(r, 0)]).collect();
        tags.sort_by(f32::total_cmp);
        assert_eq!(tags, vec![2.0, 3.0]);
    }

    #[test]
    fn size_never_exceeds_capacity() {
        let mut b = ReplayBuffer::new(100);
        for i in 0..250 {
            b.push(tagged(i, 0.0, false, false));
            assert_eq!(b.len(), usize::min(i as usize + 1, 100));
        }
        assert_eq!(b.capacity(), 100);
    }

    #[test]
    fn sampling_more_than_stored_is_not_ready() {
        let mut b = ReplayBuffer::new(8);
        b.push(tagged(0, 0.0, false, false));
        let err = b.sample(2, 3, 0.99, 0).unwrap_err();
        assert!(matches!(err, LearnError::NotReady { have: 1, need: 2 }));
    }

    #[test]
    fn a_fixed_seed_reproduces_the_batch_exactly() {
        let mut b = ReplayBuffer::new(64);
        for i in 0..40 {
            b.push(tagged(i, i as f32, i % 11 == 10, i % 7 == 6));
        }
        let x = b.sample(8, 3, 0.99, 42).unwrap();
        let y = b.sample(8, 3, 0.99, 42).unwrap();
        assert_eq!(x, y);
        let z = b.sample(8, 3, 0.99, 43).unwrap();
        assert_ne!(x.obs, z.obs, "a different seed should draw a different batch");
    }

    /// Hand-computed n-step oracle over an 8-transition episode with a
    /// termination at index 3 and a stage boundary at index 5 (γ = 0.5 so
    /// every expected value is exact in binary floating point).
    ///
    /// index:     0      1      2      3(done) 4      5(stage) 6      7
    /// reward:    1      2      3      4       5      6        7      8
    #[test]
    fn n_step_chains_truncate_at_done_stage_boundaries_and_the_buffer_edge() {
        let mut b = ReplayBuffer::new(16);
        for i in 0..8u32 {
            b.push(tagged(i, (i + 1) as f32, i == 3, i == 5));
        }
        // Sample everything so each base index appears exactly once.
        let batch = b.sample(8, 3, 0.5, 7).unwrap();

        //                       n-step reward                bootstrap  next tag
        let expected: [(f32, f32, f32); 8] = [
            (1.0 + 0.5 * 2.0 + 0.25 * 3.0, 0.125, 2.25), // full 3-chain
            (2.0 + 0.5 * 3.0 + 0.25 * 4.0, 0.0, 3.25),   // reaches done: no bootstrap
            (3.0 + 0.5 * 4.0, 0.0, 3.25),                // stops at done
            (4.0, 0.0, 3.25),                            // done immediately
            (5.0 + 0.5 * 6.0, 0.25, 5.25),               // stops at stage end, bootstraps
            (6.0, 0.5, 5.25),                            // stage end immediately
            (7.0 + 0.5 * 8.0, 0.25, 7.25),               // newest edge after 2 steps
            (8.0, 0.5, 7.25),                            // newest transition
        ];
        let mut seen = [false; 8];
        for row in 0..8 {
            let base = batch.obs[(row, 0)] as usize;
            assert!(!seen[base], "base {base} sampled twice in a no-replacement draw");
            seen[base] = true;
            let (want_r, want_boot, want_next) = expected[base];
            assert_eq!(batch.reward[row], want_r, "reward of base {base}");
            assert_eq!(batch.bootstrap[row], want_boot, "bootstrap of base {base}");
            assert_eq!(batch.next_obs[(row, 0)], want_next, "next obs of base {base}");
            assert_eq!(batch.action[(row, 0)], 0.1);
        }
        assert!(seen.iter().all(|s| *s), "every base index must appear once");
    }

    /// Logical order survives ring wraparound: after eviction the oldest
    /// remaining transition is logical 0 and chains still run forward in
    /// insertion order.
    #[test]
    fn chains_follow_insertion_order_across_the_ring_seam() {
        let mut b = ReplayBuffer::new(8);
        for i in 0..12u32 {
            b.push(tagged(i, i as f32, false, false));
        }
        // Stored: 4..=11. A full draw must see exactly those tags, and the
        // 3-chain from base tag 9 must sum 9 + γ·10 + γ²·11.
        let batch = b.sample(8, 3, 0.5, 3).unwrap();
        let mut tags: Vec<f32> = (0..8).map(|r| batch.obs[(r, 0)]).collect();
        tags.sort_by(f32::total_cmp);
        assert_eq!(tags, (4..12).map(|i| i as f32).collect::<Vec<_>>());
        for row in 0..8 {
            if batch.obs[(row, 0)] == 9.0 {
                assert_eq!(batch.reward[row], 9.0 + 0.5 * 10.0 + 0.25 * 11.0);
                assert_eq!(batch.bootstrap[row], 0.125);
            }
        }
    }

    #[test]
    fn sampled_rows_are_always_stored_transitions() {
        let mut b = ReplayBuffer::new(32);
        for i in 0..20u32 {
            b.push(tagged(i, 2.0 * i as f32, false, false));
        }
        let batch = b.sample(10, 3, 0.9, 11).unwrap();
        for row in 0..10 {
            let tag = batch.obs[(row, 0)];
            assert!(
                (0.0..20.0).contains(&tag) && tag.fract() == 0.0,
                "row {row} does not correspond to any pushed transition"
            );
        }
    }
}
