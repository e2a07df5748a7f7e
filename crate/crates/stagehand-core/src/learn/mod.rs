//! Off-policy learner for the contact phase: a deterministic actor with
//! twin critics, trained from a replay buffer with n-step returns.
//!
//! The stabilizers are the usual ones for deterministic-policy TD
//! learning: clipped double-Q targets (take the pessimistic of two
//! target critics), target-policy smoothing (small clipped Gaussian
//! noise on the target action), and slow τ-averaged target networks.
//! Actions live in [−1, 1]⁴ — three end-effector translation axes and a
//! gripper rate — and are mapped onto environment bounds only at the
//! boundary ([`env_action`]). Exploration noise anneals linearly over
//! the first `sigma_steps` environment steps, then stays at `sigma_end`.

mod checkpoint;
mod net;
mod replay;

pub use checkpoint::{parse_checkpoint, write_checkpoint};
pub use net::{soft_update, Adam, ForwardPass, Grads, Linear, Mlp, Scalar};
pub use replay::{Batch, ReplayBuffer, Transition, DEFAULT_CAPACITY};

use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::LearnError;
use crate::seq::pose::standard_normal_pair;
use crate::sim::Action;

/// Policy action dimension: Δx, Δy, Δz, gripper rate.
pub const ACTION_DIM: usize = 4;

/// Learner hyperparameters. Every field has a default, so a config file
/// only names what it overrides; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    /// Width of both hidden layers, in every network.
    pub hidden: usize,
    /// Adam learning rate, shared by actor and critics.
    pub lr: f64,
    /// Discount per environment step.
    pub gamma: f64,
    /// Target-network averaging rate.
    pub tau: f64,
    /// Transitions per gradient step.
    pub batch_size: usize,
    /// Return horizon: rewards are summed over up to this many steps.
    pub n_step: usize,
    /// Exploration noise at step 0 …
    pub sigma_start: f64,
    /// … annealed linearly to this …
    pub sigma_end: f64,
    /// … over this many environment steps.
    pub sigma_steps: u64,
    /// Std of the smoothing noise added to target actions.
    pub target_noise: f64,
    /// Clip bound for that smoothing noise.
    pub noise_clip: f64,
    /// Replay ring capacity.
    pub buffer_capacity: usize,
}

impl Default for LearnerConfig {
    fn default() -> LearnerConfig {
        LearnerConfig {
            hidden: 128,
            lr: 1e-3,
            gamma: 0.99,
            tau: 0.005,
            batch_size: 256,
            n_step: 3,
            sigma_start: 1.0,
            sigma_end: 0.1,
            sigma_steps: 100_000,
            target_noise: 0.2,
            noise_clip: 0.3,
            buffer_capacity: DEFAULT_CAPACITY,
        }
    }
}

impl LearnerConfig {
    /// Reject values outside their meaningful ranges.
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |name: &'static str, value: f64| LearnError::InvalidConfig { name, value };
        if self.hidden == 0 {
            return Err(bad("hidden", 0.0));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(bad("lr", self.lr));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(bad("gamma", self.gamma));
        }
        if !(self.tau.is_finite() && self.tau > 0.0 && self.tau <= 1.0) {
            return Err(bad("tau", self.tau));
        }
        if self.batch_size == 0 {
            return Err(bad("batch_size", 0.0));
        }
        if self.n_step == 0 {
            return Err(bad("n_step", 0.0));
        }
        for (name, v) in [
            ("sigma_start", self.sigma_start),
            ("sigma_end", self.sigma_end),
            ("target_noise", self.target_noise),
            ("noise_clip", self.noise_clip),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(bad(name, v));
            }
        }
        if self.buffer_capacity < self.batch_size {
            return Err(bad("buffer_capacity", self.buffer_capacity as f64));
        }
        Ok(())
    }
}

/// Diagnostics from one gradient step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub q1_loss: f64,
    pub q2_loss: f64,
    pub actor_loss: f64,
    /// Mean Q₁ prediction on the batch, before the update.
    pub mean_q: f64,
    /// Mean TD target on the batch.
    pub mean_target: f64,
}

/// Actor–critic learner. One instance is shared across all stages of a
/// task: the observed scene (nearby objects, aperture, attachment) already
/// distinguishes one stage's contact work from another's.
#[derive(Debug, Clone)]
pub struct Learner {
    actor: Mlp<f32>,
    q1: Mlp<f32>,
    q2: Mlp<f32>,
    actor_t: Mlp<f32>,
    q1_t: Mlp<f32>,
    q2_t: Mlp<f32>,
    opt_actor: Adam<f32>,
    opt_q1: Adam<f32>,
    opt_q2: Adam<f32>,
    cfg: LearnerConfig,
    obs_dim: usize,
}

impl Learner {
    /// Fresh networks with seeded initialization; targets start as exact
    /// copies of their online networks.
    pub fn new(obs_dim: usize, cfg: LearnerConfig, seed: u64) -> Result<Learner, LearnError> {
        cfg.validate()?;
        assert!(obs_dim > 0, "the policy needs at least one observation feature");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor_dims = [obs_dim, cfg.hidden, cfg.hidden, ACTION_DIM];
        let critic_dims = [obs_dim + ACTION_DIM, cfg.hidden, cfg.hidden, 1];
        let actor: Mlp<f32> = Mlp::new(&actor_dims, &mut rng);
        let q1: Mlp<f32> = Mlp::new(&critic_dims, &mut rng);
        let q2: Mlp<f32> = Mlp::new(&critic_dims, &mut rng);
        Ok(Learner {
            actor_t: actor.clone(),
            q1_t: q1.clone(),
            q2_t: q2.clone(),
            opt_actor: Adam::new(&actor, cfg.lr),
            opt_q1: Adam::new(&q1, cfg.lr),
            opt_q2: Adam::new(&q2, cfg.lr),
            actor,
            q1,
            q2,
            cfg,
            obs_dim,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    /// Exploration noise scale at a given environment step: linear from
    /// `sigma_start` to `sigma_end`, constant afterwards.
    pub fn sigma(&self, step: u64) -> f64 {
        let c = &self.cfg;
        if step >= c.sigma_steps {
            return c.sigma_end;
        }
        let frac = step as f64 / c.sigma_steps as f64;
        c.sigma_start + frac * (c.sigma_end - c.sigma_start)
    }

    /// Policy action for one observation, in [−1, 1]⁴. With `explore`,
    /// Gaussian noise at the annealed scale is added before clipping.
    pub fn act(
        &self,
        obs: &[f32],
        step: u64,
        explore: bool,
        rng: &mut impl Rng,
    ) -> Result<[f32; ACTION_DIM], LearnError> {
        if obs.len() != self.obs_dim {
            return Err(LearnError::ShapeError { got: obs.len(), want: self.obs_dim });
        }
        let x = Array2::from_shape_vec((1, self.obs_dim), obs.to_vec()).expect("length checked");
        let pass = self.actor.forward(x);
        let out = pass.out();
        let mut a = [0f32; ACTION_DIM];
        for (i, v) in a.iter_mut().enumerate() {
            *v = out[(0, i)].tanh();
        }
        if explore {
            let sigma = self.sigma(step);
            let (n0, n1) = standard_normal_pair(rng);
            let (n2, n3) = standard_normal_pair(rng);
            for (v, n) in a.iter_mut().zip([n0, n1, n2, n3]) {
                *v += (sigma * n) as f32;
            }
        }
        for v in &mut a {
            *v = v.clamp(-1.0, 1.0);
        }
        Ok(a)
    }

    /// One gradient step: both critics toward the clipped double-Q n-step
    /// target, then the actor up the (freshly updated) first critic, then
    /// τ-averaged target updates.
    pub fn update(
        &mut self,
        buffer: &ReplayBuffer,
        rng: &mut impl Rng,
    ) -> Result<LossReport, LearnError> {
        let batch =
            buffer.sample(self.cfg.batch_size, self.cfg.n_step, self.cfg.gamma, rng.gen())?;
        let b = self.cfg.batch_size;
        let scale = 1.0 / b as f32;

        // Target action: smoothed deterministic policy, kept in bounds.
        let mut a_next = self.actor_t.forward(batch.next_obs.clone()).out().mapv(f32::tanh);
        let noise =
            clipped_noise(a_next.len(), self.cfg.target_noise, self.cfg.noise_clip, rng);
        for (v, n) in a_next.iter_mut().zip(noise) {
            *v = (*v + n).clamp(-1.0, 1.0);
        }

        // TD target: n-step reward plus the discounted pessimistic value.
        let sa_next = concat_cols(&batch.next_obs, &a_next);
        let q1n = self.q1_t.forward(sa_next.clone()).out().column(0).to_owned();
        let q2n = self.q2_t.forward(sa_next).out().column(0).to_owned();
        let min_q = ndarray::Zip::from(&q1n).and(&q2n).map_collect(|a, b| a.min(*b));
        let y: Array1<f32> = &batch.reward + &(&batch.bootstrap * &min_q);
        let mean_target = mean(&y);

        // Critic regression (MSE), each on its own optimizer.
        let sa = concat_cols(&batch.obs, &batch.action);
        let pass1 = self.q1.forward(sa.clone());
        let err1 = &pass1.out().column(0) - &y;
        let mean_q = mean(&pass1.out().column(0).to_owned());
        let q1_loss = err1.iter().map(|e| (e * e) as f64).sum::<f64>() / b as f64;
        let d1 = err1.mapv(|e| 2.0 * scale * e).insert_axis(Axis(1));
        let (g1, _) = self.q1.backward(&pass1, d1);
        self.opt_q1.step(&mut self.q1, &g1);

        let pass2 = self.q2.forward(sa);
        let err2 = &pass2.out().column(0) - &y;
        let q2_loss = err2.iter().map(|e| (e * e) as f64).sum::<f64>() / b as f64;
        let d2 = err2.mapv(|e| 2.0 * scale * e).insert_axis(Axis(1));
        let (g2, _) = self.q2.backward(&pass2, d2);
        self.opt_q2.step(&mut self.q2, &g2);

        // Actor ascends Q₁(s, π(s)): the critic's input gradient is pulled
        // back through the tanh squash into the actor.
        let pass_pi = self.actor.forward(batch.obs.clone());
        let a_pi = pass_pi.out().mapv(f32::tanh);
        let sa_pi = concat_cols(&batch.obs, &a_pi);
        let pass_q = self.q1.forward(sa_pi);
        let actor_loss = -mean(&pass_q.out().column(0).to_owned());
        let dq = Array2::from_elem((b, 1), -scale);
        let (_, dsa) = self.q1.backward(&pass_q, dq);
        let da = dsa.slice(s![.., self.obs_dim..]).to_owned();
        let dpre = &da * &a_pi.mapv(|a| 1.0 - a * a);
        let (ga, _) = self.actor.backward(&pass_pi, dpre);
        self.opt_actor.step(&mut self.actor, &ga);

        soft_update(&mut self.actor_t, &self.actor, self.cfg.tau);
        soft_update(&mut self.q1_t, &self.q1, self.cfg.tau);
        soft_update(&mut self.q2_t, &self.q2, self.cfg.tau);

        Ok(LossReport { q1_loss, q2_loss, actor_loss, mean_q, mean_target })
    }

    /// Both critics' value of one state–action pair.
    pub fn q_values(
        &self,
        obs: &[f32],
        action: &[f32; ACTION_DIM],
    ) -> Result<(f64, f64), LearnError> {
        if obs.len() != self.obs_dim {
            return Err(LearnError::ShapeError { got: obs.len(), want: self.obs_dim });
        }
        let mut sa = Vec::with_capacity(self.obs_dim + ACTION_DIM);
        sa.extend_from_slice(obs);
        sa.extend_from_slice(action);
        let x = Array2::from_shape_vec((1, sa.len()), sa).expect("sized above");
        let v1 = self.q1.forward(x.clone()).out()[(0, 0)] as f64;
        let v2 = self.q2.forward(x).out()[(0, 0)] as f64;
        Ok((v1, v2))
    }

    /// Test-only: make the actor (and its target) emit `tanh(pre_tanh)`
    /// for every observation, so episode-loop tests can drive the
    /// environment with a known constant action.
    #[cfg(test)]
    pub(crate) fn force_constant_actor(&mut self, pre_tanh: [f32; ACTION_DIM]) {
        for net in [&mut self.actor, &mut self.actor_t] {
            for layer in &mut net.layers {
                layer.w.fill(0.0);
                layer.b.fill(0.0);
            }
            let last = net.layers.last_mut().expect("actor has layers");
            for (i, v) in pre_tanh.iter().enumerate() {
                last.b[i] = *v;
            }
        }
    }
}

/// Map a normalized policy action onto environment bounds: translation
/// axes scale to the per-step limit, the gripper rate passes through.
pub fn env_action(a: &[f32; ACTION_DIM]) -> Action {
    Action::from_normalized([a[0] as f64, a[1] as f64, a[2] as f64, a[3] as f64])
}

fn concat_cols(a: &Array2<f32>, b: &Array2<f32>) -> Array2<f32> {
    concatenate(Axis(1), &[a.view(), b.view()]).expect("row counts match")
}

fn mean(v: &Array1<f32>) -> f64 {
    v.iter().map(|x| *x as f64).sum::<f64>() / v.len().max(1) as f64
}

/// `n` draws of clip(std·N(0,1), ±clip), as f32.
fn clipped_noise(n: usize, std: f64, clip: f64, rng: &mut impl Rng) -> Vec<f32> {
    let mut out = Vec::with_capacity(n + 1);
    while out.len() < n {
        let (a, b) = standard_normal_pair(rng);
        out.push((std * a).clamp(-clip, clip) as f32);
        out.push((std * b).clamp(-clip, clip) as f32);
    }
    out.truncate(n);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::MAX_EE_STEP;

    fn learner(obs_dim: usize, cfg: LearnerConfig) -> Learner {
        Learner::new(obs_dim, cfg, 17).expect("valid config")
    }

    fn small_cfg() -> LearnerConfig {
        LearnerConfig { hidden: 16, batch_size: 8, buffer_capacity: 64, ..Default::default() }
    }

    fn constant_transition(obs_dim: usize, reward: f32, done: bool) -> Transition {
        Transition {
            obs: vec![0.5; obs_dim],
            action: vec![0.2, -0.3, 0.1, 0.4],
            reward,
            next_obs: vec![0.5; obs_dim],
            done,
            stage_end: false,
        }
    }

    #[test]
    fn the_deterministic_policy_is_a_function_of_the_observation_alone() {
        let l = learner(6, small_cfg());
        let obs = [0.3f32, -0.2, 0.8, 0.0, -1.0, 0.4];
        let mut rng_a = ChaCha8Rng::seed_from_u64(1);
        let mut rng_b = ChaCha8Rng::seed_from_u64(999);
        let a = l.act(&obs, 0, false, &mut rng_a).unwrap();
        let b = l.act(&obs, 50_000, false, &mut rng_b).unwrap();
        assert_eq!(a, b, "rng state and step must not leak into exploitation actions");
    }

    #[test]
    fn exploration_noise_anneals_linearly_then_holds() {
        let l = learner(4, LearnerConfig::default());
        assert_eq!(l.sigma(0), 1.0);
        assert!((l.sigma(50_000) - 0.55).abs() < 1e-12);
        assert_eq!(l.sigma(100_000), 0.1);
        assert_eq!(l.sigma(1_000_000), 0.1);
    }

    /// Invariant: actions stay in [−1, 1]⁴ over 100 000 randomized calls
    /// (extreme observations, random steps, exploration on and off), and
    /// the environment mapping respects actuation bounds.
    #[test]
    fn actions_stay_in_bounds_under_fuzzing() {
        let cfg = LearnerConfig { hidden: 8, ..small_cfg() };
        let l = learner(5, cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..100_000u64 {
            let mut obs = [0f32; 5];
            for v in &mut obs {
                *v = match rng.gen_range(0..10) {
                    0 => 1e4,
                    1 => -1e4,
                    2 => 0.0,
                    _ => rng.gen_range(-2.0..2.0),
                };
            }
            let step = rng.gen_range(0..200_000);
            let explore = i % 2 == 0;
            let a = l.act(&obs, step, explore, &mut rng).unwrap();
            for (k, v) in a.iter().enumerate() {
                assert!((-1.0..=1.0).contains(v), "call {i} component {k} out of bounds: {v}");
            }
            let env = env_action(&a);
            assert!(env.d_ee.x.abs() <= MAX_EE_STEP);
            assert!(env.d_ee.y.abs() <= MAX_EE_STEP);
            assert!(env.d_ee.z.abs() <= MAX_EE_STEP);
            assert!((-1.0..=1.0).contains(&env.grip_cmd));
        }
    }

    #[test]
    fn a_wrongly_sized_observation_is_reported_not_misread() {
        let l = learner(6, small_cfg());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let err = l.act(&[0.0; 4], 0, false, &mut rng).unwrap_err();
        assert!(matches!(err, LearnError::ShapeError { got: 4, want: 6 }));
        let err = l.q_values(&[0.0; 9], &[0.0; 4]).unwrap_err();
        assert!(matches!(err, LearnError::ShapeError { got: 9, want: 6 }));
    }

    /// Early exploration must be much louder than late exploration: the
    /// mean perturbation at step 0 (σ = 1.0) should dwarf the one after
    /// the anneal (σ = 0.1).
    #[test]
    fn exploration_noise_shrinks_as_the_schedule_anneals() {
        let l = learner(3, small_cfg());
        let obs = [0f32; 3]; // zero input ⇒ deterministic action is exactly 0
        let det = l.act(&obs, 0, false, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(det, [0.0; 4]);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mean_abs = |step: u64, rng: &mut ChaCha8Rng| -> f64 {
            let mut total = 0.0;
            for _ in 0..1000 {
                let a = l.act(&obs, step, true, rng).unwrap();
                total += a.iter().map(|v| v.abs() as f64).sum::<f64>() / 4.0;
            }
            total / 1000.0
        };
        let early = mean_abs(0, &mut rng);
        let late = mean_abs(150_000, &mut rng);
        assert!(
            early > 3.0 * late,
            "expected early noise ≫ late noise, got early {early} vs late {late}"
        );
    }

    /// With every stored transition terminal at reward zero, the TD target
    /// is exactly zero regardless of network state, and regression drives
    /// the critic loss down.
    #[test]
    fn critics_regress_toward_a_degenerate_zero_target() {
        let cfg = small_cfg();
        let mut l = learner(4, cfg.clone());
        let mut buf = ReplayBuffer::new(cfg.buffer_capacity);
        for _ in 0..cfg.batch_size {
            buf.push(constant_transition(4, 0.0, true));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let first = l.update(&buf, &mut rng).unwrap();
        assert_eq!(first.mean_target, 0.0, "terminal zero-reward targets are exactly zero");
        let mut last = first;
        for _ in 0..50 {
            last = l.update(&buf, &mut rng).unwrap();
        }
        assert!(
            last.q1_loss < first.q1_loss / 10.0,
            "critic loss should collapse on a constant target: {} → {}",
            first.q1_loss,
            last.q1_loss
        );
    }

    /// Single-arm bandit: one terminal transition with reward 0.7. Both
    /// critics must learn its value to within 1e-2.
    #[test]
    fn both_critics_converge_on_a_single_armed_bandit() {
        let cfg = LearnerConfig {
            hidden: 32,
            batch_size: 1,
            buffer_capacity: 4,
            ..Default::default()
        };
        let mut l = learner(3, cfg);
        let t = constant_transition(3, 0.7, true);
        let mut buf = ReplayBuffer::new(4);
        buf.push(t.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..2000 {
            l.update(&buf, &mut rng).unwrap();
        }
        let action: [f32; 4] = t.action.clone().try_into().unwrap();
        let (q1, q2) = l.q_values(&t.obs, &action).unwrap();
        assert!((q1 - 0.7).abs() <= 1e-2, "q1 = {q1}");
        assert!((q2 - 0.7).abs() <= 1e-2, "q2 = {q2}");
    }

    #[test]
    fn updating_from_an_underfilled_buffer_is_not_ready() {
        let cfg = small_cfg();
        let mut l = learner(4, cfg.clone());
        let buf = ReplayBuffer::new(cfg.buffer_capacity);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let err = l.update(&buf, &mut rng).unwrap_err();
        assert!(matches!(err, LearnError::NotReady { have: 0, need: 8 }));
    }

    /// τ = 1 must snap every target network onto its online twin after a
    /// single update.
    #[test]
    fn a_full_rate_soft_update_snaps_targets_onto_online_networks() {
        let cfg = LearnerConfig { tau: 1.0, ..small_cfg() };
        let mut l = learner(4, cfg.clone());
        let mut buf = ReplayBuffer::new(cfg.buffer_capacity);
        for i in 0..cfg.batch_size {
            buf.push(constant_transition(4, 0.1 * i as f32, i % 3 == 0));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        l.update(&buf, &mut rng).unwrap();
        assert_eq!(l.actor_t.flatten(), l.actor.flatten());
        assert_eq!(l.q1_t.flatten(), l.q1.flatten());
        assert_eq!(l.q2_t.flatten(), l.q2.flatten());
        // And the update moved the online networks off their targets'
        // starting point, so the equality above is not vacuous.
        let l2 = learner(4, cfg);
        assert_ne!(l2.q1.flatten(), l.q1.flatten());
    }

    #[test]
    fn out_of_range_hyperparameters_are_rejected_by_name() {
        let cases: [(&str, LearnerConfig); 4] = [
            ("gamma", LearnerConfig { gamma: 0.0, ..Default::default() }),
            ("tau", LearnerConfig { tau: 1.5, ..Default::default() }),
            ("lr", LearnerConfig { lr: f64::NAN, ..Default::default() }),
            (
                "buffer_capacity",
                LearnerConfig { buffer_capacity: 10, batch_size: 32, ..Default::default() },
            ),
        ];
        for (want, cfg) in cases {
            match Learner::new(4, cfg, 0) {
                Err(LearnError::InvalidConfig { name, .. }) => assert_eq!(name, want),
                other => panic!("expected InvalidConfig for {want}, got {other:?}"),
            }
        }
    }

    #[test]
    fn config_files_may_override_a_subset_and_unknown_keys_fail() {
        let cfg: LearnerConfig =
            serde_json::from_str(r#"{"hidden": 64, "sigma_steps": 5000}"#).unwrap();
        assert_eq!(cfg.hidden, 64);
        assert_eq!(cfg.sigma_steps, 5000);
        assert_eq!(cfg.lr, 1e-3);
        assert!(serde_json::from_str::<LearnerConfig>(r#"{"hiden": 64}"#).is_err());
    }
}
