//! Single-episode rollouts for the staged method and the monolithic
//! baseline.
//!
//! Both run the same learner machinery through [`EpisodeMode`]: in
//! training mode every environment step stores a transition and takes one
//! gradient step; in evaluation mode the policy acts greedily and nothing
//! is stored. The staged loop interleaves motion-planned approaches and
//! stage-condition checks; the monolithic loop touches neither — a
//! property the call-count probes make testable.

use std::time::Instant;

use rand::Rng;

use crate::experiment::{EpisodeRecord, ExperimentConfig, StageRecord, TerminationMode};
use crate::learn::{env_action, Learner, ReplayBuffer, Transition, ACTION_DIM};
use crate::plan::PlanStep;
use crate::seq::{sequence_to_region, PlannerConfig};
use crate::sim::Simulator;
use crate::terminate::StageGate;

/// Environment steps per monolithic policy decision. Holding each action
/// briefly makes exploration displacements large enough to produce contact
/// events at the same decision budget.
pub const E2E_ACTION_REPEAT: usize = 2;

/// Whether an episode trains the policy or just scores it.
pub enum EpisodeMode<'a> {
    /// Store every transition and update the learner once per environment
    /// step, exploring with the current noise schedule.
    Train { learner: &'a mut Learner, buffer: &'a mut ReplayBuffer, env_step: &'a mut u64 },
    /// Act greedily; store and update nothing.
    Eval { learner: &'a Learner },
}

impl EpisodeMode<'_> {
    fn act(&self, obs: &[f32], rng: &mut impl Rng) -> [f32; ACTION_DIM] {
        match self {
            EpisodeMode::Train { learner, env_step, .. } => learner.act(obs, **env_step, true, rng),
            EpisodeMode::Eval { learner } => learner.act(obs, 0, false, rng),
        }
        .expect("policy was built for this task's observation width")
    }

    /// Store a transition that consumed `steps` environment steps and take
    /// one gradient step (training mode only).
    fn record(&mut self, t: Transition, steps: u64, rng: &mut impl Rng) {
        if let EpisodeMode::Train { learner, buffer, env_step } = self {
            buffer.push(t);
            **env_step += steps;
            if buffer.len() >= learner.config().batch_size {
                learner.update(buffer, rng).expect("replay holds at least one batch");
            }
        }
    }
}

/// Local features as the `f32` vector the policy consumes.
pub fn local_obs(sim: &Simulator) -> Vec<f32> {
    sim.local_features().iter().map(|&v| v as f32).collect()
}

/// Global features as the `f32` vector the monolithic policy consumes.
pub fn global_obs(sim: &Simulator) -> Vec<f32> {
    sim.global_features().iter().map(|&v| v as f32).collect()
}

/// Run one staged episode: for each plan stage, a motion-planned approach
/// to the stage's region, then up to `cfg.h_l` policy steps.
///
/// In [`TerminationMode::Condition`] the stage ends as soon as its
/// termination condition fires; in [`TerminationMode::Timeout`] it always
/// consumes the full budget (the condition is still tracked for the
/// record). Sequencing and stage-bookkeeping failures are recorded on the
/// stage and the episode carries on from wherever the arm is — the policy
/// must cope. Task success ends the episode immediately.
pub fn run_psl_episode(
    sim: &mut Simulator,
    plan: &[PlanStep],
    mut mode: EpisodeMode,
    cfg: &ExperimentConfig,
    rng: &mut impl Rng,
) -> EpisodeRecord {
    let t0 = Instant::now();
    let noise = cfg.noise();
    let mut stages = Vec::with_capacity(plan.len());
    let mut total_reward = 0.0;
    let mut env_steps = 0usize;
    let mut done = false;

    for step in plan {
        let mut rec = StageRecord::new(&step.region, &step.condition);

        let planner = PlannerConfig { seed: rng.gen(), ..cfg.planner };
        match sequence_to_region(sim, &step.region, &noise, &planner, rng) {
            Ok(out) => {
                rec.sequenced = true;
                rec.planning_time = out.plan.planning_time;
                rec.plan_samples = out.plan.n_samples;
            }
            Err(e) => rec.note_fault(e.to_string()),
        }

        let mut gate = match StageGate::begin(sim, &step.region, &step.condition, cfg.thresholds) {
            Ok(g) => Some(g),
            Err(e) => {
                rec.note_fault(e.to_string());
                None
            }
        };

        for t in 0..cfg.h_l {
            let obs = local_obs(sim);
            let a = mode.act(&obs, rng);
            let (r, d) = sim.step_lite(env_action(&a));
            total_reward += r;
            env_steps += 1;
            rec.steps_used = t + 1;
            done = d;
            // Inputs were vetted by `begin`, so a check cannot fail here.
            let fired = gate.as_mut().is_some_and(|g| g.check(sim).unwrap_or(false));
            let stage_over = done
                || rec.steps_used == cfg.h_l
                || (cfg.mode == TerminationMode::Condition && fired);
            mode.record(
                Transition {
                    obs,
                    action: a.to_vec(),
                    reward: r as f32,
                    next_obs: local_obs(sim),
                    done: d,
                    stage_end: stage_over,
                },
                1,
                rng,
            );
            if stage_over {
                break;
            }
        }

        rec.condition_met = gate.map_or(false, |g| g.fired());
        stages.push(rec);
        if done {
            break;
        }
    }

    EpisodeRecord {
        stages,
        total_reward,
        env_steps,
        success: sim.is_success(),
        wall_time: t0.elapsed().as_secs_f64(),
    }
}

/// Run one monolithic episode: a single policy over global features,
/// without sequencing, stages, or condition checks, for up to `horizon`
/// environment steps (the same total budget a staged episode gets).
pub fn run_e2e_episode(
    sim: &mut Simulator,
    horizon: usize,
    mut mode: EpisodeMode,
    _cfg: &ExperimentConfig,
    rng: &mut impl Rng,
) -> EpisodeRecord {
    let t0 = Instant::now();
    let mut total_reward = 0.0;
    let mut env_steps = 0usize;
    let mut done = false;

    while env_steps < horizon && !done {
        let obs = global_obs(sim);
        let a = mode.act(&obs, rng);
        let mut reward = 0.0f64;
        let mut taken = 0u64;
        for _ in 0..E2E_ACTION_REPEAT {
            if env_steps == horizon {
                break;
            }
            let (r, d) = sim.step_lite(env_action(&a));
            reward += r;
            env_steps += 1;
            taken += 1;
            if d {
                done = true;
                break;
            }
        }
        total_reward += reward;
        mode.record(
            Transition {
                obs,
                action: a.to_vec(),
                reward: reward as f32,
                next_obs: global_obs(sim),
                done,
                stage_end: done || env_steps == horizon,
            },
            taken,
            rng,
        );
    }

    EpisodeRecord {
        stages: Vec::new(),
        total_reward,
        env_steps,
        success: sim.is_success(),
        wall_time: t0.elapsed().as_secs_f64(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::run_scripted_episode;
    use crate::learn::{write_checkpoint, LearnerConfig};
    use crate::probe;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test_cfg(task: &str, h_l: usize) -> ExperimentConfig {
        ExperimentConfig {
            h_l,
            learner: LearnerConfig {
                hidden: 16,
                batch_size: 4,
                ..LearnerConfig::default()
            },
            ..ExperimentConfig::for_task(task)
        }
    }

    fn plan_steps(pairs: &[(&str, &str)]) -> Vec<PlanStep> {
        pairs
            .iter()
            .map(|(r, c)| PlanStep { region: r.to_string(), condition: c.to_string() })
            .collect()
    }

    fn fresh_learner(sim: &Simulator, cfg: &ExperimentConfig) -> Learner {
        Learner::new(sim.local_features().len(), cfg.learner.clone(), 7).unwrap()
    }

    #[test]
    fn staged_episode_obeys_stage_and_budget_bookkeeping() {
        let cfg = test_cfg("PickPlaceCan", 5);
        let plan = plan_steps(&[("can", "grasp"), ("bin 1", "place")]);
        let mut sim = Simulator::new("PickPlaceCan", 3).unwrap();
        let learner = fresh_learner(&sim, &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(11);

        let seq_before = probe::sequence_calls();
        let rec = run_psl_episode(
            &mut sim,
            &plan,
            EpisodeMode::Eval { learner: &learner },
            &cfg,
            &mut rng,
        );

        assert!(rec.stages.len() <= plan.len());
        assert_eq!(
            probe::sequence_calls() - seq_before,
            rec.stages.len() as u64,
            "one sequencing approach per stage"
        );
        let total: usize = rec.stages.iter().map(|s| s.steps_used).sum();
        assert_eq!(rec.env_steps, total);
        assert!(rec.env_steps <= plan.len() * cfg.h_l, "budget: at most stages × h_l steps");
        for s in &rec.stages {
            assert!(s.steps_used <= cfg.h_l);
            assert!(s.sequenced, "clean scene should sequence fine: {:?}", s.fault);
            assert!(s.plan_samples > 0);
        }
        assert_eq!(rec.success, sim.is_success());
    }

    /// With the can already held over its bin, a constant "open the hand"
    /// policy completes a place stage within a few steps. Condition mode
    /// must hand off right there; timeout mode must hold the stage for the
    /// full budget while still latching that the condition fired.
    #[test]
    fn condition_mode_hands_off_early_timeout_mode_spends_the_full_budget() {
        for (mode, expect_full) in
            [(TerminationMode::Condition, false), (TerminationMode::Timeout, true)]
        {
            let mut cfg = test_cfg("CanBread", 10);
            cfg.mode = mode;
            let mut sim = Simulator::new("CanBread", 5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(21);

            // Pre-grasp the can with the scripted skill, then hand over.
            let grasp = run_scripted_episode(
                &mut sim,
                &plan_steps(&[("can", "grasp")]),
                &cfg,
                &mut rng,
            );
            assert!(grasp.stages[0].condition_met, "setup: scripted grasp must work");
            assert!(sim.state.attachment.is_some());

            let mut learner = fresh_learner(&sim, &cfg);
            learner.force_constant_actor([0.0, 0.0, 0.0, 3.0]);
            let rec = run_psl_episode(
                &mut sim,
                &plan_steps(&[("bin 1", "place")]),
                EpisodeMode::Eval { learner: &learner },
                &cfg,
                &mut rng,
            );

            let stage = &rec.stages[0];
            assert!(stage.condition_met, "{mode:?}: place should fire");
            assert!(!rec.success, "can alone does not finish CanBread");
            if expect_full {
                assert_eq!(stage.steps_used, cfg.h_l, "timeout mode spends the whole budget");
            } else {
                assert!(
                    stage.steps_used < cfg.h_l,
                    "condition mode should hand off early, used {}",
                    stage.steps_used
                );
            }
        }
    }

    #[test]
    fn training_episodes_are_deterministic_in_config_and_seed() {
        let run = || {
            let cfg = test_cfg("PickPlaceCan", 5);
            let plan = plan_steps(&[("can", "grasp"), ("bin 1", "place")]);
            let mut sim = Simulator::new("PickPlaceCan", 9).unwrap();
            let mut learner = fresh_learner(&sim, &cfg);
            let mut buffer = ReplayBuffer::new(cfg.learner.buffer_capacity);
            let mut env_step = 0u64;
            let mut rng = ChaCha8Rng::seed_from_u64(33);
            let mut records = Vec::new();
            for episode in 0..2 {
                sim.reset(100 + episode);
                records.push(run_psl_episode(
                    &mut sim,
                    &plan,
                    EpisodeMode::Train {
                        learner: &mut learner,
                        buffer: &mut buffer,
                        env_step: &mut env_step,
                    },
                    &cfg,
                    &mut rng,
                ));
            }
            (records, env_step, write_checkpoint(&learner, env_step))
        };
        let (rec_a, steps_a, ckpt_a) = run();
        let (rec_b, steps_b, ckpt_b) = run();
        assert!(steps_a > 0 && steps_a == steps_b);
        assert_eq!(rec_a, rec_b);
        assert_eq!(ckpt_a, ckpt_b, "trained weights must match bit for bit");
    }

    #[test]
    fn monolithic_episode_never_touches_sequencing_or_stage_checks() {
        let cfg = test_cfg("PickPlaceCan", 5);
        let mut sim = Simulator::new("PickPlaceCan", 3).unwrap();
        let spec = crate::sim::task_spec("PickPlaceCan").unwrap();
        let mut learner =
            Learner::new(Simulator::global_dim(&spec), cfg.learner.clone(), 7).unwrap();
        // A do-nothing policy: the episode must still run out its horizon.
        learner.force_constant_actor([0.0, 0.0, 0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);

        let seq_before = probe::sequence_calls();
        let term_before = probe::terminate_calls();
        // An odd horizon exercises the trailing partial action repeat.
        let rec = run_e2e_episode(
            &mut sim,
            7,
            EpisodeMode::Eval { learner: &learner },
            &cfg,
            &mut rng,
        );

        assert_eq!(probe::sequence_calls(), seq_before, "no sequencing in the baseline");
        assert_eq!(probe::terminate_calls(), term_before, "no stage checks in the baseline");
        assert!(rec.stages.is_empty());
        assert_eq!(rec.env_steps, 7, "horizon is exact even when odd");
        assert!(!rec.success);
    }

    #[test]
    fn unknown_region_is_recorded_as_a_fault_and_the_policy_still_acts() {
        let cfg = test_cfg("PickPlaceCan", 4);
        let mut sim = Simulator::new("PickPlaceCan", 3).unwrap();
        let learner = fresh_learner(&sim, &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(11);

        let rec = run_psl_episode(
            &mut sim,
            &plan_steps(&[("unicorn", "grasp")]),
            EpisodeMode::Eval { learner: &learner },
            &cfg,
            &mut rng,
        );

        let stage = &rec.stages[0];
        assert!(!stage.sequenced);
        assert!(stage.fault.is_some(), "missing region must be recorded");
        assert!(!stage.condition_met);
        assert_eq!(stage.steps_used, cfg.h_l, "the policy still gets its stage budget");
        assert_eq!(rec.env_steps, cfg.h_l);
    }
}
