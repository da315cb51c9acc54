use std::io::Write;

use crate::annealing::{AnnealingController, BatchEnergy, Cycle, SwitchEvent};
use crate::energy::{NoiseScale, TrainedEnergy, Weights};
use crate::error::Result;
use crate::maze::MazeWorld;
use crate::rl::{Agent, IterationStats, RewardWeights, RlConfig};
use crate::rng::RngKey;

#[derive(Debug, Clone, PartialEq)]
pub struct NearConfig {
    pub rl: RlConfig,
    pub alpha: f64,
    pub start_level: usize,
    /// When false the reward stays at `start_level` for the whole run.
    pub anneal: bool,
}

impl Default for NearConfig {
    /// Learned reward only: the maze supplies no task reward to imitate.
    fn default() -> Self {
        NearConfig {
            rl: RlConfig {
                weights: RewardWeights::learned_only(),
                ..RlConfig::default()
            },
            alpha: 0.1,
            start_level: 0,
            anneal: true,
        }
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainLogRow {
    pub stats: IterationStats,
    pub noise_level: f64,
}

pub fn write_train_log(rows: &[TrainLogRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "iter,env_steps,mean_raw_return,mean_transformed_return,noise_level,policy_loss,value_loss")?;
    for r in rows {
        let s = &r.stats;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.iter, s.env_steps, s.mean_raw_return, s.mean_transformed_return, r.noise_level, s.ppo.policy_loss, s.ppo.value_loss
        )?;
    }
    Ok(())
}

pub struct NearRun {
    pub agent: Agent,
    pub log: Vec<TrainLogRow>,
    pub events: Vec<SwitchEvent>,
    pub final_level: usize,
}

/// Policy optimization against the frozen energy: rewards use the EMA
/// weights at the controller's current noise level, and the controller
/// reviews progress after every policy update.
pub fn train_near(world: &MazeWorld, energy: &TrainedEnergy<f64>, config: &NearConfig, key: RngKey) -> Result<NearRun> {
    let mut agent = Agent::new(world.clone(), config.rl.clone(), key)?;
    let scale: &NoiseScale = &energy.scale;
    let mut ctrl = AnnealingController::starting_at(scale.clone(), config.alpha, config.start_level)?;
    let model = &energy.model;
    let mut log = Vec::new();
    let mut events = Vec::new();
    for _ in 0..config.rl.iterations() {
        let sigma = ctrl.current_sigma();
        let buffer = agent.collect()?;
        let features = buffer.features();
        let learned = model.conditional_energy_batch(features.view(), sigma, Weights::Ema)?;
        let stats = agent.learn(&buffer, learned.as_slice().expect("contiguous"))?;
        log.push(TrainLogRow { stats, noise_level: sigma });
        if config.anneal {
            ctrl.record_features(features.view())?;
            let cycle: Cycle = ctrl.end_cycle(model as &dyn BatchEnergy)?;
            events.extend(SwitchEvent::from_cycle(stats.iter, &cycle));
        }
    }
    Ok(NearRun {
        agent,
        log,
        events,
        final_level: ctrl.level(),
    })
}
