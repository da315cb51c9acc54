//! Run configuration: a TOML file whose every key is optional and whose
//! unknown keys are rejected.

use serde::{Deserialize, Serialize};

use near_core::amp::{AmpConfig, DiscCoeffs, PerfectDiscConfig};
use near_core::diffcore::AdamConfig;
use near_core::energy::{DsmWeighting, EnergyArch, EnergyTrainConfig, LevelSampling, NoiseScale};
use near_core::maze::{ExpertConfig, MazeWorld, Rect};
use near_core::metrics::SparcParams;
use near_core::near::{EvalConfig, NearConfig};
use near_core::rl::{PpoConfig, RewardWeights, RlConfig};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct RunConfig {
    pub seed: u64,
    pub world: WorldSection,
    pub expert: ExpertSection,
    pub energy: EnergySection,
    pub rl: RlSection,
    pub annealing: AnnealingSection,
    pub reward: RewardSection,
    pub amp: AmpSection,
    pub eval: EvalSection,
    pub probe: ProbeSection,
}


/// Rectangles are written `[x0, x1, y0, y1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldSection {
    pub arena: [f64; 4],
    pub vertical_leg: [f64; 4],
    pub horizontal_leg: [f64; 4],
    pub start: [f64; 4],
    pub goal: [f64; 2],
    pub goal_threshold: f64,
    pub max_speed: f64,
    pub horizon: usize,
}

fn rect_array(r: &Rect) -> [f64; 4] {
    [r.x[0], r.x[1], r.y[0], r.y[1]]
}

fn rect(a: [f64; 4]) -> Rect {
    Rect::new(a[0], a[1], a[2], a[3])
}

impl Default for WorldSection {
    fn default() -> Self {
        let w = MazeWorld::default();
        WorldSection {
            arena: rect_array(&w.arena),
            vertical_leg: rect_array(&w.corridor[0]),
            horizontal_leg: rect_array(&w.corridor[1]),
            start: rect_array(&w.start),
            goal: w.goal,
            goal_threshold: w.goal_threshold,
            max_speed: w.max_speed,
            horizon: w.horizon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpertSection {
    pub episodes: usize,
    pub noise_std: f64,
    pub waypoints: Vec<[f64; 2]>,
}

impl Default for ExpertSection {
    fn default() -> Self {
        let e = ExpertConfig::default();
        ExpertSection { episodes: e.episodes, noise_std: e.noise_std, waypoints: e.waypoints }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    Unweighted,
    SigmaSquared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergySection {
    pub encoder: Vec<usize>,
    pub latent: usize,
    pub decoder: Vec<usize>,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub levels: usize,
    pub iterations: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub ema_decay: f64,
    pub log_every: usize,
    pub weighting: Weighting,
}

impl Default for EnergySection {
    fn default() -> Self {
        let c = EnergyTrainConfig::default();
        EnergySection {
            encoder: c.arch.encoder,
            latent: c.arch.latent,
            decoder: c.arch.decoder,
            sigma_max: 20.0,
            sigma_min: 0.01,
            levels: 50,
            iterations: c.iterations,
            lr: c.adam.lr,
            batch_size: c.batch_size,
            ema_decay: c.ema_decay,
            log_every: c.log_every,
            weighting: Weighting::Unweighted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RlSection {
    pub num_envs: usize,
    pub horizon: usize,
    pub env_steps: usize,
    pub policy_hidden: Vec<usize>,
    pub value_hidden: Vec<usize>,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub td_lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub lr: f64,
    pub normalize_advantages: bool,
}

impl Default for RlSection {
    fn default() -> Self {
        let c = RlConfig::default();
        RlSection {
            num_envs: c.num_envs,
            horizon: c.horizon,
            env_steps: c.env_steps,
            policy_hidden: c.policy_hidden,
            value_hidden: c.value_hidden,
            gamma: c.ppo.gamma,
            gae_lambda: c.ppo.gae_lambda,
            td_lambda: c.ppo.td_lambda,
            clip: c.ppo.clip,
            epochs: c.ppo.epochs,
            minibatch: c.ppo.minibatch,
            lr: c.ppo.lr,
            normalize_advantages: c.ppo.normalize_advantages,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnealingSection {
    pub enabled: bool,
    pub alpha: f64,
    pub start_level: usize,
}

impl Default for AnnealingSection {
    fn default() -> Self {
        let c = NearConfig::default();
        AnnealingSection { enabled: c.anneal, alpha: c.alpha, start_level: c.start_level }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardMode {
    /// Learned reward only.
    EnergyOnly,
    /// Weighted sum of task and learned rewards.
    Composed,
    /// Discriminator reward; only `train-amp` accepts it.
    Amp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardSection {
    pub mode: RewardMode,
    pub task_weight: f64,
    pub learned_weight: f64,
}

impl Default for RewardSection {
    fn default() -> Self {
        let w = RewardWeights::default();
        RewardSection { mode: RewardMode::EnergyOnly, task_weight: w.task, learned_weight: w.learned }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmpSection {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    pub steps_per_iter: usize,
    pub loss_coeff: f64,
    pub grad_penalty: f64,
    pub output_reg: f64,
    pub replay_capacity: usize,
    pub demo_capacity: usize,
}

impl Default for AmpSection {
    fn default() -> Self {
        let c = AmpConfig::default();
        AmpSection {
            hidden: c.disc_hidden,
            lr: c.disc_adam.lr,
            batch_size: c.disc_batch,
            steps_per_iter: c.disc_steps,
            loss_coeff: c.coeffs.loss,
            grad_penalty: c.coeffs.grad_penalty,
            output_reg: c.coeffs.output_reg,
            replay_capacity: c.replay_capacity,
            demo_capacity: c.demo_capacity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub episodes: usize,
    pub top_k: usize,
    pub horizon: usize,
    pub dt: f64,
    pub sparc_pad_level: u32,
    pub sparc_max_cutoff: f64,
    pub sparc_amplitude_threshold: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        let c = EvalConfig::default();
        EvalSection {
            episodes: c.episodes,
            top_k: c.top_k,
            horizon: c.horizon,
            dt: c.dt,
            sparc_pad_level: c.sparc.pad_level,
            sparc_max_cutoff: c.sparc.max_cutoff,
            sparc_amplitude_threshold: c.sparc.amplitude_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    /// Noise level of the energy heatmap.
    pub grid_sigma: f64,
    /// Fixed state whose outgoing transitions the heatmaps score.
    pub grid_state: [f64; 2],
    pub radii: Vec<f64>,
    /// Noise levels used by the energy smoothness probe.
    pub smoothness_sigmas: Vec<f64>,
    pub perfect_iterations: usize,
    pub perfect_hidden: Vec<usize>,
    pub perfect_lr: f64,
    pub perfect_batch: usize,
    pub perfect_samples: usize,
    pub variance_rollouts: usize,
    pub variance_continue_disc: bool,
    pub density_bins: usize,
}

impl Default for ProbeSection {
    fn default() -> Self {
        let p = PerfectDiscConfig::default();
        ProbeSection {
            grid_sigma: 20.0,
            grid_state: [1.5, 5.0],
            radii: vec![0.0, 0.5, 1.0, 2.0, 4.0],
            smoothness_sigmas: vec![20.0, 1.0, 0.1],
            perfect_iterations: p.iterations,
            perfect_hidden: p.hidden,
            perfect_lr: p.adam.lr,
            perfect_batch: p.batch_size,
            perfect_samples: 256,
            variance_rollouts: 20,
            variance_continue_disc: true,
            density_bins: 50,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Builds every derived core config once so that bad values surface
    /// before any work starts.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |e: near_core::Error| CliError::Config(e.to_string());
        self.world().validate().map_err(bad)?;
        self.noise_scale().map_err(bad)?;
        self.rl_config().validate().map_err(bad)?;
        self.amp_config().validate().map_err(bad)?;
        self.reward_weights().validate().map_err(bad)?;
        let e = &self.energy;
        if e.iterations == 0 || e.batch_size == 0 || !(e.lr > 0.0) || !(0.0..1.0).contains(&e.ema_decay) {
            return Err(CliError::Config("energy: iterations, batch_size and lr must be positive, ema_decay in [0, 1)".into()));
        }
        if self.annealing.start_level >= e.levels || !(self.annealing.alpha >= 0.0) {
            return Err(CliError::Config("annealing: start_level must index the noise scale and alpha be non-negative".into()));
        }
        let ev = &self.eval;
        if ev.episodes == 0 || ev.top_k == 0 || ev.horizon == 0 || !(ev.dt > 0.0) {
            return Err(CliError::Config("eval: episodes, top_k, horizon and dt must be positive".into()));
        }
        let p = &self.probe;
        if !(p.grid_sigma > 0.0) || p.smoothness_sigmas.iter().any(|s| !(*s > 0.0)) || p.radii.iter().any(|r| !(*r >= 0.0)) {
            return Err(CliError::Config("probe: sigmas must be positive and radii non-negative".into()));
        }
        if p.perfect_samples == 0 || p.perfect_batch == 0 || p.density_bins == 0 {
            return Err(CliError::Config("probe: sample, batch and bin counts must be positive".into()));
        }
        if self.expert.episodes == 0 || self.expert.waypoints.is_empty() {
            return Err(CliError::Config("expert: need at least one episode and waypoint".into()));
        }
        Ok(())
    }

    pub fn world(&self) -> MazeWorld {
        let w = &self.world;
        MazeWorld {
            arena: rect(w.arena),
            corridor: [rect(w.vertical_leg), rect(w.horizontal_leg)],
            start: rect(w.start),
            goal: w.goal,
            goal_threshold: w.goal_threshold,
            max_speed: w.max_speed,
            horizon: w.horizon,
        }
    }

    pub fn expert_config(&self) -> ExpertConfig {
        let e = &self.expert;
        ExpertConfig { episodes: e.episodes, noise_std: e.noise_std, waypoints: e.waypoints.clone() }
    }

    pub fn noise_scale(&self) -> near_core::Result<NoiseScale> {
        NoiseScale::geometric(self.energy.sigma_max, self.energy.sigma_min, self.energy.levels)
    }

    pub fn energy_config(&self) -> EnergyTrainConfig {
        let e = &self.energy;
        EnergyTrainConfig {
            arch: EnergyArch { encoder: e.encoder.clone(), latent: e.latent, decoder: e.decoder.clone() },
            iterations: e.iterations,
            batch_size: e.batch_size,
            adam: AdamConfig::with_lr(e.lr),
            ema_decay: e.ema_decay,
            log_every: e.log_every,
            levels: LevelSampling::Uniform,
            weighting: match e.weighting {
                Weighting::Unweighted => DsmWeighting::Unweighted,
                Weighting::SigmaSquared => DsmWeighting::SigmaSquared,
            },
        }
    }

    pub fn reward_weights(&self) -> RewardWeights {
        match self.reward.mode {
            RewardMode::Composed => RewardWeights { task: self.reward.task_weight, learned: self.reward.learned_weight },
            RewardMode::EnergyOnly | RewardMode::Amp => RewardWeights::learned_only(),
        }
    }

    pub fn rl_config(&self) -> RlConfig {
        let r = &self.rl;
        RlConfig {
            num_envs: r.num_envs,
            horizon: r.horizon,
            policy_hidden: r.policy_hidden.clone(),
            value_hidden: r.value_hidden.clone(),
            ppo: PpoConfig {
                gamma: r.gamma,
                gae_lambda: r.gae_lambda,
                td_lambda: r.td_lambda,
                clip: r.clip,
                epochs: r.epochs,
                minibatch: r.minibatch,
                lr: r.lr,
                normalize_advantages: r.normalize_advantages,
            },
            weights: self.reward_weights(),
            env_steps: r.env_steps,
        }
    }

    pub fn near_config(&self) -> NearConfig {
        NearConfig {
            rl: self.rl_config(),
            alpha: self.annealing.alpha,
            start_level: self.annealing.start_level,
            anneal: self.annealing.enabled,
        }
    }

    pub fn amp_config(&self) -> AmpConfig {
        let a = &self.amp;
        AmpConfig {
            rl: self.rl_config(),
            disc_hidden: a.hidden.clone(),
            coeffs: DiscCoeffs { loss: a.loss_coeff, grad_penalty: a.grad_penalty, output_reg: a.output_reg },
            disc_adam: AdamConfig::with_lr(a.lr),
            disc_batch: a.batch_size,
            disc_steps: a.steps_per_iter,
            replay_capacity: a.replay_capacity,
            demo_capacity: a.demo_capacity,
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        let e = &self.eval;
        EvalConfig {
            episodes: e.episodes,
            top_k: e.top_k,
            horizon: e.horizon,
            dt: e.dt,
            sparc: SparcParams {
                pad_level: e.sparc_pad_level,
                max_cutoff: e.sparc_max_cutoff,
                amplitude_threshold: e.sparc_amplitude_threshold,
            },
        }
    }

    pub fn perfect_disc_config(&self) -> PerfectDiscConfig {
        let p = &self.probe;
        PerfectDiscConfig {
            iterations: p.perfect_iterations,
            hidden: p.perfect_hidden.clone(),
            coeffs: DiscCoeffs::bce_only(),
            adam: AdamConfig::with_lr(p.perfect_lr),
            batch_size: p.perfect_batch,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.rl.gamma, 0.99);
        assert_eq!(c.rl.lr, 5e-5);
        assert_eq!(c.energy.lr, 1e-5);
        assert_eq!(c.energy.sigma_max, 20.0);
        assert_eq!(c.amp.grad_penalty, 5.0);
        assert_eq!(c.world(), MazeWorld::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml("sed = 3\n"), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::from_toml("[rl]\nlearning_rate = 1.0\n"), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::from_toml("[nope]\n"), Err(CliError::Config(_))));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::from_toml("[rl]\nclip = -1.0\n").is_err());
        assert!(RunConfig::from_toml("[energy]\nsigma_min = 30.0\n").is_err());
        assert!(RunConfig::from_toml("[annealing]\nstart_level = 50\n").is_err());
        assert!(RunConfig::from_toml("[reward]\nmode = \"gail\"\n").is_err());
    }

    #[test]
    fn overrides_reach_core_configs() {
        let c = RunConfig::from_toml("seed = 4\n[rl]\nlr = 3e-4\n[energy]\nweighting = \"sigma-squared\"\n[reward]\nmode = \"composed\"\n").unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.rl_config().ppo.lr, 3e-4);
        assert_eq!(c.energy_config().weighting, DsmWeighting::SigmaSquared);
        assert_eq!(c.rl_config().weights, RewardWeights::default());
        assert_eq!(RunConfig::default().rl_config().weights, RewardWeights::learned_only());
    }

    #[test]
    fn roundtrips_through_toml() {
        let c = RunConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn shipped_profile_parses() {
        let text = include_str!("../../../configs/maze.toml");
        let c = RunConfig::from_toml(text).unwrap();
        assert_eq!(c.rl.num_envs, 64);
        assert_eq!(c.rl.horizon, 16);
        assert!(c.rl.env_steps <= 300_000);
    }
}
