use std::path::{Path, PathBuf};

use ndarray::Array2;

use near_core::amp::{
    probe_perfect_discriminator, probe_prediction_variance, probe_smoothness, reward_grid, variance_presets, write_amp_log,
    write_grid_csv, write_perfect_disc_csv, write_smoothness_csv, write_variance_csv, disjoint_supports, AmpTrainer, EnergyAt,
    PointScorer, GRID_SIDE,
};
use near_core::annealing::write_events_csv;
use near_core::energy::{train_energy, write_loss_csv, ExpertDataset, TrainedEnergy};
use near_core::maze::{density_histogram, features, generate_expert, load_dataset, trajectories_from_transitions, write_dataset, MazeWorld};
use near_core::near::{evaluate, run_episode, train_near, write_metrics_csv, write_train_log, Controller};
use near_core::RngKey;

use crate::artifacts::{csv_bytes, disc_checkpoint, load_disc, load_policy, policy_checkpoint, RunDir};
use crate::config::{RewardMode, RunConfig};
use crate::error::CliError;

const STREAM_EXPERT: u64 = 1;
const STREAM_ENERGY: u64 = 2;
const STREAM_NEAR: u64 = 3;
const STREAM_AMP: u64 = 4;
const STREAM_EVAL: u64 = 5;
const STREAM_PROBE: u64 = 6;

/// Everything a command needs besides its own arguments.
pub struct Context {
    pub config: RunConfig,
    pub config_text: String,
    pub out: PathBuf,
}

impl Context {
    fn key(&self, stream: u64) -> RngKey {
        RngKey::new(self.config.seed).child(&[stream])
    }

    fn run_dir(&self, command: &str) -> Result<RunDir, CliError> {
        let mut run = RunDir::create(&self.out, command, self.config.seed, &self.config_text)?;
        let resolved = toml::to_string(&self.config).map_err(|e| CliError::Other(e.to_string()))?;
        run.write(&format!("{command}.resolved.toml"), resolved.as_bytes())?;
        Ok(run)
    }

    fn or_default(&self, path: &Option<PathBuf>, name: &str) -> PathBuf {
        path.clone().unwrap_or_else(|| self.out.join(name))
    }

    fn load_data(&self, run: &mut RunDir, path: &Path) -> Result<ExpertDataset<f64>, CliError> {
        run.add_input(path)?;
        Ok(load_dataset(path)?)
    }

    fn load_energy(&self, run: &mut RunDir, path: &Path) -> Result<TrainedEnergy<f64>, CliError> {
        run.add_input(path)?;
        Ok(TrainedEnergy::load(path)?)
    }
}

pub fn gen_expert(ctx: &Context) -> Result<(), CliError> {
    let mut run = ctx.run_dir("gen-expert")?;
    let world = ctx.config.world();
    let demos = generate_expert(&world, &ctx.config.expert_config(), &mut ctx.key(STREAM_EXPERT).rng())?;
    let data = demos.dataset()?;
    run.write("expert.csv", &csv_bytes(|o| write_dataset(&data, o))?)?;
    let world_text = toml::to_string(&ctx.config.world).map_err(|e| CliError::Other(e.to_string()))?;
    run.note("world_sha256", crate::artifacts::sha256_hex(world_text.as_bytes()));
    run.note("transitions", data.len());
    run.note("episodes", demos.trajectories.len());
    println!("wrote {} transitions from {} episodes", data.len(), demos.trajectories.len());
    run.finish()
}

pub fn train_energy_cmd(ctx: &Context, data: &Option<PathBuf>) -> Result<(), CliError> {
    let mut run = ctx.run_dir("train-energy")?;
    let data = ctx.load_data(&mut run, &ctx.or_default(data, "expert.csv"))?;
    let scale = ctx.config.noise_scale()?;
    let trained = train_energy(&data, &scale, &ctx.config.energy_config(), &mut ctx.key(STREAM_ENERGY).rng())?;
    run.write("energy.ckpt", &trained.to_checkpoint().to_bytes())?;
    run.write("energy_loss.csv", &csv_bytes(|o| write_loss_csv(&trained.log, o))?)?;
    if let (Some(first), Some(last)) = (trained.log.first(), trained.log.last()) {
        println!("dsm loss {:.6} -> {:.6}", first.loss, last.loss);
    }
    run.finish()
}

pub fn train_near_cmd(ctx: &Context, energy: &Option<PathBuf>) -> Result<(), CliError> {
    if ctx.config.reward.mode == RewardMode::Amp {
        return Err(CliError::Config("reward mode \"amp\" is trained with train-amp".into()));
    }
    let mut run = ctx.run_dir("train-near")?;
    let energy = ctx.load_energy(&mut run, &ctx.or_default(energy, "energy.ckpt"))?;
    let world = ctx.config.world();
    let near = train_near(&world, &energy, &ctx.config.near_config(), ctx.key(STREAM_NEAR))?;
    let agent = &near.agent;
    run.write("policy.ckpt", &policy_checkpoint(&agent.learner.policy, &agent.learner.value).to_bytes())?;
    run.write("train_log.csv", &csv_bytes(|o| write_train_log(&near.log, o))?)?;
    run.write("anneal_events.csv", &csv_bytes(|o| write_events_csv(&near.events, o))?)?;
    run.note("switch_events", near.events.len());
    run.note("final_level", near.final_level);
    println!("{} iterations, {} switch events, final level {}", near.log.len(), near.events.len(), near.final_level);
    run.finish()
}

/// Iteration counts after which the discriminator is snapshotted.
fn stage_iterations(total: usize) -> Vec<usize> {
    variance_presets().iter().map(|p| ((p.cutoff_fraction * total as f64).ceil() as usize).clamp(1, total)).collect()
}

pub fn train_amp_cmd(ctx: &Context, data: &Option<PathBuf>) -> Result<(), CliError> {
    let mut run = ctx.run_dir("train-amp")?;
    let data = ctx.load_data(&mut run, &ctx.or_default(data, "expert.csv"))?;
    let config = ctx.config.amp_config();
    let mut trainer = AmpTrainer::new(&ctx.config.world(), &data, &config, ctx.key(STREAM_AMP))?;
    let total = config.rl.iterations();
    let stages = stage_iterations(total);
    for i in 1..=total {
        trainer.iterate()?;
        if let Some(k) = stages.iter().position(|&s| s == i) {
            run.write(&format!("disc_stage{}.ckpt", k + 1), &disc_checkpoint(&trainer.disc).to_bytes())?;
        }
    }
    let agent = &trainer.agent;
    run.write("amp_policy.ckpt", &policy_checkpoint(&agent.learner.policy, &agent.learner.value).to_bytes())?;
    run.write("disc.ckpt", &disc_checkpoint(&trainer.disc).to_bytes())?;
    run.write("amp_log.csv", &csv_bytes(|o| write_amp_log(&trainer.log, o))?)?;
    if let Some(last) = trainer.log.last() {
        println!("{} iterations, final discriminator accuracy {:.3}", trainer.log.len(), last.disc_accuracy);
    }
    run.finish()
}

pub fn eval_cmd(ctx: &Context, policy: &Option<PathBuf>, data: &Option<PathBuf>, label: &Option<String>) -> Result<(), CliError> {
    let mut run = ctx.run_dir("eval")?;
    let data = ctx.load_data(&mut run, &ctx.or_default(data, "expert.csv"))?;
    let expert = trajectories_from_transitions(&data)?;
    let loaded = match policy {
        Some(p) => {
            run.add_input(p)?;
            Some(load_policy(p)?)
        }
        None => None,
    };
    let controller = match &loaded {
        Some(p) => Controller::Policy(p),
        None => Controller::Random,
    };
    let name = label.clone().unwrap_or_else(|| match policy {
        Some(p) => p.file_stem().map_or("policy".into(), |s| s.to_string_lossy().into_owned()),
        None => "random".into(),
    });
    let report = evaluate(&ctx.config.world(), &controller, &expert, &ctx.config.eval_config(), &mut ctx.key(STREAM_EVAL).rng())?;
    run.write("metrics.csv", &csv_bytes(|o| write_metrics_csv(&[(name.clone(), report)], o))?)?;
    let summary = format!("checkpoint,occupancy,goal_rate\n{name},{},{}\n", report.occupancy, report.goal_rate);
    run.write("eval_summary.csv", summary.as_bytes())?;
    println!(
        "{name}: avg_dtw {:.3} sal {:.4} (expert {:.4}) occupancy {:.3} goal_rate {:.3}",
        report.avg_dtw, report.sal_policy, report.sal_expert, report.occupancy, report.goal_rate
    );
    run.finish()
}

#[derive(Debug, Clone, clap::Subcommand)]
pub enum ProbeKind {
    /// Energy heatmap of transitions from a fixed state.
    EnergyGrid {
        #[arg(long)]
        energy: Option<PathBuf>,
    },
    /// Discriminator heatmaps, one per checkpoint (default: the three
    /// training stages written by train-amp).
    DiscGrid {
        #[arg(long)]
        disc: Vec<PathBuf>,
    },
    /// Retrains a fresh discriminator against frozen samples; without
    /// `--policy` it uses disjoint one-dimensional supports.
    PerfectDisc {
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Adversarial training to each cut-off, then reward statistics over
    /// rollouts of the frozen policy.
    Variance {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Model output against distance from the expert data.
    Smoothness {
        #[arg(long)]
        energy: Option<PathBuf>,
        #[arg(long, conflicts_with = "energy")]
        disc: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Histogram of expert next-state positions.
    Density {
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

fn grid_over_arena(ctx: &Context, model: &dyn PointScorer) -> Result<Vec<u8>, CliError> {
    let a = ctx.config.world().arena;
    let cells = reward_grid(model, ctx.config.probe.grid_state, [a.x[0], a.y[0]], [a.x[1], a.y[1]], GRID_SIDE)?;
    csv_bytes(|o| write_grid_csv(&cells, o))
}

fn policy_transitions(world: &MazeWorld, ctx: &Context, policy: &near_core::rl::GaussianPolicy) -> Result<Array2<f64>, CliError> {
    let mut rng = ctx.key(STREAM_PROBE).stream(&[1]);
    let mut rows = Vec::new();
    for _ in 0..ctx.config.eval.episodes {
        let ep = run_episode(world, &Controller::Policy(policy), ctx.config.eval.horizon, &mut rng)?;
        for w in ep.positions.windows(2) {
            rows.extend(features(w[0], w[1]));
        }
    }
    Ok(Array2::from_shape_vec((rows.len() / 4, 4), rows).expect("four features"))
}

pub fn probe_cmd(ctx: &Context, kind: &ProbeKind) -> Result<(), CliError> {
    let mut run = ctx.run_dir("probe")?;
    let p = &ctx.config.probe;
    match kind {
        ProbeKind::EnergyGrid { energy } => {
            let energy = ctx.load_energy(&mut run, &ctx.or_default(energy, "energy.ckpt"))?;
            let model = EnergyAt { model: &energy.model, sigma: p.grid_sigma };
            run.write("energy_grid.csv", &grid_over_arena(ctx, &model)?)?;
        }
        ProbeKind::DiscGrid { disc } => {
            let paths: Vec<PathBuf> = if disc.is_empty() {
                (1..=3).map(|k| ctx.out.join(format!("disc_stage{k}.ckpt"))).collect()
            } else {
                disc.clone()
            };
            for path in &paths {
                run.add_input(path)?;
                let d = load_disc(path)?;
                let stem = path.file_stem().map_or("disc".into(), |s| s.to_string_lossy().into_owned());
                run.write(&format!("disc_grid_{stem}.csv"), &grid_over_arena(ctx, &d)?)?;
            }
        }
        ProbeKind::PerfectDisc { policy, data } => {
            let mut rng = ctx.key(STREAM_PROBE).stream(&[2]);
            let (expert, generated) = match policy {
                None => disjoint_supports(p.perfect_samples, &mut rng),
                Some(path) => {
                    let data = ctx.load_data(&mut run, &ctx.or_default(data, "expert.csv"))?;
                    run.add_input(path)?;
                    let pol = load_policy(path)?;
                    (data.features().to_owned(), policy_transitions(&ctx.config.world(), ctx, &pol)?)
                }
            };
            let rows = probe_perfect_discriminator(expert.view(), generated.view(), &ctx.config.perfect_disc_config(), &mut rng)?;
            run.write("perfect_disc.csv", &csv_bytes(|o| write_perfect_disc_csv(&rows, o))?)?;
        }
        ProbeKind::Variance { data } => {
            let data = ctx.load_data(&mut run, &ctx.or_default(data, "expert.csv"))?;
            let config = ctx.config.amp_config();
            let mut trainer = AmpTrainer::new(&ctx.config.world(), &data, &config, ctx.key(STREAM_AMP))?;
            let total = config.rl.iterations();
            let stages = stage_iterations(total);
            for (k, &stage) in stages.iter().enumerate() {
                while trainer.agent.iteration() < stage {
                    trainer.iterate()?;
                }
                let mut frozen = trainer.clone();
                let rows = probe_prediction_variance(&mut frozen, p.variance_rollouts, p.variance_continue_disc, ctx.key(STREAM_PROBE).child(&[3, k as u64]))?;
                let pct = (variance_presets()[k].cutoff_fraction * 100.0).round();
                run.write(&format!("variance_{pct}.csv"), &csv_bytes(|o| write_variance_csv(&rows, o))?)?;
            }
        }
        ProbeKind::Smoothness { energy, disc, data } => {
            let data = ctx.load_data(&mut run, &ctx.or_default(data, "expert.csv"))?;
            let mut rng = ctx.key(STREAM_PROBE).stream(&[4]);
            if let Some(path) = disc {
                run.add_input(path)?;
                let d = load_disc(path)?;
                let rows = probe_smoothness(&d, data.features(), &p.radii, &mut rng)?;
                run.write("smoothness_disc.csv", &csv_bytes(|o| write_smoothness_csv(&rows, o))?)?;
            } else {
                let energy = ctx.load_energy(&mut run, &ctx.or_default(energy, "energy.ckpt"))?;
                for &sigma in &p.smoothness_sigmas {
                    let model = EnergyAt { model: &energy.model, sigma };
                    let rows = probe_smoothness(&model, data.features(), &p.radii, &mut rng)?;
                    run.write(&format!("smoothness_sigma{sigma}.csv"), &csv_bytes(|o| write_smoothness_csv(&rows, o))?)?;
                }
            }
        }
        ProbeKind::Density { data } => {
            let data = ctx.load_data(&mut run, &ctx.or_default(data, "expert.csv"))?;
            let cells = density_histogram(&data, ctx.config.world().arena, p.density_bins)?;
            let mut text = String::from("x,y,count\n");
            for c in &cells {
                text.push_str(&format!("{},{},{}\n", c.x, c.y, c.count));
            }
            run.write("density.csv", text.as_bytes())?;
        }
    }
    run.finish()
}

/// Converts a lattice CSV (`x,y,value`, row-major over `y` then `x`) to a
/// binary graymap with `y` increasing upwards.
pub fn grid_to_pgm(csv_text: &str) -> Result<Vec<u8>, CliError> {
    let bad = |line: usize, msg: &str| CliError::Other(format!("grid csv line {line}: {msg}"));
    let mut values = Vec::new();
    for (i, line) in csv_text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let field = line.split(',').nth(2).ok_or_else(|| bad(i + 1, "expected three columns"))?;
        let v: f64 = field.trim().parse().map_err(|_| bad(i + 1, "value is not a number"))?;
        values.push(v);
    }
    let side = (values.len() as f64).sqrt().round() as usize;
    if side == 0 || side * side != values.len() {
        return Err(CliError::Other(format!("grid csv holds {} values, not a square lattice", values.len())));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
    for row in (0..side).rev() {
        for col in 0..side {
            let v = values[row * side + col];
            let g = if v.is_finite() { ((v - lo) / span * 255.0).round() as u8 } else { 0 };
            out.push(g);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_flips_rows_and_scales() {
        let csv = "x,y,mean_reward\n0,0,0\n1,0,1\n0,1,2\n1,1,4\n";
        let pgm = grid_to_pgm(csv).unwrap();
        let header = b"P5\n2 2\n255\n";
        assert_eq!(&pgm[..header.len()], header);
        assert_eq!(&pgm[header.len()..], &[128, 255, 0, 64]);
        assert!(grid_to_pgm("x,y,v\n0,0,1\n1,0,2\n").is_err());
        assert!(grid_to_pgm("x,y,v\n0,0,abc\n").is_err());
    }

    #[test]
    fn stages_cover_the_run() {
        assert_eq!(stage_iterations(10), vec![2, 5, 10]);
        assert_eq!(stage_iterations(1), vec![1, 1, 1]);
    }
}
