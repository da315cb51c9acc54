use approx::assert_abs_diff_eq;
use ndarray::{arr1, arr2, Array1, Array2, ArrayView2};
use proptest::prelude::*;

use super::*;
use crate::diffcore::{Activation, AdamConfig, Dense, DenseNetwork};
use crate::energy::ExpertDataset;
use crate::maze::MazeWorld;
use crate::rl::RlConfig;
use crate::RngKey;

fn tanh_disc(coeffs: DiscCoeffs, seed: u64) -> Discriminator {
    let net = DenseNetwork::mlp(&[2, 6, 5, 1], Activation::Tanh, Activation::Identity, &mut RngKey::new(seed).rng()).unwrap();
    Discriminator::from_net(net, coeffs).unwrap()
}

fn linear_disc(w: f64, b: f64, coeffs: DiscCoeffs) -> Discriminator {
    let layer = Dense::new(arr2(&[[w]]), arr1(&[b]), Activation::Identity).unwrap();
    Discriminator::from_net(DenseNetwork::new(vec![layer]).unwrap(), coeffs).unwrap()
}

fn random_rows(n: usize, d: usize, seed: u64) -> Array2<f64> {
    use rand::Rng as _;
    let mut rng = RngKey::new(seed).rng();
    Array2::from_shape_fn((n, d), |_| rng.random_range(-1.5..1.5))
}

#[test]
fn zero_logits_give_two_log_two() {
    let disc = Discriminator::new(3, &[8], DiscCoeffs::bce_only(), &mut RngKey::new(0).rng()).unwrap();
    let x = random_rows(5, 3, 1);
    let y = random_rows(7, 3, 2);
    assert!(disc.logits(x.view()).unwrap().iter().all(|&l| l == 0.0));
    let (parts, _) = disc_loss(&disc, x.view(), y.view()).unwrap();
    assert_abs_diff_eq!(parts.bce, 2.0 * 2f64.ln(), epsilon = 1e-12);
    assert_abs_diff_eq!(parts.total(&disc.coeffs), 1.3863, epsilon = 1e-4);
}

#[test]
fn bce_coefficient_scales_only_the_cross_entropy() {
    let coeffs = DiscCoeffs { loss: 5.0, grad_penalty: 0.0, output_reg: 0.0 };
    let disc = Discriminator::new(2, &[4], coeffs, &mut RngKey::new(0).rng()).unwrap();
    let x = random_rows(4, 2, 3);
    let (parts, _) = disc_loss(&disc, x.view(), x.view()).unwrap();
    assert_abs_diff_eq!(parts.total(&coeffs), 5.0 * 2.0 * 2f64.ln(), epsilon = 1e-12);
}

#[test]
fn separated_logits_drive_bce_to_zero() {
    let disc = linear_disc(-1000.0, 0.0, DiscCoeffs::bce_only());
    let expert = arr2(&[[-1.0], [-0.9]]);
    let policy = arr2(&[[1.0], [0.9]]);
    let (parts, _) = disc_loss(&disc, expert.view(), policy.view()).unwrap();
    assert!(parts.bce < 1e-100);
    assert_eq!(accuracy(&disc, expert.view(), policy.view()).unwrap(), 1.0);
}

#[test]
fn constant_discriminator_has_no_gradient_penalty() {
    let coeffs = DiscCoeffs { loss: 1.0, grad_penalty: 5.0, output_reg: 0.0 };
    let disc = linear_disc(0.0, 0.7, coeffs);
    let x = random_rows(6, 1, 4);
    let (parts, _) = disc_loss(&disc, x.view(), x.view()).unwrap();
    assert_eq!(parts.grad_penalty, 0.0);
    // A slope of 2 gives penalty 5 * 4.
    let sloped = linear_disc(2.0, 0.0, coeffs);
    let (parts, _) = disc_loss(&sloped, x.view(), x.view()).unwrap();
    assert_abs_diff_eq!(parts.grad_penalty, 20.0, epsilon = 1e-12);
}

#[test]
fn output_regularizer_averages_over_both_batches() {
    let coeffs = DiscCoeffs { loss: 1.0, grad_penalty: 0.0, output_reg: 0.05 };
    let disc = linear_disc(0.0, 2.0, coeffs);
    let (parts, _) = disc_loss(&disc, random_rows(3, 1, 5).view(), random_rows(9, 1, 6).view()).unwrap();
    assert_abs_diff_eq!(parts.output_reg, 0.05 * 4.0, epsilon = 1e-12);
}

#[test]
fn symmetric_batches_cancel_at_zero_logit() {
    let disc = Discriminator::new(2, &[6], DiscCoeffs::bce_only(), &mut RngKey::new(9).rng()).unwrap();
    let x = random_rows(10, 2, 7);
    let (_, grads) = disc_loss(&disc, x.view(), x.view()).unwrap();
    assert!(grads.flatten().iter().all(|g| g.abs() < 1e-15));
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let coeffs = DiscCoeffs { loss: 5.0, grad_penalty: 5.0, output_reg: 0.05 };
    for seed in 0..5 {
        let disc = tanh_disc(coeffs, seed);
        let expert = random_rows(6, 2, 100 + seed);
        let policy = random_rows(5, 2, 200 + seed);
        let (_, grads) = disc_loss(&disc, expert.view(), policy.view()).unwrap();
        let analytic = grads.flatten();
        let base = disc.net.params();
        let h = 1e-6;
        for i in 0..base.len() {
            let eval = |delta: f64| {
                let mut d = disc.clone();
                let mut p = base.clone();
                p[i] += delta;
                d.net.set_params(&p).unwrap();
                disc_loss(&d, expert.view(), policy.view()).unwrap().0.total(&coeffs)
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let err = (fd - analytic[i]).abs() / fd.abs().max(analytic[i].abs()).max(1e-3);
            assert!(err < 1e-4, "seed {seed} param {i}: fd {fd} analytic {}", analytic[i]);
        }
    }
}

#[test]
fn empty_batches_are_rejected() {
    let disc = linear_disc(1.0, 0.0, DiscCoeffs::default());
    let empty = Array2::<f64>::zeros((0, 1));
    let one = arr2(&[[0.5]]);
    assert!(disc_loss(&disc, empty.view(), one.view()).is_err());
    assert!(disc_loss(&disc, one.view(), empty.view()).is_err());
}

#[test]
fn reward_anchors() {
    assert_abs_diff_eq!(disc_reward(0.0), std::f64::consts::LN_2, epsilon = 1e-12);
    assert!(disc_reward(-60.0) < 1e-20);
    assert_abs_diff_eq!(disc_reward(60.0), 9.2103, epsilon = 1e-4);
    assert_abs_diff_eq!(disc_reward(1e6), -REWARD_FLOOR.ln(), epsilon = 1e-12);
    assert!(disc_reward(1.0) > disc_reward(0.5));
}

#[test]
fn invalid_coefficients_are_rejected() {
    let net = DenseNetwork::mlp(&[1, 1], Activation::Identity, Activation::Identity, &mut RngKey::new(0).rng()).unwrap();
    let bad = DiscCoeffs { loss: 1.0, grad_penalty: -1.0, output_reg: 0.0 };
    assert!(Discriminator::from_net(net.clone(), bad).is_err());
    let wide = DenseNetwork::mlp(&[1, 2], Activation::Identity, Activation::Identity, &mut RngKey::new(0).rng()).unwrap();
    assert!(Discriminator::from_net(wide, DiscCoeffs::default()).is_err());
}

proptest! {
    #[test]
    fn loss_is_non_negative(seed in 0u64..500, nd in 1usize..6, ng in 1usize..6) {
        let disc = tanh_disc(DiscCoeffs::default(), seed);
        let (parts, _) = disc_loss(&disc, random_rows(nd, 2, seed + 1).view(), random_rows(ng, 2, seed + 2).view()).unwrap();
        prop_assert!(parts.total(&disc.coeffs) >= 0.0);
        prop_assert!(parts.bce >= 0.0 && parts.grad_penalty >= 0.0 && parts.output_reg >= 0.0);
    }

    #[test]
    fn reward_is_bounded_and_monotone(a in -40.0f64..40.0, b in -40.0f64..40.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(disc_reward(lo) <= disc_reward(hi));
        prop_assert!(disc_reward(hi) >= 0.0 && disc_reward(hi) <= -REWARD_FLOOR.ln() + 1e-12);
    }
}

#[test]
fn disjoint_supports_become_perfectly_separated() {
    let mut rng = RngKey::new(11).rng();
    let (expert, policy) = disjoint_supports(256, &mut rng);
    let rows = probe_perfect_discriminator(expert.view(), policy.view(), &PerfectDiscConfig::default(), &mut rng).unwrap();
    assert_eq!(rows.len(), PerfectDiscConfig::default().iterations + 1);
    assert!(first_perfect_iteration(&rows).unwrap() <= 200);
    assert!(grad_norm_decay(&rows) >= 10.0, "decay {}", grad_norm_decay(&rows));
    assert!(rows.last().unwrap().bce < rows[0].bce);
}

#[test]
fn identical_supports_stay_near_chance() {
    let mut rng = RngKey::new(12).rng();
    let (expert, _) = disjoint_supports(256, &mut rng);
    let config = PerfectDiscConfig { iterations: 100, ..PerfectDiscConfig::default() };
    let rows = probe_perfect_discriminator(expert.view(), expert.view(), &config, &mut rng).unwrap();
    assert!(rows.iter().all(|r| (r.accuracy - 0.5).abs() <= 0.1));
}

#[test]
fn perfect_probe_csv_header() {
    let rows = [PerfectDiscRow { iter: 0, accuracy: 0.5, bce: 1.0, grad_norm: 0.25 }];
    let mut out = Vec::new();
    write_perfect_disc_csv(&rows, &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), "iter,accuracy,bce,grad_norm\n0,0.5,1,0.25\n");
}

#[test]
fn smoothness_probe_semantics() {
    let data = random_rows(50, 4, 13);
    let constant = |x: ArrayView2<f64>| Array1::from_elem(x.nrows(), 3.0);
    let rows = probe_smoothness(&constant, data.view(), &[0.0, 1.0, 4.0], &mut RngKey::new(0).rng()).unwrap();
    assert!(rows.iter().all(|r| r.std_pred == 0.0 && r.mean_pred == 3.0));

    let first = |x: ArrayView2<f64>| x.column(0).to_owned();
    let rows = probe_smoothness(&first, data.view(), &[0.0], &mut RngKey::new(0).rng()).unwrap();
    assert_abs_diff_eq!(rows[0].mean_pred, data.column(0).mean().unwrap(), epsilon = 1e-12);

    let bowl = |x: ArrayView2<f64>| x.map_axis(ndarray::Axis(1), |r| -r.dot(&r));
    let radii = [0.0, 0.5, 1.0, 2.0, 4.0];
    let rows = probe_smoothness(&bowl, data.view(), &radii, &mut RngKey::new(0).rng()).unwrap();
    assert!(rows.windows(2).all(|w| w[1].mean_pred < w[0].mean_pred));
    assert!(probe_smoothness(&bowl, data.view(), &[-1.0], &mut RngKey::new(0).rng()).is_err());
}

#[test]
fn grid_spans_lattice() {
    let next_x = |x: ArrayView2<f64>| x.column(2).to_owned();
    let cells = reward_grid(&next_x, [1.0, 2.0], [0.0, 0.0], [10.0, 5.0], GRID_SIDE).unwrap();
    assert_eq!(cells.len(), GRID_SIDE * GRID_SIDE);
    assert_eq!((cells[0].x, cells[0].y), (0.0, 0.0));
    let last = cells.last().unwrap();
    assert_abs_diff_eq!(last.x, 10.0, epsilon = 1e-12);
    assert_abs_diff_eq!(last.y, 5.0, epsilon = 1e-12);
    assert!(cells.iter().all(|c| c.mean_reward == c.x));
    assert_abs_diff_eq!(cells[GRID_SIDE].y, 5.0 / 99.0, epsilon = 1e-12);
    let mut out = Vec::new();
    write_grid_csv(&cells[..1], &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), "x,y,mean_reward\n0,0,0\n");
}

#[test]
fn replay_buffer_overwrites_oldest() {
    let mut buf = ReplayBuffer::new(1, 3).unwrap();
    assert!(buf.sample(1, &mut RngKey::new(0).rng()).is_err());
    buf.push_rows(arr2(&[[1.0], [2.0], [3.0], [4.0]]).view()).unwrap();
    assert_eq!(buf.len(), 3);
    let s = buf.sample(200, &mut RngKey::new(0).rng()).unwrap();
    assert!(s.iter().all(|&v| v == 2.0 || v == 3.0 || v == 4.0));
    assert!(s.iter().any(|&v| v == 4.0));
    assert!(buf.push_rows(arr2(&[[1.0, 2.0]]).view()).is_err());
}

fn tiny_amp(disc_steps: usize) -> AmpConfig {
    AmpConfig {
        rl: RlConfig { num_envs: 4, horizon: 8, policy_hidden: vec![16], value_hidden: vec![16], env_steps: 32 * 5, ..AmpConfig::default().rl },
        disc_hidden: vec![16],
        disc_batch: 16,
        disc_steps,
        ..AmpConfig::default()
    }
}

fn tiny_dataset() -> ExpertDataset<f64> {
    ExpertDataset::new(arr2(&[[1.5, 9.0, 1.5, 8.5], [1.5, 8.5, 1.5, 8.0], [1.5, 2.0, 1.5, 1.5], [2.0, 1.5, 2.5, 1.5]])).unwrap()
}

#[test]
fn training_logs_one_row_per_iteration() {
    let config = tiny_amp(2);
    let t = train_amp(&MazeWorld::default(), &tiny_dataset(), &config, RngKey::new(3)).unwrap();
    assert_eq!(t.log.len(), config.rl.iterations());
    assert!(t.log.iter().all(|r| r.disc_accuracy.is_finite() && r.mean_pred > 0.0 && r.mean_pred < 1.0));
    let again = train_amp(&MazeWorld::default(), &tiny_dataset(), &config, RngKey::new(3)).unwrap();
    assert_eq!(t.log, again.log);
    let mut out = Vec::new();
    write_amp_log(&t.log, &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), t.log.len() + 1);
}

#[test]
fn no_discriminator_steps_gives_constant_reward() {
    let t = train_amp(&MazeWorld::default(), &tiny_dataset(), &tiny_amp(0), RngKey::new(4)).unwrap();
    for r in &t.log {
        assert_eq!(r.mean_pred, 0.5);
        assert_eq!(r.std_pred, 0.0);
        assert_abs_diff_eq!(r.stats.mean_raw_return, 2f64.ln(), epsilon = 1e-12);
    }
}

#[test]
fn variance_probe_is_reproducible_and_frozen_disc_is_stable() {
    let base = AmpTrainer::new(&MazeWorld::default(), &tiny_dataset(), &tiny_amp(1), RngKey::new(5)).unwrap();
    let mut a = base.clone();
    a.iterate().unwrap();
    let mut b = a.clone();
    let frozen = a.disc.clone();
    let ra = probe_prediction_variance(&mut a, 4, false, RngKey::new(6)).unwrap();
    let rb = probe_prediction_variance(&mut b, 4, false, RngKey::new(6)).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(a.disc, frozen);
    let mut c = a.clone();
    probe_prediction_variance(&mut c, 2, true, RngKey::new(6)).unwrap();
    assert_ne!(c.disc, frozen);
    assert_eq!(variance_presets().map(|p| p.cutoff_fraction), [0.2, 0.5, 1.0]);
    let mut out = Vec::new();
    write_variance_csv(&ra, &mut out).unwrap();
    assert!(String::from_utf8(out).unwrap().starts_with("rollout,mean_reward,std_so_far\n0,"));
}

#[test]
fn probe_config_is_plain_cross_entropy() {
    let c = PerfectDiscConfig::default();
    assert_eq!(c.coeffs, DiscCoeffs::bce_only());
    assert_eq!(c.adam, AdamConfig::with_lr(1e-3));
}
