use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use ndarray::{arr1, arr2, Array1, Array2};
use proptest::prelude::*;
use rand::Rng as _;

use super::*;
use crate::diffcore::{Activation, Dense, DenseNetwork};
use crate::maze::MazeWorld;
use crate::RngKey;

/// Lambda-return by explicit expansion of the n-step returns.
fn brute_force_advantages(r: &[f64], v: &[f64], d: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = r.len();
    (0..n)
        .map(|t| {
            // n-step return from t; stops bootstrapping at the first done
            let nstep = |k: usize| {
                let mut g = 0.0;
                let mut disc = 1.0;
                for j in t..t + k {
                    g += disc * r[j];
                    disc *= gamma;
                    if d[j] {
                        return g;
                    }
                }
                g + disc * v[t + k]
            };
            let steps = n - t;
            let mut total = 0.0;
            for k in 1..steps {
                total += (1.0 - lambda) * lambda.powi(k as i32 - 1) * nstep(k);
            }
            total += lambda.powi(steps as i32 - 1) * nstep(steps);
            total - v[t]
        })
        .collect()
}

#[test]
fn gae_hand_example() {
    let a = gae_advantages(&[1.0, 1.0], &[0.5, 0.5, 0.0], &[false, true], 0.99, 0.95).unwrap();
    assert_abs_diff_eq!(a[1], 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(a[0], 1.46525, epsilon = 1e-12);
    let t = td_lambda_targets(&[1.0, 1.0], &[0.5, 0.5, 0.0], &[false, true], 0.99, 0.95).unwrap();
    assert_abs_diff_eq!(t[0], 1.96525, epsilon = 1e-12);
}

#[test]
fn gae_degenerate_cases() {
    // r_t = V_t - gamma V_{t+1} makes every residual zero
    let v = [1.0, 2.0, 3.0, 4.0];
    let r: Vec<f64> = (0..3).map(|t| v[t] - 0.9 * v[t + 1]).collect();
    let a = gae_advantages(&r, &v, &[false; 3], 0.9, 0.7).unwrap();
    assert!(a.iter().all(|x| x.abs() < 1e-12));
    let t = td_lambda_targets(&r, &v, &[false; 3], 0.9, 0.7).unwrap();
    for (ti, vi) in t.iter().zip(&v) {
        assert_abs_diff_eq!(ti, vi, epsilon = 1e-12);
    }
    let r = [0.3, -1.0, 2.0];
    let v = [0.1, 0.4, -0.2, 0.7];
    let a = gae_advantages(&r, &v, &[false; 3], 0.9, 0.0).unwrap();
    for k in 0..3 {
        assert_eq!(a[k], r[k] + 0.9 * v[k + 1] - v[k]);
    }
    assert!(gae_advantages(&r, &v[..3], &[false; 3], 0.9, 0.9).is_err());
    assert!(gae_advantages(&r, &v, &[false; 2], 0.9, 0.9).is_err());
}

#[test]
fn lambda_one_is_monte_carlo_plus_bootstrap() {
    let r = [1.0, 2.0, 3.0];
    let v = [0.5, -1.0, 2.0, 10.0];
    let t = td_lambda_targets(&r, &v, &[false; 3], 0.9, 1.0).unwrap();
    assert_abs_diff_eq!(t[0], 1.0 + 0.9 * 2.0 + 0.81 * 3.0 + 0.729 * 10.0, epsilon = 1e-12);
}

#[test]
fn gae_matches_brute_force_on_random_sequences() {
    let mut rng = RngKey::new(6).rng();
    for _ in 0..1000 {
        let n = rng.random_range(1..=10);
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..=n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let d: Vec<bool> = (0..n).map(|_| rng.random_bool(0.2)).collect();
        let (g, l) = (rng.random_range(0.5..1.0), rng.random_range(0.0..1.0));
        let a = gae_advantages(&r, &v, &d, g, l).unwrap();
        let b = brute_force_advantages(&r, &v, &d, g, l);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-10);
        }
    }
}

#[test]
fn reward_transform_examples() {
    let mut tracker = ReturnTracker::default();
    assert_eq!(tracker.mean(), 0.0);
    assert_abs_diff_eq!(transform_reward(10.0, &tracker), 1f64.tanh(), epsilon = 1e-15);
    assert_abs_diff_eq!(transform_reward(10.0, &tracker), 0.76159, epsilon = 1e-5);
    tracker.push(4.0);
    assert_eq!(transform_reward(4.0, &tracker), 0.0);
    for v in [1.0, 2.0, 3.0, 4.0] {
        tracker.push(v);
    }
    assert_eq!(tracker.len(), 3);
    assert_eq!(tracker.mean(), 3.0);
    assert!(ReturnTracker::new(0).is_err());
    let far = transform_reward(1e9, &ReturnTracker::default());
    assert!(far < 1.0 && far == 1.0 - f64::EPSILON / 2.0);
    assert!(transform_reward(-1e9, &ReturnTracker::default()) > -1.0);
}

#[test]
fn compose_reward_examples() {
    assert_eq!(compose_reward(1.0, 2.0, 0.5, 0.5), 1.5);
    assert_eq!(compose_reward(0.7, 2.0, 0.0, 1.0), 2.0);
    assert_eq!(compose_reward(0.0, 0.0, 0.5, 0.5), 0.0);
    assert_eq!(RewardWeights::default().compose(1.0, 2.0), 1.5);
    assert!(RewardWeights { task: -1.0, learned: 1.0 }.validate().is_err());
}

fn linear_policy() -> GaussianPolicy {
    let l = Dense::new(arr2(&[[1.0, 0.0], [0.0, 2.0]]), arr1(&[0.0, 0.0]), Activation::Identity).unwrap();
    GaussianPolicy::from_net(DenseNetwork::new(vec![l]).unwrap(), vec![LOG_STD; 2]).unwrap()
}

#[test]
fn log_prob_at_mean() {
    let p = linear_policy();
    let m = arr2(&[[0.1, 0.2]]);
    let lp = p.log_prob(m.view(), m.view()).unwrap();
    let expected = -0.5 * 2.0 * ((2.0 * PI).ln() + 2.0 * LOG_STD);
    assert_abs_diff_eq!(lp[0], expected, epsilon = 1e-12);
}

#[test]
fn log_prob_matches_density() {
    let p = linear_policy();
    let (m, a) = (arr2(&[[0.0, 0.0]]), arr2(&[[0.03, -0.05]]));
    let sd = LOG_STD.exp();
    let pdf = |x: f64| (-(x * x) / (2.0 * sd * sd)).exp() / (sd * (2.0 * PI).sqrt());
    let lp = p.log_prob(m.view(), a.view()).unwrap()[0];
    assert_abs_diff_eq!(lp, (pdf(0.03) * pdf(-0.05)).ln(), epsilon = 1e-10);
}

#[test]
fn sampling_is_deterministic_and_mean_mode_is_exact() {
    let p = linear_policy();
    let a = p.sample_action(&[0.3, 0.4], &mut RngKey::new(2).rng()).unwrap();
    let b = p.sample_action(&[0.3, 0.4], &mut RngKey::new(2).rng()).unwrap();
    assert_eq!(a, b);
    assert_eq!(p.deterministic_action(&[0.3, 0.4]).unwrap(), vec![0.3, 0.8]);
    let mut rng = RngKey::new(3).rng();
    let n = 4000;
    let mut sum = [0.0, 0.0];
    for _ in 0..n {
        let (a, _) = p.sample_action(&[0.3, 0.4], &mut rng).unwrap();
        sum[0] += a[0];
        sum[1] += a[1];
    }
    assert!((sum[0] / n as f64 - 0.3).abs() < 0.005);
    assert!((sum[1] / n as f64 - 0.8).abs() < 0.005);
}

fn small_config() -> RlConfig {
    RlConfig {
        num_envs: 4,
        horizon: 16,
        policy_hidden: vec![8],
        value_hidden: vec![8],
        ..RlConfig::default()
    }
}

#[test]
fn rollout_counts_and_reset_semantics() {
    let mut world = MazeWorld::default();
    world.horizon = 7;
    let mut agent = Agent::new(world.clone(), small_config(), RngKey::new(1)).unwrap();
    let buf = agent.collect().unwrap();
    assert_eq!(buf.len(), 64);
    assert_eq!(buf.states.dim(), (64, 2));
    assert_eq!(buf.values.len(), 68);
    for e in 0..4 {
        let dones: Vec<bool> = buf.column(&buf.dones, e).collect();
        assert!(dones[6] && dones[13]);
        assert_eq!(dones.iter().filter(|d| **d).count(), 2);
        // step 8 starts from a fresh reset inside the start window
        let s7 = [buf.states[[7 * 4 + e, 0]], buf.states[[7 * 4 + e, 1]]];
        assert!(world.start.contains(s7));
    }
    for i in 0..buf.len() {
        let s = [buf.next_states[[i, 0]], buf.next_states[[i, 1]]];
        assert!(world.in_corridor(s));
        assert!(buf.log_probs[i].is_finite());
        assert_eq!(buf.truncated[i], buf.dones[i]);
    }
    assert_eq!(buf.features().dim(), (64, 4));
}

#[test]
fn rollout_is_deterministic_per_seed() {
    let a = Agent::new(MazeWorld::default(), small_config(), RngKey::new(5)).unwrap().collect().unwrap();
    let b = Agent::new(MazeWorld::default(), small_config(), RngKey::new(5)).unwrap().collect().unwrap();
    let c = Agent::new(MazeWorld::default(), small_config(), RngKey::new(6)).unwrap().collect().unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn learn_rejects_non_finite_rewards() {
    let mut agent = Agent::new(MazeWorld::default(), small_config(), RngKey::new(1)).unwrap();
    let buf = agent.collect().unwrap();
    let mut r = vec![0.0; buf.len()];
    r[3] = f64::NAN;
    assert!(agent.learn(&buf, &r).unwrap_err().is_numerical());
    assert!(agent.learn(&buf, &r[..10]).is_err());
}

#[test]
fn learn_tracks_returns_and_counts_steps() {
    let mut agent = Agent::new(MazeWorld::default(), small_config(), RngKey::new(1)).unwrap();
    for i in 1..=4 {
        let buf = agent.collect().unwrap();
        let stats = agent.learn(&buf, &vec![1.0; buf.len()]).unwrap();
        assert_eq!(stats.iter, i);
        assert_eq!(stats.env_steps, 64 * i);
        assert!(stats.mean_transformed_return > -1.0 && stats.mean_transformed_return < 1.0);
    }
    assert_eq!(agent.tracker.len(), 3);
}

#[test]
fn surrogate_clip_semantics() {
    assert_eq!(surrogate_coefficient(1.0, 2.0, 0.2), 2.0);
    assert_eq!(surrogate_coefficient(1.5, 2.0, 0.2), 0.0);
    assert_eq!(surrogate_coefficient(1.5, -2.0, 0.2), -2.0);
    assert_eq!(surrogate_coefficient(0.5, -2.0, 0.2), 0.0);
    assert_eq!(surrogate_coefficient(0.5, 2.0, 0.2), 2.0);
    assert_abs_diff_eq!(clipped_surrogate(1.5, 2.0, 0.2), 2.4);
    assert_abs_diff_eq!(clipped_surrogate(0.5, -2.0, 0.2), -1.6);
}

fn batch_for(p: &GaussianPolicy, adv: Vec<f64>, rng_seed: u64) -> PpoBatch {
    let mut rng = RngKey::new(rng_seed).rng();
    let n = adv.len();
    let states = Array2::from_shape_fn((n, 2), |_| rng.random_range(0.0..10.0));
    let mut rngs: Vec<_> = (0..n).map(|i| RngKey::new(i as u64).rng()).collect();
    let (actions, lp) = p.sample_batch(states.view(), &mut rngs).unwrap();
    PpoBatch {
        states,
        actions,
        log_probs: lp,
        advantages: Array1::from(adv),
        targets: Array1::zeros(n),
    }
}

#[test]
fn zero_advantages_leave_policy_unchanged() {
    let mut rng = RngKey::new(1).rng();
    let p = GaussianPolicy::new(2, 2, &[16], &mut rng).unwrap();
    let v = ValueFunction::new(2, &[16], &mut rng).unwrap();
    let mut learner = PpoLearner::new(p.clone(), v.clone(), PpoConfig::default()).unwrap();
    let batch = batch_for(&p, vec![0.0; 100], 2);
    learner.update(&batch, &mut rng).unwrap();
    assert_eq!(learner.policy, p);
    assert_ne!(learner.value, v);
}

#[test]
fn policy_gradient_follows_advantage() {
    // With rho = 1 the step moves the mean toward actions with A > 0.
    let mut rng = RngKey::new(4).rng();
    let p = GaussianPolicy::new(2, 2, &[16], &mut rng).unwrap();
    let v = ValueFunction::new(2, &[16], &mut rng).unwrap();
    let mut cfg = PpoConfig::default();
    cfg.epochs = 1;
    cfg.minibatch = 1000;
    cfg.normalize_advantages = false;
    let mut learner = PpoLearner::new(p.clone(), v, cfg).unwrap();
    let mut batch = batch_for(&p, vec![0.0; 200], 5);
    let mean = p.mean(batch.states.view()).unwrap();
    for i in 0..200 {
        batch.advantages[i] = batch.actions[[i, 0]] - mean[[i, 0]];
    }
    learner.update(&batch, &mut rng).unwrap();
    let after = learner.policy.mean(batch.states.view()).unwrap();
    let shift: f64 = (0..200).map(|i| after[[i, 0]] - mean[[i, 0]]).sum::<f64>();
    assert!(shift > 0.0);
}

#[test]
fn normalize_gives_unit_moments() {
    let x = normalize(arr1(&[1.0, 2.0, 3.0, 6.0]).view());
    assert_abs_diff_eq!(x.sum(), 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(x.mapv(|v| v * v).sum() / 4.0, 1.0, epsilon = 1e-12);
    assert_eq!(normalize(arr1(&[2.0, 2.0]).view()), arr1(&[0.0, 0.0]));
}

proptest! {
    #[test]
    fn transform_is_bounded_and_monotone(a in -1e3f64..1e3, b in -1e3f64..1e3, base in -50.0f64..50.0) {
        let mut t = ReturnTracker::default();
        t.push(base);
        let (ra, rb) = (transform_reward(a, &t), transform_reward(b, &t));
        prop_assert!(ra > -1.0 && ra < 1.0);
        if a < b {
            prop_assert!(ra <= rb);
        }
    }

    #[test]
    fn tracker_keeps_last_three(values in proptest::collection::vec(-10.0f64..10.0, 1..20)) {
        let mut t = ReturnTracker::default();
        for v in &values {
            t.push(*v);
        }
        let tail = &values[values.len().saturating_sub(3)..];
        prop_assert!((t.mean() - tail.iter().sum::<f64>() / tail.len() as f64).abs() < 1e-12);
    }
}
