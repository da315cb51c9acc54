use std::collections::HashSet;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::*;
use crate::error::Error;
use crate::RngKey;

fn at(p: Point) -> EpisodeState {
    EpisodeState { position: p, steps: 0, done: None }
}

#[test]
fn default_world_is_valid() {
    MazeWorld::default().validate().unwrap();
    let mut w = MazeWorld::default();
    w.goal = [9.0, 9.0];
    assert!(w.validate().is_err());
    let mut w = MazeWorld::default();
    w.goal_threshold = 0.0;
    assert!(w.validate().is_err());
}

#[test]
fn reset_stays_in_window_and_is_deterministic() {
    let w = MazeWorld::default();
    let mut rng = RngKey::new(1).rng();
    let mut sum = [0.0, 0.0];
    let n = 10_000;
    for _ in 0..n {
        let s = w.reset(&mut rng);
        assert!(w.start.contains(s.position));
        assert_eq!((s.steps, s.done), (0, None));
        sum[0] += s.position[0];
        sum[1] += s.position[1];
    }
    assert!((sum[0] / n as f64 - 1.5).abs() < 0.05);
    assert!((sum[1] / n as f64 - 9.0).abs() < 0.05);
    let a = w.reset(&mut RngKey::new(7).rng());
    let b = w.reset(&mut RngKey::new(7).rng());
    assert_eq!(a, b);
}

#[test]
fn free_motion_and_wall_clamp() {
    let w = MazeWorld::default();
    let (s, r) = w.step(&at([1.5, 9.0]), [0.0, -0.5]).unwrap();
    assert_eq!(s.position, [1.5, 8.5]);
    assert_eq!(s.steps, 1);
    assert!(r >= 0.0);
    let (s, _) = w.step(&at([1.5, 9.0]), [1.0, 0.0]).unwrap();
    assert_eq!(s.position, [2.0, 9.0]);
    // action is clamped to 0.5 first; a wall stops the larger move
    let (s, _) = w.step(&at([2.2, 9.0]), [1.0, 0.0]).unwrap();
    assert_eq!(s.position, [2.5, 9.0]);
    let (s, _) = w.step(&at([1.0, 9.8]), [-0.5, 0.5]).unwrap();
    assert_eq!(s.position, [0.5, 10.0]);
}

#[test]
fn reaching_goal_ends_episode() {
    let w = MazeWorld::default();
    let (s, _) = w.step(&at([9.0, 1.6]), [0.0, 0.0]).unwrap();
    assert_eq!(s.done, Some(DoneReason::Goal));
    assert!(matches!(w.step(&s, [0.0, 0.0]), Err(Error::EpisodeDone)));
    let mut w = MazeWorld::default();
    w.horizon = 2;
    let (s, _) = w.step(&at([1.5, 9.0]), [0.0, 0.0]).unwrap();
    let (s, _) = w.step(&s, [0.0, 0.0]).unwrap();
    assert_eq!(s.done, Some(DoneReason::Horizon));
}

#[test]
fn task_reward_examples() {
    let w = MazeWorld::default();
    assert_eq!(w.task_reward([5.0, 1.5], [5.0, 1.5]), 0.0);
    assert_abs_diff_eq!(w.task_reward([5.0, 1.5], [5.5, 1.5]), 1.0, epsilon = 1e-12);
    assert_eq!(w.task_reward([5.0, 1.5], [4.5, 1.5]), 0.0);
    assert_abs_diff_eq!(w.task_reward([5.0, 1.5], [5.25, 1.5]), 0.5, epsilon = 1e-12);
}

#[test]
fn noiseless_expert_follows_the_l() {
    let w = MazeWorld::default();
    let cfg = ExpertConfig { episodes: 1, noise_std: 0.0, ..ExpertConfig::default() };
    let demos = generate_expert(&w, &cfg, &mut RngKey::new(3).rng()).unwrap();
    let path = &demos.trajectories[0];
    let turn = path.iter().position(|p| p[1] <= 1.5).unwrap();
    assert!(path[..turn].iter().all(|p| p[0] <= 2.5));
    assert!(dist(*path.last().unwrap(), w.goal) <= w.goal_threshold);
}

#[test]
fn expert_dataset_properties() {
    let w = MazeWorld::default();
    let demos = generate_expert(&w, &ExpertConfig::default(), &mut RngKey::new(4).rng()).unwrap();
    let data = demos.dataset().unwrap();
    assert!(data.len() >= 5000, "{} transitions", data.len());
    let mut seen = HashSet::new();
    let mut total = 0.0;
    for r in data.features().rows() {
        let (s, s2) = ([r[0], r[1]], [r[2], r[3]]);
        assert!(w.in_corridor(s) && w.in_corridor(s2));
        assert!((s2[0] - s[0]).abs() <= w.max_speed + 1e-12 && (s2[1] - s[1]).abs() <= w.max_speed + 1e-12);
        total += dist(s, s2);
        seen.insert(r.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
    for r in data.features().rows() {
        let reversed = [r[2], r[3], r[0], r[1]].map(f64::to_bits).to_vec();
        assert!(!seen.contains(&reversed));
    }
    let mean = total / data.len() as f64;
    assert!((mean - w.max_speed).abs() <= 0.1 * w.max_speed, "mean step {mean}");
    assert_eq!(trajectories_from_transitions(&data).unwrap(), demos.trajectories);
}

#[test]
fn dataset_csv_roundtrip_and_errors() {
    let w = MazeWorld::default();
    let cfg = ExpertConfig { episodes: 3, ..ExpertConfig::default() };
    let data = generate_expert(&w, &cfg, &mut RngKey::new(5).rng()).unwrap().dataset().unwrap();
    let mut buf = Vec::new();
    write_dataset(&data, &mut buf).unwrap();
    assert!(buf.starts_with(b"sx,sy,snx,sny\n"));
    assert_eq!(read_dataset(buf.as_slice()).unwrap(), data);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("expert.csv");
    save_dataset(&data, &path).unwrap();
    assert_eq!(load_dataset(&path).unwrap(), data);

    assert!(matches!(read_dataset(&b""[..]), Err(Error::Empty(_))));
    assert!(matches!(read_dataset(&b"sx,sy,snx,sny\n"[..]), Err(Error::Empty(_))));
    let bad = b"sx,sy,snx,sny\n1,2,3,4\n1,2,3\n";
    match read_dataset(&bad[..]) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    match read_dataset(&b"sx,sy,snx,sny\n1,2,x,4\n"[..]) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
    assert!(matches!(read_dataset(&b"a,b,c,d\n1,2,3,4\n"[..]), Err(Error::Parse { line: 1, .. })));
}

proptest! {
    #[test]
    fn step_keeps_agent_in_corridor(
        leg in 0usize..2, u in 0.0f64..=1.0, v in 0.0f64..=1.0,
        ax in -3.0f64..3.0, ay in -3.0f64..3.0,
    ) {
        let w = MazeWorld::default();
        let c = w.corridor[leg];
        let p = [c.x[0] + u * (c.x[1] - c.x[0]), c.y[0] + v * (c.y[1] - c.y[0])];
        let (s, r) = w.step(&at(p), [ax, ay]).unwrap();
        prop_assert!(w.in_corridor(s.position));
        prop_assert!((0.0..=1.0).contains(&r));
    }

    #[test]
    fn task_reward_is_bounded(a in -20.0f64..20.0, b in -20.0f64..20.0, c in -20.0f64..20.0, d in -20.0f64..20.0) {
        let r = MazeWorld::default().task_reward([a, b], [c, d]);
        prop_assert!((0.0..=1.0).contains(&r));
    }
}

#[test]
fn density_histogram_bins_next_states() {
    let data = crate::energy::ExpertDataset::new(ndarray::arr2(&[
        [0.0, 0.0, 0.1, 0.1],
        [0.0, 0.0, 0.2, 0.3],
        [0.0, 0.0, 9.9, 0.1],
        [0.0, 0.0, 10.0, 10.0],
        [0.0, 0.0, 11.0, 1.0],
    ]))
    .unwrap();
    let cells = density_histogram(&data, Rect::new(0.0, 10.0, 0.0, 10.0), 10).unwrap();
    assert_eq!(cells.len(), 100);
    assert_eq!(cells[0].count, 2);
    assert_eq!((cells[0].x, cells[0].y), (0.5, 0.5));
    assert_eq!(cells[9].count, 1);
    assert_eq!(cells[99].count, 1);
    assert_eq!(cells.iter().map(|c| c.count).sum::<usize>(), 4);
    assert!(density_histogram(&data, Rect::new(0.0, 1.0, 0.0, 1.0), 0).is_err());
}
