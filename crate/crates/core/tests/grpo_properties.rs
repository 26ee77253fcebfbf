use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tablerl_core::grpo::{group_advantages, grpo_grad_new_logp, grpo_objective};
use tablerl_core::{ClipConfig, DegenerateGroupMode, GroupBatch, GrpoError, RolloutLogProbs};

const ZERO: DegenerateGroupMode = DegenerateGroupMode::ZeroAdvantages;

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

#[test]
fn advantages_are_standardized() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..2000 {
        let g = rng.random_range(2..=64);
        let rewards: Vec<f64> = if i % 2 == 0 {
            (0..g).map(|_| rng.random_range(-5.0..5.0)).collect()
        } else {
            // Binary rewards as produced by exact-match accuracy.
            let mut r: Vec<f64> = (0..g).map(|_| f64::from(rng.random_range(0..2u8))).collect();
            r[0] = 0.0;
            r[1] = 1.2;
            r
        };
        let a = group_advantages(&rewards, ZERO).unwrap();
        let (m, s) = mean_std(&a);
        assert!(m.abs() < 1e-9 && (s - 1.0).abs() < 1e-9, "G={g} mean={m} std={s}");
    }
}

#[test]
fn advantages_invariant_to_shift_and_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let g = rng.random_range(2..=16);
        let r: Vec<f64> = (0..g).map(|_| rng.random_range(0.0..1.0)).collect();
        let base = group_advantages(&r, ZERO).unwrap();
        let shifted: Vec<f64> = r.iter().map(|x| x + 3.5).collect();
        let scaled: Vec<f64> = r.iter().map(|x| x * 7.0).collect();
        for other in [shifted, scaled] {
            let a = group_advantages(&other, ZERO).unwrap();
            for (x, y) in base.iter().zip(&a) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn degenerate_groups_follow_mode() {
    for g in 2..=64 {
        let r = vec![0.25; g];
        assert_eq!(group_advantages(&r, ZERO).unwrap(), vec![0.0; g]);
        assert_eq!(
            group_advantages(&r, DegenerateGroupMode::SkipGroup),
            Err(GrpoError::DegenerateGroup)
        );
    }
    assert_eq!(group_advantages(&[1.0], ZERO), Err(GrpoError::GroupTooSmall(1)));
}

fn batch(logps: Vec<(Vec<f64>, Vec<f64>)>, rewards: Vec<f64>) -> GroupBatch {
    let rollouts = logps
        .into_iter()
        .map(|(o, n)| RolloutLogProbs::new(o, n).unwrap())
        .collect();
    GroupBatch::new(rollouts, rewards)
        .unwrap()
        .with_advantages(ZERO)
        .unwrap()
}

#[test]
fn hand_examples() {
    let clip = ClipConfig::default();
    let lp = vec![-0.5, -1.0, -2.0];
    let b = batch(vec![(lp.clone(), lp.clone()), (lp.clone(), lp)], vec![1.0, 0.0]);
    assert_eq!(b.advantages.as_deref(), Some(&[1.0, -1.0][..]));
    assert_eq!(grpo_objective(&b, &clip).unwrap(), 0.0);

    // r = 1.5 with advantage +1 on every token of the first rollout; the second
    // rollout is on policy with advantage -1.
    let old = (0.1f64).ln();
    let new = (0.15f64).ln();
    let b = batch(vec![(vec![old; 4], vec![new; 4]), (vec![old; 4], vec![old; 4])], vec![1.0, 0.0]);
    let j = grpo_objective(&b, &clip).unwrap();
    assert!((j - (4.0 * 1.28 - 4.0) / 8.0).abs() < 1e-12, "{j}");
    let g = grpo_grad_new_logp(&b, &clip).unwrap();
    assert!(g[0].iter().all(|&x| x == 0.0));
    assert!(g[1].iter().all(|&x| (x + 1.0 / 8.0).abs() < 1e-15));

    // r = 0.5 with advantage -1: min(-0.5, -0.8) = -0.8.
    let old = (0.5f64).ln();
    let new = (0.25f64).ln();
    let b = batch(vec![(vec![old], vec![old]), (vec![old], vec![new])], vec![1.0, 0.0]);
    let j = grpo_objective(&b, &clip).unwrap();
    assert!((j - (1.0 - 0.8) / 2.0).abs() < 1e-12, "{j}");
}

#[test]
fn clipping_caps_are_exact() {
    let clip = ClipConfig::default();
    for r in [1.3, 2.0, 10.0] {
        let b = batch(
            vec![(vec![-3.0], vec![-3.0 + f64::ln(r)]), (vec![-1.0], vec![-1.0])],
            vec![1.0, 0.0],
        );
        // Second token contributes exactly -1; the first is capped at 1.28.
        assert_eq!(grpo_objective(&b, &clip).unwrap(), (1.28 - 1.0) / 2.0);
    }
    for r in [0.1, 0.5, 0.79] {
        let b = batch(
            vec![(vec![-1.0], vec![-1.0]), (vec![-0.5], vec![-0.5 + f64::ln(r)])],
            vec![1.0, 0.0],
        );
        assert_eq!(grpo_objective(&b, &clip).unwrap(), (1.0 - 0.8) / 2.0);
    }
}

#[test]
fn on_policy_objective_and_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let clip = ClipConfig::default();
    for _ in 0..100 {
        let g = rng.random_range(2..8);
        let lens: Vec<usize> = (0..g).map(|_| rng.random_range(1..10)).collect();
        let rewards: Vec<f64> = (0..g).map(|_| rng.random_range(0.0..1.2)).collect();
        let logps = lens
            .iter()
            .map(|&l| {
                let v: Vec<f64> = (0..l).map(|_| rng.random_range(-4.0..0.0)).collect();
                (v.clone(), v)
            })
            .collect();
        let b = batch(logps, rewards);
        let adv = b.advantages.clone().unwrap();
        let n = lens.iter().sum::<usize>() as f64;
        let expect = lens.iter().zip(&adv).map(|(&l, a)| l as f64 * a).sum::<f64>() / n;
        assert!((grpo_objective(&b, &clip).unwrap() - expect).abs() < 1e-12);
        for (row, a) in grpo_grad_new_logp(&b, &clip).unwrap().iter().zip(&adv) {
            assert!(row.iter().all(|x| (x - a / n).abs() < 1e-15));
        }
    }
}

/// Random off-policy batch whose log-ratios keep a margin from both clip
/// boundaries.
fn random_batch(rng: &mut ChaCha8Rng, clip: &ClipConfig) -> GroupBatch {
    let lo = clip.lower().ln();
    let hi = clip.upper().ln();
    let g = rng.random_range(2..8);
    let logps = (0..g)
        .map(|_| {
            let len = rng.random_range(1..8);
            let old: Vec<f64> = (0..len).map(|_| rng.random_range(-5.0..-0.6)).collect();
            let new = old
                .iter()
                .map(|o| loop {
                    let d: f64 = rng.random_range(-0.5..0.5);
                    if (d - lo).abs() > 1e-3 && (d - hi).abs() > 1e-3 {
                        break o + d;
                    }
                })
                .collect();
            (old, new)
        })
        .collect();
    let rewards = (0..g).map(|_| rng.random_range(0.0..1.2)).collect();
    batch(logps, rewards)
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let clip = ClipConfig::default();
    let h = 1e-6;
    for _ in 0..100 {
        let b = random_batch(&mut rng, &clip);
        let grad = grpo_grad_new_logp(&b, &clip).unwrap();
        for i in 0..b.rollouts.len() {
            for t in 0..b.rollouts[i].len() {
                let mut plus = b.clone();
                plus.rollouts[i].new_logp[t] += h;
                let mut minus = b.clone();
                minus.rollouts[i].new_logp[t] -= h;
                let fd = (grpo_objective(&plus, &clip).unwrap()
                    - grpo_objective(&minus, &clip).unwrap())
                    / (2.0 * h);
                let g = grad[i][t];
                let scale = g.abs().max(fd.abs());
                assert!(
                    (g - fd).abs() <= 1e-5 * scale + 1e-10,
                    "rollout {i} token {t}: analytic {g} fd {fd}"
                );
            }
        }
    }
}
