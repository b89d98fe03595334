//! Property-based invariant tests for the small algorithmic pieces that the
//! training loops lean on: the replay buffer, the reward and action rules,
//! dataset normalization/splitting, and the discounted-return diagnostic.

use layercfg::data::{self, SupervisedDataset};
use layercfg::env::LayerCount;
use layercfg::rl::{
    apply_action, compute_reward, discounted_return, Action, ReplayBuffer, Transition,
    REWARD_CLIP, REWARD_EPS_DEN,
};
use layercfg::tensor::Tensor;
use proptest::prelude::*;

fn transition(tag: f64) -> Transition {
    Transition {
        state: tag,
        action: Action::Add,
        next_state: tag + 1.0,
        reward: 0.0,
    }
}

fn dataset(rows: usize, cols: usize, values: &[f64], targets: &[f64]) -> SupervisedDataset {
    SupervisedDataset {
        features: Tensor::from_vec(&[rows, cols], values.to_vec()).unwrap(),
        targets: Tensor::from_vec(&[rows], targets.to_vec()).unwrap(),
        column_names: (0..cols).map(|c| format!("f{c}")).collect(),
    }
}

proptest! {
    #[test]
    fn buffer_never_exceeds_capacity_and_keeps_newest(
        capacity in 1usize..50,
        pushes in 0usize..200,
    ) {
        let mut buf = ReplayBuffer::new(capacity);
        for k in 0..pushes {
            buf.push(transition(k as f64));
            prop_assert!(buf.len() <= capacity);
            prop_assert_eq!(buf.len(), (k + 1).min(capacity));
        }
        if pushes > 0 {
            // FIFO eviction: the survivors are exactly the newest pushes, in order
            let oldest_kept = pushes.saturating_sub(capacity);
            let kept: Vec<f64> = buf.iter().map(|t| t.state).collect();
            let expected: Vec<f64> = (oldest_kept..pushes).map(|k| k as f64).collect();
            prop_assert_eq!(kept, expected);
        }
    }

    #[test]
    fn apply_action_stays_in_bounds(
        layer_max in 1u32..30,
        layer in 1u32..30,
        add in any::<bool>(),
    ) {
        prop_assume!(layer <= layer_max);
        let action = if add { Action::Add } else { Action::Remove };
        let cur = LayerCount::new(layer, layer_max).unwrap();
        let next = apply_action(cur, action, layer_max);
        prop_assert!(next.get() >= 1 && next.get() <= layer_max);
        let unclamped = layer as i64 + action.delta();
        if unclamped >= 1 && unclamped <= layer_max as i64 {
            prop_assert_eq!(next.get() as i64, unclamped);
        } else {
            prop_assert_eq!(next.get(), layer); // clamped at a boundary
        }
    }

    #[test]
    fn reward_sign_matches_loss_change_and_is_clipped(
        loss_t in 1e-6f64..1e6,
        loss_next in 1e-6f64..1e6,
    ) {
        let r = compute_reward(loss_t, loss_next);
        prop_assert!(r.abs() <= REWARD_CLIP);
        prop_assert_eq!(r == 0.0, loss_t == loss_next);
        if loss_t > loss_next {
            prop_assert!(r > 0.0); // loss went down: improvement
        } else if loss_t < loss_next {
            prop_assert!(r < 0.0);
        }
        // unclipped value when the denominator guard is inactive
        if loss_next >= REWARD_EPS_DEN {
            let raw = (loss_t - loss_next) / (loss_next * 100.0);
            prop_assert_eq!(r, raw.clamp(-REWARD_CLIP, REWARD_CLIP));
        }
    }

    #[test]
    fn normalize_zscores_every_column(
        rows in 2usize..20,
        cols in 1usize..6,
        seed_vals in prop::collection::vec(-100.0f64..100.0, 0..120),
    ) {
        prop_assume!(seed_vals.len() >= rows * cols + rows);
        let values = &seed_vals[..rows * cols];
        let targets = &seed_vals[rows * cols..rows * cols + rows];
        let ds = dataset(rows, cols, values, targets);
        let (norm, stats) = data::normalize(&ds);
        prop_assert_eq!(norm.targets.data(), ds.targets.data());
        for c in 0..cols {
            let col: Vec<f64> = (0..rows).map(|r| norm.features.data()[r * cols + c]).collect();
            let mean = col.iter().sum::<f64>() / rows as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / rows as f64;
            prop_assert!(mean.abs() < 1e-9);
            if stats.std[c] > 0.0 {
                prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
            } else {
                prop_assert!(col.iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn split_is_an_exact_partition(
        rows in 2usize..40,
        frac in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let values: Vec<f64> = (0..rows * 2).map(|i| i as f64).collect();
        let targets: Vec<f64> = (0..rows).map(|i| 1000.0 + i as f64).collect();
        let ds = dataset(rows, 2, &values, &targets);
        let (train, test) = data::split(&ds, frac, seed).unwrap();
        prop_assert_eq!(train.rows() + test.rows(), rows);
        prop_assert!(test.rows() >= 1 && train.rows() >= 1);
        // each row keeps its (features, target) pairing, and every original
        // row appears exactly once across the two parts
        let mut seen: Vec<usize> = Vec::new();
        for part in [&train, &test] {
            for r in 0..part.rows() {
                let t = part.targets.data()[r];
                let orig = (t - 1000.0) as usize;
                prop_assert_eq!(part.feature_row(r), ds.feature_row(orig));
                seen.push(orig);
            }
        }
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..rows).collect::<Vec<_>>());
    }

    #[test]
    fn discounted_return_is_linear_and_recursive(
        pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..12),
        gamma in 0.0f64..1.0,
        a in -3.0f64..3.0,
    ) {
        let (rewards, other): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let combo: Vec<f64> = rewards.iter().zip(&other).map(|(r, s)| a * r + s).collect();
        let lhs = discounted_return(&combo, gamma);
        let rhs = a * discounted_return(&rewards, gamma) + discounted_return(&other, gamma);
        prop_assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(rhs.abs()).max(1.0));
        let recursive = rewards[0] + gamma * discounted_return(&rewards[1..], gamma);
        prop_assert!((discounted_return(&rewards, gamma) - recursive).abs() < 1e-12);
    }
}
