//! Checks on real MNIST; each test returns early when the files are absent.

mod common;

use gnclab::arch::MNIST_SHAPE;
use gnclab::data::{build_binary_task, BinaryTask};

fn task() -> Option<BinaryTask> {
    let Some(pool) = common::mnist_pool() else {
        eprintln!("MNIST not found in {}; skipping", common::mnist_dir().display());
        return None;
    };
    Some(build_binary_task(&pool, (0, 7), 16, 202).unwrap())
}

#[test]
fn zero_seven_task_shape() {
    let Some(t) = task() else { return };
    assert_eq!(t.train.len(), 16);
    assert_eq!(t.test.len(), 2008);
    assert_eq!(t.train.iter().filter(|s| s.y > 0.0).count(), 8);
    assert_eq!(t.input_shape(), &MNIST_SHAPE[..]);
    let pool = common::mnist_pool().unwrap();
    assert_eq!(build_binary_task(&pool, (7, 0), 16, 202).unwrap().fingerprint(), t.fingerprint());
}

/// Raw gradient norms scale with the weights, so uniform1 runs show larger
/// norms than Kaiming runs at the fitted epoch (about 12 vs 2 here).
#[test]
#[ignore = "does not hold: uniform1 raw gradient norm is larger, see uniform_init_stalls_after_fitting"]
fn uniform_init_raw_gradient_norm_is_ten_times_smaller() {
    let Some(pool) = common::mnist_pool() else { return };
    let s = common::gradient_stall(&pool, 8);
    assert!(s.raw.1 >= 10.0 * s.raw.0, "{:?}", s.raw);
}

#[test]
fn uniform_init_stalls_after_fitting() {
    let Some(pool) = common::mnist_pool() else { return };
    let s = common::gradient_stall(&pool, 8);
    assert!(s.fitted.0 > 0 && s.fitted.1 > 0);
    assert!(s.relative_next.1 >= 10.0 * s.relative_next.0, "{:?}", s.relative_next);
}

#[test]
fn trajectory_margins_grow_with_epochs() {
    let Some(pool) = common::mnist_pool() else { return };
    let (records, _) = common::run_config(
        "desk_trajectory.toml",
        |c| {
            c.sweep.networks_per_cell = 10;
            c.sgd.checkpoints = vec![1, 60];
        },
        &pool,
    );
    let mean = |epoch: usize| {
        let v: Vec<f64> = records.iter().filter(|r| r.epochs == Some(epoch)).map(|r| r.lip_loss).collect();
        assert_eq!(v.len(), 10);
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean(1) > mean(60), "{} vs {}", mean(1), mean(60));
}
