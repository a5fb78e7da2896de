// scratch: per-lambda validation losses on the planted oracle (removed before release)
use bindlab::discovery::*;
use std::time::Instant;

fn main() {
    let planted = [4usize, 17, 40];
    let m = plant_synthetic_features(11, 64, &planted, 40, 5, 0.3, 0.1);
    let n_cols = m.n_cols();

    let folds = grouped_folds(&m.groups, 5, 11).unwrap();
    let test_rows = &folds[0];
    let test_set: std::collections::BTreeSet<usize> = test_rows.iter().copied().collect();
    let train_rows: Vec<usize> = (0..m.n_rows()).filter(|r| !test_set.contains(r)).collect();

    let gather = |rows: &[usize]| -> (Vec<f64>, Vec<u8>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for &r in rows {
            x.extend_from_slice(m.row(r));
            y.push(m.labels[r]);
        }
        (x, y)
    };
    let (train_x, train_y) = gather(&train_rows);
    let (test_x, test_y) = gather(test_rows);

    let mut grid = default_lambda_grid();
    grid.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut warm: Option<(Vec<f64>, f64)> = None;
    for &lambda in &grid {
        let fit = fit_l1_logistic_warm(
            &train_x, train_rows.len(), n_cols, &train_y, lambda,
            warm.as_ref().map(|(w, b)| (w.as_slice(), *b)),
        ).unwrap();
        let loss = fit.validation_log_loss(&test_x, test_rows.len(), n_cols, &test_y);
        println!(
            "lambda {lambda:>10.5}: val loss {loss:.5}, active {:>3}, iters {}",
            fit.n_active(1e-6), fit.iterations
        );
        warm = Some((fit.weights.clone(), fit.intercept));
    }

    // time the gradient check pieces
    use bindlab::model::{ModelConfig, Params};
    use bindlab::train::{batch_grads, batch_loss};
    let config = ModelConfig {
        n_layers: 2, n_heads: 2, d_model: 12, d_head: 6,
        vocab_size: 20, max_seq: 10, seed: 3,
    };
    let params = Params::init(&config, 3);
    let batch = vec![
        vec![1u32, 5, 9, 13, 2, 7],
        vec![3, 3, 11, 0, 19, 6, 4],
        vec![18, 2, 2, 15],
    ];
    let t = Instant::now();
    let _ = batch_grads(&config, &params, &batch).unwrap();
    println!("one batch_grads: {:.4} s", t.elapsed().as_secs_f64());
    let t = Instant::now();
    for _ in 0..100 {
        let _ = batch_loss(&config, &params, &batch).unwrap();
    }
    println!("100x batch_loss: {:.4} s", t.elapsed().as_secs_f64());
    println!("n params: {}", params.n_parameters());
}
