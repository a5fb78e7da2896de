// scratch profiling harness for the solver (removed before release)
use bindlab::discovery::*;
use std::time::Instant;

fn main() {
    let planted = [4usize, 17, 40];
    let m = plant_synthetic_features(11, 64, &planted, 40, 5, 0.3, 0.1);
    println!("matrix: {} rows x {} cols", m.n_rows(), m.n_cols());

    for lambda in [1.0, 0.1, 0.01, 1e-3, 1e-4] {
        let t = Instant::now();
        let fit = fit_l1_logistic(&m.rows, m.n_rows(), m.n_cols(), &m.labels, lambda).unwrap();
        println!(
            "lambda {lambda:>7}: {} iters, {} active, obj {:.6}, {:.2} s",
            fit.iterations,
            fit.n_active(1e-6),
            fit.objective,
            t.elapsed().as_secs_f64()
        );
    }

    let t = Instant::now();
    let got = grouped_cv_select(&m, &default_lambda_grid(), 5, 3, 11).unwrap();
    println!("full selection: {:.2} s, {} candidates", t.elapsed().as_secs_f64(), got.len());
    for c in &got {
        println!("  head {} folds {} coef {:.4}", c.head, c.folds_selected, c.mean_abs_coef);
    }
}
