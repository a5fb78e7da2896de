//! Ground-truth oracle for the selection pipeline: synthetic feature
//! matrices with a known set of discriminative heads planted in.

use rand::Rng;

use crate::discovery::features::FeatureMatrix;
use crate::rng::rng_for;

/// Build a synthetic feature matrix shaped like a factorial corpus:
/// `n_items * pairs_per_item` pairs, two rows each (match then mismatch),
/// grouped by item. Non-planted features are Gaussian noise around 0.2
/// clipped to [0, 1]; planted heads get `effect_size` added to f_a and f_b
/// on match rows, with f_avg kept consistent.
pub fn plant_synthetic_features(
    seed: u64,
    n_heads: usize,
    planted: &[usize],
    n_items: usize,
    pairs_per_item: usize,
    effect_size: f64,
    noise_sd: f64,
) -> FeatureMatrix {
    assert!(
        planted.iter().all(|&h| h < n_heads),
        "planted heads must index into 0..{n_heads}"
    );
    let mut rng = rng_for(seed, "planted-features");
    let noise = move |rng: &mut rand_chacha::ChaCha8Rng| -> f64 {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        0.2 + noise_sd * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let clip = |v: f64| v.clamp(0.0, 1.0);

    let n_rows = n_items * pairs_per_item * 2;
    let mut rows = Vec::with_capacity(n_rows * 3 * n_heads);
    let mut labels = Vec::with_capacity(n_rows);
    let mut groups = Vec::with_capacity(n_rows);

    for item in 0..n_items {
        for _ in 0..pairs_per_item {
            for is_match in [true, false] {
                for h in 0..n_heads {
                    let bump = if is_match && planted.contains(&h) {
                        effect_size
                    } else {
                        0.0
                    };
                    let f_a = clip(noise(&mut rng) + bump);
                    let f_b = clip(noise(&mut rng) + bump);
                    rows.extend_from_slice(&[f_a, f_b, 0.5 * (f_a + f_b)]);
                }
                labels.push(u8::from(is_match));
                groups.push(item as u32);
            }
        }
    }

    FeatureMatrix { n_heads, heads_per_layer: n_heads, rows, labels, groups }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_matches_a_factorial_corpus() {
        let m = plant_synthetic_features(1, 8, &[2], 5, 3, 0.3, 0.1);
        assert_eq!(m.n_rows(), 30);
        assert_eq!(m.n_cols(), 24);
        m.validate().unwrap();
        // alternating match/mismatch labels, grouped by item
        assert_eq!(m.labels[0], 1);
        assert_eq!(m.labels[1], 0);
        assert_eq!(m.groups[0], m.groups[1]);
        assert!(m.rows.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn zero_effect_is_pure_noise() {
        let with = plant_synthetic_features(5, 8, &[1], 4, 2, 0.0, 0.1);
        let without = plant_synthetic_features(5, 8, &[6], 4, 2, 0.0, 0.1);
        assert_eq!(with.rows, without.rows, "planted set is irrelevant at effect 0");
    }

    #[test]
    fn deterministic_for_seed() {
        let a = plant_synthetic_features(9, 16, &[3, 7], 6, 2, 0.3, 0.05);
        let b = plant_synthetic_features(9, 16, &[3, 7], 6, 2, 0.3, 0.05);
        assert_eq!(a, b);
        let c = plant_synthetic_features(10, 16, &[3, 7], 6, 2, 0.3, 0.05);
        assert_ne!(a, c);
    }

    #[test]
    fn planted_match_rows_are_shifted() {
        let planted = [0usize];
        let m = plant_synthetic_features(2, 4, &planted, 50, 2, 0.3, 0.05);
        let mut match_sum = 0.0;
        let mut mismatch_sum = 0.0;
        let mut n = 0.0;
        for r in 0..m.n_rows() {
            let v = m.row(r)[0]; // f_a of planted head
            if m.labels[r] == 1 {
                match_sum += v;
            } else {
                mismatch_sum += v;
                n += 1.0;
            }
        }
        assert!((match_sum - mismatch_sum) / n > 0.2);
    }
}
