use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wslabel::{gen_ocds, gen_ocds_with_params, wilson, OcdsParams, SynthConfig};

#[test]
fn wilson_intervals_cover_at_roughly_the_nominal_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for &(p, trials) in &[(0.3, 60), (0.8, 200), (0.5, 25)] {
        let reps = 4000;
        let mut covered = 0;
        for _ in 0..reps {
            let hits = (0..trials).filter(|_| rng.random::<f64>() < p).count();
            let (center, half) = wilson(hits, trials, 0.95).unwrap();
            if (center - p).abs() <= half {
                covered += 1;
            }
        }
        let rate = covered as f64 / reps as f64;
        assert!(rate > 0.92 && rate < 0.98, "p={p} trials={trials}: coverage {rate}");
    }
}

#[test]
fn wilson_widens_with_confidence_and_shrinks_with_trials() {
    let (_, h90) = wilson(30, 100, 0.90).unwrap();
    let (_, h99) = wilson(30, 100, 0.99).unwrap();
    let (_, h_big) = wilson(300, 1000, 0.90).unwrap();
    assert!(h90 < h99);
    assert!(h_big < h90);
    let (c, h) = wilson(0, 10, 0.95).unwrap();
    assert!(c - h >= 0.0 && c + h <= 1.0);
}

#[test]
fn sampled_accuracies_follow_the_beta_mean() {
    let draws: Vec<f64> = (0..400)
        .flat_map(|seed| gen_ocds(&SynthConfig::new(1, 5, 2, seed)).unwrap().gen_params.b)
        .flatten()
        .collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    // Beta(2, 4/3) has mean 0.6 and standard deviation about 0.24
    assert!((mean - 0.6).abs() < 0.015, "mean accuracy {mean}");
    assert!(draws.iter().all(|b| (0.0..=1.0).contains(b)));
}

#[test]
fn labels_and_votes_follow_the_parameters() {
    let params = OcdsParams::new(vec![0.2, 0.5, 0.3], vec![Some(0.9), Some(0.4)]).unwrap();
    let n = 30_000;
    let data = gen_ocds_with_params(n, params, 5).unwrap();
    let mut counts = [0usize; 3];
    for &y in &data.true_labels {
        counts[y] += 1;
    }
    for (c, w) in counts.iter().zip([0.2, 0.5, 0.3]) {
        assert!((*c as f64 / n as f64 - w).abs() < 0.012, "{counts:?}");
    }
    for (j, target) in [(0, 0.9), (1, 0.4)] {
        let mut right = 0;
        let mut wrong = [0usize; 3];
        for (i, &y) in data.true_labels.iter().enumerate() {
            let h = data.preds.vote(i, j).class().unwrap();
            if h == y {
                right += 1;
            } else {
                wrong[(h + 3 - y) % 3] += 1;
            }
        }
        assert!((right as f64 / n as f64 - target).abs() < 0.012);
        // errors split evenly between the two other classes
        let split = wrong[1] as f64 / (wrong[1] + wrong[2]) as f64;
        assert!((split - 0.5).abs() < 0.03, "rule {j}: {wrong:?}");
    }
    let rows: f64 = data.eta.rows().map(|r| r.iter().sum::<f64>()).sum();
    assert!((rows - n as f64).abs() < 1e-8);
}

#[test]
fn generation_is_seeded() {
    let config = SynthConfig::new(200, 3, 2, 42);
    assert_eq!(gen_ocds(&config).unwrap(), gen_ocds(&config).unwrap());
    let other = SynthConfig { seed: 43, ..config.clone() };
    assert_ne!(gen_ocds(&other).unwrap().preds, gen_ocds(&config).unwrap().preds);
}
