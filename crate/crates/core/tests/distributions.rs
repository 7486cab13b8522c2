//! Distributional properties checked by Monte-Carlo at fixed seeds.

use forgetting_lab::experiments::{run_sweep, Execution, ModelVariant, SweepSpec, VariantSelection};
use forgetting_lab::linalg::{haar_orthogonal, Mat, RngStream};
use forgetting_lab::model::{ModelConfig, WMode};
use forgetting_lab::risk::TestSampler;

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn r_a_by_variant(cfg: ModelConfig, variants: VariantSelection, trials: u32, seed: u64) -> Vec<(ModelVariant, Vec<f64>)> {
    let spec = SweepSpec {
        grid: vec![cfg],
        trials_per_point: trials,
        n_test: 0,
        root_seed: seed,
        model_variant: variants,
        sampler: TestSampler::Projected,
    };
    let sweep = run_sweep(&spec, Execution::Parallel).unwrap();
    variants
        .variants()
        .iter()
        .map(|&v| {
            let xs = sweep
                .records
                .iter()
                .filter(|r| r.variant == v)
                .map(|r| r.outcome.as_ref().unwrap().r_a)
                .collect();
            (v, xs)
        })
        .collect()
}

fn assert_same_mean(a: &[f64], b: &[f64], k: f64, what: &str) {
    let (ma, sa) = mean_and_se(a);
    let (mb, sb) = mean_and_se(b);
    let z = (ma - mb).abs() / (sa * sa + sb * sb).sqrt();
    assert!(z <= k, "{what}: means {ma:.6e} and {mb:.6e} differ by {z:.2} combined SE");
}

#[test]
fn latent_and_surrogate_models_agree() {
    let out = r_a_by_variant(ModelConfig::new(5, 50, 500, 1.0), VariantSelection::Both, 500, 31);
    assert_eq!(out[0].1.len(), 500);
    assert_same_mean(&out[0].1, &out[1].1, 3.0, "latent vs surrogate");
}

#[test]
fn risk_does_not_depend_on_w_orientation() {
    let base = ModelConfig::new(5, 50, 500, 1.0);
    let axis = r_a_by_variant(base.clone(), VariantSelection::Latent, 500, 41);
    let rotated = r_a_by_variant(base.with_w_mode(WMode::RandomRotation), VariantSelection::Latent, 500, 42);
    assert_same_mean(&axis[0].1, &rotated[0].1, 3.0, "axis-aligned vs rotated W");
}

#[test]
fn haar_moments_and_invariance() {
    let p = 4;
    let draws = 4000;
    let mut rng = RngStream::new(77, 0).rng();
    let q = haar_orthogonal(&mut rng, p).unwrap();
    let samples: Vec<Mat> = (0..draws).map(|_| haar_orthogonal(&mut rng, p).unwrap()).collect();
    let left: Vec<Mat> = samples.iter().map(|o| &q * o).collect();
    let right: Vec<Mat> = samples.iter().map(|o| o * &q).collect();
    let fresh: Vec<Mat> = (0..draws).map(|_| haar_orthogonal(&mut rng, p).unwrap()).collect();
    for i in 0..p {
        for j in 0..p {
            let entry = |set: &[Mat], pow: i32| set.iter().map(|m| m[(i, j)].powi(pow)).collect::<Vec<_>>();
            for pow in [1, 2] {
                let reference = entry(&fresh, pow);
                assert_same_mean(&entry(&left, pow), &reference, 4.0, "QO vs O");
                assert_same_mean(&entry(&right, pow), &reference, 4.0, "OQ vs O");
            }
            // E[O_ij] = 0 and E[O_ij²] = 1/p
            let (m1, s1) = mean_and_se(&entry(&samples, 1));
            let (m2, s2) = mean_and_se(&entry(&samples, 2));
            assert!(m1.abs() <= 4.0 * s1, "mean of entry ({i},{j}) is {m1}");
            assert!((m2 - 1.0 / p as f64).abs() <= 4.0 * s2, "second moment of entry ({i},{j}) is {m2}");
        }
    }
}

#[test]
fn haar_moments_at_p_50() {
    let p = 50;
    let mut rng = RngStream::new(5, 0).rng();
    let mut first = vec![0.0; 2000];
    let mut second = vec![0.0; 2000];
    for k in 0..2000 {
        let o = haar_orthogonal(&mut rng, p).unwrap();
        first[k] = o[(3, 7)];
        second[k] = o[(3, 7)].powi(2);
    }
    let (m1, s1) = mean_and_se(&first);
    let (m2, s2) = mean_and_se(&second);
    assert!(m1.abs() <= 4.0 * s1);
    assert!((m2 - 1.0 / p as f64).abs() <= 4.0 * s2);
}
