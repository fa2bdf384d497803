use megae::experiment::{baseline_knn, baseline_mean, synthesize, SyntheticSpec};
use megae::frame::{apply_filter, build_frame, FilterBank, FilterConfig, FrameSpec};
use megae::graph::{generate_mask, normalized_laplacian, CountingOperator, Graph, MaskMatrix, Mechanism};
use megae::metrics::rmse;
use megae::model::{
    entropy_loss, forward, impute, train, GraphSample, LossKind, MaskedSample, ModelDims, ModelParams, TrainConfig,
    LEAKY_SLOPE,
};
use megae::oracle::{approximation_bound, eigendecompose, parseval_check, spectrum_report, wavelet_entropy};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

/// Erdos-Renyi graph; isolated nodes are allowed.
fn er_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, edges).unwrap()
}

fn matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

fn default_bank() -> &'static (FrameSpec, FilterBank) {
    static BANK: OnceLock<(FrameSpec, FilterBank)> = OnceLock::new();
    BANK.get_or_init(|| {
        let spec = FrameSpec::default();
        let bank = FilterBank::fit(&build_frame(&spec).unwrap(), &FilterConfig::default()).unwrap();
        (spec, bank)
    })
}

fn mechanism() -> impl Strategy<Value = Mechanism> {
    prop_oneof![Just(Mechanism::Mcar), Just(Mechanism::Mar), Just(Mechanism::Mnar)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adjacency_and_degrees(n in 1usize..40, p in 0.0f64..0.6, seed: u64) {
        let g = er_graph(n, p, seed);
        let a = g.adjacency_dense();
        for i in 0..n {
            prop_assert_eq!(a[[i, i]], 0.0);
            for j in 0..n {
                prop_assert_eq!(a[[i, j]], a[[j, i]]);
            }
            let incident = g.edges().iter().filter(|&&(u, v)| u == i || v == i).count();
            prop_assert_eq!(g.degree()[i], incident);
        }
    }

    #[test]
    fn laplacian_matches_dense_and_spectrum_is_bounded(n in 1usize..=64, p in 0.0f64..0.5, seed: u64) {
        let g = er_graph(n, p, seed);
        let l = normalized_laplacian(&g);
        let dense = l.to_dense();
        let deg = g.degree();
        let a = g.adjacency_dense();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((dense[[i, j]] - dense[[j, i]]).abs() < 1e-12);
                let expected = if deg[i] == 0 || deg[j] == 0 {
                    if i == j { 1.0 } else { 0.0 }
                } else {
                    let id = if i == j { 1.0 } else { 0.0 };
                    id - a[[i, j]] / ((deg[i] * deg[j]) as f64).sqrt()
                };
                prop_assert!((dense[[i, j]] - expected).abs() < 1e-12);
            }
        }
        let v: Vec<f64> = matrix(n, 1, seed ^ 1).iter().copied().collect();
        let fast = l.spmv(&v).unwrap();
        let slow = dense.dot(&Array1::from(v));
        for (x, y) in fast.iter().zip(slow.iter()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let sd = eigendecompose(&l).unwrap();
        for &lambda in &sd.eigenvalues {
            prop_assert!((-1e-9..=2.0 + 1e-9).contains(&lambda));
        }
    }

    #[test]
    fn masks_are_pure_functions_of_their_inputs(rows in 1usize..30, cols in 1usize..6, rate in 0.0f64..0.9, mech in mechanism(), seed: u64) {
        let x = matrix(rows, cols, seed);
        let a = generate_mask(x.view(), mech, rate, seed).unwrap();
        let b = generate_mask(x.view(), mech, rate, seed).unwrap();
        prop_assert_eq!(a.shape(), (rows, cols));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn entropy_ranges_and_bound(n in 2usize..=40, p in 0.05f64..0.6, seed: u64) {
        let g = er_graph(n, p, seed);
        let sd = eigendecompose(&normalized_laplacian(&g)).unwrap();
        let frame = build_frame(&FrameSpec::default()).unwrap();
        let kernels = frame.kernels();
        let x = matrix(n, 1, seed).column(0).to_owned();
        let r = spectrum_report(x.view(), &sd, &kernels).unwrap();
        prop_assert!(r.spectral_energies.iter().all(|&e| e >= 0.0));
        prop_assert!(r.spectral_entropy >= -1e-12 && r.spectral_entropy <= (n as f64).ln() + 1e-12);
        let xi_w = wavelet_entropy(x.view(), &sd, &kernels).unwrap();
        prop_assert!(xi_w >= -1e-12 && xi_w <= (kernels.len() as f64).ln() + 1e-12);
        prop_assert!((r.spectral_entropy - xi_w).abs() <= approximation_bound(&kernels, &sd.eigenvalues) + 1e-9);
        let (ew, es) = parseval_check(x.view(), &sd, &kernels).unwrap();
        prop_assert!((ew - es).abs() / es < 1e-6);
    }

    #[test]
    fn fitted_filters_track_the_oracle(n in 2usize..=64, p in 0.05f64..0.5, seed: u64) {
        let (spec, bank) = default_bank();
        let g = er_graph(n, p, seed);
        let l = normalized_laplacian(&g);
        let sd = eigendecompose(&l).unwrap();
        let frame = build_frame(spec).unwrap();
        let z = matrix(n, 3, seed ^ 7);
        let mut energy = Array1::<f64>::zeros(3);
        for (m, pf) in bank.encoder.iter().enumerate() {
            let counter = CountingOperator::new(&l);
            let fast = apply_filter(pf, &counter, z.view()).unwrap();
            prop_assert_eq!(counter.column_products(), pf.order() * 3);
            for j in 0..3 {
                let exact = megae::oracle::exact_wavelet_transform(z.column(j), &sd, &frame.kernel(m)).unwrap();
                let dev = (&exact - &fast.column(j)).iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let zinf = z.column(j).iter().fold(0.0f64, |a, v| a.max(v.abs()));
                // Holds up to a factor sqrt(N) in general; typical signals sit well inside it.
                prop_assert!(dev <= pf.fit_error * zinf * (n as f64).sqrt() + 1e-8);
                energy[j] += fast.column(j).dot(&fast.column(j));
            }
        }
        for j in 0..3 {
            let norm2 = z.column(j).dot(&z.column(j));
            prop_assert!(((energy[j] - norm2) / norm2).abs() <= 2.0 * bank.fit_budget());
        }
    }

    #[test]
    fn model_losses_and_passthrough(n in 2usize..24, seed: u64, keep in 0.1f64..0.95) {
        let bank = FilterBank::fit(&build_frame(&FrameSpec::with_channels(4)).unwrap(), &FilterConfig { order: 12, ..FilterConfig::default() }).unwrap();
        let g = er_graph(n, 0.3, seed);
        let l = normalized_laplacian(&g);
        let params = ModelParams::init(ModelDims { channels: 4, d_in: 3, h1: 5, h2: 4, h3: 3 }, LEAKY_SLOPE, seed);
        let x = matrix(n, 3, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let mask = MaskMatrix::new(Array2::from_shape_simple_fn((n, 3), || rng.random::<f64>() < keep));
        let st = forward(&params, &l, &bank, &x, &mask).unwrap();
        let ls = entropy_loss(&st.z2);
        prop_assert!(ls >= -1e-12 && ls <= 4f64.ln() + 1e-12);
        let lr = megae::model::reconstruction_loss(&st.x_tilde, &x, &mask, LossKind::Norm);
        prop_assert!(lr >= 0.0);
        let out = impute(&params, &l, &bank, &x, &mask).unwrap();
        for ((o, v), &seen) in out.iter().zip(x.iter()).zip(mask.observed().iter()) {
            if seen {
                prop_assert_eq!(o, v);
            }
        }
    }

    #[test]
    fn baselines_keep_observed_entries_and_rmse_ignores_them(rows in 2usize..30, cols in 1usize..5, seed: u64, k in 1usize..6) {
        let x = matrix(rows, cols, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 9);
        let mut observed = Array2::from_shape_simple_fn((rows, cols), || rng.random::<f64>() < 0.7);
        observed[[0, 0]] = false;
        let mask = MaskMatrix::new(observed);
        for out in [baseline_mean(&x, &mask), baseline_knn(&x, &mask, k)] {
            for ((o, v), &seen) in out.iter().zip(x.iter()).zip(mask.observed().iter()) {
                if seen {
                    prop_assert_eq!(o, v);
                }
            }
            let base = rmse(&out, &x, &mask).unwrap();
            let mut disturbed = out.clone();
            for (d, &seen) in disturbed.iter_mut().zip(mask.observed().iter()) {
                if seen {
                    *d += 100.0;
                }
            }
            prop_assert_eq!(rmse(&disturbed, &x, &mask).unwrap(), base);
        }
    }
}

#[test]
fn entropy_term_raises_latent_entropy() {
    let data =
        synthesize(&SyntheticSpec { graphs: 10, max_nodes: 30, d_features: 4, ..SyntheticSpec::default() }).unwrap();
    let spec = FrameSpec::with_channels(6);
    let bank = FilterBank::fit(&build_frame(&spec).unwrap(), &FilterConfig::default()).unwrap();
    let samples: Vec<GraphSample> = data
        .graphs
        .iter()
        .map(|g| GraphSample {
            laplacian: normalized_laplacian(&g.graph),
            features: g.features.values().clone(),
            known: None,
        })
        .collect();
    let val: Vec<MaskedSample> = samples[8..]
        .iter()
        .enumerate()
        .map(|(i, s)| MaskedSample {
            laplacian: s.laplacian.clone(),
            features: s.features.clone(),
            mask: generate_mask(s.features.view(), Mechanism::Mcar, 0.1, i as u64).unwrap(),
            scored: None,
        })
        .collect();
    let run = |gamma: f64| {
        let cfg = TrainConfig { gamma, epochs: 30, learning_rate: 1e-2, ..TrainConfig::default() };
        let t = train(&bank, &samples[..8], &val, &cfg).unwrap().trace;
        t.entropy.iter().sum::<f64>() / t.entropy.len() as f64
    };
    let (with, without) = (run(1.0), run(0.0));
    assert!(with >= without, "{with} < {without}");
}
