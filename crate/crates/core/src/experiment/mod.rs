//! End-to-end imputation experiments: splits, masks, scaling, training,
//! baselines, entropy measurements and frame certificates.

pub mod baseline;
mod certify;
pub mod dataset;
pub mod synth;

pub use baseline::{baseline_knn, baseline_mean};
pub use certify::{certify, certify_laplacians, Certificates};
pub use dataset::{load_manifest, write_dataset, DataError, Dataset, GraphRecord};
pub use synth::{synthesize, SyntheticSpec};

use crate::frame::{build_frame, FilterBank, FilterConfig, FrameError, FrameSpec};
use crate::graph::{
    generate_mask, normalized_laplacian, split_dataset, GraphError, Laplacian, MaskMatrix, Mechanism, Proportions,
};
use crate::metrics::{hidden_squared_error, pooled_rmse, MetricError};
use crate::model::{impute, train, GraphSample, MaskedSample, ModelError, ModelParams, TrainConfig, TrainTrace};
use crate::oracle::{eigendecompose, spectral_entropy, SpectralDecomposition, MIN_ENERGY, ORACLE_MAX_NODES};
use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Instant;
use thiserror::Error;

pub const METHOD_MEGAE: &str = "megae";
pub const METHOD_NO_ENTROPY: &str = "megae_no_entropy";
pub const METHOD_MEAN: &str = "mean";
pub const METHOD_KNN: &str = "knn";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl ExperimentError {
    /// Process exit status: 2 for configuration errors, 3 for data errors,
    /// 4 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Data(_) | ExperimentError::Metric(_) => 3,
            ExperimentError::Graph(e) => graph_code(e),
            ExperimentError::Frame(e) => frame_code(e),
            ExperimentError::Model(e) => match e {
                ModelError::Config(_) => 2,
                ModelError::Mask(g) => graph_code(g),
                ModelError::Filter(f) => frame_code(f),
                ModelError::ShapeMismatch { .. } | ModelError::Checkpoint(_) | ModelError::Io(_) => 3,
                ModelError::NonFiniteGradient { .. } | ModelError::Diverged { .. } => 4,
            },
            ExperimentError::Numerical(_) => 4,
        }
    }
}

fn graph_code(e: &GraphError) -> u8 {
    match e {
        GraphError::InvalidRate(_) | GraphError::InvalidProportions(_) => 2,
        _ => 3,
    }
}

fn frame_code(e: &FrameError) -> u8 {
    match e {
        FrameError::IllConditioned(_) | FrameError::FitTolerance { .. } | FrameError::NegativeResidual { .. } => 4,
        FrameError::DimensionMismatch { .. } => 3,
        _ => 2,
    }
}

/// SplitMix64 step, used to derive independent seeds from one base seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x6a09_e667_f3bc_c909);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub frame: FrameSpec,
    pub filters: FilterConfig,
    pub train: TrainConfig,
    pub mechanism: Mechanism,
    pub rate: f64,
    pub trials: usize,
    pub seed: u64,
    pub knn_k: usize,
    /// Also train with the entropy term switched off, from the same seed.
    pub ablation: bool,
    /// Min-max scale every column using the training graphs.
    pub scale: bool,
    /// Feed the model features minus their training column means, so that a
    /// zeroed hidden entry reads as an average value. Outputs are shifted
    /// back before scoring.
    pub center: bool,
    pub proportions: Proportions,
    /// Graphs used for the frame certificates.
    pub certificate_graphs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            frame: FrameSpec::default(),
            filters: FilterConfig::default(),
            train: TrainConfig::default(),
            mechanism: Mechanism::Mcar,
            rate: 0.1,
            trials: 5,
            seed: 0,
            knn_k: 5,
            ablation: false,
            scale: true,
            center: true,
            proportions: Proportions::default(),
            certificate_graphs: 20,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if !(self.rate > 0.0 && self.rate < 1.0) {
            return bad(format!("missing rate must lie in (0, 1), got {}", self.rate));
        }
        if self.trials == 0 {
            return bad("at least one trial is required".into());
        }
        if self.knn_k == 0 {
            return bad("k for the KNN baseline must be positive".into());
        }
        self.frame.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        self.train.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok(())
    }
}

/// Per-column affine map onto `[0, 1]` fitted on a set of matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit<'a>(mats: impl IntoIterator<Item = &'a Array2<f64>>) -> Self {
        let mut min: Vec<f64> = Vec::new();
        let mut max: Vec<f64> = Vec::new();
        for m in mats {
            if min.is_empty() {
                min = vec![f64::INFINITY; m.ncols()];
                max = vec![f64::NEG_INFINITY; m.ncols()];
            }
            for row in m.rows() {
                for (d, &v) in row.iter().enumerate() {
                    min[d] = min[d].min(v);
                    max[d] = max[d].max(v);
                }
            }
        }
        Self { min, max }
    }

    pub fn identity(d: usize) -> Self {
        Self { min: vec![0.0; d], max: vec![1.0; d] }
    }

    pub fn transform(&self, m: &Array2<f64>) -> Array2<f64> {
        let mut out = m.clone();
        for mut row in out.rows_mut() {
            for (d, v) in row.iter_mut().enumerate() {
                let range = self.max[d] - self.min[d];
                let range = if range > 0.0 { range } else { 1.0 };
                *v = (*v - self.min[d]) / range;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub graphs: usize,
    pub d_features: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub total_nodes: usize,
}

impl DatasetSummary {
    pub fn of(data: &Dataset) -> Self {
        let sizes: Vec<usize> = data.graphs.iter().map(|g| g.graph.n_nodes()).collect();
        Self {
            graphs: data.len(),
            d_features: data.d_features(),
            min_nodes: sizes.iter().copied().min().unwrap_or(0),
            max_nodes: sizes.iter().copied().max().unwrap_or(0),
            total_nodes: sizes.iter().sum(),
        }
    }
}

/// Mean spectral entropy of the test features for one method, and its
/// relative change from the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyShift {
    pub entropy: f64,
    pub relative_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub seed: u64,
    /// Graph counts (multi-graph) or entry counts (single graph).
    pub split_sizes: [usize; 3],
    pub hidden_entries: usize,
    pub rmse: BTreeMap<String, f64>,
    pub truth_entropy: Option<f64>,
    pub entropy: BTreeMap<String, EntropyShift>,
    pub traces: BTreeMap<String, TrainTrace>,
    pub errors: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub mean_rmse: f64,
    pub std_rmse: f64,
    pub completed_trials: usize,
    pub mean_entropy_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterFit {
    pub channel: usize,
    pub encoder_error: f64,
    pub decoder_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    /// How graphs are used: `inductive` (multi-graph) or `single_graph`.
    pub setting: String,
    /// Feature space RMSE and entropy are measured in.
    pub rmse_space: String,
    pub frame_constant: f64,
    pub filter_fit: Vec<FilterFit>,
    pub trials: Vec<TrialReport>,
    pub summary: BTreeMap<String, MethodSummary>,
    pub certificates: Certificates,
}

impl RunReport {
    pub fn mean_rmse(&self, method: &str) -> Option<f64> {
        self.summary.get(method).filter(|s| s.completed_trials > 0).map(|s| s.mean_rmse)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `trial,method,rmse`, one row per completed (trial, method).
    pub fn rmse_csv(&self) -> String {
        let mut out = String::from("trial,method,rmse\n");
        for t in &self.trials {
            for (m, r) in &t.rmse {
                out.push_str(&format!("{},{m},{r}\n", t.trial));
            }
        }
        out
    }

    /// Per-epoch training traces. Epoch 0 is the initialization and has no
    /// loss values.
    pub fn traces_csv(&self) -> String {
        let mut out = String::from("trial,method,epoch,reconstruction,entropy,val_rmse,output_entropy\n");
        for t in &self.trials {
            for (m, tr) in &t.traces {
                for e in 0..tr.val_rmse.len() {
                    let loss = |v: &Vec<f64>| if e == 0 { String::new() } else { v[e - 1].to_string() };
                    out.push_str(&format!(
                        "{},{m},{e},{},{},{},{}\n",
                        t.trial,
                        loss(&tr.reconstruction),
                        loss(&tr.entropy),
                        tr.val_rmse[e],
                        tr.output_entropy[e]
                    ));
                }
            }
        }
        out
    }

    /// Trials in which `method` failed to produce imputations.
    pub fn failed_trials(&self, method: &str) -> usize {
        self.trials.iter().filter(|t| t.errors.contains_key(method)).count()
    }
}

/// Wall-clock seconds, kept apart from the report so reports stay
/// byte-reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub setup_seconds: f64,
    pub trial_seconds: Vec<f64>,
    pub certificate_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub timings: Timings,
    pub filters: FilterBank,
    /// Selected parameters of the last trial that trained successfully.
    pub params: Option<ModelParams>,
}

struct Prepared<'a> {
    data: &'a Dataset,
    laplacians: Vec<Laplacian>,
    spectra: Vec<Option<SpectralDecomposition>>,
}

impl<'a> Prepared<'a> {
    fn new(data: &'a Dataset) -> Result<Self, ExperimentError> {
        let laplacians: Vec<Laplacian> = data.graphs.iter().map(|g| normalized_laplacian(&g.graph)).collect();
        let spectra = laplacians
            .iter()
            .map(|l| if l.dim() <= ORACLE_MAX_NODES { eigendecompose(l).ok() } else { None })
            .collect();
        Ok(Self { data, laplacians, spectra })
    }
}

/// One graph to impute at test time.
struct TestCase<'a> {
    laplacian: &'a Laplacian,
    spectrum: Option<&'a SpectralDecomposition>,
    truth: Array2<f64>,
    mask: MaskMatrix,
    scored: MaskMatrix,
}

fn mean_column_entropy(x: &Array2<f64>, sd: &SpectralDecomposition) -> Option<(f64, usize)> {
    let mut sum = 0.0;
    let mut count = 0;
    for col in x.columns() {
        if col.dot(&col) > MIN_ENERGY {
            sum += spectral_entropy(col, sd).ok()?;
            count += 1;
        }
    }
    Some((sum, count))
}

fn entropy_over(cases: &[TestCase<'_>], outputs: &[Array2<f64>]) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0;
    for (c, out) in cases.iter().zip(outputs) {
        let (s, n) = mean_column_entropy(out, c.spectrum?)?;
        sum += s;
        count += n;
    }
    (count > 0).then(|| sum / count as f64)
}

fn score(cases: &[TestCase<'_>], outputs: &[Array2<f64>]) -> Result<f64, MetricError> {
    let parts = cases
        .iter()
        .zip(outputs)
        .map(|(c, out)| hidden_squared_error(out, &c.truth, &c.scored))
        .collect::<Result<Vec<_>, _>>()?;
    pooled_rmse(parts)
}

struct TrialData<'a> {
    split_sizes: [usize; 3],
    /// Subtracted from features on the model side.
    shift: Array1<f64>,
    train: Vec<GraphSample>,
    val: Vec<MaskedSample>,
    test: Vec<TestCase<'a>>,
}

fn multi_graph_trial<'a>(
    prep: &'a Prepared<'_>,
    cfg: &ExperimentConfig,
    seed: u64,
    scaler_out: &mut MinMaxScaler,
) -> Result<TrialData<'a>, ExperimentError> {
    let split = split_dataset(prep.data.len(), cfg.proportions, derive_seed(seed, 1))?;
    let features = |i: usize| prep.data.graphs[i].features.values();
    let scaler = if cfg.scale {
        MinMaxScaler::fit(split.train.iter().map(|&i| features(i)))
    } else {
        MinMaxScaler::identity(prep.data.d_features())
    };
    let masked = |i: usize, stream: u64| -> Result<(Array2<f64>, MaskMatrix), ExperimentError> {
        let x = scaler.transform(features(i));
        let mask = generate_mask(x.view(), cfg.mechanism, cfg.rate, derive_seed(seed, stream))?;
        Ok((x, mask))
    };
    let scaled: Vec<Array2<f64>> = split.train.iter().map(|&i| scaler.transform(features(i))).collect();
    let shift = if cfg.center { column_means(scaled.iter()) } else { Array1::zeros(prep.data.d_features()) };
    let train = split
        .train
        .iter()
        .zip(scaled)
        .map(|(&i, x)| GraphSample { laplacian: prep.laplacians[i].clone(), features: x - &shift, known: None })
        .collect();
    let mut val = Vec::with_capacity(split.val.len());
    for &i in &split.val {
        let (x, mask) = masked(i, 1_000_000 + i as u64)?;
        val.push(MaskedSample { laplacian: prep.laplacians[i].clone(), features: x - &shift, mask, scored: None });
    }
    let mut test = Vec::with_capacity(split.test.len());
    for &i in &split.test {
        let (x, mask) = masked(i, 2_000_000 + i as u64)?;
        test.push(TestCase {
            laplacian: &prep.laplacians[i],
            spectrum: prep.spectra[i].as_ref(),
            truth: x,
            scored: mask.clone(),
            mask,
        });
    }
    *scaler_out = scaler;
    Ok(TrialData { split_sizes: split.sizes(), shift, train, val, test })
}

/// Single-graph mode: the generated mask hides the test entries; the
/// remaining entries are divided into training and validation entries.
fn single_graph_trial<'a>(
    prep: &'a Prepared<'_>,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<TrialData<'a>, ExperimentError> {
    let raw = prep.data.graphs[0].features.values();
    let x = if cfg.scale { MinMaxScaler::fit([raw]).transform(raw) } else { raw.clone() };
    let test_mask = generate_mask(x.view(), cfg.mechanism, cfg.rate, derive_seed(seed, 2))?;
    let mut known: Vec<(usize, usize)> =
        test_mask.observed().indexed_iter().filter(|(_, &o)| o).map(|(ix, _)| ix).collect();
    known.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 3)));
    let p = cfg.proportions;
    let n_val = ((p.val / (p.train + p.val)) * known.len() as f64).round() as usize;
    if n_val == 0 || n_val >= known.len() {
        return Err(ExperimentError::Config(format!(
            "{} observed entries cannot be split for validation",
            known.len()
        )));
    }
    let mut train_known = test_mask.observed().clone();
    for &ix in &known[..n_val] {
        train_known[ix] = false;
    }
    let train_known = MaskMatrix::new(train_known);
    // Validation scores only the held-out validation entries.
    let mut val_scored = Array2::from_elem(x.dim(), true);
    for &ix in &known[..n_val] {
        val_scored[ix] = false;
    }
    let laplacian = &prep.laplacians[0];
    let hidden_test = test_mask.hidden_count();
    let shift = if cfg.center { observed_means(&x, &train_known) } else { Array1::zeros(x.ncols()) };
    let model_x = &x - &shift;
    Ok(TrialData {
        split_sizes: [known.len() - n_val, n_val, hidden_test],
        shift,
        train: vec![GraphSample {
            laplacian: laplacian.clone(),
            features: model_x.clone(),
            known: Some(train_known.clone()),
        }],
        val: vec![MaskedSample {
            laplacian: laplacian.clone(),
            features: model_x,
            mask: train_known,
            scored: Some(MaskMatrix::new(val_scored)),
        }],
        test: vec![TestCase {
            laplacian,
            spectrum: prep.spectra[0].as_ref(),
            truth: x,
            scored: test_mask.clone(),
            mask: test_mask,
        }],
    })
}

fn column_means<'a>(mats: impl Iterator<Item = &'a Array2<f64>>) -> Array1<f64> {
    let mut sum: Option<Array1<f64>> = None;
    let mut rows = 0;
    for m in mats {
        let s = m.sum_axis(Axis(0));
        sum = Some(match sum {
            Some(acc) => acc + s,
            None => s,
        });
        rows += m.nrows();
    }
    sum.map(|s| s / rows.max(1) as f64).unwrap_or_else(|| Array1::zeros(0))
}

/// Column means over observed entries; zero for a column with none.
fn observed_means(x: &Array2<f64>, mask: &MaskMatrix) -> Array1<f64> {
    Array1::from_iter((0..x.ncols()).map(|j| {
        let (sum, n) =
            (0..x.nrows()).filter(|&i| mask.is_observed(i, j)).fold((0.0, 0), |(s, n), i| (s + x[[i, j]], n + 1));
        if n > 0 {
            sum / n as f64
        } else {
            0.0
        }
    }))
}

fn fit_filters(cfg: &ExperimentConfig) -> Result<(f64, FilterBank), ExperimentError> {
    let frame = build_frame(&cfg.frame)?;
    Ok((frame.frame_constant(), FilterBank::fit(&frame, &cfg.filters)?))
}

/// Runs `cfg.trials` independent trials, each with a fresh split and fresh
/// masks. A divergent training run is recorded in its trial and does not
/// abort the experiment.
pub fn run_experiment(data: &Dataset, cfg: &ExperimentConfig) -> Result<RunOutput, ExperimentError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(ExperimentError::Config("dataset has no graphs".into()));
    }
    let t0 = Instant::now();
    let (frame_constant, filters) = fit_filters(cfg)?;
    let prep = Prepared::new(data)?;
    let single = data.len() == 1;
    let mut timings = Timings { setup_seconds: t0.elapsed().as_secs_f64(), ..Timings::default() };

    let mut trials = Vec::with_capacity(cfg.trials);
    let mut last_params = None;
    for t in 0..cfg.trials {
        let start = Instant::now();
        let seed = derive_seed(cfg.seed, t as u64);
        let mut scaler = MinMaxScaler::identity(data.d_features());
        let td = if single {
            single_graph_trial(&prep, cfg, seed)?
        } else {
            multi_graph_trial(&prep, cfg, seed, &mut scaler)?
        };
        let hidden_entries = td.test.iter().map(|c| c.scored.hidden_count()).sum();
        let mut report = TrialReport {
            trial: t,
            seed,
            split_sizes: td.split_sizes,
            hidden_entries,
            rmse: BTreeMap::new(),
            truth_entropy: entropy_over(&td.test, &td.test.iter().map(|c| c.truth.clone()).collect::<Vec<_>>()),
            entropy: BTreeMap::new(),
            traces: BTreeMap::new(),
            errors: BTreeMap::new(),
        };
        let mut outputs: BTreeMap<String, Vec<Array2<f64>>> = BTreeMap::new();

        let mut runs = vec![(METHOD_MEGAE, cfg.train.gamma)];
        if cfg.ablation {
            runs.push((METHOD_NO_ENTROPY, 0.0));
        }
        for (name, gamma) in runs {
            let tc = TrainConfig { gamma, seed, ..cfg.train.clone() };
            match train(&filters, &td.train, &td.val, &tc) {
                Ok(model) => {
                    let outs = td
                        .test
                        .iter()
                        .map(|c| {
                            impute(&model.params, c.laplacian, &filters, &(&c.truth - &td.shift), &c.mask)
                                .map(|x| x + &td.shift)
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    report.traces.insert(name.to_string(), model.trace);
                    outputs.insert(name.to_string(), outs);
                    if name == METHOD_MEGAE {
                        last_params = Some(model.params);
                    }
                }
                Err(ModelError::Diverged { epoch, loss, .. }) => {
                    log::warn!("trial {t}: {name} diverged at epoch {epoch}");
                    report.errors.insert(name.to_string(), format!("diverged at epoch {epoch} (loss {loss})"));
                }
                Err(e) => return Err(e.into()),
            }
        }
        outputs.insert(METHOD_MEAN.into(), td.test.iter().map(|c| baseline_mean(&c.truth, &c.mask)).collect());
        outputs.insert(METHOD_KNN.into(), td.test.iter().map(|c| baseline_knn(&c.truth, &c.mask, cfg.knn_k)).collect());

        for (name, outs) in &outputs {
            report.rmse.insert(name.clone(), score(&td.test, outs)?);
            if let (Some(truth), Some(h)) = (report.truth_entropy, entropy_over(&td.test, outs)) {
                let relative_change = if truth > 0.0 { (h - truth) / truth } else { 0.0 };
                report.entropy.insert(name.clone(), EntropyShift { entropy: h, relative_change });
            }
        }
        log::info!("trial {t}: {:?}", report.rmse);
        trials.push(report);
        timings.trial_seconds.push(start.elapsed().as_secs_f64());
    }

    let start = Instant::now();
    let certificates = certify(data, &cfg.frame, &filters, cfg.certificate_graphs)?;
    timings.certificate_seconds = start.elapsed().as_secs_f64();

    let report = RunReport {
        config: cfg.clone(),
        dataset: DatasetSummary::of(data),
        setting: if single { "single_graph".into() } else { "inductive".into() },
        rmse_space: if cfg.scale { "min-max scaled, fit on training data".into() } else { "raw".into() },
        frame_constant,
        filter_fit: filters
            .encoder
            .iter()
            .zip(&filters.decoder)
            .map(|(e, d)| FilterFit { channel: e.channel, encoder_error: e.fit_error, decoder_error: d.fit_error })
            .collect(),
        summary: summarize(&trials),
        trials,
        certificates,
    };
    Ok(RunOutput { report, timings, filters, params: last_params })
}

fn summarize(trials: &[TrialReport]) -> BTreeMap<String, MethodSummary> {
    let mut names: Vec<&String> = trials.iter().flat_map(|t| t.rmse.keys().chain(t.errors.keys())).collect();
    names.sort();
    names.dedup();
    names
        .into_iter()
        .map(|name| {
            let vals: Array1<f64> = trials.iter().filter_map(|t| t.rmse.get(name).copied()).collect();
            let n = vals.len();
            let mean = if n > 0 { vals.sum() / n as f64 } else { f64::NAN };
            let std = if n > 1 { vals.std(1.0) } else { 0.0 };
            let shifts: Vec<f64> =
                trials.iter().filter_map(|t| t.entropy.get(name).map(|e| e.relative_change)).collect();
            let mean_entropy_change = (!shifts.is_empty()).then(|| shifts.iter().sum::<f64>() / shifts.len() as f64);
            (name.clone(), MethodSummary { mean_rmse: mean, std_rmse: std, completed_trials: n, mean_entropy_change })
        })
        .collect()
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub channels: usize,
    pub gamma: f64,
    pub mean_rmse: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub points: Vec<SweepPoint>,
    pub reports: Vec<Option<RunReport>>,
}

impl SweepOutput {
    /// `channels,gamma,mean_rmse`, one row per grid point; failed points
    /// have an empty RMSE field.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("channels,gamma,mean_rmse\n");
        for p in &self.points {
            let rmse = p.mean_rmse.map(|r| r.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", p.channels, p.gamma, rmse));
        }
        out
    }
}

/// Runs one experiment per `(channels, gamma)` pair. Failing points are
/// logged and recorded; the sweep continues.
pub fn sweep(
    data: &Dataset,
    base: &ExperimentConfig,
    channels: &[usize],
    gammas: &[f64],
) -> Result<SweepOutput, ExperimentError> {
    if channels.is_empty() || gammas.is_empty() {
        return Err(ExperimentError::Config("sweep grid is empty".into()));
    }
    let mut points = Vec::new();
    let mut reports = Vec::new();
    for &m in channels {
        for &gamma in gammas {
            let cfg = ExperimentConfig {
                frame: FrameSpec { channels: m, overlap: base.frame.overlap.min(m), ..base.frame.clone() },
                train: TrainConfig { gamma, ..base.train.clone() },
                ..base.clone()
            };
            match run_experiment(data, &cfg) {
                Ok(out) => {
                    points.push(SweepPoint {
                        channels: m,
                        gamma,
                        mean_rmse: out.report.mean_rmse(METHOD_MEGAE),
                        error: None,
                    });
                    reports.push(Some(out.report));
                }
                Err(e) => {
                    log::error!("sweep point M = {m}, gamma = {gamma}: {e}");
                    points.push(SweepPoint { channels: m, gamma, mean_rmse: None, error: Some(e.to_string()) });
                    reports.push(None);
                }
            }
        }
    }
    Ok(SweepOutput { points, reports })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_data(graphs: usize) -> Dataset {
        synthesize(&SyntheticSpec { graphs, min_nodes: 8, max_nodes: 14, d_features: 3, ..SyntheticSpec::default() })
            .unwrap()
    }

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            frame: FrameSpec::with_channels(3),
            filters: FilterConfig { order: 6, grid: 200, ..FilterConfig::default() },
            train: TrainConfig { h1: 6, h2: 4, h3: 4, epochs: 2, learning_rate: 1e-2, ..TrainConfig::default() },
            trials: 2,
            certificate_graphs: 3,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn seeds_are_spread() {
        assert_ne!(derive_seed(0, 0), derive_seed(0, 1));
        assert_ne!(derive_seed(0, 1), derive_seed(1, 0));
        assert_eq!(derive_seed(5, 7), derive_seed(5, 7));
    }

    #[test]
    fn scaler_maps_training_range_to_unit_interval() {
        let a = ndarray::arr2(&[[1.0, 5.0], [3.0, 5.0]]);
        let b = ndarray::arr2(&[[2.0, 5.0]]);
        let s = MinMaxScaler::fit([&a, &b]);
        assert_eq!(s.transform(&a), ndarray::arr2(&[[0.0, 0.0], [1.0, 0.0]]));
        assert_eq!(s.transform(&b), ndarray::arr2(&[[0.5, 0.0]]));
    }

    #[test]
    fn zero_epoch_run_scores_untrained_model() {
        let data = small_data(12);
        let cfg = ExperimentConfig { trials: 1, train: TrainConfig { epochs: 0, ..small_cfg().train }, ..small_cfg() };
        let out = run_experiment(&data, &cfg).unwrap();
        let trial = &out.report.trials[0];
        assert_eq!(trial.split_sizes, [8, 1, 3]);
        for m in [METHOD_MEGAE, METHOD_MEAN, METHOD_KNN] {
            assert!(trial.rmse[m].is_finite(), "{m}");
        }
        assert_eq!(out.params.unwrap(), ModelParams::init(cfg.train.dims(3, 3), cfg.train.slope, trial.seed));
    }

    #[test]
    fn report_is_reproducible() {
        let data = small_data(12);
        let cfg = ExperimentConfig { ablation: true, ..small_cfg() };
        let a = run_experiment(&data, &cfg).unwrap();
        let b = run_experiment(&data, &cfg).unwrap();
        assert_eq!(a.report.to_json(), b.report.to_json());
        assert_eq!(a.report.trials.len(), 2);
        assert!(a.report.summary.contains_key(METHOD_NO_ENTROPY));
        assert_eq!(a.report.setting, "inductive");
    }

    #[test]
    fn single_graph_mode() {
        let data = synthesize(&SyntheticSpec {
            graphs: 1,
            min_nodes: 40,
            max_nodes: 40,
            d_features: 4,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let cfg = ExperimentConfig { trials: 1, ..small_cfg() };
        let out = run_experiment(&data, &cfg).unwrap();
        assert_eq!(out.report.setting, "single_graph");
        let t = &out.report.trials[0];
        assert_eq!(t.split_sizes.iter().sum::<usize>(), 160);
        assert_eq!(t.hidden_entries, t.split_sizes[2]);
    }

    #[test]
    fn invalid_configs() {
        let data = small_data(12);
        assert!(matches!(
            run_experiment(&data, &ExperimentConfig { rate: 1.0, ..small_cfg() }),
            Err(ExperimentError::Config(_))
        ));
        assert!(matches!(
            run_experiment(&data, &ExperimentConfig { trials: 0, ..small_cfg() }),
            Err(ExperimentError::Config(_))
        ));
        assert!(matches!(
            run_experiment(&small_data(4), &small_cfg()),
            Err(ExperimentError::Graph(GraphError::SplitTooSmall { .. }))
        ));
    }

    #[test]
    fn centering_leaves_baselines_untouched() {
        let data = small_data(12);
        let cfg = ExperimentConfig { trials: 1, train: TrainConfig { epochs: 0, ..small_cfg().train }, ..small_cfg() };
        let a = run_experiment(&data, &cfg).unwrap().report;
        let b = run_experiment(&data, &ExperimentConfig { center: false, ..cfg }).unwrap().report;
        for m in [METHOD_MEAN, METHOD_KNN] {
            assert!((a.trials[0].rmse[m] - b.trials[0].rmse[m]).abs() < 1e-12, "{m}");
        }
        assert_ne!(a.trials[0].rmse[METHOD_MEGAE], b.trials[0].rmse[METHOD_MEGAE]);
    }

    #[test]
    fn csv_sidecars() {
        let data = small_data(12);
        let report = run_experiment(&data, &small_cfg()).unwrap().report;
        let rmse = report.rmse_csv();
        assert_eq!(rmse.lines().count(), 1 + 2 * 3);
        assert!(rmse.lines().nth(1).unwrap().starts_with("0,knn,"));
        let traces = report.traces_csv();
        // two trials, one model each, epochs 0..=2
        assert_eq!(traces.lines().count(), 1 + 2 * 3);
        assert!(traces.lines().nth(1).unwrap().starts_with("0,megae,0,,,"));
        assert_eq!(report.failed_trials(METHOD_MEGAE), 0);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(ExperimentError::Config("x".into()).exit_code(), 2);
        assert_eq!(ExperimentError::Graph(GraphError::InvalidRate(2.0)).exit_code(), 2);
        assert_eq!(ExperimentError::Graph(GraphError::SplitTooSmall { count: 1, sizes: [1, 0, 0] }).exit_code(), 3);
        assert_eq!(ExperimentError::Data(DataError::NoGraphs("m".into())).exit_code(), 3);
        assert_eq!(ExperimentError::Frame(FrameError::IllConditioned("x".into())).exit_code(), 4);
        assert_eq!(ExperimentError::Frame(FrameError::InvalidOrder).exit_code(), 2);
        let diverged = ModelError::Diverged {
            epoch: 1,
            loss: f64::NAN,
            last_good: Box::new(ModelParams::init(small_cfg().train.dims(3, 3), 0.2, 0)),
        };
        assert_eq!(ExperimentError::Model(diverged).exit_code(), 4);
        assert_eq!(ExperimentError::Numerical("x".into()).exit_code(), 4);
    }

    #[test]
    fn sweep_grid() {
        let data = small_data(12);
        let cfg = ExperimentConfig { trials: 1, ..small_cfg() };
        let out = sweep(&data, &cfg, &[3, 4], &[0.0, 1.0]).unwrap();
        assert_eq!(out.points.len(), 4);
        let csv = out.summary_csv();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("channels,gamma,mean_rmse\n3,0,"));
        assert!(sweep(&data, &cfg, &[], &[1.0]).is_err());
        let one = sweep(&data, &cfg, &[3], &[1.0]).unwrap();
        assert_eq!(one.reports.len(), 1);
    }
}
