//! Training runs, spectra and sweeps.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dataset::{generate_dataset, uniform_grid, Dataset, TargetFunction};
use crate::error::{Error, Result};
use crate::model::{Model, ModelSpec, Variant};
use crate::optimizer::{minimize, NmConfig, OptimTrace};
use crate::rng::{SeededUniform, Stream};

pub const SCHEMA_VERSION: u32 = 1;
pub const SAMPLE_SIZES: [usize; 5] = [10, 30, 100, 300, 1000];
pub const ALPHAS: [f64; 3] = [1.0, 3.0, 5.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetParams {
    pub target: TargetFunction,
    #[serde(default = "default_num_samples")]
    pub num_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_num_samples() -> usize {
    100
}

/// θ drawn uniformly on `[low, high)` from the θ stream of `seed`, unless
/// an explicit starting point is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaInit {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "neg_one")]
    pub low: f64,
    #[serde(default = "one")]
    pub high: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
}

fn neg_one() -> f64 {
    -1.0
}

fn one() -> f64 {
    1.0
}

impl Default for ThetaInit {
    fn default() -> Self {
        Self {
            seed: 0,
            low: -1.0,
            high: 1.0,
            theta: None,
        }
    }
}

impl ThetaInit {
    pub fn draw(&self, n: usize) -> Vec<f64> {
        if let Some(t) = &self.theta {
            return t.clone();
        }
        let mut rng = SeededUniform::new(self.seed, Stream::ThetaInit);
        (0..n).map(|_| rng.uniform(self.low, self.high)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisParams {
    /// Points of the fit curve and of the spectrum quadrature.
    #[serde(default = "default_fit_points")]
    pub fit_points: usize,
    #[serde(default = "default_test_points")]
    pub test_points: usize,
    #[serde(default = "default_nu_max")]
    pub nu_max: f64,
    #[serde(default = "default_nu_step")]
    pub nu_step: f64,
    #[serde(default = "yes")]
    pub spectrum: bool,
}

fn default_fit_points() -> usize {
    401
}

fn default_test_points() -> usize {
    1000
}

fn default_nu_max() -> f64 {
    15.0
}

fn default_nu_step() -> f64 {
    0.25
}

fn yes() -> bool {
    true
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            fit_points: default_fit_points(),
            test_points: default_test_points(),
            nu_max: default_nu_max(),
            nu_step: default_nu_step(),
            spectrum: true,
        }
    }
}

impl AnalysisParams {
    pub fn nu_grid(&self) -> Vec<f64> {
        frequency_grid(self.nu_max, self.nu_step)
    }
}

pub fn frequency_grid(nu_max: f64, nu_step: f64) -> Vec<f64> {
    let n = (nu_max / nu_step + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * nu_step).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: ModelSpec,
    #[serde(default)]
    pub optimizer: NmConfig,
    pub dataset: DatasetParams,
    #[serde(default)]
    pub theta_init: ThetaInit,
    #[serde(default)]
    pub analysis: AnalysisParams,
}

impl ExperimentConfig {
    pub fn new(model: ModelSpec, target: TargetFunction) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model,
            optimizer: NmConfig::default(),
            dataset: DatasetParams {
                target,
                num_samples: default_num_samples(),
                seed: 0,
            },
            theta_init: ThetaInit::default(),
            analysis: AnalysisParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        self.optimizer.validate()?;
        self.dataset.target.validate()?;
        if self.dataset.num_samples == 0 {
            return Err(Error::invalid("num_samples", "must be at least 1"));
        }
        if !(self.theta_init.low < self.theta_init.high) {
            return Err(Error::invalid("theta_init", "low must be below high"));
        }
        if let Some(t) = &self.theta_init.theta {
            let n = self.model.num_params();
            if t.len() != n {
                return Err(Error::invalid(
                    "theta_init.theta",
                    format!("has {} entries, the model needs {n}", t.len()),
                ));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("theta_init.theta", "entries must be finite"));
            }
        }
        if self.analysis.fit_points < 2 || self.analysis.test_points < 1 {
            return Err(Error::invalid("analysis", "grids are too small"));
        }
        if !(self.analysis.nu_step > 0.0) || !(self.analysis.nu_max >= 0.0) {
            return Err(Error::invalid(
                "analysis",
                "frequency grid needs nu_step > 0 and nu_max >= 0",
            ));
        }
        Ok(())
    }

    /// Same experiment with another random restart: the θ seed and, for the
    /// qubit circuit, the Ising seed are replaced. The dataset is unchanged.
    pub fn with_run_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.theta_init.seed = seed;
        if let Variant::QubitBaseline(b) = &mut out.model.variant {
            b.seed = seed;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub nu: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub phase: Vec<f64>,
}

impl Spectrum {
    /// Largest `ν` with `|F̂(ν)| > threshold`, or 0.
    pub fn support(&self, threshold: f64) -> f64 {
        self.nu
            .iter()
            .zip(&self.magnitude)
            .filter(|(_, &m)| m > threshold)
            .map(|(&nu, _)| nu)
            .fold(0.0, f64::max)
    }
}

/// `F̂(ν) = (2π)^{-1/2} ∫ F(x) e^{−2πiνx} dx` by the composite trapezoid
/// rule on the uniform samples `(xs, fs)`.
pub fn fourier_transform_numeric(xs: &[f64], fs: &[f64], nus: &[f64]) -> Result<Spectrum> {
    if xs.len() < 2 || xs.len() != fs.len() {
        return Err(Error::invalid(
            "curve",
            "need at least two samples with matching lengths",
        ));
    }
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let last = xs.len() - 1;
    let mut magnitude = Vec::with_capacity(nus.len());
    let mut phase = Vec::with_capacity(nus.len());
    for &nu in nus {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..last {
            let h = xs[i + 1] - xs[i];
            let a = fs[i] * C64::from_polar(1.0, -2.0 * std::f64::consts::PI * nu * xs[i]);
            let b = fs[i + 1] * C64::from_polar(1.0, -2.0 * std::f64::consts::PI * nu * xs[i + 1]);
            acc += 0.5 * h * (a + b);
        }
        let v = acc * norm;
        magnitude.push(v.norm());
        phase.push(v.arg());
    }
    Ok(Spectrum {
        nu: nus.to_vec(),
        magnitude,
        phase,
    })
}

/// Transform of `f` sampled on `points` uniform points of `[-1, 1]`.
pub fn fourier_transform_fn(
    f: impl Fn(f64) -> f64,
    points: usize,
    nus: &[f64],
) -> Result<Spectrum> {
    let xs = uniform_grid(points);
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    fourier_transform_numeric(&xs, &fs, nus)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median over `thetas` of the largest frequency whose transform exceeds
/// `threshold`. The model is sampled on 401 points and transformed on the
/// half-integer grid `0, ½, …, nu_max`, where every KPO frequency lives.
pub fn spectral_support(
    spec: &ModelSpec,
    thetas: &[Vec<f64>],
    threshold: f64,
    nu_max: f64,
) -> Result<f64> {
    if thetas.is_empty() {
        return Err(Error::invalid("thetas", "need at least one sample"));
    }
    let model = Model::new(spec)?;
    let xs = uniform_grid(401);
    let nus = frequency_grid(nu_max, 0.5);
    let mut supports = Vec::with_capacity(thetas.len());
    for theta in thetas {
        let fs = model.prepare(theta)?.evaluate_scalar(&xs)?;
        supports.push(fourier_transform_numeric(&xs, &fs, &nus)?.support(threshold));
    }
    Ok(median(supports))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub config: ExperimentConfig,
    pub trace: OptimTrace,
    /// Training MSE recomputed at the final θ.
    pub final_cost: f64,
    /// MSE on the uniform test grid.
    pub test_mse: f64,
    pub fit_x: Vec<f64>,
    pub fit_y: Vec<f64>,
    #[serde(default)]
    pub spectrum: Option<Spectrum>,
}

impl TrainingRecord {
    pub fn generalization_gap(&self) -> f64 {
        self.test_mse - self.final_cost
    }
}

pub fn test_mse(
    model: &Model,
    theta: &[f64],
    target: &TargetFunction,
    points: usize,
) -> Result<f64> {
    let xs = uniform_grid(points);
    let ys = xs.iter().map(|&x| target.eval(x)).collect();
    model.mse(
        theta,
        &Dataset {
            x: xs,
            y: ys,
            seed: 0,
            target: target.clone(),
        },
    )
}

pub fn train(config: &ExperimentConfig) -> Result<TrainingRecord> {
    config.validate()?;
    let model = Model::new(&config.model)?;
    let data = generate_dataset(
        &config.dataset.target,
        config.dataset.num_samples,
        config.dataset.seed,
    )?;
    let theta0 = config.theta_init.draw(model.num_params());
    let trace = minimize(
        |theta: &[f64]| model.mse(theta, &data).unwrap_or(f64::NAN),
        &theta0,
        &config.optimizer,
    )?;
    let final_cost = model.mse(&trace.theta, &data)?;
    let test = test_mse(
        &model,
        &trace.theta,
        &config.dataset.target,
        config.analysis.test_points,
    )?;
    let fit_x = uniform_grid(config.analysis.fit_points);
    let fit_y = model.prepare(&trace.theta)?.evaluate_scalar(&fit_x)?;
    let spectrum = if config.analysis.spectrum {
        Some(fourier_transform_numeric(
            &fit_x,
            &fit_y,
            &config.analysis.nu_grid(),
        )?)
    } else {
        None
    };
    Ok(TrainingRecord {
        config: config.clone(),
        trace,
        final_cost,
        test_mse: test,
        fit_x,
        fit_y,
        spectrum,
    })
}

/// Runs the configs on up to `jobs` threads; results come back in input
/// order.
pub fn train_all(configs: &[ExperimentConfig], jobs: usize) -> Vec<Result<TrainingRecord>> {
    let jobs = jobs.clamp(1, configs.len().max(1));
    if jobs == 1 {
        return configs.iter().map(train).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<TrainingRecord>>>> =
        configs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= configs.len() {
                    break;
                }
                let out = train(&configs[i]);
                *slots[i].lock().expect("slot lock") = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .expect("slot lock")
                .expect("every slot is filled")
        })
        .collect()
}

/// Trains one restart per seed and returns all records with the index of
/// the lowest final cost (first wins on ties).
pub fn train_best_of(
    config: &ExperimentConfig,
    seeds: &[u64],
    jobs: usize,
) -> Result<(usize, Vec<TrainingRecord>)> {
    if seeds.is_empty() {
        return Err(Error::invalid("seeds", "need at least one seed"));
    }
    let configs: Vec<_> = seeds.iter().map(|&s| config.with_run_seed(s)).collect();
    let records = train_all(&configs, jobs)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let best = records
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.final_cost.total_cmp(&b.1.final_cost))
        .map(|(i, _)| i)
        .expect("non-empty");
    Ok((best, records))
}

pub fn sweep_sample_size(
    config: &ExperimentConfig,
    sizes: &[usize],
    jobs: usize,
) -> Result<Vec<TrainingRecord>> {
    let configs: Vec<_> = sizes
        .iter()
        .map(|&n| {
            let mut c = config.clone();
            c.dataset.num_samples = n;
            c
        })
        .collect();
    train_all(&configs, jobs).into_iter().collect()
}

/// Cutoff used for a given amplitude: 25 levels up to `α = 3`, 100 above.
pub fn cutoff_for_alpha(alpha: f64) -> usize {
    if alpha <= 3.0 {
        25
    } else {
        100
    }
}

pub fn sweep_alpha(
    config: &ExperimentConfig,
    alphas: &[f64],
    jobs: usize,
) -> Result<Vec<TrainingRecord>> {
    let configs = alphas
        .iter()
        .map(|&a| {
            let mut c = config.clone();
            c.model = c.model.with_alpha(a)?.with_cutoff(cutoff_for_alpha(a))?;
            c.analysis.spectrum = true;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    train_all(&configs, jobs).into_iter().collect()
}
