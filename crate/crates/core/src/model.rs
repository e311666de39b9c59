//! The model function `f(x; θ) = ⟨ψ|U†(x) V†(θ) M V(θ) U(x)|ψ⟩` for every
//! supported circuit family.
//!
//! A [`ModelSpec`] is compiled once into a [`Model`], which holds the
//! precomputed circuit terms, the encoder and the observables in sparse form.
//! [`Model::prepare`] builds `V(θ)` once; the resulting [`Prepared`] evaluates
//! any number of inputs with a single dense product `V · [U(x₁)ψ, …, U(x_N)ψ]`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::baseline::{encoded_state, BaselineCircuit, BaselineConfig};
use crate::dataset::Dataset;
use crate::dynamics::{CircuitConsts, Coupling, EncodingParams, KpoCircuit, ThetaLayout};
use crate::error::{Error, Result};
use crate::fock::{coherent_state_with_tolerance, CompositeSpace, ModeSpace, StateVector};
use crate::linalg::CMat;

/// Default bound on the norm lost when truncating the initial coherent state.
/// Looser than the operator-level default so that `α = 3` fits in 25 levels.
pub const DEFAULT_MAX_TRUNCATION: f64 = 1e-5;

fn default_max_truncation() -> f64 {
    DEFAULT_MAX_TRUNCATION
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Observable {
    /// `a_j + a_j†`
    Quadrature { mode: usize },
    /// `a_j† a_j`
    Number { mode: usize },
    /// `weight · Z_q`
    PauliZ {
        qubit: usize,
        #[serde(default = "unit_weight")]
        weight: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputRule {
    /// One observable, one output.
    Single,
    /// Product of all expectations, one output.
    Product,
    /// One output per observable, in list order.
    Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleKpoSpec {
    pub chi: f64,
    pub cutoff: usize,
    pub alpha: f64,
    pub t_d: f64,
    /// Kerr phase of the encoder; `chi * t_d` when absent.
    #[serde(default)]
    pub chi_tilde: Option<f64>,
    pub tau: f64,
    pub depth: usize,
    #[serde(default = "default_max_truncation")]
    pub max_truncation: f64,
}

impl SingleKpoSpec {
    pub fn effective_chi_tilde(&self) -> f64 {
        self.chi_tilde.unwrap_or(self.chi * self.t_d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub chi: Vec<f64>,
    #[serde(default)]
    pub coupling: Vec<Coupling>,
    pub cutoffs: Vec<usize>,
    pub alpha: Vec<f64>,
    pub t_d: f64,
    /// Per-mode Kerr phase of the encoder; `chi_j * t_d` when absent.
    #[serde(default)]
    pub chi_tilde: Option<Vec<f64>>,
    pub tau: f64,
    pub depth: usize,
    /// Input component uploaded on each mode. Every mode gets `x[0]` when
    /// absent.
    #[serde(default)]
    pub input_of_mode: Option<Vec<usize>>,
    #[serde(default = "default_max_truncation")]
    pub max_truncation: f64,
}

impl NetworkSpec {
    pub fn num_modes(&self) -> usize {
        self.chi.len()
    }

    pub fn effective_chi_tilde(&self) -> Vec<f64> {
        match &self.chi_tilde {
            Some(c) => c.clone(),
            None => self.chi.iter().map(|c| c * self.t_d).collect(),
        }
    }

    pub fn input_map(&self) -> Vec<usize> {
        self.input_of_mode
            .clone()
            .unwrap_or_else(|| vec![0; self.num_modes()])
    }
}

/// One KPO taking `(x₁, x₂)` through the polar encoding
/// `e^{−iχ̃n² − iφn}|r⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiInputSpec {
    pub chi: f64,
    pub cutoff: usize,
    pub t_d: f64,
    #[serde(default)]
    pub chi_tilde: Option<f64>,
    pub tau: f64,
    pub depth: usize,
    #[serde(default = "default_max_truncation")]
    pub max_truncation: f64,
}

impl MultiInputSpec {
    pub fn effective_chi_tilde(&self) -> f64 {
        self.chi_tilde.unwrap_or(self.chi * self.t_d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum Variant {
    SingleKpo(SingleKpoSpec),
    KpoNetwork(NetworkSpec),
    MultiInputSingleKpo(MultiInputSpec),
    QubitBaseline(BaselineConfig),
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::SingleKpo(_) => "single-kpo",
            Variant::KpoNetwork(_) => "kpo-network",
            Variant::MultiInputSingleKpo(_) => "multi-input-single-kpo",
            Variant::QubitBaseline(_) => "qubit-baseline",
        }
    }

    pub fn is_bosonic(&self) -> bool {
        !matches!(self, Variant::QubitBaseline(_))
    }

    fn default_observables(&self) -> (Vec<Observable>, OutputRule) {
        match self {
            Variant::SingleKpo(_) => (vec![Observable::Quadrature { mode: 0 }], OutputRule::Single),
            Variant::KpoNetwork(n) => {
                let obs: Vec<_> = (0..n.num_modes())
                    .map(|mode| Observable::Quadrature { mode })
                    .collect();
                let rule = if obs.len() == 1 {
                    OutputRule::Single
                } else {
                    OutputRule::Product
                };
                (obs, rule)
            }
            Variant::MultiInputSingleKpo(_) => (
                vec![
                    Observable::Quadrature { mode: 0 },
                    Observable::Number { mode: 0 },
                ],
                OutputRule::Vector,
            ),
            Variant::QubitBaseline(_) => (
                vec![Observable::PauliZ {
                    qubit: 0,
                    weight: 2.0,
                }],
                OutputRule::Single,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub variant: Variant,
    /// The variant's usual observables when empty.
    #[serde(default)]
    pub observables: Vec<Observable>,
    #[serde(default)]
    pub output: Option<OutputRule>,
}

impl ModelSpec {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            observables: Vec::new(),
            output: None,
        }
    }

    pub fn with_observables(mut self, observables: Vec<Observable>, rule: OutputRule) -> Self {
        self.observables = observables;
        self.output = Some(rule);
        self
    }

    /// Single KPO with χ = 0.1, t_d = τ = 0.7, D = 12, 25 levels and α = 3.
    pub fn default_single_kpo() -> Self {
        Self::new(Variant::SingleKpo(SingleKpoSpec {
            chi: 0.1,
            cutoff: 25,
            alpha: 3.0,
            t_d: 0.7,
            chi_tilde: None,
            tau: 0.7,
            depth: 12,
            max_truncation: DEFAULT_MAX_TRUNCATION,
        }))
    }

    /// Two coupled KPOs with χ = 1, J = −0.1, D = 6, t_d = τ = 1, 10 levels
    /// per mode, α = 1 on both, product of the two quadratures.
    pub fn default_two_kpo() -> Self {
        Self::new(Variant::KpoNetwork(NetworkSpec {
            chi: vec![1.0, 1.0],
            coupling: vec![Coupling {
                to: 1,
                from: 0,
                value: C64::new(-0.1, 0.0),
            }],
            cutoffs: vec![10, 10],
            alpha: vec![1.0, 1.0],
            t_d: 1.0,
            chi_tilde: None,
            tau: 1.0,
            depth: 6,
            input_of_mode: None,
            max_truncation: DEFAULT_MAX_TRUNCATION,
        }))
    }

    pub fn default_multi_input() -> Self {
        Self::new(Variant::MultiInputSingleKpo(MultiInputSpec {
            chi: 0.1,
            cutoff: 25,
            t_d: 0.7,
            chi_tilde: None,
            tau: 0.7,
            depth: 12,
            max_truncation: DEFAULT_MAX_TRUNCATION,
        }))
    }

    pub fn default_baseline() -> Self {
        Self::new(Variant::QubitBaseline(BaselineConfig::default()))
    }

    pub fn resolved_observables(&self) -> (Vec<Observable>, OutputRule) {
        let (obs, rule) = self.variant.default_observables();
        let obs = if self.observables.is_empty() {
            obs
        } else {
            self.observables.clone()
        };
        (obs, self.output.unwrap_or(rule))
    }

    pub fn num_params(&self) -> usize {
        match &self.variant {
            Variant::SingleKpo(s) => 3 * s.depth,
            Variant::KpoNetwork(n) => 3 * n.depth * n.num_modes(),
            Variant::MultiInputSingleKpo(m) => 3 * m.depth,
            Variant::QubitBaseline(b) => b.num_params(),
        }
    }

    /// Same spec with the amplitude replaced, for bosonic variants with a
    /// fixed initial state.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let mut out = self.clone();
        match &mut out.variant {
            Variant::SingleKpo(s) => s.alpha = alpha,
            Variant::KpoNetwork(n) => n.alpha.iter_mut().for_each(|a| *a = alpha),
            other => {
                return Err(Error::VariantMismatch {
                    expected: "single-kpo or kpo-network".into(),
                    found: other.name().into(),
                })
            }
        }
        Ok(out)
    }

    pub fn with_cutoff(&self, cutoff: usize) -> Result<Self> {
        let mut out = self.clone();
        match &mut out.variant {
            Variant::SingleKpo(s) => s.cutoff = cutoff,
            Variant::KpoNetwork(n) => n.cutoffs.iter_mut().for_each(|c| *c = cutoff),
            Variant::MultiInputSingleKpo(m) => m.cutoff = cutoff,
            other => {
                return Err(Error::VariantMismatch {
                    expected: "a bosonic variant".into(),
                    found: other.name().into(),
                })
            }
        }
        Ok(out)
    }
}

/// Real symmetric operator stored as its diagonal and strictly lower part.
#[derive(Debug, Clone)]
struct SparseObservable {
    diag: Vec<f64>,
    lower: Vec<(usize, usize, f64)>,
}

impl SparseObservable {
    fn expectation(&self, psi: &[C64]) -> f64 {
        let mut acc = 0.0;
        for (d, z) in self.diag.iter().zip(psi) {
            if *d != 0.0 {
                acc += d * z.norm_sqr();
            }
        }
        for &(i, j, v) in &self.lower {
            acc += 2.0 * v * (psi[i].conj() * psi[j]).re;
        }
        acc
    }

    fn dense(&self) -> CMat {
        let n = self.diag.len();
        let mut m = Mat::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(self.diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        for &(i, j, v) in &self.lower {
            m[(i, j)] = C64::new(v, 0.0);
            m[(j, i)] = C64::new(v, 0.0);
        }
        m
    }
}

fn compile_observable(
    obs: &Observable,
    space: &CompositeSpace,
    bosonic: bool,
) -> Result<SparseObservable> {
    let k = space.num_modes();
    let d = space.dim();
    let check = |mode: usize| -> Result<()> {
        if mode >= k {
            return Err(Error::IndexOutOfRange {
                what: "modes",
                index: mode,
                len: k,
            });
        }
        Ok(())
    };
    let mismatch = |expected: &str| Error::VariantMismatch {
        expected: expected.into(),
        found: format!("{obs:?}"),
    };
    match *obs {
        Observable::Quadrature { mode } => {
            if !bosonic {
                return Err(mismatch("a qubit observable"));
            }
            check(mode)?;
            let stride: usize = space.modes()[mode + 1..]
                .iter()
                .map(|m| m.cutoff())
                .product();
            let mut lower = Vec::new();
            for idx in 0..d {
                let n = space.occupation(idx)[mode];
                if n > 0 {
                    lower.push((idx, idx - stride, (n as f64).sqrt()));
                }
            }
            Ok(SparseObservable {
                diag: vec![0.0; d],
                lower,
            })
        }
        Observable::Number { mode } => {
            if !bosonic {
                return Err(mismatch("a qubit observable"));
            }
            check(mode)?;
            let diag = (0..d)
                .map(|idx| space.occupation(idx)[mode] as f64)
                .collect();
            Ok(SparseObservable {
                diag,
                lower: vec![],
            })
        }
        Observable::PauliZ { qubit, weight } => {
            if bosonic {
                return Err(mismatch("a bosonic observable"));
            }
            check(qubit)?;
            let diag = (0..d)
                .map(|idx| {
                    if space.occupation(idx)[qubit] == 0 {
                        weight
                    } else {
                        -weight
                    }
                })
                .collect();
            Ok(SparseObservable {
                diag,
                lower: vec![],
            })
        }
    }
}

/// Polar form of a two-component input: `r = √(x₁² + x₂²)` and
/// `φ = ±arccos(x₁/r)` with the sign of `x₂` (`x₂ = 0` counts as negative),
/// `φ = 0` at the origin.
pub fn polar_input(x1: f64, x2: f64) -> (f64, f64) {
    let r = x1.hypot(x2);
    if r == 0.0 {
        return (0.0, 0.0);
    }
    let base = (x1 / r).clamp(-1.0, 1.0).acos();
    let phi = if x2 > 0.0 { base } else { -base };
    (r, phi)
}

fn polar_state(
    x1: f64,
    x2: f64,
    chi_tilde: f64,
    space: ModeSpace,
    tolerance: f64,
) -> Result<StateVector> {
    let (r, phi) = polar_input(x1, x2);
    let coh = coherent_state_with_tolerance(C64::new(r, 0.0), space, tolerance)?;
    let deficit = coh.truncation_deficit();
    let amps: Vec<C64> = coh
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let kf = k as f64;
            c * C64::from_polar(1.0, -(chi_tilde * kf * kf + phi * kf))
        })
        .collect();
    let mut out = StateVector::new(space.into(), amps)?;
    out.truncation_deficit = deficit;
    Ok(out)
}

/// `e^{−iχ̃n² − iφn}|r⟩` for the polar form of `(x1, x2)`.
pub fn encode_two_inputs_single_kpo(
    x1: f64,
    x2: f64,
    enc: &EncodingParams,
    space: ModeSpace,
) -> Result<StateVector> {
    polar_state(
        x1,
        x2,
        enc.chi_tilde,
        space,
        crate::fock::COHERENT_TRUNCATION_TOL,
    )
}

/// `⟨ψ(x1p, x2p)|ψ(x1, x2)⟩ = exp(−½(r′² + r² − 2r′r e^{i(φ′−φ)}))`, exact
/// without truncation.
pub fn overlap_closed_form(x1: f64, x2: f64, x1p: f64, x2p: f64) -> C64 {
    let (r, phi) = polar_input(x1, x2);
    let (rp, phip) = polar_input(x1p, x2p);
    let cross = C64::from_polar(2.0 * rp * r, phip - phi);
    (-0.5 * (C64::new(rp * rp + r * r, 0.0) - cross)).exp()
}

#[derive(Debug, Clone)]
enum Encoder {
    /// `ψ₀ ⊙ e^{−iΣ_j χ̃_j n_j²}` times `e^{−iπ Σ_i x_i c_i}`, where `c_i`
    /// counts the photons in the modes uploading component `i`.
    Product {
        base: Vec<C64>,
        counts: Vec<Vec<f64>>,
    },
    Polar {
        chi_tilde: f64,
        space: ModeSpace,
        tolerance: f64,
    },
    Qubit {
        num_qubits: usize,
    },
}

impl Encoder {
    fn encode(&self, x: &[f64]) -> Result<Vec<C64>> {
        match self {
            Encoder::Product { base, counts } => Ok(base
                .iter()
                .enumerate()
                .map(|(idx, &b)| {
                    let angle: f64 = counts.iter().zip(x).map(|(c, xi)| c[idx] * xi).sum();
                    b * C64::from_polar(1.0, -PI * angle)
                })
                .collect()),
            Encoder::Polar {
                chi_tilde,
                space,
                tolerance,
            } => Ok(polar_state(x[0], x[1], *chi_tilde, *space, *tolerance)?.into_amplitudes()),
            Encoder::Qubit { num_qubits } => encoded_state(x[0], *num_qubits),
        }
    }
}

#[derive(Debug, Clone)]
enum Circuit {
    Kpo(KpoCircuit),
    Qubit(BaselineCircuit),
}

/// A compiled [`ModelSpec`].
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    space: CompositeSpace,
    circuit: Circuit,
    encoder: Encoder,
    observables: Vec<SparseObservable>,
    rule: OutputRule,
    num_inputs: usize,
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::invalid(
            name,
            format!("must be positive and finite, got {v}"),
        ));
    }
    Ok(())
}

fn check_finite(name: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::invalid(name, format!("must be finite, got {v}")));
    }
    Ok(())
}

/// Product coherent state and the per-input photon counts of each basis
/// state.
fn product_encoder(
    space: &CompositeSpace,
    alpha: &[f64],
    chi_tilde: &[f64],
    input_of_mode: &[usize],
    num_inputs: usize,
    tolerance: f64,
) -> Result<Encoder> {
    let states = space
        .modes()
        .iter()
        .zip(alpha)
        .map(|(&m, &a)| coherent_state_with_tolerance(C64::new(a, 0.0), m, tolerance))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&StateVector> = states.iter().collect();
    let initial = crate::fock::tensor_states(&refs)?;
    let d = space.dim();
    let mut counts = vec![vec![0.0; d]; num_inputs];
    let mut base = Vec::with_capacity(d);
    for idx in 0..d {
        let occ = space.occupation(idx);
        let mut kerr = 0.0;
        for (j, &n) in occ.iter().enumerate() {
            let nf = n as f64;
            kerr += chi_tilde[j] * nf * nf;
            counts[input_of_mode[j]][idx] += nf;
        }
        base.push(initial.amplitudes()[idx] * C64::from_polar(1.0, -kerr));
    }
    Ok(Encoder::Product { base, counts })
}

impl Model {
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        let (obs, rule) = spec.resolved_observables();
        let (space, circuit, encoder, num_inputs) = match &spec.variant {
            Variant::SingleKpo(s) => {
                check_finite("chi", s.chi)?;
                check_finite("alpha", s.alpha)?;
                check_positive("t_d", s.t_d)?;
                check_positive("tau", s.tau)?;
                let mode = ModeSpace::new(s.cutoff)?;
                let space: CompositeSpace = mode.into();
                let circuit = KpoCircuit::new(
                    &CircuitConsts {
                        chi: vec![s.chi],
                        coupling: vec![],
                    },
                    ThetaLayout::new(s.depth, 1)?,
                    s.tau,
                    &space,
                )?;
                let enc = product_encoder(
                    &space,
                    &[s.alpha],
                    &[s.effective_chi_tilde()],
                    &[0],
                    1,
                    s.max_truncation,
                )?;
                (space, Circuit::Kpo(circuit), enc, 1)
            }
            Variant::KpoNetwork(n) => {
                let k = n.num_modes();
                if k == 0 {
                    return Err(Error::invalid("chi", "network needs at least one mode"));
                }
                let input_map = n.input_map();
                let chi_tilde = n.effective_chi_tilde();
                for (name, len) in [
                    ("cutoffs", n.cutoffs.len()),
                    ("alpha", n.alpha.len()),
                    ("chi_tilde", chi_tilde.len()),
                    ("input_of_mode", input_map.len()),
                ] {
                    if len != k {
                        return Err(Error::DimensionMismatch(format!(
                            "{name} has {len} entries for {k} modes"
                        )));
                    }
                }
                check_positive("t_d", n.t_d)?;
                check_positive("tau", n.tau)?;
                let num_inputs = input_map.iter().max().map_or(1, |m| m + 1);
                if (0..num_inputs).any(|i| !input_map.contains(&i)) {
                    return Err(Error::invalid(
                        "input_of_mode",
                        "every input component needs a mode",
                    ));
                }
                let space = CompositeSpace::new(
                    n.cutoffs
                        .iter()
                        .map(|&c| ModeSpace::new(c))
                        .collect::<Result<_>>()?,
                )?;
                let circuit = KpoCircuit::new(
                    &CircuitConsts {
                        chi: n.chi.clone(),
                        coupling: n.coupling.clone(),
                    },
                    ThetaLayout::new(n.depth, k)?,
                    n.tau,
                    &space,
                )?;
                let enc = product_encoder(
                    &space,
                    &n.alpha,
                    &chi_tilde,
                    &input_map,
                    num_inputs,
                    n.max_truncation,
                )?;
                (space, Circuit::Kpo(circuit), enc, num_inputs)
            }
            Variant::MultiInputSingleKpo(m) => {
                check_positive("t_d", m.t_d)?;
                check_positive("tau", m.tau)?;
                let mode = ModeSpace::new(m.cutoff)?;
                let space: CompositeSpace = mode.into();
                let circuit = KpoCircuit::new(
                    &CircuitConsts {
                        chi: vec![m.chi],
                        coupling: vec![],
                    },
                    ThetaLayout::new(m.depth, 1)?,
                    m.tau,
                    &space,
                )?;
                // Largest radius on [-1, 1]² must fit the truncation budget.
                coherent_state_with_tolerance(C64::new(2f64.sqrt(), 0.0), mode, m.max_truncation)?;
                let enc = Encoder::Polar {
                    chi_tilde: m.effective_chi_tilde(),
                    space: mode,
                    tolerance: m.max_truncation,
                };
                (space, Circuit::Kpo(circuit), enc, 2)
            }
            Variant::QubitBaseline(b) => {
                let circuit = BaselineCircuit::new(*b)?;
                let space = CompositeSpace::uniform(b.num_qubits, 2)?;
                (
                    space,
                    Circuit::Qubit(circuit),
                    Encoder::Qubit {
                        num_qubits: b.num_qubits,
                    },
                    1,
                )
            }
        };
        if obs.is_empty() {
            return Err(Error::invalid(
                "observables",
                "at least one observable is required",
            ));
        }
        if rule == OutputRule::Single && obs.len() != 1 {
            return Err(Error::invalid(
                "observables",
                format!(
                    "single output rule needs exactly one observable, got {}",
                    obs.len()
                ),
            ));
        }
        let bosonic = spec.variant.is_bosonic();
        let observables = obs
            .iter()
            .map(|o| compile_observable(o, &space, bosonic))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spec: spec.clone(),
            space,
            circuit,
            encoder,
            observables,
            rule,
            num_inputs,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn num_params(&self) -> usize {
        self.spec.num_params()
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_outputs(&self) -> usize {
        match self.rule {
            OutputRule::Single | OutputRule::Product => 1,
            OutputRule::Vector => self.observables.len(),
        }
    }

    /// `U(x)|ψ₀⟩`.
    pub fn encoded_state(&self, x: &[f64]) -> Result<StateVector> {
        self.check_input(x)?;
        StateVector::new(self.space.clone(), self.encoder.encode(x)?)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_inputs {
            return Err(Error::DimensionMismatch(format!(
                "input has {} components, model takes {}",
                x.len(),
                self.num_inputs
            )));
        }
        Ok(())
    }

    /// Builds `V(θ)`.
    pub fn prepare(&self, theta: &[f64]) -> Result<Prepared<'_>> {
        if theta.len() != self.num_params() {
            return Err(Error::DimensionMismatch(format!(
                "theta has {} entries, model needs {}",
                theta.len(),
                self.num_params()
            )));
        }
        let v = match &self.circuit {
            Circuit::Kpo(c) => c.unitary(theta)?,
            Circuit::Qubit(c) => c.unitary(theta)?,
        };
        Ok(Prepared { model: self, v })
    }

    /// Mean squared error over a scalar dataset, summed in index order.
    pub fn mse(&self, theta: &[f64], data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let f = self.prepare(theta)?.evaluate_scalar(&data.x)?;
        Ok(mse_of(&f, &data.y))
    }

    /// Exact Fourier coefficients of `f` in `e^{iπxm}`; needs a single KPO
    /// whose encoder has no Kerr phase.
    pub fn fourier_coefficients(&self, theta: &[f64]) -> Result<FourierCoefficients> {
        let chi_tilde = match &self.spec.variant {
            Variant::SingleKpo(s) => s.effective_chi_tilde(),
            other => {
                return Err(Error::VariantMismatch {
                    expected: "single-kpo".into(),
                    found: other.name().into(),
                })
            }
        };
        if chi_tilde != 0.0 {
            return Err(Error::VariantMismatch {
                expected: "single-kpo with zero encoder Kerr phase".into(),
                found: format!("single-kpo with chi_tilde = {chi_tilde}"),
            });
        }
        if self.rule != OutputRule::Single {
            return Err(Error::VariantMismatch {
                expected: "single output rule".into(),
                found: format!("{:?}", self.rule),
            });
        }
        let c = match &self.encoder {
            Encoder::Product { base, .. } => base,
            _ => unreachable!("single-kpo compiles to a product encoder"),
        };
        let prepared = self.prepare(theta)?;
        let m = self.observables[0].dense();
        let a = &(prepared.v.adjoint() * &m) * &prepared.v;
        let d = c.len();
        let mut terms = BTreeMap::new();
        for k in 0..d {
            for l in 0..d {
                let offset = k as i64 - l as i64;
                *terms.entry(offset).or_insert(C64::new(0.0, 0.0)) +=
                    c[k].conj() * a[(k, l)] * c[l];
            }
        }
        Ok(FourierCoefficients { terms })
    }

    /// `⟨Σ_j n_j⟩` after the circuit, for each scalar input.
    pub fn photon_number_profile(&self, theta: &[f64], x_grid: &[f64]) -> Result<Vec<f64>> {
        if !self.spec.variant.is_bosonic() {
            return Err(Error::VariantMismatch {
                expected: "a bosonic variant".into(),
                found: self.spec.variant.name().into(),
            });
        }
        let total = SparseObservable {
            diag: (0..self.space.dim())
                .map(|idx| self.space.occupation(idx).iter().sum::<usize>() as f64)
                .collect(),
            lower: vec![],
        };
        let prepared = self.prepare(theta)?;
        let xs: Vec<Vec<f64>> = x_grid.iter().map(|&x| vec![x]).collect();
        let out = prepared.propagate_batch(&xs)?;
        Ok(out.iter().map(|psi| total.expectation(psi)).collect())
    }
}

fn mse_of(f: &[f64], y: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (fi, yi) in f.iter().zip(y) {
        let r = fi - yi;
        sum += r * r;
    }
    sum / f.len() as f64
}

/// A model with `V(θ)` built for one θ.
#[derive(Debug, Clone)]
pub struct Prepared<'a> {
    model: &'a Model,
    v: CMat,
}

impl Prepared<'_> {
    pub fn unitary(&self) -> &CMat {
        &self.v
    }

    /// Applies `V(θ)` to an arbitrary initial (already encoded) state and
    /// combines the expectations per the output rule.
    pub fn measure(&self, state: &StateVector) -> Result<Vec<f64>> {
        if state.space() != &self.model.space {
            return Err(Error::DimensionMismatch(
                "state lives in a different space".into(),
            ));
        }
        let psi = crate::linalg::mat_vec(&self.v, state.amplitudes());
        Ok(self.combine(&psi))
    }

    /// Raw expectation of every observable.
    pub fn expectations(&self, psi: &[C64]) -> Vec<f64> {
        self.model
            .observables
            .iter()
            .map(|o| o.expectation(psi))
            .collect()
    }

    fn combine(&self, psi: &[C64]) -> Vec<f64> {
        let e = self.expectations(psi);
        match self.model.rule {
            OutputRule::Single => vec![e[0]],
            OutputRule::Product => vec![e.iter().product()],
            OutputRule::Vector => e,
        }
    }

    /// `V(θ)U(x)|ψ₀⟩` for every input, via one dense product.
    fn propagate_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<C64>>> {
        let d = self.model.space.dim();
        let encoded = xs
            .iter()
            .map(|x| {
                self.model.check_input(x)?;
                self.model.encoder.encode(x)
            })
            .collect::<Result<Vec<_>>>()?;
        let psi0 = Mat::from_fn(d, xs.len(), |i, m| encoded[m][i]);
        let out = &self.v * &psi0;
        Ok((0..xs.len())
            .map(|m| (0..d).map(|i| out[(i, m)]).collect())
            .collect())
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate_batch(&[x.to_vec()])?.remove(0))
    }

    pub fn evaluate_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .propagate_batch(xs)?
            .iter()
            .map(|psi| self.combine(psi))
            .collect())
    }

    /// Scalar-in, scalar-out evaluation over many inputs.
    pub fn evaluate_scalar(&self, xs: &[f64]) -> Result<Vec<f64>> {
        if self.model.num_inputs != 1 || self.model.num_outputs() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "scalar evaluation needs one input and one output, model has {} and {}",
                self.model.num_inputs,
                self.model.num_outputs()
            )));
        }
        let batch: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        Ok(self
            .evaluate_batch(&batch)?
            .into_iter()
            .map(|v| v[0])
            .collect())
    }
}

/// Coefficients `c_m` of `f(x) = Σ_m c_m e^{iπxm}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierCoefficients {
    pub terms: BTreeMap<i64, C64>,
}

impl FourierCoefficients {
    pub fn get(&self, offset: i64) -> C64 {
        self.terms.get(&offset).copied().unwrap_or_default()
    }

    pub fn eval_complex(&self, x: f64) -> C64 {
        self.terms
            .iter()
            .map(|(&m, &c)| c * C64::from_polar(1.0, PI * x * m as f64))
            .sum()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_complex(x).re
    }

    /// Largest `|m|` with `|c_m| > threshold`.
    pub fn max_offset_above(&self, threshold: f64) -> Option<i64> {
        self.terms
            .iter()
            .filter(|(_, c)| c.norm() > threshold)
            .map(|(m, _)| m.abs())
            .max()
    }
}

/// `f(x; θ)` for one input.
pub fn evaluate(x: &[f64], theta: &[f64], spec: &ModelSpec) -> Result<Vec<f64>> {
    Model::new(spec)?.prepare(theta)?.evaluate(x)
}

pub fn mse_cost(theta: &[f64], data: &Dataset, spec: &ModelSpec) -> Result<f64> {
    Model::new(spec)?.mse(theta, data)
}

pub fn fourier_series_coefficients(theta: &[f64], spec: &ModelSpec) -> Result<FourierCoefficients> {
    Model::new(spec)?.fourier_coefficients(theta)
}

pub fn photon_number_profile(theta: &[f64], spec: &ModelSpec, x_grid: &[f64]) -> Result<Vec<f64>> {
    Model::new(spec)?.photon_number_profile(theta, x_grid)
}
