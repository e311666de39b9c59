//! Qubit quantum-circuit-learning baseline.
//!
//! Conventions: `R_P(θ) = exp(−iθP/2)`, qubits start in `|0…0⟩`, and qubit 0
//! is the most significant bit of the basis index. A circuit layer applies
//! `R_X(θ_{j1}) R_Z(θ_{j2}) R_X(θ_{j3})` on every qubit (rightmost first) and
//! then the fixed transverse-field Ising evolution `exp(−iτH)` with
//! `H = Σ a_j X_j + Σ_{j>k} J_jk Z_j Z_k`. Layer 1 acts first. Within a
//! layer θ is ordered qubit-major: `θ[3K·i + 3j + m]` for `m = 0, 1, 2`.

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{CompositeSpace, OperatorMatrix};
use crate::linalg::{self, CMat};
use crate::rng::{SeededUniform, Stream};

/// Largest register handled with dense `2^K` matrices.
pub const MAX_QUBITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub num_qubits: usize,
    pub depth: usize,
    pub tau: f64,
    /// Seed for the Ising coefficients.
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            num_qubits: 6,
            depth: 2,
            tau: 10.0,
            seed: 0,
        }
    }
}

impl BaselineConfig {
    pub fn num_params(&self) -> usize {
        3 * self.num_qubits * self.depth
    }

    pub fn validate(&self) -> Result<()> {
        check_qubits(self.num_qubits)
    }
}

fn check_qubits(k: usize) -> Result<()> {
    if k == 0 || k > MAX_QUBITS {
        return Err(Error::invalid(
            "num_qubits",
            format!("must be in 1..={MAX_QUBITS} for dense simulation, got {k}"),
        ));
    }
    Ok(())
}

fn qubit_space(k: usize) -> CompositeSpace {
    CompositeSpace::uniform(k, 2).expect("k >= 1")
}

/// Single-qubit `exp(−iθP/2)`.
pub fn rotation_2x2(axis: Axis, angle: f64) -> CMat {
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let z = C64::new(0.0, 0.0);
    let m = match axis {
        Axis::X => [
            [C64::new(c, 0.0), C64::new(0.0, -s)],
            [C64::new(0.0, -s), C64::new(c, 0.0)],
        ],
        Axis::Y => [
            [C64::new(c, 0.0), C64::new(-s, 0.0)],
            [C64::new(s, 0.0), C64::new(c, 0.0)],
        ],
        Axis::Z => [[C64::new(c, -s), z], [z, C64::new(c, s)]],
    };
    Mat::from_fn(2, 2, |i, j| m[i][j])
}

fn kron_all(factors: &[CMat]) -> CMat {
    factors
        .iter()
        .skip(1)
        .fold(factors[0].clone(), |acc, f| linalg::kron(&acc, f))
}

fn embed_single(gate: &CMat, qubit: usize, k: usize) -> CMat {
    let factors: Vec<CMat> = (0..k)
        .map(|j| {
            if j == qubit {
                gate.clone()
            } else {
                linalg::identity(2)
            }
        })
        .collect();
    kron_all(&factors)
}

pub fn rotation_gate(
    axis: Axis,
    angle: f64,
    qubit: usize,
    num_qubits: usize,
) -> Result<OperatorMatrix> {
    check_qubits(num_qubits)?;
    if qubit >= num_qubits {
        return Err(Error::IndexOutOfRange {
            what: "qubits",
            index: qubit,
            len: num_qubits,
        });
    }
    let m = embed_single(&rotation_2x2(axis, angle), qubit, num_qubits);
    Ok(OperatorMatrix::unitary_unchecked(
        qubit_space(num_qubits),
        m,
    ))
}

fn check_input(x: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::invalid("x", format!("must lie in [-1, 1], got {x}")));
    }
    Ok(())
}

/// Per-qubit encoder `R_Z(arccos x²) R_Y(arcsin x)`.
fn encoder_2x2(x: f64) -> CMat {
    &rotation_2x2(Axis::Z, (x * x).acos()) * &rotation_2x2(Axis::Y, x.asin())
}

pub fn encode_input_qubits(x: f64, num_qubits: usize) -> Result<OperatorMatrix> {
    check_input(x)?;
    check_qubits(num_qubits)?;
    let single = encoder_2x2(x);
    let factors = vec![single; num_qubits];
    Ok(OperatorMatrix::unitary_unchecked(
        qubit_space(num_qubits),
        kron_all(&factors),
    ))
}

/// `U(x)|0…0⟩` as a product state.
pub fn encoded_state(x: f64, num_qubits: usize) -> Result<Vec<C64>> {
    check_input(x)?;
    check_qubits(num_qubits)?;
    let u = encoder_2x2(x);
    let q = [u[(0, 0)], u[(1, 0)]];
    let mut psi = vec![C64::new(1.0, 0.0)];
    for _ in 0..num_qubits {
        psi = psi.iter().flat_map(|&a| [a * q[0], a * q[1]]).collect();
    }
    Ok(psi)
}

fn layer_2x2s(theta_layer: &[f64], num_qubits: usize) -> Vec<CMat> {
    (0..num_qubits)
        .map(|j| {
            let t = &theta_layer[3 * j..3 * j + 3];
            let rx1 = rotation_2x2(Axis::X, t[0]);
            let rz = rotation_2x2(Axis::Z, t[1]);
            let rx3 = rotation_2x2(Axis::X, t[2]);
            &(&rx1 * &rz) * &rx3
        })
        .collect()
}

pub fn parameterized_layer(theta_layer: &[f64], num_qubits: usize) -> Result<OperatorMatrix> {
    check_qubits(num_qubits)?;
    if theta_layer.len() != 3 * num_qubits {
        return Err(Error::DimensionMismatch(format!(
            "layer needs {} angles, got {}",
            3 * num_qubits,
            theta_layer.len()
        )));
    }
    let m = kron_all(&layer_2x2s(theta_layer, num_qubits));
    Ok(OperatorMatrix::unitary_unchecked(
        qubit_space(num_qubits),
        m,
    ))
}

/// Transverse-field Ising coefficients, every entry drawn from `U[−1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingCoefficients {
    pub a: Vec<f64>,
    /// `j[r][c]` for `c < r`; row `r` has length `r`.
    pub j: Vec<Vec<f64>>,
}

impl IsingCoefficients {
    pub fn zeros(num_qubits: usize) -> Self {
        Self {
            a: vec![0.0; num_qubits],
            j: (0..num_qubits).map(|r| vec![0.0; r]).collect(),
        }
    }

    /// Draw order: `a_0 … a_{K−1}`, then `J` row by row (`r = 1 … K−1`,
    /// `c = 0 … r−1`), all from the Ising stream of `seed`.
    pub fn from_seed(num_qubits: usize, seed: u64) -> Self {
        let mut rng = SeededUniform::new(seed, Stream::Ising);
        let a = (0..num_qubits).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let j = (0..num_qubits)
            .map(|r| (0..r).map(|_| rng.uniform(-1.0, 1.0)).collect())
            .collect();
        Self { a, j }
    }

    pub fn num_qubits(&self) -> usize {
        self.a.len()
    }
}

pub fn ising_hamiltonian(coeffs: &IsingCoefficients) -> Result<OperatorMatrix> {
    let k = coeffs.num_qubits();
    check_qubits(k)?;
    if coeffs.j.len() != k || coeffs.j.iter().enumerate().any(|(r, row)| row.len() != r) {
        return Err(Error::DimensionMismatch(
            "Ising J must be strictly lower triangular".into(),
        ));
    }
    let d = 1usize << k;
    let bit = |idx: usize, q: usize| (idx >> (k - 1 - q)) & 1;
    let mut h = Mat::<C64>::zeros(d, d);
    for idx in 0..d {
        let mut diag = 0.0;
        for r in 0..k {
            for c in 0..r {
                let zz = if bit(idx, r) == bit(idx, c) {
                    1.0
                } else {
                    -1.0
                };
                diag += coeffs.j[r][c] * zz;
            }
        }
        h[(idx, idx)] = C64::new(diag, 0.0);
        for q in 0..k {
            let flipped = idx ^ (1 << (k - 1 - q));
            h[(flipped, idx)] += C64::new(coeffs.a[q], 0.0);
        }
    }
    OperatorMatrix::hermitian(qubit_space(k), h)
}

pub fn ising_evolution(coeffs: &IsingCoefficients, tau: f64) -> Result<OperatorMatrix> {
    let h = ising_hamiltonian(coeffs)?;
    crate::dynamics::evolve_unitary(&h, tau)
}

/// Baseline circuit with its Ising evolution precomputed.
#[derive(Debug, Clone)]
pub struct BaselineCircuit {
    config: BaselineConfig,
    coeffs: IsingCoefficients,
    ising: CMat,
}

impl BaselineCircuit {
    pub fn new(config: BaselineConfig) -> Result<Self> {
        config.validate()?;
        let coeffs = IsingCoefficients::from_seed(config.num_qubits, config.seed);
        Self::with_coefficients(config, coeffs)
    }

    pub fn with_coefficients(config: BaselineConfig, coeffs: IsingCoefficients) -> Result<Self> {
        config.validate()?;
        if coeffs.num_qubits() != config.num_qubits {
            return Err(Error::DimensionMismatch(format!(
                "{} Ising fields for {} qubits",
                coeffs.num_qubits(),
                config.num_qubits
            )));
        }
        let ising = ising_evolution(&coeffs, config.tau)?.into_entries();
        Ok(Self {
            config,
            coeffs,
            ising,
        })
    }

    pub fn config(&self) -> &BaselineConfig {
        &self.config
    }

    pub fn coefficients(&self) -> &IsingCoefficients {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        1 << self.config.num_qubits
    }

    /// Dense `V(θ)`.
    pub fn unitary(&self, theta: &[f64]) -> Result<CMat> {
        let k = self.config.num_qubits;
        if theta.len() != self.config.num_params() {
            return Err(Error::DimensionMismatch(format!(
                "theta has {} entries, baseline needs {}",
                theta.len(),
                self.config.num_params()
            )));
        }
        let mut v = linalg::identity(self.dim());
        for layer in theta.chunks(3 * k) {
            let rot = kron_all(&layer_2x2s(layer, k));
            v = &self.ising * &(&rot * &v);
        }
        Ok(v)
    }
}

/// `f(x) = ⟨0…0| U†(x) V†(θ) 2Z₀ V(θ) U(x) |0…0⟩`.
pub fn baseline_model(x: f64, theta: &[f64], config: &BaselineConfig) -> Result<f64> {
    let circuit = BaselineCircuit::new(*config)?;
    let v = circuit.unitary(theta)?;
    let psi = linalg::mat_vec(&v, &encoded_state(x, config.num_qubits)?);
    Ok(two_z_first(&psi, config.num_qubits))
}

/// `⟨ψ| 2Z₀ |ψ⟩`.
pub(crate) fn two_z_first(psi: &[C64], num_qubits: usize) -> f64 {
    let half = 1usize << (num_qubits - 1);
    let (up, down) = psi.split_at(half);
    let p0: f64 = up.iter().map(|z| z.norm_sqr()).sum();
    let p1: f64 = down.iter().map(|z| z.norm_sqr()).sum();
    2.0 * (p0 - p1)
}
