//! Truncated bosonic Fock spaces, ladder operators and states.
//!
//! Operators are the infinite-dimensional matrices restricted to the first
//! `cutoff` Fock states. In a [`CompositeSpace`] mode 0 is the slowest-varying
//! index of the flattened basis, i.e. `|k0, k1⟩` sits at `k0 * d1 + k1`.

use std::ops::{Add, Mul};

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

/// Deficit allowed by [`coherent_state`].
pub const COHERENT_TRUNCATION_TOL: f64 = 1e-6;

/// Allowed `|Im <psi|A|psi>|` for a Hermitian `A`.
pub const REAL_EXPECTATION_TOL: f64 = 1e-10;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// One bosonic mode truncated to Fock states `|0⟩ … |cutoff-1⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeSpace {
    cutoff: usize,
}

impl ModeSpace {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff < 2 {
            return Err(Error::invalid(
                "cutoff",
                format!("must be at least 2, got {cutoff}"),
            ));
        }
        Ok(Self { cutoff })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CompositeSpace {
    modes: Vec<ModeSpace>,
}

impl CompositeSpace {
    pub fn new(modes: Vec<ModeSpace>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::invalid(
                "modes",
                "a composite space needs at least one mode",
            ));
        }
        Ok(Self { modes })
    }

    pub fn uniform(num_modes: usize, cutoff: usize) -> Result<Self> {
        let mode = ModeSpace::new(cutoff)?;
        Self::new(vec![mode; num_modes])
    }

    pub fn modes(&self) -> &[ModeSpace] {
        &self.modes
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn dim(&self) -> usize {
        self.modes.iter().map(|m| m.cutoff).product()
    }

    /// Flat index of the occupation tuple `occ`.
    pub fn index_of(&self, occ: &[usize]) -> usize {
        debug_assert_eq!(occ.len(), self.modes.len());
        occ.iter()
            .zip(&self.modes)
            .fold(0, |acc, (&k, m)| acc * m.cutoff + k)
    }

    /// Inverse of [`index_of`](Self::index_of).
    pub fn occupation(&self, mut index: usize) -> Vec<usize> {
        let mut occ = vec![0; self.modes.len()];
        for (slot, m) in occ.iter_mut().zip(&self.modes).rev() {
            *slot = index % m.cutoff;
            index /= m.cutoff;
        }
        occ
    }

    /// Product of `self` followed by `other` (other's modes vary fastest).
    pub fn join(&self, other: &CompositeSpace) -> CompositeSpace {
        let mut modes = self.modes.clone();
        modes.extend_from_slice(&other.modes);
        CompositeSpace { modes }
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.modes.len() {
            return Err(Error::IndexOutOfRange {
                what: "modes",
                index: mode,
                len: self.modes.len(),
            });
        }
        Ok(())
    }
}

impl From<ModeSpace> for CompositeSpace {
    fn from(mode: ModeSpace) -> Self {
        CompositeSpace { modes: vec![mode] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    space: CompositeSpace,
    amplitudes: Vec<C64>,
    pub(crate) truncation_deficit: f64,
}

impl StateVector {
    pub fn new(space: CompositeSpace, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for a space of dimension {}",
                amplitudes.len(),
                space.dim()
            )));
        }
        Ok(Self {
            space,
            amplitudes,
            truncation_deficit: 0.0,
        })
    }

    /// Fock basis state with the given occupations.
    pub fn basis(space: CompositeSpace, occ: &[usize]) -> Result<Self> {
        if occ.len() != space.num_modes() {
            return Err(Error::DimensionMismatch(format!(
                "{} occupations for {} modes",
                occ.len(),
                space.num_modes()
            )));
        }
        for (&k, m) in occ.iter().zip(space.modes()) {
            if k >= m.cutoff() {
                return Err(Error::IndexOutOfRange {
                    what: "Fock states",
                    index: k,
                    len: m.cutoff(),
                });
            }
        }
        let mut amps = vec![ZERO; space.dim()];
        amps[space.index_of(occ)] = ONE;
        Self::new(space, amps)
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    /// Norm lost to truncation before renormalisation (zero unless the state
    /// came from [`coherent_state`] or a tensor product involving one).
    pub fn truncation_deficit(&self) -> f64 {
        self.truncation_deficit
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            for a in &mut self.amplitudes {
                *a /= n;
            }
        }
        self
    }

    /// Multiply every amplitude by `e^{i phi}`.
    pub fn with_global_phase(mut self, phi: f64) -> Self {
        let p = C64::from_polar(1.0, phi);
        for a in &mut self.amplitudes {
            *a *= p;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    space: CompositeSpace,
    entries: CMat,
    hermitian: bool,
    unitary: bool,
}

impl OperatorMatrix {
    pub fn new(space: CompositeSpace, entries: CMat) -> Result<Self> {
        let d = space.dim();
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for a space of dimension {d}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self {
            space,
            entries,
            hermitian: false,
            unitary: false,
        })
    }

    /// Wraps `entries` and flags it Hermitian after checking
    /// `max |A - A^dagger| <= 1e-12`.
    pub fn hermitian(space: CompositeSpace, entries: CMat) -> Result<Self> {
        let mut op = Self::new(space, entries)?;
        let defect = linalg::hermiticity_defect(&op.entries);
        if defect > 1e-12 {
            return Err(Error::NotHermitian(defect));
        }
        op.hermitian = true;
        Ok(op)
    }

    /// Wraps `entries` and flags it unitary; the caller guarantees unitarity
    /// to 1e-10 (checked in debug builds).
    pub(crate) fn unitary_unchecked(space: CompositeSpace, entries: CMat) -> Self {
        debug_assert!(linalg::unitarity_defect(&entries) <= 1e-10);
        Self {
            space,
            entries,
            hermitian: false,
            unitary: true,
        }
    }

    pub fn identity(space: CompositeSpace) -> Self {
        let d = space.dim();
        Self {
            space,
            entries: linalg::identity(d),
            hermitian: true,
            unitary: true,
        }
    }

    /// Diagonal operator with the given entries.
    pub fn diagonal(space: CompositeSpace, diag: &[C64]) -> Result<Self> {
        let d = space.dim();
        if diag.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "{} diagonal entries for dimension {d}",
                diag.len()
            )));
        }
        let entries = Mat::from_fn(d, d, |i, j| if i == j { diag[i] } else { ZERO });
        let hermitian = diag.iter().all(|z| z.im == 0.0);
        let unitary = diag.iter().all(|z| (z.norm() - 1.0).abs() <= 1e-14);
        Ok(Self {
            space,
            entries,
            hermitian,
            unitary,
        })
    }

    /// Lift a single-mode operator onto `mode` of `space`.
    pub fn embed(&self, space: &CompositeSpace, mode: usize) -> Result<Self> {
        space.check_mode(mode)?;
        if self.space.num_modes() != 1 || self.space.modes()[0] != space.modes()[mode] {
            return Err(Error::DimensionMismatch(format!(
                "cannot embed an operator on {:?} into mode {mode} of {:?}",
                self.space, space
            )));
        }
        let factors: Vec<OperatorMatrix> = space
            .modes()
            .iter()
            .enumerate()
            .map(|(j, &m)| {
                if j == mode {
                    self.clone()
                } else {
                    OperatorMatrix::identity(m.into())
                }
            })
            .collect();
        tensor_ops(&factors.iter().collect::<Vec<_>>())
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn into_entries(self) -> CMat {
        self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[(row, col)]
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn adjoint(&self) -> Self {
        Self {
            space: self.space.clone(),
            entries: linalg::adjoint(&self.entries),
            hermitian: self.hermitian,
            unitary: self.unitary,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            space: self.space.clone(),
            entries: Mat::from_fn(self.dim(), self.dim(), |i, j| self.entries[(i, j)] * s),
            hermitian: self.hermitian,
            unitary: self.unitary && s.abs() == 1.0,
        }
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        check_same_space(&self.space, &state.space)?;
        Ok(StateVector {
            space: state.space.clone(),
            amplitudes: linalg::mat_vec(&self.entries, &state.amplitudes),
            truncation_deficit: state.truncation_deficit,
        })
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        check_same_space(&self.space, &other.space)?;
        let d = self.dim();
        Ok(Self {
            space: self.space.clone(),
            entries: Mat::from_fn(d, d, |i, j| self.entries[(i, j)] + other.entries[(i, j)]),
            hermitian: self.hermitian && other.hermitian,
            unitary: false,
        })
    }

    /// `self · other` (other acts first).
    pub fn try_compose(&self, other: &Self) -> Result<Self> {
        check_same_space(&self.space, &other.space)?;
        Ok(Self {
            space: self.space.clone(),
            entries: &self.entries * &other.entries,
            hermitian: false,
            unitary: self.unitary && other.unitary,
        })
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;

    /// Panics on mismatched spaces; use [`OperatorMatrix::try_add`] otherwise.
    fn add(self, rhs: Self) -> OperatorMatrix {
        self.try_add(rhs).expect("operator spaces differ")
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn mul(self, rhs: Self) -> OperatorMatrix {
        self.try_compose(rhs).expect("operator spaces differ")
    }
}

fn check_same_space(a: &CompositeSpace, b: &CompositeSpace) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!(
            "space {:?} vs {:?}",
            a.modes(),
            b.modes()
        )));
    }
    Ok(())
}

/// `â` with `⟨k-1|â|k⟩ = √k`.
pub fn annihilation_op(space: ModeSpace) -> OperatorMatrix {
    let d = space.cutoff;
    let entries = Mat::from_fn(d, d, |i, j| {
        if j == i + 1 {
            C64::new((j as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    });
    OperatorMatrix {
        space: space.into(),
        entries,
        hermitian: false,
        unitary: false,
    }
}

pub fn creation_op(space: ModeSpace) -> OperatorMatrix {
    annihilation_op(space).adjoint()
}

pub fn number_op(space: ModeSpace) -> OperatorMatrix {
    let diag: Vec<C64> = (0..space.cutoff).map(|k| C64::new(k as f64, 0.0)).collect();
    OperatorMatrix::diagonal(space.into(), &diag).expect("diagonal matches cutoff")
}

/// `â + â†`.
pub fn quadrature_op(space: ModeSpace) -> OperatorMatrix {
    let a = annihilation_op(space);
    let mut x = &a + &a.adjoint();
    x.hermitian = true;
    x
}

/// Raw truncated coherent amplitudes `e^{-|α|²/2} α^k / √k!`, not renormalised.
pub fn coherent_amplitudes(alpha: C64, cutoff: usize) -> Vec<C64> {
    let mut amps = Vec::with_capacity(cutoff);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for k in 0..cutoff {
        if k > 0 {
            c = c * alpha / (k as f64).sqrt();
        }
        amps.push(c);
    }
    amps
}

/// Coherent state `|α⟩` with the default deficit tolerance of 1e-6.
pub fn coherent_state(alpha: C64, space: ModeSpace) -> Result<StateVector> {
    coherent_state_with_tolerance(alpha, space, COHERENT_TRUNCATION_TOL)
}

/// Coherent state truncated to `space` and renormalised. The lost norm
/// `1 - Σ_{k<cutoff} |c_k|²` is kept as [`StateVector::truncation_deficit`]
/// and must not exceed `tolerance`.
pub fn coherent_state_with_tolerance(
    alpha: C64,
    space: ModeSpace,
    tolerance: f64,
) -> Result<StateVector> {
    let amps = coherent_amplitudes(alpha, space.cutoff);
    let kept: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    let deficit = (1.0 - kept).max(0.0);
    if deficit > tolerance {
        return Err(Error::Truncation {
            alpha: alpha.norm(),
            cutoff: space.cutoff,
            deficit,
            tolerance,
        });
    }
    let mut state = StateVector::new(space.into(), amps)?.normalized();
    state.truncation_deficit = deficit;
    Ok(state)
}

/// Kronecker product of operators in the given mode order.
pub fn tensor_ops(ops: &[&OperatorMatrix]) -> Result<OperatorMatrix> {
    let (first, rest) = ops
        .split_first()
        .ok_or_else(|| Error::DimensionMismatch("empty tensor product".into()))?;
    let mut acc = (*first).clone();
    for op in rest {
        acc = OperatorMatrix {
            space: acc.space.join(&op.space),
            entries: linalg::kron(&acc.entries, &op.entries),
            hermitian: acc.hermitian && op.hermitian,
            unitary: acc.unitary && op.unitary,
        };
    }
    Ok(acc)
}

/// Kronecker product of states in the given mode order.
pub fn tensor_states(states: &[&StateVector]) -> Result<StateVector> {
    let (first, rest) = states
        .split_first()
        .ok_or_else(|| Error::DimensionMismatch("empty tensor product".into()))?;
    let mut acc = (*first).clone();
    for s in rest {
        let mut amps = Vec::with_capacity(acc.amplitudes.len() * s.amplitudes.len());
        for &a in &acc.amplitudes {
            amps.extend(s.amplitudes.iter().map(|&b| a * b));
        }
        acc = StateVector {
            space: acc.space.join(&s.space),
            amplitudes: amps,
            truncation_deficit: 1.0 - (1.0 - acc.truncation_deficit) * (1.0 - s.truncation_deficit),
        };
    }
    Ok(acc)
}

/// `⟨ψ|M|ψ⟩`.
pub fn expectation(state: &StateVector, op: &OperatorMatrix) -> Result<C64> {
    check_same_space(&state.space, &op.space)?;
    let m = &op.entries;
    let psi = &state.amplitudes;
    let mut acc = ZERO;
    for (j, &pj) in psi.iter().enumerate() {
        if pj == ZERO {
            continue;
        }
        let mut col = ZERO;
        for (i, &pi) in psi.iter().enumerate() {
            col += pi.conj() * m[(i, j)];
        }
        acc += col * pj;
    }
    Ok(acc)
}

/// Real expectation value of a Hermitian observable. Fails if the operator is
/// not flagged Hermitian or the imaginary part exceeds 1e-10.
pub fn expectation_real(state: &StateVector, op: &OperatorMatrix) -> Result<f64> {
    if !op.hermitian {
        return Err(Error::NotHermitian(linalg::hermiticity_defect(&op.entries)));
    }
    let z = expectation(state, op)?;
    if z.im.abs() > REAL_EXPECTATION_TOL {
        return Err(Error::NotHermitian(z.im.abs()));
    }
    Ok(z.re)
}

/// `⟨a|b⟩`.
pub fn overlap(a: &StateVector, b: &StateVector) -> Result<C64> {
    check_same_space(&a.space, &b.space)?;
    Ok(a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.conj() * y)
        .sum())
}
