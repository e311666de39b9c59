//! KPO Hamiltonians, their evolution unitaries, the data-encoding gates and
//! the layered variational circuit.
//!
//! Single mode:
//!
//! ```text
//! H = χ a†²a² + Δ a†a − p (a² + a†²) + r (a + a†)
//! ```
//!
//! A network adds `Σ_{j>k} (J_jk a†_j a_k + h.c.)`. Circuit layers are
//! `V_i = exp(−iτ H(Δ_i, p_i, r_i))` and `V(θ) = V_D ⋯ V_2 V_1`, so layer 1
//! acts on the state first.

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{annihilation_op, CompositeSpace, ModeSpace, OperatorMatrix};
use crate::linalg::{self, CMat, HermitianEigen};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleKpoParams {
    pub chi: f64,
    pub delta: f64,
    pub p: f64,
    pub r: f64,
}

/// Hopping term `J a†_to a_from + h.c.` with `to > from`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub to: usize,
    pub from: usize,
    pub value: C64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub per_mode: Vec<SingleKpoParams>,
    #[serde(default)]
    pub coupling: Vec<Coupling>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamKind {
    Detuning,
    Pump,
    Drive,
}

/// Flat θ layout: layer-major, then `(Δ_1..Δ_K, p_1..p_K, r_1..r_K)` inside a
/// layer. For one mode this is `θ_{3i} = Δ_i, θ_{3i+1} = p_i, θ_{3i+2} = r_i`
/// (zero-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThetaLayout {
    pub num_layers: usize,
    pub num_modes: usize,
}

impl ThetaLayout {
    pub fn new(num_layers: usize, num_modes: usize) -> Result<Self> {
        if num_modes == 0 {
            return Err(Error::invalid("num_modes", "must be positive"));
        }
        Ok(Self {
            num_layers,
            num_modes,
        })
    }

    pub fn len(&self) -> usize {
        3 * self.num_modes * self.num_layers
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, layer: usize, mode: usize, kind: ParamKind) -> usize {
        let slot = match kind {
            ParamKind::Detuning => 0,
            ParamKind::Pump => 1,
            ParamKind::Drive => 2,
        };
        layer * 3 * self.num_modes + slot * self.num_modes + mode
    }

    pub fn locate(&self, index: usize) -> (usize, usize, ParamKind) {
        let k = self.num_modes;
        let layer = index / (3 * k);
        let rem = index % (3 * k);
        let kind = match rem / k {
            0 => ParamKind::Detuning,
            1 => ParamKind::Pump,
            _ => ParamKind::Drive,
        };
        (layer, rem % k, kind)
    }

    pub fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "theta has {} entries, layout (D={}, K={}) needs {}",
                theta.len(),
                self.num_layers,
                self.num_modes,
                self.len()
            )));
        }
        Ok(())
    }
}

/// Encoding gate constants: `χ̃ = t_d χ` is the Kerr phase picked up while
/// the detuning carries the input for a duration `t_d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingParams {
    pub chi_tilde: f64,
    pub t_d: f64,
}

impl EncodingParams {
    pub fn from_kerr(chi: f64, t_d: f64) -> Self {
        Self {
            chi_tilde: chi * t_d,
            t_d,
        }
    }

    /// Detuning that uploads `x` on a single mode: `πx = t_d (Δ − χ)`.
    pub fn single_mode_detuning(&self, x: f64, chi: f64) -> f64 {
        std::f64::consts::PI * x / self.t_d + chi
    }

    /// Detuning that uploads `x` on a network mode: `πx = t_d Δ_j`.
    pub fn network_detuning(&self, x: f64) -> f64 {
        std::f64::consts::PI * x / self.t_d
    }
}

/// Fixed (non-trained) constants of a circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitConsts {
    pub chi: Vec<f64>,
    #[serde(default)]
    pub coupling: Vec<Coupling>,
}

fn real_op(space: &CompositeSpace, m: &CMat) -> OperatorMatrix {
    OperatorMatrix::hermitian(space.clone(), m.clone()).expect("term is Hermitian by construction")
}

/// Single-mode terms as dense matrices: (a†²a², a†a, −(a²+a†²), a+a†).
fn single_terms(space: ModeSpace) -> [CMat; 4] {
    let a = annihilation_op(space).into_entries();
    let ad = linalg::adjoint(&a);
    let a2 = &a * &a;
    let ad2 = &ad * &ad;
    let kerr = &ad2 * &a2;
    let num = &ad * &a;
    let d = space.cutoff();
    let pump = Mat::from_fn(d, d, |i, j| -(a2[(i, j)] + ad2[(i, j)]));
    let drive = Mat::from_fn(d, d, |i, j| a[(i, j)] + ad[(i, j)]);
    [kerr, num, pump, drive]
}

pub fn build_single_hamiltonian(params: &SingleKpoParams, space: ModeSpace) -> OperatorMatrix {
    let [kerr, num, pump, drive] = single_terms(space);
    let d = space.cutoff();
    let h = Mat::from_fn(d, d, |i, j| {
        kerr[(i, j)] * params.chi
            + num[(i, j)] * params.delta
            + pump[(i, j)] * params.p
            + drive[(i, j)] * params.r
    });
    real_op(&space.into(), &h)
}

/// Per-mode and hopping terms of a network Hamiltonian, lifted to the full
/// space. `H(θ) = fixed + Σ_j Δ_j N_j + p_j P_j + r_j R_j`.
#[derive(Debug, Clone)]
pub struct NetworkTerms {
    space: CompositeSpace,
    kerr: Vec<CMat>,
    number: Vec<CMat>,
    pump: Vec<CMat>,
    drive: Vec<CMat>,
    hopping: Vec<(Coupling, CMat)>,
}

impl NetworkTerms {
    pub fn new(space: &CompositeSpace, coupling: &[Coupling]) -> Result<Self> {
        let k = space.num_modes();
        let mut out = Self {
            space: space.clone(),
            kerr: Vec::with_capacity(k),
            number: Vec::with_capacity(k),
            pump: Vec::with_capacity(k),
            drive: Vec::with_capacity(k),
            hopping: Vec::with_capacity(coupling.len()),
        };
        for (j, &mode) in space.modes().iter().enumerate() {
            let [kerr, num, pump, drive] = single_terms(mode);
            let lift = |m: CMat| -> Result<CMat> {
                Ok(OperatorMatrix::new(mode.into(), m)?
                    .embed(space, j)?
                    .into_entries())
            };
            out.kerr.push(lift(kerr)?);
            out.number.push(lift(num)?);
            out.pump.push(lift(pump)?);
            out.drive.push(lift(drive)?);
        }
        for c in coupling {
            if c.to <= c.from {
                return Err(Error::invalid(
                    "coupling",
                    format!("expected to > from, got to = {}, from = {}", c.to, c.from),
                ));
            }
            for idx in [c.to, c.from] {
                if idx >= k {
                    return Err(Error::IndexOutOfRange {
                        what: "modes",
                        index: idx,
                        len: k,
                    });
                }
            }
            let a_to = annihilation_op(space.modes()[c.to]).embed(space, c.to)?;
            let a_from = annihilation_op(space.modes()[c.from]).embed(space, c.from)?;
            let hop = (&a_to.adjoint() * &a_from).into_entries();
            let d = hop.nrows();
            let term = Mat::from_fn(d, d, |i, jj| {
                c.value * hop[(i, jj)] + (c.value * hop[(jj, i)]).conj()
            });
            out.hopping.push((*c, term));
        }
        Ok(out)
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    /// Kerr plus hopping contribution for the given Kerr constants.
    pub fn fixed_part(&self, chi: &[f64]) -> Result<CMat> {
        if chi.len() != self.kerr.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} Kerr constants for {} modes",
                chi.len(),
                self.kerr.len()
            )));
        }
        let d = self.space.dim();
        let mut h = Mat::<C64>::zeros(d, d);
        for (c, m) in chi.iter().zip(&self.kerr) {
            axpy(&mut h, *c, m);
        }
        for (_, m) in &self.hopping {
            axpy(&mut h, 1.0, m);
        }
        Ok(h)
    }

    /// `fixed + Σ_j Δ_j N_j + p_j P_j + r_j R_j`.
    pub fn assemble(&self, fixed: &CMat, delta: &[f64], p: &[f64], r: &[f64]) -> CMat {
        let mut h = fixed.clone();
        for j in 0..self.number.len() {
            axpy(&mut h, delta[j], &self.number[j]);
            axpy(&mut h, p[j], &self.pump[j]);
            axpy(&mut h, r[j], &self.drive[j]);
        }
        h
    }
}

fn axpy(acc: &mut CMat, s: f64, m: &CMat) {
    if s == 0.0 {
        return;
    }
    for j in 0..acc.ncols() {
        for i in 0..acc.nrows() {
            let v = m[(i, j)];
            if v.re != 0.0 || v.im != 0.0 {
                acc[(i, j)] += v * s;
            }
        }
    }
}

pub fn build_network_hamiltonian(
    params: &NetworkParams,
    space: &CompositeSpace,
) -> Result<OperatorMatrix> {
    if params.per_mode.len() != space.num_modes() {
        return Err(Error::DimensionMismatch(format!(
            "{} mode parameter sets for {} modes",
            params.per_mode.len(),
            space.num_modes()
        )));
    }
    let terms = NetworkTerms::new(space, &params.coupling)?;
    let chi: Vec<f64> = params.per_mode.iter().map(|m| m.chi).collect();
    let delta: Vec<f64> = params.per_mode.iter().map(|m| m.delta).collect();
    let p: Vec<f64> = params.per_mode.iter().map(|m| m.p).collect();
    let r: Vec<f64> = params.per_mode.iter().map(|m| m.r).collect();
    let h = terms.assemble(&terms.fixed_part(&chi)?, &delta, &p, &r);
    OperatorMatrix::hermitian(space.clone(), h)
}

/// `exp(−iτH)` through the eigendecomposition of `H`.
pub fn evolve_unitary(h: &OperatorMatrix, tau: f64) -> Result<OperatorMatrix> {
    let eig = HermitianEigen::new(h.entries())?;
    Ok(OperatorMatrix::unitary_unchecked(
        h.space().clone(),
        eig.unitary(tau),
    ))
}

/// Diagonal phases `e^{−i(χ̃k² + πxk)}` for `k < cutoff`.
pub fn encoding_phases(x: f64, chi_tilde: f64, cutoff: usize) -> Vec<C64> {
    (0..cutoff)
        .map(|k| {
            let kf = k as f64;
            C64::from_polar(1.0, -(chi_tilde * kf * kf + std::f64::consts::PI * x * kf))
        })
        .collect()
}

/// `U(x) = exp(−iχ̃n² − iπxn)`, built directly as a diagonal.
pub fn encode_input_single(x: f64, enc: &EncodingParams, space: ModeSpace) -> OperatorMatrix {
    let phases = encoding_phases(x, enc.chi_tilde, space.cutoff());
    OperatorMatrix::diagonal(space.into(), &phases).expect("phases match cutoff")
}

/// Diagonal of `Π_j U_j(x_j)` over `target_modes`, identity on the others.
pub fn network_encoding_diagonal(
    x: &[f64],
    enc: &EncodingParams,
    space: &CompositeSpace,
    target_modes: &[usize],
) -> Result<Vec<C64>> {
    if x.len() != target_modes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} inputs for {} target modes",
            x.len(),
            target_modes.len()
        )));
    }
    let k = space.num_modes();
    let mut per_mode: Vec<Option<Vec<C64>>> = vec![None; k];
    for (&xi, &mode) in x.iter().zip(target_modes) {
        if mode >= k {
            return Err(Error::IndexOutOfRange {
                what: "modes",
                index: mode,
                len: k,
            });
        }
        let phases = encoding_phases(xi, enc.chi_tilde, space.modes()[mode].cutoff());
        per_mode[mode] = Some(match per_mode[mode].take() {
            Some(prev) => prev.iter().zip(&phases).map(|(a, b)| a * b).collect(),
            None => phases,
        });
    }
    let diag = (0..space.dim())
        .map(|idx| {
            let occ = space.occupation(idx);
            occ.iter()
                .zip(&per_mode)
                .fold(C64::new(1.0, 0.0), |acc, (&n, ph)| match ph {
                    Some(ph) => acc * ph[n],
                    None => acc,
                })
        })
        .collect();
    Ok(diag)
}

pub fn encode_input_network(
    x: &[f64],
    enc: &EncodingParams,
    space: &CompositeSpace,
    target_modes: &[usize],
) -> Result<OperatorMatrix> {
    let diag = network_encoding_diagonal(x, enc, space, target_modes)?;
    OperatorMatrix::diagonal(space.clone(), &diag)
}

/// Precomputed building blocks for repeated `V(θ)` evaluation.
#[derive(Debug, Clone)]
pub struct KpoCircuit {
    terms: NetworkTerms,
    fixed: CMat,
    layout: ThetaLayout,
    tau: f64,
}

impl KpoCircuit {
    pub fn new(
        consts: &CircuitConsts,
        layout: ThetaLayout,
        tau: f64,
        space: &CompositeSpace,
    ) -> Result<Self> {
        if layout.num_modes != space.num_modes() {
            return Err(Error::DimensionMismatch(format!(
                "layout has {} modes, space has {}",
                layout.num_modes,
                space.num_modes()
            )));
        }
        let terms = NetworkTerms::new(space, &consts.coupling)?;
        let fixed = terms.fixed_part(&consts.chi)?;
        Ok(Self {
            terms,
            fixed,
            layout,
            tau,
        })
    }

    pub fn layout(&self) -> ThetaLayout {
        self.layout
    }

    pub fn space(&self) -> &CompositeSpace {
        self.terms.space()
    }

    /// Hamiltonian of layer `layer` (zero-based) for parameters `theta`.
    pub fn layer_hamiltonian(&self, theta: &[f64], layer: usize) -> CMat {
        let k = self.layout.num_modes;
        let base = layer * 3 * k;
        let delta = &theta[base..base + k];
        let p = &theta[base + k..base + 2 * k];
        let r = &theta[base + 2 * k..base + 3 * k];
        self.terms.assemble(&self.fixed, delta, p, r)
    }

    /// Dense `V(θ) = V_D ⋯ V_1`.
    pub fn unitary(&self, theta: &[f64]) -> Result<CMat> {
        self.layout.check(theta)?;
        let d = self.space().dim();
        let mut acc: Option<CMat> = None;
        for layer in 0..self.layout.num_layers {
            let h = self.layer_hamiltonian(theta, layer);
            let u = HermitianEigen::new(&h)?.unitary(self.tau);
            acc = Some(match acc {
                None => u,
                Some(prev) => &u * &prev,
            });
        }
        Ok(acc.unwrap_or_else(|| linalg::identity(d)))
    }
}

pub fn layered_circuit(
    theta: &[f64],
    layout: ThetaLayout,
    consts: &CircuitConsts,
    tau: f64,
    space: &CompositeSpace,
) -> Result<OperatorMatrix> {
    let circuit = KpoCircuit::new(consts, layout, tau, space)?;
    let u = circuit.unitary(theta)?;
    Ok(OperatorMatrix::unitary_unchecked(space.clone(), u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, number_op, overlap, StateVector};
    use crate::linalg::{max_abs_diff, unitarity_defect};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn mode(c: usize) -> ModeSpace {
        ModeSpace::new(c).unwrap()
    }

    /// Scaled Taylor series for `exp(−iτH)`: `(Σ_{k<20} (−iτH/2^s)^k/k!)^{2^s}`.
    fn taylor_exp(h: &CMat, tau: f64) -> CMat {
        let d = h.nrows();
        let norm = linalg::max_abs(h) * d as f64 * tau.abs();
        let s = (norm.max(1.0).log2().ceil() as i32 + 2).max(0);
        let scale = tau / 2f64.powi(s);
        let a = Mat::from_fn(d, d, |i, j| h[(i, j)] * C64::new(0.0, -scale));
        let mut sum = linalg::identity(d);
        let mut term = linalg::identity(d);
        for k in 1..20 {
            term = &term * &a;
            term = Mat::from_fn(d, d, |i, j| term[(i, j)] / k as f64);
            sum = Mat::from_fn(d, d, |i, j| sum[(i, j)] + term[(i, j)]);
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    fn random_hermitian(d: usize, seed: u64) -> CMat {
        // Small LCG keeps the oracle free of crate code.
        let mut state = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut m = Mat::<C64>::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = C64::new(next(), 0.0);
            for j in 0..i {
                let z = C64::new(next(), next());
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn kerr_matrix_element() {
        let h = build_single_hamiltonian(
            &SingleKpoParams {
                chi: 0.1,
                delta: 0.0,
                p: 0.0,
                r: 0.0,
            },
            mode(6),
        );
        assert!((h.get(2, 2).re - 0.2).abs() < 1e-15);
        assert!(h.is_hermitian());
    }

    #[test]
    fn vacuum_is_ground_state_when_detuning_exceeds_kerr() {
        let h = build_single_hamiltonian(
            &SingleKpoParams {
                chi: 0.1,
                delta: 0.3,
                p: 0.0,
                r: 0.0,
            },
            mode(10),
        );
        let eig = HermitianEigen::new(h.entries()).unwrap();
        let v = eig.vectors();
        assert!((v[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!(eig.values()[0].abs() < 1e-12);
    }

    #[test]
    fn pumped_ground_space_spanned_by_cat_pair() {
        let m = mode(30);
        let h = build_single_hamiltonian(
            &SingleKpoParams {
                chi: 0.1,
                delta: 0.0,
                p: 0.4,
                r: 0.0,
            },
            m,
        );
        let eig = HermitianEigen::new(h.entries()).unwrap();
        let e = eig.values();
        assert!((e[0] + 1.6).abs() < 1e-6, "{}", e[0]);
        assert!((e[1] - e[0]).abs() < 1e-3 && e[2] - e[1] > 0.1);
        let vecs = eig.vectors();
        let alpha = (0.4f64 / 0.1).sqrt();
        for sign in [1.0, -1.0] {
            let c = coherent_state(C64::new(sign * alpha, 0.0), m).unwrap();
            // Weight of |±α⟩ inside the two-dimensional ground eigenspace.
            let weight: f64 = (0..2)
                .map(|col| {
                    let v = StateVector::new(m.into(), (0..30).map(|i| vecs[(i, col)]).collect())
                        .unwrap();
                    overlap(&v, &c).unwrap().norm_sqr()
                })
                .sum();
            assert!(weight >= 0.99, "{weight}");
        }
    }

    #[test]
    fn decoupled_network_is_kronecker_sum() {
        let m = mode(4);
        let space = CompositeSpace::uniform(2, 4).unwrap();
        let p1 = SingleKpoParams {
            chi: 0.3,
            delta: -0.2,
            p: 0.5,
            r: 0.1,
        };
        let p2 = SingleKpoParams {
            chi: 1.0,
            delta: 0.7,
            p: -0.4,
            r: -0.9,
        };
        let net = NetworkParams {
            per_mode: vec![p1, p2],
            coupling: vec![],
        };
        let h = build_network_hamiltonian(&net, &space).unwrap();
        let i = OperatorMatrix::identity(m.into());
        let h1 = crate::fock::tensor_ops(&[&build_single_hamiltonian(&p1, m), &i]).unwrap();
        let h2 = crate::fock::tensor_ops(&[&i, &build_single_hamiltonian(&p2, m)]).unwrap();
        let sum = &h1 + &h2;
        assert!(linalg::max_abs_diff(h.entries(), sum.entries()) < 1e-14);
    }

    #[test]
    fn hopping_matrix_element() {
        let space = CompositeSpace::uniform(2, 3).unwrap();
        let zero = SingleKpoParams {
            chi: 0.0,
            delta: 0.0,
            p: 0.0,
            r: 0.0,
        };
        let net = NetworkParams {
            per_mode: vec![zero, zero],
            coupling: vec![Coupling {
                to: 1,
                from: 0,
                value: C64::new(-0.1, 0.0),
            }],
        };
        let h = build_network_hamiltonian(&net, &space).unwrap();
        let i10 = space.index_of(&[1, 0]);
        let i01 = space.index_of(&[0, 1]);
        assert!((h.get(i10, i01).re + 0.1).abs() < 1e-15);
        assert!((h.get(i01, i10).re + 0.1).abs() < 1e-15);
    }

    #[test]
    fn bad_coupling_indices_rejected() {
        let space = CompositeSpace::uniform(2, 3).unwrap();
        let bad = [Coupling {
            to: 0,
            from: 1,
            value: C64::new(1.0, 0.0),
        }];
        assert!(NetworkTerms::new(&space, &bad).is_err());
        let out = [Coupling {
            to: 2,
            from: 0,
            value: C64::new(1.0, 0.0),
        }];
        assert!(matches!(
            NetworkTerms::new(&space, &out),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn evolve_examples() {
        let m = mode(5);
        let n = number_op(m);
        let u0 = evolve_unitary(&n, 0.0).unwrap();
        assert!(max_abs_diff(u0.entries(), &linalg::identity(5)) < 1e-15);
        let u = evolve_unitary(&n, 0.7).unwrap();
        assert!((u.get(2, 2) - C64::from_polar(1.0, -1.4)).norm() < 1e-14);
        assert!(u.is_unitary());

        let mut not_h = linalg::identity(5);
        not_h[(0, 3)] = C64::new(0.0, 1.0);
        let op = OperatorMatrix::new(m.into(), not_h).unwrap();
        assert!(matches!(
            evolve_unitary(&op, 1.0),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn evolve_matches_taylor_oracle() {
        for seed in 0..3 {
            let h = random_hermitian(8, seed);
            let op = OperatorMatrix::hermitian(CompositeSpace::uniform(1, 8).unwrap(), h.clone())
                .unwrap();
            let u = evolve_unitary(&op, 0.7).unwrap();
            let oracle = taylor_exp(&h, 0.7);
            assert!(max_abs_diff(u.entries(), &oracle) < 1e-9);
            assert!(unitarity_defect(u.entries()) < 1e-10);
        }
    }

    #[test]
    fn encoding_examples() {
        let m = mode(6);
        let id = encode_input_single(
            0.0,
            &EncodingParams {
                chi_tilde: 0.0,
                t_d: 0.7,
            },
            m,
        );
        assert!(max_abs_diff(id.entries(), &linalg::identity(6)) == 0.0);

        let u = encode_input_single(
            1.0,
            &EncodingParams {
                chi_tilde: 0.07,
                t_d: 0.7,
            },
            m,
        );
        let expected = C64::from_polar(1.0, -(0.07 + PI));
        assert!((u.get(1, 1) - expected).norm() < 1e-15);
        assert!(u.is_unitary());
    }

    #[test]
    fn encoding_matches_hamiltonian_exponential() {
        let (chi, t_d) = (0.1, 0.7);
        let enc = EncodingParams::from_kerr(chi, t_d);
        let m = mode(25);
        for &x in &[-0.9, -0.2, 0.0, 0.35, 1.0] {
            let delta = enc.single_mode_detuning(x, chi);
            let h = build_single_hamiltonian(
                &SingleKpoParams {
                    chi,
                    delta,
                    p: 0.0,
                    r: 0.0,
                },
                m,
            );
            let oracle = evolve_unitary(&h, t_d).unwrap();
            let u = encode_input_single(x, &enc, m);
            assert!(
                max_abs_diff(u.entries(), oracle.entries()) <= 1e-12,
                "x = {x}"
            );
        }
    }

    #[test]
    fn network_encoding_examples() {
        let m = mode(4);
        let space = CompositeSpace::uniform(2, 4).unwrap();
        let enc = EncodingParams {
            chi_tilde: 0.3,
            t_d: 1.0,
        };
        let id = encode_input_network(&[], &enc, &space, &[]).unwrap();
        assert_eq!(id.entries(), &linalg::identity(16));

        let both = encode_input_network(&[0.4, 0.4], &enc, &space, &[0, 1]).unwrap();
        let single = encode_input_single(0.4, &enc, m);
        let oracle = crate::fock::tensor_ops(&[&single, &single]).unwrap();
        assert!(max_abs_diff(both.entries(), oracle.entries()) < 1e-15);

        let two = encode_input_network(&[0.2, -0.7], &enc, &space, &[0, 1]).unwrap();
        let idx = space.index_of(&[2, 3]);
        let phase = |x: f64, k: f64| C64::from_polar(1.0, -(0.3 * k * k + PI * x * k));
        assert!((two.get(idx, idx) - phase(0.2, 2.0) * phase(-0.7, 3.0)).norm() < 1e-14);

        assert!(encode_input_network(&[0.1], &enc, &space, &[2]).is_err());
    }

    #[test]
    fn layered_circuit_examples() {
        let m = mode(6);
        let space: CompositeSpace = m.into();
        let layout = ThetaLayout::new(3, 1).unwrap();
        let zero_consts = CircuitConsts {
            chi: vec![0.0],
            coupling: vec![],
        };
        let v = layered_circuit(&[0.0; 9], layout, &zero_consts, 0.7, &space).unwrap();
        assert!(max_abs_diff(v.entries(), &linalg::identity(6)) < 1e-14);

        let consts = CircuitConsts {
            chi: vec![0.1],
            coupling: vec![],
        };
        let theta1 = [0.3, -0.2, 0.5];
        let v1 = layered_circuit(
            &theta1,
            ThetaLayout::new(1, 1).unwrap(),
            &consts,
            0.7,
            &space,
        )
        .unwrap();
        let h1 = build_single_hamiltonian(
            &SingleKpoParams {
                chi: 0.1,
                delta: 0.3,
                p: -0.2,
                r: 0.5,
            },
            m,
        );
        let direct = evolve_unitary(&h1, 0.7).unwrap();
        assert!(max_abs_diff(v1.entries(), direct.entries()) < 1e-14);

        let theta2 = [0.3, -0.2, 0.5, -0.8, 0.6, 0.1];
        let v = layered_circuit(
            &theta2,
            ThetaLayout::new(2, 1).unwrap(),
            &consts,
            0.7,
            &space,
        )
        .unwrap();
        let h2 = build_single_hamiltonian(
            &SingleKpoParams {
                chi: 0.1,
                delta: -0.8,
                p: 0.6,
                r: 0.1,
            },
            m,
        );
        let f1 = evolve_unitary(&h1, 0.7).unwrap();
        let f2 = evolve_unitary(&h2, 0.7).unwrap();
        assert!(max_abs_diff(v.entries(), (&f2 * &f1).entries()) < 1e-12);

        assert!(layered_circuit(&[0.0; 5], layout, &consts, 0.7, &space).is_err());
    }

    #[test]
    fn theta_layout_single_mode_rule() {
        let layout = ThetaLayout::new(12, 1).unwrap();
        assert_eq!(layout.len(), 36);
        assert_eq!(layout.locate(0), (0, 0, ParamKind::Detuning));
        assert_eq!(layout.locate(4), (1, 0, ParamKind::Pump));
        assert_eq!(layout.locate(35), (11, 0, ParamKind::Drive));
        let net = ThetaLayout::new(6, 2).unwrap();
        assert_eq!(net.len(), 36);
        // (Δ11, Δ12, p11, p12, r11, r12, Δ21, ...)
        assert_eq!(net.index(0, 1, ParamKind::Detuning), 1);
        assert_eq!(net.index(0, 0, ParamKind::Pump), 2);
        assert_eq!(net.index(1, 0, ParamKind::Detuning), 6);
        for k in 0..36 {
            let (l, j, kind) = net.locate(k);
            assert_eq!(net.index(l, j, kind), k);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn network_hamiltonian_is_hermitian(
            vals in proptest::collection::vec(-1.0f64..1.0, 8),
            jre in -1.0f64..1.0,
            jim in -1.0f64..1.0,
        ) {
            let space = CompositeSpace::uniform(2, 4).unwrap();
            let net = NetworkParams {
                per_mode: vec![
                    SingleKpoParams { chi: vals[0].abs(), delta: vals[1], p: vals[2], r: vals[3] },
                    SingleKpoParams { chi: vals[4].abs(), delta: vals[5], p: vals[6], r: vals[7] },
                ],
                coupling: vec![Coupling { to: 1, from: 0, value: C64::new(jre, jim) }],
            };
            let h = build_network_hamiltonian(&net, &space).unwrap();
            prop_assert!(linalg::hermiticity_defect(h.entries()) <= 1e-12);
            let u = evolve_unitary(&h, 1.0).unwrap();
            prop_assert!(unitarity_defect(u.entries()) <= 1e-10);
        }

        #[test]
        fn encoder_commutes_with_number(x in -1.0f64..1.0, chi_tilde in 0.0f64..1.0) {
            let m = mode(7);
            let u = encode_input_single(x, &EncodingParams { chi_tilde, t_d: 1.0 }, m);
            let n = number_op(m);
            let (un, nu) = (&u * &n, &n * &u);
            prop_assert_eq!(un.entries(), nu.entries());
        }
    }
}
