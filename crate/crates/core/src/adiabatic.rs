//! Adiabatic coherent-state preparation.
//!
//! Start in the vacuum, the ground state of `χ a†²a² + Δ₀ a†a` for `Δ₀ > χ`,
//! and sweep linearly to `Δ = 0`, `p = p_final` while a small negative drive
//! `r` selects `|+√(p/χ)⟩` out of the degenerate pair. The sweep is simulated
//! as `num_steps` piecewise-constant propagators, each evaluated at the
//! midpoint of its interval.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{build_single_hamiltonian, SingleKpoParams};
use crate::error::{Error, Result};
use crate::fock::{coherent_state, overlap, ModeSpace, StateVector};
use crate::linalg::{mat_vec, HermitianEigen};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSchedule {
    pub total_time: f64,
    pub num_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticParams {
    pub chi: f64,
    pub p_final: f64,
    pub r_perturbation: f64,
    pub delta_initial: f64,
}

impl AdiabaticParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.chi > 0.0) {
            return Err(Error::invalid(
                "chi",
                format!("must be positive, got {}", self.chi),
            ));
        }
        if !(self.p_final > 0.0) {
            return Err(Error::invalid(
                "p_final",
                format!("must be positive, got {}", self.p_final),
            ));
        }
        if !(self.delta_initial > self.chi) {
            return Err(Error::invalid(
                "delta_initial",
                format!("must exceed chi = {}, got {}", self.chi, self.delta_initial),
            ));
        }
        if !(self.r_perturbation < 0.0) {
            return Err(Error::invalid(
                "r_perturbation",
                format!("must be negative, got {}", self.r_perturbation),
            ));
        }
        Ok(())
    }

    /// Amplitude of the target coherent state, `√(p/χ)`.
    pub fn target_alpha(&self) -> f64 {
        (self.p_final / self.chi).sqrt()
    }

    /// Hamiltonian parameters at sweep fraction `s ∈ [0, 1]`.
    pub fn at(&self, s: f64) -> SingleKpoParams {
        SingleKpoParams {
            chi: self.chi,
            delta: self.delta_initial * (1.0 - s),
            p: self.p_final * s,
            r: self.r_perturbation,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdiabaticOutcome {
    pub state: StateVector,
    /// `|⟨√(p/χ)|ψ(T)⟩|²`.
    pub fidelity: f64,
    pub target_alpha: f64,
    /// `(t, fidelity)` at `t = 0` and after every step.
    pub trace: Vec<(f64, f64)>,
}

pub fn adiabatic_prepare(
    params: &AdiabaticParams,
    schedule: &SweepSchedule,
    space: ModeSpace,
) -> Result<AdiabaticOutcome> {
    params.validate()?;
    if schedule.num_steps == 0 {
        return Err(Error::invalid("num_steps", "must be at least 1"));
    }
    if !(schedule.total_time >= 0.0) || !schedule.total_time.is_finite() {
        return Err(Error::invalid(
            "total_time",
            format!(
                "must be finite and non-negative, got {}",
                schedule.total_time
            ),
        ));
    }

    let target = coherent_state(C64::new(params.target_alpha(), 0.0), space)?;
    let fidelity = |psi: &StateVector| -> Result<f64> { Ok(overlap(&target, psi)?.norm_sqr()) };

    let mut psi = StateVector::basis(space.into(), &[0])?;
    let dt = schedule.total_time / schedule.num_steps as f64;
    let mut trace = Vec::with_capacity(schedule.num_steps + 1);
    trace.push((0.0, fidelity(&psi)?));
    for step in 0..schedule.num_steps {
        let s = (step as f64 + 0.5) / schedule.num_steps as f64;
        let h = build_single_hamiltonian(&params.at(s), space);
        let u = HermitianEigen::new(h.entries())?.unitary(dt);
        psi = StateVector::new(space.into(), mat_vec(&u, psi.amplitudes()))?;
        trace.push(((step + 1) as f64 * dt, fidelity(&psi)?));
    }
    let fid = fidelity(&psi)?;
    Ok(AdiabaticOutcome {
        state: psi,
        fidelity: fid,
        target_alpha: params.target_alpha(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::HermitianEigen;

    fn params() -> AdiabaticParams {
        AdiabaticParams {
            chi: 0.1,
            p_final: 0.4,
            r_perturbation: -0.01,
            delta_initial: 0.5,
        }
    }

    #[test]
    fn initial_ground_state_is_vacuum() {
        let start = SingleKpoParams {
            r: 0.0,
            ..params().at(0.0)
        };
        let h = build_single_hamiltonian(&start, ModeSpace::new(20).unwrap());
        let eig = HermitianEigen::new(h.entries()).unwrap();
        assert!((eig.vectors()[(0, 0)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sudden_quench_stays_in_vacuum() {
        let out = adiabatic_prepare(
            &params(),
            &SweepSchedule {
                total_time: 1e-9,
                num_steps: 1,
            },
            ModeSpace::new(25).unwrap(),
        )
        .unwrap();
        // |⟨2|0⟩|² = e^{-4}
        assert!((out.fidelity - (-4.0f64).exp()).abs() < 1e-6);
        assert!(out.fidelity < 0.99);
    }

    #[test]
    fn slow_sweep_reaches_coherent_state() {
        let out = adiabatic_prepare(
            &params(),
            &SweepSchedule {
                total_time: 400.0,
                num_steps: 800,
            },
            ModeSpace::new(25).unwrap(),
        )
        .unwrap();
        assert!(out.fidelity >= 0.99, "{}", out.fidelity);
        assert!((out.state.norm() - 1.0).abs() < 1e-10);
        assert_eq!(out.trace.len(), 801);
    }

    #[test]
    fn fidelity_grows_with_sweep_time() {
        let fids: Vec<f64> = [100.0, 200.0, 400.0, 800.0]
            .iter()
            .map(|&t| {
                let sched = SweepSchedule {
                    total_time: t,
                    num_steps: (2.0 * t) as usize,
                };
                adiabatic_prepare(&params(), &sched, ModeSpace::new(25).unwrap())
                    .unwrap()
                    .fidelity
            })
            .collect();
        assert!(fids.windows(2).all(|w| w[1] >= w[0]), "{fids:?}");
    }

    #[test]
    fn preconditions() {
        let m = ModeSpace::new(10).unwrap();
        let sched = SweepSchedule {
            total_time: 1.0,
            num_steps: 1,
        };
        let mut p = params();
        p.delta_initial = 0.05;
        assert!(adiabatic_prepare(&p, &sched, m).is_err());
        let mut p = params();
        p.r_perturbation = 0.01;
        assert!(adiabatic_prepare(&p, &sched, m).is_err());
        let zero = SweepSchedule {
            total_time: 1.0,
            num_steps: 0,
        };
        assert!(adiabatic_prepare(&params(), &zero, m).is_err());
    }
}
