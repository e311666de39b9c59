//! Nelder-Mead simplex minimisation.
//!
//! The update rules, initial simplex and stopping test follow the
//! non-adaptive variant of `scipy.optimize.minimize(method="Nelder-Mead")`:
//! the run stops once both the largest coordinate spread and the largest
//! cost spread of the simplex (measured from the best vertex) are within
//! their tolerances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmConfig {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    pub x_tolerance: f64,
    pub f_tolerance: f64,
    /// `200 · n` when absent.
    #[serde(default)]
    pub max_iterations: Option<usize>,
    /// No limit when absent.
    #[serde(default)]
    pub max_evaluations: Option<usize>,
}

impl Default for NmConfig {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            x_tolerance: 1e-4,
            f_tolerance: 1e-4,
            max_iterations: None,
            max_evaluations: None,
        }
    }
}

impl NmConfig {
    pub fn iteration_limit(&self, n: usize) -> usize {
        self.max_iterations.unwrap_or(200 * n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reflection > 0.0) {
            return Err(Error::invalid("reflection", "must be positive"));
        }
        if !(self.expansion > self.reflection) {
            return Err(Error::invalid(
                "expansion",
                "must exceed the reflection coefficient",
            ));
        }
        if !(self.contraction > 0.0 && self.contraction < 1.0) {
            return Err(Error::invalid("contraction", "must lie in (0, 1)"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::invalid("shrink", "must lie in (0, 1)"));
        }
        if !(self.x_tolerance >= 0.0) || !(self.f_tolerance >= 0.0) {
            return Err(Error::invalid("tolerance", "must be non-negative"));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::invalid("max_iterations", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Tolerance,
    MaxIterations,
    MaxEvaluations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimTrace {
    /// Best cost after each iteration; entry 0 is the initial simplex.
    pub best_costs: Vec<f64>,
    pub theta: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

struct Counted<F> {
    f: F,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn call(&mut self, x: &[f64]) -> Result<f64> {
        self.evaluations += 1;
        let v = (self.f)(x);
        if !v.is_finite() {
            return Err(Error::NonFiniteCost {
                value: v,
                theta: x.to_vec(),
            });
        }
        Ok(v)
    }
}

/// Affine combination `(1 + a) centroid − a · worst`.
fn step(centroid: &[f64], worst: &[f64], a: f64) -> Vec<f64> {
    centroid
        .iter()
        .zip(worst)
        .map(|(c, w)| (1.0 + a) * c - a * w)
        .collect()
}

pub fn minimize<F>(cost: F, theta0: &[f64], config: &NmConfig) -> Result<OptimTrace>
where
    F: FnMut(&[f64]) -> f64,
{
    config.validate()?;
    let n = theta0.len();
    if n == 0 {
        return Err(Error::invalid("theta0", "needs at least one parameter"));
    }
    let max_iter = config.iteration_limit(n);
    let max_eval = config.max_evaluations.unwrap_or(usize::MAX);
    let (rho, chi, psi, sigma) = (
        config.reflection,
        config.expansion,
        config.contraction,
        config.shrink,
    );
    let mut f = Counted {
        f: cost,
        evaluations: 0,
    };

    let mut sim: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    sim.push(theta0.to_vec());
    for k in 0..n {
        let mut y = theta0.to_vec();
        y[k] = if y[k] != 0.0 { 1.05 * y[k] } else { 0.00025 };
        sim.push(y);
    }
    let mut fsim = Vec::with_capacity(n + 1);
    for v in &sim {
        fsim.push(f.call(v)?);
    }
    sort_simplex(&mut sim, &mut fsim);

    let mut best_costs = vec![fsim[0]];
    let mut iterations = 0;
    let termination = loop {
        let x_spread = sim[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&sim[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        let f_spread = fsim[1..]
            .iter()
            .map(|v| (fsim[0] - v).abs())
            .fold(0.0f64, f64::max);
        if x_spread <= config.x_tolerance && f_spread <= config.f_tolerance {
            break Termination::Tolerance;
        }
        if iterations >= max_iter {
            break Termination::MaxIterations;
        }
        if f.evaluations >= max_eval {
            break Termination::MaxEvaluations;
        }

        let mut centroid = vec![0.0; n];
        for v in &sim[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= n as f64);
        let worst = sim[n].clone();

        let xr = step(&centroid, &worst, rho);
        let fxr = f.call(&xr)?;
        let mut do_shrink = false;
        if fxr < fsim[0] {
            let xe = step(&centroid, &worst, rho * chi);
            let fxe = f.call(&xe)?;
            if fxe < fxr {
                sim[n] = xe;
                fsim[n] = fxe;
            } else {
                sim[n] = xr;
                fsim[n] = fxr;
            }
        } else if fxr < fsim[n - 1] {
            sim[n] = xr;
            fsim[n] = fxr;
        } else if fxr < fsim[n] {
            let xc = step(&centroid, &worst, psi * rho);
            let fxc = f.call(&xc)?;
            if fxc <= fxr {
                sim[n] = xc;
                fsim[n] = fxc;
            } else {
                do_shrink = true;
            }
        } else {
            let xcc = step(&centroid, &worst, -psi);
            let fxcc = f.call(&xcc)?;
            if fxcc < fsim[n] {
                sim[n] = xcc;
                fsim[n] = fxcc;
            } else {
                do_shrink = true;
            }
        }
        if do_shrink {
            for j in 1..=n {
                let moved: Vec<f64> = sim[0]
                    .iter()
                    .zip(&sim[j])
                    .map(|(b, v)| b + sigma * (v - b))
                    .collect();
                fsim[j] = f.call(&moved)?;
                sim[j] = moved;
            }
        }
        sort_simplex(&mut sim, &mut fsim);
        iterations += 1;
        best_costs.push(fsim[0]);
    };

    Ok(OptimTrace {
        best_costs,
        theta: sim[0].clone(),
        cost: fsim[0],
        iterations,
        evaluations: f.evaluations,
        termination,
    })
}

/// Stable sort of the vertices by cost.
fn sort_simplex(sim: &mut Vec<Vec<f64>>, fsim: &mut Vec<f64>) {
    let mut order: Vec<usize> = (0..fsim.len()).collect();
    order.sort_by(|&a, &b| fsim[a].total_cmp(&fsim[b]));
    *sim = order.iter().map(|&i| std::mem::take(&mut sim[i])).collect();
    *fsim = order.iter().map(|&i| fsim[i]).collect();
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quad(x: &[f64]) -> f64 {
        (x[0] - 1.0).powi(2) + (x[1] + 2.0).powi(2)
    }

    #[test]
    fn quadratic_bowl() {
        let cfg = NmConfig {
            x_tolerance: 1e-8,
            f_tolerance: 1e-12,
            ..NmConfig::default()
        };
        let out = minimize(quad, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(out.termination, Termination::Tolerance);
        assert!(out.iterations < 200, "{}", out.iterations);
        assert!(
            (out.theta[0] - 1.0).abs() < 1e-6 && (out.theta[1] + 2.0).abs() < 1e-6,
            "{:?}",
            out.theta
        );
        assert!(out.evaluations > out.iterations);
    }

    #[test]
    fn iteration_cap_at_two_hundred_per_parameter() {
        // A 36-dimensional Rosenbrock valley is far too slow to settle.
        let x0: Vec<f64> = (0..36)
            .map(|i| if i % 2 == 0 { -1.2 } else { 1.0 })
            .collect();
        let out = minimize(rosen, &x0, &NmConfig::default()).unwrap();
        assert_eq!(out.termination, Termination::MaxIterations);
        assert_eq!(out.iterations, 7200);
        assert_eq!(out.best_costs.len(), 7201);
    }

    #[test]
    fn evaluation_cap() {
        let cfg = NmConfig {
            max_evaluations: Some(100),
            ..NmConfig::default()
        };
        let out = minimize(rosen, &[-1.2, 1.0, -1.2, 1.0], &cfg).unwrap();
        assert_eq!(out.termination, Termination::MaxEvaluations);
        assert!(out.evaluations >= 100 && out.evaluations < 100 + 4 + 2);
    }

    #[test]
    fn constant_cost_stops_on_f_tolerance() {
        let out = minimize(|_: &[f64]| 3.0, &[0.0, 0.0, 0.0], &NmConfig::default()).unwrap();
        // Initial spread in x is 2.5e-4 > 1e-4, so a few shrinks happen first.
        assert_eq!(out.termination, Termination::Tolerance);
        assert!(out.iterations <= 2, "{}", out.iterations);
        let out = minimize(
            |_: &[f64]| 3.0,
            &[0.0; 3],
            &NmConfig {
                x_tolerance: 1e-3,
                ..NmConfig::default()
            },
        )
        .unwrap();
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn reports_non_finite_cost() {
        let err = minimize(
            |x: &[f64]| if x[0] > 1.02 { f64::NAN } else { x[0] },
            &[1.0, 1.0],
            &NmConfig::default(),
        )
        .unwrap_err();
        match err {
            Error::NonFiniteCost { value, theta } => {
                assert!(value.is_nan());
                assert_eq!(theta, vec![1.05, 1.0]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_coefficients() {
        let cfg = NmConfig {
            expansion: 0.5,
            ..NmConfig::default()
        };
        assert!(minimize(quad, &[0.0, 0.0], &cfg).is_err());
        let cfg = NmConfig {
            max_iterations: Some(0),
            ..NmConfig::default()
        };
        assert!(minimize(quad, &[0.0, 0.0], &cfg).is_err());
    }

    fn rosen(x: &[f64]) -> f64 {
        x.windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn best_cost_never_increases(x0 in proptest::collection::vec(-2.0f64..2.0, 2..6)) {
            let cfg = NmConfig { max_iterations: Some(300), ..NmConfig::default() };
            let a = minimize(rosen, &x0, &cfg).unwrap();
            prop_assert!(a.best_costs.windows(2).all(|w| w[1] <= w[0]));
            prop_assert_eq!(a.cost, *a.best_costs.last().unwrap());
            let b = minimize(rosen, &x0, &cfg).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
