//! Target functions and seeded training sets on `[-1, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{SeededUniform, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetFunction {
    /// `e^{-36x²}`
    Gaussian,
    /// `|x|`
    Abs,
    /// `1` for `|x| < 0.4`, else `0`.
    SquareWave,
    /// `0.4 sin 4πx + 0.5 sin 6πx`
    TwoSines,
    /// Piecewise-linear interpolation through `points`, sorted by `x`.
    /// Constant extrapolation outside the table.
    Custom {
        name: String,
        points: Vec<(f64, f64)>,
    },
}

impl TargetFunction {
    pub fn name(&self) -> &str {
        match self {
            TargetFunction::Gaussian => "gaussian",
            TargetFunction::Abs => "abs",
            TargetFunction::SquareWave => "square-wave",
            TargetFunction::TwoSines => "two-sines",
            TargetFunction::Custom { name, .. } => name,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let TargetFunction::Custom { points, .. } = self {
            if points.is_empty() {
                return Err(Error::invalid(
                    "points",
                    "custom target needs at least one point",
                ));
            }
            if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                return Err(Error::invalid(
                    "points",
                    "custom target points must be finite",
                ));
            }
            if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(Error::invalid(
                    "points",
                    "x values must be strictly increasing",
                ));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            TargetFunction::Gaussian => (-36.0 * x * x).exp(),
            TargetFunction::Abs => x.abs(),
            TargetFunction::SquareWave => {
                if x.abs() < 0.4 {
                    1.0
                } else {
                    0.0
                }
            }
            TargetFunction::TwoSines => 0.4 * (4.0 * PI * x).sin() + 0.5 * (6.0 * PI * x).sin(),
            TargetFunction::Custom { points, .. } => interpolate(points, x),
        }
    }
}

fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let (first, last) = (points[0], points[points.len() - 1]);
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let i = points.partition_point(|p| p.0 <= x);
    let ((x0, y0), (x1, y1)) = (points[i - 1], points[i]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub seed: u64,
    pub target: TargetFunction,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// `n` inputs drawn uniformly on `[-1, 1)` from the dataset stream of `seed`,
/// labelled with `target`.
pub fn generate_dataset(target: &TargetFunction, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("num_samples", "must be at least 1"));
    }
    target.validate()?;
    let mut rng = SeededUniform::new(seed, Stream::Dataset);
    let x: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let y = x.iter().map(|&v| target.eval(v)).collect();
    Ok(Dataset {
        x,
        y,
        seed,
        target: target.clone(),
    })
}

/// Uniform grid of `n` points covering `[-1, 1]` including both ends.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_values() {
        assert_eq!(TargetFunction::Abs.eval(-0.5), 0.5);
        assert_eq!(TargetFunction::SquareWave.eval(0.4), 0.0);
        assert_eq!(TargetFunction::SquareWave.eval(-0.4), 0.0);
        assert_eq!(TargetFunction::SquareWave.eval(0.399), 1.0);
        assert_eq!(TargetFunction::Gaussian.eval(0.0), 1.0);
        assert!((TargetFunction::Gaussian.eval(0.5) - (-9.0f64).exp()).abs() < 1e-15);
        assert!(
            (TargetFunction::TwoSines.eval(0.125)
                - (0.4 + 0.5 * (0.75 * std::f64::consts::PI).sin()))
            .abs()
                < 1e-12
        );
    }

    #[test]
    fn custom_table_interpolates() {
        let t = TargetFunction::Custom {
            name: "tent".into(),
            points: vec![(-1.0, 0.0), (0.0, 1.0), (1.0, 0.0)],
        };
        assert_eq!(t.eval(-0.5), 0.5);
        assert_eq!(t.eval(0.0), 1.0);
        assert_eq!(t.eval(2.0), 0.0);
        let bad = TargetFunction::Custom {
            name: "b".into(),
            points: vec![(0.0, 0.0), (0.0, 1.0)],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn datasets_are_reproducible() {
        let a = generate_dataset(&TargetFunction::Abs, 50, 3).unwrap();
        let b = generate_dataset(&TargetFunction::Abs, 50, 3).unwrap();
        let c = generate_dataset(&TargetFunction::Abs, 50, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.x, c.x);
        assert!(a.x.iter().all(|&x| (-1.0..=1.0).contains(&x)));
        assert!(a.x.iter().zip(&a.y).all(|(&x, &y)| y == x.abs()));
        assert!(generate_dataset(&TargetFunction::Abs, 0, 3).is_err());
    }

    #[test]
    fn grid_endpoints() {
        let g = uniform_grid(1000);
        assert_eq!(g.len(), 1000);
        assert_eq!(g[0], -1.0);
        assert_eq!(g[999], 1.0);
    }
}
