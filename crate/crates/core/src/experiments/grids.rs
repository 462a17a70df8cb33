//! Shared experiment configuration: Haar/plane resolution and the finite
//! grids on which pointwise hypotheses (R*g <= R*h and friends) are checked.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{GrassmannFnSpec, GrassmannFunction, SpatialField};
use crate::geometry::{haar_sample, GrassmannQuadrature};
use crate::quadrature::uniform_sphere_point;
use crate::transforms::{radon_function, PlaneQuadratureSpec};

/// Density of the spatial grid used for pointwise hypothesis checks:
/// `radii` shells up to `r_max`, `directions` seeded directions per shell,
/// plus the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub radii: usize,
    pub directions: usize,
    pub r_max: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            radii: 16,
            directions: 32,
            r_max: 6.0,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.radii == 0 || self.directions == 0 || !(self.r_max > 0.0) {
            return Err(Error::parameter(
                "hypothesis grid needs radii >= 1, directions >= 1, r_max > 0",
            ));
        }
        Ok(())
    }

    /// The grid points: origin plus radii x directions, seeded.
    pub fn points(&self, n: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dirs: Vec<DVector<f64>> = (0..self.directions)
            .map(|_| uniform_sphere_point(n, &mut rng))
            .collect();
        let mut out = vec![DVector::zeros(n)];
        for i in 1..=self.radii {
            let r = self.r_max * i as f64 / self.radii as f64;
            for d in &dirs {
                out.push(d * r);
            }
        }
        out
    }
}

/// Dimensions, seed and quadrature resolution shared by every experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseConfig {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    #[serde(default = "default_grassmann_count")]
    pub grassmann_count: usize,
    pub plane: PlaneQuadratureSpec,
    #[serde(default)]
    pub grid: GridConfig,
}

fn default_grassmann_count() -> usize {
    200
}

impl BaseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k >= self.n {
            return Err(Error::parameter(format!(
                "need 0 < k < n, got n = {}, k = {}",
                self.n, self.k
            )));
        }
        if self.grassmann_count == 0 {
            return Err(Error::parameter("grassmann_count must be positive"));
        }
        self.plane.validate()?;
        self.grid.validate()
    }

    pub fn haar(&self) -> Result<GrassmannQuadrature> {
        haar_sample(self.n, self.k, self.grassmann_count, self.seed)
    }

    /// Hypothesis grid points seeded independently of the Haar sample.
    pub fn hypothesis_points(&self) -> Vec<DVector<f64>> {
        self.grid.points(self.n, self.seed ^ 0x9e37_79b9_7f4a_7c15)
    }
}

/// Builds a Grassmannian function from a declarative spec; `RadonOfField`
/// evaluates through the transform with the supplied plane resolution.
pub fn build_grassmann_fn(
    spec: &GrassmannFnSpec,
    n: usize,
    plane: &PlaneQuadratureSpec,
) -> Result<GrassmannFunction> {
    match spec {
        GrassmannFnSpec::GaussianInZ { width, amplitude } => {
            GrassmannFunction::gaussian_in_z(*width, *amplitude)
        }
        GrassmannFnSpec::BumpInZ { radius, amplitude } => {
            GrassmannFunction::bump_in_z(*radius, *amplitude)
        }
        GrassmannFnSpec::Constant { value } => Ok(GrassmannFunction::constant(*value)),
        GrassmannFnSpec::Sum { terms } => {
            if terms.is_empty() {
                return Err(Error::parameter("sum needs at least one term"));
            }
            let mut acc = build_grassmann_fn(&terms[0], n, plane)?;
            for t in &terms[1..] {
                acc = acc.add(&build_grassmann_fn(t, n, plane)?);
            }
            Ok(acc)
        }
        GrassmannFnSpec::Pinched {
            alpha,
            beta,
            gamma,
            seed,
        } => crate::fields::pinched_function(*alpha, *beta, *gamma, *seed),
        GrassmannFnSpec::RadonOfField { field, power } => {
            let f = SpatialField::from_spec(field, n)?;
            let rf = radon_function(&f, plane);
            Ok(if (*power - 1.0).abs() < 1e-15 {
                rf
            } else {
                rf.pow_nonneg(*power)
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_count_and_determinism() {
        let grid = GridConfig {
            radii: 4,
            directions: 8,
            r_max: 2.0,
        };
        let a = grid.points(3, 7);
        let b = grid.points(3, 7);
        assert_eq!(a.len(), 1 + 4 * 8);
        assert_eq!(a, b);
        assert!(a[0].norm() == 0.0);
        assert!((a.last().unwrap().norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn base_config_validation() {
        let mut cfg = BaseConfig {
            n: 2,
            k: 1,
            seed: 0,
            grassmann_count: 10,
            plane: PlaneQuadratureSpec::tensor(16, 8.0),
            grid: GridConfig::default(),
        };
        assert!(cfg.validate().is_ok());
        cfg.k = 2;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn build_sum_and_radon_specs() {
        let plane = PlaneQuadratureSpec::tensor(32, 8.0);
        let spec = GrassmannFnSpec::Sum {
            terms: vec![
                GrassmannFnSpec::GaussianInZ {
                    width: 1.0,
                    amplitude: 1.0,
                },
                GrassmannFnSpec::BumpInZ {
                    radius: 1.0,
                    amplitude: 0.5,
                },
            ],
        };
        let g = build_grassmann_fn(&spec, 2, &plane).unwrap();
        let h = crate::geometry::Subspace::coordinate(2, 1).unwrap();
        let z = DVector::zeros(1);
        assert!((g.eval(&h, &z) - 1.5).abs() < 1e-12);

        // (R gaussian)^{1/2} at z = 0 for n = 2, k = 1: pi^{1/4}.
        let spec = GrassmannFnSpec::RadonOfField {
            field: crate::fields::FieldSpec::Gaussian {
                width: 1.0,
                center: vec![],
                amplitude: 1.0,
            },
            power: 0.5,
        };
        let g = build_grassmann_fn(&spec, 2, &plane).unwrap();
        let v = g.eval(&h, &z);
        assert!((v - std::f64::consts::PI.powf(0.25)).abs() < 1e-9);
    }
}
