//! Evaluable scalar fields on R^n, functions on the affine Grassmannian,
//! and finite atomic measures.
//!
//! Fields carry support/decay metadata so the transform routines can choose
//! truncation radii.  Gaussian tails are assigned the effective radius at
//! which the profile drops below 1e-16 of its peak.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project_complement, Subspace};
use crate::quadrature::fixed_order_sum;

/// ln(1e16): tail cut used to assign finite effective radii to Gaussian decay.
const TAIL_CUT_LOG: f64 = 36.841_361_487_904_73;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayTag {
    Compact,
    Gaussian,
    Power,
}

/// Declarative description of a spatial field, loadable from CLI configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    /// amplitude * exp(-width |x - center|^2)
    Gaussian {
        width: f64,
        #[serde(default)]
        center: Vec<f64>,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// amplitude * exp(1 - 1/(1 - |x - center|^2/radius^2)) on |x - center| < radius
    Bump {
        radius: f64,
        #[serde(default)]
        center: Vec<f64>,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Sum {
        terms: Vec<FieldSpec>,
    },
    /// amplitude / (1 + |x|^2)^(exponent/2); no finite support, power decay.
    InversePower {
        exponent: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug)]
enum FieldKind {
    Gaussian {
        width: f64,
        center: DVector<f64>,
        amplitude: f64,
    },
    Bump {
        radius: f64,
        center: DVector<f64>,
        amplitude: f64,
    },
    Sum(Vec<SpatialField>),
    InversePower {
        exponent: f64,
        amplitude: f64,
    },
}

/// An evaluable scalar function on R^n with support and decay metadata.
#[derive(Clone, Debug)]
pub struct SpatialField {
    dim: usize,
    kind: FieldKind,
    support_radius: f64,
    decay: DecayTag,
}

impl SpatialField {
    /// amplitude * exp(-width |x - center|^2).
    pub fn gaussian(dim: usize, width: f64, center: &[f64], amplitude: f64) -> Result<Self> {
        if width <= 0.0 {
            return Err(Error::parameter("gaussian width must be positive"));
        }
        let center = center_vec(dim, center)?;
        let support_radius = center.norm() + (TAIL_CUT_LOG / width).sqrt();
        Ok(SpatialField {
            dim,
            kind: FieldKind::Gaussian {
                width,
                center,
                amplitude,
            },
            support_radius,
            decay: DecayTag::Gaussian,
        })
    }

    /// Smooth bump supported on |x - center| < radius, peak `amplitude`.
    pub fn bump(dim: usize, radius: f64, center: &[f64], amplitude: f64) -> Result<Self> {
        if radius <= 0.0 {
            return Err(Error::parameter("bump radius must be positive"));
        }
        let center = center_vec(dim, center)?;
        let support_radius = center.norm() + radius;
        Ok(SpatialField {
            dim,
            kind: FieldKind::Bump {
                radius,
                center,
                amplitude,
            },
            support_radius,
            decay: DecayTag::Compact,
        })
    }

    pub fn sum(terms: Vec<SpatialField>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::parameter("sum of fields needs at least one term"));
        }
        let dim = terms[0].dim;
        if terms.iter().any(|t| t.dim != dim) {
            return Err(Error::parameter("sum terms must share the ambient dimension"));
        }
        let support_radius = terms
            .iter()
            .map(|t| t.support_radius)
            .fold(0.0f64, f64::max);
        let decay = terms
            .iter()
            .map(|t| t.decay)
            .fold(DecayTag::Compact, worse_decay);
        Ok(SpatialField {
            dim,
            kind: FieldKind::Sum(terms),
            support_radius,
            decay,
        })
    }

    /// amplitude / (1 + |x|^2)^(exponent/2).
    pub fn inverse_power(dim: usize, exponent: f64, amplitude: f64) -> Result<Self> {
        if exponent <= 0.0 {
            return Err(Error::parameter("decay exponent must be positive"));
        }
        Ok(SpatialField {
            dim,
            kind: FieldKind::InversePower {
                exponent,
                amplitude,
            },
            support_radius: f64::INFINITY,
            decay: DecayTag::Power,
        })
    }

    pub fn from_spec(spec: &FieldSpec, dim: usize) -> Result<Self> {
        match spec {
            FieldSpec::Gaussian {
                width,
                center,
                amplitude,
            } => SpatialField::gaussian(dim, *width, center, *amplitude),
            FieldSpec::Bump {
                radius,
                center,
                amplitude,
            } => SpatialField::bump(dim, *radius, center, *amplitude),
            FieldSpec::Sum { terms } => SpatialField::sum(
                terms
                    .iter()
                    .map(|t| SpatialField::from_spec(t, dim))
                    .collect::<Result<Vec<_>>>()?,
            ),
            FieldSpec::InversePower {
                exponent,
                amplitude,
            } => SpatialField::inverse_power(dim, *exponent, *amplitude),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn decay(&self) -> DecayTag {
        self.decay
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.kind {
            FieldKind::Gaussian {
                width,
                center,
                amplitude,
            } => {
                let d2 = (x - center).norm_squared();
                amplitude * (-width * d2).exp()
            }
            FieldKind::Bump {
                radius,
                center,
                amplitude,
            } => {
                let s2 = (x - center).norm_squared() / (radius * radius);
                if s2 >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - 1.0 / (1.0 - s2)).exp()
                }
            }
            FieldKind::Sum(terms) => terms.iter().map(|t| t.eval(x)).sum(),
            FieldKind::InversePower {
                exponent,
                amplitude,
            } => amplitude * (1.0 + x.norm_squared()).powf(-exponent / 2.0),
        }
    }

    /// Flattens nested sums into leaf fields.
    pub fn leaves(&self) -> Vec<&SpatialField> {
        match &self.kind {
            FieldKind::Sum(terms) => terms.iter().flat_map(|t| t.leaves()).collect(),
            _ => vec![self],
        }
    }

    /// The field scaled by a constant factor.
    pub fn scaled(&self, c: f64) -> SpatialField {
        let mut out = self.clone();
        out.scale_in_place(c);
        out
    }

    fn scale_in_place(&mut self, c: f64) {
        match &mut self.kind {
            FieldKind::Gaussian { amplitude, .. }
            | FieldKind::Bump { amplitude, .. }
            | FieldKind::InversePower { amplitude, .. } => *amplitude *= c,
            FieldKind::Sum(terms) => {
                for t in terms {
                    t.scale_in_place(c);
                }
            }
        }
    }

    /// Closed-form Radon transform over H + z of a single Gaussian leaf;
    /// `None` for shapes without one.
    pub fn radon_exact_leaf(&self, h: &Subspace, z: &DVector<f64>) -> Option<f64> {
        match &self.kind {
            FieldKind::Gaussian {
                width,
                center,
                amplitude,
            } => {
                let d = h.ambient_dim() - h.codim();
                let zc = project_complement(center, h).ok()?;
                let off = (z - &zc).norm_squared();
                Some(
                    amplitude
                        * (std::f64::consts::PI / width).powf(d as f64 / 2.0)
                        * (-width * off).exp(),
                )
            }
            _ => None,
        }
    }

    /// Closed-form Fourier transform of a single Gaussian leaf.
    pub fn fourier_exact_leaf(&self, xi: &DVector<f64>) -> Option<Complex64> {
        match &self.kind {
            FieldKind::Gaussian {
                width,
                center,
                amplitude,
            } => {
                let n = self.dim as f64;
                let magnitude = amplitude
                    * (std::f64::consts::PI / width).powf(n / 2.0)
                    * (-xi.norm_squared() / (4.0 * width)).exp();
                let phase = -center.dot(xi);
                Some(Complex64::from_polar(magnitude, phase))
            }
            _ => None,
        }
    }
}

fn center_vec(dim: usize, center: &[f64]) -> Result<DVector<f64>> {
    if center.is_empty() {
        Ok(DVector::zeros(dim))
    } else if center.len() == dim {
        Ok(DVector::from_column_slice(center))
    } else {
        Err(Error::DimensionMismatch {
            expected: dim,
            got: center.len(),
        })
    }
}

fn worse_decay(a: DecayTag, b: DecayTag) -> DecayTag {
    use DecayTag::*;
    match (a, b) {
        (Power, _) | (_, Power) => Power,
        (Gaussian, _) | (_, Gaussian) => Gaussian,
        _ => Compact,
    }
}

/// Radon transform over any (n-k)-plane H + z of f(x) = e^{-a |x|^2}:
/// (pi/a)^{(n-k)/2} e^{-a |z|^2}, independent of H.
pub fn gaussian_radon_closed_form(a: f64, n: usize, k: usize, z_norm: f64) -> Result<f64> {
    if a <= 0.0 {
        return Err(Error::parameter("gaussian width must be positive"));
    }
    if k == 0 || k >= n {
        return Err(Error::parameter(format!(
            "need 0 < k < n, got n = {n}, k = {k}"
        )));
    }
    if z_norm < 0.0 {
        return Err(Error::parameter("offset norm must be non-negative"));
    }
    let d = (n - k) as f64;
    Ok((std::f64::consts::PI / a).powf(d / 2.0) * (-a * z_norm * z_norm).exp())
}

/// A finite atomic signed measure: atoms in R^d (ambient space or the frame
/// coordinates of some H-perp) with real weights.
#[derive(Clone, Debug)]
pub struct DiscreteMeasure {
    atoms: Vec<DVector<f64>>,
    weights: Vec<f64>,
    nonneg: bool,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<DVector<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::parameter("atom and weight counts differ"));
        }
        if atoms.is_empty() {
            return Err(Error::parameter("measure needs at least one atom"));
        }
        let dim = atoms[0].len();
        if atoms.iter().any(|a| a.len() != dim) {
            return Err(Error::parameter("atoms must share a dimension"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::parameter("weights must be finite"));
        }
        let nonneg = weights.iter().all(|&w| w >= 0.0);
        Ok(DiscreteMeasure {
            atoms,
            weights,
            nonneg,
        })
    }

    /// Unit point mass at x0.
    pub fn dirac(x0: DVector<f64>) -> Self {
        DiscreteMeasure {
            atoms: vec![x0],
            weights: vec![1.0],
            nonneg: true,
        }
    }

    pub fn atoms(&self) -> &[DVector<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_nonneg(&self) -> bool {
        self.nonneg
    }

    pub fn total_variation(&self) -> f64 {
        let abs: Vec<f64> = self.weights.iter().map(|w| w.abs()).collect();
        fixed_order_sum(&abs)
    }

    /// Total mass (signed).
    pub fn total_mass(&self) -> f64 {
        fixed_order_sum(&self.weights)
    }
}

/// mu-hat(xi) = sum_j w_j e^{-i x_j . xi}; |mu-hat| <= |mu|(R^n).
pub fn measure_fourier(mu: &DiscreteMeasure, xi: &DVector<f64>) -> Result<Complex64> {
    if xi.len() != mu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            got: xi.len(),
        });
    }
    let re: Vec<f64> = mu
        .atoms
        .iter()
        .zip(&mu.weights)
        .map(|(x, &w)| w * (-x.dot(xi)).cos())
        .collect();
    let im: Vec<f64> = mu
        .atoms
        .iter()
        .zip(&mu.weights)
        .map(|(x, &w)| w * (-x.dot(xi)).sin())
        .collect();
    Ok(Complex64::new(fixed_order_sum(&re), fixed_order_sum(&im)))
}

type GrassmannEval = dyn Fn(&Subspace, &DVector<f64>) -> f64 + Send + Sync;

/// An evaluable function g(H, z), z in H-perp frame coordinates.
#[derive(Clone)]
pub struct GrassmannFunction {
    eval: Arc<GrassmannEval>,
    support_radius: f64,
    even: bool,
    dims: Option<(usize, usize)>,
}

impl std::fmt::Debug for GrassmannFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GrassmannFunction")
            .field("support_radius", &self.support_radius)
            .field("even", &self.even)
            .field("dims", &self.dims)
            .finish()
    }
}

impl GrassmannFunction {
    /// Wraps a raw evaluator.  `support_radius` is the |z| radius beyond
    /// which the function is negligible (exactly zero for compact support).
    pub fn new<F>(eval: F, support_radius: f64, even: bool) -> Self
    where
        F: Fn(&Subspace, &DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        GrassmannFunction {
            eval: Arc::new(eval),
            support_radius,
            even,
            dims: None,
        }
    }

    pub fn with_dims(mut self, n: usize, k: usize) -> Self {
        self.dims = Some((n, k));
        self
    }

    /// amplitude * e^{-width |z|^2}, independent of H.
    pub fn gaussian_in_z(width: f64, amplitude: f64) -> Result<Self> {
        if width <= 0.0 {
            return Err(Error::parameter("gaussian width must be positive"));
        }
        let radius = (TAIL_CUT_LOG / width).sqrt();
        Ok(GrassmannFunction::new(
            move |_h, z| amplitude * (-width * z.norm_squared()).exp(),
            radius,
            true,
        ))
    }

    /// Smooth bump in |z| < radius, peak `amplitude`, independent of H.
    pub fn bump_in_z(radius: f64, amplitude: f64) -> Result<Self> {
        if radius <= 0.0 {
            return Err(Error::parameter("bump radius must be positive"));
        }
        let r2 = radius * radius;
        Ok(GrassmannFunction::new(
            move |_h, z| {
                let s2 = z.norm_squared() / r2;
                if s2 >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - 1.0 / (1.0 - s2)).exp()
                }
            },
            radius,
            true,
        ))
    }

    /// Bump profile centered at |z| = rho with half-width sigma; an even,
    /// compactly supported annular atom.
    pub fn radial_bump_atom(rho: f64, sigma: f64, amplitude: f64) -> Result<Self> {
        if sigma <= 0.0 || rho < 0.0 {
            return Err(Error::parameter("atom needs sigma > 0 and rho >= 0"));
        }
        Ok(GrassmannFunction::new(
            move |_h, z| {
                let s = (z.norm() - rho) / sigma;
                let s2 = s * s;
                if s2 >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - 1.0 / (1.0 - s2)).exp()
                }
            },
            rho + sigma,
            true,
        ))
    }

    pub fn constant(value: f64) -> Self {
        GrassmannFunction::new(move |_h, _z| value, f64::INFINITY, true)
    }

    pub fn eval(&self, h: &Subspace, z: &DVector<f64>) -> f64 {
        (self.eval)(h, z)
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn is_even(&self) -> bool {
        self.even
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.dims
    }

    pub fn scale(&self, c: f64) -> Self {
        let inner = self.eval.clone();
        GrassmannFunction {
            eval: Arc::new(move |h, z| c * inner(h, z)),
            support_radius: self.support_radius,
            even: self.even,
            dims: self.dims,
        }
    }

    pub fn add(&self, other: &GrassmannFunction) -> Self {
        let a = self.eval.clone();
        let b = other.eval.clone();
        GrassmannFunction {
            eval: Arc::new(move |h, z| a(h, z) + b(h, z)),
            support_radius: self.support_radius.max(other.support_radius),
            even: self.even && other.even,
            dims: self.dims.or(other.dims),
        }
    }

    pub fn sub(&self, other: &GrassmannFunction) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &GrassmannFunction) -> Self {
        let a = self.eval.clone();
        let b = other.eval.clone();
        GrassmannFunction {
            eval: Arc::new(move |h, z| a(h, z) * b(h, z)),
            support_radius: self.support_radius.min(other.support_radius),
            even: self.even && other.even,
            dims: self.dims.or(other.dims),
        }
    }

    /// max(g, 0)^q.  For admissible functions the clamp only sanitizes
    /// negative rounding noise.
    pub fn pow_nonneg(&self, q: f64) -> Self {
        let inner = self.eval.clone();
        // Fractional powers slow a Gaussian tail down; stretch the effective
        // radius accordingly.
        let stretch = if q < 1.0 { (1.0 / q).sqrt() } else { 1.0 };
        GrassmannFunction {
            eval: Arc::new(move |h, z| inner(h, z).max(0.0).powf(q)),
            support_radius: self.support_radius * stretch,
            even: self.even,
            dims: self.dims,
        }
    }
}

/// Declarative description of a Grassmannian function for CLI configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrassmannFnSpec {
    GaussianInZ {
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    BumpInZ {
        radius: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Constant {
        value: f64,
    },
    Sum {
        terms: Vec<GrassmannFnSpec>,
    },
    /// Seeded random positive combination clipped into the band
    /// [beta e^{-alpha |z|^2}, gamma e^{-alpha |z|^2}].
    Pinched {
        alpha: f64,
        beta: f64,
        gamma: f64,
        seed: u64,
    },
    /// (R_{n-k} field)^power; evaluated through the transform module.
    RadonOfField {
        field: FieldSpec,
        #[serde(default = "one")]
        power: f64,
    },
}

/// Seeded pinched function: a positive combination of Gaussians in |z| with a
/// mild frame-invariant H-dependence, clipped into the pinch band.
pub fn pinched_function(alpha: f64, beta: f64, gamma: f64, seed: u64) -> Result<GrassmannFunction> {
    if alpha <= 0.0 || beta <= 0.0 || gamma <= 0.0 {
        return Err(Error::parameter("pinch parameters must be positive"));
    }
    if beta > gamma {
        return Err(Error::parameter("pinch band requires beta <= gamma"));
    }
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..1.0)).collect();
    let widths: Vec<f64> = (0..3)
        .map(|_| rng.random_range(alpha..(2.0 * alpha)))
        .collect();
    let mods: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
    let scale = 0.5 * (beta + gamma);
    let radius = (TAIL_CUT_LOG / alpha).sqrt();
    Ok(GrassmannFunction::new(
        move |h, z| {
            // |P_{H-perp} e1|^2 is frame-invariant and lies in [0, 1].
            let e1 = DVector::from_fn(h.ambient_dim(), |i, _| if i == 0 { 1.0 } else { 0.0 });
            let t = project_complement(&e1, h)
                .map(|v| v.norm_squared())
                .unwrap_or(0.0);
            let z2 = z.norm_squared();
            let base: f64 = (0..3)
                .map(|j| scale * coeffs[j] * (-widths[j] * z2).exp() * (1.0 + mods[j] * t))
                .sum();
            let env = (-alpha * z2).exp();
            base.clamp(beta * env, gamma * env)
        },
        radius,
        true,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use crate::quadrature::oracles::gauss_hermite;

    #[test]
    fn gaussian_closed_form_trivial_values() {
        // n - k = 1: a one-dimensional Gaussian integral.
        let v = gaussian_radon_closed_form(1.0, 2, 1, 0.0).unwrap();
        assert_relative_eq!(v, std::f64::consts::PI.sqrt(), max_relative = 1e-12);
        let v = gaussian_radon_closed_form(1.0, 3, 2, 0.0).unwrap();
        assert_relative_eq!(v, std::f64::consts::PI.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn gaussian_closed_form_offset_case() {
        // (a=2, n=3, k=1, |z|=1) -> (pi/2) e^{-2}.
        let v = gaussian_radon_closed_form(2.0, 3, 1, 1.0).unwrap();
        assert_relative_eq!(
            v,
            std::f64::consts::FRAC_PI_2 * (-2.0f64).exp(),
            max_relative = 1e-12
        );
        assert_relative_eq!(v, 0.21258, max_relative = 1e-4);
    }

    #[test]
    fn gaussian_closed_form_rejects_bad_parameters() {
        assert!(gaussian_radon_closed_form(0.0, 2, 1, 0.0).is_err());
        assert!(gaussian_radon_closed_form(-1.0, 2, 1, 0.0).is_err());
        assert!(gaussian_radon_closed_form(1.0, 2, 2, 0.0).is_err());
    }

    /// Independent oracle: tensor Gauss-Hermite integration of
    /// e^{-a |y + z|^2} over the plane, using only y . z = 0.
    fn hermite_plane_integral(a: f64, plane_dim: usize, z_norm: f64) -> f64 {
        let rule = gauss_hermite(64);
        // Each axis: int e^{-a y^2} dy = a^{-1/2} sum w_i.
        let one_axis: f64 = rule.iter().map(|&(_, w)| w).sum::<f64>() / a.sqrt();
        one_axis.powi(plane_dim as i32) * (-a * z_norm * z_norm).exp()
    }

    #[test]
    fn gaussian_closed_form_matches_hermite_oracle() {
        for &(n, k) in &[(2usize, 1usize), (3, 1), (3, 2), (4, 1), (4, 2), (4, 3)] {
            for &a in &[0.5, 1.0, 2.0] {
                for &z in &[0.0, 0.7, 1.3] {
                    let got = gaussian_radon_closed_form(a, n, k, z).unwrap();
                    let oracle = hermite_plane_integral(a, n - k, z);
                    assert_relative_eq!(got, oracle, max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn measure_fourier_point_masses() {
        let dirac0 = DiscreteMeasure::dirac(DVector::zeros(2));
        for xi in [
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![1.5, -2.0]),
        ] {
            let v = measure_fourier(&dirac0, &xi).unwrap();
            assert_relative_eq!(v.re, 1.0, epsilon = 1e-15);
            assert_relative_eq!(v.im, 0.0, epsilon = 1e-15);
        }

        let x0 = DVector::from_vec(vec![0.4, 1.1]);
        let mu = DiscreteMeasure::new(vec![x0.clone()], vec![2.5]).unwrap();
        let xi = DVector::from_vec(vec![-0.3, 0.9]);
        let v = measure_fourier(&mu, &xi).unwrap();
        let phase = -x0.dot(&xi);
        assert_relative_eq!(v.re, 2.5 * phase.cos(), epsilon = 1e-14);
        assert_relative_eq!(v.im, 2.5 * phase.sin(), epsilon = 1e-14);

        // Symmetric pair: .5 delta_{x0} + .5 delta_{-x0} -> cos(x0 . xi).
        let mu = DiscreteMeasure::new(vec![x0.clone(), -&x0], vec![0.5, 0.5]).unwrap();
        let v = measure_fourier(&mu, &xi).unwrap();
        assert_relative_eq!(v.re, x0.dot(&xi).cos(), epsilon = 1e-14);
        assert_relative_eq!(v.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn measure_fourier_dimension_mismatch() {
        let mu = DiscreteMeasure::dirac(DVector::zeros(3));
        let xi = DVector::zeros(2);
        assert!(measure_fourier(&mu, &xi).is_err());
    }

    proptest! {
        #[test]
        fn fourier_modulus_bounded_by_total_variation(
            seed in 0u64..1000,
            atoms in 1usize..10,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<DVector<f64>> = (0..atoms)
                .map(|_| DVector::from_fn(3, |_, _| rng.random_range(-4.0..4.0)))
                .collect();
            let ws: Vec<f64> = (0..atoms).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mu = DiscreteMeasure::new(pts, ws).unwrap();
            let xi = DVector::from_fn(3, |_, _| rng.random_range(-5.0..5.0));
            let v = measure_fourier(&mu, &xi).unwrap();
            prop_assert!(v.norm() <= mu.total_variation() + 1e-12);
        }
    }

    #[test]
    fn gaussian_field_invariants() {
        let f = SpatialField::gaussian(3, 0.8, &[], 1.0).unwrap();
        let zero = DVector::zeros(3);
        let peak = f.eval(&zero);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let x = DVector::from_fn(3, |_, _| rng.random_range(-6.0..6.0));
            let v = f.eval(&x);
            assert!(v > 0.0 && v <= peak);
        }
        assert_eq!(f.decay(), DecayTag::Gaussian);
        assert!(f.support_radius().is_finite());
    }

    #[test]
    fn bump_field_vanishes_outside_support() {
        let f = SpatialField::bump(2, 1.0, &[0.5, 0.0], 2.0).unwrap();
        assert_eq!(f.decay(), DecayTag::Compact);
        assert_relative_eq!(f.support_radius(), 1.5);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let x = DVector::from_fn(2, |_, _| rng.random_range(-4.0..4.0));
            let v = f.eval(&x);
            if x.norm() > f.support_radius() {
                assert_eq!(v, 0.0);
            }
            assert!(v.abs() <= 2.0);
        }
        let center = DVector::from_vec(vec![0.5, 0.0]);
        assert_relative_eq!(f.eval(&center), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn sum_field_combines_support_and_decay() {
        let g = SpatialField::gaussian(2, 1.0, &[], 1.0).unwrap();
        let b = SpatialField::bump(2, 0.5, &[], -1.5).unwrap();
        let s = SpatialField::sum(vec![g.clone(), b.clone()]).unwrap();
        assert_eq!(s.decay(), DecayTag::Gaussian);
        let x = DVector::from_vec(vec![0.1, -0.2]);
        assert_relative_eq!(s.eval(&x), g.eval(&x) + b.eval(&x), epsilon = 1e-15);
        assert_eq!(s.leaves().len(), 2);
    }

    #[test]
    fn field_spec_round_trip() {
        let spec = FieldSpec::Sum {
            terms: vec![
                FieldSpec::Gaussian {
                    width: 1.0,
                    center: vec![],
                    amplitude: 1.0,
                },
                FieldSpec::Bump {
                    radius: 0.9,
                    center: vec![0.0, 0.0],
                    amplitude: -1.7,
                },
            ],
        };
        let json = serde_json::to_string(&spec).unwrap();
        let back: FieldSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
        let f = SpatialField::from_spec(&spec, 2).unwrap();
        assert!(f.eval(&DVector::zeros(2)) < 0.0);
    }

    #[test]
    fn grassmann_function_evenness_and_combinators() {
        let g = GrassmannFunction::gaussian_in_z(1.0, 2.0).unwrap();
        let h = Subspace::coordinate(3, 1).unwrap();
        let z = DVector::from_vec(vec![0.7]);
        let neg = -&z;
        assert!(g.is_even());
        assert_relative_eq!(g.eval(&h, &z), g.eval(&h, &neg), epsilon = 1e-12);
        assert!(g.eval(&h, &DVector::zeros(1)).is_finite());

        let sum = g.add(&g.scale(-0.5));
        assert_relative_eq!(sum.eval(&h, &z), 0.5 * g.eval(&h, &z), epsilon = 1e-13);
        let sq = g.pow_nonneg(2.0);
        assert_relative_eq!(sq.eval(&h, &z), g.eval(&h, &z).powi(2), epsilon = 1e-13);
    }

    #[test]
    fn pinched_function_stays_in_band() {
        let (alpha, beta, gamma) = (1.0f64, 1.0f64, 2.0f64);
        let g = pinched_function(alpha, beta, gamma, 5).unwrap();
        let gq = crate::geometry::haar_sample(2, 1, 30, 9).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for h in gq.nodes() {
            for _ in 0..20 {
                let z = DVector::from_vec(vec![rng.random_range(-4.0..4.0f64)]);
                let env = (-alpha * z.norm_squared()).exp();
                let v = g.eval(h, &z);
                assert!(v >= beta * env - 1e-12 && v <= gamma * env + 1e-12);
            }
        }
        assert!(pinched_function(1.0, 2.0, 1.0, 0).is_err());
    }

    #[test]
    fn radial_bump_atom_support() {
        let atom = GrassmannFunction::radial_bump_atom(2.0, 0.5, 1.0).unwrap();
        let h = Subspace::coordinate(2, 1).unwrap();
        assert_eq!(atom.support_radius(), 2.5);
        assert!(atom.eval(&h, &DVector::from_vec(vec![2.0])) > 0.9);
        assert_eq!(atom.eval(&h, &DVector::from_vec(vec![2.6])), 0.0);
        assert_eq!(atom.eval(&h, &DVector::from_vec(vec![1.4])), 0.0);
        // Even in z.
        assert_relative_eq!(
            atom.eval(&h, &DVector::from_vec(vec![-2.1])),
            atom.eval(&h, &DVector::from_vec(vec![2.1])),
            epsilon = 1e-14
        );
    }
}
