//! The forward (n-k)-dimensional Radon transform, its dual, slice Fourier
//! transforms, measure pushforwards, duality pairings, and weighted norms on
//! the affine Grassmannian.
//!
//! Rf(H, z) = int_H f(y + z) dy is computed by quadrature over the plane,
//! truncated where the field's decay metadata says the integrand is
//! negligible.  R*g(x) = int g(H, P_{H-perp} x) dnu(H) is a weighted sum over
//! the Haar node set.  Offsets z and frequencies omega are always expressed
//! in the orthonormal frame of H-perp, so dot products in frame coordinates
//! equal the ambient ones.
//!
//! For k = 1 the forward transform coincides with the classical Radon
//! transform under (t, theta) <-> (H = theta-perp, z = t theta).  The
//! classical dual integrates over the sphere, which visits each subspace
//! twice; with the Haar normalization used here the conversion constant is
//! [`classical_dual_scale`] (it equals 1/2 exactly when nu is taken to be
//! half the sphere measure instead).

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{DecayTag, DiscreteMeasure, GrassmannFunction, SpatialField};
use crate::geometry::{
    grassmannian_total_mass, project_complement, GrassmannQuadrature, Subspace,
};
use crate::quadrature::{
    ball_volume, fixed_order_sum, gauss_legendre_on, sphere_quadrature, sphere_surface,
    uniform_sphere_point,
};

/// Atoms whose projections land within this distance are merged by
/// [`pushforward_measure`].
pub const ATOM_MERGE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum PlaneScheme {
    TensorGauss,
    PolarGauss,
    MonteCarlo { seed: u64 },
}

/// How to discretize integrals over a plane (or over H-perp): scheme,
/// per-axis budget, and a truncation radius capping the domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneQuadratureSpec {
    #[serde(flatten)]
    pub scheme: PlaneScheme,
    pub budget: usize,
    pub truncation_radius: f64,
}

impl PlaneQuadratureSpec {
    pub fn tensor(budget: usize, truncation_radius: f64) -> Self {
        PlaneQuadratureSpec {
            scheme: PlaneScheme::TensorGauss,
            budget,
            truncation_radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget < 2 {
            return Err(Error::parameter("plane quadrature budget must be >= 2"));
        }
        if !(self.truncation_radius > 0.0) {
            return Err(Error::parameter("truncation radius must be positive"));
        }
        Ok(())
    }
}

/// Node set for integration over a ball of the given radius in R^d,
/// expressed in frame coordinates.  The tensor scheme covers the enclosing
/// cube; integrands are expected to be negligible outside the ball.
fn plane_nodes(
    d: usize,
    radius: f64,
    spec: &PlaneQuadratureSpec,
) -> Result<Vec<(DVector<f64>, f64)>> {
    spec.validate()?;
    if d == 0 {
        return Err(Error::parameter("plane dimension must be positive"));
    }
    if radius <= 0.0 {
        return Ok(Vec::new());
    }
    match spec.scheme {
        PlaneScheme::TensorGauss => {
            let axis = gauss_legendre_on(-radius, radius, spec.budget);
            let mut nodes = Vec::with_capacity(axis.len().pow(d as u32));
            let mut idx = vec![0usize; d];
            loop {
                let mut p = DVector::zeros(d);
                let mut w = 1.0;
                for (axis_i, &i) in idx.iter().enumerate() {
                    let (x, wx) = axis[i];
                    p[axis_i] = x;
                    w *= wx;
                }
                nodes.push((p, w));
                if !advance(&mut idx, axis.len()) {
                    break;
                }
            }
            Ok(nodes)
        }
        PlaneScheme::PolarGauss => {
            if d == 1 {
                return Ok(gauss_legendre_on(-radius, radius, spec.budget)
                    .into_iter()
                    .map(|(x, w)| (DVector::from_vec(vec![x]), w))
                    .collect());
            }
            let radial = gauss_legendre_on(0.0, radius, spec.budget);
            let angular = sphere_quadrature(d, spec.budget, 0)?;
            let mut nodes = Vec::with_capacity(radial.len() * angular.len());
            for &(r, wr) in &radial {
                let jac = wr * r.powi(d as i32 - 1);
                for (theta, wt) in &angular {
                    nodes.push((theta * r, jac * wt));
                }
            }
            Ok(nodes)
        }
        PlaneScheme::MonteCarlo { seed } => {
            let count = spec.budget.pow(d as u32).max(spec.budget);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vol = ball_volume(d) * radius.powi(d as i32);
            let w = vol / count as f64;
            let mut nodes = Vec::with_capacity(count);
            for _ in 0..count {
                let dir = uniform_sphere_point(d, &mut rng);
                let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
                nodes.push((dir * r, w));
            }
            Ok(nodes)
        }
    }
}

/// Odometer increment over a tensor grid; returns false when it wraps.
fn advance(idx: &mut [usize], base: usize) -> bool {
    for slot in idx.iter_mut() {
        *slot += 1;
        if *slot == base {
            *slot = 0;
        } else {
            return true;
        }
    }
    false
}

/// Radius of the integration ball inside the plane H + z for a field whose
/// support ball (around the origin) has radius `support`: points of H + z at
/// in-plane distance u from the foot point satisfy |y + z|^2 = u^2 + |z|^2.
fn in_plane_radius(support: f64, z_norm: f64) -> f64 {
    if support.is_infinite() {
        f64::INFINITY
    } else {
        (support * support - z_norm * z_norm).max(0.0).sqrt()
    }
}

fn check_integrable(f: &SpatialField) -> Result<()> {
    if f.decay() == DecayTag::Power && f.support_radius().is_infinite() {
        return Err(Error::UnsupportedField(
            "power-law decay without finite support; the plane integral may diverge".into(),
        ));
    }
    Ok(())
}

/// Quadrature approximation of Rf(H, z) = int_H f(y + z) dy, with z given in
/// H-perp frame coordinates.  Sums integrate leaf by leaf so that each
/// component is resolved on its own support scale.
pub fn radon(
    f: &SpatialField,
    h: &Subspace,
    z: &DVector<f64>,
    spec: &PlaneQuadratureSpec,
) -> Result<f64> {
    check_integrable(f)?;
    if f.dim() != h.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: h.ambient_dim(),
            got: f.dim(),
        });
    }
    if z.len() != h.codim() {
        return Err(Error::DimensionMismatch {
            expected: h.codim(),
            got: z.len(),
        });
    }
    let z_emb = h.embed_perp(z);
    let parts: Vec<f64> = f
        .leaves()
        .iter()
        .map(|leaf| radon_leaf(leaf, h, &z_emb, spec))
        .collect::<Result<Vec<f64>>>()?;
    Ok(fixed_order_sum(&parts))
}

fn radon_leaf(
    leaf: &SpatialField,
    h: &Subspace,
    z_emb: &DVector<f64>,
    spec: &PlaneQuadratureSpec,
) -> Result<f64> {
    let r = in_plane_radius(leaf.support_radius(), z_emb.norm()).min(spec.truncation_radius);
    if r <= 0.0 {
        return Ok(0.0);
    }
    let d = h.ambient_dim() - h.codim();
    let nodes = plane_nodes(d, r, spec)?;
    let terms: Vec<f64> = nodes
        .iter()
        .map(|(u, w)| w * leaf.eval(&(h.embed_h(u) + z_emb)))
        .collect();
    Ok(fixed_order_sum(&terms))
}

/// Rf(H, z) evaluated with closed forms for the Gaussian components of the
/// field and quadrature for the rest.  Identical contract to [`radon`]; used
/// where the transform appears inside another quadrature loop.
pub fn radon_hybrid(
    f: &SpatialField,
    h: &Subspace,
    z: &DVector<f64>,
    spec: &PlaneQuadratureSpec,
) -> Result<f64> {
    check_integrable(f)?;
    if z.len() != h.codim() {
        return Err(Error::DimensionMismatch {
            expected: h.codim(),
            got: z.len(),
        });
    }
    let z_emb = h.embed_perp(z);
    let parts: Vec<f64> = f
        .leaves()
        .iter()
        .map(|leaf| match leaf.radon_exact_leaf(h, z) {
            Some(v) => Ok(v),
            None => radon_leaf(leaf, h, &z_emb, spec),
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(fixed_order_sum(&parts))
}

/// Wraps Rf as an evaluable Grassmannian function, with closed forms where
/// the field has them.  The even flag is set only for fields that are
/// exactly centrally symmetric about the origin (not detected here).
pub fn radon_function(f: &SpatialField, spec: &PlaneQuadratureSpec) -> GrassmannFunction {
    let field = f.clone();
    let spec = *spec;
    let support = f.support_radius();
    GrassmannFunction::new(
        move |h, z| radon_hybrid(&field, h, z, &spec).unwrap_or(0.0),
        support,
        false,
    )
}

/// R*g(x): weighted sum of g(H, P_{H-perp} x) over the Haar node set.
pub fn dual_radon(
    g: &GrassmannFunction,
    x: &DVector<f64>,
    gq: &GrassmannQuadrature,
) -> Result<f64> {
    let (n, k) = gq.dims();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    if let Some((gn, gk)) = g.dims() {
        if gn != n || gk != k {
            return Err(Error::parameter(format!(
                "function dims ({gn}, {gk}) do not match quadrature dims ({n}, {k})"
            )));
        }
    }
    let terms: Vec<f64> = gq
        .nodes()
        .iter()
        .zip(gq.weights())
        .map(|(h, &w)| {
            let z = h.frame_hperp().transpose() * x;
            w * g.eval(h, &z)
        })
        .collect();
    Ok(fixed_order_sum(&terms))
}

/// F_k g(H, omega) = int_{H-perp} e^{-i omega . z} g(H, z) dz, omega in
/// H-perp frame coordinates.
pub fn slice_fourier(
    g: &GrassmannFunction,
    h: &Subspace,
    omega: &DVector<f64>,
    spec: &PlaneQuadratureSpec,
) -> Result<Complex64> {
    let k = h.codim();
    if omega.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: omega.len(),
        });
    }
    let r = g.support_radius().min(spec.truncation_radius);
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::UnsupportedInput(
            "slice Fourier transform needs a finite effective support in z".into(),
        ));
    }
    let nodes = plane_nodes(k, r, spec)?;
    let re: Vec<f64> = nodes
        .iter()
        .map(|(z, w)| w * g.eval(h, z) * (-omega.dot(z)).cos())
        .collect();
    let im: Vec<f64> = nodes
        .iter()
        .map(|(z, w)| w * g.eval(h, z) * (-omega.dot(z)).sin())
        .collect();
    Ok(Complex64::new(fixed_order_sum(&re), fixed_order_sum(&im)))
}

/// Walks the tensor grid over axes 1..n with axis 0 pinned, accumulating
/// f(x) * weight into the supplied closure in fixed order.
fn tensor_slice_sum<F>(axis: &[(f64, f64)], n: usize, x0: f64, w0: f64, mut term: F) -> Vec<f64>
where
    F: FnMut(&DVector<f64>, f64) -> f64,
{
    let mut out = Vec::new();
    let mut idx = vec![0usize; n - 1];
    let mut x = DVector::zeros(n);
    x[0] = x0;
    loop {
        let mut w = w0;
        for (j, &i) in idx.iter().enumerate() {
            let (xj, wj) = axis[i];
            x[j + 1] = xj;
            w *= wj;
        }
        out.push(term(&x, w));
        if !advance(&mut idx, axis.len()) {
            break;
        }
    }
    out
}

/// f-hat(xi) = int f(x) e^{-i x . xi} dx by tensor quadrature over the
/// effective support cube, parallelized over the first axis.
pub fn field_fourier(
    f: &SpatialField,
    xi: &DVector<f64>,
    spec: &PlaneQuadratureSpec,
) -> Result<Complex64> {
    check_integrable(f)?;
    spec.validate()?;
    if xi.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: xi.len(),
        });
    }
    let r = f.support_radius().min(spec.truncation_radius);
    let n = f.dim();
    let axis = gauss_legendre_on(-r, r, spec.budget);
    let slices: Vec<(f64, f64)> = axis
        .par_iter()
        .map(|&(x0, w0)| {
            let mut im_terms = Vec::new();
            let re_terms = tensor_slice_sum(&axis, n, x0, w0, |x, w| {
                let phase = -x.dot(xi);
                let v = w * f.eval(x);
                im_terms.push(v * phase.sin());
                v * phase.cos()
            });
            (fixed_order_sum(&re_terms), fixed_order_sum(&im_terms))
        })
        .collect();
    let re: Vec<f64> = slices.iter().map(|s| s.0).collect();
    let im: Vec<f64> = slices.iter().map(|s| s.1).collect();
    Ok(Complex64::new(fixed_order_sum(&re), fixed_order_sum(&im)))
}

/// Closed-form f-hat when every leaf of the field has one.
pub fn field_fourier_exact(f: &SpatialField, xi: &DVector<f64>) -> Option<Complex64> {
    let mut total = Complex64::new(0.0, 0.0);
    for leaf in f.leaves() {
        total += leaf.fourier_exact_leaf(xi)?;
    }
    Some(total)
}

/// int_{R^n} f(x) dx over the effective support cube.
pub fn field_integral(f: &SpatialField, spec: &PlaneQuadratureSpec) -> Result<f64> {
    let zero = DVector::zeros(f.dim());
    Ok(field_fourier(f, &zero, spec)?.re)
}

/// Pushforward of an atomic measure under P_{H-perp}: atoms are projected to
/// H-perp frame coordinates, weights are kept, and exact collisions (within
/// [`ATOM_MERGE_TOL`]) merge.
pub fn pushforward_measure(mu: &DiscreteMeasure, h: &Subspace) -> Result<DiscreteMeasure> {
    if mu.dim() != h.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: h.ambient_dim(),
            got: mu.dim(),
        });
    }
    let mut atoms: Vec<DVector<f64>> = Vec::with_capacity(mu.len());
    let mut weights: Vec<f64> = Vec::with_capacity(mu.len());
    for (atom, &w) in mu.atoms().iter().zip(mu.weights()) {
        let projected = project_complement(atom, h)?;
        match atoms
            .iter()
            .position(|existing| (existing - &projected).norm() <= ATOM_MERGE_TOL)
        {
            Some(i) => weights[i] += w,
            None => {
                atoms.push(projected);
                weights.push(w);
            }
        }
    }
    DiscreteMeasure::new(atoms, weights)
}

fn inner_radius(supports: &[f64], spec: &PlaneQuadratureSpec) -> Result<f64> {
    let r = supports
        .iter()
        .fold(spec.truncation_radius, |acc, &s| acc.min(s));
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::UnsupportedInput(
            "integrand has no finite effective support in z".into(),
        ));
    }
    Ok(r)
}

/// <g, psi>_k = int_G int_{H-perp} g psi dz dnu(H) by nested quadrature.
/// Outer nodes evaluate in parallel; both reductions are fixed-order.
pub fn pairing(
    g: &GrassmannFunction,
    psi: &GrassmannFunction,
    gq: &GrassmannQuadrature,
    spec: &PlaneQuadratureSpec,
) -> Result<f64> {
    let (_, k) = gq.dims();
    let r = inner_radius(&[g.support_radius(), psi.support_radius()], spec)?;
    let nodes = plane_nodes(k, r, spec)?;
    let outer: Vec<f64> = gq
        .nodes()
        .par_iter()
        .zip(gq.weights().par_iter())
        .map(|(h, &w)| {
            let inner: Vec<f64> = nodes
                .iter()
                .map(|(z, wz)| wz * g.eval(h, z) * psi.eval(h, z))
                .collect();
            w * fixed_order_sum(&inner)
        })
        .collect();
    Ok(fixed_order_sum(&outer))
}

/// Weighted norm (int_G int |g|^p w dz dnu)^{1/p}; w = 1 recovers the
/// unweighted L^p norm.
pub fn grassmann_lp_norm(
    g: &GrassmannFunction,
    p: f64,
    w: &GrassmannFunction,
    gq: &GrassmannQuadrature,
    spec: &PlaneQuadratureSpec,
) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::parameter("norm exponent must satisfy p >= 1"));
    }
    let (_, k) = gq.dims();
    let r = inner_radius(&[g.support_radius(), w.support_radius()], spec)?;
    let nodes = plane_nodes(k, r, spec)?;
    let outer: Vec<f64> = gq
        .nodes()
        .par_iter()
        .zip(gq.weights().par_iter())
        .map(|(h, &wh)| {
            let inner: Vec<f64> = nodes
                .iter()
                .map(|(z, wz)| wz * g.eval(h, z).abs().powf(p) * w.eval(h, z))
                .collect();
            wh * fixed_order_sum(&inner)
        })
        .collect();
    Ok(fixed_order_sum(&outer).max(0.0).powf(1.0 / p))
}

/// <mu, R*g> = sum_j w_j R*g(x_j) for an atomic measure.
pub fn measure_dual_pairing(
    mu: &DiscreteMeasure,
    g: &GrassmannFunction,
    gq: &GrassmannQuadrature,
) -> Result<f64> {
    let terms: Vec<f64> = mu
        .atoms()
        .iter()
        .zip(mu.weights())
        .map(|(x, &w)| Ok(w * dual_radon(g, x, gq)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(fixed_order_sum(&terms))
}

/// <phi, R*g> = int_{R^n} phi(x) R*g(x) dx for a density witness, by tensor
/// quadrature over the effective support of phi.
pub fn field_dual_pairing(
    phi: &SpatialField,
    g: &GrassmannFunction,
    gq: &GrassmannQuadrature,
    spec: &PlaneQuadratureSpec,
) -> Result<f64> {
    check_integrable(phi)?;
    spec.validate()?;
    let r = phi.support_radius().min(spec.truncation_radius);
    let n = phi.dim();
    let axis = gauss_legendre_on(-r, r, spec.budget);
    let slices: Vec<f64> = axis
        .par_iter()
        .map(|&(x0, w0)| {
            let terms = tensor_slice_sum(&axis, n, x0, w0, |x, w| {
                let phi_v = phi.eval(x);
                if phi_v != 0.0 {
                    w * phi_v * dual_radon(g, x, gq).unwrap_or(0.0)
                } else {
                    0.0
                }
            });
            fixed_order_sum(&terms)
        })
        .collect();
    Ok(fixed_order_sum(&slices))
}

/// Conversion constant between this library's dual transform at k = 1 and
/// the classical sphere-parametrized dual: R*_1 g = scale * int_{S^{n-1}}
/// g(theta-perp, (x . theta) theta) dtheta.
pub fn classical_dual_scale(n: usize) -> f64 {
    grassmannian_total_mass(n, 1) / sphere_surface(n)
}

/// Quadrature nodes over the ball of the given radius in H-perp, in frame
/// coordinates.
pub fn hperp_nodes(
    h: &Subspace,
    radius: f64,
    spec: &PlaneQuadratureSpec,
) -> Result<Vec<(DVector<f64>, f64)>> {
    plane_nodes(h.codim(), radius.min(spec.truncation_radius), spec)
}

/// |F_k[(R mu)_H](omega) - mu-hat(embedded omega)|: the Fourier-slice
/// residual for a measure, both sides finite exponential sums.
pub fn measure_fourier_residual_pair(
    mu: &DiscreteMeasure,
    h: &Subspace,
    omega: &DVector<f64>,
) -> Result<f64> {
    let pushed = pushforward_measure(mu, h)?;
    let lhs = crate::fields::measure_fourier(&pushed, omega)?;
    let rhs = crate::fields::measure_fourier(mu, &h.embed_perp(omega))?;
    Ok((lhs - rhs).norm())
}
