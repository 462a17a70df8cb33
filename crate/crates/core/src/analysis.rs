//! Quantitative mapping properties of the dual transform and the admissible
//! class machinery.
//!
//! The cap measure nu({H : |P_{H-perp} x| <= r}) reduces in bi-spherical
//! coordinates to a one-dimensional integral with the two-sided bound
//! m(n,k) (r/|x|)^k <= cap <= M(n,k) (r/|x|)^k.  The upper constant
//! M = (pi/2)^k |S^{k-1}||S^{n-k-1}|/|S^{n-1}| is proved; the lower constant
//! is calibrated empirically from the exact integral (the order in (r/|x|)^k
//! is what the bound asserts; see [`cap_lower_constant`]).
//!
//! A function h >= 0 is (p, k)-admissible when h^{p-1} is the Radon
//! transform of a non-negative finite measure.  Densities are accepted as
//! witnesses; atomic measures are rejected pointwise (their pushforwards are
//! not functions) and participate only through duality pairings.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::{DiscreteMeasure, GrassmannFunction, SpatialField};
use crate::geometry::{
    grassmannian_total_mass, haar_sample, project_complement, GrassmannQuadrature, Subspace,
};
use crate::quadrature::{fixed_order_sum, gauss_legendre_on, uniform_sphere_point};
use crate::transforms::{
    dual_radon, field_fourier, field_fourier_exact, measure_fourier_residual_pair, radon,
    radon_function, slice_fourier, PlaneQuadratureSpec,
};

/// Exact cap measure, calibrated lower bound, and proved upper bound at a
/// given ratio r/|x|.
#[derive(Clone, Copy, Debug)]
pub struct CapMeasureResult {
    pub exact: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub ratio: f64,
}

fn check_dims(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::parameter(format!(
            "need 0 < k < n, got n = {n}, k = {k}"
        )));
    }
    Ok(())
}

// The bi-spherical factorization gives the cap *frequency* as
// mass_factor * int_0^{arcsin s} sin^{k-1} cos^{n-k-1} dw (it equals 1 at
// s = 1 because mass_factor * int_0^{pi/2} of the weight is exactly 1); the
// nu-measure of the cap is total_mass times that frequency.
fn cap_integral(n: usize, k: usize, ratio: f64) -> f64 {
    let rule = gauss_legendre_on(0.0, ratio.asin(), 64);
    let terms: Vec<f64> = rule
        .iter()
        .map(|&(w, wt)| wt * w.sin().powi(k as i32 - 1) * w.cos().powi((n - k) as i32 - 1))
        .collect();
    let mass = grassmannian_total_mass(n, k);
    mass * mass * fixed_order_sum(&terms)
}

/// Proved upper constant M(n, k) = (pi/2)^k |S^{k-1}||S^{n-k-1}|/|S^{n-1}|.
pub fn cap_upper_constant(n: usize, k: usize) -> f64 {
    FRAC_PI_2.powi(k as i32) * grassmannian_total_mass(n, k)
}

/// Empirically calibrated lower constant: the infimum of exact(s)/s^k over
/// s in (0, 1].  The s -> 0 limit equals total_mass/k and is included so the
/// bound holds below the calibration grid.
pub fn cap_lower_constant(n: usize, k: usize) -> f64 {
    let mass = grassmannian_total_mass(n, k);
    let mut min = mass * mass / k as f64;
    for i in 1..=400 {
        let s = i as f64 / 400.0;
        let v = cap_integral(n, k, s) / s.powi(k as i32);
        if v < min {
            min = v;
        }
    }
    min * (1.0 - 1e-9)
}

/// nu({H : |P_{H-perp} x| <= r}) at ratio = r/|x|, with the two-sided
/// order-(ratio^k) bounds.
pub fn cap_measure(n: usize, k: usize, ratio: f64) -> Result<CapMeasureResult> {
    check_dims(n, k)?;
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::parameter("cap ratio must lie in (0, 1]"));
    }
    let exact = cap_integral(n, k, ratio);
    let rk = ratio.powi(k as i32);
    Ok(CapMeasureResult {
        exact,
        lower_bound: cap_lower_constant(n, k) * rk,
        upper_bound: cap_upper_constant(n, k) * rk,
        ratio,
    })
}

/// Haar Monte Carlo estimate of the cap measure and its standard error:
/// total_mass times the empirical frequency of |P_{H-perp} e1| <= ratio.
pub fn cap_measure_monte_carlo(
    n: usize,
    k: usize,
    ratio: f64,
    count: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_dims(n, k)?;
    let gq = haar_sample(n, k, count, seed)?;
    let e1 = DVector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 });
    let hits = gq
        .nodes()
        .iter()
        .filter(|h| {
            project_complement(&e1, h)
                .map(|z| z.norm() <= ratio)
                .unwrap_or(false)
        })
        .count();
    let mass = gq.total_mass();
    let p_hat = hits as f64 / count as f64;
    let se = mass * (p_hat * (1.0 - p_hat) / count as f64).sqrt();
    Ok((mass * p_hat, se))
}

/// Least-squares fit of log |R* psi| against log r.
#[derive(Clone, Debug)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// (radius, directional mean of |R* psi|) samples behind the fit.
    pub samples: Vec<(f64, f64)>,
}

/// Fits the decay exponent of R* psi along seeded random directions.  The
/// radii must all lie beyond the support of psi in z; for compactly
/// supported psi the mapping property forces slope <= -k (up to fit noise).
pub fn decay_exponent(
    psi: &GrassmannFunction,
    gq: &GrassmannQuadrature,
    radii: &[f64],
    directions: usize,
    seed: u64,
) -> Result<DecayFit> {
    if !psi.support_radius().is_finite() {
        return Err(Error::UnsupportedInput(
            "decay fit requires a compactly supported function".into(),
        ));
    }
    if radii.len() < 2 {
        return Err(Error::parameter("need at least two radii"));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::parameter("radii must be strictly increasing"));
    }
    if radii[0] <= psi.support_radius() {
        return Err(Error::parameter(
            "radii must start beyond the support radius of psi",
        ));
    }
    if directions == 0 {
        return Err(Error::parameter("need at least one direction"));
    }
    let (n, _) = gq.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<DVector<f64>> = (0..directions)
        .map(|_| uniform_sphere_point(n, &mut rng))
        .collect();

    let mut samples = Vec::with_capacity(radii.len());
    for &r in radii {
        let vals: Vec<f64> = dirs
            .iter()
            .map(|theta| Ok(dual_radon(psi, &(theta * r), gq)?.abs()))
            .collect::<Result<Vec<f64>>>()?;
        let mean = fixed_order_sum(&vals) / directions as f64;
        if mean <= 0.0 {
            return Err(Error::UndefinedSlope(format!(
                "mean |R* psi| vanishes at radius {r}"
            )));
        }
        samples.push((r, mean));
    }

    let m = samples.len() as f64;
    let sx: f64 = samples.iter().map(|(r, _)| r.ln()).sum();
    let sy: f64 = samples.iter().map(|(_, v)| v.ln()).sum();
    let sxx: f64 = samples.iter().map(|(r, _)| r.ln() * r.ln()).sum();
    let sxy: f64 = samples.iter().map(|(r, v)| r.ln() * v.ln()).sum();
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let intercept = (sy - slope * sx) / m;
    Ok(DecayFit {
        slope,
        intercept,
        samples,
    })
}

/// What the Fourier-slice identity is verified against.
pub enum FourierSliceSubject<'a> {
    Field(&'a SpatialField),
    Measure(&'a DiscreteMeasure),
}

/// Max over the supplied frequencies of |F_k (R subject)(H, w) -
/// subject-hat(embedded w)|.  Fields compare two quadrature routes; measures
/// compare two finite exponential sums (an exact identity).
pub fn fourier_slice_residual(
    subject: FourierSliceSubject<'_>,
    h: &Subspace,
    omegas: &[DVector<f64>],
    spec: &PlaneQuadratureSpec,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    match subject {
        FourierSliceSubject::Field(f) => {
            let field = f.clone();
            let spec_inner = *spec;
            let rf = GrassmannFunction::new(
                move |hh, z| radon(&field, hh, z, &spec_inner).unwrap_or(f64::NAN),
                f.support_radius(),
                false,
            );
            for omega in omegas {
                let lhs = slice_fourier(&rf, h, omega, spec)?;
                let xi = h.embed_perp(omega);
                let rhs = match field_fourier_exact(f, &xi) {
                    Some(v) => v,
                    None => field_fourier(f, &xi, spec)?,
                };
                worst = worst.max((lhs - rhs).norm());
            }
        }
        FourierSliceSubject::Measure(mu) => {
            for omega in omegas {
                worst = worst.max(measure_fourier_residual_pair(mu, h, omega)?);
            }
        }
    }
    Ok(worst)
}

/// Multi-indices of total degree `degree` over `n` variables, lexicographic.
fn monomial_indices(n: usize, degree: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, degree: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if n == 1 {
            let mut full = prefix.clone();
            full.push(degree);
            out.push(full);
            return;
        }
        for d in (0..=degree).rev() {
            prefix.push(d);
            rec(n - 1, degree - d, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, degree, &mut Vec::new(), &mut out);
    out
}

fn monomial_eval(x: &DVector<f64>, alpha: &[usize]) -> f64 {
    alpha
        .iter()
        .enumerate()
        .map(|(i, &a)| x[i].powi(a as i32))
        .product()
}

/// Fit residual of the degree-j moment data against a single homogeneous
/// polynomial on R^n; degree 0 reports the fitted constant (the plane mass).
#[derive(Clone, Debug)]
pub struct DegreeResidual {
    pub degree: usize,
    /// fit RMSE / data RMS.
    pub residual: f64,
    pub constant: Option<f64>,
}

/// Property (H) check: for each degree j <= max_degree, the moment function
/// z -> int_{H-perp} (w . z)^j g(H, w) dw must extend to one homogeneous
/// degree-j polynomial across all H.  Moments are sampled at the quadrature
/// nodes and fitted by least squares over the degree-j monomials.
pub fn property_h_residual(
    g: &GrassmannFunction,
    max_degree: usize,
    gq: &GrassmannQuadrature,
    spec: &PlaneQuadratureSpec,
    zdirs_per_plane: usize,
    seed: u64,
) -> Result<Vec<DegreeResidual>> {
    if max_degree > 3 {
        return Err(Error::parameter("property (H) checks are desk-scale: degree <= 3"));
    }
    if !g.support_radius().is_finite() {
        return Err(Error::UnsupportedInput(
            "property (H) requires compact support in z".into(),
        ));
    }
    let (n, k) = gq.dims();
    let needed = 3 * monomial_indices(n, max_degree).len();
    if gq.len() < needed {
        return Err(Error::UnderdeterminedFit {
            needed,
            got: gq.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inner_spec = *spec;
    let r = g.support_radius();

    let mut out = Vec::with_capacity(max_degree + 1);
    for degree in 0..=max_degree {
        let dirs = if degree == 0 { 1 } else { zdirs_per_plane.max(2) };
        let mut points: Vec<DVector<f64>> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        for h in gq.nodes() {
            for _ in 0..dirs {
                let zdir = uniform_sphere_point(k, &mut rng);
                let moment = plane_moment(g, h, &zdir, degree, r, &inner_spec)?;
                points.push(h.embed_perp(&zdir));
                values.push(moment);
            }
        }
        let alphas = monomial_indices(n, degree);
        let rows = points.len();
        let mut a = DMatrix::<f64>::zeros(rows, alphas.len());
        for (i, p) in points.iter().enumerate() {
            for (j, alpha) in alphas.iter().enumerate() {
                a[(i, j)] = monomial_eval(p, alpha);
            }
        }
        let b = DVector::from_vec(values.clone());
        let svd = a.clone().svd(true, true);
        let coeffs = svd
            .solve(&b, 1e-12)
            .map_err(|e| Error::parameter(format!("least squares failed: {e}")))?;
        let fitted = a * &coeffs;
        let rmse = ((&b - &fitted).norm_squared() / rows as f64).sqrt();
        let rms = (b.norm_squared() / rows as f64).sqrt();
        let residual = if rms > 1e-300 { rmse / rms } else { 0.0 };
        out.push(DegreeResidual {
            degree,
            residual,
            constant: if degree == 0 { Some(coeffs[0]) } else { None },
        });
    }
    Ok(out)
}

/// int_{H-perp} (w . zdir)^j g(H, w) dw by plane quadrature in H-perp.
fn plane_moment(
    g: &GrassmannFunction,
    h: &Subspace,
    zdir: &DVector<f64>,
    degree: usize,
    radius: f64,
    spec: &PlaneQuadratureSpec,
) -> Result<f64> {
    let nodes = crate::transforms::hperp_nodes(h, radius, spec)?;
    let terms: Vec<f64> = nodes
        .iter()
        .map(|(w, wt)| wt * w.dot(zdir).powi(degree as i32) * g.eval(h, w))
        .collect();
    Ok(fixed_order_sum(&terms))
}

/// A non-negative witness for membership in the admissible class.
#[derive(Clone, Debug)]
pub enum Witness {
    Field(SpatialField),
    Measure(DiscreteMeasure),
}

/// h >= 0 with h^{p-1} = R_{n-k}(witness), witness >= 0.
#[derive(Clone, Debug)]
pub struct AdmissibleFunction {
    pub h: GrassmannFunction,
    pub p: f64,
    pub witness: Witness,
    pub label: String,
}

impl AdmissibleFunction {
    /// The function scaled by c > 0 stays admissible: (c h)^{p-1} =
    /// R(c^{p-1} witness).
    pub fn scaled(&self, c: f64) -> Result<AdmissibleFunction> {
        if c <= 0.0 {
            return Err(Error::parameter("admissible scaling must be positive"));
        }
        let witness = match &self.witness {
            Witness::Field(f) => Witness::Field(f.scaled(c.powf(self.p - 1.0))),
            Witness::Measure(m) => {
                let weights: Vec<f64> = m
                    .weights()
                    .iter()
                    .map(|w| w * c.powf(self.p - 1.0))
                    .collect();
                Witness::Measure(DiscreteMeasure::new(m.atoms().to_vec(), weights)?)
            }
        };
        Ok(AdmissibleFunction {
            h: self.h.scale(c),
            p: self.p,
            witness,
            label: format!("{} * {c:.6e}", self.label),
        })
    }

    /// Max relative residual |h^{p-1} - R(witness)| / (1 + |h|^{p-1}) at
    /// seeded random (H, z), with the Radon transform taken by pure
    /// quadrature.  This is the membership invariant.
    pub fn verify(
        &self,
        n: usize,
        k: usize,
        samples: usize,
        seed: u64,
        spec: &PlaneQuadratureSpec,
    ) -> Result<f64> {
        let phi = match &self.witness {
            Witness::Field(f) => f,
            Witness::Measure(_) => {
                return Err(Error::WitnessRejected(
                    "atomic witnesses cannot be verified pointwise".into(),
                ))
            }
        };
        let gq = haar_sample(n, k, samples, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut worst: f64 = 0.0;
        for h in gq.nodes() {
            let dir = uniform_sphere_point(k, &mut rng);
            let radius: f64 = rng.random_range(0.0..0.8 * phi.support_radius());
            let z = dir * radius;
            let lhs = self.h.eval(h, &z).max(0.0).powf(self.p - 1.0);
            let rhs = radon(phi, h, &z, spec)?;
            let res = (lhs - rhs).abs() / (1.0 + lhs.abs());
            worst = worst.max(res);
        }
        Ok(worst)
    }
}

/// Builds the admissible function h = (R witness)^{1/(p-1)} from a
/// non-negative density.  Atomic measures are rejected: delta pushforwards
/// are not functions, so they participate only through pairings.
pub fn admissible_from_density(
    witness: Witness,
    p: f64,
    spec: &PlaneQuadratureSpec,
) -> Result<AdmissibleFunction> {
    if p <= 1.0 {
        return Err(Error::parameter("admissible classes require p > 1"));
    }
    let phi = match witness {
        Witness::Measure(_) => {
            return Err(Error::WitnessRejected(
                "atomic witness has no continuous density; pointwise h is undefined \
                 (use duality pairings instead)"
                    .into(),
            ))
        }
        Witness::Field(f) => f,
    };
    // Non-negativity scan over a deterministic radial grid.
    let mut rng = ChaCha8Rng::seed_from_u64(0xAD15);
    let n = phi.dim();
    let r_max = phi.support_radius();
    let mut max_abs: f64 = 0.0;
    let mut min_val = f64::INFINITY;
    let mut probes: Vec<DVector<f64>> = vec![DVector::zeros(n)];
    for i in 1..=24 {
        let r = r_max * i as f64 / 24.0;
        for _ in 0..48 {
            probes.push(uniform_sphere_point(n, &mut rng) * r);
        }
    }
    for x in &probes {
        let v = phi.eval(x);
        max_abs = max_abs.max(v.abs());
        min_val = min_val.min(v);
    }
    if min_val < -1e-10 * (1.0 + max_abs) {
        return Err(Error::WitnessRejected(format!(
            "witness is negative ({min_val:.3e}) at a sampled point"
        )));
    }
    let h = radon_function(&phi, spec).pow_nonneg(1.0 / (p - 1.0));
    Ok(AdmissibleFunction {
        h,
        p,
        witness: Witness::Field(phi),
        label: "radon-density".into(),
    })
}

/// The Gaussian admissible family: h = e^{-width |z|^2} with witness
/// ((p-1) width / pi)^{(n-k)/2} e^{-(p-1) width |x|^2}.
pub fn gaussian_admissible_family(
    n: usize,
    k: usize,
    p: f64,
    widths: &[f64],
) -> Result<Vec<AdmissibleFunction>> {
    check_dims(n, k)?;
    if p <= 1.0 {
        return Err(Error::parameter("admissible classes require p > 1"));
    }
    widths
        .iter()
        .map(|&alpha| {
            if alpha <= 0.0 {
                return Err(Error::parameter("gaussian width must be positive"));
            }
            let b = (p - 1.0) * alpha;
            let c = (b / std::f64::consts::PI).powf((n - k) as f64 / 2.0);
            Ok(AdmissibleFunction {
                h: GrassmannFunction::gaussian_in_z(alpha, 1.0)?,
                p,
                witness: Witness::Field(SpatialField::gaussian(n, b, &[], c)?),
                label: format!("gaussian width {alpha:.6e}"),
            })
        })
        .collect()
}

/// Deterministic (H, z) sample grid for pointwise domination checks.
#[derive(Clone, Debug)]
pub struct ZGrid {
    pub radii: Vec<f64>,
    pub dirs_per_node: usize,
    pub seed: u64,
    /// Use every `node_stride`-th quadrature node.
    pub node_stride: usize,
}

impl ZGrid {
    pub fn samples(&self, gq: &GrassmannQuadrature) -> Vec<(usize, DVector<f64>)> {
        let (_, k) = gq.dims();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let stride = self.node_stride.max(1);
        let mut out = Vec::new();
        for (i, _) in gq.nodes().iter().enumerate().step_by(stride) {
            for _ in 0..self.dirs_per_node.max(1) {
                let dir = uniform_sphere_point(k, &mut rng);
                for &r in &self.radii {
                    out.push((i, &dir * r));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct DistanceEstimate {
    pub estimate: f64,
    pub argmin: usize,
    pub argmin_label: String,
}

/// Upper estimate of the (L^p, w)-distance from g to the admissible class:
/// the minimum of ||f||_{L^p(w)} / ||g||_{L^p(w)} over family members that
/// dominate g at every grid sample.  Under the domination constraint the
/// estimate is >= 1.
pub fn admissible_distance(
    g: &GrassmannFunction,
    p: f64,
    w: &GrassmannFunction,
    family: &[AdmissibleFunction],
    gq: &GrassmannQuadrature,
    spec: &PlaneQuadratureSpec,
    grid: &ZGrid,
) -> Result<DistanceEstimate> {
    if p <= 1.0 {
        return Err(Error::parameter("distance requires p > 1"));
    }
    let samples = grid.samples(gq);
    let g_norm = crate::transforms::grassmann_lp_norm(g, p, w, gq, spec)?;
    if g_norm <= 0.0 {
        return Err(Error::NoEstimate("g has zero weighted norm".into()));
    }
    let mut best: Option<(f64, usize)> = None;
    for (idx, f) in family.iter().enumerate() {
        if (f.p - p).abs() > 1e-12 {
            continue;
        }
        let dominates = samples.iter().all(|(node, z)| {
            let h = &gq.nodes()[*node];
            let gv = g.eval(h, z);
            f.h.eval(h, z) >= gv - 1e-9 * (1.0 + gv.abs())
        });
        if !dominates {
            continue;
        }
        let f_norm = crate::transforms::grassmann_lp_norm(&f.h, p, w, gq, spec)?;
        let ratio = f_norm / g_norm;
        if best.map_or(true, |(b, _)| ratio < b) {
            best = Some((ratio, idx));
        }
    }
    match best {
        Some((estimate, argmin)) => Ok(DistanceEstimate {
            estimate,
            argmin,
            argmin_label: family[argmin].label.clone(),
        }),
        None => Err(Error::NoEstimate(
            "no family member dominates g at the grid samples".into(),
        )),
    }
}

/// Rescales a base admissible function until it dominates g at the grid
/// samples (with multiplicative headroom), or reports failure when the base
/// vanishes where g does not.
pub fn scale_to_dominate(
    base: &AdmissibleFunction,
    g: &GrassmannFunction,
    gq: &GrassmannQuadrature,
    grid: &ZGrid,
    headroom: f64,
) -> Result<AdmissibleFunction> {
    let samples = grid.samples(gq);
    let mut factor: f64 = 0.0;
    for (node, z) in &samples {
        let h = &gq.nodes()[*node];
        let gv = g.eval(h, z);
        if gv <= 0.0 {
            continue;
        }
        let fv = base.h.eval(h, z);
        if fv <= 0.0 {
            return Err(Error::NoEstimate(
                "base function vanishes where g is positive".into(),
            ));
        }
        factor = factor.max(gv / fv);
    }
    if factor == 0.0 {
        factor = 1.0;
    }
    base.scaled(factor * (1.0 + headroom))
}
