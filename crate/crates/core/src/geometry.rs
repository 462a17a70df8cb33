//! Subspaces, Haar sampling of the Grassmannian, and bi-spherical quadrature.
//!
//! A point of G_{n-k,n} is an (n-k)-dimensional linear subspace H of R^n,
//! stored as a pair of orthonormal frames for H and its orthogonal complement.
//! The Haar measure nu_{n-k} is normalized to total mass
//! |S^{k-1}| |S^{n-k-1}| / |S^{n-1}|, and is discretized here by i.i.d.
//! sampling: QR factorization of a standard Gaussian matrix with the sign of
//! the R diagonal folded into Q gives a Haar-uniform rotation, whose first
//! n-k columns span H.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::quadrature::{fixed_order_sum, gauss_legendre_on, sphere_quadrature, sphere_surface};

/// Frame orthonormality tolerance for [`Subspace`] invariants.
pub const FRAME_TOL: f64 = 1e-12;

/// An (n-k)-dimensional linear subspace H of R^n together with an
/// orthonormal frame of its orthogonal complement.
///
/// Two `Subspace` values represent the same Grassmannian point when their
/// frames span the same subspace; see [`Subspace::same_subspace`].
#[derive(Clone, Debug)]
pub struct Subspace {
    n: usize,
    k: usize,
    /// n x (n-k), orthonormal columns spanning H.
    frame_h: DMatrix<f64>,
    /// n x k, orthonormal columns spanning H-perp.
    frame_hperp: DMatrix<f64>,
}

impl Subspace {
    /// Builds a subspace from explicit frames, validating orthonormality and
    /// completeness within [`FRAME_TOL`].
    pub fn from_frames(frame_h: DMatrix<f64>, frame_hperp: DMatrix<f64>) -> Result<Self> {
        let n = frame_h.nrows();
        let k = frame_hperp.ncols();
        if n == 0 || k == 0 || frame_h.ncols() + k != n || frame_hperp.nrows() != n {
            return Err(Error::parameter(format!(
                "frame shapes {}x{} and {}x{} do not describe a splitting of R^n",
                frame_h.nrows(),
                frame_h.ncols(),
                frame_hperp.nrows(),
                frame_hperp.ncols()
            )));
        }
        let mut full = DMatrix::zeros(n, n);
        full.columns_mut(0, n - k).copy_from(&frame_h);
        full.columns_mut(n - k, k).copy_from(&frame_hperp);
        let gram = full.transpose() * &full;
        for i in 0..n {
            for j in 0..n {
                let expected = if i == j { 1.0 } else { 0.0 };
                if (gram[(i, j)] - expected).abs() > FRAME_TOL {
                    return Err(Error::parameter(format!(
                        "frames are not jointly orthonormal: gram[{i},{j}] = {}",
                        gram[(i, j)]
                    )));
                }
            }
        }
        Ok(Subspace {
            n,
            k,
            frame_h,
            frame_hperp,
        })
    }

    /// The coordinate subspace H = span{e_1, ..., e_{n-k}}.
    pub fn coordinate(n: usize, k: usize) -> Result<Self> {
        check_dims(n, k)?;
        let eye = DMatrix::<f64>::identity(n, n);
        Ok(Subspace {
            n,
            k,
            frame_h: eye.columns(0, n - k).into_owned(),
            frame_hperp: eye.columns(n - k, k).into_owned(),
        })
    }

    /// Builds H from a spanning set (orthonormalized internally) and extends
    /// it to a full orthonormal basis to obtain the complement frame.
    pub fn from_h_span(n: usize, span: &[DVector<f64>]) -> Result<Self> {
        if span.is_empty() || span.len() >= n {
            return Err(Error::parameter(
                "spanning set must have between 1 and n-1 vectors",
            ));
        }
        for v in span {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
        for v in span {
            if let Some(u) = gram_schmidt_step(&basis, v) {
                basis.push(u);
            } else {
                return Err(Error::parameter("spanning set is linearly dependent"));
            }
        }
        let dim_h = basis.len();
        for j in 0..n {
            if basis.len() == n {
                break;
            }
            let e = DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 });
            if let Some(u) = gram_schmidt_step(&basis, &e) {
                basis.push(u);
            }
        }
        let frame_h = DMatrix::from_columns(&basis[..dim_h]);
        let frame_hperp = DMatrix::from_columns(&basis[dim_h..]);
        Subspace::from_frames(frame_h, frame_hperp)
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    /// Codimension k = dim H-perp.
    pub fn codim(&self) -> usize {
        self.k
    }

    pub fn frame_h(&self) -> &DMatrix<f64> {
        &self.frame_h
    }

    pub fn frame_hperp(&self) -> &DMatrix<f64> {
        &self.frame_hperp
    }

    /// Embeds coordinates u in the H frame into R^n.
    pub fn embed_h(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.frame_h * u
    }

    /// Embeds coordinates z in the H-perp frame into R^n.
    pub fn embed_perp(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.frame_hperp * z
    }

    /// Coordinates of the orthogonal projection of x onto H, in the H frame.
    pub fn h_coords(&self, x: &DVector<f64>) -> DVector<f64> {
        self.frame_h.transpose() * x
    }

    /// The n x n orthogonal projector onto H-perp.
    pub fn perp_projector(&self) -> DMatrix<f64> {
        &self.frame_hperp * self.frame_hperp.transpose()
    }

    /// Frame-independent equality of Grassmannian points: the projectors onto
    /// H-perp agree within `tol`.
    pub fn same_subspace(&self, other: &Subspace, tol: f64) -> bool {
        if self.n != other.n || self.k != other.k {
            return false;
        }
        let diff = self.perp_projector() - other.perp_projector();
        diff.amax() <= tol
    }
}

fn gram_schmidt_step(basis: &[DVector<f64>], v: &DVector<f64>) -> Option<DVector<f64>> {
    let mut u = v.clone();
    // Two passes of classical Gram-Schmidt for numerical orthogonality.
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&u);
            u -= b * c;
        }
    }
    let norm = u.norm();
    if norm < 1e-10 {
        None
    } else {
        Some(u / norm)
    }
}

fn check_dims(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::parameter(format!(
            "need 0 < k < n, got n = {n}, k = {k}"
        )));
    }
    Ok(())
}

/// Coordinates of P_{H-perp}(x) in the H-perp frame.  The Euclidean norm of
/// the result is the distance from x to H.
pub fn project_complement(x: &DVector<f64>, h: &Subspace) -> Result<DVector<f64>> {
    if x.len() != h.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: h.ambient_dim(),
            got: x.len(),
        });
    }
    Ok(h.frame_hperp.transpose() * x)
}

/// Total Haar mass |S^{k-1}| |S^{n-k-1}| / |S^{n-1}| of G_{n-k,n}.
pub fn grassmannian_total_mass(n: usize, k: usize) -> f64 {
    sphere_surface(k) * sphere_surface(n - k) / sphere_surface(n)
}

/// A weighted node set approximating the Haar measure nu_{n-k} on G_{n-k,n}.
#[derive(Clone, Debug)]
pub struct GrassmannQuadrature {
    nodes: Vec<Subspace>,
    weights: Vec<f64>,
    total_mass: f64,
}

impl GrassmannQuadrature {
    pub fn new(nodes: Vec<Subspace>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::parameter(
                "node and weight lists must be non-empty and of equal length",
            ));
        }
        let (n, k) = (nodes[0].ambient_dim(), nodes[0].codim());
        for node in &nodes {
            if node.ambient_dim() != n || node.codim() != k {
                return Err(Error::parameter("all nodes must share the same (n, k)"));
            }
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::parameter("weights must be non-negative and finite"));
        }
        let total_mass = fixed_order_sum(&weights);
        Ok(GrassmannQuadrature {
            nodes,
            weights,
            total_mass,
        })
    }

    pub fn nodes(&self) -> &[Subspace] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nodes[0].ambient_dim(), self.nodes[0].codim())
    }

    /// Weighted sum of `f` over the nodes in fixed index order.
    pub fn integrate<F: Fn(&Subspace) -> f64>(&self, f: F) -> f64 {
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(h, &w)| w * f(h))
            .collect();
        fixed_order_sum(&terms)
    }
}

/// A Haar-uniform rotation in SO-corrected form: QR of a standard Gaussian
/// matrix with the sign of diag(R) folded into the columns of Q.
pub fn haar_orthogonal<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| {
        let g: f64 = StandardNormal.sample(rng);
        g
    });
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Draws `count` i.i.d. Haar-distributed subspaces with equal weights summing
/// to the total mass of nu_{n-k}.  Identical output for identical inputs.
pub fn haar_sample(n: usize, k: usize, count: usize, seed: u64) -> Result<GrassmannQuadrature> {
    check_dims(n, k)?;
    if count == 0 {
        return Err(Error::parameter("node count must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = grassmannian_total_mass(n, k);
    let w = total / count as f64;
    let mut nodes = Vec::with_capacity(count);
    for _ in 0..count {
        let q = haar_orthogonal(n, &mut rng);
        nodes.push(Subspace {
            n,
            k,
            frame_h: q.columns(0, n - k).into_owned(),
            frame_hperp: q.columns(n - k, k).into_owned(),
        });
    }
    GrassmannQuadrature::new(nodes, vec![w; count])
}

/// Resolution of the bi-spherical rule: Gauss-Legendre order in the angle
/// and per-axis budget for the two factor spheres.
#[derive(Clone, Copy, Debug)]
pub struct BisphericalSpec {
    pub beta_order: usize,
    pub sphere_budget: usize,
}

impl Default for BisphericalSpec {
    fn default() -> Self {
        BisphericalSpec {
            beta_order: 48,
            sphere_budget: 32,
        }
    }
}

/// Integrates f over S^{n-1} through the factorization
/// S^{n-k-1} x S^{k-1} x [0, pi/2] with weight sin^{k-1} cos^{n-k-1},
/// via xi = cos(beta) theta + sin(beta) omega.
pub fn bispherical_integrate<F>(f: F, n: usize, k: usize, spec: &BisphericalSpec) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    check_dims(n, k)?;
    if spec.beta_order == 0 || spec.sphere_budget == 0 {
        return Err(Error::parameter("bi-spherical quadrature budget must be positive"));
    }
    let theta_nodes = sphere_quadrature(n - k, spec.sphere_budget, 0)?;
    let omega_nodes = sphere_quadrature(k, spec.sphere_budget, 1)?;
    let beta_nodes = gauss_legendre_on(0.0, std::f64::consts::FRAC_PI_2, spec.beta_order);

    let mut terms = Vec::with_capacity(beta_nodes.len() * theta_nodes.len() * omega_nodes.len());
    let mut xi = DVector::<f64>::zeros(n);
    for &(beta, wb) in &beta_nodes {
        let (sin_b, cos_b) = beta.sin_cos();
        let angular = wb * sin_b.powi(k as i32 - 1) * cos_b.powi((n - k) as i32 - 1);
        for (theta, wt) in &theta_nodes {
            for (omega, wo) in &omega_nodes {
                for i in 0..n - k {
                    xi[i] = cos_b * theta[i];
                }
                for j in 0..k {
                    xi[n - k + j] = sin_b * omega[j];
                }
                terms.push(angular * wt * wo * f(&xi));
            }
        }
    }
    Ok(fixed_order_sum(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn subspace_invariants_hold(s: &Subspace) {
        let n = s.ambient_dim();
        let k = s.codim();
        for j in 0..n - k {
            assert_relative_eq!(s.frame_h().column(j).norm(), 1.0, epsilon = FRAME_TOL);
        }
        for j in 0..k {
            assert_relative_eq!(s.frame_hperp().column(j).norm(), 1.0, epsilon = FRAME_TOL);
        }
        let mut full = DMatrix::zeros(n, n);
        full.columns_mut(0, n - k).copy_from(s.frame_h());
        full.columns_mut(n - k, k).copy_from(s.frame_hperp());
        let gram = full.transpose() * &full;
        assert!((gram - DMatrix::<f64>::identity(n, n)).amax() <= FRAME_TOL);
    }

    #[test]
    fn haar_sample_total_mass_n2() {
        let gq = haar_sample(2, 1, 1000, 42).unwrap();
        assert_relative_eq!(
            gq.total_mass(),
            2.0 / std::f64::consts::PI,
            max_relative = 1e-12
        );
        let wsum: f64 = gq.weights().iter().sum();
        assert_relative_eq!(wsum, gq.total_mass(), epsilon = 1e-12);
    }

    #[test]
    fn haar_sample_single_node_weight_is_one() {
        // |S^1| |S^0| / |S^2| = (2 pi * 2) / (4 pi) = 1.
        let gq = haar_sample(3, 1, 1, 7).unwrap();
        assert_eq!(gq.len(), 1);
        assert_relative_eq!(gq.weights()[0], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn haar_sample_nodes_satisfy_frame_invariants() {
        for &(n, k) in &[(2usize, 1usize), (3, 1), (3, 2), (4, 2), (4, 3)] {
            let gq = haar_sample(n, k, 50, 5).unwrap();
            for node in gq.nodes() {
                subspace_invariants_hold(node);
            }
        }
    }

    #[test]
    fn haar_sample_is_deterministic() {
        let a = haar_sample(3, 2, 10, 99).unwrap();
        let b = haar_sample(3, 2, 10, 99).unwrap();
        for (x, y) in a.nodes().iter().zip(b.nodes()) {
            assert_eq!(x.frame_h(), y.frame_h());
            assert_eq!(x.frame_hperp(), y.frame_hperp());
        }
    }

    #[test]
    fn haar_sample_projection_second_moment() {
        // E |P_{H-perp} e1|^2 = k/n by averaging the projector trace.
        let gq = haar_sample(3, 1, 100_000, 7).unwrap();
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let mean: f64 = gq
            .nodes()
            .iter()
            .map(|h| project_complement(&e1, h).unwrap().norm_squared())
            .sum::<f64>()
            / gq.len() as f64;
        assert!((mean - 1.0 / 3.0).abs() < 0.01, "mean = {mean}");
    }

    #[test]
    fn haar_sample_rejects_bad_parameters() {
        assert!(haar_sample(2, 2, 10, 0).is_err());
        assert!(haar_sample(2, 0, 10, 0).is_err());
        assert!(haar_sample(3, 1, 0, 0).is_err());
    }

    #[test]
    fn project_complement_axis_case() {
        // n=2, H = span{(1,0)}: x = (3,4) has complement coordinate 4.
        let h = Subspace::coordinate(2, 1).unwrap();
        let x = DVector::from_vec(vec![3.0, 4.0]);
        let z = project_complement(&x, &h).unwrap();
        assert_eq!(z.len(), 1);
        assert_relative_eq!(z[0], 4.0, max_relative = 1e-14);
    }

    #[test]
    fn project_complement_kernel_and_pythagoras() {
        let gq = haar_sample(3, 1, 20, 11).unwrap();
        for h in gq.nodes() {
            let u = DVector::from_vec(vec![0.3, -0.7]);
            let x = h.embed_h(&u);
            let z = project_complement(&x, h).unwrap();
            assert!(z.norm() < 1e-12);
        }
        // n=3, k=2, H = span{(0,0,1)}: x = (1,2,3) is at distance sqrt(5).
        let h = Subspace::from_h_span(3, &[DVector::from_vec(vec![0.0, 0.0, 1.0])]).unwrap();
        assert_eq!(h.codim(), 2);
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let z = project_complement(&x, &h).unwrap();
        assert_relative_eq!(z.norm(), 5.0f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn project_complement_dimension_mismatch() {
        let h = Subspace::coordinate(3, 1).unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0]);
        assert!(project_complement(&x, &h).is_err());
    }

    #[test]
    fn same_subspace_is_frame_invariant() {
        // Rotate the H frame of a (4,2) subspace in-plane; the point is unchanged.
        let gq = haar_sample(4, 2, 1, 3).unwrap();
        let s = &gq.nodes()[0];
        let c = 0.6f64;
        let t = (1.0f64 - c * c).sqrt();
        let h0 = s.frame_h().column(0) * c + s.frame_h().column(1) * t;
        let h1 = s.frame_h().column(0) * (-t) + s.frame_h().column(1) * c;
        let rotated = Subspace::from_frames(
            DMatrix::from_columns(&[h0, h1]),
            s.frame_hperp().clone(),
        )
        .unwrap();
        assert!(s.same_subspace(&rotated, 1e-10));
        let other = haar_sample(4, 2, 1, 4).unwrap();
        assert!(!s.same_subspace(&other.nodes()[0], 1e-6));
    }

    /// Two-sample Kolmogorov-Smirnov statistic.
    fn ks_statistic(a: &mut [f64], b: &mut [f64]) -> f64 {
        a.sort_by(|x, y| x.total_cmp(y));
        b.sort_by(|x, y| x.total_cmp(y));
        let mut d: f64 = 0.0;
        let (mut i, mut j) = (0usize, 0usize);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            let fa = i as f64 / a.len() as f64;
            let fb = j as f64 / b.len() as f64;
            d = d.max((fa - fb).abs());
        }
        d
    }

    #[test]
    fn rotation_invariance_of_projection_law() {
        let n = 3;
        let count = 10_000;
        let x = DVector::from_vec(vec![0.8, -0.2, 0.55]);
        // A fixed rotation: Givens in (0,1) by 0.7 composed with (1,2) by 0.3.
        let mut q = DMatrix::<f64>::identity(n, n);
        let (c1, s1) = (0.7f64.cos(), 0.7f64.sin());
        let (c2, s2) = (0.3f64.cos(), 0.3f64.sin());
        let mut g1 = DMatrix::<f64>::identity(n, n);
        g1[(0, 0)] = c1;
        g1[(0, 1)] = -s1;
        g1[(1, 0)] = s1;
        g1[(1, 1)] = c1;
        let mut g2 = DMatrix::<f64>::identity(n, n);
        g2[(1, 1)] = c2;
        g2[(1, 2)] = -s2;
        g2[(2, 1)] = s2;
        g2[(2, 2)] = c2;
        q = q * g1 * g2;
        let qx = &q * &x;

        let sample = |seed: u64, point: &DVector<f64>| -> Vec<f64> {
            haar_sample(n, 1, count, seed)
                .unwrap()
                .nodes()
                .iter()
                .map(|h| project_complement(point, h).unwrap().norm_squared())
                .collect()
        };
        let mut a = sample(101, &qx);
        let mut b = sample(202, &x);
        let d = ks_statistic(&mut a, &mut b);
        // Two-sample KS critical value at alpha = 0.01: 1.63 sqrt(2/m).
        let crit = 1.63 * (2.0 / count as f64).sqrt();
        assert!(d <= crit, "KS statistic {d} exceeds {crit}");
    }

    #[test]
    fn bispherical_constant_recovers_sphere_areas() {
        let spec = BisphericalSpec::default();
        let got = bispherical_integrate(|_| 1.0, 3, 1, &spec).unwrap();
        assert_relative_eq!(got, 4.0 * std::f64::consts::PI, max_relative = 1e-10);
        let got = bispherical_integrate(|_| 1.0, 4, 2, &spec).unwrap();
        assert_relative_eq!(
            got,
            2.0 * std::f64::consts::PI * std::f64::consts::PI,
            max_relative = 1e-10
        );
    }

    #[test]
    fn bispherical_second_moment() {
        // xi_n^2 integrates to |S^{n-1}|/n by symmetry.
        let spec = BisphericalSpec::default();
        let got = bispherical_integrate(|xi| xi[2] * xi[2], 3, 1, &spec).unwrap();
        assert_relative_eq!(got, 4.0 * std::f64::consts::PI / 3.0, max_relative = 1e-10);
    }

    #[test]
    fn bispherical_zero_budget_rejected() {
        let spec = BisphericalSpec {
            beta_order: 0,
            sphere_budget: 8,
        };
        assert!(bispherical_integrate(|_| 1.0, 3, 1, &spec).is_err());
    }

    #[test]
    fn bispherical_matches_sphere_monte_carlo_on_polynomials() {
        use rand::SeedableRng;
        let n = 4;
        let k = 2;
        let spec = BisphericalSpec::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let mc_count = 200_000usize;
        for trial in 0..10 {
            // Random polynomial of degree <= 4 in the coordinates.
            let coeffs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let powers: Vec<i32> = (0..n).map(|_| rng.random_range(0..=1) * 2).collect();
            let poly = |xi: &DVector<f64>| -> f64 {
                (0..n)
                    .map(|i| coeffs[i] * xi[i].powi(powers[i]))
                    .sum::<f64>()
            };
            let exact = bispherical_integrate(&poly, n, k, &spec).unwrap();

            let mut mc_rng = rand_chacha::ChaCha8Rng::seed_from_u64(1000 + trial);
            let samples: Vec<f64> = (0..mc_count)
                .map(|_| poly(&crate::quadrature::uniform_sphere_point(n, &mut mc_rng)))
                .collect();
            let mean = samples.iter().sum::<f64>() / mc_count as f64;
            let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (mc_count as f64 - 1.0);
            let se = (var / mc_count as f64).sqrt() * sphere_surface(n);
            let mc = mean * sphere_surface(n);
            assert!(
                (exact - mc).abs() <= 3.0 * se + 1e-9 * (1.0 + exact.abs()),
                "trial {trial}: exact {exact}, mc {mc}, se {se}"
            );
        }
    }

    #[test]
    fn total_mass_values() {
        assert_relative_eq!(
            grassmannian_total_mass(2, 1),
            2.0 / std::f64::consts::PI,
            max_relative = 1e-14
        );
        assert_relative_eq!(grassmannian_total_mass(3, 1), 1.0, max_relative = 1e-14);
        assert_relative_eq!(grassmannian_total_mass(3, 2), 1.0, max_relative = 1e-14);
    }
}
