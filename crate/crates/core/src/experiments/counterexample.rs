//! Search for comparison-problem counterexamples: given a witness density
//! phi with a negative region O but R phi >= 0, build h = (R phi)^{1/(p-1)}
//! and a perturbation g = h - eps f with R*g <= R*h and ||g||_p > ||h||_p.
//!
//! The perturbation direction f is a combination of radial bump atoms in z.
//! Its backprojection eta = R*f is shaped by a weighted ridge least-squares
//! program with sign constraints enforced by iterative reweighting:
//! eta >= delta on the negative region O, 0 <= eta <= delta' on the rest of
//! the support of phi, and eta >= 0 (with a small positive target) on the
//! remaining verification window.  Whatever the program produces, a Found
//! verdict is only issued after three independent dense-grid checks:
//! g >= 0, R*g <= R*h on a grid 4x denser than the solve grid, and
//! ||g||_p - ||h||_p above the margin tolerance.  An infeasible program or
//! failed check reports NotFound (inconclusive), which is a legal outcome.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FieldSpec, GrassmannFunction, SpatialField};
use crate::geometry::GrassmannQuadrature;
use crate::quadrature::{fixed_order_sum, uniform_sphere_point};
use crate::transforms::{
    dual_radon, grassmann_lp_norm, radon_hybrid, radon_function, PlaneQuadratureSpec,
};

use super::grids::BaseConfig;
use super::report::{assemble, ExperimentCore, Profile, RunOutput};

fn d_atoms() -> usize {
    14
}
fn d_span() -> f64 {
    1.6
}
fn d_window() -> f64 {
    8.0
}
fn d_solve_radii() -> usize {
    40
}
fn d_solve_dirs() -> usize {
    6
}
fn d_margin() -> f64 {
    1e-3
}
fn d_gap() -> f64 {
    0.3
}
fn d_delta_factor() -> f64 {
    0.05
}
fn d_zero_band_factor() -> f64 {
    0.04
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleConfig {
    #[serde(flatten)]
    pub base: BaseConfig,
    pub p: f64,
    pub phi: FieldSpec,
    /// Number of radial bump atoms parametrizing f (0 means an empty search
    /// space, which reports NotFound).
    #[serde(default = "d_atoms")]
    pub atoms: usize,
    /// Outer radius of the atom centers in |z|.
    #[serde(default = "d_span")]
    pub atom_span: f64,
    /// Radius of the spatial verification window.
    #[serde(default = "d_window")]
    pub window_radius: f64,
    #[serde(default = "d_solve_radii")]
    pub solve_radii: usize,
    #[serde(default = "d_solve_dirs")]
    pub solve_directions: usize,
    /// Required final norm gap ||g||_p - ||h||_p.
    #[serde(default = "d_margin")]
    pub margin_tolerance: f64,
    /// Radial buffer between the constraint bands.
    #[serde(default = "d_gap")]
    pub boundary_gap: f64,
    /// delta = delta_factor * sup |R*h| on the solve grid.
    #[serde(default = "d_delta_factor")]
    pub delta_factor: f64,
    /// delta' = zero_band_factor * delta.
    #[serde(default = "d_zero_band_factor")]
    pub zero_band_factor: f64,
}

#[derive(Clone, Copy, PartialEq)]
enum Band {
    /// Inside the negative region O (or beyond the support): eta >= delta.
    Positive,
    /// On supp(phi) away from O: 0 <= eta <= delta'.
    Zero,
    /// Elsewhere in the window: eta >= 0.
    Free,
}

struct Classifier {
    neg_lo: f64,
    neg_hi: f64,
    supp_radius: f64,
    gap: f64,
    neg_threshold: f64,
}

impl Classifier {
    fn classify(&self, phi: &SpatialField, x: &DVector<f64>) -> Band {
        let r = x.norm();
        let v = phi.eval(x);
        if v < -self.neg_threshold {
            return Band::Positive;
        }
        if r > self.supp_radius + self.gap {
            return Band::Positive;
        }
        let clear_of_o = r < self.neg_lo - self.gap || r > self.neg_hi + self.gap;
        if clear_of_o && r <= self.supp_radius - self.gap && v > -self.neg_threshold {
            Band::Zero
        } else {
            Band::Free
        }
    }
}

/// Radial scan of phi over seeded directions: negative interval (by the
/// relative threshold), effective support radius, and peak magnitude.
fn scan_phi(
    phi: &SpatialField,
    window: f64,
    seed: u64,
) -> (Option<(f64, f64)>, f64, f64) {
    let n = phi.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<DVector<f64>> = (0..16).map(|_| uniform_sphere_point(n, &mut rng)).collect();
    let steps = 600;
    let mut max_abs = 0.0f64;
    let mut values = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let r = window * i as f64 / steps as f64;
        let worst = dirs
            .iter()
            .map(|d| phi.eval(&(d * r)))
            .fold(f64::INFINITY, f64::min);
        let biggest = dirs
            .iter()
            .map(|d| phi.eval(&(d * r)).abs())
            .fold(0.0f64, f64::max);
        values.push((r, worst, biggest));
        max_abs = max_abs.max(biggest);
    }
    let neg_threshold = 0.02 * max_abs;
    let mut neg_lo = f64::INFINITY;
    let mut neg_hi = f64::NEG_INFINITY;
    for &(r, worst, _) in &values {
        if worst < -neg_threshold {
            neg_lo = neg_lo.min(r);
            neg_hi = neg_hi.max(r);
        }
    }
    let supp_cut = 1e-2 * max_abs;
    let supp_radius = values
        .iter()
        .rev()
        .find(|&&(_, _, biggest)| biggest > supp_cut)
        .map(|&(r, _, _)| r)
        .unwrap_or(0.0);
    let interval = if neg_lo.is_finite() {
        Some((neg_lo, neg_hi))
    } else {
        None
    };
    (interval, supp_radius, max_abs)
}

/// Solve grid: a window-wide radial sweep plus a denser sweep over the
/// support scale, each crossed with seeded directions.
fn solve_points(
    n: usize,
    window: f64,
    supp_radius: f64,
    radii: usize,
    directions: usize,
    seed: u64,
    density: usize,
) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<DVector<f64>> = (0..directions.max(1))
        .map(|_| uniform_sphere_point(n, &mut rng))
        .collect();
    let m = radii.max(2) * density;
    let mut rs: Vec<f64> = (1..=m).map(|i| window * i as f64 / m as f64).collect();
    let inner = (supp_radius * 1.3).min(window);
    rs.extend((1..=m).map(|i| inner * i as f64 / m as f64));
    rs.sort_by(|a, b| a.total_cmp(b));
    rs.dedup();
    let mut out = vec![DVector::zeros(n)];
    for r in rs {
        for d in &dirs {
            out.push(d * r);
        }
    }
    out
}

fn atom_basis(atoms: usize, span: f64) -> Result<Vec<GrassmannFunction>> {
    if atoms == 0 {
        return Ok(Vec::new());
    }
    if atoms == 1 {
        return Ok(vec![GrassmannFunction::radial_bump_atom(0.0, span, 1.0)?]);
    }
    let spacing = span / (atoms - 1) as f64;
    let sigma = 1.4 * spacing;
    (0..atoms)
        .map(|m| GrassmannFunction::radial_bump_atom(m as f64 * spacing, sigma, 1.0))
        .collect()
}

/// Weighted ridge least squares with iterative reweighting of violated
/// constraints.  Returns the coefficients once the banded constraints hold
/// on the solve grid, or None when reweighting stalls.
#[allow(clippy::too_many_arguments)]
fn solve_sign_program(
    basis_values: &DMatrix<f64>,
    bands: &[Band],
    delta: f64,
    delta_zero: f64,
) -> Option<DVector<f64>> {
    let rows = basis_values.nrows();
    let cols = basis_values.ncols();
    let target: DVector<f64> = DVector::from_fn(rows, |i, _| match bands[i] {
        Band::Positive => 2.0 * delta,
        Band::Zero => 0.5 * delta_zero,
        Band::Free => 0.5 * delta_zero,
    });
    let mut weights: DVector<f64> = DVector::from_fn(rows, |i, _| match bands[i] {
        Band::Positive => 1.0,
        Band::Zero => 30.0,
        Band::Free => 0.25,
    });
    for _round in 0..10 {
        // Normal equations with a small ridge.
        let mut ata = DMatrix::<f64>::zeros(cols, cols);
        let mut atb = DVector::<f64>::zeros(cols);
        for i in 0..rows {
            let w = weights[i];
            for a in 0..cols {
                let va = basis_values[(i, a)];
                atb[a] += w * va * target[i];
                for b in a..cols {
                    ata[(a, b)] += w * va * basis_values[(i, b)];
                }
            }
        }
        for a in 0..cols {
            for b in 0..a {
                ata[(a, b)] = ata[(b, a)];
            }
        }
        let ridge = 1e-9 * ata.diagonal().max();
        for a in 0..cols {
            ata[(a, a)] += ridge;
        }
        let coeffs = ata.lu().solve(&atb)?;
        let eta = basis_values * &coeffs;
        let mut violated = false;
        for i in 0..rows {
            let bad = match bands[i] {
                Band::Positive => eta[i] < delta,
                Band::Zero => eta[i] < 0.0 || eta[i] > delta_zero,
                Band::Free => eta[i] < 0.0,
            };
            if bad {
                violated = true;
                weights[i] *= 4.0;
            }
        }
        if !violated {
            return Some(coeffs);
        }
    }
    None
}

pub fn run_search_counterexample(cfg: &CounterexampleConfig) -> Result<RunOutput> {
    let started = Instant::now();
    cfg.base.validate()?;
    if cfg.p <= 1.0 {
        return Err(Error::parameter("counterexample search requires p > 1"));
    }
    let inputs = serde_json::to_value(cfg)?;
    let seed = cfg.base.seed;
    let finishing = |core: ExperimentCore| {
        Ok(assemble("search_counterexample", seed, inputs.clone(), core, started))
    };
    let mut core = ExperimentCore::new();
    core.tolerance("norm_margin", cfg.margin_tolerance);

    let gq = cfg.base.haar()?;
    let (n, k) = (cfg.base.n, cfg.base.k);
    let spec = cfg.base.plane;
    let phi = SpatialField::from_spec(&cfg.phi, n)?;

    // Negative region and effective support of phi.
    let (neg_interval, supp_radius, max_abs) = scan_phi(&phi, cfg.window_radius, seed ^ 0xF1);
    let Some((neg_lo, neg_hi)) = neg_interval else {
        core.inconclusive("phi has no detected negative region");
        return finishing(core);
    };
    core.quantity("phi_negative_lo", neg_lo);
    core.quantity("phi_negative_hi", neg_hi);
    core.quantity("phi_support_radius", supp_radius);

    // h = (R phi)^{1/(p-1)} must be real and non-negative: check R phi on a
    // (H, z) sample before taking roots.
    let rphi = radon_function(&phi, &spec);
    let mut rphi_min = f64::INFINITY;
    let mut rphi_max = f64::NEG_INFINITY;
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xF2);
        let stride = (gq.len() / 24).max(1);
        for h in gq.nodes().iter().step_by(stride) {
            for i in 0..=40 {
                let r = phi.support_radius() * i as f64 / 40.0;
                let z = uniform_sphere_point(k, &mut rng) * r;
                let v = rphi.eval(h, &z);
                rphi_min = rphi_min.min(v);
                rphi_max = rphi_max.max(v);
            }
        }
    }
    core.quantity("radon_phi_min", rphi_min);
    if rphi_min < -1e-9 * (1.0 + rphi_max.abs()) {
        core.inconclusive("R phi is negative: h would not be real and non-negative");
        return finishing(core);
    }
    let h_fn = rphi.pow_nonneg(1.0 / (cfg.p - 1.0));

    if cfg.atoms == 0 {
        core.inconclusive("empty atom basis: nothing to search");
        return finishing(core);
    }
    let basis = atom_basis(cfg.atoms, cfg.atom_span)?;

    // Solve-grid geometry and band classification.
    let points = solve_points(
        n,
        cfg.window_radius,
        supp_radius,
        cfg.solve_radii,
        cfg.solve_directions,
        seed ^ 0xF3,
        1,
    );
    let classifier = Classifier {
        neg_lo,
        neg_hi,
        supp_radius,
        gap: cfg.boundary_gap,
        neg_threshold: 0.02 * max_abs,
    };
    let bands: Vec<Band> = points.iter().map(|x| classifier.classify(&phi, x)).collect();
    let n_pos = bands.iter().filter(|b| **b == Band::Positive).count();
    let n_zero = bands.iter().filter(|b| **b == Band::Zero).count();
    core.quantity("solve_points_positive", n_pos as f64);
    core.quantity("solve_points_zero", n_zero as f64);
    if n_pos == 0 {
        core.inconclusive("no positive-band sample points; negative region too small for the grid");
        return finishing(core);
    }

    // delta from the sampled sup of R*h.
    let rh_solve: Vec<f64> = points
        .par_iter()
        .map(|x| dual_radon(&h_fn, x, &gq))
        .collect::<Result<Vec<f64>>>()?;
    let sup_rh = rh_solve.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let delta = cfg.delta_factor * sup_rh;
    let delta_zero = cfg.zero_band_factor * delta;
    core.quantity("delta", delta);
    core.quantity("delta_zero", delta_zero);

    // Basis backprojections at the solve points.
    let basis_rows: Vec<Vec<f64>> = points
        .par_iter()
        .map(|x| {
            basis
                .iter()
                .map(|b| dual_radon(b, x, &gq))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let a = DMatrix::from_fn(points.len(), basis.len(), |i, j| basis_rows[i][j]);

    let Some(coeffs) = solve_sign_program(&a, &bands, delta, delta_zero) else {
        core.inconclusive("sign program infeasible on the solve grid");
        return finishing(core);
    };
    for (m, c) in coeffs.iter().enumerate() {
        core.quantity(&format!("atom_coeff_{m:02}"), *c);
    }

    // f and the step size: eps = 0.5 min h/f over {f > 0}.
    let mut f_fn = basis[0].scale(coeffs[0]);
    for (b, &c) in basis.iter().zip(coeffs.iter()).skip(1) {
        f_fn = f_fn.add(&b.scale(c));
    }
    let eps = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xF4);
        let stride = (gq.len() / 24).max(1);
        let mut f_max = 0.0f64;
        let mut ratio_min = f64::INFINITY;
        let z_max = f_fn.support_radius();
        let mut samples: Vec<(usize, DVector<f64>)> = Vec::new();
        for (i, _) in gq.nodes().iter().enumerate().step_by(stride) {
            for j in 0..=400 {
                let r = z_max * j as f64 / 400.0;
                samples.push((i, uniform_sphere_point(k, &mut rng) * r));
            }
        }
        for (i, z) in &samples {
            f_max = f_max.max(f_fn.eval(&gq.nodes()[*i], z).abs());
        }
        let floor = 1e-9 * f_max.max(1e-300);
        for (i, z) in &samples {
            let h_node = &gq.nodes()[*i];
            let fv = f_fn.eval(h_node, z);
            if fv > floor {
                ratio_min = ratio_min.min(h_fn.eval(h_node, z) / fv);
            }
        }
        if !ratio_min.is_finite() || ratio_min <= 0.0 {
            core.inconclusive("f has no usable positive part under h");
            return finishing(core);
        }
        0.5 * ratio_min
    };
    core.quantity("epsilon", eps);
    let g_fn = h_fn.sub(&f_fn.scale(eps));

    // Dense verification: 4x radial density, doubled directions, fresh seed.
    let dense = solve_points(
        n,
        cfg.window_radius,
        supp_radius,
        cfg.solve_radii,
        (2 * cfg.solve_directions).max(1),
        seed ^ 0xF5,
        4,
    );
    let eta_dense: Vec<f64> = dense
        .par_iter()
        .map(|x| dual_radon(&f_fn, x, &gq))
        .collect::<Result<Vec<f64>>>()?;
    let mut min_eta = f64::INFINITY;
    let mut min_eta_pos = f64::INFINITY;
    for (x, &eta) in dense.iter().zip(&eta_dense) {
        min_eta = min_eta.min(eta);
        if classifier.classify(&phi, x) == Band::Positive {
            min_eta_pos = min_eta_pos.min(eta);
        }
    }
    core.quantity("min_eta_dense", min_eta);
    core.quantity("min_eta_positive_band", min_eta_pos);
    let eta_ok = min_eta >= -1e-9 * delta.max(1e-300) && min_eta_pos >= 0.5 * delta;

    // Direct spot-check of R*g <= R*h, independent of the eta wiring.
    let direct_margin: f64 = {
        let step = (dense.len() / 64).max(1);
        let margins: Vec<f64> = dense
            .iter()
            .step_by(step)
            .map(|x| {
                Ok(dual_radon(&h_fn, x, &gq)? - dual_radon(&g_fn, x, &gq)?)
            })
            .collect::<Result<Vec<f64>>>()?;
        margins.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    };
    core.quantity("min_dual_margin_direct", direct_margin);

    // g >= 0 on a dense (H, z) grid.
    let min_g = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xF6);
        let stride = (gq.len() / 48).max(1);
        let z_max = f_fn.support_radius().max(h_fn.support_radius().min(8.0));
        let mut min_g = f64::INFINITY;
        for (i, _) in gq.nodes().iter().enumerate().step_by(stride) {
            let h_node = &gq.nodes()[i];
            for _ in 0..2 {
                let dir = uniform_sphere_point(k, &mut rng);
                for j in 0..=(4 * cfg.solve_radii) {
                    let r = z_max * j as f64 / (4 * cfg.solve_radii) as f64;
                    let z = &dir * r;
                    min_g = min_g.min(g_fn.eval(h_node, &z));
                }
            }
        }
        min_g
    };
    core.quantity("min_g_dense", min_g);
    let h_scale = sup_rh.max(1e-300);
    let g_ok = min_g >= -1e-9 * h_scale;

    // Norm comparison.
    let one = GrassmannFunction::constant(1.0);
    let norm_h = grassmann_lp_norm(&h_fn, cfg.p, &one, &gq, &spec)?;
    let norm_g = grassmann_lp_norm(&g_fn, cfg.p, &one, &gq, &spec)?;
    core.quantity("norm_g_lp", norm_g);
    core.quantity("norm_h_lp", norm_h);
    let margin = norm_g - norm_h;

    // Radial eta profile along e1 for plotting.
    let e1 = DVector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 });
    let profile_pts: Vec<(f64, f64)> = (0..=160)
        .map(|i| {
            let r = cfg.window_radius * i as f64 / 160.0;
            let eta = dual_radon(&f_fn, &(&e1 * r), &gq).unwrap_or(f64::NAN);
            (r, eta)
        })
        .collect();
    core.profile = Some(Profile {
        abscissa: "radius".into(),
        ordinate: "eta".into(),
        points: profile_pts,
    });

    if !(eta_ok && g_ok && direct_margin >= -1e-9 * h_scale) {
        core.quantity("found", 0.0);
        core.quantity("norm_margin", margin);
        core.inconclusive("certificate checks failed on the dense grid");
        return finishing(core);
    }
    if margin < cfg.margin_tolerance {
        core.quantity("found", 0.0);
        core.quantity("norm_margin", margin);
        core.inconclusive("norm margin below tolerance: no certificate");
        return finishing(core);
    }
    core.quantity("found", 1.0);
    core.margin("norm_margin", margin, 0.0);
    finishing(core)
}

/// Convenience entry matching the operation name.
pub fn search_counterexample(cfg: &CounterexampleConfig) -> Result<RunOutput> {
    run_search_counterexample(cfg)
}
