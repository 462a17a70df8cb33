//! Slicing-inequality experiments: the general weighted estimate, the
//! pinched-Gaussian specialization with its explicit (gamma/beta)^{p-1}
//! factor, and the Solmon mixed-norm ratio (reported, never asserted: the
//! constant in the forward estimate is unspecified).

use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    admissible_distance, gaussian_admissible_family, scale_to_dominate, ZGrid,
};
use crate::error::{Error, Result};
use crate::fields::{pinched_function, GrassmannFnSpec, GrassmannFunction};
use crate::geometry::GrassmannQuadrature;
use crate::quadrature::{fixed_order_sum, gauss_legendre_on, sphere_quadrature};
use crate::transforms::{dual_radon, grassmann_lp_norm, hperp_nodes, PlaneQuadratureSpec};

use super::grids::{build_grassmann_fn, BaseConfig};
use super::report::{assemble, ExperimentCore, RunOutput};

/// Largest ratio R*[gw](x) / R*[hw](x) over the grid.  Points where the
/// denominator is negligible are skipped when the numerator is too and
/// reported as undefined otherwise.
fn sup_dual_ratio(
    gw: &GrassmannFunction,
    hw: &GrassmannFunction,
    gq: &GrassmannQuadrature,
    points: &[DVector<f64>],
) -> Result<std::result::Result<f64, usize>> {
    let pairs: Vec<(f64, f64)> = points
        .par_iter()
        .map(|x| Ok((dual_radon(gw, x, gq)?, dual_radon(hw, x, gq)?)))
        .collect::<Result<Vec<_>>>()?;
    let den_scale = pairs.iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
    let floor = 1e-13 * (1.0 + den_scale);
    let mut sup = 0.0f64;
    for (i, &(num, den)) in pairs.iter().enumerate() {
        if den <= floor {
            if num > floor {
                return Ok(Err(i));
            }
            continue;
        }
        sup = sup.max(num / den);
    }
    Ok(Ok(sup))
}

fn default_tolerance() -> f64 {
    1e-6
}

fn default_family_widths() -> Vec<f64> {
    (-3..=3).map(|j| 2.0f64.powi(j)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralSlicingConfig {
    #[serde(flatten)]
    pub base: BaseConfig,
    pub p: f64,
    pub g: GrassmannFnSpec,
    pub h: GrassmannFnSpec,
    pub w: GrassmannFnSpec,
    /// Gaussian widths of the admissible family behind the distance
    /// estimate, relative grid around 1.
    #[serde(default = "default_family_widths")]
    pub family_widths: Vec<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

/// General slicing estimate: ||g||_{L^p(w)} / ||h||_{L^p(w)} is bounded by
/// D^{p-1} sup R*[gw]/R*[hw], with D an upper estimate of the distance from
/// g to the admissible class over a dominating Gaussian family.
pub fn verify_general_slicing(
    g: &GrassmannFunction,
    h: &GrassmannFunction,
    w: &GrassmannFunction,
    p: f64,
    family_widths: &[f64],
    gq: &GrassmannQuadrature,
    spec: &PlaneQuadratureSpec,
    points: &[DVector<f64>],
    seed: u64,
    tol: f64,
) -> Result<ExperimentCore> {
    if p <= 1.0 {
        return Err(Error::parameter("slicing estimates require p > 1"));
    }
    let mut core = ExperimentCore::new();
    core.tolerance("margin", tol);
    let (n, k) = gq.dims();

    let norm_g = grassmann_lp_norm(g, p, w, gq, spec)?;
    let norm_h = grassmann_lp_norm(h, p, w, gq, spec)?;
    core.quantity("norm_g_lpw", norm_g);
    core.quantity("norm_h_lpw", norm_h);
    if norm_h <= 0.0 {
        core.inconclusive("h has zero weighted norm");
        return Ok(core);
    }
    let lhs = norm_g / norm_h;
    core.quantity("lhs_ratio", lhs);

    // Distance estimate over the dominating Gaussian family.
    let zgrid = ZGrid {
        radii: (1..=8).map(|i| g.support_radius().min(8.0) * i as f64 / 8.0).collect(),
        dirs_per_node: 2,
        seed: seed ^ 0xd15,
        node_stride: 4,
    };
    let base_family = gaussian_admissible_family(n, k, p, family_widths)?;
    let mut family = Vec::new();
    for member in &base_family {
        if let Ok(dominating) = scale_to_dominate(member, g, gq, &zgrid, 0.01) {
            family.push(dominating);
        }
    }
    if family.is_empty() {
        core.inconclusive("no admissible family member dominates g");
        return Ok(core);
    }
    let dist = admissible_distance(g, p, w, &family, gq, spec, &zgrid)?;
    core.quantity("distance_estimate", dist.estimate);
    core.quantity("distance_argmin_index", dist.argmin as f64);

    let gw = g.mul(w);
    let hw = h.mul(w);
    match sup_dual_ratio(&gw, &hw, gq, points)? {
        Err(idx) => {
            core.quantity("undefined_ratio_point_norm", points[idx].norm());
            core.inconclusive("R*[hw] vanishes where R*[gw] does not");
            Ok(core)
        }
        Ok(sup) => {
            core.quantity("sup_dual_ratio", sup);
            let rhs = dist.estimate.powf(p - 1.0) * sup;
            core.quantity("rhs_bound", rhs);
            core.margin("margin", rhs - lhs, tol);
            Ok(core)
        }
    }
}

pub fn run_general_slicing(cfg: &GeneralSlicingConfig) -> Result<RunOutput> {
    let started = Instant::now();
    cfg.base.validate()?;
    let gq = cfg.base.haar()?;
    let g = build_grassmann_fn(&cfg.g, cfg.base.n, &cfg.base.plane)?;
    let h = build_grassmann_fn(&cfg.h, cfg.base.n, &cfg.base.plane)?;
    let w = build_grassmann_fn(&cfg.w, cfg.base.n, &cfg.base.plane)?;
    let points = cfg.base.hypothesis_points();
    let core = verify_general_slicing(
        &g,
        &h,
        &w,
        cfg.p,
        &cfg.family_widths,
        &gq,
        &cfg.base.plane,
        &points,
        cfg.base.seed,
        cfg.tolerance,
    )?;
    Ok(assemble(
        "verify_general_slicing",
        cfg.base.seed,
        serde_json::to_value(cfg)?,
        core,
        started,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinchedConfig {
    #[serde(flatten)]
    pub base: BaseConfig,
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub w: GrassmannFnSpec,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

/// Pinched-Gaussian slicing: for beta e^{-alpha|z|^2} <= g <= gamma
/// e^{-alpha|z|^2},
///   ||g||_{L^p(w)} <= (gamma/beta)^{p-1} sup(R*[gw]/R*w) ||w||_1^{1/p}.
pub fn verify_pinched_gaussian_slicing(
    alpha: f64,
    beta: f64,
    gamma: f64,
    w: &GrassmannFunction,
    p: f64,
    gq: &GrassmannQuadrature,
    spec: &PlaneQuadratureSpec,
    points: &[DVector<f64>],
    seed: u64,
    tol: f64,
) -> Result<ExperimentCore> {
    if p <= 1.0 {
        return Err(Error::parameter("slicing estimates require p > 1"));
    }
    if beta > gamma {
        return Err(Error::parameter("pinch band requires beta <= gamma"));
    }
    let mut core = ExperimentCore::new();
    core.tolerance("margin", tol);

    let g = pinched_function(alpha, beta, gamma, seed)?;
    let one = GrassmannFunction::constant(1.0);
    let norm_g = grassmann_lp_norm(&g, p, w, gq, spec)?;
    let w_l1 = grassmann_lp_norm(w, 1.0, &one, gq, spec)?;
    core.quantity("norm_g_lpw", norm_g);
    core.quantity("w_l1", w_l1);

    let gw = g.mul(w);
    match sup_dual_ratio(&gw, w, gq, points)? {
        Err(idx) => {
            core.quantity("undefined_ratio_point_norm", points[idx].norm());
            core.inconclusive("R*w vanishes where R*[gw] does not");
            Ok(core)
        }
        Ok(sup) => {
            let factor = (gamma / beta).powf(p - 1.0);
            let rhs = factor * sup * w_l1.powf(1.0 / p);
            core.quantity("band_factor", factor);
            core.quantity("sup_dual_ratio", sup);
            core.quantity("rhs_bound", rhs);
            core.margin("margin", rhs - norm_g, tol);
            Ok(core)
        }
    }
}

pub fn run_pinched_gaussian_slicing(cfg: &PinchedConfig) -> Result<RunOutput> {
    let started = Instant::now();
    cfg.base.validate()?;
    let gq = cfg.base.haar()?;
    let w = build_grassmann_fn(&cfg.w, cfg.base.n, &cfg.base.plane)?;
    let points = cfg.base.hypothesis_points();
    let core = verify_pinched_gaussian_slicing(
        cfg.alpha,
        cfg.beta,
        cfg.gamma,
        &w,
        cfg.p,
        &gq,
        &cfg.base.plane,
        &points,
        cfg.base.seed,
        cfg.tolerance,
    )?;
    Ok(assemble(
        "verify_pinched_gaussian_slicing",
        cfg.base.seed,
        serde_json::to_value(cfg)?,
        core,
        started,
    ))
}

fn default_truncation_radii() -> Vec<f64> {
    vec![8.0, 16.0]
}

fn default_stability() -> f64 {
    0.02
}

fn default_radial_budget() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolmonConfig {
    #[serde(flatten)]
    pub base: BaseConfig,
    pub p: f64,
    pub g: GrassmannFnSpec,
    /// Spatial truncation radii for the L^q norm; the ratio must be stable
    /// across them.
    #[serde(default = "default_truncation_radii")]
    pub truncation_radii: Vec<f64>,
    #[serde(default = "default_stability")]
    pub stability_tolerance: f64,
    #[serde(default = "default_radial_budget")]
    pub radial_budget: usize,
}

/// ||R*g||_{L^q} over the ball of the given radius, q = pn/k, by polar
/// quadrature.
fn dual_lq_norm(
    g: &GrassmannFunction,
    gq: &GrassmannQuadrature,
    q: f64,
    radius: f64,
    radial_budget: usize,
) -> Result<f64> {
    let (n, _) = gq.dims();
    let radial = gauss_legendre_on(0.0, radius, radial_budget);
    let angular = sphere_quadrature(n, 32, 0)?;
    let terms: Vec<f64> = radial
        .par_iter()
        .map(|&(r, wr)| {
            let jac = wr * r.powi(n as i32 - 1);
            let inner: Vec<f64> = angular
                .iter()
                .map(|(theta, wt)| {
                    let x = theta * r;
                    let v = dual_radon(g, &x, gq).unwrap_or(0.0);
                    wt * v.abs().powf(q)
                })
                .collect();
            jac * fixed_order_sum(&inner)
        })
        .collect();
    Ok(fixed_order_sum(&terms).max(0.0).powf(1.0 / q))
}

/// Solmon mixed-norm ratio: ||R*g||_{L^q} against
/// (int ||g(H,.)||_{L^p(H-perp)}^2 dnu)^{1/2} with q = pn/k.  The ratio is
/// an empirical lower bound on the constant; stability across truncation
/// radii is required, no inequality is asserted.
pub fn solmon_ratio(
    g: &GrassmannFunction,
    p: f64,
    gq: &GrassmannQuadrature,
    spec: &PlaneQuadratureSpec,
    truncation_radii: &[f64],
    stability_tol: f64,
    radial_budget: usize,
) -> Result<ExperimentCore> {
    let (n, k) = gq.dims();
    if p <= 1.0 || p < 2.0 * k as f64 / n as f64 {
        return Err(Error::parameter(
            "Solmon range requires p > 1 and p >= 2k/n",
        ));
    }
    if truncation_radii.len() < 2 {
        return Err(Error::parameter("need two truncation radii for stability"));
    }
    let q = p * n as f64 / k as f64;
    let mut core = ExperimentCore::new();
    core.tolerance("stability", stability_tol);
    core.quantity("exponent_q", q);

    // RHS: (int_G ||g(H, .)||_{L^p}^2 dnu)^{1/2}.
    let r = g.support_radius().min(spec.truncation_radius);
    if !r.is_finite() {
        return Err(Error::UnsupportedInput(
            "Solmon ratio needs finite effective support in z".into(),
        ));
    }
    let rhs_terms: Vec<f64> = gq
        .nodes()
        .par_iter()
        .zip(gq.weights().par_iter())
        .map(|(h, &wh)| {
            let nodes = hperp_nodes(h, r, spec)?;
            let inner: Vec<f64> = nodes
                .iter()
                .map(|(z, wz)| wz * g.eval(h, z).abs().powf(p))
                .collect();
            Ok(wh * fixed_order_sum(&inner).max(0.0).powf(2.0 / p))
        })
        .collect::<Result<Vec<f64>>>()?;
    let rhs = fixed_order_sum(&rhs_terms).max(0.0).sqrt();
    core.quantity("rhs_mixed_norm", rhs);

    let mut ratios = Vec::new();
    for (i, &radius) in truncation_radii.iter().enumerate() {
        let lhs = dual_lq_norm(g, gq, q, radius, radial_budget)?;
        core.quantity(&format!("lhs_lq_radius_{i}"), lhs);
        if rhs <= 0.0 {
            core.quantity("ratio", f64::NAN);
            core.inconclusive("both sides vanish; ratio undefined");
            return Ok(core);
        }
        ratios.push(lhs / rhs);
    }
    let last = ratios[ratios.len() - 1];
    let prev = ratios[ratios.len() - 2];
    let drift = (last - prev).abs() / last.max(1e-300);
    core.quantity("ratio", last);
    core.quantity("ratio_drift", drift);
    if !last.is_finite() || drift > stability_tol {
        core.inconclusive("L^q norm not stable across truncation radii");
        return Ok(core);
    }
    core.margin("stability_margin", stability_tol - drift, 0.0);
    Ok(core)
}

pub fn run_solmon_ratio(cfg: &SolmonConfig) -> Result<RunOutput> {
    let started = Instant::now();
    cfg.base.validate()?;
    let gq = cfg.base.haar()?;
    let g = build_grassmann_fn(&cfg.g, cfg.base.n, &cfg.base.plane)?;
    let core = solmon_ratio(
        &g,
        cfg.p,
        &gq,
        &cfg.base.plane,
        &cfg.truncation_radii,
        cfg.stability_tolerance,
        cfg.radial_budget,
    )?;
    Ok(assemble(
        "solmon_ratio",
        cfg.base.seed,
        serde_json::to_value(cfg)?,
        core,
        started,
    ))
}
