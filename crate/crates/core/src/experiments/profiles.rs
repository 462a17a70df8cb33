//! Profile experiments exposed to the CLI: cap-measure curves with their
//! Monte Carlo cross-check, and decay-exponent fits for the dual transform.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{cap_measure, cap_measure_monte_carlo, decay_exponent};
use crate::error::{Error, Result};
use crate::fields::GrassmannFnSpec;
use crate::geometry::grassmannian_total_mass;
use crate::transforms::dual_radon;

use super::grids::{build_grassmann_fn, BaseConfig};
use super::report::{assemble, ExperimentCore, Profile, RunOutput};

fn d_mc_count() -> usize {
    100_000
}
fn d_ratio_count() -> usize {
    40
}
fn d_tolerance() -> f64 {
    1e-9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapProfileConfig {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    #[serde(default = "d_mc_count")]
    pub mc_count: usize,
    #[serde(default = "d_ratio_count")]
    pub ratio_count: usize,
    #[serde(default = "d_tolerance")]
    pub tolerance: f64,
}

/// Cap-measure profile: exact curve over a ratio grid, monotonicity, the
/// total-mass endpoint, the proved upper bound, the (r/|x|)^k order on a
/// dyadic grid, and a 3-sigma Haar Monte Carlo cross-check.
pub fn run_cap_profile(cfg: &CapProfileConfig) -> Result<RunOutput> {
    let started = Instant::now();
    if cfg.k == 0 || cfg.k >= cfg.n {
        return Err(Error::parameter(format!(
            "need 0 < k < n, got n = {}, k = {}",
            cfg.n, cfg.k
        )));
    }
    if cfg.ratio_count < 4 {
        return Err(Error::parameter("ratio grid needs at least 4 points"));
    }
    let mut core = ExperimentCore::new();
    core.tolerance("bound_margin", cfg.tolerance);
    core.tolerance("order_slope", 0.05);
    core.tolerance("mc_sigma", 3.0);

    let mut curve = Vec::with_capacity(cfg.ratio_count);
    let mut min_monotone_step = f64::INFINITY;
    let mut min_bound_margin = f64::INFINITY;
    let mut prev = 0.0;
    for i in 1..=cfg.ratio_count {
        let s = i as f64 / cfg.ratio_count as f64;
        let r = cap_measure(cfg.n, cfg.k, s)?;
        curve.push((s, r.exact));
        min_monotone_step = min_monotone_step.min(r.exact - prev);
        min_bound_margin = min_bound_margin
            .min(r.exact - r.lower_bound)
            .min(r.upper_bound - r.exact);
        prev = r.exact;
    }
    core.margin("monotonicity_margin", min_monotone_step, cfg.tolerance);
    core.margin("bound_margin", min_bound_margin, cfg.tolerance);

    let total = grassmannian_total_mass(cfg.n, cfg.k);
    let endpoint = cap_measure(cfg.n, cfg.k, 1.0)?.exact;
    core.quantity("endpoint_exact", endpoint);
    core.margin(
        "endpoint_margin",
        cfg.tolerance - (endpoint - total).abs() / total,
        0.0,
    );

    // Order check: log-log slope of exact(s)/s^k over s = 2^-6 .. 2^-1.
    let pts: Vec<(f64, f64)> = (1..=6)
        .map(|j| {
            let s = 0.5f64.powi(j);
            let v = cap_measure(cfg.n, cfg.k, s).map(|r| r.exact / s.powi(cfg.k as i32))?;
            Ok((s.ln(), v.ln()))
        })
        .collect::<Result<Vec<_>>>()?;
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    core.quantity("order_slope", slope);
    core.margin("order_slope_margin", 0.05 - slope.abs(), 0.0);

    // Monte Carlo cross-check at three ratios.
    let mut worst_sigma: f64 = 0.0;
    for (i, &s) in [0.1, 0.5, 0.9].iter().enumerate() {
        let exact = cap_measure(cfg.n, cfg.k, s)?.exact;
        let (mc, se) = cap_measure_monte_carlo(cfg.n, cfg.k, s, cfg.mc_count, cfg.seed + i as u64)?;
        let sigmas = (exact - mc).abs() / se.max(1e-300);
        core.quantity(&format!("mc_sigma_{i}"), sigmas);
        worst_sigma = worst_sigma.max(sigmas);
    }
    core.margin("mc_margin", 3.0 - worst_sigma, 0.0);

    core.profile = Some(Profile {
        abscissa: "ratio".into(),
        ordinate: "cap_measure".into(),
        points: curve,
    });
    Ok(assemble(
        "cap_profile",
        cfg.seed,
        serde_json::to_value(cfg)?,
        core,
        started,
    ))
}

fn d_directions() -> usize {
    32
}
fn d_radii_count() -> usize {
    12
}
fn d_slope_slack() -> f64 {
    0.15
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayProfileConfig {
    #[serde(flatten)]
    pub base: BaseConfig,
    pub psi: GrassmannFnSpec,
    pub r_min: f64,
    pub r_max: f64,
    #[serde(default = "d_radii_count")]
    pub radii_count: usize,
    #[serde(default = "d_directions")]
    pub directions: usize,
    #[serde(default = "d_slope_slack")]
    pub slope_slack: f64,
}

/// Decay profile of R* psi: log-spaced radii, least-squares slope against
/// the mapping-property contract slope <= -k + slack, plus the sup bound
/// |R* psi| <= total_mass sup |psi| at every sampled point.
pub fn run_decay_profile(cfg: &DecayProfileConfig) -> Result<RunOutput> {
    let started = Instant::now();
    cfg.base.validate()?;
    if cfg.radii_count < 2 || !(cfg.r_min > 0.0) || cfg.r_max <= cfg.r_min {
        return Err(Error::parameter("need r_max > r_min > 0 and at least 2 radii"));
    }
    let mut core = ExperimentCore::new();
    core.tolerance("slope_slack", cfg.slope_slack);

    let gq = cfg.base.haar()?;
    let psi = build_grassmann_fn(&cfg.psi, cfg.base.n, &cfg.base.plane)?;
    let radii: Vec<f64> = (0..cfg.radii_count)
        .map(|i| {
            cfg.r_min * (cfg.r_max / cfg.r_min).powf(i as f64 / (cfg.radii_count - 1) as f64)
        })
        .collect();
    let fit = decay_exponent(&psi, &gq, &radii, cfg.directions, cfg.base.seed ^ 0xDECA)?;
    core.quantity("slope", fit.slope);
    core.margin(
        "slope_margin",
        -(cfg.base.k as f64) + cfg.slope_slack - fit.slope,
        0.0,
    );

    // Sup bound at the sampled radii: |R* psi| <= total_mass sup|psi|,
    // with sup|psi| estimated over a z grid.
    let sup_psi = {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.base.seed ^ 0x5b);
        let mut sup: f64 = 0.0;
        let r = psi.support_radius().min(cfg.base.plane.truncation_radius);
        for h in gq.nodes().iter().step_by((gq.len() / 16).max(1)) {
            for _ in 0..4 {
                let dir = crate::quadrature::uniform_sphere_point(cfg.base.k, &mut rng);
                for j in 0..=64 {
                    let z = &dir * (r * j as f64 / 64.0);
                    sup = sup.max(psi.eval(h, &z).abs());
                }
            }
        }
        sup
    };
    let bound = gq.total_mass() * sup_psi;
    let mut worst = f64::NEG_INFINITY;
    {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.base.seed ^ 0x5c);
        for _ in 0..64 {
            let dir = crate::quadrature::uniform_sphere_point(cfg.base.n, &mut rng);
            for &r in &radii {
                let v = dual_radon(&psi, &(&dir * r), &gq)?.abs();
                worst = worst.max(v - bound);
            }
        }
    }
    core.quantity("sup_bound", bound);
    core.margin("sup_bound_margin", -worst, 1e-12 * (1.0 + bound));

    core.profile = Some(Profile {
        abscissa: "radius".into(),
        ordinate: "mean_abs_dual".into(),
        points: fit.samples.clone(),
    });
    Ok(assemble(
        "decay_profile",
        cfg.base.seed,
        serde_json::to_value(cfg)?,
        core,
        started,
    ))
}
