//! The comparison-problem experiments: p = 1 monotonicity and the
//! admissible-class chain for p > 1.
//!
//! Both start from the pointwise hypothesis R*g <= R*h, checked on the
//! finite hypothesis grid.  A sampled violation makes the run inconclusive
//! (the theorem's premise failed); it never counts against the theorem.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{admissible_from_density, Witness};
use crate::error::{Error, Result};
use crate::fields::{FieldSpec, GrassmannFnSpec, GrassmannFunction, SpatialField};
use crate::geometry::GrassmannQuadrature;
use crate::transforms::{
    dual_radon, field_dual_pairing, grassmann_lp_norm, pairing, PlaneQuadratureSpec,
};

use super::grids::{build_grassmann_fn, BaseConfig};
use super::report::{assemble, ExperimentCore, Profile, RunOutput};

/// Minimum of R*h - R*g over the grid, and the index of the worst point.
fn hypothesis_margin(
    g: &GrassmannFunction,
    h: &GrassmannFunction,
    gq: &GrassmannQuadrature,
    points: &[nalgebra::DVector<f64>],
) -> Result<(f64, usize)> {
    let margins: Vec<f64> = points
        .par_iter()
        .map(|x| Ok(dual_radon(h, x, gq)? - dual_radon(g, x, gq)?))
        .collect::<Result<Vec<f64>>>()?;
    let (idx, min) = margins
        .iter()
        .enumerate()
        .fold((0usize, f64::INFINITY), |(bi, bv), (i, &v)| {
            if v < bv {
                (i, v)
            } else {
                (bi, bv)
            }
        });
    Ok((min, idx))
}

fn default_eps_grid() -> Vec<f64> {
    vec![1.0, 0.5, 0.25, 0.125, 0.0625]
}

fn default_tolerance() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct P1Config {
    #[serde(flatten)]
    pub base: BaseConfig,
    pub g: GrassmannFnSpec,
    pub h: GrassmannFnSpec,
    #[serde(default = "default_eps_grid")]
    pub eps_grid: Vec<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

/// p = 1 comparison: under the sampled hypothesis R*g <= R*h, the mollified
/// differences int (h - g) e^{-eps |z|^2} stay non-negative for every eps in
/// the grid, and so does the L^1 limit ||h||_1 - ||g||_1.
pub fn verify_p1_monotonicity(
    g: &GrassmannFunction,
    h: &GrassmannFunction,
    gq: &GrassmannQuadrature,
    spec: &PlaneQuadratureSpec,
    eps_grid: &[f64],
    points: &[nalgebra::DVector<f64>],
    tol: f64,
) -> Result<ExperimentCore> {
    if eps_grid.is_empty() || eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::parameter("eps grid must be decreasing and non-empty"));
    }
    let mut core = ExperimentCore::new();
    core.tolerance("margin", tol);

    let (hyp_margin, worst) = hypothesis_margin(g, h, gq, points)?;
    core.quantity("hypothesis_min_margin", hyp_margin);
    if hyp_margin < -tol {
        core.quantity("violating_point_norm", points[worst].norm());
        core.inconclusive("hypothesis R*g <= R*h violated at a sampled point");
        return Ok(core);
    }

    let diff = h.sub(g);
    let mut sweep = Vec::with_capacity(eps_grid.len());
    let mut min_eps_margin = f64::INFINITY;
    for &eps in eps_grid {
        if eps <= 0.0 {
            return Err(Error::parameter("mollifier widths must be positive"));
        }
        let mollifier = GrassmannFunction::gaussian_in_z(eps, 1.0)?;
        let d = pairing(&diff, &mollifier, gq, spec)?;
        sweep.push((eps, d));
        min_eps_margin = min_eps_margin.min(d);
    }
    core.margin("min_mollified_margin", min_eps_margin, tol);

    let one = GrassmannFunction::constant(1.0);
    let norm_g = grassmann_lp_norm(g, 1.0, &one, gq, spec)?;
    let norm_h = grassmann_lp_norm(h, 1.0, &one, gq, spec)?;
    core.quantity("norm_g_l1", norm_g);
    core.quantity("norm_h_l1", norm_h);
    core.margin("l1_margin", norm_h - norm_g, tol);
    core.profile = Some(Profile {
        abscissa: "epsilon".into(),
        ordinate: "mollified_difference".into(),
        points: sweep,
    });
    Ok(core)
}

pub fn run_p1_monotonicity(cfg: &P1Config) -> Result<RunOutput> {
    let started = Instant::now();
    cfg.base.validate()?;
    let gq = cfg.base.haar()?;
    let g = build_grassmann_fn(&cfg.g, cfg.base.n, &cfg.base.plane)?;
    let h = build_grassmann_fn(&cfg.h, cfg.base.n, &cfg.base.plane)?;
    let points = cfg.base.hypothesis_points();
    let core = verify_p1_monotonicity(
        &g,
        &h,
        &gq,
        &cfg.base.plane,
        &cfg.eps_grid,
        &points,
        cfg.tolerance,
    )?;
    Ok(assemble(
        "verify_p1_monotonicity",
        cfg.base.seed,
        serde_json::to_value(cfg)?,
        core,
        started,
    ))
}

fn default_link_tolerance() -> f64 {
    1e-5
}

fn default_conclusion_tolerance() -> f64 {
    1e-6
}

fn default_pairing_budget() -> usize {
    32
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffirmativeConfig {
    #[serde(flatten)]
    pub base: BaseConfig,
    pub p: f64,
    pub witness: FieldSpec,
    pub h: GrassmannFnSpec,
    #[serde(default = "default_link_tolerance")]
    pub link_tolerance: f64,
    #[serde(default = "default_conclusion_tolerance")]
    pub conclusion_tolerance: f64,
    /// Per-axis budget of the spatial quadrature behind <mu_g, R*.>.
    #[serde(default = "default_pairing_budget")]
    pub pairing_budget: usize,
}

/// Evaluates every link of the affirmative-comparison chain
///   ||g||_p^p = <g^{p-1}, g> = <mu_g, R*g> <= <mu_g, R*h>
///             = <g^{p-1}, h> <= ||g||_p^{p-1} ||h||_p
/// for g built from the witness density, reporting equality residuals and
/// inequality margins link by link, plus the end-to-end conclusion
/// ||g||_p <= ||h||_p.
pub fn verify_affirmative_chain(
    witness: &SpatialField,
    h: &GrassmannFunction,
    p: f64,
    gq: &GrassmannQuadrature,
    spec: &PlaneQuadratureSpec,
    points: &[nalgebra::DVector<f64>],
    link_tol: f64,
    conclusion_tol: f64,
    pairing_budget: usize,
) -> Result<ExperimentCore> {
    let mut core = ExperimentCore::new();
    core.tolerance("link_residual", link_tol);
    core.tolerance("conclusion_margin", conclusion_tol);

    let adm = admissible_from_density(Witness::Field(witness.clone()), p, spec)?;
    let g = adm.h.clone();

    let (hyp_margin, worst) = hypothesis_margin(&g, h, gq, points)?;
    core.quantity("hypothesis_min_margin", hyp_margin);
    if hyp_margin < -link_tol {
        core.quantity("violating_point_norm", points[worst].norm());
        core.inconclusive("hypothesis R*g <= R*h violated at a sampled point");
        return Ok(core);
    }

    let one = GrassmannFunction::constant(1.0);
    let g_pow = g.pow_nonneg(p - 1.0);
    let norm_g = grassmann_lp_norm(&g, p, &one, gq, spec)?;
    let norm_h = grassmann_lp_norm(h, p, &one, gq, spec)?;

    let pairing_spec = PlaneQuadratureSpec {
        budget: pairing_budget,
        ..*spec
    };
    let q1 = norm_g.powf(p);
    let q2 = pairing(&g_pow, &g, gq, spec)?;
    let q3 = field_dual_pairing(witness, &g, gq, &pairing_spec)?;
    let q4 = field_dual_pairing(witness, h, gq, &pairing_spec)?;
    let q5 = pairing(&g_pow, h, gq, spec)?;
    let q6 = norm_g.powf(p - 1.0) * norm_h;

    core.quantity("norm_g_lp", norm_g);
    core.quantity("norm_h_lp", norm_h);
    core.quantity("link1_norm_p", q1);
    core.quantity("link2_pairing_gp_g", q2);
    core.quantity("link3_witness_dual_g", q3);
    core.quantity("link4_witness_dual_h", q4);
    core.quantity("link5_pairing_gp_h", q5);
    core.quantity("link6_holder_bound", q6);

    let scale = 1.0 + q1.abs() + q2.abs();
    core.margin("residual_link_1_2", link_tol - (q1 - q2).abs() / scale, 0.0);
    let scale = 1.0 + q2.abs() + q3.abs();
    core.margin("residual_link_2_3", link_tol - (q2 - q3).abs() / scale, 0.0);
    core.margin("margin_link_3_4", q4 - q3, link_tol * (1.0 + q3.abs()));
    let scale = 1.0 + q4.abs() + q5.abs();
    core.margin("residual_link_4_5", link_tol - (q4 - q5).abs() / scale, 0.0);
    core.margin("margin_link_5_6", q6 - q5, link_tol * (1.0 + q5.abs()));
    core.margin("conclusion_margin", norm_h - norm_g, conclusion_tol);
    Ok(core)
}

pub fn run_affirmative_chain(cfg: &AffirmativeConfig) -> Result<RunOutput> {
    let started = Instant::now();
    cfg.base.validate()?;
    if cfg.p <= 1.0 {
        return Err(Error::parameter("affirmative chain requires p > 1"));
    }
    let gq = cfg.base.haar()?;
    let witness = SpatialField::from_spec(&cfg.witness, cfg.base.n)?;
    let h = build_grassmann_fn(&cfg.h, cfg.base.n, &cfg.base.plane)?;
    let points = cfg.base.hypothesis_points();
    let core = verify_affirmative_chain(
        &witness,
        &h,
        cfg.p,
        &gq,
        &cfg.base.plane,
        &points,
        cfg.link_tolerance,
        cfg.conclusion_tolerance,
        cfg.pairing_budget,
    )?;
    Ok(assemble(
        "verify_affirmative_chain",
        cfg.base.seed,
        serde_json::to_value(cfg)?,
        core,
        started,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::report::Verdict;
    use crate::transforms::PlaneScheme;

    fn base(n: usize, k: usize, seed: u64) -> BaseConfig {
        BaseConfig {
            n,
            k,
            seed,
            grassmann_count: 96,
            plane: PlaneQuadratureSpec {
                scheme: PlaneScheme::TensorGauss,
                budget: 48,
                truncation_radius: 10.0,
            },
            grid: super::super::grids::GridConfig {
                radii: 8,
                directions: 12,
                r_max: 5.0,
            },
        }
    }

    #[test]
    fn p1_holds_for_scaled_pair() {
        // g = h/2: every margin is half the h mass.
        let cfg = P1Config {
            base: base(2, 1, 42),
            g: GrassmannFnSpec::GaussianInZ {
                width: 1.0,
                amplitude: 0.5,
            },
            h: GrassmannFnSpec::GaussianInZ {
                width: 1.0,
                amplitude: 1.0,
            },
            eps_grid: default_eps_grid(),
            tolerance: 1e-6,
        };
        let out = run_p1_monotonicity(&cfg).unwrap();
        assert_eq!(out.report.verdict, Verdict::Holds);
        let q = &out.report.quantities;
        let expected = 0.5 * q["norm_h_l1"];
        assert!((q["l1_margin"] - expected).abs() < 1e-9);
        assert!(out.profile.is_some());
    }

    #[test]
    fn p1_equality_case_holds_at_tolerance() {
        let cfg = P1Config {
            base: base(2, 1, 1),
            g: GrassmannFnSpec::GaussianInZ {
                width: 0.8,
                amplitude: 1.0,
            },
            h: GrassmannFnSpec::GaussianInZ {
                width: 0.8,
                amplitude: 1.0,
            },
            eps_grid: vec![1.0, 0.5],
            tolerance: 1e-6,
        };
        let out = run_p1_monotonicity(&cfg).unwrap();
        assert_eq!(out.report.verdict, Verdict::Holds);
        assert!(out.report.quantities["l1_margin"].abs() < 1e-9);
    }

    #[test]
    fn p1_detects_hypothesis_violation() {
        // g = 2h makes R*g > R*h everywhere: inconclusive, not fails.
        let cfg = P1Config {
            base: base(2, 1, 2),
            g: GrassmannFnSpec::GaussianInZ {
                width: 1.0,
                amplitude: 2.0,
            },
            h: GrassmannFnSpec::GaussianInZ {
                width: 1.0,
                amplitude: 1.0,
            },
            eps_grid: vec![1.0, 0.5],
            tolerance: 1e-6,
        };
        let out = run_p1_monotonicity(&cfg).unwrap();
        assert_eq!(out.report.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn affirmative_chain_dominated_case() {
        // h = 2 g by construction: every link holds with clear margins.
        let witness = FieldSpec::Gaussian {
            width: 1.0,
            center: vec![],
            amplitude: 1.0,
        };
        let cfg = AffirmativeConfig {
            base: base(2, 1, 7),
            p: 2.0,
            witness: witness.clone(),
            h: GrassmannFnSpec::RadonOfField {
                field: witness,
                power: 1.0,
            },
            link_tolerance: 1e-5,
            conclusion_tolerance: 1e-6,
            pairing_budget: 32,
        };
        // h = R(witness) = g for p = 2; scale h by 2 through a sum.
        let cfg = AffirmativeConfig {
            h: GrassmannFnSpec::Sum {
                terms: vec![cfg.h.clone(), cfg.h.clone()],
            },
            ..cfg
        };
        let out = run_affirmative_chain(&cfg).unwrap();
        assert_eq!(out.report.verdict, Verdict::Holds, "{:?}", out.report);
        let q = &out.report.quantities;
        // Conclusion margin is ||h|| - ||g|| = ||g|| when h = 2g.
        assert!((q["conclusion_margin"] - q["norm_g_lp"]).abs() < 1e-6);
    }

    #[test]
    fn affirmative_chain_tight_case() {
        // h = g: the whole chain collapses to equalities within tolerance.
        let witness = FieldSpec::Gaussian {
            width: 1.0,
            center: vec![],
            amplitude: 1.0,
        };
        let cfg = AffirmativeConfig {
            base: base(2, 1, 8),
            p: 2.0,
            witness: witness.clone(),
            h: GrassmannFnSpec::RadonOfField {
                field: witness,
                power: 1.0,
            },
            link_tolerance: 1e-5,
            conclusion_tolerance: 1e-5,
            pairing_budget: 32,
        };
        let out = run_affirmative_chain(&cfg).unwrap();
        assert_eq!(out.report.verdict, Verdict::Holds, "{:?}", out.report);
        assert!(out.report.quantities["conclusion_margin"].abs() < 1e-5);
    }
}
