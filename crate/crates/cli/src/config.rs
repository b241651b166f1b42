//! Run configuration, read from a TOML document.

use std::path::Path;

use bstable::{make_explicit, make_heavy_tail, OffspringDist, StableParams, WindowPolicy};
use serde::{Deserialize, Serialize};

use crate::fail::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub workers: Option<usize>,
    pub motion: MotionConfig,
    pub offspring: OffspringConfig,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub survival: SurvivalSection,
    #[serde(default)]
    pub integral: IntegralSection,
    #[serde(default)]
    pub phi: PhiSection,
    #[serde(default)]
    pub limits: LimitsSection,
    #[serde(default)]
    pub fk: FkSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionConfig {
    pub alpha: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    #[serde(default)]
    pub eta: f64,
}

/// Either `probs = [p0, p1, ...]` or the heavy-tail triple `gamma`, `kappa`, `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffspringConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub step: f64,
    pub n_reps: u64,
    /// Explicit grid. With neither `x_grid` nor `grid`, a pilot run chooses one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    pub points_per_octave: usize,
    pub pilot_reps: u64,
    pub max_particles: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_above: Option<f64>,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            step: 0.02,
            n_reps: 100_000,
            x_grid: None,
            grid: None,
            points_per_octave: 3,
            pilot_reps: 10_000,
            max_particles: 1_000_000,
            max_time: None,
            stop_above: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Geometric,
    Uniform,
}

/// `points` grid points from `lo` to `hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub spacing: Spacing,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        match self.spacing {
            Spacing::Geometric => bstable::geometric_grid(self.lo, self.hi, self.points),
            Spacing::Uniform => bstable::uniform_grid(self.lo, self.hi, self.points),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub max_rel_halfwidth: f64,
    /// Window length in octaves; 3 for power fits and 1 for exponential fits when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub octaves: Option<f64>,
    pub exponent_tolerance: f64,
    pub amplitude_tolerance: f64,
    pub rate_tolerance: f64,
    pub plateau_cv_max: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            max_rel_halfwidth: 0.25,
            octaves: None,
            exponent_tolerance: 0.1,
            amplitude_tolerance: 0.25,
            rate_tolerance: 0.1,
            plateau_cv_max: 0.2,
        }
    }
}

impl AnalysisSection {
    pub fn policy(&self, kind: bstable::TailKind) -> WindowPolicy {
        let mut p = WindowPolicy::for_kind(kind);
        p.max_rel_halfwidth = self.max_rel_halfwidth;
        if let Some(o) = self.octaves {
            p.octaves = o;
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurvivalSection {
    pub times: Vec<f64>,
    pub n_reps: u64,
    pub pop_cap: u64,
    pub plateau_tolerance: f64,
    pub kolmogorov_tolerance: f64,
    pub conjecture_tolerance: f64,
}

impl Default for SurvivalSection {
    fn default() -> Self {
        Self {
            times: vec![100.0, 300.0, 1000.0],
            n_reps: 1_000_000,
            pop_cap: 1_000_000,
            plateau_tolerance: 0.2,
            kolmogorov_tolerance: 0.1,
            conjecture_tolerance: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegralSection {
    pub kernel_size: usize,
    /// Kernel skeleton step; `sim.step` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub residual_max: f64,
    /// Run the tail Monte Carlo on the same grid and compare.
    pub compare_tail: bool,
    pub ci_multiple: f64,
    pub sup_floor: f64,
    pub remainder_max: f64,
    pub sandwich_eps: f64,
}

impl Default for IntegralSection {
    fn default() -> Self {
        Self {
            kernel_size: 200_000,
            step: None,
            damping: None,
            tol: 1e-7,
            max_iter: 5000,
            residual_max: 1e-6,
            compare_tail: true,
            ci_multiple: 3.0,
            sup_floor: 0.02,
            remainder_max: 0.05,
            sandwich_eps: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhiSection {
    pub dy: f64,
    pub n_paths: u64,
    pub step: f64,
    pub max_time: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub damping: f64,
    pub agreement_multiple: f64,
}

impl Default for PhiSection {
    fn default() -> Self {
        let d = bstable::PhiOptions::default();
        Self {
            dy: 1.0,
            n_paths: d.n_paths,
            step: d.step,
            max_time: d.max_time,
            max_iter: d.max_iter,
            tol: d.tol,
            damping: d.damping,
            agreement_multiple: 2.0,
        }
    }
}

impl PhiSection {
    pub fn options(&self) -> bstable::PhiOptions {
        bstable::PhiOptions {
            n_paths: self.n_paths,
            step: self.step,
            max_time: self.max_time,
            max_iter: self.max_iter,
            tol: self.tol,
            damping: self.damping,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitsSection {
    pub lambdas: Vec<f64>,
    pub n_reps: u64,
    pub step: f64,
    /// Relative band around the limit at the smallest λ.
    pub tolerance: f64,
}

impl Default for LimitsSection {
    fn default() -> Self {
        Self {
            lambdas: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
            n_reps: 1_000_000,
            step: 0.02,
            tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum USource {
    /// Monotone interpolant of the tail Monte Carlo on `sim.x_grid`.
    Tail,
    /// Converged integral-equation solution.
    Integral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FkSection {
    pub x: f64,
    pub y: f64,
    pub n_paths: u64,
    pub step: f64,
    pub max_time: f64,
    pub tolerance: f64,
    pub bound_slack: f64,
    pub u_source: USource,
}

impl Default for FkSection {
    fn default() -> Self {
        Self {
            x: 8.0,
            y: 4.0,
            n_paths: 100_000,
            step: 0.01,
            max_time: 200.0,
            tolerance: 0.1,
            bound_slack: 0.02,
            u_source: USource::Tail,
        }
    }
}

/// Validated model built from a config.
#[derive(Debug, Clone)]
pub struct Model {
    pub motion: StableParams,
    pub dist: OffspringDist,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
            .map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message)))
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        cfg.check_values()?;
        Ok(cfg)
    }

    /// Canonical serialization used for the config hash.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn check_values(&self) -> Result<(), CliError> {
        let bad = |field: &str, why: &str| Err(CliError::config(format!("{field}: {why}")));
        if self.workers == Some(0) {
            return bad("workers", "must be at least 1");
        }
        let s = &self.sim;
        if !(s.step > 0.0) {
            return bad("sim.step", "must be positive");
        }
        if s.n_reps == 0 {
            return bad("sim.n_reps", "must be positive");
        }
        if s.points_per_octave == 0 {
            return bad("sim.points_per_octave", "must be positive");
        }
        if s.pilot_reps == 0 {
            return bad("sim.pilot_reps", "must be positive");
        }
        if let Some(g) = &s.x_grid {
            if g.is_empty()
                || g.iter().any(|x| !x.is_finite())
                || g.windows(2).any(|w| w[1] <= w[0])
            {
                return bad(
                    "sim.x_grid",
                    "must be a nonempty strictly increasing list of finite numbers",
                );
            }
        }
        if let Some(g) = &s.grid {
            if s.x_grid.is_some() {
                return bad("sim.grid", "give either `x_grid` or `grid`, not both");
            }
            let lo_ok = match g.spacing {
                Spacing::Geometric => g.lo > 0.0,
                Spacing::Uniform => g.lo >= 0.0,
            };
            if !lo_ok || !(g.hi > g.lo) || !g.hi.is_finite() || g.points < 2 {
                return bad(
                    "sim.grid",
                    "need 0 < lo < hi (0 <= lo for uniform spacing) and at least 2 points",
                );
            }
        }
        if s.max_time.is_some_and(|t| !(t > 0.0)) {
            return bad("sim.max_time", "must be positive");
        }
        if s.stop_above.is_some_and(|t| !(t > 0.0)) {
            return bad("sim.stop_above", "must be positive");
        }
        let a = &self.analysis;
        if !(a.max_rel_halfwidth > 0.0) {
            return bad("analysis.max_rel_halfwidth", "must be positive");
        }
        if a.octaves.is_some_and(|o| !(o > 0.0)) {
            return bad("analysis.octaves", "must be positive");
        }
        let v = &self.survival;
        if v.times.is_empty()
            || v.times.iter().any(|&t| !(t > 0.0))
            || v.times.windows(2).any(|w| w[1] <= w[0])
        {
            return bad(
                "survival.times",
                "must be a nonempty increasing list of positive times",
            );
        }
        let i = &self.integral;
        if i.kernel_size == 0 {
            return bad("integral.kernel_size", "must be positive");
        }
        if i.step.is_some_and(|h| !(h > 0.0)) {
            return bad("integral.step", "must be positive");
        }
        if i.damping.is_some_and(|d| !(d > 0.0 && d <= 1.0)) {
            return bad("integral.damping", "must lie in (0, 1]");
        }
        if !(i.sandwich_eps > 0.0 && i.sandwich_eps < 1.0) {
            return bad("integral.sandwich_eps", "must lie in (0, 1)");
        }
        let p = &self.phi;
        if !(p.dy > 0.0) || !(p.step > 0.0) || !(p.max_time > 0.0) || p.n_paths == 0 {
            return bad("phi", "dy, step, max_time and n_paths must be positive");
        }
        if !(p.damping > 0.0 && p.damping <= 1.0) {
            return bad("phi.damping", "must lie in (0, 1]");
        }
        let l = &self.limits;
        if l.lambdas.is_empty() || l.lambdas.iter().any(|&x| !(x > 0.0)) {
            return bad(
                "limits.lambdas",
                "must be a nonempty list of positive numbers",
            );
        }
        if !(l.step > 0.0) || l.n_reps == 0 {
            return bad("limits", "step and n_reps must be positive");
        }
        let f = &self.fk;
        if !(f.y > 0.0 && f.x > f.y) {
            return bad("fk", "need 0 < y < x");
        }
        if !(f.step > 0.0) || !(f.max_time > 0.0) || f.n_paths == 0 {
            return bad("fk", "step, max_time and n_paths must be positive");
        }
        Ok(())
    }

    /// Motion and offspring law; module-level validation errors map to exit code 2.
    pub fn model(&self) -> Result<Model, CliError> {
        let m = &self.motion;
        let motion = StableParams::new(m.alpha, m.c_plus, m.c_minus, m.eta)
            .map_err(|e| CliError::config(format!("motion: {e}")))?;
        let o = &self.offspring;
        let dist = match (&o.probs, o.gamma, o.kappa, o.m) {
            (Some(p), None, None, None) => make_explicit(p),
            (None, Some(g), Some(k), Some(m)) => make_heavy_tail(g, k, m),
            _ => {
                return Err(CliError::config(
                    "offspring: give either `probs` or all of `gamma`, `kappa`, `m`".to_string(),
                ))
            }
        }
        .map_err(|e| CliError::config(format!("offspring: {e}")))?;
        if dist.m > 1.0 + 1e-12 {
            return Err(CliError::config(format!(
                "offspring: supercritical law (m = {}) is not supported",
                dist.m
            )));
        }
        Ok(Model { motion, dist })
    }
}
