//! Monte Carlo simulation of the branching stable process.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::curve::check_grid;
use crate::error::{Error, Result};
use crate::offspring::OffspringDist;
use crate::rng::{run_batched, run_chunked, Streams};
use crate::stable::StableParams;
use crate::stats::{wilson, Z95};

/// Trees simulated per RNG stream.
pub const TREE_BATCH: u64 = 1024;

/// Simulation settings for one tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub step: f64,
    pub max_particles: u64,
    pub max_time: f64,
    pub record_population_at: Vec<f64>,
    /// Abandon a tree once its maximum reaches this level.
    pub stop_above: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            step: 0.02,
            max_particles: 1_000_000,
            max_time: f64::INFINITY,
            record_population_at: Vec::new(),
            stop_above: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) {
            return Err(Error::Domain(format!(
                "step = {} must be positive",
                self.step
            )));
        }
        if self.max_particles < 1 {
            return Err(Error::Domain("max_particles must be at least 1".into()));
        }
        if !(self.max_time > 0.0) {
            return Err(Error::Domain(format!(
                "max_time = {} must be positive",
                self.max_time
            )));
        }
        if !self.record_population_at.is_empty() {
            check_grid(&self.record_population_at)?;
        }
        Ok(())
    }

    /// Horizon `4 x_max^{α(1 − 1/γ)}` for critical runs.
    pub fn critical_horizon(alpha: f64, gamma: f64, x_max: f64) -> f64 {
        4.0 * x_max.powf(alpha * (1.0 - 1.0 / gamma))
    }
}

/// Summary of one simulated tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeOutcome {
    pub m_skeleton: f64,
    pub extinct: bool,
    pub extinction_time: f64,
    pub truncated: bool,
    /// The tree was abandoned after reaching `stop_above`.
    pub stopped: bool,
    pub total_particles: u64,
    pub alive_at: Vec<u64>,
}

/// Breadth-first simulation of one tree rooted at 0.
pub fn simulate_tree<R: Rng + ?Sized>(
    motion: &StableParams,
    dist: &OffspringDist,
    config: &SimConfig,
    rng: &mut R,
) -> TreeOutcome {
    grow_tree(motion, dist, config, false, rng).0
}

/// One tree whose particles move on the skeleton of `config.step` and on its
/// halving; returns the outcome on the coarse skeleton and the fine maximum.
pub fn simulate_tree_refined<R: Rng + ?Sized>(
    motion: &StableParams,
    dist: &OffspringDist,
    config: &SimConfig,
    rng: &mut R,
) -> (TreeOutcome, f64) {
    grow_tree(motion, dist, config, true, rng)
}

fn grow_tree<R: Rng + ?Sized>(
    motion: &StableParams,
    dist: &OffspringDist,
    config: &SimConfig,
    refine: bool,
    rng: &mut R,
) -> (TreeOutcome, f64) {
    let sampler = motion.sampler();
    let record = &config.record_population_at;
    let mut alive_at = vec![0u64; record.len()];
    let mut queue: VecDeque<(f64, f64)> = VecDeque::new();
    queue.push_back((0.0, 0.0));
    let mut total = 1u64;
    let mut m = 0.0f64;
    let mut m_fine = 0.0f64;
    let mut last_death = 0.0f64;
    let (mut truncated, mut stopped) = (false, false);

    while let Some((birth, x0)) = queue.pop_front() {
        let life: f64 = Exp1.sample(rng);
        let death = birth + life;
        for (slot, &t) in alive_at.iter_mut().zip(record) {
            if birth <= t && t < death {
                *slot += 1;
            }
        }
        let end = death.min(config.max_time);
        let (x1, peak, peak_fine) = if end <= birth {
            (x0, x0, x0)
        } else if refine {
            sampler.walk_refined(x0, end - birth, config.step, rng)
        } else {
            let (x1, p) = sampler.walk(x0, end - birth, config.step, rng);
            (x1, p, p)
        };
        m = m.max(peak);
        m_fine = m_fine.max(peak_fine);
        if config.stop_above.is_some_and(|s| m >= s) {
            stopped = true;
            break;
        }
        if death > config.max_time {
            truncated = true;
            continue;
        }
        last_death = last_death.max(death);
        let k = dist.sample(rng);
        if k > 0 {
            if total.saturating_add(k) > config.max_particles {
                truncated = true;
                break;
            }
            total += k;
            for _ in 0..k {
                queue.push_back((death, x1));
            }
        }
    }
    let extinct = !truncated && !stopped;
    let outcome = TreeOutcome {
        m_skeleton: m,
        extinct,
        extinction_time: if extinct { last_death } else { f64::NAN },
        truncated: truncated && !stopped,
        stopped,
        total_particles: total,
        alive_at,
    };
    (outcome, m_fine)
}

/// Mergeable hit counts of `M ≥ x` over a fixed grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub xs: Vec<f64>,
    /// Trees with observed maximum `≥ x`.
    pub hits: Vec<u64>,
    /// Truncated trees with observed maximum `< x` (outcome unknown).
    pub unknown: Vec<u64>,
    pub n: u64,
    pub n_truncated: u64,
    pub n_stopped: u64,
    pub total_particles: u64,
}

impl TailEstimate {
    pub fn empty(xs: &[f64]) -> Self {
        Self {
            xs: xs.to_vec(),
            hits: vec![0; xs.len()],
            unknown: vec![0; xs.len()],
            n: 0,
            n_truncated: 0,
            n_stopped: 0,
            total_particles: 0,
        }
    }

    pub fn record(&mut self, tree: &TreeOutcome) {
        self.n += 1;
        self.total_particles += tree.total_particles;
        self.n_truncated += u64::from(tree.truncated);
        self.n_stopped += u64::from(tree.stopped);
        for (i, &x) in self.xs.iter().enumerate() {
            if tree.m_skeleton >= x {
                self.hits[i] += 1;
            } else if tree.truncated {
                self.unknown[i] += 1;
            }
        }
    }

    /// Associative, commutative combination of two accumulators on the same grid.
    pub fn merge(mut self, other: Self) -> Self {
        debug_assert_eq!(self.xs, other.xs);
        for i in 0..self.xs.len() {
            self.hits[i] += other.hits[i];
            self.unknown[i] += other.unknown[i];
        }
        self.n += other.n;
        self.n_truncated += other.n_truncated;
        self.n_stopped += other.n_stopped;
        self.total_particles += other.total_particles;
        self
    }

    /// Build directly from exact probabilities (synthetic inputs for tests).
    pub fn from_values(xs: &[f64], u: &[f64], n: u64) -> Self {
        let mut est = Self::empty(xs);
        est.n = n;
        est.hits = u.iter().map(|p| (p * n as f64).round() as u64).collect();
        est
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn u_pessimistic(&self, i: usize) -> f64 {
        self.hits[i] as f64 / self.n as f64
    }

    pub fn u_optimistic(&self, i: usize) -> f64 {
        (self.hits[i] + self.unknown[i]) as f64 / self.n as f64
    }

    pub fn u_mid(&self, i: usize) -> f64 {
        0.5 * (self.u_pessimistic(i) + self.u_optimistic(i))
    }

    /// Interval covering both bracket ends at 95%.
    pub fn ci(&self, i: usize) -> (f64, f64) {
        (
            wilson(self.hits[i], self.n, Z95).0,
            wilson(self.hits[i] + self.unknown[i], self.n, Z95).1,
        )
    }

    /// Statistical half-width of the pessimistic count alone.
    pub fn stat_halfwidth(&self, i: usize) -> f64 {
        let (lo, hi) = wilson(self.hits[i], self.n, Z95);
        0.5 * (hi - lo)
    }

    pub fn bracket_width(&self, i: usize) -> f64 {
        self.unknown[i] as f64 / self.n as f64
    }

    /// Relative statistical half-width `halfwidth / u_mid` (infinite when `u_mid = 0`).
    pub fn rel_halfwidth(&self, i: usize) -> f64 {
        let u = self.u_mid(i);
        if u > 0.0 {
            self.stat_halfwidth(i) / u
        } else {
            f64::INFINITY
        }
    }
}

/// Survival fractions `Q̂(t) = P(N_t ≥ 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub ts: Vec<f64>,
    pub alive: Vec<u64>,
    pub n: u64,
    /// Trees whose population exceeded the cap (counted as surviving).
    pub capped: u64,
}

impl SurvivalCurve {
    fn empty(ts: &[f64]) -> Self {
        Self {
            ts: ts.to_vec(),
            alive: vec![0; ts.len()],
            n: 0,
            capped: 0,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.alive.iter_mut().zip(&other.alive) {
            *a += b;
        }
        self.n += other.n;
        self.capped += other.capped;
        self
    }

    pub fn q_hat(&self, i: usize) -> f64 {
        self.alive[i] as f64 / self.n as f64
    }

    pub fn ci(&self, i: usize) -> (f64, f64) {
        wilson(self.alive[i], self.n, Z95)
    }
}

/// Default population cap for [`estimate_survival`].
pub const SURVIVAL_POPULATION_CAP: u64 = 1_000_000;

/// Survival of a critical Galton–Watson process in continuous time, by an
/// event-driven simulation of the population size only.
pub fn estimate_survival(
    dist: &OffspringDist,
    t_grid: &[f64],
    n_reps: u64,
    pop_cap: u64,
    streams: &Streams,
) -> Result<SurvivalCurve> {
    if !dist.is_critical() {
        return Err(Error::Domain(format!(
            "survival estimation needs a critical law, m = {}",
            dist.m
        )));
    }
    check_grid(t_grid)?;
    if t_grid[0] < 0.0 {
        return Err(Error::Domain("survival times must be nonnegative".into()));
    }
    let rate_per_particle = 1.0 - dist.prob(1);
    let t_end = t_grid[t_grid.len() - 1];
    let curve = run_batched(
        &streams.domain("survival"),
        n_reps,
        TREE_BATCH,
        |rng, range| {
            let mut acc = SurvivalCurve::empty(t_grid);
            for _ in range {
                acc.n += 1;
                if rate_per_particle <= 0.0 {
                    acc.alive.iter_mut().for_each(|a| *a += 1);
                    continue;
                }
                let mut z = 1u64;
                let mut t = 0.0;
                let mut next = 0;
                loop {
                    let e: f64 = Exp1.sample(rng);
                    let t_new = t + e / (z as f64 * rate_per_particle);
                    while next < t_grid.len() && t_grid[next] < t_new {
                        acc.alive[next] += 1;
                        next += 1;
                    }
                    if next == t_grid.len() || t_new > t_end {
                        break;
                    }
                    t = t_new;
                    let k = dist.sample_not_one(rng).unwrap_or(1);
                    z = z - 1 + k;
                    if z == 0 {
                        break;
                    }
                    if z > pop_cap {
                        acc.capped += 1;
                        for slot in &mut acc.alive[next..] {
                            *slot += 1;
                        }
                        break;
                    }
                }
            }
            acc
        },
        SurvivalCurve::merge,
    )
    .unwrap_or_else(|| SurvivalCurve::empty(t_grid));
    Ok(curve)
}

/// Fraction of trees whose maximum reaches each `x`, with truncation bracket.
pub fn estimate_tail(
    motion: &StableParams,
    dist: &OffspringDist,
    x_grid: &[f64],
    n_reps: u64,
    config: &SimConfig,
    streams: &Streams,
) -> Result<TailEstimate> {
    check_grid(x_grid)?;
    config.validate()?;
    if dist.m > 1.0 + 1e-12 {
        return Err(Error::Supercritical(dist.m));
    }
    if motion.is_degenerate() {
        let mut est = TailEstimate::empty(x_grid);
        est.n = n_reps;
        for (h, &x) in est.hits.iter_mut().zip(x_grid) {
            *h = if x <= 0.0 { n_reps } else { 0 };
        }
        est.total_particles = 0;
        return Ok(est);
    }
    if dist.gamma < 1.2 && config.max_particles <= 1_000_000 {
        log::warn!(
            "gamma = {} is close to 1; the particle cap may truncate many trees",
            dist.gamma
        );
    }
    let trees = streams.domain("tail");
    let est = run_chunked(
        n_reps,
        TREE_BATCH,
        |_, range| {
            let mut acc = TailEstimate::empty(x_grid);
            for i in range {
                acc.record(&simulate_tree(motion, dist, config, &mut trees.rng(i)));
            }
            acc
        },
        TailEstimate::merge,
    )
    .unwrap_or_else(|| TailEstimate::empty(x_grid));
    Ok(est)
}

/// Tail estimates on the skeleton of `config.step` and on its halving, from
/// the same trees and the same paths.
pub fn estimate_tail_refinement(
    motion: &StableParams,
    dist: &OffspringDist,
    x_grid: &[f64],
    n_reps: u64,
    config: &SimConfig,
    streams: &Streams,
) -> Result<(TailEstimate, TailEstimate)> {
    check_grid(x_grid)?;
    config.validate()?;
    if config.stop_above.is_some() {
        return Err(Error::Domain(
            "refinement runs cannot stop trees early".into(),
        ));
    }
    if dist.m > 1.0 + 1e-12 {
        return Err(Error::Supercritical(dist.m));
    }
    let trees = streams.domain("tail-refinement");
    let pair = run_chunked(
        n_reps,
        TREE_BATCH,
        |_, range| {
            let mut coarse = TailEstimate::empty(x_grid);
            let mut fine = TailEstimate::empty(x_grid);
            for i in range {
                let (tree, m_fine) = simulate_tree_refined(motion, dist, config, &mut trees.rng(i));
                coarse.record(&tree);
                fine.record(&TreeOutcome {
                    m_skeleton: m_fine,
                    ..tree
                });
            }
            (coarse, fine)
        },
        |a, b| (a.0.merge(b.0), a.1.merge(b.1)),
    )
    .unwrap_or_else(|| (TailEstimate::empty(x_grid), TailEstimate::empty(x_grid)));
    Ok(pair)
}
