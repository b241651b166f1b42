//! Feynman–Kac numerics along dual paths `ξ̃ = −ξ` of a spectrally negative
//! motion: the `φ` fixed point, the representation identity for `u`, and
//! plateau constants of fitted tails.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::branching::TailEstimate;
use crate::curve::{check_grid, MonotoneCurve, TailModel};
use crate::error::{Error, Result};
use crate::offspring::OffspringDist;
use crate::rng::{run_batched, run_chunked, Streams};
use crate::stable::{StableParams, StableSampler};
use crate::stats::mean_cv;
use crate::tail::{is_reliable, select_window, TailKind, WindowPolicy};

const PATH_BATCH: u64 = 256;
/// Paths whose accumulated exponent passes this are counted as killed.
const KILL_EXPONENT: f64 = 40.0;
/// Smallest value kept on a `φ` grid.
const PHI_FLOOR: f64 = 1e-300;

/// Solution grid of the `φ` equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiGrid {
    pub ys: Vec<f64>,
    pub phi: Vec<f64>,
    pub gamma: f64,
    pub c2: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final sup-norm change between sweeps.
    pub last_change: f64,
    /// 95% Monte Carlo half-width at each node for the final iterate.
    pub halfwidth: Vec<f64>,
    /// Decay rate of the exponential continuation beyond the last node.
    pub envelope_rate: f64,
    /// Sweeps after which an invariant had to be restored by projection.
    pub monotone_repairs: usize,
    /// Sweeps ending with an invariant violated after projection.
    pub invariant_violations: usize,
    pub truncated_paths: u64,
    pub n_paths: u64,
    pub step: f64,
}

impl PhiGrid {
    /// `φ(0) = 1`, values in `(0, 1]`, nonincreasing.
    pub fn invariants_hold(&self) -> bool {
        phi_invariants(&self.phi)
    }

    pub fn curve(&self) -> Result<MonotoneCurve> {
        MonotoneCurve::new(
            self.ys.clone(),
            self.phi.clone(),
            1.0,
            TailModel::Exponential {
                rate: self.envelope_rate,
            },
        )
    }
}

fn phi_invariants(phi: &[f64]) -> bool {
    phi.first() == Some(&1.0)
        && phi.iter().all(|&p| p > 0.0 && p <= 1.0)
        && phi.windows(2).all(|w| w[1] <= w[0])
}

/// Starting profile of a Picard run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiStart {
    /// `φ⁰ ≡ 1`.
    Ones,
    /// `φ⁰(y) = e^{−r y}` with the first-passage envelope rate `r`.
    Envelope,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiOptions {
    pub n_paths: u64,
    pub step: f64,
    /// Simulated time after which a dual path is abandoned.
    pub max_time: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub damping: f64,
}

impl Default for PhiOptions {
    fn default() -> Self {
        Self {
            n_paths: 500,
            step: 0.05,
            max_time: 500.0,
            max_iter: 500,
            tol: 1e-7,
            damping: 0.5,
        }
    }
}

/// Sparse occupation weights of one dual path on the node hats, plus the
/// weight it spends beyond the last node.
#[derive(Debug, Clone)]
struct Occupation {
    first: usize,
    weights: Vec<f64>,
    beyond: f64,
}

impl Occupation {
    fn empty() -> Self {
        Self {
            first: usize::MAX,
            weights: Vec::new(),
            beyond: 0.0,
        }
    }

    fn add(&mut self, node: usize, w: f64) {
        if self.weights.is_empty() {
            self.first = node;
            self.weights.push(w);
            return;
        }
        if node < self.first {
            let shift = self.first - node;
            self.weights.splice(0..0, std::iter::repeat_n(0.0, shift));
            self.first = node;
        }
        let k = node - self.first;
        if k >= self.weights.len() {
            self.weights.resize(k + 1, 0.0);
        }
        self.weights[k] += w;
    }

    #[inline]
    fn integral(&self, psi: &[f64]) -> f64 {
        let last = psi[psi.len() - 1];
        let s: f64 = self
            .weights
            .iter()
            .zip(&psi[self.first.min(psi.len())..])
            .map(|(w, p)| w * p)
            .sum();
        s + self.beyond * last
    }
}

/// Frozen ensemble of dual paths, one block per grid node, used for every
/// Picard sweep.
#[derive(Debug, Clone)]
pub struct PhiEnsemble {
    ys: Vec<f64>,
    gamma: f64,
    c2: f64,
    envelope_rate: f64,
    paths: Vec<Vec<Occupation>>,
    truncated: u64,
    n_paths: u64,
    step: f64,
}

/// Rate `(C₂/C₁)^{1/α}` of the exponential lower envelope of `φ`.
pub fn phi_envelope_rate(motion: &StableParams, dist: &OffspringDist) -> Result<f64> {
    motion.first_passage_rate(dist.c2)
}

/// Uniform `φ` grid with spacing `dy` up to where the envelope drops below `1e-4`.
pub fn default_phi_grid(motion: &StableParams, dist: &OffspringDist, dy: f64) -> Result<Vec<f64>> {
    let r = phi_envelope_rate(motion, dist)?;
    let y_max = (1e4f64).ln() / r;
    let n = (y_max / dy).ceil() as usize;
    Ok((0..=n).map(|i| i as f64 * dy).collect())
}

fn check_phi_inputs(motion: &StableParams, dist: &OffspringDist) -> Result<()> {
    if !motion.is_spectrally_negative() || motion.is_degenerate() {
        return Err(Error::InvalidMotion(
            "the dual-path equations need c_plus = 0 and a nondegenerate motion".into(),
        ));
    }
    if !dist.is_critical() || !dist.has_attraction_data() {
        return Err(Error::UnsupportedRegime(
            "the phi equation needs a critical law with C2 > 0".into(),
        ));
    }
    Ok(())
}

/// Adds the hat weights of position `z` times `w`.
#[inline]
fn deposit(occ: &mut Occupation, ys: &[f64], beyond_decay: f64, z: f64, w: f64) {
    let n = ys.len();
    let y_max = ys[n - 1];
    if z >= y_max {
        occ.beyond += w * (-beyond_decay * (z - y_max)).exp();
        return;
    }
    let z = z.max(0.0);
    let j = ys.partition_point(|&g| g <= z).max(1) - 1;
    let t = (z - ys[j]) / (ys[j + 1] - ys[j]);
    if t < 1.0 {
        occ.add(j, w * (1.0 - t));
    }
    if t > 0.0 {
        occ.add(j + 1, w * t);
    }
}

/// Runs a dual path from `start` until it passes below `level`, feeding each
/// trapezoid half-weight to `visit(position, weight)`. Returns `false` when the
/// time budget ran out first. The last partial step ends exactly at `level`.
fn dual_path<R: Rng + ?Sized, V: FnMut(f64, f64) -> bool>(
    dual: &StableSampler,
    start: f64,
    level: f64,
    step: f64,
    max_steps: u64,
    rng: &mut R,
    mut visit: V,
) -> bool {
    let mut z = start;
    for _ in 0..max_steps {
        let next = z + dual.sample_increment(step, rng);
        if next <= level {
            let d = step * (z - level) / (z - next);
            visit(z, 0.5 * d);
            visit(level, 0.5 * d);
            return true;
        }
        if !(visit(z, 0.5 * step) && visit(next, 0.5 * step)) {
            return true;
        }
        z = next;
    }
    false
}

impl PhiEnsemble {
    pub fn build(
        motion: &StableParams,
        dist: &OffspringDist,
        ys: &[f64],
        options: &PhiOptions,
        streams: &Streams,
    ) -> Result<Self> {
        check_phi_inputs(motion, dist)?;
        check_grid(ys)?;
        if ys[0] != 0.0 || ys.len() < 2 {
            return Err(Error::Domain(
                "the phi grid must start at 0 and hold at least two nodes".into(),
            ));
        }
        if !(options.step > 0.0) || !(options.max_time > options.step) || options.n_paths == 0 {
            return Err(Error::Domain(
                "phi options need step > 0, max_time > step and n_paths > 0".into(),
            ));
        }
        let envelope_rate = phi_envelope_rate(motion, dist)?;
        let beyond_decay = envelope_rate * (dist.gamma - 1.0);
        let dual = motion.sampler().negated();
        let max_steps = (options.max_time / options.step).ceil() as u64;
        let streams = streams.domain("phi");
        let mut paths = Vec::with_capacity(ys.len());
        let mut truncated = 0;
        for (i, &y) in ys.iter().enumerate() {
            if i == 0 {
                paths.push(Vec::new());
                continue;
            }
            let node_streams = streams.subdomain(i as u64);
            let (block, trunc) = run_batched(
                &node_streams,
                options.n_paths,
                PATH_BATCH,
                |rng, range| {
                    let mut out = Vec::with_capacity((range.end - range.start) as usize);
                    let mut trunc = 0u64;
                    for _ in range {
                        let mut occ = Occupation::empty();
                        let done =
                            dual_path(&dual, y, 0.0, options.step, max_steps, rng, |z, w| {
                                deposit(&mut occ, ys, beyond_decay, z, w);
                                true
                            });
                        if !done {
                            trunc += 1;
                        }
                        out.push(occ);
                    }
                    (out, trunc)
                },
                |(mut a, ta), (b, tb)| {
                    a.extend(b);
                    (a, ta + tb)
                },
            )
            .expect("n_paths > 0");
            truncated += trunc;
            paths.push(block);
        }
        Ok(Self {
            ys: ys.to_vec(),
            gamma: dist.gamma,
            c2: dist.c2,
            envelope_rate,
            paths,
            truncated,
            n_paths: options.n_paths,
            step: options.step,
        })
    }

    pub fn envelope_rate(&self) -> f64 {
        self.envelope_rate
    }

    /// One application of the right-hand side: values and 95% half-widths.
    fn apply(&self, phi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let psi: Vec<f64> = phi.iter().map(|p| p.powf(self.gamma - 1.0)).collect();
        let n = self.n_paths as f64;
        let mut vals = vec![1.0; self.ys.len()];
        let mut half = vec![0.0; self.ys.len()];
        for (i, block) in self.paths.iter().enumerate().skip(1) {
            let (s, s2) = run_chunked(
                block.len() as u64,
                4096,
                |_, range| {
                    let mut acc = (0.0, 0.0);
                    for occ in &block[range.start as usize..range.end as usize] {
                        let w = (-self.c2 * occ.integral(&psi)).exp();
                        acc.0 += w;
                        acc.1 += w * w;
                    }
                    acc
                },
                |a, b| (a.0 + b.0, a.1 + b.1),
            )
            .unwrap_or((0.0, 0.0));
            let mean = s / n;
            vals[i] = mean;
            half[i] = crate::stats::Z95 * ((s2 / n - mean * mean).max(0.0) / n).sqrt();
        }
        (vals, half)
    }

    /// Damped Picard iteration on the frozen ensemble.
    pub fn solve(&self, start: PhiStart, options: &PhiOptions) -> Result<PhiGrid> {
        if !(options.damping > 0.0 && options.damping <= 1.0) || !(options.tol > 0.0) {
            return Err(Error::Domain(
                "phi solver needs damping in (0, 1] and tol > 0".into(),
            ));
        }
        let mut phi: Vec<f64> = match start {
            PhiStart::Ones => vec![1.0; self.ys.len()],
            PhiStart::Envelope => self
                .ys
                .iter()
                .map(|y| (-self.envelope_rate * y).exp().max(PHI_FLOOR))
                .collect(),
        };
        let d = options.damping;
        let (mut repairs, mut violations) = (0, 0);
        let mut change = f64::INFINITY;
        let mut half = vec![0.0; phi.len()];
        let mut iterations = 0;
        while iterations < options.max_iter {
            let (t, h) = self.apply(&phi);
            half = h;
            let mut next: Vec<f64> = phi
                .iter()
                .zip(&t)
                .map(|(p, v)| (1.0 - d) * p + d * v)
                .collect();
            next[0] = 1.0;
            let mut repaired = false;
            for i in 0..next.len() {
                let mut v = next[i].clamp(PHI_FLOOR, 1.0);
                if i > 0 && v > next[i - 1] {
                    v = next[i - 1];
                }
                repaired |= v != next[i];
                next[i] = v;
            }
            repairs += repaired as usize;
            violations += !phi_invariants(&next) as usize;
            change = next
                .iter()
                .zip(&phi)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            phi = next;
            iterations += 1;
            log::trace!("phi sweep {iterations}: change {change:.3e}");
            if change < options.tol {
                break;
            }
        }
        Ok(PhiGrid {
            ys: self.ys.clone(),
            phi,
            gamma: self.gamma,
            c2: self.c2,
            iterations,
            converged: change < options.tol,
            last_change: change,
            halfwidth: half,
            envelope_rate: self.envelope_rate,
            monotone_repairs: repairs,
            invariant_violations: violations,
            truncated_paths: self.truncated,
            n_paths: self.n_paths,
            step: self.step,
        })
    }
}

pub fn picard_phi(
    motion: &StableParams,
    dist: &OffspringDist,
    ys: &[f64],
    options: &PhiOptions,
    start: PhiStart,
    streams: &Streams,
) -> Result<PhiGrid> {
    let grid = PhiEnsemble::build(motion, dist, ys, options, streams)?.solve(start, options)?;
    if !grid.converged {
        return Err(Error::NoConvergence {
            iterations: grid.iterations,
            residual: grid.last_change,
        });
    }
    Ok(grid)
}

/// One adjacent-pair comparison `φ(y₂) ≥ φ(y₁)·E₁[e^{−c(y₂−y₁)^α τ̃₀}]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub y1: f64,
    pub y2: f64,
    pub phi_y2: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Envelope inequality at every adjacent node pair, with
/// `c = sup C₂ φ^{γ−1}` measured on the grid.
pub fn envelope_checks(grid: &PhiGrid, motion: &StableParams) -> Result<Vec<EnvelopeCheck>> {
    let c = grid
        .phi
        .iter()
        .map(|p| grid.c2 * p.powf(grid.gamma - 1.0))
        .fold(0.0, f64::max);
    grid.ys
        .windows(2)
        .zip(grid.phi.windows(2))
        .map(|(y, p)| {
            let factor = motion.first_passage_laplace(c, y[1] - y[0])?;
            let bound = p[0] * factor;
            Ok(EnvelopeCheck {
                y1: y[0],
                y2: y[1],
                phi_y2: p[1],
                bound,
                holds: p[1] >= bound,
            })
        })
        .collect()
}

/// Result of a Monte Carlo evaluation of the representation identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkCheck {
    pub x: f64,
    pub y: f64,
    pub u_x: f64,
    pub u_y: f64,
    pub rhs: f64,
    pub rhs_halfwidth: f64,
    pub rel_error: f64,
    /// `e^{−a₀(x−y)}u(y)` (subcritical) or `u(y)` (critical).
    pub passage_bound: f64,
    pub n_paths: u64,
    pub step: f64,
    pub killed: u64,
    pub truncated: u64,
}

impl FkCheck {
    pub fn bound_holds(&self, slack: f64) -> bool {
        self.rhs <= self.passage_bound * (1.0 + slack)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct FkAcc {
    sum: f64,
    sum_sq: f64,
    killed: u64,
    truncated: u64,
}

/// Evaluates `E_x[exp(−(1−m)τ̃_y − ∫₀^{τ̃_y} f(u(ξ̃_s)) ds)]·u(y)` along dual
/// skeleton paths and compares it with `u(x)`.
#[allow(clippy::too_many_arguments)]
pub fn check_fk_identity(
    motion: &StableParams,
    dist: &OffspringDist,
    u: &MonotoneCurve,
    x: f64,
    y: f64,
    n_paths: u64,
    step: f64,
    max_time: f64,
    streams: &Streams,
) -> Result<FkCheck> {
    if !motion.is_spectrally_negative() || motion.is_degenerate() {
        return Err(Error::InvalidMotion(
            "the representation identity needs c_plus = 0 and a nondegenerate motion".into(),
        ));
    }
    if dist.m > 1.0 + 1e-12 {
        return Err(Error::Supercritical(dist.m));
    }
    if !(y >= 0.0 && x >= y) {
        return Err(Error::Domain(format!(
            "need 0 <= y <= x, got x = {x}, y = {y}"
        )));
    }
    if !(step > 0.0) || n_paths == 0 || !(max_time > step) {
        return Err(Error::Domain(
            "need step > 0, max_time > step and n_paths > 0".into(),
        ));
    }
    let (u_x, u_y) = (u.eval(x), u.eval(y));
    if !(u_y > 0.0) || !(u_x > 0.0) {
        return Err(Error::InsufficientData(format!(
            "u is not resolved at the endpoints: u(x) = {u_x}, u(y) = {u_y}"
        )));
    }
    let linear = (1.0 - dist.m).max(0.0);
    let passage_bound = if linear > 0.0 {
        u_y * motion.first_passage_laplace(linear, x - y)?
    } else {
        u_y
    };
    if x == y {
        return Ok(FkCheck {
            x,
            y,
            u_x,
            u_y,
            rhs: u_y,
            rhs_halfwidth: 0.0,
            rel_error: 0.0,
            passage_bound,
            n_paths,
            step,
            killed: 0,
            truncated: 0,
        });
    }
    let dual = motion.sampler().negated();
    let max_steps = (max_time / step).ceil() as u64;
    let rate = |z: f64| linear + dist.f_or_zero(u.eval(z).clamp(0.0, 1.0));
    let acc = run_batched(
        &streams.domain("fk-identity"),
        n_paths,
        PATH_BATCH,
        |rng, range| {
            let mut a = FkAcc::default();
            for _ in range {
                let mut e = 0.0;
                let done = dual_path(&dual, x, y, step, max_steps, rng, |z, w| {
                    e += w * rate(z);
                    e <= KILL_EXPONENT
                });
                if e > KILL_EXPONENT {
                    a.killed += 1;
                    continue;
                }
                if !done {
                    a.truncated += 1;
                }
                let w = (-e).exp();
                a.sum += w;
                a.sum_sq += w * w;
            }
            a
        },
        |a, b| FkAcc {
            sum: a.sum + b.sum,
            sum_sq: a.sum_sq + b.sum_sq,
            killed: a.killed + b.killed,
            truncated: a.truncated + b.truncated,
        },
    )
    .expect("n_paths > 0");
    let n = n_paths as f64;
    let mean = acc.sum / n;
    let half = crate::stats::Z95 * ((acc.sum_sq / n - mean * mean).max(0.0) / n).sqrt();
    let rhs = mean * u_y;
    Ok(FkCheck {
        x,
        y,
        u_x,
        u_y,
        rhs,
        rhs_halfwidth: half * u_y,
        rel_error: (rhs - u_x).abs() / u_x,
        passage_bound,
        n_paths,
        step,
        killed: acc.killed,
        truncated: acc.truncated,
    })
}

/// Window average of the normalized tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub constant: f64,
    pub cv: f64,
    pub xs: Vec<f64>,
    /// `x^{exponent}·û(x)` or `e^{rate·x}·û(x)` at each window point.
    pub values: Vec<f64>,
}

impl Plateau {
    pub fn is_nonincreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0])
    }
}

fn normalize(kind: TailKind, value: f64, x: f64, u: f64) -> f64 {
    match kind {
        TailKind::Power => x.powf(value) * u,
        TailKind::Exponential => (value * x).exp() * u,
    }
}

pub fn estimate_plateau_constant(
    est: &TailEstimate,
    exponent_or_rate: f64,
    kind: TailKind,
    policy: &WindowPolicy,
) -> Result<Plateau> {
    let w = select_window(est, policy)?;
    let idx: Vec<usize> = w.filter(|&i| is_reliable(est, i, policy)).collect();
    let xs: Vec<f64> = idx.iter().map(|&i| est.xs[i]).collect();
    let values: Vec<f64> = idx
        .iter()
        .map(|&i| normalize(kind, exponent_or_rate, est.xs[i], est.u_mid(i)))
        .collect();
    let (constant, cv) =
        mean_cv(&values).ok_or_else(|| Error::InsufficientData("empty plateau window".into()))?;
    Ok(Plateau {
        constant,
        cv,
        xs,
        values,
    })
}

/// Normalized values at every grid point with at least one hit.
pub fn normalized_tail(est: &TailEstimate, exponent_or_rate: f64, kind: TailKind) -> Plateau {
    let idx: Vec<usize> = (0..est.len())
        .filter(|&i| est.hits[i] > 0 && est.xs[i] > 0.0)
        .collect();
    let xs: Vec<f64> = idx.iter().map(|&i| est.xs[i]).collect();
    let values: Vec<f64> = idx
        .iter()
        .map(|&i| normalize(kind, exponent_or_rate, est.xs[i], est.u_mid(i)))
        .collect();
    let (constant, cv) = mean_cv(&values).unwrap_or((f64::NAN, f64::NAN));
    Plateau {
        constant,
        cv,
        xs,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offspring::make_explicit;

    fn neg() -> StableParams {
        StableParams::new(1.5, 0.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn occupation_weights_add_up_to_time() {
        let ys = [0.0, 1.0, 2.0, 3.0];
        let mut occ = Occupation::empty();
        deposit(&mut occ, &ys, 0.5, 2.5, 1.0);
        deposit(&mut occ, &ys, 0.5, 0.25, 2.0);
        deposit(&mut occ, &ys, 0.5, 5.0, 1.0);
        assert_eq!(occ.first, 0);
        assert_eq!(occ.weights, vec![1.5, 0.5, 0.5, 0.5]);
        assert!((occ.beyond - (-1.0f64).exp()).abs() < 1e-15);
        let psi = [1.0, 0.5, 0.25, 0.125];
        let want = 1.5 + 0.25 + 0.125 + 0.0625 + 0.125 * (-1.0f64).exp();
        assert!((occ.integral(&psi) - want).abs() < 1e-15);
    }

    #[test]
    fn rejects_wrong_regimes() {
        let bin = make_explicit(&[0.5, 0.0, 0.5]).unwrap();
        let sub = make_explicit(&[0.75, 0.0, 0.25]).unwrap();
        let pos = StableParams::new(1.5, 1.0, 1.0, 0.0).unwrap();
        let o = PhiOptions::default();
        let s = Streams::new(1);
        assert!(PhiEnsemble::build(&pos, &bin, &[0.0, 1.0], &o, &s).is_err());
        assert!(PhiEnsemble::build(&neg(), &sub, &[0.0, 1.0], &o, &s).is_err());
        assert!(PhiEnsemble::build(&neg(), &bin, &[0.5, 1.0], &o, &s).is_err());
    }

    #[test]
    fn phi_invariants_and_two_start_agreement() {
        let bin = make_explicit(&[0.5, 0.0, 0.5]).unwrap();
        let ys: Vec<f64> = (0..=8).map(|i| i as f64).collect();
        let o = PhiOptions {
            n_paths: 200,
            step: 0.05,
            max_time: 100.0,
            ..Default::default()
        };
        let ens = PhiEnsemble::build(&neg(), &bin, &ys, &o, &Streams::new(5)).unwrap();
        let a = ens.solve(PhiStart::Ones, &o).unwrap();
        let b = ens.solve(PhiStart::Envelope, &o).unwrap();
        assert!(a.converged && b.converged);
        assert!(a.invariants_hold() && b.invariants_hold());
        assert_eq!(a.invariant_violations + b.invariant_violations, 0);
        for i in 0..ys.len() {
            assert!((a.phi[i] - b.phi[i]).abs() <= 2.0 * a.halfwidth[i].max(1e-6));
        }
        assert!(a.phi[8] < a.phi[1] && a.phi[1] < 1.0);
        assert!(envelope_checks(&a, &neg()).unwrap().iter().all(|c| c.holds));
    }

    #[test]
    fn identity_is_exact_without_branching() {
        // p = (1/2, 1/2): G ≡ 0, so only the linear killing remains
        let dist = make_explicit(&[0.5, 0.5]).unwrap();
        let m = neg();
        let a0 = m.first_passage_rate(0.5).unwrap();
        let xs: Vec<f64> = (0..=200).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (-a0 * x).exp()).collect();
        let u = MonotoneCurve::new(xs, ys, 1.0, TailModel::Exponential { rate: a0 }).unwrap();
        let s = Streams::new(3);
        let coarse = check_fk_identity(&m, &dist, &u, 3.0, 1.0, 4_000, 0.04, 200.0, &s).unwrap();
        let fine = check_fk_identity(&m, &dist, &u, 3.0, 1.0, 16_000, 0.01, 200.0, &s).unwrap();
        assert!(
            fine.rel_error < coarse.rel_error,
            "{} vs {}",
            fine.rel_error,
            coarse.rel_error
        );
        assert!(fine.rel_error < 0.05);
        assert!(fine.bound_holds(0.02));
        let same = check_fk_identity(&m, &dist, &u, 2.0, 2.0, 10, 0.01, 200.0, &s).unwrap();
        assert_eq!(same.rel_error, 0.0);
    }

    #[test]
    fn plateau_of_exact_power() {
        let xs: Vec<f64> = (0..24).map(|i| 2f64.powf(i as f64 / 3.0)).collect();
        let u: Vec<f64> = xs.iter().map(|x| (5.0 * x.powf(-1.5)).min(1.0)).collect();
        let est = TailEstimate::from_values(&xs, &u, 10_000_000);
        let p = estimate_plateau_constant(
            &est,
            1.5,
            TailKind::Power,
            &WindowPolicy::for_kind(TailKind::Power),
        )
        .unwrap();
        assert!((p.constant - 5.0).abs() < 1e-3 && p.cv < 1e-3);
        assert!(p.xs.len() >= 4);
    }
}
