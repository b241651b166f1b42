//! Fixed-point solver for the integral equation satisfied by `u(x) = P(M ≥ x)`:
//!
//! `u(x) = P(S_e ≥ x) + E[1_{S_e<x} (m u(x−ξ_e) − G(u(x−ξ_e)))]`
//!
//! where `e ~ Exp(1)` is the first branching time and `S_e` the running
//! supremum up to it. Expectations are taken under an empirical kernel of
//! `(ξ_e, S_e)` draws.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{check_grid, MonotoneCurve, TailModel};
use crate::error::{Error, Result};
use crate::offspring::OffspringDist;
use crate::rng::{run_batched, Streams};
use crate::stable::StableParams;

/// Pairs per parallel chunk in kernel sweeps.
const PAIR_CHUNK: usize = 16_384;
const DRAW_BATCH: u64 = 8_192;

/// Empirical joint law of `(ξ_e, S_e)`, sorted by `S_e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairKernel {
    pub pairs: Vec<(f64, f64)>,
    pub step: f64,
    pub n: usize,
}

impl PairKernel {
    pub fn from_pairs(mut pairs: Vec<(f64, f64)>, step: f64) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InsufficientData("empty kernel".into()));
        }
        if let Some(p) = pairs.iter().find(|(xi, s)| !(*s >= 0.0 && *s >= *xi)) {
            return Err(Error::Domain(format!(
                "kernel pair {p:?} violates s_e >= max(0, xi_e)"
            )));
        }
        pairs.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
        let n = pairs.len();
        Ok(Self { pairs, step, n })
    }

    /// `P̂(S_e ≥ x)`.
    pub fn sup_tail(&self, x: f64) -> f64 {
        let below = self.pairs.partition_point(|p| p.1 < x);
        (self.n - below) as f64 / self.n as f64
    }
}

/// Draws `n` pairs with `Exp(1)` horizons on a skeleton of step `step`.
pub fn build_kernel(
    motion: &StableParams,
    step: f64,
    n: usize,
    streams: &Streams,
) -> Result<PairKernel> {
    if n < 10_000 {
        return Err(Error::Domain(format!(
            "a kernel needs at least 10^4 pairs, got {n}"
        )));
    }
    if !(step > 0.0) {
        return Err(Error::Domain(format!("step = {step} must be positive")));
    }
    let sampler = motion.sampler();
    let pairs = run_batched(
        &streams.domain("kernel"),
        n as u64,
        DRAW_BATCH,
        |rng, range| {
            range
                .map(|_| sampler.sample_exp_pair(step, rng))
                .collect::<Vec<_>>()
        },
        |mut a, b| {
            a.extend(b);
            a
        },
    )
    .unwrap_or_default();
    PairKernel::from_pairs(pairs, step)
}

/// Per-grid-point kernel averages of `g(u(x − ξ_e))` over pairs with `S_e < x`.
pub(crate) fn kernel_average<F>(
    kernel: &PairKernel,
    u: &MonotoneCurve,
    xs: &[f64],
    g: F,
) -> Vec<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    let k = xs.len();
    let partial: Vec<Vec<f64>> = kernel
        .pairs
        .par_chunks(PAIR_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; k];
            for &(xi, s) in chunk {
                let first = xs.partition_point(|&x| x <= s);
                let mut cursor = 0;
                for (j, &x) in xs.iter().enumerate().skip(first) {
                    acc[j] += g(u.eval_from(x - xi, &mut cursor));
                }
            }
            acc
        })
        .collect();
    let mut out = vec![0.0; k];
    for acc in partial {
        for (o, a) in out.iter_mut().zip(acc) {
            *o += a;
        }
    }
    let n = kernel.n as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// One application of the map `T` on the grid.
pub fn apply_t(kernel: &PairKernel, dist: &OffspringDist, u: &MonotoneCurve) -> Vec<f64> {
    let m = dist.m;
    let inner = kernel_average(kernel, u, &u.xs, |v| {
        let v = v.clamp(0.0, 1.0);
        m * v - dist.g_unchecked(v)
    });
    u.xs.iter()
        .zip(inner)
        .map(|(&x, e)| {
            if x <= 0.0 {
                1.0
            } else {
                (kernel.sup_tail(x) + e).clamp(0.0, 1.0)
            }
        })
        .collect()
}

/// `sup_x |u(x) − T(u)(x)|` over the grid.
pub fn residual(kernel: &PairKernel, dist: &OffspringDist, u: &MonotoneCurve) -> f64 {
    apply_t(kernel, dist, u)
        .iter()
        .zip(&u.ys)
        .map(|(t, v)| (t - v).abs())
        .fold(0.0, f64::max)
}

/// Iteration settings for [`solve_u`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Right extension beyond the grid.
    pub tail: TailModel,
}

impl SolveOptions {
    /// Defaults for a regime: damping 0.25 when critical, 0.5 otherwise.
    pub fn for_regime(critical: bool, tail: TailModel) -> Self {
        Self {
            damping: if critical { 0.25 } else { 0.5 },
            tol: 1e-7,
            max_iter: 5000,
            tail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub xs: Vec<f64>,
    pub u_grid: Vec<f64>,
    pub residual_sup: f64,
    pub iterations: usize,
    pub converged: bool,
    pub tail: TailModel,
}

impl SolveReport {
    pub fn curve(&self) -> MonotoneCurve {
        MonotoneCurve {
            xs: self.xs.clone(),
            ys: self.u_grid.clone(),
            left: 1.0,
            tail: self.tail,
        }
    }
}

/// Damped iteration `u ← (1−d)u + d T(u)` from `initial` (default `u ≡ 1`).
pub fn solve_u(
    kernel: &PairKernel,
    dist: &OffspringDist,
    grid: &[f64],
    options: &SolveOptions,
    initial: Option<&[f64]>,
) -> Result<SolveReport> {
    check_grid(grid)?;
    if dist.m > 1.0 + 1e-12 {
        return Err(Error::Supercritical(dist.m));
    }
    if grid[0] > 0.0 {
        return Err(Error::Domain("the grid must start at or below 0".into()));
    }
    if !(options.damping > 0.0 && options.damping <= 1.0) {
        return Err(Error::Domain(format!(
            "damping = {} must lie in (0, 1]",
            options.damping
        )));
    }
    let ys = match initial {
        Some(v) if v.len() == grid.len() => v.to_vec(),
        Some(v) => {
            return Err(Error::Domain(format!(
                "initial guess has {} values for {} points",
                v.len(),
                grid.len()
            )))
        }
        None => vec![1.0; grid.len()],
    };
    let mut u = MonotoneCurve::new(grid.to_vec(), ys, 1.0, options.tail)?;
    pin_and_clamp(&mut u);

    let mut res = f64::INFINITY;
    let mut iterations = 0;
    while iterations < options.max_iter {
        let t = apply_t(kernel, dist, &u);
        res = t
            .iter()
            .zip(&u.ys)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if res < options.tol {
            break;
        }
        for (y, t) in u.ys.iter_mut().zip(&t) {
            *y = (1.0 - options.damping) * *y + options.damping * t;
        }
        pin_and_clamp(&mut u);
        iterations += 1;
    }
    let converged = res < options.tol;
    if !converged {
        log::warn!(
            "integral equation: no convergence after {iterations} sweeps (residual {res:.3e})"
        );
    }
    Ok(SolveReport {
        xs: u.xs,
        u_grid: u.ys,
        residual_sup: res,
        iterations,
        converged,
        tail: options.tail,
    })
}

fn pin_and_clamp(u: &mut MonotoneCurve) {
    for (y, &x) in u.ys.iter_mut().zip(&u.xs) {
        *y = if x <= 0.0 { 1.0 } else { y.clamp(0.0, 1.0) };
    }
    u.make_nonincreasing();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offspring::make_explicit;
    use crate::rng::Streams;
    use rand::RngExt;

    fn toy_kernel() -> PairKernel {
        let mut rng = Streams::new(1).rng(0);
        let pairs = (0..100)
            .map(|_| {
                let xi: f64 = rng.random::<f64>() * 4.0 - 2.0;
                let s = xi.max(0.0) + rng.random::<f64>();
                (xi, s)
            })
            .collect();
        PairKernel::from_pairs(pairs, 0.1).unwrap()
    }

    #[test]
    fn kernel_pairs_are_ordered_and_valid() {
        let m = StableParams::new(1.5, 1.0, 1.0, 0.0).unwrap();
        let k = build_kernel(&m, 0.05, 20_000, &Streams::new(2)).unwrap();
        assert_eq!(k.n, 20_000);
        assert!(k.pairs.iter().all(|&(xi, s)| s >= xi && s >= 0.0));
        assert!(k.pairs.windows(2).all(|w| w[0].1 <= w[1].1));
        let mean = k.pairs.iter().map(|p| p.0).sum::<f64>() / k.n as f64;
        // symmetric law: the mean endpoint is centred, within a generous multiple of its spread
        let sd = (k.pairs.iter().map(|p| p.0 * p.0).sum::<f64>() / k.n as f64).sqrt();
        assert!(mean.abs() < 5.0 * sd / (k.n as f64).sqrt());
        assert!(build_kernel(&m, 0.05, 100, &Streams::new(2)).is_err());
        assert!(PairKernel::from_pairs(vec![(1.0, 0.5)], 0.1).is_err());
    }

    #[test]
    fn residual_of_constant_one_by_hand() {
        let k = toy_kernel();
        let d = make_explicit(&[0.3, 0.2, 0.5]).unwrap();
        let xs = vec![0.0, 0.5, 1.0, 2.0, 3.0];
        let one = MonotoneCurve::new(xs.clone(), vec![1.0; 5], 1.0, TailModel::Flat).unwrap();
        let g1 = d.big_g(1.0).unwrap();
        let expected = xs
            .iter()
            .map(|&x| {
                if x <= 0.0 {
                    return 0.0;
                }
                let below = k.pairs.iter().filter(|p| p.1 < x).count() as f64 / 100.0;
                (1.0 - ((1.0 - below) + d.m * below - below * g1)).abs()
            })
            .fold(0.0, f64::max);
        assert!((residual(&k, &d, &one) - expected).abs() < 1e-14);
    }

    #[test]
    fn solver_converges_and_pins_left_boundary() {
        let motion = StableParams::new(1.2, 1.0, 0.0, 0.0).unwrap();
        let k = build_kernel(&motion, 0.05, 20_000, &Streams::new(3)).unwrap();
        let d = make_explicit(&[0.6, 0.0, 0.4]).unwrap();
        let grid: Vec<f64> = (0..=20).map(|i| -1.0 + i as f64).collect();
        let opts = SolveOptions::for_regime(false, TailModel::Power { exponent: 1.2 });
        let rep = solve_u(&k, &d, &grid, &opts, None).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.u_grid[0], 1.0);
        assert_eq!(rep.u_grid[1], 1.0);
        assert!(rep.u_grid.windows(2).all(|w| w[1] <= w[0]));
        let curve = rep.curve();
        assert!(residual(&k, &d, &curve) < opts.tol);
        let mut bumped = curve.clone();
        bumped.ys[8] += 0.01;
        assert!(residual(&k, &d, &bumped) > residual(&k, &d, &curve));
        let sup = make_explicit(&[0.1, 0.0, 0.9]).unwrap();
        assert!(matches!(
            solve_u(&k, &sup, &grid, &opts, None),
            Err(Error::Supercritical(_))
        ));
    }

    #[test]
    fn sweep_is_worker_count_invariant() {
        let motion = StableParams::new(1.2, 1.0, 0.0, 0.0).unwrap();
        let k = build_kernel(&motion, 0.1, 50_000, &Streams::new(4)).unwrap();
        let d = make_explicit(&[0.6, 0.0, 0.4]).unwrap();
        let u = MonotoneCurve::new(
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.5, 0.1],
            1.0,
            TailModel::Flat,
        )
        .unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| apply_t(&k, &d, &u))
        };
        assert_eq!(run(1), run(3));
    }
}
