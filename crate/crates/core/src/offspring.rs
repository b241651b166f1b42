//! Offspring laws and their generating-function functionals.
//!
//! `G(x) = Σ p_k (1−x)^k − 1 + m x`, `f(u) = G(u)/u`, and the constant
//! `C₂(γ)` with `G(u) ~ C₂ u^γ` as `u → 0`.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{gamma, upper_gamma, zeta, zeta_tail, KahanSum, BERNOULLI_EVEN};
use crate::stable::open01;

/// How the probabilities are specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OffspringSpec {
    Explicit(Vec<f64>),
    /// `p_n = κ(n^{−γ} − (n+1)^{−γ})` for `n ≥ 2`, with `p₀, p₁` solved from the mean.
    HeavyTail {
        gamma: f64,
        kappa: f64,
        p0: f64,
        p1: f64,
    },
}

/// An offspring law with its derived constants.
#[derive(Debug, Clone)]
pub struct OffspringDist {
    pub spec: OffspringSpec,
    pub m: f64,
    /// `+∞` for the heavy-tail family.
    pub sigma2: f64,
    pub gamma: f64,
    pub kappa: Option<f64>,
    pub c2: f64,
    pub llogl: bool,
    sampler: Sampler,
}

#[derive(Debug, Clone)]
enum Sampler {
    Table {
        all: WeightedIndex<f64>,
        not_one: Option<WeightedIndex<f64>>,
    },
    Tail,
}

const SUM_TOL: f64 = 1e-9;

/// Explicit finite law `(p₀, p₁, ..., p_K)`.
pub fn make_explicit(p: &[f64]) -> Result<OffspringDist> {
    if p.is_empty() {
        return Err(Error::InvalidOffspring("empty probability vector".into()));
    }
    if let Some(k) = p.iter().position(|&q| !(q >= 0.0) || !q.is_finite()) {
        return Err(Error::InvalidOffspring(format!(
            "p[{k}] = {} is not a probability",
            p[k]
        )));
    }
    let total: f64 = p.iter().copied().collect::<KahanSum>().value();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidOffspring(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    let m: f64 = p
        .iter()
        .enumerate()
        .map(|(k, &q)| k as f64 * q)
        .collect::<KahanSum>()
        .value();
    let m2: f64 = p
        .iter()
        .enumerate()
        .map(|(k, &q)| (k * k) as f64 * q)
        .collect::<KahanSum>()
        .value();
    let sigma2 = (m2 - m * m).max(0.0);
    let all = WeightedIndex::new(p.iter().copied())
        .map_err(|e| Error::InvalidOffspring(format!("cannot build sampler: {e}")))?;
    let not_one = WeightedIndex::new(
        p.iter()
            .enumerate()
            .map(|(k, &q)| if k == 1 { 0.0 } else { q }),
    )
    .ok();
    Ok(OffspringDist {
        spec: OffspringSpec::Explicit(p.to_vec()),
        m,
        sigma2,
        gamma: 2.0,
        kappa: None,
        c2: sigma2 / 2.0,
        llogl: true,
        sampler: Sampler::Table { all, not_one },
    })
}

/// Heavy-tail family with `n^γ Σ_{k≥n} p_k = κ` for every `n ≥ 2`.
pub fn make_heavy_tail(gamma_: f64, kappa: f64, m_target: f64) -> Result<OffspringDist> {
    if !(gamma_ > 1.0 && gamma_ < 2.0) {
        return Err(Error::InvalidOffspring(format!(
            "gamma = {gamma_} must lie in (1, 2)"
        )));
    }
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidOffspring(format!(
            "kappa = {kappa} must be positive"
        )));
    }
    if !(m_target > 0.0 && m_target <= 1.0) {
        return Err(Error::InvalidOffspring(format!(
            "m = {m_target} must lie in (0, 1]"
        )));
    }
    let t2 = kappa * 2f64.powf(-gamma_);
    let mean_ge2 = kappa * (2f64.powf(-gamma_) + zeta(gamma_) - 1.0);
    let p1 = m_target - mean_ge2;
    if !(0.0..=1.0).contains(&p1) {
        return Err(Error::Infeasible {
            quantity: "p1",
            value: p1,
        });
    }
    let p0 = 1.0 - p1 - t2;
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::Infeasible {
            quantity: "p0",
            value: p0,
        });
    }
    Ok(OffspringDist {
        spec: OffspringSpec::HeavyTail {
            gamma: gamma_,
            kappa,
            p0,
            p1,
        },
        m: m_target,
        sigma2: f64::INFINITY,
        gamma: gamma_,
        kappa: Some(kappa),
        c2: gamma(2.0 - gamma_) * kappa / (gamma_ - 1.0),
        llogl: true,
        sampler: Sampler::Tail,
    })
}

/// `h_k(x) = (1−x)^k − 1 + kx`, accurate for small `kx`.
fn h_k(k: usize, x: f64) -> f64 {
    if k < 2 {
        return 0.0;
    }
    let kf = k as f64;
    if kf * x >= 0.5 {
        return (kf * x.ln_1p_neg()).exp() - 1.0 + kf * x;
    }
    // Σ_{j≥2} C(k, j) (−x)^j
    let mut term = kf * (kf - 1.0) / 2.0 * x * x;
    let mut sum = term;
    for j in 2..k {
        term *= -(kf - j as f64) / (j as f64 + 1.0) * x;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

trait Ln1pNeg {
    fn ln_1p_neg(self) -> f64;
}

impl Ln1pNeg for f64 {
    /// `ln(1 − x)`.
    fn ln_1p_neg(self) -> f64 {
        (-self).ln_1p()
    }
}

/// Terms summed directly before the Euler–Maclaurin tail.
const EM_START: usize = 32;

/// `S(μ) = Σ_{n≥2} n^{−γ}(1 − e^{−μ(n−1)})`, so that `G(x) = xκ S(−ln(1−x))`.
fn heavy_series(g: f64, mu: f64) -> f64 {
    if mu > 40.0 {
        return zeta(g) - 1.0 - 2f64.powf(-g) * (-mu).exp();
    }
    let mut acc = KahanSum::new();
    for n in 2..EM_START {
        let nf = n as f64;
        acc.add(nf.powf(-g) * -(-mu * (nf - 1.0)).exp_m1());
    }
    let n0 = EM_START as f64;
    // ∫_N^∞ n^{−γ}(1 − e^{−μ(n−1)}) dn = J − (e^μ − 1) K
    let z = mu * n0;
    let k_int = mu.powf(g - 1.0) * upper_gamma(1.0 - g, z);
    let j_int = if z < 1.0 {
        let mut series = 0.0;
        let mut zk = z; // z^k / k!
        for k in 1..200 {
            let kf = k as f64;
            if k > 1 {
                zk *= z / kf;
            }
            let term = zk * z.powf(1.0 - g) / (kf + 1.0 - g);
            series += if k % 2 == 1 { term } else { -term };
            if term < 1e-18 * series.abs() {
                break;
            }
        }
        mu.powf(g - 1.0) * (gamma(2.0 - g) / (g - 1.0) - series)
    } else {
        n0.powf(1.0 - g) / (g - 1.0) - k_int
    };
    acc.add(j_int - mu.exp_m1() * k_int);

    // g(N)/2 − Σ B_{2j}/(2j)! g^{(2j−1)}(N)
    let damp = -(-mu * (n0 - 1.0)).exp_m1();
    let e = (-mu * (n0 - 1.0)).exp();
    acc.add(0.5 * n0.powf(-g) * damp);
    // derivatives of n^{−γ} at N: D^j = (−1)^j γ(γ+1)...(γ+j−1) N^{−γ−j}
    let max_order = 2 * BERNOULLI_EVEN.len();
    let mut d = Vec::with_capacity(max_order);
    let mut v = n0.powf(-g);
    d.push(v);
    for j in 0..max_order {
        v *= -(g + j as f64) / n0;
        d.push(v);
    }
    let mut fact = 2.0;
    for (i, b) in BERNOULLI_EVEN.iter().enumerate() {
        let order = 2 * i + 1;
        // Leibniz: D^order[n^{−γ}(1 − e^{−μ(n−1)})]
        let mut deriv = d[order] * damp;
        for (j, dj) in d.iter().enumerate().take(order) {
            deriv -= binom_coeff(order, j) * dj * (-mu).powi((order - j) as i32) * e;
        }
        let term = b / fact * deriv;
        acc.add(-term);
        if term.abs() < 1e-20 {
            break;
        }
        fact *= (order + 2) as f64 * (order + 3) as f64;
    }
    acc.value()
}

fn binom_coeff(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl OffspringDist {
    /// `p_k`, for any `k`.
    pub fn prob(&self, k: usize) -> f64 {
        match &self.spec {
            OffspringSpec::Explicit(p) => p.get(k).copied().unwrap_or(0.0),
            OffspringSpec::HeavyTail {
                gamma,
                kappa,
                p0,
                p1,
            } => match k {
                0 => *p0,
                1 => *p1,
                _ => kappa * ((k as f64).powf(-gamma) - (k as f64 + 1.0).powf(-gamma)),
            },
        }
    }

    /// `P(K ≥ n)`.
    pub fn tail_mass(&self, n: usize) -> f64 {
        match &self.spec {
            OffspringSpec::Explicit(p) => p.iter().skip(n).copied().collect::<KahanSum>().value(),
            OffspringSpec::HeavyTail {
                gamma, kappa, p0, ..
            } => match n {
                0 => 1.0,
                1 => 1.0 - p0,
                _ => kappa * (n as f64).powf(-gamma),
            },
        }
    }

    pub fn is_critical(&self) -> bool {
        (self.m - 1.0).abs() < 1e-12
    }

    pub fn is_subcritical(&self) -> bool {
        self.m < 1.0 - 1e-12
    }

    /// Offspring count is always one: `G ≡ 0`.
    pub fn is_no_branching(&self) -> bool {
        self.prob(1) >= 1.0 - 1e-15
    }

    /// Whether the critical-regime hypothesis holds with a usable `C₂ > 0`.
    pub fn has_attraction_data(&self) -> bool {
        self.c2 > 0.0 && self.c2.is_finite()
    }

    /// `G(x) = Σ p_k (1−x)^k − 1 + m x` on `[0, 1]`.
    pub fn big_g(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("G needs x in [0, 1], got {x}")));
        }
        Ok(self.g_unchecked(x))
    }

    /// `G` without the domain check, clamping `x` into `[0, 1]`.
    #[inline]
    pub fn g_unchecked(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        if x == 0.0 {
            return 0.0;
        }
        match &self.spec {
            OffspringSpec::Explicit(p) => p
                .iter()
                .enumerate()
                .skip(2)
                .filter(|(_, &q)| q > 0.0)
                .map(|(k, &q)| q * h_k(k, x))
                .collect::<KahanSum>()
                .value(),
            OffspringSpec::HeavyTail { gamma, kappa, .. } => {
                if x == 1.0 {
                    return kappa * (zeta(*gamma) - 1.0);
                }
                x * kappa * heavy_series(*gamma, -x.ln_1p_neg())
            }
        }
    }

    /// `f(u) = G(u)/u` on `(0, 1]`.
    pub fn f(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::Domain(format!("f needs u in (0, 1], got {u}")));
        }
        Ok(self.g_unchecked(u) / u)
    }

    /// Subcritical killing rate beyond the linear part `1 − m`.
    ///
    /// Equal to `G(u)/u`: the generator identity `Au = (1−m)u + G(u)` splits
    /// the killing into `(1 − m) + f_sub(u)`.
    pub fn f_sub(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::Domain(format!("f_sub needs u in (0, 1], got {u}")));
        }
        Ok(self.g_unchecked(u) / u)
    }

    /// `f` extended by its limit 0 at `u = 0`.
    #[inline]
    pub fn f_or_zero(&self, u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else {
            self.g_unchecked(u) / u.min(1.0)
        }
    }

    /// Partial sums of `Σ_{n≥1} f_sub(e^{−cn})` for `n = 1..=n_max`.
    pub fn llogl_series(&self, c: f64, n_max: usize) -> Result<Vec<f64>> {
        if !(c > 0.0) {
            return Err(Error::Domain(format!("llogl_series needs c > 0, got {c}")));
        }
        let mut acc = KahanSum::new();
        let mut out = Vec::with_capacity(n_max);
        for n in 1..=n_max {
            let u = (-c * n as f64).exp();
            if u > 0.0 {
                acc.add(self.g_unchecked(u) / u);
            }
            out.push(acc.value());
        }
        Ok(out)
    }

    /// Largest `δ` on a fine logarithmic grid such that
    /// `(1−ε)C₂ ≤ G(u)/u^γ ≤ (1+ε)C₂` holds at every grid point `u ≤ δ`.
    pub fn attraction_delta(&self, eps: f64) -> Option<f64> {
        if !self.has_attraction_data() {
            return None;
        }
        let mut best = None;
        for i in 0..=320 {
            let u = 10f64.powf(-16.0 + i as f64 * 0.05);
            if u > 1.0 {
                break;
            }
            let r = self.g_unchecked(u) / u.powf(self.gamma) / self.c2;
            if (r - 1.0).abs() > eps {
                break;
            }
            best = Some(u);
        }
        best
    }

    /// Largest `δ` with `G(u) ≤ ε u` for all `u ≤ δ` (`f` is nondecreasing).
    pub fn linear_delta(&self, eps: f64) -> f64 {
        if self.f_or_zero(1.0) <= eps {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.f_or_zero(mid) <= eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// One offspring count.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match (&self.sampler, &self.spec) {
            (Sampler::Table { all, .. }, _) => all.sample(rng) as u64,
            (
                Sampler::Tail,
                OffspringSpec::HeavyTail {
                    gamma, kappa, p0, ..
                },
            ) => {
                let u = open01(rng);
                tail_inverse(*gamma, *kappa, u).unwrap_or(if u < 1.0 - p0 { 1 } else { 0 })
            }
            _ => unreachable!("sampler and spec always agree"),
        }
    }

    /// One offspring count conditioned on `K ≠ 1`; `None` when `p₁ = 1`.
    #[inline]
    pub fn sample_not_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<u64> {
        match (&self.sampler, &self.spec) {
            (Sampler::Table { not_one, .. }, _) => not_one.as_ref().map(|w| w.sample(rng) as u64),
            (
                Sampler::Tail,
                OffspringSpec::HeavyTail {
                    gamma, kappa, p0, ..
                },
            ) => {
                let t2 = kappa * 2f64.powf(-gamma);
                let u = open01(rng) * (t2 + p0);
                Some(tail_inverse(*gamma, *kappa, u).unwrap_or(0))
            }
            _ => unreachable!("sampler and spec always agree"),
        }
    }
}

/// `max{n ≥ 2 : u < κ n^{−γ}}`, or `None` when `u ≥ κ 2^{−γ}`.
#[inline]
fn tail_inverse(g: f64, kappa: f64, u: f64) -> Option<u64> {
    if u >= kappa * 2f64.powf(-g) {
        return None;
    }
    let n = (kappa / u).powf(1.0 / g).floor();
    if n >= 1.8e19 {
        return Some(u64::MAX);
    }
    let mut n = (n as u64).max(2);
    // guard the floor against rounding at integer boundaries
    if u >= kappa * (n as f64).powf(-g) && n > 2 {
        n -= 1;
    } else if u < kappa * ((n + 1) as f64).powf(-g) {
        n += 1;
    }
    Some(n)
}

/// `Σ_{n ≥ n0} n^{−γ}`; re-exported for tests that need an independent tail sum.
pub fn power_tail_sum(g: f64, n0: f64) -> f64 {
    zeta_tail(g, n0)
}
