//! Special functions not covered by `statrs`: the upper incomplete gamma
//! function for non-positive parameters, Riemann zeta via Euler–Maclaurin,
//! and compensated summation.

pub use statrs::function::gamma::gamma;

/// Even-index Bernoulli numbers B_2, B_4, ..., B_16.
pub(crate) const BERNOULLI_EVEN: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Riemann zeta function for real `s != 1`, by Euler–Maclaurin summation.
pub fn zeta(s: f64) -> f64 {
    assert!(s != 1.0, "zeta has a pole at s = 1");
    const N: usize = 12;
    let mut acc = KahanSum::new();
    for n in 1..N {
        acc.add((n as f64).powf(-s));
    }
    acc.add(zeta_tail(s, N as f64));
    acc.value()
}

/// Euler–Maclaurin approximation of `sum_{n >= n0} n^{-s}` (with `n0` not small).
pub fn zeta_tail(s: f64, n0: f64) -> f64 {
    let mut total = n0.powf(1.0 - s) / (s - 1.0) + 0.5 * n0.powf(-s);
    // rising factorial s (s+1) ... (s + 2j - 2) and the matching power of n0
    let mut rising = s;
    let mut fact = 2.0;
    let mut power = n0.powf(-s - 1.0);
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = b / fact * rising * power;
        total += term;
        if term.abs() < 1e-18 * total.abs() {
            break;
        }
        let k = 2.0 * (j as f64 + 1.0);
        rising *= (s + k - 1.0) * (s + k);
        fact *= (k + 1.0) * (k + 2.0);
        power /= n0 * n0;
    }
    total
}

/// Upper incomplete gamma function `Γ(a, z) = ∫_z^∞ t^{a-1} e^{-t} dt`
/// for real `a` and `z > 0` (any sign of `a`).
pub fn upper_gamma(a: f64, z: f64) -> f64 {
    assert!(z > 0.0, "upper_gamma requires z > 0");
    if z >= 1.0 && z >= a + 1.0 {
        return upper_gamma_cf(a, z);
    }
    if a > 0.0 {
        return gamma(a) - lower_gamma_series(a, z);
    }
    if a == 0.0 {
        return exp_integral_e1(z);
    }
    // Γ(a, z) = (Γ(a + 1, z) - z^a e^{-z}) / a
    (upper_gamma(a + 1.0, z) - (a * z.ln() - z).exp()) / a
}

/// Lower incomplete gamma `γ(a, z)` for `a > 0`, power series.
fn lower_gamma_series(a: f64, z: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..500 {
        ap += 1.0;
        del *= z / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum * (a * z.ln() - z).exp()
}

/// Continued fraction for `Γ(a, z)`, modified Lentz.
fn upper_gamma_cf(a: f64, z: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = z + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (a * z.ln() - z).exp() * h
}

/// Exponential integral `E_1(z)` for `z > 0`.
fn exp_integral_e1(z: f64) -> f64 {
    if z >= 1.0 {
        return upper_gamma_cf(0.0, z);
    }
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        term *= -z / k as f64;
        let add = term / k as f64;
        sum += add;
        if add.abs() < 1e-18 {
            break;
        }
    }
    -EULER_GAMMA - z.ln() - sum
}
