//! Special functions and compensated summation.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
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

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// log Σ exp(x_i) with a max shift; `-inf` for an empty input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: NeumaierSum = xs.iter().map(|x| (x - m).exp()).collect();
    m + s.value().ln()
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at each step
        match acc.checked_mul((n - i) as u128) {
            Some(v) => acc = v / (i as u128 + 1),
            None => return u128::MAX,
        }
    }
    acc
}

pub fn factorial(n: u64) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

// B_{2j} for j = 1..8
const BERNOULLI_EVEN: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Riemann zeta by Euler–Maclaurin summation; valid for real `s != 1`, s > -14.
pub fn zeta(s: f64) -> f64 {
    assert!(s != 1.0, "zeta has a pole at s = 1");
    let n = 40usize;
    let nf = n as f64;
    let mut acc: NeumaierSum = (1..n).map(|k| (k as f64).powf(-s)).collect();
    acc.add(nf.powf(1.0 - s) / (s - 1.0));
    acc.add(0.5 * nf.powf(-s));
    // rising factorial s(s+1)...(s+2j-2) divided by (2j)!
    let mut rising = s;
    let mut fact = 2.0;
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let p = 2 * j + 1;
        acc.add(b / fact * rising * nf.powf(-s - p as f64));
        rising *= (s + p as f64) * (s + p as f64 + 1.0);
        fact *= ((p + 2) * (p + 3)) as f64;
    }
    acc.value()
}

/// Riemann zeta via Borwein's acceleration of the alternating eta series,
/// ζ(s) = η(s)/(1 − 2^{1−s}); valid for real s > 0, s ≠ 1.
pub fn zeta_alternating(s: f64) -> f64 {
    assert!(s > 0.0 && s != 1.0);
    let n = 40usize;
    let nf = n as f64;
    let mut d = Vec::with_capacity(n + 1);
    let mut term = 1.0 / nf;
    let mut partial = 0.0;
    for i in 0..=n {
        partial += term;
        d.push(nf * partial);
        let fi = i as f64;
        term *= 4.0 * (nf + fi) * (nf - fi) / ((2.0 * fi + 1.0) * (2.0 * fi + 2.0));
    }
    let dn = d[n];
    let mut acc = NeumaierSum::new();
    for (k, dk) in d.iter().take(n).enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc.add(sign * (dk - dn) / ((k + 1) as f64).powf(s));
    }
    let eta = -acc.value() / dn;
    eta / (1.0 - 2f64.powf(1.0 - s))
}

/// Σ_{n≥1} n^{−s} e^{−n a} for a > 0, s ≥ 0, together with a bound on the
/// omitted tail. Terms are added until the tail bound is below `rel_tol`
/// times the partial sum.
pub fn polylog_exp(s: f64, a: f64, rel_tol: f64) -> (f64, f64) {
    debug_assert!(a > 0.0 && s >= 0.0);
    let q = (-a).exp();
    let geo = -(-a).exp_m1();
    let mut acc = NeumaierSum::new();
    let mut n = 1u64;
    loop {
        let nf = n as f64;
        acc.add(nf.powf(-s) * (-nf * a).exp());
        // Σ_{m>n} m^{-s} e^{-ma} ≤ (n+1)^{-s} e^{-(n+1)a} / (1 - e^{-a})
        let tail = (nf + 1.0).powf(-s) * (-(nf + 1.0) * a).exp() / geo;
        let v = acc.value();
        if tail <= rel_tol * v || tail < f64::MIN_POSITIVE {
            return (v, tail);
        }
        n += 1;
        if q == 1.0 {
            return (v, f64::INFINITY);
        }
    }
}

/// Modified Bessel function K₀(x) = ∫₀^∞ e^{−x cosh u} du, x > 0, by the
/// trapezoid rule (doubly exponential decay makes it spectrally accurate).
pub fn bessel_k0(x: f64) -> f64 {
    assert!(x > 0.0);
    let h = 0.02;
    // integrand below e^{-745} once x cosh u exceeds 745
    let u_max = (745.0 / x).max(1.0).acosh() + h;
    let n = (u_max / h).ceil() as usize;
    let mut acc = NeumaierSum::new();
    acc.add(0.5 * (-x).exp());
    for i in 1..=n {
        let u = i as f64 * h;
        acc.add((-x * u.cosh()).exp());
    }
    h * acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_even_values_match_bernoulli_closed_forms() {
        let pi = std::f64::consts::PI;
        assert!((zeta(2.0) - pi * pi / 6.0).abs() < 1e-14);
        assert!((zeta(4.0) - pi.powi(4) / 90.0).abs() < 1e-14);
    }

    #[test]
    fn zeta_routes_agree() {
        for s in [0.5, 1.5, 2.5, 3.0, 0.25] {
            let a = zeta(s);
            let b = zeta_alternating(s);
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0), "s={s}: {a} vs {b}");
        }
        assert!((zeta(0.5) + 1.4603545).abs() < 1e-7);
    }

    #[test]
    fn k0_matches_series_near_origin() {
        // K0(x) = -(ln(x/2) + γ) I0(x) + (x²/4)(1 - ...) ; two-term check at small x
        let x: f64 = 1e-3;
        let gamma = 0.5772156649015329;
        let approx = -((x / 2.0).ln() + gamma) * (1.0 + x * x / 4.0) + x * x / 4.0;
        assert!((bessel_k0(x) - approx).abs() < 1e-10);
    }

    #[test]
    fn k0_large_argument_asymptotics() {
        let x: f64 = 30.0;
        let asym = (std::f64::consts::PI / (2.0 * x)).sqrt()
            * (-x).exp()
            * (1.0 - 1.0 / (8.0 * x) + 9.0 / (128.0 * x * x) - 225.0 / (3072.0 * x.powi(3)));
        assert!((bessel_k0(x) / asym - 1.0).abs() < 1e-5);
    }

    #[test]
    fn polylog_tail_is_bound() {
        let (v, tail) = polylog_exp(1.5, 0.01, 1e-14);
        let (v2, _) = polylog_exp(1.5, 0.01, 1e-18);
        assert!((v2 - v).abs() <= tail * 1.0000001 + 1e-16 * v);
    }

    #[test]
    fn binomial_small() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(63, 3), 39711);
        assert_eq!(binomial(3, 5), 0);
    }
}
