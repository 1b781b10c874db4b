//! Entry sequences of the Jacobi model, smooth cut-offs, truncated and
//! linearized entries, the predictor `l_n` and finite differences.
//!
//! Lattice indices are `i64`. All sequences indexed by `k` accept any integer
//! where that makes sense (the truncated entries live on the two-sided
//! lattice); the raw entries `d(k)`, `a(k)` need `k >= 1`.

use crate::error::{Error, Result};
use std::fmt::Write as _;

/// Entry model `d(k) = k + v(k)`, `a(k) = a1 k^γ + a1p k^(γ-1)` with an
/// `N`-periodic modulation `v`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ModelParams {
    pub gamma: f64,
    pub a1: f64,
    pub a1p: f64,
    /// One period `v(1), ..., v(N)`.
    pub v_table: Vec<f64>,
}

impl ModelParams {
    /// Validates `0 < γ <= 1/2`, `a1 >= 0`, `N >= 1` and finiteness.
    ///
    /// `a1 = 0` is accepted as the degenerate diagonal model.
    pub fn new(gamma: f64, a1: f64, a1p: f64, v_table: Vec<f64>) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 0.5) {
            return Err(Error::InvalidModel(format!("gamma={gamma} not in (0, 1/2]")));
        }
        if !(a1 >= 0.0) || !a1.is_finite() {
            return Err(Error::InvalidModel(format!("a1={a1} must be finite and >= 0")));
        }
        if !a1p.is_finite() {
            return Err(Error::InvalidModel(format!("a1p={a1p} not finite")));
        }
        if v_table.is_empty() {
            return Err(Error::InvalidModel("v table is empty".into()));
        }
        if v_table.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel("v table has non-finite entries".into()));
        }
        Ok(ModelParams { gamma, a1, a1p, v_table })
    }

    /// Jaynes-Cummings entries: `γ = 1/2`, `d(k) = k + (-1)^k ρ`, `a(k) = a1 √k`.
    pub fn jaynes_cummings(rho: f64, a1: f64) -> Result<Self> {
        Self::new(0.5, a1, 0.0, vec![-rho, rho])
    }

    /// Period `N` of the modulation.
    pub fn period(&self) -> usize {
        self.v_table.len()
    }

    /// Parses the `key=value` pairs of a model section.
    ///
    /// Keys: `gamma`, `a1`, `a1p` (optional, default 0), `v` (comma list).
    pub fn from_pairs<'a, I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let (mut gamma, mut a1, mut a1p, mut v) = (None, None, 0.0, None);
        for (key, value) in pairs {
            let num = |s: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|_| Error::Config(format!("model key `{key}`: cannot parse `{s}`")))
            };
            match key {
                "gamma" => gamma = Some(num(value)?),
                "a1" => a1 = Some(num(value)?),
                "a1p" => a1p = num(value)?,
                "v" => {
                    let list = value.split(',').map(num).collect::<Result<Vec<f64>>>()?;
                    v = Some(list);
                }
                other => return Err(Error::Config(format!("unknown model key `{other}`"))),
            }
        }
        let gamma = gamma.ok_or_else(|| Error::Config("model section needs `gamma`".into()))?;
        let a1 = a1.ok_or_else(|| Error::Config("model section needs `a1`".into()))?;
        let v = v.ok_or_else(|| Error::Config("model section needs `v`".into()))?;
        Self::new(gamma, a1, a1p, v).map_err(|e| Error::Config(e.to_string()))
    }

    /// Serializes to the `key=value` lines accepted by [`ModelParams::from_pairs`].
    pub fn to_config_lines(&self) -> String {
        let mut s = String::new();
        let v: Vec<String> = self.v_table.iter().map(|x| format!("{x}")).collect();
        let _ = writeln!(s, "gamma={}", self.gamma);
        let _ = writeln!(s, "a1={}", self.a1);
        let _ = writeln!(s, "a1p={}", self.a1p);
        let _ = writeln!(s, "v={}", v.join(","));
        s
    }
}

/// `v(k)`, extended periodically to all integers.
pub fn entry_v(k: i64, m: &ModelParams) -> f64 {
    let n = m.v_table.len() as i64;
    m.v_table[(k - 1).rem_euclid(n) as usize]
}

/// `d(k) = k + v(k)`.
pub fn entry_d(k: i64, m: &ModelParams) -> f64 {
    k as f64 + entry_v(k, m)
}

/// `a(k) = a1 k^γ + a1p k^(γ-1)` for `k >= 1`.
pub fn entry_a(k: i64, m: &ModelParams) -> f64 {
    debug_assert!(k >= 1, "a(k) needs k >= 1");
    let kf = k as f64;
    m.a1 * kf.powf(m.gamma) + m.a1p * kf.powf(m.gamma - 1.0)
}

/// `δa(k) = a(k+1) - a(k)`.
pub fn delta_a(k: i64, m: &ModelParams) -> f64 {
    entry_a(k + 1, m) - entry_a(k, m)
}

/// Small positive rational used for exact threshold tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: i64,
    pub den: i64,
}

impl Ratio {
    pub const fn new(num: i64, den: i64) -> Self {
        Ratio { num, den }
    }
    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Transition profile of the cut-off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothStep {
    /// `S(x) = f(x) / (f(x) + f(1-x))` with `f(x) = exp(-1/x)` for `x > 0`.
    ExpPartition,
}

/// The even bump `θ0`: 1 on `|t| <= inner`, 0 on `|t| >= outer`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSpec {
    pub inner: Ratio,
    pub outer: Ratio,
    pub transition: SmoothStep,
}

impl Default for CutoffSpec {
    fn default() -> Self {
        CutoffSpec { inner: Ratio::new(1, 6), outer: Ratio::new(1, 5), transition: SmoothStep::ExpPartition }
    }
}

fn exp_partition(x: f64) -> f64 {
    let f = |y: f64| if y > 0.0 { (-1.0 / y).exp() } else { 0.0 };
    let (a, b) = (f(x), f(1.0 - x));
    a / (a + b)
}

impl CutoffSpec {
    fn profile(&self, x: f64) -> f64 {
        match self.transition {
            SmoothStep::ExpPartition => exp_partition(x),
        }
    }

    /// `θ0(t)`.
    pub fn theta0(&self, t: f64) -> f64 {
        let a = t.abs();
        let (inner, outer) = (self.inner.to_f64(), self.outer.to_f64());
        if a <= inner {
            1.0
        } else if a >= outer {
            0.0
        } else {
            self.profile((outer - a) / (outer - inner))
        }
    }

    /// `θ_{τ,n}(s) = θ0((s - n)/τ)` for real arguments.
    pub fn theta(&self, tau: f64, center: f64, s: f64) -> f64 {
        self.theta0((s - center) / tau)
    }

    /// `θ0(dist / scale)` for integers, with the plateau and support
    /// thresholds decided exactly.
    pub fn theta_lattice(&self, dist: i64, scale: i64) -> f64 {
        debug_assert!(scale > 0);
        let d = (dist as i128).abs();
        let s = scale as i128;
        if d * self.inner.den as i128 <= self.inner.num as i128 * s {
            return 1.0;
        }
        if d * self.outer.den as i128 >= self.outer.num as i128 * s {
            return 0.0;
        }
        let (inner, outer) = (self.inner.to_f64(), self.outer.to_f64());
        let t = d as f64 / scale as f64;
        self.profile((outer - t) / (outer - inner))
    }
}

/// `θ_{n,n}(k)` on the lattice.
pub fn theta_nn(k: i64, n: i64) -> f64 {
    CutoffSpec::default().theta_lattice(k - n, n)
}

/// `θ_{2n,n}(k)` on the lattice.
pub fn theta_2n_n(k: i64, n: i64) -> f64 {
    CutoffSpec::default().theta_lattice(k - n, 2 * n)
}

/// Truncated, linearized off-diagonal `a_n(k) = (a(n) + (k-n)δa(n)) θ_{2n,n}(k)`.
pub fn entry_a_n(k: i64, n: i64, m: &ModelParams) -> f64 {
    let th = theta_2n_n(k, n);
    if th == 0.0 {
        return 0.0;
    }
    (entry_a(n, m) + (k - n) as f64 * delta_a(n, m)) * th
}

/// `v_n(k) = v(k) θ_{n,n}(k)^2`.
pub fn entry_v_n(k: i64, n: i64, m: &ModelParams) -> f64 {
    let th = theta_nn(k, n);
    if th == 0.0 {
        return 0.0;
    }
    entry_v(k, m) * th * th
}

/// `d_n(k) = k + v_n(k)`.
pub fn entry_d_n(k: i64, n: i64, m: &ModelParams) -> f64 {
    k as f64 + entry_v_n(k, n, m)
}

/// `a_{1,n}(k) = a_n(k-1)^2 - a_n(k)^2`.
pub fn a1n(k: i64, n: i64, m: &ModelParams) -> f64 {
    let (p, q) = (entry_a_n(k - 1, n, m), entry_a_n(k, n, m));
    p * p - q * q
}

/// `l_n(k) = k + a_{1,n}(k)`.
pub fn predictor_l_n(k: i64, n: i64, m: &ModelParams) -> f64 {
    k as f64 + a1n(k, n, m)
}

/// `l(n) = l_n(n)`.
pub fn predictor_l(n: i64, m: &ModelParams) -> f64 {
    predictor_l_n(n, n, m)
}

/// Smallest and largest `k` with `a_n(k) != 0`, if any.
pub fn support_a_n(n: i64, m: &ModelParams) -> Option<(i64, i64)> {
    let reach = (2 * n) / 5 + 1;
    let ks = (n - reach)..=(n + reach);
    let nz: Vec<i64> = ks.filter(|&k| entry_a_n(k, n, m) != 0.0).collect();
    Some((*nz.first()?, *nz.last()?))
}

/// Smallest and largest `k` with `v_n(k) != 0`, if any.
pub fn support_v_n(n: i64, m: &ModelParams) -> Option<(i64, i64)> {
    let reach = n / 5 + 1;
    let ks = (n - reach)..=(n + reach);
    let nz: Vec<i64> = ks.filter(|&k| entry_v_n(k, n, m) != 0.0).collect();
    Some((*nz.first()?, *nz.last()?))
}

/// Mean, deviation and the weak-dispersion flag of the modulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationStats {
    pub mean: f64,
    pub rho: f64,
    pub h1_ok: bool,
}

/// `⟨v⟩`, `ρ_N = max |v - ⟨v⟩|`, and whether `ρ_N` is below the
/// weak-dispersion bound (`1/2` for `N = 2`, `1/(π√N)` for `N >= 3`).
pub fn mean_and_deviation(m: &ModelParams) -> ModulationStats {
    let n = m.v_table.len();
    let mean = m.v_table.iter().sum::<f64>() / n as f64;
    let rho = m.v_table.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    let h1_ok = match n {
        1 => true,
        2 => rho < 0.5,
        _ => rho < 1.0 / (std::f64::consts::PI * (n as f64).sqrt()),
    };
    ModulationStats { mean, rho, h1_ok }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DifferenceOrder {
    First,
    Second,
}

/// Forward differences `δf(k)` and `δ²f(k)`.
pub fn forward_difference<F: Fn(i64) -> f64>(seq: F, k: i64, order: DifferenceOrder) -> f64 {
    match order {
        DifferenceOrder::First => seq(k + 1) - seq(k),
        DifferenceOrder::Second => seq(k + 2) - 2.0 * seq(k + 1) + seq(k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn jc() -> ModelParams {
        ModelParams::jaynes_cummings(0.25, 0.5).unwrap()
    }

    #[test]
    fn entry_d_examples() {
        assert_eq!(entry_d(2, &jc()), 2.25);
        let zero = ModelParams::new(0.5, 1.0, 0.0, vec![0.0]).unwrap();
        assert_eq!(entry_d(3, &zero), 3.0);
        let p3 = ModelParams::new(0.5, 1.0, 0.0, vec![0.1, -0.2, 0.1]).unwrap();
        assert!((entry_d(7, &p3) - 7.1).abs() < 1e-15);
    }

    #[test]
    fn entry_a_examples() {
        assert_eq!(entry_a(4, &jc()), 1.0);
        let m = ModelParams::new(0.5, 1.0, 0.0, vec![0.0]).unwrap();
        assert_eq!(entry_a(1, &m), 1.0);
        // 0.5*10^0.4 + 0.1*10^-0.6 from a 30-digit evaluation.
        let m = ModelParams::new(0.4, 0.5, 0.1, vec![0.0]).unwrap();
        assert!((entry_a(10, &m) - 1.281_062_080_069_886).abs() < 1e-14);
    }

    #[test]
    fn theta0_examples() {
        let c = CutoffSpec::default();
        assert_eq!(c.theta0(0.0), 1.0);
        assert_eq!(c.theta0(0.25), 0.0);
        let mid = c.theta0(0.183);
        assert!(mid > 0.0 && mid < 1.0);
        // x = (0.2 - 0.183)/(1/30) = 0.51, S(0.51) from exp(-1/x) ratios.
        assert!((mid - 0.519_997_330_560_272_8).abs() < 1e-12);
    }

    #[test]
    fn theta0_exact_on_plateau_and_outside() {
        let c = CutoffSpec::default();
        for i in 0..=1000 {
            let t = i as f64 / 6000.0;
            assert_eq!(c.theta0(t), 1.0);
            assert_eq!(c.theta0(-t), 1.0);
        }
        for i in 0..1000 {
            let t = 0.2 + i as f64 / 1000.0;
            assert_eq!(c.theta0(t), 0.0);
        }
        // monotone on the band
        let mut prev = 1.0;
        for i in 0..=400 {
            let t = 1.0 / 6.0 + (0.2 - 1.0 / 6.0) * i as f64 / 400.0;
            let v = c.theta0(t);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn lattice_thresholds_are_exact() {
        // |k - n| = n/6 exactly must be on the plateau.
        assert_eq!(theta_nn(60 + 10, 60), 1.0);
        // |k - n| = n/5 exactly must vanish.
        assert_eq!(theta_nn(60 + 12, 60), 0.0);
        assert!(theta_nn(60 + 11, 60) > 0.0);
    }

    #[test]
    fn a_n_examples() {
        let m = jc();
        assert_eq!(entry_a_n(100, 100, &m), entry_a(100, &m));
        for n in [10_i64, 37, 100, 1000] {
            let far = (2 * n + 4) / 5 + 1;
            assert_eq!(entry_a_n(n + far, n, &m), 0.0);
            assert_eq!(entry_a_n(n - far, n, &m), 0.0);
        }
        let expect = 5.0 + (101f64.sqrt() - 10.0) / 2.0;
        assert!((entry_a_n(101, 100, &m) - expect).abs() < 1e-13);
    }

    #[test]
    fn d_n_examples() {
        let m = jc();
        assert_eq!(entry_d_n(100, 100, &m), entry_d(100, &m));
        let n = 100;
        let k = n + (n + 4) / 5 + 1;
        assert_eq!(entry_d_n(k, n, &m), k as f64);
        let zero = ModelParams::new(0.5, 0.5, 0.0, vec![0.0]).unwrap();
        for k in 50..150 {
            assert_eq!(entry_d_n(k, 100, &zero), k as f64);
        }
    }

    #[test]
    fn predictor_examples() {
        let diag = ModelParams::new(0.5, 0.0, 0.0, vec![-0.25, 0.25]).unwrap();
        for k in 1..200 {
            assert_eq!(predictor_l_n(k, 100, &diag), k as f64);
        }
        let m = jc();
        let d = 0.5 * (101f64.sqrt() - 10.0);
        let expect = 100.0 - 2.0 * 5.0 * d + d * d;
        assert!((predictor_l(100, &m) - expect).abs() < 1e-12);
        assert!((predictor_l(100, &m) - 99.7512).abs() < 1e-4);
        let errs: Vec<f64> =
            [100_i64, 1000, 10000].iter().map(|&n| (predictor_l(n, &m) - (n as f64 - 0.25)).abs()).collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2]);
    }

    #[test]
    fn modulation_examples() {
        let s = mean_and_deviation(&jc());
        assert_eq!((s.mean, s.rho, s.h1_ok), (0.0, 0.25, true));
        let c = ModelParams::new(0.5, 1.0, 0.0, vec![0.3, 0.3, 0.3]).unwrap();
        let s = mean_and_deviation(&c);
        assert!((s.mean - 0.3).abs() < 1e-15 && s.rho < 1e-15 && s.h1_ok);
        let four = ModelParams::new(0.5, 1.0, 0.0, vec![0.2, -0.2, 0.2, -0.2]).unwrap();
        let s = mean_and_deviation(&four);
        assert_eq!((s.mean, s.rho, s.h1_ok), (0.0, 0.2, false));
    }

    #[test]
    fn difference_examples() {
        assert_eq!(forward_difference(|k| k as f64, 5, DifferenceOrder::First), 1.0);
        for k in -5..5 {
            let sq = |k: i64| (k * k) as f64;
            assert_eq!(forward_difference(sq, k, DifferenceOrder::Second), 2.0);
        }
        let m = jc();
        let got = forward_difference(|k| entry_a(k, &m), 100, DifferenceOrder::First);
        assert!((got - 0.5 * (101f64.sqrt() - 10.0)).abs() < 1e-15);
    }

    #[test]
    fn config_roundtrip_and_errors() {
        let m = ModelParams::new(0.4, 0.7, -0.1, vec![0.1, -0.05, -0.05]).unwrap();
        let text = m.to_config_lines();
        let pairs: Vec<(&str, &str)> = text.lines().map(|l| l.split_once('=').unwrap()).collect();
        assert_eq!(ModelParams::from_pairs(pairs).unwrap(), m);
        assert!(ModelParams::from_pairs([("gamma", "0.5"), ("a1", "1")]).is_err());
        assert!(ModelParams::from_pairs([("gamma", "0.7"), ("a1", "1"), ("v", "0")]).is_err());
        assert!(ModelParams::new(0.5, -1.0, 0.0, vec![0.0]).is_err());
    }

    #[test]
    fn scaled_entry_bounds_are_uniform() {
        let m = jc();
        let mut ratios = [Vec::new(), Vec::new(), Vec::new()];
        for e in 5..=14 {
            let n = 1_i64 << e;
            let f = |k: i64| entry_a_n(k, n, &m);
            let (lo, hi) = (n - n / 2, n + n / 2);
            let mut mx = [0.0f64; 3];
            for k in lo..=hi {
                mx[0] = mx[0].max(f(k).abs());
                mx[1] = mx[1].max(forward_difference(f, k, DifferenceOrder::First).abs());
                mx[2] = mx[2].max(forward_difference(f, k, DifferenceOrder::Second).abs());
            }
            for (o, r) in ratios.iter_mut().enumerate() {
                r.push(mx[o] * (n as f64).powf(o as f64 - m.gamma));
            }
        }
        // Bounded uniformly: the spread across the grid stays within a fixed factor.
        for r in &ratios {
            let (mn, mx) = r.iter().fold((f64::MAX, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
            assert!(mx / mn < 4.0, "{r:?}");
        }
    }

    #[test]
    fn linearization_error_single_constant() {
        let m = jc();
        let mut c_fit = 0.0f64;
        let mut per_n = Vec::new();
        for e in 5..=14 {
            let n = 1_i64 << e;
            let mut c = 0.0f64;
            for k in (n - n / 3)..=(n + n / 3) {
                if k == n || 3 * (k - n).abs() > n {
                    continue;
                }
                let err = (entry_a(k, &m) - entry_a_n(k, n, &m)).abs();
                let scale = ((k - n) as f64).powi(2) * (n as f64).powf(m.gamma - 2.0);
                c = c.max(err / scale);
            }
            per_n.push(c);
            c_fit = c_fit.max(c);
        }
        // The ratio stays bounded (no growth with n): the fitted C is attained early.
        assert!(per_n.last().unwrap() <= &(1.01 * per_n[0]), "{per_n:?}");
        assert!(c_fit < 1.0);
    }

    #[test]
    fn near_unit_gaps_of_predictor() {
        let m = jc();
        let mut scaled = Vec::new();
        let mut increasing = Vec::new();
        for e in 5..=14 {
            let n = 1_i64 << e;
            let mut mx = 0.0f64;
            let mut inc = true;
            for k in (n - n / 2)..=(n + n / 2) {
                let g = predictor_l_n(k + 1, n, &m) - predictor_l_n(k, n, &m);
                mx = mx.max((g - 1.0).abs());
                inc &= g > 0.0;
            }
            scaled.push(mx / (n as f64).powf(2.0 * m.gamma - 2.0));
            increasing.push(inc);
        }
        // C_n = max|l_n(k+1) - l_n(k) - 1| n^{2-2γ} saturates.
        let k = scaled.len();
        assert!(scaled[k - 1] / scaled[k - 2] < 1.001, "{scaled:?}");
        assert!(scaled.iter().all(|&c| c <= scaled[k - 1] * 1.001));
        // Computed threshold n1: l_n increasing from there on.
        let first = increasing.iter().rposition(|&b| !b).map_or(0, |i| i + 1);
        assert!(first < k, "l_n never increasing on the grid");
        assert!(increasing[first..].iter().all(|&b| b));
        assert!(1_i64 << (5 + first) <= 1 << 11);
    }

    proptest! {
        #[test]
        fn a_n_support_and_linear_region(n in 5_i64..5000, off in -3000_i64..3000) {
            let m = jc();
            let k = n + off;
            let v = entry_a_n(k, n, &m);
            if 5 * off.abs() >= 2 * n {
                prop_assert_eq!(v, 0.0);
            }
            if 3 * off.abs() <= n {
                let lin = entry_a(n, &m) + off as f64 * delta_a(n, &m);
                prop_assert!((v - lin).abs() <= 1e-12 * lin.abs().max(1.0));
            }
        }

        #[test]
        fn theta0_is_even_and_bounded(t in -1.0f64..1.0) {
            let c = CutoffSpec::default();
            let v = c.theta0(t);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, c.theta0(-t));
        }

        #[test]
        fn d_n_matches_d_on_plateau(n in 6_i64..3000, off in -600_i64..600) {
            let m = ModelParams::new(0.4, 0.7, 0.0, vec![0.1, -0.05, -0.05]).unwrap();
            let k = n + off;
            if 6 * off.abs() <= n && k >= 1 {
                prop_assert_eq!(entry_d_n(k, n, &m), entry_d(k, &m));
            }
            if 5 * off.abs() >= n {
                prop_assert_eq!(entry_d_n(k, n, &m), k as f64);
            }
        }
    }
}
