//! Periodic quadrature, circle phases, inversion of `η = ξ - φ(ξ)`, and the
//! symbol calculus `q(Λ,S)` at finite truncation.
//!
//! Matrix entries of a symbol follow the convention
//! `q(Λ,S)(j,k) = (2π)⁻¹ ∫ q(j,e^{iξ}) e^{i(k-j)ξ} dξ`, evaluated by the
//! `M`-point trapezoid rule through one inverse FFT per row.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rustfft::FftPlanner;

use crate::conjugation::ConjugationLab;
use crate::error::{Error, Result};
use crate::operators::IndexRange;
use crate::rates::{fit_loglog, RateFit};
use crate::sequences::{delta_a, entry_a, entry_a_n, entry_v, theta_nn, ModelParams};

/// Default number of trapezoid nodes.
pub const M_DEFAULT: usize = 1024;
/// Smallest admissible node count.
pub const M_MIN: usize = 64;
/// Node count beyond which doubling gives up.
pub const M_CAP: usize = 1 << 20;
/// Absolute agreement required between `M` and `2M` nodes.
pub const QUAD_TOL: f64 = 1e-9;
/// Periodicity tolerance for [`PeriodicFunction::check_periodicity`].
pub const PERIODICITY_TOL: f64 = 1e-12;
/// Sample count for sup-norms and inverse round trips.
pub const CIRCLE_GRID: usize = 512;
/// Residual bound for [`invert_eta`].
pub const INVERSE_TOL: f64 = 1e-12;
/// Upper bound on the stationary-phase slope.
pub const STATIONARY_SLOPE_BOUND: f64 = -0.4;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn grid(m: usize) -> impl Iterator<Item = f64> {
    (0..m).map(move |l| TAU * l as f64 / m as f64)
}

fn check_nodes(m: usize) -> Result<()> {
    if m < M_MIN || !m.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("quadrature node count {m} must be a power of two >= {M_MIN}")));
    }
    Ok(())
}

/// Declared regularity of a periodic function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    Analytic,
    Smooth,
    Finite(u32),
}

/// A `2π`-periodic complex function of the angle `ξ`.
#[derive(Clone)]
pub struct PeriodicFunction {
    f: Arc<dyn Fn(f64) -> Complex64 + Send + Sync>,
    class: Smoothness,
}

impl fmt::Debug for PeriodicFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicFunction").field("class", &self.class).finish_non_exhaustive()
    }
}

impl PeriodicFunction {
    pub fn new(class: Smoothness, f: impl Fn(f64) -> Complex64 + Send + Sync + 'static) -> Self {
        PeriodicFunction { f: Arc::new(f), class }
    }

    /// Real-valued function viewed as complex.
    pub fn real(class: Smoothness, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(class, move |x| Complex64::new(f(x), 0.0))
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(Smoothness::Analytic, move |_| c)
    }

    /// `e^{imξ}`.
    pub fn character(m: i64) -> Self {
        Self::new(Smoothness::Analytic, move |x| (I * (m as f64 * x)).exp())
    }

    /// Fejér-weighted trigonometric bump `Σ_{|m|≤K} (1 - |m|/(K+1)) e^{imξ}`.
    pub fn fejer_bump(k: u32) -> Self {
        Self::real(Smoothness::Analytic, move |x| {
            1.0 + (1..=k).map(|m| 2.0 * (1.0 - m as f64 / (k + 1) as f64) * (m as f64 * x).cos()).sum::<f64>()
        })
    }

    pub fn eval(&self, xi: f64) -> Complex64 {
        (self.f)(xi)
    }

    pub fn class(&self) -> Smoothness {
        self.class
    }

    pub fn conj(&self) -> Self {
        let f = self.f.clone();
        Self { f: Arc::new(move |x| f(x).conj()), class: self.class }
    }

    /// Largest `|f(ξ+2π) - f(ξ)|` over `samples` points, relative to `max(1, |f|)`.
    pub fn check_periodicity(&self, samples: usize) -> Result<f64> {
        let worst = grid(samples.max(1))
            .map(|x| {
                let a = self.eval(x);
                (self.eval(x + TAU) - a).norm() / a.norm().max(1.0)
            })
            .fold(0.0, f64::max);
        if worst > PERIODICITY_TOL {
            return Err(Error::InvalidArgument(format!("function is not 2π-periodic (defect {worst:e})")));
        }
        Ok(worst)
    }
}

/// A real `2π`-periodic phase with its first derivative.
pub trait CirclePhase: Send + Sync {
    fn value(&self, xi: f64) -> f64;
    fn derivative(&self, xi: f64) -> f64;

    /// Sampled `(sup|f|, sup|f'|)`.
    fn sup_norms(&self, samples: usize) -> (f64, f64) {
        grid(samples).fold((0.0f64, 0.0f64), |(a, b), x| (a.max(self.value(x).abs()), b.max(self.derivative(x).abs())))
    }

    /// `sup|f| + sup|f'|`, sampled on [`CIRCLE_GRID`] points.
    fn c1_norm(&self) -> f64 {
        let (a, b) = self.sup_norms(CIRCLE_GRID);
        a + b
    }
}

/// `2A sin ξ (1 - d cos ξ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineProduct {
    pub amplitude: f64,
    pub damping: f64,
}

impl SineProduct {
    pub fn to_periodic(self) -> PeriodicFunction {
        PeriodicFunction::real(Smoothness::Analytic, move |x| self.value(x))
    }
}

impl CirclePhase for SineProduct {
    fn value(&self, xi: f64) -> f64 {
        2.0 * self.amplitude * xi.sin() * (1.0 - self.damping * xi.cos())
    }
    fn derivative(&self, xi: f64) -> f64 {
        2.0 * self.amplitude * (xi.cos() - self.damping * (2.0 * xi).cos())
    }
}

/// A phase known only through its values; the derivative is a centered
/// difference with step `2π/M`.
#[derive(Clone)]
pub struct SampledPhase {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    h: f64,
}

impl SampledPhase {
    pub fn new(m: usize, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        SampledPhase { f: Arc::new(f), h: TAU / m.max(1) as f64 }
    }
}

impl CirclePhase for SampledPhase {
    fn value(&self, xi: f64) -> f64 {
        (self.f)(xi)
    }
    fn derivative(&self, xi: f64) -> f64 {
        ((self.f)(xi + self.h) - (self.f)(xi - self.h)) / (2.0 * self.h)
    }
}

/// `ψ_n` and `φ_n` for one `n`.
#[derive(Debug, Clone)]
pub struct PhaseFamily {
    pub n: i64,
    pub model: ModelParams,
    /// `2a(n) sin ξ (1 - δa(n) cos ξ)`.
    pub psi: SineProduct,
    /// `2δa(n) sin ξ (1 - δa(n) cos ξ)`.
    pub phi: SineProduct,
}

impl PhaseFamily {
    pub fn new(m: &ModelParams, n: i64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidArgument(format!("n={n} must be positive")));
        }
        let (a, da) = (entry_a(n, m), delta_a(n, m));
        Ok(PhaseFamily {
            n,
            model: m.clone(),
            psi: SineProduct { amplitude: a, damping: da },
            phi: SineProduct { amplitude: da, damping: da },
        })
    }

    /// `ψ̃_n(j, e^{iξ}) = 2a_n(j) sin ξ (1 - δa(n) cos ξ)` for any `j`.
    pub fn psi_tilde(&self, j: i64, xi: f64) -> f64 {
        SineProduct { amplitude: entry_a_n(j, self.n, &self.model), damping: self.psi.damping }.value(xi)
    }

    /// `ψ_n + (j-n) φ_n`; agrees with [`Self::psi_tilde`] for `|j-n| ≤ n/3`.
    pub fn psi_tilde_affine(&self, j: i64, xi: f64) -> f64 {
        self.affine().value(j, xi)
    }

    pub fn affine(&self) -> AffinePhase<'_> {
        AffinePhase { n: self.n, psi: &self.psi, phi: &self.phi }
    }

    /// Principal part `2a(n) sin ξ`.
    pub fn psi_n1(&self, xi: f64) -> f64 {
        2.0 * self.psi.amplitude * xi.sin()
    }

    /// `ψ_n - ψ_{n,1}`.
    pub fn psi_n2(&self, xi: f64) -> f64 {
        self.psi.value(xi) - self.psi_n1(xi)
    }

    /// Sampled `(sup|ψ_{n,1}|, sup|ψ_{n,2}|)`.
    pub fn scale_split(&self) -> (f64, f64) {
        grid(CIRCLE_GRID).fold((0.0f64, 0.0f64), |(a, b), x| (a.max(self.psi_n1(x).abs()), b.max(self.psi_n2(x).abs())))
    }

    pub fn phi_c1_norm(&self) -> f64 {
        self.phi.c1_norm()
    }
}

/// Smallest `n₀ ≤ n_max` with `‖φ_n‖_{C¹} ≤ 1/2` for every `n ∈ [n₀, n_max]`.
pub fn contraction_threshold(m: &ModelParams, n_max: i64) -> Result<Option<i64>> {
    let mut n0 = None;
    for n in (1..=n_max).rev() {
        if PhaseFamily::new(m, n)?.phi_c1_norm() > 0.5 {
            break;
        }
        n0 = Some(n);
    }
    Ok(n0)
}

/// `ψ̃(j, ξ) = ψ(ξ) + (j-n) φ(ξ)`.
#[derive(Clone, Copy)]
pub struct AffinePhase<'a> {
    pub n: i64,
    pub psi: &'a dyn CirclePhase,
    pub phi: &'a dyn CirclePhase,
}

impl AffinePhase<'_> {
    pub fn value(&self, j: i64, xi: f64) -> f64 {
        self.psi.value(xi) + (j - self.n) as f64 * self.phi.value(xi)
    }
}

/// Inverse `ξ(η)` of `η(ξ) = ξ - φ(ξ)` for a phase with `‖φ‖_{C¹} ≤ 1/2`.
pub struct EtaInverse<'a> {
    phi: &'a dyn CirclePhase,
    reach: f64,
}

impl<'a> EtaInverse<'a> {
    pub fn new(phi: &'a dyn CirclePhase) -> Result<Self> {
        let (s0, s1) = phi.sup_norms(CIRCLE_GRID);
        if s0 + s1 > 0.5 {
            return Err(Error::ContractionViolated { norm: s0 + s1 });
        }
        // Slack covers the gap between the sampled and the true sup.
        Ok(EtaInverse { phi, reach: s0 * (1.0 + 1e-3) + 1e-14 })
    }

    /// Safeguarded Newton on `g(ξ) = ξ - φ(ξ) - η`, bracketed by `η ± sup|φ|`.
    pub fn xi(&self, eta: f64) -> f64 {
        let g = |x: f64| x - self.phi.value(x) - eta;
        let (mut lo, mut hi) = (eta - self.reach, eta + self.reach);
        let mut x = eta;
        for _ in 0..200 {
            let gx = g(x);
            if gx == 0.0 {
                return x;
            }
            if gx < 0.0 {
                lo = lo.max(x);
            } else {
                hi = hi.min(x);
            }
            let mut next = x - gx / (1.0 - self.phi.derivative(x));
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs().max(1.0) {
                return next;
            }
            x = next;
        }
        x
    }

    /// `p(e^{iη}) = ∂_η ξ(η) = 1 / (1 - φ'(ξ(η)))`.
    pub fn p(&self, eta: f64) -> f64 {
        1.0 / (1.0 - self.phi.derivative(self.xi(eta)))
    }

    /// `ϑ(e^{iη}) = e^{iξ(η)}`.
    pub fn vartheta(&self, eta: f64) -> Complex64 {
        (I * self.xi(eta)).exp()
    }

    /// Largest of `|η(ξ(η)) - η|` and `|ξ(η(ξ)) - ξ|` over `samples` grid points.
    pub fn roundtrip_defect(&self, samples: usize) -> f64 {
        grid(samples)
            .map(|t| {
                let x = self.xi(t);
                let fwd = (x - self.phi.value(x) - t).abs();
                let back = (self.xi(t - self.phi.value(t)) - t).abs();
                fwd.max(back)
            })
            .fold(0.0, f64::max)
    }

    /// `sup|p - 1|` on [`CIRCLE_GRID`] points.
    pub fn p_deviation(&self) -> f64 {
        grid(CIRCLE_GRID).map(|t| (self.p(t) - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Solves `ξ - φ(e^{iξ}) = η`.
pub fn invert_eta(phi: &dyn CirclePhase, eta: f64) -> Result<f64> {
    let inv = EtaInverse::new(phi)?;
    let xi = inv.xi(eta);
    let res = (xi - phi.value(xi) - eta).abs();
    if res > INVERSE_TOL * eta.abs().max(1.0) {
        return Err(Error::NonConvergence { what: "invert_eta", attempts: 200, last_change: res });
    }
    Ok(xi)
}

/// A converged periodic integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: Complex64,
    /// Node count of the reported value.
    pub points: usize,
    /// `|I(M) - I(M/2)|` at acceptance.
    pub change: f64,
}

/// `∫₀^{2π} f` by trapezoid sums, doubling from `m0` nodes until consecutive
/// sums agree to [`QUAD_TOL`].
pub fn periodic_integral(f: impl Fn(f64) -> Complex64, m0: usize) -> Result<Quadrature> {
    check_nodes(m0)?;
    let mut m = m0;
    let mut sum: Complex64 = grid(m).map(&f).sum();
    let mut value = sum * (TAU / m as f64);
    let mut change = f64::INFINITY;
    while 2 * m <= M_CAP {
        // Odd nodes of the refined grid.
        let odd: Complex64 = (0..m).map(|l| f(TAU * (2 * l + 1) as f64 / (2 * m) as f64)).sum();
        sum += odd;
        m *= 2;
        let next = sum * (TAU / m as f64);
        change = (next - value).norm();
        value = next;
        if change <= QUAD_TOL {
            return Ok(Quadrature { value, points: m, change });
        }
    }
    Err(Error::NonConvergence { what: "periodic quadrature", attempts: m, last_change: change })
}

/// `J(b, μ) = ∫₀^{2π} e^{iμ cos η} b(e^{iη}) dη`.
pub fn osc_integral(b: &PeriodicFunction, mu: f64, m: usize) -> Result<Quadrature> {
    periodic_integral(|x| (I * (mu * x.cos())).exp() * b.eval(x), m)
}

/// Bessel `J_ν(x)` from its ascending series summed in exact rational
/// arithmetic; independent of any quadrature.
pub fn bessel_j_series(nu: u32, x: f64) -> Result<f64> {
    let xr = BigRational::from_float(x)
        .ok_or_else(|| Error::InvalidArgument(format!("bessel argument {x} is not finite")))?;
    let half = &xr / BigRational::from_integer(BigInt::from(2));
    let h2 = &half * &half;
    // term_0 = (x/2)^ν / ν!
    let mut term = BigRational::from_integer(BigInt::from(1));
    for i in 1..=nu {
        term = term * &half / BigRational::from_integer(BigInt::from(i));
    }
    let eps = BigRational::new(BigInt::from(1), BigInt::from(10).pow(40));
    let mut sum = BigRational::zero();
    let mut k: u64 = 0;
    loop {
        sum += &term;
        k += 1;
        term = -term * &h2 / BigRational::from_integer(BigInt::from(k * (k + nu as u64)));
        if k as f64 > x.abs() && term.abs() < eps {
            break;
        }
    }
    sum.to_f64().ok_or_else(|| Error::InvalidArgument("bessel series overflow".into()))
}

/// Log-log fit of `|J(b, μ)|` against `|μ|`.
pub fn stationary_phase_check(b: &PeriodicFunction, mu_list: &[f64]) -> Result<RateFit> {
    if let Some(&mu) = mu_list.iter().find(|m| !(m.abs() >= 1.0)) {
        return Err(Error::InvalidArgument(format!("stationary phase needs |μ| >= 1, got {mu}")));
    }
    let values =
        mu_list.iter().map(|&mu| osc_integral(b, mu, M_DEFAULT).map(|q| q.value.norm())).collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = mu_list.iter().map(|m| m.abs()).collect();
    fit_loglog(&xs, &values)
}

/// Matrix of `q(Λ,S)` on `rows × cols` from `M` samples per row; `q`
/// receives the row, the node index and the node angle.
pub fn symbol_block(
    rows: IndexRange,
    cols: IndexRange,
    m: usize,
    q: impl Fn(i64, usize, f64) -> Complex64,
) -> Result<DMatrix<Complex64>> {
    check_nodes(m)?;
    let fft = FftPlanner::new().plan_fft_inverse(m);
    let mut out = DMatrix::zeros(rows.len(), cols.len());
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    let scale = 1.0 / m as f64;
    let mm = m as i64;
    for (r, j) in rows.iter().enumerate() {
        for (l, x) in grid(m).enumerate() {
            buf[l] = q(j, l, x);
        }
        // buf[d] = Σ_l q_l e^{+2πi l d / M}
        fft.process(&mut buf);
        for (c, k) in cols.iter().enumerate() {
            out[(r, c)] = buf[(k - j).rem_euclid(mm) as usize] * scale;
        }
    }
    Ok(out)
}

/// Matrix of `q(Λ,S)` on `rows × cols`.
pub fn symbol_to_matrix(
    q: impl Fn(i64, f64) -> Complex64,
    rows: IndexRange,
    cols: IndexRange,
    m: usize,
) -> Result<DMatrix<Complex64>> {
    symbol_block(rows, cols, m, |j, _, x| q(j, x))
}

fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn quad_nodes_for(span: i64) -> usize {
    (4 * span.max(1) as usize).next_power_of_two().max(M_DEFAULT)
}

/// Outcome of a composition check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositionReport {
    pub defect: f64,
    pub window: IndexRange,
    pub intermediate: IndexRange,
    pub nodes: usize,
    /// Largest entry of `Q⁰ Q*`.
    pub lhs_max: f64,
}

/// Compares `Q⁰ Q*` with `(θ⁰ e^{i(ψ̃⁰-ψ̃)∘ϑ̃})(Λ,S) p(S) θ(Λ)` on
/// `[2n/3, 4n/3]`; `Q⁰ = (θ⁰e^{iψ̃⁰})(Λ,S)`, `Q = (θe^{iψ̃})(Λ,S)`.
pub fn composition_check(
    psi0: &dyn Fn(i64, f64) -> f64,
    psi: AffinePhase<'_>,
    theta0: &dyn Fn(i64) -> f64,
    theta: &dyn Fn(i64) -> f64,
) -> Result<CompositionReport> {
    let n = psi.n;
    let window = IndexRange::new((2 * n + 2) / 3, (4 * n) / 3)?;
    let inv = EtaInverse::new(psi.phi)?;

    let amp = window
        .iter()
        .flat_map(|j| grid(64).map(move |x| (j, x)))
        .map(|(j, x)| psi0(j, x).abs().max(psi.value(j, x).abs()))
        .fold(0.0, f64::max);
    let margin = 32 + (2.0 * amp).ceil() as i64;
    for k in (window.lo - margin..window.lo).chain(window.hi + 1..=window.hi + margin) {
        if theta0(k) != 0.0 || theta(k) != 0.0 {
            return Err(Error::InvalidArgument(format!("cut-offs must vanish outside [2n/3, 4n/3]; nonzero at {k}")));
        }
    }
    let ext = IndexRange::new(window.lo - margin, window.hi + margin)?;
    let m = quad_nodes_for(ext.len() as i64);

    let q0 = symbol_to_matrix(|j, x| theta0(j) * (I * psi0(j, x)).exp(), window, ext, m)?;
    let q = symbol_to_matrix(|j, x| theta(j) * (I * psi.value(j, x)).exp(), window, ext, m)?;
    let lhs = &q0 * q.adjoint();

    let xis: Vec<f64> = grid(m).map(|t| inv.xi(t)).collect();
    let ps: Vec<f64> = xis.iter().map(|&x| 1.0 / (1.0 - psi.phi.derivative(x))).collect();
    let qt = symbol_block(window, ext, m, |j, l, _| theta0(j) * (I * (psi0(j, xis[l]) - psi.value(j, xis[l]))).exp())?;
    let p_s = symbol_block(ext, window, m, |_, l, _| Complex64::new(ps[l], 0.0))?;
    let mut rhs = qt * p_s;
    for (c, k) in window.iter().enumerate() {
        rhs.column_mut(c).scale_mut(theta(k));
    }
    Ok(CompositionReport {
        defect: max_diff(&lhs, &rhs),
        window,
        intermediate: ext,
        nodes: m,
        lhs_max: lhs.iter().map(|z| z.norm()).fold(0.0, f64::max),
    })
}

/// Largest entry of `e^{-isΛ} q(Λ,S) e^{isΛ} - (q∘τ̃_s)(Λ,S)` on `rows × cols`.
pub fn translation_check(q: &dyn Fn(i64, f64) -> Complex64, s: f64, rows: IndexRange, cols: IndexRange) -> Result<f64> {
    let m = quad_nodes_for((cols.hi - rows.lo).abs().max((rows.hi - cols.lo).abs()) + 1);
    let mut lhs = symbol_to_matrix(q, rows, cols, m)?;
    for (r, j) in rows.iter().enumerate() {
        for (c, k) in cols.iter().enumerate() {
            lhs[(r, c)] *= (I * (s * (k - j) as f64)).exp();
        }
    }
    let rhs = symbol_to_matrix(|j, x| q(j, x - s), rows, cols, m)?;
    Ok(max_diff(&lhs, &rhs))
}

/// `Q_n = (θ_{n,n} e^{iψ̃_n})(Λ,S)` on `block × block`.
pub fn q_n_matrix(fam: &PhaseFamily, block: IndexRange) -> Result<DMatrix<Complex64>> {
    let m = quad_nodes_for(block.len() as i64);
    symbol_to_matrix(|j, x| theta_nn(j, fam.n) * (I * fam.psi_tilde(j, x)).exp(), block, block, m)
}

/// `‖U Θ_n - Q_n‖` (spectral norm) on the supported block.
pub fn conjugation_approximation_defect(lab: &ConjugationLab) -> Result<f64> {
    let fam = PhaseFamily::new(&lab.model, lab.n)?;
    let q = q_n_matrix(&fam, lab.block)?;
    let u = lab.u();
    let diff = DMatrix::from_fn(u.nrows(), u.ncols(), |r, c| {
        let k = lab.block.lo + c as i64;
        Complex64::new(u[(r, c)] * theta_nn(k, lab.n), 0.0) - q[(r, c)]
    });
    Ok(diff.singular_values().max())
}

/// `Ω* = {2πℓ/N : ℓ = 1, …, N-1}`.
pub fn omega_star(m: &ModelParams) -> Vec<f64> {
    let nn = m.period();
    (1..nn).map(|l| TAU * l as f64 / nn as f64).collect()
}

/// `(ω, c_ω)` for `ω ∈ Ω`, with `v(k) = Σ c_ω e^{iωk}`, by the exact DFT of one period.
pub fn fourier_coefficients(m: &ModelParams) -> Vec<(f64, Complex64)> {
    let nn = m.period();
    (0..nn)
        .map(|l| {
            let w = TAU * l as f64 / nn as f64;
            let c: Complex64 = (1..=nn as i64).map(|k| entry_v(k, m) * (-I * (w * k as f64)).exp()).sum();
            (w, c / nn as f64)
        })
        .collect()
}

fn check_omega(m: &ModelParams, omega: f64) -> Result<()> {
    if omega_star(m).iter().any(|w| (w - omega).abs() <= 1e-12) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("ω={omega} is not in Ω* = {{2πℓ/N}}")))
    }
}

/// `μ_n^ω = -4a(n) sin(ω/2)`.
pub fn mu_n_omega(m: &ModelParams, n: i64, omega: f64) -> f64 {
    -4.0 * entry_a(n, m) * (0.5 * omega).sin()
}

/// Stationary-phase prediction of the diagonal entry `(j, j)` of
/// `e^{-itL₀} U Θ_n² e^{iωΛ} Uᵀ e^{itL₀}`:
/// `e^{iωj} θ_{n,n}(j)² (2π)⁻¹ ∫ e^{iψ̃^{ω,t}(j, e^{iη})} dη` with
/// `ψ̃^{ω,t}(j,·) = ψ̃(j, ξ_n(·-t) - ω) - ψ̃(j, ξ_n(·-t))`.
pub fn q_diag_prediction(m: &ModelParams, n: i64, omega: f64, t: f64, j: i64) -> Result<Complex64> {
    check_omega(m, omega)?;
    if 3 * (j - n).abs() > n {
        return Err(Error::InvalidArgument(format!("j={j} is outside |j-n| <= n/3 for n={n}")));
    }
    let fam = PhaseFamily::new(m, n)?;
    let inv = EtaInverse::new(&fam.phi)?;
    let aff = fam.affine();
    let q = periodic_integral(
        |eta| {
            let x = inv.xi(eta - t);
            (I * (aff.value(j, x - omega) - aff.value(j, x))).exp()
        },
        M_MIN,
    )?;
    let th = theta_nn(j, n);
    Ok((I * (omega * j as f64)).exp() * th * th * q.value / TAU)
}

/// `(U Θ_n² e^{iωΛ} Uᵀ)(j, j) = Σ_m U(j,m)² θ_{n,n}(m)² e^{iωm}`.
pub fn q_diag_direct(lab: &ConjugationLab, omega: f64, j: i64) -> Complex64 {
    if !lab.block.contains(j) {
        return Complex64::new(0.0, 0.0);
    }
    let r = lab.block.pos(j);
    let u = lab.u();
    lab.block
        .iter()
        .enumerate()
        .map(|(c, k)| {
            let th = theta_nn(k, lab.n);
            (I * (omega * k as f64)).exp() * (u[(r, c)] * th).powi(2)
        })
        .sum()
}

/// One prediction-versus-direct comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalComparison {
    pub n: i64,
    pub omega: f64,
    pub j: i64,
    pub prediction: Complex64,
    pub direct: Complex64,
}

impl DiagonalComparison {
    pub const CSV_HEADER: &'static str = "n,omega,j,pred_re,pred_im,direct,defect";

    /// `|prediction - direct|`.
    pub fn defect(&self) -> f64 {
        (self.prediction - self.direct).norm()
    }

    /// The `direct` column holds the real part of the direct entry.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.n,
            self.omega,
            self.j,
            self.prediction.re,
            self.prediction.im,
            self.direct.re,
            self.defect()
        )
    }
}

/// Comparisons at `t = 0` for every `ω ∈ Ω*` and `|j - n| ≤ n/5`.
pub fn diagonal_comparisons(lab: &ConjugationLab) -> Result<Vec<DiagonalComparison>> {
    let n = lab.n;
    let mut out = Vec::new();
    for omega in omega_star(&lab.model) {
        for j in n - n / 5..=n + n / 5 {
            out.push(DiagonalComparison {
                n,
                omega,
                j,
                prediction: q_diag_prediction(&lab.model, n, omega, 0.0, j)?,
                direct: q_diag_direct(lab, omega, j),
            });
        }
    }
    Ok(out)
}
