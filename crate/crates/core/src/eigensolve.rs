//! Sturm-sequence bisection for symmetric tridiagonal matrices, decoupled
//! spectra of `J_n⁺`, finite-section eigenvalues of `J⁺`, spectral counting,
//! and a cyclic Jacobi oracle for small dense matrices.

use crate::error::{Error, Result};
use crate::operators::{build_j_plus, build_jn_plus, build_jtilde_plus, DecoupledJn, IndexRange, TridiagonalWindow};
use crate::sequences::{mean_and_deviation, ModelParams};
use nalgebra::{DMatrix, SymmetricTridiagonal};
use std::fmt::Write as _;

fn pivmin(t: &TridiagonalWindow) -> f64 {
    let e2 = t.offdiag().iter().fold(1.0f64, |a, &e| a.max(e * e));
    f64::MIN_POSITIVE * e2 * 4.0
}

/// Pivot-sign count of `T - xI`. With `zero_is_negative = false` this is the
/// number of eigenvalues `< x`; with `true`, the number `<= x`.
fn inertia_count(t: &TridiagonalWindow, x: f64, zero_is_negative: bool) -> usize {
    let (d, e) = (t.diag(), t.offdiag());
    let pm = pivmin(t);
    let mut count = 0;
    let mut q = d[0] - x;
    for i in 0.. {
        if q == 0.0 || q.abs() < pm {
            q = if zero_is_negative { -pm } else { pm };
        }
        if q < 0.0 {
            count += 1;
        }
        if i + 1 == d.len() {
            break;
        }
        q = d[i + 1] - x - e[i] * e[i] / q;
    }
    count
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("non-finite shift {x}")))
    }
}

/// Number of eigenvalues of `t` strictly below `x`.
pub fn sturm_count(t: &TridiagonalWindow, x: f64) -> Result<usize> {
    check_finite(x)?;
    Ok(inertia_count(t, x, false))
}

/// Number of eigenvalues of `t` at or below `x`.
pub fn sturm_count_le(t: &TridiagonalWindow, x: f64) -> Result<usize> {
    check_finite(x)?;
    Ok(inertia_count(t, x, true))
}

/// Gershgorin enclosure of the spectrum.
pub fn gershgorin(t: &TridiagonalWindow) -> (f64, f64) {
    let (d, e) = (t.diag(), t.offdiag());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..d.len() {
        let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + e.get(i).map_or(0.0, |x| x.abs());
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    (lo, hi)
}

/// The requested tolerance raised to the floating resolution of `t`'s scale.
pub fn effective_tol(t: &TridiagonalWindow, tol: f64) -> f64 {
    let (lo, hi) = gershgorin(t);
    tol.max(8.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0))
}

fn bisect(t: &TridiagonalWindow, k: usize, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    // invariant: count(lo) <= k-1, count(hi) >= k
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if inertia_count(t, mid, false) >= k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `k`-th smallest eigenvalue (1-based) to within `tol`.
///
/// The result `λ` satisfies `count(λ - tol') <= k-1 < k <= count(λ + tol')`
/// with `tol' = effective_tol(t, tol)`.
pub fn eigenvalue_by_index(t: &TridiagonalWindow, k: usize, tol: f64) -> Result<f64> {
    if k == 0 || k > t.len() {
        return Err(Error::IndexOutOfRange { index: k as i64, size: t.len() });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol={tol} must be > 0")));
    }
    let tol = effective_tol(t, tol);
    let (lo, hi) = gershgorin(t);
    Ok(bisect(t, k, lo - tol, hi + tol, tol))
}

/// All eigenvalues in nondecreasing order.
pub fn tridiagonal_eigenvalues(t: &TridiagonalWindow, tol: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol={tol} must be > 0")));
    }
    let tol = effective_tol(t, tol);
    let (glo, ghi) = gershgorin(t);
    let mut out = Vec::with_capacity(t.len());
    let mut lo = glo - tol;
    for k in 1..=t.len() {
        let v = bisect(t, k, lo, ghi + tol, tol);
        out.push(v);
        // λ_{k+1} >= λ_k > v - tol
        lo = lo.max(v - tol);
    }
    Ok(out)
}

/// Certificate check `count(λ - tol) <= k-1 < k <= count(λ + tol)`.
pub fn certify_index(t: &TridiagonalWindow, k: usize, lambda: f64, tol: f64) -> bool {
    inertia_count(t, lambda - tol, false) < k && k <= inertia_count(t, lambda + tol, false)
}

/// Eigenvalues of a dense symmetric matrix: Householder reduction followed
/// by bisection on the tridiagonal form.
pub fn dense_symmetric_eigenvalues(m: &DMatrix<f64>, tol: f64) -> Result<Vec<f64>> {
    tridiagonal_eigenvalues(&householder_tridiagonal(m)?, tol)
}

/// Householder reduction of a dense symmetric matrix.
pub fn householder_tridiagonal(m: &DMatrix<f64>) -> Result<TridiagonalWindow> {
    if m.nrows() == 0 || !m.is_square() {
        return Err(Error::InvalidArgument("need a nonempty square matrix".into()));
    }
    if m.nrows() == 1 {
        return TridiagonalWindow::new(1, vec![m[(0, 0)]], vec![]);
    }
    let (d, e) = SymmetricTridiagonal::new(m.clone()).unpack_tridiagonal();
    TridiagonalWindow::new(1, d.as_slice().to_vec(), e.as_slice().to_vec())
}

/// Spectral norm `max |λ|` of a dense symmetric matrix.
pub fn symmetric_norm(m: &DMatrix<f64>, tol: f64) -> Result<f64> {
    let t = householder_tridiagonal(m)?;
    let lo = eigenvalue_by_index(&t, 1, tol)?;
    let hi = eigenvalue_by_index(&t, t.len(), tol)?;
    Ok(lo.abs().max(hi.abs()))
}

/// Origin of the values in a [`SpectrumSlice`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ExactDecoupled,
    Windowed,
    DenseOracle,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::ExactDecoupled => "exact-decoupled",
            Provenance::Windowed => "windowed",
            Provenance::DenseOracle => "dense-oracle",
        }
    }
}

/// Indexed eigenvalues `(k, λ_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSlice {
    entries: Vec<(i64, f64)>,
    provenance: Provenance,
    tol: f64,
}

impl SpectrumSlice {
    pub fn new(entries: Vec<(i64, f64)>, provenance: Provenance, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol={tol} must be > 0")));
        }
        for w in entries.windows(2) {
            if w[1].0 != w[0].0 + 1 {
                return Err(Error::InvalidArgument("indices must be contiguous".into()));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::InvalidArgument("values must be nondecreasing".into()));
            }
        }
        Ok(SpectrumSlice { entries, provenance, tol })
    }
    pub fn entries(&self) -> &[(i64, f64)] {
        &self.entries
    }
    pub fn provenance(&self) -> Provenance {
        self.provenance
    }
    pub fn tol(&self) -> f64 {
        self.tol
    }
    pub fn get(&self, k: i64) -> Option<f64> {
        let first = self.entries.first()?.0;
        self.entries.get(usize::try_from(k - first).ok()?).map(|e| e.1)
    }
    /// CSV with header `k,lambda,provenance,tol`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,lambda,provenance,tol\n");
        for (k, v) in &self.entries {
            writeln!(s, "{k},{v},{},{}", self.provenance.as_str(), self.tol).unwrap();
        }
        s
    }
}

/// Spectrum of an operator on the half-line that is diagonal with entries
/// `k` outside a block: `{k : 1 <= k < lo} ∪ spec(block) ∪ {k : k > hi}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpectrum {
    block: IndexRange,
    values: Vec<f64>,
}

impl LatticeSpectrum {
    /// `values` must be sorted and have one entry per block index.
    pub fn new(block: IndexRange, values: Vec<f64>) -> Result<Self> {
        if block.lo < 1 || values.len() != block.len() {
            return Err(Error::InvalidArgument("block spectrum does not match block".into()));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("block spectrum not sorted".into()));
        }
        Ok(LatticeSpectrum { block, values })
    }

    pub fn block(&self) -> IndexRange {
        self.block
    }
    pub fn block_values(&self) -> &[f64] {
        &self.values
    }

    /// The first `kmax` eigenvalues in nondecreasing order (stable merge,
    /// block values first on ties).
    pub fn first(&self, kmax: usize) -> Vec<f64> {
        let below = (1..self.block.lo).map(|k| k as f64);
        let mut out: Vec<f64> = Vec::with_capacity(kmax);
        let mut ints = below.chain((self.block.hi + 1..).map(|k| k as f64)).peekable();
        let mut vals = self.values.iter().copied().peekable();
        while out.len() < kmax {
            let take_block = match (vals.peek(), ints.peek()) {
                (Some(&b), Some(&i)) => b <= i,
                (Some(_), None) => true,
                _ => false,
            };
            if take_block {
                out.push(vals.next().unwrap());
            } else {
                out.push(ints.next().unwrap());
            }
        }
        out
    }

    /// `λ_k` for `k` in `range`.
    pub fn slice(&self, range: IndexRange, provenance: Provenance, tol: f64) -> Result<SpectrumSlice> {
        if range.lo < 1 {
            return Err(Error::IndexOutOfRange { index: range.lo, size: usize::MAX });
        }
        let all = self.first(range.hi as usize);
        let entries = range.iter().map(|k| (k, all[(k - 1) as usize])).collect();
        SpectrumSlice::new(entries, provenance, tol)
    }
}

/// Exact spectrum of a decoupled operator as a [`LatticeSpectrum`].
pub fn decoupled_spectrum(j: &DecoupledJn, tol: f64) -> Result<LatticeSpectrum> {
    let vals = tridiagonal_eigenvalues(&j.block, tol)?;
    LatticeSpectrum::new(j.block.range(), vals)
}

/// `λ_k(J_n⁺)` for `k` in `range`, from the exact decoupled form.
pub fn spectrum_of_jn(m: &ModelParams, n: i64, range: IndexRange, tol: f64) -> Result<SpectrumSlice> {
    let j = build_jn_plus(m, n)?;
    let spec = decoupled_spectrum(&j, tol)?;
    spec.slice(range, Provenance::ExactDecoupled, effective_tol(&j.block, tol))
}

/// Operators whose eigenvalue counting function is available exactly.
pub trait SpectralCount {
    /// Number of eigenvalues `<= x`.
    fn count_le(&self, x: f64) -> Result<usize>;
}

impl SpectralCount for TridiagonalWindow {
    fn count_le(&self, x: f64) -> Result<usize> {
        sturm_count_le(self, x)
    }
}

impl DecoupledJn {
    /// Number of eigenvalues `< x`, tail included.
    pub fn count_lt(&self, x: f64) -> Result<usize> {
        let block = sturm_count(&self.block, x)?;
        let tail = (x.ceil() as i64 - self.tail_start).max(0) as usize;
        Ok(block + tail)
    }
}

impl SpectralCount for DecoupledJn {
    fn count_le(&self, x: f64) -> Result<usize> {
        let block = sturm_count_le(&self.block, x)?;
        let tail = (x.floor() as i64 - self.tail_start + 1).max(0) as usize;
        Ok(block + tail)
    }
}

/// `N(lo, hi) = #{λ : lo < λ <= hi}`.
pub fn counting<T: SpectralCount + ?Sized>(op: &T, lo: f64, hi: f64) -> Result<usize> {
    if !(lo <= hi) {
        return Err(Error::InvalidArgument(format!("counting interval ({lo}, {hi}] reversed")));
    }
    Ok(op.count_le(hi)? - op.count_le(lo)?)
}

/// Counting window `κ(λ', λ) = [λ' - C0 λ^γ, λ + C0 λ^γ]` with the shrink
/// exponent `ν`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CountWindow {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub kappa_lo: i64,
    pub kappa_hi: i64,
    pub nu: f64,
}

impl CountWindow {
    /// Window for the spectral interval `(λ', λ]`; degenerate when
    /// `λ' < (C0 + 1) λ^γ`.
    pub fn new(lambda_lo: f64, lambda_hi: f64, gamma: f64, c0: f64, nu: f64, n: i64) -> Result<Self> {
        if !(lambda_lo <= lambda_hi) || !(nu > 0.0) || !(c0 > 0.0) {
            return Err(Error::InvalidArgument("count window parameters".into()));
        }
        let reach = c0 * lambda_hi.powf(gamma);
        if lambda_lo < (c0 + 1.0) * lambda_hi.powf(gamma) {
            return Err(Error::WindowDegenerate {
                n,
                reason: format!("lambda'={lambda_lo} below (C0+1)*lambda^gamma={}", (c0 + 1.0) * lambda_hi.powf(gamma)),
            });
        }
        let kappa_lo = (lambda_lo - reach).floor() as i64;
        let kappa_hi = (lambda_hi + reach).ceil() as i64;
        Ok(CountWindow { lambda_lo, lambda_hi, kappa_lo, kappa_hi, nu })
    }
}

/// Controls for [`lambda_n_of_j`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionConfig {
    /// `C0` in `κ(λ)`; `None` means `3 max(a1, 1)`.
    pub c0: Option<f64>,
    pub nu: f64,
    pub tol: f64,
    pub max_doublings: usize,
}

impl Default for SectionConfig {
    fn default() -> Self {
        SectionConfig { c0: None, nu: 2.0, tol: 1e-10, max_doublings: 8 }
    }
}

/// Outcome of the adaptive finite-section computation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SectionEigenvalue {
    pub value: f64,
    /// Section size that produced `value`.
    pub size: usize,
    /// Change from the previous (half-size) section.
    pub last_change: f64,
    pub window: CountWindow,
}

/// Default `C0 = 3 max(a1, 1)`.
pub fn default_c0(m: &ModelParams) -> f64 {
    3.0 * m.a1.max(1.0)
}

/// `λ_n(J)` from Dirichlet sections of `J⁺` on `[1, M]`, starting at
/// `M0 = n + ceil(C0 n^γ) + 64` and doubling until two successive values of
/// the `n`-th eigenvalue agree within `tol`.
pub fn lambda_n_of_j(m: &ModelParams, n: i64, cfg: SectionConfig) -> Result<SectionEigenvalue> {
    if n < 1 {
        return Err(Error::InvalidArgument(format!("n={n} must be >= 1")));
    }
    let c0 = cfg.c0.unwrap_or_else(|| default_c0(m));
    let nf = n as f64;
    let stats = mean_and_deviation(m);
    let spread = m.a1 * m.a1 + stats.mean.abs() + stats.rho + 1.0;
    let window = CountWindow::new(nf - spread, nf + spread, m.gamma, c0, cfg.nu, n)?;
    let m0 = (n + (c0 * nf.powf(m.gamma)).ceil() as i64 + 64) as usize;
    let bis_tol = cfg.tol / 8.0;
    let eig = |size: usize| -> Result<f64> {
        let t = build_j_plus(m, size)?;
        eigenvalue_by_index(&t, n as usize, bis_tol)
    };
    let mut size = m0;
    let mut prev = eig(size)?;
    let mut change = f64::INFINITY;
    for _ in 0..cfg.max_doublings {
        size *= 2;
        let cur = eig(size)?;
        change = (cur - prev).abs();
        if change <= cfg.tol {
            return Ok(SectionEigenvalue { value: cur, size, last_change: change, window });
        }
        prev = cur;
    }
    Err(Error::NonConvergence { what: "finite-section eigenvalue", attempts: cfg.max_doublings, last_change: change })
}

/// `λ_n(J̃_n⁺)` from the exact decoupled form.
pub fn lambda_n_of_jtilde(m: &ModelParams, n: i64, c1: f64, tol: f64) -> Result<f64> {
    let j = build_jtilde_plus(m, n, c1)?;
    let spec = decoupled_spectrum(&j, tol)?;
    Ok(spec.first(n as usize)[(n - 1) as usize])
}

/// Largest matrix accepted by the Jacobi oracle.
pub const ORACLE_MAX: usize = 64;

/// Cyclic Jacobi eigendecomposition of a small dense symmetric matrix:
/// sorted eigenvalues and the matching orthonormal eigenvectors (columns).
pub fn jacobi_eigen(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if n == 0 || !a.is_square() || n > ORACLE_MAX {
        return Err(Error::InvalidArgument(format!(
            "Jacobi oracle takes square sizes 1..={ORACLE_MAX}, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let total: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-17 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let vals = order.iter().map(|&i| a[(i, i)]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((vals, vecs))
}

/// Sorted eigenvalues from the Jacobi oracle.
pub fn jacobi_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(jacobi_eigen(a)?.0)
}
