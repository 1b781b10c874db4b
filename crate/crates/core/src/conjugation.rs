//! Near-diagonalization of `J_n` by the orthogonal matrix `U = exp(G)`,
//! `G = iB_n`: the residual `R_n = U J_{0,n} Uᵀ - l_n(Λ)`, the conjugated
//! operator `L_n = l_n(Λ) + U v_n(Λ) Uᵀ`, eigenvalue transfer, localization
//! and gaps, the trace functional `G_n⁰`, its cut-off variant `G_n`, and the
//! diagonal of `Ṽ_n = U v_n(Λ) Uᵀ`.
//!
//! All operators differ from a diagonal operator with entries `k` only on
//! [`support_block`], so every dense computation happens there; the
//! remaining spectrum is the integer lattice, merged in by
//! [`LatticeSpectrum`].

use crate::eigensolve::{decoupled_spectrum, dense_symmetric_eigenvalues, symmetric_norm, LatticeSpectrum};
use crate::error::{Error, Result};
use crate::operators::{
    build_an_bn, build_jn_plus, support_block, DenseOrthogonal, DenseSkew, DenseSymmetric, IndexRange,
};
use crate::sequences::{entry_a_n, entry_v_n, mean_and_deviation, predictor_l, predictor_l_n, CutoffSpec, ModelParams};
use nalgebra::{DMatrix, SymmetricEigen};

/// Orthogonality tolerance certified by [`expm_skew`].
pub const EXPM_ORTHO_TOL: f64 = 1e-11;

// Padé [13/13] coefficients and the scaling threshold θ13.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a [13/13] Padé kernel.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let norm1 = (0..n).map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let s = if norm1 > THETA13 { (norm1 / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a * 2f64.powi(-s);
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).ok_or_else(|| Error::InvalidArgument("singular Padé denominator".into()))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// `exp(G)` for antisymmetric `G`, certified orthogonal to [`EXPM_ORTHO_TOL`].
pub fn expm_skew(g: &DenseSkew) -> Result<DenseOrthogonal> {
    let u = expm(g.matrix())?;
    DenseOrthogonal::with_tolerance(g.offset(), u, EXPM_ORTHO_TOL)
}

/// Fejér test function: `χ̂(t) = max(0, 1 - |t|/t0)`, `χ(λ) = t0 sinc²(t0 λ / 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunctionChi {
    pub t0: f64,
}

impl Default for TestFunctionChi {
    fn default() -> Self {
        TestFunctionChi { t0: 1.0 }
    }
}

impl TestFunctionChi {
    pub fn new(t0: f64) -> Result<Self> {
        if !(t0 > 0.0) || !t0.is_finite() {
            return Err(Error::InvalidArgument(format!("t0={t0} must be > 0")));
        }
        Ok(TestFunctionChi { t0 })
    }

    pub fn chi(&self, lambda: f64) -> f64 {
        let x = 0.5 * self.t0 * lambda;
        let s = if x.abs() < 1e-4 { 1.0 - x * x / 6.0 } else { x.sin() / x };
        self.t0 * s * s
    }

    pub fn chi_hat(&self, t: f64) -> f64 {
        (1.0 - t.abs() / self.t0).max(0.0)
    }
}

/// Dense data for one `n`: the block, `U = exp(G)` on it, and the diagonal
/// sequences `l_n`, `v_n` restricted to it.
#[derive(Debug, Clone)]
pub struct ConjugationLab {
    pub model: ModelParams,
    pub n: i64,
    pub block: IndexRange,
    u: DMatrix<f64>,
    ln: Vec<f64>,
    vn: Vec<f64>,
}

impl ConjugationLab {
    pub fn new(m: &ModelParams, n: i64) -> Result<Self> {
        if n < 5 {
            return Err(Error::InvalidArgument(format!("n={n} must be >= 5")));
        }
        let block = support_block(m, n);
        let (_, g) = build_an_bn(m, n, block)?;
        let u = expm_skew(&g)?.into_matrix();
        Ok(ConjugationLab {
            model: m.clone(),
            n,
            block,
            u,
            ln: block.iter().map(|k| predictor_l_n(k, n, m)).collect(),
            vn: block.iter().map(|k| entry_v_n(k, n, m)).collect(),
        })
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// `l_n(k)` for `k` in the block.
    pub fn ln(&self) -> &[f64] {
        &self.ln
    }

    fn shift(&self) -> f64 {
        self.n as f64
    }

    /// `U (J_{0,n} - cI) Uᵀ - diag(l_n - c)` with `c = n`; equals `R_n` on the block.
    pub fn residual_matrix(&self) -> DMatrix<f64> {
        let s = self.block.len();
        let c = self.shift();
        let (m, n) = (&self.model, self.n);
        // W = U (J0 - cI), J0 tridiagonal.
        let mut w = DMatrix::zeros(s, s);
        for j in 0..s {
            let k = self.block.lo + j as i64;
            let mut col = self.u.column(j) * (k as f64 - c);
            if j > 0 {
                col += self.u.column(j - 1) * entry_a_n(k - 1, n, m);
            }
            if j + 1 < s {
                col += self.u.column(j + 1) * entry_a_n(k, n, m);
            }
            w.set_column(j, &col);
        }
        let mut r = w * self.u.transpose();
        for i in 0..s {
            r[(i, i)] -= self.ln[i] - c;
        }
        symmetrize(r)
    }

    /// `‖R_n⁺‖`.
    pub fn residual_norm(&self, tol: f64) -> Result<f64> {
        symmetric_norm(&self.residual_matrix(), tol)
    }

    /// `Ṽ_n = U v_n(Λ) Uᵀ` on the block.
    pub fn vtilde(&self) -> DMatrix<f64> {
        let mut uv = self.u.clone();
        for (j, &v) in self.vn.iter().enumerate() {
            uv.column_mut(j).scale_mut(v);
        }
        symmetrize(uv * self.u.transpose())
    }

    /// `Ṽ_n(j, j) = Σ_m U(j, m)² v_n(m)`.
    pub fn vtilde_diag(&self, j: i64) -> f64 {
        if !self.block.contains(j) {
            return 0.0;
        }
        let r = self.block.pos(j);
        (0..self.block.len()).map(|c| self.u[(r, c)].powi(2) * self.vn[c]).sum()
    }

    /// `max |Ṽ_n(j, j)|` over `|j - n| <= n^γ`.
    pub fn vtilde_diag_max(&self) -> f64 {
        let reach = (self.n as f64).powf(self.model.gamma);
        let lo = (self.n as f64 - reach).ceil() as i64;
        let hi = (self.n as f64 + reach).floor() as i64;
        (lo..=hi).map(|j| self.vtilde_diag(j).abs()).fold(0.0, f64::max)
    }

    /// `L_n - cI` on the block, `c = n`.
    fn ln_shifted(&self) -> DMatrix<f64> {
        let mut l = self.vtilde();
        let c = self.shift();
        for i in 0..self.block.len() {
            l[(i, i)] += self.ln[i] - c;
        }
        l
    }

    /// `L_n⁺` on the block.
    pub fn ln_matrix(&self) -> Result<DenseSymmetric> {
        let mut l = self.ln_shifted();
        for i in 0..self.block.len() {
            l[(i, i)] += self.shift();
        }
        DenseSymmetric::new(self.block.lo, l)
    }

    /// Spectrum of `L_n⁺`.
    pub fn ln_spectrum(&self, tol: f64) -> Result<LatticeSpectrum> {
        let vt = self.vtilde();
        let s = vt.nrows();
        if (0..s).all(|j| (0..s).all(|i| i == j || vt[(i, j)] == 0.0)) {
            // L_n is diagonal; read the spectrum off exactly.
            let mut vals: Vec<f64> = (0..s).map(|i| self.ln[i] + vt[(i, i)]).collect();
            vals.sort_by(f64::total_cmp);
            return LatticeSpectrum::new(self.block, vals);
        }
        let c = self.shift();
        let mut shifted = vt;
        for i in 0..s {
            shifted[(i, i)] += self.ln[i] - c;
        }
        let vals = dense_symmetric_eigenvalues(&shifted, tol)?.into_iter().map(|x| x + c).collect();
        LatticeSpectrum::new(self.block, vals)
    }

    /// Spectrum of `J_n⁺` from its exact decoupled form.
    pub fn jn_spectrum(&self, tol: f64) -> Result<LatticeSpectrum> {
        decoupled_spectrum(&build_jn_plus(&self.model, self.n)?, tol)
    }

    /// `G_n⁰ = Σ_k [χ(λ_k(L_n) - l(n)) - χ(l_n(k) - l(n))]`.
    ///
    /// Outside the block both operators are diagonal with equal entries, so
    /// the sum over the block is exact.
    pub fn trace_g0(&self, chi: &TestFunctionChi, tol: f64) -> Result<f64> {
        Ok(self.g0_from(&self.ln_spectrum(tol)?, chi))
    }

    /// `G_n⁰` from a precomputed spectrum of `L_n⁺`, pairing sorted values.
    fn g0_from(&self, spec: &LatticeSpectrum, chi: &TestFunctionChi) -> f64 {
        let l = predictor_l(self.n, &self.model);
        let mut pred = self.ln.clone();
        pred.sort_by(f64::total_cmp);
        spec.block_values().iter().zip(&pred).map(|(&mu, &x)| chi.chi(mu - l) - chi.chi(x - l)).sum()
    }

    /// `G_n = tr(θ_{n^γ,n}(L_{0,n}) (χ(L_n - l(n)) - χ(L_{0,n} - l(n))))`,
    /// from a full eigendecomposition of the block.
    pub fn trace_gn_cutoff(&self, chi: &TestFunctionChi) -> Result<f64> {
        let eig = SymmetricEigen::new(self.ln_shifted());
        let c = self.shift();
        let l = predictor_l(self.n, &self.model);
        let tau = (self.n as f64).powf(self.model.gamma);
        let cut = CutoffSpec::default();
        let weights: Vec<f64> = eig.eigenvalues.iter().map(|&mu| chi.chi(mu + c - l)).collect();
        let mut total = 0.0;
        for (i, &lk) in self.ln.iter().enumerate() {
            let th = cut.theta(tau, self.n as f64, lk);
            if th == 0.0 {
                continue;
            }
            let diag: f64 = (0..weights.len()).map(|p| eig.eigenvectors[(i, p)].powi(2) * weights[p]).sum();
            total += th * (diag - chi.chi(lk - l));
        }
        Ok(total)
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// `‖R_n⁺‖` for the model.
pub fn residual_rn(m: &ModelParams, n: i64) -> Result<f64> {
    ConjugationLab::new(m, n)?.residual_norm(1e-13)
}

/// `L_n⁺` on its support block.
pub fn build_ln(m: &ModelParams, n: i64) -> Result<DenseSymmetric> {
    ConjugationLab::new(m, n)?.ln_matrix()
}

/// `Ṽ_n(j, j)`; needs `|j - n| <= n^γ`.
pub fn vtilde_diag(m: &ModelParams, n: i64, j: i64) -> Result<f64> {
    if ((j - n) as f64).abs() > (n as f64).powf(m.gamma) {
        return Err(Error::InvalidArgument(format!("|j-n| > n^gamma for j={j}, n={n}")));
    }
    Ok(ConjugationLab::new(m, n)?.vtilde_diag(j))
}

/// `G_n⁰` for the model.
pub fn trace_g0(m: &ModelParams, n: i64, chi: &TestFunctionChi) -> Result<f64> {
    ConjugationLab::new(m, n)?.trace_g0(chi, 1e-13)
}

/// Indices `k` with `|k - n| <= n/5`.
pub fn localization_window(n: i64) -> IndexRange {
    IndexRange { lo: n - n / 5, hi: n + n / 5 }
}

/// Localization of `λ_k(J_n)` in `Δ_{k,n}^C = [l_n(k) ± (ρ_N + C n^{γ-1})]`
/// and the gap statistic, over `|k - n| <= n/5`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LocalizationReport {
    pub n: i64,
    pub c: f64,
    /// `max |λ_k(J_n) - l_n(k)|` over the window.
    pub loc_sup: f64,
    pub inside: bool,
    pub disjoint: bool,
    /// `max |λ_{k+N}(J_n) - λ_k(J_n) - N|` over the window.
    pub gap_sup: f64,
}

impl LocalizationReport {
    pub fn localization_ok(&self) -> bool {
        self.inside && self.disjoint
    }
}

/// Localization from a precomputed spectrum of `J_n⁺`.
pub fn localization_from_spectrum(m: &ModelParams, n: i64, c: f64, jn: &LatticeSpectrum) -> Result<LocalizationReport> {
    let stats = mean_and_deviation(m);
    if stats.mean.abs() > 1e-12 {
        return Err(Error::InvalidArgument("localization intervals assume a modulation with zero mean".into()));
    }
    let w = localization_window(n);
    let period = m.period() as i64;
    let lam = jn.first((w.hi + period) as usize);
    let at = |k: i64| lam[(k - 1) as usize];
    let radius = stats.rho + c * (n as f64).powf(m.gamma - 1.0);
    let mut loc_sup = 0.0f64;
    let mut gap_sup = 0.0f64;
    let mut disjoint = true;
    for k in w.iter() {
        let lk = predictor_l_n(k, n, m);
        loc_sup = loc_sup.max((at(k) - lk).abs());
        gap_sup = gap_sup.max((at(k + period) - at(k) - period as f64).abs());
        if k < w.hi {
            disjoint &= predictor_l_n(k + 1, n, m) - lk > 2.0 * radius;
        }
    }
    Ok(LocalizationReport { n, c, loc_sup, inside: loc_sup <= radius, disjoint, gap_sup })
}

/// Localization and gaps of `J_n⁺` with interval constant `C`.
pub fn localization_and_gaps(m: &ModelParams, n: i64, c: f64, tol: f64) -> Result<LocalizationReport> {
    let jn = decoupled_spectrum(&build_jn_plus(m, n)?, tol)?;
    localization_from_spectrum(m, n, c, &jn)
}

/// Smallest grid point `n0` and constant `C` such that every report with
/// `n >= n0` has `λ_k(J_n)` inside `Δ_{k,n}^C` with disjoint intervals,
/// and at least `min_points` grid points lie at or above `n0`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LocalizationFit {
    pub n0: i64,
    pub c: f64,
    pub points: usize,
}

pub fn fit_localization(m: &ModelParams, reports: &[LocalizationReport], min_points: usize) -> Option<LocalizationFit> {
    let rho = mean_and_deviation(m).rho;
    for start in 0..reports.len() {
        let tail = &reports[start..];
        if tail.len() < min_points {
            return None;
        }
        let c = tail.iter().map(|r| (r.loc_sup - rho).max(0.0) / (r.n as f64).powf(m.gamma - 1.0)).fold(0.0, f64::max);
        let ok = tail.iter().all(|r| {
            let radius = rho + c * (r.n as f64).powf(m.gamma - 1.0);
            r.loc_sup <= radius && disjoint_with_radius(m, r.n, radius)
        });
        if ok {
            return Some(LocalizationFit { n0: tail[0].n, c, points: tail.len() });
        }
    }
    None
}

fn disjoint_with_radius(m: &ModelParams, n: i64, radius: f64) -> bool {
    let w = localization_window(n);
    (w.lo..w.hi).all(|k| predictor_l_n(k + 1, n, m) - predictor_l_n(k, n, m) > 2.0 * radius)
}

/// One row of the conjugation experiment log.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ConjugationReport {
    pub n: i64,
    pub residual_norm: f64,
    /// `max |λ_k(J_n) - λ_k(L_n)|` over `|k - n| <= n/5`.
    pub transfer_sup: f64,
    pub gap_sup: f64,
    pub localization_ok: bool,
    pub g0: f64,
    pub vdiag_max: f64,
    /// Diagnostic: norm of `R_n` compressed to `|k - n| <= n/4`.
    pub interior_residual: f64,
}

impl ConjugationReport {
    pub const CSV_HEADER: &'static str = "n,residual,transfer,gap,G0,vdiag_max";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.n, self.residual_norm, self.transfer_sup, self.gap_sup, self.g0, self.vdiag_max
        )
    }
}

/// Full report for one `n`.
pub fn conjugation_report(
    m: &ModelParams,
    n: i64,
    c: f64,
    chi: &TestFunctionChi,
    tol: f64,
) -> Result<ConjugationReport> {
    let lab = ConjugationLab::new(m, n)?;
    let r = lab.residual_matrix();
    let residual_norm = symmetric_norm(&r, tol)?;
    let interior_residual = interior_norm(&lab, &r, tol)?;
    let jn = lab.jn_spectrum(tol)?;
    let loc = localization_from_spectrum(m, n, c, &jn)?;
    let ln = lab.ln_spectrum(tol)?;
    let w = localization_window(n);
    let (a, b) = (jn.first(w.hi as usize), ln.first(w.hi as usize));
    let transfer_sup = w.iter().map(|k| (a[(k - 1) as usize] - b[(k - 1) as usize]).abs()).fold(0.0, f64::max);
    let g0 = lab.g0_from(&ln, chi);
    Ok(ConjugationReport {
        n,
        residual_norm,
        transfer_sup,
        gap_sup: loc.gap_sup,
        localization_ok: loc.localization_ok(),
        g0,
        vdiag_max: lab.vtilde_diag_max(),
        interior_residual,
    })
}

fn interior_norm(lab: &ConjugationLab, r: &DMatrix<f64>, tol: f64) -> Result<f64> {
    let n = lab.n;
    let lo = (n - n / 4).max(lab.block.lo);
    let hi = (n + n / 4).min(lab.block.hi);
    let (p, len) = (lab.block.pos(lo), (hi - lo + 1) as usize);
    symmetric_norm(&r.view((p, p), (len, len)).into_owned(), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolve::jacobi_eigen;
    use crate::operators::{build_j0n_window, max_abs};
    use nalgebra::DVector;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn jc() -> ModelParams {
        ModelParams::jaynes_cummings(0.25, 0.5).unwrap()
    }

    #[test]
    fn expm_examples() {
        let z = DenseSkew::new(0, DMatrix::zeros(4, 4)).unwrap();
        assert_eq!(expm_skew(&z).unwrap().into_matrix(), DMatrix::identity(4, 4));
        let th = 0.7;
        let g = DenseSkew::new(0, DMatrix::from_row_slice(2, 2, &[0.0, th, -th, 0.0])).unwrap();
        let u = expm_skew(&g).unwrap().into_matrix();
        let expect = DMatrix::from_row_slice(2, 2, &[th.cos(), th.sin(), -th.sin(), th.cos()]);
        assert!((u - expect).abs().max() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = DMatrix::from_fn(30, 30, |_, _| rng.random_range(-1.0..1.0));
        let g = DenseSkew::new(0, &a - a.transpose()).unwrap();
        let u = expm_skew(&g).unwrap().into_matrix();
        let ui = expm(&(-g.matrix())).unwrap();
        assert!(((u * ui) - DMatrix::identity(30, 30)).abs().max() <= 1e-11);
    }

    // exp(G) for the tridiagonal generator through the Jacobi decomposition
    // A = Q diag(λ) Qᵀ: exp(G)(j,k) = Re(i^{j-k} Σ_m Q(j,m) Q(k,m) e^{-iλ_m}).
    fn expm_oracle(m: &ModelParams, n: i64, block: IndexRange) -> DMatrix<f64> {
        let (a, _) = build_an_bn(m, n, block).unwrap();
        let (vals, q) = jacobi_eigen(a.matrix()).unwrap();
        let s = block.len();
        let ipow = |p: i64| match p.rem_euclid(4) {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        DMatrix::from_fn(s, s, |j, k| {
            let sum: Complex64 = (0..s).map(|p| Complex64::from_polar(q[(j, p)] * q[(k, p)], -vals[p])).sum();
            (ipow(j as i64 - k as i64) * sum).re
        })
    }

    #[test]
    fn expm_matches_eigendecomposition_oracle() {
        let m = jc();
        let lab = ConjugationLab::new(&m, 20).unwrap();
        let u_ref = expm_oracle(&m, 20, lab.block);
        assert!((lab.u() - &u_ref).abs().max() < 1e-12);
        // residual through the oracle exponential
        let j0 = build_j0n_window(&m, 20, lab.block).unwrap().to_dense();
        let mut r = &u_ref * j0 * u_ref.transpose();
        for (i, &l) in lab.ln().iter().enumerate() {
            r[(i, i)] -= l;
        }
        let r = symmetrize(r);
        let (vals, _) = jacobi_eigen(&r).unwrap();
        let oracle = vals[0].abs().max(vals[vals.len() - 1].abs());
        assert!((residual_rn(&m, 20).unwrap() - oracle).abs() < 1e-10);
    }

    #[test]
    fn residual_vanishes_without_coupling() {
        let m = ModelParams::new(0.5, 0.0, 0.0, vec![-0.25, 0.25]).unwrap();
        assert!(residual_rn(&m, 40).unwrap() <= 1e-13);
    }

    #[test]
    fn ln_examples() {
        let nov = ModelParams::new(0.5, 0.5, 0.0, vec![0.0]).unwrap();
        let lab = ConjugationLab::new(&nov, 40).unwrap();
        let l = lab.ln_matrix().unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(lab.ln().to_vec()));
        assert!((l.matrix() - expect).abs().max() < 1e-13);
        let diag = ModelParams::new(0.5, 0.0, 0.0, vec![-0.25, 0.25]).unwrap();
        let lab = ConjugationLab::new(&diag, 40).unwrap();
        let l = lab.ln_matrix().unwrap();
        for (i, k) in lab.block.iter().enumerate() {
            assert!((l.matrix()[(i, i)] - (k as f64 + entry_v_n(k, 40, &diag))).abs() < 1e-14);
        }
        assert!(max_abs(&(l.matrix() - DMatrix::from_diagonal(&l.matrix().diagonal()))) == 0.0);
    }

    #[test]
    fn conjugation_preserves_spectrum() {
        let m = jc();
        for n in [32_i64, 64] {
            let lab = ConjugationLab::new(&m, n).unwrap();
            let j0 = build_j0n_window(&m, n, lab.block).unwrap().to_dense();
            let conj = symmetrize(lab.u() * &j0 * lab.u().transpose());
            let a = dense_symmetric_eigenvalues(&j0, 1e-13).unwrap();
            let b = dense_symmetric_eigenvalues(&conj, 1e-13).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10);
            }
            let ortho = crate::operators::orthogonality_defect(lab.u());
            assert!(ortho <= EXPM_ORTHO_TOL);
        }
    }

    #[test]
    fn chi_pair() {
        let chi = TestFunctionChi::default();
        assert_eq!(chi.chi(0.0), 1.0);
        assert_eq!(chi.chi_hat(1.0), 0.0);
        assert_eq!(chi.chi_hat(-2.0), 0.0);
        assert!(TestFunctionChi::new(0.0).is_err());
        // χ̂(t) = ∫ χ(λ) e^{-itλ} dλ / 2π by quadrature on [-L, L]; tail ≤ 4/(π L).
        let chi = TestFunctionChi::new(1.5).unwrap();
        let l = 4000.0;
        let steps = 800_000;
        let h = 2.0 * l / steps as f64;
        for &t in &[0.0, 0.3, 0.9, 1.2] {
            let mut s = 0.0;
            for i in 0..=steps {
                let x = -l + i as f64 * h;
                let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
                s += w * chi.chi(x) * (t * x).cos();
            }
            let got = s * h / (2.0 * std::f64::consts::PI);
            assert!((got - chi.chi_hat(t)).abs() < 2e-4, "t={t}: {got}");
        }
    }

    #[test]
    fn trace_examples() {
        let chi = TestFunctionChi::default();
        let nov = ModelParams::new(0.5, 0.5, 0.0, vec![0.0]).unwrap();
        assert!(trace_g0(&nov, 64, &chi).unwrap().abs() < 1e-13);
        let diag = ModelParams::new(0.5, 0.0, 0.0, vec![-0.25, 0.25]).unwrap();
        let n = 64;
        let l = predictor_l(n, &diag);
        let direct: f64 = (1..=3 * n)
            .map(|k| {
                let lk = predictor_l_n(k, n, &diag);
                chi.chi(lk + entry_v_n(k, n, &diag) - l) - chi.chi(lk - l)
            })
            .sum();
        assert!((trace_g0(&diag, n, &chi).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn cutoff_trace_tracks_g0() {
        let m = jc();
        let chi = TestFunctionChi::default();
        let mut scaled = Vec::new();
        for n in [32_i64, 64, 128, 256] {
            let lab = ConjugationLab::new(&m, n).unwrap();
            let g0 = lab.trace_g0(&chi, 1e-13).unwrap();
            let gn = lab.trace_gn_cutoff(&chi).unwrap();
            scaled.push((gn - g0).abs() / (n as f64).powf(-m.gamma));
        }
        assert!(scaled.iter().all(|&c| c < 1.0), "{scaled:?}");
    }

    #[test]
    fn vtilde_examples() {
        let nov = ModelParams::new(0.5, 0.5, 0.0, vec![0.0]).unwrap();
        assert_eq!(vtilde_diag(&nov, 64, 66).unwrap(), 0.0);
        let diag = ModelParams::new(0.5, 0.0, 0.0, vec![-0.25, 0.25]).unwrap();
        for j in 60..=68 {
            assert_eq!(vtilde_diag(&diag, 64, j).unwrap(), entry_v_n(j, 64, &diag));
        }
        assert!(vtilde_diag(&diag, 64, 80).is_err());
    }

    #[test]
    fn localization_diagonal_model() {
        let m = ModelParams::new(0.5, 0.0, 0.0, vec![-0.25, 0.25]).unwrap();
        let n = 100;
        let r = localization_and_gaps(&m, n, 1.0, 1e-12).unwrap();
        assert!(r.inside && r.disjoint);
        // λ_k = k + v_n(k): the gap statistic is max |v_n(k+2) - v_n(k)|,
        // zero on the plateau and nonzero only in the cut-off band.
        let w = localization_window(n);
        let direct = w.iter().map(|k| (entry_v_n(k + 2, n, &m) - entry_v_n(k, n, &m)).abs()).fold(0.0, f64::max);
        assert!((r.gap_sup - direct).abs() < 1e-12);
        let plateau = (n - n / 6 + 2..=n + n / 6 - 2)
            .map(|k| (entry_v_n(k + 2, n, &m) - entry_v_n(k, n, &m)).abs())
            .fold(0.0, f64::max);
        assert_eq!(plateau, 0.0);
    }
}
