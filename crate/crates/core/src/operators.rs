//! Finite realizations of `J⁺`, `J_n⁺`, `J_{0,n}⁺`, `J̃_n⁺` and of the
//! generator pair `A_n⁺`, `G = iB_n⁺`.
//!
//! `J_n⁺` is exactly block diagonal: a tridiagonal block on `[1, K]` and a
//! diagonal tail with entries `k` for `k > K`. Everything that involves
//! `a_n` is supported in a window of length about `4n/5`, and dense work is
//! done on that window only.

use crate::error::{Error, Result};
use crate::sequences::{a1n, entry_a, entry_a_n, entry_d, entry_d_n, entry_v_n, support_a_n, support_v_n, ModelParams};
use nalgebra::DMatrix;
use std::fmt::Write as _;

/// Inclusive range of lattice indices `lo..=hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexRange {
    pub lo: i64,
    pub hi: i64,
}

impl IndexRange {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if hi < lo {
            return Err(Error::InvalidArgument(format!("empty index range [{lo}, {hi}]")));
        }
        Ok(IndexRange { lo, hi })
    }
    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn contains(&self, k: i64) -> bool {
        self.lo <= k && k <= self.hi
    }
    pub fn iter(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }
    /// Position of lattice index `k` inside the range.
    pub fn pos(&self, k: i64) -> usize {
        debug_assert!(self.contains(k));
        (k - self.lo) as usize
    }
}

/// Symmetric tridiagonal block whose first row is lattice index `offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalWindow {
    offset: i64,
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl TridiagonalWindow {
    pub fn new(offset: i64, diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidArgument("tridiagonal window needs size >= 1".into()));
        }
        if offdiag.len() + 1 != diag.len() {
            return Err(Error::InvalidArgument(format!(
                "offdiag length {} must be diag length {} minus one",
                offdiag.len(),
                diag.len()
            )));
        }
        if diag.iter().chain(offdiag.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite matrix entry".into()));
        }
        Ok(TridiagonalWindow { offset, diag, offdiag })
    }

    /// Section on `range` with diagonal `d(k)` and off-diagonal `a(k)` at `(k, k+1)`.
    pub fn section(range: IndexRange, d: impl Fn(i64) -> f64, a: impl Fn(i64) -> f64) -> Result<Self> {
        let diag = range.iter().map(&d).collect();
        let offdiag = (range.lo..range.hi).map(&a).collect();
        Self::new(range.lo, diag, offdiag)
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }
    pub fn len(&self) -> usize {
        self.diag.len()
    }
    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }
    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }
    pub fn range(&self) -> IndexRange {
        IndexRange { lo: self.offset, hi: self.offset + self.diag.len() as i64 - 1 }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        for (i, &e) in self.offdiag.iter().enumerate() {
            m[(i, i + 1)] = e;
            m[(i + 1, i)] = e;
        }
        m
    }

    /// CSV with header `k,diag,offdiag`; the last row has an empty `offdiag`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,diag,offdiag\n");
        for (i, d) in self.diag.iter().enumerate() {
            let k = self.offset + i as i64;
            match self.offdiag.get(i) {
                Some(e) => writeln!(s, "{k},{d},{e}").unwrap(),
                None => writeln!(s, "{k},{d},").unwrap(),
            }
        }
        s
    }
}

/// `J_n⁺`-type operator split into a block on `[1, K]` and the diagonal tail
/// `{k : k >= tail_start}` with entries exactly `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoupledJn {
    pub block: TridiagonalWindow,
    pub tail_start: i64,
}

impl DecoupledJn {
    /// Builds the decoupled form of the half-line operator with diagonal
    /// `d(k)` and off-diagonal `a(k)`, given an index `reach` beyond which
    /// `a(k) = 0` and `d(k) = k` are known to hold.
    fn from_entries(reach: i64, d: impl Fn(i64) -> f64, a: impl Fn(i64) -> f64) -> Result<Self> {
        let mut k_dec = 1;
        for k in 1..=reach {
            if a(k) != 0.0 {
                k_dec = k_dec.max(k + 1);
            }
            if d(k) != k as f64 {
                k_dec = k_dec.max(k);
            }
        }
        let block = TridiagonalWindow::section(IndexRange { lo: 1, hi: k_dec }, d, a)?;
        Ok(DecoupledJn { block, tail_start: k_dec + 1 })
    }

    /// Last block index `K`.
    pub fn k_dec(&self) -> i64 {
        self.tail_start - 1
    }
}

/// Dirichlet section of `J⁺` on `[1, size]`.
pub fn build_j_plus(m: &ModelParams, size: usize) -> Result<TridiagonalWindow> {
    if size == 0 {
        return Err(Error::InvalidArgument("section size must be >= 1".into()));
    }
    let r = IndexRange::new(1, size as i64)?;
    TridiagonalWindow::section(r, |k| entry_d(k, m), |k| entry_a(k, m))
}

fn reach_for(n: i64) -> i64 {
    n + (2 * n) / 5 + 2
}

/// Exact decoupled `J_n⁺`.
pub fn build_jn_plus(m: &ModelParams, n: i64) -> Result<DecoupledJn> {
    if n < 5 {
        return Err(Error::InvalidArgument(format!("n={n} must be >= 5")));
    }
    DecoupledJn::from_entries(reach_for(n), |k| entry_d_n(k, n, m), |k| entry_a_n(k, n, m))
}

/// Section of `J_n⁺` on `[1, size]`, without decoupling.
pub fn build_jn_section(m: &ModelParams, n: i64, size: usize) -> Result<TridiagonalWindow> {
    let r = IndexRange::new(1, size as i64)?;
    TridiagonalWindow::section(r, |k| entry_d_n(k, n, m), |k| entry_a_n(k, n, m))
}

/// `J_{0,n}` on an arbitrary lattice window: diagonal `k`, off-diagonal `a_n(k)`.
pub fn build_j0n_window(m: &ModelParams, n: i64, range: IndexRange) -> Result<TridiagonalWindow> {
    TridiagonalWindow::section(range, |k| k as f64, |k| entry_a_n(k, n, m))
}

/// Section of `J_{0,n}⁺` on `[1, size]`.
pub fn build_j0n_plus(m: &ModelParams, n: i64, size: usize) -> Result<TridiagonalWindow> {
    if size == 0 {
        return Err(Error::InvalidArgument("section size must be >= 1".into()));
    }
    build_j0n_window(m, n, IndexRange::new(1, size as i64)?)
}

/// `J̃_n⁺`: off-diagonal `a(k)` for `n - C1 n^γ <= k <= n + C1 n^γ`, `a_n(k)` elsewhere.
pub fn build_jtilde_plus(m: &ModelParams, n: i64, c1: f64) -> Result<DecoupledJn> {
    if n < 5 {
        return Err(Error::InvalidArgument(format!("n={n} must be >= 5")));
    }
    if !(c1 >= 0.0) || !c1.is_finite() {
        return Err(Error::InvalidArgument(format!("C1={c1} must be finite and >= 0")));
    }
    let half = c1 * (n as f64).powf(m.gamma);
    let (wlo, whi) = (n as f64 - half, n as f64 + half);
    let off = move |k: i64| {
        let kf = k as f64;
        if k >= 1 && wlo <= kf && kf <= whi {
            entry_a(k, m)
        } else {
            entry_a_n(k, n, m)
        }
    };
    let reach = reach_for(n).max(whi.ceil() as i64 + 2);
    DecoupledJn::from_entries(reach, |k| entry_d_n(k, n, m), off)
}

/// Smallest window holding `n`, the support of `v_n`, and the support of
/// `a_n` together with the row after it.
pub fn support_block(m: &ModelParams, n: i64) -> IndexRange {
    let (mut lo, mut hi) = (n, n);
    if let Some((a, b)) = support_a_n(n, m) {
        lo = lo.min(a);
        hi = hi.max(b + 1);
    }
    if let Some((a, b)) = support_v_n(n, m) {
        lo = lo.min(a);
        hi = hi.max(b);
    }
    IndexRange { lo, hi }
}

fn check_symmetric(m: &DMatrix<f64>, sign: f64, tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    let n = m.nrows();
    for i in 0..n {
        for j in 0..=i {
            let (x, y) = (m[(i, j)], m[(j, i)]);
            if !x.is_finite() || (x - sign * y).abs() > tol * (1.0 + x.abs()) {
                return Err(Error::InvalidArgument(format!("matrix symmetry violated at ({i},{j})")));
            }
        }
    }
    Ok(())
}

/// Dense real symmetric block on lattice indices `offset..offset+size`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymmetric {
    offset: i64,
    m: DMatrix<f64>,
}

/// Dense real antisymmetric block.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSkew {
    offset: i64,
    m: DMatrix<f64>,
}

/// Dense real orthogonal block.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOrthogonal {
    offset: i64,
    m: DMatrix<f64>,
}

macro_rules! dense_common {
    ($t:ty) => {
        impl $t {
            pub fn offset(&self) -> i64 {
                self.offset
            }
            pub fn size(&self) -> usize {
                self.m.nrows()
            }
            pub fn matrix(&self) -> &DMatrix<f64> {
                &self.m
            }
            pub fn into_matrix(self) -> DMatrix<f64> {
                self.m
            }
            pub fn range(&self) -> IndexRange {
                IndexRange { lo: self.offset, hi: self.offset + self.m.nrows() as i64 - 1 }
            }
        }
    };
}
dense_common!(DenseSymmetric);
dense_common!(DenseSkew);
dense_common!(DenseOrthogonal);

impl DenseSymmetric {
    /// Symmetrizes exactly after checking symmetry to relative `1e-12`.
    pub fn new(offset: i64, m: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&m, 1.0, 1e-12)?;
        let m = (&m + m.transpose()) * 0.5;
        Ok(DenseSymmetric { offset, m })
    }
}

impl DenseSkew {
    pub fn new(offset: i64, m: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&m, -1.0, 1e-12)?;
        let m = (&m - m.transpose()) * 0.5;
        Ok(DenseSkew { offset, m })
    }
}

/// `max |MᵀM - I|`.
pub fn orthogonality_defect(m: &DMatrix<f64>) -> f64 {
    let p = m.transpose() * m;
    let n = p.nrows();
    let mut d = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let e = if i == j { p[(i, j)] - 1.0 } else { p[(i, j)] };
            d = d.max(e.abs());
        }
    }
    d
}

impl DenseOrthogonal {
    /// Accepts `m` if `max |MᵀM - I| <= tol`.
    pub fn with_tolerance(offset: i64, m: DMatrix<f64>, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidArgument("matrix must be square".into()));
        }
        let defect = orthogonality_defect(&m);
        if !(defect <= tol) {
            return Err(Error::OrthogonalityCertificate { defect });
        }
        Ok(DenseOrthogonal { offset, m })
    }

    pub fn new(offset: i64, m: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(offset, m, 1e-12)
    }
}

/// `A_n⁺` (zero diagonal, off-diagonal `a_n(k)`) and `G = iB_n⁺`
/// (`G(k,k+1) = -a_n(k)`, `G(k+1,k) = a_n(k)`) on `block`.
///
/// The block must hold the support of `a_n` and the row after it.
pub fn build_an_bn(m: &ModelParams, n: i64, block: IndexRange) -> Result<(DenseSymmetric, DenseSkew)> {
    if let Some((lo, hi)) = support_a_n(n, m) {
        if block.lo > lo || block.hi < hi + 1 {
            return Err(Error::BlockTooSmall { need_lo: lo, need_hi: hi + 1, got_lo: block.lo, got_hi: block.hi });
        }
    }
    let s = block.len();
    let mut a = DMatrix::zeros(s, s);
    let mut g = DMatrix::zeros(s, s);
    for i in 0..s.saturating_sub(1) {
        let x = entry_a_n(block.lo + i as i64, n, m);
        a[(i, i + 1)] = x;
        a[(i + 1, i)] = x;
        g[(i, i + 1)] = -x;
        g[(i + 1, i)] = x;
    }
    Ok((DenseSymmetric { offset: block.lo, m: a }, DenseSkew { offset: block.lo, m: g }))
}

/// Diagonal of `Λ` on `block`.
pub fn lattice_diag(block: IndexRange) -> DMatrix<f64> {
    let s = block.len();
    DMatrix::from_fn(s, s, |i, j| if i == j { (block.lo + i as i64) as f64 } else { 0.0 })
}

/// `[diag(d), X]`, entrywise `(d_i - d_j) X(i, j)`.
pub fn commutator_diag_left(d: &[f64], x: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (d[i] - d[j]) * x[(i, j)])
}

/// Diagonal of `Λ` on `block` as a vector.
pub fn lattice_values(block: IndexRange) -> Vec<f64> {
    block.iter().map(|k| k as f64).collect()
}

/// `XY - YX`.
pub fn commutator(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    x * y - y * x
}

/// `2 a_{1,n}(Λ)` on `block`.
pub fn two_a1n_diag(m: &ModelParams, n: i64, block: IndexRange) -> DMatrix<f64> {
    let s = block.len();
    DMatrix::from_fn(s, s, |i, j| if i == j { 2.0 * a1n(block.lo + i as i64, n, m) } else { 0.0 })
}

/// `diag(v_n(k))` on `block`.
pub fn vn_diag(m: &ModelParams, n: i64, block: IndexRange) -> Vec<f64> {
    block.iter().map(|k| entry_v_n(k, n, m)).collect()
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
}
