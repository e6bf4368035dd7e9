//! Points of the regular set: Hermitian operators of signature `(n, n)`,
//! their pairwise product spectra and the causal Lagrangian.

use smallvec::SmallVec;

use crate::error::{CfsError, Result};
use crate::linalg::{
    c64, eig2, eigen_decomposition, eigenvalues, hermitian_eigen, hermitian_part, hermiticity_defect, reassemble,
    CMatrix, C64,
};

/// Margin separating the retained eigenvalues from zero.
pub const ETA_SIG: f64 = 1e-9;
/// Entrywise Hermiticity tolerance for entries of order one.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Relative threshold below which a product eigenvalue is treated as zero.
const ZERO_SNAP: f64 = 1e-13;

pub type Spectrum = SmallVec<[C64; 8]>;

/// A Hermitian `f x f` matrix with exactly `n` positive and `n` negative
/// eigenvalues; all others vanish.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    matrix: CMatrix,
    spin_dim: usize,
}

/// Counts of eigenvalues above `tol`, below `-tol` and in between.
fn signature_counts(values: &[f64], tol: f64) -> (usize, usize, usize) {
    let pos = values.iter().filter(|&&v| v > tol).count();
    let neg = values.iter().filter(|&&v| v < -tol).count();
    (pos, neg, values.len() - pos - neg)
}

impl Operator {
    pub fn new(matrix: CMatrix, spin_dim: usize) -> Result<Self> {
        let f = matrix.nrows();
        if matrix.ncols() != f {
            return Err(CfsError::DimensionMismatch { expected: f, got: matrix.ncols() });
        }
        if spin_dim == 0 || 2 * spin_dim > f {
            return Err(CfsError::InvalidInput(format!("spin dimension {spin_dim} incompatible with matrix size {f}")));
        }
        let scale = crate::linalg::max_abs(&matrix).max(1.0);
        let defect = hermiticity_defect(&matrix);
        if defect > HERMITIAN_TOL * scale {
            return Err(CfsError::NotHermitian { defect });
        }
        let matrix = hermitian_part(&matrix);
        let eig = hermitian_eigen(&matrix);
        let spectral = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let (pos, neg, zero) = signature_counts(&eig.values, ETA_SIG * spectral);
        if pos != spin_dim || neg != spin_dim {
            return Err(CfsError::Signature { positive: pos, negative: neg, zero, spin_dim });
        }
        Ok(Self { matrix, spin_dim })
    }

    pub fn diagonal(entries: &[f64], spin_dim: usize) -> Result<Self> {
        let m =
            CMatrix::from_fn(
                entries.len(),
                entries.len(),
                |i, j| {
                    if i == j {
                        c64(entries[i], 0.0)
                    } else {
                        c64(0.0, 0.0)
                    }
                },
            );
        Self::new(m, spin_dim)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn spin_dim(&self) -> usize {
        self.spin_dim
    }

    pub fn trace(&self) -> f64 {
        crate::linalg::trace(&self.matrix).re
    }

    /// `lambda * x`; a negative factor swaps the two eigenvalue sectors,
    /// which preserves the signature.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(CfsError::InvalidInput(format!("scale factor {lambda}")));
        }
        Ok(Self { matrix: &self.matrix * c64(lambda, 0.0), spin_dim: self.spin_dim })
    }

    /// `u x u^†` for a unitary `u`.
    pub fn conjugated(&self, u: &CMatrix) -> Result<Self> {
        Self::new(u * &self.matrix * u.adjoint(), self.spin_dim)
    }

    pub fn prepare(&self) -> Prepared {
        Prepared::from_hermitian(&self.matrix, self.spin_dim)
    }
}

/// Spectral decomposition restricted to the `2n`-dimensional range:
/// `x = U diag(values) U^†` with `U` an `f x 2n` isometry.
#[derive(Clone, Debug)]
pub struct Prepared {
    dim: usize,
    spin_dim: usize,
    values: SmallVec<[f64; 8]>,
    /// Column-major `f x 2n`.
    vectors: Vec<C64>,
}

impl Prepared {
    pub fn from_parts(values: Vec<f64>, vectors: &CMatrix, spin_dim: usize) -> Self {
        assert_eq!(values.len(), 2 * spin_dim);
        assert_eq!(vectors.ncols(), 2 * spin_dim);
        Self {
            dim: vectors.nrows(),
            spin_dim,
            values: values.into_iter().collect(),
            vectors: vectors.as_slice().to_vec(),
        }
    }

    /// Keeps the `n` smallest and `n` largest eigenvalues of a Hermitian
    /// matrix without checking the signature.
    pub fn from_hermitian(m: &CMatrix, spin_dim: usize) -> Self {
        let eig = hermitian_eigen(m);
        let f = m.nrows();
        let picks: Vec<usize> = (0..spin_dim).chain(f - spin_dim..f).collect();
        let values = picks.iter().map(|&k| eig.values[k]).collect();
        let vectors = CMatrix::from_fn(f, 2 * spin_dim, |r, k| eig.vectors[(r, picks[k])]);
        Self::from_parts(values, &vectors, spin_dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spin_dim(&self) -> usize {
        self.spin_dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> CMatrix {
        CMatrix::from_column_slice(self.dim, 2 * self.spin_dim, &self.vectors)
    }

    #[inline]
    fn vec_entry(&self, row: usize, k: usize) -> C64 {
        self.vectors[k * self.dim + row]
    }

    pub fn matrix(&self) -> CMatrix {
        reassemble(&self.values, &self.vectors())
    }

    pub fn trace(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Largest eigenvalue modulus.
    pub fn norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Projector onto the range as an `f x f` matrix.
    pub fn range_projector(&self) -> CMatrix {
        let ones = vec![1.0; 2 * self.spin_dim];
        reassemble(&ones, &self.vectors())
    }

    pub fn to_operator(&self) -> Result<Operator> {
        Operator::new(self.matrix(), self.spin_dim)
    }
}

/// Row-major `2n x 2n` matrix `D_x G D_y G^†` with `G = U_x^† U_y`, whose
/// spectrum is the nonzero spectrum of `xy` padded by zeros.
fn reduced_product(x: &Prepared, y: &Prepared) -> SmallVec<[C64; 16]> {
    let r = 2 * x.spin_dim;
    let f = x.dim;
    let mut g: SmallVec<[C64; 16]> = SmallVec::from_elem(c64(0.0, 0.0), r * r);
    for k in 0..r {
        for m in 0..r {
            let mut acc = c64(0.0, 0.0);
            for a in 0..f {
                acc += x.vec_entry(a, k).conj() * y.vec_entry(a, m);
            }
            g[k * r + m] = acc;
        }
    }
    let mut b: SmallVec<[C64; 16]> = SmallVec::from_elem(c64(0.0, 0.0), r * r);
    for k in 0..r {
        for l in 0..r {
            let mut acc = c64(0.0, 0.0);
            for m in 0..r {
                acc += g[k * r + m] * y.values[m] * g[l * r + m].conj();
            }
            b[k * r + l] = acc * x.values[k];
        }
    }
    b
}

/// `reduced_product` for `2n = 2`, kept on the stack.
#[inline]
fn reduced_product_2(x: &Prepared, y: &Prepared) -> [C64; 4] {
    let f = x.dim;
    let (xv, yv) = (&x.vectors, &y.vectors);
    let mut g = [c64(0.0, 0.0); 4];
    for a in 0..f {
        let (x0, x1) = (xv[a].conj(), xv[f + a].conj());
        let (y0, y1) = (yv[a], yv[f + a]);
        g[0] += x0 * y0;
        g[1] += x0 * y1;
        g[2] += x1 * y0;
        g[3] += x1 * y1;
    }
    let (d0, d1) = (y.values[0], y.values[1]);
    let row = |k: usize, l: usize| (g[2 * k] * g[2 * l].conj()) * d0 + (g[2 * k + 1] * g[2 * l + 1].conj()) * d1;
    [row(0, 0) * x.values[0], row(0, 1) * x.values[0], row(1, 0) * x.values[1], row(1, 1) * x.values[1]]
}

fn check_compatible(x: &Prepared, y: &Prepared) -> Result<()> {
    if x.dim != y.dim {
        return Err(CfsError::DimensionMismatch { expected: x.dim, got: y.dim });
    }
    if x.spin_dim != y.spin_dim {
        return Err(CfsError::DimensionMismatch { expected: x.spin_dim, got: y.spin_dim });
    }
    Ok(())
}

/// The `2n` eigenvalues of `xy` on the range, unsorted.
pub fn raw_spectrum(x: &Prepared, y: &Prepared) -> Result<Spectrum> {
    check_compatible(x, y)?;
    let r = 2 * x.spin_dim;
    if r == 2 {
        let b = reduced_product_2(x, y);
        return Ok(eig2(b[0], b[1], b[2], b[3]).into_iter().collect());
    }
    let b = reduced_product(x, y);
    let m = CMatrix::from_row_slice(r, r, &b);
    Ok(eigenvalues(&m)?.into_iter().collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProductSpectrum {
    pub eigenvalues: Vec<C64>,
    pub rank: usize,
}

/// Orders by modulus, real part, imaginary part, all descending; values
/// within `tol` of each other count as tied in that key.
fn spectrum_before(a: &C64, b: &C64, tol: f64) -> bool {
    let (ma, mb) = (a.norm(), b.norm());
    if (ma - mb).abs() > tol {
        return ma > mb;
    }
    if (a.re - b.re).abs() > tol {
        return a.re > b.re;
    }
    a.im > b.im
}

pub fn sort_spectrum(values: &mut [C64], tol: f64) {
    // Insertion sort: the tolerant comparison is not a total order.
    for i in 1..values.len() {
        let mut j = i;
        while j > 0 && spectrum_before(&values[j], &values[j - 1], tol) {
            values.swap(j, j - 1);
            j -= 1;
        }
    }
}

pub fn product_spectrum_prepared(x: &Prepared, y: &Prepared) -> Result<ProductSpectrum> {
    let mut vals = raw_spectrum(x, y)?;
    let scale = x.norm() * y.norm();
    for v in vals.iter_mut() {
        if v.norm() <= ZERO_SNAP * scale {
            *v = c64(0.0, 0.0);
        }
    }
    sort_spectrum(&mut vals, 1e-12 * scale);
    let rank = vals.iter().filter(|v| v.norm() > 0.0).count();
    Ok(ProductSpectrum { eigenvalues: vals.into_vec(), rank })
}

pub fn product_spectrum(x: &Operator, y: &Operator) -> Result<ProductSpectrum> {
    product_spectrum_prepared(&x.prepare(), &y.prepare())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams {
    pub kappa: f64,
    pub smoothing_eta: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self { kappa: 0.0, smoothing_eta: 0.0 }
    }
}

impl KernelParams {
    pub fn new(kappa: f64, smoothing_eta: f64) -> Result<Self> {
        if !(kappa >= 0.0) || !(smoothing_eta >= 0.0) {
            return Err(CfsError::InvalidInput(format!(
                "kappa {kappa} and smoothing {smoothing_eta} must be nonnegative"
            )));
        }
        Ok(Self { kappa, smoothing_eta })
    }

    pub fn with_kappa(kappa: f64) -> Self {
        Self { kappa, smoothing_eta: 0.0 }
    }
}

/// `sqrt(|z|^2 + eta^2) - eta`, written to avoid cancellation.
#[inline]
pub fn smoothed_modulus(z: C64, eta: f64) -> f64 {
    let q = z.norm_sqr();
    if eta == 0.0 {
        return q.sqrt();
    }
    q / ((q + eta * eta).sqrt() + eta)
}

/// `(1/4n) sum_{i,j} (a_i - a_j)^2` over the `2n` moduli.
#[inline]
pub fn lagrangian_from_moduli(a: &[f64]) -> f64 {
    let n2 = a.len() as f64;
    let mut acc = 0.0;
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            let d = a[i] - a[j];
            acc += d * d;
        }
    }
    // Each unordered pair appears twice in the double sum.
    2.0 * acc / (2.0 * n2)
}

fn moduli(vals: &[C64], eta: f64) -> SmallVec<[f64; 8]> {
    vals.iter().map(|&z| smoothed_modulus(z, eta)).collect()
}

/// `L + kappa |xy|^2` from precomputed product eigenvalues.
pub fn lagrangian_from_spectrum(vals: &[C64], params: &KernelParams) -> f64 {
    let a = moduli(vals, params.smoothing_eta);
    let l = lagrangian_from_moduli(&a);
    if params.kappa == 0.0 {
        return l;
    }
    let w: f64 = a.iter().sum();
    l + params.kappa * w * w
}

/// Total order on prepared points; used to evaluate pair functions in a
/// fixed argument order so they are bitwise symmetric.
fn canonical_order(x: &Prepared, y: &Prepared) -> std::cmp::Ordering {
    x.values
        .iter()
        .zip(&y.values)
        .map(|(a, b)| a.total_cmp(b))
        .chain(x.vectors.iter().zip(&y.vectors).flat_map(|(a, b)| [a.re.total_cmp(&b.re), a.im.total_cmp(&b.im)]))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// `L_kappa(x, y)`; bitwise symmetric in its arguments.
pub fn pair_lagrangian(x: &Prepared, y: &Prepared, params: &KernelParams) -> Result<f64> {
    let (x, y) = if canonical_order(x, y).is_gt() { (y, x) } else { (x, y) };
    if x.spin_dim == 1 && y.spin_dim == 1 && x.dim == y.dim {
        let b = reduced_product_2(x, y);
        let [l0, l1] = eig2(b[0], b[1], b[2], b[3]);
        let a0 = smoothed_modulus(l0, params.smoothing_eta);
        let a1 = smoothed_modulus(l1, params.smoothing_eta);
        let d = a0 - a1;
        let w = a0 + a1;
        return Ok(0.5 * d * d + params.kappa * w * w);
    }
    Ok(lagrangian_from_spectrum(&raw_spectrum(x, y)?, params))
}

pub fn pair_spectral_weight(x: &Prepared, y: &Prepared, eta: f64) -> Result<f64> {
    Ok(moduli(&raw_spectrum(x, y)?, eta).iter().sum())
}

pub fn spectral_weight(x: &Operator, y: &Operator, params: &KernelParams) -> Result<f64> {
    pair_spectral_weight(&x.prepare(), &y.prepare(), params.smoothing_eta)
}

pub fn lagrangian(x: &Operator, y: &Operator, params: &KernelParams) -> Result<f64> {
    pair_lagrangian(&x.prepare(), &y.prepare(), params)
}

/// Gradient of `y -> L_kappa(x, y)` as a Hermitian matrix in the pairing
/// `Re tr(G dy)`, together with the value.
///
/// Fails with `Degenerate` when two product eigenvalues are closer than
/// `gap_tol` relative to the spectrum scale.
pub fn lagrangian_gradient(x: &Prepared, y: &Prepared, params: &KernelParams, gap_tol: f64) -> Result<(f64, CMatrix)> {
    check_compatible(x, y)?;
    let r = 2 * x.spin_dim;
    let f = x.dim;
    let b = CMatrix::from_row_slice(r, r, &reduced_product(x, y));
    let dec = eigen_decomposition(&b, gap_tol)?;
    let eta = params.smoothing_eta;
    let a = moduli(&dec.values, eta);
    let total: f64 = a.iter().sum();
    let value = lagrangian_from_spectrum(&dec.values, params);
    let ux = x.vectors();
    let mut m = CMatrix::zeros(f, f);
    for k in 0..r {
        let lam = dec.values[k];
        let s = (lam.norm_sqr() + eta * eta).sqrt();
        if s == 0.0 {
            continue;
        }
        let g = 2.0 * a[k] - total / x.spin_dim as f64 + 2.0 * params.kappa * total;
        let coef = lam.conj() * (g / s);
        let p = &ux * dec.right.column(k);
        // q = (left_k D_x) U_x^†
        let mut q = nalgebra::DVector::<C64>::zeros(f);
        for col in 0..f {
            let mut acc = c64(0.0, 0.0);
            for mm in 0..r {
                acc += dec.left[(k, mm)] * x.values[mm] * ux[(col, mm)].conj();
            }
            q[col] = acc;
        }
        for i in 0..f {
            for j in 0..f {
                m[(i, j)] += coef * p[i] * q[j];
            }
        }
    }
    Ok((value, hermitian_part(&m)))
}

/// Projects a Hermitian matrix into the regular set with trace `c`.
///
/// The `n` largest eigenvalues are clamped to `>= ETA_SIG`, the `n`
/// smallest to `<= -ETA_SIG`, the rest are zeroed, and a uniform shift of
/// the retained eigenvalues fixes the trace.
pub fn project_to_freg(a: &CMatrix, spin_dim: usize, trace_target: f64) -> Result<Operator> {
    let f = a.nrows();
    if a.ncols() != f {
        return Err(CfsError::DimensionMismatch { expected: f, got: a.ncols() });
    }
    if spin_dim == 0 || 2 * spin_dim > f {
        return Err(CfsError::InvalidInput(format!("spin dimension {spin_dim} incompatible with matrix size {f}")));
    }
    let scale = crate::linalg::max_abs(a).max(1.0);
    let defect = hermiticity_defect(a);
    if defect > HERMITIAN_TOL * scale {
        return Err(CfsError::NotHermitian { defect });
    }
    let eig = hermitian_eigen(a);
    let n = spin_dim;
    let picks: Vec<usize> = (0..n).chain(f - n..f).collect();
    let retained_max = picks.iter().fold(0.0f64, |m, &k| m.max(eig.values[k].abs()));
    if retained_max <= ETA_SIG {
        return Err(CfsError::Degenerate("no eigenvalue exceeds the signature margin".into()));
    }
    let mut vals: Vec<f64> = Vec::with_capacity(2 * n);
    for (slot, &k) in picks.iter().enumerate() {
        let v = eig.values[k];
        vals.push(if slot < n { v.min(-ETA_SIG) } else { v.max(ETA_SIG) });
    }
    let shift = (trace_target - vals.iter().sum::<f64>()) / (2 * n) as f64;
    for v in vals.iter_mut() {
        *v += shift;
    }
    if vals[..n].iter().any(|&v| v > -ETA_SIG) || vals[n..].iter().any(|&v| v < ETA_SIG) {
        return Err(CfsError::Infeasible(format!("trace {trace_target} not reachable with signature ({n}, {n})")));
    }
    let vectors = CMatrix::from_fn(f, 2 * n, |r, k| eig.vectors[(r, picks[k])]);
    // Stored operators are exactly Hermitian so text round trips are exact.
    let matrix = hermitian_part(&reassemble(&vals, &vectors));
    Ok(Operator { matrix, spin_dim })
}

/// Orthogonal projection of a Hermitian direction onto the tangent space at
/// `x` of the trace-`tr x` regular set.
pub fn tangent_project(x: &Prepared, a: &CMatrix) -> CMatrix {
    let f = x.dim;
    let h = hermitian_part(a);
    let p = x.range_projector();
    let q = CMatrix::identity(f, f) - &p;
    let mut t = &h - &q * &h * &q;
    let tr = crate::linalg::trace(&t).re / (2 * x.spin_dim) as f64;
    t -= &p * c64(tr, 0.0);
    t
}

/// Frobenius-orthonormal basis of the tangent space at `x`.
pub fn tangent_basis(x: &Prepared) -> Vec<CMatrix> {
    let f = x.dim;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut raw = Vec::with_capacity(f * f);
    for k in 0..f {
        raw.push(CMatrix::from_fn(f, f, |i, j| c64(f64::from(u8::from(i == k && j == k)), 0.0)));
        for l in (k + 1)..f {
            let mut re = CMatrix::zeros(f, f);
            re[(k, l)] = c64(s, 0.0);
            re[(l, k)] = c64(s, 0.0);
            let mut im = CMatrix::zeros(f, f);
            im[(k, l)] = c64(0.0, s);
            im[(l, k)] = c64(0.0, -s);
            raw.push(re);
            raw.push(im);
        }
    }
    let mut basis: Vec<CMatrix> = Vec::new();
    for b in raw {
        let mut t = tangent_project(x, &b);
        for e in &basis {
            let p = crate::linalg::frobenius_inner(e, &t);
            t -= e * c64(p, 0.0);
        }
        let norm = crate::linalg::frobenius_norm(&t);
        if norm > 1e-8 {
            basis.push(t * c64(1.0 / norm, 0.0));
        }
    }
    basis
}
