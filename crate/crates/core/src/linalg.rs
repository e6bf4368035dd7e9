//! Dense complex linear algebra used throughout the crate.

use nalgebra::{Complex, DMatrix, Schur, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CfsError, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// Largest entrywise deviation `|a_ij - conj(a_ji)|`.
pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut d = 0.0f64;
    for i in 0..n {
        for j in i..n {
            d = d.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    d
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * c64(0.5, 0.0)
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Real Frobenius pairing `Re tr(a^† b)`.
pub fn frobenius_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

pub fn frobenius_norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(a: &CMatrix) -> C64 {
    (0..a.nrows()).map(|i| a[(i, i)]).sum()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

pub fn hermitian_eigen(a: &CMatrix) -> HermitianEigen {
    let h = hermitian_part(a);
    let eig = SymmetricEigen::new(h);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    HermitianEigen { values, vectors }
}

/// `V diag(values) V^†` for the given columns of `V`.
pub fn reassemble(values: &[f64], vectors: &CMatrix) -> CMatrix {
    let f = vectors.nrows();
    let mut out = CMatrix::zeros(f, f);
    for (k, &d) in values.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let col = vectors.column(k);
        for j in 0..f {
            let cj = col[j].conj() * d;
            for i in 0..f {
                out[(i, j)] += col[i] * cj;
            }
        }
    }
    out
}

/// Principal square root without trigonometric calls.
#[inline]
pub fn csqrt(z: C64) -> C64 {
    if z.im == 0.0 {
        return if z.re >= 0.0 { c64(z.re.sqrt(), 0.0) } else { c64(0.0, (-z.re).sqrt()) };
    }
    let q = z.norm_sqr();
    let m = if q.is_normal() && q < f64::MAX { q.sqrt() } else { z.re.hypot(z.im) };
    // The larger component comes from the root, the other by division.
    if z.re >= 0.0 {
        let t = (0.5 * (m + z.re)).sqrt();
        c64(t, z.im / (2.0 * t))
    } else {
        let t = (0.5 * (m - z.re)).sqrt();
        c64(z.im.abs() / (2.0 * t), t.copysign(z.im))
    }
}

/// Roots of the characteristic polynomial of `[[a, b], [c, d]]`.
#[inline]
pub fn eig2(a: C64, b: C64, c: C64, d: C64) -> [C64; 2] {
    let half = c64(0.5, 0.0);
    let mean = (a + d) * half;
    let diff = (a - d) * half;
    let s = csqrt(diff * diff + b * c);
    [mean + s, mean - s]
}

pub fn eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
    match m.nrows() {
        0 => Ok(Vec::new()),
        1 => Ok(vec![m[(0, 0)]]),
        2 => Ok(eig2(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]).to_vec()),
        _ => {
            let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
                .ok_or_else(|| CfsError::NonConvergence("Schur iteration".into()))?;
            let (_, t) = schur.unpack();
            Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
        }
    }
}

/// Diagonalisation `M = V diag(values) V^{-1}` with the rows of `V^{-1}` as
/// left eigenvectors normalised against the right ones.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<C64>,
    pub right: CMatrix,
    pub left: CMatrix,
}

/// Fails with `Degenerate` when two eigenvalues are closer than
/// `gap_tol * max|eigenvalue|`, where the eigenvector basis is ill-defined.
pub fn eigen_decomposition(m: &CMatrix, gap_tol: f64) -> Result<EigenDecomposition> {
    let n = m.nrows();
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| CfsError::NonConvergence("Schur iteration".into()))?;
    let (q, t) = schur.unpack();
    let values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let scale = values.iter().fold(0.0f64, |s, z| s.max(z.norm())).max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in (i + 1)..n {
            if (values[i] - values[j]).norm() <= gap_tol * scale {
                return Err(CfsError::Degenerate(format!(
                    "eigenvalue gap {:.3e} below threshold",
                    (values[i] - values[j]).norm()
                )));
            }
        }
    }
    // Unit upper-triangular eigenvector matrix of T by back substitution.
    let mut y = CMatrix::zeros(n, n);
    for k in 0..n {
        y[(k, k)] = c64(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = c64(0.0, 0.0);
            for j in (i + 1)..=k {
                acc += t[(i, j)] * y[(j, k)];
            }
            y[(i, k)] = -acc / (t[(i, i)] - values[k]);
        }
    }
    let y_inv = y
        .clone()
        .solve_upper_triangular(&CMatrix::identity(n, n))
        .ok_or_else(|| CfsError::Degenerate("singular eigenvector basis".into()))?;
    let right = &q * y;
    let left = y_inv * q.adjoint();
    Ok(EigenDecomposition { values, right, left })
}

/// `exp(i t H)` for Hermitian `H`.
pub fn exp_i_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    let eig = hermitian_eigen(h);
    let f = h.nrows();
    let mut out = CMatrix::zeros(f, f);
    for (k, &lam) in eig.values.iter().enumerate() {
        let phase = c64(0.0, t * lam).exp();
        let col = eig.vectors.column(k);
        for j in 0..f {
            let cj = col[j].conj() * phase;
            for i in 0..f {
                out[(i, j)] += col[i] * cj;
            }
        }
    }
    out
}

/// Hermitian matrix with independent standard normal entries.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, f: usize) -> CMatrix {
    let mut m = CMatrix::zeros(f, f);
    for i in 0..f {
        m[(i, i)] = c64(rng.sample(StandardNormal), 0.0);
        for j in (i + 1)..f {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = c64(re, im) * std::f64::consts::FRAC_1_SQRT_2;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, f: usize) -> CMatrix {
    let h = random_hermitian(rng, f);
    exp_i_hermitian(&h, std::f64::consts::PI)
}

/// Recursive pairwise summation; deterministic for a fixed input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hermitian_eigen_reassembles() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_hermitian(&mut rng, 5);
        let e = hermitian_eigen(&h);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let back = reassemble(&e.values, &e.vectors);
        assert!(max_abs(&(back - &h)) < 1e-12);
    }

    #[test]
    fn eigen_decomposition_diagonalises() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_hermitian(&mut rng, 4);
        let b = random_hermitian(&mut rng, 4);
        let m = &a * &b;
        let d = eigen_decomposition(&m, 1e-12).unwrap();
        let lam = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(d.values.clone()));
        let back = &d.right * lam * &d.left;
        assert!(max_abs(&(back - &m)) < 1e-10);
        let id = &d.left * &d.right;
        assert!(max_abs(&(id - CMatrix::identity(4, 4))) < 1e-10);
    }

    #[test]
    fn closed_form_matches_schur() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(&mut rng, 2) * random_hermitian(&mut rng, 2);
        let mut closed = eig2(a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]).to_vec();
        let (_, t) = Schur::new(a.clone()).unpack();
        let mut schur = vec![t[(0, 0)], t[(1, 1)]];
        let key = |z: &C64| (z.re, z.im);
        closed.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        schur.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        for (x, y) in closed.iter().zip(&schur) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn csqrt_matches_polar_form() {
        for &(re, im) in &[(3.0, 4.0), (-3.0, 4.0), (-3.0, -4.0), (2.0, 0.0), (-2.0, 0.0), (1e-300, -1e-300)] {
            let z = c64(re, im);
            let r = csqrt(z);
            assert!((r * r - z).norm() <= 1e-14 * z.norm());
            assert!(r.re >= 0.0);
        }
    }

    #[test]
    fn exp_i_hermitian_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_unitary(&mut rng, 3);
        let id = &u * u.adjoint();
        assert!(max_abs(&(id - CMatrix::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }
}
