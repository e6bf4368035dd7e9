//! Jets `(a, u)`: a scalar and a tangent direction per support point, the
//! operator `nabla`, the weak EL test and the second variation pairing.
//!
//! Directional derivatives are central differences along the curves
//! `t -> project_to_freg(x + t u)`, which stay in the regular set with the
//! trace of `x`. Off the support a jet is extended by freezing its value at
//! the base point.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CfsError, Result};
use crate::linalg::{c64, frobenius_norm, pairwise_sum, random_hermitian, CMatrix};
use crate::measure::{DiscreteMeasure, MultiplierSet};
use crate::operator::{pair_lagrangian, project_to_freg, tangent_project, Operator, Prepared};

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub scalar: Vec<f64>,
    pub vector: Vec<CMatrix>,
}

impl Jet {
    pub fn new(scalar: Vec<f64>, vector: Vec<CMatrix>) -> Result<Self> {
        if scalar.len() != vector.len() {
            return Err(CfsError::DimensionMismatch { expected: scalar.len(), got: vector.len() });
        }
        Ok(Self { scalar, vector })
    }

    pub fn zero(rho: &DiscreteMeasure) -> Self {
        let f = rho.dim().unwrap_or(0);
        Self { scalar: vec![0.0; rho.len()], vector: vec![CMatrix::zeros(f, f); rho.len()] }
    }

    pub fn scalar_only(scalar: Vec<f64>, f: usize) -> Self {
        let n = scalar.len();
        Self { scalar, vector: vec![CMatrix::zeros(f, f); n] }
    }

    pub fn len(&self) -> usize {
        self.scalar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scalar.is_empty()
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &Jet, beta: f64) -> Result<Jet> {
        if self.len() != other.len() {
            return Err(CfsError::DimensionMismatch { expected: self.len(), got: other.len() });
        }
        Ok(Jet {
            scalar: self.scalar.iter().zip(&other.scalar).map(|(a, b)| alpha * a + beta * b).collect(),
            vector: self
                .vector
                .iter()
                .zip(&other.vector)
                .map(|(u, v)| u * c64(alpha, 0.0) + v * c64(beta, 0.0))
                .collect(),
        })
    }

    /// Largest deviation of a vector component from its tangent projection,
    /// relative to `max(|u|, 1)`.
    pub fn tangency_defect(&self, rho: &DiscreteMeasure) -> f64 {
        rho.prepared()
            .iter()
            .zip(&self.vector)
            .map(|(x, u)| frobenius_norm(&(tangent_project(x, u) - u)) / frobenius_norm(u).max(1.0))
            .fold(0.0, f64::max)
    }

    pub fn check_tangent(&self, rho: &DiscreteMeasure) -> Result<()> {
        let d = self.tangency_defect(rho);
        if d > 1e-8 {
            return Err(CfsError::NotTangent(format!("jet tangency defect {d:.3e}")));
        }
        Ok(())
    }
}

/// Random tangent jet with standard normal scalars and unit-norm directions.
pub fn random_jet(rho: &DiscreteMeasure, seed: u64) -> Jet {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = rho.dim().unwrap_or(0);
    let mut scalar = Vec::with_capacity(rho.len());
    let mut vector = Vec::with_capacity(rho.len());
    for x in rho.prepared() {
        scalar.push(StandardNormal.sample(&mut rng));
        let t = tangent_project(&x, &random_hermitian(&mut rng, f));
        let norm = frobenius_norm(&t).max(f64::MIN_POSITIVE);
        vector.push(t * c64(1.0 / norm, 0.0));
    }
    Jet { scalar, vector }
}

/// The jet `(0, i[H, x])` of the global unitary flow generated by `H`.
pub fn unitary_jet(rho: &DiscreteMeasure, h: &CMatrix) -> Jet {
    let i = c64(0.0, 1.0);
    let vector = rho.points().iter().map(|x| (h * x.matrix() - x.matrix() * h) * i).collect();
    Jet { scalar: vec![0.0; rho.len()], vector }
}

/// Finite-difference settings: the displacement `t |u|` is `rel_step`
/// times the operator norm of the base point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdConfig {
    pub rel_step: f64,
    pub richardson: bool,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self { rel_step: 1e-5, richardson: true }
    }
}

impl FdConfig {
    /// Offsets (in units of the step) and weights of the first-derivative
    /// stencil.
    pub fn stencil(&self) -> &'static [(f64, f64)] {
        if self.richardson {
            // (4 D(h/2) - D(h)) / 3
            &[(0.5, 4.0 / 3.0), (-0.5, -4.0 / 3.0), (1.0, -1.0 / 6.0), (-1.0, 1.0 / 6.0)]
        } else {
            &[(1.0, 0.5), (-1.0, -0.5)]
        }
    }

    /// Curve parameter step for direction `u` at a point of norm `scale`.
    pub fn step(&self, scale: f64, u: &CMatrix) -> Result<f64> {
        let un = frobenius_norm(u);
        let h = self.rel_step * scale.max(f64::MIN_POSITIVE) / un;
        if !(h.is_finite() && h * un > 4.0 * f64::EPSILON * scale) {
            return Err(CfsError::InvalidInput(format!("finite-difference step underflow ({h:e})")));
        }
        Ok(h)
    }
}

/// `project_to_freg(x + t u)` with the trace of `x`.
pub fn curve_point(x: &CMatrix, spin_dim: usize, u: &CMatrix, t: f64) -> Result<Operator> {
    let tr = crate::linalg::trace(x).re;
    project_to_freg(&(x + u * c64(t, 0.0)), spin_dim, tr)
}

/// Shifted points of a first-derivative stencil along one direction.
#[derive(Clone, Debug)]
pub struct CurveStencil {
    /// `(weight / h, shifted point)`; empty for a zero direction.
    pub nodes: Vec<(f64, Prepared)>,
}

impl CurveStencil {
    pub fn new(x: &Operator, u: &CMatrix, fd: &FdConfig) -> Result<Self> {
        if frobenius_norm(u) == 0.0 {
            return Ok(Self { nodes: Vec::new() });
        }
        let h = fd.step(x.prepare().norm(), u)?;
        let nodes = fd
            .stencil()
            .iter()
            .map(|&(off, w)| Ok((w / h, curve_point(x.matrix(), x.spin_dim(), u, off * h)?.prepare())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { nodes })
    }

    /// Derivative of `g` along the curve from evaluations at the nodes.
    pub fn apply<F: FnMut(&Prepared) -> Result<f64>>(&self, mut g: F) -> Result<f64> {
        let mut acc = 0.0;
        for (w, p) in &self.nodes {
            acc += w * g(p)?;
        }
        Ok(acc)
    }
}

/// `D_u g(x)` along `t -> project_to_freg(x + t u)`.
pub fn directional_derivative<G>(g: G, x: &Operator, u: &CMatrix, fd: &FdConfig) -> Result<f64>
where
    G: Fn(&Prepared) -> Result<f64>,
{
    CurveStencil::new(x, u, fd)?.apply(g)
}

/// `a g(x) + D_u g(x)`.
pub fn nabla<G>(a: f64, u: &CMatrix, g: G, x: &Operator, fd: &FdConfig) -> Result<f64>
where
    G: Fn(&Prepared) -> Result<f64>,
{
    let d = directional_derivative(&g, x, u, fd)?;
    if a == 0.0 {
        return Ok(d);
    }
    Ok(a * g(&x.prepare())? + d)
}

/// `x' -> sum_j rho_j L_kappa(x', x_j) - s`.
pub fn ell_function<'a>(
    points: &'a [Prepared],
    weights: &'a [f64],
    mult: &'a MultiplierSet,
) -> impl Fn(&Prepared) -> Result<f64> + 'a {
    move |x| {
        let params = mult.kernel();
        let terms = points
            .iter()
            .zip(weights)
            .map(|(y, w)| Ok(w * pair_lagrangian(x, y, &params)?))
            .collect::<Result<Vec<f64>>>()?;
        Ok(pairwise_sum(&terms) - mult.s_param)
    }
}

/// Infinitesimal generator of a one-parameter family of weights and
/// point maps, both indexed by support point.
pub struct JetFamily<'a> {
    pub weight: Box<dyn Fn(usize, f64) -> f64 + 'a>,
    pub map: Box<dyn Fn(usize, f64) -> Result<CMatrix> + 'a>,
}

/// Derivative at `tau = 0` of a family, tangent projected. Fails when the
/// two Richardson levels disagree beyond `1e-6` relative.
pub fn jet_from_family(fam: &JetFamily<'_>, rho: &DiscreteMeasure) -> Result<Jet> {
    let h = 1e-3;
    let central =
        |f: &dyn Fn(f64) -> Result<CMatrix>, h: f64| -> Result<CMatrix> { Ok((f(h)? - f(-h)?) * c64(0.5 / h, 0.0)) };
    let richardson = |f: &dyn Fn(f64) -> Result<CMatrix>, h: f64| -> Result<CMatrix> {
        Ok((central(f, h / 2.0)? * c64(4.0, 0.0) - central(f, h)?) * c64(1.0 / 3.0, 0.0))
    };
    let mut scalar = Vec::with_capacity(rho.len());
    let mut vector = Vec::with_capacity(rho.len());
    for (i, x) in rho.prepared().iter().enumerate() {
        let w = |t: f64| -> Result<CMatrix> { Ok(CMatrix::from_element(1, 1, c64((fam.weight)(i, t), 0.0))) };
        let m = |t: f64| (fam.map)(i, t);
        for (k, f) in [&w as &dyn Fn(f64) -> Result<CMatrix>, &m].into_iter().enumerate() {
            let coarse = richardson(f, h)?;
            let fine = richardson(f, h / 4.0)?;
            let scale = frobenius_norm(&fine).max(1.0);
            if frobenius_norm(&(&coarse - &fine)) > 1e-6 * scale {
                return Err(CfsError::NonDifferentiable(format!("family at point {i}")));
            }
            if k == 0 {
                scalar.push(fine[(0, 0)].re);
            } else {
                vector.push(tangent_project(x, &fine));
            }
        }
    }
    Ok(Jet { scalar, vector })
}

/// `max_{x in M, jets} |nabla_u l_kappa(x)|`.
pub fn weak_el_test(rho: &DiscreteMeasure, mult: &MultiplierSet, test_jets: &[Jet], fd: &FdConfig) -> Result<f64> {
    let prepared = rho.prepared();
    let ell = ell_function(&prepared, rho.weights(), mult);
    let mut worst = 0.0f64;
    for jet in test_jets {
        for (i, x) in rho.points().iter().enumerate() {
            let v = nabla(jet.scalar[i], &jet.vector[i], &ell, x, fd)?;
            worst = worst.max(v.abs());
        }
    }
    Ok(worst)
}

/// Which variable the outer finite difference acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NestOrder {
    OuterFirst,
    OuterSecond,
}

/// `d^2/ds dt g(s, t)` at the origin by nested stencils of steps `hs`, `ht`.
pub fn mixed_derivative<G>(g: G, hs: f64, ht: f64, fd: &FdConfig, order: NestOrder) -> Result<f64>
where
    G: Fn(f64, f64) -> Result<f64>,
{
    let st = fd.stencil();
    let mut acc = 0.0;
    match order {
        NestOrder::OuterFirst => {
            for &(os, ws) in st {
                let mut inner = 0.0;
                for &(ot, wt) in st {
                    inner += wt * g(os * hs, ot * ht)?;
                }
                acc += ws * inner / ht;
            }
            Ok(acc / hs)
        }
        NestOrder::OuterSecond => {
            for &(ot, wt) in st {
                let mut inner = 0.0;
                for &(os, ws) in st {
                    inner += ws * g(os * hs, ot * ht)?;
                }
                acc += wt * inner / hs;
            }
            Ok(acc / ht)
        }
    }
}

/// `<u, Delta v>(x_i)`: `nabla_u` applied to
/// `sum_j rho_j (nabla_{1,v} + nabla_{2,v}) L_kappa(., x_j) - b s`.
///
/// Second derivatives in the first argument use the surface
/// `(s, t) -> project_to_freg(x + s u + t v)`.
pub fn delta_pairing(
    u: &Jet,
    v: &Jet,
    rho: &DiscreteMeasure,
    mult: &MultiplierSet,
    i: usize,
    fd: &FdConfig,
    order: NestOrder,
) -> Result<f64> {
    let points = rho.points();
    let prepared = rho.prepared();
    let weights = rho.weights();
    let params = mult.kernel();
    let x = &points[i];
    let (a, uu) = (u.scalar[i], &u.vector[i]);
    let (b, vv) = (v.scalar[i], &v.vector[i]);
    let n = x.spin_dim();
    let scale = prepared[i].norm();
    let zero_u = frobenius_norm(uu) == 0.0;
    let zero_v = frobenius_norm(vv) == 0.0;
    let hs = if zero_u { 0.0 } else { fd.step(scale, uu)? };
    let ht = if zero_v { 0.0 } else { fd.step(scale, vv)? };
    let surface = |s: f64, t: f64| -> Result<Prepared> {
        let m = x.matrix() + uu * c64(s, 0.0) + vv * c64(t, 0.0);
        Ok(project_to_freg(&m, n, x.trace())?.prepare())
    };
    let along_u = CurveStencil::new(x, uu, fd)?;
    let mut terms = Vec::with_capacity(weights.len());
    for (j, y) in prepared.iter().enumerate() {
        let (bj, vj) = (v.scalar[j], &v.vector[j]);
        let at_y = CurveStencil::new(&points[j], vj, fd)?;
        let l0 = pair_lagrangian(&prepared[i], y, &params)?;
        // (b + b_j) L
        let mut t = (b + bj) * (a * l0 + along_u.apply(|p| pair_lagrangian(p, y, &params))?);
        // D_{1,v} L
        if !zero_v {
            let d1 = CurveStencil::new(x, vv, fd)?.apply(|p| pair_lagrangian(p, y, &params))?;
            let d1u = if zero_u {
                0.0
            } else {
                mixed_derivative(|s, tt| pair_lagrangian(&surface(s, tt)?, y, &params), hs, ht, fd, order)?
            };
            t += a * d1 + d1u;
        }
        // D_{2,v_j} L
        if !at_y.nodes.is_empty() {
            let d2 = at_y.apply(|q| pair_lagrangian(&prepared[i], q, &params))?;
            let d2u = along_u.apply(|p| at_y.apply(|q| pair_lagrangian(p, q, &params)))?;
            t += a * d2 + d2u;
        }
        terms.push(weights[j] * t);
    }
    Ok(pairwise_sum(&terms) - a * b * mult.s_param)
}

/// `max_{x in M, u in test_jets} |<u, Delta v>(x)|`.
pub fn linearized_residual(
    v: &Jet,
    rho: &DiscreteMeasure,
    mult: &MultiplierSet,
    test_jets: &[Jet],
    fd: &FdConfig,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for u in test_jets {
        for i in 0..rho.len() {
            worst = worst.max(delta_pairing(u, v, rho, mult, i, fd, NestOrder::OuterFirst)?.abs());
        }
    }
    Ok(worst)
}
