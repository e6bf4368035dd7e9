//! Regularized Minkowski vacuum kernel in the Dirac representation
//! `gamma^0 = diag(1, 1, -1, -1)`, `gamma^j = [[0, s_j], [-s_j, 0]]`, and
//! the scaling experiments built on it.
//!
//! The kernel of `xi = y - x = (t, xi_vec)` is
//! `lambda C [m I0 - I1 gamma^0 + i I2 gamma^r]` with `C = 4 pi / (2 pi)^4`,
//! `gamma^r = xi_vec . gamma / r` and the radial integrals
//! `I0 = int W j0(kr)`, `I1 = int W w j0(kr)`, `I2 = int W k j1(kr)`,
//! `W = k^2 / (2w) exp(-eps w) exp(-i w t)`, `w = sqrt(k^2 + m^2)`.

use crate::error::{CfsError, Result};
use crate::linalg::{c64, eigenvalues, pairwise_sum, CMatrix, C64};
use crate::measure::{causal_action, constraint_values, el_residual, DiscreteMeasure, MultiplierSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegParams {
    pub epsilon: f64,
    pub mass: f64,
    pub lambda: f64,
    /// Planck-scale parameter; only compared against `epsilon`.
    pub delta: f64,
}

impl RegParams {
    pub fn new(epsilon: f64, mass: f64, lambda: f64, delta: f64) -> Result<Self> {
        let p = Self { epsilon, mass, lambda, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(CfsError::InvalidInput(format!("epsilon {} must be positive", self.epsilon)));
        }
        if !(self.mass >= 0.0 && self.mass.is_finite()) {
            return Err(CfsError::InvalidInput(format!("mass {} must be nonnegative", self.mass)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(CfsError::InvalidInput(format!("lambda {} must be positive", self.lambda)));
        }
        if !(self.delta >= self.epsilon) {
            return Err(CfsError::InvalidInput(format!(
                "delta {} must be at least epsilon {}",
                self.delta, self.epsilon
            )));
        }
        Ok(())
    }

    /// `epsilon * mass`; scaling sweeps need it small.
    pub fn mass_ratio(&self) -> f64 {
        self.epsilon * self.mass
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, delta: self.delta.max(epsilon), ..*self }
    }

    pub fn with_mass(&self, mass: f64) -> Self {
        Self { mass, ..*self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadConfig {
    /// Relative to the natural scale of each integral.
    pub rel_tol: f64,
    /// Upper momentum cutoff in units of `1 / epsilon`.
    pub kmax_factor: f64,
    pub max_depth: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-8, kmax_factor: 60.0, max_depth: 24 }
    }
}

pub fn gamma(mu: usize) -> CMatrix {
    let z = c64(0.0, 0.0);
    let o = c64(1.0, 0.0);
    let i = c64(0.0, 1.0);
    let m = |rows: [[C64; 4]; 4]| CMatrix::from_fn(4, 4, |r, c| rows[r][c]);
    match mu {
        0 => m([[o, z, z, z], [z, o, z, z], [z, z, -o, z], [z, z, z, -o]]),
        1 => m([[z, z, z, o], [z, z, o, z], [z, -o, z, z], [-o, z, z, z]]),
        2 => m([[z, z, z, -i], [z, z, i, z], [z, i, z, z], [-i, z, z, z]]),
        3 => m([[z, z, o, z], [z, z, z, -o], [-o, z, z, z], [z, o, z, z]]),
        _ => panic!("gamma index {mu} out of range"),
    }
}

/// `gamma^0 A^dagger gamma^0`.
pub fn spin_adjoint(a: &CMatrix) -> CMatrix {
    let g0 = gamma(0);
    &g0 * a.adjoint() * &g0
}

fn j0(z: f64) -> f64 {
    if z.abs() < 0.1 {
        let z2 = z * z;
        1.0 - z2 / 6.0 * (1.0 - z2 / 20.0 * (1.0 - z2 / 42.0 * (1.0 - z2 / 72.0)))
    } else {
        z.sin() / z
    }
}

fn j1(z: f64) -> f64 {
    if z.abs() < 0.1 {
        let z2 = z * z;
        z / 3.0 * (1.0 - z2 / 10.0 * (1.0 - z2 / 28.0 * (1.0 - z2 / 54.0)))
    } else {
        (z.sin() - z * z.cos()) / (z * z)
    }
}

/// Integral with its achieved error bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> Integral {
    let out = quadrature::double_exponential::integrate(f, a, b, tol);
    if out.error_estimate <= tol || depth == 0 {
        return Integral { value: out.integral, error: out.error_estimate };
    }
    let mid = 0.5 * (a + b);
    let l = adaptive(f, a, mid, 0.5 * tol, depth - 1);
    let r = adaptive(f, mid, b, 0.5 * tol, depth - 1);
    Integral { value: l.value + r.value, error: l.error + r.error }
}

/// `int_0^{kmax} f` on panels refined towards the origin, plus the bound of
/// the truncated exponential tail. Fails when the achieved error exceeds `tol`.
fn radial(f: &dyn Fn(f64) -> f64, eps: f64, tail: f64, tol: f64, q: &QuadConfig) -> Result<Integral> {
    let kmax = q.kmax_factor / eps;
    let mut edges = vec![0.0, 0.5 / eps];
    while *edges.last().unwrap() * 2.0 < kmax {
        let next = edges.last().unwrap() * 2.0;
        edges.push(next);
    }
    edges.push(kmax);
    let panels = (edges.len() - 1) as f64;
    let mut value = 0.0;
    let mut error = tail;
    for w in edges.windows(2) {
        let r = adaptive(f, w[0], w[1], tol / panels, q.max_depth);
        value += r.value;
        error += r.error;
    }
    if error > tol {
        return Err(CfsError::NonConvergence(format!("radial quadrature reached error {error:.3e}, target {tol:.3e}")));
    }
    Ok(Integral { value, error })
}

/// Radial integrals `I0, I1, I2` (see the module docs), real and imaginary parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialIntegrals {
    pub i0: C64,
    pub i1: C64,
    pub i2: C64,
    /// Largest achieved error relative to the natural scale of its integral.
    pub rel_error: f64,
}

pub fn radial_integrals(t: f64, r: f64, p: &RegParams, q: &QuadConfig) -> Result<RadialIntegrals> {
    p.validate()?;
    let (eps, m) = (p.epsilon, p.mass);
    let omega = move |k: f64| (k * k + m * m).sqrt();
    let w = move |k: f64| {
        let om = omega(k);
        k * k / (2.0 * om) * (-eps * om).exp()
    };
    // Mass-independent envelopes of |I0|, |I1|, |I2| and bounds of the
    // integrand tails beyond the cutoff (`int_K^inf k^p e^{-eps k} <= 2 K^p e^{-eps K} / eps`).
    let kmax = q.kmax_factor / eps;
    let decay = (-q.kmax_factor).exp() / eps;
    let scales = [0.5 / eps.powi(2), 1.0 / eps.powi(3), (r / eps.powi(4)).min(1.0 / eps.powi(3))];
    let tails = [kmax * decay, kmax.powi(2) * decay, (r / 3.0) * kmax.powi(3) * decay];
    let kernels: [&dyn Fn(f64) -> f64; 3] =
        [&|k| w(k) * j0(k * r), &|k| w(k) * omega(k) * j0(k * r), &|k| w(k) * k * j1(k * r)];
    let mut out = [c64(0.0, 0.0); 3];
    let mut rel_error = 0.0f64;
    for (idx, g) in kernels.iter().enumerate() {
        if scales[idx] == 0.0 {
            continue;
        }
        let tol = q.rel_tol * scales[idx];
        let re = radial(&|k| g(k) * (omega(k) * t).cos(), eps, tails[idx], tol, q)?;
        let im = if t == 0.0 {
            Integral { value: 0.0, error: 0.0 }
        } else {
            radial(&|k| -g(k) * (omega(k) * t).sin(), eps, tails[idx], tol, q)?
        };
        out[idx] = c64(re.value, im.value);
        rel_error = rel_error.max((re.error + im.error) / scales[idx]);
    }
    Ok(RadialIntegrals { i0: out[0], i1: out[1], i2: out[2], rel_error })
}

/// `C = 4 pi / (2 pi)^4`.
pub const ANGULAR_FACTOR: f64 = 4.0 * PI / (16.0 * PI * PI * PI * PI);

fn assemble(xi: &[f64; 4], p: &RegParams, ints: &RadialIntegrals) -> CMatrix {
    let r = (xi[1] * xi[1] + xi[2] * xi[2] + xi[3] * xi[3]).sqrt();
    let pref = c64(p.lambda * ANGULAR_FACTOR, 0.0);
    let mut out = CMatrix::identity(4, 4) * (ints.i0 * p.mass) - gamma(0) * ints.i1;
    if r > 0.0 {
        let mut gr = CMatrix::zeros(4, 4);
        for j in 1..4 {
            gr += gamma(j) * c64(xi[j] / r, 0.0);
        }
        out += gr * (c64(0.0, 1.0) * ints.i2);
    }
    out * pref
}

/// Kernel at separation `xi = y - x`.
pub fn kernel_p(xi: &[f64; 4], p: &RegParams, q: &QuadConfig) -> Result<CMatrix> {
    if xi.iter().any(|c| !c.is_finite()) {
        return Err(CfsError::InvalidInput("separation must be finite".into()));
    }
    let r = (xi[1] * xi[1] + xi[2] * xi[2] + xi[3] * xi[3]).sqrt();
    let ints = radial_integrals(xi[0], r, p, q)?;
    Ok(assemble(xi, p, &ints))
}

/// `Tr P(x, x)`.
pub fn local_trace(p: &RegParams, q: &QuadConfig) -> Result<f64> {
    let k = kernel_p(&[0.0; 4], p, q)?;
    Ok(crate::linalg::trace(&k).re)
}

/// `P(xi) P(xi)^*` with the spin adjoint.
pub fn closed_chain(xi: &[f64; 4], p: &RegParams, q: &QuadConfig) -> Result<CMatrix> {
    let k = kernel_p(xi, p, q)?;
    Ok(&k * spin_adjoint(&k))
}

pub fn chain_eigenvalues(xi: &[f64; 4], p: &RegParams, q: &QuadConfig) -> Result<Vec<C64>> {
    eigenvalues(&closed_chain(xi, p, q)?)
}

/// `(1/8) sum_{i,j} (|mu_i| - |mu_j|)^2` over the chain eigenvalues.
pub fn chain_lagrangian(xi: &[f64; 4], p: &RegParams, q: &QuadConfig) -> Result<f64> {
    let mods: Vec<f64> = chain_eigenvalues(xi, p, q)?.iter().map(|z| z.norm()).collect();
    let mut acc = 0.0;
    for a in &mods {
        for b in &mods {
            acc += (a - b) * (a - b);
        }
    }
    Ok(acc / 8.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Separation {
    Timelike,
    Spacelike,
    Boundary,
}

/// Timelike: real chain spectrum with distinct moduli. Spacelike: a
/// genuinely complex eigenvalue. Boundary: real with equal moduli, within
/// `band` relative to the spectral scale.
pub fn classify_spectrum(mu: &[C64], band: f64) -> Separation {
    let scale = mu.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Separation::Boundary;
    }
    if mu.iter().any(|z| z.im.abs() > band * scale) {
        return Separation::Spacelike;
    }
    let lo = mu.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if scale - lo > band * scale {
        Separation::Timelike
    } else {
        Separation::Boundary
    }
}

pub fn chain_classify(xi: &[f64; 4], p: &RegParams, q: &QuadConfig, band: f64) -> Result<Separation> {
    Ok(classify_spectrum(&chain_eigenvalues(xi, p, q)?, band))
}

/// Radius of the timelike cylinder at `t = 0`: bisection on the
/// classification along a spatial ray.
pub fn cylinder_radius(p: &RegParams, q: &QuadConfig, band: f64) -> Result<f64> {
    let class = |r: f64| chain_classify(&[0.0, r, 0.0, 0.0], p, q, band);
    if class(0.0)? != Separation::Timelike {
        return Err(CfsError::InvalidInput("the origin is not timelike; no cylinder".into()));
    }
    let mut lo = 0.0;
    let mut hi = (p.mass * p.epsilon * p.epsilon).max(1e-3 * p.epsilon);
    let mut found = false;
    for _ in 0..200 {
        match class(hi)? {
            Separation::Timelike => {
                lo = hi;
                hi *= 2.0;
            }
            Separation::Boundary => return Ok(hi),
            Separation::Spacelike => {
                found = true;
                break;
            }
        }
        if hi > p.epsilon * 1e3 {
            break;
        }
    }
    if !found {
        return Err(CfsError::NonConvergence("no timelike to spacelike transition in the bracket".into()));
    }
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match class(mid)? {
            Separation::Timelike => lo = mid,
            Separation::Spacelike => hi = mid,
            Separation::Boundary => return Ok(mid),
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Brute-force Monte-Carlo estimate of the kernel from the three-momentum
/// integral, sampling `|k|` from `Gamma(3, 1/eps)` with antithetic pairs.
pub fn monte_carlo_kernel(xi: &[f64; 4], p: &RegParams, samples: usize, seed: u64) -> Result<CMatrix> {
    p.validate()?;
    let (eps, m) = (p.epsilon, p.mass);
    let radial = Gamma::new(3.0, 1.0 / eps).map_err(|e| CfsError::InvalidInput(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Coefficients of 1, gamma^0, gamma^1..3.
    let mut acc = [c64(0.0, 0.0); 5];
    let pairs = samples.div_ceil(2).max(1);
    for _ in 0..pairs {
        let k: f64 = radial.sample(&mut rng);
        let cos_t: f64 = rng.random_range(-1.0..1.0);
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        let sin_t = (1.0 - cos_t * cos_t).sqrt();
        let dir = [sin_t * phi.cos(), sin_t * phi.sin(), cos_t];
        let om = (k * k + m * m).sqrt();
        let density = eps.powi(3) / (8.0 * PI) * (-eps * k).exp();
        let weight = (-eps * om).exp() / (2.0 * om) / density;
        for sign in [1.0, -1.0] {
            let kv = [sign * k * dir[0], sign * k * dir[1], sign * k * dir[2]];
            let phase = -om * xi[0] - (kv[0] * xi[1] + kv[1] * xi[2] + kv[2] * xi[3]);
            let e = c64(phase.cos(), phase.sin()) * weight;
            acc[0] += e * m;
            acc[1] += e * (-om);
            for j in 0..3 {
                acc[2 + j] += e * (-kv[j]);
            }
        }
    }
    let norm = p.lambda / (2.0 * PI).powi(4) / (2 * pairs) as f64;
    let mut out = CMatrix::identity(4, 4) * acc[0] + gamma(0) * acc[1];
    for j in 0..3 {
        out += gamma(j + 1) * acc[2 + j];
    }
    Ok(out * c64(norm, 0.0))
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(CfsError::InvalidInput("a fit needs at least two matching points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(CfsError::InvalidInput("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(CfsError::Degenerate("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let ss_res: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(SlopeFit { slope, intercept: my - slope * mx, r_squared })
}

/// `n` logarithmically spaced points from `a` to `b`.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub mass: f64,
    pub local_trace: f64,
    pub chain_modulus: f64,
    pub lagrangian_origin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingSweep {
    pub rows: Vec<SweepRow>,
    pub trace: SlopeFit,
    pub chain: SlopeFit,
    pub lagrangian: SlopeFit,
}

/// Observables at the origin over a sweep of `epsilon` at fixed mass and
/// `lambda`, with their log-log slopes. Fails when a fit has
/// `R^2 < min_r_squared`.
pub fn scaling_sweep(base: &RegParams, epsilons: &[f64], q: &QuadConfig, min_r_squared: f64) -> Result<ScalingSweep> {
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let p = base.with_epsilon(eps);
        p.validate()?;
        let mu = chain_eigenvalues(&[0.0; 4], &p, q)?;
        let mods: Vec<f64> = mu.iter().map(|z| z.norm()).collect();
        let mut lag = 0.0;
        for a in &mods {
            for b in &mods {
                lag += (a - b) * (a - b);
            }
        }
        rows.push(SweepRow {
            epsilon: eps,
            mass: p.mass,
            local_trace: local_trace(&p, q)?,
            chain_modulus: mods.iter().copied().fold(0.0, f64::max),
            lagrangian_origin: lag / 8.0,
        });
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let col = |f: fn(&SweepRow) -> f64| -> Vec<f64> { rows.iter().map(|r| f(r).abs()).collect() };
    let trace = fit_loglog(&eps, &col(|r| r.local_trace))?;
    let chain = fit_loglog(&eps, &col(|r| r.chain_modulus))?;
    let lagrangian = fit_loglog(&eps, &col(|r| r.lagrangian_origin))?;
    for (name, fit) in [("local trace", trace), ("chain modulus", chain), ("origin Lagrangian", lagrangian)] {
        if fit.r_squared < min_r_squared {
            return Err(CfsError::NonConvergence(format!("{name} fit has R^2 = {:.6}", fit.r_squared)));
        }
    }
    Ok(ScalingSweep { rows, trace, chain, lagrangian })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RescalingDefects {
    /// `max |tr(lambda x) - lambda tr(x)|` relative to `lambda max(|tr x|, |x|_F)`.
    pub trace: f64,
    /// Relative defect of `action -> sigma^2 lambda^4 action`.
    pub action: f64,
    /// Relative defect of `boundedness -> sigma^2 lambda^4 boundedness`.
    pub boundedness: f64,
    /// Defect of `trace_integral -> sigma lambda trace_integral` relative to `sigma lambda sum rho |x|_F`.
    pub trace_integral: f64,
    /// `max |l~(x~) + s~ - sigma lambda^4 (l(x) + s)|` relative to the scale of `l + s`.
    pub ell: f64,
    pub residual_before: f64,
    /// Support residual of the rescaled system with updated multipliers.
    pub residual_after: f64,
}

/// `|a - b|` relative to `max(|a|, |b|, floor)`.
fn rel(a: f64, b: f64, floor: f64) -> f64 {
    let s = a.abs().max(b.abs()).max(floor);
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Multipliers of the rescaled system: `c~ = lambda c`, `s~ = sigma lambda^4 s`.
pub fn rescaled_multipliers(mult: &MultiplierSet, sigma: f64, lambda: f64) -> Result<MultiplierSet> {
    MultiplierSet::new(mult.kappa, sigma * lambda.powi(4) * mult.s_param, lambda * mult.trace_c)
}

/// Checks `x -> lambda x`, `rho -> sigma rho` against the predicted
/// transformation of every derived quantity.
pub fn rescaling_covariance_check(
    rho: &DiscreteMeasure,
    mult: &MultiplierSet,
    sigma: f64,
    lambda: f64,
) -> Result<RescalingDefects> {
    if !(sigma > 0.0 && lambda > 0.0) {
        return Err(CfsError::InvalidInput("sigma and lambda must be positive".into()));
    }
    let scaled = rho.rescaled(lambda, sigma)?;
    let new_mult = rescaled_multipliers(mult, sigma, lambda)?;
    let l4 = lambda.powi(4);
    let trace = rho
        .points()
        .iter()
        .zip(scaled.points())
        .map(|(a, b)| {
            let scale = lambda * a.trace().abs().max(a.matrix().norm());
            (b.trace() - lambda * a.trace()).abs() / scale
        })
        .fold(0.0, f64::max);
    // Trace-free systems have no trace scale of their own.
    let trace_scale = sigma
        * lambda
        * pairwise_sum(&rho.points().iter().zip(rho.weights()).map(|(x, w)| w * x.matrix().norm()).collect::<Vec<_>>());
    let before = constraint_values(rho)?;
    let after = constraint_values(&scaled)?;
    let params = mult.kernel();
    // Systems with vanishing action still carry the scale `(sum rho |x|^2)^2`.
    let sq: Vec<f64> = rho.points().iter().map(|x| x.matrix().norm_squared()).collect();
    let sq_mass = pairwise_sum(&sq.iter().zip(rho.weights()).map(|(a, w)| a * w).collect::<Vec<_>>());
    let pair_floor = sigma * sigma * l4 * sq_mass * sq_mass;
    let action = rel(causal_action(&scaled, &params)?, sigma * sigma * l4 * causal_action(rho, &params)?, pair_floor);
    let ell_old = crate::measure::row_sums(&crate::measure::lagrangian_table(&rho.prepared(), &params)?, rho.weights());
    let ell_new =
        crate::measure::row_sums(&crate::measure::lagrangian_table(&scaled.prepared(), &params)?, scaled.weights());
    let sq_max = sq.iter().copied().fold(0.0, f64::max);
    let ell_scale = ell_old.iter().map(|v| v.abs()).fold(sq_max * sq_mass, f64::max) * sigma * l4;
    let ell = ell_old
        .iter()
        .zip(&ell_new)
        .map(|(o, n)| if ell_scale == 0.0 { 0.0 } else { (n - sigma * l4 * o).abs() / ell_scale })
        .fold(0.0, f64::max);
    Ok(RescalingDefects {
        trace,
        action,
        boundedness: rel(after.boundedness, sigma * sigma * l4 * before.boundedness, pair_floor),
        trace_integral: (after.trace_integral - sigma * lambda * before.trace_integral).abs()
            / trace_scale.max(f64::MIN_POSITIVE),
        ell,
        residual_before: el_residual(rho, mult, 0, 0.0, 0)?.support_residual,
        residual_after: el_residual(&scaled, &new_mult, 0, 0.0, 0)?.support_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(eps: f64, m: f64) -> RegParams {
        RegParams::new(eps, m, 1.0, 1.0).unwrap()
    }

    #[test]
    fn dirac_matrices_satisfy_clifford_relations() {
        let mut eta = [-1.0; 4];
        eta[0] = 1.0;
        for a in 0..4 {
            for b in 0..4 {
                let ac = gamma(a) * gamma(b) + gamma(b) * gamma(a);
                let want = if a == b { 2.0 * eta[a] } else { 0.0 };
                let d = crate::linalg::max_abs(&(ac - CMatrix::identity(4, 4) * c64(want, 0.0)));
                assert!(d < 1e-15);
            }
        }
    }

    #[test]
    fn bessel_branches_agree() {
        for z in [0.0999999, 0.1] {
            assert!((j0(z) - z.sin() / z).abs() < 1e-15);
            assert!((j1(z) - (z.sin() - z * z.cos()) / (z * z)).abs() < 1e-14);
        }
    }

    #[test]
    fn massless_origin_has_closed_form() {
        // For m = 0: I0 = 1 / (2 eps^2), I1 = 1 / eps^3 up to the cutoff tail.
        let p = params(0.1, 0.0);
        let ints = radial_integrals(0.0, 0.0, &p, &QuadConfig::default()).unwrap();
        assert!((ints.i0.re * 2.0 * 0.01 - 1.0).abs() < 1e-8);
        assert!((ints.i1.re * 1e-3 - 1.0).abs() < 1e-8);
        assert_eq!(local_trace(&p, &QuadConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn chain_is_spin_symmetric_and_origin_is_timelike() {
        let q = QuadConfig::default();
        let p = params(0.01, 1.0);
        let a = closed_chain(&[0.002, 0.003, -0.001, 0.002], &p, &q).unwrap();
        let d = crate::linalg::max_abs(&(spin_adjoint(&a) - &a)) / crate::linalg::max_abs(&a);
        assert!(d < 1e-10);
        assert_eq!(chain_classify(&[0.0; 4], &p, &q, 1e-9).unwrap(), Separation::Timelike);
        assert_eq!(chain_classify(&[0.0; 4], &params(0.01, 0.0), &q, 1e-9).unwrap(), Separation::Boundary);
    }

    #[test]
    fn reflected_separation_is_spin_adjoint() {
        let q = QuadConfig::default();
        let p = params(0.01, 2.0);
        let xi = [0.004, 0.002, 0.001, -0.003];
        let a = kernel_p(&xi, &p, &q).unwrap();
        let b = kernel_p(&xi.map(|c| -c), &p, &q).unwrap();
        let d = crate::linalg::max_abs(&(spin_adjoint(&a) - b)) / crate::linalg::max_abs(&a);
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn loglog_fit_recovers_power() {
        let xs = logspace(1e-3, 1e-1, 7);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-2.5)).collect();
        let fit = fit_loglog(&xs, &ys).unwrap();
        assert!((fit.slope + 2.5).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
    }
}
