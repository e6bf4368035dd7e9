//! Four-dimensional coordinate lattices embedded into the regular set.
//!
//! Nodes sit at cell centres of a coordinate box, so a region whose walls lie
//! on cell faces is integrated by the midpoint rule. Cell weights are
//! `h(node) * cell volume`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CfsError, Result};
use crate::jets::Jet;
use crate::linalg::{c64, exp_i_hermitian, hermiticity_defect, max_abs, random_hermitian, random_unitary, CMatrix};
use crate::measure::DiscreteMeasure;
use crate::operator::{tangent_project, Operator, Prepared, ETA_SIG};

pub type Coord = [f64; 4];

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeChart {
    extent: [usize; 4],
    spacing: Coord,
    origin: Coord,
}

impl LatticeChart {
    pub fn new(extent: [usize; 4], spacing: Coord, origin: Coord) -> Result<Self> {
        if extent.contains(&0) {
            return Err(CfsError::InvalidInput("every axis needs at least one node".into()));
        }
        if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) || origin.iter().any(|o| !o.is_finite()) {
            return Err(CfsError::InvalidInput("spacing must be positive and finite".into()));
        }
        Ok(Self { extent, spacing, origin })
    }

    /// `n^4` cells covering the unit box.
    pub fn unit_box(n: usize) -> Result<Self> {
        let s = 1.0 / n as f64;
        Self::new([n; 4], [s; 4], [0.0; 4])
    }

    pub fn extent(&self) -> [usize; 4] {
        self.extent
    }

    pub fn spacing(&self) -> Coord {
        self.spacing
    }

    pub fn origin(&self) -> Coord {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.extent.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn upper(&self) -> Coord {
        std::array::from_fn(|k| self.origin[k] + self.extent[k] as f64 * self.spacing[k])
    }

    /// Axis 0 varies slowest.
    pub fn index(&self, m: [usize; 4]) -> usize {
        ((m[0] * self.extent[1] + m[1]) * self.extent[2] + m[2]) * self.extent[3] + m[3]
    }

    pub fn multi_index(&self, mut i: usize) -> [usize; 4] {
        let mut m = [0; 4];
        for k in (0..4).rev() {
            m[k] = i % self.extent[k];
            i /= self.extent[k];
        }
        m
    }

    pub fn coord(&self, i: usize) -> Coord {
        let m = self.multi_index(i);
        std::array::from_fn(|k| self.origin[k] + (m[k] as f64 + 0.5) * self.spacing[k])
    }

    pub fn coords(&self) -> Vec<Coord> {
        (0..self.len()).map(|i| self.coord(i)).collect()
    }

    pub fn neighbor(&self, i: usize, axis: usize, forward: bool) -> Option<usize> {
        let mut m = self.multi_index(i);
        if forward {
            if m[axis] + 1 >= self.extent[axis] {
                return None;
            }
            m[axis] += 1;
        } else {
            if m[axis] == 0 {
                return None;
            }
            m[axis] -= 1;
        }
        Some(self.index(m))
    }

    pub fn contains(&self, p: &Coord) -> bool {
        let up = self.upper();
        (0..4).all(|k| p[k] >= self.origin[k] && p[k] < up[k])
    }

    /// Node of the cell containing `p`.
    pub fn locate(&self, p: &Coord) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let m: [usize; 4] = std::array::from_fn(|k| {
            let c = ((p[k] - self.origin[k]) / self.spacing[k]).floor() as usize;
            c.min(self.extent[k] - 1)
        });
        Some(self.index(m))
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Positive density `h` of the space-time measure.
#[derive(Clone, Debug, PartialEq)]
pub enum Density {
    Constant(f64),
    /// `exp(rate * x^axis)`.
    Exponential {
        axis: usize,
        rate: f64,
    },
    /// `1 + amplitude * cos(wave . x)` with `|amplitude| < 1`.
    Cosine {
        amplitude: f64,
        wave: Coord,
    },
}

impl Density {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Density::Constant(c) if !(c > 0.0 && c.is_finite()) => {
                Err(CfsError::InvalidInput(format!("density constant {c} must be positive")))
            }
            Density::Exponential { axis, rate } if axis > 3 || !rate.is_finite() => {
                Err(CfsError::InvalidInput("exponential density needs axis < 4 and finite rate".into()))
            }
            Density::Cosine { amplitude, .. } if !(amplitude.abs() < 1.0) => {
                Err(CfsError::InvalidInput(format!("cosine amplitude {amplitude} must lie in (-1, 1)")))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, p: &Coord) -> f64 {
        match *self {
            Density::Constant(c) => c,
            Density::Exponential { axis, rate } => (rate * p[axis]).exp(),
            Density::Cosine { amplitude, wave } => 1.0 + amplitude * (0..4).map(|k| wave[k] * p[k]).sum::<f64>().cos(),
        }
    }
}

/// Smooth maps from chart coordinates into the regular set.
#[derive(Clone, Debug)]
pub enum Embedding {
    /// `W diag(base + sum_j x^j slopes_j) W^†`.
    Commuting { frame: CMatrix, base: Vec<f64>, slopes: [Vec<f64>; 4], spin_dim: usize },
    /// `U diag(base) U^†` with `U = exp(i sum_j x^j H_j)`.
    UnitaryOrbit { base: Vec<f64>, generators: [CMatrix; 4], spin_dim: usize },
}

fn check_base(base: &[f64], spin_dim: usize) -> Result<()> {
    let pos = base.iter().filter(|&&d| d > ETA_SIG).count();
    let neg = base.iter().filter(|&&d| d < -ETA_SIG).count();
    let zero = base.iter().filter(|&&d| d == 0.0).count();
    if pos != spin_dim || neg != spin_dim || pos + neg + zero != base.len() {
        return Err(CfsError::Signature { positive: pos, negative: neg, zero, spin_dim });
    }
    Ok(())
}

impl Embedding {
    pub fn commuting(frame: CMatrix, base: Vec<f64>, slopes: [Vec<f64>; 4], spin_dim: usize) -> Result<Self> {
        let f = base.len();
        if frame.nrows() != f || frame.ncols() != f {
            return Err(CfsError::DimensionMismatch { expected: f, got: frame.nrows() });
        }
        if max_abs(&(&frame * frame.adjoint() - CMatrix::identity(f, f))) > 1e-10 {
            return Err(CfsError::InvalidInput("frame must be unitary".into()));
        }
        check_base(&base, spin_dim)?;
        for s in &slopes {
            if s.len() != f {
                return Err(CfsError::DimensionMismatch { expected: f, got: s.len() });
            }
            if s.iter().zip(&base).any(|(&sl, &b)| b == 0.0 && sl != 0.0) {
                return Err(CfsError::InvalidInput("slopes must vanish on the kernel".into()));
            }
            let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if s.iter().sum::<f64>().abs() > 1e-12 * scale {
                return Err(CfsError::InvalidInput("slopes must sum to zero so the trace is constant".into()));
            }
        }
        Ok(Embedding::Commuting { frame, base, slopes, spin_dim })
    }

    pub fn unitary_orbit(base: Vec<f64>, generators: [CMatrix; 4], spin_dim: usize) -> Result<Self> {
        let f = base.len();
        check_base(&base, spin_dim)?;
        for h in &generators {
            if h.nrows() != f || h.ncols() != f {
                return Err(CfsError::DimensionMismatch { expected: f, got: h.nrows() });
            }
            let defect = hermiticity_defect(h);
            if defect > 1e-12 * max_abs(h).max(1.0) {
                return Err(CfsError::NotHermitian { defect });
            }
        }
        Ok(Embedding::UnitaryOrbit { base, generators, spin_dim })
    }

    /// Random commuting family with base spectrum `(1.5, .., -0.5, .., 0, ..)`
    /// and trace-free normal slopes of size `slope_scale`.
    pub fn random_commuting(f: usize, n: usize, seed: u64, slope_scale: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame = random_unitary(&mut rng, f);
        let base = default_base(f, n);
        let picks = Self::picks(&base);
        let slopes = std::array::from_fn(|_| {
            let z: Vec<f64> = picks
                .iter()
                .map(|_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    slope_scale * g
                })
                .collect();
            let mean = z.iter().sum::<f64>() / z.len() as f64;
            let mut s = vec![0.0; f];
            for (&k, v) in picks.iter().zip(&z) {
                s[k] = v - mean;
            }
            s
        });
        Self::commuting(frame, base, slopes, n)
    }

    /// Random unitary-orbit family; each generator has operator norm
    /// `rotation_scale`.
    pub fn random_unitary_orbit(f: usize, n: usize, seed: u64, rotation_scale: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let generators = std::array::from_fn(|_| {
            let h = random_hermitian(&mut rng, f);
            let norm = crate::linalg::hermitian_eigen(&h).values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            h * c64(rotation_scale / norm, 0.0)
        });
        Self::unitary_orbit(default_base(f, n), generators, n)
    }

    /// Unitary orbit whose generators are `H` and `H^2` for one random `H`, so
    /// they commute and every chart translation acts by one conjugation.
    /// Generator `k` is `H` for even `k` and `H^2` for odd `k`, with operator
    /// norm `scales[k]`.
    pub fn random_abelian_orbit(f: usize, n: usize, seed: u64, scales: [f64; 4]) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, f);
        let powers = [h.clone(), &h * &h];
        let generators = std::array::from_fn(|k| {
            let g = &powers[k % 2];
            let norm = crate::linalg::hermitian_eigen(g).values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            g * c64(scales[k] / norm, 0.0)
        });
        Self::unitary_orbit(default_base(f, n), generators, n)
    }

    pub fn dim(&self) -> usize {
        match self {
            Embedding::Commuting { base, .. } | Embedding::UnitaryOrbit { base, .. } => base.len(),
        }
    }

    pub fn spin_dim(&self) -> usize {
        match self {
            Embedding::Commuting { spin_dim, .. } | Embedding::UnitaryOrbit { spin_dim, .. } => *spin_dim,
        }
    }

    fn picks(base: &[f64]) -> Vec<usize> {
        (0..base.len()).filter(|&k| base[k] != 0.0).collect()
    }

    pub fn prepared(&self, p: &Coord) -> Result<Prepared> {
        match self {
            Embedding::Commuting { frame, base, slopes, spin_dim } => {
                let picks = Self::picks(base);
                let values: Vec<f64> =
                    picks.iter().map(|&k| base[k] + (0..4).map(|j| p[j] * slopes[j][k]).sum::<f64>()).collect();
                for (&k, &v) in picks.iter().zip(&values) {
                    if v * base[k].signum() <= ETA_SIG {
                        return Err(CfsError::Signature {
                            positive: values.iter().filter(|&&v| v > ETA_SIG).count(),
                            negative: values.iter().filter(|&&v| v < -ETA_SIG).count(),
                            zero: base.len() - values.len(),
                            spin_dim: *spin_dim,
                        });
                    }
                }
                let vectors = CMatrix::from_fn(frame.nrows(), picks.len(), |r, c| frame[(r, picks[c])]);
                Ok(Prepared::from_parts(values, &vectors, *spin_dim))
            }
            Embedding::UnitaryOrbit { base, generators, spin_dim } => {
                let f = base.len();
                let mut h = CMatrix::zeros(f, f);
                for (j, g) in generators.iter().enumerate() {
                    h += g * c64(p[j], 0.0);
                }
                let u = exp_i_hermitian(&h, 1.0);
                let picks = Self::picks(base);
                let values = picks.iter().map(|&k| base[k]).collect();
                let vectors = CMatrix::from_fn(f, picks.len(), |r, c| u[(r, picks[c])]);
                Ok(Prepared::from_parts(values, &vectors, *spin_dim))
            }
        }
    }

    pub fn operator(&self, p: &Coord) -> Result<Operator> {
        self.prepared(p)?.to_operator()
    }

    pub fn matrix(&self, p: &Coord) -> Result<CMatrix> {
        Ok(self.prepared(p)?.matrix())
    }

    /// `|v| (X(p + d e) - X(p - d e)) / 2d` with `e = v / |v|`.
    pub fn pushforward(&self, p: &Coord, v: &Coord, step: f64) -> Result<CMatrix> {
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            let f = self.dim();
            return Ok(CMatrix::zeros(f, f));
        }
        let plus: Coord = std::array::from_fn(|k| p[k] + step * v[k] / norm);
        let minus: Coord = std::array::from_fn(|k| p[k] - step * v[k] / norm);
        Ok((self.matrix(&plus)? - self.matrix(&minus)?) * c64(0.5 * norm / step, 0.0))
    }
}

fn default_base(f: usize, n: usize) -> Vec<f64> {
    let mut base = vec![0.0; f];
    for k in 0..n {
        base[k] = 1.5 + 0.25 * k as f64;
        base[n + k] = -0.5 - 0.125 * k as f64;
    }
    base
}

pub trait VectorField: Sync {
    fn eval(&self, p: &Coord) -> Coord;
}

impl<F: Fn(&Coord) -> Coord + Sync> VectorField for F {
    fn eval(&self, p: &Coord) -> Coord {
        self(p)
    }
}

/// `sin^4(pi t)` on `[0, 1]`, zero outside; `C^3` at the ends.
#[inline]
fn bump(t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    let s = (std::f64::consts::PI * t).sin();
    let s2 = s * s;
    s2 * s2
}

fn bump_product(p: &Coord, lo: &Coord, hi: &Coord, skip: Option<usize>) -> f64 {
    (0..4).filter(|&k| Some(k) != skip).map(|k| bump((p[k] - lo[k]) / (hi[k] - lo[k]))).product()
}

/// Built-in vector fields in chart units.
#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Zero,
    Constant(Coord),
    /// `v^j = sum_k matrix[j][k] x^k + offset[j]`.
    Linear {
        matrix: [[f64; 4]; 4],
        offset: Coord,
    },
    /// `amplitude * prod_k bump((x^k - lo_k) / (hi_k - lo_k))`.
    Bump {
        amplitude: Coord,
        lo: Coord,
        hi: Coord,
    },
    /// `amplitude * e_axis * prod_{k != axis} bump(..)`; independent of
    /// `x^axis`, hence divergence free for densities independent of `x^axis`.
    ShearBump {
        axis: usize,
        amplitude: f64,
        lo: Coord,
        hi: Coord,
    },
}

impl VectorField for Field {
    fn eval(&self, p: &Coord) -> Coord {
        match self {
            Field::Zero => [0.0; 4],
            Field::Constant(v) => *v,
            Field::Linear { matrix, offset } => {
                std::array::from_fn(|j| offset[j] + (0..4).map(|k| matrix[j][k] * p[k]).sum::<f64>())
            }
            Field::Bump { amplitude, lo, hi } => {
                let w = bump_product(p, lo, hi, None);
                std::array::from_fn(|k| amplitude[k] * w)
            }
            Field::ShearBump { axis, amplitude, lo, hi } => {
                let mut v = [0.0; 4];
                v[*axis] = amplitude * bump_product(p, lo, hi, Some(*axis));
                v
            }
        }
    }
}

impl Field {
    pub fn validate(&self) -> Result<()> {
        match self {
            Field::Bump { lo, hi, .. } | Field::ShearBump { lo, hi, .. } if (0..4).any(|k| !(hi[k] > lo[k])) => {
                Err(CfsError::InvalidInput("bump support must have hi > lo on every axis".into()))
            }
            Field::ShearBump { axis, .. } if *axis > 3 => Err(CfsError::InvalidInput("axis must be < 4".into())),
            _ => Ok(()),
        }
    }
}

/// Node samples of a vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct GridVectorField {
    pub values: Vec<Coord>,
}

impl GridVectorField {
    pub fn sample(field: &dyn VectorField, chart: &LatticeChart) -> Self {
        Self { values: (0..chart.len()).map(|i| field.eval(&chart.coord(i))).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|c| c.is_finite()))
    }

    /// True when the field vanishes on the first `margin` layers along axis 0.
    pub fn vanishes_in_past(&self, chart: &LatticeChart, margin: usize) -> bool {
        (0..chart.len()).filter(|&i| chart.multi_index(i)[0] < margin).all(|i| self.values[i] == [0.0; 4])
    }
}

/// `(1/h) d_j (h v^j)` on the grid: central differences inside, second
/// order one-sided differences at chart faces (first order on axes with
/// fewer than three nodes). Every stencil is written in differences, so a
/// flux constant along its own axis has exactly zero divergence.
pub fn divergence(v: &GridVectorField, chart: &LatticeChart, density: &Density) -> Vec<f64> {
    let h: Vec<f64> = (0..chart.len()).map(|i| density.eval(&chart.coord(i))).collect();
    let flux = |i: usize, j: usize| h[i] * v.values[i][j];
    (0..chart.len())
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..4 {
                let d = chart.spacing[j];
                let back = chart.neighbor(i, j, false);
                let fwd = chart.neighbor(i, j, true);
                acc += match (back, fwd) {
                    (Some(b), Some(f)) => (flux(f, j) - flux(b, j)) / (2.0 * d),
                    (None, Some(f)) => match chart.neighbor(f, j, true) {
                        Some(ff) => (4.0 * (flux(f, j) - flux(i, j)) - (flux(ff, j) - flux(i, j))) / (2.0 * d),
                        None => (flux(f, j) - flux(i, j)) / d,
                    },
                    (Some(b), None) => match chart.neighbor(b, j, false) {
                        Some(bb) => (4.0 * (flux(i, j) - flux(b, j)) - (flux(i, j) - flux(bb, j))) / (2.0 * d),
                        None => (flux(i, j) - flux(b, j)) / d,
                    },
                    (None, None) => 0.0,
                };
            }
            acc / h[i]
        })
        .collect()
}

/// `(1/h) d_j (h v^j)` at an arbitrary point by central differences of
/// step `step`.
pub fn pointwise_divergence(field: &dyn VectorField, density: &Density, p: &Coord, step: f64) -> f64 {
    let mut acc = 0.0;
    for j in 0..4 {
        let mut a = *p;
        let mut b = *p;
        a[j] += step;
        b[j] -= step;
        acc += density.eval(&a) * field.eval(&a)[j] - density.eval(&b) * field.eval(&b)[j];
    }
    acc / (2.0 * step * density.eval(p))
}

/// Fixed-substep fourth order integration of the flow of a field together
/// with the log-Jacobian of the measure `h d^4x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowConfig {
    pub substeps: usize,
    pub div_step: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { substeps: 8, div_step: 1e-5 }
    }
}

/// `(Phi_tau(p), log J_tau(p))`.
pub fn flow_point(field: &dyn VectorField, density: &Density, p: &Coord, tau: f64, cfg: &FlowConfig) -> (Coord, f64) {
    if tau == 0.0 {
        return (*p, 0.0);
    }
    let rhs = |y: &[f64; 5]| -> [f64; 5] {
        let q = [y[0], y[1], y[2], y[3]];
        let v = field.eval(&q);
        [v[0], v[1], v[2], v[3], pointwise_divergence(field, density, &q, cfg.div_step)]
    };
    let dt = tau / cfg.substeps.max(1) as f64;
    let mut y = [p[0], p[1], p[2], p[3], 0.0];
    let axpy = |y: &[f64; 5], k: &[f64; 5], s: f64| -> [f64; 5] { std::array::from_fn(|i| y[i] + s * k[i]) };
    for _ in 0..cfg.substeps.max(1) {
        let k1 = rhs(&y);
        let k2 = rhs(&axpy(&y, &k1, 0.5 * dt));
        let k3 = rhs(&axpy(&y, &k2, 0.5 * dt));
        let k4 = rhs(&axpy(&y, &k3, dt));
        for i in 0..5 {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    ([y[0], y[1], y[2], y[3]], y[4])
}

/// A boundary facet of a node region.
#[derive(Clone, Debug, PartialEq)]
pub struct Facet {
    pub node: usize,
    pub axis: usize,
    /// `+1` or `-1`: the outward normal is `outward * e_axis`.
    pub outward: f64,
    pub midpoint: Coord,
    pub area: f64,
    /// The facet lies on the chart boundary rather than between two nodes.
    pub chart_face: bool,
}

/// Node indicator of a region of the chart.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    inside: Vec<bool>,
}

impl Region {
    pub fn from_indicator(inside: Vec<bool>) -> Self {
        Self { inside }
    }

    pub fn from_predicate(chart: &LatticeChart, pred: impl Fn(&Coord) -> bool) -> Self {
        Self { inside: (0..chart.len()).map(|i| pred(&chart.coord(i))).collect() }
    }

    pub fn all(chart: &LatticeChart) -> Self {
        Self { inside: vec![true; chart.len()] }
    }

    pub fn empty(chart: &LatticeChart) -> Self {
        Self { inside: vec![false; chart.len()] }
    }

    /// Nodes with `lo <= x < hi` componentwise.
    pub fn boxed(chart: &LatticeChart, lo: Coord, hi: Coord) -> Self {
        Self::from_predicate(chart, |p| (0..4).all(|k| p[k] >= lo[k] && p[k] < hi[k]))
    }

    /// Nodes with `x^axis < threshold`.
    pub fn below(chart: &LatticeChart, axis: usize, threshold: f64) -> Self {
        Self::from_predicate(chart, |p| p[axis] < threshold)
    }

    pub fn len(&self) -> usize {
        self.inside.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inside.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.inside[i]
    }

    pub fn indicator(&self) -> &[bool] {
        &self.inside
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.inside.len()).filter(|&i| self.inside[i]).collect()
    }

    pub fn complement(&self) -> Self {
        Self { inside: self.inside.iter().map(|b| !b).collect() }
    }

    pub fn intersection(&self, other: &Region) -> Self {
        Self { inside: self.inside.iter().zip(&other.inside).map(|(a, b)| *a && *b).collect() }
    }

    /// Membership of an arbitrary point through its containing cell.
    pub fn contains_point(&self, chart: &LatticeChart, p: &Coord) -> bool {
        chart.locate(p).is_some_and(|i| self.inside[i])
    }

    pub fn facets(&self, chart: &LatticeChart) -> Vec<Facet> {
        let vol = chart.cell_volume();
        let mut out = Vec::new();
        for i in (0..self.inside.len()).filter(|&i| self.inside[i]) {
            let c = chart.coord(i);
            for axis in 0..4 {
                for forward in [false, true] {
                    let nb = chart.neighbor(i, axis, forward);
                    if nb.is_some_and(|j| self.inside[j]) {
                        continue;
                    }
                    let outward = if forward { 1.0 } else { -1.0 };
                    let mut midpoint = c;
                    midpoint[axis] += 0.5 * outward * chart.spacing[axis];
                    out.push(Facet {
                        node: i,
                        axis,
                        outward,
                        midpoint,
                        area: vol / chart.spacing[axis],
                        chart_face: nb.is_none(),
                    });
                }
            }
        }
        out
    }
}

/// Signed flux weight `h (v . n) dA` of every boundary facet, in the order
/// of `Region::facets`.
pub fn boundary_flux_measure(
    v: &dyn VectorField,
    region: &Region,
    chart: &LatticeChart,
    density: &Density,
) -> Result<Vec<(Facet, f64)>> {
    let facets = region.facets(chart);
    let mut out = Vec::with_capacity(facets.len());
    for f in facets {
        let inner_ok = region.contains(f.node);
        let outer_ok = chart.neighbor(f.node, f.axis, f.outward > 0.0).is_none_or(|j| !region.contains(j));
        if !(inner_ok && outer_ok) || f.outward.abs() != 1.0 {
            return Err(CfsError::InvalidInput(format!("facet orientation inconsistent at node {}", f.node)));
        }
        let w = density.eval(&f.midpoint) * v.eval(&f.midpoint)[f.axis] * f.outward * f.area;
        out.push((f, w));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussCheck {
    pub defect: f64,
    /// The test function vanishes on every chart-face node.
    pub compact: bool,
}

/// `|sum_i rho_i (div v f + D_v f)(x_i)|`, with the grid divergence and a
/// central-difference gradient of `f`.
pub fn gauss_divergence_check(
    v: &dyn VectorField,
    f: &dyn Fn(&Coord) -> f64,
    chart: &LatticeChart,
    density: &Density,
) -> GaussCheck {
    let grid = GridVectorField::sample(v, chart);
    let div = divergence(&grid, chart, density);
    let step = 1e-5 * chart.min_spacing();
    let vol = chart.cell_volume();
    let mut terms = Vec::with_capacity(chart.len());
    let mut compact = true;
    for i in 0..chart.len() {
        let p = chart.coord(i);
        let m = chart.multi_index(i);
        if (0..4).any(|k| m[k] == 0 || m[k] + 1 == chart.extent[k]) && f(&p) != 0.0 {
            compact = false;
        }
        let vi = grid.values[i];
        let mut dvf = 0.0;
        for k in 0..4 {
            if vi[k] == 0.0 {
                continue;
            }
            let mut a = p;
            let mut b = p;
            a[k] += step;
            b[k] -= step;
            dvf += vi[k] * (f(&a) - f(&b)) / (2.0 * step);
        }
        terms.push(density.eval(&p) * vol * (div[i] * f(&p) + dvf));
    }
    GaussCheck { defect: crate::linalg::pairwise_sum(&terms).abs(), compact }
}

/// Pull-back indicator of the flowed region: node `x` belongs to the result
/// iff `Phi_{-tau}(x)` lies in a cell of `region`. Fails when a node of
/// `region` leaves the chart under `Phi_tau`.
pub fn flow_region(
    region: &Region,
    v: &dyn VectorField,
    tau: f64,
    chart: &LatticeChart,
    cfg: &FlowConfig,
) -> Result<Region> {
    let density = Density::Constant(1.0);
    for i in region.indices() {
        let (q, _) = flow_point(v, &density, &chart.coord(i), tau, cfg);
        if !chart.contains(&q) {
            return Err(CfsError::InvalidInput(format!("trajectory of node {i} exits the chart")));
        }
    }
    let inside = (0..chart.len())
        .map(|i| {
            let (q, _) = flow_point(v, &density, &chart.coord(i), -tau, cfg);
            region.contains_point(chart, &q)
        })
        .collect();
    Ok(Region { inside })
}

/// A lattice realised as a measure: sample points in chart coordinates,
/// weights and the embedded operators.
#[derive(Clone, Debug)]
pub struct LatticeBackground {
    pub chart: LatticeChart,
    pub embedding: Embedding,
    pub density: Density,
    pub coords: Vec<Coord>,
    pub weights: Vec<f64>,
    pub prepared: Vec<Prepared>,
}

impl LatticeBackground {
    pub fn new(chart: LatticeChart, embedding: Embedding, density: Density) -> Result<Self> {
        density.validate()?;
        let coords = chart.coords();
        let vol = chart.cell_volume();
        let weights = coords.iter().map(|p| density.eval(p) * vol).collect();
        let prepared = coords.iter().map(|p| embedding.prepared(p)).collect::<Result<_>>()?;
        Ok(Self { chart, embedding, density, coords, weights, prepared })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn measure(&self) -> Result<DiscreteMeasure> {
        let points = self.prepared.iter().map(|p| p.to_operator()).collect::<Result<_>>()?;
        DiscreteMeasure::new(points, self.weights.clone())
    }

    /// Background transported by `Phi_tau`: points move along the flow and
    /// weights pick up the Jacobian of `h d^4x`.
    pub fn pulled_back(&self, v: &dyn VectorField, tau: f64, cfg: &FlowConfig) -> Result<Self> {
        let mut coords = Vec::with_capacity(self.len());
        let mut weights = Vec::with_capacity(self.len());
        for (p, w) in self.coords.iter().zip(&self.weights) {
            let (q, log_j) = flow_point(v, &self.density, p, tau, cfg);
            coords.push(q);
            weights.push(w * log_j.exp());
        }
        let prepared = coords.iter().map(|p| self.embedding.prepared(p)).collect::<Result<_>>()?;
        Ok(Self {
            chart: self.chart.clone(),
            embedding: self.embedding.clone(),
            density: self.density.clone(),
            coords,
            weights,
            prepared,
        })
    }
}

/// Jet `(div v, dX(v))` of a vector field on the lattice nodes. Fails when
/// the pushforward vanishes at a node where `v` does not.
pub fn inner_solution(v: &dyn VectorField, bg: &LatticeBackground) -> Result<Jet> {
    let grid = GridVectorField::sample(v, &bg.chart);
    if !grid.is_finite() {
        return Err(CfsError::InvalidInput("vector field has non-finite values".into()));
    }
    let scalar = divergence(&grid, &bg.chart, &bg.density);
    let step = 1e-5 * bg.chart.min_spacing();
    let mut vector = Vec::with_capacity(bg.len());
    for (i, p) in bg.coords.iter().enumerate() {
        let vi = grid.values[i];
        let f = bg.embedding.dim();
        if vi == [0.0; 4] {
            vector.push(CMatrix::zeros(f, f));
            continue;
        }
        let d = bg.embedding.pushforward(p, &vi, step)?;
        let t = tangent_project(&bg.prepared[i], &d);
        let vnorm = vi.iter().map(|c| c * c).sum::<f64>().sqrt();
        if crate::linalg::frobenius_norm(&t) <= 1e-12 * vnorm * bg.prepared[i].norm() {
            return Err(CfsError::Degenerate(format!("pushforward vanishes at node {i}")));
        }
        vector.push(t);
    }
    Jet::new(scalar, vector)
}

/// CSV rows `node,x0,x1,x2,x3,<columns>`.
pub fn nodes_csv(chart: &LatticeChart, columns: &[(&str, &[f64])]) -> Result<String> {
    for (name, col) in columns {
        if col.len() != chart.len() {
            return Err(CfsError::InvalidInput(format!("column {name} has {} rows", col.len())));
        }
    }
    let mut out = String::from("node,x0,x1,x2,x3");
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for i in 0..chart.len() {
        let p = chart.coord(i);
        out.push_str(&format!("{i},{},{},{},{}", p[0], p[1], p[2], p[3]));
        for (_, col) in columns {
            out.push_str(&format!(",{:e}", col[i]));
        }
        out.push('\n');
    }
    Ok(out)
}

/// CSV rows `node,x0..x3,v0..v3`.
pub fn field_csv(chart: &LatticeChart, v: &GridVectorField) -> Result<String> {
    let comps: Vec<Vec<f64>> = (0..4).map(|k| v.values.iter().map(|c| c[k]).collect()).collect();
    nodes_csv(chart, &[("v0", &comps[0]), ("v1", &comps[1]), ("v2", &comps[2]), ("v3", &comps[3])])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> LatticeChart {
        LatticeChart::unit_box(n).unwrap()
    }

    #[test]
    fn index_round_trip() {
        let c = LatticeChart::new([2, 3, 4, 5], [1.0; 4], [0.0; 4]).unwrap();
        for i in 0..c.len() {
            assert_eq!(c.index(c.multi_index(i)), i);
            assert_eq!(c.locate(&c.coord(i)), Some(i));
        }
    }

    #[test]
    fn divergence_examples() {
        let c = unit(6);
        let one = Density::Constant(1.0);
        let constant = GridVectorField::sample(&Field::Constant([0.3, -1.0, 2.0, 0.5]), &c);
        assert!(divergence(&constant, &c, &one).iter().all(|d| d.abs() < 1e-12));
        let identity = Field::Linear {
            matrix: std::array::from_fn(|j| std::array::from_fn(|k| f64::from(u8::from(j == k)))),
            offset: [0.0; 4],
        };
        let div = divergence(&GridVectorField::sample(&identity, &c), &c, &one);
        assert!(div.iter().all(|d| (d - 4.0).abs() < 1e-12));
        let exp = Density::Exponential { axis: 0, rate: 1.0 };
        let e0 = GridVectorField::sample(&Field::Constant([1.0, 0.0, 0.0, 0.0]), &c);
        let div = divergence(&e0, &c, &exp);
        // Central difference of exp over +-h: sinh(h)/h.
        let h = c.spacing()[0];
        let interior = (0..c.len()).filter(|&i| (1..5).contains(&c.multi_index(i)[0]));
        for i in interior {
            assert!((div[i] - h.sinh() / h).abs() < 1e-12);
        }
        assert!(div.iter().all(|d| (d - 1.0).abs() < 5.0 * h * h));
    }

    #[test]
    fn inner_solution_examples() {
        let c = unit(4);
        let bg = LatticeBackground::new(c, Embedding::random_commuting(2, 1, 1, 0.05).unwrap(), Density::Constant(1.0))
            .unwrap();
        let jet = inner_solution(&Field::Zero, &bg).unwrap();
        assert!(jet.scalar.iter().all(|&b| b == 0.0));
        assert!(jet.vector.iter().all(|u| max_abs(u) == 0.0));

        let identity = Field::Linear {
            matrix: std::array::from_fn(|j| std::array::from_fn(|k| f64::from(u8::from(j == k)))),
            offset: [0.0; 4],
        };
        let jet = inner_solution(&identity, &bg).unwrap();
        assert!(jet.scalar.iter().all(|b| (b - 4.0).abs() < 1e-12));
        jet.check_tangent(&bg.measure().unwrap()).unwrap();
        // Commuting family: dX(v) = W diag(sum_j v^j slopes_j) W^†.
        if let Embedding::Commuting { frame, slopes, .. } = &bg.embedding {
            let p = bg.coords[5];
            let d: Vec<C64> = (0..2).map(|k| c64((0..4).map(|j| p[j] * slopes[j][k]).sum(), 0.0)).collect();
            let mean = (d[0] + d[1]) * 0.5;
            let d: Vec<C64> = d.iter().map(|z| z - mean).collect();
            // The trace-fixing constraint removes the mean.
            let exact = frame * CMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)) * frame.adjoint();
            assert!(max_abs(&(exact - &jet.vector[5])) < 1e-8);
        }

        let shear = Field::ShearBump { axis: 1, amplitude: 1.0, lo: [0.0; 4], hi: [1.0; 4] };
        let jet = inner_solution(&shear, &bg).unwrap();
        assert!(jet.scalar.iter().all(|&b| b == 0.0));
    }
    use crate::linalg::C64;

    #[test]
    fn flux_examples() {
        let c = unit(4);
        let one = Density::Constant(1.0);
        let all = Region::all(&c);
        let e1 = Field::Constant([0.0, 1.0, 0.0, 0.0]);
        let flux = boundary_flux_measure(&e1, &all, &c, &one).unwrap();
        let total: f64 = flux.iter().map(|(_, w)| w).sum();
        assert!(total.abs() < 1e-14);
        let top: f64 = flux.iter().filter(|(f, _)| f.axis == 1 && f.outward > 0.0).map(|(_, w)| w).sum();
        assert!((top - 1.0).abs() < 1e-14);
        assert!(flux.iter().all(|(f, _)| f.chart_face));

        let tangent = Field::Constant([0.0; 4]);
        assert!(boundary_flux_measure(&tangent, &all, &c, &one).unwrap().iter().all(|(_, w)| *w == 0.0));

        let inner = Region::boxed(&c, [0.25; 4], [0.75; 4]);
        let two = Density::Constant(2.0);
        let a = boundary_flux_measure(&e1, &inner, &c, &one).unwrap();
        let b = boundary_flux_measure(&e1, &inner, &c, &two).unwrap();
        for ((_, wa), (_, wb)) in a.iter().zip(&b) {
            assert_eq!(2.0 * wa, *wb);
        }
        assert!(a.iter().all(|(f, _)| !f.chart_face));
    }

    #[test]
    fn gauss_defect_is_second_order() {
        let one = Density::Constant(1.0);
        let v = Field::Constant([0.3, 1.0, -0.4, 0.2]);
        let f = |p: &Coord| bump_product(p, &[0.0; 4], &[1.0; 4], None) * (1.0 + p[1]);
        let zero = |_: &Coord| 0.0;
        assert_eq!(gauss_divergence_check(&v, &zero, &unit(4), &one).defect, 0.0);
        assert_eq!(gauss_divergence_check(&Field::Zero, &f, &unit(4), &one).defect, 0.0);
        let g = |p: &Coord| bump_product(p, &[0.1; 4], &[0.9; 4], None) * (1.0 + p[1] * p[1]);
        let coarse = gauss_divergence_check(&v, &g, &unit(6), &one);
        let fine = gauss_divergence_check(&v, &g, &unit(12), &one);
        assert!(coarse.compact && fine.compact);
        assert!(fine.defect < coarse.defect / 3.0, "{} {}", coarse.defect, fine.defect);
    }

    #[test]
    fn flow_examples() {
        let c = unit(6);
        let cfg = FlowConfig::default();
        let region = Region::boxed(&c, [0.0, 0.0, 0.0, 0.0], [1.0, 0.5, 1.0, 1.0]);
        let e1 = Field::Constant([0.0, 1.0, 0.0, 0.0]);
        assert_eq!(flow_region(&region, &e1, 0.0, &c, &cfg).unwrap(), region);
        let shifted = flow_region(&region, &e1, c.spacing()[1], &c, &cfg).unwrap();
        let expected = Region::from_predicate(&c, |p| p[1] > c.spacing()[1] && p[1] < 0.5 + c.spacing()[1]);
        assert_eq!(shifted, expected);
        let whole = Region::all(&c);
        assert!(flow_region(&whole, &e1, c.spacing()[1], &c, &cfg).is_err());

        let v = Field::Bump { amplitude: [0.2, 0.5, -0.3, 0.1], lo: [0.0; 4], hi: [1.0; 4] };
        let dens = Density::Cosine { amplitude: 0.3, wave: [1.0, 2.0, 0.0, -1.0] };
        let p = [0.3, 0.45, 0.6, 0.52];
        let (q, lj) = flow_point(&v, &dens, &p, 0.1, &cfg);
        let (back, lj2) = flow_point(&v, &dens, &q, -0.1, &cfg);
        assert!((0..4).all(|k| (back[k] - p[k]).abs() < 1e-10));
        assert!((lj + lj2).abs() < 1e-9);
    }

    #[test]
    fn embeddings_are_valid() {
        let c = unit(3);
        for emb in [
            Embedding::random_commuting(3, 1, 2, 0.2).unwrap(),
            Embedding::random_unitary_orbit(4, 2, 3, 0.15).unwrap(),
        ] {
            for p in c.coords() {
                let op = emb.operator(&p).unwrap();
                assert!((op.trace() - emb.prepared(&p).unwrap().trace()).abs() < 1e-12);
            }
        }
        let bad =
            Embedding::commuting(CMatrix::identity(2, 2), vec![1.0, 1.0], std::array::from_fn(|_| vec![0.0; 2]), 1);
        assert!(matches!(bad, Err(CfsError::Signature { .. })));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let c = unit(2);
        let g = GridVectorField::sample(&Field::Constant([1.0, 0.0, 0.0, 0.0]), &c);
        let csv = field_csv(&c, &g).unwrap();
        assert_eq!(csv.lines().count(), 17);
        assert!(csv.starts_with("node,x0,x1,x2,x3,v0,v1,v2,v3"));
    }
}
