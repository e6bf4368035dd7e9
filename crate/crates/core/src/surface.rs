//! Surface layer integrals: double sums over `Omega x (M \ Omega)` of
//! differentiated Lagrangians, on discrete measures (jets) and on lattice
//! backgrounds (vector fields in chart coordinates).

use crate::error::{CfsError, Result};
use crate::jets::{ell_function, nabla, CurveStencil, FdConfig, Jet, NestOrder};
use crate::lattice::{
    boundary_flux_measure, divergence, inner_solution, pointwise_divergence, Coord, Facet, Field, FlowConfig,
    GridVectorField, LatticeBackground, Region, VectorField,
};
use crate::linalg::{c64, frobenius_norm, pairwise_sum, trace, CMatrix};
use crate::measure::{DiscreteMeasure, MultiplierSet};
use crate::operator::{pair_lagrangian, project_to_freg, KernelParams, Operator, Prepared};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
struct Neumaier {
    sum: f64,
    carry: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Sum of `term(x, y)` over `xs x ys`, componentwise, rows in order.
fn pair_sums<const K: usize>(
    xs: &[usize],
    ys: &[usize],
    mut term: impl FnMut(usize, usize) -> Result<[f64; K]>,
) -> Result<[f64; K]> {
    let mut acc = [Neumaier::default(); K];
    for &x in xs {
        for &y in ys {
            let t = term(x, y)?;
            for k in 0..K {
                acc[k].add(t[k]);
            }
        }
    }
    Ok(acc.map(|a| a.value()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct OsiResult {
    /// Sum of `decomposition`.
    pub value: f64,
    pub decomposition: Vec<(&'static str, f64)>,
    pub pair_count: usize,
}

impl OsiResult {
    fn from_terms(decomposition: Vec<(&'static str, f64)>, pair_count: usize) -> Self {
        let value = decomposition.iter().map(|(_, v)| v).sum();
        Self { value, decomposition, pair_count }
    }

    /// Sum of the absolute term values; a scale for relative statements.
    pub fn magnitude(&self) -> f64 {
        self.decomposition.iter().map(|(_, v)| v.abs()).sum()
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.decomposition.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

fn split(omega: &[bool], len: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if omega.len() != len {
        return Err(CfsError::DimensionMismatch { expected: len, got: omega.len() });
    }
    Ok(((0..len).filter(|&i| omega[i]).collect(), (0..len).filter(|&i| !omega[i]).collect()))
}

/// Base points and first-derivative stencils of a jet on its measure.
struct JetStencils {
    base: Vec<Prepared>,
    along: Vec<CurveStencil>,
}

impl JetStencils {
    fn new(rho: &DiscreteMeasure, jet: &Jet, fd: &FdConfig) -> Result<Self> {
        if jet.len() != rho.len() {
            return Err(CfsError::DimensionMismatch { expected: rho.len(), got: jet.len() });
        }
        let along =
            rho.points().iter().zip(&jet.vector).map(|(x, u)| CurveStencil::new(x, u, fd)).collect::<Result<_>>()?;
        Ok(Self { base: rho.prepared(), along })
    }
}

/// `[(b_x - b_y) L, D_1 L, -D_2 L]` weighted, summed over `xs x ys`.
fn antisymmetric_terms(
    v: &Jet,
    rho: &DiscreteMeasure,
    mult: &MultiplierSet,
    fd: &FdConfig,
    xs: &[usize],
    ys: &[usize],
) -> Result<OsiResult> {
    let st = JetStencils::new(rho, v, fd)?;
    let params = mult.kernel();
    let w = rho.weights();
    let [s, d1, d2] = pair_sums(xs, ys, |x, y| {
        let wxy = w[x] * w[y];
        let l = pair_lagrangian(&st.base[x], &st.base[y], &params)?;
        let a = st.along[x].apply(|p| pair_lagrangian(p, &st.base[y], &params))?;
        let b = st.along[y].apply(|p| pair_lagrangian(&st.base[x], p, &params))?;
        Ok([wxy * (v.scalar[x] - v.scalar[y]) * l, wxy * a, -(wxy * b)])
    })?;
    Ok(OsiResult::from_terms(vec![("scalar", s), ("first", d1), ("second", d2)], xs.len() * ys.len()))
}

/// `sum_{x in Omega} sum_{y not in Omega} rho_x rho_y (nabla_{1,v} - nabla_{2,v}) L_kappa(x, y)`.
pub fn osi_antisymmetric(
    v: &Jet,
    omega: &[bool],
    rho: &DiscreteMeasure,
    mult: &MultiplierSet,
    fd: &FdConfig,
) -> Result<OsiResult> {
    let (inside, outside) = split(omega, rho.len())?;
    antisymmetric_terms(v, rho, mult, fd, &inside, &outside)
}

/// The integrand of `osi_antisymmetric` summed over `Omega x Omega`; zero
/// by antisymmetry.
pub fn interior_cancellation(
    v: &Jet,
    omega: &[bool],
    rho: &DiscreteMeasure,
    mult: &MultiplierSet,
    fd: &FdConfig,
) -> Result<OsiResult> {
    let (inside, _) = split(omega, rho.len())?;
    antisymmetric_terms(v, rho, mult, fd, &inside, &inside)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Conservation {
    pub lhs: f64,
    /// `sum_{x in Omega} rho_x b(x) s`.
    pub rhs: f64,
    /// `sum_{x in Omega} rho_x (2 nabla_v (l + s) - Delta v - b s)(x)`.
    pub identity_value: f64,
    pub proof_identity_defect: f64,
    /// Sum of absolute contributions to `identity_value`.
    pub scale: f64,
    /// `|lhs|` difference between the configured and the plain central stencil.
    pub fd_error: f64,
}

/// Conservation law for a jet and the algebraic identity behind it. The
/// identity holds on every background; `lhs = rhs` needs a critical
/// background and a linearized solution.
pub fn conservation_check(
    v: &Jet,
    omega: &[bool],
    rho: &DiscreteMeasure,
    mult: &MultiplierSet,
    fd: &FdConfig,
) -> Result<Conservation> {
    let (inside, _) = split(omega, rho.len())?;
    let lhs = osi_antisymmetric(v, omega, rho, mult, fd)?.value;
    let other = FdConfig { richardson: !fd.richardson, ..*fd };
    let fd_error = (lhs - osi_antisymmetric(v, omega, rho, mult, &other)?.value).abs();

    let st = JetStencils::new(rho, v, fd)?;
    let params = mult.kernel();
    let w = rho.weights();
    let all: Vec<usize> = (0..rho.len()).collect();
    let ell = ell_function(&st.base, w, mult);
    let mut identity = Vec::with_capacity(inside.len());
    let mut rhs = Vec::with_capacity(inside.len());
    let mut scale = 0.0;
    for &x in &inside {
        let b = v.scalar[x];
        let grad = nabla(b, &v.vector[x], &ell, &rho.points()[x], fd)? + b * mult.s_param;
        let [delta] = pair_sums(&[x], &all, |x, y| {
            let l = pair_lagrangian(&st.base[x], &st.base[y], &params)?;
            let a = st.along[x].apply(|p| pair_lagrangian(p, &st.base[y], &params))?;
            let c = st.along[y].apply(|p| pair_lagrangian(&st.base[x], p, &params))?;
            Ok([w[y] * ((b + v.scalar[y]) * l + a + c)])
        })?;
        let delta = delta - b * mult.s_param;
        identity.push(w[x] * (2.0 * grad - delta - b * mult.s_param));
        rhs.push(w[x] * b * mult.s_param);
        scale += w[x] * (2.0 * grad.abs() + delta.abs() + (b * mult.s_param).abs());
    }
    let identity_value = pairwise_sum(&identity);
    Ok(Conservation {
        lhs,
        rhs: pairwise_sum(&rhs),
        identity_value,
        proof_identity_defect: (lhs - identity_value).abs(),
        scale,
        fd_error,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bilinear {
    /// `(u, v)` in the configured nesting order.
    pub value: OsiResult,
    /// `(v, u)`.
    pub swapped: f64,
    pub symmetric: f64,
    pub antisymmetric: f64,
    /// Difference between the two nesting orders of every mixed derivative.
    pub dual_order_gap: f64,
}

/// Per-node data for the bilinear integrand: stencils of both jets and the
/// second-derivative surface `(s, t) -> project(x + s u + t v)`.
struct BilinearStencils {
    u: JetStencils,
    v: JetStencils,
    /// `(weight_s weight_t / (h_s h_t), point)`, `s` outer.
    surface: Vec<Vec<(f64, usize, Prepared)>>,
}

fn surface_points(x: &Operator, u: &CMatrix, v: &CMatrix, fd: &FdConfig) -> Result<Vec<(f64, usize, Prepared)>> {
    if frobenius_norm(u) == 0.0 || frobenius_norm(v) == 0.0 {
        return Ok(Vec::new());
    }
    let scale = x.prepare().norm();
    let hs = fd.step(scale, u)?;
    let ht = fd.step(scale, v)?;
    let st = fd.stencil();
    let tr = trace(x.matrix()).re;
    let mut out = Vec::with_capacity(st.len() * st.len());
    for (i, &(os, ws)) in st.iter().enumerate() {
        for &(ot, wt) in st {
            let m = x.matrix() + u * c64(os * hs, 0.0) + v * c64(ot * ht, 0.0);
            let p = project_to_freg(&m, x.spin_dim(), tr)?.prepare();
            out.push((ws * wt / (hs * ht), i, p));
        }
    }
    Ok(out)
}

/// `sum_k w_k g_k` with the outer index of `outer_of[k]` summed last
/// (`OuterFirst`) or first (`OuterSecond`).
fn nested(values: &[(f64, usize, usize, f64)], order: NestOrder) -> f64 {
    // (weight, outer index, inner index, value)
    let n_outer = values.iter().map(|t| t.1 + 1).max().unwrap_or(0);
    let n_inner = values.iter().map(|t| t.2 + 1).max().unwrap_or(0);
    let (major, minor) = match order {
        NestOrder::OuterFirst => (n_outer, n_inner),
        NestOrder::OuterSecond => (n_inner, n_outer),
    };
    let mut acc = 0.0;
    for a in 0..major {
        let mut row = 0.0;
        for b in 0..minor {
            let (o, i) = match order {
                NestOrder::OuterFirst => (a, b),
                NestOrder::OuterSecond => (b, a),
            };
            for t in values.iter().filter(|t| t.1 == o && t.2 == i) {
                row += t.0 * t.3;
            }
        }
        acc += row;
    }
    acc
}

fn bilinear_stencils(u: &Jet, v: &Jet, rho: &DiscreteMeasure, fd: &FdConfig) -> Result<BilinearStencils> {
    let su = JetStencils::new(rho, u, fd)?;
    let sv = JetStencils::new(rho, v, fd)?;
    let surface = rho
        .points()
        .iter()
        .enumerate()
        .map(|(i, x)| surface_points(x, &u.vector[i], &v.vector[i], fd))
        .collect::<Result<_>>()?;
    Ok(BilinearStencils { u: su, v: sv, surface })
}

/// `B(u, v)` in both nesting orders.
fn bilinear_value(
    u: &Jet,
    v: &Jet,
    rho: &DiscreteMeasure,
    mult: &MultiplierSet,
    fd: &FdConfig,
    xs: &[usize],
    ys: &[usize],
) -> Result<(OsiResult, f64)> {
    let bs = bilinear_stencils(u, v, rho, fd)?;
    let params = mult.kernel();
    let w = rho.weights();
    let base = &bs.u.base;
    let st = fd.stencil();
    let mut alt = Neumaier::default();
    let terms = pair_sums(xs, ys, |x, y| {
        let wxy = w[x] * w[y];
        let (ax, ay, bx, by) = (u.scalar[x], u.scalar[y], v.scalar[x], v.scalar[y]);
        let l = pair_lagrangian(&base[x], &base[y], &params)?;
        let d1v = bs.v.along[x].apply(|p| pair_lagrangian(p, &base[y], &params))?;
        let d2v = bs.v.along[y].apply(|p| pair_lagrangian(&base[x], p, &params))?;
        let d1u = bs.u.along[x].apply(|p| pair_lagrangian(p, &base[y], &params))?;
        let d2u = bs.u.along[y].apply(|p| pair_lagrangian(&base[x], p, &params))?;
        // Same-argument second derivatives on the surface stencils.
        let same = |node: usize, first: bool| -> Result<[f64; 2]> {
            let mut vals = Vec::with_capacity(bs.surface[node].len());
            for (k, (c, i, p)) in bs.surface[node].iter().enumerate() {
                let g =
                    if first { pair_lagrangian(p, &base[y], &params)? } else { pair_lagrangian(&base[x], p, &params)? };
                vals.push((*c, *i, k % st.len(), g));
            }
            Ok([nested(&vals, NestOrder::OuterFirst), nested(&vals, NestOrder::OuterSecond)])
        };
        // Cross-argument terms from product stencils: outer jet `u` at `ou`,
        // inner jet `v` at the other argument.
        let cross = |u_at_x: bool| -> Result<[f64; 2]> {
            let (outer, inner) =
                if u_at_x { (&bs.u.along[x], &bs.v.along[y]) } else { (&bs.u.along[y], &bs.v.along[x]) };
            let mut vals = Vec::with_capacity(outer.nodes.len() * inner.nodes.len());
            for (i, (wo, po)) in outer.nodes.iter().enumerate() {
                for (j, (wi, pi)) in inner.nodes.iter().enumerate() {
                    let g = if u_at_x { pair_lagrangian(po, pi, &params)? } else { pair_lagrangian(pi, po, &params)? };
                    vals.push((wo * wi, i, j, g));
                }
            }
            Ok([nested(&vals, NestOrder::OuterFirst), nested(&vals, NestOrder::OuterSecond)])
        };
        let o11 = same(x, true)?;
        let o22 = same(y, false)?;
        let o12 = cross(true)?;
        let o21 = cross(false)?;
        let scalar = (ax - ay) * ((bx + by) * l + d1v + d2v) + (bx + by) * (d1u - d2u);
        alt.add(wxy * (o11[1] + o12[1] - o21[1] - o22[1]));
        Ok([wxy * scalar, wxy * o11[0], wxy * o12[0], -(wxy * o21[0]), -(wxy * o22[0])])
    })?;
    let [s, a, b, c, d] = terms;
    let res = OsiResult::from_terms(
        vec![
            ("first_order", s),
            ("outer1_inner1", a),
            ("outer1_inner2", b),
            ("outer2_inner1", c),
            ("outer2_inner2", d),
        ],
        xs.len() * ys.len(),
    );
    let alt_value = s + alt.value();
    Ok((res, alt_value))
}

/// `sum_{x in Omega} sum_{y not in Omega} rho_x rho_y (nabla_{1,u} - nabla_{2,u})(nabla_{1,v} + nabla_{2,v}) L_kappa`
/// with inner jets frozen, plus its parts symmetric and antisymmetric in `(u, v)`.
pub fn osi_bilinear(
    u: &Jet,
    v: &Jet,
    omega: &[bool],
    rho: &DiscreteMeasure,
    mult: &MultiplierSet,
    fd: &FdConfig,
) -> Result<Bilinear> {
    let (inside, outside) = split(omega, rho.len())?;
    let (value, alt) = bilinear_value(u, v, rho, mult, fd, &inside, &outside)?;
    let (swapped, _) = bilinear_value(v, u, rho, mult, fd, &inside, &outside)?;
    let swapped = swapped.value;
    Ok(Bilinear {
        symmetric: 0.5 * (value.value + swapped),
        antisymmetric: 0.5 * (value.value - swapped),
        dual_order_gap: (value.value - alt).abs(),
        value,
        swapped,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LemmaCheck {
    /// `osi_antisymmetric` of the inner solution.
    pub bulk: f64,
    /// `sum_facets dmu(v, x) (l_kappa(x) + s)`.
    pub boundary: f64,
    /// `s sum_facets dmu(v, x)`.
    pub boundary_s_only: f64,
    pub defect: f64,
}

/// Bulk surface layer integral of the inner solution of `v` against the flux
/// of `v` through the facets of `omega`, weighted by `l_kappa + s`.
pub fn boundary_lemma(
    v: &dyn VectorField,
    omega: &Region,
    bg: &LatticeBackground,
    mult: &MultiplierSet,
    fd: &FdConfig,
) -> Result<LemmaCheck> {
    let rho = bg.measure()?;
    let jet = inner_solution(v, bg)?;
    let bulk = osi_antisymmetric(&jet, omega.indicator(), &rho, mult, fd)?.value;
    let params = mult.kernel();
    let mut terms = Vec::new();
    let mut flux = Vec::new();
    for (facet, weight) in boundary_flux_measure(v, omega, &bg.chart, &bg.density)? {
        if weight == 0.0 {
            continue;
        }
        let x = bg.embedding.prepared(&facet.midpoint)?;
        let ls = bg
            .prepared
            .iter()
            .zip(&bg.weights)
            .map(|(y, w)| Ok(w * pair_lagrangian(&x, y, &params)?))
            .collect::<Result<Vec<_>>>()?;
        terms.push(weight * pairwise_sum(&ls));
        flux.push(weight);
    }
    let boundary = pairwise_sum(&terms);
    Ok(LemmaCheck {
        bulk,
        boundary,
        boundary_s_only: mult.s_param * pairwise_sum(&flux),
        defect: (bulk - boundary).abs(),
    })
}

// ---------------------------------------------------------------------------
// Lattice backgrounds: derivatives along vector fields in chart coordinates.

/// Step of the chart stencils and flow settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChartFd {
    /// Chart-coordinate step of first and mixed derivative stencils.
    pub step: f64,
    pub flow: FlowConfig,
}

impl Default for ChartFd {
    fn default() -> Self {
        Self { step: 1e-3, flow: FlowConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceConfig {
    pub omega: Region,
    pub v_region: Region,
    /// Generates the flow; tangential to the boundary of `v_region`.
    pub v: Field,
    /// Outer field of the matter flux.
    pub u: Field,
    pub tol_tangent: f64,
    /// Number of initial layers along axis 0 on which `v` must vanish.
    pub past_margin: usize,
    pub fd: ChartFd,
}

fn shift(p: &Coord, d: &Coord, s: f64) -> Coord {
    std::array::from_fn(|k| p[k] + s * d[k])
}

/// Largest `|w . n|` over interior boundary facets of `region`.
fn normal_component(w: &dyn VectorField, region: &Region, bg: &LatticeBackground) -> f64 {
    region
        .facets(&bg.chart)
        .iter()
        .filter(|f| !f.chart_face)
        .map(|f| w.eval(&f.midpoint)[f.axis].abs())
        .fold(0.0, f64::max)
}

impl SurfaceConfig {
    pub fn new(omega: Region, v_region: Region, v: Field, u: Field) -> Self {
        Self { omega, v_region, v, u, tol_tangent: 1e-12, past_margin: 0, fd: ChartFd::default() }
    }

    /// Facets of `Omega` inside `V` whose node touches the boundary of `V`.
    pub fn s_facet_count(&self, bg: &LatticeBackground) -> usize {
        let chart = &bg.chart;
        self.omega
            .facets(chart)
            .iter()
            .filter(|f| !f.chart_face && self.facet_in_v(bg, f))
            .filter(|f| {
                (0..4).filter(|&k| k != f.axis).any(|k| {
                    [false, true]
                        .iter()
                        .any(|&fw| chart.neighbor(f.node, k, fw).is_some_and(|j| !self.v_region.contains(j)))
                })
            })
            .count()
    }

    fn facet_in_v(&self, bg: &LatticeBackground, f: &Facet) -> bool {
        self.v_region.contains(f.node)
            && bg.chart.neighbor(f.node, f.axis, f.outward > 0.0).is_some_and(|j| self.v_region.contains(j))
    }

    /// `u` tangential to the boundary of `Omega` within `tol_tangent`.
    pub fn u_tangent(&self, bg: &LatticeBackground) -> bool {
        normal_component(&self.u, &self.omega, bg) <= self.tol_tangent
    }

    pub fn validate(&self, bg: &LatticeBackground) -> Result<()> {
        let n = bg.len();
        for r in [&self.omega, &self.v_region] {
            if r.len() != n {
                return Err(CfsError::DimensionMismatch { expected: n, got: r.len() });
            }
        }
        self.v.validate()?;
        self.u.validate()?;
        if !(self.fd.step > 0.0) || !(self.tol_tangent >= 0.0) {
            return Err(CfsError::InvalidInput("step and tangency tolerance must be positive".into()));
        }
        let normal = normal_component(&self.v, &self.v_region, bg);
        if normal > self.tol_tangent {
            return Err(CfsError::NotTangent(format!("|v . n| = {normal:.3e} on the boundary of V")));
        }
        if self.past_margin > 0
            && !GridVectorField::sample(&self.v, &bg.chart).vanishes_in_past(&bg.chart, self.past_margin)
        {
            return Err(CfsError::InvalidInput("v does not vanish in the past margin".into()));
        }
        if self.s_facet_count(bg) == 0 {
            return Err(CfsError::Degenerate("Omega and V do not intersect in a two-surface".into()));
        }
        Ok(())
    }

    fn pair_sets(&self) -> (Vec<usize>, Vec<usize>) {
        (self.omega.intersection(&self.v_region).indices(), self.v_region.complement().indices())
    }
}

/// What to precompute at each node.
#[derive(Clone, Copy, Debug, Default)]
struct Needs {
    v_line: bool,
    u_line: bool,
    /// Outer `v`, inner `v`.
    vv: bool,
    /// Outer `u`, inner `v`.
    uv: bool,
    db: bool,
    a: bool,
}

#[derive(Clone, Debug)]
struct Node {
    base: Prepared,
    b: f64,
    db: f64,
    a: f64,
    v_line: Option<[Prepared; 2]>,
    u_line: Option<[Prepared; 2]>,
    vv: Option<[Prepared; 4]>,
    uv: Option<[Prepared; 4]>,
}

struct ChartStencils<'a> {
    bg: &'a LatticeBackground,
    h: f64,
    div_step: f64,
}

impl ChartStencils<'_> {
    fn line(&self, p: &Coord, w: &dyn VectorField) -> Result<Option<[Prepared; 2]>> {
        let d = w.eval(p);
        if d == [0.0; 4] {
            return Ok(None);
        }
        let e = &self.bg.embedding;
        Ok(Some([e.prepared(&shift(p, &d, self.h))?, e.prepared(&shift(p, &d, -self.h))?]))
    }

    /// Points `q_st = p_s + t h inner(p_s)`, `p_s = p + s h outer(p)`, in
    /// the order `(+,+), (+,-), (-,+), (-,-)`.
    fn mixed(&self, p: &Coord, outer: &dyn VectorField, inner: &dyn VectorField) -> Result<Option<[Prepared; 4]>> {
        let d = outer.eval(p);
        if d == [0.0; 4] {
            return Ok(None);
        }
        let e = &self.bg.embedding;
        let mut pts = Vec::with_capacity(4);
        for s in [1.0, -1.0] {
            let q = shift(p, &d, s * self.h);
            let di = inner.eval(&q);
            for t in [1.0, -1.0] {
                pts.push(e.prepared(&shift(&q, &di, t * self.h))?);
            }
        }
        Ok(Some([pts[0].clone(), pts[1].clone(), pts[2].clone(), pts[3].clone()]))
    }

    fn div(&self, w: &dyn VectorField, p: &Coord) -> f64 {
        pointwise_divergence(w, &self.bg.density, p, self.div_step)
    }

    fn node(&self, i: usize, cfg: &SurfaceConfig, needs: Needs) -> Result<Node> {
        let p = &self.bg.coords[i];
        let v = &cfg.v;
        let u = &cfg.u;
        let dv = v.eval(p);
        let db = if needs.db && dv != [0.0; 4] {
            (self.div(v, &shift(p, &dv, self.h)) - self.div(v, &shift(p, &dv, -self.h))) / (2.0 * self.h)
        } else {
            0.0
        };
        Ok(Node {
            base: self.bg.prepared[i].clone(),
            b: self.div(v, p),
            db,
            a: if needs.a { self.div(u, p) } else { 0.0 },
            v_line: if needs.v_line { self.line(p, v)? } else { None },
            u_line: if needs.u_line { self.line(p, u)? } else { None },
            vv: if needs.vv { self.mixed(p, v, v)? } else { None },
            uv: if needs.uv { self.mixed(p, u, v)? } else { None },
        })
    }

    fn nodes(&self, idx: &[usize], cfg: &SurfaceConfig, needs: Needs) -> Result<Vec<Option<Node>>> {
        let mut out = vec![None; self.bg.len()];
        for &i in idx {
            out[i] = Some(self.node(i, cfg, needs)?);
        }
        Ok(out)
    }
}

fn stencils<'a>(bg: &'a LatticeBackground, cfg: &SurfaceConfig) -> ChartStencils<'a> {
    ChartStencils { bg, h: cfg.fd.step, div_step: cfg.fd.flow.div_step }
}

/// `(g(+) - g(-)) / 2h`, zero for a vanishing field.
fn d_line(line: &Option<[Prepared; 2]>, h: f64, mut g: impl FnMut(&Prepared) -> Result<f64>) -> Result<f64> {
    match line {
        None => Ok(0.0),
        Some([p, m]) => Ok((g(p)? - g(m)?) / (2.0 * h)),
    }
}

fn d_mixed(pts: &Option<[Prepared; 4]>, h: f64, mut g: impl FnMut(&Prepared) -> Result<f64>) -> Result<f64> {
    match pts {
        None => Ok(0.0),
        Some([a, b, c, d]) => Ok(((g(a)? - g(b)?) - (g(c)? - g(d)?)) / (4.0 * h * h)),
    }
}

/// The four values `L(x_s, y_t)` of a product stencil, `s` and `t` in
/// `(+, -)` order; zeros when either line is absent.
fn cross_values(
    lx: &Option<[Prepared; 2]>,
    ly: &Option<[Prepared; 2]>,
    params: &KernelParams,
) -> Result<Option<[[f64; 2]; 2]>> {
    match (lx, ly) {
        (Some(a), Some(b)) => {
            let mut g = [[0.0; 2]; 2];
            for s in 0..2 {
                for t in 0..2 {
                    g[s][t] = pair_lagrangian(&a[s], &b[t], params)?;
                }
            }
            Ok(Some(g))
        }
        _ => Ok(None),
    }
}

/// `d_s d_t` of the product stencil with `s` (first index) outermost.
fn outer_first(g: &Option<[[f64; 2]; 2]>, h: f64) -> f64 {
    g.map_or(0.0, |g| ((g[0][0] - g[0][1]) - (g[1][0] - g[1][1])) / (4.0 * h * h))
}

/// `d_s d_t` with `t` (second index) outermost.
fn outer_second(g: &Option<[[f64; 2]; 2]>, h: f64) -> f64 {
    g.map_or(0.0, |g| ((g[0][0] - g[1][0]) - (g[0][1] - g[1][1])) / (4.0 * h * h))
}

fn node(n: &[Option<Node>], i: usize) -> &Node {
    n[i].as_ref().expect("node data precomputed for every pair index")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Area {
    pub boundary_form: f64,
    /// Canonical bulk form with `nabla_1 - nabla_2`.
    pub bulk_form: f64,
    /// Bulk form with `nabla_1 + nabla_2`.
    pub bulk_form_plus: f64,
    pub facet_count: usize,
    pub pair_count: usize,
}

/// `sum_{x in Omega cap V} sum_{y not in V} rho_x rho_y (nabla_{1,v} - nabla_{2,v}) L_kappa`.
fn bulk_minus(bg: &LatticeBackground, cfg: &SurfaceConfig, mult: &MultiplierSet) -> Result<(f64, f64)> {
    let (xs, ys) = cfg.pair_sets();
    let cs = stencils(bg, cfg);
    let needs = Needs { v_line: true, ..Needs::default() };
    let nx = cs.nodes(&xs, cfg, needs)?;
    let ny = cs.nodes(&ys, cfg, needs)?;
    let params = mult.kernel();
    let h = cfg.fd.step;
    let w = &bg.weights;
    let [s, sp, d1, d2] = pair_sums(&xs, &ys, |x, y| {
        let (a, b) = (node(&nx, x), node(&ny, y));
        let wxy = w[x] * w[y];
        let l = pair_lagrangian(&a.base, &b.base, &params)?;
        let g1 = d_line(&a.v_line, h, |p| pair_lagrangian(p, &b.base, &params))?;
        let g2 = d_line(&b.v_line, h, |p| pair_lagrangian(&a.base, p, &params))?;
        Ok([wxy * (a.b - b.b) * l, wxy * (a.b + b.b) * l, wxy * g1, wxy * g2])
    })?;
    Ok((s + d1 - d2, sp + d1 + d2))
}

/// Area of the surface `dOmega cap dV` as a boundary flux and as both bulk forms.
pub fn area(cfg: &SurfaceConfig, bg: &LatticeBackground, mult: &MultiplierSet) -> Result<Area> {
    cfg.validate(bg)?;
    let params = mult.kernel();
    let outside = cfg.v_region.complement().indices();
    let mut terms = Vec::new();
    for (f, weight) in boundary_flux_measure(&cfg.v, &cfg.omega, &bg.chart, &bg.density)? {
        if f.chart_face || !cfg.facet_in_v(bg, &f) {
            continue;
        }
        if weight == 0.0 {
            terms.push(0.0);
            continue;
        }
        let x = bg.embedding.prepared(&f.midpoint)?;
        let ls = outside
            .iter()
            .map(|&y| Ok(bg.weights[y] * pair_lagrangian(&x, &bg.prepared[y], &params)?))
            .collect::<Result<Vec<_>>>()?;
        terms.push(weight * pairwise_sum(&ls));
    }
    let (bulk_form, bulk_form_plus) = bulk_minus(bg, cfg, mult)?;
    let (xs, ys) = cfg.pair_sets();
    Ok(Area {
        boundary_form: pairwise_sum(&terms),
        bulk_form,
        bulk_form_plus,
        facet_count: terms.len(),
        pair_count: xs.len() * ys.len(),
    })
}

/// Canonical bulk area on the background transported by `Phi_tau`, with
/// region memberships carried along (pull-back indicator convention).
pub fn area_under_flow(cfg: &SurfaceConfig, bg: &LatticeBackground, mult: &MultiplierSet, tau: f64) -> Result<f64> {
    let moved = bg.pulled_back(&cfg.v, tau, &cfg.fd.flow)?;
    Ok(bulk_minus(&moved, cfg, mult)?.0)
}

/// `(A(tau) - A(-tau)) / 2 tau`.
pub fn area_derivative_fd(cfg: &SurfaceConfig, bg: &LatticeBackground, mult: &MultiplierSet, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(CfsError::InvalidInput("tau must be positive".into()));
    }
    cfg.validate(bg)?;
    Ok((area_under_flow(cfg, bg, mult, tau)? - area_under_flow(cfg, bg, mult, -tau)?) / (2.0 * tau))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AreaChange {
    /// Second derivatives of the Lagrangian, inner divergence included.
    pub dta1: f64,
    /// Derivative of the divergence along the flow.
    pub dta2: f64,
    /// Change of the measure.
    pub dta3: f64,
    pub total: f64,
    pub pair_count: usize,
}

/// Infinitesimal change of the canonical bulk area under the flow of `v`.
pub fn area_change_analytic(cfg: &SurfaceConfig, bg: &LatticeBackground, mult: &MultiplierSet) -> Result<AreaChange> {
    cfg.validate(bg)?;
    let (xs, ys) = cfg.pair_sets();
    let cs = stencils(bg, cfg);
    let needs = Needs { v_line: true, vv: true, db: true, ..Needs::default() };
    let nx = cs.nodes(&xs, cfg, needs)?;
    let ny = cs.nodes(&ys, cfg, needs)?;
    let params = mult.kernel();
    let h = cfg.fd.step;
    let w = &bg.weights;
    let [t1, t2, t3] = pair_sums(&xs, &ys, |x, y| {
        let (a, b) = (node(&nx, x), node(&ny, y));
        let wxy = w[x] * w[y];
        let l = pair_lagrangian(&a.base, &b.base, &params)?;
        let g1 = d_line(&a.v_line, h, |p| pair_lagrangian(p, &b.base, &params))?;
        let g2 = d_line(&b.v_line, h, |p| pair_lagrangian(&a.base, p, &params))?;
        let o11 = d_mixed(&a.vv, h, |p| pair_lagrangian(p, &b.base, &params))?;
        let o22 = d_mixed(&b.vv, h, |p| pair_lagrangian(&a.base, p, &params))?;
        let g = cross_values(&a.v_line, &b.v_line, &params)?;
        let (o12, o21) = (outer_first(&g, h), outer_second(&g, h));
        let k = (a.b - b.b) * l + g1 - g2;
        Ok([wxy * ((a.b - b.b) * (g1 + g2) + o11 - o12 + o21 - o22), wxy * (a.db - b.db) * l, wxy * (a.b + b.b) * k])
    })?;
    Ok(AreaChange { dta1: t1, dta2: t2, dta3: t3, total: t1 + t2 + t3, pair_count: xs.len() * ys.len() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatterFlux {
    pub value: f64,
    /// `u` tangential to the boundary of `Omega`.
    pub u_tangent: bool,
    pub pair_count: usize,
}

/// `sum_{x in Omega cap V} sum_{y not in V} rho_x rho_y (nabla_{1,u} - nabla_{2,u})(nabla_{1,v} + nabla_{2,v}) L_kappa`
/// for the inner solutions of `u` and `v`.
pub fn matter_flux(cfg: &SurfaceConfig, bg: &LatticeBackground, mult: &MultiplierSet) -> Result<MatterFlux> {
    cfg.validate(bg)?;
    let (xs, ys) = cfg.pair_sets();
    let cs = stencils(bg, cfg);
    let needs = Needs { v_line: true, u_line: true, uv: true, a: true, ..Needs::default() };
    let nx = cs.nodes(&xs, cfg, needs)?;
    let ny = cs.nodes(&ys, cfg, needs)?;
    let params = mult.kernel();
    let h = cfg.fd.step;
    let w = &bg.weights;
    let [value] = pair_sums(&xs, &ys, |x, y| {
        let (a, b) = (node(&nx, x), node(&ny, y));
        let l = pair_lagrangian(&a.base, &b.base, &params)?;
        let d1v = d_line(&a.v_line, h, |p| pair_lagrangian(p, &b.base, &params))?;
        let d2v = d_line(&b.v_line, h, |p| pair_lagrangian(&a.base, p, &params))?;
        let d1u = d_line(&a.u_line, h, |p| pair_lagrangian(p, &b.base, &params))?;
        let d2u = d_line(&b.u_line, h, |p| pair_lagrangian(&a.base, p, &params))?;
        let o11 = d_mixed(&a.uv, h, |p| pair_lagrangian(p, &b.base, &params))?;
        let o22 = d_mixed(&b.uv, h, |p| pair_lagrangian(&a.base, p, &params))?;
        // Outer u on x, inner v on y; then outer u on y, inner v on x.
        let o12 = outer_first(&cross_values(&a.u_line, &b.v_line, &params)?, h);
        let o21 = outer_second(&cross_values(&a.v_line, &b.u_line, &params)?, h);
        let inner = (a.b + b.b) * l + d1v + d2v;
        let t = (a.a - b.a) * inner + (a.b + b.b) * (d1u - d2u) + o11 + o12 - o21 - o22;
        Ok([w[x] * w[y] * t])
    })?;
    Ok(MatterFlux { value, u_tangent: cfg.u_tangent(bg), pair_count: xs.len() * ys.len() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Killing {
    pub max_div: f64,
    pub max_sym_defect: f64,
    pub pairs_checked: usize,
    pub pass: bool,
}

/// Divergence and symmetrized Lagrangian derivative of `v`. All pairs are
/// checked when there are at most `max_pairs`, otherwise a seeded sample.
pub fn killing_check(
    v: &dyn VectorField,
    bg: &LatticeBackground,
    mult: &MultiplierSet,
    threshold: f64,
    div_tol: f64,
    fd: &ChartFd,
    max_pairs: usize,
) -> Result<Killing> {
    let grid = GridVectorField::sample(v, &bg.chart);
    if !grid.is_finite() {
        return Err(CfsError::InvalidInput("vector field has non-finite values".into()));
    }
    let max_div = divergence(&grid, &bg.chart, &bg.density).iter().map(|d| d.abs()).fold(0.0, f64::max);
    let cs = ChartStencils { bg, h: fd.step, div_step: fd.flow.div_step };
    let lines = bg.coords.iter().map(|p| cs.line(p, v)).collect::<Result<Vec<_>>>()?;
    let params = mult.kernel();
    let n = bg.len();
    let total = n * n.saturating_sub(1) / 2;
    let pairs: Vec<(usize, usize)> = if total <= max_pairs {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        (0..max_pairs)
            .map(|_| loop {
                let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
                if i != j {
                    break (i, j);
                }
            })
            .collect()
    };
    let mut max_sym_defect = 0.0f64;
    for &(i, j) in &pairs {
        let d1 = d_line(&lines[i], fd.step, |p| pair_lagrangian(p, &bg.prepared[j], &params))?;
        let d2 = d_line(&lines[j], fd.step, |p| pair_lagrangian(&bg.prepared[i], p, &params))?;
        max_sym_defect = max_sym_defect.max((d1 + d2).abs());
    }
    Ok(Killing {
        max_div,
        max_sym_defect,
        pairs_checked: pairs.len(),
        pass: max_div <= div_tol && max_sym_defect <= threshold,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Jacobson {
    pub da_dtau: f64,
    pub flux: f64,
    pub defect: f64,
    /// `max(|da_dtau|, 1)`.
    pub scale: f64,
    pub change: AreaChange,
    pub killing: Killing,
    /// Unmet preconditions; the check is computed regardless.
    pub violations: Vec<String>,
}

/// Thresholds of the Jacobson preconditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JacobsonTolerances {
    pub div_tol: f64,
    pub killing_threshold: f64,
    pub max_pairs: usize,
}

impl Default for JacobsonTolerances {
    fn default() -> Self {
        Self { div_tol: 1e-10, killing_threshold: 1e-6, max_pairs: 20_000 }
    }
}

/// Area change against matter flux for `u = v`.
pub fn jacobson_check(
    cfg: &SurfaceConfig,
    bg: &LatticeBackground,
    mult: &MultiplierSet,
    tol: &JacobsonTolerances,
) -> Result<Jacobson> {
    let change = area_change_analytic(cfg, bg, mult)?;
    let flux = matter_flux(cfg, bg, mult)?.value;
    let killing = killing_check(&cfg.v, bg, mult, tol.killing_threshold, tol.div_tol, &cfg.fd, tol.max_pairs)?;
    let mut violations = Vec::new();
    if cfg.u != cfg.v {
        violations.push("u differs from v".to_string());
    }
    let max_b = bg
        .coords
        .iter()
        .map(|p| pointwise_divergence(&cfg.v, &bg.density, p, cfg.fd.flow.div_step).abs())
        .fold(0.0, f64::max);
    if max_b > tol.div_tol || killing.max_div > tol.div_tol {
        violations.push(format!("divergence {:.3e} exceeds {:.1e}", max_b.max(killing.max_div), tol.div_tol));
    }
    if killing.max_sym_defect > tol.killing_threshold {
        violations.push(format!("Killing defect {:.3e} exceeds {:.1e}", killing.max_sym_defect, tol.killing_threshold));
    }
    Ok(Jacobson {
        da_dtau: change.total,
        flux,
        defect: (change.total - flux).abs(),
        scale: change.total.abs().max(1.0),
        change,
        killing,
        violations,
    })
}
