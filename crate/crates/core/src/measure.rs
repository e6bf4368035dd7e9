//! Finite weighted point sets, the causal action and its constraints.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CfsError, Result};
use crate::linalg::{c64, frobenius_norm, pairwise_sum, random_hermitian, CMatrix};
use crate::operator::{pair_lagrangian, pair_spectral_weight, project_to_freg, KernelParams, Operator, Prepared};

/// Weighted finite set of regular points; every weight is positive.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<Operator>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Operator>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(CfsError::DimensionMismatch { expected: points.len(), got: weights.len() });
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(CfsError::InvalidInput(format!("weight {w} is not positive")));
        }
        if let Some(first) = points.first() {
            for p in &points {
                if p.dim() != first.dim() {
                    return Err(CfsError::DimensionMismatch { expected: first.dim(), got: p.dim() });
                }
                if p.spin_dim() != first.spin_dim() {
                    return Err(CfsError::DimensionMismatch { expected: first.spin_dim(), got: p.spin_dim() });
                }
            }
        }
        Ok(Self { points, weights })
    }

    pub fn empty() -> Self {
        Self { points: Vec::new(), weights: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Operator] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Operator::dim)
    }

    pub fn spin_dim(&self) -> Option<usize> {
        self.points.first().map(Operator::spin_dim)
    }

    pub fn prepared(&self) -> Vec<Prepared> {
        self.points.iter().map(Operator::prepare).collect()
    }

    /// Points `x -> lambda x`, weights `rho -> sigma rho`.
    pub fn rescaled(&self, lambda: f64, sigma: f64) -> Result<Self> {
        let points = self.points.iter().map(|p| p.scaled(lambda)).collect::<Result<Vec<_>>>()?;
        Self::new(points, self.weights.iter().map(|w| w * sigma).collect())
    }

    pub fn conjugated(&self, u: &CMatrix) -> Result<Self> {
        let points = self.points.iter().map(|p| p.conjugated(u)).collect::<Result<Vec<_>>>()?;
        Self::new(points, self.weights.clone())
    }

    /// Text serialisation: a header `f n N c`, then per point a line
    /// `weight w` followed by `f` rows of `re im` pairs.
    pub fn to_text(&self, trace_c: f64) -> String {
        let f = self.dim().unwrap_or(0);
        let n = self.spin_dim().unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(out, "{f} {n} {} {:.16e}", self.len(), trace_c);
        for (p, w) in self.points.iter().zip(&self.weights) {
            let _ = writeln!(out, "weight {w:.16e}");
            for i in 0..f {
                let row: Vec<String> = (0..f)
                    .map(|j| {
                        let z = p.matrix()[(i, j)];
                        format!("{:.16e} {:.16e}", z.re, z.im)
                    })
                    .collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        out
    }

    /// Inverse of [`DiscreteMeasure::to_text`]; returns the measure and `c`.
    pub fn from_text(text: &str) -> Result<(Self, f64)> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let perr = |line: usize, message: &str| CfsError::Parse { line, message: message.into() };
        let (hl, header) = lines.next().ok_or_else(|| perr(1, "missing header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(perr(hl, "header must read `f n N c`"));
        }
        let f: usize = fields[0].parse().map_err(|_| perr(hl, "bad f"))?;
        let n: usize = fields[1].parse().map_err(|_| perr(hl, "bad n"))?;
        let count: usize = fields[2].parse().map_err(|_| perr(hl, "bad N"))?;
        let c: f64 = fields[3].parse().map_err(|_| perr(hl, "bad c"))?;
        let mut points = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        for _ in 0..count {
            let (wl, wline) = lines.next().ok_or_else(|| perr(hl, "truncated point list"))?;
            let w: f64 = wline
                .strip_prefix("weight")
                .ok_or_else(|| perr(wl, "expected `weight <value>`"))?
                .trim()
                .parse()
                .map_err(|_| perr(wl, "bad weight"))?;
            let mut m = CMatrix::zeros(f, f);
            for i in 0..f {
                let (rl, row) = lines.next().ok_or_else(|| perr(wl, "truncated matrix"))?;
                let nums: Vec<f64> = row
                    .split_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| perr(rl, "bad number"))?;
                if nums.len() != 2 * f {
                    return Err(perr(rl, "row must hold f complex entries"));
                }
                for j in 0..f {
                    m[(i, j)] = c64(nums[2 * j], nums[2 * j + 1]);
                }
            }
            points.push(Operator::new(m, n).map_err(|e| perr(wl, &e.to_string()))?);
            weights.push(w);
        }
        if let Some((l, _)) = lines.next() {
            return Err(perr(l, "trailing content"));
        }
        Ok((Self::new(points, weights)?, c))
    }
}

/// Lagrange multipliers: boundedness `kappa`, the EL constant `s_param`
/// and the trace value `trace_c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultiplierSet {
    pub kappa: f64,
    pub s_param: f64,
    pub trace_c: f64,
}

impl MultiplierSet {
    pub fn new(kappa: f64, s_param: f64, trace_c: f64) -> Result<Self> {
        if !(kappa >= 0.0) {
            return Err(CfsError::InvalidInput(format!("kappa {kappa} must be nonnegative")));
        }
        Ok(Self { kappa, s_param, trace_c })
    }

    pub fn kernel(&self) -> KernelParams {
        KernelParams::with_kappa(self.kappa)
    }
}

/// Row-major `N x N` table of `L_kappa(x_i, x_j)`, every entry evaluated
/// in its own argument order.
pub fn lagrangian_table(points: &[Prepared], params: &KernelParams) -> Result<Vec<f64>> {
    let n = points.len();
    let mut out = Vec::with_capacity(n * n);
    for x in points {
        for y in points {
            out.push(pair_lagrangian(x, y, params)?);
        }
    }
    Ok(out)
}

/// `sum_j rho_j L(x_i, x_j)` for each row of a table.
pub fn row_sums(table: &[f64], weights: &[f64]) -> Vec<f64> {
    let n = weights.len();
    let mut buf = vec![0.0; n];
    (0..n)
        .map(|i| {
            for j in 0..n {
                buf[j] = weights[j] * table[i * n + j];
            }
            pairwise_sum(&buf)
        })
        .collect()
}

fn weighted_total(rows: &[f64], weights: &[f64]) -> f64 {
    let terms: Vec<f64> = rows.iter().zip(weights).map(|(r, w)| r * w).collect();
    pairwise_sum(&terms)
}

pub fn causal_action(rho: &DiscreteMeasure, params: &KernelParams) -> Result<f64> {
    let table = lagrangian_table(&rho.prepared(), params)?;
    Ok(weighted_total(&row_sums(&table, &rho.weights), &rho.weights))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintValues {
    pub volume: f64,
    pub trace_integral: f64,
    pub boundedness: f64,
}

pub fn constraint_values(rho: &DiscreteMeasure) -> Result<ConstraintValues> {
    let volume = pairwise_sum(&rho.weights);
    let traces: Vec<f64> = rho.points.iter().zip(&rho.weights).map(|(p, w)| w * p.trace()).collect();
    let prepared = rho.prepared();
    let n = prepared.len();
    let mut table = Vec::with_capacity(n * n);
    for x in &prepared {
        for y in &prepared {
            let w = pair_spectral_weight(x, y, 0.0)?;
            table.push(w * w);
        }
    }
    let boundedness = weighted_total(&row_sums(&table, &rho.weights), &rho.weights);
    Ok(ConstraintValues { volume, trace_integral: pairwise_sum(&traces), boundedness })
}

/// `sum_j rho_j L_kappa(x, x_j) - s`.
pub fn ell_kappa(x: &Operator, rho: &DiscreteMeasure, mult: &MultiplierSet) -> Result<f64> {
    ell_kappa_prepared(&x.prepare(), &rho.prepared(), &rho.weights, mult)
}

pub fn ell_kappa_prepared(x: &Prepared, points: &[Prepared], weights: &[f64], mult: &MultiplierSet) -> Result<f64> {
    let params = mult.kernel();
    let terms = points
        .iter()
        .zip(weights)
        .map(|(y, w)| Ok(w * pair_lagrangian(x, y, &params)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&terms) - mult.s_param)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElResidual {
    pub support_residual: f64,
    pub exterior_violation: f64,
    pub probes_evaluated: usize,
}

/// Support residual of the EL equations and a sampled check of minimality
/// off the support.
///
/// Probes are `project_to_freg(x_i + H)` for a uniformly chosen support
/// point and a random Hermitian `H` of Frobenius norm at most `probe_radius`.
pub fn el_residual(
    rho: &DiscreteMeasure,
    mult: &MultiplierSet,
    probe_count: usize,
    probe_radius: f64,
    seed: u64,
) -> Result<ElResidual> {
    if rho.is_empty() {
        return Ok(ElResidual { support_residual: 0.0, exterior_violation: 0.0, probes_evaluated: 0 });
    }
    let prepared = rho.prepared();
    let params = mult.kernel();
    let table = lagrangian_table(&prepared, &params)?;
    let support_residual = row_sums(&table, &rho.weights).iter().map(|r| (r - mult.s_param).abs()).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = rho.dim().unwrap_or(0);
    let n = rho.spin_dim().unwrap_or(0);
    let mut min_ell = f64::INFINITY;
    let mut evaluated = 0;
    for _ in 0..probe_count {
        let i = rng.random_range(0..rho.len());
        let h = random_hermitian(&mut rng, f);
        let radius = probe_radius * rng.random::<f64>();
        let step = &h * c64(radius / frobenius_norm(&h).max(f64::MIN_POSITIVE), 0.0);
        let Ok(probe) = project_to_freg(&(rho.points[i].matrix() + step), n, mult.trace_c) else {
            continue;
        };
        let ell = ell_kappa_prepared(&probe.prepare(), &prepared, &rho.weights, mult)?;
        min_ell = min_ell.min(ell);
        evaluated += 1;
    }
    let exterior_violation = if evaluated == 0 { 0.0 } else { (-min_ell).max(0.0) };
    Ok(ElResidual { support_residual, exterior_violation, probes_evaluated: evaluated })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> DiscreteMeasure {
        let x = Operator::diagonal(&[1.0, -1.0], 1).unwrap();
        let m = CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)]);
        let y = Operator::new(m, 1).unwrap();
        DiscreteMeasure::new(vec![x, y], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn action_examples() {
        let one = DiscreteMeasure::new(vec![Operator::diagonal(&[1.0, -1.0], 1).unwrap()], vec![1.0]).unwrap();
        assert_eq!(causal_action(&one, &KernelParams::default()).unwrap(), 0.0);
        let two = two_point();
        assert!(causal_action(&two, &KernelParams::default()).unwrap().abs() < 1e-15);
        let s = causal_action(&two, &KernelParams::with_kappa(1.0)).unwrap();
        assert!((s - 16.0).abs() < 1e-13);
    }

    #[test]
    fn constraint_examples() {
        let single = DiscreteMeasure::new(vec![Operator::diagonal(&[1.0, -1.0], 1).unwrap()], vec![2.0]).unwrap();
        let c = constraint_values(&single).unwrap();
        assert_eq!((c.volume, c.trace_integral), (2.0, 0.0));
        assert!((c.boundedness - 16.0).abs() < 1e-13);
        let e = constraint_values(&DiscreteMeasure::empty()).unwrap();
        assert_eq!((e.volume, e.trace_integral, e.boundedness), (0.0, 0.0, 0.0));
        let c = constraint_values(&two_point()).unwrap();
        assert!((c.volume - 2.0).abs() < 1e-15 && c.trace_integral.abs() < 1e-15);
        assert!((c.boundedness - 16.0).abs() < 1e-13);
    }

    #[test]
    fn ell_examples() {
        let two = two_point();
        let x1 = two.points()[0].clone();
        let m0 = MultiplierSet::new(0.0, 0.0, 0.0).unwrap();
        assert!(ell_kappa(&x1, &two, &m0).unwrap().abs() < 1e-15);
        let m1 = MultiplierSet::new(0.0, 1.0, 0.0).unwrap();
        assert!((ell_kappa(&x1, &two, &m1).unwrap() + 1.0).abs() < 1e-15);
        let z = Operator::diagonal(&[2.0, -1.0], 1).unwrap();
        let single = DiscreteMeasure::new(vec![z.clone()], vec![1.0]).unwrap();
        assert!((ell_kappa(&z, &single, &m0).unwrap() - 4.5).abs() < 1e-13);
    }

    #[test]
    fn residual_of_single_point_vanishes() {
        let single = DiscreteMeasure::new(vec![Operator::diagonal(&[1.0, -1.0], 1).unwrap()], vec![1.0]).unwrap();
        let m = MultiplierSet::new(0.0, 0.0, 0.0).unwrap();
        let r = el_residual(&single, &m, 20, 0.1, 3).unwrap();
        assert_eq!(r.support_residual, 0.0);
        assert_eq!(r.probes_evaluated, 20);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let two = two_point().rescaled(std::f64::consts::PI, 1.0 / 3.0).unwrap();
        let text = two.to_text(0.0);
        let (back, c) = DiscreteMeasure::from_text(&text).unwrap();
        assert_eq!(back, two);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = DiscreteMeasure::from_text("2 1 1 0.0\nweight 1.0\n1 0 x 0\n0 0 -1 0\n").unwrap_err();
        assert!(matches!(err, CfsError::Parse { line: 3, .. }));
    }

    #[test]
    fn weights_must_be_positive() {
        let x = Operator::diagonal(&[1.0, -1.0], 1).unwrap();
        assert!(DiscreteMeasure::new(vec![x], vec![0.0]).is_err());
    }
}
