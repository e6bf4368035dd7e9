//! Constrained minimisation of the causal action over weights and positions.
//!
//! The volume constraint is kept exact by projecting the weights onto the
//! scaled simplex, the trace constraint by retracting every position step
//! with [`project_to_freg`]. Stationarity is measured relative to the
//! natural scale of the EL function, `V * r^4` with `r` the RMS operator
//! norm of the initial points, so that rescaled problems follow rescaled
//! iterate sequences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CfsError, Result};
use crate::linalg::{c64, frobenius_inner, frobenius_norm, pairwise_sum, random_hermitian, CMatrix};
use crate::measure::{constraint_values, el_residual, lagrangian_table, row_sums, DiscreteMeasure, MultiplierSet};
use crate::operator::{
    lagrangian_from_moduli, lagrangian_gradient, project_to_freg, raw_spectrum, smoothed_modulus, tangent_basis,
    tangent_project, KernelParams, Operator, Prepared,
};

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizeConfig {
    pub volume_target: f64,
    pub trace_target: f64,
    pub kappa: f64,
    pub max_iters: usize,
    pub tol_grad: f64,
    /// Smoothing scales relative to `r^2`, nonincreasing; a final exact
    /// stage at zero is always appended.
    pub eta_schedule: Vec<f64>,
    pub penalty_growth: f64,
    /// Upper bound on the boundedness functional, enforced by a quadratic
    /// penalty while violated.
    pub boundedness_bound: Option<f64>,
    pub optimize_positions: bool,
    pub seed: u64,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        Self {
            volume_target: 1.0,
            trace_target: 0.0,
            kappa: 0.0,
            max_iters: 2000,
            tol_grad: 1e-9,
            eta_schedule: vec![1e-2, 1e-4],
            penalty_growth: 4.0,
            boundedness_bound: None,
            optimize_positions: true,
            seed: 0,
        }
    }
}

impl MinimizeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CfsError::InvalidInput(m));
        if !(self.volume_target > 0.0) {
            return bad(format!("volume target {} must be positive", self.volume_target));
        }
        if !(self.tol_grad > 0.0) {
            return bad(format!("tol_grad {} must be positive", self.tol_grad));
        }
        if !(self.kappa >= 0.0) {
            return bad(format!("kappa {} must be nonnegative", self.kappa));
        }
        if self.eta_schedule.iter().any(|e| !(*e >= 0.0)) {
            return bad("smoothing schedule entries must be nonnegative".into());
        }
        if self.eta_schedule.windows(2).any(|w| w[1] > w[0]) {
            return bad("smoothing schedule must be nonincreasing".into());
        }
        if !(self.penalty_growth >= 1.0) {
            return bad(format!("penalty growth {} must be at least 1", self.penalty_growth));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub eta: f64,
    pub action: f64,
    pub volume_violation: f64,
    pub trace_violation: f64,
    pub boundedness: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizeReport {
    pub iterations: usize,
    pub converged: bool,
    pub weight_stationarity: f64,
    pub position_stationarity: f64,
    pub history: Vec<IterationRecord>,
}

impl MinimizeReport {
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iter,eta,action,volume_violation,trace_violation,boundedness,grad_norm\n");
        for r in &self.history {
            out.push_str(&format!(
                "{},{:.6e},{:.16e},{:.6e},{:.6e},{:.16e},{:.6e}\n",
                r.iter, r.eta, r.action, r.volume_violation, r.trace_violation, r.boundedness, r.grad_norm
            ));
        }
        out
    }
}

/// Euclidean projection onto `{w >= 0, sum w = volume}`.
pub fn project_to_simplex(v: &[f64], volume: f64) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - volume) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    // Rescale away the rounding drift of the volume.
    let total: f64 = pairwise_sum(&w);
    if total > 0.0 {
        let s = volume / total;
        for x in w.iter_mut() {
            *x *= s;
        }
    }
    w
}

/// Pair tables of the bare Lagrangian and of `|xy|^2` at smoothing `eta`.
struct PairTables {
    bare: Vec<f64>,
    weight_sq: Vec<f64>,
}

fn pair_tables(points: &[Prepared], eta: f64) -> Result<PairTables> {
    let n = points.len();
    let mut bare = Vec::with_capacity(n * n);
    let mut weight_sq = Vec::with_capacity(n * n);
    for x in points {
        for y in points {
            let vals = raw_spectrum(x, y)?;
            let a: Vec<f64> = vals.iter().map(|&z| smoothed_modulus(z, eta)).collect();
            bare.push(lagrangian_from_moduli(&a));
            let w: f64 = a.iter().sum();
            weight_sq.push(w * w);
        }
    }
    Ok(PairTables { bare, weight_sq })
}

fn quadratic_form(table: &[f64], w: &[f64]) -> f64 {
    let rows = row_sums(table, w);
    pairwise_sum(&rows.iter().zip(w).map(|(r, x)| r * x).collect::<Vec<_>>())
}

struct Objective {
    kappa: f64,
    bound: Option<f64>,
    penalty: f64,
    eta: f64,
}

struct Evaluation {
    value: f64,
    action: f64,
    boundedness: f64,
    /// Table of the Lagrangian with the effective multiplier.
    effective: Vec<f64>,
    kappa_eff: f64,
}

impl Objective {
    fn evaluate(&self, points: &[Prepared], w: &[f64]) -> Result<Evaluation> {
        let t = pair_tables(points, self.eta)?;
        let s0 = quadratic_form(&t.bare, w);
        let bnd = quadratic_form(&t.weight_sq, w);
        let excess = self.bound.map_or(0.0, |c| (bnd - c).max(0.0));
        let value = s0 + self.kappa * bnd + 0.5 * self.penalty * excess * excess;
        let kappa_eff = self.kappa + self.penalty * excess;
        let effective = t.bare.iter().zip(&t.weight_sq).map(|(l, q)| l + kappa_eff * q).collect();
        Ok(Evaluation { value, action: s0 + self.kappa * bnd, boundedness: bnd, effective, kappa_eff })
    }
}

/// Gradient of `x_i -> sum_j rho_j L(x_i, x_j)` in the tangent space.
fn ell_gradient(i: usize, points: &[Prepared], w: &[f64], params: &KernelParams, fd_step: f64) -> Result<CMatrix> {
    let f = points[i].dim();
    let mut g = CMatrix::zeros(f, f);
    for (j, y) in points.iter().enumerate() {
        if w[j] == 0.0 {
            continue;
        }
        let term = match lagrangian_gradient(y, &points[i], params, 1e-8) {
            Ok((_, grad)) => grad,
            Err(CfsError::Degenerate(_)) => fd_gradient(y, &points[i], params, fd_step)?,
            Err(e) => return Err(e),
        };
        g += term * c64(w[j], 0.0);
    }
    Ok(tangent_project(&points[i], &g))
}

/// Central-difference gradient of `L(x, .)` at `y` over a tangent basis.
pub fn fd_gradient(x: &Prepared, y: &Prepared, params: &KernelParams, step: f64) -> Result<CMatrix> {
    let base = y.matrix();
    let n = y.spin_dim();
    let mut g = CMatrix::zeros(base.nrows(), base.ncols());
    for b in tangent_basis(y) {
        let plus = Prepared::from_hermitian(&(&base + &b * c64(step, 0.0)), n);
        let minus = Prepared::from_hermitian(&(&base - &b * c64(step, 0.0)), n);
        let d = (crate::operator::pair_lagrangian(x, &plus, params)?
            - crate::operator::pair_lagrangian(x, &minus, params)?)
            / (2.0 * step);
        g += b * c64(d, 0.0);
    }
    Ok(g)
}

/// Solves `T_S w_S = mu 1`, `sum w_S = volume` on the support `S` of `w`;
/// `None` when the system is singular or the solution leaves the simplex.
fn kkt_on_support(table: &[f64], w: &[f64], volume: f64) -> Option<Vec<f64>> {
    let m = w.len();
    let support: Vec<usize> = (0..m).filter(|&i| w[i] > 0.0).collect();
    let k = support.len();
    let mut a = nalgebra::DMatrix::<f64>::zeros(k + 1, k + 1);
    let mut rhs = nalgebra::DVector::<f64>::zeros(k + 1);
    for (p, &i) in support.iter().enumerate() {
        for (q, &j) in support.iter().enumerate() {
            a[(p, q)] = table[i * m + j];
        }
        a[(p, k)] = -1.0;
        a[(k, p)] = 1.0;
    }
    rhs[k] = volume;
    let sol = a.lu().solve(&rhs)?;
    if sol.iter().take(k).any(|x| !(*x > 0.0)) {
        return None;
    }
    let mut out = vec![0.0; m];
    for (p, &i) in support.iter().enumerate() {
        out[i] = sol[p];
    }
    Some(project_to_simplex(&out, volume))
}

/// Simplex KKT defect: spread of the EL rows on the support and the largest
/// amount by which an off-support row undercuts them.
fn weight_stationarity(rows: &[f64], w: &[f64]) -> f64 {
    let on: Vec<f64> = rows.iter().zip(w).filter(|(_, x)| **x > 0.0).map(|(r, _)| *r).collect();
    if on.is_empty() {
        return 0.0;
    }
    let lo = on.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = on.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let off = rows.iter().zip(w).filter(|(_, x)| **x == 0.0).map(|(r, _)| (lo - r).max(0.0)).fold(0.0, f64::max);
    (hi - lo).max(off)
}

fn rms_norm(points: &[Operator]) -> f64 {
    let s: f64 = points.iter().map(|p| p.prepare().norm().powi(2)).sum();
    (s / points.len().max(1) as f64).sqrt().max(f64::MIN_POSITIVE)
}

/// Minimises the causal action from `init`; returns the support of the final
/// iterate, the multipliers and an iteration report.
pub fn minimize_action(
    init: &DiscreteMeasure,
    cfg: &MinimizeConfig,
) -> Result<(DiscreteMeasure, MultiplierSet, MinimizeReport)> {
    cfg.validate()?;
    if init.is_empty() {
        return Err(CfsError::InvalidInput("initial measure is empty".into()));
    }
    let n = init.spin_dim().unwrap_or(1);
    let volume = cfg.volume_target;
    let c = cfg.trace_target;
    let r = rms_norm(init.points());
    let ell_scale = volume * r.powi(4);
    let grad_scale = volume * r.powi(3);

    let mut points: Vec<Operator> = Vec::with_capacity(init.len());
    for p in init.points() {
        if (p.trace() - c).abs() <= 1e-12 * r.max(1.0) {
            points.push(p.clone());
        } else {
            points.push(project_to_freg(p.matrix(), n, c)?);
        }
    }
    let mut weights = {
        let total: f64 = pairwise_sum(init.weights());
        if (total - volume).abs() <= 1e-14 * volume {
            init.weights().to_vec()
        } else {
            project_to_simplex(init.weights(), volume)
        }
    };
    let mut prepared: Vec<Prepared> = points.iter().map(Operator::prepare).collect();

    let mut stages: Vec<f64> = cfg.eta_schedule.clone();
    if stages.last().copied() != Some(0.0) {
        stages.push(0.0);
    }
    let mut history = Vec::new();
    let mut iter = 0usize;
    let mut step = 0.1 / (volume * r * r);
    let mut penalty = cfg.boundedness_bound.map_or(0.0, |_| 1.0 / (volume * r.powi(4)).powi(2));
    let mut ws = f64::INFINITY;
    let mut ps = f64::INFINITY;
    let fd_step = 1e-6 * r;

    for (stage, &eta_rel) in stages.iter().enumerate() {
        let last = stage + 1 == stages.len();
        let eta = eta_rel * r * r;
        let tol = if last { cfg.tol_grad } else { cfg.tol_grad.max(eta_rel) };
        loop {
            let obj = Objective { kappa: cfg.kappa, bound: cfg.boundedness_bound, penalty, eta };
            let ev = obj.evaluate(&prepared, &weights)?;
            let rows = row_sums(&ev.effective, &weights);
            ws = weight_stationarity(&rows, &weights) / ell_scale;
            let params = KernelParams { kappa: ev.kappa_eff, smoothing_eta: eta };
            let mut grads: Vec<Option<CMatrix>> = vec![None; points.len()];
            ps = 0.0;
            if cfg.optimize_positions {
                for i in 0..points.len() {
                    if weights[i] > 0.0 {
                        let g = ell_gradient(i, &prepared, &weights, &params, fd_step)?;
                        ps = ps.max(frobenius_norm(&g) / grad_scale);
                        grads[i] = Some(g);
                    }
                }
            }
            let cv = constraint_values(&DiscreteMeasure::new(
                points.iter().zip(&weights).filter(|(_, w)| **w > 0.0).map(|(p, _)| p.clone()).collect(),
                weights.iter().copied().filter(|w| *w > 0.0).collect(),
            )?)?;
            history.push(IterationRecord {
                iter,
                eta,
                action: ev.action,
                volume_violation: (cv.volume - volume).abs() / volume,
                trace_violation: points.iter().map(|p| (p.trace() - c).abs()).fold(0.0, f64::max),
                boundedness: ev.boundedness,
                grad_norm: ws.max(ps),
            });
            if (ws <= tol && ps <= tol) || iter >= cfg.max_iters {
                break;
            }
            iter += 1;
            let mut progressed = false;

            // Weights: projected gradient with exact line search on the
            // quadratic model.
            let table = &ev.effective;
            let m = weights.len();
            let sym: Vec<f64> = (0..m * m).map(|k| 0.5 * (table[k] + table[(k % m) * m + k / m])).collect();
            let lip = (0..m)
                .map(|i| (0..m).map(|j| sym[i * m + j].abs()).sum::<f64>())
                .fold(0.0, f64::max)
                .max(f64::MIN_POSITIVE);
            let grad_w: Vec<f64> = row_sums(&sym, &weights).iter().map(|x| 2.0 * x).collect();
            let trial: Vec<f64> = weights.iter().zip(&grad_w).map(|(x, g)| x - g / (2.0 * lip)).collect();
            let target = project_to_simplex(&trial, volume);
            let d: Vec<f64> = target.iter().zip(&weights).map(|(a, b)| a - b).collect();
            let slope: f64 = grad_w.iter().zip(&d).map(|(g, x)| g * x).sum();
            if slope < 0.0 {
                let curv = quadratic_form(&sym, &d);
                let mut alpha = if curv > 0.0 { (-slope / (2.0 * curv)).min(1.0) } else { 1.0 };
                for _ in 0..30 {
                    let cand = project_to_simplex(
                        &weights.iter().zip(&d).map(|(x, y)| x + alpha * y).collect::<Vec<_>>(),
                        volume,
                    );
                    let cand_ev = obj.evaluate(&prepared, &cand)?;
                    if cand_ev.value < ev.value {
                        weights = cand;
                        progressed = true;
                        break;
                    }
                    alpha *= 0.5;
                }
            }

            // Polish: stationary point of the quadratic model on the
            // current support, accepted only when it lowers the objective.
            if let Some(cand) = kkt_on_support(&sym, &weights, volume) {
                let current = obj.evaluate(&prepared, &weights)?.value;
                let cand_ev = obj.evaluate(&prepared, &cand)?;
                if cand_ev.value < current {
                    weights = cand;
                    progressed = true;
                }
            }

            // Positions: Armijo backtracking along the tangent gradient.
            if cfg.optimize_positions {
                let base = obj.evaluate(&prepared, &weights)?;
                let decrease: f64 = grads
                    .iter()
                    .zip(&weights)
                    .filter_map(|(g, w)| g.as_ref().map(|g| 2.0 * w * frobenius_inner(g, g)))
                    .sum();
                if decrease > 0.0 {
                    let mut accepted = false;
                    for _ in 0..40 {
                        let mut cand_points = points.clone();
                        let mut ok = true;
                        for (i, g) in grads.iter().enumerate() {
                            if let Some(g) = g {
                                match project_to_freg(&(points[i].matrix() - g * c64(step, 0.0)), n, c) {
                                    Ok(p) => cand_points[i] = p,
                                    Err(_) => {
                                        ok = false;
                                        break;
                                    }
                                }
                            }
                        }
                        if ok {
                            let cand_prep: Vec<Prepared> = cand_points.iter().map(Operator::prepare).collect();
                            let cand_ev = obj.evaluate(&cand_prep, &weights)?;
                            if cand_ev.value <= base.value - 1e-4 * step * decrease {
                                points = cand_points;
                                prepared = cand_prep;
                                accepted = true;
                                break;
                            }
                        }
                        step *= 0.5;
                    }
                    if accepted {
                        progressed = true;
                        step *= 2.0;
                    }
                }
            }

            if let Some(bound) = cfg.boundedness_bound {
                if obj.evaluate(&prepared, &weights)?.boundedness > bound {
                    penalty *= cfg.penalty_growth;
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
        if iter >= cfg.max_iters {
            break;
        }
    }

    let converged = ws <= cfg.tol_grad && ps <= cfg.tol_grad;
    let (support_points, support_weights): (Vec<Operator>, Vec<f64>) =
        points.into_iter().zip(weights).filter(|(_, w)| *w > 0.0).unzip();
    let rho = DiscreteMeasure::new(support_points, support_weights)?;
    let (s, _) = estimate_s(&rho, cfg.kappa)?;
    let mult = MultiplierSet::new(cfg.kappa, s, c)?;
    let report =
        MinimizeReport { iterations: iter, converged, weight_stationarity: ws, position_stationarity: ps, history };
    Ok((rho, mult, report))
}

/// Mean and spread over the support of `sum_j rho_j L_kappa(x_i, x_j)`.
pub fn estimate_s(rho: &DiscreteMeasure, kappa: f64) -> Result<(f64, f64)> {
    if rho.is_empty() {
        return Err(CfsError::InvalidInput("empty support".into()));
    }
    let table = lagrangian_table(&rho.prepared(), &KernelParams::with_kappa(kappa))?;
    let rows = row_sums(&table, rho.weights());
    let mean = pairwise_sum(&rows) / rows.len() as f64;
    let lo = rows.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rows.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((mean, hi - lo))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalityReport {
    pub support_residual: f64,
    pub exterior_violation: f64,
    pub spread: f64,
    pub volume_violation: f64,
    pub trace_violation: f64,
    pub boundedness_violation: f64,
}

pub fn criticality_report(
    rho: &DiscreteMeasure,
    mult: &MultiplierSet,
    cfg: &MinimizeConfig,
) -> Result<CriticalityReport> {
    let r = rms_norm(rho.points());
    let el = el_residual(rho, mult, 64, 0.1 * r, cfg.seed)?;
    let (_, spread) = estimate_s(rho, mult.kappa)?;
    let cv = constraint_values(rho)?;
    Ok(CriticalityReport {
        support_residual: el.support_residual,
        exterior_violation: el.exterior_violation,
        spread,
        volume_violation: (cv.volume - cfg.volume_target).abs() / cfg.volume_target,
        trace_violation: rho.points().iter().map(|p| (p.trace() - mult.trace_c).abs()).fold(0.0, f64::max),
        boundedness_violation: cfg.boundedness_bound.map_or(0.0, |b| (cv.boundedness - b).max(0.0)),
    })
}

/// Random points `project_to_freg(H)` for Gaussian Hermitian `H`, with
/// equal weights summing to `volume`.
pub fn random_measure(f: usize, n: usize, count: usize, trace: f64, volume: f64, seed: u64) -> Result<DiscreteMeasure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    while points.len() < count {
        if let Ok(p) = project_to_freg(&random_hermitian(&mut rng, f), n, trace) {
            points.push(p);
        }
    }
    DiscreteMeasure::new(points, vec![volume / count as f64; count])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection_properties() {
        let w = project_to_simplex(&[0.5, -0.2, 1.4], 1.0);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(w.iter().all(|x| *x >= 0.0));
        assert_eq!(w[1], 0.0);
        let fixed = project_to_simplex(&[0.25, 0.75], 1.0);
        assert_eq!(fixed, vec![0.25, 0.75]);
    }

    #[test]
    fn critical_single_point_is_unchanged() {
        let x = Operator::diagonal(&[1.0, -1.0], 1).unwrap();
        let init = DiscreteMeasure::new(vec![x], vec![1.0]).unwrap();
        let (rho, mult, report) = minimize_action(&init, &MinimizeConfig::default()).unwrap();
        assert_eq!(rho, init);
        assert_eq!(report.iterations, 0);
        assert_eq!(mult.s_param, 0.0);
        let crit = criticality_report(&rho, &mult, &MinimizeConfig::default()).unwrap();
        assert_eq!(crit.support_residual, 0.0);
        assert_eq!(crit.spread, 0.0);
        assert_eq!(crit.volume_violation, 0.0);
    }

    #[test]
    fn estimate_s_examples() {
        let x = Operator::diagonal(&[1.0, -1.0], 1).unwrap();
        let y = Operator::new(
            CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)]),
            1,
        )
        .unwrap();
        let one = DiscreteMeasure::new(vec![x.clone()], vec![1.0]).unwrap();
        assert_eq!(estimate_s(&one, 0.0).unwrap(), (0.0, 0.0));
        let two = DiscreteMeasure::new(vec![x, y], vec![1.0, 1.0]).unwrap();
        let (s, spread) = estimate_s(&two, 1.0).unwrap();
        assert!((s - 8.0).abs() < 1e-13 && spread.abs() < 1e-13);
        let generic = random_measure(3, 1, 4, 0.5, 1.0, 2).unwrap();
        assert!(estimate_s(&generic, 0.0).unwrap().1 > 0.0);
        assert!(estimate_s(&DiscreteMeasure::empty(), 0.0).is_err());
    }

    #[test]
    fn action_is_monotone_along_iterations() {
        let init = random_measure(2, 1, 4, 1.0, 1.0, 5).unwrap();
        let cfg = MinimizeConfig { max_iters: 60, eta_schedule: vec![], ..MinimizeConfig::default() };
        let cfg = MinimizeConfig { trace_target: 1.0, ..cfg };
        let (_, _, report) = minimize_action(&init, &cfg).unwrap();
        for w in report.history.windows(2) {
            assert!(w[1].action <= w[0].action * (1.0 + 1e-12), "{} -> {}", w[0].action, w[1].action);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let init = random_measure(2, 1, 4, 1.0, 1.0, 7).unwrap();
        let cfg = MinimizeConfig { max_iters: 30, trace_target: 1.0, ..MinimizeConfig::default() };
        let a = minimize_action(&init, &cfg).unwrap();
        let b = minimize_action(&init, &cfg).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.2.history, b.2.history);
    }

    #[test]
    fn weight_only_problem_equalises_el_rows() {
        let init = random_measure(3, 1, 5, 0.5, 1.0, 3).unwrap();
        let cfg = MinimizeConfig {
            trace_target: 0.5,
            optimize_positions: false,
            eta_schedule: vec![],
            max_iters: 5000,
            tol_grad: 1e-10,
            ..MinimizeConfig::default()
        };
        let (rho, mult, report) = minimize_action(&init, &cfg).unwrap();
        assert!(report.converged, "weight stationarity {}", report.weight_stationarity);
        let crit = criticality_report(&rho, &mult, &cfg).unwrap();
        assert!(crit.volume_violation < 1e-12);
    }
}
