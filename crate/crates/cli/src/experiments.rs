//! One function per experiment. Each fills a summary and writes its tables
//! and plots; only configuration and I/O problems are returned as errors.

use cfslab_core::error::CfsError;
use cfslab_core::jets::{linearized_residual, random_jet, FdConfig, Jet};
use cfslab_core::lattice::{Density, Embedding, Field, LatticeBackground, LatticeChart, Region};
use cfslab_core::measure::MultiplierSet;
use cfslab_core::minimizer::{criticality_report, estimate_s, minimize_action, random_measure, MinimizeConfig};
use cfslab_core::scaling::*;
use cfslab_core::surface::{
    area_change_analytic, area_derivative_fd, boundary_lemma, conservation_check, jacobson_check, JacobsonTolerances,
    SurfaceConfig,
};
use cfslab_core::vacuum::{cylinder_radius, fit_loglog, local_trace, logspace, scaling_sweep, QuadConfig, RegParams};

use crate::config::{AreaSection, Config, Family, JacobsonSection, LemmaSection};
use crate::error::CliError;
use crate::plot::{Plot, Scale, Series};
use crate::report::{num, Artifacts, Check, Summary};

/// Numerical failures stop the experiment and are recorded in the summary.
type Step<T> = Result<T, CfsError>;

pub struct Run<'a> {
    pub cfg: &'a Config,
    pub seed: u64,
    pub art: &'a mut Artifacts,
    pub summary: &'a mut Summary,
}

impl Run<'_> {
    fn plot(&mut self, name: &str, plot: Plot) -> Result<(), CliError> {
        if self.cfg.plots {
            self.art.write(name, &plot.to_svg())?;
        }
        Ok(())
    }
}

fn log_plot(title: &str, x: &str, y: &str, series: Vec<Series>) -> Plot {
    Plot { title: title.into(), x_label: x.into(), y_label: y.into(), x_scale: Scale::Log, y_scale: Scale::Log, series }
}

fn record<T>(summary: &mut Summary, step: Step<T>) -> Option<T> {
    match step {
        Ok(v) => Some(v),
        Err(e) => {
            summary.failure = Some(e.to_string());
            None
        }
    }
}

// ---------------------------------------------------------------------------

pub fn minimize(run: &mut Run) -> Result<(), CliError> {
    let m = &run.cfg.minimize;
    let cfg = MinimizeConfig {
        volume_target: m.volume,
        trace_target: m.trace,
        kappa: m.kappa,
        max_iters: m.max_iters,
        tol_grad: m.tol_grad,
        eta_schedule: m.eta_schedule.clone(),
        penalty_growth: m.penalty_growth,
        boundedness_bound: m.boundedness_bound,
        optimize_positions: m.optimize_positions,
        seed: run.seed,
    };
    let solve = || -> Step<_> {
        let init = random_measure(m.f, m.spin_dim, m.points, m.trace, m.volume, run.seed)?;
        let (rho, mult, report) = minimize_action(&init, &cfg)?;
        let (again, mult_again, _) = minimize_action(&init, &cfg)?;
        let crit = criticality_report(&rho, &mult, &cfg)?;
        let (_, spread) = estimate_s(&rho, mult.kappa)?;
        let same = rho == again && mult == mult_again;
        Ok((rho, mult, report, same, crit, spread))
    };
    let Some((rho, mult, report, same, crit, spread)) = record(run.summary, solve()) else { return Ok(()) };
    let s = &mut *run.summary;
    let tag = "criticality";
    s.check(Check::at_most("support_residual", crit.support_residual, m.support_tol, tag));
    s.check(Check::at_most("spread_on_support", spread, m.support_tol, tag));
    s.check(Check::at_most("exterior_violation", crit.exterior_violation, m.support_tol, "exterior-minimality"));
    s.check(Check::at_most("volume_violation", crit.volume_violation, m.constraint_tol, "constraint:volume"));
    s.check(Check::at_most("trace_violation", crit.trace_violation, m.constraint_tol, "constraint:trace"));
    s.check(Check::at_most(
        "boundedness_violation",
        crit.boundedness_violation,
        m.constraint_tol,
        "constraint:boundedness",
    ));
    s.check(Check::holds("rerun_identical", same, "determinism"));
    s.notes.push(format!(
        "{} iterations, converged {}, weight stationarity {:e}, position stationarity {:e}, multipliers kappa {} s {:e} c {}",
        report.iterations,
        report.converged,
        report.weight_stationarity,
        report.position_stationarity,
        mult.kappa,
        mult.s_param,
        mult.trace_c
    ));
    if !report.converged && m.optimize_positions {
        s.failure = Some(format!(
            "no convergence after {} iterations (position stationarity {:e})",
            report.iterations, report.position_stationarity
        ));
    }
    run.art.write("history.csv", &report.history_csv())?;
    run.art.write("measure.txt", &rho.to_text(mult.trace_c))?;
    let points: Vec<(f64, f64)> = report.history.iter().map(|r| ((r.iter + 1) as f64, r.grad_norm)).collect();
    run.plot(
        "convergence.svg",
        Plot {
            title: "Projected gradient norm".into(),
            x_label: "iteration".into(),
            y_label: "gradient norm".into(),
            x_scale: Scale::Linear,
            y_scale: Scale::Log,
            series: vec![Series::new("gradient", points)],
        },
    )
}

// ---------------------------------------------------------------------------

pub fn verify_conservation(run: &mut Run) -> Result<(), CliError> {
    let c = &run.cfg.conservation;
    let fd = FdConfig::default();
    let mut rows = Vec::new();
    let body = |rows: &mut Vec<Vec<String>>, s: &mut Summary| -> Step<()> {
        let mult = MultiplierSet::new(c.kappa, c.s, c.trace)?;
        let mut worst = 0.0f64;
        for k in 0..c.backgrounds {
            let seed = run.seed.wrapping_add(k as u64);
            let rho = random_measure(c.f, c.spin_dim, c.points, c.trace, 1.0, seed)?;
            let v = random_jet(&rho, seed.wrapping_add(1000));
            let omega: Vec<bool> = (0..c.points).map(|i| (i + k) % 3 == 0).collect();
            let r = conservation_check(&v, &omega, &rho, &mult, &fd)?;
            let rel = r.proof_identity_defect / r.scale.max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            rows.push(vec![
                "identity".into(),
                k.to_string(),
                num(r.lhs),
                num(r.rhs),
                num(r.identity_value),
                num(r.proof_identity_defect),
                num(r.scale),
                num(r.fd_error),
                num(c.identity_tol * r.scale),
            ]);
        }
        s.check(Check::at_most(
            "identity_defect_relative",
            worst,
            c.identity_tol,
            "identity:surface-layer-conservation",
        ));
        for k in 0..c.critical_runs {
            let seed = run.seed.wrapping_add(k as u64);
            let init = random_measure(2, 1, c.critical_points, 0.0, 1.0, seed)?;
            let cfg = MinimizeConfig { seed, ..Default::default() };
            let (rho, mult, _) = minimize_action(&init, &cfg)?;
            let crit = criticality_report(&rho, &mult, &cfg)?;
            let v = random_jet(&rho, seed.wrapping_add(2000));
            let omega: Vec<bool> = (0..rho.len()).map(|i| i % 2 == 0).collect();
            let r = conservation_check(&v, &omega, &rho, &mult, &fd)?;
            let tests = [Jet::scalar_only(vec![1.0; rho.len()], 2), random_jet(&rho, seed.wrapping_add(3000))];
            let lin = linearized_residual(&v, &rho, &mult, &tests, &fd)?;
            let bound = c.bound_factor * (crit.support_residual + lin + r.fd_error);
            let gap = (r.lhs - r.rhs).abs();
            s.check(Check::at_most(format!("critical_{k}_gap"), gap, bound, "conservation:critical-background"));
            rows.push(vec![
                "critical".into(),
                k.to_string(),
                num(r.lhs),
                num(r.rhs),
                num(r.identity_value),
                num(gap),
                num(r.scale),
                num(r.fd_error),
                num(bound),
            ]);
        }
        Ok(())
    };
    let step = body(&mut rows, run.summary);
    record(run.summary, step);
    run.art.write_csv(
        "conservation.csv",
        &["kind", "index", "lhs", "rhs", "identity", "defect", "scale", "fd_error", "bound"],
        &rows,
    )
}

// ---------------------------------------------------------------------------

fn embedding(family: Family, f: usize, n: usize, seed: u64, scale: f64, abelian: [f64; 4]) -> Step<Embedding> {
    match family {
        Family::Commuting => Embedding::random_commuting(f, n, seed, scale),
        Family::Unitary => Embedding::random_unitary_orbit(f, n, seed, scale),
        Family::Abelian => Embedding::random_abelian_orbit(f, n, seed, abelian),
    }
}

fn background(size: usize, emb: &Embedding) -> Step<LatticeBackground> {
    LatticeBackground::new(LatticeChart::unit_box(size)?, emb.clone(), Density::Constant(1.0))
}

pub fn verify_boundary_lemma(run: &mut Run) -> Result<(), CliError> {
    let c: &LemmaSection = &run.cfg.lemma;
    let fd = FdConfig { richardson: false, ..FdConfig::default() };
    let v = Field::Bump { amplitude: c.amplitude, lo: [0.0; 4], hi: [1.0; 4] };
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let body = |rows: &mut Vec<Vec<String>>, points: &mut Vec<(f64, f64)>| -> Step<()> {
        let mult = MultiplierSet::new(c.kappa, c.s, c.trace)?;
        let emb = embedding(c.family, c.f, c.spin_dim, run.seed, c.embedding_scale, [c.embedding_scale; 4])?;
        for &n in &c.sizes {
            let bg = background(n, &emb)?;
            let omega = Region::boxed(&bg.chart, [c.box_lo; 4], [c.box_hi; 4]);
            let l = boundary_lemma(&v, &omega, &bg, &mult, &fd)?;
            let rel = l.defect / l.bulk.abs().max(f64::MIN_POSITIVE);
            rows.push(vec![n.to_string(), num(1.0 / n as f64), num(l.bulk), num(l.boundary), num(l.defect), num(rel)]);
            points.push((1.0 / n as f64, rel));
        }
        Ok(())
    };
    let step = body(&mut rows, &mut points);
    if record(run.summary, step).is_some() {
        for (k, w) in points.windows(2).enumerate() {
            run.summary.check(Check::at_least(
                format!("refinement_ratio_{}_{}", c.sizes[k], c.sizes[k + 1]),
                w[0].1 / w[1].1,
                c.min_ratio,
                "convergence:boundary-flux-representation",
            ));
        }
    }
    run.art.write_csv("lemma.csv", &["size", "h", "bulk", "boundary", "defect", "relative_defect"], &rows)?;
    let mut series = Series::new("relative defect", points.clone());
    if points.len() >= 2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        if let Ok(fit) = fit_loglog(&xs, &ys) {
            run.summary.notes.push(format!("defect ~ h^{:.3}", fit.slope));
            series = series.with_fit(fit.slope, fit.intercept);
        }
    }
    run.plot("lemma.svg", log_plot("Bulk against boundary flux", "cell width h", "relative defect", vec![series]))
}

// ---------------------------------------------------------------------------

fn area_config(c: &AreaSection, bg: &LatticeBackground) -> SurfaceConfig {
    let chart = &bg.chart;
    let v = Field::Bump { amplitude: c.amplitude, lo: c.bump_lo, hi: c.bump_hi };
    let mut cfg = SurfaceConfig::new(
        Region::below(chart, c.omega_axis, c.omega_threshold),
        Region::below(chart, c.v_axis, c.v_threshold),
        v.clone(),
        v,
    );
    cfg.past_margin = (c.past_margin_fraction * chart.extent()[0] as f64).floor() as usize;
    cfg
}

pub fn area_change(run: &mut Run) -> Result<(), CliError> {
    let c: &AreaSection = &run.cfg.area;
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    let body = |rows: &mut Vec<Vec<String>>, errors: &mut Vec<(f64, f64)>| -> Step<()> {
        let mult = MultiplierSet::new(c.kappa, c.s, c.trace)?;
        let emb = embedding(c.family, c.f, c.spin_dim, run.seed, c.embedding_scale, [c.embedding_scale; 4])?;
        for &n in &c.sizes {
            let bg = background(n, &emb)?;
            let cfg = area_config(c, &bg);
            let a = area_change_analytic(&cfg, &bg, &mult)?;
            let fd = area_derivative_fd(&cfg, &bg, &mult, c.tau_cells / n as f64)?;
            let rel = (fd - a.total).abs() / a.total.abs().max(f64::MIN_POSITIVE);
            rows.push(vec![n.to_string(), num(a.dta1), num(a.dta2), num(a.dta3), num(a.total), num(fd), num(rel)]);
            errors.push((1.0 / n as f64, rel));
        }
        Ok(())
    };
    let step = body(&mut rows, &mut errors);
    if record(run.summary, step).is_some() {
        let last = errors.last().map_or(f64::NAN, |e| e.1);
        run.summary.check(Check::at_most(
            "relative_error_finest",
            last,
            c.rel_tol,
            "oracle:difference-quotient-of-flowed-area",
        ));
        for (k, w) in errors.windows(2).enumerate() {
            run.summary.check(Check::at_most(
                format!("error_{}_over_{}", c.sizes[k + 1], c.sizes[k]),
                w[1].1 / w[0].1,
                1.0,
                "convergence:refinement",
            ));
        }
    }
    run.art.write_csv(
        "area_change.csv",
        &["size", "dta1", "dta2", "dta3", "total", "difference_quotient", "relative_error"],
        &rows,
    )?;
    run.plot(
        "area_change.svg",
        log_plot(
            "Analytic area change against difference quotient",
            "cell width h",
            "relative error",
            vec![Series::new("relative error", errors)],
        ),
    )
}

// ---------------------------------------------------------------------------

pub fn jacobson(run: &mut Run) -> Result<(), CliError> {
    let c: &JacobsonSection = &run.cfg.jacobson;
    let mut rows = Vec::new();
    let body = |rows: &mut Vec<Vec<String>>, s: &mut Summary| -> Step<()> {
        let mult = MultiplierSet::new(c.kappa, c.s, c.trace)?;
        for &family in &c.families {
            let scale = if family == Family::Commuting { c.commuting_slope } else { c.unitary_rotation };
            let emb = embedding(family, c.f, c.spin_dim, run.seed, scale, c.abelian_scales)?;
            let bg = background(c.size, &emb)?;
            for &axis in &c.axes {
                let symmetric = family == Family::Abelian;
                let v = if symmetric {
                    let mut e = [0.0; 4];
                    e[axis] = c.amplitude;
                    Field::Constant(e)
                } else {
                    Field::ShearBump { axis, amplitude: c.amplitude, lo: [0.0; 4], hi: [1.0; 4] }
                };
                let cfg = SurfaceConfig::new(
                    Region::below(&bg.chart, axis, c.omega_threshold),
                    Region::below(&bg.chart, c.v_axis, c.v_threshold),
                    v.clone(),
                    v,
                );
                let tol = JacobsonTolerances {
                    div_tol: c.div_tol,
                    killing_threshold: c.killing_threshold,
                    max_pairs: c.max_pairs,
                };
                let j = jacobson_check(&cfg, &bg, &mult, &tol)?;
                let label = format!("{}_axis{axis}", family.id());
                s.check(Check::at_most(
                    format!("{label}_defect"),
                    j.defect,
                    c.defect_tol * j.scale,
                    "relation:area-change-equals-flux",
                ));
                s.check(Check::at_most(
                    format!("{label}_divergence"),
                    j.killing.max_div,
                    c.div_tol,
                    "precondition:divergence-free",
                ));
                if symmetric {
                    s.check(Check::at_most(
                        format!("{label}_killing_defect"),
                        j.killing.max_sym_defect,
                        c.killing_threshold,
                        "precondition:killing",
                    ));
                    s.check(Check::at_most(
                        format!("{label}_area_change"),
                        j.da_dtau.abs(),
                        c.max_symmetric_change,
                        "symmetry:area-invariant",
                    ));
                } else {
                    s.check(Check::at_least(
                        format!("{label}_area_change"),
                        j.da_dtau.abs(),
                        c.min_area_change,
                        "nontriviality",
                    ));
                }
                rows.push(vec![
                    family.id().into(),
                    axis.to_string(),
                    c.size.to_string(),
                    num(j.change.dta1),
                    num(j.change.dta2),
                    num(j.change.dta3),
                    num(j.da_dtau),
                    num(j.flux),
                    num(j.defect),
                    num(j.scale),
                    num(j.killing.max_sym_defect),
                    num(j.killing.max_div),
                    j.violations.join("; "),
                ]);
            }
        }
        Ok(())
    };
    let step = body(&mut rows, run.summary);
    record(run.summary, step);
    run.art.write_csv(
        "jacobson.csv",
        &[
            "family",
            "axis",
            "size",
            "dta1",
            "dta2",
            "dta3",
            "da_dtau",
            "flux",
            "defect",
            "scale",
            "killing_defect",
            "max_divergence",
            "violations",
        ],
        &rows,
    )
}

// ---------------------------------------------------------------------------

pub fn vacuum_scaling(run: &mut Run) -> Result<(), CliError> {
    let c = &run.cfg.vacuum;
    let q = QuadConfig { rel_tol: c.quad_rel_tol, ..QuadConfig::default() };
    let eps = logspace(c.eps_min, c.eps_max, c.points);
    let radius_eps = logspace(c.eps_min, c.eps_max, c.radius_points);
    let masses = logspace(c.mass_min, c.mass_max, c.radius_points);
    let body = || -> Step<_> {
        let base = RegParams::new(c.eps_max, c.mass, c.lambda, c.delta)?;
        let sweep = scaling_sweep(&base, &eps, &q, c.min_r_squared)?;
        let re =
            radius_eps.iter().map(|&x| cylinder_radius(&base.with_epsilon(x), &q, c.band)).collect::<Step<Vec<_>>>()?;
        let rm = masses.iter().map(|&m| cylinder_radius(&base.with_mass(m), &q, c.band)).collect::<Step<Vec<_>>>()?;
        let fit_e = fit_loglog(&radius_eps, &re)?;
        let fit_m = fit_loglog(&masses, &rm)?;
        let massive = local_trace(&base, &q)?.abs();
        let massless = local_trace(&base.with_mass(0.0), &q)?.abs();
        Ok((sweep, re, rm, fit_e, fit_m, massive, massless))
    };
    let Some((sweep, re, rm, fit_e, fit_m, massive, massless)) = record(run.summary, body()) else { return Ok(()) };
    let s = &mut *run.summary;
    let worst_ratio = sweep.rows.iter().map(|r| r.epsilon * r.mass).fold(0.0, f64::max);
    s.check(Check::at_most("max_eps_mass", worst_ratio, c.max_eps_mass, "regime:eps-m-small"));
    s.check(Check::near("local_trace_slope", sweep.trace.slope, -2.0, c.trace_slope_tol, "power-law:trace~m/eps^2"));
    s.check(Check::near("chain_slope", sweep.chain.slope, -6.0, c.chain_slope_tol, "power-law:chain~eps^-6"));
    s.check(Check::near(
        "lagrangian_slope",
        sweep.lagrangian.slope,
        -10.0,
        c.lagrangian_slope_tol,
        "power-law:L~eps^-10",
    ));
    s.check(Check::near("radius_eps_slope", fit_e.slope, 2.0, c.radius_slope_tol, "power-law:radius~m*eps^2"));
    s.check(Check::near("radius_mass_slope", fit_m.slope, 1.0, c.radius_slope_tol, "power-law:radius~m*eps^2"));
    s.check(Check::at_most("massless_trace", massless, c.quad_rel_tol * massive, "symmetry:massless-trace-vanishes"));
    for (name, fit) in [
        ("trace", sweep.trace),
        ("chain", sweep.chain),
        ("lagrangian", sweep.lagrangian),
        ("radius_eps", fit_e),
        ("radius_mass", fit_m),
    ] {
        s.notes.push(format!("{name}: slope {:.6} R^2 {:.8}", fit.slope, fit.r_squared));
    }
    let rows: Vec<Vec<String>> = sweep
        .rows
        .iter()
        .map(|r| vec![num(r.epsilon), num(r.mass), num(r.local_trace), num(r.chain_modulus), num(r.lagrangian_origin)])
        .collect();
    run.art.write_csv("sweep.csv", &["epsilon", "mass", "local_trace", "chain_modulus", "lagrangian_origin"], &rows)?;
    let mut radius_rows: Vec<Vec<String>> =
        radius_eps.iter().zip(&re).map(|(e, r)| vec!["epsilon".into(), num(*e), num(c.mass), num(*r)]).collect();
    radius_rows.extend(masses.iter().zip(&rm).map(|(m, r)| vec!["mass".into(), num(c.eps_max), num(*m), num(*r)]));
    run.art.write_csv("radius.csv", &["swept", "epsilon", "mass", "radius"], &radius_rows)?;
    let col = |f: fn(&cfslab_core::vacuum::SweepRow) -> f64| -> Vec<(f64, f64)> {
        sweep.rows.iter().map(|r| (r.epsilon, f(r).abs())).collect()
    };
    run.plot(
        "sweep.svg",
        log_plot(
            "Vacuum observables at the origin",
            "epsilon",
            "magnitude",
            vec![
                Series::new("|local trace|", col(|r| r.local_trace)).with_fit(sweep.trace.slope, sweep.trace.intercept),
                Series::new("chain modulus", col(|r| r.chain_modulus))
                    .with_fit(sweep.chain.slope, sweep.chain.intercept),
                Series::new("L(x, x)", col(|r| r.lagrangian_origin))
                    .with_fit(sweep.lagrangian.slope, sweep.lagrangian.intercept),
            ],
        ),
    )?;
    run.plot(
        "radius_eps.svg",
        log_plot(
            "Timelike cylinder radius",
            "epsilon",
            "radius",
            vec![Series::new("radius", radius_eps.iter().copied().zip(re.iter().copied()).collect())
                .with_fit(fit_e.slope, fit_e.intercept)],
        ),
    )?;
    run.plot(
        "radius_mass.svg",
        log_plot(
            "Timelike cylinder radius",
            "mass",
            "radius",
            vec![Series::new("radius", masses.iter().copied().zip(rm.iter().copied()).collect())
                .with_fit(fit_m.slope, fit_m.intercept)],
        ),
    )
}

// ---------------------------------------------------------------------------

pub fn power_counting(run: &mut Run) -> Result<(), CliError> {
    let c = &run.cfg.power;
    let regime = Regime::standard();
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    let body = |rows: &mut Vec<Vec<String>>, verdicts: &mut Vec<Vec<String>>, s: &mut Summary| -> Step<()> {
        let mut table_mismatch = 0usize;
        for k in 0..=c.exponent_range {
            table_mismatch += usize::from(brute_shat(k, &regime)? != shat_of(k)?);
            table_mismatch += usize::from(brute_s(k, &regime)? != s_of(k)?);
        }
        s.check(Check::at_most(
            "exponent_table_mismatches",
            table_mismatch as f64,
            0.0,
            "oracle:brute-force-exponents",
        ));
        let (mut disagree, mut bad_verdicts, mut total) = (0usize, 0usize, 0usize);
        for p in c.p_min..=c.p_max {
            for q in 0..=c.q_max {
                for qh in 0..=c.qhat_max {
                    let b = Bindings::full(p, q, qh)?;
                    for rel in Relation::ALL {
                        let d = brute_force(rel, &b, &regime)?;
                        let closed = closed_form(rel).eval(&b)?.canonical(&regime)?;
                        let agree = d.result.same_terms(&closed);
                        disagree += usize::from(!agree);
                        total += 1;
                        rows.push(vec![
                            rel.name().into(),
                            p.to_string(),
                            q.to_string(),
                            qh.to_string(),
                            d.result.to_string(),
                            closed.to_string(),
                            agree.to_string(),
                        ]);
                    }
                    let m = matter_vs_vacuum(p, q, qh)?;
                    let (sv, shat) = (b.value(Param::S)?, b.value(Param::SHat)?);
                    let mdelta4 = Monomial::one().with(Sym::Mass, 4).with(Sym::Delta, 4);
                    let (label, ok) = match &m.verdict {
                        Verdict::Suppressed { factor, at_least_mdelta4 } => (
                            format!("suppressed by {factor}"),
                            sv <= shat && *at_least_mdelta4 && (sv < shat || *factor == mdelta4),
                        ),
                        Verdict::Incomparable => ("incomparable".to_string(), sv > shat),
                        Verdict::Dominant => ("dominant".to_string(), false),
                    };
                    bad_verdicts += usize::from(!(ok && m.kappa_t_negligible));
                    verdicts.push(vec![
                        p.to_string(),
                        q.to_string(),
                        qh.to_string(),
                        sv.to_string(),
                        shat.to_string(),
                        label,
                        m.kappa_t_negligible.to_string(),
                    ]);
                }
            }
        }
        s.check(Check::at_most("derivation_disagreements", disagree as f64, 0.0, "oracle:brute-force-derivation"));
        s.check(Check::at_most("verdict_violations", bad_verdicts as f64, 0.0, "matter-suppression:(m delta)^4"));
        s.check(Check::holds("unit_audit", unit_audit().consistent, "dimensional-analysis"));
        s.notes.push(format!(
            "{total} derivations over p {}..={}, q 0..={}, q-hat 0..={}",
            c.p_min, c.p_max, c.q_max, c.qhat_max
        ));
        Ok(())
    };
    let step = body(&mut rows, &mut verdicts, run.summary);
    record(run.summary, step);
    run.art.write_csv(
        "derivations.csv",
        &["relation", "p", "q", "qhat", "brute_force", "closed_form", "agree"],
        &rows,
    )?;
    run.art.write_csv("verdicts.csv", &["p", "q", "qhat", "s", "shat", "verdict", "kappa_t_negligible"], &verdicts)
}
