//! Experiment configuration: line-oriented `key = value` files with
//! `[section]` headers, one section per experiment. Every section is
//! optional; missing keys take the shipped defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Minimize,
    VerifyConservation,
    VerifyBoundaryLemma,
    AreaChange,
    Jacobson,
    VacuumScaling,
    PowerCounting,
}

impl Experiment {
    pub fn id(self) -> &'static str {
        match self {
            Experiment::Minimize => "minimize",
            Experiment::VerifyConservation => "verify-conservation",
            Experiment::VerifyBoundaryLemma => "verify-boundary-lemma",
            Experiment::AreaChange => "area-change",
            Experiment::Jacobson => "jacobson",
            Experiment::VacuumScaling => "vacuum-scaling",
            Experiment::PowerCounting => "power-counting",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Diagonal in a fixed frame with eigenvalues affine in the chart.
    Commuting,
    /// Conjugation by `exp(i sum x^j H_j)` with random `H_j`.
    Unitary,
    /// Unitary orbit with commuting generators; translations are symmetries.
    Abelian,
}

impl Family {
    pub fn id(self) -> &'static str {
        match self {
            Family::Commuting => "commuting",
            Family::Unitary => "unitary",
            Family::Abelian => "abelian",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub seed: u64,
    pub out: Option<PathBuf>,
    #[serde(default = "yes")]
    pub plots: bool,
    #[serde(default)]
    pub minimize: MinimizeSection,
    #[serde(default, rename = "verify-conservation")]
    pub conservation: ConservationSection,
    #[serde(default, rename = "verify-boundary-lemma")]
    pub lemma: LemmaSection,
    #[serde(default, rename = "area-change")]
    pub area: AreaSection,
    #[serde(default)]
    pub jacobson: JacobsonSection,
    #[serde(default, rename = "vacuum-scaling")]
    pub vacuum: VacuumSection,
    #[serde(default, rename = "power-counting")]
    pub power: PowerSection,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeSection {
    pub f: usize,
    pub spin_dim: usize,
    pub points: usize,
    pub trace: f64,
    pub volume: f64,
    pub kappa: f64,
    pub max_iters: usize,
    pub tol_grad: f64,
    pub eta_schedule: Vec<f64>,
    pub penalty_growth: f64,
    pub boundedness_bound: Option<f64>,
    pub optimize_positions: bool,
    pub support_tol: f64,
    pub constraint_tol: f64,
}

impl Default for MinimizeSection {
    fn default() -> Self {
        Self {
            f: 2,
            spin_dim: 1,
            points: 4,
            trace: 0.0,
            volume: 1.0,
            kappa: 0.0,
            max_iters: 2000,
            tol_grad: 1e-9,
            eta_schedule: vec![1e-2, 1e-4],
            penalty_growth: 4.0,
            boundedness_bound: None,
            optimize_positions: true,
            support_tol: 1e-6,
            constraint_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConservationSection {
    /// Random backgrounds for the algebraic identity.
    pub backgrounds: usize,
    pub f: usize,
    pub spin_dim: usize,
    pub points: usize,
    pub trace: f64,
    pub kappa: f64,
    pub s: f64,
    pub identity_tol: f64,
    /// Minimized f = 2 backgrounds on which the conservation law itself is checked.
    pub critical_runs: usize,
    pub critical_points: usize,
    pub bound_factor: f64,
}

impl Default for ConservationSection {
    fn default() -> Self {
        Self {
            backgrounds: 20,
            f: 3,
            spin_dim: 1,
            points: 8,
            trace: 0.5,
            kappa: 0.2,
            s: 0.3,
            identity_tol: 1e-8,
            critical_runs: 3,
            critical_points: 4,
            bound_factor: 10.0,
        }
    }
}

/// Lattice background shared by the surface experiments.
#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaSection {
    pub family: Family,
    pub f: usize,
    pub spin_dim: usize,
    /// Slope scale (commuting) or generator norm (unitary).
    pub embedding_scale: f64,
    pub sizes: Vec<usize>,
    pub box_lo: f64,
    pub box_hi: f64,
    pub amplitude: [f64; 4],
    pub kappa: f64,
    pub s: f64,
    pub trace: f64,
    /// Minimum ratio of relative defects between consecutive sizes.
    pub min_ratio: f64,
}

impl Default for LemmaSection {
    fn default() -> Self {
        Self {
            family: Family::Unitary,
            f: 3,
            spin_dim: 1,
            embedding_scale: 0.5,
            sizes: vec![4, 8],
            box_lo: 0.25,
            box_hi: 0.75,
            amplitude: [0.4, 0.3, -0.2, 0.25],
            kappa: 0.1,
            s: 0.0,
            trace: 0.5,
            min_ratio: 1.7,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaSection {
    pub family: Family,
    pub f: usize,
    pub spin_dim: usize,
    pub embedding_scale: f64,
    pub sizes: Vec<usize>,
    pub amplitude: [f64; 4],
    pub bump_lo: [f64; 4],
    pub bump_hi: [f64; 4],
    pub omega_axis: usize,
    pub omega_threshold: f64,
    pub v_axis: usize,
    pub v_threshold: f64,
    /// Cells excluded at the past end of the chart, as a fraction of the size.
    pub past_margin_fraction: f64,
    /// Flow time of the difference quotient in cell widths.
    pub tau_cells: f64,
    pub kappa: f64,
    pub s: f64,
    pub trace: f64,
    pub rel_tol: f64,
}

impl Default for AreaSection {
    fn default() -> Self {
        Self {
            family: Family::Unitary,
            f: 3,
            spin_dim: 1,
            embedding_scale: 0.5,
            sizes: vec![8, 16],
            amplitude: [0.2, 0.3, 0.0, 0.15],
            bump_lo: [0.1875, 0.0, 0.0, 0.0],
            bump_hi: [1.0; 4],
            omega_axis: 1,
            omega_threshold: 0.125,
            v_axis: 2,
            v_threshold: 0.875,
            past_margin_fraction: 0.1875,
            tau_cells: 0.25,
            kappa: 0.1,
            s: 0.0,
            trace: 0.5,
            rel_tol: 1e-3,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JacobsonSection {
    pub families: Vec<Family>,
    pub f: usize,
    pub spin_dim: usize,
    pub commuting_slope: f64,
    pub unitary_rotation: f64,
    pub abelian_scales: [f64; 4],
    /// Shear direction, also the normal of the region boundary.
    pub axes: Vec<usize>,
    pub size: usize,
    pub amplitude: f64,
    pub omega_threshold: f64,
    pub v_axis: usize,
    pub v_threshold: f64,
    pub kappa: f64,
    pub s: f64,
    pub trace: f64,
    /// Relative to `max(|dA/dtau|, 1)`.
    pub defect_tol: f64,
    pub div_tol: f64,
    /// Bound on the symmetrized Lagrangian derivative; enforced for the
    /// abelian family, reported for the others.
    pub killing_threshold: f64,
    pub max_pairs: usize,
    /// Shear flows must change the area by at least this much.
    pub min_area_change: f64,
    /// Symmetry flows must change it by at most this much.
    pub max_symmetric_change: f64,
}

impl Default for JacobsonSection {
    fn default() -> Self {
        Self {
            families: vec![Family::Commuting, Family::Unitary, Family::Abelian],
            f: 3,
            spin_dim: 1,
            commuting_slope: 0.3,
            unitary_rotation: 0.5,
            abelian_scales: [0.3, 0.2, 0.4, 0.5],
            axes: vec![0, 1, 3],
            size: 4,
            amplitude: 0.3,
            omega_threshold: 0.5,
            v_axis: 2,
            v_threshold: 0.75,
            kappa: 0.1,
            s: 0.0,
            trace: 0.5,
            defect_tol: 1e-8,
            div_tol: 1e-10,
            killing_threshold: 1e-6,
            max_pairs: 20_000,
            min_area_change: 1e-6,
            max_symmetric_change: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VacuumSection {
    pub mass: f64,
    pub lambda: f64,
    pub delta: f64,
    pub eps_min: f64,
    pub eps_max: f64,
    pub points: usize,
    pub min_r_squared: f64,
    /// Largest admissible `eps * mass` in the sweep.
    pub max_eps_mass: f64,
    pub radius_points: usize,
    pub mass_min: f64,
    pub mass_max: f64,
    pub band: f64,
    pub quad_rel_tol: f64,
    pub trace_slope_tol: f64,
    pub chain_slope_tol: f64,
    pub lagrangian_slope_tol: f64,
    pub radius_slope_tol: f64,
}

impl Default for VacuumSection {
    fn default() -> Self {
        Self {
            mass: 1.0,
            lambda: 1.0,
            delta: 1.0,
            eps_min: 1e-4,
            eps_max: 1e-2,
            points: 9,
            min_r_squared: 0.999,
            max_eps_mass: 1e-2,
            radius_points: 5,
            mass_min: 1e-2,
            mass_max: 1.0,
            band: 1e-9,
            quad_rel_tol: 1e-8,
            trace_slope_tol: 0.05,
            chain_slope_tol: 0.2,
            lagrangian_slope_tol: 0.3,
            radius_slope_tol: 0.1,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSection {
    pub p_min: i64,
    pub p_max: i64,
    pub q_max: i64,
    pub qhat_max: i64,
    /// Upper end of the brute-force tables of the s and s-hat exponents.
    pub exponent_range: i64,
}

impl Default for PowerSection {
    fn default() -> Self {
        Self { p_min: 5, p_max: 9, q_max: 4, qhat_max: 3, exponent_range: 8 }
    }
}

/// Line of `key` inside `[section]`; `section` is empty for top-level keys.
pub fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        if current == section && line.split('=').next().is_some_and(|k| k.trim() == key) && line.contains('=') {
            return Some(i + 1);
        }
    }
    None
}

/// Field-level validation failure; the caller attaches the line.
struct Invalid {
    key: &'static str,
    message: String,
}

fn check(ok: bool, key: &'static str, message: impl FnOnce() -> String) -> Result<(), Invalid> {
    if ok {
        Ok(())
    } else {
        Err(Invalid { key, message: message() })
    }
}

fn positive(key: &'static str, v: f64) -> Result<(), Invalid> {
    check(v > 0.0 && v.is_finite(), key, || format!("must be positive and finite (got {v})"))
}

fn axis(key: &'static str, v: usize) -> Result<(), Invalid> {
    check(v < 4, key, || format!("axis must be 0..=3 (got {v})"))
}

fn dims(f: usize, spin_dim: usize) -> Result<(), Invalid> {
    check(f >= 2, "f", || format!("operator dimension must be at least 2 (got {f})"))?;
    check(spin_dim >= 1 && 2 * spin_dim <= f, "spin_dim", || format!("need 1 <= spin_dim <= f/2 (got {spin_dim})"))
}

fn sizes(v: &[usize]) -> Result<(), Invalid> {
    check(!v.is_empty() && v.iter().all(|&n| n >= 2), "sizes", || format!("need at least one size >= 2 (got {v:?})"))
}

impl MinimizeSection {
    fn validate(&self) -> Result<(), Invalid> {
        dims(self.f, self.spin_dim)?;
        check(self.points >= 1, "points", || "need at least one point".into())?;
        positive("volume", self.volume)?;
        check(self.kappa >= 0.0, "kappa", || format!("must be nonnegative (got {})", self.kappa))?;
        check(self.max_iters >= 1, "max_iters", || "must be at least 1".into())?;
        positive("tol_grad", self.tol_grad)?;
        check(self.eta_schedule.windows(2).all(|w| w[1] <= w[0]), "eta_schedule", || "must be nonincreasing".into())?;
        check(self.penalty_growth > 1.0, "penalty_growth", || "must exceed 1".into())?;
        if let Some(b) = self.boundedness_bound {
            positive("boundedness_bound", b)?;
        }
        positive("support_tol", self.support_tol)?;
        positive("constraint_tol", self.constraint_tol)
    }
}

impl ConservationSection {
    fn validate(&self) -> Result<(), Invalid> {
        dims(self.f, self.spin_dim)?;
        check(self.backgrounds >= 1, "backgrounds", || "need at least one background".into())?;
        check(self.points >= 2, "points", || "need at least two points".into())?;
        check(self.critical_points >= 2, "critical_points", || "need at least two points".into())?;
        check(self.kappa >= 0.0, "kappa", || "must be nonnegative".into())?;
        positive("identity_tol", self.identity_tol)?;
        positive("bound_factor", self.bound_factor)
    }
}

impl LemmaSection {
    fn validate(&self) -> Result<(), Invalid> {
        dims(self.f, self.spin_dim)?;
        positive("embedding_scale", self.embedding_scale)?;
        sizes(&self.sizes)?;
        check(self.sizes.len() >= 2, "sizes", || "need two sizes to measure a refinement ratio".into())?;
        check(0.0 <= self.box_lo && self.box_lo < self.box_hi && self.box_hi <= 1.0, "box_hi", || {
            format!("need 0 <= box_lo < box_hi <= 1 (got {} {})", self.box_lo, self.box_hi)
        })?;
        check(self.kappa >= 0.0, "kappa", || "must be nonnegative".into())?;
        positive("min_ratio", self.min_ratio)
    }
}

impl AreaSection {
    fn validate(&self) -> Result<(), Invalid> {
        dims(self.f, self.spin_dim)?;
        positive("embedding_scale", self.embedding_scale)?;
        sizes(&self.sizes)?;
        axis("omega_axis", self.omega_axis)?;
        axis("v_axis", self.v_axis)?;
        check(self.omega_axis != self.v_axis, "v_axis", || "must differ from omega_axis".into())?;
        check((0.0..1.0).contains(&self.past_margin_fraction), "past_margin_fraction", || "must lie in [0, 1)".into())?;
        positive("tau_cells", self.tau_cells)?;
        check(self.kappa >= 0.0, "kappa", || "must be nonnegative".into())?;
        positive("rel_tol", self.rel_tol)
    }
}

impl JacobsonSection {
    fn validate(&self) -> Result<(), Invalid> {
        dims(self.f, self.spin_dim)?;
        check(!self.families.is_empty(), "families", || "need at least one family".into())?;
        positive("commuting_slope", self.commuting_slope)?;
        positive("unitary_rotation", self.unitary_rotation)?;
        check(!self.axes.is_empty(), "axes", || "need at least one axis".into())?;
        for &a in &self.axes {
            axis("axes", a)?;
            check(a != self.v_axis, "axes", || format!("axis {a} is normal to the boundary of V"))?;
        }
        axis("v_axis", self.v_axis)?;
        check(self.size >= 2, "size", || "must be at least 2".into())?;
        check(self.kappa >= 0.0, "kappa", || "must be nonnegative".into())?;
        positive("defect_tol", self.defect_tol)?;
        positive("div_tol", self.div_tol)?;
        positive("killing_threshold", self.killing_threshold)?;
        check(self.max_pairs >= 1, "max_pairs", || "must be at least 1".into())?;
        positive("min_area_change", self.min_area_change)?;
        positive("max_symmetric_change", self.max_symmetric_change)
    }
}

impl VacuumSection {
    fn validate(&self) -> Result<(), Invalid> {
        positive("mass", self.mass)?;
        positive("lambda", self.lambda)?;
        positive("delta", self.delta)?;
        positive("eps_min", self.eps_min)?;
        check(self.eps_max > self.eps_min, "eps_max", || "must exceed eps_min".into())?;
        check(self.delta >= self.eps_max, "delta", || "must be at least eps_max".into())?;
        check(self.points >= 4, "points", || format!("slope fit needs at least 4 points (got {})", self.points))?;
        check(self.radius_points >= 4, "radius_points", || {
            format!("slope fit needs at least 4 points (got {})", self.radius_points)
        })?;
        check(self.min_r_squared > 0.0 && self.min_r_squared <= 1.0, "min_r_squared", || "must lie in (0, 1]".into())?;
        positive("max_eps_mass", self.max_eps_mass)?;
        positive("mass_min", self.mass_min)?;
        check(self.mass_max > self.mass_min, "mass_max", || "must exceed mass_min".into())?;
        positive("band", self.band)?;
        positive("quad_rel_tol", self.quad_rel_tol)?;
        positive("trace_slope_tol", self.trace_slope_tol)?;
        positive("chain_slope_tol", self.chain_slope_tol)?;
        positive("lagrangian_slope_tol", self.lagrangian_slope_tol)?;
        positive("radius_slope_tol", self.radius_slope_tol)
    }
}

impl PowerSection {
    fn validate(&self) -> Result<(), Invalid> {
        check(self.p_min >= 5, "p_min", || format!("the regime needs p >= 5 (got {})", self.p_min))?;
        check(self.p_max >= self.p_min, "p_max", || "must be at least p_min".into())?;
        check(self.q_max >= 0, "q_max", || "must be nonnegative".into())?;
        check(self.qhat_max >= 0, "qhat_max", || "must be nonnegative".into())?;
        check(self.exponent_range >= 0, "exponent_range", || "must be nonnegative".into())
    }
}

impl Config {
    /// Parses and validates the section of `experiment`.
    pub fn parse(text: &str, path: &Path, experiment: Experiment) -> Result<Self, CliError> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            line: e.span().map(|s| text[..s.start].matches('\n').count() + 1),
            field: None,
            message: e.message().to_string(),
        })?;
        let fail = |section: &str, inv: Invalid| CliError::Config {
            path: path.to_path_buf(),
            line: locate(text, section, inv.key),
            field: Some(if section.is_empty() { inv.key.to_string() } else { format!("{section}.{}", inv.key) }),
            message: inv.message,
        };
        if let Some(declared) = cfg.experiment {
            if declared != experiment {
                return Err(fail(
                    "",
                    Invalid {
                        key: "experiment",
                        message: format!("file is for `{}`, not `{}`", declared.id(), experiment.id()),
                    },
                ));
            }
        }
        let section = experiment.id();
        let checked = match experiment {
            Experiment::Minimize => cfg.minimize.validate(),
            Experiment::VerifyConservation => cfg.conservation.validate(),
            Experiment::VerifyBoundaryLemma => cfg.lemma.validate(),
            Experiment::AreaChange => cfg.area.validate(),
            Experiment::Jacobson => cfg.jacobson.validate(),
            Experiment::VacuumScaling => cfg.vacuum.validate(),
            Experiment::PowerCounting => cfg.power.validate(),
        };
        checked.map_err(|inv| fail(section, inv))?;
        Ok(cfg)
    }
}
