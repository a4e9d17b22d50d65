//! The four model problems, the convergence-study driver and its file outputs.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::correctors::{corrector_basis, decay_profile, DecayProfile, FineProblem};
use crate::error::{Error, Result};
use crate::fem::{
    sigma_integrals, Coefficient, CoefficientBounds, ExactSolution, PiecewiseField, QuadratureRule,
};
use crate::lod::{assemble_lod_system, best_approximation, error_report, fem_baseline, solve_lod, ErrorRecord, Reference};
use crate::mesh::{Hierarchy, InterfaceGeometry, MeshPattern, Side, MAX_LEVEL};
use crate::tcoercivity::{build_discrete_duals, coercivity_probe, CoercivityReport};

/// Height of the flat interface.
pub const FLAT_HEIGHT: f64 = 0.5 - 1.0 / 128.0;

/// How errors are measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferencePolicy {
    Exact,
    FineFem,
}

/// A model problem `-div(σ∇u) = f` with homogeneous Dirichlet data.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub name: String,
    pub geometry: InterfaceGeometry<f64>,
    pub sigma: Coefficient<f64>,
    pub load: PiecewiseField<f64>,
    pub exact: Option<ExactSolution<f64>>,
    pub reference: ReferencePolicy,
}

fn flat_exact(l: f64, sigma_minus: f64, geom: InterfaceGeometry<f64>) -> ExactSolution<f64> {
    // u = c·p(x₁)q(x₂) with c = 1 on Ω₋ and c = -σ₋ on Ω₊
    let p = |x: f64| x * (x - 1.0);
    let q = move |y: f64| y * (y - 1.0) * (y - l);
    let dq = move |y: f64| (2.0 * y - 1.0) * (y - l) + y * (y - 1.0);
    let c = move |s: Side| if s == Side::Minus { 1.0 } else { -sigma_minus };
    ExactSolution {
        geom: Some(geom),
        value: Arc::new(move |x, s| c(s) * p(x[0]) * q(x[1])),
        gradient: Arc::new(move |x, s| [c(s) * (2.0 * x[0] - 1.0) * q(x[1]), c(s) * p(x[0]) * dq(x[1])]),
    }
}

/// Flat interface at `x₂ = 0.5 - 2⁻⁷`, σ = 1 below and σ = -σ₋ above.
pub fn scenario_flat(sigma_minus: f64) -> Result<ProblemSpec> {
    let l = FLAT_HEIGHT;
    let threshold = (1.0 - l) / l;
    if sigma_minus <= threshold {
        log::warn!("contrast {sigma_minus} is below the well-posedness threshold {threshold:.4}");
    }
    let geom = InterfaceGeometry::flat(l)?;
    let load = PiecewiseField::smooth(move |x| {
        sigma_minus * (2.0 * x[1] * (x[1] - 1.0) * (x[1] - l) + x[0] * (x[0] - 1.0) * (6.0 * x[1] - 2.0 * (l + 1.0)))
    });
    Ok(ProblemSpec {
        name: if sigma_minus == 2.0 {
            "flat2".into()
        } else if sigma_minus == 1.1 {
            "flat11".into()
        } else {
            format!("flat-{sigma_minus}")
        },
        sigma: Coefficient::piecewise_constant(geom.clone(), 1.0, sigma_minus),
        exact: Some(flat_exact(l, sigma_minus, geom.clone())),
        geometry: geom,
        load,
        reference: ReferencePolicy::Exact,
    })
}

/// Square inclusion `[0.25, 0.75]²` with oscillating coefficients of period 2⁻⁷.
pub fn scenario_square() -> Result<ProblemSpec> {
    let eps = 1.0 / 128.0;
    let geom = InterfaceGeometry::rectangle([0.25, 0.25], [0.75, 0.75])?;
    let field = PiecewiseField::piecewise(geom.clone(), move |x, s| {
        let (a, b) = (2.0 * PI * x[0] / eps, 2.0 * PI * x[1] / eps);
        match s {
            Side::Plus => 0.75 + 0.125 * a.cos() + 0.125 * b.sin(),
            Side::Minus => -5.0 + 0.5 * a.sin() + 0.5 * b.cos(),
        }
    });
    let bounds = CoefficientBounds { sigma_plus: 0.5, sigma_minus: 4.0, inf_plus: 0.5, sup_plus: 1.0 };
    // f = 1 above x₂ = 0.1 (the "minus" side of that line) and 0.1 below
    let load = PiecewiseField::piecewise(InterfaceGeometry::flat(0.1)?, |_, s| match s {
        Side::Minus => 1.0,
        Side::Plus => 0.1,
    });
    Ok(ProblemSpec {
        name: "square".into(),
        geometry: geom,
        sigma: Coefficient::new(field, bounds),
        load,
        exact: None,
        reference: ReferencePolicy::FineFem,
    })
}

/// Radial profile `p(r) = r²(r - 0.2)(r - 0.4)²` and its first two derivatives.
pub fn circle_profile(r: f64) -> [f64; 3] {
    [
        r.powi(5) - r.powi(4) + 0.32 * r.powi(3) - 0.032 * r * r,
        5.0 * r.powi(4) - 4.0 * r.powi(3) + 0.96 * r * r - 0.064 * r,
        20.0 * r.powi(3) - 12.0 * r * r + 1.92 * r - 0.064,
    ]
}

/// Disk of radius 0.2 at (0.5, 0.5) with σ = -2 inside, σ = 1 outside and a radial
/// exact solution of amplitude `a`.
pub fn scenario_circle(a: f64) -> Result<ProblemSpec> {
    let center = [0.5, 0.5];
    let sigma_minus = 2.0;
    let geom = InterfaceGeometry::disk(center, 0.2)?;
    let radius = move |x: [f64; 2]| ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt();
    let amp = move |s: Side| if s == Side::Minus { a } else { -a * sigma_minus };
    let exact = ExactSolution {
        geom: Some(geom.clone()),
        value: Arc::new(move |x, s| {
            let r = radius(x);
            if r >= 0.4 { 0.0 } else { amp(s) * circle_profile(r)[0] }
        }),
        gradient: Arc::new(move |x, s| {
            let r = radius(x);
            if r >= 0.4 || r == 0.0 {
                return [0.0, 0.0];
            }
            let d = amp(s) * circle_profile(r)[1] / r;
            [d * (x[0] - center[0]), d * (x[1] - center[1])]
        }),
    };
    let load = PiecewiseField::smooth(move |x| {
        let r = radius(x);
        if r >= 0.4 {
            0.0
        } else {
            // p'' + p'/r, with the removable singularity at r = 0 expanded
            a * sigma_minus * (25.0 * r.powi(3) - 16.0 * r * r + 2.88 * r - 0.128)
        }
    });
    Ok(ProblemSpec {
        name: "circle".into(),
        sigma: Coefficient::piecewise_constant(geom.clone(), 1.0, sigma_minus),
        geometry: geom,
        load,
        exact: Some(exact),
        reference: ReferencePolicy::Exact,
    })
}

/// Periodic pattern of period 2⁻⁵: one minus-square of side half the period per cell,
/// centered in it, so every coarse triangle of level ≤ 5 is exactly a quarter minus.
pub fn scenario_multiscale() -> Result<ProblemSpec> {
    let geom = InterfaceGeometry::checker(1.0 / 32.0, [0.25, 0.25], 0.5)?;
    Ok(ProblemSpec {
        name: "multiscale".into(),
        sigma: Coefficient::piecewise_constant(geom.clone(), 1.0, 4.0),
        geometry: geom,
        load: PiecewiseField::constant(1.0),
        exact: None,
        reference: ReferencePolicy::FineFem,
    })
}

pub fn scenario_by_name(name: &str) -> Result<ProblemSpec> {
    match name {
        "flat2" => scenario_flat(2.0),
        "flat11" => scenario_flat(1.1),
        "square" => scenario_square(),
        "circle" => scenario_circle(1e4),
        "multiscale" => scenario_multiscale(),
        other => Err(Error::InvalidArgument(format!("unknown scenario '{other}'"))),
    }
}

/// Parameters of one convergence study.
#[derive(Clone, Debug, Serialize)]
pub struct StudyConfig {
    pub coarse_levels: Vec<u32>,
    pub fine_level: u32,
    pub ms: Vec<usize>,
    /// Degree of the rule for stiffness and load.
    pub assembly_degree: usize,
    /// Degree of the rule for errors against closed-form solutions.
    pub error_degree: usize,
    /// Split quadrature along the interface.
    pub split: bool,
    pub pattern: MeshPattern,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    /// Write zero timings so that repeated runs give identical files.
    pub zero_timings: bool,
    /// Coarse level and element of an optional decay profile.
    pub decay: Option<(u32, usize)>,
    pub decay_m_max: usize,
    /// Samples of an optional coercivity probe.
    pub probe_samples: Option<usize>,
    /// Run coarse levels concurrently instead of one after another.
    pub parallel_cells: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            coarse_levels: vec![1, 2, 3, 4],
            fine_level: 6,
            ms: vec![1, 2, 3],
            assembly_degree: 4,
            error_degree: 6,
            split: true,
            pattern: MeshPattern::CrissCross,
            output_dir: None,
            seed: 0,
            zero_timings: false,
            decay: None,
            decay_m_max: 4,
            probe_samples: None,
            parallel_cells: false,
        }
    }
}

impl StudyConfig {
    /// Fine level 8 and coarse levels 1 to 6.
    pub fn full_scale() -> Self {
        Self { coarse_levels: (1..=6).collect(), fine_level: 8, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.coarse_levels.is_empty() || self.ms.is_empty() {
            return Err(Error::InvalidArgument("empty level or oversampling list".into()));
        }
        if self.fine_level > MAX_LEVEL {
            return Err(Error::LevelOutOfRange { level: self.fine_level, max: MAX_LEVEL });
        }
        if let Some(&l) = self.coarse_levels.iter().find(|&&l| l > self.fine_level) {
            return Err(Error::InvalidArgument(format!(
                "coarse level {l} exceeds the fine level {}",
                self.fine_level
            )));
        }
        Ok(())
    }
}

/// One (level, m) cell of a study.
#[derive(Clone, Debug, Serialize)]
pub struct StudyRow {
    pub scenario: String,
    pub coarse_level: u32,
    pub m: usize,
    pub errors: ErrorRecord,
    pub eoc_h1_lod: Option<f64>,
    pub eoc_l2_macro: Option<f64>,
    pub eoc_l2_bestapprox: Option<f64>,
    pub assembly_s: f64,
    pub solve_s: f64,
    pub fallback_patches: usize,
    pub failure: Option<String>,
}

/// Result of a convergence study.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ConvergenceRecord {
    pub rows: Vec<StudyRow>,
    pub decay: Option<DecayProfile>,
    pub probe: Option<CoercivityReport>,
}

pub fn eoc(coarse: f64, fine: f64, level_gap: u32) -> Option<f64> {
    (coarse > 0.0 && fine > 0.0 && level_gap > 0).then(|| (coarse / fine).log2() / level_gap as f64)
}

/// Fills the EOC columns between consecutive levels of each (scenario, m) group.
pub fn compute_eoc(record: &mut ConvergenceRecord) {
    let mut groups: BTreeMap<(String, usize), Vec<usize>> = BTreeMap::new();
    for (i, r) in record.rows.iter().enumerate() {
        groups.entry((r.scenario.clone(), r.m)).or_default().push(i);
    }
    for idx in groups.into_values() {
        let mut idx = idx;
        idx.sort_by_key(|&i| record.rows[i].coarse_level);
        let mut prev: Option<usize> = None;
        for &i in &idx {
            let row = &record.rows[i];
            let (h1, l2m, l2b) = match prev.map(|p| &record.rows[p]) {
                Some(p) if p.failure.is_none() && row.failure.is_none() => {
                    let gap = row.coarse_level - p.coarse_level;
                    (
                        eoc(p.errors.h1_lod, row.errors.h1_lod, gap),
                        eoc(p.errors.l2_macro, row.errors.l2_macro, gap),
                        eoc(p.errors.l2_bestapprox, row.errors.l2_bestapprox, gap),
                    )
                }
                _ => (None, None, None),
            };
            let row = &mut record.rows[i];
            row.eoc_h1_lod = h1;
            row.eoc_l2_macro = l2m;
            row.eoc_l2_bestapprox = l2b;
            prev = Some(i);
        }
    }
}

/// Column selector for [`mean_eoc`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EocColumn {
    H1Lod,
    L2Macro,
    L2BestApprox,
}

/// Mean of the defined EOCs of one column for a given `m`.
pub fn mean_eoc(record: &ConvergenceRecord, m: usize, column: EocColumn) -> Option<f64> {
    let vals: Vec<f64> = record
        .rows
        .iter()
        .filter(|r| r.m == m)
        .filter_map(|r| match column {
            EocColumn::H1Lod => r.eoc_h1_lod,
            EocColumn::L2Macro => r.eoc_l2_macro,
            EocColumn::L2BestApprox => r.eoc_l2_bestapprox,
        })
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

impl StudyRow {
    fn failed(scenario: &str, coarse_level: u32, m: usize, failure: String) -> Self {
        Self {
            scenario: scenario.to_string(),
            coarse_level,
            m,
            errors: ErrorRecord::default(),
            eoc_h1_lod: None,
            eoc_l2_macro: None,
            eoc_l2_bestapprox: None,
            assembly_s: 0.0,
            solve_s: 0.0,
            fallback_patches: 0,
            failure: Some(failure),
        }
    }
}

impl ConvergenceRecord {
    pub fn row(&self, level: u32, m: usize) -> Option<&StudyRow> {
        self.rows.iter().find(|r| r.coarse_level == level && r.m == m)
    }
}

/// Shared per-study data: the reference solution on the fine mesh when needed.
struct StudyContext<'a> {
    spec: &'a ProblemSpec,
    cfg: &'a StudyConfig,
    rule: QuadratureRule<f64>,
    error_rule: QuadratureRule<f64>,
    fine_reference: Option<Vec<f64>>,
}

impl StudyContext<'_> {
    fn reference(&self) -> Reference<'_, f64> {
        match (&self.fine_reference, &self.spec.exact) {
            (Some(u), _) => Reference::Fine(u),
            (None, Some(exact)) => Reference::Exact { solution: exact, rule: &self.error_rule, split: self.cfg.split },
            (None, None) => unreachable!("reference prepared in run_convergence_study"),
        }
    }

    fn level(&self, level: u32, out: &mut Vec<StudyRow>) -> Result<()> {
        let spec = self.spec;
        let cfg = self.cfg;
        let hier = Hierarchy::new(level, cfg.fine_level, cfg.pattern)?;
        let reference = self.reference();
        let baseline = fem_baseline(&hier.coarse, &spec.sigma, &spec.load, &self.rule, cfg.split)?;
        let best = best_approximation(&hier, &reference)?;
        let start = Instant::now();
        let fp = FineProblem::new(&hier, &spec.sigma, &self.rule, cfg.split)?;
        let setup_s = start.elapsed().as_secs_f64();
        for &m in &cfg.ms {
            let mut row = StudyRow::failed(&spec.name, level, m, String::new());
            row.failure = None;
            let cell = || -> Result<(ErrorRecord, f64, f64, usize)> {
                let start = Instant::now();
                let set = corrector_basis(&fp, m)?;
                let (s, rhs) = assemble_lod_system(&fp, &set, &spec.load, &self.rule, cfg.split)?;
                let assembly_s = setup_s + start.elapsed().as_secs_f64();
                let sol = solve_lod(&hier, &s, &rhs, &set)?;
                let errors = error_report(&hier, &sol, &baseline, &best, &reference, &spec.sigma);
                Ok((errors, assembly_s, sol.solve_s, set.fallback_count()))
            };
            match cell() {
                Ok((errors, a, s, fallbacks)) => {
                    row.errors = errors;
                    row.fallback_patches = fallbacks;
                    if !cfg.zero_timings {
                        row.assembly_s = a;
                        row.solve_s = s;
                    }
                }
                Err(e) => {
                    log::error!("{} level {level} m {m}: {e}", spec.name);
                    row.failure = Some(e.to_string());
                }
            }
            log::info!(
                "{} H=2^-{level} m={m}: h1_lod={:.3e} l2_macro={:.3e} l2_fem={:.3e}",
                spec.name,
                row.errors.h1_lod,
                row.errors.l2_macro,
                row.errors.l2_fem
            );
            out.push(row);
        }
        Ok(())
    }
}

/// Runs every (coarse level, m) cell, fills EOCs and writes outputs when an output
/// directory is configured. Failing cells are recorded and the study continues.
pub fn run_convergence_study(spec: &ProblemSpec, cfg: &StudyConfig) -> Result<ConvergenceRecord> {
    cfg.validate()?;
    let rule = QuadratureRule::with_degree(cfg.assembly_degree);
    let fine_reference = match (spec.reference, &spec.exact) {
        (ReferencePolicy::Exact, Some(_)) => None,
        _ => {
            let fine = crate::mesh::Triangulation::block(cfg.fine_level, cfg.pattern)?;
            Some(fem_baseline(&fine, &spec.sigma, &spec.load, &rule, cfg.split)?)
        }
    };
    let ctx = StudyContext {
        spec,
        cfg,
        rule,
        error_rule: QuadratureRule::with_degree(cfg.error_degree),
        fine_reference,
    };
    let mut levels = cfg.coarse_levels.clone();
    levels.sort_unstable();
    levels.dedup();
    let run_level = |level: u32| {
        let mut rows = Vec::new();
        if let Err(e) = ctx.level(level, &mut rows) {
            log::error!("{} level {level}: {e}", spec.name);
            for &m in &cfg.ms[rows.len()..] {
                rows.push(StudyRow::failed(&spec.name, level, m, e.to_string()));
            }
        }
        rows
    };
    let per_level: Vec<Vec<StudyRow>> = if cfg.parallel_cells {
        levels.par_iter().map(|&l| run_level(l)).collect()
    } else {
        levels.iter().map(|&l| run_level(l)).collect()
    };
    let mut record = ConvergenceRecord { rows: per_level.concat(), ..Default::default() };
    compute_eoc(&mut record);
    if let Some((level, element)) = cfg.decay {
        let hier = Hierarchy::new(level, cfg.fine_level, cfg.pattern)?;
        let fp = FineProblem::new(&hier, &spec.sigma, &ctx.rule, cfg.split)?;
        let v_h = hier.coarse.vertices().iter().map(|p| p[0] + p[1]).collect::<Vec<_>>();
        record.decay = Some(decay_profile(&fp, element, &v_h, cfg.decay_m_max)?);
    }
    if let Some(samples) = cfg.probe_samples {
        record.probe = Some(probe_for(spec, cfg, samples)?);
    }
    if let Some(dir) = &cfg.output_dir {
        write_outputs(dir, spec, cfg, &record)?;
    }
    Ok(record)
}

/// Coercivity probe on coarse level 3 / fine level 5. The flat scenario's interface is
/// not a coarse gridline there, so the probe uses the interface x₂ = 0.5 with the
/// scenario's contrast.
fn probe_for(spec: &ProblemSpec, cfg: &StudyConfig, samples: usize) -> Result<CoercivityReport> {
    let b = spec.sigma.bounds;
    let geom = InterfaceGeometry::flat(0.5)?;
    let sigma = Coefficient::piecewise_constant(geom.clone(), b.sigma_plus, b.sigma_minus);
    let hier = Hierarchy::new(3, 5, cfg.pattern)?;
    let fp = FineProblem::new(&hier, &sigma, &QuadratureRule::with_degree(2), false)?;
    let (_, duals) = build_discrete_duals(&fp.op, &geom)?;
    coercivity_probe(&fp, &sigma, &duals, samples, cfg.seed)
}

/// Element-wise means `(1/|K|)∫_K σ` over a coarse mesh.
pub fn element_means(spec: &ProblemSpec, level: u32, cfg: &StudyConfig) -> Result<Vec<f64>> {
    let mesh = crate::mesh::Triangulation::block(level, cfg.pattern)?;
    let ints = sigma_integrals(&mesh, &spec.sigma, &QuadratureRule::with_degree(cfg.assembly_degree), cfg.split);
    Ok(ints.iter().enumerate().map(|(k, s)| s / mesh.area(k)).collect())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub const CSV_HEADER: [&str; 12] = [
    "scenario",
    "coarse_level",
    "m",
    "h1_lod",
    "l2_macro",
    "l2_fem",
    "l2_bestapprox",
    "eoc_h1_lod",
    "eoc_l2_macro",
    "eoc_l2_bestapprox",
    "assembly_s",
    "solve_s",
];

pub fn write_csv<W: std::io::Write>(out: W, record: &ConvergenceRecord) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &record.rows {
        let e = &r.errors;
        let num = |x: f64| if r.failure.is_some() { String::new() } else { x.to_string() };
        w.write_record([
            r.scenario.clone(),
            r.coarse_level.to_string(),
            r.m.to_string(),
            num(e.h1_lod),
            num(e.l2_macro),
            num(e.l2_fem),
            num(e.l2_bestapprox),
            fmt_opt(r.eoc_h1_lod),
            fmt_opt(r.eoc_l2_macro),
            fmt_opt(r.eoc_l2_bestapprox),
            r.assembly_s.to_string(),
            r.solve_s.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Sidecar<'a> {
    scenario: &'a str,
    version: &'static str,
    pattern: String,
    assembly_degree: usize,
    error_degree: usize,
    reference: ReferencePolicy,
    config: &'a StudyConfig,
    probe: Option<&'a CoercivityReport>,
    failures: Vec<(u32, usize, &'a str)>,
}

fn write_outputs(dir: &Path, spec: &ProblemSpec, cfg: &StudyConfig, record: &ConvergenceRecord) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(fs::File::create(dir.join(format!("{}.csv", spec.name)))?, record)?;
    let sidecar = Sidecar {
        scenario: &spec.name,
        version: env!("CARGO_PKG_VERSION"),
        pattern: cfg.pattern.to_string(),
        assembly_degree: cfg.assembly_degree,
        error_degree: cfg.error_degree,
        reference: spec.reference,
        config: cfg,
        probe: record.probe.as_ref(),
        failures: record
            .rows
            .iter()
            .filter_map(|r| r.failure.as_deref().map(|f| (r.coarse_level, r.m, f)))
            .collect(),
    };
    fs::write(dir.join(format!("{}.json", spec.name)), serde_json::to_string_pretty(&sidecar)?)?;
    // plot data: one file per m with all error columns against H
    for &m in &cfg.ms {
        let mut text = String::from("# H h1_lod l2_macro l2_fem l2_bestapprox\n");
        for r in record.rows.iter().filter(|r| r.m == m && r.failure.is_none()) {
            let e = &r.errors;
            text.push_str(&format!(
                "{} {:e} {:e} {:e} {:e}\n",
                0.5f64.powi(r.coarse_level as i32),
                e.h1_lod,
                e.l2_macro,
                e.l2_fem,
                e.l2_bestapprox
            ));
        }
        fs::write(dir.join(format!("{}_m{m}.dat", spec.name)), text)?;
    }
    if let Some(d) = &record.decay {
        d.write_csv(fs::File::create(dir.join(format!("{}_decay.csv", spec.name)))?, true)?;
    }
    if let Some(p) = &record.probe {
        fs::write(dir.join(format!("{}_probe.json", spec.name)), serde_json::to_string_pretty(p)?)?;
    }
    Ok(())
}
