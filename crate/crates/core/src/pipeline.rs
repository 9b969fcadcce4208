//! End-to-end analysis: hypothesis checks, morsification, sphere critical
//! points, fibre filtering, handle counting and the optional mesh oracle.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fibre::{self, CircleConfig, FibreError, GreatCircleVerdict, MilnorData, Sign};
use crate::homology::{self, Caveat, HandleDecomposition, HomologyError, HomologyReport};
use crate::morsify::{
    self, MorseValidationReport, Morsification, MorsifyError, PerturbationParams,
};
use crate::oracle::{self, CompareVerdict, MeshComplex, OracleError};
use crate::poly::{ratio_to_f64, PolyError, Polynomial};
use crate::sphcrit::{self, CriticalPoint, SolverConfig, SphCritError};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignChoice {
    Positive,
    Negative,
    Both,
}

impl SignChoice {
    pub fn signs(self) -> Vec<Sign> {
        match self {
            SignChoice::Positive => vec![Sign::Positive],
            SignChoice::Negative => vec![Sign::Negative],
            SignChoice::Both => vec![Sign::Positive, Sign::Negative],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub polynomial: String,
    pub variables: Vec<String>,
    pub delta: f64,
    /// `None` selects epsilon automatically.
    pub epsilon: Option<f64>,
    /// `None` samples a perturbation from `seed`.
    pub t: Option<Vec<f64>>,
    pub sign: SignChoice,
    pub seed: u64,
    /// Overrides the default multi-start count.
    pub num_starts: Option<usize>,
    pub max_attempts: usize,
    /// Overrides the default initial perturbation magnitude.
    pub magnitude: Option<f64>,
    pub oracle: bool,
    /// Overrides the default mesh resolution.
    pub resolution: Option<f64>,
}

impl AnalysisConfig {
    pub fn new(polynomial: &str, variables: &[&str]) -> Self {
        AnalysisConfig {
            polynomial: polynomial.to_string(),
            variables: variables.iter().map(|v| v.to_string()).collect(),
            delta: 1.0,
            epsilon: None,
            t: None,
            sign: SignChoice::Positive,
            seed: 0,
            num_starts: None,
            max_attempts: 16,
            magnitude: None,
            oracle: false,
            resolution: None,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if let Some(e) = self.epsilon {
            if !(e.is_finite() && e > 0.0) {
                return bad(format!("epsilon must be positive, got {e}"));
            }
        }
        if let Some(t) = &self.t {
            if t.len() != self.variables.len() {
                return bad(format!(
                    "t has {} entries for {} variables",
                    t.len(),
                    self.variables.len()
                ));
            }
            if t.iter().any(|x| !x.is_finite()) {
                return bad("t must be finite".into());
            }
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1".into());
        }
        if self.num_starts == Some(0) {
            return bad("num_starts must be positive".into());
        }
        if let Some(r) = self.resolution {
            if !(r.is_finite() && r > 0.0) {
                return bad(format!("resolution must be positive, got {r}"));
            }
        }
        Ok(())
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::for_problem(self.variables.len(), self.delta);
        if let Some(n) = self.num_starts {
            cfg.num_starts = n;
        }
        cfg.seed = self.seed;
        cfg
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Parse(#[from] PolyError),
    #[error("the origin is not on the zero locus: f(0) = {0}")]
    OriginNotOnZeroLocus(f64),
    #[error("no zero of f was found near the origin: the zero locus is not of positive dimension")]
    ZeroLocusEmpty,
    #[error(transparent)]
    Morsify(#[from] MorsifyError),
    #[error(transparent)]
    Epsilon(FibreError),
    #[error(transparent)]
    Solver(#[from] SphCritError),
    #[error(transparent)]
    Homology(#[from] HomologyError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Results of the heuristic checks on the germ itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisChecks {
    /// A point of `{f = 0}` near the origin, away from it.
    pub zero_locus_witness: Vec<f64>,
    /// A singular point of `{f = 0}` off the origin, if one was found.
    pub off_origin_singular_point: Option<Vec<f64>>,
    pub delta_check: fibre::RadiusVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSection {
    pub level: f64,
    pub resolution: f64,
    pub vertices: usize,
    pub cells: usize,
    pub boundary_vertices: usize,
    pub homology: HomologyReport,
    pub verdict: CompareVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FibreReport {
    pub sign: Sign,
    /// The function whose positive fibre is analysed (`f` or `-f`).
    pub function: String,
    pub perturbed: String,
    /// Absent when the positive fibre is empty.
    pub milnor: Option<MilnorData>,
    pub validation: MorseValidationReport,
    pub morsify_attempts: usize,
    /// Every critical point of `f_t` on the sphere, ascending by value.
    pub critical_points: Vec<CriticalPoint>,
    pub search_exhaustive: bool,
    /// Critical points with value above epsilon.
    pub fibre_points: Vec<CriticalPoint>,
    pub great_circle: Option<GreatCircleVerdict>,
    pub handles: Option<HandleDecomposition>,
    pub homology: HomologyReport,
    pub oracle: Option<OracleSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: AnalysisConfig,
    pub hypotheses: HypothesisChecks,
    pub fibres: Vec<FibreReport>,
    /// 0 when no hypothesis caveat was raised, 2 otherwise.
    pub exit_code: i32,
    /// Wall-clock seconds per stage. Not part of the deterministic output.
    pub timings: BTreeMap<String, f64>,
}

/// Envelope plus the meshes built by the oracle (for export).
#[derive(Debug, Clone)]
pub struct Analysis {
    pub envelope: ReportEnvelope,
    pub meshes: Vec<(Sign, MeshComplex)>,
}

struct Timer<'a> {
    timings: &'a mut BTreeMap<String, f64>,
}

impl Timer<'_> {
    fn time<T>(&mut self, key: String, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *self.timings.entry(key).or_insert(0.0) += start.elapsed().as_secs_f64();
        out
    }
}

/// Heuristic checks that the origin is an isolated singular point of a
/// zero locus of positive dimension.
pub fn check_hypotheses(
    f: &Polynomial,
    delta: f64,
    cfg: &SolverConfig,
) -> Result<HypothesisChecks, PipelineError> {
    let f0 = f
        .terms()
        .get(&vec![0u32; f.nvars()])
        .map_or(0.0, ratio_to_f64);
    if f0 != 0.0 {
        return Err(PipelineError::OriginNotOnZeroLocus(f0));
    }
    let witness = match fibre::find_zero_locus_point(f, delta, cfg.seed) {
        Some(w) => w,
        // f may touch zero without changing sign; such zeros are extrema on spheres
        None => tangential_zero(f, delta, cfg)?.ok_or(PipelineError::ZeroLocusEmpty)?,
    };
    Ok(HypothesisChecks {
        zero_locus_witness: witness,
        off_origin_singular_point: fibre::find_off_origin_singular_point(f, delta, cfg),
        delta_check: fibre::check_milnor_radius(f, delta, cfg),
    })
}

fn tangential_zero(
    f: &Polynomial,
    delta: f64,
    cfg: &SolverConfig,
) -> Result<Option<Vec<f64>>, PipelineError> {
    let tol = 1e-9 * (1.0 + f.coefficient_scale());
    for r in [delta, 0.5 * delta] {
        let search = sphcrit::find_critical_points(f, r, cfg)?;
        if let Some(p) = search.points.into_iter().find(|p| p.value.abs() <= tol) {
            return Ok(Some(p.location));
        }
    }
    Ok(None)
}

fn perturb(
    g: &Polynomial,
    config: &AnalysisConfig,
    cfg: &SolverConfig,
) -> Result<Morsification, PipelineError> {
    match &config.t {
        Some(t) => {
            let params = PerturbationParams {
                t: t.clone(),
                magnitude: t.iter().map(|x| x * x).sum::<f64>().sqrt(),
                seed: config.seed,
                explicit: true,
            };
            Ok(morsify::evaluate_perturbation(
                g,
                params,
                config.delta,
                cfg,
                1,
            )?)
        }
        None => {
            let magnitude = config
                .magnitude
                .unwrap_or_else(|| morsify::default_magnitude(g, config.delta));
            Ok(morsify::morsify(
                g,
                config.delta,
                config.seed,
                config.max_attempts,
                magnitude,
                cfg,
            )?)
        }
    }
}

fn analyze_sign(
    f: &Polynomial,
    sign: Sign,
    config: &AnalysisConfig,
    hypotheses: &HypothesisChecks,
    timer: &mut Timer,
) -> Result<(FibreReport, Option<MeshComplex>), PipelineError> {
    let tag = match sign {
        Sign::Positive => "positive",
        Sign::Negative => "negative",
    };
    let g = match sign {
        Sign::Positive => f.clone(),
        Sign::Negative => f.neg(),
    };
    let cfg = config.solver_config();
    let m = timer.time(format!("{tag}.morsify"), || perturb(&g, config, &cfg))?;

    let mut caveats = Vec::new();
    if !m.search.exhaustive {
        caveats.push(Caveat::CompletenessHeuristic);
    }
    if !hypotheses.delta_check.passed() {
        caveats.push(Caveat::MilnorRadiusCheckFailed);
    }
    if hypotheses.off_origin_singular_point.is_some() {
        caveats.push(Caveat::NonIsolatedSingularity);
    }

    let ambient_values: Vec<f64> = m.ambient.iter().map(|a| a.value).collect();
    let selected = match (&m.epsilon, config.epsilon) {
        (Err(FibreError::EmptyPositiveFibre), _) => None,
        (Err(e @ FibreError::BandEmpty { .. }), None) => {
            return Err(PipelineError::Epsilon(e.clone()))
        }
        (Err(FibreError::BandEmpty { lower, upper }), Some(eps)) => Some((
            eps,
            fibre::EpsilonBracket {
                lower: *lower,
                upper: *upper,
                ambient_values: ambient_values.clone(),
                rule: "explicit".into(),
            },
        )),
        (Ok((auto, bracket)), explicit) => {
            let mut bracket = bracket.clone();
            if explicit.is_some() {
                bracket.rule = "explicit".into();
            }
            Some((explicit.unwrap_or(*auto), bracket))
        }
    };

    let mut validation = m.report.clone();
    if let Some((eps, bracket)) = &selected {
        validation = morsify::validate_morse(&m.search.points, &ambient_values, Some(*eps));
        validation.seed = m.report.seed;
        validation.attempt = m.report.attempt;
        if *eps >= bracket.upper {
            validation.values_in_band = false;
        }
    }
    if !validation.passed() {
        caveats.push(Caveat::MorseValidationFailed);
    }

    let base = FibreReport {
        sign,
        function: g.to_string(),
        perturbed: m.f_t.to_string(),
        milnor: None,
        validation,
        morsify_attempts: m.attempts,
        critical_points: m.search.points.clone(),
        search_exhaustive: m.search.exhaustive,
        fibre_points: Vec::new(),
        great_circle: None,
        handles: None,
        homology: HomologyReport {
            ranks: BTreeMap::new(),
            torsion: Vec::new(),
            euler_rel: 0,
            caveats: Vec::new(),
            extrapolated_degrees: Vec::new(),
        },
        oracle: None,
    };

    let Some((epsilon, bracket)) = selected else {
        let mut report = base;
        caveats.push(Caveat::EmptyPositiveFibre);
        for c in caveats {
            report.homology.add_caveat(c);
        }
        return Ok((report, None));
    };

    let fibre_points = fibre::filter_fibre(&m.search.points, epsilon, Sign::Positive);
    let circle_cfg = CircleConfig {
        seed: config.seed,
        ..CircleConfig::default()
    };
    let circle = timer.time(format!("{tag}.great_circle"), || {
        fibre::great_circle_check(&m.f_t, config.delta, epsilon, &circle_cfg)
    });
    if circle.violated() {
        caveats.push(Caveat::GreatCircleViolation);
    }
    let handles = homology::handle_decomposition(&fibre_points)?;
    let mut homology = homology::relative_homology(&handles);

    let mut mesh = None;
    let mut oracle_section = None;
    let nvars = g.nvars();
    if config.oracle && (2..=3).contains(&nvars) {
        let level = match config.epsilon {
            Some(eps) => eps,
            None => oracle::choose_mesh_level(bracket.lower, bracket.upper),
        };
        let resolution = config
            .resolution
            .unwrap_or_else(|| oracle::default_resolution(nvars, config.delta));
        let (mc, mesh_h) = timer.time(format!("{tag}.oracle"), || -> Result<_, OracleError> {
            let mc = oracle::extract_fibre_adaptive(&m.f_t, level, config.delta, resolution)?;
            let h = oracle::relative_homology_mesh(&mc)?;
            Ok((mc, h))
        })?;
        let verdict = oracle::compare(&homology, &mesh_h);
        if !verdict.agree {
            caveats.push(Caveat::OracleDisagrees);
        }
        oracle_section = Some(OracleSection {
            level,
            resolution: mc.resolution,
            vertices: mc.vertices.len(),
            cells: mc.cells.len(),
            boundary_vertices: mc.boundary_vertices.len(),
            homology: mesh_h,
            verdict,
        });
        mesh = Some(mc);
    } else if config.oracle {
        caveats.push(Caveat::OracleUnavailable);
    }
    for c in caveats {
        homology.add_caveat(c);
    }

    let milnor = MilnorData {
        delta: config.delta,
        epsilon,
        t: m.params.clone(),
        delta_check: hypotheses.delta_check.clone(),
        epsilon_rationale: bracket,
        epsilon_selected_after_perturbation: config.epsilon.is_none(),
    };
    let report = FibreReport {
        milnor: Some(milnor),
        fibre_points,
        great_circle: Some(circle),
        handles: Some(handles),
        homology,
        oracle: oracle_section,
        ..base
    };
    Ok((report, mesh))
}

/// Runs the whole pipeline for every requested sign.
pub fn analyze(config: &AnalysisConfig) -> Result<Analysis, PipelineError> {
    config.validate()?;
    let mut timings = BTreeMap::new();
    let mut timer = Timer {
        timings: &mut timings,
    };
    let vars: Vec<String> = config.variables.clone();
    let f = Polynomial::parse(&config.polynomial, &vars)?;
    let cfg = config.solver_config();
    cfg.validate()?;
    let hypotheses = timer.time("hypotheses".into(), || {
        check_hypotheses(&f, config.delta, &cfg)
    })?;
    let mut fibres = Vec::new();
    let mut meshes = Vec::new();
    for sign in config.sign.signs() {
        let (report, mesh) = analyze_sign(&f, sign, config, &hypotheses, &mut timer)?;
        fibres.push(report);
        if let Some(mc) = mesh {
            meshes.push((sign, mc));
        }
    }
    let exit_code = exit_code_for(&fibres);
    Ok(Analysis {
        envelope: ReportEnvelope {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            config: config.clone(),
            hypotheses,
            fibres,
            exit_code,
            timings,
        },
        meshes,
    })
}

pub fn exit_code_for(fibres: &[FibreReport]) -> i32 {
    let caveat = fibres
        .iter()
        .flat_map(|r| &r.homology.caveats)
        .any(|c| c.is_hypothesis_caveat());
    if caveat {
        2
    } else {
        0
    }
}
