//! Merit rules of the assessment exercise: classification matrices that turn
//! a (citation class, journal class) pair into a grade, the grade scores,
//! special-case scores and penalties. Rule sets are loaded from JSON, one per
//! disciplinary area.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmark::{class_of, Axis, BenchmarkError, Benchmarks, PercentileClass};
use crate::corpus::{Publication, PublicationId, ResearcherId};

/// Chemistry matrices, the reference rule set shipped with the crate.
pub const CHEMISTRY_RULES: &str = include_str!("../rules/chemistry.json");

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("no classification matrix covers year {0}")]
    UncoveredYear(i32),
    #[error("invalid rule set: {0}")]
    Invalid(String),
    #[error("rule set JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MeritOutcome {
    A,
    B,
    C,
    D,
    /// Routed to informed peer review; resolved to a fixed score.
    IR,
}

impl fmt::Display for MeritOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MatrixFile", into = "MatrixFile")]
pub struct ClassificationMatrix {
    /// Inclusive publication-year range.
    pub years: (i32, i32),
    /// `cells[ic - 1][ir - 1]`.
    pub cells: [[MeritOutcome; 4]; 4],
}

impl ClassificationMatrix {
    pub fn uniform(years: (i32, i32), outcome: MeritOutcome) -> Self {
        Self {
            years,
            cells: [[outcome; 4]; 4],
        }
    }

    pub fn covers(&self, year: i32) -> bool {
        self.years.0 <= year && year <= self.years.1
    }

    pub fn cell(&self, ic: PercentileClass, ir: PercentileClass) -> MeritOutcome {
        self.cells[ic.index()][ir.index()]
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    years: (i32, i32),
    /// Keys are `"<I_C class>,<I_R class>"`.
    cells: BTreeMap<String, MeritOutcome>,
}

impl TryFrom<MatrixFile> for ClassificationMatrix {
    type Error = String;

    fn try_from(file: MatrixFile) -> Result<Self, String> {
        if file.years.0 > file.years.1 {
            return Err(format!("empty year range {:?}", file.years));
        }
        let mut cells = [[None; 4]; 4];
        for (key, outcome) in &file.cells {
            let (ic, ir) = key
                .split_once(',')
                .and_then(|(a, b)| Some((a.trim().parse::<u8>().ok()?, b.trim().parse::<u8>().ok()?)))
                .filter(|(a, b)| (1..=4).contains(a) && (1..=4).contains(b))
                .ok_or_else(|| format!("bad cell key {key:?}"))?;
            cells[ic as usize - 1][ir as usize - 1] = Some(*outcome);
        }
        let mut out = [[MeritOutcome::D; 4]; 4];
        for ic in 0..4 {
            for ir in 0..4 {
                out[ic][ir] = cells[ic][ir].ok_or_else(|| format!("missing cell \"{},{}\"", ic + 1, ir + 1))?;
            }
        }
        Ok(Self {
            years: file.years,
            cells: out,
        })
    }
}

impl From<ClassificationMatrix> for MatrixFile {
    fn from(m: ClassificationMatrix) -> Self {
        let mut cells = BTreeMap::new();
        for ic in 0..4 {
            for ir in 0..4 {
                cells.insert(format!("{},{}", ic + 1, ir + 1), m.cells[ic][ir]);
            }
        }
        Self { years: m.years, cells }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeritScores {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

impl Default for MeritScores {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 0.8,
            c: 0.5,
            d: 0.0,
        }
    }
}

/// How a shortfall in submitted products is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingMode {
    /// Missing products count zero; the ratio denominator still includes them.
    #[default]
    Zero,
    /// Missing products carry `penalty_missing`.
    Penalty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyEvent {
    MissingProduct,
    Inadmissible,
    Fraud,
}

fn default_ir_score() -> f64 {
    0.5
}
fn default_unindexed_score() -> f64 {
    0.25
}
fn default_penalty_missing() -> f64 {
    -0.5
}
fn default_penalty_inadmissible() -> f64 {
    -1.0
}
fn default_penalty_fraud() -> f64 {
    -2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RuleSetFile")]
pub struct RuleSet {
    pub uda: String,
    pub matrices: Vec<ClassificationMatrix>,
    pub merit_scores: MeritScores,
    pub ir_score: f64,
    /// Score of products without a journal metric or outside the index.
    pub unindexed_score: f64,
    pub penalty_missing: f64,
    pub penalty_inadmissible: f64,
    pub penalty_fraud: f64,
    pub missing_mode: MissingMode,
}

#[derive(Deserialize)]
struct RuleSetFile {
    uda: String,
    matrices: Vec<ClassificationMatrix>,
    #[serde(default)]
    merit_scores: MeritScores,
    #[serde(default = "default_ir_score")]
    ir_score: f64,
    #[serde(default = "default_unindexed_score")]
    unindexed_score: f64,
    #[serde(default = "default_penalty_missing")]
    penalty_missing: f64,
    #[serde(default = "default_penalty_inadmissible")]
    penalty_inadmissible: f64,
    #[serde(default = "default_penalty_fraud")]
    penalty_fraud: f64,
    #[serde(default)]
    missing_mode: MissingMode,
}

impl TryFrom<RuleSetFile> for RuleSet {
    type Error = String;

    fn try_from(f: RuleSetFile) -> Result<Self, String> {
        let rs = RuleSet {
            uda: f.uda,
            matrices: f.matrices,
            merit_scores: f.merit_scores,
            ir_score: f.ir_score,
            unindexed_score: f.unindexed_score,
            penalty_missing: f.penalty_missing,
            penalty_inadmissible: f.penalty_inadmissible,
            penalty_fraud: f.penalty_fraud,
            missing_mode: f.missing_mode,
        };
        rs.validate().map_err(|e| e.to_string())?;
        Ok(rs)
    }
}

impl RuleSet {
    /// Rule set with the exercise's default constants and the given matrices.
    pub fn with_matrices(uda: impl Into<String>, matrices: Vec<ClassificationMatrix>) -> Self {
        Self {
            uda: uda.into(),
            matrices,
            merit_scores: MeritScores::default(),
            ir_score: default_ir_score(),
            unindexed_score: default_unindexed_score(),
            penalty_missing: default_penalty_missing(),
            penalty_inadmissible: default_penalty_inadmissible(),
            penalty_fraud: default_penalty_fraud(),
            missing_mode: MissingMode::Zero,
        }
    }

    /// The shipped Chemistry rule set (two matrices, 2004-2008 and 2009-2010).
    pub fn chemistry() -> Self {
        Self::from_json(CHEMISTRY_RULES).expect("shipped chemistry rules are valid")
    }

    pub fn from_json(json: &str) -> Result<Self, RuleError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RuleError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| RuleError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), RuleError> {
        let m = &self.merit_scores;
        let finite = [m.a, m.b, m.c, m.d, self.ir_score, self.unindexed_score]
            .iter()
            .chain([self.penalty_missing, self.penalty_inadmissible, self.penalty_fraud].iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(RuleError::Invalid("non-finite score".into()));
        }
        if !(m.a > m.b && m.b > m.c && m.c > m.d) {
            return Err(RuleError::Invalid(format!(
                "merit scores must decrease strictly A > B > C > D, got {} {} {} {}",
                m.a, m.b, m.c, m.d
            )));
        }
        if !(0.0..=1.0).contains(&m.a) || !(0.0..=1.0).contains(&m.d) {
            return Err(RuleError::Invalid("merit scores must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.ir_score) {
            return Err(RuleError::Invalid(format!("ir_score {} outside [0, 1]", self.ir_score)));
        }
        if !(0.0..=1.0).contains(&self.unindexed_score) {
            return Err(RuleError::Invalid(format!(
                "unindexed_score {} outside [0, 1]",
                self.unindexed_score
            )));
        }
        if self.matrices.is_empty() {
            return Err(RuleError::Invalid(format!("rule set {} has no matrices", self.uda)));
        }
        let mut ranges: Vec<_> = self.matrices.iter().map(|m| m.years).collect();
        ranges.sort();
        for w in ranges.windows(2) {
            if w[1].0 <= w[0].1 {
                return Err(RuleError::Invalid(format!(
                    "overlapping matrix periods {:?} and {:?}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }

    /// Checks that the matrix periods partition `window` exactly.
    pub fn validate_window(&self, window: (i32, i32)) -> Result<(), RuleError> {
        let mut ranges: Vec<_> = self.matrices.iter().map(|m| m.years).collect();
        ranges.sort();
        let mut next = window.0;
        for (lo, hi) in ranges {
            if lo != next {
                return Err(RuleError::Invalid(format!(
                    "rule set {}: periods do not partition {}..={} (gap or overhang at {})",
                    self.uda,
                    window.0,
                    window.1,
                    next.min(lo)
                )));
            }
            next = hi + 1;
        }
        if next != window.1 + 1 {
            return Err(RuleError::Invalid(format!(
                "rule set {}: periods end at {} but window ends at {}",
                self.uda,
                next - 1,
                window.1
            )));
        }
        Ok(())
    }

    pub fn matrix_for(&self, year: i32) -> Result<&ClassificationMatrix, RuleError> {
        self.matrices
            .iter()
            .find(|m| m.covers(year))
            .ok_or(RuleError::UncoveredYear(year))
    }

    /// Score of a resolved outcome.
    pub fn outcome_score(&self, outcome: MeritOutcome) -> f64 {
        match outcome {
            MeritOutcome::A => self.merit_scores.a,
            MeritOutcome::B => self.merit_scores.b,
            MeritOutcome::C => self.merit_scores.c,
            MeritOutcome::D => self.merit_scores.d,
            MeritOutcome::IR => self.ir_score,
        }
    }
}

pub fn classify(
    ruleset: &RuleSet,
    ic_class: PercentileClass,
    ir_class: PercentileClass,
    year: i32,
) -> Result<MeritOutcome, RuleError> {
    Ok(ruleset.matrix_for(year)?.cell(ic_class, ir_class))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductRoute {
    Graded(MeritOutcome),
    /// No journal metric or not in the index: special-case score.
    Unindexed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductScore {
    pub route: ProductRoute,
    pub score: f64,
}

/// Scores one publication under `ruleset`.
///
/// Indexed publications with a journal metric get a citation class and a
/// journal class from their reference distributions; the matrix for the
/// publication year combines them.
pub fn score_publication(
    ruleset: &RuleSet,
    publication: &Publication,
    benchmarks: &Benchmarks,
) -> Result<ProductScore, RuleError> {
    let metric = match (publication.indexed, publication.journal_metric) {
        (true, Some(m)) => m,
        _ => {
            return Ok(ProductScore {
                route: ProductRoute::Unindexed,
                score: ruleset.unindexed_score,
            })
        }
    };
    let matrix = ruleset.matrix_for(publication.year)?;
    let cites = benchmarks.citation_distribution(publication, Some(&ruleset.uda))?;
    let ic = class_of(cites.percentile(publication.citations as f64, Axis::Citations)?)?;
    let journals = benchmarks.metric_distribution(publication)?;
    let ir = class_of(journals.percentile(metric, Axis::Metric)?)?;
    let outcome = matrix.cell(ic, ir);
    Ok(ProductScore {
        route: ProductRoute::Graded(outcome),
        score: ruleset.outcome_score(outcome),
    })
}

pub fn penalty_for(ruleset: &RuleSet, event: PenaltyEvent) -> f64 {
    match event {
        PenaltyEvent::MissingProduct => match ruleset.missing_mode {
            MissingMode::Zero => 0.0,
            MissingMode::Penalty => ruleset.penalty_missing,
        },
        PenaltyEvent::Inadmissible => ruleset.penalty_inadmissible,
        PenaltyEvent::Fraud => ruleset.penalty_fraud,
    }
}

/// Both scores of one (researcher, publication) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredProduct {
    pub publication_id: PublicationId,
    pub researcher_id: ResearcherId,
    pub vqr_route: ProductRoute,
    pub vqr_score: f64,
    pub faii_score: f64,
}
