//! The three-scenario experiment: configuration, evaluation, and report
//! files. The command-line front end is a thin layer over this module.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmark::{BenchmarkConfig, Benchmarks};
use crate::corpus::{load_corpus, write_corpus, Corpus, CorpusPaths, PublicationId, ResearcherId, UniversityId};
use crate::crediting::{credit_vector, CreditMode, CreditPolicy};
use crate::indicators::{FaiiConfig, FaiiSettings, IndicatorError, Productivity, Scope};
use crate::ranking::{build_ranking, compare, ComparisonReport, RankingError, RankingList, Scenario};
use crate::rules::{penalty_for, score_publication, MissingMode, PenaltyEvent, ProductScore, RuleSet, ScoredProduct};
use crate::selection::{build_problem, solve_exact, SelectionResult, WeightKind};
use crate::synth::{generate, SynthSpec};

/// Rule-set reference resolving to the shipped chemistry file.
pub const BUILTIN_CHEMISTRY: &str = "builtin:chemistry";
/// Rules key matching every area without an entry of its own.
pub const ANY_UDA: &str = "*";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn at<E: std::error::Error + Send + Sync + 'static>(stage: &'static str) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        source: Box::new(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Minimum research staff for a university to be ranked in an area.
    #[serde(default = "default_uda_threshold")]
    pub uda: u32,
    /// Minimum research staff for the overall ranking.
    #[serde(default = "default_overall_threshold")]
    pub overall: u32,
}

fn default_uda_threshold() -> u32 {
    10
}

fn default_overall_threshold() -> u32 {
    30
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            uda: default_uda_threshold(),
            overall: default_overall_threshold(),
        }
    }
}

fn default_window() -> (i32, i32) {
    (2004, 2010)
}

fn default_rules() -> BTreeMap<String, String> {
    [(ANY_UDA.to_owned(), BUILTIN_CHEMISTRY.to_owned())].into()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_substitution_years() -> BTreeSet<i32> {
    FaiiSettings::default().substitution_years
}

/// JSON run configuration. Relative paths are resolved against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding the four corpus tables under their usual names.
    #[serde(default)]
    pub corpus_dir: Option<PathBuf>,
    /// Explicit table paths; overrides `corpus_dir`.
    #[serde(default)]
    pub corpus: Option<CorpusPaths>,
    #[serde(default = "default_window")]
    pub window: (i32, i32),
    /// Area code (or `*`) to a rule-set file or `builtin:chemistry`.
    #[serde(default = "default_rules")]
    pub rules: BTreeMap<String, String>,
    #[serde(default)]
    pub benchmarks: BenchmarkConfig,
    #[serde(default)]
    pub credit_policy: CreditPolicy,
    #[serde(default = "default_substitution_years")]
    pub faii_substitution_years: BTreeSet<i32>,
    /// Overrides the missing-product mode of every rule set.
    #[serde(default)]
    pub missing_mode: Option<MissingMode>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Also write the chosen submission sets.
    #[serde(default)]
    pub write_selections: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl RunConfig {
    /// Reads a config file and resolves its relative paths.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    /// Joins every relative path onto `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(d) = &mut self.corpus_dir {
            join(d);
        }
        if let Some(c) = &mut self.corpus {
            join(&mut c.universities);
            join(&mut c.researchers);
            join(&mut c.publications);
            join(&mut c.authorships);
        }
        for v in self.rules.values_mut() {
            if v != BUILTIN_CHEMISTRY && Path::new(v.as_str()).is_relative() {
                *v = base.join(v.as_str()).display().to_string();
            }
        }
        join(&mut self.output_dir);
    }

    pub fn corpus_paths(&self) -> Result<CorpusPaths, PipelineError> {
        match (&self.corpus, &self.corpus_dir) {
            (Some(paths), _) => Ok(paths.clone()),
            (None, Some(dir)) => Ok(CorpusPaths::in_dir(dir)),
            (None, None) => Err(PipelineError::Config("neither corpus nor corpus_dir is set".into())),
        }
    }

    /// Checks that every referenced file exists.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let paths = self.corpus_paths()?;
        for p in [
            &paths.universities,
            &paths.researchers,
            &paths.publications,
            &paths.authorships,
        ]
        .map(PathBuf::as_path)
        .into_iter()
        .chain(
            self.rules
                .values()
                .filter(|v| *v != BUILTIN_CHEMISTRY)
                .map(|v| Path::new(v.as_str())),
        ) {
            if !p.is_file() {
                return Err(PipelineError::Config(format!("file not found: {}", p.display())));
            }
        }
        if self.window.0 > self.window.1 {
            return Err(PipelineError::Config(format!("empty window {:?}", self.window)));
        }
        Ok(())
    }

    fn load_rules(&self, udas: &BTreeSet<&str>) -> Result<BTreeMap<String, RuleSet>, PipelineError> {
        let mut cache: HashMap<&str, RuleSet> = HashMap::new();
        let mut out = BTreeMap::new();
        for &uda in udas {
            let source = self
                .rules
                .get(uda)
                .or_else(|| self.rules.get(ANY_UDA))
                .ok_or_else(|| PipelineError::Config(format!("no rule set for area {uda}")))?;
            if !cache.contains_key(source.as_str()) {
                let rs = if source == BUILTIN_CHEMISTRY {
                    RuleSet::chemistry()
                } else {
                    RuleSet::load(source).map_err(at("loading rules"))?
                };
                cache.insert(source, rs);
            }
            let mut rs = cache[source.as_str()].clone();
            rs.uda = uda.to_owned();
            if let Some(mode) = self.missing_mode {
                rs.missing_mode = mode;
            }
            rs.validate_window(self.window).map_err(at("loading rules"))?;
            out.insert(uda.to_owned(), rs);
        }
        Ok(out)
    }
}

/// Everything a run produces, before it is written out.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// Keyed by (scope, scenario); scopes are area codes and `overall`.
    pub rankings: BTreeMap<(String, Scenario), RankingList>,
    /// Keyed by (scope, list A scenario, list B scenario).
    pub comparisons: BTreeMap<(String, Scenario, Scenario), ComparisonReport>,
    /// Chosen submission sets per weight kind, by university.
    pub selections: Vec<(WeightKind, Vec<SelectionResult>)>,
    pub warnings: Vec<String>,
}

const OVERALL: &str = "overall";
const COMPARED: [(Scenario, Scenario); 2] = [(Scenario::Vqr, Scenario::FaiiTopK), (Scenario::Vqr, Scenario::Fss)];

type ScoreTable = HashMap<(ResearcherId, PublicationId), ScoredProduct>;

/// Per-pair VQR and FAII scores of every submittable authorship, and the
/// publications whose substitution-year metric was missing.
fn score_products(
    corpus: &Corpus,
    rules: &BTreeMap<String, RuleSet>,
    benchmarks: &Benchmarks,
    faii: &FaiiConfig<'_>,
) -> Result<(ScoreTable, Vec<PublicationId>), PipelineError> {
    let per_pub: Vec<(Vec<ScoredProduct>, bool)> = corpus
        .publications()
        .par_iter()
        .filter(|p| p.indexed)
        .map(|p| -> Result<_, PipelineError> {
            let byline = corpus.authors_of(&p.id).map_err(at("scoring"))?;
            let (impact, missing) = match faii.scaled_impact(p) {
                Ok(v) => (v, false),
                Err(IndicatorError::MissingMetric(_)) => (0.0, true),
                Err(e) => return Err(at("scoring")(e)),
            };
            let affiliations = corpus.byline_affiliations(&p.id).map_err(at("scoring"))?;
            let mut credit_cache: [Option<Vec<f64>>; 2] = [None, None];
            let mut vqr_cache: BTreeMap<&str, ProductScore> = BTreeMap::new();
            let mut out = Vec::new();
            for a in &byline {
                let Some(rid) = a.author_key.researcher() else { continue };
                let r = corpus.researcher(rid).expect("validated reference");
                if r.quota == 0 {
                    continue;
                }
                let vqr = match vqr_cache.get(r.uda.as_str()) {
                    Some(s) => *s,
                    None => {
                        let s = score_publication(&rules[&r.uda], p, benchmarks).map_err(at("scoring"))?;
                        vqr_cache.insert(&r.uda, s);
                        s
                    }
                };
                let mode: CreditMode = faii.settings.credit_policy.mode_for(&r.uda);
                let slot = &mut credit_cache[mode as usize];
                if slot.is_none() {
                    *slot = Some(credit_vector(mode, p, &byline, &affiliations).map_err(at("scoring"))?);
                }
                let credit = slot.as_ref().expect("filled above")[a.byline_position as usize - 1];
                out.push(ScoredProduct {
                    publication_id: p.id.clone(),
                    researcher_id: rid.clone(),
                    vqr_route: vqr.route,
                    vqr_score: vqr.score,
                    faii_score: impact * credit,
                });
            }
            Ok((out, missing))
        })
        .collect::<Result<_, _>>()?;
    let mut scores = HashMap::new();
    let mut missing_metric = Vec::new();
    let indexed = corpus.publications().iter().filter(|p| p.indexed);
    for (p, (products, missing)) in indexed.zip(per_pub) {
        if missing {
            missing_metric.push(p.id.clone());
        }
        for s in products {
            scores.insert((s.researcher_id.clone(), s.publication_id.clone()), s);
        }
    }
    Ok((scores, missing_metric))
}

/// Runs the experiment on a loaded corpus. Nothing is written.
pub fn evaluate(corpus: &Corpus, config: &RunConfig) -> Result<RunOutput, PipelineError> {
    let mut warnings = Vec::new();
    let area_of: BTreeMap<&str, &str> = corpus.sds_areas();
    let udas: BTreeSet<&str> = area_of.values().copied().collect();
    let rules = config.load_rules(&udas)?;

    let benchmarks = Benchmarks::build(corpus, &config.benchmarks).map_err(at("building benchmarks"))?;
    let settings = FaiiSettings {
        substitution_years: config.faii_substitution_years.clone(),
        credit_policy: config.credit_policy.clone(),
    };
    let faii = FaiiConfig::new(&benchmarks, &settings);
    let (scores, missing_metric) = score_products(corpus, &rules, &benchmarks, &faii)?;
    if !missing_metric.is_empty() {
        warnings.push(format!(
            "{} publications lack a journal metric in a substitution year and count as zero impact",
            missing_metric.len()
        ));
    }

    let selections: Vec<(SelectionResult, SelectionResult)> = corpus
        .universities()
        .par_iter()
        .map(|u| -> Result<_, PipelineError> {
            let vqr = build_problem(corpus, &scores, &u.id, WeightKind::Vqr).map_err(at("selection"))?;
            let faii = build_problem(corpus, &scores, &u.id, WeightKind::Faii).map_err(at("selection"))?;
            Ok((solve_exact(&vqr), solve_exact(&faii)))
        })
        .collect::<Result<_, _>>()?;

    let productivity = Productivity::compute(corpus, &faii).map_err(at("productivity"))?;

    let scopes: Vec<Option<&str>> = udas.iter().map(|u| Some(*u)).chain([None]).collect();
    let mut rankings = BTreeMap::new();
    let mut dropped: BTreeSet<String> = BTreeSet::new();
    for scope in scopes {
        let label = scope.unwrap_or(OVERALL);
        let in_scope = |sds: &str| scope.is_none_or(|uda| area_of.get(sds) == Some(&uda));
        let threshold = if scope.is_some() {
            config.thresholds.uda
        } else {
            config.thresholds.overall
        };
        let mut vqr_scores = BTreeMap::new();
        let mut faii_scores = BTreeMap::new();
        let mut fss_scores = BTreeMap::new();
        let mut submitting_staff: BTreeMap<UniversityId, u32> = BTreeMap::new();
        let mut all_staff: BTreeMap<UniversityId, u32> = BTreeMap::new();

        for (u, (vqr_sel, faii_sel)) in corpus.universities().iter().zip(&selections) {
            let members: Vec<_> = corpus.researchers_of(&u.id).filter(|r| in_scope(&r.sds)).collect();
            if members.is_empty() {
                continue;
            }
            all_staff.insert(u.id.clone(), members.len() as u32);
            let submitting: BTreeMap<ResearcherId, u32> = members
                .iter()
                .filter(|r| r.quota > 0)
                .map(|r| (r.id.clone(), r.quota))
                .collect();
            submitting_staff.insert(u.id.clone(), submitting.len() as u32);

            // Areas are scored under their own rule sets, so the university
            // total adds per-area numerators.
            let (mut vqr_num, mut faii_num, mut due) = (0.0, 0.0, 0u32);
            let areas: BTreeSet<&str> = members.iter().map(|r| r.uda.as_str()).collect();
            for uda in areas {
                let keep = |rid: &ResearcherId| {
                    submitting.contains_key(rid) && corpus.researcher(rid).is_some_and(|r| r.uda == uda)
                };
                let v = vqr_sel.restrict(&submitting, keep);
                let f = faii_sel.restrict(&submitting, keep);
                vqr_num += v.total_weight + v.missing as f64 * penalty_for(&rules[uda], PenaltyEvent::MissingProduct);
                faii_num += f.total_weight;
                due += submitting
                    .iter()
                    .filter(|(rid, _)| keep(rid))
                    .map(|(_, q)| q)
                    .sum::<u32>();
            }
            if due > 0 {
                vqr_scores.insert(u.id.clone(), vqr_num / due as f64);
                faii_scores.insert(u.id.clone(), faii_num / due as f64);
            }

            let fss_scope = scope.map_or(Scope::University, |uda| Scope::Uda(uda.to_owned()));
            let agg = productivity
                .fss_aggregate(&u.id, &fss_scope)
                .map_err(at("productivity"))?;
            dropped.extend(agg.dropped_sds);
            fss_scores.insert(u.id.clone(), agg.fss_value);
        }

        for (scenario, values, staff) in [
            (Scenario::Vqr, &vqr_scores, &submitting_staff),
            (Scenario::FaiiTopK, &faii_scores, &submitting_staff),
            (Scenario::Fss, &fss_scores, &all_staff),
        ] {
            match build_ranking(values, staff, threshold, label, scenario) {
                Ok(list) => {
                    if list.entries.iter().all(|e| e.score == 0.0) {
                        warnings.push(format!("{label}: every {scenario} score is zero"));
                    }
                    rankings.insert((label.to_owned(), scenario), list);
                }
                Err(RankingError::Empty(_)) => {
                    warnings.push(format!(
                        "{label}: no university reaches {threshold} staff, {scenario} not ranked"
                    ));
                }
                Err(e) => return Err(at("ranking")(e)),
            }
        }
    }
    for sds in dropped {
        warnings.push(format!(
            "sds {sds} has zero national productivity and is left out of fss"
        ));
    }

    let mut comparisons = BTreeMap::new();
    let scope_labels: BTreeSet<String> = rankings.keys().map(|(s, _)| s.clone()).collect();
    for label in scope_labels {
        for (a, b) in COMPARED {
            let (Some(la), Some(lb)) = (rankings.get(&(label.clone(), a)), rankings.get(&(label.clone(), b))) else {
                continue;
            };
            match compare(la, lb) {
                Ok(mut report) => {
                    report.scope = Some(label.clone());
                    report.list_a = Some(a.to_string());
                    report.list_b = Some(b.to_string());
                    comparisons.insert((label.clone(), a, b), report);
                }
                Err(e @ RankingError::TooFewShared(_)) => {
                    warnings.push(format!("{label}: {a} vs {b} not compared: {e}"))
                }
                Err(e) => return Err(at("comparison")(e)),
            }
        }
    }

    let (vqr_sel, faii_sel): (Vec<_>, Vec<_>) = selections.into_iter().unzip();
    Ok(RunOutput {
        rankings,
        comparisons,
        selections: vec![(WeightKind::Vqr, vqr_sel), (WeightKind::Faii, faii_sel)],
        warnings,
    })
}

/// File-name form of a scope label.
pub fn scope_slug(scope: &str) -> String {
    scope
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

pub fn ranking_file_name(scope: &str, scenario: Scenario) -> String {
    format!("rankings_{}_{}.csv", scope_slug(scope), scenario)
}

pub fn comparison_file_name(scope: &str, a: Scenario, b: Scenario) -> String {
    format!("comparison_{}_{}_vs_{}.json", scope_slug(scope), a, b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_universities: usize,
    pub n_researchers: usize,
    pub n_publications: usize,
    /// Ranked universities per scope and scenario.
    pub ranked: BTreeMap<String, BTreeMap<String, usize>>,
    /// Written files, relative to the output directory.
    pub files: Vec<String>,
    pub warnings: Vec<String>,
}

fn create(path: &Path) -> Result<BufWriter<File>, PipelineError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| PipelineError::Io {
            path: path.to_owned(),
            source,
        })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let io = |source| PipelineError::Io {
        path: path.to_owned(),
        source,
    };
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io(e.into()))?;
    w.write_all(b"\n").map_err(io)?;
    w.flush().map_err(io)
}

/// Writes rankings, comparisons, optional selections and `run_summary.json`
/// into `dir`.
pub fn write_outputs(
    corpus: &Corpus,
    output: &RunOutput,
    dir: &Path,
    with_selections: bool,
) -> Result<RunSummary, PipelineError> {
    std::fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
        path: dir.to_owned(),
        source,
    })?;
    let mut files = Vec::new();
    let mut ranked: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for ((scope, scenario), list) in &output.rankings {
        let name = ranking_file_name(scope, *scenario);
        let path = dir.join(&name);
        let mut w = create(&path)?;
        list.write_csv(&mut w).map_err(at("writing reports"))?;
        w.flush().map_err(|source| PipelineError::Io { path, source })?;
        ranked
            .entry(scope.clone())
            .or_default()
            .insert(scenario.to_string(), list.len());
        files.push(name);
    }
    for ((scope, a, b), report) in &output.comparisons {
        let name = comparison_file_name(scope, *a, *b);
        write_json(&dir.join(&name), report)?;
        files.push(name);
    }
    if with_selections {
        for (kind, results) in &output.selections {
            let name = match kind {
                WeightKind::Vqr => "selections_vqr.csv",
                WeightKind::Faii => "selections_faii_top_k.csv",
            };
            let path = dir.join(name);
            let mut wtr = csv::Writer::from_writer(create(&path)?);
            let csv_err = at("writing reports");
            wtr.write_record(["university_id", "researcher_id", "publication_id", "weight"])
                .map_err(&csv_err)?;
            for r in results {
                for c in &r.chosen {
                    wtr.write_record([
                        r.university_id.as_str(),
                        c.researcher_id.as_str(),
                        c.publication_id.as_str(),
                        &crate::format::sig6_string(c.weight),
                    ])
                    .map_err(&csv_err)?;
                }
            }
            wtr.flush().map_err(|source| PipelineError::Io { path, source })?;
            files.push(name.to_owned());
        }
    }
    files.push("run_summary.json".to_owned());
    let summary = RunSummary {
        n_universities: corpus.universities().len(),
        n_researchers: corpus.researchers().len(),
        n_publications: corpus.publications().len(),
        ranked,
        files,
        warnings: output.warnings.clone(),
    };
    write_json(&dir.join("run_summary.json"), &summary)?;
    Ok(summary)
}

/// `run`: load, evaluate, write. `out` overrides the configured output
/// directory.
pub fn cmd_run(config_path: impl AsRef<Path>, out: Option<&Path>) -> Result<RunSummary, PipelineError> {
    let mut config = RunConfig::load(config_path)?;
    if let Some(dir) = out {
        config.output_dir = dir.to_owned();
    }
    run_config(&config)
}

/// Runs an already resolved configuration.
pub fn run_config(config: &RunConfig) -> Result<RunSummary, PipelineError> {
    config.validate()?;
    let corpus = load_corpus(&config.corpus_paths()?, config.window).map_err(at("loading corpus"))?;
    let output = evaluate(&corpus, config)?;
    write_outputs(&corpus, &output, &config.output_dir, config.write_selections)
}

/// `synth`: generate a corpus from a spec file into `out_dir`.
pub fn cmd_synth(
    spec_path: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
    seed: Option<u64>,
) -> Result<CorpusPaths, PipelineError> {
    let mut spec = SynthSpec::load(spec_path).map_err(at("reading synth spec"))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let corpus = generate(&spec).map_err(at("generating corpus"))?;
    write_corpus(&corpus, out_dir).map_err(at("writing corpus"))
}

/// `compare`: two ranking CSVs to a comparison report.
pub fn cmd_compare(list_a: impl AsRef<Path>, list_b: impl AsRef<Path>) -> Result<ComparisonReport, PipelineError> {
    let read = |p: &Path| -> Result<RankingList, PipelineError> {
        let file = File::open(p).map_err(|source| PipelineError::Io {
            path: p.to_owned(),
            source,
        })?;
        RankingList::read_csv(
            file,
            p.file_stem()
                .map_or(String::new(), |s| s.to_string_lossy().into_owned()),
        )
        .map_err(at("reading ranking"))
    };
    let (a, b) = (read(list_a.as_ref())?, read(list_b.as_ref())?);
    let mut report = compare(&a, &b).map_err(at("comparison"))?;
    report.list_a = Some(a.scope);
    report.list_b = Some(b.scope);
    Ok(report)
}

/// Pretty JSON of a report, newline-terminated.
pub fn report_json(report: &ComparisonReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}
