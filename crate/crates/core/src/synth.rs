//! Seeded synthetic corpora.
//!
//! Every random draw comes from a ChaCha stream keyed by
//! `(seed, entity kind, entity index)`, so an entity's attributes do not
//! depend on generation order and researchers can be generated in parallel.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    AuthorKey, Authorship, Corpus, CorpusError, DocType, Publication, Researcher, ResearcherId, University, MAX_QUOTA,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    Invalid(String),
    #[error("infeasible synth spec: {0}")]
    Infeasible(String),
    #[error("synth spec JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Distribution of the number of authors on a byline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoauthorDistribution {
    Fixed {
        n: u32,
    },
    Uniform {
        min: u32,
        max: u32,
    },
    /// Rounded lognormal with the given mean, clamped to `[min, max]`.
    Lognormal {
        mean: f64,
        sigma: f64,
        min: u32,
        max: u32,
    },
}

impl Default for CoauthorDistribution {
    fn default() -> Self {
        CoauthorDistribution::Uniform { min: 1, max: 6 }
    }
}

impl CoauthorDistribution {
    fn bounds(&self) -> (u32, u32) {
        match *self {
            CoauthorDistribution::Fixed { n } => (n, n),
            CoauthorDistribution::Uniform { min, max } | CoauthorDistribution::Lognormal { min, max, .. } => (min, max),
        }
    }

    fn validate(&self) -> Result<(), String> {
        let (min, max) = self.bounds();
        if min < 1 || min > max {
            return Err(format!("author count bounds {min}..{max}"));
        }
        if let CoauthorDistribution::Lognormal { mean, sigma, .. } = *self {
            if !(mean > 0.0 && mean.is_finite() && sigma >= 0.0 && sigma.is_finite()) {
                return Err(format!("lognormal author count mean {mean} sigma {sigma}"));
            }
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, rng: &mut R, factor: f64) -> u32 {
        let raw = match *self {
            CoauthorDistribution::Fixed { n } => n as f64,
            CoauthorDistribution::Uniform { min, max } => rng.gen_range(min..=max) as f64,
            CoauthorDistribution::Lognormal { mean, sigma, .. } => {
                let z: f64 = StandardNormal.sample(rng);
                (mean.ln() - sigma * sigma / 2.0 + sigma * z).exp()
            }
        };
        let (min, max) = self.bounds();
        ((raw * factor).round() as u32).clamp(min, max)
    }
}

/// Lognormal parameters, given as the mean and log-sd of the continuous
/// variable. Citations are the floor of a draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LognormalParams {
    pub mean: f64,
    pub sigma: f64,
}

impl LognormalParams {
    pub fn mu(&self) -> f64 {
        self.mean.ln() - self.sigma * self.sigma / 2.0
    }

    fn validate(&self, what: &str) -> Result<(), String> {
        if self.mean > 0.0 && self.mean.is_finite() && self.sigma >= 0.0 && self.sigma.is_finite() {
            Ok(())
        } else {
            Err(format!("{what}: mean {} sigma {}", self.mean, self.sigma))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitationModel {
    #[serde(flatten)]
    pub base: LognormalParams,
    /// Multipliers on the mean per publication year; absent years use 1.
    #[serde(default)]
    pub year_factors: BTreeMap<i32, f64>,
}

impl Default for CitationModel {
    fn default() -> Self {
        Self {
            base: LognormalParams { mean: 8.0, sigma: 1.1 },
            year_factors: BTreeMap::new(),
        }
    }
}

impl CitationModel {
    /// Log-scale location of the citation draw in `year`.
    pub fn mu(&self, year: i32) -> f64 {
        self.base.mu() + self.year_factors.get(&year).copied().unwrap_or(1.0).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorSpec {
    pub sds: String,
    pub uda: String,
    /// Defaults to the sds code.
    #[serde(default)]
    pub subject_category: Option<String>,
    /// Relative share of researchers.
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default)]
    pub coauthors: CoauthorDistribution,
    #[serde(default)]
    pub citations: CitationModel,
    #[serde(default = "default_metric")]
    pub metric: LognormalParams,
    /// Overrides the spec-wide external author rate for this sector.
    #[serde(default)]
    pub external_author_rate: Option<f64>,
    /// Overrides the spec-wide log-sd of the university byline multiplier.
    #[serde(default)]
    pub coauthor_factor_sigma: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn default_metric() -> LognormalParams {
    LognormalParams { mean: 2.0, sigma: 0.6 }
}

impl SectorSpec {
    fn generic(index: usize) -> Self {
        Self {
            sds: format!("SDS{:02}", index + 1),
            uda: format!("UDA{:02}", index + 1),
            subject_category: None,
            weight: 1.0,
            coauthors: CoauthorDistribution::default(),
            citations: CitationModel::default(),
            metric: default_metric(),
            external_author_rate: None,
            coauthor_factor_sigma: None,
        }
    }

    fn external_rate(&self, spec: &SynthSpec) -> f64 {
        self.external_author_rate.unwrap_or(spec.external_author_rate)
    }

    fn coauthor_factor(&self, spec: &SynthSpec, z: f64) -> f64 {
        (self.coauthor_factor_sigma.unwrap_or(spec.coauthor_factor_sigma) * z).exp()
    }

    pub fn category(&self) -> &str {
        self.subject_category.as_deref().unwrap_or(&self.sds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotaShare {
    pub quota: u32,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalaryLevel {
    pub rank: String,
    pub salary: f64,
    pub share: f64,
}

fn default_quota_rule() -> Vec<QuotaShare> {
    vec![
        QuotaShare { quota: 3, share: 0.9 },
        QuotaShare { quota: 2, share: 0.05 },
        QuotaShare { quota: 1, share: 0.05 },
    ]
}

fn default_salary_rule() -> Vec<SalaryLevel> {
    [("full", 1.5, 0.3), ("associate", 1.1, 0.35), ("assistant", 0.8, 0.35)]
        .into_iter()
        .map(|(rank, salary, share)| SalaryLevel {
            rank: rank.into(),
            salary,
            share,
        })
        .collect()
}

fn default_n_universities() -> u32 {
    20
}

fn default_researchers() -> u32 {
    100
}

fn default_pubs() -> f64 {
    5.0
}

fn default_window() -> (i32, i32) {
    (2004, 2010)
}

fn default_external_rate() -> f64 {
    0.3
}

fn default_same_university_rate() -> f64 {
    0.6
}

fn default_university_sigma() -> f64 {
    0.3
}

fn default_researcher_sigma() -> f64 {
    0.5
}

fn default_metric_correlation() -> f64 {
    0.5
}

fn default_review_rate() -> f64 {
    0.1
}

fn default_unindexed_rate() -> f64 {
    0.05
}

/// Parameters of a synthetic corpus. Every field but `seed` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    #[serde(default = "default_n_universities")]
    pub n_universities: u32,
    #[serde(default = "default_researchers")]
    pub researchers_per_university: u32,
    /// Number of generic sectors to create when `sectors` is empty.
    #[serde(default)]
    pub n_sds: Option<u32>,
    #[serde(default)]
    pub sectors: Vec<SectorSpec>,
    /// Mean of the Poisson number of publications led by each researcher.
    #[serde(default = "default_pubs")]
    pub publications_per_researcher_mean: f64,
    #[serde(default = "default_window")]
    pub window: (i32, i32),
    /// Probability that a byline slot other than the lead is external.
    #[serde(default = "default_external_rate")]
    pub external_author_rate: f64,
    /// Probability that an internal co-author comes from the lead's
    /// university.
    #[serde(default = "default_same_university_rate")]
    pub same_university_rate: f64,
    /// Log-sd of the per-university citation multiplier.
    #[serde(default = "default_university_sigma")]
    pub university_effect_sigma: f64,
    /// Log-sd of the per-researcher citation multiplier.
    #[serde(default = "default_researcher_sigma")]
    pub researcher_effect_sigma: f64,
    /// Log-sd of the per-university multiplier on byline length.
    #[serde(default)]
    pub coauthor_factor_sigma: f64,
    /// Citations grow as `authors ^ elasticity`.
    #[serde(default)]
    pub citation_coauthor_elasticity: f64,
    /// Correlation between the log citation and log journal metric draws.
    #[serde(default = "default_metric_correlation")]
    pub metric_correlation: f64,
    #[serde(default = "default_review_rate")]
    pub review_rate: f64,
    #[serde(default = "default_unindexed_rate")]
    pub unindexed_rate: f64,
    /// Probability that an indexed publication lacks a journal metric.
    #[serde(default)]
    pub missing_metric_rate: f64,
    #[serde(default = "default_quota_rule")]
    pub quota_rule: Vec<QuotaShare>,
    #[serde(default = "default_salary_rule")]
    pub salary_rule: Vec<SalaryLevel>,
}

impl SynthSpec {
    /// A spec with every default and `n_sds` generic sectors.
    pub fn new(seed: u64) -> Self {
        serde_json::from_value(serde_json::json!({ "seed": seed })).expect("defaults deserialize")
    }

    pub fn from_json(json: &str) -> Result<Self, SynthError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SynthError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SynthError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// The sectors to generate: `sectors`, or `n_sds` generic ones (4 when
    /// neither is given).
    pub fn resolved_sectors(&self) -> Result<Vec<SectorSpec>, SynthError> {
        match (self.sectors.is_empty(), self.n_sds) {
            (true, n) => Ok((0..n.unwrap_or(4) as usize).map(SectorSpec::generic).collect()),
            (false, Some(n)) if n as usize != self.sectors.len() => Err(SynthError::Invalid(format!(
                "n_sds is {n} but {} sectors are listed",
                self.sectors.len()
            ))),
            (false, _) => Ok(self.sectors.clone()),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.n_universities < 1 || self.researchers_per_university < 1 {
            return bad("universities and researchers per university must be at least 1".into());
        }
        if self.n_sds == Some(0) {
            return bad("n_sds must be at least 1".into());
        }
        if !(self.publications_per_researcher_mean > 0.0 && self.publications_per_researcher_mean.is_finite()) {
            return bad(format!(
                "publications_per_researcher_mean {}",
                self.publications_per_researcher_mean
            ));
        }
        if self.window.0 > self.window.1 {
            return bad(format!("window {:?}", self.window));
        }
        for (name, p) in [
            ("external_author_rate", self.external_author_rate),
            ("same_university_rate", self.same_university_rate),
            ("review_rate", self.review_rate),
            ("unindexed_rate", self.unindexed_rate),
            ("missing_metric_rate", self.missing_metric_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} {p} is not a probability"));
            }
        }
        if !(-1.0..=1.0).contains(&self.metric_correlation) {
            return bad(format!("metric_correlation {}", self.metric_correlation));
        }
        for (name, s) in [
            ("university_effect_sigma", self.university_effect_sigma),
            ("researcher_effect_sigma", self.researcher_effect_sigma),
            ("coauthor_factor_sigma", self.coauthor_factor_sigma),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("{name} {s}"));
            }
        }
        if !self.citation_coauthor_elasticity.is_finite() {
            return bad("citation_coauthor_elasticity is not finite".into());
        }
        if self.quota_rule.is_empty()
            || self
                .quota_rule
                .iter()
                .any(|q| q.quota > MAX_QUOTA || q.share.is_nan() || q.share <= 0.0)
        {
            return bad(format!("quota_rule needs positive shares and quotas up to {MAX_QUOTA}"));
        }
        if self.salary_rule.is_empty() || self.salary_rule.iter().any(|s| !(s.salary > 0.0 && s.share > 0.0)) {
            return bad("salary_rule needs positive salaries and shares".into());
        }
        let sectors = self.resolved_sectors()?;
        let mut areas: HashMap<&str, &str> = HashMap::new();
        for s in &sectors {
            if let Some(prev) = areas.insert(&s.sds, &s.uda) {
                return bad(format!("sector {} listed twice (areas {prev}, {})", s.sds, s.uda));
            }
            if !(s.weight > 0.0 && s.weight.is_finite()) {
                return bad(format!("sector {} weight {}", s.sds, s.weight));
            }
            s.coauthors
                .validate()
                .map_err(|m| SynthError::Invalid(format!("sector {}: {m}", s.sds)))?;
            s.citations
                .base
                .validate(&format!("sector {} citations", s.sds))
                .map_err(SynthError::Invalid)?;
            s.metric
                .validate(&format!("sector {} metric", s.sds))
                .map_err(SynthError::Invalid)?;
            if let Some(sigma) = s.coauthor_factor_sigma {
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return bad(format!("sector {} coauthor_factor_sigma {sigma}", s.sds));
                }
            }
            if let Some(p) = s.external_author_rate {
                if !(0.0..=1.0).contains(&p) {
                    return bad(format!(
                        "sector {} external_author_rate {p} is not a probability",
                        s.sds
                    ));
                }
            }
            if s.citations.year_factors.values().any(|f| !(*f > 0.0 && f.is_finite())) {
                return bad(format!("sector {} has a non-positive year factor", s.sds));
            }
        }
        Ok(())
    }
}

const KIND_UNIVERSITY: u64 = 1;
const KIND_RESEARCHER: u64 = 2;
const KIND_PUBLICATION: u64 = 3;

/// Independent stream for one entity.
fn stream(seed: u64, kind: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&kind.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn pick_weighted<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

struct UniversityTraits {
    citation_effect: f64,
    /// Standard normal draw scaled by each sector's byline sigma.
    coauthor_z: f64,
}

struct Draft {
    sector: usize,
    university: usize,
    citation_effect: f64,
}

struct Pools {
    /// Researcher indices per (university, sector).
    local: HashMap<(usize, usize), Vec<usize>>,
    /// Researcher indices per sector.
    sector: Vec<Vec<usize>>,
}

fn width(n: usize) -> usize {
    n.max(1).to_string().len()
}

/// Builds a corpus from `spec`. The same spec always yields the same corpus.
pub fn generate(spec: &SynthSpec) -> Result<Corpus, SynthError> {
    spec.validate()?;
    let sectors = spec.resolved_sectors()?;
    let n_uni = spec.n_universities as usize;
    let per_uni = spec.researchers_per_university as usize;
    let n_res = n_uni * per_uni;
    let (uw, rw) = (width(n_uni), width(n_res));

    let traits: Vec<UniversityTraits> = (0..n_uni)
        .map(|u| {
            let mut rng = stream(spec.seed, KIND_UNIVERSITY, u as u64);
            UniversityTraits {
                citation_effect: spec.university_effect_sigma * normal(&mut rng),
                coauthor_z: normal(&mut rng),
            }
        })
        .collect();
    let universities: Vec<University> = (0..n_uni)
        .map(|u| University {
            id: format!("U{:0uw$}", u + 1).into(),
            name: format!("University {}", u + 1),
        })
        .collect();

    let sector_weights: Vec<f64> = sectors.iter().map(|s| s.weight).collect();
    let quota_weights: Vec<f64> = spec.quota_rule.iter().map(|q| q.share).collect();
    let salary_weights: Vec<f64> = spec.salary_rule.iter().map(|s| s.share).collect();
    let mut researchers = Vec::with_capacity(n_res);
    let mut drafts = Vec::with_capacity(n_res);
    for r in 0..n_res {
        let u = r / per_uni;
        let mut rng = stream(spec.seed, KIND_RESEARCHER, r as u64);
        let sector = pick_weighted(&mut rng, &sector_weights);
        let quota = spec.quota_rule[pick_weighted(&mut rng, &quota_weights)].quota;
        let salary = spec.salary_rule[pick_weighted(&mut rng, &salary_weights)].salary;
        let effect = spec.researcher_effect_sigma * normal(&mut rng);
        researchers.push(Researcher {
            id: format!("R{:0rw$}", r + 1).into(),
            university_id: universities[u].id.clone(),
            sds: sectors[sector].sds.clone(),
            uda: sectors[sector].uda.clone(),
            quota,
            salary,
        });
        drafts.push(Draft {
            sector,
            university: u,
            citation_effect: traits[u].citation_effect + effect,
        });
    }

    let mut pools = Pools {
        local: HashMap::new(),
        sector: vec![Vec::new(); sectors.len()],
    };
    for (i, d) in drafts.iter().enumerate() {
        pools.local.entry((d.university, d.sector)).or_default().push(i);
        pools.sector[d.sector].push(i);
    }
    for (s, pool) in sectors.iter().zip(&pools.sector) {
        let max = s.coauthors.bounds().1 as usize;
        if s.external_rate(spec) < 1.0 && !pool.is_empty() && pool.len() < max {
            return Err(SynthError::Infeasible(format!(
                "sector {} allows bylines of {max} authors but has {} researchers",
                s.sds,
                pool.len()
            )));
        }
    }

    let ctx = Context {
        spec,
        sectors: &sectors,
        traits: &traits,
        drafts: &drafts,
        researcher_ids: researchers.iter().map(|r| r.id.clone()).collect(),
        pools: &pools,
    };
    let per_researcher: Vec<Vec<(Publication, Vec<Authorship>)>> = (0..n_res)
        .into_par_iter()
        .map(|r| ctx.publications_of(r))
        .collect::<Result<_, _>>()?;

    let n_pubs: usize = per_researcher.iter().map(Vec::len).sum();
    let pw = width(n_pubs);
    let mut publications = Vec::with_capacity(n_pubs);
    let mut authorships = Vec::new();
    for (k, (mut p, mut byline)) in per_researcher.into_iter().flatten().enumerate() {
        p.id = format!("P{:0pw$}", k + 1).into();
        for a in &mut byline {
            a.publication_id = p.id.clone();
        }
        publications.push(p);
        authorships.extend(byline);
    }
    Ok(Corpus::new(
        universities,
        researchers,
        publications,
        authorships,
        spec.window,
    )?)
}

struct Context<'a> {
    spec: &'a SynthSpec,
    sectors: &'a [SectorSpec],
    traits: &'a [UniversityTraits],
    drafts: &'a [Draft],
    researcher_ids: Vec<ResearcherId>,
    pools: &'a Pools,
}

impl Context<'_> {
    /// Publications led by researcher `r`, with placeholder ids.
    fn publications_of(&self, r: usize) -> Result<Vec<(Publication, Vec<Authorship>)>, SynthError> {
        let spec = self.spec;
        let mut rng = stream(spec.seed, KIND_PUBLICATION, (r as u64) << 24);
        let count = Poisson::new(spec.publications_per_researcher_mean)
            .map_err(|e| SynthError::Invalid(e.to_string()))?
            .sample(&mut rng) as u64;
        (1..=count)
            .map(|j| self.publication(r, &mut stream(spec.seed, KIND_PUBLICATION, ((r as u64) << 24) | j)))
            .collect()
    }

    fn publication(&self, lead: usize, rng: &mut ChaCha8Rng) -> Result<(Publication, Vec<Authorship>), SynthError> {
        let spec = self.spec;
        let draft = &self.drafts[lead];
        let sector = &self.sectors[draft.sector];
        let year = rng.gen_range(spec.window.0..=spec.window.1);
        let doc_type = if rng.gen::<f64>() < spec.review_rate {
            DocType::Review
        } else {
            DocType::Article
        };
        let indexed = rng.gen::<f64>() >= spec.unindexed_rate;
        let factor = sector.coauthor_factor(spec, self.traits[draft.university].coauthor_z);
        let total = sector.coauthors.sample(rng, factor);

        let mut members: Vec<Option<usize>> = vec![Some(lead)];
        for _ in 1..total {
            if rng.gen::<f64>() < sector.external_rate(spec) {
                members.push(None);
                continue;
            }
            let same = rng.gen::<f64>() < spec.same_university_rate;
            let start = rng.gen::<u64>();
            let pick = self
                .pick_coauthor(draft, same, start, &members)
                .or_else(|| self.pick_coauthor(draft, !same, start, &members))
                .ok_or_else(|| {
                    SynthError::Infeasible(format!(
                        "a byline of {total} authors needs more internal researchers than sector {} has",
                        sector.sds
                    ))
                })?;
            members.push(Some(pick));
        }
        // Shuffle byline positions.
        for i in (1..members.len()).rev() {
            members.swap(i, rng.gen_range(0..=i));
        }

        let z = normal(rng);
        let w = normal(rng);
        let mu =
            sector.citations.mu(year) + draft.citation_effect + spec.citation_coauthor_elasticity * (total as f64).ln();
        let citations = (mu + sector.citations.base.sigma * z).exp().floor() as u64;
        let rho = spec.metric_correlation;
        let metric_z = rho * z + (1.0 - rho * rho).sqrt() * w;
        let metric = ((sector.metric.mu() + sector.metric.sigma * metric_z).exp() * 1000.0).round() / 1000.0;
        let journal_metric = (rng.gen::<f64>() >= spec.missing_metric_rate).then_some(metric.max(0.001));

        let publication = Publication {
            id: String::new().into(),
            year,
            subject_category: sector.category().to_owned(),
            doc_type,
            citations,
            journal_metric,
            indexed,
        };
        let byline = members
            .iter()
            .enumerate()
            .map(|(i, m)| Authorship {
                publication_id: String::new().into(),
                author_key: match m {
                    Some(r) => AuthorKey::Internal(self.researcher_ids[*r].clone()),
                    None => AuthorKey::External,
                },
                byline_position: i as u32 + 1,
                total_authors: total,
            })
            .collect();
        Ok((publication, byline))
    }

    /// First researcher not yet on the byline, probing from `start` through
    /// the lead's local pool (`same`) or the rest of the sector.
    fn pick_coauthor(&self, lead: &Draft, same: bool, start: u64, members: &[Option<usize>]) -> Option<usize> {
        let pool: &[usize] = if same {
            self.pools
                .local
                .get(&(lead.university, lead.sector))
                .map_or(&[], Vec::as_slice)
        } else {
            &self.pools.sector[lead.sector]
        };
        if pool.is_empty() {
            return None;
        }
        let n = pool.len();
        let first = (start % n as u64) as usize;
        (0..n)
            .map(|k| pool[(first + k) % n])
            .find(|&c| (same || self.drafts[c].university != lead.university) && !members.contains(&Some(c)))
    }
}

/// Convenience: read a spec, optionally override its seed, generate, and
/// return the corpus.
pub fn generate_from_file(path: impl AsRef<Path>, seed: Option<u64>) -> Result<Corpus, SynthError> {
    let mut spec = SynthSpec::load(path)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    generate(&spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthSpec {
        SynthSpec {
            n_universities: 3,
            researchers_per_university: 20,
            ..SynthSpec::new(seed)
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        assert_eq!(generate(&small(42)).unwrap(), generate(&small(42)).unwrap());
        assert_ne!(generate(&small(42)).unwrap(), generate(&small(43)).unwrap());
    }

    #[test]
    fn degenerate_coauthors_give_single_authors() {
        let mut spec = small(1);
        spec.sectors = vec![SectorSpec {
            coauthors: CoauthorDistribution::Fixed { n: 1 },
            ..SectorSpec::generic(0)
        }];
        let c = generate(&spec).unwrap();
        assert!(!c.publications().is_empty());
        assert!(c.authorships().iter().all(|a| a.total_authors == 1));
        assert_eq!(c.authorships().len(), c.publications().len());
    }

    #[test]
    fn all_external_coauthors() {
        let mut spec = small(7);
        spec.external_author_rate = 1.0;
        spec.sectors = vec![SectorSpec {
            coauthors: CoauthorDistribution::Uniform { min: 3, max: 8 },
            ..SectorSpec::generic(0)
        }];
        let c = generate(&spec).unwrap();
        for p in c.publications() {
            let byline = c.authors_of(&p.id).unwrap();
            assert_eq!(byline.len() as u32, byline[0].total_authors);
            assert!(byline[0].total_authors >= 3);
            assert_eq!(byline.iter().filter(|a| !a.author_key.is_external()).count(), 1);
        }
    }

    #[test]
    fn too_many_internal_authors_is_infeasible() {
        let mut spec = small(3);
        spec.external_author_rate = 0.0;
        spec.sectors = vec![SectorSpec {
            coauthors: CoauthorDistribution::Fixed { n: 61 },
            ..SectorSpec::generic(0)
        }];
        assert!(matches!(generate(&spec), Err(SynthError::Infeasible(_))));
    }

    #[test]
    fn invalid_specs() {
        let mut spec = small(0);
        spec.external_author_rate = 1.5;
        assert!(matches!(generate(&spec), Err(SynthError::Invalid(_))));
        let mut spec = small(0);
        spec.researchers_per_university = 0;
        assert!(matches!(generate(&spec), Err(SynthError::Invalid(_))));
        let mut spec = small(0);
        spec.n_sds = Some(2);
        spec.sectors = vec![SectorSpec::generic(0)];
        assert!(matches!(generate(&spec), Err(SynthError::Invalid(_))));
        assert!(SynthSpec::from_json(r#"{"seed": 1, "bogus": 2}"#).is_err());
    }

    #[test]
    fn spec_json_defaults() {
        let spec = SynthSpec::from_json(r#"{"seed": 9, "n_sds": 2}"#).unwrap();
        assert_eq!(spec.resolved_sectors().unwrap().len(), 2);
        assert_eq!(spec.window, (2004, 2010));
        let c = generate(&SynthSpec {
            n_universities: 2,
            researchers_per_university: 20,
            ..spec
        })
        .unwrap();
        assert_eq!(c.universities().len(), 2);
        assert_eq!(c.researchers().len(), 40);
    }
}
