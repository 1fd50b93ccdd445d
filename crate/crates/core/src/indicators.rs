//! Impact indicators: the fractional article impact of a (publication,
//! researcher) pair and salary-normalized productivity at sector, area and
//! university level.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmark::{BenchmarkError, Benchmarks, ReferenceKey};
use crate::corpus::{Authorship, Corpus, CorpusError, Publication, PublicationId, UniversityId};
use crate::crediting::{credit_vector, fractional_credit, CreditError, CreditMode, CreditPolicy};

#[derive(Debug, Error)]
pub enum IndicatorError {
    #[error("no cited publications in reference cell {0}")]
    MissingMean(ReferenceKey),
    #[error("publication {0} has no journal metric in a substitution year")]
    MissingMetric(PublicationId),
    #[error("{university} has no staff in {scope}")]
    EmptyStaff { university: UniversityId, scope: String },
    #[error("{university}: total salary in {scope} is zero")]
    ZeroSalary { university: UniversityId, scope: String },
    #[error("no staff in sds {0}")]
    EmptySds(String),
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
    #[error(transparent)]
    Credit(#[from] CreditError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Serializable FAII settings, the part of the run configuration that is
/// not derived from data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaiiSettings {
    /// Years whose impact is measured by the journal metric instead of
    /// citations (short citation window).
    #[serde(default = "default_substitution_years")]
    pub substitution_years: BTreeSet<i32>,
    #[serde(default)]
    pub credit_policy: CreditPolicy,
}

fn default_substitution_years() -> BTreeSet<i32> {
    [2010].into()
}

impl Default for FaiiSettings {
    fn default() -> Self {
        Self {
            substitution_years: default_substitution_years(),
            credit_policy: CreditPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FaiiConfig<'a> {
    pub benchmarks: &'a Benchmarks,
    pub settings: &'a FaiiSettings,
}

impl<'a> FaiiConfig<'a> {
    pub fn new(benchmarks: &'a Benchmarks, settings: &'a FaiiSettings) -> Self {
        Self { benchmarks, settings }
    }

    /// Field-normalized impact `c / c̄` of a publication, or
    /// `metric / mean metric` in substitution years. Publications outside
    /// the index have no reference cell and count zero.
    pub fn scaled_impact(&self, publication: &Publication) -> Result<f64, IndicatorError> {
        if !publication.indexed {
            return Ok(0.0);
        }
        if self.settings.substitution_years.contains(&publication.year) {
            let metric = publication
                .journal_metric
                .ok_or_else(|| IndicatorError::MissingMetric(publication.id.clone()))?;
            if metric == 0.0 {
                return Ok(0.0);
            }
            let dist = self.benchmarks.metric_distribution(publication)?;
            let mean = dist
                .mean_present_metric
                .filter(|m| *m > 0.0)
                .ok_or_else(|| IndicatorError::MissingMean(dist.key.clone()))?;
            return Ok(metric / mean);
        }
        if publication.citations == 0 {
            return Ok(0.0);
        }
        let dist = self.benchmarks.citation_distribution(publication, None)?;
        let mean = dist
            .mean_cited_citations
            .ok_or_else(|| IndicatorError::MissingMean(dist.key.clone()))?;
        Ok(publication.citations as f64 / mean)
    }

    /// Fractional article impact of the author at `authorship`'s byline
    /// position.
    pub fn faii(
        &self,
        publication: &Publication,
        authorship: &Authorship,
        affiliations: &[Option<UniversityId>],
        mode: CreditMode,
    ) -> Result<f64, IndicatorError> {
        let credit = fractional_credit(mode, authorship.byline_position, affiliations)?;
        Ok(self.scaled_impact(publication)? * credit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdsProductivity {
    pub university_id: UniversityId,
    pub sds: String,
    /// Fractional scaled impact per salary unit.
    pub raw_fss: f64,
    pub salary: f64,
    /// Pooled national value for the sector.
    pub national_mean_fss: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Uda(String),
    University,
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scope::Uda(u) => f.write_str(u),
            Scope::University => f.write_str("overall"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstitutionProductivity {
    pub university_id: UniversityId,
    pub scope: Scope,
    pub fss_value: f64,
    pub total_salary: f64,
    /// Sectors left out because nobody in the country has measurable output.
    pub dropped_sds: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Cell {
    numerator: f64,
    salary: f64,
    staff: usize,
}

/// Numerators and salaries of every (university, sds) cell, from which all
/// productivity queries are answered.
#[derive(Debug, Clone, PartialEq)]
pub struct Productivity {
    cells: BTreeMap<(UniversityId, String), Cell>,
    sds_uda: BTreeMap<String, String>,
    /// Publications counted as zero impact because a substitution-year
    /// metric was absent.
    pub missing_metric: Vec<PublicationId>,
}

impl Productivity {
    /// Accumulates every internal authorship's `scaled impact × credit` into
    /// its researcher's cell. Sums run in publication id then byline order.
    pub fn compute(corpus: &Corpus, config: &FaiiConfig<'_>) -> Result<Self, IndicatorError> {
        let mut cells: BTreeMap<(UniversityId, String), Cell> = BTreeMap::new();
        let mut sds_uda = BTreeMap::new();
        for r in corpus.researchers() {
            let cell = cells.entry((r.university_id.clone(), r.sds.clone())).or_default();
            cell.salary += r.salary;
            cell.staff += 1;
            sds_uda.insert(r.sds.clone(), r.uda.clone());
        }

        let policy = &config.settings.credit_policy;
        let mut missing_metric = Vec::new();
        for p in corpus.publications() {
            let byline = corpus.authors_of(&p.id)?;
            if byline.iter().all(|a| a.author_key.is_external()) {
                continue;
            }
            let impact = match config.scaled_impact(p) {
                Ok(v) => v,
                Err(IndicatorError::MissingMetric(id)) => {
                    missing_metric.push(id);
                    0.0
                }
                Err(e) => return Err(e),
            };
            if impact == 0.0 {
                continue;
            }
            let affiliations = corpus.byline_affiliations(&p.id)?;
            let mut by_mode: [Option<Vec<f64>>; 2] = [None, None];
            for a in &byline {
                let Some(rid) = a.author_key.researcher() else { continue };
                let r = corpus.researcher(rid).expect("validated reference");
                let mode = policy.mode_for(&r.uda);
                let slot = &mut by_mode[mode as usize];
                if slot.is_none() {
                    *slot = Some(credit_vector(mode, p, &byline, &affiliations)?);
                }
                let credit = slot.as_ref().expect("filled above")[a.byline_position as usize - 1];
                let cell = cells
                    .get_mut(&(r.university_id.clone(), r.sds.clone()))
                    .expect("cell created for every researcher");
                cell.numerator += impact * credit;
            }
        }
        Ok(Self {
            cells,
            sds_uda,
            missing_metric,
        })
    }

    fn cell(&self, university_id: &UniversityId, sds: &str) -> Option<&Cell> {
        self.cells.get(&(university_id.clone(), sds.to_owned()))
    }

    pub fn fss_sds(&self, university_id: &UniversityId, sds: &str) -> Result<SdsProductivity, IndicatorError> {
        let cell = self
            .cell(university_id, sds)
            .ok_or_else(|| IndicatorError::EmptyStaff {
                university: university_id.clone(),
                scope: sds.to_owned(),
            })?;
        if cell.salary <= 0.0 {
            return Err(IndicatorError::ZeroSalary {
                university: university_id.clone(),
                scope: sds.to_owned(),
            });
        }
        Ok(SdsProductivity {
            university_id: university_id.clone(),
            sds: sds.to_owned(),
            raw_fss: cell.numerator / cell.salary,
            salary: cell.salary,
            national_mean_fss: self.national_mean_fss(sds)?,
        })
    }

    /// Pooled national productivity of a sector: all numerators over all
    /// salaries.
    pub fn national_mean_fss(&self, sds: &str) -> Result<f64, IndicatorError> {
        let (mut num, mut salary, mut staff) = (0.0, 0.0, 0);
        for ((_, s), cell) in &self.cells {
            if s == sds {
                num += cell.numerator;
                salary += cell.salary;
                staff += cell.staff;
            }
        }
        if staff == 0 || salary <= 0.0 {
            return Err(IndicatorError::EmptySds(sds.to_owned()));
        }
        Ok(num / salary)
    }

    /// Salary-weighted mean of the sector productivities of a university,
    /// each normalized by its national value.
    pub fn fss_aggregate(
        &self,
        university_id: &UniversityId,
        scope: &Scope,
    ) -> Result<InstitutionProductivity, IndicatorError> {
        let in_scope: Vec<(&String, &Cell)> = self
            .cells
            .range((university_id.clone(), String::new())..)
            .take_while(|((u, _), _)| u == university_id)
            .filter(|((_, sds), _)| match scope {
                Scope::University => true,
                Scope::Uda(uda) => self.sds_uda.get(sds) == Some(uda),
            })
            .map(|((_, sds), cell)| (sds, cell))
            .collect();
        if in_scope.is_empty() {
            return Err(IndicatorError::EmptyStaff {
                university: university_id.clone(),
                scope: scope.to_string(),
            });
        }
        let scope_salary: f64 = in_scope.iter().map(|(_, c)| c.salary).sum();
        if scope_salary <= 0.0 {
            return Err(IndicatorError::ZeroSalary {
                university: university_id.clone(),
                scope: scope.to_string(),
            });
        }

        let mut dropped_sds = Vec::new();
        let mut terms = Vec::new();
        for (sds, cell) in in_scope {
            let national = self.national_mean_fss(sds)?;
            if national <= 0.0 {
                dropped_sds.push(sds.clone());
            } else if cell.salary > 0.0 {
                terms.push((cell.numerator / cell.salary / national, cell.salary));
            }
        }
        let weight_total: f64 = terms.iter().map(|(_, w)| w).sum();
        let fss_value = if weight_total > 0.0 {
            terms.iter().map(|(v, w)| v * w).sum::<f64>() / weight_total
        } else {
            0.0
        };
        Ok(InstitutionProductivity {
            university_id: university_id.clone(),
            scope: scope.clone(),
            fss_value,
            total_salary: scope_salary,
            dropped_sds,
        })
    }

    /// (university, sds) pairs with staff, in order.
    pub fn cells(&self) -> impl Iterator<Item = (&UniversityId, &str)> {
        self.cells.keys().map(|(u, s)| (u, s.as_str()))
    }

    pub fn sds_codes(&self) -> impl Iterator<Item = &str> {
        self.sds_uda.keys().map(String::as_str)
    }
}
