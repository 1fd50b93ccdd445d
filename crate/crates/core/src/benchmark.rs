//! Reference distributions of citations and journal metrics per
//! (year, subject category, document-type group), and the percentile and
//! class queries built on them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, DocType, Publication};

#[derive(Debug, Error, PartialEq)]
pub enum BenchmarkError {
    #[error("merge map mentions unknown subject category {0}")]
    UnknownCategory(String),
    #[error("subject category {0} assigned to more than one merge group")]
    DuplicateCategory(String),
    #[error("reference distribution {0} has no {1} values")]
    EmptyAxis(ReferenceKey, Axis),
    #[error("percentile {0} outside [0, 100]")]
    OutOfRange(f64),
    #[error("no reference distribution for {0}")]
    MissingDistribution(ReferenceKey),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocTypeGroup {
    All,
    ArticleOnly,
    ReviewOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ReferenceKey {
    pub year: i32,
    /// Subject category, or the merge group it was collapsed into.
    pub subject_category: String,
    pub doc_type_group: DocTypeGroup,
}

impl fmt::Display for ReferenceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {:?})",
            self.year, self.subject_category, self.doc_type_group
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Citations,
    Metric,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Citations => "citation",
            Axis::Metric => "metric",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceDistribution {
    pub key: ReferenceKey,
    /// Sorted ascending.
    pub citation_values: Vec<u64>,
    /// Present journal metrics, sorted ascending.
    pub metric_values: Vec<f64>,
    /// Mean over strictly positive citation counts.
    pub mean_cited_citations: Option<f64>,
    pub mean_present_metric: Option<f64>,
}

impl ReferenceDistribution {
    pub fn new(key: ReferenceKey, mut citation_values: Vec<u64>, mut metric_values: Vec<f64>) -> Self {
        citation_values.sort_unstable();
        metric_values.sort_by(f64::total_cmp);
        let cited: Vec<u64> = citation_values.iter().copied().filter(|&c| c > 0).collect();
        let mean_cited_citations =
            (!cited.is_empty()).then(|| cited.iter().map(|&c| c as f64).sum::<f64>() / cited.len() as f64);
        let mean_present_metric =
            (!metric_values.is_empty()).then(|| metric_values.iter().sum::<f64>() / metric_values.len() as f64);
        Self {
            key,
            citation_values,
            metric_values,
            mean_cited_citations,
            mean_present_metric,
        }
    }

    pub fn len(&self, axis: Axis) -> usize {
        match axis {
            Axis::Citations => self.citation_values.len(),
            Axis::Metric => self.metric_values.len(),
        }
    }

    pub fn is_empty(&self, axis: Axis) -> bool {
        self.len(axis) == 0
    }

    /// Midrank percentile of `value`: `100 * (below + equal / 2) / n`.
    pub fn percentile(&self, value: f64, axis: Axis) -> Result<f64, BenchmarkError> {
        let (below, equal, n) = match axis {
            Axis::Citations => {
                let v = &self.citation_values;
                let below = v.partition_point(|&c| (c as f64) < value);
                let upto = v.partition_point(|&c| (c as f64) <= value);
                (below, upto - below, v.len())
            }
            Axis::Metric => {
                let v = &self.metric_values;
                let below = v.partition_point(|&m| m < value);
                let upto = v.partition_point(|&m| m <= value);
                (below, upto - below, v.len())
            }
        };
        if n == 0 {
            return Err(BenchmarkError::EmptyAxis(self.key.clone(), axis));
        }
        Ok(100.0 * (below as f64 + 0.5 * equal as f64) / n as f64)
    }
}

/// Percentile free function form of [`ReferenceDistribution::percentile`].
pub fn percentile(dist: &ReferenceDistribution, value: f64, which: Axis) -> Result<f64, BenchmarkError> {
    dist.percentile(value, which)
}

/// Quality class of a percentile: 1 is the top fifth, 4 is below the median.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PercentileClass(u8);

impl PercentileClass {
    pub const ALL: [PercentileClass; 4] = [Self(1), Self(2), Self(3), Self(4)];

    pub fn new(value: u8) -> Option<Self> {
        (1..=4).contains(&value).then_some(Self(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub(crate) fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl TryFrom<u8> for PercentileClass {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Self::new(value).ok_or_else(|| format!("percentile class {value} not in 1..=4"))
    }
}

impl From<PercentileClass> for u8 {
    fn from(c: PercentileClass) -> u8 {
        c.0
    }
}

/// Class boundaries are lower-inclusive: `[80, 100]` is class 1,
/// `[60, 80)` class 2, `[50, 60)` class 3 and `[0, 50)` class 4.
pub fn class_of(percentile: f64) -> Result<PercentileClass, BenchmarkError> {
    if !(0.0..=100.0).contains(&percentile) {
        return Err(BenchmarkError::OutOfRange(percentile));
    }
    Ok(PercentileClass(if percentile >= 80.0 {
        1
    } else if percentile >= 60.0 {
        2
    } else if percentile >= 50.0 {
        3
    } else {
        4
    }))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    /// Merge group name to the subject categories pooled into it.
    #[serde(default)]
    pub category_merge_map: BTreeMap<String, Vec<String>>,
    /// Disciplinary areas whose citation classes use separate article and
    /// review distributions.
    #[serde(default)]
    pub split_reviews: BTreeSet<String>,
}

/// All reference distributions built from one corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmarks {
    distributions: BTreeMap<ReferenceKey, ReferenceDistribution>,
    category_group: HashMap<String, String>,
    split_reviews: BTreeSet<String>,
}

impl Benchmarks {
    /// Builds one distribution per occupied key from the indexed
    /// publications of `corpus`.
    ///
    /// Every indexed publication lands in its `All` distribution. When any
    /// area asks for review splitting, the `ArticleOnly`/`ReviewOnly`
    /// distributions are built as well; which one a query uses depends on the
    /// area doing the scoring (see [`Benchmarks::citation_key`]).
    pub fn build(corpus: &Corpus, config: &BenchmarkConfig) -> Result<Self, BenchmarkError> {
        let known: BTreeSet<&str> = corpus
            .publications()
            .iter()
            .map(|p| p.subject_category.as_str())
            .collect();
        let mut category_group = HashMap::new();
        for (group, members) in &config.category_merge_map {
            for cat in members {
                if !known.contains(cat.as_str()) {
                    return Err(BenchmarkError::UnknownCategory(cat.clone()));
                }
                if category_group.insert(cat.clone(), group.clone()).is_some() {
                    return Err(BenchmarkError::DuplicateCategory(cat.clone()));
                }
            }
        }

        let mut this = Self {
            distributions: BTreeMap::new(),
            category_group,
            split_reviews: config.split_reviews.clone(),
        };
        let mut cells: BTreeMap<ReferenceKey, (Vec<u64>, Vec<f64>)> = BTreeMap::new();
        let split = !config.split_reviews.is_empty();
        for p in corpus.publications().iter().filter(|p| p.indexed) {
            let mut keys = vec![this.key_for(p, DocTypeGroup::All)];
            if split {
                keys.push(this.key_for(p, split_group(p.doc_type)));
            }
            for key in keys {
                let cell = cells.entry(key).or_default();
                cell.0.push(p.citations);
                if let Some(m) = p.journal_metric {
                    cell.1.push(m);
                }
            }
        }
        this.distributions = cells
            .into_iter()
            .map(|(k, (c, m))| (k.clone(), ReferenceDistribution::new(k, c, m)))
            .collect();
        Ok(this)
    }

    /// Subject category after merging.
    pub fn group_of<'a>(&'a self, category: &'a str) -> &'a str {
        self.category_group.get(category).map_or(category, String::as_str)
    }

    fn key_for(&self, p: &Publication, group: DocTypeGroup) -> ReferenceKey {
        ReferenceKey {
            year: p.year,
            subject_category: self.group_of(&p.subject_category).to_owned(),
            doc_type_group: group,
        }
    }

    /// Citation-axis key of a publication when scored for `uda`; `None`
    /// means no area-specific rule (the pooled `All` distribution).
    pub fn citation_key(&self, p: &Publication, uda: Option<&str>) -> ReferenceKey {
        match uda {
            Some(u) if self.split_reviews.contains(u) => self.key_for(p, split_group(p.doc_type)),
            _ => self.key_for(p, DocTypeGroup::All),
        }
    }

    /// Journal-metric key; document types are never split on this axis.
    pub fn metric_key(&self, p: &Publication) -> ReferenceKey {
        self.key_for(p, DocTypeGroup::All)
    }

    pub fn get(&self, key: &ReferenceKey) -> Result<&ReferenceDistribution, BenchmarkError> {
        self.distributions
            .get(key)
            .ok_or_else(|| BenchmarkError::MissingDistribution(key.clone()))
    }

    pub fn citation_distribution(
        &self,
        p: &Publication,
        uda: Option<&str>,
    ) -> Result<&ReferenceDistribution, BenchmarkError> {
        self.get(&self.citation_key(p, uda))
    }

    pub fn metric_distribution(&self, p: &Publication) -> Result<&ReferenceDistribution, BenchmarkError> {
        self.get(&self.metric_key(p))
    }

    pub fn iter(&self) -> impl Iterator<Item = &ReferenceDistribution> {
        self.distributions.values()
    }

    pub fn len(&self) -> usize {
        self.distributions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distributions.is_empty()
    }
}

/// Free function form of [`Benchmarks::build`].
pub fn build_benchmarks(corpus: &Corpus, config: &BenchmarkConfig) -> Result<Benchmarks, BenchmarkError> {
    Benchmarks::build(corpus, config)
}

fn split_group(doc_type: DocType) -> DocTypeGroup {
    match doc_type {
        DocType::Review => DocTypeGroup::ReviewOnly,
        _ => DocTypeGroup::ArticleOnly,
    }
}
