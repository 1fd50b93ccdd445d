//! Institutional ranking lists, quartiles, and the statistics used to
//! compare two lists: rank and quartile shifts, score and rank correlation,
//! and the share of first-quartile institutions that lose that status.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::UniversityId;
use crate::format::{sig6, sig6_opt, sig6_string};
use crate::rules::{penalty_for, PenaltyEvent, RuleSet};
use crate::selection::SelectionResult;

#[derive(Debug, Error)]
pub enum RankingError {
    #[error("ranking list {0} is empty after exclusion")]
    Empty(String),
    #[error("lists share {0} universities, at least 2 needed")]
    TooFewShared(usize),
    #[error("correlation needs at least 2 paired values, got {0}")]
    TooShort(usize),
    #[error("correlation inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("zero variance: correlation undefined")]
    DegenerateVariance,
    #[error("university {0} has non-finite score")]
    NonFinite(UniversityId),
    #[error("duplicate university {0} in ranking list")]
    Duplicate(UniversityId),
    #[error("ranking CSV: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Vqr,
    FaiiTopK,
    Fss,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Vqr, Scenario::FaiiTopK, Scenario::Fss];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Vqr => "vqr",
            Scenario::FaiiTopK => "faii_top_k",
            Scenario::Fss => "fss",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| format!("unknown scenario {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingEntry {
    pub university_id: UniversityId,
    pub score: f64,
    pub rank: u32,
    pub quartile: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingList {
    /// Area code, or `overall`.
    pub scope: String,
    pub scenario: Option<Scenario>,
    /// Sorted by descending score, ties by university id.
    pub entries: Vec<RankingEntry>,
}

impl RankingList {
    /// Ranks `scores` (competition ranking, ties share the better rank) and
    /// assigns quartiles.
    pub fn from_scores(
        scope: impl Into<String>,
        scenario: Option<Scenario>,
        scores: Vec<(UniversityId, f64)>,
    ) -> Result<Self, RankingError> {
        let scope = scope.into();
        let mut scores = scores;
        for (u, s) in &scores {
            if !s.is_finite() {
                return Err(RankingError::NonFinite(u.clone()));
            }
        }
        scores.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        for w in scores.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(RankingError::Duplicate(w[0].0.clone()));
            }
        }
        if scores.is_empty() {
            return Err(RankingError::Empty(scope));
        }
        let values: Vec<f64> = scores.iter().map(|s| s.1).collect();
        let ranks = competition_ranks(&values);
        let quartiles = assign_quartiles(ranks.len(), &ranks);
        let entries = scores
            .into_iter()
            .zip(ranks.into_iter().zip(quartiles))
            .map(|((university_id, score), (rank, quartile))| RankingEntry {
                university_id,
                score,
                rank,
                quartile,
            })
            .collect();
        Ok(Self {
            scope,
            scenario,
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, university_id: &UniversityId) -> Option<&RankingEntry> {
        self.entries.iter().find(|e| &e.university_id == university_id)
    }

    /// CSV with columns `university_id,score,rank,quartile`; scores carry six
    /// significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), RankingError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["university_id", "score", "rank", "quartile"])?;
        for e in &self.entries {
            wtr.write_record([
                e.university_id.as_str(),
                &sig6_string(e.score),
                &e.rank.to_string(),
                &e.quartile.to_string(),
            ])?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads a list written by [`RankingList::write_csv`]. Ranks and
    /// quartiles are recomputed from the scores.
    pub fn read_csv<R: Read>(reader: R, scope: impl Into<String>) -> Result<Self, RankingError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut scores = Vec::new();
        for row in rdr.deserialize() {
            let e: RankingEntry = row?;
            scores.push((e.university_id, e.score));
        }
        Self::from_scores(scope, None, scores)
    }
}

/// Competition ranks of `scores` taken in descending order: equal scores
/// share the smallest rank of their group. Output is in input order.
pub fn competition_ranks(scores: &[f64]) -> Vec<u32> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0; scores.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = if pos > 0 && scores[order[pos - 1]] == scores[i] {
            ranks[order[pos - 1]]
        } else {
            pos as u32 + 1
        };
    }
    ranks
}

/// `ceil(4 * rank / n)` for every rank.
pub fn assign_quartiles(n: usize, ranks: &[u32]) -> Vec<u8> {
    assert!(n >= 1, "quartiles of an empty list");
    ranks
        .iter()
        .map(|&r| (4 * r as usize).div_ceil(n).clamp(1, 4) as u8)
        .collect()
}

/// Score of a university's selection: total weight plus missing-product
/// penalties, divided by the products due. `None` when nothing is due.
pub fn university_vqr_score(selection: &SelectionResult, products_due: u32, ruleset: &RuleSet) -> Option<f64> {
    (products_due > 0).then(|| {
        let penalty = selection.missing as f64 * penalty_for(ruleset, PenaltyEvent::MissingProduct);
        (selection.total_weight + penalty) / products_due as f64
    })
}

/// Ranks the universities whose staff count reaches `threshold`.
pub fn build_ranking(
    scores: &BTreeMap<UniversityId, f64>,
    staff_counts: &BTreeMap<UniversityId, u32>,
    threshold: u32,
    scope: &str,
    scenario: Scenario,
) -> Result<RankingList, RankingError> {
    let kept = scores
        .iter()
        .filter(|(u, _)| staff_counts.get(*u).copied().unwrap_or(0) >= threshold)
        .map(|(u, s)| (u.clone(), *s))
        .collect();
    RankingList::from_scores(scope, Some(scenario), kept)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationKind {
    Pearson,
    Spearman,
}

/// Midranks (average rank of ties), ascending, 1-based.
pub fn midranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = mid;
        }
        i = j + 1;
    }
    out
}

pub fn correlation(xs: &[f64], ys: &[f64], kind: CorrelationKind) -> Result<f64, RankingError> {
    if xs.len() != ys.len() {
        return Err(RankingError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(RankingError::TooShort(xs.len()));
    }
    match kind {
        CorrelationKind::Pearson => pearson(xs, ys),
        CorrelationKind::Spearman => pearson(&midranks(xs), &midranks(ys)),
    }
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, RankingError> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(RankingError::DegenerateVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankShiftStats {
    #[serde(rename = "% shifting rank", serialize_with = "sig6")]
    pub pct_shifting_rank: f64,
    #[serde(rename = "Average shift", serialize_with = "sig6")]
    pub avg_shift: f64,
    #[serde(rename = "Median shift", serialize_with = "sig6")]
    pub median_shift: f64,
    #[serde(rename = "Max shift")]
    pub max_shift: u32,
    /// Pearson correlation of scores; `None` when a list has constant scores.
    #[serde(rename = "Score correlation", serialize_with = "sig6_opt")]
    pub score_correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuartileShiftStats {
    #[serde(rename = "% shifting quartile", serialize_with = "sig6")]
    pub pct_shifting_quartile: f64,
    #[serde(rename = "Average shift", serialize_with = "sig6")]
    pub avg_q_shift: f64,
    #[serde(rename = "Median shift", serialize_with = "sig6")]
    pub median_q_shift: f64,
    #[serde(rename = "Max shift")]
    pub max_q_shift: u32,
    /// Spearman correlation of quartile labels.
    #[serde(rename = "Correlat.", serialize_with = "sig6_opt")]
    pub quartile_correlation: Option<f64>,
    /// Percent of list A's first quartile outside list B's first quartile;
    /// `None` when A has no first quartile (fewer than four universities).
    #[serde(rename = "From top to non-top", serialize_with = "sig6_opt")]
    pub top_to_nontop: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scope: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub list_a: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub list_b: Option<String>,
    #[serde(rename = "No. of universities")]
    pub n: usize,
    pub ranks: RankShiftStats,
    pub quartiles: QuartileShiftStats,
}

fn shift_summary(shifts: &[u32]) -> (f64, f64, f64, u32) {
    let n = shifts.len() as f64;
    let moved = shifts.iter().filter(|&&s| s > 0).count() as f64;
    let avg = shifts.iter().map(|&s| s as f64).sum::<f64>() / n;
    let mut sorted = shifts.to_vec();
    sorted.sort_unstable();
    let mid = sorted.len() / 2;
    let median = if sorted.len().is_multiple_of(2) {
        (sorted[mid - 1] + sorted[mid]) as f64 / 2.0
    } else {
        sorted[mid] as f64
    };
    (100.0 * moved / n, avg, median, sorted.last().copied().unwrap_or(0))
}

/// Compares two lists over the universities they share. Both lists are
/// re-ranked and re-quartiled within the shared set first.
pub fn compare(list_a: &RankingList, list_b: &RankingList) -> Result<ComparisonReport, RankingError> {
    let b_scores: HashMap<&UniversityId, f64> = list_b.entries.iter().map(|e| (&e.university_id, e.score)).collect();
    let mut shared: Vec<(&UniversityId, f64, f64)> = list_a
        .entries
        .iter()
        .filter_map(|e| b_scores.get(&e.university_id).map(|&b| (&e.university_id, e.score, b)))
        .collect();
    if shared.len() < 2 {
        return Err(RankingError::TooFewShared(shared.len()));
    }
    shared.sort_by(|x, y| x.0.cmp(y.0));
    let n = shared.len();
    let a: Vec<f64> = shared.iter().map(|s| s.1).collect();
    let b: Vec<f64> = shared.iter().map(|s| s.2).collect();
    let (ra, rb) = (competition_ranks(&a), competition_ranks(&b));
    let (qa, qb) = (assign_quartiles(n, &ra), assign_quartiles(n, &rb));

    let rank_shifts: Vec<u32> = ra.iter().zip(&rb).map(|(x, y)| x.abs_diff(*y)).collect();
    let q_shifts: Vec<u32> = qa.iter().zip(&qb).map(|(x, y)| x.abs_diff(*y) as u32).collect();
    let (pct_r, avg_r, med_r, max_r) = shift_summary(&rank_shifts);
    let (pct_q, avg_q, med_q, max_q) = shift_summary(&q_shifts);

    let top_a = qa.iter().filter(|&&q| q == 1).count();
    let lost = qa.iter().zip(&qb).filter(|(&x, &y)| x == 1 && y != 1).count();
    let qa_f: Vec<f64> = qa.iter().map(|&q| q as f64).collect();
    let qb_f: Vec<f64> = qb.iter().map(|&q| q as f64).collect();

    Ok(ComparisonReport {
        scope: None,
        list_a: None,
        list_b: None,
        n,
        ranks: RankShiftStats {
            pct_shifting_rank: pct_r,
            avg_shift: avg_r,
            median_shift: med_r,
            max_shift: max_r,
            score_correlation: correlation(&a, &b, CorrelationKind::Pearson).ok(),
        },
        quartiles: QuartileShiftStats {
            pct_shifting_quartile: pct_q,
            avg_q_shift: avg_q,
            median_q_shift: med_q,
            max_q_shift: max_q,
            quartile_correlation: correlation(&qa_f, &qb_f, CorrelationKind::Spearman).ok(),
            top_to_nontop: (top_a > 0).then(|| 100.0 * lost as f64 / top_a as f64),
        },
    })
}
