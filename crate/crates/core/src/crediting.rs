//! Fractional author credit: how much of a publication each byline
//! position is worth.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Authorship, Publication, UniversityId};

#[derive(Debug, Error, PartialEq)]
pub enum CreditError {
    #[error("publication has no authors")]
    NoAuthors,
    #[error("byline position {position} outside 1..={total}")]
    BadPosition { position: u32, total: u32 },
    #[error("affiliations cover {got} positions, byline has {total}")]
    AffiliationLength { got: usize, total: u32 },
    #[error("publication {0}: incomplete byline")]
    IncompleteByline(String),
}

/// Credit rule applied to one byline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CreditMode {
    /// Every author gets `1 / total_authors`.
    #[default]
    EqualSplit,
    /// Byline-position weighting used in the life sciences.
    LifeScienceByline,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CreditPolicy {
    pub mode: CreditMode,
    /// Areas the byline weighting applies to under `LifeScienceByline`.
    /// Empty means every area.
    #[serde(default)]
    pub life_science_udas: BTreeSet<String>,
}

impl CreditPolicy {
    pub fn equal_split() -> Self {
        Self::default()
    }

    /// The rule used for credits of a researcher in `uda`.
    pub fn mode_for(&self, uda: &str) -> CreditMode {
        match self.mode {
            CreditMode::LifeScienceByline
                if self.life_science_udas.is_empty() || self.life_science_udas.contains(uda) =>
            {
                CreditMode::LifeScienceByline
            }
            _ => CreditMode::EqualSplit,
        }
    }
}

/// Credit of byline `position` (1-based) among `affiliations.len()` authors.
///
/// `affiliations[i]` is the university of the author at position `i + 1`,
/// `None` for external authors.
pub fn fractional_credit(
    mode: CreditMode,
    position: u32,
    affiliations: &[Option<UniversityId>],
) -> Result<f64, CreditError> {
    let total = affiliations.len() as u32;
    if total == 0 {
        return Err(CreditError::NoAuthors);
    }
    if position == 0 || position > total {
        return Err(CreditError::BadPosition { position, total });
    }
    Ok(credits(mode, affiliations)[position as usize - 1])
}

/// Credits of every byline position; the vector sums to one.
pub fn credits(mode: CreditMode, affiliations: &[Option<UniversityId>]) -> Vec<f64> {
    let n = affiliations.len();
    match mode {
        CreditMode::EqualSplit => vec![1.0 / n as f64; n],
        CreditMode::LifeScienceByline => byline_credits(affiliations),
    }
}

fn byline_credits(affiliations: &[Option<UniversityId>]) -> Vec<f64> {
    let n = affiliations.len();
    if n <= 2 {
        return vec![1.0 / n as f64; n];
    }
    let same_university = matches!((&affiliations[0], &affiliations[n - 1]), (Some(a), Some(b)) if a == b);
    let mut out = vec![0.0; n];
    if same_university {
        out[0] = 0.4;
        out[n - 1] = 0.4;
        let share = 0.2 / (n - 2) as f64;
        out[1..n - 1].iter_mut().for_each(|c| *c = share);
        return out;
    }
    // First, second, second-to-last and last each hold a weight slot; with
    // three authors the middle position holds both inner slots.
    let slots = [(0, 0.3), (1, 0.15), (n - 2, 0.15), (n - 1, 0.3)];
    let interior = n.saturating_sub(4);
    for (pos, w) in slots {
        out[pos] += w;
    }
    if interior > 0 {
        let share = 0.1 / interior as f64;
        out[2..n - 2].iter_mut().for_each(|c| *c = share);
    } else {
        for (pos, _) in slots {
            out[pos] += 0.1 / 4.0;
        }
    }
    out
}

/// Credits of a whole byline. `authorships` must hold every position
/// `1..=total_authors` in order.
pub fn credit_vector(
    mode: CreditMode,
    publication: &Publication,
    authorships: &[&Authorship],
    affiliations: &[Option<UniversityId>],
) -> Result<Vec<f64>, CreditError> {
    let total = authorships.first().map_or(0, |a| a.total_authors);
    if total == 0 {
        return Err(CreditError::NoAuthors);
    }
    let complete = authorships.len() == total as usize
        && authorships
            .iter()
            .enumerate()
            .all(|(i, a)| a.byline_position as usize == i + 1 && a.publication_id == publication.id);
    if !complete {
        return Err(CreditError::IncompleteByline(publication.id.to_string()));
    }
    if affiliations.len() != total as usize {
        return Err(CreditError::AffiliationLength {
            got: affiliations.len(),
            total,
        });
    }
    Ok(credits(mode, affiliations))
}
