//! Simulation engine for national research-assessment exercises.
//!
//! The crate scores the products of a university system three ways and
//! measures how far the resulting institutional rankings drift apart:
//!
//! * `vqr`: a best-k subset of each researcher's output scored through
//!   two-indicator classification matrices ([`rules`]);
//! * `faii_top_k`: the same best-k subset scored by field-normalized,
//!   fractionally credited citation impact ([`indicators::faii`]);
//! * `fss`: salary-normalized productivity over the whole output
//!   ([`indicators::Productivity`]).
//!
//! Submission sets are chosen per university by an exact maximum-weight
//! assignment ([`selection`]), and rankings are compared with the shift and
//! correlation statistics in [`ranking`].

pub mod benchmark;
pub mod corpus;
pub mod crediting;
pub mod format;
pub mod indicators;
pub mod pipeline;
pub mod ranking;
pub mod rules;
pub mod selection;
pub mod synth;

pub use corpus::{
    AuthorKey, Authorship, Corpus, DocType, Publication, PublicationId, Researcher, ResearcherId, University,
    UniversityId,
};
