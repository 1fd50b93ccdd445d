//! Corpus data model: universities, researchers, publications and the
//! authorship bylines that link them, plus CSV loading and writing.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Reserved `author_key` for co-authors outside the assessed population.
pub const EXTERNAL_AUTHOR: &str = "EXT";

/// Largest number of products a researcher can owe.
pub const MAX_QUOTA: u32 = 6;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

id_type!(
    /// Identifier of an assessed institution.
    UniversityId
);
id_type!(
    /// Identifier of an assessed researcher.
    ResearcherId
);
id_type!(
    /// Identifier of a publication.
    PublicationId
);

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: u64, message: String },
    #[error("reference error: {0}")]
    Reference(String),
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct University {
    pub id: UniversityId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Researcher {
    pub id: ResearcherId,
    pub university_id: UniversityId,
    /// Scientific disciplinary sector (fine-grained field).
    pub sds: String,
    /// Disciplinary area the sector belongs to.
    pub uda: String,
    /// Products due in the exercise.
    pub quota: u32,
    /// Salary over the observed period, already adjusted for partial presence.
    pub salary: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocType {
    Article,
    Review,
    Proceedings,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Publication {
    pub id: PublicationId,
    pub year: i32,
    pub subject_category: String,
    pub doc_type: DocType,
    /// Citations at the census date, self-citations included.
    pub citations: u64,
    /// Impact-factor-like journal indicator; `None` when the source has none.
    pub journal_metric: Option<f64>,
    /// Whether the publication is covered by the bibliographic index.
    pub indexed: bool,
}

/// Byline slot holder: an assessed researcher or an external co-author.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AuthorKey {
    Internal(ResearcherId),
    External,
}

impl AuthorKey {
    pub fn researcher(&self) -> Option<&ResearcherId> {
        match self {
            AuthorKey::Internal(id) => Some(id),
            AuthorKey::External => None,
        }
    }

    pub fn is_external(&self) -> bool {
        matches!(self, AuthorKey::External)
    }
}

impl Serialize for AuthorKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            AuthorKey::Internal(id) => serializer.serialize_str(id.as_str()),
            AuthorKey::External => serializer.serialize_str(EXTERNAL_AUTHOR),
        }
    }
}

impl<'de> Deserialize<'de> for AuthorKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        if s.is_empty() {
            return Err(serde::de::Error::custom("empty author_key"));
        }
        Ok(if s == EXTERNAL_AUTHOR {
            AuthorKey::External
        } else {
            AuthorKey::Internal(ResearcherId(s))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Authorship {
    pub publication_id: PublicationId,
    pub author_key: AuthorKey,
    /// 1-based position in the byline.
    pub byline_position: u32,
    pub total_authors: u32,
}

/// File locations of the four corpus tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusPaths {
    pub universities: PathBuf,
    pub researchers: PathBuf,
    pub publications: PathBuf,
    pub authorships: PathBuf,
}

impl CorpusPaths {
    pub const UNIVERSITIES: &'static str = "universities.csv";
    pub const RESEARCHERS: &'static str = "researchers.csv";
    pub const PUBLICATIONS: &'static str = "publications.csv";
    pub const AUTHORSHIPS: &'static str = "authorships.csv";

    /// The conventional file names inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            universities: dir.join(Self::UNIVERSITIES),
            researchers: dir.join(Self::RESEARCHERS),
            publications: dir.join(Self::PUBLICATIONS),
            authorships: dir.join(Self::AUTHORSHIPS),
        }
    }
}

const UNIVERSITY_COLUMNS: &[&str] = &["id", "name"];
const RESEARCHER_COLUMNS: &[&str] = &["id", "university_id", "sds", "uda", "quota", "salary"];
const PUBLICATION_COLUMNS: &[&str] = &[
    "id",
    "year",
    "subject_category",
    "doc_type",
    "citations",
    "journal_metric",
    "indexed",
];
const AUTHORSHIP_COLUMNS: &[&str] = &["publication_id", "author_key", "byline_position", "total_authors"];

/// A cross-validated, immutable corpus.
///
/// Tables are kept sorted (entities by id, authorships by publication then
/// byline position), so equal inputs always produce equal corpora regardless
/// of row order.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    universities: Vec<University>,
    researchers: Vec<Researcher>,
    publications: Vec<Publication>,
    authorships: Vec<Authorship>,
    window: (i32, i32),
    university_index: HashMap<UniversityId, usize>,
    researcher_index: HashMap<ResearcherId, usize>,
    publication_index: HashMap<PublicationId, usize>,
    /// Authorship indices per publication, in byline order.
    bylines: HashMap<PublicationId, Vec<usize>>,
    /// Authorship indices per researcher, in publication order.
    by_researcher: HashMap<ResearcherId, Vec<usize>>,
}

impl Corpus {
    /// Validates and indexes the four tables. `window` is the inclusive
    /// range of admissible publication years.
    pub fn new(
        mut universities: Vec<University>,
        mut researchers: Vec<Researcher>,
        mut publications: Vec<Publication>,
        mut authorships: Vec<Authorship>,
        window: (i32, i32),
    ) -> Result<Self, CorpusError> {
        if window.0 > window.1 {
            return Err(CorpusError::Domain(format!(
                "empty year window {}..{}",
                window.0, window.1
            )));
        }
        universities.sort_by(|a, b| a.id.cmp(&b.id));
        researchers.sort_by(|a, b| a.id.cmp(&b.id));
        publications.sort_by(|a, b| a.id.cmp(&b.id));
        authorships.sort_by(|a, b| (&a.publication_id, a.byline_position).cmp(&(&b.publication_id, b.byline_position)));

        let university_index = unique_index(&universities, |u| &u.id, "university")?;
        let researcher_index = unique_index(&researchers, |r| &r.id, "researcher")?;
        let publication_index = unique_index(&publications, |p| &p.id, "publication")?;

        let mut sds_uda: HashMap<&str, &str> = HashMap::new();
        for r in &researchers {
            if r.id.as_str() == EXTERNAL_AUTHOR {
                return Err(CorpusError::Domain(format!(
                    "researcher id {EXTERNAL_AUTHOR:?} is reserved for external authors"
                )));
            }
            if !university_index.contains_key(&r.university_id) {
                return Err(CorpusError::Reference(format!(
                    "researcher {} references unknown university {}",
                    r.id, r.university_id
                )));
            }
            if r.quota > MAX_QUOTA {
                return Err(CorpusError::Domain(format!(
                    "researcher {} has quota {} (maximum {MAX_QUOTA})",
                    r.id, r.quota
                )));
            }
            if !(r.salary.is_finite() && r.salary >= 0.0) {
                return Err(CorpusError::Domain(format!(
                    "researcher {} has invalid salary {}",
                    r.id, r.salary
                )));
            }
            match sds_uda.insert(&r.sds, &r.uda) {
                Some(prev) if prev != r.uda => {
                    return Err(CorpusError::Domain(format!(
                        "sds {} mapped to both {} and {}",
                        r.sds, prev, r.uda
                    )))
                }
                _ => {}
            }
        }

        for p in &publications {
            if p.year < window.0 || p.year > window.1 {
                return Err(CorpusError::Domain(format!(
                    "publication {} year {} outside window {}..={}",
                    p.id, p.year, window.0, window.1
                )));
            }
            if let Some(m) = p.journal_metric {
                if !(m.is_finite() && m >= 0.0) {
                    return Err(CorpusError::Domain(format!(
                        "publication {} has invalid journal metric {m}",
                        p.id
                    )));
                }
            }
        }

        let mut bylines: HashMap<PublicationId, Vec<usize>> = HashMap::new();
        let mut by_researcher: HashMap<ResearcherId, Vec<usize>> = HashMap::new();
        let mut totals: HashMap<&PublicationId, u32> = HashMap::new();
        let mut seen_authors: HashSet<(&PublicationId, &ResearcherId)> = HashSet::new();
        for (i, a) in authorships.iter().enumerate() {
            if !publication_index.contains_key(&a.publication_id) {
                return Err(CorpusError::Reference(format!(
                    "authorship references unknown publication {}",
                    a.publication_id
                )));
            }
            if a.total_authors == 0 || a.byline_position == 0 || a.byline_position > a.total_authors {
                return Err(CorpusError::Domain(format!(
                    "publication {}: byline position {} with {} total authors",
                    a.publication_id, a.byline_position, a.total_authors
                )));
            }
            match totals.insert(&a.publication_id, a.total_authors) {
                Some(prev) if prev != a.total_authors => {
                    return Err(CorpusError::Domain(format!(
                        "publication {}: inconsistent total_authors {} and {}",
                        a.publication_id, prev, a.total_authors
                    )))
                }
                _ => {}
            }
            // Sorted by (publication, position): duplicates are adjacent.
            if i > 0 {
                let prev = &authorships[i - 1];
                if prev.publication_id == a.publication_id && prev.byline_position == a.byline_position {
                    return Err(CorpusError::Reference(format!(
                        "publication {}: duplicate byline position {}",
                        a.publication_id, a.byline_position
                    )));
                }
            }
            if let AuthorKey::Internal(rid) = &a.author_key {
                if !researcher_index.contains_key(rid) {
                    return Err(CorpusError::Reference(format!(
                        "publication {} references unknown researcher {}",
                        a.publication_id, rid
                    )));
                }
                if !seen_authors.insert((&a.publication_id, rid)) {
                    return Err(CorpusError::Reference(format!(
                        "researcher {} appears twice on publication {}",
                        rid, a.publication_id
                    )));
                }
                by_researcher.entry(rid.clone()).or_default().push(i);
            }
            bylines.entry(a.publication_id.clone()).or_default().push(i);
        }

        Ok(Self {
            universities,
            researchers,
            publications,
            authorships,
            window,
            university_index,
            researcher_index,
            publication_index,
            bylines,
            by_researcher,
        })
    }

    pub fn universities(&self) -> &[University] {
        &self.universities
    }

    pub fn researchers(&self) -> &[Researcher] {
        &self.researchers
    }

    pub fn publications(&self) -> &[Publication] {
        &self.publications
    }

    pub fn authorships(&self) -> &[Authorship] {
        &self.authorships
    }

    pub fn window(&self) -> (i32, i32) {
        self.window
    }

    pub fn university(&self, id: &UniversityId) -> Option<&University> {
        self.university_index.get(id).map(|&i| &self.universities[i])
    }

    pub fn researcher(&self, id: &ResearcherId) -> Option<&Researcher> {
        self.researcher_index.get(id).map(|&i| &self.researchers[i])
    }

    pub fn publication(&self, id: &PublicationId) -> Option<&Publication> {
        self.publication_index.get(id).map(|&i| &self.publications[i])
    }

    /// Byline of a publication, ordered by position. Only positions present
    /// in the authorship table are returned.
    pub fn authors_of(&self, publication_id: &PublicationId) -> Result<Vec<&Authorship>, CorpusError> {
        if !self.publication_index.contains_key(publication_id) {
            return Err(CorpusError::Reference(format!("unknown publication {publication_id}")));
        }
        Ok(self
            .bylines
            .get(publication_id)
            .map(|idx| idx.iter().map(|&i| &self.authorships[i]).collect())
            .unwrap_or_default())
    }

    /// Authorships held by one researcher, ordered by publication id.
    pub fn authorships_of(&self, researcher_id: &ResearcherId) -> impl Iterator<Item = &Authorship> {
        self.by_researcher
            .get(researcher_id)
            .into_iter()
            .flatten()
            .map(|&i| &self.authorships[i])
    }

    pub fn researchers_of<'a>(&'a self, university_id: &'a UniversityId) -> impl Iterator<Item = &'a Researcher> {
        self.researchers
            .iter()
            .filter(move |r| &r.university_id == university_id)
    }

    /// Affiliation of every byline position: the university of the internal
    /// author, `None` for external authors and for unrecorded positions.
    pub fn byline_affiliations(
        &self,
        publication_id: &PublicationId,
    ) -> Result<Vec<Option<UniversityId>>, CorpusError> {
        let byline = self.authors_of(publication_id)?;
        let total = byline.first().map_or(0, |a| a.total_authors) as usize;
        let mut out = vec![None; total];
        for a in byline {
            if let Some(rid) = a.author_key.researcher() {
                out[a.byline_position as usize - 1] = self.researcher(rid).map(|r| r.university_id.clone());
            }
        }
        Ok(out)
    }

    /// Map from sds code to its disciplinary area.
    pub fn sds_areas(&self) -> BTreeMap<&str, &str> {
        self.researchers
            .iter()
            .map(|r| (r.sds.as_str(), r.uda.as_str()))
            .collect()
    }
}

fn unique_index<T, K, F>(items: &[T], key: F, kind: &str) -> Result<HashMap<K, usize>, CorpusError>
where
    K: Clone + Eq + std::hash::Hash + fmt::Display,
    F: Fn(&T) -> &K,
{
    let mut index = HashMap::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        if index.insert(key(item).clone(), i).is_some() {
            return Err(CorpusError::Reference(format!("duplicate {kind} id {}", key(item))));
        }
    }
    Ok(index)
}

fn read_table<T: DeserializeOwned, R: Read>(reader: R, file: &str, columns: &[&str]) -> Result<Vec<T>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let parse_err = |line: u64, message: String| CorpusError::Parse {
        file: file.to_owned(),
        line,
        message,
    };
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.iter().ne(columns.iter().copied()) {
        return Err(parse_err(
            1,
            format!(
                "expected header {:?}, found {:?}",
                columns.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map_or(0, |p| p.line());
                let row = record
                    .deserialize(Some(&headers))
                    .map_err(|e| parse_err(line, e.to_string()))?;
                rows.push(row);
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Err(parse_err(line, e.to_string()));
            }
        }
    }
    Ok(rows)
}

fn open(path: &Path) -> Result<File, CorpusError> {
    File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Reads, cross-validates and indexes a corpus from its four CSV tables.
pub fn load_corpus(paths: &CorpusPaths, window: (i32, i32)) -> Result<Corpus, CorpusError> {
    let universities = read_table(
        open(&paths.universities)?,
        &file_label(&paths.universities),
        UNIVERSITY_COLUMNS,
    )?;
    let researchers = read_table(
        open(&paths.researchers)?,
        &file_label(&paths.researchers),
        RESEARCHER_COLUMNS,
    )?;
    let publications = read_table(
        open(&paths.publications)?,
        &file_label(&paths.publications),
        PUBLICATION_COLUMNS,
    )?;
    let authorships = read_table(
        open(&paths.authorships)?,
        &file_label(&paths.authorships),
        AUTHORSHIP_COLUMNS,
    )?;
    Corpus::new(universities, researchers, publications, authorships, window)
}

fn write_table<T: Serialize, W: Write>(writer: W, rows: &[T]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes the corpus as the four CSV tables into `dir` (created if needed).
pub fn write_corpus(corpus: &Corpus, dir: impl AsRef<Path>) -> Result<CorpusPaths, CorpusError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| CorpusError::Io {
        path: dir.to_owned(),
        source,
    })?;
    let paths = CorpusPaths::in_dir(dir);
    let create = |path: &Path| {
        File::create(path)
            .map(std::io::BufWriter::new)
            .map_err(|source| CorpusError::Io {
                path: path.to_owned(),
                source,
            })
    };
    let io_err = |path: &Path, e: csv::Error| CorpusError::Io {
        path: path.to_owned(),
        source: e.into(),
    };
    write_table(create(&paths.universities)?, &corpus.universities).map_err(|e| io_err(&paths.universities, e))?;
    write_table(create(&paths.researchers)?, &corpus.researchers).map_err(|e| io_err(&paths.researchers, e))?;
    write_table(create(&paths.publications)?, &corpus.publications).map_err(|e| io_err(&paths.publications, e))?;
    write_table(create(&paths.authorships)?, &corpus.authorships).map_err(|e| io_err(&paths.authorships, e))?;
    Ok(paths)
}
