//! Knowledge-graph ingestion: triple files, relation templates, and the
//! indexed in-memory store the poisoner draws replacement entities from.
//!
//! File formats:
//! - Triple file: UTF-8, LF or CRLF, `subject<TAB>predicate<TAB>object` per
//!   line. Blank lines and lines whose first character is `#` are skipped.
//! - Template file: UTF-8, `predicate<TAB>pattern` per line, where the
//!   pattern contains the placeholders `[X]` and `[Y]` exactly once each.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Read;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::seeding;

/// A (subject, predicate, object) fact from a knowledge graph.
///
/// Serializes as a 3-element array, which keeps the JSON-lines checkpoints
/// compact.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triplet {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl Triplet {
    /// Validated constructor: every field nonempty and free of tabs/newlines.
    pub fn new(
        subject: impl Into<String>,
        predicate: impl Into<String>,
        object: impl Into<String>,
    ) -> Result<Self, KgError> {
        let t = Self {
            subject: subject.into(),
            predicate: predicate.into(),
            object: object.into(),
        };
        for (name, value) in [
            ("subject", &t.subject),
            ("predicate", &t.predicate),
            ("object", &t.object),
        ] {
            if value.is_empty() || value.contains(['\t', '\n', '\r']) {
                return Err(KgError::InvalidField { field: name });
            }
        }
        Ok(t)
    }

    fn to_tsv_line(&self) -> String {
        format!("{}\t{}\t{}", self.subject, self.predicate, self.object)
    }
}

impl fmt::Display for Triplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.subject, self.predicate, self.object)
    }
}

impl Serialize for Triplet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        (&self.subject, &self.predicate, &self.object).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Triplet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let (subject, predicate, object) = <(String, String, String)>::deserialize(deserializer)?;
        Triplet::new(subject, predicate, object).map_err(D::Error::custom)
    }
}

/// A sentence pattern for one predicate, e.g. `[X]'s place of birth is [Y].`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationTemplate {
    pub predicate: String,
    pub pattern: String,
}

impl RelationTemplate {
    /// Validated constructor: the pattern must contain `[X]` and `[Y]`
    /// exactly once each.
    pub fn new(
        predicate: impl Into<String>,
        pattern: impl Into<String>,
    ) -> Result<Self, KgError> {
        let t = Self {
            predicate: predicate.into(),
            pattern: pattern.into(),
        };
        if t.predicate.is_empty() {
            return Err(KgError::InvalidField { field: "predicate" });
        }
        if t.pattern.matches("[X]").count() != 1 || t.pattern.matches("[Y]").count() != 1 {
            return Err(KgError::MalformedTemplate {
                line: 0,
                predicate: t.predicate.clone(),
            });
        }
        Ok(t)
    }
}

/// A duplicate-predicate override observed while parsing a template file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateOverride {
    pub predicate: String,
    pub first_line: usize,
    pub second_line: usize,
}

/// Parsed template file: the predicate -> template map plus any override
/// warnings the caller should record in the run log.
#[derive(Debug, Clone, Default)]
pub struct TemplateSet {
    templates: BTreeMap<String, RelationTemplate>,
    pub overrides: Vec<TemplateOverride>,
}

impl TemplateSet {
    pub fn get(&self, predicate: &str) -> Option<&RelationTemplate> {
        self.templates.get(predicate)
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn insert(&mut self, template: RelationTemplate) {
        self.templates.insert(template.predicate.clone(), template);
    }
}

/// Errors from parsing and sampling.
#[derive(Debug, thiserror::Error)]
pub enum KgError {
    #[error("line {line}: expected exactly three nonempty tab-separated fields")]
    MalformedLine { line: usize },
    #[error("line {line}: template for '{predicate}' must contain [X] and [Y] exactly once each")]
    MalformedTemplate { line: usize, predicate: String },
    #[error("invalid UTF-8 at byte offset {offset}")]
    InvalidUtf8 { offset: usize },
    #[error("triplet {field} may not be empty or contain tabs/newlines")]
    InvalidField { field: &'static str },
    #[error("requested sample of {requested} but the store holds {available} distinct triples")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn read_utf8(mut reader: impl Read) -> Result<String, KgError> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    match String::from_utf8(bytes) {
        Ok(text) => Ok(text),
        Err(e) => Err(KgError::InvalidUtf8 {
            offset: e.utf8_error().valid_up_to(),
        }),
    }
}

/// Split a line of text into lines, tolerating CRLF.
fn logical_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split('\n')
        .enumerate()
        .map(|(i, line)| (i + 1, line.strip_suffix('\r').unwrap_or(line)))
}

fn is_skippable(line: &str) -> bool {
    line.trim().is_empty() || line.starts_with('#')
}

/// Parse a TSV triple stream. Input order is preserved; blank lines and lines
/// starting with `#` are skipped. Fields are taken verbatim (no trimming).
pub fn parse_triples(reader: impl Read) -> Result<Vec<Triplet>, KgError> {
    let text = read_utf8(reader)?;
    let mut triples = Vec::new();
    for (line_no, line) in logical_lines(&text) {
        if is_skippable(line) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(KgError::MalformedLine { line: line_no });
        }
        triples.push(
            Triplet::new(fields[0], fields[1], fields[2])
                .map_err(|_| KgError::MalformedLine { line: line_no })?,
        );
    }
    Ok(triples)
}

/// Serialize triples back to TSV (round-trips through [`parse_triples`]).
pub fn triples_to_tsv(triples: &[Triplet]) -> String {
    let mut out = String::new();
    for t in triples {
        out.push_str(&t.to_tsv_line());
        out.push('\n');
    }
    out
}

/// Parse a template file. Later duplicates override earlier entries, with the
/// override recorded so the caller can log a warning.
pub fn parse_templates(reader: impl Read) -> Result<TemplateSet, KgError> {
    let text = read_utf8(reader)?;
    let mut set = TemplateSet::default();
    let mut first_seen: BTreeMap<String, usize> = BTreeMap::new();
    for (line_no, line) in logical_lines(&text) {
        if is_skippable(line) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
            return Err(KgError::MalformedLine { line: line_no });
        }
        let template = RelationTemplate::new(fields[0], fields[1]).map_err(|e| match e {
            KgError::MalformedTemplate { predicate, .. } => KgError::MalformedTemplate {
                line: line_no,
                predicate,
            },
            other => other,
        })?;
        if let Some(&first) = first_seen.get(&template.predicate) {
            set.overrides.push(TemplateOverride {
                predicate: template.predicate.clone(),
                first_line: first,
                second_line: line_no,
            });
        } else {
            first_seen.insert(template.predicate.clone(), line_no);
        }
        set.insert(template);
    }
    Ok(set)
}

/// Indexed, immutable triple store.
///
/// `triples` keeps the input order including duplicates; membership and the
/// per-predicate entity pools are deduplicated. Entity pools preserve
/// first-occurrence order so that indexed draws are deterministic.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraphStore {
    triples: Vec<Triplet>,
    distinct: Vec<Triplet>,
    membership: HashSet<Triplet>,
    subjects_by_predicate: BTreeMap<String, Vec<String>>,
    objects_by_predicate: BTreeMap<String, Vec<String>>,
    predicates: Vec<String>,
}

impl KnowledgeGraphStore {
    pub fn build(triples: Vec<Triplet>) -> Self {
        let mut store = Self {
            triples: Vec::with_capacity(triples.len()),
            ..Self::default()
        };
        let mut seen_subjects: HashSet<(String, String)> = HashSet::new();
        let mut seen_objects: HashSet<(String, String)> = HashSet::new();
        let mut seen_predicates: HashSet<String> = HashSet::new();
        for t in triples {
            if store.membership.insert(t.clone()) {
                store.distinct.push(t.clone());
            }
            if seen_predicates.insert(t.predicate.clone()) {
                store.predicates.push(t.predicate.clone());
            }
            if seen_subjects.insert((t.predicate.clone(), t.subject.clone())) {
                store
                    .subjects_by_predicate
                    .entry(t.predicate.clone())
                    .or_default()
                    .push(t.subject.clone());
            }
            if seen_objects.insert((t.predicate.clone(), t.object.clone())) {
                store
                    .objects_by_predicate
                    .entry(t.predicate.clone())
                    .or_default()
                    .push(t.object.clone());
            }
            store.triples.push(t);
        }
        store
    }

    /// Exact membership test over (subject, predicate, object).
    pub fn contains(&self, triple: &Triplet) -> bool {
        self.membership.contains(triple)
    }

    /// All stored triples in input order, duplicates included.
    pub fn triples(&self) -> &[Triplet] {
        &self.triples
    }

    /// Distinct triples in first-occurrence order.
    pub fn distinct_triples(&self) -> &[Triplet] {
        &self.distinct
    }

    /// Number of distinct triples.
    pub fn len(&self) -> usize {
        self.distinct.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distinct.is_empty()
    }

    pub fn subjects(&self, predicate: &str) -> &[String] {
        self.subjects_by_predicate
            .get(predicate)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn objects(&self, predicate: &str) -> &[String] {
        self.objects_by_predicate
            .get(predicate)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn predicates(&self) -> &[String] {
        &self.predicates
    }
}

/// Draw `n` distinct triples with the keyed permutation documented in
/// [`crate::seeding`]. Identical `(store, n, seed)` always yields the same
/// list.
pub fn sample_triples(
    store: &KnowledgeGraphStore,
    n: usize,
    seed: u64,
) -> Result<Vec<Triplet>, KgError> {
    let pool = store.distinct_triples();
    if n > pool.len() {
        return Err(KgError::SampleTooLarge {
            requested: n,
            available: pool.len(),
        });
    }
    Ok(seeding::permutation(pool.len(), seed)
        .into_iter()
        .take(n)
        .map(|i| pool[i].clone())
        .collect())
}
