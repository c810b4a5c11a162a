//! Corpus records, the entity catalog and a synthetic corpus generator.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use hashbrown::HashSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Kinds of entity placed on the map. Clusters are handled separately by
/// [`crate::landmarks`] since they have no natural or latent representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityType {
    Article,
    Word,
    Author,
    Lab,
}

impl EntityType {
    pub const ALL: [EntityType; 4] = [Self::Article, Self::Word, Self::Author, Self::Lab];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Article => "article",
            Self::Word => "word",
            Self::Author => "author",
            Self::Lab => "lab",
        }
    }

    /// Layer name used for tile pyramids (`articles`, `authors`, ...).
    pub fn layer_name(self) -> &'static str {
        match self {
            Self::Article => "articles",
            Self::Word => "words",
            Self::Author => "authors",
            Self::Lab => "labs",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Accepts both the singular type name and the plural layer name.
    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s || t.layer_name() == s)
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One document of the input collection.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusRecord {
    pub doc_id: String,
    pub title: String,
    pub abstract_text: String,
    pub keywords: Vec<String>,
    pub pub_year: Option<i32>,
    pub domain_tag: Option<String>,
    pub authors: Vec<String>,
    pub labs: Vec<String>,
    pub views_per_year: Option<f64>,
}

impl CorpusRecord {
    pub fn new(doc_id: impl Into<String>, title: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            title: title.into(),
            ..Self::default()
        }
    }

    /// Trims names and drops repeated authors, labs and keywords while
    /// keeping first-occurrence order.
    pub fn normalize(&mut self) {
        dedup_trimmed(&mut self.authors);
        dedup_trimmed(&mut self.labs);
        dedup_trimmed(&mut self.keywords);
    }

    pub fn validate(&self) -> Result<()> {
        if self.doc_id.trim().is_empty() {
            return Err(Error::InvalidRecord {
                doc_id: self.doc_id.clone(),
                reason: "empty doc_id".into(),
            });
        }
        if let Some(y) = self.pub_year {
            if !(1900..=2100).contains(&y) {
                return Err(Error::InvalidRecord {
                    doc_id: self.doc_id.clone(),
                    reason: format!("pub_year {y} outside [1900, 2100]"),
                });
            }
        }
        if let Some(v) = self.views_per_year {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidRecord {
                    doc_id: self.doc_id.clone(),
                    reason: format!("views_per_year {v} is not a nonnegative number"),
                });
            }
        }
        Ok(())
    }

    /// True when the record carries no text at all (no title, abstract or keywords).
    pub fn is_textless(&self) -> bool {
        self.title.trim().is_empty()
            && self.abstract_text.trim().is_empty()
            && self.keywords.iter().all(|k| k.trim().is_empty())
    }

    /// Text fed to the tokenizer. Fields are joined with a period so that
    /// n-grams never span two fields.
    pub fn text(&self) -> String {
        let mut out = String::with_capacity(self.title.len() + self.abstract_text.len() + 16);
        out.push_str(&self.title);
        out.push_str(" . ");
        out.push_str(&self.abstract_text);
        for k in &self.keywords {
            out.push_str(" . ");
            out.push_str(k);
        }
        out
    }
}

fn dedup_trimmed(values: &mut Vec<String>) {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(values.len());
    for v in values.drain(..) {
        let t = v.trim();
        if t.is_empty() {
            continue;
        }
        if seen.insert(t.to_string()) {
            out.push(t.to_string());
        }
    }
    *values = out;
}

/// A catalog entry. `doc_refs` holds article ids, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub id: u32,
    pub kind: EntityType,
    pub label: String,
    pub doc_refs: Vec<u32>,
}

/// Articles, authors, labs (and, once vectorized, words) with dense ids per type.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityCatalog {
    pub articles: Vec<Entity>,
    pub words: Vec<Entity>,
    pub authors: Vec<Entity>,
    pub labs: Vec<Entity>,
    pub min_docs: usize,
}

impl EntityCatalog {
    pub fn n_articles(&self) -> usize {
        self.articles.len()
    }

    pub fn of_type(&self, kind: EntityType) -> &[Entity] {
        match kind {
            EntityType::Article => &self.articles,
            EntityType::Word => &self.words,
            EntityType::Author => &self.authors,
            EntityType::Lab => &self.labs,
        }
    }

    pub fn count(&self, kind: EntityType) -> usize {
        self.of_type(kind).len()
    }

    /// Registers word entities; `doc_refs[k]` lists the articles containing term `k`.
    pub fn set_words(&mut self, terms: &[String], doc_refs: Vec<Vec<u32>>) {
        debug_assert_eq!(terms.len(), doc_refs.len());
        self.words = terms
            .iter()
            .zip(doc_refs)
            .enumerate()
            .map(|(i, (t, refs))| Entity {
                id: i as u32,
                kind: EntityType::Word,
                label: t.clone(),
                doc_refs: refs,
            })
            .collect();
    }
}

/// Builds the catalog. Articles keep corpus order; authors and labs are
/// kept when they sign at least `min_docs` articles and are numbered in
/// lexicographic name order, which makes their ids independent of record order.
pub fn build_catalog(records: &[CorpusRecord], min_docs: usize) -> Result<EntityCatalog> {
    if records.is_empty() {
        return Err(Error::Empty("record sequence"));
    }
    let articles = records
        .iter()
        .enumerate()
        .map(|(i, r)| Entity {
            id: i as u32,
            kind: EntityType::Article,
            label: if r.title.trim().is_empty() {
                r.doc_id.clone()
            } else {
                r.title.trim().to_string()
            },
            doc_refs: alloc::vec![i as u32],
        })
        .collect();

    let authors = group_entities(records, EntityType::Author, min_docs, |r| &r.authors);
    let labs = group_entities(records, EntityType::Lab, min_docs, |r| &r.labs);

    Ok(EntityCatalog {
        articles,
        words: Vec::new(),
        authors,
        labs,
        min_docs,
    })
}

fn group_entities(
    records: &[CorpusRecord],
    kind: EntityType,
    min_docs: usize,
    names: impl Fn(&CorpusRecord) -> &Vec<String>,
) -> Vec<Entity> {
    let mut by_name: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let mut seen: HashSet<&str> = HashSet::new();
        for n in names(r) {
            let n = n.trim();
            if n.is_empty() || !seen.insert(n) {
                continue;
            }
            by_name.entry(n).or_default().push(i as u32);
        }
    }
    by_name
        .into_iter()
        .filter(|(_, refs)| refs.len() >= min_docs.max(1))
        .enumerate()
        .map(|(id, (name, doc_refs))| Entity {
            id: id as u32,
            kind,
            label: name.to_string(),
            doc_refs,
        })
        .collect()
}

/// Output of [`synth_corpus`]: records plus the generating ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub records: Vec<CorpusRecord>,
    /// Generating topic of each record.
    pub topics: Vec<u32>,
    /// Disjoint per-topic vocabularies.
    pub topic_vocab: Vec<Vec<String>>,
    pub shared_vocab: Vec<String>,
}

impl SynthCorpus {
    /// Topic whose vocabulary contains every token of `term`, if any.
    pub fn topic_of_term(&self, term: &str) -> Option<usize> {
        self.topic_vocab.iter().position(|vocab| {
            term.split(' ')
                .all(|tok| vocab.iter().any(|w| w == tok))
        })
    }
}

const SYLLABLES: [&str; 40] = [
    "ba", "be", "bi", "bo", "bu", "da", "de", "di", "do", "du", "ka", "ke", "ki", "ko", "ku", "la",
    "le", "li", "lo", "lu", "ma", "me", "mi", "mo", "mu", "na", "ne", "ni", "no", "nu", "ra", "re",
    "ri", "ro", "ru", "ta", "te", "ti", "to", "tu",
];

/// Deterministic pronounceable word for a global index. Fixed length per
/// corpus, so the mapping is injective.
fn synth_word(mut index: usize, n_syllables: usize) -> String {
    let mut out = String::with_capacity(n_syllables * 2);
    for _ in 0..n_syllables {
        out.push_str(SYLLABLES[index % SYLLABLES.len()]);
        index /= SYLLABLES.len();
    }
    out
}

fn draw_word<'a>(rng: &mut ChaCha8Rng, topic: &'a [String], shared: &'a [String]) -> &'a str {
    if shared.is_empty() || rng.gen::<f64>() < 0.7 {
        &topic[rng.gen_range(0..topic.len())]
    } else {
        &shared[rng.gen_range(0..shared.len())]
    }
}

/// Generates a labelled corpus: each document draws most of its words from
/// its topic's private vocabulary and the rest from a shared noise pool.
/// Authors and labs are topic-specific as well.
pub fn synth_corpus(
    n_topics: usize,
    docs_per_topic: usize,
    topic_vocab: usize,
    shared_vocab: usize,
    seed: u64,
) -> Result<SynthCorpus> {
    if n_topics == 0 || docs_per_topic == 0 || topic_vocab == 0 {
        return Err(Error::InvalidParameter(
            "synth_corpus counts must be at least 1".into(),
        ));
    }
    let total_words = n_topics * topic_vocab + shared_vocab;
    let mut n_syllables = 3;
    while SYLLABLES.len().pow(n_syllables as u32) < total_words {
        n_syllables += 1;
    }
    let topic_words: Vec<Vec<String>> = (0..n_topics)
        .map(|t| {
            (0..topic_vocab)
                .map(|j| synth_word(t * topic_vocab + j, n_syllables))
                .collect()
        })
        .collect();
    let shared_words: Vec<String> = (0..shared_vocab)
        .map(|j| synth_word(n_topics * topic_vocab + j, n_syllables))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let authors_per_topic = (docs_per_topic / 10).clamp(1, 40);
    let labs_per_topic = 2;

    let mut records = Vec::with_capacity(n_topics * docs_per_topic);
    let mut topics = Vec::with_capacity(n_topics * docs_per_topic);
    for t in 0..n_topics {
        for i in 0..docs_per_topic {
            let draw = |rng: &mut ChaCha8Rng| draw_word(rng, &topic_words[t], &shared_words);
            let title = (0..6).map(|_| draw(&mut rng)).collect::<Vec<_>>().join(" ");
            let mut abstract_text = String::new();
            for s in 0..4 {
                if s > 0 {
                    abstract_text.push_str(". ");
                }
                let words: Vec<&str> = (0..10).map(|_| draw(&mut rng)).collect();
                // a couple of stopwords and a comma so tokenization has work to do
                abstract_text.push_str(&words[..4].join(" "));
                abstract_text.push_str(" of the ");
                abstract_text.push_str(&words[4..7].join(" "));
                abstract_text.push_str(", ");
                abstract_text.push_str(&words[7..].join(" "));
            }
            let keywords = (0..3).map(|_| draw(&mut rng).to_string()).collect();
            let n_auth = rng.gen_range(1..=3);
            let mut authors: Vec<String> = (0..n_auth)
                .map(|_| format!("Author {}-{}", t, rng.gen_range(0..authors_per_topic)))
                .collect();
            let labs = alloc::vec![format!("Lab {}-{}", t, rng.gen_range(0..labs_per_topic))];
            let pub_year = Some(2000 + rng.gen_range(0..21));
            let views = Some(crate::math::round(rng.gen::<f64>() * 10_000.0) / 100.0);
            authors.sort();
            let mut r = CorpusRecord {
                doc_id: format!("doc-{}-{}", t, i),
                title,
                abstract_text,
                keywords,
                pub_year,
                domain_tag: Some(format!("topic{t}")),
                authors,
                labs,
                views_per_year: views,
            };
            r.normalize();
            records.push(r);
            topics.push(t as u32);
        }
    }
    Ok(SynthCorpus {
        records,
        topics,
        topic_vocab: topic_words,
        shared_vocab: shared_words,
    })
}
