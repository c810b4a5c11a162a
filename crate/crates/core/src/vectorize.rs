//! Natural-space representations: tokens, n-gram vocabulary, the tf-idf
//! article × term matrix and binary article × author/lab incidence matrices.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use hashbrown::{HashMap, HashSet};

use crate::corpus::{EntityCatalog, EntityType};
use crate::error::{Error, Result};
use crate::math;

/// Default maximum n-gram length.
pub const DEFAULT_N_MAX: usize = 5;
/// Default minimum corpus-wide occurrence count for a term.
pub const DEFAULT_M_MIN: u32 = 25;
/// Default vocabulary size cap.
pub const DEFAULT_V_CAP: usize = 64_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Token {
    Word(String),
    /// Punctuation or field separator; n-grams never span one.
    Boundary,
}

impl Token {
    pub fn word(s: &str) -> Self {
        Token::Word(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Language {
    English,
    French,
}

impl Language {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "en" | "english" => Some(Self::English),
            "fr" | "french" => Some(Self::French),
            _ => None,
        }
    }
}

const STOPWORDS_EN: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
    "are", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few",
    "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "him",
    "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just", "may", "me",
    "more", "most", "my", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or",
    "other", "our", "ours", "out", "over", "own", "same", "she", "should", "so", "some", "such",
    "than", "that", "the", "their", "theirs", "them", "then", "there", "these", "they", "this",
    "those", "through", "to", "too", "under", "until", "up", "very", "was", "we", "were", "what",
    "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would", "you",
    "your", "yours",
];

const STOPWORDS_FR: &[&str] = &[
    "a", "ai", "au", "aux", "avec", "c", "ce", "ces", "cet", "cette", "d", "dans", "de", "des",
    "du", "elle", "elles", "en", "est", "et", "eu", "il", "ils", "j", "je", "l", "la", "le",
    "les", "leur", "leurs", "lui", "m", "ma", "mais", "me", "mes", "moi", "mon", "n", "ne", "nos",
    "notre", "nous", "on", "ont", "ou", "par", "pas", "pour", "qu", "que", "qui", "s", "sa",
    "se", "ses", "son", "sont", "sur", "t", "ta", "te", "tes", "toi", "ton", "tu", "un", "une",
    "vos", "votre", "vous", "y", "été", "être", "était", "sans", "sous", "entre", "plus", "comme",
    "ainsi", "cela", "ceci", "donc", "dont", "leurs",
];

/// A lower-case stopword set.
#[derive(Debug, Clone, Default)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn bundled(langs: &[Language]) -> Self {
        let mut set = HashSet::new();
        for lang in langs {
            let list = match lang {
                Language::English => STOPWORDS_EN,
                Language::French => STOPWORDS_FR,
            };
            set.extend(list.iter().map(|s| s.to_string()));
        }
        Self(set)
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self(words.into_iter().map(|w| w.as_ref().to_lowercase()).collect())
    }

    pub fn contains(&self, w: &str) -> bool {
        self.0.contains(w)
    }
}

/// Lower-cases and splits `text` into alphanumeric tokens. Whitespace
/// separates tokens; any other character is a hard boundary. Stopwords are
/// dropped without introducing a boundary. Boundaries are collapsed and
/// never lead or trail the output.
pub fn tokenize(text: &str, stopwords: &StopWords) -> Vec<Token> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut pending_boundary = false;

    let flush = |current: &mut String, pending: &mut bool, out: &mut Vec<Token>| {
        if current.is_empty() {
            return;
        }
        if !stopwords.contains(current) {
            if *pending && !out.is_empty() {
                out.push(Token::Boundary);
            }
            *pending = false;
            out.push(Token::Word(core::mem::take(current)));
        } else {
            current.clear();
        }
    };

    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else {
            flush(&mut current, &mut pending_boundary, &mut out);
            if !ch.is_whitespace() {
                pending_boundary = true;
            }
        }
    }
    flush(&mut current, &mut pending_boundary, &mut out);
    out
}

/// Every contiguous run of 1..=`n_max` words not crossing a boundary,
/// joined by single spaces, in order of (start position, length).
pub fn extract_ngrams(tokens: &[Token], n_max: usize) -> Vec<String> {
    let mut out = Vec::new();
    for segment in tokens.split(|t| *t == Token::Boundary) {
        let words: Vec<&str> = segment
            .iter()
            .filter_map(|t| match t {
                Token::Word(w) => Some(w.as_str()),
                Token::Boundary => None,
            })
            .collect();
        for start in 0..words.len() {
            let mut gram = String::new();
            for (len, w) in words[start..].iter().take(n_max).enumerate() {
                if len > 0 {
                    gram.push(' ');
                }
                gram.push_str(w);
                out.push(gram.clone());
            }
        }
    }
    out
}

/// Per-document n-gram occurrence counts.
pub type NgramCounts = HashMap<String, u32>;

pub fn count_ngrams(tokens: &[Token], n_max: usize) -> NgramCounts {
    let mut counts = NgramCounts::new();
    for g in extract_ngrams(tokens, n_max) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

/// Retained terms ordered by (document frequency desc, term asc); a term's
/// column id is its position.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    pub terms: Vec<String>,
    pub df: Vec<u32>,
    pub total_count: Vec<u64>,
    pub n_max: usize,
    pub m_min: u32,
    pub v_cap: usize,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_parts(
        terms: Vec<String>,
        df: Vec<u32>,
        total_count: Vec<u64>,
        n_max: usize,
        m_min: u32,
        v_cap: usize,
    ) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self {
            terms,
            df,
            total_count,
            n_max,
            m_min,
            v_cap,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }
}

/// Keeps terms with at least `m_min` corpus occurrences, then the `v_cap`
/// highest-df survivors.
pub fn build_vocab(docs: &[NgramCounts], n_max: usize, m_min: u32, v_cap: usize) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::Empty("document sequence"));
    }
    let mut stats: HashMap<&str, (u64, u32)> = HashMap::new();
    for doc in docs {
        for (term, &c) in doc {
            let e = stats.entry(term.as_str()).or_insert((0, 0));
            e.0 += c as u64;
            e.1 += 1;
        }
    }
    let mut kept: Vec<(&str, u64, u32)> = stats
        .into_iter()
        .filter(|(_, (total, _))| *total >= m_min as u64)
        .map(|(t, (total, df))| (t, total, df))
        .collect();
    kept.sort_unstable_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(b.0)));
    kept.truncate(v_cap);
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary { m_min });
    }
    let terms = kept.iter().map(|k| k.0.to_string()).collect();
    let df = kept.iter().map(|k| k.2).collect();
    let total = kept.iter().map(|k| k.1).collect();
    Ok(Vocabulary::from_parts(terms, df, total, n_max, m_min, v_cap))
}

/// Row-compressed sparse matrix with strictly increasing column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from per-row `(col, value)` lists; entries may be unsorted but
    /// not repeated. Zero values are dropped.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(u32, f64)>>) -> Result<Self> {
        let n_rows = rows.len();
        let mut indptr = Vec::with_capacity(n_rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            let mut last: Option<u32> = None;
            for (c, v) in row {
                if c as usize >= n_cols {
                    return Err(Error::ShapeMismatch(alloc::format!(
                        "column {c} out of range for {n_cols} columns"
                    )));
                }
                if last == Some(c) {
                    return Err(Error::InvalidParameter(alloc::format!(
                        "column {c} repeated within a row"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite("sparse matrix entry"));
                }
                last = Some(c);
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        })
    }

    /// Raw CSR constructor with full validation.
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        indptr: Vec<usize>,
        indices: Vec<u32>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != n_rows + 1 || indptr[0] != 0 || indices.len() != values.len() {
            return Err(Error::ShapeMismatch("inconsistent CSR arrays".into()));
        }
        if *indptr.last().unwrap() != indices.len() {
            return Err(Error::ShapeMismatch("indptr does not end at nnz".into()));
        }
        for r in 0..n_rows {
            let (a, b) = (indptr[r], indptr[r + 1]);
            if a > b {
                return Err(Error::ShapeMismatch("indptr decreasing".into()));
            }
            let cols = &indices[a..b];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParameter(alloc::format!(
                    "row {r}: column indices not strictly increasing"
                )));
            }
            if cols.iter().any(|&c| c as usize >= n_cols) {
                return Err(Error::ShapeMismatch(alloc::format!("row {r}: column out of range")));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sparse matrix entry"));
        }
        Ok(Self {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&(j as u32)) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.indices {
            counts[c as usize + 1] += 1;
        }
        for i in 0..self.n_cols {
            counts[i + 1] += counts[i];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0u32; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let p = next[c as usize];
                indices[p] = r as u32;
                values[p] = v;
                next[c as usize] += 1;
            }
        }
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            indptr,
            indices,
            values,
        }
    }

    /// Row ids holding a nonzero in each column, ascending.
    pub fn column_rows(&self) -> Vec<Vec<u32>> {
        let t = self.transpose();
        (0..t.n_rows).map(|c| t.row(c).0.to_vec()).collect()
    }

    pub fn to_dense(&self) -> crate::linalg::DenseMatrix {
        let mut m = crate::linalg::DenseMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                m.set(r, c as usize, v);
            }
        }
        m
    }
}

/// tf-idf with raw counts, smoothed idf `ln((1+T)/(1+df)) + 1`, and unit
/// L2 rows (all-zero rows stay zero).
pub fn tfidf_matrix(docs: &[NgramCounts], vocab: &Vocabulary) -> SparseMatrix {
    let t = docs.len() as f64;
    let idf: Vec<f64> = vocab
        .df
        .iter()
        .map(|&df| math::ln((1.0 + t) / (1.0 + df as f64)) + 1.0)
        .collect();
    let mut indptr = Vec::with_capacity(docs.len() + 1);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    indptr.push(0);
    for doc in docs {
        let mut row: Vec<(u32, f64)> = doc
            .iter()
            .filter_map(|(term, &c)| vocab.id(term).map(|j| (j, c as f64 * idf[j as usize])))
            .collect();
        row.sort_unstable_by_key(|e| e.0);
        let norm = math::sqrt(row.iter().map(|e| e.1 * e.1).sum::<f64>());
        for (j, v) in row {
            indices.push(j);
            values.push(v / norm);
        }
        indptr.push(indices.len());
    }
    SparseMatrix {
        n_rows: docs.len(),
        n_cols: vocab.len(),
        indptr,
        indices,
        values,
    }
}

/// Binary T × L matrix: entry (i, k) = 1 iff entity k of `kind` is on article i.
pub fn incidence_matrix(catalog: &EntityCatalog, kind: EntityType) -> Result<SparseMatrix> {
    if !matches!(kind, EntityType::Author | EntityType::Lab) {
        return Err(Error::InvalidParameter(alloc::format!(
            "incidence matrices exist for authors and labs, not {kind}"
        )));
    }
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); catalog.n_articles()];
    for e in catalog.of_type(kind) {
        for &d in &e.doc_refs {
            rows[d as usize].push((e.id, 1.0));
        }
    }
    SparseMatrix::from_rows(catalog.count(kind), rows)
}

/// Sorted, deduplicated term ids present in each row.
pub fn doc_term_sets(m: &SparseMatrix) -> Vec<Vec<u32>> {
    (0..m.n_rows()).map(|r| m.row(r).0.to_vec()).collect()
}

/// Compares by (df desc, term asc); the vocabulary order.
pub fn vocab_order(a: (&str, u32), b: (&str, u32)) -> Ordering {
    b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_catalog, CorpusRecord};
    use alloc::vec;

    fn words(ws: &[&str]) -> Vec<Token> {
        ws.iter()
            .map(|w| if *w == "|" { Token::Boundary } else { Token::word(w) })
            .collect()
    }

    #[test]
    fn tokenize_boundaries_and_stopwords() {
        let sw = StopWords::from_words(["for"]);
        assert_eq!(
            tokenize("Deep Learning, for Networks", &sw),
            words(&["deep", "learning", "|", "networks"])
        );
        assert!(tokenize("", &sw).is_empty());
        assert!(tokenize("the the the", &StopWords::from_words(["the"])).is_empty());
        assert_eq!(tokenize("  ..a.. ", &sw), words(&["a"]));
    }

    #[test]
    fn ngrams_respect_boundaries() {
        let mut g = extract_ngrams(&words(&["a", "b"]), 2);
        g.sort();
        assert_eq!(g, vec!["a", "a b", "b"]);
        let mut g = extract_ngrams(&words(&["a", "|", "b"]), 2);
        g.sort();
        assert_eq!(g, vec!["a", "b"]);
    }

    #[test]
    fn ngram_count_formula() {
        let toks = words(&["a", "b", "c", "d", "e", "f"]);
        let expected: usize = (1..=5).map(|n| 6 - n + 1).sum();
        assert_eq!(expected, 20);
        assert_eq!(extract_ngrams(&toks, 5).len(), expected);
    }

    fn doc(terms: &[(&str, u32)]) -> NgramCounts {
        terms.iter().map(|(t, c)| (t.to_string(), *c)).collect()
    }

    #[test]
    fn vocab_threshold_boundary() {
        let mut docs: Vec<NgramCounts> = (0..30).map(|_| doc(&[("kept", 1)])).collect();
        docs[0].insert("rare".into(), 24);
        let v = build_vocab(&docs, 5, 25, 100).unwrap();
        assert_eq!(v.terms, vec!["kept"]);
        assert_eq!(v.df, vec![30]);
        assert_eq!(v.total_count, vec![30]);
    }

    #[test]
    fn vocab_cap_keeps_highest_df() {
        // term i appears in i+1 documents
        let docs: Vec<NgramCounts> = (0..10)
            .map(|d| {
                (0..10)
                    .filter(|&t| d <= t)
                    .map(|t| (alloc::format!("t{t}"), 1))
                    .collect()
            })
            .collect();
        let v = build_vocab(&docs, 5, 1, 3).unwrap();
        // oracle: sort by df desc, then name
        let mut all: Vec<(String, u32)> = (0..10).map(|t| (alloc::format!("t{t}"), t + 1)).collect();
        all.sort_by(|a, b| vocab_order((&a.0, a.1), (&b.0, b.1)));
        let expected: Vec<String> = all.into_iter().take(3).map(|a| a.0).collect();
        assert_eq!(v.terms, expected);
    }

    #[test]
    fn vocab_empty_is_error() {
        let docs = vec![doc(&[("x", 1)])];
        assert_eq!(
            build_vocab(&docs, 5, 25, 10),
            Err(Error::EmptyVocabulary { m_min: 25 })
        );
    }

    #[test]
    fn tfidf_hand_example() {
        let docs = vec![doc(&[("a", 1), ("b", 1)]), doc(&[("a", 1)])];
        let v = build_vocab(&docs, 5, 1, 10).unwrap();
        assert_eq!(v.terms, vec!["a", "b"]);
        let m = tfidf_matrix(&docs, &v);
        let wa = libm::log(3.0 / 3.0) + 1.0;
        let wb = libm::log(3.0 / 2.0) + 1.0;
        let n = libm::sqrt(wa * wa + wb * wb);
        assert!((m.get(0, 0) - wa / n).abs() < 1e-12);
        assert!((m.get(0, 1) - wb / n).abs() < 1e-12);
        assert_eq!(m.get(1, 1), 0.0);
        assert!((m.get(1, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_vocab_doc_gives_zero_row() {
        let docs = vec![doc(&[("a", 3)]), doc(&[("zzz", 1)])];
        let v = build_vocab(&docs, 5, 2, 10).unwrap();
        let m = tfidf_matrix(&docs, &v);
        assert_eq!(m.n_rows(), 2);
        assert_eq!(m.row(1).0.len(), 0);
    }

    #[test]
    fn incidence_definition_and_degenerate() {
        let mut recs: Vec<CorpusRecord> =
            (0..3).map(|i| CorpusRecord::new(alloc::format!("d{i}"), "t")).collect();
        recs[0].authors = vec!["K".into()];
        recs[2].authors = vec!["K".into()];
        let cat = build_catalog(&recs, 1).unwrap();
        let m = incidence_matrix(&cat, EntityType::Author).unwrap();
        assert_eq!(m.column_rows(), vec![vec![0, 2]]);
        let none = incidence_matrix(&cat, EntityType::Lab).unwrap();
        assert_eq!((none.n_cols(), none.nnz()), (0, 0));
        assert!(incidence_matrix(&cat, EntityType::Word).is_err());
    }

    #[test]
    fn csr_validation() {
        assert!(SparseMatrix::from_csr(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::from_csr(1, 3, vec![0, 1], vec![3], vec![1.0]).is_err());
        assert!(SparseMatrix::from_csr(1, 3, vec![0, 1], vec![1], vec![f64::NAN]).is_err());
        let m = SparseMatrix::from_csr(2, 3, vec![0, 2, 3], vec![0, 2, 1], vec![1.0, 2.0, 3.0]).unwrap();
        let t = m.transpose();
        assert_eq!(t.get(2, 0), 2.0);
        assert_eq!(t.get(1, 1), 3.0);
        assert_eq!(t.transpose(), m);
    }
}
