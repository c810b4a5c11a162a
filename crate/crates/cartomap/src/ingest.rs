//! CSV ingestion and the line-delimited record artifact.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use cartomap_core::CorpusRecord;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Source column names. `doc_id` and `title` must exist; the others are
/// optional and read as absent when the column is missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub doc_id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub keywords: String,
    pub year: String,
    pub domain: String,
    pub authors: String,
    pub labs: String,
    pub views: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            doc_id: "doc_id".into(),
            title: "title".into(),
            abstract_text: "abstract".into(),
            keywords: "keywords".into(),
            year: "year".into(),
            domain: "domain".into(),
            authors: "authors".into(),
            labs: "labs".into(),
            views: "views_per_year".into(),
        }
    }
}

/// Separator inside multi-valued cells.
pub const MULTI_SEPARATOR: char = ';';

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub records: Vec<CorpusRecord>,
    pub warnings: Vec<String>,
}

fn split_multi(cell: &str) -> Vec<String> {
    cell.split(MULTI_SEPARATOR)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

pub fn load_corpus(path: &Path, map: &ColumnMap) -> Result<Ingested> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(file, map)
}

/// Reads records in file order. Textless rows are dropped with a warning;
/// malformed rows and repeated ids are errors carrying the line number.
pub fn read_corpus<R: Read>(input: R, map: &ColumnMap) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Input(format!("cannot read CSV header: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let need = |name: &str| col(name).ok_or_else(|| Error::Input(format!("missing mandatory column '{name}'")));
    let id_col = need(&map.doc_id)?;
    let title_col = need(&map.title)?;
    let abs_col = col(&map.abstract_text);
    let kw_col = col(&map.keywords);
    let year_col = col(&map.year);
    let dom_col = col(&map.domain);
    let au_col = col(&map.authors);
    let lab_col = col(&map.labs);
    let views_col = col(&map.views);

    let mut out = Ingested::default();
    let mut seen: HashMap<String, u64> = HashMap::new();
    let mut row = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut row).map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::Line {
                line,
                message: format!("malformed row: {e}"),
            }
        })?;
        if !more {
            break;
        }
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let get = |c: Option<usize>| c.and_then(|c| row.get(c)).unwrap_or("").trim();
        let doc_id = get(Some(id_col)).to_string();
        let mut rec = CorpusRecord::new(doc_id.clone(), get(Some(title_col)));
        rec.abstract_text = get(abs_col).to_string();
        rec.keywords = split_multi(get(kw_col));
        rec.authors = split_multi(get(au_col));
        rec.labs = split_multi(get(lab_col));
        let dom = get(dom_col);
        rec.domain_tag = (!dom.is_empty()).then(|| dom.to_string());
        let year = get(year_col);
        if !year.is_empty() {
            rec.pub_year = Some(year.parse().map_err(|_| Error::Line {
                line,
                message: format!("document {doc_id:?}: year {year:?} is not an integer"),
            })?);
        }
        let views = get(views_col);
        if !views.is_empty() {
            rec.views_per_year = Some(views.parse().map_err(|_| Error::Line {
                line,
                message: format!("document {doc_id:?}: views {views:?} is not a number"),
            })?);
        }
        rec.normalize();
        rec.validate().map_err(|e| Error::Line {
            line,
            message: e.to_string(),
        })?;
        if let Some(first) = seen.get(&doc_id) {
            return Err(Error::Line {
                line,
                message: format!("duplicate doc_id {doc_id:?} (first seen on line {first})"),
            });
        }
        seen.insert(doc_id.clone(), line);
        if rec.is_textless() {
            out.warnings
                .push(format!("line {line}: document {doc_id:?} has no title, abstract or keywords; dropped"));
            continue;
        }
        out.records.push(rec);
    }
    Ok(out)
}

/// Serialized form of a record in `records.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub doc_id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub keywords: Vec<String>,
    pub pub_year: Option<i32>,
    pub domain_tag: Option<String>,
    pub authors: Vec<String>,
    pub labs: Vec<String>,
    pub views_per_year: Option<f64>,
}

impl From<&CorpusRecord> for RecordRow {
    fn from(r: &CorpusRecord) -> Self {
        Self {
            doc_id: r.doc_id.clone(),
            title: r.title.clone(),
            abstract_text: r.abstract_text.clone(),
            keywords: r.keywords.clone(),
            pub_year: r.pub_year,
            domain_tag: r.domain_tag.clone(),
            authors: r.authors.clone(),
            labs: r.labs.clone(),
            views_per_year: r.views_per_year,
        }
    }
}

impl From<RecordRow> for CorpusRecord {
    fn from(r: RecordRow) -> Self {
        CorpusRecord {
            doc_id: r.doc_id,
            title: r.title,
            abstract_text: r.abstract_text,
            keywords: r.keywords,
            pub_year: r.pub_year,
            domain_tag: r.domain_tag,
            authors: r.authors,
            labs: r.labs,
            views_per_year: r.views_per_year,
        }
    }
}

pub fn write_records(path: &Path, records: &[CorpusRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, &RecordRow::from(r)).map_err(|e| Error::format(path, e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<CorpusRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: RecordRow =
            serde_json::from_str(&line).map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
        out.push(row.into());
    }
    Ok(out)
}

/// Writes records as CSV with the default column names.
pub fn write_csv(path: &Path, records: &[CorpusRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let m = ColumnMap::default();
    let header = [
        &m.doc_id, &m.title, &m.abstract_text, &m.keywords, &m.year, &m.domain, &m.authors, &m.labs, &m.views,
    ];
    w.write_record(header).map_err(|e| Error::format(path, e.to_string()))?;
    let sep = MULTI_SEPARATOR.to_string();
    for r in records {
        let row = [
            r.doc_id.clone(),
            r.title.clone(),
            r.abstract_text.clone(),
            r.keywords.join(&sep),
            r.pub_year.map(|y| y.to_string()).unwrap_or_default(),
            r.domain_tag.clone().unwrap_or_default(),
            r.authors.join(&sep),
            r.labs.join(&sep),
            r.views_per_year.map(|v| v.to_string()).unwrap_or_default(),
        ];
        w.write_record(&row).map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
