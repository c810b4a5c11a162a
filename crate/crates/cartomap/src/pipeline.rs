//! Pipeline stages over an output directory.
//!
//! Each stage reads its predecessors' artifacts, writes its own and records
//! `stages/<stage>.json` with the SHA-256 of every input and output, a hash
//! of its parameters and its timings. A stage whose recorded input and
//! parameter hashes still match, and whose outputs are intact, is skipped.
//!
//! ```text
//! records.jsonl                       ingest
//! vocab.json, tfidf.bin               vectorize
//! embed/<type>.bin, embed/<type>.f32  embed   (+ embed/model.json)
//! knn/<query>-<target>.bin            knn
//! coords/<type>.bin                   project
//! clusters.json                       cluster
//! map/                                export  (the serving snapshot)
//! tiles/layers/<layer>/<z>/<x>/<y>.png raster
//! index/                              index
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cartomap_core::embed::{self, LatentEmbedding};
use cartomap_core::facets::FacetSpec;
use cartomap_core::landmarks::{self, ClusterLevel, TermStats};
use cartomap_core::linalg::DenseMatrix;
use cartomap_core::neighbors::{self, AnnIndex, AnnParams, NeighborLists, SearchScratch};
use cartomap_core::project2d::{self, LayoutModel, LayoutParams, Point, ProjectionParams};
use cartomap_core::snapshot::{assemble_snapshot, SnapshotInputs};
use cartomap_core::vectorize::{self, Language, SparseMatrix, StopWords, Vocabulary};
use cartomap_core::{corpus, score, EntityCatalog, EntityType};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::artifacts;
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::index_io;
use crate::ingest;
use crate::snapshot_io;
use crate::tiles;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Vectorize,
    Embed,
    Knn,
    Project,
    Cluster,
    Export,
    Raster,
    Index,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Vectorize,
        Stage::Embed,
        Stage::Knn,
        Stage::Project,
        Stage::Cluster,
        Stage::Export,
        Stage::Raster,
        Stage::Index,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Vectorize => "vectorize",
            Stage::Embed => "embed",
            Stage::Knn => "knn",
            Stage::Project => "project",
            Stage::Cluster => "cluster",
            Stage::Export => "export",
            Stage::Raster => "raster",
            Stage::Index => "index",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Executed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub tool_version: String,
    pub status: RunStatus,
    pub runs: u32,
    pub params: Value,
    pub params_sha256: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub timings_ms: BTreeMap<String, f64>,
    #[serde(default)]
    pub notes: BTreeMap<String, Value>,
}

/// Relative artifact paths.
pub mod paths {
    pub const RECORDS: &str = "records.jsonl";
    pub const VOCAB: &str = "vocab.json";
    pub const TFIDF: &str = "tfidf.bin";
    pub const MODEL: &str = "embed/model.json";
    pub const CLUSTERS: &str = "clusters.json";
    pub const MAP: &str = "map";
    pub const TILES: &str = "tiles";
    pub const INDEX: &str = "index";
    pub const STAGES: &str = "stages";

    use cartomap_core::EntityType;

    pub fn embedding(t: EntityType) -> String {
        format!("embed/{}.bin", t.as_str())
    }

    pub fn embedding_f32(t: EntityType) -> String {
        format!("embed/{}.f32", t.as_str())
    }

    pub fn knn(q: EntityType, t: EntityType) -> String {
        format!("knn/{}-{}.bin", q.as_str(), t.as_str())
    }

    pub fn coords(t: EntityType) -> String {
        format!("coords/{}.bin", t.as_str())
    }
}

fn sha_file(p: &Path) -> Result<String> {
    let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// SHA-256 of a file, or of the sorted (relative path, file hash) list of a directory.
pub fn hash_path(p: &Path) -> Result<String> {
    if p.is_file() {
        return sha_file(p);
    }
    let mut files = Vec::new();
    let mut stack = vec![p.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push(path);
            }
        }
    }
    files.sort();
    let hashes: Vec<(String, String)> = files
        .par_iter()
        .map(|f| {
            let rel = f.strip_prefix(p).unwrap_or(f).to_string_lossy().replace('\\', "/");
            Ok((rel, sha_file(f)?))
        })
        .collect::<Result<_>>()?;
    let mut h = Sha256::new();
    for (rel, sha) in hashes {
        h.update(rel.as_bytes());
        h.update([0]);
        h.update(sha.as_bytes());
        h.update(b"\n");
    }
    Ok(hex::encode(h.finalize()))
}

fn mkparent(p: &Path) -> Result<()> {
    if let Some(d) = p.parent() {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    Ok(())
}

fn write_json<T: Serialize>(p: &Path, v: &T) -> Result<()> {
    mkparent(p)?;
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::format(p, e.to_string()))?;
    fs::write(p, text + "\n").map_err(|e| Error::io(p, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(p: &Path) -> Result<T> {
    let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(p, e.to_string()))
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    n_max: usize,
    m_min: u32,
    v_cap: usize,
    terms: Vec<String>,
    df: Vec<u32>,
    total_count: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    d: usize,
    requested_d: usize,
    fitted_t: usize,
    seed: u64,
    singular_values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LevelFile {
    level: usize,
    k: usize,
    centroids: Vec<Point>,
    article_assignment: Vec<u32>,
    word_assignment: Vec<u32>,
    names: Vec<Vec<u32>>,
    coverage: Vec<f64>,
}

/// Wall-clock timer per named phase.
#[derive(Default)]
pub struct Timings(BTreeMap<String, f64>);

impl Timings {
    pub fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        *self.0.entry(name.to_string()).or_default() += t.elapsed().as_secs_f64() * 1e3;
        out
    }
}

#[derive(Debug, Clone)]
pub struct StageReport {
    pub stage: Stage,
    pub status: RunStatus,
    pub timings_ms: BTreeMap<String, f64>,
}

/// Work done by one stage body.
#[derive(Default)]
struct StageOutput {
    notes: BTreeMap<String, Value>,
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub out: PathBuf,
    /// Re-run stages even when their hashes match.
    pub force: bool,
    pub verbose: bool,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Self {
        Self {
            out: config.output.clone(),
            config,
            force: false,
            verbose: false,
        }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    pub fn manifest_path(&self, stage: Stage) -> PathBuf {
        self.out.join(paths::STAGES).join(format!("{}.json", stage.name()))
    }

    pub fn read_manifest(&self, stage: Stage) -> Result<StageManifest> {
        read_json(&self.manifest_path(stage))
    }

    fn params(&self, stage: Stage) -> Value {
        let c = &self.config;
        match stage {
            Stage::Ingest => json!({ "columns": c.columns }),
            Stage::Vectorize => json!({ "vectorize": c.vectorize }),
            Stage::Embed => json!({ "embed": c.embed, "seed": c.seed, "min_docs": c.vectorize.min_docs }),
            Stage::Knn => json!({ "knn": c.knn, "seed": c.seed }),
            Stage::Project => json!({ "project": c.project, "knn": c.knn, "seed": c.seed }),
            Stage::Cluster => json!({ "ks": c.cluster.ks, "seed": c.seed }),
            Stage::Export => json!({ "min_docs": c.vectorize.min_docs }),
            Stage::Raster => json!({ "raster": c.raster }),
            Stage::Index => json!({ "index": c.index }),
        }
    }

    /// (producing stage, path) pairs a stage reads; `None` marks the raw input.
    fn inputs(&self, stage: Stage) -> Result<Vec<(Option<Stage>, String, PathBuf)>> {
        let rel = |s: Stage, r: String| (Some(s), r.clone(), self.path(&r));
        let emb = |types: &[EntityType]| types.iter().map(|&t| rel(Stage::Embed, paths::embedding(t))).collect::<Vec<_>>();
        Ok(match stage {
            Stage::Ingest => {
                let p = self
                    .config
                    .input
                    .clone()
                    .ok_or_else(|| Error::Input("no input CSV configured (set `input` or pass --input)".into()))?;
                vec![(None, "input".into(), p)]
            }
            Stage::Vectorize => vec![rel(Stage::Ingest, paths::RECORDS.into())],
            Stage::Embed => vec![
                rel(Stage::Ingest, paths::RECORDS.into()),
                rel(Stage::Vectorize, paths::TFIDF.into()),
                rel(Stage::Vectorize, paths::VOCAB.into()),
            ],
            Stage::Knn => emb(&EntityType::ALL),
            Stage::Project => emb(&EntityType::ALL),
            Stage::Cluster => vec![
                rel(Stage::Project, paths::coords(EntityType::Article)),
                rel(Stage::Project, paths::coords(EntityType::Word)),
                rel(Stage::Vectorize, paths::TFIDF.into()),
                rel(Stage::Vectorize, paths::VOCAB.into()),
            ],
            Stage::Export => {
                let mut v = vec![
                    rel(Stage::Ingest, paths::RECORDS.into()),
                    rel(Stage::Vectorize, paths::VOCAB.into()),
                    rel(Stage::Vectorize, paths::TFIDF.into()),
                    rel(Stage::Cluster, paths::CLUSTERS.into()),
                ];
                for t in EntityType::ALL {
                    v.push(rel(Stage::Project, paths::coords(t)));
                }
                for q in EntityType::ALL {
                    for t in EntityType::ALL {
                        v.push(rel(Stage::Knn, paths::knn(q, t)));
                    }
                }
                v
            }
            Stage::Raster | Stage::Index => vec![rel(Stage::Export, paths::MAP.into())],
        })
    }

    fn outputs(&self, stage: Stage) -> Vec<String> {
        match stage {
            Stage::Ingest => vec![paths::RECORDS.into()],
            Stage::Vectorize => vec![paths::VOCAB.into(), paths::TFIDF.into()],
            Stage::Embed => {
                let mut v = vec![paths::MODEL.to_string()];
                for t in EntityType::ALL {
                    v.push(paths::embedding(t));
                    v.push(paths::embedding_f32(t));
                }
                v
            }
            Stage::Knn => EntityType::ALL
                .iter()
                .flat_map(|&q| EntityType::ALL.iter().map(move |&t| paths::knn(q, t)))
                .collect(),
            Stage::Project => EntityType::ALL.iter().map(|&t| paths::coords(t)).collect(),
            Stage::Cluster => vec![paths::CLUSTERS.into()],
            Stage::Export => vec![paths::MAP.into()],
            Stage::Raster => vec![paths::TILES.into()],
            Stage::Index => vec![paths::INDEX.into()],
        }
    }

    fn log(&self, msg: impl fmt::Display) {
        if self.verbose {
            eprintln!("{msg}");
        }
    }

    pub fn run(&self, stage: Stage) -> Result<StageReport> {
        let mut input_hashes = BTreeMap::new();
        for (producer, name, path) in self.inputs(stage)? {
            if !path.exists() {
                return Err(match producer {
                    Some(s) => Error::MissingStage { stage: s.name(), path },
                    None => Error::Input(format!("input file {} does not exist", path.display())),
                });
            }
            input_hashes.insert(name, hash_path(&path)?);
        }
        let params = self.params(stage);
        let params_sha = hex::encode(Sha256::digest(params.to_string().as_bytes()));
        let previous = self.read_manifest(stage).ok();

        if !self.force {
            if let Some(prev) = &previous {
                if prev.params_sha256 == params_sha && prev.inputs == input_hashes && self.outputs_intact(prev)? {
                    let mut m = prev.clone();
                    m.status = RunStatus::Skipped;
                    m.runs += 1;
                    write_json(&self.manifest_path(stage), &m)?;
                    self.log(format_args!("{stage}: unchanged, skipped"));
                    return Ok(StageReport {
                        stage,
                        status: RunStatus::Skipped,
                        timings_ms: BTreeMap::new(),
                    });
                }
            }
        }

        self.log(format_args!("{stage}: running"));
        let mut timings = Timings::default();
        let start = Instant::now();
        let out = match stage {
            Stage::Ingest => self.ingest(&mut timings),
            Stage::Vectorize => self.vectorize(&mut timings),
            Stage::Embed => self.embed(&mut timings),
            Stage::Knn => self.knn(&mut timings),
            Stage::Project => self.project(&mut timings),
            Stage::Cluster => self.cluster(&mut timings),
            Stage::Export => self.export(&mut timings),
            Stage::Raster => self.raster(&mut timings),
            Stage::Index => self.index(&mut timings),
        }?;
        let mut timings_ms = timings.0;
        timings_ms.insert("total".into(), start.elapsed().as_secs_f64() * 1e3);

        let mut outputs = BTreeMap::new();
        for rel in self.outputs(stage) {
            outputs.insert(rel.clone(), hash_path(&self.path(&rel))?);
        }
        let m = StageManifest {
            stage: stage.name().into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            status: RunStatus::Executed,
            runs: previous.map(|p| p.runs + 1).unwrap_or(1),
            params,
            params_sha256: params_sha,
            inputs: input_hashes,
            outputs,
            timings_ms: timings_ms.clone(),
            notes: out.notes,
        };
        write_json(&self.manifest_path(stage), &m)?;
        Ok(StageReport {
            stage,
            status: RunStatus::Executed,
            timings_ms,
        })
    }

    fn outputs_intact(&self, prev: &StageManifest) -> Result<bool> {
        for (rel, sha) in &prev.outputs {
            let p = self.path(rel);
            if !p.exists() || &hash_path(&p)? != sha {
                return Ok(false);
            }
        }
        Ok(!prev.outputs.is_empty())
    }

    /// Runs every stage in order.
    pub fn run_all(&self) -> Result<Vec<StageReport>> {
        Stage::ALL.iter().map(|&s| self.run(s)).collect()
    }

    // ---- loaders shared by stages ----

    pub fn records(&self) -> Result<Vec<corpus::CorpusRecord>> {
        ingest::read_records(&self.path(paths::RECORDS))
    }

    pub fn vocab(&self) -> Result<Vocabulary> {
        let v: VocabFile = read_json(&self.path(paths::VOCAB))?;
        Ok(Vocabulary::from_parts(v.terms, v.df, v.total_count, v.n_max, v.m_min, v.v_cap))
    }

    pub fn tfidf(&self) -> Result<SparseMatrix> {
        artifacts::read_sparse(&self.path(paths::TFIDF))
    }

    /// Catalog with words registered from the tf-idf columns.
    pub fn catalog(&self, records: &[corpus::CorpusRecord], vocab: &Vocabulary, tfidf: &SparseMatrix) -> Result<EntityCatalog> {
        let mut cat = corpus::build_catalog(records, self.config.vectorize.min_docs)?;
        cat.set_words(&vocab.terms, tfidf.column_rows());
        Ok(cat)
    }

    pub fn embedding(&self, t: EntityType) -> Result<LatentEmbedding> {
        artifacts::read_embedding(&self.path(&paths::embedding(t)))
    }

    pub fn coords(&self, t: EntityType) -> Result<Vec<Point>> {
        let (m, _, _) = artifacts::read_dense(&self.path(&paths::coords(t)))?;
        Ok((0..m.rows()).map(|i| [m.get(i, 0), m.get(i, 1)]).collect())
    }

    pub fn levels(&self) -> Result<Vec<ClusterLevel>> {
        let levels: Vec<LevelFile> = read_json(&self.path(paths::CLUSTERS))?;
        Ok(levels
            .into_iter()
            .map(|l| ClusterLevel {
                level: l.level,
                k: l.k,
                centroids: l.centroids,
                article_assignment: l.article_assignment,
                word_assignment: l.word_assignment,
                names: l.names,
                coverage: l.coverage,
            })
            .collect())
    }

    // ---- stages ----

    fn ingest(&self, tm: &mut Timings) -> Result<StageOutput> {
        let input = self.config.input.as_ref().expect("checked by inputs()");
        let got = tm.time("read csv", || ingest::load_corpus(input, &self.config.columns))?;
        for w in &got.warnings {
            eprintln!("warning: {w}");
        }
        if got.records.is_empty() {
            return Err(Error::Input(format!("{} holds no usable documents", input.display())));
        }
        let p = self.path(paths::RECORDS);
        mkparent(&p)?;
        ingest::write_records(&p, &got.records)?;
        let mut out = StageOutput::default();
        out.notes.insert("documents".into(), json!(got.records.len()));
        out.notes.insert("warnings".into(), json!(got.warnings));
        Ok(out)
    }

    fn vectorize(&self, tm: &mut Timings) -> Result<StageOutput> {
        let c = &self.config.vectorize;
        let records = self.records()?;
        let langs: Vec<Language> = c.languages.iter().filter_map(|l| Language::parse(l)).collect();
        let stop = StopWords::bundled(&langs);
        let docs: Vec<vectorize::NgramCounts> = tm.time("term extraction", || {
            records
                .par_iter()
                .map(|r| vectorize::count_ngrams(&vectorize::tokenize(&r.text(), &stop), c.n_max))
                .collect()
        });
        let vocab = tm.time("vocabulary", || vectorize::build_vocab(&docs, c.n_max, c.m_min, c.v_cap))?;
        let tfidf = tm.time("tf-idf", || vectorize::tfidf_matrix(&docs, &vocab));
        write_json(
            &self.path(paths::VOCAB),
            &VocabFile {
                n_max: vocab.n_max,
                m_min: vocab.m_min,
                v_cap: vocab.v_cap,
                terms: vocab.terms.clone(),
                df: vocab.df.clone(),
                total_count: vocab.total_count.clone(),
            },
        )?;
        artifacts::write_sparse(&self.path(paths::TFIDF), &tfidf)?;
        let mut out = StageOutput::default();
        out.notes.insert("terms".into(), json!(vocab.len()));
        out.notes.insert("nonzeros".into(), json!(tfidf.nnz()));
        Ok(out)
    }

    fn embed(&self, tm: &mut Timings) -> Result<StageOutput> {
        let records = self.records()?;
        let vocab = self.vocab()?;
        let tfidf = self.tfidf()?;
        let cat = self.catalog(&records, &vocab, &tfidf)?;
        let requested = self.config.embed.d;
        let d = requested.min(tfidf.n_rows()).min(tfidf.n_cols());
        if d < requested {
            eprintln!(
                "warning: latent dimension lowered from {requested} to {d} (corpus has {} documents and {} terms)",
                tfidf.n_rows(),
                tfidf.n_cols()
            );
        }
        let model = tm.time("LSA", || embed::fit_lsa(&tfidf, d, self.config.seed))?;
        let articles = tm.time("article vectors", || embed::embed_articles(&model, &tfidf))?;
        let words = embed::embed_terms(&model);
        let authors = embed::embed_aggregates(
            EntityType::Author,
            &vectorize::incidence_matrix(&cat, EntityType::Author)?,
            &articles,
        )?;
        let labs = embed::embed_aggregates(EntityType::Lab, &vectorize::incidence_matrix(&cat, EntityType::Lab)?, &articles)?;
        fs::create_dir_all(self.path("embed")).map_err(|e| Error::io(self.path("embed"), e))?;
        for e in [&articles, &words, &authors, &labs] {
            artifacts::write_embedding(&self.path(&paths::embedding(e.kind)), e, self.config.seed)?;
            artifacts::write_embedding_f32(&self.path(&paths::embedding_f32(e.kind)), e, self.config.seed)?;
        }
        write_json(
            &self.path(paths::MODEL),
            &ModelFile {
                d,
                requested_d: requested,
                fitted_t: model.fitted_t,
                seed: model.seed,
                singular_values: model.singular_values.clone(),
            },
        )?;
        let mut out = StageOutput::default();
        out.notes.insert("d".into(), json!(d));
        Ok(out)
    }

    fn knn(&self, tm: &mut Timings) -> Result<StageOutput> {
        let c = &self.config.knn;
        let embs: Vec<LatentEmbedding> = EntityType::ALL.iter().map(|&t| self.embedding(t)).collect::<Result<_>>()?;
        fs::create_dir_all(self.path("knn")).map_err(|e| Error::io(self.path("knn"), e))?;
        let mut methods = BTreeMap::new();
        for target in &embs {
            let index = if target.len() > c.exact_limit {
                let params = AnnParams {
                    m: c.m,
                    ef_construction: c.ef_construction,
                    seed: self.config.seed,
                };
                Some(tm.time("nearest neighbors", || neighbors::build_ann_index(target, params))?)
            } else {
                None
            };
            for query in &embs {
                let lists = tm.time("nearest neighbors", || knn_pair(query, target, c.k, index.as_ref(), c.ef))?;
                artifacts::write_neighbors(&self.path(&paths::knn(query.kind, target.kind)), &lists)?;
            }
            methods.insert(target.kind.as_str(), if index.is_some() { "graph" } else { "exact" });
        }
        let mut out = StageOutput::default();
        out.notes.insert("method_by_target".into(), json!(methods));
        Ok(out)
    }

    fn project(&self, tm: &mut Timings) -> Result<StageOutput> {
        let c = &self.config;
        let params = ProjectionParams {
            n_neighbors: c.project.n_neighbors,
            layout: LayoutParams {
                epochs: c.project.epochs,
                min_dist: c.project.min_dist,
                seed: c.seed,
                ..LayoutParams::default()
            },
            subset_fraction: c.project.subset_fraction,
            exact_knn_limit: c.knn.exact_limit,
            ann: AnnParams {
                m: c.knn.m,
                ef_construction: c.knn.ef_construction,
                seed: c.seed,
            },
            ef: c.knn.ef,
            ..ProjectionParams::default()
        };
        let articles = self.embedding(EntityType::Article)?;
        let (model, proj) = tm.time("projection", || LayoutModel::fit(&articles, &params))?;
        let mut raw: Vec<Vec<Point>> = vec![proj.coords];
        for t in [EntityType::Word, EntityType::Author, EntityType::Lab] {
            let e = self.embedding(t)?;
            raw.push(tm.time("projection", || model.transform(&e))?);
        }
        let all: Vec<Point> = raw.iter().flatten().copied().collect();
        let norm = project2d::normalize_coords(&all);
        fs::create_dir_all(self.path("coords")).map_err(|e| Error::io(self.path("coords"), e))?;
        let mut at = 0;
        for (t, part) in EntityType::ALL.iter().zip(&raw) {
            let pts = &norm[at..at + part.len()];
            at += part.len();
            let m = DenseMatrix::from_vec(pts.len(), 2, pts.iter().flat_map(|p| [p[0], p[1]]).collect());
            artifacts::write_dense(&self.path(&paths::coords(*t)), &m, Some(*t), c.seed)?;
        }
        let mut out = StageOutput::default();
        out.notes.insert("fitted_articles".into(), json!(proj.fitted_subset.len()));
        Ok(out)
    }

    fn cluster(&self, tm: &mut Timings) -> Result<StageOutput> {
        let vocab = self.vocab()?;
        let tfidf = self.tfidf()?;
        let doc_terms = vectorize::doc_term_sets(&tfidf);
        let stats = TermStats::new(&doc_terms, &vocab.terms)?;
        let a = self.coords(EntityType::Article)?;
        let w = self.coords(EntityType::Word)?;
        let ks: Vec<usize> = self.config.cluster.ks.clone();
        if let Some(&k) = ks.iter().find(|&&k| k > a.len()) {
            return Err(Error::Input(format!("cluster count {k} exceeds the {} articles", a.len())));
        }
        let levels = tm.time("clustering", || landmarks::build_levels(&a, &w, &stats, &ks, self.config.seed))?;
        let files: Vec<LevelFile> = levels
            .iter()
            .map(|l| LevelFile {
                level: l.level,
                k: l.k,
                centroids: l.centroids.clone(),
                article_assignment: l.article_assignment.clone(),
                word_assignment: l.word_assignment.clone(),
                names: l.names.clone(),
                coverage: l.coverage.clone(),
            })
            .collect();
        write_json(&self.path(paths::CLUSTERS), &files)?;
        let mut out = StageOutput::default();
        let names: Vec<Vec<String>> = levels
            .iter()
            .map(|l| (0..l.k).map(|c| l.label(c, &vocab.terms)).collect())
            .collect();
        out.notes.insert("names".into(), json!(names));
        Ok(out)
    }

    fn export(&self, tm: &mut Timings) -> Result<StageOutput> {
        let records = self.records()?;
        let vocab = self.vocab()?;
        let tfidf = self.tfidf()?;
        let cat = self.catalog(&records, &vocab, &tfidf)?;
        let coords: [Vec<Point>; 4] = [
            self.coords(EntityType::Article)?,
            self.coords(EntityType::Word)?,
            self.coords(EntityType::Author)?,
            self.coords(EntityType::Lab)?,
        ];
        let views: Vec<Option<f64>> = records.iter().map(|r| r.views_per_year).collect();
        let scores = score::score_entities(&cat, Some(&views))?;
        let mut lists = Vec::new();
        for q in EntityType::ALL {
            for t in EntityType::ALL {
                lists.push(artifacts::read_neighbors(&self.path(&paths::knn(q, t)))?);
            }
        }
        let levels = self.levels()?;
        let snap = tm.time("assemble", || {
            assemble_snapshot(&SnapshotInputs {
                catalog: &cat,
                records: &records,
                coords: &coords,
                scores: &scores,
                neighbors: &lists,
                levels: &levels,
                terms: &vocab.terms,
            })
        })?;
        let dir = self.path(paths::MAP);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        tm.time("write", || snapshot_io::write_snapshot(&dir, &snap))?;
        let mut out = StageOutput::default();
        out.notes.insert("entities".into(), json!(snap.entities.len()));
        Ok(out)
    }

    fn raster(&self, tm: &mut Timings) -> Result<StageOutput> {
        let snap = snapshot_io::load_snapshot(&self.path(paths::MAP))?;
        let layers: Vec<EntityType> = self.config.raster.layers.iter().filter_map(|l| EntityType::parse(l)).collect();
        let dir = self.path(paths::TILES);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        let n = tm.time("render", || {
            tiles::write_pyramid(&dir, &snap, &layers, self.config.raster.zmax, self.config.raster.sigma)
        })?;
        let mut out = StageOutput::default();
        out.notes.insert("tiles".into(), json!(n));
        Ok(out)
    }

    fn index(&self, tm: &mut Timings) -> Result<StageOutput> {
        let snap = snapshot_io::load_snapshot(&self.path(paths::MAP))?;
        let specs: Vec<FacetSpec> = self
            .config
            .index
            .facets
            .iter()
            .map(|f| FacetSpec::parse(f))
            .collect::<cartomap_core::Result<_>>()?;
        let idx = tm.time("build", || index_io::build_indices(&snap, &specs, self.config.index.zmax))?;
        let dir = self.path(paths::INDEX);
        let m = index_io::write_indices(&dir, &idx)?;
        let mut out = StageOutput::default();
        out.notes.insert("facets".into(), json!(m.facets));
        Ok(out)
    }
}

/// k nearest `targets` of every `queries` row, in parallel; excludes self
/// matches when both sides share a type. Uses `index` when given.
pub fn knn_pair(
    queries: &LatentEmbedding,
    targets: &LatentEmbedding,
    k: usize,
    index: Option<&AnnIndex>,
    ef: usize,
) -> Result<NeighborLists> {
    if queries.dim() != targets.dim() {
        return Err(cartomap_core::Error::ShapeMismatch(format!(
            "query dimension {} differs from target dimension {}",
            queries.dim(),
            targets.dim()
        ))
        .into());
    }
    let same = queries.kind == targets.kind;
    let lists = (0..queries.len())
        .into_par_iter()
        .map_init(SearchScratch::default, |scratch, i| {
            let exclude = same.then_some(i as u32);
            match index {
                Some(idx) => idx.search(queries.row(i), k, ef.max(k), exclude, scratch),
                None => neighbors::exact_search(queries.row(i), &targets.matrix, k, exclude),
            }
        })
        .collect();
    Ok(NeighborLists {
        query_kind: queries.kind,
        target_kind: targets.kind,
        k,
        lists,
    })
}
