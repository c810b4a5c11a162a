//! Pipeline configuration: one TOML file, every key optional.
//!
//! ```toml
//! input = "corpus.csv"
//! output = "out"
//! seed = 42
//!
//! [columns]          # CSV header names
//! doc_id = "doc_id"
//!
//! [vectorize]
//! n_max = 5
//! m_min = 25
//! v_cap = 64000
//! min_docs = 3
//! languages = ["en", "fr"]
//!
//! [embed]
//! d = 300
//!
//! [knn]
//! k = 10
//! exact_limit = 4096
//! m = 16
//! ef_construction = 200
//! ef = 64
//!
//! [project]
//! epochs = 200
//! subset_fraction = 1.0
//! n_neighbors = 15
//! min_dist = 0.1
//!
//! [cluster]
//! ks = [8, 24, 72, 216]
//!
//! [raster]
//! zmax = 5
//! sigma = 1.5
//! layers = ["articles", "authors"]
//!
//! [index]
//! facets = ["type", "lab", "year", "term"]
//! zmax = 8
//!
//! [serve]
//! port = 8080
//! cache_size = 512
//! workers = 0        # 0: one per CPU
//! zoom_bands = [[0, 0], [2, 1], [4, 2], [6, 3]]
//! ```

use std::path::{Path, PathBuf};

use cartomap_core::{embed, landmarks, neighbors, vectorize};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ColumnMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub output: PathBuf,
    pub seed: u64,
    pub columns: ColumnMap,
    pub vectorize: VectorizeConfig,
    pub embed: EmbedConfig,
    pub knn: KnnConfig,
    pub project: ProjectConfig,
    pub cluster: ClusterConfig,
    pub raster: RasterConfig,
    pub index: IndexConfig,
    pub serve: ServeConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: None,
            output: PathBuf::from("out"),
            seed: 42,
            columns: ColumnMap::default(),
            vectorize: VectorizeConfig::default(),
            embed: EmbedConfig::default(),
            knn: KnnConfig::default(),
            project: ProjectConfig::default(),
            cluster: ClusterConfig::default(),
            raster: RasterConfig::default(),
            index: IndexConfig::default(),
            serve: ServeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VectorizeConfig {
    pub n_max: usize,
    pub m_min: u32,
    pub v_cap: usize,
    pub min_docs: usize,
    pub languages: Vec<String>,
}

impl Default for VectorizeConfig {
    fn default() -> Self {
        Self {
            n_max: vectorize::DEFAULT_N_MAX,
            m_min: vectorize::DEFAULT_M_MIN,
            v_cap: vectorize::DEFAULT_V_CAP,
            min_docs: 3,
            languages: vec!["en".into(), "fr".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedConfig {
    pub d: usize,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self { d: embed::DEFAULT_DIM }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnConfig {
    pub k: usize,
    /// Target sets up to this size are searched exactly.
    pub exact_limit: usize,
    pub m: usize,
    pub ef_construction: usize,
    pub ef: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            k: neighbors::DEFAULT_K,
            exact_limit: 4096,
            m: neighbors::DEFAULT_M,
            ef_construction: neighbors::DEFAULT_EF_CONSTRUCTION,
            ef: neighbors::DEFAULT_EF,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    pub epochs: usize,
    pub subset_fraction: f64,
    pub n_neighbors: usize,
    pub min_dist: f64,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            subset_fraction: 1.0,
            n_neighbors: 15,
            min_dist: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub ks: Vec<usize>,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            ks: landmarks::DEFAULT_LEVELS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RasterConfig {
    pub zmax: u8,
    pub sigma: f64,
    pub layers: Vec<String>,
}

impl Default for RasterConfig {
    fn default() -> Self {
        Self {
            zmax: 5,
            sigma: cartomap_core::raster::DEFAULT_SIGMA,
            layers: vec!["articles".into(), "authors".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexConfig {
    pub facets: Vec<String>,
    pub zmax: u8,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            facets: vec!["type".into(), "lab".into(), "year".into(), "term".into()],
            zmax: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub snapshot: Option<PathBuf>,
    pub port: u16,
    pub cache_size: usize,
    pub workers: usize,
    pub zoom_bands: Vec<(u32, usize)>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            snapshot: None,
            port: 8080,
            cache_size: 512,
            workers: 0,
            zoom_bands: cartomap_core::labels::default_zoom_bands(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Input(m) => Error::format(path, m),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Input(format!("invalid configuration: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Input(format!("invalid configuration: {m}")));
        if self.vectorize.n_max == 0 {
            return bad("vectorize.n_max must be at least 1".into());
        }
        if self.embed.d == 0 {
            return bad("embed.d must be at least 1".into());
        }
        if self.knn.k == 0 {
            return bad("knn.k must be at least 1".into());
        }
        if !(self.project.subset_fraction > 0.0 && self.project.subset_fraction <= 1.0) {
            return bad(format!("project.subset_fraction {} not in (0, 1]", self.project.subset_fraction));
        }
        if self.cluster.ks.is_empty() || self.cluster.ks.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("cluster.ks {:?} must be non-empty and strictly increasing", self.cluster.ks));
        }
        if self.index.zmax > 12 {
            return bad("index.zmax must be at most 12".into());
        }
        if self.raster.zmax > 12 {
            return bad("raster.zmax must be at most 12".into());
        }
        for l in &self.raster.layers {
            if cartomap_core::EntityType::parse(l).is_none() {
                return bad(format!("unknown raster layer {l:?}"));
            }
        }
        for l in &self.vectorize.languages {
            if vectorize::Language::parse(l).is_none() {
                return bad(format!("unknown stopword language {l:?}"));
            }
        }
        for f in &self.index.facets {
            cartomap_core::facets::FacetSpec::parse(f).map_err(|e| Error::Input(format!("invalid configuration: {e}")))?;
        }
        Ok(())
    }
}
