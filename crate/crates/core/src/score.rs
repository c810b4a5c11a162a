//! Entity importance used for label ranking.

use alloc::format;
use alloc::vec::Vec;

use crate::corpus::{EntityCatalog, EntityType};
use crate::error::{Error, Result};

/// Article score when no views figure is available.
pub const DEFAULT_ARTICLE_SCORE: f64 = 1.0;

/// Scores per entity type, indexed by [`EntityType::index`].
pub type Scores = [Vec<f64>; 4];

/// Authors and labs score their article count, words their document
/// frequency, articles their yearly views (or [`DEFAULT_ARTICLE_SCORE`]).
pub fn score_entities(catalog: &EntityCatalog, views: Option<&[Option<f64>]>) -> Result<Scores> {
    let n = catalog.n_articles();
    if let Some(v) = views {
        if v.len() != n {
            return Err(Error::ShapeMismatch(format!("{} view figures for {n} articles", v.len())));
        }
    }
    let articles = (0..n)
        .map(|i| match views.and_then(|v| v[i]) {
            Some(x) if !x.is_finite() || x < 0.0 => Err(Error::InvalidParameter(format!(
                "article {i} has invalid views per year {x}"
            ))),
            Some(x) => Ok(x),
            None => Ok(DEFAULT_ARTICLE_SCORE),
        })
        .collect::<Result<Vec<f64>>>()?;
    let count = |kind: EntityType| -> Vec<f64> {
        catalog.of_type(kind).iter().map(|e| e.doc_refs.len() as f64).collect()
    };
    Ok([
        articles,
        count(EntityType::Word),
        count(EntityType::Author),
        count(EntityType::Lab),
    ])
}
