//! `predict`: posterior predictive means from saved ensembles.

use std::fs;
use std::path::Path;

use qlbart::backfit::predict_mu;
use qlbart::forest::read_ensembles;
use qlbart::{Error, Result};

use crate::fit::{chains_in, load_fit, point_summaries, trees_file, write_point_summaries, PointSummary};
use crate::io::read_features;

/// Predicts μ at the rows of `input` from the fit in `dir`, writing the
/// pointwise summaries to `out`. `level` defaults to the fit's level.
pub fn predict(dir: &Path, input: &Path, out: &Path, level: Option<f64>) -> Result<Vec<PointSummary>> {
    let (cfg, report) = load_fit(dir)?;
    let level = level.unwrap_or(report.level);
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("level {level} must lie in (0, 1)")));
    }
    let family = cfg.quasi_family(report.outcome_dim)?;
    let p = report.feature_names.len();
    let x = read_features(input, &report.feature_names)?;
    let mut draws = Vec::new();
    for c in chains_in(dir)? {
        let path = trees_file(dir, c);
        if !path.exists() {
            return Err(Error::Schema(format!(
                "{} is missing; refit with tree saving enabled",
                path.display()
            )));
        }
        for e in read_ensembles(&fs::read_to_string(&path)?)? {
            if e.num_features() != p {
                return Err(Error::Schema(format!("{}: ensemble has {} features, report has {p}", path.display(), e.num_features())));
            }
            draws.push(predict_mu(&e, &family, &x, p));
        }
    }
    let rows = point_summaries(&draws, report.outcome_dim, level);
    write_point_summaries(out, &rows)?;
    Ok(rows)
}
