//! The `bound` command: one family, one constant.

use std::path::Path;
use std::time::Instant;

use serde_json::json;

use randbound_core::{
    cotype2_search, ell2_bound_search, gamma_bound_search, gaussian_cotype2_search, pi21_search, pi2_search,
    r_bound_search, BoundEstimate, ConstantKind, Error, FamilyFile, OperatorFamily,
};

use crate::report::{Relation, Report, Row};
use crate::suites::RunConfig;

#[derive(Debug)]
pub enum BoundError {
    /// Unreadable or malformed family file.
    Input(String),
    /// The engine rejected the request.
    Engine(Error),
}

impl std::fmt::Display for BoundError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundError::Input(m) => f.write_str(m),
            BoundError::Engine(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for BoundError {}

/// Parses a family file, reporting the line and column of JSON errors.
pub fn load_family(path: &Path) -> Result<(Option<String>, OperatorFamily), BoundError> {
    let text = std::fs::read_to_string(path).map_err(|e| BoundError::Input(format!("{}: {e}", path.display())))?;
    let file: FamilyFile = serde_json::from_str(&text).map_err(|e| {
        BoundError::Input(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
    })?;
    let name = file.name.clone();
    let family = file.into_family().map_err(|e| BoundError::Input(format!("{}: {e}", path.display())))?;
    Ok((name, family))
}

pub fn estimate(family: &OperatorFamily, constant: ConstantKind, cfg: &RunConfig) -> Result<BoundEstimate, Error> {
    let search = cfg.search();
    match constant {
        ConstantKind::R => Ok(r_bound_search(family, &search)),
        ConstantKind::Gamma => Ok(gamma_bound_search(family, &search, &cfg.mc()?)),
        ConstantKind::Ell2 => Ok(ell2_bound_search(family, &search)),
        ConstantKind::Pi2 => pi2_search(family, &search),
        ConstantKind::Pi21 => pi21_search(family, &search),
        ConstantKind::Cotype2 => cotype2_search(family, &search),
        ConstantKind::Cotype2Gamma => gaussian_cotype2_search(family, &search, &cfg.mc()?),
    }
}

pub fn bound_report(path: &Path, constant: ConstantKind, cfg: &RunConfig) -> Result<Report, BoundError> {
    let (name, family) = load_family(path)?;
    let start = Instant::now();
    let est = estimate(&family, constant, cfg).map_err(BoundError::Engine)?;
    let ms = start.elapsed().as_millis() as u64;
    let case = name.unwrap_or_else(|| path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()));
    let mut config = cfg.echo();
    config["constant"] = json!(constant.name());
    let mut report = Report::new(format!("bound {}", constant.name()), config);
    let detail = json!({
        "constant": constant.name(),
        "estimate": serde_json::to_value(&est).expect("estimates serialize"),
        "upper_source": est.upper_source.tag(),
    });
    report.rows.push(
        Row::new(case, &format!("bound.{}", constant.name()), Relation::Bracket, est.lower, est.upper)
            .ci(est.half_width())
            .tolerance(1e-9 * est.upper.min(1e300).abs() + 1e-12)
            .elapsed(ms)
            .detail(detail),
    );
    Ok(report)
}
