//! Exhaustive FTIR preprocessing search with min-max selection across
//! scenarios, disk-cached per candidate.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Modality, SampleTable, Scenario};
use crate::error::{Error, Result};
use crate::eval::{cross_validate, CvSettings};
use crate::experiment::{build_input, ftir_features, PatientFeatures};
use crate::gbdt::GbdtParams;
use crate::prep1d::{
    Baseline, Derivative, Normalization, OperatorParams, PipelineConfig, Region, ReplicateMode,
    Scatter, Smoothing,
};

/// Every pipeline, `replicate_mode` varying slowest and `normalization`
/// fastest.
pub fn enumerate_pipelines() -> Vec<PipelineConfig> {
    use Baseline as B;
    use Derivative as D;
    use Normalization as N;
    use Region as R;
    let mut out = Vec::with_capacity(2880);
    for replicate_mode in [ReplicateMode::Average, ReplicateMode::KeepAll] {
        for region in [R::Full, R::Fingerprint, R::Amide, R::Lipid, R::Nucleic] {
            for baseline in [B::None, B::Polynomial, B::Als] {
                for scatter in [Scatter::None, Scatter::Snv] {
                    for smoothing in [
                        Smoothing::None,
                        Smoothing::SavitzkyGolay,
                        Smoothing::MovingAverage,
                    ] {
                        for derivative in [D::None, D::First, D::Second, D::FirstAndSecond] {
                            for normalization in [N::None, N::Area, N::L2, N::Max] {
                                out.push(PipelineConfig {
                                    replicate_mode,
                                    region,
                                    baseline,
                                    scatter,
                                    smoothing,
                                    derivative,
                                    normalization,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Position in [`enumerate_pipelines`].
    pub index: usize,
    pub config: PipelineConfig,
    /// Mean CV AUC per scenario; `None` where evaluation failed.
    pub scenario_auc: BTreeMap<Scenario, Option<f64>>,
    /// Mean over scenarios, failures counted as 0.
    pub mean_auc: f64,
    pub worst_case: f64,
    pub flagged: bool,
    pub error: Option<String>,
}

impl SearchResult {
    pub fn new(
        index: usize,
        config: PipelineConfig,
        scenario_auc: BTreeMap<Scenario, Option<f64>>,
        error: Option<String>,
    ) -> Self {
        let scores: Vec<f64> = scenario_auc.values().map(|a| a.unwrap_or(0.0)).collect();
        let flagged = error.is_some() || scenario_auc.values().any(Option::is_none);
        let worst_case = if flagged {
            0.0
        } else {
            scores.iter().copied().fold(f64::INFINITY, f64::min)
        };
        let mean_auc = if scores.is_empty() {
            0.0
        } else {
            scores.iter().sum::<f64>() / scores.len() as f64
        };
        Self {
            index,
            config,
            scenario_auc,
            mean_auc,
            worst_case: if worst_case.is_finite() {
                worst_case
            } else {
                0.0
            },
            flagged,
            error,
        }
    }
}

/// Highest worst case; ties go to the higher mean, then the lower index.
pub fn select_minmax(results: &[SearchResult]) -> Result<&SearchResult> {
    results
        .iter()
        .reduce(|best, r| if beats(r, best) { r } else { best })
        .ok_or_else(|| Error::Empty("no search results".into()))
}

fn beats(a: &SearchResult, b: &SearchResult) -> bool {
    a.worst_case
        .total_cmp(&b.worst_case)
        .then(a.mean_auc.total_cmp(&b.mean_auc))
        .then(b.index.cmp(&a.index))
        .is_gt()
}

/// Everything a candidate evaluation depends on.
#[derive(Debug, Clone)]
pub struct SearchContext<'a> {
    pub ftir: &'a SampleTable,
    pub dataset_hash: String,
    pub scenarios: Vec<Scenario>,
    pub gbdt: GbdtParams,
    pub cv: CvSettings,
    pub ops: OperatorParams,
}

impl SearchContext<'_> {
    fn cache_key(&self, cfg: &PipelineConfig) -> String {
        let key = serde_json::json!({
            "config": cfg,
            "dataset": self.dataset_hash,
            "seed": self.cv.seed,
            "k": self.cv.k,
            "gbdt": self.gbdt,
            "scenarios": self.scenarios,
        });
        hex::encode(Sha256::digest(key.to_string().as_bytes()))
    }
}

/// Cross-validates FTIR features from `cfg` in every scenario. Failures
/// are recorded in the result instead of being returned.
pub fn evaluate_candidate(index: usize, cfg: &PipelineConfig, ctx: &SearchContext) -> SearchResult {
    let features = match ftir_features(ctx.ftir, cfg, &ctx.ops) {
        Ok(f) => f,
        Err(e) => {
            let aucs = ctx.scenarios.iter().map(|&s| (s, None)).collect();
            return SearchResult::new(index, *cfg, aucs, Some(e.to_string()));
        }
    };
    let mut error = None;
    let aucs = ctx
        .scenarios
        .iter()
        .map(|&s| match scenario_auc(&features, s, ctx) {
            Ok(a) => (s, Some(a)),
            Err(e) => {
                error.get_or_insert_with(|| format!("{}: {e}", s.name()));
                (s, None)
            }
        })
        .collect();
    SearchResult::new(index, *cfg, aucs, error)
}

fn scenario_auc(
    features: &PatientFeatures,
    scenario: Scenario,
    ctx: &SearchContext,
) -> Result<f64> {
    let map = BTreeMap::from([(Modality::Ftir, features.clone())]);
    let input = build_input(&map, scenario, &[Modality::Ftir])?;
    Ok(cross_validate(&input, &ctx.gbdt, &ctx.cv)?.summary.auc.mean)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub results: Vec<SearchResult>,
    pub winner: SearchResult,
    /// Candidates actually evaluated in this run.
    pub evaluated: usize,
    /// Candidates read back from the cache.
    pub cached: usize,
}

/// Evaluates `candidates` concurrently, reusing cached results under
/// `cache_dir` when given.
pub fn run_search(
    candidates: &[PipelineConfig],
    ctx: &SearchContext,
    cache_dir: Option<&Path>,
) -> Result<SearchOutcome> {
    if let Some(dir) = cache_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let evaluated = AtomicUsize::new(0);
    let results = candidates
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| {
            let path = cache_dir.map(|d| d.join(format!("{}.json", ctx.cache_key(cfg))));
            if let Some(r) = path.as_deref().and_then(|p| read_cached(p, i)) {
                return Ok(r);
            }
            let r = evaluate_candidate(i, cfg, ctx);
            evaluated.fetch_add(1, Ordering::Relaxed);
            if let Some(p) = path {
                write_cached(&p, &r)?;
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    let winner = select_minmax(&results)?.clone();
    let evaluated = evaluated.into_inner();
    Ok(SearchOutcome {
        cached: results.len() - evaluated,
        results,
        winner,
        evaluated,
    })
}

fn read_cached(path: &Path, index: usize) -> Option<SearchResult> {
    let text = fs::read_to_string(path).ok()?;
    let mut r: SearchResult = serde_json::from_str(&text).ok()?;
    r.index = index;
    Some(r)
}

fn write_cached(path: &Path, r: &SearchResult) -> Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    let text = serde_json::to_string(r).map_err(|e| Error::json(path, e))?;
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Default cache location, overridable with `SPECTRAFUSE_CACHE`.
pub fn cache_dir(out: &Path) -> PathBuf {
    std::env::var_os("SPECTRAFUSE_CACHE")
        .map(PathBuf::from)
        .unwrap_or_else(|| out.join("cache"))
}

const CONFIG_COLUMNS: [&str; 7] = [
    "replicate_mode",
    "region",
    "baseline",
    "scatter",
    "smoothing",
    "derivative",
    "normalization",
];

fn enum_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

/// One row per candidate: index, the 7 config columns, `auc_<scenario>`
/// per scenario, mean_auc, worst_case, flagged.
pub fn write_grid_results(
    path: &Path,
    scenarios: &[Scenario],
    results: &[SearchResult],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut header = vec!["index".to_string()];
    header.extend(CONFIG_COLUMNS.iter().map(|c| c.to_string()));
    header.extend(scenarios.iter().map(|s| format!("auc_{}", s.name())));
    header.extend(["mean_auc", "worst_case", "flagged"].map(String::from));
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for r in results {
        let c = &r.config;
        let mut row = vec![
            r.index.to_string(),
            enum_name(&c.replicate_mode),
            enum_name(&c.region),
            enum_name(&c.baseline),
            enum_name(&c.scatter),
            enum_name(&c.smoothing),
            enum_name(&c.derivative),
            enum_name(&c.normalization),
        ];
        for s in scenarios {
            row.push(
                r.scenario_auc
                    .get(s)
                    .copied()
                    .flatten()
                    .map(|a| a.to_string())
                    .unwrap_or_default(),
            );
        }
        row.extend([
            r.mean_auc.to_string(),
            r.worst_case.to_string(),
            r.flagged.to_string(),
        ]);
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Inverse of [`write_grid_results`].
pub fn read_grid_results(path: &Path) -> Result<Vec<SearchResult>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    let scenarios: Vec<Scenario> = header
        .iter()
        .filter_map(|h| h.strip_prefix("auc_"))
        .map(|s| {
            serde_json::from_value(serde_json::Value::String(s.into()))
                .map_err(|e| Error::json(path, e))
        })
        .collect::<Result<_>>()?;
    let bad = |m: String| Error::Csv {
        path: path.to_path_buf(),
        message: m,
    };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let field = |i: usize| {
            rec.get(i)
                .ok_or_else(|| bad(format!("row has no column {i}")))
        };
        let index: usize = field(0)?.parse().map_err(|_| bad("bad index".into()))?;
        let mut obj = serde_json::Map::new();
        for (j, name) in CONFIG_COLUMNS.iter().enumerate() {
            obj.insert(
                name.to_string(),
                serde_json::Value::String(field(1 + j)?.to_string()),
            );
        }
        let config: PipelineConfig =
            serde_json::from_value(obj.into()).map_err(|e| Error::json(path, e))?;
        let mut scenario_auc = BTreeMap::new();
        for (j, s) in scenarios.iter().enumerate() {
            let v = field(8 + j)?;
            let auc = if v.is_empty() {
                None
            } else {
                Some(v.parse().map_err(|_| bad(format!("bad AUC {v}")))?)
            };
            scenario_auc.insert(*s, auc);
        }
        let base = 8 + scenarios.len();
        let parse = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("bad number {v}")));
        out.push(SearchResult {
            index,
            config,
            scenario_auc,
            mean_auc: parse(field(base)?)?,
            worst_case: parse(field(base + 1)?)?,
            flagged: field(base + 2)? == "true",
            error: None,
        });
    }
    Ok(out)
}
