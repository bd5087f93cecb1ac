//! Experiment configuration: one TOML document per experiment, validated
//! against the core module preconditions before any work starts.

use obqsim_core::exec::Catalog;
use obqsim_core::metric::ErrPolicy;
use obqsim_core::plan::{PlacementRule, PlanSpec, StrategySpec};
use obqsim_core::resizer::TrimStrategy;
use obqsim_core::synth::SyntheticSpec;
use obqsim_core::{csvio, Schema};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Free-form experiment identifier echoed into output rows.
    #[serde(default = "default_experiment")]
    pub experiment: String,
    pub plan: Option<PlanSpec>,
    pub catalog: Option<CatalogConfig>,
    pub placement: Option<PlacementConfig>,
    pub metric: Option<MetricConfig>,
    pub operator: Option<OperatorConfigSection>,
    pub sweep: Option<SweepConfig>,
    pub attack: Option<AttackConfig>,
    pub cost: Option<CostConfig>,
    pub mc: Option<McSection>,
    pub bench: Option<BenchConfig>,
}

fn default_experiment() -> String {
    "experiment".to_string()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogConfig {
    pub synthetic: Option<SyntheticConfig>,
    #[serde(default)]
    pub csv: Vec<CsvTableConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub table_sizes: Vec<u64>,
    pub selectivity: f64,
    #[serde(default = "default_key_domain")]
    pub key_domain: i64,
    #[serde(default)]
    pub with_filters: bool,
}

fn default_key_domain() -> i64 {
    1_000_000
}

impl SyntheticConfig {
    pub fn to_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            table_sizes: self.table_sizes.clone(),
            selectivity: self.selectivity,
            key_domain: self.key_domain,
            with_filters: self.with_filters,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvTableConfig {
    pub name: String,
    pub path: String,
    pub columns: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementConfig {
    pub rule: String,
    pub strategy: Option<StrategySpec>,
}

impl PlacementConfig {
    pub fn build(&self) -> Result<PlacementRule, String> {
        let shared = || -> Result<TrimStrategy, String> {
            self.strategy
                .as_ref()
                .ok_or_else(|| format!("placement rule `{}` needs a strategy", self.rule))?
                .build()
                .map_err(|e| e.to_string())
        };
        match self.rule.as_str() {
            "none" => Ok(PlacementRule::None),
            "fully-revealed" => Ok(PlacementRule::FullyRevealed),
            "after-all" => Ok(PlacementRule::AfterAll(shared()?)),
            "after-joins" => Ok(PlacementRule::AfterJoins(shared()?)),
            "after-groupbys" => Ok(PlacementRule::AfterGroupBys(shared()?)),
            other => Err(format!(
                "unknown placement rule `{other}` (none, fully-revealed, after-all, \
                 after-joins, after-groupbys)"
            )),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    pub alpha: f64,
    pub err: ErrConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrConfig {
    pub kind: String,
    pub value: f64,
}

impl ErrConfig {
    pub fn build(&self) -> Result<ErrPolicy, String> {
        match self.kind.as_str() {
            "absolute" => Ok(ErrPolicy::Absolute(self.value)),
            "fraction-of-n" => Ok(ErrPolicy::FractionOfN(self.value)),
            other => Err(format!(
                "unknown err kind `{other}` (absolute, fraction-of-n)"
            )),
        }
    }
}

/// Operator-level experiment: a single (N, T, strategy) configuration,
/// optionally swept over N.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfigSection {
    pub n: u64,
    pub t_fraction: f64,
    pub strategy: StrategySpec,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub n: Vec<u64>,
    /// Filler fractions as exact decimal strings ("0", "0.1", ...).
    #[serde(default)]
    pub f: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    pub err: f64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_ceiling")]
    pub ceiling: u64,
}

fn default_trials() -> u64 {
    400
}

fn default_ceiling() -> u64 {
    1 << 22
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    /// Selectivity as an exact decimal string.
    pub selectivity: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub samples: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default)]
    pub rows: Vec<u64>,
    #[serde(default)]
    pub cols: Vec<u64>,
    #[serde(default = "default_bench_rows_for_cols")]
    pub rows_for_cols: u64,
    #[serde(default = "default_bench_reps")]
    pub reps: u64,
}

fn default_bench_rows_for_cols() -> u64 {
    10_000
}

fn default_bench_reps() -> u64 {
    5
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config `{}`: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("config `{}`: {e}", path.display()))
}

/// Materialize the configured catalog: synthetic chain tables (named
/// t0, t1, ...) and/or CSV-loaded tables.
pub fn build_catalog(
    config: &ExperimentConfig,
    seed: u64,
    csv_has_header: bool,
    config_dir: &Path,
) -> Result<(Catalog, Option<obqsim_core::synth::GenReport>), String> {
    let section = config
        .catalog
        .as_ref()
        .ok_or_else(|| "missing [catalog] section".to_string())?;
    let mut catalog = Catalog::new();
    let mut report = None;
    if let Some(synth) = &section.synthetic {
        let (tables, gen_report) = obqsim_core::synth::gen_synthetic(&synth.to_spec(), seed)
            .map_err(|e| e.to_string())?;
        for (i, table) in tables.into_iter().enumerate() {
            catalog.insert(format!("t{i}"), table);
        }
        report = Some(gen_report);
    }
    for csv in &section.csv {
        let schema =
            Schema::shared(csv.columns.clone()).map_err(|e| e.to_string())?;
        let path = config_dir.join(&csv.path);
        let table =
            csvio::load_csv(&path, schema, csv_has_header).map_err(|e| e.to_string())?;
        catalog.insert(csv.name.clone(), table);
    }
    Ok((catalog, report))
}
