//! Run configuration: preset, then config file, then flags (or their
//! `HDAPX_*` environment variables), later sources overriding earlier ones.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use hdapx::harness::{preset, ExperimentSpec, Method, TestPoints, PRESETS};
use hdapx::sampling::Distribution;
use hdapx::test_functions::Family;
use serde::Deserialize;

use crate::RunArgs;

pub const DEFAULT_OUT: &str = "hdapx-out";

/// A list given as a TOML array, a single value or a comma-separated string.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ListValue {
    Int(u64),
    Ints(Vec<u64>),
    Text(String),
    Texts(Vec<String>),
}

impl ListValue {
    fn items(&self) -> Vec<String> {
        match self {
            ListValue::Int(v) => vec![v.to_string()],
            ListValue::Ints(v) => v.iter().map(u64::to_string).collect(),
            ListValue::Text(s) => split(s),
            ListValue::Texts(v) => v.clone(),
        }
    }
}

/// Keys mirror the `run` flags, with dashes as underscores.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub preset: Option<String>,
    pub methods: Option<ListValue>,
    pub families: Option<ListValue>,
    pub d: Option<ListValue>,
    pub scales: Option<ListValue>,
    pub instances: Option<usize>,
    pub seed: Option<ListValue>,
    pub sigma: Option<f64>,
    pub test_points: Option<usize>,
    pub chebyshev_test_points: Option<bool>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub cap_points: Option<usize>,
    pub cap_matrix_elems: Option<usize>,
    pub timings: Option<bool>,
}

pub fn load_file(path: &Path) -> Result<FileConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
}

fn split(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

fn parse_methods(items: &[String]) -> Result<Vec<Method>> {
    if items.len() == 1 && items[0].eq_ignore_ascii_case("all") {
        return Ok(Method::ALL.to_vec());
    }
    items
        .iter()
        .map(|s| s.parse::<Method>().map_err(|e| anyhow!(e)))
        .collect()
}

fn parse_families(items: &[String]) -> Result<Vec<Family>> {
    if items.len() == 1 && items[0].eq_ignore_ascii_case("all") {
        return Ok(Family::PARAMETRIC.to_vec());
    }
    items
        .iter()
        .map(|s| s.parse::<Family>().map_err(|e| anyhow!(e)))
        .collect()
}

/// Integers and inclusive ranges `a..b`.
fn parse_ints(items: &[String]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for item in items {
        if let Some((a, b)) = item.split_once("..") {
            let a: usize = a
                .trim()
                .parse()
                .with_context(|| format!("bad range {item:?}"))?;
            let b: usize = b
                .trim()
                .trim_start_matches('=')
                .parse()
                .with_context(|| format!("bad range {item:?}"))?;
            out.extend(a..=b);
        } else {
            out.push(
                item.parse()
                    .with_context(|| format!("bad integer {item:?}"))?,
            );
        }
    }
    Ok(out)
}

pub fn parse_seed(s: &str) -> Result<u64> {
    let s = s.trim().replace('_', "");
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.with_context(|| format!("bad seed {s:?}"))
}

/// Merges preset, file and flags into a validated experiment.
pub fn resolve(args: &RunArgs) -> Result<ExperimentSpec> {
    let file = match &args.config {
        Some(path) => load_file(path)?,
        None => FileConfig::default(),
    };
    let preset_name = args.preset.clone().or(file.preset.clone());
    let mut spec = match &preset_name {
        Some(name) => preset(name).ok_or_else(|| {
            anyhow!(
                "unknown preset {name:?}, expected one of {}",
                PRESETS.join(", ")
            )
        })?,
        None => ExperimentSpec::default(),
    };
    let list = |flag: &Option<String>, file: &Option<ListValue>| -> Option<Vec<String>> {
        flag.as_deref()
            .map(split)
            .or_else(|| file.as_ref().map(ListValue::items))
    };
    if let Some(v) = list(&args.methods, &file.methods) {
        spec.methods = parse_methods(&v)?;
    }
    if let Some(v) = list(&args.families, &file.families) {
        spec.families = parse_families(&v)?;
    }
    if let Some(v) = list(&args.d, &file.d) {
        spec.dims = parse_ints(&v)?;
    }
    if let Some(v) = list(&args.scales, &file.scales) {
        spec.scales = parse_ints(&v)?;
        // explicit scales replace the preset's per-dimension limit
        spec.scale_limit = None;
    }
    if let Some(v) = args.instances.or(file.instances) {
        spec.instances = v;
    }
    match (&args.seed, &file.seed) {
        (Some(s), _) => spec.root_seed = parse_seed(s)?,
        (None, Some(v)) => match v.items().as_slice() {
            [one] => spec.root_seed = parse_seed(one)?,
            _ => bail!("seed must be a single value"),
        },
        (None, None) => {}
    }
    if let Some(v) = args.sigma.or(file.sigma) {
        spec.noise_sigma = v;
    }
    if let Some(m) = args.test_points.or(file.test_points) {
        spec.test_points = TestPoints::Count(m);
    }
    if args.chebyshev_test_points || file.chebyshev_test_points == Some(true) {
        spec.test_distribution = Distribution::Chebyshev;
    }
    if let Some(v) = args.cap_points.or(file.cap_points) {
        spec.point_cap = v;
    }
    if let Some(v) = args.cap_matrix_elems.or(file.cap_matrix_elems) {
        spec.matrix_cap = v;
    }
    if let Some(v) = args.threads.or(file.threads) {
        spec.threads = v;
    }
    spec.timings = !args.no_timings && file.timings != Some(false);
    spec.output_dir = Some(
        args.out
            .clone()
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
    );

    if spec.dims.is_empty() {
        bail!("no dimensions given: pass --d or choose a preset");
    }
    if spec.scales.is_empty() {
        bail!("no scales given: pass --scales or choose a preset");
    }
    spec.validate()?;
    Ok(spec)
}
