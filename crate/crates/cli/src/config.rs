use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use coverage_core::activity::ActivityConfig;
use coverage_core::coverage::{ActorBoxSpec, ActorMembership};
use coverage_core::ego_view::EgoViewParams;
use coverage_core::mining::MiningConfig;
use coverage_core::model::{ScenarioCategory, Tag};
use coverage_core::pipeline::PipelineParams;
use coverage_core::tagging::{parse_tag_selection, TaggingConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub input: InputSection,
    pub ego_view: EgoViewParams,
    pub activity: ActivityConfig,
    pub mining: MiningConfig,
    pub tagging: TaggingSection,
    pub coverage: CoverageSection,
    pub output: OutputSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    /// Recording directories, `NN_tracks.csv` files or glob patterns.
    pub paths: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaggingSection {
    pub dv_threshold: f64,
    /// Tag symbols (`t3`), group names (`position`) or `all`.
    pub tags: Vec<String>,
}

impl Default for TaggingSection {
    fn default() -> Self {
        TaggingSection {
            dv_threshold: TaggingConfig::default().dv_threshold,
            tags: vec!["all".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagCurveSpec {
    pub label: String,
    #[serde(default = "all")]
    pub tags: Vec<String>,
    #[serde(default = "all")]
    pub categories: Vec<String>,
}

fn all() -> Vec<String> {
    vec!["all".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxCurveSpec {
    #[serde(default)]
    pub label: Option<String>,
    pub lat_halfwidth: f64,
    /// Extend the box behind the ego by the same distance as in front.
    #[serde(default)]
    pub include_rear: bool,
    pub long_front: Vec<f64>,
}

impl BoxCurveSpec {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| {
            format!(
                "lat{}_{}",
                self.lat_halfwidth,
                if self.include_rear { "front-rear" } else { "front" }
            )
        })
    }

    pub fn boxes(&self) -> Vec<ActorBoxSpec> {
        self.long_front
            .iter()
            .map(|&f| ActorBoxSpec {
                long_front: f,
                long_rear: if self.include_rear { f } else { 0.0 },
                lat_halfwidth: self.lat_halfwidth,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageSection {
    pub n_grid: Vec<u64>,
    pub tag_curves: Vec<TagCurveSpec>,
    pub time: bool,
    pub box_curves: Vec<BoxCurveSpec>,
    pub actors: ActorMembership,
}

impl Default for CoverageSection {
    fn default() -> Self {
        let fronts: Vec<f64> = (1..=10).map(|k| f64::from(k) * 10.0).collect();
        let mut box_curves = Vec::new();
        for include_rear in [false, true] {
            for lat in [1.5, 5.0, 8.5] {
                box_curves.push(BoxCurveSpec {
                    label: None,
                    lat_halfwidth: lat,
                    include_rear,
                    long_front: fronts.clone(),
                });
            }
        }
        CoverageSection {
            n_grid: vec![1, 2, 5, 10, 20, 50, 100, 200, 500, 1000],
            tag_curves: vec![TagCurveSpec {
                label: "all".into(),
                tags: all(),
                categories: all(),
            }],
            time: true,
            box_curves,
            actors: ActorMembership::Main,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// 0 = one worker per core.
    pub workers: usize,
}

/// Label, tags and categories of one tag-coverage curve.
pub type TagCurve = (String, Vec<Tag>, Vec<ScenarioCategory>);

pub fn parse_categories(items: &[String]) -> Result<Vec<ScenarioCategory>> {
    let mut out = Vec::new();
    for item in items {
        if item == "all" {
            out.extend(ScenarioCategory::ALL);
        } else {
            out.push(item.parse().map_err(|e| anyhow!("{e}"))?);
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn parse_tags(items: &[String]) -> Result<Vec<Tag>> {
    parse_tag_selection(items).map_err(|e| anyhow!(e))
}

/// Parses `value` as a TOML value, falling back to a plain string.
fn override_value(value: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()))
}

impl Config {
    /// Reads `path` (if any) and applies `section.key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Config> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str::<toml::Table>(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| anyhow!("override `{item}` is not of the form section.key=value"))?;
            let (section, field) = key
                .trim()
                .split_once('.')
                .ok_or_else(|| anyhow!("override key `{key}` needs a section, e.g. mining.catch_all"))?;
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(t) = entry else {
                bail!("`{section}` is not a section");
            };
            t.insert(field.to_string(), override_value(value.trim()));
        }
        let config: Config = table.try_into().context("invalid configuration")?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline()?.validate().map_err(|e| anyhow!(e))?;
        let c = &self.coverage;
        if c.n_grid.is_empty() {
            bail!("coverage.n_grid must not be empty");
        }
        if c.n_grid.contains(&0) {
            bail!("coverage.n_grid: n must be a positive integer");
        }
        let mut labels = std::collections::BTreeSet::new();
        for label in c.tag_curves.iter().map(|t| t.label.clone()).chain(c.box_curves.iter().map(|b| b.label())) {
            if !labels.insert(label.clone()) {
                bail!("curve label `{label}` is used twice");
            }
        }
        for curve in &c.tag_curves {
            if parse_tags(&curve.tags)?.is_empty() || parse_categories(&curve.categories)?.is_empty() {
                bail!("tag curve `{}` needs at least one tag and one category", curve.label);
            }
        }
        for curve in &c.box_curves {
            if curve.long_front.is_empty() {
                bail!("box curve `{}`: long_front grid is empty", curve.label());
            }
            for b in curve.boxes() {
                b.validate().map_err(|e| anyhow!("box curve `{}`: {e}", curve.label()))?;
            }
        }
        Ok(())
    }

    pub fn pipeline(&self) -> Result<PipelineParams> {
        Ok(PipelineParams {
            ego_view: self.ego_view.clone(),
            activity: self.activity.clone(),
            mining: self.mining.clone(),
            tagging: TaggingConfig {
                dv_threshold: self.tagging.dv_threshold,
                tags: parse_tags(&self.tagging.tags)?,
            },
        })
    }

    pub fn tag_curves(&self) -> Result<Vec<TagCurve>> {
        self.coverage
            .tag_curves
            .iter()
            .map(|c| Ok((c.label.clone(), parse_tags(&c.tags)?, parse_categories(&c.categories)?)))
            .collect()
    }

    /// Hash of every threshold that influences mining and tagging.
    pub fn fingerprint(&self) -> Result<String> {
        let params = self.pipeline()?;
        let canonical = serde_json::to_string(&params)?;
        Ok(hex::encode(&Sha256::digest(canonical.as_bytes())[..8]))
    }

    /// The configuration without run-specific settings (output location and
    /// worker count), echoed into reports.
    pub fn echo(&self) -> Config {
        Config {
            output: OutputSection::default(),
            run: RunSection::default(),
            ..self.clone()
        }
    }
}
