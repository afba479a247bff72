//! Declarative run configuration (TOML).
//!
//! ```toml
//! output_dir = "out"
//! master_seed = 7
//! workers = 4
//! sets = ["all"]            # built-in names, custom set names, or "all"
//! formats = ["all"]         # e.g. "fraction-plain", "percentage-dollar-sign"
//! seeds = [1, 2, 3]
//!
//! [bayes]
//! max_samples = 1000000
//!
//! [[responders]]
//! id = "mixture"
//! kind = "mixture-orders"
//! orders = [{ ranking = ["A", "B", "C", "D", "E"], weight = 1.0 }]
//! ```

use std::collections::HashSet;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Spanned;

use crate::bayes::BfConfig;
use crate::error::{Error, Result};
use crate::experiment::{builtin_gamble_sets, GambleSet, PromptFormat};
use crate::responders::ResponderSpec;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    master_seed: u64,
    #[serde(default)]
    workers: Option<usize>,
    sets: Vec<Spanned<String>>,
    #[serde(default)]
    custom_sets: Vec<Spanned<GambleSet>>,
    formats: Vec<Spanned<String>>,
    seeds: Vec<Spanned<u64>>,
    #[serde(default)]
    bayes: BfConfig,
    responders: Vec<Spanned<ResponderSpec>>,
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sets: Vec<GambleSet>,
    pub formats: Vec<PromptFormat>,
    pub responders: Vec<ResponderSpec>,
    pub seeds: Vec<u64>,
    pub bayes: BfConfig,
    pub output_dir: PathBuf,
    /// Mixed into every simulated trial's random stream.
    pub master_seed: u64,
    pub workers: usize,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// `source:line:col` for a byte span.
fn locate(source: &str, text: &str, span: Range<usize>) -> String {
    let upto = &text[..span.start.min(text.len())];
    let line = upto.matches('\n').count() + 1;
    let col = upto.rfind('\n').map_or(upto.len(), |i| upto.len() - i - 1) + 1;
    format!("{source}:{line}:{col}")
}

impl RunConfig {
    /// Parse and validate a TOML config. Relative output paths resolve
    /// against `base_dir`.
    pub fn from_toml_str(text: &str, source: &str, base_dir: &Path) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::format(source, e))?;
        let at = |span: Range<usize>, msg: String| Error::format(locate(source, text, span), msg);

        let mut seen = HashSet::new();
        for s in &file.seeds {
            if !seen.insert(*s.get_ref()) {
                return Err(at(s.span(), format!("duplicate seed {}", s.get_ref())));
            }
        }

        let mut custom: Vec<GambleSet> = Vec::new();
        for cs in &file.custom_sets {
            let set = cs.get_ref();
            if custom.iter().any(|c| c.name() == set.name())
                || builtin_gamble_sets().iter().any(|b| b.name() == set.name())
            {
                return Err(at(cs.span(), format!("gamble set name {:?} already defined", set.name())));
            }
            custom.push(set.clone());
        }
        let known: Vec<GambleSet> = builtin_gamble_sets().into_iter().chain(custom.iter().cloned()).collect();
        let mut sets: Vec<GambleSet> = Vec::new();
        for s in &file.sets {
            let name = s.get_ref();
            let picked: Vec<GambleSet> = if name == "all" {
                builtin_gamble_sets()
            } else {
                vec![known
                    .iter()
                    .find(|k| k.name() == name)
                    .cloned()
                    .ok_or_else(|| at(s.span(), format!("unknown gamble set {name:?}")))?]
            };
            for set in picked {
                if sets.iter().any(|x| x.name() == set.name()) {
                    return Err(at(s.span(), format!("gamble set {:?} listed twice", set.name())));
                }
                sets.push(set);
            }
        }

        let mut formats: Vec<PromptFormat> = Vec::new();
        for f in &file.formats {
            let picked = if f.get_ref() == "all" {
                PromptFormat::all()
            } else {
                vec![f.get_ref().parse::<PromptFormat>().map_err(|e| at(f.span(), e.to_string()))?]
            };
            for fmt in picked {
                if formats.contains(&fmt) {
                    return Err(at(f.span(), format!("format {fmt} listed twice")));
                }
                formats.push(fmt);
            }
        }

        let mut responders: Vec<ResponderSpec> = Vec::new();
        for r in &file.responders {
            let spec = r.get_ref();
            spec.validate().map_err(|e| at(r.span(), e.to_string()))?;
            if responders.iter().any(|x| x.id == spec.id) {
                return Err(at(r.span(), format!("duplicate responder id {:?}", spec.id)));
            }
            responders.push(spec.clone());
        }

        let output_dir = base_dir.join(file.output_dir.unwrap_or_else(|| PathBuf::from("out")));
        let cfg = RunConfig {
            sets,
            formats,
            responders,
            seeds: file.seeds.into_iter().map(Spanned::into_inner).collect(),
            bayes: file.bayes,
            output_dir,
            master_seed: file.master_seed,
            workers: file.workers.unwrap_or_else(default_workers),
        };
        cfg.validate().map_err(|e| Error::format(source, e))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, &path.display().to_string(), base)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |what: &str| Err(Error::InvalidConfig(format!("at least one {what} is required")));
        if self.sets.is_empty() {
            return empty("gamble set");
        }
        if self.formats.is_empty() {
            return empty("format");
        }
        if self.responders.is_empty() {
            return empty("responder");
        }
        if self.seeds.is_empty() {
            return empty("seed");
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        let mut seen = HashSet::new();
        if let Some(s) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(Error::InvalidConfig(format!("duplicate seed {s}")));
        }
        for r in &self.responders {
            r.validate()?;
        }
        self.bayes.validate()
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.output_dir.join("manifest.csv")
    }

    pub fn results_path(&self) -> PathBuf {
        self.output_dir.join("results.csv")
    }

    pub fn report_path(&self) -> PathBuf {
        self.output_dir.join("report.json")
    }

    pub fn responder_ids(&self) -> Vec<String> {
        self.responders.iter().map(|r| r.id.clone()).collect()
    }
}
