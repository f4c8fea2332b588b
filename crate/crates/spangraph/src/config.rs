//! `key = value` run configuration with command-line overrides.

use std::{
    collections::BTreeMap,
    fs,
    path::{Path, PathBuf},
    str::FromStr,
};

use spangraph_core::{LayerType, SamplerKind};

use crate::{
    error::{Error, Result},
    io::DatasetPaths,
    synth::{GraphKind, SynthSpec},
};

const KEYS: &[&str] = &[
    "data", "edges", "features", "labels", "splits",
    "gen.kind", "gen.nodes", "gen.classes", "gen.feature_dim", "gen.p_in", "gen.p_out", "gen.m", "gen.noise", "gen.seed",
    "model", "layers", "hidden", "lr", "epochs",
    "alpha_up", "beta", "s1", "s2", "sampler", "baseline",
    "seed", "out", "diag_every", "var_samples",
];

/// Raw settings in key order. Later `set` calls override earlier ones, so
/// loading the file first and the flags second makes flags win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    pub fn parse(source: &str, text: &str) -> Result<Self> {
        let mut s = Settings::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{source}:{}: expected key = value", i + 1)))?;
            s.set(k.trim(), v.trim()).map_err(|e| Error::Config(format!("{source}:{}: {e}", i + 1)))?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&path.display().to_string(), &text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key {key:?}")));
        }
        self.0.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| v.parse().map_err(|_| Error::Config(format!("bad value {v:?} for {key}"))))
            .transpose()
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    SpanGnn,
    DropEdge,
    Full,
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spangnn" => Ok(Baseline::SpanGnn),
            "dropedge" => Ok(Baseline::DropEdge),
            "full" => Ok(Baseline::Full),
            other => Err(Error::Config(format!("unknown baseline {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files(DatasetPaths),
    Generate(SynthSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DataSource,
    pub layer_type: LayerType,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub alpha_up: f64,
    pub beta: f64,
    /// Pool and selection sizes; `None` derives them from the edge count.
    pub s1: Option<usize>,
    pub s2: Option<usize>,
    pub sampler: SamplerKind,
    pub baseline: Baseline,
    pub seed: u64,
    pub out: PathBuf,
    pub diag_every: usize,
    pub var_samples: usize,
}

pub fn generator_spec(s: &Settings, seed: u64) -> Result<SynthSpec> {
    let kind = match s.get("gen.kind").unwrap_or("sbm") {
        "sbm" => GraphKind::Sbm { p_in: s.or("gen.p_in", 0.02)?, p_out: s.or("gen.p_out", 0.002)? },
        "pa" | "preferential-attachment" => GraphKind::PreferentialAttachment { m: s.or("gen.m", 5)? },
        other => return Err(Error::Config(format!("unknown generator kind {other:?}"))),
    };
    let spec = SynthSpec {
        kind,
        nodes: s.or("gen.nodes", 2000)?,
        classes: s.or("gen.classes", 4)?,
        feature_dim: s.or("gen.feature_dim", 16)?,
        noise: s.or("gen.noise", 1.0)?,
        seed: s.or("gen.seed", seed)?,
    };
    spec.validate()?;
    Ok(spec)
}

fn data_source(s: &Settings, seed: u64) -> Result<DataSource> {
    let files = ["edges", "features", "labels", "splits"];
    let paths = if let Some(dir) = s.get("data") {
        DatasetPaths::in_dir(Path::new(dir))
    } else if files.iter().any(|k| s.get(k).is_some()) {
        let get = |k: &str| {
            s.get(k).map(PathBuf::from).ok_or_else(|| Error::Config(format!("{k} path missing")))
        };
        DatasetPaths { edges: get("edges")?, features: get("features")?, labels: get("labels")?, splits: get("splits")? }
    } else {
        return generator_spec(s, seed).map(DataSource::Generate);
    };
    for p in [&paths.edges, &paths.features, &paths.labels, &paths.splits] {
        if !p.exists() {
            return Err(Error::Config(format!("{} does not exist", p.display())));
        }
    }
    Ok(DataSource::Files(paths))
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let seed = s.or("seed", 0)?;
        let cfg = RunConfig {
            data: data_source(s, seed)?,
            layer_type: s.or("model", LayerType::Gcn)?,
            hidden_dim: s.or("hidden", 16)?,
            num_layers: s.or("layers", 2)?,
            learning_rate: s.or("lr", 0.5)?,
            epochs: s.or("epochs", 200)?,
            alpha_up: s.or("alpha_up", 0.5)?,
            beta: s.or("beta", 0.1)?,
            s1: s.parsed("s1")?,
            s2: s.parsed("s2")?,
            sampler: s.or("sampler", SamplerKind::Vm)?,
            baseline: s.or("baseline", Baseline::SpanGnn)?,
            seed,
            out: PathBuf::from(s.get("out").unwrap_or("out")),
            diag_every: s.or("diag_every", 10)?,
            var_samples: s.or("var_samples", 32)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.into()));
        if self.hidden_dim == 0 || self.num_layers == 0 || self.epochs == 0 {
            return fail("hidden, layers and epochs must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail("lr must be positive");
        }
        if !(self.alpha_up > 0.0 && self.alpha_up <= 1.0) {
            return fail("alpha_up must be in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.beta) {
            return fail("beta must be in [0, 1)");
        }
        if self.diag_every == 0 || self.var_samples < 2 {
            return fail("diag_every must be positive and var_samples at least 2");
        }
        Ok(())
    }
}
