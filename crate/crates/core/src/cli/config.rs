use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{OperatorSets, TemplateId, TreeTemplate};
use crate::search::SearchConfig;
use crate::systems::{DatasetSpec, Sampler, System};

/// One dataset of an experiment. The system comes from the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub start: f64,
    pub end: f64,
    pub step: f64,
    pub count: usize,
    pub rel_tol: f64,
    /// Defaults to the system's standard sampler.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<Sampler>,
}

impl DataConfig {
    fn from_spec(s: &DatasetSpec) -> Self {
        Self {
            start: s.start,
            end: s.end,
            step: s.step,
            count: s.count,
            rel_tol: s.rel_tol,
            sampler: None,
        }
    }
}

/// A complete, reproducible experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub system: System,
    pub template: TemplateId,
    pub operators: OperatorSets,
    pub train: DataConfig,
    pub test: DataConfig,
    pub search: SearchConfig,
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn nonseparable() -> Self {
        Self {
            seed: 0,
            system: System::nonseparable(),
            template: TemplateId::Nonseparable,
            operators: OperatorSets::nonseparable(),
            train: DataConfig::from_spec(&DatasetSpec::nonseparable_train()),
            test: DataConfig::from_spec(&DatasetSpec::nonseparable_test()),
            search: SearchConfig::nonseparable(),
            output: PathBuf::from("runs/nonseparable"),
        }
    }

    /// Three-body experiment trained on `[0, train_end]`.
    pub fn three_body(train_end: f64) -> Self {
        Self {
            seed: 0,
            system: System::three_body(),
            template: TemplateId::ThreeBody,
            operators: OperatorSets::three_body(),
            train: DataConfig::from_spec(&DatasetSpec::three_body_train(train_end)),
            test: DataConfig::from_spec(&DatasetSpec::three_body_test()),
            search: SearchConfig::three_body(),
            output: PathBuf::from(format!("runs/threebody_t{train_end}")),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses JSON, reporting the offending field path on failure.
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Usage(format!("{path}: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate().map_err(|e| Error::Usage(format!("system: {e}")))?;
        self.operators
            .validate()
            .map_err(|e| Error::Usage(format!("operators: {e}")))?;
        self.search.validate()?;
        let template = self.template.build();
        if template.momentum_dim() != self.system.dim() {
            return Err(Error::Usage(format!(
                "template: {:?} expects dimension {}, system has {}",
                self.template,
                template.momentum_dim(),
                self.system.dim()
            )));
        }
        for (name, d) in [("train", &self.train), ("test", &self.test)] {
            if d.count == 0 {
                return Err(Error::Usage(format!("{name}.count: must be at least 1")));
            }
            self.dataset(d, 0)
                .grid()
                .map_err(|e| Error::Usage(format!("{name}: {e}")))?;
        }
        Ok(())
    }

    pub fn template(&self) -> TreeTemplate {
        self.template.build()
    }

    /// Search settings with the experiment seed applied.
    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            seed: self.seed,
            ..self.search.clone()
        }
    }

    fn dataset(&self, d: &DataConfig, stream: u64) -> DatasetSpec {
        DatasetSpec {
            system: self.system,
            sampler: d.sampler.unwrap_or_else(|| Sampler::default_for(&self.system)),
            start: d.start,
            end: d.end,
            step: d.step,
            count: d.count,
            rel_tol: d.rel_tol,
            stream,
        }
    }

    pub fn train_spec(&self) -> DatasetSpec {
        self.dataset(&self.train, 0)
    }

    pub fn test_spec(&self) -> DatasetSpec {
        self.dataset(&self.test, 1)
    }
}
