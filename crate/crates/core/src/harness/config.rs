use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algorithms::REFERENCE_TOL;
use crate::error::{Error, Result};
use crate::topology::TopologyKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub kind: TopologyKind,
    pub n: usize,
    /// Connectivity ratio; read only for random graphs.
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_tau() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemSpec {
    Logistic {
        m: usize,
        p: usize,
        rho: f64,
        #[serde(default)]
        seed: u64,
    },
    Quadratic {
        p: usize,
        #[serde(default)]
        seed: u64,
        /// Eigenvalue range of every `A_i`.
        curvature: [f64; 2],
    },
}

impl ProblemSpec {
    pub fn seed(&self) -> u64 {
        match self {
            ProblemSpec::Logistic { seed, .. } | ProblemSpec::Quadratic { seed, .. } => *seed,
        }
    }

    pub fn set_seed(&mut self, value: u64) {
        match self {
            ProblemSpec::Logistic { seed, .. } | ProblemSpec::Quadratic { seed, .. } => *seed = value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    NewtonTracking { alpha: f64, eps: f64 },
    PrimalDual { alpha: f64, eps: f64 },
    GradientTracking { alpha: f64 },
    Extra { alpha: f64 },
    Dlm { alpha: f64, eps: f64 },
}

impl AlgorithmSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmSpec::NewtonTracking { .. } => "newton_tracking",
            AlgorithmSpec::PrimalDual { .. } => "primal_dual",
            AlgorithmSpec::GradientTracking { .. } => "gradient_tracking",
            AlgorithmSpec::Extra { .. } => "extra",
            AlgorithmSpec::Dlm { .. } => "dlm",
        }
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            AlgorithmSpec::NewtonTracking { alpha, .. }
            | AlgorithmSpec::PrimalDual { alpha, .. }
            | AlgorithmSpec::GradientTracking { alpha }
            | AlgorithmSpec::Extra { alpha }
            | AlgorithmSpec::Dlm { alpha, .. } => alpha,
        }
    }

    pub fn eps(&self) -> Option<f64> {
        match *self {
            AlgorithmSpec::NewtonTracking { eps, .. }
            | AlgorithmSpec::PrimalDual { eps, .. }
            | AlgorithmSpec::Dlm { eps, .. } => Some(eps),
            AlgorithmSpec::GradientTracking { .. } | AlgorithmSpec::Extra { .. } => None,
        }
    }

    /// `(α, ε)` when the rate certificate and G-norm apply.
    pub fn certified_pair(&self) -> Option<(f64, f64)> {
        match *self {
            AlgorithmSpec::NewtonTracking { alpha, eps } | AlgorithmSpec::PrimalDual { alpha, eps } => {
                Some((alpha, eps))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    #[serde(default)]
    pub certificate: bool,
    #[serde(default = "default_free_constant")]
    pub beta: f64,
    #[serde(default = "default_free_constant")]
    pub phi: f64,
    /// Search `(β, φ)` over the default grid instead of using the fixed pair.
    #[serde(default)]
    pub grid: bool,
    #[serde(default)]
    pub checks: bool,
}

fn default_free_constant() -> f64 {
    2.0
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        AnalysisSpec {
            certificate: false,
            beta: 2.0,
            phi: 2.0,
            grid: false,
            checks: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepEntry {
    pub kind: TopologyKind,
    #[serde(default = "default_tau")]
    pub tau: f64,
}

impl SweepEntry {
    pub fn label(&self) -> String {
        match self.kind {
            TopologyKind::Random => format!("random-{}", self.tau),
            kind => kind.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: String,
    pub topology: TopologySpec,
    pub problem: ProblemSpec,
    pub algorithms: Vec<AlgorithmSpec>,
    pub iterations: usize,
    /// Stop a trace once its relative error reaches this value.
    #[serde(default)]
    pub stop_below: Option<f64>,
    #[serde(default = "default_reference_tol")]
    pub reference_tol: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    /// Record wall-clock time per iteration. Off by default so output files
    /// depend on the configuration alone.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub sweep: Vec<SweepEntry>,
}

fn default_reference_tol() -> f64 {
    REFERENCE_TOL
}

fn positive(path: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("must be positive and finite, got {value}")).context(path))
    }
}

fn nonzero(path: &str, value: usize) -> Result<()> {
    if value == 0 {
        Err(Error::InvalidParameter("must be at least 1".into()).context(path))
    } else {
        Ok(())
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every parameter the run will read. Error contexts name the
    /// offending field, e.g. `algorithms[1].alpha`.
    pub fn validate(&self) -> Result<()> {
        nonzero("topology.n", self.topology.n)?;
        let uses_tau = self.topology.kind == TopologyKind::Random || !self.sweep.is_empty();
        if uses_tau && !(self.topology.tau > 0.0 && self.topology.tau <= 1.0) {
            return Err(
                Error::InvalidParameter(format!("must lie in (0, 1], got {}", self.topology.tau))
                    .context("topology.tau"),
            );
        }
        for (k, entry) in self.sweep.iter().enumerate() {
            if !(entry.tau > 0.0 && entry.tau <= 1.0) {
                return Err(
                    Error::InvalidParameter(format!("must lie in (0, 1], got {}", entry.tau))
                        .context(format!("sweep[{k}].tau")),
                );
            }
        }
        match &self.problem {
            ProblemSpec::Logistic { m, p, rho, .. } => {
                nonzero("problem.m", *m)?;
                nonzero("problem.p", *p)?;
                positive("problem.rho", *rho)?;
            }
            ProblemSpec::Quadratic { p, curvature, .. } => {
                nonzero("problem.p", *p)?;
                positive("problem.curvature[0]", curvature[0])?;
                positive("problem.curvature[1]", curvature[1])?;
                if curvature[0] > curvature[1] {
                    return Err(
                        Error::InvalidParameter("lower bound exceeds upper bound".into()).context("problem.curvature")
                    );
                }
            }
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidParameter("select at least one method".into()).context("algorithms"));
        }
        for (k, spec) in self.algorithms.iter().enumerate() {
            positive(&format!("algorithms[{k}].alpha"), spec.alpha())?;
            if let Some(eps) = spec.eps() {
                positive(&format!("algorithms[{k}].eps"), eps)?;
            }
        }
        positive("reference_tol", self.reference_tol)?;
        if let Some(stop) = self.stop_below {
            positive("stop_below", stop)?;
        }
        for (path, value) in [
            ("analysis.beta", self.analysis.beta),
            ("analysis.phi", self.analysis.phi),
        ] {
            if !(value > 1.0 && value.is_finite()) {
                return Err(Error::InvalidParameter(format!("must exceed 1, got {value}")).context(path));
            }
        }
        Ok(())
    }

    /// Same run on another topology.
    pub fn with_topology(&self, entry: SweepEntry) -> RunConfig {
        let mut out = self.clone();
        out.topology.kind = entry.kind;
        out.topology.tau = entry.tau;
        out.name = if self.name.is_empty() {
            entry.label()
        } else {
            format!("{}/{}", self.name, entry.label())
        };
        out.sweep.clear();
        out
    }
}

const PRESETS: [(&str, &str); 6] = [
    ("logistic-n10", include_str!("../../presets/logistic-n10.json")),
    ("topology-sweep", include_str!("../../presets/topology-sweep.json")),
    ("compare-n50", include_str!("../../presets/compare-n50.json")),
    (
        "compare-n50-tuned",
        include_str!("../../presets/compare-n50-tuned.json"),
    ),
    ("compare-n100", include_str!("../../presets/compare-n100.json")),
    ("contraction", include_str!("../../presets/contraction.json")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(name, _)| *name)
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let (_, text) = PRESETS
        .iter()
        .find(|(key, _)| *key == name)
        .ok_or_else(|| Error::UnknownPreset(name.to_string()))?;
    RunConfig::from_json(text).map_err(|e| e.context(format!("preset {name}")))
}
