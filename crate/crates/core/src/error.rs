use std::path::PathBuf;

use thiserror::Error;

use crate::model::{CommodityId, LinkId};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("duplicate link id {0}")]
    DuplicateLink(LinkId),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DelayError {
    #[error("negative load {0} Mbps")]
    NegativeLoad(f64),
    #[error("allocation {0} Mbps is below the rate floor")]
    AllocBelowFloor(f64),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolverError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("iteration limit of {0} exceeded")]
    IterationLimit(usize),
    #[error("objective is not finite at the start point")]
    NonFiniteStart,
    #[error("grid oracle supports at most 3 variables, got {0}")]
    TooManyVariables(usize),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SprError {
    #[error("demand {0} has no delay-feasible candidate route")]
    NoFeasibleRoute(CommodityId),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QosError {
    #[error("link {0} has no class with positive demand")]
    NoClasses(LinkId),
    #[error("link {link}: capacity {capacity} Mbps cannot give {classes} classes the rate floor")]
    CapacityBelowFloor {
        link: LinkId,
        capacity: f64,
        classes: usize,
    },
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}:{line}:{column}: field `{field}`: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("unsupported schema_version {0}")]
    UnsupportedVersion(u32),
    #[error("unknown builtin scenario `{0}`")]
    UnknownBuiltin(String),
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("empty measurement stream")]
    EmptyStream,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
