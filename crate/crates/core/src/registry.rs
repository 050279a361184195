//! Named, runtime-selectable implementations of the pluggable pipeline stages.

use std::path::PathBuf;

use thiserror::Error;

use crate::crf::{Exhaustive, LoopyBp, MapDecoder};
use crate::edges::{detect_edges_builtin, read_edge_map, EdgeError, EdgeMap};
use crate::imagio::LabImage;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("unknown {kind} `{name}` (available: {available})")]
    Unknown {
        kind: &'static str,
        name: String,
        available: String,
    },
    #[error("{0}")]
    MissingParameter(String),
}

/// Produces an edge map for an image; dense maps are thinned by the caller.
pub trait EdgeSource: Send + Sync {
    fn name(&self) -> &'static str;
    fn edges(&self, lab: &LabImage) -> Result<EdgeMap, EdgeError>;
}

/// Oriented Gaussian-derivative detector on the Lab channels.
#[derive(Debug, Clone)]
pub struct BuiltinEdges {
    pub sigma: f64,
}

impl EdgeSource for BuiltinEdges {
    fn name(&self) -> &'static str {
        "builtin"
    }

    fn edges(&self, lab: &LabImage) -> Result<EdgeMap, EdgeError> {
        Ok(detect_edges_builtin(lab, self.sigma))
    }
}

/// Precomputed edges from an EMAP file.
#[derive(Debug, Clone)]
pub struct EmapEdges {
    pub path: PathBuf,
}

impl EdgeSource for EmapEdges {
    fn name(&self) -> &'static str {
        "emap"
    }

    fn edges(&self, lab: &LabImage) -> Result<EdgeMap, EdgeError> {
        let map = read_edge_map(&self.path)?;
        if (map.width(), map.height()) != (lab.width(), lab.height()) {
            return Err(EdgeError::SizeMismatch {
                expected: (lab.width(), lab.height()),
                got: (map.width(), map.height()),
            });
        }
        Ok(map)
    }
}

#[derive(Debug, Clone, Default)]
pub struct EdgeParams {
    pub sigma: f64,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct DecoderParams {
    pub max_iters: usize,
    pub damping: f64,
    pub tolerance: f64,
}

impl Default for DecoderParams {
    fn default() -> Self {
        let bp = LoopyBp::default();
        Self {
            max_iters: bp.max_iters,
            damping: bp.damping,
            tolerance: bp.tolerance,
        }
    }
}

type EdgeFactory = fn(&EdgeParams) -> Result<Box<dyn EdgeSource>, RegistryError>;
type DecoderFactory = fn(&DecoderParams) -> Box<dyn MapDecoder>;

const EDGE_SOURCES: &[(&str, EdgeFactory)] = &[
    ("builtin", |p| Ok(Box::new(BuiltinEdges { sigma: p.sigma }))),
    ("emap", |p| {
        let path = p
            .path
            .clone()
            .ok_or_else(|| RegistryError::MissingParameter("edge source `emap` needs a file path".into()))?;
        Ok(Box::new(EmapEdges { path }))
    }),
];

const DECODERS: &[(&str, DecoderFactory)] = &[
    ("bp", |p| {
        Box::new(LoopyBp {
            max_iters: p.max_iters,
            damping: p.damping,
            tolerance: p.tolerance,
        })
    }),
    ("exact", |_| Box::new(Exhaustive)),
];

fn unknown<T>(kind: &'static str, name: &str, table: &[(&str, T)]) -> RegistryError {
    RegistryError::Unknown {
        kind,
        name: name.into(),
        available: table.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", "),
    }
}

pub fn edge_source_names() -> Vec<&'static str> {
    EDGE_SOURCES.iter().map(|(n, _)| *n).collect()
}

pub fn decoder_names() -> Vec<&'static str> {
    DECODERS.iter().map(|(n, _)| *n).collect()
}

pub fn edge_source(name: &str, params: &EdgeParams) -> Result<Box<dyn EdgeSource>, RegistryError> {
    let (_, make) = EDGE_SOURCES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| unknown("edge source", name, EDGE_SOURCES))?;
    make(params)
}

pub fn decoder(name: &str, params: &DecoderParams) -> Result<Box<dyn MapDecoder>, RegistryError> {
    let (_, make) = DECODERS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| unknown("decoder", name, DECODERS))?;
    Ok(make(params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup() {
        assert_eq!(decoder("bp", &DecoderParams::default()).unwrap().name(), "bp");
        assert_eq!(decoder("exact", &DecoderParams::default()).unwrap().name(), "exact");
        let err = decoder("qpbo", &DecoderParams::default()).err().unwrap();
        assert!(err.to_string().contains("bp, exact"));
        let p = EdgeParams {
            sigma: 1.0,
            path: None,
        };
        assert_eq!(edge_source("builtin", &p).unwrap().name(), "builtin");
        assert!(matches!(edge_source("emap", &p), Err(RegistryError::MissingParameter(_))));
        assert_eq!(edge_source_names(), vec!["builtin", "emap"]);
    }
}
