//! Discrete Steklov spectra and their JSON form.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::geometry::Curvature;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMetadata {
    pub domain: String,
    pub weight: String,
    pub curvature: Curvature,
    pub dim: usize,
    /// Largest mesh edge; `None` for the 1-D radial computation.
    pub h: Option<f64>,
    pub boundary_nodes: usize,
}

/// Ascending eigenvalues `σ₀ ≤ σ₁ ≤ …` with boundary traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteklovSpectrum {
    pub eigenvalues: Vec<f64>,
    /// One trace per eigenvalue, orthonormal in the boundary mass inner
    /// product. Empty when the solver does not produce traces.
    pub boundary_eigenvectors: Vec<Vec<f64>>,
    /// Angular mode of each eigenvalue, when the computation is separated.
    pub modes: Option<Vec<usize>>,
    pub metadata: SpectrumMetadata,
    pub identities: BTreeMap<String, f64>,
}

impl SteklovSpectrum {
    /// `σ_k`, with `σ₀` the zero mode.
    pub fn sigma(&self, k: usize) -> Option<f64> {
        self.eigenvalues.get(k).copied()
    }

    pub fn nonzero(&self) -> &[f64] {
        self.eigenvalues.get(1..).unwrap_or(&[])
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "domain": self.metadata.domain,
            "weight": self.metadata.weight,
            "curvature": self.metadata.curvature.name(),
            "n": self.metadata.dim,
            "h": self.metadata.h,
            "eigenvalues": self.eigenvalues,
            "identities": self.identities,
        });
        if let Some(modes) = &self.modes {
            v["mode"] = json!(modes);
        }
        v
    }

    /// Boundary traces as CSV, one column per eigenvalue.
    pub fn eigenvectors_csv(&self) -> String {
        let mut out = String::new();
        let cols = self.boundary_eigenvectors.len();
        let header: Vec<String> = (0..cols).map(|k| format!("u{k}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        let rows = self.boundary_eigenvectors.first().map_or(0, Vec::len);
        for r in 0..rows {
            let line: Vec<String> = self.boundary_eigenvectors.iter().map(|v| format!("{:.12e}", v[r])).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}
