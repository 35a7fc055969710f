//! JSON model files:
//!
//! ```json
//! { "d_loc": 2, "k": 2,
//!   "terms": [ { "coeff": [1.0, 0.0], "string": { "1": "Z", "2": "Z" } },
//!              { "coeff": [1.05, 0.0], "string": { "1": "X" } } ] }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{canonicalize, LocalOperator, Pauli, PauliString};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    d_loc: u32,
    k: usize,
    terms: Vec<TermEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermEntry {
    coeff: [f64; 2],
    string: BTreeMap<String, Pauli>,
}

/// A translation-invariant Hamiltonian term `h` as loaded from disk.
#[derive(Debug, Clone)]
pub struct Model {
    /// Canonical, traceless, Hermitian local term.
    pub h: LocalOperator,
    /// Declared window.
    pub k: usize,
    /// Operator norm of `h` before any rescaling.
    pub raw_norm: f64,
}

impl Model {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ModelFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            Error::Model(format!(
                "field `{}`: {} (line {}, column {})",
                e.path(),
                inner,
                inner.line(),
                inner.column()
            ))
        })?;
        Self::from_file(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Model(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    fn from_file(file: ModelFile) -> Result<Self> {
        if file.d_loc != 2 {
            return Err(Error::Model(format!(
                "field `d_loc`: only qubit chains (d_loc = 2) are supported, got {}",
                file.d_loc
            )));
        }
        if file.k == 0 {
            return Err(Error::Model("field `k`: window must be at least 1".into()));
        }
        let mut terms = Vec::with_capacity(file.terms.len());
        for (i, entry) in file.terms.iter().enumerate() {
            let mut sites = Vec::new();
            for (key, letter) in &entry.string {
                let site: usize = key.parse().map_err(|_| {
                    Error::Model(format!("field `terms[{i}].string.{key}`: site key is not an integer"))
                })?;
                if site == 0 || site > file.k {
                    return Err(Error::Model(format!(
                        "field `terms[{i}].string.{key}`: site must lie in 1..={}",
                        file.k
                    )));
                }
                sites.push((site, *letter));
            }
            let string = PauliString::from_sites(sites)?;
            if string.is_identity() {
                return Err(Error::Model(format!(
                    "field `terms[{i}].string`: identity term makes h non-traceless"
                )));
            }
            terms.push((Complex64::new(entry.coeff[0], entry.coeff[1]), string));
        }
        let raw = LocalOperator::new(file.k, terms)?;
        if !raw.is_hermitian(1e-12) {
            return Err(Error::Model(
                "field `terms`: coefficients must be real (h must be Hermitian)".into(),
            ));
        }
        let h = canonicalize(&raw);
        if h.is_empty() {
            return Err(Error::Model("field `terms`: h is zero".into()));
        }
        let raw_norm = h.operator_norm()?;
        Ok(Self {
            h,
            k: file.k,
            raw_norm,
        })
    }

    pub fn from_operator(h: &LocalOperator) -> Result<Self> {
        let text = Self::to_json_for(h)?;
        Self::from_json_str(&text)
    }

    /// Same model with `h` rescaled to unit operator norm.
    pub fn normalized(&self) -> Self {
        Self {
            h: self.h.scaled(1.0 / self.raw_norm),
            k: self.k,
            raw_norm: self.raw_norm,
        }
    }

    pub fn to_json(&self) -> String {
        Self::to_json_for(&self.h).expect("loaded models serialize")
    }

    fn to_json_for(h: &LocalOperator) -> Result<String> {
        let terms = h
            .terms()
            .iter()
            .map(|(c, s)| TermEntry {
                coeff: [c.re, c.im],
                string: s.sites().map(|(site, l)| (site.to_string(), l)).collect(),
            })
            .collect();
        let file = ModelFile {
            d_loc: 2,
            k: h.window(),
            terms,
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::Model(e.to_string()))
    }
}

/// `Z1Z2 + g·X1 + hz·Z1`.
pub fn mixed_field_ising(g: f64, hz: f64) -> LocalOperator {
    let mut terms = vec![(
        Complex64::new(1.0, 0.0),
        "Z1Z2".parse().expect("valid string"),
    )];
    if g != 0.0 {
        terms.push((Complex64::new(g, 0.0), "X1".parse().expect("valid string")));
    }
    if hz != 0.0 {
        terms.push((Complex64::new(hz, 0.0), "Z1".parse().expect("valid string")));
    }
    LocalOperator::new(2, terms).expect("window 2 holds all terms")
}
