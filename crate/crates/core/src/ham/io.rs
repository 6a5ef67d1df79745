//! JSON file format for Hamiltonians.

use super::{Hamiltonian, Term};
use crate::error::Result;
use crate::lattice::{ModeIndex, MultiIndex};
use crate::modes::{Header, Lattice};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub a: MultiIndex,
    pub k: MultiIndex,
    pub k_bar: MultiIndex,
    pub j: Vec<ModeIndex>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianFile {
    #[serde(flatten)]
    pub header: Header,
    pub terms: Vec<TermRecord>,
}

impl HamiltonianFile {
    pub fn from_hamiltonian(h: &Hamiltonian) -> Self {
        let terms = h
            .terms()
            .into_iter()
            .map(|t| TermRecord { a: t.a, k: t.k, k_bar: t.k_bar, j: t.jmodes, re: t.coeff.re, im: t.coeff.im })
            .collect();
        HamiltonianFile { header: h.lattice().header(h.degree_cap()), terms }
    }

    pub fn to_hamiltonian(&self) -> Result<Hamiltonian> {
        let lat = Lattice::from_header(&self.header)?;
        let terms = self.terms.iter().map(|t| {
            Term::new(t.a.clone(), t.k.clone(), t.k_bar.clone(), Complex64::new(t.re, t.im)).with_j(t.j.clone())
        });
        Hamiltonian::from_terms(lat, self.header.degree_cap, terms)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl Hamiltonian {
    pub fn to_json(&self) -> Result<String> {
        HamiltonianFile::from_hamiltonian(self).to_json()
    }

    pub fn from_json(s: &str) -> Result<Hamiltonian> {
        HamiltonianFile::from_json(s)?.to_hamiltonian()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Hamiltonian> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
