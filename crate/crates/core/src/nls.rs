//! The truncated cubic NLS Hamiltonian and its initial normal form.

use crate::dioph::FrequencyVector;
use crate::error::{arg, Result};
use crate::ham::{Hamiltonian, Term};
use crate::homological::NormalForm;
use crate::lattice::{LatticeParams, ModeIndex, MultiIndex};
use crate::modes::Lattice;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NlsConfig {
    pub d: usize,
    pub mode_radius: u32,
    pub epsilon: f64,
    /// +1 or -1
    pub sign: f64,
    pub sigma: f64,
    pub r: f64,
    pub floor_const: f64,
    pub degree_cap: u32,
    /// multiply each monomial by the number of ordered tuples it collects
    pub physical_multiplicity: bool,
}

impl Default for NlsConfig {
    fn default() -> Self {
        NlsConfig {
            d: 1,
            mode_radius: 1,
            epsilon: 1e-6,
            sign: 1.0,
            sigma: 2.5,
            r: 1.0,
            floor_const: LatticeParams::DEFAULT_FLOOR,
            degree_cap: 8,
            physical_multiplicity: false,
        }
    }
}

impl NlsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return arg(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.sign != 1.0 && self.sign != -1.0 {
            return arg(format!("sign must be +1 or -1, got {}", self.sign));
        }
        if self.degree_cap < 4 {
            return arg(format!("degree_cap must be at least 4, got {}", self.degree_cap));
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<Arc<Lattice>> {
        Lattice::new(LatticeParams::new(self.d, self.sigma, self.floor_const)?, self.r, self.mode_radius)
    }

    /// `eps / (2 pi)^d`
    pub fn eps0(&self) -> f64 {
        self.epsilon / (2.0 * std::f64::consts::PI).powi(self.d as i32)
    }
}

fn ordered_count(pair: &(ModeIndex, ModeIndex)) -> f64 {
    if pair.0 == pair.1 {
        1.0
    } else {
        2.0
    }
}

pub fn build_cubic_nls(cfg: &NlsConfig) -> Result<Hamiltonian> {
    cfg.validate()?;
    let lat = cfg.lattice()?;
    let modes = lat.modes();
    // size-two multisets grouped by their sum
    let mut by_sum: BTreeMap<ModeIndex, Vec<(ModeIndex, ModeIndex)>> = BTreeMap::new();
    for i in 0..modes.len() {
        for j in i..modes.len() {
            let s = modes[i].add_scaled(&modes[j], 1);
            by_sum.entry(s).or_default().push((modes[i].clone(), modes[j].clone()));
        }
    }
    let c = cfg.sign * cfg.eps0();
    let mut terms = Vec::new();
    for group in by_sum.values() {
        for p in group {
            for q in group {
                let mult = if cfg.physical_multiplicity { ordered_count(p) * ordered_count(q) } else { 1.0 };
                terms.push(Term::new(
                    MultiIndex::new(),
                    MultiIndex::from_modes([&p.0, &p.1]),
                    MultiIndex::from_modes([&q.0, &q.1]),
                    Complex64::new(c * mult, 0.0),
                ));
            }
        }
    }
    Hamiltonian::from_terms(lat, cfg.degree_cap, terms)
}

/// `V-breve = 0`, `V-hat = omega`.
pub fn build_normal_form(lat: &Lattice, omega: &FrequencyVector) -> Result<NormalForm> {
    NormalForm::new(lat, omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ham::{norm, NormKind};
    use crate::homological::RHO0;

    #[test]
    fn eight_terms_at_radius_one() {
        let h = build_cubic_nls(&NlsConfig::default()).unwrap();
        assert_eq!(h.len(), 8);
        assert!(h.all_conserving());
        assert_eq!(h.reality_defect(), 0.0);
    }

    #[test]
    fn initial_norm_below_eps0() {
        let cfg = NlsConfig { d: 2, mode_radius: 2, ..Default::default() };
        let h = build_cubic_nls(&cfg).unwrap();
        assert!(norm(&h, NormKind::Sup, RHO0).unwrap() <= cfg.eps0());
    }

    #[test]
    fn linear_in_epsilon() {
        let a = build_cubic_nls(&NlsConfig::default()).unwrap();
        let b = build_cubic_nls(&NlsConfig { epsilon: 2e-6, ..Default::default() }).unwrap();
        for (x, y) in a.terms().iter().zip(b.terms()) {
            assert_eq!(2.0 * x.coeff, y.coeff);
        }
        assert_eq!(2.0 * norm(&a, NormKind::Star, 0.1).unwrap(), norm(&b, NormKind::Star, 0.1).unwrap());
    }

    #[test]
    fn normal_form_from_zero_frequency() {
        let cfg = NlsConfig { mode_radius: 2, ..Default::default() };
        let lat = cfg.lattice().unwrap();
        let w = FrequencyVector::from_dense(&lat, &vec![0.0; lat.len()]);
        let nf = build_normal_form(&lat, &w).unwrap();
        assert_eq!(nf.omega(&lat), vec![4.0, 1.0, 0.0, 1.0, 4.0]);
        assert!(build_normal_form(&lat, &FrequencyVector::default()).is_err());
    }
}
