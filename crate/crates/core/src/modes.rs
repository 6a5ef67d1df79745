//! The truncated mode set: the Euclidean ball of radius `mode_radius`.
//!
//! Modes get dense ids in lexicographic order, so id order agrees with
//! `ModeIndex` order and canonical term keys can be compared as id lists.

use crate::error::{arg, Result};
use crate::lattice::{LatticeParams, ModeIndex};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub d: usize,
    pub sigma: f64,
    pub r: f64,
    pub floor_const: f64,
    pub degree_cap: u32,
    pub mode_radius: u32,
}

#[derive(Debug)]
pub struct Lattice {
    pub params: LatticeParams,
    pub r: f64,
    pub mode_radius: u32,
    modes: Vec<ModeIndex>,
    ids: FxHashMap<ModeIndex, u16>,
    sq: Vec<i64>,
    norm: Vec<f64>,
    w: Vec<f64>,
    i0: Vec<f64>,
}

impl PartialEq for Lattice {
    fn eq(&self, o: &Self) -> bool {
        self.params == o.params && self.r == o.r && self.mode_radius == o.mode_radius
    }
}

impl Lattice {
    pub fn new(params: LatticeParams, r: f64, mode_radius: u32) -> Result<Arc<Lattice>> {
        params.validate()?;
        if !(r >= 1.0) || !r.is_finite() {
            return arg(format!("r must be at least 1, got {r}"));
        }
        let rr = mode_radius as i64;
        let mut modes = Vec::new();
        let r32 = mode_radius as i32;
        let mut cur = vec![-r32; params.d];
        loop {
            let n = ModeIndex(cur.clone());
            if n.norm_sq() <= rr * rr {
                modes.push(n);
            }
            if !odometer(&mut cur, r32) {
                break;
            }
        }
        if modes.len() > (u16::MAX as usize) / 4 {
            return arg(format!("mode set too large: {} modes", modes.len()));
        }
        let ids = modes.iter().enumerate().map(|(i, n)| (n.clone(), i as u16)).collect();
        let sq: Vec<i64> = modes.iter().map(|n| n.norm_sq()).collect();
        let norm: Vec<f64> = sq.iter().map(|&s| (s as f64).sqrt()).collect();
        let w: Vec<f64> = norm.iter().map(|&e| params.weight_of_norm(e)).collect();
        let i0 = w.iter().map(|&wi| (-2.0 * r * wi).exp()).collect();
        Ok(Arc::new(Lattice { params, r, mode_radius, modes, ids, sq, norm, w, i0 }))
    }

    pub fn from_header(h: &Header) -> Result<Arc<Lattice>> {
        Self::new(LatticeParams::new(h.d, h.sigma, h.floor_const)?, h.r, h.mode_radius)
    }

    pub fn header(&self, degree_cap: u32) -> Header {
        Header {
            d: self.params.d,
            sigma: self.params.sigma,
            r: self.r,
            floor_const: self.params.floor_const,
            degree_cap,
            mode_radius: self.mode_radius,
        }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    pub fn mode(&self, id: u16) -> &ModeIndex {
        &self.modes[id as usize]
    }

    pub fn id(&self, n: &ModeIndex) -> Option<u16> {
        self.ids.get(n).copied()
    }

    pub fn id_or_err(&self, n: &ModeIndex) -> Result<u16> {
        match self.id(n) {
            Some(i) => Ok(i),
            None => arg(format!("mode {n} outside the truncated set (radius {})", self.mode_radius)),
        }
    }

    pub fn norm_sq(&self, id: u16) -> i64 {
        self.sq[id as usize]
    }

    pub fn norm(&self, id: u16) -> f64 {
        self.norm[id as usize]
    }

    pub fn angle(&self, id: u16) -> f64 {
        self.norm[id as usize].max(1.0)
    }

    pub fn w(&self, id: u16) -> f64 {
        self.w[id as usize]
    }

    /// Frozen initial action `I_n(0) = exp(-2 r w(n))`.
    pub fn i0(&self, id: u16) -> f64 {
        self.i0[id as usize]
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }
}

// last coordinate fastest, which yields lexicographic order
fn odometer(cur: &mut [i32], r: i32) -> bool {
    for i in (0..cur.len()).rev() {
        if cur[i] < r {
            cur[i] += 1;
            for c in cur.iter_mut().skip(i + 1) {
                *c = -r;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_enumeration() {
        let p = LatticeParams::with_default_floor(1, 2.5).unwrap();
        let l = Lattice::new(p, 1.0, 2).unwrap();
        let got: Vec<i32> = l.modes().iter().map(|n| n.0[0]).collect();
        assert_eq!(got, vec![-2, -1, 0, 1, 2]);
        let p2 = LatticeParams::with_default_floor(2, 2.5).unwrap();
        let l2 = Lattice::new(p2, 1.0, 2).unwrap();
        assert_eq!(l2.len(), 13);
        let l1 = Lattice::new(p2, 1.0, 1).unwrap();
        assert_eq!(l1.len(), 5);
        let mut sorted = l2.modes().to_vec();
        sorted.sort();
        assert_eq!(sorted, l2.modes());
        for (i, n) in l2.modes().iter().enumerate() {
            assert_eq!(l2.id(n), Some(i as u16));
        }
    }

    #[test]
    fn initial_actions() {
        let p = LatticeParams::new(1, 2.5, 32.0).unwrap();
        let l = Lattice::new(p, 1.0, 1).unwrap();
        let w = 32f64.ln().powf(2.5);
        assert!((l.i0(0) - (-2.0 * w).exp()).abs() < 1e-300);
        assert!(Lattice::new(p, 0.5, 1).is_err());
    }
}
