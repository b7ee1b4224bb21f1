//! Dense tensor-product state engine for mixed collections of atom-cavity
//! subsystems and spectator qubits.
//!
//! An active subsystem is a 3-level atom {|0>, |1>, |e>} together with a
//! 0/1-photon cavity mode, giving local dimension 6 with basis index
//! `atom * 2 + cavity`. Spectator qubits have dimension 2. Amplitudes are a
//! flat dense array under mixed-radix indexing, last subsystem fastest.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NORM_TOL: f64 = 1e-12;

/// Atom levels of an active subsystem.
pub const ATOM_G0: usize = 0;
pub const ATOM_G1: usize = 1;
pub const ATOM_E: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubsystemKind {
    /// 3-level atom with a single-photon cavity mode; dimension 6.
    Active,
    /// Graph neighbor outside the optical network; dimension 2.
    SpectatorQubit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsystemSpec {
    pub kind: SubsystemKind,
    pub label: u32,
}

impl SubsystemSpec {
    pub fn active(label: u32) -> Self {
        Self { kind: SubsystemKind::Active, label }
    }

    pub fn qubit(label: u32) -> Self {
        Self { kind: SubsystemKind::SpectatorQubit, label }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            SubsystemKind::Active => 6,
            SubsystemKind::SpectatorQubit => 2,
        }
    }

    /// Local basis index of an active subsystem.
    pub fn active_index(atom: usize, cavity: usize) -> usize {
        debug_assert!(atom < 3 && cavity < 2);
        atom * 2 + cavity
    }
}

/// A square operator acting on one subsystem, row-major.
#[derive(Clone, Debug)]
pub struct LocalOperator {
    pub target: u32,
    pub matrix: Vec<Complex64>,
    pub dim: usize,
}

impl LocalOperator {
    pub fn new(target: u32, dim: usize, matrix: Vec<Complex64>) -> Self {
        assert_eq!(matrix.len(), dim * dim);
        Self { target, matrix, dim }
    }

    pub fn qubit(target: u32, m: [[Complex64; 2]; 2]) -> Self {
        Self::new(target, 2, vec![m[0][0], m[0][1], m[1][0], m[1][1]])
    }

    /// Cavity annihilation operator restricted to the 0/1 Fock cutoff:
    /// |atom, 1ph> -> |atom, vac>, vacuum components map to zero.
    pub fn annihilation(target: u32) -> Self {
        let mut m = vec![Complex64::ZERO; 36];
        for atom in 0..3 {
            let from = SubsystemSpec::active_index(atom, 1);
            let to = SubsystemSpec::active_index(atom, 0);
            m[to * 6 + from] = Complex64::ONE;
        }
        Self { target, matrix: m, dim: 6 }
    }

    /// sigma_z on the qubit subspace {|0>, |1>} of an active subsystem
    /// (|e> and photon components untouched).
    pub fn sigma_z_active(target: u32) -> Self {
        let mut m = vec![Complex64::ZERO; 36];
        for atom in 0..3 {
            let sign = if atom == ATOM_G1 { -1.0 } else { 1.0 };
            for cavity in 0..2 {
                let i = SubsystemSpec::active_index(atom, cavity);
                m[i * 6 + i] = Complex64::new(sign, 0.0);
            }
        }
        Self { target, matrix: m, dim: 6 }
    }
}

#[derive(Clone, Debug)]
pub struct StateVector {
    specs: Vec<SubsystemSpec>,
    amps: Vec<Complex64>,
    normalized: bool,
}

impl StateVector {
    pub fn zero(specs: Vec<SubsystemSpec>) -> Self {
        let dim = specs.iter().map(|s| s.dim()).product();
        Self { specs, amps: vec![Complex64::ZERO; dim], normalized: false }
    }

    pub fn from_amps(specs: Vec<SubsystemSpec>, amps: Vec<Complex64>) -> Self {
        let dim: usize = specs.iter().map(|s| s.dim()).product();
        assert_eq!(amps.len(), dim, "amplitude array length must equal Hilbert dimension");
        let mut sv = Self { specs, amps, normalized: false };
        sv.normalized = (sv.norm2() - 1.0).abs() < NORM_TOL;
        sv
    }

    /// All subsystems in their lowest basis state.
    pub fn ground(specs: Vec<SubsystemSpec>) -> Self {
        let mut sv = Self::zero(specs);
        sv.amps[0] = Complex64::ONE;
        sv.normalized = true;
        sv
    }

    pub fn specs(&self) -> &[SubsystemSpec] {
        &self.specs
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [Complex64] {
        self.normalized = false;
        &mut self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn position_of(&self, label: u32) -> Result<usize> {
        self.specs
            .iter()
            .position(|s| s.label == label)
            .ok_or(Error::UnknownLabel(label))
    }

    /// Mixed-radix flattening of a per-subsystem index tuple.
    pub fn index_of(&self, tuple: &[usize]) -> usize {
        debug_assert_eq!(tuple.len(), self.specs.len());
        let mut idx = 0;
        for (spec, &t) in self.specs.iter().zip(tuple) {
            debug_assert!(t < spec.dim());
            idx = idx * spec.dim() + t;
        }
        idx
    }

    /// Inverse of [`index_of`].
    pub fn tuple_of(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.specs.len()];
        for (i, spec) in self.specs.iter().enumerate().rev() {
            out[i] = idx % spec.dim();
            idx /= spec.dim();
        }
        out
    }

    pub fn norm2(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let n = self.norm2().sqrt();
        if n > 0.0 {
            for a in &mut self.amps {
                *a /= n;
            }
            self.normalized = true;
        }
    }

    pub fn scale(&mut self, c: Complex64) {
        for a in &mut self.amps {
            *a *= c;
        }
        self.normalized = false;
    }

    pub fn add_assign(&mut self, other: &StateVector) {
        assert_eq!(self.dim(), other.dim());
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += b;
        }
        self.normalized = false;
    }

    /// Conjugate-linear in `self`: <self|other>.
    pub fn overlap(&self, other: &StateVector) -> Result<Complex64> {
        if self.specs != other.specs {
            return Err(Error::SpecMismatch);
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Applies `op` to its target subsystem. The result is not renormalized,
    /// so non-unitary jump operators are supported.
    pub fn apply_local(&mut self, op: &LocalOperator) -> Result<()> {
        let pos = self.position_of(op.target)?;
        let sub_dim = self.specs[pos].dim();
        if sub_dim != op.dim {
            return Err(Error::DimensionMismatch { op: op.dim, sub: sub_dim, label: op.target });
        }
        let stride: usize = self.specs[pos + 1..].iter().map(|s| s.dim()).product();
        let block = stride * sub_dim;
        let mut scratch = vec![Complex64::ZERO; sub_dim];
        let dim = self.dim();
        let mut base = 0;
        while base < dim {
            for off in 0..stride {
                for (k, s) in scratch.iter_mut().enumerate() {
                    *s = self.amps[base + k * stride + off];
                }
                for r in 0..sub_dim {
                    let mut acc = Complex64::ZERO;
                    for (c, s) in scratch.iter().enumerate() {
                        acc += op.matrix[r * sub_dim + c] * s;
                    }
                    self.amps[base + r * stride + off] = acc;
                }
            }
            base += block;
        }
        self.normalized = false;
        Ok(())
    }

    /// Ideal instantaneous pi-pulse: swaps atomic levels |1> and |e> on each
    /// target. Errors out if a target's cavity already holds a photon.
    pub fn excite(&mut self, targets: &[u32]) -> Result<()> {
        let mut positions = Vec::with_capacity(targets.len());
        for &t in targets {
            let pos = self.position_of(t)?;
            if self.specs[pos].kind != SubsystemKind::Active {
                return Err(Error::UnknownLabel(t));
            }
            positions.push(pos);
        }
        for (i, amp) in self.amps.iter().enumerate() {
            if amp.norm_sqr() > NORM_TOL {
                let tuple = self.tuple_of(i);
                for (&pos, &t) in positions.iter().zip(targets) {
                    if tuple[pos] % 2 == 1 {
                        return Err(Error::DoubleExcitation(t));
                    }
                }
            }
        }
        for &pos in &positions {
            self.swap_atom_levels(pos, ATOM_G1, ATOM_E);
        }
        Ok(())
    }

    fn swap_atom_levels(&mut self, pos: usize, a: usize, b: usize) {
        let stride: usize = self.specs[pos + 1..].iter().map(|s| s.dim()).product();
        let sub_dim = self.specs[pos].dim();
        let block = stride * sub_dim;
        let dim = self.dim();
        let mut base = 0;
        while base < dim {
            for cavity in 0..2 {
                let ia = SubsystemSpec::active_index(a, cavity);
                let ib = SubsystemSpec::active_index(b, cavity);
                for off in 0..stride {
                    self.amps.swap(base + ia * stride + off, base + ib * stride + off);
                }
            }
            base += block;
        }
    }

    /// Reorders subsystems to a new spec list; `perm[i]` gives the current
    /// position of the subsystem that ends up at position `i`.
    pub fn permuted(&self, perm: &[usize]) -> StateVector {
        assert_eq!(perm.len(), self.specs.len());
        let new_specs: Vec<SubsystemSpec> = perm.iter().map(|&p| self.specs[p]).collect();
        let mut out = StateVector::zero(new_specs);
        for i in 0..self.dim() {
            let tuple = self.tuple_of(i);
            let new_tuple: Vec<usize> = perm.iter().map(|&p| tuple[p]).collect();
            let j = out.index_of(&new_tuple);
            out.amps[j] = self.amps[i];
        }
        out.normalized = self.normalized;
        out
    }

    /// Debug dump: one entry per amplitude above `threshold` in magnitude.
    pub fn dump_json(&self, threshold: f64) -> serde_json::Value {
        let entries: Vec<serde_json::Value> = self
            .amps
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > threshold)
            .map(|(i, a)| {
                serde_json::json!({
                    "basis": self.tuple_of(i),
                    "re": a.re,
                    "im": a.im,
                })
            })
            .collect();
        serde_json::Value::Array(entries)
    }
}

/// Product of singlet pairs (|0,1> - |1,0>)/sqrt(2) over the given label
/// pairs, all cavities in vacuum, unpaired subsystems in their ground state.
pub fn build_initial_state(
    specs: Vec<SubsystemSpec>,
    pairing: &[(u32, u32)],
) -> Result<StateVector> {
    let mut seen = std::collections::HashSet::new();
    let mut sv = StateVector::zero(specs);
    let mut pair_positions = Vec::with_capacity(pairing.len());
    for &(a, b) in pairing {
        for l in [a, b] {
            if !seen.insert(l) {
                return Err(Error::OverlappingPairing(l));
            }
            let pos = sv.position_of(l)?;
            if sv.specs[pos].kind != SubsystemKind::Active {
                return Err(Error::UnknownLabel(l));
            }
        }
        pair_positions.push((sv.position_of(a)?, sv.position_of(b)?));
    }

    let n_pairs = pair_positions.len();
    let amp = Complex64::new(2f64.powf(-(n_pairs as f64) / 2.0), 0.0);
    let base = vec![0usize; sv.specs.len()];
    // Each pair contributes |0,1> with +, |1,0> with -.
    for mask in 0..(1usize << n_pairs) {
        let mut tuple = base.clone();
        let mut sign = 1.0;
        for (k, &(pa, pb)) in pair_positions.iter().enumerate() {
            if mask >> k & 1 == 0 {
                tuple[pa] = SubsystemSpec::active_index(ATOM_G0, 0);
                tuple[pb] = SubsystemSpec::active_index(ATOM_G1, 0);
            } else {
                tuple[pa] = SubsystemSpec::active_index(ATOM_G1, 0);
                tuple[pb] = SubsystemSpec::active_index(ATOM_G0, 0);
                sign = -sign;
            }
        }
        let idx = sv.index_of(&tuple);
        sv.amps[idx] = amp * sign;
    }
    sv.normalized = true;
    Ok(sv)
}
