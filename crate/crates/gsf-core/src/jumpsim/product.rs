//! Detection outcomes when four product-state qubits are excited together.
//!
//! With all qubits prepared in |+> the photon number is not fixed: every
//! binary word emits its own photon set, and a detector-count pattern
//! projects the matter qubits onto a superposition of the words compatible
//! with it. For identical subsystems the time profile factors out and each
//! word's amplitude is a permanent of network entries.

use num_complex::Complex64;

use super::SubsystemParams;
use crate::error::Result;
use crate::optics::ModeUnitary;
use crate::qstate::{StateVector, SubsystemSpec};

/// One detector-count pattern with its probability and the post-detection
/// matter state (a 4-qubit state over the words that fit the pattern).
#[derive(Clone, Debug)]
pub struct ProductOutcome {
    /// Photons registered per detector (1-based detector = index + 1).
    pub counts: [usize; 4],
    pub probability: f64,
    pub matter_state: StateVector,
}

fn permanent(m: &[Vec<Complex64>]) -> Complex64 {
    let n = m.len();
    if n == 0 {
        return Complex64::ONE;
    }
    let mut used = vec![false; n];
    fn rec(m: &[Vec<Complex64>], row: usize, used: &mut [bool]) -> Complex64 {
        if row == m.len() {
            return Complex64::ONE;
        }
        let mut acc = Complex64::ZERO;
        for col in 0..m.len() {
            if !used[col] && m[row][col].norm_sqr() > 0.0 {
                used[col] = true;
                acc += m[row][col] * rec(m, row + 1, used);
                used[col] = false;
            }
        }
        acc
    }
    rec(m, 0, &mut used)
}

fn count_patterns(total: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..=total {
        for b in 0..=total - a {
            for c in 0..=total - a - b {
                let d = total - a - b - c;
                out.push([a, b, c, d]);
            }
        }
    }
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product::<f64>().max(1.0)
}

/// Enumerates every detector-count pattern for the |+>^4 input with its
/// probability and conditioned matter state. Identical subsystem parameters
/// are required; the emission envelope then cancels between patterns.
pub fn enumerate_product_outcomes(
    beta: &ModeUnitary,
    params: &[SubsystemParams],
) -> Result<Vec<ProductOutcome>> {
    assert_eq!(beta.n(), 4);
    assert_eq!(params.len(), 4);
    let p0 = params[0];
    for p in params {
        p.validate()?;
        assert!(
            (p.delta - p0.delta).abs() < 1e-12
                && (p.gamma - p0.gamma).abs() < 1e-12
                && (p.omega - p0.omega).abs() < 1e-12,
            "product-state enumeration assumes identical subsystems"
        );
    }

    let qubit_specs: Vec<SubsystemSpec> = (1..=4).map(|l| SubsystemSpec::qubit(l as u32)).collect();
    let mut outcomes = Vec::new();
    for m in 0..=4usize {
        for counts in count_patterns(m) {
            let mut rows = Vec::new();
            for (det, &c) in counts.iter().enumerate() {
                for _ in 0..c {
                    rows.push(det + 1);
                }
            }
            let mut matter = StateVector::zero(qubit_specs.clone());
            let mut weight = 0.0;
            for word in 0..16usize {
                if (word.count_ones() as usize) != m {
                    continue;
                }
                let emitters: Vec<usize> =
                    (0..4).filter(|b| word >> (3 - b) & 1 == 1).map(|b| b + 1).collect();
                let matrix: Vec<Vec<Complex64>> = rows
                    .iter()
                    .map(|&k| emitters.iter().map(|&j| beta.entry(k, j)).collect())
                    .collect();
                let amp = permanent(&matrix) * 0.25;
                let tuple: Vec<usize> = (0..4).map(|b| word >> (3 - b) & 1).collect();
                let idx = matter.index_of(&tuple);
                matter.amps_mut()[idx] = amp;
                weight += amp.norm_sqr();
            }
            let norm_factor: f64 = counts.iter().map(|&c| factorial(c)).product();
            let probability = weight / norm_factor;
            if probability > 1e-15 {
                matter.normalize();
                outcomes.push(ProductOutcome { counts, probability, matter_state: matter });
            }
        }
    }
    Ok(outcomes)
}
