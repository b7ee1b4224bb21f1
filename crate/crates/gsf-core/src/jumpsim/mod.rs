//! Quantum-jump continuous-measurement engine: non-Hermitian propagation of
//! the atom-cavity blocks, click-time sampling, conditional two-click states,
//! outcome probabilities and fidelities under parameter mismatch, and the
//! imperfect-detector classifier.

mod detection;
mod product;
mod propagator;
mod trajectory;
mod twophoton;

pub use detection::{
    analytic_corrupt_accept_rate, classify_with_imperfections, simulate_detection, ClickCount,
    DetectionTruth, ImperfectionModel, ObservedPattern, Resolution,
};
pub use product::{enumerate_product_outcomes, ProductOutcome};
pub use propagator::{
    conditional_amplitude, effective_propagator, waiting_time_cdf, BlockPropagator,
};
pub use trajectory::{sample_trajectory, sample_trajectory_dense, OpticalState, Trajectory};
pub use twophoton::{
    averaged_fidelity, fidelity_f, fit_error_quadratic, outcome_probability,
    two_photon_delay_density, DensityGrid, FitResult, PatternTerm, TwoPhotonSetup,
};

use serde::{Deserialize, Serialize};

/// Physical parameters of one atom-cavity subsystem, in units of the
/// baseline coupling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsystemParams {
    /// Cavity detuning from the atomic transition.
    pub delta: f64,
    /// Cavity decay rate.
    pub gamma: f64,
    /// Atom-cavity coupling.
    pub omega: f64,
}

impl SubsystemParams {
    /// Critically damped baseline: Delta = 0, Gamma = 4, Omega = 1.
    pub fn baseline() -> Self {
        Self { delta: 0.0, gamma: 4.0, omega: 1.0 }
    }

    pub fn perturbed(eps: &ErrorVector) -> Self {
        let b = Self::baseline();
        Self {
            delta: b.delta + eps.d_delta,
            gamma: b.gamma + eps.d_gamma,
            omega: b.omega + eps.d_omega,
        }
    }

    pub fn validate(&self) -> crate::error::Result<()> {
        if self.gamma <= 0.0 {
            return Err(crate::error::Error::NonPositiveRate(self.gamma));
        }
        if self.omega <= 0.0 {
            return Err(crate::error::Error::NonPositiveRate(self.omega));
        }
        Ok(())
    }
}

/// Parametric error triple (dDelta, dGamma, dOmega) for one subsystem.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorVector {
    pub d_delta: f64,
    pub d_gamma: f64,
    pub d_omega: f64,
}

impl ErrorVector {
    pub fn new(d_delta: f64, d_gamma: f64, d_omega: f64) -> Self {
        Self { d_delta, d_gamma, d_omega }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.d_delta, self.d_gamma, self.d_omega]
    }
}

/// Times and detectors of the two clicks ending a fusion attempt.
/// Detector indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub t1: f64,
    pub k1: usize,
    pub t2: f64,
    pub k2: usize,
}

impl DetectionRecord {
    pub fn new(t1: f64, k1: usize, t2: f64, k2: usize) -> Self {
        assert!(t1 >= 0.0 && t2 >= t1, "click times must be ordered");
        assert!((1..=4).contains(&k1) && (1..=4).contains(&k2));
        Self { t1, k1, t2, k2 }
    }

    pub fn same_detector(&self) -> bool {
        self.k1 == self.k2
    }
}

/// Classification of a (possibly imperfect) click record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutcomeClass {
    /// Both photons in one detector: passive retry with recorded phases.
    SameDetector,
    /// Two different detectors: the fragments fuse.
    DifferentDetector,
    /// Too few photons seen: reset and rebuild.
    LossSuspected,
    /// More clicks than the protocol can produce: a dark count fired.
    DarkCountCorrupted,
}

/// Integration horizon covering the slowest emission envelope; exponential
/// tails beyond it are below 1e-10 of the total weight.
pub fn integration_horizon(params: &[SubsystemParams]) -> f64 {
    let mut t = 0f64;
    for p in params {
        let block = BlockPropagator::new(p);
        t = t.max(60.0 / block.slowest_decay_rate());
        t = t.max(50.0 / p.gamma);
    }
    t
}
