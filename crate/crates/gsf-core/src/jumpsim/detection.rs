//! Imperfect detection: photon loss, dark counts, and limited photon-number
//! resolution, with the outcome classifier the protocol runs on.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::OutcomeClass;

/// What a single detector reports for one attempt window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClickCount {
    None,
    One,
    /// "More than one": only available with some degree of resolution.
    Many,
}

/// Photon-number resolution available at each detector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Resolution {
    /// Click / no click only.
    NonResolving,
    /// Distinguishes 0, 1 and more-than-1 photons.
    ThreeWay,
    /// Two non-resolving detectors behind a fast switch: resolves a photon
    /// pair only when the arrivals are separated by more than the switching
    /// dead time.
    Pockels { tau: f64 },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ImperfectionModel {
    /// Probability that an emitted photon never reaches its detector
    /// (detector inefficiency is folded in here).
    pub p_loss: f64,
    /// Dark-count rate per detector, per unit time.
    pub dark_rate: f64,
    /// Observation window for one attempt.
    pub window: f64,
    pub resolution: Resolution,
}

impl ImperfectionModel {
    pub fn ideal(window: f64) -> Self {
        Self { p_loss: 0.0, dark_rate: 0.0, window, resolution: Resolution::ThreeWay }
    }
}

/// Per-detector readings for one attempt.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedPattern {
    pub counts: [ClickCount; 4],
}

impl ObservedPattern {
    fn ones(&self) -> usize {
        self.counts.iter().filter(|c| **c == ClickCount::One).count()
    }

    fn manys(&self) -> usize {
        self.counts.iter().filter(|c| **c == ClickCount::Many).count()
    }

    /// Detectors that registered exactly one photon, 1-based.
    pub fn single_detectors(&self) -> Vec<usize> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == ClickCount::One)
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// What actually happened, for corruption accounting in tests and session
/// logs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionTruth {
    pub photons_lost: usize,
    pub dark_counts: usize,
}

impl DetectionTruth {
    pub fn clean(&self) -> bool {
        self.photons_lost == 0 && self.dark_counts == 0
    }
}

/// Runs emitted photons through loss, adds dark counts, and coarse-grains
/// each detector's arrivals per the available resolution.
pub fn simulate_detection(
    clicks: &[(f64, usize)],
    model: &ImperfectionModel,
    rng: &mut impl Rng,
) -> (ObservedPattern, DetectionTruth) {
    let mut arrivals: [Vec<f64>; 4] = Default::default();
    let mut truth = DetectionTruth::default();
    for &(t, k) in clicks {
        if rng.gen::<f64>() < model.p_loss {
            truth.photons_lost += 1;
        } else {
            arrivals[k - 1].push(t);
        }
    }
    if model.dark_rate > 0.0 {
        let mean = model.dark_rate * model.window;
        for det in &mut arrivals {
            let n = sample_poisson(mean, rng);
            truth.dark_counts += n;
            for _ in 0..n {
                det.push(rng.gen::<f64>() * model.window);
            }
        }
    }
    let mut counts = [ClickCount::None; 4];
    for (i, det) in arrivals.iter_mut().enumerate() {
        det.sort_by(|a, b| a.total_cmp(b));
        counts[i] = match model.resolution {
            Resolution::NonResolving => {
                if det.is_empty() {
                    ClickCount::None
                } else {
                    ClickCount::One
                }
            }
            Resolution::ThreeWay => match det.len() {
                0 => ClickCount::None,
                1 => ClickCount::One,
                _ => ClickCount::Many,
            },
            Resolution::Pockels { tau } => match det.len() {
                0 => ClickCount::None,
                1 => ClickCount::One,
                _ => {
                    // a second photon inside the switching dead time is
                    // missed, leaving an undercount
                    let resolved = det.windows(2).all(|w| w[1] - w[0] > tau);
                    if resolved {
                        ClickCount::Many
                    } else {
                        ClickCount::One
                    }
                }
            },
        };
    }
    (ObservedPattern { counts }, truth)
}

fn sample_poisson(mean: f64, rng: &mut impl Rng) -> usize {
    let l = (-mean).exp();
    let mut k = 0;
    let mut p = 1.0;
    loop {
        p *= rng.gen::<f64>();
        if p <= l {
            return k;
        }
        k += 1;
        if k > 1000 {
            return k;
        }
    }
}

/// Total classification of an observed pattern for a two-photon fusion
/// attempt. The protocol expects exactly two photons; any consistent reading
/// with fewer is a suspected loss, any reading demanding more than two is a
/// dark-count signature.
pub fn classify_with_imperfections(
    pattern: &ObservedPattern,
    model: &ImperfectionModel,
) -> OutcomeClass {
    let ones = pattern.ones();
    let manys = pattern.manys();
    match model.resolution {
        Resolution::NonResolving => {
            // A lone click could be one photon (loss) or a merged pair; the
            // protocol reads it as a pair and retries.
            match (ones, manys) {
                (2, 0) => OutcomeClass::DifferentDetector,
                (1, 0) => OutcomeClass::SameDetector,
                (0, 0) => OutcomeClass::LossSuspected,
                _ => OutcomeClass::DarkCountCorrupted,
            }
        }
        Resolution::ThreeWay | Resolution::Pockels { .. } => match (ones, manys) {
            (2, 0) => OutcomeClass::DifferentDetector,
            (0, 1) => OutcomeClass::SameDetector,
            (0, 0) | (1, 0) => OutcomeClass::LossSuspected,
            _ => OutcomeClass::DarkCountCorrupted,
        },
    }
}

/// First-principles rate of silently corrupted acceptances per attempt: a
/// loss must coincide with dark counts that complete a plausible
/// two-detector record.
pub fn analytic_corrupt_accept_rate(p_loss: f64, dark_rate: f64, window: f64) -> f64 {
    let mu = dark_rate * window;
    let e4 = (-4.0 * mu).exp();
    // one photon lost, survivor in some detector, exactly one dark count in
    // one of the three other detectors
    let one_lost = 2.0 * p_loss * (1.0 - p_loss) * 3.0 * mu * e4;
    // both photons lost, exactly two dark counts in distinct detectors
    let two_lost = p_loss * p_loss * 6.0 * mu * mu * e4;
    one_lost + two_lost
}
