//! Beam-splitter network composition: ordered optical elements over n modes
//! composed into the mode unitary that feeds the detectors.
//!
//! Element convention: a beam splitter on modes (i, j) applies the fixed
//! matrix B = (1/sqrt(2)) [[1, i], [i, 1]] to the pair of mode operators, a
//! phase element multiplies one mode by e^{i phi}, and a route element is a
//! fiber crossing that permutes mode positions on the way to the detectors.
//! Mode and detector labels are 1-based at the API surface.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNITARITY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub mode: usize,
    pub value: f64,
}

/// One optical element, matching the JSON network description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Element {
    Bs { bs: [usize; 2] },
    Phase { phase: PhaseSpec },
    /// `route[m-1]` is the position mode `m` is carried to.
    Route { route: Vec<usize> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Basic,
    Shifter,
    Custom,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeNetwork {
    pub modes: usize,
    pub variant: Variant,
    pub elements: Vec<Element>,
}

/// The composed n x n unitary; rows index detectors, columns index cavities.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeUnitary {
    n: usize,
    beta: Vec<Complex64>,
}

impl ModeUnitary {
    pub fn identity(n: usize) -> Self {
        let mut beta = vec![Complex64::ZERO; n * n];
        for k in 0..n {
            beta[k * n + k] = Complex64::ONE;
        }
        Self { n, beta }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry beta_{k,j} with 1-based detector k and cavity j.
    pub fn entry(&self, k: usize, j: usize) -> Complex64 {
        self.beta[(k - 1) * self.n + (j - 1)]
    }

    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.beta[(k - 1) * self.n..k * self.n]
    }

    pub fn unitarity_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0f64;
        for a in 0..n {
            for b in 0..n {
                let mut acc = Complex64::ZERO;
                for k in 0..n {
                    acc += self.beta[k * n + a].conj() * self.beta[k * n + b];
                }
                let target = if a == b { Complex64::ONE } else { Complex64::ZERO };
                worst = worst.max((acc - target).norm());
            }
        }
        worst
    }

    fn left_mul_bs(&mut self, i: usize, j: usize) {
        let n = self.n;
        let r = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
        let ir = Complex64::new(0.0, 1.0 / 2f64.sqrt());
        for c in 0..n {
            let a = self.beta[i * n + c];
            let b = self.beta[j * n + c];
            self.beta[i * n + c] = r * a + ir * b;
            self.beta[j * n + c] = ir * a + r * b;
        }
    }

    fn left_mul_phase(&mut self, m: usize, phi: f64) {
        let f = Complex64::from_polar(1.0, phi);
        let n = self.n;
        for c in 0..n {
            self.beta[m * n + c] *= f;
        }
    }

    fn permute_rows(&mut self, dest: &[usize]) {
        let n = self.n;
        let old = self.beta.clone();
        for (src, &d) in dest.iter().enumerate() {
            self.beta[(d - 1) * n..d * n].copy_from_slice(&old[src * n..(src + 1) * n]);
        }
    }
}

impl ModeNetwork {
    pub fn new(modes: usize, variant: Variant, elements: Vec<Element>) -> Self {
        Self { modes, variant, elements }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: ModeNetwork = serde_json::from_str(text)?;
        net.validate()?;
        Ok(net)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serialization")
    }

    pub fn validate(&self) -> Result<()> {
        for el in &self.elements {
            match el {
                Element::Bs { bs: [i, j] } => {
                    if *i == *j {
                        return Err(Error::ModesNotDistinct);
                    }
                    if !(1..=self.modes).contains(i) || !(1..=self.modes).contains(j) {
                        return Err(Error::InvalidElement(format!("bs modes {i},{j} out of range")));
                    }
                }
                Element::Phase { phase } => {
                    if !(1..=self.modes).contains(&phase.mode) {
                        return Err(Error::InvalidElement(format!(
                            "phase mode {} out of range",
                            phase.mode
                        )));
                    }
                }
                Element::Route { route } => {
                    if route.len() != self.modes {
                        return Err(Error::InvalidElement("route length must equal mode count".into()));
                    }
                    let mut seen = vec![false; self.modes];
                    for &d in route {
                        if d < 1 || d > self.modes || seen[d - 1] {
                            return Err(Error::InvalidElement("route is not a permutation".into()));
                        }
                        seen[d - 1] = true;
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks that every pair of input modes meets somewhere in the network.
    pub fn require_full_crossing(&self) -> Result<()> {
        let mut comp: Vec<usize> = (0..self.modes).collect();
        fn find(comp: &mut Vec<usize>, x: usize) -> usize {
            if comp[x] != x {
                let r = find(comp, comp[x]);
                comp[x] = r;
            }
            comp[x]
        }
        // Route elements permute positions; track which input component sits
        // at each position as elements are applied in order.
        let mut at: Vec<usize> = (0..self.modes).collect();
        for el in &self.elements {
            match el {
                Element::Bs { bs: [i, j] } => {
                    let (a, b) = (find(&mut comp, at[i - 1]), find(&mut comp, at[j - 1]));
                    comp[a] = b;
                }
                Element::Phase { .. } => {}
                Element::Route { route } => {
                    let old = at.clone();
                    for (src, &d) in route.iter().enumerate() {
                        at[d - 1] = old[src];
                    }
                }
            }
        }
        for a in 0..self.modes {
            for b in a + 1..self.modes {
                if find(&mut comp, a) != find(&mut comp, b) {
                    return Err(Error::DisconnectedNetwork(a + 1, b + 1));
                }
            }
        }
        Ok(())
    }
}

/// Ordered product of the network's elements. An empty element list yields
/// the identity.
pub fn compose_network(net: &ModeNetwork) -> Result<ModeUnitary> {
    net.validate()?;
    let mut u = ModeUnitary::identity(net.modes);
    for el in &net.elements {
        match el {
            Element::Bs { bs: [i, j] } => u.left_mul_bs(i - 1, j - 1),
            Element::Phase { phase } => u.left_mul_phase(phase.mode - 1, phase.value),
            Element::Route { route } => u.permute_rows(route),
        }
    }
    let defect = u.unitarity_defect();
    if defect > UNITARITY_TOL {
        return Err(Error::InvalidConfig(format!("composed network unitarity defect {defect:.3e}")));
    }
    Ok(u)
}

/// The calibrated four-port layout reproducing the two-EPR detection table:
/// within-pair splitters, a half-wave path offset on arm 4, cross splitters,
/// and an output crossing of arms 2 and 3.
pub fn canonical_basic() -> ModeNetwork {
    ModeNetwork::new(
        4,
        Variant::Basic,
        vec![
            Element::Phase { phase: PhaseSpec { mode: 4, value: std::f64::consts::PI } },
            Element::Bs { bs: [1, 2] },
            Element::Bs { bs: [3, 4] },
            Element::Bs { bs: [1, 3] },
            Element::Bs { bs: [2, 4] },
            Element::Route { route: vec![1, 3, 2, 4] },
        ],
    )
}

/// The shifter variant: the basic layout plus a pi/2 phase on one internal
/// arm between the splitter layers.
pub fn canonical_shifter(arm: usize) -> ModeNetwork {
    assert!((1..=4).contains(&arm), "internal arm must be 1..=4");
    ModeNetwork::new(
        4,
        Variant::Shifter,
        vec![
            Element::Phase { phase: PhaseSpec { mode: 4, value: std::f64::consts::PI } },
            Element::Bs { bs: [1, 2] },
            Element::Bs { bs: [3, 4] },
            Element::Phase { phase: PhaseSpec { mode: arm, value: std::f64::consts::FRAC_PI_2 } },
            Element::Bs { bs: [1, 3] },
            Element::Bs { bs: [2, 4] },
            Element::Route { route: vec![1, 3, 2, 4] },
        ],
    )
}

/// Candidate shifter placements for calibration, internal arms first.
pub fn shifter_candidates() -> Vec<(String, ModeNetwork)> {
    (1..=4)
        .map(|arm| (format!("internal arm {arm}"), canonical_shifter(arm)))
        .collect()
}

/// A single splitter on two modes of a two-mode network (the pair-generation
/// configuration).
pub fn single_splitter() -> ModeNetwork {
    ModeNetwork::new(2, Variant::Custom, vec![Element::Bs { bs: [1, 2] }])
}

/// A detector-k jump operator: the beta-weighted sum of cavity annihilations
/// d_k = sum_j beta_{k,j} gamma_j c_j with gamma_j = sqrt(Gamma_j).
#[derive(Clone, Debug)]
pub struct JumpOperator {
    pub detector: usize,
    /// (1-based cavity mode, coefficient beta_{k,j} * gamma_j)
    pub terms: Vec<(usize, Complex64)>,
}

pub fn jump_operator(k: usize, beta: &ModeUnitary, gammas: &[f64]) -> Result<JumpOperator> {
    assert!(k >= 1 && k <= beta.n(), "detector index out of range");
    assert_eq!(gammas.len(), beta.n());
    for &g in gammas {
        if g <= 0.0 {
            return Err(Error::NonPositiveRate(g));
        }
    }
    let terms = (1..=beta.n())
        .map(|j| (j, beta.entry(k, j) * gammas[j - 1].sqrt()))
        .collect();
    Ok(JumpOperator { detector: k, terms })
}

/// The full network restricted to exciting just two cavities; the other two
/// input modes stay silent.
#[derive(Clone, Debug)]
pub struct TwoOfFour {
    pub beta: ModeUnitary,
    pub actives: (usize, usize),
    pub silent: (usize, usize),
}

pub fn two_of_four_subnetwork(net: &ModeNetwork, actives: (usize, usize)) -> Result<TwoOfFour> {
    if actives.0 == actives.1 {
        return Err(Error::ModesNotDistinct);
    }
    let beta = compose_network(net)?;
    let silent: Vec<usize> = (1..=4).filter(|m| *m != actives.0 && *m != actives.1).collect();
    Ok(TwoOfFour { beta, actives, silent: (silent[0], silent[1]) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitter_matrix_is_unitary_block() {
        let net = ModeNetwork::new(4, Variant::Custom, vec![Element::Bs { bs: [1, 2] }]);
        let u = compose_network(&net).unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert!((u.entry(1, 1) - Complex64::new(r, 0.0)).norm() < 1e-15);
        assert!((u.entry(1, 2) - Complex64::new(0.0, r)).norm() < 1e-15);
        assert!((u.entry(2, 1) - Complex64::new(0.0, r)).norm() < 1e-15);
        assert!((u.entry(2, 2) - Complex64::new(r, 0.0)).norm() < 1e-15);
        assert!((u.entry(3, 3) - Complex64::ONE).norm() < 1e-15);
        assert!(u.unitarity_defect() < 1e-14);
    }

    #[test]
    fn empty_network_composes_to_identity() {
        let net = ModeNetwork::new(4, Variant::Custom, vec![]);
        let u = compose_network(&net).unwrap();
        assert_eq!(u, ModeUnitary::identity(4));
    }

    #[test]
    fn canonical_basic_is_balanced_and_unitary() {
        let u = compose_network(&canonical_basic()).unwrap();
        assert!(u.unitarity_defect() < 1e-14);
        for k in 1..=4 {
            for j in 1..=4 {
                assert!((u.entry(k, j).norm() - 0.5).abs() < 1e-14, "entry ({k},{j}) not balanced");
            }
        }
    }

    #[test]
    fn canonical_basic_crosses_all_inputs() {
        canonical_basic().require_full_crossing().unwrap();
        for (_, net) in shifter_candidates() {
            net.require_full_crossing().unwrap();
        }
    }

    #[test]
    fn uncrossed_network_rejected() {
        let net = ModeNetwork::new(
            4,
            Variant::Custom,
            vec![Element::Bs { bs: [1, 2] }, Element::Bs { bs: [3, 4] }],
        );
        assert!(matches!(net.require_full_crossing(), Err(Error::DisconnectedNetwork(_, _))));
    }

    #[test]
    fn network_json_round_trip() {
        let net = canonical_shifter(1);
        let text = net.to_json();
        let back = ModeNetwork::from_json(&text).unwrap();
        assert_eq!(back.elements, net.elements);
        let (a, b) = (compose_network(&net).unwrap(), compose_network(&back).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn jump_operator_identity_network_picks_one_cavity() {
        let u = ModeUnitary::identity(4);
        let d2 = jump_operator(2, &u, &[1.0; 4]).unwrap();
        let nonzero: Vec<_> = d2.terms.iter().filter(|(_, c)| c.norm() > 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(nonzero[0].0, 2);
        assert!((nonzero[0].1 - Complex64::ONE).norm() < 1e-15);
    }

    #[test]
    fn jump_operator_coefficients_for_balanced_network() {
        // Gamma = 4 gives gamma = 2, and |beta| = 1/2, so all coefficients
        // have unit magnitude.
        let u = compose_network(&canonical_basic()).unwrap();
        for k in 1..=4 {
            let d = jump_operator(k, &u, &[4.0; 4]).unwrap();
            for (_, c) in d.terms {
                assert!((c.norm() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn jump_operator_rejects_nonpositive_rate() {
        let u = ModeUnitary::identity(4);
        assert!(matches!(jump_operator(1, &u, &[1.0, 0.0, 1.0, 1.0]), Err(Error::NonPositiveRate(_))));
    }

    #[test]
    fn two_of_four_rejects_equal_actives() {
        assert!(matches!(
            two_of_four_subnetwork(&canonical_basic(), (1, 1)),
            Err(Error::ModesNotDistinct)
        ));
    }

    #[test]
    fn two_of_four_symmetric_pairs() {
        let a = two_of_four_subnetwork(&canonical_basic(), (1, 2)).unwrap();
        let b = two_of_four_subnetwork(&canonical_basic(), (3, 4)).unwrap();
        assert_eq!(a.silent, (3, 4));
        assert_eq!(b.silent, (1, 2));
        assert_eq!(a.beta, b.beta);
    }

    #[test]
    fn detection_channels_complete() {
        // sum_k conj(beta_{k,a}) beta_{k,b} = delta_{ab} means the jump
        // operators resolve the full cavity decay: sum_k d_k^dag d_k equals
        // sum_j Gamma_j c_j^dag c_j.
        let u = compose_network(&canonical_basic()).unwrap();
        let gammas = [4.0f64, 3.0, 5.0, 4.5];
        let mut worst = 0f64;
        for a in 1..=4 {
            for b in 1..=4 {
                let mut acc = Complex64::ZERO;
                for k in 1..=4 {
                    let da = u.entry(k, a) * gammas[a - 1].sqrt();
                    let db = u.entry(k, b) * gammas[b - 1].sqrt();
                    acc += da.conj() * db;
                }
                let target = if a == b {
                    Complex64::new(gammas[a - 1], 0.0)
                } else {
                    Complex64::ZERO
                };
                worst = worst.max((acc - target).norm());
            }
        }
        assert!(worst < 1e-10);
    }
}
