//! Detection statistics for two-excitation inputs.
//!
//! A prepared fusion input is a superposition of basis words with exactly two
//! excited subsystems. For such states the conditional two-click amplitude
//! factorizes into per-subsystem emission amplitudes, so probabilities and
//! fidelities reduce to two-dimensional time integrals of exponential sums,
//! evaluated here by adaptive quadrature.

use num_complex::Complex64;
use rayon::prelude::*;

use super::propagator::BlockPropagator;
use super::{integration_horizon, DetectionRecord, ErrorVector, SubsystemParams};
use crate::error::{Error, Result};
use crate::optics::ModeUnitary;
use crate::quad;

/// One term of the two-excitation input: the pair of excited modes
/// (1-based) and its amplitude.
#[derive(Clone, Copy, Debug)]
pub struct PatternTerm {
    pub excited: (usize, usize),
    pub coeff: Complex64,
}

/// A two-excitation input wired into a mode unitary, with per-subsystem
/// parameters.
#[derive(Clone, Debug)]
pub struct TwoPhotonSetup {
    pub beta: ModeUnitary,
    pub params: Vec<SubsystemParams>,
    pub terms: Vec<PatternTerm>,
    blocks: Vec<BlockPropagator>,
    gammas: Vec<f64>,
    horizon: f64,
}

impl TwoPhotonSetup {
    pub fn new(
        beta: ModeUnitary,
        params: Vec<SubsystemParams>,
        terms: Vec<PatternTerm>,
    ) -> Result<Self> {
        assert_eq!(params.len(), beta.n());
        for p in &params {
            p.validate()?;
        }
        let norm2: f64 = terms.iter().map(|t| t.coeff.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "pattern coefficients have norm^2 {norm2}, expected 1"
            )));
        }
        let blocks = params.iter().map(BlockPropagator::new).collect();
        let gammas = params.iter().map(|p| p.gamma.sqrt()).collect();
        let horizon = integration_horizon(&params);
        Ok(Self { beta, params, terms, blocks, gammas, horizon })
    }

    /// The post-pulse state |EPR_12>|EPR_34>: four equal-weight words with
    /// one excitation per pair.
    pub fn epr_epr(beta: ModeUnitary, params: Vec<SubsystemParams>) -> Result<Self> {
        let h = Complex64::new(0.5, 0.0);
        let terms = vec![
            PatternTerm { excited: (2, 4), coeff: h },
            PatternTerm { excited: (2, 3), coeff: -h },
            PatternTerm { excited: (1, 4), coeff: -h },
            PatternTerm { excited: (1, 3), coeff: h },
        ];
        Self::new(beta, params, terms)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Emission amplitudes gamma_j g_j(t) for every subsystem.
    fn emissions(&self, t: f64) -> Vec<Complex64> {
        self.blocks
            .iter()
            .zip(&self.gammas)
            .map(|(b, g)| b.emission(t) * *g)
            .collect()
    }

    /// Two-click amplitude of pattern {p, q}: the photon captured at (t1,k1)
    /// may have come from either excited subsystem.
    fn pattern_amplitude(
        &self,
        pattern: (usize, usize),
        e1: &[Complex64],
        e2: &[Complex64],
        k1: usize,
        k2: usize,
    ) -> Complex64 {
        let (p, q) = pattern;
        self.beta.entry(k1, p) * e1[p - 1] * self.beta.entry(k2, q) * e2[q - 1]
            + self.beta.entry(k1, q) * e1[q - 1] * self.beta.entry(k2, p) * e2[p - 1]
    }

    /// Probability density p(t1,k1;t2,k2). Patterns are orthogonal words, so
    /// the density is the sum of per-pattern squared amplitudes.
    pub fn density(&self, t1: f64, k1: usize, t2: f64, k2: usize) -> f64 {
        let e1 = self.emissions(t1);
        let e2 = self.emissions(t2);
        self.terms
            .iter()
            .map(|term| {
                (term.coeff * self.pattern_amplitude(term.excited, &e1, &e2, k1, k2)).norm_sqr()
            })
            .sum()
    }

    /// Ideal (matched-parameter) conditional coefficients for a detector
    /// cell, normalized; `None` for zero-probability cells.
    pub fn reference_coeffs(&self, k1: usize, k2: usize) -> Option<Vec<Complex64>> {
        let mut coeffs: Vec<Complex64> = self
            .terms
            .iter()
            .map(|term| {
                let (p, q) = term.excited;
                let s = self.beta.entry(k1, p) * self.beta.entry(k2, q)
                    + self.beta.entry(k1, q) * self.beta.entry(k2, p);
                term.coeff * s
            })
            .collect();
        let n2: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if n2 < 1e-20 {
            return None;
        }
        let n = n2.sqrt();
        for c in &mut coeffs {
            *c /= n;
        }
        Some(coeffs)
    }

    /// Unnormalized fidelity density f~ = |<ref | psi~(t1,k1;t2,k2)>|^2.
    pub fn fidelity_density(
        &self,
        reference: &[Complex64],
        t1: f64,
        k1: usize,
        t2: f64,
        k2: usize,
    ) -> f64 {
        let e1 = self.emissions(t1);
        let e2 = self.emissions(t2);
        let mut acc = Complex64::ZERO;
        for (term, r) in self.terms.iter().zip(reference) {
            acc += r.conj() * term.coeff * self.pattern_amplitude(term.excited, &e1, &e2, k1, k2);
        }
        acc.norm_sqr()
    }
}

/// Integrated probability of clicks in detectors (k1, k2), in that order.
pub fn outcome_probability(setup: &TwoPhotonSetup, k1: usize, k2: usize) -> Result<f64> {
    quad::integrate_ordered_2d(
        |t1, t2| setup.density(t1, k1, t2, k2),
        setup.horizon(),
        1e-12,
        1e-10,
    )
}

/// Normalized fidelity of the conditional state for one record against the
/// ideal outcome of its detector cell.
pub fn fidelity_f(setup: &TwoPhotonSetup, record: &DetectionRecord) -> Result<f64> {
    let reference = setup
        .reference_coeffs(record.k1, record.k2)
        .ok_or(Error::ZeroNormRecord)?;
    let p = setup.density(record.t1, record.k1, record.t2, record.k2);
    if p < 1e-300 {
        return Err(Error::ZeroNormRecord);
    }
    Ok(setup.fidelity_density(&reference, record.t1, record.k1, record.t2, record.k2) / p)
}

/// Time-averaged fidelity over the different-detector outcomes,
/// F = 2 sum_{k1 != k2} double-int f~; the factor 2 reflects the ideal
/// fusion probability of 1/2.
pub fn averaged_fidelity(setup: &TwoPhotonSetup) -> Result<f64> {
    let n = setup.beta.n();
    let cells: Vec<(usize, usize)> = (1..=n)
        .flat_map(|k1| (1..=n).map(move |k2| (k1, k2)))
        .filter(|(k1, k2)| k1 != k2)
        .collect();
    let contributions: Vec<Result<f64>> = cells
        .par_iter()
        .map(|&(k1, k2)| {
            let reference = match setup.reference_coeffs(k1, k2) {
                Some(r) => r,
                None => return Ok(0.0),
            };
            quad::integrate_ordered_2d(
                |t1, t2| setup.fidelity_density(&reference, t1, k1, t2, k2),
                setup.horizon(),
                1e-12,
                1e-10,
            )
        })
        .collect();
    let mut total = 0.0;
    for c in contributions {
        total += c?;
    }
    Ok(2.0 * total)
}

/// Result of the quadratic error-model fit at the critically damped
/// baseline.
#[derive(Clone, Debug)]
pub struct FitResult {
    /// Same-subsystem coefficient matrix, order (Delta, Gamma, Omega).
    pub m_s: [[f64; 3]; 3],
    /// Cross-subsystem coefficient matrix.
    pub m_x: [[f64; 3]; 3],
    /// Worst absolute model-vs-data residual.
    pub residual: f64,
}

fn setup_for(errors: &[ErrorVector; 4], beta: &ModeUnitary) -> Result<TwoPhotonSetup> {
    let params: Vec<SubsystemParams> =
        errors.iter().map(SubsystemParams::perturbed).collect();
    TwoPhotonSetup::epr_epr(beta.clone(), params)
}

fn fidelity_for(errors: &[ErrorVector; 4], beta: &ModeUnitary) -> Result<f64> {
    averaged_fidelity(&setup_for(errors, beta)?)
}

/// Fits F ~ 1 - sum_j e_j^T M_s e_j - sum_{j1 != j2} e_j1^T M_x e_j2 from
/// quadrature samples on a +-`span` grid with `points` points per axis.
/// The model has no linear term: F is stationary at the matched point.
pub fn fit_error_quadratic(beta: &ModeUnitary, span: f64, points: usize) -> Result<FitResult> {
    assert!(points >= 5, "grid needs at least 5 points per parameter");
    let mut axis = Vec::with_capacity(points);
    for i in 0..points {
        axis.push(-span + 2.0 * span * i as f64 / (points - 1) as f64);
    }

    let e = |a: usize, v: f64| {
        let mut eps = ErrorVector::default();
        match a {
            0 => eps.d_delta = v,
            1 => eps.d_gamma = v,
            _ => eps.d_omega = v,
        }
        eps
    };
    let pair = |a: usize, va: f64, b: usize, vb: f64| {
        let mut eps = e(a, va);
        match b {
            0 => eps.d_delta += vb,
            1 => eps.d_gamma += vb,
            _ => eps.d_omega += vb,
        }
        eps
    };

    // Samples perturbing subsystem 1 only: determines M_s.
    let mut s_points: Vec<[ErrorVector; 4]> = Vec::new();
    for a in 0..3 {
        for &va in &axis {
            if va != 0.0 {
                s_points.push([e(a, va), ErrorVector::default(), ErrorVector::default(), ErrorVector::default()]);
            }
        }
    }
    for a in 0..3 {
        for b in a + 1..3 {
            for &va in &axis {
                for &vb in &axis {
                    if va != 0.0 && vb != 0.0 {
                        s_points.push([
                            pair(a, va, b, vb),
                            ErrorVector::default(),
                            ErrorVector::default(),
                            ErrorVector::default(),
                        ]);
                    }
                }
            }
        }
    }

    let s_values: Vec<f64> = s_points
        .par_iter()
        .map(|errs| fidelity_for(errs, beta))
        .collect::<Result<Vec<f64>>>()?;

    // Least squares for the 6 independent entries of M_s:
    // 1 - F = sum_a M_aa x_a^2 + 2 sum_{a<b} M_ab x_a x_b.
    let features = |eps: &ErrorVector| {
        let x = eps.as_array();
        [
            x[0] * x[0],
            x[1] * x[1],
            x[2] * x[2],
            2.0 * x[0] * x[1],
            2.0 * x[0] * x[2],
            2.0 * x[1] * x[2],
        ]
    };
    let mut ata = [[0f64; 6]; 6];
    let mut atb = [0f64; 6];
    for (errs, f) in s_points.iter().zip(&s_values) {
        let row = features(&errs[0]);
        let y = 1.0 - f;
        for i in 0..6 {
            for j in 0..6 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * y;
        }
    }
    let sol = solve6(ata, atb)?;
    let m_s = [
        [sol[0], sol[3], sol[4]],
        [sol[3], sol[1], sol[5]],
        [sol[4], sol[5], sol[2]],
    ];

    // Cross samples: subsystems 1 and 2 perturbed on one axis each.
    // After subtracting the fitted same-subsystem parts,
    // 1 - F - e1 M_s e1 - e2 M_s e2 = 2 M_x[a][b] x1_a x2_b.
    let quad_form = |m: &[[f64; 3]; 3], x: &[f64; 3]| {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += x[i] * m[i][j] * x[j];
            }
        }
        acc
    };

    let mut x_entries = [[0f64; 3]; 3];
    let mut x_weights = [[0f64; 3]; 3];
    let mut worst_residual = 0f64;
    let mut x_jobs: Vec<(usize, usize, [ErrorVector; 4])> = Vec::new();
    for a in 0..3 {
        for b in 0..3 {
            for &va in &axis {
                for &vb in &axis {
                    if va != 0.0 && vb != 0.0 {
                        x_jobs.push((
                            a,
                            b,
                            [e(a, va), e(b, vb), ErrorVector::default(), ErrorVector::default()],
                        ));
                    }
                }
            }
        }
    }
    let x_values: Vec<f64> = x_jobs
        .par_iter()
        .map(|(_, _, errs)| fidelity_for(errs, beta))
        .collect::<Result<Vec<f64>>>()?;
    for ((a, b, errs), f) in x_jobs.iter().zip(&x_values) {
        let self_part =
            quad_form(&m_s, &errs[0].as_array()) + quad_form(&m_s, &errs[1].as_array());
        let y = 1.0 - f - self_part;
        let feat = 2.0 * errs[0].as_array()[*a] * errs[1].as_array()[*b];
        x_entries[*a][*b] += feat * y;
        x_weights[*a][*b] += feat * feat;
    }
    let mut m_x = [[0f64; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            m_x[a][b] = x_entries[a][b] / x_weights[a][b];
        }
    }
    // symmetrize, tracking how far the ordered-pair estimates disagree
    for a in 0..3 {
        for b in a + 1..3 {
            worst_residual = worst_residual.max((m_x[a][b] - m_x[b][a]).abs());
            let avg = 0.5 * (m_x[a][b] + m_x[b][a]);
            m_x[a][b] = avg;
            m_x[b][a] = avg;
        }
    }

    // model residuals over every sample
    for (errs, f) in s_points.iter().zip(&s_values) {
        let model = 1.0 - quad_form(&m_s, &errs[0].as_array());
        worst_residual = worst_residual.max((model - f).abs());
    }
    for ((a, b), (errs, f)) in x_jobs
        .iter()
        .map(|(a, b, e)| ((*a, *b), e))
        .zip(&x_values)
        .map(|((ab, e), f)| (ab, (e, f)))
    {
        let x1 = errs[0].as_array();
        let x2 = errs[1].as_array();
        let model = 1.0
            - quad_form(&m_s, &x1)
            - quad_form(&m_s, &x2)
            - 2.0 * m_x[a][b] * x1[a] * x2[b];
        worst_residual = worst_residual.max((model - f).abs());
    }

    let result = FitResult { m_s, m_x, residual: worst_residual };
    if worst_residual > 1e-6 {
        return Err(Error::FitResidual(worst_residual));
    }
    Ok(result)
}

fn solve6(mut a: [[f64; 6]; 6], mut b: [f64; 6]) -> Result<[f64; 6]> {
    for col in 0..6 {
        let pivot = (col..6)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-14 {
            return Err(Error::InvalidConfig("singular normal equations in quadratic fit".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..6 {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..6 {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut out = [0f64; 6];
    for i in 0..6 {
        out[i] = b[i] / a[i][i];
    }
    Ok(out)
}

/// Tabulated joint density of the first click time and the delay to the
/// second, summed over all detector cells.
#[derive(Clone, Debug)]
pub struct DensityGrid {
    pub t: Vec<f64>,
    pub dt: Vec<f64>,
    /// p[i][j] = density at (t[i], dt[j]).
    pub p: Vec<Vec<f64>>,
}

pub fn two_photon_delay_density(
    setup: &TwoPhotonSetup,
    nt: usize,
    ndt: usize,
    t_max: f64,
    dt_max: f64,
) -> DensityGrid {
    let n = setup.beta.n();
    let t: Vec<f64> = (0..nt).map(|i| t_max * i as f64 / (nt - 1) as f64).collect();
    let dt: Vec<f64> = (0..ndt).map(|i| dt_max * i as f64 / (ndt - 1) as f64).collect();
    let p = t
        .iter()
        .map(|&t1| {
            dt.iter()
                .map(|&d| {
                    let mut total = 0.0;
                    for k1 in 1..=n {
                        for k2 in 1..=n {
                            total += setup.density(t1, k1, t1 + d, k2);
                        }
                    }
                    total
                })
                .collect()
        })
        .collect();
    DensityGrid { t, dt, p }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{canonical_basic, compose_network};
    use rand::Rng;
    use rand::SeedableRng;

    fn baseline_setup() -> TwoPhotonSetup {
        let beta = compose_network(&canonical_basic()).unwrap();
        TwoPhotonSetup::epr_epr(beta, vec![SubsystemParams::baseline(); 4]).unwrap()
    }

    #[test]
    fn table_probabilities_for_matched_parameters() {
        // Two-EPR input through the basic network: 1/8 on the diagonal, zero
        // for the pairs (1,2) and (3,4), 1/16 elsewhere.
        let setup = baseline_setup();
        for k1 in 1..=4 {
            for k2 in 1..=4 {
                let p = outcome_probability(&setup, k1, k2).unwrap();
                let expected = if k1 == k2 {
                    0.125
                } else if (k1.min(k2), k1.max(k2)) == (1, 2) || (k1.min(k2), k1.max(k2)) == (3, 4) {
                    0.0
                } else {
                    0.0625
                };
                assert!(
                    (p - expected).abs() < 1e-9,
                    "cell ({k1},{k2}): got {p}, expected {expected}"
                );
            }
        }
    }

    #[test]
    fn probabilities_sum_to_one_matched_and_mismatched() {
        let beta = compose_network(&canonical_basic()).unwrap();
        for params in [
            vec![SubsystemParams::baseline(); 4],
            vec![
                SubsystemParams { delta: 0.05, gamma: 4.2, omega: 1.03 },
                SubsystemParams { delta: -0.02, gamma: 3.9, omega: 0.98 },
                SubsystemParams { delta: 0.0, gamma: 4.0, omega: 1.0 },
                SubsystemParams { delta: 0.01, gamma: 4.05, omega: 1.01 },
            ],
        ] {
            let setup = TwoPhotonSetup::epr_epr(beta.clone(), params).unwrap();
            let mut total = 0.0;
            for k1 in 1..=4 {
                for k2 in 1..=4 {
                    total += outcome_probability(&setup, k1, k2).unwrap();
                }
            }
            assert!((total - 1.0).abs() < 1e-6, "total probability {total}");
        }
    }

    #[test]
    fn ideal_density_is_cell_independent_up_to_scale() {
        let setup = baseline_setup();
        let (t1, t2) = (0.31, 0.97);
        let base = setup.density(t1, 1, t2, 3) / 0.0625;
        for (k1, k2, w) in [(1usize, 1usize, 0.125), (2, 2, 0.125), (1, 4, 0.0625), (3, 2, 0.0625)] {
            let d = setup.density(t1, k1, t2, k2) / w;
            assert!((d - base).abs() < 1e-12 * base.max(1.0));
        }
        assert!(setup.density(t1, 1, t2, 2) < 1e-20);
    }

    #[test]
    fn matched_fidelity_is_one_for_any_record() {
        let setup = baseline_setup();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let t1: f64 = rng.gen::<f64>() * 3.0;
            let t2 = t1 + rng.gen::<f64>() * 3.0;
            let k1 = rng.gen_range(1..=4);
            let k2 = rng.gen_range(1..=4);
            let record = DetectionRecord::new(t1, k1, t2, k2);
            match fidelity_f(&setup, &record) {
                Ok(f) => assert!((f - 1.0).abs() < 1e-10, "cell ({k1},{k2})"),
                Err(Error::ZeroNormRecord) => {
                    let same_pair =
                        (k1.min(k2), k1.max(k2)) == (1, 2) || (k1.min(k2), k1.max(k2)) == (3, 4);
                    assert!(same_pair && k1 != k2);
                }
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }

    #[test]
    fn averaged_fidelity_is_one_when_matched() {
        let f = averaged_fidelity(&baseline_setup()).unwrap();
        assert!((f - 1.0).abs() < 1e-9, "F = {f}");
    }

    #[test]
    fn averaged_fidelity_is_one_for_common_shift() {
        // Identical subsystems emit indistinguishable photons, so any common
        // parameter offset leaves the protocol perfect.
        let beta = compose_network(&canonical_basic()).unwrap();
        let p = SubsystemParams { delta: 0.04, gamma: 4.1, omega: 1.02 };
        let setup = TwoPhotonSetup::epr_epr(beta, vec![p; 4]).unwrap();
        let f = averaged_fidelity(&setup).unwrap();
        assert!((f - 1.0).abs() < 1e-9, "F = {f}");
    }

    #[test]
    fn single_coupling_error_quadratic_response() {
        // F(dOmega_1) ~ 1 - (9/16) dOmega_1^2 for the critically damped
        // baseline.
        let beta = compose_network(&canonical_basic()).unwrap();
        let eps = 0.01;
        let params = vec![
            SubsystemParams { omega: 1.0 + eps, ..SubsystemParams::baseline() },
            SubsystemParams::baseline(),
            SubsystemParams::baseline(),
            SubsystemParams::baseline(),
        ];
        let f = averaged_fidelity(&TwoPhotonSetup::epr_epr(beta, params).unwrap()).unwrap();
        let predicted = 1.0 - 9.0 / 16.0 * eps * eps;
        assert!(
            ((1.0 - f) - (1.0 - predicted)).abs() < 0.02 * (1.0 - predicted),
            "F = {f}, predicted {predicted}"
        );
    }

    #[test]
    fn delay_density_integrates_to_one_and_decays() {
        let setup = baseline_setup();
        let total = quad::integrate_ordered_2d(
            |t1, t2| {
                let mut acc = 0.0;
                for k1 in 1..=4 {
                    for k2 in 1..=4 {
                        acc += setup.density(t1, k1, t2, k2);
                    }
                }
                acc
            },
            setup.horizon(),
            1e-10,
            1e-8,
        )
        .unwrap();
        assert!((total - 1.0).abs() < 1e-6);

        let grid = two_photon_delay_density(&setup, 12, 12, 3.0, 6.0);
        assert!(grid.p[3][0] > 0.0);
        let tail = grid.p[3][11];
        assert!(tail < 1e-3 * grid.p[3][0]);
    }
}
