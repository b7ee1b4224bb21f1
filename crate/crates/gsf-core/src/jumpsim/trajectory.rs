//! Trajectory sampling: a piecewise deterministic process alternating
//! non-Hermitian drift with detection-triggered jumps.
//!
//! States that involve only the optically active subsystems are tracked in a
//! sum-of-products form (a few branches, each a product of per-subsystem
//! 4-component factors), which makes the survival-probability root solves
//! cheap enough for 1e5-trajectory runs. States with spectator qubits fall
//! back to the dense engine.

use num_complex::Complex64;
use rand::Rng;

use super::propagator::{apply_jump, evolve_all, BlockPropagator};
use super::{integration_horizon, SubsystemParams};
use crate::error::{Error, Result};
use crate::optics::ModeUnitary;
use crate::qstate::{StateVector, SubsystemKind, SubsystemSpec};

/// Per-subsystem factor in the basis (|0,vac>, |1,vac>, |e,vac>, |1,1ph>).
type Factor = [Complex64; 4];

#[derive(Clone, Debug)]
struct Branch {
    coeff: Complex64,
    factors: Vec<Factor>,
}

/// Sum-of-products state over the active subsystems only.
#[derive(Clone, Debug)]
pub struct OpticalState {
    blocks: Vec<BlockPropagator>,
    gammas: Vec<f64>,
    branches: Vec<Branch>,
}

impl OpticalState {
    /// Decomposes a dense all-active state. Amplitude on any |e,1ph> or
    /// |0,1ph> component is rejected: those lie outside the protocol space.
    pub fn from_dense(state: &StateVector, params: &[SubsystemParams]) -> Result<Self> {
        let n = state.specs().len();
        if state.specs().iter().any(|s| s.kind != SubsystemKind::Active) {
            return Err(Error::InvalidConfig("sum-of-products state requires all-active subsystems".into()));
        }
        assert_eq!(params.len(), n);
        let mut branches = Vec::new();
        for (i, &amp) in state.amps().iter().enumerate() {
            if amp.norm_sqr() < 1e-28 {
                continue;
            }
            let tuple = state.tuple_of(i);
            let mut factors = Vec::with_capacity(n);
            for &local in &tuple {
                let (atom, cavity) = (local / 2, local % 2);
                let slot = match (atom, cavity) {
                    (0, 0) => 0,
                    (1, 0) => 1,
                    (2, 0) => 2,
                    (1, 1) => 3,
                    _ => {
                        return Err(Error::InvalidConfig(
                            "state has amplitude outside the zero/one-excitation space".into(),
                        ))
                    }
                };
                let mut f = [Complex64::ZERO; 4];
                f[slot] = Complex64::ONE;
                factors.push(f);
            }
            branches.push(Branch { coeff: amp, factors });
        }
        let blocks = params.iter().map(BlockPropagator::new).collect();
        let gammas = params.iter().map(|p| p.gamma.sqrt()).collect();
        Ok(Self { blocks, gammas, branches })
    }

    fn evolved_factor(&self, j: usize, f: &Factor, t: f64) -> Factor {
        let (u_ee, u_ep, u_pp) = self.blocks[j].matrix(t);
        [f[0], f[1], u_ee * f[2] + u_ep * f[3], u_ep * f[2] + u_pp * f[3]]
    }

    /// The state propagated for time `t` from the current origin.
    fn at(&self, t: f64) -> Self {
        let branches = self
            .branches
            .iter()
            .map(|b| Branch {
                coeff: b.coeff,
                factors: b
                    .factors
                    .iter()
                    .enumerate()
                    .map(|(j, f)| self.evolved_factor(j, f, t))
                    .collect(),
            })
            .collect();
        Self { blocks: self.blocks.clone(), gammas: self.gammas.clone(), branches }
    }

    pub fn norm2(&self) -> f64 {
        let mut acc = Complex64::ZERO;
        for (i, bi) in self.branches.iter().enumerate() {
            for (k, bk) in self.branches.iter().enumerate() {
                let mut ov = bi.coeff.conj() * bk.coeff;
                if ov.norm_sqr() == 0.0 {
                    continue;
                }
                for (fi, fk) in bi.factors.iter().zip(&bk.factors) {
                    let mut dot = Complex64::ZERO;
                    for s in 0..4 {
                        dot += fi[s].conj() * fk[s];
                    }
                    ov *= dot;
                    if ov.norm_sqr() == 0.0 {
                        break;
                    }
                }
                if i == k {
                    acc += Complex64::new(ov.re, 0.0);
                } else {
                    acc += ov;
                }
            }
        }
        acc.re
    }

    fn survival(&self, t: f64) -> f64 {
        self.at(t).norm2()
    }

    fn rescale(&mut self, factor: f64) {
        for b in &mut self.branches {
            b.coeff *= factor;
        }
    }

    /// Applies d_k = sum_j beta_{k,j} gamma_j c_j.
    fn jumped(&self, k: usize, beta: &ModeUnitary) -> Self {
        let n = self.gammas.len();
        let mut branches = Vec::new();
        for b in &self.branches {
            for j in 0..n {
                let coeff = beta.entry(k, j + 1) * self.gammas[j];
                let photon_amp = b.factors[j][3];
                if (coeff * photon_amp).norm_sqr() < 1e-60 {
                    continue;
                }
                let mut factors = b.factors.clone();
                factors[j] = [Complex64::ZERO, photon_amp, Complex64::ZERO, Complex64::ZERO];
                branches.push(Branch { coeff: b.coeff * coeff, factors });
            }
        }
        Self { blocks: self.blocks.clone(), gammas: self.gammas.clone(), branches }
    }

    /// Weight of the no-excitation component, which can never click.
    fn dead_weight(&self) -> f64 {
        let mut projected = self.clone();
        for b in &mut projected.branches {
            for f in &mut b.factors {
                f[2] = Complex64::ZERO;
                f[3] = Complex64::ZERO;
            }
        }
        projected.norm2()
    }

    pub fn to_dense(&self, specs: Vec<SubsystemSpec>) -> StateVector {
        let mut out = StateVector::zero(specs);
        let n = self.gammas.len();
        let mut tuple = vec![0usize; n];
        for b in &self.branches {
            expand_branch(&mut out, b, 0, &mut tuple, b.coeff);
        }
        return out;

        fn expand_branch(
            out: &mut StateVector,
            b: &Branch,
            j: usize,
            tuple: &mut Vec<usize>,
            partial: Complex64,
        ) {
            if partial.norm_sqr() < 1e-60 {
                return;
            }
            if j == b.factors.len() {
                let idx = out.index_of(tuple);
                out.amps_mut()[idx] += partial;
                return;
            }
            const LOCAL: [usize; 4] = [0, 2, 4, 3]; // slot -> atom*2+cavity
            for s in 0..4 {
                let amp = b.factors[j][s];
                if amp.norm_sqr() == 0.0 {
                    continue;
                }
                tuple[j] = LOCAL[s];
                expand_branch(out, b, j + 1, tuple, partial * amp);
            }
        }
    }
}

/// One sampled run: ordered clicks and the final conditional state.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// (time, detector) for each click, in order.
    pub clicks: Vec<(f64, usize)>,
    pub final_state: StateVector,
}

/// Finds t in [0, hi] with survival(t) = target; survival is monotone
/// non-increasing from survival(0).
fn solve_click_time(survival: impl Fn(f64) -> f64, hi: f64, target: f64) -> f64 {
    let mut lo = 0.0;
    let mut lo_val = survival(0.0);
    let mut hi_t = hi;
    let mut hi_val = survival(hi);
    debug_assert!(target <= lo_val + 1e-12 && target >= hi_val - 1e-12);
    for _ in 0..200 {
        if hi_t - lo < 1e-13 * hi.max(1.0) {
            break;
        }
        // secant proposal, safeguarded by bisection
        let mut mid = if (lo_val - hi_val).abs() > 1e-300 {
            lo + (lo_val - target) * (hi_t - lo) / (lo_val - hi_val)
        } else {
            0.5 * (lo + hi_t)
        };
        let third = (hi_t - lo) / 8.0;
        if !(mid > lo + third * 0.01 && mid < hi_t - third * 0.01) {
            mid = 0.5 * (lo + hi_t);
        }
        let v = survival(mid);
        if v >= target {
            lo = mid;
            lo_val = v;
        } else {
            hi_t = mid;
            hi_val = v;
        }
        if (v - target).abs() < 1e-14 {
            return mid;
        }
    }
    0.5 * (lo + hi_t)
}

const RESIDUAL_EXCITATION_TOL: f64 = 1e-10;

/// Samples clicks from an all-active initial state using the
/// sum-of-products engine.
pub fn sample_trajectory(
    initial: &StateVector,
    beta: &ModeUnitary,
    params: &[SubsystemParams],
    rng: &mut impl Rng,
) -> Result<Trajectory> {
    let mut state = OpticalState::from_dense(initial, params)?;
    {
        let n2 = state.norm2();
        if n2 < 1e-24 {
            return Err(Error::ZeroNormRecord);
        }
        state.rescale(1.0 / n2.sqrt());
    }
    let time_cap = 4.0 * integration_horizon(params);
    let mut clicks = Vec::new();
    let mut t_now = 0.0;

    loop {
        // state is normalized at the top of every iteration
        let dead = state.dead_weight();
        let u: f64 = rng.gen::<f64>();
        if u <= dead {
            break; // this branch never emits again
        }
        let cap_survival = state.survival(time_cap);
        if cap_survival > u {
            let residual = cap_survival - dead;
            if residual > RESIDUAL_EXCITATION_TOL {
                return Err(Error::TrajectoryTimeCap(residual));
            }
            break;
        }
        let dt = solve_click_time(|t| state.survival(t), time_cap, u);
        let evolved = state.at(dt);
        let weights: Vec<f64> = (1..=beta.n()).map(|k| evolved.jumped(k, beta).norm2()).collect();
        let total_w: f64 = weights.iter().sum();
        if total_w <= 0.0 {
            return Err(Error::ZeroNormRecord);
        }
        let mut pick = rng.gen::<f64>() * total_w;
        let mut detector = beta.n();
        for (k, w) in weights.iter().enumerate() {
            if pick < *w {
                detector = k + 1;
                break;
            }
            pick -= w;
        }
        t_now += dt;
        clicks.push((t_now, detector));
        state = evolved.jumped(detector, beta);
        state.rescale(1.0 / weights[detector - 1].sqrt());
        if clicks.len() > 8 {
            return Err(Error::InvalidConfig("runaway click count".into()));
        }
    }

    let mut final_state = state.to_dense(initial.specs().to_vec());
    final_state.normalize();
    Ok(Trajectory { clicks, final_state })
}

/// Dense-engine variant for states that include spectator qubits.
pub fn sample_trajectory_dense(
    initial: &StateVector,
    beta: &ModeUnitary,
    params: &[SubsystemParams],
    rng: &mut impl Rng,
) -> Result<Trajectory> {
    let all_active = initial.specs().iter().all(|s| s.kind == SubsystemKind::Active);
    if all_active {
        return sample_trajectory(initial, beta, params, rng);
    }
    let time_cap = 4.0 * integration_horizon(params);
    let mut state = initial.clone();
    if state.norm2() < 1e-24 {
        return Err(Error::ZeroNormRecord);
    }
    state.normalize();
    let mut clicks = Vec::new();
    let mut t_now = 0.0;

    let excitation_weight = |sv: &StateVector| -> f64 {
        // weight of components with at least one excitation
        let mut acc = 0.0;
        for (i, amp) in sv.amps().iter().enumerate() {
            let w = amp.norm_sqr();
            if w < 1e-30 {
                continue;
            }
            let tuple = sv.tuple_of(i);
            let excited = sv.specs().iter().zip(&tuple).any(|(s, &l)| {
                s.kind == SubsystemKind::Active && (l / 2 == 2 || l % 2 == 1)
            });
            if excited {
                acc += w;
            }
        }
        acc
    };

    loop {
        let dead = 1.0 - excitation_weight(&state);
        let u: f64 = rng.gen::<f64>();
        if u <= dead {
            break;
        }
        let survival = |t: f64| -> f64 {
            let mut sv = state.clone();
            evolve_all(&mut sv, params, t).expect("propagation");
            sv.norm2()
        };
        let cap_survival = survival(time_cap);
        if cap_survival > u {
            let residual = cap_survival - dead;
            if residual > RESIDUAL_EXCITATION_TOL {
                return Err(Error::TrajectoryTimeCap(residual));
            }
            break;
        }
        let dt = solve_click_time(survival, time_cap, u);
        let mut evolved = state.clone();
        evolve_all(&mut evolved, params, dt)?;
        let jumped: Vec<StateVector> = (1..=beta.n())
            .map(|k| apply_jump(&evolved, k, beta, params))
            .collect::<Result<_>>()?;
        let weights: Vec<f64> = jumped.iter().map(|s| s.norm2()).collect();
        let total_w: f64 = weights.iter().sum();
        if total_w <= 0.0 {
            return Err(Error::ZeroNormRecord);
        }
        let mut pick = rng.gen::<f64>() * total_w;
        let mut detector = beta.n();
        for (k, w) in weights.iter().enumerate() {
            if pick < *w {
                detector = k + 1;
                break;
            }
            pick -= w;
        }
        t_now += dt;
        clicks.push((t_now, detector));
        state = jumped[detector - 1].clone();
        state.normalize();
        if clicks.len() > 8 {
            return Err(Error::InvalidConfig("runaway click count".into()));
        }
    }

    Ok(Trajectory { clicks, final_state: state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{canonical_basic, compose_network};
    use crate::qstate::build_initial_state;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn excited_pairs() -> (StateVector, Vec<SubsystemParams>) {
        let specs = (1..=4).map(SubsystemSpec::active).collect();
        let mut sv = build_initial_state(specs, &[(1, 2), (3, 4)]).unwrap();
        sv.excite(&[1, 2, 3, 4]).unwrap();
        (sv, vec![SubsystemParams::baseline(); 4])
    }

    #[test]
    fn sop_norm_matches_dense() {
        let (sv, params) = excited_pairs();
        let sop = OpticalState::from_dense(&sv, &params).unwrap();
        assert!((sop.norm2() - sv.norm2()).abs() < 1e-12);
        let beta = compose_network(&canonical_basic()).unwrap();
        let evolved = sop.at(0.7);
        let mut dense = sv.clone();
        super::super::propagator::evolve_all(&mut dense, &params, 0.7).unwrap();
        assert!((evolved.norm2() - dense.norm2()).abs() < 1e-12);
        let jumped = evolved.jumped(2, &beta);
        let dense_jumped = apply_jump(&dense, 2, &beta, &params).unwrap();
        assert!((jumped.norm2() - dense_jumped.norm2()).abs() < 1e-12);
        // round-trip through the dense representation
        let back = jumped.to_dense(sv.specs().to_vec());
        let diff: f64 = back
            .amps()
            .iter()
            .zip(dense_jumped.amps())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        assert!(diff < 1e-24);
    }

    #[test]
    fn exactly_two_clicks_per_trajectory() {
        let (sv, params) = excited_pairs();
        let beta = compose_network(&canonical_basic()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let traj = sample_trajectory(&sv, &beta, &params, &mut rng).unwrap();
            assert_eq!(traj.clicks.len(), 2);
            assert!(traj.clicks[0].0 <= traj.clicks[1].0);
        }
    }

    #[test]
    fn class_frequencies_match_equal_split() {
        let (sv, params) = excited_pairs();
        let beta = compose_network(&canonical_basic()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 4000;
        let mut same = 0;
        let mut forbidden = 0;
        for _ in 0..n {
            let traj = sample_trajectory(&sv, &beta, &params, &mut rng).unwrap();
            let (k1, k2) = (traj.clicks[0].1, traj.clicks[1].1);
            if k1 == k2 {
                same += 1;
            }
            let pair = (k1.min(k2), k1.max(k2));
            if k1 != k2 && (pair == (1, 2) || pair == (3, 4)) {
                forbidden += 1;
            }
        }
        assert_eq!(forbidden, 0);
        // binomial(4000, 1/2): 3 sigma ~ 95
        let dev = (same as f64 - n as f64 / 2.0).abs();
        assert!(dev < 3.0 * (n as f64 * 0.25).sqrt(), "same-detector count {same}");
    }

    #[test]
    fn dense_engine_agrees_on_click_statistics() {
        let (sv, params) = excited_pairs();
        // attach a spectator so the dense path is exercised
        let mut specs = sv.specs().to_vec();
        specs.push(SubsystemSpec::qubit(9));
        let mut big = StateVector::zero(specs.clone());
        for (i, amp) in sv.amps().iter().enumerate() {
            if amp.norm_sqr() > 0.0 {
                let mut tuple = sv.tuple_of(i);
                tuple.push(0);
                let idx = big.index_of(&tuple);
                big.amps_mut()[idx] = *amp;
            }
        }
        let beta = compose_network(&canonical_basic()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut same = 0;
        let n = 300;
        for _ in 0..n {
            let traj = sample_trajectory_dense(&big, &beta, &params, &mut rng).unwrap();
            assert_eq!(traj.clicks.len(), 2);
            if traj.clicks[0].1 == traj.clicks[1].1 {
                same += 1;
            }
        }
        let dev = (same as f64 - n as f64 / 2.0).abs();
        assert!(dev < 4.0 * (n as f64 * 0.25).sqrt());
    }

    #[test]
    fn no_excitation_means_no_clicks() {
        let specs = (1..=4).map(SubsystemSpec::active).collect();
        let sv = build_initial_state(specs, &[(1, 2), (3, 4)]).unwrap();
        let params = vec![SubsystemParams::baseline(); 4];
        let beta = compose_network(&canonical_basic()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let traj = sample_trajectory(&sv, &beta, &params, &mut rng).unwrap();
        assert!(traj.clicks.is_empty());
    }
}
