//! Time evolution in the symmetric basis: exact propagation under a static
//! Hamiltonian and fixed-step fourth-order Magnus integration of parameter ramps.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::hamiltonians::{build_driven, is_hermitian, DriveParams, HMatrix};
use crate::ladder::{ladder, LadderResult};
use crate::linalg::{self, CMatrix, CVector};
use crate::symbasis::{enumerate_basis, ModelParams, SymState, NORM_TOLERANCE};
use crate::{Error, Result};

/// Largest change of any final amplitude allowed between step `h` and `h/2`.
pub const STEP_CONVERGENCE: f64 = 1e-8;
/// Step refinements attempted before giving up.
const MAX_REFINEMENTS: usize = 6;
/// Parameter mismatch allowed at segment joins.
const JOIN_TOLERANCE: f64 = 1e-12;

/// `exp(-i H t) psi0` by eigen-decomposition.
pub fn evolve_static(h: &HMatrix, psi0: &SymState, t: f64) -> Result<SymState> {
    if !is_hermitian(h) {
        return Err(Error::Domain("Hamiltonian is not Hermitian".into()));
    }
    if psi0.dim() != h.dim() {
        return Err(Error::Domain(format!(
            "state dimension {} does not match Hamiltonian dimension {}",
            psi0.dim(),
            h.dim()
        )));
    }
    if !t.is_finite() {
        return Err(Error::Domain("evolution time must be finite".into()));
    }
    let eigen = h.eigh()?;
    Ok(SymState::from_amplitudes(linalg::propagate_with(&eigen, psi0.amplitudes(), t)))
}

/// `<psi|H|psi>`
pub fn expectation(h: &HMatrix, psi: &SymState) -> f64 {
    psi.amplitudes().dotc(&(h.entries() * psi.amplitudes())).re
}

/// One linear piece of a ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampSegment {
    pub duration: f64,
    pub delta_r: (f64, f64),
    pub omega_r: (f64, f64),
    pub omega_uw: (f64, f64),
}

impl RampSegment {
    pub fn new(duration: f64, delta_r: (f64, f64), omega_r: (f64, f64), omega_uw: (f64, f64)) -> Self {
        Self {
            duration,
            delta_r,
            omega_r,
            omega_uw,
        }
    }

    fn at(&self, s: f64) -> RampPoint {
        let lerp = |(a, b): (f64, f64)| a + (b - a) * s;
        RampPoint {
            delta_r: lerp(self.delta_r),
            omega_r: lerp(self.omega_r),
            omega_uw: lerp(self.omega_uw),
        }
    }
}

/// Instantaneous ramp parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampPoint {
    pub delta_r: f64,
    pub omega_r: f64,
    pub omega_uw: f64,
}

/// Piecewise-linear schedule of `(delta_r, omega_r, omega_uw)` with a fixed
/// probe detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampProtocol {
    segments: Vec<RampSegment>,
    delta_uw: f64,
}

impl RampProtocol {
    pub fn new(segments: Vec<RampSegment>, delta_uw: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Domain("ramp needs at least one segment".into()));
        }
        if !delta_uw.is_finite() {
            return Err(Error::Domain("delta_uw must be finite".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            let values = [
                s.duration, s.delta_r.0, s.delta_r.1, s.omega_r.0, s.omega_r.1, s.omega_uw.0, s.omega_uw.1,
            ];
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("segment {i}: non-finite value")));
            }
            if s.duration < 0.0 {
                return Err(Error::Domain(format!("segment {i}: negative duration")));
            }
            if s.omega_r.0 < 0.0 || s.omega_r.1 < 0.0 || s.omega_uw.0 < 0.0 || s.omega_uw.1 < 0.0 {
                return Err(Error::Domain(format!("segment {i}: Rabi frequencies must be >= 0")));
            }
        }
        for (i, w) in segments.windows(2).enumerate() {
            let (a, b) = (&w[0], &w[1]);
            let gaps = [
                a.delta_r.1 - b.delta_r.0,
                a.omega_r.1 - b.omega_r.0,
                a.omega_uw.1 - b.omega_uw.0,
            ];
            if gaps.iter().any(|g| g.abs() > JOIN_TOLERANCE) {
                return Err(Error::Domain(format!("parameters jump between segments {i} and {}", i + 1)));
            }
        }
        let protocol = Self { segments, delta_uw };
        if !(protocol.total_duration() > 0.0) {
            return Err(Error::Domain("total ramp duration must be positive".into()));
        }
        Ok(protocol)
    }

    /// Fixed parameters held for `duration`.
    pub fn constant(duration: f64, delta_r: f64, omega_r: f64, omega_uw: f64, delta_uw: f64) -> Result<Self> {
        Self::new(
            vec![RampSegment::new(
                duration,
                (delta_r, delta_r),
                (omega_r, omega_r),
                (omega_uw, omega_uw),
            )],
            delta_uw,
        )
    }

    pub fn segments(&self) -> &[RampSegment] {
        &self.segments
    }

    pub fn delta_uw(&self) -> f64 {
        self.delta_uw
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Parameters at time `t`, clamped to `[0, total]`.
    pub fn at(&self, t: f64) -> RampPoint {
        let mut start = 0.0;
        for seg in &self.segments {
            let end = start + seg.duration;
            if t <= end && seg.duration > 0.0 {
                return seg.at(((t - start) / seg.duration).clamp(0.0, 1.0));
            }
            start = end;
        }
        let last = self.segments.last().expect("non-empty");
        last.at(1.0)
    }

    /// Model and drive parameters at time `t`.
    pub fn params_at(&self, params: &ModelParams, t: f64) -> Result<(ModelParams, DriveParams)> {
        let point = self.at(t);
        let model = params.clone().with_delta_r(point.delta_r)?.with_omega_r(point.omega_r)?;
        Ok((model, DriveParams::new(point.omega_uw, self.delta_uw)?))
    }
}

/// Driven Hamiltonian as an affine function of the ramped parameters.
struct AffineHamiltonian {
    constant: CMatrix,
    per_delta_r: CMatrix,
    per_omega_r: CMatrix,
    per_omega_uw: CMatrix,
}

impl AffineHamiltonian {
    fn new(params: &ModelParams, delta_uw: f64) -> Result<Self> {
        let build = |delta_r: f64, omega_r: f64, omega_uw: f64| -> Result<CMatrix> {
            let p = params.clone().with_delta_r(delta_r)?.with_omega_r(omega_r)?;
            Ok(build_driven(&p, &DriveParams::new(omega_uw, delta_uw)?).into_entries())
        };
        let constant = build(0.0, 0.0, 0.0)?;
        Ok(Self {
            per_delta_r: build(1.0, 0.0, 0.0)? - &constant,
            per_omega_r: build(0.0, 1.0, 0.0)? - &constant,
            per_omega_uw: build(0.0, 0.0, 1.0)? - &constant,
            constant,
        })
    }

    fn at(&self, p: RampPoint) -> CMatrix {
        &self.constant
            + self.per_delta_r.scale(p.delta_r)
            + self.per_omega_r.scale(p.omega_r)
            + self.per_omega_uw.scale(p.omega_uw)
    }
}

/// A sampled point of the adiabatic-following diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelitySample {
    pub time: f64,
    /// `|<tracked eigenstate|psi(t)>|^2`
    pub fidelity: f64,
    /// Energy of the tracked eigenstate.
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct EvolutionReport {
    pub final_state: SymState,
    pub norm_drift: f64,
    pub fidelity_trace: Vec<FidelitySample>,
    /// Smallest gap between the tracked level and its nearest coupled neighbour.
    pub min_gap: f64,
    pub final_fidelity: f64,
    /// Step actually used (after any refinement).
    pub step: f64,
    pub steps: usize,
}

/// Starting step `0.5 / ||H||`, bounding `||H||` by `dim * max|H_ij|` at
/// every segment end.
pub fn default_step(protocol: &RampProtocol, params: &ModelParams) -> Result<f64> {
    let mut times = vec![0.0];
    let mut acc = 0.0;
    for s in protocol.segments() {
        acc += s.duration;
        times.push(acc);
    }
    let mut norm = 0.0f64;
    for t in times {
        let (model, drive) = protocol.params_at(params, t)?;
        let h = build_driven(&model, &drive);
        norm = norm.max(h.max_abs() * h.dim() as f64);
    }
    // the Magnus error follows the ramp rate, not the fast phases; the
    // halving loop in `evolve_ramp` tightens the step when needed
    Ok((0.5 / norm.max(f64::MIN_POSITIVE)).min(protocol.total_duration()))
}

/// Integrates `i d/dt psi = H(t) psi` along `protocol` with a fixed-step
/// fourth-order Magnus scheme.
///
/// The run is repeated with half the step; if any final amplitude moves by
/// more than [`STEP_CONVERGENCE`] the step is halved again. The reported
/// fidelity follows the instantaneous eigenstate that overlaps `psi0` most at
/// `t = 0`, matched from step to step by eigenvector overlap.
pub fn evolve_ramp(
    protocol: &RampProtocol,
    params: &ModelParams,
    psi0: &SymState,
    step: f64,
) -> Result<EvolutionReport> {
    evolve_ramp_sampled(protocol, params, psi0, step, 201)
}

pub fn evolve_ramp_sampled(
    protocol: &RampProtocol,
    params: &ModelParams,
    psi0: &SymState,
    step: f64,
    samples: usize,
) -> Result<EvolutionReport> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Domain("step must be positive".into()));
    }
    if psi0.dim() != params.dim() {
        return Err(Error::Domain("initial state does not match the model basis".into()));
    }
    let affine = AffineHamiltonian::new(params, protocol.delta_uw())?;
    let total = protocol.total_duration();
    let mut steps = ((total / step).ceil() as usize).max(1);
    let mut coarse = integrate(&affine, protocol, psi0.amplitudes(), steps)?;
    let mut accepted = None;
    for _ in 0..MAX_REFINEMENTS {
        let fine = integrate(&affine, protocol, psi0.amplitudes(), 2 * steps)?;
        let change = (&fine - &coarse).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        steps *= 2;
        if change < STEP_CONVERGENCE && (fine.norm_squared() - 1.0).abs() <= NORM_TOLERANCE {
            accepted = Some(fine);
            break;
        }
        coarse = fine;
    }
    let final_amplitudes = accepted.ok_or_else(|| {
        Error::Integration(format!(
            "no convergence to {STEP_CONVERGENCE:e} after {MAX_REFINEMENTS} step halvings"
        ))
    })?;
    let norm_drift = (final_amplitudes.norm_squared() - psi0.norm_squared()).abs();

    let (trace, min_gap, final_fidelity) = track(&affine, protocol, params, psi0.amplitudes(), steps, samples)?;
    Ok(EvolutionReport {
        final_state: SymState::from_amplitudes(final_amplitudes),
        norm_drift,
        fidelity_trace: trace,
        min_gap,
        final_fidelity,
        step: total / steps as f64,
        steps,
    })
}

/// One fourth-order Magnus step: two Gauss-Legendre samples of `H`, the
/// commutator correction, then an exact exponential of the Hermitian
/// generator.
fn magnus_step(affine: &AffineHamiltonian, protocol: &RampProtocol, psi: &CVector, t: f64, h: f64) -> Result<CVector> {
    let offset = 3f64.sqrt() / 6.0;
    let h1 = affine.at(protocol.at(t + (0.5 - offset) * h));
    let h2 = affine.at(protocol.at(t + (0.5 + offset) * h));
    let commutator = &h2 * &h1 - &h1 * &h2;
    let generator = (&h1 + &h2).scale(0.5 * h) - commutator * Complex64::new(0.0, 3f64.sqrt() / 12.0 * h * h);
    Ok(linalg::propagate_with(&linalg::eigh(&generator)?, psi, 1.0))
}

fn integrate(affine: &AffineHamiltonian, protocol: &RampProtocol, psi0: &CVector, steps: usize) -> Result<CVector> {
    let total = protocol.total_duration();
    let h = total / steps as f64;
    let mut psi = psi0.clone();
    for k in 0..steps {
        psi = magnus_step(affine, protocol, &psi, k as f64 * h, h)?;
    }
    Ok(psi)
}

/// Reruns the accepted integration while following one instantaneous
/// eigenstate by maximal overlap.
fn track(
    affine: &AffineHamiltonian,
    protocol: &RampProtocol,
    params: &ModelParams,
    psi0: &CVector,
    steps: usize,
    samples: usize,
) -> Result<(Vec<FidelitySample>, f64, f64)> {
    let total = protocol.total_duration();
    let h = total / steps as f64;
    let excitation: Vec<usize> = enumerate_basis(params).iter().map(|i| i.excitation()).collect();
    let sample_every = (steps / samples.max(1)).max(1);

    let eigen = linalg::eigh(&affine.at(protocol.at(0.0)))?;
    let mut tracked = argmax((0..eigen.len()).map(|j| eigen.vector(j).dotc(psi0).norm_sqr()));
    let mut reference = eigen.vector(tracked);
    let mut psi = psi0.clone();
    let mut trace = Vec::new();
    let mut min_gap = f64::INFINITY;
    let mut fidelity = reference.dotc(&psi).norm_sqr();

    let mut observe = |k: usize, eigen: &linalg::Eigen, tracked: usize, fidelity: f64, min_gap: &mut f64| {
        let t = k as f64 * h;
        let drive_on = protocol.at(t).omega_uw != 0.0;
        let sector = dominant_excitation(&eigen.vector(tracked), &excitation);
        let energy = eigen.values[tracked];
        for j in 0..eigen.len() {
            if j == tracked {
                continue;
            }
            if !drive_on && dominant_excitation(&eigen.vector(j), &excitation) != sector {
                continue;
            }
            *min_gap = min_gap.min((eigen.values[j] - energy).abs());
        }
        if k.is_multiple_of(sample_every) || k == steps {
            trace.push(FidelitySample {
                time: t,
                fidelity,
                energy,
            });
        }
    };
    observe(0, &eigen, tracked, fidelity, &mut min_gap);

    for k in 0..steps {
        psi = magnus_step(affine, protocol, &psi, k as f64 * h, h)?;
        let eigen = linalg::eigh(&affine.at(protocol.at((k + 1) as f64 * h)))?;
        tracked = argmax((0..eigen.len()).map(|j| eigen.vector(j).dotc(&reference).norm_sqr()));
        reference = eigen.vector(tracked);
        fidelity = reference.dotc(&psi).norm_sqr();
        observe(k + 1, &eigen, tracked, fidelity, &mut min_gap);
    }
    Ok((trace, min_gap, fidelity))
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    values
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
        .0
}

fn dominant_excitation(v: &CVector, excitation: &[usize]) -> usize {
    let max_m = excitation.iter().copied().max().unwrap_or(0);
    let mut weight = vec![0.0; max_m + 1];
    for (z, &m) in v.iter().zip(excitation) {
        weight[m] += z.norm_sqr();
    }
    argmax(weight.into_iter())
}

/// Dressed ladder of the interpolated parameters at time `t`.
pub fn instantaneous_spectrum(protocol: &RampProtocol, params: &ModelParams, t: f64) -> Result<LadderResult> {
    let total = protocol.total_duration();
    if !(0.0..=total).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0, {total}]")));
    }
    let (model, _) = protocol.params_at(params, t)?;
    ladder(&model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::build_symmetric;
    use crate::ladder::Branch;
    use crate::symbasis::{index_of, SymIndex};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn p(n: usize, omega: f64, delta: f64) -> ModelParams {
        ModelParams::new(n, omega, delta, 0.0).unwrap()
    }

    #[test]
    fn zero_time_is_identity() {
        let params = p(2, 1.0, 0.3);
        let psi = SymState::basis(&params, SymIndex::ground(2)).unwrap();
        let out = evolve_static(&build_symmetric(&params), &psi, 0.0).unwrap();
        assert!((out.amplitudes() - psi.amplitudes()).norm() < 1e-14);
    }

    #[test]
    fn single_atom_pi_pulse() {
        let params = p(1, 1.0, 0.0);
        let psi = SymState::basis(&params, SymIndex::ground(1)).unwrap();
        let out = evolve_static(&build_symmetric(&params), &psi, PI).unwrap();
        let e0 = index_of(SymIndex::excited(0, 0), &params).unwrap();
        assert_relative_eq!(out.populations()[e0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(out.norm_squared(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_atom_collective_pi_pulse() {
        let params = p(2, 1.0, 0.0);
        let psi = SymState::basis(&params, SymIndex::ground(2)).unwrap();
        let t = PI / 2f64.sqrt();
        let exact = evolve_static(&build_symmetric(&params), &psi, t).unwrap();
        let e1 = index_of(SymIndex::excited(0, 1), &params).unwrap();
        assert_relative_eq!(exact.populations()[e1], 1.0, epsilon = 1e-12);
        // direct integration of the same static problem
        let protocol = RampProtocol::constant(t, 0.0, 1.0, 0.0, 0.0).unwrap();
        let report = evolve_ramp(&protocol, &params, &psi, 1e-3).unwrap();
        assert!((report.final_state.amplitudes() - exact.amplitudes()).norm() < 1e-8);
    }

    #[test]
    fn non_hermitian_rejected() {
        let params = p(1, 1.0, 0.0);
        let mut m = build_symmetric(&params).into_entries();
        m[(1, 2)] += Complex64::new(0.0, 0.1);
        let h = HMatrix::new(m, crate::hamiltonians::BasisTag::Symmetric, crate::hamiltonians::FrameTag::LaserFrame);
        let psi = SymState::basis(&params, SymIndex::ground(1)).unwrap();
        assert!(matches!(evolve_static(&h, &psi, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn static_energy_conserved() {
        let params = p(3, 1.3, -0.4);
        let h = build_driven(&params, &DriveParams::new(0.2, 0.1).unwrap());
        let psi = SymState::basis(&params, SymIndex::ground(0)).unwrap();
        let e0 = expectation(&h, &psi);
        for t in [0.5, 3.0, 40.0, 1000.0] {
            let out = evolve_static(&h, &psi, t).unwrap();
            assert!((out.norm_squared() - 1.0).abs() < 1e-12);
            assert!((expectation(&h, &out) - e0).abs() <= 1e-9 * e0.abs().max(h.max_abs()));
        }
    }

    #[test]
    fn constant_ramp_matches_static() {
        let params = p(2, 1.0, 0.5);
        let drive = DriveParams::new(0.1, 0.2).unwrap();
        let psi = SymState::basis(&params, SymIndex::ground(0)).unwrap();
        let t = 7.5;
        let exact = evolve_static(&build_driven(&params, &drive), &psi, t).unwrap();
        let protocol = RampProtocol::constant(t, 0.5, 1.0, 0.1, 0.2).unwrap();
        let step = default_step(&protocol, &params).unwrap();
        let report = evolve_ramp(&protocol, &params, &psi, step).unwrap();
        assert!((report.final_state.amplitudes() - exact.amplitudes()).norm() < 1e-8);
        assert!(report.norm_drift <= 1e-9);
    }

    #[test]
    fn protocol_validation() {
        let seg = |a: f64, b: f64| RampSegment::new(1.0, (a, b), (1.0, 1.0), (0.0, 0.0));
        assert!(RampProtocol::new(vec![seg(0.0, 1.0), seg(1.0, 2.0)], 0.0).is_ok());
        assert!(RampProtocol::new(vec![seg(0.0, 1.0), seg(1.5, 2.0)], 0.0).is_err());
        assert!(RampProtocol::new(vec![], 0.0).is_err());
        let zero = RampSegment::new(0.0, (0.0, 0.0), (1.0, 1.0), (0.0, 0.0));
        assert!(RampProtocol::new(vec![zero], 0.0).is_err());
        let neg = RampSegment::new(1.0, (0.0, 0.0), (-1.0, 1.0), (0.0, 0.0));
        assert!(RampProtocol::new(vec![neg], 0.0).is_err());
    }

    #[test]
    fn interpolation() {
        let protocol = RampProtocol::new(
            vec![
                RampSegment::new(2.0, (-2.0, 0.0), (1.0, 1.0), (0.0, 0.0)),
                RampSegment::new(1.0, (0.0, 3.0), (1.0, 0.0), (0.0, 0.0)),
            ],
            0.0,
        )
        .unwrap();
        assert_eq!(protocol.total_duration(), 3.0);
        assert_eq!(protocol.at(1.0).delta_r, -1.0);
        assert_eq!(protocol.at(2.5).delta_r, 1.5);
        assert_eq!(protocol.at(2.5).omega_r, 0.5);
        assert_eq!(protocol.at(5.0).delta_r, 3.0);
    }

    #[test]
    fn instantaneous_spectrum_endpoints_and_midpoint() {
        let params = p(2, 1.0, 0.0);
        let protocol = RampProtocol::new(vec![RampSegment::new(10.0, (-2.0, 2.0), (1.0, 1.0), (0.0, 0.0))], 0.0).unwrap();
        let mid = instantaneous_spectrum(&protocol, &params, 5.0).unwrap();
        assert_relative_eq!(mid.energy(1, Branch::Plus).unwrap(), 0.5, epsilon = 1e-12);
        assert_relative_eq!(mid.energy(1, Branch::Minus).unwrap(), -0.5, epsilon = 1e-12);
        let start = instantaneous_spectrum(&protocol, &params, 0.0).unwrap();
        let direct = ladder(&params.clone().with_delta_r(-2.0).unwrap()).unwrap();
        assert_eq!(start.energy(2, Branch::Plus), direct.energy(2, Branch::Plus));
        let end = instantaneous_spectrum(&protocol, &params, 10.0).unwrap();
        let direct = ladder(&params.clone().with_delta_r(2.0).unwrap()).unwrap();
        assert_eq!(end.energy(2, Branch::Minus), direct.energy(2, Branch::Minus));
        assert!(instantaneous_spectrum(&protocol, &params, 10.5).is_err());
        assert!(instantaneous_spectrum(&protocol, &params, -0.1).is_err());
    }

    fn dressed_plus(params: &ModelParams, n: usize) -> SymState {
        let l = ladder(params).unwrap();
        SymState::from_amplitudes(l.block(n).unwrap().level(Branch::Plus).unwrap().vector.clone())
    }

    fn unramp_omega(duration: f64) -> (ModelParams, RampProtocol, SymState) {
        let params = p(1, 1.0, 1.0);
        let protocol =
            RampProtocol::new(vec![RampSegment::new(duration, (1.0, 1.0), (1.0, 0.0), (0.0, 0.0))], 0.0).unwrap();
        let psi0 = dressed_plus(&params, 1);
        (params, protocol, psi0)
    }

    #[test]
    fn adiabatic_unramp_maps_to_bare_ground() {
        let (params, protocol, psi0) = unramp_omega(200.0);
        let step = default_step(&protocol, &params).unwrap();
        let report = evolve_ramp(&protocol, &params, &psi0, step).unwrap();
        let g1 = index_of(SymIndex::ground(1), &params).unwrap();
        assert!(report.final_state.populations()[g1] >= 0.999);
        assert!(report.final_fidelity >= 0.999);
        assert!(report.norm_drift <= 1e-9);
        assert_relative_eq!(report.min_gap, 1.0, epsilon = 1e-9);
        // a second step size agrees
        let other = evolve_ramp(&protocol, &params, &psi0, step * 0.7).unwrap();
        assert!((other.final_state.amplitudes() - report.final_state.amplitudes()).norm() < 1e-7);
    }

    #[test]
    fn sudden_unramp_leaves_dressed_admixture() {
        let (params, protocol, psi0) = unramp_omega(0.1);
        let step = default_step(&protocol, &params).unwrap();
        let report = evolve_ramp(&protocol, &params, &psi0, step).unwrap();
        let g1 = index_of(SymIndex::ground(1), &params).unwrap();
        assert!(report.final_state.populations()[g1] < 0.9);
    }

    #[test]
    fn ramp_direction_selects_bare_state() {
        let params = p(2, 1.0, 1.0);
        let l = ladder(&params).unwrap();
        let psi0 = SymState::from_amplitudes(l.block(2).unwrap().level(Branch::Minus).unwrap().vector.clone());
        let run = |target: f64| {
            let protocol = RampProtocol::new(
                vec![
                    RampSegment::new(150.0, (1.0, target), (1.0, 1.0), (0.0, 0.0)),
                    RampSegment::new(150.0, (target, target), (1.0, 0.0), (0.0, 0.0)),
                ],
                0.0,
            )
            .unwrap();
            let step = default_step(&protocol, &params).unwrap();
            evolve_ramp(&protocol, &params, &psi0, step).unwrap()
        };
        let up = run(12.0);
        let down = run(-12.0);
        assert_eq!(up.final_state.dominant(&params), SymIndex::excited(0, 1));
        assert_eq!(down.final_state.dominant(&params), SymIndex::ground(2));
        assert!(up.norm_drift <= 1e-9 && down.norm_drift <= 1e-9);
    }

    #[test]
    fn bad_step_rejected() {
        let (params, protocol, psi0) = unramp_omega(1.0);
        assert!(evolve_ramp(&protocol, &params, &psi0, 0.0).is_err());
        assert!(evolve_ramp(&protocol, &params, &psi0, f64::NAN).is_err());
    }
}
