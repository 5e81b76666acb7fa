//! Autler-Townes spectroscopy of the dressed ladder.
//!
//! A probe scanned in detuning `delta_uw` from `|g,0>` reaches a dressed level
//! of excitation block `n` when `n` probe quanta supply its energy, so each
//! dressed level `eps_{n,k}` shows up at the per-flip position
//! `delta_{n,k} = eps_{n,k} / n`. Non-interacting atoms would each be dressed
//! independently, giving the reference lines `delta = eps_{1,k}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::hamiltonians::{build_driven, DriveParams};
use crate::ladder::{analytic_energies, ladder, Branch};
use crate::linalg::{self, CVector};
use crate::symbasis::{enumerate_basis, index_of, ModelParams, SymIndex};
use crate::{Error, Result};

/// A spectral line, analytic or extracted from a simulated scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Probe detuning of the line.
    pub position: f64,
    /// Excitation number of the dressed level.
    pub n: usize,
    pub branch: Branch,
    /// Analytic lines: bare `|g,n>` weight of the dressed level. Simulated
    /// lines: signal maximum.
    pub height: f64,
    /// Full width at half maximum (zero for analytic lines).
    pub width: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
}

impl PeakSet {
    pub fn find(&self, n: usize, branch: Branch) -> Option<&Peak> {
        self.peaks.iter().find(|p| p.n == n && p.branch == branch)
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn len(&self) -> usize {
        self.peaks.len()
    }
}

/// Per-flip resonance positions of every dressed level.
pub fn peak_positions(params: &ModelParams) -> Result<PeakSet> {
    let lad = ladder(params)?;
    let mut peaks = Vec::new();
    for block in &lad.blocks {
        let g = index_of(SymIndex::ground(block.n), params)?;
        for level in block.levels.iter().rev() {
            peaks.push(Peak {
                position: level.energy / block.n as f64,
                n: block.n,
                branch: level.branch,
                height: level.vector[g].norm_sqr(),
                width: 0.0,
            });
        }
    }
    Ok(PeakSet { peaks })
}

/// Single-channel closed form of [`peak_positions`]: `(delta_{n,+}, delta_{n,-})`.
pub fn analytic_peak(omega_r: f64, delta_r: f64, n: usize) -> (f64, f64) {
    let (plus, minus) = analytic_energies(omega_r, delta_r, n);
    (plus / n as f64, minus / n as f64)
}

/// Positions of independent, non-interacting atoms: `delta = eps_{1,k}`.
pub fn noninteracting_lines(params: &ModelParams) -> Result<Vec<(Branch, f64)>> {
    let single = params.clone().with_n_atoms(1)?;
    let lad = ladder(&single)?;
    Ok(lad.blocks[0].levels.iter().rev().map(|l| (l.branch, l.energy)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignalKind {
    /// `1 - P(initial state)`
    TotalTransfer,
    /// Population of each excitation number `0..=N`.
    PerFlipPopulations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Readout {
    /// Populations at the end of the probe pulse.
    Final,
    /// Populations averaged over the pulse (exact, from the eigenbasis).
    /// Removes the Rabi-flopping nodes that make single-time readout put
    /// zeros on top of resonances.
    TimeAveraged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub delta_uw_grid: Vec<f64>,
    pub pulse_time: f64,
    pub omega_uw: f64,
    pub initial_state: SymIndex,
    pub signal: SignalKind,
    pub readout: Readout,
    /// Peaks below this fraction of the channel maximum are dropped.
    pub threshold_fraction: f64,
    /// Channels whose maximum stays below this are treated as flat.
    pub min_height: f64,
}

impl ScanConfig {
    pub fn new(delta_uw_grid: Vec<f64>, pulse_time: f64, omega_uw: f64) -> Result<Self> {
        let cfg = Self {
            delta_uw_grid,
            pulse_time,
            omega_uw,
            initial_state: SymIndex::ground(0),
            signal: SignalKind::TotalTransfer,
            readout: Readout::Final,
            threshold_fraction: 0.1,
            min_height: 1e-3,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_signal(mut self, signal: SignalKind) -> Self {
        self.signal = signal;
        self
    }

    pub fn with_readout(mut self, readout: Readout) -> Self {
        self.readout = readout;
        self
    }

    pub fn with_initial_state(mut self, idx: SymIndex) -> Self {
        self.initial_state = idx;
        self
    }

    pub fn with_threshold(mut self, fraction: f64, min_height: f64) -> Self {
        self.threshold_fraction = fraction;
        self.min_height = min_height;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta_uw_grid.len() < 3 {
            return Err(Error::Domain("scan grid needs at least 3 points".into()));
        }
        if self.delta_uw_grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("scan grid must be finite".into()));
        }
        if self.delta_uw_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("scan grid must be strictly increasing".into()));
        }
        if !(self.pulse_time > 0.0) || !self.pulse_time.is_finite() {
            return Err(Error::Domain("pulse_time must be positive".into()));
        }
        if !(self.omega_uw >= 0.0) || !self.omega_uw.is_finite() {
            return Err(Error::Domain("omega_uw must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold_fraction) || !(self.min_height >= 0.0) {
            return Err(Error::Domain("peak thresholds out of range".into()));
        }
        Ok(())
    }

    /// Signal channel labels: `None` for total transfer, `Some(m)` for the
    /// population of excitation number `m`.
    pub fn channels(&self, params: &ModelParams) -> Vec<Option<usize>> {
        match self.signal {
            SignalKind::TotalTransfer => vec![None],
            SignalKind::PerFlipPopulations => (0..=params.n_atoms()).map(Some).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub delta_uw: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub channels: Vec<Option<usize>>,
    pub samples: Vec<SpectrumSample>,
    pub peaks: PeakSet,
    /// Set when no channel rose above the detection threshold.
    pub no_peaks: bool,
}

/// Scans the probe detuning, evolving the initial state under the driven
/// Hamiltonian at every grid point, then extracts and assigns peaks.
pub fn simulate_scan(params: &ModelParams, scan: &ScanConfig) -> Result<Spectrum> {
    scan.validate()?;
    let start = index_of(scan.initial_state, params)?;
    let basis = enumerate_basis(params);
    let excitation: Vec<usize> = basis.iter().map(|i| i.excitation()).collect();
    let channels = scan.channels(params);
    let dim = params.dim();

    let samples: Vec<SpectrumSample> = scan
        .delta_uw_grid
        .par_iter()
        .map(|&delta_uw| -> Result<SpectrumSample> {
            let drive = DriveParams::new(scan.omega_uw, delta_uw)?;
            let eigen = build_driven(params, &drive).eigh()?;
            let mut psi0 = CVector::zeros(dim);
            psi0[start] = 1.0.into();
            let populations = match scan.readout {
                Readout::Final => linalg::propagate_with(&eigen, &psi0, scan.pulse_time)
                    .iter()
                    .map(|z| z.norm_sqr())
                    .collect(),
                Readout::TimeAveraged => averaged_populations(&eigen, &psi0, scan.pulse_time),
            };
            let values = match scan.signal {
                SignalKind::TotalTransfer => vec![1.0 - populations[start]],
                SignalKind::PerFlipPopulations => {
                    let mut per = vec![0.0; params.n_atoms() + 1];
                    for (p, &m) in populations.iter().zip(&excitation) {
                        per[m] += p;
                    }
                    per
                }
            };
            Ok(SpectrumSample {
                delta_uw,
                values: values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            })
        })
        .collect::<Result<_>>()?;

    let targets = analytic_targets(params, scan.initial_state)?;
    let grid = &scan.delta_uw_grid;
    let mut peaks = Vec::new();
    for (c, channel) in channels.iter().enumerate() {
        let initial_m = scan.initial_state.excitation();
        if *channel == Some(initial_m) {
            continue;
        }
        let candidates: Vec<&Target> = targets
            .iter()
            .filter(|t| channel.is_none_or(|m| t.n == m))
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let signal: Vec<f64> = samples.iter().map(|s| s.values[c]).collect();
        let found = find_peaks(grid, &signal, scan.threshold_fraction, scan.min_height);
        let mut assigned: Vec<Peak> = Vec::new();
        for raw in found {
            let target = candidates
                .iter()
                .min_by(|a, b| (a.position - raw.position).abs().total_cmp(&(b.position - raw.position).abs()))
                .expect("non-empty");
            let peak = Peak {
                position: raw.position,
                n: target.n,
                branch: target.branch,
                height: raw.height,
                width: raw.width,
            };
            // merged peaks: keep the higher local maximum
            match assigned.iter_mut().find(|p| p.n == peak.n && p.branch == peak.branch) {
                Some(existing) if existing.height >= peak.height => {}
                Some(existing) => *existing = peak,
                None => assigned.push(peak),
            }
        }
        peaks.extend(assigned);
    }
    peaks.sort_by(|a, b| a.n.cmp(&b.n).then(a.position.total_cmp(&b.position)));
    let no_peaks = peaks.is_empty();
    Ok(Spectrum {
        channels,
        samples,
        peaks: PeakSet { peaks },
        no_peaks,
    })
}

struct Target {
    n: usize,
    branch: Branch,
    position: f64,
}

/// Resonance positions reachable from a bare ground initial state.
fn analytic_targets(params: &ModelParams, initial: SymIndex) -> Result<Vec<Target>> {
    let m0 = initial.excitation();
    let lad = ladder(params)?;
    Ok(lad
        .blocks
        .iter()
        .filter(|b| b.n != m0)
        .flat_map(|b| {
            let photons = b.n as f64 - m0 as f64;
            b.levels.iter().map(move |l| Target {
                n: b.n,
                branch: l.branch,
                position: l.energy / photons,
            })
        })
        .collect())
}

/// Populations averaged over `[0, t]`.
fn averaged_populations(eigen: &linalg::Eigen, psi0: &CVector, t: f64) -> Vec<f64> {
    let c = eigen.vectors.adjoint() * psi0;
    let dim = psi0.len();
    let mut out = vec![0.0; dim];
    for j in 0..c.len() {
        for k in 0..c.len() {
            let omega = eigen.values[j] - eigen.values[k];
            let x = omega * t;
            // mean of exp(-i omega s) over s in [0, t]
            let mean = if x.abs() < 1e-8 {
                num_complex::Complex64::new(1.0, -x / 2.0)
            } else {
                num_complex::Complex64::new(x.sin() / x, (x.cos() - 1.0) / x)
            };
            let weight = c[j] * c[k].conj() * mean;
            if weight.norm() == 0.0 {
                continue;
            }
            for (s, o) in out.iter_mut().enumerate() {
                *o += (weight * eigen.vectors[(s, j)] * eigen.vectors[(s, k)].conj()).re;
            }
        }
    }
    out
}

struct RawPeak {
    position: f64,
    height: f64,
    width: f64,
}

/// Interior local maxima above `max(fraction * max, floor)`, refined by a
/// three-point parabola.
fn find_peaks(x: &[f64], y: &[f64], fraction: f64, floor: f64) -> Vec<RawPeak> {
    let top = y.iter().copied().fold(0.0f64, f64::max);
    if top < floor || top <= 0.0 {
        return vec![];
    }
    let threshold = (fraction * top).max(floor);
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < y.len() {
        if y[i] >= threshold && y[i] > y[i - 1] && y[i] >= y[i + 1] {
            // walk across a flat top
            let mut j = i;
            while j + 1 < y.len() && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < y.len() {
                let c = (i + j) / 2;
                let (position, height) = if i == j {
                    parabola_vertex(x[i - 1], x[i], x[i + 1], y[i - 1], y[i], y[i + 1])
                } else {
                    (0.5 * (x[i] + x[j]), y[c])
                };
                out.push(RawPeak {
                    position,
                    height,
                    width: fwhm(x, y, c, height),
                });
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

fn parabola_vertex(x0: f64, x1: f64, x2: f64, y0: f64, y1: f64, y2: f64) -> (f64, f64) {
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curvature = (d12 - d01) / (x2 - x0);
    if curvature >= 0.0 {
        return (x1, y1);
    }
    // y = y1 + b (x - x1) + curvature (x - x1)^2 with b from the divided differences
    let b = d01 + curvature * (x1 - x0);
    let shift = (-b / (2.0 * curvature)).clamp(x0 - x1, x2 - x1);
    (x1 + shift, y1 + b * shift + curvature * shift * shift)
}

fn fwhm(x: &[f64], y: &[f64], centre: usize, height: f64) -> f64 {
    let half = height / 2.0;
    let mut left = x[0];
    for i in (0..centre).rev() {
        if y[i] < half {
            left = x[i] + (half - y[i]) * (x[i + 1] - x[i]) / (y[i + 1] - y[i]);
            break;
        }
    }
    let mut right = x[x.len() - 1];
    for i in centre + 1..y.len() {
        if y[i] < half {
            right = x[i - 1] + (y[i - 1] - half) * (x[i] - x[i - 1]) / (y[i - 1] - y[i]);
            break;
        }
    }
    right - left
}

/// One row of a splitting-versus-Rabi-frequency table (raw level splittings).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplittingRow {
    pub omega_r: f64,
    pub single_atom: f64,
    pub two_atom: f64,
}

/// Resonant splittings of the `n = 1` and `n = 2` blocks over a Rabi
/// frequency grid. Requires `delta_r = 0` and `N >= 2`.
pub fn splitting_vs_rabi(template: &ModelParams, omega_r_grid: &[f64]) -> Result<Vec<SplittingRow>> {
    if template.n_atoms() < 2 {
        return Err(Error::Domain("two-atom splitting needs N >= 2".into()));
    }
    omega_r_grid
        .iter()
        .map(|&omega| {
            if template.delta_r() != 0.0 && template.delta_r().abs() >= 1e-9 * omega {
                return Err(Error::Domain(format!(
                    "splitting table needs resonant driving, got delta_r = {}",
                    template.delta_r()
                )));
            }
            let lad = ladder(&template.clone().with_omega_r(omega)?)?;
            let split = |n: usize| lad.block(n).map(|b| b.splitting).unwrap_or(0.0);
            Ok(SplittingRow {
                omega_r: omega,
                single_atom: split(1),
                two_atom: split(2),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Curves are per-flip positions `delta_{n,k}` versus `delta_r`.
    DeltaR,
    /// Curves are block splittings versus `omega_r`.
    OmegaR,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandCurve {
    pub n: usize,
    /// `None` for splitting curves.
    pub branch: Option<Branch>,
    pub nominal: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftBand {
    pub sweep: Sweep,
    pub drift_fraction: f64,
    pub sample_count: usize,
    pub curves: Vec<BandCurve>,
}

/// Multiplicative drift factors `(delta_r, omega_r)` for sample `index`.
///
/// Each sample owns a ChaCha stream keyed by its index, so the draws do not
/// depend on evaluation order.
pub fn drift_factors(seed: u64, index: usize, fraction: f64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let a: f64 = rng.random();
    let b: f64 = rng.random();
    (1.0 + fraction * (2.0 * a - 1.0), 1.0 + fraction * (2.0 * b - 1.0))
}

/// Envelopes of the branch curves under uniform systematic drifts of
/// `delta_r` and `omega_r` within `[1 - f, 1 + f]`. The same drawn drift is
/// applied at every sweep point; the nominal curve is always part of the
/// envelope.
pub fn drift_bands(
    params: &ModelParams,
    sweep: &Sweep,
    drift_fraction: f64,
    sample_count: usize,
    seed: u64,
) -> Result<DriftBand> {
    if !(drift_fraction >= 0.0) || !drift_fraction.is_finite() {
        return Err(Error::Domain("drift_fraction must be finite and >= 0".into()));
    }
    if sample_count < 2 {
        return Err(Error::Domain("sample_count must be at least 2".into()));
    }
    if sweep.grid.is_empty() {
        return Err(Error::Domain("sweep grid is empty".into()));
    }
    let factors: Vec<(f64, f64)> = (0..sample_count).map(|s| drift_factors(seed, s, drift_fraction)).collect();

    let model_at = |x: f64, fd: f64, fo: f64| -> Result<ModelParams> {
        match sweep.axis {
            SweepAxis::DeltaR => params.clone().with_delta_r(x * fd)?.with_omega_r(params.omega_r() * fo),
            SweepAxis::OmegaR => params.clone().with_delta_r(params.delta_r() * fd)?.with_omega_r(x * fo),
        }
    };
    let curve_values = |model: &ModelParams| -> Result<Vec<(usize, Option<Branch>, f64)>> {
        let lad = ladder(model)?;
        let mut out = Vec::new();
        for block in &lad.blocks {
            match sweep.axis {
                SweepAxis::DeltaR => {
                    for level in block.levels.iter().rev() {
                        out.push((block.n, Some(level.branch), level.energy / block.n as f64));
                    }
                }
                SweepAxis::OmegaR => out.push((block.n, None, block.splitting)),
            }
        }
        // level order flips with the sign of delta_r; curves need a fixed order
        out.sort_by_key(|(n, b, _)| (*n, b.map(branch_rank)));
        Ok(out)
    };

    let columns: Vec<Vec<(usize, Option<Branch>, f64, f64, f64)>> = sweep
        .grid
        .par_iter()
        .map(|&x| -> Result<_> {
            let nominal = curve_values(&model_at(x, 1.0, 1.0)?)?;
            let mut lower: Vec<f64> = nominal.iter().map(|v| v.2).collect();
            let mut upper = lower.clone();
            for &(fd, fo) in &factors {
                let drifted = curve_values(&model_at(x, fd, fo)?)?;
                for (i, (n, b, _)) in nominal.iter().enumerate() {
                    let v = drifted
                        .iter()
                        .find(|d| d.0 == *n && d.1 == *b)
                        .map(|d| d.2)
                        .ok_or_else(|| Error::Domain("branch missing under drift".into()))?;
                    lower[i] = lower[i].min(v);
                    upper[i] = upper[i].max(v);
                }
            }
            Ok(nominal
                .into_iter()
                .zip(lower.into_iter().zip(upper))
                .map(|((n, b, v), (lo, hi))| (n, b, v, lo, hi))
                .collect())
        })
        .collect::<Result<_>>()?;

    let curves = (0..columns[0].len())
        .map(|c| BandCurve {
            n: columns[0][c].0,
            branch: columns[0][c].1,
            nominal: columns.iter().map(|col| col[c].2).collect(),
            lower: columns.iter().map(|col| col[c].3).collect(),
            upper: columns.iter().map(|col| col[c].4).collect(),
        })
        .collect();
    Ok(DriftBand {
        sweep: sweep.clone(),
        drift_fraction,
        sample_count,
        curves,
    })
}

fn branch_rank(b: Branch) -> usize {
    match b {
        Branch::Plus => 0,
        Branch::Minus => 1,
        Branch::Sorted(k) => k,
    }
}

/// A local minimum of the gap between adjacent dressed levels of one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapMinimum {
    pub delta_r: f64,
    pub gap: f64,
    /// Rank (ascending) of the lower level of the pair.
    pub lower_rank: usize,
}

fn block_levels(params: &ModelParams, n: usize, delta_r: f64) -> Result<Vec<f64>> {
    let lad = ladder(&params.clone().with_delta_r(delta_r)?)?;
    let block = lad
        .block(n)
        .ok_or_else(|| Error::Domain(format!("no excitation block n = {n}")))?;
    Ok(block.levels.iter().map(|l| l.energy).collect())
}

/// Avoided crossings of block `n` along a `delta_r` grid, each refined by
/// golden-section search between its neighbouring grid points.
pub fn gap_minima(params: &ModelParams, n: usize, delta_grid: &[f64]) -> Result<Vec<GapMinimum>> {
    if delta_grid.len() < 3 {
        return Err(Error::Domain("gap search needs at least 3 grid points".into()));
    }
    let levels: Vec<Vec<f64>> = delta_grid
        .par_iter()
        .map(|&d| block_levels(params, n, d))
        .collect::<Result<_>>()?;
    let pairs = levels[0].len().saturating_sub(1);
    let mut out = Vec::new();
    for r in 0..pairs {
        let gap: Vec<f64> = levels.iter().map(|l| l[r + 1] - l[r]).collect();
        for i in 1..gap.len() - 1 {
            if gap[i] < gap[i - 1] && gap[i] <= gap[i + 1] {
                let f = |d: f64| block_levels(params, n, d).map(|l| l[r + 1] - l[r]);
                let (delta_r, value) = golden_min(f, delta_grid[i - 1], delta_grid[i + 1])?;
                out.push(GapMinimum {
                    delta_r,
                    gap: value,
                    lower_rank: r,
                });
            }
        }
    }
    out.sort_by(|a, b| a.delta_r.total_cmp(&b.delta_r));
    Ok(out)
}

fn golden_min(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > 1e-10 * (1.0 + a.abs().max(b.abs())) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

/// Laser detuning at which the bare level of `channel` (>= 1) crosses the
/// ground-like level of block `n` dressed by the reference channel alone.
///
/// This is the light-shifted resonance of the extra channel; it differs from
/// the bare condition `delta_r = -detuning_offset` by the reference-channel
/// light shift of `|g,n>`.
pub fn channel_resonance(params: &ModelParams, channel: usize, n: usize) -> Result<f64> {
    if channel == 0 || channel >= params.n_channels() {
        return Err(Error::Domain(format!("channel {channel} is not an additional channel")));
    }
    if n == 0 || n > params.n_atoms() {
        return Err(Error::Domain(format!("n = {n} outside 1..={}", params.n_atoms())));
    }
    let offset = params.channels()[channel].detuning_offset;
    let omega = params.omega_r();
    // increasing in delta (slope >= 1/2), root within the light-shift bound
    let f = |d: f64| analytic_energies(omega, d, n).0 + d + offset;
    let reach = (n as f64).sqrt() * omega / 2.0 + 1e-12;
    let (mut lo, mut hi) = (-offset - reach, -offset + reach);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbasis::RydbergChannel;
    use approx::assert_relative_eq;

    fn p(n: usize, omega: f64, delta: f64) -> ModelParams {
        ModelParams::new(n, omega, delta, 0.0).unwrap()
    }

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn resonant_positions() {
        let peaks = peak_positions(&p(2, 1.0, 0.0)).unwrap();
        assert_relative_eq!(peaks.find(1, Branch::Plus).unwrap().position, 0.5, epsilon = 1e-14);
        assert_relative_eq!(peaks.find(1, Branch::Minus).unwrap().position, -0.5, epsilon = 1e-14);
        assert_relative_eq!(peaks.find(2, Branch::Plus).unwrap().position, 0.35355, epsilon = 1e-5);
        assert_relative_eq!(peaks.find(2, Branch::Minus).unwrap().position, -(2f64.sqrt()) / 4.0, epsilon = 1e-14);
    }

    #[test]
    fn detuned_positions() {
        let peaks = peak_positions(&p(2, 1.0, 1.0)).unwrap();
        assert_relative_eq!(peaks.find(2, Branch::Plus).unwrap().position, 0.18301, epsilon = 1e-5);
        assert_relative_eq!(peaks.find(1, Branch::Plus).unwrap().position, 0.20711, epsilon = 1e-5);
        let (a, b) = analytic_peak(1.0, 1.0, 2);
        assert_relative_eq!(peaks.find(2, Branch::Plus).unwrap().position, a, epsilon = 1e-13);
        assert_relative_eq!(peaks.find(2, Branch::Minus).unwrap().position, b, epsilon = 1e-13);
    }

    #[test]
    fn uncoupled_lines() {
        let delta = 0.8;
        let params = p(3, 0.0, delta);
        let peaks = peak_positions(&params).unwrap();
        let reference = noninteracting_lines(&params).unwrap();
        for peak in &peaks.peaks {
            let expected = match peak.branch {
                Branch::Plus => 0.0,
                _ => -delta / peak.n as f64,
            };
            assert_relative_eq!(peak.position, expected, epsilon = 1e-14);
            if peak.n == 1 {
                let r = reference.iter().find(|r| r.0 == peak.branch).unwrap();
                assert_eq!(r.1, peak.position);
            }
        }
    }

    #[test]
    fn per_flip_sign_property() {
        for delta in [-2.0, -0.3, 0.3, 2.0] {
            let peaks = peak_positions(&p(3, 1.0, delta)).unwrap();
            for pk in &peaks.peaks {
                let s = if pk.branch == Branch::Plus { 1.0 } else { -1.0 };
                assert!(pk.position * delta * s > 0.0);
            }
        }
    }

    #[test]
    fn far_detuned_coalescence() {
        let mut last = f64::INFINITY;
        for delta in [10.0, 20.0, 40.0, 80.0] {
            let peaks = peak_positions(&p(2, 1.0, delta)).unwrap();
            let diff = (peaks.find(2, Branch::Plus).unwrap().position - peaks.find(1, Branch::Plus).unwrap().position).abs();
            let (kp, _) = crate::ladder::kappa_closed_form(1.0, delta);
            // diagonalized levels are ~1e-3; their difference loses ~1e-13 absolute
            assert_relative_eq!(diff, kp.abs() / 2.0, max_relative = 1e-5);
            assert!(diff < last / 7.0);
            last = diff;
        }
    }

    #[test]
    fn splitting_table() {
        let rows = splitting_vs_rabi(&p(2, 1.0, 0.0), &[0.0, 1.0, 2.0, 2.5, 3.0, 4.0]).unwrap();
        assert_eq!(rows[0].single_atom, 0.0);
        assert_eq!(rows[0].two_atom, 0.0);
        for r in &rows[1..] {
            assert_relative_eq!(r.two_atom, 2f64.sqrt() * r.single_atom, max_relative = 1e-14);
        }
        assert_relative_eq!(rows[3].single_atom, 2.5, epsilon = 1e-14);
        assert_relative_eq!(rows[3].two_atom, 3.53553, epsilon = 1e-5);
        assert!(splitting_vs_rabi(&p(2, 1.0, 0.1), &[1.0]).is_err());
        assert!(splitting_vs_rabi(&p(1, 1.0, 0.0), &[1.0]).is_err());
    }

    #[test]
    fn drift_zero_collapses_band() {
        let sweep = Sweep {
            axis: SweepAxis::DeltaR,
            grid: linspace(-3.0, 3.0, 13),
        };
        let band = drift_bands(&p(2, 1.0, 0.0), &sweep, 0.0, 10, 7).unwrap();
        for c in &band.curves {
            assert_eq!(c.lower, c.nominal);
            assert_eq!(c.upper, c.nominal);
        }
    }

    #[test]
    fn band_curves_keep_their_branch_across_zero_detuning() {
        let sweep = Sweep {
            axis: SweepAxis::DeltaR,
            grid: linspace(-2.0, 2.0, 9),
        };
        let params = p(2, 1.0, 0.0);
        let band = drift_bands(&params, &sweep, 0.0, 4, 1).unwrap();
        for c in &band.curves {
            for (i, &d) in sweep.grid.iter().enumerate() {
                let at = params.clone().with_delta_r(d).unwrap();
                let expected = peak_positions(&at).unwrap().find(c.n, c.branch.unwrap()).unwrap().position;
                assert_eq!(c.nominal[i], expected);
            }
        }
    }

    #[test]
    fn drift_band_half_width_resonant() {
        let sweep = Sweep {
            axis: SweepAxis::OmegaR,
            grid: vec![1.0, 2.0, 3.0, 4.0],
        };
        let band = drift_bands(&p(2, 1.0, 0.0), &sweep, 0.05, 400, 11).unwrap();
        let two = band.curves.iter().find(|c| c.n == 2).unwrap();
        for (i, &omega) in sweep.grid.iter().enumerate() {
            let half = 0.5 * (two.upper[i] - two.lower[i]);
            let expected = 0.05 * 2f64.sqrt() * omega;
            assert!((half / expected - 1.0).abs() < 0.02, "{half} vs {expected}");
            assert!(two.lower[i] <= two.nominal[i] && two.nominal[i] <= two.upper[i]);
        }
    }

    #[test]
    fn drift_band_deterministic_and_enveloping() {
        let sweep = Sweep {
            axis: SweepAxis::DeltaR,
            grid: linspace(-4.0, 4.0, 17),
        };
        let params = p(2, 1.0, 0.0).add_channel(RydbergChannel::zeeman_companion(2.13)).unwrap();
        let a = drift_bands(&params, &sweep, 0.05, 400, 3).unwrap();
        let b = drift_bands(&params, &sweep, 0.05, 400, 3).unwrap();
        assert_eq!(a, b);
        for c in &a.curves {
            for i in 0..sweep.grid.len() {
                assert!(c.lower[i] <= c.nominal[i] && c.nominal[i] <= c.upper[i]);
            }
        }
        let other = drift_bands(&params, &sweep, 0.05, 400, 4).unwrap();
        assert_ne!(a, other);
        assert!(drift_bands(&params, &sweep, 0.05, 1, 3).is_err());
        assert!(drift_bands(&params, &sweep, -0.1, 10, 3).is_err());
    }

    #[test]
    fn drift_factors_in_range() {
        for s in 0..1000 {
            let (a, b) = drift_factors(9, s, 0.05);
            assert!((0.95..=1.05).contains(&a) && (0.95..=1.05).contains(&b));
        }
        assert_eq!(drift_factors(9, 5, 0.05), drift_factors(9, 5, 0.05));
    }

    #[test]
    fn single_atom_scan_finds_both_lines() {
        let params = p(1, 1.0, 0.0);
        let omega_uw = 0.05;
        let grid = linspace(-1.0, 1.0, 401);
        let scan = ScanConfig::new(grid, std::f64::consts::PI / (omega_uw / 2f64.sqrt()), omega_uw).unwrap();
        let spectrum = simulate_scan(&params, &scan).unwrap();
        assert!(!spectrum.no_peaks);
        for branch in [Branch::Plus, Branch::Minus] {
            let found = spectrum.peaks.find(1, branch).expect("line present");
            let expected = peak_positions(&params).unwrap().find(1, branch).unwrap().position;
            assert!((found.position - expected).abs() <= 0.02, "{branch}: {}", found.position);
        }
        for s in &spectrum.samples {
            assert!(s.values.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn no_probe_no_signal() {
        let params = p(2, 1.0, 0.0);
        let scan = ScanConfig::new(linspace(-1.0, 1.0, 41), 100.0, 0.0)
            .unwrap()
            .with_signal(SignalKind::PerFlipPopulations);
        let spectrum = simulate_scan(&params, &scan).unwrap();
        assert!(spectrum.no_peaks);
        assert!(spectrum.peaks.is_empty());
        for s in &spectrum.samples {
            assert!(s.values[0] > 1.0 - 1e-12);
            assert!(s.values[1..].iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn two_atom_lines_resolved_per_flip() {
        let params = p(2, 1.0, 0.0);
        let omega_uw = 0.05;
        let scan = ScanConfig::new(linspace(-0.8, 0.8, 1601), 2000.0, omega_uw)
            .unwrap()
            .with_signal(SignalKind::PerFlipPopulations)
            .with_readout(Readout::TimeAveraged);
        let spectrum = simulate_scan(&params, &scan).unwrap();
        let analytic = peak_positions(&params).unwrap();
        for n in 1..=2 {
            for branch in [Branch::Plus, Branch::Minus] {
                let found = spectrum.peaks.find(n, branch).unwrap_or_else(|| panic!("n={n} {branch} missing"));
                let expected = analytic.find(n, branch).unwrap().position;
                assert!((found.position - expected).abs() <= 0.02, "n={n} {branch}: {} vs {expected}", found.position);
            }
        }
    }

    #[test]
    fn scan_is_deterministic() {
        let params = p(2, 1.0, 0.5);
        let scan = ScanConfig::new(linspace(-1.0, 1.0, 201), 300.0, 0.05)
            .unwrap()
            .with_signal(SignalKind::PerFlipPopulations)
            .with_readout(Readout::TimeAveraged);
        assert_eq!(simulate_scan(&params, &scan).unwrap(), simulate_scan(&params, &scan).unwrap());
    }

    #[test]
    fn scan_config_validation() {
        assert!(ScanConfig::new(vec![0.0, 0.0, 1.0], 1.0, 0.1).is_err());
        assert!(ScanConfig::new(vec![0.0, 0.5, 1.0], 0.0, 0.1).is_err());
        assert!(ScanConfig::new(vec![0.0, 1.0], 1.0, 0.1).is_err());
    }

    #[test]
    fn peak_finder_refines_parabola() {
        let x = linspace(-1.0, 1.0, 21);
        let y: Vec<f64> = x.iter().map(|v| 1.0 - (v - 0.033f64).powi(2)).collect();
        let peaks = find_peaks(&x, &y, 0.1, 1e-3);
        assert_eq!(peaks.len(), 1);
        assert_relative_eq!(peaks[0].position, 0.033, epsilon = 1e-12);
    }

    #[test]
    fn zeeman_extra_avoided_crossing() {
        for offset in [2.13, -2.13] {
            let params = p(2, 1.0, 0.0).add_channel(RydbergChannel::zeeman_companion(offset)).unwrap();
            for n in 1..=2 {
                let minima = gap_minima(&params, n, &linspace(-6.0, 6.0, 241)).unwrap();
                assert_eq!(minima.len(), 2, "{minima:?}");
                let resonance = channel_resonance(&params, 1, n).unwrap();
                let extra = minima
                    .iter()
                    .min_by(|a, b| (a.delta_r - resonance).abs().total_cmp(&(b.delta_r - resonance).abs()))
                    .unwrap();
                assert!((extra.delta_r - resonance).abs() < 0.1, "n={n}: {} vs {resonance}", extra.delta_r);
                assert!((resonance + offset).abs() < 0.3);
            }
        }
    }
}
