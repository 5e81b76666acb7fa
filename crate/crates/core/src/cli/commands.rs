//! Subcommand implementations. Each command first turns the configuration
//! into model inputs (failures are configuration errors) and then computes
//! (failures are numerical errors).

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;

use super::config::{
    Fault, InitialState, ReadoutChoice, RunConfig, SignalChoice, StateKind, VerifySection, Weighting,
};
use super::emit::{Cell, Table};
use super::CliError;
use crate::analysis::{fit_linear, fit_linear_weighted, relative_weights, slope_ratio, LinearFit};
use crate::dynamics::{default_step, evolve_ramp_sampled, RampProtocol, RampSegment};
use crate::hamiltonians::{build_symmetric, build_symmetric_with, CouplingLaw};
use crate::ladder::{ladder, Branch};
use crate::oracle::{random_draws, verify_against, Blockade, ProductParams, PROJECTION_TOLERANCE};
use crate::spectroscopy::{
    drift_bands, noninteracting_lines, peak_positions, simulate_scan, splitting_vs_rabi, Readout, ScanConfig,
    SignalKind, Sweep, SweepAxis,
};
use crate::symbasis::{ModelParams, RydbergChannel, SymIndex, SymState};

/// A rendered table plus whether the command's own checks passed.
pub struct Outcome {
    pub table: Table,
    pub passed: bool,
}

impl From<Table> for Outcome {
    fn from(table: Table) -> Self {
        Self { table, passed: true }
    }
}

fn config_err(e: crate::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn numeric_err(e: crate::Error) -> CliError {
    CliError::Numeric(e.to_string())
}

fn mhz(angular: f64) -> f64 {
    angular / TAU
}

fn angular(mhz: f64) -> f64 {
    mhz * TAU
}

fn missing(section: &str) -> CliError {
    CliError::Config(format!("missing [{section}] section"))
}

pub fn model_params(cfg: &RunConfig) -> Result<ModelParams, CliError> {
    let m = &cfg.model;
    super::config::finite("model", &[m.omega_r_mhz, m.delta_r_mhz, m.omega_hf_mhz])?;
    let mut channels = vec![RydbergChannel::REFERENCE];
    for c in &m.extra_channels {
        super::config::finite("model.extra_channels", &[c.rabi_scale, c.detuning_offset_mhz])?;
        channels.push(RydbergChannel::new(c.rabi_scale, angular(c.detuning_offset_mhz)));
    }
    ModelParams::with_channels(
        m.n_atoms,
        angular(m.omega_r_mhz),
        angular(m.delta_r_mhz),
        angular(m.omega_hf_mhz),
        channels,
    )
    .map_err(config_err)
}

pub fn parse_branch(text: &str) -> Result<Branch, CliError> {
    match text {
        "plus" => Ok(Branch::Plus),
        "minus" => Ok(Branch::Minus),
        _ => text
            .strip_prefix('b')
            .and_then(|k| k.parse().ok())
            .map(Branch::Sorted)
            .ok_or_else(|| CliError::Config(format!("unknown branch `{text}` (plus, minus or b<k>)"))),
    }
}

pub fn ladder_table(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let params = model_params(cfg)?;
    let lad = ladder(&params).map_err(numeric_err)?;
    let k = params.n_channels();
    // K = 1: the labelled branches; K >= 2: highest and lowest sorted branches
    let (top, bottom) = if k == 1 {
        (Branch::Plus, Branch::Minus)
    } else {
        (Branch::Sorted(0), Branch::Sorted(k))
    };
    let mut table = Table::new(&[
        "n",
        "branch",
        "epsilon",
        "splitting",
        "kappa_plus",
        "kappa_minus",
        "kappa_branch",
    ]);
    for block in &lad.blocks {
        for level in block.levels.iter().rev() {
            table.push(vec![
                block.n.into(),
                level.branch.to_string().into(),
                mhz(level.energy).into(),
                mhz(block.splitting).into(),
                lad.kappa(top).map(mhz).into(),
                lad.kappa(bottom).map(mhz).into(),
                lad.kappa(level.branch).map(mhz).into(),
            ]);
        }
    }
    table.summarize("n_atoms", params.n_atoms());
    table.summarize("channels", k);
    Ok(table.into())
}

pub fn peaks_table(cfg: &RunConfig, seed: u64) -> Result<Outcome, CliError> {
    let params = model_params(cfg)?;
    let section = cfg.peaks.as_ref().ok_or_else(|| missing("peaks"))?;
    let grid = section.delta_over_omega.values("peaks.delta_over_omega")?;
    let omega = params.omega_r();
    if !(omega > 0.0) {
        return Err(CliError::Config("peaks sweep is normalized by omega_r, which must be > 0".into()));
    }
    if let Some(d) = &cfg.drift {
        if !(d.fraction >= 0.0 && d.fraction < 1.0) || d.samples < 2 {
            return Err(CliError::Config("drift: need 0 <= fraction < 1 and samples >= 2".into()));
        }
    }
    let band = match &cfg.drift {
        Some(d) => {
            let sweep = Sweep {
                axis: SweepAxis::DeltaR,
                grid: grid.iter().map(|x| x * omega).collect(),
            };
            Some(drift_bands(&params, &sweep, d.fraction, d.samples, seed).map_err(numeric_err)?)
        }
        None => None,
    };

    let mut table = Table::new(&[
        "delta_over_omega",
        "n",
        "branch",
        "delta_uw_over_omega",
        "band_low",
        "band_high",
        "noninteracting_reference",
    ]);
    for (i, &x) in grid.iter().enumerate() {
        let at = params.clone().with_delta_r(x * omega).map_err(config_err)?;
        let peaks = peak_positions(&at).map_err(numeric_err)?;
        let reference = noninteracting_lines(&at).map_err(numeric_err)?;
        for peak in &peaks.peaks {
            let (low, high) = match &band {
                Some(b) => {
                    let curve = b
                        .curves
                        .iter()
                        .find(|c| c.n == peak.n && c.branch == Some(peak.branch))
                        .ok_or_else(|| CliError::Numeric("drift band lost a branch".into()))?;
                    (Cell::Float(curve.lower[i] / omega), Cell::Float(curve.upper[i] / omega))
                }
                None => (Cell::Empty, Cell::Empty),
            };
            let single = reference.iter().find(|r| r.0 == peak.branch).map(|r| r.1 / omega);
            table.push(vec![
                x.into(),
                peak.n.into(),
                peak.branch.to_string().into(),
                (peak.position / omega).into(),
                low,
                high,
                single.into(),
            ]);
        }
    }
    if let Some(d) = &cfg.drift {
        table.summarize("drift_fraction", d.fraction);
        table.summarize("drift_samples", d.samples);
        table.summarize("seed", seed);
    }
    Ok(table.into())
}

pub fn scan_table(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let params = model_params(cfg)?;
    let s = cfg.scan.as_ref().ok_or_else(|| missing("scan"))?;
    super::config::finite("scan", &[s.pulse_time_us, s.omega_uw_mhz])?;
    let grid: Vec<f64> = s.delta_uw_mhz.values("scan.delta_uw_mhz")?.into_iter().map(angular).collect();
    let mut scan = ScanConfig::new(grid, s.pulse_time_us, angular(s.omega_uw_mhz))
        .map_err(config_err)?
        .with_signal(match s.signal {
            SignalChoice::TotalTransfer => SignalKind::TotalTransfer,
            SignalChoice::PerFlip => SignalKind::PerFlipPopulations,
        })
        .with_readout(match s.readout {
            ReadoutChoice::Final => Readout::Final,
            ReadoutChoice::TimeAveraged => Readout::TimeAveraged,
        })
        .with_initial_state(SymIndex::ground(s.initial_n));
    if s.threshold_fraction.is_some() || s.min_height.is_some() {
        let fraction = s.threshold_fraction.unwrap_or(scan.threshold_fraction);
        let floor = s.min_height.unwrap_or(scan.min_height);
        scan = scan.with_threshold(fraction, floor);
    }
    scan.validate().map_err(config_err)?;
    if s.initial_n > params.n_atoms() {
        return Err(CliError::Config(format!("scan.initial_n = {} exceeds n_atoms", s.initial_n)));
    }

    let spectrum = simulate_scan(&params, &scan).map_err(numeric_err)?;
    let mut columns = vec!["delta_uw_mhz".to_string()];
    columns.extend(spectrum.channels.iter().map(|c| match c {
        None => "transfer".to_string(),
        Some(m) => format!("p{m}"),
    }));
    let mut table = Table {
        columns,
        ..Table::default()
    };
    for sample in &spectrum.samples {
        let mut row = vec![Cell::Float(mhz(sample.delta_uw))];
        row.extend(sample.values.iter().map(|&v| Cell::Float(v)));
        table.push(row);
    }
    let peaks: Vec<_> = spectrum
        .peaks
        .peaks
        .iter()
        .map(|p| {
            json!({
                "n": p.n,
                "branch": p.branch.to_string(),
                "position_mhz": mhz(p.position),
                "height": p.height,
                "width_mhz": mhz(p.width),
            })
        })
        .collect();
    table.summarize("peaks", peaks);
    table.summarize("no_peaks", spectrum.no_peaks);
    Ok(table.into())
}

fn initial_state(params: &ModelParams, init: &InitialState) -> Result<SymState, CliError> {
    match init.state {
        StateKind::Ground => SymState::basis(params, SymIndex::ground(init.n)).map_err(config_err),
        StateKind::Excited => SymState::basis(params, SymIndex::excited(init.channel, init.n)).map_err(config_err),
        StateKind::Dressed => {
            let branch = parse_branch(
                init.branch
                    .as_deref()
                    .ok_or_else(|| CliError::Config("ramp.initial: dressed state needs `branch`".into()))?,
            )?;
            let lad = ladder(params).map_err(numeric_err)?;
            let level = lad
                .block(init.n)
                .and_then(|b| b.level(branch))
                .ok_or_else(|| CliError::Config(format!("no dressed level n = {}, branch {branch}", init.n)))?;
            Ok(SymState::from_amplitudes(level.vector.clone()))
        }
    }
}

pub fn ramp_table(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let base = model_params(cfg)?;
    let r = cfg.ramp.as_ref().ok_or_else(|| missing("ramp"))?;
    let segments = r
        .segments
        .iter()
        .map(|s| {
            RampSegment::new(
                s.duration_us,
                (angular(s.delta_r_mhz[0]), angular(s.delta_r_mhz[1])),
                (angular(s.omega_r_mhz[0]), angular(s.omega_r_mhz[1])),
                (angular(s.omega_uw_mhz[0]), angular(s.omega_uw_mhz[1])),
            )
        })
        .collect();
    let protocol = RampProtocol::new(segments, angular(r.delta_uw_mhz)).map_err(config_err)?;
    // the initial state is prepared at the protocol's starting parameters
    let (start, _) = protocol.params_at(&base, 0.0).map_err(config_err)?;
    let psi0 = initial_state(&start, &r.initial)?;
    let step = match r.step_us {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(CliError::Config(format!("ramp.step_us must be positive, got {h}"))),
        None => default_step(&protocol, &base).map_err(numeric_err)?,
    };
    if r.samples < 2 {
        return Err(CliError::Config("ramp.samples must be at least 2".into()));
    }
    let report = evolve_ramp_sampled(&protocol, &base, &psi0, step, r.samples).map_err(numeric_err)?;

    let mut table = Table::new(&["time_us", "fidelity", "energy_mhz"]);
    for s in &report.fidelity_trace {
        table.push(vec![s.time.into(), s.fidelity.into(), mhz(s.energy).into()]);
    }
    let dominant = report.final_state.dominant(&base);
    let populations = report.final_state.populations();
    let dominant_index = crate::symbasis::index_of(dominant, &base).map_err(numeric_err)?;
    table.summarize("final_fidelity", report.final_fidelity);
    table.summarize("min_gap_mhz", mhz(report.min_gap));
    table.summarize("norm_drift", report.norm_drift);
    table.summarize("steps", report.steps);
    table.summarize("step_us", report.step);
    table.summarize("final_dominant", dominant.to_string());
    table.summarize("final_dominant_population", populations[dominant_index]);
    Ok(table.into())
}

fn fit_with(points: &[(f64, f64)], origin: bool, weighting: Weighting) -> crate::Result<LinearFit> {
    match weighting {
        Weighting::Uniform => fit_linear(points, origin),
        Weighting::Relative => fit_linear_weighted(points, &relative_weights(points)?, origin),
    }
}

pub fn fit_table(cfg: &RunConfig, seed: u64) -> Result<Outcome, CliError> {
    let params = model_params(cfg)?;
    let f = cfg.fit.as_ref().ok_or_else(|| missing("fit"))?;
    let grid: Vec<f64> = f.omega_r_mhz.values("fit.omega_r_mhz")?.into_iter().map(angular).collect();
    if params.delta_r() != 0.0 {
        return Err(CliError::Config("fit needs delta_r_mhz = 0 (resonant splittings)".into()));
    }
    if params.n_atoms() < 2 {
        return Err(CliError::Config("fit needs n_atoms >= 2".into()));
    }
    if !(f.noise_fraction >= 0.0) || !f.noise_fraction.is_finite() {
        return Err(CliError::Config("fit.noise_fraction must be finite and >= 0".into()));
    }
    if grid.iter().any(|&w| w < 0.0) {
        return Err(CliError::Config("fit.omega_r_mhz must be non-negative".into()));
    }
    let rows = splitting_vs_rabi(&params, &grid).map_err(numeric_err)?;
    let normal = Normal::new(0.0, f.noise_fraction).map_err(|e| CliError::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut single = Vec::new();
    let mut two = Vec::new();
    let mut table = Table::new(&["omega_r_mhz", "single_atom_mhz", "two_atom_mhz"]);
    for row in &rows {
        let (mut a, mut b) = (row.single_atom, row.two_atom);
        if f.noise_fraction > 0.0 {
            a *= 1.0 + normal.sample(&mut rng);
            b *= 1.0 + normal.sample(&mut rng);
        }
        let x = mhz(row.omega_r);
        single.push((x, mhz(a)));
        two.push((x, mhz(b)));
        table.push(vec![x.into(), mhz(a).into(), mhz(b).into()]);
    }
    let fit1 = fit_with(&single, f.constrain_origin, f.weighting).map_err(numeric_err)?;
    let fit2 = fit_with(&two, f.constrain_origin, f.weighting).map_err(numeric_err)?;
    let ratio = slope_ratio(&fit2, &fit1).map_err(numeric_err)?;
    table.summarize("slope_single", fit1.slope);
    table.summarize("slope_two", fit2.slope);
    if let Some(e) = fit1.slope_std_err {
        table.summarize("slope_single_std_err", e);
    }
    if let Some(e) = fit2.slope_std_err {
        table.summarize("slope_two_std_err", e);
    }
    table.summarize("ratio", ratio.ratio);
    if let Some(e) = ratio.std_err {
        table.summarize("ratio_std_err", e);
    }
    table.summarize("constrain_origin", f.constrain_origin);
    table.summarize("noise_fraction", f.noise_fraction);
    if f.noise_fraction > 0.0 {
        table.summarize("seed", seed);
    }
    Ok(table.into())
}

fn blockade_of(v: &VerifySection) -> Result<Blockade, CliError> {
    match (v.blockade.as_deref(), v.blockade_mhz) {
        (Some("infinite"), None) => Ok(Blockade::Infinite),
        (None, Some(b)) if b.is_finite() && b > 0.0 => Ok(Blockade::Finite(angular(b))),
        (None, Some(b)) => Err(CliError::Config(format!("verify.blockade_mhz must be > 0, got {b}"))),
        (Some(other), None) => Err(CliError::Config(format!("verify.blockade must be \"infinite\", got `{other}`"))),
        (None, None) => Err(CliError::Config("verify: set blockade = \"infinite\" or blockade_mhz".into())),
        (Some(_), Some(_)) => Err(CliError::Config("verify: blockade and blockade_mhz are exclusive".into())),
    }
}

pub fn verify_table(cfg: &RunConfig, seed: u64) -> Result<Outcome, CliError> {
    let params = model_params(cfg)?;
    let v = cfg.verify.as_ref().ok_or_else(|| missing("verify"))?;
    let blockade = blockade_of(v)?;
    let law = match v.fault {
        Fault::None => CouplingLaw::SqrtN,
        Fault::LinearCoupling => CouplingLaw::LinearN,
    };
    if let Some(t) = v.eigenvalue_tolerance_mhz {
        if !(t > 0.0) || !t.is_finite() {
            return Err(CliError::Config("verify.eigenvalue_tolerance_mhz must be > 0".into()));
        }
    }
    let mut cases = vec![(params.omega_r(), params.delta_r())];
    cases.extend(random_draws(seed, v.draws));
    // fail on size before any work
    ProductParams::new(params.clone(), blockade).map_err(config_err)?;

    let mut table = Table::new(&[
        "omega_r_mhz",
        "delta_r_mhz",
        "max_matrix_deviation",
        "max_eigenvalue_deviation_mhz",
        "pass",
    ]);
    let mut all = true;
    let (mut worst_matrix, mut worst_eigen) = (0.0f64, 0.0f64);
    for (omega, delta) in cases {
        let model = params
            .clone()
            .with_omega_r(omega)
            .and_then(|m| m.with_delta_r(delta))
            .map_err(config_err)?;
        let pp = ProductParams::new(model.clone(), blockade).map_err(config_err)?;
        let candidate = match law {
            CouplingLaw::SqrtN => build_symmetric(&model),
            CouplingLaw::LinearN => build_symmetric_with(&model, law),
        };
        let report = verify_against(&pp, &candidate).map_err(numeric_err)?;
        let eigen_ok = match blockade {
            Blockade::Infinite => true,
            Blockade::Finite(b) => {
                let tol = match v.eigenvalue_tolerance_mhz {
                    Some(t) => angular(t),
                    None => 2.0 * model.n_atoms() as f64 * omega * omega / b,
                };
                report.max_eigenvalue_deviation <= tol
            }
        };
        let pass = report.max_matrix_deviation <= PROJECTION_TOLERANCE && eigen_ok;
        all &= pass;
        worst_matrix = worst_matrix.max(report.max_matrix_deviation);
        worst_eigen = worst_eigen.max(report.max_eigenvalue_deviation);
        table.push(vec![
            mhz(omega).into(),
            mhz(delta).into(),
            report.max_matrix_deviation.into(),
            mhz(report.max_eigenvalue_deviation).into(),
            pass.into(),
        ]);
    }
    table.summarize("max_matrix_deviation", worst_matrix);
    table.summarize("max_eigenvalue_deviation_mhz", mhz(worst_eigen));
    table.summarize("passed", all);
    table.summarize("seed", seed);
    Ok(Outcome { table, passed: all })
}
