//! Config-driven experiment drivers behind the command-line interface.
//!
//! Each command validates a [`RunConfig`], writes one or more CSV tables into
//! the output directory and finishes with a `manifest.json` that records the
//! configuration, every tolerance, the seed, the trajectory source hash and a
//! short summary of the results. Nothing time-dependent goes into the
//! outputs, so identical configurations reproduce identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::bound;
use crate::floquet::{self, DriveOptions, GeneratorDrive, PropagatorSettings, Space};
use crate::generator::{self, GeneratorOptions};
use crate::mps::{self, TangentTensor, UniformMps};
use crate::pauli::{self, PauliExpansion};
use crate::trajectory::{self, LoopSource, ParamPoint, RotationLoop, Trajectory};
use crate::{Error, Result};

/// Which loop or point a command runs on.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectorySpec {
    /// The built-in closed loop.
    Builtin,
    /// Single-spin rotation loop (bond dimension one, driven exactly).
    Rotation,
    /// Fixed generic point and direction; only for point-wise commands.
    Probe,
    File(PathBuf),
}

impl std::str::FromStr for TrajectorySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "builtin" => Self::Builtin,
            "rotation" => Self::Rotation,
            "probe" => Self::Probe,
            "" => return Err(Error::Config("empty trajectory".into())),
            path => Self::File(PathBuf::from(path)),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    DecayScan,
    OperatorConvergence,
    Drive,
    Floquet,
    BoundAudit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::DecayScan => "decay-scan",
            Command::OperatorConvergence => "operator-convergence",
            Command::Drive => "drive",
            Command::Floquet => "floquet",
            Command::BoundAudit => "bound-audit",
        }
    }

    fn default_traj(self) -> TrajectorySpec {
        match self {
            Command::DecayScan | Command::OperatorConvergence | Command::BoundAudit => TrajectorySpec::Probe,
            Command::Drive | Command::Floquet => TrajectorySpec::Builtin,
        }
    }

    fn default_r(self) -> Vec<usize> {
        match self {
            Command::DecayScan => (3..=9).collect(),
            Command::OperatorConvergence => (2..=5).collect(),
            Command::Drive => vec![2, 3, 4],
            Command::Floquet => vec![4],
            Command::BoundAudit => vec![3, 5, 7, 9],
        }
    }

    fn default_n(self) -> Vec<usize> {
        match self {
            Command::Drive => vec![8],
            Command::Floquet => vec![10],
            _ => Vec::new(),
        }
    }

    fn default_grid(self) -> usize {
        match self {
            Command::BoundAudit => 8,
            _ => 16,
        }
    }
}

/// Validated run configuration, serialized verbatim into the manifest.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub traj: TrajectorySpec,
    pub r: Vec<usize>,
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    /// Number of time intervals over one period.
    pub grid: usize,
    pub sigma2: f64,
    pub tol: f64,
    pub out: PathBuf,
    pub seed: u64,
    pub optimize_alpha: bool,
    pub optimize_complement: bool,
    /// Time on the loop for point-wise commands on a trajectory.
    pub t: f64,
    /// Explicit derivative placement for `decay-scan` placement sweeps.
    pub sweep_r: Option<usize>,
}

/// Raw, optional settings as given on the command line.
#[derive(Clone, Debug, Default)]
pub struct ConfigOverrides {
    pub traj: Option<TrajectorySpec>,
    pub r: Option<Vec<usize>>,
    pub n: Option<Vec<usize>>,
    pub grid: Option<usize>,
    pub sigma2: Option<f64>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub optimize_alpha: bool,
    pub optimize_complement: bool,
    pub t: Option<f64>,
    pub sweep_r: Option<usize>,
}

impl RunConfig {
    pub fn new(command: Command, o: ConfigOverrides) -> Result<Self> {
        let cfg = Self {
            command,
            traj: o.traj.unwrap_or_else(|| command.default_traj()),
            r: o.r.unwrap_or_else(|| command.default_r()),
            n: o.n.unwrap_or_else(|| command.default_n()),
            grid: o.grid.unwrap_or_else(|| command.default_grid()),
            sigma2: o.sigma2.unwrap_or(floquet::spectrum::DEFAULT_SIGMA2),
            tol: o.tol.unwrap_or(PropagatorSettings::default().tol),
            out: o.out.unwrap_or_else(|| PathBuf::from("out")),
            seed: o.seed.unwrap_or(0),
            optimize_alpha: o.optimize_alpha,
            optimize_complement: o.optimize_complement,
            t: o.t.unwrap_or(0.0),
            sweep_r: o.sweep_r,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.r.is_empty() {
            return fail("at least one range r is required".into());
        }
        if self.r.contains(&0) {
            return fail("ranges must be positive".into());
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return fail(format!("sigma2 must be positive, got {}", self.sigma2));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return fail(format!("tolerance must be positive, got {}", self.tol));
        }
        if self.grid == 0 {
            return fail("grid needs at least one interval".into());
        }
        if !self.t.is_finite() {
            return fail("time must be finite".into());
        }
        match self.command {
            Command::Drive | Command::Floquet => {
                if self.n.is_empty() {
                    return fail("at least one chain length N is required".into());
                }
                if self.traj == TrajectorySpec::Probe {
                    return fail("drive and floquet need a closed loop, not the probe point".into());
                }
                for &n in &self.n {
                    for &r in &self.r {
                        if n < r {
                            return fail(format!("N = {n} is shorter than r = {r}"));
                        }
                    }
                    if n > floquet::sector::MAX_SECTOR_SITES {
                        return fail(format!("N = {n} exceeds the dense limit {}", floquet::sector::MAX_SECTOR_SITES));
                    }
                }
            }
            Command::BoundAudit => {
                if self.r.iter().any(|r| r % 2 == 0 || *r < 3) {
                    return fail("bound audit covers odd r ≥ 3 only".into());
                }
            }
            Command::OperatorConvergence => {
                if self.r.len() < 2 {
                    return fail("operator convergence needs at least two ranges".into());
                }
                if self.r.windows(2).any(|w| w[1] != w[0] + 1) {
                    return fail("operator convergence needs consecutive ranges".into());
                }
            }
            Command::DecayScan => {}
        }
        if self.traj == TrajectorySpec::Rotation && self.command == Command::OperatorConvergence {
            return fail("the rotation loop has no complement freedom to optimize".into());
        }
        Ok(())
    }

    fn propagator_settings(&self) -> PropagatorSettings {
        PropagatorSettings { tol: self.tol, ..Default::default() }
    }
}

/// A loaded loop, or the fixed probe point.
pub enum Source {
    Loop(Trajectory),
    Rotation(RotationLoop),
    Point(ParamPoint),
}

impl Source {
    pub fn load(spec: &TrajectorySpec) -> Result<Self> {
        Ok(match spec {
            TrajectorySpec::Builtin => Source::Loop(trajectory::builtin_loop()?),
            TrajectorySpec::Rotation => Source::Rotation(RotationLoop::new(trajectory::LOOP_PERIOD)),
            TrajectorySpec::Probe => Source::Point(trajectory::PROBE_POINT),
            TrajectorySpec::File(p) => Source::Loop(trajectory::load_trajectory(p)?),
        })
    }

    pub fn as_loop(&self) -> Option<&dyn LoopSource> {
        match self {
            Source::Loop(t) => Some(t),
            Source::Rotation(r) => Some(r),
            Source::Point(_) => None,
        }
    }

    pub fn state_at(&self, t: f64) -> Result<(UniformMps, TangentTensor)> {
        match self {
            Source::Loop(traj) => traj.state_at(t),
            Source::Rotation(rot) => rot.state_at(t),
            Source::Point(p) => trajectory::point_state(p),
        }
    }

    fn manifest(&self) -> Value {
        match self {
            Source::Loop(t) => json!({
                "kind": "loop",
                "source": t.source(),
                "sha256": t.source_hash(),
                "period": t.period(),
            }),
            Source::Rotation(r) => json!({ "kind": "rotation", "period": r.period() }),
            Source::Point(p) => json!({ "kind": "point", "values": p.values, "rates": p.rates }),
        }
    }
}

/// Files and summary produced by one command.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn linear_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return f64::NAN;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Least-squares slope of `ln y` against `x`.
pub fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let logs: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_slope(xs, &logs)
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayRow {
    pub r: usize,
    pub placement: usize,
    pub norm2: f64,
    pub optimized_norm2: f64,
    pub fitted_slope: f64,
    pub optimized_slope: f64,
    pub lambda2_abs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PlacementRow {
    pub r: usize,
    pub placement: usize,
    pub norm2: f64,
}

/// Per-site `⟨o o†⟩` against `r` for the middle placement and optimized `α`.
pub fn decay_rows(psi: &UniformMps, tangent: &TangentTensor, ranges: &[usize]) -> Result<Vec<DecayRow>> {
    let mut rows = Vec::with_capacity(ranges.len());
    for &r in ranges {
        let j = generator::middle_site(r);
        let o = generator::local_generator(psi, tangent, r, j)?;
        let norm2 = generator::dagger_residual_norm(&o, psi)?;
        let (_, optimized_norm2) = generator::optimize_alpha(psi, tangent, r)?;
        rows.push(DecayRow {
            r,
            placement: j,
            norm2,
            optimized_norm2,
            fitted_slope: f64::NAN,
            optimized_slope: f64::NAN,
            lambda2_abs: psi.lambda2_abs(),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.r as f64).collect();
    let slope = log_slope(&xs, &rows.iter().map(|r| r.norm2).collect::<Vec<_>>());
    let opt_slope = log_slope(&xs, &rows.iter().map(|r| r.optimized_norm2).collect::<Vec<_>>());
    for row in &mut rows {
        row.fitted_slope = slope;
        row.optimized_slope = opt_slope;
    }
    Ok(rows)
}

/// `⟨o o†⟩` for every single-site placement at range `r`.
pub fn placement_sweep(psi: &UniformMps, tangent: &TangentTensor, r: usize) -> Result<Vec<PlacementRow>> {
    (1..=r)
        .map(|j| {
            let o = generator::local_generator(psi, tangent, r, j)?;
            Ok(PlacementRow { r, placement: j, norm2: generator::dagger_residual_norm(&o, psi)? })
        })
        .collect()
}

pub fn cmd_decay_scan(cfg: &RunConfig, source: &Source) -> Result<RunOutput> {
    let (psi, tangent) = source.state_at(cfg.t)?;
    let rows = decay_rows(&psi, &tangent, &cfg.r)?;
    let path = cfg.out.join("decay_scan.csv");
    write_csv(&path, &rows)?;
    let mut out = RunOutput { files: vec![path], summary: Value::Null };
    let sweep_r = cfg.sweep_r.unwrap_or_else(|| *cfg.r.iter().max().expect("validated"));
    let sweep = placement_sweep(&psi, &tangent, sweep_r)?;
    let sweep_path = cfg.out.join("decay_placement.csv");
    write_csv(&sweep_path, &sweep)?;
    out.files.push(sweep_path);
    out.summary = json!({
        "lambda2_abs": psi.lambda2_abs(),
        "fitted_slope": rows[0].fitted_slope,
        "optimized_slope": rows[0].optimized_slope,
        "reference_slope_2ln_lambda2": 2.0 * psi.lambda2_abs().ln(),
        "optimized_never_worse": rows.iter().all(|r| r.optimized_norm2 <= r.norm2 * (1.0 + 1e-12)),
    });
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub r: usize,
    pub distance_before: f64,
    pub distance_after: f64,
    pub complement_dim: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SupportRow {
    pub r: usize,
    pub support: usize,
    pub weight: f64,
}

/// Sequence of complement-optimized densities over consecutive ranges.
pub struct ConvergenceScan {
    pub rows: Vec<ConvergenceRow>,
    /// Canonical expansion of the last (largest-range) optimized density.
    pub last: PauliExpansion,
}

/// Fits every `h_r` to the previous optimized `h_{r−1}`; the first range is
/// left unoptimized and only seeds the chain.
pub fn operator_convergence(psi: &UniformMps, tangent: &TangentTensor, ranges: &[usize], optimize_alpha: bool) -> Result<ConvergenceScan> {
    let opts = GeneratorOptions { optimize_alpha, ..Default::default() };
    let first = generator::build_generator(psi, tangent, ranges[0], &opts, None)?;
    let mut prev = PauliExpansion::canonical(&first.h)?;
    let mut rows = Vec::new();
    for &r in &ranges[1..] {
        let bundle = generator::build_generator(psi, tangent, r, &opts, None)?;
        let basis = generator::complement_basis(psi, r)?;
        let fit = generator::optimize_complement(&prev, &bundle.o, &basis)?;
        rows.push(ConvergenceRow {
            r,
            distance_before: fit.distance_before,
            distance_after: fit.distance_after,
            complement_dim: basis.dim(),
        });
        prev = PauliExpansion::canonical(&fit.h)?;
    }
    Ok(ConvergenceScan { rows, last: prev })
}

pub fn cmd_operator_convergence(cfg: &RunConfig, source: &Source) -> Result<RunOutput> {
    let (psi, tangent) = source.state_at(cfg.t)?;
    let scan = operator_convergence(&psi, &tangent, &cfg.r, cfg.optimize_alpha)?;
    let path = cfg.out.join("operator_convergence.csv");
    write_csv(&path, &scan.rows)?;
    let r_max = *cfg.r.last().expect("validated");
    let support: Vec<SupportRow> = scan
        .last
        .support_weights()
        .into_iter()
        .enumerate()
        .skip(1)
        .map(|(support, weight)| SupportRow { r: r_max, support, weight })
        .collect();
    let support_path = cfg.out.join("operator_support_weights.csv");
    write_csv(&support_path, &support)?;
    let pauli_path = cfg.out.join("operator_pauli.json");
    fs::write(&pauli_path, serde_json::to_string_pretty(&scan.last.to_map())?)?;
    let decreasing = scan.rows.windows(2).all(|w| w[1].distance_after < w[0].distance_after);
    let weights_decreasing = support.windows(2).all(|w| w[1].weight < w[0].weight);
    Ok(RunOutput {
        files: vec![path, support_path, pauli_path],
        summary: json!({
            "distances_after": scan.rows.iter().map(|r| r.distance_after).collect::<Vec<_>>(),
            "distances_strictly_decreasing": decreasing,
            "support_weights_decreasing": weights_decreasing,
        }),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DriveRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub r: usize,
    pub t: f64,
    pub fidelity: f64,
    pub log_fidelity_per_site: f64,
}

fn drive_options(cfg: &RunConfig) -> DriveOptions {
    DriveOptions { optimize_alpha: cfg.optimize_alpha, optimize_complement: cfg.optimize_complement }
}

pub fn cmd_drive(cfg: &RunConfig, source: &Source) -> Result<RunOutput> {
    let lp = source.as_loop().ok_or_else(|| Error::Config("drive needs a loop".into()))?;
    let grid = floquet::uniform_grid(lp.period(), cfg.grid);
    let mut rows = Vec::new();
    let mut finals = Vec::new();
    for &n in &cfg.n {
        let space = Space::zero_momentum(n, 2)?;
        for &r in &cfg.r {
            let drive = GeneratorDrive { source: lp, r, options: drive_options(cfg) };
            let (trace, prop) = floquet::fidelity_trace(&drive, &space, &grid, &cfg.propagator_settings())?;
            let last = trace.last().expect("non-empty grid");
            finals.push(json!({
                "N": n,
                "r": r,
                "f_tau": last.log_fidelity_per_site,
                "steps": prop.accepted_steps,
                "rejected": prop.rejected_steps,
                "unitarity_defect": floquet::unitarity_defect(prop.unitaries.last().expect("checkpoint")),
            }));
            rows.extend(trace.iter().map(|p| DriveRow {
                n,
                r,
                t: p.t,
                fidelity: p.fidelity,
                log_fidelity_per_site: p.log_fidelity_per_site,
            }));
        }
    }
    let path = cfg.out.join("drive.csv");
    write_csv(&path, &rows)?;
    Ok(RunOutput { files: vec![path], summary: json!({ "final": finals }) })
}

/// Everything computed for one Floquet cell.
pub struct FloquetRun {
    pub spectrum: floquet::FloquetSpectrum,
    pub rows: Vec<floquet::EigenstateRow>,
    pub summary: floquet::ScarSummary,
    /// `None` when degeneracies leave fewer than three distinct levels.
    pub ratios: Option<floquet::SpacingRatios>,
    pub sdos: Vec<(f64, f64)>,
    pub unitarity_defect: f64,
}

/// Grid points used for the smoothed density of states.
pub const SDOS_POINTS: usize = 512;
/// Overlap enhancement over the median that flags a special eigenstate.
pub const SCAR_FACTOR: f64 = 10.0;

pub fn floquet_run(
    lp: &dyn LoopSource,
    n: usize,
    r: usize,
    options: DriveOptions,
    settings: &PropagatorSettings,
    sigma2: f64,
) -> Result<FloquetRun> {
    let space = Space::zero_momentum(n, 2)?;
    let drive = GeneratorDrive { source: lp, r, options };
    let prop = floquet::propagate(&drive, &space, &[lp.period()], settings)?;
    let u = &prop.unitaries[0];
    let spectrum = floquet::floquet_spectrum(u)?;
    let psi0 = floquet::propagate::loop_state(lp, &space, 0.0)?;
    let rows = floquet::eigenstate_diagnostics(&spectrum, &psi0, &space);
    let summary = floquet::scar_summary(&rows, SCAR_FACTOR);
    let ratios = match floquet::spectral_ratios(&spectrum.quasi_energies) {
        Ok(r) => Some(r),
        Err(Error::TooFewLevels { needed, got }) => {
            log::warn!("no spacing ratios: {got} distinct levels, {needed} needed");
            None
        }
        Err(e) => return Err(e),
    };
    let sdos = floquet::sdos(&spectrum.quasi_energies, sigma2, SDOS_POINTS)?;
    Ok(FloquetRun { unitarity_defect: floquet::unitarity_defect(u), spectrum, rows, summary, ratios, sdos })
}

#[derive(Serialize)]
struct SdosRow {
    epsilon: f64,
    rho: f64,
}

#[derive(Serialize)]
struct HistRow {
    r_tilde: f64,
    density: f64,
}

pub fn cmd_floquet(cfg: &RunConfig, source: &Source) -> Result<RunOutput> {
    let lp = source.as_loop().ok_or_else(|| Error::Config("floquet needs a loop".into()))?;
    let mut out = RunOutput::default();
    let mut cells = Vec::new();
    for &n in &cfg.n {
        for &r in &cfg.r {
            let run = floquet_run(lp, n, r, drive_options(cfg), &cfg.propagator_settings(), cfg.sigma2)?;
            let stem = format!("floquet_N{n}_r{r}");
            let spec_path = cfg.out.join(format!("{stem}_eigenstates.csv"));
            write_csv(&spec_path, &run.rows)?;
            let sdos_path = cfg.out.join(format!("{stem}_sdos.csv"));
            let sdos_rows: Vec<SdosRow> = run.sdos.iter().map(|&(epsilon, rho)| SdosRow { epsilon, rho }).collect();
            write_csv(&sdos_path, &sdos_rows)?;
            let hist_path = cfg.out.join(format!("{stem}_ratios.csv"));
            let ratios = run.ratios.as_ref().map_or(&[][..], |r| &r.ratios[..]);
            let hist: Vec<HistRow> = floquet::spectrum::ratio_histogram(ratios, 20)
                .into_iter()
                .map(|(r_tilde, density)| HistRow { r_tilde, density })
                .collect();
            write_csv(&hist_path, &hist)?;
            out.files.extend([spec_path, sdos_path, hist_path]);
            cells.push(json!({
                "N": n,
                "r": r,
                "sector_dim": run.spectrum.len(),
                "unitarity_defect": run.unitarity_defect,
                "scar": run.summary,
                "mean_ratio": run.ratios.as_ref().map(|r| r.mean),
                "degenerate_spacings": run.ratios.as_ref().map(|r| r.degenerate_spacings),
                "reference_ratio_poisson": floquet::spectrum::poisson_mean_ratio(),
                "reference_ratio_orthogonal": floquet::spectrum::orthogonal_mean_ratio(),
                "reference_ratio_unitary": floquet::spectrum::unitary_mean_ratio(),
                "sdos_relative_std": floquet::spectrum::relative_std(&run.sdos),
            }));
        }
    }
    out.summary = json!({ "cells": cells });
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditRow {
    pub t: f64,
    pub r: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub epsilon: f64,
    pub kappa: f64,
    pub beta: f64,
    pub precondition_ok: bool,
    /// Empty when the precondition fails.
    pub holds: Option<bool>,
}

pub fn cmd_bound_audit(cfg: &RunConfig, source: &Source) -> Result<RunOutput> {
    let times: Vec<f64> = match source.as_loop() {
        Some(lp) => (0..cfg.grid).map(|k| lp.period() * k as f64 / cfg.grid as f64).collect(),
        None => vec![cfg.t],
    };
    let mut rows = Vec::new();
    for &t in &times {
        let (psi, tangent) = source.state_at(t)?;
        for &r in &cfg.r {
            let rep = bound::verify_bound(&psi, &tangent, r)?;
            rows.push(AuditRow {
                t,
                r,
                lhs: rep.lhs_per_term,
                rhs: rep.rhs_per_term,
                epsilon: rep.epsilon_r,
                kappa: rep.kappa,
                beta: rep.beta,
                precondition_ok: rep.precondition_ok,
                holds: rep.holds,
            });
        }
    }
    let path = cfg.out.join("bound_audit.csv");
    write_csv(&path, &rows)?;
    let audited = rows.iter().filter(|r| r.precondition_ok).count();
    Ok(RunOutput {
        files: vec![path],
        summary: json!({
            "rows": rows.len(),
            "audited": audited,
            "violations": rows.iter().filter(|r| r.holds == Some(false)).count(),
            "lhs_below_rhs_everywhere": rows.iter().all(|r| r.lhs <= r.rhs),
            "beta_range": [
                rows.iter().map(|r| r.beta).fold(f64::INFINITY, f64::min),
                rows.iter().map(|r| r.beta).fold(0.0, f64::max),
            ],
        }),
    })
}

fn tolerances(cfg: &RunConfig) -> Value {
    json!({
        "rank_cutoff": mps::RANK_CUTOFF,
        "inverse_cutoff": mps::INVERSE_CUTOFF,
        "degeneracy_tol": mps::DEGENERACY_TOL,
        "block_cap": mps::DEFAULT_BLOCK_CAP,
        "weight_sum_tol": generator::DerivativeWeights::SUM_TOL,
        "propagator": cfg.propagator_settings(),
        "unitarity_tol": floquet::spectrum::UNITARITY_TOL,
        "degenerate_spacing": floquet::spectrum::DEGENERATE_SPACING,
        "sigma2": cfg.sigma2,
        "sdos_points": SDOS_POINTS,
        "scar_factor": SCAR_FACTOR,
        "file_closure_tol": trajectory::FILE_CLOSURE_TOL,
        "pauli_identity_key": pauli::IDENTITY_KEY,
    })
}

/// Runs a command and writes its manifest; returns the manifest path.
pub fn run(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let source = Source::load(&cfg.traj)?;
    fs::create_dir_all(&cfg.out)?;
    let output = match cfg.command {
        Command::DecayScan => cmd_decay_scan(cfg, &source)?,
        Command::OperatorConvergence => cmd_operator_convergence(cfg, &source)?,
        Command::Drive => cmd_drive(cfg, &source)?,
        Command::Floquet => cmd_floquet(cfg, &source)?,
        Command::BoundAudit => cmd_bound_audit(cfg, &source)?,
    };
    let files: Vec<String> = output
        .files
        .iter()
        .map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    let manifest = json!({
        "command": cfg.command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "tolerances": tolerances(cfg),
        "seed": cfg.seed,
        "trajectory": source.manifest(),
        "outputs": files,
        "summary": output.summary,
    });
    let path = cfg.out.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(path)
}

/// Process exit code for an error: 2 for configuration and input problems,
/// 3 for numerical failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::Parse(_)
        | Error::NotClosed(_)
        | Error::NonUniformGrid(_)
        | Error::Io(_)
        | Error::Json(_)
        | Error::Csv(_)
        | Error::Unsupported(_) => 2,
        _ => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn overrides() -> ConfigOverrides {
        ConfigOverrides::default()
    }

    #[test]
    fn rejects_chain_shorter_than_range() {
        let o = ConfigOverrides { r: Some(vec![5]), n: Some(vec![4]), ..overrides() };
        assert!(matches!(RunConfig::new(Command::Drive, o), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_even_audit_range() {
        let o = ConfigOverrides { r: Some(vec![4]), ..overrides() };
        assert!(matches!(RunConfig::new(Command::BoundAudit, o), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_probe_for_drive() {
        let o = ConfigOverrides { traj: Some(TrajectorySpec::Probe), ..overrides() };
        assert!(RunConfig::new(Command::Floquet, o).is_err());
    }

    #[test]
    fn defaults_follow_the_command() {
        let cfg = RunConfig::new(Command::DecayScan, overrides()).unwrap();
        assert_eq!(cfg.r, (3..=9).collect::<Vec<_>>());
        assert_eq!(cfg.traj, TrajectorySpec::Probe);
        assert_eq!(cfg.sigma2, 0.05);
        assert_eq!(cfg.tol, 1e-9);
    }

    #[test]
    fn slope_of_exact_exponential() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| (-0.7 * x).exp() * 3.0).collect();
        assert!((log_slope(&xs, &ys) + 0.7).abs() < 1e-12);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::NotUnitary(1.0)), 3);
    }
}
