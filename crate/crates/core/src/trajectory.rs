//! Closed loops in the four-angle tensor manifold.
//!
//! The bond-dimension-2 spin-½ tensor is
//!
//! ```text
//! A^↑ = [[cos𝔡 cos𝔟 e^{i𝔞/2}, cos𝔡 sin𝔟 e^{−i𝔞/2}], [0, 0]]
//! A^↓ = [[0, 0], [sin𝔡 sin𝔟 e^{i(𝔠−𝔞/2)}, sin𝔡 cos𝔟 e^{i(𝔠+𝔞/2)}]]
//! ```
//!
//! Trajectories are periodic curves `t ↦ (𝔞, 𝔟, 𝔠, 𝔡)` with analytic time
//! derivatives. They come either from a truncated Fourier series or from
//! uniformly sampled data interpolated with periodic cubic splines.
//!
//! Angles are kept as continuous lifts. Shifting `𝔞` by `2π` flips the sign of
//! the whole tensor, so wrapping into `[−π, π]` is only done for reporting.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::linalg::{c, I, ZERO};
use crate::mps::{self, SiteTensor, TangentTensor, UniformMps};
use crate::{CMat, Error, Result};

/// Angles `(𝔞, 𝔟, 𝔠, 𝔡)` and their rates of change.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    pub values: [f64; 4],
    pub rates: [f64; 4],
}

/// Generic point and direction used by the decay and convergence scans.
pub const PROBE_POINT: ParamPoint = ParamPoint {
    values: [1.05, -0.48, 0.39, 1.2],
    rates: [-3.81, 1.29, 2.1, -0.49],
};

/// Start of the built-in loop.
pub const LOOP_START: [f64; 4] = [0.2607, 0.9, 4.888, 0.4308];
/// Period of the built-in loop.
pub const LOOP_PERIOD: f64 = 2.098;
const LOOP_COS: [f64; 4] = [0.30, -0.20, 0.40, 0.15];
const LOOP_SIN: [f64; 4] = [0.20, 0.30, -0.10, 0.25];

/// Range at which injectivity is certified along a loop.
pub const CERTIFY_RANGE: usize = 2;
/// Number of certification points along a loop.
pub const CERTIFY_POINTS: usize = 64;

/// Closure tolerance for file-loaded loops.
pub const FILE_CLOSURE_TOL: f64 = 1e-6;

fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI { PI } else { y }
}

impl ParamPoint {
    pub fn new(values: [f64; 4], rates: [f64; 4]) -> Result<Self> {
        if values.iter().chain(rates.iter()).any(|x| !x.is_finite()) {
            return Err(Error::DomainError("non-finite trajectory parameter".into()));
        }
        Ok(Self { values, rates })
    }

    /// Values mapped into `[−π, π]`.
    pub fn wrapped(&self) -> [f64; 4] {
        self.values.map(wrap_angle)
    }

    pub fn tensor(&self) -> SiteTensor {
        mps_from_params(&self.values)
    }
}

/// The four-angle tensor.
pub fn mps_from_params(p: &[f64; 4]) -> SiteTensor {
    let [a, b, cc, d] = *p;
    let up = CMat::from_row_slice(
        2,
        2,
        &[
            c(d.cos() * b.cos(), 0.0) * (I * (a / 2.0)).exp(),
            c(d.cos() * b.sin(), 0.0) * (-I * (a / 2.0)).exp(),
            ZERO,
            ZERO,
        ],
    );
    let down = CMat::from_row_slice(
        2,
        2,
        &[
            ZERO,
            ZERO,
            c(d.sin() * b.sin(), 0.0) * (I * (cc - a / 2.0)).exp(),
            c(d.sin() * b.cos(), 0.0) * (I * (cc + a / 2.0)).exp(),
        ],
    );
    SiteTensor::new(vec![up, down]).expect("four-angle tensor is well formed")
}

/// Partial derivatives of the tensor with respect to `𝔞, 𝔟, 𝔠, 𝔡`.
pub fn param_partials(p: &[f64; 4]) -> [SiteTensor; 4] {
    let [a, b, cc, d] = *p;
    let ea = (I * (a / 2.0)).exp();
    let ema = (-I * (a / 2.0)).exp();
    let ecm = (I * (cc - a / 2.0)).exp();
    let ecp = (I * (cc + a / 2.0)).exp();
    let (sb, cb, sd, cd) = (b.sin(), b.cos(), d.sin(), d.cos());
    let tensor = |u: [crate::C64; 2], w: [crate::C64; 2]| {
        SiteTensor::new(vec![
            CMat::from_row_slice(2, 2, &[u[0], u[1], ZERO, ZERO]),
            CMat::from_row_slice(2, 2, &[ZERO, ZERO, w[0], w[1]]),
        ])
        .expect("well formed")
    };
    let half_i = I * 0.5;
    [
        tensor(
            [c(cd * cb, 0.0) * ea * half_i, -c(cd * sb, 0.0) * ema * half_i],
            [-c(sd * sb, 0.0) * ecm * half_i, c(sd * cb, 0.0) * ecp * half_i],
        ),
        tensor(
            [c(-cd * sb, 0.0) * ea, c(cd * cb, 0.0) * ema],
            [c(sd * cb, 0.0) * ecm, c(-sd * sb, 0.0) * ecp],
        ),
        tensor([ZERO, ZERO], [c(sd * sb, 0.0) * ecm * I, c(sd * cb, 0.0) * ecp * I]),
        tensor(
            [c(-sd * cb, 0.0) * ea, c(-sd * sb, 0.0) * ema],
            [c(cd * sb, 0.0) * ecm, c(cd * cb, 0.0) * ecp],
        ),
    ]
}

/// `Σ_x (∂A/∂x) ẋ` before normalization and gauge projection.
pub fn raw_tangent(p: &ParamPoint) -> SiteTensor {
    let parts = param_partials(&p.values);
    let mut out = SiteTensor::zeros(2, 2);
    for (part, &rate) in parts.iter().zip(&p.rates) {
        out = out.axpy(c(rate, 0.0), part);
    }
    out
}

/// Normalized MPS and gauge-projected tangent at a point.
///
/// The tensor is rescaled so that the dominant transfer eigenvalue is one;
/// the derivative of that scale is along `A` and disappears in the gauge
/// projection, so only the constant factor is applied to `∂A`.
pub fn point_state(p: &ParamPoint) -> Result<(UniformMps, TangentTensor)> {
    let a = p.tensor();
    let psi = mps::normalize(&a)?;
    let scale = psi.tensor().norm() / a.norm();
    let raw = raw_tangent(p).scaled(c(scale, 0.0));
    let tangent = mps::project_gauge(&raw, &psi);
    Ok((psi, tangent))
}

/// Gauge-projected tangent for an already normalized MPS at `p`.
pub fn tangent_from_params(p: &ParamPoint, psi: &UniformMps) -> TangentTensor {
    let scale = psi.tensor().norm() / p.tensor().norm();
    mps::project_gauge(&raw_tangent(p).scaled(c(scale, 0.0)), psi)
}

/// One harmonic of a Fourier loop: `A cos(kωt) + B sin(kωt)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub harmonic: u32,
    #[serde(rename = "A")]
    pub cos: [f64; 4],
    #[serde(rename = "B")]
    pub sin: [f64; 4],
}

/// Serialized Fourier loop `{tau, modes: [{harmonic, A, B}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierLoop {
    pub tau: f64,
    pub modes: Vec<FourierMode>,
}

impl FourierLoop {
    fn eval(&self, t: f64) -> ParamPoint {
        let omega = 2.0 * PI / self.tau;
        let mut values = [0.0; 4];
        let mut rates = [0.0; 4];
        for m in &self.modes {
            let k = m.harmonic as f64 * omega;
            let (s, co) = (k * t).sin_cos();
            for i in 0..4 {
                values[i] += m.cos[i] * co + m.sin[i] * s;
                rates[i] += k * (m.sin[i] * co - m.cos[i] * s);
            }
        }
        ParamPoint { values, rates }
    }
}

/// Periodic cubic spline on a uniform grid with an optional linear drift, so
/// that loops winding by whole turns are represented exactly.
#[derive(Clone, Debug)]
pub struct PeriodicSpline {
    period: f64,
    values: Vec<f64>,
    second: Vec<f64>,
    drift: f64,
}

impl PeriodicSpline {
    /// `samples[k]` at `t = k τ / n`, `k = 0..n`; `drift` is the total change
    /// over one period.
    pub fn new(period: f64, samples: Vec<f64>, drift: f64) -> Result<Self> {
        let n = samples.len();
        if n < 3 {
            return Err(Error::Parse("periodic spline needs at least three samples".into()));
        }
        let h = period / n as f64;
        let values: Vec<f64> = samples.iter().enumerate().map(|(k, y)| y - drift * k as f64 / n as f64).collect();
        let rhs: Vec<f64> = (0..n)
            .map(|i| 6.0 / (h * h) * (values[(i + 1) % n] - 2.0 * values[i] + values[(i + n - 1) % n]))
            .collect();
        let second = solve_cyclic(n, &rhs);
        Ok(Self { period, values, second, drift })
    }

    /// Value and derivative at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let n = self.values.len();
        let h = self.period / n as f64;
        let turns = (t / self.period).floor();
        let local = t - turns * self.period;
        let i = ((local / h).floor() as usize).min(n - 1);
        let u = (local - i as f64 * h) / h;
        let (y0, y1) = (self.values[i], self.values[(i + 1) % n]);
        let (m0, m1) = (self.second[i], self.second[(i + 1) % n]);
        let v = 1.0 - u;
        let value = v * y0 + u * y1 + h * h / 6.0 * ((v * v * v - v) * m0 + (u * u * u - u) * m1);
        let slope = (y1 - y0) / h + h / 6.0 * (-(3.0 * v * v - 1.0) * m0 + (3.0 * u * u - 1.0) * m1);
        let drift = self.drift / self.period;
        (value + drift * t, slope + drift)
    }
}

/// Solves the cyclic system `x_{i−1} + 4 x_i + x_{i+1} = b_i`.
fn solve_cyclic(n: usize, b: &[f64]) -> Vec<f64> {
    // Sherman–Morrison on top of the Thomas algorithm.
    let gamma = -4.0;
    let mut diag = vec![4.0; n];
    diag[0] -= gamma;
    diag[n - 1] -= 1.0 / gamma;
    let thomas = |rhs: &[f64]| -> Vec<f64> {
        let mut cp = vec![0.0; n];
        let mut dp = vec![0.0; n];
        cp[0] = 1.0 / diag[0];
        dp[0] = rhs[0] / diag[0];
        for i in 1..n {
            let m = diag[i] - cp[i - 1];
            cp[i] = 1.0 / m;
            dp[i] = (rhs[i] - dp[i - 1]) / m;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = dp[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = dp[i] - cp[i] * x[i + 1];
        }
        x
    };
    let x = thomas(b);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = 1.0;
    let z = thomas(&u);
    let factor = (x[0] + x[n - 1] / gamma) / (1.0 + z[0] + z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - factor * zi).collect()
}

#[derive(Clone, Debug)]
enum Evaluator {
    Fourier(FourierLoop),
    Spline(Box<[PeriodicSpline; 4]>),
}

/// Where a trajectory came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Builtin,
    File(String),
}

/// A closed periodic curve in parameter space.
#[derive(Clone, Debug)]
pub struct Trajectory {
    tau: f64,
    evaluator: Evaluator,
    source: Source,
    source_hash: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Trajectory {
    pub fn period(&self) -> f64 { self.tau }
    pub fn source(&self) -> &Source { &self.source }

    /// SHA-256 of the defining bytes (the file, or the built-in Fourier JSON).
    pub fn source_hash(&self) -> &str { &self.source_hash }

    pub fn eval(&self, t: f64) -> ParamPoint {
        match &self.evaluator {
            Evaluator::Fourier(f) => f.eval(t),
            Evaluator::Spline(s) => {
                let mut values = [0.0; 4];
                let mut rates = [0.0; 4];
                for (k, sp) in s.iter().enumerate() {
                    (values[k], rates[k]) = sp.eval(t);
                }
                ParamPoint { values, rates }
            }
        }
    }

    /// Largest endpoint mismatch, modulo whole turns.
    pub fn closure_defect(&self) -> f64 {
        let (p0, p1) = (self.eval(0.0), self.eval(self.tau));
        (0..4).map(|k| wrap_angle(p1.values[k] - p0.values[k]).abs()).fold(0.0, f64::max)
    }

    /// Checks that the block map at [`CERTIFY_RANGE`] has full rank on a grid.
    pub fn certify_injective(&self, points: usize) -> Result<()> {
        for k in 0..points {
            let t = self.tau * k as f64 / points as f64;
            let a = self.eval(t).tensor();
            let rank = mps::injectivity_rank(&a, CERTIFY_RANGE)?;
            if rank != a.chi() * a.chi() {
                return Err(Error::NotInjectiveOnLoop { t, range: CERTIFY_RANGE, rank });
            }
        }
        Ok(())
    }

    /// Fourier form, if this trajectory has one.
    pub fn fourier(&self) -> Option<&FourierLoop> {
        match &self.evaluator {
            Evaluator::Fourier(f) => Some(f),
            Evaluator::Spline(_) => None,
        }
    }

    /// CSV `t,a,b,c,d` with `n + 1` rows covering `[0, τ]` including both ends.
    pub fn to_csv(&self, n: usize) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "a", "b", "c", "d"])?;
        for k in 0..=n {
            let t = self.tau * k as f64 / n as f64;
            let p = self.eval(t);
            let mut row = vec![format!("{t:.17e}")];
            row.extend(p.values.iter().map(|x| format!("{x:.17e}")));
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("ASCII output"))
    }

    pub fn from_fourier(fourier: FourierLoop, source: Source, hash: String) -> Result<Self> {
        if !(fourier.tau.is_finite() && fourier.tau > 0.0) {
            return Err(Error::Parse(format!("period must be positive, got {}", fourier.tau)));
        }
        let finite = fourier.modes.iter().all(|m| m.cos.iter().chain(m.sin.iter()).all(|x| x.is_finite()));
        if !finite {
            return Err(Error::Parse("non-finite Fourier coefficient".into()));
        }
        let tau = fourier.tau;
        let traj = Self { tau, evaluator: Evaluator::Fourier(fourier), source, source_hash: hash };
        let defect = traj.closure_defect();
        if defect > FILE_CLOSURE_TOL {
            return Err(Error::NotClosed(defect));
        }
        Ok(traj)
    }

    pub fn from_fourier_json(text: &str, source: Source) -> Result<Self> {
        let fourier: FourierLoop = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_fourier(fourier, source, sha256_hex(text.as_bytes()))
    }

    /// Uniform samples `t,a,b,c,d` covering one period, first and last rows
    /// at `t = 0` and `t = τ`.
    pub fn from_csv(text: &str, source: Source) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        let expected = ["t", "a", "b", "c", "d"];
        if headers.len() != 5 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::Parse(format!("expected header t,a,b,c,d, got {}", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let mut rows: Vec<[f64; 5]> = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let mut row = [0.0f64; 5];
            for (k, field) in rec.iter().enumerate() {
                row[k] = field.parse().map_err(|_| Error::Parse(format!("bad number '{field}'")))?;
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::Parse("non-finite sample".into()));
            }
            rows.push(row);
        }
        if rows.len() < 4 {
            return Err(Error::Parse(format!("need at least 4 samples, got {}", rows.len())));
        }
        let n = rows.len() - 1;
        let t0 = rows[0][0];
        let tau = rows[n][0] - t0;
        if tau <= 0.0 {
            return Err(Error::NonUniformGrid("times must increase".into()));
        }
        let h = tau / n as f64;
        for (k, row) in rows.iter().enumerate() {
            let expected = t0 + h * k as f64;
            if (row[0] - expected).abs() > 1e-9 * tau.max(1.0) {
                return Err(Error::NonUniformGrid(format!("row {k} at t = {} expected {expected}", row[0])));
            }
        }
        // Continuous lifts of every angle.
        let mut lifted: Vec<[f64; 4]> = Vec::with_capacity(rows.len());
        for row in &rows {
            let mut v = [row[1], row[2], row[3], row[4]];
            if let Some(prev) = lifted.last() {
                for k in 0..4 {
                    v[k] = prev[k] + wrap_angle(v[k] - prev[k]);
                }
            }
            lifted.push(v);
        }
        let mut defect: f64 = 0.0;
        let mut drift = [0.0; 4];
        for k in 0..4 {
            let total = lifted[n][k] - lifted[0][k];
            let turns = (total / (2.0 * PI)).round();
            defect = defect.max((total - turns * 2.0 * PI).abs());
            drift[k] = turns * 2.0 * PI;
        }
        if defect > FILE_CLOSURE_TOL {
            return Err(Error::NotClosed(defect));
        }
        if t0 != 0.0 {
            return Err(Error::NonUniformGrid(format!("first sample must be at t = 0, got {t0}")));
        }
        let splines: Vec<PeriodicSpline> = (0..4)
            .map(|k| PeriodicSpline::new(tau, lifted[..n].iter().map(|v| v[k]).collect(), drift[k]))
            .collect::<Result<_>>()?;
        let splines: [PeriodicSpline; 4] = splines.try_into().expect("four splines");
        Ok(Self {
            tau,
            evaluator: Evaluator::Spline(Box::new(splines)),
            source,
            source_hash: sha256_hex(text.as_bytes()),
        })
    }
}

/// Built-in closed loop through [`LOOP_START`] with period [`LOOP_PERIOD`]:
/// `p(t) = p(0) + A (1 − cos ωt) + B sin ωt`.
pub fn builtin_fourier() -> FourierLoop {
    let mut offset = LOOP_START;
    for k in 0..4 {
        offset[k] += LOOP_COS[k];
    }
    FourierLoop {
        tau: LOOP_PERIOD,
        modes: vec![
            FourierMode { harmonic: 0, cos: offset, sin: [0.0; 4] },
            FourierMode { harmonic: 1, cos: LOOP_COS.map(|x| -x), sin: LOOP_SIN },
        ],
    }
}

pub fn builtin_loop() -> Result<Trajectory> {
    let fourier = builtin_fourier();
    let json = serde_json::to_string(&fourier)?;
    let traj = Trajectory::from_fourier(fourier, Source::Builtin, sha256_hex(json.as_bytes()))?;
    traj.certify_injective(CERTIFY_POINTS)?;
    Ok(traj)
}

/// Loads a Fourier JSON (`.json`) or sampled CSV (anything else) trajectory.
pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    let text = std::fs::read_to_string(path)?;
    let source = Source::File(path.display().to_string());
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let traj = if is_json { Trajectory::from_fourier_json(&text, source)? } else { Trajectory::from_csv(&text, source)? };
    traj.certify_injective(CERTIFY_POINTS)?;
    Ok(traj)
}

/// Anything that supplies a normalized MPS and tangent along a closed loop.
pub trait LoopSource {
    fn period(&self) -> f64;
    fn state_at(&self, t: f64) -> Result<(UniformMps, TangentTensor)>;
}

impl LoopSource for Trajectory {
    fn period(&self) -> f64 {
        self.tau
    }

    fn state_at(&self, t: f64) -> Result<(UniformMps, TangentTensor)> {
        point_state(&self.eval(t))
    }
}

/// Product state `(cos θ, sin θ)` on every site with `θ = 2π t / τ`; driven
/// exactly by `(2π/τ) Σ_i σ^y_i`.
#[derive(Clone, Copy, Debug)]
pub struct RotationLoop {
    tau: f64,
}

impl RotationLoop {
    pub fn new(tau: f64) -> Self {
        Self { tau }
    }
}

impl LoopSource for RotationLoop {
    fn period(&self) -> f64 {
        self.tau
    }

    fn state_at(&self, t: f64) -> Result<(UniformMps, TangentTensor)> {
        let omega = 2.0 * PI / self.tau;
        let (s, co) = (omega * t).sin_cos();
        let psi = mps::normalize(&mps::real_product(&[co, s]))?;
        let raw = mps::real_product(&[-omega * s, omega * co]);
        Ok((psi.clone(), mps::project_gauge(&raw, &psi)))
    }
}
