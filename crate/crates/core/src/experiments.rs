//! Scenario runner: initial data, per-sample diagnostics, decay verdicts,
//! convergence studies and the potential audit suite.
//!
//! Everything here is `f64`; the generic numerical core is instantiated once.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve, FieldState, SolverConfig};
use crate::error::{Error, Result};
use crate::grid::{
    ball_energy, energy_dissipation_rate, exterior_cone_energy, radial_sup_check, RadialGrid,
    WeightTables,
};
use crate::potentials::{
    audit, catalogue, expected_class, quartic_flatness_constant, AuditOptions, FlatnessConstant,
    PotentialAuditReport, PotentialSpec, TheoremClass,
};
use crate::virials::{sample_profiles, ConeWeight};

// ---------------------------------------------------------------------------
// Initial data
// ---------------------------------------------------------------------------

/// Radial profile used for `φ(0, r)` or `φ_t(0, r)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Zero,
    /// `a exp(-w / (1 - ((r - r₀)/ρ)²))` on `|r - r₀| < ρ`, zero elsewhere.
    Bump {
        amplitude: f64,
        center: f64,
        width: f64,
        #[serde(default = "default_steepness")]
        steepness: f64,
    },
    /// `a exp(-((r - r₀)/ρ)²)`; compact only to numerical precision.
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
    },
}

fn default_steepness() -> f64 {
    1.0
}

impl Profile {
    pub fn bump(amplitude: f64, center: f64, width: f64) -> Self {
        Profile::Bump {
            amplitude,
            center,
            width,
            steepness: 1.0,
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Bump {
                amplitude,
                center,
                width,
                steepness,
            } => {
                let x = (r - center) / width;
                if x.abs() >= 1.0 {
                    0.0
                } else {
                    amplitude * (-steepness / (1.0 - x * x)).exp()
                }
            }
            Profile::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let x = (r - center) / width;
                amplitude * (-x * x).exp()
            }
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Bump {
                center,
                width,
                steepness,
                ..
            } => {
                let x = (r - center) / width;
                if x.abs() >= 1.0 {
                    return 0.0;
                }
                let d = 1.0 - x * x;
                self.value(r) * (-2.0 * steepness * x / (d * d)) / width
            }
            Profile::Gaussian { center, width, .. } => {
                let x = (r - center) / width;
                self.value(r) * (-2.0 * x / width)
            }
        }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Bump { amplitude, .. } | Profile::Gaussian { amplitude, .. } => amplitude,
        }
    }

    pub fn with_amplitude(self, a: f64) -> Self {
        match self {
            Profile::Zero => Profile::Zero,
            Profile::Bump {
                center,
                width,
                steepness,
                ..
            } => Profile::Bump {
                amplitude: a,
                center,
                width,
                steepness,
            },
            Profile::Gaussian { center, width, .. } => Profile::Gaussian {
                amplitude: a,
                center,
                width,
            },
        }
    }

    /// Radius beyond which the profile is below `1e-16 |a|` (exactly zero for bumps).
    pub fn extent(&self) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Bump { center, width, .. } => center + width,
            Profile::Gaussian { center, width, .. } => center + 6.1 * width,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        match *self {
            Profile::Zero => Ok(()),
            Profile::Bump {
                amplitude,
                center,
                width,
                steepness,
            } => {
                if !(amplitude.is_finite() && width > 0.0 && steepness > 0.0 && center >= 0.0) {
                    return bad(format!("bad bump parameters {self:?}"));
                }
                // An off-centre bump touching the origin is not smooth as a
                // function on R³.
                if center != 0.0 && center < width {
                    return bad(format!(
                        "bump with centre {center} must either be centred at 0 or satisfy centre >= width {width}"
                    ));
                }
                Ok(())
            }
            Profile::Gaussian {
                amplitude,
                center,
                width,
            } => {
                if !(amplitude.is_finite() && width > 0.0 && center >= 0.0) {
                    return bad(format!("bad gaussian parameters {self:?}"));
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub phi: Profile,
    #[serde(default = "zero_profile")]
    pub phi_t: Profile,
}

fn zero_profile() -> Profile {
    Profile::Zero
}

impl InitialData {
    pub fn state(&self, grid: &RadialGrid<f64>) -> Result<FieldState<f64>> {
        FieldState::from_fields(grid, |r| self.phi.value(r), |r| self.phi_t.value(r))
    }

    pub fn extent(&self) -> f64 {
        self.phi.extent().max(self.phi_t.extent())
    }
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

/// Which hypotheses a run is checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Large-data decay, `H = 0`.
    Thm1,
    /// Small-data decay, `H = 0`.
    Thm2,
    /// Local and exterior-cone decay for `H > 0`.
    Thm3,
    /// Run and report without any theorem claim.
    Exploratory,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub n_cells: usize,
    /// Chosen from the support rule when absent.
    #[serde(default)]
    pub r_max: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub w_ratio: f64,
    pub local_e_ratio: f64,
    pub cone_e_ratio: f64,
    /// Max relative growth of `∫₀ᵗ W` over the last quarter of the run.
    pub saturation: f64,
    /// Max allowed `sup_t ‖φ‖ / ‖φ(0)‖` for the small-data protocol.
    pub sup_growth: f64,
    /// Max relative residual of the energy dissipation identity.
    pub dissipation: f64,
    /// Allowed decrease of `I` between samples, relative to `max |I|`.
    pub monotone_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            w_ratio: 1e-2,
            local_e_ratio: 1e-2,
            cone_e_ratio: 1e-3,
            saturation: 0.05,
            sup_growth: 2.0,
            dissipation: 1e-3,
            monotone_tol: 1e-6,
        }
    }
}

fn default_cfl() -> f64 {
    SolverConfig::<f64>::DEFAULT_CFL
}

fn default_decay_radius() -> f64 {
    10.0
}

fn default_cone_b() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub hubble: f64,
    pub protocol: Protocol,
    pub initial: InitialData,
    pub grid: GridParams,
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Explicit time step; `cfl · dr` when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Time between diagnostic samples (rounded to a whole number of steps).
    pub output_interval: f64,
    /// Radius `R` of the ball in the local energy.
    #[serde(default = "default_decay_radius")]
    pub decay_radius: f64,
    /// Cone opening: the exterior region is `r > (1+b) t`.
    #[serde(default = "default_cone_b")]
    pub cone_b: f64,
    /// Speed `σ` of the weight `1 + tanh(r + σt)` in `J`; `-1 - b/2` when absent.
    #[serde(default)]
    pub cone_sigma: Option<f64>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

/// Extra cells kept between the support bound and `r_max`.
const SUPPORT_MARGIN_CELLS: f64 = 5.0;

impl Scenario {
    /// Smallest `r_max` with `r_max ≥ extent + t_end + 5 dr`.
    pub fn support_rule_r_max(&self) -> f64 {
        let n = self.grid.n_cells as f64;
        (self.initial.extent() + self.t_end) / (1.0 - (SUPPORT_MARGIN_CELLS + 1.0) / n)
    }

    /// Default `r_max`: the support rule plus 15% headroom. The discrete
    /// front is not sharp; sub-threshold tails run ahead of the light cone
    /// by a distance growing like `dr^(2/3) t^(1/3)` and would otherwise hit
    /// the outer guard.
    pub fn default_r_max(&self) -> f64 {
        let reach = self.initial.extent() + self.t_end;
        self.support_rule_r_max().max(1.15 * reach + 1.0)
    }

    pub fn make_grid(&self) -> Result<RadialGrid<f64>> {
        let r_max = self.grid.r_max.unwrap_or_else(|| self.default_r_max());
        RadialGrid::new(r_max, self.grid.n_cells)
    }

    pub fn cone_weight(&self) -> ConeWeight<f64> {
        ConeWeight {
            sigma: self.cone_sigma.unwrap_or(-1.0 - 0.5 * self.cone_b),
            b: 0.0,
        }
    }

    pub fn solver_config(&self, grid: &RadialGrid<f64>) -> SolverConfig<f64> {
        let mut cfg = SolverConfig::with_cfl(grid, self.hubble, self.cfl, self.t_end, 1);
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        let (_, dt) = cfg.schedule();
        cfg.output_every = ((self.output_interval / dt).round() as usize).max(1);
        cfg
    }

    /// Checks every field before any allocation.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if self.name.is_empty() {
            return bad("name must not be empty".into());
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return bad(format!("t_end must be >= 0, got {}", self.t_end));
        }
        if !(self.output_interval.is_finite() && self.output_interval > 0.0) {
            return bad(format!("output_interval must be > 0, got {}", self.output_interval));
        }
        if !(self.hubble.is_finite() && self.hubble >= 0.0) {
            return bad(format!("hubble must be >= 0, got {}", self.hubble));
        }
        if !(self.decay_radius > 0.0) {
            return bad(format!("decay_radius must be > 0, got {}", self.decay_radius));
        }
        self.initial.phi.validate()?;
        self.initial.phi_t.validate()?;
        match self.protocol {
            Protocol::Thm1 | Protocol::Thm2 if self.hubble != 0.0 => {
                return bad(format!("{:?} protocol requires hubble = 0", self.protocol));
            }
            Protocol::Thm3 if self.hubble <= 0.0 => {
                return bad("thm3 protocol requires hubble > 0".into());
            }
            Protocol::Thm3 if self.cone_b <= 1.0 => {
                return bad(format!("thm3 protocol requires cone_b > 1, got {}", self.cone_b));
            }
            _ => {}
        }
        let grid = self.make_grid()?;
        let need = self.initial.extent() + self.t_end + SUPPORT_MARGIN_CELLS * grid.dr();
        if grid.r_max() < need {
            return bad(format!(
                "r_max = {} violates the support rule (needs >= {need})",
                grid.r_max()
            ));
        }
        self.solver_config(&grid).validate(&grid)
    }
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// Column order of the time-series CSV.
pub const CSV_COLUMNS: [&str; 15] = [
    "t", "E", "W", "P", "R", "I", "I_rate", "R_tilde", "Rt_rate", "J", "J_bound", "ballE",
    "coneE", "sup_phi", "h1_norm",
];

/// One time sample of every scalar diagnostic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub E: f64,
    pub W: f64,
    pub P: f64,
    pub R: f64,
    pub I: f64,
    pub I_rate: f64,
    pub R_tilde: f64,
    pub Rt_rate: f64,
    pub J: f64,
    pub J_bound: f64,
    pub ballE: f64,
    pub coneE: f64,
    /// `max_r |φ|`.
    pub sup_phi: f64,
    /// `‖φ‖_{H¹(ℝ³)}`.
    pub h1_norm: f64,
    // Not part of the CSV.
    pub I_rate_exact: f64,
    pub Rt_rate_exact: f64,
    pub J_rate: f64,
    pub h1w_sq: f64,
    pub l2w_sq: f64,
    pub dissipation_rate: f64,
    pub support_radius: f64,
    pub sup_r_phi: f64,
    pub phi_origin: f64,
}

impl DiagnosticsRecord {
    pub fn csv_values(&self) -> [f64; 15] {
        [
            self.t,
            self.E,
            self.W,
            self.P,
            self.R,
            self.I,
            self.I_rate,
            self.R_tilde,
            self.Rt_rate,
            self.J,
            self.J_bound,
            self.ballE,
            self.coneE,
            self.sup_phi,
            self.h1_norm,
        ]
    }
}

/// Shared read-only context for sampling diagnostics.
pub struct Diagnostics<'a> {
    pub grid: &'a RadialGrid<f64>,
    pub weights: WeightTables<f64>,
    pub spec: PotentialSpec,
    pub hubble: f64,
    pub cone: ConeWeight<f64>,
    pub cone_b: f64,
    pub decay_radius: f64,
}

impl<'a> Diagnostics<'a> {
    pub fn for_scenario(s: &Scenario, grid: &'a RadialGrid<f64>) -> Self {
        Self {
            grid,
            weights: WeightTables::new(grid),
            spec: s.potential,
            hubble: s.hubble,
            cone: s.cone_weight(),
            cone_b: s.cone_b,
            decay_radius: s.decay_radius,
        }
    }

    pub fn record(&self, state: &FieldState<f64>) -> Result<DiagnosticsRecord> {
        let g = self.grid;
        let p = state.profiles(g);
        let v = sample_profiles(&p, state, self.hubble, self.cone, &self.spec, g, &self.weights)?;
        let (sup_r_phi, h1_norm) = radial_sup_check(&p.phi, g)?;
        Ok(DiagnosticsRecord {
            t: state.t(),
            E: v.E,
            W: v.W,
            P: v.P,
            R: v.R,
            I: v.I,
            I_rate: v.I_rate,
            R_tilde: v.R_tilde,
            Rt_rate: v.Rt_rate,
            J: v.J,
            J_bound: v.J_bound,
            ballE: ball_energy(state, self.hubble, self.decay_radius, g, &self.spec)?,
            coneE: exterior_cone_energy(state, self.hubble, self.cone_b, g, &self.spec)?,
            sup_phi: p.phi.iter().fold(0.0, |m, x| m.max(x.abs())),
            h1_norm,
            I_rate_exact: v.I_rate_exact,
            Rt_rate_exact: v.Rt_rate_exact,
            J_rate: v.J_rate,
            h1w_sq: v.h1w_sq,
            l2w_sq: v.l2w_sq,
            dissipation_rate: energy_dissipation_rate(state, self.hubble, g)?,
            support_radius: state.support_radius(g, crate::dynamics::SUPPORT_THRESHOLD),
            sup_r_phi,
            phi_origin: p.phi[0],
        })
    }
}

/// Writes the frozen CSV columns. Values use the shortest round-trip decimal
/// form, so output is bit-reproducible.
pub fn write_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for r in records {
        let vals = r.csv_values();
        for (i, v) in vals.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v:e}");
        }
        out.push('\n');
    }
    out
}

/// Parses a CSV written by [`write_csv`] into columns keyed by header name.
pub fn read_csv(text: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::invalid("empty CSV"))?
        .split(',')
        .map(|h| h.trim().to_string())
        .collect::<Vec<_>>();
    let mut cols: Vec<(String, Vec<f64>)> = header.into_iter().map(|h| (h, Vec::new())).collect();
    for (k, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::invalid(format!(
                "CSV row {} has {} fields, expected {}",
                k + 2,
                fields.len(),
                cols.len()
            )));
        }
        for (c, f) in cols.iter_mut().zip(fields) {
            let v = f
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::invalid(format!("CSV row {}: {e}", k + 2)))?;
            c.1.push(v);
        }
    }
    Ok(cols)
}

// ---------------------------------------------------------------------------
// Time-series analysis
// ---------------------------------------------------------------------------

/// Fourth-order centered derivative `(-y₊₂ + 8y₊₁ - 8y₋₁ + y₋₂) / 12Δ` at each
/// sample whose four neighbours are equally spaced; `None` elsewhere.
pub fn centered_rate(ts: &[f64], ys: &[f64]) -> Vec<Option<f64>> {
    let n = ts.len().min(ys.len());
    let mut out = vec![None; n];
    for k in 2..n.saturating_sub(2) {
        let h = ts[k + 1] - ts[k];
        let uniform = (k - 2..k + 2).all(|i| ((ts[i + 1] - ts[i]) - h).abs() <= 1e-9 * h.abs());
        if uniform && h > 0.0 {
            out[k] = Some((-ys[k + 2] + 8.0 * ys[k + 1] - 8.0 * ys[k - 1] + ys[k - 2]) / (12.0 * h));
        }
    }
    out
}

/// Relative L² (over samples) distance between the numerical derivative of
/// `values` and the predicted `rates`.
pub fn rate_mismatch(ts: &[f64], values: &[f64], rates: &[f64]) -> Result<f64> {
    let fd = centered_rate(ts, values);
    let (mut num, mut den) = (0.0, 0.0);
    let mut used = 0;
    for (d, &r) in fd.iter().zip(rates) {
        if let Some(d) = d {
            num += (d - r) * (d - r);
            den += r * r;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::invalid("need at least 5 equally spaced samples"));
    }
    Ok(if den == 0.0 { num.sqrt() } else { (num / den).sqrt() })
}

/// Largest pointwise relative residual between FD(E) and the dissipation law.
/// Samples where the predicted rate is below `1e-12` of its maximum are skipped.
pub fn dissipation_residual(records: &[DiagnosticsRecord]) -> f64 {
    let ts: Vec<f64> = records.iter().map(|r| r.t).collect();
    let es: Vec<f64> = records.iter().map(|r| r.E).collect();
    let scale = records.iter().fold(0.0f64, |m, r| m.max(r.dissipation_rate.abs()));
    let floor = 1e-12 * scale;
    centered_rate(&ts, &es)
        .iter()
        .zip(records)
        .filter_map(|(d, r)| {
            let d = (*d)?;
            let p = r.dissipation_rate;
            (p.abs() > floor).then(|| (d - p).abs() / p.abs())
        })
        .fold(0.0, f64::max)
}

/// `a / b` with `0/0 = 0`.
pub fn safe_ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        a / b
    }
}

/// Trapezoidal running integral.
pub fn running_integral(ts: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(ts.len());
    for k in 0..ts.len() {
        if k > 0 {
            acc += 0.5 * (ts[k] - ts[k - 1]) * (ys[k] + ys[k - 1]);
        }
        out.push(acc);
    }
    out
}

/// Relative growth of `∫₀ᵗ W` over the last quarter of the run.
pub fn integrability_saturation(records: &[DiagnosticsRecord]) -> f64 {
    let (Some(first), Some(last)) = (records.first(), records.last()) else {
        return 0.0;
    };
    let ts: Vec<f64> = records.iter().map(|r| r.t).collect();
    let ws: Vec<f64> = records.iter().map(|r| r.W).collect();
    let s = running_integral(&ts, &ws);
    let t_q = first.t + 0.75 * (last.t - first.t);
    let k = ts.iter().position(|&t| t >= t_q).unwrap_or(ts.len() - 1);
    safe_ratio(s[s.len() - 1] - s[k], s[s.len() - 1])
}

/// Whether `values` never drops by more than `tol` between samples.
pub fn nondecreasing(values: &[f64], tol: f64) -> bool {
    values.windows(2).all(|w| w[1] >= w[0] - tol)
}

/// Largest `|ΔW/Δt| / W` between consecutive samples.
pub fn max_w_rate_ratio(records: &[DiagnosticsRecord]) -> f64 {
    records
        .windows(2)
        .filter(|w| w[0].W > 0.0 && w[1].t > w[0].t)
        .map(|w| ((w[1].W - w[0].W) / (w[1].t - w[0].t)).abs() / w[0].W)
        .fold(0.0, f64::max)
}

/// Largest normalised autocorrelation of `W` over the second half of the run,
/// for lags between 1 and a quarter of the window. Values near 1 indicate a
/// persistent oscillation; this is a search heuristic, not a test.
pub fn late_time_periodicity(records: &[DiagnosticsRecord]) -> f64 {
    let ws: Vec<f64> = records[records.len() / 2..].iter().map(|r| r.W).collect();
    let n = ws.len();
    if n < 8 {
        return 0.0;
    }
    let mean = ws.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = ws.iter().map(|w| w - mean).collect();
    let var: f64 = dev.iter().map(|d| d * d).sum();
    if var == 0.0 {
        return 0.0;
    }
    (1..=n / 4)
        .map(|lag| (0..n - lag).map(|i| dev[i] * dev[i + lag]).sum::<f64>() / var)
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct DecayVerdict {
    pub protocol: Protocol,
    pub theorem_class: TheoremClass,
    /// False when the potential does not meet the protocol's hypotheses
    /// (exploratory runs).
    pub in_scope: bool,
    pub W_ratio: f64,
    pub localE_ratio: f64,
    pub coneE_ratio: f64,
    /// `E(T)/E(0)`; reported without a threshold.
    pub energy_ratio: f64,
    pub monotone_I: bool,
    /// Monotonicity of `I(t) + ∫₀ᵗ φ(s,0)²/2 ds`, i.e. `I` with the flux
    /// through the origin added back.
    pub monotone_I_flux_corrected: bool,
    pub integrability_saturation: f64,
    pub sup_phi_growth: f64,
    pub h1_growth: f64,
    pub energy_nonincreasing: bool,
    pub dissipation_residual: f64,
    pub support_ok: bool,
    pub max_support_excess: f64,
    pub max_w_rate_ratio: f64,
    pub periodicity: f64,
    /// Sampled `sup s f(s)/s⁴` near 0 (the flatness hypothesis of the
    /// `H > 0` theorem), recorded only.
    pub flatness: FlatnessConstant,
    pub pass: bool,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: Scenario,
    pub r_max: f64,
    pub dr: f64,
    pub dt: f64,
    pub steps: usize,
    pub verdict: DecayVerdict,
    #[serde(skip)]
    pub records: Vec<DiagnosticsRecord>,
}

/// Outcome of a run that may have aborted.
#[derive(Clone, Debug)]
pub enum RunOutcome {
    Completed(Box<RunReport>),
    Aborted { scenario: String, error: Error },
}

fn protocol_class_ok(protocol: Protocol, class: TheoremClass) -> bool {
    match protocol {
        Protocol::Thm1 => class == TheoremClass::Thm1,
        Protocol::Thm2 => class.is_thm2() || class == TheoremClass::Thm1,
        Protocol::Thm3 | Protocol::Exploratory => true,
    }
}

/// Runs a scenario and evaluates its verdict.
///
/// The `thm1`/`thm2` protocols refuse potentials whose audit does not place
/// them in the corresponding class.
pub fn run_scenario(s: &Scenario) -> Result<RunReport> {
    s.validate()?;
    let report = audit(&s.potential, &AuditOptions::default())?;
    let class = report.theorem_class;
    if !protocol_class_ok(s.protocol, class) {
        return Err(Error::AuditMismatch {
            family: s.potential.to_string(),
            found: class.to_string(),
            protocol: format!("{:?}", s.protocol).to_lowercase(),
        });
    }
    let grid = s.make_grid()?;
    let cfg = s.solver_config(&grid);
    let diag = Diagnostics::for_scenario(s, &grid);
    let state0 = s.initial.state(&grid)?;
    let mut records = Vec::new();
    let mut failure = None;
    let out = evolve(state0, &cfg, &s.potential, &grid, |st| {
        if failure.is_none() {
            match diag.record(st) {
                Ok(r) => records.push(r),
                Err(e) => failure = Some(e),
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let verdict = evaluate_verdict(s, &report, &records, &out.support);
    Ok(RunReport {
        scenario: s.clone(),
        r_max: grid.r_max(),
        dr: grid.dr(),
        dt: out.dt,
        steps: out.steps,
        verdict,
        records,
    })
}

/// Runs a scenario, converting integration aborts into [`RunOutcome::Aborted`].
pub fn run_scenario_outcome(s: &Scenario) -> Result<RunOutcome> {
    match run_scenario(s) {
        Ok(r) => Ok(RunOutcome::Completed(Box::new(r))),
        Err(e) if e.is_abort() => Ok(RunOutcome::Aborted {
            scenario: s.name.clone(),
            error: e,
        }),
        Err(e) => Err(e),
    }
}

fn evaluate_verdict(
    s: &Scenario,
    report: &PotentialAuditReport,
    records: &[DiagnosticsRecord],
    support: &crate::dynamics::SupportMonitor<f64>,
) -> DecayVerdict {
    let th = &s.thresholds;
    let first = records.first().copied();
    let last = records.last().copied();
    let (first, last) = match (first, last) {
        (Some(a), Some(b)) => (a, b),
        _ => unreachable!("evolve always observes the initial state"),
    };
    let is = |f: fn(&DiagnosticsRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
    let i_vals = is(|r| r.I);
    let max_i = i_vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = th.monotone_tol * max_i;
    let ts = is(|r| r.t);
    let flux = is(|r| 0.5 * r.phi_origin * r.phi_origin);
    let cum_flux = running_integral(&ts, &flux);
    let corrected: Vec<f64> = i_vals.iter().zip(&cum_flux).map(|(i, f)| i + f).collect();
    let sup_phi_max = records.iter().fold(0.0f64, |m, r| m.max(r.sup_phi));
    let h1_max = records.iter().fold(0.0f64, |m, r| m.max(r.h1_norm));
    let e_scale = first.E.abs();
    let energy_nonincreasing = records
        .windows(2)
        .all(|w| w[1].E <= w[0].E + 1e-9 * e_scale);

    let in_scope = match s.protocol {
        Protocol::Thm1 => report.theorem_class == TheoremClass::Thm1,
        Protocol::Thm2 => report.theorem_class.is_thm2() || report.theorem_class == TheoremClass::Thm1,
        Protocol::Thm3 => report.potential_min >= -report.tolerance,
        Protocol::Exploratory => false,
    };

    let mut v = DecayVerdict {
        protocol: s.protocol,
        theorem_class: report.theorem_class,
        in_scope,
        W_ratio: safe_ratio(last.W, first.W),
        localE_ratio: safe_ratio(last.ballE, first.ballE),
        coneE_ratio: safe_ratio(last.coneE, first.coneE),
        energy_ratio: safe_ratio(last.E, first.E),
        monotone_I: nondecreasing(&i_vals, tol),
        monotone_I_flux_corrected: nondecreasing(&corrected, tol),
        integrability_saturation: integrability_saturation(records),
        sup_phi_growth: safe_ratio(sup_phi_max, first.sup_phi),
        h1_growth: safe_ratio(h1_max, first.h1_norm),
        energy_nonincreasing,
        dissipation_residual: if s.hubble > 0.0 {
            dissipation_residual(records)
        } else {
            0.0
        },
        support_ok: support.holds(),
        max_support_excess: support.worst_excess,
        max_w_rate_ratio: max_w_rate_ratio(records),
        periodicity: late_time_periodicity(records),
        flatness: quartic_flatness_constant(&s.potential, 1.0, 10_000)
            .unwrap_or(FlatnessConstant::Violated(crate::potentials::FlatnessViolation::SignChange)),
        pass: false,
        failures: Vec::new(),
    };

    let mut fail = |cond: bool, msg: String| {
        if !cond {
            v.failures.push(msg);
        }
    };
    fail(v.support_ok, format!("support bound exceeded by {:.3e}", v.max_support_excess));
    match s.protocol {
        Protocol::Thm1 | Protocol::Thm2 | Protocol::Exploratory => {
            fail(
                v.W_ratio <= th.w_ratio,
                format!("W_ratio {:.3e} > {:.1e}", v.W_ratio, th.w_ratio),
            );
            fail(
                v.integrability_saturation <= th.saturation,
                format!(
                    "integrability saturation {:.3e} > {:.2}",
                    v.integrability_saturation, th.saturation
                ),
            );
            fail(v.monotone_I, "I(t) decreases between samples".into());
            if s.protocol == Protocol::Thm2 {
                fail(
                    v.sup_phi_growth <= th.sup_growth && v.h1_growth <= th.sup_growth,
                    format!(
                        "smallness lost: sup|phi| grew {:.3}x, H1 norm grew {:.3}x",
                        v.sup_phi_growth, v.h1_growth
                    ),
                );
            }
        }
        Protocol::Thm3 => {
            fail(
                v.coneE_ratio <= th.cone_e_ratio,
                format!("coneE_ratio {:.3e} > {:.1e}", v.coneE_ratio, th.cone_e_ratio),
            );
            fail(
                v.localE_ratio <= th.local_e_ratio,
                format!("localE_ratio {:.3e} > {:.1e}", v.localE_ratio, th.local_e_ratio),
            );
            fail(v.energy_nonincreasing, "energy increased between samples".into());
            fail(
                v.dissipation_residual <= th.dissipation,
                format!(
                    "dissipation residual {:.3e} > {:.1e}",
                    v.dissipation_residual, th.dissipation
                ),
            );
        }
    }
    v.pass = v.failures.is_empty();
    v
}

/// Runs scenarios in parallel on the current rayon pool; results come back
/// sorted by scenario name.
pub fn run_suite(scenarios: &[Scenario]) -> Vec<(String, Result<RunOutcome>)> {
    let mut out: Vec<(String, Result<RunOutcome>)> = scenarios
        .par_iter()
        .map(|s| (s.name.clone(), run_scenario_outcome(s)))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

// ---------------------------------------------------------------------------
// Canned scenarios
// ---------------------------------------------------------------------------

fn base(name: &str, potential: &str, protocol: Protocol, phi: Profile, t_end: f64, n: usize) -> Scenario {
    Scenario {
        name: name.to_string(),
        potential: potential.parse().expect("builtin potential name"),
        hubble: 0.0,
        protocol,
        initial: InitialData {
            phi,
            phi_t: Profile::Zero,
        },
        grid: GridParams {
            n_cells: n,
            r_max: None,
        },
        t_end,
        cfl: 0.5,
        dt: None,
        output_interval: 0.25,
        decay_radius: 10.0,
        cone_b: 2.0,
        cone_sigma: None,
        thresholds: Thresholds::default(),
    }
}

/// Large-data scenario for the `H = 0` theorem.
pub fn thm1_scenario(potential: &str, amplitude: f64, t_end: f64) -> Scenario {
    base(
        &format!("thm1_{}_a{amplitude}", potential.replace([':', '='], "_")),
        potential,
        Protocol::Thm1,
        Profile::bump(amplitude, 0.0, 4.0),
        t_end,
        4096,
    )
}

/// Small-data scenario for the `H = 0` theorem.
pub fn thm2_scenario(potential: &str, amplitude: f64, t_end: f64) -> Scenario {
    base(
        &format!("thm2_{potential}_a{amplitude}"),
        potential,
        Protocol::Thm2,
        Profile::bump(amplitude, 0.0, 4.0),
        t_end,
        4096,
    )
}

/// `H > 0` scenario: exterior-cone and local energy decay.
pub fn thm3_scenario(potential: &str, hubble: f64, amplitude: f64, b: f64, t_end: f64) -> Scenario {
    let mut s = base(
        &format!("thm3_{potential}_H{hubble}_a{amplitude}"),
        potential,
        Protocol::Thm3,
        Profile::bump(amplitude, 0.0, 4.0),
        t_end,
        2048,
    );
    s.hubble = hubble;
    s.cone_b = b;
    s.output_interval = 0.05;
    s
}

/// Runs the `thm1` protocol for `potential`.
pub fn run_thm1_scenario(potential: &str, data: Profile, t_end: f64) -> Result<RunReport> {
    let mut s = thm1_scenario(potential, data.amplitude(), t_end);
    s.initial.phi = data;
    run_scenario(&s)
}

pub fn run_thm2_scenario(potential: &str, amplitude: f64, t_end: f64) -> Result<RunReport> {
    run_scenario(&thm2_scenario(potential, amplitude, t_end))
}

pub fn run_thm3_scenario(
    potential: &str,
    hubble: f64,
    amplitude: f64,
    b: f64,
    t_end: f64,
) -> Result<RunReport> {
    run_scenario(&thm3_scenario(potential, hubble, amplitude, b, t_end))
}

// ---------------------------------------------------------------------------
// Convergence
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceLevel {
    pub n_cells: usize,
    pub dr: f64,
    /// `max_t |E(t) - E(0)| / E(0)` (only meaningful for `H = 0`).
    pub energy_error: f64,
    /// Relative L² error against the exact translated profile.
    pub dalembert_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub levels: Vec<ConvergenceLevel>,
    pub energy_order: f64,
    pub dalembert_order: f64,
}

/// Least-squares slope of `log e` against `log h`.
pub fn fit_order(h: &[f64], e: &[f64]) -> Result<f64> {
    if h.len() < 2 || h.len() != e.len() {
        return Err(Error::invalid("need at least two levels to fit an order"));
    }
    let pts: Vec<(f64, f64)> = h.iter().zip(e).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::invalid("errors and spacings must be positive"));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// Relative L² error of a free outgoing wave `u = g(r - t)` after time
/// `t_end`, with `g` a bump of width 5 centred at `r = 20`.
pub fn dalembert_error(n_cells: usize, r_max: f64, t_end: f64, cfl: f64) -> Result<f64> {
    let grid = RadialGrid::new(r_max, n_cells)?;
    let g = Profile::bump(1.0, 20.0, 5.0);
    let u: Vec<f64> = grid.nodes().iter().map(|&r| g.value(r)).collect();
    let ut: Vec<f64> = grid.nodes().iter().map(|&r| -g.derivative(r)).collect();
    let state = FieldState::from_u(&grid, 0.0, u, ut)?;
    let cfg = SolverConfig::with_cfl(&grid, 0.0, cfl, t_end, usize::MAX);
    let out = evolve(state, &cfg, &PotentialSpec::free(), &grid, |_| {})?;
    let t = out.state.t();
    let (mut num, mut den) = (0.0, 0.0);
    for (j, &r) in grid.nodes().iter().enumerate() {
        let exact = g.value(r - t);
        let d = out.state.u()[j] - exact;
        num += d * d;
        den += exact * exact;
    }
    Ok((num / den).sqrt())
}

/// Runs `scenario` at each `n_cells` in `levels` (strictly increasing) and
/// fits observed orders of the energy drift and the d'Alembert error.
pub fn run_convergence_study(scenario: &Scenario, levels: &[usize]) -> Result<ConvergenceReport> {
    if levels.len() < 2 {
        return Err(Error::invalid("a convergence study needs at least two levels"));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("levels must be strictly increasing"));
    }
    let r_max = scenario.make_grid()?.r_max();
    let mut out = Vec::with_capacity(levels.len());
    for &n in levels {
        let mut s = scenario.clone();
        s.grid = GridParams {
            n_cells: n,
            r_max: Some(r_max),
        };
        s.dt = None;
        let grid = s.make_grid()?;
        let cfg = s.solver_config(&grid);
        let diag = Diagnostics::for_scenario(&s, &grid);
        let state0 = s.initial.state(&grid)?;
        let e0 = crate::grid::energy(&state0, s.hubble, &grid, &s.potential)?;
        let mut drift: f64 = 0.0;
        let mut err = None;
        evolve(state0, &cfg, &s.potential, &grid, |st| {
            match crate::grid::energy(st, diag.hubble, &grid, &diag.spec) {
                Ok(e) => drift = drift.max((e - e0).abs()),
                Err(e) => err = Some(e),
            }
        })?;
        if let Some(e) = err {
            return Err(e);
        }
        out.push(ConvergenceLevel {
            n_cells: n,
            dr: grid.dr(),
            energy_error: safe_ratio(drift, e0.abs()),
            dalembert_error: dalembert_error(n, 40.0, 5.0, s.cfl)?,
        });
    }
    let h: Vec<f64> = out.iter().map(|l| l.dr).collect();
    let ee: Vec<f64> = out.iter().map(|l| l.energy_error.max(f64::MIN_POSITIVE)).collect();
    let de: Vec<f64> = out.iter().map(|l| l.dalembert_error).collect();
    Ok(ConvergenceReport {
        energy_order: fit_order(&h, &ee)?,
        dalembert_order: fit_order(&h, &de)?,
        levels: out,
    })
}

// ---------------------------------------------------------------------------
// Potential audits
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub report: PotentialAuditReport,
    pub expected: Option<TheoremClass>,
    pub matches: bool,
}

/// Audits every catalogue potential with default options.
pub fn run_potential_audit_suite() -> Result<Vec<AuditRow>> {
    catalogue()
        .par_iter()
        .map(|spec| {
            let report = audit(spec, &AuditOptions::default())?;
            let expected = expected_class(spec);
            Ok(AuditRow {
                matches: expected == Some(report.theorem_class),
                expected,
                report,
            })
        })
        .collect()
}
