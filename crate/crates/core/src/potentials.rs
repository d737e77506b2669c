//! Closed-form potential catalogue and the sign/growth audits used to decide
//! which decay theorem a potential falls under.
//!
//! Every family is normalised so that `F(0) = 0` and `f(0) = F'(0) = 0`.
//! The D-brane family is only exposed through the renormalised variable
//! `v = φ - 1`, i.e. `F(v) = 1 - (1+v)^(-2n) - 2nv`, which requires `v > -1`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// One potential family together with its parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    /// `F ≡ 0`; the linear wave equation.
    Free,
    /// `(1 - e^{-s})^{2n}`.
    E(u32),
    /// `tanh^{2n}(s)`.
    T(u32),
    /// `1 - cos s`.
    NaturalInflation,
    /// `cos s - 1` (constant at infinity removed).
    Axion,
    /// Renormalised D-brane `1 - (1+v)^{-2n} - 2nv`.
    DBrane(u32),
    /// `-s^{2n}`.
    Hilltop(u32),
    /// `((1+s²)^{q/2} - 1) / q`.
    AxionMonodromy(f64),
    /// `½ log(1+s²)`.
    Log,
}

/// A validated potential family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PotentialSpec {
    family: Family,
}

impl PotentialSpec {
    pub fn new(family: Family) -> Result<Self> {
        match family {
            Family::E(n) | Family::T(n) if n == 0 => {
                Err(Error::invalid(format!("model index must be >= 1, got {n}")))
            }
            Family::DBrane(n) | Family::Hilltop(n) if !(1..=2).contains(&n) => {
                Err(Error::invalid(format!("model index must be 1 or 2, got {n}")))
            }
            Family::AxionMonodromy(q) if !q.is_finite() || q == 0.0 || q.abs() > 1.0 => Err(
                Error::invalid(format!("monodromy exponent must satisfy 0 < |q| <= 1, got {q}")),
            ),
            _ => Ok(Self { family }),
        }
    }

    pub const fn free() -> Self {
        Self { family: Family::Free }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Lower end of the open domain, if any.
    pub fn domain_lower_bound(&self) -> Option<f64> {
        match self.family {
            Family::DBrane(_) => Some(-1.0),
            _ => None,
        }
    }

    fn check_domain<T: Real>(&self, s: T) -> Result<()> {
        let ok = match self.family {
            Family::DBrane(_) => s > -T::one(),
            _ => !s.is_nan(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain {
                family: self.to_string(),
                value: s.to_f64_lossy(),
            })
        }
    }

    /// Potential `F(s)`.
    pub fn potential<T: Real>(&self, s: T) -> Result<T> {
        self.check_domain(s)?;
        Ok(self.potential_unchecked(s))
    }

    /// Force `f(s) = F'(s)`.
    pub fn force<T: Real>(&self, s: T) -> Result<T> {
        self.check_domain(s)?;
        Ok(self.force_unchecked(s))
    }

    /// `f'(s) = F''(s)`.
    pub fn force_prime<T: Real>(&self, s: T) -> Result<T> {
        self.check_domain(s)?;
        Ok(self.force_prime_unchecked(s))
    }

    /// `2F(s) - s f(s)`, the integrand sign that drives the virial argument.
    pub fn virial_defect<T: Real>(&self, s: T) -> Result<T> {
        self.check_domain(s)?;
        Ok(T::lit(2.0) * self.potential_unchecked(s) - s * self.force_unchecked(s))
    }

    /// `F(s)` without the domain check; NaN outside the domain.
    #[inline]
    pub fn potential_unchecked<T: Real>(&self, s: T) -> T {
        let two = T::lit(2.0);
        match self.family {
            Family::Free => T::zero(),
            Family::E(n) => (-(-s).exp_m1()).powi(2 * n as i32),
            Family::T(n) => s.tanh().powi(2 * n as i32),
            Family::NaturalInflation => {
                let h = (s / two).sin();
                two * h * h
            }
            Family::Axion => {
                let h = (s / two).sin();
                -two * h * h
            }
            Family::DBrane(n) => {
                let k = T::lit(2.0 * n as f64);
                -(-k * s.ln_1p()).exp_m1() - k * s
            }
            Family::Hilltop(n) => -s.powi(2 * n as i32),
            Family::AxionMonodromy(q) => {
                let q = T::lit(q);
                (q / two * (s * s).ln_1p()).exp_m1() / q
            }
            Family::Log => (s * s).ln_1p() / two,
        }
    }

    #[inline]
    pub fn force_unchecked<T: Real>(&self, s: T) -> T {
        let one = T::one();
        match self.family {
            Family::Free => T::zero(),
            Family::E(n) => {
                let m = -(-s).exp_m1();
                T::lit(2.0 * n as f64) * m.powi(2 * n as i32 - 1) * (-s).exp()
            }
            Family::T(n) => {
                let c = s.cosh();
                T::lit(2.0 * n as f64) * s.tanh().powi(2 * n as i32 - 1) / (c * c)
            }
            Family::NaturalInflation => s.sin(),
            Family::Axion => -s.sin(),
            Family::DBrane(n) => {
                let k = T::lit(2.0 * n as f64);
                k * (-(k + one) * s.ln_1p()).exp_m1()
            }
            Family::Hilltop(n) => -T::lit(2.0 * n as f64) * s.powi(2 * n as i32 - 1),
            Family::AxionMonodromy(q) => {
                let e = T::lit(q / 2.0 - 1.0);
                s * (e * (s * s).ln_1p()).exp()
            }
            Family::Log => s / (one + s * s),
        }
    }

    #[inline]
    pub fn force_prime_unchecked<T: Real>(&self, s: T) -> T {
        let one = T::one();
        match self.family {
            Family::Free => T::zero(),
            Family::E(n) => {
                let e = (-s).exp();
                let m = -(-s).exp_m1();
                let k = 2 * n as i32;
                T::lit(k as f64) * e * m.powi(k - 2) * (T::lit((k - 1) as f64) * e - m)
            }
            Family::T(n) => {
                let th = s.tanh();
                let c = s.cosh();
                let sech2 = one / (c * c);
                let k = 2 * n as i32;
                T::lit(k as f64)
                    * sech2
                    * (T::lit((k - 1) as f64) * th.powi(k - 2) * sech2 - T::lit(2.0) * th.powi(k))
            }
            Family::NaturalInflation => s.cos(),
            Family::Axion => -s.cos(),
            Family::DBrane(n) => {
                let k = T::lit(2.0 * n as f64);
                -k * (k + one) * (-(k + T::lit(2.0)) * s.ln_1p()).exp()
            }
            Family::Hilltop(n) => {
                let k = 2 * n as i32;
                -T::lit((k * (k - 1)) as f64) * s.powi(k - 2)
            }
            Family::AxionMonodromy(q) => {
                let s2 = s * s;
                (T::lit(q / 2.0 - 2.0) * s2.ln_1p()).exp() * (one + T::lit(q - 1.0) * s2)
            }
            Family::Log => {
                let s2 = s * s;
                let d = one + s2;
                (one - s2) / (d * d)
            }
        }
    }
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Free => write!(f, "free"),
            Family::E(n) => write!(f, "E{n}"),
            Family::T(n) => write!(f, "T{n}"),
            Family::NaturalInflation => write!(f, "natural"),
            Family::Axion => write!(f, "axion"),
            Family::DBrane(n) => write!(f, "dbrane{n}"),
            Family::Hilltop(n) => write!(f, "hilltop{n}"),
            Family::AxionMonodromy(q) => write!(f, "monodromy:q={q}"),
            Family::Log => write!(f, "log"),
        }
    }
}

impl FromStr for PotentialSpec {
    type Err = Error;

    fn from_str(name: &str) -> Result<Self> {
        let unknown = || Error::UnknownPotential(name.to_string());
        let index = |rest: &str| rest.parse::<u32>().map_err(|_| unknown());
        let family = match name.trim() {
            "free" => Family::Free,
            "natural" => Family::NaturalInflation,
            "axion" => Family::Axion,
            "log" => Family::Log,
            s if s.starts_with("monodromy:q=") => {
                let q: f64 = s["monodromy:q=".len()..].parse().map_err(|_| unknown())?;
                Family::AxionMonodromy(q)
            }
            s if s.starts_with("dbrane") => Family::DBrane(index(&s[6..])?),
            s if s.starts_with("hilltop") => Family::Hilltop(index(&s[7..])?),
            s if s.starts_with('E') => Family::E(index(&s[1..])?),
            s if s.starts_with('T') => Family::T(index(&s[1..])?),
            _ => return Err(unknown()),
        };
        PotentialSpec::new(family)
    }
}

impl TryFrom<String> for PotentialSpec {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

impl From<PotentialSpec> for String {
    fn from(value: PotentialSpec) -> Self {
        value.to_string()
    }
}

/// `2F̃(v) - v f̃(v)` for the renormalised D-brane, in the factored closed form.
pub fn dbrane_virial_closed_form(n: u32, v: f64) -> Result<f64> {
    if v.is_nan() || v <= -1.0 {
        return Err(Error::Domain {
            family: format!("dbrane{n}"),
            value: v,
        });
    }
    let w = 1.0 + v;
    match n {
        1 => Ok(-2.0 * v.powi(3) * (v + 2.0) / w.powi(3)),
        2 => Ok(-2.0 * v.powi(3) * (10.0 + 15.0 * v + 9.0 * v * v + 2.0 * v.powi(3)) / w.powi(5)),
        _ => Err(Error::invalid(format!("D-brane index must be 1 or 2, got {n}"))),
    }
}

// ---------------------------------------------------------------------------
// Audits
// ---------------------------------------------------------------------------

/// Which decay theorem's hypotheses a potential satisfies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TheoremClass {
    /// Large-data local decay: `F ≥ 0`, `2F - sf ≥ 0`, Lipschitz force.
    Thm1,
    /// Small-data decay through `0 ≤ s f(s) ≤ C s⁴` near the origin.
    #[serde(rename = "Thm2-flatness")]
    Thm2Flatness,
    /// Small-data decay through `2F - s f ≥ 0` near the origin.
    #[serde(rename = "Thm2-sign")]
    Thm2Sign,
    None,
}

impl TheoremClass {
    pub fn is_thm2(self) -> bool {
        matches!(self, TheoremClass::Thm2Flatness | TheoremClass::Thm2Sign)
    }
}

impl fmt::Display for TheoremClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TheoremClass::Thm1 => "Thm1",
            TheoremClass::Thm2Flatness => "Thm2-flatness",
            TheoremClass::Thm2Sign => "Thm2-sign",
            TheoremClass::None => "None",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlatnessViolation {
    /// `s f(s) < 0` at some sample.
    SignChange,
    /// `s f(s) / s⁴` grows without bound as `s → 0`.
    Unbounded,
}

/// Sampled supremum of `s f(s) / s⁴`, or the reason it does not exist.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlatnessConstant {
    Finite(f64),
    Violated(FlatnessViolation),
}

impl FlatnessConstant {
    pub fn finite(self) -> Option<f64> {
        match self {
            FlatnessConstant::Finite(c) => Some(c),
            FlatnessConstant::Violated(_) => None,
        }
    }
}

impl fmt::Display for FlatnessConstant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlatnessConstant::Finite(c) => write!(f, "{c:.6e}"),
            FlatnessConstant::Violated(FlatnessViolation::SignChange) => write!(f, "+inf (sign)"),
            FlatnessConstant::Violated(FlatnessViolation::Unbounded) => write!(f, "+inf"),
        }
    }
}

fn check_interval(lo: f64, hi: f64, n_samples: usize) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(Error::invalid(format!("interval [{lo}, {hi}] is empty or inverted")));
    }
    if n_samples < 2 {
        return Err(Error::invalid(format!("need at least 2 samples, got {n_samples}")));
    }
    Ok(())
}

fn uniform_samples(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(move |i| if i + 1 == n { hi } else { lo + step * i as f64 })
}

fn sampled_extremum(
    spec: &PotentialSpec,
    interval: (f64, f64),
    n_samples: usize,
    init: f64,
    pick: fn(f64, f64) -> f64,
    value: impl Fn(&PotentialSpec, f64) -> Result<f64>,
) -> Result<f64> {
    check_interval(interval.0, interval.1, n_samples)?;
    uniform_samples(interval.0, interval.1, n_samples)
        .try_fold(init, |acc, s| Ok(pick(acc, value(spec, s)?)))
}

/// Minimum of `2F(s) - s f(s)` over `n_samples` uniform points.
pub fn virial_sign_margin(spec: &PotentialSpec, interval: (f64, f64), n_samples: usize) -> Result<f64> {
    sampled_extremum(spec, interval, n_samples, f64::INFINITY, f64::min, |p, s| p.virial_defect(s))
}

/// Minimum of `F(s)` over the samples.
pub fn potential_min(spec: &PotentialSpec, interval: (f64, f64), n_samples: usize) -> Result<f64> {
    sampled_extremum(spec, interval, n_samples, f64::INFINITY, f64::min, |p, s| p.potential(s))
}

/// Minimum of `s f(s)` over the samples (defocusing sign).
pub fn defocusing_min(spec: &PotentialSpec, interval: (f64, f64), n_samples: usize) -> Result<f64> {
    sampled_extremum(spec, interval, n_samples, f64::INFINITY, f64::min, |p, s| {
        Ok(s * p.force(s)?)
    })
}

/// Sampled `sup |f'(s)|`. This is a lower estimate of the true Lipschitz
/// constant of `f` on the interval.
pub fn lipschitz_bound(spec: &PotentialSpec, interval: (f64, f64), n_samples: usize) -> Result<f64> {
    sampled_extremum(spec, interval, n_samples, 0.0, f64::max, |p, s| {
        Ok(p.force_prime(s)?.abs())
    })
}

const FLATNESS_PROBE_DECADES: i32 = 8;

/// Supremum of `s f(s) / s⁴` over `(-delta, delta) \ {0}`.
///
/// Uses `n_samples` cell midpoints plus logarithmic probes `±delta·10^-k`,
/// `k = 1..=8`. The constant is reported as violated when `s f(s) < 0` at any
/// sample, or when the ratio at the innermost probe exceeds 100 times the
/// ratio four decades further out.
pub fn quartic_flatness_constant(
    spec: &PotentialSpec,
    delta: f64,
    n_samples: usize,
) -> Result<FlatnessConstant> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    if n_samples < 2 {
        return Err(Error::invalid(format!("need at least 2 samples, got {n_samples}")));
    }
    let ratio = |s: f64| -> Result<Option<f64>> {
        let sf = s * spec.force(s)?;
        if sf < 0.0 {
            return Ok(None);
        }
        Ok(Some(sf / s.powi(4)))
    };

    let mut sup: f64 = 0.0;
    let h = 2.0 * delta / n_samples as f64;
    for i in 0..n_samples {
        let s = -delta + h * (i as f64 + 0.5);
        if s == 0.0 {
            continue;
        }
        match ratio(s)? {
            Some(r) => sup = sup.max(r),
            None => return Ok(FlatnessConstant::Violated(FlatnessViolation::SignChange)),
        }
    }

    for sign in [-1.0, 1.0] {
        let mut probes = Vec::with_capacity(FLATNESS_PROBE_DECADES as usize);
        for k in 1..=FLATNESS_PROBE_DECADES {
            match ratio(sign * delta * 10f64.powi(-k))? {
                Some(r) => probes.push(r),
                None => return Ok(FlatnessConstant::Violated(FlatnessViolation::SignChange)),
            }
        }
        let inner = probes[probes.len() - 1];
        let outer = probes[probes.len() - 5];
        if !inner.is_finite() || inner > 100.0 * outer.max(f64::MIN_POSITIVE) {
            return Ok(FlatnessConstant::Violated(FlatnessViolation::Unbounded));
        }
        sup = probes.into_iter().fold(sup, f64::max);
    }
    Ok(FlatnessConstant::Finite(sup))
}

/// Sampling parameters for [`audit`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditOptions {
    /// Interval for the global conditions (`F ≥ 0`, `2F - sf ≥ 0`, Lipschitz).
    pub interval: (f64, f64),
    /// Half-width of the neighbourhood used by the small-data conditions.
    pub delta: f64,
    pub samples: usize,
    /// Slack allowed on every sampled sign condition.
    pub tolerance: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            interval: (-10.0, 10.0),
            delta: 1.0,
            samples: 10_000,
            tolerance: 1e-12,
        }
    }
}

/// Result of auditing one potential against the theorem hypotheses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialAuditReport {
    pub potential: PotentialSpec,
    /// Global interval actually sampled (clipped to the potential's domain).
    pub interval: (f64, f64),
    pub samples: usize,
    pub spacing: f64,
    pub delta: f64,
    pub tolerance: f64,
    pub potential_min: f64,
    /// `min 2F - s f` over the global interval.
    pub virial_sign_min: f64,
    /// `min 2F - s f` over `(-delta, delta)`.
    pub local_virial_sign_min: f64,
    pub quartic_constant: FlatnessConstant,
    pub lipschitz_bound: f64,
    /// `min s f(s)` over the global interval.
    pub defocusing_min: f64,
    pub theorem_class: TheoremClass,
}

/// Closest interval inside the potential's domain. Open lower bounds are
/// replaced by a point 10% of the way in.
fn clip_to_domain(spec: &PotentialSpec, interval: (f64, f64)) -> (f64, f64) {
    match spec.domain_lower_bound() {
        Some(lb) if interval.0 <= lb => (lb + 0.1 * (1.0f64).min(interval.1 - lb), interval.1),
        _ => interval,
    }
}

/// Runs every sampled audit and classifies the potential.
pub fn audit(spec: &PotentialSpec, options: &AuditOptions) -> Result<PotentialAuditReport> {
    let interval = clip_to_domain(spec, options.interval);
    let local = clip_to_domain(spec, (-options.delta, options.delta));
    let n = options.samples;
    let mut report = PotentialAuditReport {
        potential: *spec,
        interval,
        samples: n,
        spacing: (interval.1 - interval.0) / (n.max(2) - 1) as f64,
        delta: options.delta,
        tolerance: options.tolerance,
        potential_min: potential_min(spec, interval, n)?,
        virial_sign_min: virial_sign_margin(spec, interval, n)?,
        local_virial_sign_min: virial_sign_margin(spec, local, n)?,
        quartic_constant: quartic_flatness_constant(spec, options.delta, n)?,
        lipschitz_bound: lipschitz_bound(spec, interval, n)?,
        defocusing_min: defocusing_min(spec, interval, n)?,
        theorem_class: TheoremClass::None,
    };
    report.theorem_class = classify_theorem(&report);
    Ok(report)
}

/// Maps an audit report to the strongest theorem whose hypotheses hold.
pub fn classify_theorem(report: &PotentialAuditReport) -> TheoremClass {
    let tol = report.tolerance;
    if report.potential_min >= -tol
        && report.virial_sign_min >= -tol
        && report.lipschitz_bound.is_finite()
    {
        TheoremClass::Thm1
    } else if report.quartic_constant.finite().is_some() {
        TheoremClass::Thm2Flatness
    } else if report.local_virial_sign_min >= -tol {
        TheoremClass::Thm2Sign
    } else {
        TheoremClass::None
    }
}

/// Classification each catalogue entry is expected to receive.
pub fn expected_class(spec: &PotentialSpec) -> Option<TheoremClass> {
    match spec.family() {
        Family::T(1) | Family::AxionMonodromy(_) | Family::Log | Family::Free => {
            Some(TheoremClass::Thm1)
        }
        Family::E(n) | Family::T(n) if n >= 2 => Some(TheoremClass::Thm2Flatness),
        Family::NaturalInflation | Family::Hilltop(2) => Some(TheoremClass::Thm2Sign),
        Family::E(1) | Family::Axion | Family::DBrane(_) => Some(TheoremClass::None),
        _ => None,
    }
}

/// Potentials covered by the audit suite, in report order.
pub fn catalogue() -> Vec<PotentialSpec> {
    [
        "E1", "E2", "E3", "T1", "T2", "T3", "natural", "axion", "dbrane1", "dbrane2", "hilltop2",
        "monodromy:q=-1", "monodromy:q=-0.5", "monodromy:q=0.5", "monodromy:q=1", "log",
    ]
    .iter()
    .map(|s| s.parse().expect("catalogue names parse"))
    .collect()
}
