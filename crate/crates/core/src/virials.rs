//! Virial functionals `P`, `R`, `I`, `R̃`, `J`, the weighted energy `W` and
//! their analytic time derivatives, all evaluated on nodal profiles.
//!
//! These are plain `dr` integrals over `(0, r_max)`; no `4π` factor.
//! With `ψ(r) = r²/(1+r)`:
//!
//! ```text
//! P = ∫ ψ φ_r φ_t,   R = ∫ ψ' φ φ_t,   I = P + R/2,
//! R̃ = ∫ r²/(1+r)⁴ φ φ_t,
//! J = ∫ r² (1 + tanh(r+σt+b)) (φ_t²/2 + φ_r²/(2e^{2Ht}) + F(φ)).
//! ```
//!
//! The rate formulas below come in two flavours. The `*_rate` functions are
//! the classical closed forms for `ψ = r²/(1+r)`, which drop every boundary
//! term. For fields that do not vanish at the origin, integration by parts
//! leaves a flux at `r = 0`; the `*_rate_exact` functions include it.

use serde::{Deserialize, Serialize};

use crate::dynamics::{FieldState, Profiles};
use crate::error::{Error, Result};
use crate::grid::{energy, RadialGrid, WeightTables};
use crate::potentials::PotentialSpec;
use crate::scalar::Real;

fn check<T: Real>(p: &Profiles<T>, grid: &RadialGrid<T>) -> Result<()> {
    for len in [p.phi.len(), p.phi_r.len(), p.phi_t.len()] {
        if len != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: len,
            });
        }
    }
    Ok(())
}

/// Nodal `F(φ)` and `2F(φ) - φ f(φ)`.
struct PotentialTerms<T> {
    potential: Vec<T>,
    phi_force: Vec<T>,
}

impl<T: Real> PotentialTerms<T> {
    fn new(phi: &[T], spec: &PotentialSpec) -> Result<Self> {
        let mut potential = Vec::with_capacity(phi.len());
        let mut phi_force = Vec::with_capacity(phi.len());
        for &s in phi {
            potential.push(spec.potential(s)?);
            phi_force.push(s * spec.force(s)?);
        }
        Ok(Self {
            potential,
            phi_force,
        })
    }

    fn defect(&self, j: usize) -> T {
        T::lit(2.0) * self.potential[j] - self.phi_force[j]
    }
}

/// `P = ∫ r²/(1+r) φ_r φ_t`.
pub fn virial_p<T: Real>(p: &Profiles<T>, grid: &RadialGrid<T>, w: &WeightTables<T>) -> Result<T> {
    check(p, grid)?;
    Ok(grid.integrate_with(|j| w.psi[j] * p.phi_r[j] * p.phi_t[j]))
}

/// `R = ∫ r(r+2)/(1+r)² φ φ_t`.
pub fn virial_r<T: Real>(p: &Profiles<T>, grid: &RadialGrid<T>, w: &WeightTables<T>) -> Result<T> {
    check(p, grid)?;
    Ok(grid.integrate_with(|j| w.dpsi[j] * p.phi[j] * p.phi_t[j]))
}

/// `I = ∫ r²/(1+r) φ_r φ_t + r(r+2)/(2(1+r)²) φ φ_t`.
pub fn virial_i<T: Real>(p: &Profiles<T>, grid: &RadialGrid<T>, w: &WeightTables<T>) -> Result<T> {
    check(p, grid)?;
    let half = T::lit(0.5);
    Ok(grid.integrate_with(|j| {
        p.phi_t[j] * (w.psi[j] * p.phi_r[j] + half * w.dpsi[j] * p.phi[j])
    }))
}

/// `dP/dt` from the general identity
/// `∫ (2ψ/r) φ_r² - ψ'(φ_t²/2 + φ_r²/2 - F)`, with `2ψ/r = 2r/(1+r)`.
pub fn virial_p_rate<T: Real>(
    p: &Profiles<T>,
    spec: &PotentialSpec,
    grid: &RadialGrid<T>,
    w: &WeightTables<T>,
) -> Result<T> {
    check(p, grid)?;
    let pot = PotentialTerms::new(&p.phi, spec)?;
    let half = T::lit(0.5);
    let nodes = grid.nodes();
    Ok(grid.integrate_with(|j| {
        let r = nodes[j];
        let (pr, pt) = (p.phi_r[j], p.phi_t[j]);
        T::lit(2.0) * r / (T::one() + r) * pr * pr
            - w.dpsi[j] * (half * pt * pt + half * pr * pr - pot.potential[j])
    }))
}

/// `dP/dt` in the specialised closed form
/// `∫ r(2+3r)/(2(1+r)²) φ_r² - r(r+2)/(1+r)² (φ_t²/2 - F)`.
///
/// Algebraically identical to [`virial_p_rate`]; kept separately so the two
/// can be compared.
pub fn virial_p_rate_closed<T: Real>(
    p: &Profiles<T>,
    spec: &PotentialSpec,
    grid: &RadialGrid<T>,
    w: &WeightTables<T>,
) -> Result<T> {
    check(p, grid)?;
    let pot = PotentialTerms::new(&p.phi, spec)?;
    let nodes = grid.nodes();
    let half = T::lit(0.5);
    Ok(grid.integrate_with(|j| {
        let r = nodes[j];
        let opr = T::one() + r;
        let (pr, pt) = (p.phi_r[j], p.phi_t[j]);
        r * (T::lit(2.0) + T::lit(3.0) * r) / (T::lit(2.0) * opr * opr) * pr * pr
            - w.dpsi[j] * (half * pt * pt - pot.potential[j])
    }))
}

/// `dR/dt` closed form
/// `∫ ψ'(φ_t² - φ f(φ) - φ_r²) + r(r+4)/(1+r)⁴ φ²` (no origin term).
pub fn virial_r_rate<T: Real>(
    p: &Profiles<T>,
    spec: &PotentialSpec,
    grid: &RadialGrid<T>,
    w: &WeightTables<T>,
) -> Result<T> {
    check(p, grid)?;
    let pot = PotentialTerms::new(&p.phi, spec)?;
    let nodes = grid.nodes();
    Ok(grid.integrate_with(|j| {
        let r = nodes[j];
        let (ph, pr, pt) = (p.phi[j], p.phi_r[j], p.phi_t[j]);
        w.dpsi[j] * (pt * pt - pot.phi_force[j] - pr * pr)
            + r * (r + T::lit(4.0)) / (T::one() + r).powi(4) * ph * ph
    }))
}

/// `dR/dt` including the origin flux: [`virial_r_rate`] `- φ(0)²`.
pub fn virial_r_rate_exact<T: Real>(
    p: &Profiles<T>,
    spec: &PotentialSpec,
    grid: &RadialGrid<T>,
    w: &WeightTables<T>,
) -> Result<T> {
    Ok(virial_r_rate(p, spec, grid, w)? - p.phi[0] * p.phi[0])
}

/// Closed-form `dI/dt` at `H = 0`:
///
/// ```text
/// ∫ r² φ_r²/(1+r)² + r(r+4)/(2(1+r)⁴) φ² + r(r+2)/(2(1+r)²) (2F - φf).
/// ```
///
/// The `φ²` weight is written with the `1/r` already cancelled.
pub fn virial_i_rate<T: Real>(
    p: &Profiles<T>,
    spec: &PotentialSpec,
    grid: &RadialGrid<T>,
    w: &WeightTables<T>,
) -> Result<T> {
    check(p, grid)?;
    let pot = PotentialTerms::new(&p.phi, spec)?;
    let nodes = grid.nodes();
    let half = T::lit(0.5);
    Ok(grid.integrate_with(|j| {
        let r = nodes[j];
        let opr = T::one() + r;
        let (ph, pr) = (p.phi[j], p.phi_r[j]);
        w.r2[j] * pr * pr / (opr * opr)
            + half * r * (r + T::lit(4.0)) / opr.powi(4) * ph * ph
            + half * w.dpsi[j] * pot.defect(j)
    }))
}

/// Flux of `I` through the origin, `φ(0)²/2`.
pub fn virial_i_origin_flux<T: Real>(p: &Profiles<T>) -> T {
    T::lit(0.5) * p.phi[0] * p.phi[0]
}

/// `dI/dt` including the origin flux: [`virial_i_rate`] `- φ(0)²/2`.
pub fn virial_i_rate_exact<T: Real>(
    p: &Profiles<T>,
    spec: &PotentialSpec,
    grid: &RadialGrid<T>,
    w: &WeightTables<T>,
) -> Result<T> {
    Ok(virial_i_rate(p, spec, grid, w)? - virial_i_origin_flux(p))
}

/// `R̃ = ∫ r²/(1+r)⁴ φ φ_t`.
pub fn virial_r_tilde<T: Real>(
    p: &Profiles<T>,
    grid: &RadialGrid<T>,
    w: &WeightTables<T>,
) -> Result<T> {
    check(p, grid)?;
    Ok(grid.integrate_with(|j| w.w_sob[j] * p.phi[j] * p.phi_t[j]))
}

fn r_tilde_rate_with<T: Real>(
    p: &Profiles<T>,
    spec: &PotentialSpec,
    grid: &RadialGrid<T>,
    w: &WeightTables<T>,
    coefficient: T,
) -> Result<T> {
    check(p, grid)?;
    let pot = PotentialTerms::new(&p.phi, spec)?;
    let nodes = grid.nodes();
    Ok(grid.integrate_with(|j| {
        let r = nodes[j];
        let (ph, pr, pt) = (p.phi[j], p.phi_r[j], p.phi_t[j]);
        w.w_sob[j] * (pt * pt - pr * pr - pot.phi_force[j])
            + coefficient * r * (T::lit(3.0) * r - T::lit(2.0)) / (T::one() + r).powi(6) * ph * ph
    }))
}

/// `dR̃/dt` in the classical closed form
/// `∫ r²/(1+r)⁴ (φ_t² - φ_r² - φf) + 3r(3r-2)/(1+r)⁶ φ²`.
pub fn virial_r_tilde_rate<T: Real>(
    p: &Profiles<T>,
    spec: &PotentialSpec,
    grid: &RadialGrid<T>,
    w: &WeightTables<T>,
) -> Result<T> {
    r_tilde_rate_with(p, spec, grid, w, T::lit(3.0))
}

/// `dR̃/dt` obtained by integrating by parts directly; the `φ²` weight is
/// `2r(3r-2)/(1+r)⁶`.
pub fn virial_r_tilde_rate_exact<T: Real>(
    p: &Profiles<T>,
    spec: &PotentialSpec,
    grid: &RadialGrid<T>,
    w: &WeightTables<T>,
) -> Result<T> {
    r_tilde_rate_with(p, spec, grid, w, T::lit(2.0))
}

/// `‖φ‖²_{H¹_w}` and `‖φ_t‖²_{L²_w}`.
pub fn weighted_norms<T: Real>(
    p: &Profiles<T>,
    grid: &RadialGrid<T>,
    w: &WeightTables<T>,
) -> Result<(T, T)> {
    check(p, grid)?;
    let h1 = grid.integrate_with(|j| w.w_sob[j] * (p.phi[j] * p.phi[j] + p.phi_r[j] * p.phi_r[j]));
    let l2 = grid.integrate_with(|j| w.w_sob[j] * p.phi_t[j] * p.phi_t[j]);
    Ok((h1, l2))
}

/// `W = ∫ r²/(1+r)⁴ (φ² + φ_r² + φ_t²)`.
pub fn weighted_energy_w<T: Real>(
    p: &Profiles<T>,
    grid: &RadialGrid<T>,
    w: &WeightTables<T>,
) -> Result<T> {
    let (h1, l2) = weighted_norms(p, grid, w)?;
    Ok(h1 + l2)
}

/// Parameters of the moving weight `1 + tanh(r + σt + b)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeWeight<T> {
    pub sigma: T,
    pub b: T,
}

fn energy_density<T: Real>(p: &Profiles<T>, pot: &PotentialTerms<T>, g: T, j: usize) -> T {
    let half = T::lit(0.5);
    half * p.phi_t[j] * p.phi_t[j] + half * g * p.phi_r[j] * p.phi_r[j] + pot.potential[j]
}

fn sech2<T: Real>(x: T) -> T {
    let c = x.cosh();
    if c.is_finite() {
        (c * c).recip()
    } else {
        T::zero()
    }
}

/// `J = ∫ r² (1 + tanh(r+σt+b)) e(φ)` at `p.t`.
pub fn virial_j<T: Real>(
    p: &Profiles<T>,
    hubble: T,
    weight: ConeWeight<T>,
    spec: &PotentialSpec,
    grid: &RadialGrid<T>,
    w: &WeightTables<T>,
) -> Result<T> {
    check(p, grid)?;
    let pot = PotentialTerms::new(&p.phi, spec)?;
    let g = (T::lit(-2.0) * hubble * p.t).exp();
    let shift = weight.sigma * p.t + weight.b;
    let nodes = grid.nodes();
    Ok(grid.integrate_with(|j| {
        w.r2[j] * (T::one() + (nodes[j] + shift).tanh()) * energy_density(p, &pot, g, j)
    }))
}

/// `(1+σ) ∫ r² sech²(r+σt+b) e(φ)`, an upper bound for `dJ/dt` when `F ≥ 0`.
pub fn virial_j_bound<T: Real>(
    p: &Profiles<T>,
    hubble: T,
    weight: ConeWeight<T>,
    spec: &PotentialSpec,
    grid: &RadialGrid<T>,
    w: &WeightTables<T>,
) -> Result<T> {
    check(p, grid)?;
    let pot = PotentialTerms::new(&p.phi, spec)?;
    let g = (T::lit(-2.0) * hubble * p.t).exp();
    let shift = weight.sigma * p.t + weight.b;
    let nodes = grid.nodes();
    let integral = grid.integrate_with(|j| {
        w.r2[j] * sech2(nodes[j] + shift) * energy_density(p, &pot, g, j)
    });
    Ok((T::one() + weight.sigma) * integral)
}

/// Exact `dJ/dt`:
///
/// ```text
/// σ ∫ r² sech² e(φ) - H ∫ r² (1+tanh)(3φ_t² + φ_r²/e^{2Ht}) - ∫ r² sech² φ_t φ_r / e^{2Ht}.
/// ```
pub fn virial_j_rate<T: Real>(
    p: &Profiles<T>,
    hubble: T,
    weight: ConeWeight<T>,
    spec: &PotentialSpec,
    grid: &RadialGrid<T>,
    w: &WeightTables<T>,
) -> Result<T> {
    check(p, grid)?;
    let pot = PotentialTerms::new(&p.phi, spec)?;
    let g = (T::lit(-2.0) * hubble * p.t).exp();
    let shift = weight.sigma * p.t + weight.b;
    let nodes = grid.nodes();
    Ok(grid.integrate_with(|j| {
        let x = nodes[j] + shift;
        let s2 = sech2(x);
        let (pr, pt) = (p.phi_r[j], p.phi_t[j]);
        w.r2[j]
            * (weight.sigma * s2 * energy_density(p, &pot, g, j)
                - hubble * (T::one() + x.tanh()) * (T::lit(3.0) * pt * pt + g * pr * pr)
                - s2 * g * pt * pr)
    }))
}

/// All virial functionals of one state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct VirialSample<T> {
    pub t: T,
    pub P: T,
    pub R: T,
    pub I: T,
    pub R_tilde: T,
    pub W: T,
    pub J: T,
    /// Closed-form `dI/dt` (no origin term).
    pub I_rate: T,
    /// `dI/dt` including the origin flux.
    pub I_rate_exact: T,
    /// Closed-form `dR̃/dt` (`3r(3r-2)` weight).
    pub Rt_rate: T,
    /// `dR̃/dt` with the `2r(3r-2)` weight.
    pub Rt_rate_exact: T,
    pub J_bound: T,
    pub J_rate: T,
    pub E: T,
    pub h1w_sq: T,
    pub l2w_sq: T,
}

/// Evaluates every functional at `state`. The `I`, `R̃` rates are the `H = 0`
/// identities and are only meaningful for runs with `hubble = 0`.
pub fn sample<T: Real>(
    state: &FieldState<T>,
    hubble: T,
    weight: ConeWeight<T>,
    spec: &PotentialSpec,
    grid: &RadialGrid<T>,
    w: &WeightTables<T>,
) -> Result<VirialSample<T>> {
    let p = state.profiles(grid);
    sample_profiles(&p, state, hubble, weight, spec, grid, w)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn sample_profiles<T: Real>(
    p: &Profiles<T>,
    state: &FieldState<T>,
    hubble: T,
    weight: ConeWeight<T>,
    spec: &PotentialSpec,
    grid: &RadialGrid<T>,
    w: &WeightTables<T>,
) -> Result<VirialSample<T>> {
    let (h1w_sq, l2w_sq) = weighted_norms(p, grid, w)?;
    let i_rate = virial_i_rate(p, spec, grid, w)?;
    Ok(VirialSample {
        t: p.t,
        P: virial_p(p, grid, w)?,
        R: virial_r(p, grid, w)?,
        I: virial_i(p, grid, w)?,
        R_tilde: virial_r_tilde(p, grid, w)?,
        W: h1w_sq + l2w_sq,
        J: virial_j(p, hubble, weight, spec, grid, w)?,
        I_rate: i_rate,
        I_rate_exact: i_rate - virial_i_origin_flux(p),
        Rt_rate: virial_r_tilde_rate(p, spec, grid, w)?,
        Rt_rate_exact: virial_r_tilde_rate_exact(p, spec, grid, w)?,
        J_bound: virial_j_bound(p, hubble, weight, spec, grid, w)?,
        J_rate: virial_j_rate(p, hubble, weight, spec, grid, w)?,
        E: energy(state, hubble, grid, spec)?,
        h1w_sq,
        l2w_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: usize) -> (RadialGrid<f64>, WeightTables<f64>) {
        let g = RadialGrid::new(12.0, n).unwrap();
        let w = WeightTables::new(&g);
        (g, w)
    }

    fn gaussian(g: &RadialGrid<f64>) -> Profiles<f64> {
        FieldState::from_fields(g, |r| (-r * r).exp(), |r| (-r * r).exp())
            .unwrap()
            .profiles(g)
    }

    #[test]
    fn zero_state_gives_zero() {
        let (g, w) = setup(64);
        let p = FieldState::zeros(&g).profiles(&g);
        let spec: PotentialSpec = "T1".parse().unwrap();
        let s = sample_profiles(
            &p,
            &FieldState::zeros(&g),
            1.0,
            ConeWeight { sigma: -2.0, b: 0.0 },
            &spec,
            &g,
            &w,
        )
        .unwrap();
        for v in [s.P, s.R, s.I, s.R_tilde, s.W, s.J, s.I_rate, s.Rt_rate, s.J_bound, s.E] {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn i_is_p_plus_half_r() {
        let (g, w) = setup(256);
        let p = gaussian(&g);
        let i = virial_i(&p, &g, &w).unwrap();
        let (vp, vr) = (virial_p(&p, &g, &w).unwrap(), virial_r(&p, &g, &w).unwrap());
        let scale = vp.abs() + vr.abs();
        assert!((i - (vp + 0.5 * vr)).abs() <= 16.0 * f64::EPSILON * scale, "{i} {vp} {vr}");
    }

    #[test]
    fn bilinear_sign_flip() {
        let (g, w) = setup(256);
        let mut p = gaussian(&g);
        let before = virial_p(&p, &g, &w).unwrap();
        p.phi_t.iter_mut().for_each(|v| *v = -*v);
        assert_eq!(virial_p(&p, &g, &w).unwrap(), -before);
    }

    #[test]
    fn p_rate_forms_agree() {
        let (g, w) = setup(512);
        let st = FieldState::from_fields(
            &g,
            |r| 0.7 * (-(r - 2.0) * (r - 2.0)).exp(),
            |r| (1.0 - r) * (-r * r).exp(),
        )
        .unwrap();
        let p = st.profiles(&g);
        for name in ["T1", "log", "E2", "natural"] {
            let spec: PotentialSpec = name.parse().unwrap();
            let a = virial_p_rate(&p, &spec, &g, &w).unwrap();
            let b = virial_p_rate_closed(&p, &spec, &g, &w).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{name}: {a} vs {b}");
        }
    }

    #[test]
    fn j_bound_vanishes_at_sigma_minus_one() {
        let (g, w) = setup(256);
        let p = gaussian(&g);
        let spec: PotentialSpec = "T1".parse().unwrap();
        let b = virial_j_bound(&p, 1.0, ConeWeight { sigma: -1.0, b: 0.3 }, &spec, &g, &w).unwrap();
        assert_eq!(b, 0.0);
        let b = virial_j_bound(&p, 1.0, ConeWeight { sigma: -1.5, b: 0.3 }, &spec, &g, &w).unwrap();
        assert!(b <= 0.0);
    }
}
