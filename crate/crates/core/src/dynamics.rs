//! Method-of-lines integrator for `φ_tt + 3Hφ_t - e^{-2Ht}Δφ + f(φ) = 0` in
//! radial symmetry.
//!
//! The field is evolved as `u = rφ`, which turns the radial Laplacian into
//! `u_rr / r`:
//!
//! ```text
//! u_tt = e^{-2Ht} u_rr - 3H u_t - r f(u/r),    u(0) = u(r_max) = 0.
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::potentials::PotentialSpec;
use crate::scalar::Real;

/// Amplitude below which a node counts as outside the support.
pub const SUPPORT_THRESHOLD: f64 = 1e-13;

/// Support closer than this many cells to `r_max` aborts a run.
pub const SUPPORT_GUARD_CELLS: usize = 4;

/// `(t, u, u_t)` on the grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState<T> {
    t: T,
    u: Vec<T>,
    u_t: Vec<T>,
}

/// Nodal `φ`, `φ_r`, `φ_t` reconstructed from a [`FieldState`].
#[derive(Clone, Debug, PartialEq)]
pub struct Profiles<T> {
    pub t: T,
    pub phi: Vec<T>,
    pub phi_r: Vec<T>,
    pub phi_t: Vec<T>,
}

impl<T: Real> FieldState<T> {
    pub fn zeros(grid: &RadialGrid<T>) -> Self {
        Self {
            t: T::zero(),
            u: vec![T::zero(); grid.len()],
            u_t: vec![T::zero(); grid.len()],
        }
    }

    /// Builds a state from `u` and `u_t` arrays, enforcing `u = u_t = 0` at
    /// both ends.
    pub fn from_u(grid: &RadialGrid<T>, t: T, mut u: Vec<T>, mut u_t: Vec<T>) -> Result<Self> {
        for v in [&u, &u_t] {
            if v.len() != grid.len() {
                return Err(Error::LengthMismatch {
                    expected: grid.len(),
                    found: v.len(),
                });
            }
        }
        let n = grid.n_cells();
        for v in [&mut u, &mut u_t] {
            v[0] = T::zero();
            v[n] = T::zero();
        }
        Ok(Self { t, u, u_t })
    }

    /// Samples `φ(r)` and `φ_t(r)` at the nodes.
    pub fn from_fields(
        grid: &RadialGrid<T>,
        phi: impl Fn(T) -> T,
        phi_t: impl Fn(T) -> T,
    ) -> Result<Self> {
        let u = grid.nodes().iter().map(|&r| r * phi(r)).collect();
        let ut = grid.nodes().iter().map(|&r| r * phi_t(r)).collect();
        Self::from_u(grid, T::zero(), u, ut)
    }

    #[inline]
    pub fn t(&self) -> T {
        self.t
    }

    #[inline]
    pub fn u(&self) -> &[T] {
        &self.u
    }

    #[inline]
    pub fn u_t(&self) -> &[T] {
        &self.u_t
    }

    /// `φ_j = u_j / r_j`, with `φ_0 = 3φ_1 - 3φ_2 + φ_3`.
    pub fn phi(&self, grid: &RadialGrid<T>) -> Vec<T> {
        divide_by_r(&self.u, grid)
    }

    pub fn phi_t(&self, grid: &RadialGrid<T>) -> Vec<T> {
        divide_by_r(&self.u_t, grid)
    }

    pub fn profiles(&self, grid: &RadialGrid<T>) -> Profiles<T> {
        let phi = self.phi(grid);
        let phi_r = grid.even_derivative(&phi);
        Profiles {
            t: self.t,
            phi,
            phi_r,
            phi_t: self.phi_t(grid),
        }
    }

    /// Largest node radius where `|φ|` or `|φ_t|` exceeds `threshold`
    /// (0 for a state that is below threshold everywhere).
    pub fn support_radius(&self, grid: &RadialGrid<T>, threshold: T) -> T {
        let inv = grid.inv_nodes();
        for j in (1..grid.len()).rev() {
            if (self.u[j] * inv[j]).abs() > threshold || (self.u_t[j] * inv[j]).abs() > threshold {
                return grid.nodes()[j];
            }
        }
        T::zero()
    }
}

fn divide_by_r<T: Real>(v: &[T], grid: &RadialGrid<T>) -> Vec<T> {
    let inv = grid.inv_nodes();
    let mut phi: Vec<T> = v.iter().zip(inv).map(|(&a, &b)| a * b).collect();
    phi[0] = T::lit(3.0) * (phi[1] - phi[2]) + phi[3];
    phi
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig<T> {
    pub hubble: T,
    pub dt: T,
    pub cfl: T,
    pub t_end: T,
    pub output_every: usize,
}

impl<T: Real> SolverConfig<T> {
    pub const DEFAULT_CFL: f64 = 0.5;

    /// Config with `dt = cfl · dr`.
    pub fn with_cfl(grid: &RadialGrid<T>, hubble: T, cfl: T, t_end: T, output_every: usize) -> Self {
        Self {
            hubble,
            dt: cfl * grid.dr(),
            cfl,
            t_end,
            output_every,
        }
    }

    pub fn validate(&self, grid: &RadialGrid<T>) -> Result<()> {
        if !(self.hubble.is_finite() && self.hubble >= T::zero()) {
            return Err(Error::invalid(format!("Hubble rate must be >= 0, got {}", self.hubble)));
        }
        if !(self.cfl > T::zero() && self.cfl <= T::one()) {
            return Err(Error::invalid(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.t_end.is_finite() && self.t_end >= T::zero()) {
            return Err(Error::invalid(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if self.output_every == 0 {
            return Err(Error::invalid("output_every must be >= 1"));
        }
        let limit = cfl_dt(grid, self.cfl);
        if !(self.dt > T::zero()) || self.dt > limit * (T::one() + T::lit(1e-12)) {
            return Err(Error::Cfl {
                dt: self.dt.to_f64_lossy(),
                limit: limit.to_f64_lossy(),
            });
        }
        Ok(())
    }

    /// Number of steps and the uniform step that lands exactly on `t_end`
    /// without exceeding `dt`.
    pub fn schedule(&self) -> (usize, T) {
        if self.t_end <= T::zero() {
            return (0, self.dt);
        }
        let steps = (self.t_end / self.dt - T::lit(1e-9)).ceil().max(T::one());
        let n = steps.to_usize().unwrap_or(usize::MAX);
        (n, self.t_end / steps)
    }
}

/// Largest stable step, `cfl · dr`. The wave speed `e^{-Ht}` never exceeds 1.
pub fn cfl_dt<T: Real>(grid: &RadialGrid<T>, cfl: T) -> T {
    cfl * grid.dr()
}

/// Writes `(du, du_t)` for the state `(u, u_t)` at time `t`.
///
/// Fails with [`Error::NonFinite`] (or [`Error::Domain`] for the D-brane
/// family) when the force evaluates to NaN.
#[allow(clippy::too_many_arguments)]
pub fn rhs_into<T: Real>(
    u: &[T],
    u_t: &[T],
    t: T,
    hubble: T,
    spec: &PotentialSpec,
    grid: &RadialGrid<T>,
    du: &mut [T],
    du_t: &mut [T],
) -> Result<()> {
    let n = grid.n_cells();
    let nodes = grid.nodes();
    let inv = grid.inv_nodes();
    let lap = (T::lit(-2.0) * hubble * t).exp() / (grid.dr() * grid.dr());
    let damp = T::lit(3.0) * hubble;
    du.copy_from_slice(u_t);
    du_t[0] = T::zero();
    du_t[n] = T::zero();
    for j in 1..n {
        let force = nodes[j] * spec.force_unchecked(u[j] * inv[j]);
        du_t[j] = lap * (u[j + 1] - T::lit(2.0) * u[j] + u[j - 1]) - damp * u_t[j] - force;
    }
    for j in 1..n {
        if !du_t[j].is_finite() {
            let phi = u[j] * inv[j];
            spec.force(phi)?;
            return Err(Error::NonFinite {
                t: t.to_f64_lossy(),
                r: nodes[j].to_f64_lossy(),
            });
        }
    }
    Ok(())
}

/// `(du, du_t)` for a state.
pub fn rhs<T: Real>(
    state: &FieldState<T>,
    hubble: T,
    spec: &PotentialSpec,
    grid: &RadialGrid<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    let mut du = vec![T::zero(); grid.len()];
    let mut dut = vec![T::zero(); grid.len()];
    rhs_into(&state.u, &state.u_t, state.t, hubble, spec, grid, &mut du, &mut dut)?;
    Ok((du, dut))
}

/// Classical RK4 with preallocated stage buffers.
#[derive(Clone, Debug)]
pub struct Rk4<T> {
    k: [(Vec<T>, Vec<T>); 4],
    stage: (Vec<T>, Vec<T>),
}

impl<T: Real> Rk4<T> {
    pub fn new(grid: &RadialGrid<T>) -> Self {
        let z = || (vec![T::zero(); grid.len()], vec![T::zero(); grid.len()]);
        Self {
            k: [z(), z(), z(), z()],
            stage: z(),
        }
    }

    /// Advances `state` by `dt` in place.
    pub fn step(
        &mut self,
        state: &mut FieldState<T>,
        dt: T,
        hubble: T,
        spec: &PotentialSpec,
        grid: &RadialGrid<T>,
    ) -> Result<()> {
        let n = grid.n_cells();
        let half = T::lit(0.5) * dt;
        let offsets = [T::zero(), half, half, dt];
        for s in 0..4 {
            let t = state.t + offsets[s];
            if s == 0 {
                let (k0, k1) = &mut self.k[0];
                rhs_into(&state.u, &state.u_t, t, hubble, spec, grid, k0, k1)?;
                continue;
            }
            let h = offsets[s];
            let (prev_du, prev_dut) = &self.k[s - 1];
            let (su, sut) = &mut self.stage;
            for j in 0..=n {
                su[j] = state.u[j] + h * prev_du[j];
                sut[j] = state.u_t[j] + h * prev_dut[j];
            }
            for v in [&mut *su, &mut *sut] {
                v[0] = T::zero();
                v[n] = T::zero();
            }
            let (k0, k1) = &mut self.k[s];
            rhs_into(su, sut, t, hubble, spec, grid, k0, k1)?;
        }
        let w = dt / T::lit(6.0);
        let two = T::lit(2.0);
        let [a, b, c, d] = &self.k;
        for j in 1..n {
            state.u[j] = state.u[j] + w * (a.0[j] + two * (b.0[j] + c.0[j]) + d.0[j]);
            state.u_t[j] = state.u_t[j] + w * (a.1[j] + two * (b.1[j] + c.1[j]) + d.1[j]);
        }
        state.t = state.t + dt;
        Ok(())
    }
}

/// One RK4 step of size `cfg.dt`.
pub fn step<T: Real>(
    state: &FieldState<T>,
    cfg: &SolverConfig<T>,
    spec: &PotentialSpec,
    grid: &RadialGrid<T>,
) -> Result<FieldState<T>> {
    cfg.validate(grid)?;
    let mut next = state.clone();
    Rk4::new(grid).step(&mut next, cfg.dt, cfg.hubble, spec, grid)?;
    Ok(next)
}

/// Tracks the finite-speed-of-propagation bound
/// `support(t) ≤ support(0) + t + 2dr`.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportMonitor<T> {
    pub initial_radius: T,
    pub initial_time: T,
    pub threshold: T,
    slack: T,
    /// Largest observed excess over the bound (≤ 0 while the bound holds).
    pub worst_excess: T,
    pub violations: usize,
}

impl<T: Real> SupportMonitor<T> {
    pub fn new(state: &FieldState<T>, grid: &RadialGrid<T>) -> Self {
        let threshold = T::lit(SUPPORT_THRESHOLD);
        Self {
            initial_radius: state.support_radius(grid, threshold),
            initial_time: state.t(),
            threshold,
            slack: T::lit(2.0) * grid.dr(),
            worst_excess: T::neg_infinity(),
            violations: 0,
        }
    }

    pub fn bound(&self, t: T) -> T {
        self.initial_radius + (t - self.initial_time) + self.slack
    }

    /// Records the support of `state`; returns its radius.
    pub fn observe(&mut self, state: &FieldState<T>, grid: &RadialGrid<T>) -> T {
        let radius = state.support_radius(grid, self.threshold);
        let excess = radius - self.bound(state.t());
        self.worst_excess = self.worst_excess.max(excess);
        if excess > T::zero() {
            self.violations += 1;
        }
        radius
    }

    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Fails when the field is above threshold within the guard cells at `r_max`.
fn check_boundary_guard<T: Real>(state: &FieldState<T>, grid: &RadialGrid<T>) -> Result<()> {
    let n = grid.n_cells();
    let thr = T::lit(SUPPORT_THRESHOLD);
    let inv = grid.inv_nodes();
    for j in (n - SUPPORT_GUARD_CELLS..n).rev() {
        if (state.u[j] * inv[j]).abs() > thr || (state.u_t[j] * inv[j]).abs() > thr {
            return Err(Error::SupportOverflow {
                t: state.t.to_f64_lossy(),
                radius: grid.nodes()[j].to_f64_lossy(),
                guard: (grid.r_max() - T::from_count(SUPPORT_GUARD_CELLS) * grid.dr())
                    .to_f64_lossy(),
            });
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct EvolveOutcome<T> {
    pub state: FieldState<T>,
    pub steps: usize,
    pub dt: T,
    pub support: SupportMonitor<T>,
}

/// Integrates to `cfg.t_end` with a uniform step `≤ cfg.dt`.
///
/// `observer` sees the state at step 0, every `output_every` steps, and the
/// final step. It runs synchronously between steps.
pub fn evolve<T: Real>(
    state0: FieldState<T>,
    cfg: &SolverConfig<T>,
    spec: &PotentialSpec,
    grid: &RadialGrid<T>,
    mut observer: impl FnMut(&FieldState<T>),
) -> Result<EvolveOutcome<T>> {
    cfg.validate(grid)?;
    if state0.u.len() != grid.len() || state0.u_t.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            found: state0.u.len().min(state0.u_t.len()),
        });
    }
    let (steps, dt) = cfg.schedule();
    let mut state = state0;
    let mut support = SupportMonitor::new(&state, grid);
    check_boundary_guard(&state, grid)?;
    support.observe(&state, grid);
    observer(&state);

    let mut rk = Rk4::new(grid);
    for k in 1..=steps {
        rk.step(&mut state, dt, cfg.hubble, spec, grid)?;
        check_boundary_guard(&state, grid)?;
        if k % cfg.output_every == 0 || k == steps {
            support.observe(&state, grid);
            observer(&state);
        }
    }
    Ok(EvolveOutcome {
        state,
        steps,
        dt,
        support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free() -> PotentialSpec {
        PotentialSpec::free()
    }

    #[test]
    fn cfl_examples() {
        let g = RadialGrid::new(1.0f64, 100).unwrap();
        assert!((cfl_dt(&g, 0.5) - 0.005).abs() < 1e-15);
        let g = RadialGrid::new(2.0f64, 100).unwrap();
        assert!((cfl_dt(&g, 1.0) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn config_rejects_large_step() {
        let g = RadialGrid::new(10.0f64, 100).unwrap();
        let mut cfg = SolverConfig::with_cfl(&g, 0.0, 0.5, 1.0, 1);
        assert!(cfg.validate(&g).is_ok());
        cfg.dt = 0.051;
        assert!(matches!(cfg.validate(&g), Err(Error::Cfl { .. })));
        cfg.dt = 0.05;
        cfg.hubble = -1.0;
        assert!(cfg.validate(&g).is_err());
    }

    #[test]
    fn zero_state_has_zero_rhs() {
        let g = RadialGrid::new(10.0f64, 64).unwrap();
        let s = FieldState::zeros(&g);
        for spec in ["T1", "log", "E2", "dbrane1", "axion"] {
            let (du, dut) = rhs(&s, 0.7, &spec.parse().unwrap(), &g).unwrap();
            assert!(du.iter().chain(&dut).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn sine_is_discrete_eigenfunction() {
        let k = 3.0 * std::f64::consts::PI / 10.0;
        let g = RadialGrid::new(10.0f64, 400).unwrap();
        let u: Vec<f64> = g.nodes().iter().map(|r| (k * r).sin()).collect();
        let s = FieldState::from_u(&g, 0.0, u.clone(), vec![0.0; g.len()]).unwrap();
        let (_, dut) = rhs(&s, 0.0, &free(), &g).unwrap();
        let dr = g.dr();
        for j in 1..g.n_cells() {
            assert!((dut[j] + k * k * u[j]).abs() <= k.powi(4) * dr * dr / 12.0 + 1e-12);
        }
    }

    #[test]
    fn end_time_zero_is_identity() {
        let g = RadialGrid::new(20.0f64, 200).unwrap();
        let s = FieldState::from_fields(&g, |r| (-(r - 5.0) * (r - 5.0)).exp(), |_| 0.0).unwrap();
        let cfg = SolverConfig::with_cfl(&g, 0.0, 0.5, 0.0, 1);
        let mut calls = 0;
        let out = evolve(s.clone(), &cfg, &free(), &g, |_| calls += 1).unwrap();
        assert_eq!(out.state, s);
        assert_eq!(out.steps, 0);
        assert_eq!(calls, 1);
    }

    #[test]
    fn schedule_hits_end_time() {
        let g = RadialGrid::new(10.0f64, 100).unwrap();
        let cfg = SolverConfig::with_cfl(&g, 0.0, 0.5, 1.01, 1);
        let (n, dt) = cfg.schedule();
        assert!(dt <= cfg.dt);
        assert!((dt * n as f64 - 1.01).abs() < 1e-12);
    }

    #[test]
    fn support_overflow_aborts() {
        let g = RadialGrid::new(10.0f64, 100).unwrap();
        let s = FieldState::from_fields(&g, |r| (-(r - 8.0) * (r - 8.0)).exp(), |_| 0.0).unwrap();
        let cfg = SolverConfig::with_cfl(&g, 0.0, 0.5, 5.0, 1);
        let err = evolve(s, &cfg, &free(), &g, |_| {}).unwrap_err();
        assert!(matches!(err, Error::SupportOverflow { .. }));
    }

    #[test]
    fn origin_extrapolation_is_exact_for_quadratics() {
        let g = RadialGrid::new(1.0f64, 16).unwrap();
        let s = FieldState::from_fields(&g, |r| 2.0 - r + 0.5 * r * r, |_| 0.0).unwrap();
        let phi = s.phi(&g);
        assert!((phi[0] - 2.0).abs() < 1e-12);
    }
}
