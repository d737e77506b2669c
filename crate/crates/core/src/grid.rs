//! Uniform radial mesh, composite Simpson quadrature, virial weight tables and
//! the energy-type functionals.
//!
//! Two conventions are used throughout:
//!
//! * Energies (`E`, ball and cone energies, `‖·‖_{H¹(ℝ³)}`) are ℝ³ integrals
//!   and carry the `4π` of the radial reduction.
//! * Virials and the weighted norms are plain `dr` integrals over `(0, r_max)`.

use crate::dynamics::FieldState;
use crate::error::{Error, Result};
use crate::potentials::PotentialSpec;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid<T> {
    r_max: T,
    n_cells: usize,
    dr: T,
    nodes: Vec<T>,
    inv_nodes: Vec<T>,
}

impl<T: Real> RadialGrid<T> {
    pub const MIN_CELLS: usize = 16;

    pub fn new(r_max: T, n_cells: usize) -> Result<Self> {
        if !(r_max.is_finite() && r_max > T::zero()) {
            return Err(Error::invalid(format!("r_max must be positive, got {r_max}")));
        }
        if n_cells < Self::MIN_CELLS || !n_cells.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "n_cells must be even and >= {}, got {n_cells}",
                Self::MIN_CELLS
            )));
        }
        let dr = r_max / T::from_count(n_cells);
        let nodes: Vec<T> = (0..=n_cells).map(|j| dr * T::from_count(j)).collect();
        let inv_nodes = nodes
            .iter()
            .map(|&r| if r > T::zero() { r.recip() } else { T::zero() })
            .collect();
        Ok(Self {
            r_max,
            n_cells,
            dr,
            nodes,
            inv_nodes,
        })
    }

    #[inline]
    pub fn r_max(&self) -> T {
        self.r_max
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_cells + 1
    }

    #[inline]
    pub fn dr(&self) -> T {
        self.dr
    }

    #[inline]
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// `1 / r_j`, with 0 stored at the origin.
    #[inline]
    pub fn inv_nodes(&self) -> &[T] {
        &self.inv_nodes
    }

    /// Index of the last node with `r_j ≤ r` (clamped to the grid).
    pub fn node_at_or_below(&self, r: T) -> usize {
        if r <= T::zero() {
            return 0;
        }
        let j = (r / self.dr + T::lit(1e-9)).floor();
        j.to_usize().unwrap_or(self.n_cells).min(self.n_cells)
    }

    /// Index of the first node with `r_j ≥ r`, or `None` past `r_max`.
    pub fn node_at_or_above(&self, r: T) -> Option<usize> {
        if r <= T::zero() {
            return Some(0);
        }
        let j = (r / self.dr - T::lit(1e-9)).ceil().to_usize()?;
        (j <= self.n_cells).then_some(j)
    }

    fn check_len(&self, found: usize) -> Result<()> {
        if found == self.len() {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                expected: self.len(),
                found,
            })
        }
    }

    /// Composite Simpson approximation of `∫₀^{r_max}` from nodal samples.
    pub fn integrate(&self, samples: &[T]) -> Result<T> {
        self.check_len(samples.len())?;
        Ok(self.simpson(samples))
    }

    /// Simpson quadrature of `g(r_j)` for a closure, without a temporary.
    pub fn integrate_with(&self, g: impl Fn(usize) -> T) -> T {
        let n = self.n_cells;
        let mut odd = T::zero();
        let mut even = T::zero();
        for j in 1..n {
            if j % 2 == 1 {
                odd = odd + g(j);
            } else {
                even = even + g(j);
            }
        }
        (g(0) + g(n) + T::lit(4.0) * odd + T::lit(2.0) * even) * self.dr / T::lit(3.0)
    }

    pub(crate) fn simpson(&self, samples: &[T]) -> T {
        self.integrate_with(|j| samples[j])
    }

    /// Second-order radial derivative of an even function of `r`.
    ///
    /// Centered differences in the interior, `0` at the origin (reflection
    /// symmetry) and a one-sided three-point formula at `r_max`.
    pub fn radial_derivative(&self, values: &[T]) -> Result<Vec<T>> {
        self.check_len(values.len())?;
        Ok(self.even_derivative(values))
    }

    pub(crate) fn even_derivative(&self, v: &[T]) -> Vec<T> {
        let n = self.n_cells;
        let half = T::lit(0.5) / self.dr;
        let mut d = vec![T::zero(); n + 1];
        for j in 1..n {
            d[j] = (v[j + 1] - v[j - 1]) * half;
        }
        d[n] = (T::lit(3.0) * v[n] - T::lit(4.0) * v[n - 1] + v[n - 2]) * half;
        d
    }
}

/// Per-node weights of the virial functionals.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTables<T> {
    /// `ψ(r) = r²/(1+r)`.
    pub psi: Vec<T>,
    /// `ψ'(r) = r(r+2)/(1+r)²`.
    pub dpsi: Vec<T>,
    /// `ψ''(r) = 2/(1+r)³`.
    pub d2psi: Vec<T>,
    /// `ψ'''(r) = -6/(1+r)⁴`.
    pub d3psi: Vec<T>,
    /// `r²/(1+r)⁴`, the weight of `H¹_w` and `L²_w`.
    pub w_sob: Vec<T>,
    /// `ψ̃(r) = -(3r²+3r+1)/(1+r)³`.
    pub psi_tilde: Vec<T>,
    /// `ψ̃'(r) = 3r²/(1+r)⁴`.
    pub dpsi_tilde: Vec<T>,
    pub r2: Vec<T>,
}

impl<T: Real> WeightTables<T> {
    pub fn new(grid: &RadialGrid<T>) -> Self {
        let one = T::one();
        let map = |g: &dyn Fn(T) -> T| grid.nodes().iter().map(|&r| g(r)).collect::<Vec<T>>();
        Self {
            psi: map(&|r| r * r / (one + r)),
            dpsi: map(&|r| r * (r + T::lit(2.0)) / ((one + r) * (one + r))),
            d2psi: map(&|r| T::lit(2.0) / (one + r).powi(3)),
            d3psi: map(&|r| T::lit(-6.0) / (one + r).powi(4)),
            w_sob: map(&|r| r * r / (one + r).powi(4)),
            psi_tilde: map(&|r| {
                -(T::lit(3.0) * r * r + T::lit(3.0) * r + one) / (one + r).powi(3)
            }),
            dpsi_tilde: map(&|r| T::lit(3.0) * r * r / (one + r).powi(4)),
            r2: map(&|r| r * r),
        }
    }
}

/// `∫₀^{r_max} r²/(1+r)⁴ (φ² + φ_r²) dr`.
pub fn weighted_h1_sq<T: Real>(
    phi: &[T],
    phi_r: &[T],
    grid: &RadialGrid<T>,
    weights: &WeightTables<T>,
) -> Result<T> {
    grid.check_len(phi.len())?;
    grid.check_len(phi_r.len())?;
    Ok(grid.integrate_with(|j| weights.w_sob[j] * (phi[j] * phi[j] + phi_r[j] * phi_r[j])))
}

/// `∫₀^{r_max} r²/(1+r)⁴ φ² dr`.
pub fn weighted_l2_sq<T: Real>(
    phi: &[T],
    grid: &RadialGrid<T>,
    weights: &WeightTables<T>,
) -> Result<T> {
    grid.check_len(phi.len())?;
    Ok(grid.integrate_with(|j| weights.w_sob[j] * phi[j] * phi[j]))
}

// ---------------------------------------------------------------------------
// Energies
//
// Evaluated on u = rφ: since ∫ r²φ_r² dr = ∫ u_r² dr - [u²/r], the energy is
// 4π Σ dr (u_t²/2 + r²F(u/r)) + 4π e^{-2Ht} Σ_{edges} (Δu)²/(2dr).
// This is the discrete energy the semi-discrete scheme conserves (H = 0) or
// dissipates at exactly the discrete rate (H > 0). Partial regions add the
// boundary term ±u(a)²/(2a) so that ball + exterior = total.
// ---------------------------------------------------------------------------

struct EnergyParts<T> {
    nodal: T,
    gradient: T,
}

fn energy_parts<T: Real>(
    state: &FieldState<T>,
    grid: &RadialGrid<T>,
    spec: &PotentialSpec,
    first: usize,
    last: usize,
) -> Result<EnergyParts<T>> {
    let (u, ut) = (state.u(), state.u_t());
    grid.check_len(u.len())?;
    grid.check_len(ut.len())?;
    let half = T::lit(0.5);
    let nodes = grid.nodes();
    let inv = grid.inv_nodes();
    let density = |j: usize| -> Result<T> {
        let r = nodes[j];
        let pot = if j == 0 {
            T::zero()
        } else {
            r * r * spec.potential(u[j] * inv[j])?
        };
        Ok(half * ut[j] * ut[j] + pot)
    };
    let mut nodal = T::zero();
    if last > first {
        for j in first..=last {
            let w = if j == first || j == last { half } else { T::one() };
            nodal = nodal + w * density(j)?;
        }
    }
    nodal = nodal * grid.dr();
    let mut gradient = T::zero();
    for j in first..last {
        let d = u[j + 1] - u[j];
        gradient = gradient + d * d;
    }
    gradient = gradient * half / grid.dr();
    Ok(EnergyParts { nodal, gradient })
}

#[inline]
fn gradient_factor<T: Real>(hubble: T, t: T) -> T {
    (T::lit(-2.0) * hubble * t).exp()
}

/// Total energy `∫_{ℝ³} (φ_t²/2 + |∇φ|²/(2e^{2Ht}) + F(φ))` at `state.t()`.
pub fn energy<T: Real>(
    state: &FieldState<T>,
    hubble: T,
    grid: &RadialGrid<T>,
    spec: &PotentialSpec,
) -> Result<T> {
    let p = energy_parts(state, grid, spec, 0, grid.n_cells())?;
    let g = gradient_factor(hubble, state.t());
    Ok(T::lit(4.0) * T::PI() * (p.nodal + g * p.gradient))
}

/// Energy inside `B(0, R)`, truncated at the last node `r_J ≤ R`.
pub fn ball_energy<T: Real>(
    state: &FieldState<T>,
    hubble: T,
    radius: T,
    grid: &RadialGrid<T>,
    spec: &PotentialSpec,
) -> Result<T> {
    let last = grid.node_at_or_below(radius);
    let p = energy_parts(state, grid, spec, 0, last)?;
    let u = state.u()[last];
    let boundary = if last == 0 {
        T::zero()
    } else {
        T::lit(0.5) * u * u * grid.inv_nodes()[last]
    };
    let g = gradient_factor(hubble, state.t());
    Ok(T::lit(4.0) * T::PI() * (p.nodal + g * (p.gradient - boundary)))
}

/// Energy outside the cone section `|x| > (1+b) t`, starting at the first
/// node at or beyond `(1+b) t`.
pub fn exterior_cone_energy<T: Real>(
    state: &FieldState<T>,
    hubble: T,
    b: T,
    grid: &RadialGrid<T>,
    spec: &PotentialSpec,
) -> Result<T> {
    exterior_energy(state, hubble, (T::one() + b) * state.t(), grid, spec)
}

/// Energy in `|x| ≥ a` (first node at or beyond `a`).
pub fn exterior_energy<T: Real>(
    state: &FieldState<T>,
    hubble: T,
    a: T,
    grid: &RadialGrid<T>,
    spec: &PotentialSpec,
) -> Result<T> {
    grid.check_len(state.u().len())?;
    let Some(first) = grid.node_at_or_above(a) else {
        return Ok(T::zero());
    };
    let p = energy_parts(state, grid, spec, first, grid.n_cells())?;
    let u = state.u()[first];
    let boundary = if first == 0 {
        T::zero()
    } else {
        T::lit(0.5) * u * u * grid.inv_nodes()[first]
    };
    let g = gradient_factor(hubble, state.t());
    Ok(T::lit(4.0) * T::PI() * (p.nodal + g * (p.gradient + boundary)))
}

/// `dE/dt` predicted by the dissipation law,
/// `-H ∫_{ℝ³} (3φ_t² + |∇φ|²/e^{2Ht})`, in the same discretisation as [`energy`].
pub fn energy_dissipation_rate<T: Real>(
    state: &FieldState<T>,
    hubble: T,
    grid: &RadialGrid<T>,
) -> Result<T> {
    let (u, ut) = (state.u(), state.u_t());
    grid.check_len(u.len())?;
    grid.check_len(ut.len())?;
    let kinetic: T = ut.iter().map(|&v| v * v).sum::<T>() * grid.dr();
    let gradient: T = u.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum::<T>() / grid.dr();
    let g = gradient_factor(hubble, state.t());
    Ok(-hubble * T::lit(4.0) * T::PI() * (T::lit(3.0) * kinetic + g * gradient))
}

/// Both sides of the radial Sobolev inequality `sup_r |r φ(r)| ≤ C ‖φ‖_{H¹(ℝ³)}`.
///
/// Returns `(sup_j |r_j φ_j|, ‖φ‖_{H¹(ℝ³)})`, the norm by Simpson quadrature
/// of `4π r² (φ² + φ_r²)`.
pub fn radial_sup_check<T: Real>(phi: &[T], grid: &RadialGrid<T>) -> Result<(T, T)> {
    grid.check_len(phi.len())?;
    let phi_r = grid.even_derivative(phi);
    let nodes = grid.nodes();
    let sup = nodes
        .iter()
        .zip(phi)
        .fold(T::zero(), |m, (&r, &p)| m.max((r * p).abs()));
    let sq = grid.integrate_with(|j| nodes[j] * nodes[j] * (phi[j] * phi[j] + phi_r[j] * phi_r[j]));
    Ok((sup, (T::lit(4.0) * T::PI() * sq).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(r_max: f64, n: usize) -> RadialGrid<f64> {
        RadialGrid::new(r_max, n).unwrap()
    }

    #[test]
    fn construction_rules() {
        assert!(RadialGrid::new(1.0f64, 15).is_err());
        assert!(RadialGrid::new(1.0f64, 18).is_ok());
        assert!(RadialGrid::new(1.0f64, 17).is_err());
        assert!(RadialGrid::new(0.0f64, 32).is_err());
        let g = grid(2.0, 16);
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.nodes()[16], 2.0);
        assert_eq!(g.dr(), 0.125);
    }

    #[test]
    fn simpson_examples() {
        let g = grid(7.5, 32);
        assert!((g.integrate(&vec![1.0; 33]).unwrap() - 7.5).abs() < 1e-13);

        let g = grid(1.0, 64);
        let s: Vec<f64> = g.nodes().iter().map(|r| r * r).collect();
        assert!((g.integrate(&s).unwrap() - 1.0 / 3.0).abs() < 1e-10);

        let g = grid(40.0, 4096);
        let s: Vec<f64> = g.nodes().iter().map(|r| (-r).exp()).collect();
        let exact = 1.0 - (-40.0f64).exp();
        assert!((g.integrate(&s).unwrap() - exact).abs() < 1e-8);
    }

    #[test]
    fn length_mismatch() {
        let g = grid(1.0, 16);
        assert_eq!(
            g.integrate(&[1.0; 5]),
            Err(Error::LengthMismatch {
                expected: 17,
                found: 5
            })
        );
    }

    #[test]
    fn weight_tables_match_closed_forms() {
        let g = grid(30.0, 600);
        let w = WeightTables::new(&g);
        for (j, &r) in g.nodes().iter().enumerate() {
            let exact = r * (r + 2.0) / (1.0 + r).powi(2);
            assert!((w.dpsi[j] - exact).abs() <= 1e-12);
            assert!((w.dpsi_tilde[j] - 3.0 * w.w_sob[j]).abs() <= 1e-12);
        }
        // finite differences of the tabulated ψ, ψ̃ are O(dr²) close to ψ', ψ̃'
        let dpsi_fd = g.even_derivative(&w.psi);
        let dtilde_fd = g.even_derivative(&w.psi_tilde);
        let h2 = g.dr() * g.dr();
        for j in 1..g.n_cells() {
            assert!((dpsi_fd[j] - w.dpsi[j]).abs() <= 2.0 * h2, "j={j}");
            assert!((dtilde_fd[j] - w.dpsi_tilde[j]).abs() <= 2.0 * h2, "j={j}");
        }
    }

    #[test]
    fn weighted_norms() {
        let g = grid(400.0, 40_000);
        let w = WeightTables::new(&g);
        let zero = vec![0.0; g.len()];
        assert_eq!(weighted_h1_sq(&zero, &zero, &g, &w).unwrap(), 0.0);
        // ∫₀^∞ r²/(1+r)⁴ dr = 1/3; the tail beyond R is 1/R + O(R⁻²).
        let one = vec![1.0; g.len()];
        let v = weighted_l2_sq(&one, &g, &w).unwrap();
        let tail = {
            let s: f64 = 401.0;
            1.0 / s - 1.0 / s.powi(2) + 1.0 / (3.0 * s.powi(3))
        };
        assert!((v + tail - 1.0 / 3.0).abs() < 1e-8, "{v}");

        let phi: Vec<f64> = g.nodes().iter().map(|r| (-r).exp() * (1.0 + r).sin()).collect();
        let dphi = g.even_derivative(&phi);
        let l2 = weighted_l2_sq(&phi, &g, &w).unwrap();
        let h1 = weighted_h1_sq(&phi, &dphi, &g, &w).unwrap();
        assert!(l2 <= h1);
        let scaled: Vec<f64> = phi.iter().map(|p| -3.0 * p).collect();
        let l2s = weighted_l2_sq(&scaled, &g, &w).unwrap();
        assert!((l2s - 9.0 * l2).abs() <= 1e-14 * l2s);
    }

    #[test]
    fn sobolev_check_zero() {
        let g = grid(10.0, 100);
        assert_eq!(radial_sup_check(&vec![0.0; 101], &g).unwrap(), (0.0, 0.0));
    }
}
