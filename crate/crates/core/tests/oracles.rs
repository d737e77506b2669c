//! Diagnostics checked against values computed independently here: closed
//! forms, or fine composite Simpson sums of the analytic integrands.

use std::f64::consts::PI;

use inflaton::dynamics::{evolve, FieldState, SolverConfig};
use inflaton::experiments::{rate_mismatch, GridParams, Profile, Protocol, Scenario};
use inflaton::grid::{ball_energy, energy, exterior_cone_energy, exterior_energy};
use inflaton::potentials::{quartic_flatness_constant, FlatnessConstant, FlatnessViolation};
use inflaton::virials::*;
use inflaton::{Fields, Grid, PotentialSpec, State, Weights};

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for k in 1..m {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + h * k as f64);
    }
    s * h / 3.0
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn spec(name: &str) -> PotentialSpec {
    name.parse().unwrap()
}

// φ = A e^{-r²}
fn g(a: f64, r: f64) -> f64 {
    a * (-r * r).exp()
}
fn g_r(a: f64, r: f64) -> f64 {
    -2.0 * r * g(a, r)
}
fn g_lap(a: f64, r: f64) -> f64 {
    (4.0 * r * r - 6.0) * g(a, r)
}

fn psi(r: f64) -> f64 {
    r * r / (1.0 + r)
}
fn dpsi(r: f64) -> f64 {
    r * (r + 2.0) / ((1.0 + r) * (1.0 + r))
}
fn wsob(r: f64) -> f64 {
    r * r / (1.0 + r).powi(4)
}

#[test]
fn gaussian_energy_closed_form_second_order() {
    // E = 4π ∫ r² (2r e^{-r²})² / 2 = 3 π^{3/2} / 2^{5/2}
    let exact = 3.0 * PI.powf(1.5) / 2f64.powf(2.5);
    let err = |n: usize| {
        let grid = Grid::new(10.0, n).unwrap();
        let s = State::from_fields(&grid, |r| g(1.0, r), |_| 0.0).unwrap();
        rel(energy(&s, 0.0, &grid, &PotentialSpec::free()).unwrap(), exact)
    };
    let (e1, e2) = (err(1024), err(2048));
    assert!(e2 < 2e-5, "{e2}");
    assert!(e1 / e2 > 3.5, "ratio {}", e1 / e2);

    // kinetic only: 4π ∫ r² e^{-2r²} / 2 = π^{3/2} / (4√2)
    let grid = Grid::new(10.0, 1024).unwrap();
    let s = State::from_fields(&grid, |_| 0.0, |r| g(1.0, r)).unwrap();
    let e = energy(&s, 0.0, &grid, &PotentialSpec::free()).unwrap();
    assert!(rel(e, PI.powf(1.5) / (4.0 * 2f64.sqrt())) < 1e-12);
}

#[test]
fn gradient_energy_scales_with_expansion() {
    let grid = Grid::new(10.0, 512).unwrap();
    let s0 = State::from_fields(&grid, |r| g(1.0, r), |_| 0.0).unwrap();
    let free = PotentialSpec::free();
    let e0 = energy(&s0, 0.0, &grid, &free).unwrap();
    let later = State::from_u(&grid, 7.0, s0.u().to_vec(), s0.u_t().to_vec()).unwrap();
    assert_eq!(energy(&later, 0.0, &grid, &free).unwrap(), e0);
    let h = 0.3;
    let scaled = energy(&later, h, &grid, &free).unwrap();
    assert!(rel(scaled, e0 * (-2.0 * h * 7.0f64).exp()) < 1e-13);
}

fn mixed_state(grid: &Grid, t: f64) -> State {
    let s = State::from_fields(grid, |r| g(1.5, r / 2.0), |r| 0.5 * (1.0 - r * r / 4.0) * g(1.0, r / 2.0))
        .unwrap();
    State::from_u(grid, t, s.u().to_vec(), s.u_t().to_vec()).unwrap()
}

#[test]
fn ball_energy_against_fine_quadrature() {
    let (h, t, radius): (f64, f64, f64) = (0.3, 0.7, 3.0);
    let t1 = spec("T1");
    let phi = |r: f64| g(1.5, r / 2.0);
    let phi_r = |r: f64| 0.5 * g_r(1.5, r / 2.0);
    let phi_t = |r: f64| 0.5 * (1.0 - r * r / 4.0) * g(1.0, r / 2.0);
    let decay = (-2.0 * h * t).exp();
    let density = |r: f64| {
        4.0 * PI
            * r
            * r
            * (0.5 * phi_t(r).powi(2) + 0.5 * decay * phi_r(r).powi(2) + t1.potential(phi(r)).unwrap())
    };
    let oracle_ball = simpson(density, 0.0, radius, 16_384);
    let oracle_total = simpson(density, 0.0, 24.0, 131_072);
    let err = |n: usize| {
        let grid = Grid::new(24.0, n).unwrap();
        let s = mixed_state(&grid, t);
        let b = ball_energy(&s, h, radius, &grid, &t1).unwrap();
        let e = energy(&s, h, &grid, &t1).unwrap();
        let x = exterior_energy(&s, h, radius, &grid, &t1).unwrap();
        assert!(rel(b + x, e) < 1e-13);
        (rel(b, oracle_ball), rel(e, oracle_total))
    };
    let (b1, e1) = err(2048);
    let (b2, e2) = err(4096);
    assert!(b2 < 1e-5 && e2 < 1e-5, "{b2} {e2}");
    assert!(b1 / b2 > 3.5 && e1 / e2 > 3.5, "{} {}", b1 / b2, e1 / e2);
}

#[test]
fn region_energies_limits() {
    let grid = Grid::new(24.0, 512).unwrap();
    let t1 = spec("T1");
    let s0 = mixed_state(&grid, 0.0);
    let e = energy(&s0, 0.5, &grid, &t1).unwrap();
    assert!(rel(ball_energy(&s0, 0.5, 30.0, &grid, &t1).unwrap(), e) < 1e-14);
    assert!(rel(exterior_energy(&s0, 0.5, 0.0, &grid, &t1).unwrap(), e) < 1e-14);
    assert!(rel(exterior_cone_energy(&s0, 0.5, 2.0, &grid, &t1).unwrap(), e) < 1e-14);
    let late = mixed_state(&grid, 8.1);
    assert_eq!(exterior_cone_energy(&late, 0.5, 2.0, &grid, &t1).unwrap(), 0.0);
}

struct Fixture {
    grid: Grid,
    w: Weights,
    p: Fields,
}

fn fixture(n: usize, a: f64, b: f64) -> Fixture {
    let grid = Grid::new(12.0, n).unwrap();
    let w = Weights::new(&grid);
    let p = State::from_fields(&grid, |r| g(a, r), |r| g(b, r)).unwrap().profiles(&grid);
    Fixture { grid, w, p }
}

fn second_order(errs: [f64; 2], tol: f64, what: &str) {
    assert!(errs[1] < tol, "{what}: {errs:?}");
    // errors at roundoff level carry no order information
    assert!(errs[1] < 1e-12 || errs[0] / errs[1] > 3.5, "{what}: {errs:?}");
}

#[test]
fn virial_functionals_against_fine_quadrature() {
    let (a, b) = (1.2, 0.7);
    let q = |f: &dyn Fn(f64) -> f64| simpson(f, 0.0, 12.0, 65_536);
    let p_exact = q(&|r| psi(r) * g_r(a, r) * g(b, r));
    let r_exact = q(&|r| dpsi(r) * g(a, r) * g(b, r));
    let rt_exact = q(&|r| wsob(r) * g(a, r) * g(b, r));
    let w_exact = q(&|r| wsob(r) * (g(a, r).powi(2) + g_r(a, r).powi(2) + g(b, r).powi(2)));
    let mut errs = [[0.0; 4]; 2];
    for (k, n) in [1024, 2048].into_iter().enumerate() {
        let f = fixture(n, a, b);
        errs[k] = [
            rel(virial_p(&f.p, &f.grid, &f.w).unwrap(), p_exact),
            rel(virial_r(&f.p, &f.grid, &f.w).unwrap(), r_exact),
            rel(virial_r_tilde(&f.p, &f.grid, &f.w).unwrap(), rt_exact),
            rel(weighted_energy_w(&f.p, &f.grid, &f.w).unwrap(), w_exact),
        ];
    }
    for (i, name) in ["P", "R", "R~", "W"].iter().enumerate() {
        second_order([errs[0][i], errs[1][i]], 5e-5, name);
    }
}

/// At rest (`φ_t = 0`, `H = 0`) every rate reduces to `∫ weight · φ_tt`
/// with `φ_tt = Δφ - f(φ)`.
#[test]
fn rates_at_rest_match_acceleration_integrals() {
    let a = 1.3;
    let t1 = spec("T1");
    let acc = |r: f64| g_lap(a, r) - t1.force(g(a, r)).unwrap();
    let q = |f: &dyn Fn(f64) -> f64| simpson(f, 0.0, 12.0, 65_536);
    let dp = q(&|r| psi(r) * g_r(a, r) * acc(r));
    let dr = q(&|r| dpsi(r) * g(a, r) * acc(r));
    let di = dp + 0.5 * dr;
    let drt = q(&|r| wsob(r) * g(a, r) * acc(r));

    let mut errs = [[0.0; 5]; 2];
    for (k, n) in [1024, 2048].into_iter().enumerate() {
        let f = fixture(n, a, 0.0);
        let (p, grid, w) = (&f.p, &f.grid, &f.w);
        errs[k] = [
            rel(virial_p_rate(p, &t1, grid, w).unwrap(), dp),
            rel(virial_p_rate_closed(p, &t1, grid, w).unwrap(), dp),
            rel(virial_r_rate_exact(p, &t1, grid, w).unwrap(), dr),
            rel(virial_i_rate_exact(p, &t1, grid, w).unwrap(), di),
            rel(virial_r_tilde_rate_exact(p, &t1, grid, w).unwrap(), drt),
        ];
    }
    for (i, name) in ["dP", "dP closed", "dR", "dI", "dR~"].iter().enumerate() {
        second_order([errs[0][i], errs[1][i]], 1e-4, name);
    }

    // The forms without the origin terms are off by O(1) amounts.
    let f = fixture(2048, a, 0.0);
    let (p, grid, w) = (&f.p, &f.grid, &f.w);
    let i_gap = virial_i_rate(p, &t1, grid, w).unwrap() - di;
    assert!((i_gap - 0.5 * a * a).abs() < 1e-3 * a * a, "{i_gap}");
    let r_gap = virial_r_rate(p, &t1, grid, w).unwrap() - dr;
    assert!((r_gap - a * a).abs() < 1e-3 * a * a, "{r_gap}");
    let rt_gap = virial_r_tilde_rate(p, &t1, grid, w).unwrap() - drt;
    let rt_weight = q(&|r| r * (3.0 * r - 2.0) / (1.0 + r).powi(6) * g(a, r).powi(2));
    assert!(rel(rt_gap, rt_weight) < 1e-4, "{rt_gap} vs {rt_weight}");
}

#[test]
fn j_with_saturated_weight_is_twice_energy() {
    let grid = Grid::new(24.0, 2048).unwrap();
    let w = Weights::new(&grid);
    let t1 = spec("T1");
    let s = mixed_state(&grid, 0.4);
    let p = s.profiles(&grid);
    let weight = ConeWeight { sigma: 0.0, b: 60.0 };
    let j = virial_j(&p, 0.2, weight, &t1, &grid, &w).unwrap();
    let e = energy(&s, 0.2, &grid, &t1).unwrap();
    assert!(rel(j, 2.0 * e / (4.0 * PI)) < 1e-5);
    assert!(virial_j_bound(&p, 0.2, weight, &t1, &grid, &w).unwrap().abs() < 1e-30);
}

#[test]
fn weighted_energy_controls_local_energy() {
    for (a, b, radius) in [(1.0, 0.5, 2.0), (0.3, 2.0, 5.0), (2.0, 0.0, 1.0)] {
        let f = fixture(1024, a, b);
        let wv = weighted_energy_w(&f.p, &f.grid, &f.w).unwrap();
        let local = simpson(
            |r| 4.0 * PI * r * r * (g(a, r).powi(2) + g_r(a, r).powi(2) + g(b, r).powi(2)),
            0.0,
            radius,
            8192,
        );
        assert!(local <= 4.0 * PI * (1.0 + radius).powi(4) * wv);
    }
}

#[test]
fn j_rate_matches_time_derivative() {
    let s = Scenario {
        name: "j".into(),
        potential: spec("T1"),
        hubble: 0.5,
        protocol: Protocol::Exploratory,
        initial: inflaton::experiments::InitialData {
            phi: Profile::bump(0.8, 0.0, 4.0),
            phi_t: Profile::Zero,
        },
        grid: GridParams {
            n_cells: 1024,
            r_max: None,
        },
        t_end: 4.0,
        cfl: 0.5,
        dt: None,
        output_interval: 0.0125,
        decay_radius: 10.0,
        cone_b: 2.0,
        cone_sigma: None,
        thresholds: Default::default(),
    };
    let r = inflaton::experiments::run_scenario(&s).unwrap();
    let ts: Vec<f64> = r.records.iter().map(|x| x.t).collect();
    let j: Vec<f64> = r.records.iter().map(|x| x.J).collect();
    let jr: Vec<f64> = r.records.iter().map(|x| x.J_rate).collect();
    let e: Vec<f64> = r.records.iter().map(|x| x.E).collect();
    let er: Vec<f64> = r.records.iter().map(|x| x.dissipation_rate).collect();
    assert!(rate_mismatch(&ts, &j, &jr).unwrap() < 1e-3);
    assert!(rate_mismatch(&ts, &e, &er).unwrap() < 1e-6);
    for x in &r.records {
        assert!(x.J_rate <= x.J_bound + 1e-12 * x.J.abs());
    }
}

#[test]
fn e1_flatness_ratio_diverges_like_inverse_square() {
    let e1 = spec("E1");
    // s f(s) / s⁴ ~ 2/s² as s → 0
    let ratio = |s: f64| s * e1.force(s).unwrap() / s.powi(4);
    for k in 2..7 {
        let s = 10f64.powi(-k);
        assert!(rel(ratio(s) * s * s, 2.0) < 10.0 * s, "k={k}");
    }
    assert_eq!(
        quartic_flatness_constant(&e1, 1.0, 1000).unwrap(),
        FlatnessConstant::Violated(FlatnessViolation::Unbounded)
    );
}

#[test]
fn linear_wave_energy_conserved_by_rk4() {
    let grid = Grid::new(40.0, 1024).unwrap();
    let b = Profile::bump(1.0, 0.0, 5.0);
    let s = State::from_fields(&grid, |r| b.value(r), |_| 0.0).unwrap();
    let free = PotentialSpec::free();
    let e0 = energy(&s, 0.0, &grid, &free).unwrap();
    let cfg = SolverConfig::with_cfl(&grid, 0.0, 0.5, 20.0, 1);
    let mut worst: f64 = 0.0;
    evolve(s, &cfg, &free, &grid, |st: &FieldState<f64>| {
        worst = worst.max(rel(energy(st, 0.0, &grid, &free).unwrap(), e0));
    })
    .unwrap();
    assert!(worst < 1e-6, "{worst}");
}
