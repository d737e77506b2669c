use std::f64::consts::PI;

use proptest::prelude::*;

use inflaton::experiments::Profile;
use inflaton::grid::{
    ball_energy, energy, exterior_energy, radial_sup_check, weighted_h1_sq, RadialGrid,
};
use inflaton::potentials::{catalogue, dbrane_virial_closed_form};
use inflaton::virials::{virial_i, virial_p, virial_r, weighted_energy_w};
use inflaton::{Grid, PotentialSpec, State, Weights};

fn potentials() -> impl Strategy<Value = PotentialSpec> {
    let mut all = catalogue();
    all.push(PotentialSpec::free());
    prop::sample::select(all)
}

fn bump() -> impl Strategy<Value = Profile> {
    (-3.0..3.0f64, 0.5..5.0f64, any::<bool>(), 0.0..4.0f64, 0.5..2.0f64).prop_map(
        |(amplitude, width, centred, offset, steepness)| Profile::Bump {
            amplitude,
            center: if centred { 0.0 } else { width + offset },
            width,
            steepness,
        },
    )
}

fn state(grid: &Grid, phi: Profile, phi_t: Profile) -> State {
    State::from_fields(grid, |r| phi.value(r), |r| phi_t.value(r)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn force_is_derivative_of_potential(p in potentials(), x in -5.0..5.0f64) {
        // keep the D-brane away from its pole at v = -1
        let s = match p.domain_lower_bound() {
            Some(lb) => x.max(lb + 0.5),
            None => x,
        };
        let h = 1e-5;
        let fd = (p.potential(s + h).unwrap() - p.potential(s - h).unwrap()) / (2.0 * h);
        let f = p.force(s).unwrap();
        prop_assert!((fd - f).abs() <= 1e-6 * (1.0 + f.abs()), "{p} s={s}: {fd} vs {f}");
        let fd = (p.force(s + h).unwrap() - p.force(s - h).unwrap()) / (2.0 * h);
        let fp = p.force_prime(s).unwrap();
        prop_assert!((fd - fp).abs() <= 1e-6 * (1.0 + fp.abs()), "{p} s={s}: {fd} vs {fp}");
    }

    #[test]
    fn dbrane_closed_form_matches_definition(n in 1u32..=2, v in -0.95..10.0f64) {
        let p: PotentialSpec = format!("dbrane{n}").parse().unwrap();
        let direct = p.virial_defect(v).unwrap();
        let closed = dbrane_virial_closed_form(n, v).unwrap();
        let scale = 1.0 + p.potential(v).unwrap().abs() + (v * p.force(v).unwrap()).abs();
        prop_assert!((direct - closed).abs() <= 1e-10 * scale, "{direct} vs {closed}");
    }

    #[test]
    fn simpson_is_linear_and_monotone(
        xs in prop::collection::vec(-10.0..10.0f64, 65),
        ys in prop::collection::vec(0.0..10.0f64, 65),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
    ) {
        let g = RadialGrid::new(3.0, 64).unwrap();
        let combo: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| a * x + b * y).collect();
        let lhs = g.integrate(&combo).unwrap();
        let rhs = a * g.integrate(&xs).unwrap() + b * g.integrate(&ys).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs() + rhs.abs()));
        let shifted: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| x + y).collect();
        prop_assert!(g.integrate(&shifted).unwrap() >= g.integrate(&xs).unwrap() - 1e-12);
    }

    #[test]
    fn quadratic_functionals_scale(phi in bump(), phi_t in bump(), c in -4.0..4.0f64) {
        let g = Grid::new(16.0, 256).unwrap();
        let w = Weights::new(&g);
        let free = PotentialSpec::free();
        let s1 = state(&g, phi, phi_t);
        let sc = state(&g, phi.with_amplitude(c * phi.amplitude()), phi_t.with_amplitude(c * phi_t.amplitude()));
        let (p1, pc) = (s1.profiles(&g), sc.profiles(&g));
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-11 * (x.abs() + y.abs() + 1e-300);
        prop_assert!(close(weighted_energy_w(&pc, &g, &w).unwrap(), c * c * weighted_energy_w(&p1, &g, &w).unwrap()));
        prop_assert!(close(weighted_h1_sq(&pc.phi, &pc.phi_r, &g, &w).unwrap(), c * c * weighted_h1_sq(&p1.phi, &p1.phi_r, &g, &w).unwrap()));
        prop_assert!(close(energy(&sc, 0.4, &g, &free).unwrap(), c * c * energy(&s1, 0.4, &g, &free).unwrap()));
        prop_assert!(close(virial_i(&pc, &g, &w).unwrap(), c * c * virial_i(&p1, &g, &w).unwrap()));
    }

    #[test]
    fn i_is_p_plus_half_r(phi in bump(), phi_t in bump()) {
        let g = Grid::new(16.0, 256).unwrap();
        let w = Weights::new(&g);
        let p = state(&g, phi, phi_t).profiles(&g);
        let (vp, vr, vi) = (virial_p(&p, &g, &w).unwrap(), virial_r(&p, &g, &w).unwrap(), virial_i(&p, &g, &w).unwrap());
        prop_assert!((vi - (vp + 0.5 * vr)).abs() <= 16.0 * f64::EPSILON * (vp.abs() + vr.abs()) + 1e-300);
    }

    #[test]
    fn ball_and_exterior_partition_energy(phi in bump(), phi_t in bump(), k in 1usize..255, h in 0.0..2.0f64, t in 0.0..3.0f64) {
        let g = Grid::new(16.0, 256).unwrap();
        let t1: PotentialSpec = "T1".parse().unwrap();
        let s0 = state(&g, phi, phi_t);
        let s = State::from_u(&g, t, s0.u().to_vec(), s0.u_t().to_vec()).unwrap();
        let radius = g.nodes()[k];
        let e = energy(&s, h, &g, &t1).unwrap();
        let b = ball_energy(&s, h, radius, &g, &t1).unwrap();
        let x = exterior_energy(&s, h, radius, &g, &t1).unwrap();
        prop_assert!((b + x - e).abs() <= 1e-12 * e.abs() + 1e-300);
        prop_assert!(b >= 0.0 && x >= -1e-15 * e);
    }

    #[test]
    fn radial_sobolev_bound(phi in bump()) {
        let g = Grid::new(16.0, 1024).unwrap();
        let values: Vec<f64> = g.nodes().iter().map(|&r| phi.value(r)).collect();
        let (sup, norm) = radial_sup_check(&values, &g).unwrap();
        prop_assert!(sup <= norm / (4.0 * PI).sqrt());
    }

    #[test]
    fn single_precision_tracks_double(phi in bump(), phi_t in bump()) {
        let g64 = Grid::new(16.0, 256).unwrap();
        let g32 = RadialGrid::<f32>::new(16.0, 256).unwrap();
        let t1: PotentialSpec = "T1".parse().unwrap();
        let s64 = state(&g64, phi, phi_t);
        let s32 = inflaton::dynamics::FieldState::<f32>::from_fields(
            &g32,
            |r| phi.value(r as f64) as f32,
            |r| phi_t.value(r as f64) as f32,
        )
        .unwrap();
        let e64 = energy(&s64, 0.0, &g64, &t1).unwrap();
        let e32 = energy(&s32, 0.0, &g32, &t1).unwrap() as f64;
        prop_assert!((e64 - e32).abs() <= 1e-4 * e64.abs() + 1e-6, "{e64} vs {e32}");
    }
}
