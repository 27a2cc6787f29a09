use coopsurface::bands::{gamma_tilde, LatticeResponse, SumConfig, ZeemanField};
use coopsurface::greens::green_real;
use coopsurface::lattice::{Lattice, LatticeKind};
use coopsurface::realspace::{power_balance, solve_positions, DriveSpec, SolverOptions};
use coopsurface::scattering::{jones, jones_square_closed_form, reflection, JonesMatrix};
use coopsurface::C64;
use proptest::prelude::*;
use std::sync::OnceLock;

const SPACINGS: [f64; 6] = [0.2, 0.35, 0.5, 0.65, 0.8, 0.9];

/// Normal-incidence responses, one lattice sum per spacing.
fn responses() -> &'static [LatticeResponse] {
    static R: OnceLock<Vec<LatticeResponse>> = OnceLock::new();
    R.get_or_init(|| {
        SPACINGS
            .iter()
            .map(|&a| LatticeResponse::new(&Lattice::square(a).unwrap(), [0.0, 0.0], &SumConfig::default()).unwrap())
            .collect()
    })
}

fn field() -> impl Strategy<Value = ZeemanField> {
    (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y, z)| ZeemanField::new(x, y, z))
}

fn cplx() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| C64::new(a, b))
}

fn out_power(t: &JonesMatrix, e: [C64; 2]) -> f64 {
    t.apply(e).iter().map(|z| z.norm_sqr()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transmission_is_passive(k in 0..SPACINGS.len(), delta in -10.0..10.0f64, b in field()) {
        let t = jones(&responses()[k], delta, b).unwrap();
        prop_assert!(t.spectral_norm() <= 1.0 + 1e-9);
    }

    #[test]
    fn reflected_and_transmitted_power_add_to_one(
        k in 0..SPACINGS.len(), delta in -10.0..10.0f64, b in field(), ex in cplx(), ey in cplx(),
    ) {
        let n = (ex.norm_sqr() + ey.norm_sqr()).sqrt();
        prop_assume!(n > 1e-3);
        let e = [ex / n, ey / n];
        let r = &responses()[k];
        let total = out_power(&jones(r, delta, b).unwrap(), e) + out_power(&reflection(r, delta, b).unwrap(), e);
        prop_assert!((total - 1.0).abs() < 1e-9, "total {}", total);
    }

    #[test]
    fn closed_form_agrees_with_inverse(k in 0..SPACINGS.len(), delta in -10.0..10.0f64, bx in -10.0..10.0f64) {
        let r = &responses()[k];
        let full = jones(r, delta, ZeemanField::new(bx, 0.0, 0.0)).unwrap();
        let closed = jones_square_closed_form(r, delta, bx).unwrap();
        prop_assert!(full.distance(&closed) < 1e-10);
    }

    #[test]
    fn transmission_is_symmetric_without_field(k in 0..SPACINGS.len(), delta in -10.0..10.0f64) {
        let t = jones(&responses()[k], delta, ZeemanField::default()).unwrap();
        prop_assert!(t.distance(&t.transpose()) < 1e-12);
    }

    #[test]
    fn field_reversal_transposes_transmission(k in 0..SPACINGS.len(), delta in -10.0..10.0f64, b in field()) {
        let r = &responses()[k];
        let rev = ZeemanField::new(-b.0[0], -b.0[1], -b.0[2]);
        let t = jones(r, delta, b).unwrap();
        prop_assert!(t.transpose().distance(&jones(r, delta, rev).unwrap()) < 1e-10);
    }

    #[test]
    fn diagonal_mirror_swaps_polarisations(k in 0..SPACINGS.len(), delta in -10.0..10.0f64, b in field()) {
        // The mirror x ↔ y maps the axial field (bx, by, bz) to −(by, bx, bz).
        let r = &responses()[k];
        let mirrored = ZeemanField::new(-b.0[1], -b.0[0], -b.0[2]);
        let t = jones(r, delta, b).unwrap();
        prop_assert!(t.swap_xy().distance(&jones(r, delta, mirrored).unwrap()) < 1e-10);
    }

    #[test]
    fn single_band_phase_law(k in 0..SPACINGS.len(), delta in -10.0..10.0f64) {
        let r = &responses()[k];
        let x = r.omega[(0, 0)].re - delta;
        let g = 0.5 * r.gamma[(0, 0)].re;
        prop_assume!(x.abs() > 1e-6);
        let txx = jones(r, delta, ZeemanField::default()).unwrap().0[0][0];
        let phi = (g / x).atan();
        prop_assert!((txx.arg() - phi).abs() < 1e-10);
        prop_assert!((txx.norm_sqr() - phi.cos().powi(2)).abs() < 1e-10);
    }

    #[test]
    fn green_tensor_is_reciprocal(x in -3.0..3.0f64, y in -3.0..3.0f64, z in -3.0..3.0f64) {
        prop_assume!((x * x + y * y + z * z).sqrt() > 0.05);
        let g = green_real([x, y, z]).unwrap();
        let h = green_real([-x, -y, -z]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s = g.0[i][j].norm().max(1.0);
                prop_assert!((g.0[i][j] - g.0[j][i]).norm() < 1e-12 * s);
                prop_assert!((g.0[i][j] - h.0[i][j]).norm() < 1e-12 * s);
            }
        }
    }

    #[test]
    fn collective_decay_is_positive_semidefinite(
        kind in prop_oneof![Just(LatticeKind::Square), Just(LatticeKind::Triangular), Just(LatticeKind::Honeycomb)],
        a in 0.2..1.5f64,
        qx in -6.0..6.0f64,
        qy in -6.0..6.0f64,
        v in proptest::collection::vec(cplx(), 6),
    ) {
        prop_assume!(qx.hypot(qy) < 6.2);
        let lat = Lattice::new(kind, a).unwrap();
        let Ok(g) = gamma_tilde(&lat, [qx, qy]) else { return Ok(()) };
        let n = g.nrows();
        let mut quad = C64::ZERO;
        for i in 0..n {
            for j in 0..n {
                prop_assert!((g[(i, j)] - g[(j, i)].conj()).norm() < 1e-10);
                quad += v[i].conj() * g[(i, j)] * v[j];
            }
        }
        prop_assert!(quad.re >= -1e-10, "v†Γv = {}", quad);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn finite_arrays_obey_the_optical_theorem(
        jitter in proptest::collection::vec((-0.1..0.1f64, -0.1..0.1f64, -0.1..0.1f64), 9),
        a in 0.3..1.2f64,
        delta in -5.0..5.0f64,
        b in field(),
        ex in cplx(),
        ey in cplx(),
        kx in -4.0..4.0f64,
    ) {
        prop_assume!(ex.norm() + ey.norm() > 1e-2);
        let pos: Vec<[f64; 3]> = jitter
            .iter()
            .enumerate()
            .map(|(k, d)| [(k % 3) as f64 * a + d.0, (k / 3) as f64 * a + d.1, d.2])
            .collect();
        let drive = DriveSpec { delta, eta: [ex, ey], k_par: [kx, 0.0], field: b };
        let st = solve_positions(&pos, &drive, &SolverOptions::default()).unwrap();
        prop_assert!(power_balance(&st, &drive).relative_error() < 1e-8);
    }
}
