//! Independent reference computations checked against the library.

#![allow(clippy::needless_range_loop)]

use coopsurface::bands::{band_structure, SumConfig, ZeemanField};
use coopsurface::exec::{self, Mode};
use coopsurface::greens::{coupling_pair, green_fourier, green_real};
use coopsurface::lattice::{bz_path, make_emitter_set, Lattice};
use coopsurface::realspace::{
    disordered_bands, reflectivity, solve_linear, thermal_ensemble, DisorderSpec, DriveSpec, SolverOptions,
};
use coopsurface::{Tensor3, Vec3, C64};
use std::f64::consts::PI;

const K: f64 = 2.0 * PI;

fn scalar_green(r: Vec3) -> C64 {
    let d = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    C64::from_polar(1.0 / (4.0 * PI * d), K * d)
}

/// `(𝟙 + ∇∇/k²) e^{ikR}/4πR` by central differences.
fn green_fd(r: Vec3) -> [[C64; 3]; 3] {
    let h = 1e-3 * (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt().min(0.1);
    let at = |di: [f64; 3]| scalar_green([r[0] + di[0], r[1] + di[1], r[2] + di[2]]);
    let unit = |i: usize, s: f64| {
        let mut v = [0.0; 3];
        v[i] = s;
        v
    };
    let add = |a: [f64; 3], b: [f64; 3]| [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
    let g0 = at([0.0; 3]);
    let mut out = [[C64::ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let d2 = if i == j {
                (at(unit(i, h)) - 2.0 * g0 + at(unit(i, -h))) / (h * h)
            } else {
                (at(add(unit(i, h), unit(j, h))) - at(add(unit(i, h), unit(j, -h))) - at(add(unit(i, -h), unit(j, h)))
                    + at(add(unit(i, -h), unit(j, -h))))
                    / (4.0 * h * h)
            };
            out[i][j] = d2 / (K * K) + if i == j { g0 } else { C64::ZERO };
        }
    }
    out
}

fn max_diff(a: &Tensor3, b: &[[C64; 3]; 3]) -> (f64, f64) {
    let mut d = 0.0f64;
    let mut m = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            d = d.max((a.0[i][j] - b[i][j]).norm());
            m = m.max(b[i][j].norm());
        }
    }
    (d, m)
}

#[test]
fn green_matches_finite_differences() {
    for r in [[0.3, 0.0, 0.0], [0.21, -0.4, 0.13], [1.7, 0.9, -0.6], [0.05, 0.02, 0.0], [0.0, 0.0, 3.3]] {
        let (d, m) = max_diff(&green_real(r).unwrap(), &green_fd(r));
        assert!(d < 1e-6 * m, "r = {r:?}: difference {d:e} against scale {m:e}");
    }
}

#[test]
fn couplings_follow_from_the_green_tensor() {
    for r in [[0.4, 0.0, 0.0], [0.3, 0.5, 0.0], [-0.8, 0.2, 0.7]] {
        let g = green_fd(r);
        let c = coupling_pair(r);
        for i in 0..3 {
            for j in 0..3 {
                assert!((c.omega.0[i][j].re + 1.5 * g[i][j].re).abs() < 1e-6);
                assert!((c.gamma.0[i][j].re - 3.0 * g[i][j].im).abs() < 1e-6);
                assert_eq!(c.omega.0[i][j].im, 0.0);
            }
        }
    }
    // Γ is continuous onto the single-emitter self term.
    let near = coupling_pair([1e-4, 0.0, 0.0]).gamma;
    let self_term = coupling_pair([0.0; 3]).gamma;
    for i in 0..3 {
        for j in 0..3 {
            assert!((near.0[i][j] - self_term.0[i][j]).norm() < 1e-6);
        }
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// `∫ f(t) dt` over [lo, hi] with `panels` Gauss–Legendre panels.
fn quad(lo: f64, hi: f64, panels: usize, f: impl Fn(f64) -> [[C64; 3]; 3]) -> [[C64; 3]; 3] {
    let gl = gauss_legendre(8);
    let w = (hi - lo) / panels as f64;
    let mut acc = [[C64::ZERO; 3]; 3];
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * w;
        for &(x, wt) in &gl {
            let v = f(mid + 0.5 * w * x);
            for i in 0..3 {
                for j in 0..3 {
                    acc[i][j] += v[i][j] * (0.5 * w * wt);
                }
            }
        }
    }
    acc
}

/// `∫d²q Ḡ(q, Z) e^{iq·ρ}` in polar coordinates, split at the light cone.
fn weyl_integral(r: Vec3) -> [[C64; 3]; 3] {
    let nphi = 128;
    let ring = |q: f64, jac: f64| {
        let mut acc = [[C64::ZERO; 3]; 3];
        for k in 0..nphi {
            let phi = 2.0 * PI * k as f64 / nphi as f64;
            let qv = [q * phi.cos(), q * phi.sin()];
            let g = green_fourier(qv, r[2]).unwrap();
            let ph = C64::from_polar(jac * 2.0 * PI / nphi as f64, qv[0] * r[0] + qv[1] * r[1]);
            for i in 0..3 {
                for j in 0..3 {
                    acc[i][j] += g.0[i][j] * ph;
                }
            }
        }
        acc
    };
    // Propagating: q = √(k² − kz²), q dq = kz dkz.
    let prop = quad(0.0, K, 40, |kz| ring((K * K - kz * kz).sqrt(), kz));
    // Evanescent: q = √(k² + κ²), q dq = κ dκ, cut where e^{−κ|Z|} < e^{−40}.
    let kmax = 40.0 / r[2].abs();
    let evan = quad(0.0, kmax, 200, |ka| ring((K * K + ka * ka).sqrt(), ka));
    let mut out = prop;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] += evan[i][j];
        }
    }
    out
}

#[test]
fn plane_wave_expansion_reproduces_the_green_tensor() {
    for r in [[0.3, 0.2, 0.6], [0.0, 0.0, 0.8], [-0.25, 0.4, -0.7]] {
        let (d, m) = max_diff(&green_real(r).unwrap(), &weyl_integral(r));
        assert!(d < 1e-6 * m, "r = {r:?}: difference {d:e} against scale {m:e}");
    }
}

/// A honeycomb as a triangular lattice of spacing d with every third site
/// removed: sites `m u1 + n u2` are kept unless `(m − n) mod 3 = 2`.
fn in_triangular_minus_centres(p: [f64; 2], d: f64) -> bool {
    let c30 = 3f64.sqrt() / 2.0;
    let m = p[0] / (c30 * d);
    let n = (p[1] - 0.5 * m * d) / d;
    let (mr, nr) = (m.round(), n.round());
    (m - mr).abs() < 1e-9 && (n - nr).abs() < 1e-9 && (mr as i64 - nr as i64).rem_euclid(3) != 2
}

#[test]
fn honeycomb_patch_matches_triangular_construction() {
    let d = 0.9;
    let set = make_emitter_set(&Lattice::honeycomb(d).unwrap(), 4, 4, 0.0, 0).unwrap();
    assert_eq!(set.len(), 32);
    let o = set.positions[0];
    let rel: Vec<[f64; 2]> = set.positions.iter().map(|p| [p[0] - o[0], p[1] - o[1]]).collect();
    for p in &rel {
        assert!(in_triangular_minus_centres(*p, d), "site {p:?} is not a honeycomb site");
    }
    let mut neighbours = vec![0usize; rel.len()];
    for i in 0..rel.len() {
        for j in 0..rel.len() {
            let r = (rel[i][0] - rel[j][0]).hypot(rel[i][1] - rel[j][1]);
            if i != j {
                assert!(r > d - 1e-9);
                if (r - d).abs() < 1e-9 {
                    neighbours[i] += 1;
                }
            }
        }
    }
    assert!(neighbours.iter().all(|&k| (1..=3).contains(&k)));
    assert!(neighbours.iter().filter(|&&k| k == 3).count() >= 8);
}

#[test]
fn zero_width_disorder_reproduces_the_ordered_array() {
    let lat = Lattice::square(0.7).unwrap();
    let set = make_emitter_set(&lat, 4, 4, 0.0, 0).unwrap();
    let drive = DriveSpec::normal(0.3, [C64::ONE, C64::new(0.0, 1.0)], ZeemanField::new(0.5, 0.0, 0.2));
    let dis = DisorderSpec {
        sigma_xy: 0.0,
        sigma_z: 0.0,
        n_configs: 3,
        seed: 5,
    };
    assert_eq!(dis.displace(&set.positions, 2), set.positions);
    let opts = SolverOptions::default();
    let ens = thermal_ensemble(&set, &drive, &dis, None, &opts).unwrap();
    let st = solve_linear(&set, &drive, &opts).unwrap();
    let want = reflectivity(&st, &drive, 5.0, None, 12).unwrap();
    for rec in &ens.records {
        assert_eq!(rec.reflectivity.as_ref(), Some(&want));
    }
}

/// `N⁻¹ Σ_ij e^{iq·(r_i − r_j)} M_ij` built from the finite-difference
/// Green's tensor, with `M_ii = −i/2` at zero field.
fn uniform_expectation(positions: &[Vec3], q: [f64; 2]) -> [[C64; 3]; 3] {
    let n = positions.len();
    let mut acc = [[C64::ZERO; 3]; 3];
    for i in 0..n {
        for j in 0..n {
            let ph = C64::from_polar(1.0, q[0] * (positions[i][0] - positions[j][0]) + q[1] * (positions[i][1] - positions[j][1]));
            if i == j {
                for a in 0..3 {
                    acc[a][a] += C64::new(0.0, -0.5);
                }
                continue;
            }
            let r = [positions[i][0] - positions[j][0], positions[i][1] - positions[j][1], 0.0];
            let g = green_fd(r);
            for a in 0..3 {
                for b in 0..3 {
                    acc[a][b] += -1.5 * g[a][b] * ph;
                }
            }
        }
    }
    acc.map(|row| row.map(|v| v / n as f64))
}

#[test]
fn ordered_band_values_match_uniform_state_expectation() {
    let a = 0.8;
    let lat = Lattice::square(a).unwrap();
    let set = make_emitter_set(&lat, 5, 5, 0.0, 0).unwrap();
    let dis = DisorderSpec {
        sigma_xy: 0.0,
        sigma_z: 0.0,
        n_configs: 2,
        seed: 1,
    };
    let qs = [[0.0, 0.0], [0.5 * PI / a, 0.0]];
    let bands = disordered_bands(&lat, (5, 5), &dis, ZeemanField::default(), &qs).unwrap();
    for (q, b) in qs.iter().zip(&bands) {
        let m = uniform_expectation(&set.positions, *q);
        assert_eq!(b.excluded, 0);
        for ch in 0..3 {
            let v = b.values[ch].unwrap();
            assert!((v - m[ch][ch]).norm() < 1e-6, "q = {q:?}, channel {ch}: {v} vs {}", m[ch][ch]);
        }
    }
}

#[test]
fn sequential_and_parallel_runs_agree_bitwise() {
    let lat = Lattice::triangular(0.6).unwrap();
    let path = bz_path(&lat, &["G", "M", "K", "G"], 5).unwrap();
    let field = ZeemanField::new(0.3, 0.0, 1.0);
    let run = |mode| {
        exec::set_mode(mode);
        let bands = band_structure(&lat, &path, field, &SumConfig::default()).unwrap();
        exec::set_mode(Mode::Parallel);
        bands.iter().map(|p| p.eigenvalues.clone()).collect::<Vec<_>>()
    };
    assert_eq!(run(Mode::Sequential), run(Mode::Parallel));
}
