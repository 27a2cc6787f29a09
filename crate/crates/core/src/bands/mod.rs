//! Bloch matrices, collective band structures and lattice polarisabilities
//! of infinite arrays.

mod sums;

pub use sums::{damped_sum, damped_sum_unchecked, DampedSum, SumConfig};

use crate::lattice::{BzPath, BzSample, Lattice};
use crate::tensor::{dot2, norm2, Tensor3, Vec2};
use crate::{exec, greens, Error, Result, C64, K0};
use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Zeeman field `μB` in units of Γ₀.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ZeemanField(pub [f64; 3]);

impl ZeemanField {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self([x, y, z])
    }

    /// Only an in-plane-normal component: x/y dipoles stay decoupled from z.
    pub fn is_planar(&self) -> bool {
        self.0[0] == 0.0 && self.0[1] == 0.0
    }
}

pub fn zeeman_matrix(b: ZeemanField) -> Tensor3 {
    let [bx, by, bz] = b.0;
    let i = |v: f64| C64::new(0.0, v);
    Tensor3([
        [C64::ZERO, i(-bz), i(by)],
        [i(bz), C64::ZERO, i(-bx)],
        [i(-by), i(bx), C64::ZERO],
    ])
}

/// Hermitian part of the extrapolated lattice sum: the collective shifts.
pub fn omega_tilde(lat: &Lattice, q: Vec2, cfg: &SumConfig) -> Result<Mat<C64>> {
    Ok(hermitian_part(&damped_sum(lat, q, cfg)?.matrix))
}

fn hermitian_part(m: &Mat<C64>) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()))
}

/// Collective decay from all propagating diffraction orders `q + g`; the zero
/// matrix when none propagates. For a subwavelength lattice inside the light
/// cone only `g = 0` contributes and the result is
/// `3/(4πA) · (k₀/q_z) · (𝟙 − v⁺⊗v⁺/k₀²)` on every sublattice block.
pub fn radiative_decay(lat: &Lattice, q: Vec2) -> Result<Mat<C64>> {
    let nb = lat.sublattices();
    let g = lat.reciprocal()?;
    let pref = 3.0 / (4.0 * PI * lat.area());
    let qn = norm2(q);
    let nm = ((K0 + qn) * norm2(lat.a1) / (2.0 * PI)).ceil() as i64 + 1;
    let nn = ((K0 + qn) * norm2(lat.a2) / (2.0 * PI)).ceil() as i64 + 1;
    let mut out = Mat::<C64>::zeros(3 * nb, 3 * nb);
    for m in -nm..=nm {
        for n in -nn..=nn {
            let p = [
                q[0] + m as f64 * g.g1[0] + n as f64 * g.g2[0],
                q[1] + m as f64 * g.g1[1] + n as f64 * g.g2[1],
            ];
            let pn = norm2(p);
            if pn > K0 * (1.0 + 1e-12) {
                continue;
            }
            let kz = greens::qz(pn)?.re;
            let proj = greens::transverse_projector(greens::wavevector(p, 1.0)?) * (pref * K0 / kz);
            for nu in 0..nb {
                for mu in 0..nb {
                    let s = [
                        lat.basis[nu][0] - lat.basis[mu][0],
                        lat.basis[nu][1] - lat.basis[mu][1],
                    ];
                    let ph = C64::from_polar(1.0, dot2(p, s));
                    for a in 0..3 {
                        for b in 0..3 {
                            out[(3 * nu + a, 3 * mu + b)] += proj[(a, b)] * ph;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Collective decay inside the light cone.
pub fn gamma_tilde(lat: &Lattice, q: Vec2) -> Result<Mat<C64>> {
    let qn = norm2(q);
    if qn >= K0 {
        return Err(if (qn - K0).abs() <= 1e-12 * K0 {
            Error::BranchSingularity { q: qn }
        } else {
            Error::OutsideLightCone { q: qn }
        });
    }
    radiative_decay(lat, q)
}

/// `Φ_νν' = e^{iq·(b_ν − b_ν')}`; for two sublattices its eigenvalues are 0 and 2.
pub fn sublattice_phase_matrix(lat: &Lattice, q: Vec2) -> Mat<C64> {
    let nb = lat.sublattices();
    Mat::from_fn(nb, nb, |i, j| {
        let s = [lat.basis[i][0] - lat.basis[j][0], lat.basis[i][1] - lat.basis[j][1]];
        C64::from_polar(1.0, dot2(q, s))
    })
}

/// Field-independent part of the Bloch matrix at one quasi-momentum. The
/// expensive lattice sum is done once; [`LatticeResponse::bloch`] is cheap.
#[derive(Debug, Clone)]
pub struct LatticeResponse {
    pub lattice: Lattice,
    pub q: Vec2,
    /// Ω̃(q), Hermitian, 3N_b × 3N_b.
    pub omega: Mat<C64>,
    /// Γ̃(q), Hermitian, 3N_b × 3N_b.
    pub gamma: Mat<C64>,
    pub residual: f64,
}

impl LatticeResponse {
    pub fn new(lat: &Lattice, q: Vec2, cfg: &SumConfig) -> Result<Self> {
        Self::from_sum(lat, q, damped_sum(lat, q, cfg)?)
    }

    /// Accepts any extrapolation residual; check [`LatticeResponse::residual`].
    pub fn new_unchecked(lat: &Lattice, q: Vec2, cfg: &SumConfig) -> Result<Self> {
        Self::from_sum(lat, q, damped_sum_unchecked(lat, q, cfg)?)
    }

    fn from_sum(lat: &Lattice, q: Vec2, sum: DampedSum) -> Result<Self> {
        Ok(Self {
            lattice: lat.clone(),
            q,
            omega: hermitian_part(&sum.matrix),
            gamma: radiative_decay(lat, q)?,
            residual: sum.residual,
        })
    }

    pub fn omega_block(&self, nu: usize, mu: usize) -> Tensor3 {
        block(&self.omega, nu, mu)
    }

    pub fn gamma_block(&self, nu: usize, mu: usize) -> Tensor3 {
        block(&self.gamma, nu, mu)
    }

    /// `M(q) = −Δ + Ω̃ − iΓ̃/2 + M_B`.
    pub fn bloch(&self, delta: f64, field: ZeemanField) -> BlochMatrix {
        let n = self.omega.nrows();
        let mb = zeeman_matrix(field);
        let m = Mat::from_fn(n, n, |i, j| {
            let mut v = self.omega[(i, j)] - C64::new(0.0, 0.5) * self.gamma[(i, j)];
            if i / 3 == j / 3 {
                v += mb[(i % 3, j % 3)];
                if i == j {
                    v -= delta;
                }
            }
            v
        });
        BlochMatrix { q: self.q, m }
    }
}

pub(crate) fn block(m: &Mat<C64>, nu: usize, mu: usize) -> Tensor3 {
    Tensor3::from_fn(|a, b| m[(3 * nu + a, 3 * mu + b)])
}

#[derive(Debug, Clone)]
pub struct BlochMatrix {
    pub q: Vec2,
    pub m: Mat<C64>,
}

impl BlochMatrix {
    pub fn size(&self) -> usize {
        self.m.nrows()
    }

    pub fn inverse(&self) -> Result<Mat<C64>> {
        invert(&self.m)
    }
}

pub fn build_m(
    lat: &Lattice,
    q: Vec2,
    delta: f64,
    field: ZeemanField,
    cfg: &SumConfig,
) -> Result<BlochMatrix> {
    Ok(LatticeResponse::new(lat, q, cfg)?.bloch(delta, field))
}

/// Dense inverse with a singularity check on the LU pivots.
pub(crate) fn invert(m: &Mat<C64>) -> Result<Mat<C64>> {
    let n = m.nrows();
    let scale = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| m[(i, j)].norm())
        .fold(0.0, f64::max);
    let lu = m.partial_piv_lu();
    let u = lu.U();
    let pmin = (0..n).map(|i| u[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if !(pmin > 1e-13 * scale) {
        return Err(Error::SingularResponse(format!(
            "smallest pivot {pmin:.3e} against matrix scale {scale:.3e}"
        )));
    }
    Ok(lu.solve(Mat::<C64>::identity(n, n)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandPoint {
    pub sample: BzSample,
    /// Eigenvalues `λ` of M at Δ = 0, in continuity-sorted band order. The
    /// frequency shift is `Re λ`, the decay rate `−2 Im λ`.
    pub eigenvalues: Vec<C64>,
    /// Polarisation content `(|Ψx|², |Ψy|², |Ψz|²)` per band.
    pub content: Vec<[f64; 3]>,
    /// Extrapolation residual of the lattice sum at this point.
    pub residual: f64,
}

impl BandPoint {
    pub fn shift(&self, band: usize) -> f64 {
        self.eigenvalues[band].re
    }

    pub fn decay(&self, band: usize) -> f64 {
        -2.0 * self.eigenvalues[band].im
    }
}

struct Eig {
    values: Vec<C64>,
    vectors: Vec<Vec<C64>>,
}

fn eigen(m: &Mat<C64>) -> Result<Eig> {
    let e = m
        .eigen()
        .map_err(|e| Error::ConvergenceFailure {
            what: format!("eigendecomposition ({e:?})"),
            residual: f64::NAN,
            tolerance: 0.0,
        })?;
    let n = m.nrows();
    let s = e.S();
    let u = e.U();
    let values = (0..n).map(|k| s[k]).collect();
    let vectors = (0..n)
        .map(|k| {
            let v: Vec<C64> = (0..n).map(|i| u[(i, k)]).collect();
            let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.into_iter().map(|z| z / nrm).collect()
        })
        .collect();
    Ok(Eig { values, vectors })
}

fn content(v: &[C64]) -> [f64; 3] {
    let mut c = [0.0; 3];
    for (i, z) in v.iter().enumerate() {
        c[i % 3] += z.norm_sqr();
    }
    c
}

fn overlap(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>().norm()
}

/// Permutation `p` with new band `p[k]` continuing old band `k`: maximum total
/// overlap, ties broken by the smallest eigenvalue jump.
fn match_bands(prev: &Eig, next: &Eig) -> Vec<usize> {
    let n = prev.values.len();
    let ov: Vec<Vec<f64>> = (0..n)
        .map(|a| (0..n).map(|b| overlap(&prev.vectors[a], &next.vectors[b])).collect())
        .collect();
    let jump = |a: usize, b: usize| (prev.values[a] - next.values[b]).norm();
    let score = |p: &[usize]| -> (f64, f64) {
        (
            p.iter().enumerate().map(|(a, &b)| ov[a][b]).sum(),
            p.iter().enumerate().map(|(a, &b)| jump(a, b)).sum(),
        )
    };
    let better = |s: (f64, f64), t: (f64, f64)| s.0 > t.0 + 1e-6 || ((s.0 - t.0).abs() <= 1e-6 && s.1 < t.1);

    if n > 6 {
        // Greedy assignment for large bases.
        let mut used = vec![false; n];
        return (0..n)
            .map(|a| {
                let b = (0..n)
                    .filter(|&b| !used[b])
                    .max_by(|&x, &y| (ov[a][x] - 1e-9 * jump(a, x)).total_cmp(&(ov[a][y] - 1e-9 * jump(a, y))))
                    .unwrap();
                used[b] = true;
                b
            })
            .collect();
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_score = score(&perm);
    permute(&mut perm, 0, &mut |p| {
        let s = score(p);
        if better(s, best_score) {
            best_score = s;
            best = p.to_vec();
        }
    });
    best
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

/// Eigenvalues of M(q) at Δ = 0 along a path, sorted into bands by
/// eigenvector continuity. Points whose lattice sum misses the tolerance
/// (close to the light line, where Ω̃ diverges) are kept and logged; their
/// residual is reported on the point.
pub fn band_structure(
    lat: &Lattice,
    path: &BzPath,
    field: ZeemanField,
    cfg: &SumConfig,
) -> Result<Vec<BandPoint>> {
    let eigs = exec::try_map(path.samples.len(), |k| {
        let q = path.samples[k].q;
        let resp = LatticeResponse::new_unchecked(lat, q, cfg)?;
        Ok::<_, Error>((eigen(&resp.bloch(0.0, field).m)?, resp.residual))
    })?;
    let noisy: Vec<f64> = eigs.iter().map(|e| e.1).filter(|&r| r > cfg.tolerance).collect();
    if !noisy.is_empty() {
        log::warn!(
            "{} of {} band points have lattice-sum residual above {:.1e} (max {:.3e}); see the residual column",
            noisy.len(),
            eigs.len(),
            cfg.tolerance,
            noisy.iter().copied().fold(0.0, f64::max)
        );
    }
    let mut out = Vec::with_capacity(eigs.len());
    let mut prev: Option<Eig> = None;
    for (sample, (e, residual)) in path.samples.iter().zip(eigs) {
        let order: Vec<usize> = match &prev {
            None => {
                let mut o: Vec<usize> = (0..e.values.len()).collect();
                o.sort_by(|&a, &b| e.values[a].re.total_cmp(&e.values[b].re));
                o
            }
            Some(p) => match_bands(p, &e),
        };
        let sorted = Eig {
            values: order.iter().map(|&k| e.values[k]).collect(),
            vectors: order.iter().map(|&k| e.vectors[k].clone()).collect(),
        };
        out.push(BandPoint {
            sample: *sample,
            eigenvalues: sorted.values.clone(),
            content: sorted.vectors.iter().map(|v| content(v)).collect(),
            residual,
        });
        prev = Some(sorted);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Polarizability {
    pub q: Vec2,
    /// `M⁻¹`, 3N_b × 3N_b.
    pub alpha: Mat<C64>,
    /// Projection onto the plane-wave sublattice vector `e^{iq·b_ν}/√N_b`.
    pub symmetric: Tensor3,
}

pub fn polarizability(resp: &LatticeResponse, delta: f64, field: ZeemanField) -> Result<Polarizability> {
    let alpha = resp.bloch(delta, field).inverse()?;
    let symmetric = project_symmetric(&resp.lattice, resp.q, &alpha);
    Ok(Polarizability {
        q: resp.q,
        alpha,
        symmetric,
    })
}

/// `Σ_νν' w_ν* A_νν' w_ν'` with `w_ν = e^{iq·b_ν}/√N_b`.
pub(crate) fn project_symmetric(lat: &Lattice, q: Vec2, a: &Mat<C64>) -> Tensor3 {
    let nb = lat.sublattices();
    let w: Vec<C64> = lat
        .basis
        .iter()
        .map(|b| C64::from_polar(1.0 / (nb as f64).sqrt(), dot2(q, *b)))
        .collect();
    let mut t = Tensor3::zero();
    for nu in 0..nb {
        for mu in 0..nb {
            t += block(a, nu, mu) * (w[nu].conj() * w[mu]);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::bz_path;

    fn resp(a: f64) -> LatticeResponse {
        LatticeResponse::new(&Lattice::square(a).unwrap(), [0.0, 0.0], &SumConfig::default()).unwrap()
    }

    #[test]
    fn zeeman_is_hermitian() {
        let m = zeeman_matrix(ZeemanField::new(0.3, -1.2, 2.0));
        assert!(m.approx_eq(&m.adjoint(), 0.0));
    }

    #[test]
    fn gamma_normal_incidence() {
        let lat = Lattice::square(0.8).unwrap();
        let g = gamma_tilde(&lat, [0.0, 0.0]).unwrap();
        let want = 3.0 / (4.0 * PI * 0.64);
        assert!((g[(0, 0)].re - want).abs() < 1e-14);
        assert!((g[(1, 1)].re - want).abs() < 1e-14);
        assert!(g[(2, 2)].norm() < 1e-14);
        assert!(matches!(gamma_tilde(&lat, [7.0, 0.0]), Err(Error::OutsideLightCone { .. })));
    }

    #[test]
    fn damped_decay_matches_radiative() {
        let lat = Lattice::square(0.8).unwrap();
        let s = damped_sum(&lat, [0.0, 0.0], &SumConfig::default()).unwrap();
        let gxx = -2.0 * s.matrix[(0, 0)].im;
        let want = 3.0 / (4.0 * PI * 0.64);
        assert!((gxx - want).abs() / want < 1e-3, "{gxx} vs {want}");
    }

    #[test]
    fn square_shift_isotropic_in_plane() {
        let r = resp(0.8);
        assert!((r.omega[(0, 0)] - r.omega[(1, 1)]).norm() < 1e-12);
        assert!(r.omega[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn x_band_insensitive_to_bx_at_gamma() {
        let r = resp(0.8);
        let x0 = r.bloch(0.0, ZeemanField::default()).m[(0, 0)];
        for b in [0.5, 2.0, 7.0] {
            let e = eigen(&r.bloch(0.0, ZeemanField::new(b, 0.0, 0.0)).m).unwrap();
            let best = e
                .vectors
                .iter()
                .zip(&e.values)
                .max_by(|a, b| content(a.0)[0].total_cmp(&content(b.0)[0]))
                .unwrap();
            assert!((best.1 - x0).norm() < 1e-10);
            assert!(content(best.0)[0] > 1.0 - 1e-12);
        }
    }

    #[test]
    fn bands_have_nonnegative_decay() {
        let lat = Lattice::square(0.6).unwrap();
        let path = bz_path(&lat, &["G", "X", "M", "G"], 5).unwrap();
        let cfg = SumConfig {
            r_max: Some(120.0),
            etas: vec![0.08, 0.04, 0.02],
            tolerance: 0.1,
        };
        let bands = band_structure(&lat, &path, ZeemanField::new(1.0, 0.0, 0.0), &cfg).unwrap();
        for p in &bands {
            for b in 0..3 {
                assert!(p.decay(b) >= -1e-9);
                let c = p.content[b];
                assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn honeycomb_phase_matrix_spectrum() {
        let lat = Lattice::honeycomb(0.9).unwrap();
        for q in [[0.0, 0.0], [1.3, -0.4], [3.0, 2.0]] {
            let ev = sublattice_phase_matrix(&lat, q).eigenvalues().unwrap();
            let mut re: Vec<f64> = ev.iter().map(|z| z.re).collect();
            re.sort_by(f64::total_cmp);
            assert!(re[0].abs() < 1e-12 && (re[1] - 2.0).abs() < 1e-12);
        }
    }
}
