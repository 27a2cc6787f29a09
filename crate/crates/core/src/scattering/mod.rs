//! Scattering and transmission (Jones) matrices of infinite arrays, and the
//! polariser and waveplate parameter scans built on them.

mod scan;

pub use scan::{
    field_line_scan, phase_map, polarizer_scan, waveplate_field, waveplate_scan, PhaseScanPoint,
    PolarizerScan,
    RidgeKind, RidgePoint, ScanAxis, ScanGrid,
};

use crate::bands::{project_symmetric, LatticeResponse, ZeemanField};
use crate::lattice::LatticeKind;
use crate::tensor::{norm2, Tensor3};
use crate::{greens, Error, Result, C64, K0};
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JonesMatrix(pub [[C64; 2]; 2]);

impl JonesMatrix {
    pub fn identity() -> Self {
        Self([[C64::ONE, C64::ZERO], [C64::ZERO, C64::ONE]])
    }

    pub fn diag(a: C64, b: C64) -> Self {
        Self([[a, C64::ZERO], [C64::ZERO, b]])
    }

    pub fn apply(&self, e: [C64; 2]) -> [C64; 2] {
        let t = &self.0;
        [t[0][0] * e[0] + t[0][1] * e[1], t[1][0] * e[0] + t[1][1] * e[1]]
    }

    pub fn transpose(&self) -> Self {
        let t = &self.0;
        Self([[t[0][0], t[1][0]], [t[0][1], t[1][1]]])
    }

    /// `σx T σx`: exchange of the x and y labels.
    pub fn swap_xy(&self) -> Self {
        let t = &self.0;
        Self([[t[1][1], t[1][0]], [t[0][1], t[0][0]]])
    }

    /// Largest entry modulus of the difference.
    pub fn distance(&self, o: &Self) -> f64 {
        (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| (self.0[i][j] - o.0[i][j]).norm())
            .fold(0.0, f64::max)
    }

    /// Spectral norm of the difference.
    pub fn norm_distance(&self, o: &Self) -> f64 {
        let d = Self::from_fn(|i, j| self.0[i][j] - o.0[i][j]);
        d.spectral_norm()
    }

    fn from_fn(f: impl Fn(usize, usize) -> C64) -> Self {
        Self([[f(0, 0), f(0, 1)], [f(1, 0), f(1, 1)]])
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        let t = &self.0;
        // Eigenvalues of T†T.
        let a = t[0][0].norm_sqr() + t[1][0].norm_sqr();
        let d = t[0][1].norm_sqr() + t[1][1].norm_sqr();
        let b = t[0][0].conj() * t[0][1] + t[1][0].conj() * t[1][1];
        let tr = a + d;
        let disc = ((a - d) * (a - d) + 4.0 * b.norm_sqr()).sqrt();
        (0.5 * (tr + disc)).sqrt()
    }
}

/// Transmission matrix passing the circular component `(1, −i)/√2`.
pub fn t_plus() -> JonesMatrix {
    let h = C64::from(0.5);
    let i = C64::new(0.0, 0.5);
    JonesMatrix([[h, i], [-i, h]])
}

/// Transmission matrix passing the circular component `(1, i)/√2`.
pub fn t_minus() -> JonesMatrix {
    let h = C64::from(0.5);
    let i = C64::new(0.0, 0.5);
    JonesMatrix([[h, -i], [i, h]])
}

/// Zero-order scattered amplitude per unit incident field at in-plane
/// momentum `resp.q`, on the `z_sign` side of the array.
pub fn scattering_matrix(
    resp: &LatticeResponse,
    z_sign: f64,
    delta: f64,
    field: ZeemanField,
) -> Result<Tensor3> {
    let q = resp.q;
    let qn = norm2(q);
    if qn >= K0 {
        return Err(Error::OutsideLightCone { q: qn });
    }
    let lat = &resp.lattice;
    let nb = lat.sublattices() as f64;
    let kz = greens::qz(qn)?.re;
    let gamma = 3.0 / (4.0 * PI * lat.area()) * K0 / kz;
    let alpha = resp.bloch(delta, field).inverse()?;
    let a = project_symmetric(lat, q, &alpha) * nb;
    let p_out = greens::transverse_projector(greens::wavevector(q, z_sign)?);
    let p_in = greens::transverse_projector(greens::wavevector(q, 1.0)?);
    Ok(p_out.matmul(&a).matmul(&p_in) * C64::new(0.0, 0.5 * gamma))
}

fn reduce(s: &Tensor3) -> [[C64; 2]; 2] {
    [[s[(0, 0)], s[(0, 1)]], [s[(1, 0)], s[(1, 1)]]]
}

/// Normal-incidence transmission `T = 𝟙 + S_xy`. `resp` must be at q = 0.
pub fn jones(resp: &LatticeResponse, delta: f64, field: ZeemanField) -> Result<JonesMatrix> {
    check_normal(resp)?;
    let s = reduce(&scattering_matrix(resp, 1.0, delta, field)?);
    Ok(JonesMatrix::from_fn(|i, j| s[i][j] + if i == j { 1.0 } else { 0.0 }))
}

/// Normal-incidence reflection `R = S_xy` on the incident side.
pub fn reflection(resp: &LatticeResponse, delta: f64, field: ZeemanField) -> Result<JonesMatrix> {
    check_normal(resp)?;
    Ok(JonesMatrix(reduce(&scattering_matrix(resp, -1.0, delta, field)?)))
}

fn check_normal(resp: &LatticeResponse) -> Result<()> {
    if resp.q != [0.0, 0.0] {
        return Err(Error::invalid("Jones matrices are defined at normal incidence (q = 0)"));
    }
    Ok(())
}

/// Explicit square-lattice transmission for a field along x, written with
/// the prefactor `C` instead of a matrix inverse.
pub fn jones_square_closed_form(resp: &LatticeResponse, delta: f64, bx: f64) -> Result<JonesMatrix> {
    if resp.lattice.kind != LatticeKind::Square {
        return Err(Error::invalid("closed form applies to square lattices only"));
    }
    check_normal(resp)?;
    let g = 3.0 / (4.0 * PI * resp.lattice.area());
    let ih = C64::new(0.0, 0.5 * g);
    let oxx = resp.omega[(0, 0)].re;
    let oxy = resp.omega[(0, 1)].re;
    let ozz = resp.omega[(2, 2)].re;
    let u = ih + delta - oxx;
    let c = ih / (bx * bx * u + (u * u - oxy * oxy) * (ozz - delta));
    let s = [
        [c * (-bx * bx + u * (delta - ozz)), c * oxy * (delta - ozz)],
        [c * oxy * (delta - ozz), c * u * (delta - ozz)],
    ];
    Ok(JonesMatrix::from_fn(|i, j| s[i][j] + if i == j { 1.0 } else { 0.0 }))
}

/// Jones matrix with a field along z only, the circular polariser.
pub fn circular_jones(resp: &LatticeResponse, delta: f64, bz: f64) -> Result<JonesMatrix> {
    jones(resp, delta, ZeemanField::new(0.0, 0.0, bz))
}

fn intensities(t: &JonesMatrix, e_in: [C64; 2]) -> [C64; 2] {
    t.apply(e_in)
}

/// `(I_x − I_y)/(I_x + I_y)` of the transmitted light.
pub fn visibility(t: &JonesMatrix, e_in: [C64; 2]) -> Result<f64> {
    let o = intensities(t, e_in);
    let (ix, iy) = (o[0].norm_sqr(), o[1].norm_sqr());
    if !(ix + iy > 1e-300) {
        return Err(Error::UndefinedVisibility);
    }
    Ok((ix - iy) / (ix + iy))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseObservables {
    /// `arg(out_x) − arg(out_y)` wrapped to (−π, π]; `None` if either
    /// component vanishes.
    pub delta_phi: Option<f64>,
    pub i_out: f64,
    pub delta_i: f64,
}

pub fn phase_observables(t: &JonesMatrix, e_in: [C64; 2]) -> PhaseObservables {
    let o = intensities(t, e_in);
    let (ix, iy) = (o[0].norm_sqr(), o[1].norm_sqr());
    let delta_phi = if ix > 1e-24 && iy > 1e-24 {
        let mut d = o[0].arg() - o[1].arg();
        if d <= -PI {
            d += 2.0 * PI;
        } else if d > PI {
            d -= 2.0 * PI;
        }
        Some(d)
    } else {
        None
    };
    PhaseObservables {
        delta_phi,
        i_out: ix + iy,
        delta_i: ix - iy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bands::SumConfig;
    use crate::lattice::Lattice;

    fn resp(a: f64) -> LatticeResponse {
        LatticeResponse::new(&Lattice::square(a).unwrap(), [0.0, 0.0], &SumConfig::default()).unwrap()
    }

    fn e11() -> [C64; 2] {
        [C64::ONE, C64::ONE]
    }

    #[test]
    fn normal_incidence_structure() {
        let r = resp(0.8);
        let s = scattering_matrix(&r, 1.0, 0.3, ZeemanField::new(1.0, 0.5, 0.2)).unwrap();
        for k in 0..3 {
            assert!(s[(2, k)].norm() < 1e-15 && s[(k, 2)].norm() < 1e-15);
        }
        let back = scattering_matrix(&r, -1.0, 0.3, ZeemanField::new(1.0, 0.5, 0.2)).unwrap();
        assert!(s.approx_eq(&back, 1e-15));
    }

    #[test]
    fn perfect_mirror_on_resonance() {
        let r = resp(0.8);
        let d = r.omega[(0, 0)].re;
        let s = scattering_matrix(&r, 1.0, d, ZeemanField::default()).unwrap();
        assert!((s[(0, 0)] + 1.0).norm() < 1e-12);
        assert!((s[(1, 1)] + 1.0).norm() < 1e-12);
        let t = jones(&r, d, ZeemanField::default()).unwrap();
        assert!(t.0[0][0].norm() < 1e-6 && t.0[1][1].norm() < 1e-6);
    }

    #[test]
    fn far_detuned_is_transparent() {
        let t = jones(&resp(0.8), 1e7, ZeemanField::default()).unwrap();
        assert!(t.distance(&JonesMatrix::identity()) < 1e-6);
    }

    #[test]
    fn strong_bx_gives_y_polariser() {
        let r = resp(0.8);
        let d = r.omega[(0, 0)].re;
        let t = jones(&r, d, ZeemanField::new(10.0, 0.0, 0.0)).unwrap();
        assert!(t.0[0][0].norm() < 0.05);
        assert!((t.0[1][1] - 1.0).norm() < 0.05);
        let lim = jones_square_closed_form(&r, d, 1e6).unwrap();
        assert!(lim.distance(&JonesMatrix::diag(C64::ZERO, C64::ONE)) < 1e-6);
    }

    #[test]
    fn closed_form_matches_inverse() {
        let r = resp(0.8);
        for (d, b) in [(0.0, 0.0), (0.0, 3.0), (-1.3, 0.7), (2.2, -4.0)] {
            let a = jones(&r, d, ZeemanField::new(b, 0.0, 0.0)).unwrap();
            let c = jones_square_closed_form(&r, d, b).unwrap();
            assert!(a.distance(&c) < 1e-12);
        }
    }

    #[test]
    fn circular_polariser() {
        let r = resp(0.8);
        let o = r.omega[(0, 0)].re;
        let t = circular_jones(&r, o - 10.0, 10.0).unwrap();
        assert!(t.norm_distance(&t_minus()) < 0.1);
        let t = circular_jones(&r, o + 10.0, 10.0).unwrap();
        assert!(t.norm_distance(&t_plus()) < 0.1);
        let t0 = circular_jones(&r, 0.4, 0.0).unwrap();
        assert!(t0.0[0][1].norm() < 1e-12 && t0.0[1][0].norm() < 1e-12);
    }

    #[test]
    fn field_reversal_is_transpose() {
        let r = resp(0.8);
        let p = circular_jones(&r, 0.3, 2.0).unwrap();
        let m = circular_jones(&r, 0.3, -2.0).unwrap();
        assert!(p.transpose().distance(&m) < 1e-12);
        assert!(p.swap_xy().distance(&m) < 1e-12);
    }

    #[test]
    fn visibility_examples() {
        let v = visibility(&JonesMatrix::diag(C64::ZERO, C64::ONE), e11()).unwrap();
        assert_eq!(v, -1.0);
        assert_eq!(visibility(&JonesMatrix::identity(), e11()).unwrap(), 0.0);
        let z = JonesMatrix::diag(C64::ZERO, C64::ZERO);
        assert_eq!(visibility(&z, e11()), Err(Error::UndefinedVisibility));
        let r = resp(0.8);
        let t = jones(&r, 0.0, ZeemanField::new(3.0, 0.0, 0.0)).unwrap();
        assert!(visibility(&t, e11()).unwrap() < -0.99);
    }

    #[test]
    fn phase_examples() {
        let p = phase_observables(&JonesMatrix::identity(), e11());
        assert_eq!(p.delta_phi, Some(0.0));
        assert_eq!((p.i_out, p.delta_i), (2.0, 0.0));
        let q = phase_observables(&JonesMatrix::diag(C64::i(), C64::ONE), e11());
        assert!((q.delta_phi.unwrap() - PI / 2.0).abs() < 1e-15);
        let z = phase_observables(&JonesMatrix::diag(C64::ZERO, C64::ONE), e11());
        assert_eq!(z.delta_phi, None);
    }
}
