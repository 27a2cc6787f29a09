//! Free-space dyadic Green's tensor and the dipole couplings derived from it.

use crate::tensor::{norm3, Tensor3, Vec2, Vec3};
use crate::{Error, Result, C64, DIPOLE_COUPLING, K0};
use std::f64::consts::PI;

/// Full near- and far-field Green's tensor at separation `r ≠ 0`.
pub fn green_real(r: Vec3) -> Result<Tensor3> {
    let d = norm3(r);
    if d == 0.0 || !d.is_finite() {
        return Err(Error::SingularArgument);
    }
    Ok(green_unchecked(r, d))
}

#[inline]
pub(crate) fn green_unchecked(r: Vec3, d: f64) -> Tensor3 {
    let k = K0;
    let (s, c) = (k * d).sin_cos();
    let pref = C64::new(c, s) / (4.0 * PI * k * k);
    let inv = 1.0 / d;
    let inv2 = inv * inv;
    let inv3 = inv2 * inv;
    let a = pref * C64::new(k * k * inv - inv3, k * inv2);
    let b = pref * C64::new(-k * k * inv + 3.0 * inv3, -3.0 * k * inv2);
    let u = [r[0] * inv, r[1] * inv, r[2] * inv];
    let mut g = Tensor3::zero();
    for i in 0..3 {
        for j in 0..3 {
            g.0[i][j] = b * (u[i] * u[j]);
        }
        g.0[i][i] += a;
    }
    g
}

/// Radiative (1/R) part only.
pub fn green_far(r: Vec3) -> Result<Tensor3> {
    let d = norm3(r);
    if d == 0.0 || !d.is_finite() {
        return Err(Error::SingularArgument);
    }
    let pref = C64::from_polar(1.0 / (4.0 * PI * d), K0 * d);
    let u = [r[0] / d, r[1] / d, r[2] / d];
    Ok(Tensor3::from_fn(|i, j| {
        pref * (if i == j { 1.0 } else { 0.0 } - u[i] * u[j])
    }))
}

/// Out-of-plane wavenumber: real for |q| < k₀, `+i√(q² − k₀²)` beyond.
pub fn qz(q: f64) -> Result<C64> {
    let d = K0 * K0 - q * q;
    if d.abs() <= 1e-12 * K0 * K0 {
        return Err(Error::BranchSingularity { q });
    }
    Ok(if d > 0.0 {
        C64::from(d.sqrt())
    } else {
        C64::new(0.0, (-d).sqrt())
    })
}

/// Complex wavevector `(q_x, q_y, sgn(Z) q_z)`; `Z = 0` counts as positive.
pub fn wavevector(q: Vec2, z_sign: f64) -> Result<[C64; 3]> {
    let kz = qz(q[0].hypot(q[1]))?;
    let s = if z_sign < 0.0 { -1.0 } else { 1.0 };
    Ok([C64::from(q[0]), C64::from(q[1]), kz * s])
}

/// `𝟙 − v⊗v/k₀²` (unconjugated).
pub fn transverse_projector(v: [C64; 3]) -> Tensor3 {
    Tensor3::identity() - Tensor3::outer(v, v) * (1.0 / (K0 * K0))
}

/// Plane-wave (Weyl) component of the Green's tensor, normalised so that
/// `G(r, Z) = ∫d²q Ḡ(q, Z) e^{iq·r}`.
pub fn green_fourier(q: Vec2, z: f64) -> Result<Tensor3> {
    let v = wavevector(q, z)?;
    let kz = qz(q[0].hypot(q[1]))?;
    let phase = (C64::i() * kz * z.abs()).exp();
    let pref = C64::i() / (8.0 * PI * PI) * phase / kz;
    Ok(transverse_projector(v) * pref)
}

/// Coherent (Ω) and dissipative (Γ) couplings between two emitters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingBlock {
    pub omega: Tensor3,
    pub gamma: Tensor3,
}

impl CouplingBlock {
    /// `Ω − iΓ/2`, the block entering the effective Hamiltonian.
    pub fn combined(&self) -> Tensor3 {
        self.omega - self.gamma * C64::new(0.0, 0.5)
    }
}

/// Couplings at separation `r`. At `r = 0` this is the single-emitter self
/// term: no shift and Γ = 𝟙.
pub fn coupling_pair(r: Vec3) -> CouplingBlock {
    if norm3(r) == 0.0 {
        return CouplingBlock {
            omega: Tensor3::zero(),
            gamma: Tensor3::identity(),
        };
    }
    let g = green_unchecked(r, norm3(r));
    CouplingBlock {
        omega: g.re() * (-DIPOLE_COUPLING),
        gamma: g.im() * (2.0 * DIPOLE_COUPLING),
    }
}

/// `Ω − iΓ/2 = −(3π/k₀) G` for `r ≠ 0`, without the split into parts.
#[inline]
pub(crate) fn pair_block(r: Vec3) -> Tensor3 {
    green_unchecked(r, norm3(r)) * (-DIPOLE_COUPLING)
}
