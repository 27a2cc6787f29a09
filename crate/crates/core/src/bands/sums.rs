//! Exponentially damped real-space lattice sums with Richardson extrapolation.

use crate::lattice::Lattice;
use crate::numeric::extrapolation_weights;
use crate::tensor::{norm2, Tensor3, Vec2};
use crate::{exec, greens, Error, Result, C64, K0};
use faer::Mat;

#[derive(Debug, Clone, PartialEq)]
pub struct SumConfig {
    /// Damping parameters η; each sum carries a factor `exp(-η k₀ r)`.
    pub etas: Vec<f64>,
    /// Cutoff radius. `None` picks `max(300 |a1|, 14 / (η_min k₀))`, which
    /// keeps the truncated tail below ~1e-6 of the undamped magnitude.
    pub r_max: Option<f64>,
    /// Largest accepted extrapolation residual, in units of Γ₀.
    pub tolerance: f64,
}

impl Default for SumConfig {
    fn default() -> Self {
        Self {
            etas: vec![0.04, 0.02, 0.01],
            r_max: None,
            tolerance: 2e-2,
        }
    }
}

impl SumConfig {
    pub fn cutoff(&self, lat: &Lattice) -> f64 {
        self.r_max.unwrap_or_else(|| {
            let eta_min = self.etas.iter().cloned().fold(f64::INFINITY, f64::min);
            (300.0 * norm2(lat.a1)).max(14.0 / (eta_min * K0))
        })
    }

    fn validate(&self) -> Result<()> {
        if self.etas.len() < 2 || self.etas.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::invalid("need at least two positive damping parameters"));
        }
        if let Some(r) = self.r_max {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::invalid("r_max must be positive"));
            }
        }
        Ok(())
    }
}

/// Extrapolated `Σ_R e^{-iq·R} (Ω − iΓ/2)(R + b_ν − b_ν')` for all sublattice
/// pairs, as a 3N_b × 3N_b matrix. The self term (Γ₀ on same-sublattice
/// blocks) is included.
#[derive(Debug, Clone)]
pub struct DampedSum {
    pub matrix: Mat<C64>,
    /// Difference between the extrapolated value and the linear extrapolation
    /// through the two weakest dampings (largest entry).
    pub residual: f64,
}

pub fn damped_sum(lat: &Lattice, q: Vec2, cfg: &SumConfig) -> Result<DampedSum> {
    let sum = damped_sum_unchecked(lat, q, cfg)?;
    if !(sum.residual <= cfg.tolerance) {
        return Err(Error::ConvergenceFailure {
            what: format!("lattice sum at q = ({:.4}, {:.4})", q[0], q[1]),
            residual: sum.residual,
            tolerance: cfg.tolerance,
        });
    }
    Ok(sum)
}

/// As [`damped_sum`] but without the tolerance check.
pub fn damped_sum_unchecked(lat: &Lattice, q: Vec2, cfg: &SumConfig) -> Result<DampedSum> {
    cfg.validate()?;
    let nb = lat.sublattices();
    let r_max = cfg.cutoff(lat);
    let mut etas = cfg.etas.clone();
    etas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let w = extrapolation_weights(&etas);
    let w_lin = extrapolation_weights(&etas[..2]);

    let mut matrix = Mat::<C64>::zeros(3 * nb, 3 * nb);
    let mut residual = 0.0f64;
    for nu in 0..nb {
        for mu in 0..nb {
            let s = [
                lat.basis[nu][0] - lat.basis[mu][0],
                lat.basis[nu][1] - lat.basis[mu][1],
            ];
            let per_eta = block_sums(lat, q, s, &etas, r_max);
            let mut ext = Tensor3::zero();
            let mut lin = Tensor3::zero();
            for (k, t) in per_eta.iter().enumerate() {
                ext += *t * w[k];
                if k < 2 {
                    lin += *t * w_lin[k];
                }
            }
            residual = residual.max((ext - lin).max_abs());
            if nu == mu {
                ext += Tensor3::identity() * C64::new(0.0, -0.5);
            }
            for a in 0..3 {
                for b in 0..3 {
                    matrix[(3 * nu + a, 3 * mu + b)] = ext[(a, b)];
                }
            }
        }
    }
    Ok(DampedSum { matrix, residual })
}

/// One damped sum per η over `R + s`, excluding the origin.
fn block_sums(lat: &Lattice, q: Vec2, s: Vec2, etas: &[f64], r_max: f64) -> Vec<Tensor3> {
    let g = lat.reciprocal().expect("validated lattice");
    let reach = r_max + norm2(s);
    let n1 = (reach * norm2(g.g1) / (2.0 * std::f64::consts::PI)).ceil() as i64 + 1;
    let n2 = (reach * norm2(g.g2) / (2.0 * std::f64::consts::PI)).ceil() as i64 + 1;
    let (a1, a2) = (lat.a1, lat.a2);
    let r2max = r_max * r_max;
    let ne = etas.len();
    // Row phases e^{-iq·a2 j}.
    let ph2: Vec<C64> = (-n2..=n2)
        .map(|j| C64::from_polar(1.0, -(q[0] * a2[0] + q[1] * a2[1]) * j as f64))
        .collect();
    let zero_q = q[0] == 0.0 && q[1] == 0.0;

    let rows = exec::map((2 * n1 + 1) as usize, |ii| {
        let i = ii as i64 - n1;
        let ph1 = C64::from_polar(1.0, -(q[0] * a1[0] + q[1] * a1[1]) * i as f64);
        let mut acc = vec![[C64::ZERO; 6]; ne];
        for (jj, p2) in ph2.iter().enumerate() {
            let j = jj as i64 - n2;
            let x = i as f64 * a1[0] + j as f64 * a2[0] + s[0];
            let y = i as f64 * a1[1] + j as f64 * a2[1] + s[1];
            let d2 = x * x + y * y;
            if d2 == 0.0 || d2 > r2max {
                continue;
            }
            let d = d2.sqrt();
            let b = greens::pair_block([x, y, 0.0]);
            let comps = [b[(0, 0)], b[(1, 1)], b[(2, 2)], b[(0, 1)], b[(0, 2)], b[(1, 2)]];
            let phase = if zero_q { C64::ONE } else { ph1 * p2 };
            for (e, eta) in etas.iter().enumerate() {
                let f = phase * (-eta * K0 * d).exp();
                for (c, v) in acc[e].iter_mut().zip(comps) {
                    *c += f * v;
                }
            }
        }
        acc
    });

    let mut tot = vec![[C64::ZERO; 6]; ne];
    for row in rows {
        for (t, r) in tot.iter_mut().zip(row) {
            for (a, b) in t.iter_mut().zip(r) {
                *a += b;
            }
        }
    }
    tot.into_iter()
        .map(|c| {
            Tensor3([
                [c[0], c[3], c[4]],
                [c[3], c[1], c[5]],
                [c[4], c[5], c[2]],
            ])
        })
        .collect()
}
