//! Finite arrays: steady-state dipole solves, field maps, disorder and
//! vacancy ensembles, disordered band diagrams and the saturation regime.

mod disorder;
mod field;
mod nonlinear;

pub use disorder::{
    disordered_bands, thermal_ensemble, vacancy_runs, ConfigRecord, DisorderSpec, DisorderedBand,
    Ensemble, VacancyRun,
};
pub use field::{field_map, off_axis_fraction, reflectivity, FieldMap, GridSpec, Plane, Reflectivity};
pub use nonlinear::{
    nonlinear_meanfield, nonlinear_realspace, nonlinear_single, MeanFieldSolution, NonlinearOptions,
    NonlinearState,
};

use crate::bands::{zeeman_matrix, ZeemanField};
use crate::lattice::EmitterSet;
use crate::tensor::{norm2, Tensor3, Vec2, Vec3};
use crate::{exec, greens, Error, Result, C64, K0};
use faer::{Mat, MatMut, Par};
use serde::{Deserialize, Serialize};

/// Plane-wave drive. The incident field is `E_in(r) = −η e^{ik·r}` with
/// `k = (k_par, +k_z)`; the z component of η is fixed by transversality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub delta: f64,
    pub eta: [C64; 2],
    pub k_par: Vec2,
    pub field: ZeemanField,
}

impl DriveSpec {
    pub fn normal(delta: f64, eta: [C64; 2], field: ZeemanField) -> Self {
        Self {
            delta,
            eta,
            k_par: [0.0, 0.0],
            field,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if norm2(self.k_par) >= K0 {
            return Err(Error::invalid("in-plane drive momentum must be inside the light cone"));
        }
        if !self.delta.is_finite() || self.eta.iter().any(|z| !z.is_finite()) {
            return Err(Error::invalid("drive parameters must be finite"));
        }
        Ok(())
    }

    pub fn kz(&self) -> f64 {
        (K0 * K0 - self.k_par[0] * self.k_par[0] - self.k_par[1] * self.k_par[1]).sqrt()
    }

    pub fn eta_vec(&self) -> [C64; 3] {
        let ez = -(self.eta[0] * self.k_par[0] + self.eta[1] * self.k_par[1]) / self.kz();
        [self.eta[0], self.eta[1], ez]
    }

    /// `η e^{ik·r}`.
    pub fn eta_at(&self, r: Vec3) -> [C64; 3] {
        let ph = C64::from_polar(1.0, self.k_par[0] * r[0] + self.k_par[1] * r[1] + self.kz() * r[2]);
        self.eta_vec().map(|e| e * ph)
    }

    pub fn incident(&self, r: Vec3) -> [C64; 3] {
        self.eta_at(r).map(|e| -e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Largest dense system (unknowns) attempted.
    pub max_unknowns: usize,
    /// Relative residual `‖Mβ + η‖/‖η‖` above which the solve is rejected.
    pub residual_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_unknowns: 15123,
            residual_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DipoleState {
    pub positions: Vec<Vec3>,
    pub beta: Vec<[C64; 3]>,
    /// Inversion per emitter; `None` for linear solves (β_z = −1).
    pub beta_z: Option<Vec<f64>>,
    pub residual: f64,
}

pub fn solve_linear(emitters: &EmitterSet, drive: &DriveSpec, opts: &SolverOptions) -> Result<DipoleState> {
    solve_positions(&emitters.occupied_positions(), drive, opts)
}

/// Components that couple for this geometry and field. In a single plane
/// with no in-plane field the z dipoles decouple from an in-plane drive.
fn active_components(positions: &[Vec3], drive: &DriveSpec) -> Vec<usize> {
    let z0 = positions.first().map_or(0.0, |p| p[2]);
    let planar = positions.iter().all(|p| p[2] == z0);
    if planar && drive.field.is_planar() && drive.k_par == [0.0, 0.0] {
        vec![0, 1]
    } else {
        vec![0, 1, 2]
    }
}

/// Single-emitter diagonal block `−Δ − i/2 + M_B`.
fn self_block(delta: f64, field: ZeemanField) -> Tensor3 {
    zeeman_matrix(field) - Tensor3::identity() * C64::new(delta, 0.5)
}

/// Dense `M` restricted to `comps`, emitter-major.
pub(crate) fn assemble(positions: &[Vec3], comps: &[usize], diag: &Tensor3) -> Mat<C64> {
    let nc = comps.len();
    let n = positions.len() * nc;
    let mut m = Mat::<C64>::zeros(n, n);
    const CHUNK: usize = 64;
    for start in (0..positions.len()).step_by(CHUNK) {
        let end = (start + CHUNK).min(positions.len());
        let cols = exec::map(end - start, |k| {
            let j = start + k;
            let mut col = vec![C64::ZERO; n * nc];
            for (i, pi) in positions.iter().enumerate() {
                let b = if i == j {
                    *diag
                } else {
                    greens::pair_block([pi[0] - positions[j][0], pi[1] - positions[j][1], pi[2] - positions[j][2]])
                };
                for (bb, &cb) in comps.iter().enumerate() {
                    for (a, &ca) in comps.iter().enumerate() {
                        col[bb * n + i * nc + a] = b[(ca, cb)];
                    }
                }
            }
            col
        });
        for (k, col) in cols.into_iter().enumerate() {
            for bb in 0..nc {
                let c = (start + k) * nc + bb;
                for r in 0..n {
                    m[(r, c)] = col[bb * n + r];
                }
            }
        }
    }
    m
}

/// In-place LU solve; the matrix is consumed as workspace.
pub(crate) fn lu_solve(mut a: Mat<C64>, rhs: MatMut<'_, C64>) -> Result<()> {
    use faer::dyn_stack::{MemBuffer, MemStack};
    use faer::linalg::lu::partial_pivoting::{factor, solve};
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].norm()).fold(0.0, f64::max).max(1e-300);
    let mut fwd = vec![0usize; n];
    let mut bwd = vec![0usize; n];
    let par = Par::Seq;
    let mut buf = MemBuffer::new(
        factor::lu_in_place_scratch::<usize, C64>(n, n, par, Default::default())
            .or(solve::solve_in_place_scratch::<usize, C64>(n, rhs.ncols(), par)),
    );
    let (_, perm) = factor::lu_in_place(a.as_mut(), &mut fwd, &mut bwd, par, MemStack::new(&mut buf), Default::default());
    let pmin = (0..n).map(|i| a[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if !(pmin > 1e-14 * scale) {
        return Err(Error::SingularResponse(format!("dense solve: pivot {pmin:.3e}")));
    }
    solve::solve_in_place_with_conj(
        a.as_ref(),
        a.as_ref(),
        perm,
        faer::Conj::No,
        rhs,
        par,
        MemStack::new(&mut buf),
    );
    Ok(())
}

pub fn solve_positions(positions: &[Vec3], drive: &DriveSpec, opts: &SolverOptions) -> Result<DipoleState> {
    drive.validate()?;
    if positions.is_empty() {
        return Err(Error::invalid("no occupied emitters"));
    }
    let comps = active_components(positions, drive);
    let nc = comps.len();
    let n = positions.len() * nc;
    if n > opts.max_unknowns {
        return Err(Error::ResourceLimit {
            size: n,
            cap: opts.max_unknowns,
        });
    }
    let diag = self_block(drive.delta, drive.field);
    let m = assemble(positions, &comps, &diag);
    let etas: Vec<[C64; 3]> = positions.iter().map(|r| drive.eta_at(*r)).collect();
    let mut rhs = Mat::<C64>::from_fn(n, 1, |r, _| -etas[r / nc][comps[r % nc]]);
    lu_solve(m, rhs.as_mut())?;
    let beta: Vec<[C64; 3]> = (0..positions.len())
        .map(|i| {
            let mut b = [C64::ZERO; 3];
            for (a, &c) in comps.iter().enumerate() {
                b[c] = rhs[(i * nc + a, 0)];
            }
            b
        })
        .collect();
    let residual = linear_residual(positions, &beta, &etas, &diag);
    if !(residual <= opts.residual_tol) {
        return Err(Error::ConvergenceFailure {
            what: "dense dipole solve".into(),
            residual,
            tolerance: opts.residual_tol,
        });
    }
    Ok(DipoleState {
        positions: positions.to_vec(),
        beta,
        beta_z: None,
        residual,
    })
}

/// `‖Mβ + η‖/‖η‖`, with M re-evaluated pair by pair.
fn linear_residual(positions: &[Vec3], beta: &[[C64; 3]], etas: &[[C64; 3]], diag: &Tensor3) -> f64 {
    let rows = exec::map(positions.len(), |i| {
        let mut acc = diag.apply(beta[i]);
        for (j, pj) in positions.iter().enumerate() {
            if j != i {
                let b = greens::pair_block(crate::tensor::sub3(positions[i], *pj)).apply(beta[j]);
                for k in 0..3 {
                    acc[k] += b[k];
                }
            }
        }
        (0..3).map(|k| (acc[k] + etas[i][k]).norm_sqr()).sum::<f64>()
    });
    let num: f64 = rows.iter().sum();
    let den: f64 = etas.iter().flatten().map(|z| z.norm_sqr()).sum();
    (num / den.max(1e-300)).sqrt()
}

/// Scattered power `Σ β†Γβ` against extinction `2 Im(β†η)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerBalance {
    pub scattered: f64,
    pub extinction: f64,
}

impl PowerBalance {
    pub fn relative_error(&self) -> f64 {
        (self.scattered - self.extinction).abs() / self.extinction.abs().max(1e-300)
    }
}

pub fn power_balance(state: &DipoleState, drive: &DriveSpec) -> PowerBalance {
    let pos = &state.positions;
    let beta = &state.beta;
    let rows = exec::map(pos.len(), |i| {
        let mut s = C64::ZERO;
        for j in 0..pos.len() {
            let g = greens::coupling_pair(crate::tensor::sub3(pos[i], pos[j])).gamma;
            let gb = g.apply(beta[j]);
            s += (0..3).map(|k| beta[i][k].conj() * gb[k]).sum::<C64>();
        }
        let eta = drive.eta_at(pos[i]);
        let e: C64 = (0..3).map(|k| beta[i][k].conj() * eta[k]).sum();
        (s.re, e.im)
    });
    let (scattered, ext) = rows.iter().fold((0.0, 0.0), |a, r| (a.0 + r.0, a.1 + r.1));
    PowerBalance {
        scattered,
        extinction: 2.0 * ext,
    }
}
