use super::{assemble, DipoleState, DriveSpec};
use crate::bands::{LatticeResponse, SumConfig};
use crate::lattice::EmitterSet;
use crate::numeric::find_root;
use crate::tensor::Tensor3;
use crate::{Error, Result, C64};
use faer::linalg::solvers::Solve;
use faer::{Col, Mat};
use serde::Serialize;

/// Steady state of one driven two-level emitter, `(β, β_z)`.
pub fn nonlinear_single(delta: f64, eta: f64) -> (C64, f64) {
    let den = 0.25 + delta * delta;
    let bz = -1.0 / (1.0 + 2.0 * eta * eta / den);
    let x = C64::i() * eta * C64::new(0.5, delta) / den;
    (x * bz, bz)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanFieldSolution {
    pub beta: C64,
    pub beta_z: f64,
    pub reflectance: f64,
    pub transmittance: f64,
    /// Every steady state found in β_z ∈ [−1, 0].
    pub branches: Vec<(C64, f64)>,
    pub bistable: bool,
}

/// Uniform two-level (x-polarised) mean-field steady state of an infinite
/// array with collective shift `Ω̃ˣˣ(0)` and decay `Γ̃ˣˣ(0)` from `resp`.
/// The reported branch is the one reached by integrating from the ground state.
pub fn nonlinear_meanfield(resp: &LatticeResponse, delta: f64, eta: f64) -> Result<MeanFieldSolution> {
    if resp.q != [0.0, 0.0] {
        return Err(Error::invalid("mean-field response must be at q = 0"));
    }
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::invalid("drive amplitude must be non-negative"));
    }
    let om = resp.omega[(0, 0)].re;
    let gm = resp.gamma[(0, 0)].re;
    meanfield_core(om, gm, delta, eta)
}

pub(crate) fn meanfield_core(om: f64, gm: f64, delta: f64, eta: f64) -> Result<MeanFieldSolution> {
    let c = C64::new(om, -0.5 * (gm - 1.0));
    let beta_of = |bz: f64| {
        let d = C64::new(-0.5, delta) + C64::i() * bz * c;
        -C64::i() * bz * eta / d
    };
    let g = |bz: f64| {
        let b = beta_of(bz);
        -(bz + 1.0) - 2.0 * (gm - 1.0) * b.norm_sqr() - 4.0 * eta * b.im
    };
    let mut branches = vec![];
    let n = 4000;
    let mut prev = (-1.0, g(-1.0));
    for k in 1..=n {
        let x = -1.0 + k as f64 / n as f64;
        let gx = g(x);
        if prev.1 == 0.0 {
            branches.push(prev.0);
        } else if prev.1.signum() != gx.signum() {
            if let Some(r) = find_root(g, prev.0, x, 1e-15) {
                branches.push(r);
            }
        }
        prev = (x, gx);
    }
    if prev.1 == 0.0 {
        branches.push(prev.0);
    }
    if branches.is_empty() {
        return Err(Error::ConvergenceFailure {
            what: "mean-field steady state in β_z ∈ [−1, 0]".into(),
            residual: g(-1.0).abs().min(g(0.0).abs()),
            tolerance: 0.0,
        });
    }
    // Relax from the ground state to select the dynamically reached branch.
    let rhs = |b: C64, bz: f64| {
        let e = eta + c * b;
        (
            -C64::new(0.5, -delta) * b + C64::i() * bz * e,
            -(bz + 1.0) - 4.0 * (e.conj() * b).im,
        )
    };
    let (mut b, mut bz) = (C64::ZERO, -1.0);
    let dt = 0.01;
    for _ in 0..200_000 {
        let (k1b, k1z) = rhs(b, bz);
        let (k2b, k2z) = rhs(b + 0.5 * dt * k1b, bz + 0.5 * dt * k1z);
        let (k3b, k3z) = rhs(b + 0.5 * dt * k2b, bz + 0.5 * dt * k2z);
        let (k4b, k4z) = rhs(b + dt * k3b, bz + dt * k3z);
        let nb = b + dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
        let nz = bz + dt / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
        let change = (nb - b).norm().max((nz - bz).abs()) / dt;
        b = nb;
        bz = nz;
        if change < 1e-10 {
            break;
        }
    }
    let chosen = *branches
        .iter()
        .min_by(|x, y| (*x - bz).abs().total_cmp(&(*y - bz).abs()))
        .unwrap();
    let beta = beta_of(chosen);
    let s = if eta > 0.0 {
        -C64::i() * 0.5 * gm * beta / eta
    } else {
        // Linear limit.
        -C64::i() * 0.5 * gm * C64::i() / (C64::new(-0.5 * gm, delta - om))
    };
    Ok(MeanFieldSolution {
        beta,
        beta_z: chosen,
        reflectance: s.norm_sqr(),
        transmittance: (1.0 + s).norm_sqr(),
        bistable: branches.len() > 1,
        branches: branches.into_iter().map(|z| (beta_of(z), z)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearOptions {
    pub dt: f64,
    pub t_max: f64,
    /// Stop integrating once `max |Δy|/dt` falls below this rate.
    pub tol: f64,
    /// Refine the integrated state with Newton's method on the steady-state equations.
    pub polish: bool,
    pub max_unknowns: usize,
    pub sums: SumConfig,
}

impl Default for NonlinearOptions {
    fn default() -> Self {
        Self {
            dt: 0.02,
            t_max: 50.0,
            tol: 1e-8,
            polish: true,
            max_unknowns: 15123,
            sums: SumConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonlinearState {
    pub positions: Vec<[f64; 3]>,
    pub beta: Vec<C64>,
    pub beta_z: Vec<f64>,
    pub t: f64,
    /// Final `max |Δy|/dt` of the integration.
    pub rate: f64,
    /// Max-norm of the steady-state equations at the returned state.
    pub residual: f64,
    pub converged: bool,
}

impl NonlinearState {
    pub fn to_dipole_state(&self) -> DipoleState {
        DipoleState {
            positions: self.positions.clone(),
            beta: self.beta.iter().map(|&b| [b, C64::ZERO, C64::ZERO]).collect(),
            beta_z: Some(self.beta_z.clone()),
            residual: self.residual,
        }
    }
}

struct System {
    c: Mat<C64>,
    eta: Vec<C64>,
    delta: f64,
}

impl System {
    fn eta_eff(&self, beta: &[C64]) -> Vec<C64> {
        let b = Col::<C64>::from_fn(beta.len(), |i| beta[i]);
        let cb = &self.c * &b;
        (0..beta.len()).map(|i| self.eta[i] + cb[i]).collect()
    }

    fn rhs(&self, beta: &[C64], bz: &[f64]) -> (Vec<C64>, Vec<f64>) {
        let e = self.eta_eff(beta);
        let db = (0..beta.len())
            .map(|j| -C64::new(0.5, -self.delta) * beta[j] + C64::i() * bz[j] * e[j])
            .collect();
        let dz = (0..beta.len())
            .map(|j| -(bz[j] + 1.0) - 4.0 * (e[j].conj() * beta[j]).im)
            .collect();
        (db, dz)
    }

    fn residual(&self, beta: &[C64], bz: &[f64]) -> f64 {
        let (db, dz) = self.rhs(beta, bz);
        db.iter().map(|z| z.norm()).chain(dz.iter().map(|x| x.abs())).fold(0.0, f64::max)
    }

    fn newton(&self, beta: &mut [C64], bz: &mut [f64], tol: f64) -> Result<()> {
        let n = beta.len();
        let mut res = self.residual(beta, bz);
        for _ in 0..30 {
            if res < tol {
                return Ok(());
            }
            let e = self.eta_eff(beta);
            let (db, dz) = self.rhs(beta, bz);
            let jac = Mat::<f64>::from_fn(3 * n, 3 * n, |r, col| {
                let (blk_r, j) = (r / n, r % n);
                let (blk_c, m) = (col / n, col % n);
                let cjm = self.c[(j, m)];
                let d = if j == m { 1.0 } else { 0.0 };
                match (blk_r, blk_c) {
                    (0 | 1, 0 | 1) => {
                        let a = -C64::new(0.5, -self.delta) * d + C64::i() * bz[j] * cjm;
                        match (blk_r, blk_c) {
                            (0, 0) | (1, 1) => a.re,
                            (0, 1) => -a.im,
                            _ => a.im,
                        }
                    }
                    (0, 2) => d * (C64::i() * e[j]).re,
                    (1, 2) => d * (C64::i() * e[j]).im,
                    (2, 0) => -4.0 * ((cjm.conj() * beta[j]).im - d * e[j].im),
                    (2, 1) => -4.0 * ((-C64::i() * cjm.conj() * beta[j]).im + d * e[j].re),
                    _ => -d,
                }
            });
            let f = Col::<f64>::from_fn(3 * n, |r| match r / n {
                0 => db[r % n].re,
                1 => db[r % n].im,
                _ => dz[r % n],
            });
            let step = jac.partial_piv_lu().solve(&f);
            let mut lambda = 1.0;
            loop {
                let nb: Vec<C64> = (0..n).map(|j| beta[j] - lambda * C64::new(step[j], step[n + j])).collect();
                let nz: Vec<f64> = (0..n).map(|j| bz[j] - lambda * step[2 * n + j]).collect();
                let nr = self.residual(&nb, &nz);
                if nr < res || lambda < 1e-4 {
                    beta.copy_from_slice(&nb);
                    bz.copy_from_slice(&nz);
                    res = nr;
                    break;
                }
                lambda *= 0.5;
            }
        }
        if res < tol {
            Ok(())
        } else {
            Err(Error::ConvergenceFailure {
                what: "Newton polish of the nonlinear steady state".into(),
                residual: res,
                tolerance: tol,
            })
        }
    }
}

const BOUND_SLACK: f64 = 1e-9;

fn in_bounds(bz: &[f64]) -> bool {
    bz.iter().all(|&z| (-1.0 - BOUND_SLACK..=BOUND_SLACK).contains(&z))
}

/// Per-emitter two-level (x-polarised) steady state of a finite patch: RK4
/// integration seeded with the uniform mean-field solution, then an optional
/// Newton polish. Only `drive.eta[0]` is used.
pub fn nonlinear_realspace(
    emitters: &EmitterSet,
    drive: &DriveSpec,
    opts: &NonlinearOptions,
) -> Result<NonlinearState> {
    drive.validate()?;
    if drive.eta[1] != C64::ZERO {
        return Err(Error::invalid("the two-level model is driven along x only"));
    }
    if !(opts.dt > 0.0 && opts.t_max >= 0.0) {
        return Err(Error::invalid("dt must be positive and t_max non-negative"));
    }
    let positions = emitters.occupied_positions();
    let n = positions.len();
    if n > opts.max_unknowns {
        return Err(Error::ResourceLimit {
            size: n,
            cap: opts.max_unknowns,
        });
    }
    let mut c = assemble(&positions, &[0], &Tensor3::zero());
    for i in 0..n {
        c[(i, i)] = C64::ZERO;
    }
    let eta: Vec<C64> = positions.iter().map(|r| drive.eta_at(*r)[0]).collect();
    let sys = System { c, eta, delta: drive.delta };

    let resp = LatticeResponse::new(&emitters.lattice, [0.0, 0.0], &opts.sums)?;
    let eta0 = drive.eta[0];
    let mf = nonlinear_meanfield(&resp, drive.delta, eta0.norm())?;
    // The mean-field amplitude is for a real drive; carry over each emitter's phase.
    let mut beta: Vec<C64> = if eta0.norm() > 0.0 {
        sys.eta.iter().map(|e| mf.beta * e / eta0.norm()).collect()
    } else {
        vec![C64::ZERO; n]
    };
    let mut bz = vec![mf.beta_z; n];

    let mut t = 0.0;
    let mut dt = opts.dt;
    let mut rate = f64::INFINITY;
    let mut accepted = 0usize;
    while t < opts.t_max {
        let (b1, z1) = sys.rhs(&beta, &bz);
        let stage = |k: &(Vec<C64>, Vec<f64>), h: f64| -> (Vec<C64>, Vec<f64>) {
            (
                beta.iter().zip(&k.0).map(|(b, d)| b + h * d).collect(),
                bz.iter().zip(&k.1).map(|(z, d)| z + h * d).collect(),
            )
        };
        let k1 = (b1, z1);
        let s2 = stage(&k1, 0.5 * dt);
        let k2 = sys.rhs(&s2.0, &s2.1);
        let s3 = stage(&k2, 0.5 * dt);
        let k3 = sys.rhs(&s3.0, &s3.1);
        let s4 = stage(&k3, dt);
        let k4 = sys.rhs(&s4.0, &s4.1);
        let nb: Vec<C64> = (0..n)
            .map(|j| beta[j] + dt / 6.0 * (k1.0[j] + 2.0 * k2.0[j] + 2.0 * k3.0[j] + k4.0[j]))
            .collect();
        let nz: Vec<f64> = (0..n)
            .map(|j| bz[j] + dt / 6.0 * (k1.1[j] + 2.0 * k2.1[j] + 2.0 * k3.1[j] + k4.1[j]))
            .collect();
        if !in_bounds(&nz) {
            dt *= 0.5;
            if dt < opts.dt / 1024.0 {
                return Err(Error::ConvergenceFailure {
                    what: "nonlinear integration left −1 ≤ β_z ≤ 0".into(),
                    residual: nz.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    tolerance: BOUND_SLACK,
                });
            }
            continue;
        }
        rate = (0..n)
            .map(|j| (nb[j] - beta[j]).norm().max((nz[j] - bz[j]).abs()))
            .fold(0.0, f64::max)
            / dt;
        beta = nb;
        bz = nz;
        t += dt;
        accepted += 1;
        if accepted.is_multiple_of(10) && dt < opts.dt {
            dt = (2.0 * dt).min(opts.dt);
        }
        if rate < opts.tol {
            break;
        }
    }
    if opts.polish {
        let (b0, z0) = (beta.clone(), bz.clone());
        match sys.newton(&mut beta, &mut bz, 1e-11) {
            Ok(()) if in_bounds(&bz) => {}
            Ok(()) => {
                log::warn!("Newton polish left the physical range; keeping the integrated state");
                beta = b0;
                bz = z0;
            }
            Err(e) => {
                log::warn!("{e}; keeping the integrated state");
                beta = b0;
                bz = z0;
            }
        }
    }
    let residual = sys.residual(&beta, &bz);
    Ok(NonlinearState {
        positions,
        beta,
        beta_z: bz,
        t,
        rate,
        converged: rate < opts.tol || residual < 1e-9,
        residual,
    })
}
