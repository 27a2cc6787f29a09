use super::field::{field_map, reflectivity, FieldMap, GridSpec, Reflectivity};
use super::{solve_positions, DipoleState, DriveSpec, SolverOptions};
use crate::bands::{zeeman_matrix, ZeemanField};
use crate::lattice::{make_emitter_set, EmitterSet, Lattice};
use crate::tensor::{Tensor3, Vec2, Vec3};
use crate::{exec, greens, Error, Result, C64};
use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Static Gaussian position disorder; configuration `c` draws from stream `c`
/// of a ChaCha8 generator seeded with `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub sigma_xy: f64,
    pub sigma_z: f64,
    pub n_configs: usize,
    pub seed: u64,
}

impl DisorderSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_xy >= 0.0 && self.sigma_z >= 0.0) || !self.sigma_xy.is_finite() || !self.sigma_z.is_finite() {
            return Err(Error::invalid("disorder widths must be non-negative"));
        }
        if self.n_configs == 0 {
            return Err(Error::invalid("need at least one configuration"));
        }
        Ok(())
    }

    /// Displaced copy of `positions` for configuration `config`.
    pub fn displace(&self, positions: &[Vec3], config: usize) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(config as u64);
        let nxy = Normal::new(0.0, self.sigma_xy.max(f64::MIN_POSITIVE)).unwrap();
        let nz = Normal::new(0.0, self.sigma_z.max(f64::MIN_POSITIVE)).unwrap();
        positions
            .iter()
            .map(|p| {
                let dx = nxy.sample(&mut rng);
                let dy = nxy.sample(&mut rng);
                let dz = nz.sample(&mut rng);
                let s = |d: f64, sig: f64| if sig > 0.0 { d } else { 0.0 };
                [
                    p[0] + s(dx, self.sigma_xy),
                    p[1] + s(dy, self.sigma_xy),
                    p[2] + s(dz, self.sigma_z),
                ]
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigRecord {
    pub config: usize,
    pub seed: u64,
    pub sigma_xy: f64,
    pub sigma_z: f64,
    pub residual: Option<f64>,
    pub reflectivity: Option<Reflectivity>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ensemble {
    pub records: Vec<ConfigRecord>,
    /// Configuration-averaged `|E_α|²` on the grid; masked if any
    /// configuration masks the point.
    pub mean_intensity: Option<Vec<Option<[f64; 3]>>>,
    pub grid: Option<GridSpec>,
}

/// Per-configuration sampling geometry for R/T fits.
const Z_SAMPLE: f64 = 5.0;
const FIT_POINTS: usize = 12;

pub fn thermal_ensemble(
    emitters: &EmitterSet,
    drive: &DriveSpec,
    dis: &DisorderSpec,
    grid: Option<&GridSpec>,
    opts: &SolverOptions,
) -> Result<Ensemble> {
    dis.validate()?;
    drive.validate()?;
    if let Some(g) = grid {
        g.validate()?;
    }
    let base = emitters.occupied_positions();
    let runs = exec::map(dis.n_configs, |c| {
        let pos = dis.displace(&base, c);
        let state = solve_positions(&pos, drive, opts);
        let map = match (&state, grid) {
            (Ok(s), Some(g)) => field_map(s, drive, g).ok().map(|m| m.intensity()),
            _ => None,
        };
        let rec = match &state {
            Ok(s) => ConfigRecord {
                config: c,
                seed: dis.seed,
                sigma_xy: dis.sigma_xy,
                sigma_z: dis.sigma_z,
                residual: Some(s.residual),
                reflectivity: reflectivity(s, drive, Z_SAMPLE, None, FIT_POINTS).ok(),
                error: None,
            },
            Err(e) => ConfigRecord {
                config: c,
                seed: dis.seed,
                sigma_xy: dis.sigma_xy,
                sigma_z: dis.sigma_z,
                residual: None,
                reflectivity: None,
                error: Some(e.to_string()),
            },
        };
        (rec, map)
    });
    let mut records = Vec::with_capacity(runs.len());
    let mut sum: Option<Vec<Option<[f64; 3]>>> = None;
    let mut count = 0usize;
    for (rec, map) in runs {
        if let Some(m) = map {
            count += 1;
            sum = Some(match sum {
                None => m,
                Some(acc) => acc
                    .into_iter()
                    .zip(m)
                    .map(|(a, b)| match (a, b) {
                        (Some(a), Some(b)) => Some([a[0] + b[0], a[1] + b[1], a[2] + b[2]]),
                        _ => None,
                    })
                    .collect(),
            });
        }
        records.push(rec);
    }
    if records.iter().all(|r| r.error.is_some()) {
        return Err(Error::ConvergenceFailure {
            what: format!("every configuration failed ({})", records[0].error.as_deref().unwrap_or("")),
            residual: f64::NAN,
            tolerance: opts.residual_tol,
        });
    }
    let mean_intensity = sum.map(|s| {
        s.into_iter()
            .map(|v| v.map(|a| a.map(|x| x / count as f64)))
            .collect()
    });
    Ok(Ensemble {
        records,
        mean_intensity,
        grid: grid.cloned(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisorderedBand {
    pub q: Vec2,
    /// Harmonic-mean eigenvalue per dominant polarisation (x, y, z).
    pub values: [Option<C64>; 3],
    /// Configurations dropped for a vanishing eigenvalue.
    pub excluded: usize,
}

/// Effective band diagram of a disordered patch: per configuration the 3×3
/// matrix `⟨q|M|q⟩/N` over lattice-momentum states, its eigenvalues assigned
/// to x, y, z by eigenvector content, combined as harmonic means.
pub fn disordered_bands(
    lat: &Lattice,
    extent: (usize, usize),
    dis: &DisorderSpec,
    field: ZeemanField,
    qs: &[Vec2],
) -> Result<Vec<DisorderedBand>> {
    dis.validate()?;
    let set = make_emitter_set(lat, extent.0, extent.1, 0.0, 0)?;
    let sites = set.positions.clone();
    let n = sites.len();
    let diag = zeeman_matrix(field) - Tensor3::identity() * C64::new(0.0, 0.5);
    let per_config = exec::map(dis.n_configs, |c| {
        let pos = dis.displace(&sites, c);
        // Six unique components of Ω − iΓ/2 for every ordered pair.
        let mut pairs = vec![[C64::ZERO; 6]; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let b = greens::pair_block(crate::tensor::sub3(pos[i], pos[j]));
                let v = [b[(0, 0)], b[(1, 1)], b[(2, 2)], b[(0, 1)], b[(0, 2)], b[(1, 2)]];
                pairs[i * n + j] = v;
                pairs[j * n + i] = v;
            }
        }
        qs.iter()
            .map(|q| {
                let ph: Vec<C64> = sites.iter().map(|r| C64::from_polar(1.0, q[0] * r[0] + q[1] * r[1])).collect();
                let mut acc = [C64::ZERO; 6];
                for i in 0..n {
                    let mut row = [C64::ZERO; 6];
                    for j in 0..n {
                        let p = ph[j].conj();
                        for (r, v) in row.iter_mut().zip(pairs[i * n + j]) {
                            *r += v * p;
                        }
                    }
                    for (a, r) in acc.iter_mut().zip(row) {
                        *a += r * ph[i];
                    }
                }
                let s = 1.0 / n as f64;
                let t = Tensor3([
                    [acc[0] * s, acc[3] * s, acc[4] * s],
                    [acc[3] * s, acc[1] * s, acc[5] * s],
                    [acc[4] * s, acc[5] * s, acc[2] * s],
                ]) + diag;
                channel_eigenvalues(&t)
            })
            .collect::<Vec<_>>()
    });
    Ok(qs
        .iter()
        .enumerate()
        .map(|(k, q)| {
            let mut inv = [C64::ZERO; 3];
            let mut cnt = [0usize; 3];
            let mut excluded = 0;
            for cfg in &per_config {
                let Some(ev) = cfg[k] else {
                    excluded += 1;
                    continue;
                };
                if ev.iter().any(|e| e.norm() < 1e-12) {
                    log::warn!("disordered band at q = ({:.3}, {:.3}): zero eigenvalue, configuration dropped", q[0], q[1]);
                    excluded += 1;
                    continue;
                }
                for ch in 0..3 {
                    inv[ch] += 1.0 / ev[ch];
                    cnt[ch] += 1;
                }
            }
            DisorderedBand {
                q: *q,
                values: [0, 1, 2].map(|ch| (cnt[ch] > 0).then(|| cnt[ch] as f64 / inv[ch])),
                excluded,
            }
        })
        .collect())
}

/// Eigenvalues ordered by dominant Cartesian content (x, y, z).
fn channel_eigenvalues(t: &Tensor3) -> Option<[C64; 3]> {
    let m = Mat::<C64>::from_fn(3, 3, |i, j| t[(i, j)]);
    let e = m.eigen().ok()?;
    let (u, s) = (e.U(), e.S());
    let content: Vec<[f64; 3]> = (0..3)
        .map(|k| {
            let c = [0, 1, 2].map(|i| u[(i, k)].norm_sqr());
            let tot: f64 = c.iter().sum();
            c.map(|x| x / tot)
        })
        .collect();
    // Best assignment over the six permutations.
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let best = perms
        .iter()
        .max_by(|a, b| {
            let sa: f64 = (0..3).map(|ch| content[a[ch]][ch]).sum();
            let sb: f64 = (0..3).map(|ch| content[b[ch]][ch]).sum();
            sa.total_cmp(&sb)
        })
        .unwrap();
    Some(best.map(|k| s[k]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VacancyRun {
    pub p: f64,
    pub emitters: EmitterSet,
    pub state: DipoleState,
    pub reflectivity: Reflectivity,
    pub map: Option<FieldMap>,
}

/// One linear solve per vacancy probability, each patch seeded with `seed`.
pub fn vacancy_runs(
    lat: &Lattice,
    extent: (usize, usize),
    p_list: &[f64],
    drive: &DriveSpec,
    seed: u64,
    grid: Option<&GridSpec>,
    opts: &SolverOptions,
) -> Result<Vec<VacancyRun>> {
    p_list
        .iter()
        .map(|&p| {
            let emitters = make_emitter_set(lat, extent.0, extent.1, p, seed)?;
            let state = solve_positions(&emitters.occupied_positions(), drive, opts)?;
            let refl = reflectivity(&state, drive, Z_SAMPLE, Some(0.5 * emitters.width()), FIT_POINTS)?;
            let map = grid.map(|g| field_map(&state, drive, g)).transpose()?;
            Ok(VacancyRun {
                p,
                emitters,
                state,
                reflectivity: refl,
                map,
            })
        })
        .collect()
}
