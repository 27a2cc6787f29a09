use super::{jones, phase_observables, visibility, JonesMatrix, PhaseObservables};
use crate::bands::{LatticeResponse, SumConfig, ZeemanField};
use crate::lattice::Lattice;
use crate::numeric::{linspace, minimize, unwrap_phase};
use crate::{exec, Error, Result, C64};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanAxis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl ScanAxis {
    pub fn new(name: &str, min: f64, max: f64, count: usize) -> Result<Self> {
        if count == 0 || !min.is_finite() || !max.is_finite() || (count > 1 && max <= min) {
            return Err(Error::invalid(format!(
                "axis `{name}` needs count ≥ 1 and min < max, got [{min}, {max}] × {count}"
            )));
        }
        Ok(Self {
            name: name.to_string(),
            min,
            max,
            count,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        linspace(self.min, self.max, self.count)
    }
}

/// Row-major grid: `rows` is the outer axis, `cols` the inner one. Cells that
/// failed to evaluate are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanGrid<P> {
    pub rows: ScanAxis,
    pub cols: ScanAxis,
    pub cells: Vec<Option<P>>,
}

impl<P> ScanGrid<P> {
    pub fn get(&self, r: usize, c: usize) -> Option<&P> {
        self.cells[r * self.cols.count + c].as_ref()
    }

    pub fn row(&self, r: usize) -> &[Option<P>] {
        &self.cells[r * self.cols.count..(r + 1) * self.cols.count]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RidgeKind {
    /// 𝒱 → +1: y is blocked.
    X,
    /// 𝒱 → −1: x is blocked.
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RidgePoint {
    pub a: f64,
    pub delta: f64,
    pub visibility: f64,
    pub kind: RidgeKind,
    pub t: JonesMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarizerScan {
    pub grid: ScanGrid<f64>,
    pub ridges: Vec<RidgePoint>,
}

fn check_subwavelength(axis: &ScanAxis) -> Result<()> {
    if axis.min <= 0.0 || axis.max >= 1.0 {
        return Err(Error::invalid("polariser scans need spacings in (0, λ)"));
    }
    Ok(())
}

/// Visibility over (a, Δ) for square lattices, with ridges of |𝒱| → 1
/// refined in Δ on every row.
pub fn polarizer_scan(
    a_axis: &ScanAxis,
    delta_axis: &ScanAxis,
    field: ZeemanField,
    e_in: [C64; 2],
    cfg: &SumConfig,
) -> Result<PolarizerScan> {
    check_subwavelength(a_axis)?;
    let a_vals = a_axis.values();
    let d_vals = delta_axis.values();
    let rows = exec::map(a_vals.len(), |r| {
        let a = a_vals[r];
        let resp = Lattice::square(a).and_then(|l| LatticeResponse::new(&l, [0.0, 0.0], cfg));
        let resp = match resp {
            Ok(x) => x,
            Err(e) => {
                log::warn!("polarizer scan row a = {a}: {e}");
                return (vec![None; d_vals.len()], vec![]);
            }
        };
        let vis = |d: f64| jones(&resp, d, field).and_then(|t| visibility(&t, e_in)).ok();
        let cells: Vec<Option<f64>> = d_vals.iter().map(|&d| vis(d)).collect();
        let ridges = row_ridges(&resp, &d_vals, &cells, field, e_in);
        (cells, ridges)
    });
    let mut cells = Vec::with_capacity(a_vals.len() * d_vals.len());
    let mut ridges = vec![];
    for (c, r) in rows {
        cells.extend(c);
        ridges.extend(r);
    }
    Ok(PolarizerScan {
        grid: ScanGrid {
            rows: a_axis.clone(),
            cols: delta_axis.clone(),
            cells,
        },
        ridges,
    })
}

fn row_ridges(
    resp: &LatticeResponse,
    d: &[f64],
    v: &[Option<f64>],
    field: ZeemanField,
    e_in: [C64; 2],
) -> Vec<RidgePoint> {
    let mut out = vec![];
    let n = d.len();
    for k in 0..n {
        let Some(vk) = v[k] else { continue };
        let nb = |j: Option<usize>| j.and_then(|j| v.get(j).copied().flatten());
        let left = nb(k.checked_sub(1));
        let right = nb(Some(k + 1));
        let (kind, sign) = if vk < -0.9 {
            (RidgeKind::Y, 1.0)
        } else if vk > 0.9 {
            (RidgeKind::X, -1.0)
        } else {
            continue;
        };
        let extremum = left.is_none_or(|l| sign * vk < sign * l) && right.is_none_or(|r| sign * vk <= sign * r);
        if !extremum {
            continue;
        }
        let lo = d[k.saturating_sub(1)];
        let hi = d[(k + 1).min(n - 1)];
        let f = |x: f64| {
            jones(resp, x, field)
                .and_then(|t| visibility(&t, e_in))
                .map(|v| sign * v)
                .unwrap_or(f64::INFINITY)
        };
        let (x, _) = if hi > lo { minimize(f, lo, hi, 1e-12) } else { (d[k], 0.0) };
        if let Ok(t) = jones(resp, x, field) {
            if let Ok(vis) = visibility(&t, e_in) {
                out.push(RidgePoint {
                    a: resp.lattice.spacing,
                    delta: x,
                    visibility: vis,
                    kind,
                    t,
                });
            }
        }
    }
    out
}

/// `μB(ε) = (ε − 1.75, ε, 0)`: symmetric detuning of B_x and B_y around the
/// balanced-intensity point `μB_x = −1.75`.
pub fn waveplate_field(eps: f64) -> ZeemanField {
    ZeemanField::new(eps - 1.75, eps, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseScanPoint {
    pub param: f64,
    pub field: ZeemanField,
    pub t: JonesMatrix,
    pub obs: PhaseObservables,
    /// Continuous continuation of Δφ along the scan.
    pub delta_phi_unwrapped: Option<f64>,
}

/// Phase observables along an arbitrary field line `field_of(param)`.
pub fn field_line_scan(
    resp: &LatticeResponse,
    delta: f64,
    params: &[f64],
    field_of: impl Fn(f64) -> ZeemanField + Sync + Send,
    e_in: [C64; 2],
) -> Result<Vec<PhaseScanPoint>> {
    let mut pts = exec::try_map(params.len(), |k| {
        let field = field_of(params[k]);
        let t = jones(resp, delta, field)?;
        Ok::<_, Error>(PhaseScanPoint {
            param: params[k],
            field,
            t,
            obs: phase_observables(&t, e_in),
            delta_phi_unwrapped: None,
        })
    })?;
    // Unwrap each run of defined phases separately.
    let mut start = 0;
    while start < pts.len() {
        if pts[start].obs.delta_phi.is_none() {
            start += 1;
            continue;
        }
        let mut end = start;
        while end < pts.len() && pts[end].obs.delta_phi.is_some() {
            end += 1;
        }
        let raw: Vec<f64> = pts[start..end].iter().map(|p| p.obs.delta_phi.unwrap()).collect();
        for (p, u) in pts[start..end].iter_mut().zip(unwrap_phase(&raw)) {
            p.delta_phi_unwrapped = Some(u);
        }
        start = end;
    }
    Ok(pts)
}

/// Waveplate scan along [`waveplate_field`].
pub fn waveplate_scan(
    resp: &LatticeResponse,
    delta: f64,
    eps: &[f64],
    e_in: [C64; 2],
) -> Result<Vec<PhaseScanPoint>> {
    field_line_scan(resp, delta, eps, waveplate_field, e_in)
}

/// Phase observables over (a, Δ) for square lattices at a fixed field.
pub fn phase_map(
    a_axis: &ScanAxis,
    delta_axis: &ScanAxis,
    field: ZeemanField,
    e_in: [C64; 2],
    cfg: &SumConfig,
) -> Result<ScanGrid<PhaseObservables>> {
    check_subwavelength(a_axis)?;
    let a_vals = a_axis.values();
    let d_vals = delta_axis.values();
    let rows = exec::map(a_vals.len(), |r| {
        match Lattice::square(a_vals[r]).and_then(|l| LatticeResponse::new(&l, [0.0, 0.0], cfg)) {
            Ok(resp) => d_vals
                .iter()
                .map(|&d| jones(&resp, d, field).ok().map(|t| phase_observables(&t, e_in)))
                .collect(),
            Err(e) => {
                log::warn!("phase map row a = {}: {e}", a_vals[r]);
                vec![None; d_vals.len()]
            }
        }
    });
    Ok(ScanGrid {
        rows: a_axis.clone(),
        cols: delta_axis.clone(),
        cells: rows.into_iter().flatten().collect(),
    })
}
