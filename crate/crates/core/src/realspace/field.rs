use super::{DipoleState, DriveSpec};
use crate::numeric::linspace;
use crate::tensor::{norm3, sub3, Vec3};
use crate::{exec, greens, Error, Result, C64, DIPOLE_COUPLING, K0};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// Points closer than this to an emitter are masked.
pub const MASK_RADIUS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "plane", rename_all = "lowercase")]
pub enum Plane {
    Xz { y: f64 },
    Yz { x: f64 },
    Xy { z: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub plane: Plane,
    pub u: (f64, f64, usize),
    pub v: (f64, f64, usize),
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        for (lo, hi, n) in [self.u, self.v] {
            if n == 0 || !(lo.is_finite() && hi.is_finite()) || (n > 1 && hi <= lo) {
                return Err(Error::invalid("grid axes need count ≥ 1 and min < max"));
            }
        }
        Ok(())
    }

    /// Points with `u` varying fastest.
    pub fn points(&self) -> Vec<Vec3> {
        let us = linspace(self.u.0, self.u.1, self.u.2);
        let vs = linspace(self.v.0, self.v.1, self.v.2);
        let mut out = Vec::with_capacity(us.len() * vs.len());
        for &v in &vs {
            for &u in &us {
                out.push(match self.plane {
                    Plane::Xz { y } => [u, y, v],
                    Plane::Yz { x } => [x, u, v],
                    Plane::Xy { z } => [u, v, z],
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldMap {
    pub grid: GridSpec,
    pub points: Vec<Vec3>,
    /// Total field; `None` inside the mask radius of an emitter.
    pub field: Vec<Option<[C64; 3]>>,
}

impl FieldMap {
    pub fn intensity(&self) -> Vec<Option<[f64; 3]>> {
        self.field
            .iter()
            .map(|f| f.map(|e| e.map(|c| c.norm_sqr())))
            .collect()
    }
}

/// `(3π/k₀) Σ_j G(r − r_j) β_j`, or `None` within the mask radius.
pub(crate) fn scattered_at(state: &DipoleState, r: Vec3) -> Option<[C64; 3]> {
    let mut e = [C64::ZERO; 3];
    for (p, b) in state.positions.iter().zip(&state.beta) {
        let d = sub3(r, *p);
        let dn = norm3(d);
        if dn < MASK_RADIUS {
            return None;
        }
        let g = greens::green_unchecked(d, dn).apply(*b);
        for k in 0..3 {
            e[k] += g[k] * DIPOLE_COUPLING;
        }
    }
    Some(e)
}

pub fn field_map(state: &DipoleState, drive: &DriveSpec, grid: &GridSpec) -> Result<FieldMap> {
    grid.validate()?;
    let points = grid.points();
    let field = exec::map(points.len(), |k| {
        let r = points[k];
        scattered_at(state, r).map(|s| {
            let inc = drive.incident(r);
            [s[0] + inc[0], s[1] + inc[1], s[2] + inc[2]]
        })
    });
    Ok(FieldMap {
        grid: grid.clone(),
        points,
        field,
    })
}

/// Plane-wave fits of the zero-order reflection and transmission per in-plane
/// polarisation; `None` where that incident component vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reflectivity {
    pub r: [Option<f64>; 2],
    pub t: [Option<f64>; 2],
}

fn array_width(state: &DipoleState) -> f64 {
    let (lo, hi) = state
        .positions
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p[0]), h.max(p[0])));
    hi - lo
}

fn window_points(state: &DipoleState, window: Option<f64>, n: usize, z: f64) -> Result<Vec<Vec3>> {
    let width = array_width(state);
    let w = window.unwrap_or(0.25 * width);
    if !(w > 0.0) || w > width + 1e-12 {
        return Err(Error::invalid(format!(
            "sampling window {w} must be positive and within the array width {width}"
        )));
    }
    let c = state.positions.iter().fold([0.0, 0.0], |c, p| [c[0] + p[0], c[1] + p[1]]);
    let m = state.positions.len() as f64;
    let (cx, cy) = (c[0] / m, c[1] / m);
    let xs: Vec<f64> = (0..n).map(|i| cx - 0.5 * w + w * i as f64 / n as f64).collect();
    let ys: Vec<f64> = (0..n).map(|i| cy - 0.5 * w + w * i as f64 / n as f64).collect();
    Ok(ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| [x, y, z]))
        .collect())
}

/// Normal-incidence R and T from the scattered field on `n × n` points at
/// heights `∓z_sample` over a central window. The default, a quarter of the
/// array width, keeps edge diffraction out of the average.
pub fn reflectivity(
    state: &DipoleState,
    drive: &DriveSpec,
    z_sample: f64,
    window: Option<f64>,
    n: usize,
) -> Result<Reflectivity> {
    if drive.k_par != [0.0, 0.0] {
        return Err(Error::invalid("reflectivity fits assume normal incidence"));
    }
    if !(z_sample > MASK_RADIUS) || n == 0 {
        return Err(Error::invalid("z_sample must be positive and n ≥ 1"));
    }
    let z0 = state.positions.iter().map(|p| p[2]).sum::<f64>() / state.positions.len() as f64;
    let fit = |z: f64, sign: f64| -> Result<[C64; 2]> {
        let pts = window_points(state, window, n, z0 + z)?;
        let vals = exec::map(pts.len(), |k| scattered_at(state, pts[k]));
        let mut acc = [C64::ZERO; 2];
        let mut m = 0.0;
        for v in vals.into_iter().flatten() {
            // Project onto e^{±ik₀z}.
            let ph = C64::from_polar(1.0, -sign * K0 * z);
            acc[0] += v[0] * ph;
            acc[1] += v[1] * ph;
            m += 1.0;
        }
        Ok(acc.map(|a| a / m))
    };
    let fwd = fit(z_sample, 1.0)?;
    let back = fit(-z_sample, -1.0)?;
    let eta = drive.eta;
    let mut out = Reflectivity { r: [None; 2], t: [None; 2] };
    for k in 0..2 {
        if eta[k].norm() > 1e-12 {
            let ein = -eta[k];
            out.r[k] = Some((back[k] / ein).norm_sqr());
            out.t[k] = Some(((ein + fwd[k]) / ein).norm_sqr());
        }
    }
    Ok(out)
}

/// Fraction of the transverse scattered power outside the zero spatial
/// frequency, from an `n × n` FFT of the in-plane field components at
/// height `z` over a central window.
pub fn off_axis_fraction(state: &DipoleState, z: f64, window: Option<f64>, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid("spectrum grid needs n ≥ 2"));
    }
    let pts = window_points(state, window, n, z)?;
    let vals = exec::map(pts.len(), |k| scattered_at(state, pts[k]));
    if vals.iter().any(|v| v.is_none()) {
        return Err(Error::invalid("spectrum plane passes through an emitter"));
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let (mut total, mut dc) = (0.0, 0.0);
    for comp in 0..2 {
        let mut data: Vec<C64> = vals.iter().map(|v| v.unwrap()[comp]).collect();
        for row in data.chunks_mut(n) {
            fft.process(row);
        }
        let mut col = vec![C64::ZERO; n];
        for c in 0..n {
            for r in 0..n {
                col[r] = data[r * n + c];
            }
            fft.process(&mut col);
            for r in 0..n {
                data[r * n + c] = col[r];
            }
        }
        total += data.iter().map(|z| z.norm_sqr()).sum::<f64>();
        dc += data[0].norm_sqr();
    }
    if !(total > 0.0) {
        return Err(Error::invalid("no scattered field in the spectrum window"));
    }
    Ok(1.0 - dc / total)
}
