//! Tabular writers. Floats are written in their shortest round-trip form
//! (exponent notation for very small or large magnitudes), so identical
//! inputs give identical bytes. Missing values are empty fields.

use crate::bands::{BandPoint, Polarizability};
use crate::realspace::{DisorderedBand, FieldMap};
use crate::scattering::{JonesMatrix, PhaseObservables, PhaseScanPoint, PolarizerScan, RidgeKind, ScanGrid};
use crate::{Vec2, C64};
use std::fmt::Write as _;
use std::io::{self, Write};

/// One CSV line under construction.
#[derive(Default)]
pub struct Row {
    buf: String,
    fields: usize,
}

impl Row {
    pub fn new() -> Self {
        Self::default()
    }

    fn field(&mut self) -> &mut String {
        if self.fields > 0 {
            self.buf.push(',');
        }
        self.fields += 1;
        &mut self.buf
    }

    pub fn num(mut self, x: f64) -> Self {
        let _ = write!(self.field(), "{x:?}");
        self
    }

    pub fn int(mut self, x: impl std::fmt::Display) -> Self {
        let _ = write!(self.field(), "{x}");
        self
    }

    pub fn text(mut self, s: &str) -> Self {
        self.field().push_str(s);
        self
    }

    pub fn empty(mut self, n: usize) -> Self {
        for _ in 0..n {
            self.field();
        }
        self
    }

    pub fn opt(self, x: Option<f64>) -> Self {
        match x {
            Some(x) => self.num(x),
            None => self.empty(1),
        }
    }

    pub fn cplx(self, z: C64) -> Self {
        self.num(z.re).num(z.im)
    }

    pub fn opt_cplx(self, z: Option<C64>) -> Self {
        match z {
            Some(z) => self.cplx(z),
            None => self.empty(2),
        }
    }

    pub fn jones(self, t: &JonesMatrix) -> Self {
        let m = t.0;
        self.cplx(m[0][0]).cplx(m[0][1]).cplx(m[1][0]).cplx(m[1][1])
    }

    pub fn end<W: Write>(self, w: &mut W) -> io::Result<()> {
        writeln!(w, "{}", self.buf)
    }
}

pub const JONES_COLUMNS: &str = "txx_re,txx_im,txy_re,txy_im,tyx_re,tyx_im,tyy_re,tyy_im";

/// `segment,s,q_x,q_y,band,re_e,decay,psi_x2,psi_y2,psi_z2,residual`
pub fn write_bands<W: Write>(mut w: W, points: &[BandPoint]) -> io::Result<()> {
    writeln!(w, "segment,s,q_x,q_y,band,re_e,decay,psi_x2,psi_y2,psi_z2,residual")?;
    for p in points {
        let sm = &p.sample;
        for (b, c) in p.content.iter().enumerate() {
            Row::new()
                .int(sm.segment)
                .num(sm.s)
                .num(sm.q[0])
                .num(sm.q[1])
                .int(b)
                .num(p.shift(b))
                .num(p.decay(b))
                .num(c[0])
                .num(c[1])
                .num(c[2])
                .num(p.residual)
                .end(&mut w)?;
        }
    }
    Ok(())
}

/// Sublattice-symmetric in-plane polarizability along a path; empty fields
/// where the response could not be inverted.
pub fn write_polarizability<W: Write>(mut w: W, rows: &[(f64, Vec2, Option<Polarizability>)]) -> io::Result<()> {
    writeln!(w, "s,q_x,q_y,axx_re,axx_im,ayy_re,ayy_im,axy_re,axy_im")?;
    for (s, q, p) in rows {
        let r = Row::new().num(*s).num(q[0]).num(q[1]);
        match p {
            Some(p) => {
                let a = &p.symmetric;
                r.cplx(a[(0, 0)]).cplx(a[(1, 1)]).cplx(a[(0, 1)])
            }
            None => r.empty(6),
        }
        .end(&mut w)?;
    }
    Ok(())
}

/// Long-format `(row, col, value)` grid.
pub fn write_scalar_grid<W: Write>(mut w: W, grid: &ScanGrid<f64>, value: &str) -> io::Result<()> {
    writeln!(w, "{},{},{}", grid.rows.name, grid.cols.name, value)?;
    let (rv, cv) = (grid.rows.values(), grid.cols.values());
    for (r, x) in rv.iter().enumerate() {
        for (c, y) in cv.iter().enumerate() {
            Row::new().num(*x).num(*y).opt(grid.get(r, c).copied()).end(&mut w)?;
        }
    }
    Ok(())
}

pub fn write_ridges<W: Write>(mut w: W, scan: &PolarizerScan) -> io::Result<()> {
    writeln!(w, "a,delta,visibility,kind,{JONES_COLUMNS}")?;
    for r in &scan.ridges {
        let kind = match r.kind {
            RidgeKind::X => "x",
            RidgeKind::Y => "y",
        };
        Row::new()
            .num(r.a)
            .num(r.delta)
            .num(r.visibility)
            .text(kind)
            .jones(&r.t)
            .end(&mut w)?;
    }
    Ok(())
}

pub fn write_phase_grid<W: Write>(mut w: W, grid: &ScanGrid<PhaseObservables>) -> io::Result<()> {
    writeln!(w, "{},{},delta_phi,i_out,delta_i", grid.rows.name, grid.cols.name)?;
    let (rv, cv) = (grid.rows.values(), grid.cols.values());
    for (r, x) in rv.iter().enumerate() {
        for (c, y) in cv.iter().enumerate() {
            let row = Row::new().num(*x).num(*y);
            match grid.get(r, c) {
                Some(o) => row.opt(o.delta_phi).num(o.i_out).num(o.delta_i),
                None => row.empty(3),
            }
            .end(&mut w)?;
        }
    }
    Ok(())
}

/// Line scan; `delta_phi` wrapped to (−π, π] next to its unwrapped copy.
pub fn write_phase_line<W: Write>(mut w: W, param: &str, pts: &[PhaseScanPoint]) -> io::Result<()> {
    writeln!(
        w,
        "{param},mub_x,mub_y,mub_z,delta_phi,delta_phi_unwrapped,i_out,delta_i,{JONES_COLUMNS}"
    )?;
    for p in pts {
        let b = p.field.0;
        Row::new()
            .num(p.param)
            .num(b[0])
            .num(b[1])
            .num(b[2])
            .opt(p.obs.delta_phi)
            .opt(p.delta_phi_unwrapped)
            .num(p.obs.i_out)
            .num(p.obs.delta_i)
            .jones(&p.t)
            .end(&mut w)?;
    }
    Ok(())
}

/// `x,y,z,ex_re,ex_im,ey_re,ey_im,ez_re,ez_im,i_x,i_y,i_z`; masked points
/// keep their coordinates and leave the field columns empty.
pub fn write_field_map<W: Write>(mut w: W, map: &FieldMap) -> io::Result<()> {
    writeln!(w, "x,y,z,ex_re,ex_im,ey_re,ey_im,ez_re,ez_im,i_x,i_y,i_z")?;
    for (p, f) in map.points.iter().zip(&map.field) {
        let r = Row::new().num(p[0]).num(p[1]).num(p[2]);
        match f {
            Some(e) => r
                .cplx(e[0])
                .cplx(e[1])
                .cplx(e[2])
                .num(e[0].norm_sqr())
                .num(e[1].norm_sqr())
                .num(e[2].norm_sqr()),
            None => r.empty(9),
        }
        .end(&mut w)?;
    }
    Ok(())
}

/// Ensemble-averaged intensity; no phases survive the average.
pub fn write_intensity_map<W: Write>(mut w: W, points: &[[f64; 3]], mean: &[Option<[f64; 3]>]) -> io::Result<()> {
    writeln!(w, "x,y,z,i_x,i_y,i_z")?;
    for (p, m) in points.iter().zip(mean) {
        let r = Row::new().num(p[0]).num(p[1]).num(p[2]);
        match m {
            Some(i) => r.num(i[0]).num(i[1]).num(i[2]),
            None => r.empty(3),
        }
        .end(&mut w)?;
    }
    Ok(())
}

pub fn write_disordered_bands<W: Write>(mut w: W, s: &[f64], bands: &[DisorderedBand]) -> io::Result<()> {
    writeln!(w, "s,q_x,q_y,ex_re,ex_im,ey_re,ey_im,ez_re,ez_im,excluded")?;
    for (s, b) in s.iter().zip(bands) {
        Row::new()
            .num(*s)
            .num(b.q[0])
            .num(b.q[1])
            .opt_cplx(b.values[0])
            .opt_cplx(b.values[1])
            .opt_cplx(b.values[2])
            .int(b.excluded)
            .end(&mut w)?;
    }
    Ok(())
}

/// One JSON object per line.
pub fn write_ndjson<W: Write, T: serde::Serialize>(mut w: W, records: &[T]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    Ok(())
}
