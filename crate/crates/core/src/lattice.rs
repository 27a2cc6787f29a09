//! Bravais lattices with a basis, Brillouin-zone paths and finite emitter patches.

use crate::tensor::{dot2, norm2, Vec2, Vec3};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};
use std::f64::consts::PI;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Square,
    Triangular,
    Honeycomb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub kind: LatticeKind,
    pub a1: Vec2,
    pub a2: Vec2,
    /// Sublattice offsets; the first is always the origin.
    pub basis: Vec<Vec2>,
    /// The defining length: lattice constant, or bond length for honeycomb.
    pub spacing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReciprocalLattice {
    pub g1: Vec2,
    pub g2: Vec2,
}

fn check_spacing(a: f64) -> Result<()> {
    if a.is_finite() && a > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("lattice spacing must be positive, got {a}")))
    }
}

impl Lattice {
    pub fn square(a: f64) -> Result<Self> {
        check_spacing(a)?;
        Ok(Self {
            kind: LatticeKind::Square,
            a1: [a, 0.0],
            a2: [0.0, a],
            basis: vec![[0.0, 0.0]],
            spacing: a,
        })
    }

    pub fn triangular(a: f64) -> Result<Self> {
        check_spacing(a)?;
        Ok(Self {
            kind: LatticeKind::Triangular,
            a1: [a, 0.0],
            a2: [0.5 * a, 0.5 * 3f64.sqrt() * a],
            basis: vec![[0.0, 0.0]],
            spacing: a,
        })
    }

    /// Honeycomb with nearest-neighbour distance `d`: a triangular lattice of
    /// constant `√3·d` with the second site at `(a1 + a2)/3`.
    pub fn honeycomb(d: f64) -> Result<Self> {
        check_spacing(d)?;
        let tri = Self::triangular(3f64.sqrt() * d)?;
        let b = [(tri.a1[0] + tri.a2[0]) / 3.0, (tri.a1[1] + tri.a2[1]) / 3.0];
        Ok(Self {
            kind: LatticeKind::Honeycomb,
            basis: vec![[0.0, 0.0], b],
            spacing: d,
            ..tri
        })
    }

    pub fn new(kind: LatticeKind, spacing: f64) -> Result<Self> {
        match kind {
            LatticeKind::Square => Self::square(spacing),
            LatticeKind::Triangular => Self::triangular(spacing),
            LatticeKind::Honeycomb => Self::honeycomb(spacing),
        }
    }

    /// Parse `kind:spacing`, e.g. `square:0.8`. Units are implicit (λ); a
    /// trailing unit suffix is rejected.
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, value) = spec
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("lattice `{spec}`: expected kind:spacing")))?;
        let kind = match kind.trim().to_ascii_lowercase().as_str() {
            "square" => LatticeKind::Square,
            "triangular" => LatticeKind::Triangular,
            "honeycomb" => LatticeKind::Honeycomb,
            other => return Err(Error::invalid(format!("unknown lattice kind `{other}`"))),
        };
        let value = value.trim();
        let a: f64 = value.parse().map_err(|_| {
            Error::invalid(format!(
                "lattice spacing `{value}` is not a bare number; lengths are given in units of λ"
            ))
        })?;
        Self::new(kind, a)
    }

    pub fn sublattices(&self) -> usize {
        self.basis.len()
    }

    pub fn area(&self) -> f64 {
        (self.a1[0] * self.a2[1] - self.a1[1] * self.a2[0]).abs()
    }

    pub fn site(&self, i: i64, j: i64, nu: usize) -> Vec2 {
        let b = self.basis[nu];
        [
            i as f64 * self.a1[0] + j as f64 * self.a2[0] + b[0],
            i as f64 * self.a1[1] + j as f64 * self.a2[1] + b[1],
        ]
    }

    pub fn reciprocal(&self) -> Result<ReciprocalLattice> {
        reciprocal(self.a1, self.a2)
    }

    /// Shortest nonzero reciprocal vector length.
    pub fn min_g(&self) -> f64 {
        let r = self.reciprocal().expect("validated lattice");
        let s = [r.g1[0] - r.g2[0], r.g1[1] - r.g2[1]];
        let t = [r.g1[0] + r.g2[0], r.g1[1] + r.g2[1]];
        norm2(r.g1).min(norm2(r.g2)).min(norm2(s)).min(norm2(t))
    }
}

impl fmt::Display for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            LatticeKind::Square => "square",
            LatticeKind::Triangular => "triangular",
            LatticeKind::Honeycomb => "honeycomb",
        };
        write!(f, "{k}:{}", self.spacing)
    }
}

/// `g_i · a_j = 2π δ_ij`.
pub fn reciprocal(a1: Vec2, a2: Vec2) -> Result<ReciprocalLattice> {
    let det = a1[0] * a2[1] - a1[1] * a2[0];
    if !det.is_finite() || det.abs() <= 1e-12 * norm2(a1) * norm2(a2) {
        return Err(Error::SingularLattice);
    }
    let s = 2.0 * PI / det;
    Ok(ReciprocalLattice {
        g1: [s * a2[1], -s * a2[0]],
        g2: [-s * a1[1], s * a1[0]],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BzSample {
    pub segment: usize,
    /// Cumulative path length.
    pub s: f64,
    pub q: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BzPath {
    pub vertices: Vec<(String, Vec2)>,
    pub samples: Vec<BzSample>,
}

/// Named high-symmetry point. Accepted names: `G` (or `Gamma`, `Γ`), `X`, `M`
/// for square lattices and `G`, `M`, `K` for triangular and honeycomb ones.
pub fn symmetry_point(lat: &Lattice, name: &str) -> Result<Vec2> {
    let r = lat.reciprocal()?;
    let half = |g: Vec2| [0.5 * g[0], 0.5 * g[1]];
    let n = name.trim();
    let p = match (lat.kind, n) {
        (_, "G" | "Gamma" | "Γ" | "gamma") => [0.0, 0.0],
        (LatticeKind::Square, "X") => half(r.g1),
        (LatticeKind::Square, "M") => half([r.g1[0] + r.g2[0], r.g1[1] + r.g2[1]]),
        (LatticeKind::Triangular | LatticeKind::Honeycomb, "M") => half(r.g2),
        (LatticeKind::Triangular | LatticeKind::Honeycomb, "K") => {
            // Corner between g1 and g1 + g2 (equivalently at 4π/(3a) along a1).
            let l = norm2(lat.a1);
            let u = [lat.a1[0] / l, lat.a1[1] / l];
            let k = 4.0 * PI / (3.0 * l);
            [k * u[0], k * u[1]]
        }
        _ => {
            return Err(Error::invalid(format!(
                "`{n}` is not a symmetry point of a {} lattice",
                lat
            )))
        }
    };
    Ok(p)
}

pub fn bz_path(lat: &Lattice, names: &[&str], samples_per_segment: usize) -> Result<BzPath> {
    if names.len() < 2 {
        return Err(Error::invalid("a path needs at least two vertices"));
    }
    if samples_per_segment < 2 {
        return Err(Error::invalid("samples_per_segment must be at least 2"));
    }
    let vertices = names
        .iter()
        .map(|n| Ok((n.trim().to_string(), symmetry_point(lat, n)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut samples = Vec::with_capacity((names.len() - 1) * (samples_per_segment - 1) + 1);
    let mut s0 = 0.0;
    let n = samples_per_segment - 1;
    for (seg, w) in vertices.windows(2).enumerate() {
        let (p, q) = (w[0].1, w[1].1);
        let len = norm2([q[0] - p[0], q[1] - p[1]]);
        let start = if seg == 0 { 0 } else { 1 };
        for k in start..=n {
            let t = k as f64 / n as f64;
            samples.push(BzSample {
                segment: seg,
                s: s0 + t * len,
                q: [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])],
            });
        }
        s0 += len;
    }
    Ok(BzPath { vertices, samples })
}

/// A finite patch of a lattice, centred on the origin, in the plane z = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct EmitterSet {
    pub lattice: Lattice,
    pub extent: (usize, usize),
    /// All sites in (i, j, ν) order.
    pub positions: Vec<Vec3>,
    pub sublattice: Vec<usize>,
    pub occupied: Vec<bool>,
}

impl EmitterSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    pub fn occupied_positions(&self) -> Vec<Vec3> {
        self.positions
            .iter()
            .zip(&self.occupied)
            .filter(|(_, &o)| o)
            .map(|(p, _)| *p)
            .collect()
    }

    /// Width of the patch along x.
    pub fn width(&self) -> f64 {
        let (lo, hi) = self
            .positions
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p[0]), hi.max(p[0]))
            });
        hi - lo
    }
}

impl Serialize for EmitterSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("EmitterSet", 3)?;
        st.serialize_field("extent", &self.extent)?;
        st.serialize_field("sites", &self.positions.len())?;
        st.serialize_field("occupied", &self.occupied_count())?;
        st.end()
    }
}

/// Build an `n1 × n2` patch. Each site is independently vacant with
/// probability `p_vac`, drawn in site order from a ChaCha8 stream seeded by `seed`.
pub fn make_emitter_set(
    lat: &Lattice,
    n1: usize,
    n2: usize,
    p_vac: f64,
    seed: u64,
) -> Result<EmitterSet> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::invalid("emitter patch extent must be at least 1×1"));
    }
    if !(0.0..1.0).contains(&p_vac) {
        return Err(Error::invalid(format!("vacancy probability {p_vac} not in [0, 1)")));
    }
    let nb = lat.sublattices();
    let mut positions = Vec::with_capacity(n1 * n2 * nb);
    let mut sublattice = Vec::with_capacity(n1 * n2 * nb);
    for i in 0..n1 as i64 {
        for j in 0..n2 as i64 {
            for nu in 0..nb {
                let p = lat.site(i, j, nu);
                positions.push([p[0], p[1], 0.0]);
                sublattice.push(nu);
            }
        }
    }
    let n = positions.len() as f64;
    let c = positions
        .iter()
        .fold([0.0, 0.0], |c, p| [c[0] + p[0] / n, c[1] + p[1] / n]);
    for p in &mut positions {
        p[0] -= c[0];
        p[1] -= c[1];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let occupied = positions
        .iter()
        .map(|_| rng.random::<f64>() >= p_vac)
        .collect();
    Ok(EmitterSet {
        lattice: lat.clone(),
        extent: (n1, n2),
        positions,
        sublattice,
        occupied,
    })
}

/// Fractional coordinates of `r` in the basis (a1, a2).
pub fn fractional(lat: &Lattice, r: Vec2) -> Vec2 {
    let g = lat.reciprocal().expect("validated lattice");
    [dot2(g.g1, r) / (2.0 * PI), dot2(g.g2, r) / (2.0 * PI)]
}
