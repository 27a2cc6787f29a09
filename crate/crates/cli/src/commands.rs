use crate::config::{self, Bands, Disorder, Honeycomb, Nonlinear, Polarizer, RealSpace, Vacancy, Waveplate};
use crate::output::OutDir;
use crate::Failure;
use coopsurface::bands::{self, band_structure, polarizability, LatticeResponse, SumConfig, ZeemanField};
use coopsurface::io::{self, Row};
use coopsurface::lattice::{bz_path, make_emitter_set, Lattice, LatticeKind};
use coopsurface::realspace::{
    disordered_bands, field_map, nonlinear_meanfield, nonlinear_realspace, off_axis_fraction, power_balance,
    reflectivity, solve_linear, thermal_ensemble, vacancy_runs, DisorderSpec, DriveSpec, GridSpec, NonlinearOptions,
    Plane, Reflectivity, SolverOptions,
};
use coopsurface::scattering::{jones, phase_map, polarizer_scan, waveplate_scan, ScanAxis};
use coopsurface::C64;
use serde::Serialize;
use std::io::Write;

/// Height of the plane-wave fits for R and T.
const FIT_HEIGHT: f64 = 5.0;
const FIT_POINTS: usize = 12;
/// Height of the transverse spectrum plane.
const SPECTRUM_HEIGHT: f64 = 3.0;
const SPECTRUM_POINTS: usize = 32;

fn cfg<T>(r: anyhow::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Config)
}

fn bad(msg: impl std::fmt::Display) -> Failure {
    Failure::Config(anyhow::anyhow!("{msg}"))
}

fn lattice(spec: &str) -> Result<Lattice, Failure> {
    Ok(Lattice::parse(spec)?)
}

fn field(x: f64, y: f64, z: f64) -> Result<ZeemanField, Failure> {
    if ![x, y, z].iter().all(|v| v.is_finite()) {
        return Err(bad("field components must be finite"));
    }
    Ok(ZeemanField::new(x, y, z))
}

fn polarization(v: &[f64]) -> Result<[C64; 2], Failure> {
    match v {
        [x, y] if x.is_finite() && y.is_finite() && (x != &0.0 || y != &0.0) => Ok([C64::from(*x), C64::from(*y)]),
        _ => Err(bad("e_in needs two finite components, not both zero")),
    }
}

fn default_path(lat: &Lattice) -> Vec<String> {
    let names: &[&str] = match lat.kind {
        LatticeKind::Square => &["G", "X", "M", "G"],
        _ => &["G", "M", "K", "G"],
    };
    names.iter().map(|s| s.to_string()).collect()
}

fn path_names(given: &[String], lat: &Lattice) -> Vec<String> {
    if given.is_empty() {
        default_path(lat)
    } else {
        given.iter().map(|s| s.trim().to_string()).collect()
    }
}

fn write_toml(out: &OutDir, name: &str, t: &toml::Table) -> Result<(), Failure> {
    let text = toml::to_string(t).map_err(|e| Failure::Compute(e.into()))?;
    out.write(name, |w| w.write_all(text.as_bytes()))
}

/// Sidecar metadata for the scan tables.
fn scan_meta(lattice: &str, f: ZeemanField, e_in: &[f64]) -> toml::Table {
    let mut t = toml::Table::new();
    t.insert("lattice".into(), lattice.into());
    t.insert("mub".into(), toml::Value::Array(f.0.iter().map(|&v| v.into()).collect()));
    t.insert("e_in".into(), toml::Value::Array(e_in.iter().map(|&v| v.into()).collect()));
    t.insert("length_unit".into(), "lambda".into());
    t.insert("rate_unit".into(), "gamma0".into());
    t
}

pub fn bands(file: &toml::Table, flags: &config::BandsFlags, out: &OutDir) -> Result<(), Failure> {
    let (s, resolved): (Bands, _) = cfg(config::resolve(file, flags))?;
    let lat = lattice(&s.lattice)?;
    let names = path_names(&s.path, &lat);
    if names.iter().any(|n| n.is_empty()) {
        return Err(bad("empty symmetry-point name in path"));
    }
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let path = bz_path(&lat, &refs, s.samples)?;
    let f = field(s.mub_x, s.mub_y, s.mub_z)?;
    let sums = SumConfig::default();
    let points = band_structure(&lat, &path, f, &sums)?;
    let pol = coopsurface::exec::map(path.samples.len(), |k| {
        let q = path.samples[k].q;
        let p = LatticeResponse::new_unchecked(&lat, q, &sums)
            .and_then(|r| polarizability(&r, s.delta, f))
            .ok();
        (path.samples[k].s, q, p)
    });
    out.write("bands.csv", |w| io::write_bands(w, &points))?;
    out.write("polarizability.csv", |w| io::write_polarizability(w, &pol))?;
    out.finish(
        "bands",
        &resolved,
        &["bands.csv".into(), "polarizability.csv".into()],
    )
}

pub fn polarizer(file: &toml::Table, flags: &config::PolarizerFlags, out: &OutDir) -> Result<(), Failure> {
    let (s, resolved): (Polarizer, _) = cfg(config::resolve(file, flags))?;
    let a = ScanAxis::new("a", s.a_min, s.a_max, s.a_count)?;
    let d = ScanAxis::new("delta", s.delta_min, s.delta_max, s.delta_count)?;
    let f = field(s.mub_x, s.mub_y, s.mub_z)?;
    let e = polarization(&s.e_in)?;
    let scan = polarizer_scan(&a, &d, f, e, &SumConfig::default())?;
    out.write("visibility.csv", |w| io::write_scalar_grid(w, &scan.grid, "visibility"))?;
    out.write("ridges.csv", |w| io::write_ridges(w, &scan))?;
    write_toml(out, "scan.toml", &scan_meta("square", f, &s.e_in))?;
    out.finish(
        "polarizer",
        &resolved,
        &["visibility.csv".into(), "ridges.csv".into(), "scan.toml".into()],
    )
}

pub fn waveplate(file: &toml::Table, flags: &config::WaveplateFlags, out: &OutDir) -> Result<(), Failure> {
    let (s, resolved): (Waveplate, _) = cfg(config::resolve(file, flags))?;
    let a = ScanAxis::new("a", s.a_min, s.a_max, s.a_count)?;
    let d = ScanAxis::new("delta", s.delta_min, s.delta_max, s.delta_count)?;
    let eps = ScanAxis::new("eps", s.eps_min, s.eps_max, s.eps_count)?;
    let f = field(s.mub_x, s.mub_y, s.mub_z)?;
    let e = polarization(&s.e_in)?;
    let lat = Lattice::square(s.a)?;
    let resp = LatticeResponse::new(&lat, [0.0, 0.0], &SumConfig::default())?;
    let line = waveplate_scan(&resp, s.delta, &eps.values(), e)?;
    let map = phase_map(&a, &d, f, e, &SumConfig::default())?;
    out.write("phase_map.csv", |w| io::write_phase_grid(w, &map))?;
    out.write("eps_scan.csv", |w| io::write_phase_line(w, "eps", &line))?;
    let mut meta = scan_meta("square", f, &s.e_in);
    meta.insert("eps_scan_lattice".into(), format!("square:{}", s.a).into());
    meta.insert("eps_scan_field".into(), "mub = (eps - 1.75, eps, 0)".into());
    write_toml(out, "scan.toml", &meta)?;
    out.finish(
        "waveplate",
        &resolved,
        &["phase_map.csv".into(), "eps_scan.csv".into(), "scan.toml".into()],
    )
}

/// Shared real-space setup.
struct Setup {
    lat: Lattice,
    drive: DriveSpec,
    grid: Option<GridSpec>,
    opts: SolverOptions,
}

fn grid_spec(plane: &str, offset: f64, u: (f64, f64, usize), v: (f64, f64, usize)) -> Result<GridSpec, Failure> {
    let plane = match plane.trim().to_ascii_lowercase().as_str() {
        "xz" => Plane::Xz { y: offset },
        "yz" => Plane::Yz { x: offset },
        "xy" => Plane::Xy { z: offset },
        other => return Err(bad(format!("unknown plane `{other}`; use xz, yz or xy"))),
    };
    let g = GridSpec { plane, u, v };
    g.validate()?;
    Ok(g)
}

fn setup(rs: &RealSpace) -> Result<Setup, Failure> {
    let lat = lattice(&rs.lattice)?;
    if rs.extent == 0 {
        return Err(bad("extent must be at least 1"));
    }
    let e = polarization(&rs.e_in)?;
    let drive = DriveSpec::normal(rs.delta, [-e[0], -e[1]], field(rs.mub_x, rs.mub_y, rs.mub_z)?);
    drive.validate()?;
    let grid = if rs.map {
        Some(grid_spec(
            &rs.plane,
            rs.plane_offset,
            (rs.u_min, rs.u_max, rs.u_count),
            (rs.v_min, rs.v_max, rs.v_count),
        )?)
    } else {
        None
    };
    Ok(Setup {
        lat,
        drive,
        grid,
        opts: SolverOptions {
            max_unknowns: rs.max_unknowns,
            ..SolverOptions::default()
        },
    })
}

#[derive(Serialize)]
struct SolveRecord {
    emitters: usize,
    residual: f64,
    reflectivity: Option<Reflectivity>,
    scattered_power: f64,
    extinction: f64,
    off_axis_fraction: Option<f64>,
}

pub fn fieldmap(file: &toml::Table, flags: &config::RealSpaceFlags, out: &OutDir) -> Result<(), Failure> {
    let (rs, resolved): (RealSpace, _) = cfg(config::resolve(file, flags))?;
    let su = setup(&rs)?;
    let set = make_emitter_set(&su.lat, rs.extent, rs.extent, 0.0, 0)?;
    let state = solve_linear(&set, &su.drive, &su.opts)?;
    let pb = power_balance(&state, &su.drive);
    let rec = SolveRecord {
        emitters: set.occupied_count(),
        residual: state.residual,
        reflectivity: reflectivity(&state, &su.drive, FIT_HEIGHT, None, FIT_POINTS).ok(),
        scattered_power: pb.scattered,
        extinction: pb.extinction,
        off_axis_fraction: off_axis_fraction(&state, SPECTRUM_HEIGHT, None, SPECTRUM_POINTS).ok(),
    };
    let mut files = vec!["summary.ndjson".to_string()];
    out.write("summary.ndjson", |w| io::write_ndjson(w, &[rec]))?;
    if let Some(g) = &su.grid {
        let map = field_map(&state, &su.drive, g)?;
        out.write("field.csv", |w| io::write_field_map(w, &map))?;
        files.push("field.csv".into());
    }
    out.finish("fieldmap", &resolved, &files)
}

pub fn disorder(
    file: &toml::Table,
    rsf: &config::RealSpaceFlags,
    flags: &config::DisorderFlags,
    out: &OutDir,
) -> Result<(), Failure> {
    let (rs, d, resolved): (RealSpace, Disorder, _) = cfg(config::resolve_split(file, rsf, flags))?;
    let su = setup(&rs)?;
    let dis = DisorderSpec {
        sigma_xy: d.sigma_xy,
        sigma_z: d.sigma_z,
        n_configs: d.n_configs,
        seed: d.seed,
    };
    dis.validate()?;
    let set = make_emitter_set(&su.lat, rs.extent, rs.extent, 0.0, 0)?;
    let ens = thermal_ensemble(&set, &su.drive, &dis, su.grid.as_ref(), &su.opts)?;
    let mut files = vec!["configs.ndjson".to_string()];
    out.write("configs.ndjson", |w| io::write_ndjson(w, &ens.records))?;
    if let (Some(g), Some(mean)) = (&ens.grid, &ens.mean_intensity) {
        let pts = g.points();
        out.write("mean_intensity.csv", |w| io::write_intensity_map(w, &pts, mean))?;
        files.push("mean_intensity.csv".into());
    }
    if d.band_extent > 0 {
        let names = default_path(&su.lat);
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let path = bz_path(&su.lat, &refs, d.band_samples)?;
        let qs: Vec<_> = path.samples.iter().map(|s| s.q).collect();
        let ss: Vec<f64> = path.samples.iter().map(|s| s.s).collect();
        let bands = disordered_bands(&su.lat, (d.band_extent, d.band_extent), &dis, su.drive.field, &qs)?;
        out.write("disordered_bands.csv", |w| io::write_disordered_bands(w, &ss, &bands))?;
        files.push("disordered_bands.csv".into());
    }
    out.finish("disorder", &resolved, &files)
}

#[derive(Serialize)]
struct VacancyRecord {
    p: f64,
    seed: u64,
    emitters: usize,
    residual: f64,
    reflectivity: Reflectivity,
    off_axis_fraction: Option<f64>,
}

pub fn vacancy(
    file: &toml::Table,
    rsf: &config::RealSpaceFlags,
    flags: &config::VacancyFlags,
    out: &OutDir,
) -> Result<(), Failure> {
    let (rs, v, resolved): (RealSpace, Vacancy, _) = cfg(config::resolve_split(file, rsf, flags))?;
    let su = setup(&rs)?;
    if v.p.is_empty() {
        return Err(bad("p list is empty"));
    }
    let runs = vacancy_runs(
        &su.lat,
        (rs.extent, rs.extent),
        &v.p,
        &su.drive,
        v.seed,
        su.grid.as_ref(),
        &su.opts,
    )?;
    let mut files = vec!["runs.ndjson".to_string()];
    let mut recs = Vec::with_capacity(runs.len());
    for (k, run) in runs.iter().enumerate() {
        recs.push(VacancyRecord {
            p: run.p,
            seed: v.seed,
            emitters: run.emitters.occupied_count(),
            residual: run.state.residual,
            reflectivity: run.reflectivity,
            off_axis_fraction: off_axis_fraction(&run.state, SPECTRUM_HEIGHT, None, SPECTRUM_POINTS).ok(),
        });
        if let Some(map) = &run.map {
            let name = format!("field_{k:02}_p{}.csv", run.p);
            out.write(&name, |w| io::write_field_map(w, map))?;
            files.push(name);
        }
    }
    out.write("runs.ndjson", |w| io::write_ndjson(w, &recs))?;
    out.finish("vacancy", &resolved, &files)
}

#[derive(Serialize)]
struct NonlinearRecord {
    eta: f64,
    delta: f64,
    emitters: usize,
    reflectivity: Option<Reflectivity>,
    meanfield_reflectance: f64,
    meanfield_transmittance: f64,
    beta_z_mean: f64,
    beta_z_min: f64,
    beta_z_max: f64,
    t: f64,
    residual: f64,
    converged: bool,
}

pub fn nonlinear(file: &toml::Table, flags: &config::NonlinearFlags, out: &OutDir) -> Result<(), Failure> {
    let (s, resolved): (Nonlinear, _) = cfg(config::resolve(file, flags))?;
    let lat = lattice(&s.lattice)?;
    if s.eta.is_empty() || s.eta.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(bad("eta must be a non-empty list of non-negative numbers"));
    }
    if s.extent == 0 {
        return Err(bad("extent must be at least 1"));
    }
    let grid = if s.map {
        Some(grid_spec("xz", 0.0, (s.u_min, s.u_max, s.u_count), (s.v_min, s.v_max, s.v_count))?)
    } else {
        None
    };
    let resp = LatticeResponse::new(&lat, [0.0, 0.0], &SumConfig::default())?;
    let delta = resp.omega[(0, 0)].re + s.delta_offset;
    let set = make_emitter_set(&lat, s.extent, s.extent, 0.0, 0)?;
    let opts = NonlinearOptions {
        dt: s.dt,
        t_max: s.t_max,
        ..NonlinearOptions::default()
    };
    let mut mf_rows = Vec::new();
    let mut recs = Vec::new();
    let mut files = vec!["meanfield.csv".to_string(), "realspace.ndjson".to_string()];
    for (k, &eta) in s.eta.iter().enumerate() {
        let mf = nonlinear_meanfield(&resp, delta, eta)?;
        let drive = DriveSpec::normal(delta, [C64::from(eta), C64::ZERO], ZeemanField::default());
        let st = nonlinear_realspace(&set, &drive, &opts)?;
        let lin = st.to_dipole_state();
        let n = st.beta_z.len() as f64;
        recs.push(NonlinearRecord {
            eta,
            delta,
            emitters: st.beta_z.len(),
            reflectivity: reflectivity(&lin, &drive, FIT_HEIGHT, None, FIT_POINTS).ok(),
            meanfield_reflectance: mf.reflectance,
            meanfield_transmittance: mf.transmittance,
            beta_z_mean: st.beta_z.iter().sum::<f64>() / n,
            beta_z_min: st.beta_z.iter().copied().fold(f64::INFINITY, f64::min),
            beta_z_max: st.beta_z.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            t: st.t,
            residual: st.residual,
            converged: st.converged,
        });
        if let Some(g) = &grid {
            let map = field_map(&lin, &drive, g)?;
            let name = format!("field_{k:02}_eta{eta}.csv");
            out.write(&name, |w| io::write_field_map(w, &map))?;
            files.push(name);
        }
        mf_rows.push((eta, mf));
    }
    out.write("meanfield.csv", |w| {
        writeln!(w, "eta,beta_re,beta_im,beta_z,reflectance,transmittance,branches,bistable")?;
        for (eta, m) in &mf_rows {
            Row::new()
                .num(*eta)
                .cplx(m.beta)
                .num(m.beta_z)
                .num(m.reflectance)
                .num(m.transmittance)
                .int(m.branches.len())
                .int(m.bistable)
                .end(w)?;
        }
        Ok(())
    })?;
    out.write("realspace.ndjson", |w| io::write_ndjson(w, &recs))?;
    out.finish("nonlinear", &resolved, &files)
}

#[derive(Serialize)]
struct HoneycombSummary {
    d: f64,
    delta: f64,
    mub: [f64; 3],
    txx2: f64,
    tyy2: f64,
    txy2: f64,
    omega_symmetric_xx: f64,
    gamma_symmetric_xx: f64,
    phase_matrix_eigenvalues: [f64; 2],
}

/// Eigenvalues of a 2×2 Hermitian matrix, ascending.
fn hermitian2_eigenvalues(m: [[C64; 2]; 2]) -> [f64; 2] {
    let (a, d) = (m[0][0].re, m[1][1].re);
    let r = (0.25 * (a - d) * (a - d) + m[0][1].norm_sqr()).sqrt();
    [0.5 * (a + d) - r, 0.5 * (a + d) + r]
}

pub fn honeycomb(file: &toml::Table, flags: &config::HoneycombFlags, out: &OutDir) -> Result<(), Failure> {
    let (s, resolved): (Honeycomb, _) = cfg(config::resolve(file, flags))?;
    let lat = Lattice::honeycomb(s.d)?;
    let f = field(s.mub_x, s.mub_y, s.mub_z)?;
    let sums = SumConfig::default();
    let resp = LatticeResponse::new(&lat, [0.0, 0.0], &sums)?;
    let t = jones(&resp, s.delta, f)?;
    let pm = bands::sublattice_phase_matrix(&lat, [0.0, 0.0]);
    let ev = hermitian2_eigenvalues([[pm[(0, 0)], pm[(0, 1)]], [pm[(1, 0)], pm[(1, 1)]]]);
    let o = resp.omega_block(0, 0) + resp.omega_block(0, 1);
    let g = resp.gamma_block(0, 0) + resp.gamma_block(0, 1);
    let summary = HoneycombSummary {
        d: s.d,
        delta: s.delta,
        mub: f.0,
        txx2: t.0[0][0].norm_sqr(),
        tyy2: t.0[1][1].norm_sqr(),
        txy2: t.0[0][1].norm_sqr(),
        omega_symmetric_xx: o[(0, 0)].re,
        gamma_symmetric_xx: g[(0, 0)].re,
        phase_matrix_eigenvalues: ev,
    };
    let deltas = ScanAxis::new("delta", s.delta_min, s.delta_max, s.delta_count)?.values();
    let scan = coopsurface::exec::try_map(deltas.len(), |k| jones(&resp, deltas[k], f))?;
    let path = bz_path(&lat, &["G", "M", "K", "G"], s.samples)?;
    let points = band_structure(&lat, &path, f, &sums)?;
    out.write("bands.csv", |w| io::write_bands(w, &points))?;
    out.write("jones_scan.csv", |w| {
        writeln!(w, "delta,{},txx2,tyy2", io::JONES_COLUMNS)?;
        for (d, t) in deltas.iter().zip(&scan) {
            Row::new()
                .num(*d)
                .jones(t)
                .num(t.0[0][0].norm_sqr())
                .num(t.0[1][1].norm_sqr())
                .end(w)?;
        }
        Ok(())
    })?;
    out.write("summary.ndjson", |w| io::write_ndjson(w, &[summary]))?;
    out.finish(
        "honeycomb-demo",
        &resolved,
        &["bands.csv".into(), "jones_scan.csv".into(), "summary.ndjson".into()],
    )
}
