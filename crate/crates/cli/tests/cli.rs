use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coopsurface"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let head = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (head, rows)
}

fn col(head: &[String], name: &str) -> usize {
    head.iter().position(|h| h == name).unwrap()
}

fn same_tree(a: &Path, b: &Path) -> bool {
    let mut names: Vec<_> = fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let mut other: Vec<_> = fs::read_dir(b).unwrap().map(|e| e.unwrap().file_name()).collect();
    other.sort();
    names == other && names.iter().all(|n| fs::read(a.join(n)).unwrap() == fs::read(b.join(n)).unwrap())
}

#[test]
fn bands_square_has_pure_x_band_at_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["bands", "--lattice", "square:0.8", "--path", "G,X,M,G", "--muBx", "1.0", "--samples", "4"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (head, rows) = csv(&dir.path().join("bands.csv"));
    let (s, band, px) = (col(&head, "s"), col(&head, "band"), col(&head, "psi_x2"));
    let at_gamma: Vec<_> = rows.iter().filter(|r| r[s] == "0.0").collect();
    assert_eq!(at_gamma.len(), 3);
    let bands: std::collections::BTreeSet<_> = rows.iter().map(|r| r[band].clone()).collect();
    assert_eq!(bands.len(), 3);
    assert!(at_gamma.iter().any(|r| (r[px].parse::<f64>().unwrap() - 1.0).abs() < 1e-9));
    assert!(dir.path().join("polarizability.csv").exists());
    let manifest = fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    assert!(manifest.contains("command = \"bands\""));
    assert!(manifest.contains("mub_x = 1.0"));
}

#[test]
fn honeycomb_bands_have_six_branches() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["bands", "--lattice", "honeycomb:0.9", "--path", "G,M,K,G", "--samples", "3"], dir.path());
    assert_eq!(code(&o), 0);
    let (head, rows) = csv(&dir.path().join("bands.csv"));
    let band = col(&head, "band");
    let max = rows.iter().map(|r| r[band].parse::<usize>().unwrap()).max().unwrap();
    assert_eq!(max, 5);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(code(&run(&["bands", "--path", ""], &out)), 2);
    assert_eq!(code(&run(&["bands", "--lattice", "square:0.8um"], &out)), 2);
    assert_eq!(code(&run(&["bands", "--muBx", "2GHz"], &out)), 2);
    assert_eq!(code(&run(&["bands", "--lattice", "square:0.8,0.1"], &out)), 2);
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "lattice = \"square:0.8\"\nspacing = 0.8\n").unwrap();
    let o = run(&["bands", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("spacing"));
    fs::write(&cfg, "delta = \"1.5 MHz\"\n").unwrap();
    assert_eq!(code(&run(&["bands", "--config", cfg.to_str().unwrap()], &out)), 2);
    assert!(!out.exists(), "rejected configs leave no output");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "samples = 2\nmub_x = 7.0\npath = [\"G\", \"X\"]\n").unwrap();
    let out = dir.path().join("o");
    let o = run(&["bands", "--config", cfg.to_str().unwrap(), "--mub-x", "0.5"], &out);
    assert_eq!(code(&o), 0);
    let flat = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(flat.contains("mub_x = 0.5"));
    assert!(flat.contains("samples = 2"));
}

#[test]
fn resource_limit_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["fieldmap", "--extent", "12", "--max-unknowns", "100", "--map", "false"], dir.path());
    assert_eq!(code(&o), 4);
}

#[test]
fn outputs_are_reproducible_and_rerunnable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let args = [
        "vacancy", "--extent", "6", "--p", "0,0.1", "--seed", "9", "--u-count", "5", "--v-count", "3",
    ];
    assert_eq!(code(&run(&args, &a)), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_coopsurface"))
        .args(args)
        .arg("--out")
        .arg(&b)
        .env("COOPSURFACE_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(same_tree(&a, &b));
    let cfg = a.join("config.toml");
    assert_eq!(code(&run(&["vacancy", "--config", cfg.to_str().unwrap()], &c)), 0);
    assert!(same_tree(&a, &c));
    let maps = fs::read_dir(&a)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("field_"))
        .count();
    assert_eq!(maps, 2);
}

#[test]
fn polarizer_without_field_has_zero_visibility() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["polarizer", "--mub-x", "0", "--a-min", "0.3", "--a-max", "0.8", "--a-count", "3", "--delta-count", "7"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let (head, rows) = csv(&dir.path().join("visibility.csv"));
    let v = col(&head, "visibility");
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r[v].parse::<f64>().unwrap().abs() < 1e-12));
    assert!(dir.path().join("scan.toml").exists());
}

#[test]
fn waveplate_phase_is_wrapped() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["waveplate", "--a-count", "2", "--delta-count", "2", "--eps-count", "41"], dir.path());
    assert_eq!(code(&o), 0);
    let (head, rows) = csv(&dir.path().join("eps_scan.csv"));
    let (p, bx) = (col(&head, "delta_phi"), col(&head, "mub_x"));
    let pi = std::f64::consts::PI;
    for r in &rows {
        if !r[p].is_empty() {
            let v: f64 = r[p].parse().unwrap();
            assert!(v > -pi && v <= pi);
        }
    }
    let first: f64 = rows[0][bx].parse().unwrap();
    assert!((first - (-4.0 - 1.75)).abs() < 1e-12);
}

#[test]
fn nonlinear_writes_one_row_per_drive() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["nonlinear", "--extent", "5", "--eta", "0.05,0.25,0.5,1.0"], dir.path());
    assert_eq!(code(&o), 0);
    let (_, rows) = csv(&dir.path().join("meanfield.csv"));
    assert_eq!(rows.len(), 4);
    let nd = fs::read_to_string(dir.path().join("realspace.ndjson")).unwrap();
    assert_eq!(nd.lines().count(), 4);
}

#[test]
fn honeycomb_demo_reports_phase_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["honeycomb-demo", "--samples", "3", "--delta-count", "3"], dir.path());
    assert_eq!(code(&o), 0);
    let s = fs::read_to_string(dir.path().join("summary.ndjson")).unwrap();
    assert!(s.contains("\"phase_matrix_eigenvalues\":[0.0,2.0]"), "{s}");
}

#[test]
fn disorder_writes_records_per_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["disorder", "--extent", "5", "--n-configs", "3", "--band-extent", "0", "--map", "false"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let nd = fs::read_to_string(dir.path().join("configs.ndjson")).unwrap();
    assert_eq!(nd.lines().count(), 3);
}
