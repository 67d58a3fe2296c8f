use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use stable_gof::cli::{read_delimited, read_table, SimulationRow};
use stable_gof::estimators::fisher_info;
use stable_gof::stable::rand_stable;

fn run(args: &[&str], cache: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stable-gof"))
        .args(args)
        .env("STABLE_GOF_CACHE", cache)
        .output()
        .unwrap()
}

fn write_sample(dir: &Path, name: &str, alpha: f64, n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let text: String = (0..n).map(|_| format!("{}\n", rand_stable(alpha, &mut rng))).collect();
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn toml_out(o: &Output) -> toml::Table {
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap().parse().unwrap()
}

fn float(t: &toml::Table, key: &str) -> f64 {
    t[key].as_float().unwrap()
}

#[test]
fn estimate_cauchy_sample() {
    let dir = TempDir::new().unwrap();
    let data = write_sample(dir.path(), "cauchy.txt", 1.0, 200, 31);
    let t = toml_out(&run(&["estimate", &data, "--format", "toml"], dir.path()));
    let alpha = float(&t, "alpha");
    let se = float(&t, "se_alpha");
    let i33 = fisher_info(1.0).unwrap().inverse().unwrap().i33;
    assert!((alpha - 1.0).abs() < 3.0 * se, "α̂ = {alpha}");
    // SE at α̂ against the Cauchy value √(I³³/n)
    assert!((se / (i33 / 200.0).sqrt() - 1.0).abs() < 0.25, "se {se}");
}

#[test]
fn estimate_input_errors() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(run(&["estimate", empty.to_str().unwrap()], dir.path()).status.code(), Some(2));
    let flat = dir.path().join("flat.txt");
    std::fs::write(&flat, "x\n3\n3\n3\n3\n3\n").unwrap();
    let o = run(&["estimate", flat.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate"), "{}", String::from_utf8_lossy(&o.stderr));
    let missing = dir.path().join("none.txt");
    assert_eq!(run(&["estimate", missing.to_str().unwrap()], dir.path()).status.code(), Some(2));
}

#[test]
fn test_h2_needs_alpha0() {
    let dir = TempDir::new().unwrap();
    let data = write_sample(dir.path(), "x.txt", 1.5, 100, 32);
    let o = run(&["test", &data, "--kappa", "1", "--hypothesis", "H2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(run(&["test", &data], dir.path()).status.code(), Some(1));
}

#[test]
fn table_rerun_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("t.csv");
    let o = out.to_str().unwrap();
    let args = ["table", "--alphas", "1.5", "--kappas", "1,2.5", "--nodes", "200", "-o", o];
    let cold = run(&args, dir.path());
    assert_eq!(cold.status.code(), Some(0), "{}", String::from_utf8_lossy(&cold.stderr));
    let first = std::fs::read_to_string(&out).unwrap();
    assert!(std::fs::read_dir(dir.path()).unwrap().any(|e| e.unwrap().file_name().to_string_lossy().ends_with(".toml")));
    let warm = run(&args, dir.path());
    assert_eq!(warm.status.code(), Some(0));
    assert_eq!(first, std::fs::read_to_string(&out).unwrap());
    let (manifest, rows) = read_table(&out).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(manifest.unwrap().spectra.len(), 2);
}

#[test]
fn table_normal_row() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("t.csv");
    let o = run(&["table", "--hypothesis", "H2", "--alphas", "2", "--kappas", "1", "-o", out.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = read_table(&out).unwrap();
    let r = rows.iter().find(|r| r.xi == 0.10).unwrap();
    assert!((r.critical_value / 1.216 - 1.0).abs() < 0.02, "{}", r.critical_value);
    assert!(r.series_bound >= 0.0);
}

#[test]
fn table_rejects_small_kappa() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["table", "--kappas", "0.5", "--no-cache"], dir.path()).status.code(), Some(1));
}

#[test]
fn test_with_table() {
    let dir = TempDir::new().unwrap();
    let table = dir.path().join("h2.csv");
    let t = table.to_str().unwrap();
    let o = run(&["table", "--hypothesis", "H2", "--alphas", "1.5", "--kappas", "2.5", "--nodes", "400", "-o", t], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let data = write_sample(dir.path(), "x.txt", 1.5, 150, 33);
    let report = toml_out(&run(&["test", &data, "--kappa", "2.5", "--hypothesis", "H2", "--alpha0", "1.5", "--table", t, "--format", "toml"], dir.path()));
    let r = &report["test"].as_array().unwrap()[0];
    let crit = r["critical"].as_array().unwrap();
    assert_eq!(crit.len(), 2);
    let d = r["outcome"]["statistic"].as_float().unwrap();
    for c in crit {
        let v = c["critical_value"].as_float().unwrap();
        assert_eq!(c["reject"].as_bool().unwrap(), d >= v);
    }
    // κ absent from the table
    let o = run(&["test", &data, "--kappa", "1", "--hypothesis", "H2", "--alpha0", "1.5", "--table", t], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("table"));
}

fn simulate(dir: &Path, config: &str, out: &str) -> Output {
    let cfg = dir.join("sim.toml");
    std::fs::write(&cfg, config).unwrap();
    run(&["simulate", cfg.to_str().unwrap(), "-o", dir.join(out).to_str().unwrap()], dir)
}

#[test]
fn simulate_validation_and_determinism() {
    let dir = TempDir::new().unwrap();
    let bad = "[experiment.a]\nmode = \"critical\"\nn = 50\nalpha = 1.5\nkappas = [1.0]\nhypothesis = \"H2\"\nreplications = 0\n";
    assert_eq!(simulate(dir.path(), bad, "bad.csv").status.code(), Some(1));
    let good = "seed = 5\n[experiment.a]\nmode = \"critical\"\nn = 40\nalpha = 1.5\nkappas = [1.0, 2.5]\nhypothesis = \"H2\"\nreplications = 100\n";
    assert_eq!(simulate(dir.path(), good, "a.csv").status.code(), Some(0));
    assert_eq!(simulate(dir.path(), good, "b.csv").status.code(), Some(0));
    assert_eq!(std::fs::read(dir.path().join("a.csv")).unwrap(), std::fs::read(dir.path().join("b.csv")).unwrap());
}

#[test]
fn simulate_mirrors_n100_h2_tables() {
    // simulated upper 10% and 5% points at n = 100 from 5000 replications
    let paper: [(f64, [f64; 4], [f64; 4]); 2] = [
        (1.8, [1.100, 0.1126, 0.01415, 0.00356], [1.333, 0.1397, 0.01878, 0.00533]),
        (1.5, [1.030, 0.1403, 0.03709, 0.01202], [1.220, 0.1690, 0.04710, 0.01590]),
    ];
    let dir = TempDir::new().unwrap();
    let mut cfg = String::from("seed = 100\n");
    for (alpha, _, _) in &paper {
        cfg += &format!(
            "[experiment.a{}]\nmode = \"critical\"\nn = 100\nalpha = {alpha}\nkappas = [1.0, 2.5, 5.0, 10.0]\nhypothesis = \"H2\"\nreplications = 2000\n",
            alpha * 10.0
        );
    }
    let o = simulate(dir.path(), &cfg, "t8.csv");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows): (_, Vec<SimulationRow>) = read_delimited(&dir.path().join("t8.csv")).unwrap();
    assert_eq!(rows.len(), 16);
    let inflate = (1.0f64 + 2000.0 / 5000.0).sqrt();
    for r in &rows {
        let (_, ten, five) = paper.iter().find(|p| p.0 == r.alpha).unwrap();
        let j = [1.0, 2.5, 5.0, 10.0].iter().position(|&k| k == r.kappa).unwrap();
        let want = if r.xi == 0.10 { ten[j] } else { five[j] };
        let z = (r.value - want) / (r.se * inflate);
        assert!(z.abs() < 3.0, "α={} κ={} ξ={}: {} vs {want} (z {z:.2})", r.alpha, r.kappa, r.xi, r.value);
    }
}
