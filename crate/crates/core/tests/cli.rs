use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use finfield::io::{adjacency_from_json, adjacency_to_json, Interchange};
use finfield::markov::NeighborhoodSystem;
use finfield::{models, OnePointSystem, RandomField};
use tempfile::TempDir;

fn finfield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finfield"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes the 2×2 Ising potential, field, system and adjacency fixtures.
fn ising_fixtures(dir: &TempDir) -> (PathBuf, PathBuf, PathBuf) {
    let (field, system, adj) = (path(dir, "field.json"), path(dir, "system.json"), path(dir, "adj.json"));
    let out = finfield(&[
        "models", "ising", "--rows", "2", "--cols", "2", "--beta", "0.5", "--h", "0.2",
        "--field", s(&field), "--system", s(&system), "--adjacency", s(&adj),
        "-o", s(&path(dir, "phi.json")),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    (field, system, adj)
}

#[test]
fn check_exit_codes() {
    let dir = TempDir::new().unwrap();
    let space = finfield::ConfigSpace::new(["a", "b", "c"], [2, 3, 2]).unwrap();
    let q = models::random_positive_field(&space, 7).one_point_system().unwrap();
    let good = path(&dir, "good.json");
    fs::write(&good, q.to_json()).unwrap();
    assert_eq!(code(&finfield(&["check", "--system", s(&good)])), 0);

    let bad = path(&dir, "bad.json");
    fs::write(&bad, models::perturb_system(&q, 1, 2, 1.01).unwrap().to_json()).unwrap();
    let out = finfield(&["check", "--system", s(&bad), "--tol", "1e-6", "--json"]);
    assert_eq!(code(&out), 1);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["kind"], "consistency-report");
    assert_eq!(report["consistent"], false);
    assert!(report["witness"].is_object());

    let malformed = path(&dir, "malformed.json");
    fs::write(&malformed, "{\"format\": ").unwrap();
    assert_eq!(code(&finfield(&["check", "--system", s(&malformed)])), 2);
    assert_eq!(code(&finfield(&["check", "--system", s(&path(&dir, "missing.json"))])), 2);
    assert_eq!(code(&finfield(&["check"])), 2);
    assert_eq!(code(&finfield(&["frobnicate"])), 2);
}

#[test]
fn weak_check_and_reconstruction() {
    let dir = TempDir::new().unwrap();
    let field = path(&dir, "vac.json");
    let out = finfield(&[
        "models", "vacuum-field", "--sites", "a,b,c", "--cards", "2,3,2", "--seed", "4", "--theta", "a=0,b=1,c=0",
        "-o", s(&field),
    ]);
    assert_eq!(code(&out), 0);
    let system = path(&dir, "vac-system.json");
    assert_eq!(code(&finfield(&["conditionals", "--field", s(&field), "-o", s(&system)])), 0);
    assert_eq!(code(&finfield(&["check", "--system", s(&system), "--weak", "--theta", "a=0,b=1,c=0"])), 0);
    // positive check refuses a system with zeros
    assert_eq!(code(&finfield(&["check", "--system", s(&system)])), 2);
    let rebuilt = path(&dir, "rebuilt.json");
    let out = finfield(&[
        "reconstruct", "--system", s(&system), "--weak", "--theta", "a=0,b=1,c=0", "-o", s(&rebuilt),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let p = RandomField::from_json(&fs::read_to_string(&field).unwrap()).unwrap();
    let r = RandomField::from_json(&fs::read_to_string(&rebuilt).unwrap()).unwrap();
    assert!(p.max_abs_diff(&r).unwrap() <= 1e-10);
}

#[test]
fn reconstruct_matches_fixtures() {
    let dir = TempDir::new().unwrap();
    let (field, system, _) = ising_fixtures(&dir);
    let a = path(&dir, "a.json");
    let b = path(&dir, "b.json");
    assert_eq!(code(&finfield(&["reconstruct", "--system", s(&system), "-o", s(&a)])), 0);
    let out = finfield(&[
        "reconstruct", "--system", s(&system), "--order", "r1c1,r1c0,r0c1,r0c0",
        "--base", "r0c0=1,r0c1=1,r1c0=0,r1c1=1", "--verify-invariance", "-o", s(&b),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let exact = RandomField::from_json(&fs::read_to_string(&field).unwrap()).unwrap();
    let pa = RandomField::from_json(&fs::read_to_string(&a).unwrap()).unwrap();
    let pb = RandomField::from_json(&fs::read_to_string(&b).unwrap()).unwrap();
    assert!(pa.max_abs_diff(&exact).unwrap() <= 1e-10);
    assert!(pa.max_abs_diff(&pb).unwrap() <= 1e-10);

    // product fixture reconstructs to the product field
    let prod = path(&dir, "prod.json");
    let prod_q = path(&dir, "prod-q.json");
    let out = finfield(&[
        "models", "product", "--sites", "a,b", "--cards", "2,3", "--marginals", "0.25,0.75;0.2,0.3,0.5",
        "-o", s(&prod),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(code(&finfield(&["conditionals", "--field", s(&prod), "-o", s(&prod_q)])), 0);
    let out = finfield(&["reconstruct", "--system", s(&prod_q)]);
    let r = RandomField::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    let p = RandomField::from_json(&fs::read_to_string(&prod).unwrap()).unwrap();
    assert!(r.max_abs_diff(&p).unwrap() <= 1e-12);
    assert!((r.prob(5) - 0.375).abs() <= 1e-15);
}

#[test]
fn reconstruct_rejects_inconsistent_systems() {
    let dir = TempDir::new().unwrap();
    let (_, system, _) = ising_fixtures(&dir);
    let bad = path(&dir, "bad.json");
    let out = finfield(&[
        "models", "perturb", "--system", s(&system), "--site", "r0c0", "--boundary", "5", "--factor", "1.5",
        "-o", s(&bad),
    ]);
    assert_eq!(code(&out), 0);
    let out = finfield(&["reconstruct", "--system", s(&bad)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("witness"));
    assert_eq!(
        code(&finfield(&["models", "perturb", "--system", s(&system), "--site", "r0c0", "--boundary", "0", "--factor", "1"])),
        2
    );
}

#[test]
fn delta_round_trip_through_the_cli() {
    let dir = TempDir::new().unwrap();
    let (field, system, _) = ising_fixtures(&dir);
    let delta = path(&dir, "delta.json");
    let back = path(&dir, "back.json");
    assert_eq!(code(&finfield(&["to-delta", "--system", s(&system), "-o", s(&delta)])), 0);
    assert_eq!(code(&finfield(&["to-system", "--delta", s(&delta), "-o", s(&back)])), 0);
    let q = OnePointSystem::from_json(&fs::read_to_string(&system).unwrap()).unwrap();
    let q2 = OnePointSystem::from_json(&fs::read_to_string(&back).unwrap()).unwrap();
    for (a, b) in q.tables().iter().zip(q2.tables()) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    // Hamiltonian of the field, in its own convention, back to the system
    let h = path(&dir, "h.json");
    let q3 = path(&dir, "q3.json");
    let out = finfield(&["to-hamiltonian", "--field", s(&field), "--theta", "r0c0=0,r0c1=0,r1c0=0,r1c1=0", "-o", s(&h)]);
    assert_eq!(code(&out), 0);
    assert!(fs::read_to_string(&h).unwrap().contains("\"convention\": \"log-probability\""));
    assert_eq!(code(&finfield(&["to-system", "--hamiltonian", s(&h), "-o", s(&q3)])), 0);
    let q3 = OnePointSystem::from_json(&fs::read_to_string(&q3).unwrap()).unwrap();
    for (a, b) in q.tables().iter().zip(q3.tables()) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= 1e-10);
        }
    }
    assert_eq!(code(&finfield(&["to-system", "--delta", s(&delta), "--hamiltonian", s(&h)])), 2);
}

#[test]
fn potentials_through_the_cli() {
    let dir = TempDir::new().unwrap();
    let (field, _, _) = ising_fixtures(&dir);
    let phi = path(&dir, "extracted.json");
    let p2 = path(&dir, "p2.json");
    let out = finfield(&["extract-potential", "--field", s(&field), "--theta", "r0c0=0,r0c1=0,r1c0=0,r1c1=0", "-o", s(&phi)]);
    assert_eq!(code(&out), 0);
    assert_eq!(code(&finfield(&["to-field", "--potential", s(&phi), "-o", s(&p2)])), 0);
    let p = RandomField::from_json(&fs::read_to_string(&field).unwrap()).unwrap();
    let q = RandomField::from_json(&fs::read_to_string(&p2).unwrap()).unwrap();
    assert!(p.max_abs_diff(&q).unwrap() <= 1e-10);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&phi).unwrap()).unwrap();
    assert_eq!(doc["terms"].as_array().unwrap().len(), 8);
}

#[test]
fn markov_verdicts() {
    let dir = TempDir::new().unwrap();
    let (field, _, adj) = ising_fixtures(&dir);
    assert_eq!(code(&finfield(&["markov", "--field", s(&field), "--adjacency", s(&adj)])), 0);

    let (phi, ns) = models::ising_potential(2, 2, 0.5, 0.2).unwrap();
    let cut = path(&dir, "cut.json");
    fs::write(&cut, adjacency_to_json(phi.space(), &ns.without_edge(0, 1))).unwrap();
    let out = finfield(&["markov", "--field", s(&field), "--adjacency", s(&cut), "--json"]);
    assert_eq!(code(&out), 1);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["markov"], false);
    assert_eq!(report["witness"]["kind"], "locality");

    let out = finfield(&["markov", "--field", s(&field), "--minimal"]);
    assert_eq!(code(&out), 0);
    let min = adjacency_from_json(phi.space(), std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(min, ns);
    assert_ne!(min, NeighborhoodSystem::empty(4));
}

#[test]
fn sampling_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let (_, system, _) = ising_fixtures(&dir);
    let a = path(&dir, "a.json");
    let b = path(&dir, "b.json");
    for out in [&a, &b] {
        let res = finfield(&[
            "sample", "--system", s(&system), "--sweeps", "2000", "--burn-in", "100", "--seed", "42", "-o", s(out),
        ]);
        assert_eq!(code(&res), 0);
    }
    let (ta, tb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let doc: serde_json::Value = serde_json::from_slice(&ta).unwrap();
    assert_eq!(doc["algorithm"], "chacha8");
    assert_eq!(doc["joint"].as_array().unwrap().len(), 16);
}

#[test]
fn outputs_are_byte_stable() {
    let dir = TempDir::new().unwrap();
    let (field, system, _) = ising_fixtures(&dir);
    for (file, kind) in [(&field, "field"), (&system, "system")] {
        let text = fs::read_to_string(file).unwrap();
        let again = match kind {
            "field" => RandomField::from_json(&text).unwrap().to_json(),
            _ => OnePointSystem::from_json(&text).unwrap().to_json(),
        };
        assert_eq!(again, text);
    }
}
