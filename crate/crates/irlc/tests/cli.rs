use std::path::Path;
use std::process::{Command, Output};

use irlc::commands::ols_slope;

fn irlc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irlc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const MUFFIN: &str = r#"
[instance]
source = "named"
name = "muffin"
[expert]
tau_e = 50
[algorithm]
epsilon = 0.1
delta = 0.1
threshold = 0.05
max_episodes = 500
[replication]
seeds = [3, 1, 2]
"#;

#[test]
fn classify_muffin_is_exact_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", MUFFIN);
    let a = irlc(
        &[
            "classify",
            "--config",
            "c.toml",
            "--out-dir",
            "a",
            "--threads",
            "2",
        ],
        dir.path(),
    );
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stderr)
    );
    let b = irlc(
        &["classify", "--config", "c.toml", "--out-dir", "b"],
        dir.path(),
    );
    assert_eq!(b.status.code(), Some(0));
    for f in ["sweep.csv", "summary.json"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between runs");
    }
    let s = json(&dir.path().join("a/summary.json"));
    assert_eq!(s["max_sup_error"], 0.0);
    assert_eq!(s["pac_success_rate"], 1.0);
    let seeds: Vec<u64> = s["per_seed"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["seed"].as_u64().unwrap())
        .collect();
    assert_eq!(seeds, vec![1, 2, 3]);
    assert_eq!(s["provenance"]["seeds"], serde_json::json!([1, 2, 3]));
    let csv = std::fs::read_to_string(dir.path().join("a/sweep.csv")).unwrap();
    assert!(csv.starts_with("seed,reward_id,j_star_hat,j_expert_hat,c_hat,label,exact_c"));
    assert!(String::from_utf8_lossy(&a.stderr).contains("flag: budget_exhausted"));
}

#[test]
fn no_oracle_drops_exact_columns() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", MUFFIN);
    let out = irlc(
        &[
            "classify",
            "--config",
            "c.toml",
            "--out-dir",
            "o",
            "--no-oracle",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let s = json(&dir.path().join("o/summary.json"));
    assert!(s["pac_success_rate"].is_null());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.toml", "[algorithm]\ndelta = 0.0\n");
    let out = irlc(&["classify", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta"));
    let out = irlc(&["rates", "--config", "missing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_instance_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "g.toml",
        "[instance]\nsource = \"random\"\nstates = 4\nactions = 2\nhorizon = 3\nstructure = \"linear\"\ndim = 2\n[expert]\ntau_e = 20\n[replication]\nseeds = [7]\n",
    );
    let out = irlc(
        &["gen-instance", "--config", "g.toml", "--out-dir", "inst"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc = json(&dir.path().join("inst/instance.json"));
    assert_eq!(doc["provenance"]["generator"], "random");
    assert_eq!(doc["provenance"]["seed"], 7);
    let out = irlc(
        &[
            "validate",
            "--instance",
            "inst/instance.json",
            "--episodes",
            "inst/expert.jsonl",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let mut lines = std::fs::read_to_string(dir.path().join("inst/expert.jsonl")).unwrap();
    lines.push_str("{\"states\":[9],\"actions\":[0,0,0]}\n");
    write(dir.path(), "broken.jsonl", &lines);
    let out = irlc(
        &[
            "validate",
            "--instance",
            "inst/instance.json",
            "--episodes",
            "broken.jsonl",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 21"));
}

#[test]
fn classify_from_files() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "g.toml", "[instance]\nsource = \"random\"\nstates = 3\nactions = 2\nhorizon = 2\n[expert]\ntau_e = 200\n");
    assert_eq!(
        irlc(
            &["gen-instance", "--config", "g.toml", "--out-dir", "."],
            dir.path()
        )
        .status
        .code(),
        Some(0)
    );
    write(
        dir.path(),
        "c.toml",
        "[instance]\nsource = \"file\"\npath = \"instance.json\"\n[expert]\nsource = \"dataset\"\ndataset = \"expert.jsonl\"\n[rewards]\nsource = \"random\"\ncount = 20\n[algorithm]\nmax_episodes = 300\n",
    );
    let out = irlc(
        &["classify", "--config", "c.toml", "--out-dir", "o"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = json(&dir.path().join("o/summary.json"));
    assert_eq!(s["per_seed"][0]["tau_e"], 200);
    assert!(s["max_sup_error"].as_f64().is_some());
}

#[test]
fn degeneracy_verdicts_and_grid_agreement() {
    let dir = tempfile::tempdir().unwrap();
    for (name, degenerate) in [("nondegenerate_phi1", false), ("degenerate_phi2", true)] {
        write(
            dir.path(),
            "d.toml",
            &format!("[instance]\nsource = \"named\"\nname = \"{name}\"\n"),
        );
        let out = irlc(
            &["degeneracy", "--config", "d.toml", "--out-dir", name],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0));
        let s = json(&dir.path().join(name).join("degeneracy.json"));
        assert_eq!(s["per_seed"][0]["degenerate"], degenerate);
        assert_eq!(s["all_agree"], true);
    }
    write(
        dir.path(),
        "r.toml",
        "[instance]\nsource = \"random\"\nstates = 3\nactions = 2\nhorizon = 2\nstructure = \"linear\"\ndim = 2\n[replication]\nseeds = [19]\n",
    );
    let out = irlc(
        &["degeneracy", "--config", "r.toml", "--out-dir", "r"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let s = json(&dir.path().join("r/degeneracy.json"));
    assert_eq!(s["all_agree"], true, "{s}");
    assert!(
        s["per_seed"][0]["stages"][0]["grid_points"]
            .as_u64()
            .unwrap()
            >= 9_000
    );
}

#[test]
fn rates_single_budget_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "r.toml",
        "[instance]\nsource = \"random\"\nstates = 3\nactions = 2\nhorizon = 3\n[rates]\nbudgets = [500]\n[replication]\nseeds = [1, 2]\n",
    );
    let out = irlc(
        &["rates", "--config", "r.toml", "--out-dir", "o"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let s = json(&dir.path().join("o/rates.json"));
    assert_eq!(s["single_budget"], true);
    assert!(s["fits"][0]["slope"].is_null());
}

#[test]
fn exploration_rates_improve_with_budget() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "r.toml",
        "[instance]\nsource = \"random\"\nstates = 3\nactions = 2\nhorizon = 3\n[rewards]\nsource = \"random\"\ncount = 20\n[rates]\nkind = \"exploration\"\nbudgets = [100, 10000]\n[replication]\nseeds = [1, 2, 3, 4, 5]\n",
    );
    let out = irlc(
        &["rates", "--config", "r.toml", "--out-dir", "o"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = json(&dir.path().join("o/rates.json"));
    assert_eq!(s["fits"][0]["nonincreasing"], true, "{s}");
}

#[test]
fn tree_hardness_reports_gap_and_trivial_case() {
    let dir = tempfile::tempdir().unwrap();
    let base = "[instance]\nsource = \"tree\"\nbranching = 3\ndepth = 2\nhorizon = 8\nwait = 2\nepsilon = 0.1\n[hardness]\nkind = \"tree\"\nbudget = 200\n[expert]\ntau_e = 10\n[algorithm]\nepsilon = 0.1\n[replication]\nseeds = [1, 2, 3]\n";
    write(dir.path(), "t0.toml", base);
    let out = irlc(
        &["hardness", "--config", "t0.toml", "--out-dir", "t0"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let s = json(&dir.path().join("t0/hardness.json"));
    assert_eq!(s["trivial"], true);
    write(
        dir.path(),
        "t1.toml",
        &base.replace(
            "epsilon = 0.1\n[hardness]",
            "epsilon = 0.1\nhidden = [3, 2, 1]\n[hardness]",
        ),
    );
    let out = irlc(
        &["hardness", "--config", "t1.toml", "--out-dir", "t1"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = json(&dir.path().join("t1/hardness.json"));
    assert!((s["gap"].as_f64().unwrap() - 0.2).abs() < 1e-12);
    // 200 episodes cannot resolve a 0.2-wide leaf bias at one of 9 leaves
    assert!(s["misclassification_rate"].as_f64().unwrap() > 0.5, "{s}");
}

#[test]
fn slope_of_exact_power_law() {
    let x: Vec<f64> = [1e2f64, 1e3, 1e4].iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = [1e2f64, 1e3, 1e4]
        .iter()
        .map(|v| (3.0 / v.sqrt()).ln())
        .collect();
    assert!((ols_slope(&x, &y).unwrap() + 0.5).abs() < 1e-12);
    assert!(ols_slope(&x[..1], &y[..1]).is_none());
}

#[test]
fn packing_hardness_pairs_runs() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "p.toml",
        "[instance]\nsource = \"packing\"\nbranching = 2\ndepth = 4\nhorizon = 14\nwait = 2\nbias = 0.05\nepsilon = 0.1\n[hardness]\nkind = \"packing\"\nbudget = 300\nrandom_rewards = 5\n[expert]\ntau_e = 10\n[replication]\nseeds = [1, 2]\n",
    );
    let out = irlc(
        &["hardness", "--config", "p.toml", "--out-dir", "o"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = json(&dir.path().join("o/hardness.json"));
    assert_eq!(s["states"], 24);
    assert_eq!(s["per_seed"].as_array().unwrap().len(), 2);
    let f = s["packing_harder_fraction"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f));
}

#[test]
fn packing_instance_is_harder_than_random_on_its_reward() {
    let dir = tempfile::tempdir().unwrap();
    let seeds: Vec<String> = (0..30).map(|s| s.to_string()).collect();
    write(
        dir.path(),
        "p.toml",
        &format!(
            "[instance]\nsource = \"packing\"\nbranching = 2\ndepth = 4\nhorizon = 14\nwait = 2\nbias = 0.05\nepsilon = 0.1\n[hardness]\nkind = \"packing\"\nbudget = 2000\n[expert]\ntau_e = 100\n[replication]\nseeds = [{}]\n",
            seeds.join(", ")
        ),
    );
    let out = irlc(
        &["hardness", "--config", "p.toml", "--out-dir", "o"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = json(&dir.path().join("o/hardness.json"));
    assert!(s["packing_harder_fraction"].as_f64().unwrap() >= 0.7, "{s}");
}
