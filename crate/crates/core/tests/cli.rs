use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cache_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("profiles")
}

fn blockfade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockfade"))
        .args(args)
        .env("BLOCKFADE_CACHE_DIR", cache_dir())
        .output()
        .expect("spawn blockfade")
}

const SMALL: &str = r#"
name = "small"
constellation = "qpsk"
rates = [0.5, 0.9, 1.4, 1.7]
seed = 5
samples = 1500

[snr]
start_db = 0.0
stop_db = 20.0
step_db = 2.0

[fading]
model = "nakagami"
m = 1.0
blocks = 4

[[scheme]]
kind = "uniform"

[[scheme]]
kind = "optimal"

[[scheme]]
kind = "twf"
beta = 10.0

[[scheme]]
kind = "ref"
beta = 10.0

[[scheme]]
kind = "waterfilling"
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scenario.toml");
    fs::write(&p, text).unwrap();
    p
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn run_writes_one_csv_per_cell_and_is_worker_independent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let mut outs = Vec::new();
    for w in ["1", "2"] {
        let out = tmp.path().join(format!("out{w}"));
        let o = blockfade(&["run", cfg.to_str().unwrap(), "-o", out.to_str().unwrap(), "-w", w]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outs.push(read_dir(&out));
    }
    let files = &outs[0];
    assert_eq!(files.keys().filter(|k| k.ends_with(".csv")).count(), 20);
    assert!(files.contains_key("summary.txt") && files.contains_key("manifest.toml"));
    assert_eq!(outs[0], outs[1]);

    let csv = String::from_utf8(files["optimal-R1.4.csv"].clone()).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("scheme,P_dB,outage,ci,N"));
    let rows: Vec<&str> = lines.filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| r.starts_with("optimal,") && r.ends_with(",1500")));

    let manifest: toml::Value = toml::from_str(std::str::from_utf8(&files["manifest.toml"]).unwrap()).unwrap();
    assert_eq!(manifest["seed"].as_integer(), Some(5));
    let listed = manifest["outputs"].as_array().unwrap();
    assert_eq!(listed.len(), 21);
    for f in listed {
        let name = f["path"].as_str().unwrap();
        assert_eq!(
            f["sha256"].as_str().unwrap(),
            blockfade::scenario::sha256_hex(&files[name])
        );
    }
}

#[test]
fn seed_flag_changes_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &SMALL.replace("rates = [0.5, 0.9, 1.4, 1.7]", "rates = [1.4]"),
    );
    let run = |seed: &str, dir: &str| {
        let out = tmp.path().join(dir);
        let o = blockfade(&[
            "run",
            cfg.to_str().unwrap(),
            "-o",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert!(o.status.success());
        fs::read(out.join("uniform-R1.4.csv")).unwrap()
    };
    assert_ne!(run("1", "a"), run("2", "b"));
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let no_schemes: String = SMALL.split("[[scheme]]").next().unwrap().to_string();
    let cfg = write_config(tmp.path(), &no_schemes);
    let o = blockfade(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let cfg = write_config(tmp.path(), &SMALL.replace("blocks = 4", "blocks = 4\nbloks = 2"));
    let o = blockfade(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bloks"));

    let o = blockfade(&["run", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = blockfade(&["dump-tables", "17qam"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = blockfade(&[
        "run",
        cfg.to_str().unwrap(),
        "-o",
        blocker.join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn infeasible_long_term_rate_gives_sentinel_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL
        .replace("rates = [0.5, 0.9, 1.4, 1.7]", "rates = [1.9]")
        .split("[[scheme]]")
        .next()
        .unwrap()
        .to_string()
        + "[[scheme]]\nkind = \"lt-twf\"\nbeta = 2.0\n";
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    let o = blockfade(&["run", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("lt-twf-beta2-R1.9.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[1], "lt-twf-beta2,infeasible,1,0,0");
    assert!(lines[2].starts_with("# infeasible:"));
}

#[test]
fn manifest_records_delay_profile_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let pdp = tmp.path().join("pdp.csv");
    fs::write(&pdp, "delay_index,power_db\n0,0\n1,-3\n3,-8\n").unwrap();
    let text = SMALL
        .replace("rates = [0.5, 0.9, 1.4, 1.7]", "rates = [1.0]")
        .replace("samples = 1500", "samples = 300")
        .replace(
            "model = \"nakagami\"\nm = 1.0\nblocks = 4",
            "model = \"ofdm\"\nsubcarriers = 8\npdp = \"pdp.csv\"",
        );
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    let o = blockfade(&["run", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: toml::Value = toml::from_str(&fs::read_to_string(out.join("manifest.toml")).unwrap()).unwrap();
    let data = manifest["data"].as_array().unwrap();
    assert_eq!(data.len(), 1);
    assert_eq!(data[0]["path"].as_str(), Some("pdp.csv"));
    assert_eq!(
        data[0]["sha256"].as_str().unwrap(),
        blockfade::scenario::sha256_hex(&fs::read(&pdp).unwrap())
    );
}

#[test]
fn dump_tables_reports_profile_and_margin() {
    let o = blockfade(&["dump-tables", "qpsk", "--beta", "10"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("# constellation,qpsk,cm\n# beta,10\n"));
    assert!(text.contains("# ref,") && text.contains("# approx,"));
    let store = blockfade::infotheory::ProfileStore::new(Some(cache_dir()));
    let profile = store.get("qpsk", blockfade::infotheory::Decoder::Cm).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("rho_db"))
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), profile.rho_grid().len() - 1);
    let mut gap = f64::NEG_INFINITY;
    for (row, &i) in rows.iter().zip(&profile.mi_table()[1..]) {
        assert_eq!(row[1], i);
        assert!(row[3] >= row[1] - 1e-12, "truncated bound below I");
        gap = gap.max(row[5] - row[1]);
    }
    assert!((gap - 0.0033).abs() <= 0.003, "max gap {gap}");
}
