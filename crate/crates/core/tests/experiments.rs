use quasilocal::experiment::{
    run, schema, EntropySource, ExperimentConfig, ExperimentKind, Seeds, TrotterMode,
};
use quasilocal::family::ForcedRegion;
use sha2::{Digest, Sha256};

fn small(kind: ExperimentKind) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(kind);
    c.seeds = Seeds::Count(2);
    c.chain.length = 6;
    c.tails.c_max = 3;
    c.lrb.t_max = 100.0;
    c.lrb.n_times = 8;
    c.trotter.steps = vec![1, 2, 4];
    c.trotter.gate_norms = vec![0.05, 0.1];
    c
}

fn header(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).lines().next().unwrap_or("").to_string()
}

#[test]
fn every_experiment_emits_its_schema() {
    let cases = [
        (ExperimentKind::Flow, schema::FLOW),
        (ExperimentKind::Tails, schema::TAILS),
        (ExperimentKind::FamilyTails, schema::TAILS),
        (ExperimentKind::Entropy, schema::ENTROPY),
        (ExperimentKind::Jscaling, schema::JSCALING),
        (ExperimentKind::Lrb, schema::LRB),
        (ExperimentKind::Timeavg, schema::TIMEAVG),
        (ExperimentKind::Trotter, schema::TROTTER),
    ];
    for (kind, cols) in cases {
        let r = run(&small(kind)).unwrap();
        assert!(r.pass(), "{}: {:?}", kind.name(), r.failures());
        let files = r.files().unwrap();
        let csv = &files[&format!("{}.csv", kind.name())];
        assert_eq!(header(csv), cols.join(","), "{}", kind.name());
        assert!(r.table.as_ref().unwrap().rows.len() > 1);
    }
}

#[test]
fn flow_rows_meet_tolerance() {
    let r = run(&small(ExperimentKind::Flow)).unwrap();
    let t = r.table.unwrap();
    assert_eq!(t.rows.len(), 2);
    assert!(t.column("residual").unwrap().iter().all(|&v| v < 1e-8));
    assert!(t.column("max_eig_error").unwrap().iter().all(|&v| v < 1e-8));
    assert!(r.artifacts.contains_key("couplings/seed-1.csv"));
    assert_eq!(header(&r.artifacts["couplings/seed-1.csv"]), "d,s_bitmask,J_s");
}

#[test]
fn family_tails_respect_the_collar_bound() {
    let mut c = small(ExperimentKind::FamilyTails);
    c.chain.length = 8;
    let r = run(&c).unwrap();
    assert!(r.pass());
    let t = r.table.unwrap();
    let (d, b) = (t.column("delta").unwrap(), t.column("bound").unwrap());
    assert!(d.iter().zip(&b).all(|(x, y)| x <= y));
    assert_eq!(r.summary["vacuous"], true);
}

#[test]
fn rows_are_sorted_by_seed_then_key() {
    let mut c = small(ExperimentKind::Jscaling);
    c.seeds = Seeds::List(vec![5, 2]);
    c.jscaling.tail_check = false;
    let t = run(&c).unwrap().table.unwrap();
    let seeds = t.column("seed").unwrap();
    let d = t.column("d").unwrap();
    assert_eq!(seeds[0], 2.0);
    assert_eq!(*seeds.last().unwrap(), 5.0);
    assert_eq!(&d[..6], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
}

#[test]
fn identical_configs_give_identical_bytes_across_thread_counts() {
    for kind in [ExperimentKind::Flow, ExperimentKind::Timeavg, ExperimentKind::Lrb, ExperimentKind::Trotter] {
        let mut c = small(kind);
        c.seeds = Seeds::Count(3);
        let a = run(&c).unwrap().files().unwrap();
        c.threads = 2;
        let mut b = run(&c).unwrap().files().unwrap();
        // The resolved config records the thread count.
        b.remove("config.toml");
        assert_eq!(b.len() + 1, a.len());
        for (name, bytes) in &b {
            assert_eq!(bytes, &a[name], "{} {name}", kind.name());
        }
    }
}

#[test]
fn entropy_sources_and_forced_regions() {
    let mut c = small(ExperimentKind::Entropy);
    c.chain.lengths = vec![4, 6];
    c.entropy.cuts = vec![2];
    let r = run(&c).unwrap();
    assert_eq!(r.table.as_ref().unwrap().rows.len(), 4);

    let mut f = small(ExperimentKind::Entropy);
    f.entropy.source = EntropySource::Family;
    f.seeds = Seeds::Count(1);
    f.chain.length = 8;
    f.entropy.cuts = vec![4];
    f.family.forced_regions = vec![ForcedRegion { k: 2, lo: 3, hi: 4 }];
    let r = run(&f).unwrap();
    let max = r.summary["lengths"][0]["cuts"][0]["max"].as_f64().unwrap();
    assert!(max > 0.1 && max <= 2.0 * std::f64::consts::LN_2 + 1e-10, "{max}");

    let mut g = small(ExperimentKind::Entropy);
    g.entropy.source = EntropySource::Flow;
    g.seeds = Seeds::Count(1);
    g.entropy.states = 8;
    assert!(run(&g).unwrap().pass());
}

#[test]
fn trotter_modes_report_slopes() {
    let mut c = small(ExperimentKind::Trotter);
    c.trotter.steps = vec![2, 4, 8];
    let r = run(&c).unwrap();
    let slope = r.summary["error_vs_steps"][0]["fit"]["slope"].as_f64().unwrap();
    assert!((slope + 1.0).abs() < 0.15, "{slope}");

    c.trotter.mode = TrotterMode::Conjugation;
    c.trotter.steps = vec![1];
    c.trotter.gate_norms = vec![0.025, 0.05, 0.1];
    let r = run(&c).unwrap();
    assert!(r.pass());
    let slope = r.summary["error_vs_gate_norm"][0]["fit"]["slope"].as_f64().unwrap();
    assert!((slope - 2.0).abs() < 0.2, "{slope}");
}

#[test]
fn bounds_experiment_writes_report() {
    let r = run(&ExperimentConfig::new(ExperimentKind::Bounds)).unwrap();
    assert!(r.pass());
    assert!(r.table.is_none());
    assert!(r.artifacts.contains_key("bounds_report.json"));
}

#[test]
fn record_checksums_match_files() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(&small(ExperimentKind::Timeavg)).unwrap();
    let sums = r.write(dir.path()).unwrap();
    for (name, sum) in &sums {
        let bytes = std::fs::read(dir.path().join(name)).unwrap();
        assert_eq!(&hex::encode(Sha256::digest(&bytes)), sum);
    }
    let record: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("record.json")).unwrap()).unwrap();
    assert_eq!(record["pass"], true);
    assert!(record["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    let again = ExperimentConfig::from_toml(&std::fs::read_to_string(dir.path().join("config.toml")).unwrap()).unwrap();
    assert_eq!(again, r.config);
}
