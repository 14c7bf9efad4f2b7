use std::process::Command;

use proptest::prelude::*;

use lod_stokes::coefficient::{gen_coefficient, CoefficientSpec};
use lod_stokes::experiment::{
    fit_eoc, read_csv, run_convergence_study, run_decay_study, write_csv, CoefficientChoice, Ell, ErrorColumn, ErrorRecord,
    ExperimentConfig, Source, CSV_HEADER,
};
use lod_stokes::mesh::MeshHierarchy;

fn record(h: f64, err: f64) -> ErrorRecord {
    ErrorRecord {
        h,
        ell: 1,
        m: 0,
        err_u_h1: err,
        err_u_l2: err,
        err_p_pp_l2: err,
        err_pihp_l2: err,
        wall_s: 0.0,
    }
}

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.update_from_kv("H-list = 2^-1, 2^-2\nfine-level = 4\neps = 2^-3\nrecord-time = false\n").unwrap();
    cfg
}

#[test]
fn eoc_examples() {
    let r = fit_eoc(&[record(0.5, 1e-2), record(0.25, 2.5e-3)], ErrorColumn::UH1).unwrap();
    assert!((r[0].rate - 2.0).abs() < 1e-12 && !r[0].flagged);
    let r = fit_eoc(&[record(0.5, 3e-3), record(0.25, 3e-3)], ErrorColumn::UL2).unwrap();
    assert_eq!(r[0].rate, 0.0);
    // input order does not matter
    let r = fit_eoc(&[record(0.125, 1.0 / 256.0), record(0.5, 1.0), record(0.25, 1.0 / 16.0)], ErrorColumn::PressurePP).unwrap();
    assert!(r.iter().all(|e| (e.rate - 4.0).abs() < 1e-12));
    assert_eq!((r[0].h_coarse, r[1].h_fine), (0.5, 0.125));
    let r = fit_eoc(&[record(0.5, 1e-3), record(0.25, 0.0)], ErrorColumn::PressurePiH).unwrap();
    assert!(r[0].flagged && r[0].rate.is_infinite());
    assert!(fit_eoc(&[record(0.5, 1.0)], ErrorColumn::UH1).is_err());
    assert!(fit_eoc(&[record(0.5, 1.0), record(0.2, 0.1)], ErrorColumn::UH1).is_err());
}

proptest! {
    #[test]
    fn csv_round_trips(rows in prop::collection::vec(
        (1usize..6, 1usize..20, 0usize..4, prop::array::uniform5(0.0f64..1e3)), 0..8)) {
        let records: Vec<ErrorRecord> = rows
            .iter()
            .map(|&(level, ell, m, e)| ErrorRecord {
                h: 0.5f64.powi(level as i32),
                ell,
                m,
                err_u_h1: e[0],
                err_u_l2: e[1] * 1e-9,
                err_p_pp_l2: e[2],
                err_pihp_l2: e[3],
                wall_s: e[4],
            })
            .collect();
        let mut buf = Vec::new();
        write_csv(&records, &mut buf).unwrap();
        prop_assert!(buf.starts_with(CSV_HEADER.as_bytes()));
        prop_assert_eq!(read_csv(buf.as_slice()).unwrap(), records);
    }
}

#[test]
fn csv_reader_rejects_bad_input() {
    assert!(read_csv(&b""[..]).is_err());
    assert!(read_csv(&b"H,ell\n"[..]).is_err());
    let bad = format!("{CSV_HEADER}\n0.5,1,0,x,1,1,1,0\n");
    assert!(read_csv(bad.as_bytes()).is_err());
}

#[test]
fn coefficient_properties() {
    let spec = CoefficientSpec::default();
    let h = MeshHierarchy::new(1, 6, true).unwrap();
    let a = gen_coefficient(&spec, &h).unwrap();
    let b = gen_coefficient(&spec, &h).unwrap();
    assert_eq!(a.nu, b.nu);
    assert!(a.sigma.iter().all(|&s| s == 0.0));
    assert!(a.nu.iter().all(|&v| (0.1..=1.0).contains(&v) || v == 10.0));
    let fine = h.fine();
    let inclusion: f64 = (0..fine.num_triangles()).filter(|&t| a.nu[t] == 10.0).map(|t| fine.area(t)).sum();
    assert!(inclusion > 0.0 && inclusion < 0.5, "inclusion area {inclusion}");
    // the inclusion hugs the parabola: within its half-width plus one eps cell
    let eps = 0.5f64.powi(spec.eps_level as i32);
    let curve = |x: [f64; 2]| {
        (0..=20000)
            .map(|i| {
                let s = i as f64 / 20000.0;
                let y = 4.0 * (s - 0.5).powi(2) + 0.25;
                (x[0] - s).hypot(x[1] - y)
            })
            .fold(f64::INFINITY, f64::min)
    };
    for t in (0..fine.num_triangles()).filter(|&t| a.nu[t] == 10.0) {
        assert!(curve(fine.barycenter(t)) <= spec.inclusion_width * eps + 2f64.sqrt() * eps);
    }
    let other = gen_coefficient(&CoefficientSpec { seed: 1, ..spec }, &h).unwrap();
    assert_ne!(a.nu, other.nu);
}

#[test]
fn config_validation() {
    let mut cfg = ExperimentConfig::default();
    assert!(cfg.set("ell", "0").is_err() || cfg.validate().is_err());
    let mut cfg2 = ExperimentConfig::default();
    cfg2.set("fine-level", "3").unwrap();
    assert!(cfg2.validate().is_err());
    assert!(cfg.set("H-list", "0.3").is_err());
    assert!(cfg.set("unknown", "1").is_err());
    let mut cfg3 = ExperimentConfig::default();
    cfg3.set("nu", "2").unwrap();
    assert_eq!(cfg3.coefficient, CoefficientChoice::Constant { nu: 2.0 });
    assert!(cfg3.set("seed", "4").is_err());
    assert!(cfg3.set("nu", "-1").is_err() || cfg3.validate().is_err());
    let cfg4 = ExperimentConfig::from_kv("# comment\nell = 1, 2, full\nm = 1\n").unwrap();
    assert_eq!(cfg4.ell, vec![Ell::Fixed(1), Ell::Fixed(2), Ell::Full]);
    assert_eq!(cfg4.m, 1);
}

#[test]
fn zero_source_gives_zero_errors() {
    let mut cfg = small();
    cfg.source = Source::Zero;
    let r = run_convergence_study(&cfg).unwrap();
    assert_eq!(r.records.len(), 2);
    assert!(r.records.iter().all(|e| e.err_u_h1 == 0.0 && e.err_u_l2 == 0.0 && e.err_p_pp_l2 == 0.0));
}

#[test]
fn csv_output_is_deterministic_without_timings() {
    let cfg = small();
    let run = || {
        let mut buf = Vec::new();
        write_csv(&run_convergence_study(&cfg).unwrap().records, &mut buf).unwrap();
        buf
    };
    let a = run();
    assert_eq!(a, run());
    let rows = read_csv(a.as_slice()).unwrap();
    assert!(rows.iter().all(|r| r.wall_s == 0.0 && r.err_u_h1 > 0.0));
    assert_eq!(rows.iter().map(|r| r.h).collect::<Vec<_>>(), vec![0.5, 0.25]);
}

#[test]
fn decay_study_improves_with_patch_order() {
    let mut cfg = small();
    cfg.set("H-list", "2^-2").unwrap();
    cfg.set("ell", "1, 2, full").unwrap();
    let r = run_decay_study(&cfg).unwrap();
    assert_eq!(r.records.len(), 3);
    assert_eq!(r.saturating_ell, vec![(0.25, 7)]);
    let e: Vec<f64> = r.records.iter().map(|x| x.err_pihp_l2).collect();
    assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
    let mut single = small();
    single.set("ell", "2").unwrap();
    single.set("H-list", "2^-1").unwrap();
    assert_eq!(run_convergence_study(&single).unwrap().records.len(), 1);
}

#[test]
fn cli_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.cfg");
    std::fs::write(&cfg, "H-list = 2^-1\nfine-level = 3\neps = 2^-3\nm = 1\n").unwrap();
    let out = dir.path().join("out.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_lod-stokes"))
        .args(["converge", "--no-time", "--ell", "full", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let rows = read_csv(std::fs::read(&out).unwrap().as_slice()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].h, rows[0].ell, rows[0].m), (0.5, 3, 1));

    let bad = Command::new(env!("CARGO_BIN_EXE_lod-stokes"))
        .args(["solve", "--ell", "0"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("error"));
}
