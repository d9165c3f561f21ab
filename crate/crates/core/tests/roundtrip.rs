use std::path::Path;

use krom::kmd::{compute_dmd, KoopmanDecomposition};
use krom::metrics::MetricReport;
use krom::modeselect::NormalityReport;
use krom::noise::{load_trace_csv, NoiseFile};
use krom::pipeline::{
    run_experiment, write_outputs, AngleHandling, ExperimentConfig, RunManifest, SystemConfig,
};
use krom::rom::{fit_coefficients, ReducedOrderModel};
use krom::snapshots::{complexify_angles, hankel_embed, load_snapshots, save_snapshots};
use krom::systems::{simulate_kuramoto, KuramotoConfig, LinearModalConfig};

fn json<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn snapshot_decomposition_and_model_files_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = KuramotoConfig { n_osc: 4, t_final: 4.0, ..KuramotoConfig::reference(5) };
    let raw = simulate_kuramoto(&cfg).unwrap();
    let z = complexify_angles(&raw, std::f64::consts::TAU).unwrap();
    let h = hankel_embed(&z, 7).unwrap();
    for (name, s) in [("raw", &raw), ("z", &z), ("h", &h)] {
        let stem = dir.path().join(name);
        save_snapshots(s, &stem).unwrap();
        assert_eq!(&load_snapshots(&stem).unwrap(), s);
    }

    let d = compute_dmd(&h, None).unwrap();
    let kmd_path = dir.path().join("d.kmd.json");
    d.save(&kmd_path).unwrap();
    assert_eq!(KoopmanDecomposition::load(&kmd_path).unwrap(), d);

    let rom = fit_coefficients(&d.truncate(6).unwrap(), &h, 0..h.n_t() - 1).unwrap();
    let embedded = dir.path().join("a.rom.json");
    rom.save(&embedded).unwrap();
    assert_eq!(ReducedOrderModel::load(&embedded).unwrap(), rom);
    let linked = dir.path().join("sub/b.rom.json");
    rom.save_linked(&linked, "../d.kmd.json").unwrap();
    assert_eq!(ReducedOrderModel::load(&linked).unwrap(), rom);

    std::fs::remove_file(&kmd_path).unwrap();
    assert!(ReducedOrderModel::load(&linked).is_err());
}

#[test]
fn pipeline_outputs_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(
        SystemConfig::LinearModal(LinearModalConfig { n_steps: 120, ..LinearModalConfig::reference(2) }),
        3,
        vec![4, 8],
    );
    cfg.svg = true;
    let result = run_experiment(&cfg).unwrap();
    let run = dir.path().join("run");
    write_outputs(&result, &run).unwrap();

    assert_eq!(load_snapshots(&run.join("snapshots/signal")).unwrap(), result.data.signal);
    assert_eq!(
        KoopmanDecomposition::load(&run.join("kmd/decomposition.kmd.json")).unwrap(),
        result.decomposition
    );
    let manifest: RunManifest = json(&run.join("manifest.json"));
    assert_eq!(manifest.config, result.config);
    assert_eq!(manifest.seed, Some(2));
    let normality: NormalityReport = json(&run.join("normality.json"));
    assert_eq!(normality, result.normality);

    let n_base = result.data.signal.n_obs();
    for m in &result.models {
        let mdir = run.join(format!("roms/J{}", m.modes));
        assert_eq!(ReducedOrderModel::load(&mdir.join("model.rom.json")).unwrap(), m.rom);
        let noise = NoiseFile::load(&mdir.join("model.noise.json")).unwrap();
        assert_eq!(noise.n_modes, m.modes);
        assert_eq!(noise.gaussian_fits, m.noise.fits()[..n_base]);
        for (stem, full) in [
            ("residual", m.noise.residual()),
            ("modal", m.noise.modal()),
            ("innovation", m.noise.innovation()),
        ] {
            let (names, times, trace) = load_trace_csv(&mdir.join(format!("model.{stem}.csv"))).unwrap();
            assert_eq!(names, result.data.signal.meta().coord_names);
            assert_eq!(times.len(), full.ncols());
            assert_eq!(trace, full.rows(0, n_base).into_owned());
        }
        let metrics: MetricReport = json(&mdir.join("metrics.json"));
        assert_eq!(metrics, m.metrics);

        let rec = std::fs::read_to_string(mdir.join("reconstruction.csv")).unwrap();
        let mut lines = rec.lines();
        assert!(lines.next().unwrap().starts_with("t,x0_true,x0_rom,x0_lo,x0_hi,x1_true"));
        assert_eq!(lines.count(), result.data.signal.n_t());
        assert!(mdir.join("coord0.svg").exists());
    }
    let csv = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * n_base);
}

#[test]
fn configs_roundtrip_through_json() {
    let mut cfg = ExperimentConfig::new(SystemConfig::Kuramoto(KuramotoConfig::reference(1)), 301, vec![10, 20]);
    cfg.angle_handling = AngleHandling::Complexify;
    cfg.train_window = Some([0, 50]);
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(serde_json::from_str::<ExperimentConfig>(&text).unwrap(), cfg);

    let minimal = r#"{"system": {"kind": "linear_modal", "j_true": 10, "n": 20, "noise_std": 0.25, "n_steps": 500, "seed": 1}, "mode_sweep": [5]}"#;
    let parsed: ExperimentConfig = serde_json::from_str(minimal).unwrap();
    assert_eq!(parsed.delay, 1);
    assert_eq!(parsed.band_k, 2.0);
    assert_eq!(parsed.threshold, 0.05);
}
