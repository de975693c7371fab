use irs_anm::anm::AnmSettings;
use irs_anm::crb::{crb_report, identity_covariance};
use irs_anm::harness::{rcrb_deg, run_sweep, SweepAxis, SweepSpec, TrialSetup};
use irs_anm::music::MusicConfig;
use irs_anm::scene::{MeasurementKind, MeasurementSpec, SceneConfig};
use irs_anm::spectrum::Method;

fn spec(axis: SweepAxis, points: Vec<f64>, trials: usize, kind: MeasurementKind) -> SweepSpec {
    SweepSpec {
        axis,
        points,
        trials,
        master_seed: 11,
        estimators: vec![Method::Anm, Method::Music],
        base_scene: SceneConfig::desk_scale(),
        measurement: MeasurementSpec { kind, seed: 0 },
        budget: None,
        noiseless: false,
        anm: AnmSettings::default(),
        music: MusicConfig::default(),
    }
}

#[test]
fn records_independent_of_thread_count() {
    let s = spec(SweepAxis::TxPowerDbm, vec![5.0, 25.0], 12, MeasurementKind::RandomPhase);
    let one = run_sweep(&s, Some(1)).unwrap();
    let many = run_sweep(&s, Some(6)).unwrap();
    assert_eq!(one, many);
}

#[test]
fn trial_records_depend_only_on_seed_and_index() {
    let s = spec(SweepAxis::TxPowerDbm, vec![20.0], 1, MeasurementKind::RandomPhase);
    let scene = s.scene_at(20.0).unwrap();
    let setup = TrialSetup {
        axis_value: 20.0,
        anm: s.anm.resolve(scene.n_res).unwrap(),
        scene,
        measurement: s.measurement,
        estimators: s.estimators.clone(),
        music: s.music,
        noiseless: false,
    };
    let forward: Vec<_> = (0..6).flat_map(|t| setup.run_trial(9, t)).collect();
    let mut backward: Vec<_> = (0..6).rev().flat_map(|t| setup.run_trial(9, t)).collect();
    backward.sort_by_key(|r| (r.trial, r.estimator == Method::Music));
    assert_eq!(forward, backward);
}

#[test]
fn noiseless_three_targets_anm_exact() {
    let mut s = spec(SweepAxis::TxPowerDbm, vec![20.0], 1, MeasurementKind::Dft);
    s.noiseless = true;
    s.estimators = vec![Method::Anm];
    let out = run_sweep(&s, None).unwrap();
    let rec = &out.records[0];
    assert!(!rec.failed);
    assert!(rec.sq_err_sum_deg2.unwrap() < 0.05f64.powi(2) * 3.0);
    assert!(out.summary[0].rmse_deg.unwrap() < 0.05);
}

#[test]
fn budget_tradeoff_runs_down_to_one_se() {
    let mut s = spec(SweepAxis::NSesTradeoff, vec![1.0, 4.0, 8.0], 3, MeasurementKind::Dft);
    s.budget = Some(12);
    s.base_scene = s.base_scene.with_tx_power_dbm(30.0);
    let out = run_sweep(&s, None).unwrap();
    for row in &out.summary {
        match row.estimator {
            Method::Anm => {
                assert_eq!(row.failures, 0, "ANM at M = {}", row.axis_value);
                assert!(row.rmse_deg.is_some());
            }
            // K = 3: MUSIC needs M > 3
            Method::Music => assert_eq!(row.failures == row.trials, row.axis_value <= 3.0),
        }
    }
}

#[test]
fn rmse_improves_with_power() {
    let mut s = spec(SweepAxis::TxPowerDbm, vec![0.0, 30.0], 50, MeasurementKind::Dft);
    s.base_scene = s.base_scene.with_target_angles_deg(&[20.0]);
    s.estimators = vec![Method::Anm];
    let out = run_sweep(&s, None).unwrap();
    let low = out.summary[0].rmse_deg.unwrap();
    let high = out.summary[1].rmse_deg.unwrap();
    assert!(high <= low, "RMSE at 30 dBm {high} vs 0 dBm {low}");
}

#[test]
fn rcrb_column_matches_crb_module() {
    let s = spec(SweepAxis::NSlots, vec![40.0], 1, MeasurementKind::RandomPhase);
    let out = run_sweep(&s, None).unwrap();
    let scene = s.scene_at(40.0).unwrap();
    let report = crb_report(&scene, &identity_covariance(scene.n_res, scene.n_slots)).unwrap();
    let mean = report.crb_per_target.iter().sum::<f64>() / report.crb_per_target.len() as f64;
    let want = mean.sqrt() * 180.0 / std::f64::consts::PI;
    let got = out.summary[0].rcrb_deg.unwrap();
    assert!((got - want).abs() <= 1e-12 * want);
    assert_eq!(rcrb_deg(&scene, &s.measurement).unwrap().0, got);
}

#[test]
fn single_target_dft_rcrb_is_closed_form() {
    let mut s = spec(SweepAxis::TxPowerDbm, vec![15.0], 1, MeasurementKind::Dft);
    s.base_scene = s.base_scene.with_target_angles_deg(&[-35.0]);
    let out = run_sweep(&s, None).unwrap();
    let scene = s.scene_at(15.0).unwrap();
    let closed = irs_anm::crb::closed_form_single_crb(&scene, scene.n_slots).unwrap();
    let got = out.summary[0].rcrb_deg.unwrap();
    assert!((got - closed.sqrt().to_degrees()).abs() <= 1e-8 * got);
}

#[test]
fn invalid_specs_rejected() {
    let mut s = spec(SweepAxis::TxPowerDbm, vec![], 1, MeasurementKind::Dft);
    assert!(run_sweep(&s, None).is_err());
    s.points = vec![10.0];
    s.trials = 0;
    assert!(run_sweep(&s, None).is_err());
    s.trials = 1;
    assert!(run_sweep(&s, Some(0)).is_err());
    let s = spec(SweepAxis::NSesTradeoff, vec![4.0], 1, MeasurementKind::Dft);
    assert!(run_sweep(&s, None).unwrap_err().is_config());
}

#[test]
fn shipped_configs_load() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let scene = irs_anm::scene::SceneFile::load(&dir.join("scene_desk.json")).unwrap();
    assert_eq!(scene.to_scene().unwrap(), SceneConfig::desk_scale());
    for name in ["sweep_power", "sweep_targets", "sweep_tradeoff", "sweep_slots"] {
        let file = irs_anm::harness::SweepFile::load(&dir.join(format!("{name}.json"))).unwrap();
        file.to_spec().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
