use super::*;
use crate::completion::IdentityCompleter;
use crate::fixtures::{build_scene, ArrayConfig, FixtureShape, Pose, SceneConfig};
use crate::geometry::Point3;
use crate::imaging::VoxelGridSpec;
use crate::metrics::chamfer_distance;
use crate::radar::{SignalSet, Waveform};

fn small_config() -> PipelineConfig {
    PipelineConfig {
        grid: VoxelGridSpec::centered(Point3::origin(), 0.006, [24, 24, 24]).unwrap(),
        proposal: ProposalConfig {
            num_candidates: 6,
            ..ProposalConfig::default()
        },
        scene: SceneConfig {
            array: ArrayConfig {
                count: [8, 8],
                ..ArrayConfig::default()
            },
            waveform: Waveform::new(77e9, 4e9, 16).unwrap(),
            points: 1500,
            ..SceneConfig::default()
        },
        ..PipelineConfig::default()
    }
}

fn scene_signals(shape: FixtureShape, config: &PipelineConfig) -> crate::fixtures::FixtureScene {
    build_scene(shape.name(), shape, Pose::default(), &config.scene, 4).unwrap()
}

#[test]
fn zero_signals_have_no_confident_voxels() {
    let config = small_config();
    let signals = SignalSet::zeros(config.scene.array.build().unwrap(), config.scene.waveform);
    let err = run_pipeline(&signals, &config, &MirrorCompleter::default(), &RunOptions::default())
        .unwrap_err();
    assert!(matches!(err, Error::Stage { .. }));
    assert!(matches!(err.root(), Error::NoConfidentVoxels), "{err}");
}

#[test]
fn reruns_are_byte_identical() {
    let config = small_config();
    let scene = scene_signals(FixtureShape::Cube, &config);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let completer = MirrorCompleter::default();
    run_pipeline(&scene.signals, &config, &completer, &RunOptions::writing_to(a.path())).unwrap();
    run_pipeline(&scene.signals, &config, &completer, &RunOptions::writing_to(b.path())).unwrap();
    for file in [FINAL_FILE, REPORT_FILE] {
        assert_eq!(
            fs::read(a.path().join(file)).unwrap(),
            fs::read(b.path().join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn resuming_from_intermediates_reproduces_the_run() {
    let config = small_config();
    let scene = scene_signals(FixtureShape::Sphere, &config);
    let dir = tempfile::tempdir().unwrap();
    let options = RunOptions {
        keep_intermediates: true,
        ..RunOptions::writing_to(dir.path())
    };
    let fresh = run_pipeline(&scene.signals, &config, &MirrorCompleter::default(), &options).unwrap();
    let stash = dir.path().join(INTERMEDIATES_DIR);
    for name in [NORMAL_FIELD_FILE, POTENTIAL_FILE, CANDIDATES_DIR, COMPLETED_DIR] {
        assert!(stash.join(name).exists(), "{name}");
    }
    let first = fs::read(dir.path().join(FINAL_FILE)).unwrap();

    let resumed = RunOptions {
        resume: true,
        ..options.clone()
    };
    fs::remove_dir_all(stash.join(COMPLETED_DIR)).unwrap();
    let recompleted =
        run_pipeline(&scene.signals, &config, &MirrorCompleter::default(), &resumed).unwrap();
    assert_eq!(recompleted.completed, fresh.completed);
    assert_eq!(recompleted.report, fresh.report);
    assert_eq!(fs::read(dir.path().join(FINAL_FILE)).unwrap(), first);

    // Silent signals and an identity completer would change every stage, so
    // matching products show they were all read back.
    let zeros = SignalSet::zeros(scene.signals.array().clone(), *scene.signals.waveform());
    let cached = run_pipeline(&zeros, &config, &IdentityCompleter, &resumed).unwrap();
    assert_eq!(cached.candidates, fresh.candidates);
    assert_eq!(cached.completed, fresh.completed);
}

#[test]
fn keep_intermediates_off_writes_only_outputs() {
    let config = small_config();
    let scene = scene_signals(FixtureShape::Cylinder, &config);
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(&scene.signals, &config, &MirrorCompleter::default(), &RunOptions::writing_to(dir.path()))
        .unwrap();
    assert!(dir.path().join(FINAL_FILE).is_file());
    assert!(!dir.path().join(INTERMEDIATES_DIR).exists());
}

#[test]
fn final_cloud_is_one_of_the_completions() {
    let config = small_config();
    let scene = scene_signals(FixtureShape::Cube, &config);
    let out =
        run_pipeline(&scene.signals, &config, &MirrorCompleter::default(), &RunOptions::default())
            .unwrap();
    assert_eq!(out.final_cloud, out.completed[out.report.chosen_index].reconstruction);
    assert_eq!(out.report.chosen_source_index, out.completed[out.report.chosen_index].source_index);
    assert_eq!(out.report.entropy_scores.len(), out.completed.len());
    assert!(chamfer_distance(&out.final_cloud, &scene.ground_truth).unwrap().is_finite());
}

#[test]
fn external_completer_without_directory_is_a_config_error() {
    let config = CompleterConfig {
        kind: CompleterKind::External,
        ..CompleterConfig::default()
    };
    assert!(make_completer(&config).err().unwrap().is_config());
    assert_eq!(make_completer(&CompleterConfig::default()).unwrap().tag(), "mirror");
}

#[test]
fn empty_scene_dir_is_an_error() {
    let scenes = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    assert!(matches!(
        benchmark(scenes.path(), out.path(), &small_config(), &MirrorCompleter::default()),
        Err(Error::NoScenes(_))
    ));
}

#[test]
fn benchmark_writes_one_row_per_scene() {
    let config = small_config();
    let scenes = tempfile::tempdir().unwrap();
    for shape in [FixtureShape::Sphere, FixtureShape::LBracket] {
        write_scene(scenes.path().join(shape.name()), &scene_signals(shape, &config)).unwrap();
    }
    // A scene with silent signals fails but still gets a row.
    let silent = crate::fixtures::FixtureScene {
        signals: SignalSet::zeros(config.scene.array.build().unwrap(), config.scene.waveform),
        ..scene_signals(FixtureShape::Cube, &config)
    };
    write_scene(scenes.path().join("silent"), &silent).unwrap();
    fs::create_dir(scenes.path().join("not-a-scene")).unwrap();

    let out = tempfile::tempdir().unwrap();
    let summary = benchmark(scenes.path(), out.path(), &config, &MirrorCompleter::default()).unwrap();
    let ids: Vec<&str> = summary.rows.iter().map(|r| r.object_id.as_str()).collect();
    assert_eq!(ids, ["l-bracket", "silent", "sphere"]);
    assert_eq!(summary.aggregate.failed, 1);
    assert!(!summary.rows[1].is_ok());

    let ok: Vec<&SceneRow> = summary.rows.iter().filter(|r| r.is_ok()).collect();
    let mean = ok.iter().map(|r| r.recall.unwrap()).sum::<f64>() / ok.len() as f64;
    assert!((summary.aggregate.overall.recall - mean).abs() < 1e-12);
    let size_total: usize = summary.aggregate.by_size.values().map(|m| m.count).sum();
    assert_eq!(size_total, ok.len());

    let mut reader = csv::Reader::from_path(out.path().join(RESULTS_FILE)).unwrap();
    let back: Vec<SceneRow> = reader.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(back.len(), 3);
    assert_eq!(back[0].recall, summary.rows[0].recall);
    let aggregate: Aggregate = crate::io::read_json(out.path().join(AGGREGATE_FILE)).unwrap();
    assert_eq!(aggregate, summary.aggregate);
    assert!(out.path().join("sphere").join(FINAL_FILE).is_file());
}

