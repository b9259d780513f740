//! Synthetic workcells run through the full pipeline and the CLI, with the
//! scene's primitive meshes as ground truth.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use cellreach::armkin::catalog::Catalog;
use cellreach::cloudkit::{Cone, OrientedBox, Primitive, Shape, ToolOp};
use cellreach::feastool::{analyze, FeasibilityReport, Session, ZoneStatus};
use cellreach::geom::Pose;
use cellreach::scenegen::{GroundTruth, MachineLayout, MACHINE_ROOF};
use cellreach_gateway::scenario::{generate_task, Generated, Task};
use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Verdict;

const TIME_BUDGET_S: f64 = 60.0;
/// Joint step of the mesh oracle's path sampling, radians.
const ORACLE_STEP: f64 = 0.005;

fn session(g: &Generated) -> Session {
    let mut s = Session::new(g.scenario.workspace, g.cloud.clone()).unwrap();
    s.params = g.scenario.effective_params();
    let model = Catalog::builtin().require(&g.scenario.robot.id).unwrap().clone();
    s.place_robot(model, g.scenario.robot.base_pose).unwrap();
    for z in &g.scenario.zones {
        s.add_zone(z.clone()).unwrap();
    }
    s
}

/// Labels hit by each zone's path, in zone order.
fn mesh_hits(s: &Session, report: &FeasibilityReport, truth: &GroundTruth) -> Vec<(String, Vec<String>)> {
    let p = s.state().robot.as_ref().unwrap();
    report
        .zones
        .iter()
        .filter_map(|z| {
            let path = z.path.as_ref()?;
            let mut labels: Vec<String> = truth
                .path_hits(&p.model, &p.base_pose, path, ORACLE_STEP)
                .into_iter()
                .map(|h| h.label)
                .collect();
            labels.sort();
            labels.dedup();
            Some((z.zone_id.clone(), labels))
        })
        .collect()
}

fn statuses(r: &FeasibilityReport) -> String {
    r.zones
        .iter()
        .map(|z| format!("{}={:?}", z.zone_id, z.status))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn task_a() -> Verdict {
    let g = generate_task(Task::A, 0).unwrap();
    let s = session(&g);
    let started = Instant::now();
    let report = analyze(&s, None).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let with_path = report.zones.len() == 2
        && report.zones.iter().all(|z| z.status == ZoneStatus::ReachableWithPath);
    let hits = mesh_hits(&s, &report, &g.truth);
    let clean = hits.len() == 2 && hits.iter().all(|(_, l)| l.is_empty());
    Verdict::new(
        report.overall_feasible && with_path && clean && secs <= TIME_BUDGET_S,
        format!(
            "overall_feasible={} {}; mesh hits {hits:?}; analyze {secs:.2} s (budget {TIME_BUDGET_S} s)",
            report.overall_feasible,
            statuses(&report)
        ),
    )
}

pub fn task_b() -> Verdict {
    let fixture = |r: &FeasibilityReport| r.verdict("fixture").map(|v| v.status);

    // Roofless: the map has a hole where the roof is, and the planner may
    // route through it.
    let g = generate_task(
        Task::B {
            with_roof: false,
            floating_points: 0,
        },
        0,
    )
    .unwrap();
    let s = session(&g);
    let roofless = analyze(&s, None).unwrap();
    let roofless_hits = mesh_hits(&s, &roofless, &g.truth);
    let through_roof = roofless_hits.iter().any(|(_, l)| l.iter().any(|x| x == MACHINE_ROOF));

    let g = generate_task(
        Task::B {
            with_roof: true,
            floating_points: 0,
        },
        0,
    )
    .unwrap();
    let s = session(&g);
    let complete = analyze(&s, None).unwrap();
    let complete_hits = mesh_hits(&s, &complete, &g.truth);
    let complete_ok = complete.zones.iter().all(|z| z.status == ZoneStatus::ReachableWithPath)
        && complete_hits.iter().all(|(_, l)| l.is_empty());

    let floating = 300;
    let g = generate_task(
        Task::B {
            with_roof: true,
            floating_points: floating,
        },
        0,
    )
    .unwrap();
    let mut s = session(&g);
    let dirty = analyze(&s, None).unwrap();
    let degraded = matches!(
        fixture(&dirty),
        Some(ZoneStatus::ReachableNoPath | ZoneStatus::Unreachable)
    );
    let cavity = MachineLayout::default().cavity_center();
    let erased = s
        .apply_tool(&ToolOp::EraseSphere {
            center: cavity,
            radius: 0.22,
        })
        .unwrap();
    let cleaned = analyze(&s, None).unwrap();
    let cleaned_hits = mesh_hits(&s, &cleaned, &g.truth);
    let restored = fixture(&cleaned) == Some(ZoneStatus::ReachableWithPath)
        && cleaned_hits.iter().all(|(_, l)| l.is_empty());

    Verdict::new(
        through_roof && complete_ok && degraded && restored,
        format!(
            "roofless: {} hits {roofless_hits:?}; complete: {} hits {complete_hits:?}; \
             {floating} floating points: {}; erase_sphere removed {} points, then {} hits {cleaned_hits:?}",
            statuses(&roofless),
            statuses(&complete),
            statuses(&dirty),
            erased.points_before - erased.points_after,
            statuses(&cleaned)
        ),
    )
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_cellreach"))
        .args(args)
        .env_remove("CELLREACH_CONFIG")
        .output()
        .expect("cellreach binary runs")
}

fn gen_scene(dir: &Path, args: &[&str]) -> PathBuf {
    let mut all = vec!["gen-scene"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", dir.to_str().unwrap()]);
    let out = cli(&all);
    assert!(out.status.success(), "gen-scene failed: {}", String::from_utf8_lossy(&out.stderr));
    PathBuf::from(String::from_utf8(out.stdout).unwrap().trim())
}

pub fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let scenarios = [
        gen_scene(dir.path(), &["task-a", "--seed", "0"]),
        gen_scene(dir.path(), &["task-a", "--seed", "9", "--inline", "--name", "task_a_inline"]),
        gen_scene(dir.path(), &["task-b", "--seed", "0", "--inline"]),
        gen_scene(dir.path(), &["task-b", "--seed", "0", "--no-roof"]),
    ];
    let mut identical = 0;
    let mut notes = Vec::new();
    for sc in &scenarios {
        let report = cellreach_gateway::scenario::output_paths(sc).0;
        let mut runs = Vec::new();
        for _ in 0..2 {
            let out = cli(&["run", sc.to_str().unwrap()]);
            let code = out.status.code();
            runs.push((code, std::fs::read(&report).unwrap_or_default()));
        }
        let name = sc.file_stem().unwrap().to_string_lossy().to_string();
        let same = runs[0] == runs[1] && !runs[0].1.is_empty();
        if same {
            identical += 1;
        }
        notes.push(format!("{name}: exit {:?}, {} bytes, identical={same}", runs[0].0, runs[0].1.len()));
    }
    Verdict::new(
        identical == scenarios.len(),
        format!("{identical}/{} scenarios byte-identical over two runs [{}]", scenarios.len(), notes.join("; ")),
    )
}

fn random_op(rng: &mut ChaCha8Rng, s: &Session) -> ToolOp {
    let cloud = &s.state().cloud;
    let anchor = cloud.points[rng.random_range(0..cloud.len())];
    match rng.random_range(0..6) {
        0 => ToolOp::Crop {
            bbox: rng.random_bool(0.5).then(|| {
                OrientedBox::new(
                    Pose::new(anchor, nalgebra::UnitQuaternion::from_euler_angles(0.0, 0.0, rng.random_range(-1.0..1.0))),
                    Vector3::new(rng.random_range(0.2..0.8), rng.random_range(0.2..0.8), rng.random_range(0.05..0.5)),
                )
                .unwrap()
            }),
        },
        1 => ToolOp::RemoveOutliers {
            k: rng.random_range(4..24),
            alpha: rng.random_range(0.5..3.0),
        },
        2 => ToolOp::Downsample {
            leaf: rng.random_range(0.005..0.05),
        },
        3 => ToolOp::EraseCone {
            cone: Cone::new(
                anchor + Vector3::new(0.0, 0.0, rng.random_range(0.2..0.8)),
                Vector3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), -1.0).normalize(),
                rng.random_range(0.05..0.5),
                rng.random_range(0.5..1.5),
            )
            .unwrap(),
        },
        4 => ToolOp::EraseSphere {
            center: anchor,
            radius: rng.random_range(0.02..0.3),
        },
        _ => ToolOp::AddPrimitive {
            primitive: Primitive::new(
                Shape::Box {
                    size: Vector3::new(
                        rng.random_range(0.05..0.3),
                        rng.random_range(0.05..0.3),
                        rng.random_range(0.05..0.3),
                    ),
                },
                Pose::new(
                    Point3::new(anchor.x, anchor.y, anchor.z + 0.1),
                    nalgebra::UnitQuaternion::identity(),
                ),
            )
            .unwrap(),
            density: rng.random_range(2000.0..20000.0),
        },
    }
}

pub fn undo_integrity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7005);
    let (mut restored, mut rejected_ops, mut changed) = (0, 0, 0);
    let sequences = 20;
    for i in 0..sequences {
        let g = generate_task(Task::A, i).unwrap();
        let mut s = session(&g);
        let before = serde_json::to_string(&s).unwrap();
        let snapshots = s.snapshot_count();
        let start_state = serde_json::to_string(s.state()).unwrap();
        let mut applied = Vec::new();
        while applied.len() < 5 {
            let op = random_op(&mut rng, &s);
            match s.apply_tool(&op) {
                Ok(_) => applied.push(op.name()),
                Err(_) => rejected_ops += 1,
            }
        }
        if serde_json::to_string(s.state()).unwrap() != start_state {
            changed += 1;
        }
        for _ in 0..5 {
            s.undo().unwrap();
        }
        if s.snapshot_count() == snapshots && serde_json::to_string(&s).unwrap() == before {
            restored += 1;
        }
    }
    Verdict::new(
        restored == sequences && changed == sequences,
        format!(
            "{restored}/{sequences} sequences of 5 edits + 5 undos restored the serialized session exactly \
             ({rejected_ops} invalid random edits redrawn)"
        ),
    )
}
