//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process fails if any criterion does.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use navfuse::depth::{smooth_depth, DepthFrame, GaussianKernel, LocalPercept, Zone, MACS_PER_FRAME};
use navfuse::fusion::{
    fuse, is_conflict, pipeline_step, speed_command, FusionCommand, FusionTable, PipelineMode,
    PipelineParams, SpeedSchedule,
};
use navfuse::geometry::{Rect, Segment, Vec2};
use navfuse::global::{GlobalPercept, LanePath, SteeringClass};
use navfuse::harness::{run_suite, Outcome, SuiteConfig, SuiteResult};
use navfuse::sim::{
    sense_tof, step_dynamics, DronePose, ScenarioId, Section, SectionRegion, TofModel, World,
};
use navfuse::telemetry::replay;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CONVOLUTION_REL_TOL: f64 = 1e-9;
const WALL_TOL_MM: f64 = 1.0;
const ARC_REL_TOL: f64 = 0.02;
const SUITE_BUDGET_S: f64 = 30.0;
const STALL_DC_MM: f32 = 500.0;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn random_frame(rng: &mut ChaCha8Rng) -> DepthFrame {
    let cells: Vec<u16> = (0..64).map(|_| rng.gen_range(200..=4000)).collect();
    DepthFrame::from_slice(&cells, rng.gen(), 0).unwrap()
}

type Expected = [(Option<f64>, Option<f64>); 3];

/// Expected (straight, turn) rate per mode, `None` meaning not attempted.
fn expected_pattern(s: ScenarioId) -> Expected {
    let global = match s {
        ScenarioId::S1 => (Some(1.0), Some(1.0)),
        _ => (Some(0.0), None),
    };
    [global, (Some(1.0), Some(0.0)), (Some(1.0), Some(1.0))]
}

fn success_pattern(res: &SuiteResult, elapsed: f64) -> Verdict {
    let mut mismatches = Vec::new();
    let mut cells = 0;
    for s in ScenarioId::ALL {
        for (m, (straight, turn)) in PipelineMode::ALL.into_iter().zip(expected_pattern(s)) {
            for (section, want) in [(Section::Straight, straight), (Section::Turn, turn)] {
                cells += 1;
                let got = res.matrix.get(s, m, section).rate();
                if got != want {
                    mismatches.push(format!("{s}/{m}/{section}: got {got:?}, want {want:?}"));
                }
            }
        }
    }
    let in_time = elapsed < SUITE_BUDGET_S;
    let pass = mismatches.is_empty() && in_time && res.records.len() == 45;
    let detail = if mismatches.is_empty() {
        format!("{cells}/{cells} cells match over {} trials in {elapsed:.2} s", res.records.len())
    } else {
        format!("{} of {cells} cells differ: {}", mismatches.len(), mismatches.join("; "))
    };
    verdict(pass, detail)
}

fn convolution_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let kernel = GaussianKernel::default();
    let reference = common::gaussian_weights(GaussianKernel::DEFAULT_SIGMA);
    let kernel_err = kernel
        .weights()
        .iter()
        .flatten()
        .zip(reference.iter().flatten())
        .map(|(a, b)| (f64::from(*a) - b).abs())
        .fold(0.0, f64::max);
    let mut worst = 0.0f64;
    let mut bad_macs = 0;
    for _ in 0..1000 {
        let frame = random_frame(&mut rng);
        let sm = smooth_depth(&frame, &kernel);
        if sm.mac_count != MACS_PER_FRAME {
            bad_macs += 1;
        }
        let naive = common::naive_smooth(&frame, kernel.weights());
        for (a, b) in sm.cells.iter().flatten().zip(naive.iter().flatten()) {
            let rel = (f64::from(*a) - f64::from(*b)).abs() / f64::from(b.abs()).max(1e-12);
            worst = worst.max(rel);
        }
    }
    verdict(
        worst <= CONVOLUTION_REL_TOL && bad_macs == 0 && kernel_err < 1e-7,
        format!(
            "1000 frames, max relative error {worst:e} (limit {CONVOLUTION_REL_TOL:e}), {bad_macs} frames with mac_count != 1600, kernel deviation {kernel_err:.1e}"
        ),
    )
}

fn lut_gating() -> Verdict {
    let table = FusionTable::standard();
    let schedule = SpeedSchedule::standard();
    let mut failures = Vec::new();
    let mut zero_cells = BTreeMap::new();
    for sc in SteeringClass::ALL {
        for zone in Zone::ALL {
            for d_c in [200.0f32, 1000.0, 2500.0, 4000.0] {
                let x_dmax = match zone {
                    Zone::LeftTurn => 1,
                    Zone::NoTurn => 3,
                    Zone::RightTurn => 6,
                };
                let (agree, yaw) = fuse(&table, sc, &LocalPercept { x_dmax, zone, d_c }, 60.0);
                let v = speed_command(agree, d_c, &schedule, 1.5);
                if ![0.0, 30.0, 60.0].contains(&yaw.abs()) || !(0.0..=1.5).contains(&v) {
                    failures.push(format!("({sc}, {zone}) at {d_c} mm gives yaw {yaw}, v {v}"));
                }
                if agree != !is_conflict(sc, zone) || (!agree && v != 0.0) {
                    failures.push(format!("({sc}, {zone}) at {d_c} mm gates wrongly"));
                }
                if !agree {
                    *zero_cells.entry(format!("({sc}, {zone})")).or_insert(0) += 1;
                }
            }
        }
    }
    let s_cells: Vec<_> = zero_cells.keys().cloned().collect();
    let pass = failures.is_empty() && zero_cells.len() == 2 && zero_cells.values().all(|&n| n == 4);
    verdict(
        pass,
        if failures.is_empty() {
            format!("9 cells x 4 distances valid; agree = 0 and v_f = 0 only on {}", s_cells.join(" and "))
        } else {
            failures.join("; ")
        },
    )
}

fn yaw_codomain() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let params = PipelineParams::default();
    let mut seen = BTreeMap::new();
    let mut bad = Vec::new();
    for _ in 0..10_000 {
        let frame = random_frame(&mut rng);
        let mode = if rng.gen() { PipelineMode::Fused } else { PipelineMode::Local };
        let g = GlobalPercept::new(rng.gen_range(-1.0..=1.0), 0.0);
        let c: FusionCommand = pipeline_step(mode, &frame, &g, &params);
        if ![0.0, 30.0, 60.0].contains(&c.yaw_rate.abs()) {
            bad.push(c.yaw_rate);
        }
        *seen.entry(c.yaw_rate.to_string()).or_insert(0u32) += 1;
    }
    verdict(
        bad.is_empty(),
        format!("10000 table-mode steps, yaw values seen {:?}, {} outside {{0, 30, 60}}", seen.keys().collect::<Vec<_>>(), bad.len()),
    )
}

fn bare_world(walls: Vec<Segment>, obstacles: Vec<Rect>) -> World {
    World {
        walls,
        obstacles,
        lane: LanePath::new(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)]).unwrap(),
        start_pose: DronePose::new(0.0, 0.0, 0.0),
        end_region: Rect::from_bounds(50.0, -1.0, 51.0, 1.0),
        sections: vec![SectionRegion { label: Section::Straight, area: Rect::from_bounds(-60.0, -60.0, 60.0, 60.0) }],
    }
}

fn sensor_checks() -> Verdict {
    let exact = TofModel { noise_sigma_mm: 0.0, ..TofModel::default() };
    let wall = bare_world(vec![Segment::new(Vec2::new(1.0, -10.0), Vec2::new(1.0, 10.0))], vec![]);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let frame = sense_tof(&wall, &DronePose::new(0.0, 0.0, 0.0), &exact, 0, &mut rng);
    let mut worst = 0.0f64;
    for row in frame.cells() {
        for (k, &v) in row.iter().enumerate() {
            let alpha = (32.5 - (k as f64 + 0.5) * 8.125).to_radians();
            worst = worst.max((f64::from(v) - 1000.0 / alpha.cos()).abs());
        }
    }

    let mut mirrored_ok = 0;
    for _ in 0..100 {
        let walls = (0..rng.gen_range(1..8))
            .map(|_| {
                Segment::new(
                    Vec2::new(rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0)),
                    Vec2::new(rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0)),
                )
            })
            .collect();
        let obstacles = (0..rng.gen_range(0..4))
            .map(|_| {
                Rect::new(
                    Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)),
                    Vec2::new(rng.gen_range(0.1..1.0), rng.gen_range(0.1..1.0)),
                    rng.gen_range(-1.5..1.5),
                )
            })
            .collect();
        let world = bare_world(walls, obstacles);
        let pose = DronePose::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-3.0..3.0));
        let f = sense_tof(&world, &pose, &exact, 0, &mut rng);
        let m = sense_tof(&world.mirror_y(), &pose.mirror_y(), &exact, 0, &mut rng);
        if m == f.mirrored() {
            mirrored_ok += 1;
        }
    }
    verdict(
        worst <= WALL_TOL_MM && mirrored_ok == 100,
        format!("wall at 1 m: max deviation {worst:.3} mm from 1000/cos(alpha) (limit {WALL_TOL_MM}); mirror symmetry on {mirrored_ok}/100 random worlds"),
    )
}

fn kinematics_oracle() -> Verdict {
    let (v, w) = (1.5, 60.0);
    let dt = 1.0 / 15.0;
    let cmd = FusionCommand { agree: true, yaw_rate: w, v_f: v };
    let mut poses = vec![DronePose::new(0.0, 0.0, 0.0)];
    for _ in 0..23 {
        poses.push(step_dynamics(poses.last().unwrap(), &cmd, dt));
    }
    let expected = v / w.to_radians();
    let fitted = common::circumradius(poses[0].position(), poses[11].position(), poses[22].position());
    let rel = (fitted - expected).abs() / expected;
    let swept = poses[22].heading.to_degrees();
    verdict(
        rel <= ARC_REL_TOL,
        format!("radius {fitted:.4} m vs v/w = {expected:.4} m ({:.3}% off, limit 2%), heading after 22 ticks {swept:.1} deg", rel * 100.0),
    )
}

fn determinism() -> Verdict {
    let exe = env!("CARGO_BIN_EXE_navfuse");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut stdout = Vec::new();
    for d in &dirs {
        let out = Command::new(exe)
            .args(["suite", "--trials", "5", "--seed", "42", "--out"])
            .arg(d.path())
            .env("NAVFUSE_THREADS", if stdout.is_empty() { "1" } else { "4" })
            .output()
            .expect("navfuse binary runs");
        if !out.status.success() {
            return verdict(false, format!("suite exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr)));
        }
        stdout.push(out.stdout);
    }
    let list = |p: &Path| {
        let mut v: Vec<_> = fs::read_dir(p).unwrap().map(|e| e.unwrap().file_name()).collect();
        v.sort();
        v
    };
    let (a, b) = (list(dirs[0].path()), list(dirs[1].path()));
    let telemetry = a.iter().filter(|n| n.to_string_lossy().starts_with("telemetry_")).count();
    let mut differing = Vec::new();
    let mut replay_failures = 0;
    for name in &a {
        let x = fs::read(dirs[0].path().join(name)).unwrap();
        let y = fs::read(dirs[1].path().join(name)).unwrap_or_default();
        if x != y {
            differing.push(name.to_string_lossy().into_owned());
        }
        if name.to_string_lossy().starts_with("telemetry_") && replay(&String::from_utf8_lossy(&x)).is_err() {
            replay_failures += 1;
        }
    }
    let pass = a == b && differing.is_empty() && stdout[0] == stdout[1] && telemetry == 45 && replay_failures == 0;
    verdict(
        pass,
        format!(
            "{} files per run ({telemetry} telemetry), {} differ, stdout identical: {}, replay failures: {replay_failures}",
            a.len(),
            differing.len(),
            stdout[0] == stdout[1]
        ),
    )
}

fn local_stall(res: &SuiteResult) -> Verdict {
    let mut checked = 0;
    let mut bad = Vec::new();
    for r in res.records.iter().filter(|r| r.mode == PipelineMode::Local && r.failed_section == Some(Section::Turn)) {
        checked += 1;
        let last = r.terminal_row().expect("trajectory is never empty");
        if r.outcome != Outcome::Timeout || last.command.v_f != 0.0 || last.d_c >= STALL_DC_MM {
            bad.push(format!("{} seed {}: {} with v_f {} and d_C {}", r.scenario, r.seed, r.outcome.as_str(), last.command.v_f, last.d_c));
        }
    }
    let max_dc = res
        .records
        .iter()
        .filter(|r| r.mode == PipelineMode::Local && r.failed_section == Some(Section::Turn))
        .filter_map(|r| r.terminal_row())
        .map(|t| t.d_c)
        .fold(0.0f32, f32::max);
    verdict(
        checked > 0 && bad.is_empty(),
        if bad.is_empty() {
            format!("{checked} local-only turn failures, all timeouts at v_f = 0 with d_C <= {max_dc} mm")
        } else {
            bad.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let suite = run_suite(&SuiteConfig::default()).expect("default suite runs");
    let elapsed = start.elapsed().as_secs_f64();

    let results = [
        ("success-rate pattern", success_pattern(&suite, elapsed)),
        ("convolution oracle", convolution_oracle()),
        ("table exhaustion and gating", lut_gating()),
        ("yaw codomain", yaw_codomain()),
        ("sensor analytic check", sensor_checks()),
        ("kinematics oracle", kinematics_oracle()),
        ("determinism", determinism()),
        ("local-only stall", local_stall(&suite)),
    ];

    println!();
    let mut failed = 0;
    for (i, (name, v)) in results.iter().enumerate() {
        if !v.pass {
            failed += 1;
        }
        println!("acceptance {} {:<28} {}  {}", i + 1, name, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
