//! C ABI for navfuse.
//!
//! Every entry point returns a [`NavfuseStatus`]; results come back through
//! out-pointers. Pipelines and worlds are opaque heap handles that the caller
//! releases with the matching `_free` function. After a failing call,
//! [`navfuse_last_error`] describes what went wrong on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use navfuse::config::load_config;
use navfuse::depth::{extract_percept, smooth_depth, DepthFrame, GaussianKernel, Zone, GRID};
use navfuse::fusion::{fuse, pipeline_step, speed_command, FusionTable, PipelineMode, SpeedSchedule};
use navfuse::global::{GlobalPercept, SteeringClass};
use navfuse::harness::{run_trial, Outcome, SimParams};
use navfuse::sim::{build_scenario, sense_tof, DronePose, ScenarioId, ScenarioParams, Section};
use navfuse::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const NAVFUSE_CELLS: usize = 64;
const _: () = assert!(NAVFUSE_CELLS == GRID * GRID);

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NavfuseStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidFrame = 3,
    Config = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NavfuseMode {
    Global = 0,
    Local = 1,
    Fused = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NavfuseSteering {
    Left = 0,
    Straight = 1,
    Right = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NavfuseZone {
    LeftTurn = 0,
    NoTurn = 1,
    RightTurn = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NavfuseOutcome {
    Success = 0,
    Collision = 1,
    Timeout = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NavfuseSection {
    None = 0,
    Straight = 1,
    Turn = 2,
}

/// Row-major 8×8 depth frame in mm; bit `r * 8 + c` of `valid_mask` marks a
/// valid cell.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct NavfuseFrame {
    pub cells: [u16; NAVFUSE_CELLS],
    pub valid_mask: u64,
    pub tick: u64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct NavfuseSmoothed {
    pub cells: [f32; NAVFUSE_CELLS],
    pub mac_count: u32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct NavfuseLocalPercept {
    pub x_dmax: u8,
    pub zone: NavfuseZone,
    pub d_c: f32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct NavfuseCommand {
    pub agree: bool,
    /// deg/s, positive = left.
    pub yaw_rate: f64,
    /// m/s.
    pub v_f: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct NavfusePose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub radius: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct NavfuseTrialResult {
    pub outcome: NavfuseOutcome,
    pub failed_section: NavfuseSection,
    pub ticks: u64,
    pub final_pose: NavfusePose,
}

/// Pipeline mode plus every parameter a trial needs.
pub struct NavfusePipeline {
    mode: PipelineMode,
    params: SimParams,
}

/// A scenario world.
pub struct NavfuseWorld {
    id: ScenarioId,
    world: navfuse::sim::World,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut buf = e.borrow_mut();
        buf.clear();
        buf.extend(msg.bytes().filter(|&b| b != 0));
        buf.push(0);
    });
}

fn fail(status: NavfuseStatus, msg: impl AsRef<str>) -> NavfuseStatus {
    set_error(msg.as_ref());
    status
}

fn status_of(e: &Error) -> NavfuseStatus {
    match e {
        Error::InvalidFrame(_) => NavfuseStatus::InvalidFrame,
        Error::Io { .. } => NavfuseStatus::Io,
        Error::Config { .. } | Error::Parse { .. } => NavfuseStatus::Config,
        _ => NavfuseStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), NavfuseStatus>) -> NavfuseStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NavfuseStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(NavfuseStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: navfuse::Result<T>) -> Result<T, NavfuseStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, NavfuseStatus> {
    p.as_ref().ok_or_else(|| fail(NavfuseStatus::NullPointer, format!("{what} is null")))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, NavfuseStatus> {
    p.as_mut().ok_or_else(|| fail(NavfuseStatus::NullPointer, format!("{what} is null")))
}

fn to_frame(f: &NavfuseFrame) -> Result<DepthFrame, NavfuseStatus> {
    lift(DepthFrame::from_slice(&f.cells, f.valid_mask, f.tick))
}

fn zone_out(z: Zone) -> NavfuseZone {
    match z {
        Zone::LeftTurn => NavfuseZone::LeftTurn,
        Zone::NoTurn => NavfuseZone::NoTurn,
        Zone::RightTurn => NavfuseZone::RightTurn,
    }
}

fn mode_in(mode: i32) -> Result<PipelineMode, NavfuseStatus> {
    match mode {
        0 => Ok(PipelineMode::Global),
        1 => Ok(PipelineMode::Local),
        2 => Ok(PipelineMode::Fused),
        _ => Err(fail(NavfuseStatus::InvalidArgument, format!("unknown mode {mode}"))),
    }
}

fn positive(name: &str, v: f64) -> Result<(), NavfuseStatus> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(fail(NavfuseStatus::InvalidArgument, format!("{name} must be > 0, got {v}")))
    }
}

/// Message for the last failing call on this thread, or an empty string.
/// The pointer stays valid until the next navfuse call on the same thread.
#[no_mangle]
pub extern "C" fn navfuse_last_error() -> *const c_char {
    LAST_ERROR.with(|e| {
        let mut buf = e.borrow_mut();
        if buf.is_empty() {
            buf.push(0);
        }
        buf.as_ptr().cast()
    })
}

#[no_mangle]
pub extern "C" fn navfuse_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// 5×5 Gaussian smoothing (σ = 1) with zero padding.
///
/// # Safety
/// `frame` and `out` must be null or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn navfuse_smooth(frame: *const NavfuseFrame, out: *mut NavfuseSmoothed) -> NavfuseStatus {
    guard(|| {
        let frame = to_frame(deref(frame, "frame")?)?;
        let out = deref_mut(out, "out")?;
        let sm = smooth_depth(&frame, &GaussianKernel::default());
        for (dst, src) in out.cells.iter_mut().zip(sm.cells.iter().flatten()) {
            *dst = *src;
        }
        out.mac_count = sm.mac_count;
        Ok(())
    })
}

/// Freest column, its zone and the central distance of a raw frame.
///
/// # Safety
/// `frame` and `out` must be null or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn navfuse_local_percept(
    frame: *const NavfuseFrame,
    out: *mut NavfuseLocalPercept,
) -> NavfuseStatus {
    guard(|| {
        let frame = to_frame(deref(frame, "frame")?)?;
        let out = deref_mut(out, "out")?;
        let lp = extract_percept(&smooth_depth(&frame, &GaussianKernel::default()), &frame);
        *out = NavfuseLocalPercept { x_dmax: lp.x_dmax, zone: zone_out(lp.zone), d_c: lp.d_c };
        Ok(())
    })
}

/// Standard fusion table lookup. `steering` is a [`NavfuseSteering`] value
/// and `zone` a [`NavfuseZone`] value.
///
/// # Safety
/// `agree` and `yaw_rate` must be null or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn navfuse_fuse(
    steering: i32,
    zone: i32,
    yaw_t: f64,
    agree: *mut bool,
    yaw_rate: *mut f64,
) -> NavfuseStatus {
    guard(|| {
        let sc = match steering {
            0 => SteeringClass::Left,
            1 => SteeringClass::Straight,
            2 => SteeringClass::Right,
            _ => return Err(fail(NavfuseStatus::InvalidArgument, format!("unknown steering class {steering}"))),
        };
        let zone = match zone {
            0 => Zone::LeftTurn,
            1 => Zone::NoTurn,
            2 => Zone::RightTurn,
            _ => return Err(fail(NavfuseStatus::InvalidArgument, format!("unknown zone {zone}"))),
        };
        positive("yaw_t", yaw_t)?;
        let agree = deref_mut(agree, "agree")?;
        let yaw_rate = deref_mut(yaw_rate, "yaw_rate")?;
        let x_dmax = match zone {
            Zone::LeftTurn => 0,
            Zone::NoTurn => 3,
            Zone::RightTurn => 7,
        };
        let lp = navfuse::depth::LocalPercept { x_dmax, zone, d_c: 4000.0 };
        (*agree, *yaw_rate) = fuse(&FusionTable::standard(), sc, &lp, yaw_t);
        Ok(())
    })
}

/// Gated forward speed from the standard distance schedule.
///
/// # Safety
/// `v_f` must be null or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn navfuse_speed(agree: bool, d_c: f32, v_t: f64, v_f: *mut f64) -> NavfuseStatus {
    guard(|| {
        positive("v_t", v_t)?;
        if !d_c.is_finite() {
            return Err(fail(NavfuseStatus::InvalidArgument, "d_c is not finite"));
        }
        *deref_mut(v_f, "v_f")? = speed_command(agree, d_c, &SpeedSchedule::standard(), v_t);
        Ok(())
    })
}

/// New pipeline with default parameters except the ones given.
///
/// # Safety
/// `out` must be null or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn navfuse_pipeline_new(
    mode: i32,
    v_t: f64,
    yaw_t: f64,
    eta: f64,
    out: *mut *mut NavfusePipeline,
) -> NavfuseStatus {
    guard(|| {
        let mode = mode_in(mode)?;
        positive("v_t", v_t)?;
        positive("yaw_t", yaw_t)?;
        if !(eta > 0.0 && eta < 1.0) {
            return Err(fail(NavfuseStatus::InvalidArgument, format!("eta must lie in (0, 1), got {eta}")));
        }
        let out = deref_mut(out, "out")?;
        let mut params = SimParams::default();
        params.pipeline.v_t = v_t;
        params.pipeline.yaw_t = yaw_t;
        params.pipeline.eta = eta;
        *out = Box::into_raw(Box::new(NavfusePipeline { mode, params }));
        Ok(())
    })
}

/// Pipeline built from a TOML run configuration file.
///
/// # Safety
/// `path` must be null or a NUL-terminated string; `out` must be null or a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn navfuse_pipeline_from_config(
    path: *const c_char,
    out: *mut *mut NavfusePipeline,
) -> NavfuseStatus {
    guard(|| {
        if path.is_null() {
            return Err(fail(NavfuseStatus::NullPointer, "path is null"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| fail(NavfuseStatus::InvalidArgument, "path is not UTF-8"))?;
        let out = deref_mut(out, "out")?;
        let cfg = lift(load_config(Path::new(path)))?;
        let params = lift(cfg.sim_params())?;
        *out = Box::into_raw(Box::new(NavfusePipeline { mode: cfg.mode, params }));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from a `navfuse_pipeline_*` constructor that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn navfuse_pipeline_free(p: *mut NavfusePipeline) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// One control tick from a depth frame and the global steering signal.
///
/// # Safety
/// All pointers must be null or valid; `p` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn navfuse_pipeline_step(
    p: *const NavfusePipeline,
    frame: *const NavfuseFrame,
    theta_cnn: f64,
    p_col: f64,
    out: *mut NavfuseCommand,
) -> NavfuseStatus {
    guard(|| {
        let p = deref(p, "pipeline")?;
        let frame = to_frame(deref(frame, "frame")?)?;
        let out = deref_mut(out, "out")?;
        let g = GlobalPercept::new(theta_cnn, p_col);
        let c = pipeline_step(p.mode, &frame, &g, &p.params.pipeline);
        *out = NavfuseCommand { agree: c.agree, yaw_rate: c.yaw_rate, v_f: c.v_f };
        Ok(())
    })
}

/// Built-in scenario 1, 2 or 3 with default geometry.
///
/// # Safety
/// `out` must be null or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn navfuse_world_new(scenario: u32, out: *mut *mut NavfuseWorld) -> NavfuseStatus {
    guard(|| {
        let id = match scenario {
            1 => ScenarioId::S1,
            2 => ScenarioId::S2,
            3 => ScenarioId::S3,
            _ => return Err(fail(NavfuseStatus::InvalidArgument, format!("unknown scenario {scenario}"))),
        };
        let out = deref_mut(out, "out")?;
        let world = lift(build_scenario(id, &ScenarioParams::default()))?;
        *out = Box::into_raw(Box::new(NavfuseWorld { id, world }));
        Ok(())
    })
}

/// # Safety
/// `w` must be null or a handle from [`navfuse_world_new`] that has not been
/// freed.
#[no_mangle]
pub unsafe extern "C" fn navfuse_world_free(w: *mut NavfuseWorld) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Start pose of the world.
///
/// # Safety
/// `w` must be a live handle; `out` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn navfuse_world_start(w: *const NavfuseWorld, out: *mut NavfusePose) -> NavfuseStatus {
    guard(|| {
        let w = deref(w, "world")?;
        *deref_mut(out, "out")? = pose_out(&w.world.start_pose);
        Ok(())
    })
}

/// Simulated ToF frame at `pose`; the noise stream is seeded by `seed`.
///
/// # Safety
/// All pointers must be null or valid; `w` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn navfuse_world_sense(
    w: *const NavfuseWorld,
    pose: *const NavfusePose,
    noise_sigma_mm: f64,
    seed: u64,
    tick: u64,
    out: *mut NavfuseFrame,
) -> NavfuseStatus {
    guard(|| {
        let w = deref(w, "world")?;
        let pose = deref(pose, "pose")?;
        let out = deref_mut(out, "out")?;
        if !(noise_sigma_mm.is_finite() && noise_sigma_mm >= 0.0) {
            return Err(fail(NavfuseStatus::InvalidArgument, "noise_sigma_mm must be >= 0"));
        }
        let model = navfuse::sim::TofModel { noise_sigma_mm, ..Default::default() };
        let pose = DronePose { x: pose.x, y: pose.y, heading: pose.heading, radius: pose.radius };
        let frame = sense_tof(&w.world, &pose, &model, tick, &mut ChaCha8Rng::seed_from_u64(seed));
        for (dst, src) in out.cells.iter_mut().zip(frame.cells().iter().flatten()) {
            *dst = *src;
        }
        out.valid_mask = frame.validity_mask();
        out.tick = frame.tick();
        Ok(())
    })
}

fn pose_out(p: &DronePose) -> NavfusePose {
    NavfusePose { x: p.x, y: p.y, heading: p.heading, radius: p.radius }
}

/// Flies one full trial and reports its outcome.
///
/// # Safety
/// All pointers must be null or valid; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn navfuse_run_trial(
    w: *const NavfuseWorld,
    p: *const NavfusePipeline,
    seed: u64,
    out: *mut NavfuseTrialResult,
) -> NavfuseStatus {
    guard(|| {
        let w = deref(w, "world")?;
        let p = deref(p, "pipeline")?;
        let out = deref_mut(out, "out")?;
        let rec = run_trial(&w.world, w.id, p.mode, seed, &p.params);
        *out = NavfuseTrialResult {
            outcome: match rec.outcome {
                Outcome::Success => NavfuseOutcome::Success,
                Outcome::Collision => NavfuseOutcome::Collision,
                Outcome::Timeout => NavfuseOutcome::Timeout,
            },
            failed_section: match rec.failed_section {
                None => NavfuseSection::None,
                Some(Section::Straight) => NavfuseSection::Straight,
                Some(Section::Turn) => NavfuseSection::Turn,
            },
            ticks: rec.ticks,
            final_pose: pose_out(&rec.final_pose),
        };
        Ok(())
    })
}
