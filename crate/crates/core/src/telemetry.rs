//! Per-trial telemetry CSV and its replay check.
//!
//! A file starts with `#` header lines carrying the run parameters and the
//! effective fusion table, followed by one CSV row per recorded tick. Replay
//! re-derives every command from the recorded percepts and re-integrates the
//! pose between consecutive ticks.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::depth::{Zone, GRID, RANGE_MAX_MM, RANGE_MIN_MM};
use crate::error::{Error, Result};
use crate::fusion::{
    speed_command, FusionCommand, FusionTable, LutRow, PipelineMode, SpeedSchedule, SpeedStep,
    YawLevel,
};
use crate::geometry::normalize_angle;
use crate::global::{discretize_steering, GlobalPercept, SteeringClass};
use crate::harness::{Outcome, SimParams, TelemetryRow, TrialRecord};
use crate::sim::{step_dynamics, DronePose, ScenarioId};

pub const TELEMETRY_MAGIC: &str = "# navfuse telemetry v1";
pub const TELEMETRY_COLUMNS: &str = "tick,x,y,heading,agree,yaw_rate,v_f,d_C,x_dmax,theta_cnn";

/// Pose re-integration tolerance (m, rad).
pub const KINEMATIC_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct TelemetryHeader {
    pub scenario: ScenarioId,
    pub mode: PipelineMode,
    pub seed: u64,
    pub outcome: Outcome,
    pub v_t: f64,
    pub yaw_t: f64,
    pub eta: f64,
    pub dt: f64,
    pub t_max: f64,
    pub table: FusionTable,
    pub schedule: SpeedSchedule,
}

impl TelemetryHeader {
    pub fn new(record: &TrialRecord, params: &SimParams) -> Self {
        Self {
            scenario: record.scenario,
            mode: record.mode,
            seed: record.seed,
            outcome: record.outcome,
            v_t: params.pipeline.v_t,
            yaw_t: params.pipeline.yaw_t,
            eta: params.pipeline.eta,
            dt: params.tof.period(),
            t_max: params.t_max,
            table: params.pipeline.table.clone(),
            schedule: params.pipeline.schedule.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Telemetry {
    pub header: TelemetryHeader,
    /// Rows with the 1-based line they were read from.
    pub rows: Vec<(usize, TelemetryRow)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReplaySummary {
    pub rows: usize,
    /// Row pairs one tick apart whose poses were re-integrated.
    pub kinematic_checks: usize,
}

pub fn write_telemetry(record: &TrialRecord, params: &SimParams) -> String {
    render(&TelemetryHeader::new(record, params), &record.trajectory)
}

pub fn render(h: &TelemetryHeader, rows: &[TelemetryRow]) -> String {
    let mut out = String::new();
    out.push_str(TELEMETRY_MAGIC);
    out.push('\n');
    let _ = writeln!(out, "# scenario={}", h.scenario);
    let _ = writeln!(out, "# mode={}", h.mode);
    let _ = writeln!(out, "# seed={}", h.seed);
    let _ = writeln!(out, "# outcome={}", h.outcome.as_str());
    let _ = writeln!(out, "# v_t={}", h.v_t);
    let _ = writeln!(out, "# yaw_t={}", h.yaw_t);
    let _ = writeln!(out, "# eta={}", h.eta);
    let _ = writeln!(out, "# dt={}", h.dt);
    let _ = writeln!(out, "# t_max={}", h.t_max);
    for line in h.table.to_string().lines() {
        let _ = writeln!(out, "# lut={line}");
    }
    let steps: Vec<String> =
        h.schedule.steps().iter().map(|s| format!("{}:{}", s.min_mm, s.fraction)).collect();
    let _ = writeln!(out, "# schedule={}", steps.join(","));
    out.push_str(TELEMETRY_COLUMNS);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.tick,
            r.pose.x,
            r.pose.y,
            r.pose.heading,
            r.command.agree as u8,
            r.command.yaw_rate,
            r.command.v_f,
            r.d_c,
            r.x_dmax,
            r.theta_cnn
        );
    }
    out
}

fn err(line: usize, reason: impl Into<String>) -> Error {
    Error::Telemetry { line, reason: reason.into() }
}

fn num<T: FromStr>(line: usize, name: &str, s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| err(line, format!("bad {name} `{s}`")))
}

fn by_name<T: Copy>(line: usize, what: &str, s: &str, all: &[T], name: fn(T) -> &'static str) -> Result<T> {
    all.iter().copied().find(|&v| name(v) == s).ok_or_else(|| err(line, format!("unknown {what} `{s}`")))
}

fn parse_outcome(line: usize, s: &str) -> Result<Outcome> {
    by_name(line, "outcome", s, &[Outcome::Success, Outcome::Collision, Outcome::Timeout], Outcome::as_str)
}

fn parse_lut_row(line: usize, s: &str) -> Result<LutRow> {
    let f: Vec<&str> = s.split(',').collect();
    if !(f.len() == 4 || (f.len() == 5 && f[4] == "S")) {
        return Err(err(line, format!("malformed table row `{s}`")));
    }
    let agree = match f[2] {
        "0" => false,
        "1" => true,
        other => return Err(err(line, format!("bad agree `{other}`"))),
    };
    Ok(LutRow {
        steering: by_name(line, "steering class", f[0], &SteeringClass::ALL, SteeringClass::as_str)?,
        zone: by_name(line, "zone", f[1], &Zone::ALL, Zone::as_str)?,
        agree,
        yaw: by_name(line, "yaw level", f[3], &YawLevel::ALL, YawLevel::as_str)?,
    })
}

fn parse_schedule(line: usize, s: &str) -> Result<SpeedSchedule> {
    let steps = s
        .split(',')
        .map(|part| {
            let (lo, frac) = part.split_once(':').ok_or_else(|| err(line, format!("bad step `{part}`")))?;
            Ok(SpeedStep { min_mm: num(line, "step bound", lo)?, fraction: num(line, "step fraction", frac)? })
        })
        .collect::<Result<Vec<_>>>()?;
    SpeedSchedule::new(steps).map_err(|e| err(line, e.to_string()))
}

fn parse_row(line: usize, s: &str) -> Result<TelemetryRow> {
    let f: Vec<&str> = s.split(',').collect();
    if f.len() != 10 {
        return Err(err(line, format!("expected 10 fields, found {}", f.len())));
    }
    let agree = match f[4] {
        "0" => false,
        "1" => true,
        other => return Err(err(line, format!("bad agree `{other}`"))),
    };
    let row = TelemetryRow {
        tick: num(line, "tick", f[0])?,
        pose: DronePose::new(num(line, "x", f[1])?, num(line, "y", f[2])?, num(line, "heading", f[3])?),
        command: FusionCommand {
            agree,
            yaw_rate: num(line, "yaw_rate", f[5])?,
            v_f: num(line, "v_f", f[6])?,
        },
        d_c: num(line, "d_C", f[7])?,
        x_dmax: num(line, "x_dmax", f[8])?,
        theta_cnn: num(line, "theta_cnn", f[9])?,
    };
    let floats = [row.pose.x, row.pose.y, row.pose.heading, row.command.yaw_rate, row.command.v_f, row.theta_cnn];
    if floats.iter().any(|v| !v.is_finite()) || !row.d_c.is_finite() {
        return Err(err(line, "non-finite value"));
    }
    Ok(row)
}

pub fn parse_telemetry(text: &str) -> Result<Telemetry> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l == TELEMETRY_MAGIC => {}
        _ => return Err(err(1, format!("missing `{TELEMETRY_MAGIC}` header"))),
    }

    let mut scenario = None;
    let mut mode = None;
    let mut seed = None;
    let mut outcome = None;
    let mut v_t = None;
    let mut yaw_t = None;
    let mut eta = None;
    let mut dt = None;
    let mut t_max = None;
    let mut lut = Vec::new();
    let mut lut_line = 0;
    let mut schedule = None;
    let mut columns_line = None;

    for (n, l) in lines.by_ref() {
        let Some(meta) = l.strip_prefix("# ") else {
            if l != TELEMETRY_COLUMNS {
                return Err(err(n, format!("expected column header `{TELEMETRY_COLUMNS}`")));
            }
            columns_line = Some(n);
            break;
        };
        let (key, value) = meta.split_once('=').ok_or_else(|| err(n, "header line without `=`"))?;
        match key {
            "scenario" => scenario = Some(value.parse::<ScenarioId>().map_err(|e| err(n, e.to_string()))?),
            "mode" => mode = Some(value.parse::<PipelineMode>().map_err(|e| err(n, e.to_string()))?),
            "seed" => seed = Some(num::<u64>(n, key, value)?),
            "outcome" => outcome = Some(parse_outcome(n, value)?),
            "v_t" => v_t = Some(num::<f64>(n, key, value)?),
            "yaw_t" => yaw_t = Some(num::<f64>(n, key, value)?),
            "eta" => eta = Some(num::<f64>(n, key, value)?),
            "dt" => dt = Some(num::<f64>(n, key, value)?),
            "t_max" => t_max = Some(num::<f64>(n, key, value)?),
            "lut" => {
                lut.push(parse_lut_row(n, value)?);
                lut_line = n;
            }
            "schedule" => schedule = Some(parse_schedule(n, value)?),
            other => return Err(err(n, format!("unknown header key `{other}`"))),
        }
    }
    let columns_line = columns_line.ok_or_else(|| err(text.lines().count(), "no column header"))?;
    let missing = |what: &str| err(columns_line, format!("header lacks `{what}`"));
    let table = FusionTable::from_rows(&lut).map_err(|e| err(lut_line.max(1), e.to_string()))?;
    let header = TelemetryHeader {
        scenario: scenario.ok_or_else(|| missing("scenario"))?,
        mode: mode.ok_or_else(|| missing("mode"))?,
        seed: seed.ok_or_else(|| missing("seed"))?,
        outcome: outcome.ok_or_else(|| missing("outcome"))?,
        v_t: v_t.ok_or_else(|| missing("v_t"))?,
        yaw_t: yaw_t.ok_or_else(|| missing("yaw_t"))?,
        eta: eta.ok_or_else(|| missing("eta"))?,
        dt: dt.ok_or_else(|| missing("dt"))?,
        t_max: t_max.ok_or_else(|| missing("t_max"))?,
        table,
        schedule: schedule.ok_or_else(|| missing("schedule"))?,
    };
    if !(header.v_t > 0.0 && header.yaw_t > 0.0 && header.dt > 0.0 && header.eta > 0.0 && header.eta < 1.0) {
        return Err(err(columns_line, "header parameters out of range"));
    }

    let rows = lines.map(|(n, l)| parse_row(n, l).map(|r| (n, r))).collect::<Result<Vec<_>>>()?;
    Ok(Telemetry { header, rows })
}

/// Checks one recorded command against the pipeline that should have
/// produced it.
fn check_command(h: &TelemetryHeader, line: usize, r: &TelemetryRow) -> Result<()> {
    let c = &r.command;
    if usize::from(r.x_dmax) >= GRID {
        return Err(err(line, format!("x_dmax {} outside 0..=7", r.x_dmax)));
    }
    if !(f32::from(RANGE_MIN_MM)..=f32::from(RANGE_MAX_MM)).contains(&r.d_c) {
        return Err(err(line, format!("d_C {} outside sensor range", r.d_c)));
    }
    if !(-1.0..=1.0).contains(&r.theta_cnn) {
        return Err(err(line, format!("theta_cnn {} outside [-1, 1]", r.theta_cnn)));
    }
    if !(-std::f64::consts::PI < r.pose.heading && r.pose.heading <= std::f64::consts::PI) {
        return Err(err(line, format!("heading {} not normalized", r.pose.heading)));
    }
    if !c.agree && c.v_f != 0.0 {
        return Err(err(line, format!("agree = 0 but v_f = {}", c.v_f)));
    }

    match h.mode {
        PipelineMode::Global => {
            if !c.agree {
                return Err(err(line, "global-only command must have agree = 1"));
            }
            let expected = r.theta_cnn * h.yaw_t;
            if (c.yaw_rate - expected).abs() > 1e-9 {
                return Err(err(line, format!("yaw_rate {} but steering implies {expected}", c.yaw_rate)));
            }
            if !(0.0..=h.v_t).contains(&c.v_f) {
                return Err(err(line, format!("v_f {} outside [0, {}]", c.v_f, h.v_t)));
            }
        }
        PipelineMode::Local | PipelineMode::Fused => {
            if h.mode == PipelineMode::Local && r.theta_cnn != 0.0 {
                return Err(err(line, "local-only row must carry the forced steering signal"));
            }
            let sc = discretize_steering(&GlobalPercept::new(r.theta_cnn, 0.0), h.eta);
            let zone = Zone::from_column(r.x_dmax);
            let entry = h.table.lookup(sc, zone);
            if c.agree != entry.agree {
                return Err(err(line, format!("agree = {} but table cell ({sc}, {zone}) says {}", c.agree as u8, entry.agree as u8)));
            }
            let yaw = entry.yaw.rate(h.yaw_t);
            if c.yaw_rate != yaw {
                return Err(err(line, format!("yaw_rate {} but table cell ({sc}, {zone}) gives {yaw}", c.yaw_rate)));
            }
            let v = speed_command(entry.agree, r.d_c, &h.schedule, h.v_t);
            if c.v_f != v {
                return Err(err(line, format!("v_f {} but schedule gives {v} at d_C = {}", c.v_f, r.d_c)));
            }
        }
    }
    Ok(())
}

/// Validates every row; the first violation is reported with its line.
pub fn validate(t: &Telemetry) -> Result<ReplaySummary> {
    let h = &t.header;
    let mut kinematic_checks = 0;
    for (i, (line, r)) in t.rows.iter().enumerate() {
        check_command(h, *line, r)?;
        if i == 0 {
            continue;
        }
        let (_, prev) = &t.rows[i - 1];
        if r.tick <= prev.tick {
            return Err(err(*line, format!("tick {} does not follow {}", r.tick, prev.tick)));
        }
        if r.tick == prev.tick + 1 {
            let expect = step_dynamics(&prev.pose, &prev.command, h.dt);
            let dx = (expect.x - r.pose.x).abs();
            let dy = (expect.y - r.pose.y).abs();
            let dh = normalize_angle(expect.heading - r.pose.heading).abs();
            if dx > KINEMATIC_TOL || dy > KINEMATIC_TOL || dh > KINEMATIC_TOL {
                return Err(err(
                    *line,
                    format!(
                        "pose ({}, {}, {}) does not follow from the previous command, expected ({}, {}, {})",
                        r.pose.x, r.pose.y, r.pose.heading, expect.x, expect.y, expect.heading
                    ),
                ));
            }
            kinematic_checks += 1;
        }
    }
    Ok(ReplaySummary { rows: t.rows.len(), kinematic_checks })
}

pub fn replay(text: &str) -> Result<ReplaySummary> {
    validate(&parse_telemetry(text)?)
}
