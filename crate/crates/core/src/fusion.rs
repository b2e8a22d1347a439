//! Fusion of the global steering class with the local depth zone through a
//! lookup table, and the distance-stepped forward speed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::depth::{extract_percept, smooth_depth, DepthFrame, GaussianKernel, LocalPercept, Zone};
use crate::error::{Error, Result};
use crate::global::{
    cnn_speed, cnn_yaw, discretize_steering, forced_percept, GlobalPercept, SteeringClass,
};

/// The five yaw outputs a table cell may hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YawLevel {
    Zero,
    HalfLeft,
    FullLeft,
    HalfRight,
    FullRight,
}

impl YawLevel {
    pub const ALL: [YawLevel; 5] =
        [YawLevel::Zero, YawLevel::HalfLeft, YawLevel::FullLeft, YawLevel::HalfRight, YawLevel::FullRight];

    /// Signed yaw rate in deg/s for a maximum target rate `yaw_t`.
    pub fn rate(self, yaw_t: f64) -> f64 {
        match self {
            YawLevel::Zero => 0.0,
            YawLevel::HalfLeft => yaw_t / 2.0,
            YawLevel::FullLeft => yaw_t,
            YawLevel::HalfRight => -yaw_t / 2.0,
            YawLevel::FullRight => -yaw_t,
        }
    }

    pub fn mirrored(self) -> Self {
        match self {
            YawLevel::Zero => YawLevel::Zero,
            YawLevel::HalfLeft => YawLevel::HalfRight,
            YawLevel::FullLeft => YawLevel::FullRight,
            YawLevel::HalfRight => YawLevel::HalfLeft,
            YawLevel::FullRight => YawLevel::FullLeft,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            YawLevel::Zero => "zero",
            YawLevel::HalfLeft => "half_left",
            YawLevel::FullLeft => "full_left",
            YawLevel::HalfRight => "half_right",
            YawLevel::FullRight => "full_right",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LutEntry {
    pub agree: bool,
    pub yaw: YawLevel,
}

/// One row of a table override in the config file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LutRow {
    pub steering: SteeringClass,
    pub zone: Zone,
    pub agree: bool,
    pub yaw: YawLevel,
}

/// Total map from (steering class, depth zone) to (agreement, yaw level).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<LutRow>", into = "Vec<LutRow>")]
pub struct FusionTable {
    entries: [[LutEntry; 3]; 3],
}

fn class_index(sc: SteeringClass) -> usize {
    match sc {
        SteeringClass::Left => 0,
        SteeringClass::Straight => 1,
        SteeringClass::Right => 2,
    }
}

fn zone_index(z: Zone) -> usize {
    match z {
        Zone::LeftTurn => 0,
        Zone::NoTurn => 1,
        Zone::RightTurn => 2,
    }
}

/// The two cells where the sources point in opposite directions.
pub fn is_conflict(sc: SteeringClass, zone: Zone) -> bool {
    matches!(
        (sc, zone),
        (SteeringClass::Left, Zone::RightTurn) | (SteeringClass::Right, Zone::LeftTurn)
    )
}

impl FusionTable {
    /// Agreement on a turn gives the full rate, a single turning source gives
    /// half the rate in its direction, conflicts stop and hold heading.
    pub fn standard() -> Self {
        use SteeringClass as S;
        use YawLevel as Y;
        let mut rows = Vec::with_capacity(9);
        for sc in S::ALL {
            for zone in Zone::ALL {
                let yaw = match (sc, zone) {
                    (S::Left, Zone::LeftTurn) => Y::FullLeft,
                    (S::Right, Zone::RightTurn) => Y::FullRight,
                    (S::Left, Zone::NoTurn) | (S::Straight, Zone::LeftTurn) => Y::HalfLeft,
                    (S::Right, Zone::NoTurn) | (S::Straight, Zone::RightTurn) => Y::HalfRight,
                    _ => Y::Zero,
                };
                rows.push(LutRow { steering: sc, zone, agree: !is_conflict(sc, zone), yaw });
            }
        }
        Self::from_rows(&rows).expect("standard table is valid")
    }

    /// Requires all nine cells exactly once, with agreement cleared on the
    /// two conflict cells and nowhere else.
    pub fn from_rows(rows: &[LutRow]) -> Result<Self> {
        let mut seen = [[None::<LutEntry>; 3]; 3];
        for row in rows {
            let slot = &mut seen[class_index(row.steering)][zone_index(row.zone)];
            if slot.is_some() {
                return Err(Error::InvalidTable(format!(
                    "duplicate cell ({}, {})",
                    row.steering, row.zone
                )));
            }
            if row.agree == is_conflict(row.steering, row.zone) {
                return Err(Error::InvalidTable(format!(
                    "cell ({}, {}) must have agree = {}",
                    row.steering,
                    row.zone,
                    !row.agree
                )));
            }
            *slot = Some(LutEntry { agree: row.agree, yaw: row.yaw });
        }
        let mut entries = [[LutEntry { agree: true, yaw: YawLevel::Zero }; 3]; 3];
        for sc in SteeringClass::ALL {
            for zone in Zone::ALL {
                entries[class_index(sc)][zone_index(zone)] = seen[class_index(sc)]
                    [zone_index(zone)]
                .ok_or_else(|| Error::InvalidTable(format!("missing cell ({sc}, {zone})")))?;
            }
        }
        Ok(Self { entries })
    }

    pub fn lookup(&self, sc: SteeringClass, zone: Zone) -> LutEntry {
        self.entries[class_index(sc)][zone_index(zone)]
    }

    /// All nine cells in (class, zone) order.
    pub fn rows(&self) -> Vec<LutRow> {
        let mut out = Vec::with_capacity(9);
        for sc in SteeringClass::ALL {
            for zone in Zone::ALL {
                let e = self.lookup(sc, zone);
                out.push(LutRow { steering: sc, zone, agree: e.agree, yaw: e.yaw });
            }
        }
        out
    }
}

impl Default for FusionTable {
    fn default() -> Self {
        Self::standard()
    }
}

impl TryFrom<Vec<LutRow>> for FusionTable {
    type Error = Error;
    fn try_from(rows: Vec<LutRow>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<FusionTable> for Vec<LutRow> {
    fn from(t: FusionTable) -> Self {
        t.rows()
    }
}

impl fmt::Display for FusionTable {
    /// One `steering,zone,agree,yaw` line per cell; conflicts carry an `S`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.rows() {
            write!(f, "{},{},{},{}", row.steering, row.zone, row.agree as u8, row.yaw.as_str())?;
            if is_conflict(row.steering, row.zone) {
                write!(f, ",S")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedStep {
    /// Inclusive lower bound on the central distance, mm.
    pub min_mm: f32,
    /// Fraction of the target speed.
    pub fraction: f64,
}

/// Step function from central distance to a fraction of the target speed.
/// Distances below the lowest bound map to 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SpeedStep>", into = "Vec<SpeedStep>")]
pub struct SpeedSchedule {
    /// Sorted by descending `min_mm`.
    steps: Vec<SpeedStep>,
}

impl SpeedSchedule {
    pub fn new(mut steps: Vec<SpeedStep>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidSchedule("needs at least one step".into()));
        }
        for s in &steps {
            if !s.min_mm.is_finite() || !(0.0..=1.0).contains(&s.fraction) {
                return Err(Error::InvalidSchedule(format!(
                    "step {} mm -> {} is out of range",
                    s.min_mm, s.fraction
                )));
            }
        }
        steps.sort_by(|a, b| b.min_mm.total_cmp(&a.min_mm));
        for w in steps.windows(2) {
            if w[0].min_mm == w[1].min_mm {
                return Err(Error::InvalidSchedule(format!("duplicate bound {} mm", w[0].min_mm)));
            }
            if w[0].fraction < w[1].fraction {
                return Err(Error::InvalidSchedule(format!(
                    "not monotone: {} mm -> {} but {} mm -> {}",
                    w[1].min_mm, w[1].fraction, w[0].min_mm, w[0].fraction
                )));
            }
        }
        Ok(Self { steps })
    }

    /// ≥ 2 m full speed, ≥ 1 m half, ≥ 0.5 m quarter, stop below.
    pub fn standard() -> Self {
        Self::new(vec![
            SpeedStep { min_mm: 2000.0, fraction: 1.0 },
            SpeedStep { min_mm: 1000.0, fraction: 0.5 },
            SpeedStep { min_mm: 500.0, fraction: 0.25 },
        ])
        .expect("standard schedule is valid")
    }

    pub fn fraction(&self, d_c: f32) -> f64 {
        self.steps.iter().find(|s| d_c >= s.min_mm).map_or(0.0, |s| s.fraction)
    }

    pub fn steps(&self) -> &[SpeedStep] {
        &self.steps
    }
}

impl Default for SpeedSchedule {
    fn default() -> Self {
        Self::standard()
    }
}

impl TryFrom<Vec<SpeedStep>> for SpeedSchedule {
    type Error = Error;
    fn try_from(steps: Vec<SpeedStep>) -> Result<Self> {
        Self::new(steps)
    }
}

impl From<SpeedSchedule> for Vec<SpeedStep> {
    fn from(s: SpeedSchedule) -> Self {
        s.steps
    }
}

/// Command sent to the vehicle: agreement bit, yaw rate (deg/s, positive =
/// left) and forward speed (m/s).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionCommand {
    pub agree: bool,
    pub yaw_rate: f64,
    pub v_f: f64,
}

/// Table lookup; returns the agreement bit and the yaw rate in deg/s.
pub fn fuse(table: &FusionTable, sc: SteeringClass, lp: &LocalPercept, yaw_t: f64) -> (bool, f64) {
    let e = table.lookup(sc, lp.zone);
    (e.agree, e.yaw.rate(yaw_t))
}

pub fn speed_command(agree: bool, d_c: f32, schedule: &SpeedSchedule, v_t: f64) -> f64 {
    if agree {
        v_t * schedule.fraction(d_c)
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    #[serde(alias = "global_only")]
    Global,
    #[serde(alias = "local_only")]
    Local,
    Fused,
}

impl PipelineMode {
    pub const ALL: [PipelineMode; 3] = [PipelineMode::Global, PipelineMode::Local, PipelineMode::Fused];

    pub fn as_str(self) -> &'static str {
        match self {
            PipelineMode::Global => "global",
            PipelineMode::Local => "local",
            PipelineMode::Fused => "fused",
        }
    }

    /// Whether the yaw rate comes from the lookup table.
    pub fn uses_table(self) -> bool {
        !matches!(self, PipelineMode::Global)
    }
}

impl fmt::Display for PipelineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PipelineMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "global" | "global_only" => Ok(PipelineMode::Global),
            "local" | "local_only" => Ok(PipelineMode::Local),
            "fused" | "global+local" => Ok(PipelineMode::Fused),
            _ => Err(Error::UnknownMode(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineParams {
    /// Target forward speed, m/s.
    pub v_t: f64,
    /// Maximum target yaw rate, deg/s.
    pub yaw_t: f64,
    pub eta: f64,
    pub kernel: GaussianKernel,
    pub table: FusionTable,
    pub schedule: SpeedSchedule,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            v_t: 1.5,
            yaw_t: 60.0,
            eta: 0.1,
            kernel: GaussianKernel::default(),
            table: FusionTable::standard(),
            schedule: SpeedSchedule::standard(),
        }
    }
}

/// Everything one control tick produced, for telemetry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepTrace {
    pub command: FusionCommand,
    pub local: LocalPercept,
    /// The global signal the mode actually consumed.
    pub global: GlobalPercept,
}

/// One control tick. The local percept is always computed for telemetry, but
/// only the table modes act on it.
pub fn pipeline_trace(
    mode: PipelineMode,
    frame: &DepthFrame,
    g: &GlobalPercept,
    params: &PipelineParams,
) -> StepTrace {
    let local = extract_percept(&smooth_depth(frame, &params.kernel), frame);
    match mode {
        PipelineMode::Global => StepTrace {
            command: FusionCommand {
                agree: true,
                yaw_rate: cnn_yaw(g, params.yaw_t),
                v_f: cnn_speed(g, params.v_t),
            },
            local,
            global: *g,
        },
        PipelineMode::Local | PipelineMode::Fused => {
            let global = if mode == PipelineMode::Local { forced_percept() } else { *g };
            let sc = discretize_steering(&global, params.eta);
            let (agree, yaw_rate) = fuse(&params.table, sc, &local, params.yaw_t);
            let v_f = speed_command(agree, local.d_c, &params.schedule, params.v_t);
            StepTrace { command: FusionCommand { agree, yaw_rate, v_f }, local, global }
        }
    }
}

pub fn pipeline_step(
    mode: PipelineMode,
    frame: &DepthFrame,
    g: &GlobalPercept,
    params: &PipelineParams,
) -> FusionCommand {
    pipeline_trace(mode, frame, g, params).command
}
