//! Seeded trial runner, suite aggregation and the success-rate report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::depth::LocalPercept;
use crate::error::{Error, Result};
use crate::fusion::{pipeline_trace, FusionCommand, PipelineMode, PipelineParams};
use crate::global::{forced_percept, oracle_percept, OracleParams};
use crate::sim::{
    build_scenario, check_status, check_transition, sense_tof, step_dynamics, DronePose,
    ScenarioId, ScenarioParams, Section, Status, TofModel, World,
};

/// Everything a trial needs besides the world, mode and seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SimParams {
    pub pipeline: PipelineParams,
    pub oracle: OracleParams,
    pub tof: TofModel,
    /// Timeout, s.
    pub t_max: f64,
    /// Record every n-th tick (the final tick is always kept).
    pub telemetry_stride: u32,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            pipeline: PipelineParams::default(),
            oracle: OracleParams::default(),
            tof: TofModel::default(),
            t_max: 120.0,
            telemetry_stride: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Success,
    Collision,
    Timeout,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Collision => "collision",
            Outcome::Timeout => "timeout",
        }
    }
}

/// One control tick: the pose the command was computed at, the command, and
/// the perception values behind it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TelemetryRow {
    pub tick: u64,
    pub pose: DronePose,
    pub command: FusionCommand,
    pub d_c: f32,
    pub x_dmax: u8,
    pub theta_cnn: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub scenario: ScenarioId,
    pub mode: PipelineMode,
    pub seed: u64,
    pub outcome: Outcome,
    /// Absent on success.
    pub failed_section: Option<Section>,
    /// The drone entered the turn region at some point.
    pub completed_straight: bool,
    pub ticks: u64,
    pub final_pose: DronePose,
    pub trajectory: Vec<TelemetryRow>,
}

impl TrialRecord {
    /// The last command issued before the trial ended.
    pub fn terminal_row(&self) -> Option<&TelemetryRow> {
        self.trajectory.last()
    }
}

/// Flies one trial at the sensor rate: sense, perceive, fuse, step, check.
pub fn run_trial(
    world: &World,
    scenario: ScenarioId,
    mode: PipelineMode,
    seed: u64,
    params: &SimParams,
) -> TrialRecord {
    let dt = params.tof.period();
    let stride = u64::from(params.telemetry_stride.max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pose = world.start_pose;
    let mut tick = 0u64;
    let mut completed_straight = world.section_at(pose.position()) == Section::Turn;
    let mut trajectory = Vec::new();
    let mut pending: Option<TelemetryRow> = None;
    let mut status = check_status(world, &pose, tick, dt, params.t_max);

    while status == Status::Running {
        let frame = sense_tof(world, &pose, &params.tof, tick, &mut rng);
        let g = match mode {
            PipelineMode::Local => forced_percept(),
            _ => oracle_percept(&pose, &world.lane, &params.oracle),
        };
        let trace = pipeline_trace(mode, &frame, &g, &params.pipeline);
        let row = telemetry_row(tick, &pose, &trace.command, &trace.local, trace.global.theta_cnn);
        if tick % stride == 0 {
            trajectory.push(row);
            pending = None;
        } else {
            pending = Some(row);
        }

        let next = step_dynamics(&pose, &trace.command, dt);
        tick += 1;
        status = check_transition(world, &pose, &next, tick, dt, params.t_max);
        pose = next;
        if world.section_at(pose.position()) == Section::Turn {
            completed_straight = true;
        }
    }
    trajectory.extend(pending);

    let outcome = match status {
        Status::Success => Outcome::Success,
        Status::Collision => Outcome::Collision,
        Status::Timeout => Outcome::Timeout,
        Status::Running => unreachable!("loop exits on a terminal status"),
    };
    let failed_section = match outcome {
        Outcome::Success => None,
        _ if completed_straight => Some(Section::Turn),
        _ => Some(world.section_at(pose.position())),
    };
    TrialRecord {
        scenario,
        mode,
        seed,
        outcome,
        failed_section,
        completed_straight,
        ticks: tick,
        final_pose: pose,
        trajectory,
    }
}

fn telemetry_row(
    tick: u64,
    pose: &DronePose,
    command: &FusionCommand,
    local: &LocalPercept,
    theta_cnn: f64,
) -> TelemetryRow {
    TelemetryRow { tick, pose: *pose, command: *command, d_c: local.d_c, x_dmax: local.x_dmax, theta_cnn }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trial seed; depends only on its inputs, never on scheduling.
pub fn trial_seed(global_seed: u64, scenario: ScenarioId, mode: PipelineMode, trial: u32) -> u64 {
    let mode_tag = match mode {
        PipelineMode::Global => 1,
        PipelineMode::Local => 2,
        PipelineMode::Fused => 3,
    };
    [u64::from(scenario.number()), mode_tag, u64::from(trial)]
        .into_iter()
        .fold(splitmix64(global_seed), |acc, v| splitmix64(acc ^ splitmix64(v)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub scenarios: Vec<ScenarioId>,
    pub modes: Vec<PipelineMode>,
    pub trials: u32,
    pub global_seed: u64,
    pub layout: ScenarioParams,
    pub params: SimParams,
    /// Replaces the built-in geometry of every scenario when set.
    pub world: Option<World>,
    /// Worker pool size; `None` lets rayon decide.
    pub threads: Option<usize>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            scenarios: ScenarioId::ALL.to_vec(),
            modes: PipelineMode::ALL.to_vec(),
            trials: 5,
            global_seed: 42,
            layout: ScenarioParams::default(),
            params: SimParams::default(),
            world: None,
            threads: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteResult {
    /// Ordered by scenario, mode, trial.
    pub records: Vec<TrialRecord>,
    pub matrix: SuccessMatrix,
}

/// Runs every (scenario, mode, trial) cell on a bounded worker pool.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteResult> {
    if cfg.trials == 0 {
        return Err(Error::config("trials", "must be at least 1"));
    }
    let worlds = cfg
        .scenarios
        .iter()
        .map(|&id| {
            let world = match &cfg.world {
                Some(w) => w.validate().map(|()| w.clone()),
                None => build_scenario(id, &cfg.layout),
            };
            world.map(|w| (id, w))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;

    let mut jobs = Vec::new();
    for &scenario in &cfg.scenarios {
        for &mode in &cfg.modes {
            for trial in 0..cfg.trials {
                jobs.push((scenario, mode, trial_seed(cfg.global_seed, scenario, mode, trial)));
            }
        }
    }

    let run = || -> Vec<TrialRecord> {
        jobs.par_iter()
            .map(|&(scenario, mode, seed)| run_trial(&worlds[&scenario], scenario, mode, seed, &cfg.params))
            .collect()
    };
    let records = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))?
            .install(run),
        None => run(),
    };
    let matrix = SuccessMatrix::from_records(&records);
    Ok(SuiteResult { records, matrix })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CellStats {
    pub successes: u32,
    pub attempts: u32,
}

impl CellStats {
    /// `None` when nothing was attempted.
    pub fn rate(&self) -> Option<f64> {
        (self.attempts > 0).then(|| f64::from(self.successes) / f64::from(self.attempts))
    }
}

/// Per (scenario, mode, section) success counts. A turn is only attempted by
/// trials that got through the straight section.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SuccessMatrix {
    cells: BTreeMap<(ScenarioId, PipelineMode, Section), CellStats>,
}

impl SuccessMatrix {
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let mut cells: BTreeMap<_, CellStats> = BTreeMap::new();
        for r in records {
            let straight = cells.entry((r.scenario, r.mode, Section::Straight)).or_default();
            straight.attempts += 1;
            let turn = cells.entry((r.scenario, r.mode, Section::Turn)).or_default();
            if r.completed_straight {
                turn.attempts += 1;
                if r.outcome == Outcome::Success {
                    turn.successes += 1;
                }
                cells.entry((r.scenario, r.mode, Section::Straight)).or_default().successes += 1;
            }
        }
        Self { cells }
    }

    pub fn get(&self, scenario: ScenarioId, mode: PipelineMode, section: Section) -> CellStats {
        self.cells.get(&(scenario, mode, section)).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(ScenarioId, PipelineMode, Section), &CellStats)> {
        self.cells.iter()
    }

    fn scenarios(&self) -> Vec<ScenarioId> {
        let mut s: Vec<_> = self.cells.keys().map(|k| k.0).collect();
        s.dedup();
        s
    }
}

pub fn format_rate(stats: CellStats) -> String {
    match stats.rate() {
        Some(r) => format!("{:.0}%", r * 100.0),
        None => "N/A".to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Report {
    pub text: String,
    pub csv: String,
}

pub const REPORT_CSV_HEADER: &str = "scenario,mode,section,successes,attempts,rate";

/// Fixed-layout text table (one row per scenario, Straight/Turn columns per
/// pipeline) and the matching CSV.
pub fn render_report(m: &SuccessMatrix) -> Report {
    const SECTIONS: [Section; 2] = [Section::Straight, Section::Turn];
    let heading = |mode: PipelineMode| match mode {
        PipelineMode::Global => "Global",
        PipelineMode::Local => "Local",
        PipelineMode::Fused => "Global + Local",
    };

    let mut text = String::new();
    let _ = write!(text, "{:<12}", "Perception");
    for mode in PipelineMode::ALL {
        let _ = write!(text, " | {:^18}", heading(mode));
    }
    text.push('\n');
    let _ = write!(text, "{:<12}", "Section");
    for _ in PipelineMode::ALL {
        let _ = write!(text, " | {:>9}{:>9}", "Straight", "Turn");
    }
    text.push('\n');
    text.push_str(&"-".repeat(12));
    for _ in PipelineMode::ALL {
        text.push_str("-+-");
        text.push_str(&"-".repeat(18));
    }
    text.push('\n');

    let mut csv = String::from(REPORT_CSV_HEADER);
    csv.push('\n');
    for scenario in m.scenarios() {
        let _ = write!(text, "{:<12}", format!("Scenario {}", scenario.number()));
        for mode in PipelineMode::ALL {
            text.push_str(" | ");
            for section in SECTIONS {
                let stats = m.get(scenario, mode, section);
                let _ = write!(text, "{:>9}", format_rate(stats));
                let rate = stats.rate().map_or_else(|| "N/A".to_string(), |r| format!("{r:.3}"));
                let _ = writeln!(
                    csv,
                    "{scenario},{mode},{section},{},{},{rate}",
                    stats.successes, stats.attempts
                );
            }
        }
        text.push('\n');
    }
    Report { text, csv }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(scenario: ScenarioId, mode: PipelineMode, outcome: Outcome, straight: bool) -> TrialRecord {
        TrialRecord {
            scenario,
            mode,
            seed: 0,
            outcome,
            failed_section: match outcome {
                Outcome::Success => None,
                _ if straight => Some(Section::Turn),
                _ => Some(Section::Straight),
            },
            completed_straight: straight,
            ticks: 1,
            final_pose: DronePose::new(0.0, 0.0, 0.0),
            trajectory: vec![],
        }
    }

    #[test]
    fn matrix_counts_turn_attempts_only_after_straight() {
        let recs = vec![
            record(ScenarioId::S2, PipelineMode::Global, Outcome::Collision, false),
            record(ScenarioId::S2, PipelineMode::Global, Outcome::Collision, false),
            record(ScenarioId::S2, PipelineMode::Local, Outcome::Timeout, true),
            record(ScenarioId::S2, PipelineMode::Fused, Outcome::Success, true),
        ];
        let m = SuccessMatrix::from_records(&recs);
        let g = m.get(ScenarioId::S2, PipelineMode::Global, Section::Straight);
        assert_eq!((g.successes, g.attempts), (0, 2));
        assert_eq!(m.get(ScenarioId::S2, PipelineMode::Global, Section::Turn).rate(), None);
        let l = m.get(ScenarioId::S2, PipelineMode::Local, Section::Turn);
        assert_eq!((l.successes, l.attempts), (0, 1));
        let f = m.get(ScenarioId::S2, PipelineMode::Fused, Section::Turn);
        assert_eq!(f.rate(), Some(1.0));
    }

    #[test]
    fn report_renders_na_literally() {
        let recs = vec![
            record(ScenarioId::S1, PipelineMode::Global, Outcome::Success, true),
            record(ScenarioId::S1, PipelineMode::Local, Outcome::Timeout, true),
            record(ScenarioId::S1, PipelineMode::Fused, Outcome::Success, true),
            record(ScenarioId::S2, PipelineMode::Global, Outcome::Collision, false),
            record(ScenarioId::S2, PipelineMode::Local, Outcome::Timeout, true),
            record(ScenarioId::S2, PipelineMode::Fused, Outcome::Success, true),
        ];
        let r = render_report(&SuccessMatrix::from_records(&recs));
        let s2 = r.text.lines().find(|l| l.starts_with("Scenario 2")).unwrap();
        assert!(s2.contains("N/A"));
        assert!(r.csv.contains("S2,global,turn,0,0,N/A"));
        assert!(r.csv.contains("S1,fused,turn,1,1,1.000"));
        assert_eq!(r.csv.lines().count(), 1 + 2 * 3 * 2);
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = trial_seed(42, ScenarioId::S1, PipelineMode::Fused, 0);
        assert_eq!(a, trial_seed(42, ScenarioId::S1, PipelineMode::Fused, 0));
        assert_ne!(a, trial_seed(42, ScenarioId::S1, PipelineMode::Fused, 1));
        assert_ne!(a, trial_seed(42, ScenarioId::S2, PipelineMode::Fused, 0));
        assert_ne!(a, trial_seed(42, ScenarioId::S1, PipelineMode::Local, 0));
        assert_ne!(a, trial_seed(43, ScenarioId::S1, PipelineMode::Fused, 0));
    }

    #[test]
    fn zero_trials_rejected() {
        let cfg = SuiteConfig { trials: 0, ..SuiteConfig::default() };
        assert!(run_suite(&cfg).is_err());
    }
}
