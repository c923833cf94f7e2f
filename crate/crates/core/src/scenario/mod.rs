//! Scripted demos: a scenario file holds a configuration and an ordered list
//! of steps (mode changes, goals, commands, waits and assertions) that run
//! against an in-process edge and avatar.

mod harness;

pub use harness::{SimHarness, TraceEntry};

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::avatar::SpeakerScript;
use crate::config::{parse_json, Clock, ConfigError, SystemConfig};
use crate::edge::{Mode, RecordStatus, Source};
use crate::pose::{angle_diff, Pose};
use crate::proto::{Command, Liveness};
use crate::transport::Impairment;
use crate::Millis;

const DEFAULT_WAIT_TIMEOUT_MS: Millis = 120_000;

fn default_timeout() -> Millis {
    DEFAULT_WAIT_TIMEOUT_MS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub config: SystemConfig,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    WaitMs(Millis),
    WaitUntilAlive {
        #[serde(default = "default_timeout")]
        timeout_ms: Millis,
    },
    WaitUntilIdle {
        #[serde(default = "default_timeout")]
        timeout_ms: Millis,
    },
    Mode(Mode),
    Goal(GoalStep),
    Command(Command),
    Stop {},
    SetImpairment(Impairment),
    Assert(Assertion),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalStep {
    pub x: f64,
    pub y: f64,
    /// Substring the rejection reason must contain; absent means the goal
    /// must be accepted.
    #[serde(default)]
    pub expect_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Assertion {
    /// The robot stands on the last goal with the planned final heading.
    GoalReached { tol_m: f64, tol_deg: f64 },
    Pose {
        x: f64,
        y: f64,
        #[serde(default)]
        theta_deg: Option<f64>,
        tol_m: f64,
        #[serde(default)]
        tol_deg: f64,
    },
    Heading { deg: f64, tol_deg: f64 },
    RecordStatus { id: u64, status: RecordStatus },
    /// No record ended TimedOut or Failed.
    NoFailures {},
    CommandsFrom { source: Source, count: usize },
    Session(Liveness),
    Mode(Mode),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoOutcome {
    pub failures: Vec<String>,
    pub trace: Vec<TraceEntry>,
    pub final_pose: Pose,
    pub virtual_ms: Millis,
}

impl DemoOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, path, base)
    }

    pub fn parse(text: &str, origin: &Path, base_dir: PathBuf) -> Result<Self, ConfigError> {
        let mut scenario: Self = parse_json(text, origin)?;
        scenario.config.base_dir = base_dir;
        scenario.config.validate().map_err(|e| match e {
            ConfigError::Invalid { key, message } => ConfigError::Invalid { key: format!("config.{key}"), message },
            other => other,
        })?;
        Ok(scenario)
    }

    /// Builds the harness, reading the map and speaker script. `seed`
    /// overrides both the configured seed and the channel seed.
    pub fn build(&self, seed: Option<u64>) -> Result<SimHarness, ConfigError> {
        let config = &self.config;
        let map_path = config.map_path().map_err(|e| prefix(e, "config"))?;
        let map_text = config.read_map()?;
        let script = match config.speaker_script_path() {
            Some(path) => {
                let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
                SpeakerScript::from_json(&text).map_err(|e| ConfigError::Invalid {
                    key: "config.avatar.speaker_script".into(),
                    message: format!("{}: {e}", path.display()),
                })?
            }
            None => SpeakerScript::default(),
        };
        let mut impairment = config.impairment.clone();
        if let Some(seed) = seed {
            impairment.seed = seed;
        }
        SimHarness::new(
            config.edge_config(),
            map_text,
            config.avatar_config(),
            script,
            impairment,
            seed.unwrap_or(config.seed),
        )
        .map_err(|e| ConfigError::Invalid { key: "config.map".into(), message: format!("{}: {e}", map_path.display()) })
    }

    pub fn run(&self, seed: Option<u64>) -> Result<DemoOutcome, ConfigError> {
        let mut h = self.build(seed)?;
        let mut runner = Runner { h: &mut h, failures: Vec::new(), last_goal: None, realtime: self.config.clock == Clock::Wall };
        for (index, step) in self.steps.iter().enumerate() {
            runner.h.note("step", json!({ "index": index, "step": step }));
            runner.exec(index, step);
        }
        let failures = runner.failures;
        Ok(DemoOutcome {
            failures,
            trace: h.trace().to_vec(),
            final_pose: h.avatar_pose(),
            virtual_ms: h.now(),
        })
    }
}

fn prefix(e: ConfigError, section: &str) -> ConfigError {
    match e {
        ConfigError::Invalid { key, message } => ConfigError::Invalid { key: format!("{section}.{key}"), message },
        other => other,
    }
}

struct Runner<'a> {
    h: &'a mut SimHarness,
    failures: Vec<String>,
    /// Goal point and the heading the robot should end with.
    last_goal: Option<(f64, f64, f64)>,
    realtime: bool,
}

impl Runner<'_> {
    fn fail(&mut self, index: usize, message: String) {
        log::warn!("step {index}: {message}");
        self.h.note("failure", json!({ "index": index, "message": message }));
        self.failures.push(format!("step {index}: {message}"));
    }

    fn wait(&mut self, ms: Millis) {
        if self.realtime {
            let until = self.h.now() + ms;
            while self.h.now() < until {
                self.h.step();
                std::thread::sleep(std::time::Duration::from_millis(SimHarness::DEFAULT_TICK_MS));
            }
        } else {
            self.h.run_for(ms);
        }
    }

    fn exec(&mut self, index: usize, step: &Step) {
        let now = self.h.now();
        match step {
            Step::WaitMs(ms) => self.wait(*ms),
            Step::WaitUntilAlive { timeout_ms } => {
                if !self.h.run_until_alive(*timeout_ms) {
                    self.fail(index, format!("avatar not connected within {timeout_ms} ms"));
                }
            }
            Step::WaitUntilIdle { timeout_ms } => {
                if !self.h.run_until_idle(*timeout_ms) {
                    self.fail(index, format!("still busy after {timeout_ms} ms"));
                }
            }
            Step::Mode(mode) => {
                self.h.edge_mut().set_mode(*mode, now);
            }
            Step::Goal(goal) => {
                let result = self.h.edge_mut().submit_goal(goal.x, goal.y, now);
                match (result, &goal.expect_error) {
                    (Ok(plan), None) => {
                        let heading = plan.route.final_heading(&plan.start);
                        self.last_goal = Some((goal.x, goal.y, heading));
                        self.h.note(
                            "plan",
                            json!({ "id_first": plan.id_first, "count": plan.count, "path": plan.route.path.waypoints }),
                        );
                    }
                    (Ok(_), Some(expected)) => {
                        self.fail(index, format!("goal ({}, {}) accepted; expected \"{expected}\"", goal.x, goal.y))
                    }
                    (Err(e), None) => self.fail(index, format!("goal ({}, {}) rejected: {e}", goal.x, goal.y)),
                    (Err(e), Some(expected)) => {
                        if !e.to_string().contains(expected.as_str()) {
                            self.fail(index, format!("goal rejected with \"{e}\", expected \"{expected}\""));
                        }
                    }
                }
            }
            Step::Command(cmd) => {
                if let Err(e) = self.h.edge_mut().submit_manual(*cmd, now) {
                    self.fail(index, format!("command {cmd} rejected: {e}"));
                }
            }
            Step::Stop {} => {
                if let Err(e) = self.h.edge_mut().emergency_stop(now) {
                    self.fail(index, format!("stop rejected: {e}"));
                }
            }
            Step::SetImpairment(imp) => self.h.set_impairment(imp.clone()),
            Step::Assert(a) => {
                let verdict = self.check(a);
                self.h.note("assert", json!({ "index": index, "ok": verdict.is_ok(), "assertion": a }));
                if let Err(message) = verdict {
                    self.fail(index, message);
                }
            }
        }
        self.h.flush();
    }

    fn check(&self, a: &Assertion) -> Result<(), String> {
        let pose = self.h.avatar_pose();
        let edge = self.h.edge();
        match a {
            Assertion::GoalReached { tol_m, tol_deg } => {
                let (gx, gy, heading) = self.last_goal.ok_or("no goal was accepted")?;
                let dist = pose.distance_to(gx, gy);
                let dtheta = angle_diff(pose.theta, heading).to_degrees().abs();
                if dist > *tol_m || dtheta > *tol_deg {
                    return Err(format!(
                        "pose ({:.4}, {:.4}, {:.2} deg) is {dist:.4} m / {dtheta:.3} deg from goal ({gx}, {gy}, {:.2} deg)",
                        pose.x,
                        pose.y,
                        pose.heading_deg(),
                        heading.to_degrees()
                    ));
                }
                Ok(())
            }
            Assertion::Pose { x, y, theta_deg, tol_m, tol_deg } => {
                let dist = pose.distance_to(*x, *y);
                if dist > *tol_m {
                    return Err(format!("pose ({:.4}, {:.4}) is {dist:.4} m from ({x}, {y})", pose.x, pose.y));
                }
                if let Some(deg) = theta_deg {
                    check_heading(&pose, *deg, *tol_deg)?;
                }
                Ok(())
            }
            Assertion::Heading { deg, tol_deg } => check_heading(&pose, *deg, *tol_deg),
            Assertion::RecordStatus { id, status } => match edge.record(*id) {
                Some(r) if r.status == *status => Ok(()),
                Some(r) => Err(format!("record {id} is {:?}, expected {status:?}", r.status)),
                None => Err(format!("no record {id}")),
            },
            Assertion::NoFailures {} => {
                let bad: Vec<String> = edge
                    .records()
                    .iter()
                    .filter(|r| matches!(r.status, RecordStatus::TimedOut | RecordStatus::Failed))
                    .map(|r| format!("{} {:?}", r.id, r.status))
                    .collect();
                if bad.is_empty() {
                    Ok(())
                } else {
                    Err(format!("records failed: {}", bad.join(", ")))
                }
            }
            Assertion::CommandsFrom { source, count } => {
                let n = edge.records().iter().filter(|r| r.source == *source).count();
                if n == *count {
                    Ok(())
                } else {
                    Err(format!("{n} records from {source:?}, expected {count}"))
                }
            }
            Assertion::Session(state) => {
                let actual = edge.liveness();
                if actual == *state {
                    Ok(())
                } else {
                    Err(format!("session is {actual:?}, expected {state:?}"))
                }
            }
            Assertion::Mode(mode) => {
                if edge.mode() == *mode {
                    Ok(())
                } else {
                    Err(format!("mode is {}, expected {mode}", edge.mode()))
                }
            }
        }
    }
}

fn check_heading(pose: &Pose, deg: f64, tol_deg: f64) -> Result<(), String> {
    let err = angle_diff(pose.theta, deg.to_radians()).to_degrees().abs();
    if err > tol_deg {
        Err(format!("heading {:.3} deg is {err:.3} deg from {deg}", pose.heading_deg()))
    } else {
        Ok(())
    }
}

/// Writes one JSON object per line.
pub fn write_trace(path: &Path, trace: &[TraceEntry]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for entry in trace {
        serde_json::to_writer(&mut out, entry)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
