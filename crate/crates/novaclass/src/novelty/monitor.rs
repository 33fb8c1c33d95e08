//! The continuous-monitoring state machine over a window stream.
//!
//! ```text
//! NORMAL ──fault prediction──▶ SUSPECT_COLLECTING ──window quota──▶ PROBING
//!   ▲                                                                 │
//!   │◀──────────── false alarm / known-fault alarm ────────────────────┤
//!   │                                                                 ▼
//!   └◀── RETRAINING ◀──sample threshold── AWAITING_DATA ◀──novel class─┘
//! ```
//!
//! Every transition and every classified window is appended to an event log
//! of line-delimited, machine-parsable records.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use rand::RngExt;

use crate::data::{LabeledDataset, Window};
use crate::error::{Error, Result};
use crate::novelty::{
    health_check, integrate_new_class, novelty_probe_with, retrain_sample_threshold, HealthStatus,
    NoveltyKind, NoveltyProbeConfig, HEALTHY_LABEL,
};
use crate::rng::{seeded, SeededRng};
use crate::scalar::Real;
use crate::wdcnn::{Model, TrainConfig};

/// Where the monitor currently is in its loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonitorPhase {
    Normal,
    SuspectCollecting,
    Probing,
    AwaitingData,
    Retraining,
}

impl MonitorPhase {
    /// Whether the state machine may move from `self` to `to` directly.
    pub fn can_transition_to(self, to: MonitorPhase) -> bool {
        use MonitorPhase::*;
        matches!(
            (self, to),
            (Normal, SuspectCollecting)
                | (SuspectCollecting, Probing)
                | (Probing, Normal)
                | (Probing, AwaitingData)
                | (AwaitingData, Retraining)
                | (Retraining, Normal)
        )
    }
}

impl fmt::Display for MonitorPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MonitorPhase::Normal => "NORMAL",
            MonitorPhase::SuspectCollecting => "SUSPECT_COLLECTING",
            MonitorPhase::Probing => "PROBING",
            MonitorPhase::AwaitingData => "AWAITING_DATA",
            MonitorPhase::Retraining => "RETRAINING",
        })
    }
}

/// What happened at one point in the loop.
#[derive(Debug, Clone, PartialEq)]
pub enum MonitorEventKind {
    /// A window was classified while in NORMAL.
    Classified { label: usize, prob: f64 },
    /// The state machine moved between phases.
    PhaseChanged { from: MonitorPhase, to: MonitorPhase },
    /// A single non-healthy prediction opened a suspect episode.
    SuspectTriggered { label: usize },
    /// A window joined the current collection buffer.
    Collected { have: usize, need: usize },
    /// The averaged-prediction health check ran.
    HealthChecked { status: HealthStatus, healthy_prob: f64 },
    /// The health check cleared the suspect windows.
    FalseAlarm,
    /// The probe matched the suspect windows to an existing class.
    KnownFaultAlarm { label: usize, clusters: usize },
    /// The probe found one more cluster than the model has classes.
    NovelDetected { clusters: usize },
    /// Enough new-class samples were collected; retraining begins.
    RetrainStarted { samples: usize },
    /// Retraining finished and the upgraded model is live.
    RetrainComplete { classes: usize, cv_mean: f64 },
    /// The stream ended (possibly mid-phase).
    Shutdown { windows_seen: usize },
}

impl MonitorEventKind {
    pub fn name(&self) -> &'static str {
        match self {
            MonitorEventKind::Classified { .. } => "classified",
            MonitorEventKind::PhaseChanged { .. } => "phase_changed",
            MonitorEventKind::SuspectTriggered { .. } => "suspect_triggered",
            MonitorEventKind::Collected { .. } => "collected",
            MonitorEventKind::HealthChecked { .. } => "health_checked",
            MonitorEventKind::FalseAlarm => "false_alarm",
            MonitorEventKind::KnownFaultAlarm { .. } => "known_fault_alarm",
            MonitorEventKind::NovelDetected { .. } => "novel_detected",
            MonitorEventKind::RetrainStarted { .. } => "retrain_started",
            MonitorEventKind::RetrainComplete { .. } => "retrain_complete",
            MonitorEventKind::Shutdown { .. } => "shutdown",
        }
    }

    fn payload(&self) -> String {
        match self {
            MonitorEventKind::Classified { label, prob } => {
                format!("label={label};prob={prob:.6}")
            }
            MonitorEventKind::PhaseChanged { from, to } => format!("from={from};to={to}"),
            MonitorEventKind::SuspectTriggered { label } => format!("label={label}"),
            MonitorEventKind::Collected { have, need } => format!("have={have};need={need}"),
            MonitorEventKind::HealthChecked {
                status,
                healthy_prob,
            } => {
                let s = match status {
                    HealthStatus::Healthy => "healthy",
                    HealthStatus::Faulty => "faulty",
                };
                format!("status={s};healthy_prob={healthy_prob:.6}")
            }
            MonitorEventKind::FalseAlarm => String::new(),
            MonitorEventKind::KnownFaultAlarm { label, clusters } => {
                format!("label={label};clusters={clusters}")
            }
            MonitorEventKind::NovelDetected { clusters } => format!("clusters={clusters}"),
            MonitorEventKind::RetrainStarted { samples } => format!("samples={samples}"),
            MonitorEventKind::RetrainComplete { classes, cv_mean } => {
                format!("classes={classes};cv_mean={cv_mean:.6}")
            }
            MonitorEventKind::Shutdown { windows_seen } => {
                format!("windows_seen={windows_seen}")
            }
        }
    }
}

/// One timestamped record in the monitor's event log.
///
/// Equality ignores the timestamp so that two replays of the same stream
/// compare equal; everything else is part of the record's identity.
#[derive(Debug, Clone)]
pub struct MonitorEvent {
    /// Wall-clock time the event fired.
    pub timestamp: DateTime<Utc>,
    /// Index of the stream window that caused the event (the total window
    /// count for the shutdown record).
    pub window_index: usize,
    /// Phase the monitor was in once the event took effect.
    pub phase: MonitorPhase,
    pub kind: MonitorEventKind,
}

impl PartialEq for MonitorEvent {
    fn eq(&self, other: &Self) -> bool {
        self.window_index == other.window_index
            && self.phase == other.phase
            && self.kind == other.kind
    }
}

impl MonitorEvent {
    fn now(window_index: usize, phase: MonitorPhase, kind: MonitorEventKind) -> Self {
        MonitorEvent {
            timestamp: Utc::now(),
            window_index,
            phase,
            kind,
        }
    }
}

impl fmt::Display for MonitorEvent {
    /// `<rfc3339-utc>\t<window_index>\t<PHASE>\t<event>\t<key=value;...>`
    /// (a lone `-` when the event carries no payload).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let payload = self.kind.payload();
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}",
            self.timestamp.to_rfc3339_opts(SecondsFormat::Millis, true),
            self.window_index,
            self.phase,
            self.kind.name(),
            if payload.is_empty() { "-" } else { &payload }
        )
    }
}

/// Writes one event per line.
pub fn write_event_log(events: &[MonitorEvent], path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for e in events {
        writeln!(out, "{e}")?;
    }
    out.flush()?;
    Ok(())
}

/// Everything the monitor loop needs besides the model and the stream.
#[derive(Debug, Clone)]
pub struct MonitorConfig<F> {
    /// The known labeled data: reference pool for probes and the base the
    /// retrainer widens.
    pub base: LabeledDataset<F>,
    pub probe: NoveltyProbeConfig,
    pub train: TrainConfig,
    /// Master seed; probe and retrain seeds are drawn from it in occurrence
    /// order, so the whole loop replays deterministically.
    pub seed: u64,
}

/// What a finished (or exhausted) monitor run hands back.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorOutcome<F> {
    /// The live model at shutdown — upgraded if a retraining completed.
    pub model: Model<F>,
    pub events: Vec<MonitorEvent>,
    pub windows_seen: usize,
}

struct Engine<'a, F: Real> {
    cfg: &'a MonitorConfig<F>,
    model: Model<F>,
    /// Grows to include the integrated class after each retraining.
    base: LabeledDataset<F>,
    phase: MonitorPhase,
    suspect: Vec<Window<F>>,
    novel: Vec<Window<F>>,
    events: Vec<MonitorEvent>,
    master: SeededRng,
    threshold: usize,
}

impl<F: Real> Engine<'_, F> {
    fn log(&mut self, idx: usize, kind: MonitorEventKind) {
        self.events.push(MonitorEvent::now(idx, self.phase, kind));
    }

    fn transition(&mut self, idx: usize, to: MonitorPhase) {
        let from = self.phase;
        debug_assert!(from.can_transition_to(to), "illegal {from} -> {to}");
        self.phase = to;
        self.log(idx, MonitorEventKind::PhaseChanged { from, to });
    }

    fn handle(&mut self, idx: usize, window: Window<F>) -> Result<()> {
        match self.phase {
            MonitorPhase::Normal => {
                let dist = self.model.predict(&window)?;
                let label = dist.argmax();
                let prob = dist.probs()[label].to_f64();
                self.log(idx, MonitorEventKind::Classified { label, prob });
                if label != HEALTHY_LABEL {
                    self.transition(idx, MonitorPhase::SuspectCollecting);
                    self.log(idx, MonitorEventKind::SuspectTriggered { label });
                    self.suspect.clear();
                    self.collect_suspect(idx, window)?;
                }
            }
            MonitorPhase::SuspectCollecting => self.collect_suspect(idx, window)?,
            MonitorPhase::AwaitingData => {
                self.novel.push(window);
                self.log(
                    idx,
                    MonitorEventKind::Collected {
                        have: self.novel.len(),
                        need: self.threshold,
                    },
                );
                self.maybe_retrain(idx)?;
            }
            MonitorPhase::Probing | MonitorPhase::Retraining => {
                unreachable!("transient phases never receive windows")
            }
        }
        Ok(())
    }

    fn collect_suspect(&mut self, idx: usize, window: Window<F>) -> Result<()> {
        self.suspect.push(window);
        self.log(
            idx,
            MonitorEventKind::Collected {
                have: self.suspect.len(),
                need: self.cfg.probe.new_window_count,
            },
        );
        if self.suspect.len() < self.cfg.probe.new_window_count {
            return Ok(());
        }

        self.transition(idx, MonitorPhase::Probing);
        let verdict = health_check(&self.model, &self.suspect, self.cfg.probe.new_window_count)?;
        let healthy_prob = verdict.mean_distribution.probs()[HEALTHY_LABEL].to_f64();
        self.log(
            idx,
            MonitorEventKind::HealthChecked {
                status: verdict.status,
                healthy_prob,
            },
        );
        if verdict.status == HealthStatus::Healthy {
            self.log(idx, MonitorEventKind::FalseAlarm);
            self.suspect.clear();
            self.transition(idx, MonitorPhase::Normal);
            return Ok(());
        }

        let probe_seed: u64 = self.master.random();
        let decision =
            novelty_probe_with(&self.model, &self.suspect, &self.base, &self.cfg.probe, probe_seed)?;
        match decision.kind {
            NoveltyKind::KnownClass(label) => {
                self.log(
                    idx,
                    MonitorEventKind::KnownFaultAlarm {
                        label,
                        clusters: decision.estimated_cluster_count,
                    },
                );
                self.suspect.clear();
                self.transition(idx, MonitorPhase::Normal);
            }
            NoveltyKind::NovelClass => {
                self.log(
                    idx,
                    MonitorEventKind::NovelDetected {
                        clusters: decision.estimated_cluster_count,
                    },
                );
                self.transition(idx, MonitorPhase::AwaitingData);
                self.novel = std::mem::take(&mut self.suspect);
                self.log(
                    idx,
                    MonitorEventKind::Collected {
                        have: self.novel.len(),
                        need: self.threshold,
                    },
                );
                self.maybe_retrain(idx)?;
            }
        }
        Ok(())
    }

    fn maybe_retrain(&mut self, idx: usize) -> Result<()> {
        if self.novel.len() < self.threshold {
            return Ok(());
        }
        self.transition(idx, MonitorPhase::Retraining);
        self.log(
            idx,
            MonitorEventKind::RetrainStarted {
                samples: self.novel.len(),
            },
        );
        let mut train_cfg = self.cfg.train.clone();
        train_cfg.seed = self.master.random();
        let (upgraded, _confusion, report) =
            integrate_new_class(&self.model, &self.base, &self.novel, &train_cfg)?;
        self.log(
            idx,
            MonitorEventKind::RetrainComplete {
                classes: upgraded.num_classes(),
                cv_mean: report.mean,
            },
        );

        // The integrated class joins the reference pool, and the balance
        // threshold follows the widened dataset.
        let new_label = self.base.num_classes();
        let samples = std::mem::take(&mut self.novel);
        let count = samples.len();
        let additions = LabeledDataset::new(
            samples,
            vec![new_label; count],
            upgraded.class_names.clone(),
        )
        .expect("novel buffer labels are in range");
        self.base.extend_from(&additions);
        self.threshold = retrain_sample_threshold(&self.base);
        self.model = upgraded;
        self.transition(idx, MonitorPhase::Normal);
        Ok(())
    }
}

/// Runs the monitoring state machine over a stream of windows.
///
/// In NORMAL every window is classified and logged; a non-healthy prediction
/// starts collecting suspect windows; a full buffer triggers the health
/// check and, when the check confirms a fault, the novelty probe. A known
/// fault raises an alarm and the loop resumes; a novel class accumulates
/// data until [`retrain_sample_threshold`] windows exist, then retrains via
/// [`integrate_new_class`] and resumes with the upgraded model. Stream
/// exhaustion in any phase shuts down cleanly with the partial log.
pub fn monitor_loop<F: Real, I>(
    model: Model<F>,
    stream: I,
    cfg: &MonitorConfig<F>,
) -> Result<MonitorOutcome<F>>
where
    I: IntoIterator<Item = Window<F>>,
{
    if cfg.base.is_empty() {
        return Err(Error::invalid_argument("monitor base dataset is empty"));
    }
    if cfg.base.num_classes() != model.num_classes() {
        return Err(Error::invalid_argument(format!(
            "base dataset has {} classes but the model has {}",
            cfg.base.num_classes(),
            model.num_classes()
        )));
    }
    let threshold = retrain_sample_threshold(&cfg.base);
    let mut engine = Engine {
        cfg,
        base: cfg.base.clone(),
        model,
        phase: MonitorPhase::Normal,
        suspect: Vec::new(),
        novel: Vec::new(),
        events: Vec::new(),
        master: seeded(cfg.seed),
        threshold,
    };
    let mut windows_seen = 0;
    for (idx, window) in stream.into_iter().enumerate() {
        engine.handle(idx, window)?;
        windows_seen = idx + 1;
    }
    engine.log(windows_seen, MonitorEventKind::Shutdown { windows_seen });
    Ok(MonitorOutcome {
        model: engine.model,
        events: engine.events,
        windows_seen,
    })
}
