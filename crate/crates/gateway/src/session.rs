//! One live training session: a trainer, the human's feedback state and the
//! counters shown to the trainer UI.
//!
//! A session is a plain state machine. Client messages are handled between
//! steps and only ever change what the *next* step sees; nothing here
//! blocks or touches the network.

use std::sync::Arc;
use std::time::Duration;

use interrl::config::RunConfig;
use interrl::trainer::StepRecord;
use interrl::{
    Action, EnvKind, FeedbackSignal, FeedbackSource, RunSeed, SimulatedTeacher, TeacherQ, Trainer,
};

use crate::error::{GatewayError, Result};
use crate::wire::{ControlAction, Mode, WireMessage};

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOptions {
    /// Steps per second in the paced modes.
    pub pace: f64,
    /// In autonomous mode a state message goes out every this many steps.
    pub emit_every: usize,
    /// Start running without waiting for a `start` control.
    pub autostart: bool,
    /// Let the simulated teacher speak on steps where the human is silent.
    pub hybrid: bool,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            pace: 2.0,
            emit_every: 1,
            autostart: false,
            hybrid: false,
        }
    }
}

pub struct Session {
    id: u64,
    cfg: RunConfig,
    opts: SessionOptions,
    oracle: Option<Arc<TeacherQ>>,
    trainer: Trainer,
    teacher: Option<SimulatedTeacher>,
    mode: Mode,
    running: bool,
    /// Latest feedback received since the last step.
    pending: Option<Action>,
    last_feedback: Option<Action>,
    advised_steps: usize,
    total_steps: usize,
    seq: u64,
    client_seq: Option<u64>,
    last_step: Option<StepRecord>,
}

impl Session {
    /// A paused session. Session `id` uses the random streams of run `id`
    /// of a batch with the same seed.
    pub fn new(id: u64, cfg: RunConfig, opts: SessionOptions, oracle: Option<Arc<TeacherQ>>) -> Result<Self> {
        let cfg = cfg.validate().map_err(interrl::Error::Config)?;
        if opts.hybrid && oracle.is_none() {
            return Err(GatewayError::Rejected("hybrid sessions need a teacher".into()));
        }
        if !(opts.pace > 0.0 && opts.pace.is_finite()) || opts.emit_every == 0 {
            return Err(GatewayError::Rejected("pace and emit_every must be positive".into()));
        }
        let (trainer, teacher) = build(id, &cfg, &opts, oracle.as_ref())?;
        Ok(Self {
            id,
            running: opts.autostart,
            cfg,
            opts,
            oracle,
            trainer,
            teacher,
            mode: Mode::Autonomous,
            pending: None,
            last_feedback: None,
            advised_steps: 0,
            total_steps: 0,
            seq: 0,
            client_seq: None,
            last_step: None,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_running(&self) -> bool {
        self.running
    }

    pub fn trainer(&self) -> &Trainer {
        &self.trainer
    }

    pub fn advised_steps(&self) -> usize {
        self.advised_steps
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    /// Fraction of steps that carried feedback.
    pub fn l_counter(&self) -> f64 {
        if self.total_steps == 0 {
            0.0
        } else {
            self.advised_steps as f64 / self.total_steps as f64
        }
    }

    /// How long the paced modes wait for feedback before each decision.
    pub fn window(&self) -> Option<Duration> {
        self.mode
            .is_paced()
            .then(|| Duration::from_secs_f64(1.0 / self.opts.pace))
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    pub fn state_message(&mut self) -> WireMessage {
        let seq = self.next_seq();
        let ctx = self.trainer.context();
        let (action, h) = match &self.last_step {
            Some(r) => (
                self.cfg.env.action_label(r.action).map(String::from),
                r.h.clone(),
            ),
            None => (None, Vec::new()),
        };
        WireMessage::State {
            seq,
            session: self.id,
            episode: self.trainer.episode(),
            step: ctx.map_or(0, |c| c.step),
            mode: self.mode,
            running: self.running,
            l_counter: self.l_counter(),
            target: self.cfg.likelihood,
            window_ms: self.window().map_or(0, |w| w.as_millis() as u64),
            render: self.trainer.render(),
            action,
            h,
        }
    }

    pub fn error_message(&mut self, message: impl Into<String>) -> WireMessage {
        WireMessage::Error {
            seq: self.next_seq(),
            message: message.into(),
        }
    }

    /// Pauses after the client went away.
    pub fn disconnect(&mut self) {
        self.running = false;
    }

    /// Applies one client message and returns the replies.
    pub fn handle(&mut self, msg: WireMessage) -> Vec<WireMessage> {
        match self.apply(msg) {
            Ok(replies) => replies,
            Err(e) => vec![self.error_message(e.to_string())],
        }
    }

    fn apply(&mut self, msg: WireMessage) -> Result<Vec<WireMessage>> {
        if !msg.is_inbound() {
            return Err(GatewayError::Rejected(format!("clients cannot send '{}'", msg.kind())));
        }
        let seq = msg.seq();
        if let Some(last) = self.client_seq {
            if seq <= last {
                return Err(GatewayError::OutOfOrder { last, got: seq });
            }
        }
        self.client_seq = Some(seq);
        match msg {
            WireMessage::Feedback { action, .. } => {
                self.feedback(&action)?;
                Ok(Vec::new())
            }
            WireMessage::Mode { target, .. } => {
                self.set_mode(target)?;
                Ok(vec![self.state_message()])
            }
            WireMessage::Control { action, payload, .. } => {
                self.control(action, payload.as_deref())?;
                Ok(vec![self.state_message()])
            }
            _ => unreachable!("inbound kinds checked above"),
        }
    }

    fn feedback(&mut self, label: &str) -> Result<()> {
        if self.mode == Mode::DefaultRepeat {
            self.mode = Mode::HumanInteraction;
        }
        if label.trim().eq_ignore_ascii_case("none") {
            self.pending = None;
            return Ok(());
        }
        let action = self.cfg.env.parse_action(label)?;
        self.pending = Some(action);
        self.last_feedback = Some(action);
        Ok(())
    }

    fn set_mode(&mut self, target: Mode) -> Result<()> {
        if target == Mode::DefaultRepeat {
            if !self.mode.is_paced() {
                return Err(GatewayError::Rejected(
                    "default repeat needs human interaction mode".into(),
                ));
            }
            if self.last_feedback.is_none() {
                return Err(GatewayError::Rejected("no feedback to repeat yet".into()));
            }
        }
        self.mode = target;
        Ok(())
    }

    fn control(&mut self, action: ControlAction, payload: Option<&str>) -> Result<()> {
        match action {
            ControlAction::Start => self.running = true,
            ControlAction::Pause => self.running = false,
            ControlAction::Reset => self.reset()?,
            ControlAction::Config => {
                if self.running {
                    return Err(GatewayError::Rejected("pause before changing the configuration".into()));
                }
                let text = payload.ok_or_else(|| GatewayError::Rejected("config needs a payload".into()))?;
                let mut cfg = self.cfg.clone();
                for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
                    let (k, v) = line
                        .split_once('=')
                        .ok_or_else(|| GatewayError::Rejected(format!("expected key = value, got '{line}'")))?;
                    cfg.set(k.trim(), v)?;
                }
                let cfg = cfg.validate().map_err(interrl::Error::Config)?;
                if self.opts.hybrid && cfg.env != self.cfg.env {
                    return Err(GatewayError::Rejected("hybrid sessions cannot switch tasks".into()));
                }
                self.cfg = cfg;
                self.reset()?;
            }
            ControlAction::Pace => {
                let pace: f64 = payload
                    .and_then(|p| p.trim().parse().ok())
                    .filter(|p: &f64| *p > 0.0 && p.is_finite())
                    .ok_or_else(|| GatewayError::Rejected("pace needs a positive number".into()))?;
                self.opts.pace = pace;
            }
            ControlAction::Attach => {
                return Err(GatewayError::Rejected("attach is handled by the server".into()));
            }
        }
        Ok(())
    }

    fn reset(&mut self) -> Result<()> {
        let (trainer, teacher) = build(self.id, &self.cfg, &self.opts, self.oracle.as_ref())?;
        self.trainer = trainer;
        self.teacher = teacher;
        self.pending = None;
        self.last_feedback = None;
        self.advised_steps = 0;
        self.total_steps = 0;
        self.last_step = None;
        if self.mode == Mode::DefaultRepeat {
            self.mode = Mode::HumanInteraction;
        }
        Ok(())
    }

    /// Takes one step and returns the messages it produced. Does nothing
    /// while paused.
    pub fn tick(&mut self) -> Result<Vec<WireMessage>> {
        if !self.running {
            return Ok(Vec::new());
        }
        let human = match self.pending.take() {
            Some(a) => Some(a),
            None if self.mode == Mode::DefaultRepeat => self.last_feedback,
            None => None,
        };
        let signal = match (human, self.teacher.as_mut()) {
            (Some(a), _) => Some(FeedbackSignal::human(a)),
            (None, Some(teacher)) => {
                let ctx = match self.trainer.context() {
                    Some(ctx) => ctx,
                    None => self.trainer.begin_episode()?,
                };
                teacher.feedback(&ctx)?
            }
            (None, None) => None,
        };
        let record = self.trainer.step(signal.as_ref())?;
        self.total_steps += 1;
        if signal.is_some() {
            self.advised_steps += 1;
        }
        let end = record.episode_end.clone();
        self.last_step = Some(record);

        let mut out = Vec::new();
        if self.mode.is_paced() || self.total_steps % self.opts.emit_every == 0 || end.is_some() {
            out.push(self.state_message());
        }
        if let Some(log) = end {
            let seq = self.next_seq();
            out.push(WireMessage::EpisodeEnd {
                seq,
                episode: log.episode,
                ret: log.ret,
                method: log.method.to_string(),
                weights: log.weights,
                steps: log.steps,
                advised_steps: log.advised_steps,
            });
        }
        Ok(out)
    }

    /// The last step taken, if any.
    pub fn last_step(&self) -> Option<&StepRecord> {
        self.last_step.as_ref()
    }

    pub fn env(&self) -> EnvKind {
        self.cfg.env
    }
}

fn build(
    id: u64,
    cfg: &RunConfig,
    opts: &SessionOptions,
    oracle: Option<&Arc<TeacherQ>>,
) -> Result<(Trainer, Option<SimulatedTeacher>)> {
    let seed = RunSeed::for_run(cfg.seed, id as usize, 0);
    let trainer = Trainer::new(cfg, seed)?;
    let teacher = match (opts.hybrid, oracle) {
        (true, Some(o)) => Some(SimulatedTeacher::new(Arc::clone(o), cfg.oracle(), cfg.episodes, seed)),
        _ => None,
    };
    Ok((trainer, teacher))
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("id", &self.id)
            .field("mode", &self.mode)
            .field("running", &self.running)
            .field("advised_steps", &self.advised_steps)
            .field("total_steps", &self.total_steps)
            .finish_non_exhaustive()
    }
}
