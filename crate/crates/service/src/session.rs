//! Deterministic tick engine, independent of any I/O.

use balance_core::sdde::{CoupledInit, CoupledState, SingleInit, SingleState};
use balance_core::trial::{SessionConfig, TerminationCause, TickRow, TrialEnd, TrialMode};
use balance_core::SddeError;

use crate::protocol::ServerMessage;

#[derive(Debug, Clone)]
enum Driven {
    Single(SingleState),
    Coupled(CoupledState),
}

/// Result of one [`Session::tick`].
#[derive(Debug, Clone, PartialEq)]
pub enum TickOutcome {
    /// A row was recorded. `end` is set when this row is the last one.
    Row { row: TickRow, frame: ServerMessage, end: Option<TerminationCause> },
    /// The time limit was reached before this tick; nothing was recorded.
    Finished(TerminationCause),
}

/// One subject-driven run of the single or coupled model.
#[derive(Debug, Clone)]
pub struct Session {
    cfg: SessionConfig,
    state: Driven,
    tick: u64,
    px: Vec<i32>,
    end: Option<TrialEnd>,
}

impl Session {
    pub fn new(cfg: SessionConfig) -> Result<Self, SddeError> {
        cfg.validate()?;
        let p = cfg.params();
        let state = match cfg.mode {
            TrialMode::Single => Driven::Single(SingleState::new(
                &p,
                SingleInit { tip: cfg.initial_tip, base: cfg.initial_bases[0], ..Default::default() },
            )?),
            TrialMode::Coupled => Driven::Coupled(CoupledState::new(
                &p,
                CoupledInit { tip: cfg.initial_tip, bases: [cfg.initial_bases[0], cfg.initial_bases[1]], ..Default::default() },
            )?),
        };
        let screen = cfg.screen();
        let px = cfg.initial_bases.iter().map(|b| screen.model_to_px(*b)).collect();
        Ok(Self { cfg, state, tick: 0, px, end: None })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    /// Index of the next tick.
    pub fn tick_index(&self) -> u64 {
        self.tick
    }

    pub fn end(&self) -> Option<&TrialEnd> {
        self.end.as_ref()
    }

    /// Last pixel seen per subject.
    pub fn pointer(&self) -> &[i32] {
        &self.px
    }

    /// Ends the session early (abort or lost client) after the rows so far.
    pub fn terminate(&mut self, cause: TerminationCause) -> TrialEnd {
        let end = self.end.clone().unwrap_or(TrialEnd { cause, ticks: self.tick });
        self.end = Some(end.clone());
        end
    }

    fn tip(&self) -> (f64, f64) {
        match &self.state {
            Driven::Single(s) => (s.tip, s.tip_vel),
            Driven::Coupled(s) => (s.tip, s.tip_vel),
        }
    }

    fn bases(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.state {
            Driven::Single(s) => (vec![s.base], vec![s.base_vel]),
            Driven::Coupled(s) => (s.bases.to_vec(), s.base_vels.to_vec()),
        }
    }

    /// Every displayed line inside the visible range.
    fn in_range(&self, tip: f64, bases: &[f64]) -> bool {
        let [lo, hi] = self.cfg.visible_range;
        let inside = |x: f64| x >= lo && x <= hi;
        self.cfg.tip_lines(tip).into_iter().all(inside) && bases.iter().all(|b| inside(*b))
    }

    /// Current screen frame.
    pub fn frame(&self) -> ServerMessage {
        let screen = self.cfg.screen();
        let (tip, _) = self.tip();
        let (bases, _) = self.bases();
        let tips = match self.cfg.mode {
            TrialMode::Single => vec![screen.model_to_px(tip)],
            TrialMode::Coupled => screen.rod_px(tip, self.cfg.rod_length).to_vec(),
        };
        ServerMessage::State { tick: self.tick, tips, bases: bases.iter().map(|b| screen.model_to_px(*b)).collect() }
    }

    /// Records the current state with the latest pointer positions, checks
    /// termination, then integrates one tick interval with the pointers held.
    /// `inputs[i]` is `None` when subject `i` sent nothing since last tick.
    pub fn tick(&mut self, inputs: &[Option<i32>]) -> Result<TickOutcome, SddeError> {
        if let Some(end) = &self.end {
            return Ok(TickOutcome::Finished(end.cause));
        }
        if self.tick >= self.cfg.max_ticks() {
            return Ok(TickOutcome::Finished(self.terminate(TerminationCause::Completed).cause));
        }
        let screen = self.cfg.screen();
        for (slot, input) in self.px.iter_mut().zip(inputs) {
            if let Some(px) = input {
                *slot = screen.clamp_px(*px);
            }
        }
        let (tip, tip_vel) = self.tip();
        let (bases, base_vels) = self.bases();
        let row = TickRow {
            tick: self.tick,
            t: self.tick as f64 / self.cfg.tick_rate,
            tip,
            bases: bases.clone(),
            mouse_px: self.px.clone(),
            errors: bases.iter().map(|b| tip - b).collect(),
            tip_vel,
            base_vels,
        };
        let frame = self.frame();
        let out_of_range = !self.in_range(tip, &bases);
        self.tick += 1;
        if out_of_range {
            self.end = Some(TrialEnd { cause: TerminationCause::OutOfRange, ticks: self.tick });
            return Ok(TickOutcome::Row { row, frame, end: Some(TerminationCause::OutOfRange) });
        }
        let p = self.cfg.params();
        let n = self.cfg.substeps();
        let held: Vec<f64> = self.px.iter().map(|px| screen.px_to_model(*px)).collect();
        match &mut self.state {
            Driven::Single(s) => s.drive_held(&p, held[0], n)?,
            Driven::Coupled(s) => s.drive_held(&p, [held[0], held[1]], n)?,
        }
        Ok(TickOutcome::Row { row, frame, end: None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_to_end(s: &mut Session, mut input: impl FnMut(&Session) -> Vec<Option<i32>>) -> (Vec<TickRow>, TerminationCause) {
        let mut rows = Vec::new();
        loop {
            let inp = input(s);
            match s.tick(&inp).unwrap() {
                TickOutcome::Row { row, end, .. } => {
                    rows.push(row);
                    if let Some(c) = end {
                        return (rows, c);
                    }
                }
                TickOutcome::Finished(c) => return (rows, c),
            }
        }
    }

    /// Puts each base under its displayed tip, as a perfect tracker would.
    fn follow(s: &Session) -> Vec<Option<i32>> {
        let ServerMessage::State { tips, .. } = s.frame() else { unreachable!() };
        tips.into_iter().map(Some).collect()
    }

    #[test]
    fn untouched_pointer_lets_the_stick_fall() {
        let mut s = Session::new(SessionConfig::new(TrialMode::Single)).unwrap();
        let (rows, cause) = run_to_end(&mut s, |_| vec![None]);
        assert_eq!(cause, TerminationCause::OutOfRange);
        assert!(rows.len() < 30_000);
        let last = rows.last().unwrap();
        assert!(last.tip.abs() > 3.0);
        assert!(rows[..rows.len() - 1].iter().all(|r| r.tip.abs() <= 3.0));
        assert_eq!(s.end().unwrap().ticks, rows.len() as u64);
    }

    #[test]
    fn perfect_tracking_runs_the_full_session() {
        let mut s = Session::new(SessionConfig::new(TrialMode::Single)).unwrap();
        let (rows, cause) = run_to_end(&mut s, follow);
        assert_eq!(cause, TerminationCause::Completed);
        assert_eq!(rows.len(), 30_000);
        assert!(rows.iter().enumerate().all(|(k, r)| r.tick == k as u64 && r.t == k as f64 / 50.0));
        let mut c = Session::new(SessionConfig::new(TrialMode::Coupled)).unwrap();
        let (rows, cause) = run_to_end(&mut c, follow);
        assert_eq!((rows.len(), cause), (30_000, TerminationCause::Completed));
    }

    #[test]
    fn coupled_tips_stay_two_hundred_px_apart() {
        let mut s = Session::new(SessionConfig::new(TrialMode::Coupled)).unwrap();
        let mut frames = Vec::new();
        for k in 0..500 {
            let px = 481 + (k % 40);
            match s.tick(&[Some(px), Some(721 - (k % 30))]).unwrap() {
                TickOutcome::Row { frame, end, .. } => {
                    frames.push(frame);
                    if end.is_some() {
                        break;
                    }
                }
                TickOutcome::Finished(_) => break,
            }
        }
        assert!(frames.len() > 10);
        for f in frames {
            let ServerMessage::State { tips, bases, .. } = f else { panic!() };
            assert_eq!(tips[1] - tips[0], 200);
            assert_eq!(bases.len(), 2);
        }
    }

    #[test]
    fn identical_inputs_give_identical_rows() {
        let script = |s: &Session| vec![Some(400 + (s.tick_index() % 17) as i32), Some(800 - (s.tick_index() % 23) as i32)];
        let mut a = Session::new(SessionConfig::new(TrialMode::Coupled)).unwrap();
        let mut b = Session::new(SessionConfig::new(TrialMode::Coupled)).unwrap();
        assert_eq!(run_to_end(&mut a, script), run_to_end(&mut b, script));
    }

    #[test]
    fn missing_input_reuses_last_pixel_and_clamps() {
        let mut s = Session::new(SessionConfig::new(TrialMode::Single)).unwrap();
        assert_eq!(s.pointer(), &[481]);
        s.tick(&[Some(5000)]).unwrap();
        assert_eq!(s.pointer(), &[1200]);
        let TickOutcome::Row { row, .. } = s.tick(&[None]).unwrap() else { panic!() };
        assert_eq!(row.mouse_px, vec![1200]);
        assert_eq!(row.bases[0], 3.0);
    }

    #[test]
    fn terminate_is_sticky() {
        let mut s = Session::new(SessionConfig::new(TrialMode::Single)).unwrap();
        s.tick(&[None]).unwrap();
        let end = s.terminate(TerminationCause::AbortedBySubject);
        assert_eq!(end.ticks, 1);
        assert_eq!(s.tick(&[None]).unwrap(), TickOutcome::Finished(TerminationCause::AbortedBySubject));
    }
}
