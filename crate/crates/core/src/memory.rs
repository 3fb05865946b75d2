//! Deterministic shared-memory execution: process programs over atomic
//! read/write registers, configurations, schedules, and a step engine whose
//! undo log rolls any prefix of work back in time proportional to the work
//! done.
//!
//! A schedule is a sequence of process ids; applying it yields an execution.
//! One schedule slot executes one pending operation: a `Read` feeds the
//! register value back into the program, a `Write` stores and acknowledges,
//! and a `Decide` marks the process done with its output bit. The engine is
//! single-threaded by contract — all concurrency in the modeled system is
//! expressed through schedules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Pid = usize;
pub type Value = u64;

/// A pending shared-memory operation, or the final decide step.
/// After a `Decide` executes, the process takes no further steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Read(usize),
    Write(usize, Value),
    Decide(u8),
}

/// What the previous operation returned: `Ack` for a write, the register
/// contents (or bottom) for a read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Response {
    Ack,
    Value(Option<Value>),
}

/// Result of one program transition: the next pending operation, or
/// completion without a decide step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    Continue(Action),
    Halt,
}

/// A deterministic process program. Implementations are state machines:
/// `first_action` yields the initial pending operation, and each
/// `on_response` consumes the response of the executed operation and
/// produces the next one. Oracle queries made inside a transition are added
/// to `queries` so the engine can attribute them to the process.
pub trait ProcessProgram {
    fn first_action(&mut self) -> Action;

    fn on_response(&mut self, response: Response, queries: &mut u64) -> Result<Transition>;

    /// Upper bound on the schedule slots this program needs to complete;
    /// running solo it reaches completion within this many steps.
    fn step_bound(&self) -> u64;

    /// Protocol-level metadata surfaced in outcomes (e.g. the value the
    /// agreement rounds converged to), if the program exposes any.
    fn agreement_value(&self) -> Option<u64> {
        None
    }

    fn clone_box(&self) -> Box<dyn ProcessProgram>;

    /// Canonical encoding of the local state, used for configuration
    /// equality in tests and undo verification.
    fn state_words(&self) -> Vec<u64>;
}

impl Clone for Box<dyn ProcessProgram> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

/// Whether a process still has a pending operation, and if not, what it
/// decided. `Done(None)` marks programs that complete without a decide step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessStatus {
    Pending(Action),
    Done(Option<u8>),
}

#[derive(Clone)]
struct ProcessCell {
    program: Box<dyn ProcessProgram>,
    status: ProcessStatus,
}

/// Global system snapshot: per-process state and pending operation, plus
/// register contents. Equality compares registers, statuses, and each
/// program's canonical state encoding.
#[derive(Clone)]
pub struct Configuration {
    cells: Vec<ProcessCell>,
    registers: Vec<Option<Value>>,
}

impl Configuration {
    pub fn num_processes(&self) -> usize {
        self.cells.len()
    }

    pub fn registers(&self) -> &[Option<Value>] {
        &self.registers
    }

    pub fn status(&self, pid: Pid) -> ProcessStatus {
        self.cells[pid].status
    }

    pub fn is_done(&self, pid: Pid) -> bool {
        matches!(self.cells[pid].status, ProcessStatus::Done(_))
    }

    pub fn decision(&self, pid: Pid) -> Option<u8> {
        match self.cells[pid].status {
            ProcessStatus::Done(d) => d,
            ProcessStatus::Pending(_) => None,
        }
    }

    pub fn agreement_value(&self, pid: Pid) -> Option<u64> {
        self.cells[pid].program.agreement_value()
    }
}

impl PartialEq for Configuration {
    fn eq(&self, other: &Self) -> bool {
        self.registers == other.registers
            && self.cells.len() == other.cells.len()
            && self.cells.iter().zip(&other.cells).all(|(a, b)| {
                a.status == b.status && a.program.state_words() == b.program.state_words()
            })
    }
}

impl std::fmt::Debug for Configuration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Configuration")
            .field("registers", &self.registers)
            .field(
                "processes",
                &self
                    .cells
                    .iter()
                    .map(|c| (c.status, c.program.state_words()))
                    .collect::<Vec<_>>(),
            )
            .finish()
    }
}

/// Reversal records for in-place simulation; popping them in reverse order
/// restores the exact prior configuration.
#[derive(Default)]
pub struct UndoLog {
    records: Vec<UndoRecord>,
}

struct UndoRecord {
    pid: Pid,
    prev_program: Box<dyn ProcessProgram>,
    prev_status: ProcessStatus,
    register: Option<(usize, Option<Value>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UndoMark(usize);

impl UndoLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Per-process cost meters: program transitions executed and oracle queries
/// made inside them. Meters are cumulative over everything the engine ever
/// simulated — rollback restores state, never cost.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct ExecMeter {
    pub transitions: u64,
    pub oracle_queries: u64,
}

/// The step engine: a configuration, its undo log, and cost meters.
pub struct Simulator {
    config: Configuration,
    undo: UndoLog,
    meters: Vec<ExecMeter>,
}

impl Simulator {
    /// Build the initial configuration: every register holds bottom and each
    /// program's first pending operation is computed (one transition each).
    pub fn new(programs: Vec<Box<dyn ProcessProgram>>, num_registers: usize) -> Self {
        let mut meters = vec![ExecMeter::default(); programs.len()];
        let cells = programs
            .into_iter()
            .zip(&mut meters)
            .map(|(mut program, meter)| {
                meter.transitions += 1;
                let first = program.first_action();
                ProcessCell {
                    program,
                    status: ProcessStatus::Pending(first),
                }
            })
            .collect();
        Simulator {
            config: Configuration {
                cells,
                registers: vec![None; num_registers],
            },
            undo: UndoLog::default(),
            meters,
        }
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn num_processes(&self) -> usize {
        self.config.num_processes()
    }

    pub fn meter(&self, pid: Pid) -> ExecMeter {
        self.meters[pid]
    }

    pub fn total_transitions(&self) -> u64 {
        self.meters.iter().map(|m| m.transitions).sum()
    }

    pub fn total_oracle_queries(&self) -> u64 {
        self.meters.iter().map(|m| m.oracle_queries).sum()
    }

    pub fn mark(&self) -> UndoMark {
        UndoMark(self.undo.records.len())
    }

    /// Pop reversal records until the log is back at `mark`.
    pub fn rollback_to(&mut self, mark: UndoMark) {
        while self.undo.records.len() > mark.0 {
            let rec = self.undo.records.pop().expect("record present");
            if let Some((index, old)) = rec.register {
                self.config.registers[index] = old;
            }
            let cell = &mut self.config.cells[rec.pid];
            cell.program = rec.prev_program;
            cell.status = rec.prev_status;
        }
    }

    fn check_pid(&self, pid: Pid) -> Result<()> {
        if pid >= self.config.cells.len() {
            return Err(Error::UnknownProcess { pid });
        }
        Ok(())
    }

    /// Execute `pid`'s pending operation and feed the response through its
    /// program. All mutations are recorded in the undo log.
    pub fn apply_step(&mut self, pid: Pid) -> Result<()> {
        self.check_pid(pid)?;
        let action = match self.config.cells[pid].status {
            ProcessStatus::Pending(a) => a,
            ProcessStatus::Done(_) => return Err(Error::AlreadyDone { pid }),
        };
        let prev_program = self.config.cells[pid].program.clone_box();
        let prev_status = self.config.cells[pid].status;

        let (response, register) = match action {
            Action::Read(index) => {
                let count = self.config.registers.len();
                let old = *self
                    .config
                    .registers
                    .get(index)
                    .ok_or(Error::RegisterRange { index, count })?;
                (Some(Response::Value(old)), None)
            }
            Action::Write(index, value) => {
                let count = self.config.registers.len();
                let old = *self
                    .config
                    .registers
                    .get(index)
                    .ok_or(Error::RegisterRange { index, count })?;
                self.config.registers[index] = Some(value);
                (Some(Response::Ack), Some((index, old)))
            }
            Action::Decide(bit) => {
                self.config.cells[pid].status = ProcessStatus::Done(Some(bit));
                (None, None)
            }
        };

        // Record before the transition runs, so an error mid-transition still
        // rolls back cleanly.
        self.undo.records.push(UndoRecord {
            pid,
            prev_program,
            prev_status,
            register,
        });

        if let Some(response) = response {
            let cell = &mut self.config.cells[pid];
            self.meters[pid].transitions += 1;
            let mut queries = 0u64;
            let next = cell.program.on_response(response, &mut queries);
            self.meters[pid].oracle_queries += queries;
            cell.status = match next? {
                Transition::Continue(a) => ProcessStatus::Pending(a),
                Transition::Halt => ProcessStatus::Done(None),
            };
        }
        Ok(())
    }

    /// The decision `pid` would reach running alone from here. Simulates the
    /// solo extension against the undo log and restores the configuration
    /// before returning.
    pub fn solo_decision(&mut self, pid: Pid) -> Result<u8> {
        self.check_pid(pid)?;
        if let ProcessStatus::Done(decision) = self.config.cells[pid].status {
            return decision.ok_or(Error::NoDecision { pid });
        }
        let bound = self.config.cells[pid].program.step_bound();
        let mark = self.mark();
        let result = self.run_solo(pid, bound);
        self.rollback_to(mark);
        result
    }

    fn run_solo(&mut self, pid: Pid, bound: u64) -> Result<u8> {
        let mut taken = 0u64;
        loop {
            if let ProcessStatus::Done(decision) = self.config.cells[pid].status {
                return decision.ok_or(Error::NoDecision { pid });
            }
            if taken >= bound {
                return Err(Error::WaitFreedomViolation { pid, bound });
            }
            self.apply_step(pid)?;
            taken += 1;
        }
    }
}

/// A sequence of process ids; the adversary's output and the simulator's
/// input. Serializes as a bare JSON array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule(pub Vec<Pid>);

impl Schedule {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// A solo schedule: `pid` repeated for its whole step bound.
    pub fn solo(pid: Pid, steps: u64) -> Self {
        Schedule(vec![pid; steps as usize])
    }

    /// A uniformly random interleaving in which process `pid` appears exactly
    /// `step_bounds[pid]` times, so every process can run to completion.
    pub fn random_full<R: rand::Rng + ?Sized>(step_bounds: &[u64], rng: &mut R) -> Self {
        use rand::seq::SliceRandom;
        let mut slots: Vec<Pid> = step_bounds
            .iter()
            .enumerate()
            .flat_map(|(pid, &b)| std::iter::repeat(pid).take(b as usize))
            .collect();
        slots.shuffle(rng);
        Schedule(slots)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Skip slots that address a completed process instead of erroring.
    pub lenient: bool,
}

/// What one process ended up with after a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcessOutcome {
    pub decided: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement_value: Option<u64>,
    pub steps: u64,
    pub transitions: u64,
    pub oracle_queries: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub outcomes: Vec<ProcessOutcome>,
    pub skipped_steps: u64,
}

/// Replay a schedule from the initial configuration. Deterministic: the
/// same programs and schedule produce the same outcomes and configuration.
pub fn run_schedule(
    programs: Vec<Box<dyn ProcessProgram>>,
    num_registers: usize,
    schedule: &Schedule,
    options: RunOptions,
) -> Result<(RunReport, Configuration)> {
    let mut sim = Simulator::new(programs, num_registers);
    let mut steps = vec![0u64; sim.num_processes()];
    let mut skipped = 0u64;
    for &pid in &schedule.0 {
        if pid >= sim.num_processes() {
            return Err(Error::UnknownProcess { pid });
        }
        if sim.config.is_done(pid) {
            if options.lenient {
                skipped += 1;
                continue;
            }
            return Err(Error::AlreadyDone { pid });
        }
        sim.apply_step(pid)?;
        steps[pid] += 1;
    }
    let outcomes = (0..sim.num_processes())
        .map(|pid| {
            let meter = sim.meter(pid);
            ProcessOutcome {
                decided: sim.config.is_done(pid),
                value: sim.config.decision(pid),
                agreement_value: sim.config.agreement_value(pid),
                steps: steps[pid],
                transitions: meter.transitions,
                oracle_queries: meter.oracle_queries,
            }
        })
        .collect();
    Ok((
        RunReport {
            outcomes,
            skipped_steps: skipped,
        },
        sim.config,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Test program: writes its input to register 0, reads register 1, then
    /// decides the low bit it read (or its own input on bottom).
    #[derive(Clone)]
    struct WriteReadDecide {
        input: u8,
        stage: u8,
    }

    impl WriteReadDecide {
        fn boxed(input: u8) -> Box<dyn ProcessProgram> {
            Box::new(WriteReadDecide { input, stage: 0 })
        }
    }

    impl ProcessProgram for WriteReadDecide {
        fn first_action(&mut self) -> Action {
            Action::Write(0, u64::from(self.input))
        }

        fn on_response(&mut self, response: Response, _queries: &mut u64) -> Result<Transition> {
            self.stage += 1;
            match (self.stage, response) {
                (1, Response::Ack) => Ok(Transition::Continue(Action::Read(1))),
                (2, Response::Value(v)) => {
                    let bit = v.map_or(self.input, |x| (x & 1) as u8);
                    Ok(Transition::Continue(Action::Decide(bit)))
                }
                other => Err(Error::ModelViolation(format!(
                    "unexpected transition {other:?}"
                ))),
            }
        }

        fn step_bound(&self) -> u64 {
            3
        }

        fn clone_box(&self) -> Box<dyn ProcessProgram> {
            Box::new(self.clone())
        }

        fn state_words(&self) -> Vec<u64> {
            vec![u64::from(self.input), u64::from(self.stage)]
        }
    }

    /// Writes one value to one register, then decides 0.
    #[derive(Clone)]
    struct OneWrite {
        reg: usize,
        val: u64,
        done: bool,
    }

    impl OneWrite {
        fn boxed(reg: usize, val: u64) -> Box<dyn ProcessProgram> {
            Box::new(OneWrite {
                reg,
                val,
                done: false,
            })
        }
    }

    impl ProcessProgram for OneWrite {
        fn first_action(&mut self) -> Action {
            Action::Write(self.reg, self.val)
        }

        fn on_response(&mut self, _: Response, _: &mut u64) -> Result<Transition> {
            self.done = true;
            Ok(Transition::Continue(Action::Decide(0)))
        }

        fn step_bound(&self) -> u64 {
            2
        }

        fn clone_box(&self) -> Box<dyn ProcessProgram> {
            Box::new(self.clone())
        }

        fn state_words(&self) -> Vec<u64> {
            vec![u64::from(self.done)]
        }
    }

    /// Loops on reads forever; exercises the wait-freedom guard.
    #[derive(Clone)]
    struct Spinner;

    impl ProcessProgram for Spinner {
        fn first_action(&mut self) -> Action {
            Action::Read(0)
        }

        fn on_response(&mut self, _: Response, _: &mut u64) -> Result<Transition> {
            Ok(Transition::Continue(Action::Read(0)))
        }

        fn step_bound(&self) -> u64 {
            4
        }

        fn clone_box(&self) -> Box<dyn ProcessProgram> {
            Box::new(self.clone())
        }

        fn state_words(&self) -> Vec<u64> {
            vec![]
        }
    }

    #[test]
    fn reader_observes_written_value() {
        let writer = OneWrite::boxed(1, 7);
        let reader = WriteReadDecide::boxed(0);
        let mut sim = Simulator::new(vec![reader, writer], 2);
        sim.apply_step(1).unwrap(); // p1 writes 7 to r1
        sim.apply_step(0).unwrap(); // p0 writes its input to r0
        sim.apply_step(0).unwrap(); // p0 reads r1 -> 7
        sim.apply_step(0).unwrap(); // p0 decides 7 & 1
        assert_eq!(sim.config().decision(0), Some(1));
        assert_eq!(sim.config().registers()[1], Some(7));
    }

    #[test]
    fn step_then_rollback_restores_configuration() {
        let mut sim = Simulator::new(
            vec![WriteReadDecide::boxed(0), WriteReadDecide::boxed(1)],
            2,
        );
        let before = sim.config().clone();
        let mark = sim.mark();
        sim.apply_step(0).unwrap();
        sim.apply_step(1).unwrap();
        sim.apply_step(0).unwrap();
        assert_ne!(&before, sim.config());
        sim.rollback_to(mark);
        assert_eq!(&before, sim.config());
        assert!(sim.undo.is_empty());
    }

    #[test]
    fn writes_to_distinct_registers_commute() {
        let mk = || vec![OneWrite::boxed(0, 3), OneWrite::boxed(1, 5)];
        let mut a = Simulator::new(mk(), 2);
        a.apply_step(0).unwrap();
        a.apply_step(1).unwrap();
        let mut b = Simulator::new(mk(), 2);
        b.apply_step(1).unwrap();
        b.apply_step(0).unwrap();
        assert_eq!(a.config(), b.config());
    }

    #[test]
    fn stepping_done_process_errors() {
        let mut sim = Simulator::new(vec![WriteReadDecide::boxed(1)], 2);
        for _ in 0..3 {
            sim.apply_step(0).unwrap();
        }
        assert!(sim.config().is_done(0));
        assert!(matches!(
            sim.apply_step(0),
            Err(Error::AlreadyDone { pid: 0 })
        ));
    }

    #[test]
    fn empty_schedule_leaves_everything_undecided() {
        let (report, config) = run_schedule(
            vec![WriteReadDecide::boxed(0), WriteReadDecide::boxed(1)],
            2,
            &Schedule(vec![]),
            RunOptions::default(),
        )
        .unwrap();
        assert!(report.outcomes.iter().all(|o| !o.decided && o.steps == 0));
        assert!(config.registers().iter().all(Option::is_none));
    }

    #[test]
    fn lenient_mode_skips_done_processes() {
        let schedule = Schedule(vec![0, 0, 0, 0, 0]);
        let err = run_schedule(
            vec![WriteReadDecide::boxed(1)],
            2,
            &schedule,
            RunOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::AlreadyDone { pid: 0 }));

        let (report, _) = run_schedule(
            vec![WriteReadDecide::boxed(1)],
            2,
            &schedule,
            RunOptions { lenient: true },
        )
        .unwrap();
        assert_eq!(report.skipped_steps, 2);
        assert_eq!(report.outcomes[0].steps, 3);
        assert!(report.outcomes[0].decided);
    }

    #[test]
    fn solo_decision_restores_and_meters() {
        let mut sim = Simulator::new(
            vec![WriteReadDecide::boxed(1), WriteReadDecide::boxed(0)],
            2,
        );
        let before = sim.config().clone();
        let t0 = sim.total_transitions();
        let d = sim.solo_decision(0).unwrap();
        assert_eq!(d, 1); // reads bottom from r1, decides own input
        assert_eq!(&before, sim.config());
        // Cost of the solo run stays on the meter after rollback.
        assert!(sim.total_transitions() > t0);
        // A decided process reports its decision directly.
        sim.apply_step(0).unwrap();
        sim.apply_step(0).unwrap();
        sim.apply_step(0).unwrap();
        assert_eq!(sim.solo_decision(0).unwrap(), 1);
    }

    #[test]
    fn wait_freedom_guard_trips() {
        let mut sim = Simulator::new(vec![Box::new(Spinner)], 1);
        let err = sim.solo_decision(0).unwrap_err();
        assert!(matches!(
            err,
            Error::WaitFreedomViolation { pid: 0, bound: 4 }
        ));
    }

    #[test]
    fn unknown_pid_is_rejected() {
        let mut sim = Simulator::new(vec![WriteReadDecide::boxed(0)], 1);
        assert!(matches!(
            sim.apply_step(3),
            Err(Error::UnknownProcess { pid: 3 })
        ));
        let err = run_schedule(
            vec![WriteReadDecide::boxed(0)],
            1,
            &Schedule(vec![2]),
            RunOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownProcess { pid: 2 }));
    }

    #[test]
    fn register_bounds_checked() {
        #[derive(Clone)]
        struct BadReg;
        impl ProcessProgram for BadReg {
            fn first_action(&mut self) -> Action {
                Action::Read(9)
            }
            fn on_response(&mut self, _: Response, _: &mut u64) -> Result<Transition> {
                Ok(Transition::Halt)
            }
            fn step_bound(&self) -> u64 {
                1
            }
            fn clone_box(&self) -> Box<dyn ProcessProgram> {
                Box::new(self.clone())
            }
            fn state_words(&self) -> Vec<u64> {
                vec![]
            }
        }
        let mut sim = Simulator::new(vec![Box::new(BadReg)], 2);
        assert!(matches!(
            sim.apply_step(0),
            Err(Error::RegisterRange { index: 9, count: 2 })
        ));
    }
}
