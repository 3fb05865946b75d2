//! The s-round two-slot approximate-agreement procedure and the consensus
//! wrapper that decides by feeding the agreed value into a decision function.
//!
//! Each round uses a pair of registers, one for even and one for odd values.
//! A process writes its current value to the slot matching the value's
//! parity, reads the opposite slot, and either doubles its value (nothing
//! opposite) or adopts the sum (the midpoint, tracked as an integer
//! numerator that scales by two per round). After `s` rounds all values
//! land in a width-one interval `{v, v+1}` with `0 <= v <= 2^s - 1`; a solo
//! run with input `b` ends at `2^s * b`.
//!
//! The consensus variant takes one extra schedule slot: the transition after
//! the last read evaluates the decision function and the final slot performs
//! the decide. The agreement value itself is surfaced as outcome metadata so
//! harnesses can extract it without any decision function running.

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::memory::{Action, ProcessProgram, Response, Transition};
use crate::oracle::RandomOracle;
use crate::threshold::{self, ThresholdObfuscation};

/// Evaluator `i -> bit` over `0..=ell`, with `f(0) = 0` and `f(ell) = 1`
/// (validity requires both ends). Entry 0 is never probed; the wrapper
/// treats it as a known 0.
pub enum DecisionFunction {
    PlainThreshold {
        threshold: u64,
        ell: u64,
    },
    Obfuscated {
        obf: ThresholdObfuscation,
        oracle: RefCell<RandomOracle>,
    },
}

impl DecisionFunction {
    pub fn plain(threshold: u64, ell: u64) -> Result<Self> {
        if ell < 2 || threshold == 0 || threshold >= ell {
            return Err(Error::InvalidParams(format!(
                "plain threshold {threshold} outside 0 < T < {ell}"
            )));
        }
        Ok(DecisionFunction::PlainThreshold { threshold, ell })
    }

    pub fn obfuscated(obf: ThresholdObfuscation, oracle: RandomOracle) -> Result<Self> {
        if oracle.width() != obf.m {
            return Err(Error::InvalidParams(format!(
                "oracle width {} does not match obfuscation m = {}",
                oracle.width(),
                obf.m
            )));
        }
        Ok(DecisionFunction::Obfuscated {
            obf,
            oracle: RefCell::new(oracle),
        })
    }

    pub fn ell(&self) -> u64 {
        match self {
            DecisionFunction::PlainThreshold { ell, .. } => *ell,
            DecisionFunction::Obfuscated { obf, .. } => obf.ell,
        }
    }

    /// Evaluate at `i`, adding any oracle queries spent to `queries`.
    pub fn eval(&self, i: u64, queries: &mut u64) -> Result<u8> {
        if i > self.ell() {
            return Err(Error::Domain { i, ell: self.ell() });
        }
        if i == 0 {
            return Ok(0);
        }
        match self {
            DecisionFunction::PlainThreshold { threshold, ell } => {
                threshold::threshold_eval(*threshold, *ell, i)
            }
            DecisionFunction::Obfuscated { obf, oracle } => {
                let mut oracle = oracle.borrow_mut();
                let before = oracle.query_count();
                let bit = threshold::probe(obf, i, &mut oracle)?;
                *queries += oracle.query_count() - before;
                Ok(bit)
            }
        }
    }

    /// Total queries ever made on the owned oracle (0 for the plain backend).
    pub fn oracle_query_count(&self) -> u64 {
        match self {
            DecisionFunction::PlainThreshold { .. } => 0,
            DecisionFunction::Obfuscated { oracle, .. } => oracle.borrow().query_count(),
        }
    }
}

/// Registers for an `s`-round instance: rounds are laid out as
/// `(round-1)*2 + parity`.
pub fn register_count(s: u32) -> usize {
    2 * s as usize
}

fn slot(round: u32, value: u64) -> usize {
    (round as usize - 1) * 2 + (value % 2) as usize
}

fn opposite_slot(round: u32, value: u64) -> usize {
    (round as usize - 1) * 2 + ((value + 1) % 2) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Await {
    WriteAck,
    ReadValue,
}

/// The agreement state machine; with a decision function attached it is the
/// full consensus program, without one it halts after the last round and
/// only exposes the agreement value.
#[derive(Clone)]
pub struct AgreementProgram {
    rounds: u32,
    round: u32,
    value: u64,
    awaiting: Await,
    final_value: Option<u64>,
    decision: Option<Rc<DecisionFunction>>,
}

impl AgreementProgram {
    fn new(input: u8, s: u32, decision: Option<Rc<DecisionFunction>>) -> Result<Self> {
        if input > 1 {
            return Err(Error::InvalidParams(format!(
                "consensus input {input} is not a bit"
            )));
        }
        if s == 0 || s > 32 {
            return Err(Error::InvalidParams(format!(
                "round count {s} outside 1..=32"
            )));
        }
        if let Some(f) = &decision {
            if f.ell() != 1u64 << s {
                return Err(Error::InvalidParams(format!(
                    "decision function domain {} does not equal 2^{s}",
                    f.ell()
                )));
            }
        }
        Ok(AgreementProgram {
            rounds: s,
            round: 1,
            value: u64::from(input),
            awaiting: Await::WriteAck,
            final_value: None,
            decision,
        })
    }
}

impl ProcessProgram for AgreementProgram {
    fn first_action(&mut self) -> Action {
        Action::Write(slot(1, self.value), self.value)
    }

    fn on_response(&mut self, response: Response, queries: &mut u64) -> Result<Transition> {
        match (self.awaiting, response) {
            (Await::WriteAck, Response::Ack) => {
                self.awaiting = Await::ReadValue;
                Ok(Transition::Continue(Action::Read(opposite_slot(
                    self.round, self.value,
                ))))
            }
            (Await::ReadValue, Response::Value(seen)) => {
                self.value = match seen {
                    None => 2 * self.value,
                    Some(other) => self.value + other,
                };
                self.round += 1;
                if self.round <= self.rounds {
                    self.awaiting = Await::WriteAck;
                    return Ok(Transition::Continue(Action::Write(
                        slot(self.round, self.value),
                        self.value,
                    )));
                }
                self.final_value = Some(self.value);
                match &self.decision {
                    None => Ok(Transition::Halt),
                    Some(f) => {
                        let bit = f.eval(self.value, queries)?;
                        Ok(Transition::Continue(Action::Decide(bit)))
                    }
                }
            }
            (awaiting, response) => Err(Error::ModelViolation(format!(
                "agreement program expected {awaiting:?}, got {response:?}"
            ))),
        }
    }

    fn step_bound(&self) -> u64 {
        let shared = 2 * u64::from(self.rounds);
        if self.decision.is_some() {
            shared + 1
        } else {
            shared
        }
    }

    fn agreement_value(&self) -> Option<u64> {
        self.final_value
    }

    fn clone_box(&self) -> Box<dyn ProcessProgram> {
        Box::new(self.clone())
    }

    fn state_words(&self) -> Vec<u64> {
        vec![
            u64::from(self.rounds),
            u64::from(self.round),
            self.value,
            match self.awaiting {
                Await::WriteAck => 0,
                Await::ReadValue => 1,
            },
            self.final_value.map_or(u64::MAX, |v| v),
        ]
    }
}

/// The bare agreement rounds: 2s schedule slots, no decide step; the final
/// value is exposed as outcome metadata.
pub fn make_approx_agreement_program(input: u8, s: u32) -> Result<AgreementProgram> {
    AgreementProgram::new(input, s, None)
}

/// Agreement rounds plus the decision step: 2s+1 schedule slots, deciding
/// `f(value)`. Oracle queries made by `f` are metered against the process.
pub fn make_obfuscated_consensus_program(
    input: u8,
    f: Rc<DecisionFunction>,
    s: u32,
) -> Result<AgreementProgram> {
    AgreementProgram::new(input, s, Some(f))
}

pub fn approx_programs(inputs: &[u8], s: u32) -> Result<Vec<Box<dyn ProcessProgram>>> {
    inputs
        .iter()
        .map(|&b| Ok(Box::new(make_approx_agreement_program(b, s)?) as Box<dyn ProcessProgram>))
        .collect()
}

pub fn consensus_programs(
    inputs: &[u8],
    f: &Rc<DecisionFunction>,
    s: u32,
) -> Result<Vec<Box<dyn ProcessProgram>>> {
    inputs
        .iter()
        .map(|&b| {
            Ok(Box::new(make_obfuscated_consensus_program(b, f.clone(), s)?)
                as Box<dyn ProcessProgram>)
        })
        .collect()
}

/// Visit every interleaving of the two bare agreement programs' shared
/// steps (inputs 0 and 1), calling `visit` with the pair of final values.
/// Runs as a depth-first search over one simulator, undoing each branch, so
/// the whole `C(4s, 2s)`-leaf tree costs one step per tree edge.
pub fn for_each_two_process_interleaving(
    s: u32,
    visit: &mut impl FnMut(u64, u64),
) -> Result<()> {
    let programs = approx_programs(&[0, 1], s)?;
    let mut sim = crate::memory::Simulator::new(programs, register_count(s));
    let per_process = 2 * u64::from(s);
    explore(&mut sim, [per_process, per_process], visit)
}

fn explore(
    sim: &mut crate::memory::Simulator,
    remaining: [u64; 2],
    visit: &mut impl FnMut(u64, u64),
) -> Result<()> {
    if remaining == [0, 0] {
        let a = sim.config().agreement_value(0).ok_or_else(|| {
            Error::ModelViolation("process 0 did not finish its rounds".into())
        })?;
        let b = sim.config().agreement_value(1).ok_or_else(|| {
            Error::ModelViolation("process 1 did not finish its rounds".into())
        })?;
        visit(a, b);
        return Ok(());
    }
    for pid in 0..2usize {
        if remaining[pid] == 0 {
            continue;
        }
        let mut next = remaining;
        next[pid] -= 1;
        let mark = sim.mark();
        sim.apply_step(pid)?;
        explore(sim, next, visit)?;
        sim.rollback_to(mark);
    }
    Ok(())
}
