//! The scheduling adversary: constructs an agreement-violating schedule by
//! keeping two processes' solo preferences in disagreement, one appended
//! block at a time.
//!
//! Writing `pref(C, p)` for the decision `p` reaches running alone from `C`,
//! each iteration inspects the two pending operations and takes the first
//! case that holds:
//!
//! * (a) the other process's preference survives stepping `p` — append `p`;
//! * (b) symmetrically for `q` — append `q`;
//! * (c) otherwise both pending operations are writes to distinct registers
//!   and applying both flips both preferences — append `p` then `q`.
//!
//! A process's own step never changes its own preference, and the values the
//! failed case tests computed are exactly the flipped preferences case (c)
//! leaves behind, so each iteration costs at most two solo simulations. All
//! solo simulations run in place against the undo log.

use std::rc::Rc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::memory::{run_schedule, Pid, ProcessProgram, RunOptions, Schedule, Simulator};
use crate::protocol::{
    make_approx_agreement_program, make_obfuscated_consensus_program, register_count,
    DecisionFunction,
};

/// Which rule fired on one iteration of the adversary loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseTaken {
    #[serde(rename = "a")]
    StepFirst,
    #[serde(rename = "b")]
    StepSecond,
    #[serde(rename = "c")]
    StepBoth,
}

/// Preferences after the appended block; they disagree in every record.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IterationRecord {
    pub case: CaseTaken,
    pub pref_p: u8,
    pub pref_q: u8,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdversaryTrace {
    pub schedule: Schedule,
    /// Solo preferences in the initial configuration.
    pub initial_prefs: [u8; 2],
    pub iterations: Vec<IterationRecord>,
    /// Decisions the two processes reach when the schedule is replayed.
    pub decisions: [u8; 2],
    /// Program transitions executed across every simulation, undone or not.
    pub simulated_transitions: u64,
    /// Oracle queries spent across every simulation.
    pub oracle_queries: u64,
    /// Transition cost of the most expensive initial solo run; the time
    /// budget the cost bound is measured against.
    pub max_solo_cost: u64,
}

/// Compute a schedule under which the two programs decide differently.
/// The programs must be wait-free and prefer their own (opposite) inputs
/// when run alone from the initial configuration.
pub fn find_disagreement_schedule(
    first: Box<dyn ProcessProgram>,
    second: Box<dyn ProcessProgram>,
    num_registers: usize,
) -> Result<AdversaryTrace> {
    const P: Pid = 0;
    const Q: Pid = 1;
    let mut sim = Simulator::new(vec![first, second], num_registers);

    let before_p = sim.total_transitions();
    let pref_p0 = sim.solo_decision(P)?;
    let cost_p = sim.total_transitions() - before_p;
    let before_q = sim.total_transitions();
    let pref_q0 = sim.solo_decision(Q)?;
    let cost_q = sim.total_transitions() - before_q;
    let max_solo_cost = cost_p.max(cost_q);

    if pref_p0 == pref_q0 {
        return Err(Error::ModelViolation(format!(
            "initial configuration is not solo-bivalent: both prefer {pref_p0}"
        )));
    }

    let mut pref = [pref_p0, pref_q0];
    let mut schedule = Vec::new();
    let mut iterations = Vec::new();

    while !sim.config().is_done(P) && !sim.config().is_done(Q) {
        let mark = sim.mark();

        // Case a: q's preference survives p's step.
        sim.apply_step(P)?;
        let q_after_p = sim.solo_decision(Q)?;
        if q_after_p == pref[1] {
            schedule.push(P);
            iterations.push(IterationRecord {
                case: CaseTaken::StepFirst,
                pref_p: pref[0],
                pref_q: pref[1],
            });
            continue;
        }
        sim.rollback_to(mark);

        // Case b: p's preference survives q's step.
        sim.apply_step(Q)?;
        let p_after_q = sim.solo_decision(P)?;
        if p_after_q == pref[0] {
            schedule.push(Q);
            iterations.push(IterationRecord {
                case: CaseTaken::StepSecond,
                pref_p: pref[0],
                pref_q: pref[1],
            });
            continue;
        }
        sim.rollback_to(mark);

        // Case c: both tests failed, so both pending operations are writes
        // to distinct registers and applying both flips both preferences to
        // the values the failed tests already computed.
        sim.apply_step(P)?;
        sim.apply_step(Q)?;
        schedule.push(P);
        schedule.push(Q);
        pref = [p_after_q, q_after_p];
        debug_assert_ne!(pref[0], pref[1]);
        iterations.push(IterationRecord {
            case: CaseTaken::StepBoth,
            pref_p: pref[0],
            pref_q: pref[1],
        });
    }

    // One process decided; run the other to completion.
    let open = if sim.config().is_done(P) { Q } else { P };
    while !sim.config().is_done(open) {
        sim.apply_step(open)?;
        schedule.push(open);
    }

    let d_p = sim.config().decision(P).ok_or(Error::NoDecision { pid: P })?;
    let d_q = sim.config().decision(Q).ok_or(Error::NoDecision { pid: Q })?;
    if d_p == d_q {
        return Err(Error::ModelViolation(format!(
            "constructed schedule failed to split decisions: both decide {d_p}"
        )));
    }

    Ok(AdversaryTrace {
        schedule: Schedule(schedule),
        initial_prefs: [pref_p0, pref_q0],
        iterations,
        decisions: [d_p, d_q],
        simulated_transitions: sim.total_transitions(),
        oracle_queries: sim.total_oracle_queries(),
        max_solo_cost,
    })
}

/// A recovered crossing of the decision function, with the adversary cost
/// that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdExtraction {
    /// `v` with `f(v) = 0` and `f(v+1) = 1`.
    pub crossing: u64,
    pub trace: AdversaryTrace,
}

/// Turn a disagreement-finding run into a threshold crossing: build the
/// consensus protocol around `f` with opposite inputs, find a disagreement
/// schedule, then replay it on the bare agreement programs (no decision
/// function runs) and return the smaller of the two agreement values.
pub fn extract_threshold_via_adversary(
    f: Rc<DecisionFunction>,
    s: u32,
) -> Result<ThresholdExtraction> {
    let p = make_obfuscated_consensus_program(0, f.clone(), s)?;
    let q = make_obfuscated_consensus_program(1, f, s)?;
    let trace = find_disagreement_schedule(Box::new(p), Box::new(q), register_count(s))?;

    let replay = vec![
        Box::new(make_approx_agreement_program(0, s)?) as Box<dyn ProcessProgram>,
        Box::new(make_approx_agreement_program(1, s)?) as Box<dyn ProcessProgram>,
    ];
    let (report, _) = run_schedule(
        replay,
        register_count(s),
        &trace.schedule,
        RunOptions { lenient: true },
    )?;
    let values: Vec<u64> = report
        .outcomes
        .iter()
        .map(|o| {
            o.agreement_value.ok_or_else(|| {
                Error::ModelViolation("replay did not finish the agreement rounds".into())
            })
        })
        .collect::<Result<_>>()?;
    Ok(ThresholdExtraction {
        crossing: values.iter().copied().min().expect("two processes"),
        trace,
    })
}
