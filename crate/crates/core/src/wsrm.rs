//! Interchangeable weighted-sum-rate solvers used by the evaluation harness
//! and the fairness scheduler.

use crate::error::Result;
use crate::fplinq;
use crate::netgen::NetworkInstance;
use crate::psolver::{self, StepSchedule};
use crate::rates::PowerAllocation;

#[derive(Debug, Clone, PartialEq)]
pub enum WsrmSolver {
    /// Primal-dual iteration with the given schedule and initial power level.
    Unfolded {
        schedule: StepSchedule,
        x0: f64,
    },
    Fplinq {
        iters: usize,
    },
}

impl WsrmSolver {
    pub fn unfolded(schedule: StepSchedule) -> Self {
        Self::Unfolded {
            schedule,
            x0: psolver::DEFAULT_X0,
        }
    }

    pub fn fplinq_default() -> Self {
        Self::Fplinq {
            iters: fplinq::DEFAULT_ITERS,
        }
    }

    pub fn solve(&self, net: &NetworkInstance, w: &[f64]) -> Result<PowerAllocation> {
        match self {
            Self::Unfolded { schedule, x0 } => psolver::solve(net, w, schedule, *x0),
            Self::Fplinq { iters } => fplinq::fplinq(net, w, *iters),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Unfolded { .. } => "luva",
            Self::Fplinq { .. } => "fplinq",
        }
    }
}
