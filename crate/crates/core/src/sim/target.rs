//! Deterministic fluid-queue model of the protest target.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetState {
    Up,
    Degraded,
    Down,
}

impl fmt::Display for TargetState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TargetState::Up => "up",
            TargetState::Degraded => "degraded",
            TargetState::Down => "down",
        })
    }
}

impl FromStr for TargetState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "up" => Ok(TargetState::Up),
            "degraded" => Ok(TargetState::Degraded),
            "down" => Ok(TargetState::Down),
            _ => Err(format!("unknown target state `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub arrivals: u64,
    pub served: u64,
    pub dropped: u64,
    pub queue: u64,
    pub state: TargetState,
}

/// Serves `capacity` requests per tick from a FIFO bounded at `queue_max`.
///
/// The target goes down when the queue fills and stays down until it
/// drains below half; otherwise it is degraded whenever anything is left
/// waiting at the end of a tick.
#[derive(Debug, Clone)]
pub struct TargetModel {
    capacity: u64,
    queue_max: u64,
    queue: u64,
    state: TargetState,
}

impl TargetModel {
    pub fn new(capacity: u64, queue_max: u64) -> Self {
        assert!(capacity > 0 && queue_max > 0);
        TargetModel {
            capacity,
            queue_max,
            queue: 0,
            state: TargetState::Up,
        }
    }

    pub fn state(&self) -> TargetState {
        self.state
    }

    pub fn queue(&self) -> u64 {
        self.queue
    }

    pub fn is_idle(&self) -> bool {
        self.queue == 0 && self.state == TargetState::Up
    }

    pub fn step(&mut self, arrivals: u64) -> StepOutcome {
        let total = self.queue + arrivals;
        let served = total.min(self.capacity);
        let left = total - served;
        let dropped = left.saturating_sub(self.queue_max);
        self.queue = left - dropped;
        let stays_down = self.state == TargetState::Down && self.queue * 2 >= self.queue_max;
        self.state = if self.queue >= self.queue_max || stays_down {
            TargetState::Down
        } else if self.queue > 0 {
            TargetState::Degraded
        } else {
            TargetState::Up
        };
        StepOutcome {
            arrivals,
            served,
            dropped,
            queue: self.queue,
            state: self.state,
        }
    }
}
