use std::time::{Duration, Instant};

/// Time and memory limits for one engine run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub timeout: Duration,
    /// Best-effort: compared against the solvers' own allocation accounting.
    pub mem_bytes: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            timeout: Duration::from_secs(300),
            mem_bytes: 1 << 30,
        }
    }
}

impl Limits {
    pub fn new(timeout: Duration, mem_bytes: u64) -> Limits {
        Limits { timeout, mem_bytes }
    }

    /// Starts the clock.
    pub fn start(&self) -> Budget {
        Budget {
            deadline: Instant::now().checked_add(self.timeout),
            mem_bytes: self.mem_bytes,
        }
    }
}

/// A running budget: an absolute deadline and a memory ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    deadline: Option<Instant>,
    mem_bytes: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget::unlimited()
    }
}

impl Budget {
    pub fn unlimited() -> Budget {
        Budget {
            deadline: None,
            mem_bytes: u64::MAX,
        }
    }

    pub fn timed_out(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    pub fn over_memory(&self, used: u64) -> bool {
        used > self.mem_bytes
    }

    pub fn mem_bytes(&self) -> u64 {
        self.mem_bytes
    }
}
