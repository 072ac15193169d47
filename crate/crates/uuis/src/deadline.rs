use std::time::{Duration, Instant};

use uuis_core::search::Deadline;

/// Wall-clock query budget. `row_delay` slows every scanned row down and
/// exists for timing tests.
#[derive(Clone, Copy, Debug)]
pub struct WallDeadline {
    ends: Instant,
    row_delay: Option<Duration>,
}

impl WallDeadline {
    pub fn after(budget: Duration) -> Self {
        WallDeadline { ends: Instant::now() + budget, row_delay: None }
    }

    pub fn with_row_delay(mut self, delay: Option<Duration>) -> Self {
        self.row_delay = delay;
        self
    }
}

impl Deadline for WallDeadline {
    fn expired(&mut self) -> bool {
        if Instant::now() >= self.ends {
            return true;
        }
        if let Some(d) = self.row_delay {
            std::thread::sleep(d.min(self.ends.saturating_duration_since(Instant::now())));
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expires_after_budget() {
        let mut d = WallDeadline::after(Duration::from_millis(20)).with_row_delay(Some(Duration::from_millis(500)));
        let t = Instant::now();
        let mut polls = 0;
        while !d.expired() {
            polls += 1;
        }
        assert!(polls >= 1);
        assert!(t.elapsed() < Duration::from_millis(200));
    }
}
