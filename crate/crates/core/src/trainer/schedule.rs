use serde::{Deserialize, Serialize};

/// Reduce-on-plateau learning rate schedule.
///
/// Every epoch reports one validation score. A score counts as an
/// improvement only if it is strictly better than the best so far; after
/// `patience` consecutive epochs without improvement the rate is multiplied
/// by `factor` and the counter restarts. Training ends once the rate drops
/// below `min_lr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    lr: f64,
    factor: f64,
    patience: usize,
    min_lr: f64,
    higher_is_better: bool,
    best: Option<f64>,
    stale: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "event", content = "lr")]
pub enum ScheduleEvent {
    Improved,
    Stagnated,
    Decayed(f64),
    Stop,
}

impl LrSchedule {
    pub fn new(lr: f64, factor: f64, patience: usize, min_lr: f64, higher_is_better: bool) -> Self {
        Self {
            lr,
            factor,
            patience,
            min_lr,
            higher_is_better,
            best: None,
            stale: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    fn better(&self, score: f64) -> bool {
        match self.best {
            None => true,
            Some(b) if self.higher_is_better => score > b,
            Some(b) => score < b,
        }
    }

    /// Feeds one epoch's validation score.
    pub fn observe(&mut self, score: f64) -> ScheduleEvent {
        if self.better(score) {
            self.best = Some(score);
            self.stale = 0;
            return ScheduleEvent::Improved;
        }
        self.stale += 1;
        if self.stale < self.patience {
            return ScheduleEvent::Stagnated;
        }
        self.stale = 0;
        self.lr *= self.factor;
        if self.lr < self.min_lr {
            ScheduleEvent::Stop
        } else {
            ScheduleEvent::Decayed(self.lr)
        }
    }
}
