/// Smallest decrease in a monitored loss that counts as an improvement.
pub const MIN_DELTA: f64 = 1e-8;

fn improves(best: Option<f64>, value: f64, min_delta: f64) -> bool {
    best.is_none_or(|b| value < b - min_delta)
}

/// Multiplies the learning rate by `factor` after `patience` consecutive
/// epochs without improvement in the monitored loss.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauSchedule {
    pub initial_lr: f64,
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    pub min_delta: f64,
    current_lr: f64,
    best: Option<f64>,
    since_improvement: usize,
    reductions: u32,
}

impl PlateauSchedule {
    pub fn new(initial_lr: f64, factor: f64, patience: usize) -> Self {
        Self {
            initial_lr,
            factor,
            patience,
            min_lr: 0.0,
            min_delta: MIN_DELTA,
            current_lr: initial_lr,
            best: None,
            since_improvement: 0,
            reductions: 0,
        }
    }

    pub fn with_min_lr(mut self, min_lr: f64) -> Self {
        self.min_lr = min_lr;
        self
    }

    pub fn current_lr(&self) -> f64 {
        self.current_lr
    }

    pub fn reductions(&self) -> u32 {
        self.reductions
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn epochs_since_improvement(&self) -> usize {
        self.since_improvement
    }

    /// Records one epoch's monitored loss and returns the learning rate for
    /// the next epoch.
    pub fn update(&mut self, loss: f64) -> f64 {
        if improves(self.best, loss, self.min_delta) {
            self.best = Some(loss);
            self.since_improvement = 0;
            return self.current_lr;
        }
        self.since_improvement += 1;
        if self.since_improvement >= self.patience && self.current_lr > self.min_lr {
            self.reductions += 1;
            self.current_lr = (self.initial_lr * self.factor.powi(self.reductions as i32)).max(self.min_lr);
            self.since_improvement = 0;
        }
        self.current_lr
    }
}

impl Default for PlateauSchedule {
    fn default() -> Self {
        Self::new(1e-3, 0.3, 5)
    }
}

/// Linear per-epoch ramp: `base * (epoch + 1) / warmup_epochs` during the
/// first `warmup_epochs` epochs, `base` afterwards.
pub fn warmup_schedule(base_lr: f64, warmup_epochs: usize, epoch: usize) -> f64 {
    if epoch >= warmup_epochs {
        base_lr
    } else {
        base_lr * (epoch + 1) as f64 / warmup_epochs as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopState {
    pub patience: usize,
    pub min_delta: f64,
    best: Option<f64>,
    since_improvement: usize,
    stopped: bool,
}

impl EarlyStopState {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            min_delta: MIN_DELTA,
            best: None,
            since_improvement: 0,
            stopped: false,
        }
    }

    pub fn stopped(&self) -> bool {
        self.stopped
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn epochs_since_improvement(&self) -> usize {
        self.since_improvement
    }

    /// Records one epoch's monitored loss; returns true once training should stop.
    pub fn update(&mut self, loss: f64) -> bool {
        if self.stopped {
            return true;
        }
        if improves(self.best, loss, self.min_delta) {
            self.best = Some(loss);
            self.since_improvement = 0;
        } else {
            self.since_improvement += 1;
        }
        self.stopped = self.since_improvement >= self.patience;
        self.stopped
    }
}

impl Default for EarlyStopState {
    fn default() -> Self {
        Self::new(20)
    }
}
