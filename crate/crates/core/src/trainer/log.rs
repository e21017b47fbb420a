use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct StepLog {
    /// 1-based across the whole run.
    pub step: usize,
    /// 1-based.
    pub epoch: usize,
    pub loss: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Non-zero `count(w, c)` entries after the epoch.
    pub table_entries: usize,
    pub vocabulary: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub steps: Vec<StepLog>,
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    /// `step,epoch,loss` with one row per step.
    pub fn steps_csv(&self) -> String {
        let mut out = String::from("step,epoch,loss\n");
        for s in &self.steps {
            let _ = writeln!(out, "{},{},{}", s.step, s.epoch, s.loss);
        }
        out
    }

    /// Per-epoch summary. Contains wall-clock times, so it differs between
    /// otherwise identical runs.
    pub fn epochs_csv(&self) -> String {
        let mut out = String::from("epoch,mean_loss,table_entries,vocabulary,seconds\n");
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.3}",
                e.epoch, e.mean_loss, e.table_entries, e.vocabulary, e.seconds
            );
        }
        out
    }
}
