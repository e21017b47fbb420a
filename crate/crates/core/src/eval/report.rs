use std::fmt::Write as _;

/// Named scalar results of one evaluation task. Metrics are kept in
/// insertion order; an absent metric is written as `NA`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub task: String,
    pub seed: u64,
    pub config_digest: String,
    pub metrics: Vec<(String, Option<f64>)>,
}

impl MetricsReport {
    pub fn new(task: impl Into<String>, seed: u64, config_digest: impl Into<String>) -> Self {
        Self {
            task: task.into(),
            seed,
            config_digest: config_digest.into(),
            metrics: Vec::new(),
        }
    }

    /// Non-finite values are recorded as absent.
    pub fn push(&mut self, name: impl Into<String>, value: Option<f64>) -> &mut Self {
        self.metrics.push((name.into(), value.filter(|v| v.is_finite())));
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).and_then(|(_, v)| *v)
    }

    fn cells(&self) -> Vec<(String, String)> {
        let mut cells = vec![
            ("task".to_string(), self.task.clone()),
            ("seed".to_string(), self.seed.to_string()),
            ("config_digest".to_string(), self.config_digest.clone()),
        ];
        for (name, value) in &self.metrics {
            let text = value.map_or_else(|| "NA".to_string(), |v| v.to_string());
            cells.push((name.clone(), text));
        }
        cells
    }

    /// `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.cells() {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    /// Header line and one data row.
    pub fn to_csv(&self) -> String {
        let (keys, values): (Vec<String>, Vec<String>) = self.cells().into_iter().unzip();
        format!("{}\n{}\n", keys.join(","), values.join(","))
    }
}
