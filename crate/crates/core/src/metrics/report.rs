use serde::Serialize;

/// Settings a report was computed with.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricParameters {
    pub sigma_cm: f64,
    pub tau_s: f64,
    /// `"uniform"` or the path of the weight file.
    pub clip_weights: String,
    pub feature_extractor: String,
    /// Where the reference beats for beat alignment came from.
    pub beat_reference: String,
    pub diversity_pairs: usize,
    pub seed: u64,
}

/// Evaluation results; metrics that could not be computed for the given
/// inputs are `None`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub fgd: Option<f64>,
    pub srgr: Option<f64>,
    pub beat_align: Option<f64>,
    pub diversity: Option<f64>,
    pub lad: Option<f64>,
    pub fad: Option<f64>,
    pub parameters: MetricParameters,
}
