//! Report artifacts: the JSON document, the CSV score table, the SVG bar
//! chart, and the text summary.
//!
//! Every artifact is a pure function of the report document, so equal
//! documents produce byte-identical files.

use serde::{Deserialize, Serialize};

use crate::dataset::{SchemaConfig, TaskKind};
use crate::error::{Error, Result};
use crate::importance::{
    FeatureScore, ImportanceMethod, ImportanceReport, MinipatchSummary,
};
use crate::learners::ModelSpec;
use crate::metrics::{BiasMetricKind, LossMetricKind};

/// Version of the report/CSV column schema.
pub const SCHEMA_VERSION: u32 = 1;

/// Synthetic dataset source parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSource {
    pub task: TaskKind,
    pub n_samples: usize,
    pub n_features: usize,
    pub seed: u64,
}

/// Minipatch geometry as configured (fractions) and as resolved (counts).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinipatchSettings {
    pub n_frac: f64,
    pub m_frac: f64,
    pub patch_count: usize,
    pub rows_per_patch: usize,
    pub features_per_patch: usize,
}

/// Fully resolved run configuration embedded in every artifact.
///
/// Re-running `importance --config <report.json>` with the same inputs
/// reproduces the scores bit-exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub data: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<SchemaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSource>,
    pub task: TaskKind,
    pub model: ModelSpec,
    pub method: ImportanceMethod,
    pub bias_metric: BiasMetricKind,
    pub loss_metric: LossMetricKind,
    pub repetitions: usize,
    pub refit: bool,
    pub in_sample: bool,
    pub split_fraction: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minipatch: Option<MinipatchSettings>,
    pub keep_protected_feature: bool,
}

/// The `report.json` document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub config: ResolvedConfig,
    pub model_accuracy: Option<f64>,
    pub model_fairness_dp_ratio: Option<f64>,
    pub baseline_bias: f64,
    pub baseline_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minipatch_outcome: Option<MinipatchSummary>,
    pub scores: Vec<FeatureScore>,
    pub warnings: Vec<String>,
}

impl ReportDocument {
    /// Combine a computed report with its resolved configuration.
    pub fn assemble(
        config: ResolvedConfig,
        report: ImportanceReport,
        extra_warnings: Vec<String>,
    ) -> Self {
        let mut warnings = extra_warnings;
        warnings.extend(report.warnings);
        ReportDocument {
            schema_version: SCHEMA_VERSION,
            config,
            model_accuracy: report.model_accuracy,
            model_fairness_dp_ratio: report.model_fairness_dp_ratio,
            baseline_bias: report.baseline_bias,
            baseline_loss: report.baseline_loss,
            minipatch_outcome: report.minipatch,
            scores: report.scores,
            warnings,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Document {
            kind: "report",
            reason: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// The `scores.csv` table: one row per feature, empty cells (never
    /// NaN) for flagged features.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,fairness_score,accuracy_score,flagged\n");
        for s in &self.scores {
            let fairness = s.fairness.map(|v| v.to_string()).unwrap_or_default();
            let accuracy = s.accuracy.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{}\n",
                csv_escape(&s.feature),
                fairness,
                accuracy,
                s.flagged
            ));
        }
        out
    }

    /// Human-readable run summary: headline metrics, the five features
    /// most harmful to fairness, and the five driving accuracy.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "method: {} | bias metric: {} | loss metric: {}\n",
            self.config.method,
            self.config.bias_metric.name(),
            self.config.loss_metric.name()
        ));
        match (self.model_accuracy, self.model_fairness_dp_ratio) {
            (Some(acc), Some(ratio)) => out.push_str(&format!(
                "model accuracy: {acc:.4} | model fairness (dp_ratio): {ratio:.4}\n"
            )),
            _ => out.push_str(&format!(
                "baseline bias: {:.6} | baseline loss: {:.6}\n",
                self.baseline_bias, self.baseline_loss
            )),
        }
        if let Some(mp) = &self.minipatch_outcome {
            out.push_str(&format!(
                "minipatches: {} retained, {} skipped of {} ({} rows x {} features each)\n",
                mp.retained, mp.skipped, mp.patch_count, mp.rows_per_patch, mp.features_per_patch
            ));
        }

        let mut by_fairness: Vec<&FeatureScore> =
            self.scores.iter().filter(|s| s.fairness.is_some()).collect();
        by_fairness.sort_by(|a, b| a.fairness.unwrap().total_cmp(&b.fairness.unwrap()));
        out.push_str("top bias-harming features (most negative fairness score):\n");
        for s in by_fairness.iter().take(5) {
            out.push_str(&format!("  {:<30} {:+.6}\n", s.feature, s.fairness.unwrap()));
        }

        let mut by_accuracy: Vec<&FeatureScore> =
            self.scores.iter().filter(|s| s.accuracy.is_some()).collect();
        by_accuracy.sort_by(|a, b| b.accuracy.unwrap().total_cmp(&a.accuracy.unwrap()));
        out.push_str("top accuracy-driving features (largest accuracy score):\n");
        for s in by_accuracy.iter().take(5) {
            out.push_str(&format!("  {:<30} {:+.6}\n", s.feature, s.accuracy.unwrap()));
        }

        let flagged = self.scores.iter().filter(|s| s.flagged).count();
        if flagged > 0 {
            out.push_str(&format!("flagged (undefined) features: {flagged}\n"));
        }
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }
}

fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

const BAR_HEIGHT: f64 = 12.0;
const BAR_GAP: f64 = 2.0;
const GROUP_GAP: f64 = 8.0;
const MARGIN_LEFT: f64 = 190.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 58.0;
const MARGIN_BOTTOM: f64 = 34.0;
const PLOT_WIDTH: f64 = 640.0;
const FAIRNESS_FILL: &str = "#4878a8";
const ACCURACY_FILL: &str = "#c0504d";

/// Render the horizontal bar chart for a report.
///
/// One fairness bar and one accuracy bar per feature, negative values
/// extending left of the zero axis; features ordered by fairness score
/// ascending with flagged features listed last. Element order is fixed,
/// so equal reports render byte-identical SVG.
pub fn render_chart(doc: &ReportDocument) -> String {
    let mut order: Vec<usize> = (0..doc.scores.len()).collect();
    order.sort_by(|&a, &b| {
        let sa = &doc.scores[a];
        let sb = &doc.scores[b];
        match (sa.fairness, sb.fairness) {
            (Some(fa), Some(fb)) => fa.total_cmp(&fb),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a.cmp(&b),
        }
    });

    let magnitude = doc
        .scores
        .iter()
        .flat_map(|s| [s.fairness, s.accuracy])
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let scale_max = if magnitude > 0.0 { magnitude * 1.05 } else { 1.0 };

    let group_height = 2.0 * BAR_HEIGHT + BAR_GAP + GROUP_GAP;
    let plot_height = group_height * doc.scores.len() as f64;
    let width = MARGIN_LEFT + PLOT_WIDTH + MARGIN_RIGHT;
    let height = MARGIN_TOP + plot_height + MARGIN_BOTTOM;
    let zero_x = MARGIN_LEFT + PLOT_WIDTH / 2.0;
    let x_of = |value: f64| zero_x + value / scale_max * (PLOT_WIDTH / 2.0);

    let mut svg = String::new();
    svg.push_str(&format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="monospace" font-size="11">"#
    ));
    svg.push('\n');
    svg.push_str(&format!(
        r##"<rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="#ffffff"/>"##
    ));
    svg.push('\n');
    svg.push_str(&format!(
        r#"<text x="{MARGIN_LEFT:.0}" y="18" font-size="13">feature importance ({})</text>"#,
        doc.config.method
    ));
    svg.push('\n');
    // legend
    svg.push_str(&format!(
        r#"<rect x="{MARGIN_LEFT:.0}" y="28" width="12" height="12" fill="{FAIRNESS_FILL}"/><text x="{:.0}" y="38">fairness ({})</text>"#,
        MARGIN_LEFT + 16.0,
        doc.config.bias_metric.name()
    ));
    svg.push('\n');
    svg.push_str(&format!(
        r#"<rect x="{:.0}" y="28" width="12" height="12" fill="{ACCURACY_FILL}"/><text x="{:.0}" y="38">accuracy ({})</text>"#,
        MARGIN_LEFT + 170.0,
        MARGIN_LEFT + 186.0,
        doc.config.loss_metric.name()
    ));
    svg.push('\n');
    svg.push_str(&format!(
        r##"<text x="{:.0}" y="50" fill="#555555">positive = improves fairness / accuracy; negative = harms</text>"##,
        MARGIN_LEFT
    ));
    svg.push('\n');

    for (slot, &idx) in order.iter().enumerate() {
        let s = &doc.scores[idx];
        let top = MARGIN_TOP + slot as f64 * group_height;
        let label_y = top + BAR_HEIGHT + BAR_GAP / 2.0 + 4.0;
        svg.push_str(&format!(
            r#"<text x="{:.2}" y="{label_y:.2}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 8.0,
            xml_escape(&s.feature)
        ));
        svg.push('\n');
        if s.flagged {
            svg.push_str(&format!(
                r##"<text x="{:.2}" y="{label_y:.2}" fill="#888888">undefined (raise patch count)</text>"##,
                zero_x + 6.0
            ));
            svg.push('\n');
            continue;
        }
        for (row, (value, fill)) in [
            (s.fairness, FAIRNESS_FILL),
            (s.accuracy, ACCURACY_FILL),
        ]
        .into_iter()
        .enumerate()
        {
            let Some(value) = value else { continue };
            let y = top + row as f64 * (BAR_HEIGHT + BAR_GAP);
            let (x0, x1) = if value >= 0.0 {
                (zero_x, x_of(value))
            } else {
                (x_of(value), zero_x)
            };
            svg.push_str(&format!(
                r#"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{BAR_HEIGHT:.0}" fill="{fill}"><title>{}: {value}</title></rect>"#,
                (x1 - x0).max(0.25),
                xml_escape(&s.feature),
            ));
            svg.push('\n');
        }
    }

    // zero axis and scale ticks
    let axis_bottom = MARGIN_TOP + plot_height + 4.0;
    svg.push_str(&format!(
        r##"<line x1="{zero_x:.2}" y1="{MARGIN_TOP:.0}" x2="{zero_x:.2}" y2="{axis_bottom:.2}" stroke="#333333" stroke-width="1"/>"##
    ));
    svg.push('\n');
    for (value, anchor) in [
        (-scale_max, "start"),
        (0.0, "middle"),
        (scale_max, "end"),
    ] {
        svg.push_str(&format!(
            r#"<text x="{:.2}" y="{:.2}" text-anchor="{anchor}">{value:.4}</text>"#,
            x_of(value),
            axis_bottom + 14.0
        ));
        svg.push('\n');
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc_with_scores(scores: Vec<FeatureScore>) -> ReportDocument {
        ReportDocument {
            schema_version: SCHEMA_VERSION,
            config: ResolvedConfig {
                data: None,
                schema: None,
                synthetic: Some(SyntheticSource {
                    task: TaskKind::Classification,
                    n_samples: 100,
                    n_features: scores.len(),
                    seed: 1,
                }),
                task: TaskKind::Classification,
                model: ModelSpec::random_forest(1),
                method: ImportanceMethod::OcclusionMinipatch,
                bias_metric: BiasMetricKind::DpComplementRatio,
                loss_metric: LossMetricKind::ClassificationError,
                repetitions: 1,
                refit: true,
                in_sample: false,
                split_fraction: 0.2,
                seed: 1,
                minipatch: None,
                keep_protected_feature: false,
            },
            model_accuracy: Some(0.9),
            model_fairness_dp_ratio: Some(0.8),
            baseline_bias: 0.2,
            baseline_loss: 0.1,
            minipatch_outcome: None,
            scores,
            warnings: vec![],
        }
    }

    fn two_feature_doc() -> ReportDocument {
        doc_with_scores(vec![
            FeatureScore {
                feature: "harmful".into(),
                fairness: Some(-0.2),
                accuracy: Some(0.05),
                flagged: false,
                stddev: None,
            },
            FeatureScore {
                feature: "helpful".into(),
                fairness: Some(0.1),
                accuracy: Some(-0.02),
                flagged: false,
                stddev: None,
            },
        ])
    }

    #[test]
    fn chart_has_left_and_right_bars() {
        let doc = two_feature_doc();
        let svg = render_chart(&doc);
        // zero axis at MARGIN_LEFT + PLOT_WIDTH/2 = 510
        let zero_x = 510.0;
        let mut left = 0;
        let mut right = 0;
        for line in svg.lines().filter(|l| l.contains("<rect") && l.contains("title")) {
            let x: f64 = attr(line, "x").parse().unwrap();
            let w: f64 = attr(line, "width").parse().unwrap();
            if (x + w - zero_x).abs() < 0.5 {
                left += 1; // bar ends at the axis -> extends left
            } else if (x - zero_x).abs() < 0.5 {
                right += 1; // bar starts at the axis -> extends right
            }
        }
        assert_eq!(left, 2, "fairness(-0.2) and accuracy(-0.02) extend left");
        assert_eq!(right, 2, "fairness(+0.1) and accuracy(+0.05) extend right");
    }

    fn attr<'a>(line: &'a str, name: &str) -> &'a str {
        let key = format!("{name}=\"");
        let start = line.find(&key).unwrap() + key.len();
        let end = line[start..].find('"').unwrap();
        &line[start..start + end]
    }

    #[test]
    fn chart_render_is_deterministic() {
        let doc = two_feature_doc();
        assert_eq!(render_chart(&doc), render_chart(&doc));
    }

    #[test]
    fn chart_orders_features_by_fairness_ascending() {
        let doc = two_feature_doc();
        let svg = render_chart(&doc);
        let pos_harmful = svg.find(">harmful<").unwrap();
        let pos_helpful = svg.find(">helpful<").unwrap();
        assert!(pos_harmful < pos_helpful);
    }

    #[test]
    fn csv_has_fixed_header_and_empty_cells_for_flags() {
        let doc = doc_with_scores(vec![
            FeatureScore {
                feature: "a".into(),
                fairness: Some(0.5),
                accuracy: Some(-0.25),
                flagged: false,
                stddev: None,
            },
            FeatureScore {
                feature: "b".into(),
                fairness: None,
                accuracy: None,
                flagged: true,
                stddev: None,
            },
        ]);
        let csv = doc.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "feature,fairness_score,accuracy_score,flagged");
        assert_eq!(lines[1], "a,0.5,-0.25,false");
        assert_eq!(lines[2], "b,,,true");
        assert!(!csv.contains("NaN"));
    }

    #[test]
    fn json_round_trip_preserves_scores() {
        let doc = two_feature_doc();
        let text = doc.to_json();
        let back = ReportDocument::from_json(&text).unwrap();
        assert_eq!(back.scores.len(), 2);
        assert_eq!(back.scores[0].fairness, Some(-0.2));
        assert_eq!(back.model_accuracy, Some(0.9));
    }

    #[test]
    fn summary_lists_top_features() {
        let doc = two_feature_doc();
        let summary = doc.summary();
        assert!(summary.contains("harmful"));
        assert!(summary.contains("helpful"));
        assert!(summary.contains("model accuracy"));
    }
}
