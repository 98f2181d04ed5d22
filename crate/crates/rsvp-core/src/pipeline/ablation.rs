//! Ablation grids: run the cross product of parameter axes and tabulate
//! aggregate metrics per combination.
//!
//! Supported axes mirror the knobs the pipeline exposes:
//! `density` (rows = cols = v), `padding`, `temperature`, `prompt_variant`,
//! `visual_style`. The cross product is bounded by the config's cap and the
//! bound is checked before any run starts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::prompt::PromptVariant;

use super::{run_eval_with_progress, EvalReport, ProgressFn, RunConfig, RunStatus, VisualStyle};

/// Axis name → values, as given in config JSON.
pub type AblationAxes = BTreeMap<String, Vec<Value>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// Axis assignments of this combination, e.g. {"density": "9"}.
    pub axes: BTreeMap<String, String>,
    pub giou: f64,
    pub ciou: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<f64>,
    pub status: RunStatus,
    pub output_dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub axis_names: Vec<String>,
    pub rows: Vec<AblationRow>,
}

pub struct AblationOutcome {
    pub table: AblationTable,
    pub reports: Vec<EvalReport>,
}

impl AblationTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = self.axis_names.clone();
        header.extend(["giou".into(), "ciou".into(), "map".into(), "status".into()]);
        writer
            .write_record(&header)
            .map_err(|e| Error::Format(e.to_string()))?;
        for row in &self.rows {
            let mut rec: Vec<String> = self
                .axis_names
                .iter()
                .map(|a| row.axes.get(a).cloned().unwrap_or_default())
                .collect();
            rec.push(format!("{:.6}", row.giou));
            rec.push(format!("{:.6}", row.ciou));
            rec.push(row.map.map(|m| format!("{m:.6}")).unwrap_or_default());
            rec.push(match row.status {
                RunStatus::Ok => "ok".into(),
                RunStatus::Failed => "failed".into(),
            });
            writer.write_record(&rec).map_err(|e| Error::Format(e.to_string()))?;
        }
        let bytes = writer.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let mut widths: Vec<usize> = self.axis_names.iter().map(|a| a.len().max(8)).collect();
        for row in &self.rows {
            for (i, a) in self.axis_names.iter().enumerate() {
                widths[i] = widths[i].max(row.axes.get(a).map_or(0, String::len));
            }
        }
        for (i, a) in self.axis_names.iter().enumerate() {
            write!(out, "{:w$}  ", a, w = widths[i]).unwrap();
        }
        writeln!(out, "{:>8}  {:>8}  {:>8}  status", "gIoU", "cIoU", "mAP").unwrap();
        for row in &self.rows {
            for (i, a) in self.axis_names.iter().enumerate() {
                write!(out, "{:w$}  ", row.axes.get(a).map_or("", String::as_str), w = widths[i]).unwrap();
            }
            writeln!(
                out,
                "{:>8.4}  {:>8.4}  {:>8}  {}",
                row.giou,
                row.ciou,
                row.map.map(|m| format!("{m:.4}")).unwrap_or_else(|| "-".into()),
                match row.status {
                    RunStatus::Ok => "ok",
                    RunStatus::Failed => "failed",
                }
            )
            .unwrap();
        }
        out
    }
}

/// Run every combination of the given axes on top of a base config.
/// Empty axes degenerate to a single `run_eval`.
pub async fn run_ablation(
    base: &RunConfig,
    axes: &AblationAxes,
    samples: &[Sample],
    progress: Option<ProgressFn>,
) -> Result<AblationOutcome> {
    base.validate()?;
    for key in axes.keys() {
        if !matches!(
            key.as_str(),
            "density" | "padding" | "temperature" | "prompt_variant" | "visual_style"
        ) {
            return Err(Error::Config(format!("unknown ablation axis {key}")));
        }
    }
    let requested: usize = axes.values().map(|v| v.len().max(1)).product();
    if requested > base.ablation_cap {
        return Err(Error::AblationCapExceeded {
            requested,
            cap: base.ablation_cap,
        });
    }
    for (key, values) in axes {
        if values.is_empty() {
            return Err(Error::Config(format!("axis {key} has no values")));
        }
    }

    let combos = cross_product(axes);
    // Validate every combination before any run starts.
    let mut configured = Vec::with_capacity(combos.len());
    for combo in &combos {
        configured.push(apply_combo(base, combo)?);
    }

    let axis_names: Vec<String> = axes.keys().cloned().collect();
    let total = configured.len();
    let mut rows = Vec::with_capacity(total);
    let mut reports = Vec::with_capacity(total);
    for (k, (combo, mut cfg)) in combos.into_iter().zip(configured).enumerate() {
        let label = combo_label(&combo);
        cfg.output_dir = base.output_dir.join(if label.is_empty() {
            "base".to_string()
        } else {
            label.replace('=', "-")
        });
        if let Some(cb) = &progress {
            cb(k, total);
        }
        let report = run_eval_with_progress(&cfg, samples, None).await?;
        rows.push(AblationRow {
            axes: combo.iter().map(|(k, v)| (k.clone(), value_label(v))).collect(),
            giou: report.aggregates.giou,
            ciou: report.aggregates.ciou,
            map: report.aggregates.map,
            status: report.status,
            output_dir: cfg.output_dir.display().to_string(),
        });
        reports.push(report);
    }
    if let Some(cb) = &progress {
        cb(total, total);
    }

    let table = AblationTable { axis_names, rows };
    std::fs::create_dir_all(&base.output_dir)?;
    std::fs::write(base.output_dir.join("ablation.csv"), table.to_csv()?)?;
    std::fs::write(base.output_dir.join("ablation.txt"), table.to_text())?;
    std::fs::write(
        base.output_dir.join("ablation.json"),
        serde_json::to_string_pretty(&table)?,
    )?;
    Ok(AblationOutcome { table, reports })
}

type Combo = Vec<(String, Value)>;

fn cross_product(axes: &AblationAxes) -> Vec<Combo> {
    let mut combos: Vec<Combo> = vec![Vec::new()];
    for (key, values) in axes {
        let mut next = Vec::with_capacity(combos.len() * values.len());
        for combo in &combos {
            for v in values {
                let mut c = combo.clone();
                c.push((key.clone(), v.clone()));
                next.push(c);
            }
        }
        combos = next;
    }
    combos
}

fn combo_label(combo: &Combo) -> String {
    combo
        .iter()
        .map(|(k, v)| format!("{k}={}", value_label(v)))
        .collect::<Vec<_>>()
        .join(",")
}

fn value_label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn apply_combo(base: &RunConfig, combo: &Combo) -> Result<RunConfig> {
    let mut cfg = base.clone();
    for (key, value) in combo {
        match key.as_str() {
            "density" => {
                let d = value
                    .as_u64()
                    .filter(|&d| d >= 1)
                    .ok_or_else(|| Error::Config(format!("density {value} is not a positive integer")))?;
                cfg.grid.rows = d as u32;
                cfg.grid.cols = d as u32;
            }
            "padding" => {
                let p = value
                    .as_f64()
                    .ok_or_else(|| Error::Config(format!("padding {value} is not a number")))?;
                cfg.grid.padding_ratio = p;
            }
            "temperature" => {
                let t = value
                    .as_f64()
                    .ok_or_else(|| Error::Config(format!("temperature {value} is not a number")))?;
                cfg.temperature = t;
            }
            "prompt_variant" => {
                cfg.prompt_variant = match value.as_str() {
                    Some("A") | Some("a") => PromptVariant::A,
                    Some("B") | Some("b") => PromptVariant::B,
                    _ => return Err(Error::Config(format!("prompt variant {value} not A/B"))),
                };
            }
            "visual_style" => {
                cfg.visual_style = match value.as_str() {
                    Some("split") => VisualStyle::Split,
                    Some("grid") => VisualStyle::Grid,
                    Some("none") => VisualStyle::None,
                    _ => return Err(Error::Config(format!("visual style {value} unknown"))),
                };
            }
            _ => unreachable!("axis names validated above"),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_product_orders_by_key_then_value() {
        let mut axes = AblationAxes::new();
        axes.insert("density".into(), vec![5.into(), 9.into()]);
        axes.insert("padding".into(), vec![serde_json::json!(0.0), serde_json::json!(0.2)]);
        let combos = cross_product(&axes);
        assert_eq!(combos.len(), 4);
        assert_eq!(combo_label(&combos[0]), "density=5,padding=0.0");
        assert_eq!(combo_label(&combos[3]), "density=9,padding=0.2");
    }

    #[test]
    fn empty_axes_yield_one_combo() {
        let combos = cross_product(&AblationAxes::new());
        assert_eq!(combos.len(), 1);
        assert!(combos[0].is_empty());
    }
}
