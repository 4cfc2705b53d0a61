use std::fmt::Write;

use super::{CampaignConfig, CampaignReport, RecordStatus, RESPONSES};
use crate::params::{fmt_sig, PARAM_LABELS};

fn row(cells: &[String]) -> String {
    format!("| {} |\n", cells.join(" | "))
}

fn header(cells: &[&str]) -> String {
    let mut out = row(&cells.iter().map(|c| c.to_string()).collect::<Vec<_>>());
    out.push_str(&row(&vec!["---".to_string(); cells.len()]));
    out
}

fn num(v: f64) -> String {
    if v.is_finite() {
        fmt_sig(v, 4)
    } else {
        "-".into()
    }
}

/// Markdown summary of a finished campaign. Contains no wall-clock data.
pub fn render_report(config: &CampaignConfig, report: &CampaignReport) -> String {
    let mut out = String::from("# Campaign report\n\n");
    let done = report.records.iter().filter(|r| r.status == RecordStatus::Done).count();
    let sim_end = report.phases.iter().map(|p| p.end).fold(0.0, f64::max);
    let _ = writeln!(
        out,
        "{} design runs, {} records ({} done), {} plant alarms, {:.2} h simulated plant time.\n",
        report.design.len(),
        report.records.len(),
        done,
        report.alarms,
        sim_end / 3600.0
    );

    out.push_str("## Design and responses\n\n");
    let mut cols = vec!["Run", "Batch"];
    cols.extend(PARAM_LABELS);
    cols.extend(RESPONSES);
    cols.push("Status");
    out.push_str(&header(&cols));
    for r in report.records.iter().filter(|r| r.design_run.is_some()) {
        let mut cells = vec![r.design_run.unwrap_or(0).to_string(), r.spec.batch_id.clone()];
        cells.extend(r.spec.params.to_array().iter().map(|v| num(*v)));
        match r.responses {
            Some(y) => cells.extend(y.to_array().iter().map(|v| num(*v))),
            None => cells.extend(std::iter::repeat_n("-".to_string(), 4)),
        }
        cells.push(format!("{:?}", r.status).to_lowercase());
        out.push_str(&row(&cells));
    }

    out.push_str("\n## Models\n\n");
    for (m, d) in report.models.iter().zip(&report.diagnostics) {
        let _ = writeln!(
            out,
            "### {}\n\nR² = {}, residual SD = {}, {} terms\n",
            m.response_name,
            fmt_sig(m.r_squared, 4),
            num(d.residual_sd),
            m.terms.len()
        );
        out.push_str(&header(&["Term", "Coefficient", "p"]));
        for ((t, c), p) in m.terms.iter().zip(&m.coefficients).zip(&m.p_values) {
            out.push_str(&row(&[t.to_string(), fmt_sig(*c, 6), num(*p)]));
        }
        out.push('\n');
    }

    out.push_str("## Pareto solutions\n\n");
    for o in &report.fronts {
        let _ = writeln!(
            out,
            "Batch {}: {} of {} front points shown{}.\n",
            o.batch_id,
            o.front.len(),
            o.full_size,
            if o.feasible { "" } else { " (no feasible point; least-violating shown)" }
        );
        let mut cols = vec!["No."];
        cols.extend(PARAM_LABELS);
        let names: Vec<&str> = o.front.response_names.iter().map(String::as_str).collect();
        cols.extend(names);
        out.push_str(&header(&cols));
        for (k, s) in o.front.solutions.iter().enumerate() {
            let mut cells = vec![(k + 1).to_string()];
            cells.extend(s.params.to_array().iter().chain(&s.responses).map(|v| num(*v)));
            out.push_str(&row(&cells));
        }
        out.push('\n');
    }

    out.push_str("## Design space\n\n");
    let _ = writeln!(
        out,
        "Thresholds (Y1..Y4): {}\n",
        config
            .thresholds
            .iter()
            .map(|t| t.map_or("-".to_string(), num))
            .collect::<Vec<_>>()
            .join(", ")
    );
    out.push_str(&header(&["Slice", "Batch", "Axes", "Inside nodes"]));
    for (s, g) in &report.grids {
        out.push_str(&row(&[
            s.name.clone(),
            s.batch_id.clone(),
            format!("{} × {}", PARAM_LABELS[s.x_factor], PARAM_LABELS[s.y_factor]),
            format!("{} / {}", g.inside_count(), g.nodes.len()),
        ]));
    }

    out.push_str("\n## Validation\n\n");
    out.push_str(&header(&["Batch", "Response", "Predicted", "Simulated", "Relative gap", "Design space"]));
    for v in &report.validations {
        let p = v.predicted.to_array();
        let s = v.simulated.to_array();
        for k in 0..4 {
            let gap = if p[k] != 0.0 { (s[k] - p[k]) / p[k] } else { f64::NAN };
            out.push_str(&row(&[
                v.batch_id.clone(),
                RESPONSES[k].to_string(),
                num(p[k]),
                num(s[k]),
                if gap.is_finite() { format!("{:+.1}%", 100.0 * gap) } else { "-".into() },
                if v.inside { "inside" } else { "outside" }.into(),
            ]));
        }
    }
    out
}
