//! CSV tables and SVG figures for analysis results.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::facts::{FactKind, FactSet};

use super::{
    coverage_ratio, CurvePoint, FactAttribution, FixedBy, MetricsError, ShapleyValues, UniversalityGap, UpsetRegion,
};

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn attribution_csv(rows: &[FactAttribution]) -> String {
    csv_string(
        &["fact", "code", "gain", "shapley", "shapley_x16", "exclusive_fixes", "best_without", "delta_drop"],
        rows.iter()
            .map(|a| {
                vec![
                    a.fact.label().to_string(),
                    a.fact.code().to_string(),
                    a.gain.to_string(),
                    a.shapley.to_string(),
                    a.shapley_x16.to_string(),
                    a.exclusive_fixes.to_string(),
                    a.best_without.to_string(),
                    a.delta_drop.to_string(),
                ]
            })
            .collect(),
    )
}

/// One row per fact; a fact whose gain is undefined on this data has a
/// blank value.
pub fn gain_csv(gains: &[(FactKind, Option<f64>)]) -> String {
    csv_string(
        &["fact", "code", "gain"],
        gains
            .iter()
            .map(|(k, g)| vec![k.label().to_string(), k.code().to_string(), opt(*g)])
            .collect(),
    )
}

pub fn shapley_csv(values: &ShapleyValues) -> String {
    csv_string(
        &["fact", "code", "shapley", "shapley_x16"],
        FactKind::ALL
            .iter()
            .map(|k| {
                vec![
                    k.label().to_string(),
                    k.code().to_string(),
                    values.get(*k).to_string(),
                    values.scaled(*k).to_string(),
                ]
            })
            .collect(),
    )
}

pub fn coverage_csv(fixed_by: &FixedBy) -> Result<String, MetricsError> {
    let rows = fixed_by
        .iter()
        .map(|(set, bugs)| {
            Ok(vec![
                set.to_string(),
                bugs.len().to_string(),
                coverage_ratio(fixed_by, *set)?.to_string(),
            ])
        })
        .collect::<Result<Vec<_>, MetricsError>>()?;
    Ok(csv_string(&["bitvector", "fixed", "coverage_ratio"], rows))
}

/// Always 8 rows; empty cardinalities have blank value columns.
pub fn curve_csv(points: &[CurvePoint]) -> String {
    csv_string(
        &["cardinality", "entries", "avg_pass1", "max_pass1"],
        points
            .iter()
            .map(|p| vec![p.cardinality.to_string(), p.entries.to_string(), opt(p.avg_pass1), opt(p.max_pass1)])
            .collect(),
    )
}

fn members_label(members: &[FactSet]) -> String {
    members.iter().map(FactSet::to_string).collect::<Vec<_>>().join("|")
}

pub fn upset_csv(regions: &[UpsetRegion]) -> String {
    csv_string(
        &["members", "count"],
        regions.iter().map(|r| vec![members_label(&r.members), r.count.to_string()]).collect(),
    )
}

pub fn universality_csv(gap: &UniversalityGap) -> String {
    let mut rows: Vec<Vec<String>> = gap
        .per_bug
        .iter()
        .map(|(bug, g)| {
            vec![
                bug.clone(),
                g.best_set.to_string(),
                g.best_pass1.to_string(),
                gap.best_universal.to_string(),
                g.universal_pass1.to_string(),
                g.epsilon.to_string(),
            ]
        })
        .collect();
    rows.sort_by(|a, b| a[0].cmp(&b[0]));
    csv_string(
        &["bug_id", "best_set", "best_pass1", "universal_set", "universal_pass1", "epsilon"],
        rows,
    )
}

pub fn order_histogram_csv(hist: &BTreeMap<String, (usize, f64)>) -> String {
    csv_string(
        &["fact_order", "response_sets", "mean_pass1"],
        hist.iter()
            .map(|(order, (count, mean))| vec![order.clone(), count.to_string(), mean.to_string()])
            .collect(),
    )
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;

fn svg_open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<title>{title}</title>"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

/// Line chart of average and best pass@1 against the number of facts.
pub fn curve_svg(points: &[CurvePoint]) -> String {
    let mut out = String::new();
    svg_open(&mut out, "pass@1 by number of facts");
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let x = |c: usize| MARGIN + plot_w * c as f64 / 7.0;
    let y = |v: f64| HEIGHT - MARGIN - plot_h * v.clamp(0.0, 1.0);
    let _ = writeln!(
        out,
        r#"<path d="M{m} {m} V{b} H{r}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for c in 0..=7 {
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{c}</text>"#, x(c), HEIGHT - MARGIN + 16.0);
    }
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{tick}</text>"#, MARGIN - 6.0, y(tick) + 4.0);
    }
    type Series = (&'static str, &'static str, fn(&CurvePoint) -> Option<f64>);
    let series: [Series; 2] = [
        ("avg", "#1f77b4", |p| p.avg_pass1),
        ("max", "#d62728", |p| p.max_pass1),
    ];
    for (i, (name, color, get)) in series.iter().enumerate() {
        let pts: Vec<String> = points
            .iter()
            .filter_map(|p| get(p).map(|v| format!("{:.1},{:.1}", x(p.cardinality), y(v))))
            .collect();
        let _ = writeln!(out, r#"<polyline class="{name}" points="{}" stroke="{color}" fill="none" stroke-width="2"/>"#, pts.join(" "));
        for p in pts {
            let (cx, cy) = p.split_once(',').expect("formatted pair");
            let _ = writeln!(out, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
        }
        let ly = MARGIN / 2.0 + 14.0 * i as f64;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{ly:.1}" fill="{color}">{name} pass@1</text>"#, WIDTH - MARGIN - 80.0);
    }
    out.push_str("</svg>\n");
    out
}

/// Bar chart of region sizes above a membership matrix.
pub fn upset_svg(regions: &[UpsetRegion], chosen: &[FactSet]) -> String {
    let mut out = String::new();
    svg_open(&mut out, "fixed bugs by fact-set overlap");
    let left = MARGIN + 56.0;
    let matrix_h = 16.0 * chosen.len() as f64;
    let bar_base = HEIGHT - MARGIN - matrix_h - 8.0;
    let bar_h = bar_base - MARGIN;
    let step = if regions.is_empty() { 0.0 } else { (WIDTH - left - MARGIN) / regions.len() as f64 };
    let top = regions.iter().map(|r| r.count).max().unwrap_or(1).max(1) as f64;
    for (row, set) in chosen.iter().enumerate() {
        let ry = bar_base + 16.0 * (row as f64 + 1.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{ry:.1}" text-anchor="end">{set}</text>"#, left - 8.0);
    }
    for (i, region) in regions.iter().enumerate() {
        let cx = left + step * (i as f64 + 0.5);
        let h = bar_h * region.count as f64 / top;
        let _ = writeln!(
            out,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="#444"/>"##,
            cx - step * 0.35,
            bar_base - h,
            step * 0.7
        );
        let _ = writeln!(out, r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, bar_base - h - 4.0, region.count);
        for (row, set) in chosen.iter().enumerate() {
            let fill = if region.members.contains(set) { "#222" } else { "#ddd" };
            let cy = bar_base + 16.0 * (row as f64 + 1.0) - 4.0;
            let _ = writeln!(out, r#"<circle cx="{cx:.1}" cy="{cy:.1}" r="5" fill="{fill}"/>"#);
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_csv_has_eight_rows() {
        let points: Vec<CurvePoint> = (0..=7)
            .map(|c| CurvePoint {
                cardinality: c,
                entries: if c == 3 { 0 } else { 2 },
                avg_pass1: (c != 3).then_some(0.1 * c as f64),
                max_pass1: (c != 3).then_some(0.5),
            })
            .collect();
        let text = curve_csv(&points);
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 8);
        assert_eq!(&rows[3][2], "");
        let svg = curve_svg(&points);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
    }

    #[test]
    fn gain_and_shapley_tables() {
        let gains = vec![(FactKind::BuggyClass, Some(0.25)), (FactKind::GitHubIssue, None)];
        let text = gain_csv(&gains);
        assert_eq!(text, "fact,code,gain\nBuggy Class,1.1,0.25\nGitHub Issue,3.1,\n");
        let mut values = ShapleyValues { values: [0.0; 7] };
        values.values[3] = 0.5;
        let text = shapley_csv(&values);
        assert_eq!(text.lines().count(), 8);
        assert_eq!(text.lines().nth(4).unwrap(), "Error Info,2.1,0.5,8");
    }

    #[test]
    fn attribution_and_upset_tables() {
        let a = FactAttribution {
            fact: FactKind::GitHubIssue,
            gain: 0.5,
            shapley: 0.01,
            shapley_x16: 0.16,
            exclusive_fixes: 3,
            best_without: 0.2,
            delta_drop: 0.1,
        };
        let text = attribution_csv(&[a]);
        assert!(text.lines().nth(1).unwrap().contains(",3.1,0.5,"));
        let s: FactSet = "0000101".parse().unwrap();
        let t = FactSet::FULL;
        let regions = vec![UpsetRegion { members: vec![s, t], count: 4 }];
        assert_eq!(upset_csv(&regions), "members,count\n0000101|1111111,4\n");
        let svg = upset_svg(&regions, &[s, t]);
        assert_eq!(svg.matches("<circle").count(), 2);
    }
}
