//! Reliability diagrams: per-bin (confidence, accuracy, weight) curves and
//! a deterministic SVG + CSV renderer.
//!
//! The renderer is a pure function of its inputs — no timestamps, fixed
//! float formatting — so two renders of the same curves are byte-identical.
//! The diagonal `acc = conf` reference line is always drawn; points below
//! it mark overconfidence.

use serde::Serialize;

use crate::calibration::BinPartition;
use crate::error::{Error, Result};
use crate::records::GroupKey;

/// One occupied bin of a reliability curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    /// Bin mean confidence.
    pub conf: f64,
    /// Bin accuracy.
    pub acc: f64,
    /// Bin mass `|B|/N`; weights over a curve sum to 1.
    pub weight: f64,
}

/// Points of one group's reliability curve, sorted ascending by confidence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReliabilityCurve {
    pub points: Vec<CurvePoint>,
    pub group: GroupKey,
    /// Human-readable partition descriptor, e.g. `uniform(10)`.
    pub partition: String,
}

impl ReliabilityCurve {
    /// Legend/file label.
    pub fn label(&self) -> String {
        format!("{} [{}]", self.group, self.partition)
    }
}

/// Extracts the reliability curve from a partition built over a group's
/// records.
///
/// One point per occupied bin; bins with equal mean confidence are merged
/// (weights summed, accuracy mass-averaged) so the curve is a function of
/// confidence.
pub fn curve(partition: &BinPartition, group: GroupKey) -> Result<ReliabilityCurve> {
    if partition.total == 0 {
        return Err(Error::EmptyRecordSet);
    }
    let n = partition.total as f64;
    let mut points: Vec<CurvePoint> = partition
        .bins
        .iter()
        .filter(|b| b.count > 0)
        .map(|b| CurvePoint { conf: b.conf, acc: b.acc, weight: b.count as f64 / n })
        .collect();
    points.sort_by(|a, b| a.conf.total_cmp(&b.conf));
    let mut merged: Vec<CurvePoint> = Vec::with_capacity(points.len());
    for p in points {
        match merged.last_mut() {
            Some(last) if last.conf == p.conf => {
                let w = last.weight + p.weight;
                last.acc = (last.acc * last.weight + p.acc * p.weight) / w;
                last.weight = w;
            }
            _ => merged.push(p),
        }
    }
    let partition_desc = match partition.strategy {
        crate::calibration::PartitionStrategy::Uniform { bins } => format!("uniform({bins})"),
        crate::calibration::PartitionStrategy::EqualMass { ranges } => {
            format!("equal-mass({ranges})")
        }
    };
    Ok(ReliabilityCurve { points: merged, group, partition: partition_desc })
}

/// Visual parameters for [`render`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    pub width: u32,
    pub height: u32,
    /// Scale point markers by bin mass.
    pub marker_size_by_weight: bool,
    pub title: String,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self {
            width: 640,
            height: 640,
            marker_size_by_weight: true,
            title: "Reliability diagram".to_string(),
        }
    }
}

/// SVG document plus the CSV mirror of the plotted points.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedDiagram {
    pub svg: String,
    pub csv: String,
}

const PALETTE: [&str; 6] = ["#c0392b", "#2980b9", "#27ae60", "#8e44ad", "#d68910", "#16a085"];
const MARGIN: f64 = 56.0;

/// Renders curves to an SVG document and a CSV table.
///
/// Curves are drawn in `GroupKey` order; output bytes depend only on
/// `(curves, style)`.
pub fn render(curves: &[ReliabilityCurve], style: &PlotStyle) -> Result<RenderedDiagram> {
    if curves.is_empty() {
        return Err(Error::InvalidArgument("render needs at least one curve".into()));
    }
    let mut ordered: Vec<&ReliabilityCurve> = curves.iter().collect();
    ordered.sort_by(|a, b| (&a.group, &a.partition).cmp(&(&b.group, &b.partition)));

    let w = style.width as f64;
    let h = style.height as f64;
    let px = |conf: f64| MARGIN + conf * (w - 2.0 * MARGIN);
    let py = |acc: f64| h - MARGIN - acc * (h - 2.0 * MARGIN);
    let f = |v: f64| format!("{v:.2}");

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
        style.width, style.height, style.width, style.height
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n",
        style.width, style.height
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"16\">{}</text>\n",
        f(w / 2.0),
        f(MARGIN / 2.0),
        xml_escape(&style.title)
    ));
    // Axes with ticks every 0.2.
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        f(px(0.0)), f(py(0.0)), f(px(1.0)), f(py(0.0))
    ));
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        f(px(0.0)), f(py(0.0)), f(px(0.0)), f(py(1.0))
    ));
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
            f(px(v)), f(py(0.0)), f(px(v)), f(py(0.0) + 5.0)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"11\">{:.1}</text>\n",
            f(px(v)), f(py(0.0) + 18.0), v
        ));
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
            f(px(0.0) - 5.0), f(py(v)), f(px(0.0)), f(py(v))
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">{:.1}</text>\n",
            f(px(0.0) - 8.0), f(py(v) + 4.0), v
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"12\">confidence</text>\n",
        f(w / 2.0), f(h - 12.0)
    ));
    svg.push_str(&format!(
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"12\" transform=\"rotate(-90 14 {})\">accuracy</text>\n",
        f(h / 2.0), f(h / 2.0)
    ));
    // Perfect-calibration diagonal.
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n",
        f(px(0.0)), f(py(0.0)), f(px(1.0)), f(py(1.0))
    ));
    for (i, curve) in ordered.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|p| format!("{},{}", f(px(p.conf)), f(py(p.acc))))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            pts.join(" "),
            color
        ));
        for p in &curve.points {
            let radius = if style.marker_size_by_weight {
                2.0 + 10.0 * p.weight.sqrt()
            } else {
                4.0
            };
            svg.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\" fill-opacity=\"0.7\"/>\n",
                f(px(p.conf)),
                f(py(p.acc)),
                f(radius),
                color
            ));
        }
        // Legend entry.
        let ly = MARGIN + 16.0 * i as f64 + 14.0;
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n",
            f(px(0.0) + 6.0),
            f(ly - 9.0),
            color
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\">{}</text>\n",
            f(px(0.0) + 20.0),
            f(ly),
            xml_escape(&curve.label())
        ));
    }
    svg.push_str("</svg>\n");

    let mut csv = String::from("label,conf,acc,weight\n");
    for curve in &ordered {
        let label = curve.label().replace('"', "''");
        for p in &curve.points {
            csv.push_str(&format!("\"{}\",{},{},{}\n", label, p.conf, p.acc, p.weight));
        }
    }
    Ok(RenderedDiagram { svg, csv })
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::{partition_uniform, partition_equal_mass};
    use crate::records::GroupKey;

    fn simple_curve(items: &[(f64, bool)], m: usize) -> ReliabilityCurve {
        let p = partition_uniform(items, m).unwrap();
        curve(&p, GroupKey::default()).unwrap()
    }

    #[test]
    fn all_one_hot_correct_single_point() {
        let c = simple_curve(&[(1.0, true), (1.0, true)], 10);
        assert_eq!(c.points.len(), 1);
        assert_eq!(c.points[0].conf, 1.0);
        assert_eq!(c.points[0].acc, 1.0);
        assert_eq!(c.points[0].weight, 1.0);
    }

    #[test]
    fn weights_sum_to_one_and_confs_increase() {
        let items: Vec<(f64, bool)> =
            (0..40).map(|i| (0.5 + 0.0125 * i as f64, i % 3 != 0)).collect();
        let c = simple_curve(&items, 10);
        let total: f64 = c.points.iter().map(|p| p.weight).sum();
        assert!((total - 1.0).abs() < 1e-9);
        for pair in c.points.windows(2) {
            assert!(pair[0].conf < pair[1].conf);
        }
    }

    #[test]
    fn equal_conf_bins_merge() {
        // Two equal-mass ranges with identical mean confidence merge into one
        // point carrying the summed weight.
        let items = [(0.8, true), (0.8, false)];
        let p = partition_equal_mass(&items, 2).unwrap();
        let c = curve(&p, GroupKey::default()).unwrap();
        assert_eq!(c.points.len(), 1);
        assert_eq!(c.points[0].weight, 1.0);
        assert!((c.points[0].acc - 0.5).abs() < 1e-15);
    }

    #[test]
    fn perfectly_calibrated_points_on_diagonal() {
        let mut items = Vec::new();
        for bin in 0..5 {
            let c = 0.5 + (bin as f64 + 0.5) / 10.0;
            let correct = (c * 20.0).round() as usize;
            for i in 0..20 {
                items.push((c, i < correct));
            }
        }
        let c = simple_curve(&items, 10);
        for p in &c.points {
            assert!((p.acc - p.conf).abs() < 1e-12);
        }
    }

    #[test]
    fn render_is_deterministic() {
        let c = simple_curve(&[(0.9, true), (0.7, false), (0.6, true)], 5);
        let style = PlotStyle::default();
        let a = render(&[c.clone()], &style).unwrap();
        let b = render(&[c], &style).unwrap();
        assert_eq!(a.svg, b.svg);
        assert_eq!(a.csv, b.csv);
    }

    #[test]
    fn render_structure() {
        let c = simple_curve(&[(0.9, true), (0.6, false)], 5);
        let out = render(&[c], &PlotStyle::default()).unwrap();
        assert_eq!(out.svg.matches("<polyline").count(), 1);
        assert!(out.svg.contains("stroke-dasharray")); // the diagonal
        assert!(out.csv.starts_with("label,conf,acc,weight\n"));
        assert_eq!(out.csv.lines().count(), 1 + 2);
    }

    #[test]
    fn render_zero_curves_errors() {
        assert!(render(&[], &PlotStyle::default()).is_err());
    }

    #[test]
    fn legend_in_group_key_order() {
        let mk = |lang: &str| {
            let p = partition_uniform(&[(0.9, true)], 5).unwrap();
            let group = GroupKey { language: lang.into(), ..GroupKey::default() };
            curve(&p, group).unwrap()
        };
        // Pass curves out of order; the renderer sorts by group key.
        let out = render(&[mk("yo"), mk("am")], &PlotStyle::default()).unwrap();
        let am = out.svg.find("language=am").unwrap();
        let yo = out.svg.find("language=yo").unwrap();
        assert!(am < yo);
    }
}
