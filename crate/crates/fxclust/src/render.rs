//! Polar dendrogram rendering to SVG.
//!
//! Leaves sit on the outer circle in dendrogram order. A merge at height `h`
//! is drawn as an arc at radius `LEAF_RADIUS - (LEAF_RADIUS - ROOT_RADIUS) *
//! h / max_height`, so radial depth is proportional to the linkage height.
//! Branches inside a cluster with two or more members take the cluster's
//! palette color, isolated leaves are black, and everything above the cut is
//! gray. Label size grows with `log10` of GDP per capita and label color
//! encodes the region.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write;

use fxclust_core::{ClusterCut, Dendrogram};

use crate::ingest::AssetMeta;

pub const SIZE: f64 = 800.0;
pub const LEAF_RADIUS: f64 = 300.0;
pub const ROOT_RADIUS: f64 = 20.0;
/// Label font size when no GDP figure is known.
pub const FONT_DEFAULT: f64 = 10.0;
pub const FONT_BASE: f64 = 6.0;
/// Font size added per factor of ten in GDP per capita.
pub const FONT_PER_DECADE: f64 = 2.0;
pub const FONT_MIN: f64 = 4.0;

pub const ISOLATED_COLOR: &str = "#000000";
pub const ABOVE_CUT_COLOR: &str = "#999999";

pub const PALETTE: [&str; 10] = [
    "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#a65628", "#f781bf", "#17becf",
    "#bcbd22", "#1f3c88",
];

/// Label color for a region name (case-insensitive); gray when unknown.
pub fn region_color(region: &str) -> &'static str {
    match region.trim().to_ascii_lowercase().as_str() {
        "americas" => "#000000",
        "europe" => "#ff0000",
        "middle east" => "#0000ff",
        "asia-pacific" | "asia pacific" => "#ff00ff",
        "africa" => "#008000",
        "asia" => "#a52a2a",
        _ => "#808080",
    }
}

pub fn label_font_size(gdp_per_capita: Option<f64>) -> f64 {
    match gdp_per_capita {
        Some(g) if g > 0.0 => (FONT_BASE + FONT_PER_DECADE * g.log10()).max(FONT_MIN),
        _ => FONT_DEFAULT,
    }
}

fn radius(height: f64, max_height: f64) -> f64 {
    if max_height > 0.0 {
        LEAF_RADIUS - (LEAF_RADIUS - ROOT_RADIUS) * height / max_height
    } else {
        LEAF_RADIUS
    }
}

fn point(r: f64, angle: f64) -> (f64, f64) {
    (SIZE / 2.0 + r * angle.cos(), SIZE / 2.0 + r * angle.sin())
}

/// Renders `dg` colored by `cut`. Metadata is matched by code; missing
/// entries fall back to defaults.
pub fn render_polar(dg: &Dendrogram, cut: &ClusterCut, meta: &[AssetMeta]) -> String {
    let n = dg.len();
    let meta: HashMap<&str, &AssetMeta> = meta.iter().map(|m| (m.code.as_str(), m)).collect();
    let max_h = dg.max_height();
    let sizes = cut.cluster_sizes();

    let mut angle = vec![0.0; 2 * n - 1];
    for (k, leaf) in dg.leaf_order().into_iter().enumerate() {
        angle[leaf] = 2.0 * PI * k as f64 / n as f64;
    }
    // color of each node: its cluster's palette entry if the whole subtree
    // is one applied cluster of size >= 2
    let mut color: Vec<&str> = (0..n)
        .map(|leaf| {
            let c = cut.assignment[leaf];
            if sizes[c] >= 2 {
                PALETTE[c % PALETTE.len()]
            } else {
                ISOLATED_COLOR
            }
        })
        .collect();
    let mut inside = vec![false; 2 * n - 1];
    for (k, m) in dg.merges().iter().enumerate() {
        let id = n + k;
        angle[id] = 0.5 * (angle[m.left] + angle[m.right]);
        let child_in = |c: usize| c < n || inside[c];
        inside[id] = m.height < cut.threshold && child_in(m.left) && child_in(m.right);
        let c = if inside[id] {
            color[m.left]
        } else {
            ABOVE_CUT_COLOR
        };
        color.push(c);
    }

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(
        svg,
        r##"<rect width="100%" height="100%" fill="#ffffff"/>"##
    );
    let _ = writeln!(svg, r#"<g fill="none" stroke-width="1.5">"#);
    for (k, m) in dg.merges().iter().enumerate() {
        let id = n + k;
        let r = radius(m.height, max_h);
        for child in [m.left, m.right] {
            let link_color = if inside[id] { color[id] } else { color[child] };
            let (x1, y1) = point(radius(dg.node_height(child), max_h), angle[child]);
            let (x2, y2) = point(r, angle[child]);
            let _ = writeln!(
                svg,
                r#"<line class="link" data-child="{child}" data-parent="{id}" x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="{link_color}"/>"#
            );
        }
        let (a0, a1) = (
            angle[m.left].min(angle[m.right]),
            angle[m.left].max(angle[m.right]),
        );
        let (x0, y0) = point(r, a0);
        let (x1, y1) = point(r, a1);
        let large = if a1 - a0 > PI { 1 } else { 0 };
        let _ = writeln!(
            svg,
            r#"<path class="arc" data-node="{id}" data-radius="{r:.3}" d="M {x0:.3} {y0:.3} A {r:.3} {r:.3} 0 {large} 1 {x1:.3} {y1:.3}" stroke="{}"/>"#,
            color[id]
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r#"<g font-family="sans-serif">"#);
    for (leaf, label) in dg.labels().iter().enumerate() {
        let m = meta.get(label.as_str());
        let size = label_font_size(m.and_then(|m| m.gdp_per_capita));
        let fill = region_color(m.map(|m| m.region.as_str()).unwrap_or(""));
        let a = angle[leaf];
        let (x, y) = point(LEAF_RADIUS + 6.0, a);
        let mut deg = a.to_degrees();
        let anchor = if a > PI / 2.0 && a < 3.0 * PI / 2.0 {
            deg -= 180.0;
            "end"
        } else {
            "start"
        };
        let _ = writeln!(
            svg,
            r#"<text class="label" data-leaf="{leaf}" x="{x:.3}" y="{y:.3}" font-size="{size}" fill="{fill}" text-anchor="{anchor}" dominant-baseline="middle" transform="rotate({deg:.3} {x:.3} {y:.3})">{}</text>"#,
            escape(label)
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use fxclust_core::{agglomerate, cut, DistanceMatrix, Linkage, Metric};

    fn attr<'a>(line: &'a str, name: &str) -> &'a str {
        let key = format!(r#" {name}=""#);
        let start = line.find(&key).unwrap() + key.len();
        &line[start..start + line[start..].find('"').unwrap()]
    }

    fn tree(lower: &[f64], n: usize) -> Dendrogram {
        let labels = (0..n)
            .map(|i| ((b'A' + i as u8) as char).to_string())
            .collect();
        let dm = DistanceMatrix::from_lower_triangle(labels, Metric::Pearson, lower).unwrap();
        agglomerate(&dm, Linkage::Complete).unwrap()
    }

    #[test]
    fn two_leaves_face_each_other() {
        let dg = tree(&[0.3], 2);
        let svg = render_polar(&dg, &cut(&dg, 1.0), &[]);
        let labels: Vec<&str> = svg
            .lines()
            .filter(|l| l.contains(r#"class="label""#))
            .collect();
        assert_eq!(labels.len(), 2);
        let (x0, y0): (f64, f64) = (
            attr(labels[0], "x").parse().unwrap(),
            attr(labels[0], "y").parse().unwrap(),
        );
        let (x1, y1): (f64, f64) = (
            attr(labels[1], "x").parse().unwrap(),
            attr(labels[1], "y").parse().unwrap(),
        );
        // 180 degrees apart around the center
        assert!((x0 + x1 - SIZE).abs() < 1e-3 && (y0 + y1 - SIZE).abs() < 1e-3);
        let arcs: Vec<&str> = svg
            .lines()
            .filter(|l| l.contains(r#"class="arc""#))
            .collect();
        assert_eq!(arcs.len(), 1);
        assert_eq!(attr(arcs[0], "data-radius"), format!("{ROOT_RADIUS:.3}"));
    }

    #[test]
    fn cluster_colors_follow_cut() {
        let dg = tree(&[1.0, 2.0, 3.0], 3);
        let svg = render_polar(&dg, &cut(&dg, 2.0), &[]);
        let stroke_of = |child: usize| {
            svg.lines()
                .find(|l| l.contains(&format!(r#"data-child="{child}""#)))
                .map(|l| attr(l, "stroke").to_owned())
                .unwrap()
        };
        assert_eq!(stroke_of(0), stroke_of(1));
        assert_eq!(stroke_of(0), PALETTE[0]);
        assert_eq!(stroke_of(2), ISOLATED_COLOR);
    }

    #[test]
    fn font_size_scales_by_decade() {
        let small = label_font_size(Some(100.0));
        let big = label_font_size(Some(10_000.0));
        assert!((big - small - 2.0 * FONT_PER_DECADE).abs() < 1e-12);
        assert_eq!(label_font_size(None), FONT_DEFAULT);

        let dg = tree(&[0.3], 2);
        let meta = vec![
            AssetMeta {
                gdp_per_capita: Some(100.0),
                region: "Africa".into(),
                ..AssetMeta::new("A")
            },
            AssetMeta {
                gdp_per_capita: Some(10_000.0),
                region: "Europe".into(),
                ..AssetMeta::new("B")
            },
        ];
        let svg = render_polar(&dg, &cut(&dg, 1.0), &meta);
        let labels: Vec<&str> = svg
            .lines()
            .filter(|l| l.contains(r#"class="label""#))
            .collect();
        let fa: f64 = attr(labels[0], "font-size").parse().unwrap();
        let fb: f64 = attr(labels[1], "font-size").parse().unwrap();
        assert!((fb - fa - 2.0 * FONT_PER_DECADE).abs() < 1e-12);
        assert_eq!(attr(labels[0], "fill"), "#008000");
        assert_eq!(attr(labels[1], "fill"), "#ff0000");
    }

    #[test]
    fn region_map() {
        assert_eq!(region_color("Americas"), "#000000");
        assert_eq!(region_color("middle east"), "#0000ff");
        assert_eq!(region_color("Asia-Pacific"), "#ff00ff");
        assert_eq!(region_color("Asia"), "#a52a2a");
        assert_eq!(region_color(""), "#808080");
    }

    #[test]
    fn labels_are_escaped() {
        let labels = vec!["A&B".to_string(), "<C>".to_string()];
        let dm = DistanceMatrix::from_lower_triangle(labels, Metric::Pearson, &[0.3]).unwrap();
        let dg = agglomerate(&dm, Linkage::Single).unwrap();
        let svg = render_polar(&dg, &cut(&dg, 0.0), &[]);
        assert!(svg.contains("A&amp;B") && svg.contains("&lt;C&gt;"));
    }
}
