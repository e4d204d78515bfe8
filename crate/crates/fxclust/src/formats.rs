//! Text formats for matrices, dendrograms, cuts and return audits.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back yields bit-identical values and reruns produce identical bytes.

use chrono::NaiveDate;
use fxclust_core::{ClusterCut, Dendrogram, DistanceMatrix, Merge, Metric, ReturnSeries};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Labeled CSV. The top-left cell holds the metric name, the rest of the
/// header row and the first column hold asset codes.
pub fn matrix_to_csv(dm: &DistanceMatrix) -> Result<String> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header = vec![dm.metric().as_str().to_owned()];
    header.extend(dm.labels().iter().cloned());
    w.write_record(&header)?;
    for (i, label) in dm.labels().iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend(dm.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    finish(w)
}

pub fn matrix_from_csv(text: &str) -> Result<DistanceMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = rdr.records();
    let header = rows.next().ok_or_else(|| Error::MalformedRow {
        line: 1,
        reason: "empty matrix file".to_owned(),
    })??;
    let metric: Metric = header[0].parse()?;
    let labels: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let n = labels.len();
    let mut values = Vec::with_capacity(n * n);
    for (i, rec) in rows.enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        if rec.len() != n + 1 || &rec[0] != labels.get(i).map(String::as_str).unwrap_or("") {
            return Err(Error::MalformedRow {
                line,
                reason: "row label or width does not match the header".to_owned(),
            });
        }
        for cell in rec.iter().skip(1) {
            values.push(cell.parse::<f64>().map_err(|_| Error::MalformedRow {
                line,
                reason: format!("bad distance {cell:?}"),
            })?);
        }
    }
    Ok(DistanceMatrix::new(labels, metric, values)?)
}

/// Compact JSON form; `values` is the strict lower triangle, row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub labels: Vec<String>,
    pub metric: String,
    pub values: Vec<f64>,
}

pub fn matrix_to_json(dm: &DistanceMatrix) -> Result<String> {
    let doc = MatrixJson {
        labels: dm.labels().to_vec(),
        metric: dm.metric().as_str().to_owned(),
        values: dm.lower_triangle(),
    };
    Ok(serde_json::to_string(&doc)? + "\n")
}

pub fn matrix_from_json(text: &str) -> Result<DistanceMatrix> {
    let doc: MatrixJson = serde_json::from_str(text)?;
    Ok(DistanceMatrix::from_lower_triangle(
        doc.labels,
        doc.metric.parse()?,
        &doc.values,
    )?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeJson {
    pub left: usize,
    pub right: usize,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DendrogramJson {
    pub labels: Vec<String>,
    pub merges: Vec<MergeJson>,
}

pub fn dendrogram_to_json(dg: &Dendrogram) -> Result<String> {
    let doc = DendrogramJson {
        labels: dg.labels().to_vec(),
        merges: dg
            .merges()
            .iter()
            .map(|m| MergeJson {
                left: m.left,
                right: m.right,
                height: m.height,
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

pub fn dendrogram_from_json(text: &str) -> Result<Dendrogram> {
    let doc: DendrogramJson = serde_json::from_str(text)?;
    let merges = doc
        .merges
        .into_iter()
        .map(|m| Merge {
            left: m.left,
            right: m.right,
            height: m.height,
        })
        .collect();
    Ok(Dendrogram::new(doc.labels, merges)?)
}

/// Newick string. Leaves sit at height 0 and each branch length is the
/// parent's merge height minus the child's.
pub fn dendrogram_to_newick(dg: &Dendrogram) -> String {
    fn walk(dg: &Dendrogram, node: usize, parent_height: f64, out: &mut String) {
        match dg.children(node) {
            Some((l, r)) => {
                let h = dg.node_height(node);
                out.push('(');
                walk(dg, l, h, out);
                out.push(',');
                walk(dg, r, h, out);
                out.push(')');
            }
            None => out.push_str(&newick_label(&dg.labels()[node])),
        }
        out.push(':');
        out.push_str(&(parent_height - dg.node_height(node)).to_string());
    }
    let root = dg.root();
    let (l, r) = dg.children(root).expect("root is internal");
    let h = dg.node_height(root);
    let mut out = String::from("(");
    walk(dg, l, h, &mut out);
    out.push(',');
    walk(dg, r, h, &mut out);
    out.push_str(");\n");
    out
}

fn newick_label(label: &str) -> String {
    let plain = label
        .chars()
        .all(|c| !c.is_whitespace() && !"()[]':;,".contains(c));
    if plain && !label.is_empty() {
        label.to_owned()
    } else {
        format!("'{}'", label.replace('\'', "''"))
    }
}

/// `label,cluster_id` rows in label order.
pub fn cut_to_csv(cut: &ClusterCut) -> Result<String> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(["label", "cluster_id"])?;
    for (label, id) in cut.labels.iter().zip(&cut.assignment) {
        w.write_record([label.as_str(), &id.to_string()])?;
    }
    finish(w)
}

/// Audit dump of one return series. Each return is dated by the end of its
/// interval, i.e. `dates[t + dt_steps]`.
pub fn returns_to_csv(rs: &ReturnSeries, dates: &[NaiveDate]) -> Result<String> {
    if dates.len() != rs.len() {
        return Err(Error::InvalidDataset(format!(
            "{} dates for {} returns",
            dates.len(),
            rs.len()
        )));
    }
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(["date", "raw", "sigma", "normalized"])?;
    for (t, d) in dates.iter().enumerate() {
        w.write_record([
            d.format("%Y-%m-%d").to_string(),
            rs.raw[t].to_string(),
            rs.loo_sigma[t].to_string(),
            rs.normalized[t].to_string(),
        ])?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io("<memory>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
