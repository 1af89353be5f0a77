use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::engine::Tensor;
use crate::error::{Error, Result};
use crate::screen::{DgpPanel, ExpressionMatrix, GenePair, LabelVector, Pathway, PathwayCatalog};

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: display(path),
        line,
        msg: msg.into(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", display(path)), e))
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", display(path))))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(format!("writing {}", display(&tmp)), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(format!("renaming into {}", display(path)), e))
}

fn delimiter_for(text: &str) -> u8 {
    match text.lines().next() {
        Some(header) if header.contains('\t') => b'\t',
        _ => b',',
    }
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .delimiter(delimiter_for(text))
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes())
}

fn records(path: &Path, text: &str) -> Result<Vec<(u64, Vec<String>)>> {
    let mut out = Vec::new();
    for rec in csv_reader(text).records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        out.push((line, rec.iter().map(|s| s.trim().to_string()).collect()));
    }
    Ok(out)
}

fn parse_f64(path: &Path, line: u64, field: &str, what: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| parse_err(path, line, format!("{what}: `{field}` is not a number")))
}

/// Genes × samples matrix; the header is `gene_id` followed by sample ids.
/// Comma- or tab-separated (detected from the header line).
pub fn read_expression(path: impl AsRef<Path>) -> Result<ExpressionMatrix> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let rows = records(path, &text)?;
    let Some(((hline, header), body)) = rows.split_first() else {
        return Err(parse_err(path, 1, "empty expression file"));
    };
    if header.first().map(String::as_str) != Some("gene_id") {
        return Err(parse_err(path, *hline, "header must start with `gene_id`"));
    }
    let samples: Vec<String> = header[1..].to_vec();
    if samples.is_empty() {
        return Err(parse_err(path, *hline, "header lists no samples"));
    }
    let mut seen = HashSet::new();
    for s in &samples {
        if !seen.insert(s.as_str()) {
            return Err(parse_err(path, *hline, format!("duplicate sample id `{s}`")));
        }
    }
    let mut genes = Vec::with_capacity(body.len());
    let mut values = Vec::with_capacity(body.len() * samples.len());
    let mut seen = HashSet::new();
    for (line, rec) in body {
        if rec.len() != samples.len() + 1 {
            return Err(parse_err(
                path,
                *line,
                format!("expected {} fields, found {}", samples.len() + 1, rec.len()),
            ));
        }
        let gene = &rec[0];
        if !seen.insert(gene.clone()) {
            return Err(parse_err(path, *line, format!("duplicate gene id `{gene}`")));
        }
        for (cell, sample) in rec[1..].iter().zip(&samples) {
            let v = parse_f64(path, *line, cell, &format!("gene {gene}, sample {sample}"))?;
            if !v.is_finite() || v < 0.0 {
                return Err(parse_err(
                    path,
                    *line,
                    format!("gene {gene}, sample {sample}: expression must be finite and non-negative, got {v}"),
                ));
            }
            values.push(v);
        }
        genes.push(gene.clone());
    }
    if genes.is_empty() {
        return Err(parse_err(path, *hline, "no gene rows"));
    }
    let n = genes.len();
    ExpressionMatrix::new(genes, samples.clone(), Tensor::from_vec(n, samples.len(), values)?)
}

pub fn write_expression(path: impl AsRef<Path>, expr: &ExpressionMatrix) -> Result<()> {
    let mut out = String::from("gene_id");
    for s in expr.sample_ids() {
        out.push(',');
        out.push_str(s);
    }
    out.push('\n');
    for (i, g) in expr.gene_ids().iter().enumerate() {
        out.push_str(g);
        for v in expr.values().row(i) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

/// `sample_id,label` with integer labels. The class count is one more than
/// the largest label, and at least two.
pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelVector> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let rows = records(path, &text)?;
    let Some(((hline, header), body)) = rows.split_first() else {
        return Err(parse_err(path, 1, "empty labels file"));
    };
    if header.len() != 2 || header[0] != "sample_id" || header[1] != "label" {
        return Err(parse_err(path, *hline, "header must be `sample_id,label`"));
    }
    let mut ids = Vec::with_capacity(body.len());
    let mut labels = Vec::with_capacity(body.len());
    let mut seen = HashSet::new();
    for (line, rec) in body {
        if rec.len() != 2 {
            return Err(parse_err(path, *line, format!("expected 2 fields, found {}", rec.len())));
        }
        if !seen.insert(rec[0].clone()) {
            return Err(parse_err(path, *line, format!("duplicate sample id `{}`", rec[0])));
        }
        let label = rec[1].parse::<usize>().map_err(|_| {
            parse_err(path, *line, format!("label `{}` is not a non-negative integer", rec[1]))
        })?;
        ids.push(rec[0].clone());
        labels.push(label);
    }
    let classes = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
    LabelVector::new(ids, labels, classes)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &LabelVector) -> Result<()> {
    let mut out = String::from("sample_id,label\n");
    for (s, l) in labels.sample_ids.iter().zip(&labels.labels) {
        out.push_str(&format!("{s},{l}\n"));
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

/// GMT: `name<TAB>description<TAB>gene...` per line.
pub fn read_gmt(path: impl AsRef<Path>) -> Result<PathwayCatalog> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut pathways = Vec::new();
    let mut names = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() < 3 {
            return Err(parse_err(
                path,
                line,
                format!("expected at least 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let name = fields[0].trim();
        if name.is_empty() {
            return Err(parse_err(path, line, "empty pathway name"));
        }
        if !names.insert(name.to_string()) {
            return Err(parse_err(path, line, format!("duplicate pathway `{name}`")));
        }
        let genes: Vec<String> = fields[2..]
            .iter()
            .map(|g| g.trim())
            .filter(|g| !g.is_empty())
            .map(String::from)
            .collect();
        if genes.is_empty() {
            return Err(parse_err(path, line, format!("pathway `{name}` lists no genes")));
        }
        pathways.push(Pathway {
            name: name.to_string(),
            description: fields[1].trim().to_string(),
            genes,
        });
    }
    PathwayCatalog::new(pathways)
}

pub fn write_gmt(path: impl AsRef<Path>, catalog: &PathwayCatalog) -> Result<()> {
    let mut out = String::new();
    for p in catalog.pathways() {
        out.push_str(&p.name);
        out.push('\t');
        out.push_str(&p.description);
        for g in &p.genes {
            out.push('\t');
            out.push_str(g);
        }
        out.push('\n');
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

const PANEL_HEADER: [&str; 7] = [
    "g1",
    "g2",
    "pathway",
    "p_value",
    "page_ratio_case",
    "page_ratio_control",
    "rank",
];

pub fn panel_csv(panel: &DgpPanel) -> String {
    let mut out = PANEL_HEADER.join(",");
    out.push('\n');
    for (i, p) in panel.pairs().iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{:e},{},{},{}\n",
            p.g1,
            p.g2,
            p.pathway,
            p.p_value,
            p.page_ratio_case,
            p.page_ratio_control,
            i + 1
        ));
    }
    out
}

pub fn write_panel(path: impl AsRef<Path>, panel: &DgpPanel) -> Result<()> {
    write_atomic(path.as_ref(), panel_csv(panel).as_bytes())
}

pub fn read_panel(path: impl AsRef<Path>) -> Result<DgpPanel> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let rows = records(path, &text)?;
    let Some(((hline, header), body)) = rows.split_first() else {
        return Err(parse_err(path, 1, "empty panel file"));
    };
    if header.iter().map(String::as_str).ne(PANEL_HEADER) {
        return Err(parse_err(
            path,
            *hline,
            format!("header must be `{}`", PANEL_HEADER.join(",")),
        ));
    }
    let mut pairs = Vec::with_capacity(body.len());
    for (i, (line, rec)) in body.iter().enumerate() {
        if rec.len() != PANEL_HEADER.len() {
            return Err(parse_err(path, *line, format!("expected 7 fields, found {}", rec.len())));
        }
        let rank: usize = rec[6]
            .parse()
            .map_err(|_| parse_err(path, *line, format!("rank `{}` is not an integer", rec[6])))?;
        if rank != i + 1 {
            return Err(parse_err(path, *line, format!("rank {rank} out of order (expected {})", i + 1)));
        }
        pairs.push(GenePair {
            g1: rec[0].clone(),
            g2: rec[1].clone(),
            pathway: rec[2].clone(),
            p_value: parse_f64(path, *line, &rec[3], "p_value")?,
            page_ratio_case: parse_f64(path, *line, &rec[4], "page_ratio_case")?,
            page_ratio_control: parse_f64(path, *line, &rec[5], "page_ratio_control")?,
        });
    }
    DgpPanel::new(pairs)
        .map_err(|e| parse_err(path, *hline, format!("invalid panel: {e}")))
}
