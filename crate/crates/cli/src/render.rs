//! Text, CSV and SVG renderings. JSON carries full precision; the text
//! tables round bits to 6 and millibits to 3 decimals.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};
use trihelix::decomp::{PanelPoint, SynergyDecomposition};
use trihelix::infomeasure::{InfoReport, UnitScale};

fn mbits(unit: UnitScale) -> bool {
    unit == UnitScale::Millibits
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn render(&self) -> String {
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            out.push_str(parts.join("  ").trim_end());
            out.push('\n');
        };
        line(&mut out, &self.header);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        line(&mut out, &rule);
        for row in &self.rows {
            line(&mut out, row);
        }
        out
    }
}

fn bit_cells(v: f64, unit: UnitScale) -> Vec<String> {
    let mut cells = vec![format!("{v:.6}")];
    if mbits(unit) {
        cells.push(format!("{:.3}", v * 1000.0));
    }
    cells
}

fn bit_header(first: &[&str], unit: UnitScale) -> Vec<String> {
    let mut h: Vec<String> = first.iter().map(|s| s.to_string()).collect();
    h.push("bits".into());
    if mbits(unit) {
        h.push("mbits".into());
    }
    h
}

fn report_rows(report: &InfoReport) -> Vec<(String, String, f64)> {
    let mut rows = Vec::new();
    for (d, h) in report.dims.iter().zip(&report.entropies) {
        rows.push(("H".to_string(), d.clone(), *h));
    }
    for (s, h) in &report.joint_entropies {
        rows.push(("H".to_string(), s.join(","), *h));
    }
    for (s, t) in &report.transmissions {
        rows.push(("T".to_string(), s.join(","), *t));
    }
    for (d, h) in report.dims.iter().zip(&report.max_entropies) {
        rows.push(("H_max".to_string(), d.clone(), *h));
    }
    let all = report.dims.join(",");
    rows.push(("left_bracket".into(), all.clone(), report.left_bracket));
    rows.push(("right_bracket".into(), all.clone(), report.right_bracket));
    rows.push(("R_n".into(), all, report.mutual_redundancy));
    rows
}

pub fn report_text(report: &InfoReport) -> String {
    let mut table = Table::new(bit_header(&["measure", "subset"], report.unit));
    for (measure, subset, v) in report_rows(report) {
        let mut row = vec![measure, subset];
        row.extend(bit_cells(v, report.unit));
        table.push(row);
    }
    let mut out = table.render();
    out.push('\n');
    let mut shannon = Table::new(["dimension", "shannon_redundancy"]);
    for (d, r) in report.dims.iter().zip(&report.shannon_redundancy) {
        shannon.push(vec![d.clone(), format!("{r:.6}")]);
    }
    out.push_str(&shannon.render());
    let mode = serde_json::to_value(report.max_mode).unwrap_or(Value::Null);
    let _ = writeln!(out, "\nmax_mode: {}", mode.as_str().unwrap_or("?"));
    let _ = writeln!(out, "total mass: {}  cells: {}", report.total_mass, report.cell_count);
    let _ = writeln!(out, "verdict: {} (epsilon {:e})", report.verdict.as_str(), report.epsilon);
    for f in &report.flags {
        let _ = writeln!(out, "flag: {f}");
    }
    out
}

pub fn report_csv(report: &InfoReport) -> String {
    let mut out = String::from("measure,subset,bits");
    if mbits(report.unit) {
        out.push_str(",mbits");
    }
    out.push('\n');
    for (measure, subset, v) in report_rows(report) {
        let _ = write!(out, "{measure},\"{subset}\",{v}");
        if mbits(report.unit) {
            let _ = write!(out, ",{}", v * 1000.0);
        }
        out.push('\n');
    }
    out
}

/// Decomposition as a JSON object, with `_mbits` siblings in millibit mode.
pub fn decomposition_json(d: &SynergyDecomposition) -> Value {
    let mb = mbits(d.unit);
    let scaled = |obj: &mut Map<String, Value>, key: &str, v: f64| {
        obj.insert(key.to_string(), json!(v));
        if mb {
            obj.insert(format!("{key}_mbits"), json!(v * 1000.0));
        }
    };
    let groups: Vec<Value> = d
        .groups
        .iter()
        .map(|g| {
            let mut o = Map::new();
            o.insert("key".into(), json!(g.key));
            o.insert("record_count".into(), json!(g.record_count));
            o.insert("mass".into(), json!(g.mass));
            o.insert("weight".into(), json!(g.weight));
            scaled(&mut o, "transmission", g.transmission);
            scaled(&mut o, "contribution", g.contribution);
            o.insert("unreliable".into(), json!(g.unreliable));
            Value::Object(o)
        })
        .collect();
    let mut o = Map::new();
    o.insert("unit".into(), serde_json::to_value(d.unit).unwrap_or(Value::Null));
    o.insert("group_dim".into(), json!(d.group_dim));
    o.insert("measure_dims".into(), json!(d.measure_dims));
    o.insert("total_mass".into(), json!(d.total_mass));
    scaled(&mut o, "pooled_transmission", d.pooled_transmission);
    scaled(&mut o, "within_transmission", d.within_transmission);
    scaled(&mut o, "delta_transmission", d.delta_transmission);
    o.insert("single_group".into(), json!(d.single_group));
    o.insert("interpretation".into(), json!(d.interpretation));
    o.insert("warnings".into(), json!(d.warnings));
    o.insert("groups".into(), Value::Array(groups));
    Value::Object(o)
}

pub fn decomposition_csv(d: &SynergyDecomposition) -> String {
    let mut out = String::from("group_key,weight,T_g_bits,T_g_mbits,contribution\n");
    for g in &d.groups {
        let key = if g.key.contains([',', '"', '\n']) {
            format!("\"{}\"", g.key.replace('"', "\"\""))
        } else {
            g.key.clone()
        };
        let _ = writeln!(
            out,
            "{key},{},{},{},{}",
            g.weight,
            g.transmission,
            g.transmission * 1000.0,
            g.contribution
        );
    }
    out
}

pub fn decomposition_text(d: &SynergyDecomposition) -> String {
    let mut header = vec!["group", "records", "weight", "T_g bits"];
    if mbits(d.unit) {
        header.push("T_g mbits");
    }
    header.push("contribution");
    let mut table = Table::new(header);
    for g in &d.groups {
        let mut row = vec![
            format!("{}{}", g.key, if g.unreliable { " *" } else { "" }),
            g.record_count.to_string(),
            format!("{:.6}", g.weight),
        ];
        row.extend(bit_cells(g.transmission, d.unit));
        row.push(format!("{:.6}", g.contribution));
        table.push(row);
    }
    let mut out = table.render();
    let line = |label: &str, v: f64| {
        if mbits(d.unit) {
            format!("{label}: {v:.6} bits ({:.3} mbits)\n", v * 1000.0)
        } else {
            format!("{label}: {v:.6} bits\n")
        }
    };
    out.push('\n');
    out.push_str(&line("pooled T", d.pooled_transmission));
    out.push_str(&line("sum of weighted T_g", d.within_transmission));
    out.push_str(&line("delta T", d.delta_transmission));
    let _ = writeln!(out, "{}", d.interpretation);
    for w in &d.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

pub fn panel_json(points: &[PanelPoint], unit: UnitScale) -> Value {
    let mb = mbits(unit);
    Value::Array(
        points
            .iter()
            .map(|p| {
                let mut o = Map::new();
                o.insert("period".into(), json!(p.period));
                for (k, v) in [("H_obs", p.h_obs), ("H_max", p.h_max)] {
                    o.insert(k.into(), json!(v));
                    if mb {
                        o.insert(format!("{k}_mbits"), json!(v * 1000.0));
                    }
                }
                o.insert("shannon_R".into(), json!(p.shannon_redundancy));
                o.insert("R_n".into(), json!(p.mutual_redundancy));
                if mb {
                    o.insert("R_n_mbits".into(), json!(p.mutual_redundancy * 1000.0));
                }
                o.insert("record_count".into(), json!(p.record_count));
                o.insert("total_mass".into(), json!(p.total_mass));
                Value::Object(o)
            })
            .collect(),
    )
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn panel_csv(points: &[PanelPoint], unit: UnitScale) -> String {
    let mb = mbits(unit);
    let mut out = String::from("period,H_obs_bits,H_max_bits,shannon_R,R_n_bits,record_count");
    if mb {
        out.push_str(",H_obs_mbits,H_max_mbits,R_n_mbits");
    }
    out.push('\n');
    for p in points {
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            csv_field(&p.period),
            p.h_obs,
            p.h_max,
            p.shannon_redundancy,
            p.mutual_redundancy,
            p.record_count
        );
        if mb {
            let _ = write!(out, ",{},{},{}", p.h_obs * 1000.0, p.h_max * 1000.0, p.mutual_redundancy * 1000.0);
        }
        out.push('\n');
    }
    out
}

pub fn panel_text(points: &[PanelPoint], unit: UnitScale) -> String {
    let mut header = vec!["period", "records", "H_obs", "H_max", "shannon_R", "R_n"];
    if mbits(unit) {
        header.push("R_n mbits");
    }
    let mut table = Table::new(header);
    for p in points {
        let mut row = vec![
            p.period.clone(),
            p.record_count.to_string(),
            format!("{:.6}", p.h_obs),
            format!("{:.6}", p.h_max),
            format!("{:.6}", p.shannon_redundancy),
            format!("{:.6}", p.mutual_redundancy),
        ];
        if mbits(unit) {
            row.push(format!("{:.3}", p.mutual_redundancy * 1000.0));
        }
        table.push(row);
    }
    table.render()
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Line chart of H_obs, H_max and R_n (all in bits) over the periods.
pub fn panel_svg(points: &[PanelPoint]) -> String {
    const W: f64 = 720.0;
    const H: f64 = 400.0;
    const LEFT: f64 = 60.0;
    const RIGHT: f64 = 150.0;
    const TOP: f64 = 20.0;
    const BOTTOM: f64 = 50.0;

    let values = points
        .iter()
        .flat_map(|p| [p.h_obs, p.h_max, p.mutual_redundancy]);
    let (mut lo, mut hi) = values.fold((0.0f64, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi - lo < 1e-9 {
        hi = lo + 1.0;
    }
    let pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;
    let x = |i: usize| {
        if points.len() <= 1 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + plot_w * i as f64 / (points.len() - 1) as f64
        }
    };
    let y = |v: f64| TOP + plot_h * (hi - v) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r##"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="#333"/>"##,
        TOP + plot_h
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{LEFT}" y1="{0}" x2="{1}" y2="{0}" stroke="#333"/>"##,
        TOP + plot_h,
        LEFT + plot_w
    );
    for k in 0..=5 {
        let v = lo + (hi - lo) * k as f64 / 5.0;
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="{:.1}" text-anchor="end">{v:.2}</text>"##,
            LEFT - 6.0,
            y(v) + 4.0
        );
    }
    if lo < 0.0 && hi > 0.0 {
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{0:.1}" x2="{1}" y2="{0:.1}" stroke="#bbb" stroke-dasharray="2,3"/>"##,
            y(0.0),
            LEFT + plot_w
        );
    }
    for (i, p) in points.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            x(i),
            TOP + plot_h + 18.0,
            escape_xml(&p.period)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{}" text-anchor="middle">period</text>"#,
        LEFT + plot_w / 2.0,
        H - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.1}" transform="rotate(-90 14 {:.1})" text-anchor="middle">bits</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    let series: [(&str, &str, &str, fn(&PanelPoint) -> f64); 3] = [
        ("H_obs", "#1f77b4", "", |p| p.h_obs),
        ("H_max", "#555555", "6,4", |p| p.h_max),
        ("R_n", "#d62728", "", |p| p.mutual_redundancy),
    ];
    for (k, (name, color, dash, get)) in series.iter().enumerate() {
        let coords: Vec<String> = points
            .iter()
            .enumerate()
            .map(|(i, p)| format!("{:.1},{:.1}", x(i), y(get(p))))
            .collect();
        let dash_attr = if dash.is_empty() { String::new() } else { format!(r#" stroke-dasharray="{dash}""#) };
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash_attr}/>"#,
            coords.join(" ")
        );
        for c in &coords {
            let (cx, cy) = c.split_once(',').unwrap_or(("0", "0"));
            let _ = writeln!(svg, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
        }
        let ly = TOP + 10.0 + 20.0 * k as f64;
        let lx = LEFT + plot_w + 20.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash_attr}/>"#,
            lx + 24.0
        );
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{name}</text>"#, lx + 30.0, ly + 4.0);
    }
    svg.push_str("</svg>\n");
    svg
}
