//! Columnar CSV output: a `#` metadata line carrying the config hash, a header
//! row, then rows of numbers at 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use weylrat::{GridSpec, PotentialField, Row, C64};

/// 17 significant digits: enough for a lossless f64 round trip.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    /// Key-value pairs for the metadata line, in emission order.
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Table {
            columns,
            ..Default::default()
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn render(&self) -> String {
        let mut out = String::from("#");
        for (k, v) in &self.meta {
            let _ = write!(out, " {k}={v}");
        }
        out.push('\n');
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| num(v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.render())
    }

    pub fn parse(text: &str) -> Result<Table, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut table = Table::default();
        let mut header = lines.next().ok_or("empty file")?;
        if let Some(meta) = header.strip_prefix('#') {
            for token in meta.split_whitespace() {
                let (k, v) = token
                    .split_once('=')
                    .ok_or_else(|| format!("metadata token '{token}' is not key=value"))?;
                table.meta.push((k.to_string(), v.to_string()));
            }
            header = lines.next().ok_or("missing header row")?;
        }
        table.columns = header.split(',').map(|c| c.trim().to_string()).collect();
        for (i, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| format!("row {}: {e}", i + 1))?;
            if row.len() != table.columns.len() {
                return Err(format!(
                    "row {} has {} cells for {} columns",
                    i + 1,
                    row.len(),
                    table.columns.len()
                ));
            }
            table.rows.push(row);
        }
        Ok(table)
    }

    pub fn read(path: &Path) -> Result<Table, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Table::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// Flat key-value document for run diagnostics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub entries: Vec<(String, String)>,
}

impl Diagnostics {
    pub fn num(&mut self, key: impl Into<String>, v: f64) {
        self.entries.push((key.into(), num(v)));
    }

    pub fn text(&mut self, key: impl Into<String>, v: impl ToString) {
        self.entries.push((key.into(), v.to_string()));
    }

    pub fn render(&self, hash: &str) -> String {
        let mut out = format!("# config_sha256={hash}\nkey,value\n");
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }
}

fn complex_columns(prefix: &str) -> [String; 2] {
    [format!("re_{prefix}"), format!("im_{prefix}")]
}

/// Columns x, then Re/Im of β_k1, β_k2 for each k (1-based names).
pub fn potential_table(field: &PotentialField) -> Table {
    let mut cols = vec!["x".to_string()];
    for k in 1..=field.m() {
        for c in 1..=2 {
            cols.extend(complex_columns(&format!("beta{k}_{c}")));
        }
    }
    let mut t = Table::new(cols);
    let grid = field.grid();
    for (i, x) in grid.nodes().enumerate() {
        let mut row = vec![x];
        for k in 0..field.m() {
            for z in field.row(k, i) {
                row.extend([z.re, z.im]);
            }
        }
        t.rows.push(row);
    }
    t
}

pub fn potential_from_table(t: &Table) -> Result<PotentialField, String> {
    let width = t.columns.len();
    if width < 5 || (width - 1) % 4 != 0 || t.columns[0] != "x" {
        return Err("expected columns x, then re/im of beta_k1, beta_k2 per pole".into());
    }
    if t.rows.len() < 3 {
        return Err("need at least 3 nodes".into());
    }
    let m = (width - 1) / 4;
    let n = t.rows.len() - 1;
    let l = t.rows[n][0];
    let grid = GridSpec::new(l, n).map_err(|e| e.to_string())?;
    for (i, r) in t.rows.iter().enumerate() {
        if (r[0] - grid.node(i)).abs() > 1e-9 * l.max(1.0) {
            return Err(format!("x = {} at row {} is not on a uniform grid from 0", r[0], i + 1));
        }
    }
    let rows: Vec<Vec<Row>> = (0..m)
        .map(|k| {
            t.rows
                .iter()
                .map(|r| {
                    let at = 1 + 4 * k;
                    [C64::new(r[at], r[at + 1]), C64::new(r[at + 2], r[at + 3])]
                })
                .collect()
        })
        .collect();
    PotentialField::new(grid, rows).map_err(|e| e.to_string())
}

/// Column `name`'s complex samples from its re_/im_ pair.
pub fn complex_column(t: &Table, name: &str) -> Result<Vec<C64>, String> {
    let [re, im] = complex_columns(name);
    let (a, b) = t
        .column(&re)
        .zip(t.column(&im))
        .ok_or_else(|| format!("missing columns {re}/{im}"))?;
    Ok(t.rows.iter().map(|r| C64::new(r[a], r[b])).collect())
}

/// Appends `values` as the column pair re_name, im_name.
pub fn push_complex(t: &mut Table, name: &str, values: &[C64]) {
    t.columns.extend(complex_columns(name));
    for (row, v) in t.rows.iter_mut().zip(values) {
        row.extend([v.re, v.im]);
    }
}
