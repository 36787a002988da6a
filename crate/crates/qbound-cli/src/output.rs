use std::fmt::Write as _;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            // shortest round-trip form, exponent notation for tiny or huge values
            Cell::Num(v) if *v == 0.0 => "0.0".into(),
            Cell::Num(v) => format!("{v:?}"),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// One subcommand's result: a header naming the quantity, the log base and
/// the tolerance, then rows in grid order.
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub quantity: String,
    pub base: String,
    /// `None` when each row carries its own tolerance.
    pub tol: Option<f64>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(quantity: &str, base: &str, tol: Option<f64>, columns: &[&str]) -> Self {
        Table {
            quantity: quantity.into(),
            base: base.into(),
            tol,
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let tol = self.tol.map_or_else(|| "per-row".to_string(), |t| format!("{t:e}"));
        let _ = writeln!(s, "# quantity={}; base={}; tol={tol}", self.quantity, self.base);
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(Cell::csv).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("table serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new("demo", "bits", Some(1e-9), &["x", "y", "ok", "name"]);
        t.push(vec![0.1.into(), 3usize.into(), true.into(), "a,b".into()]);
        assert_eq!(t.to_csv(), "# quantity=demo; base=bits; tol=1e-9\nx,y,ok,name\n0.1,3,true,\"a,b\"\n");
    }

    #[test]
    fn json_mirrors_rows() {
        let mut t = Table::new("demo", "nats", Some(1e-6), &["x"]);
        t.push(vec![0.5.into()]);
        let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v["rows"][0][0], 0.5);
        assert_eq!(v["columns"][0], "x");
        assert_eq!(v["base"], "nats");
    }
}
