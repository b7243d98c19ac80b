use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Text(if x { "pass" } else { "fail" }.into())
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.into())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // Shortest round-trip representation: stable across runs.
            Cell::Num(x) => format!("{x}"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => {
                if s.contains([',', '"', '\n']) {
                    format!("\"{}\"", s.replace('"', "\"\""))
                } else {
                    s.clone()
                }
            }
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            Cell::Text(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub name: String,
    /// Column name and unit (empty for dimensionless).
    pub columns: Vec<(String, String)>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new(name: &str, columns: &[(&str, &str)]) -> Self {
        ResultTable {
            name: name.into(),
            columns: columns.iter().map(|(c, u)| (c.to_string(), u.to_string())).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch in {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Vec<f64> {
        let i = self.columns.iter().position(|(c, _)| c == name).expect("known column");
        self.rows.iter().map(|r| r[i].as_f64().unwrap_or(f64::NAN)).collect()
    }

    pub fn to_csv(&self, prov: &Provenance) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# micromacro {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "# command: {}", prov.command);
        let _ = writeln!(out, "# table: {}", self.name);
        let _ = writeln!(out, "# config_sha256: {}", prov.config_hash);
        let _ = writeln!(out, "# seed: {}", prov.seed);
        let units: Vec<String> = self
            .columns
            .iter()
            .map(|(c, u)| if u.is_empty() { c.clone() } else { format!("{c} [{u}]") })
            .collect();
        let _ = writeln!(out, "# units: {}", units.join(", "));
        let header: Vec<&str> = self.columns.iter().map(|(c, _)| c.as_str()).collect();
        let _ = writeln!(out, "{}", header.join(","));
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(Cell::render).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = ResultTable::new("demo", &[("x", "ns"), ("label", "")]);
        t.push(vec![0.1.into(), "a,b".into()]);
        t.push(vec![2.0.into(), "c".into()]);
        let prov = Provenance {
            command: "test".into(),
            config_hash: "abc".into(),
            seed: 3,
        };
        let csv = t.to_csv(&prov);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[..6].iter().all(|l| l.starts_with('#')));
        assert_eq!(lines[6], "x,label");
        assert_eq!(lines[7], "0.1,\"a,b\"");
        assert_eq!(lines[8], "2,c");
        assert_eq!(t.column("x"), vec![0.1, 2.0]);
    }
}
