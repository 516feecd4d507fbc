//! CSV tables with a fixed column order and byte-stable number formatting.

/// 17 significant digits in scientific notation: round-trips every `f64`.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: &[f64]) {
        self.push_cells(row.iter().map(|v| num(*v)).collect());
    }

    pub fn push_cells(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, csv::Error> {
        let mut r = csv::Reader::from_reader(bytes);
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Table { header, rows })
    }

    /// Values of a numeric column; `None` if the column is absent.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k].parse().unwrap_or(f64::NAN)).collect())
    }
}
