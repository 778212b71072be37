use serde::Serialize;

/// One checked inequality: `value` compared against `bound`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Assertion {
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Assertion { name: name.into(), value, bound, pass: value >= bound }
    }

    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Assertion { name: name.into(), value, bound, pass: value <= bound }
    }

    /// |value - target| ≤ tol; reports the deviation.
    pub fn within(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self::at_most(name, (value - target).abs(), tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    F(f64),
    I(u64),
    S(String),
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::F(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::I(v as u64)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::S(v.to_string())
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::S(v.to_string())
    }
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::F(v) => format!("{v:.16e}"),
            Value::I(v) => v.to_string(),
            Value::S(s) => s.clone(),
        }
    }
}

/// A CSV table with a fixed column list.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&'static str]) -> Self {
        Table { name: name.into(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut wr = csv::Writer::from_writer(Vec::new());
        wr.write_record(&self.columns)?;
        for row in &self.rows {
            wr.write_record(row.iter().map(Value::render))?;
        }
        let bytes = wr.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub assertions: Vec<Assertion>,
    pub tables: Vec<Table>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}
