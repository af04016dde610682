use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde_json::{Map, Value};

/// Rows with named columns, written as CSV or as a JSON array of objects.
#[derive(Debug, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self { headers: headers.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| Value::Object(self.headers.iter().cloned().zip(r.iter().cloned()).collect()))
                .collect(),
        )
    }
}

pub enum Output {
    Table(Table),
    Document(Value),
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Dotted-key view of a JSON document, arrays indexed from 0.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, Value)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, v)| flatten(&key(k), v, out)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, v)| flatten(&key(&i.to_string()), v, out)),
        leaf => out.push((prefix.to_string(), leaf.clone())),
    }
}

fn write_csv<W: Write>(table: &Table, w: W) -> io::Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(&table.headers)?;
    for r in &table.rows {
        csv.write_record(r.iter().map(cell))?;
    }
    csv.flush()
}

pub fn write(output: &Output, json: bool, path: Option<&Path>) -> io::Result<()> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    write_to(output, json, sink)
}

pub fn write_to<W: Write>(output: &Output, json: bool, mut w: W) -> io::Result<()> {
    match (output, json) {
        (Output::Table(t), false) => write_csv(t, w),
        (Output::Table(t), true) => {
            serde_json::to_writer_pretty(&mut w, &t.to_json())?;
            writeln!(w)?;
            w.flush()
        }
        (Output::Document(d), true) => {
            serde_json::to_writer_pretty(&mut w, d)?;
            writeln!(w)?;
            w.flush()
        }
        (Output::Document(d), false) => {
            let mut pairs = Vec::new();
            flatten("", d, &mut pairs);
            let mut t = Table::new(["key", "value"]);
            for (k, v) in pairs {
                t.push(vec![Value::String(k), v]);
            }
            write_csv(&t, w)
        }
    }
}

pub fn object(pairs: impl IntoIterator<Item = (&'static str, Value)>) -> Value {
    Value::Object(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect::<Map<_, _>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn document_flattens_to_key_value_csv() {
        let doc = json!({"a": 1.5, "b": {"c": [1, 2]}, "d": "x"});
        let mut buf = Vec::new();
        write_to(&Output::Document(doc), false, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "key,value\na,1.5\nb.c.0,1\nb.c.1,2\nd,x\n");
    }

    #[test]
    fn table_as_json_objects() {
        let mut t = Table::new(["k", "v"]);
        t.push(vec![json!(1), json!(0.25)]);
        let mut buf = Vec::new();
        write_to(&Output::Table(t), true, &mut buf).unwrap();
        let v: Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v, json!([{"k": 1, "v": 0.25}]));
    }
}
