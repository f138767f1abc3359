//! CSV artifacts and the run manifest.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which parses
//! back to the identical `f64`. The manifest is TOML with sections and keys
//! in sorted order and no timestamps or absolute paths.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use kglab_core::trajectories::TrajectoryEnsemble;
use kglab_core::{ScalarField, SpacetimeGrid};

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// `t,x,<names...>` with one row per lattice point.
pub fn field_csv(grid: &SpacetimeGrid, columns: &[(&str, &ScalarField)]) -> String {
    let mut out = String::from("t,x");
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for n in 0..grid.nt {
        let t = fmt_f64(grid.t(n));
        for i in 0..grid.nx {
            out.push_str(&t);
            out.push(',');
            out.push_str(&fmt_f64(grid.x(i)));
            for (_, f) in columns {
                out.push(',');
                out.push_str(&fmt_f64(f.at(n, i)));
            }
            out.push('\n');
        }
    }
    out
}

/// `seed_id,t,x,vx`, one row per stored sample of every path.
pub fn trajectories_csv(te: &TrajectoryEnsemble) -> String {
    let mut out = String::from("seed_id,t,x,vx\n");
    for (id, (path, vel)) in te.paths.iter().zip(&te.velocities).enumerate() {
        for (n, (x, v)) in path.iter().zip(vel).enumerate() {
            let _ = writeln!(out, "{id},{},{},{}", fmt_f64(te.times[n]), fmt_f64(*x), fmt_f64(*v));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Float(f64),
}

pub fn table_csv(header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Text(s) => s.clone(),
                Cell::Float(x) => fmt_f64(*x),
            })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Float(f64),
    Int(i64),
    Bool(bool),
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.into())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Int(x as i64)
    }
}

impl From<u64> for Value {
    fn from(x: u64) -> Self {
        Value::Int(x as i64)
    }
}

impl From<bool> for Value {
    fn from(x: bool) -> Self {
        Value::Bool(x)
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn key(k: &str) -> String {
    if !k.is_empty() && k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        k.to_string()
    } else {
        quote(k)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    sections: BTreeMap<String, BTreeMap<String, Value>>,
}

impl Manifest {
    pub fn set(&mut self, section: &str, name: &str, value: impl Into<Value>) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(name.to_string(), value.into());
    }

    pub fn get(&self, section: &str, name: &str) -> Option<&Value> {
        self.sections.get(section)?.get(name)
    }

    pub fn section(&self, section: &str) -> Option<&BTreeMap<String, Value>> {
        self.sections.get(section)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, (name, entries)) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "[{}]", key(name));
            for (k, v) in entries {
                let value = match v {
                    Value::Str(s) => quote(s),
                    Value::Float(x) => fmt_f64(*x),
                    Value::Int(n) => n.to_string(),
                    Value::Bool(b) => b.to_string(),
                };
                let _ = writeln!(out, "{} = {value}", key(k));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -1.0 / 3.0, 6.02214076e23, 5e-324, f64::MAX, 0.0, -0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn manifest_is_sorted_toml() {
        let mut m = Manifest::default();
        m.set("b", "z", 1.5);
        m.set("b", "a", "x\"y");
        m.set("a", "fields.csv", true);
        let text = m.render();
        assert_eq!(
            text,
            "[a]\n\"fields.csv\" = true\n\n[b]\na = \"x\\\"y\"\nz = 1.5000000000000000e0\n"
        );
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
