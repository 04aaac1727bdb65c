//! 0/1 QUBO form of an Ising program and its coordinate-list text format.
//!
//! ```text
//! # qubo
//! # offset -0.5
//! # num_variables 3
//! # num_logical 3
//! # convention x = (1 + s) / 2
//! 0 0 1
//! 0 2 -4
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::IsingProgram;

/// `offset + sum_{i<=j} Q_ij x_i x_j` with `x_i x_i = x_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Qubo<T> {
    pub num_variables: usize,
    pub num_logical: usize,
    pub offset: T,
    #[serde(with = "crate::serde_pairs")]
    pub entries: BTreeMap<(usize, usize), T>,
}

impl<T: Scalar> Qubo<T> {
    /// Substitutes `s = 2x - 1`.
    pub fn from_program(program: &IsingProgram<T>) -> Self {
        let two = T::lit(2.0);
        let mut entries: BTreeMap<(usize, usize), T> = BTreeMap::new();
        let mut offset = program.offset;
        let mut add = |k: (usize, usize), v: T| *entries.entry(k).or_insert_with(T::zero) += v;
        for (&i, &h) in &program.fields {
            add((i, i), two * h);
            offset -= h;
        }
        for (&(i, j), &w) in &program.couplings {
            add((i, j), T::lit(4.0) * w);
            add((i, i), -two * w);
            add((j, j), -two * w);
            offset += w;
        }
        entries.retain(|_, v| *v != T::zero());
        Self {
            num_variables: program.num_spins(),
            num_logical: program.num_logical,
            offset,
            entries,
        }
    }

    /// Substitutes `x = (1 + s) / 2`. Gadget records are not recoverable.
    pub fn to_program(&self) -> IsingProgram<T> {
        let half = T::lit(0.5);
        let quarter = T::lit(0.25);
        let mut p = IsingProgram::empty(self.num_logical);
        p.num_ancilla = self.num_variables - self.num_logical;
        p.offset = self.offset;
        for (&(i, j), &v) in &self.entries {
            if i == j {
                p.offset += half * v;
                p.add_field(i, half * v);
            } else {
                p.offset += quarter * v;
                p.add_field(i, quarter * v);
                p.add_field(j, quarter * v);
                p.add_coupling(i, j, quarter * v);
            }
        }
        p
    }

    pub fn energy(&self, bits: &[u8]) -> T {
        self.offset
            + self
                .entries
                .iter()
                .filter(|(&(i, j), _)| bits[i] != 0 && bits[j] != 0)
                .map(|(_, &v)| v)
                .sum::<T>()
    }

    /// Coordinate-list text. Extra comment lines (e.g. a run configuration)
    /// go after the fixed header.
    pub fn to_text(&self, extra_comments: &[String]) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# qubo");
        let _ = writeln!(s, "# offset {}", self.offset);
        let _ = writeln!(s, "# num_variables {}", self.num_variables);
        let _ = writeln!(s, "# num_logical {}", self.num_logical);
        let _ = writeln!(s, "# convention x = (1 + s) / 2");
        for c in extra_comments {
            for line in c.lines() {
                let _ = writeln!(s, "# {line}");
            }
        }
        for (&(i, j), v) in &self.entries {
            let _ = writeln!(s, "{i} {j} {v}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut offset = T::zero();
        let mut num_variables = None;
        let mut num_logical = None;
        let mut entries = BTreeMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let err = |reason: String| Error::Parse { line, reason };
            let t = raw.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(c) = t.strip_prefix('#') {
                let mut it = c.split_whitespace();
                match (it.next(), it.next()) {
                    (Some("offset"), Some(v)) => {
                        offset = v.parse().map_err(|_| err(format!("bad offset {v:?}")))?;
                    }
                    (Some("num_variables"), Some(v)) => {
                        num_variables = Some(v.parse::<usize>().map_err(|_| err(format!("bad count {v:?}")))?);
                    }
                    (Some("num_logical"), Some(v)) => {
                        num_logical = Some(v.parse::<usize>().map_err(|_| err(format!("bad count {v:?}")))?);
                    }
                    _ => {}
                }
                continue;
            }
            let fields: Vec<&str> = t.split_whitespace().collect();
            let [i, j, v] = fields[..] else {
                return Err(err(format!("expected `i j value`, got {t:?}")));
            };
            let i: usize = i.parse().map_err(|_| err(format!("bad index {i:?}")))?;
            let j: usize = j.parse().map_err(|_| err(format!("bad index {j:?}")))?;
            let v: T = v.parse().map_err(|_| err(format!("bad value {v:?}")))?;
            if i > j {
                return Err(err(format!("entry ({i}, {j}) must have i <= j")));
            }
            if entries.insert((i, j), v).is_some() {
                return Err(err(format!("duplicate entry ({i}, {j})")));
            }
        }
        let max_index = entries.keys().map(|&(_, j)| j + 1).max().unwrap_or(0);
        let num_variables = num_variables.unwrap_or(max_index);
        if max_index > num_variables {
            return Err(Error::Parse {
                line: 0,
                reason: format!("index {} beyond num_variables {num_variables}", max_index - 1),
            });
        }
        let num_logical = num_logical.unwrap_or(num_variables);
        if num_logical > num_variables {
            return Err(Error::Parse {
                line: 0,
                reason: format!("num_logical {num_logical} exceeds num_variables {num_variables}"),
            });
        }
        Ok(Self {
            num_variables,
            num_logical,
            offset,
            entries,
        })
    }
}

/// Writes `program` as a QUBO coordinate list.
pub fn export_qubo<T: Scalar>(
    program: &IsingProgram<T>,
    path: impl AsRef<Path>,
    extra_comments: &[String],
) -> Result<Qubo<T>> {
    let path = path.as_ref();
    let q = Qubo::from_program(program);
    std::fs::write(path, q.to_text(extra_comments)).map_err(|e| Error::io(path, e))?;
    Ok(q)
}

pub fn import_qubo<T: Scalar>(path: impl AsRef<Path>) -> Result<Qubo<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Qubo::parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_field() {
        let mut p = IsingProgram::<f64>::empty(1);
        p.add_field(0, 1.5);
        let q = Qubo::from_program(&p);
        assert_eq!(q.entries.get(&(0, 0)), Some(&3.0));
        assert_eq!(q.offset, -1.5);
        assert_eq!(q.energy(&[0]), p.energy(&[0]));
        assert_eq!(q.energy(&[1]), p.energy(&[1]));
    }

    #[test]
    fn empty_program_has_header_only() {
        let q = Qubo::from_program(&IsingProgram::<f64>::empty(0));
        let text = q.to_text(&[]);
        assert!(text.lines().all(|l| l.starts_with('#')));
        assert!(text.contains("# offset 0"));
        let back = Qubo::<f64>::parse(&text).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn text_round_trip() {
        let mut p = IsingProgram::<f64>::empty(2);
        p.num_ancilla = 1;
        p.add_field(0, 0.1);
        p.add_field(2, -0.7);
        p.add_coupling(0, 1, 1.0 / 3.0);
        p.add_coupling(1, 2, 2.5);
        p.offset = 0.25;
        let q = Qubo::from_program(&p);
        let text = q.to_text(&["{\"seed\": 1}".to_string()]);
        let back = Qubo::<f64>::parse(&text).unwrap();
        assert_eq!(back, q);
        let prog = back.to_program();
        for mask in 0..8u8 {
            let bits: Vec<u8> = (0..3).map(|i| mask >> i & 1).collect();
            assert!((prog.energy(&bits) - p.energy(&bits)).abs() < 1e-12);
        }
    }

    #[test]
    fn parse_errors_carry_line() {
        let e = Qubo::<f64>::parse("# offset 1\n1 0 2\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        assert!(Qubo::<f64>::parse("0 0\n").is_err());
        assert!(Qubo::<f64>::parse("# num_variables 1\n0 3 1\n").is_err());
    }
}
