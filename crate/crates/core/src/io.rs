//! JSON formats for complexes and local systems.
//!
//! A complex is `{ "mode", "cells": [{ "id", "dim", "vertices"?, "faces"? }] }`.
//! A system is `{ "rank", "field": "R"|"C", "backend", "transports": [...] }`
//! where each transport names a face and a cell and gives a matrix whose
//! entries are decimal or `"p/q"` strings, or `[re, im]` pairs.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::complex::{build_complex, Complex, RawComplex};
use crate::error::{Error, Result};
use crate::local_system::{Field, LocalSystem, TransportEntry};
use crate::matrix::Matrix;
use crate::scalar::{parse_rational, Scalar};

/// Arithmetic used for a computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    Exact,
    F64,
    /// High precision: exact rationals when every input is rational.
    Hp,
}

impl FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Backend::Exact),
            "f64" => Ok(Backend::F64),
            "hp" => Ok(Backend::Hp),
            other => Err(Error::Parse(format!("unknown backend '{other}'"))),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Exact => "exact",
            Backend::F64 => "f64",
            Backend::Hp => "hp",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawEntry {
    Text(String),
    Number(f64),
    Pair(Box<RawEntry>, Box<RawEntry>),
}

impl RawEntry {
    fn text(&self) -> Option<String> {
        match self {
            RawEntry::Text(s) => Some(s.clone()),
            RawEntry::Number(x) => Some(format!("{x:?}")),
            RawEntry::Pair(..) => None,
        }
    }

    /// The entry as a backend value, if it is valid there.
    pub fn value<S: Scalar>(&self) -> Option<S> {
        match self {
            RawEntry::Pair(re, im) => S::from_parts(&re.text()?, &im.text()?),
            other => S::parse_entry(&other.text()?),
        }
    }

    /// `true` when the entry is a real rational number.
    fn is_rational(&self) -> bool {
        match self {
            RawEntry::Pair(re, im) => {
                re.text().and_then(|s| parse_rational(&s)).is_some()
                    && im.text().and_then(|s| parse_rational(&s)).is_some_and(|v| v.is_zero_exact())
            }
            other => other.text().and_then(|s| parse_rational(&s)).is_some(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawTransport {
    pub face: String,
    pub cell: String,
    pub matrix: Vec<Vec<RawEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawSystem {
    pub rank: usize,
    pub field: String,
    #[serde(default = "default_backend")]
    pub backend: String,
    pub transports: Vec<RawTransport>,
}

fn default_backend() -> String {
    "f64".into()
}

impl RawSystem {
    pub fn field(&self) -> Result<Field> {
        match self.field.as_str() {
            "R" => Ok(Field::Real),
            "C" => Ok(Field::Complex),
            other => Err(Error::Parse(format!("field must be \"R\" or \"C\", got '{other}'"))),
        }
    }

    pub fn backend(&self) -> Result<Backend> {
        self.backend.parse()
    }

    /// Whether every matrix entry is a real rational (so `hp` can run exactly).
    pub fn all_rational(&self) -> bool {
        self.transports.iter().all(|t| t.matrix.iter().flatten().all(RawEntry::is_rational))
    }
}

/// Parses and validates a complex.
pub fn read_complex(json: &str) -> Result<Complex> {
    let raw: RawComplex = serde_json::from_str(json).map_err(|e| Error::Parse(format!("complex: {e}")))?;
    build_complex(&raw)
}

pub fn write_complex(c: &Complex) -> String {
    serde_json::to_string_pretty(&c.to_raw()).expect("complex serializes")
}

pub fn read_raw_system(json: &str) -> Result<RawSystem> {
    serde_json::from_str(json).map_err(|e| Error::Parse(format!("system: {e}")))
}

/// Builds a local system in backend `S` from its raw description.
pub fn build_system<S: Scalar>(raw: &RawSystem, c: Arc<Complex>, tol: f64) -> Result<LocalSystem<S>> {
    let field = raw.field()?;
    let mut transports = Vec::with_capacity(raw.transports.len());
    for t in &raw.transports {
        if t.matrix.len() != raw.rank || t.matrix.iter().any(|row| row.len() != raw.rank) {
            let r = raw.rank;
            return Err(Error::Parse(format!("transport ({}, {}) is not {r}x{r}", t.face, t.cell)));
        }
        let rows = t
            .matrix
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| {
                        e.value::<S>().ok_or_else(|| {
                            Error::Parse(format!(
                                "entry {e:?} of transport ({}, {}) is not valid for backend {}",
                                t.face,
                                t.cell,
                                S::BACKEND
                            ))
                        })
                    })
                    .collect::<Result<Vec<S>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        transports.push(TransportEntry { face: t.face.clone(), cell: t.cell.clone(), matrix: Matrix::from_rows(rows), sign: t.sign });
    }
    LocalSystem::build(c, raw.rank, field, &transports, tol)
}

fn entry<S: Scalar>(x: &S) -> RawEntry {
    if S::EXACT {
        return RawEntry::Text(x.render());
    }
    let z = x.to_c64();
    // shortest representation that reads back to the same double
    if z.im == 0.0 {
        RawEntry::Text(format!("{:?}", z.re))
    } else {
        RawEntry::Pair(Box::new(RawEntry::Text(format!("{:?}", z.re))), Box::new(RawEntry::Text(format!("{:?}", z.im))))
    }
}

/// The raw description of a system, one transport per attachment.
pub fn system_to_raw<S: Scalar>(sys: &LocalSystem<S>, backend: Backend) -> RawSystem {
    let transports = sys
        .transports()
        .into_iter()
        .map(|t| RawTransport {
            face: t.face,
            cell: t.cell,
            matrix: (0..t.matrix.rows()).map(|i| (0..t.matrix.cols()).map(|j| entry(&t.matrix[(i, j)])).collect()).collect(),
            sign: t.sign,
        })
        .collect();
    RawSystem { rank: sys.rank(), field: sys.field().tag().into(), backend: backend.to_string(), transports }
}

pub fn write_system<S: Scalar>(sys: &LocalSystem<S>, backend: Backend) -> String {
    serde_json::to_string_pretty(&system_to_raw(sys, backend)).expect("system serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families;
    use crate::scalar::{C64, Q};

    #[test]
    fn complex_round_trip() {
        let c = families::torus2().unwrap();
        let back = read_complex(&write_complex(&c)).unwrap();
        assert!(back.same_as(&c));
        assert!(matches!(read_complex("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn system_round_trip_and_entry_forms() {
        let c = Arc::new(families::circle(3).unwrap());
        let sys = families::circle_system(c.clone(), Matrix::scalar(C64::from_polar(1.0, 0.7)), Field::Complex).unwrap();
        let raw = read_raw_system(&write_system(&sys, Backend::F64)).unwrap();
        let back: LocalSystem<C64> = build_system(&raw, c.clone(), 1e-9).unwrap();
        assert_eq!(back.transports().len(), sys.transports().len());
        for (a, b) in back.transports().iter().zip(sys.transports()) {
            assert_eq!(a.matrix, b.matrix);
        }
        let json = r#"{"rank":1,"field":"R","backend":"exact","transports":[
            {"face":"v0","cell":"v0,v1","matrix":[["3/2"]]},
            {"face":"v1","cell":"v0,v1","matrix":[[1]]},
            {"face":"v1","cell":"v1,v2","matrix":[[["1","0"]]]},
            {"face":"v2","cell":"v1,v2","matrix":[["1"]]},
            {"face":"v0","cell":"v0,v2","matrix":[["1"]]},
            {"face":"v2","cell":"v0,v2","matrix":[["1.0"]]}]}"#;
        let raw = read_raw_system(json).unwrap();
        assert!(raw.all_rational());
        let sys: LocalSystem<Q> = build_system(&raw, c.clone(), 0.0).unwrap();
        assert_eq!(sys.restriction(0, c.index_of("v0,v1").unwrap()).unwrap()[(0, 0)], Q::new(3.into(), 2.into()));
        let bad = json.replace("\"3/2\"", "[\"1\",\"2\"]");
        assert!(!read_raw_system(&bad).unwrap().all_rational());
        assert!(matches!(build_system::<Q>(&read_raw_system(&bad).unwrap(), c, 0.0), Err(Error::Parse(_))));
    }
}
