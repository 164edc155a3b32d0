//! Butcher tableaus for explicit Runge-Kutta methods.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for the weight-sum and order conditions.
pub const CONDITION_TOL: f64 = 1e-12;

pub const BUILTIN_NAMES: [&str; 3] = ["rk1", "rk2", "rk4"];

#[derive(Debug, Error)]
pub enum TableauError {
    #[error("unknown tableau {name:?}; available: {}", BUILTIN_NAMES.join(", "))]
    UnknownName { name: String },
    #[error("malformed tableau document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("tableau field {field}: {reason}")]
    Entry { field: String, reason: String },
    #[error("invalid tableau: {0}")]
    Invalid(TableauReport),
    #[error("order must be in 1..=4, got {0}")]
    OrderRange(usize),
}

/// An explicit Runge-Kutta method. `a[i]` holds the `i` coefficients
/// `a[i][j]`, `j < i` (0-based), so `a[0]` is always empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub name: String,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl ButcherTableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Builds a tableau and rejects it if `validate` reports any violation.
    pub fn new(
        name: impl Into<String>,
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        c: Vec<f64>,
    ) -> Result<Self, TableauError> {
        let t = ButcherTableau {
            name: name.into(),
            a,
            b,
            c,
        };
        let report = t.validate();
        if !report.is_valid() {
            return Err(TableauError::Invalid(report));
        }
        Ok(t)
    }

    pub fn validate(&self) -> TableauReport {
        validate_tableau(self)
    }

    pub fn to_json(&self) -> String {
        let doc = TableauDoc {
            name: self.name.clone(),
            s: self.stages(),
            a: self
                .a
                .iter()
                .map(|row| row.iter().map(|&x| Entry::Number(x)).collect())
                .collect(),
            b: self.b.iter().map(|&x| Entry::Number(x)).collect(),
            c: self.c.iter().map(|&x| Entry::Number(x)).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("tableau document serializes")
    }
}

pub fn builtin(name: &str) -> Result<ButcherTableau, TableauError> {
    let t = match name {
        "rk1" => ButcherTableau {
            name: "rk1".into(),
            a: vec![vec![]],
            b: vec![1.0],
            c: vec![0.0],
        },
        "rk2" => ButcherTableau {
            name: "rk2".into(),
            a: vec![vec![], vec![0.5]],
            b: vec![0.0, 1.0],
            c: vec![0.0, 0.5],
        },
        "rk4" => ButcherTableau {
            name: "rk4".into(),
            a: vec![vec![], vec![0.5], vec![0.0, 0.5], vec![0.0, 0.0, 1.0]],
            b: vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            c: vec![0.0, 0.5, 0.5, 1.0],
        },
        _ => {
            return Err(TableauError::UnknownName {
                name: name.to_string(),
            })
        }
    };
    Ok(t)
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableauIssue {
    NoStages,
    RowLength {
        row: usize,
        expected: usize,
        actual: usize,
    },
    Explicitness {
        row: usize,
        col: usize,
    },
    LengthMismatch {
        field: &'static str,
        expected: usize,
        actual: usize,
    },
    NonFinite {
        field: String,
    },
    FirstAbscissa {
        c1: f64,
    },
    WeightSum {
        sum: f64,
    },
    RowSum {
        row: usize,
        c: f64,
        sum: f64,
    },
}

impl fmt::Display for TableauIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableauIssue::NoStages => write!(f, "tableau has no stages"),
            TableauIssue::RowLength {
                row,
                expected,
                actual,
            } => write!(f, "a row {row}: {actual} entries, expected {expected}"),
            TableauIssue::Explicitness { row, col } => {
                write!(
                    f,
                    "a row {row}: entry in column {col} is on or above the diagonal"
                )
            }
            TableauIssue::LengthMismatch {
                field,
                expected,
                actual,
            } => write!(f, "{field}: length {actual}, expected {expected}"),
            TableauIssue::NonFinite { field } => write!(f, "{field}: non-finite entry"),
            TableauIssue::FirstAbscissa { c1 } => write!(f, "c row 1 must be 0, got {c1}"),
            TableauIssue::WeightSum { sum } => write!(f, "b sums to {sum}, expected 1"),
            TableauIssue::RowSum { row, c, sum } => {
                write!(f, "c row {row} is {c} but a row sums to {sum}")
            }
        }
    }
}

/// Rows are reported 1-based.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TableauReport {
    pub violations: Vec<TableauIssue>,
    pub warnings: Vec<TableauIssue>,
}

impl TableauReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for TableauReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("; "))
    }
}

pub fn validate_tableau(t: &ButcherTableau) -> TableauReport {
    let mut report = TableauReport::default();
    let s = t.b.len();
    if s == 0 {
        report.violations.push(TableauIssue::NoStages);
        return report;
    }
    if t.a.len() != s {
        report.violations.push(TableauIssue::LengthMismatch {
            field: "a",
            expected: s,
            actual: t.a.len(),
        });
    }
    if t.c.len() != s {
        report.violations.push(TableauIssue::LengthMismatch {
            field: "c",
            expected: s,
            actual: t.c.len(),
        });
    }
    for (i, row) in t.a.iter().enumerate() {
        if row.len() > i {
            report.violations.push(TableauIssue::Explicitness {
                row: i + 1,
                col: i + 1,
            });
        } else if row.len() < i {
            report.violations.push(TableauIssue::RowLength {
                row: i + 1,
                expected: i,
                actual: row.len(),
            });
        }
        if row.iter().any(|x| !x.is_finite()) {
            report.violations.push(TableauIssue::NonFinite {
                field: format!("a row {}", i + 1),
            });
        }
    }
    for (field, v) in [("b", &t.b), ("c", &t.c)] {
        if v.iter().any(|x| !x.is_finite()) {
            report.violations.push(TableauIssue::NonFinite {
                field: field.to_string(),
            });
        }
    }
    if let Some(&c1) = t.c.first() {
        if c1 != 0.0 {
            report.violations.push(TableauIssue::FirstAbscissa { c1 });
        }
    }
    let sum: f64 = t.b.iter().sum();
    let gap = (sum - 1.0).abs();
    if gap.is_nan() || gap > CONDITION_TOL {
        report.violations.push(TableauIssue::WeightSum { sum });
    }
    if report.is_valid() {
        for (i, (row, &ci)) in t.a.iter().zip(&t.c).enumerate() {
            let rs: f64 = row.iter().sum();
            if (rs - ci).abs() > CONDITION_TOL {
                report.warnings.push(TableauIssue::RowSum {
                    row: i + 1,
                    c: ci,
                    sum: rs,
                });
            }
        }
    }
    report
}

/// A tableau entry: a JSON number or a `"p/q"` string.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Entry {
    Number(f64),
    Text(String),
}

#[derive(Serialize, Deserialize)]
struct TableauDoc {
    name: String,
    s: usize,
    a: Vec<Vec<Entry>>,
    b: Vec<Entry>,
    c: Vec<Entry>,
}

/// Largest integer magnitude for which `p as f64 / q as f64` is a single,
/// correctly rounded operation.
const EXACT_INT: i64 = 1 << 53;

fn parse_rational(text: &str) -> Option<f64> {
    let (p, q) = match text.split_once('/') {
        Some((p, q)) => (p.trim().parse::<i64>().ok()?, q.trim().parse::<i64>().ok()?),
        None => (text.trim().parse::<i64>().ok()?, 1),
    };
    if q == 0 || p.abs() > EXACT_INT || q.abs() > EXACT_INT {
        return None;
    }
    Some(p as f64 / q as f64)
}

fn entry_value(e: &Entry, field: impl Fn() -> String) -> Result<f64, TableauError> {
    match e {
        Entry::Number(x) => Ok(*x),
        Entry::Text(s) => parse_rational(s).ok_or_else(|| TableauError::Entry {
            field: field(),
            reason: format!("{s:?} is not a rational p/q with integer p and nonzero q"),
        }),
    }
}

fn entries(v: &[Entry], name: &str) -> Result<Vec<f64>, TableauError> {
    v.iter()
        .enumerate()
        .map(|(i, e)| entry_value(e, || format!("{name} row {}", i + 1)))
        .collect()
}

/// Parses and validates a tableau document.
///
/// Row `i` of `a` holds the `i - 1` sub-diagonal entries. A full square row
/// is also accepted if everything on and above the diagonal is zero.
pub fn parse_tableau(text: &str) -> Result<ButcherTableau, TableauError> {
    let doc: TableauDoc = serde_json::from_str(text)?;
    let s = doc.s;
    let mut report = TableauReport::default();
    for (field, len) in [("a", doc.a.len()), ("b", doc.b.len()), ("c", doc.c.len())] {
        if len != s {
            report.violations.push(TableauIssue::LengthMismatch {
                field,
                expected: s,
                actual: len,
            });
        }
    }
    let mut a = Vec::with_capacity(doc.a.len());
    for (i, row) in doc.a.iter().enumerate() {
        let mut vals = entries(row, &format!("a row {}", i + 1))?;
        if vals.len() > i {
            if vals.len() == s && vals[i..].iter().all(|&x| x == 0.0) {
                vals.truncate(i);
            } else if let Some(j) = vals[i..].iter().position(|&x| x != 0.0) {
                report.violations.push(TableauIssue::Explicitness {
                    row: i + 1,
                    col: i + j + 1,
                });
            } else {
                report.violations.push(TableauIssue::Explicitness {
                    row: i + 1,
                    col: i + 1,
                });
            }
        }
        a.push(vals);
    }
    if !report.is_valid() {
        return Err(TableauError::Invalid(report));
    }
    ButcherTableau::new(doc.name, a, entries(&doc.b, "b")?, entries(&doc.c, "c")?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderCondition {
    pub order: usize,
    pub label: &'static str,
    pub value: f64,
    pub expected: f64,
    pub passed: bool,
}

/// Evaluates the rooted-tree order conditions for every order up to `p`.
pub fn check_order_conditions(
    t: &ButcherTableau,
    p: usize,
) -> Result<Vec<OrderCondition>, TableauError> {
    if !(1..=4).contains(&p) {
        return Err(TableauError::OrderRange(p));
    }
    let report = t.validate();
    if !report.is_valid() {
        return Err(TableauError::Invalid(report));
    }
    let s = t.stages();
    let b = &t.b;
    let c = &t.c;
    let a = |i: usize, j: usize| if j < i { t.a[i][j] } else { 0.0 };
    let sum = |f: &dyn Fn(usize) -> f64| (0..s).map(f).sum::<f64>();
    // (a c)_i and (a c^2)_i, (a a c)_i
    let ac: Vec<f64> = (0..s).map(|i| sum(&|j| a(i, j) * c[j])).collect();
    let ac2: Vec<f64> = (0..s).map(|i| sum(&|j| a(i, j) * c[j] * c[j])).collect();
    let aac: Vec<f64> = (0..s).map(|i| sum(&|j| a(i, j) * ac[j])).collect();

    let all = [
        (1, "sum b_i = 1", sum(&|i| b[i]), 1.0),
        (2, "sum b_i c_i = 1/2", sum(&|i| b[i] * c[i]), 0.5),
        (
            3,
            "sum b_i c_i^2 = 1/3",
            sum(&|i| b[i] * c[i] * c[i]),
            1.0 / 3.0,
        ),
        (
            3,
            "sum b_i a_ij c_j = 1/6",
            sum(&|i| b[i] * ac[i]),
            1.0 / 6.0,
        ),
        (
            4,
            "sum b_i c_i^3 = 1/4",
            sum(&|i| b[i] * c[i] * c[i] * c[i]),
            0.25,
        ),
        (
            4,
            "sum b_i c_i a_ij c_j = 1/8",
            sum(&|i| b[i] * c[i] * ac[i]),
            0.125,
        ),
        (
            4,
            "sum b_i a_ij c_j^2 = 1/12",
            sum(&|i| b[i] * ac2[i]),
            1.0 / 12.0,
        ),
        (
            4,
            "sum b_i a_ij a_jk c_k = 1/24",
            sum(&|i| b[i] * aac[i]),
            1.0 / 24.0,
        ),
    ];
    Ok(all
        .into_iter()
        .filter(|&(order, ..)| order <= p)
        .map(|(order, label, value, expected)| OrderCondition {
            order,
            label,
            value,
            expected,
            passed: (value - expected).abs() <= CONDITION_TOL,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_match_published_tables() {
        let rk2 = builtin("rk2").unwrap();
        assert_eq!(rk2.b, vec![0.0, 1.0]);
        assert_eq!(rk2.a[1], vec![0.5]);
        assert_eq!(rk2.c, vec![0.0, 0.5]);

        let rk4 = builtin("rk4").unwrap();
        assert_eq!(rk4.b, vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0]);
        assert_eq!(rk4.a[3], vec![0.0, 0.0, 1.0]);

        match builtin("rk3") {
            Err(e @ TableauError::UnknownName { .. }) => {
                let msg = e.to_string();
                assert!(msg.contains("rk1") && msg.contains("rk4"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn builtins_are_valid() {
        for name in BUILTIN_NAMES {
            let r = builtin(name).unwrap().validate();
            assert!(r.is_valid() && r.warnings.is_empty(), "{name}: {r:?}");
        }
    }

    #[test]
    fn parse_rk4_rationals() {
        let doc = r#"{
            "name": "rk4", "s": 4,
            "a": [[], ["1/2"], [0, "1/2"], [0, 0, 1]],
            "b": ["1/6", "1/3", "1/3", "1/6"],
            "c": [0, "1/2", "1/2", 1]
        }"#;
        assert_eq!(parse_tableau(doc).unwrap(), builtin("rk4").unwrap());
    }

    #[test]
    fn parse_accepts_square_rows_with_zero_upper_part() {
        let doc = r#"{"name": "rk2", "s": 2, "a": [[0, 0], [0.5, 0]], "b": [0, 1], "c": [0, 0.5]}"#;
        assert_eq!(parse_tableau(doc).unwrap(), builtin("rk2").unwrap());
    }

    #[test]
    fn parse_rejects_diagonal_entry() {
        let doc = r#"{"name": "bad", "s": 1, "a": [[1]], "b": [1], "c": [0]}"#;
        match parse_tableau(doc) {
            Err(TableauError::Invalid(r)) => assert_eq!(
                r.violations,
                vec![TableauIssue::Explicitness { row: 1, col: 1 }]
            ),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_bad_weights_and_shapes() {
        let doc = r#"{"name": "bad", "s": 2, "a": [[], [0.5]], "b": [0.5, 0.4], "c": [0, 0.5]}"#;
        match parse_tableau(doc) {
            Err(TableauError::Invalid(r)) => {
                assert!(matches!(r.violations[..], [TableauIssue::WeightSum { .. }]))
            }
            other => panic!("unexpected {other:?}"),
        }
        let doc = r#"{"name": "bad", "s": 2, "a": [[], [0.5]], "b": [1], "c": [0, 0.5]}"#;
        assert!(matches!(parse_tableau(doc), Err(TableauError::Invalid(_))));
        let doc = r#"{"name": "bad", "s": 1, "a": [[]], "b": ["1/0"], "c": [0]}"#;
        match parse_tableau(doc) {
            Err(TableauError::Entry { field, .. }) => assert_eq!(field, "b row 1"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_tableau("{\"name\": "),
            Err(TableauError::Parse(_))
        ));
    }

    #[test]
    fn rational_parsing_rounds_once() {
        assert_eq!(parse_rational("1/3"), Some(1.0 / 3.0));
        assert_eq!(parse_rational(" -7 / 2 "), Some(-3.5));
        assert_eq!(parse_rational("4"), Some(4.0));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("0.5/2"), None);
        assert_eq!(parse_rational("1/18014398509481985"), None);
    }

    #[test]
    fn row_sum_is_only_a_warning() {
        let t = ButcherTableau {
            name: "skewed".into(),
            a: vec![vec![], vec![0.5]],
            b: vec![0.0, 1.0],
            c: vec![0.0, 0.4],
        };
        let r = validate_tableau(&t);
        assert!(r.is_valid());
        assert_eq!(r.warnings.len(), 1);

        let t = ButcherTableau {
            b: vec![1.0, 1.0],
            ..builtin("rk2").unwrap()
        };
        let r = validate_tableau(&t);
        assert!(matches!(r.violations[..], [TableauIssue::WeightSum { sum }] if sum == 2.0));
    }

    #[test]
    fn first_abscissa_must_be_zero() {
        let t = ButcherTableau {
            c: vec![0.1],
            ..builtin("rk1").unwrap()
        };
        assert!(!validate_tableau(&t).is_valid());
    }

    #[test]
    fn order_conditions() {
        let rk4 = check_order_conditions(&builtin("rk4").unwrap(), 4).unwrap();
        assert_eq!(rk4.len(), 8);
        assert!(rk4.iter().all(|c| c.passed), "{rk4:?}");

        let rk1 = check_order_conditions(&builtin("rk1").unwrap(), 2).unwrap();
        assert!(rk1[0].passed);
        assert!(!rk1[1].passed);
        assert_eq!(rk1[1].value, 0.0);

        let rk2 = check_order_conditions(&builtin("rk2").unwrap(), 3).unwrap();
        assert!(rk2.iter().filter(|c| c.order <= 2).all(|c| c.passed));
        let c2 = rk2
            .iter()
            .find(|c| c.label.starts_with("sum b_i c_i^2"))
            .unwrap();
        assert_eq!(c2.value, 0.25);
        assert!(!c2.passed);

        assert!(matches!(
            check_order_conditions(&builtin("rk4").unwrap(), 5),
            Err(TableauError::OrderRange(5))
        ));
    }
}
