use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Which symbol a model variable stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    X,
    S,
    Y,
    I,
}

impl Role {
    pub fn symbol(self) -> &'static str {
        match self {
            Role::X => "x",
            Role::S => "s",
            Role::Y => "y",
            Role::I => "I",
        }
    }
}

/// Symbol, facility and period of one model variable. Ordering is
/// (role, facility, period) and drives branching tie-breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarKey {
    pub role: Role,
    pub facility: u32,
    pub period: u32,
}

impl VarKey {
    pub fn new(role: Role, facility: usize, period: usize) -> Self {
        VarKey {
            role,
            facility: facility as u32,
            period: period as u32,
        }
    }

    pub fn y(facility: usize, period: usize) -> Self {
        VarKey::new(Role::Y, facility, period)
    }
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}_{}", self.role.symbol(), self.facility, self.period)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub key: VarKey,
    pub lower: f64,
    pub upper: f64,
    pub binary: bool,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * values[j]).sum()
    }

    /// Amount by which `values` violates the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A minimization model: bounded variables, sparse rows, linear objective.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MipModel {
    vars: Vec<Variable>,
    rows: Vec<Row>,
    index: HashMap<VarKey, usize>,
}

impl MipModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable and returns its column index.
    ///
    /// # Panics
    /// On a duplicate key, non-finite cost, or `lower > upper`.
    pub fn add_var(&mut self, key: VarKey, lower: f64, upper: f64, binary: bool, cost: f64) -> usize {
        assert!(cost.is_finite(), "objective coefficient of {key} is not finite");
        assert!(lower <= upper, "{key}: lower bound {lower} exceeds upper bound {upper}");
        let column = self.vars.len();
        let previous = self.index.insert(key, column);
        assert!(previous.is_none(), "duplicate variable {key}");
        self.vars.push(Variable {
            key,
            lower,
            upper,
            binary,
            cost,
        });
        column
    }

    /// Adds a row; terms with zero coefficients are dropped.
    pub fn add_row(&mut self, name: impl Into<String>, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        assert!(rhs.is_finite());
        let terms = terms
            .into_iter()
            .filter(|&(_, a)| {
                assert!(a.is_finite());
                a != 0.0
            })
            .collect();
        self.rows.push(Row {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn var(&self, key: VarKey) -> Option<usize> {
        self.index.get(&key).copied()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Tightens the upper bound of a variable (never loosens it).
    pub fn tighten_upper(&mut self, column: usize, upper: f64) {
        let var = &mut self.vars[column];
        var.upper = var.upper.min(upper).max(var.lower);
    }

    pub fn set_bounds(&mut self, column: usize, lower: f64, upper: f64) {
        self.vars[column].lower = lower;
        self.vars[column].upper = upper;
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.vars.iter().zip(values).map(|(v, x)| v.cost * x).sum()
    }

    /// Largest bound or row violation of an assignment.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let bounds = self
            .vars
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0));
        let rows = self.rows.iter().map(|r| r.violation(values));
        bounds.chain(rows).fold(0.0, f64::max)
    }

    /// Number of rows whose name starts with `prefix`.
    pub fn count_rows(&self, prefix: &str) -> usize {
        self.rows.iter().filter(|r| r.name.starts_with(prefix)).count()
    }
}
