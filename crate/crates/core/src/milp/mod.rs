//! Mixed-integer linear programs over continuous and binary variables.
//!
//! Variable bounds are metadata on the variable, never rows, so
//! [`MilpInstance::stats`] counts only genuine linear constraints.

mod lp_format;

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU32, Ordering};

use thiserror::Error;

pub use lp_format::{parse_solution_values, read_lp_text, write_lp_text};

static NEXT_INSTANCE_TAG: AtomicU32 = AtomicU32::new(1);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MilpError {
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("duplicate constraint name `{0}`")]
    DuplicateConstraint(String),
    #[error("invalid name `{0}`")]
    InvalidName(String),
    #[error("variable `{name}` has inverted bounds [{lower}, {upper}]")]
    InvertedBounds { name: String, lower: f64, upper: f64 },
    #[error("binary variable `{0}` must have bounds within [0, 1]")]
    BinaryBounds(String),
    #[error("variable id {0:?} does not belong to this instance")]
    UnknownVariable(VarId),
    #[error("variable `{0}` appears twice in one linear expression")]
    DuplicateTerm(String),
    #[error("non-finite coefficient or right-hand side")]
    NonFinite,
    #[error("unknown variable name `{0}`")]
    UnknownName(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Dense variable index, tagged with the issuing instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId {
    tag: u32,
    index: u32,
}

impl VarId {
    pub fn index(self) -> usize {
        self.index as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstraintId(usize);

impl ConstraintId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectiveSense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn activity(&self, values: &Assignment) -> f64 {
        self.terms.iter().map(|(v, a)| a * values.value(*v)).sum()
    }

    /// Amount by which `values` violates this row (0 when satisfied).
    pub fn violation(&self, values: &Assignment) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InstanceStats {
    pub n_binary: usize,
    pub n_continuous: usize,
    pub n_constraints: usize,
}

#[derive(Debug, Clone)]
pub struct MilpInstance {
    tag: u32,
    variables: Vec<Variable>,
    constraints: Vec<LinearConstraint>,
    objective: Vec<(VarId, f64)>,
    sense: ObjectiveSense,
    names: HashMap<String, VarId>,
    constraint_names: HashMap<String, ConstraintId>,
}

impl MilpInstance {
    pub fn new(sense: ObjectiveSense) -> Self {
        Self {
            tag: NEXT_INSTANCE_TAG.fetch_add(1, Ordering::Relaxed),
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            sense,
            names: HashMap::new(),
            constraint_names: HashMap::new(),
        }
    }

    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: f64,
        upper: f64,
    ) -> Result<VarId, MilpError> {
        let name = name.into();
        check_name(&name)?;
        if self.names.contains_key(&name) {
            return Err(MilpError::DuplicateVariable(name));
        }
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(MilpError::InvertedBounds { name, lower, upper });
        }
        if kind == VarKind::Binary && (lower < 0.0 || upper > 1.0) {
            return Err(MilpError::BinaryBounds(name));
        }
        let id = VarId { tag: self.tag, index: self.variables.len() as u32 };
        self.names.insert(name.clone(), id);
        self.variables.push(Variable { name, kind, lower, upper });
        Ok(id)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> Result<VarId, MilpError> {
        self.add_variable(name, VarKind::Binary, 0.0, 1.0)
    }

    /// Appends a row named `r<index>`.
    pub fn add_constraint(
        &mut self,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> Result<ConstraintId, MilpError> {
        let name = format!("r{}", self.constraints.len());
        self.add_named_constraint(name, terms, sense, rhs)
    }

    pub fn add_named_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> Result<ConstraintId, MilpError> {
        let name = name.into();
        check_name(&name)?;
        if self.constraint_names.contains_key(&name) {
            return Err(MilpError::DuplicateConstraint(name));
        }
        if !rhs.is_finite() {
            return Err(MilpError::NonFinite);
        }
        self.check_terms(&terms)?;
        let id = ConstraintId(self.constraints.len());
        self.constraint_names.insert(name.clone(), id);
        self.constraints.push(LinearConstraint { name, terms, sense, rhs });
        Ok(id)
    }

    pub fn set_objective(&mut self, sense: ObjectiveSense, terms: Vec<(VarId, f64)>) -> Result<(), MilpError> {
        self.check_terms(&terms)?;
        self.sense = sense;
        self.objective = terms;
        Ok(())
    }

    fn check_terms(&self, terms: &[(VarId, f64)]) -> Result<(), MilpError> {
        let mut seen = vec![false; self.variables.len()];
        for &(v, a) in terms {
            if v.tag != self.tag || v.index() >= self.variables.len() {
                return Err(MilpError::UnknownVariable(v));
            }
            if !a.is_finite() {
                return Err(MilpError::NonFinite);
            }
            if std::mem::replace(&mut seen[v.index()], true) {
                return Err(MilpError::DuplicateTerm(self.variables[v.index()].name.clone()));
            }
        }
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.index()]
    }

    pub fn var_id(&self, index: usize) -> VarId {
        assert!(index < self.variables.len());
        VarId { tag: self.tag, index: index as u32 }
    }

    pub fn var_ids(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.variables.len()).map(|k| self.var_id(k))
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.names.get(name).copied()
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }

    pub fn sense(&self) -> ObjectiveSense {
        self.sense
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn stats(&self) -> InstanceStats {
        let n_binary = self.variables.iter().filter(|v| v.kind == VarKind::Binary).count();
        InstanceStats {
            n_binary,
            n_continuous: self.variables.len() - n_binary,
            n_constraints: self.constraints.len(),
        }
    }

    pub fn objective_value(&self, values: &Assignment) -> f64 {
        self.objective.iter().map(|(v, c)| c * values.value(*v)).sum()
    }

    /// Largest bound or row violation of `values`.
    pub fn max_violation(&self, values: &Assignment) -> f64 {
        let bounds = self
            .variables
            .iter()
            .zip(values.as_slice())
            .map(|(v, x)| (v.lower - x).max(x - v.upper).max(0.0));
        let rows = self.constraints.iter().map(|c| c.violation(values));
        bounds.chain(rows).fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, values: &Assignment, tol: f64) -> bool {
        values.len() == self.variables.len() && self.max_violation(values) <= tol
    }

    /// Largest distance of a binary variable from {0, 1}.
    pub fn max_fractionality(&self, values: &Assignment) -> f64 {
        self.variables
            .iter()
            .zip(values.as_slice())
            .filter(|(v, _)| v.kind == VarKind::Binary)
            .map(|(_, x)| (x - x.round()).abs())
            .fold(0.0, f64::max)
    }

    /// Step between objective values of integral solutions, when every
    /// objective term sits on a binary with an integer coefficient.
    pub fn detect_objective_step(&self) -> Option<f64> {
        let mut step = 0u64;
        for &(v, c) in &self.objective {
            if self.variable(v).kind != VarKind::Binary || c.fract() != 0.0 || c.abs() > 1e12 {
                return None;
            }
            step = gcd(step, c.abs() as u64);
        }
        (step > 0).then_some(step as f64)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn check_name(name: &str) -> Result<(), MilpError> {
    let bad_start = name.chars().next().is_none_or(|c| c.is_ascii_digit() || c == '.');
    let bad_char = name
        .chars()
        .any(|c| !(c.is_ascii_alphanumeric() || "_.!\"#$%&()/,;?@'`{}|~".contains(c)));
    if bad_start || bad_char || name.len() > 255 {
        Err(MilpError::InvalidName(name.to_owned()))
    } else {
        Ok(())
    }
}

/// Values for every variable of one instance, indexed by [`VarId`].
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    values: Vec<f64>,
}

impl Assignment {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n] }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.index()]
    }

    pub fn set(&mut self, v: VarId, x: f64) {
        self.values[v.index()] = x;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

impl fmt::Display for InstanceStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} binary, {} continuous, {} constraints",
            self.n_binary, self.n_continuous, self.n_constraints
        )
    }
}
