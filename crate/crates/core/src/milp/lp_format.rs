//! CPLEX-style LP text export, a small reader for the same subset, and
//! `name value` solution files.

use std::fmt::Write;

use super::{Assignment, MilpError, MilpInstance, ObjectiveSense, Sense, VarId, VarKind};

const TERMS_PER_LINE: usize = 8;

fn write_terms(out: &mut String, terms: &[(VarId, f64)], instance: &MilpInstance) {
    if terms.is_empty() {
        out.push_str(" 0");
        return;
    }
    for (k, &(v, a)) in terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n  ");
        }
        let name = &instance.variable(v).name;
        if k == 0 && a >= 0.0 {
            write!(out, " {a} {name}").unwrap();
        } else if a < 0.0 {
            write!(out, " - {} {name}", -a).unwrap();
        } else {
            write!(out, " + {a} {name}").unwrap();
        }
    }
}

fn write_bound(out: &mut String, x: f64) {
    if x == f64::INFINITY {
        out.push_str("+inf");
    } else if x == f64::NEG_INFINITY {
        out.push_str("-inf");
    } else {
        write!(out, "{x}").unwrap();
    }
}

/// Serializes the instance as LP text.
///
/// Rows keep insertion order, coefficients use the shortest decimal that
/// round-trips, and the output is byte-for-byte deterministic.
pub fn write_lp_text(instance: &MilpInstance) -> String {
    let mut out = String::new();
    out.push_str(match instance.sense() {
        ObjectiveSense::Maximize => "Maximize\n",
        ObjectiveSense::Minimize => "Minimize\n",
    });
    out.push_str(" obj:");
    write_terms(&mut out, instance.objective(), instance);
    out.push_str("\nSubject To\n");
    for row in instance.constraints() {
        write!(out, " {}:", row.name).unwrap();
        write_terms(&mut out, &row.terms, instance);
        writeln!(out, " {} {}", row.sense.symbol(), row.rhs).unwrap();
    }

    out.push_str("Bounds\n");
    for var in instance.variables() {
        let default = match var.kind {
            VarKind::Binary => var.lower == 0.0 && var.upper == 1.0,
            VarKind::Continuous => var.lower == 0.0 && var.upper == f64::INFINITY,
        };
        if default {
            continue;
        }
        if var.lower == f64::NEG_INFINITY && var.upper == f64::INFINITY {
            writeln!(out, " {} free", var.name).unwrap();
            continue;
        }
        out.push(' ');
        write_bound(&mut out, var.lower);
        write!(out, " <= {} <= ", var.name).unwrap();
        write_bound(&mut out, var.upper);
        out.push('\n');
    }

    let binaries: Vec<&str> = instance
        .variables()
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binary\n");
        for chunk in binaries.chunks(TERMS_PER_LINE) {
            writeln!(out, " {}", chunk.join(" ")).unwrap();
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Objective,
    Constraints,
    Bounds,
    Binary,
    End,
}

fn section_keyword(line: &str) -> Option<(Section, Option<ObjectiveSense>)> {
    match line.to_ascii_lowercase().as_str() {
        "maximize" | "maximum" | "max" => Some((Section::Objective, Some(ObjectiveSense::Maximize))),
        "minimize" | "minimum" | "min" => Some((Section::Objective, Some(ObjectiveSense::Minimize))),
        "subject to" | "such that" | "st" | "s.t." => Some((Section::Constraints, None)),
        "bounds" | "bound" => Some((Section::Bounds, None)),
        "binary" | "binaries" | "bin" => Some((Section::Binary, None)),
        "end" => Some((Section::End, None)),
        _ => None,
    }
}

struct Statement {
    line: usize,
    text: String,
}

/// Joins continuation lines so that each statement (objective, row, bound)
/// is one string.
fn statements(body: &[(usize, &str)], section: Section) -> Vec<Statement> {
    let mut out: Vec<Statement> = Vec::new();
    for &(line, text) in body {
        let starts_new = match section {
            Section::Constraints | Section::Objective => text.contains(':') || out.is_empty(),
            _ => true,
        };
        match out.last_mut() {
            Some(last) if !starts_new => {
                last.text.push(' ');
                last.text.push_str(text);
            }
            _ => out.push(Statement { line, text: text.to_owned() }),
        }
    }
    out
}

fn parse_num(tok: &str, line: usize) -> Result<f64, MilpError> {
    match tok.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        _ => tok.parse().map_err(|_| MilpError::Parse { line, msg: format!("bad number `{tok}`") }),
    }
}

fn is_number(tok: &str) -> bool {
    tok.parse::<f64>().is_ok()
}

/// Parses `[+|-] [coef] name ...` into (name, coefficient) pairs.
fn parse_expr(tokens: &[&str], line: usize) -> Result<Vec<(String, f64)>, MilpError> {
    let mut terms = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for &tok in tokens {
        match tok {
            "+" => {}
            "-" => sign = -sign,
            t if is_number(t) => coef = Some(coef.unwrap_or(1.0) * parse_num(t, line)?),
            name => {
                terms.push((name.to_owned(), sign * coef.unwrap_or(1.0)));
                sign = 1.0;
                coef = None;
            }
        }
    }
    if let Some(c) = coef {
        if c != 0.0 {
            return Err(MilpError::Parse { line, msg: "constant terms are not supported".into() });
        }
    }
    Ok(terms)
}

fn tokenize(text: &str) -> Vec<String> {
    let mut spaced = String::with_capacity(text.len() + 16);
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '<' | '>' | '=' => {
                spaced.push(' ');
                spaced.push(c);
                if chars.peek() == Some(&'=') {
                    spaced.push(chars.next().unwrap());
                }
                spaced.push(' ');
            }
            '+' | '-' => {
                // keep exponents such as 1e-07 intact
                let prev = spaced.chars().last();
                let in_exponent = matches!(prev, Some('e' | 'E'))
                    && spaced.trim_end_matches(['e', 'E']).chars().last().is_some_and(|p| p.is_ascii_digit())
                    && !spaced.ends_with(' ');
                if in_exponent {
                    spaced.push(c);
                } else {
                    spaced.push(' ');
                    spaced.push(c);
                    spaced.push(' ');
                }
            }
            _ => spaced.push(c),
        }
    }
    let mut out = Vec::new();
    for tok in spaced.split_whitespace() {
        match split_glued(tok) {
            Some((num, name)) => {
                out.push(num.to_owned());
                out.push(name.to_owned());
            }
            None => out.push(tok.to_owned()),
        }
    }
    out
}

/// Splits `2y` into `2` and `y`.
fn split_glued(tok: &str) -> Option<(&str, &str)> {
    if !tok.starts_with(|c: char| c.is_ascii_digit() || c == '.') || tok.parse::<f64>().is_ok() {
        return None;
    }
    (1..tok.len()).rev().filter(|&k| tok.is_char_boundary(k)).find_map(|k| {
        let (num, name) = tok.split_at(k);
        (num.parse::<f64>().is_ok() && name.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_')).then_some((num, name))
    })
}

fn parse_sense(tok: &str) -> Option<Sense> {
    match tok {
        "<=" | "<" | "=<" => Some(Sense::Le),
        ">=" | ">" | "=>" => Some(Sense::Ge),
        "=" => Some(Sense::Eq),
        _ => None,
    }
}

/// Reads the LP subset produced by [`write_lp_text`]: one objective, linear
/// rows, a `Bounds` section, a `Binary` section. Variables are created in
/// order of first appearance; undeclared ones default to `[0, +inf)`.
pub fn read_lp_text(text: &str) -> Result<MilpInstance, MilpError> {
    let mut sense = ObjectiveSense::Minimize;
    let mut sections: Vec<(Section, Vec<(usize, &str)>)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some((section, s)) = section_keyword(line) {
            if let Some(s) = s {
                sense = s;
            }
            sections.push((section, Vec::new()));
            continue;
        }
        match sections.last_mut() {
            Some((_, body)) => body.push((k + 1, line)),
            None => return Err(MilpError::Parse { line: k + 1, msg: "text before objective section".into() }),
        }
    }

    struct Pending {
        name: Option<String>,
        terms: Vec<(String, f64)>,
        sense: Sense,
        rhs: f64,
    }
    let mut order: Vec<String> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut note = |name: &str, order: &mut Vec<String>| {
        if seen.insert(name.to_owned()) {
            order.push(name.to_owned());
        }
    };
    let mut objective: Vec<(String, f64)> = Vec::new();
    let mut rows: Vec<Pending> = Vec::new();
    let mut bounds: Vec<(String, f64, f64, usize)> = Vec::new();
    let mut binaries: Vec<String> = Vec::new();

    for (section, body) in &sections {
        for st in statements(body, *section) {
            let line = st.line;
            match section {
                Section::Objective => {
                    let expr = st.text.split_once(':').map_or(st.text.as_str(), |(_, e)| e);
                    let toks = tokenize(expr);
                    let toks: Vec<&str> = toks.iter().map(String::as_str).collect();
                    for (n, c) in parse_expr(&toks, line)? {
                        note(&n, &mut order);
                        objective.push((n, c));
                    }
                }
                Section::Constraints => {
                    let (name, expr) = match st.text.split_once(':') {
                        Some((n, e)) => (Some(n.trim().to_owned()), e),
                        None => (None, st.text.as_str()),
                    };
                    let toks = tokenize(expr);
                    let pos = toks
                        .iter()
                        .position(|t| parse_sense(t).is_some())
                        .ok_or_else(|| MilpError::Parse { line, msg: "missing relation".into() })?;
                    let rhs_toks = &toks[pos + 1..];
                    let rhs = match rhs_toks {
                        [v] => parse_num(v, line)?,
                        [s, v] if s == "-" => -parse_num(v, line)?,
                        [s, v] if s == "+" => parse_num(v, line)?,
                        _ => return Err(MilpError::Parse { line, msg: "right-hand side must be a constant".into() }),
                    };
                    let lhs: Vec<&str> = toks[..pos].iter().map(String::as_str).collect();
                    let terms = parse_expr(&lhs, line)?;
                    for (n, _) in &terms {
                        note(n, &mut order);
                    }
                    rows.push(Pending { name, terms, sense: parse_sense(&toks[pos]).unwrap(), rhs });
                }
                Section::Bounds => {
                    let toks = tokenize(&st.text);
                    let toks: Vec<&str> = toks.iter().map(String::as_str).collect();
                    let toks = merge_signed(&toks);
                    let toks: Vec<&str> = toks.iter().map(String::as_str).collect();
                    let (name, lo, hi) = match toks.as_slice() {
                        [n, free] if free.eq_ignore_ascii_case("free") => {
                            (n.to_string(), f64::NEG_INFINITY, f64::INFINITY)
                        }
                        [lo, "<=", n, "<=", hi] => (n.to_string(), parse_num(lo, line)?, parse_num(hi, line)?),
                        [n, "<=", hi] => (n.to_string(), f64::NAN, parse_num(hi, line)?),
                        [n, ">=", lo] => (n.to_string(), parse_num(lo, line)?, f64::NAN),
                        [n, "=", v] => {
                            let v = parse_num(v, line)?;
                            (n.to_string(), v, v)
                        }
                        _ => return Err(MilpError::Parse { line, msg: format!("unsupported bound `{}`", st.text) }),
                    };
                    note(&name, &mut order);
                    bounds.push((name, lo, hi, line));
                }
                Section::Binary => {
                    for n in st.text.split_whitespace() {
                        note(n, &mut order);
                        binaries.push(n.to_owned());
                    }
                }
                Section::End => {
                    return Err(MilpError::Parse { line, msg: "text after End".into() });
                }
            }
        }
    }

    let binary_set: std::collections::HashSet<&str> = binaries.iter().map(String::as_str).collect();
    let mut instance = MilpInstance::new(sense);
    for name in &order {
        let kind = if binary_set.contains(name.as_str()) { VarKind::Binary } else { VarKind::Continuous };
        let (mut lo, mut hi) = match kind {
            VarKind::Binary => (0.0, 1.0),
            VarKind::Continuous => (0.0, f64::INFINITY),
        };
        for (n, l, h, _) in bounds.iter().filter(|b| &b.0 == name) {
            let _ = n;
            if !l.is_nan() {
                lo = *l;
            }
            if !h.is_nan() {
                hi = *h;
            }
        }
        instance.add_variable(name.clone(), kind, lo, hi)?;
    }
    let resolve = |terms: Vec<(String, f64)>, instance: &MilpInstance| -> Vec<(VarId, f64)> {
        terms.into_iter().map(|(n, c)| (instance.lookup(&n).unwrap(), c)).collect()
    };
    let obj = resolve(objective, &instance);
    instance.set_objective(sense, obj)?;
    for row in rows {
        let terms = resolve(row.terms, &instance);
        match row.name {
            Some(n) => instance.add_named_constraint(n, terms, row.sense, row.rhs)?,
            None => instance.add_constraint(terms, row.sense, row.rhs)?,
        };
    }
    Ok(instance)
}

/// Re-attaches a unary sign to the number that follows it.
fn merge_signed(toks: &[&str]) -> Vec<String> {
    let mut out = Vec::new();
    let mut k = 0;
    while k < toks.len() {
        if (toks[k] == "-" || toks[k] == "+") && k + 1 < toks.len() {
            out.push(format!("{}{}", toks[k], toks[k + 1]));
            k += 2;
        } else {
            out.push(toks[k].to_owned());
            k += 1;
        }
    }
    out
}

/// Parses `name value` lines into a full assignment; unlisted variables are 0.
pub fn parse_solution_values(text: &str, instance: &MilpInstance) -> Result<Assignment, MilpError> {
    let mut values = Assignment::zeros(instance.num_vars());
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(MilpError::Parse { line: k + 1, msg: "expected `name value`".into() });
        };
        let id = instance.lookup(name).ok_or_else(|| MilpError::UnknownName(name.to_owned()))?;
        let x: f64 = value
            .parse()
            .map_err(|_| MilpError::Parse { line: k + 1, msg: format!("bad value `{value}`") })?;
        values.set(id, x);
    }
    Ok(values)
}
