//! CPLEX-style LP text export, readable by common external MIP solvers.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use super::{MipModel, Sense};

const LINE_WIDTH: usize = 78;

fn push_term(line: &mut String, out: &mut String, coef: f64, name: &str, first: bool) {
    let term = match (first, coef < 0.0) {
        (true, false) => format!("{coef} {name}"),
        (true, true) => format!("- {} {name}", -coef),
        (false, false) => format!("+ {coef} {name}"),
        (false, true) => format!("- {} {name}", -coef),
    };
    if line.len() + term.len() + 1 > LINE_WIDTH && !line.trim().is_empty() {
        out.push_str(line.trim_end());
        out.push('\n');
        line.clear();
        line.push_str("   ");
    }
    line.push(' ');
    line.push_str(&term);
}

fn linear_expression(out: &mut String, label: &str, terms: &[(String, f64)]) -> String {
    let mut line = format!(" {label}:");
    for (k, (name, coef)) in terms.iter().enumerate() {
        push_term(&mut line, out, *coef, name, k == 0);
    }
    line
}

/// Renders the model as LP text.
pub fn model_to_lp_text(model: &MipModel) -> String {
    let vars = model.vars();
    let names: Vec<String> = vars.iter().map(|v| v.key.to_string()).collect();
    let mut out = String::from("\\ lot-sizing model\nMinimize\n");

    let mut objective: Vec<(String, f64)> = vars
        .iter()
        .zip(&names)
        .filter(|(v, _)| v.cost != 0.0)
        .map(|(v, n)| (n.clone(), v.cost))
        .collect();
    if objective.is_empty() {
        if let Some(first) = names.first() {
            objective.push((first.clone(), 0.0));
        }
    }
    let line = linear_expression(&mut out, "obj", &objective);
    out.push_str(line.trim_end());
    out.push('\n');

    out.push_str("Subject To\n");
    for row in model.rows() {
        let mut terms: Vec<(String, f64)> = row
            .terms
            .iter()
            .map(|&(j, a)| (names[j].clone(), a))
            .collect();
        if terms.is_empty() {
            match names.first() {
                Some(first) => terms.push((first.clone(), 0.0)),
                None => continue,
            }
        }
        let mut line = linear_expression(&mut out, &row.name, &terms);
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        let _ = write!(line, " {op} {}", row.rhs);
        out.push_str(&line);
        out.push('\n');
    }

    out.push_str("Bounds\n");
    for (v, name) in vars.iter().zip(&names) {
        let _ = match (v.lower.is_finite(), v.upper.is_finite()) {
            (true, true) if v.lower == v.upper => writeln!(out, " {name} = {}", v.lower),
            (true, true) => writeln!(out, " {} <= {name} <= {}", v.lower, v.upper),
            (true, false) => writeln!(out, " {name} >= {}", v.lower),
            (false, true) => writeln!(out, " -inf <= {name} <= {}", v.upper),
            (false, false) => writeln!(out, " {name} free"),
        };
    }

    let binaries: Vec<&String> = vars
        .iter()
        .zip(&names)
        .filter(|(v, _)| v.binary)
        .map(|(_, n)| n)
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(8) {
            let joined: Vec<&str> = chunk.iter().map(|s| s.as_str()).collect();
            let _ = writeln!(out, " {}", joined.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

pub fn export_model_text(model: &MipModel, path: &Path) -> io::Result<()> {
    fs::write(path, model_to_lp_text(model))
}
