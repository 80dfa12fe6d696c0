use std::io::{self, Write};

use super::LpProblem;
use crate::instance::Sense;

fn col_name(p: &LpProblem, j: usize) -> String {
    let n = &p.columns[j].name;
    if n.is_empty() {
        format!("x{j}")
    } else {
        sanitize(n)
    }
}

fn row_name(p: &LpProblem, r: usize) -> String {
    let n = &p.rows[r].name;
    if n.is_empty() {
        format!("r{r}")
    } else {
        sanitize(n)
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_.[]".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn term(out: &mut String, first: bool, coef: f64, name: &str) {
    if coef < 0.0 {
        out.push_str(&format!(" - {} {}", -coef, name));
    } else if first {
        out.push_str(&format!(" {} {}", coef, name));
    } else {
        out.push_str(&format!(" + {} {}", coef, name));
    }
}

/// Writes `p` in CPLEX LP text format.
pub fn write_lp<W: Write>(p: &LpProblem, mut w: W) -> io::Result<()> {
    writeln!(w, "Minimize")?;
    let mut obj = String::from(" obj:");
    let mut first = true;
    for (j, c) in p.columns.iter().enumerate() {
        if c.cost != 0.0 {
            term(&mut obj, first, c.cost, &col_name(p, j));
            first = false;
        }
    }
    if first {
        obj.push_str(" 0");
    }
    writeln!(w, "{obj}")?;
    writeln!(w, "Subject To")?;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p.rows.len()];
    for (j, c) in p.columns.iter().enumerate() {
        for &(r, v) in &c.entries {
            rows[r].push((j, v));
        }
    }
    for (r, row) in p.rows.iter().enumerate() {
        let mut line = format!(" {}:", row_name(p, r));
        let mut first = true;
        for &(j, v) in &rows[r] {
            term(&mut line, first, v, &col_name(p, j));
            first = false;
        }
        if first {
            line.push_str(" 0 x_empty");
        }
        let op = match row.sense {
            Sense::Ge => ">=",
            Sense::Le => "<=",
            Sense::Eq => "=",
        };
        writeln!(w, "{line} {op} {}", row.rhs)?;
    }
    writeln!(w, "Bounds")?;
    for (j, c) in p.columns.iter().enumerate() {
        let name = col_name(p, j);
        match (c.lower.is_finite(), c.upper.is_finite()) {
            (true, true) if c.lower == c.upper => writeln!(w, " {name} = {}", c.lower)?,
            (true, true) => writeln!(w, " {} <= {name} <= {}", c.lower, c.upper)?,
            (true, false) if c.lower == 0.0 => {}
            (true, false) => writeln!(w, " {name} >= {}", c.lower)?,
            (false, true) => writeln!(w, " -inf <= {name} <= {}", c.upper)?,
            (false, false) => writeln!(w, " {name} free")?,
        }
    }
    writeln!(w, "End")
}
