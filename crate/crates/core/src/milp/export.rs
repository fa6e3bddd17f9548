use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::MilpError;
use crate::model::{MilpModel, Sense};

/// Text formats understood by external MILP solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    /// Free-format MPS (names may exceed eight characters).
    Mps,
    /// CPLEX LP format.
    Lp,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mps" => Ok(ExportFormat::Mps),
            "lp" => Ok(ExportFormat::Lp),
            other => Err(format!("unknown export format '{other}' (expected mps or lp)")),
        }
    }
}

fn row_name(model: &MilpModel, r: usize) -> String {
    format!("r{}_{}", r, model.rows[r].family.label())
}

fn col_names(model: &MilpModel) -> Vec<String> {
    model.columns.iter().map(|c| c.index.to_string()).collect()
}

pub fn export_model<W: Write>(model: &MilpModel, format: ExportFormat, out: W) -> Result<(), MilpError> {
    let mut out = std::io::BufWriter::new(out);
    match format {
        ExportFormat::Mps => write_mps(model, &mut out)?,
        ExportFormat::Lp => write_lp(model, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn write_mps<W: Write>(model: &MilpModel, out: &mut W) -> std::io::Result<()> {
    let names = col_names(model);
    writeln!(out, "NAME pathcoord")?;
    writeln!(out, "OBJSENSE")?;
    writeln!(out, "    MAX")?;
    writeln!(out, "ROWS")?;
    writeln!(out, " N obj")?;
    for (r, row) in model.rows.iter().enumerate() {
        let s = match row.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        writeln!(out, " {s} {}", row_name(model, r))?;
    }

    let mut entries: Vec<Vec<(String, f64)>> = vec![Vec::new(); model.columns.len()];
    for &(c, a) in &model.objective {
        entries[c].push(("obj".to_string(), a));
    }
    for (r, row) in model.rows.iter().enumerate() {
        let name = row_name(model, r);
        for &(c, a) in &row.coeffs {
            entries[c].push((name.clone(), a));
        }
    }

    writeln!(out, "COLUMNS")?;
    let mut in_int = false;
    let mut markers = 0;
    for (c, col) in model.columns.iter().enumerate() {
        if col.binary != in_int {
            let kind = if col.binary { "INTORG" } else { "INTEND" };
            writeln!(out, "    M{markers} 'MARKER' '{kind}'")?;
            markers += 1;
            in_int = col.binary;
        }
        if entries[c].is_empty() {
            writeln!(out, "    {} obj 0", names[c])?;
        }
        for (row, a) in &entries[c] {
            writeln!(out, "    {} {row} {a}", names[c])?;
        }
    }
    if in_int {
        writeln!(out, "    M{markers} 'MARKER' 'INTEND'")?;
    }

    writeln!(out, "RHS")?;
    for (r, row) in model.rows.iter().enumerate() {
        if row.rhs != 0.0 {
            writeln!(out, "    RHS {} {}", row_name(model, r), row.rhs)?;
        }
    }

    writeln!(out, "BOUNDS")?;
    for (c, col) in model.columns.iter().enumerate() {
        let n = &names[c];
        if col.binary && col.lower == 0.0 && col.upper == 1.0 {
            writeln!(out, " BV BND {n}")?;
        } else if col.lower == col.upper {
            writeln!(out, " FX BND {n} {}", col.lower)?;
        } else {
            if col.lower.is_finite() {
                writeln!(out, " LO BND {n} {}", col.lower)?;
            } else {
                writeln!(out, " MI BND {n}")?;
            }
            if col.upper.is_finite() {
                writeln!(out, " UP BND {n} {}", col.upper)?;
            } else {
                writeln!(out, " PL BND {n}")?;
            }
        }
    }
    writeln!(out, "ENDATA")
}

fn write_terms<W: Write>(out: &mut W, names: &[String], terms: &[(usize, f64)]) -> std::io::Result<()> {
    if terms.is_empty() {
        return write!(out, " 0 {}", names.first().map_or("x", |s| s.as_str()));
    }
    for (i, &(c, a)) in terms.iter().enumerate() {
        if i > 0 && i % 6 == 0 {
            write!(out, "\n   ")?;
        }
        let sign = if a < 0.0 { '-' } else { '+' };
        if i == 0 && a >= 0.0 {
            write!(out, " {} {}", a, names[c])?;
        } else {
            write!(out, " {sign} {} {}", a.abs(), names[c])?;
        }
    }
    Ok(())
}

fn write_lp<W: Write>(model: &MilpModel, out: &mut W) -> std::io::Result<()> {
    let names = col_names(model);
    writeln!(out, "\\ pathcoord model")?;
    writeln!(out, "Maximize")?;
    write!(out, " obj:")?;
    write_terms(out, &names, &model.objective)?;
    writeln!(out)?;
    writeln!(out, "Subject To")?;
    for (r, row) in model.rows.iter().enumerate() {
        write!(out, " {}:", row_name(model, r))?;
        write_terms(out, &names, &row.coeffs)?;
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        writeln!(out, " {op} {}", row.rhs)?;
    }
    writeln!(out, "Bounds")?;
    for (c, col) in model.columns.iter().enumerate() {
        if col.binary && col.lower == 0.0 && col.upper == 1.0 {
            continue;
        }
        let n = &names[c];
        if col.lower == col.upper {
            writeln!(out, " {n} = {}", col.lower)?;
            continue;
        }
        let lo = if col.lower.is_finite() { col.lower.to_string() } else { "-inf".into() };
        let hi = if col.upper.is_finite() { col.upper.to_string() } else { "+inf".into() };
        writeln!(out, " {lo} <= {n} <= {hi}")?;
    }
    writeln!(out, "Binaries")?;
    for (c, col) in model.columns.iter().enumerate() {
        if col.binary {
            writeln!(out, " {}", names[c])?;
        }
    }
    writeln!(out, "End")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRow {
    pub name: String,
    pub sense: Sense,
    pub rhs: f64,
    pub coeffs: Vec<(usize, f64)>,
}

/// Contents of a free-format MPS file, columns numbered in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedMps {
    pub name: String,
    pub maximize: bool,
    pub columns: Vec<String>,
    pub integer: Vec<bool>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub objective: Vec<(usize, f64)>,
    pub rows: Vec<ParsedRow>,
}

pub fn read_mps<R: BufRead>(input: R) -> Result<ParsedMps, MilpError> {
    let mut p = ParsedMps::default();
    let mut section = String::new();
    let mut row_ix: HashMap<String, usize> = HashMap::new();
    let mut col_ix: HashMap<String, usize> = HashMap::new();
    let mut obj_name = String::new();
    let mut in_int = false;

    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        let err = |msg: String| MilpError::Parse { line: lineno, msg };
        if line.trim().is_empty() || line.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if !line.starts_with(' ') && !line.starts_with('\t') {
            section = toks[0].to_string();
            if section == "NAME" {
                p.name = toks.get(1).unwrap_or(&"").to_string();
            }
            if section == "OBJSENSE" && toks.len() > 1 {
                p.maximize = toks[1].starts_with("MAX");
            }
            continue;
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number '{s}'")));
        match section.as_str() {
            "OBJSENSE" => p.maximize = toks[0].starts_with("MAX"),
            "ROWS" => {
                if toks.len() != 2 {
                    return Err(err("expected '<type> <name>'".into()));
                }
                let sense = match toks[0] {
                    "N" => {
                        obj_name = toks[1].to_string();
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    other => return Err(err(format!("unknown row type '{other}'"))),
                };
                row_ix.insert(toks[1].to_string(), p.rows.len());
                p.rows.push(ParsedRow {
                    name: toks[1].to_string(),
                    sense,
                    rhs: 0.0,
                    coeffs: Vec::new(),
                });
            }
            "COLUMNS" => {
                if toks.get(1) == Some(&"'MARKER'") {
                    in_int = toks.get(2) == Some(&"'INTORG'");
                    continue;
                }
                if toks.len() < 3 || toks.len() % 2 == 0 {
                    return Err(err("expected '<column> <row> <value> ...'".into()));
                }
                let c = *col_ix.entry(toks[0].to_string()).or_insert_with(|| {
                    p.columns.push(toks[0].to_string());
                    p.integer.push(in_int);
                    p.lower.push(0.0);
                    p.upper.push(if in_int { 1.0 } else { f64::INFINITY });
                    p.columns.len() - 1
                });
                for pair in toks[1..].chunks(2) {
                    let v = num(pair[1])?;
                    if pair[0] == obj_name {
                        if v != 0.0 {
                            p.objective.push((c, v));
                        }
                    } else {
                        let r = *row_ix
                            .get(pair[0])
                            .ok_or_else(|| err(format!("unknown row '{}'", pair[0])))?;
                        p.rows[r].coeffs.push((c, v));
                    }
                }
            }
            "RHS" => {
                for pair in toks[1..].chunks(2) {
                    if pair.len() != 2 {
                        return Err(err("dangling RHS entry".into()));
                    }
                    let r = *row_ix
                        .get(pair[0])
                        .ok_or_else(|| err(format!("unknown row '{}'", pair[0])))?;
                    p.rows[r].rhs = num(pair[1])?;
                }
            }
            "BOUNDS" => {
                if toks.len() < 3 {
                    return Err(err("expected '<type> <set> <column> [value]'".into()));
                }
                let c = *col_ix
                    .get(toks[2])
                    .ok_or_else(|| err(format!("unknown column '{}'", toks[2])))?;
                let value = toks.get(3).map(|s| num(s)).transpose()?;
                let need = || value.ok_or_else(|| err(format!("{} bound needs a value", toks[0])));
                match toks[0] {
                    "LO" => p.lower[c] = need()?,
                    "UP" => p.upper[c] = need()?,
                    "FX" => {
                        p.lower[c] = need()?;
                        p.upper[c] = p.lower[c];
                    }
                    "MI" => p.lower[c] = f64::NEG_INFINITY,
                    "PL" => p.upper[c] = f64::INFINITY,
                    "FR" => {
                        p.lower[c] = f64::NEG_INFINITY;
                        p.upper[c] = f64::INFINITY;
                    }
                    "BV" => {
                        p.integer[c] = true;
                        p.lower[c] = 0.0;
                        p.upper[c] = 1.0;
                    }
                    other => return Err(err(format!("unknown bound type '{other}'"))),
                }
            }
            "ENDATA" => {}
            other => return Err(err(format!("data outside a known section ({other})"))),
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RobotId;
    use crate::model::{Family, VarIndex};

    fn tiny() -> MilpModel {
        let mut m = MilpModel::empty();
        let s = m.add_column(VarIndex::S { robot: RobotId(1), k: 0 }, -2.5, 40.0);
        let mu = m.add_column(VarIndex::Mu { robot: RobotId(1), k: 0 }, 0.0, 1.0);
        let v = m.add_column(VarIndex::V { robot: RobotId(1), k: 0 }, 3.0, 3.0);
        m.add_row(Family::H1, vec![(s, 1.0), (mu, -40.0)], Sense::Le, 0.125);
        m.add_row(Family::K1, vec![(s, 1.0), (v, -0.1)], Sense::Eq, 0.0);
        m.add_row(Family::H2, vec![(s, 1.0), (mu, 2.5)], Sense::Ge, -2.5);
        m.objective = vec![(mu, 0.5), (v, 1e-3)];
        m
    }

    #[test]
    fn mps_round_trip() {
        let m = tiny();
        let mut buf = Vec::new();
        export_model(&m, ExportFormat::Mps, &mut buf).unwrap();
        let p = read_mps(buf.as_slice()).unwrap();
        assert!(p.maximize);
        assert_eq!(p.columns, vec!["s_1_0", "mu_1_0", "v_1_0"]);
        assert_eq!(p.integer, vec![false, true, false]);
        assert_eq!(p.lower, vec![-2.5, 0.0, 3.0]);
        assert_eq!(p.upper, vec![40.0, 1.0, 3.0]);
        assert_eq!(p.objective, vec![(1, 0.5), (2, 1e-3)]);
        assert_eq!(p.rows.len(), 3);
        assert_eq!(p.rows[0].name, "r0_h1");
        assert_eq!(p.rows[0].rhs, 0.125);
        assert_eq!(p.rows[2].sense, Sense::Ge);
        assert_eq!(p.rows[1].coeffs, vec![(0, 1.0), (2, -0.1)]);
    }

    #[test]
    fn lp_text_shape() {
        let mut buf = Vec::new();
        export_model(&tiny(), ExportFormat::Lp, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains(" r0_h1: 1 s_1_0 - 40 mu_1_0 <= 0.125"));
        assert!(text.contains(" v_1_0 = 3"));
        assert!(text.contains("Binaries\n mu_1_0\n"));
        assert!(text.trim_end().ends_with("End"));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "NAME x\nROWS\n N obj\n Q r0\n";
        match read_mps(bad.as_bytes()) {
            Err(MilpError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
