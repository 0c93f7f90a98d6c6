//! Line-oriented problem files.
//!
//! ```text
//! # comment
//! vars: u x y
//! eliminate: y            # or `auto`
//! constraint: u^4 + x^2 - 1
//! constraint: u^2 + x^3 + y^5
//! objective: y
//! start: u=0, x=1
//! ```

use std::path::Path;
use std::sync::Arc;

use crate::geometry::{ConstraintSet, ProjectionConfig, ReducedPoint, TangentFrame};
use crate::poly::{parse_polynomial, CompiledPolynomial, Polynomial, VariableOrder};
use crate::triangular::{validate_triangular, whitney_partition, Elimination, TriangularSystem, WhitneyPartition};

use super::CliError;

/// A syntactically valid problem file, not yet checked for structure.
#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub order: Arc<VariableOrder>,
    pub elimination: Elimination,
    pub constraints: Vec<Polynomial>,
    pub objective: Polynomial,
    /// `(variable, value)` in file order.
    pub start: Vec<(usize, f64)>,
    start_location: (usize, usize),
}

/// A validated problem with its start point on the reduced manifold.
#[derive(Debug, Clone)]
pub struct Problem {
    pub file: ProblemFile,
    pub system: TriangularSystem,
    pub partition: WhitneyPartition,
    pub objective: CompiledPolynomial,
    pub start: ReducedPoint,
}

impl Problem {
    pub fn variable_names(&self) -> Vec<String> {
        self.file.order.names().to_vec()
    }

    pub fn retained_names(&self) -> Vec<String> {
        self.partition.reduced_order().names().to_vec()
    }

    pub fn constraint_set(&self) -> Arc<ConstraintSet> {
        Arc::new(ConstraintSet::new(self.partition.reduced_g_star()))
    }

    /// Residual of `z` against the constraint list as written in the file.
    pub fn ambient_residual(&self, z: &[f64]) -> f64 {
        self.system.max_residual(z)
    }
}

struct Entry<'a> {
    line: usize,
    /// 1-based column of the first value character.
    column: usize,
    key: &'a str,
    value: &'a str,
}

fn syntax(line: usize, column: usize, code: &'static str, message: impl Into<String>) -> CliError {
    CliError::Problem {
        line,
        column,
        code,
        message: message.into(),
    }
}

fn entries(text: &str) -> Result<Vec<Entry<'_>>, CliError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let Some(colon) = content.find(':') else {
            let col = content.len() - content.trim_start().len() + 1;
            return Err(syntax(line, col, "SYNTAX", "expected `key: value`"));
        };
        let key = content[..colon].trim();
        let after = &content[colon + 1..];
        let lead = after.len() - after.trim_start().len();
        out.push(Entry {
            line,
            column: content[..colon + 1 + lead].chars().count() + 1,
            key,
            value: after.trim(),
        });
    }
    Ok(out)
}

fn char_column(value: &str, base: usize, byte: usize) -> usize {
    base + value[..byte.min(value.len())].chars().count()
}

fn polynomial(entry: &Entry<'_>, order: &Arc<VariableOrder>) -> Result<Polynomial, CliError> {
    parse_polynomial(entry.value, order).map_err(|e| {
        let col = char_column(entry.value, entry.column, e.offset().unwrap_or(0));
        syntax(entry.line, col, e.code(), e.to_string())
    })
}

/// Splits on commas and whitespace, keeping each word's byte offset.
fn words(value: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in value.char_indices() {
        let sep = c == ',' || c.is_whitespace();
        match (sep, start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((s, &value[s..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, &value[s..]));
    }
    out
}

pub fn parse_problem(text: &str) -> Result<ProblemFile, CliError> {
    let entries = entries(text)?;
    let end = text.lines().count() + 1;
    let single = |key: &str| -> Result<Option<&Entry<'_>>, CliError> {
        let mut found = entries.iter().filter(|e| e.key == key);
        let first = found.next();
        if let Some(dup) = found.next() {
            return Err(syntax(
                dup.line,
                1,
                "DUPLICATE_KEY",
                format!("`{key}` given more than once"),
            ));
        }
        Ok(first)
    };
    for e in &entries {
        if !matches!(e.key, "vars" | "eliminate" | "constraint" | "objective" | "start") {
            return Err(syntax(e.line, 1, "UNKNOWN_KEY", format!("unknown key `{}`", e.key)));
        }
    }
    let missing = |key: &str| syntax(end, 1, "MISSING_KEY", format!("missing `{key}:` line"));

    let vars = single("vars")?.ok_or_else(|| missing("vars"))?;
    let names: Vec<&str> = words(vars.value).into_iter().map(|(_, w)| w).collect();
    let order = VariableOrder::new(names).map_err(|e| syntax(vars.line, vars.column, e.code(), e.to_string()))?;

    let elimination = match single("eliminate")? {
        None => Elimination::Auto,
        Some(e) if e.value.eq_ignore_ascii_case("auto") => Elimination::Auto,
        Some(e) => {
            let mut list = Vec::new();
            for (off, name) in words(e.value) {
                let index = order.index_of(name).ok_or_else(|| {
                    syntax(
                        e.line,
                        char_column(e.value, e.column, off),
                        "UNKNOWN_VARIABLE",
                        format!("unknown variable `{name}`"),
                    )
                })?;
                list.push(index);
            }
            Elimination::Explicit(list)
        }
    };

    let constraints = entries
        .iter()
        .filter(|e| e.key == "constraint")
        .map(|e| polynomial(e, &order))
        .collect::<Result<Vec<_>, _>>()?;
    if constraints.is_empty() {
        return Err(missing("constraint"));
    }

    let objective = polynomial(single("objective")?.ok_or_else(|| missing("objective"))?, &order)?;

    let start_entry = single("start")?.ok_or_else(|| missing("start"))?;
    let mut start = Vec::new();
    for part in start_entry.value.split(',') {
        let off = part.as_ptr() as usize - start_entry.value.as_ptr() as usize;
        let col = char_column(
            start_entry.value,
            start_entry.column,
            off + (part.len() - part.trim_start().len()),
        );
        let Some((name, value)) = part.split_once('=') else {
            return Err(syntax(start_entry.line, col, "SYNTAX", "expected `name=value`"));
        };
        let name = name.trim();
        let var = order.index_of(name).ok_or_else(|| {
            syntax(
                start_entry.line,
                col,
                "UNKNOWN_VARIABLE",
                format!("unknown variable `{name}`"),
            )
        })?;
        let value: f64 = value
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| {
                syntax(
                    start_entry.line,
                    col,
                    "SYNTAX",
                    format!("`{}` is not a finite number", value.trim()),
                )
            })?;
        if start.iter().any(|&(v, _)| v == var) {
            return Err(syntax(
                start_entry.line,
                col,
                "DUPLICATE_KEY",
                format!("`{name}` assigned twice"),
            ));
        }
        start.push((var, value));
    }

    Ok(ProblemFile {
        order,
        elimination,
        constraints,
        objective,
        start,
        start_location: (start_entry.line, start_entry.column),
    })
}

impl ProblemFile {
    /// Runs triangular validation and the partition, then moves the start
    /// point onto the reduced manifold.
    pub fn build(self, cfg: &ProjectionConfig) -> Result<Problem, CliError> {
        let system = validate_triangular(self.constraints.clone(), &self.order)?;
        let partition = whitney_partition(&system, &self.elimination)?;
        let (line, column) = self.start_location;
        let names = self.order.names();
        let mut start = Vec::with_capacity(partition.retained().len());
        for &var in partition.retained() {
            let value = self.start.iter().find(|&&(v, _)| v == var).map(|&(_, x)| x);
            start.push(value.ok_or_else(|| {
                syntax(
                    line,
                    column,
                    "START_INCOMPLETE",
                    format!("no start value for retained variable `{}`", names[var]),
                )
            })?);
        }
        if let Some(&(var, _)) = self.start.iter().find(|(v, _)| partition.eliminated().contains(v)) {
            return Err(syntax(
                line,
                column,
                "START_NOT_RETAINED",
                format!(
                    "`{}` is eliminated; give start values for retained variables only",
                    names[var]
                ),
            ));
        }
        let constraints = Arc::new(ConstraintSet::new(partition.reduced_g_star()));
        let start = settle_start(&constraints, ReducedPoint(start), cfg)?;
        let objective = self.objective.compile();
        Ok(Problem {
            file: self,
            system,
            partition,
            objective,
            start,
        })
    }
}

fn settle_start(
    constraints: &Arc<ConstraintSet>,
    start: ReducedPoint,
    cfg: &ProjectionConfig,
) -> Result<ReducedPoint, CliError> {
    let residual = constraints.max_residual(start.as_slice());
    if residual <= cfg.residual_tol {
        return Ok(start);
    }
    let off = |reason: String| CliError::StartOffManifold { residual, reason };
    let frame = TangentFrame::new(Arc::clone(constraints), start).map_err(|e| off(e.to_string()))?;
    let w = vec![0.0; frame.tangent_dim()];
    frame
        .project(&w, cfg)
        .map(|p| p.point)
        .map_err(|e| off(format!("projection failed: {e}")))
}

pub fn load_problem(path: &Path, cfg: &ProjectionConfig) -> Result<Problem, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source: Arc::new(source),
    })?;
    parse_problem(&text)?.build(cfg)
}
