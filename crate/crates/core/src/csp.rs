//! qCSP_W instances: constraints over a W-symbol alphabet with bounded
//! arity, exact and sampled value computation, constraint graphs, and
//! the "nice" predicate used by the amplification pipeline.

use crate::error::{Error, Result};
use crate::exactmath::{rat_int, Rat};
use crate::specgraph::{self, RotationGraph, SpectralEstimate};
use num::{One, ToPrimitive};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

/// One constraint: an explicit truth table over assignments to its
/// scope. Scope variables are usually distinct; a 2CSP self-loop is
/// written as a repeated variable and its table is then read on the
/// diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub scope: Vec<usize>,
    pub table: Vec<bool>,
}

impl Constraint {
    /// Table index for the scope values in order, first variable most
    /// significant.
    pub fn eval(&self, w: usize, values: &[usize]) -> bool {
        debug_assert_eq!(values.len(), self.scope.len());
        let mut idx = 0usize;
        for &v in values {
            idx = idx * w + v;
        }
        self.table[idx]
    }

    pub fn eval_assignment(&self, w: usize, u: &Assignment) -> bool {
        let mut idx = 0usize;
        for &var in &self.scope {
            idx = idx * w + u.values[var];
        }
        self.table[idx]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub values: Vec<usize>,
}

impl Assignment {
    pub fn new(values: Vec<usize>, w: usize) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|&&v| v >= w) {
            return Err(Error::Domain(format!("symbol {bad} not in [{w}]")));
        }
        Ok(Assignment { values })
    }
}

/// A qCSP_W instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CspInstance {
    pub q: usize,
    pub w: usize,
    pub n: usize,
    pub constraints: Vec<Constraint>,
}

impl CspInstance {
    pub fn new(q: usize, w: usize, n: usize, constraints: Vec<Constraint>) -> Result<Self> {
        if w < 2 {
            return Err(Error::Parameter(format!("alphabet W must be >= 2, got {w}")));
        }
        for (i, c) in constraints.iter().enumerate() {
            if c.scope.len() > q {
                return Err(Error::Shape(format!(
                    "constraint {i} has arity {} > q = {q}",
                    c.scope.len()
                )));
            }
            if let Some(&bad) = c.scope.iter().find(|&&v| v >= n) {
                return Err(Error::Index(format!("constraint {i} names variable {bad} >= n = {n}")));
            }
            let want = w.checked_pow(c.scope.len() as u32).ok_or_else(|| {
                Error::Resource(format!("constraint {i} table size overflows"))
            })?;
            if c.table.len() != want {
                return Err(Error::Shape(format!(
                    "constraint {i} table has {} entries, expected {want}",
                    c.table.len()
                )));
            }
        }
        Ok(CspInstance { q, w, n, constraints })
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    /// Exact fraction of satisfied constraints; 1 for m = 0.
    pub fn frac_satisfied(&self, u: &Assignment) -> Result<Rat> {
        if u.values.len() != self.n {
            return Err(Error::Shape(format!(
                "assignment length {} vs n = {}",
                u.values.len(),
                self.n
            )));
        }
        if self.constraints.is_empty() {
            return Ok(Rat::one());
        }
        let sat = self
            .constraints
            .iter()
            .filter(|c| c.eval_assignment(self.w, u))
            .count();
        Ok(rat_int(sat as i64) / rat_int(self.m() as i64))
    }

    /// Exact value by exhausting all W^n assignments.
    pub fn val_exact(&self, budget: u64) -> Result<Rat> {
        let total = (self.w as f64).powi(self.n as i32);
        if total > budget as f64 {
            return Err(Error::Resource(format!(
                "val_exact needs {}^{} assignments, budget {budget}",
                self.w, self.n
            )));
        }
        if self.constraints.is_empty() {
            return Ok(Rat::one());
        }
        let mut best = 0usize;
        let mut u = Assignment { values: vec![0; self.n] };
        loop {
            let sat = self
                .constraints
                .iter()
                .filter(|c| c.eval_assignment(self.w, &u))
                .count();
            if sat > best {
                best = sat;
                if best == self.m() {
                    break;
                }
            }
            // odometer
            let mut pos = 0;
            loop {
                if pos == self.n {
                    return Ok(rat_int(best as i64) / rat_int(self.m() as i64));
                }
                u.values[pos] += 1;
                if u.values[pos] < self.w {
                    break;
                }
                u.values[pos] = 0;
                pos += 1;
            }
        }
        Ok(rat_int(best as i64) / rat_int(self.m() as i64))
    }

    /// Lower bound on the value by seeded multi-restart single-flip
    /// local search, optionally warm-started from given assignments.
    pub fn val_lower(&self, seed: u64, restarts: usize, starts: &[Assignment]) -> Result<Rat> {
        if self.constraints.is_empty() {
            return Ok(Rat::one());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = 0usize;
        let count = |u: &Assignment| {
            self.constraints
                .iter()
                .filter(|c| c.eval_assignment(self.w, u))
                .count()
        };
        let run = |mut u: Assignment, best: &mut usize| {
            let mut cur = count(&u);
            loop {
                let mut improved = false;
                'outer: for v in 0..self.n {
                    let orig = u.values[v];
                    for s in 0..self.w {
                        if s == orig {
                            continue;
                        }
                        u.values[v] = s;
                        let c = count(&u);
                        if c > cur {
                            cur = c;
                            improved = true;
                            continue 'outer;
                        }
                        u.values[v] = orig;
                    }
                }
                if !improved {
                    break;
                }
            }
            if cur > *best {
                *best = cur;
            }
        };
        for s in starts {
            if s.values.len() != self.n {
                return Err(Error::Shape("warm start has wrong length".into()));
            }
            run(s.clone(), &mut best);
        }
        for _ in 0..restarts {
            let u = Assignment {
                values: (0..self.n).map(|_| rng.gen_range(0..self.w)).collect(),
            };
            run(u, &mut best);
        }
        Ok(rat_int(best as i64) / rat_int(self.m() as i64))
    }

    /// Serializes as "cspw v1 q W n m" plus one line per constraint.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "cspw v1 {} {} {} {}",
            self.q,
            self.w,
            self.n,
            self.m()
        );
        for c in &self.constraints {
            let scope: Vec<String> = c.scope.iter().map(|v| v.to_string()).collect();
            let table: String = c.table.iter().map(|&b| if b { '1' } else { '0' }).collect();
            let _ = writeln!(s, "scope: {} ; table: {}", scope.join(" "), table);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty csp file".into()))?;
        let p: Vec<&str> = header.split_whitespace().collect();
        if p.len() != 6 || p[0] != "cspw" || p[1] != "v1" {
            return Err(Error::Parse(format!("bad header {header:?}")));
        }
        let parse = |t: &str| -> Result<usize> {
            t.parse().map_err(|_| Error::Parse(format!("bad number {t:?}")))
        };
        let (q, w, n, m) = (parse(p[2])?, parse(p[3])?, parse(p[4])?, parse(p[5])?);
        let mut constraints = Vec::with_capacity(m);
        for line in lines {
            let rest = line
                .strip_prefix("scope:")
                .ok_or_else(|| Error::Parse(format!("bad constraint line {line:?}")))?;
            let (scope_s, table_s) = rest
                .split_once(';')
                .ok_or_else(|| Error::Parse(format!("bad constraint line {line:?}")))?;
            let scope: Vec<usize> = scope_s
                .split_whitespace()
                .map(parse)
                .collect::<Result<_>>()?;
            let table_s = table_s
                .trim()
                .strip_prefix("table:")
                .ok_or_else(|| Error::Parse(format!("bad table in {line:?}")))?;
            let table: Vec<bool> = table_s
                .trim()
                .chars()
                .map(|ch| match ch {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(Error::Parse(format!("bad table bit {ch:?}"))),
                })
                .collect::<Result<_>>()?;
            constraints.push(Constraint { scope, table });
        }
        if constraints.len() != m {
            return Err(Error::Parse(format!(
                "expected {m} constraints, found {}",
                constraints.len()
            )));
        }
        CspInstance::new(q, w, n, constraints)
    }
}

/// Constraint graph of a 2CSP: one edge per constraint, plus per-vertex
/// endpoint counts. `graph` is present exactly when the multigraph is
/// regular (a self-loop holds one slot, matching the fixed-point
/// rotation convention).
#[derive(Debug, Clone)]
pub struct ConstraintGraph {
    pub degrees: Vec<usize>,
    pub graph: Option<RotationGraph>,
}

pub fn constraint_graph(phi: &CspInstance) -> Result<ConstraintGraph> {
    if phi.q != 2 {
        return Err(Error::Precondition(format!(
            "constraint_graph needs q = 2, got {}",
            phi.q
        )));
    }
    let mut degrees = vec![0usize; phi.n];
    for (i, c) in phi.constraints.iter().enumerate() {
        match c.scope.as_slice() {
            [a, b] if a != b => {
                degrees[*a] += 1;
                degrees[*b] += 1;
            }
            [a, b] if a == b => degrees[*a] += 1,
            [a] => degrees[*a] += 1,
            _ => {
                return Err(Error::Precondition(format!(
                    "constraint {i} does not have a 2-variable scope"
                )))
            }
        }
    }
    let d = degrees.first().copied().unwrap_or(0);
    if d == 0 || degrees.iter().any(|&x| x != d) {
        return Ok(ConstraintGraph { degrees, graph: None });
    }
    let mut next = vec![0usize; phi.n];
    let mut rot = vec![(0u32, 0u32); phi.n * d];
    for c in &phi.constraints {
        match c.scope.as_slice() {
            [a, b] if a != b => {
                let (pa, pb) = (next[*a], next[*b]);
                next[*a] += 1;
                next[*b] += 1;
                rot[a * d + pa] = (*b as u32, pb as u32);
                rot[b * d + pb] = (*a as u32, pa as u32);
            }
            [a, _] | [a] => {
                let pa = next[*a];
                next[*a] += 1;
                rot[a * d + pa] = (*a as u32, pa as u32);
            }
            _ => unreachable!(),
        }
    }
    Ok(ConstraintGraph {
        degrees,
        graph: Some(RotationGraph::new(phi.n, d, rot)?),
    })
}

/// Verdict of the niceness check, with every failed clause listed.
#[derive(Debug, Clone)]
pub struct NiceReport {
    pub is_nice: bool,
    pub failures: Vec<String>,
    pub lambda: Option<SpectralEstimate>,
}

/// A 2CSP is nice when its constraint graph is regular, at least half
/// the edge slots at every vertex are self-loops, and λ ≤ 0.9.
pub fn is_nice(phi: &CspInstance) -> NiceReport {
    let mut failures = Vec::new();
    if phi.q != 2 {
        failures.push(format!("arity q = {} is not 2", phi.q));
        return NiceReport { is_nice: false, failures, lambda: None };
    }
    let cg = match constraint_graph(phi) {
        Ok(cg) => cg,
        Err(e) => {
            failures.push(format!("constraint graph: {e}"));
            return NiceReport { is_nice: false, failures, lambda: None };
        }
    };
    let graph = match cg.graph {
        Some(g) => g,
        None => {
            failures.push(format!(
                "constraint graph is not regular (degrees {:?}...)",
                &cg.degrees[..cg.degrees.len().min(8)]
            ));
            return NiceReport { is_nice: false, failures, lambda: None };
        }
    };
    let mut loops = vec![0usize; phi.n];
    for c in &phi.constraints {
        match c.scope.as_slice() {
            [a, b] if a == b => loops[*a] += 1,
            [a] => loops[*a] += 1,
            _ => {}
        }
    }
    let d = graph.d();
    for v in 0..phi.n {
        if 2 * loops[v] < d {
            failures.push(format!(
                "vertex {v} has {} self-loops of {d} slots, fewer than half",
                loops[v]
            ));
            break;
        }
    }
    let lambda = specgraph::lambda_auto(&graph).ok();
    if let Some(est) = &lambda {
        let bound = est.lambda_upper.to_f64().unwrap_or(2.0);
        if bound > 0.9 {
            failures.push(format!("lambda bound {bound} exceeds 0.9"));
        }
    } else {
        failures.push("spectral estimate failed".into());
    }
    NiceReport {
        is_nice: failures.is_empty(),
        failures,
        lambda,
    }
}
