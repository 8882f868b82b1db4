//! Bookkeeping for the acceptance run: one verdict per criterion, printed as
//! a single `PASS`/`FAIL`/`SKIP` line.

use std::fmt;
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    /// A precondition (such as an optional data file) is missing.
    Skip,
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub outcome: Outcome,
    pub detail: String,
}

impl Verdict {
    pub fn check(pass: bool, detail: impl Into<String>) -> Self {
        Self { outcome: if pass { Outcome::Pass } else { Outcome::Fail }, detail: detail.into() }
    }

    pub fn skip(detail: impl Into<String>) -> Self {
        Self { outcome: Outcome::Skip, detail: detail.into() }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Skip => "SKIP",
        })
    }
}

/// `criterion <id> <name>: <OUTCOME> (<seconds>s) <detail>`
pub fn line(id: usize, name: &str, verdict: &Verdict, elapsed: Duration) -> String {
    format!("criterion {id:>2} {name}: {} ({:.1}s) {}", verdict.outcome, elapsed.as_secs_f64(), verdict.detail)
}

/// Relative error with a floor on the scale, so components near zero are
/// judged against the magnitude of the whole vector.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn fmt_vec(v: &[f64], digits: usize) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.digits$}")).collect();
    format!("({})", items.join(", "))
}
