//! CSV rows and the human-readable summary.

use stir_core::estimators::{fmt_real, BoundReport, Verdict, CSV_HEADER};
use stir_core::Estimate;

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub check: String,
    pub horizon: f64,
    pub mean: f64,
    pub stderr: f64,
    pub rhs: f64,
    pub verdict: String,
    pub samples: u64,
    pub seed: u64,
    pub anchor: String,
    pub note: String,
}

pub const ESTIMATE: &str = "ESTIMATE";
pub const REPORTED: &str = "REPORTED";

impl Row {
    pub fn estimate(check: &str, anchor: impl Into<String>, horizon: f64, e: Estimate) -> Row {
        Row {
            check: check.into(),
            horizon,
            mean: e.mean,
            stderr: e.stderr,
            rhs: f64::NAN,
            verdict: ESTIMATE.into(),
            samples: e.count,
            seed: e.seed,
            anchor: anchor.into(),
            note: String::new(),
        }
    }

    /// An exact comparison, decided without sampling error.
    pub fn exact(check: &str, anchor: impl Into<String>, horizon: f64, lhs: f64, rhs: f64, holds: bool, samples: u64, seed: u64) -> Row {
        Row {
            check: check.into(),
            horizon,
            mean: lhs,
            stderr: 0.0,
            rhs,
            verdict: if holds { Verdict::Holds } else { Verdict::Violated }.label().into(),
            samples,
            seed,
            anchor: anchor.into(),
            note: String::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Row {
        self.note = note.into();
        self
    }

    pub fn violated(&self) -> bool {
        self.verdict == Verdict::Violated.label()
    }

    pub fn csv(&self, digest: &str) -> String {
        [
            field(&self.check),
            field(digest),
            fmt_real(self.horizon),
            fmt_real(self.mean),
            fmt_real(self.stderr),
            fmt_real(self.rhs),
            self.verdict.clone(),
            self.samples.to_string(),
            self.seed.to_string(),
            field(&self.anchor),
        ]
        .join(",")
    }

    pub fn summary(&self) -> String {
        let h = if self.horizon.fract() == 0.0 && self.horizon.abs() < 1e15 {
            format!("{}", self.horizon as i64)
        } else {
            format!("{}", self.horizon)
        };
        let mut s = format!("  {:<28} {:>7}  {:.6e} ± {:.2e}", self.check, h, self.mean, self.stderr);
        if !self.rhs.is_nan() {
            s.push_str(&format!("  vs {:.6e}", self.rhs));
        }
        s.push_str(&format!("  {:<12} [{}]", self.verdict, self.anchor));
        if !self.note.is_empty() {
            s.push_str(&format!(" {}", self.note));
        }
        s
    }
}

impl From<BoundReport> for Row {
    fn from(r: BoundReport) -> Row {
        let mut note = r.note.clone();
        if r.rhs_stderr > 0.0 {
            let extra = format!("rhs stderr {:.3e}", r.rhs_stderr);
            note = if note.is_empty() { extra } else { format!("{extra}; {note}") };
        }
        let verdict = if r.asserted {
            r.verdict.label().to_string()
        } else {
            if !note.is_empty() {
                note.push_str("; ");
            }
            note.push_str(&format!("would read {}", r.verdict.label()));
            REPORTED.to_string()
        };
        let stderr = r.combined_stderr();
        Row {
            check: r.check,
            horizon: r.horizon,
            mean: r.lhs.mean,
            stderr,
            rhs: r.rhs,
            verdict,
            samples: r.lhs.count,
            seed: r.lhs.seed,
            anchor: r.anchor,
            note,
        }
    }
}

fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv(rows: &[Row], digest: &str) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv(digest));
        out.push('\n');
    }
    out
}
