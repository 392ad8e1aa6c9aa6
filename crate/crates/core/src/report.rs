//! Tabular study results with fitted rates and verdicts.

use std::fmt::Write as _;

/// Outcome of a verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::Inconclusive => "inconclusive",
        }
    }
}

/// A measured quantity judged against a threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub outcome: Outcome,
    pub measured: f64,
    /// Human-readable rule, e.g. `>= 1.2`.
    pub rule: String,
    pub threshold: f64,
}

impl Verdict {
    pub fn at_least(name: &str, measured: f64, threshold: f64) -> Self {
        Self::judged(name, measured, measured >= threshold, ">=", threshold)
    }

    pub fn at_most(name: &str, measured: f64, threshold: f64) -> Self {
        Self::judged(name, measured, measured <= threshold, "<=", threshold)
    }

    fn judged(name: &str, measured: f64, ok: bool, op: &str, threshold: f64) -> Self {
        Self {
            name: name.into(),
            outcome: if ok { Outcome::Pass } else { Outcome::Fail },
            measured,
            rule: format!("{op} {}", fmt_num(threshold)),
            threshold,
        }
    }

    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }
}

/// Least-squares line `y = slope·x + intercept`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Root-mean-square residual.
    pub rms_residual: f64,
    pub points: usize,
}

impl LinearFit {
    /// Returns `None` with fewer than two points or constant `x`.
    pub fn fit(x: &[f64], y: &[f64]) -> Option<Self> {
        let n = x.len().min(y.len());
        if n < 2 {
            return None;
        }
        let nf = n as f64;
        let mx = x[..n].iter().sum::<f64>() / nf;
        let my = y[..n].iter().sum::<f64>() / nf;
        let sxx: f64 = x[..n].iter().map(|a| (a - mx).powi(2)).sum();
        let sxy: f64 = x[..n].iter().zip(&y[..n]).map(|(a, b)| (a - mx) * (b - my)).sum();
        let syy: f64 = y[..n].iter().map(|b| (b - my).powi(2)).sum();
        if sxx == 0.0 {
            return None;
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let ss_res: f64 = x[..n]
            .iter()
            .zip(&y[..n])
            .map(|(a, b)| (b - slope * a - intercept).powi(2))
            .sum();
        let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
        Some(Self {
            slope,
            intercept,
            r_squared,
            rms_residual: (ss_res / nf).sqrt(),
            points: n,
        })
    }

    /// Fit of `ln y` against `ln x`.
    pub fn log_log(x: &[f64], y: &[f64]) -> Option<Self> {
        let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        Self::fit(&lx, &ly)
    }
}

/// One table row.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub parameter: f64,
    pub label: String,
    pub values: Vec<f64>,
    pub status: String,
}

/// Sweep results: rows, named fits and verdicts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StudyReport {
    pub name: String,
    pub parameter: String,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub fits: Vec<(String, LinearFit)>,
    pub verdicts: Vec<Verdict>,
    pub metadata: Vec<(String, String)>,
}

impl StudyReport {
    pub fn new(name: &str, parameter: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            parameter: parameter.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn push(&mut self, parameter: f64, label: &str, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push(Row {
            parameter,
            label: label.into(),
            values,
            status: "ok".into(),
        });
    }

    pub fn push_failure(&mut self, parameter: f64, label: &str, reason: &str) {
        self.rows.push(Row {
            parameter,
            label: label.into(),
            values: vec![f64::NAN; self.columns.len()],
            status: reason.replace([',', '\n'], ";"),
        });
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }

    /// Stable sort by parameter value.
    pub fn sort_rows(&mut self) {
        self.rows
            .sort_by(|a, b| a.parameter.total_cmp(&b.parameter));
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.values[idx]).collect())
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(Verdict::passed)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.status != "ok").count()
    }

    /// CSV with a `#`-prefixed metadata block describing columns, fits and verdicts.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# study: {}", self.name);
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(
            out,
            "# columns: {}, label, {}, status",
            self.parameter,
            self.columns.join(", ")
        );
        for (name, fit) in &self.fits {
            let _ = writeln!(
                out,
                "# fit {name}: slope={} intercept={} r2={} rms={} points={}",
                fmt_num(fit.slope),
                fmt_num(fit.intercept),
                fmt_num(fit.r_squared),
                fmt_num(fit.rms_residual),
                fit.points
            );
        }
        for v in &self.verdicts {
            let _ = writeln!(
                out,
                "# verdict {}: {} (measured {} {})",
                v.name,
                v.outcome.as_str(),
                fmt_num(v.measured),
                v.rule
            );
        }
        let _ = writeln!(
            out,
            "{},label,{},status",
            self.parameter,
            self.columns.join(",")
        );
        for r in &self.rows {
            let values: Vec<String> = r.values.iter().map(|&v| fmt_num(v)).collect();
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_num(r.parameter),
                r.label,
                values.join(","),
                r.status
            );
        }
        out
    }

    /// One-line summary of the verdicts.
    pub fn summary(&self) -> String {
        let parts: Vec<String> = self
            .verdicts
            .iter()
            .map(|v| format!("{}={} ({} {})", v.name, v.outcome.as_str(), fmt_num(v.measured), v.rule))
            .collect();
        if parts.is_empty() {
            return format!("{}: {} rows, no verdicts", self.name, self.rows.len());
        }
        format!("{}: {}", self.name, parts.join("; "))
    }
}

/// Shortest round-trip formatting, identical across runs.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:e}")
    }
}

/// `max/min` of positive values; `1` when all vanish, infinite when only some do.
pub fn spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if values.is_empty() || max == 0.0 {
        1.0
    } else if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let f = LinearFit::fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept + 1.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
        assert!(LinearFit::fit(&[1.0], &[2.0]).is_none());
    }

    #[test]
    fn power_law_slope() {
        let x = [0.1, 0.05, 0.025];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        let f = LinearFit::log_log(&x, &y).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let mut r = StudyReport::new("demo", "eps", &["a", "b"]);
        r.meta("config_hash", "abc");
        r.push(0.5, "x", vec![1.0, 0.25]);
        r.push(0.25, "y", vec![2.0, f64::NAN]);
        r.sort_rows();
        r.verdicts.push(Verdict::at_most("spread", 2.0, 3.0));
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# study: demo");
        assert_eq!(lines[1], "# config_hash: abc");
        assert!(csv.contains("# verdict spread: pass (measured 2e0 <= 3e0)"));
        assert!(csv.contains("eps,label,a,b,status\n2.5e-1,y,2e0,NaN,ok\n5e-1,x,1e0,2.5e-1,ok\n"));
        assert!(r.passed());
    }

    #[test]
    fn spread_conventions() {
        assert_eq!(spread(&[0.0, 0.0]), 1.0);
        assert_eq!(spread(&[1.0, 4.0]), 4.0);
        assert!(spread(&[0.0, 1.0]).is_infinite());
    }
}
