use std::fmt::Write as _;

use crate::geometry::normalize_angle;
use crate::mcl_core::CSV_HEADER;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TraceError {
    #[error("empty trace")]
    Empty,
    #[error("trace line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

/// One trace row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub cycle: u64,
    pub est: [f64; 3],
    pub gt: Option<[f64; 3]>,
    pub reliability: f64,
    pub mae: Option<f64>,
}

impl TraceRow {
    pub fn position_error(&self) -> Option<f64> {
        self.gt.map(|g| (g[0] - self.est[0]).hypot(g[1] - self.est[1]))
    }

    pub fn angular_error(&self) -> Option<f64> {
        self.gt.map(|g| normalize_angle(g[2] - self.est[2]).abs())
    }
}

/// Parses a trace written by `sim-run` or `replay-carmen`.
pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>, TraceError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(TraceError::Empty)?;
    if header.trim() != CSV_HEADER {
        return Err(TraceError::Malformed {
            line: 1,
            msg: format!("header must be `{CSV_HEADER}`"),
        });
    }
    let n_cols = CSV_HEADER.split(',').count();
    let mut rows = Vec::new();
    for (i, l) in lines {
        let line = i + 1;
        let bad = |msg: String| TraceError::Malformed { line, msg };
        let c: Vec<&str> = l.trim().split(',').collect();
        if c.len() != n_cols {
            return Err(bad(format!("expected {n_cols} columns, found {}", c.len())));
        }
        let num = |k: usize| -> Result<f64, TraceError> {
            c[k].parse::<f64>()
                .map_err(|_| bad(format!("column {} `{}` is not a number", k + 1, c[k])))
        };
        let opt = |k: usize| -> Result<Option<f64>, TraceError> {
            if c[k].is_empty() {
                Ok(None)
            } else {
                num(k).map(Some)
            }
        };
        let cycle = c[0].parse::<u64>().map_err(|_| bad(format!("bad cycle `{}`", c[0])))?;
        let gt = match (opt(5)?, opt(6)?, opt(7)?) {
            (Some(x), Some(y), Some(t)) => Some([x, y, t]),
            (None, None, None) => None,
            _ => return Err(bad("ground truth must be all present or all empty".into())),
        };
        rows.push(TraceRow {
            cycle,
            est: [num(2)?, num(3)?, num(4)?],
            gt,
            reliability: num(8)?,
            mae: opt(9)?,
        });
    }
    if rows.is_empty() {
        return Err(TraceError::Empty);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub cycles: usize,
    /// Position RMSE, m; `None` without ground truth.
    pub ate: Option<f64>,
    pub angular_rmse: Option<f64>,
    pub max_error: Option<f64>,
    /// Pearson correlation of reliability and position error.
    pub reliability_error_corr: Option<f64>,
    /// First cycle from which the error stays below the threshold.
    pub recovery_cycle: Option<u64>,
    /// Fraction of cycles after the 20th with reliability above 0.9.
    pub high_reliability_fraction: Option<f64>,
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    if a.len() < 2 {
        return None;
    }
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

pub fn summarize(rows: &[TraceRow], threshold: f64) -> TraceSummary {
    let with_gt: Vec<&TraceRow> = rows.iter().filter(|r| r.gt.is_some()).collect();
    let errs: Vec<f64> = with_gt.iter().filter_map(|r| r.position_error()).collect();
    let rms = |v: &[f64]| (!v.is_empty()).then(|| (v.iter().map(|e| e * e).sum::<f64>() / v.len() as f64).sqrt());
    let angs: Vec<f64> = with_gt.iter().filter_map(|r| r.angular_error()).collect();
    let rel: Vec<f64> = with_gt.iter().map(|r| r.reliability).collect();
    let recovery_cycle = if errs.is_empty() {
        None
    } else {
        // walk back from the end while the error stays low
        let k = errs.iter().rev().take_while(|e| **e < threshold).count();
        (k > 0).then(|| with_gt[errs.len() - k].cycle)
    };
    let late: Vec<f64> = rows.iter().filter(|r| r.cycle > 20).map(|r| r.reliability).collect();
    TraceSummary {
        cycles: rows.len(),
        ate: rms(&errs),
        angular_rmse: rms(&angs),
        max_error: errs.iter().copied().reduce(f64::max),
        reliability_error_corr: pearson(&rel, &errs),
        recovery_cycle,
        high_reliability_fraction: (!late.is_empty())
            .then(|| late.iter().filter(|r| **r > 0.9).count() as f64 / late.len() as f64),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or("nan".into(), |x| format!("{x:.6}"))
}

fn verdict(ok: Option<bool>) -> &'static str {
    match ok {
        Some(true) => "pass",
        Some(false) => "fail",
        None => "n/a",
    }
}

impl TraceSummary {
    /// `key=value` lines, then one `criterion.<name>=pass|fail|n/a` line each.
    pub fn render(&self, name: &str, threshold: f64) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "trace={name}");
        let _ = writeln!(s, "cycles={}", self.cycles);
        let _ = writeln!(s, "ate_m={}", opt(self.ate));
        let _ = writeln!(s, "angular_rmse_rad={}", opt(self.angular_rmse));
        let _ = writeln!(s, "max_error_m={}", opt(self.max_error));
        let _ = writeln!(s, "reliability_error_corr={}", opt(self.reliability_error_corr));
        let _ = writeln!(
            s,
            "recovery_cycle={}",
            self.recovery_cycle.map_or("none".into(), |c| c.to_string())
        );
        let _ = writeln!(s, "high_reliability_fraction={}", opt(self.high_reliability_fraction));
        let tracked = self.max_error.map(|m| m < threshold);
        let reliable = self.high_reliability_fraction.map(|f| f >= 0.9);
        let recovered = self.max_error.map(|_| self.recovery_cycle.is_some_and(|c| c <= 60));
        let _ = writeln!(s, "criterion.error_below_threshold_throughout={}", verdict(tracked));
        let _ = writeln!(s, "criterion.reliability_above_0.9_in_90pct={}", verdict(reliable));
        let _ = writeln!(s, "criterion.recovered_within_60_cycles={}", verdict(recovered));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(rows: &[(f64, f64, f64)]) -> String {
        // (est_x, gt_x, reliability)
        let mut s = format!("{CSV_HEADER}\n");
        for (i, (e, g, r)) in rows.iter().enumerate() {
            let _ = writeln!(s, "{i},{:.1},{e},0,0,{g},0,0,{r},0.01,0,0", i as f64 * 0.1);
        }
        s
    }

    #[test]
    fn perfect_trace_has_zero_ate() {
        let rows = parse_trace(&trace(&[(1.0, 1.0, 0.9), (2.0, 2.0, 0.95)])).unwrap();
        let s = summarize(&rows, 0.3);
        assert_eq!(s.ate, Some(0.0));
        assert_eq!(s.recovery_cycle, Some(0));
    }

    #[test]
    fn known_offsets() {
        let rows = parse_trace(&trace(&[(3.0, 0.0, 0.1), (0.4, 0.0, 0.5), (0.1, 0.0, 0.9), (0.0, 0.0, 0.99)])).unwrap();
        let s = summarize(&rows, 0.3);
        let want = ((9.0 + 0.16 + 0.01 + 0.0) / 4.0f64).sqrt();
        assert!((s.ate.unwrap() - want).abs() < 1e-12);
        assert_eq!(s.max_error, Some(3.0));
        assert_eq!(s.recovery_cycle, Some(2));
        assert!(s.reliability_error_corr.unwrap() < -0.5);
    }

    #[test]
    fn empty_and_malformed() {
        assert_eq!(parse_trace(""), Err(TraceError::Empty));
        assert_eq!(parse_trace(&format!("{CSV_HEADER}\n")), Err(TraceError::Empty));
        assert!(matches!(parse_trace("a,b\n"), Err(TraceError::Malformed { line: 1, .. })));
        let bad = format!("{CSV_HEADER}\n0,0,x,0,0,,,,0.5,,0,0\n");
        assert!(matches!(parse_trace(&bad), Err(TraceError::Malformed { line: 2, .. })));
    }

    #[test]
    fn trace_without_ground_truth() {
        let t = format!("{CSV_HEADER}\n0,0.1,1,2,0,,,,0.5,,0,3\n");
        let s = summarize(&parse_trace(&t).unwrap(), 0.3);
        assert_eq!((s.ate, s.recovery_cycle), (None, None));
        assert!(s.render("t", 0.3).contains("criterion.recovered_within_60_cycles=n/a"));
    }
}
