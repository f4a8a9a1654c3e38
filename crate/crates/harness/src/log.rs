use std::fmt;
use std::str::FromStr;

use crate::error::HarnessError;
use crate::fsutil::one_line;

pub const LOG_HEADER: &str = "commit\trmse\tstatus\tdescription";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Keep,
    Discard,
    Crash,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Keep => "keep",
            Status::Discard => "discard",
            Status::Crash => "crash",
        })
    }
}

impl FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "keep" => Ok(Status::Keep),
            "discard" => Ok(Status::Discard),
            "crash" => Ok(Status::Crash),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

/// One experiment. `score` is `+inf` for crashes and the 4-decimal rounded
/// evaluator score otherwise, so a log re-read from disk decides identically.
#[derive(Clone, Debug, PartialEq)]
pub struct LogEntry {
    pub index: usize,
    pub snapshot: String,
    pub score: f64,
    pub status: Status,
    pub description: String,
}

impl LogEntry {
    pub fn new(
        index: usize,
        snapshot: &str,
        score: f64,
        status: Status,
        description: &str,
    ) -> Self {
        let score = if status == Status::Crash {
            f64::INFINITY
        } else {
            round4(score)
        };
        LogEntry {
            index,
            snapshot: snapshot.to_string(),
            score,
            status,
            description: one_line(description),
        }
    }

    /// Crash rows are written with a zero score.
    pub fn to_row(&self) -> String {
        let score = if self.status == Status::Crash {
            0.0
        } else {
            self.score
        };
        format!(
            "{}\t{:.4}\t{}\t{}",
            self.snapshot, score, self.status, self.description
        )
    }
}

pub(crate) fn round4(x: f64) -> f64 {
    format!("{x:.4}").parse().unwrap_or(x)
}

pub fn render_log(entries: &[LogEntry]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for e in entries {
        out.push_str(&e.to_row());
        out.push('\n');
    }
    out
}

/// Strict parse. Every malformed row is an error carrying its 1-based line.
pub fn parse_log(text: &str) -> Result<Vec<LogEntry>, HarnessError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == LOG_HEADER => {}
        _ => {
            return Err(HarnessError::CorruptLog {
                line: 1,
                reason: "missing or altered header".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let bad = |reason: String| HarnessError::CorruptLog {
            line: i + 1,
            reason,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", fields.len())));
        }
        let snapshot = fields[0];
        if snapshot.len() != 7 || !snapshot.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(bad(format!("bad commit id `{snapshot}`")));
        }
        let score: f64 = fields[1]
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| bad(format!("bad score `{}`", fields[1])))?;
        let status: Status = fields[2].parse().map_err(bad)?;
        if status == Status::Crash && score != 0.0 {
            return Err(bad("crash row with nonzero score".into()));
        }
        let score = if status == Status::Crash {
            f64::INFINITY
        } else {
            score
        };
        out.push(LogEntry {
            index: out.len(),
            snapshot: snapshot.to_string(),
            score,
            status,
            description: fields[3].to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crash_row_reads_back_as_infinite() {
        let e = LogEntry::new(3, "abc1234", 0.7, Status::Crash, "bad\tidea\n");
        assert_eq!(e.to_row(), "abc1234\t0.0000\tcrash\tbad idea");
        let back = parse_log(&render_log(&[
            LogEntry::new(0, "0000000", 1.50431, Status::Keep, "baseline"),
            e,
        ]))
        .unwrap();
        assert_eq!(back[0].score, 1.5043);
        assert!(back[1].score.is_infinite());
        assert_eq!(back[1].index, 1);
    }

    #[test]
    fn corrupt_row_names_its_line() {
        let text = format!("{LOG_HEADER}\nabc1234\t1.0000\tkeep\tok\nabc1235\tx\tkeep\tok\n");
        match parse_log(&text) {
            Err(HarnessError::CorruptLog { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = format!("{LOG_HEADER}\nabc1234\t1.0000\tmaybe\tok\n");
        assert!(matches!(
            parse_log(&text),
            Err(HarnessError::CorruptLog { line: 2, .. })
        ));
    }

    #[test]
    fn rounding_is_what_gets_written() {
        let e = LogEntry::new(0, "abcdef0", 1.23456789, Status::Keep, "x");
        assert_eq!(e.score, 1.2346);
        assert_eq!(
            parse_log(&render_log(std::slice::from_ref(&e))).unwrap()[0],
            e
        );
    }
}
