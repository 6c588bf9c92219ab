//! Time-stamped trajectory logs shared by simulation, emulation and recordings.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::training::EpisodeTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Sim,
    Recorded,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Sim => "sim",
            Source::Recorded => "recorded",
        })
    }
}

impl FromStr for Source {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sim" => Ok(Source::Sim),
            "recorded" => Ok(Source::Recorded),
            _ => Err(Error::format("trajectory", format!("unknown source '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Diverged,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Ok => "ok",
            Status::Diverged => "diverged",
        })
    }
}

impl FromStr for Status {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(Status::Ok),
            "diverged" => Ok(Status::Diverged),
            _ => Err(Error::format("trajectory", format!("unknown status '{s}'"))),
        }
    }
}

/// Selectable signal of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Theta,
    Omega,
}

impl FromStr for Signal {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta" => Ok(Signal::Theta),
            "omega" => Ok(Signal::Omega),
            _ => Err(Error::invalid("signal", format!("'{s}' is not one of theta, omega"))),
        }
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Signal::Theta => "theta",
            Signal::Omega => "omega",
        })
    }
}

/// Columns `t, θ, ω` plus optional cart states, force and deployment columns.
///
/// Rows pair a state with the force applied from that instant on, so a
/// completed simulation contributes its initial state and every post-step
/// state except the last.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub source: Source,
    pub status: Status,
    pub t: Vec<f64>,
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
    pub x: Option<Vec<f64>>,
    pub v: Option<Vec<f64>>,
    pub f: Option<Vec<f64>>,
    pub duty: Option<Vec<f64>>,
    pub v_bat: Option<Vec<f64>>,
}

impl TrajectoryLog {
    pub fn new(source: Source, t: Vec<f64>, theta: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        let log = Self {
            source,
            status: Status::Ok,
            t,
            theta,
            omega,
            x: None,
            v: None,
            f: None,
            duty: None,
            v_bat: None,
        };
        log.validate()?;
        Ok(log)
    }

    /// Builds a simulation log with uniform spacing `dt`.
    pub fn from_trace(trace: &EpisodeTrace, dt: f64) -> Self {
        let rows = trace.forces.len().min(trace.states.len() + 1);
        let states: Vec<_> = trace.full_states().take(rows).copied().collect();
        Self {
            source: Source::Sim,
            status: if trace.diverged { Status::Diverged } else { Status::Ok },
            t: (0..rows).map(|k| k as f64 * dt).collect(),
            theta: states.iter().map(|s| s.theta).collect(),
            omega: states.iter().map(|s| s.omega).collect(),
            x: Some(states.iter().map(|s| s.x).collect()),
            v: Some(states.iter().map(|s| s.v).collect()),
            f: Some(trace.forces[..rows].to_vec()),
            duty: None,
            v_bat: None,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn signal(&self, s: Signal) -> &[f64] {
        match s {
            Signal::Theta => &self.theta,
            Signal::Omega => &self.omega,
        }
    }

    pub fn duration(&self) -> f64 {
        match (self.t.first(), self.t.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    fn optional_columns(&self) -> Vec<(&'static str, &Vec<f64>)> {
        let mut out = Vec::new();
        for (name, col) in [
            ("x", &self.x),
            ("v", &self.v),
            ("f", &self.f),
            ("duty", &self.duty),
            ("v_bat", &self.v_bat),
        ] {
            if let Some(c) = col {
                out.push((name, c));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.t.len();
        let mut cols: Vec<(&str, &Vec<f64>)> = vec![("theta", &self.theta), ("omega", &self.omega)];
        cols.extend(self.optional_columns());
        for (name, c) in cols {
            if c.len() != n {
                return Err(Error::format(
                    "trajectory",
                    format!("column '{name}' has {} rows, expected {n}", c.len()),
                ));
            }
        }
        for w in self.t.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::format(
                    "trajectory",
                    format!("time not strictly increasing at t = {}", w[1]),
                ));
            }
        }
        if self.t.iter().any(|v| !v.is_finite()) {
            return Err(Error::format("trajectory", "non-finite time stamp"));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<trajectory>", e);
        writeln!(w, "# source={} status={}", self.source, self.status).map_err(io)?;
        let opt = self.optional_columns();
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t", "theta", "omega"];
        header.extend(opt.iter().map(|(n, _)| *n));
        wr.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![
                self.t[i].to_string(),
                self.theta[i].to_string(),
                self.omega[i].to_string(),
            ];
            row.extend(opt.iter().map(|(_, c)| c[i].to_string()));
            wr.write_record(&row)?;
        }
        wr.flush().map_err(io)?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Parses a log; leading `# key=value` lines set the source and status,
    /// which default to `recorded` and `ok`.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut reader = BufReader::new(r);
        let mut source = Source::Recorded;
        let mut status = Status::Ok;
        let mut body = String::new();
        let mut line = String::new();
        loop {
            line.clear();
            if reader.read_line(&mut line).map_err(|e| Error::io("<trajectory>", e))? == 0 {
                break;
            }
            let trimmed = line.trim();
            if let Some(meta) = trimmed.strip_prefix('#') {
                for kv in meta.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("source", v)) => source = v.parse()?,
                        Some(("status", v)) => status = v.parse()?,
                        _ => {}
                    }
                }
            } else {
                body.push_str(&line);
                break;
            }
        }
        reader
            .read_to_string(&mut body)
            .map_err(|e| Error::io("<trajectory>", e))?;

        let mut rd = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(body.as_bytes());
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        let idx = |name: &str| header.iter().position(|h| h == name);
        let (Some(it), Some(ith), Some(iw)) = (idx("t"), idx("theta"), idx("omega")) else {
            return Err(Error::format("trajectory", "header must contain t, theta and omega"));
        };
        let known = ["t", "theta", "omega", "x", "v", "f", "duty", "v_bat"];
        if let Some(h) = header.iter().find(|h| !known.contains(&h.as_str())) {
            return Err(Error::format("trajectory", format!("unknown column '{h}'")));
        }
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::format(
                        "trajectory",
                        format!("row {}: bad number '{field}' in '{}'", row + 1, header[j]),
                    )
                })?;
                cols[j].push(v);
            }
        }
        let take = |name: &str, cols: &mut Vec<Vec<f64>>| idx(name).map(|i| std::mem::take(&mut cols[i]));
        let log = Self {
            source,
            status,
            t: std::mem::take(&mut cols[it]),
            theta: std::mem::take(&mut cols[ith]),
            omega: std::mem::take(&mut cols[iw]),
            x: take("x", &mut cols),
            v: take("v", &mut cols),
            f: take("f", &mut cols),
            duty: take("duty", &mut cols),
            v_bat: take("v_bat", &mut cols),
        };
        log.validate()?;
        Ok(log)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_with_optional_columns() {
        let mut log = TrajectoryLog::new(
            Source::Sim,
            vec![0.0, 0.01, 0.025],
            vec![0.1, 0.09, -1e-17],
            vec![0.0, -1.5, 2.0],
        )
        .unwrap();
        log.f = Some(vec![1.0, 2.0, 3.0]);
        log.duty = Some(vec![0.1, 0.2, 0.3]);
        log.status = Status::Diverged;
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# source=sim status=diverged\nt,theta,omega,f,duty\n"));
        assert_eq!(TrajectoryLog::read_csv(buf.as_slice()).unwrap(), log);
    }

    #[test]
    fn plain_recording_parses() {
        let csv = "t,theta,omega\n0,0.1,0\n0.012,0.09,-0.5\n0.04,0.05,-1\n";
        let log = TrajectoryLog::read_csv(csv.as_bytes()).unwrap();
        assert_eq!(log.source, Source::Recorded);
        assert_eq!(log.t, vec![0.0, 0.012, 0.04]);
        assert!(log.x.is_none());
    }

    #[test]
    fn rejects_bad_logs() {
        assert!(TrajectoryLog::read_csv("t,theta\n0,1\n".as_bytes()).is_err());
        assert!(TrajectoryLog::read_csv("t,theta,omega\n0,1,1\n0,1,1\n".as_bytes()).is_err());
        assert!(TrajectoryLog::read_csv("t,theta,omega,q\n0,1,1,1\n".as_bytes()).is_err());
        assert!(TrajectoryLog::read_csv("t,theta,omega\n0,abc,1\n".as_bytes()).is_err());
    }
}
