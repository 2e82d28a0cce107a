//! Logged simulation output and its CSV form.
//!
//! Column order is fixed: `t, x1*, u*, d*, dhat*, L0, V`. Optional groups
//! are omitted when absent. Values are written with 17 significant digits
//! so a CSV round-trip reproduces every f64 bit for bit.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{add, norm, sub};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x1: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub d_true: Vec<Vec<f64>>,
    pub d_hat: Option<Vec<Vec<f64>>>,
    #[serde(rename = "L0")]
    pub l0: Option<Vec<f64>>,
    #[serde(rename = "V")]
    pub v: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x1.first().map_or(0, Vec::len)
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// `ẋ1 = u + d1` at every sample.
    pub fn x1_dot(&self) -> Vec<Vec<f64>> {
        self.u.iter().zip(&self.d_true).map(|(u, d)| add(u, d)).collect()
    }

    /// `d̂1 − d1` at every sample, when an estimate was logged.
    pub fn estimation_error(&self) -> Option<Vec<Vec<f64>>> {
        let d_hat = self.d_hat.as_ref()?;
        Some(d_hat.iter().zip(&self.d_true).map(|(a, b)| sub(a, b)).collect())
    }

    pub fn final_l0(&self) -> Option<f64> {
        self.l0.as_ref().and_then(|l| l.last().copied())
    }

    pub fn state_norms(&self) -> Vec<f64> {
        self.x1.iter().map(|x| norm(x)).collect()
    }

    fn check_consistent(&self) -> Result<()> {
        let n = self.len();
        let lens = [
            self.x1.len(),
            self.u.len(),
            self.d_true.len(),
            self.d_hat.as_ref().map_or(n, Vec::len),
            self.l0.as_ref().map_or(n, Vec::len),
            self.v.as_ref().map_or(n, Vec::len),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::Csv(format!("ragged trajectory: times {n}, columns {lens:?}")));
        }
        Ok(())
    }

    pub fn csv_header(&self) -> Vec<String> {
        let dim = self.dim();
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=dim).map(|i| format!("x1{i}")));
        cols.extend((1..=dim).map(|i| format!("u{i}")));
        cols.extend((1..=dim).map(|i| format!("d{i}")));
        if self.d_hat.is_some() {
            cols.extend((1..=dim).map(|i| format!("dhat{i}")));
        }
        if self.l0.is_some() {
            cols.push("L0".into());
        }
        if self.v.is_some() {
            cols.push("V".into());
        }
        cols
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        self.check_consistent()?;
        let io = |e: std::io::Error| Error::Csv(e.to_string());
        writeln!(w, "{}", self.csv_header().join(",")).map_err(io)?;
        let mut line = String::new();
        for k in 0..self.len() {
            line.clear();
            push_num(&mut line, self.times[k]);
            for v in self.x1[k].iter().chain(&self.u[k]).chain(&self.d_true[k]) {
                line.push(',');
                push_num(&mut line, *v);
            }
            if let Some(d_hat) = &self.d_hat {
                for v in &d_hat[k] {
                    line.push(',');
                    push_num(&mut line, *v);
                }
            }
            for col in [&self.l0, &self.v].into_iter().flatten() {
                line.push(',');
                push_num(&mut line, col[k]);
            }
            writeln!(w, "{line}").map_err(io)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Csv(e.to_string()))
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Csv("empty input".into()))?
            .map_err(|e| Error::Csv(e.to_string()))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        let group = |prefix: &str| -> Vec<usize> {
            cols.iter()
                .enumerate()
                .filter(|(_, c)| {
                    c.strip_prefix(prefix)
                        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
                })
                .map(|(i, _)| i)
                .collect()
        };
        let find = |name: &str| cols.iter().position(|c| *c == name);

        if cols.first() != Some(&"t") {
            return Err(Error::Csv(format!("first column must be t, header was {header:?}")));
        }
        let (xi, ui, di, hi) = (group("x1"), group("u"), group("d"), group("dhat"));
        let dim = xi.len();
        if dim == 0 || ui.len() != dim || di.len() != dim || !(hi.is_empty() || hi.len() == dim) {
            return Err(Error::Csv(format!("inconsistent column groups in header {header:?}")));
        }
        let (li, vi) = (find("L0"), find("V"));

        let mut traj = Trajectory {
            d_hat: (!hi.is_empty()).then(Vec::new),
            l0: li.map(|_| Vec::new()),
            v: vi.map(|_| Vec::new()),
            ..Default::default()
        };
        for (row, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Csv(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let vals = line
                .trim()
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|e| Error::Csv(format!("row {}: {e}", row + 2))))
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() != cols.len() {
                return Err(Error::Csv(format!(
                    "row {} has {} fields, header has {}",
                    row + 2,
                    vals.len(),
                    cols.len()
                )));
            }
            let pick = |idx: &[usize]| idx.iter().map(|&i| vals[i]).collect::<Vec<f64>>();
            traj.times.push(vals[0]);
            traj.x1.push(pick(&xi));
            traj.u.push(pick(&ui));
            traj.d_true.push(pick(&di));
            if let Some(d_hat) = traj.d_hat.as_mut() {
                d_hat.push(pick(&hi));
            }
            if let (Some(l0), Some(i)) = (traj.l0.as_mut(), li) {
                l0.push(vals[i]);
            }
            if let (Some(v), Some(i)) = (traj.v.as_mut(), vi) {
                v.push(vals[i]);
            }
        }
        Ok(traj)
    }
}

fn push_num(s: &mut String, v: f64) {
    use std::fmt::Write as _;
    let _ = write!(s, "{v:.16e}");
}
