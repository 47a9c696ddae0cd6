//! CSV and JSON encodings of trajectories.
//!
//! CSV has a header `t,x1,...,xdim` and one row per sample; the period is
//! recovered as `N · t_1`. JSON is `{"T": …, "values": [[…], …]}`.

use super::Trajectory;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct TrajectoryJson {
    #[serde(rename = "T")]
    period: f64,
    values: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for i in 1..=self.dim() {
            let _ = write!(out, ",x{i}");
        }
        out.push('\n');
        for k in 0..self.n() {
            let _ = write!(out, "{:?}", self.time(k));
            for x in self.row(k) {
                let _ = write!(out, ",{x:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"t") || cols.len() < 2 {
            return Err(Error::Parse(format!("line 1: expected header `t,x1,...`, got `{header}`")));
        }
        let dim = cols.len() - 1;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != dim + 1 {
                return Err(Error::Parse(format!(
                    "line {}: expected {} fields, got {}",
                    i + 2,
                    dim + 1,
                    fields.len()
                )));
            }
            for (j, f) in fields.iter().enumerate() {
                let x: f64 = f
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {}, field {}: `{f}` is not a number", i + 2, j + 1)))?;
                if j == 0 {
                    times.push(x);
                } else {
                    values.push(x);
                }
            }
        }
        if times.len() < 2 {
            return Err(Error::Parse("need at least two rows to recover the period".into()));
        }
        let n = times.len();
        Trajectory::new(times[1] * n as f64, n, dim, values)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = TrajectoryJson {
            period: self.period(),
            values: self.rows().map(|r| r.to_vec()).collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TrajectoryJson = serde_json::from_str(text)?;
        let n = doc.values.len();
        let dim = doc.values.first().map_or(0, Vec::len);
        if doc.values.iter().any(|r| r.len() != dim) {
            return Err(Error::Parse("ragged values array".into()));
        }
        Trajectory::new(doc.period, n, dim, doc.values.into_iter().flatten().collect())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn sample() -> Trajectory {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        Trajectory::random_band_limited(&mut rng, 0.7, 24, 3, 4).unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let u = sample();
        let back = Trajectory::from_csv(&u.to_csv()).unwrap();
        assert_eq!(back.values(), u.values());
        assert!((back.period() - u.period()).abs() <= 1e-15 * u.period());
    }

    #[test]
    fn json_round_trip() {
        let u = sample();
        let back = Trajectory::from_json(&u.to_json().unwrap()).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn csv_errors_name_the_line() {
        let err = Trajectory::from_csv("t,x1\n0,1\n0.5,oops\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(Trajectory::from_csv("x,y\n").is_err());
    }
}
