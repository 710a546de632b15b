use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `R[i][j]`: accuracy on task `j` after training through task `i`, for `j ≤ i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    rows: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn new() -> Self {
        AccuracyMatrix { rows: Vec::new() }
    }

    /// Builds from row `i` holding `i + 1` entries.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut m = AccuracyMatrix::new();
        for row in rows {
            m.push_row(row)?;
        }
        Ok(m)
    }

    /// Appends the evaluations after the next task.
    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        let expected = self.rows.len() + 1;
        if row.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: row.len(),
            });
        }
        if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("accuracy {v} outside [0, 1]")));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn num_tasks(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.rows.get(i).and_then(|r| r.get(j)).copied()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

impl Default for AccuracyMatrix {
    fn default() -> Self {
        Self::new()
    }
}

/// Final average accuracy and backward transfer.
pub fn acc_bwt(m: &AccuracyMatrix) -> Result<(f64, f64)> {
    let t = m.num_tasks();
    if t < 2 {
        return Err(Error::invalid(format!("backward transfer needs at least 2 tasks, got {t}")));
    }
    let last = &m.rows[t - 1];
    let acc = last.iter().sum::<f64>() / t as f64;
    let bwt = (0..t - 1).map(|i| last[i] - m.rows[i][i]).sum::<f64>() / (t - 1) as f64;
    Ok((acc, bwt))
}

/// Kendall tau over comparable pairs.
///
/// A pair tied in either scoring is excluded, and the count of the remaining
/// pairs is the denominator. Returns 0 when no pair is comparable.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::invalid("kendall tau needs at least 2 items"));
    }
    let (mut concordant, mut discordant) = (0i64, 0i64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let sign = (a[i] - a[j]).signum() * (b[i] - b[j]).signum();
            if a[i] == a[j] || b[i] == b[j] {
                continue;
            }
            if sign > 0.0 {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let comparable = concordant + discordant;
    if comparable == 0 {
        return Ok(0.0);
    }
    Ok((concordant - discordant) as f64 / comparable as f64)
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::invalid("pearson correlation needs at least 2 items"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::invalid("pearson correlation of a constant series"));
    }
    Ok(sab / (saa * sbb).sqrt())
}
