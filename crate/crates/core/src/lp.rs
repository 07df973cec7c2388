//! Dense two-phase simplex for small linear programs.
//!
//! Solves `max c·x` subject to `A x ≤ b`, `x ≥ 0`. Bland's rule (lowest
//! index enters, lowest basic index leaves on ratio ties) rules out cycling.

use alloc::vec;
use alloc::vec::Vec;

const EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex pivot limit reached")]
    PivotLimit,
    #[error("malformed linear program")]
    Malformed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        self.rhs[r] /= p;
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][col];
            if f == 0.0 {
                continue;
            }
            for j in 0..self.rows[i].len() {
                let delta = f * self.rows[r][j];
                self.rows[i][j] -= delta;
            }
            self.rhs[i] -= f * self.rhs[r];
        }
        self.basis[r] = col;
    }

    /// Maximizes `cost · vars` over the columns with `allowed[j]`.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> Result<(), LpError> {
        let ncols = cost.len();
        for _ in 0..MAX_PIVOTS {
            let entering = (0..ncols).find(|&j| {
                if !allowed[j] || self.basis.contains(&j) {
                    return false;
                }
                let z: f64 = self.basis.iter().enumerate().map(|(i, &b)| cost[b] * self.rows[i][j]).sum();
                cost[j] - z > EPS
            });
            let Some(col) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a <= EPS {
                    continue;
                }
                let ratio = self.rhs[i] / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((k, best)) => {
                        if ratio < best - EPS || (ratio <= best + EPS && self.basis[i] < self.basis[k]) {
                            Some((i, ratio))
                        } else {
                            Some((k, best))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Err(LpError::Unbounded);
            };
            self.pivot(r, col);
        }
        Err(LpError::PivotLimit)
    }
}

/// Solves `max c·x` subject to `a x ≤ b`, `x ≥ 0`.
pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution, LpError> {
    let n = c.len();
    let m = b.len();
    if a.len() != m || a.iter().any(|r| r.len() != n) {
        return Err(LpError::Malformed);
    }
    if c.iter().chain(b).chain(a.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(LpError::Malformed);
    }
    let negative: Vec<usize> = (0..m).filter(|&i| b[i] < 0.0).collect();
    let ncols = n + m + negative.len();
    let mut t = Tableau {
        rows: Vec::with_capacity(m),
        rhs: Vec::with_capacity(m),
        basis: Vec::with_capacity(m),
    };
    for i in 0..m {
        let mut row = vec![0.0; ncols];
        row[..n].copy_from_slice(&a[i]);
        row[n + i] = 1.0;
        let mut rhs = b[i];
        let mut basic = n + i;
        if let Some(k) = negative.iter().position(|&j| j == i) {
            row.iter_mut().for_each(|v| *v = -*v);
            rhs = -rhs;
            row[n + m + k] = 1.0;
            basic = n + m + k;
        }
        t.rows.push(row);
        t.rhs.push(rhs);
        t.basis.push(basic);
    }

    if !negative.is_empty() {
        let mut cost = vec![0.0; ncols];
        cost[n + m..].iter_mut().for_each(|v| *v = -1.0);
        t.optimize(&cost, &vec![true; ncols])?;
        let infeasibility: f64 = t
            .basis
            .iter()
            .zip(&t.rhs)
            .filter(|(&bv, _)| bv >= n + m)
            .map(|(_, &r)| r)
            .sum();
        if infeasibility > 1e-9 {
            return Err(LpError::Infeasible);
        }
        // Drive remaining artificials out of the basis; rows that cannot be
        // pivoted are redundant and are dropped.
        let mut i = 0;
        while i < t.rows.len() {
            if t.basis[i] >= n + m {
                match (0..n + m).find(|&j| t.rows[i][j].abs() > 1e-9) {
                    Some(j) => t.pivot(i, j),
                    None => {
                        t.rows.remove(i);
                        t.rhs.remove(i);
                        t.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    let mut cost = vec![0.0; ncols];
    cost[..n].copy_from_slice(c);
    let allowed: Vec<bool> = (0..ncols).map(|j| j < n + m).collect();
    t.optimize(&cost, &allowed)?;
    let mut x = vec![0.0; n];
    for (i, &bv) in t.basis.iter().enumerate() {
        if bv < n {
            x[bv] = t.rhs[i].max(0.0);
        }
    }
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(LpSolution { x, objective })
}

/// Solves `max c·y` subject to `a y ≤ b` and `lo ≤ y ≤ hi` componentwise,
/// by shifting to `x = y − lo ≥ 0`.
pub fn maximize_boxed(c: &[f64], a: &[Vec<f64>], b: &[f64], lo: &[f64], hi: &[f64]) -> Result<LpSolution, LpError> {
    let n = c.len();
    if lo.len() != n || hi.len() != n || lo.iter().zip(hi).any(|(l, h)| l > h) {
        return Err(LpError::Malformed);
    }
    let mut rows = Vec::with_capacity(a.len() + n);
    let mut rhs = Vec::with_capacity(a.len() + n);
    for (row, &bi) in a.iter().zip(b) {
        if row.len() != n {
            return Err(LpError::Malformed);
        }
        let shift: f64 = row.iter().zip(lo).map(|(r, l)| r * l).sum();
        rows.push(row.clone());
        rhs.push(bi - shift);
    }
    for j in 0..n {
        let mut row = vec![0.0; n];
        row[j] = 1.0;
        rows.push(row);
        rhs.push(hi[j] - lo[j]);
    }
    let sol = maximize(c, &rows, &rhs)?;
    let y: Vec<f64> = sol.x.iter().zip(lo).map(|(x, l)| x + l).collect();
    let objective = c.iter().zip(&y).map(|(ci, yi)| ci * yi).sum();
    Ok(LpSolution { x: y, objective })
}
