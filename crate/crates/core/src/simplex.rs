//! Dense two-phase simplex with Bland's rule.
//!
//! Sized for the capacity LPs here: a few hundred variables at most.

use thiserror::Error;

const EPS: f64 = 1e-10;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("pivot limit reached")]
    IterationLimit,
    #[error("constraint has {got} coefficients, expected {expected}")]
    Shape { got: usize, expected: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `maximize c·x` subject to the constraints and `x ≥ 0`.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; n_vars],
            constraints: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        Tableau::build(self)?.solve(&self.objective)
    }
}

struct Tableau {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_vars: usize,
    /// Columns at or beyond this index are artificial.
    first_artificial: usize,
    cols: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Result<Self, LpError> {
        let n = lp.n_vars();
        let m = lp.constraints.len();
        let n_slack = lp.constraints.iter().filter(|c| c.relation != Relation::Eq).count();
        let n_art = lp
            .constraints
            .iter()
            .filter(|c| {
                let flip = c.rhs < 0.0;
                match c.relation {
                    Relation::Eq => true,
                    Relation::Le => flip,
                    Relation::Ge => !flip,
                }
            })
            .count();
        let first_artificial = n + n_slack;
        let cols = first_artificial + n_art;
        let mut a = vec![vec![0.0; cols + 1]; m];
        let mut basis = vec![0; m];
        let (mut slack, mut art) = (n, first_artificial);
        for (r, c) in lp.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::Shape {
                    got: c.coeffs.len(),
                    expected: n,
                });
            }
            let sign = if c.rhs < 0.0 { -1.0 } else { 1.0 };
            for (dst, &v) in a[r].iter_mut().zip(&c.coeffs) {
                *dst = sign * v;
            }
            a[r][cols] = sign * c.rhs;
            let relation = match (c.relation, sign < 0.0) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (rel, _) => rel,
            };
            match relation {
                Relation::Le => {
                    a[r][slack] = 1.0;
                    basis[r] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    a[r][slack] = -1.0;
                    slack += 1;
                    a[r][art] = 1.0;
                    basis[r] = art;
                    art += 1;
                }
                Relation::Eq => {
                    a[r][art] = 1.0;
                    basis[r] = art;
                    art += 1;
                }
            }
        }
        Ok(Tableau {
            a,
            basis,
            n_vars: n,
            first_artificial,
            cols,
        })
    }

    fn pivot(&mut self, z: &mut [f64], r: usize, c: usize) {
        let p = self.a[r][c];
        for v in self.a[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i != r && row[c] != 0.0 {
                let k = row[c];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= k * pv;
                }
            }
        }
        if z[c] != 0.0 {
            let k = z[c];
            for (v, pv) in z.iter_mut().zip(&pivot_row) {
                *v -= k * pv;
            }
        }
        self.basis[r] = c;
    }

    /// Reduced-cost row for maximizing `cost` over the current basis.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut z: Vec<f64> = (0..=self.cols).map(|j| if j < self.cols { -cost[j] } else { 0.0 }).collect();
        for (row, &b) in self.a.iter().zip(&self.basis) {
            if cost[b] != 0.0 {
                for (v, a) in z.iter_mut().zip(row) {
                    *v += cost[b] * a;
                }
            }
        }
        z
    }

    /// Bland's rule simplex on columns `< limit`.
    fn optimize(&mut self, z: &mut [f64], limit: usize) -> Result<(), LpError> {
        for _ in 0..MAX_PIVOTS {
            let Some(c) = (0..limit).find(|&j| z[j] < -EPS) else {
                return Ok(());
            };
            let mut best: Option<(f64, usize, usize)> = None;
            for (r, row) in self.a.iter().enumerate() {
                if row[c] > EPS {
                    let ratio = row[self.cols] / row[c];
                    let better = match best {
                        None => true,
                        Some((b, _, basis)) => ratio < b - EPS || (ratio <= b + EPS && self.basis[r] < basis),
                    };
                    if better {
                        best = Some((ratio, r, self.basis[r]));
                    }
                }
            }
            let Some((_, r, _)) = best else {
                return Err(LpError::Unbounded);
            };
            self.pivot(z, r, c);
        }
        Err(LpError::IterationLimit)
    }

    fn solve(mut self, objective: &[f64]) -> Result<LpSolution, LpError> {
        let mut phase1 = vec![0.0; self.cols];
        for v in &mut phase1[self.first_artificial..] {
            *v = -1.0;
        }
        let mut z = self.reduced_costs(&phase1);
        self.optimize(&mut z, self.cols)?;
        let scale = self.a.iter().map(|r| r[self.cols].abs()).fold(1.0, f64::max);
        if z[self.cols] < -1e-9 * scale {
            return Err(LpError::Infeasible);
        }
        // drive zero-valued artificials out where a real column allows it
        for r in 0..self.a.len() {
            if self.basis[r] >= self.first_artificial {
                if let Some(c) = (0..self.first_artificial).find(|&j| self.a[r][j].abs() > 1e-9) {
                    self.pivot(&mut z, r, c);
                }
            }
        }
        let mut cost = vec![0.0; self.cols];
        cost[..self.n_vars].copy_from_slice(objective);
        let mut z = self.reduced_costs(&cost);
        self.optimize(&mut z, self.first_artificial)?;
        let mut x = vec![0.0; self.n_vars];
        for (row, &b) in self.a.iter().zip(&self.basis) {
            if b < self.n_vars {
                x[b] = row[self.cols];
            }
        }
        Ok(LpSolution {
            objective: z[self.cols],
            x,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![3.0, 5.0];
        lp.add(vec![1.0, 0.0], Relation::Le, 4.0);
        lp.add(vec![0.0, 2.0], Relation::Le, 12.0);
        lp.add(vec![3.0, 2.0], Relation::Le, 18.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // max -x - y, x + y = 2, x >= 0.5 -> -2
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, -1.0];
        lp.add(vec![1.0, 1.0], Relation::Eq, 2.0);
        lp.add(vec![1.0, 0.0], Relation::Ge, 0.5);
        let s = lp.solve().unwrap();
        assert!((s.objective + 2.0).abs() < 1e-9);
        assert!(s.x[0] >= 0.5 - 1e-9);
    }

    #[test]
    fn negative_rhs_is_normalized() {
        // -x <= -1 means x >= 1; min x -> 1
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![-1.0];
        lp.add(vec![-1.0], Relation::Le, -1.0);
        assert!((lp.solve().unwrap().x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.add(vec![1.0], Relation::Le, 1.0);
        lp.add(vec![1.0], Relation::Ge, 2.0);
        assert_eq!(lp.solve(), Err(LpError::Infeasible));

        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 0.0];
        lp.add(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(lp.solve(), Err(LpError::Unbounded));
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under the largest-coefficient rule.
        let mut lp = LinearProgram::new(4);
        lp.objective = vec![0.75, -150.0, 0.02, -6.0];
        lp.add(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0);
        lp.add(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0);
        lp.add(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 0.05).abs() < 1e-9);
    }
}
