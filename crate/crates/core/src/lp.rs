//! Dense-tableau simplex over exact rationals.
//!
//! Problems are `maximize c·x` subject to linear rows and `x >= 0`. Pivoting
//! uses Bland's rule (lowest entering column, lowest leaving basis index), so
//! runs are deterministic and terminate under degeneracy.

use std::collections::{BTreeSet, VecDeque};

use num_traits::{Signed, Zero};

use crate::rational::Q;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<Q>,
    pub op: Op,
    pub rhs: Q,
}

impl Constraint {
    pub fn new(coeffs: Vec<Q>, op: Op, rhs: Q) -> Self {
        Constraint { coeffs, op, rhs }
    }
}

#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub n_vars: usize,
    pub objective: Vec<Q>,
    pub constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<Q>, value: Q },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn value(&self) -> Option<&Q> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(value),
            _ => None,
        }
    }
}

/// Result of enumerating the vertices of the optimal face.
#[derive(Clone, Debug, PartialEq)]
pub enum VertexEnumeration {
    Complete(Vec<Vec<Q>>),
    BudgetExhausted(Vec<Vec<Q>>),
    NotOptimal(LpOutcome),
}

#[derive(Clone, Debug)]
struct Tableau {
    rows: Vec<Vec<Q>>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> &Q {
        &self.rows[i][self.ncols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v /= &p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    fn reduced_costs(&self, cost: &[Q]) -> Vec<Q> {
        let mut d = cost.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            if cost[b].is_zero() {
                continue;
            }
            for (j, dj) in d.iter_mut().enumerate() {
                let a = &self.rows[i][j];
                if !a.is_zero() {
                    *dj -= &cost[b] * a;
                }
            }
        }
        d
    }

    /// Rows attaining the minimum ratio for entering column `c`.
    fn ratio_rows(&self, c: usize) -> Vec<usize> {
        let mut best: Option<Q> = None;
        let mut rows = Vec::new();
        for i in 0..self.rows.len() {
            let a = &self.rows[i][c];
            if !a.is_positive() {
                continue;
            }
            let ratio = self.rhs(i) / a;
            match &best {
                Some(b) if &ratio > b => {}
                Some(b) if &ratio == b => rows.push(i),
                _ => {
                    best = Some(ratio);
                    rows = vec![i];
                }
            }
        }
        rows
    }

    /// Maximizes `cost·x` over the current feasible basis; `false` if unbounded.
    fn optimize(&mut self, cost: &[Q], allowed: &[bool]) -> bool {
        loop {
            let d = self.reduced_costs(cost);
            let entering = (0..self.ncols)
                .find(|&j| allowed[j] && d[j].is_positive() && !self.basis.contains(&j));
            let Some(c) = entering else {
                return true;
            };
            let rows = self.ratio_rows(c);
            let Some(&r) = rows.iter().min_by_key(|&&i| self.basis[i]) else {
                return false;
            };
            self.pivot(r, c);
        }
    }

    fn point(&self, n: usize) -> Vec<Q> {
        let mut x = vec![Q::zero(); n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.rhs(i).clone();
            }
        }
        x
    }
}

impl LinearProgram {
    pub fn new(n_vars: usize, objective: Vec<Q>) -> Self {
        assert_eq!(objective.len(), n_vars);
        LinearProgram {
            n_vars,
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn add(&mut self, coeffs: Vec<Q>, op: Op, rhs: Q) {
        assert_eq!(coeffs.len(), self.n_vars);
        self.constraints.push(Constraint::new(coeffs, op, rhs));
    }

    /// Builds a feasible tableau over the structural and slack columns, with
    /// artificial columns removed. `None` if the feasible set is empty.
    fn feasible_tableau(&self) -> Option<Tableau> {
        let n = self.n_vars;
        let m = self.constraints.len();
        let mut rows_src: Vec<(Vec<Q>, Op, Q)> = Vec::with_capacity(m);
        for c in &self.constraints {
            if c.rhs.is_negative() {
                let op = match c.op {
                    Op::Le => Op::Ge,
                    Op::Ge => Op::Le,
                    Op::Eq => Op::Eq,
                };
                rows_src.push((c.coeffs.iter().map(|v| -v).collect(), op, -c.rhs.clone()));
            } else {
                rows_src.push((c.coeffs.clone(), c.op, c.rhs.clone()));
            }
        }
        let n_slack = rows_src.iter().filter(|r| r.1 != Op::Eq).count();
        let n_art = rows_src.iter().filter(|r| r.1 != Op::Le).count();
        let ncols = n + n_slack + n_art;
        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let (mut s, mut a) = (n, n + n_slack);
        for (coeffs, op, rhs) in rows_src {
            let mut row = vec![Q::zero(); ncols + 1];
            row[..n].clone_from_slice(&coeffs);
            row[ncols] = rhs;
            match op {
                Op::Le => {
                    row[s] = Q::from_integer(1.into());
                    basis.push(s);
                    s += 1;
                }
                Op::Ge => {
                    row[s] = Q::from_integer((-1).into());
                    row[a] = Q::from_integer(1.into());
                    basis.push(a);
                    s += 1;
                    a += 1;
                }
                Op::Eq => {
                    row[a] = Q::from_integer(1.into());
                    basis.push(a);
                    a += 1;
                }
            }
            rows.push(row);
        }
        let mut t = Tableau { rows, basis, ncols };
        let first_art = n + n_slack;
        if n_art > 0 {
            let cost: Vec<Q> = (0..ncols)
                .map(|j| {
                    if j >= first_art {
                        Q::from_integer((-1).into())
                    } else {
                        Q::zero()
                    }
                })
                .collect();
            let allowed = vec![true; ncols];
            t.optimize(&cost, &allowed);
            let infeasibility: Q = t
                .basis
                .iter()
                .enumerate()
                .filter(|(_, &b)| b >= first_art)
                .map(|(i, _)| t.rhs(i).clone())
                .sum();
            if infeasibility.is_positive() {
                return None;
            }
            // Drive remaining (zero-level) artificials out of the basis or
            // drop their rows as redundant.
            let mut i = 0;
            while i < t.rows.len() {
                if t.basis[i] >= first_art {
                    match (0..first_art).find(|&j| !t.rows[i][j].is_zero()) {
                        Some(j) => {
                            t.pivot(i, j);
                            i += 1;
                        }
                        None => {
                            t.rows.remove(i);
                            t.basis.remove(i);
                        }
                    }
                } else {
                    i += 1;
                }
            }
            for row in t.rows.iter_mut() {
                let rhs = row[ncols].clone();
                row.truncate(first_art);
                row.push(rhs);
            }
            t.ncols = first_art;
        }
        Some(t)
    }

    fn padded_objective(&self, ncols: usize) -> Vec<Q> {
        let mut cost = self.objective.clone();
        cost.resize(ncols, Q::zero());
        cost
    }

    pub fn solve(&self) -> LpOutcome {
        let Some(mut t) = self.feasible_tableau() else {
            return LpOutcome::Infeasible;
        };
        let cost = self.padded_objective(t.ncols);
        let allowed = vec![true; t.ncols];
        if !t.optimize(&cost, &allowed) {
            return LpOutcome::Unbounded;
        }
        let x = t.point(self.n_vars);
        let value = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        LpOutcome::Optimal { x, value }
    }

    /// Enumerates every vertex of the optimal face by walking all feasible
    /// bases of `{x feasible, c·x = optimum}`. `budget` caps the number of
    /// bases visited.
    pub fn optimal_vertices(&self, budget: usize) -> VertexEnumeration {
        let outcome = self.solve();
        let LpOutcome::Optimal { value, .. } = &outcome else {
            return VertexEnumeration::NotOptimal(outcome);
        };
        let mut face = self.clone();
        face.add(self.objective.clone(), Op::Eq, value.clone());
        let Some(start) = face.feasible_tableau() else {
            return VertexEnumeration::NotOptimal(outcome);
        };
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
        let mut vertices: BTreeSet<Vec<Q>> = BTreeSet::new();
        let mut queue = VecDeque::new();
        let key = |t: &Tableau| {
            let mut b = t.basis.clone();
            b.sort_unstable();
            b
        };
        seen.insert(key(&start));
        queue.push_back(start);
        while let Some(t) = queue.pop_front() {
            vertices.insert(t.point(self.n_vars));
            for c in 0..t.ncols {
                if t.basis.contains(&c) {
                    continue;
                }
                for r in t.ratio_rows(c) {
                    let mut next = t.clone();
                    next.pivot(r, c);
                    if seen.insert(key(&next)) {
                        if seen.len() > budget {
                            return VertexEnumeration::BudgetExhausted(
                                vertices.into_iter().collect(),
                            );
                        }
                        queue.push_back(next);
                    }
                }
            }
        }
        VertexEnumeration::Complete(vertices.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    #[test]
    fn small_max() {
        // max 3x + 2y, x + y <= 4, x + 3y <= 6, x <= 3
        let mut lp = LinearProgram::new(2, vec![qi(3), qi(2)]);
        lp.add(vec![qi(1), qi(1)], Op::Le, qi(4));
        lp.add(vec![qi(1), qi(3)], Op::Le, qi(6));
        lp.add(vec![qi(1), qi(0)], Op::Le, qi(3));
        match lp.solve() {
            LpOutcome::Optimal { x, value } => {
                assert_eq!(value, qi(11));
                assert_eq!(x, vec![qi(3), qi(1)]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn equality_and_ge() {
        // max -x - y, x + y = 1, x >= 1/3
        let mut lp = LinearProgram::new(2, vec![qi(-1), qi(-2)]);
        lp.add(vec![qi(1), qi(1)], Op::Eq, qi(1));
        lp.add(vec![qi(1), qi(0)], Op::Ge, q(1, 3));
        assert_eq!(lp.solve().value(), Some(&qi(-1)));
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1, vec![qi(1)]);
        lp.add(vec![qi(1)], Op::Le, qi(-1));
        assert_eq!(lp.solve(), LpOutcome::Infeasible);
        let mut lp = LinearProgram::new(2, vec![qi(1), qi(0)]);
        lp.add(vec![qi(-1), qi(1)], Op::Le, qi(1));
        assert_eq!(lp.solve(), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(2, vec![qi(1), qi(1)]);
        lp.add(vec![qi(1), qi(1)], Op::Eq, qi(2));
        lp.add(vec![qi(2), qi(2)], Op::Eq, qi(4));
        assert_eq!(lp.solve().value(), Some(&qi(2)));
    }

    #[test]
    fn optimal_face_vertices() {
        // max x + y on the unit square's diagonal edge: optimal face is the
        // segment between (1,0) and (0,1) when x + y <= 1.
        let mut lp = LinearProgram::new(2, vec![qi(1), qi(1)]);
        lp.add(vec![qi(1), qi(1)], Op::Le, qi(1));
        match lp.optimal_vertices(100) {
            VertexEnumeration::Complete(v) => {
                assert_eq!(v, vec![vec![qi(0), qi(1)], vec![qi(1), qi(0)]]);
            }
            other => panic!("{other:?}"),
        }
        let mut lp = LinearProgram::new(2, vec![qi(2), qi(1)]);
        lp.add(vec![qi(1), qi(1)], Op::Le, qi(1));
        match lp.optimal_vertices(100) {
            VertexEnumeration::Complete(v) => assert_eq!(v, vec![vec![qi(1), qi(0)]]),
            other => panic!("{other:?}"),
        }
    }
}
