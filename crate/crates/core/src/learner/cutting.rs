//! Accumulated half-spaces queried at their Chebyshev center.
//!
//! The center of the largest ball inside `{θ : a_kᵀθ ≤ b_k} ∩ [−R, R]^N` is
//! one LP solve. Cuts are appended to the previous optimal basis, so each
//! step is a few dual simplex pivots.

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Solution, Variable};

use super::ellipsoid::CutResult;

pub struct ChebyshevLocalizer {
    problem: Problem,
    vars: Vec<Variable>,
    t: Variable,
    solution: Option<Solution>,
    cuts: Vec<(Vec<f64>, f64)>,
    center: Vec<f64>,
    radius: f64,
}

impl ChebyshevLocalizer {
    pub fn new(dim: usize, bound: f64) -> Self {
        let mut problem = Problem::new(OptimizationDirection::Maximize);
        let vars: Vec<Variable> = (0..dim).map(|_| problem.add_var(0.0, (-bound, bound))).collect();
        let t = problem.add_var(1.0, (f64::NEG_INFINITY, bound));
        for &v in &vars {
            for sign in [1.0, -1.0] {
                let mut e = LinearExpr::empty();
                e.add(v, sign);
                e.add(t, 1.0);
                problem.add_constraint(e, ComparisonOp::Le, bound);
            }
        }
        ChebyshevLocalizer {
            problem,
            vars,
            t,
            solution: None,
            cuts: Vec::new(),
            center: vec![0.0; dim],
            radius: bound,
        }
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// Radius of the largest inscribed ball.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn cut(&mut self, a: &[f64], b: f64) -> CutResult {
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return CutResult::Degenerate;
        }
        let ac: f64 = a.iter().zip(&self.center).map(|(p, q)| p * q).sum();
        let alpha = ((ac - b) / norm / self.radius.max(f64::MIN_POSITIVE)).clamp(0.0, 1.0);
        let row: Vec<f64> = a.iter().map(|v| v / norm).collect();
        let rhs = b / norm;
        self.cuts.push((row.clone(), rhs));
        let expr = self.expr(&row);
        let warm = self.solution.take().map(|s| s.add_constraint(expr, ComparisonOp::Le, rhs));
        let solved = match warm {
            Some(Ok(s)) => Ok(s),
            _ => self.resolve(),
        };
        match solved {
            Ok(sol) => {
                self.center = self.vars.iter().map(|&v| *sol.var_value(v)).collect();
                self.radius = *sol.var_value(self.t);
                self.solution = Some(sol);
                if self.radius <= 0.0 {
                    CutResult::Empty
                } else {
                    CutResult::Shrunk { alpha }
                }
            }
            Err(microlp::Error::Infeasible) => CutResult::Empty,
            Err(_) => CutResult::Degenerate,
        }
    }

    fn expr(&self, row: &[f64]) -> LinearExpr {
        let mut e = LinearExpr::empty();
        for (&v, &c) in self.vars.iter().zip(row) {
            if c != 0.0 {
                e.add(v, c);
            }
        }
        e.add(self.t, 1.0);
        e
    }

    fn resolve(&mut self) -> Result<Solution, microlp::Error> {
        let mut p = self.problem.clone();
        for (row, rhs) in &self.cuts {
            p.add_constraint(self.expr(row), ComparisonOp::Le, *rhs);
        }
        p.solve()
    }
}
