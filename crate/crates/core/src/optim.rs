//! Interior-point maximizer for grouped, masked likelihood problems.
//!
//! A model assigns every block to a group; each group carries a vector of
//! Pauli components, some tied to variables shared across groups. The
//! likelihood is concave in the components and the physical region is
//! convex (Bloch ball, or positive definite cone for two qubits), so a
//! log-barrier Newton ascent with a decreasing barrier weight converges
//! to the constrained maximum.

use crate::linalg::CMatrix;
use crate::scalar::Real;

/// One multinomial likelihood term: the outcomes of a pooled setting
/// within a group. `signs` maps component indices of the group vector to
/// the outcome's sign pattern; the outcome probability is
/// `(1 + sum_j s_j v_j) * dim_factor`.
#[derive(Clone, Debug)]
pub(crate) struct LikelihoodTerm<T> {
    pub outcomes: Vec<(Vec<(usize, T)>, T)>,
    pub dim_factor: T,
}

/// Constraint geometry of one group's component vector.
#[derive(Clone, Debug)]
pub(crate) enum GroupBarrier<T> {
    /// `||v|| < 1` in any dimension (used for the 3-component Bloch ball).
    Ball,
    /// `rho(v) = (I + sum_c v_c P_c) / dim` positive definite.
    Psd { paulis: Vec<CMatrix<T>>, dim: usize },
}

#[derive(Clone, Debug)]
pub(crate) struct GroupProblem<T> {
    /// Global variable index backing each component of this group.
    pub var_of_comp: Vec<usize>,
    pub terms: Vec<LikelihoodTerm<T>>,
    pub barrier: GroupBarrier<T>,
}

#[derive(Clone, Debug)]
pub(crate) struct MaskProblem<T> {
    pub n_vars: usize,
    pub groups: Vec<GroupProblem<T>>,
}

#[derive(Clone, Debug)]
pub(crate) struct MaskSolution<T> {
    pub values: Vec<T>,
    pub converged: bool,
}

impl<T: Real> GroupProblem<T> {
    fn components(&self, vars: &[T]) -> Vec<T> {
        self.var_of_comp.iter().map(|&i| vars[i]).collect()
    }

    fn density(&self, v: &[T]) -> Option<CMatrix<T>> {
        match &self.barrier {
            GroupBarrier::Ball => None,
            GroupBarrier::Psd { paulis, dim } => {
                let mut mat = CMatrix::identity(*dim);
                for (value, pauli) in v.iter().zip(paulis) {
                    mat = mat.add(&pauli.scale(*value));
                }
                Some(mat.scale(T::one() / T::from_usize(*dim).unwrap()))
            }
        }
    }

    fn feasible(&self, vars: &[T]) -> bool {
        let v = self.components(vars);
        match &self.barrier {
            GroupBarrier::Ball => {
                let norm_sq: T = v.iter().map(|&x| x * x).sum();
                norm_sq < T::one()
            }
            GroupBarrier::Psd { .. } => self
                .density(&v)
                .map(|rho| rho.is_positive_definite())
                .unwrap_or(false),
        }
    }

    fn barrier_value(&self, vars: &[T]) -> T {
        let v = self.components(vars);
        match &self.barrier {
            GroupBarrier::Ball => {
                let norm_sq: T = v.iter().map(|&x| x * x).sum();
                (T::one() - norm_sq).ln()
            }
            GroupBarrier::Psd { .. } => self
                .density(&v)
                .and_then(|rho| rho.ln_det_pd())
                .unwrap_or_else(T::neg_infinity),
        }
    }

    fn ln_likelihood(&self, vars: &[T]) -> T {
        let v = self.components(vars);
        let mut total = T::zero();
        for term in &self.terms {
            for (signs, count) in &term.outcomes {
                if *count == T::zero() {
                    continue;
                }
                let mut q = T::one();
                for &(comp, sign) in signs {
                    q += sign * v[comp];
                }
                let p = q * term.dim_factor;
                if p <= T::zero() {
                    return T::neg_infinity();
                }
                total += *count * p.ln();
            }
        }
        total
    }

    /// Adds this group's gradient and Hessian of `lnL + mu * barrier`
    /// into the global arrays.
    fn accumulate(&self, vars: &[T], mu: T, grad: &mut [T], hess: &mut [Vec<T>]) {
        let v = self.components(vars);
        for term in &self.terms {
            for (signs, count) in &term.outcomes {
                if *count == T::zero() {
                    continue;
                }
                let mut q = T::one();
                for &(comp, sign) in signs {
                    q += sign * v[comp];
                }
                for &(ci, si) in signs {
                    let vi = self.var_of_comp[ci];
                    grad[vi] += *count * si / q;
                    for &(cj, sj) in signs {
                        let vj = self.var_of_comp[cj];
                        hess[vi][vj] -= *count * si * sj / (q * q);
                    }
                }
            }
        }
        match &self.barrier {
            GroupBarrier::Ball => {
                let norm_sq: T = v.iter().map(|&x| x * x).sum();
                let c = T::one() - norm_sq;
                let two = T::of(2.0);
                let four = T::of(4.0);
                for (ci, &vi_val) in v.iter().enumerate() {
                    let vi = self.var_of_comp[ci];
                    grad[vi] -= mu * two * vi_val / c;
                    for (cj, &vj_val) in v.iter().enumerate() {
                        let vj = self.var_of_comp[cj];
                        let mut h = -four * vi_val * vj_val / (c * c);
                        if ci == cj {
                            h -= two / c;
                        }
                        hess[vi][vj] += mu * h;
                    }
                }
            }
            GroupBarrier::Psd { paulis, dim } => {
                let rho = self.density(&v).expect("psd barrier has a density");
                let inv = rho
                    .inverse()
                    .expect("feasible density matrix is invertible");
                let dim_t = T::from_usize(*dim).unwrap();
                let products: Vec<CMatrix<T>> =
                    paulis.iter().map(|p| inv.matmul(p)).collect();
                for (ci, prod_i) in products.iter().enumerate() {
                    let vi = self.var_of_comp[ci];
                    grad[vi] += mu * prod_i.trace().re / dim_t;
                    for (cj, prod_j) in products.iter().enumerate() {
                        let vj = self.var_of_comp[cj];
                        let h = -prod_i.trace_product_re(prod_j) / (dim_t * dim_t);
                        hess[vi][vj] += mu * h;
                    }
                }
            }
        }
    }
}

impl<T: Real> MaskProblem<T> {
    fn feasible(&self, vars: &[T]) -> bool {
        self.groups.iter().all(|g| g.feasible(vars))
    }

    #[cfg(test)]
    pub(crate) fn ln_likelihood(&self, vars: &[T]) -> T {
        self.groups.iter().map(|g| g.ln_likelihood(vars)).sum()
    }

    fn objective(&self, vars: &[T], mu: T) -> T {
        let mut total = T::zero();
        for g in &self.groups {
            let ll = g.ln_likelihood(vars);
            if ll == T::neg_infinity() {
                return T::neg_infinity();
            }
            total += ll + mu * g.barrier_value(vars);
        }
        total
    }

    fn total_count(&self) -> T {
        let mut total = T::zero();
        for g in &self.groups {
            for term in &g.terms {
                for (_, count) in &term.outcomes {
                    total += *count;
                }
            }
        }
        total
    }
}

/// Newton ascent with backtracking for one barrier weight. Returns whether
/// the iteration settled (step size below tolerance) rather than stalling.
///
/// Near the optimum the objective is flat to within its floating-point
/// resolution while the gradient is still computed accurately, so progress
/// is judged by the Newton step length and steps are accepted down to the
/// objective's noise floor.
fn newton_stage<T: Real>(problem: &MaskProblem<T>, vars: &mut Vec<T>, mu: T) -> bool {
    let n = problem.n_vars;
    let step_tol = T::opt_tol() * T::of(0.01);
    for _ in 0..100 {
        let mut grad = vec![T::zero(); n];
        let mut hess = vec![vec![T::zero(); n]; n];
        for g in &problem.groups {
            g.accumulate(vars, mu, &mut grad, &mut hess);
        }
        let f = problem.objective(vars, mu);
        let grad_scale = grad.iter().map(|g| g.abs()).fold(T::zero(), T::max);
        // Curvature spans the count scale down to the barrier scale, so
        // equilibrate symmetrically before solving or the small rows
        // drown in the large ones.
        let d: Vec<T> = (0..n)
            .map(|i| {
                let h = hess[i][i].abs().sqrt();
                if h > T::zero() {
                    h
                } else {
                    T::one()
                }
            })
            .collect();
        let scaled_hess: Vec<Vec<T>> = (0..n)
            .map(|i| (0..n).map(|j| hess[i][j] / (d[i] * d[j])).collect())
            .collect();
        let scaled_neg_grad: Vec<T> = (0..n).map(|i| -grad[i] / d[i]).collect();
        let mut direction: Vec<T> = match solve_linear(scaled_hess, scaled_neg_grad) {
            Some(y) => y.iter().zip(&d).map(|(&y, &di)| y / di).collect(),
            None => grad.iter().map(|&g| g / (T::one() + grad_scale)).collect(),
        };
        let mut slope: T = grad.iter().zip(&direction).map(|(&g, &d)| g * d).sum();
        if slope <= T::zero() {
            // Not an ascent direction (indefinite Hessian); fall back.
            direction = grad.iter().map(|&g| g / (T::one() + grad_scale)).collect();
            slope = grad.iter().map(|&g| g * g).sum::<T>() / (T::one() + grad_scale);
        }
        let step_norm = direction.iter().map(|d| d.abs()).fold(T::zero(), T::max);
        if step_norm <= step_tol {
            return true;
        }
        let noise = T::epsilon() * (T::one() + f.abs()) * T::of(100.0);
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..70 {
            let trial: Vec<T> = vars
                .iter()
                .zip(&direction)
                .map(|(&v, &d)| v + t * d)
                .collect();
            if problem.feasible(&trial) {
                let trial_f = problem.objective(&trial, mu);
                let tiny_move = t * step_norm <= T::of(1e-4);
                if trial_f > f + T::of(0.25) * t * slope || (tiny_move && trial_f >= f - noise) {
                    *vars = trial;
                    accepted = true;
                    break;
                }
            }
            t *= T::of(0.5);
        }
        if !accepted {
            #[cfg(feature = "optim-trace")]
            eprintln!("stage mu={mu:?}: line search failed, step_norm={step_norm:?}");
            return step_norm <= step_tol * T::of(1e3);
        }
    }
    #[cfg(feature = "optim-trace")]
    eprintln!("stage mu={mu:?}: iteration cap hit");
    false
}

/// Maximizes the constrained likelihood by decreasing the barrier weight
/// geometrically from the data scale down to [`Real::barrier_mu_min`].
pub(crate) fn maximize<T: Real>(problem: &MaskProblem<T>) -> MaskSolution<T> {
    let mut vars = vec![T::zero(); problem.n_vars];
    debug_assert!(problem.feasible(&vars));
    let mut mu = (problem.total_count() * T::of(0.1)).max(T::one());
    let mu_min = T::barrier_mu_min();
    let converged = loop {
        let settled = newton_stage(problem, &mut vars, mu);
        if mu <= mu_min {
            break settled;
        }
        mu = (mu * T::of(0.2)).max(mu_min);
    };
    MaskSolution {
        values: vars,
        converged,
    }
}

/// Dense Gaussian elimination with partial pivoting.
fn solve_linear<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    let scale = a
        .iter()
        .flatten()
        .map(|x| x.abs())
        .fold(T::zero(), T::max)
        .max(T::one());
    for col in 0..n {
        let mut pivot = col;
        let mut best = a[col][col].abs();
        for (r, row) in a.iter().enumerate().skip(col + 1) {
            if row[col].abs() > best {
                best = row[col].abs();
                pivot = r;
            }
        }
        if best <= T::epsilon() * scale * T::of(16.0) {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let pivot_row = a[col].clone();
        for r in col + 1..n {
            let f = a[r][col] / pivot_row[col];
            if f == T::zero() {
                continue;
            }
            for (x, &p) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            let scaled = f * b[col];
            b[r] -= scaled;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for c in row + 1..n {
            s -= a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}
