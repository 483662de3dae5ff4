//! Numerical kernels behind the distribution-matching quantifiers.
//!
//! Everything here is generic over [`Scalar`] and works on small dense
//! problems (a handful of classes, at most a few thousand rows).

use crate::simplex::PrevalenceEstimate;
use crate::{Error, Result, Scalar};

/// A linear mixture system `design * theta ~ target`.
///
/// `design` is stored row-major with `rows` rows (bins, cells, features of
/// the representation) and `classes` columns (one class-conditional
/// representation per class).
#[derive(Debug, Clone, PartialEq)]
pub struct MatchSystem<T> {
    rows: usize,
    classes: usize,
    design: Vec<T>,
    target: Vec<T>,
}

impl<T: Scalar> MatchSystem<T> {
    /// Builds a system from per-class columns of equal length.
    pub fn from_columns(columns: &[Vec<T>], target: Vec<T>) -> Result<Self> {
        let classes = columns.len();
        if classes == 0 {
            return Err(Error::InvalidArgument("system without classes".into()));
        }
        let rows = target.len();
        if rows == 0 {
            return Err(Error::InvalidArgument("system without rows".into()));
        }
        let mut design = vec![T::zero(); rows * classes];
        for (j, col) in columns.iter().enumerate() {
            if col.len() != rows {
                return Err(Error::LengthMismatch { expected: rows, got: col.len() });
            }
            for (i, &v) in col.iter().enumerate() {
                design[i * classes + j] = v;
            }
        }
        let system = Self { rows, classes, design, target };
        system.check_finite()?;
        Ok(system)
    }

    fn check_finite(&self) -> Result<()> {
        if self.design.iter().chain(&self.target).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("match system"));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn target(&self) -> &[T] {
        &self.target
    }

    pub fn entry(&self, row: usize, class: usize) -> T {
        self.design[row * self.classes + class]
    }

    pub fn column(&self, class: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.entry(i, class)).collect()
    }

    /// `design * theta`.
    pub fn mix(&self, theta: &[T]) -> Vec<T> {
        (0..self.rows).map(|i| (0..self.classes).map(|j| self.entry(i, j) * theta[j]).sum()).collect()
    }

    /// Normal-equation terms `(A^T A, A^T b)`.
    fn normal_equations(&self) -> (Vec<Vec<T>>, Vec<T>) {
        let l = self.classes;
        let mut gram = vec![vec![T::zero(); l]; l];
        let mut rhs = vec![T::zero(); l];
        for i in 0..self.rows {
            let row = &self.design[i * l..(i + 1) * l];
            for a in 0..l {
                rhs[a] = rhs[a] + row[a] * self.target[i];
                for b in 0..l {
                    gram[a][b] = gram[a][b] + row[a] * row[b];
                }
            }
        }
        (gram, rhs)
    }
}

/// Result of a simplex-constrained solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution<T> {
    pub estimate: PrevalenceEstimate<T>,
    /// The objective was flat along some feasible direction; the returned
    /// point is the minimum-norm minimiser.
    pub degenerate: bool,
}

/// `argmin_{theta in simplex} |design * theta - target|^2`.
pub fn solve_simplex_least_squares<T: Scalar>(system: &MatchSystem<T>) -> Result<SimplexSolution<T>> {
    system.check_finite()?;
    let (gram, rhs) = system.normal_equations();
    minimize_simplex_quadratic(&gram, &rhs)
}

/// `argmin_{theta in simplex} 1/2 theta^T Q theta - c^T theta` for `Q`
/// positive semidefinite on the simplex's tangent space.
///
/// Primal active-set method on the exact KKT systems. A ridge of relative
/// size `1e-12` selects the minimum-norm minimiser when `Q` is singular
/// along the simplex.
pub fn minimize_simplex_quadratic<T: Scalar>(q: &[Vec<T>], c: &[T]) -> Result<SimplexSolution<T>> {
    let n = c.len();
    if n == 0 || q.len() != n || q.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument("quadratic program shape".into()));
    }
    if q.iter().flatten().chain(c).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("quadratic program"));
    }
    if n == 1 {
        return Ok(SimplexSolution { estimate: PrevalenceEstimate::vertex(1, 0), degenerate: false });
    }
    let scale = q.iter().flatten().chain(c).fold(T::zero(), |m, v| m.max(v.abs())).max(T::of(1e-300));
    let degenerate = tangent_curvature_degenerate(q, scale);
    let ridge = scale * T::of(1e-12);
    let mut qr: Vec<Vec<T>> = q.to_vec();
    for (i, row) in qr.iter_mut().enumerate() {
        row[i] = row[i] + ridge;
    }
    let tol = scale * T::of(1e-13).max(T::epsilon() * T::of(64.0));

    let mut theta = vec![T::one() / T::of(n as f64); n];
    let mut free = vec![true; n];
    for _ in 0..(20 * n + 100) {
        let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        let (x, nu) = solve_free_kkt(&qr, c, &idx).ok_or(Error::NonFinite("singular KKT system"))?;
        let mut y = vec![T::zero(); n];
        for (k, &i) in idx.iter().enumerate() {
            y[i] = x[k];
        }
        let feasible = idx.iter().all(|&i| y[i] >= T::zero());
        if feasible {
            theta = y;
            // Multipliers of the bound constraints currently held at zero.
            let mut worst: Option<(usize, T)> = None;
            for i in (0..n).filter(|&i| !free[i]) {
                let grad: T = (0..n).map(|j| qr[i][j] * theta[j]).sum::<T>() - c[i];
                let lambda = grad - nu;
                if lambda < -tol && worst.is_none_or(|(_, w)| lambda < w) {
                    worst = Some((i, lambda));
                }
            }
            match worst {
                None => break,
                Some((i, _)) => free[i] = true,
            }
        } else {
            // Step towards y until the first free coordinate hits zero.
            let mut step = T::one();
            let mut blocking = Vec::new();
            for &i in &idx {
                if y[i] < T::zero() {
                    let denom = theta[i] - y[i];
                    let ratio = if denom > T::zero() { theta[i] / denom } else { T::zero() };
                    if ratio < step {
                        step = ratio;
                        blocking.clear();
                        blocking.push(i);
                    } else if ratio == step {
                        blocking.push(i);
                    }
                }
            }
            for i in 0..n {
                theta[i] = theta[i] + step * (y[i] - theta[i]);
            }
            for i in blocking {
                free[i] = false;
                theta[i] = T::zero();
            }
        }
    }
    let estimate = finalize(theta)?;
    Ok(SimplexSolution { estimate, degenerate })
}

fn finalize<T: Scalar>(theta: Vec<T>) -> Result<PrevalenceEstimate<T>> {
    let clipped: Vec<T> = theta.into_iter().map(|v| v.max(T::zero())).collect();
    let sum: T = clipped.iter().copied().sum();
    if sum <= T::zero() || !sum.is_finite() {
        return Err(Error::NonFinite("simplex solution"));
    }
    PrevalenceEstimate::new(clipped.into_iter().map(|v| v / sum).collect())
}

/// KKT system on the free set: `[Q_FF -1; 1^T 0] [x; nu] = [c_F; 1]`.
fn solve_free_kkt<T: Scalar>(q: &[Vec<T>], c: &[T], idx: &[usize]) -> Option<(Vec<T>, T)> {
    let m = idx.len();
    let mut a = vec![vec![T::zero(); m + 1]; m + 1];
    let mut b = vec![T::zero(); m + 1];
    for (r, &i) in idx.iter().enumerate() {
        for (s, &j) in idx.iter().enumerate() {
            a[r][s] = q[i][j];
        }
        a[r][m] = -T::one();
        a[m][r] = T::one();
        b[r] = c[i];
    }
    b[m] = T::one();
    let mut sol = solve_linear(a, b)?;
    let nu = sol.pop()?;
    Some((sol, nu))
}

/// Whether `Q` is (numerically) singular on `{d : sum d = 0}`.
fn tangent_curvature_degenerate<T: Scalar>(q: &[Vec<T>], scale: T) -> bool {
    // Basis of the tangent space: e_i - e_{n-1}. Reduced Hessian B^T Q B.
    let n = q.len();
    let m = n - 1;
    let last = n - 1;
    let mut reduced = vec![vec![T::zero(); m]; m];
    for a in 0..m {
        for b in 0..m {
            reduced[a][b] = q[a][b] - q[a][last] - q[last][b] + q[last][last];
        }
    }
    let pivots = elimination_pivots(reduced);
    pivots.iter().any(|p| p.abs() <= scale * T::of(1e-10))
}

fn elimination_pivots<T: Scalar>(mut a: Vec<Vec<T>>) -> Vec<T> {
    let n = a.len();
    let mut pivots = Vec::with_capacity(n);
    for col in 0..n {
        let p =
            (col..n).max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).expect("finite")).expect("nonempty");
        a.swap(col, p);
        let pivot = a[col][col];
        pivots.push(pivot);
        if pivot == T::zero() {
            continue;
        }
        for r in col + 1..n {
            let f = a[r][col] / pivot;
            for k in col..n {
                a[r][k] = a[r][k] - f * a[col][k];
            }
        }
    }
    pivots
}

/// Gaussian elimination with partial pivoting. `None` when singular.
pub fn solve_linear<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() {
        return None;
    }
    for col in 0..n {
        let p = (col..n).max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).expect("finite"))?;
        if a[p][col].abs() <= scale * T::epsilon() {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                a[r][k] = a[r][k] - f * a[col][k];
            }
            b[r] = b[r] - f * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let s: T = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Unconstrained least squares `argmin |design * theta - target|^2`.
///
/// Rank-deficient systems get a ridge of relative size `1e-10`, which
/// approximates the minimum-norm solution.
pub fn least_squares<T: Scalar>(system: &MatchSystem<T>) -> Result<Vec<T>> {
    system.check_finite()?;
    let (mut gram, rhs) = system.normal_equations();
    let l = gram.len();
    let trace: T = (0..l).map(|i| gram[i][i]).sum();
    let ridge = (trace / T::of(l as f64)).max(T::of(1e-30)) * T::of(1e-10);
    for (i, row) in gram.iter_mut().enumerate() {
        row[i] = row[i] + ridge;
    }
    solve_linear(gram, rhs).ok_or(Error::NonFinite("least-squares normal equations"))
}

/// Ternary search for the minimiser of a unimodal function on `[lo, hi]`.
pub fn ternary_search<T: Scalar>(mut f: impl FnMut(T) -> T, mut lo: T, mut hi: T, iterations: usize) -> T {
    let three = T::of(3.0);
    for _ in 0..iterations {
        let m1 = lo + (hi - lo) / three;
        let m2 = hi - (hi - lo) / three;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    (lo + hi) / T::of(2.0)
}

/// Minimises a convex function over the simplex by exact line searches
/// along pairwise mass transfers `theta_i <-> theta_j`.
///
/// `start` defaults to the uniform distribution. Stops once a full sweep
/// improves the objective by less than `tolerance` or after `max_sweeps`.
pub fn minimize_on_simplex<T: Scalar>(
    f: impl Fn(&[T]) -> T,
    dim: usize,
    start: Option<Vec<T>>,
    tolerance: T,
    max_sweeps: usize,
) -> Result<PrevalenceEstimate<T>> {
    if dim == 0 {
        return Err(Error::InvalidArgument("zero-dimensional simplex".into()));
    }
    let mut theta = match start {
        Some(s) if s.len() == dim => s,
        Some(s) => return Err(Error::LengthMismatch { expected: dim, got: s.len() }),
        None => vec![T::one() / T::of(dim as f64); dim],
    };
    let mut current = f(&theta);
    if !current.is_finite() {
        return Err(Error::NonFinite("simplex objective"));
    }
    let mut trial = theta.clone();
    for _ in 0..max_sweeps {
        let before = current;
        for i in 0..dim {
            for j in i + 1..dim {
                let mass = theta[i] + theta[j];
                if mass <= T::zero() {
                    continue;
                }
                trial.copy_from_slice(&theta);
                let mut along = |t: T| {
                    trial[i] = t * mass;
                    trial[j] = mass - t * mass;
                    f(&trial)
                };
                let t = ternary_search(&mut along, T::zero(), T::one(), 90);
                let value = along(t);
                if value < current {
                    current = value;
                    theta[i] = t * mass;
                    theta[j] = mass - t * mass;
                }
            }
        }
        if before - current <= tolerance {
            break;
        }
    }
    finalize(theta)
}
