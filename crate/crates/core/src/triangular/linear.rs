use nalgebra::{DMatrix, DVector};

use super::TriangularError;

/// Block upper-triangular form of a linear system `A z = b`.
///
/// With `k` equations, `m` free directions and `p = k - m - 1`, the columns
/// (after the permutation in [`Self::columns`]) split as `[y | x | u]` with
/// widths `p`, `m + 1`, `m`:
///
/// ```text
/// [ A11 A12 A13 ] [y]   [b1]
/// [  0  A22 A23 ] [x] = [b2]
///                 [u]
/// ```
///
/// `A11` and `A22` are upper triangular with nonzero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTriangularForm {
    pub a11: DMatrix<f64>,
    pub a12: DMatrix<f64>,
    pub a13: DMatrix<f64>,
    pub a22: DMatrix<f64>,
    pub a23: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub b2: DVector<f64>,
    /// `columns[i]` is the original column index of block position `i`.
    pub columns: Vec<usize>,
}

impl LinearTriangularForm {
    pub fn y_dim(&self) -> usize {
        self.a11.nrows()
    }

    pub fn x_dim(&self) -> usize {
        self.a22.nrows()
    }

    pub fn u_dim(&self) -> usize {
        self.a23.ncols()
    }

    /// Solves `[A22 A23][x; u] = b2` for `x` given `u`.
    pub fn solve_x(&self, u: &DVector<f64>) -> DVector<f64> {
        let rhs = &self.b2 - &self.a23 * u;
        self.a22.solve_upper_triangular(&rhs).expect("A22 has nonzero diagonal")
    }

    /// Back-substitutes for `y` given a point `(x, u)` of the reduced space.
    pub fn recover_y(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let rhs = &self.b1 - &self.a12 * x - &self.a13 * u;
        self.a11.solve_upper_triangular(&rhs).expect("A11 has nonzero diagonal")
    }

    /// Scatters `[y; x; u]` back into the original column order.
    pub fn assemble(&self, y: &DVector<f64>, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut z = DVector::zeros(self.columns.len());
        let blocks = y.iter().chain(x.iter()).chain(u.iter());
        for (&col, &v) in self.columns.iter().zip(blocks) {
            z[col] = v;
        }
        z
    }

    /// Gathers `(y, x, u)` from a point in the original column order.
    pub fn split(&self, z: &DVector<f64>) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let perm: Vec<f64> = self.columns.iter().map(|&c| z[c]).collect();
        let (p, q) = (self.y_dim(), self.x_dim());
        (
            DVector::from_column_slice(&perm[..p]),
            DVector::from_column_slice(&perm[p..p + q]),
            DVector::from_column_slice(&perm[p + q..]),
        )
    }

    /// Two-stage solve: `x` from the reduced block, then `y` by
    /// back-substitution.
    pub fn solve(&self, u: &DVector<f64>) -> DVector<f64> {
        let x = self.solve_x(u);
        let y = self.recover_y(&x, u);
        self.assemble(&y, &x, u)
    }
}

fn numerical_rank(a: &DMatrix<f64>) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let cutoff = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Picks `k` linearly independent columns by greedy Gram-Schmidt pivoting.
fn pivot_columns(a: &DMatrix<f64>, k: usize) -> Vec<usize> {
    let mut work = a.clone();
    let mut chosen = Vec::with_capacity(k);
    for _ in 0..k {
        let best = (0..work.ncols())
            .filter(|c| !chosen.contains(c))
            .max_by(|&i, &j| work.column(i).norm().total_cmp(&work.column(j).norm()))
            .expect("enough columns");
        let q = work.column(best).normalize();
        for c in 0..work.ncols() {
            let proj = q.dot(&work.column(c));
            let mut col = work.column_mut(c);
            col.axpy(-proj, &q, 1.0);
        }
        chosen.push(best);
    }
    chosen.sort_unstable();
    chosen
}

/// Brings a full-row-rank `k x (m+k)` system into block triangular form.
pub fn linear_whitney(a: &DMatrix<f64>, b: &DVector<f64>, m: usize) -> Result<LinearTriangularForm, TriangularError> {
    let k = a.nrows();
    if a.ncols() != m + k {
        return Err(TriangularError::LinearPrecondition(format!(
            "A is {k}x{}, expected {k}x{}",
            a.ncols(),
            m + k
        )));
    }
    if b.len() != k {
        return Err(TriangularError::LinearPrecondition(format!(
            "b has length {}, expected {k}",
            b.len()
        )));
    }
    if k <= m + 1 {
        return Err(TriangularError::LinearPrecondition(format!(
            "need k > m + 1, got k = {k}, m = {m}"
        )));
    }
    let rank = numerical_rank(a);
    if rank < k {
        return Err(TriangularError::RankDeficient { rank, needed: k });
    }

    let leading: Vec<usize> = if numerical_rank(&a.columns(0, k).into_owned()) == k {
        (0..k).collect()
    } else {
        pivot_columns(a, k)
    };
    let mut columns = leading.clone();
    columns.extend((0..m + k).filter(|c| !leading.contains(c)));
    let permuted = DMatrix::from_fn(k, m + k, |i, j| a[(i, columns[j])]);

    let qr = permuted.columns(0, k).into_owned().qr();
    let qt = qr.q().transpose();
    let t = &qt * &permuted;
    let bt = &qt * b;
    let p = k - m - 1;
    let mut t = t;
    // Entries below the diagonal of the leading block are rounding noise.
    for j in 0..k {
        for i in j + 1..k {
            t[(i, j)] = 0.0;
        }
    }

    Ok(LinearTriangularForm {
        a11: t.view((0, 0), (p, p)).into_owned(),
        a12: t.view((0, p), (p, m + 1)).into_owned(),
        a13: t.view((0, k), (p, m)).into_owned(),
        a22: t.view((p, p), (m + 1, m + 1)).into_owned(),
        a23: t.view((p, k), (m + 1, m)).into_owned(),
        b1: bt.rows(0, p).into_owned(),
        b2: bt.rows(p, m + 1).into_owned(),
        columns,
    })
}
