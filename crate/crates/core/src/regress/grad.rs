use crate::error::{Error, Result};
use crate::linalg::{dot, norm, DenseMatrix, SparseMatrix};

/// Embedding norms below this make the cosine gradient undefined.
pub const COSINE_EPS: f64 = 1e-12;

/// `z = V x` for sparse row `i` of `x`.
pub fn embed_row(v: &DenseMatrix, x: &SparseMatrix, i: usize) -> Vec<f64> {
    (0..v.rows()).map(|r| x.row_dot(i, v.row(r))).collect()
}

/// Adds `scale · a bᵀ` into `out`, `b` being sparse row `j` of `x`.
fn add_outer(out: &mut DenseMatrix, scale: f64, a: &[f64], x: &SparseMatrix, j: usize) {
    for (r, &ar) in a.iter().enumerate() {
        let row = out.row_mut(r);
        for (f, xv) in x.row_entries(j) {
            row[f] += scale * ar * xv;
        }
    }
}

/// Gradient of `K_ij = ⟨V xᵢ, V xⱼ⟩` with respect to `V`:
/// `zᵢ xⱼᵀ + zⱼ xᵢᵀ`.
pub fn gradient_v_dot(v: &DenseMatrix, x: &SparseMatrix, i: usize, j: usize) -> DenseMatrix {
    let zi = embed_row(v, x, i);
    let zj = embed_row(v, x, j);
    let mut g = DenseMatrix::zeros(v.rows(), v.cols());
    add_outer(&mut g, 1.0, &zi, x, j);
    add_outer(&mut g, 1.0, &zj, x, i);
    g
}

/// Gradient of `K_ij = cos(V xᵢ, V xⱼ)` with respect to `V`. With
/// `a = zᵢᵀzⱼ`, `b = 1/‖zᵢ‖`, `c = 1/‖zⱼ‖`:
/// `−ab³c·zᵢxᵢᵀ − abc³·zⱼxⱼᵀ + bc(zᵢxⱼᵀ + zⱼxᵢᵀ)`.
pub fn gradient_v_cosine(
    v: &DenseMatrix,
    x: &SparseMatrix,
    i: usize,
    j: usize,
) -> Result<DenseMatrix> {
    let zi = embed_row(v, x, i);
    let zj = embed_row(v, x, j);
    let (ni, nj) = (norm(&zi), norm(&zj));
    if ni <= COSINE_EPS || nj <= COSINE_EPS {
        return Err(Error::DegenerateGradient(COSINE_EPS));
    }
    let a = dot(&zi, &zj);
    let (b, c) = (1.0 / ni, 1.0 / nj);
    let mut g = DenseMatrix::zeros(v.rows(), v.cols());
    add_outer(&mut g, -a * b.powi(3) * c, &zi, x, i);
    add_outer(&mut g, -a * b * c.powi(3), &zj, x, j);
    add_outer(&mut g, b * c, &zi, x, j);
    add_outer(&mut g, b * c, &zj, x, i);
    Ok(g)
}
