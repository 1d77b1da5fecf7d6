use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::fix_column_signs;

/// Classical (Torgerson) scaling of a distance matrix into `dims` coordinates.
///
/// Negative eigenvalues of `−½JD²J` are truncated at zero; missing dimensions
/// come back as zero columns.
pub fn classical_mds(distances: &DMatrix<f64>, dims: usize) -> Result<DMatrix<f64>> {
    let n = distances.nrows();
    if n != distances.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: distances.ncols(),
        });
    }
    if n == 0 {
        return Err(Error::Empty("distance matrix"));
    }
    let scale = distances.amax().max(1.0);
    for i in 0..n {
        if distances[(i, i)].abs() > 1e-10 * scale {
            return Err(Error::InvalidConfig("distance matrix has a non-zero diagonal".into()));
        }
        for j in 0..n {
            let d = distances[(i, j)];
            if !d.is_finite() || d < 0.0 {
                return Err(Error::InvalidConfig("distances must be finite and non-negative".into()));
            }
            if (d - distances[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::InvalidConfig("distance matrix is not symmetric".into()));
            }
        }
    }
    let sq = distances.map(|d| d * d);
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).mean()).collect();
    let grand = sq.mean();
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));
    let eig = SymmetricEigen::new((&b + b.transpose()) * 0.5);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let positive = order
        .iter()
        .filter(|&&i| eig.eigenvalues[i] > 1e-10 * top)
        .count();
    if dims > positive {
        warn!("only {positive} positive MDS dimensions; padding {} with zeros", dims - positive);
    }
    let mut vecs = DMatrix::zeros(n, dims.min(positive));
    for (c, &i) in order.iter().take(vecs.ncols()).enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    fix_column_signs(&mut vecs);
    let mut coords = DMatrix::zeros(n, dims);
    for (c, &i) in order.iter().take(vecs.ncols()).enumerate() {
        let s = eig.eigenvalues[i].max(0.0).sqrt();
        coords.set_column(c, &(vecs.column(c) * s));
    }
    Ok(coords)
}
