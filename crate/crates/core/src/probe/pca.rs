//! Principal-component projection of hidden-state summaries.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub dims: usize,
    /// `rows x dims` projected coordinates.
    pub coords: Vec<f64>,
    /// `dims x features` unit principal directions.
    pub components: Vec<f64>,
    /// Variance captured by each component (`n - 1` denominator).
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
}

/// Projects `rows x cols` data onto its top `dims` principal components.
///
/// Each component's sign is fixed so its largest-magnitude loading is positive.
pub fn pca_project(data: &[f64], rows: usize, cols: usize, dims: usize) -> Result<Pca> {
    if rows < 3 {
        return Err(Error::Analysis(format!("PCA needs at least 3 samples, got {rows}")));
    }
    if data.len() != rows * cols || dims == 0 || dims > cols {
        return Err(Error::Shape(format!("PCA of {rows}x{cols} data into {dims} dims")));
    }
    let mut x = DMatrix::from_row_slice(rows, cols, data);
    for j in 0..cols {
        let m = x.column(j).mean();
        x.column_mut(j).add_scalar_mut(-m);
    }
    let denom = (rows - 1) as f64;
    let total_variance = x.iter().map(|v| v * v).sum::<f64>() / denom;
    if total_variance <= 1e-24 {
        return Err(Error::Analysis("PCA of rank-0 data".into()));
    }
    let svd = x.clone().svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Analysis("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut components = Vec::with_capacity(dims * cols);
    let mut explained = Vec::with_capacity(dims);
    for &k in order.iter().take(dims) {
        let mut row: Vec<f64> = vt.row(k).iter().copied().collect();
        let pivot = row.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
        if pivot < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        components.extend(row);
        explained.push(svd.singular_values[k].powi(2) / denom);
    }
    // Fewer singular values than requested dims when rows < cols.
    while explained.len() < dims {
        components.extend(std::iter::repeat_n(0.0, cols));
        explained.push(0.0);
    }
    let mut coords = vec![0.0; rows * dims];
    for i in 0..rows {
        for d in 0..dims {
            coords[i * dims + d] = (0..cols).map(|j| x[(i, j)] * components[d * cols + j]).sum();
        }
    }
    Ok(Pca { dims, coords, components, explained_variance: explained, total_variance })
}
