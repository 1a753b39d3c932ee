//! Moore-Penrose pseudo-inverse of a rank-deficient matrix.

use visuomotor::linalg::{pseudo_inverse, svd, DenseMatrix};

fn main() -> visuomotor::Result<()> {
    // Second row is twice the first, so the rank is 1.
    let a = DenseMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 0.0, 0.0])?;
    let s = svd(&a)?;
    println!("singular values: {:?}", s.singular_values);

    let ap = pseudo_inverse(&a, 0.0)?;
    println!("pseudo-inverse ({}x{}):", ap.rows(), ap.cols());
    for r in 0..ap.rows() {
        let row: Vec<String> = (0..ap.cols())
            .map(|c| format!("{:9.5}", ap[(r, c)]))
            .collect();
        println!("  {}", row.join(" "));
    }

    let residual = (a.as_matrix() * ap.as_matrix() * a.as_matrix() - a.as_matrix()).amax();
    println!("max |A A+ A - A| = {residual:.2e}");
    Ok(())
}
