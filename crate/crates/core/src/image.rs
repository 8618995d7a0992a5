//! Scalar image container.
//!
//! Pixels are stored column-major: the flat index of `(row, col)` in an
//! `M x N` image is `col * M + row`. Every other module relies on this
//! layout, so conversions go through [`PixelIndex`] or the accessors here.

use crate::error::{Error, Result};

/// Lower end of the intensity range.
pub const U_MIN: f64 = 0.0;
/// Upper end of the intensity range.
pub const U_MAX: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelIndex {
    pub row: usize,
    pub col: usize,
    pub flat: usize,
}

impl PixelIndex {
    pub fn new(row: usize, col: usize, rows: usize) -> Self {
        Self {
            row,
            col,
            flat: col * rows + row,
        }
    }

    pub fn from_flat(flat: usize, rows: usize) -> Self {
        Self {
            row: flat % rows,
            col: flat / rows,
            flat,
        }
    }
}

/// An `M x N` real-valued image stored as a column-stacked vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    /// Wraps an already column-stacked vector.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimensions { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected_rows: rows,
                expected_cols: cols,
                rows: data.len(),
                cols: 1,
            });
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    /// Stacks a row-major 2D matrix into column-major layout.
    pub fn stack(matrix: &[Vec<f64>]) -> Result<Self> {
        let rows = matrix.len();
        let cols = matrix.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimensions { rows, cols });
        }
        let mut data = vec![0.0; rows * cols];
        for (r, line) in matrix.iter().enumerate() {
            if line.len() != cols {
                return Err(Error::ShapeMismatch {
                    expected_rows: rows,
                    expected_cols: cols,
                    rows,
                    cols: line.len(),
                });
            }
            for (c, &value) in line.iter().enumerate() {
                let flat = c * rows + r;
                if !value.is_finite() {
                    return Err(Error::NonFinite { index: flat, value });
                }
                data[flat] = value;
            }
        }
        Ok(Self { rows, cols, data })
    }

    /// Inverse of [`ImageGrid::stack`].
    pub fn unstack(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c)).collect())
            .collect()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.rows + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[col * self.rows + row] = value;
    }

    pub fn same_shape(&self, other: &ImageGrid) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected_rows: self.rows,
                expected_cols: self.cols,
                rows: other.rows,
                cols: other.cols,
            })
        }
    }

    /// Builds an image of the same shape from a new flat vector.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.rows, self.cols, data)
    }

    pub fn is_unit_range(&self) -> bool {
        self.data.iter().all(|&v| (U_MIN..=U_MAX).contains(&v))
    }

    pub fn ensure_unit_range(&self) -> Result<()> {
        match self
            .data
            .iter()
            .position(|&v| !(U_MIN..=U_MAX).contains(&v))
        {
            None => Ok(()),
            Some(i) => Err(Error::InvalidParameter(format!(
                "pixel {i} = {} outside [0, 1]",
                self.data[i]
            ))),
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Centered crop of at most `rows x cols`; dimensions smaller than the
    /// request are kept whole.
    pub fn center_crop(&self, rows: usize, cols: usize) -> ImageGrid {
        let h = rows.min(self.rows);
        let w = cols.min(self.cols);
        let r0 = (self.rows - h) / 2;
        let c0 = (self.cols - w) / 2;
        let mut data = Vec::with_capacity(h * w);
        for c in 0..w {
            let start = (c0 + c) * self.rows + r0;
            data.extend_from_slice(&self.data[start..start + h]);
        }
        ImageGrid {
            rows: h,
            cols: w,
            data,
        }
    }

    /// 3x3 median filter with replicated borders.
    pub fn median3x3(&self) -> ImageGrid {
        let (m, n) = self.shape();
        let mut out = vec![0.0; m * n];
        let mut window = [0.0f64; 9];
        for c in 0..n {
            for r in 0..m {
                let mut k = 0;
                for dc in [-1isize, 0, 1] {
                    for dr in [-1isize, 0, 1] {
                        let rr = (r as isize + dr).clamp(0, m as isize - 1) as usize;
                        let cc = (c as isize + dc).clamp(0, n as isize - 1) as usize;
                        window[k] = self.get(rr, cc);
                        k += 1;
                    }
                }
                window.sort_by(f64::total_cmp);
                out[c * m + r] = window[4];
            }
        }
        ImageGrid {
            rows: m,
            cols: n,
            data: out,
        }
    }
}

/// Projection onto the box `[0, 1]` applied entrywise.
pub fn clip01(g: &ImageGrid) -> ImageGrid {
    ImageGrid {
        rows: g.rows,
        cols: g.cols,
        data: g.data.iter().map(|&v| clip_unit(v)).collect(),
    }
}

#[inline]
pub fn clip_unit(v: f64) -> f64 {
    v.clamp(U_MIN, U_MAX)
}
