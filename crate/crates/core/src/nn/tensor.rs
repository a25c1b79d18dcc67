use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("shape mismatch in {op}: {left:?} vs {right:?}")]
pub struct ShapeError {
    pub op: &'static str,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl ShapeError {
    pub(crate) fn new(op: &'static str, left: &Tensor, right: &Tensor) -> Self {
        Self {
            op,
            left: left.shape().to_vec(),
            right: right.shape().to_vec(),
        }
    }
}

/// Row-major 2-D array of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, ShapeError> {
        if data.len() != rows * cols {
            return Err(ShapeError {
                op: "from_vec",
                left: vec![rows, cols],
                right: vec![data.len()],
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on a {:?} tensor", self.shape());
        self.data[0]
    }

    pub fn concat_cols(parts: &[&Tensor]) -> Tensor {
        let rows = parts.first().map_or(0, |t| t.rows);
        assert!(parts.iter().all(|t| t.rows == rows), "concat_cols row mismatch");
        let cols: usize = parts.iter().map(|t| t.cols).sum();
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut c0 = 0;
            for t in parts {
                out.data[r * cols + c0..r * cols + c0 + t.cols].copy_from_slice(t.row(r));
                c0 += t.cols;
            }
        }
        out
    }

    pub fn select_rows(&self, idx: &[usize]) -> Tensor {
        let mut out = Tensor::zeros(idx.len(), self.cols);
        for (k, &i) in idx.iter().enumerate() {
            out.row_mut(k).copy_from_slice(self.row(i));
        }
        out
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Strided view description: `offset + r * rs + c * cs`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct View {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

impl View {
    pub fn dense(rows: usize, cols: usize) -> Self {
        Self { offset: 0, rows, cols, rs: cols, cs: 1 }
    }

    pub fn transposed(self) -> Self {
        Self {
            offset: self.offset,
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
        }
    }

    fn fits(&self, len: usize) -> bool {
        self.rows == 0
            || self.cols == 0
            || self.offset + (self.rows - 1) * self.rs + (self.cols - 1) * self.cs < len
    }
}

/// `c = a * b + beta * c` over strided views.
pub(crate) fn gemm(a: &[f64], av: View, b: &[f64], bv: View, c: &mut [f64], cv: View, beta: f64) {
    assert_eq!(av.cols, bv.rows, "gemm inner dimension");
    assert_eq!((av.rows, bv.cols), (cv.rows, cv.cols), "gemm output shape");
    assert!(av.fits(a.len()) && bv.fits(b.len()) && cv.fits(c.len()), "gemm view out of bounds");
    if cv.rows == 0 || cv.cols == 0 {
        return;
    }
    if av.cols == 0 {
        for r in 0..cv.rows {
            for col in 0..cv.cols {
                let i = cv.offset + r * cv.rs + col * cv.cs;
                c[i] *= beta;
            }
        }
        return;
    }
    // SAFETY: every view was checked to lie inside its slice above, and `c`
    // is borrowed mutably so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            av.rows,
            av.cols,
            bv.cols,
            1.0,
            a.as_ptr().add(av.offset),
            av.rs as isize,
            av.cs as isize,
            b.as_ptr().add(bv.offset),
            bv.rs as isize,
            bv.cs as isize,
            beta,
            c.as_mut_ptr().add(cv.offset),
            cv.rs as isize,
            cv.cs as isize,
        );
    }
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, ShapeError> {
    if a.cols != b.rows {
        return Err(ShapeError::new("matmul", a, b));
    }
    let mut out = Tensor::zeros(a.rows, b.cols);
    gemm(
        &a.data,
        View::dense(a.rows, a.cols),
        &b.data,
        View::dense(b.rows, b.cols),
        &mut out.data,
        View::dense(a.rows, b.cols),
        0.0,
    );
    Ok(out)
}
