//! Complex image and multi-coil stack types.

use ndarray::{Array2, Array3};
use num_complex::{Complex32, Complex64};

use crate::container::{Tensor, TensorData};
use crate::error::{Error, Result};

pub const MIN_SIDE: usize = 8;

/// A 2D complex-valued image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    pub data: Array2<Complex64>,
    pub label: Option<String>,
}

impl ComplexImage {
    /// Validates dimensions (each side at least 8) and finiteness.
    pub fn new(data: Array2<Complex64>, label: Option<String>) -> Result<Self> {
        let (h, w) = data.dim();
        if h < MIN_SIDE || w < MIN_SIDE {
            return Err(Error::validation(format!(
                "image size {h}x{w} below minimum {MIN_SIDE}x{MIN_SIDE}"
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::validation("image contains non-finite values"));
        }
        Ok(ComplexImage { data, label })
    }

    pub fn height(&self) -> usize {
        self.data.dim().0
    }

    pub fn width(&self) -> usize {
        self.data.dim().1
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn magnitude(&self) -> Array2<f64> {
        self.data.mapv(|z| z.norm())
    }

    pub fn to_tensor(&self, tag: &str) -> Tensor {
        let arr = self
            .data
            .mapv(|z| Complex32::new(z.re as f32, z.im as f32))
            .into_dyn();
        Tensor::new(TensorData::C64(arr), tag)
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match &t.data {
            TensorData::C64(a) => {
                let a2 = a
                    .clone()
                    .into_dimensionality::<ndarray::Ix2>()
                    .map_err(|_| Error::validation("expected a 2D complex array"))?;
                ComplexImage::new(
                    a2.mapv(|z| Complex64::new(z.re as f64, z.im as f64)),
                    Some(t.tag.clone()),
                )
            }
            _ => Err(Error::validation("expected dtype c64 for a complex image")),
        }
    }
}

/// Per-coil images sharing one geometry. Also used for sensitivity maps.
#[derive(Debug, Clone, PartialEq)]
pub struct CoilStack {
    pub images: Vec<ComplexImage>,
}

impl CoilStack {
    pub fn new(images: Vec<ComplexImage>) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::validation("coil stack needs at least one coil"));
        }
        let dims = images[0].shape();
        if images.iter().any(|im| im.shape() != dims) {
            return Err(Error::validation("coil images have mismatched dimensions"));
        }
        Ok(CoilStack { images })
    }

    pub fn n_coils(&self) -> usize {
        self.images.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.images[0].shape()
    }

    /// Copies into a dense `[coil, h, w]` array.
    pub fn to_array3(&self) -> Array3<Complex64> {
        let (h, w) = self.shape();
        let mut out = Array3::zeros((self.n_coils(), h, w));
        for (c, im) in self.images.iter().enumerate() {
            out.index_axis_mut(ndarray::Axis(0), c).assign(&im.data);
        }
        out
    }

    pub fn from_array3(arr: &Array3<Complex64>, label: &str) -> Result<Self> {
        let mut images = Vec::with_capacity(arr.dim().0);
        for c in 0..arr.dim().0 {
            images.push(ComplexImage::new(
                arr.index_axis(ndarray::Axis(0), c).to_owned(),
                Some(format!("{label}[{c}]")),
            )?);
        }
        CoilStack::new(images)
    }

    pub fn to_tensor(&self, tag: &str) -> Tensor {
        let arr = self
            .to_array3()
            .mapv(|z| Complex32::new(z.re as f32, z.im as f32))
            .into_dyn();
        Tensor::new(TensorData::C64(arr), tag)
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match &t.data {
            TensorData::C64(a) => {
                let a3 = a
                    .clone()
                    .into_dimensionality::<ndarray::Ix3>()
                    .map_err(|_| Error::validation("expected a 3D complex array"))?;
                CoilStack::from_array3(
                    &a3.mapv(|z| Complex64::new(z.re as f64, z.im as f64)),
                    &t.tag,
                )
            }
            _ => Err(Error::validation("expected dtype c64 for a coil stack")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn rejects_tiny_images() {
        let a = Array2::<Complex64>::zeros((4, 16));
        assert!(ComplexImage::new(a, None).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let mut a = Array2::<Complex64>::zeros((8, 8));
        a[[3, 3]] = Complex64::new(f64::NAN, 0.0);
        assert!(ComplexImage::new(a, None).is_err());
    }

    #[test]
    fn coil_stack_dimension_check() {
        let a = ComplexImage::new(Array2::zeros((8, 8)), None).unwrap();
        let b = ComplexImage::new(Array2::zeros((8, 16)), None).unwrap();
        assert!(CoilStack::new(vec![a.clone(), b]).is_err());
        assert!(CoilStack::new(vec![a.clone(), a]).is_ok());
    }
}
