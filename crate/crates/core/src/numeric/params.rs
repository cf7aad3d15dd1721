use super::matrix::Matrix;
use super::scalar::Scalar;
use crate::error::{Result, VeError};

/// Flat, ordered view of every trainable real scalar in a structure.
///
/// Complex entries contribute `(re, im)` pairs. Gradients are stored in
/// structures of the same type, so flattening a gradient and its parameters
/// yields aligned vectors.
pub trait Parameters {
    fn write_params(&self, out: &mut Vec<f64>);

    fn read_params(&mut self, src: &mut &[f64]) -> Result<()>;

    fn flat_params(&self) -> Vec<f64> {
        let mut v = Vec::new();
        self.write_params(&mut v);
        v
    }

    fn param_len(&self) -> usize {
        self.flat_params().len()
    }

    fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        let mut src = flat;
        self.read_params(&mut src)?;
        if !src.is_empty() {
            return Err(VeError::shape(format!("{} unused parameter values", src.len())));
        }
        Ok(())
    }
}

impl<S: Scalar> Parameters for Matrix<S> {
    fn write_params(&self, out: &mut Vec<f64>) {
        out.reserve(self.as_slice().len() * S::REAL_PARTS);
        for &v in self.as_slice() {
            v.push_parts(out);
        }
    }

    fn read_params(&mut self, src: &mut &[f64]) -> Result<()> {
        let need = self.as_slice().len() * S::REAL_PARTS;
        if src.len() < need {
            return Err(VeError::shape(format!("need {need} parameter values, {} left", src.len())));
        }
        let (head, tail) = src.split_at(need);
        for (v, parts) in self.as_mut_slice().iter_mut().zip(head.chunks_exact(S::REAL_PARTS)) {
            *v = S::from_parts(parts);
        }
        *src = tail;
        Ok(())
    }
}

impl<T: Parameters> Parameters for Vec<T> {
    fn write_params(&self, out: &mut Vec<f64>) {
        for t in self {
            t.write_params(out);
        }
    }

    fn read_params(&mut self, src: &mut &[f64]) -> Result<()> {
        for t in self.iter_mut() {
            t.read_params(src)?;
        }
        Ok(())
    }
}
