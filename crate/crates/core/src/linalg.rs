//! Complex dense types shared across modules plus a compact JSON form for them.

use nalgebra::{DMatrix, DVector, RowDVector};
pub use nalgebra::Complex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type CRow = RowDVector<C64>;

#[inline]
pub fn cis(angle: f64) -> C64 {
    C64::from_polar(1.0, angle)
}

/// `[re, im]` pair used by every JSON dump in the crate.
pub fn complex_pairs(values: impl IntoIterator<Item = C64>) -> Vec<[f64; 2]> {
    values.into_iter().map(|c| [c.re, c.im]).collect()
}

pub fn from_pairs(pairs: &[[f64; 2]]) -> Vec<C64> {
    pairs.iter().map(|p| C64::new(p[0], p[1])).collect()
}

pub mod serde_cvector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &CVector, s: S) -> Result<S::Ok, S::Error> {
        complex_pairs(v.iter().copied()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CVector, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(CVector::from_vec(from_pairs(&pairs)))
    }
}

/// Row-major list of rows, each a list of `[re, im]` pairs.
pub mod serde_cmatrix {
    use super::*;
    use serde::de::Error as _;

    #[derive(Serialize, Deserialize)]
    struct Dense {
        rows: usize,
        cols: usize,
        data: Vec<Vec<[f64; 2]>>,
    }

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        let data = m
            .row_iter()
            .map(|r| complex_pairs(r.iter().copied()))
            .collect();
        Dense {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let dense = Dense::deserialize(d)?;
        if dense.data.len() != dense.rows || dense.data.iter().any(|r| r.len() != dense.cols) {
            return Err(D::Error::custom("matrix data does not match rows/cols"));
        }
        let flat: Vec<C64> = dense.data.iter().flat_map(|r| from_pairs(r)).collect();
        Ok(CMatrix::from_row_slice(dense.rows, dense.cols, &flat))
    }
}

/// Frobenius norm of a real matrix.
pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}
