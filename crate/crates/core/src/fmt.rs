//! Fixed-width numeric formatting used by every file the toolkit writes.

use crate::scalar::Scalar;

/// Scientific notation with 12 significant digits.
pub fn sci12<F: Scalar>(v: F) -> String {
    format!("{:.11e}", v.as_f64())
}
