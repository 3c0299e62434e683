//! Scalar transforms used in covariance restrictions and test dictionaries.

use std::fmt;

#[derive(Clone, Copy)]
pub struct Transform {
    pub label: &'static str,
    pub f: fn(f64) -> f64,
}

impl Transform {
    pub fn apply(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

impl fmt::Debug for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label)
    }
}

pub const IDENTITY: Transform = Transform { label: "x", f: |x| x };
pub const SQUARE: Transform = Transform { label: "x^2", f: |x| x * x };
pub const CUBE: Transform = Transform { label: "x^3", f: |x| x * x * x };
pub const FOURTH: Transform = Transform {
    label: "x^4",
    f: |x| (x * x) * (x * x),
};
pub const ABS: Transform = Transform { label: "|x|", f: f64::abs };
pub const CONSTANT: Transform = Transform { label: "1", f: |_| 1.0 };

/// Looks a transform up by its label, for configuration files.
pub fn by_label(label: &str) -> Option<Transform> {
    [IDENTITY, SQUARE, CUBE, FOURTH, ABS, CONSTANT]
        .into_iter()
        .find(|t| t.label == label)
}
