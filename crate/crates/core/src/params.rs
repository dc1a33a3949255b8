//! Named scalar, vector and matrix parameters.
//!
//! Used both for problem factory parameters and for the constants fed to
//! step-length certificates.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamMap {
    scalars: BTreeMap<String, f64>,
    vectors: BTreeMap<String, Vec<f64>>,
    matrices: BTreeMap<String, Vec<Vec<f64>>>,
}

impl ParamMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn scalar(mut self, key: &str, value: f64) -> Self {
        self.scalars.insert(key.to_string(), value);
        self
    }

    pub fn vector(mut self, key: &str, value: Vec<f64>) -> Self {
        self.vectors.insert(key.to_string(), value);
        self
    }

    pub fn matrix(mut self, key: &str, value: Vec<Vec<f64>>) -> Self {
        self.matrices.insert(key.to_string(), value);
        self
    }

    pub fn set_scalar(&mut self, key: &str, value: f64) {
        self.scalars.insert(key.to_string(), value);
    }

    pub fn set_vector(&mut self, key: &str, value: Vec<f64>) {
        self.vectors.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Result<f64> {
        self.scalars
            .get(key)
            .copied()
            .ok_or_else(|| Error::MissingParameter(key.to_string()))
    }

    pub fn get_or(&self, key: &str, default: f64) -> f64 {
        self.scalars.get(key).copied().unwrap_or(default)
    }

    pub fn try_get(&self, key: &str) -> Option<f64> {
        self.scalars.get(key).copied()
    }

    /// A scalar that must be a nonnegative integer count.
    pub fn get_count(&self, key: &str) -> Result<usize> {
        let v = self.get(key)?;
        if v < 0.0 || v.fract() != 0.0 || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "`{key}` must be a nonnegative integer, got {v}"
            )));
        }
        Ok(v as usize)
    }

    pub fn get_vector(&self, key: &str) -> Result<&[f64]> {
        self.vectors
            .get(key)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingParameter(key.to_string()))
    }

    pub fn try_vector(&self, key: &str) -> Option<&[f64]> {
        self.vectors.get(key).map(Vec::as_slice)
    }

    pub fn get_matrix(&self, key: &str) -> Result<&[Vec<f64>]> {
        self.matrices
            .get(key)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingParameter(key.to_string()))
    }

    pub fn try_matrix(&self, key: &str) -> Option<&[Vec<f64>]> {
        self.matrices.get(key).map(Vec::as_slice)
    }

    pub fn scalars(&self) -> impl Iterator<Item = (&str, f64)> {
        self.scalars.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn matrices(&self) -> impl Iterator<Item = (&str, &[Vec<f64>])> {
        self.matrices.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Copies every entry of `other` over `self`.
    pub fn merge(mut self, other: &ParamMap) -> Self {
        for (k, v) in &other.scalars {
            self.scalars.insert(k.clone(), *v);
        }
        for (k, v) in &other.vectors {
            self.vectors.insert(k.clone(), v.clone());
        }
        for (k, v) in &other.matrices {
            self.matrices.insert(k.clone(), v.clone());
        }
        self
    }
}
