//! Partitioned dense vectors holding primal and dual iterates.
//!
//! A [`BlockVector`] is a flat `Vec<f64>` plus a layout of block lengths.
//! Values are never mutated in place through the public API; every
//! arithmetic operation builds a new vector. Reductions run left to right
//! over blocks and then entries so that every trace is bit-reproducible.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct BlockVector {
    data: Vec<f64>,
    layout: Vec<usize>,
}

impl fmt::Debug for BlockVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.blocks()).finish()
    }
}

fn check_finite(data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::NonFinite(format!(
            "block vector entry {i} is {}",
            data[i]
        ))),
    }
}

impl BlockVector {
    /// Builds a vector from explicit blocks; rejects non-finite entries.
    pub fn new(blocks: Vec<Vec<f64>>) -> Result<Self> {
        let layout = blocks.iter().map(Vec::len).collect();
        let data: Vec<f64> = blocks.into_iter().flatten().collect();
        check_finite(&data)?;
        Ok(Self { data, layout })
    }

    pub fn from_flat(layout: &[usize], data: Vec<f64>) -> Result<Self> {
        let total: usize = layout.iter().sum();
        if total != data.len() {
            return Err(Error::LayoutMismatch {
                expected: layout.to_vec(),
                found: vec![data.len()],
            });
        }
        check_finite(&data)?;
        Ok(Self {
            data,
            layout: layout.to_vec(),
        })
    }

    /// Single-block vector.
    pub fn single(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Self::from_flat(&[n], data)
    }

    pub fn zeros(layout: &[usize]) -> Self {
        Self {
            data: vec![0.0; layout.iter().sum()],
            layout: layout.to_vec(),
        }
    }

    /// Vector with the same layout as `self` and entries `f(i, self[i])`.
    pub fn map_indexed(&self, f: impl FnMut(usize, f64) -> f64) -> Result<Self> {
        let mut f = f;
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i, v))
            .collect();
        Self::from_flat(&self.layout, data)
    }

    pub fn layout(&self) -> &[usize] {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn num_blocks(&self) -> usize {
        self.layout.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    fn offset(&self, block: usize) -> usize {
        self.layout[..block].iter().sum()
    }

    pub fn block(&self, i: usize) -> &[f64] {
        let start = self.offset(i);
        &self.data[start..start + self.layout[i]]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        let mut start = 0;
        self.layout.iter().map(move |&len| {
            let s = &self.data[start..start + len];
            start += len;
            s
        })
    }

    /// Returns a copy with block `i` replaced.
    pub fn with_block(&self, i: usize, values: &[f64]) -> Result<Self> {
        if values.len() != self.layout[i] {
            return Err(Error::LayoutMismatch {
                expected: vec![self.layout[i]],
                found: vec![values.len()],
            });
        }
        check_finite(values)?;
        let start = self.offset(i);
        let mut data = self.data.clone();
        data[start..start + values.len()].copy_from_slice(values);
        Ok(Self {
            data,
            layout: self.layout.clone(),
        })
    }

    pub fn ensure_layout(&self, layout: &[usize]) -> Result<()> {
        if self.layout != layout {
            return Err(Error::LayoutMismatch {
                expected: layout.to_vec(),
                found: self.layout.clone(),
            });
        }
        Ok(())
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        bv_dot(self, other)
    }

    pub fn norm2(&self) -> f64 {
        self.norm2_sq().sqrt()
    }

    pub fn norm2_sq(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc + v * v)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        bv_combine(1.0, self, -1.0, other)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        bv_combine(1.0, self, 1.0, other)
    }

    pub fn scale(&self, alpha: f64) -> Result<Self> {
        self.map_indexed(|_, v| alpha * v)
    }

    /// Concatenates the blocks of `a` followed by those of `b`.
    pub fn concat(a: &Self, b: &Self) -> Self {
        let mut data = a.data.clone();
        data.extend_from_slice(&b.data);
        let mut layout = a.layout.clone();
        layout.extend_from_slice(&b.layout);
        Self { data, layout }
    }

    /// Splits after the first `blocks` blocks.
    pub fn split_blocks(&self, blocks: usize) -> (Self, Self) {
        let cut: usize = self.layout[..blocks].iter().sum();
        (
            Self {
                data: self.data[..cut].to_vec(),
                layout: self.layout[..blocks].to_vec(),
            },
            Self {
                data: self.data[cut..].to_vec(),
                layout: self.layout[blocks..].to_vec(),
            },
        )
    }
}

/// Σ a_i b_i in block order, then entry order.
pub fn bv_dot(a: &BlockVector, b: &BlockVector) -> Result<f64> {
    b.ensure_layout(&a.layout)?;
    Ok(a
        .data
        .iter()
        .zip(&b.data)
        .fold(0.0, |acc, (x, y)| acc + x * y))
}

/// Entrywise αa + βb.
pub fn bv_combine(alpha: f64, a: &BlockVector, beta: f64, b: &BlockVector) -> Result<BlockVector> {
    b.ensure_layout(&a.layout)?;
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| alpha * x + beta * y)
        .collect();
    BlockVector::from_flat(&a.layout, data)
}

pub fn bv_norm2(a: &BlockVector) -> f64 {
    a.norm2()
}

/// A primal-dual pair u = (x, y).
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDual {
    pub x: BlockVector,
    pub y: BlockVector,
}

impl PrimalDual {
    pub fn new(x: BlockVector, y: BlockVector) -> Self {
        Self { x, y }
    }

    /// u as one vector: primal blocks, then dual blocks.
    pub fn concat(&self) -> BlockVector {
        BlockVector::concat(&self.x, &self.y)
    }

    pub fn from_concat(u: &BlockVector, primal_blocks: usize) -> Self {
        let (x, y) = u.split_blocks(primal_blocks);
        Self { x, y }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            x: self.x.sub(&other.x)?,
            y: self.y.sub(&other.y)?,
        })
    }

    pub fn norm2(&self) -> f64 {
        (self.x.norm2_sq() + self.y.norm2_sq()).sqrt()
    }

    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.norm2())
    }

    pub fn is_finite(&self) -> bool {
        self.x.as_slice().iter().chain(self.y.as_slice()).all(|v| v.is_finite())
    }
}
