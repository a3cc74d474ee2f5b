//! Point sets in the unit cube: Halton sequences, seeded pseudo-random
//! uniforms, and explicit user-supplied points.
//!
//! The pseudo-random generator is ChaCha8 (`rand_chacha`) seeded through
//! `SeedableRng::seed_from_u64`; coordinates are drawn point by point, so a
//! longer set with the same seed extends a shorter one. ChaCha output is
//! specified independently of the host, which gives bit-identical sets on
//! every platform.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::format::format_f64;

/// The first 100 primes, used as Halton bases.
pub const PRIMES: [u32; 100] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307,
    311, 313, 317, 331, 337, 347, 349, 353, 359, 367, 373, 379, 383, 389, 397, 401, 409, 419, 421,
    431, 433, 439, 443, 449, 457, 461, 463, 467, 479, 487, 491, 499, 503, 509, 521, 523, 541,
];

#[derive(Debug, Error)]
pub enum PointSetError {
    #[error("invalid argument: {0}")]
    Domain(String),
    #[error("dimension {0} exceeds the {max} available Halton bases", max = PRIMES.len())]
    TooManyDimensions(usize),
    #[error("point {index}: {reason}")]
    InvalidPoint { index: usize, reason: String },
    #[error("CSV line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Halton { start_index: u64 },
    PseudoRandom { seed: u64 },
    Explicit,
}

/// `n ≥ 1` points in `[0,1)^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    provenance: Provenance,
}

/// Base-`b` radical inverse: mirrors the digits of `index` about the radix point.
///
/// `index = Σ d_k b^k` maps to `Σ d_k b^{-k-1}`.
pub fn radical_inverse(base: u32, index: u64) -> Result<f64, PointSetError> {
    if base < 2 {
        return Err(PointSetError::Domain(format!(
            "base must be >= 2, got {base}"
        )));
    }
    if index < 1 {
        return Err(PointSetError::Domain("index must be >= 1".into()));
    }
    Ok(radical_inverse_unchecked(base as u64, index))
}

/// Reverses the digits into an integer numerator over `b^k` so the result
/// is a single correctly rounded division.
fn radical_inverse_unchecked(base: u64, mut index: u64) -> f64 {
    let base = base as u128;
    let mut reversed: u128 = 0;
    let mut denom: u128 = 1;
    while index > 0 {
        let digit = index as u128 % base;
        index /= base as u64;
        reversed = reversed * base + digit;
        denom *= base;
    }
    let value = reversed as f64 / denom as f64;
    // Only reachable when b^k exceeds 2^53.
    if value >= 1.0 {
        1.0 - f64::EPSILON / 2.0
    } else {
        value
    }
}

impl PointSet {
    /// `n` Halton points; point `i` (0-based) uses index `start_index + i`
    /// and bases are the first `dim` primes.
    pub fn halton(dim: usize, n: usize, start_index: u64) -> Result<Self, PointSetError> {
        check_shape(dim, n)?;
        if dim > PRIMES.len() {
            return Err(PointSetError::TooManyDimensions(dim));
        }
        if start_index < 1 {
            return Err(PointSetError::Domain("start index must be >= 1".into()));
        }
        let mut coords = Vec::with_capacity(dim * n);
        for i in 0..n as u64 {
            let index = start_index + i;
            coords.extend(
                PRIMES[..dim]
                    .iter()
                    .map(|&p| radical_inverse_unchecked(p as u64, index)),
            );
        }
        Ok(PointSet {
            dim,
            coords,
            provenance: Provenance::Halton { start_index },
        })
    }

    pub fn pseudo_random(dim: usize, n: usize, seed: u64) -> Result<Self, PointSetError> {
        check_shape(dim, n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords = (0..dim * n).map(|_| rng.gen::<f64>()).collect();
        Ok(PointSet {
            dim,
            coords,
            provenance: Provenance::PseudoRandom { seed },
        })
    }

    /// Wraps user-supplied points after checking they lie in `[0,1)^dim`.
    pub fn explicit(dim: usize, points: Vec<Vec<f64>>) -> Result<Self, PointSetError> {
        check_shape(dim, points.len())?;
        let mut coords = Vec::with_capacity(dim * points.len());
        for (index, p) in points.into_iter().enumerate() {
            if p.len() != dim {
                return Err(PointSetError::InvalidPoint {
                    index,
                    reason: format!("has {} coordinates, expected {dim}", p.len()),
                });
            }
            if let Some(x) = p.iter().find(|x| !(0.0..1.0).contains(*x)) {
                return Err(PointSetError::InvalidPoint {
                    index,
                    reason: format!("coordinate {x} outside [0, 1)"),
                });
            }
            coords.extend(p);
        }
        Ok(PointSet {
            dim,
            coords,
            provenance: Provenance::Explicit,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    /// Always false: point sets hold at least one point.
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    /// The first `n` points, keeping provenance.
    pub fn prefix(&self, n: usize) -> Result<Self, PointSetError> {
        if n == 0 || n > self.len() {
            return Err(PointSetError::Domain(format!(
                "prefix length {n} not in 1..={}",
                self.len()
            )));
        }
        Ok(PointSet {
            dim: self.dim,
            coords: self.coords[..n * self.dim].to_vec(),
            provenance: self.provenance,
        })
    }

    /// Writes the set as CSV with header `u1,...,ud` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), PointSetError> {
        let header: Vec<String> = (1..=self.dim).map(|j| format!("u{j}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for p in self.iter() {
            let row: Vec<String> = p.iter().map(|&x| format_f64(x)).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Reads a CSV written by [`PointSet::write_csv`] (or any CSV with a
    /// `u1,...,ud` header). The result has `Explicit` provenance.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, PointSetError> {
        let mut lines = input.lines().enumerate();
        let (_, header) = lines.next().ok_or(PointSetError::Csv {
            line: 1,
            reason: "empty input".into(),
        })?;
        let header = header?;
        let dim = header.split(',').count();
        for (j, name) in header.split(',').enumerate() {
            if name.trim() != format!("u{}", j + 1) {
                return Err(PointSetError::Csv {
                    line: 1,
                    reason: format!("expected header u1,...,u{dim}, got {header:?}"),
                });
            }
        }
        let mut points = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| PointSetError::Csv {
                    line: i + 1,
                    reason: e.to_string(),
                })?;
            points.push(row);
        }
        PointSet::explicit(dim, points)
    }
}

fn check_shape(dim: usize, n: usize) -> Result<(), PointSetError> {
    if dim == 0 {
        return Err(PointSetError::Domain("dimension must be >= 1".into()));
    }
    if n == 0 {
        return Err(PointSetError::Domain("point count must be >= 1".into()));
    }
    Ok(())
}
