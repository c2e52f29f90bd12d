//! Lattice sites and sparse fields on `Z^d x {colors}`.
//!
//! Sites are packed into a `u128` key (14 bits per signed coordinate, 8 bits
//! of color) so that hash maps over sites stay allocation-free. The packing
//! supports `d <= 8` and coordinates in `[-8191, 8191]`, far beyond the
//! logarithmic radii this crate ever visits.

use std::collections::HashMap;

pub const COORD_BITS: u32 = 14;
pub const COORD_LIMIT: i32 = (1 << (COORD_BITS - 1)) - 1;
pub const MAX_DIM: usize = 8;

/// Packs a lattice point and color into a map key.
///
/// Panics if a coordinate falls outside the representable window; callers
/// guard radii long before this becomes reachable.
#[inline]
pub fn pack(x: &[i32], color: usize) -> u128 {
    debug_assert!(x.len() <= MAX_DIM);
    let mut key = color as u128;
    let mut shift = 8u32;
    for &c in x {
        assert!(
            c.abs() <= COORD_LIMIT,
            "lattice coordinate {c} outside supported window"
        );
        key |= (((c + COORD_LIMIT + 1) as u128) & ((1 << COORD_BITS) - 1)) << shift;
        shift += COORD_BITS;
    }
    key
}

#[inline]
pub fn unpack(key: u128, d: usize) -> (Vec<i32>, usize) {
    let color = (key & 0xff) as usize;
    let mut x = Vec::with_capacity(d);
    let mut shift = 8u32;
    for _ in 0..d {
        let raw = ((key >> shift) & ((1 << COORD_BITS) - 1)) as i32;
        x.push(raw - COORD_LIMIT - 1);
        shift += COORD_BITS;
    }
    (x, color)
}

/// Sparse real-valued field over sites, the common currency between the
/// sandpile operators and the Green-function checks.
#[derive(Debug, Clone, Default)]
pub struct Field {
    pub d: usize,
    pub map: HashMap<u128, f64>,
}

impl Field {
    pub fn new(d: usize) -> Self {
        Field {
            d,
            map: HashMap::new(),
        }
    }

    pub fn set(&mut self, x: &[i32], color: usize, value: f64) {
        self.map.insert(pack(x, color), value);
    }

    pub fn add(&mut self, x: &[i32], color: usize, value: f64) {
        *self.map.entry(pack(x, color)).or_insert(0.0) += value;
    }

    pub fn get(&self, x: &[i32], color: usize) -> f64 {
        self.map.get(&pack(x, color)).copied().unwrap_or(0.0)
    }

    pub fn sup_norm(&self) -> f64 {
        self.map.values().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Entries in a deterministic (lexicographic) order.
    pub fn sorted_entries(&self) -> Vec<(Vec<i32>, usize, f64)> {
        let mut out: Vec<_> = self
            .map
            .iter()
            .map(|(&k, &v)| {
                let (x, c) = unpack(k, self.d);
                (x, c, v)
            })
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        out
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn norm_i32(x: &[i32]) -> f64 {
    x.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn normalized(x: &[f64]) -> Vec<f64> {
    let n = norm(x);
    x.iter().map(|v| v / n).collect()
}
