//! Exact Brownian motion on nested dyadic partitions.
//!
//! A [`NestedBrownianPath`] stores the Brownian values on the finest dyadic
//! grid only; level `d` is the stride-`2^(D-d)` subsample of it, so nesting
//! holds bitwise. New levels are produced by Brownian-bridge midpoint
//! displacement with counter-addressed normals (see [`crate::rng`]).

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{level_stream, NormalStream};

/// Largest supported refinement level (2^30 intervals).
pub const MAX_LEVEL: u32 = 30;

#[derive(Clone, Debug, PartialEq)]
pub struct NestedBrownianPath {
    horizon: f64,
    dim: usize,
    max_level: u32,
    seed: u64,
    /// `(2^max_level + 1) * dim` values, point-major.
    values: Vec<f64>,
}

/// Dyadic grid time `i * T / 2^level`, computed so that the same instant is
/// bitwise identical at every level that contains it.
#[inline]
pub fn dyadic_time(horizon: f64, level: u32, index: usize) -> f64 {
    (index as f64 * horizon) / (1u64 << level) as f64
}

impl NestedBrownianPath {
    /// Samples `B` on `[0, horizon]` in `dim` dimensions down to level `max_level`.
    pub fn sample(seed: u64, horizon: f64, dim: usize, max_level: u32) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::param(format!("horizon must be positive, got {horizon}")));
        }
        if dim == 0 {
            return Err(Error::param("dimension must be at least 1"));
        }
        if max_level == 0 || max_level > MAX_LEVEL {
            return Err(Error::param(format!(
                "max level must be in 1..={MAX_LEVEL}, got {max_level}"
            )));
        }
        let mut values = vec![0.0; 2 * dim];
        let scale = horizon.sqrt();
        for c in 0..dim {
            values[dim + c] = scale * NormalStream::at(seed, level_stream(0, c), 0);
        }
        let mut path = Self {
            horizon,
            dim,
            max_level: 0,
            seed,
            values,
        };
        for _ in 0..max_level {
            path = path.refine_unchecked();
        }
        Ok(path)
    }

    /// Adds one dyadic level by bridge midpoints; existing values are kept.
    pub fn refine(&self) -> Result<Self> {
        if self.max_level >= MAX_LEVEL {
            return Err(Error::param(format!("cannot refine beyond level {MAX_LEVEL}")));
        }
        Ok(self.refine_unchecked())
    }

    fn refine_unchecked(&self) -> Self {
        let r = self.dim;
        let intervals = 1usize << self.max_level;
        let new_level = self.max_level + 1;
        // conditional std of the midpoint of an interval of length delta is sqrt(delta / 4)
        let bridge_std = (self.mesh(self.max_level) / 4.0).sqrt();
        let mut values = vec![0.0; (2 * intervals + 1) * r];
        for i in 0..=intervals {
            values[2 * i * r..2 * i * r + r].copy_from_slice(&self.values[i * r..i * r + r]);
        }
        for c in 0..r {
            let mut normals = NormalStream::new(self.seed, level_stream(new_level, c), 0);
            for i in 0..intervals {
                let left = self.values[i * r + c];
                let right = self.values[(i + 1) * r + c];
                values[(2 * i + 1) * r + c] = 0.5 * (left + right) + bridge_std * normals.next_normal();
            }
        }
        Self {
            horizon: self.horizon,
            dim: r,
            max_level: new_level,
            seed: self.seed,
            values,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Mesh `T / 2^level`.
    pub fn mesh(&self, level: u32) -> f64 {
        self.horizon / (1u64 << level) as f64
    }

    pub fn num_points(&self, level: u32) -> usize {
        (1usize << level) + 1
    }

    fn check_level(&self, level: u32) -> Result<()> {
        if level > self.max_level {
            return Err(Error::Level {
                requested: level,
                max: self.max_level,
            });
        }
        Ok(())
    }

    /// Value at grid index `index` of level `level`.
    pub fn value(&self, level: u32, index: usize) -> Result<&[f64]> {
        self.check_level(level)?;
        if index > 1usize << level {
            return Err(Error::param(format!("index {index} out of range at level {level}")));
        }
        let k = index << (self.max_level - level);
        Ok(&self.values[k * self.dim..(k + 1) * self.dim])
    }

    /// Values at level `level`, point-major.
    pub fn level_values(&self, level: u32) -> Result<Vec<f64>> {
        self.check_level(level)?;
        let stride = 1usize << (self.max_level - level);
        let r = self.dim;
        let mut out = Vec::with_capacity(self.num_points(level) * r);
        for i in 0..self.num_points(level) {
            let k = i * stride;
            out.extend_from_slice(&self.values[k * r..(k + 1) * r]);
        }
        Ok(out)
    }

    pub fn times(&self, level: u32) -> Vec<f64> {
        (0..=(1usize << level))
            .map(|i| dyadic_time(self.horizon, level, i))
            .collect()
    }

    /// The piecewise-linear interpolant `B^d` through the level-`level` values.
    pub fn interpolant(&self, level: u32) -> Result<PiecewiseLinearPath> {
        let values = self.level_values(level)?;
        PiecewiseLinearPath::new(self.times(level), values, self.dim)
    }

    /// CSV with columns `t, b1, ..., br` at level `level`.
    pub fn write_csv<W: Write>(&self, level: u32, writer: W) -> Result<()> {
        let values = self.level_values(level)?;
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|c| format!("b{c}")));
        w.write_record(&header)?;
        for (i, t) in self.times(level).into_iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(values[i * self.dim..(i + 1) * self.dim].iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Compact binary dump.
    ///
    /// Header (little-endian): `T: f64, r: u64, D: u64, seed: u64`. Body:
    /// level-ordered `f64` values, each point as `r` consecutive coordinates.
    /// Level 0 contributes both endpoints; level `d >= 1` contributes its
    /// odd-indexed points (the ones it introduced) in increasing index order.
    pub fn write_binary<W: Write>(&self, mut writer: W) -> Result<()> {
        writer.write_all(&self.horizon.to_le_bytes())?;
        writer.write_all(&(self.dim as u64).to_le_bytes())?;
        writer.write_all(&(self.max_level as u64).to_le_bytes())?;
        writer.write_all(&self.seed.to_le_bytes())?;
        let r = self.dim;
        let put = |k: usize, w: &mut W| -> Result<()> {
            for v in &self.values[k * r..(k + 1) * r] {
                w.write_all(&v.to_le_bytes())?;
            }
            Ok(())
        };
        let top = 1usize << self.max_level;
        put(0, &mut writer)?;
        put(top, &mut writer)?;
        for level in 1..=self.max_level {
            let stride = 1usize << (self.max_level - level);
            for i in (1..(1usize << level)).step_by(2) {
                put(i * stride, &mut writer)?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut reader: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let horizon = f64::from_le_bytes(next(&mut reader)?);
        let dim = u64::from_le_bytes(next(&mut reader)?) as usize;
        let max_level = u64::from_le_bytes(next(&mut reader)?) as u32;
        let seed = u64::from_le_bytes(next(&mut reader)?);
        if dim == 0 || max_level > MAX_LEVEL || !(horizon > 0.0) {
            return Err(Error::param("corrupt binary path header"));
        }
        let top = 1usize << max_level;
        let mut values = vec![0.0; (top + 1) * dim];
        let mut order = vec![0, top];
        for level in 1..=max_level {
            let stride = 1usize << (max_level - level);
            order.extend((1..(1usize << level)).step_by(2).map(|i| i * stride));
        }
        for k in order {
            for c in 0..dim {
                values[k * dim + c] = f64::from_le_bytes(next(&mut reader)?);
            }
        }
        Ok(Self {
            horizon,
            dim,
            max_level,
            seed,
            values,
        })
    }
}

/// Continuous piecewise-linear path with per-segment slopes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearPath {
    dim: usize,
    times: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl PiecewiseLinearPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || times.len() < 2 || values.len() != times.len() * dim {
            return Err(Error::param("piecewise-linear path needs >= 2 knots with matching values"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("breakpoints must be strictly increasing"));
        }
        let mut slopes = Vec::with_capacity((times.len() - 1) * dim);
        for i in 0..times.len() - 1 {
            let h = times[i + 1] - times[i];
            for c in 0..dim {
                slopes.push((values[(i + 1) * dim + c] - values[i * dim + c]) / h);
            }
        }
        Ok(Self {
            dim,
            times,
            values,
            slopes,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn num_segments(&self) -> usize {
        self.times.len() - 1
    }

    pub fn knot(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn slope(&self, segment: usize) -> &[f64] {
        &self.slopes[segment * self.dim..(segment + 1) * self.dim]
    }

    /// Knot increment over segment `segment`.
    pub fn increment(&self, segment: usize, out: &mut [f64]) {
        let a = self.knot(segment);
        let b = self.knot(segment + 1);
        for c in 0..self.dim {
            out[c] = b[c] - a[c];
        }
    }

    /// Segment containing `t`, using half-open `[t_i, t_{i+1})` with the
    /// final knot assigned to the last segment.
    pub fn segment_of(&self, t: f64) -> Result<usize> {
        let n = self.times.len();
        if !(t >= self.times[0] && t <= self.times[n - 1]) {
            return Err(Error::param(format!("time {t} outside the path's domain")));
        }
        let idx = self.times.partition_point(|&s| s <= t);
        Ok(idx.saturating_sub(1).min(n - 2))
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let i = self.segment_of(t)?;
        let t0 = self.times[i];
        let base = self.knot(i);
        if t == t0 {
            out[..self.dim].copy_from_slice(base);
            return Ok(());
        }
        if t == self.times[i + 1] {
            out[..self.dim].copy_from_slice(self.knot(i + 1));
            return Ok(());
        }
        let slope = self.slope(i);
        for c in 0..self.dim {
            out[c] = base[c] + (t - t0) * slope[c];
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_at_zero() {
        let p = NestedBrownianPath::sample(11, 2.0, 3, 6).unwrap();
        assert_eq!(p.value(6, 0).unwrap(), &[0.0, 0.0, 0.0]);
        assert_eq!(p.value(0, 0).unwrap(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(NestedBrownianPath::sample(1, 0.0, 1, 3).is_err());
        assert!(NestedBrownianPath::sample(1, 1.0, 0, 3).is_err());
        assert!(NestedBrownianPath::sample(1, 1.0, 1, 0).is_err());
    }

    #[test]
    fn nesting_is_bitwise() {
        let p = NestedBrownianPath::sample(5, 1.0, 2, 9).unwrap();
        for d in 0..9 {
            let coarse = p.level_values(d).unwrap();
            let fine = p.level_values(d + 1).unwrap();
            for i in 0..p.num_points(d) {
                for c in 0..2 {
                    assert_eq!(coarse[i * 2 + c].to_bits(), fine[2 * i * 2 + c].to_bits());
                }
            }
            let tc = p.times(d);
            let tf = p.times(d + 1);
            for i in 0..tc.len() {
                assert_eq!(tc[i].to_bits(), tf[2 * i].to_bits());
            }
        }
    }

    #[test]
    fn refine_keeps_existing_levels() {
        let p = NestedBrownianPath::sample(8, 1.5, 1, 4).unwrap();
        let q = p.refine().unwrap();
        assert_eq!(q.max_level(), 5);
        for d in 0..=4 {
            assert_eq!(p.level_values(d).unwrap(), q.level_values(d).unwrap());
        }
        // refining directly equals sampling deeper
        let direct = NestedBrownianPath::sample(8, 1.5, 1, 5).unwrap();
        assert_eq!(q, direct);
    }

    #[test]
    fn level_error() {
        let p = NestedBrownianPath::sample(1, 1.0, 1, 3).unwrap();
        assert!(matches!(p.interpolant(4), Err(Error::Level { requested: 4, max: 3 })));
    }

    #[test]
    fn interpolant_through_knots() {
        let p = NestedBrownianPath::sample(3, 1.0, 2, 5).unwrap();
        let pl = p.interpolant(4).unwrap();
        let mut out = [0.0; 2];
        for (i, &t) in pl.times().iter().enumerate() {
            pl.eval(t, &mut out).unwrap();
            assert_eq!(&out, p.value(4, i).unwrap());
        }
        for i in 0..pl.num_segments() {
            let mid = 0.5 * (pl.times()[i] + pl.times()[i + 1]);
            pl.eval(mid, &mut out).unwrap();
            for c in 0..2 {
                let avg = 0.5 * (pl.knot(i)[c] + pl.knot(i + 1)[c]);
                assert!((out[c] - avg).abs() < 1e-14);
                let slope = (pl.knot(i + 1)[c] - pl.knot(i)[c]) / p.mesh(4);
                assert!((pl.slope(i)[c] - slope).abs() <= 1e-12 * slope.abs().max(1.0));
            }
        }
    }

    #[test]
    fn binary_round_trip() {
        let p = NestedBrownianPath::sample(99, 0.75, 2, 6).unwrap();
        let mut buf = Vec::new();
        p.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 32 + 65 * 2 * 8);
        assert_eq!(&buf[0..8], &0.75f64.to_le_bytes());
        let q = NestedBrownianPath::read_binary(&buf[..]).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let p = NestedBrownianPath::sample(1, 1.0, 2, 3).unwrap();
        let mut buf = Vec::new();
        p.write_csv(2, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,b1,b2");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].starts_with("0,0,0"));
    }
}
