//! Level-2 rough paths over a finite grid.
//!
//! Increments are stored per adjacent grid interval and composed on demand
//! with Chen's relation
//! `X²_{s,t} = X²_{s,u} + X²_{u,t} + X¹_{s,u} ⊗ X¹_{u,t}`.
//! Tensors are `r × r`, row-major; level-2 magnitudes use the Frobenius norm.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::brownian::PiecewiseLinearPath;
use crate::error::{Error, Result};

/// Default pair budget: all pairs of a 4097-point grid.
pub const DEFAULT_PAIR_BUDGET: usize = 4097 * 4096 / 2;

pub fn check_exponent(alpha: f64) -> Result<()> {
    if alpha > 1.0 / 3.0 && alpha < 0.5 {
        Ok(())
    } else {
        Err(Error::Exponent(alpha))
    }
}

/// A level-1/level-2 increment `(X¹_{s,t}, X²_{s,t})`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathIncrement {
    pub dim: usize,
    pub level1: Vec<f64>,
    pub level2: Vec<f64>,
}

impl PathIncrement {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            level1: vec![0.0; dim],
            level2: vec![0.0; dim * dim],
        }
    }

    /// Appends the increment `(l1, l2)` of an adjacent interval on the right.
    #[inline]
    pub fn extend(&mut self, l1: &[f64], l2: &[f64]) {
        let r = self.dim;
        for a in 0..r {
            let left = self.level1[a];
            for b in 0..r {
                self.level2[a * r + b] += l2[a * r + b] + left * l1[b];
            }
        }
        for a in 0..r {
            self.level1[a] += l1[a];
        }
    }

    /// Chen product `self ⊗ other`.
    pub fn concat(&self, other: &PathIncrement) -> PathIncrement {
        let mut out = self.clone();
        out.extend(&other.level1, &other.level2);
        out
    }

    pub fn level1_norm(&self) -> f64 {
        self.level1.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn level2_norm(&self) -> f64 {
        self.level2.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Antisymmetric part of the level-2 tensor (the Lévy area).
    pub fn area(&self) -> Vec<f64> {
        let r = self.dim;
        let mut out = vec![0.0; r * r];
        for a in 0..r {
            for b in 0..r {
                out[a * r + b] = 0.5 * (self.level2[a * r + b] - self.level2[b * r + a]);
            }
        }
        out
    }
}

/// Result of a Hölder-norm scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoelderNorm {
    pub value: f64,
    pub level1: f64,
    pub level2: f64,
    /// `true` when every grid pair was scanned; `false` when the scan was
    /// restricted to dyadic blocks because the pair count exceeded the budget.
    pub exhaustive: bool,
    pub pairs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoughPath {
    dim: usize,
    alpha: f64,
    times: Vec<f64>,
    level1: Vec<f64>,
    level2: Vec<f64>,
}

/// Exact Stratonovich lift of a piecewise-linear path: on each segment the
/// level-2 increment is `½ Δ ⊗ Δ`.
pub fn lift_piecewise_linear(pl: &PiecewiseLinearPath, alpha: f64) -> Result<RoughPath> {
    check_exponent(alpha)?;
    let r = pl.dim();
    let n = pl.num_segments();
    let mut level1 = vec![0.0; n * r];
    let mut level2 = vec![0.0; n * r * r];
    for i in 0..n {
        let inc = &mut level1[i * r..(i + 1) * r];
        pl.increment(i, inc);
        for a in 0..r {
            for b in 0..r {
                level2[i * r * r + a * r + b] = 0.5 * inc[a] * inc[b];
            }
        }
    }
    Ok(RoughPath {
        dim: r,
        alpha,
        times: pl.times().to_vec(),
        level1,
        level2,
    })
}

impl RoughPath {
    /// Builds a rough path from explicit per-interval increments.
    pub fn from_increments(
        times: Vec<f64>,
        dim: usize,
        level1: Vec<f64>,
        level2: Vec<f64>,
        alpha: f64,
    ) -> Result<Self> {
        check_exponent(alpha)?;
        let n = times.len().saturating_sub(1);
        if dim == 0 || n == 0 || level1.len() != n * dim || level2.len() != n * dim * dim {
            return Err(Error::param("increment arrays do not match the grid"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("grid must be strictly increasing"));
        }
        Ok(Self {
            dim,
            alpha,
            times,
            level1,
            level2,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn num_intervals(&self) -> usize {
        self.times.len() - 1
    }

    pub fn interval_level1(&self, i: usize) -> &[f64] {
        &self.level1[i * self.dim..(i + 1) * self.dim]
    }

    pub fn interval_level2(&self, i: usize) -> &[f64] {
        let rr = self.dim * self.dim;
        &self.level2[i * rr..(i + 1) * rr]
    }

    /// Grid index of `t`; `t` must be a grid point exactly.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        self.times
            .binary_search_by(|s| s.total_cmp(&t))
            .map_err(|_| Error::Grid(t))
    }

    /// Increment between grid indices `i <= j` by sequential Chen composition.
    pub fn increment_between(&self, i: usize, j: usize) -> PathIncrement {
        let mut acc = PathIncrement::zero(self.dim);
        for k in i..j {
            acc.extend(self.interval_level1(k), self.interval_level2(k));
        }
        acc
    }

    /// Increment over `[s, t]` for grid times `s <= t`.
    pub fn increment(&self, s: f64, t: f64) -> Result<PathIncrement> {
        let i = self.index_of(s)?;
        let j = self.index_of(t)?;
        if i > j {
            return Err(Error::param(format!("expected s <= t, got s = {s}, t = {t}")));
        }
        Ok(self.increment_between(i, j))
    }

    /// `(X¹_{s,u} + X¹_{u,t}, X²_{s,u} + X²_{u,t} + X¹_{s,u} ⊗ X¹_{u,t})`.
    pub fn compose_chen(&self, s: f64, u: f64, t: f64) -> Result<PathIncrement> {
        let (i, k, j) = (self.index_of(s)?, self.index_of(u)?, self.index_of(t)?);
        if !(i <= k && k <= j) {
            return Err(Error::param(format!("expected s <= u <= t, got {s}, {u}, {t}")));
        }
        Ok(self.increment_between(i, k).concat(&self.increment_between(k, j)))
    }

    /// `Sym(X²_{s,t}) − ½ X¹_{s,t} ⊗ X¹_{s,t}`; zero for geometric rough paths.
    pub fn geometricity_defect(&self, s: f64, t: f64) -> Result<Vec<f64>> {
        let inc = self.increment(s, t)?;
        let r = self.dim;
        let mut out = vec![0.0; r * r];
        for a in 0..r {
            for b in 0..r {
                let sym = 0.5 * (inc.level2[a * r + b] + inc.level2[b * r + a]);
                out[a * r + b] = sym - 0.5 * inc.level1[a] * inc.level1[b];
            }
        }
        Ok(out)
    }

    /// α-Hölder rough-path norm over grid pairs.
    ///
    /// All `N(N+1)/2` pairs are scanned when that count is within
    /// `pair_budget`; otherwise only dyadic blocks `[i·2^k, (i+1)·2^k]` are
    /// used, which under-estimates the sup and is reported via `exhaustive`.
    pub fn hoelder_norm(&self, pair_budget: usize) -> HoelderNorm {
        let a = self.alpha;
        let mut best1 = 0.0f64;
        let mut best2 = 0.0f64;
        let mut visit = |inc: &PathIncrement, dt: f64| {
            best1 = best1.max(inc.level1_norm() / dt.powf(a));
            best2 = best2.max(inc.level2_norm() / dt.powf(2.0 * a));
        };
        let n = self.num_intervals();
        let all_pairs = n * (n + 1) / 2;
        let (exhaustive, pairs) = if all_pairs <= pair_budget {
            for i in 0..n {
                let mut acc = PathIncrement::zero(self.dim);
                for j in i..n {
                    acc.extend(self.interval_level1(j), self.interval_level2(j));
                    visit(&acc, self.times[j + 1] - self.times[i]);
                }
            }
            (true, all_pairs)
        } else {
            let mut pairs = 0;
            for_each_dyadic_block(self, |inc, dt| {
                pairs += 1;
                visit(inc, dt)
            });
            (false, pairs)
        };
        HoelderNorm {
            value: best1.max(best2),
            level1: best1,
            level2: best2,
            exhaustive,
            pairs,
        }
    }

    /// CSV of per-interval increments: `s, t, x1.., x2_11, x2_12, ..`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let r = self.dim;
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["s".to_string(), "t".to_string()];
        header.extend((1..=r).map(|a| format!("x1_{a}")));
        for a in 1..=r {
            for b in 1..=r {
                header.push(format!("x2_{a}{b}"));
            }
        }
        w.write_record(&header)?;
        for i in 0..self.num_intervals() {
            let mut row = vec![self.times[i].to_string(), self.times[i + 1].to_string()];
            row.extend(self.interval_level1(i).iter().map(f64::to_string));
            row.extend(self.interval_level2(i).iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Visits every dyadic block `[i·2^k, (i+1)·2^k]` (in interval units),
/// building each level of blocks from the one below by Chen composition.
fn for_each_dyadic_block(rp: &RoughPath, mut visit: impl FnMut(&PathIncrement, f64)) {
    let n = rp.num_intervals();
    let mut blocks: Vec<(usize, usize, PathIncrement)> = (0..n)
        .map(|i| {
            let inc = PathIncrement {
                dim: rp.dim,
                level1: rp.interval_level1(i).to_vec(),
                level2: rp.interval_level2(i).to_vec(),
            };
            (i, i + 1, inc)
        })
        .collect();
    while !blocks.is_empty() {
        for (i, j, inc) in &blocks {
            visit(inc, rp.times[*j] - rp.times[*i]);
        }
        blocks = blocks
            .chunks_exact(2)
            .map(|pair| (pair[0].0, pair[1].1, pair[0].2.concat(&pair[1].2)))
            .collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brownian::NestedBrownianPath;

    fn line(c: f64, n: usize) -> PiecewiseLinearPath {
        let times: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let values = times.iter().map(|t| c * t).collect();
        PiecewiseLinearPath::new(times, values, 1).unwrap()
    }

    #[test]
    fn exponent_range() {
        let pl = line(1.0, 4);
        assert!(matches!(lift_piecewise_linear(&pl, 0.5), Err(Error::Exponent(_))));
        assert!(matches!(lift_piecewise_linear(&pl, 1.0 / 3.0), Err(Error::Exponent(_))));
        assert!(lift_piecewise_linear(&pl, 0.4).is_ok());
    }

    #[test]
    fn single_segment_is_half_tensor_square() {
        let pl = PiecewiseLinearPath::new(vec![0.0, 0.5], vec![0.0, 0.0, 0.3, -1.2], 2).unwrap();
        let rp = lift_piecewise_linear(&pl, 0.4).unwrap();
        let inc = rp.increment(0.0, 0.5).unwrap();
        let d = [0.3, -1.2];
        for a in 0..2 {
            for b in 0..2 {
                assert_eq!(inc.level2[a * 2 + b], 0.5 * d[a] * d[b]);
            }
        }
        assert!(inc.area().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn degenerate_splits() {
        let p = NestedBrownianPath::sample(4, 1.0, 2, 5).unwrap();
        let rp = lift_piecewise_linear(&p.interpolant(5).unwrap(), 0.4).unwrap();
        let (s, t) = (rp.times()[3], rp.times()[20]);
        let direct = rp.increment(s, t).unwrap();
        assert_eq!(rp.compose_chen(s, s, t).unwrap(), direct);
        assert_eq!(rp.compose_chen(s, t, t).unwrap(), direct);
    }

    #[test]
    fn off_grid_time_is_rejected() {
        let rp = lift_piecewise_linear(&line(1.0, 4), 0.4).unwrap();
        assert!(matches!(rp.compose_chen(0.0, 0.3, 1.0), Err(Error::Grid(_))));
    }

    #[test]
    fn constant_path_has_zero_norm() {
        let rp = lift_piecewise_linear(&line(0.0, 16), 0.4).unwrap();
        assert_eq!(rp.hoelder_norm(DEFAULT_PAIR_BUDGET).value, 0.0);
    }

    #[test]
    fn linear_path_norm_is_slope() {
        // level-2 ratio is ½c²(t−s)^{2−2α} <= ½c² < |c| for |c| < 2
        let c = 1.5;
        let rp = lift_piecewise_linear(&line(c, 64), 0.4).unwrap();
        let h = rp.hoelder_norm(DEFAULT_PAIR_BUDGET);
        assert!(h.exhaustive);
        assert!((h.value - c).abs() < 1e-12);
        assert!((h.level2 - 0.5 * c * c).abs() < 1e-12);
    }

    #[test]
    fn dyadic_restriction_is_flagged_and_bounded() {
        let p = NestedBrownianPath::sample(9, 1.0, 2, 8).unwrap();
        let rp = lift_piecewise_linear(&p.interpolant(8).unwrap(), 0.4).unwrap();
        let full = rp.hoelder_norm(DEFAULT_PAIR_BUDGET);
        let dyadic = rp.hoelder_norm(10);
        assert!(full.exhaustive);
        assert!(!dyadic.exhaustive);
        assert_eq!(dyadic.pairs, 2 * 256 - 1);
        assert!(dyadic.value <= full.value);
        assert!(dyadic.value > 0.0);
    }

    #[test]
    fn scalar_defect_vanishes() {
        let p = NestedBrownianPath::sample(21, 1.0, 1, 6).unwrap();
        let rp = lift_piecewise_linear(&p.interpolant(6).unwrap(), 0.45).unwrap();
        let t = rp.times();
        for i in 0..t.len() {
            for j in (i + 1)..t.len() {
                let d = rp.geometricity_defect(t[i], t[j]).unwrap();
                assert!(d[0].abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn csv_layout() {
        let pl = PiecewiseLinearPath::new(vec![0.0, 1.0, 2.0], vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0], 2).unwrap();
        let rp = lift_piecewise_linear(&pl, 0.4).unwrap();
        let mut buf = Vec::new();
        rp.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "s,t,x1_1,x1_2,x2_11,x2_12,x2_21,x2_22");
        assert_eq!(lines.next().unwrap(), "0,1,1,0,0.5,0,0,0");
    }
}
