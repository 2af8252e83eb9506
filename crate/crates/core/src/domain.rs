//! Discrete search domains, equal-volume sub-regions and agent assignment.
//!
//! Sub-regions are axis-aligned boxes obtained by halving the bounding box
//! repeatedly, cycling through the dimensions in index order. Each split is
//! half-open: a point lying exactly on a split plane belongs to the upper box,
//! and only the global upper face of the bounding box is closed.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How many grid points to lay down.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridSize {
    /// Total point count. Only meaningful for one-dimensional domains.
    Total(usize),
    /// Points per dimension, forming a tensor grid.
    PerDim(usize),
}

/// A finite candidate set inside a hyper-rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    dims: usize,
    bounds: Vec<(f64, f64)>,
    /// Row-major `len × dims` coordinates.
    coords: Vec<f64>,
}

fn check_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::invalid("domain needs at least one dimension"));
    }
    for (d, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::invalid(format!(
                "bounds for dimension {d} are inverted or empty: [{lo}, {hi}]"
            )));
        }
    }
    Ok(())
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

impl Domain {
    /// Equally spaced grid including both endpoints (D = 1) or a tensor grid
    /// whose first dimension varies slowest (D > 1).
    pub fn grid(bounds: &[(f64, f64)], size: GridSize) -> Result<Self> {
        check_bounds(bounds)?;
        let dims = bounds.len();
        let per_dim = match size {
            GridSize::Total(n) if dims == 1 => n,
            GridSize::Total(_) => {
                return Err(Error::invalid(
                    "a total point count only defines a grid in one dimension; use PerDim",
                ))
            }
            GridSize::PerDim(n) => n,
        };
        if per_dim == 0 {
            return Err(Error::invalid("grid needs at least one point"));
        }
        let axes: Vec<Vec<f64>> = bounds
            .iter()
            .map(|&(lo, hi)| linspace(lo, hi, per_dim))
            .collect();
        let total = per_dim
            .checked_pow(dims as u32)
            .ok_or_else(|| Error::invalid("grid size overflows"))?;
        let mut coords = Vec::with_capacity(total * dims);
        for id in 0..total {
            let mut rem = id;
            let mut point = vec![0.0; dims];
            for d in (0..dims).rev() {
                point[d] = axes[d][rem % per_dim];
                rem /= per_dim;
            }
            coords.extend_from_slice(&point);
        }
        Ok(Self {
            dims,
            bounds: bounds.to_vec(),
            coords,
        })
    }

    /// The unit interval grid used by the synthetic experiments.
    pub fn unit_interval(points: usize) -> Result<Self> {
        Self::grid(&[(0.0, 1.0)], GridSize::Total(points))
    }

    /// Explicit candidate list. Every point must lie inside `bounds`.
    pub fn from_points(bounds: &[(f64, f64)], points: &[Vec<f64>]) -> Result<Self> {
        check_bounds(bounds)?;
        if points.is_empty() {
            return Err(Error::invalid("grid needs at least one point"));
        }
        let dims = bounds.len();
        let mut coords = Vec::with_capacity(points.len() * dims);
        for (id, p) in points.iter().enumerate() {
            if p.len() != dims {
                return Err(Error::invalid(format!(
                    "point {id} has {} coordinates, expected {dims}",
                    p.len()
                )));
            }
            if p.iter()
                .zip(bounds)
                .any(|(&x, &(lo, hi))| !(lo..=hi).contains(&x))
            {
                return Err(Error::invalid(format!(
                    "point {id} lies outside the bounds"
                )));
            }
            coords.extend_from_slice(p);
        }
        Ok(Self {
            dims,
            bounds: bounds.to_vec(),
            coords,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, id: usize) -> &[f64] {
        &self.coords[id * self.dims..(id + 1) * self.dims]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dims)
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| hi - lo).product()
    }
}

/// One side of a box along a single dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    /// Whether `hi` itself belongs to the interval.
    pub upper_closed: bool,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && (x < self.hi || (self.upper_closed && x == self.hi))
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub intervals: Vec<Interval>,
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.intervals.iter().zip(x).all(|(iv, &v)| iv.contains(v))
    }

    pub fn volume(&self) -> f64 {
        self.intervals.iter().map(Interval::width).product()
    }
}

/// `P` disjoint boxes covering the domain's bounding box, plus a lookup from
/// grid id to the box that contains it.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    regions: Vec<Region>,
    region_of_point: Vec<usize>,
}

#[derive(Serialize)]
struct RegionLayout {
    index: usize,
    intervals: Vec<[f64; 2]>,
    upper_closed: Vec<bool>,
}

impl Partition {
    /// Splits the bounding box into `regions` equal-volume boxes.
    ///
    /// Powers of two are realised by cyclic axis halving. Other counts are
    /// only accepted for one-dimensional domains, where the interval is cut
    /// into equal pieces.
    pub fn new(domain: &Domain, regions: usize) -> Result<Self> {
        if regions == 0 {
            return Err(Error::invalid("number of sub-regions must be at least 1"));
        }
        let boxes = if regions.is_power_of_two() {
            halve_cyclically(domain.bounds(), regions)
        } else if domain.dims() == 1 {
            split_interval(domain.bounds()[0], regions)
        } else {
            return Err(Error::invalid(format!(
                "{regions} sub-regions requested for a {}-dimensional domain; \
                 only powers of two are supported above one dimension",
                domain.dims()
            )));
        };
        let region_of_point = domain
            .points()
            .map(|x| locate(&boxes, x).expect("grid points lie inside the bounding box"))
            .collect();
        Ok(Self {
            regions: boxes,
            region_of_point,
        })
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    /// Region index of a grid point.
    pub fn region_of_point(&self, id: usize) -> usize {
        self.region_of_point[id]
    }

    pub fn region_of_points(&self) -> &[usize] {
        &self.region_of_point
    }

    /// Grid ids falling inside region `i`, in increasing order.
    pub fn points_in(&self, i: usize) -> Vec<usize> {
        self.region_of_point
            .iter()
            .enumerate()
            .filter_map(|(id, &r)| (r == i).then_some(id))
            .collect()
    }

    /// Region containing an arbitrary point of the bounding box.
    pub fn region_of(&self, x: &[f64]) -> Result<usize> {
        locate(&self.regions, x)
            .ok_or_else(|| Error::invalid(format!("point {x:?} lies outside the partitioned box")))
    }

    /// JSON layout: one entry per region with its per-dimension intervals.
    pub fn to_json(&self) -> serde_json::Value {
        let layout: Vec<RegionLayout> = self
            .regions
            .iter()
            .enumerate()
            .map(|(index, r)| RegionLayout {
                index,
                intervals: r.intervals.iter().map(|iv| [iv.lo, iv.hi]).collect(),
                upper_closed: r.intervals.iter().map(|iv| iv.upper_closed).collect(),
            })
            .collect();
        serde_json::json!({ "regions": layout })
    }
}

fn locate(boxes: &[Region], x: &[f64]) -> Option<usize> {
    boxes.iter().position(|r| r.contains(x))
}

fn halve_cyclically(bounds: &[(f64, f64)], regions: usize) -> Vec<Region> {
    let root = Region {
        intervals: bounds
            .iter()
            .map(|&(lo, hi)| Interval {
                lo,
                hi,
                upper_closed: true,
            })
            .collect(),
    };
    let levels = regions.trailing_zeros() as usize;
    let mut boxes = vec![root];
    for level in 0..levels {
        let d = level % bounds.len();
        boxes = boxes
            .into_iter()
            .flat_map(|b| {
                let iv = b.intervals[d];
                let mid = 0.5 * (iv.lo + iv.hi);
                let mut low = b.clone();
                let mut high = b;
                low.intervals[d] = Interval {
                    lo: iv.lo,
                    hi: mid,
                    upper_closed: false,
                };
                high.intervals[d] = Interval { lo: mid, ..iv };
                [low, high]
            })
            .collect();
    }
    boxes
}

fn split_interval((lo, hi): (f64, f64), pieces: usize) -> Vec<Region> {
    let width = (hi - lo) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let last = k + 1 == pieces;
            Region {
                intervals: vec![Interval {
                    lo: lo + width * k as f64,
                    hi: if last {
                        hi
                    } else {
                        lo + width * (k + 1) as f64
                    },
                    upper_closed: last,
                }],
            }
        })
        .collect()
}

/// Which sub-region each agent explores at initialization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    region_of_agent: Vec<usize>,
    counts: Vec<usize>,
}

impl Assignment {
    /// Deals a random permutation of the agents round-robin into the regions,
    /// so region counts differ by at most one.
    pub fn random<R: Rng + ?Sized>(agents: usize, regions: usize, rng: &mut R) -> Result<Self> {
        if agents == 0 || regions == 0 {
            return Err(Error::invalid("need at least one agent and one region"));
        }
        let mut order: Vec<usize> = (0..agents).collect();
        order.shuffle(rng);
        let mut region_of_agent = vec![0; agents];
        let mut counts = vec![0; regions];
        for (slot, &agent) in order.iter().enumerate() {
            let r = slot % regions;
            region_of_agent[agent] = r;
            counts[r] += 1;
        }
        Ok(Self {
            region_of_agent,
            counts,
        })
    }

    pub fn region_of_agent(&self, agent: usize) -> usize {
        self.region_of_agent[agent]
    }

    pub fn agents(&self) -> usize {
        self.region_of_agent.len()
    }

    pub fn regions(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn is_assigned(&self, agent: usize, region: usize) -> bool {
        self.region_of_agent[agent] == region
    }
}
