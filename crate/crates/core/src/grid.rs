//! Product collocation grids, interior/boundary classification and fill distance.

use std::io::Write;

use crate::error::{Error, Result};
use crate::tensor::{flat_index, multi_index};

/// How to build one grid axis.
#[derive(Debug, Clone, PartialEq)]
pub enum AxisSpec {
    /// `count` evenly spaced points from `lower` to `upper`, both included.
    Uniform { count: usize, lower: f64, upper: f64 },
    /// Coordinates used verbatim.
    Explicit(Vec<f64>),
}

impl AxisSpec {
    pub fn uniform(count: usize, lower: f64, upper: f64) -> Self {
        AxisSpec::Uniform {
            count,
            lower,
            upper,
        }
    }
}

/// Evenly spaced points including both endpoints.
pub fn linspace(count: usize, lower: f64, upper: f64) -> Vec<f64> {
    if count == 1 {
        return vec![lower];
    }
    let step = (upper - lower) / (count - 1) as f64;
    (0..count)
        .map(|i| {
            if i + 1 == count {
                upper
            } else {
                lower + step * i as f64
            }
        })
        .collect()
}

/// Cartesian product grid `s^1 × … × s^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Vec<f64>>,
    shape: Vec<usize>,
}

pub fn build_grid(specs: &[AxisSpec]) -> Result<Grid> {
    if specs.is_empty() {
        return Err(Error::Parameter("a grid needs at least one axis".into()));
    }
    let axes = specs
        .iter()
        .enumerate()
        .map(|(j, spec)| match spec {
            AxisSpec::Uniform {
                count,
                lower,
                upper,
            } => {
                if *count < 2 {
                    return Err(Error::Parameter(format!(
                        "axis {j} needs at least 2 points, got {count}"
                    )));
                }
                if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
                    return Err(Error::Parameter(format!(
                        "axis {j} bounds must satisfy lower < upper, got [{lower}, {upper}]"
                    )));
                }
                Ok(linspace(*count, *lower, *upper))
            }
            AxisSpec::Explicit(coords) => Ok(coords.clone()),
        })
        .collect::<Result<Vec<_>>>()?;
    Grid::from_axes(axes)
}

impl Grid {
    pub fn from_axes(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Parameter("a grid needs at least one axis".into()));
        }
        for (j, axis) in axes.iter().enumerate() {
            if axis.len() < 2 {
                return Err(Error::Parameter(format!(
                    "axis {j} needs at least 2 points, got {}",
                    axis.len()
                )));
            }
            if axis.iter().any(|x| !x.is_finite()) || axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Parameter(format!(
                    "axis {j} coordinates must be finite and strictly increasing"
                )));
            }
        }
        let shape = axes.iter().map(Vec::len).collect();
        Ok(Self { axes, shape })
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Total number of grid points `M`.
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn axis(&self, j: usize) -> &[f64] {
        &self.axes[j]
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn lower(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a[0]).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a[a.len() - 1]).collect()
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        flat_index(&self.shape, index)
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        multi_index(&self.shape, flat)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.ndim()];
        self.point_into(flat, &mut x);
        x
    }

    pub fn point_into(&self, mut flat: usize, out: &mut [f64]) {
        for j in (0..self.ndim()).rev() {
            let m = self.shape[j];
            out[j] = self.axes[j][flat % m];
            flat /= m;
        }
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    /// Uniform lattice over the bounding box with `factor·(m_j − 1) + 1`
    /// points per axis.
    pub fn refined(&self, factor: usize) -> Grid {
        let axes = self
            .axes
            .iter()
            .map(|a| linspace(factor.max(1) * (a.len() - 1) + 1, a[0], a[a.len() - 1]))
            .collect();
        Grid::from_axes(axes).expect("refinement of a valid grid is valid")
    }
}

/// One face of the bounding box: `axis` at its lower or upper end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    pub axis: usize,
    pub upper: bool,
}

impl Face {
    pub fn lower(axis: usize) -> Self {
        Face { axis, upper: false }
    }

    pub fn upper(axis: usize) -> Self {
        Face { axis, upper: true }
    }

    /// Every face of a `d`-dimensional box.
    pub fn all(d: usize) -> Vec<Face> {
        (0..d)
            .flat_map(|axis| [Face::lower(axis), Face::upper(axis)])
            .collect()
    }
}

/// Where boundary residuals are evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundarySites {
    /// Flat indices of grid points.
    Grid(Vec<usize>),
    /// Explicit coordinates, generally not on the grid.
    Points(Vec<Vec<f64>>),
}

/// Split of the collocation sites into interior residual points and boundary points.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainClassification {
    shape: Vec<usize>,
    interior_mask: Vec<bool>,
    interior: Vec<usize>,
    boundary: BoundarySites,
    boundary_points: Vec<Vec<f64>>,
}

impl DomainClassification {
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn interior_mask(&self) -> &[bool] {
        &self.interior_mask
    }

    /// Flat indices of interior residual sites, in increasing order.
    pub fn interior_sites(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary(&self) -> &BoundarySites {
        &self.boundary
    }

    /// Coordinates of all boundary sites.
    pub fn boundary_points(&self) -> &[Vec<f64>] {
        &self.boundary_points
    }

    /// `M_Ω`.
    pub fn interior_count(&self) -> usize {
        self.interior.len()
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary_points.len()
    }

    /// Copy of this classification with the interior sites visited in `order`
    /// (a permutation of [`Self::interior_sites`]).
    pub fn with_interior_order(&self, order: Vec<usize>) -> Result<Self> {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted != self.interior {
            return Err(Error::Input(
                "interior order is not a permutation of the interior sites".into(),
            ));
        }
        Ok(Self {
            interior: order,
            ..self.clone()
        })
    }

    /// Plain-text dump of the classification for inspection.
    ///
    /// Lines: `axis<j>,<coords…>` per axis, then `point,<flat>,<coords…>,<interior>,<boundary>`
    /// per grid point, then `boundary_point,<coords…>` for off-grid boundary samples.
    pub fn write_csv(&self, grid: &Grid, mut out: impl Write) -> Result<()> {
        for (j, axis) in grid.axes().iter().enumerate() {
            let coords: Vec<String> = axis.iter().map(|x| format!("{x}")).collect();
            writeln!(out, "axis{j},{}", coords.join(","))?;
        }
        let on_grid: Vec<bool> = match &self.boundary {
            BoundarySites::Grid(idx) => {
                let mut mask = vec![false; grid.len()];
                for &k in idx {
                    mask[k] = true;
                }
                mask
            }
            BoundarySites::Points(_) => vec![false; grid.len()],
        };
        for k in 0..grid.len() {
            let coords: Vec<String> = grid.point(k).iter().map(|x| format!("{x}")).collect();
            writeln!(
                out,
                "point,{k},{},{},{}",
                coords.join(","),
                u8::from(self.interior_mask[k]),
                u8::from(on_grid[k])
            )?;
        }
        if let BoundarySites::Points(points) = &self.boundary {
            for p in points {
                let coords: Vec<String> = p.iter().map(|x| format!("{x}")).collect();
                writeln!(out, "boundary_point,{}", coords.join(","))?;
            }
        }
        Ok(())
    }
}

/// Box domain: every grid point with an extremal index is a boundary point.
pub fn classify_box(grid: &Grid) -> DomainClassification {
    classify_box_faces(grid, &Face::all(grid.ndim())).expect("all faces are valid")
}

/// Box domain where only `faces` carry boundary conditions; grid points on
/// the remaining faces are interior residual sites.
pub fn classify_box_faces(grid: &Grid, faces: &[Face]) -> Result<DomainClassification> {
    if let Some(f) = faces.iter().find(|f| f.axis >= grid.ndim()) {
        return Err(Error::Config(format!(
            "face on axis {} for a {}-dimensional grid",
            f.axis,
            grid.ndim()
        )));
    }
    let shape = grid.shape().to_vec();
    let mut interior_mask = vec![true; grid.len()];
    let mut boundary = Vec::new();
    for (k, slot) in interior_mask.iter_mut().enumerate() {
        let idx = grid.multi_index(k);
        let on_face = faces.iter().any(|f| {
            let target = if f.upper { shape[f.axis] - 1 } else { 0 };
            idx[f.axis] == target
        });
        if on_face {
            *slot = false;
            boundary.push(k);
        }
    }
    let interior: Vec<usize> = (0..grid.len()).filter(|&k| interior_mask[k]).collect();
    if interior.is_empty() || boundary.is_empty() {
        return Err(Error::Config(format!(
            "grid {shape:?} leaves {} interior and {} boundary points",
            interior.len(),
            boundary.len()
        )));
    }
    let boundary_points = boundary.iter().map(|&k| grid.point(k)).collect();
    Ok(DomainClassification {
        shape,
        interior_mask,
        interior,
        boundary: BoundarySites::Grid(boundary),
        boundary_points,
    })
}

/// Irregular domain on a virtual grid: interior sites are the grid points
/// where `membership` holds; boundary residuals use `boundary_sample`.
pub fn classify_region(
    grid: &Grid,
    membership: impl Fn(&[f64]) -> bool,
    boundary_sample: Vec<Vec<f64>>,
) -> Result<DomainClassification> {
    if boundary_sample.is_empty() {
        return Err(Error::Config("boundary sample is empty".into()));
    }
    if let Some(p) = boundary_sample.iter().find(|p| p.len() != grid.ndim()) {
        return Err(Error::Config(format!(
            "boundary point {p:?} does not have {} coordinates",
            grid.ndim()
        )));
    }
    let mut x = vec![0.0; grid.ndim()];
    let interior_mask: Vec<bool> = (0..grid.len())
        .map(|k| {
            grid.point_into(k, &mut x);
            membership(&x)
        })
        .collect();
    let interior: Vec<usize> = (0..grid.len()).filter(|&k| interior_mask[k]).collect();
    if interior.is_empty() {
        return Err(Error::Config(
            "no grid point lies inside the domain".into(),
        ));
    }
    Ok(DomainClassification {
        shape: grid.shape().to_vec(),
        interior_mask,
        interior,
        boundary_points: boundary_sample.clone(),
        boundary: BoundarySites::Points(boundary_sample),
    })
}

/// `max_{x ∈ sample} min_{c ∈ collocation} |x − c|`.
///
/// With a finite `domain_sample` this is a lower bound on the continuum fill
/// distance; [`Grid::refined`] with factor 4 is the usual sample.
pub fn fill_distance(collocation: &[Vec<f64>], domain_sample: &[Vec<f64>]) -> Result<f64> {
    if collocation.is_empty() || domain_sample.is_empty() {
        return Err(Error::Parameter(
            "fill distance needs non-empty collocation and sample sets".into(),
        ));
    }
    let d = collocation[0].len();
    if collocation
        .iter()
        .chain(domain_sample)
        .any(|p| p.len() != d)
    {
        return Err(Error::Parameter("mixed point dimensions".into()));
    }
    let index = BucketIndex::new(collocation);
    Ok(domain_sample
        .iter()
        .map(|x| index.nearest_sq(x).sqrt())
        .fold(0.0, f64::max))
}

/// Uniform bucket grid for nearest-neighbour queries.
struct BucketIndex<'a> {
    points: &'a [Vec<f64>],
    lower: Vec<f64>,
    cell: Vec<f64>,
    counts: Vec<usize>,
    buckets: Vec<Vec<usize>>,
}

impl<'a> BucketIndex<'a> {
    fn new(points: &'a [Vec<f64>]) -> Self {
        let d = points[0].len();
        let mut lower = vec![f64::INFINITY; d];
        let mut upper = vec![f64::NEG_INFINITY; d];
        for p in points {
            for j in 0..d {
                lower[j] = lower[j].min(p[j]);
                upper[j] = upper[j].max(p[j]);
            }
        }
        let per_axis = ((points.len() as f64).powf(1.0 / d as f64).ceil() as usize).max(1);
        let counts = vec![per_axis; d];
        let cell: Vec<f64> = (0..d)
            .map(|j| ((upper[j] - lower[j]) / per_axis as f64).max(f64::MIN_POSITIVE))
            .collect();
        let mut buckets = vec![Vec::new(); counts.iter().product()];
        let mut index = Self {
            points,
            lower,
            cell,
            counts,
            buckets: Vec::new(),
        };
        for (i, p) in points.iter().enumerate() {
            let b = index.bucket_of(p);
            buckets[flat_index(&index.counts, &b)].push(i);
        }
        index.buckets = buckets;
        index
    }

    fn bucket_of(&self, x: &[f64]) -> Vec<usize> {
        (0..x.len())
            .map(|j| {
                let c = ((x[j] - self.lower[j]) / self.cell[j]).floor();
                c.clamp(0.0, (self.counts[j] - 1) as f64) as usize
            })
            .collect()
    }

    fn nearest_sq(&self, x: &[f64]) -> f64 {
        let d = x.len();
        let home: Vec<isize> = self.bucket_of(x).iter().map(|&c| c as isize).collect();
        let max_ring = *self.counts.iter().max().unwrap() as isize;
        let min_cell = self.cell.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut best = f64::INFINITY;
        for ring in 0..=max_ring {
            // Unvisited buckets are at least (ring - 1) cells away from x.
            let guaranteed = (ring - 1).max(0) as f64 * min_cell;
            if best <= guaranteed * guaranteed {
                break;
            }
            self.visit_shell(&home, ring, d, &mut |i| {
                let p = &self.points[i];
                let dist: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                if dist < best {
                    best = dist;
                }
            });
        }
        best
    }

    /// Calls `f` for every point in buckets at Chebyshev distance exactly `ring` from `home`.
    fn visit_shell(&self, home: &[isize], ring: isize, d: usize, f: &mut impl FnMut(usize)) {
        let mut offset = vec![-ring; d];
        loop {
            if offset.iter().any(|o| o.abs() == ring) || ring == 0 {
                let cell: Option<Vec<usize>> = (0..d)
                    .map(|j| {
                        let c = home[j] + offset[j];
                        (c >= 0 && c < self.counts[j] as isize).then_some(c as usize)
                    })
                    .collect();
                if let Some(cell) = cell {
                    for &i in &self.buckets[flat_index(&self.counts, &cell)] {
                        f(i);
                    }
                }
            }
            // odometer increment
            let mut j = d;
            loop {
                if j == 0 {
                    return;
                }
                j -= 1;
                if offset[j] < ring {
                    offset[j] += 1;
                    break;
                }
                offset[j] = -ring;
            }
        }
    }
}
