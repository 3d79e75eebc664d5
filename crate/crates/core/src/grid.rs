//! Vertex-centered uniform grid on the unit square.

use std::fmt;

use crate::error::{Result, SimError};
use crate::scalar::{fsum, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Edge {
    Left,
    Bottom,
    Right,
    Top,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Left, Edge::Bottom, Edge::Right, Edge::Top];

    pub fn name(self) -> &'static str {
        match self {
            Edge::Left => "left",
            Edge::Bottom => "bottom",
            Edge::Right => "right",
            Edge::Top => "top",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Edge::ALL.into_iter().find(|e| e.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EdgeTag {
    Exposed,
    #[default]
    Isolated,
}

/// Tag of each side of the square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct EdgeTags {
    pub left: EdgeTag,
    pub bottom: EdgeTag,
    pub right: EdgeTag,
    pub top: EdgeTag,
}

impl EdgeTags {
    /// Only the left side exposed to the polluted air.
    pub fn left_exposed() -> Self {
        Self {
            left: EdgeTag::Exposed,
            ..Self::default()
        }
    }

    pub fn all_isolated() -> Self {
        Self::default()
    }

    pub fn get(&self, e: Edge) -> EdgeTag {
        match e {
            Edge::Left => self.left,
            Edge::Bottom => self.bottom,
            Edge::Right => self.right,
            Edge::Top => self.top,
        }
    }

    pub fn set(&mut self, e: Edge, tag: EdgeTag) {
        match e {
            Edge::Left => self.left = tag,
            Edge::Bottom => self.bottom = tag,
            Edge::Right => self.right = tag,
            Edge::Top => self.top = tag,
        }
    }

    pub fn exposed(&self) -> impl Iterator<Item = Edge> + '_ {
        Edge::ALL
            .into_iter()
            .filter(|e| self.get(*e) == EdgeTag::Exposed)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid2D<T> {
    nx: usize,
    ny: usize,
    hx: T,
    hy: T,
    tags: EdgeTags,
}

/// Builds an `nx` by `ny` node grid on `[0,1]^2`.
pub fn build_grid<T: Real>(nx: usize, ny: usize, tags: EdgeTags) -> Result<Grid2D<T>> {
    if nx < 3 || ny < 3 {
        return Err(SimError::GridTooSmall { nx, ny });
    }
    Ok(Grid2D {
        nx,
        ny,
        hx: T::one() / T::from_usize_lossy(nx - 1),
        hy: T::one() / T::from_usize_lossy(ny - 1),
        tags,
    })
}

impl<T: Real> Grid2D<T> {
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> T {
        self.hx
    }

    pub fn hy(&self) -> T {
        self.hy
    }

    pub fn tags(&self) -> &EdgeTags {
        &self.tags
    }

    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn x1(&self, i: usize) -> T {
        // exact at both ends
        if i + 1 == self.nx {
            T::one()
        } else {
            T::from_usize_lossy(i) * self.hx
        }
    }

    #[inline]
    pub fn x2(&self, j: usize) -> T {
        if j + 1 == self.ny {
            T::one()
        } else {
            T::from_usize_lossy(j) * self.hy
        }
    }

    pub fn coords(&self, idx: usize) -> (T, T) {
        let (i, j) = self.ij(idx);
        (self.x1(i), self.x2(j))
    }

    /// Half weight on boundary rows/columns, full weight inside.
    #[inline]
    pub(crate) fn axis_factor(k: usize, n: usize) -> T {
        if k == 0 || k + 1 == n {
            T::half()
        } else {
            T::one()
        }
    }

    /// Trapezoidal quadrature weight (control-volume area) of a node.
    #[inline]
    pub fn node_weight(&self, idx: usize) -> T {
        let (i, j) = self.ij(idx);
        Self::axis_factor(i, self.nx) * Self::axis_factor(j, self.ny) * self.hx * self.hy
    }

    /// Trapezoidal quadrature of a nodal field over the square.
    pub fn integrate(&self, field: &[T]) -> T {
        fsum(field.iter().enumerate().map(|(k, v)| self.node_weight(k) * *v))
    }

    /// Nodes of one side, ordered by increasing free coordinate.
    pub fn edge_nodes(&self, e: Edge) -> Vec<usize> {
        match e {
            Edge::Left => (0..self.ny).map(|j| self.index(0, j)).collect(),
            Edge::Right => (0..self.ny).map(|j| self.index(self.nx - 1, j)).collect(),
            Edge::Bottom => (0..self.nx).map(|i| self.index(i, 0)).collect(),
            Edge::Top => (0..self.nx).map(|i| self.index(i, self.ny - 1)).collect(),
        }
    }

    /// Trace of all exposed sides, in the order left, bottom, right, top.
    pub fn exposed_trace(&self) -> BoundaryTrace<T> {
        let mut points = Vec::new();
        for e in self.tags.exposed() {
            let nodes = self.edge_nodes(e);
            let (h, n) = match e {
                Edge::Left | Edge::Right => (self.hy, self.ny),
                Edge::Bottom | Edge::Top => (self.hx, self.nx),
            };
            for (k, node) in nodes.into_iter().enumerate() {
                let coord = match e {
                    Edge::Left | Edge::Right => self.x2(k),
                    Edge::Bottom | Edge::Top => self.x1(k),
                };
                points.push(TracePoint {
                    node,
                    edge: e,
                    coord,
                    weight: Self::axis_factor(k, n) * h,
                });
            }
        }
        BoundaryTrace { points }
    }
}

/// One quadrature point of the exposed boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint<T> {
    pub node: usize,
    pub edge: Edge,
    /// Arc coordinate along the edge (`x2` on vertical sides, `x1` otherwise).
    pub coord: T,
    /// Trapezoidal arc-length weight.
    pub weight: T,
}

/// Ordered boundary points carrying the surface unknowns.
///
/// A corner shared by two exposed sides appears once per side.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryTrace<T> {
    points: Vec<TracePoint<T>>,
}

impl<T: Real> BoundaryTrace<T> {
    pub fn points(&self) -> &[TracePoint<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.points.iter().map(|p| p.node)
    }

    pub fn weights(&self) -> impl Iterator<Item = T> + '_ {
        self.points.iter().map(|p| p.weight)
    }

    /// Nodal values restricted to the trace.
    pub fn gather(&self, field: &[T]) -> Vec<T> {
        self.points.iter().map(|p| field[p.node]).collect()
    }

    pub fn integrate(&self, values: &[T]) -> T {
        fsum(self.points.iter().zip(values).map(|(p, v)| p.weight * *v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProfileLine<T> {
    /// `x1 = a`
    Vertical(T),
    /// `x2 = b`
    Horizontal(T),
}

impl<T: Real> fmt::Display for ProfileLine<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileLine::Vertical(a) => write!(f, "x1={a}"),
            ProfileLine::Horizontal(b) => write!(f, "x2={b}"),
        }
    }
}

const ALIGN_TOL: f64 = 1e-12;

fn grid_line<T: Real>(pos: T, h: T, n: usize) -> Option<usize> {
    let k = (pos / h).round();
    let idx = k.to_usize()?;
    if idx >= n {
        return None;
    }
    let at = if idx + 1 == n {
        T::one()
    } else {
        T::from_usize_lossy(idx) * h
    };
    ((at - pos).abs() <= T::lit(ALIGN_TOL)).then_some(idx)
}

impl<T: Real> Grid2D<T> {
    /// Node indices along a grid-aligned line, ordered by the free coordinate.
    pub fn line_nodes(&self, line: ProfileLine<T>) -> Result<Vec<usize>> {
        let unaligned = || SimError::UnalignedProfile {
            line: line.to_string(),
        };
        match line {
            ProfileLine::Vertical(a) => {
                let i = grid_line(a, self.hx, self.nx).ok_or_else(unaligned)?;
                Ok((0..self.ny).map(|j| self.index(i, j)).collect())
            }
            ProfileLine::Horizontal(b) => {
                let j = grid_line(b, self.hy, self.ny).ok_or_else(unaligned)?;
                Ok((0..self.nx).map(|i| self.index(i, j)).collect())
            }
        }
    }
}

/// Samples a nodal field along a grid line as `(free coordinate, value)`.
pub fn extract_profile<T: Real>(
    field: &[T],
    grid: &Grid2D<T>,
    line: ProfileLine<T>,
) -> Result<Vec<(T, T)>> {
    if field.len() != grid.n_nodes() {
        return Err(SimError::Dimension {
            what: "profile field",
            expected: grid.n_nodes(),
            got: field.len(),
        });
    }
    let nodes = grid.line_nodes(line)?;
    Ok(nodes
        .into_iter()
        .map(|n| {
            let (x1, x2) = grid.coords(n);
            let free = match line {
                ProfileLine::Vertical(_) => x2,
                ProfileLine::Horizontal(_) => x1,
            };
            (free, field[n])
        })
        .collect())
}
