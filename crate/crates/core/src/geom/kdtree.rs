//! Exact k-nearest-neighbor and radius search over a fixed point set.
//!
//! Results are ordered by `(squared distance, index)`, so equal distances
//! resolve to the lower point index exactly as a brute-force scan would.

use std::cmp::Ordering;

use super::{Point3, PointCloud};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Read-only kd-tree over a point cloud.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Point3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl Candidate {
    #[inline]
    fn cmp_key(&self, other: &Candidate) -> Ordering {
        self.d2
            .partial_cmp(&other.d2)
            .unwrap_or(Ordering::Equal)
            .then(self.index.cmp(&other.index))
    }
}

/// Fixed-capacity list of the best candidates seen so far, kept sorted.
struct Best {
    k: usize,
    items: Vec<Candidate>,
}

impl Best {
    fn new(k: usize) -> Self {
        Self {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    #[inline]
    fn full(&self) -> bool {
        self.items.len() >= self.k
    }

    #[inline]
    fn worst_d2(&self) -> f64 {
        self.items.last().map_or(f64::INFINITY, |c| c.d2)
    }

    #[inline]
    fn offer(&mut self, cand: Candidate) {
        if self.full() {
            let worst = self.items.last().expect("k >= 1");
            if cand.cmp_key(worst) != Ordering::Less {
                return;
            }
        }
        let pos = self
            .items
            .partition_point(|c| c.cmp_key(&cand) == Ordering::Less);
        self.items.insert(pos, cand);
        if self.items.len() > self.k {
            self.items.pop();
        }
    }
}

#[inline]
pub(crate) fn dist2(a: &Point3, b: &Point3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

impl SpatialIndex {
    pub fn build(cloud: &PointCloud) -> Self {
        Self::from_points(cloud.points().to_vec())
    }

    pub fn from_points(points: Vec<Point3>) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        if !points.is_empty() {
            let n = points.len();
            Self::build_node(&points, &mut order, 0, n, &mut nodes);
        }
        Self {
            points,
            order,
            nodes,
        }
    }

    fn build_node(
        points: &[Point3],
        order: &mut [usize],
        start: usize,
        end: usize,
        nodes: &mut Vec<Node>,
    ) -> usize {
        let id = nodes.len();
        nodes.push(Node::Leaf { start, end });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let slice = &mut order[start..end];
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in slice.iter() {
            for a in 0..3 {
                lo[a] = lo[a].min(points[i][a]);
                hi[a] = hi[a].max(points[i][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        if hi[axis] - lo[axis] <= 0.0 {
            // all points coincide
            return id;
        }
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
        let value = points[slice[mid]][axis];
        let left = Self::build_node(points, order, start, start + mid, nodes);
        let right = Self::build_node(points, order, start + mid, end, nodes);
        nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    /// The `k` nearest points as `(index, distance)`, ascending; all points if `k > len`.
    pub fn knn(&self, query: &Point3, k: usize) -> Result<Vec<(usize, f64)>> {
        if self.is_empty() {
            return Err(Error::Empty("spatial index"));
        }
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let mut best = Best::new(k.min(self.len()));
        self.knn_node(0, query, &mut best);
        Ok(best
            .items
            .into_iter()
            .map(|c| (c.index, c.d2.sqrt()))
            .collect())
    }

    /// Nearest point `(index, distance)`.
    pub fn nearest(&self, query: &Point3) -> Result<(usize, f64)> {
        Ok(self.knn(query, 1)?[0])
    }

    fn knn_node(&self, node: usize, q: &Point3, best: &mut Best) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    best.offer(Candidate {
                        d2: dist2(q, &self.points[i]),
                        index: i,
                    });
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.knn_node(near, q, best);
                // `<=` keeps equal-distance points with lower indices reachable.
                if !best.full() || diff * diff <= best.worst_d2() {
                    self.knn_node(far, q, best);
                }
            }
        }
    }

    /// All points within `radius` (inclusive) as `(index, distance)`, ascending.
    pub fn radius(&self, query: &Point3, radius: f64) -> Vec<(usize, f64)> {
        let mut out: Vec<Candidate> = Vec::new();
        if self.is_empty() || !(radius >= 0.0) {
            return Vec::new();
        }
        let r2 = radius * radius;
        self.radius_node(0, query, r2, &mut out);
        out.sort_by(|a, b| a.cmp_key(b));
        out.into_iter().map(|c| (c.index, c.d2.sqrt())).collect()
    }

    /// All points within `radius` (inclusive) in traversal order.
    pub fn radius_unsorted(&self, query: &Point3, radius: f64) -> Vec<(usize, f64)> {
        let mut out: Vec<Candidate> = Vec::new();
        if self.is_empty() || !(radius >= 0.0) {
            return Vec::new();
        }
        self.radius_node(0, query, radius * radius, &mut out);
        out.into_iter().map(|c| (c.index, c.d2.sqrt())).collect()
    }

    /// Number of points within `radius`, without materializing them.
    pub fn count_within(&self, query: &Point3, radius: f64) -> usize {
        let mut out = Vec::new();
        if self.is_empty() {
            return 0;
        }
        self.radius_node(0, query, radius * radius, &mut out);
        out.len()
    }

    fn radius_node(&self, node: usize, q: &Point3, r2: f64, out: &mut Vec<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d2 = dist2(q, &self.points[i]);
                    if d2 <= r2 {
                        out.push(Candidate { d2, index: i });
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.radius_node(near, q, r2, out);
                if diff * diff <= r2 {
                    self.radius_node(far, q, r2, out);
                }
            }
        }
    }
}

/// Free-function form of [`SpatialIndex::knn`].
pub fn knn_query(index: &SpatialIndex, query: &Point3, k: usize) -> Result<Vec<(usize, f64)>> {
    index.knn(query, k)
}
