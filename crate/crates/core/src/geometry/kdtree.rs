//! Static k-d tree over a point set.
//!
//! Neighbors are ordered by `(squared distance, index)`, so results are exactly
//! those of an exhaustive scan sorted with the same key, ties included.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::Point3;

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
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3>,
    order: Vec<usize>,
    root: Option<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[inline]
pub fn squared_distance(a: &Point3, b: &Point3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

impl KdTree {
    pub fn new(points: &[Point3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = if points.is_empty() {
            None
        } else {
            let n = order.len();
            Some(build(points, &mut order, 0, n))
        };
        Self {
            points: points.to_vec(),
            order,
            root,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Up to `k` nearest indices with their squared distances, nearest first.
    pub fn knn_with_distances(&self, query: &Point3, k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.len());
        if k == 0 {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        if let Some(root) = &self.root {
            self.search(root, query, k, &mut heap);
        }
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| (c.index, c.dist2)).collect()
    }

    pub fn knn(&self, query: &Point3, k: usize) -> Vec<usize> {
        self.knn_with_distances(query, k)
            .into_iter()
            .map(|(i, _)| i)
            .collect()
    }

    /// Nearest index and its squared distance.
    pub fn nearest(&self, query: &Point3) -> Option<(usize, f64)> {
        self.knn_with_distances(query, 1).into_iter().next()
    }

    /// Whether any point lies within `radius` (inclusive) of `query`.
    pub fn any_within(&self, query: &Point3, radius: f64) -> bool {
        self.nearest(query)
            .is_some_and(|(_, d2)| d2 <= radius * radius)
    }

    fn search(&self, node: &Node, q: &Point3, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    let cand = Candidate {
                        dist2: squared_distance(&self.points[i], q),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, k, heap);
                // Equal plane distance must still be visited: a tie on distance
                // can be won by a lower index on the far side.
                if heap.len() < k || diff * diff <= heap.peek().expect("heap is full").dist2 {
                    self.search(far, q, k, heap);
                }
            }
        }
    }
}

fn build(points: &[Point3], order: &mut [usize], start: usize, end: usize) -> Node {
    if end - start <= LEAF_SIZE {
        return Node::Leaf { start, end };
    }
    let slice = &mut order[start..end];
    let (lo, hi) = slice.iter().fold(
        (points[slice[0]], points[slice[0]]),
        |(lo, hi), &i| (lo.inf(&points[i]), hi.sup(&points[i])),
    );
    let extent = hi - lo;
    let axis = extent.imax();
    if extent[axis] == 0.0 {
        return Node::Leaf { start, end };
    }
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let value = points[slice[mid]][axis];
    // Points equal to the split value may land on either side; the search
    // visits the far side whenever the plane distance is within the bound.
    let left = build(points, order, start, start + mid);
    let right = build(points, order, start + mid, end);
    Node::Split {
        axis,
        value,
        left: Box::new(left),
        right: Box::new(right),
    }
}
