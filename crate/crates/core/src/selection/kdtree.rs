//! Static 3D k-d tree for k-nearest-neighbor distance queries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Vector3;

pub struct KdTree<'a> {
    points: &'a [Vector3<f64>],
    /// Point indices arranged as an implicit balanced tree: the median of
    /// each range is the node, split on `depth % 3`.
    order: Vec<usize>,
}

#[derive(PartialEq)]
struct Candidate(f64);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Vector3<f64>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        build(points, &mut order, 0);
        Self { points, order }
    }

    /// Distances from point `index` to its `k` nearest other points,
    /// ascending. Fewer are returned if the tree is smaller.
    pub fn knn_distances(&self, index: usize, k: usize) -> Vec<f64> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 {
            self.search(&self.order, 0, index, k, &mut heap);
        }
        let mut d: Vec<f64> = heap.into_iter().map(|c| c.0.sqrt()).collect();
        d.sort_by(f64::total_cmp);
        d
    }

    fn search(&self, range: &[usize], depth: usize, query: usize, k: usize, heap: &mut BinaryHeap<Candidate>) {
        if range.is_empty() {
            return;
        }
        let mid = range.len() / 2;
        let node = range[mid];
        let q = &self.points[query];
        if node != query {
            let d = (self.points[node] - q).norm_squared();
            if heap.len() < k {
                heap.push(Candidate(d));
            } else if d < heap.peek().expect("heap is full").0 {
                heap.pop();
                heap.push(Candidate(d));
            }
        }
        let axis = depth % 3;
        let diff = q[axis] - self.points[node][axis];
        let (near, far) = if diff < 0.0 { (&range[..mid], &range[mid + 1..]) } else { (&range[mid + 1..], &range[..mid]) };
        self.search(near, depth + 1, query, k, heap);
        if heap.len() < k || diff * diff <= heap.peek().expect("heap is nonempty").0 {
            self.search(far, depth + 1, query, k, heap);
        }
    }
}

fn build(points: &[Vector3<f64>], range: &mut [usize], depth: usize) {
    if range.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = range.len() / 2;
    range.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let (lo, rest) = range.split_at_mut(mid);
    build(points, lo, depth + 1);
    build(points, &mut rest[1..], depth + 1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn brute(points: &[Vector3<f64>], i: usize, k: usize) -> Vec<f64> {
        let mut d: Vec<f64> = points.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| (p - points[i]).norm()).collect();
        d.sort_by(f64::total_cmp);
        d.truncate(k);
        d
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<_> = (0..600).map(|_| Vector3::new(rng.random::<f64>(), rng.random::<f64>() * 2.0, rng.random::<f64>() * 0.3)).collect();
        let tree = KdTree::new(&pts);
        for i in (0..pts.len()).step_by(13) {
            assert_eq!(tree.knn_distances(i, 16), brute(&pts, i, 16));
        }
    }

    #[test]
    fn ties_and_duplicates() {
        let mut pts = Vec::new();
        for x in 0..6 {
            for y in 0..6 {
                pts.push(Vector3::new(x as f64, y as f64, 0.0));
            }
        }
        pts.push(pts[7]);
        let tree = KdTree::new(&pts);
        for i in 0..pts.len() {
            assert_eq!(tree.knn_distances(i, 16), brute(&pts, i, 16));
        }
    }

    #[test]
    fn small_trees() {
        let pts = vec![Vector3::new(0.0, 0.0, 0.0), Vector3::new(3.0, 4.0, 0.0)];
        let tree = KdTree::new(&pts);
        assert_eq!(tree.knn_distances(0, 5), vec![5.0]);
        assert!(tree.knn_distances(0, 0).is_empty());
        let one = [Vector3::zeros()];
        assert!(KdTree::new(&one).knn_distances(0, 3).is_empty());
    }
}
