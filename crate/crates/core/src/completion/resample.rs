use std::collections::HashMap;

use crate::geometry::{kdtree::squared_distance, OrientedPointCloud};

/// Drops every point lying within `tol` of an earlier kept point.
pub fn deduplicate(cloud: &OrientedPointCloud, tol: f64) -> OrientedPointCloud {
    assert!(tol > 0.0);
    let cell = |c: f64| (c / tol).floor() as i64;
    let mut buckets: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    let mut kept = Vec::new();
    let tol2 = tol * tol;
    for (i, p) in cloud.points().iter().enumerate() {
        let key = (cell(p.x), cell(p.y), cell(p.z));
        let mut duplicate = false;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = buckets.get(&(key.0 + dx, key.1 + dy, key.2 + dz)) {
                        if bucket
                            .iter()
                            .any(|&j| squared_distance(&cloud.points()[j], p) <= tol2)
                        {
                            duplicate = true;
                            break 'search;
                        }
                    }
                }
            }
        }
        if !duplicate {
            buckets.entry(key).or_default().push(i);
            kept.push(i);
        }
    }
    cloud.subset(&kept)
}

/// Exactly `m` points chosen by farthest-point sampling from index 0.
///
/// Ties go to the lower index. A cloud with fewer than `m` points is padded by
/// repeating its sampling order cyclically.
pub fn farthest_point_sample(cloud: &OrientedPointCloud, m: usize) -> OrientedPointCloud {
    let n = cloud.len();
    if n == 0 || m == 0 {
        return cloud.subset(&[]);
    }
    let take = m.min(n);
    let points = cloud.points();
    let mut order = Vec::with_capacity(m);
    let mut dist = vec![f64::INFINITY; n];
    let mut current = 0;
    for _ in 0..take {
        order.push(current);
        let c = points[current];
        let mut best = 0;
        let mut best_d = -1.0;
        for (i, d) in dist.iter_mut().enumerate() {
            let di = squared_distance(&points[i], &c);
            if di < *d {
                *d = di;
            }
            if *d > best_d {
                best_d = *d;
                best = i;
            }
        }
        current = best;
    }
    for i in 0..m - take {
        order.push(order[i % take]);
    }
    cloud.subset(&order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;

    fn line(n: usize) -> OrientedPointCloud {
        OrientedPointCloud::from_points((0..n).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect())
    }

    #[test]
    fn dedup_keeps_first_occurrences() {
        let cloud = OrientedPointCloud::from_points(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.0005, 0.0, 0.0),
            Point3::new(0.002, 0.0, 0.0),
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.0024, 0.0007, 0.0),
        ]);
        let d = deduplicate(&cloud, 1e-3);
        assert_eq!(d.points(), &[Point3::origin(), Point3::new(0.002, 0.0, 0.0)]);
    }

    #[test]
    fn fps_spreads_points() {
        let s = farthest_point_sample(&line(11), 3);
        assert_eq!(
            s.points(),
            &[Point3::origin(), Point3::new(10.0, 0.0, 0.0), Point3::new(5.0, 0.0, 0.0)]
        );
    }

    #[test]
    fn fps_pads_small_clouds_cyclically() {
        let s = farthest_point_sample(&line(3), 7);
        let xs: Vec<f64> = s.points().iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![0.0, 2.0, 1.0, 0.0, 2.0, 1.0, 0.0]);
    }
}
