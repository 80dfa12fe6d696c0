use rand::Rng;

use super::cluster::{layer_from_clusters, Cluster};
use super::enumerate::{check_nonempty, expand};
use super::{Layer, SpaceKind, StateSpace};
use crate::error::Result;
use crate::instance::Problem;
use crate::ode::Dynamics;
use crate::restrictions::Filtered;
use crate::rng::{stream, Purpose};

const MAX_ITERATIONS: usize = 50;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = dist2(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Seeded k-means++ initialization followed by Lloyd iterations.
///
/// Returns a label per point; labels are dense in `0..k'` with `k' ≤ k`
/// (fewer when there are fewer distinct points than requested clusters).
pub fn kmeans_partition<R: Rng + ?Sized>(
    points: &[f64],
    dim: usize,
    k: usize,
    rng: &mut R,
) -> Vec<usize> {
    let n = points.len() / dim;
    let k = k.min(n).max(1);
    let pt = |q: usize| &points[q * dim..(q + 1) * dim];

    let mut centers: Vec<Vec<f64>> = vec![pt(rng.gen_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|q| dist2(pt(q), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.gen::<f64>() * total;
        let mut pick = n - 1;
        for (q, w) in d2.iter().enumerate() {
            if *w > 0.0 {
                if target < *w {
                    pick = q;
                    break;
                }
                target -= w;
            }
        }
        if d2[pick] == 0.0 {
            // rounding pushed the scan past the last positive weight
            pick = d2.iter().rposition(|w| *w > 0.0).unwrap_or(pick);
        }
        centers.push(pt(pick).to_vec());
        let c = centers.last().unwrap().clone();
        for (q, w) in d2.iter_mut().enumerate() {
            *w = w.min(dist2(pt(q), &c));
        }
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        for (q, label) in labels.iter_mut().enumerate() {
            let (c, _) = nearest(pt(q), &centers);
            if *label != c {
                *label = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (q, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(pt(q)) {
                *s += v;
            }
        }
        for (c, center) in centers.iter_mut().enumerate() {
            if counts[c] > 0 {
                for (x, s) in center.iter_mut().zip(&sums[c]) {
                    *x = s / counts[c] as f64;
                }
            }
        }
    }

    // drop empty clusters, numbering the rest by first appearance
    let mut remap = vec![usize::MAX; centers.len()];
    let mut next = 0;
    for l in labels.iter_mut() {
        if remap[*l] == usize::MAX {
            remap[*l] = next;
            next += 1;
        }
        *l = remap[*l];
    }
    labels
}

/// Forward pass aggregating the successors of epoch `s` into `clusters[s]`
/// k-means clusters (the last count repeats when the list is short).
pub fn kmeans_cluster(
    problem: &Problem,
    i: usize,
    filtered: &Filtered,
    clusters: &[usize],
    seed: u64,
) -> Result<StateSpace> {
    check_nonempty(filtered, i)?;
    let seg = problem.segment(i);
    let dim = seg.dynamics.dim();
    let mut layers: Vec<Layer> = Vec::with_capacity(filtered.len());
    let mut current = seg.initial_state.clone();
    for (s, decisions) in filtered.iter().enumerate() {
        let cand = expand(problem, i, s, &current, decisions)?;
        let k = clusters.get(s).or(clusters.last()).copied().unwrap_or(1);
        let mut rng = stream(seed, Purpose::KMeans, ((i as u64) << 16) | s as u64);
        let labels = kmeans_partition(&cand.next, dim, k, &mut rng);
        let count = labels.iter().max().map_or(0, |m| m + 1);
        let per_state = decisions.len();
        let mut records: Vec<Option<Cluster>> = vec![None; count];
        for (q, &l) in labels.iter().enumerate() {
            let point = &cand.next[q * dim..(q + 1) * dim];
            let member = ((q / per_state) as u32, (q % per_state) as u32);
            match &mut records[l] {
                Some(c) => {
                    c.count += 1;
                    for (k, &v) in point.iter().enumerate() {
                        c.sum[k] += v;
                        c.min[k] = c.min[k].min(v);
                        c.max[k] = c.max[k].max(v);
                    }
                    c.members.push(member);
                    c.cost_sum += cand.cost[q];
                }
                slot => {
                    *slot = Some(Cluster {
                        count: 1,
                        sum: point.to_vec(),
                        min: point.to_vec(),
                        max: point.to_vec(),
                        members: vec![member],
                        cost_sum: cand.cost[q],
                    })
                }
            }
        }
        let records: Vec<Cluster> = records
            .into_iter()
            .map(|c| c.expect("dense labels"))
            .collect();
        let labels = labels.into_iter().map(|l| l as u32).collect();
        let layer = layer_from_clusters(decisions, labels, records, cand.len());
        current = layer.next.clone();
        layers.push(layer);
    }
    Ok(StateSpace {
        kind: SpaceKind::Kmeans,
        dim,
        initial: seg.initial_state.clone(),
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::assign_stream;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const STREAM: [f64; 5] = [0.0, 0.3, 1.0, 0.5, 2.0];

    fn mean_distance(points: &[f64], labels: &[usize]) -> f64 {
        let k = labels.iter().max().unwrap() + 1;
        let mut total = 0.0;
        for c in 0..k {
            let members: Vec<f64> = points
                .iter()
                .zip(labels)
                .filter(|(_, l)| **l == c)
                .map(|(p, _)| *p)
                .collect();
            let centroid = members.iter().sum::<f64>() / members.len() as f64;
            total += members.iter().map(|p| (p - centroid).abs()).sum::<f64>();
        }
        total / points.len() as f64
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let labels = kmeans_partition(&STREAM, 1, 1, &mut rng);
        assert_eq!(labels, vec![0; 5]);
    }

    #[test]
    fn one_cluster_per_distinct_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut labels = kmeans_partition(&STREAM, 1, 5, &mut rng);
        labels.sort();
        assert_eq!(labels, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn k_above_point_count_is_reduced() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let labels = kmeans_partition(&STREAM, 1, 50, &mut rng);
        assert_eq!(labels.iter().max(), Some(&4));
    }

    #[test]
    fn matched_count_mean_distance_not_above_linf() {
        let linf = assign_stream(&STREAM.iter().map(|v| vec![*v]).collect::<Vec<_>>(), 0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let km = kmeans_partition(&STREAM, 1, 3, &mut rng);
        assert!(mean_distance(&STREAM, &km) <= mean_distance(&STREAM, &linf) + 1e-12);
    }
}
