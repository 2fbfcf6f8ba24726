//! The sememe space `M` (one centroid per cluster), nearest-centroid
//! assignment, Lloyd's K-means with k-means++ seeding, and the streaming
//! centroid update used during joint training.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{axpy, squared_distance, DenseMatrix};

/// `K` centroids of width `R`. Conceptually the `R × K` matrix `M` whose
/// columns are the centroids; stored one centroid per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SememeSpace {
    centroids: DenseMatrix,
}

impl SememeSpace {
    /// From centroids stored as rows (`K × R`).
    pub fn from_centroids(centroids: DenseMatrix) -> Result<Self> {
        if centroids.rows() == 0 || centroids.cols() == 0 {
            return Err(Error::EmptyInput);
        }
        if !centroids.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(SememeSpace { centroids })
    }

    /// From the `R × K` matrix `M`.
    pub fn from_matrix(m: &DenseMatrix) -> Result<Self> {
        Self::from_centroids(m.transpose())
    }

    /// The `R × K` matrix `M`.
    pub fn matrix(&self) -> DenseMatrix {
        self.centroids.transpose()
    }

    pub fn centroids(&self) -> &DenseMatrix {
        &self.centroids
    }

    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    pub fn r(&self) -> usize {
        self.centroids.cols()
    }

    /// Column `k` of `M`.
    pub fn centroid(&self, k: usize) -> &[f64] {
        self.centroids.row(k)
    }

    fn centroid_mut(&mut self, k: usize) -> &mut [f64] {
        self.centroids.row_mut(k)
    }
}

/// One-hot assignment vector `s`, stored as its nonzero position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    pub index: usize,
    pub k: usize,
}

impl Assignment {
    pub fn one_hot(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.k];
        s[self.index] = 1.0;
        s
    }
}

fn nearest(point: &[f64], centroids: &DenseMatrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.row_iter().enumerate() {
        let d = squared_distance(point, c);
        // strict comparison keeps the smallest index on ties
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// Nearest centroid in Euclidean distance; ties go to the smallest index.
pub fn assign(latent: &[f64], space: &SememeSpace) -> Result<Assignment> {
    if latent.len() != space.r() {
        return Err(Error::DimensionMismatch { expected: space.r(), actual: latent.len() });
    }
    if latent.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(Assignment { index: nearest(latent, &space.centroids).0, k: space.k() })
}

/// Mean over rows of `‖z_i − M s_i‖²`.
pub fn clustering_loss(latents: &DenseMatrix, space: &SememeSpace, assignments: &[Assignment]) -> Result<f64> {
    if latents.rows() != assignments.len() {
        return Err(Error::DimensionMismatch { expected: latents.rows(), actual: assignments.len() });
    }
    if latents.rows() == 0 {
        return Err(Error::EmptyInput);
    }
    if latents.cols() != space.r() {
        return Err(Error::DimensionMismatch { expected: space.r(), actual: latents.cols() });
    }
    let mut total = 0.0;
    for (z, a) in latents.row_iter().zip(assignments) {
        if a.index >= space.k() {
            return Err(Error::OutOfRange { index: a.index, len: space.k() });
        }
        total += squared_distance(z, space.centroid(a.index));
    }
    Ok(total / latents.rows() as f64)
}

/// Moves the assigned centroid toward `latent` with step `1 / counts[k]`
/// after incrementing the count.
pub fn update_centroids(space: &mut SememeSpace, counts: &mut [u64], latent: &[f64], a: &Assignment) -> Result<()> {
    if counts.len() != space.k() || a.index >= space.k() {
        return Err(Error::OutOfRange { index: a.index, len: space.k().min(counts.len()) });
    }
    if latent.len() != space.r() {
        return Err(Error::DimensionMismatch { expected: space.r(), actual: latent.len() });
    }
    counts[a.index] += 1;
    let eta = 1.0 / counts[a.index] as f64;
    let c = space.centroid_mut(a.index);
    // M_k ← M_k − η (M_k − z)
    for (m, z) in c.iter_mut().zip(latent) {
        *m -= eta * (*m - z);
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub space: SememeSpace,
    /// Cluster of every input row under the final centroids.
    pub assignments: Vec<usize>,
    /// Objective after each assignment step, first entry from the seeds.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

/// Lloyd's algorithm on the rows of `data`, seeded with k-means++.
///
/// An empty cluster is re-seeded at the point farthest from its current
/// centroid (taken from clusters that keep at least one other point). Runs
/// until the assignment stops changing or `max_iters` update steps.
pub fn kmeans(data: &DenseMatrix, k: usize, max_iters: usize, seed: u64) -> Result<KMeansResult> {
    let n = data.rows();
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if n < k {
        return Err(Error::TooFewPoints { needed: k, clusters: k, available: n });
    }
    if !data.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut r = rng::stream(seed, &[rng::label("kmeans++")]);
    let mut centroids = seed_plus_plus(data, k, &mut r);

    let mut labels = vec![usize::MAX; n];
    let mut dists = vec![0.0; n];
    let mut objective = Vec::new();
    let mut iterations = 0;
    // centroid means can land an ulp off, so a zero cost may reappear as ~1e-31
    let scale: f64 = data.row_iter().map(|x| x.iter().map(|v| v * v).sum::<f64>()).sum();
    loop {
        let mut changed = false;
        let mut cost = 0.0;
        for (i, x) in data.row_iter().enumerate() {
            let (c, d) = nearest(x, &centroids);
            changed |= labels[i] != c;
            labels[i] = c;
            dists[i] = d;
            cost += d;
        }
        if let Some(&prev) = objective.last() {
            debug_assert!(cost <= prev + 1e-12 * (prev + scale), "Lloyd objective increased from {prev} to {cost}");
        }
        objective.push(cost);
        if !changed || iterations == max_iters {
            break;
        }
        iterations += 1;

        // update step
        let dim = data.cols();
        let mut sums = DenseMatrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (x, &c) in data.row_iter().zip(&labels) {
            axpy(1.0, x, sums.row_mut(c));
            counts[c] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (m, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *m = s * inv;
                }
            }
        }
        // repair empty clusters
        let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        if !empty.is_empty() {
            for (x, (&c, d)) in data.row_iter().zip(labels.iter().zip(dists.iter_mut())) {
                *d = squared_distance(x, centroids.row(c));
            }
            for c in empty {
                let donor = (0..n)
                    .filter(|&i| counts[labels[i]] > 1)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
                let Some(i) = donor else { break };
                counts[labels[i]] -= 1;
                counts[c] = 1;
                labels[i] = c;
                dists[i] = 0.0;
                centroids.row_mut(c).copy_from_slice(data.row(i));
            }
        }
    }

    Ok(KMeansResult { space: SememeSpace::from_centroids(centroids)?, assignments: labels, objective, iterations })
}

fn seed_plus_plus(data: &DenseMatrix, k: usize, r: &mut rng::Rng) -> DenseMatrix {
    let n = data.rows();
    let mut centroids = DenseMatrix::zeros(k, data.cols());
    let mut chosen = vec![false; n];
    let first = r.random_range(0..n);
    chosen[first] = true;
    centroids.row_mut(0).copy_from_slice(data.row(first));
    let mut d2: Vec<f64> = data.row_iter().map(|x| squared_distance(x, data.row(first))).collect();

    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let u = r.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > u {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave u just past the final sum
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("total > 0"))
        } else {
            // every point coincides with a seed: take an unused one
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[r.random_range(0..free.len())]
        };
        chosen[pick] = true;
        centroids.row_mut(c).copy_from_slice(data.row(pick));
        for (i, x) in data.row_iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(x, data.row(pick)));
        }
    }
    centroids
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn space(cols: &[&[f64]]) -> SememeSpace {
        SememeSpace::from_centroids(DenseMatrix::from_rows(cols).unwrap()).unwrap()
    }

    fn random_data(n: usize, d: usize, seed: u64) -> DenseMatrix {
        let mut r = rng::stream(seed, &[]);
        DenseMatrix::from_vec(n, d, (0..n * d).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn brute_argmin(z: &[f64], m: &SememeSpace) -> usize {
        let d: Vec<f64> = (0..m.k())
            .map(|k| z.iter().zip(m.centroid(k)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .collect();
        let min = d.iter().copied().fold(f64::INFINITY, f64::min);
        d.iter().position(|&x| x == min).unwrap()
    }

    #[test]
    fn assign_examples() {
        let m = space(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[3.0, 3.0], &[2.0, 0.0]]);
        let a = assign(&[3.0, 3.0], &m).unwrap();
        assert_eq!(a.index, 3);
        assert_eq!(a.one_hot(), vec![0.0, 0.0, 0.0, 1.0, 0.0]);
        // equidistant to centroids 1 and 4
        assert_eq!(assign(&[1.5, 0.0], &m).unwrap().index, 1);
        assert!(assign(&[1.0], &m).is_err());
    }

    #[test]
    fn matrix_layout_is_r_by_k() {
        let m = space(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        assert_eq!((m.r(), m.k()), (3, 2));
        let mat = m.matrix();
        assert_eq!(mat.shape(), (3, 2));
        assert_eq!(mat.column(1), vec![4.0, 5.0, 6.0]);
        assert_eq!(SememeSpace::from_matrix(&mat).unwrap(), m);
    }

    #[test]
    fn clustering_loss_examples() {
        let m = space(&[&[0.0, 0.0], &[10.0, 0.0]]);
        let on = DenseMatrix::from_rows(&[[0.0, 0.0], [10.0, 0.0]]).unwrap();
        let a = |i| Assignment { index: i, k: 2 };
        assert_eq!(clustering_loss(&on, &m, &[a(0), a(1)]).unwrap(), 0.0);
        let one = DenseMatrix::from_rows(&[[3.0, 4.0]]).unwrap();
        assert_eq!(clustering_loss(&one, &m, &[a(0)]).unwrap(), 25.0);
        // (1 + 4 + 9) / 3 by hand
        let three = DenseMatrix::from_rows(&[[1.0, 0.0], [10.0, 2.0], [0.0, 3.0]]).unwrap();
        let loss = clustering_loss(&three, &m, &[a(0), a(1), a(0)]).unwrap();
        assert!((loss - 14.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn centroid_update_examples() {
        let mut m = space(&[&[5.0, 5.0], &[1.0, 1.0]]);
        let mut counts = vec![0, 3];
        let a0 = Assignment { index: 0, k: 2 };
        update_centroids(&mut m, &mut counts, &[2.0, -1.0], &a0).unwrap();
        assert_eq!(m.centroid(0), &[2.0, -1.0]);
        assert_eq!(counts, vec![1, 3]);

        let a1 = Assignment { index: 1, k: 2 };
        update_centroids(&mut m, &mut counts, &[1.0, 1.0], &a1).unwrap();
        assert_eq!(m.centroid(1), &[1.0, 1.0]);

        // counts 4 → 5: 1 − (1/5)(1 − 6) = 2; then 5 → 6: 2 − (1/6)(2 − 8) = 3
        update_centroids(&mut m, &mut counts, &[6.0, 6.0], &a1).unwrap();
        assert!((m.centroid(1)[0] - 2.0).abs() < 1e-15);
        update_centroids(&mut m, &mut counts, &[8.0, 8.0], &a1).unwrap();
        assert!((m.centroid(1)[0] - 3.0).abs() < 1e-15);
        assert_eq!(counts, vec![1, 6]);
    }

    #[test]
    fn kmeans_k_equals_n() {
        let data = random_data(25, 3, 4);
        let res = kmeans(&data, 25, 100, 1).unwrap();
        assert_eq!(*res.objective.last().unwrap(), 0.0);
    }

    #[test]
    fn kmeans_single_cluster_is_mean() {
        let data = DenseMatrix::from_rows(&[[0.0, 1.0], [2.0, 3.0], [4.0, 8.0]]).unwrap();
        let res = kmeans(&data, 1, 100, 0).unwrap();
        assert!((res.space.centroid(0)[0] - 2.0).abs() < 1e-15);
        assert!((res.space.centroid(0)[1] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn kmeans_separated_pairs() {
        // exhaustive oracle: of the 7 two-way partitions of four points,
        // {p0,p1} | {p2,p3} has the lowest cost (0.5 + 0.5)
        let data = DenseMatrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 11.0]]).unwrap();
        for seed in 0..20 {
            let res = kmeans(&data, 2, 100, seed).unwrap();
            let mut cs: Vec<Vec<f64>> = (0..2).map(|k| res.space.centroid(k).to_vec()).collect();
            cs.sort_by(|a, b| a[0].total_cmp(&b[0]));
            assert_eq!(cs, vec![vec![0.0, 0.5], vec![10.0, 10.5]]);
            assert_eq!(*res.objective.last().unwrap(), 1.0);
        }
    }

    #[test]
    fn kmeans_errors_and_duplicates() {
        let data = random_data(3, 2, 1);
        assert!(matches!(kmeans(&data, 4, 10, 0), Err(Error::TooFewPoints { .. })));
        let same = DenseMatrix::from_rows(&[[1.0, 1.0]; 6]).unwrap();
        let res = kmeans(&same, 3, 10, 0).unwrap();
        for k in 0..3 {
            assert_eq!(res.space.centroid(k), &[1.0, 1.0]);
        }
        assert_eq!(*res.objective.last().unwrap(), 0.0);
    }

    #[test]
    fn kmeans_is_seed_deterministic() {
        let data = random_data(300, 4, 8);
        let a = kmeans(&data, 7, 50, 5).unwrap();
        let b = kmeans(&data, 7, 50, 5).unwrap();
        assert_eq!(a.space, b.space);
        assert_eq!(a.objective, b.objective);
    }

    proptest! {
        #[test]
        fn assign_matches_brute_force(k in 1usize..200, r in 1usize..6, seed in any::<u64>(), dup in any::<bool>()) {
            let mut m = random_data(k, r, seed);
            if dup && k > 2 {
                // force exact ties
                let row = m.row(k - 1).to_vec();
                m.row_mut(0).copy_from_slice(&row);
            }
            let m = SememeSpace::from_centroids(m).unwrap();
            let z = random_data(1, r, seed ^ 0xabc);
            prop_assert_eq!(assign(z.row(0), &m).unwrap().index, brute_argmin(z.row(0), &m));
        }

        #[test]
        fn assign_is_scale_invariant(k in 1usize..50, r in 1usize..6, seed in any::<u64>(), scale in 0.01f64..100.0) {
            let m = random_data(k, r, seed);
            let z = random_data(1, r, seed ^ 7);
            let base = assign(z.row(0), &SememeSpace::from_centroids(m.clone()).unwrap()).unwrap();
            let ms = DenseMatrix::from_vec(k, r, m.as_slice().iter().map(|x| x * scale).collect()).unwrap();
            let zs: Vec<f64> = z.row(0).iter().map(|x| x * scale).collect();
            let scaled = assign(&zs, &SememeSpace::from_centroids(ms).unwrap()).unwrap();
            prop_assert_eq!(base.index, scaled.index);
            prop_assert_eq!(base.one_hot().iter().sum::<f64>(), 1.0);
        }
    }
}
