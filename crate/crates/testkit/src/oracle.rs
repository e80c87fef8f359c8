//! Brute-force reference computations, written independently of the
//! engine so tests can compare against them.

/// Plain cosine over raw rows.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Index of the row with the highest cosine to `query`; the first such row
/// on exact ties.
pub fn argmax_cosine(query: &[f64], rows: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, row) in rows.iter().enumerate() {
        let c = cosine(query, row);
        if c > best.1 {
            best = (i, c);
        }
    }
    best
}

/// Within-cluster sum of squared distances for a labeling.
pub fn partition_inertia(points: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(p) {
            *s += x;
        }
    }
    let means: Vec<Vec<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| s.iter().map(|x| if n == 0 { 0.0 } else { x / n as f64 }).collect())
        .collect();
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| p.iter().zip(&means[l]).map(|(x, m)| (x - m) * (x - m)).sum::<f64>())
        .sum()
}

/// Global k-means optimum by enumerating all `k^n` labelings. Returns the
/// minimum inertia and one labeling achieving it.
pub fn exhaustive_kmeans(points: &[Vec<f64>], k: usize) -> (f64, Vec<usize>) {
    let n = points.len();
    assert!(n <= 14 && k >= 1, "enumeration is exponential");
    let mut labels = vec![0usize; n];
    let mut best = (f64::INFINITY, labels.clone());
    loop {
        let inertia = partition_inertia(points, &labels, k);
        if inertia < best.0 {
            best = (inertia, labels.clone());
        }
        // Odometer increment.
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
    }
}

/// Fraction of items on which `found` agrees with `truth` under the best
/// relabeling of `found` (all `k!` permutations).
pub fn best_permutation_agreement(truth: &[usize], found: &[usize], k: usize) -> f64 {
    assert_eq!(truth.len(), found.len());
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0usize;
    permute(&mut perm, 0, &mut |p| {
        let agree = truth.iter().zip(found).filter(|(&t, &f)| p[f] == t).count();
        best = best.max(agree);
    });
    best as f64 / truth.len() as f64
}

fn permute(p: &mut Vec<usize>, start: usize, visit: &mut dyn FnMut(&[usize])) {
    if start == p.len() {
        visit(p);
        return;
    }
    for i in start..p.len() {
        p.swap(start, i);
        permute(p, start + 1, visit);
        p.swap(start, i);
    }
}
