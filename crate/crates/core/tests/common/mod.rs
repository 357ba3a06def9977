//! Independent reference implementations used only by tests. Nothing here
//! calls into the crate's clustering, decision or metric code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub type Points = Vec<Vec<f64>>;

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Isotropic Gaussian blobs in 2-d. Returns points and their blob index.
pub fn gaussian_blobs(centers: &[[f64; 2]], per_blob: usize, sigma: f64, seed: u64) -> (Points, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).unwrap();
    let mut pts = Vec::new();
    let mut owner = Vec::new();
    for (b, c) in centers.iter().enumerate() {
        for _ in 0..per_blob {
            pts.push(vec![c[0] + normal.sample(&mut rng), c[1] + normal.sample(&mut rng)]);
            owner.push(b);
        }
    }
    (pts, owner)
}

/// Points uniformly inside a disc of `radius` around `center`.
pub fn disc_blob(center: [f64; 2], radius: f64, n: usize, rng: &mut ChaCha8Rng) -> Points {
    (0..n)
        .map(|_| loop {
            let x = rng.random_range(-radius..radius);
            let y = rng.random_range(-radius..radius);
            if x * x + y * y <= radius * radius {
                break vec![center[0] + x, center[1] + y];
            }
        })
        .collect()
}

/// Exhaustive nearest-center search.
pub fn nearest_center(centers: &Points, p: &[f64]) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = sq(c, p);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

pub fn brute_quantization_error(centers: &Points, pts: &Points) -> f64 {
    pts.iter().map(|p| nearest_center(centers, p).1).sum::<f64>() / pts.len() as f64
}

/// Lloyd's algorithm from the given seeds, run until assignments stop changing.
pub fn lloyd(pts: &Points, mut centers: Points) -> Points {
    let mut assign = vec![usize::MAX; pts.len()];
    loop {
        let mut changed = false;
        for (i, p) in pts.iter().enumerate() {
            let a = nearest_center(&centers, p).0;
            if a != assign[i] {
                assign[i] = a;
                changed = true;
            }
        }
        if !changed {
            return centers;
        }
        for (k, c) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = pts.iter().zip(&assign).filter(|(_, &a)| a == k).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            for d in 0..c.len() {
                c[d] = members.iter().map(|m| m[d]).sum::<f64>() / members.len() as f64;
            }
        }
    }
}

/// Best converged Lloyd solution over `restarts` random-point seedings.
pub fn lloyd_best(pts: &Points, k: usize, restarts: usize, seed: u64) -> (Points, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Points, f64)> = None;
    for _ in 0..restarts {
        let mut idx: Vec<usize> = Vec::new();
        while idx.len() < k {
            let i = rng.random_range(0..pts.len());
            if !idx.contains(&i) {
                idx.push(i);
            }
        }
        let centers = lloyd(pts, idx.iter().map(|&i| pts[i].clone()).collect());
        let err = brute_quantization_error(&centers, pts);
        if best.as_ref().is_none_or(|b| err < b.1) {
            best = Some((centers, err));
        }
    }
    best.unwrap()
}

/// A prototype as the oracle sees it.
#[derive(Clone, Debug)]
pub struct RefPrototype {
    pub class_id: u8,
    pub center: Vec<f64>,
}

/// Full similarity sort followed by a literal class-indicator vote.
///
/// Ranking: similarity descending, then class id, then prototype index.
/// Vote ties: larger summed similarity, then smaller class id.
pub fn brute_force_decide(f: &[f32], protos: &[RefPrototype], k: usize) -> (u8, Vec<usize>) {
    let mut scored: Vec<(f64, u8, usize)> = protos
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let d: f64 = p.center.iter().zip(f).map(|(c, &x)| (c - x as f64).powi(2)).sum();
            ((-d).exp(), p.class_id, i)
        })
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let k = k.min(protos.len());
    let winners = &scored[..k];

    let mut best: Option<(u8, usize, f64)> = None;
    for beta in 1u8..=3 {
        let mut votes = 0;
        let mut sum = 0.0;
        for w in winners {
            let delta = if w.1 == beta { 1 } else { 0 };
            votes += delta;
            sum += delta as f64 * w.0;
        }
        best = match best {
            None => Some((beta, votes, sum)),
            Some((_, bv, bs)) if votes > bv || (votes == bv && sum > bs) => Some((beta, votes, sum)),
            keep => keep,
        };
    }
    (best.unwrap().0, winners.iter().map(|w| w.2).collect())
}

/// Literal per-class, per-pixel confusion tally: `[class-1] -> (tp, fp, fn, tn)`.
pub fn brute_force_confusion(pred: &[u8], truth: &[u8], height: usize, width: usize) -> [(u64, u64, u64, u64); 3] {
    let mut out = [(0, 0, 0, 0); 3];
    for class in 1u8..=3 {
        let slot = &mut out[class as usize - 1];
        for r in 0..height {
            for c in 0..width {
                let i = r * width + c;
                let (p, t) = (pred[i], truth[i]);
                if t == 0 {
                    continue;
                }
                match (p == class, t == class) {
                    (true, true) => slot.0 += 1,
                    (true, false) => slot.1 += 1,
                    (false, true) => slot.2 += 1,
                    (false, false) => slot.3 += 1,
                }
            }
        }
    }
    out
}
