//! Extreme rays of cones { theta >= 0 : theta . a_j = 0 for all j } by the
//! double-description method in exact rational arithmetic.
//!
//! Networks at desk scale keep these cones tiny, so the support-minimality
//! pruning step after each hyperplane is affordable and keeps only extreme
//! rays.

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::rational::rat_vec_to_coprime_ints;

/// Extreme rays of { theta in R^n : theta >= 0, theta . a = 0 for each a in
/// `constraints` }. Rays are returned integer-scaled with coprime entries.
pub fn extreme_rays(n: usize, constraints: &[Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    let allowed = vec![true; n];
    extreme_rays_with_support(n, constraints, &allowed)
}

/// As `extreme_rays`, restricted to rays supported on `allowed` coordinates.
pub fn extreme_rays_with_support(
    n: usize,
    constraints: &[Vec<BigRational>],
    allowed: &[bool],
) -> Vec<Vec<BigRational>> {
    let mut rays: Vec<Vec<BigRational>> = (0..n)
        .filter(|&i| allowed[i])
        .map(|i| {
            let mut e = vec![BigRational::zero(); n];
            e[i] = BigRational::from_integer(1.into());
            e
        })
        .collect();

    for a in constraints {
        let mut zero: Vec<Vec<BigRational>> = Vec::new();
        let mut pos: Vec<(Vec<BigRational>, BigRational)> = Vec::new();
        let mut neg: Vec<(Vec<BigRational>, BigRational)> = Vec::new();
        for ray in rays {
            let d: BigRational = ray.iter().zip(a).map(|(r, c)| r * c).sum();
            if d.is_zero() {
                zero.push(ray);
            } else if d.is_positive() {
                pos.push((ray, d));
            } else {
                neg.push((ray, d));
            }
        }
        let mut next = zero;
        for (p, dp) in &pos {
            for (q, dq) in &neg {
                // dp * q - dq * p lies on the hyperplane and in the cone.
                let combo: Vec<BigRational> = p
                    .iter()
                    .zip(q)
                    .map(|(pi, qi)| dp * qi - dq * pi)
                    .collect();
                if combo.iter().any(|v| !v.is_zero()) {
                    next.push(normalize(combo));
                }
            }
        }
        rays = prune_to_minimal_support(next);
    }
    rays.into_iter().map(normalize).collect()
}

fn support(ray: &[BigRational]) -> Vec<usize> {
    ray.iter()
        .enumerate()
        .filter(|(_, v)| !v.is_zero())
        .map(|(i, _)| i)
        .collect()
}

fn normalize(ray: Vec<BigRational>) -> Vec<BigRational> {
    let ints = rat_vec_to_coprime_ints(&ray);
    ints.into_iter().map(BigRational::from_integer).collect()
}

/// Keep rays whose support does not strictly contain the support of another
/// ray; for pointed cones of this form these are exactly the extreme rays.
/// Duplicates (equal after normalization) are removed.
fn prune_to_minimal_support(rays: Vec<Vec<BigRational>>) -> Vec<Vec<BigRational>> {
    let normalized: Vec<Vec<BigRational>> = rays.into_iter().map(normalize).collect();
    let supports: Vec<Vec<usize>> = normalized.iter().map(|r| support(r)).collect();
    let mut keep = Vec::new();
    'outer: for (i, ray) in normalized.iter().enumerate() {
        for (j, other) in normalized.iter().enumerate() {
            if i == j {
                continue;
            }
            let si = &supports[i];
            let sj = &supports[j];
            let subset = sj.iter().all(|k| si.contains(k));
            if subset && sj.len() < si.len() {
                continue 'outer;
            }
            if subset && sj.len() == si.len() && j < i && other == ray {
                continue 'outer; // duplicate
            }
        }
        keep.push(ray.clone());
    }
    keep
}
