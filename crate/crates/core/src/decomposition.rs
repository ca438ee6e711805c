//! Samplers built from an occupancy draw `K` and a uniform permutation,
//! without simulating the shuffle itself.
//!
//! Given `K = k` distinct selected cards, the top `k` positions of the deck
//! look like the first `k` positions of a uniform permutation and the other
//! cards sit below them in increasing order. Each statistic then decomposes:
//!
//! * fixed points: `n - max(pi(1..=k)) + #{i <= k : pi(i) = i}`;
//! * descents: `k - 1` adjacent comparisons in the top block plus one boundary
//!   comparison between positions `k` and `k + 1`;
//! * inversions: `R_1 + ... + R_k` with independent `R_i` uniform on
//!   `{0, ..., n - i}`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::occupancy::sample_occupied;
use crate::permutation::{sample_uniform_prefix, Permutation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    /// Statistic read off a resampled deck.
    ResampledDeck,
    /// Statistic assembled from its decomposition formula.
    FormulaDirect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecomposedDraw {
    /// Occupancy draw used as the random index.
    pub k: usize,
    pub statistic_value: u64,
    pub channel: Channel,
}

/// Sorts positions `k+1..=n` of `pi` into increasing order.
pub fn resample_deck(pi: &Permutation, k: usize) -> Permutation {
    let mut entries = pi.entries().to_vec();
    let k = k.min(entries.len());
    entries[k..].sort_unstable();
    Permutation::from_entries_unchecked(entries)
}

/// A deck with the law of `r` random-to-top shuffles: draw `K`, draw a
/// uniform permutation, sort its last `n - K` entries.
pub fn sample_resampled_deck<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> Result<Permutation> {
    let k = sample_occupied(n, r, rng)?;
    let pi = Permutation::sample_uniform(n, rng)?;
    Ok(resample_deck(&pi, k))
}

/// Fixed points as `n - max(pi(1..=K)) + #{i <= K : pi(i) = i}`; `K = 0`
/// is the untouched deck with `n` fixed points.
pub fn sample_fixed_points_decomposed<R: Rng + ?Sized>(
    n: usize,
    r: usize,
    rng: &mut R,
) -> Result<DecomposedDraw> {
    let k = sample_occupied(n, r, rng)?;
    let value = if k == 0 {
        n as u64
    } else {
        let prefix = sample_uniform_prefix(n, k, rng);
        fixed_points_from_prefix(n, &prefix)
    };
    Ok(DecomposedDraw {
        k,
        statistic_value: value,
        channel: Channel::FormulaDirect,
    })
}

/// `n - max(prefix) + fixed points of prefix`.
pub fn fixed_points_from_prefix(n: usize, prefix: &[u32]) -> u64 {
    let max = prefix.iter().copied().max().unwrap_or(n as u32) as u64;
    let fixed = crate::permutation::count_fixed_points(prefix) as u64;
    n as u64 - max + fixed
}

/// Descents by one of two channels.
///
/// `ResampledDeck` counts descents of [`sample_resampled_deck`]. `FormulaDirect`
/// compares `K` i.i.d. uniforms `U_1..U_K` pairwise and adds the boundary
/// indicator `U_K > V`, where `V` is the smallest of `n - K` further uniforms
/// standing in for the cards that were never selected. Ties count as no
/// descent.
pub fn sample_descents_decomposed<R: Rng + ?Sized>(
    n: usize,
    r: usize,
    channel: Channel,
    rng: &mut R,
) -> Result<DecomposedDraw> {
    if n == 0 {
        return Err(Error::InvalidDeckSize(0));
    }
    let (k, value) = match channel {
        Channel::ResampledDeck => {
            let k = sample_occupied(n, r, rng)?;
            let pi = Permutation::sample_uniform(n, rng)?;
            (k, resample_deck(&pi, k).count_descents() as u64)
        }
        Channel::FormulaDirect => {
            let k = sample_occupied(n, r, rng)?;
            let mut descents = 0u64;
            if k > 0 {
                let mut prev: f64 = rng.random();
                for _ in 1..k {
                    let u: f64 = rng.random();
                    descents += (prev > u) as u64;
                    prev = u;
                }
                if k < n {
                    // Minimum of n - k uniforms by inversion.
                    let w: f64 = rng.random();
                    let v = 1.0 - w.powf(1.0 / (n - k) as f64);
                    descents += (prev > v) as u64;
                }
            }
            (k, descents)
        }
    };
    Ok(DecomposedDraw {
        k,
        statistic_value: value,
        channel,
    })
}

/// Inversions as `R_1 + ... + R_K` with independent `R_i` uniform on
/// `{0, ..., n - i}`.
pub fn sample_inversions_decomposed<R: Rng + ?Sized>(
    n: usize,
    r: usize,
    rng: &mut R,
) -> Result<DecomposedDraw> {
    let k = sample_occupied(n, r, rng)?;
    Ok(DecomposedDraw {
        k,
        statistic_value: inversions_given_index(n, k, rng),
        channel: Channel::FormulaDirect,
    })
}

/// `R_1 + ... + R_k` for a given index `k`.
pub fn inversions_given_index<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> u64 {
    (1..=k.min(n))
        .map(|i| rng.random_range(0..=(n - i) as u64))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::occupancy::occupied_pmf;
    use crate::rng::stream;
    use crate::shuffle::{all_selection_sequences, apply_fast};
    use std::collections::BTreeMap;

    fn perm(v: &[u32]) -> Permutation {
        Permutation::from_entries(v.to_vec()).unwrap()
    }

    #[test]
    fn worked_example() {
        let pi = perm(&[2, 7, 3, 8, 1, 10, 5, 9, 6, 4]);
        let resampled = resample_deck(&pi, 5);
        assert_eq!(resampled.entries(), &[2, 7, 3, 8, 1, 4, 5, 6, 9, 10]);
        assert_eq!(resampled.count_fixed_points(), 3);
        assert_eq!(fixed_points_from_prefix(10, &pi.entries()[..5]), 3);
        assert_eq!(resampled.count_descents(), 2);
        // Inversions of the resampled deck only involve the top block.
        assert_eq!(
            resampled.count_inversions(),
            pi.prefix_summary(5).unwrap().prefix_inversions
        );
    }

    #[test]
    fn zero_shuffles() {
        let mut rng = stream(8);
        assert!(sample_resampled_deck(9, 0, &mut rng).unwrap().is_identity());
        assert_eq!(sample_fixed_points_decomposed(9, 0, &mut rng).unwrap().statistic_value, 9);
        for ch in [Channel::ResampledDeck, Channel::FormulaDirect] {
            assert_eq!(sample_descents_decomposed(9, 0, ch, &mut rng).unwrap().statistic_value, 0);
        }
        assert_eq!(sample_inversions_decomposed(9, 0, &mut rng).unwrap().statistic_value, 0);
    }

    #[test]
    fn resampled_suffix_is_ascending() {
        let mut rng = stream(12);
        for _ in 0..200 {
            let k = sample_occupied(30, 20, &mut rng).unwrap();
            let pi = Permutation::sample_uniform(30, &mut rng).unwrap();
            let d = resample_deck(&pi, k);
            assert!(d.entries()[k..].windows(2).all(|w| w[0] < w[1]));
            assert_eq!(&d.entries()[..k], &pi.entries()[..k]);
        }
    }

    fn all_perms(n: usize) -> Vec<Vec<u32>> {
        fn rec(cur: &mut Vec<u32>, used: &mut [bool], out: &mut Vec<Vec<u32>>) {
            if cur.len() == used.len() {
                out.push(cur.clone());
                return;
            }
            for v in 0..used.len() {
                if !used[v] {
                    used[v] = true;
                    cur.push(v as u32 + 1);
                    rec(cur, used, out);
                    cur.pop();
                    used[v] = false;
                }
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), &mut vec![false; n], &mut out);
        out
    }

    type Law = BTreeMap<(usize, usize, u64), f64>;

    fn add(law: &mut Law, key: (usize, usize, u64), w: f64) {
        *law.entry(key).or_default() += w;
    }

    fn same(a: &Law, b: &Law) {
        assert_eq!(a.len(), b.len(), "{a:?} vs {b:?}");
        for (key, p) in a {
            assert!((p - b[key]).abs() < 1e-12, "{key:?}: {p} vs {}", b[key]);
        }
    }

    /// Joint law of (F, D, I) under the shuffle, by enumerating n^r sequences,
    /// against the resampled-deck construction integrated over K.
    #[test]
    fn exact_laws_match_enumeration() {
        for n in 1..=4usize {
            let perms = all_perms(n);
            for r in 0..=3usize {
                let total = (n as f64).powi(r as i32);
                let mut shuffle_law = Law::new();
                let mut fixed_shuffle = BTreeMap::<u64, f64>::new();
                let mut inv_shuffle = BTreeMap::<u64, f64>::new();
                for s in all_selection_sequences(n, r) {
                    let d = apply_fast(&s).deck;
                    let key = (d.count_fixed_points(), d.count_descents(), d.count_inversions());
                    add(&mut shuffle_law, key, 1.0 / total);
                    *fixed_shuffle.entry(key.0 as u64).or_default() += 1.0 / total;
                    *inv_shuffle.entry(key.2).or_default() += 1.0 / total;
                }

                let pmf = occupied_pmf(n, r).unwrap();
                let mut resampled_law = Law::new();
                let mut fixed_formula = BTreeMap::<u64, f64>::new();
                let mut inv_formula = BTreeMap::<u64, f64>::new();
                for (k, pk) in pmf.iter().enumerate() {
                    if *pk == 0.0 {
                        continue;
                    }
                    let w = pk / perms.len() as f64;
                    for p in &perms {
                        let d = resample_deck(&perm(p), k);
                        let key = (d.count_fixed_points(), d.count_descents(), d.count_inversions());
                        add(&mut resampled_law, key, w);
                        let f = if k == 0 { n as u64 } else { fixed_points_from_prefix(n, &p[..k]) };
                        *fixed_formula.entry(f).or_default() += w;
                    }
                    // Enumerate R_1..R_k, each uniform on {0..n-i}.
                    let mut sums = BTreeMap::from([(0u64, 1.0)]);
                    for i in 1..=k {
                        let width = (n - i + 1) as f64;
                        let mut next = BTreeMap::new();
                        for (s, p) in &sums {
                            for v in 0..=(n - i) as u64 {
                                *next.entry(s + v).or_insert(0.0) += p / width;
                            }
                        }
                        sums = next;
                    }
                    for (s, p) in sums {
                        *inv_formula.entry(s).or_default() += pk * p;
                    }
                }
                same(&shuffle_law, &resampled_law);
                for (law_a, law_b) in [(&fixed_shuffle, &fixed_formula), (&inv_shuffle, &inv_formula)] {
                    assert_eq!(law_a.len(), law_b.len());
                    for (v, p) in law_a {
                        assert!((p - law_b[v]).abs() < 1e-12, "n={n} r={r} v={v}");
                    }
                }
            }
        }
    }

    #[test]
    fn full_index_inversions_mean() {
        // K = n: sum of uniform means n(n-1)/4.
        let mut rng = stream(77);
        let n = 40;
        let trials = 20_000;
        let xs: Vec<f64> = (0..trials).map(|_| inversions_given_index(n, n, &mut rng) as f64).collect();
        let mean = xs.iter().sum::<f64>() / trials as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let target = (n * (n - 1)) as f64 / 4.0;
        assert!((mean - target).abs() < 4.0 * (var / trials as f64).sqrt());
    }
}
