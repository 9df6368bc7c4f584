use std::cmp::Ordering;
use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::engine::argmax;
use crate::error::{Error, Result};

/// A statistic, or the marker for inputs on which it is undefined (zero
/// variance, a single class, fewer than two points).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Metric {
    Value(f64),
    Degenerate,
}

impl Metric {
    pub fn value(self) -> Option<f64> {
        match self {
            Metric::Value(v) => Some(v),
            Metric::Degenerate => None,
        }
    }

    pub fn is_degenerate(self) -> bool {
        self == Metric::Degenerate
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Value(v) => write!(f, "{v:.4}"),
            Metric::Degenerate => f.write_str("degenerate"),
        }
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Metric::Value(v) => s.serialize_f64(*v),
            Metric::Degenerate => s.serialize_str("degenerate"),
        }
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Metric;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"degenerate\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Metric, E> {
                Ok(Metric::Value(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Metric, E> {
                Ok(Metric::Value(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Metric, E> {
                Ok(Metric::Value(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Metric, E> {
                if v == "degenerate" {
                    Ok(Metric::Degenerate)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("lists of length {} and {}", x.len(), y.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("metric input".into()));
    }
    Ok(())
}

fn check_simplex_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::Dimension(format!(
            "probability vectors of length {} and {}",
            p.len(),
            q.len()
        )));
    }
    Ok(())
}

/// Drop in probability of the originally predicted class.
pub fn delta_pc(p: &[f64], p_erased: &[f64]) -> Result<f64> {
    check_simplex_pair(p, p_erased)?;
    let i = argmax(p);
    Ok(p[i] - p_erased[i])
}

/// Natural-log entropy, with `0 ln 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// Entropy gained by erasure: `H(p_erased) - H(p)`.
pub fn delta_ne(p: &[f64], p_erased: &[f64]) -> Result<f64> {
    check_simplex_pair(p, p_erased)?;
    Ok(entropy(p_erased) - entropy(p))
}

/// Whether the predicted class changed.
pub fn delta_p(p: &[f64], p_erased: &[f64]) -> Result<bool> {
    check_simplex_pair(p, p_erased)?;
    Ok(argmax(p) != argmax(p_erased))
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<Metric> {
    check_pair(x, y)?;
    Ok(pearson_unchecked(x, y))
}

fn pearson_unchecked(x: &[f64], y: &[f64]) -> Metric {
    let n = x.len();
    if n < 2 {
        return Metric::Degenerate;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Metric::Degenerate;
    }
    Metric::Value((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation of the average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Metric> {
    check_pair(x, y)?;
    Ok(pearson_unchecked(&average_ranks(x), &average_ranks(y)))
}

/// Kendall's tau-b in `O(n log n)` (Knight's merge-sort algorithm).
pub fn kendall(x: &[f64], y: &[f64]) -> Result<Metric> {
    check_pair(x, y)?;
    let n = x.len();
    if n < 2 {
        return Ok(Metric::Degenerate);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let pairs = |run: u64| run * run.saturating_sub(1) / 2;
    let n0 = pairs(n as u64);
    // ties in x, and joint ties in (x, y)
    let (mut n1, mut n3) = (0u64, 0u64);
    let (mut run_x, mut run_xy) = (1u64, 1u64);
    for w in order.windows(2) {
        let (a, b) = (w[0], w[1]);
        if x[a] == x[b] {
            run_x += 1;
            if y[a] == y[b] {
                run_xy += 1;
            } else {
                n3 += pairs(run_xy);
                run_xy = 1;
            }
        } else {
            n1 += pairs(run_x);
            n3 += pairs(run_xy);
            run_x = 1;
            run_xy = 1;
        }
    }
    n1 += pairs(run_x);
    n3 += pairs(run_xy);

    let mut ys: Vec<f64> = order.iter().map(|&k| y[k]).collect();
    let swaps = merge_count(&mut ys);

    let mut n2 = 0u64;
    let mut run_y = 1u64;
    for w in ys.windows(2) {
        if w[0] == w[1] {
            run_y += 1;
        } else {
            n2 += pairs(run_y);
            run_y = 1;
        }
    }
    n2 += pairs(run_y);

    let (nx, ny) = (n0 - n1, n0 - n2);
    if nx == 0 || ny == 0 {
        return Ok(Metric::Degenerate);
    }
    let numerator = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    Ok(Metric::Value(
        (numerator / ((nx as f64).sqrt() * (ny as f64).sqrt())).clamp(-1.0, 1.0),
    ))
}

// Stable merge sort of `v`, returning the number of strictly inverted pairs.
fn merge_count(v: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid]) + merge_count(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j].total_cmp(&v[i]) == Ordering::Less {
            swaps += (mid - i) as u64;
            merged.push(v[j]);
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..]);
    v.copy_from_slice(&merged);
    swaps
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, via the rank-sum statistic.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<Metric> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("auroc score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Ok(Metric::Degenerate);
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(Metric::Value(u / (pos as f64 * neg as f64)))
}
