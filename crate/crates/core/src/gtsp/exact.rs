//! Exhaustive reference solver for small instances.

use super::{GtspError, GtspInstance, GtspTour};

/// Upper bound on `Π|cluster| · (clusters − 1)!`.
pub const EXACT_GUARD: f64 = 1e7;

/// Globally optimal tour: cluster 0 is fixed first, every order of the
/// remaining clusters is enumerated, and for each order every vertex
/// selection is scored by a layered shortest-path sweep.
pub fn solve_exact(inst: &GtspInstance) -> Result<GtspTour, GtspError> {
    inst.validate()?;
    let clusters = inst.clusters();
    let n = clusters.len();
    let work = clusters.iter().map(|c| c.len() as f64).product::<f64>() * (1..n).map(|k| k as f64).product::<f64>();
    if work > EXACT_GUARD {
        return Err(GtspError::TooLarge {
            work,
            limit: EXACT_GUARD,
        });
    }

    let mut rest: Vec<usize> = (1..n).collect();
    let mut best: Option<GtspTour> = None;
    permute(&mut rest, 0, &mut |order| {
        let seq: Vec<usize> = std::iter::once(0).chain(order.iter().copied()).collect();
        if let Some(t) = best_selection(inst, &seq) {
            if best.as_ref().is_none_or(|b| t.cost < b.cost) {
                best = Some(t);
            }
        }
    });
    Ok(best.expect("at least one order"))
}

fn permute<F: FnMut(&[usize])>(xs: &mut [usize], k: usize, f: &mut F) {
    if k == xs.len() {
        f(xs);
        return;
    }
    for i in k..xs.len() {
        xs.swap(k, i);
        permute(xs, k + 1, f);
        xs.swap(k, i);
    }
}

/// Best vertex choice for a fixed cluster sequence.
fn best_selection(inst: &GtspInstance, seq: &[usize]) -> Option<GtspTour> {
    let clusters = inst.clusters();
    let mut best: Option<GtspTour> = None;
    for &s in &clusters[seq[0]] {
        // dist[v] = cheapest path s → v through the layers so far
        let mut layer: Vec<(usize, f64, Vec<usize>)> = vec![(s, 0.0, vec![s])];
        for &c in &seq[1..] {
            layer = clusters[c]
                .iter()
                .map(|&v| {
                    let (d, path) = layer
                        .iter()
                        .map(|(u, d, path)| (d + inst.cost(*u, v), path))
                        .min_by(|a, b| a.0.total_cmp(&b.0))
                        .unwrap();
                    let mut path = path.clone();
                    path.push(v);
                    (v, d, path)
                })
                .collect();
        }
        for (v, d, path) in layer {
            let total = d + inst.cost(v, s);
            if best.as_ref().is_none_or(|b| total < b.cost) {
                best = Some(GtspTour {
                    order: path,
                    cost: total,
                });
            }
        }
    }
    best
}
