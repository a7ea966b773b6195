use celetrip_tensor::{Tape, Tensor};
use ndarray::{Array2, Axis};

use super::{Model, PoolParams};
use crate::error::Result;

/// `D^-1/2 A D^-1/2` for an adjacency that already carries self-loops.
pub fn normalized_adjacency(adj: &Array2<f64>) -> Array2<f64> {
    let inv_sqrt: Vec<f64> = adj
        .sum_axis(Axis(1))
        .iter()
        .map(|&d| if d > 0.0 { d.sqrt().recip() } else { 0.0 })
        .collect();
    let mut out = adj.clone();
    for ((i, j), v) in out.indexed_iter_mut() {
        *v *= inv_sqrt[i] * inv_sqrt[j];
    }
    out
}

/// Number of nodes a pooling step keeps before forced targets.
fn keep_count(n: usize, epsilon: f64) -> usize {
    // The small offset stops 0.3 * 10 = 3.0000000000000004 rounding up.
    (((epsilon * n as f64) - 1e-9).ceil().max(1.0) as usize).min(n)
}

/// Indices (ascending) of the nodes kept by a top-`⌈εN⌉` selection.
///
/// Higher scores win and equal scores go to the lower index. Every node in
/// `targets` is kept: a missing target replaces the lowest-ranked kept
/// non-target, and the set only grows past `⌈εN⌉` when targets alone
/// exceed it.
pub fn select_kept(scores: &[f64], epsilon: f64, targets: &[usize]) -> Vec<usize> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = order[..keep_count(n, epsilon)].to_vec();
    let mut targets: Vec<usize> = targets.to_vec();
    targets.sort_unstable();
    targets.dedup();
    for &t in &targets {
        if kept.contains(&t) {
            continue;
        }
        match kept.iter().rposition(|k| !targets.contains(k)) {
            Some(pos) => kept[pos] = t,
            None => kept.push(t),
        }
    }
    kept.sort_unstable();
    kept
}

/// Output of one pooling step.
pub struct Pooled<'t> {
    pub h: Tensor<'t>,
    pub adjacency: Array2<f64>,
    /// Kept node indices into the input graph, ascending.
    pub kept: Vec<usize>,
    pub lw_idx: Vec<usize>,
    pub cw_idx: Vec<usize>,
    /// Oriented score of every input node (`N × 1`).
    pub scores: Tensor<'t>,
}

fn mean_rows<'t>(tape: &'t Tape, h: Tensor<'t>, idx: &[usize]) -> Result<Tensor<'t>> {
    let w = Array2::from_elem((1, idx.len()), 1.0 / idx.len() as f64);
    Ok(tape.constant(w).matmul(h.gather_rows(idx)?)?)
}

/// Oriented pooling: scores each node by a graph-convolution attention
/// score combined with its cosine similarity to the location and celebrity
/// word nodes, then keeps the induced subgraph on the top nodes. Kept
/// features are not rescaled by their scores.
pub fn oriented_pooling<'t>(
    tape: &'t Tape,
    model: &Model,
    block: usize,
    h: Tensor<'t>,
    adjacency: &Array2<f64>,
    lw_idx: &[usize],
    cw_idx: &[usize],
) -> Result<Pooled<'t>> {
    let PoolParams { w_score, w_alpha } = model.ids.loc_pool[block];
    let p = |id| tape.param(&model.params, id);
    let a_hat = tape.constant(normalized_adjacency(adjacency));
    let s_attn = a_hat.matmul(h.matmul(p(w_score))?)?;
    let h_lw = mean_rows(tape, h, lw_idx)?;
    let h_cw = mean_rows(tape, h, cw_idx)?;
    let s_sim = h.cosine_rows(h_lw)?.mul(h.cosine_rows(h_cw)?)?;
    let scores = Tensor::concat_cols(&[s_attn, s_sim])?.matmul(p(w_alpha))?.tanh()?;

    let targets: Vec<usize> = lw_idx.iter().chain(cw_idx).copied().collect();
    let kept = {
        let s = scores.value();
        select_kept(s.as_slice().expect("contiguous column"), model.config.epsilon, &targets)
    };
    let remap = |idx: &[usize]| -> Vec<usize> {
        idx.iter()
            .map(|i| kept.binary_search(i).expect("targets are kept"))
            .collect()
    };
    let adjacency = adjacency.select(Axis(0), &kept).select(Axis(1), &kept);
    Ok(Pooled {
        h: h.gather_rows(&kept)?,
        adjacency,
        lw_idx: remap(lw_idx),
        cw_idx: remap(cw_idx),
        kept,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceiling_counts() {
        assert_eq!(select_kept(&[0.1, 0.5, 0.2, 0.9, 0.3], 0.5, &[]), vec![1, 3, 4]);
        assert_eq!(keep_count(10, 0.3), 3);
        assert_eq!(keep_count(3, 0.3), 1);
        assert_eq!(keep_count(60, 0.8), 48);
    }

    #[test]
    fn equal_scores_keep_lowest_indices() {
        assert_eq!(select_kept(&[0.2; 7], 0.5, &[]), vec![0, 1, 2, 3]);
    }

    #[test]
    fn targets_swap_out_lowest_ranked() {
        // Top 3 are 3, 1, 4; target 0 evicts node 4.
        assert_eq!(select_kept(&[0.1, 0.5, 0.2, 0.9, 0.3], 0.5, &[0]), vec![0, 1, 3]);
        assert_eq!(select_kept(&[0.9, 0.1, 0.2, 0.3], 0.3, &[1, 2]), vec![1, 2]);
        // Targets beyond the budget grow the set.
        assert_eq!(select_kept(&[0.9, 0.1, 0.2, 0.3], 0.3, &[1, 2, 3]), vec![1, 2, 3]);
    }

    #[test]
    fn normalization_of_path() {
        // Path 0-1-2 with self-loops: degrees 2, 3, 2.
        let adj = ndarray::array![[1.0, 1.0, 0.0], [1.0, 1.0, 1.0], [0.0, 1.0, 1.0]];
        let n = normalized_adjacency(&adj);
        let expected = ndarray::array![
            [0.5, 1.0 / 6f64.sqrt(), 0.0],
            [1.0 / 6f64.sqrt(), 1.0 / 3.0, 1.0 / 6f64.sqrt()],
            [0.0, 1.0 / 6f64.sqrt(), 0.5]
        ];
        assert!((n - expected).iter().all(|d| d.abs() < 1e-15));
    }
}
