//! Least-squares isotonic regression under a rooted-tree order.

/// Minimize `Σ (y_i - π_i)²` subject to `π_parent >= π_child` for every edge.
///
/// Blocks are pooled greedily: the block with the largest mean among those
/// exceeding their parent block's mean is merged into the parent, until no
/// violation remains.
pub fn tree_isotonic(y: &[f64], parent: &[Option<usize>]) -> Vec<f64> {
    let n = y.len();
    assert_eq!(parent.len(), n, "parent map length");
    // Union-find over blocks; each block is rooted at its topmost node.
    let mut owner: Vec<usize> = (0..n).collect();
    fn find(owner: &mut [usize], mut i: usize) -> usize {
        while owner[i] != i {
            owner[i] = owner[owner[i]];
            i = owner[i];
        }
        i
    }
    let mut sum: Vec<f64> = y.to_vec();
    let mut count = vec![1.0; n];
    let mut alive = vec![true; n];
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for b in 0..n {
            if !alive[b] {
                continue;
            }
            let Some(par) = parent[b] else { continue };
            let pb = find(&mut owner, par);
            let mean = sum[b] / count[b];
            if mean > sum[pb] / count[pb] + 1e-12 && best.map_or(true, |(_, _, m)| mean > m) {
                best = Some((b, pb, mean));
            }
        }
        let Some((b, pb, _)) = best else { break };
        owner[b] = pb;
        sum[pb] += sum[b];
        count[pb] += count[b];
        alive[b] = false;
    }
    (0..n)
        .map(|i| {
            let b = find(&mut owner, i);
            sum[b] / count[b]
        })
        .collect()
}
