//! Primal network simplex for the dense bipartite transportation problem.
//!
//! Sources `0..na`, sinks `na..na+nb`, and an artificial root joined to every
//! node by a high-cost arc that carries the initial supply. Pivots use block
//! search pricing and the strongly feasible leaving-arc rule, which rules out
//! cycling on degenerate instances.

use crate::error::{Error, Result};

pub(crate) struct Solution {
    /// Flow on arc `i * nb + j`.
    pub flow: Vec<f64>,
    /// Node potentials, reduced cost `c_ij + pi_i - pi_{na+j}`.
    pub pi: Vec<f64>,
    pub pivots: usize,
}

struct Tree {
    parent: Vec<usize>,
    pred: Vec<usize>,
    /// `true` when `pred[u]` points from `u` to its parent.
    up: Vec<bool>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    // scratch for the rebuild
    first_child: Vec<usize>,
    next_sibling: Vec<usize>,
    stack: Vec<usize>,
}

const NONE: usize = usize::MAX;

/// Solves `min sum c_ij x_ij` subject to `sum_j x_ij = supply[i]`,
/// `sum_i x_ij = -supply[na + j]`, `x >= 0`. Supplies must balance.
pub(crate) fn network_simplex(cost: &[f64], na: usize, nb: usize, supply: &[f64]) -> Result<Solution> {
    let n = na + nb;
    let m = na * nb;
    if cost.len() != m || supply.len() != n {
        return Err(Error::Internal("transport problem sizes disagree".into()));
    }
    let root = n;
    let mut max_c: f64 = 0.0;
    for &c in cost {
        if !c.is_finite() {
            return Err(Error::NonFinite("transport cost matrix".into()));
        }
        max_c = max_c.max(c.abs());
    }
    let art = (max_c + 1.0) * (n as f64 + 1.0);
    let tol = 1e-12 * (max_c + 1.0);
    let art_up: Vec<bool> = supply.iter().map(|&s| s >= 0.0).collect();

    let src = |e: usize| -> usize {
        if e < m {
            e / nb
        } else if art_up[e - m] {
            e - m
        } else {
            root
        }
    };
    let tgt = |e: usize| -> usize {
        if e < m {
            na + e % nb
        } else if art_up[e - m] {
            root
        } else {
            e - m
        }
    };
    let cst = |e: usize| -> f64 {
        if e < m {
            cost[e]
        } else {
            art
        }
    };

    let arcs = m + n;
    let mut flow = vec![0.0; arcs];
    let mut in_tree = vec![false; arcs];
    let mut tree = Tree {
        parent: vec![root; n + 1],
        pred: vec![NONE; n + 1],
        up: vec![false; n + 1],
        depth: vec![0; n + 1],
        pi: vec![0.0; n + 1],
        first_child: vec![NONE; n + 1],
        next_sibling: vec![NONE; n + 1],
        stack: Vec::with_capacity(n + 1),
    };
    tree.parent[root] = NONE;
    for u in 0..n {
        let e = m + u;
        tree.pred[u] = e;
        tree.up[u] = art_up[u];
        tree.depth[u] = 1;
        tree.pi[u] = if art_up[u] { -art } else { art };
        flow[e] = supply[u].abs();
        in_tree[e] = true;
    }

    let block = ((arcs as f64).sqrt().ceil() as usize).max(10);
    let mut next_arc = 0usize;
    let mut pivots = 0usize;
    let max_pivots = 64 * arcs + 1000;

    loop {
        // Block search pricing.
        let mut entering = NONE;
        let mut best = -tol;
        let mut cnt = block;
        let mut scanned = 0usize;
        let mut e = next_arc;
        while scanned < arcs {
            if !in_tree[e] {
                let rc = cst(e) + tree.pi[src(e)] - tree.pi[tgt(e)];
                if rc < best {
                    best = rc;
                    entering = e;
                }
            }
            scanned += 1;
            e += 1;
            if e == arcs {
                e = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if entering != NONE {
                    break;
                }
                cnt = block;
            }
        }
        if entering == NONE {
            break;
        }
        next_arc = e;
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Internal("network simplex exceeded its pivot limit".into()));
        }

        let si = src(entering);
        let ti = tgt(entering);
        let join = {
            let (mut a, mut b) = (si, ti);
            while a != b {
                if tree.depth[a] > tree.depth[b] {
                    a = tree.parent[a];
                } else if tree.depth[b] > tree.depth[a] {
                    b = tree.parent[b];
                } else {
                    a = tree.parent[a];
                    b = tree.parent[b];
                }
            }
            a
        };

        let mut delta = f64::INFINITY;
        let mut u_out = NONE;
        let mut side = 0;
        let mut u = si;
        while u != join {
            if tree.up[u] {
                let d = flow[tree.pred[u]];
                if d < delta {
                    delta = d;
                    u_out = u;
                    side = 1;
                }
            }
            u = tree.parent[u];
        }
        u = ti;
        while u != join {
            if !tree.up[u] {
                let d = flow[tree.pred[u]];
                if d <= delta {
                    delta = d;
                    u_out = u;
                    side = 2;
                }
            }
            u = tree.parent[u];
        }
        if side == 0 {
            return Err(Error::Internal("unbounded transport cycle".into()));
        }

        flow[entering] += delta;
        u = si;
        while u != join {
            let p = tree.pred[u];
            flow[p] += if tree.up[u] { -delta } else { delta };
            u = tree.parent[u];
        }
        u = ti;
        while u != join {
            let p = tree.pred[u];
            flow[p] += if tree.up[u] { delta } else { -delta };
            u = tree.parent[u];
        }

        let (u_in, v_in) = if side == 1 { (si, ti) } else { (ti, si) };
        in_tree[tree.pred[u_out]] = false;
        in_tree[entering] = true;
        flow[tree.pred[u_out]] = 0.0;

        // Re-hang the subtree of `u_out` from `v_in`, reversing the path.
        let mut x = u_in;
        let mut new_parent = v_in;
        let mut new_pred = entering;
        let mut new_up = src(entering) == u_in;
        loop {
            let old_parent = tree.parent[x];
            let old_pred = tree.pred[x];
            let old_up = tree.up[x];
            tree.parent[x] = new_parent;
            tree.pred[x] = new_pred;
            tree.up[x] = new_up;
            if x == u_out {
                break;
            }
            new_parent = x;
            new_pred = old_pred;
            new_up = !old_up;
            x = old_parent;
        }
        rebuild(&mut tree, root, &cst);
    }

    let art_flow: f64 = flow[m..].iter().sum();
    let total: f64 = supply.iter().filter(|s| **s > 0.0).sum();
    if art_flow > 1e-9 * total.max(1.0) {
        return Err(Error::Internal(format!(
            "transport problem infeasible: {art_flow} units left on artificial arcs"
        )));
    }
    flow.truncate(m);
    tree.pi.truncate(n);
    Ok(Solution {
        flow,
        pi: tree.pi,
        pivots,
    })
}

/// Recomputes depths and potentials from the parent pointers.
fn rebuild(tree: &mut Tree, root: usize, cst: &dyn Fn(usize) -> f64) {
    tree.first_child.fill(NONE);
    for u in 0..tree.parent.len() {
        if u != root {
            let p = tree.parent[u];
            tree.next_sibling[u] = tree.first_child[p];
            tree.first_child[p] = u;
        }
    }
    tree.stack.clear();
    tree.stack.push(root);
    tree.depth[root] = 0;
    tree.pi[root] = 0.0;
    while let Some(p) = tree.stack.pop() {
        let mut c = tree.first_child[p];
        while c != NONE {
            tree.depth[c] = tree.depth[p] + 1;
            let cost = cst(tree.pred[c]);
            tree.pi[c] = if tree.up[c] {
                tree.pi[p] - cost
            } else {
                tree.pi[p] + cost
            };
            tree.stack.push(c);
            c = tree.next_sibling[c];
        }
    }
}
