use crate::geometry::Point2;

use super::{ColumnGraph, GraphSearchError};

/// One selected node per column, closed cyclically.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub selection: Vec<usize>,
    pub points: Vec<Point2>,
    /// Sum of the selected node costs, accumulated in column order.
    pub cost: f64,
}

impl Contour {
    pub fn is_closed(&self, delta: usize) -> bool {
        let n = self.selection.len();
        (0..n).all(|i| self.selection[i].abs_diff(self.selection[(i + 1) % n]) <= delta)
    }
}

/// Globally minimal closed path through the column graph.
///
/// Forced columns admit only their forced node. The DP is anchored at the
/// first forced column (start node = end node); without forced columns it is
/// rerun for every start node of column 0 and the cheapest closure wins.
/// Ties resolve to the lowest node indices.
pub fn solve_closed_path(graph: &ColumnGraph) -> Result<Contour, GraphSearchError> {
    let n = graph.n_columns;
    let m = graph.nodes_per_column;
    let delta = graph.smoothness_delta;
    if n == 0 || m == 0 {
        return Err(GraphSearchError::Infeasible("empty graph".into()));
    }
    let admissible = |col: usize, node: usize| graph.forced_node[col].is_none_or(|f| f == node);

    let anchor = graph.forced_node.iter().position(|f| f.is_some()).unwrap_or(0);
    let starts: Vec<usize> = (0..m).filter(|&s| admissible(anchor, s)).collect();

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut dp = vec![f64::INFINITY; m];
    let mut next = vec![f64::INFINITY; m];
    // parent[k][j]: node chosen at step k-1 when step k picks j
    let mut parent = vec![vec![usize::MAX; m]; n];

    for &s in &starts {
        dp.iter_mut().for_each(|v| *v = f64::INFINITY);
        dp[s] = graph.cost_at(anchor, s);
        for k in 1..n {
            let col = (anchor + k) % n;
            for j in 0..m {
                next[j] = f64::INFINITY;
                parent[k][j] = usize::MAX;
                if !admissible(col, j) {
                    continue;
                }
                let lo = j.saturating_sub(delta);
                let hi = (j + delta).min(m - 1);
                let mut arg = usize::MAX;
                let mut val = f64::INFINITY;
                for (i, &v) in dp.iter().enumerate().take(hi + 1).skip(lo) {
                    if v < val {
                        val = v;
                        arg = i;
                    }
                }
                if arg != usize::MAX {
                    next[j] = val + graph.cost_at(col, j);
                    parent[k][j] = arg;
                }
            }
            std::mem::swap(&mut dp, &mut next);
        }
        // closure back to the start node
        let lo = s.saturating_sub(delta);
        let hi = (s + delta).min(m - 1);
        let mut end = usize::MAX;
        let mut val = f64::INFINITY;
        for (j, &v) in dp.iter().enumerate().take(hi + 1).skip(lo) {
            if v < val {
                val = v;
                end = j;
            }
        }
        if end == usize::MAX {
            continue;
        }
        if best.as_ref().is_none_or(|(b, _)| val < *b) {
            let mut path = vec![0usize; n];
            let mut j = end;
            for k in (1..n).rev() {
                path[(anchor + k) % n] = j;
                j = parent[k][j];
            }
            path[anchor] = j;
            debug_assert_eq!(j, s);
            best = Some((val, path));
        }
    }

    let Some((_, selection)) = best else {
        return Err(GraphSearchError::Infeasible(
            "forced nodes are farther apart than the smoothness constraint allows".into(),
        ));
    };
    if let Some(col) = (0..n).find(|&c| graph.is_excluded(c, selection[c])) {
        return Err(GraphSearchError::Infeasible(format!(
            "optimum still uses an excluded node at column {col}"
        )));
    }
    let cost = (0..n).map(|c| graph.cost_at(c, selection[c])).sum();
    let points = (0..n).map(|c| graph.node_position(c, selection[c])).collect();
    Ok(Contour {
        selection,
        points,
        cost,
    })
}
