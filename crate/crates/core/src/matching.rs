//! Greedy decomposition of an edge set into matchings.

use crate::graph::FiniteGraph;

/// Edge classes `E_1, …, E_N`, each a matching, together covering every edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchingDecomposition {
    pub classes: Vec<Vec<(u32, u32)>>,
    /// The edge order the greedy passes scanned.
    pub order: Vec<(u32, u32)>,
}

impl MatchingDecomposition {
    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Checks that every class is a matching and the classes partition `edges`.
    pub fn validate(&self, n: usize, edges: &[(u32, u32)]) -> Result<(), String> {
        let mut seen = std::collections::HashSet::new();
        for (k, class) in self.classes.iter().enumerate() {
            let mut used = vec![false; n];
            for &(u, v) in class {
                for x in [u, v] {
                    if std::mem::replace(&mut used[x as usize], true) {
                        return Err(format!("class {} touches vertex {x} twice", k + 1));
                    }
                }
                if !seen.insert((u.min(v), u.max(v))) {
                    return Err(format!("edge {{{u}, {v}}} appears in two classes"));
                }
            }
        }
        let all: std::collections::HashSet<_> = edges.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
        if all != seen {
            return Err(format!("classes cover {} of {} edges", seen.len(), all.len()));
        }
        Ok(())
    }
}

/// Pass `k` scans `order` and adds each still-unassigned edge that shares no
/// vertex with the edges already placed in `E_k`. Passes repeat until every
/// edge is assigned. With maximum degree `h` at most `2h - 1` passes run.
pub fn greedy_matching_decomposition_with_order(n: usize, order: &[(u32, u32)]) -> MatchingDecomposition {
    let mut assigned = vec![false; order.len()];
    let mut remaining = order.len();
    let mut classes = Vec::new();
    let mut stamp = vec![usize::MAX; n];
    while remaining > 0 {
        let pass = classes.len();
        let mut class = Vec::new();
        for (i, &(u, v)) in order.iter().enumerate() {
            if assigned[i] || stamp[u as usize] == pass || stamp[v as usize] == pass {
                continue;
            }
            stamp[u as usize] = pass;
            stamp[v as usize] = pass;
            assigned[i] = true;
            remaining -= 1;
            class.push((u, v));
        }
        classes.push(class);
    }
    MatchingDecomposition {
        classes,
        order: order.to_vec(),
    }
}

/// Greedy decomposition using the lexicographic edge order.
pub fn greedy_matching_decomposition(g: &FiniteGraph) -> MatchingDecomposition {
    let mut order = g.edges().to_vec();
    order.sort_unstable();
    greedy_matching_decomposition_with_order(g.vertex_count(), &order)
}
