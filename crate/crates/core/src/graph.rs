//! Directed-graph utilities on adjacency lists: strongly connected
//! components, condensation, topological order and cycle-length gcd.

use std::collections::VecDeque;

/// Strongly connected components by an iterative Tarjan search.
///
/// Returns `comp[v]` for every vertex. Components are numbered in reverse
/// topological order of the condensation: an edge `u -> v` between
/// different components always has `comp[u] > comp[v]`.
pub fn tarjan_scc(adj: &[Vec<usize>]) -> (Vec<usize>, usize) {
    let n = adj.len();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut n_comp = 0;
    // call stack of (vertex, next edge position)
    let mut calls: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        calls.push((root, 0));
        while let Some(&mut (v, ref mut pos)) = calls.last_mut() {
            if *pos == 0 && index[v] == UNSEEN {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = adj[v].get(*pos) {
                *pos += 1;
                if index[w] == UNSEEN {
                    calls.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            calls.pop();
            if let Some(&(parent, _)) = calls.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp[w] = n_comp;
                    if w == v {
                        break;
                    }
                }
                n_comp += 1;
            }
        }
    }
    (comp, n_comp)
}

/// Deduplicated component-level edges, self loops removed.
pub fn condensation(adj: &[Vec<usize>], comp: &[usize], n_comp: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); n_comp];
    for (u, targets) in adj.iter().enumerate() {
        for &v in targets {
            if comp[u] != comp[v] {
                out[comp[u]].push(comp[v]);
            }
        }
    }
    for row in &mut out {
        row.sort_unstable();
        row.dedup();
    }
    out
}

/// Kahn topological order; `None` if the graph has a cycle.
pub fn topological_order(adj: &[Vec<usize>]) -> Option<Vec<usize>> {
    let n = adj.len();
    let mut indeg = vec![0usize; n];
    for targets in adj {
        for &v in targets {
            indeg[v] += 1;
        }
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &v in &adj[u] {
            indeg[v] -= 1;
            if indeg[v] == 0 {
                queue.push_back(v);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Whether the subgraph induced by `members` contains a cycle (self loops
/// included).
pub fn has_cycle_within(adj: &[Vec<usize>], members: &[usize]) -> bool {
    let mut local = std::collections::HashMap::with_capacity(members.len());
    for (k, &v) in members.iter().enumerate() {
        local.insert(v, k);
    }
    let sub: Vec<Vec<usize>> = members
        .iter()
        .map(|&v| adj[v].iter().filter_map(|w| local.get(w).copied()).collect())
        .collect();
    topological_order(&sub).is_none()
}

/// Vertices reachable from `sources` (sources included).
pub fn reachable(adj: &[Vec<usize>], sources: &[usize]) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in sources {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

pub fn reverse(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); adj.len()];
    for (u, targets) in adj.iter().enumerate() {
        for &v in targets {
            out[v].push(u);
        }
    }
    out
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of a strongly connected vertex set: the gcd of its cycle lengths,
/// computed from BFS levels as `gcd(level[u] + 1 - level[v])` over internal
/// edges. Returns the period and the level of every member modulo it, or
/// `None` if the set carries no cycle.
pub fn period_and_levels(adj: &[Vec<usize>], members: &[usize]) -> Option<(usize, Vec<usize>)> {
    let first = *members.first()?;
    let mut inside = std::collections::HashMap::with_capacity(members.len());
    for (k, &v) in members.iter().enumerate() {
        inside.insert(v, k);
    }
    let mut level = vec![usize::MAX; members.len()];
    level[0] = 0;
    debug_assert_eq!(inside[&first], 0);
    let mut queue = VecDeque::from([first]);
    while let Some(u) = queue.pop_front() {
        let lu = level[inside[&u]];
        for &v in &adj[u] {
            if let Some(&kv) = inside.get(&v) {
                if level[kv] == usize::MAX {
                    level[kv] = lu + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    let mut g = 0usize;
    for &u in members {
        let lu = level[inside[&u]];
        if lu == usize::MAX {
            continue;
        }
        for &v in &adj[u] {
            if let Some(&kv) = inside.get(&v) {
                if level[kv] != usize::MAX {
                    let diff = (lu as i64 + 1 - level[kv] as i64).unsigned_abs() as usize;
                    g = gcd(g, diff);
                }
            }
        }
    }
    if g == 0 {
        return None;
    }
    Some((g, level.iter().map(|&l| if l == usize::MAX { 0 } else { l % g }).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scc_of_two_cycles_and_a_bridge() {
        // 0 <-> 1 -> 2 <-> 3, 4 isolated
        let adj = vec![vec![1], vec![0, 2], vec![3], vec![2], vec![]];
        let (comp, n) = tarjan_scc(&adj);
        assert_eq!(n, 3);
        assert_eq!(comp[0], comp[1]);
        assert_eq!(comp[2], comp[3]);
        assert_ne!(comp[0], comp[2]);
        // reverse topological numbering
        assert!(comp[1] > comp[2]);
        let dag = condensation(&adj, &comp, n);
        assert!(topological_order(&dag).is_some());
    }

    #[test]
    fn deep_chain_does_not_overflow() {
        let n = 200_000;
        let adj: Vec<Vec<usize>> = (0..n).map(|i| if i + 1 < n { vec![i + 1] } else { vec![0] }).collect();
        let (_, k) = tarjan_scc(&adj);
        assert_eq!(k, 1);
    }

    #[test]
    fn periods() {
        let two = vec![vec![1], vec![0]];
        assert_eq!(period_and_levels(&two, &[0, 1]).unwrap().0, 2);
        let three = vec![vec![1], vec![2], vec![0]];
        let (k, lv) = period_and_levels(&three, &[0, 1, 2]).unwrap();
        assert_eq!(k, 3);
        assert_eq!(lv, vec![0, 1, 2]);
        // a 2-cycle and a 3-cycle through a common vertex
        let mixed = vec![vec![1, 2], vec![0], vec![3], vec![0]];
        assert_eq!(period_and_levels(&mixed, &[0, 1, 2, 3]).unwrap().0, 1);
        assert!(period_and_levels(&[vec![]], &[0]).is_none());
        assert_eq!(period_and_levels(&[vec![0]], &[0]).unwrap().0, 1);
    }

    #[test]
    fn cycles_and_reachability() {
        let adj = vec![vec![1], vec![2], vec![1]];
        assert!(has_cycle_within(&adj, &[1, 2]));
        assert!(!has_cycle_within(&adj, &[0, 1]));
        assert_eq!(reachable(&adj, &[1]), vec![false, true, true]);
        assert_eq!(reverse(&adj), vec![vec![], vec![0, 2], vec![1]]);
    }
}
