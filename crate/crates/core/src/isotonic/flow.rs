//! Maximum-weight closed sets via min-cut, the splitting engine of the exact
//! solver.
//!
//! A closed set of a DAG contains every successor of each member. The
//! classical reduction finds a maximum-weight closed set with one max-flow:
//! source arcs carry the positive node weights, sink arcs the negated negative
//! ones, precedence arcs are uncuttable. The nodes that cannot reach the sink
//! in the final residual network form the *largest* maximizer, which is what
//! the solver's threshold argument needs.

/// Dinic max-flow over adjacency lists stored as paired arcs (arc `a` and its
/// reverse `a ^ 1`). Capacities are nonnegative doubles; augmenting always
/// zeroes the bottleneck arc exactly, so every phase terminates.
pub(crate) struct FlowGraph {
    first: Vec<i32>,
    arc_to: Vec<u32>,
    arc_next: Vec<i32>,
    arc_cap: Vec<f64>,
}

impl FlowGraph {
    pub fn new(nodes: usize) -> Self {
        FlowGraph {
            first: vec![-1; nodes],
            arc_to: Vec::new(),
            arc_next: Vec::new(),
            arc_cap: Vec::new(),
        }
    }

    pub fn add_edge(&mut self, u: usize, v: usize, cap: f64) {
        debug_assert!(cap >= 0.0);
        let id = self.arc_to.len() as i32;
        self.arc_to.push(v as u32);
        self.arc_next.push(self.first[u]);
        self.arc_cap.push(cap);
        self.first[u] = id;
        self.arc_to.push(u as u32);
        self.arc_next.push(self.first[v]);
        self.arc_cap.push(0.0);
        self.first[v] = id + 1;
    }

    /// Breadth-first layering over arcs with positive residual capacity.
    /// Returns false when the sink is unreachable (flow is maximal). The whole
    /// layer graph is labeled; stopping at the sink's first discovery would
    /// hide alternative shortest paths and break the phase-progress argument.
    fn layer(&self, s: usize, t: usize, level: &mut [i32], queue: &mut Vec<u32>) -> bool {
        level.fill(-1);
        level[s] = 0;
        queue.clear();
        queue.push(s as u32);
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head] as usize;
            head += 1;
            let mut a = self.first[u];
            while a >= 0 {
                let arc = a as usize;
                let v = self.arc_to[arc] as usize;
                if self.arc_cap[arc] > 0.0 && level[v] < 0 {
                    level[v] = level[u] + 1;
                    queue.push(v as u32);
                }
                a = self.arc_next[arc];
            }
        }
        level[t] >= 0
    }

    /// One blocking flow on the current layering, by iterative depth-first
    /// augmentation with the current-arc optimization.
    fn blocking_flow(&mut self, s: usize, t: usize, level: &[i32], iter: &mut [i32]) -> f64 {
        iter.copy_from_slice(&self.first);
        let mut pushed = 0.0;
        let mut path: Vec<u32> = Vec::new();
        let mut u = s;
        loop {
            if u == t {
                let mut delta = f64::INFINITY;
                for &a in &path {
                    delta = delta.min(self.arc_cap[a as usize]);
                }
                for &a in &path {
                    let arc = a as usize;
                    self.arc_cap[arc] -= delta;
                    self.arc_cap[arc ^ 1] += delta;
                }
                // Rewind to the first saturated arc's tail; the bottleneck arc
                // hits exactly zero, so progress is guaranteed.
                let mut rewind = path.len();
                for (pos, &a) in path.iter().enumerate() {
                    if self.arc_cap[a as usize] <= 0.0 {
                        rewind = pos;
                        break;
                    }
                }
                path.truncate(rewind);
                u = match path.last() {
                    Some(&a) => self.arc_to[a as usize] as usize,
                    None => s,
                };
                pushed += delta;
                continue;
            }
            // Advance along an admissible arc, or retreat.
            let mut advanced = false;
            while iter[u] >= 0 {
                let arc = iter[u] as usize;
                let v = self.arc_to[arc] as usize;
                if self.arc_cap[arc] > 0.0 && level[v] == level[u] + 1 {
                    path.push(arc as u32);
                    u = v;
                    advanced = true;
                    break;
                }
                iter[u] = self.arc_next[arc];
            }
            if advanced {
                continue;
            }
            if u == s {
                break;
            }
            // Dead end: drop the last path arc and mark it exhausted there.
            let a = path.pop().expect("non-source dead end has a path arc");
            u = match path.last() {
                Some(&b) => self.arc_to[b as usize] as usize,
                None => s,
            };
            iter[u] = self.arc_next[a as usize];
        }
        pushed
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let n = self.first.len();
        let mut level = vec![-1i32; n];
        let mut iter = vec![-1i32; n];
        let mut queue = Vec::with_capacity(n);
        let mut total = 0.0;
        while self.layer(s, t, &mut level, &mut queue) {
            total += self.blocking_flow(s, t, &level, &mut iter);
        }
        total
    }

    /// Nodes with a positive-residual path to `t`, found by walking incoming
    /// residual arcs backward from `t` (each arc's reverse lives at its head).
    fn can_reach_sink(&self, t: usize) -> Vec<bool> {
        let n = self.first.len();
        let mut reach = vec![false; n];
        reach[t] = true;
        let mut queue = vec![t as u32];
        let mut head = 0;
        while head < queue.len() {
            let x = queue[head] as usize;
            head += 1;
            let mut a = self.first[x];
            while a >= 0 {
                let arc = a as usize;
                let y = self.arc_to[arc] as usize;
                // Arc `arc ^ 1` runs y -> x; positive capacity there means y
                // can step to x.
                if !reach[y] && self.arc_cap[arc ^ 1] > 0.0 {
                    reach[y] = true;
                    queue.push(y as u32);
                }
                a = self.arc_next[arc];
            }
        }
        reach
    }
}

/// The largest maximum-weight closed set of the DAG whose precedence pairs
/// `(a, b)` read "a in the set forces b in the set". The empty set is always
/// closed, so the maximum is at least 0.
pub(crate) fn max_closure(weights: &[f64], pairs: &[(u32, u32)]) -> Vec<bool> {
    let n = weights.len();
    let mut g = FlowGraph::new(n + 2);
    let (s, t) = (n, n + 1);
    for (i, &wt) in weights.iter().enumerate() {
        if wt > 0.0 {
            g.add_edge(s, i, wt);
        } else if wt < 0.0 {
            g.add_edge(i, t, -wt);
        }
    }
    for &(a, b) in pairs {
        g.add_edge(a as usize, b as usize, f64::INFINITY);
    }
    g.max_flow(s, t);
    let reach = g.can_reach_sink(t);
    (0..n).map(|i| !reach[i]).collect()
}
