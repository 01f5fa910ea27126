//! Dinic's maximum flow on real capacities.

const EPS: f64 = 1e-15;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    cap: f64,
}

/// Directed flow network with residual edges stored in pairs.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    edges: Vec<Edge>,
}

impl FlowNetwork {
    pub fn new(n: usize) -> Self {
        Self { adj: vec![Vec::new(); n], edges: Vec::new() }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0.0 });
    }

    fn bfs(&self, s: usize, t: usize, level: &mut [i64]) -> bool {
        level.iter_mut().for_each(|l| *l = -1);
        level[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let edge = &self.edges[e];
                if edge.cap > EPS && level[edge.to] < 0 {
                    level[edge.to] = level[u] + 1;
                    queue.push_back(edge.to);
                }
            }
        }
        level[t] >= 0
    }

    fn dfs(&mut self, u: usize, t: usize, pushed: f64, level: &[i64], it: &mut [usize]) -> f64 {
        if u == t {
            return pushed;
        }
        while it[u] < self.adj[u].len() {
            let e = self.adj[u][it[u]];
            let (to, cap) = (self.edges[e].to, self.edges[e].cap);
            if cap > EPS && level[to] == level[u] + 1 {
                let d = self.dfs(to, t, pushed.min(cap), level, it);
                if d > EPS {
                    self.edges[e].cap -= d;
                    self.edges[e ^ 1].cap += d;
                    return d;
                }
            }
            it[u] += 1;
        }
        0.0
    }

    /// Maximum flow value from `s` to `t`; consumes residual capacity.
    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let n = self.adj.len();
        let mut flow = 0.0;
        let mut level = vec![-1i64; n];
        while self.bfs(s, t, &mut level) {
            let mut it = vec![0usize; n];
            loop {
                let f = self.dfs(s, t, f64::INFINITY, &level, &mut it);
                if f <= EPS {
                    break;
                }
                flow += f;
            }
        }
        flow
    }
}

/// Maximum transportable mass between weights `a` and `b` along allowed pairs.
pub fn bipartite_flow(a: &[f64], b: &[f64], allowed: impl Fn(usize, usize) -> bool) -> f64 {
    let (n, m) = (a.len(), b.len());
    let s = n + m;
    let t = s + 1;
    let mut net = FlowNetwork::new(n + m + 2);
    for (i, &w) in a.iter().enumerate() {
        net.add_edge(s, i, w);
    }
    for (j, &w) in b.iter().enumerate() {
        net.add_edge(n + j, t, w);
    }
    for i in 0..n {
        for j in 0..m {
            if allowed(i, j) {
                net.add_edge(i, n + j, f64::INFINITY);
            }
        }
    }
    net.max_flow(s, t)
}
