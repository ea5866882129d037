#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use citedtcr::agents::Strategy;
use citedtcr::dataset::ReplayPlan;
use citedtcr::graph::NodeId;
use citedtcr::peer_prediction::{
    settle_pending, JointSignals, PendingSettlement, PendingTriple, ReportRecord, ReportStock,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

pub fn fixture_plan() -> ReplayPlan {
    let text = std::fs::read_to_string(data_path("hepth_like_plan.json")).unwrap();
    ReplayPlan::from_json(&text).unwrap()
}

pub fn ids(v: &[u64]) -> Vec<NodeId> {
    v.iter().map(|&x| NodeId(x)).collect()
}

/// Stationary vector of the teleporting random walk on the undirected view
/// of `edges`, as the null vector of `G - I` from a dense SVD. Dangling
/// nodes jump according to `teleport`.
pub fn dense_stationary(nodes: &[NodeId], edges: &[(NodeId, NodeId)], alpha: f64, teleport: &[f64]) -> Vec<f64> {
    let k = nodes.len();
    let pos: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut adj = DMatrix::<f64>::zeros(k, k);
    for &(a, b) in edges {
        let (i, j) = (pos[&a], pos[&b]);
        adj[(i, j)] = 1.0;
        adj[(j, i)] = 1.0;
    }
    let mut g = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        let deg: f64 = adj.row(i).sum();
        for j in 0..k {
            // column i: where the walker goes from i
            let step = if deg > 0.0 { adj[(i, j)] / deg } else { teleport[j] };
            g[(j, i)] = (1.0 - alpha) * step + alpha * teleport[j];
        }
    }
    let m = g - DMatrix::<f64>::identity(k, k);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.unwrap();
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let v: Vec<f64> = v_t.row(idx).iter().copied().collect();
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

pub fn uniform_teleport(k: usize) -> Vec<f64> {
    vec![1.0 / k as f64; k]
}

pub fn base_teleport(nodes: &[NodeId], base: &[NodeId]) -> Vec<f64> {
    let b = base.len() as f64;
    nodes.iter().map(|v| if base.contains(v) { 1.0 / b } else { 0.0 }).collect()
}

/// Cycle check by repeatedly deleting sinks.
pub fn has_cycle(k: usize, edges: &[(usize, usize)]) -> bool {
    let mut alive = vec![true; k];
    loop {
        let sink = (0..k).find(|&v| alive[v] && !edges.iter().any(|&(a, b)| a == v && alive[b]));
        match sink {
            Some(v) => alive[v] = false,
            None => return alive.iter().any(|&a| a),
        }
    }
}

/// Weakly connected components by union-find.
pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(k: usize) -> Self {
        UnionFind { parent: (0..k).collect() }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut y = x;
        while self.parent[y] != r {
            let next = self.parent[y];
            self.parent[y] = r;
            y = next;
        }
        r
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Spearman by explicit rank assignment: each value's rank is one plus the
/// count of strictly smaller values plus half the count of other equal ones.
pub fn spearman_oracle(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|a| {
                let less = v.iter().filter(|b| *b < a).count() as f64;
                let eq = v.iter().filter(|b| *b == a).count() as f64;
                less + (eq + 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Mean settled reward over `samples` independent worlds, each holding one
/// shared task (signals drawn from `joint`) plus two private tasks per
/// curator (signals drawn from the marginals), settled by the engine's own
/// settlement routine.
pub fn mc_theta_mean(joint: &JointSignals, sc: &Strategy, sp: &Strategy, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, p) = (NodeId(1), NodeId(2));
    let mut total = 0i64;
    for _ in 0..samples {
        let u: f64 = rng.random();
        let (a, b) = if u < joint.p[0][0] {
            (0, 0)
        } else if u < joint.p[0][0] + joint.p[0][1] {
            (0, 1)
        } else if u < joint.p[0][0] + joint.p[0][1] + joint.p[1][0] {
            (1, 0)
        } else {
            (1, 1)
        };
        let mut stock = ReportStock::new();
        let push = |stock: &mut ReportStock, who: NodeId, task: u64, signal: usize, s: &Strategy, rng: &mut ChaCha8Rng| {
            let report = s.report(signal == 1, rng);
            stock.push(ReportRecord { curator: who, task: NodeId(task), report, period: 0 });
        };
        push(&mut stock, c, 100, a, sc, &mut rng);
        push(&mut stock, p, 100, b, sp, &mut rng);
        for t in [101, 102] {
            let s = usize::from(rng.random::<f64>() >= joint.marginal_c(0));
            push(&mut stock, c, t, s, sc, &mut rng);
        }
        for t in [201, 202] {
            let s = usize::from(rng.random::<f64>() >= joint.marginal_peer(0));
            push(&mut stock, p, t, s, sp, &mut rng);
        }
        let mut pending = PendingSettlement::new();
        pending.push(PendingTriple { curator: c, peer: p, task: NodeId(100), period: 0 });
        let settled = settle_pending(&stock, &mut pending, &mut rng);
        assert_eq!(settled.len(), 1);
        total += i64::from(settled[0].theta);
    }
    total as f64 / samples as f64
}

/// Random positively correlated joint: a mixture of perfect agreement and
/// independence with weight `w` on agreement.
pub fn random_positive_joint(rng: &mut ChaCha8Rng) -> JointSignals {
    let q: f64 = rng.random_range(0.05..0.95);
    let r: f64 = rng.random_range(0.05..0.95);
    let w: f64 = rng.random_range(0.05..0.95);
    let ind = JointSignals::independent(q, r).unwrap();
    let mut p = [[0.0; 2]; 2];
    for (a, row) in p.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            *v = (1.0 - w) * ind.p[a][b];
        }
    }
    p[0][0] += w * q;
    p[1][1] += w * (1.0 - q);
    JointSignals::new(p).unwrap()
}
