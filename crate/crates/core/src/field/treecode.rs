//! Treecode for the blob velocity. Sources are sorted into a quadtree
//! carrying complex multipole moments a_k = Σ Γ_j (z_j − c)^k. Targets get
//! their own quadtree; a dual traversal converts well-separated source
//! clusters into local expansions about target clusters, and leaves too
//! close for that are summed directly with the blob kernel.

use num_complex::Complex64;
use rayon::prelude::*;

use super::blob::VortexBlobField;
use super::mollifier::{MollifierProfile, MollifierSpec};
use super::p2p::{gaussian_block_kernel, BlockKernel};
use crate::kernel::INV_2PI;
use crate::{Error, Result, Vec2};

const MAX_DEPTH: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreecodeParams {
    /// Opening parameter: source and target clusters of radii r_s, r_t
    /// whose centres are d apart interact through expansions when
    /// r_s + r_t < θ·d.
    pub theta: f64,
    /// Highest multipole moment kept.
    pub order: usize,
    pub leaf_size: usize,
}

impl Default for TreecodeParams {
    fn default() -> Self {
        Self {
            theta: 0.7,
            order: 14,
            leaf_size: 64,
        }
    }
}

impl TreecodeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::param("theta", format!("must lie in (0, 1), got {}", self.theta)));
        }
        if self.order > 64 {
            return Err(Error::param("order", format!("at most 64, got {}", self.order)));
        }
        if self.leaf_size == 0 {
            return Err(Error::param("leaf_size", "must be positive"));
        }
        Ok(())
    }

    pub fn error_bound(&self) -> f64 {
        self.theta.powi(self.order as i32 + 1) / (1.0 - self.theta)
    }
}

#[derive(Debug, Clone)]
struct Node {
    center: Vec2,
    radius: f64,
    start: usize,
    end: usize,
    /// Index of the first child; children are contiguous. 0 for leaves.
    first_child: usize,
    n_children: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Treecode {
    params: TreecodeParams,
    xs: Vec<f64>,
    ys: Vec<f64>,
    ws: Vec<f64>,
    nodes: Vec<Node>,
    moments: Vec<Complex64>,
    eps: f64,
    mollifier: MollifierSpec,
    cutoff: f64,
}

impl Treecode {
    /// `None` when the cloud is empty or all particles coincide.
    pub(crate) fn build(field: &VortexBlobField, params: TreecodeParams) -> Option<Self> {
        let pos = field.positions();
        if pos.is_empty() {
            return None;
        }
        let mut idx: Vec<usize> = (0..pos.len()).collect();
        let nodes = build_nodes(pos, &mut idx, params.leaf_size);
        if nodes[0].radius == 0.0 {
            return None;
        }
        let xs: Vec<f64> = idx.iter().map(|&i| pos[i].x1).collect();
        let ys: Vec<f64> = idx.iter().map(|&i| pos[i].x2).collect();
        let ws: Vec<f64> = idx.iter().map(|&i| field.weights()[i]).collect();
        let stride = params.order + 1;
        let mut moments = vec![Complex64::new(0.0, 0.0); nodes.len() * stride];
        moments.par_chunks_mut(stride).zip(nodes.par_iter()).for_each(|(m, n)| {
            for k in n.start..n.end {
                let d = Complex64::new(xs[k] - n.center.x1, ys[k] - n.center.x2);
                let mut pw = Complex64::new(ws[k], 0.0);
                for mk in m.iter_mut() {
                    *mk += pw;
                    pw *= d;
                }
            }
        });
        let eps = field.blob_scale();
        let mollifier = *field.mollifier();
        Some(Self {
            params,
            xs,
            ys,
            ws,
            nodes,
            moments,
            eps,
            mollifier,
            cutoff: mollifier.kernel_cutoff(eps, 1e-3 * params.error_bound()),
        })
    }

    pub(crate) fn evaluate(&self, targets: &[Vec2]) -> Vec<Vec2> {
        if targets.is_empty() {
            return Vec::new();
        }
        let p = self.params.order;
        let stride = p + 1;
        let mut tidx: Vec<usize> = (0..targets.len()).collect();
        let tnodes = build_nodes(targets, &mut tidx, self.params.leaf_size);
        let (m2l, p2p) = self.interaction_lists(&tnodes);

        // Local expansions about target-node centres from the accepted
        // source clusters, then shifted down the target tree.
        let binom = binomials(2 * p + 1);
        let mut locals = vec![Complex64::new(0.0, 0.0); tnodes.len() * stride];
        locals
            .par_chunks_mut(stride)
            .zip(m2l.par_iter())
            .zip(tnodes.par_iter())
            .for_each(|((loc, list), tn)| {
                for &si in list {
                    self.multipole_to_local(si, tn.center, &binom, loc);
                }
            });
        for ti in 0..tnodes.len() {
            let tn = &tnodes[ti];
            for c in tn.first_child..tn.first_child + tn.n_children {
                let (parent, child) = split_pair(&mut locals, ti, c, stride);
                local_to_local(parent, tn.center, tnodes[c].center, &binom, child);
            }
        }

        let block = (self.mollifier.profile == MollifierProfile::Gaussian).then(gaussian_block_kernel);
        let leaves: Vec<usize> = (0..tnodes.len()).filter(|&i| tnodes[i].n_children == 0).collect();
        let parts: Vec<Vec<(usize, Vec2)>> = leaves
            .par_iter()
            .map(|&li| {
                let leaf = &tnodes[li];
                let loc = &locals[li * stride..(li + 1) * stride];
                tidx[leaf.start..leaf.end]
                    .iter()
                    .map(|&ti| {
                        let x = targets[ti];
                        let far = eval_local(loc, x - leaf.center);
                        (ti, far + self.near_field(x, &p2p[li], block))
                    })
                    .collect()
            })
            .collect();
        let mut out = vec![Vec2::ZERO; targets.len()];
        for part in parts {
            for (i, v) in part {
                out[i] = v;
            }
        }
        out
    }

    /// Dual traversal of the target and source trees. Returns, per target
    /// node, the source clusters to expand about it, and per target leaf
    /// the source leaves to sum directly.
    fn interaction_lists(&self, tnodes: &[Node]) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let mut m2l = vec![Vec::new(); tnodes.len()];
        let mut p2p = vec![Vec::new(); tnodes.len()];
        let mut stack = vec![(0usize, 0usize)];
        while let Some((ti, si)) = stack.pop() {
            let t = &tnodes[ti];
            let s = &self.nodes[si];
            let d = (s.center - t.center).norm();
            let reach = s.radius + t.radius;
            if reach < self.params.theta * d && d - reach > self.cutoff {
                m2l[ti].push(si);
                continue;
            }
            let t_leaf = t.n_children == 0;
            let s_leaf = s.n_children == 0;
            if t_leaf && s_leaf {
                p2p[ti].push(si);
            } else if t_leaf || (!s_leaf && s.radius >= t.radius) {
                for c in (s.first_child..s.first_child + s.n_children).rev() {
                    stack.push((ti, c));
                }
            } else {
                for c in (t.first_child..t.first_child + t.n_children).rev() {
                    stack.push((c, si));
                }
            }
        }
        (m2l, p2p)
    }

    /// L_l += (−1)^l Σ_k a_k C(k+l, l) / D^{k+l+1}, D = c_t − c_s.
    fn multipole_to_local(&self, si: usize, target_center: Vec2, binom: &[Vec<f64>], loc: &mut [Complex64]) {
        let stride = self.params.order + 1;
        let a = &self.moments[si * stride..(si + 1) * stride];
        let s = &self.nodes[si];
        let dinv = Complex64::new(target_center.x1 - s.center.x1, target_center.x2 - s.center.x2).inv();
        // powers D^{-(n+1)} for n = 0..=2p
        let mut pw = Vec::with_capacity(2 * stride);
        let mut cur = dinv;
        for _ in 0..2 * stride - 1 {
            pw.push(cur);
            cur *= dinv;
        }
        for (l, out) in loc.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, ak) in a.iter().enumerate() {
                acc += ak * (binom[k + l][l] * pw[k + l]);
            }
            if l % 2 == 1 {
                acc = -acc;
            }
            *out += acc;
        }
    }

    fn near_field(&self, x: Vec2, leaves: &[usize], block: Option<BlockKernel>) -> Vec2 {
        let (mut u, mut v) = (0.0, 0.0);
        if let Some(kernel) = block {
            let inv_2eps2 = 0.5 / (self.eps * self.eps);
            for &ni in leaves {
                let n = &self.nodes[ni];
                let r = n.start..n.end;
                let (du, dv) = kernel(x.x1, x.x2, &self.xs[r.clone()], &self.ys[r.clone()], &self.ws[r], inv_2eps2);
                u += du;
                v += dv;
            }
            return Vec2::new(u, v);
        }
        let cut2 = self.cutoff * self.cutoff;
        for &ni in leaves {
            let n = &self.nodes[ni];
            for k in n.start..n.end {
                let dx = x.x1 - self.xs[k];
                let dy = x.x2 - self.ys[k];
                let r2 = dx * dx + dy * dy;
                if r2 == 0.0 {
                    continue;
                }
                let m = if r2 >= cut2 {
                    1.0
                } else {
                    self.mollifier.mass_fraction(r2, self.eps)
                };
                let f = self.ws[k] * m * INV_2PI / r2;
                u -= f * dy;
                v += f * dx;
            }
        }
        Vec2::new(u, v)
    }
}

/// Σ_l L_l ξ^l turned into a velocity: u − iv = S / 2πi.
fn eval_local(loc: &[Complex64], xi: Vec2) -> Vec2 {
    let z = Complex64::new(xi.x1, xi.x2);
    let mut h = loc[loc.len() - 1];
    for k in (0..loc.len() - 1).rev() {
        h = h * z + loc[k];
    }
    Vec2::new(h.im * INV_2PI, h.re * INV_2PI)
}

/// Re-expands a local expansion about a new centre.
fn local_to_local(parent: &[Complex64], from: Vec2, to: Vec2, binom: &[Vec<f64>], child: &mut [Complex64]) {
    let e = Complex64::new(to.x1 - from.x1, to.x2 - from.x2);
    let p = parent.len();
    let mut epow = vec![Complex64::new(1.0, 0.0); p];
    for i in 1..p {
        epow[i] = epow[i - 1] * e;
    }
    for (m, out) in child.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for l in m..p {
            acc += parent[l] * (binom[l][m] * epow[l - m]);
        }
        *out += acc;
    }
}

fn split_pair(buf: &mut [Complex64], parent: usize, child: usize, stride: usize) -> (&[Complex64], &mut [Complex64]) {
    debug_assert!(child > parent);
    let (lo, hi) = buf.split_at_mut(child * stride);
    (&lo[parent * stride..(parent + 1) * stride], &mut hi[..stride])
}

/// Pascal triangle rows 0..=n.
fn binomials(n: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut row = vec![1.0; i + 1];
        for j in 1..i {
            row[j] = rows[i - 1][j - 1] + rows[i - 1][j];
        }
        rows.push(row);
    }
    rows
}

/// Quadtree over `points`; permutes `idx` so every node owns a contiguous
/// range. Node 0 is the root.
fn build_nodes(points: &[Vec2], idx: &mut [usize], leaf_size: usize) -> Vec<Node> {
    let mut nodes = vec![make_node(points, idx, 0, idx.len())];
    let (lo, hi) = bbox(points, idx);
    let side = (hi.x1 - lo.x1).max(hi.x2 - lo.x2);
    let mut work = vec![(0usize, lo, side, 0usize)];
    while let Some((ni, lo, side, depth)) = work.pop() {
        let (start, end) = (nodes[ni].start, nodes[ni].end);
        if end - start <= leaf_size || depth >= MAX_DEPTH || nodes[ni].radius == 0.0 {
            continue;
        }
        let half = 0.5 * side;
        let mid = lo + Vec2::new(half, half);
        let quad = |p: Vec2| (p.x1 >= mid.x1) as usize + 2 * (p.x2 >= mid.x2) as usize;
        let slice = &mut idx[start..end];
        slice.sort_by_key(|&i| quad(points[i]));
        let mut bounds = [start; 5];
        for q in 0..4 {
            bounds[q + 1] = bounds[q] + slice.iter().filter(|&&i| quad(points[i]) == q).count();
        }
        let first = nodes.len();
        let mut count = 0;
        for q in 0..4 {
            if bounds[q + 1] > bounds[q] {
                let child = make_node(points, idx, bounds[q], bounds[q + 1]);
                nodes.push(child);
                let clo = lo + Vec2::new(half * (q & 1) as f64, half * (q >> 1) as f64);
                work.push((first + count, clo, half, depth + 1));
                count += 1;
            }
        }
        nodes[ni].first_child = first;
        nodes[ni].n_children = count;
    }
    nodes
}

fn bbox(points: &[Vec2], idx: &[usize]) -> (Vec2, Vec2) {
    let p0 = points[idx[0]];
    idx.iter().fold((p0, p0), |(lo, hi), &i| {
        let p = points[i];
        (
            Vec2::new(lo.x1.min(p.x1), lo.x2.min(p.x2)),
            Vec2::new(hi.x1.max(p.x1), hi.x2.max(p.x2)),
        )
    })
}

fn make_node(points: &[Vec2], idx: &[usize], start: usize, end: usize) -> Node {
    let (lo, hi) = bbox(points, &idx[start..end]);
    let center = (lo + hi) * 0.5;
    let radius = idx[start..end]
        .iter()
        .map(|&i| (points[i] - center).norm())
        .fold(0.0, f64::max);
    Node {
        center,
        radius,
        start,
        end,
        first_child: 0,
        n_children: 0,
    }
}
