//! Regular multigraphs as rotation maps, their random-walk matrices,
//! graph products (power, tensor, replacement), certified spectral-gap
//! bounds, and the recursive expander family.
//!
//! A d-regular multigraph on [n] is stored as an involution on
//! [n]×[d]: slot (v,i) maps to (u,j) when the i-th edge endpoint at v
//! is the j-th endpoint at u. Self-loops are fixed points of the
//! involution and contribute 1/d to the diagonal of the walk matrix.

use crate::error::{Error, Result};
use crate::exactmath::{rat, rat_int, Rat};
use nalgebra::DMatrix;
use num::{BigInt, FromPrimitive, One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::fmt::Write as _;

/// d-regular multigraph on `n` vertices, edges given by a rotation map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RotationGraph {
    n: usize,
    d: usize,
    /// rot[v*d + i] = (u, j); an involution on [n]×[d]
    rot: Vec<(u32, u32)>,
}

impl RotationGraph {
    pub fn new(n: usize, d: usize, rot: Vec<(u32, u32)>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Shape(format!("need n,d >= 1, got n={n} d={d}")));
        }
        if rot.len() != n * d {
            return Err(Error::Shape(format!(
                "rotation table has {} entries, expected {}",
                rot.len(),
                n * d
            )));
        }
        let g = RotationGraph { n, d, rot };
        for v in 0..n {
            for i in 0..d {
                let (u, j) = g.rot(v, i);
                if u >= n || j >= d {
                    return Err(Error::Index(format!(
                        "rot({v},{i}) = ({u},{j}) out of range"
                    )));
                }
                if g.rot(u, j) != (v, i) {
                    return Err(Error::Construction(format!(
                        "rotation map is not an involution at ({v},{i})"
                    )));
                }
            }
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rot(&self, v: usize, i: usize) -> (usize, usize) {
        let (u, j) = self.rot[v * self.d + i];
        (u as usize, j as usize)
    }

    /// Cycle on n vertices, degree 2 (n=1 gives two fixed-point loops... n>=3 required).
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Parameter(format!("cycle needs n >= 3, got {n}")));
        }
        let mut rot = vec![(0u32, 0u32); n * 2];
        for v in 0..n {
            let next = (v + 1) % n;
            let prev = (v + n - 1) % n;
            rot[v * 2] = (next as u32, 1);
            rot[v * 2 + 1] = (prev as u32, 0);
        }
        Self::new(n, 2, rot)
    }

    /// Complete graph K_n as an (n-1)-regular graph without self-loops.
    pub fn complete(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter(format!("complete needs n >= 2, got {n}")));
        }
        let d = n - 1;
        let mut rot = vec![(0u32, 0u32); n * d];
        for v in 0..n {
            for i in 0..d {
                // port i at v talks to vertex u, skipping v itself
                let u = if i < v { i } else { i + 1 };
                let j = if v < u { v } else { v - 1 };
                rot[v * d + i] = (u as u32, j as u32);
            }
        }
        Self::new(n, d, rot)
    }

    /// One vertex whose d slots are all fixed-point self-loops.
    pub fn loops(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Parameter("loops needs d >= 1".into()));
        }
        let rot = (0..d).map(|i| (0u32, i as u32)).collect();
        Self::new(1, d, rot)
    }

    /// d/n parallel edges between every ordered pair (including loops):
    /// the walk matrix is exactly J. Requires n | d.
    pub fn complete_mixer(n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 || d % n != 0 {
            return Err(Error::Parameter(format!(
                "complete_mixer needs n | d, got n={n} d={d}"
            )));
        }
        let c = d / n;
        let mut rot = vec![(0u32, 0u32); n * d];
        for v in 0..n {
            for u in 0..n {
                for k in 0..c {
                    rot[v * d + (u * c + k)] = (u as u32, (v * c + k) as u32);
                }
            }
        }
        Self::new(n, d, rot)
    }

    /// Serializes as "rotgraph v1 n d" followed by one "v i u j" line
    /// per slot with v*d+i < u*d+j or fixed point.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "rotgraph v1 {} {}", self.n, self.d);
        for v in 0..self.n {
            for i in 0..self.d {
                let (u, j) = self.rot(v, i);
                if v * self.d + i <= u * self.d + j {
                    let _ = writeln!(s, "{v} {i} {u} {j}");
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty graph file".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "rotgraph" || parts[1] != "v1" {
            return Err(Error::Parse(format!("bad header {header:?}")));
        }
        let n: usize = parts[2].parse().map_err(|_| Error::Parse("bad n".into()))?;
        let d: usize = parts[3].parse().map_err(|_| Error::Parse("bad d".into()))?;
        let mut rot = vec![None; n * d];
        for line in lines {
            let f: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad line {line:?}"))))
                .collect::<Result<_>>()?;
            if f.len() != 4 {
                return Err(Error::Parse(format!("bad line {line:?}")));
            }
            let (v, i, u, j) = (f[0], f[1], f[2], f[3]);
            if v >= n || u >= n || i >= d || j >= d {
                return Err(Error::Parse(format!("out of range line {line:?}")));
            }
            rot[v * d + i] = Some((u as u32, j as u32));
            rot[u * d + j] = Some((v as u32, i as u32));
        }
        let rot: Option<Vec<_>> = rot.into_iter().collect();
        let rot = rot.ok_or_else(|| Error::Parse("incomplete rotation table".into()))?;
        Self::new(n, d, rot)
    }
}

/// Symmetric doubly stochastic matrix of exact rationals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RWMatrix {
    n: usize,
    entries: Vec<Rat>, // row-major
}

impl RWMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &Rat {
        &self.entries[i * self.n + j]
    }

    /// The all-1/n matrix J.
    pub fn all_ones(n: usize) -> Self {
        RWMatrix {
            n,
            entries: vec![rat(1, n as i64); n * n],
        }
    }

    pub fn mul(&self, other: &RWMatrix) -> Result<RWMatrix> {
        if self.n != other.n {
            return Err(Error::Shape(format!("matmul dims {} vs {}", self.n, other.n)));
        }
        let n = self.n;
        let mut entries = vec![Rat::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        entries[i * n + j] += a * b;
                    }
                }
            }
        }
        Ok(RWMatrix { n, entries })
    }

    pub fn pow(&self, k: u32) -> Result<RWMatrix> {
        if k == 0 {
            return Err(Error::Parameter("matrix power k >= 1".into()));
        }
        let mut out = self.clone();
        for _ in 1..k {
            out = out.mul(self)?;
        }
        Ok(out)
    }
}

/// Walk matrix of G: entry (i,j) = (edge multiplicity i-j)/d, with a
/// fixed-point loop counting 1/d.
pub fn rw_matrix(g: &RotationGraph) -> RWMatrix {
    let n = g.n();
    let d = g.d();
    let mut counts = vec![0u64; n * n];
    for v in 0..n {
        for i in 0..d {
            let (u, _) = g.rot(v, i);
            counts[v * n + u] += 1;
        }
    }
    let entries = counts.into_iter().map(|c| rat(c as i64, d as i64)).collect();
    RWMatrix { n, entries }
}

/// G^k: one edge per k-step path, labels enumerate label sequences
/// lexicographically; the return label is the reversed sequence of
/// return ports along the path.
pub fn graph_power(g: &RotationGraph, k: u32) -> Result<RotationGraph> {
    if k == 0 {
        return Err(Error::Parameter("graph_power needs k >= 1".into()));
    }
    let n = g.n();
    let d = g.d();
    let dk = (d as u64).checked_pow(k).ok_or_else(|| {
        Error::Resource(format!("degree {d}^{k} overflows"))
    })?;
    if (n as u64).saturating_mul(dk) > 200_000_000 {
        return Err(Error::Resource(format!(
            "graph_power size {n}*{d}^{k} exceeds budget"
        )));
    }
    let dk = dk as usize;
    let mut rot = vec![(0u32, 0u32); n * dk];
    for v in 0..n {
        for label in 0..dk {
            // decode label into (i1,...,ik), most significant first
            let mut cur = v;
            let mut back = 0usize;
            let mut rest = label;
            let mut digits = vec![0usize; k as usize];
            for slot in (0..k as usize).rev() {
                digits[slot] = rest % d;
                rest /= d;
            }
            for &i in &digits {
                let (u, j) = g.rot(cur, i);
                cur = u;
                back = back * d + j;
            }
            // back already accumulates j1..jk most-significant-first;
            // the return label must be the reversed port sequence
            let mut rev = 0usize;
            let mut b = back;
            for _ in 0..k {
                rev = rev * d + b % d;
                b /= d;
            }
            rot[v * dk + label] = (cur as u32, rev as u32);
        }
    }
    RotationGraph::new(n, dk, rot)
}

/// Tensor (Kronecker) product: n·n' vertices, degree d·d', with
/// lexicographic pair labels.
pub fn tensor(g: &RotationGraph, g2: &RotationGraph) -> Result<RotationGraph> {
    let (n1, d1, n2, d2) = (g.n(), g.d(), g2.n(), g2.d());
    let n = n1 * n2;
    let d = d1 * d2;
    let mut rot = vec![(0u32, 0u32); n * d];
    for v1 in 0..n1 {
        for v2 in 0..n2 {
            let v = v1 * n2 + v2;
            for i1 in 0..d1 {
                for i2 in 0..d2 {
                    let (u1, j1) = g.rot(v1, i1);
                    let (u2, j2) = g2.rot(v2, i2);
                    rot[v * d + (i1 * d2 + i2)] =
                        ((u1 * n2 + u2) as u32, (j1 * d2 + j2) as u32);
                }
            }
        }
    }
    RotationGraph::new(n, d, rot)
}

/// Replacement product G⊘H: walk matrix ½Â + ½(I⊗A'). Vertex (v,a) is
/// index v·D+a; the first d labels are intra-cloud H edges, the last d
/// labels are d parallel copies of the Â rotation edge.
pub fn replacement(g: &RotationGraph, h: &RotationGraph) -> Result<RotationGraph> {
    let big_d = g.d();
    if h.n() != big_d {
        return Err(Error::Shape(format!(
            "replacement needs |V(H)| = deg(G): {} vs {}",
            h.n(),
            big_d
        )));
    }
    let d = h.d();
    let n = g.n() * big_d;
    let deg = 2 * d;
    let mut rot = vec![(0u32, 0u32); n * deg];
    for v in 0..g.n() {
        for a in 0..big_d {
            let idx = v * big_d + a;
            for i in 0..d {
                let (b, j) = h.rot(a, i);
                rot[idx * deg + i] = ((v * big_d + b) as u32, j as u32);
            }
            let (u, b) = g.rot(v, a);
            for i in 0..d {
                rot[idx * deg + d + i] = ((u * big_d + b) as u32, (d + i) as u32);
            }
        }
    }
    RotationGraph::new(n, deg, rot)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralMethod {
    ExactSmallN,
    PowerIteration,
}

/// Upper bound (or flagged estimate) on λ(G), the second singular value
/// of the walk matrix on the mean-zero subspace.
#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    pub lambda_upper: Rat,
    pub method: SpectralMethod,
    pub residual: Rat,
    pub certified: bool,
}

fn rat_from_f64(x: f64) -> Rat {
    Rat::from_f64(x).unwrap_or_else(Rat::zero)
}

const ROUND_BITS: u64 = 40;

/// Rounds x to numerator/2^30. Keeping every denominator a fixed power
/// of two means the exact congruence products below never reduce
/// fractions, so there is no bignum blowup.
fn rat_round(x: f64) -> BigInt {
    BigInt::from_f64((x * (1u64 << ROUND_BITS) as f64).round()).unwrap_or_else(BigInt::zero)
}

/// Certified λ bound: diagonalize D = A − J in floating point, round
/// the (orthonormal) eigenvector basis Q to a dyadic grid, and compute
/// exactly S = QᵀDQ and E = QᵀQ. Eigenvalues of D are exactly the
/// eigenvalues of the pencil (S, E); Gershgorin applied to a null
/// vector of S − λE gives, for some row i,
///   |λ| · E_ii ≤ |S_ii| + Σ_{j≠i}|S_ij| + |λ| Σ_{j≠i}|E_ij|,
/// and |λ| ≤ 2 always (‖A‖, ‖J‖ ≤ 1), so
///   |λ| ≤ max_i (|S_ii| + R_i(S) + 2 R_i(E)) / E_ii.
/// The spectral radius of D dominates λ(G), so this bound certifies.
fn lambda_exact(g: &RotationGraph) -> Result<SpectralEstimate> {
    let n = g.n();
    if n == 1 {
        return Ok(SpectralEstimate {
            lambda_upper: Rat::zero(),
            method: SpectralMethod::ExactSmallN,
            residual: Rat::zero(),
            certified: true,
        });
    }
    let a = rw_matrix(g);
    let j = RWMatrix::all_ones(n);
    let d_rat: Vec<Vec<Rat>> = (0..n)
        .map(|r| (0..n).map(|c| a.get(r, c) - j.get(r, c)).collect())
        .collect();
    let d_f64 = DMatrix::from_fn(n, n, |r, c| {
        num::ToPrimitive::to_f64(&d_rat[r][c]).unwrap_or(0.0)
    });
    let eig = d_f64.clone().symmetric_eigen();
    let mut qf = eig.eigenvectors;
    // polish with Jacobi sweeps: the QR eigensolver can leave
    // off-diagonals of QᵀDQ around 1e-7, which would dominate the
    // certified radius
    let mut m = qf.transpose() * &d_f64 * &qf;
    for _ in 0..8 {
        let mut worst = 0.0f64;
        for p in 0..n {
            for r in (p + 1)..n {
                worst = worst.max(m[(p, r)].abs());
                if m[(p, r)].abs() < 1e-14 {
                    continue;
                }
                let theta = 0.5 * (2.0 * m[(p, r)]).atan2(m[(p, p)] - m[(r, r)]);
                let (s, c) = theta.sin_cos();
                for k in 0..n {
                    let (a, b) = (m[(k, p)], m[(k, r)]);
                    m[(k, p)] = c * a + s * b;
                    m[(k, r)] = -s * a + c * b;
                }
                for k in 0..n {
                    let (a, b) = (m[(p, k)], m[(r, k)]);
                    m[(p, k)] = c * a + s * b;
                    m[(r, k)] = -s * a + c * b;
                }
                for k in 0..n {
                    let (a, b) = (qf[(k, p)], qf[(k, r)]);
                    qf[(k, p)] = c * a + s * b;
                    qf[(k, r)] = -s * a + c * b;
                }
            }
        }
        if worst < 1e-13 {
            break;
        }
    }
    // q holds numerators over the common denominator 2^ROUND_BITS
    let q: Vec<Vec<BigInt>> = (0..n)
        .map(|r| (0..n).map(|c| rat_round(qf[(r, c)])).collect())
        .collect();
    let denom2 = Rat::new(BigInt::one(), BigInt::from(1u128) << (2 * ROUND_BITS));
    // E = QᵀQ, integer numerators over 4^ROUND_BITS
    let mut e_num = vec![vec![BigInt::zero(); n]; n];
    for i in 0..n {
        for jj in i..n {
            let mut acc = BigInt::zero();
            for k in 0..n {
                acc += &q[k][i] * &q[k][jj];
            }
            e_num[i][jj] = acc.clone();
            e_num[jj][i] = acc;
        }
    }
    // S = QᵀDQ via DQ first (D is rational but with one shared
    // denominator n·d, so track numerators there as well)
    let nd = BigInt::from((n * g.d()) as u64);
    let d_num: Vec<Vec<BigInt>> = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| (&d_rat[r][c] * Rat::from_integer(nd.clone())).to_integer())
                .collect()
        })
        .collect();
    let mut dq = vec![vec![BigInt::zero(); n]; n];
    for r in 0..n {
        for k in 0..n {
            if d_num[r][k].is_zero() {
                continue;
            }
            for c in 0..n {
                dq[r][c] += &d_num[r][k] * &q[k][c];
            }
        }
    }
    let s_denom = Rat::new(
        BigInt::one(),
        (BigInt::from(1u128) << (2 * ROUND_BITS)) * &nd,
    );
    let mut bound = Rat::zero();
    let mut max_radius = Rat::zero();
    let two = rat_int(2);
    for i in 0..n {
        let mut s_diag = Rat::zero();
        let mut r_s = Rat::zero();
        let mut r_e = Rat::zero();
        for c in 0..n {
            let mut s_ic = BigInt::zero();
            for k in 0..n {
                s_ic += &q[k][i] * &dq[k][c];
            }
            let s_val = Rat::from_integer(s_ic) * &s_denom;
            if c == i {
                s_diag = s_val;
            } else {
                r_s += s_val.abs();
                r_e += (Rat::from_integer(e_num[i][c].clone()) * &denom2).abs();
            }
        }
        let e_diag = Rat::from_integer(e_num[i][i].clone()) * &denom2;
        if !e_diag.is_positive() {
            return Err(Error::Construction(
                "degenerate eigenvector rounding in spectral certification".into(),
            ));
        }
        let radius = &r_s + &two * &r_e;
        let b = (s_diag.abs() + &radius) / &e_diag;
        if b > bound {
            bound = b;
        }
        if radius > max_radius {
            max_radius = radius;
        }
    }
    Ok(SpectralEstimate {
        lambda_upper: bound,
        method: SpectralMethod::ExactSmallN,
        residual: max_radius,
        certified: true,
    })
}

/// Heuristic λ estimate by power iteration on A − J; never certified.
fn lambda_power_iteration(g: &RotationGraph) -> Result<SpectralEstimate> {
    let n = g.n();
    if n == 1 {
        return Ok(SpectralEstimate {
            lambda_upper: Rat::zero(),
            method: SpectralMethod::PowerIteration,
            residual: Rat::zero(),
            certified: false,
        });
    }
    let d = g.d();
    // multiply by A via the rotation map: (Ax)_v = (1/d) Σ_i x_{rot(v,i).0}
    let mul = |x: &[f64]| -> Vec<f64> {
        let mut y = vec![0.0; n];
        for v in 0..n {
            let mut acc = 0.0;
            for i in 0..d {
                let (u, _) = g.rot(v, i);
                acc += x[u];
            }
            y[v] = acc / d as f64;
        }
        let mean: f64 = y.iter().sum::<f64>() / n as f64;
        for yv in &mut y {
            *yv -= mean;
        }
        y
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<f64> = (0..n)
        .map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0))
        .collect();
    let mean: f64 = x.iter().sum::<f64>() / n as f64;
    for xv in &mut x {
        *xv -= mean;
    }
    let norm = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>().sqrt();
    let mut mu = 0.0;
    for _ in 0..300 {
        // two applications per step so negative eigenvalues converge too
        let y = mul(&mul(&x));
        let ny = norm(&y);
        if ny < 1e-300 {
            break;
        }
        mu = ny / norm(&x).max(1e-300);
        for (xv, yv) in x.iter_mut().zip(&y) {
            *xv = yv / ny;
        }
    }
    let lam = mu.sqrt().min(1.0);
    let y = mul(&x);
    let res: f64 = x
        .iter()
        .zip(&y)
        .map(|(xv, yv)| {
            let r = yv.abs() - lam * xv.abs();
            r * r
        })
        .sum::<f64>()
        .sqrt();
    Ok(SpectralEstimate {
        lambda_upper: rat_from_f64(lam + res.min(1.0)),
        method: SpectralMethod::PowerIteration,
        residual: rat_from_f64(res),
        certified: false,
    })
}

pub const EXACT_LAMBDA_CAP: usize = 64;

pub fn lambda_upper(g: &RotationGraph, method: SpectralMethod) -> Result<SpectralEstimate> {
    match method {
        SpectralMethod::ExactSmallN => {
            if g.n() > EXACT_LAMBDA_CAP {
                return Err(Error::Parameter(format!(
                    "exact spectral mode capped at n <= {EXACT_LAMBDA_CAP}, got {}",
                    g.n()
                )));
            }
            lambda_exact(g)
        }
        SpectralMethod::PowerIteration => lambda_power_iteration(g),
    }
}

/// Picks the exact method when feasible, power iteration otherwise.
pub fn lambda_auto(g: &RotationGraph) -> Result<SpectralEstimate> {
    if g.n() <= EXACT_LAMBDA_CAP {
        lambda_exact(g)
    } else {
        lambda_power_iteration(g)
    }
}

/// Exact multiplicity count of edges crossing the cut (S, V−S).
/// Self-loops never cross; each crossing edge is counted once, at its
/// S-side endpoint.
pub fn edge_cut(g: &RotationGraph, s: &[usize]) -> Result<u64> {
    let mut in_s = vec![false; g.n()];
    for &v in s {
        if v >= g.n() {
            return Err(Error::Index(format!("vertex {v} out of range")));
        }
        in_s[v] = true;
    }
    let mut count = 0u64;
    for &v in s {
        if !in_s[v] {
            continue;
        }
        for i in 0..g.d() {
            let (u, _) = g.rot(v, i);
            if !in_s[u] {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Exact probability that a uniform edge of G^l has both endpoints in
/// S, computed from A^l without materializing G^l.
pub fn collision_prob(g: &RotationGraph, l: u32, s: &[usize]) -> Result<Rat> {
    if l == 0 {
        return Err(Error::Parameter("collision_prob needs l >= 1".into()));
    }
    let n = g.n();
    let mut in_s = vec![false; n];
    for &v in s {
        if v >= n {
            return Err(Error::Index(format!("vertex {v} out of range")));
        }
        in_s[v] = true;
    }
    let size = in_s.iter().filter(|b| **b).count();
    if 2 * size > n {
        return Err(Error::Precondition(format!(
            "collision_prob needs |S| <= n/2, got {size} of {n}"
        )));
    }
    let al = rw_matrix(g).pow(l)?;
    let mut p = Rat::zero();
    for i in 0..n {
        if !in_s[i] {
            continue;
        }
        for j in 0..n {
            if in_s[j] {
                p += al.get(i, j);
            }
        }
    }
    Ok(p / rat_int(n as i64))
}

/// Seeded random d-regular multigraph: a uniform perfect matching of
/// the n·d slots (one fixed point when n·d is odd).
pub fn random_regular(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Result<RotationGraph> {
    if n == 0 || d == 0 {
        return Err(Error::Parameter("random_regular needs n,d >= 1".into()));
    }
    let mut slots: Vec<usize> = (0..n * d).collect();
    slots.shuffle(rng);
    let mut rot = vec![(0u32, 0u32); n * d];
    let mut it = slots.chunks_exact(2);
    for pair in &mut it {
        let (a, b) = (pair[0], pair[1]);
        rot[a] = ((b / d) as u32, (b % d) as u32);
        rot[b] = ((a / d) as u32, (a % d) as u32);
    }
    if let [a] = it.remainder() {
        rot[*a] = ((a / d) as u32, (a % d) as u32);
    }
    RotationGraph::new(n, d, rot)
}

/// Seeded search for a d-regular graph with certified λ ≤ target.
/// Tries the deterministic complete mixer first when n | d, then
/// random regular graphs with spectral rejection.
pub fn find_base_expander(
    n: usize,
    d: usize,
    target_lambda: &Rat,
    seed: u64,
    budget: usize,
) -> Result<RotationGraph> {
    if n > EXACT_LAMBDA_CAP {
        return Err(Error::Parameter(format!(
            "find_base_expander requires n <= {EXACT_LAMBDA_CAP} for certification"
        )));
    }
    let mut best = Rat::one() + Rat::one();
    if d % n == 0 {
        let g = RotationGraph::complete_mixer(n, d)?;
        let est = lambda_exact(&g)?;
        if est.lambda_upper <= *target_lambda {
            return Ok(g);
        }
        best = est.lambda_upper;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..budget.max(1) {
        let g = random_regular(n, d, &mut rng)?;
        let est = lambda_exact(&g)?;
        if est.lambda_upper <= *target_lambda {
            return Ok(g);
        }
        if est.lambda_upper < best {
            best = est.lambda_upper;
        }
    }
    Err(Error::NotFound(format!(
        "no ({n},{d})-graph with lambda <= {} in {budget} samples; best {}",
        target_lambda, best
    )))
}

/// Base graphs and constants for the recursive family
/// G_k = ((G_⌊(k−1)/2⌋ ⊗ G_⌈(k−1)/2⌉) ⊘ H)^b.
#[derive(Debug, Clone)]
pub struct FamilyConfig {
    pub h: RotationGraph,
    pub g1: RotationGraph,
    pub g2: RotationGraph,
    pub b: u32,
    pub target_lambda: Rat,
}

impl FamilyConfig {
    pub fn validate(&self) -> Result<()> {
        let deg = self.g1.d();
        if self.g2.d() != deg {
            return Err(Error::Shape(format!(
                "G1, G2 must share a degree: {} vs {}",
                deg,
                self.g2.d()
            )));
        }
        if self.h.n() != deg * deg {
            return Err(Error::Shape(format!(
                "family needs |V(H)| = deg(G)^2: {} vs {}",
                self.h.n(),
                deg * deg
            )));
        }
        let out_deg = (2 * self.h.d()).pow(self.b);
        if out_deg != deg {
            return Err(Error::Shape(format!(
                "recursion is degree-stable only when (2 deg H)^b = deg G: {out_deg} vs {deg}"
            )));
        }
        Ok(())
    }

    /// The desk-scale defaults: 8-regular bases on 16 and 32 vertices,
    /// a 4-regular mixer on 64 vertices, b = 1.
    pub fn desk_default(seed: u64) -> Result<Self> {
        let target = rat(3, 5);
        let h = find_base_expander(64, 4, &rat(9, 10), seed, 4000)?;
        let g1 = find_base_expander(16, 8, &target, seed.wrapping_add(1), 4000)?;
        let g2 = find_base_expander(32, 8, &target, seed.wrapping_add(2), 4000)?;
        let cfg = FamilyConfig {
            h,
            g1,
            g2,
            b: 1,
            target_lambda: target,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Builds G_k by the replacement-product recursion, memoizing lower
/// levels.
pub fn build_family(k: u32, cfg: &FamilyConfig) -> Result<RotationGraph> {
    cfg.validate()?;
    let mut cache: HashMap<u32, RotationGraph> = HashMap::new();
    build_family_memo(k, cfg, &mut cache)
}

fn build_family_memo(
    k: u32,
    cfg: &FamilyConfig,
    cache: &mut HashMap<u32, RotationGraph>,
) -> Result<RotationGraph> {
    if k == 0 {
        return Err(Error::Parameter("family index starts at 1".into()));
    }
    if let Some(g) = cache.get(&k) {
        return Ok(g.clone());
    }
    let g = match k {
        1 => cfg.g1.clone(),
        2 => cfg.g2.clone(),
        _ => {
            let lo = build_family_memo((k - 1) / 2, cfg, cache)?;
            let hi = build_family_memo(k / 2, cfg, cache)?;
            let t = tensor(&lo, &hi)?;
            let r = replacement(&t, &cfg.h)?;
            graph_power(&r, cfg.b)?
        }
    };
    cache.insert(k, g.clone());
    Ok(g)
}
