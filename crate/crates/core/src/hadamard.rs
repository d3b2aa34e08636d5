//! Walsh–Hadamard codes, the BLR linearity test, local decoding,
//! quadratic-equation reductions, the exponential-size PCP verifier,
//! and the constant-scale assignment tester built from it.
//!
//! Bit-vector convention: a vector over GF(2)^k is a u64 mask with
//! variable i at bit i, and a table over GF(2)^k is indexed by that
//! mask. All probabilities are exact rationals; probability spaces are
//! either enumerated outright or factored and then enumerated.

use crate::error::{Error, Result};
use crate::exactmath::{rat_int, Rat};
use num::{BigInt, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn parity(x: u64) -> bool {
    x.count_ones() % 2 == 1
}

/// A boolean function on k bits as an explicit table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoolFn {
    pub k: usize,
    pub table: Vec<bool>,
}

pub const MAX_TABLE_BITS: usize = 25;

impl BoolFn {
    pub fn new(k: usize, table: Vec<bool>) -> Result<Self> {
        if k > MAX_TABLE_BITS {
            return Err(Error::Resource(format!(
                "table on {k} bits exceeds the {MAX_TABLE_BITS}-bit budget"
            )));
        }
        if table.len() != 1usize << k {
            return Err(Error::Shape(format!(
                "table has {} entries, expected 2^{k}",
                table.len()
            )));
        }
        Ok(BoolFn { k, table })
    }

    pub fn eval(&self, x: u64) -> bool {
        self.table[x as usize]
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Hamming distance to another table, as an exact fraction.
    pub fn dist(&self, other: &BoolFn) -> Result<Rat> {
        if self.k != other.k {
            return Err(Error::Shape("dist on mismatched arities".into()));
        }
        let diff = self
            .table
            .iter()
            .zip(&other.table)
            .filter(|(a, b)| a != b)
            .count();
        Ok(rat_int(diff as i64) / rat_int(self.len() as i64))
    }
}

/// WH(u): the table of z ↦ ⟨u,z⟩ over GF(2).
pub fn wh_encode(u: u64, k: usize) -> Result<BoolFn> {
    BoolFn::new(k, (0..1u64 << k).map(|z| parity(u & z)).collect())
}

/// Unnormalized Walsh spectrum of (-1)^f: F̂(z) = Σ_x (-1)^{f(x)+⟨z,x⟩}.
fn walsh_spectrum(f: &BoolFn) -> Vec<i32> {
    let mut a: Vec<i32> = f.table.iter().map(|&b| if b { -1 } else { 1 }).collect();
    let mut len = 1;
    while len < a.len() {
        let mut i = 0;
        while i < a.len() {
            for j in i..i + len {
                let (x, y) = (a[j], a[j + len]);
                a[j] = x + y;
                a[j + len] = x - y;
            }
            i += 2 * len;
        }
        len *= 2;
    }
    a
}

/// Exact BLR pass rate Pr_{x,y}[f(x⊕y) = f(x)⊕f(y)], computed through
/// the Walsh spectrum: the pass count over 4^k pairs is
/// (4^k + Σ_z F̂(z)³ / 2^k) / 2.
pub fn blr_pass_rate(f: &BoolFn) -> Rat {
    let spec = walsh_spectrum(f);
    let cube: i128 = spec.iter().map(|&v| (v as i128).pow(3)).sum();
    let n = f.len() as i128;
    // pass = (4^k + cube/2^k) / 2, as a fraction of 4^k pairs
    let num = BigInt::from(n * n * n + cube);
    let den = BigInt::from(2 * n * n * n);
    Rat::new(num, den)
}

/// The linear function ⟨u,·⟩ closest to f (ties: least u) and its
/// exact agreement fraction.
pub fn nearest_linear(f: &BoolFn) -> (u64, Rat) {
    let spec = walsh_spectrum(f);
    let mut best_u = 0u64;
    let mut best = spec[0];
    for (z, &v) in spec.iter().enumerate() {
        if v > best {
            best = v;
            best_u = z as u64;
        }
    }
    let n = f.len() as i64;
    // agreement count = (2^k + F̂(u)) / 2
    let agreement = Rat::new(BigInt::from(n + best as i64), BigInt::from(2 * n));
    (best_u, agreement)
}

/// Locally decoded bit: f(x⊕r) ⊕ f(r).
pub fn self_correct(f: &BoolFn, x: u64, r: u64) -> bool {
    f.eval(x ^ r) ^ f.eval(r)
}

/// Majority-corrected function: g(x) = 1 iff f(x⊕y)⊕f(y) is 1 for at
/// least half of all y (ties resolve to 1).
pub fn majority_correct(f: &BoolFn) -> BoolFn {
    let n = f.len();
    let table = (0..n as u64)
        .map(|x| {
            let ones = (0..n as u64).filter(|&y| self_correct(f, x, y)).count();
            2 * ones >= n
        })
        .collect();
    BoolFn { k: f.k, table }
}

/// CNF formula with DIMACS-style literals: literal v > 0 means
/// variable v−1, v < 0 its negation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cnf {
    pub n_vars: usize,
    pub clauses: Vec<Vec<i32>>,
}

impl Cnf {
    pub fn new(n_vars: usize, clauses: Vec<Vec<i32>>) -> Result<Self> {
        for (i, cl) in clauses.iter().enumerate() {
            for &l in cl {
                if l == 0 || l.unsigned_abs() as usize > n_vars {
                    return Err(Error::Parse(format!("clause {i} has bad literal {l}")));
                }
            }
        }
        Ok(Cnf { n_vars, clauses })
    }

    pub fn eval(&self, u: u64) -> bool {
        self.clauses.iter().all(|cl| {
            cl.iter().any(|&l| {
                let v = (l.unsigned_abs() - 1) as u64;
                (u >> v) & 1 == u64::from(l > 0)
            })
        })
    }
}

/// GF(2) quadratic system A(u⊗u) = b: row i is a mask over the n1²
/// positions (j,k) ↦ j·n1+k.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadSystem {
    pub n1: usize,
    pub rows: Vec<u64>,
    pub b: Vec<bool>,
}

impl QuadSystem {
    pub fn new(n1: usize, rows: Vec<u64>, b: Vec<bool>) -> Result<Self> {
        if n1 == 0 || n1 * n1 > 64 {
            return Err(Error::Parameter(format!(
                "quad system needs 1 <= n1 <= 8, got {n1}"
            )));
        }
        if rows.len() != b.len() {
            return Err(Error::Shape(format!(
                "{} rows but {} right-hand sides",
                rows.len(),
                b.len()
            )));
        }
        Ok(QuadSystem { n1, rows, b })
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    /// The mask of u⊗u for an assignment mask u.
    pub fn tensor_mask(&self, u: u64) -> u64 {
        let mut t = 0u64;
        for i in 0..self.n1 {
            if (u >> i) & 1 == 1 {
                for j in 0..self.n1 {
                    if (u >> j) & 1 == 1 {
                        t |= 1 << (i * self.n1 + j);
                    }
                }
            }
        }
        t
    }

    pub fn check_solution(&self, u: u64) -> bool {
        let t = self.tensor_mask(u);
        self.rows
            .iter()
            .zip(&self.b)
            .all(|(&row, &bi)| parity(row & t) == bi)
    }

    /// WH index z = r7ᵀA; the codeword bit there equals Σᵢ(r7)ᵢ·(Aᵢ, u⊗u).
    pub fn weighted_row(&self, r7: u64) -> u64 {
        let mut z = 0u64;
        for (i, &row) in self.rows.iter().enumerate() {
            if (r7 >> i) & 1 == 1 {
                z ^= row;
            }
        }
        z
    }

    pub fn weighted_rhs(&self, r7: u64) -> bool {
        self.b
            .iter()
            .enumerate()
            .filter(|(i, _)| (r7 >> i) & 1 == 1)
            .fold(false, |acc, (_, &bi)| acc ^ bi)
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let _ = writeln!(s, "quadsys v1 {} {}", self.n1, self.m());
        let w = self.n1 * self.n1;
        for (&row, &bi) in self.rows.iter().zip(&self.b) {
            let bits: String = (0..w).map(|p| if (row >> p) & 1 == 1 { '1' } else { '0' }).collect();
            let _ = writeln!(s, "{bits} {}", u8::from(bi));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty quadsys".into()))?;
        let p: Vec<&str> = header.split_whitespace().collect();
        if p.len() != 4 || p[0] != "quadsys" || p[1] != "v1" {
            return Err(Error::Parse(format!("bad header {header:?}")));
        }
        let n1: usize = p[2].parse().map_err(|_| Error::Parse("bad n1".into()))?;
        let m: usize = p[3].parse().map_err(|_| Error::Parse("bad m".into()))?;
        let mut rows = Vec::new();
        let mut b = Vec::new();
        for line in lines {
            let (bits, rhs) = line
                .trim()
                .rsplit_once(' ')
                .ok_or_else(|| Error::Parse(format!("bad row {line:?}")))?;
            let mut row = 0u64;
            for (i, ch) in bits.trim().chars().enumerate() {
                match ch {
                    '1' => row |= 1 << i,
                    '0' => {}
                    _ => return Err(Error::Parse(format!("bad row bit {ch:?}"))),
                }
            }
            rows.push(row);
            b.push(rhs == "1");
        }
        if rows.len() != m {
            return Err(Error::Parse(format!("expected {m} rows, got {}", rows.len())));
        }
        QuadSystem::new(n1, rows, b)
    }
}

/// cnf_to_quadsys output: the system plus the variable layout
/// (CNF inputs first, then the pinned-one variable, then auxiliaries).
#[derive(Debug, Clone)]
pub struct QuadReduction {
    pub sys: QuadSystem,
    pub n_inputs: usize,
    pub pin: usize,
    /// per auxiliary variable, the two affine factors defining it
    aux_defs: Vec<((bool, u64), (bool, u64))>,
}

/// affine form c + Σ_{i∈mask} u_i
type Affine = (bool, u64);

fn affine_of_literal(l: i32) -> Affine {
    let v = (l.unsigned_abs() - 1) as u64;
    // the clause builder wants (1 − literal): for positive x that is
    // 1 + x over GF(2); for ¬x it is x itself
    if l > 0 {
        (true, 1 << v)
    } else {
        (false, 1 << v)
    }
}

/// Adds the equation (c1,m1)·(c2,m2) = 0 as a row of A(u⊗u)=b, using
/// the pin variable for linear and constant terms.
fn push_product_eq(rows: &mut Vec<u64>, b: &mut Vec<bool>, n: usize, pin: usize, f1: Affine, f2: Affine, extra: Affine) {
    // equation: f1*f2 + extra = 0, extra an affine form
    let mut row = 0u64;
    let (c1, m1) = f1;
    let (c2, m2) = f2;
    for i in 0..n {
        if (m1 >> i) & 1 == 0 {
            continue;
        }
        for j in 0..n {
            if (m2 >> j) & 1 == 1 {
                row ^= 1 << (i * n + j);
            }
        }
    }
    if c1 {
        for j in 0..n {
            if (m2 >> j) & 1 == 1 {
                row ^= 1 << (pin * n + j);
            }
        }
    }
    if c2 {
        for i in 0..n {
            if (m1 >> i) & 1 == 1 {
                row ^= 1 << (i * n + pin);
            }
        }
    }
    let (ce, me) = extra;
    for i in 0..n {
        if (me >> i) & 1 == 1 {
            row ^= 1 << (i * n + pin);
        }
    }
    rows.push(row);
    b.push((c1 && c2) ^ ce);
}

/// Reduces a CNF to a GF(2) quadratic system. CNF variables occupy
/// indices 0..n_vars, then one pinned variable forced to 1, then one
/// auxiliary per clause-width reduction step (a width-w clause costs
/// w−2 auxiliaries for w ≥ 3). A CNF assignment extends uniquely to a
/// system solution, and the system is solvable only over such
/// extensions.
pub fn cnf_to_quadsys(cnf: &Cnf) -> Result<QuadReduction> {
    let mut aux_needed = 0usize;
    for cl in &cnf.clauses {
        aux_needed += cl.len().saturating_sub(2);
    }
    let n = cnf.n_vars + 1 + aux_needed;
    if n * n > 64 {
        return Err(Error::Resource(format!(
            "quadratic system would need {n} variables (> 8)"
        )));
    }
    let pin = cnf.n_vars;
    let mut rows = Vec::new();
    let mut b = Vec::new();
    let mut aux_defs = Vec::new();
    // pin: u_pin * u_pin = 1
    rows.push(1 << (pin * n + pin));
    b.push(true);
    let mut next_aux = pin + 1;
    for cl in &cnf.clauses {
        if cl.is_empty() {
            // unsatisfiable marker: 0 = 1
            rows.push(0);
            b.push(true);
            continue;
        }
        // factors (1 − l) for each literal; reduce to two by chaining
        // auxiliaries: y := last two factors, repeat
        let mut factors: Vec<Affine> = cl.iter().map(|&l| affine_of_literal(l)).collect();
        while factors.len() > 2 {
            let f2 = factors.pop().unwrap();
            let f1 = factors.pop().unwrap();
            let y = next_aux;
            next_aux += 1;
            // y + f1*f2 = 0
            push_product_eq(&mut rows, &mut b, n, pin, f1, f2, (false, 1 << y));
            aux_defs.push((f1, f2));
            factors.push((false, 1 << y));
        }
        let f2 = factors.pop().unwrap();
        let f1 = factors.pop().unwrap_or((true, 0));
        push_product_eq(&mut rows, &mut b, n, pin, f1, f2, (false, 0));
    }
    Ok(QuadReduction {
        sys: QuadSystem::new(n, rows, b)?,
        n_inputs: cnf.n_vars,
        pin,
        aux_defs,
    })
}

impl QuadReduction {
    /// Extends a CNF assignment (mask over the inputs) to the full
    /// system assignment: pin = 1 and each auxiliary gets its defining
    /// product value.
    pub fn extend_solution(&self, inputs: u64) -> u64 {
        let mut u = inputs & ((1 << self.n_inputs) - 1);
        u |= 1 << self.pin;
        let eval_affine = |u: u64, (c, m): Affine| c ^ parity(u & m);
        for (i, &(f1, f2)) in self.aux_defs.iter().enumerate() {
            let y = self.pin + 1 + i;
            if eval_affine(u, f1) && eval_affine(u, f2) {
                u |= 1 << y;
            }
        }
        u
    }
}

/// The two proof tables of the exponential PCP: purportedly WH(u) and
/// WH(u⊗u).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpPcpProof {
    pub n1: usize,
    pub f: BoolFn,
    pub g: BoolFn,
}

/// Honest proof from a solution of the system.
pub fn exp_pcp_prove(sys: &QuadSystem, u: u64) -> Result<ExpPcpProof> {
    if !sys.check_solution(u) {
        return Err(Error::Precondition(
            "exp_pcp_prove needs a solution of the system".into(),
        ));
    }
    let n1 = sys.n1;
    Ok(ExpPcpProof {
        n1,
        f: wh_encode(u, n1)?,
        g: wh_encode(sys.tensor_mask(u), n1 * n1)?,
    })
}

/// One round of verifier randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpRound {
    pub r1: u64,
    pub r2: u64,
    pub r3: u64,
    pub r4: u64,
    pub r5: u64,
    pub r6: u64,
    pub r7: u64,
}

impl ExpRound {
    pub fn sample(sys: &QuadSystem, rng: &mut ChaCha8Rng) -> ExpRound {
        let n1 = sys.n1 as u32;
        let small = |rng: &mut ChaCha8Rng| rng.gen::<u64>() & ((1u64 << n1) - 1);
        let big = |rng: &mut ChaCha8Rng| rng.gen::<u64>() & ((1u64 << (n1 * n1)) - 1);
        let r7mask = if sys.m() >= 64 { u64::MAX } else { (1u64 << sys.m()) - 1 };
        ExpRound {
            r1: small(rng),
            r2: small(rng),
            r3: small(rng),
            r4: big(rng),
            r5: big(rng),
            r6: big(rng),
            r7: rng.gen::<u64>() & r7mask,
        }
    }
}

fn tensor_index(n1: usize, r1: u64, r2: u64) -> u64 {
    let mut z = 0u64;
    for i in 0..n1 {
        if (r1 >> i) & 1 == 1 {
            for j in 0..n1 {
                if (r2 >> j) & 1 == 1 {
                    z |= 1 << (i * n1 + j);
                }
            }
        }
    }
    z
}

/// One verifier round: linearity of f and g, the tensor-consistency
/// test, and the satisfiability test, with f and g read through
/// self-correction.
pub fn exp_pcp_verify_round(sys: &QuadSystem, proof: &ExpPcpProof, w: &ExpRound) -> Result<bool> {
    if proof.n1 != sys.n1 || proof.f.k != sys.n1 || proof.g.k != sys.n1 * sys.n1 {
        return Err(Error::Shape("proof shape does not match system".into()));
    }
    let f = &proof.f;
    let g = &proof.g;
    let t_linf = f.eval(w.r1 ^ w.r2) == (f.eval(w.r1) ^ f.eval(w.r2));
    let t_ling = g.eval(w.r4 ^ w.r5) == (g.eval(w.r4) ^ g.eval(w.r5));
    let fp = |x: u64| self_correct(f, x, w.r3);
    let gp = |z: u64| self_correct(g, z, w.r6);
    let t_tensor = gp(tensor_index(sys.n1, w.r1, w.r2)) == (fp(w.r1) & fp(w.r2));
    let z = sys.weighted_row(w.r7);
    let t_sat = gp(z) == sys.weighted_rhs(w.r7);
    Ok(t_linf && t_ling && t_tensor && t_sat)
}

/// Exact single-round acceptance probability. The randomness factors:
/// (r4,r5) only enter the g-linearity test, and conditioned on r6 the
/// pair (tensor ∧ f-linearity over r1,r2,r3) and (sat over r7) are
/// independent, so
///   p = Pr[T_ling] · 2^{-n1²} Σ_{r6} Pr[T_linf ∧ T_tens | r6] · Pr[T_sat | r6].
pub fn exp_pcp_single_round_prob(sys: &QuadSystem, proof: &ExpPcpProof, budget: u64) -> Result<Rat> {
    let n1 = sys.n1;
    let m = sys.m();
    if m >= 63 {
        return Err(Error::Resource("too many equations to enumerate r7".into()));
    }
    let cost = (1u128 << (n1 * n1)) * ((1u128 << (3 * n1)) + (1u128 << m));
    if cost > budget as u128 {
        return Err(Error::Resource(format!(
            "single-round enumeration needs ~{cost} evaluations, budget {budget}"
        )));
    }
    let p_ling = blr_pass_rate(&proof.g);
    let f = &proof.f;
    let g = &proof.g;
    let mut acc = Rat::zero();
    let r6_space = 1u64 << (n1 * n1);
    for r6 in 0..r6_space {
        let gp = |z: u64| g.eval(z ^ r6) ^ g.eval(r6);
        let mut tens_count = 0u64;
        for r1 in 0..1u64 << n1 {
            for r2 in 0..1u64 << n1 {
                let zi = tensor_index(n1, r1, r2);
                for r3 in 0..1u64 << n1 {
                    let fp = |x: u64| f.eval(x ^ r3) ^ f.eval(r3);
                    let t_linf = f.eval(r1 ^ r2) == (f.eval(r1) ^ f.eval(r2));
                    if t_linf && gp(zi) == (fp(r1) & fp(r2)) {
                        tens_count += 1;
                    }
                }
            }
        }
        let mut sat_count = 0u64;
        for r7 in 0..1u64 << m {
            if gp(sys.weighted_row(r7)) == sys.weighted_rhs(r7) {
                sat_count += 1;
            }
        }
        acc += rat_int(tens_count as i64) * rat_int(sat_count as i64);
    }
    let denom = rat_int(1 << (3 * n1)) * rat_int(1 << m) * rat_int(r6_space as i64);
    Ok(p_ling * acc / denom)
}

/// Certified upper bound on the single-round acceptance probability
/// from independently enumerable factors: the two linearity tests, and
/// the satisfiability test marginal when 2^{n1²+m} is affordable.
pub fn exp_pcp_single_round_upper(sys: &QuadSystem, proof: &ExpPcpProof, budget: u64) -> Result<Rat> {
    let mut best = blr_pass_rate(&proof.g);
    let p_linf = blr_pass_rate(&proof.f);
    if p_linf < best {
        best = p_linf;
    }
    let n1 = sys.n1;
    let m = sys.m();
    if m < 63 && (1u128 << (n1 * n1 + m)) <= budget as u128 {
        let g = &proof.g;
        let mut sat = 0u64;
        for r6 in 0..1u64 << (n1 * n1) {
            for r7 in 0..1u64 << m {
                let z = sys.weighted_row(r7);
                if (g.eval(z ^ r6) ^ g.eval(r6)) == sys.weighted_rhs(r7) {
                    sat += 1;
                }
            }
        }
        let p_sat = rat_int(sat as i64) / rat_int(1 << (n1 * n1 + m));
        if p_sat < best {
            best = p_sat;
        }
    }
    Ok(best)
}

pub const M0_DEFAULT: u32 = 8;

#[derive(Debug, Clone)]
pub enum AcceptProb {
    /// exact m0-round acceptance probability
    Exact(Rat),
    /// certified upper bound (soundness direction only)
    Upper(Rat),
    /// sampled estimate: acceptance successes over trials
    Sampled { successes: u64, trials: u64 },
}

#[derive(Debug, Clone, Copy)]
pub enum AcceptMode {
    Enumerate { budget: u64 },
    Bound { budget: u64 },
    Sample { trials: u64, seed: u64 },
}

/// Acceptance probability of the m0-round conjunction. Rounds are
/// independent, so the exact value is the single-round probability
/// raised to m0.
pub fn exp_pcp_accept_prob(
    sys: &QuadSystem,
    proof: &ExpPcpProof,
    m0: u32,
    mode: AcceptMode,
) -> Result<AcceptProb> {
    match mode {
        AcceptMode::Enumerate { budget } => {
            let p = exp_pcp_single_round_prob(sys, proof, budget)?;
            Ok(AcceptProb::Exact(num::pow::pow(p, m0 as usize)))
        }
        AcceptMode::Bound { budget } => {
            let p = exp_pcp_single_round_upper(sys, proof, budget)?;
            Ok(AcceptProb::Upper(num::pow::pow(p, m0 as usize)))
        }
        AcceptMode::Sample { trials, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut successes = 0u64;
            for _ in 0..trials {
                let mut ok = true;
                for _ in 0..m0 {
                    let w = ExpRound::sample(sys, &mut rng);
                    if !exp_pcp_verify_round(sys, proof, &w)? {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    successes += 1;
                }
            }
            Ok(AcceptProb::Sampled { successes, trials })
        }
    }
}

/// QUADEQ system for a predicate over 2·n1 bits, with the two input
/// halves first so "the first 2n1 bits encode the assignment". Built
/// from the predicate's falsifying assignments as maxterm clauses.
pub fn tester_system(c: &BoolFn, n1: usize) -> Result<QuadReduction> {
    if c.k != 2 * n1 {
        return Err(Error::Shape(format!(
            "predicate on {} bits, expected 2·{n1}",
            c.k
        )));
    }
    let mut clauses = Vec::new();
    for w in 0..c.len() as u64 {
        if !c.eval(w) {
            let clause: Vec<i32> = (0..2 * n1)
                .map(|i| {
                    let v = (i + 1) as i32;
                    if (w >> i) & 1 == 1 {
                        -v
                    } else {
                        v
                    }
                })
                .collect();
            clauses.push(clause);
        }
    }
    cnf_to_quadsys(&Cnf::new(2 * n1, clauses)?)
}

/// Randomness for one assignment-tester invocation.
#[derive(Debug, Clone, Copy)]
pub struct TesterRandomness {
    pub blr1: (u64, u64),
    pub blr2: (u64, u64),
    pub round: ExpRound,
    /// concatenation test points and its self-correction offset
    pub concat: (u64, u64),
    pub concat_r: u64,
}

impl TesterRandomness {
    pub fn sample(sys: &QuadSystem, n1: usize, rng: &mut ChaCha8Rng) -> TesterRandomness {
        let mask = (1u64 << n1) - 1;
        let nmask = (1u64 << sys.n1) - 1;
        TesterRandomness {
            blr1: (rng.gen::<u64>() & mask, rng.gen::<u64>() & mask),
            blr2: (rng.gen::<u64>() & mask, rng.gen::<u64>() & mask),
            round: ExpRound::sample(sys, rng),
            concat: (rng.gen::<u64>() & mask, rng.gen::<u64>() & mask),
            concat_r: rng.gen::<u64>() & nmask,
        }
    }
}

/// The constant-scale assignment tester: linearity of both provided
/// codewords, one exponential-verifier round on π3 for the predicate's
/// QUADEQ system, and the concatenation test tying π3's assignment
/// prefix to π1 and π2.
pub fn assignment_tester(
    c: &BoolFn,
    red: &QuadReduction,
    p1: &BoolFn,
    p2: &BoolFn,
    p3: &ExpPcpProof,
    w: &TesterRandomness,
) -> Result<bool> {
    let n1 = c.k / 2;
    if p1.k != n1 || p2.k != n1 {
        return Err(Error::Shape("codeword tables must be on n1 bits".into()));
    }
    let sys = &red.sys;
    let lin1 = p1.eval(w.blr1.0 ^ w.blr1.1) == (p1.eval(w.blr1.0) ^ p1.eval(w.blr1.1));
    let lin2 = p2.eval(w.blr2.0 ^ w.blr2.1) == (p2.eval(w.blr2.0) ^ p2.eval(w.blr2.1));
    if !(lin1 && lin2) {
        return Ok(false);
    }
    if !exp_pcp_verify_round(sys, p3, &w.round)? {
        return Ok(false);
    }
    // concatenation: the index with first n1 bits x, next n1 bits y,
    // rest zero; compare the self-corrected f bit with π1(x)+π2(y)
    let (x, y) = w.concat;
    let z = x | (y << n1);
    let lhs = self_correct(&p3.f, z, w.concat_r);
    Ok(lhs == (p1.eval(x) ^ p2.eval(y)))
}
