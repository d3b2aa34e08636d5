//! Experiment plumbing: the two statistics facts behind the powering
//! analysis, exact-or-sampled probability measurement with confidence
//! intervals, deterministic seed splitting, and machine-readable
//! reports.

use num::bigint::BigInt;
use num::{One, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exactmath::{rat_int, rat_to_string, Rat};

/// The distribution of heads among t fair coins, kept exact.
#[derive(Debug, Clone, PartialEq)]
pub struct BinomDist {
    pub t: usize,
    pub probabilities: Vec<Rat>,
}

impl BinomDist {
    pub fn new(t: usize) -> Result<BinomDist> {
        if t > 4096 {
            return Err(Error::Resource(format!("{t} trials is over the exact cap")));
        }
        let denom = BigInt::one() << t;
        let mut c = BigInt::one();
        let mut probabilities = Vec::with_capacity(t + 1);
        for k in 0..=t {
            probabilities.push(Rat::new(c.clone(), denom.clone()));
            // C(t, k+1) = C(t, k) (t-k)/(k+1)
            c = c * BigInt::from(t - k) / BigInt::from(k + 1);
        }
        let dist = BinomDist { t, probabilities };
        debug_assert!(dist.probabilities.iter().sum::<Rat>().is_one());
        Ok(dist)
    }

    pub fn prob(&self, k: usize) -> Rat {
        self.probabilities.get(k).cloned().unwrap_or_else(Rat::zero)
    }
}

/// Exact Σ_k |Pr[S_t = k] − Pr[S_{t+shift} = k]|. The shift may be
/// signed; its magnitude must stay below √t.
pub fn binom_statdist(t: usize, shift: i64) -> Result<Rat> {
    let s = (t as f64).sqrt();
    if t == 0 || (shift.unsigned_abs() as f64) >= s {
        return Err(Error::Parameter(format!("shift {shift} out of range for t = {t}")));
    }
    let t2 = (t as i64 + shift) as usize;
    let a = BinomDist::new(t)?;
    let b = BinomDist::new(t2)?;
    let mut total = Rat::zero();
    for k in 0..=t.max(t2) {
        let d = a.prob(k) - b.prob(k);
        total += if d < Rat::zero() { -d } else { d };
    }
    Ok(total)
}

/// Exact (Pr[V > 0], E[V]²/E[V²]) for a finite multiset of nonnegative
/// values under the uniform distribution.
pub fn second_moment_bound(values: &[Rat]) -> Result<(Rat, Rat)> {
    if values.is_empty() {
        return Err(Error::Precondition("empty multiset".into()));
    }
    if values.iter().any(|v| v < &Rat::zero()) {
        return Err(Error::Domain("negative value in multiset".into()));
    }
    let n = rat_int(values.len() as i64);
    let mean: Rat = values.iter().sum::<Rat>() / n.clone();
    let mean_sq: Rat = values.iter().map(|v| v.clone() * v.clone()).sum::<Rat>() / n.clone();
    if mean_sq.is_zero() {
        return Err(Error::Precondition("all values are zero".into()));
    }
    let positive = values.iter().filter(|v| *v > &Rat::zero()).count();
    let lhs = rat_int(positive as i64) / n;
    let rhs = mean.clone() * mean / mean_sq;
    Ok((lhs, rhs))
}

/// A measured probability and how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbEstimate {
    Exact(Rat),
    Sampled {
        hits: u64,
        samples: u64,
        /// two-sided 99% Clopper–Pearson interval
        lo: f64,
        hi: f64,
    },
}

impl ProbEstimate {
    pub fn method(&self) -> &'static str {
        match self {
            ProbEstimate::Exact(_) => "exact",
            ProbEstimate::Sampled { .. } => "sampled",
        }
    }

    pub fn point(&self) -> f64 {
        match self {
            ProbEstimate::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            ProbEstimate::Sampled { hits, samples, .. } => *hits as f64 / *samples as f64,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            ProbEstimate::Exact(r) => serde_json::json!({
                "method": "exact",
                "value": rat_to_string(r),
            }),
            ProbEstimate::Sampled { hits, samples, lo, hi } => serde_json::json!({
                "method": "sampled",
                "hits": hits,
                "samples": samples,
                "ci99": [lo, hi],
            }),
        }
    }
}

fn binom_cdf(k: u64, n: u64, p: f64) -> f64 {
    // log-space term recursion keeps this stable out to thousands of samples
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return if k >= n { 1.0 } else { 0.0 };
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut log_term = n as f64 * lq; // log Pr[X=0]
    let mut acc = log_term.exp();
    for i in 0..k.min(n) {
        log_term += ((n - i) as f64).ln() - ((i + 1) as f64).ln() + lp - lq;
        acc += log_term.exp();
    }
    acc.min(1.0)
}

/// Two-sided Clopper–Pearson interval by bisection on the binomial
/// tails.
pub fn clopper_pearson(hits: u64, samples: u64, confidence: f64) -> (f64, f64) {
    assert!(samples > 0 && hits <= samples);
    let alpha = 1.0 - confidence;
    let bisect = |mut lo: f64, mut hi: f64, f: &dyn Fn(f64) -> bool| {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let lower = if hits == 0 {
        0.0
    } else {
        // smallest p with Pr[X >= hits] >= alpha/2
        bisect(0.0, 1.0, &|p| 1.0 - binom_cdf(hits - 1, samples, p) >= alpha / 2.0)
    };
    let upper = if hits == samples {
        1.0
    } else {
        // largest p with Pr[X <= hits] >= alpha/2
        bisect(0.0, 1.0, &|p| binom_cdf(hits, samples, p) < alpha / 2.0)
    };
    (lower, upper)
}

/// Measures Pr[eval(w)] over a uniform w: full enumeration (exact Rat)
/// when the space fits the budget, otherwise seeded sampling with a
/// 99% Clopper–Pearson interval.
pub fn enumerate_or_sample<F: FnMut(u128) -> bool>(
    space: u128,
    mut eval: F,
    budget: u64,
    seed: u64,
) -> Result<ProbEstimate> {
    if space == 0 {
        return Err(Error::Parameter("empty probability space".into()));
    }
    if space <= budget as u128 {
        let mut hits = 0u64;
        for w in 0..space {
            if eval(w) {
                hits += 1;
            }
        }
        return Ok(ProbEstimate::Exact(
            rat_int(hits as i64) / rat_int(space as i64),
        ));
    }
    let samples = budget.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..samples {
        let w = rng.gen_range(0..space);
        if eval(w) {
            hits += 1;
        }
    }
    let (lo, hi) = clopper_pearson(hits, samples, 0.99);
    Ok(ProbEstimate::Sampled { hits, samples, lo, hi })
}

/// Deterministic per-worker seed derivation (splitmix64 finalizer over
/// the pair), so parallel evaluators never share a stream.
pub fn split_seed(master: u64, worker: u64) -> u64 {
    let mut z = master ^ worker.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// One experiment's machine-readable record.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: String,
    pub seed: u64,
    pub metrics: Vec<(String, String)>,
    pub probabilities: Vec<(String, ProbEstimate)>,
    pub wall_ms: u128,
}

impl ExperimentReport {
    pub fn new(config: String, seed: u64) -> ExperimentReport {
        ExperimentReport { config, seed, metrics: Vec::new(), probabilities: Vec::new(), wall_ms: 0 }
    }

    pub fn metric(&mut self, name: &str, value: impl std::fmt::Display) {
        self.metrics.push((name.to_string(), value.to_string()));
    }

    pub fn probability(&mut self, name: &str, p: ProbEstimate) {
        self.probabilities.push((name.to_string(), p));
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema": "report v1",
            "config": self.config,
            "seed": self.seed,
            "metrics": self.metrics.iter().map(|(k, v)| {
                serde_json::json!({ "name": k, "value": v })
            }).collect::<Vec<_>>(),
            "probabilities": self.probabilities.iter().map(|(k, p)| {
                serde_json::json!({ "name": k, "estimate": p.to_json() })
            }).collect::<Vec<_>>(),
            "wall_ms": self.wall_ms,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,name,value,method,lo,hi\n");
        for (k, v) in &self.metrics {
            out.push_str(&format!("metric,{k},{v},,,\n"));
        }
        for (k, p) in &self.probabilities {
            match p {
                ProbEstimate::Exact(r) => {
                    out.push_str(&format!("probability,{k},{},exact,,\n", rat_to_string(r)));
                }
                ProbEstimate::Sampled { hits, samples, lo, hi } => {
                    out.push_str(&format!("probability,{k},{hits}/{samples},sampled,{lo},{hi}\n"));
                }
            }
        }
        out
    }
}
