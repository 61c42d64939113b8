//! Closed-form scale parameters for the multi-scale argument, and numeric checks of the
//! purely analytic steps (alternatives bound, Γ̃ recursion, I₀ growth, Lambert-W margin,
//! growth and compatibility conditions).

use crate::error::{usage, Error, Result};
use num_rational::Ratio;
use serde::Serialize;

/// α(J) and δ(J) = α(J)/4 with α(J) = ½[1 − 2/((10/9)^{1/J} + 1)].
///
/// Evaluated as ½·t/(t+2) with t = expm1(ln(10/9)/J), which has no cancellation.
pub fn alpha_delta(j: u32) -> Result<(f64, f64)> {
    if j < 1 {
        return usage("J must be at least 1");
    }
    let t = ((10.0f64 / 9.0).ln() / j as f64).exp_m1();
    let alpha = 0.5 * t / (t + 2.0);
    Ok((alpha, alpha / 4.0))
}

/// α(1) as an exact rational: ½(1 − 2/(10/9 + 1)).
pub fn alpha_one_exact() -> Ratio<i64> {
    let half = Ratio::new(1, 2);
    let one = Ratio::from_integer(1);
    half * (one - Ratio::from_integer(2) / (Ratio::new(10, 9) + one))
}

#[derive(Clone, Debug, Serialize)]
pub struct AlphaRatio {
    pub j: u32,
    pub value: f64,
    pub holds: bool,
}

/// ((1+α(J))/(1−α(J)))^J against 10/9.
pub fn alpha_ratio_check(j: u32) -> Result<AlphaRatio> {
    let (alpha, _) = alpha_delta(j)?;
    Ok(ratio_power(alpha, j))
}

/// The same power for an arbitrary α, so callers can probe the bound's tightness.
pub fn ratio_power(alpha: f64, j: u32) -> AlphaRatio {
    let value = (j as f64 * (alpha.ln_1p() - (-alpha).ln_1p())).exp();
    AlphaRatio { j, value, holds: value < 10.0 / 9.0 }
}

pub fn delta_prime(delta: f64, eta: f64, d: usize) -> f64 {
    eta * delta / (6.0 * d as f64)
}

/// c₀ = 3d·2^{d−1}/η.
pub fn c0(d: usize, eta: f64) -> f64 {
    3.0 * d as f64 * 2f64.powi(d as i32 - 1) / eta
}

/// Lipschitz constant 6·2^{−ℓ}/η of σ_ℓ.
pub fn c_lip(ell: u32, eta: f64) -> f64 {
    6.0 * 2f64.powi(-(ell as i32)) / eta
}

/// Smallest L ≥ 5 with c₀·2^{−L} ≤ δ(J).
pub fn l_of_j(j: u32, c0: f64) -> Result<u32> {
    if !(c0 > 0.0) {
        return usage("c0 must be positive");
    }
    let (_, delta) = alpha_delta(j)?;
    let mut l = 5u32;
    while c0 * 2f64.powi(-(l as i32)) > delta {
        l += 1;
    }
    Ok(l)
}

pub const INTERVAL_LOW: f64 = 159.0 / 380.0;
pub const INTERVAL_HIGH: f64 = 269.0 / 456.0;

/// I_j = [¾ρ^j − (1+α)/4, ¾ρ^{−j} − (1−α)/4] with ρ = (1−α)/(1+α), for j = 0..=J.
pub fn intervals(j: u32) -> Result<Vec<(f64, f64)>> {
    let (alpha, _) = alpha_delta(j)?;
    let rho = (1.0 - alpha) / (1.0 + alpha);
    let out: Vec<(f64, f64)> = (0..=j as i32)
        .map(|i| (0.75 * rho.powi(i) - (1.0 + alpha) / 4.0, 0.75 * rho.powi(-i) - (1.0 - alpha) / 4.0))
        .collect();
    if let Some(&(lo, hi)) = out.iter().find(|&&(lo, hi)| lo < INTERVAL_LOW || hi > INTERVAL_HIGH) {
        return Err(Error::Domain(format!("interval [{lo}, {hi}] leaves [159/380, 269/456]")));
    }
    Ok(out)
}

/// α̃ = (3/10)·4^{−d}.
pub fn alpha_tilde(d: usize) -> f64 {
    0.3 * 4f64.powi(-(d as i32))
}

pub fn alpha_tilde_exact(d: usize) -> Ratio<i64> {
    Ratio::new(3, 10 * 4i64.pow(d as u32))
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// c₃ = 2 ∨ (−log(1 − c₂(1))).
pub fn c3(c2_at_1: f64) -> f64 {
    2f64.max(-(1.0 - c2_at_1).ln())
}

/// log I₀(ε, k) with I₀ = [c₃·(k2^k/ε)·log(k2^k/ε)]^{2^{k−1}}.
pub fn log_i0(eps: f64, k: u32, c2_at_1: f64) -> Result<f64> {
    if !(eps > 0.0) || k < 1 || !(c2_at_1 > 0.0 && c2_at_1 < 1.0) {
        return usage(format!("I0 needs eps > 0, k >= 1, c2 in (0,1); got eps={eps}, k={k}, c2={c2_at_1}"));
    }
    let m = k as f64 * 2f64.powi(k as i32) / eps;
    if m <= 1.0 {
        return usage(format!("k 2^k / eps = {m} must exceed 1"));
    }
    Ok(2f64.powi(k as i32 - 1) * (c3(c2_at_1) * m * m.ln()).ln())
}

/// ⌈x⌉ for x = e^{log_x}, staying in log-space once x is beyond exact integers.
fn log_ceil(log_x: f64) -> f64 {
    if log_x < 52.0 * std::f64::consts::LN_2 {
        log_x.exp().ceil().ln()
    } else {
        log_x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IBranch {
    Growth,
    Ratio,
}

#[derive(Clone, Debug, Serialize)]
pub struct IOfJ {
    /// log ⌈I₀(−½ log(1 − c₂(J)), J)⌉
    pub log_growth_term: f64,
    /// log ⌈J/c₂(J)⌉^{2^{J−1}}
    pub log_ratio_term: f64,
    pub log_value: f64,
    pub dominant: IBranch,
}

/// I(J) in log-space. `c2_j` is c₂(J); `c2_at_1` enters through c₃.
pub fn i_of_j(j: u32, c2_j: f64, c2_at_1: f64) -> Result<IOfJ> {
    if j < 1 || !(c2_j > 0.0 && c2_j < 1.0) {
        return usage("I(J) needs J >= 1 and c2(J) in (0,1)");
    }
    let eps = -0.5 * (1.0 - c2_j).ln();
    let log_growth_term = log_ceil(log_i0(eps, j, c2_at_1)?);
    let log_ratio_term = 2f64.powi(j as i32 - 1) * (j as f64 / c2_j).ceil().ln();
    let (log_value, dominant) = if log_growth_term >= log_ratio_term {
        (log_growth_term, IBranch::Growth)
    } else {
        (log_ratio_term, IBranch::Ratio)
    };
    Ok(IOfJ { log_growth_term, log_ratio_term, log_value, dominant })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GammaBound {
    /// log of the bound after clipping to 1.
    pub log_value: f64,
    /// The raw recursion exceeded 1.
    pub clipped: bool,
}

/// Upper bound Γ̃_k(I′) from Γ̃₁ ≡ 0, Γ̃_k(I′ ≤ 0) = 1 and
/// Γ̃_{k+1}(I′) = (1−c₂)^{√I′−1} + I′^{1+(k−1)/2}·Γ̃_k(⌊√I′⌋ − k + 1).
pub fn gamma_tilde(k: u32, i: f64, c2: f64) -> Result<GammaBound> {
    if !(c2 > 0.0 && c2 < 1.0) || k < 1 {
        return usage("gamma recursion needs k >= 1 and c2 in (0,1)");
    }
    Ok(gamma_rec(k, i, (1.0 - c2).ln()))
}

fn gamma_rec(k: u32, i: f64, log_q: f64) -> GammaBound {
    if i <= 0.0 {
        return GammaBound { log_value: 0.0, clipped: false };
    }
    if k == 1 {
        return GammaBound { log_value: f64::NEG_INFINITY, clipped: false };
    }
    let kk = (k - 1) as f64;
    let s = i.sqrt();
    let first = (s - 1.0) * log_q;
    let inner = gamma_rec(k - 1, s.floor() - kk + 1.0, log_q);
    let second = if inner.log_value == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        (1.0 + (kk - 1.0) / 2.0) * i.ln() + inner.log_value
    };
    let raw = log_add_exp(first, second);
    GammaBound { log_value: raw.min(0.0), clipped: raw > 0.0 || inner.clipped }
}

/// Table of Γ̃_k(I) for k = 1..=J over the given I values.
pub fn gamma_recursion(c2: f64, j: u32, i_values: &[f64]) -> Result<Vec<Vec<GammaBound>>> {
    (1..=j).map(|k| i_values.iter().map(|&i| gamma_tilde(k, i, c2)).collect()).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct I0LemmaCheck {
    pub k: u32,
    pub c2: f64,
    pub eps: f64,
    pub log_i: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// With I = ⌈I₀(ε,k)⌉: I^{−1/2^{k−1}} log Γ̃_k(I) ≤ log(1 − c₂) + ε.
pub fn i0_lemma_check(eps: f64, k: u32, c2: f64) -> Result<I0LemmaCheck> {
    let log_i = log_ceil(log_i0(eps, k, c2)?);
    let i = log_i.exp();
    if !i.is_finite() {
        return Err(Error::Capacity(format!("I0 = e^{log_i:.1} overflows a double; k = {k} is out of reach")));
    }
    let g = gamma_tilde(k, i, c2)?;
    let lhs = (-log_i / 2f64.powi(k as i32 - 1)).exp() * g.log_value;
    let rhs = (1.0 - c2).ln() + eps;
    Ok(I0LemmaCheck { k, c2, eps, log_i, lhs, rhs, holds: lhs <= rhs })
}

/// W₋₁(−e^{−u−1}) bracketed by bisection on ln(−w) + w + u + 1 = 0, w ≤ −1.
#[derive(Clone, Debug, Serialize)]
pub struct LambertReport {
    pub u: f64,
    pub w_lo: f64,
    pub w_hi: f64,
    /// −1 − √(2u) − u
    pub bound: f64,
    /// w_lo − bound; positive means the inequality is certified.
    pub margin: f64,
    /// Whether W > −u − 1 holds as well.
    pub weakened_holds: bool,
}

pub fn lambert_wm1_exp(u: f64, tol: f64) -> Result<(f64, f64)> {
    if !(u > 0.0) || !u.is_finite() {
        return usage(format!("u must be positive, got {u}"));
    }
    let h = |w: f64| (-w).ln() + w + u + 1.0;
    // h is increasing on w ≤ −1 with h(−1) = u > 0 and h(−2u−3) < 0.
    let (mut lo, mut hi) = (-2.0 * u - 3.0, -1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

pub fn lambert_w_check(u: f64) -> Result<LambertReport> {
    let (w_lo, w_hi) = lambert_wm1_exp(u, 1e-12)?;
    let bound = -1.0 - (2.0 * u).sqrt() - u;
    Ok(LambertReport { u, w_lo, w_hi, bound, margin: w_lo - bound, weakened_holds: w_lo > -u - 1.0 })
}

/// Outcome of the alternatives bound for a law on the grid {0, 1/n, …, 1}.
#[derive(Clone, Debug, Serialize)]
pub struct Alternatives {
    pub mu: f64,
    pub upper_tail: f64,
    pub lower_tail: f64,
    pub central: f64,
    pub tails: bool,
    pub center: bool,
}

impl Alternatives {
    pub fn holds(&self) -> bool {
        self.tails || self.center
    }
}

/// Law with mass `counts[k]/Σcounts` at k/n (n = counts.len() − 1) and δ = `delta_num/delta_den`.
/// All comparisons are done in integers, so ties are decided exactly.
pub fn elementary_lemma_check(counts: &[u64], delta_num: u64, delta_den: u64) -> Result<Alternatives> {
    if counts.len() < 2 || delta_den == 0 {
        return usage("need at least two grid points and a nonzero delta denominator");
    }
    let n = (counts.len() - 1) as i128;
    let m: i128 = counts.iter().map(|&c| c as i128).sum();
    if m == 0 {
        return usage("weights sum to zero");
    }
    let s: i128 = counts.iter().enumerate().map(|(k, &c)| k as i128 * c as i128).sum();
    let (a, b) = (delta_num as i128, delta_den as i128);
    // δ ≤ μ ∧ (1 − μ) with μ = s/(n m).
    if a * n * m > b * s || a * n * m > b * (n * m - s) {
        return Err(Error::Domain("delta exceeds min(mu, 1 - mu)".into()));
    }
    let (mut up, mut low, mut mid) = (0i128, 0i128, 0i128);
    for (k, &c) in counts.iter().enumerate() {
        let k = k as i128;
        // k/n versus s/(nm) ± a/b, scaled by n m b.
        let y = k * m * b;
        let hi = s * b + a * n * m;
        let lo = s * b - a * n * m;
        if y > hi {
            up += c as i128;
        } else if y < lo {
            low += c as i128;
        } else {
            mid += c as i128;
        }
    }
    let tails = 2 * b * up >= a * m && 2 * b * low >= a * m;
    let center = 4 * b * mid >= (b - 2 * a) * m;
    let mf = m as f64;
    Ok(Alternatives {
        mu: s as f64 / (n as f64 * mf),
        upper_tail: up as f64 / mf,
        lower_tail: low as f64 / mf,
        central: mid as f64 / mf,
        tails,
        center,
    })
}

/// r_{α,R} = exp(κ_reg·(log R)^{1+Δ_S}), returned as its logarithm.
pub fn log_r_alpha_r(r: f64, kappa_reg: f64, delta_s: f64) -> f64 {
    kappa_reg * r.ln().max(0.0).powf(1.0 + delta_s)
}

pub fn r_alpha_r(r: f64, kappa_reg: f64, delta_s: f64) -> f64 {
    log_r_alpha_r(r, kappa_reg, delta_s).exp()
}

/// ℓ₀ = largest multiple of (J+1)L not above ℓ*.
pub fn ell0(ell_star: u64, j: u32, l: u32) -> u64 {
    let step = (j as u64 + 1) * l as u64;
    ell_star / step * step
}

/// (𝒜*, 𝒜): L-multiples and (J+1)L-multiples in (ℓ₀ − I(J+1)L, ℓ₀], largest first.
pub fn scale_sets(ell_star: u64, i: u64, j: u32, l: u32) -> Result<(Vec<u64>, Vec<u64>)> {
    let l0 = ell0(ell_star, j, l);
    let step = (j as u64 + 1) * l as u64;
    if l0 < i * step {
        return Err(Error::Domain(format!("l0 = {l0} is below I(J+1)L = {}; scale set would go negative", i * step)));
    }
    let a_star: Vec<u64> = (0..(j as u64 + 1) * i).map(|m| l0 - m * l as u64).collect();
    let a: Vec<u64> = (0..i).map(|m| l0 - m * step).collect();
    Ok((a_star, a))
}

/// min{ℓ ∈ ℕ : 2^{−ℓ} ≤ δ/8 ∧ η δ/6}.
pub fn ell_min_precision(delta: f64, eta: f64) -> u32 {
    let target = (delta / 8.0).min(eta * delta / 6.0);
    let mut l = 0u32;
    while 2f64.powi(-(l as i32)) > target {
        l += 1;
    }
    l
}

/// ℓ_min: the precision term together with the three regularity radii.
pub fn ell_min(delta: f64, eta: f64, r_den: f64, r_hk: f64, r_khk: f64) -> u32 {
    let lg = |r: f64| r.max(1.0).log2().ceil() as u32;
    ell_min_precision(delta, eta).max(lg(r_den)).max(lg(r_hk)).max(lg(r_khk))
}

#[derive(Clone, Debug, Serialize)]
pub struct SeparationViolation {
    pub j: usize,
    pub gap_ok: bool,
    pub radius_ok: bool,
}

/// ℓ_j ≥ ℓ_{j+1} + L and 2^{ℓ_j} < r_{α,2^{ℓ_{j+1}}} − 2^{ℓ_{j+1}} for each consecutive pair.
pub fn proper_separation_check(ells: &[u32], l: u32, kappa_reg: f64, delta_s: f64) -> Vec<SeparationViolation> {
    let mut out = Vec::new();
    for j in 0..ells.len().saturating_sub(1) {
        let (a, b) = (ells[j] as f64, ells[j + 1] as f64);
        let gap_ok = ells[j] >= ells[j + 1] + l;
        let log_r = log_r_alpha_r(2f64.powf(b), kappa_reg, delta_s);
        // 2^a + 2^b < r, compared in logs.
        let radius_ok = log_add_exp(a * std::f64::consts::LN_2, b * std::f64::consts::LN_2) < log_r;
        if !(gap_ok && radius_ok) {
            out.push(SeparationViolation { j, gap_ok, radius_ok });
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct Compatibility {
    pub ell0: u64,
    pub low_scale: i64,
    pub above_ell_min: bool,
    pub covers_b_n: bool,
}

impl Compatibility {
    pub fn holds(&self) -> bool {
        self.above_ell_min && self.covers_b_n
    }
}

/// ℓ₀ − (I+1)(J+1)L > ℓ_min and r_{α, 2^{ℓ₀−(I+1)(J+1)L}} − 4·2^{ℓ₀} ≥ b_N.
pub fn compatibility_check(
    ell_star: u64,
    i: u64,
    j: u32,
    l: u32,
    ell_min: u32,
    kappa_reg: f64,
    delta_s: f64,
    b_n: f64,
) -> Compatibility {
    let l0 = ell0(ell_star, j, l);
    let low = l0 as i64 - ((i + 1) * (j as u64 + 1) * l as u64) as i64;
    let above_ell_min = low > ell_min as i64;
    let covers_b_n = if low < 0 {
        false
    } else {
        let log_r = log_r_alpha_r(2f64.powf(low as f64), kappa_reg, delta_s);
        let need = log_add_exp(b_n.ln(), 4f64.ln() + l0 as f64 * std::f64::consts::LN_2);
        log_r >= need
    };
    Compatibility { ell0: l0, low_scale: low, above_ell_min, covers_b_n }
}

/// Sampled growth sequences (a_N, b_N) at increasing N.
#[derive(Clone, Debug, Serialize)]
pub struct GrowthPair {
    pub n: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub delta_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub a_increasing: bool,
    pub b_increasing: bool,
    pub ratio_increasing: bool,
    pub damped_increasing: bool,
}

impl GrowthReport {
    pub fn holds(&self) -> bool {
        self.a_increasing && self.b_increasing && self.ratio_increasing && self.damped_increasing
    }
}

fn increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

/// a_N, b_N, b_N/a_N and a_N / exp{(log b_N)^{1/(1+Δ_S/2)}} strictly increasing over the samples.
pub fn growth_check(g: &GrowthPair) -> Result<GrowthReport> {
    if g.a.len() != g.b.len() || g.a.len() < 2 {
        return usage("growth check needs matching a_N, b_N with at least two samples");
    }
    if g.a.iter().chain(&g.b).any(|&x| !(x > 0.0)) {
        return usage("growth sequences must be positive");
    }
    let p = 1.0 / (1.0 + g.delta_s / 2.0);
    let ratio: Vec<f64> = g.a.iter().zip(&g.b).map(|(a, b)| b / a).collect();
    // Compare logs: log a − (log b)^p.
    let damped: Vec<f64> = g.a.iter().zip(&g.b).map(|(a, b)| a.ln() - b.ln().max(0.0).powf(p)).collect();
    Ok(GrowthReport {
        a_increasing: increasing(&g.a),
        b_increasing: increasing(&g.b),
        ratio_increasing: increasing(&ratio),
        damped_increasing: increasing(&damped),
    })
}

/// All schedule parameters for one J. Scale sets are only listed when I is small enough
/// to enumerate; otherwise only log I is reported.
#[derive(Clone, Debug, Serialize)]
pub struct ScaleSchedule {
    pub j: u32,
    pub dim: usize,
    pub eta: f64,
    pub alpha: f64,
    /// Exact rational form, present for J = 1.
    pub alpha_exact: Option<String>,
    pub delta: f64,
    pub delta_prime: f64,
    pub c0: f64,
    pub l: u32,
    pub alpha_tilde: f64,
    pub alpha_tilde_exact: String,
    pub intervals: Vec<(f64, f64)>,
    pub c2: f64,
    pub log_i: f64,
    pub i: Option<u64>,
    pub ell_star: u64,
    pub ell0: u64,
    pub a_star: Option<Vec<u64>>,
    pub a: Option<Vec<u64>>,
    pub delta_s: f64,
    pub kappa_reg: f64,
}

#[derive(Clone, Debug)]
pub struct ScheduleParams {
    pub j: u32,
    pub dim: usize,
    pub eta: f64,
    pub ell_star: u64,
    pub delta_s: f64,
    pub kappa_reg: f64,
    /// c₂(J), also used as c₂(1) inside c₃.
    pub c2: f64,
    pub l_override: Option<u32>,
    pub i_override: Option<u64>,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        ScheduleParams {
            j: 1,
            dim: 3,
            eta: 0.7,
            ell_star: 0,
            delta_s: 1.0,
            kappa_reg: 1.0,
            c2: 0.5,
            l_override: None,
            i_override: None,
        }
    }
}

/// Largest I that is still listed explicitly in a schedule.
const MAX_LISTED_I: u64 = 1 << 16;

impl ScaleSchedule {
    pub fn build(p: &ScheduleParams) -> Result<ScaleSchedule> {
        if p.dim < 2 {
            return usage("dim must be at least 2");
        }
        if !(p.eta > 0.0 && p.eta <= 1.0) {
            return usage(format!("eta must lie in (0,1], got {}", p.eta));
        }
        let (alpha, delta) = alpha_delta(p.j)?;
        let c0v = c0(p.dim, p.eta);
        let l = match p.l_override {
            Some(l) => l,
            None => l_of_j(p.j, c0v)?,
        };
        let (log_i, i) = match p.i_override {
            Some(i) => ((i as f64).ln(), Some(i)),
            None => {
                let r = i_of_j(p.j, p.c2, p.c2)?;
                let i = (r.log_value < (MAX_LISTED_I as f64).ln()).then(|| r.log_value.exp().round() as u64);
                (r.log_value, i)
            }
        };
        let (a_star, a) = match i {
            Some(i) if i <= MAX_LISTED_I => match scale_sets(p.ell_star, i, p.j, l) {
                Ok((s, a)) => (Some(s), Some(a)),
                Err(_) => (None, None),
            },
            _ => (None, None),
        };
        Ok(ScaleSchedule {
            j: p.j,
            dim: p.dim,
            eta: p.eta,
            alpha,
            alpha_exact: (p.j == 1).then(|| alpha_one_exact().to_string()),
            delta,
            delta_prime: delta_prime(delta, p.eta, p.dim),
            c0: c0v,
            l,
            alpha_tilde: alpha_tilde(p.dim),
            alpha_tilde_exact: alpha_tilde_exact(p.dim).to_string(),
            intervals: intervals(p.j)?,
            c2: p.c2,
            log_i,
            i,
            ell_star: p.ell_star,
            ell0: ell0(p.ell_star, p.j, l),
            a_star,
            a,
            delta_s: p.delta_s,
            kappa_reg: p.kappa_reg,
        })
    }

    pub fn c_lip_at(&self, ell: u32) -> f64 {
        c_lip(ell, self.eta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_one_is_one_over_38() {
        assert_eq!(alpha_one_exact(), Ratio::new(1, 38));
        let (a, d) = alpha_delta(1).unwrap();
        assert!((a - 1.0 / 38.0).abs() < 1e-16);
        assert!((d - 1.0 / 152.0).abs() < 1e-17);
        assert!(alpha_delta(0).is_err());
    }

    #[test]
    fn alpha_decreasing() {
        for j in 1..64 {
            assert!(alpha_delta(j + 1).unwrap().0 < alpha_delta(j).unwrap().0);
        }
    }

    #[test]
    fn ratio_bound() {
        // (1 + 1/38)/(1 − 1/38) = 39/37 < 10/9, exactly.
        let a = Ratio::new(1i64, 38);
        let one = Ratio::from_integer(1);
        assert_eq!((one + a) / (one - a), Ratio::new(39, 37));
        assert!(Ratio::new(39i64, 37) < Ratio::new(10, 9));
        for j in [1, 2, 7, 64] {
            assert!(alpha_ratio_check(j).unwrap().holds);
        }
        let (a1, _) = alpha_delta(1).unwrap();
        assert!(!ratio_power(2.0 * a1, 1).holds);
    }

    #[test]
    fn delta_prime_values() {
        let dp = delta_prime(1.0 / 152.0, 0.6, 3);
        assert!((dp - 0.6 / (152.0 * 18.0)).abs() < 1e-18);
        assert!((dp - 2.193e-4).abs() < 1e-7);
        assert_eq!(delta_prime(0.0, 0.6, 3), 0.0);
    }

    #[test]
    fn l_of_j_examples() {
        let c = c0(3, 0.7);
        assert!((c - 36.0 / 0.7).abs() < 1e-12);
        assert_eq!(l_of_j(1, c).unwrap(), 13);
        let (_, d1) = alpha_delta(1).unwrap();
        assert_eq!(l_of_j(1, 32.0 * d1).unwrap(), 5);
        assert_eq!(l_of_j(1, 1e-9).unwrap(), 5);
        let mut prev = 0;
        for j in 1..40 {
            let l = l_of_j(j, c).unwrap();
            assert!(l >= prev);
            prev = l;
        }
    }

    #[test]
    fn interval_shapes() {
        let (_, d) = alpha_delta(3).unwrap();
        let iv = intervals(3).unwrap();
        assert!((iv[0].0 - (0.5 - d)).abs() < 1e-15 && (iv[0].1 - (0.5 + d)).abs() < 1e-15);
        for w in iv.windows(2) {
            assert!(w[1].0 < w[0].0 && w[1].1 > w[0].1);
        }
    }

    #[test]
    fn alpha_tilde_values() {
        assert_eq!(alpha_tilde_exact(3), Ratio::new(3, 640));
        assert_eq!(alpha_tilde_exact(2), Ratio::new(3, 160));
        assert!((alpha_tilde(3) - 3.0 / 640.0).abs() < 1e-18);
    }

    #[test]
    fn i0_direct() {
        // k = 2, ε = ½, c₂(1) = ½: c₃ = 2, I₀ = (2·16·log 16)².
        let want = (2.0 * 16.0 * 16f64.ln()).powi(2);
        assert!((log_i0(0.5, 2, 0.5).unwrap() - want.ln()).abs() < 1e-12);
        assert!(log_i0(0.4, 3, 0.5).unwrap() > log_i0(0.5, 3, 0.5).unwrap());
    }

    #[test]
    fn i_of_j_branches() {
        let r = i_of_j(2, 0.5, 0.5).unwrap();
        let eps = -0.5 * 0.5f64.ln();
        let m = 2.0 * 4.0 / eps;
        let direct = (2.0 * m * m.ln()).powi(2).ceil();
        assert!((r.log_growth_term - direct.ln()).abs() < 1e-12);
        assert!((r.log_ratio_term - 16f64.ln()).abs() < 1e-12);
        assert_eq!(r.dominant, IBranch::Growth);
        // With ε = −½log(1−c₂) ≥ c₂/2 the first base c₃(J2^J/ε)log(J2^J/ε) always exceeds J/c₂,
        // so the ratio branch never wins where I₀ is defined.
        for j in 1..6 {
            for c2 in [1e-6, 0.01, 0.1, 0.5, 0.8] {
                assert_eq!(i_of_j(j, c2, c2).unwrap().dominant, IBranch::Growth, "J={j} c2={c2}");
            }
        }
        assert!(i_of_j(3, 0.2, 0.5).unwrap().log_value > i_of_j(3, 0.4, 0.5).unwrap().log_value);
    }

    #[test]
    fn gamma_base_and_value() {
        let g = gamma_tilde(2, 100.0, 0.5).unwrap();
        assert!((g.log_value - 9.0 * 0.5f64.ln()).abs() < 1e-12);
        assert_eq!(gamma_tilde(1, 100.0, 0.5).unwrap().log_value, f64::NEG_INFINITY);
        assert_eq!(gamma_tilde(3, 0.0, 0.5).unwrap().log_value, 0.0);
        // At I = 10^6 the second term is 10^9·Γ̃₂(999) ≈ 0.6; the bound only drops below 10^{−3} later.
        let g6 = gamma_tilde(3, 1e6, 0.5).unwrap().log_value.exp();
        assert!((g6 - 0.6).abs() < 0.05, "{g6}");
        assert!(gamma_tilde(3, 1e8, 0.5).unwrap().log_value < 1e-3f64.ln());
    }

    #[test]
    fn lambert_examples() {
        let r = lambert_w_check(1.0).unwrap();
        assert!((r.w_lo - -3.146193220620583).abs() < 1e-9);
        assert!(r.margin > 0.0);
        assert!(!r.weakened_holds);
        assert!(lambert_w_check(0.01).unwrap().margin > 0.0);
        assert!(lambert_w_check(50.0).unwrap().margin > 0.0);
    }

    #[test]
    fn alternatives_examples() {
        // Point mass at ½ on the grid {0, ½, 1}, δ = ¼.
        let r = elementary_lemma_check(&[0, 1, 0], 1, 4).unwrap();
        assert!(r.center && r.central == 1.0);
        // Uniform on {0,1}, δ = ¼.
        let r = elementary_lemma_check(&[1, 1], 1, 4).unwrap();
        assert!(r.tails && r.upper_tail == 0.5);
        assert!(elementary_lemma_check(&[1, 0, 0, 0], 1, 4).is_err());
    }

    #[test]
    fn scale_set_example() {
        assert_eq!(ell0(100, 2, 13), 78);
        let (s, a) = scale_sets(100, 2, 2, 13).unwrap();
        assert_eq!(s.len(), 6);
        assert_eq!(a, vec![78, 39]);
        assert!(a.iter().all(|x| s.contains(x)));
        assert!(scale_sets(100, 3, 2, 13).is_err());
    }

    #[test]
    fn r_and_ell_min() {
        assert_eq!(r_alpha_r(1.0, 3.0, 1.0), 1.0);
        let (_, d) = alpha_delta(1).unwrap();
        // δ/8 ≈ 8.2e−4 < ηδ/6 at η = 0.7 → 2^{−11} ≈ 4.9e−4.
        assert_eq!(ell_min_precision(d, 0.7), 11);
        assert_eq!(ell_min(d, 0.7, 4096.0, 1.0, 1.0), 12);
    }

    #[test]
    fn compatibility_example() {
        let c = compatibility_check(200, 1, 1, 13, 11, 1.0, 1.0, 10.0);
        assert_eq!(c.ell0, 182);
        assert_eq!(c.low_scale, 182 - 52);
        assert!(c.above_ell_min);
        // log r = (130 ln 2)^2 ≈ 8120 ≫ log(4·2^182).
        assert!(c.covers_b_n);
        let c = compatibility_check(60, 1, 1, 13, 11, 1.0, 1.0, 10.0);
        assert!(!c.holds());
    }

    #[test]
    fn growth_examples() {
        let n: Vec<f64> = vec![16.0, 32.0, 64.0];
        let g = GrowthPair {
            a: n.iter().map(|x| x / 8.0).collect(),
            b: n.iter().map(|x| x.powf(1.25) / 4.0).collect(),
            n,
            delta_s: 1.0,
        };
        assert!(growth_check(&g).unwrap().holds());
        let flat = GrowthPair { n: vec![1.0, 2.0], a: vec![2.0, 2.0], b: vec![3.0, 4.0], delta_s: 1.0 };
        assert!(!growth_check(&flat).unwrap().a_increasing);
    }

    #[test]
    fn schedule_json_has_exact_alpha() {
        let s = ScaleSchedule::build(&ScheduleParams { j: 1, dim: 3, eta: 0.7, ..Default::default() }).unwrap();
        assert_eq!(s.alpha_exact.as_deref(), Some("1/38"));
        assert_eq!(s.l, 13);
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"alpha_exact\":\"1/38\""));
    }

    #[test]
    fn i0_lemma_small_k() {
        for k in 2..=4 {
            for c in 1..=9 {
                let r = i0_lemma_check(0.3, k, c as f64 / 10.0).unwrap();
                assert!(r.holds, "{r:?}");
            }
        }
    }
}
