//! Exact evaluation of the Fridge penalty.
//!
//! The penalty of order `m` is the elementary symmetric polynomial of degree
//! `m + 1` in the component values `g_1..g_p`:
//!
//! ```text
//! P_m(g) = sum over j_1 < ... < j_{m+1} of g_{j_1} * ... * g_{j_{m+1}}
//! ```
//!
//! [`forward_penalty`] computes `P_0..P_m` together with the companion
//! vectors `V_0..V_m` in `(3m + 1)p - 1` arithmetic operations, where
//! `V_k[j] = g_j * P_{k-1}(g without j)`. [`backward_penalty`] runs the
//! complementary recursion that starts from the full product.
//!
//! Orders are indexed the way the penalty is: `P_{-1}` is the empty product
//! and equals 1, so the `m = 0` case reduces to the plain sum (Lasso) in every
//! formula below.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::float::FloatCore;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{FridgeError, Result};

/// Entries below this are treated as zero by the backward recursion.
pub const BACKWARD_POSITIVITY_FLOOR: f64 = 1e-12;

/// Component values `g_j = g(beta_j)`; nonnegative, finite, nonempty.
#[derive(Debug, Clone, PartialEq)]
pub struct GVector(Vec<f64>);

impl GVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(FridgeError::InvalidInput("component vector is empty".into()));
        }
        if let Some((j, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(FridgeError::InvalidInput(format!(
                "component value g[{j}] = {v} must be finite and nonnegative"
            )));
        }
        Ok(GVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn nonzero_count(&self) -> usize {
        self.0.iter().filter(|v| **v != 0.0).count()
    }
}

impl AsRef<[f64]> for GVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Output of the forward recursion up to a given order.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyEvaluation {
    pub order: usize,
    /// `P_0..=P_order`.
    pub p_values: Vec<f64>,
    /// `V_0..=V_order`, each of length `p`.
    pub v_values: Vec<Vec<f64>>,
    /// Adds, multiplies and divides performed by the recursion.
    pub op_count: usize,
    /// Set when cancellation in the recursion was severe enough that the
    /// levels were recomputed from elementary sums.
    pub stabilized: bool,
    nonzero: usize,
}

impl PenaltyEvaluation {
    /// `P_order(g)`.
    pub fn penalty(&self) -> f64 {
        self.p_values[self.order]
    }

    /// `P_k(g)` with the `P_{-1} = 1` convention.
    pub fn p(&self, k: isize) -> f64 {
        if k < 0 {
            1.0
        } else {
            self.p_values[k as usize]
        }
    }
}

fn check_order(m: usize, len: usize) -> Result<()> {
    if m >= len {
        Err(FridgeError::InvalidOrder { order: m, len })
    } else {
        Ok(())
    }
}

/// Forward recursion `V_k = (P_{k-1} - V_{k-1}) o g`, `P_k = 1'V_k / (k + 1)`.
///
/// Differences that come out negative through cancellation are clamped to
/// zero, and once `k` reaches the number of nonzero entries the level is
/// pinned to exact zeros, so `P_m(g) == 0.0` exactly when at least `p - m`
/// entries vanish.
///
/// The difference `P_{k-1} - V_{k-1}[j]` equals `P_{k-1}(g_{-j})`, which is
/// small next to `P_{k-1}` when `g_j` dominates the vector, and each level
/// scales the relative error of the previous one by `P_{k-1}` over that
/// difference. A running estimate of this error is kept; if it exceeds
/// [`CANCELLATION_GUARD`], all levels are recomputed from prefix and suffix
/// elementary sums, which only add nonnegative products. `op_count` still
/// reports the recursion alone.
pub fn forward_penalty(g: &GVector, m: usize) -> Result<PenaltyEvaluation> {
    let values = g.values();
    let p = values.len();
    check_order(m, p)?;
    let nonzero = g.nonzero_count();

    let mut ops = p - 1;
    let unit = f64::EPSILON / 2.0;
    let mut err = p as f64 * unit;
    let p0: f64 = values.iter().sum();
    if !p0.is_finite() {
        return Err(FridgeError::Overflow { order: 0 });
    }
    let mut p_values = Vec::with_capacity(m + 1);
    let mut v_values: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    p_values.push(p0);
    v_values.push(values.to_vec());

    for k in 1..=m {
        let prev_p = p_values[k - 1];
        let prev_v = &v_values[k - 1];
        let mut amplification: f64 = 1.0;
        let mut v: Vec<f64> = prev_v
            .iter()
            .zip(values)
            .map(|(vk, gj)| {
                let diff = prev_p - vk;
                // Only differences whose true value is positive can lose digits.
                if *gj != 0.0 && nonzero - 1 >= k && prev_p > 0.0 {
                    amplification = amplification.max(prev_p / diff.max(f64::MIN_POSITIVE));
                }
                diff.max(0.0) * gj
            })
            .collect();
        err = amplification * (err + unit) + p as f64 * unit;
        let mut pk = v.iter().sum::<f64>() / (k + 1) as f64;
        ops += 3 * p;
        if k >= nonzero {
            v.iter_mut().for_each(|x| *x = 0.0);
            pk = 0.0;
        }
        if !pk.is_finite() || v.iter().any(|x| !x.is_finite()) {
            return Err(FridgeError::Overflow { order: k });
        }
        p_values.push(pk);
        v_values.push(v);
    }

    let stabilized = err > CANCELLATION_GUARD;
    if stabilized {
        stable_levels(values, m, &mut p_values, &mut v_values);
    }

    Ok(PenaltyEvaluation {
        order: m,
        p_values,
        v_values,
        op_count: ops,
        stabilized,
        nonzero,
    })
}

/// Estimated relative error above which the forward recursion is considered
/// to have lost too many digits.
pub const CANCELLATION_GUARD: f64 = 1e-13;

/// `P_k = e_{k+1}(g)` and `V_k[j] = g_j e_k(g_{-j})` without subtraction.
fn stable_levels(values: &[f64], m: usize, p_values: &mut [f64], v_values: &mut [Vec<f64>]) {
    let e = elementary_sums(values.iter().copied(), m + 1);
    p_values.copy_from_slice(&e[1..]);
    if m == 0 {
        return;
    }
    let suffix = SuffixTable::new(values, m);
    let mut prefix = vec![0.0; m + 1];
    prefix[0] = 1.0;
    for (j, &gj) in values.iter().enumerate() {
        for k in 1..=m {
            v_values[k][j] = gj * suffix.combine_degree(&prefix, j + 1, k);
        }
        push_value(&mut prefix, gj);
    }
}

/// `P_k(g)` for the vector with entry `j` removed, by the down-date
/// `P_k(g_{-j}) = P_k(g) - g_j P_{k-1}(g_{-j})` seeded at `P_0(g) - g_j`.
///
/// The down-date cancels when `g_j` dominates; under the same error estimate
/// as [`forward_penalty`] it falls back to summing over the reduced vector.
pub fn leave_one_out(eval: &PenaltyEvaluation, g: &GVector, k: isize, j: usize) -> Result<f64> {
    let values = g.values();
    if j >= values.len() {
        return Err(FridgeError::Index {
            index: j,
            len: values.len(),
        });
    }
    if k < 0 {
        return Ok(1.0);
    }
    let k = k as usize;
    if k > eval.order {
        return Err(FridgeError::InvalidOrder {
            order: k,
            len: eval.order + 1,
        });
    }
    let gj = values[j];
    let others_nonzero = eval.nonzero - usize::from(gj != 0.0);
    if k >= others_nonzero {
        return Ok(0.0);
    }
    let unit = f64::EPSILON / 2.0;
    let mut err = unit;
    let mut loo = 0.0;
    for i in 0..=k {
        let total = eval.p_values[i];
        let removed = if i == 0 { gj } else { gj * loo };
        loo = (total - removed).max(0.0);
        err = total / loo.max(f64::MIN_POSITIVE) * (err + unit) + unit;
    }
    if err > CANCELLATION_GUARD {
        let rest = values.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, v)| *v);
        loo = elementary_sums(rest, k + 1)[k + 1];
    }
    Ok(loo)
}

/// Partial derivatives `dP_m/dg_j = P_{m-1}(g_{-j})`.
pub fn penalty_gradient(g: &GVector, m: usize) -> Result<Vec<f64>> {
    check_order(m, g.len())?;
    Ok(leave_one_out_sums(g.values(), m))
}

/// Second partial derivative `d2 P_m / dg_j dg_r`: zero on the diagonal,
/// `P_{m-2}(g_{-[j,r]})` otherwise.
pub fn penalty_hessian_entry(g: &GVector, m: usize, j: usize, r: usize) -> Result<f64> {
    let p = g.len();
    check_order(m, p)?;
    for idx in [j, r] {
        if idx >= p {
            return Err(FridgeError::Index { index: idx, len: p });
        }
    }
    if j == r || m == 0 {
        return Ok(0.0);
    }
    // P_{m-2} is the elementary symmetric sum of degree m - 1.
    let e = elementary_sums(
        g.values()
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j && *i != r)
            .map(|(_, v)| *v),
        m - 1,
    );
    Ok(e[m - 1])
}

/// Backward recursion: `V_{p,1} = 0`, `S_{p,1} = prod g`,
/// `V_{p,k} = (S_{p,k-1} - V_{p,k-1}) / g`, `S_{p,k} = 1'V_{p,k} / (k - 1)`.
/// Returns `S_{p,k}`, which equals `P_{p-k}(g)`.
///
/// Each level divides a difference of nearly equal terms by `g`, so in
/// floating point the error in entry `j` grows like `g_j^-k`. The entries are
/// rescaled to integers by a common power of two; every intermediate is then
/// an integer polynomial in them, the divisions are exact, and the result is
/// rounded once.
pub fn backward_penalty(g: &GVector, k: usize) -> Result<f64> {
    let values = g.values();
    let p = values.len();
    if k == 0 || k > p {
        return Err(FridgeError::InvalidInput(format!(
            "backward index {k} must lie in 1..={p}"
        )));
    }
    if let Some((j, v)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| **v < BACKWARD_POSITIVITY_FLOOR)
    {
        return Err(FridgeError::Degenerate(format!(
            "backward recursion needs strictly positive entries; g[{j}] = {v}"
        )));
    }
    // g_j = mantissa_j * 2^exponent_j = ints[j] * 2^base
    let decoded: Vec<(u64, i16)> = values
        .iter()
        .map(|v| {
            let (mantissa, exponent, _) = FloatCore::integer_decode(*v);
            (mantissa, exponent)
        })
        .collect();
    let base = decoded.iter().map(|(_, e)| *e as i64).min().unwrap_or(0);
    let ints: Vec<BigInt> = decoded
        .iter()
        .map(|&(mantissa, exponent)| BigInt::from(mantissa) << (exponent as i64 - base) as usize)
        .collect();

    let mut s: BigInt = ints.iter().product();
    let mut v = vec![BigInt::zero(); p];
    for level in 2..=k {
        for (vj, gj) in v.iter_mut().zip(&ints) {
            *vj = (&s - &*vj) / gj;
        }
        s = v.iter().sum::<BigInt>() / BigInt::from(level - 1);
    }
    // S_{p,k} has degree p - k + 1 in the entries.
    let shift = base * (p - k + 1) as i64;
    let scaled = if shift >= 0 {
        BigRational::from_integer(s << shift as usize)
    } else {
        BigRational::new(s, BigInt::one() << (-shift) as usize)
    };
    match scaled.to_f64() {
        Some(value) if value.is_finite() => Ok(value),
        _ => Err(FridgeError::Overflow { order: p - k }),
    }
}

/// Reweighting factors that turn `P_m(g)` into a weighted sum of the `g_j`:
/// `w_j = P_{m-1}(g) - V_{m-1}(g)[j]`.
pub fn irl_weights(g: &GVector, m: usize) -> Result<IrlWeights> {
    check_order(m, g.len())?;
    // P_{m-1}(g) - V_{m-1}(g)[j] is the leave-one-out sum P_{m-1}(g_{-j}),
    // which is formed here without the subtraction.
    let weights = leave_one_out_sums(g.values(), m);
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(FridgeError::Overflow { order: m });
    }
    Ok(IrlWeights { weights })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrlWeights {
    pub weights: Vec<f64>,
}

/// Elementary symmetric sums `e_0..=e_degree` of `values`, with `e_0 = 1`.
///
/// Accumulates one value at a time, so every intermediate is a sum of
/// nonnegative products and exact zeros stay exact.
pub(crate) fn elementary_sums(values: impl IntoIterator<Item = f64>, degree: usize) -> Vec<f64> {
    let mut e = vec![0.0; degree + 1];
    e[0] = 1.0;
    for v in values {
        push_value(&mut e, v);
    }
    e
}

#[inline]
pub(crate) fn push_value(e: &mut [f64], v: f64) {
    if v == 0.0 {
        return;
    }
    for k in (1..e.len()).rev() {
        e[k] += v * e[k - 1];
    }
}

/// `P_{m-1}(g_{-j})` for every `j`, combining prefix and suffix sums.
/// For `m = 0` every entry is 1.
pub(crate) fn leave_one_out_sums(g: &[f64], m: usize) -> Vec<f64> {
    let p = g.len();
    if m == 0 {
        return vec![1.0; p];
    }
    let suffix = SuffixTable::new(g, m);
    let mut prefix = vec![0.0; m + 1];
    prefix[0] = 1.0;
    let mut out = Vec::with_capacity(p);
    for (j, &gj) in g.iter().enumerate() {
        out.push(suffix.combine(&prefix, j + 1));
        push_value(&mut prefix, gj);
    }
    out
}

/// Elementary sums of every suffix `g[j..]`, used to get leave-one-out sums
/// during a cyclic sweep where the prefix is updated as it goes.
pub(crate) struct SuffixTable {
    degree: usize,
    table: Vec<f64>,
}

impl SuffixTable {
    pub(crate) fn new(g: &[f64], degree: usize) -> Self {
        let p = g.len();
        let width = degree + 1;
        let mut table = vec![0.0; (p + 1) * width];
        table[p * width] = 1.0;
        for j in (0..p).rev() {
            let (head, tail) = table.split_at_mut((j + 1) * width);
            let row = &mut head[j * width..];
            row.copy_from_slice(&tail[..width]);
            push_value(row, g[j]);
        }
        SuffixTable { degree, table }
    }

    /// Degree-`degree` elementary sum of `prefix` values joined with `g[start..]`.
    #[inline]
    pub(crate) fn combine(&self, prefix: &[f64], start: usize) -> f64 {
        self.combine_degree(prefix, start, self.degree)
    }

    /// Same as [`combine`](Self::combine) at any degree up to the table's.
    #[inline]
    pub(crate) fn combine_degree(&self, prefix: &[f64], start: usize, degree: usize) -> f64 {
        let width = self.degree + 1;
        let row = &self.table[start * width..(start + 1) * width];
        (0..=degree).map(|a| prefix[a] * row[degree - a]).sum()
    }
}
