//! Exact counting of zero-energy solutions.
//!
//! `D_0 = 1`, `D_1 = d`, `D_n = d·D_{n-1} - r·D_{n-2}`. The characteristic
//! roots `f, g` satisfy `f + g = d`, `f·g = r`, and the closed form is
//! `D_n = (f^{n+1} - g^{n+1}) / (f - g)`.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Roots;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::chain::check_rank;
use crate::error::{Error, Result};

/// Phase of the `(d, r)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `4r > d²`: no zero-energy states on long chains.
    Frustrated,
    /// `4r = d²` (and not product-soluble).
    Critical,
    /// `d ≤ r` and `4r < d²`.
    EntangledUnfrustrated,
    /// `r < d`: a product-state solution exists.
    ProductSoluble,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Frustrated => "Frustrated",
            Regime::Critical => "Critical",
            Regime::EntangledUnfrustrated => "EntangledUnfrustrated",
            Regime::ProductSoluble => "ProductSoluble",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

fn check_params(d: usize, r: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidChain(format!("local dimension must be at least 2, got {d}")));
    }
    check_rank(d, r)
}

/// Classify `(d, r)`. Product solubility takes precedence over criticality,
/// which only overlap at `d = 2, r = 1`.
pub fn classify_regime(d: usize, r: usize) -> Result<Regime> {
    check_params(d, r)?;
    let (d2, r4) = (d * d, 4 * r);
    Ok(if r < d {
        Regime::ProductSoluble
    } else if r4 > d2 {
        Regime::Frustrated
    } else if r4 == d2 {
        Regime::Critical
    } else {
        Regime::EntangledUnfrustrated
    })
}

/// `D_0 ..= D_{n_max}` by the integer recursion.
pub fn solution_count_sequence(d: usize, r: usize, n_max: usize) -> Result<Vec<BigInt>> {
    check_params(d, r)?;
    let (dd, rr) = (BigInt::from(d), BigInt::from(r));
    let mut seq = Vec::with_capacity(n_max + 1);
    seq.push(BigInt::one());
    if n_max >= 1 {
        seq.push(dd.clone());
    }
    for n in 2..=n_max {
        let next = &dd * &seq[n - 1] - &rr * &seq[n - 2];
        seq.push(next);
    }
    Ok(seq)
}

/// Discriminant `d² - 4r` of `x² - d·x + r`.
pub fn discriminant(d: usize, r: usize) -> i64 {
    (d * d) as i64 - 4 * r as i64
}

/// The roots `(f, g)` with `f + g = d`, `f·g = r`, `Re f ≥ Re g` and
/// `Im f ≥ 0`.
pub fn characteristic_roots(d: usize, r: usize) -> (Complex64, Complex64) {
    let half = d as f64 / 2.0;
    let disc = discriminant(d, r) as f64 / 4.0;
    let root = Complex64::new(disc, 0.0).sqrt();
    (half + root, half - root)
}

/// Angle with `cos θ = d / (2√r)`, defined when `4r > d²`.
pub fn oscillation_angle(d: usize, r: usize) -> Option<f64> {
    (discriminant(d, r) < 0).then(|| (d as f64 / (2.0 * (r as f64).sqrt())).acos())
}

/// Closed form evaluated in whatever arithmetic is exact for the instance.
#[derive(Debug, Clone, PartialEq)]
pub enum ClosedForm {
    /// Integer roots: evaluated exactly.
    Integer(BigInt),
    /// Irrational or complex roots: floating point.
    Real(f64),
}

impl ClosedForm {
    pub fn to_f64(&self) -> f64 {
        match self {
            ClosedForm::Integer(v) => v.to_f64().unwrap_or(f64::NAN),
            ClosedForm::Real(x) => *x,
        }
    }
}

fn perfect_square_root(x: i64) -> Option<i64> {
    if x < 0 {
        return None;
    }
    let s = x.sqrt();
    (s * s == x).then_some(s)
}

/// Closed-form `D_n`: exact when `f, g` are integers, floating point otherwise.
pub fn closed_form_count(d: usize, r: usize, n: usize) -> Result<ClosedForm> {
    check_params(d, r)?;
    let disc = discriminant(d, r);
    Ok(match perfect_square_root(disc) {
        Some(s) => {
            // d and s share parity, so both roots are integers.
            let f = BigInt::from((d as i64 + s) / 2);
            let g = BigInt::from((d as i64 - s) / 2);
            if s == 0 {
                ClosedForm::Integer(BigInt::from(n + 1) * num_traits::pow(f, n))
            } else {
                ClosedForm::Integer((num_traits::pow(f, n + 1) - num_traits::pow(g, n + 1)) / BigInt::from(s))
            }
        }
        None => ClosedForm::Real(closed_form_float(d, r, n)),
    })
}

/// Floating-point closed form in the natural parametrization of each regime.
pub fn closed_form_float(d: usize, r: usize, n: usize) -> f64 {
    let disc = discriminant(d, r);
    let np1 = (n + 1) as i32;
    match disc.cmp(&0) {
        std::cmp::Ordering::Greater => {
            let root = (disc as f64).sqrt() / 2.0;
            let (f, g) = (d as f64 / 2.0 + root, d as f64 / 2.0 - root);
            (f.powi(np1) - g.powi(np1)) / (f - g)
        }
        std::cmp::Ordering::Equal => (n as f64 + 1.0) * (d as f64 / 2.0).powi(n as i32),
        std::cmp::Ordering::Less => {
            let theta = oscillation_angle(d, r).expect("negative discriminant");
            (r as f64).powf(n as f64 / 2.0) * ((n as f64 + 1.0) * theta).sin() / theta.sin()
        }
    }
}

/// Natural magnitude scale of the closed form: `|f|^n / |sin θ|` in the
/// oscillating regime, where `D_n` itself can vanish.
pub fn closed_form_envelope(d: usize, r: usize, n: usize) -> f64 {
    match oscillation_angle(d, r) {
        Some(theta) => (r as f64).powf(n as f64 / 2.0) / theta.sin(),
        None => closed_form_float(d, r, n).abs(),
    }
}

/// Closed form evaluated exactly in `Z[√Δ]`, `Δ = d² - 4r`, for every regime.
///
/// With `x = d + √Δ = 2f`, `x^{n+1} = a + b√Δ` gives
/// `f^{n+1} - g^{n+1} = 2b√Δ / 2^{n+1}`, hence `D_n = b / 2^n`.
pub fn closed_form_exact(d: usize, r: usize, n: usize) -> Result<BigInt> {
    check_params(d, r)?;
    let disc = BigInt::from(discriminant(d, r));
    if disc.is_zero() {
        let f = BigInt::from(d / 2);
        return Ok(BigInt::from(n + 1) * num_traits::pow(f, n));
    }
    let mul = |(a, b): &(BigInt, BigInt), (c, e): &(BigInt, BigInt)| {
        (a * c + b * e * &disc, a * e + b * c)
    };
    let mut acc = (BigInt::one(), BigInt::zero());
    let mut base = (BigInt::from(d), BigInt::one());
    let mut exp = n + 1;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul(&acc, &base);
        }
        base = mul(&base, &base);
        exp >>= 1;
    }
    let denom = BigInt::one() << n;
    let (quot, rem) = (&acc.1 / &denom, &acc.1 % &denom);
    debug_assert!(rem.is_zero(), "closed form must be integral");
    Ok(quot)
}

/// Smallest `n` with `D_n ≤ 0`, if the pair is frustrated.
pub fn first_frustrated_length(d: usize, r: usize) -> Result<Option<usize>> {
    if classify_regime(d, r)? != Regime::Frustrated {
        return Ok(None);
    }
    let (dd, rr) = (BigInt::from(d), BigInt::from(r));
    let (mut prev, mut cur) = (BigInt::one(), dd.clone());
    let mut n = 1;
    // In the oscillating regime the sign flips before n + 1 exceeds π/θ + 1.
    while cur.is_positive() {
        let next = &dd * &cur - &rr * &prev;
        prev = std::mem::replace(&mut cur, next);
        n += 1;
    }
    Ok(Some(n))
}

/// Smallest integer `n` with `n + 1 > π/θ`.
pub fn negativity_onset(d: usize, r: usize) -> Option<usize> {
    oscillation_angle(d, r).map(|theta| (PI / theta).floor() as usize)
}

/// Solution counts and their analytic description for one `(d, r)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CountReport {
    pub d: usize,
    pub r: usize,
    pub d_sequence: Vec<BigInt>,
    pub roots: (Complex64, Complex64),
    pub theta: Option<f64>,
    pub regime: Regime,
    pub first_frustrated_length: Option<usize>,
}

impl CountReport {
    pub fn new(d: usize, r: usize, n_max: usize) -> Result<Self> {
        Ok(Self {
            d,
            r,
            d_sequence: solution_count_sequence(d, r, n_max)?,
            roots: characteristic_roots(d, r),
            theta: oscillation_angle(d, r),
            regime: classify_regime(d, r)?,
            first_frustrated_length: first_frustrated_length(d, r)?,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CountReportJson::from(self))?)
    }
}

/// Wire form: big integers as decimal strings, complex roots as `[re, im]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountReportJson {
    pub d: usize,
    pub r: usize,
    pub d_sequence: Vec<String>,
    pub roots: [[f64; 2]; 2],
    pub theta: Option<f64>,
    pub regime: Regime,
    pub first_frustrated_length: Option<usize>,
}

impl From<&CountReport> for CountReportJson {
    fn from(c: &CountReport) -> Self {
        Self {
            d: c.d,
            r: c.r,
            d_sequence: c.d_sequence.iter().map(|v| v.to_string()).collect(),
            roots: [[c.roots.0.re, c.roots.0.im], [c.roots.1.re, c.roots.1.im]],
            theta: c.theta,
            regime: c.regime,
            first_frustrated_length: c.first_frustrated_length,
        }
    }
}

/// Outcome of checking a candidate solution-count sequence against the
/// extension inequality `s_{n+1} ≤ d·s_n - r·s_{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub enum Domination {
    /// The sequence is admissible. `slack[l - 1] = u_l ≥ 0`; `dominated`
    /// records whether `s_n ≤ D_n` held at every index.
    Admissible { slack: Vec<BigInt>, dominated: bool },
    /// First index at which admissibility fails.
    Violated { index: usize },
}

impl Domination {
    pub fn holds(&self) -> bool {
        matches!(self, Domination::Admissible { dominated: true, .. })
    }
}

pub fn verify_dominated_sequence(s: &[BigInt], d: usize, r: usize) -> Result<Domination> {
    check_params(d, r)?;
    if s.first() != Some(&BigInt::one()) {
        return Ok(Domination::Violated { index: 0 });
    }
    let (dd, rr) = (BigInt::from(d), BigInt::from(r));
    let mut slack = Vec::with_capacity(s.len().saturating_sub(1));
    for n in 1..s.len() {
        if s[n].is_negative() {
            return Ok(Domination::Violated { index: n });
        }
        let bound = if n == 1 { &dd * &s[0] } else { &dd * &s[n - 1] - &rr * &s[n - 2] };
        let u = bound - &s[n];
        if u.is_negative() {
            return Ok(Domination::Violated { index: n });
        }
        slack.push(u);
    }
    let counts = solution_count_sequence(d, r, s.len().saturating_sub(1))?;
    let dominated = s.iter().zip(&counts).all(|(a, b)| a <= b);
    Ok(Domination::Admissible { slack, dominated })
}

/// Rebuild `s` from slacks `u_1..u_n` via `s_n = D_n - Σ_{l=1}^{n} u_l D_{n-l}`.
pub fn reconstruct_from_slack(slack: &[BigInt], d: usize, r: usize) -> Result<Vec<BigInt>> {
    let n_max = slack.len();
    let counts = solution_count_sequence(d, r, n_max)?;
    Ok((0..=n_max)
        .map(|n| {
            let correction: BigInt = (1..=n).map(|l| &slack[l - 1] * &counts[n - l]).sum();
            &counts[n] - correction
        })
        .collect())
}
