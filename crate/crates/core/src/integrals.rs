//! Pfaffian-ensemble integrals `I₁…I₅` over a half-line or a circle arc,
//! their time deformations, Poissonized generating series `Z₁…Z₅`, and the
//! two-point series `G±(r)`.
//!
//! Integrals are evaluated by composite Gauss–Legendre tensor quadrature.
//! Every integrand carries a `Δ*` factor, so it vanishes on coincident nodes
//! and the N-fold sum runs over increasing node tuples times `N!`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pfaffian::det_exact;
use crate::ring::{factorial_rational, rational_to_f64, Rational};
use crate::special::bessel_k0;
use crate::tausums::WeightSpec;

/// Continuous quadrature is limited to this many coordinates.
pub const MAX_CONTINUOUS_N: usize = 4;
/// Discrete measures are summed exactly up to this many points per tuple.
pub const MAX_DISCRETE_N: usize = 8;
/// Largest accepted imaginary part, relative to the modulus, for real reports.
pub const REALNESS_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegralError {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("time index {0} is even")]
    EvenTime(u32),
    #[error("N = {n} exceeds the tensor-grid limit {limit}")]
    TooManyCoordinates { n: usize, limit: usize },
    #[error("I3 needs a kernel")]
    MissingKernel,
    #[error("r must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("inverse bracket needs z ≠ 0")]
    ZeroArgument,
    #[error("values must be distinct and positive")]
    Coincident,
}

/// `b(s, t) = exp Σ_{n odd} (n/2) s_n t_n`.
pub fn pair_form_b(s: &BTreeMap<u32, f64>, t: &BTreeMap<u32, f64>) -> f64 {
    s.iter()
        .filter_map(|(k, sv)| t.get(k).map(|tv| 0.5 * *k as f64 * sv * tv))
        .sum::<f64>()
        .exp()
}

/// `{z} = (2z, 2z³/3, 2z⁵/5, …)` up to `max_index`.
pub fn bracket(z: f64, max_index: u32) -> BTreeMap<u32, f64> {
    (1..=max_index)
        .step_by(2)
        .map(|n| (n, 2.0 * z.powi(n as i32) / n as f64))
        .collect()
}

/// `{z⁻¹}`.
pub fn inverse_bracket(z: f64, max_index: u32) -> Result<BTreeMap<u32, f64>, IntegralError> {
    if z == 0.0 {
        return Err(IntegralError::ZeroArgument);
    }
    Ok(bracket(1.0 / z, max_index))
}

/// Odd-indexed deformation times `t`, `t̄`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeformationTimes {
    #[serde(default)]
    pub t: BTreeMap<u32, f64>,
    #[serde(default)]
    pub tbar: BTreeMap<u32, f64>,
}

impl DeformationTimes {
    pub fn validate(&self) -> Result<(), IntegralError> {
        for k in self.t.keys().chain(self.tbar.keys()) {
            if k % 2 == 0 {
                return Err(IntegralError::EvenTime(*k));
            }
        }
        Ok(())
    }

    /// `b(t,{z}) b(−t̄,{z⁻¹}) = exp(Σ t_n zⁿ − Σ t̄_n z⁻ⁿ)`.
    pub fn factor(&self, z: Complex64) -> Complex64 {
        let mut e = Complex64::zero();
        for (&n, &t) in &self.t {
            e += t * z.powi(n as i32);
        }
        for (&n, &t) in &self.tbar {
            e -= t * z.powi(-(n as i32));
        }
        e.exp()
    }

    pub fn combined(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in &other.t {
            *out.t.entry(*k).or_insert(0.0) += v;
        }
        for (k, v) in &other.tbar {
            *out.tbar.entry(*k).or_insert(0.0) += v;
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.t.values().chain(self.tbar.values()).all(|&v| v == 0.0)
    }
}

/// The integration contour: the positive half-line (A) or the arc
/// `e^{iφ}`, `0 ≤ φ ≤ θ < π` (B).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Contour {
    A,
    B { theta: f64 },
}

/// Density on the contour parameter (`x` on A, `φ` on B).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Density {
    /// `e^{−r(x+1/x)} dx/x` on `(0, ∞)`.
    Braden { r: f64 },
    /// `λ e^{−λx} dx` on `(0, ∞)`.
    Exponential { rate: f64 },
    /// `dx` on `[lo, hi] ⊂ [0, ∞)`.
    Uniform { lo: f64, hi: f64 },
    /// `dφ` on `[0, θ]`.
    Angular,
    /// Point masses `Σ w_k δ(s − s_k)` at parameter values `s_k`.
    Discrete { points: Vec<(f64, f64)> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourMeasure {
    pub contour: Contour,
    pub density: Density,
}

/// Composite Gauss–Legendre: `panels` panels of `order` nodes each.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_panels")]
    pub panels: usize,
}

fn default_order() -> usize {
    12
}

fn default_panels() -> usize {
    6
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { order: default_order(), panels: default_panels() }
    }
}

impl QuadratureSpec {
    pub fn doubled(&self) -> Self {
        Self { order: self.order, panels: 2 * self.panels }
    }

    pub fn node_count(&self) -> usize {
        self.order * self.panels
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` by Newton iteration.
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if m == 0 { 1.0 } else if m == 1 { x } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn uniform_panels(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let h = (b - a) / n as f64;
    (0..n).map(|p| (a + p as f64 * h, a + (p + 1) as f64 * h)).collect()
}

/// Panels of doubling width from `c` down to `a`, then `qs.panels` uniform
/// panels on `[c, b]`, in increasing order.
fn graded_panels(a: f64, c: f64, b: f64, qs: &QuadratureSpec) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut hi = c;
    let mut width = (b - c) / qs.panels as f64;
    while hi > a {
        let lo = (hi - width).max(a);
        out.push((lo, hi));
        hi = lo;
        width *= 2.0;
    }
    out.reverse();
    out.extend(uniform_panels(c, b, qs.panels));
    out
}

/// Gauss–Legendre nodes mapped onto `[lo, hi]`.
fn mapped(base: &[(f64, f64)], lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
    let h = hi - lo;
    base.iter().map(move |&(x, w)| (lo + 0.5 * h * (x + 1.0), 0.5 * h * w))
}

/// Product Gauss rule on the ordered simplex `0 < x₁ < … < x_k < 1`.
fn simplex_rule(k: usize, base: &[(f64, f64)]) -> Vec<(Vec<f64>, f64)> {
    let mut rule = vec![(Vec::new(), 1.0)];
    for _ in 0..k {
        let mut next = Vec::with_capacity(rule.len() * base.len());
        for (pts, w) in &rule {
            let lo = pts.last().copied().unwrap_or(0.0);
            for (x, v) in mapped(base, lo, 1.0) {
                let mut p = pts.clone();
                p.push(x);
                next.push((p, w * v));
            }
        }
        rule = next;
    }
    rule
}

/// A continuous measure as panels in a parameter `u` together with the map
/// `u ↦ (ς, z, density × Jacobian)`, increasing in `ς`.
struct Chart {
    panels: Vec<(f64, f64)>,
    map: Box<dyn Fn(f64) -> (f64, Complex64, f64) + Send + Sync>,
}

/// A quadrature node: parameter `s`, point `z`, and weight including the
/// density and deformation.
#[derive(Clone, Copy, Debug)]
pub struct Node {
    pub s: f64,
    pub z: Complex64,
    pub w: Complex64,
}

impl ContourMeasure {
    pub fn validate(&self) -> Result<(), IntegralError> {
        let bad = |m: &str| Err(IntegralError::InvalidMeasure(m.into()));
        if let Contour::B { theta } = self.contour {
            if !(theta > 0.0 && theta < PI) {
                return bad("θ must lie in (0, π)");
            }
        }
        match (&self.contour, &self.density) {
            (Contour::A, Density::Braden { r }) if *r <= 0.0 => bad("r must be positive"),
            (Contour::A, Density::Exponential { rate }) if *rate <= 0.0 => bad("rate must be positive"),
            (Contour::A, Density::Uniform { lo, hi }) if !(*lo >= 0.0 && hi > lo) => bad("need 0 ≤ lo < hi"),
            (Contour::A, Density::Angular) => bad("angular density needs an arc"),
            (Contour::B { .. }, Density::Braden { .. } | Density::Exponential { .. } | Density::Uniform { .. }) => {
                bad("half-line density on an arc")
            }
            (_, Density::Discrete { points }) => {
                for &(s, w) in points {
                    let inside = match self.contour {
                        Contour::A => s > 0.0,
                        Contour::B { theta } => (0.0..=theta).contains(&s),
                    };
                    if !inside || w < 0.0 || !w.is_finite() {
                        return bad("discrete point outside the support or with a negative weight");
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.density, Density::Discrete { .. })
    }

    fn chart(&self, qs: &QuadratureSpec) -> Option<Chart> {
        let contour = self.contour;
        let point = move |s: f64| match contour {
            Contour::A => Complex64::new(s, 0.0),
            Contour::B { .. } => Complex64::from_polar(1.0, s),
        };
        let (panels, map): (_, Box<dyn Fn(f64) -> (f64, Complex64, f64) + Send + Sync>) = match self.density {
            Density::Braden { r } => {
                let half = (36.0 / r).asinh();
                (
                    uniform_panels(-half, half, qs.panels),
                    Box::new(move |u: f64| {
                        let x = u.exp();
                        (x, point(x), (-r * (x + 1.0 / x)).exp())
                    }),
                )
            }
            Density::Exponential { rate } => (
                graded_panels(-40.0 - rate.ln(), -3.0 - rate.ln(), (80.0 / rate).ln(), qs),
                Box::new(move |u: f64| {
                    let x = u.exp();
                    (x, point(x), rate * x * (-rate * x).exp())
                }),
            ),
            Density::Uniform { lo, hi } => (uniform_panels(lo, hi, qs.panels), Box::new(move |x| (x, point(x), 1.0))),
            Density::Angular => {
                let theta = match self.contour {
                    Contour::B { theta } => theta,
                    Contour::A => unreachable!("validated"),
                };
                (uniform_panels(0.0, theta, qs.panels), Box::new(move |p| (p, point(p), 1.0)))
            }
            Density::Discrete { .. } => return None,
        };
        Some(Chart { panels, map })
    }

    /// `(s, z, density weight)` triples before deformation.
    fn base_nodes(&self, qs: &QuadratureSpec) -> Vec<(f64, Complex64, f64)> {
        match (&self.density, self.chart(qs)) {
            (Density::Discrete { points }, _) => {
                let c = self.contour;
                points
                    .iter()
                    .map(|&(s, w)| {
                        let z = match c {
                            Contour::A => Complex64::new(s, 0.0),
                            Contour::B { .. } => Complex64::from_polar(1.0, s),
                        };
                        (s, z, w)
                    })
                    .collect()
            }
            (_, Some(chart)) => {
                let base = gauss_legendre(qs.order);
                chart
                    .panels
                    .iter()
                    .flat_map(|&(lo, hi)| mapped(&base, lo, hi).collect::<Vec<_>>())
                    .map(|(u, w)| {
                        let (s, z, rho) = (chart.map)(u);
                        (s, z, w * rho)
                    })
                    .collect()
            }
            (_, None) => unreachable!("continuous densities have a chart"),
        }
    }

    /// Nodes with the deformed weight `density · b(t,{z}) b(−t̄,{z⁻¹})`.
    pub fn nodes(&self, dt: &DeformationTimes, qs: &QuadratureSpec) -> Vec<Node> {
        self.base_nodes(qs)
            .into_iter()
            .map(|(s, z, w)| Node { s, z, w: w * dt.factor(z) })
            .collect()
    }
}

/// The deformed density at a point of the contour parameter.
pub fn deformed_density(s: f64, cm: &ContourMeasure, dt: &DeformationTimes) -> Result<Complex64, IntegralError> {
    cm.validate()?;
    dt.validate()?;
    let (z, rho) = match (&cm.contour, &cm.density) {
        (Contour::A, _) if s <= 0.0 => return Err(IntegralError::ZeroArgument),
        (Contour::A, Density::Braden { r }) => (Complex64::new(s, 0.0), (-r * (s + 1.0 / s)).exp() / s),
        (Contour::A, Density::Exponential { rate }) => (Complex64::new(s, 0.0), rate * (-rate * s).exp()),
        (Contour::A, Density::Uniform { lo, hi }) => {
            (Complex64::new(s, 0.0), if (*lo..=*hi).contains(&s) { 1.0 } else { 0.0 })
        }
        (Contour::B { theta }, Density::Angular) => {
            (Complex64::from_polar(1.0, s), if (0.0..=*theta).contains(&s) { 1.0 } else { 0.0 })
        }
        _ => return Err(IntegralError::InvalidMeasure("density has no pointwise value".into())),
    };
    Ok(rho * dt.factor(z))
}

type PairFn = Arc<dyn Fn(&Node, &Node) -> Complex64 + Send + Sync>;
type SingleFn = Arc<dyn Fn(&Node) -> Complex64 + Send + Sync>;

/// The skew kernel `a(z,w)` and the function `a(z)` of the Pfaffian integral.
#[derive(Clone)]
pub enum Kernel {
    /// `sgn(ς(z)−ς(w))`, `a(z) = 1` on A; with phases `e^{−iπ/2}`, `e^{−iπ/4}` on B.
    Sgn,
    /// `(z−w)/(z+w)`, `a(z) = 1`.
    Cayley,
    Custom { pair: PairFn, single: SingleFn },
}

impl std::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Kernel::Sgn => write!(f, "Sgn"),
            Kernel::Cayley => write!(f, "Cayley"),
            Kernel::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl Kernel {
    fn pair(&self, contour: Contour, a: &Node, b: &Node) -> Complex64 {
        match self {
            Kernel::Sgn => {
                let s = (a.s - b.s).signum() * if a.s == b.s { 0.0 } else { 1.0 };
                match contour {
                    Contour::A => Complex64::new(s, 0.0),
                    Contour::B { .. } => Complex64::new(0.0, -s),
                }
            }
            Kernel::Cayley => (a.z - b.z) / (a.z + b.z),
            Kernel::Custom { pair, .. } => pair(a, b),
        }
    }

    fn single(&self, contour: Contour, a: &Node) -> Complex64 {
        match self {
            Kernel::Sgn => match contour {
                Contour::A => Complex64::one(),
                Contour::B { .. } => Complex64::from_polar(1.0, -PI / 4.0),
            },
            Kernel::Cayley => Complex64::one(),
            Kernel::Custom { single, .. } => single(a),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntegralId {
    I1,
    I2,
    I3,
    I4,
}

/// A value with its node-doubling comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegralReport {
    pub re: f64,
    pub im: f64,
    pub refined_re: f64,
    pub refined_im: f64,
    pub difference: f64,
    pub tolerance: f64,
    pub converged: bool,
    pub nodes: usize,
}

impl IntegralReport {
    fn new(value: Complex64, refined: Complex64, tolerance: f64, nodes: usize) -> Self {
        let difference = (value - refined).norm();
        Self {
            re: value.re,
            im: value.im,
            refined_re: refined.re,
            refined_im: refined.im,
            difference,
            tolerance,
            converged: difference <= tolerance * refined.norm().max(1.0),
            nodes,
        }
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn is_real(&self) -> bool {
        self.im.abs() <= REALNESS_TOLERANCE * self.value().norm().max(1e-300)
    }
}

fn factorial_f64(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `Σ_{i₁<…<i_N} f(i)` with the outer index split across threads and the
/// partial sums reduced in index order.
fn sum_increasing<F>(n_nodes: usize, n: usize, f: F) -> Complex64
where
    F: Fn(&[usize]) -> Complex64 + Sync,
{
    if n == 0 {
        return f(&[]);
    }
    fn rec<F: Fn(&[usize]) -> Complex64>(start: usize, n_nodes: usize, n: usize, cur: &mut Vec<usize>, f: &F) -> Complex64 {
        if cur.len() == n {
            return f(cur);
        }
        let mut acc = Complex64::zero();
        for i in start..n_nodes {
            cur.push(i);
            acc += rec(i + 1, n_nodes, n, cur, f);
            cur.pop();
        }
        acc
    }
    let partial: Vec<Complex64> = (0..n_nodes)
        .into_par_iter()
        .map(|i| {
            let mut cur = vec![i];
            rec(i + 1, n_nodes, n, &mut cur, &f)
        })
        .collect();
    partial.into_iter().fold(Complex64::zero(), |a, b| a + b)
}

fn pfaffian_small(m: &[Vec<Complex64>]) -> Complex64 {
    let n = m.len();
    if n == 0 {
        return Complex64::one();
    }
    let mut acc = Complex64::zero();
    for j in 1..n {
        let rest: Vec<usize> = (1..n).filter(|&k| k != j).collect();
        let sub: Vec<Vec<Complex64>> = rest.iter().map(|&r| rest.iter().map(|&c| m[r][c]).collect()).collect();
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        acc += sign * m[0][j] * pfaffian_small(&sub);
    }
    acc
}

/// `a^c(z)` for a node tuple, with the odd-length augmentation by `a(z)`.
fn kernel_pfaffian(idx: &[usize], pairs: &[Vec<Complex64>], singles: &[Complex64]) -> Complex64 {
    let k = idx.len();
    let dim = k + k % 2;
    let mut m = vec![vec![Complex64::zero(); dim]; dim];
    for a in 0..k {
        for b in a + 1..k {
            m[a][b] = pairs[idx[a]][idx[b]];
            m[b][a] = -m[a][b];
        }
        if k % 2 == 1 {
            m[a][k] = singles[idx[a]];
            m[k][a] = -m[a][k];
        }
    }
    pfaffian_small(&m)
}

fn cayley_matrix(nodes: &[Node]) -> Vec<Vec<Complex64>> {
    nodes
        .iter()
        .map(|a| nodes.iter().map(|b| if a.s == b.s { Complex64::zero() } else { (a.z - b.z) / (a.z + b.z) }).collect())
        .collect()
}

fn check_n(cm_discrete: bool, n: usize) -> Result<(), IntegralError> {
    let limit = if cm_discrete { MAX_DISCRETE_N } else { MAX_CONTINUOUS_N };
    if n > limit {
        return Err(IntegralError::TooManyCoordinates { n, limit });
    }
    Ok(())
}

/// Integrand selector shared by `I₁…I₄` and the diagonal `I₅`.
#[derive(Clone, Copy)]
enum Integrand {
    AbsPower(i32),
    Squared,
    Kernel,
}

fn integrand_value(nodes: &[Node], integrand: Integrand, kernel: Option<(&Kernel, Contour)>) -> Complex64 {
    let mut d = Complex64::one();
    for (a, x) in nodes.iter().enumerate() {
        for y in &nodes[a + 1..] {
            d *= (x.z - y.z) / (x.z + y.z);
        }
    }
    match integrand {
        Integrand::AbsPower(p) => Complex64::new(d.norm().powi(p), 0.0),
        Integrand::Squared => d * d,
        Integrand::Kernel => {
            let (k, c) = kernel.expect("kernel integrand without a kernel");
            let idx: Vec<usize> = (0..nodes.len()).collect();
            let pairs: Vec<Vec<Complex64>> = nodes.iter().map(|a| nodes.iter().map(|b| k.pair(c, a, b)).collect()).collect();
            let singles: Vec<Complex64> = nodes.iter().map(|a| k.single(c, a)).collect();
            d * kernel_pfaffian(&idx, &pairs, &singles)
        }
    }
}

fn integrate_on(nodes: &[Node], n: usize, integrand: Integrand, kernel: Option<(&Kernel, Contour)>) -> Complex64 {
    let delta = cayley_matrix(nodes);
    let (pairs, singles) = match kernel {
        Some((k, c)) => (
            nodes.iter().map(|a| nodes.iter().map(|b| k.pair(c, a, b)).collect()).collect(),
            nodes.iter().map(|a| k.single(c, a)).collect(),
        ),
        None => (Vec::new(), Vec::new()),
    };
    let sum = sum_increasing(nodes.len(), n, |idx| {
        let mut d = Complex64::one();
        let mut w = Complex64::one();
        for (a, &i) in idx.iter().enumerate() {
            w *= nodes[i].w;
            for &j in &idx[a + 1..] {
                d *= delta[i][j];
            }
        }
        let f = match integrand {
            Integrand::AbsPower(p) => Complex64::new(d.norm().powi(p), 0.0),
            Integrand::Squared => d * d,
            Integrand::Kernel => d * kernel_pfaffian(idx, &pairs, &singles),
        };
        f * w
    });
    sum * factorial_f64(n)
}

/// `N! ∫_{ς₁<…<ς_N} f`, where coordinates sharing a panel run over the
/// ordered simplex of that panel. Integrands with a kink or jump on
/// coincident points are smooth on every such cell.
fn integrate_ordered<F>(chart: &Chart, dt: &DeformationTimes, order: usize, n: usize, f: F) -> Complex64
where
    F: Fn(&[Node]) -> Complex64 + Sync,
{
    if n == 0 {
        return f(&[]);
    }
    let base = gauss_legendre(order);
    let rules: Vec<Vec<(Vec<f64>, f64)>> = (1..=n).map(|k| simplex_rule(k, &base)).collect();
    // cells[p][k − 1]: ordered k-tuples of nodes in panel p with their rule weight.
    let cells: Vec<Vec<Vec<(Vec<Node>, f64)>>> = chart
        .panels
        .iter()
        .map(|&(lo, hi)| {
            let h = hi - lo;
            rules
                .iter()
                .map(|rule| {
                    rule.iter()
                        .map(|(pts, w)| {
                            let nodes = pts
                                .iter()
                                .map(|&x| {
                                    let (s, z, rho) = (chart.map)(lo + h * x);
                                    Node { s, z, w: h * rho * dt.factor(z) }
                                })
                                .collect();
                            (nodes, *w)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    fn compositions(start: usize, panels: usize, left: usize, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for p in start..panels {
            for k in 1..=left {
                cur.push((p, k));
                compositions(p + 1, panels, left - k, cur, out);
                cur.pop();
            }
        }
    }
    let mut layouts = Vec::new();
    compositions(0, chart.panels.len(), n, &mut Vec::new(), &mut layouts);

    fn product<F: Fn(&[Node]) -> Complex64>(
        layout: &[(usize, usize)],
        cells: &[Vec<Vec<(Vec<Node>, f64)>>],
        cur: &mut Vec<Node>,
        weight: f64,
        f: &F,
    ) -> Complex64 {
        let Some((&(p, k), rest)) = layout.split_first() else {
            let w: Complex64 = cur.iter().map(|x| x.w).product();
            return f(cur) * w * weight;
        };
        let mut acc = Complex64::zero();
        for (nodes, w) in &cells[p][k - 1] {
            let len = cur.len();
            cur.extend_from_slice(nodes);
            acc += product(rest, cells, cur, weight * w, f);
            cur.truncate(len);
        }
        acc
    }
    let partial: Vec<Complex64> = layouts
        .par_iter()
        .map(|layout| product(layout, &cells, &mut Vec::with_capacity(n), 1.0, &f))
        .collect();
    partial.into_iter().fold(Complex64::zero(), |a, b| a + b) * factorial_f64(n)
}

fn raw_integral(
    id: IntegralId,
    n: usize,
    cm: &ContourMeasure,
    dt: &DeformationTimes,
    kernel: Option<&Kernel>,
    qs: &QuadratureSpec,
) -> Result<Complex64, IntegralError> {
    let (integrand, k) = match id {
        IntegralId::I1 => (Integrand::AbsPower(1), None),
        IntegralId::I2 => (Integrand::AbsPower(2), None),
        IntegralId::I4 => (Integrand::AbsPower(4), None),
        IntegralId::I3 => (Integrand::Kernel, Some((kernel.ok_or(IntegralError::MissingKernel)?, cm.contour))),
    };
    let kinked = matches!(integrand, Integrand::AbsPower(1)) || matches!(k, Some((Kernel::Sgn, _)));
    match cm.chart(qs) {
        Some(chart) if kinked => Ok(integrate_ordered(&chart, dt, qs.order, n, |x| integrand_value(x, integrand, k))),
        _ => Ok(integrate_on(&cm.nodes(dt, qs), n, integrand, k)),
    }
}

/// `I_id(N)` under the deformed measure, with a node-doubling comparison.
pub fn integral_i(
    id: IntegralId,
    n: usize,
    cm: &ContourMeasure,
    dt: &DeformationTimes,
    kernel: Option<&Kernel>,
    qs: &QuadratureSpec,
    tolerance: f64,
) -> Result<IntegralReport, IntegralError> {
    cm.validate()?;
    dt.validate()?;
    check_n(cm.is_discrete(), n)?;
    let value = raw_integral(id, n, cm, dt, kernel, qs)?;
    let (refined, nodes) = if cm.is_discrete() {
        (value, cm.nodes(dt, qs).len())
    } else {
        let fine = qs.doubled();
        (raw_integral(id, n, cm, dt, kernel, &fine)?, cm.nodes(dt, &fine).len())
    };
    let report = IntegralReport::new(value, refined, tolerance, nodes);
    if !report.converged {
        log::warn!("I{:?}({n}) changed by {} under node doubling", id, report.difference);
    }
    Ok(report)
}

/// Coupling of a product-grid bi-measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Coupling {
    /// `w(z, y) = 1`.
    Product,
    /// `w(z, y) = exp(−(ς(z)−ς(y))²/(2σ²))`.
    Gaussian { sigma: f64 },
}

/// The bi-measure `dν(z, y)` of the `2N`-fold integral.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BiMeasure {
    /// `δ(z−y)`-concentration of a single measure on the diagonal.
    Diagonal { measure: ContourMeasure },
    /// `w(z, y) dν₁(z) dν₂(y)` on a tensor grid.
    Grid { z: ContourMeasure, y: ContourMeasure, coupling: Coupling },
}

impl BiMeasure {
    fn is_discrete(&self) -> bool {
        match self {
            BiMeasure::Diagonal { measure } => measure.is_discrete(),
            BiMeasure::Grid { z, y, .. } => z.is_discrete() && y.is_discrete(),
        }
    }

    fn validate(&self) -> Result<(), IntegralError> {
        match self {
            BiMeasure::Diagonal { measure } => measure.validate(),
            BiMeasure::Grid { z, y, coupling } => {
                z.validate()?;
                y.validate()?;
                if let Coupling::Gaussian { sigma } = coupling {
                    if *sigma <= 0.0 {
                        return Err(IntegralError::InvalidMeasure("σ must be positive".into()));
                    }
                }
                Ok(())
            }
        }
    }
}

fn raw_i5(
    n: usize,
    bm: &BiMeasure,
    dt1: &DeformationTimes,
    dt2: &DeformationTimes,
    qs: &QuadratureSpec,
) -> Complex64 {
    match bm {
        BiMeasure::Diagonal { measure } => {
            let nodes = measure.nodes(&dt1.combined(dt2), qs);
            integrate_on(&nodes, n, Integrand::Squared, None)
        }
        BiMeasure::Grid { z, y, coupling } => {
            let zn = z.nodes(dt1, qs);
            let yn = y.nodes(dt2, qs);
            // W[a][b] = w(z_a, y_b) · weights; the y-integral of Δ*(y)∏W(z_i, y_i)
            // is the Pfaffian of G = W C Wᵀ (augmented by h = W·1 for odd N).
            let w: Vec<Vec<Complex64>> = zn
                .iter()
                .map(|a| {
                    yn.iter()
                        .map(|b| {
                            let c = match coupling {
                                Coupling::Product => 1.0,
                                Coupling::Gaussian { sigma } => (-(a.s - b.s).powi(2) / (2.0 * sigma * sigma)).exp(),
                            };
                            c * b.w
                        })
                        .collect()
                })
                .collect();
            let c = cayley_matrix(&yn);
            let wc: Vec<Vec<Complex64>> = w
                .iter()
                .map(|row| {
                    (0..yn.len())
                        .map(|j| row.iter().enumerate().map(|(k, x)| x * c[k][j]).sum())
                        .collect()
                })
                .collect();
            let g: Vec<Vec<Complex64>> = wc
                .iter()
                .map(|row| w.iter().map(|other| row.iter().zip(other).map(|(x, y)| x * y).sum()).collect())
                .collect();
            let h: Vec<Complex64> = w.iter().map(|row| row.iter().sum()).collect();
            let delta = cayley_matrix(&zn);
            let sum = sum_increasing(zn.len(), n, |idx| {
                let mut d = Complex64::one();
                let mut wz = Complex64::one();
                for (a, &i) in idx.iter().enumerate() {
                    wz *= zn[i].w;
                    for &j in &idx[a + 1..] {
                        d *= delta[i][j];
                    }
                }
                d * wz * kernel_pfaffian(idx, &g, &h)
            });
            sum * factorial_f64(n)
        }
    }
}

/// `I₅(N)`: `∫ Δ*_N(z) Δ*_N(y) ∏ dν(z_i, y_i | t⁽¹⁾, t⁽²⁾, t̄⁽¹⁾, t̄⁽²⁾)`, where
/// `dt1` deforms the `z` marginal and `dt2` the `y` marginal.
pub fn integral_i5(
    n: usize,
    bm: &BiMeasure,
    dt1: &DeformationTimes,
    dt2: &DeformationTimes,
    qs: &QuadratureSpec,
    tolerance: f64,
) -> Result<IntegralReport, IntegralError> {
    bm.validate()?;
    dt1.validate()?;
    dt2.validate()?;
    check_n(bm.is_discrete(), n)?;
    let value = raw_i5(n, bm, dt1, dt2, qs);
    let (refined, nodes) = if bm.is_discrete() {
        (value, qs.node_count())
    } else {
        let fine = qs.doubled();
        (raw_i5(n, bm, dt1, dt2, &fine), fine.node_count())
    };
    Ok(IntegralReport::new(value, refined, tolerance, nodes))
}

/// Which generating series to Poissonize.
#[derive(Clone, Debug)]
pub enum GrandSpec {
    Single { id: IntegralId, measure: ContourMeasure, times: DeformationTimes, kernel: Option<Kernel> },
    Bilinear { measure: BiMeasure, times1: DeformationTimes, times2: DeformationTimes },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrandReport {
    pub re: f64,
    pub im: f64,
    pub prefactor: f64,
    /// `I(N) μ^N / N!` for `N = 0..=N_max`, real parts.
    pub terms: Vec<f64>,
    pub tail_estimate: f64,
    pub converged: bool,
    pub tolerance: f64,
}

/// `Z = b · Σ_{N ≤ N_max} I(N) μ^N / N!`; the tail estimate is the modulus
/// of the last included term.
pub fn grand_z(
    spec: &GrandSpec,
    mu: f64,
    n_max: usize,
    qs: &QuadratureSpec,
    tolerance: f64,
) -> Result<GrandReport, IntegralError> {
    let prefactor = match spec {
        GrandSpec::Single { times, .. } => pair_form_b(&times.t, &times.tbar),
        GrandSpec::Bilinear { times1, times2, .. } => {
            pair_form_b(&times1.t, &times1.tbar) * pair_form_b(&times2.t, &times2.tbar)
        }
    };
    let mut sum = Complex64::zero();
    let mut terms = Vec::with_capacity(n_max + 1);
    let mut converged = true;
    let mut last = 0.0;
    for n in 0..=n_max {
        let report = match spec {
            GrandSpec::Single { id, measure, times, kernel } => {
                integral_i(*id, n, measure, times, kernel.as_ref(), qs, tolerance)?
            }
            GrandSpec::Bilinear { measure, times1, times2 } => integral_i5(n, measure, times1, times2, qs, tolerance)?,
        };
        converged &= report.converged;
        let term = report.value() * mu.powi(n as i32) / factorial_f64(n);
        terms.push(term.re);
        last = term.norm();
        sum += term;
    }
    let value = sum * prefactor;
    Ok(GrandReport {
        re: value.re,
        im: value.im,
        prefactor,
        terms,
        tail_estimate: last * prefactor,
        converged,
        tolerance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BradenReport {
    pub r: f64,
    pub sign: i32,
    pub value: f64,
    /// `(±1)ⁿ/(n!(2π)ⁿ) · ∫…` for `n = 0..=n_max`.
    pub terms: Vec<f64>,
    pub converged: bool,
    pub tolerance: f64,
}

/// `G±(r) = Σ_{n≤n_max} (±1)ⁿ/(n!(2π)ⁿ) ∫ ∏ e^{−r(x_i+1/x_i)} dx_i/x_i ∏_{i<j}((x_i−x_j)/(x_i+x_j))²`.
pub fn braden_g(r: f64, sign: i32, n_max: usize, qs: &QuadratureSpec, tolerance: f64) -> Result<BradenReport, IntegralError> {
    if r <= 0.0 {
        return Err(IntegralError::NonPositiveRadius(r));
    }
    let cm = ContourMeasure { contour: Contour::A, density: Density::Braden { r } };
    let s: f64 = if sign < 0 { -1.0 } else { 1.0 };
    let mut terms = Vec::new();
    let mut converged = true;
    for n in 0..=n_max {
        let rep = integral_i(IntegralId::I2, n, &cm, &DeformationTimes::default(), None, qs, tolerance)?;
        converged &= rep.converged;
        terms.push(rep.re * s.powi(n as i32) / (factorial_f64(n) * (2.0 * PI).powi(n as i32)));
    }
    Ok(BradenReport { r, sign: if sign < 0 { -1 } else { 1 }, value: terms.iter().sum(), terms, converged, tolerance })
}

/// The single-particle term `K₀(2r)/π` of `G±`.
pub fn braden_first_term(r: f64) -> f64 {
    bessel_k0(2.0 * r) / PI
}

#[derive(Clone, Debug, PartialEq)]
pub struct CauchyReport {
    pub lhs: Rational,
    pub rhs: Rational,
    pub holds: bool,
}

/// `det(1/(x_i+x_j)) = (2ⁿ x₁⋯x_n)⁻¹ ∏_{i<j} ((x_i−x_j)/(x_i+x_j))²`, exactly.
pub fn cauchy_pf_identity_check(x: &[Rational]) -> Result<CauchyReport, IntegralError> {
    for (i, a) in x.iter().enumerate() {
        if *a <= Rational::zero() || x[i + 1..].contains(a) {
            return Err(IntegralError::Coincident);
        }
    }
    let rows: Vec<Vec<Rational>> = x.iter().map(|a| x.iter().map(|b| Rational::one() / (a + b)).collect()).collect();
    let lhs = det_exact(&rows, &Rational::zero());
    let mut rhs = Rational::one();
    for (i, a) in x.iter().enumerate() {
        rhs /= Rational::from_integer(2.into()) * a;
        for b in &x[i + 1..] {
            let f = (a - b) / (a + b);
            rhs *= &f * &f;
        }
    }
    Ok(CauchyReport { holds: lhs == rhs, lhs, rhs })
}

/// Point masses `e^{−U_n}/(n!)²` at `x = n`, `n = 1..=l`, whose `I₂`
/// Poissonization at `μ = 1` reproduces the second closed-form sum.
pub fn discrete_measure_from_weights(w: &WeightSpec, l: u32) -> ContourMeasure {
    let points = (1..=l)
        .map(|n| {
            let f = factorial_rational(n);
            (n as f64, w.weight(n).to_f64() / rational_to_f64(&(&f * &f)))
        })
        .collect();
    ContourMeasure { contour: Contour::A, density: Density::Discrete { points } }
}
