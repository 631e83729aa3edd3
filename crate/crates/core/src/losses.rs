//! Pairwise loss models (for SGD) and convex-concave minimax losses (for
//! SGDA) with certified regularity constants.
//!
//! Every loss carries analytically derived constants (Lipschitz L, smoothness
//! α, range bound M) valid on the certified domain ‖w‖₂ ≤ R_w with features
//! in the ball of radius R_x. The constants are what the stability and bound
//! calculators consume, so [`certify_constants`] re-checks them by Monte
//! Carlo: declared values must dominate every measurement.
//!
//! All margin losses act on the half-difference pair feature Δ = (x−x̃)/2,
//! which satisfies ‖Δ‖₂ ≤ R_x. That keeps the constants in closed form:
//! logistic L = R_x, α = R_x²/4; hinge L = R_x.

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use ndarray::Array1;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Regularity constants of a pairwise loss, fixed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LossConstants {
    /// Lipschitz constant of w ↦ ℓ(w, z, z̃) on the domain.
    pub lipschitz: f64,
    /// Smoothness (gradient Lipschitz) constant; None for non-smooth losses.
    pub smoothness: Option<f64>,
    /// Range bound: ℓ ∈ [0, M] on the domain.
    pub bound: f64,
    pub convex: bool,
    pub smooth: bool,
    /// Parameter domain radius R_w.
    pub domain_radius: f64,
}

/// A pairwise loss ℓ(w; z, z̃) with gradients in w.
///
/// `value` and `grad_w` are pure and infallible; their constants are
/// certified only on ‖w‖₂ ≤ R_w, which callers assert through
/// [`PairwiseLossModel::check_domain`] at operation boundaries (run start,
/// probe start, adaptive sampling refresh). Domain violations are reported,
/// never silently projected.
pub trait PairwiseLossModel {
    fn value(&self, w: &Array1<f64>, z: &Sample, zt: &Sample) -> f64;
    fn grad_w(&self, w: &Array1<f64>, z: &Sample, zt: &Sample) -> Array1<f64>;
    fn constants(&self) -> &LossConstants;

    fn check_domain(&self, w: &Array1<f64>) -> Result<()> {
        let r_w = self.constants().domain_radius;
        let norm = norm2(w);
        if norm > r_w * (1.0 + 1e-12) {
            return Err(Error::DomainViolation(format!(
                "‖w‖₂ = {norm} exceeds the certified radius R_w = {r_w}"
            )));
        }
        Ok(())
    }

    /// Draw a feature/label pair representative of the certified data domain,
    /// used by the Monte Carlo certification and by stability probes.
    fn sample_probe_pair(&self, d: usize, rng: &mut ChaCha12Rng) -> (Sample, Sample);
}

/// Pairwise margin m = sign(y−ỹ)·⟨w, (x−x̃)/2⟩.
fn margin(w: &Array1<f64>, z: &Sample, zt: &Sample) -> (f64, f64, Array1<f64>) {
    let delta = (&z.features - &zt.features) * 0.5;
    let s = if z.label > zt.label {
        1.0
    } else if z.label < zt.label {
        -1.0
    } else {
        0.0
    };
    (s * w.dot(&delta), s, delta)
}

fn norm2(x: &Array1<f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Numerically stable ln(1 + e^u).
fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

/// Logistic sigmoid.
fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn sample_in_ball(rng: &mut ChaCha12Rng, d: usize, radius: f64) -> Array1<f64> {
    let g: Array1<f64> = Array1::from_iter((0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let norm = norm2(&g);
    if norm == 0.0 {
        return g;
    }
    let u: f64 = rng.gen::<f64>();
    g * (radius * u.powf(1.0 / d as f64) / norm)
}

fn probe_pair_margin(d: usize, r_x: f64, rng: &mut ChaCha12Rng) -> (Sample, Sample) {
    let x = sample_in_ball(rng, d, r_x);
    let xt = sample_in_ball(rng, d, r_x);
    // cover the tied-label case too (zero margin branch)
    let (y, yt) = match rng.gen_range(0..5u8) {
        0 => (1.0, 1.0),
        1 => (-1.0, 1.0),
        _ => (1.0, -1.0),
    };
    (Sample::new(x, y), Sample::new(xt, yt))
}

/// Smooth convex margin loss: ℓ = ln(1 + e^{−m}).
///
/// L = R_x (slope of softplus ≤ 1, ‖Δ‖ ≤ R_x), α = R_x²/4 (curvature ≤ 1/4),
/// M = ln(1 + e^{R_w R_x}).
#[derive(Debug, Clone)]
pub struct PairwiseLogistic {
    r_x: f64,
    constants: LossConstants,
}

impl PairwiseLogistic {
    pub fn new(r_x: f64, r_w: f64) -> Result<Self> {
        if r_x <= 0.0 || r_w <= 0.0 {
            return Err(Error::InvalidParameter("R_x and R_w must be positive".into()));
        }
        Ok(PairwiseLogistic {
            r_x,
            constants: LossConstants {
                lipschitz: r_x,
                smoothness: Some(r_x * r_x / 4.0),
                bound: softplus(r_w * r_x),
                convex: true,
                smooth: true,
                domain_radius: r_w,
            },
        })
    }
}

impl PairwiseLossModel for PairwiseLogistic {
    fn value(&self, w: &Array1<f64>, z: &Sample, zt: &Sample) -> f64 {
        let (m, _, _) = margin(w, z, zt);
        softplus(-m)
    }

    fn grad_w(&self, w: &Array1<f64>, z: &Sample, zt: &Sample) -> Array1<f64> {
        let (m, s, delta) = margin(w, z, zt);
        delta * (-s * sigmoid(-m))
    }

    fn constants(&self) -> &LossConstants {
        &self.constants
    }

    fn sample_probe_pair(&self, d: usize, rng: &mut ChaCha12Rng) -> (Sample, Sample) {
        probe_pair_margin(d, self.r_x, rng)
    }
}

/// Non-smooth convex margin loss: ℓ = max(0, 1 − m).
///
/// Subgradient convention: 0 at the kink m = 1 (and on the flat region), so
/// runs are deterministic. L = R_x, M = 1 + R_w R_x.
#[derive(Debug, Clone)]
pub struct PairwiseHinge {
    r_x: f64,
    constants: LossConstants,
}

impl PairwiseHinge {
    pub fn new(r_x: f64, r_w: f64) -> Result<Self> {
        if r_x <= 0.0 || r_w <= 0.0 {
            return Err(Error::InvalidParameter("R_x and R_w must be positive".into()));
        }
        Ok(PairwiseHinge {
            r_x,
            constants: LossConstants {
                lipschitz: r_x,
                smoothness: None,
                bound: 1.0 + r_w * r_x,
                convex: true,
                smooth: false,
                domain_radius: r_w,
            },
        })
    }
}

impl PairwiseLossModel for PairwiseHinge {
    fn value(&self, w: &Array1<f64>, z: &Sample, zt: &Sample) -> f64 {
        let (m, _, _) = margin(w, z, zt);
        (1.0 - m).max(0.0)
    }

    fn grad_w(&self, w: &Array1<f64>, z: &Sample, zt: &Sample) -> Array1<f64> {
        let (m, s, delta) = margin(w, z, zt);
        if m < 1.0 {
            delta * (-s)
        } else {
            Array1::zeros(w.len())
        }
    }

    fn constants(&self) -> &LossConstants {
        &self.constants
    }

    fn sample_probe_pair(&self, d: usize, rng: &mut ChaCha12Rng) -> (Sample, Sample) {
        probe_pair_margin(d, self.r_x, rng)
    }
}

/// Smooth convex squared loss on regression pairs:
/// base u = ½(⟨w, Δx⟩ − Δy)² with Δx = (x−x̃)/2, Δy = (y−ỹ)/2.
///
/// The base is clamped above the analytic on-domain supremum c by the C¹ map
/// u ↦ c + c(1 − e^{−(u−c)/c}), so on the certified domain the loss equals
/// the convex smooth base exactly while staying bounded by M = 2c globally.
#[derive(Debug, Clone)]
pub struct PairwiseSquared {
    r_x: f64,
    r_y: f64,
    clamp_at: f64,
    constants: LossConstants,
}

impl PairwiseSquared {
    pub fn new(r_x: f64, r_y: f64, r_w: f64) -> Result<Self> {
        if r_x <= 0.0 || r_y <= 0.0 || r_w <= 0.0 {
            return Err(Error::InvalidParameter("R_x, R_y and R_w must be positive".into()));
        }
        let reach = r_w * r_x + r_y;
        let clamp_at = 0.5 * reach * reach;
        Ok(PairwiseSquared {
            r_x,
            r_y,
            clamp_at,
            constants: LossConstants {
                lipschitz: reach * r_x,
                smoothness: Some(r_x * r_x),
                bound: 2.0 * clamp_at,
                convex: true,
                smooth: true,
                domain_radius: r_w,
            },
        })
    }

    fn residual(w: &Array1<f64>, z: &Sample, zt: &Sample) -> (f64, Array1<f64>) {
        let dx = (&z.features - &zt.features) * 0.5;
        let dy = 0.5 * (z.label - zt.label);
        (w.dot(&dx) - dy, dx)
    }
}

impl PairwiseLossModel for PairwiseSquared {
    fn value(&self, w: &Array1<f64>, z: &Sample, zt: &Sample) -> f64 {
        let (r, _) = Self::residual(w, z, zt);
        let u = 0.5 * r * r;
        let c = self.clamp_at;
        if u <= c {
            u
        } else {
            c + c * (1.0 - (-(u - c) / c).exp())
        }
    }

    fn grad_w(&self, w: &Array1<f64>, z: &Sample, zt: &Sample) -> Array1<f64> {
        let (r, dx) = Self::residual(w, z, zt);
        let u = 0.5 * r * r;
        let c = self.clamp_at;
        let outer = if u <= c { 1.0 } else { (-(u - c) / c).exp() };
        dx * (outer * r)
    }

    fn constants(&self) -> &LossConstants {
        &self.constants
    }

    fn sample_probe_pair(&self, d: usize, rng: &mut ChaCha12Rng) -> (Sample, Sample) {
        let x = sample_in_ball(rng, d, self.r_x);
        let xt = sample_in_ball(rng, d, self.r_x);
        // labels with |Δy|/2 ≤ R_y
        let y = rng.gen_range(-self.r_y..=self.r_y);
        let yt = rng.gen_range(-self.r_y..=self.r_y);
        (Sample::new(x, y), Sample::new(xt, yt))
    }
}

/// Regularity constants of a minimax loss.
///
/// `lipschitz` is the supremum of the joint gradient norm
/// √(‖∇_w ℓ‖² + ‖∇_v ℓ‖²); it dominates both per-block gradient norms, and
/// makes |Δℓ| ≤ L·‖joint parameter difference‖ a sound certificate. `bound`
/// is a range bound on |ℓ| (the bilinear form is signed; no clipping is
/// applied because it would destroy convex-concavity).
#[derive(Debug, Clone, PartialEq)]
pub struct MinimaxConstants {
    pub lipschitz: f64,
    pub smoothness: Option<f64>,
    pub bound: f64,
    pub convex_concave: bool,
    pub smooth: bool,
    pub domain_radius_w: f64,
    pub domain_radius_v: f64,
}

/// A convex-concave loss ℓ(w, v; z, z̃) with gradients in both blocks.
pub trait MinimaxLossModel {
    fn value(&self, w: &Array1<f64>, v: &Array1<f64>, z: &Sample, zt: &Sample) -> f64;
    fn grad_w(&self, w: &Array1<f64>, v: &Array1<f64>, z: &Sample, zt: &Sample) -> Array1<f64>;
    fn grad_v(&self, w: &Array1<f64>, v: &Array1<f64>, z: &Sample, zt: &Sample) -> Array1<f64>;
    fn constants(&self) -> &MinimaxConstants;

    fn check_domain(&self, w: &Array1<f64>, v: &Array1<f64>) -> Result<()> {
        let c = self.constants();
        let (nw, nv) = (norm2(w), norm2(v));
        if nw > c.domain_radius_w * (1.0 + 1e-12) {
            return Err(Error::DomainViolation(format!(
                "‖w‖₂ = {nw} exceeds R_w = {}",
                c.domain_radius_w
            )));
        }
        if nv > c.domain_radius_v * (1.0 + 1e-12) {
            return Err(Error::DomainViolation(format!(
                "‖v‖₂ = {nv} exceeds R_v = {}",
                c.domain_radius_v
            )));
        }
        Ok(())
    }

    fn sample_probe_pair(&self, d: usize, rng: &mut ChaCha12Rng) -> (Sample, Sample);
}

/// Regularized bilinear saddle loss
/// ℓ = ⟨w, φ⟩·⟨v, φ⟩ + (μ/2)(‖w‖² − ‖v‖²), φ = (x−x̃)/2.
///
/// Convex in w for fixed v, concave in v for fixed w; α-smooth with
/// α = √(μ² + R_x⁴). With μ = 0 and unit features this is the pure bilinear
/// w·v testbed whose simultaneous-update norm identity is exact.
#[derive(Debug, Clone)]
pub struct BilinearSaddle {
    r_x: f64,
    mu: f64,
    constants: MinimaxConstants,
}

impl BilinearSaddle {
    pub fn new(r_x: f64, r_w: f64, r_v: f64, mu: f64) -> Result<Self> {
        if r_x <= 0.0 || r_w <= 0.0 || r_v <= 0.0 {
            return Err(Error::InvalidParameter("R_x, R_w, R_v must be positive".into()));
        }
        if mu < 0.0 {
            return Err(Error::InvalidParameter("mu must be >= 0".into()));
        }
        let rx2 = r_x * r_x;
        let sup_gw = r_v * rx2 + mu * r_w;
        let sup_gv = r_w * rx2 + mu * r_v;
        Ok(BilinearSaddle {
            r_x,
            mu,
            constants: MinimaxConstants {
                lipschitz: (sup_gw * sup_gw + sup_gv * sup_gv).sqrt(),
                smoothness: Some((mu * mu + rx2 * rx2).sqrt()),
                bound: r_w * r_v * rx2 + 0.5 * mu * r_w.max(r_v).powi(2),
                convex_concave: true,
                smooth: true,
                domain_radius_w: r_w,
                domain_radius_v: r_v,
            },
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    fn phi(z: &Sample, zt: &Sample) -> Array1<f64> {
        (&z.features - &zt.features) * 0.5
    }
}

impl MinimaxLossModel for BilinearSaddle {
    fn value(&self, w: &Array1<f64>, v: &Array1<f64>, z: &Sample, zt: &Sample) -> f64 {
        let phi = Self::phi(z, zt);
        w.dot(&phi) * v.dot(&phi) + 0.5 * self.mu * (w.dot(w) - v.dot(v))
    }

    fn grad_w(&self, w: &Array1<f64>, v: &Array1<f64>, z: &Sample, zt: &Sample) -> Array1<f64> {
        let phi = Self::phi(z, zt);
        let vp = v.dot(&phi);
        &phi * vp + &(w * self.mu)
    }

    fn grad_v(&self, w: &Array1<f64>, v: &Array1<f64>, z: &Sample, zt: &Sample) -> Array1<f64> {
        let phi = Self::phi(z, zt);
        let wp = w.dot(&phi);
        &phi * wp - &(v * self.mu)
    }

    fn constants(&self) -> &MinimaxConstants {
        &self.constants
    }

    fn sample_probe_pair(&self, d: usize, rng: &mut ChaCha12Rng) -> (Sample, Sample) {
        let x = sample_in_ball(rng, d, self.r_x);
        let xt = sample_in_ball(rng, d, self.r_x);
        (Sample::new(x, 0.0), Sample::new(xt, 0.0))
    }
}

/// Monte Carlo estimates of the regularity constants.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub l_hat: f64,
    pub alpha_hat: Option<f64>,
    pub m_hat: f64,
}

const CERT_TOL: f64 = 1e-9;

/// Measure L, α, M on `n_probes` random domain points and check that the
/// declared constants dominate every measurement (tolerance 1e−9).
pub fn certify_constants<L: PairwiseLossModel>(
    loss: &L,
    d: usize,
    n_probes: usize,
    seed: u64,
) -> Result<Certificate> {
    if n_probes < 100 {
        return Err(Error::InvalidParameter("n_probes must be >= 100".into()));
    }
    let c = loss.constants();
    let mut rng = stream_rng(seed, "certify", 0);
    let (mut l_hat, mut a_hat, mut m_hat) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..n_probes {
        let (z, zt) = loss.sample_probe_pair(d, &mut rng);
        let w1 = sample_in_ball(&mut rng, d, c.domain_radius);
        let w2 = sample_in_ball(&mut rng, d, c.domain_radius);
        let (f1, f2) = (loss.value(&w1, &z, &zt), loss.value(&w2, &z, &zt));
        let (g1, g2) = (loss.grad_w(&w1, &z, &zt), loss.grad_w(&w2, &z, &zt));
        m_hat = m_hat.max(f1.abs()).max(f2.abs());
        l_hat = l_hat.max(norm2(&g1)).max(norm2(&g2));
        let dw = norm2(&(&w1 - &w2));
        if dw > 1e-9 {
            l_hat = l_hat.max((f1 - f2).abs() / dw);
            a_hat = a_hat.max(norm2(&(&g1 - &g2)) / dw);
        }
        if f1 < -CERT_TOL || f2 < -CERT_TOL {
            return Err(Error::CertificationFailure(format!(
                "pairwise loss produced a negative value {}",
                f1.min(f2)
            )));
        }
    }
    if m_hat > c.bound + CERT_TOL {
        return Err(Error::CertificationFailure(format!(
            "measured M̂ = {m_hat} exceeds declared M = {}",
            c.bound
        )));
    }
    if l_hat > c.lipschitz + CERT_TOL {
        return Err(Error::CertificationFailure(format!(
            "measured L̂ = {l_hat} exceeds declared L = {}",
            c.lipschitz
        )));
    }
    let alpha_hat = match c.smoothness {
        Some(alpha) => {
            if a_hat > alpha + CERT_TOL {
                return Err(Error::CertificationFailure(format!(
                    "measured α̂ = {a_hat} exceeds declared α = {alpha}"
                )));
            }
            Some(a_hat)
        }
        None => None,
    };
    Ok(Certificate { l_hat, alpha_hat, m_hat })
}

/// Minimax analogue of [`certify_constants`], measuring the joint gradient.
pub fn certify_minimax_constants<L: MinimaxLossModel>(
    loss: &L,
    d: usize,
    n_probes: usize,
    seed: u64,
) -> Result<Certificate> {
    if n_probes < 100 {
        return Err(Error::InvalidParameter("n_probes must be >= 100".into()));
    }
    let c = loss.constants();
    let mut rng = stream_rng(seed, "certify-minimax", 0);
    let (mut l_hat, mut a_hat, mut m_hat) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..n_probes {
        let (z, zt) = loss.sample_probe_pair(d, &mut rng);
        let w1 = sample_in_ball(&mut rng, d, c.domain_radius_w);
        let v1 = sample_in_ball(&mut rng, d, c.domain_radius_v);
        let w2 = sample_in_ball(&mut rng, d, c.domain_radius_w);
        let v2 = sample_in_ball(&mut rng, d, c.domain_radius_v);
        let f1 = loss.value(&w1, &v1, &z, &zt);
        let gw1 = loss.grad_w(&w1, &v1, &z, &zt);
        let gv1 = loss.grad_v(&w1, &v1, &z, &zt);
        let gw2 = loss.grad_w(&w2, &v2, &z, &zt);
        let gv2 = loss.grad_v(&w2, &v2, &z, &zt);
        m_hat = m_hat.max(f1.abs());
        let joint1 = (norm2(&gw1).powi(2) + norm2(&gv1).powi(2)).sqrt();
        let joint2 = (norm2(&gw2).powi(2) + norm2(&gv2).powi(2)).sqrt();
        l_hat = l_hat.max(joint1).max(joint2);
        let dsq = norm2(&(&w1 - &w2)).powi(2) + norm2(&(&v1 - &v2)).powi(2);
        if dsq > 1e-18 {
            let gsq = norm2(&(&gw1 - &gw2)).powi(2) + norm2(&(&gv1 - &gv2)).powi(2);
            a_hat = a_hat.max((gsq / dsq).sqrt());
        }
    }
    if m_hat > c.bound + CERT_TOL {
        return Err(Error::CertificationFailure(format!(
            "measured M̂ = {m_hat} exceeds declared M = {}",
            c.bound
        )));
    }
    if l_hat > c.lipschitz + CERT_TOL {
        return Err(Error::CertificationFailure(format!(
            "measured L̂ = {l_hat} exceeds declared L = {}",
            c.lipschitz
        )));
    }
    let alpha_hat = match c.smoothness {
        Some(alpha) => {
            if a_hat > alpha + CERT_TOL {
                return Err(Error::CertificationFailure(format!(
                    "measured α̂ = {a_hat} exceeds declared α = {alpha}"
                )));
            }
            Some(a_hat)
        }
        None => None,
    };
    Ok(Certificate { l_hat, alpha_hat, m_hat })
}

/// Uniform draw from the ball of given radius (exposed for probes and tests).
pub fn uniform_in_ball(rng: &mut ChaCha12Rng, d: usize, radius: f64) -> Array1<f64> {
    sample_in_ball(rng, d, radius)
}

/// Runtime-selected pairwise loss, for configuration-driven callers.
#[derive(Debug, Clone)]
pub enum AnyPairwiseLoss {
    Logistic(PairwiseLogistic),
    Hinge(PairwiseHinge),
    Squared(PairwiseSquared),
}

impl PairwiseLossModel for AnyPairwiseLoss {
    fn value(&self, w: &Array1<f64>, z: &Sample, zt: &Sample) -> f64 {
        match self {
            AnyPairwiseLoss::Logistic(l) => l.value(w, z, zt),
            AnyPairwiseLoss::Hinge(l) => l.value(w, z, zt),
            AnyPairwiseLoss::Squared(l) => l.value(w, z, zt),
        }
    }

    fn grad_w(&self, w: &Array1<f64>, z: &Sample, zt: &Sample) -> Array1<f64> {
        match self {
            AnyPairwiseLoss::Logistic(l) => l.grad_w(w, z, zt),
            AnyPairwiseLoss::Hinge(l) => l.grad_w(w, z, zt),
            AnyPairwiseLoss::Squared(l) => l.grad_w(w, z, zt),
        }
    }

    fn constants(&self) -> &LossConstants {
        match self {
            AnyPairwiseLoss::Logistic(l) => l.constants(),
            AnyPairwiseLoss::Hinge(l) => l.constants(),
            AnyPairwiseLoss::Squared(l) => l.constants(),
        }
    }

    fn sample_probe_pair(&self, d: usize, rng: &mut ChaCha12Rng) -> (Sample, Sample) {
        match self {
            AnyPairwiseLoss::Logistic(l) => l.sample_probe_pair(d, rng),
            AnyPairwiseLoss::Hinge(l) => l.sample_probe_pair(d, rng),
            AnyPairwiseLoss::Squared(l) => l.sample_probe_pair(d, rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_pair(d: usize) -> (Sample, Sample) {
        // half-difference Δ = e₁, labels ordered so sign = +1
        let mut x = Array1::zeros(d);
        x[0] = 1.0;
        (Sample::new(x.clone(), 1.0), Sample::new(-x, -1.0))
    }

    #[test]
    fn logistic_at_origin_is_label_free_constant() {
        let loss = PairwiseLogistic::new(2.0, 1.0).unwrap();
        let w = Array1::zeros(3);
        let mut rng = stream_rng(1, "t", 0);
        for _ in 0..20 {
            let (z, zt) = loss.sample_probe_pair(3, &mut rng);
            assert_abs_diff_eq!(loss.value(&w, &z, &zt), 2f64.ln(), epsilon = 1e-15);
        }
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let loss = PairwiseLogistic::new(3.0, 2.0).unwrap();
        let mut rng = stream_rng(5, "t", 0);
        for _ in 0..3 {
            let (z, zt) = loss.sample_probe_pair(4, &mut rng);
            let w = sample_in_ball(&mut rng, 4, 2.0);
            let g = loss.grad_w(&w, &z, &zt);
            let fd = fd_grad(|w| loss.value(w, &z, &zt), &w, 1e-5);
            let err = norm2(&(&g - &fd)) / (1.0 + norm2(&g));
            assert!(err <= 1e-6, "fd mismatch: {err}");
        }
    }

    pub(super) fn fd_grad<F: Fn(&Array1<f64>) -> f64>(f: F, w: &Array1<f64>, h: f64) -> Array1<f64> {
        let mut g = Array1::zeros(w.len());
        for k in 0..w.len() {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[k] += h;
            wm[k] -= h;
            g[k] = (f(&wp) - f(&wm)) / (2.0 * h);
        }
        g
    }

    #[test]
    fn hinge_flat_region_and_kink_convention() {
        let loss = PairwiseHinge::new(2.0, 3.0).unwrap();
        let (z, zt) = unit_pair(2);
        // margin = w[0]; w[0] = 2 → flat region
        let w = Array1::from(vec![2.0, 0.0]);
        assert_eq!(loss.value(&w, &z, &zt), 0.0);
        assert_eq!(loss.grad_w(&w, &z, &zt), Array1::zeros(2));
        // exactly at the kink m = 1 the subgradient is 0 by convention
        let w = Array1::from(vec![1.0, 0.0]);
        assert_eq!(loss.value(&w, &z, &zt), 0.0);
        assert_eq!(loss.grad_w(&w, &z, &zt), Array1::zeros(2));
        // active region
        let w = Array1::from(vec![0.25, 0.0]);
        assert_eq!(loss.value(&w, &z, &zt), 0.75);
        assert_eq!(loss.grad_w(&w, &z, &zt), Array1::from(vec![-1.0, 0.0]));
    }

    #[test]
    fn hinge_subgradient_matches_fd_away_from_kink() {
        let loss = PairwiseHinge::new(2.0, 3.0).unwrap();
        let mut rng = stream_rng(9, "t", 0);
        let mut checked = 0;
        while checked < 3 {
            let (z, zt) = loss.sample_probe_pair(3, &mut rng);
            let w = sample_in_ball(&mut rng, 3, 3.0);
            let (m, _, _) = margin(&w, &z, &zt);
            if (m - 1.0).abs() < 1e-3 {
                continue;
            }
            let g = loss.grad_w(&w, &z, &zt);
            let fd = fd_grad(|w| loss.value(w, &z, &zt), &w, 1e-5);
            let err = norm2(&(&g - &fd)) / (1.0 + norm2(&g));
            assert!(err <= 1e-6, "fd mismatch: {err}");
            checked += 1;
        }
    }

    #[test]
    fn squared_loss_hand_example() {
        // half-differences Δx = 1, Δy = 1: grad = (w·Δx − Δy)·Δx = −1 at w = 0
        let loss = PairwiseSquared::new(1.5, 1.5, 2.0).unwrap();
        let z = Sample::new(Array1::from(vec![1.0]), 1.0);
        let zt = Sample::new(Array1::from(vec![-1.0]), -1.0);
        let w = Array1::zeros(1);
        assert_abs_diff_eq!(loss.value(&w, &z, &zt), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(loss.grad_w(&w, &z, &zt)[0], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn bilinear_saddle_origin_and_gradients() {
        let loss = BilinearSaddle::new(1.0, 1.0, 1.0, 0.0).unwrap();
        let (z, zt) = unit_pair(2);
        let w = Array1::zeros(2);
        let v = Array1::zeros(2);
        assert_eq!(loss.value(&w, &v, &z, &zt), 0.0);
        assert_eq!(loss.grad_w(&w, &v, &z, &zt), Array1::zeros(2));
        assert_eq!(loss.grad_v(&w, &v, &z, &zt), Array1::zeros(2));
    }

    #[test]
    fn bilinear_saddle_midpoint_convexity_and_concavity() {
        let loss = BilinearSaddle::new(1.0, 2.0, 2.0, 0.3).unwrap();
        let mut rng = stream_rng(3, "t", 0);
        for _ in 0..1000 {
            let (z, zt) = loss.sample_probe_pair(3, &mut rng);
            let v = sample_in_ball(&mut rng, 3, 2.0);
            let w1 = sample_in_ball(&mut rng, 3, 2.0);
            let w2 = sample_in_ball(&mut rng, 3, 2.0);
            let mid = (&w1 + &w2) * 0.5;
            let lhs = loss.value(&mid, &v, &z, &zt);
            let rhs = 0.5 * (loss.value(&w1, &v, &z, &zt) + loss.value(&w2, &v, &z, &zt));
            assert!(lhs <= rhs + 1e-12, "convexity in w violated: {lhs} > {rhs}");
            // concavity in v: flip the inequality
            let w = sample_in_ball(&mut rng, 3, 2.0);
            let v1 = sample_in_ball(&mut rng, 3, 2.0);
            let v2 = sample_in_ball(&mut rng, 3, 2.0);
            let vmid = (&v1 + &v2) * 0.5;
            let lhs = loss.value(&w, &vmid, &z, &zt);
            let rhs = 0.5 * (loss.value(&w, &v1, &z, &zt) + loss.value(&w, &v2, &z, &zt));
            assert!(lhs >= rhs - 1e-12, "concavity in v violated");
        }
    }

    #[test]
    fn certify_accepts_declared_constants() {
        let d = 3;
        certify_constants(&PairwiseLogistic::new(2.0, 1.5).unwrap(), d, 2000, 17).unwrap();
        certify_constants(&PairwiseHinge::new(2.0, 1.5).unwrap(), d, 2000, 18).unwrap();
        certify_constants(&PairwiseSquared::new(1.5, 1.0, 1.5).unwrap(), d, 2000, 19).unwrap();
        certify_minimax_constants(&BilinearSaddle::new(1.0, 1.5, 1.5, 0.2).unwrap(), d, 2000, 20).unwrap();
    }

    #[test]
    fn certify_flags_understated_constants() {
        // deliberately understate L by wrapping the logistic with a shrunk constant
        #[derive(Debug)]
        struct Lying(PairwiseLogistic, LossConstants);
        impl PairwiseLossModel for Lying {
            fn value(&self, w: &Array1<f64>, z: &Sample, zt: &Sample) -> f64 {
                self.0.value(w, z, zt)
            }
            fn grad_w(&self, w: &Array1<f64>, z: &Sample, zt: &Sample) -> Array1<f64> {
                self.0.grad_w(w, z, zt)
            }
            fn constants(&self) -> &LossConstants {
                &self.1
            }
            fn sample_probe_pair(&self, d: usize, rng: &mut ChaCha12Rng) -> (Sample, Sample) {
                self.0.sample_probe_pair(d, rng)
            }
        }
        let inner = PairwiseLogistic::new(2.0, 1.5).unwrap();
        let mut consts = inner.constants().clone();
        consts.lipschitz *= 0.2;
        let lying = Lying(inner, consts);
        match certify_constants(&lying, 3, 500, 21) {
            Err(Error::CertificationFailure(_)) => {}
            other => panic!("expected certification failure, got {other:?}"),
        }
    }

    #[test]
    fn certify_requires_enough_probes() {
        let loss = PairwiseLogistic::new(2.0, 1.5).unwrap();
        assert!(certify_constants(&loss, 3, 99, 0).is_err());
    }

    #[test]
    fn domain_violation_is_reported_not_projected() {
        let loss = PairwiseLogistic::new(2.0, 1.0).unwrap();
        let w = Array1::from(vec![2.0, 0.0]);
        match loss.check_domain(&w) {
            Err(Error::DomainViolation(_)) => {}
            other => panic!("expected domain violation, got {other:?}"),
        }
    }
}
