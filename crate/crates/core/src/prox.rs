//! Proximal maps of the shipped F and G_* building blocks.
//!
//! `prox_{τf}(x) = argmin_w τ f(w) + ½‖w − x‖²`, in closed form for every
//! kind in [`ProxFunction`]. [`prox_oracle`] is an independent
//! golden-section minimizer used to check those closed forms.

use crate::blockvec::BlockVector;
use crate::error::{Error, Result};

/// Slack used when testing membership in the pointwise ball, so that
/// points produced by the projection itself are accepted.
const BALL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum ProxFunction {
    /// ½‖w − b‖².
    QuadraticData { b: Vec<f64> },
    /// α‖w‖₁.
    ScaledL1 { alpha: f64 },
    /// Indicator of {w : ‖w_p‖₂ ≤ α for every pixel p}. The block stores
    /// `components` planes of equal length; pixel p gathers entry p of
    /// each plane.
    PointwiseBall { alpha: f64, components: usize },
    /// Indicator of {0}.
    ZeroIndicator,
    /// f ≡ 0.
    Zero,
}

impl ProxFunction {
    pub fn quadratic_data(b: Vec<f64>) -> Self {
        ProxFunction::QuadraticData { b }
    }

    pub fn scaled_l1(alpha: f64) -> Result<Self> {
        check_weight(alpha)?;
        Ok(ProxFunction::ScaledL1 { alpha })
    }

    pub fn pointwise_ball(alpha: f64, components: usize) -> Result<Self> {
        check_weight(alpha)?;
        if components == 0 {
            return Err(Error::InvalidParameter(
                "pointwise ball needs at least one component".into(),
            ));
        }
        Ok(ProxFunction::PointwiseBall { alpha, components })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProxFunction::QuadraticData { .. } => "quadratic-data",
            ProxFunction::ScaledL1 { .. } => "scaled-l1",
            ProxFunction::PointwiseBall { .. } => "pointwise-ball",
            ProxFunction::ZeroIndicator => "indicator-zero",
            ProxFunction::Zero => "zero",
        }
    }

    /// Strong subdifferentiability modulus γ.
    pub fn gamma(&self) -> f64 {
        match self {
            ProxFunction::QuadraticData { .. } => 1.0,
            _ => 0.0,
        }
    }

    pub fn is_indicator(&self) -> bool {
        matches!(
            self,
            ProxFunction::PointwiseBall { .. } | ProxFunction::ZeroIndicator
        )
    }

    /// True when the prox objective is an isotropic quadratic on dom f, so
    /// that the prox of f plus a centred ball indicator is the radial
    /// projection of the plain prox.
    pub fn isotropic_prox(&self) -> bool {
        matches!(
            self,
            ProxFunction::QuadraticData { .. } | ProxFunction::Zero | ProxFunction::ZeroIndicator
        )
    }

    fn check_len(&self, n: usize) -> Result<()> {
        match self {
            ProxFunction::QuadraticData { b } if b.len() != n => Err(Error::LayoutMismatch {
                expected: vec![b.len()],
                found: vec![n],
            }),
            ProxFunction::PointwiseBall { components, .. } if !n.is_multiple_of(*components) => {
                Err(Error::LayoutMismatch {
                    expected: vec![*components],
                    found: vec![n],
                })
            }
            _ => Ok(()),
        }
    }

    /// f(w); indicators return +∞ off their sets.
    pub fn value(&self, w: &[f64]) -> Result<f64> {
        self.check_len(w.len())?;
        Ok(match self {
            ProxFunction::QuadraticData { b } => {
                0.5 * w.iter().zip(b).fold(0.0, |acc, (wi, bi)| acc + (wi - bi) * (wi - bi))
            }
            ProxFunction::ScaledL1 { alpha } => alpha * w.iter().fold(0.0, |acc, v| acc + v.abs()),
            ProxFunction::PointwiseBall { alpha, components } => {
                let limit = alpha * (1.0 + BALL_SLACK) + f64::MIN_POSITIVE;
                let inside = pixel_norms(w, *components).all(|r| r <= limit);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxFunction::ZeroIndicator => {
                if w.iter().all(|&v| v == 0.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxFunction::Zero => 0.0,
        })
    }

    /// Value of the i-th scalar summand for separable kinds; `None` for
    /// the pointwise ball with more than one component.
    pub fn entry_value(&self, i: usize, w: f64) -> Option<f64> {
        match self {
            ProxFunction::QuadraticData { b } => Some(0.5 * (w - b[i]) * (w - b[i])),
            ProxFunction::ScaledL1 { alpha } => Some(alpha * w.abs()),
            ProxFunction::PointwiseBall { alpha, components: 1 } => {
                Some(if w.abs() <= *alpha { 0.0 } else { f64::INFINITY })
            }
            ProxFunction::PointwiseBall { .. } => None,
            ProxFunction::ZeroIndicator => Some(if w == 0.0 { 0.0 } else { f64::INFINITY }),
            ProxFunction::Zero => Some(0.0),
        }
    }

    /// Closed-form prox on one block.
    pub fn prox(&self, tau: f64, x: &[f64]) -> Result<Vec<f64>> {
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "prox step must be positive, got {tau}"
            )));
        }
        self.check_len(x.len())?;
        Ok(match self {
            ProxFunction::QuadraticData { b } => x
                .iter()
                .zip(b)
                .map(|(xi, bi)| (xi + tau * bi) / (1.0 + tau))
                .collect(),
            ProxFunction::ScaledL1 { alpha } => {
                let t = tau * alpha;
                x.iter().map(|&v| soft_threshold(v, t)).collect()
            }
            ProxFunction::PointwiseBall { alpha, components } => {
                let mut out = x.to_vec();
                let pixels = x.len() / components;
                for p in 0..pixels {
                    let r = (0..*components)
                        .map(|c| x[p + c * pixels])
                        .fold(0.0, |acc, v| acc + v * v)
                        .sqrt();
                    if r > *alpha {
                        let s = alpha / r;
                        for c in 0..*components {
                            out[p + c * pixels] = x[p + c * pixels] * s;
                        }
                    }
                }
                out
            }
            ProxFunction::ZeroIndicator => vec![0.0; x.len()],
            ProxFunction::Zero => x.to_vec(),
        })
    }
}

fn check_weight(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "weight must be finite and nonnegative, got {alpha}"
        )));
    }
    Ok(())
}

/// Soft-threshold; |v| = t maps to 0.
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

pub(crate) fn pixel_norms(w: &[f64], components: usize) -> impl Iterator<Item = f64> + '_ {
    let pixels = w.len() / components;
    (0..pixels).map(move |p| {
        (0..components)
            .map(|c| w[p + c * pixels])
            .fold(0.0, |acc, v| acc + v * v)
            .sqrt()
    })
}

/// Applies `prox_{τf}` to the whole of `x`, keeping its layout.
pub fn prox_apply(f: &ProxFunction, tau: f64, x: &BlockVector) -> Result<BlockVector> {
    let out = f.prox(tau, x.as_slice())?;
    BlockVector::from_flat(x.layout(), out)
}

const GRID_POINTS: usize = 2001;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Brute-force prox of a separable function: per entry, a coarse grid over
/// `[lo, hi]` followed by golden-section refinement of the best bracket to
/// width `tol`. `f_value(i, w)` is the i-th summand and may return +∞.
pub fn prox_oracle(
    f_value: &dyn Fn(usize, f64) -> f64,
    tau: f64,
    x: &BlockVector,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<BlockVector> {
    if !(hi > lo) {
        return Err(Error::InvalidParameter(format!(
            "oracle interval is empty: [{lo}, {hi}]"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "oracle tolerance must be positive, got {tol}"
        )));
    }
    let out = x
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let obj = |w: f64| {
                let fv = f_value(i, w);
                if fv == f64::INFINITY {
                    f64::INFINITY
                } else {
                    tau * fv + 0.5 * (w - xi) * (w - xi)
                }
            };
            minimize_scalar(&obj, xi, lo, hi, tol)
        })
        .collect();
    BlockVector::from_flat(x.layout(), out)
}

fn minimize_scalar(obj: &dyn Fn(f64) -> f64, hint: f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let h = (hi - lo) / (GRID_POINTS - 1) as f64;
    let mut best = lo;
    let mut best_val = obj(lo);
    let extra = [0.0, hint.clamp(lo, hi), hi];
    let grid = (1..GRID_POINTS).map(|k| lo + k as f64 * h);
    for w in grid.chain(extra.iter().copied().filter(|w| (lo..=hi).contains(w))) {
        let v = obj(w);
        if v < best_val {
            best = w;
            best_val = v;
        }
    }
    if best_val == f64::INFINITY {
        return best;
    }
    let (mut a, mut b) = ((best - h).max(lo), (best + h).min(hi));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (obj(c), obj(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = obj(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = obj(d);
        }
    }
    let refined = 0.5 * (a + b);
    if obj(refined) <= best_val {
        refined
    } else {
        best
    }
}
