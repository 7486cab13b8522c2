//! Closed-form risk and forgetting bounds, their premises, and per-trial checks.

use serde::{Deserialize, Serialize};

/// `(72√(d/n) + 18n/p)‖θ‖²`, the bound on the single-task risk `R(β̂_A)`.
pub fn bound_single(d: usize, n: usize, p: usize, theta_sq: f64) -> f64 {
    let (d, n, p) = (d as f64, n as f64, p as f64);
    (72.0 * (d / n).sqrt() + 18.0 * n / p) * theta_sq
}

/// `(72√(d/n) + 96√(n/p))‖θ‖²`, the bound on `R(β̂_BA)`.
pub fn bound_terminal(d: usize, n: usize, p: usize, theta_sq: f64) -> f64 {
    let (d, n, p) = (d as f64, n as f64, p as f64);
    (72.0 * (d / n).sqrt() + 96.0 * (n / p).sqrt()) * theta_sq
}

/// `(66√(n/p) + 12/(pγ))‖θ‖²`, the bound on `R(β̂_BA) − R(β̂_A)`.
pub fn bound_forgetting(n: usize, p: usize, gamma: f64, theta_sq: f64) -> f64 {
    let (n, p) = (n as f64, p as f64);
    (66.0 * (n / p).sqrt() + 12.0 / (p * gamma)) * theta_sq
}

/// `78√(n/p) / (1 − 72√(d/n) − 18n/p)`, or `None` when the denominator is not positive.
pub fn bound_ratio(d: usize, n: usize, p: usize) -> Option<f64> {
    let denom = ratio_denominator(d, n, p);
    if denom > 0.0 {
        let (n, p) = (n as f64, p as f64);
        Some(78.0 * (n / p).sqrt() / denom)
    } else {
        None
    }
}

/// `1 − 72√(d/n) − 18n/p`.
pub fn ratio_denominator(d: usize, n: usize, p: usize) -> f64 {
    let (d, n, p) = (d as f64, n as f64, p as f64);
    1.0 - 72.0 * (d / n).sqrt() - 18.0 * n / p
}

/// `18√(d/n)`, the bound on `‖P_{A^⊤⊥}e₁‖²`.
pub fn bound_projection(d: usize, n: usize) -> f64 {
    18.0 * (d as f64 / n as f64).sqrt()
}

/// `[√n − 2√d, √n + 2√d]`, the window for the singular values of an `n × d`
/// standard Gaussian matrix.
pub fn singular_value_window(d: usize, n: usize) -> (f64, f64) {
    let (d, n) = (d as f64, n as f64);
    (n.sqrt() - 2.0 * d.sqrt(), n.sqrt() + 2.0 * d.sqrt())
}

/// Hypotheses of each result, evaluated separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Premises {
    pub n_ge_d: bool,
    pub p_ge_20n: bool,
    /// `γ ≥ 1/√(nd)`.
    pub gamma_ge_inv_sqrt_nd: bool,
    /// `p ≥ max(17n, 1/γ)`, the terminal-forgetting hypothesis.
    pub p_ge_17n_and_inv_gamma: bool,
    /// `2n ≤ p`, the projection-lemma hypothesis.
    pub p_ge_2n: bool,
}

pub const MAIN_PREMISE_TEXT: &str = "n ≥ d, p ≥ 20n, γ ≥ 1/√(nd)";
pub const FORGETTING_PREMISE_TEXT: &str = "n ≥ d, p ≥ max(17n, 1/γ)";
pub const PROJECTION_PREMISE_TEXT: &str = "d ≤ n, 2n ≤ p, γ ≥ 1/√(nd)";

impl Premises {
    pub fn evaluate(d: usize, n: usize, p: usize, gamma: f64) -> Self {
        let (df, nf, pf) = (d as f64, n as f64, p as f64);
        Self {
            n_ge_d: n >= d,
            p_ge_20n: p >= 20 * n,
            gamma_ge_inv_sqrt_nd: gamma >= 1.0 / (nf * df).sqrt(),
            p_ge_17n_and_inv_gamma: pf >= (17.0 * nf).max(1.0 / gamma),
            p_ge_2n: p >= 2 * n,
        }
    }

    /// Intersection used for combined checks: all of the main bound's hypotheses.
    pub fn main(&self) -> bool {
        self.n_ge_d && self.p_ge_20n && self.gamma_ge_inv_sqrt_nd
    }

    pub fn forgetting(&self) -> bool {
        self.n_ge_d && self.p_ge_17n_and_inv_gamma
    }

    pub fn projection(&self) -> bool {
        self.n_ge_d && self.p_ge_2n && self.gamma_ge_inv_sqrt_nd
    }

    /// Human-readable list of the hypotheses that fail.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.main() {
            out.push(format!("risk bounds require {MAIN_PREMISE_TEXT}"));
        }
        if !self.forgetting() {
            out.push(format!("forgetting bound requires {FORGETTING_PREMISE_TEXT}"));
        }
        if !self.projection() {
            out.push(format!("projection bound requires {PROJECTION_PREMISE_TEXT}"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSheet {
    pub premises: Premises,
    pub premise_ok: bool,
    pub b_single: f64,
    pub b_terminal: f64,
    pub b_ratio: Option<f64>,
    pub b_forgetting: f64,
    pub b_proj: f64,
    pub theta_sq: f64,
}

impl BoundSheet {
    pub fn evaluate(d: usize, n: usize, p: usize, gamma: f64, theta_sq: f64) -> Self {
        let premises = Premises::evaluate(d, n, p, gamma);
        Self {
            premises,
            premise_ok: premises.main(),
            b_single: bound_single(d, n, p, theta_sq),
            b_terminal: bound_terminal(d, n, p, theta_sq),
            b_ratio: bound_ratio(d, n, p),
            b_forgetting: bound_forgetting(n, p, gamma, theta_sq),
            b_proj: bound_projection(d, n),
            theta_sq,
        }
    }
}

/// Quantities realized by one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Realized {
    pub r_a: f64,
    pub r_ba: f64,
    pub r_null: f64,
    pub forgetting: f64,
    pub ratio: Option<f64>,
    pub proj_energy: f64,
}

/// `Some(satisfied)` when the bound applies, `None` when it is not applicable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BoundFlags {
    pub single: Option<bool>,
    pub terminal: Option<bool>,
    pub forgetting: Option<bool>,
    pub ratio: Option<bool>,
    pub projection: Option<bool>,
}

impl BoundFlags {
    pub fn iter(&self) -> impl Iterator<Item = (&'static str, Option<bool>)> {
        [
            ("single", self.single),
            ("terminal", self.terminal),
            ("forgetting", self.forgetting),
            ("ratio", self.ratio),
            ("projection", self.projection),
        ]
        .into_iter()
    }
}

/// Compares a trial to the bound right-hand sides. Nothing is asserted unless
/// the main premises hold.
pub fn check_trial(sheet: &BoundSheet, realized: &Realized) -> BoundFlags {
    if !sheet.premise_ok {
        return BoundFlags::default();
    }
    BoundFlags {
        single: Some(realized.r_a <= sheet.b_single),
        terminal: Some(realized.r_ba <= sheet.b_terminal),
        forgetting: Some(realized.forgetting <= sheet.b_forgetting),
        ratio: match (sheet.b_ratio, realized.ratio) {
            (Some(bound), Some(ratio)) => Some(ratio <= bound),
            _ => None,
        },
        projection: Some(realized.proj_energy <= sheet.b_proj),
    }
}
