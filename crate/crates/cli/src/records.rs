//! Row types of every CSV artifact. Column order is part of the schema.

use crate::emit::CsvRecord;
use serde::{Deserialize, Serialize};

/// `jost.csv`: scattering data per frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JostRow {
    pub rho: f64,
    pub re_c_plus: f64,
    pub im_c_plus: f64,
    pub abs_f0: f64,
    /// `sup_r |m(r,ρ) − 1|·ρ⟨r⟩³`.
    pub m_bound_ratio: f64,
}

impl CsvRecord for JostRow {
    const HEADER: &'static [&'static str] = &["rho", "re_c_plus", "im_c_plus", "abs_f0", "m_bound_ratio"];
}

/// `kernel_check.csv`: one sampled kernel value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelRow {
    pub k: usize,
    pub t: f64,
    pub r: f64,
    pub rp: f64,
    #[serde(rename = "abs_K")]
    pub abs_k: f64,
    pub bound_ratio: f64,
}

impl CsvRecord for KernelRow {
    const HEADER: &'static [&'static str] = &["k", "t", "r", "rp", "abs_K", "bound_ratio"];
}

/// `randomize.csv`: norms of one randomized datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizeRow {
    pub seed: u64,
    pub hs_norm: f64,
    pub xs_norm: f64,
    pub xs_tilde_norm: f64,
    /// `⟨κf₀^ω + f₁^ω, Y⟩` minus its deterministic value.
    pub orthogonality_defect: f64,
}

impl CsvRecord for RandomizeRow {
    const HEADER: &'static [&'static str] = &["seed", "hs_norm", "xs_norm", "xs_tilde_norm", "orthogonality_defect"];
}

/// `evolve.csv`: the continuous-spectrum flow at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveRow {
    pub t: f64,
    pub l2: f64,
    pub linf: f64,
    pub ac_energy: f64,
}

impl CsvRecord for EvolveRow {
    const HEADER: &'static [&'static str] = &["t", "l2", "linf", "ac_energy"];
}

/// `tails.csv`: empirical tail of the `Z` norm at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub lambda: f64,
    pub empirical_tail: f64,
    pub fitted_tail: f64,
}

impl CsvRecord for TailRow {
    const HEADER: &'static [&'static str] = &["lambda", "empirical_tail", "fitted_tail"];
}

/// `modulate.csv`: modulation parameters at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulateRow {
    pub t: f64,
    pub a: f64,
    pub a_dot: f64,
    pub x_plus: f64,
    pub x_minus: f64,
    pub v_l2: f64,
}

impl CsvRecord for ModulateRow {
    const HEADER: &'static [&'static str] = &["t", "a", "a_dot", "x_plus", "x_minus", "v_l2"];
}

/// `acceptance.csv`: one line per measured quantity of the acceptance suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRow {
    pub criterion: u8,
    pub metric: String,
    pub value: f64,
    pub limit: String,
    pub pass: bool,
}

impl CsvRecord for AcceptanceRow {
    const HEADER: &'static [&'static str] = &["criterion", "metric", "value", "limit", "pass"];
}
