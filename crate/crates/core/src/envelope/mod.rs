//! Monotone envelopes and parabolic subdifferential measures.
//!
//! The monotone envelope of `u` (largest function below `u` that is convex in
//! space and non-increasing in time) is computed slice by slice as the convex
//! envelope of the running temporal minimum: an affine function lies below
//! `u(·, s)` for every `s ≤ t` exactly when it lies below `min_{s ≤ t} u(·, s)`.

mod fiber;
mod hull;

pub use fiber::{
    conjugate_1d, conjugate_2d, fiber_sequences, lipschitz, subdiff_measure_fiber,
    subdiff_measure_fiber_brute, subdiff_measure_fiber_on, subdiff_measure_window, exact_fiber_integral_1d, Ambient,
    FiberAccumulator, Membership, SlopeGrid, Window,
};
pub use hull::{convex_envelope_2d, convex_minorant_1d, lower_hull, midpoint_violation};

use alloc::vec;
use alloc::vec::Vec;

use crate::lattice::Field;

/// How a [`SubdiffMeasure`] was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureMethod {
    Fiber,
    ContactMa,
}

impl MeasureMethod {
    pub fn name(&self) -> &'static str {
        match self {
            MeasureMethod::Fiber => "fiber",
            MeasureMethod::ContactMa => "contact-ma",
        }
    }
}

/// Normalized measure `|P(Q; Γ)| / |Q|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubdiffMeasure {
    pub value: f64,
    /// Slope grid used by the fiber method.
    pub slopes: Option<SlopeGrid>,
    pub method: MeasureMethod,
}

/// Envelope together with its contact set.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeResult {
    pub gamma: Field,
    /// Slice-major; true where `|u - Γ| ≤ tolerance`.
    pub contact: Vec<bool>,
    pub tolerance: f64,
}

/// `m(x, t_k) = min_{j ≤ k} u(x, t_j)`.
pub fn running_min(u: &Field) -> Field {
    let mut m = u.clone();
    let g = *u.grid();
    let n = g.slice_len();
    let vals = m.values_mut();
    for k in 1..g.slices() {
        let (prev, cur) = vals[(k - 1) * n..(k + 1) * n].split_at_mut(n);
        for (c, &p) in cur.iter_mut().zip(prev.iter()) {
            if p < *c {
                *c = p;
            }
        }
    }
    m
}

/// Largest discretely convex function below one slice.
///
/// `d = 1` uses the exact lower hull; `d = 2` enforces convexity along the axis
/// and diagonal lattice directions.
pub fn convex_envelope_slice(values: &[f64], nodes: [usize; 2], dim: usize) -> Vec<f64> {
    if dim == 1 {
        let mut out = vec![0.0; values.len()];
        convex_minorant_1d(values, &mut out);
        out
    } else {
        convex_envelope_2d(values, nodes[0], nodes[1])
    }
}

/// Contact tolerance `1e-8 (1 + sup|u|)`.
pub fn contact_tolerance(u: &Field) -> f64 {
    1e-8 * (1.0 + u.sup_abs())
}

/// Monotone envelope `Γ^u` and contact mask.
pub fn monotone_envelope(u: &Field) -> EnvelopeResult {
    let g = *u.grid();
    let m = running_min(u);
    let mut gamma = Field::zeros(g);
    for k in 0..g.slices() {
        let env = convex_envelope_slice(m.slice(k), g.nodes, g.dim);
        gamma.slice_mut(k).copy_from_slice(&env);
    }
    let tol = contact_tolerance(u);
    let contact = u
        .values()
        .iter()
        .zip(gamma.values())
        .map(|(a, b)| (a - b).abs() <= tol)
        .collect();
    EnvelopeResult {
        gamma,
        contact,
        tolerance: tol,
    }
}

/// Quadrature of `max(0, -∂_t Γ) · det D²Γ` over interior contact nodes,
/// normalized by `|Q|`.
///
/// Uses backward time differences and clamps per-axis second differences at 0.
pub fn subdiff_measure_contact(e: &EnvelopeResult) -> SubdiffMeasure {
    let g = e.gamma.grid();
    let n = g.slice_len();
    let n1 = g.nodes[1];
    let inv_dx2 = 1.0 / (g.dx * g.dx);
    let cell = if g.dim == 1 { g.dx } else { g.dx * g.dx } * g.dt;
    let mut total = 0.0;
    for k in 1..g.slices() {
        let (prev, cur) = (e.gamma.slice(k - 1), e.gamma.slice(k));
        for v in 0..n {
            if g.is_lateral(v) || !e.contact[k * n + v] {
                continue;
            }
            let rate = ((prev[v] - cur[v]) / g.dt).max(0.0);
            if rate == 0.0 {
                continue;
            }
            let det = if g.dim == 1 {
                ((cur[v + 1] - 2.0 * cur[v] + cur[v - 1]) * inv_dx2).max(0.0)
            } else {
                let a = ((cur[v + n1] - 2.0 * cur[v] + cur[v - n1]) * inv_dx2).max(0.0);
                let b = ((cur[v + 1] - 2.0 * cur[v] + cur[v - 1]) * inv_dx2).max(0.0);
                let c = (cur[v + n1 + 1] - cur[v + n1 - 1] - cur[v - n1 + 1] + cur[v - n1 - 1])
                    * 0.25
                    * inv_dx2;
                (a * b - c * c).max(0.0)
            };
            total += rate * det * cell;
        }
    }
    SubdiffMeasure {
        value: total / g.volume(),
        slopes: None,
        method: MeasureMethod::ContactMa,
    }
}
