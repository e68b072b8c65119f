//! Random uniformly elliptic operators `F(M, x, t, ω)`.
//!
//! Space-time is cut into unit cells `[i - 1/2, i + 1/2)^d × (j, j + 1]`. Each
//! cell receives an independent draw of diagonal diffusion matrices and
//! zero-order offsets, computed by hashing `(seed, i, j)`. The operator in a
//! cell is linear, a minimum of linear operators (HJB), or a min-max of linear
//! operators (Isaacs); all of them lie between the Pucci extremal operators.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, ceil, floor, sqrt};
use crate::rng::{hash_coords, unit_f64, SplitMix64};

const FACE_EPS: f64 = 1e-9;

/// Largest number of diffusion matrices per cell group.
pub const MAX_CONTROLS: usize = 4;

/// Symmetric `d × d` matrix, `d ≤ 2`. Unused entries are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    a: [[f64; 2]; 2],
}

impl SymMatrix {
    pub fn zero(dim: usize) -> Self {
        SymMatrix {
            dim,
            a: [[0.0; 2]; 2],
        }
    }

    /// `m` times the identity.
    pub fn scalar(dim: usize, m: f64) -> Self {
        let mut s = SymMatrix::zero(dim);
        for i in 0..dim {
            s.a[i][i] = m;
        }
        s
    }

    pub fn diag(entries: &[f64]) -> Result<Self> {
        let dim = entries.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::Dimension(dim));
        }
        let mut s = SymMatrix::zero(dim);
        for (i, &e) in entries.iter().enumerate() {
            s.a[i][i] = e;
        }
        Ok(s)
    }

    /// From `d²` row-major entries; rejects non-symmetric input.
    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::Dimension(dim));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        let mut s = SymMatrix::zero(dim);
        for i in 0..dim {
            for j in 0..dim {
                s.a[i][j] = entries[i * dim + j];
            }
        }
        if dim == 2 && s.a[0][1] != s.a[1][0] {
            return Err(Error::NotSymmetric);
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    /// Diagonal entries, zero-padded.
    pub fn diagonal(&self) -> [f64; 2] {
        [self.a[0][0], self.a[1][1]]
    }

    pub fn row_major(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim * self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                v.push(self.a[i][j]);
            }
        }
        v
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut r = *self;
        for row in r.a.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        r
    }

    pub fn sub(&self, other: &SymMatrix) -> Self {
        let mut r = *self;
        for i in 0..2 {
            for j in 0..2 {
                r.a[i][j] -= other.a[i][j];
            }
        }
        r
    }

    pub fn trace(&self) -> f64 {
        self.a[0][0] + self.a[1][1]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        let mut s = 0.0;
        for row in &self.a {
            for v in row {
                s += v * v;
            }
        }
        sqrt(s)
    }

    /// Eigenvalues in closed form; the second is zero when `d = 1`.
    pub fn eigenvalues(&self) -> [f64; 2] {
        if self.dim == 1 {
            return [self.a[0][0], 0.0];
        }
        let half_tr = 0.5 * (self.a[0][0] + self.a[1][1]);
        let half_gap = 0.5 * (self.a[0][0] - self.a[1][1]);
        let r = sqrt(half_gap * half_gap + self.a[0][1] * self.a[0][1]);
        [half_tr + r, half_tr - r]
    }
}

/// Which Pucci extremal operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PucciSign {
    Plus,
    Minus,
}

/// `M⁺(M) = -λ Σ_{e>0} e - Λ Σ_{e<0} e` and `M⁻(M) = -λ Σ_{e<0} e - Λ Σ_{e>0} e`.
pub fn pucci(m: &SymMatrix, lambda: f64, big_lambda: f64, sign: PucciSign) -> f64 {
    let ev = m.eigenvalues();
    let (mut pos, mut neg) = (0.0, 0.0);
    for &e in &ev[..m.dim] {
        if e > 0.0 {
            pos += e;
        } else {
            neg += e;
        }
    }
    match sign {
        PucciSign::Plus => -lambda * pos - big_lambda * neg,
        PucciSign::Minus => -lambda * neg - big_lambda * pos,
    }
}

/// Operator family realized in every cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `-tr(A M) + c` with one drawn control.
    Linear,
    /// `min_k (-tr(A_k M) + c_k)`.
    HjbMin,
    /// `min_i max_j (-tr(½(A_i + B_j) M) + ½(c_i + c'_j))`.
    IsaacsMinMax,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::HjbMin => "hjb-min",
            Family::IsaacsMinMax => "isaacs-minmax",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        match s {
            "linear" => Some(Family::Linear),
            "hjb-min" => Some(Family::HjbMin),
            "isaacs-minmax" => Some(Family::IsaacsMinMax),
            _ => None,
        }
    }
}

/// Parameter law of a random environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSpec {
    pub dim: usize,
    pub lambda: f64,
    pub big_lambda: f64,
    pub family: Family,
    /// Diagonal diffusion matrices; entries past `dim` are ignored.
    pub controls: Vec<[f64; 2]>,
    /// Offsets are uniform on `[lo, hi]`.
    pub offset_range: (f64, f64),
    pub seed: u64,
    /// Blending half-width around cell faces; 0 gives piecewise-constant cells.
    pub smoothing: f64,
    /// Controls drawn (with replacement) per cell group for the min and min-max
    /// families; `None` uses the whole list in every cell.
    pub controls_per_cell: Option<usize>,
}

impl EnvironmentSpec {
    /// Constant coefficients `F(M) = -a tr(M) + c` in every cell.
    pub fn constant(dim: usize, a: f64, c: f64) -> Self {
        EnvironmentSpec {
            dim,
            lambda: a,
            big_lambda: a,
            family: Family::Linear,
            controls: alloc::vec![[a, a]],
            offset_range: (c, c),
            seed: 0,
            smoothing: 0.0,
            controls_per_cell: None,
        }
    }

    /// Linear checkerboard with isotropic diffusion 0.5 or 1.0 per cell, no offset.
    pub fn two_phase(dim: usize, seed: u64) -> Self {
        EnvironmentSpec {
            dim,
            lambda: 0.5,
            big_lambda: 1.0,
            family: Family::Linear,
            controls: alloc::vec![[0.5, 0.5], [1.0, 1.0]],
            offset_range: (0.0, 0.0),
            seed,
            smoothing: 0.0,
            controls_per_cell: None,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        s.seed = seed;
        s
    }

    /// Structural checks only; ellipticity of the controls is left to
    /// [`ellipticity_audit`] so that corrupted laws can still be built and audited.
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dim) {
            return Err(Error::Dimension(self.dim));
        }
        if !(self.lambda > 0.0) || !(self.big_lambda >= self.lambda) || !self.big_lambda.is_finite() {
            return Err(Error::Environment("need 0 < lambda <= Lambda"));
        }
        if self.controls.is_empty() || self.controls.len() > MAX_CONTROLS {
            return Err(Error::Environment("need between 1 and 4 controls"));
        }
        if self
            .controls
            .iter()
            .any(|c| c[..self.dim].iter().any(|&e| !(e > 0.0) || !e.is_finite()))
        {
            return Err(Error::Environment("diffusion entries must be positive and finite"));
        }
        let (lo, hi) = self.offset_range;
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Environment("offset range must be a finite interval"));
        }
        if !(0.0..0.5).contains(&self.smoothing) {
            return Err(Error::Environment("smoothing must lie in [0, 1/2)"));
        }
        if let Some(k) = self.controls_per_cell {
            if k == 0 || k > MAX_CONTROLS {
                return Err(Error::Environment("controls per cell must be between 1 and 4"));
            }
        }
        Ok(())
    }

    /// Bound on `|F(0, x, t)|`.
    pub fn k0(&self) -> f64 {
        abs(self.offset_range.0).max(abs(self.offset_range.1))
    }

    /// Largest diffusion entry over the control list (used for the CFL bound).
    pub fn max_diffusion(&self) -> f64 {
        self.controls
            .iter()
            .flat_map(|c| c[..self.dim].iter().copied())
            .fold(0.0, f64::max)
    }

    pub fn min_diffusion(&self) -> f64 {
        self.controls
            .iter()
            .flat_map(|c| c[..self.dim].iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    /// Diffusion bound for time steps: the larger of `Λ` and the actual controls.
    pub fn cfl_diffusion(&self) -> f64 {
        self.big_lambda.max(self.max_diffusion())
    }

    /// True when every cell draw is the same.
    pub fn is_deterministic(&self) -> bool {
        let (lo, hi) = self.offset_range;
        let one_control = self.controls.windows(2).all(|w| w[0][..self.dim] == w[1][..self.dim]);
        lo == hi && one_control
    }

    fn group_size(&self) -> usize {
        match self.family {
            Family::Linear => 1,
            _ => self.controls_per_cell.unwrap_or(self.controls.len()),
        }
    }
}

/// One cell's parameters: up to two groups of `(diffusion, offset)` pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellDraw {
    pub cell: [i64; 3],
    pub family: Family,
    /// Entries per group.
    pub count: usize,
    /// Group 0 diffusions and offsets.
    pub diffusion: [[f64; 2]; MAX_CONTROLS],
    pub offset: [f64; MAX_CONTROLS],
    /// Group 1 (min-max family only).
    pub diffusion_b: [[f64; 2]; MAX_CONTROLS],
    pub offset_b: [f64; MAX_CONTROLS],
}

impl CellDraw {
    /// Plain operator value at diagonal Hessian entries `m`.
    #[inline]
    pub fn eval(&self, m: [f64; 2]) -> f64 {
        let lin = |a: &[f64; 2], c: f64| -(a[0] * m[0] + a[1] * m[1]) + c;
        match self.family {
            Family::Linear => lin(&self.diffusion[0], self.offset[0]),
            Family::HjbMin => {
                let mut v = f64::INFINITY;
                for k in 0..self.count {
                    v = v.min(lin(&self.diffusion[k], self.offset[k]));
                }
                v
            }
            Family::IsaacsMinMax => {
                let mut outer = f64::INFINITY;
                for i in 0..self.count {
                    let mut inner = f64::NEG_INFINITY;
                    for j in 0..self.count {
                        let a = [
                            0.5 * (self.diffusion[i][0] + self.diffusion_b[j][0]),
                            0.5 * (self.diffusion[i][1] + self.diffusion_b[j][1]),
                        ];
                        inner = inner.max(lin(&a, 0.5 * (self.offset[i] + self.offset_b[j])));
                    }
                    outer = outer.min(inner);
                }
                outer
            }
        }
    }
}

/// A realization `ω` (or its involution `ω*`) of an [`EnvironmentSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    spec: EnvironmentSpec,
    starred: bool,
}

impl Environment {
    pub fn new(spec: EnvironmentSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Environment {
            spec,
            starred: false,
        })
    }

    pub fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn is_starred(&self) -> bool {
        self.starred
    }

    /// `F(M, x, t, ω*) = -F(-M, x, t, ω)`.
    pub fn involute(&self) -> Environment {
        Environment {
            spec: self.spec.clone(),
            starred: !self.starred,
        }
    }

    /// Deterministic draw for the cell with spatial index `space` and time index `time`.
    pub fn sample_cell(&self, space: [i64; 2], time: i64) -> CellDraw {
        let s = &self.spec;
        let mut space = space;
        if s.dim == 1 {
            space[1] = 0;
        }
        let mut rng = SplitMix64::new(hash_coords(s.seed, &[space[0], space[1], time]));
        let (lo, hi) = s.offset_range;
        let n = s.controls.len();
        let count = s.group_size();
        let mut draw = CellDraw {
            cell: [space[0], space[1], time],
            family: s.family,
            count,
            diffusion: [[0.0; 2]; MAX_CONTROLS],
            offset: [0.0; MAX_CONTROLS],
            diffusion_b: [[0.0; 2]; MAX_CONTROLS],
            offset_b: [0.0; MAX_CONTROLS],
        };
        let all = s.family != Family::Linear && s.controls_per_cell.is_none();
        let groups = if s.family == Family::IsaacsMinMax { 2 } else { 1 };
        for g in 0..groups {
            for k in 0..count {
                let idx = if all { k } else { rng.below(n) };
                let mut a = s.controls[idx];
                if s.dim == 1 {
                    a[1] = 0.0;
                }
                let c = if lo == hi { lo } else { lo + (hi - lo) * unit_f64(rng.next_u64()) };
                if g == 0 {
                    draw.diffusion[k] = a;
                    draw.offset[k] = c;
                } else {
                    draw.diffusion_b[k] = a;
                    draw.offset_b[k] = c;
                }
            }
        }
        draw
    }

    /// Cell index of a point: `floor(x + 1/2)` per axis, `ceil(t) - 1` in time.
    ///
    /// A `1e-9` nudge sends grid nodes that land on a face (up to rounding) to
    /// the cell on their right, matching the half-open convention.
    pub fn cell_of(x: &[f64], t: f64) -> ([i64; 2], i64) {
        let mut space = [0i64; 2];
        for (a, &xa) in x.iter().enumerate().take(2) {
            space[a] = floor(xa + 0.5 + FACE_EPS) as i64;
        }
        (space, ceil(t - FACE_EPS) as i64 - 1)
    }

    /// Plain value at diagonal Hessian `m` and point `(x, t)`, honoring smoothing.
    fn plain_at(&self, m: [f64; 2], x: &[f64], t: f64) -> f64 {
        let theta = self.spec.smoothing;
        let (cell, tc) = Environment::cell_of(x, t);
        if theta == 0.0 {
            return self.sample_cell(cell, tc).eval(m);
        }
        // Tensor-product blend over neighbors within `theta` of a face.
        let mut axes: [[(i64, f64); 2]; 3] = [[(0, 1.0), (0, 0.0)]; 3];
        for a in 0..self.spec.dim {
            axes[a] = blend_weights(x[a] - cell[a] as f64, cell[a], theta);
        }
        axes[2] = blend_weights(t - (tc as f64 + 0.5), tc, theta);
        let mut v = 0.0;
        for &(i0, w0) in &axes[0] {
            for &(i1, w1) in &axes[1] {
                for &(j, wt) in &axes[2] {
                    let w = w0 * w1 * wt;
                    if w > 0.0 {
                        v += w * self.sample_cell([i0, i1], j).eval(m);
                    }
                }
            }
        }
        v
    }

    /// `F(M, x, t)`; only the diagonal of `M` is seen by diagonal diffusions.
    pub fn evaluate(&self, m: &SymMatrix, x: &[f64], t: f64) -> Result<f64> {
        if m.dim() != self.spec.dim {
            return Err(Error::DimensionMismatch {
                expected: self.spec.dim,
                got: m.dim(),
            });
        }
        if x.len() != self.spec.dim {
            return Err(Error::DimensionMismatch {
                expected: self.spec.dim,
                got: x.len(),
            });
        }
        Ok(self.evaluate_diag(m.diagonal(), x, t))
    }

    /// `F` at a diagonal Hessian.
    #[inline]
    pub fn evaluate_diag(&self, m: [f64; 2], x: &[f64], t: f64) -> f64 {
        if self.starred {
            -self.plain_at([-m[0], -m[1]], x, t)
        } else {
            self.plain_at(m, x, t)
        }
    }

    /// Evaluates a draw with the involution applied.
    #[inline]
    pub fn eval_draw(&self, draw: &CellDraw, m: [f64; 2]) -> f64 {
        if self.starred {
            -draw.eval([-m[0], -m[1]])
        } else {
            draw.eval(m)
        }
    }
}

/// Weights of the cell and its neighbor for local offset `f ∈ [-1/2, 1/2]`
/// from the cell center. Linear ramp over `[1/2 - θ, 1/2 + θ]`, equal at the face.
fn blend_weights(f: f64, cell: i64, theta: f64) -> [(i64, f64); 2] {
    let edge = 0.5 - theta;
    if f > edge {
        let w = 0.5 * (f - edge) / theta;
        [(cell, 1.0 - w), (cell + 1, w)]
    } else if f < -edge {
        let w = 0.5 * (-edge - f) / theta;
        [(cell, 1.0 - w), (cell - 1, w)]
    } else {
        [(cell, 1.0), (cell, 0.0)]
    }
}

/// Outcome of [`ellipticity_audit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditReport {
    pub trials: usize,
    /// Largest violation of `M⁻(M-N) ≤ F(M) - F(N) ≤ M⁺(M-N)`.
    pub max_violation: f64,
    pub violations: usize,
    /// Largest `|F(0, x, t)|` seen.
    pub max_zero_order: f64,
    /// Probes with `|F(0, x, t)| > K0`.
    pub bound_violations: usize,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.bound_violations == 0
    }
}

/// Violation threshold for exact-arithmetic families.
pub const AUDIT_TOL: f64 = 1e-12;

/// Randomized check of the Pucci sandwich and of the zero-order bound.
pub fn ellipticity_audit(env: &Environment, trials: usize, seed: u64) -> AuditReport {
    let s = env.spec();
    let d = s.dim;
    let mut rng = SplitMix64::new(seed ^ 0xa0d1_7e11);
    let rand_sym = |rng: &mut SplitMix64| {
        let mut e = [0.0; 4];
        e[0] = rng.uniform(-5.0, 5.0);
        if d == 2 {
            let off = rng.uniform(-5.0, 5.0);
            e[1] = off;
            e[2] = off;
            e[3] = rng.uniform(-5.0, 5.0);
        }
        let entries: Vec<f64> = if d == 1 { alloc::vec![e[0]] } else { e.to_vec() };
        SymMatrix::from_row_major(d, &entries).expect("symmetric by construction")
    };
    let mut report = AuditReport {
        trials,
        max_violation: 0.0,
        violations: 0,
        max_zero_order: 0.0,
        bound_violations: 0,
    };
    let k0 = s.k0();
    for _ in 0..trials {
        let m = rand_sym(&mut rng);
        let n = rand_sym(&mut rng);
        let mut x = [0.0; 2];
        for xa in x.iter_mut().take(d) {
            *xa = rng.uniform(-20.0, 20.0);
        }
        let t = rng.uniform(0.0, 40.0);
        let x = &x[..d];
        let fm = env.evaluate_diag(m.diagonal(), x, t);
        let fn_ = env.evaluate_diag(n.diagonal(), x, t);
        let diff = fm - fn_;
        let delta = m.sub(&n);
        let lo = pucci(&delta, s.lambda, s.big_lambda, PucciSign::Minus);
        let hi = pucci(&delta, s.lambda, s.big_lambda, PucciSign::Plus);
        let v = (lo - diff).max(diff - hi).max(0.0);
        report.max_violation = report.max_violation.max(v);
        if v > AUDIT_TOL {
            report.violations += 1;
        }
        let f0 = abs(env.evaluate_diag([0.0, 0.0], x, t));
        report.max_zero_order = report.max_zero_order.max(f0);
        if f0 > k0 * (1.0 + 1e-12) + 1e-15 {
            report.bound_violations += 1;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pucci_examples() {
        let i2 = SymMatrix::scalar(2, 1.0);
        assert_eq!(pucci(&i2, 1.0, 2.0, PucciSign::Plus), -2.0);
        let m = SymMatrix::diag(&[1.0, -1.0]).unwrap();
        assert_eq!(pucci(&m, 1.0, 2.0, PucciSign::Plus), 1.0);
        let z = SymMatrix::zero(2);
        assert_eq!(pucci(&z, 1.0, 2.0, PucciSign::Plus), 0.0);
        assert_eq!(pucci(&z, 1.0, 2.0, PucciSign::Minus), 0.0);
    }

    #[test]
    fn non_symmetric_rejected() {
        assert_eq!(
            SymMatrix::from_row_major(2, &[1.0, 2.0, 3.0, 4.0]),
            Err(Error::NotSymmetric)
        );
    }

    #[test]
    fn eigenvalues_of_rotated_matrix() {
        let m = SymMatrix::from_row_major(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let ev = m.eigenvalues();
        assert!((ev[0] - 3.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constant_linear_value() {
        let env = Environment::new(EnvironmentSpec::constant(1, 1.0, 0.0)).unwrap();
        let m = SymMatrix::scalar(1, 2.0);
        for &(x, t) in &[(0.0, 0.5), (3.7, 11.2), (-8.0, 1.0)] {
            assert_eq!(env.evaluate(&m, &[x], t).unwrap(), -2.0);
        }
    }

    #[test]
    fn involution_negates() {
        let mut spec = EnvironmentSpec::two_phase(1, 5);
        spec.offset_range = (-0.3, 0.7);
        let env = Environment::new(spec).unwrap();
        let star = env.involute();
        let m = SymMatrix::scalar(1, 1.3);
        let a = star.evaluate(&m, &[2.2], 3.1).unwrap();
        let b = env.evaluate(&m.neg(), &[2.2], 3.1).unwrap();
        assert_eq!(a, -b);
    }

    #[test]
    fn hjb_min_enumerates_controls() {
        let spec = EnvironmentSpec {
            dim: 1,
            lambda: 1.0,
            big_lambda: 2.0,
            family: Family::HjbMin,
            controls: alloc::vec![[1.0, 0.0], [2.0, 0.0]],
            offset_range: (0.0, 0.0),
            seed: 1,
            smoothing: 0.0,
            controls_per_cell: None,
        };
        let env = Environment::new(spec).unwrap();
        let m = SymMatrix::scalar(1, -1.0);
        assert_eq!(env.evaluate(&m, &[0.3], 0.4).unwrap(), 1.0);
    }

    #[test]
    fn dimension_mismatch() {
        let env = Environment::new(EnvironmentSpec::constant(1, 1.0, 0.0)).unwrap();
        assert!(env.evaluate(&SymMatrix::zero(2), &[0.0], 0.5).is_err());
    }

    #[test]
    fn draws_are_deterministic() {
        let env = Environment::new(EnvironmentSpec::two_phase(2, 9)).unwrap();
        assert_eq!(env.sample_cell([3, -2], 7), env.sample_cell([3, -2], 7));
    }

    #[test]
    fn seed_changes_draw() {
        let mut spec = EnvironmentSpec::two_phase(1, 1);
        spec.offset_range = (-1.0, 1.0);
        let a = Environment::new(spec.clone()).unwrap().sample_cell([4, 0], 2);
        let b = Environment::new(spec.with_seed(2)).unwrap().sample_cell([4, 0], 2);
        assert_ne!(a.offset[0], b.offset[0]);
    }

    #[test]
    fn audit_passes_for_admissible_and_catches_corruption() {
        let mut spec = EnvironmentSpec::two_phase(2, 3);
        spec.offset_range = (-1.0, 1.0);
        let env = Environment::new(spec.clone()).unwrap();
        assert!(ellipticity_audit(&env, 2000, 1).passed());
        spec.controls[1] = [2.0, 2.0];
        let bad = Environment::new(spec).unwrap();
        assert!(!ellipticity_audit(&bad, 2000, 1).passed());
    }

    #[test]
    fn smoothing_is_continuous_across_faces() {
        let mut spec = EnvironmentSpec::two_phase(1, 11);
        spec.smoothing = 0.2;
        spec.offset_range = (-1.0, 1.0);
        let env = Environment::new(spec).unwrap();
        let m = [0.7, 0.0];
        let left = env.evaluate_diag(m, &[0.5 - 1e-9], 0.3);
        let right = env.evaluate_diag(m, &[0.5 + 1e-9], 0.3);
        assert!((left - right).abs() < 1e-6);
        let before = env.evaluate_diag(m, &[0.1], 1.0 - 1e-9);
        let after = env.evaluate_diag(m, &[0.1], 1.0 + 1e-9);
        assert!((before - after).abs() < 1e-6);
    }
}
