//! Circuit matrices of the capacitively coupled oscillator network.
//!
//! With identical oscillators and loading capacitances `C_l = c_c (nI - D)`
//! every node sees the same total capacitance, and the whole network is
//! governed by the symmetric negative definite matrix
//!
//! ```text
//! B = (c_c A - (c_i + n c_c) I)^-1
//! ```
//!
//! For complete multipartite graphs with equal classes the inverse has a
//! closed form, which [`prototypical_inverse`] and [`column_profile`]
//! evaluate independently of any numeric inversion. Note the sign: the
//! closed form describes `F^-1 = (c_i I - c_c A + c_c n I)^-1 = -B`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Default relative tolerance for grouping equal eigenvalues.
pub const DEFAULT_EPS_EIG: f64 = 1e-8;

/// Oscillator circuit constants in normalized units. When deserialized,
/// missing fields take their default values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OscParams {
    /// Internal capacitance.
    pub c_i: f64,
    /// Coupling capacitance per edge.
    pub c_c: f64,
    /// Internal (device) conductance in the metallic state.
    pub g_i: f64,
    /// Series conductance.
    pub g_s: f64,
    /// Lower hysteresis threshold: a discharging node starts charging here.
    pub v_l: f64,
    /// Upper hysteresis threshold: a charging node starts discharging here.
    pub v_h: f64,
}

impl Default for OscParams {
    fn default() -> Self {
        Self {
            c_i: 1.0,
            c_c: 1.0,
            g_i: 10.0,
            g_s: 1.0,
            v_l: 0.1,
            v_h: 0.9,
        }
    }
}

impl OscParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.into()));
        let all = [self.c_i, self.c_c, self.g_i, self.g_s, self.v_l, self.v_h];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite");
        }
        if self.c_i <= 0.0 || self.g_i <= 0.0 || self.g_s <= 0.0 {
            return bad("c_i, g_i and g_s must be positive");
        }
        if self.c_c < 0.0 {
            return bad("c_c must be non-negative");
        }
        if !(0.0 < self.v_l && self.v_l < self.v_h) {
            return bad("need 0 < v_l < v_h");
        }
        if self.v_h >= self.charge_level() {
            return bad("v_h must lie below the charging fixed point g_i/(g_i+g_s)");
        }
        Ok(())
    }

    /// Hysteresis width `v_h - v_l`.
    pub fn dv(&self) -> f64 {
        self.v_h - self.v_l
    }

    /// Fixed point `g_i / (g_i + g_s)` of a charging node.
    pub fn charge_level(&self) -> f64 {
        self.g_i / (self.g_i + self.g_s)
    }

    /// Coupling ratio `c_i / c_c` (infinite when uncoupled).
    pub fn coupling_ratio(&self) -> f64 {
        self.c_i / self.c_c
    }

    /// Period of an isolated oscillator: RC discharge from `v_h` to `v_l`
    /// plus RC charge from `v_l` to `v_h`.
    pub fn isolated_period(&self) -> f64 {
        let p = self.charge_level();
        self.c_i / self.g_s * (self.v_h / self.v_l).ln()
            + self.c_i / (self.g_i + self.g_s) * ((p - self.v_l) / (p - self.v_h)).ln()
    }

    /// Isolated period rescaled to the total node capacitance `c_i + n c_c`
    /// of an `n`-node network. Only a time scale for horizons and steps.
    pub fn nominal_period(&self, n: usize) -> f64 {
        (self.c_i + n as f64 * self.c_c) / self.c_i * self.isolated_period()
    }
}

/// All matrices of a coupled network built from one graph.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub n: usize,
    pub adjacency: DMatrix<f64>,
    pub degree: DVector<f64>,
    /// `C_i + C_c + C_l`.
    pub c_total: DMatrix<f64>,
    /// `-C_total^-1`; equals `(c_c A - (c_i + n c_c) I)^-1` for identical
    /// oscillators.
    pub b: DMatrix<f64>,
    pub params: OscParams,
}

/// Builds the identical-oscillator system.
pub fn build_system(g: &Graph, p: &OscParams) -> Result<SystemMatrices> {
    p.validate()?;
    let n = g.n();
    let (adjacency, degree) = graph_matrices(g);
    let c_total = total_capacitance(&adjacency, &degree, &DVector::repeat(n, p.c_i), p.c_c);
    check_constant_loading(&c_total, &DVector::repeat(n, p.c_i), p.c_c)?;

    let coeff = &adjacency * p.c_c - DMatrix::identity(n, n) * (p.c_i + n as f64 * p.c_c);
    let b = invert_symmetric(coeff)?;
    Ok(SystemMatrices {
        n,
        adjacency,
        degree,
        c_total,
        b,
        params: *p,
    })
}

/// General path with per-oscillator internal capacitances: `B = -C_total^-1`.
/// The shared `p.c_i` is ignored.
pub fn build_system_heterogeneous(g: &Graph, p: &OscParams, c_i: &[f64]) -> Result<SystemMatrices> {
    p.validate()?;
    let n = g.n();
    if c_i.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: c_i.len(),
        });
    }
    if c_i.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::InvalidParams(
            "internal capacitances must be positive".into(),
        ));
    }
    let (adjacency, degree) = graph_matrices(g);
    let ci = DVector::from_column_slice(c_i);
    let c_total = total_capacitance(&adjacency, &degree, &ci, p.c_c);
    check_constant_loading(&c_total, &ci, p.c_c)?;
    let b = -invert_symmetric(c_total.clone())?;
    Ok(SystemMatrices {
        n,
        adjacency,
        degree,
        c_total,
        b,
        params: *p,
    })
}

fn graph_matrices(g: &Graph) -> (DMatrix<f64>, DVector<f64>) {
    let n = g.n();
    let mut a = DMatrix::zeros(n, n);
    for &(u, v) in g.edges() {
        a[(u, v)] = 1.0;
        a[(v, u)] = 1.0;
    }
    let d = DVector::from_fn(n, |i, _| g.degree(i) as f64);
    (a, d)
}

// C_i + c_c L + C_l with C_l = c_c (n I - D).
fn total_capacitance(
    a: &DMatrix<f64>,
    d: &DVector<f64>,
    c_i: &DVector<f64>,
    c_c: f64,
) -> DMatrix<f64> {
    let n = a.nrows();
    let laplacian = DMatrix::from_diagonal(d) - a;
    let loading = DMatrix::from_diagonal(&d.map(|deg| c_c * (n as f64 - deg)));
    DMatrix::from_diagonal(c_i) + laplacian * c_c + loading
}

fn check_constant_loading(c_total: &DMatrix<f64>, c_i: &DVector<f64>, c_c: f64) -> Result<()> {
    let n = c_total.nrows();
    let target = n as f64 * c_c;
    for k in 0..n {
        let diag = c_total[(k, k)] - c_i[k];
        if (diag - target).abs() > 1e-12 * target.max(1.0) {
            return Err(Error::Numerical(format!(
                "diag(C_c + C_l)[{k}] = {diag}, expected {target}"
            )));
        }
    }
    Ok(())
}

fn invert_symmetric(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = m
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular capacitance matrix".into()))?;
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted
/// descending and grouped into numerically equal eigenspaces.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: DMatrix<f64>,
    /// Index groups of equal eigenvalues, in descending eigenvalue order.
    pub eigenspaces: Vec<Vec<usize>>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Orthonormal basis of eigenspace `group`.
    pub fn basis(&self, group: usize) -> DMatrix<f64> {
        let idx = &self.eigenspaces[group];
        self.eigenvectors.select_columns(idx.iter())
    }

    /// Orthogonal projection of `x` onto eigenspace `group`.
    pub fn project(&self, group: usize, x: &DVector<f64>) -> DVector<f64> {
        let q = self.basis(group);
        &q * (q.transpose() * x)
    }

    pub fn eigenvalue_of(&self, group: usize) -> f64 {
        self.eigenvalues[self.eigenspaces[group][0]]
    }

    /// `Q diag(f(lambda)) Q^T`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let d = DVector::from_iterator(self.dim(), self.eigenvalues.iter().map(|&l| f(l)));
        let q = &self.eigenvectors;
        q * DMatrix::from_diagonal(&d) * q.transpose()
    }
}

/// Symmetric eigendecomposition. Eigenvalues within
/// `eps_eig * max(1, |lambda|_max)` of their neighbour share an eigenspace.
pub fn eigendecompose(m: &DMatrix<f64>, eps_eig: f64) -> Result<Spectrum> {
    if !m.is_square() {
        return Err(Error::Dimension {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::Asymmetric(asym));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = eig.eigenvectors.select_columns(order.iter());

    let tol = eps_eig * eigenvalues.iter().fold(1.0_f64, |acc, l| acc.max(l.abs()));
    let mut eigenspaces: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        match eigenspaces.last_mut() {
            Some(group) if eigenvalues[i - 1] - eigenvalues[i] <= tol => group.push(i),
            _ => eigenspaces.push(vec![i]),
        }
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
        eigenspaces,
    })
}

/// Outcome of checking `mu_k = 1 / (c_c lambda_k - c_i - n c_c)` between
/// the spectra of `A` and `B`.
#[derive(Debug, Clone, Serialize)]
pub struct EigRelationReport {
    /// Largest relative error between predicted and computed `mu_k`.
    pub max_rel_error: f64,
    /// Largest principal angle (radians) between an eigenspace of `A` and
    /// the matching eigenvectors of `B`.
    pub max_principal_angle: f64,
    pub max_mu: f64,
    pub all_negative: bool,
}

impl EigRelationReport {
    pub fn holds(&self, rel_tol: f64, angle_tol: f64) -> bool {
        self.all_negative && self.max_rel_error <= rel_tol && self.max_principal_angle <= angle_tol
    }
}

pub fn predicted_mu(lambda: f64, p: &OscParams, n: usize) -> f64 {
    1.0 / (p.c_c * lambda - p.c_i - n as f64 * p.c_c)
}

pub fn verify_eig_relation(
    spec_a: &Spectrum,
    spec_b: &Spectrum,
    p: &OscParams,
    n: usize,
) -> Result<EigRelationReport> {
    if spec_a.dim() != n || spec_b.dim() != n {
        return Err(Error::Dimension {
            expected: n,
            got: spec_a.dim().min(spec_b.dim()),
        });
    }
    let mut predicted: Vec<f64> = spec_a
        .eigenvalues
        .iter()
        .map(|&l| predicted_mu(l, p, n))
        .collect();
    predicted.sort_by(|a, b| b.total_cmp(a));
    let max_rel_error = predicted
        .iter()
        .zip(&spec_b.eigenvalues)
        .map(|(pm, m)| ((pm - m) / pm).abs())
        .fold(0.0, f64::max);

    let mut max_angle: f64 = 0.0;
    for group in 0..spec_a.eigenspaces.len() {
        let mu = predicted_mu(spec_a.eigenvalue_of(group), p, n);
        let cols: Vec<usize> = (0..n)
            .filter(|&j| (spec_b.eigenvalues[j] - mu).abs() <= 1e-7 * mu.abs())
            .collect();
        let u = spec_a.basis(group);
        if cols.len() < u.ncols() {
            max_angle = std::f64::consts::FRAC_PI_2;
            continue;
        }
        let v = spec_b.eigenvectors.select_columns(cols.iter());
        let residual = &u - &v * (v.transpose() * &u);
        let sin = residual.singular_values().amax().min(1.0);
        max_angle = max_angle.max(sin.asin());
    }

    let max_mu = spec_b.eigenvalues.first().copied().unwrap_or(f64::NAN);
    Ok(EigRelationReport {
        max_rel_error,
        max_principal_angle: max_angle,
        max_mu,
        all_negative: max_mu < 0.0,
    })
}

/// Closed-form `F^-1 = (c_i I - c_c A + c_c n I)^-1` for the complete
/// `k`-partite graph with classes of size `m` (class-major node order):
///
/// ```text
/// F^-1 = (1/c_ic) [ I_k (x) I_m + c_c/(c_i + (n+m) c_c) (beta J_k - I_k) (x) J_m ]
/// ```
///
/// with `c_ic = c_i + n c_c` and `beta = (c_i + n c_c)/(c_i + m c_c)`.
pub fn prototypical_inverse(k_classes: usize, m: usize, p: &OscParams) -> Result<DMatrix<f64>> {
    if k_classes < 2 || m < 1 {
        return Err(Error::InvalidParams(format!(
            "prototypical system needs k >= 2 and m >= 1 (got k={k_classes}, m={m})"
        )));
    }
    let n = k_classes * m;
    let (nf, mf) = (n as f64, m as f64);
    let c_ic = p.c_i + nf * p.c_c;
    let beta = beta(p, n, m);
    let ik = DMatrix::<f64>::identity(k_classes, k_classes);
    let jk = DMatrix::<f64>::repeat(k_classes, k_classes, 1.0);
    let im = DMatrix::<f64>::identity(m, m);
    let jm = DMatrix::<f64>::repeat(m, m, 1.0);
    let d = (jk * beta - &ik) / (p.c_i + (nf + mf) * p.c_c);
    let f_inv = ik.kronecker(&im) + d.kronecker(&(jm * p.c_c));
    Ok(f_inv / c_ic)
}

fn beta(p: &OscParams, n: usize, m: usize) -> f64 {
    (p.c_i + n as f64 * p.c_c) / (p.c_i + m as f64 * p.c_c)
}

/// The three distinct entries of a column of `F^-1` in the prototypical
/// case, plus the relative same/cross-class spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ColumnProfile {
    /// Diagonal entry.
    pub b_kk: f64,
    /// Entry for another node of the same class.
    pub b_kl: f64,
    /// Entry for a node of a different class.
    pub b_kj: f64,
    pub beta: f64,
    pub alpha: f64,
    /// `(b_kj - b_kl) / b_kk = 1 / (r + n + m + (n - m)/(r + m))`, `r = c_i/c_c`.
    pub ratio: f64,
    pub n: usize,
    pub m: usize,
    pub k_classes: usize,
}

pub fn column_profile(k_classes: usize, m: usize, p: &OscParams) -> Result<ColumnProfile> {
    if k_classes < 2 || m < 1 {
        return Err(Error::InvalidParams(format!(
            "prototypical system needs k >= 2 and m >= 1 (got k={k_classes}, m={m})"
        )));
    }
    let n = k_classes * m;
    let (nf, mf) = (n as f64, m as f64);
    let c_ic = p.c_i + nf * p.c_c;
    let beta = beta(p, n, m);
    let alpha = p.c_c / (p.c_i + (nf + mf) * p.c_c);
    let ratio = if p.c_c == 0.0 {
        0.0
    } else {
        let r = p.coupling_ratio();
        1.0 / (r + nf + mf + (nf - mf) / (r + mf))
    };
    Ok(ColumnProfile {
        b_kk: (1.0 + alpha * (beta - 1.0)) / c_ic,
        b_kl: alpha * (beta - 1.0) / c_ic,
        b_kj: alpha * beta / c_ic,
        beta,
        alpha,
        ratio,
        n,
        m,
        k_classes,
    })
}

/// Row-major CSV with 17 significant digits.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:.16e}", m[(i, j)]);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete_partite, Graph};

    fn params(c_i: f64, c_c: f64) -> OscParams {
        OscParams {
            c_i,
            c_c,
            ..OscParams::default()
        }
    }

    #[test]
    fn scalar_system() {
        let g = Graph::new(1, []).unwrap();
        let sys = build_system(&g, &params(1.0, 0.0)).unwrap();
        assert_eq!(sys.b[(0, 0)], -1.0);
    }

    #[test]
    fn constant_loading_diagonal() {
        let g = complete_partite(&[2, 2]).unwrap();
        let sys = build_system(&g, &params(10.0, 1.0)).unwrap();
        for k in 0..4 {
            assert!((sys.c_total[(k, k)] - 10.0 - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn params_validation() {
        assert!(OscParams::default().validate().is_ok());
        let base = OscParams::default();
        for p in [
            OscParams {
                v_h: 0.9995,
                ..base
            },
            OscParams { c_c: -1.0, ..base },
            OscParams {
                v_l: base.v_h,
                ..base
            },
        ] {
            assert!(p.validate().is_err());
        }
    }

    #[test]
    fn identity_spectrum() {
        let s = eigendecompose(&DMatrix::identity(3, 3), DEFAULT_EPS_EIG).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 1.0, 1.0]);
        assert_eq!(s.eigenspaces, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(
            eigendecompose(&m, 1e-8),
            Err(Error::Asymmetric(_))
        ));
    }

    #[test]
    fn prototypical_beta() {
        let prof = column_profile(2, 2, &params(10.0, 1.0)).unwrap();
        assert!((prof.beta - 7.0 / 6.0).abs() < 1e-15);
        assert!((prof.ratio - 6.0 / 97.0).abs() < 1e-15);
        assert!(prototypical_inverse(1, 4, &params(10.0, 1.0)).is_err());
    }

    #[test]
    fn uncoupled_profile() {
        let prof = column_profile(3, 2, &params(10.0, 0.0)).unwrap();
        assert_eq!(prof.alpha, 0.0);
        assert_eq!(prof.ratio, 0.0);
        assert!((prof.b_kk - 0.1).abs() < 1e-15);
    }

    #[test]
    fn heterogeneous_matches_identical_when_equal() {
        let g = complete_partite(&[2, 3]).unwrap();
        let p = params(7.0, 0.5);
        let a = build_system(&g, &p).unwrap();
        let b = build_system_heterogeneous(&g, &p, &[7.0; 5]).unwrap();
        assert!((a.b - b.b).amax() < 1e-14);
        assert!(build_system_heterogeneous(&g, &p, &[7.0; 4]).is_err());
    }

    #[test]
    fn csv_digits() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0 / 3.0, -2.0]);
        let csv = matrix_to_csv(&m);
        assert_eq!(csv, "3.3333333333333331e-1,-2.0000000000000000e0\n");
        let back: f64 = csv.split(',').next().unwrap().parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }
}
