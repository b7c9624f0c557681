//! Verification and evaluation: optimality residuals of candidate solutions,
//! the dual-certificate field, the e1/e2 reconstruction errors, and seeded
//! noise generation.

use crate::error::{Error, Result};
use crate::fem::{lumped_mass, HeatFlow};
use crate::measure::{group_mag, DiscreteMeasure};
use crate::mesh::MeshGrid;
use crate::obsop::{adjoint_field, forward, obs_norm, MixingMatrix, WeightTable};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Weight-normalized dual field `xi_alpha(x_j) / (alpha w^n(x_j))` over the
/// control nodes, with its groupwise magnitudes and the two leading local
/// maxima. At a converged solution the magnitudes stay below one (up to the
/// solver tolerance), with the maximum attained on the support.
#[derive(Debug, Clone)]
pub struct CertificateField {
    /// Per-frequency values over the control nodes, `values[n][j]`.
    pub values: Vec<Vec<Complex64>>,
    /// Groupwise magnitudes over the control nodes.
    pub magnitude: Vec<f64>,
    /// Control node-ids, aligned with the columns of `values`.
    pub nodes: Vec<usize>,
    /// Node-id and magnitude of the global maximum.
    pub global_max: (usize, f64),
    /// Largest local maximum outside hop-distance 1 of the global one, when
    /// any exists.
    pub second_max: Option<(usize, f64)>,
}

/// Adjoint field `xi = S*(p_d - Su)` over the control nodes of `mixing`.
fn dual_field(
    u: &DiscreteMeasure,
    mixing: &MixingMatrix,
    p_d: &[Complex64],
) -> Result<Vec<Vec<Complex64>>> {
    let su = forward(mixing, u)?;
    let q: Vec<Complex64> = p_d.iter().zip(&su).map(|(d, s)| d - s).collect();
    Ok(adjoint_field(mixing, &q))
}

/// Feasibility and alignment residuals of a candidate solution of the
/// weighted problem: `r1 = max(0, ||xi/w||_inf - alpha)/alpha` and `r2` the
/// worst normalized defect of `alpha v_j/|v_j| = xi(x_j)/w(x_j)` over the
/// support, where `v = w u`. Expects the unweighted mixing matrix.
pub fn optimality_residuals(
    u: &DiscreteMeasure,
    mixing: &MixingMatrix,
    weight: &WeightTable,
    alpha: f64,
    p_d: &[Complex64],
) -> Result<(f64, f64)> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha must be positive"));
    }
    let xi = dual_field(u, mixing, p_d)?;
    let n_freq = mixing.n_freq();

    let mut max_mag: f64 = 0.0;
    for (j, &id) in mixing.controls.iter().enumerate() {
        let mut sq = 0.0;
        for (n, row) in xi.iter().enumerate() {
            let w = weight
                .value(n, id)
                .ok_or_else(|| Error::invalid(format!("node {id} missing from weight table")))?;
            sq += (row[j] / w).norm_sqr();
        }
        max_mag = max_mag.max(sq.sqrt());
    }
    let r1 = (max_mag - alpha).max(0.0) / alpha;

    let v = u.reweight(weight)?;
    let mut r2: f64 = 0.0;
    for (id, c) in &v.entries {
        let mag = group_mag(c);
        if mag == 0.0 {
            continue;
        }
        let j = mixing
            .control_position(*id)
            .ok_or_else(|| Error::invalid(format!("node {id} is not a control node")))?;
        let mut defect = 0.0;
        for n in 0..n_freq {
            let w = weight.value(n, *id).unwrap();
            let d = xi[n][j] / w - alpha * c[n] / mag;
            defect += d.norm_sqr();
        }
        r2 = r2.max(defect.sqrt() / alpha);
    }
    Ok((r1, r2))
}

/// Dual-certificate approximation `xi_alpha/(alpha w)` of a regularized
/// solution, with the global maximum and the largest remaining local
/// maximum. A local maximum is a control node whose magnitude is not
/// exceeded by any control-node mesh neighbor; nodes within hop-distance 1
/// of the global argmax are excluded from the runner-up search. Expects the
/// unweighted mixing matrix.
pub fn certificate(
    u_alpha: &DiscreteMeasure,
    mixing: &MixingMatrix,
    weight: &WeightTable,
    alpha: f64,
    p_d: &[Complex64],
    mesh: &MeshGrid,
) -> Result<CertificateField> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha must be positive"));
    }
    let xi = dual_field(u_alpha, mixing, p_d)?;
    let n_freq = xi.len();
    let n_ctl = mixing.n_controls();

    let mut values = vec![vec![Complex64::ZERO; n_ctl]; n_freq];
    for (j, &id) in mixing.controls.iter().enumerate() {
        for n in 0..n_freq {
            let w = weight
                .value(n, id)
                .ok_or_else(|| Error::invalid(format!("node {id} missing from weight table")))?;
            values[n][j] = xi[n][j] / (alpha * w);
        }
    }
    let magnitude: Vec<f64> = (0..n_ctl)
        .map(|j| {
            (0..n_freq)
                .map(|n| values[n][j].norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect();

    let mut best = (mixing.controls[0], magnitude[0]);
    for (j, &id) in mixing.controls.iter().enumerate() {
        if magnitude[j] > best.1 {
            best = (id, magnitude[j]);
        }
    }
    let near_best: std::collections::BTreeSet<usize> = std::iter::once(best.0)
        .chain(mesh.neighbors(best.0))
        .collect();
    let mut second: Option<(usize, f64)> = None;
    for (j, &id) in mixing.controls.iter().enumerate() {
        if near_best.contains(&id) {
            continue;
        }
        let is_local_max = mesh.neighbors(id).iter().all(|&nb| {
            mixing
                .control_position(nb)
                .map(|p| magnitude[p] <= magnitude[j])
                .unwrap_or(true)
        });
        if is_local_max && second.map(|(_, m)| magnitude[j] > m).unwrap_or(true) {
            second = Some((id, magnitude[j]));
        }
    }
    Ok(CertificateField {
        values,
        magnitude,
        nodes: mixing.controls.clone(),
        global_max: best,
        second_max: second,
    })
}

/// Relative weighted-norm error `(||u_star||_w - ||u_dag||_w)/||u_star||_w`.
pub fn error_e1(
    u_star: &DiscreteMeasure,
    u_dag: &DiscreteMeasure,
    weight: &WeightTable,
) -> Result<f64> {
    let ns = u_star.weighted_norm(weight)?;
    if ns == 0.0 {
        return Err(Error::invalid("error_e1 requires a nonzero exact source"));
    }
    Ok((ns - u_dag.weighted_norm(weight)?) / ns)
}

/// Convolution error: the difference measure is smoothed per frequency by
/// the heat semigroup at time `sigma^2/2`, the nodal group magnitudes are
/// integrated with the lumped mass matrix, and the result is normalized by
/// the group norm of the exact source.
pub fn error_e2(
    u_star: &DiscreteMeasure,
    u_dag: &DiscreteMeasure,
    sigma: f64,
    mesh: &MeshGrid,
) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("error_e2 requires sigma > 0"));
    }
    error_e2_flow(u_star, u_dag, &HeatFlow::new(mesh, sigma, 5)?, mesh)
}

/// [`error_e2`] with a prebuilt heat-flow factorization, for callers that
/// evaluate the metric many times on the same mesh.
pub fn error_e2_flow(
    u_star: &DiscreteMeasure,
    u_dag: &DiscreteMeasure,
    flow: &HeatFlow,
    mesh: &MeshGrid,
) -> Result<f64> {
    let denom = u_star.group_norm();
    if denom == 0.0 {
        return Err(Error::invalid("error_e2 requires a nonzero exact source"));
    }
    let diff = u_star.sub(u_dag)?;
    let n_freq = u_star.n_freq;
    let n = mesh.num_nodes();
    let mut fields: Vec<Vec<Complex64>> = Vec::with_capacity(n_freq);
    for fi in 0..n_freq {
        let loads: Vec<(usize, Complex64)> = diff
            .entries
            .iter()
            .map(|(id, c)| (*id, c[fi]))
            .collect();
        fields.push(flow.apply(&loads)?);
    }
    let mass = lumped_mass(mesh);
    let mut l1 = 0.0;
    for i in 0..n {
        let g: f64 = fields.iter().map(|f| f[i].norm_sqr()).sum::<f64>().sqrt();
        l1 += mass[i] * g;
    }
    Ok(l1 / denom)
}

/// Perturbs an observation vector with seeded complex Gaussian noise scaled
/// so that `||f|| / ||p_exact|| = level` holds exactly.
pub fn add_noise(p_exact: &[Complex64], level: f64, seed: u64) -> Result<Vec<Complex64>> {
    if level < 0.0 {
        return Err(Error::invalid("noise level must be nonnegative"));
    }
    if level == 0.0 {
        return Ok(p_exact.to_vec());
    }
    let norm = obs_norm(p_exact);
    if norm == 0.0 {
        return Err(Error::invalid("cannot scale noise relative to zero data"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f: Vec<Complex64> = (0..p_exact.len())
        .map(|_| {
            Complex64::new(
                rng.sample(rand_distr::StandardNormal),
                rng.sample(rand_distr::StandardNormal),
            )
        })
        .collect();
    let fnorm = obs_norm(&f);
    if fnorm == 0.0 {
        return Err(Error::invalid("degenerate noise draw"));
    }
    let scale = level * norm / fnorm;
    Ok(p_exact
        .iter()
        .zip(&f)
        .map(|(p, fv)| p + scale * fv)
        .collect())
}
