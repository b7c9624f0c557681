//! The observation operator: mixing matrices of discrete Green's function
//! values, admissible weights, the weighted rescaling, and the forward and
//! adjoint applications used by the solvers.

use crate::error::{Error, Result};
use crate::fem::FrequencySystem;
use crate::measure::DiscreteMeasure;
use crate::mesh::MeshGrid;
use crate::specfun::phi_free;
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::HashMap;
use std::io::{Read, Write};

/// Observation vector indexed by (frequency n, microphone m) as `n * M + m`.
pub type ObservationVector = Vec<Complex64>;

/// Adjoint field: per-frequency complex values over the control nodes.
pub type AdjointTable = Vec<Vec<Complex64>>;

/// Real inner product `sum Re(a conj(b))` on complex observation vectors.
pub fn obs_inner(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x * y.conj()).re).sum()
}

pub fn obs_norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Per-frequency matrix of Green's function values `K_n[m, j] =
/// G_n^{x_m}(x_j)` mapping nodal point sources at the control nodes to
/// microphone readings.
#[derive(Debug, Clone)]
pub struct MixingMatrix {
    pub wavenumbers: Vec<f64>,
    pub microphones: Vec<usize>,
    pub controls: Vec<usize>,
    pub level: u32,
    pub weighted: bool,
    pub warnings: Vec<String>,
    /// Row-major M x N_c entries per frequency.
    data: Vec<Vec<Complex64>>,
    control_index: HashMap<usize, usize>,
}

/// Weight function selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    One,
    Free,
    Omega1,
    Omega2,
}

impl std::str::FromStr for WeightKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" => Ok(WeightKind::One),
            "free" => Ok(WeightKind::Free),
            "omega1" => Ok(WeightKind::Omega1),
            "omega2" => Ok(WeightKind::Omega2),
            _ => Err(Error::config(format!("unknown weight kind '{s}'"))),
        }
    }
}

/// Positive weight values at the control nodes, one table per frequency.
#[derive(Debug, Clone)]
pub struct WeightTable {
    pub kind: WeightKind,
    pub controls: Vec<usize>,
    /// values[n][j] for control node `controls[j]`.
    pub values: Vec<Vec<f64>>,
    index: HashMap<usize, usize>,
}

impl WeightTable {
    pub fn new(kind: WeightKind, controls: Vec<usize>, values: Vec<Vec<f64>>) -> Result<Self> {
        for row in &values {
            if row.len() != controls.len() {
                return Err(Error::invalid("weight table shape mismatch"));
            }
            if row.iter().any(|&v| !(v >= 1e-14) || !v.is_finite()) {
                return Err(Error::invalid("weights must be finite and >= 1e-14"));
            }
        }
        let index = controls.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        Ok(WeightTable {
            kind,
            controls,
            values,
            index,
        })
    }

    pub fn n_freq(&self) -> usize {
        self.values.len()
    }

    /// Weight of frequency `n` at a control node, by node-id.
    pub fn value(&self, n: usize, node_id: usize) -> Option<f64> {
        self.index.get(&node_id).map(|&j| self.values[n][j])
    }
}

impl MixingMatrix {
    pub fn from_raw(
        wavenumbers: Vec<f64>,
        microphones: Vec<usize>,
        controls: Vec<usize>,
        level: u32,
        weighted: bool,
        data: Vec<Vec<Complex64>>,
    ) -> Result<Self> {
        if data.len() != wavenumbers.len() {
            return Err(Error::invalid("mixing data frequency count mismatch"));
        }
        let expected = microphones.len() * controls.len();
        if data.iter().any(|d| d.len() != expected) {
            return Err(Error::invalid("mixing data shape mismatch"));
        }
        let control_index = controls.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        Ok(MixingMatrix {
            wavenumbers,
            microphones,
            controls,
            level,
            weighted,
            warnings: Vec::new(),
            data,
            control_index,
        })
    }

    pub fn n_freq(&self) -> usize {
        self.wavenumbers.len()
    }

    pub fn n_mic(&self) -> usize {
        self.microphones.len()
    }

    pub fn n_controls(&self) -> usize {
        self.controls.len()
    }

    /// `K_n[m, j]` by control position `j`.
    #[inline]
    pub fn entry(&self, n: usize, m: usize, j: usize) -> Complex64 {
        self.data[n][m * self.controls.len() + j]
    }

    /// Control position of a node-id, if the node is a control node.
    pub fn control_position(&self, node_id: usize) -> Option<usize> {
        self.control_index.get(&node_id).copied()
    }
}

/// Builds the unweighted mixing matrix: for each frequency and microphone,
/// one adjoint solve with a unit load at the microphone node, conjugated and
/// restricted to the control nodes.
pub fn build_mixing(
    systems: &[FrequencySystem],
    microphones: &[usize],
    controls: &[usize],
) -> Result<MixingMatrix> {
    if systems.is_empty() {
        return Err(Error::invalid("no frequencies given"));
    }
    if controls.is_empty() {
        return Err(Error::invalid("control node set is empty"));
    }
    let mut seen = std::collections::HashSet::new();
    for &m in microphones {
        if !seen.insert(m) {
            return Err(Error::invalid(format!("duplicated microphone node {m}")));
        }
    }
    let mut warnings = Vec::new();
    let control_set: std::collections::HashSet<usize> = controls.iter().copied().collect();
    for &m in microphones {
        if control_set.contains(&m) {
            warnings.push(format!(
                "microphone node {m} lies in the control set; weights are required for a well-posed problem"
            ));
        }
    }

    let one = Complex64::new(1.0, 0.0);
    let loads: Vec<Vec<(usize, Complex64)>> =
        microphones.iter().map(|&m| vec![(m, one)]).collect();
    let data: Vec<Vec<Complex64>> = systems
        .par_iter()
        .map(|sys| -> Result<Vec<Complex64>> {
            let fields = sys.solve_adjoint_many(&loads)?;
            let mut block = Vec::with_capacity(microphones.len() * controls.len());
            for field in &fields {
                for &j in controls {
                    block.push(field[j].conj());
                }
            }
            Ok(block)
        })
        .collect::<Result<_>>()?;

    let mut mix = MixingMatrix::from_raw(
        systems.iter().map(|s| s.k).collect(),
        microphones.to_vec(),
        controls.to_vec(),
        systems[0].mesh.level,
        false,
        data,
    )?;
    mix.warnings = warnings;
    Ok(mix)
}

/// Computes a weight table for the given kind.
///
/// `one` is constant, `free` sums the moduli of the free-space fundamental
/// solution over the microphones (with the self-term evaluated at
/// `r = cell_side/2`), and the omega kinds are the 1- and 2-norms of the
/// mixing-matrix columns.
pub fn compute_weight(
    kind: WeightKind,
    mixing: &MixingMatrix,
    mesh: &MeshGrid,
) -> Result<WeightTable> {
    if mixing.weighted && kind != WeightKind::One {
        return Err(Error::invalid("weights must be computed from the unweighted mixing matrix"));
    }
    let (n_freq, n_mic, n_ctl) = (mixing.n_freq(), mixing.n_mic(), mixing.n_controls());
    let mut values = vec![vec![0.0; n_ctl]; n_freq];
    match kind {
        WeightKind::One => {
            for row in &mut values {
                row.iter_mut().for_each(|v| *v = 1.0);
            }
        }
        WeightKind::Free => {
            let mics: Vec<[f64; 2]> = mixing.microphones.iter().map(|&m| mesh.node_coord(m)).collect();
            for (n, &k) in mixing.wavenumbers.iter().enumerate() {
                for (j, &ctl) in mixing.controls.iter().enumerate() {
                    let x = mesh.node_coord(ctl);
                    let mut sum = 0.0;
                    for mic in &mics {
                        let mut r = ((x[0] - mic[0]).powi(2) + (x[1] - mic[1]).powi(2)).sqrt();
                        if r < 1e-12 {
                            r = 0.5 * mesh.cell_side;
                        }
                        sum += phi_free(2, k, r)?.norm();
                    }
                    values[n][j] = sum;
                }
            }
        }
        WeightKind::Omega1 | WeightKind::Omega2 => {
            for n in 0..n_freq {
                for j in 0..n_ctl {
                    let mut acc = 0.0;
                    for m in 0..n_mic {
                        let a = mixing.entry(n, m, j).norm();
                        acc += if kind == WeightKind::Omega1 { a } else { a * a };
                    }
                    values[n][j] = if kind == WeightKind::Omega1 { acc } else { acc.sqrt() };
                }
            }
        }
    }
    WeightTable::new(kind, mixing.controls.clone(), values)
}

/// Rescales the mixing matrix columns by the weight: `K_n[:, j] / w^n(x_j)`.
pub fn apply_weight(mixing: &MixingMatrix, weight: &WeightTable) -> Result<MixingMatrix> {
    if mixing.weighted {
        return Err(Error::invalid("mixing matrix is already weighted"));
    }
    if weight.controls != mixing.controls || weight.n_freq() != mixing.n_freq() {
        return Err(Error::invalid("weight table does not match the mixing matrix"));
    }
    let n_ctl = mixing.n_controls();
    let data = mixing
        .data
        .iter()
        .enumerate()
        .map(|(n, block)| {
            block
                .iter()
                .enumerate()
                .map(|(idx, &v)| v / weight.values[n][idx % n_ctl])
                .collect()
        })
        .collect();
    let mut out = MixingMatrix::from_raw(
        mixing.wavenumbers.clone(),
        mixing.microphones.clone(),
        mixing.controls.clone(),
        mixing.level,
        true,
        data,
    )?;
    out.warnings = mixing.warnings.clone();
    Ok(out)
}

/// Forward application `(Su)_{n,m} = sum_j K_n[m, j] u_{n,j}`.
pub fn forward(mixing: &MixingMatrix, u: &DiscreteMeasure) -> Result<ObservationVector> {
    if u.n_freq != mixing.n_freq() {
        return Err(Error::invalid("frequency count mismatch"));
    }
    let (n_freq, n_mic) = (mixing.n_freq(), mixing.n_mic());
    let mut obs = vec![Complex64::ZERO; n_freq * n_mic];
    for (id, coeff) in &u.entries {
        let j = mixing
            .control_position(*id)
            .ok_or_else(|| Error::invalid(format!("support node {id} is not a control node")))?;
        for n in 0..n_freq {
            for m in 0..n_mic {
                obs[n * n_mic + m] += mixing.entry(n, m, j) * coeff[n];
            }
        }
    }
    Ok(obs)
}

/// Adjoint application `xi_n(x_j) = sum_m conj(K_n[m, j]) q_{n,m}`.
pub fn adjoint_field(mixing: &MixingMatrix, q: &[Complex64]) -> AdjointTable {
    let (n_freq, n_mic, n_ctl) = (mixing.n_freq(), mixing.n_mic(), mixing.n_controls());
    debug_assert_eq!(q.len(), n_freq * n_mic);
    let mut out = vec![vec![Complex64::ZERO; n_ctl]; n_freq];
    for n in 0..n_freq {
        for m in 0..n_mic {
            let qv = q[n * n_mic + m];
            let row = &mixing.data[n][m * n_ctl..(m + 1) * n_ctl];
            for (j, &kv) in row.iter().enumerate() {
                out[n][j] += kv.conj() * qv;
            }
        }
    }
    out
}

const MIXING_MAGIC: &[u8; 8] = b"HLMXMIX1";

/// Binary cache of a mixing matrix: magic, N, M, N_c, level, weighted flag,
/// wavenumbers, microphone ids, control ids, then row-major interleaved
/// re/im little-endian doubles per frequency.
pub fn write_mixing<W: Write>(out: &mut W, mixing: &MixingMatrix) -> Result<()> {
    out.write_all(MIXING_MAGIC)?;
    for v in [
        mixing.n_freq() as u64,
        mixing.n_mic() as u64,
        mixing.n_controls() as u64,
        mixing.level as u64,
        mixing.weighted as u64,
    ] {
        out.write_all(&v.to_le_bytes())?;
    }
    for &k in &mixing.wavenumbers {
        out.write_all(&k.to_le_bytes())?;
    }
    for &m in &mixing.microphones {
        out.write_all(&(m as u64).to_le_bytes())?;
    }
    for &c in &mixing.controls {
        out.write_all(&(c as u64).to_le_bytes())?;
    }
    for block in &mixing.data {
        for v in block {
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_mixing<R: Read>(input: &mut R) -> Result<MixingMatrix> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MIXING_MAGIC {
        return Err(Error::invalid("not a mixing-matrix cache file"));
    }
    let mut u64_buf = [0u8; 8];
    let mut read_u64 = |input: &mut R| -> Result<u64> {
        input.read_exact(&mut u64_buf)?;
        Ok(u64::from_le_bytes(u64_buf))
    };
    let n_freq = read_u64(input)? as usize;
    let n_mic = read_u64(input)? as usize;
    let n_ctl = read_u64(input)? as usize;
    let level = read_u64(input)? as u32;
    let weighted = read_u64(input)? != 0;
    let mut f64_buf = [0u8; 8];
    let mut read_f64 = |input: &mut R| -> Result<f64> {
        input.read_exact(&mut f64_buf)?;
        Ok(f64::from_le_bytes(f64_buf))
    };
    let wavenumbers: Vec<f64> = (0..n_freq).map(|_| read_f64(input)).collect::<Result<_>>()?;
    let mut id_buf = [0u8; 8];
    let mut read_id = |input: &mut R| -> Result<usize> {
        input.read_exact(&mut id_buf)?;
        Ok(u64::from_le_bytes(id_buf) as usize)
    };
    let microphones: Vec<usize> = (0..n_mic).map(|_| read_id(input)).collect::<Result<_>>()?;
    let controls: Vec<usize> = (0..n_ctl).map(|_| read_id(input)).collect::<Result<_>>()?;
    let mut data = Vec::with_capacity(n_freq);
    let mut buf = vec![0u8; 16 * n_mic * n_ctl];
    for _ in 0..n_freq {
        input.read_exact(&mut buf)?;
        let block: Vec<Complex64> = buf
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[0..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..16].try_into().unwrap()),
                )
            })
            .collect();
        data.push(block);
    }
    MixingMatrix::from_raw(wavenumbers, microphones, controls, level, weighted, data)
}
