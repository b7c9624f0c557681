//! Discrete vector measures: finite lists of nodal point sources with one
//! complex coefficient per frequency, their (weighted) group norms, the
//! weight transform, and cluster post-processing of solver output.

use crate::error::{Error, Result};
use crate::mesh::{hop_distance, MeshGrid};
use crate::obsop::WeightTable;
use num_complex::Complex64;
use std::io::{BufRead, Write};

/// A measure `u = sum_j u_j delta_{x_j}` supported on mesh nodes, with
/// coefficients `u_j` in `C^N` coupling all frequencies of one location.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    pub n_freq: usize,
    /// Distinct (node-id, coefficient) pairs.
    pub entries: Vec<(usize, Vec<Complex64>)>,
}

/// Off-grid point sources produced by cluster merging.
#[derive(Debug, Clone)]
pub struct PointSourceList {
    pub n_freq: usize,
    pub sources: Vec<([f64; 2], Vec<Complex64>)>,
}

/// Euclidean magnitude of one coefficient group.
pub fn group_mag(coeff: &[Complex64]) -> f64 {
    coeff.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

impl DiscreteMeasure {
    pub fn empty(n_freq: usize) -> Self {
        DiscreteMeasure {
            n_freq,
            entries: Vec::new(),
        }
    }

    pub fn from_entries(n_freq: usize, entries: Vec<(usize, Vec<Complex64>)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for (id, c) in &entries {
            if !seen.insert(*id) {
                return Err(Error::invalid(format!("duplicate support node {id}")));
            }
            if c.len() != n_freq {
                return Err(Error::invalid("coefficient length differs from frequency count"));
            }
        }
        Ok(DiscreteMeasure { n_freq, entries })
    }

    pub fn support_size(&self) -> usize {
        self.entries.len()
    }

    /// `sum_j |u_j|_{C^N}`.
    pub fn group_norm(&self) -> f64 {
        self.entries.iter().map(|(_, c)| group_mag(c)).sum()
    }

    /// `sum_j |w(x_j) u_j|_{C^N}` with the per-frequency weight applied
    /// componentwise.
    pub fn weighted_norm(&self, w: &WeightTable) -> Result<f64> {
        let mut total = 0.0;
        for (id, c) in &self.entries {
            let mut sq = 0.0;
            for n in 0..self.n_freq {
                let wv = w.value(n, *id).ok_or_else(|| {
                    Error::invalid(format!("node {id} missing from the weight table"))
                })?;
                sq += (wv * c[n].norm()).powi(2);
            }
            total += sq.sqrt();
        }
        Ok(total)
    }

    /// The transform `v = w u` (componentwise Hadamard product).
    pub fn reweight(&self, w: &WeightTable) -> Result<DiscreteMeasure> {
        self.map_weight(w, |c, wv| c * wv)
    }

    /// The inverse transform `u = v / w`.
    pub fn unweight(&self, w: &WeightTable) -> Result<DiscreteMeasure> {
        self.map_weight(w, |c, wv| c / wv)
    }

    fn map_weight(
        &self,
        w: &WeightTable,
        f: impl Fn(Complex64, f64) -> Complex64,
    ) -> Result<DiscreteMeasure> {
        let mut entries = Vec::with_capacity(self.entries.len());
        for (id, c) in &self.entries {
            let mut out = Vec::with_capacity(self.n_freq);
            for n in 0..self.n_freq {
                let wv = w.value(n, *id).ok_or_else(|| {
                    Error::invalid(format!("node {id} missing from the weight table"))
                })?;
                out.push(f(c[n], wv));
            }
            entries.push((*id, out));
        }
        Ok(DiscreteMeasure {
            n_freq: self.n_freq,
            entries,
        })
    }

    /// Drops numerically zero coefficient groups (relative threshold 1e-12)
    /// and sorts the support by node-id.
    pub fn normalize(&mut self) {
        let max = self
            .entries
            .iter()
            .map(|(_, c)| group_mag(c))
            .fold(0.0f64, f64::max);
        self.entries.retain(|(_, c)| group_mag(c) > 1e-12 * max);
        self.entries.sort_by_key(|&(id, _)| id);
    }

    /// Difference measure `self - other` on the union support.
    pub fn sub(&self, other: &DiscreteMeasure) -> Result<DiscreteMeasure> {
        if self.n_freq != other.n_freq {
            return Err(Error::invalid("frequency counts differ"));
        }
        let mut map: std::collections::BTreeMap<usize, Vec<Complex64>> = self
            .entries
            .iter()
            .map(|(id, c)| (*id, c.clone()))
            .collect();
        for (id, c) in &other.entries {
            let slot = map.entry(*id).or_insert_with(|| vec![Complex64::ZERO; self.n_freq]);
            for n in 0..self.n_freq {
                slot[n] -= c[n];
            }
        }
        Ok(DiscreteMeasure {
            n_freq: self.n_freq,
            entries: map.into_iter().collect(),
        })
    }

    /// Merges support points that are close in the mesh connectivity graph:
    /// connected components of the relation `hop_distance <= hop_threshold`
    /// are replaced by a single source at the magnitude-weighted centroid
    /// carrying the summed coefficient.
    pub fn cluster_merge(&self, mesh: &MeshGrid, hop_threshold: usize) -> Result<PointSourceList> {
        let p = self.entries.len();
        let mut parent: Vec<usize> = (0..p).collect();
        fn find(parent: &mut Vec<usize>, i: usize) -> usize {
            if parent[i] != i {
                let r = find(parent, parent[i]);
                parent[i] = r;
            }
            parent[i]
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let d = hop_distance(mesh, self.entries[i].0, self.entries[j].0, hop_threshold)?;
                if d.is_some() {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri] = rj;
                    }
                }
            }
        }
        let mut clusters: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for i in 0..p {
            let r = find(&mut parent, i);
            clusters.entry(r).or_default().push(i);
        }
        let mut sources = Vec::with_capacity(clusters.len());
        for members in clusters.values() {
            let mut pos = [0.0; 2];
            let mut total_mag = 0.0;
            let mut coeff = vec![Complex64::ZERO; self.n_freq];
            for &i in members {
                let (id, c) = &self.entries[i];
                let mag = group_mag(c);
                let xy = mesh.node_coord(*id);
                pos[0] += mag * xy[0];
                pos[1] += mag * xy[1];
                total_mag += mag;
                for n in 0..self.n_freq {
                    coeff[n] += c[n];
                }
            }
            if total_mag > 0.0 {
                pos[0] /= total_mag;
                pos[1] /= total_mag;
            } else {
                let xy = mesh.node_coord(self.entries[members[0]].0);
                pos = xy;
            }
            sources.push((pos, coeff));
        }
        sources.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Ok(PointSourceList {
            n_freq: self.n_freq,
            sources,
        })
    }

    /// CSV serialization: node_id, x, y, then re_n, im_n per frequency.
    pub fn write_csv<W: Write>(&self, mesh: &MeshGrid, out: &mut W) -> Result<()> {
        write!(out, "node_id,x,y")?;
        for n in 0..self.n_freq {
            write!(out, ",re_{n},im_{n}")?;
        }
        writeln!(out)?;
        for (id, c) in &self.entries {
            let xy = mesh.node_coord(*id);
            write!(out, "{id},{:.17e},{:.17e}", xy[0], xy[1])?;
            for v in c {
                write!(out, ",{:.17e},{:.17e}", v.re, v.im)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<DiscreteMeasure> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid("empty measure CSV"))??;
        let n_freq = header.split(',').count().saturating_sub(3) / 2;
        let mut entries = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 + 2 * n_freq {
                return Err(Error::invalid("malformed measure CSV row"));
            }
            let id: usize = fields[0]
                .parse()
                .map_err(|_| Error::invalid("bad node id in measure CSV"))?;
            let mut coeff = Vec::with_capacity(n_freq);
            for n in 0..n_freq {
                let re: f64 = fields[3 + 2 * n].parse().map_err(|_| Error::invalid("bad float"))?;
                let im: f64 = fields[4 + 2 * n].parse().map_err(|_| Error::invalid("bad float"))?;
                coeff.push(Complex64::new(re, im));
            }
            entries.push((id, coeff));
        }
        DiscreteMeasure::from_entries(n_freq, entries)
    }
}

impl PointSourceList {
    /// Total coefficient per frequency, for conservation checks.
    pub fn coefficient_sum(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::ZERO; self.n_freq];
        for (_, c) in &self.sources {
            for n in 0..self.n_freq {
                out[n] += c[n];
            }
        }
        out
    }
}
