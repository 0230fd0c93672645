use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One 12.5 Hz audio frame: a codeword index per quantizer layer.
///
/// Index `K_l` (one past the last codeword of layer `l`) is the end-of-audio
/// value; an end-of-audio frame carries it in every layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenFrame(pub Vec<u32>);

impl TokenFrame {
    pub fn new(indices: Vec<u32>) -> Self {
        Self(indices)
    }

    /// The end-of-audio frame for codebooks of the given sizes.
    pub fn eoa(codebook_sizes: &[u32]) -> Self {
        Self(codebook_sizes.to_vec())
    }

    pub fn indices(&self) -> &[u32] {
        &self.0
    }

    pub fn n_layers(&self) -> usize {
        self.0.len()
    }

    pub fn is_eoa(&self, codebook_sizes: &[u32]) -> bool {
        self.0 == codebook_sizes
    }

    /// Check layer count, index range and the all-or-nothing end-of-audio rule.
    pub fn validate(&self, codebook_sizes: &[u32]) -> Result<()> {
        if self.0.len() != codebook_sizes.len() {
            return Err(Error::shape(format!(
                "frame has {} layers, expected {}",
                self.0.len(),
                codebook_sizes.len()
            )));
        }
        let mut eoa_layers = 0;
        for (layer, (&j, &k)) in self.0.iter().zip(codebook_sizes).enumerate() {
            if j > k {
                return Err(Error::IndexOutOfRange {
                    layer,
                    index: j,
                    rows: k as usize + 1,
                });
            }
            if j == k {
                eoa_layers += 1;
            }
        }
        if eoa_layers != 0 && eoa_layers != codebook_sizes.len() {
            return Err(Error::InvalidStream(format!(
                "end-of-audio value in {eoa_layers} of {} layers",
                codebook_sizes.len()
            )));
        }
        Ok(())
    }
}

/// Per-layer audio embedding vocabularies: codebook size plus one end-of-audio row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingSpec {
    pub vocab_sizes: Vec<usize>,
}

impl EmbeddingSpec {
    pub fn for_codebooks(codebook_sizes: &[u32]) -> Self {
        Self {
            vocab_sizes: codebook_sizes.iter().map(|&k| k as usize + 1).collect(),
        }
    }

    pub fn check(&self, tables: &[EmbeddingTable]) -> Result<()> {
        if tables.len() != self.vocab_sizes.len() {
            return Err(Error::shape(format!("{} tables for {} layers", tables.len(), self.vocab_sizes.len())));
        }
        for (l, (t, &v)) in tables.iter().zip(&self.vocab_sizes).enumerate() {
            if t.rows() != v {
                return Err(Error::shape(format!("table {l} has {} rows, expected {v}", t.rows())));
            }
        }
        Ok(())
    }
}

/// Dense `rows x dim` embedding matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    data: Vec<f64>,
    dim: usize,
}

impl EmbeddingTable {
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::shape(format!("{} values is not a whole number of {dim}-dim rows", data.len())));
        }
        Ok(Self { data, dim })
    }

    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            data: vec![0.0; rows * dim],
            dim,
        }
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            data: self.data.iter().map(|v| v * s).collect(),
            dim: self.dim,
        }
    }
}

/// Audio embedding of a frame: the sum over layers of each layer's table row.
pub fn sum_embeddings(frame: &TokenFrame, tables: &[EmbeddingTable]) -> Result<Vec<f64>> {
    if frame.n_layers() != tables.len() {
        return Err(Error::shape(format!("{} layers vs {} tables", frame.n_layers(), tables.len())));
    }
    let dim = tables.first().map_or(0, EmbeddingTable::dim);
    if tables.iter().any(|t| t.dim() != dim) {
        return Err(Error::shape("embedding tables differ in width"));
    }
    let mut out = vec![0.0; dim];
    for (layer, (&j, table)) in frame.indices().iter().zip(tables).enumerate() {
        if j as usize >= table.rows() {
            return Err(Error::IndexOutOfRange {
                layer,
                index: j,
                rows: table.rows(),
            });
        }
        for (o, v) in out.iter_mut().zip(table.row(j as usize)) {
            *o += v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eoa_rules() {
        let sizes = [4, 2];
        assert!(TokenFrame::eoa(&sizes).validate(&sizes).is_ok());
        assert!(TokenFrame::eoa(&sizes).is_eoa(&sizes));
        assert!(TokenFrame::new(vec![3, 1]).validate(&sizes).is_ok());
        assert!(matches!(
            TokenFrame::new(vec![4, 1]).validate(&sizes),
            Err(Error::InvalidStream(_))
        ));
        assert!(matches!(
            TokenFrame::new(vec![5, 0]).validate(&sizes),
            Err(Error::IndexOutOfRange { layer: 0, .. })
        ));
        assert!(TokenFrame::new(vec![0]).validate(&sizes).is_err());
    }

    #[test]
    fn zero_tables_give_zero() {
        let tables = vec![EmbeddingTable::zeros(5, 3), EmbeddingTable::zeros(3, 3)];
        assert_eq!(sum_embeddings(&TokenFrame::new(vec![2, 1]), &tables).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn eoa_frame_uses_last_rows() {
        let sizes = [2u32, 1];
        let spec = EmbeddingSpec::for_codebooks(&sizes);
        assert_eq!(spec.vocab_sizes, vec![3, 2]);
        let t0 = EmbeddingTable::new(vec![1.0, 0.0, 2.0, 0.0, 3.0, 0.5], 2).unwrap();
        let t1 = EmbeddingTable::new(vec![10.0, 10.0, 20.0, 30.0], 2).unwrap();
        let tables = vec![t0, t1];
        spec.check(&tables).unwrap();
        assert_eq!(sum_embeddings(&TokenFrame::eoa(&sizes), &tables).unwrap(), vec![23.0, 30.5]);
        assert!(matches!(
            sum_embeddings(&TokenFrame::new(vec![3, 0]), &tables),
            Err(Error::IndexOutOfRange { layer: 0, index: 3, rows: 3 })
        ));
    }
}
