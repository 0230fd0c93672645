use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::stream::TokenFrame;

fn column(frames: &[TokenFrame], layer: usize) -> Result<Vec<u32>> {
    frames
        .iter()
        .enumerate()
        .map(|(t, f)| {
            f.indices()
                .get(layer)
                .copied()
                .ok_or_else(|| Error::config(format!("layer {layer} out of range for frame {t} with {} layers", f.n_layers())))
        })
        .collect()
}

fn entropy_of(counts: impl Iterator<Item = usize>, total: usize) -> f64 {
    let n = total as f64;
    -counts
        .map(|c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Fraction of the `size` codewords of `layer` that appear in `frames`; the end-of-audio value `size` is ignored.
pub fn codebook_utilization(frames: &[TokenFrame], layer: usize, size: usize) -> Result<f64> {
    if size == 0 {
        return Err(Error::config("codebook size must be positive"));
    }
    if frames.is_empty() && layer > 0 {
        return Err(Error::config(format!("layer {layer} out of range for an empty stream")));
    }
    let mut seen = vec![false; size];
    for j in column(frames, layer)? {
        if let Some(s) = seen.get_mut(j as usize) {
            *s = true;
        }
    }
    Ok(seen.iter().filter(|&&s| s).count() as f64 / size as f64)
}

/// Shannon entropy (nats) of the empirical index distribution at `layer`.
pub fn token_entropy(frames: &[TokenFrame], layer: usize) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("no frames".into()));
    }
    let mut hist = BTreeMap::new();
    for j in column(frames, layer)? {
        *hist.entry(j).or_insert(0usize) += 1;
    }
    Ok(entropy_of(hist.into_values(), frames.len()).max(0.0))
}

/// Plug-in mutual information (nats) between the indices of two layers.
pub fn interlayer_mi(frames: &[TokenFrame], layer_a: usize, layer_b: usize) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("no frames".into()));
    }
    let a = column(frames, layer_a)?;
    let b = column(frames, layer_b)?;
    let mut pa = BTreeMap::new();
    let mut pb = BTreeMap::new();
    let mut pab = BTreeMap::new();
    for (&x, &y) in a.iter().zip(&b) {
        *pa.entry(x).or_insert(0usize) += 1;
        *pb.entry(y).or_insert(0usize) += 1;
        *pab.entry((x, y)).or_insert(0usize) += 1;
    }
    let n = frames.len() as f64;
    let mi: f64 = pab
        .iter()
        .map(|(&(x, y), &c)| {
            let pxy = c as f64 / n;
            let px = pa[&x] as f64 / n;
            let py = pb[&y] as f64 / n;
            pxy * (pxy / (px * py)).ln()
        })
        .sum();
    Ok(mi.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(rows: &[[u32; 2]]) -> Vec<TokenFrame> {
        rows.iter().map(|r| TokenFrame::new(r.to_vec())).collect()
    }

    #[test]
    fn utilization_cases() {
        let all_zero = frames(&[[0, 0], [0, 1], [0, 2]]);
        assert_eq!(codebook_utilization(&all_zero, 0, 4).unwrap(), 0.25);
        let full = frames(&[[0, 0], [1, 0], [2, 0], [3, 0], [4, 0]]);
        assert_eq!(codebook_utilization(&full, 0, 4).unwrap(), 1.0);
        assert!(matches!(codebook_utilization(&full, 2, 4), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn entropy_cases() {
        let same = frames(&[[3, 0]; 10]);
        assert_eq!(token_entropy(&same, 0).unwrap(), 0.0);
        let uniform = frames(&[[0, 0], [1, 0], [2, 0], [3, 0]]);
        assert!((token_entropy(&uniform, 0).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert!(matches!(token_entropy(&[], 0), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn mi_of_functional_dependence() {
        let rows: Vec<[u32; 2]> = (0..40u32).map(|i| [i % 5, (i % 5) * 3 + 1]).collect();
        let f = frames(&rows);
        let h = token_entropy(&f, 0).unwrap();
        assert!((interlayer_mi(&f, 0, 1).unwrap() - h).abs() < 1e-12);
        assert!((interlayer_mi(&f, 0, 0).unwrap() - h).abs() < 1e-12);
        assert!(matches!(interlayer_mi(&[], 0, 1), Err(Error::EmptyInput(_))));
    }
}
