use crate::error::{Error, Result};

/// Levenshtein distance with unit substitution, insertion and deletion costs.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Word error rate: edit distance over reference length.
pub fn wer<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::config("WER needs a non-empty reference"));
    }
    Ok(edit_distance(reference, hypothesis) as f64 / reference.len() as f64)
}

/// WER over whitespace-separated words.
pub fn wer_str(reference: &str, hypothesis: &str) -> Result<f64> {
    let r: Vec<&str> = reference.split_whitespace().collect();
    let h: Vec<&str> = hypothesis.split_whitespace().collect();
    wer(&r, &h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_cases() {
        assert_eq!(wer_str("the cat sat", "the cat sat").unwrap(), 0.0);
        assert!((wer_str("the cat sat", "the cat").unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(wer_str("a b c d", "a b x d").unwrap(), 0.25);
        assert_eq!(wer_str("a", "b c d").unwrap(), 3.0);
        assert!(matches!(wer_str("", "a"), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn distance_edges() {
        assert_eq!(edit_distance::<u8>(&[], &[]), 0);
        assert_eq!(edit_distance(&[1, 2, 3], &[]), 3);
        assert_eq!(edit_distance(&[], &[1, 2]), 2);
        assert_eq!(edit_distance(b"kitten", b"sitting"), 3);
    }
}
