use serde::{Deserialize, Serialize};

use super::TraceError;

/// One supervised example: `window + 1` consecutive observations and the
/// value that follows them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub input: Vec<f64>,
    pub target: f64,
}

/// Stride-1 sliding windows over `values`.
///
/// Pattern `i` has input `values[i..=i + window]` and target
/// `values[i + window + 1]`.
pub fn make_windows(values: &[f64], window: usize) -> Result<Vec<Pattern>, TraceError> {
    let needed = window + 2;
    if values.len() < needed {
        return Err(TraceError::SeriesTooShort {
            len: values.len(),
            window,
            needed,
        });
    }
    Ok(values
        .windows(window + 2)
        .map(|w| Pattern {
            input: w[..=window].to_vec(),
            target: w[window + 1],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smallest_case() {
        let p = make_windows(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(
            p,
            vec![Pattern {
                input: vec![1.0, 2.0, 3.0],
                target: 4.0
            }]
        );
    }

    #[test]
    fn pattern_count() {
        let series: Vec<f64> = (0..73).map(f64::from).collect();
        assert_eq!(make_windows(&series, 70).unwrap().len(), 2);
    }

    #[test]
    fn constant_series() {
        let p = make_windows(&[5.0; 5], 2).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p.iter().all(|x| x.target == 5.0));
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            make_windows(&[1.0, 2.0, 3.0], 2),
            Err(TraceError::SeriesTooShort { needed: 4, .. })
        ));
    }

    proptest! {
        #[test]
        fn windows_reconstruct_series(
            values in prop::collection::vec(-1e3f64..1e3, 2..120),
            window in 0usize..20,
        ) {
            prop_assume!(values.len() >= window + 2);
            let patterns = make_windows(&values, window).unwrap();
            prop_assert_eq!(patterns.len(), values.len() - window - 1);
            let mut rebuilt = patterns[0].input.clone();
            rebuilt.extend(patterns.iter().map(|p| p.target));
            prop_assert_eq!(rebuilt, values);
        }
    }
}
