use std::ops::Range;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Contiguous flat-index ranges that split `len` elements into `shards`
/// balanced pieces (sizes differ by at most one, larger shards first).
pub(crate) fn shard_ranges(len: usize, shards: usize) -> Result<Vec<Range<usize>>> {
    if shards == 0 {
        return Err(Error::InvalidArgument("shard count must be positive".into()));
    }
    if shards > len {
        return Err(Error::InvalidArgument(format!(
            "cannot split {len} elements into {shards} shards"
        )));
    }
    let base = len / shards;
    let rem = len % shards;
    let mut out = Vec::with_capacity(shards);
    let mut start = 0;
    for k in 0..shards {
        let size = base + usize::from(k < rem);
        out.push(start..start + size);
        start += size;
    }
    debug_assert_eq!(start, len);
    Ok(out)
}

/// Shard view ranges over a tensor's flat row-major data.
pub fn shard_views(t: &Tensor, shards: usize) -> Result<Vec<Range<usize>>> {
    shard_ranges(t.len(), shards)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_elements_three_shards() {
        let t = Tensor::zeros(vec![10]);
        let views = shard_views(&t, 3).unwrap();
        assert_eq!(views, vec![0..4, 4..7, 7..10]);
    }

    #[test]
    fn single_shard_covers_everything() {
        let t = Tensor::zeros(vec![2, 3]);
        assert_eq!(shard_views(&t, 1).unwrap(), vec![0..6]);
    }

    #[test]
    fn rejects_zero_or_excess_shards() {
        let t = Tensor::zeros(vec![4]);
        assert!(shard_views(&t, 0).is_err());
        assert!(shard_views(&t, 5).is_err());
        assert!(shard_views(&t, 4).is_ok());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(300))]

            #[test]
            fn shards_partition_and_balance(len in 1usize..500, shards in 1usize..64) {
                prop_assume!(shards <= len);
                let ranges = shard_ranges(len, shards).unwrap();
                prop_assert_eq!(ranges.len(), shards);
                // Contiguous cover with no gaps or overlaps.
                let mut cursor = 0;
                for r in &ranges {
                    prop_assert_eq!(r.start, cursor);
                    cursor = r.end;
                }
                prop_assert_eq!(cursor, len);
                // Balanced: sizes differ by at most one.
                let sizes: Vec<usize> = ranges.iter().map(|r| r.end - r.start).collect();
                let min = *sizes.iter().min().unwrap();
                let max = *sizes.iter().max().unwrap();
                prop_assert!(max - min <= 1);
            }
        }
    }
}
