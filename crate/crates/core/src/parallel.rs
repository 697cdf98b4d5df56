//! Order-preserving parallel map over a raw record stream.

use rayon::prelude::*;

use crate::corpus::RawRecord;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchLimits {
    pub max_records: usize,
    pub max_bytes: usize,
}

impl Default for BatchLimits {
    fn default() -> Self {
        BatchLimits {
            max_records: 2048,
            max_bytes: 4 << 20,
        }
    }
}

fn next_batch<I>(records: &mut I, limits: BatchLimits) -> Result<Vec<RawRecord>>
where
    I: Iterator<Item = Result<RawRecord>>,
{
    let mut batch = Vec::new();
    let mut bytes = 0;
    while batch.len() < limits.max_records.max(1) && bytes < limits.max_bytes {
        match records.next() {
            Some(r) => {
                let r = r?;
                bytes += r.len_bytes();
                batch.push(r);
            }
            None => break,
        }
    }
    Ok(batch)
}

/// Maps `records` with `map` on the current rayon pool and hands the
/// results to `sink` in source order.
///
/// Records are read in bounded batches and the next batch is read while
/// the current one is mapped, so memory stays proportional to the batch
/// size and the output does not depend on the number of workers.
pub fn map_ordered<I, T, M, S>(mut records: I, limits: BatchLimits, map: M, mut sink: S) -> Result<()>
where
    I: Iterator<Item = Result<RawRecord>> + Send,
    T: Send,
    M: Fn(&RawRecord) -> T + Sync,
    S: FnMut(T) -> Result<()>,
{
    let mut current = next_batch(&mut records, limits)?;
    while !current.is_empty() {
        let (next, mapped) = rayon::join(
            || next_batch(&mut records, limits),
            || current.par_iter().map(&map).collect::<Vec<T>>(),
        );
        for out in mapped {
            sink(out)?;
        }
        current = next?;
    }
    Ok(())
}
