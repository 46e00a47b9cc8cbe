//! Batch-dimension work splitting.
//!
//! Each closure writes one item's slice of the output; items never observe
//! each other, so results do not depend on how the batch is partitioned.

/// Calls `f(item, chunk)` for every `chunk_len`-sized chunk of `out`.
#[cfg(feature = "parallel")]
pub fn for_each_item<F>(out: &mut [f64], chunk_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    use rayon::prelude::*;
    if chunk_len == 0 {
        return;
    }
    // small batches are not worth the scheduling overhead
    if out.len() < 4096 {
        out.chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c));
    } else {
        out.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_item<F>(out: &mut [f64], chunk_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if chunk_len == 0 {
        return;
    }
    out.chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c));
}

/// Fallible variant; the error of the lowest failing item is returned.
pub fn try_for_each_item<E, F>(out: &mut [f64], chunk_len: usize, f: F) -> Result<(), E>
where
    E: Send,
    F: Fn(usize, &mut [f64]) -> Result<(), E> + Sync + Send,
{
    if chunk_len == 0 {
        return Ok(());
    }
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if out.len() >= 4096 {
            let errs: alloc::vec::Vec<(usize, E)> = out
                .par_chunks_mut(chunk_len)
                .enumerate()
                .filter_map(|(i, c)| f(i, c).err().map(|e| (i, e)))
                .collect();
            return match errs.into_iter().min_by_key(|(i, _)| *i) {
                Some((_, e)) => Err(e),
                None => Ok(()),
            };
        }
    }
    for (i, c) in out.chunks_mut(chunk_len).enumerate() {
        f(i, c)?;
    }
    Ok(())
}
