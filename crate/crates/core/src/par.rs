//! Lane execution: rayon when the `parallel` feature is enabled, a plain
//! sequential loop otherwise.
//!
//! Work is always split into the same fixed chunks and reduced in chunk
//! order, so results never depend on the number of worker threads.

/// How batch work is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Lanes {
    Sequential,
    #[default]
    Parallel,
}

impl Lanes {
    /// Whether parallel lanes are compiled in.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    /// Map `f` over `0..count`, preserving index order in the output.
    pub fn map<U, F>(self, count: usize, f: F) -> Vec<U>
    where
        U: Send,
        F: Fn(usize) -> U + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Lanes::Parallel => {
                use rayon::prelude::*;
                (0..count).into_par_iter().map(f).collect()
            }
            _ => (0..count).map(f).collect(),
        }
    }

    /// Run `f` on every element of `items` with its index.
    pub fn for_each_mut<T, F>(self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Lanes::Parallel => {
                use rayon::prelude::*;
                items.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
            }
            _ => items.iter_mut().enumerate().for_each(|(i, x)| f(i, x)),
        }
    }

    /// Process `items` in fixed-size mutable chunks, paired with matching
    /// chunks of `aux`.
    pub fn for_each_chunk_mut<T, A, F>(self, items: &mut [T], chunk: usize, aux: &mut [A], aux_chunk: usize, f: F)
    where
        T: Send,
        A: Send,
        F: Fn(usize, &mut [T], &mut [A]) + Sync + Send,
    {
        assert!(chunk > 0);
        match self {
            #[cfg(feature = "parallel")]
            Lanes::Parallel => {
                use rayon::prelude::*;
                items
                    .par_chunks_mut(chunk)
                    .zip(aux.par_chunks_mut(aux_chunk.max(1)))
                    .enumerate()
                    .for_each(|(i, (a, b))| f(i, a, b));
            }
            _ => items
                .chunks_mut(chunk)
                .zip(aux.chunks_mut(aux_chunk.max(1)))
                .enumerate()
                .for_each(|(i, (a, b))| f(i, a, b)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order_in_both_modes() {
        let s = Lanes::Sequential.map(100, |i| i * i);
        let p = Lanes::Parallel.map(100, |i| i * i);
        assert_eq!(s, p);
        assert_eq!(s[7], 49);
    }
}
