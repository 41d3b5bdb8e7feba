//! Data-parallel helpers. With the `parallel` feature disabled every
//! [`Execution`] mode runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// Whether work will actually be spread across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `items.iter().enumerate().map(f).collect()`, in input order.
pub fn map_indexed<T, R, F>(mode: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let _ = mode;
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

fn scan(offset: usize, chunk: &[f32]) -> Option<(usize, f32)> {
    let mut best: Option<(usize, f32)> = None;
    for (i, &v) in chunk.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((offset + i, v));
        }
    }
    best
}

#[cfg_attr(not(feature = "parallel"), allow(dead_code))]
fn pick(a: Option<(usize, f32)>, b: Option<(usize, f32)>) -> Option<(usize, f32)> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.1 > x.1 || (y.1 == x.1 && y.0 < x.0) { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Index and value of the largest element; ties go to the smallest index.
/// `None` for an empty slice.
pub fn argmax_first(mode: Execution, values: &[f32]) -> Option<(usize, f32)> {
    const CHUNK: usize = 16 * 1024;
    #[cfg(feature = "parallel")]
    if mode.is_parallel() && values.len() > CHUNK {
        return values
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, chunk)| scan(c * CHUNK, chunk))
            .reduce(|| None, pick);
    }
    let _ = mode;
    scan(0, values)
}
