//! Matmul FLOP instrumentation.
//!
//! Every kernel entry point records `2·m·k·n` on the calling thread. Counting
//! is only active inside [`measure`], and only calls made from the thread that
//! invoked `measure` are seen.

use std::cell::Cell;

thread_local! {
    static COUNTER: Cell<Option<u64>> = const { Cell::new(None) };
}

pub(crate) fn record(n: u64) {
    COUNTER.with(|c| {
        if let Some(v) = c.get() {
            c.set(Some(v + n));
        }
    });
}

/// Run `f` and return its result together with the matmul FLOPs it issued.
pub fn measure<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let outer = COUNTER.with(|c| c.replace(Some(0)));
    let out = f();
    let counted = COUNTER.with(|c| c.replace(outer)).unwrap_or(0);
    if let Some(prev) = outer {
        COUNTER.with(|c| c.set(Some(prev + counted)));
    }
    (out, counted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{matmul, Matrix};

    #[test]
    fn counts_matmul_and_nests() {
        let a = Matrix::<f64>::zeros(3, 4);
        let b = Matrix::<f64>::zeros(4, 5);
        let ((_, inner), outer) = measure(|| {
            matmul(&a, &b).unwrap();
            measure(|| matmul(&a, &b).unwrap())
        });
        assert_eq!(inner, 120);
        assert_eq!(outer, 240);
        // outside a scope nothing accumulates
        matmul(&a, &b).unwrap();
        assert_eq!(measure(|| ()).1, 0);
    }
}
