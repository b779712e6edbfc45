use std::collections::HashSet;
use std::fmt;
use std::hash::Hash;
use std::sync::Mutex;

use crate::numeric::Rat;

type ShellFn<T> = dyn Fn(usize) -> Vec<T> + Send + Sync;

/// A lazily grown, duplicate-free enumeration: an explicit prefix followed by
/// the concatenation of shells `0, 1, 2, ...`, each entry kept only on its
/// first occurrence.
pub struct Enumerator<T> {
    shell: Box<ShellFn<T>>,
    state: Mutex<State<T>>,
}

struct State<T> {
    items: Vec<T>,
    seen: HashSet<T>,
    next_shell: usize,
}

impl<T: Clone + Eq + Hash> Enumerator<T> {
    pub fn new(prefix: Vec<T>, shell: impl Fn(usize) -> Vec<T> + Send + Sync + 'static) -> Self {
        let mut state = State {
            items: Vec::new(),
            seen: HashSet::new(),
            next_shell: 0,
        };
        for p in prefix {
            if state.seen.insert(p.clone()) {
                state.items.push(p);
            }
        }
        Enumerator {
            shell: Box::new(shell),
            state: Mutex::new(state),
        }
    }

    pub fn get(&self, i: usize) -> T {
        let mut st = self.state.lock().unwrap_or_else(|e| e.into_inner());
        while st.items.len() <= i {
            let k = st.next_shell;
            st.next_shell += 1;
            for x in (self.shell)(k) {
                if st.seen.insert(x.clone()) {
                    st.items.push(x);
                }
            }
        }
        st.items[i].clone()
    }

    pub fn first(&self, n: usize) -> Vec<T> {
        (0..n).map(|i| self.get(i)).collect()
    }
}

impl<T> fmt::Debug for Enumerator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Enumerator")
    }
}

/// Rationals of height `max(|p|, q) = h`, by denominator, then by `|p|`,
/// positive before negative. Shell 0 is `{0}`.
pub fn rational_shell(h: usize) -> Vec<Rat> {
    if h == 0 {
        return vec![Rat::ZERO];
    }
    let h = h as i64;
    let mut out = Vec::new();
    for q in 1..=h {
        for p in 1..=h {
            if p.max(q) == h && num_integer::gcd(p, q) == 1 {
                out.push(Rat::new(p, q));
                out.push(Rat::new(-p, q));
            }
        }
    }
    out
}

/// Dyadics of `[0, 1]` with denominator exactly `2^k`; shell 0 is `{0, 1}`.
pub fn dyadic_unit_shell(k: usize) -> Vec<Rat> {
    if k == 0 {
        return vec![Rat::ZERO, Rat::ONE];
    }
    let den = 1i64 << k.min(62);
    (1..den).step_by(2).map(|j| Rat::new(j, den)).collect()
}

/// Tuples of indices into a base enumeration whose largest entry is `k`,
/// in lexicographic order.
pub(crate) fn index_shell(dim: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; dim];
    loop {
        if cur.contains(&k) {
            out.push(cur.clone());
        }
        let mut pos = dim;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if cur[pos] < k {
                cur[pos] += 1;
                for c in &mut cur[pos + 1..] {
                    *c = 0;
                }
                break;
            }
        }
    }
}
