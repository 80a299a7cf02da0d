//! Index sets of polyhomogeneous expansions and the bookkeeping of the
//! iterative expansion at the front face and at timelike infinity.

use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

const Z_TOL: f64 = 1e-9;

/// `Some(n)` when `b − a` is a nonnegative integer `n`.
fn integer_gap(a: f64, b: f64) -> Option<i64> {
    let d = b - a;
    let n = d.round();
    (n > -0.5 && (d - n).abs() < Z_TOL).then_some(n as i64)
}

/// The order on `(z, k)`: smaller `z` first, then larger `k`.
pub fn index_order(a: (f64, usize), b: (f64, usize)) -> Ordering {
    if (a.0 - b.0).abs() < Z_TOL {
        b.1.cmp(&a.1)
    } else {
        a.0.total_cmp(&b.0)
    }
}

/// A closed set of pairs `(z, k)`: with `(z, k)` it contains `(z + 1, k)` and,
/// for `k ≥ 1`, `(z, k − 1)`. Stored exactly through its generators, so
/// every operation is exact; `elements` lists the part with `z ≤ cap`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndexSet {
    generators: Vec<(f64, usize)>,
    cap: f64,
}

impl IndexSet {
    pub fn empty(cap: f64) -> Self {
        Self { generators: Vec::new(), cap }
    }

    /// `overline((z, k))`; `k = −1` gives the empty set.
    pub fn overline(z: f64, k: i64, cap: f64) -> Self {
        if k < 0 {
            return Self::empty(cap);
        }
        Self { generators: vec![(z, k as usize)], cap }
    }

    /// Smallest index set containing the points.
    pub fn closure(points: &[(f64, usize)], cap: f64) -> Self {
        let mut s = Self { generators: points.to_vec(), cap };
        s.normalize();
        s
    }

    /// Builds a set from an explicit list of elements, which must already be
    /// closed below the cap.
    pub fn from_elements(elements: &[(f64, usize)], cap: f64) -> Result<Self> {
        let s = Self::closure(elements, cap);
        let listed = |z: f64, k: usize| elements.iter().any(|&(a, b)| b == k && (a - z).abs() < Z_TOL);
        for (z, k) in s.elements() {
            if !listed(z, k) {
                return Err(Error::Precondition(format!("elements not closed: ({z}, {k}) missing")));
            }
        }
        Ok(s)
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn generators(&self) -> &[(f64, usize)] {
        &self.generators
    }

    fn normalize(&mut self) {
        let g = std::mem::take(&mut self.generators);
        let mut kept: Vec<(f64, usize)> = Vec::with_capacity(g.len());
        for (i, &(z, k)) in g.iter().enumerate() {
            let dominated = g.iter().enumerate().any(|(j, &(a, b))| {
                j != i
                    && integer_gap(a, z).is_some()
                    && b >= k
                    && ((z - a).abs() >= Z_TOL || b > k || j < i)
            });
            if !dominated {
                kept.push((z, k));
            }
        }
        kept.sort_by(|a, b| index_order(*a, *b));
        self.generators = kept;
    }

    fn same_cap(&self, other: &Self) -> Result<()> {
        if (self.cap - other.cap).abs() > Z_TOL {
            return Err(Error::Cap(self.cap, other.cap));
        }
        Ok(())
    }

    /// Largest `k` with `(z, k)` in the set.
    pub fn max_log(&self, z: f64) -> Option<usize> {
        self.generators.iter().filter(|g| integer_gap(g.0, z).is_some()).map(|g| g.1).max()
    }

    pub fn contains(&self, z: f64, k: usize) -> bool {
        self.max_log(z).is_some_and(|m| m >= k)
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.same_cap(other)?;
        let mut generators = self.generators.clone();
        generators.extend_from_slice(&other.generators);
        Ok(Self::closure(&generators, self.cap))
    }

    /// `E₁ ∪̄ E₂`: the union, plus `(z, k₁ + k₂ + 1)` wherever both sets
    /// contain exponent `z`.
    pub fn ext_union(&self, other: &Self) -> Result<Self> {
        self.same_cap(other)?;
        let mut generators = Vec::new();
        for &(z, _) in self.generators.iter().chain(&other.generators) {
            let k = match (self.max_log(z), other.max_log(z)) {
                (Some(a), Some(b)) => a + b + 1,
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => continue,
            };
            generators.push((z, k));
        }
        Ok(Self::closure(&generators, self.cap))
    }

    /// `E₁ + E₂ = {(z₁ + z₂, k₁ + k₂)}`.
    pub fn sum(&self, other: &Self) -> Result<Self> {
        self.same_cap(other)?;
        let generators: Vec<_> = self
            .generators
            .iter()
            .flat_map(|a| other.generators.iter().map(move |b| (a.0 + b.0, a.1 + b.1)))
            .collect();
        Ok(Self::closure(&generators, self.cap))
    }

    /// `E − (z, k) = {(z₁ − z, k₁ − k)}`, dropping pairs with `k₁ < k`.
    pub fn shift(&self, z: f64, k: usize) -> Self {
        let generators: Vec<_> =
            self.generators.iter().filter(|g| g.1 >= k).map(|g| (g.0 - z, g.1 - k)).collect();
        Self::closure(&generators, self.cap)
    }

    /// Minimum in the index order, `None` for the empty set.
    pub fn min(&self) -> Option<(f64, usize)> {
        let z = self.generators.iter().map(|g| g.0).min_by(f64::total_cmp)?;
        Some((z, self.max_log(z).unwrap_or(0)))
    }

    /// Removes the minimum; the result is again closed.
    pub fn remove_min(&self) -> Self {
        let Some((z, k)) = self.min() else {
            return self.clone();
        };
        let mut generators: Vec<_> = self.generators.iter().filter(|g| (g.0 - z).abs() >= Z_TOL).copied().collect();
        generators.push((z + 1.0, k));
        if k > 0 {
            generators.push((z, k - 1));
        }
        Self::closure(&generators, self.cap)
    }

    /// Elements with `z ≤ cap`, sorted by the index order.
    pub fn elements(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for &(z0, _) in &self.generators {
            let mut z = z0;
            while z <= self.cap + Z_TOL {
                if !out.iter().any(|e| (e.0 - z).abs() < Z_TOL) {
                    let top = self.max_log(z).unwrap_or(0);
                    out.extend((0..=top).map(|k| (z, k)));
                }
                z += 1.0;
            }
        }
        out.sort_by(|a, b| index_order(*a, *b));
        out
    }

    pub fn is_empty_below_cap(&self) -> bool {
        self.min().is_none_or(|m| m.0 > self.cap + Z_TOL)
    }

    /// Checks the closure property on the materialized elements, treating
    /// pairs beyond the cap as present.
    pub fn is_closed(&self) -> bool {
        let elems = self.elements();
        let has = |z: f64, k: usize| z > self.cap + Z_TOL || elems.iter().any(|e| e.1 == k && (e.0 - z).abs() < Z_TOL);
        elems.iter().all(|&(z, k)| has(z + 1.0, k) && (k == 0 || has(z, k - 1)))
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.generators.iter().map(|(z, k)| format!("({z},{k})")).collect();
        write!(f, "closure{{{}}}", parts.join(", "))
    }
}

/// Error index sets of the iteration: the forcing at the front face, the
/// forcing at timelike infinity, and the unsolved part of the data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhgState {
    pub front: IndexSet,
    pub plus: IndexSet,
    pub data: IndexSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PhgCase {
    /// Solve at timelike infinity (`p_F ≥ p₊`).
    Plus,
    /// Solve at the front face (`p_F < p₊`).
    Front,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhgStep {
    pub case: PhgCase,
    pub p_front: Option<(f64, usize)>,
    pub p_plus: Option<(f64, usize)>,
    /// Minimum exponent of the terms added to the front-face set.
    pub added_front: f64,
    /// Minimum exponent of the terms added at timelike infinity.
    pub added_plus: f64,
}

impl PhgState {
    /// State with `min = (p_F, 0)` at the front face and leading rate `p₊`
    /// at timelike infinity.
    pub fn seed(p_front: f64, p_plus: f64, cap: f64) -> Self {
        Self {
            front: IndexSet::overline(p_front, 0, cap),
            plus: IndexSet::overline(p_plus + 2.0, 0, cap),
            data: IndexSet::empty(cap),
        }
    }

    /// `(p₊, k₊) = min(E_dat + 1, E₊ − 2)`.
    pub fn leading_plus(&self) -> Option<(f64, usize)> {
        let d = self.data.min().map(|(z, k)| (z + 1.0, k));
        let p = self.plus.min().map(|(z, k)| (z - 2.0, k));
        match (d, p) {
            (Some(a), Some(b)) => Some(if index_order(a, b) == Ordering::Greater { b } else { a }),
            (a, b) => a.or(b),
        }
    }

    pub fn leading_front(&self) -> Option<(f64, usize)> {
        self.front.min()
    }

    /// Both leading rates exceed the cap.
    pub fn finished(&self) -> bool {
        let cap = self.front.cap();
        self.leading_front().is_none_or(|p| p.0 > cap + Z_TOL) && self.leading_plus().is_none_or(|p| p.0 > cap + Z_TOL)
    }
}

/// One step of the iteration. Case 1 (`p_F ≥ p₊`) solves the leading term
/// at timelike infinity: it removes that term, adds `overline((p₊ + 3, k₊))`
/// at timelike infinity and `overline((p₊, 0))` at the front face. Case 2
/// solves the leading front-face term: it removes `(p_F, k_F)`, adds
/// `overline((p_F + 1, k_F))` at the front face and
/// `overline((p_F + 4, k_F))` at timelike infinity.
pub fn phg_iteration_step(state: &PhgState) -> Result<(PhgState, PhgStep)> {
    let cap = state.front.cap();
    state.front.same_cap(&state.plus)?;
    state.front.same_cap(&state.data)?;
    let pf = state.leading_front();
    let pp = state.leading_plus();
    let case = match (pf, pp) {
        (None, None) => return Err(Error::Precondition("iteration state is empty".into())),
        (Some(_), None) => PhgCase::Front,
        (None, Some(_)) => PhgCase::Plus,
        (Some(f), Some(p)) => {
            if f.0 >= p.0 - Z_TOL {
                PhgCase::Plus
            } else {
                PhgCase::Front
            }
        }
    };
    let mut next = state.clone();
    let step = match case {
        PhgCase::Plus => {
            let (z, k) = pp.expect("case 1 has a leading term");
            if next.data.min().is_some_and(|m| (m.0 + 1.0 - z).abs() < Z_TOL && m.1 == k) {
                next.data = next.data.remove_min();
            }
            if next.plus.min().is_some_and(|m| (m.0 - 2.0 - z).abs() < Z_TOL && m.1 == k) {
                next.plus = next.plus.remove_min();
            }
            next.plus = next.plus.union(&IndexSet::overline(z + 3.0, k as i64, cap))?;
            next.front = next.front.union(&IndexSet::overline(z, 0, cap))?;
            PhgStep { case, p_front: pf, p_plus: pp, added_front: z, added_plus: z + 3.0 }
        }
        PhgCase::Front => {
            let (z, k) = pf.expect("case 2 has a leading term");
            next.front = next.front.remove_min().union(&IndexSet::overline(z + 1.0, k as i64, cap))?;
            next.plus = next.plus.union(&IndexSet::overline(z + 4.0, k as i64, cap))?;
            PhgStep { case, p_front: pf, p_plus: pp, added_front: z + 1.0, added_plus: z + 4.0 }
        }
    };
    Ok((next, step))
}

/// Iterates until both leading rates exceed the cap. Fails if that takes
/// more than `max_steps` steps.
pub fn phg_iterate(state: &PhgState, max_steps: usize) -> Result<(PhgState, Vec<PhgStep>)> {
    let mut s = state.clone();
    let mut steps = Vec::new();
    while !s.finished() {
        if steps.len() >= max_steps {
            return Err(Error::Solver(format!("phg iteration did not pass the cap in {max_steps} steps")));
        }
        let (n, st) = phg_iteration_step(&s)?;
        steps.push(st);
        s = n;
    }
    Ok((s, steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CAP: f64 = 12.0;

    fn arb_set() -> impl Strategy<Value = IndexSet> {
        prop::collection::vec((0u8..8, 0u8..4, 0usize..3), 0..4).prop_map(|g| {
            let pts: Vec<_> = g.iter().map(|&(z, q, k)| (z as f64 + q as f64 * 0.25, k)).collect();
            IndexSet::closure(&pts, CAP)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn operations_preserve_closure(a in arb_set(), b in arb_set()) {
            prop_assert!(a.is_closed());
            prop_assert!(a.union(&b).unwrap().is_closed());
            prop_assert!(a.ext_union(&b).unwrap().is_closed());
            prop_assert!(a.sum(&b).unwrap().is_closed());
            prop_assert!(a.shift(1.0, 1).is_closed());
            prop_assert!(a.remove_min().is_closed());
        }

        #[test]
        fn minimum_is_least(a in arb_set()) {
            let e = a.elements();
            match a.min() {
                Some(m) => {
                    prop_assert!(a.contains(m.0, m.1));
                    prop_assert!(e.iter().all(|&x| index_order(m, x) != Ordering::Greater));
                }
                None => prop_assert!(e.is_empty()),
            }
        }

        #[test]
        fn laws(a in arb_set(), b in arb_set(), c in arb_set()) {
            prop_assert_eq!(a.ext_union(&b).unwrap().elements(), b.ext_union(&a).unwrap().elements());
            prop_assert_eq!(a.sum(&b).unwrap().elements(), b.sum(&a).unwrap().elements());
            prop_assert_eq!(
                a.sum(&b).unwrap().sum(&c).unwrap().elements(),
                a.sum(&b.sum(&c).unwrap()).unwrap().elements()
            );
            let u = a.ext_union(&b).unwrap();
            prop_assert!(a.elements().iter().all(|&(z, k)| u.contains(z, k)));
            // min of a sum is the sum of minima
            if let (Some(x), Some(y)) = (a.min(), b.min()) {
                prop_assert_eq!(a.sum(&b).unwrap().min(), Some((x.0 + y.0, x.1 + y.1)));
            }
        }

        #[test]
        fn elements_match_membership(a in arb_set(), z in 0u8..12, q in 0u8..4, k in 0usize..6) {
            let z = z as f64 + q as f64 * 0.25;
            let listed = a.elements().iter().any(|e| e.1 == k && (e.0 - z).abs() < 1e-12);
            prop_assert_eq!(listed, a.contains(z, k));
        }
    }

    #[test]
    fn ext_union_adds_a_log() {
        let a = IndexSet::overline(3.0, 0, CAP);
        let u = a.ext_union(&a).unwrap();
        assert!(u.contains(3.0, 1) && !u.contains(3.0, 2));
        assert!(!a.union(&a).unwrap().contains(3.0, 1));
        let b = IndexSet::overline(3.5, 0, CAP);
        assert_eq!(a.ext_union(&b).unwrap(), a.union(&b).unwrap());
    }

    #[test]
    fn sum_and_shift() {
        let s = IndexSet::overline(2.0, 0, CAP).sum(&IndexSet::overline(1.0, 0, CAP)).unwrap();
        assert_eq!(s.min(), Some((3.0, 0)));
        let e = IndexSet::closure(&[(3.0, 1), (4.5, 0)], CAP);
        let sh = e.shift(2.0, 0);
        assert_eq!(sh.min(), Some((1.0, 1)));
        assert!(sh.contains(2.5, 0) && !sh.contains(0.5, 0));
        assert_eq!(e.shift(0.0, 1).elements().first(), Some(&(3.0, 0)));
        assert_eq!(IndexSet::overline(1.0, -1, CAP).min(), None);
    }

    #[test]
    fn explicit_elements_validated() {
        assert!(IndexSet::from_elements(&[(11.0, 0), (12.0, 0)], CAP).is_ok());
        assert!(IndexSet::from_elements(&[(11.0, 1), (12.0, 1), (12.0, 0)], CAP).is_err());
        let a = IndexSet::empty(CAP);
        assert!(matches!(a.union(&IndexSet::empty(10.0)), Err(Error::Cap(_, _))));
    }

    #[test]
    fn order_prefers_logs() {
        assert_eq!(index_order((3.0, 2), (3.0, 0)), Ordering::Less);
        assert_eq!(index_order((3.0, 0), (3.5, 4)), Ordering::Less);
        let e = IndexSet::closure(&[(3.0, 2), (3.0, 0)], CAP);
        assert_eq!(e.min(), Some((3.0, 2)));
    }

    #[test]
    fn equal_rates_solve_at_timelike_infinity() {
        let s = PhgState::seed(3.0, 3.0, CAP);
        let (n, step) = phg_iteration_step(&s).unwrap();
        assert_eq!(step.case, PhgCase::Plus);
        assert!(step.added_plus >= 6.0);
        assert!(n.plus.min().unwrap().0 >= 6.0);
        assert_eq!(n.leading_front(), Some((3.0, 0)));
    }

    #[test]
    fn front_case_improvements() {
        let s = PhgState::seed(2.0, 4.0, CAP);
        let (n, step) = phg_iteration_step(&s).unwrap();
        assert_eq!(step.case, PhgCase::Front);
        assert!(step.added_front >= 3.0 && step.added_plus - 2.0 >= 4.0);
        assert_eq!(n.leading_front(), Some((3.0, 0)));
    }

    fn check_steps(steps: &[PhgStep]) {
        for st in steps {
            match st.case {
                PhgCase::Plus => {
                    let p = st.p_plus.unwrap().0;
                    assert!(st.added_plus >= p + 3.0 && st.added_front >= p);
                    assert!(st.p_front.is_none_or(|f| f.0 >= p));
                }
                PhgCase::Front => {
                    let f = st.p_front.unwrap().0;
                    assert!(st.added_front >= f + 1.0 && st.added_plus >= f + 2.0);
                    assert!(st.p_plus.is_none_or(|p| f < p.0));
                }
            }
        }
    }

    #[test]
    fn iteration_terminates_from_all_seeds() {
        for pf in 1..=5 {
            for pp in 1..=5 {
                let (end, steps) = phg_iterate(&PhgState::seed(pf as f64, pp as f64, CAP), 10_000).unwrap();
                assert!(end.finished());
                check_steps(&steps);
            }
        }
    }

    #[test]
    fn logs_and_data_are_consumed() {
        let mut s = PhgState::seed(4.0, 3.0, 10.0);
        s.front = IndexSet::closure(&[(4.0, 2)], 10.0);
        s.data = IndexSet::closure(&[(1.5, 1)], 10.0);
        let (end, steps) = phg_iterate(&s, 10_000).unwrap();
        assert!(end.finished());
        check_steps(&steps);
        assert!(steps.iter().any(|st| st.p_plus == Some((2.5, 1))));
    }
}
