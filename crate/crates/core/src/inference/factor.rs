use alloc::vec;
use alloc::vec::Vec;

/// Table over a sorted set of variable indices, last variable fastest.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Factor {
    pub vars: Vec<usize>,
    pub cards: Vec<usize>,
    pub values: Vec<f64>,
}

fn strides(cards: &[usize]) -> Vec<usize> {
    let mut s = vec![1; cards.len()];
    for i in (0..cards.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * cards[i + 1];
    }
    s
}

impl Factor {
    pub fn scalar(value: f64) -> Self {
        Factor { vars: Vec::new(), cards: Vec::new(), values: vec![value] }
    }

    /// Builds the factor `P(child | parents)` from CPT rows.
    pub fn from_cpt(
        child: usize,
        child_card: usize,
        parents: &[usize],
        parent_cards: &[usize],
        rows: &[Vec<f64>],
    ) -> Self {
        // natural layout: parents in given order then child
        let mut scope: Vec<usize> = parents.to_vec();
        scope.push(child);
        let mut cards: Vec<usize> = parent_cards.to_vec();
        cards.push(child_card);
        let mut natural = Vec::with_capacity(rows.len() * child_card);
        for row in rows {
            natural.extend_from_slice(row);
        }
        Factor::permuted(scope, cards, natural)
    }

    /// Reorders a table given in `scope` order into sorted variable order.
    fn permuted(scope: Vec<usize>, cards: Vec<usize>, values: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..scope.len()).collect();
        order.sort_by_key(|&i| scope[i]);
        let vars: Vec<usize> = order.iter().map(|&i| scope[i]).collect();
        let sorted_cards: Vec<usize> = order.iter().map(|&i| cards[i]).collect();
        if order.iter().enumerate().all(|(k, &i)| k == i) {
            return Factor { vars, cards: sorted_cards, values };
        }
        let src_strides = strides(&cards);
        let mut out = vec![0.0; values.len()];
        let mut assign = vec![0usize; vars.len()];
        for slot in out.iter_mut() {
            let mut src = 0;
            for (k, &i) in order.iter().enumerate() {
                src += assign[k] * src_strides[i];
            }
            *slot = values[src];
            increment(&mut assign, &sorted_cards);
        }
        Factor { vars, cards: sorted_cards, values: out }
    }

    /// Fixes `var` to `state` and drops it from the scope.
    pub fn reduce(&self, var: usize, state: usize) -> Factor {
        let Some(pos) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let st = strides(&self.cards);
        let mut vars = self.vars.clone();
        vars.remove(pos);
        let mut cards = self.cards.clone();
        cards.remove(pos);
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut assign = vec![0usize; vars.len()];
        for _ in 0..size {
            let mut src = state * st[pos];
            for (k, &a) in assign.iter().enumerate() {
                let orig = if k < pos { k } else { k + 1 };
                src += a * st[orig];
            }
            values.push(self.values[src]);
            increment(&mut assign, &cards);
        }
        Factor { vars, cards, values }
    }

    pub fn product(&self, other: &Factor) -> Factor {
        let mut vars: Vec<usize> = self.vars.clone();
        for &v in &other.vars {
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        vars.sort_unstable();
        let cards: Vec<usize> = vars
            .iter()
            .map(|v| {
                self.vars
                    .iter()
                    .position(|x| x == v)
                    .map(|i| self.cards[i])
                    .unwrap_or_else(|| other.cards[other.vars.iter().position(|x| x == v).unwrap()])
            })
            .collect();
        let map = |f: &Factor| -> Vec<usize> {
            let st = strides(&f.cards);
            vars.iter().map(|v| f.vars.iter().position(|x| x == v).map(|i| st[i]).unwrap_or(0)).collect()
        };
        let (sa, sb) = (map(self), map(other));
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut assign = vec![0usize; vars.len()];
        for _ in 0..size {
            let (mut ia, mut ib) = (0, 0);
            for (k, &a) in assign.iter().enumerate() {
                ia += a * sa[k];
                ib += a * sb[k];
            }
            values.push(self.values[ia] * other.values[ib]);
            increment(&mut assign, &cards);
        }
        Factor { vars, cards, values }
    }

    pub fn sum_out(&self, var: usize) -> Factor {
        let Some(pos) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let mut vars = self.vars.clone();
        vars.remove(pos);
        let mut cards = self.cards.clone();
        let card = cards.remove(pos);
        let inner: usize = self.cards[pos + 1..].iter().product();
        let outer: usize = self.cards[..pos].iter().product();
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for s in 0..card {
                let base = (o * card + s) * inner;
                for i in 0..inner {
                    values[o * inner + i] += self.values[base + i];
                }
            }
        }
        Factor { vars, cards, values }
    }
}

fn increment(assign: &mut [usize], cards: &[usize]) {
    for k in (0..assign.len()).rev() {
        assign[k] += 1;
        if assign[k] < cards[k] {
            return;
        }
        assign[k] = 0;
    }
}
