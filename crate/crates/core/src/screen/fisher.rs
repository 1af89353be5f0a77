//! Fisher's exact test on 2x2 tables.

use serde::{Deserialize, Serialize};

/// Relative slack when comparing point probabilities against the observed
/// table, so float noise does not split genuinely tied tables.
pub const TIE_SLACK: f64 = 1e-7;

/// 2x2 counts laid out as
///
/// ```text
///               label 0   label 1
/// r_dis > 0        a         b
/// r_dis <= 0       c         d
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        Self { a, b, c, d }
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    /// True when a row or column sum is zero; only one table has these margins.
    pub fn is_degenerate(&self) -> bool {
        let Self { a, b, c, d } = *self;
        a + b == 0 || c + d == 0 || a + c == 0 || b + d == 0
    }

    pub fn swap_rows(&self) -> Self {
        Self::new(self.c, self.d, self.a, self.b)
    }

    pub fn swap_columns(&self) -> Self {
        Self::new(self.b, self.a, self.d, self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherOutcome {
    pub p_value: f64,
    /// A margin was empty; `p_value` is 1 by convention.
    pub degenerate: bool,
}

/// Cache of `ln(n!)`.
#[derive(Debug, Clone)]
pub struct LogFactorials {
    table: Vec<f64>,
}

impl LogFactorials {
    pub fn new(max_n: usize) -> Self {
        let mut table = Vec::with_capacity(max_n + 1);
        table.push(0.0);
        let mut acc = 0.0;
        for i in 1..=max_n {
            acc += (i as f64).ln();
            table.push(acc);
        }
        Self { table }
    }

    #[inline]
    pub fn get(&self, n: u64) -> f64 {
        self.table[n as usize]
    }

    pub fn max_n(&self) -> usize {
        self.table.len() - 1
    }

    /// `ln` of the hypergeometric probability of `t` given its margins.
    pub fn log_point_probability(&self, t: &ContingencyTable) -> f64 {
        let ContingencyTable { a, b, c, d } = *t;
        self.get(a + b) + self.get(c + d) + self.get(a + c) + self.get(b + d)
            - self.get(a)
            - self.get(b)
            - self.get(c)
            - self.get(d)
            - self.get(a + b + c + d)
    }

    pub fn point_probability(&self, t: &ContingencyTable) -> f64 {
        self.log_point_probability(t).exp()
    }

    /// Two-sided exact p-value: total probability of every table with the
    /// observed margins that is no more likely than the observed one.
    pub fn two_sided(&self, t: &ContingencyTable) -> FisherOutcome {
        if t.is_degenerate() {
            return FisherOutcome {
                p_value: 1.0,
                degenerate: true,
            };
        }
        let ContingencyTable { a, b, c, d } = *t;
        let (row1, row2, col1) = (a + b, c + d, a + c);
        let base = self.get(row1) + self.get(row2) + self.get(col1) + self.get(b + d)
            - self.get(a + b + c + d);
        let log_p = |x: u64| {
            base - self.get(x) - self.get(row1 - x) - self.get(col1 - x) - self.get(row2 + x - col1)
        };
        let cutoff = log_p(a) + TIE_SLACK.ln_1p();
        let lo = col1.saturating_sub(row2);
        let hi = row1.min(col1);
        let p: f64 = (lo..=hi)
            .map(log_p)
            .filter(|&lp| lp <= cutoff)
            .map(f64::exp)
            .sum();
        FisherOutcome {
            p_value: p.clamp(0.0, 1.0),
            degenerate: false,
        }
    }
}

/// Hypergeometric probability of `t` given its margins.
pub fn fisher_point_probability(t: &ContingencyTable) -> f64 {
    LogFactorials::new(t.total() as usize).point_probability(t)
}

/// Two-sided Fisher's exact test.
pub fn fisher_exact_two_sided(t: &ContingencyTable) -> FisherOutcome {
    LogFactorials::new(t.total() as usize).two_sided(t)
}
