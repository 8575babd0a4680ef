//! Issues and priority orders over them.
//!
//! Issues are identified by their position in the canonical order
//! (food, water, firewood). Every tie-break in the crate uses that index.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Canonical issue names, in canonical order.
pub const ISSUE_NAMES: [&str; 3] = ["food", "water", "firewood"];

/// Number of issues in the default set.
pub const DEFAULT_ISSUES: usize = ISSUE_NAMES.len();

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Issue(pub usize);

impl Issue {
    pub const FOOD: Issue = Issue(0);
    pub const WATER: Issue = Issue(1);
    pub const FIREWOOD: Issue = Issue(2);

    pub fn index(self) -> usize {
        self.0
    }

    /// Canonical name; issues beyond the default set are named `issueN`.
    pub fn name(self) -> String {
        ISSUE_NAMES
            .get(self.0)
            .map(|s| s.to_string())
            .unwrap_or_else(|| format!("issue{}", self.0))
    }

    pub fn all(m: usize) -> impl Iterator<Item = Issue> {
        (0..m).map(Issue)
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Issue {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_lowercase();
        if let Some(i) = ISSUE_NAMES.iter().position(|n| *n == lower) {
            return Ok(Issue(i));
        }
        lower
            .strip_prefix("issue")
            .and_then(|n| n.parse().ok())
            .map(Issue)
            .ok_or_else(|| Error::Input(format!("unknown issue {s:?}")))
    }
}

impl Serialize for Issue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for Issue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A permutation of all issues, highest priority first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PriorityOrder(Vec<Issue>);

impl PriorityOrder {
    pub fn new(order: Vec<Issue>) -> Result<Self> {
        let m = order.len();
        if m == 0 {
            return Err(Error::Input("empty priority order".into()));
        }
        let mut seen = vec![false; m];
        for issue in &order {
            if issue.0 >= m || seen[issue.0] {
                return Err(Error::Input(format!(
                    "priority order {:?} is not a permutation",
                    order.iter().map(|i| i.name()).collect::<Vec<_>>()
                )));
            }
            seen[issue.0] = true;
        }
        Ok(Self(order))
    }

    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().copied().map(Issue).collect())
    }

    /// Sorts issues by descending value; equal values keep canonical order.
    pub fn from_values(values: &[f64]) -> Self {
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        Self(idx.into_iter().map(Issue).collect())
    }

    pub fn canonical(m: usize) -> Self {
        Self(Issue::all(m).collect())
    }

    /// All m! orders in lexicographic order of issue indices.
    pub fn all_orders(m: usize) -> Vec<PriorityOrder> {
        fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<PriorityOrder>) {
            if prefix.len() == used.len() {
                out.push(PriorityOrder(prefix.iter().copied().map(Issue).collect()));
                return;
            }
            for i in 0..used.len() {
                if !used[i] {
                    used[i] = true;
                    prefix.push(i);
                    rec(prefix, used, out);
                    prefix.pop();
                    used[i] = false;
                }
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), &mut vec![false; m], &mut out);
        out
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn issues(&self) -> &[Issue] {
        &self.0
    }

    pub fn top(&self) -> Issue {
        self.0[0]
    }

    /// 0 for the highest priority issue.
    pub fn rank_of(&self, issue: Issue) -> usize {
        self.0
            .iter()
            .position(|&i| i == issue)
            .expect("issue belongs to the order")
    }

    pub fn prefers(&self, a: Issue, b: Issue) -> bool {
        self.rank_of(a) < self.rank_of(b)
    }

    pub fn reversed(&self) -> Self {
        Self(self.0.iter().rev().copied().collect())
    }

    /// Number of issue pairs ordered differently by the two orders.
    pub fn kendall_distance(&self, other: &PriorityOrder) -> Result<usize> {
        if self.len() != other.len() {
            return Err(Error::Argument(format!(
                "orders over {} and {} issues",
                self.len(),
                other.len()
            )));
        }
        let m = self.len();
        let mut d = 0;
        for a in 0..m {
            for b in (a + 1)..m {
                let (a, b) = (Issue(a), Issue(b));
                if self.prefers(a, b) != other.prefers(a, b) {
                    d += 1;
                }
            }
        }
        Ok(d)
    }

    pub fn names(&self) -> Vec<String> {
        self.0.iter().map(|i| i.name()).collect()
    }
}

impl fmt::Display for PriorityOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.names().join(" > "))
    }
}

impl Serialize for PriorityOrder {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PriorityOrder {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<Issue>::deserialize(d)?;
        PriorityOrder::new(v).map_err(serde::de::Error::custom)
    }
}
