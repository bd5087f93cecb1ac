//! Tuple-count cost model: expected total tuples processed by a plan as a
//! function of selectivity `s` and filler fraction `f`, in exact rational
//! arithmetic (totals reach 10^12 and beyond).
//!
//! The model assumes a trimmer at every non-scan operator, the root
//! included: an operator materializing `N` tuples hands `T + f * (N - T)`
//! upward, with `T = s * N`. At `f = 1` nothing is trimmed (fully
//! oblivious); at `f = 0` every size is the true size (fully revealed).
//! Resizer nodes present in the plan are ignored — `f` is the model's own
//! sweep axis.

use crate::error::{Error, Result};
use crate::plan::{NodeKind, PlanNode};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;

pub type Rational = BigRational;

/// Exact rational from a plain decimal string ("0.1", "1", ".25").
pub fn parse_ratio(text: &str) -> Result<Rational> {
    let bad = || Error::InvalidParameter(format!("not a decimal number: `{text}`"));
    let (sign, digits) = match text.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, text),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let joined = format!("{int_part}{frac_part}");
    let numer: BigInt = joined.parse().map_err(|_| bad())?;
    let denom = BigInt::from(10u32).pow(frac_part.len() as u32);
    Ok(Rational::new(BigInt::from(sign) * numer, denom))
}

/// Format: plain integer when integral, `numer/denom` otherwise.
pub fn format_ratio(value: &Rational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn ratio_to_u128(value: &Rational) -> Option<u128> {
    if value.denom().is_one() {
        value.numer().to_u128()
    } else {
        None
    }
}

/// Total expected tuples processed: the sum over all operators of the size
/// each hands to its consumer.
pub fn cost_model(
    plan: &PlanNode,
    table_sizes: &BTreeMap<String, u64>,
    s: &Rational,
    f: &Rational,
) -> Result<Rational> {
    if !(s > &Rational::zero() && s <= &Rational::one()) {
        return Err(Error::InvalidParameter(format!(
            "selectivity must be in (0, 1], got {s}"
        )));
    }
    if f.is_negative() || f > &Rational::one() {
        return Err(Error::InvalidParameter(format!(
            "filler fraction must be in [0, 1], got {f}"
        )));
    }
    let mut total = Rational::zero();
    cost_node(plan, table_sizes, s, f, &mut total)?;
    Ok(total)
}

fn cost_node(
    node: &PlanNode,
    table_sizes: &BTreeMap<String, u64>,
    s: &Rational,
    f: &Rational,
    total: &mut Rational,
) -> Result<Rational> {
    let effective = match node.kind() {
        NodeKind::Scan { table } => {
            let size = table_sizes
                .get(table)
                .ok_or_else(|| Error::UnknownTable(table.clone()))?;
            let size = Rational::from(BigInt::from(*size));
            *total += &size;
            size
        }
        NodeKind::Resizer(_) => {
            // Model-level trimming is applied uniformly below; plan resizers
            // carry no extra cost weight of their own.
            return cost_node(&node.children()[0], table_sizes, s, f, total);
        }
        NodeKind::Join { .. } => {
            let left = cost_node(&node.children()[0], table_sizes, s, f, total)?;
            let right = cost_node(&node.children()[1], table_sizes, s, f, total)?;
            let n = left * right;
            let effective = trimmed(&n, s, f);
            *total += &effective;
            effective
        }
        _ => {
            let n = cost_node(&node.children()[0], table_sizes, s, f, total)?;
            let effective = trimmed(&n, s, f);
            *total += &effective;
            effective
        }
    };
    Ok(effective)
}

/// `T + f * (N - T)` with `T = s * N`.
fn trimmed(n: &Rational, s: &Rational, f: &Rational) -> Rational {
    let t = s * n;
    &t + f * (n - &t)
}
