//! Repeated posted-price auctions against a buyer who knows the seller's
//! algorithm and maximizes discounted surplus.
//!
//! Pricing algorithms are lazy binary trees ([`PricingMachine`]); buyers are
//! solved exactly by backward induction ([`buyer`]); [`regret`] and
//! [`bounds`] turn the resulting plays into regret figures and compare them
//! with closed-form bounds.

// `!(x < y)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod bounds;
pub mod buyer;
pub mod discounts;
pub mod error;
pub mod laws;
pub mod price;
pub mod pricing;
pub mod regret;

pub use algorithms::{
    AlgorithmKind, AlgorithmSpec, BinarySearch, ConstantPrice, ExploitRate, Machine, PrePrrfes,
    Prrfes, PrrfesParams,
};
pub use buyer::{OptimalPlay, OracleOptions, PlayRecord, TieBreak};
pub use discounts::{DiscountSequence, DiscountSpec};
pub use error::{LabError, Result};
pub use price::Price;
pub use pricing::{Decision, DecisionPath, PricingMachine, Verdict};
pub use regret::{BoundClaim, OracleKind, RegretReport};
