// SPDX-License-Identifier: Apache-2.0

pub mod activity;
pub mod estimators;
pub mod frontend;
pub mod golden;
pub mod learners;
pub mod liberty;
pub mod sog;
pub mod timing;
