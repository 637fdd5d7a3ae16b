// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace axllm {

/// Rejected input: bad shape, out-of-range code, malformed file, bad config.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A simulator invariant was broken (queue overflow, same-address RC access,
/// timing/functional counter disagreement). Always a bug, never modeled behavior.
class SimulationError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace axllm
