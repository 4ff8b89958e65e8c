// Copyright (c) the c4sim authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace c4sim {

// Rejected inputs: bad configs, inconsistent topology parameters, malformed
// traces. CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Failures during execution (unreachable routes, probe coverage, allocation
// failure). CLI maps this to exit code 3.
class SimError : public std::runtime_error {
 public:
  explicit SimError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace c4sim
