#pragma once

#include <random>
#include <stdexcept>
#include <string>

namespace ragaseq {

/// Raised for contract violations and malformed inputs anywhere in the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

}  // namespace ragaseq
