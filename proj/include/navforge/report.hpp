#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "navforge/json.hpp"

namespace navforge {

struct Mismatch {
  std::string sample_id;
  std::string reason;
};

// Outcome of re-deriving sample labels from their source episodes.
struct VerifyReport {
  std::string task;
  std::size_t checked = 0;
  std::vector<Mismatch> mismatches;
  std::map<std::string, std::map<std::string, std::size_t>> histograms;

  bool ok() const { return mismatches.empty(); }
  void count(const std::string& histogram, const std::string& bin) { ++histograms[histogram][bin]; }
  void merge(const VerifyReport& other);

  Json to_json() const;
};

}  // namespace navforge
