#include "navforge/report.hpp"

namespace navforge {

void VerifyReport::merge(const VerifyReport& other) {
  checked += other.checked;
  mismatches.insert(mismatches.end(), other.mismatches.begin(), other.mismatches.end());
  for (const auto& [name, bins] : other.histograms) {
    for (const auto& [bin, n] : bins) histograms[name][bin] += n;
  }
}

Json VerifyReport::to_json() const {
  Json list = Json::array();
  for (const Mismatch& m : mismatches) {
    list.push_back(Json{{"sample_id", m.sample_id}, {"reason", m.reason}});
  }
  Json hist = Json::object();
  for (const auto& [name, bins] : histograms) {
    Json h = Json::object();
    for (const auto& [bin, n] : bins) h[bin] = n;
    hist[name] = std::move(h);
  }
  return Json{{"task", task},
              {"checked", checked},
              {"mismatch_count", mismatches.size()},
              {"mismatches", std::move(list)},
              {"histograms", std::move(hist)}};
}

}  // namespace navforge
