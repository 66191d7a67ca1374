#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "coverify/config.hpp"
#include "coverify/pipeline.hpp"
#include "test_support.hpp"

namespace coverify::testing {

// Hand evaluation of the canned toy fixture (one sample per function).
// Translations that are functionally correct:
inline const std::set<std::string> kToyCorrectTranslations{"fn01", "fn02", "fn03", "fn04", "fn05", "fn06",
                                                           "fn08", "fn09", "fn11", "fn13", "fn16", "fn18"};
// Functions whose canned suite is valid on the source program:
inline const std::set<std::string> kToyValidSuites{"fn01", "fn02", "fn03", "fn05", "fn06", "fn07", "fn08", "fn10",
                                                   "fn11", "fn12", "fn13", "fn14", "fn16", "fn17", "fn18", "fn20"};

inline std::set<std::string> toy_expected_s1() {
  std::set<std::string> out;
  std::set_intersection(kToyCorrectTranslations.begin(), kToyCorrectTranslations.end(), kToyValidSuites.begin(),
                        kToyValidSuites.end(), std::inserter(out, out.end()));
  std::set<std::string> ids;
  for (const auto& f : out) ids.insert(f + "#0");
  return ids;
}

inline PipelineConfig toy_config(const std::filesystem::path& output_dir, int workers = 4) {
  auto cfg = load_config(fixture_dir() / "toy/config.yaml");
  cfg.output_dir = output_dir;
  cfg.workers = workers;
  return cfg;
}

inline IterationResult run_toy(const PipelineConfig& cfg) {
  Pipeline p(cfg, make_services(cfg, true));
  return p.run_iteration(p.load_corpus());
}

inline std::set<std::string> triplet_ids(const std::vector<VerifiedTriplet>& s) {
  std::set<std::string> ids;
  for (const auto& t : s) ids.insert(t.id());
  return ids;
}

}  // namespace coverify::testing
