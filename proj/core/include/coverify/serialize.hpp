#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "coverify/corpus.hpp"
#include "coverify/errors.hpp"
#include "coverify/executor.hpp"
#include "coverify/gateway.hpp"
#include "coverify/metrics.hpp"
#include "coverify/verify.hpp"

namespace coverify {

// One-line JSON encodings. Decoders throw ParseError carrying `line`.

std::string unit_to_json(const FunctionUnit& unit);
FunctionUnit unit_from_json(std::string_view text, std::size_t line = 0);

std::string suite_to_json(const TestSuite& suite);
TestSuite suite_from_json(std::string_view text, std::size_t line = 0);

std::string candidate_to_json(const TranslationCandidate& candidate);
TranslationCandidate candidate_from_json(std::string_view text, std::size_t line = 0);

std::string rejection_to_json(const Rejection& rejection);
Rejection rejection_from_json(std::string_view text, std::size_t line = 0);

std::string triplet_to_json(const VerifiedTriplet& triplet);
VerifiedTriplet triplet_from_json(std::string_view text, std::size_t line = 0);

std::string outcome_to_json(const HarnessOutcome& outcome);
HarnessOutcome outcome_from_json(std::string_view text, std::size_t line = 0);

/// Pretty-printed JSON object.
std::string metrics_to_json(const MetricsReport& report);

template <class T, class Encode>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& items, Encode encode) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& item : items) out << encode(item) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

template <class Decode>
auto read_jsonl(const std::filesystem::path& path, Decode decode)
    -> std::vector<decltype(decode(std::string_view{}, std::size_t{}))> {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<decltype(decode(std::string_view{}, std::size_t{}))> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    items.push_back(decode(line, lineno));
  }
  return items;
}

}  // namespace coverify
