#include "coverify/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "coverify/lexer.hpp"

namespace coverify {

namespace {

constexpr std::string_view kErrorTypeNames[kErrorTypeCount] = {
    "Type1", "Type2", "Type3", "Type4",  "Type5",  "Type6",
    "Type7", "Type8", "Type9", "Type10", "Type11", "unknown"};

using Ngram = std::vector<std::string>;

std::map<Ngram, int> ngram_counts(const std::vector<std::string>& toks, int n) {
  std::map<Ngram, int> counts;
  if (static_cast<int>(toks.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i)
    ++counts[Ngram(toks.begin() + i, toks.begin() + i + n)];
  return counts;
}

// Matched and total (possibly weighted) candidate n-grams for one order.
struct OrderStats {
  double matched = 0;
  double total = 0;
};

OrderStats order_stats(const std::vector<std::string>& cand,
                       const std::vector<std::string>& ref, int n,
                       double keyword_weight) {
  OrderStats st;
  auto cand_counts = ngram_counts(cand, n);
  auto ref_counts = ngram_counts(ref, n);
  for (const auto& [gram, count] : cand_counts) {
    double w = 1.0;
    if (n == 1 && lex::is_keyword(gram[0])) w = keyword_weight;
    auto it = ref_counts.find(gram);
    int clipped = it == ref_counts.end() ? 0 : std::min(count, it->second);
    st.matched += w * clipped;
    st.total += w * count;
  }
  return st;
}

double combine(const std::vector<OrderStats>& orders, std::size_t cand_len,
               std::size_t ref_len) {
  if (cand_len == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t k = 0; k < orders.size(); ++k) {
    double m = orders[k].matched;
    double t = orders[k].total;
    double p;
    if (k == 0) {
      if (m == 0) return 0.0;
      p = m / t;
    } else if (m == 0) {
      p = 1.0 / (t + 1.0);
    } else {
      p = m / t;
    }
    log_sum += std::log(p);
  }
  double bp = cand_len >= ref_len
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(ref_len) / cand_len);
  return bp * std::exp(log_sum / static_cast<double>(orders.size()));
}

double bleu_impl(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
                 double keyword_weight, int max_n) {
  if (ref.empty()) throw std::invalid_argument("BLEU reference is empty");
  if (max_n < 1) throw std::invalid_argument("BLEU max_n must be >= 1");
  std::vector<OrderStats> orders;
  for (int n = 1; n <= max_n; ++n) orders.push_back(order_stats(cand, ref, n, keyword_weight));
  return combine(orders, cand.size(), ref.size());
}

}  // namespace

std::string_view to_string(ErrorType type) noexcept {
  return kErrorTypeNames[static_cast<int>(type)];
}

std::optional<ErrorType> parse_error_type(std::string_view text) noexcept {
  for (int i = 0; i < kErrorTypeCount; ++i)
    if (kErrorTypeNames[i] == text) return static_cast<ErrorType>(i);
  return std::nullopt;
}

double pass_at_k(int n, int c, int k) {
  if (n < 0 || c < 0 || k < 0) throw std::invalid_argument("pass@k inputs must be non-negative");
  if (k < 1 || k > n) throw std::invalid_argument("pass@k requires 1 <= k <= n");
  if (c > n) throw std::invalid_argument("pass@k requires c <= n");
  if (n - c < k) return 1.0;
  double prod = 1.0;
  for (int i = n - c + 1; i <= n; ++i) prod *= 1.0 - static_cast<double>(k) / i;
  return 1.0 - prod;
}

double aggregate_pass_at_k(const std::vector<SampleOutcome>& outcomes, int k) {
  if (outcomes.empty()) throw std::invalid_argument("pass@k over no problems");
  double sum = 0.0;
  for (const auto& o : outcomes) {
    if (o.n < k)
      throw std::invalid_argument("problem '" + o.problem_id + "' has n=" +
                                  std::to_string(o.n) + " < k=" + std::to_string(k));
    sum += pass_at_k(o.n, o.c, k);
  }
  return sum / static_cast<double>(outcomes.size());
}

double cpass(const std::vector<SampleOutcome>& outcomes) {
  long ok = 0;
  long total = 0;
  for (const auto& o : outcomes) {
    ok += o.compile_ok;
    total += o.n;
  }
  if (total == 0) throw std::invalid_argument("CPass over no samples");
  return static_cast<double>(ok) / static_cast<double>(total);
}

std::vector<std::string> code_tokenize(std::string_view source) {
  std::vector<std::string> out;
  for (auto& t : lex::tokenize(source)) out.push_back(std::move(t.text));
  return out;
}

double bleu(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
            int max_n) {
  return bleu_impl(candidate, reference, 1.0, max_n);
}

double corpus_bleu(
    const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>& pairs,
    int max_n) {
  if (pairs.empty()) throw std::invalid_argument("corpus BLEU over no pairs");
  std::vector<OrderStats> orders(max_n);
  std::size_t cand_len = 0;
  std::size_t ref_len = 0;
  for (const auto& [cand, ref] : pairs) {
    if (ref.empty()) throw std::invalid_argument("BLEU reference is empty");
    for (int n = 1; n <= max_n; ++n) {
      auto st = order_stats(cand, ref, n, 1.0);
      orders[n - 1].matched += st.matched;
      orders[n - 1].total += st.total;
    }
    cand_len += cand.size();
    ref_len += ref.size();
  }
  return combine(orders, cand_len, ref_len);
}

double weighted_ngram_bleu(const std::vector<std::string>& candidate,
                           const std::vector<std::string>& reference, double keyword_weight,
                           int max_n) {
  return bleu_impl(candidate, reference, keyword_weight, max_n);
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("pearson: length mismatch");
  if (xs.size() < 2) throw std::invalid_argument("pearson: need at least two points");
  const double n = static_cast<double>(xs.size());
  double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double dx = xs[i] - mx;
    double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw std::invalid_argument("pearson: constant vector");
  double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

ErrorHistogram empty_histogram() {
  ErrorHistogram h;
  for (int i = 0; i < kErrorTypeCount; ++i) h[static_cast<ErrorType>(i)] = 0;
  return h;
}

ErrorHistogram error_histogram(const std::vector<std::optional<ErrorType>>& types) {
  auto h = empty_histogram();
  for (const auto& t : types) ++h[t.value_or(ErrorType::Unknown)];
  return h;
}

}  // namespace coverify
