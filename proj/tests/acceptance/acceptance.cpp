// Acceptance suite: one line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>

#include "coverify/corpus.hpp"
#include "coverify/executor.hpp"
#include "coverify/gateway.hpp"
#include "coverify/metrics.hpp"
#include "coverify/pipeline.hpp"
#include "coverify/verify.hpp"
#include "json.hpp"
#include "test_support.hpp"
#include "toy.hpp"

using namespace coverify;
namespace ct = coverify::testing;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Fraction of k-subsets of n samples (first c correct) containing a correct one.
double pass_at_k_by_enumeration(int n, int c, int k) {
  long hit = 0, total = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (__builtin_popcount(mask) != k) continue;
    ++total;
    if (mask & ((1u << c) - 1)) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

Verdict pass_at_k_oracle() {
  auto t0 = Clock::now();
  double worst = 0.0;
  int checked = 0;
  for (int n = 1; n <= 12; ++n)
    for (int c = 0; c <= n; ++c)
      for (int k = 1; k <= n; ++k) {
        worst = std::max(worst, std::abs(pass_at_k(n, c, k) - pass_at_k_by_enumeration(n, c, k)));
        ++checked;
      }
  double dt = seconds_since(t0);
  return {worst <= 1e-12 && dt < 5.0,
          std::to_string(checked) + " triples, max error " + std::to_string(worst) + ", " + std::to_string(dt) + " s"};
}

Verdict pass_at_k_edges() {
  int bad = 0, checked = 0;
  for (int n = 1; n <= 200; ++n)
    for (int k = 1; k <= n; ++k) {
      checked += 2;
      if (pass_at_k(n, n, k) != 1.0) ++bad;
      if (pass_at_k(n, 0, k) != 0.0) ++bad;
    }
  return {bad == 0, std::to_string(checked - bad) + "/" + std::to_string(checked) + " identities hold"};
}

std::string framed(const std::string& record) { return "=== CASE 1 ===\n" + record + "\n=== END 1 ===\n"; }

Verdict case_studies() {
  auto cases = nlohmann::json::parse(ct::read_file(ct::fixture_dir() / "transcripts/case_studies.json"));
  int matched = 0;
  for (const auto& c : cases) {
    auto x = parse_output(framed(c["source"].get<std::string>()));
    bool accept = false;
    bool diff_ok = true;
    if (c["target"].is_null()) {
      accept = false;
      diff_ok = classify_error(c["target_compile_error"].get<std::string>(), Phase::Compile) == ErrorType::Type5;
    } else {
      auto cmp = outputs_equal(x, parse_output(framed(c["target"].get<std::string>())));
      accept = cmp.equal;
      if (c.contains("difference"))
        diff_ok = cmp.first_difference.find(c["difference"].get<std::string>()) != std::string::npos;
    }
    if ((c["verdict"] == "accept") == accept && diff_ok) ++matched;
  }
  return {matched == static_cast<int>(cases.size()) && matched == 6,
          std::to_string(matched) + "/" + std::to_string(cases.size()) + " verdicts"};
}

Verdict classification() {
  auto dir = ct::fixture_dir() / "diagnostics";
  auto index = nlohmann::json::parse(ct::read_file(dir / "index.json"));
  int ok = 0;
  std::set<std::string> types;
  std::string misses;
  for (const auto& e : index) {
    auto want = *parse_error_type(e["type"].get<std::string>());
    auto got = classify_error(ct::read_file(dir / e["file"].get<std::string>()), *parse_phase(e["phase"].get<std::string>()));
    if (got == want)
      ++ok;
    else
      misses += " " + e["file"].get<std::string>();
    types.insert(e["type"].get<std::string>());
  }
  bool named = classify_error("error: identifier \"T\" is undefined", Phase::Compile) == ErrorType::Type5 &&
               classify_error("error: too few arguments to function 'void f(int, int)'", Phase::Compile) == ErrorType::Type2 &&
               classify_error("error: a host function call cannot be configured", Phase::Compile) == ErrorType::Type11;
  return {ok == static_cast<int>(index.size()) && types.size() == 11 && named,
          std::to_string(ok) + "/" + std::to_string(index.size()) + " fixtures, " + std::to_string(types.size()) +
              " types" + (misses.empty() ? "" : "; missed:" + misses)};
}

class ScriptedRunner final : public HarnessRunner {
 public:
  explicit ScriptedRunner(std::function<HarnessOutcome(const HarnessUnit&)> fn) : fn_(std::move(fn)) {}
  HarnessOutcome execute(const HarnessUnit& unit) override { return fn_(unit); }
  std::string describe() const override { return "scripted"; }

 private:
  std::function<HarnessOutcome(const HarnessUnit&)> fn_;
};

HarnessOutcome ran(const std::string& out, ExecStatus status = ExecStatus::Ok) {
  HarnessOutcome o;
  ExecutionResult r;
  r.phase = Phase::Run;
  r.status = status;
  r.stdout_text = out;
  r.exit_code = status == ExecStatus::Ok ? 0 : 1;
  o.run = r;
  return o;
}

std::string records(int n, const std::string& value) {
  std::string s;
  for (int i = 1; i <= n; ++i)
    s += "=== CASE " + std::to_string(i) + " ===\nReturn value: void Arguments after function call: ([ " + value +
         " ], 1)\n=== END " + std::to_string(i) + " ===\n";
  return s;
}

Verdict vt_conjunction() {
  const char* fa = "void f(float *v, int n) { for (int i = 0; i < n; i++) v[i] += 1; }";
  const char* fb = "void g(float *v, int n) { for (int i = 0; i < n; i++) v[i] *= 2; }";
  std::vector<FunctionUnit> corpus{make_unit(fa, Language::C, std::nullopt, "", "fa"),
                                   make_unit(fb, Language::C, std::nullopt, "", "fb")};
  std::map<std::string, TestSuite> suites;
  for (const auto& [id, name] : {std::pair{"fa", "f"}, std::pair{"fb", "g"}}) {
    auto& s = suites[id];
    s.function_id = id;
    for (int k = 1; k <= 5; ++k)
      s.cases.push_back({k, "float v" + std::to_string(k) + "[] = {1};\nwrapper(" + name + ", v" + std::to_string(k) + ", 1);"});
  }
  auto cand = [](const std::string& id, const std::string& body) {
    return TranslationCandidate{id, 0, Direction::C_to_CUDA, "__global__ void " + id + "_k(float *v, int n) { " + body + " }",
                                "void " + id + "_run(float *v, int n) { " + id + "_k<<<1, n>>>(v, n); }", ""};
  };
  std::map<std::string, std::vector<TranslationCandidate>> translations{
      {"fa", {cand("fa", "v[threadIdx.x] += 1;")}}, {"fb", {cand("fb", "v[threadIdx.x] *= 2;")}}};

  HarnessOutcome compile_fail;
  compile_fail.compile.status = ExecStatus::CompileError;
  compile_fail.compile.stderr_text = "error: expected ';' before '}' token";
  compile_fail.compile.error_type = ErrorType::Type4;
  std::vector<HarnessOutcome> y_sides{ran(records(5, "2")), ran(records(5, "7")), compile_fail,
                                      ran("", ExecStatus::Timeout), ran(records(2, "2") + "=== CASE 3 ===\n", ExecStatus::RuntimeError)};
  std::set<double> vts;
  bool four_of_five_zero = true;
  for (const auto& y : y_sides) {
    ScriptedRunner r([&](const HarnessUnit& u) {
      if (u.backend != Backend::NativeC) return y;
      return u.function_id == "fa" ? ran(records(4, "2") + "=== CASE 5 ===\n", ExecStatus::RuntimeError) : ran(records(5, "2"));
    });
    VerifyContext ctx;
    ctx.runner = &r;
    auto res = co_verify_corpus(corpus, Direction::C_to_CUDA, translations, suites, ctx);
    std::vector<std::pair<int, bool>> per;
    for (const auto& v : res.validity) per.emplace_back(v.n_cases, v.all_valid);
    four_of_five_zero = four_of_five_zero && res.validity.at(0).valid_cases == 4 && !res.validity.at(0).all_valid &&
                        vt_metric({per.at(0)}) == 0.0;
    vts.insert(vt_metric(per));
  }
  bool ok = four_of_five_zero && vts.size() == 1 && *vts.begin() == 0.5;
  return {ok, "4/5 function contributes 0, VT = " + std::to_string(*vts.begin()) + " over " +
                  std::to_string(y_sides.size()) + " translated-side variants"};
}

Verdict bleu_criterion() {
  std::vector<std::string> ref{"a", "b", "x", "d"};
  std::vector<std::string> cand{"a", "b", "c", "d"};
  // p1 = 3/4, p2 = 1/3, p3 = (0+1)/(2+1), p4 = (0+1)/(1+1), BP = 1.
  double oracle = std::exp((std::log(3.0 / 4) + std::log(1.0 / 3) + std::log(1.0 / 3) + std::log(1.0 / 2)) / 4);
  double got = bleu(cand, ref);
  bool identical = bleu(ref, ref) == 1.0 && bleu(cand, cand) == 1.0;
  return {identical && std::abs(got - oracle) <= 1e-9,
          "identical = 1, example " + std::to_string(got) + " vs oracle " + std::to_string(oracle)};
}

Verdict toy_iteration() {
  ct::TempDir a, b;
  // The replay path must not need a compiler: hide every executable.
  const char* old_path = std::getenv("PATH");
  std::string saved = old_path ? old_path : "";
  ::setenv("PATH", "/nonexistent", 1);
  auto t0 = Clock::now();
  IterationResult first, second;
  std::string error;
  try {
    first = ct::run_toy(ct::toy_config(a.path()));
    second = ct::run_toy(ct::toy_config(b.path(), 1));
  } catch (const std::exception& e) {
    error = e.what();
  }
  double dt = seconds_since(t0);
  ::setenv("PATH", saved.c_str(), 1);
  if (!error.empty()) return {false, "iteration failed: " + error};

  bool membership = ct::triplet_ids(first.s_i) == ct::toy_expected_s1();
  bool exports = first.training.translator.size() == first.s_i.size() && first.training.tester.size() == first.s_i.size() &&
                 first.report.translate_examples == 10 && first.report.tester_examples == 10;
  bool identical = true;
  for (const auto* name : {"s_i.jsonl", "rejections.jsonl", "translator.jsonl", "tester.jsonl", "completion.jsonl"}) {
    auto pa = a.path() / "iter_1" / name;
    auto pb = b.path() / "iter_1" / name;
    if (!std::filesystem::exists(pa) || ct::read_file(pa) != ct::read_file(pb)) identical = false;
  }
  // Reports differ only in wall time and output paths.
  auto report = [](const std::filesystem::path& dir) {
    auto j = nlohmann::json::parse(ct::read_file(dir / "iter_1" / "report.json"));
    j.erase("elapsed");
    j.erase("files");
    return j;
  };
  if (report(a.path()) != report(b.path())) identical = false;
  return {membership && exports && identical && dt < 60.0,
          std::to_string(first.s_i.size()) + " triplets (expected " + std::to_string(ct::toy_expected_s1().size()) +
              "), exports " + std::to_string(first.training.translator.size()) + "/" +
              std::to_string(first.training.tester.size()) + ", rerun " + (identical ? "byte-identical" : "differs") +
              ", " + std::to_string(dt) + " s for two runs"};
}

Verdict add_100_split() {
  std::string raw =
      "[INPUTS]\n//Input case 1:\nint data1[] = {0};\nadd_100(1, data1);\n\n//Input case 2:\nint data2[] = {-100};\n"
      "add_100(1, data2);\n\n//Input case 3:\nint data3[] = {1, 2, 3};\nadd_100(3, data3);\n\n//Input case 4:\n"
      "int data4[] = {INT_MAX - 100};\nadd_100(1, data4);\n\n//Input case 5:\nint data5[] = {-50, 0, 50};\n"
      "add_100(3, data5);\n[/INPUTS]\n";
  auto body = extract_tagged(raw, "[INPUTS]", "[/INPUTS]");
  auto suite = split_test_cases(body, "add_100", 5, {"add_100"});
  bool ok = suite.cases.size() == 5;
  for (int k = 0; ok && k < 5; ++k) ok = suite.cases[k].index == k + 1;
  ok = ok && suite.cases[0].snippet == "int data1[] = {0};\nwrapper(add_100, 1, data1);";
  auto serialized = serialize_suite(suite);
  for (int k = 1; ok && k <= 5; ++k) ok = serialized.find("//Input case " + std::to_string(k) + ":") != std::string::npos;
  return {ok, std::to_string(suite.cases.size()) + " cases"};
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"pass@k oracle equivalence (n <= 12, tol 1e-12, < 5 s)", pass_at_k_oracle},
      {"pass@k edge identities", pass_at_k_edges},
      {"output comparison on case-study transcripts (6/6)", case_studies},
      {"error classification on diagnostics fixtures (100%)", classification},
      {"VT conjunction semantics", vt_conjunction},
      {"BLEU identical and hand-computed oracle (1e-9)", bleu_criterion},
      {"end-to-end mock iteration on the toy corpus", toy_iteration},
      {"tag extraction and test splitting (add_100, 5 cases)", add_100_split},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::cout << (v.pass ? "[PASS] " : "[FAIL] ") << name << " -- " << v.detail << '\n';
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
