#include "coverify/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "coverify/errors.hpp"
#include "coverify/pipeline.hpp"
#include "coverify/serialize.hpp"

namespace coverify {

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::string config;
  bool mock = false;
  std::string backend;
  bool keep_scratch = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool split_by_direction = false;
  std::string output_dir;
  std::string log_level = "info";
  std::string record_transcripts;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw IoError("cannot write " + path.string());
}

Direction direction_arg(const std::string& text) {
  auto d = parse_direction(text);
  if (!d) throw ConfigError("unknown direction '" + text + "' (C_to_CUDA or CUDA_to_C)");
  return *d;
}

PipelineConfig load(const GlobalOptions& g) {
  PipelineConfig cfg = g.config.empty() ? parse_config("", fs::current_path()) : load_config(g.config);
  if (!g.backend.empty()) {
    auto b = parse_backend(g.backend);
    if (!b) throw ConfigError("unknown backend '" + g.backend + "' (nvcc or cuda_shim)");
    cfg.set_cuda_backend(*b);
  }
  if (!g.output_dir.empty()) cfg.output_dir = fs::absolute(g.output_dir);
  if (g.keep_scratch) cfg.keep_scratch = true;
  if (g.seed) cfg.seed = *g.seed;
  if (g.workers) cfg.workers = *g.workers;
  if (g.split_by_direction) cfg.export_options.split_by_direction = true;
  cfg.validate();
  return cfg;
}

/// Loaded config plus the services built from it.
struct Session {
  PipelineConfig config;
  Services services;
  std::unique_ptr<Pipeline> pipeline;
  fs::path record_path;

  explicit Session(const GlobalOptions& g) : config(load(g)), record_path(g.record_transcripts) {
    services = make_services(config, g.mock, !record_path.empty());
    pipeline = std::make_unique<Pipeline>(config, services);
  }

  ~Session() {
    if (record_path.empty()) return;
    if (auto rec = std::dynamic_pointer_cast<RecordingRunner>(services.runner)) {
      try {
        rec->save(record_path);
      } catch (const std::exception& e) {
        spdlog::error("saving transcripts: {}", e.what());
      }
    }
  }
};

const FunctionUnit& find_function(const std::vector<FunctionUnit>& corpus, const std::string& id) {
  for (const auto& fn : corpus)
    if (fn.id == id || fn.name == id) return fn;
  throw ConfigError("function '" + id + "' is not in the corpus");
}

std::vector<FunctionUnit> load_corpus(Session& s, const std::string& override_path) {
  if (!override_path.empty()) s.config.corpus = override_path;
  Pipeline p(s.config, s.services);
  return p.load_corpus();
}

int cmd_ingest(const GlobalOptions& g, const std::string& input, const std::string& language,
               const std::string& output) {
  std::optional<Language> lang;
  if (!language.empty()) {
    lang = parse_language(language);
    if (!lang) throw ConfigError("unknown language '" + language + "' (c or cuda)");
  }
  fs::path out = output;
  if (out.empty()) out = load(g).output_dir / "corpus.jsonl";
  auto result = ingest(input, lang);
  for (const auto& r : result.rejects) spdlog::warn("{}: {}", r.location, r.reason);
  write_corpus_jsonl(out, result.units);
  std::cout << "ingested " << result.units.size() << " units, " << result.rejects.size() << " rejected, "
            << result.duplicates << " duplicates, " << result.filtered << " filtered -> " << out.string() << '\n';
  return result.units.empty() && !result.rejects.empty() ? kExitFailure : kExitOk;
}

int cmd_gen_wrappers(const GlobalOptions& g, const std::string& input, const std::string& output) {
  Session s(g);
  auto corpus = load_corpus(s, input);
  int added = s.pipeline->generate_wrappers(corpus);
  fs::path out = output.empty() ? s.config.output_dir / "corpus.wrapped.jsonl" : fs::path(output);
  write_corpus_jsonl(out, corpus);
  int missing = 0;
  for (const auto& fn : corpus)
    if (fn.language == Language::CUDA && !fn.wrapper_source) ++missing;
  std::cout << added << " wrappers added, " << missing << " kernels without wrapper -> " << out.string() << '\n';
  return missing ? kExitFailure : kExitOk;
}

int cmd_translate(const GlobalOptions& g, const std::string& id, const std::string& direction,
                  std::optional<int> n) {
  Session s(g);
  auto corpus = s.pipeline->load_corpus();
  const auto& fn = find_function(corpus, id);
  Direction d = direction.empty() ? direction_from(fn.language) : direction_arg(direction);
  if (source_language(d) != fn.language) throw ConfigError("direction does not match the function language");
  if (fn.language == Language::CUDA && !fn.wrapper_source) s.pipeline->generate_wrappers(corpus);
  auto candidates = s.pipeline->translate(find_function(corpus, id), d, n);
  int ok = 0;
  for (const auto& c : candidates) {
    std::cout << candidate_to_json(c) << '\n';
    ok += c.source ? 1 : 0;
  }
  return ok ? kExitOk : kExitFailure;
}

int cmd_gen_tests(const GlobalOptions& g, const std::string& id) {
  Session s(g);
  auto corpus = s.pipeline->load_corpus();
  std::string error;
  auto suite = s.pipeline->generate_tests(find_function(corpus, id), &error);
  if (!suite) {
    std::cerr << "no test suite: " << error << '\n';
    return kExitFailure;
  }
  std::cout << serialize_suite(*suite);
  return kExitOk;
}

struct VerifyFiles {
  std::string source, source_wrapper, translation, translation_wrapper, tests, direction;
};

int cmd_verify_files(const GlobalOptions& g, const VerifyFiles& f) {
  auto cfg = load(g);
  if (f.direction.empty()) throw ConfigError("verify: --direction is required with --source");
  if (f.translation.empty() || f.tests.empty())
    throw ConfigError("verify: --source needs --translation and --tests");
  Direction d = direction_arg(f.direction);
  std::optional<std::string> xw, yw;
  if (!f.source_wrapper.empty()) xw = read_text(f.source_wrapper);
  if (!f.translation_wrapper.empty()) yw = read_text(f.translation_wrapper);
  auto x = make_unit(read_text(f.source), source_language(d), xw, f.source);

  auto classifier = std::make_shared<ErrorClassifier>();
  if (cfg.rules_file) classifier->prepend_rules_file(*cfg.rules_file);
  auto runner = std::make_shared<ProcessRunner>(cfg.compile_specs, cfg.limits, cfg.scratch_root,
                                                cfg.keep_scratch, classifier);
  runner->check_toolchain(cfg.c_backend);
  runner->check_toolchain(cfg.cuda_backend);

  auto raw = read_text(f.tests);
  std::vector<std::string> callees{x.name};
  if (x.wrapper_source) callees.push_back(parse_wrapper_signature(*x.wrapper_source).name);
  int markers = 0;
  for (std::size_t pos = 0; (pos = raw.find("Input case", pos)) != std::string::npos; ++pos) ++markers;
  auto suite = split_test_cases(raw, x.id, std::max(1, markers), callees);

  TranslationCandidate y;
  y.function_id = x.id;
  y.direction = d;
  y.source = read_text(f.translation);
  y.wrapper = yw;

  VerifyContext ctx;
  ctx.runner = runner.get();
  ctx.c_backend = cfg.c_backend;
  ctx.cuda_backend = cfg.cuda_backend;
  ctx.tolerance = cfg.tolerance;
  ctx.iteration = cfg.iteration;
  auto result = verify_triplet(x, y, suite, ctx);
  if (const auto* t = std::get_if<VerifiedTriplet>(&result)) {
    std::cout << triplet_to_json(*t) << '\n';
    return kExitOk;
  }
  std::cout << rejection_to_json(std::get<Rejection>(result)) << '\n';
  return kExitFailure;
}

int cmd_verify(const GlobalOptions& g, const std::string& id, const std::string& direction) {
  Session s(g);
  auto corpus = s.pipeline->load_corpus();
  const auto& fn0 = find_function(corpus, id);
  Direction d = direction.empty() ? direction_from(fn0.language) : direction_arg(direction);
  if (source_language(d) != fn0.language) throw ConfigError("direction does not match the function language");
  if (fn0.language == Language::CUDA && !fn0.wrapper_source) s.pipeline->generate_wrappers(corpus);
  auto rec = s.pipeline->process(find_function(corpus, id), d);
  std::cout << record_to_json(rec) << '\n';
  return rec.triplets.empty() ? kExitFailure : kExitOk;
}

int cmd_iterate(const GlobalOptions& g, const std::string& corpus_path, std::optional<int> iteration) {
  Session s(g);
  if (iteration) {
    s.config.iteration = *iteration;
    s.config.validate();
  }
  if (!corpus_path.empty()) s.config.corpus = corpus_path;
  Pipeline pipeline(s.config, s.services);
  auto corpus = pipeline.load_corpus();
  auto result = pipeline.run_iteration(corpus);
  const auto& r = result.report;
  std::cout << "iteration " << r.iteration << ": " << result.s_i.size() << " accepted, " << result.rejections.size()
            << " rejected";
  if (r.vt) std::cout << ", VT " << *r.vt;
  std::cout << (r.converged ? ", converged" : "") << "\nreport: " << r.files.at("report") << '\n';
  return kExitOk;
}

int cmd_evaluate(const GlobalOptions& g, const std::string& test_set, std::vector<int> k_values,
                 std::optional<int> n, bool tester_vt, const std::string& output) {
  Session s(g);
  auto& ev = s.config.evaluate;
  fs::path set = test_set.empty() ? ev.test_set : fs::path(test_set);
  if (set.empty()) throw ConfigError("evaluate: no test set (--test-set or evaluate.test_set)");
  if (k_values.empty()) k_values = ev.k_values;
  int samples = n.value_or(ev.n_samples);
  int k_max = k_values.empty() ? 1 : *std::max_element(k_values.begin(), k_values.end());
  if (samples < k_max)
    throw ConfigError("evaluate: k=" + std::to_string(k_max) + " exceeds n=" + std::to_string(samples) +
                      " samples per problem");
  auto problems = load_test_set(set);
  auto result = evaluate(*s.pipeline, problems, k_values, samples, tester_vt || ev.tester_vt);
  auto text = metrics_to_json(result.metrics);
  fs::path out = output.empty() ? s.config.output_dir / "eval" / "metrics.json" : fs::path(output);
  write_text(out, text + "\n");
  write_jsonl(out.parent_path() / "eval_rejections.jsonl", result.rejections,
              [](const Rejection& r) { return rejection_to_json(r); });
  std::cout << text << '\n';
  return kExitOk;
}

int cmd_report(const GlobalOptions& g, const std::string& output) {
  auto cfg = load(g);
  std::vector<IterationReport> history;
  for (int i = 1;; ++i) {
    auto p = cfg.iteration_dir(i) / "report.json";
    if (!fs::exists(p)) break;
    history.push_back(report_from_json(read_text(p)));
  }
  if (history.empty()) {
    std::cerr << "no iteration reports under " << cfg.output_dir.string() << '\n';
    return kExitFailure;
  }
  fs::path out = output.empty() ? cfg.output_dir / "report.html" : fs::path(output);
  write_text(out, render_html(history));
  for (const auto& r : history) {
    std::cout << "iteration " << r.iteration << ": accepted " << r.accepted_total();
    for (const auto& [lang, n] : r.accepted_by_language) std::cout << ' ' << display_name(lang) << '=' << n;
    if (r.vt) std::cout << " VT=" << *r.vt;
    std::cout << (r.converged ? " converged" : "") << '\n';
  }
  std::cout << "html: " << out.string() << '\n';
  return kExitOk;
}

int cmd_export(const GlobalOptions& g, std::optional<int> iteration, std::optional<int> cap,
               const std::string& output) {
  auto cfg = load(g);
  int it = iteration.value_or(cfg.iteration);
  auto dir = cfg.iteration_dir(it);
  auto triplets = read_jsonl(dir / "s_i.jsonl", [](std::string_view t, std::size_t l) { return triplet_from_json(t, l); });
  PromptLibrary prompts;
  if (cfg.prompts_dir) prompts.load_overrides(*cfg.prompts_dir);
  int c = cap.value_or(cfg.export_options.cap_per_function);
  if (c < 1) throw ConfigError("export-training: --cap must be >= 1");
  auto sets = export_training_data(triplets, prompts, c);
  for (auto& e : sets.translator) e.iteration = it;
  for (auto& e : sets.tester) e.iteration = it;
  auto paths = write_training_files(sets, output.empty() ? dir : fs::path(output), cfg.export_options.split_by_direction);
  std::cout << sets.translator.size() << " translate examples, " << sets.tester.size() << " gen_tests examples\n";
  for (const auto& p : paths) std::cout << p.string() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"coverify: co-verification harness and data pipeline for C/CUDA translation", "coverify"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "coverify 0.3.0");

  GlobalOptions g;
  app.add_option("--config", g.config, "YAML config file");
  app.add_flag("--mock", g.mock, "serve model calls from mock.responses (and recorded transcripts)");
  app.add_option("--backend", g.backend, "CUDA backend: nvcc or cuda_shim");
  app.add_flag("--keep-scratch", g.keep_scratch, "keep job directories");
  app.add_option("--seed", g.seed, "sampling seed");
  app.add_option("--workers", g.workers, "worker threads");
  app.add_option("--output-dir", g.output_dir, "directory for iteration artifacts");
  app.add_flag("--split-by-direction", g.split_by_direction, "one translator file per direction");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off");
  app.add_option("--record-transcripts", g.record_transcripts)->group("");

  std::function<int()> action;

  auto* ingest_cmd = app.add_subcommand("ingest", "read .c/.cu files or JSONL into a corpus file");
  std::string ingest_in, ingest_lang, ingest_out;
  ingest_cmd->add_option("input", ingest_in, "directory or JSONL file")->required();
  ingest_cmd->add_option("--language", ingest_lang, "keep only c or cuda");
  ingest_cmd->add_option("-o,--output", ingest_out, "corpus JSONL to write");
  ingest_cmd->callback([&] { action = [&] { return cmd_ingest(g, ingest_in, ingest_lang, ingest_out); }; });

  auto* wrap_cmd = app.add_subcommand("gen-wrappers", "request host wrappers for kernels without one");
  std::string wrap_in, wrap_out;
  wrap_cmd->add_option("--corpus", wrap_in, "corpus to read instead of the configured one");
  wrap_cmd->add_option("-o,--output", wrap_out, "corpus JSONL to write");
  wrap_cmd->callback([&] { action = [&] { return cmd_gen_wrappers(g, wrap_in, wrap_out); }; });

  auto* tr_cmd = app.add_subcommand("translate", "sample translations of one function");
  std::string tr_id, tr_dir;
  std::optional<int> tr_n;
  tr_cmd->add_option("--function", tr_id, "function id or name")->required();
  tr_cmd->add_option("--direction", tr_dir, "C_to_CUDA or CUDA_to_C");
  tr_cmd->add_option("-n,--samples", tr_n, "number of samples");
  tr_cmd->callback([&] { action = [&] { return cmd_translate(g, tr_id, tr_dir, tr_n); }; });

  auto* gt_cmd = app.add_subcommand("gen-tests", "sample a unit-test suite for one function");
  std::string gt_id;
  gt_cmd->add_option("--function", gt_id, "function id or name")->required();
  gt_cmd->callback([&] { action = [&] { return cmd_gen_tests(g, gt_id); }; });

  auto* v_cmd = app.add_subcommand("verify", "co-verify one corpus function, or a source/translation pair");
  std::string v_id, v_dir;
  VerifyFiles vf;
  v_cmd->add_option("--function", v_id, "function id or name");
  v_cmd->add_option("--direction", v_dir, "C_to_CUDA or CUDA_to_C");
  v_cmd->add_option("--source", vf.source, "source function file");
  v_cmd->add_option("--source-wrapper", vf.source_wrapper, "wrapper for a source kernel");
  v_cmd->add_option("--translation", vf.translation, "translated function file");
  v_cmd->add_option("--translation-wrapper", vf.translation_wrapper, "wrapper for a translated kernel");
  v_cmd->add_option("--tests", vf.tests, "test cases with //Input case n: markers");
  v_cmd->callback([&] {
    action = [&] {
      if (!vf.source.empty()) {
        vf.direction = v_dir;
        return cmd_verify_files(g, vf);
      }
      if (v_id.empty()) throw ConfigError("verify: give --function or --source");
      return cmd_verify(g, v_id, v_dir);
    };
  });

  auto* it_cmd = app.add_subcommand("iterate", "run one co-verify iteration over the corpus");
  std::string it_corpus;
  std::optional<int> it_n;
  it_cmd->add_option("--corpus", it_corpus, "corpus to read instead of the configured one");
  it_cmd->add_option("--iteration", it_n, "iteration number");
  it_cmd->callback([&] { action = [&] { return cmd_iterate(g, it_corpus, it_n); }; });

  auto* ev_cmd = app.add_subcommand("evaluate", "score an endpoint against a paired test set");
  std::string ev_set, ev_out;
  std::vector<int> ev_k;
  std::optional<int> ev_n;
  bool ev_vt = false;
  ev_cmd->add_option("--test-set", ev_set, "JSONL test set");
  ev_cmd->add_option("-k", ev_k, "pass@k values")->delimiter(',');
  ev_cmd->add_option("-n,--samples", ev_n, "samples per problem");
  ev_cmd->add_flag("--tester-vt", ev_vt, "also measure VT of the tester endpoint");
  ev_cmd->add_option("-o,--output", ev_out, "metrics JSON to write");
  ev_cmd->callback([&] { action = [&] { return cmd_evaluate(g, ev_set, ev_k, ev_n, ev_vt, ev_out); }; });

  auto* rep_cmd = app.add_subcommand("report", "render the HTML summary of all iterations");
  std::string rep_out;
  rep_cmd->add_option("-o,--output", rep_out, "HTML file to write");
  rep_cmd->callback([&] { action = [&] { return cmd_report(g, rep_out); }; });

  auto* ex_cmd = app.add_subcommand("export-training", "rebuild training files from an iteration's S_i");
  std::optional<int> ex_it, ex_cap;
  std::string ex_out;
  ex_cmd->add_option("--iteration", ex_it, "iteration number");
  ex_cmd->add_option("--cap", ex_cap, "triplets per function and direction");
  ex_cmd->add_option("-o,--output", ex_out, "directory to write");
  ex_cmd->callback([&] { action = [&] { return cmd_export(g, ex_it, ex_cap, ex_out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  auto logger = spdlog::stderr_color_mt("coverify_cli_" + std::to_string(reinterpret_cast<std::uintptr_t>(&app)));
  auto previous = spdlog::default_logger();
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("%^[%l]%$ %v");
  spdlog::set_level(spdlog::level::from_str(g.log_level));
  int code = kExitFailure;
  try {
    code = action();
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    code = kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    code = kExitFailure;
  }
  spdlog::set_default_logger(previous);
  spdlog::drop(logger->name());
  return code;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> owned;
  owned.reserve(args.size() + 1);
  owned.push_back("coverify");
  owned.insert(owned.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : owned) argv.push_back(a.data());
  argv.push_back(nullptr);
  return run_cli(static_cast<int>(owned.size()), argv.data());
}

}  // namespace coverify
