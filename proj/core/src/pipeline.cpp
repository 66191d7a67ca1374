#include "coverify/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <fstream>
#include <sstream>

#include "coverify/errors.hpp"
#include "coverify/serialize.hpp"
#include "json_io.hpp"

namespace coverify {

namespace fs = std::filesystem;
using json_io::ordered_json;

namespace {

std::string join_messages(const std::vector<ChatMessage>& msgs) {
  std::string out;
  for (const auto& m : msgs) {
    if (!out.empty()) out += "\n\n";
    out += m.content;
  }
  return out;
}

// The translation's unit as seen by prompts: y in its own language.
FunctionUnit translated_unit(const VerifiedTriplet& t) {
  FunctionUnit u;
  u.id = t.id();
  u.language = target_language(t.direction);
  u.source = t.y;
  u.name = t.x.name;
  return u;
}

std::optional<std::pair<std::string, Signature>> kernel_of(std::string_view source, const std::string& prefer) {
  std::optional<std::pair<std::string, Signature>> first;
  for (const auto& chunk : split_function_definitions(source)) {
    Signature sig;
    try {
      sig = parse_signature(chunk);
    } catch (const ParseError&) {
      continue;
    }
    if (!sig.is_kernel) continue;
    if (sig.name == prefer) return std::make_pair(chunk, sig);
    if (!first) first = std::make_pair(chunk, sig);
  }
  return first;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

ordered_json sub(const std::string& encoded) { return json_io::parse(encoded); }

}  // namespace

std::string training_to_json(const TrainingExample& e) {
  ordered_json j;
  j["task"] = std::string(to_string(e.task));
  j["prompt"] = e.prompt;
  j["target"] = e.target;
  j["direction"] = e.direction ? ordered_json(std::string(to_string(*e.direction))) : ordered_json(nullptr);
  j["iteration"] = e.iteration;
  j["origin"] = e.origin;
  return j.dump();
}

TrainingExample training_from_json(std::string_view text, std::size_t line) {
  auto j = json_io::parse(text, line);
  try {
    TrainingExample e;
    auto task = j.at("task").get<std::string>();
    if (task == "translate")
      e.task = Task::Translate;
    else if (task == "gen_tests")
      e.task = Task::GenTests;
    else
      throw ParseError("training example: unknown task '" + task + "'", line);
    e.prompt = j.at("prompt").get<std::string>();
    e.target = j.at("target").get<std::string>();
    if (!j.at("direction").is_null()) {
      e.direction = parse_direction(j.at("direction").get<std::string>());
      if (!e.direction) throw ParseError("training example: bad direction", line);
    }
    e.iteration = j.at("iteration").get<int>();
    e.origin = j.at("origin").get<std::string>();
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("training example: ") + ex.what(), line);
  }
}

TrainingSets export_training_data(const std::vector<VerifiedTriplet>& triplets, const PromptLibrary& prompts,
                                  int cap_per_function) {
  TrainingSets sets;
  std::map<std::pair<std::string, Direction>, int> used;
  for (const auto& t : triplets) {
    if (used[{t.x.id, t.direction}]++ >= cap_per_function) continue;
    auto y = translated_unit(t);
    Direction back = reverse(t.direction);

    TrainingExample tr;
    tr.task = Task::Translate;
    tr.prompt = join_messages(prompts.render(Task::Translate, PromptMode::TaskPrompt, y, back));
    tr.target = t.x.source;
    tr.direction = back;
    tr.iteration = t.iteration;
    tr.origin = t.id();
    sets.translator.push_back(std::move(tr));

    TrainingExample te;
    te.task = Task::GenTests;
    te.prompt = join_messages(prompts.render(Task::GenTests, PromptMode::TaskPrompt, y, std::nullopt,
                                             static_cast<int>(t.suite.cases.size())));
    te.target = serialize_suite(t.suite);
    te.iteration = t.iteration;
    te.origin = t.id();
    sets.tester.push_back(std::move(te));
  }
  return sets;
}

std::vector<fs::path> write_training_files(const TrainingSets& sets, const fs::path& dir, bool split) {
  std::vector<fs::path> written;
  auto encode = [](const TrainingExample& e) { return training_to_json(e); };
  if (!split) {
    write_jsonl(dir / "translator.jsonl", sets.translator, encode);
    write_jsonl(dir / "tester.jsonl", sets.tester, encode);
    return {dir / "translator.jsonl", dir / "tester.jsonl"};
  }
  for (auto d : {Direction::C_to_CUDA, Direction::CUDA_to_C}) {
    std::vector<TrainingExample> part;
    for (const auto& e : sets.translator)
      if (e.direction == d) part.push_back(e);
    auto path = dir / ("translator." + std::string(to_string(d)) + ".jsonl");
    write_jsonl(path, part, encode);
    written.push_back(path);
  }
  write_jsonl(dir / "tester.jsonl", sets.tester, encode);
  written.push_back(dir / "tester.jsonl");
  return written;
}

std::string record_to_json(const FunctionRecord& r) {
  ordered_json j;
  j["function_id"] = r.function_id;
  j["direction"] = std::string(to_string(r.direction));
  j["suite"] = r.suite ? sub(suite_to_json(*r.suite)) : ordered_json(nullptr);
  auto& cands = j["candidates"] = ordered_json::array();
  for (const auto& c : r.candidates) cands.push_back(sub(candidate_to_json(c)));
  j["validity"] = {{"n_cases", r.validity.n_cases},
                   {"valid_cases", r.validity.valid_cases},
                   {"all_valid", r.validity.all_valid}};
  auto& trips = j["triplets"] = ordered_json::array();
  for (const auto& t : r.triplets) trips.push_back(sub(triplet_to_json(t)));
  auto& rejs = j["rejections"] = ordered_json::array();
  for (const auto& x : r.rejections) rejs.push_back(sub(rejection_to_json(x)));
  return j.dump();
}

FunctionRecord record_from_json(std::string_view text, std::size_t line) {
  auto j = json_io::parse(text, line);
  FunctionRecord r;
  try {
    r.function_id = j.at("function_id").get<std::string>();
    auto dir = parse_direction(j.at("direction").get<std::string>());
    if (!dir) throw ParseError("completion record: bad direction", line);
    r.direction = *dir;
    if (!j.at("suite").is_null()) r.suite = suite_from_json(j.at("suite").dump(), line);
    for (const auto& c : j.at("candidates")) r.candidates.push_back(candidate_from_json(c.dump(), line));
    const auto& v = j.at("validity");
    r.validity = {r.function_id, v.at("n_cases").get<int>(), v.at("valid_cases").get<int>(),
                  v.at("all_valid").get<bool>()};
    for (const auto& t : j.at("triplets")) r.triplets.push_back(triplet_from_json(t.dump(), line));
    for (const auto& x : j.at("rejections")) r.rejections.push_back(rejection_from_json(x.dump(), line));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("completion record: ") + e.what(), line);
  }
  return r;
}

Services make_services(const PipelineConfig& config, bool mock, bool record_transcripts) {
  Services s;
  auto classifier = std::make_shared<ErrorClassifier>();
  if (config.rules_file) classifier->prepend_rules_file(*config.rules_file);
  s.classifier = classifier;

  if (mock) {
    if (config.mock.responses.empty()) throw ConfigError("--mock needs mock.responses in the config");
    auto endpoint = MockEndpoint::from_file(config.mock.responses);
    s.translator = s.tester = s.wrapper = endpoint;
  } else {
    for (const auto* e : {&config.translator, &config.tester, &config.wrapper_endpoint()}) {
      if (e->base_url.empty()) throw ConfigError("endpoint '" + e->model_name + "' has no base_url");
      e->validate();
    }
    s.translator = std::make_shared<HttpChatEndpoint>(config.translator);
    s.tester = std::make_shared<HttpChatEndpoint>(config.tester);
    s.wrapper = std::make_shared<HttpChatEndpoint>(config.wrapper_endpoint());
  }

  std::error_code ec;
  if (mock && !record_transcripts && !config.mock.transcripts.empty() && fs::exists(config.mock.transcripts, ec)) {
    s.runner = std::make_shared<ReplayRunner>(config.mock.transcripts);
  } else {
    auto process = std::make_shared<ProcessRunner>(config.compile_specs, config.limits, config.scratch_root,
                                                   config.keep_scratch, s.classifier);
    process->check_toolchain(config.c_backend);
    process->check_toolchain(config.cuda_backend);
    if (record_transcripts)
      s.runner = std::make_shared<RecordingRunner>(process);
    else
      s.runner = process;
  }
  return s;
}

Pipeline::Pipeline(PipelineConfig config, Services services)
    : config_(std::move(config)), services_(std::move(services)) {
  config_.validate();
  if (!services_.runner) throw ConfigError("pipeline needs a harness runner");
  if (config_.prompts_dir) prompts_.load_overrides(*config_.prompts_dir);
  auto named = [](ModelEndpoint e, const ChatEndpoint& ep) {
    if (e.model_name.empty()) e.model_name = ep.describe();
    return e;
  };
  translator_ = std::make_unique<Gateway>(services_.translator, named(config_.translator, *services_.translator),
                                          prompts_, config_.seed);
  tester_ = std::make_unique<Gateway>(services_.tester, named(config_.tester, *services_.tester), prompts_,
                                      config_.seed + 1);
  wrapper_ = std::make_unique<Gateway>(services_.wrapper, named(config_.wrapper_endpoint(), *services_.wrapper),
                                       prompts_, config_.seed + 2);
  pool_ = std::make_unique<WorkerPool>(config_.workers);
}

Pipeline::~Pipeline() = default;

std::vector<FunctionUnit> Pipeline::load_corpus() const {
  if (config_.corpus.empty()) throw ConfigError("config has no corpus path");
  auto result = ingest(config_.corpus);
  for (const auto& r : result.rejects) spdlog::warn("corpus: {} rejected: {}", r.location, r.reason);
  if (result.duplicates) spdlog::info("corpus: {} duplicates dropped", result.duplicates);
  return std::move(result.units);
}

VerifyContext Pipeline::verify_context() const {
  VerifyContext ctx;
  ctx.runner = services_.runner.get();
  ctx.c_backend = config_.c_backend;
  ctx.cuda_backend = config_.cuda_backend;
  ctx.tolerance = config_.tolerance;
  ctx.iteration = config_.iteration;
  return ctx;
}

int Pipeline::generate_wrappers(std::vector<FunctionUnit>& corpus) {
  std::vector<std::pair<FunctionUnit*, std::future<void>>> jobs;
  for (auto& fn : corpus) {
    if (fn.language != Language::CUDA || !fn.signature.is_kernel || fn.wrapper_source) continue;
    jobs.emplace_back(&fn, pool_->submit([this, &fn] { wrapper_->request_cuda_wrapper(fn); }));
  }
  int added = 0;
  for (auto& [fn, fut] : jobs) {
    try {
      fut.get();
      ++added;
    } catch (const ExtractionError& e) {
      spdlog::warn("{}: no wrapper: {}", fn->id, e.what());
    }
  }
  return added;
}

std::vector<TranslationCandidate> Pipeline::translate(const FunctionUnit& fn, Direction direction,
                                                      std::optional<int> n_samples) {
  int n = n_samples.value_or(config_.n_translation_samples);
  std::vector<TranslationCandidate> out;
  std::vector<Candidate> samples;
  try {
    samples = translator_->request_translation(fn, direction, n);
  } catch (const ExtractionError& e) {
    for (int i = 0; i < n; ++i) out.push_back({fn.id, i, direction, std::nullopt, std::nullopt, e.what()});
    return out;
  }
  for (const auto& c : samples) {
    TranslationCandidate t{fn.id, c.sample_index, direction, c.source, std::nullopt, c.error};
    if (t.source && target_language(direction) == Language::CUDA) {
      if (auto kernel = kernel_of(*t.source, fn.name)) {
        FunctionUnit ku;
        ku.id = fn.id + "#" + std::to_string(c.sample_index);
        ku.language = Language::CUDA;
        ku.source = kernel->first;
        ku.name = kernel->second.name;
        ku.signature = kernel->second;
        try {
          t.wrapper = wrapper_->request_cuda_wrapper(ku);
        } catch (const ExtractionError& e) {
          t.error = std::string("wrapper: ") + e.what();
        }
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::optional<TestSuite> Pipeline::generate_tests(const FunctionUnit& fn, std::string* error) {
  try {
    return tester_->request_tests(fn, config_.n_tests);
  } catch (const ExtractionError& e) {
    if (error) *error = e.what();
    return std::nullopt;
  }
}

FunctionRecord Pipeline::process(const FunctionUnit& fn, Direction direction) {
  FunctionRecord rec;
  rec.function_id = fn.id;
  rec.direction = direction;
  rec.validity.function_id = fn.id;
  std::string test_error;
  rec.suite = generate_tests(fn, &test_error);
  rec.candidates = translate(fn, direction);
  auto ctx = verify_context();

  std::vector<VerifyResult> results;
  if (!rec.suite) {
    for (const auto& y : rec.candidates)
      results.push_back(Rejection{fn.id, y.index, direction, ctx.iteration, Stage::Extraction,
                                  "no test suite: " + test_error, std::nullopt});
  } else {
    auto source = run_source(fn, *rec.suite, direction, ctx);
    rec.validity.n_cases = source.n_cases;
    rec.validity.valid_cases = source.valid_cases;
    rec.validity.all_valid = source.all_valid();
    for (const auto& y : rec.candidates) results.push_back(verify_candidate(fn, source, y, *rec.suite, ctx));
  }
  for (auto& r : results) {
    if (auto* t = std::get_if<VerifiedTriplet>(&r))
      rec.triplets.push_back(std::move(*t));
    else
      rec.rejections.push_back(std::move(std::get<Rejection>(r)));
  }
  return rec;
}

namespace {

using RecordKey = std::pair<std::string, Direction>;

// Reads finished records. A truncated last record is dropped and cut from the
// file so that appending resumes on a clean line.
std::map<RecordKey, FunctionRecord> load_completion_log(const fs::path& path) {
  std::map<RecordKey, FunctionRecord> done;
  std::error_code ec;
  if (!fs::exists(path, ec)) return done;
  auto text = read_file(path);
  std::size_t pos = 0, lineno = 0, good_end = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    bool last = end == std::string::npos || end + 1 >= text.size();
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    ++lineno;
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      try {
        auto rec = record_from_json(line, lineno);
        done[{rec.function_id, rec.direction}] = std::move(rec);
      } catch (const ParseError& e) {
        if (!last) throw;
        spdlog::warn("completion log: ignoring truncated last record ({})", e.what());
        fs::resize_file(path, good_end);
        return done;
      }
    }
    pos = end + 1;
    good_end = std::min(pos, text.size());
  }
  if (!text.empty() && text.back() != '\n') {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << '\n';
  }
  return done;
}

void warn_on_unchanged_models(const PipelineConfig& cfg, const std::string& translator, const std::string& tester) {
  if (cfg.iteration <= 1) return;
  auto prev = cfg.iteration_dir(cfg.iteration - 1) / "manifest.json";
  std::error_code ec;
  if (!fs::exists(prev, ec)) return;
  try {
    auto j = json_io::parse(read_file(prev));
    if (j.value("translator_model", "") == translator)
      spdlog::warn("translator endpoint '{}' is the same as in iteration {}", translator, cfg.iteration - 1);
    if (j.value("tester_model", "") == tester)
      spdlog::warn("tester endpoint '{}' is the same as in iteration {}", tester, cfg.iteration - 1);
  } catch (const std::exception& e) {
    spdlog::warn("cannot read {}: {}", prev.string(), e.what());
  }
}

}  // namespace

IterationResult Pipeline::run_iteration(const std::vector<FunctionUnit>& input) {
  auto start = std::chrono::steady_clock::now();
  const fs::path dir = config_.iteration_dir(config_.iteration);
  fs::create_directories(dir);
  const auto& translator_model = translator_->config().model_name;
  const auto& tester_model = tester_->config().model_name;
  warn_on_unchanged_models(config_, translator_model, tester_model);

  std::vector<FunctionUnit> corpus = input;
  bool needs_cuda_x = false;
  for (auto d : config_.directions) needs_cuda_x = needs_cuda_x || source_language(d) == Language::CUDA;
  if (needs_cuda_x) generate_wrappers(corpus);

  const fs::path log_path = dir / "completion.jsonl";
  auto done = load_completion_log(log_path);
  if (!done.empty()) spdlog::info("resuming iteration {}: {} records already complete", config_.iteration, done.size());

  std::vector<std::pair<RecordKey, std::future<FunctionRecord>>> jobs;
  for (auto d : config_.directions)
    for (const auto& fn : corpus) {
      if (fn.language != source_language(d) || done.count({fn.id, d})) continue;
      const FunctionUnit* p = &fn;
      jobs.emplace_back(RecordKey{fn.id, d}, pool_->submit([this, p, d] { return process(*p, d); }));
    }

  std::exception_ptr failure;
  {
    std::ofstream log(log_path, std::ios::binary | std::ios::app);
    if (!log) throw IoError("cannot write " + log_path.string());
    for (auto& [key, fut] : jobs) {
      try {
        auto rec = fut.get();
        log << record_to_json(rec) << '\n';
        log.flush();
        done[key] = std::move(rec);
      } catch (...) {
        if (!failure) failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);

  IterationResult result;
  auto& report = result.report;
  report.iteration = config_.iteration;
  report.translator_model = translator_model;
  report.tester_model = tester_model;
  for (auto d : config_.directions) {
    auto& counts = report.per_direction[d];
    for (const auto& fn : corpus) {
      auto it = done.find({fn.id, d});
      if (it == done.end()) continue;
      const auto& rec = it->second;
      ++counts.functions;
      counts.accepted += static_cast<long>(rec.triplets.size());
      counts.rejected += static_cast<long>(rec.rejections.size());
      result.validity.push_back(rec.validity);
      for (const auto& t : rec.triplets) {
        result.s_i.push_back(t);
        ++report.accepted_by_language[t.x.language];
      }
      for (const auto& r : rec.rejections) {
        result.rejections.push_back(r);
        ++report.rejections_by_stage[r.stage];
      }
    }
    counts.attempted = counts.accepted + counts.rejected;
  }
  report.error_histogram = error_histogram(result.rejections);
  if (!result.validity.empty()) {
    std::vector<std::pair<int, bool>> v;
    for (const auto& f : result.validity) v.emplace_back(f.n_cases, f.all_valid);
    report.vt = vt_metric(v);
  }

  result.training = export_training_data(result.s_i, prompts_, config_.export_options.cap_per_function);
  report.translate_examples = static_cast<long>(result.training.translator.size());
  report.tester_examples = static_cast<long>(result.training.tester.size());

  write_jsonl(dir / "s_i.jsonl", result.s_i, [](const VerifiedTriplet& t) { return triplet_to_json(t); });
  write_jsonl(dir / "rejections.jsonl", result.rejections, [](const Rejection& r) { return rejection_to_json(r); });
  report.files["s_i"] = (dir / "s_i.jsonl").string();
  report.files["rejections"] = (dir / "rejections.jsonl").string();
  for (const auto& p : write_training_files(result.training, dir, config_.export_options.split_by_direction))
    report.files[p.stem().string()] = p.string();
  report.files["report"] = (dir / "report.json").string();
  report.files["html"] = (dir / "report.html").string();
  report.files["completion_log"] = log_path.string();

  std::vector<IterationReport> history;
  for (int i = 1; i < config_.iteration; ++i) {
    auto p = config_.iteration_dir(i) / "report.json";
    std::error_code ec;
    if (fs::exists(p, ec)) history.push_back(report_from_json(read_file(p)));
  }
  history.push_back(report);
  report.converged = converged(history, config_.convergence);
  history.back().converged = report.converged;
  report.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  history.back().elapsed = report.elapsed;

  ordered_json manifest;
  manifest["iteration"] = config_.iteration;
  manifest["translator_model"] = translator_model;
  manifest["tester_model"] = tester_model;
  manifest["triplets"] = result.s_i.size();
  manifest["translate_examples"] = report.translate_examples;
  manifest["tester_examples"] = report.tester_examples;
  manifest["suggested_epochs"] = config_.iteration;
  manifest["note"] = "fine-tune for i epochs on the data of iteration i";
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  write_file(dir / "report.json", report_to_json(report) + "\n");
  write_file(dir / "report.html", render_html(history));

  spdlog::info("iteration {}: {} accepted, {} rejected{}", config_.iteration, result.s_i.size(),
               result.rejections.size(), report.converged ? " (converged)" : "");
  return result;
}

}  // namespace coverify
