#include "coverify/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <sstream>
#include <thread>

#include "coverify/errors.hpp"

namespace coverify {

namespace fs = std::filesystem;

namespace {

template <class T>
T get(const YAML::Node& node, const std::string& where) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("config: '" + where + "' has the wrong type");
  }
}

template <class T>
void read(const YAML::Node& parent, const char* key, T& out, const std::string& where) {
  if (auto n = parent[key]; n && !n.IsNull()) out = get<T>(n, where.empty() ? key : where + "." + key);
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> known) {
  if (!node.IsMap()) throw ConfigError("config: '" + where + "' must be a mapping");
  for (const auto& kv : node) {
    auto key = kv.first.as<std::string>();
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

ModelEndpoint read_endpoint(const YAML::Node& node, const std::string& where) {
  check_keys(node, where,
             {"base_url", "model", "temperature", "top_p", "top_k", "max_tokens", "timeout", "max_retries",
              "concurrency", "api_key_env", "prompt_mode", "retry_base_delay_ms", "retry_max_delay_ms"});
  ModelEndpoint e;
  read(node, "base_url", e.base_url, where);
  read(node, "model", e.model_name, where);
  read(node, "temperature", e.temperature, where);
  read(node, "top_p", e.top_p, where);
  if (auto n = node["top_k"]; n && !n.IsNull()) e.top_k = get<int>(n, where + ".top_k");
  read(node, "max_tokens", e.max_tokens, where);
  read(node, "timeout", e.request_timeout, where);
  read(node, "max_retries", e.max_retries, where);
  read(node, "concurrency", e.concurrency_limit, where);
  read(node, "api_key_env", e.api_key_env, where);
  if (auto n = node["prompt_mode"]; n && !n.IsNull()) {
    auto mode = parse_prompt_mode(get<std::string>(n, where + ".prompt_mode"));
    if (!mode) throw ConfigError("config: " + where + ".prompt_mode must be task_prompt or one_shot");
    e.prompt_mode = *mode;
  }
  long long base = e.retry_base_delay.count(), max = e.retry_max_delay.count();
  read(node, "retry_base_delay_ms", base, where);
  read(node, "retry_max_delay_ms", max, where);
  e.retry_base_delay = std::chrono::milliseconds(base);
  e.retry_max_delay = std::chrono::milliseconds(max);
  return e;
}

void read_backend(const YAML::Node& node, const std::string& where, Backend& backend, CompileSpec& spec,
                  bool& custom) {
  check_keys(node, where, {"backend", "compiler", "flags"});
  if (auto n = node["backend"]; n && !n.IsNull()) {
    auto b = parse_backend(get<std::string>(n, where + ".backend"));
    if (!b) throw ConfigError("config: " + where + ".backend must be native_c, nvcc or cuda_shim");
    backend = *b;
  }
  spec.backend = backend;
  if (node["compiler"]) {
    spec.compiler_path = get<std::string>(node["compiler"], where + ".compiler");
    custom = true;
  }
  if (node["flags"]) {
    spec.flags = get<std::vector<std::string>>(node["flags"], where + ".flags");
    custom = true;
  }
}

}  // namespace

fs::path PipelineConfig::iteration_dir(int i) const { return output_dir / ("iter_" + std::to_string(i)); }

void PipelineConfig::validate() const {
  if (iteration < 1) throw ConfigError("config: iteration must be >= 1");
  if (n_translation_samples < 1) throw ConfigError("config: n_translation_samples must be >= 1");
  if (n_tests < 1) throw ConfigError("config: n_tests must be >= 1");
  if (workers < 1) throw ConfigError("config: workers must be >= 1");
  if (directions.empty()) throw ConfigError("config: at least one direction is required");
  if (convergence.min_growth < 0.0 || convergence.min_growth >= 1.0)
    throw ConfigError("config: convergence.min_growth must be in [0, 1)");
  if (convergence.max_iterations < 1) throw ConfigError("config: convergence.max_iterations must be >= 1");
  if (export_options.cap_per_function < 1) throw ConfigError("config: export.cap_per_function must be >= 1");
  if (tolerance.abs < 0.0 || tolerance.rel < 0.0) throw ConfigError("config: tolerances must be >= 0");
  if (limits.run_timeout <= 0.0) throw ConfigError("config: timeouts.run must be positive");
  if (evaluate.n_samples < 1) throw ConfigError("config: evaluate.n_samples must be >= 1");
  for (int k : evaluate.k_values)
    if (k < 1) throw ConfigError("config: evaluate.k values must be >= 1");
  if (c_backend != Backend::NativeC) throw ConfigError("config: the C backend must be native_c");
  if (cuda_backend == Backend::NativeC) throw ConfigError("config: the CUDA backend must be nvcc or cuda_shim");
  for (auto b : {c_backend, cuda_backend})
    if (!compile_specs.count(b)) throw ConfigError("config: no compiler for backend " + std::string(to_string(b)));
  // The model name may stay empty until an endpoint is actually used.
  auto check = [](ModelEndpoint e, const char* name) {
    if (e.model_name.empty()) e.model_name = "unset";
    try {
      e.validate();
    } catch (const ConfigError& err) {
      throw ConfigError(std::string("config: endpoints.") + name + ": " + err.what());
    }
  };
  check(translator, "translator");
  check(tester, "tester");
  if (wrapper) check(*wrapper, "wrapper");
}

void PipelineConfig::set_cuda_backend(Backend backend) {
  cuda_backend = backend;
  if (!compile_specs.count(backend)) {
    auto spec = default_compile_spec(backend, runtime_include_dir);
    spec.compile_timeout = compile_specs.count(c_backend) ? compile_specs.at(c_backend).compile_timeout
                                                          : spec.compile_timeout;
    compile_specs[backend] = spec;
  }
}

PipelineConfig parse_config(std::string_view text, const fs::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  PipelineConfig cfg;
  cfg.workers = std::max(1, std::min(8, static_cast<int>(std::thread::hardware_concurrency())));
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  check_keys(root, "",
             {"output_dir", "scratch_root", "corpus", "prompts_dir", "iteration", "directions",
              "n_translation_samples", "n_tests", "seed", "workers", "keep_scratch", "endpoints", "mock",
              "backends", "runtime_include_dir", "tolerance", "timeouts", "limits", "convergence", "export",
              "evaluate", "rules_file"});

  std::string s = cfg.output_dir.string();
  read(root, "output_dir", s, "");
  cfg.output_dir = resolve(base_dir, s);
  s.clear();
  read(root, "scratch_root", s, "");
  cfg.scratch_root = s.empty() ? fs::temp_directory_path() / "coverify-scratch" : resolve(base_dir, s);
  s.clear();
  read(root, "corpus", s, "");
  cfg.corpus = resolve(base_dir, s);
  s.clear();
  read(root, "prompts_dir", s, "");
  if (!s.empty()) cfg.prompts_dir = resolve(base_dir, s);
  s.clear();
  read(root, "rules_file", s, "");
  if (!s.empty()) cfg.rules_file = resolve(base_dir, s);

  read(root, "iteration", cfg.iteration, "");
  if (auto n = root["directions"]; n && !n.IsNull()) {
    cfg.directions.clear();
    for (const auto& d : get<std::vector<std::string>>(n, "directions")) {
      auto dir = parse_direction(d);
      if (!dir) throw ConfigError("config: unknown direction '" + d + "'");
      cfg.directions.push_back(*dir);
    }
  }
  read(root, "n_translation_samples", cfg.n_translation_samples, "");
  read(root, "n_tests", cfg.n_tests, "");
  read(root, "seed", cfg.seed, "");
  read(root, "workers", cfg.workers, "");
  read(root, "keep_scratch", cfg.keep_scratch, "");

  if (auto ep = root["endpoints"]; ep && !ep.IsNull()) {
    check_keys(ep, "endpoints", {"translator", "tester", "wrapper"});
    if (ep["translator"]) cfg.translator = read_endpoint(ep["translator"], "endpoints.translator");
    if (ep["tester"]) cfg.tester = read_endpoint(ep["tester"], "endpoints.tester");
    if (ep["wrapper"]) cfg.wrapper = read_endpoint(ep["wrapper"], "endpoints.wrapper");
  }
  if (auto m = root["mock"]; m && !m.IsNull()) {
    check_keys(m, "mock", {"responses", "transcripts"});
    s.clear();
    read(m, "responses", s, "mock");
    cfg.mock.responses = resolve(base_dir, s);
    s.clear();
    read(m, "transcripts", s, "mock");
    cfg.mock.transcripts = resolve(base_dir, s);
  }

  s.clear();
  read(root, "runtime_include_dir", s, "");
  cfg.runtime_include_dir = s.empty() ? default_runtime_dir() : resolve(base_dir, s);

  double compile_timeout = 120.0;
  if (auto t = root["timeouts"]; t && !t.IsNull()) {
    check_keys(t, "timeouts", {"compile", "run"});
    read(t, "compile", compile_timeout, "timeouts");
    read(t, "run", cfg.limits.run_timeout, "timeouts");
  }
  if (auto l = root["limits"]; l && !l.IsNull()) {
    check_keys(l, "limits", {"address_space_mb", "max_output_mb", "scrub_env"});
    std::uint64_t as_mb = cfg.limits.address_space >> 20, out_mb = cfg.limits.max_output >> 20;
    read(l, "address_space_mb", as_mb, "limits");
    read(l, "max_output_mb", out_mb, "limits");
    cfg.limits.address_space = as_mb << 20;
    cfg.limits.max_output = static_cast<std::size_t>(out_mb << 20);
    read(l, "scrub_env", cfg.limits.scrub_env, "limits");
  }

  CompileSpec c_spec = default_compile_spec(Backend::NativeC, cfg.runtime_include_dir);
  CompileSpec cuda_spec = default_compile_spec(Backend::CudaShim, cfg.runtime_include_dir);
  if (auto b = root["backends"]; b && !b.IsNull()) {
    check_keys(b, "backends", {"c", "cuda"});
    bool custom = false;
    if (b["c"]) read_backend(b["c"], "backends.c", cfg.c_backend, c_spec, custom);
    custom = false;
    if (b["cuda"]) {
      Backend before = cfg.cuda_backend;
      CompileSpec probe = cuda_spec;
      read_backend(b["cuda"], "backends.cuda", cfg.cuda_backend, probe, custom);
      if (cfg.cuda_backend != before && !custom) probe = default_compile_spec(cfg.cuda_backend, cfg.runtime_include_dir);
      probe.backend = cfg.cuda_backend;
      cuda_spec = probe;
    }
  }
  c_spec.compile_timeout = cuda_spec.compile_timeout = compile_timeout;
  cfg.compile_specs[cfg.c_backend] = c_spec;
  cfg.compile_specs[cfg.cuda_backend] = cuda_spec;

  if (auto t = root["tolerance"]; t && !t.IsNull()) {
    check_keys(t, "tolerance", {"abs", "rel", "strict_nan"});
    read(t, "abs", cfg.tolerance.abs, "tolerance");
    read(t, "rel", cfg.tolerance.rel, "tolerance");
    read(t, "strict_nan", cfg.tolerance.strict_nan, "tolerance");
  }
  if (auto c = root["convergence"]; c && !c.IsNull()) {
    check_keys(c, "convergence", {"min_growth", "max_iterations"});
    read(c, "min_growth", cfg.convergence.min_growth, "convergence");
    read(c, "max_iterations", cfg.convergence.max_iterations, "convergence");
  }
  if (auto e = root["export"]; e && !e.IsNull()) {
    check_keys(e, "export", {"cap_per_function", "split_by_direction"});
    read(e, "cap_per_function", cfg.export_options.cap_per_function, "export");
    read(e, "split_by_direction", cfg.export_options.split_by_direction, "export");
  }
  if (auto e = root["evaluate"]; e && !e.IsNull()) {
    check_keys(e, "evaluate", {"test_set", "k", "n_samples", "tester_vt"});
    s.clear();
    read(e, "test_set", s, "evaluate");
    cfg.evaluate.test_set = resolve(base_dir, s);
    if (auto k = e["k"]; k && !k.IsNull())
      cfg.evaluate.k_values = k.IsSequence() ? get<std::vector<int>>(k, "evaluate.k")
                                             : std::vector<int>{get<int>(k, "evaluate.k")};
    read(e, "n_samples", cfg.evaluate.n_samples, "evaluate");
    read(e, "tester_vt", cfg.evaluate.tester_vt, "evaluate");
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  auto base = path.parent_path();
  if (base.empty()) base = fs::current_path();
  return parse_config(ss.str(), fs::absolute(base));
}

}  // namespace coverify
