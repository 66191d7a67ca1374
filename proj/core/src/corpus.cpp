#include "coverify/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "coverify/errors.hpp"
#include "coverify/hash.hpp"
#include "coverify/lexer.hpp"
#include "json_io.hpp"

namespace coverify {

namespace fs = std::filesystem;
using lex::Token;
using lex::TokenKind;

namespace {

const std::set<std::string, std::less<>> kFunctionQualifiers = {
    "static",          "inline",       "extern",     "__global__",
    "__device__",      "__host__",     "__forceinline__", "__noinline__",
    "__inline__",      "__inline",     "constexpr",  "\"C\""};

const std::set<std::string, std::less<>> kRestrictQualifiers = {
    "__restrict__", "__restrict", "restrict"};

const std::set<std::string, std::less<>> kBuiltinTypeWords = {
    "void",    "char",     "short",    "int",     "long",     "float",
    "double",  "signed",   "unsigned", "bool",    "_Bool",    "size_t",
    "int8_t",  "int16_t",  "int32_t",  "int64_t", "uint8_t",  "uint16_t",
    "uint32_t", "uint64_t", "struct",  "union",   "enum",     "volatile",
    "dim3",    "half",     "wchar_t"};

std::string join_type_tokens(const std::vector<const Token*>& toks) {
  std::string out;
  for (const Token* t : toks) {
    bool attach = t->is("*") || t->is("&") || t->is("&&");
    if (!out.empty() && !attach) out.push_back(' ');
    out += t->text;
  }
  return out;
}

std::string trimmed(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Index of the token closing the bracket opened at `open`, or npos.
std::size_t match_close(const std::vector<Token>& toks, std::size_t open,
                        std::string_view open_text, std::string_view close_text) {
  int depth = 0;
  for (std::size_t i = open; i < toks.size(); ++i) {
    if (toks[i].is(open_text)) ++depth;
    if (toks[i].is(close_text) && --depth == 0) return i;
  }
  return std::string::npos;
}

Parameter parse_parameter(std::string_view source, const std::vector<Token>& toks,
                          std::size_t begin, std::size_t end,
                          std::vector<std::string>& qualifiers) {
  Parameter p;
  std::size_t decl_end = end;
  int depth = 0;
  for (std::size_t i = begin; i < end; ++i) {
    const auto& t = toks[i];
    if (t.is("(") || t.is("[") || t.is("{")) ++depth;
    if (t.is(")") || t.is("]") || t.is("}")) --depth;
    if (depth == 0 && t.is("=")) {
      decl_end = i;
      if (i + 1 >= end) throw ParseError("empty default value");
      p.default_value = trimmed(
          source.substr(toks[i + 1].offset, toks[end - 1].end() - toks[i + 1].offset));
      break;
    }
  }

  std::vector<const Token*> type_toks;
  std::vector<const Token*> idents;
  for (std::size_t i = begin; i < decl_end; ++i) {
    const auto& t = toks[i];
    if (t.is("...")) throw UnsupportedSignature("variadic parameter list");
    if (t.is("(")) throw UnsupportedSignature("function pointer parameter");
    if (t.is("<")) throw UnsupportedSignature("template parameter type");
    if (t.is("[")) {
      auto close = match_close(toks, i, "[", "]");
      if (close == std::string::npos || close >= decl_end)
        throw ParseError("unbalanced brackets in parameter");
      p.is_pointer = true;
      ++p.pointer_depth;
      i = close;
      continue;
    }
    if (t.is("*")) {
      p.is_pointer = true;
      ++p.pointer_depth;
      continue;
    }
    if (t.is("const")) {
      p.is_const = true;
      continue;
    }
    if (kRestrictQualifiers.contains(t.text)) {
      qualifiers.push_back(t.text);
      continue;
    }
    if (t.is("&") || t.is("&&") || t.is("::")) {
      type_toks.push_back(&t);
      continue;
    }
    if (t.kind != TokenKind::Identifier)
      throw ParseError("unexpected token '" + t.text + "' in parameter");
    idents.push_back(&t);
  }
  if (idents.empty()) throw ParseError("parameter without a type");

  // The last identifier is the name unless it is itself a type word
  // (unnamed parameter such as `int`).
  const Token* name = idents.back();
  bool unnamed = idents.size() == 1 || kBuiltinTypeWords.contains(name->text);
  if (!unnamed) {
    p.name = name->text;
    idents.pop_back();
  }
  for (const Token* t : idents) type_toks.push_back(t);
  std::stable_sort(type_toks.begin(), type_toks.end(),
                   [](const Token* a, const Token* b) { return a->offset < b->offset; });
  p.type_text = join_type_tokens(type_toks);
  return p;
}

}  // namespace

std::string normalize(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  auto emit_space = [&] {
    if (!out.empty()) pending_space = true;
  };
  auto emit = [&](std::string_view chunk) {
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.append(chunk);
  };

  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      emit_space();
      ++i;
    } else if (c == '/' && i + 1 < s.size() && s[i + 1] == '/') {
      while (i < s.size() && s[i] != '\n') ++i;
      emit_space();
    } else if (c == '/' && i + 1 < s.size() && s[i + 1] == '*') {
      auto close = s.find("*/", i + 2);
      i = close == std::string_view::npos ? s.size() : close + 2;
      emit_space();
    } else if (c == '"' || c == '\'') {
      std::size_t j = i + 1;
      while (j < s.size() && s[j] != c && s[j] != '\n') {
        if (s[j] == '\\' && j + 1 < s.size() && s[j + 1] != '\n') ++j;
        ++j;
      }
      if (j < s.size() && s[j] == c) ++j;
      emit(s.substr(i, j - i));
      i = j;
    } else {
      emit(s.substr(i, 1));
      ++i;
    }
  }
  return out;
}

std::string unit_id(std::string_view source) { return sha256_hex(normalize(source)); }

Signature parse_signature(std::string_view source) {
  auto toks = lex::tokenize(source, {.skip_preprocessor = true});

  std::size_t open = std::string::npos;
  int brace_depth = 0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].is("{")) ++brace_depth;
    if (toks[i].is("}")) --brace_depth;
    if (brace_depth == 0 && toks[i].is("(") && i > 0 && toks[i - 1].is_identifier() &&
        toks[i - 1].text != "__attribute__" && toks[i - 1].text != "__declspec") {
      open = i;
      break;
    }
  }
  if (open == std::string::npos) throw ParseError("no function header found");

  Signature sig;
  sig.name = toks[open - 1].text;

  std::vector<const Token*> ret;
  for (std::size_t i = 0; i + 1 < open; ++i) {
    const auto& t = toks[i];
    if (t.is("template")) throw UnsupportedSignature("template function");
    if (t.is(";") || t.is("}")) {
      // A preceding declaration; the header starts after it.
      ret.clear();
      sig.qualifiers.clear();
      sig.is_kernel = false;
      continue;
    }
    if (t.is("extern") || kFunctionQualifiers.contains(t.text)) {
      sig.qualifiers.push_back(t.text);
      if (t.is("__global__")) sig.is_kernel = true;
      continue;
    }
    ret.push_back(&t);
  }
  if (ret.empty()) throw ParseError("function '" + sig.name + "' has no return type");
  sig.return_type = join_type_tokens(ret);

  auto close = match_close(toks, open, "(", ")");
  if (close == std::string::npos) throw ParseError("unbalanced parentheses in parameter list");

  bool is_void_list = close == open + 2 && toks[open + 1].is("void");
  if (close > open + 1 && !is_void_list) {
    std::size_t start = open + 1;
    int depth = 0;
    for (std::size_t i = open + 1; i <= close; ++i) {
      const auto& t = toks[i];
      if (i < close && (t.is("(") || t.is("[") || t.is("{"))) ++depth;
      if (i < close && (t.is(")") || t.is("]") || t.is("}"))) --depth;
      if (i == close || (depth == 0 && t.is(","))) {
        if (start == i) throw ParseError("empty parameter in list");
        sig.params.push_back(parse_parameter(source, toks, start, i, sig.qualifiers));
        start = i + 1;
      }
    }
  }

  if (sig.is_kernel && sig.return_type != "void")
    throw ParseError("kernel '" + sig.name + "' must return void");
  return sig;
}

namespace {

struct DefinitionSpan {
  std::size_t header_token;  // first token of the definition
  std::size_t body_open;     // token index of '{'
  std::size_t body_close;    // token index of '}'
};

std::vector<DefinitionSpan> find_definitions(const std::vector<Token>& toks) {
  std::vector<DefinitionSpan> defs;
  std::size_t stmt_start = 0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const auto& t = toks[i];
    if (t.is(";")) {
      stmt_start = i + 1;
      continue;
    }
    if (!t.is("{")) continue;
    auto close = match_close(toks, i, "{", "}");
    // Walk back over trailing qualifiers to find a ')'.
    std::size_t j = i;
    while (j > stmt_start && (toks[j - 1].is("const") || toks[j - 1].is("noexcept") ||
                              toks[j - 1].is("override")))
      --j;
    bool is_function = j > stmt_start && toks[j - 1].is(")");
    if (is_function) defs.push_back({stmt_start, i, close});
    if (close == std::string::npos) break;
    i = close;
    stmt_start = close + 1;
    if (stmt_start < toks.size() && toks[stmt_start].is(";")) ++stmt_start;
  }
  return defs;
}

}  // namespace

std::vector<std::string> split_function_definitions(std::string_view source) {
  auto toks = lex::tokenize(source, {.skip_preprocessor = true});
  auto defs = find_definitions(toks);
  std::vector<std::string> chunks;
  std::size_t start = 0;
  for (std::size_t k = 0; k < defs.size(); ++k) {
    if (defs[k].body_close == std::string::npos) break;
    std::size_t end = toks[defs[k].body_close].end();
    if (k + 1 == defs.size()) end = source.size();
    chunks.push_back(trimmed(source.substr(start, end - start)));
    start = end;
  }
  return chunks;
}

std::size_t count_function_definitions(std::string_view source) {
  auto toks = lex::tokenize(source, {.skip_preprocessor = true});
  return find_definitions(toks).size();
}

Signature parse_wrapper_signature(std::string_view wrapper_source) {
  for (const auto& chunk : split_function_definitions(wrapper_source)) {
    auto sig = parse_signature(chunk);
    if (!sig.is_kernel) return sig;
  }
  throw ParseError("no host function found in wrapper");
}

FunctionUnit make_unit(std::string source, Language language,
                       std::optional<std::string> wrapper, std::string provenance,
                       std::optional<std::string> id) {
  auto defs = count_function_definitions(source);
  if (defs == 0) throw ParseError("no function definition found");
  if (defs > 1) throw ParseError("source contains " + std::to_string(defs) +
                                 " function definitions, expected exactly one");

  FunctionUnit unit;
  unit.signature = parse_signature(source);
  unit.name = unit.signature.name;
  if (wrapper && trimmed(*wrapper).empty()) wrapper.reset();

  if (language == Language::C) {
    if (unit.signature.is_kernel)
      throw ParseError("C unit declares kernel '" + unit.name + "'");
    if (wrapper) throw ParseError("C unit carries a kernel wrapper");
  } else if (!unit.signature.is_kernel && !wrapper) {
    throw ParseError("CUDA unit '" + unit.name + "' is neither a kernel nor wrapped");
  }
  if (wrapper) parse_wrapper_signature(*wrapper);

  unit.id = id && !id->empty() ? *id : unit_id(source);
  unit.language = language;
  unit.source = std::move(source);
  unit.wrapper_source = std::move(wrapper);
  unit.provenance = std::move(provenance);
  return unit;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Collector {
 public:
  Collector(IngestResult& result, std::optional<Language> filter)
      : result_(result), filter_(filter) {}

  void add(std::string location, std::string source, Language language,
           std::optional<std::string> wrapper, std::string provenance,
           std::optional<std::string> id) {
    if (filter_ && *filter_ != language) {
      ++result_.filtered;
      return;
    }
    try {
      auto unit = make_unit(source, language, std::move(wrapper), std::move(provenance),
                            std::move(id));
      auto key = unit_id(unit.source);
      if (!seen_sources_.insert(key).second) {
        ++result_.duplicates;
        return;
      }
      if (!seen_ids_.insert(unit.id).second) {
        result_.rejects.push_back({std::move(location), "duplicate id '" + unit.id + "'",
                                   std::move(source)});
        return;
      }
      result_.units.push_back(std::move(unit));
    } catch (const ParseError& e) {
      result_.rejects.push_back({std::move(location), e.what(), std::move(source)});
    }
  }

 private:
  IngestResult& result_;
  std::optional<Language> filter_;
  std::set<std::string> seen_sources_;
  std::set<std::string> seen_ids_;
};

void ingest_directory(const fs::path& dir, Collector& collector) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension();
    if (ext == ".c" || ext == ".cu") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    auto text = read_file(file);
    auto provenance = fs::relative(file, dir).string();
    if (file.extension() == ".c") {
      collector.add(file.string(), std::move(text), Language::C, std::nullopt, provenance,
                    std::nullopt);
      continue;
    }
    // A .cu file may hold a kernel followed by its host wrapper.
    auto chunks = split_function_definitions(text);
    if (chunks.size() == 2) {
      try {
        auto first = parse_signature(chunks[0]);
        auto second = parse_signature(chunks[1]);
        if (first.is_kernel != second.is_kernel) {
          bool kernel_first = first.is_kernel;
          collector.add(file.string(), kernel_first ? chunks[0] : chunks[1], Language::CUDA,
                        kernel_first ? chunks[1] : chunks[0], provenance, std::nullopt);
          continue;
        }
      } catch (const ParseError&) {
      }
    }
    collector.add(file.string(), std::move(text), Language::CUDA, std::nullopt, provenance,
                  std::nullopt);
  }
}

void ingest_jsonl(const fs::path& path, Collector& collector) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trimmed(line).empty()) continue;
    auto rec = json_io::parse(line, lineno);
    if (!rec.is_object()) throw ParseError("record is not a JSON object", lineno);
    if (!rec.contains("source") || !rec["source"].is_string())
      throw ParseError("record lacks a string 'source'", lineno);
    if (!rec.contains("language") || !rec["language"].is_string())
      throw ParseError("record lacks a string 'language'", lineno);
    auto lang = parse_language(rec["language"].get<std::string>());
    if (!lang) throw ParseError("unknown language '" + rec["language"].get<std::string>() + "'",
                                lineno);
    auto opt_string = [&](const char* key) -> std::optional<std::string> {
      if (!rec.contains(key) || rec[key].is_null()) return std::nullopt;
      if (!rec[key].is_string()) throw ParseError(std::string("'") + key + "' must be a string",
                                                  lineno);
      return rec[key].get<std::string>();
    };
    collector.add(path.string() + ":" + std::to_string(lineno),
                  rec["source"].get<std::string>(), *lang, opt_string("wrapper"),
                  opt_string("provenance").value_or(""), opt_string("id"));
  }
}

}  // namespace

IngestResult ingest(const fs::path& path, std::optional<Language> language) {
  std::error_code ec;
  auto status = fs::status(path, ec);
  if (ec || !fs::exists(status)) throw IoError("cannot read " + path.string());
  IngestResult result;
  Collector collector(result, language);
  if (fs::is_directory(status)) {
    ingest_directory(path, collector);
  } else {
    ingest_jsonl(path, collector);
  }
  return result;
}

void write_corpus_jsonl(const fs::path& path, const std::vector<FunctionUnit>& units) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& u : units) {
    json_io::ordered_json rec;
    rec["id"] = u.id;
    rec["language"] = std::string(to_string(u.language));
    rec["source"] = u.source;
    if (u.wrapper_source) rec["wrapper"] = *u.wrapper_source;
    if (!u.provenance.empty()) rec["provenance"] = u.provenance;
    out << rec.dump() << '\n';
  }
}

}  // namespace coverify
