#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coverify/types.hpp"

namespace coverify {

struct Parameter {
  std::string name;
  /// Base type with pointer stars, `const` and restrict annotations removed,
  /// e.g. "float" for `const float * __restrict__ x`.
  std::string type_text;
  bool is_pointer = false;
  bool is_const = false;
  int pointer_depth = 0;
  std::optional<std::string> default_value;

  bool operator==(const Parameter&) const = default;
};

struct Signature {
  std::string return_type;
  std::string name;
  std::vector<Parameter> params;
  bool is_kernel = false;
  /// Raw qualifier tokens in source order: function-level ones
  /// (`static`, `__global__`) and parameter annotations (`__restrict__`).
  std::vector<std::string> qualifiers;

  bool operator==(const Signature&) const = default;
};

struct FunctionUnit {
  std::string id;
  Language language = Language::C;
  std::string source;
  std::string name;
  Signature signature;
  /// CUDA only: the host function that makes the kernel callable like a
  /// plain function.
  std::optional<std::string> wrapper_source;
  std::string provenance;

  bool operator==(const FunctionUnit&) const = default;
};

/// Strips comments, collapses whitespace runs to one space and trims.
/// String and character literal contents are kept verbatim.
std::string normalize(std::string_view source);

/// Stable id: SHA-256 of the normalized source.
std::string unit_id(std::string_view source);

/// Parses the header of the first function in `source`. Throws ParseError,
/// or UnsupportedSignature for function-pointer, template and variadic
/// parameters.
Signature parse_signature(std::string_view source);

/// Number of top-level `{...}` bodies that follow a parameter list.
std::size_t count_function_definitions(std::string_view source);

/// Builds a validated unit. Throws ParseError when the source is not exactly
/// one supported function definition, or when the language does not agree
/// with the kernel qualifier / wrapper.
FunctionUnit make_unit(std::string source, Language language,
                       std::optional<std::string> wrapper = std::nullopt,
                       std::string provenance = {},
                       std::optional<std::string> id = std::nullopt);

struct IngestReject {
  std::string location;  // file path or "file:line"
  std::string reason;
  std::string source;
};

struct IngestResult {
  std::vector<FunctionUnit> units;
  std::vector<IngestReject> rejects;
  std::size_t duplicates = 0;
  /// Records skipped because they are not in the requested language.
  std::size_t filtered = 0;
};

/// Reads a directory of `.c`/`.cu` files or a JSON Lines corpus. When
/// `language` is set, only units of that language are kept. Throws IoError
/// for unreadable paths and ParseError (with line number) for malformed
/// records.
IngestResult ingest(const std::filesystem::path& path,
                    std::optional<Language> language = std::nullopt);

/// One JSON object per line, same schema `ingest` reads.
void write_corpus_jsonl(const std::filesystem::path& path,
                        const std::vector<FunctionUnit>& units);

/// Splits a source into one chunk per function definition; text before the
/// first definition stays with it.
std::vector<std::string> split_function_definitions(std::string_view source);

/// The name of the host function declared in a kernel wrapper, i.e. the
/// first non-kernel function definition.
Signature parse_wrapper_signature(std::string_view wrapper_source);

}  // namespace coverify
