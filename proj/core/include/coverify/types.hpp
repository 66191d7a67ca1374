#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace coverify {

enum class Language { C, CUDA };

enum class Direction { C_to_CUDA, CUDA_to_C };

std::string_view to_string(Language lang) noexcept;
std::string_view to_string(Direction dir) noexcept;

/// Accepts "c"/"cuda" in any case.
std::optional<Language> parse_language(std::string_view text) noexcept;
/// Accepts "C_to_CUDA"/"CUDA_to_C" (case-insensitive, '-' or '_').
std::optional<Direction> parse_direction(std::string_view text) noexcept;

/// Display name used in prompts: "C" or "CUDA".
std::string_view display_name(Language lang) noexcept;

Language source_language(Direction dir) noexcept;
Language target_language(Direction dir) noexcept;
Direction reverse(Direction dir) noexcept;
/// The direction that translates *from* `lang`.
Direction direction_from(Language lang) noexcept;

}  // namespace coverify
