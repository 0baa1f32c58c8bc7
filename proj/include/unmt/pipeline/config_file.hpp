#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>

#include "unmt/nmt/config.hpp"

namespace unmt {

/// "key = value" per line; '#' starts a comment, blank lines are ignored.
/// Keys are grouped into sections by their dotted prefix ("model.", ...).
/// A repeated key or a line without '=' is a FormatError naming the line.
KeyValues parse_config_text(std::string_view text, const std::string& origin = "config");
KeyValues load_config_file(const std::filesystem::path& path);

// One "key = value" line per entry, sorted by key.
std::string format_config(const KeyValues& kv);

// ConfigError listing every key of kv that is not in consumed.
void reject_unknown_keys(const KeyValues& kv, const std::set<std::string>& consumed);

}  // namespace unmt
