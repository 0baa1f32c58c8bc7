#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace unmt {

using Sentence = std::vector<std::string>;

// Splits on ASCII whitespace; no other normalization.
Sentence split_whitespace(std::string_view line);
std::string join(const Sentence& tokens, std::string_view sep = " ");

// Splits a UTF-8 string into code points. Invalid bytes become single-byte
// symbols rather than errors.
std::vector<std::string> utf8_chars(std::string_view word);

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);
std::vector<Sentence> read_tokenized(const std::filesystem::path& path);

}  // namespace unmt
