#pragma once

#include <filesystem>

#include "unmt/nmt/model.hpp"

namespace unmt {

inline constexpr int kCheckpointVersion = 1;

/// Text checkpoint: version tag, full model config, vocabularies, frozen
/// key/query tables and every parameter as exact hexadecimal floats.
/// Loading is all-or-nothing: a truncated or malformed file throws
/// FormatError, a different version throws VersionError.
inline void save_checkpoint(const TranslationModel& model, const std::filesystem::path& path) { model.save(path); }
inline TranslationModel load_checkpoint(const std::filesystem::path& path) { return TranslationModel::load(path); }

}  // namespace unmt
