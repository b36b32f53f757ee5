#pragma once

#include <filesystem>
#include <vector>

#include "fdd/error.hpp"
#include "fdd/types.hpp"

namespace fdd {

/// Loads a dataset from a JSON manifest plus its raw binary sidecar files
/// (little-endian IEEE-754 binary32, row-major, no header; sizes come from
/// the manifest). Referenced paths resolve relative to the manifest's
/// directory. Every invariant is checked; the first group of violations is
/// reported in the thrown Error, each naming the slide and field.
Dataset load_manifest(const std::filesystem::path& manifest_path);

/// Like load_manifest but collects every violation instead of throwing.
/// Only an unreadable or unparseable manifest still throws.
std::vector<Violation> inspect_manifest(const std::filesystem::path& manifest_path);

/// In-memory invariant check; empty result iff the dataset is well formed.
std::vector<Violation> validate_dataset(const Dataset& d);

/// Writes manifest.json plus per-slide binary files into dir (created if
/// needed) and returns the manifest path. Output reloads bit-exactly.
std::filesystem::path write_dataset(const Dataset& d,
                                    const std::filesystem::path& dir);

}  // namespace fdd
