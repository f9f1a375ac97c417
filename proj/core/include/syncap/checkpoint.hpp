#pragma once

#include <filesystem>
#include <string>

#include "syncap/params.hpp"

namespace syncap::num {

/// Binary container: magic "SYNCAPCK", u32 version, u64 metadata length,
/// metadata (JSON text), u32 tensor count, then per tensor: u32 name length,
/// name, u32 element width (4 or 8), u32 rows, u32 cols, little-endian data.
template <class T>
void save_checkpoint(const std::filesystem::path& path, const ParamStore<T>& params,
                     const std::string& metadata);

/// Loads values into a store with the same names and shapes (element width
/// may differ) and returns the metadata text.
template <class T>
std::string load_checkpoint(const std::filesystem::path& path, ParamStore<T>& params);

/// Reads only the metadata record.
std::string read_checkpoint_metadata(const std::filesystem::path& path);

}  // namespace syncap::num
