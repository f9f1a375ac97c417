#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "syncap/world.hpp"

namespace syncap::world {

/// One JSON object per line:
///   {"id", "rng_seed", "entities": [{"category","color","size","animacy",
///    "action": {"verb","object"}}], "features": {"rows","cols","data"},
///    "references": [{"tokens", "tags": {"pos","dep","chunk","ccg"},
///    "arcs": [[head, dependent, label], ...], "template",
///    "mentions": [[dependent, noun, relation], ...]}]}
/// Optional fields are omitted when absent; floats are written with
/// round-trip precision.
void write_corpus(const std::filesystem::path& path,
                  const std::vector<CorpusEntry>& corpus);
std::vector<CorpusEntry> read_corpus(const std::filesystem::path& path);

std::string corpus_entry_to_json(const CorpusEntry& entry);
CorpusEntry corpus_entry_from_json(const std::string& line);

}  // namespace syncap::world
