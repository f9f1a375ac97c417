#include "syncap/corpus_io.hpp"

#include <fstream>

#include "json.hpp"
#include "syncap/errors.hpp"

namespace syncap::world {

using nlohmann::json;

namespace {

json entity_json(const Entity& e) {
  json j;
  j["category"] = e.category;
  if (e.color) j["color"] = *e.color;
  if (e.size) j["size"] = *e.size;
  j["animacy"] = e.animacy == Animacy::animate ? "animate" : "inanimate";
  if (e.action) {
    json a;
    a["verb"] = e.action->verb;
    if (e.action->object) a["object"] = *e.action->object;
    j["action"] = std::move(a);
  }
  return j;
}

Entity entity_from(const json& j) {
  Entity e;
  e.category = j.at("category").get<std::string>();
  if (j.contains("color")) e.color = j["color"].get<std::string>();
  if (j.contains("size")) e.size = j["size"].get<std::string>();
  e.animacy = j.at("animacy").get<std::string>() == "animate" ? Animacy::animate
                                                              : Animacy::inanimate;
  if (j.contains("action")) {
    Action a;
    a.verb = j["action"].at("verb").get<std::string>();
    if (j["action"].contains("object")) a.object = j["action"]["object"].get<std::string>();
    e.action = std::move(a);
  }
  return e;
}

json reference_json(const Reference& r) {
  json j;
  j["tokens"] = r.tokens;
  j["tags"] = {{"pos", r.tags.pos},
               {"dep", r.tags.dep},
               {"chunk", r.tags.chunk},
               {"ccg", r.tags.ccg}};
  json arcs = json::array();
  for (const auto& a : r.arcs) arcs.push_back(json::array({a.head, a.dependent, a.label}));
  j["arcs"] = std::move(arcs);
  j["template"] = r.source_template;
  json mentions = json::array();
  for (const auto& m : r.mentions)
    mentions.push_back(json::array({m.dependent, m.noun, m.relation}));
  j["mentions"] = std::move(mentions);
  return j;
}

Reference reference_from(const json& j) {
  Reference r;
  r.tokens = j.at("tokens").get<std::vector<std::string>>();
  const json& t = j.at("tags");
  r.tags.pos = t.at("pos").get<std::vector<std::string>>();
  r.tags.dep = t.at("dep").get<std::vector<std::string>>();
  r.tags.chunk = t.at("chunk").get<std::vector<std::string>>();
  r.tags.ccg = t.at("ccg").get<std::vector<std::string>>();
  for (const auto& a : j.at("arcs"))
    r.arcs.push_back({a.at(0).get<int>(), a.at(1).get<int>(), a.at(2).get<std::string>()});
  r.source_template = j.value("template", "");
  if (j.contains("mentions"))
    for (const auto& m : j["mentions"])
      r.mentions.push_back({m.at(0).get<std::string>(), m.at(1).get<std::string>(),
                            m.at(2).get<std::string>()});
  return r;
}

}  // namespace

std::string corpus_entry_to_json(const CorpusEntry& entry) {
  json j;
  j["id"] = entry.scene.id;
  j["rng_seed"] = entry.scene.rng_seed;
  json ents = json::array();
  for (const auto& e : entry.scene.entities) ents.push_back(entity_json(e));
  j["entities"] = std::move(ents);
  j["features"] = {{"rows", entry.features.rows},
                   {"cols", entry.features.cols},
                   {"data", entry.features.data}};
  json refs = json::array();
  for (const auto& r : entry.references) refs.push_back(reference_json(r));
  j["references"] = std::move(refs);
  return j.dump();
}

CorpusEntry corpus_entry_from_json(const std::string& line) {
  CorpusEntry entry;
  try {
    const json j = json::parse(line);
    entry.scene.id = j.at("id").get<std::int64_t>();
    entry.scene.rng_seed = j.value("rng_seed", std::uint64_t{0});
    for (const auto& e : j.at("entities")) entry.scene.entities.push_back(entity_from(e));
    const json& f = j.at("features");
    entry.features.rows = f.at("rows").get<std::size_t>();
    entry.features.cols = f.at("cols").get<std::size_t>();
    entry.features.data = f.at("data").get<std::vector<double>>();
    if (entry.features.data.size() != entry.features.rows * entry.features.cols)
      throw IoError("feature matrix size does not match rows*cols");
    for (const auto& r : j.at("references")) entry.references.push_back(reference_from(r));
  } catch (const json::exception& ex) {
    throw IoError(std::string("malformed corpus record: ") + ex.what());
  }
  return entry;
}

void write_corpus(const std::filesystem::path& path,
                  const std::vector<CorpusEntry>& corpus) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& e : corpus) out << corpus_entry_to_json(e) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<CorpusEntry> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<CorpusEntry> corpus;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) corpus.push_back(corpus_entry_from_json(line));
  return corpus;
}

}  // namespace syncap::world
