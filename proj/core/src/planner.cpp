#include "syncap/planner.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "syncap/errors.hpp"

namespace syncap::planner {

namespace {

constexpr Tagset kGoldSets[] = {Tagset::pos, Tagset::dep, Tagset::chunk, Tagset::ccg};

unsigned bit(Tagset t) { return 1u << static_cast<unsigned>(t); }

}  // namespace

std::string_view to_string(Approach a) {
  switch (a) {
    case Approach::standard: return "standard";
    case Approach::sequential: return "sequential";
    case Approach::interleave: return "interleave";
    case Approach::multitask: return "multitask";
  }
  return "?";
}

std::string_view to_string(StreamKind k) {
  switch (k) {
    case StreamKind::standard: return "standard";
    case StreamKind::sequential: return "sequential";
    case StreamKind::interleave: return "interleave";
    case StreamKind::multitask_words: return "multitask-words";
    case StreamKind::multitask_tags: return "multitask-tags";
  }
  return "?";
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::word: return "WORD";
    case Role::tag: return "TAG";
    case Role::control: return "CONTROL";
  }
  return "?";
}

Approach approach_from_string(std::string_view s) {
  for (Approach a : {Approach::standard, Approach::sequential, Approach::interleave,
                     Approach::multitask})
    if (to_string(a) == s) return a;
  throw ConfigError("unknown approach: " + std::string(s));
}

StreamKind stream_kind_from_string(std::string_view s) {
  for (StreamKind k : {StreamKind::standard, StreamKind::sequential, StreamKind::interleave,
                       StreamKind::multitask_words, StreamKind::multitask_tags})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown stream kind: " + std::string(s));
}

Tagset effective_tagset(Approach a, Tagset t) {
  if (a == Approach::standard) return Tagset::none;
  if (t == Tagset::none)
    throw ConfigError("approach " + std::string(to_string(a)) + " needs a tag set");
  return t;
}

StreamKind decode_stream(Approach a) {
  switch (a) {
    case Approach::standard: return StreamKind::standard;
    case Approach::sequential: return StreamKind::sequential;
    case Approach::interleave: return StreamKind::interleave;
    case Approach::multitask: return StreamKind::multitask_words;
  }
  return StreamKind::standard;
}

void Vocabulary::add(std::string s, Role r, unsigned mask) {
  const int id = static_cast<int>(surfaces_.size());
  if (r == Role::word) words_.emplace(s, id);
  if (r == Role::tag) tags_.emplace(s, id);
  surfaces_.push_back(std::move(s));
  roles_.push_back(r);
  tag_sets_.push_back(mask);
}

Vocabulary Vocabulary::build(const std::vector<world::CorpusEntry>& corpus,
                             const std::vector<Tagset>& tagsets) {
  std::vector<std::int64_t> ids;
  for (const auto& e : corpus) ids.push_back(e.scene.id);
  return build(corpus, ids, tagsets);
}

Vocabulary Vocabulary::build(const std::vector<world::CorpusEntry>& corpus,
                             const std::vector<std::int64_t>& scene_ids,
                             const std::vector<Tagset>& tagsets) {
  if (corpus.empty()) throw EmptyInputError("vocabulary: empty corpus");
  const std::set<std::int64_t> wanted(scene_ids.begin(), scene_ids.end());
  std::set<std::string> words;
  std::map<std::string, unsigned> tags;
  for (const auto& e : corpus) {
    if (!wanted.count(e.scene.id)) continue;
    for (const auto& r : e.references) {
      words.insert(r.tokens.begin(), r.tokens.end());
      for (Tagset t : tagsets) {
        if (std::find(std::begin(kGoldSets), std::end(kGoldSets), t) == std::end(kGoldSets))
          continue;
        for (const auto& tag : r.tags.get(t)) tags[tag] |= bit(t);
      }
    }
  }
  Vocabulary v;
  for (auto c : {kBos, kEos, kPad, kUnk, kStartWords, kStartTags})
    v.add(std::string(c), Role::control, 0);
  v.add(std::string(kIdle), Role::tag, bit(Tagset::idle));
  for (const auto& w : words) v.add(w, Role::word, 0);
  for (const auto& [t, mask] : tags) v.add(t, Role::tag, mask);
  return v;
}

const std::string& Vocabulary::surface(int id) const {
  if (id < 0 || id >= static_cast<int>(surfaces_.size()))
    throw IndexError("symbol id out of range: " + std::to_string(id));
  return surfaces_[static_cast<std::size_t>(id)];
}

Role Vocabulary::role(int id) const {
  if (id < 0 || id >= static_cast<int>(roles_.size()))
    throw IndexError("symbol id out of range: " + std::to_string(id));
  return roles_[static_cast<std::size_t>(id)];
}

bool Vocabulary::tag_in(int id, Tagset t) const {
  return role(id) == Role::tag && (tag_sets_[static_cast<std::size_t>(id)] & bit(t)) != 0;
}

int Vocabulary::word_id(std::string_view w) const {
  auto it = words_.find(std::string(w));
  return it == words_.end() ? unk() : it->second;
}

int Vocabulary::tag_id(std::string_view t) const {
  auto it = tags_.find(std::string(t));
  if (it == tags_.end()) throw IndexError("tag not in vocabulary: " + std::string(t));
  return it->second;
}

bool Vocabulary::has_tag(std::string_view t) const { return tags_.count(std::string(t)) > 0; }

std::size_t Vocabulary::word_count() const { return words_.size(); }
std::size_t Vocabulary::tag_count() const { return tags_.size(); }

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < surfaces_.size(); ++i)
    out << i << '\t' << surfaces_[i] << '\t' << to_string(roles_[i]) << '\t' << tag_sets_[i]
        << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::size_t id;
    std::string surface, role;
    unsigned mask = 0;
    if (!(ss >> id) || ss.get() != '\t' || !std::getline(ss, surface, '\t') ||
        !std::getline(ss, role, '\t') || !(ss >> mask) || id != v.surfaces_.size())
      throw IoError("malformed vocabulary line: " + line);
    Role r = role == "WORD" ? Role::word : role == "TAG" ? Role::tag : Role::control;
    v.add(surface, r, mask);
  }
  if (v.size() < 7) throw IoError("vocabulary file too short: " + path.string());
  return v;
}

std::vector<PlannedSequence> encode(const std::vector<std::string>& tokens,
                                    const std::vector<std::string>& tags,
                                    Approach approach, Tagset tagset,
                                    const Vocabulary& vocab) {
  tagset = effective_tagset(approach, tagset);
  const bool idle = tagset == Tagset::idle;
  if (approach != Approach::standard && !idle && tags.size() != tokens.size())
    throw AlignmentError("encode: " + std::to_string(tokens.size()) + " tokens but " +
                         std::to_string(tags.size()) + " tags");
  auto tag_at = [&](std::size_t i) { return idle ? vocab.idle() : vocab.tag_id(tags[i]); };
  const std::size_t n = tokens.size();

  PlannedSequence s;
  s.tagset = tagset;
  switch (approach) {
    case Approach::standard:
      s.kind = StreamKind::standard;
      s.ids.push_back(vocab.bos());
      for (const auto& w : tokens) s.ids.push_back(vocab.word_id(w));
      break;
    case Approach::sequential:
      s.kind = StreamKind::sequential;
      s.ids.push_back(vocab.bos());
      for (std::size_t i = 0; i < n; ++i) s.ids.push_back(tag_at(i));
      for (const auto& w : tokens) s.ids.push_back(vocab.word_id(w));
      break;
    case Approach::interleave:
      s.kind = StreamKind::interleave;
      s.ids.push_back(vocab.bos());
      for (std::size_t i = 0; i < n; ++i) {
        s.ids.push_back(tag_at(i));
        s.ids.push_back(vocab.word_id(tokens[i]));
      }
      break;
    case Approach::multitask: {
      PlannedSequence t;
      t.tagset = tagset;
      t.kind = StreamKind::multitask_tags;
      t.ids.push_back(vocab.start_tags());
      for (std::size_t i = 0; i < n; ++i) t.ids.push_back(tag_at(i));
      t.ids.push_back(vocab.eos());
      s.kind = StreamKind::multitask_words;
      s.ids.push_back(vocab.start_words());
      for (const auto& w : tokens) s.ids.push_back(vocab.word_id(w));
      s.ids.push_back(vocab.eos());
      return {std::move(t), std::move(s)};
    }
  }
  s.ids.push_back(vocab.eos());
  return {std::move(s)};
}

std::vector<PlannedSequence> encode(const world::Reference& ref, Approach approach,
                                    Tagset tagset, const Vocabulary& vocab) {
  const Tagset eff = effective_tagset(approach, tagset);
  static const std::vector<std::string> kNoTags;
  const auto& tags = (eff == Tagset::none || eff == Tagset::idle) ? kNoTags : ref.tags.get(eff);
  return encode(ref.tokens, tags, approach, eff, vocab);
}

std::vector<std::string> strip(const std::vector<int>& ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (int id : ids)
    if (id >= 0 && id < static_cast<int>(vocab.size()) && vocab.role(id) == Role::word)
      out.push_back(vocab.surface(id));
  return out;
}

int start_symbol(StreamKind kind, const Vocabulary& vocab) {
  switch (kind) {
    case StreamKind::multitask_words: return vocab.start_words();
    case StreamKind::multitask_tags: return vocab.start_tags();
    default: return vocab.bos();
  }
}

ParsedOutput parse_generated(const std::vector<int>& ids, StreamKind kind, Tagset tagset,
                             const Vocabulary& vocab) {
  ParsedOutput out;
  const int V = static_cast<int>(vocab.size());
  bool ok = true;

  std::size_t begin = 0;
  const int start = start_symbol(kind, vocab);
  if (!ids.empty() && ids[0] == start) begin = 1;
  std::size_t end = ids.size();
  if (end > begin && ids[end - 1] == vocab.eos()) {
    --end;
  } else {
    ok = false;  // truncated at the length cap
  }

  // Role string of the body: W, T or C (control, always malformed).
  std::string pattern;
  for (std::size_t i = begin; i < end; ++i) {
    const int id = ids[i];
    if (id < 0 || id >= V) {
      ok = false;
      continue;
    }
    switch (vocab.role(id)) {
      case Role::word:
        out.tokens.push_back(vocab.surface(id));
        pattern += 'W';
        break;
      case Role::tag:
        out.tags.push_back(vocab.surface(id));
        pattern += 'T';
        if (!vocab.tag_in(id, tagset)) ok = false;
        break;
      case Role::control:
        pattern += 'C';
        ok = false;
        break;
    }
  }

  const std::size_t nw = out.tokens.size(), nt = out.tags.size();
  switch (kind) {
    case StreamKind::standard:
    case StreamKind::multitask_words:
      ok = ok && nt == 0 && nw > 0;
      break;
    case StreamKind::multitask_tags:
      ok = ok && nw == 0 && nt > 0;
      break;
    case StreamKind::sequential:
      ok = ok && nw > 0 && nw == nt && pattern == std::string(nt, 'T') + std::string(nw, 'W');
      break;
    case StreamKind::interleave: {
      bool alt = nw > 0 && nw == nt;
      for (std::size_t i = 0; alt && i < pattern.size(); ++i)
        alt = pattern[i] == (i % 2 == 0 ? 'T' : 'W');
      ok = ok && alt;
      break;
    }
  }
  out.wellformed = ok;
  return out;
}

}  // namespace syncap::planner
