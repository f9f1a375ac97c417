#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "syncap/world.hpp"

namespace syncap::planner {

using world::Tagset;

/// Training regimes. `multitask` expands into a tag stream and a word stream.
enum class Approach { standard, sequential, interleave, multitask };

/// What a single planned sequence looks like.
enum class StreamKind { standard, sequential, interleave, multitask_words, multitask_tags };

enum class Role { word, tag, control };

std::string_view to_string(Approach a);
std::string_view to_string(StreamKind k);
std::string_view to_string(Role r);
Approach approach_from_string(std::string_view s);
StreamKind stream_kind_from_string(std::string_view s);

/// Standard models carry no tags; everything else needs a real tag set.
Tagset effective_tagset(Approach a, Tagset t);

/// Stream the model is asked to produce at inference time.
StreamKind decode_stream(Approach a);

inline constexpr std::string_view kBos = "<s>";
inline constexpr std::string_view kEos = "</s>";
inline constexpr std::string_view kPad = "<pad>";
inline constexpr std::string_view kUnk = "<unk>";
inline constexpr std::string_view kStartWords = "<S>";
inline constexpr std::string_view kStartTags = "<T>";
inline constexpr std::string_view kIdle = "<idle>";

/// Joint symbol table over words, tags and the seven controls. Controls take
/// ids 0..6 in the order above; words then tags follow, each sorted. A tag
/// string shared by two tag sets (e.g. "conj") is one symbol.
class Vocabulary {
 public:
  static Vocabulary build(const std::vector<world::CorpusEntry>& corpus,
                          const std::vector<std::int64_t>& scene_ids,
                          const std::vector<Tagset>& tagsets);
  /// Every scene of the corpus.
  static Vocabulary build(const std::vector<world::CorpusEntry>& corpus,
                          const std::vector<Tagset>& tagsets);

  std::size_t size() const { return surfaces_.size(); }
  const std::string& surface(int id) const;
  Role role(int id) const;
  /// True if `id` is a tag observed under tag set `t` (<idle> belongs to idle only).
  bool tag_in(int id, Tagset t) const;

  int word_id(std::string_view w) const;  // <unk> when absent
  int tag_id(std::string_view t) const;   // throws IndexError when absent
  bool has_tag(std::string_view t) const;

  int bos() const { return 0; }
  int eos() const { return 1; }
  int pad() const { return 2; }
  int unk() const { return 3; }
  int start_words() const { return 4; }
  int start_tags() const { return 5; }
  int idle() const { return 6; }

  std::size_t word_count() const;
  std::size_t tag_count() const;

  /// One "id<TAB>surface<TAB>role<TAB>tagsets" line per symbol.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& o) const {
    return surfaces_ == o.surfaces_ && roles_ == o.roles_ && tag_sets_ == o.tag_sets_;
  }

 private:
  void add(std::string s, Role r, unsigned tagset_mask);
  std::vector<std::string> surfaces_;
  std::vector<Role> roles_;
  std::vector<unsigned> tag_sets_;
  std::unordered_map<std::string, int> words_, tags_;
};

struct PlannedSequence {
  std::vector<int> ids;
  StreamKind kind = StreamKind::standard;
  Tagset tagset = Tagset::none;
};

/// Throws AlignmentError when tags and tokens differ in length (ignored for
/// the standard approach and the idle tag set).
std::vector<PlannedSequence> encode(const std::vector<std::string>& tokens,
                                    const std::vector<std::string>& tags,
                                    Approach approach, Tagset tagset,
                                    const Vocabulary& vocab);

/// Picks the reference's gold tags for `tagset`.
std::vector<PlannedSequence> encode(const world::Reference& ref, Approach approach,
                                    Tagset tagset, const Vocabulary& vocab);

/// WORD-role surfaces in order.
std::vector<std::string> strip(const std::vector<int>& ids, const Vocabulary& vocab);

/// Control symbol a stream of this kind starts with.
int start_symbol(StreamKind kind, const Vocabulary& vocab);

struct ParsedOutput {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
  bool wellformed = false;
};

/// `ids` may or may not include the leading start control. A stream is
/// wellformed when it has at least one word, follows the role pattern of
/// `kind`, uses only tags of `tagset`, and ends with exactly one </s>.
ParsedOutput parse_generated(const std::vector<int>& ids, StreamKind kind,
                             Tagset tagset, const Vocabulary& vocab);

}  // namespace syncap::planner
