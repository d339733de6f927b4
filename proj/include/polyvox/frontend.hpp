#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "polyvox/common.hpp"

namespace polyvox::frontend {

enum class UnitKind { phoneme, word_boundary, pause, sentence_mark };

const char* kind_name(UnitKind k);
UnitKind kind_from_name(const std::string& s);

struct TextUnit {
  UnitKind kind = UnitKind::phoneme;
  std::string symbol;  // phoneme label or punctuation character
  Vector features;     // length F, entries in {-1, 0, +1}

  bool operator==(const TextUnit& o) const {
    return kind == o.kind && symbol == o.symbol && features == o.features;
  }
};

struct PhoneSequence {
  std::vector<TextUnit> units;
  std::vector<int> boundary_indexes;  // sorted positions of word_boundary units
  int language_id = 0;

  bool operator==(const PhoneSequence& o) const {
    return units == o.units && boundary_indexes == o.boundary_indexes &&
           language_id == o.language_id;
  }

  // Enforces the type invariants; throws DataError on violation.
  void validate() const;
};

// Phoneme -> articulatory feature table, loaded from a UTF-8 TSV with a
// header of feature names and one row per symbol. Non-phoneme units get
// reserved one-hot slots appended after the table's features, so F =
// base features + kReservedSlots.
class FeatureInventory {
 public:
  static constexpr int kReservedSlots = 5;  // wb, pause, ".", "?", "!"

  static FeatureInventory load(const std::filesystem::path& path);

  Eigen::Index base_feature_count() const { return Eigen::Index(feature_names_.size()); }
  Eigen::Index feature_dim() const { return base_feature_count() + kReservedSlots; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::vector<std::string>& symbols() const { return symbol_order_; }
  bool contains(const std::string& symbol) const { return table_.count(symbol) != 0; }

  // Deterministic, language independent. Unknown symbols raise DataError
  // naming the symbol and its nearest inventory entries.
  Vector featurize(const std::string& symbol) const;

  // Reserved vectors for non-phoneme units share the phoneme feature space
  // (zeros there) plus a one-hot slot per distinct unit.
  Vector reserved_vector(UnitKind kind, const std::string& symbol) const;

  uint64_t content_hash() const { return content_hash_; }

 private:
  std::vector<std::string> feature_names_;
  std::vector<std::string> symbol_order_;
  std::map<std::string, Vector> table_;  // base-feature part only
  uint64_t content_hash_ = 0;
};

// Pluggable grapheme-to-phoneme backend.
class G2PBackend {
 public:
  virtual ~G2PBackend() = default;
  // Returns inventory phoneme labels; throws DataError naming the token on
  // failure (callers never skip silently).
  virtual std::vector<std::string> phonemize(const std::string& word,
                                             int language_id) const = 0;
};

// Lexicon-file backend: one `word<TAB>phoneme phoneme ...` entry per line.
// Lookups are lowercased (ASCII).
class LexiconG2P : public G2PBackend {
 public:
  void load_lexicon(int language_id, const std::filesystem::path& path);
  void add_entry(int language_id, const std::string& word,
                 std::vector<std::string> phones);
  std::vector<std::string> phonemize(const std::string& word,
                                     int language_id) const override;

 private:
  std::map<int, std::map<std::string, std::vector<std::string>>> lexicons_;
};

class Frontend {
 public:
  explicit Frontend(FeatureInventory inventory) : inventory_(std::move(inventory)) {}

  void register_language(int language_id) { languages_.insert(language_id); }
  bool language_registered(int id) const { return languages_.count(id) != 0; }
  const std::set<int>& languages() const { return languages_; }

  // Tokenizes on whitespace; commas and space-surrounded dashes become pause
  // units, terminal ".?!" become sentence marks, remaining inter-word gaps
  // become word-boundary units.
  PhoneSequence text_to_units(const std::string& text, int language_id,
                              const G2PBackend& g2p) const;

  std::string serialize_sequence(const PhoneSequence& seq) const;
  PhoneSequence parse_sequence(const std::string& record) const;

  const FeatureInventory& inventory() const { return inventory_; }

 private:
  FeatureInventory inventory_;
  std::set<int> languages_;
};

}  // namespace polyvox::frontend
