#include "polyvox/frontend.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "polyvox/editdist.hpp"
#include "polyvox/rng.hpp"

namespace polyvox::frontend {

namespace {

constexpr const char* kWordBoundarySymbol = "#";
const std::string kEmDash = "—";

bool is_sentence_mark(char c) { return c == '.' || c == '?' || c == '!'; }

std::string lowercase_ascii(std::string s) {
  for (char& c : s) c = char(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Reserved slot order after the base features.
int reserved_slot(UnitKind kind, const std::string& symbol) {
  switch (kind) {
    case UnitKind::word_boundary:
      return 0;
    case UnitKind::pause:
      return 1;
    case UnitKind::sentence_mark:
      if (symbol == ".") return 2;
      if (symbol == "?") return 3;
      if (symbol == "!") return 4;
      throw DataError("sentence mark symbol must be one of . ? ! (got '" + symbol + "')");
    default:
      throw DataError("phoneme units have no reserved vector");
  }
}

}  // namespace

const char* kind_name(UnitKind k) {
  switch (k) {
    case UnitKind::phoneme: return "phoneme";
    case UnitKind::word_boundary: return "word_boundary";
    case UnitKind::pause: return "pause";
    case UnitKind::sentence_mark: return "sentence_mark";
  }
  return "?";
}

UnitKind kind_from_name(const std::string& s) {
  if (s == "phoneme") return UnitKind::phoneme;
  if (s == "word_boundary") return UnitKind::word_boundary;
  if (s == "pause") return UnitKind::pause;
  if (s == "sentence_mark") return UnitKind::sentence_mark;
  throw ParseError("unknown unit kind: " + s);
}

void PhoneSequence::validate() const {
  if (units.empty()) throw DataError("PhoneSequence: empty unit list");
  std::vector<int> expected;
  for (size_t i = 0; i < units.size(); ++i)
    if (units[i].kind == UnitKind::word_boundary) expected.push_back(int(i));
  if (expected != boundary_indexes)
    throw DataError("PhoneSequence: boundary_indexes inconsistent with unit kinds");
  if (!expected.empty()) {
    if (expected.front() == 0 || expected.back() == int(units.size()) - 1)
      throw DataError("PhoneSequence: starts or ends with a word boundary");
    for (size_t i = 1; i < expected.size(); ++i)
      if (expected[i] == expected[i - 1] + 1)
        throw DataError("PhoneSequence: adjacent word boundaries");
  }
  Eigen::Index dim = units.front().features.size();
  for (const auto& u : units) {
    if (u.features.size() != dim)
      throw DataError("PhoneSequence: inconsistent feature dimension");
    for (Eigen::Index i = 0; i < u.features.size(); ++i) {
      double v = u.features(i);
      if (v != -1.0 && v != 0.0 && v != 1.0)
        throw DataError("PhoneSequence: feature value outside {-1, 0, +1}");
    }
  }
}

FeatureInventory FeatureInventory::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open feature inventory: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::string contents = buffer.str();

  FeatureInventory inv;
  inv.content_hash_ = hash_string(contents);

  std::istringstream lines(contents);
  std::string line;
  size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, '\t')) fields.push_back(field);
    if (line_no == 1) {
      if (fields.size() < 2)
        throw ParseError("feature inventory header needs at least one feature column");
      inv.feature_names_.assign(fields.begin() + 1, fields.end());
      continue;
    }
    if (fields.size() != inv.feature_names_.size() + 1)
      throw ParseError("feature inventory line " + std::to_string(line_no) +
                       ": expected " + std::to_string(inv.feature_names_.size() + 1) +
                       " fields, got " + std::to_string(fields.size()));
    const std::string& sym = fields[0];
    if (sym.empty() || sym.find_first_of(" \t") != std::string::npos)
      throw ParseError("feature inventory line " + std::to_string(line_no) +
                       ": bad symbol '" + sym + "'");
    if (inv.table_.count(sym))
      throw ParseError("feature inventory: duplicate symbol '" + sym + "'");
    Vector row(Eigen::Index(inv.feature_names_.size()));
    for (size_t i = 1; i < fields.size(); ++i) {
      const std::string& f = fields[i];
      if (f == "1" || f == "+1" || f == "+")
        row(Eigen::Index(i) - 1) = 1.0;
      else if (f == "-1" || f == "-")
        row(Eigen::Index(i) - 1) = -1.0;
      else if (f == "0")
        row(Eigen::Index(i) - 1) = 0.0;
      else
        throw ParseError("feature inventory line " + std::to_string(line_no) +
                         ": value '" + f + "' not in {-1, 0, +1}");
    }
    inv.symbol_order_.push_back(sym);
    inv.table_.emplace(sym, std::move(row));
  }
  if (inv.table_.empty()) throw ParseError("feature inventory has no symbols");
  return inv;
}

Vector FeatureInventory::featurize(const std::string& symbol) const {
  auto it = table_.find(symbol);
  if (it == table_.end()) {
    std::vector<std::pair<size_t, std::string>> scored;
    scored.reserve(symbol_order_.size());
    for (const auto& s : symbol_order_) scored.emplace_back(levenshtein(symbol, s), s);
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::string nearest;
    for (size_t i = 0; i < scored.size() && i < 3; ++i) {
      if (!nearest.empty()) nearest += ", ";
      nearest += scored[i].second;
    }
    throw DataError("unknown phoneme symbol '" + symbol +
                    "'; nearest inventory entries: " + nearest);
  }
  Vector full = Vector::Zero(feature_dim());
  full.head(base_feature_count()) = it->second;
  return full;
}

Vector FeatureInventory::reserved_vector(UnitKind kind, const std::string& symbol) const {
  Vector full = Vector::Zero(feature_dim());
  full(base_feature_count() + reserved_slot(kind, symbol)) = 1.0;
  return full;
}

void LexiconG2P::load_lexicon(int language_id, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon: " + path.string());
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError("lexicon " + path.string() + " line " + std::to_string(line_no) +
                       ": missing tab separator");
    std::string word = lowercase_ascii(line.substr(0, tab));
    std::istringstream rest(line.substr(tab + 1));
    std::vector<std::string> phones;
    std::string p;
    while (rest >> p) phones.push_back(p);
    if (word.empty() || phones.empty())
      throw ParseError("lexicon " + path.string() + " line " + std::to_string(line_no) +
                       ": empty word or phoneme list");
    lexicons_[language_id][word] = std::move(phones);
  }
}

void LexiconG2P::add_entry(int language_id, const std::string& word,
                           std::vector<std::string> phones) {
  lexicons_[language_id][lowercase_ascii(word)] = std::move(phones);
}

std::vector<std::string> LexiconG2P::phonemize(const std::string& word,
                                               int language_id) const {
  auto lex = lexicons_.find(language_id);
  if (lex == lexicons_.end())
    throw DataError("no lexicon registered for language " + std::to_string(language_id));
  auto it = lex->second.find(lowercase_ascii(word));
  if (it == lex->second.end())
    throw DataError("g2p failure: token '" + word + "' not in lexicon for language " +
                    std::to_string(language_id));
  return it->second;
}

PhoneSequence Frontend::text_to_units(const std::string& text, int language_id,
                                      const G2PBackend& g2p) const {
  if (!language_registered(language_id))
    throw ConfigError("unknown language_id " + std::to_string(language_id));

  // whitespace-normalized chunks
  std::vector<std::string> chunks;
  {
    std::istringstream ss(text);
    std::string c;
    while (ss >> c) chunks.push_back(c);
  }
  if (chunks.empty()) throw DataError("empty text after whitespace normalization");

  struct ChunkUnits {
    std::vector<TextUnit> units;
    bool is_dash = false;
  };
  std::vector<ChunkUnits> parsed;
  for (const auto& chunk : chunks) {
    ChunkUnits cu;
    if (chunk == "-" || chunk == kEmDash) {
      cu.is_dash = true;
      cu.units.push_back({UnitKind::pause, chunk,
                          inventory_.reserved_vector(UnitKind::pause, chunk)});
      parsed.push_back(std::move(cu));
      continue;
    }
    // peel trailing punctuation units, innermost first
    std::string word = chunk;
    std::vector<TextUnit> trailing;
    while (!word.empty()) {
      char c = word.back();
      if (is_sentence_mark(c)) {
        std::string sym(1, c);
        trailing.push_back({UnitKind::sentence_mark, sym,
                            inventory_.reserved_vector(UnitKind::sentence_mark, sym)});
      } else if (c == ',') {
        trailing.push_back(
            {UnitKind::pause, ",", inventory_.reserved_vector(UnitKind::pause, ",")});
      } else if (c == '"' || c == '\'' || c == ')' || c == ']' || c == ';' || c == ':') {
        // stripped without a unit of their own
      } else {
        break;
      }
      word.pop_back();
    }
    std::reverse(trailing.begin(), trailing.end());
    while (!word.empty() &&
           (word.front() == '"' || word.front() == '\'' || word.front() == '(' ||
            word.front() == '['))
      word.erase(word.begin());

    if (!word.empty()) {
      for (const auto& phone : g2p.phonemize(word, language_id))
        cu.units.push_back({UnitKind::phoneme, phone, inventory_.featurize(phone)});
    }
    for (auto& t : trailing) cu.units.push_back(std::move(t));
    parsed.push_back(std::move(cu));
  }

  PhoneSequence seq;
  seq.language_id = language_id;
  bool emitted_any = false;
  bool prev_dash = false;
  bool prev_ends_sentence = false;
  for (auto& cu : parsed) {
    if (cu.units.empty()) continue;
    // A gap becomes a word boundary unless it is already realized by a
    // sentence mark or by a standalone dash on either side.
    bool realized = prev_dash || cu.is_dash || prev_ends_sentence;
    if (emitted_any && !realized) {
      seq.boundary_indexes.push_back(int(seq.units.size()));
      seq.units.push_back(
          {UnitKind::word_boundary, kWordBoundarySymbol,
           inventory_.reserved_vector(UnitKind::word_boundary, kWordBoundarySymbol)});
    }
    for (auto& u : cu.units) seq.units.push_back(std::move(u));
    emitted_any = true;
    prev_dash = cu.is_dash;
    prev_ends_sentence = seq.units.back().kind == UnitKind::sentence_mark;
  }
  if (seq.units.empty()) throw DataError("text produced no units: '" + text + "'");
  seq.validate();
  return seq;
}

std::string Frontend::serialize_sequence(const PhoneSequence& seq) const {
  seq.validate();
  std::ostringstream out;
  out << "polyvox-phoneseq v1\n";
  out << "language " << seq.language_id << "\n";
  out << "units " << seq.units.size() << "\n";
  out << "boundaries ";
  if (seq.boundary_indexes.empty()) {
    out << "-";
  } else {
    for (size_t i = 0; i < seq.boundary_indexes.size(); ++i) {
      if (i) out << ",";
      out << seq.boundary_indexes[i];
    }
  }
  out << "\n";
  for (const auto& u : seq.units) out << "u " << kind_name(u.kind) << " " << u.symbol << "\n";
  return out.str();
}

PhoneSequence Frontend::parse_sequence(const std::string& record) const {
  std::istringstream in(record);
  std::string line;
  size_t line_no = 0;
  auto next_line = [&]() -> std::string {
    if (!std::getline(in, line))
      throw ParseError("phoneseq record line " + std::to_string(line_no + 1) +
                       ": unexpected end of record");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  if (next_line() != "polyvox-phoneseq v1")
    throw ParseError("phoneseq record line 1: bad magic");

  PhoneSequence seq;
  {
    std::istringstream ls(next_line());
    std::string tag;
    if (!(ls >> tag >> seq.language_id) || tag != "language")
      throw ParseError("phoneseq record line 2: expected 'language <id>'");
  }
  size_t n_units = 0;
  {
    std::istringstream ls(next_line());
    std::string tag;
    if (!(ls >> tag >> n_units) || tag != "units")
      throw ParseError("phoneseq record line 3: expected 'units <count>'");
  }
  {
    std::istringstream ls(next_line());
    std::string tag, list;
    if (!(ls >> tag >> list) || tag != "boundaries")
      throw ParseError("phoneseq record line 4: expected 'boundaries <list>'");
    if (list != "-") {
      std::istringstream bs(list);
      std::string tok;
      while (std::getline(bs, tok, ',')) {
        try {
          seq.boundary_indexes.push_back(std::stoi(tok));
        } catch (const std::exception&) {
          throw ParseError("phoneseq record line 4: bad boundary index '" + tok + "'");
        }
      }
    }
  }
  for (size_t i = 0; i < n_units; ++i) {
    std::istringstream ls(next_line());
    std::string tag, kind_str, symbol;
    if (!(ls >> tag >> kind_str >> symbol) || tag != "u")
      throw ParseError("phoneseq record line " + std::to_string(line_no) +
                       ": expected 'u <kind> <symbol>'");
    TextUnit u;
    u.kind = kind_from_name(kind_str);
    u.symbol = symbol;
    u.features = u.kind == UnitKind::phoneme
                     ? inventory_.featurize(symbol)
                     : inventory_.reserved_vector(u.kind, symbol);
    seq.units.push_back(std::move(u));
  }
  try {
    seq.validate();
  } catch (const DataError& e) {
    throw ParseError(std::string("phoneseq record invalid: ") + e.what());
  }
  return seq;
}

}  // namespace polyvox::frontend
