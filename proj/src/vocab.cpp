#include "itformer/vocab.hpp"

#include <cctype>
#include <fstream>

#include "itformer/errors.hpp"

namespace itf {

namespace {

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '<') {
      bool matched = false;
      for (auto marker : Vocabulary::kReserved)
        if (text.substr(i, marker.size()) == marker) {
          words.emplace_back(marker);
          i += marker.size();
          matched = true;
          break;
        }
      if (matched) continue;
    }
    if (word_char(c)) {
      std::string w;
      while (i < text.size() && word_char(text[i]))
        w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i++]))));
      words.push_back(std::move(w));
      continue;
    }
    words.emplace_back(1, c);
    ++i;
  }
  return words;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  for (const auto& w : split_words(text)) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (auto r : kReserved) insert(std::string(r));
}

Vocabulary::Vocabulary(const std::vector<std::string>& words) : Vocabulary() {
  for (const auto& w : words) insert(w);
}

void Vocabulary::insert(const std::string& word) {
  if (index_.count(word)) return;
  index_.emplace(word, static_cast<int>(tokens_.size()));
  tokens_.push_back(word);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) words.push_back(line);
  for (std::size_t i = 0; i < kReserved.size(); ++i)
    if (i >= words.size() || words[i] != kReserved[i])
      throw IoError(path.string() + ": reserved token " + std::string(kReserved[i]) + " missing at line " +
                    std::to_string(i + 1));
  Vocabulary v;
  for (const auto& w : words) v.insert(w);
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
  if (!out) throw IoError("short write to " + path.string());
}

int Vocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw DimensionError("token id " + std::to_string(id) + " outside vocabulary of " +
                         std::to_string(tokens_.size()));
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& w : split_words(text)) ids.push_back(id(w));
  return ids;
}

std::string Vocabulary::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id == kPad || id == kBos || id == kEos) continue;
    if (!out.empty()) out.push_back(' ');
    out += token(id);
  }
  return out;
}

}  // namespace itf
